//! Run configuration files: pipeline parameters plus the translators and
//! resource files a run needs. Relative paths resolve against the directory
//! of the configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pivotmine::ngd::TermStats;
use pivotmine::translate::{ExternalCommand, OovPolicy};
use pivotmine::{IdentityAdapter, PipelineConfig, ProbDictionary, Resources, StopWordList, TerpResources, TerpWeights, TranslationAdapter};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AdapterSpec {
    /// Passes tokens through unchanged.
    Identity {
        #[serde(default = "pivot_lang")]
        lang: String,
    },
    /// `source<TAB>translation<TAB>probability` dictionary file.
    Dictionary {
        path: PathBuf,
        #[serde(default = "pivot_lang")]
        lang: String,
        #[serde(default)]
        oov: OovPolicy,
    },
    /// External process reading one sentence per line and writing
    /// tab-separated n-best translations per line.
    External {
        program: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default = "pivot_lang")]
        lang: String,
        #[serde(default)]
        concurrent: bool,
    },
}

fn pivot_lang() -> String {
    "en".to_string()
}

impl Default for AdapterSpec {
    fn default() -> Self {
        AdapterSpec::Identity { lang: pivot_lang() }
    }
}

impl AdapterSpec {
    pub fn build(&self, base: &Path) -> Result<Box<dyn TranslationAdapter>> {
        Ok(match self {
            AdapterSpec::Identity { lang } => Box::new(IdentityAdapter::new(lang.as_str())),
            AdapterSpec::Dictionary { path, lang, oov } => Box::new(ProbDictionary::load(lang.as_str(), &base.join(path), *oov)?),
            AdapterSpec::External {
                program,
                args,
                lang,
                concurrent,
            } => Box::new(ExternalCommand::new(lang.as_str(), program.as_str(), args.clone()).concurrent(*concurrent)),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub source_adapter: AdapterSpec,
    pub target_adapter: AdapterSpec,
    /// Direct source-to-target translator for inverted filtering.
    pub inverse_adapter: Option<AdapterSpec>,
    pub stop_words: Option<PathBuf>,
    pub stems: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub phrases: Option<PathBuf>,
    pub terp_weights: TerpWeights,
    /// Precomputed NGD statistics; otherwise built from the target side.
    pub ngd_stats: Option<PathBuf>,
}

pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl Loaded {
    pub fn read(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Loaded {
                config: RunConfig::default(),
                base: PathBuf::from("."),
            });
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Loaded {
            config,
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    fn resolve(&self, p: &Option<PathBuf>) -> Option<PathBuf> {
        p.as_ref().map(|p| self.base.join(p))
    }

    pub fn resources(&self) -> Result<Resources> {
        let c = &self.config;
        let stop_words = match self.resolve(&c.stop_words) {
            Some(p) => StopWordList::load(&p)?,
            None => StopWordList::default(),
        };
        let (stems, synonyms, phrases) = (self.resolve(&c.stems), self.resolve(&c.synonyms), self.resolve(&c.phrases));
        let terp = TerpResources::load(stems.as_deref(), synonyms.as_deref(), phrases.as_deref())?;
        let reference_stats = self.resolve(&c.ngd_stats).map(|p| TermStats::load(&p)).transpose()?;
        Ok(Resources {
            stop_words,
            terp,
            terp_weights: c.terp_weights,
            reference_stats,
        })
    }

    pub fn adapters(&self) -> Result<AdapterSet> {
        let c = &self.config;
        let inverse = c.inverse_adapter.as_ref().map(|s| s.build(&self.base)).transpose()?;
        Ok(AdapterSet {
            source: c.source_adapter.build(&self.base)?,
            target: c.target_adapter.build(&self.base)?,
            inverse,
        })
    }
}

pub struct AdapterSet {
    pub source: Box<dyn TranslationAdapter>,
    pub target: Box<dyn TranslationAdapter>,
    pub inverse: Option<Box<dyn TranslationAdapter>>,
}

impl AdapterSet {
    /// Hands out the inverse adapter only when the run filters by inverted
    /// translation.
    pub fn for_run(&self, inverted: bool) -> pivotmine::Adapters<'_> {
        pivotmine::Adapters {
            source: self.source.as_ref(),
            target: self.target.as_ref(),
            inverse: if inverted { self.inverse.as_deref() } else { None },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_tags() {
        let c: RunConfig = serde_json::from_str(
            r#"{"pipeline": {"metric": "terp"}, "source_adapter": {"kind": "dictionary", "path": "d.tsv"}}"#,
        )
        .unwrap();
        assert_eq!(c.pipeline.metric, pivotmine::Metric::Terp);
        assert!(matches!(c.source_adapter, AdapterSpec::Dictionary { oov: OovPolicy::CopyThrough, .. }));
        assert_eq!(c.target_adapter, AdapterSpec::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"pipline": {}}"#).is_err());
    }
}

//! Translation adapters mapping sentences into the pivot (or target) language.
//!
//! Three adapters ship with the crate: [`IdentityAdapter`], the beam-search
//! [`ProbDictionary`] translator and [`ExternalCommand`], which pipes sentences
//! through any MT system that speaks the line protocol.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, CorpusSide, Sentence, SentenceId};

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("translation of sentence {id} failed: {message}")]
    Failed { id: SentenceId, message: String },
    #[error("n_best must be at least 1")]
    ZeroBest,
    #[error("dictionary line {line}: {message}")]
    Dictionary { line: usize, message: String },
    #[error("dictionary entry {token:?}: {message}")]
    Distribution { token: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A ranked translation of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub origin_id: SentenceId,
    pub tokens: Vec<String>,
    pub score: f64,
}

/// Maps sentences to ranked hypotheses in `output_lang`.
///
/// Implementations must be deterministic in `(sentence, seed)` and return
/// between 1 and `n_best` hypotheses sorted by descending score.
pub trait TranslationAdapter: Send + Sync {
    fn output_lang(&self) -> &str;

    fn translate(
        &self,
        sentence: &Sentence,
        n_best: usize,
        seed: u64,
    ) -> Result<Vec<Hypothesis>, TranslateError>;

    /// Batch entry point. Adapters with per-call overhead override this.
    fn translate_batch(
        &self,
        sentences: &[&Sentence],
        n_best: usize,
        seed: u64,
    ) -> Result<Vec<Vec<Hypothesis>>, TranslateError> {
        sentences
            .iter()
            .map(|s| self.translate(s, n_best, seed))
            .collect()
    }

    /// Whether concurrent calls from several workers are allowed.
    fn is_concurrent(&self) -> bool {
        true
    }
}

pub fn translate_sentence(
    adapter: &dyn TranslationAdapter,
    sentence: &Sentence,
    n_best: usize,
    seed: u64,
) -> Result<Vec<Hypothesis>, TranslateError> {
    if n_best == 0 {
        return Err(TranslateError::ZeroBest);
    }
    let mut hyps = adapter.translate(sentence, n_best, seed)?;
    hyps.truncate(n_best);
    Ok(hyps)
}

/// Translates every sentence of a side, keyed by sentence id.
pub fn translate_corpus(
    adapter: &dyn TranslationAdapter,
    side: &CorpusSide,
    n_best: usize,
    seed: u64,
) -> Result<BTreeMap<SentenceId, Vec<Hypothesis>>, TranslateError> {
    if n_best == 0 {
        return Err(TranslateError::ZeroBest);
    }
    let refs: Vec<&Sentence> = side.sentences.iter().collect();
    let batches = if adapter.is_concurrent() && refs.len() > 256 {
        use rayon::prelude::*;
        refs.par_chunks(256)
            .map(|chunk| adapter.translate_batch(chunk, n_best, seed))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect::<Vec<_>>()
    } else {
        adapter.translate_batch(&refs, n_best, seed)?
    };
    Ok(refs
        .iter()
        .zip(batches)
        .map(|(s, mut hyps)| {
            hyps.truncate(n_best);
            (s.id, hyps)
        })
        .collect())
}

/// Returns each sentence's tokens unchanged as its only hypothesis.
#[derive(Debug, Clone)]
pub struct IdentityAdapter {
    lang: String,
}

impl IdentityAdapter {
    pub fn new(output_lang: impl Into<String>) -> Self {
        IdentityAdapter {
            lang: output_lang.into(),
        }
    }
}

impl TranslationAdapter for IdentityAdapter {
    fn output_lang(&self) -> &str {
        &self.lang
    }

    fn translate(&self, s: &Sentence, _n_best: usize, _seed: u64) -> Result<Vec<Hypothesis>, TranslateError> {
        Ok(vec![Hypothesis {
            origin_id: s.id,
            tokens: s.tokens.clone(),
            score: 0.0,
        }])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OovPolicy {
    #[default]
    CopyThrough,
    Drop,
}

/// Word-for-word probabilistic dictionary translator.
///
/// N-best lists come from a beam over per-token alternatives with beam width
/// `n_best`; a hypothesis scores the sum of its natural-log probabilities.
/// Because scores are additive and positions independent, the beam keeps
/// the exact top-n, so shorter lists are prefixes of longer ones.
#[derive(Debug, Clone)]
pub struct ProbDictionary {
    lang: String,
    entries: HashMap<String, Vec<(String, f64)>>,
    oov: OovPolicy,
}

const PROB_TOLERANCE: f64 = 1e-9;

impl ProbDictionary {
    pub fn new(
        output_lang: impl Into<String>,
        entries: HashMap<String, Vec<(String, f64)>>,
        oov: OovPolicy,
    ) -> Result<Self, TranslateError> {
        let mut entries = entries;
        for (token, alts) in entries.iter_mut() {
            let bad = |message: String| TranslateError::Distribution {
                token: token.clone(),
                message,
            };
            if alts.is_empty() {
                return Err(bad("no translations".into()));
            }
            if let Some((t, p)) = alts.iter().find(|(_, p)| *p <= 0.0 || !p.is_finite()) {
                return Err(bad(format!("non-positive probability {p} for {t:?}")));
            }
            let total: f64 = alts.iter().map(|(_, p)| p).sum();
            if (total - 1.0).abs() > PROB_TOLERANCE {
                return Err(bad(format!("probabilities sum to {total}")));
            }
            alts.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        }
        Ok(ProbDictionary {
            lang: output_lang.into(),
            entries,
            oov,
        })
    }

    /// Builds a dictionary where every entry is a single translation with
    /// probability 1.
    pub fn from_map<I, S, T>(output_lang: impl Into<String>, pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let entries = pairs
            .into_iter()
            .map(|(s, t)| (s.into(), vec![(t.into(), 1.0)]))
            .collect();
        ProbDictionary::new(output_lang, entries, OovPolicy::CopyThrough).expect("unit probabilities")
    }

    /// Parses `source<TAB>translation<TAB>probability` lines.
    pub fn parse(output_lang: impl Into<String>, text: &str, oov: OovPolicy) -> Result<Self, TranslateError> {
        let mut entries: HashMap<String, Vec<(String, f64)>> = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let err = |message: &str| TranslateError::Dictionary {
                line: idx + 1,
                message: message.to_string(),
            };
            if fields.len() != 3 {
                return Err(err("expected 3 tab-separated fields"));
            }
            let p: f64 = fields[2].trim().parse().map_err(|_| err("bad probability"))?;
            entries
                .entry(fields[0].to_string())
                .or_default()
                .push((fields[1].to_string(), p));
        }
        ProbDictionary::new(output_lang, entries, oov)
    }

    pub fn load(output_lang: impl Into<String>, path: &Path, oov: OovPolicy) -> Result<Self, TranslateError> {
        let text = fs::read_to_string(path).map_err(|source| TranslateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(output_lang, &text, oov)
    }

    /// Serializes in the same tab-separated format `parse` accepts, sorted by
    /// source token.
    pub fn to_tsv(&self) -> String {
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            for (t, p) in &self.entries[k] {
                out.push_str(&format!("{k}\t{t}\t{p}\n"));
            }
        }
        out
    }

    pub fn entries(&self) -> &HashMap<String, Vec<(String, f64)>> {
        &self.entries
    }

    pub fn translate_tokens(&self, tokens: &[String], n_best: usize) -> Vec<(Vec<String>, f64)> {
        let mut beam: Vec<(Vec<String>, f64)> = vec![(Vec::new(), 0.0)];
        for token in tokens {
            let alts: Vec<(&str, f64)> = match self.entries.get(token) {
                Some(alts) => alts.iter().map(|(t, p)| (t.as_str(), p.ln())).collect(),
                None => match self.oov {
                    OovPolicy::CopyThrough => vec![(token.as_str(), 0.0)],
                    OovPolicy::Drop => continue,
                },
            };
            let mut next = Vec::with_capacity(beam.len() * alts.len());
            for (prefix, score) in &beam {
                for (t, lp) in &alts {
                    let mut toks = prefix.clone();
                    toks.push((*t).to_string());
                    next.push((toks, score + lp));
                }
            }
            next.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            next.truncate(n_best);
            beam = next;
        }
        beam
    }
}

impl TranslationAdapter for ProbDictionary {
    fn output_lang(&self) -> &str {
        &self.lang
    }

    fn translate(&self, s: &Sentence, n_best: usize, _seed: u64) -> Result<Vec<Hypothesis>, TranslateError> {
        if n_best == 0 {
            return Err(TranslateError::ZeroBest);
        }
        Ok(self
            .translate_tokens(&s.tokens, n_best)
            .into_iter()
            .map(|(tokens, score)| Hypothesis {
                origin_id: s.id,
                tokens,
                score,
            })
            .collect())
    }
}

/// Runs an external program once per batch: one sentence per stdin line in,
/// up to `n_best` tab-separated translations per stdout line out.
///
/// The program gives no model scores, so rank `r` (0-based) is scored `-r`.
#[derive(Debug, Clone)]
pub struct ExternalCommand {
    lang: String,
    program: String,
    args: Vec<String>,
    serial: bool,
}

impl ExternalCommand {
    pub fn new(output_lang: impl Into<String>, program: impl Into<String>, args: Vec<String>) -> Self {
        ExternalCommand {
            lang: output_lang.into(),
            program: program.into(),
            args,
            serial: true,
        }
    }

    /// Allow the pipeline to call this adapter from several workers.
    pub fn concurrent(mut self, yes: bool) -> Self {
        self.serial = !yes;
        self
    }
}

impl TranslationAdapter for ExternalCommand {
    fn output_lang(&self) -> &str {
        &self.lang
    }

    fn translate(&self, s: &Sentence, n_best: usize, seed: u64) -> Result<Vec<Hypothesis>, TranslateError> {
        Ok(self.translate_batch(&[s], n_best, seed)?.pop().unwrap_or_default())
    }

    fn translate_batch(
        &self,
        sentences: &[&Sentence],
        n_best: usize,
        _seed: u64,
    ) -> Result<Vec<Vec<Hypothesis>>, TranslateError> {
        let Some(first) = sentences.first() else {
            return Ok(Vec::new());
        };
        let fail = |id: SentenceId, message: String| TranslateError::Failed { id, message };
        let mut input = String::new();
        for s in sentences {
            input.extend(s.text.chars().map(|c| if c == '\n' || c == '\t' || c == '\r' { ' ' } else { c }));
            input.push('\n');
        }
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(first.id, format!("cannot start {:?}: {e}", self.program)))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let output = child
            .wait_with_output()
            .map_err(|e| fail(first.id, e.to_string()))?;
        let _ = writer.join();
        if !output.status.success() {
            return Err(fail(
                first.id,
                format!(
                    "{:?} exited with {}: {}",
                    self.program,
                    output.status,
                    String::from_utf8_lossy(&output.stderr).trim()
                ),
            ));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let lines: Vec<&str> = stdout.lines().collect();
        if lines.len() != sentences.len() {
            let id = sentences.get(lines.len()).unwrap_or(first).id;
            return Err(fail(
                id,
                format!("expected {} output lines, got {}", sentences.len(), lines.len()),
            ));
        }
        Ok(sentences
            .iter()
            .zip(lines)
            .map(|(s, line)| {
                line.split('\t')
                    .take(n_best)
                    .enumerate()
                    .map(|(rank, text)| Hypothesis {
                        origin_id: s.id,
                        tokens: tokenize(text),
                        score: -(rank as f64),
                    })
                    .collect()
            })
            .collect())
    }

    fn is_concurrent(&self) -> bool {
        !self.serial
    }
}

//! Synthetic comparable corpora with planted parallel pairs, and
//! precision/recall/F-1 scoring of extraction runs against them.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ComparableCorpus, CorpusError, CorpusSide, SentenceId};
use crate::pipeline::{run_extraction, Adapters, PipelineConfig, Resources};
use crate::translate::ProbDictionary;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("gold pair ({0}, {1}) refers to a sentence missing from the corpus")]
    UnknownId(SentenceId, SentenceId),
    #[error("comparison needs at least 2 configurations, got {0}")]
    TooFewConfigs(usize),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError {
    let path = path.display().to_string();
    move |source| EvalError::Io { path, source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparability {
    #[default]
    High,
    Low,
}

impl Comparability {
    /// Chance that a distractor token comes from the topic pool of its day.
    fn topic_share(self) -> f64 {
        match self {
            Comparability::High => 0.5,
            Comparability::Low => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_parallel: usize,
    /// Distractor sentences added to each side.
    pub n_distractors: usize,
    pub date_jitter_days: u32,
    /// Per-token corruption probability on the target side of planted pairs.
    pub noise_rate: f64,
    pub comparability: Comparability,
    pub seed: u64,
    pub vocab_size: usize,
    pub topic_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub span_days: u32,
    pub start_date: NaiveDate,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_parallel: 100,
            n_distractors: 900,
            date_jitter_days: 0,
            noise_rate: 0.0,
            comparability: Comparability::High,
            seed: 0,
            vocab_size: 2000,
            topic_size: 40,
            min_len: 6,
            max_len: 14,
            span_days: 365,
            start_date: NaiveDate::from_ymd_opt(2010, 1, 1).expect("valid date"),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::Spec(m.to_string()));
        if !(0.0..1.0).contains(&self.noise_rate) {
            return bad("noise_rate must be in [0, 1)");
        }
        if self.vocab_size < 2 || self.topic_size == 0 || self.topic_size > self.vocab_size {
            return bad("need vocab_size >= 2 and 1 <= topic_size <= vocab_size");
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad("need 1 <= min_len <= max_len");
        }
        if self.span_days == 0 {
            return bad("span_days must be positive");
        }
        Ok(())
    }
}

/// Known-parallel `(source_id, target_id)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldAlignment {
    pub pairs: BTreeSet<(SentenceId, SentenceId)>,
}

/// Reads `source_id<TAB>target_id` from the first two columns of each line,
/// so extraction output files parse too.
pub fn parse_id_pairs(text: &str) -> Result<Vec<(SentenceId, SentenceId)>, EvalError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let mut id = || -> Result<SentenceId, EvalError> {
            let f = fields.next().unwrap_or("");
            f.trim().parse().map(SentenceId).map_err(|_| EvalError::Parse {
                line: idx + 1,
                message: format!("bad sentence id {f:?}"),
            })
        };
        out.push((id()?, id()?));
    }
    Ok(out)
}

pub fn load_id_pairs(path: &Path) -> Result<Vec<(SentenceId, SentenceId)>, EvalError> {
    parse_id_pairs(&fs::read_to_string(path).map_err(io_err(path))?)
}

impl GoldAlignment {
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        Ok(GoldAlignment {
            pairs: parse_id_pairs(text)?.into_iter().collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Self::parse(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn to_tsv(&self) -> String {
        self.pairs.iter().map(|(s, t)| format!("{s}\t{t}\n")).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        fs::write(path, self.to_tsv()).map_err(io_err(path))
    }

    pub fn check_ids(&self, corpus: &ComparableCorpus) -> Result<(), EvalError> {
        match self
            .pairs
            .iter()
            .find(|(s, t)| s.index() >= corpus.source.len() || t.index() >= corpus.target.len())
        {
            Some(&(s, t)) => Err(EvalError::UnknownId(s, t)),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SynthDictionaries {
    pub source_to_pivot: ProbDictionary,
    pub target_to_pivot: ProbDictionary,
    pub source_to_target: ProbDictionary,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub corpus: ComparableCorpus,
    pub gold: GoldAlignment,
    pub dictionaries: SynthDictionaries,
}

pub const SOURCE_LANG: &str = "src";
pub const TARGET_LANG: &str = "tgt";
pub const PIVOT_LANG: &str = "piv";

fn word(prefix: char, i: usize) -> String {
    format!("{prefix}{i}")
}

struct Draft {
    day: u32,
    text: String,
    planted: Option<usize>,
}

fn group_by_day(
    lang: &str,
    drafts: Vec<Draft>,
    start: NaiveDate,
    rng: &mut ChaCha8Rng,
) -> (CorpusSide, BTreeMap<usize, SentenceId>) {
    let mut days: BTreeMap<u32, Vec<Draft>> = BTreeMap::new();
    for d in drafts {
        days.entry(d.day).or_default().push(d);
    }
    let mut side = CorpusSide::new(lang);
    let mut planted = BTreeMap::new();
    for (day, mut list) in days {
        list.shuffle(rng);
        let first = side.len();
        let texts: Vec<&str> = list.iter().map(|d| d.text.as_str()).collect();
        let date = start + Days::new(u64::from(day));
        side.push_document(format!("{lang}-{date}"), date, &texts);
        for (k, d) in list.iter().enumerate() {
            if let Some(p) = d.planted {
                planted.insert(p, SentenceId((first + k) as u32));
            }
        }
    }
    (side, planted)
}

/// Builds a comparable corpus over two pseudo-languages whose words `s<i>`
/// and `t<i>` both translate to the pivot word `p<i>`.
///
/// Every random draw is made regardless of `noise_rate`, so for a fixed seed
/// the set of corrupted tokens only grows as the rate increases.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthCorpus, EvalError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let v = spec.vocab_size;
    let topics: Vec<Vec<usize>> = (0..spec.span_days)
        .map(|_| (0..spec.topic_size).map(|_| rng.gen_range(0..v)).collect())
        .collect();
    let sentence = |rng: &mut ChaCha8Rng, day: u32, topic_share: f64| -> Vec<usize> {
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        (0..len)
            .map(|_| {
                let topical = rng.gen_bool(topic_share);
                let pick = rng.gen_range(0..v);
                if topical {
                    topics[day as usize][pick % spec.topic_size]
                } else {
                    pick
                }
            })
            .collect()
    };
    let render = |prefix: char, ids: &[usize]| ids.iter().map(|&i| word(prefix, i)).collect::<Vec<_>>().join(" ");

    let mut src = Vec::new();
    let mut tgt = Vec::new();
    for p in 0..spec.n_parallel {
        let day = rng.gen_range(0..spec.span_days);
        let words = sentence(&mut rng, day, 0.5);
        let jitter = rng.gen_range(-(spec.date_jitter_days as i64)..=spec.date_jitter_days as i64);
        let tday = (day as i64 + jitter).clamp(0, spec.span_days as i64 - 1) as u32;
        let noisy: Vec<usize> = words
            .iter()
            .map(|&w| {
                let u: f64 = rng.gen();
                let offset = rng.gen_range(1..v);
                if u < spec.noise_rate {
                    (w + offset) % v
                } else {
                    w
                }
            })
            .collect();
        src.push(Draft {
            day,
            text: render('s', &words),
            planted: Some(p),
        });
        tgt.push(Draft {
            day: tday,
            text: render('t', &noisy),
            planted: Some(p),
        });
    }
    let share = spec.comparability.topic_share();
    for (prefix, drafts) in [('s', &mut src), ('t', &mut tgt)] {
        for _ in 0..spec.n_distractors {
            let day = rng.gen_range(0..spec.span_days);
            let words = sentence(&mut rng, day, share);
            drafts.push(Draft {
                day,
                text: render(prefix, &words),
                planted: None,
            });
        }
    }
    let (source, src_ids) = group_by_day(SOURCE_LANG, src, spec.start_date, &mut rng);
    let (target, tgt_ids) = group_by_day(TARGET_LANG, tgt, spec.start_date, &mut rng);
    let gold = GoldAlignment {
        pairs: src_ids.iter().map(|(p, s)| (*s, tgt_ids[p])).collect(),
    };
    let dictionaries = SynthDictionaries {
        source_to_pivot: ProbDictionary::from_map(PIVOT_LANG, (0..v).map(|i| (word('s', i), word('p', i)))),
        target_to_pivot: ProbDictionary::from_map(PIVOT_LANG, (0..v).map(|i| (word('t', i), word('p', i)))),
        source_to_target: ProbDictionary::from_map(TARGET_LANG, (0..v).map(|i| (word('s', i), word('t', i)))),
    };
    Ok(SynthCorpus {
        corpus: ComparableCorpus::new(source, target)?,
        gold,
        dictionaries,
    })
}

/// Writes the corpus sides, gold file and dictionaries into `dir`.
pub fn write_synthetic(synth: &SynthCorpus, dir: &Path) -> Result<(), EvalError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    synth.corpus.source.save_jsonl(&dir.join("source.jsonl"))?;
    synth.corpus.target.save_jsonl(&dir.join("target.jsonl"))?;
    synth.gold.save(&dir.join("gold.tsv"))?;
    let d = &synth.dictionaries;
    for (name, dict) in [
        ("source-pivot.tsv", &d.source_to_pivot),
        ("target-pivot.tsv", &d.target_to_pivot),
        ("source-target.tsv", &d.source_to_target),
    ] {
        let path = dir.join(name);
        fs::write(&path, dict.to_tsv()).map_err(io_err(&path))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and their harmonic mean. Empty extraction against an
/// empty gold set scores 1 everywhere; recall against an empty gold set is
/// otherwise 0.
pub fn score_extraction(extracted: &[(SentenceId, SentenceId)], gold: &GoldAlignment) -> Prf {
    let found: HashSet<&(SentenceId, SentenceId)> = extracted.iter().collect();
    if found.is_empty() && gold.is_empty() {
        return Prf {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let hits = found.iter().filter(|p| gold.pairs.contains(p)).count() as f64;
    let precision = if found.is_empty() { 1.0 } else { hits / found.len() as f64 };
    let recall = if gold.is_empty() { 0.0 } else { hits / gold.len() as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Prf { precision, recall, f1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledConfig {
    pub label: String,
    #[serde(default)]
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub scores: Option<Prf>,
    pub pairs: usize,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    /// False when rows ran in parallel.
    pub timings_comparable: bool,
}

pub const CSV_HEADER: &str = "label,precision,recall,f1,pairs,seconds";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ComparisonTable {
    /// Failed rows keep their label and leave the numeric columns empty.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            let label = csv_field(&r.label);
            match r.scores {
                Some(s) => out.push_str(&format!(
                    "{label},{},{},{},{},{:.3}\n",
                    s.precision, s.recall, s.f1, r.pairs, r.seconds
                )),
                None => out.push_str(&format!("{label},,,,,\n")),
            }
        }
        out
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
        writeln!(
            f,
            "{:width$}  {:>9}  {:>9}  {:>9}  {:>7}  {:>8}",
            "label", "precision", "recall", "f1", "pairs", "seconds"
        )?;
        for r in &self.rows {
            match (&r.scores, &r.error) {
                (Some(s), _) => writeln!(
                    f,
                    "{:width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}  {:>8.3}",
                    r.label, s.precision, s.recall, s.f1, r.pairs, r.seconds
                )?,
                (None, e) => writeln!(f, "{:width$}  error: {}", r.label, e.as_deref().unwrap_or("unknown"))?,
            }
        }
        if !self.timings_comparable {
            writeln!(f, "(rows ran in parallel; timings are not comparable)")?;
        }
        Ok(())
    }
}

fn run_row(
    run: &LabeledConfig,
    corpus: &ComparableCorpus,
    adapters: Adapters<'_>,
    resources: &Resources,
    gold: &GoldAlignment,
) -> ComparisonRow {
    let t = Instant::now();
    let adapters = Adapters {
        inverse: match run.config.filter_mode {
            crate::pipeline::FilterMode::Inverted => adapters.inverse,
            crate::pipeline::FilterMode::Candidate => None,
        },
        ..adapters
    };
    match run_extraction(corpus, adapters, resources, &run.config) {
        Ok(ex) => {
            let ids: Vec<_> = ex.pairs.iter().map(|p| (p.source_id, p.target_id)).collect();
            ComparisonRow {
                label: run.label.clone(),
                scores: Some(score_extraction(&ids, gold)),
                pairs: ids.len(),
                seconds: t.elapsed().as_secs_f64(),
                error: None,
            }
        }
        Err(e) => ComparisonRow {
            label: run.label.clone(),
            scores: None,
            pairs: 0,
            seconds: t.elapsed().as_secs_f64(),
            error: Some(e.to_string()),
        },
    }
}

/// Runs every configuration on the same corpus. A failing row records its
/// error and the remaining rows still run. The direct source-to-target
/// adapter is only handed to rows that use inverted filtering.
pub fn compare_runs(
    runs: &[LabeledConfig],
    corpus: &ComparableCorpus,
    adapters: Adapters<'_>,
    resources: &Resources,
    gold: &GoldAlignment,
    parallel: bool,
) -> Result<ComparisonTable, EvalError> {
    if runs.len() < 2 {
        return Err(EvalError::TooFewConfigs(runs.len()));
    }
    let rows = if parallel {
        runs.par_iter()
            .map(|r| run_row(r, corpus, adapters, resources, gold))
            .collect()
    } else {
        runs.iter().map(|r| run_row(r, corpus, adapters, resources, gold)).collect()
    };
    Ok(ComparisonTable {
        rows,
        timings_comparable: !parallel,
    })
}

//! Final pair selection: WER/TER/TERp scoring, inverted-translation scoring,
//! tail removal and threshold acceptance.

mod edit;
mod tail;
mod ter;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Sentence, SentenceId};
use crate::translate::{translate_sentence, TranslateError, TranslationAdapter};

pub use edit::{align, EditAlignment, EditOp};
pub use tail::{tail_removal, TailTrim};
pub use ter::{ter_alignment, terp_alignment, PhraseEntry, ShiftedAlignment, TerpResources, TerpWeights, MAX_SHIFT_LEN};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("empty reference")]
    EmptyReference,
    #[error("TERp resources: {0}")]
    Resource(String),
    #[error("unknown metric {0:?} (expected wer, ter or terp)")]
    UnknownMetric(String),
    #[error(transparent)]
    Translate(#[from] TranslateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Wer,
    #[default]
    Ter,
    Terp,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Wer => "wer",
            Metric::Ter => "ter",
            Metric::Terp => "terp",
        })
    }
}

impl FromStr for Metric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wer" => Ok(Metric::Wer),
            "ter" => Ok(Metric::Ter),
            "terp" => Ok(Metric::Terp),
            _ => Err(MetricError::UnknownMetric(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricScore {
    pub metric: Metric,
    /// Edit cost divided by reference length.
    pub value: f64,
    pub edits: f64,
}

pub fn wer(hyp: &[String], refr: &[String]) -> Result<MetricScore, MetricError> {
    if refr.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let edits = align(hyp, refr).cost;
    Ok(MetricScore {
        metric: Metric::Wer,
        value: edits / refr.len() as f64,
        edits,
    })
}

pub fn ter(hyp: &[String], refr: &[String]) -> Result<MetricScore, MetricError> {
    if refr.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let edits = ter_alignment(hyp, refr).cost;
    Ok(MetricScore {
        metric: Metric::Ter,
        value: edits / refr.len() as f64,
        edits,
    })
}

pub fn terp(hyp: &[String], refr: &[String], res: &TerpResources, weights: TerpWeights) -> Result<MetricScore, MetricError> {
    if refr.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let edits = terp_alignment(hyp, refr, res, weights).cost;
    Ok(MetricScore {
        metric: Metric::Terp,
        value: edits / refr.len() as f64,
        edits,
    })
}

/// A metric together with the TERp resources it may need.
#[derive(Debug, Clone, Default)]
pub struct Scorer {
    pub metric: Metric,
    pub resources: TerpResources,
    pub weights: TerpWeights,
}

impl Scorer {
    pub fn new(metric: Metric) -> Self {
        Scorer {
            metric,
            ..Default::default()
        }
    }

    pub fn score(&self, hyp: &[String], refr: &[String]) -> Result<MetricScore, MetricError> {
        match self.metric {
            Metric::Wer => wer(hyp, refr),
            Metric::Ter => ter(hyp, refr),
            Metric::Terp => terp(hyp, refr, &self.resources, self.weights),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectedBy {
    #[default]
    CandidateFilter,
    InvertedTranslation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub source_id: SentenceId,
    pub target_id: SentenceId,
    pub metric: Metric,
    /// Lower is better.
    pub score: f64,
    pub selected_by: SelectedBy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailTrim>,
}

/// Picks the candidate with the lowest metric value against the query, ties
/// to the lower id. Candidates with an empty token sequence are skipped.
pub fn best_candidate<T: AsRef<[String]>>(
    query: &[String],
    source_id: SentenceId,
    cands: &[(SentenceId, T)],
    scorer: &Scorer,
) -> Option<ScoredPair> {
    let mut best: Option<(f64, SentenceId)> = None;
    for (id, toks) in cands {
        let Ok(s) = scorer.score(query, toks.as_ref()) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((v, bid)) => s.value < v || (s.value == v && *id < bid),
        };
        if better {
            best = Some((s.value, *id));
        }
    }
    best.map(|(score, target_id)| ScoredPair {
        source_id,
        target_id,
        metric: scorer.metric,
        score,
        selected_by: SelectedBy::CandidateFilter,
        tail: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertedScore {
    pub score: f64,
    pub hypotheses: usize,
}

/// Sum of metric values of the candidate against each hypothesis in an
/// already computed n-best list.
pub fn sum_over_hypotheses<H: AsRef<[String]>>(hyps: &[H], candidate: &[String], scorer: &Scorer) -> Result<InvertedScore, MetricError> {
    let mut score = 0.0;
    for h in hyps {
        score += scorer.score(h.as_ref(), candidate)?.value;
    }
    Ok(InvertedScore {
        score,
        hypotheses: hyps.len(),
    })
}

/// Translates the original source sentence straight into the target
/// language and sums the metric of the candidate against each of the `n`
/// best translations.
pub fn inverted_translation_score(
    src: &Sentence,
    candidate: &Sentence,
    adapter: &dyn TranslationAdapter,
    n: usize,
    seed: u64,
    scorer: &Scorer,
) -> Result<InvertedScore, MetricError> {
    let hyps = translate_sentence(adapter, src, n, seed)?;
    let toks: Vec<&[String]> = hyps.iter().map(|h| h.tokens.as_slice()).collect();
    sum_over_hypotheses(&toks, &candidate.tokens, scorer)
}

fn pair_order(a: &ScoredPair, b: &ScoredPair) -> std::cmp::Ordering {
    a.score
        .total_cmp(&b.score)
        .then_with(|| a.source_id.cmp(&b.source_id))
        .then_with(|| a.target_id.cmp(&b.target_id))
}

pub fn sort_pairs(pairs: &mut [ScoredPair]) {
    pairs.sort_by(pair_order);
}

/// Keeps pairs scoring at most `threshold`, ordered by score then ids.
pub fn accept_pairs(scored: &[ScoredPair], threshold: f64) -> Vec<ScoredPair> {
    let mut out: Vec<ScoredPair> = scored.iter().filter(|p| p.score <= threshold).cloned().collect();
    sort_pairs(&mut out);
    out
}

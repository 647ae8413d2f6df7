//! Candidate selection that blends the IR ranking with NGD similarity
//! ("modified IR") and merges it with the NGD top list.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::SentenceId;
use crate::ir::IrHit;
use crate::ngd::fraction_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// `Top(N)_NGD ∪ Top(M)_ModifiedIR`
    #[default]
    Union,
    /// `Top(X%)_NGD ∩ Top(M)_ModifiedIR`
    Intersection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: SentenceId,
    pub ir_score: f64,
    pub ngd: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub query_id: SentenceId,
    pub mode: SelectionMode,
    /// Sorted by descending combined score, ties to the lower id.
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn ids(&self) -> Vec<SentenceId> {
        self.candidates.iter().map(|c| c.id).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionParams {
    pub n_top_ngd: usize,
    pub m_top_ir: usize,
    pub mode: SelectionMode,
    /// NGD weight in the blend. Zero also turns off the `Top(N)_NGD` path,
    /// leaving plain IR selection.
    pub lambda: f64,
    /// Fraction defining `Top(X%)_NGD` for intersection mode.
    pub x_percent: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            n_top_ngd: 5,
            m_top_ir: 7,
            mode: SelectionMode::Union,
            lambda: 0.5,
            x_percent: 0.4,
        }
    }
}

/// `(1 - lambda) * ir_score / max_ir + lambda * (1 - min(ngd, 1))`, with the
/// IR part taken as 0 when `max_ir` is 0.
pub fn combined_score(ir_score: f64, max_ir: f64, ngd: f64, lambda: f64) -> f64 {
    let norm = if max_ir > 0.0 { ir_score / max_ir } else { 0.0 };
    (1.0 - lambda) * norm + lambda * (1.0 - ngd.min(1.0))
}

fn by_combined(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.combined.total_cmp(&a.combined).then_with(|| a.id.cmp(&b.id))
}

/// Builds the candidate set of one query.
///
/// `ngd_ranked` holds every in-window candidate with its dissimilarity to
/// the query, sorted ascending (ties by id). IR hits missing from it are
/// treated as maximally dissimilar.
pub fn select_candidates(
    query_id: SentenceId,
    ir_hits: &[IrHit],
    ngd_ranked: &[(SentenceId, f64)],
    params: &SelectionParams,
) -> CandidateSet {
    let lambda = params.lambda;
    let ngd_of: HashMap<SentenceId, f64> = ngd_ranked.iter().copied().collect();
    let max_ir = ir_hits.iter().map(|h| h.ir_score).fold(0.0, f64::max);
    let ir_of: HashMap<SentenceId, f64> = ir_hits.iter().map(|h| (h.sentence_id, h.ir_score)).collect();
    let make = |id: SentenceId| {
        let ir_score = ir_of.get(&id).copied().unwrap_or(0.0);
        let ngd = ngd_of.get(&id).copied().unwrap_or(1.0);
        Candidate {
            id,
            ir_score,
            ngd,
            combined: combined_score(ir_score, max_ir, ngd, lambda),
        }
    };

    let mut modified: Vec<Candidate> = ir_hits.iter().map(|h| make(h.sentence_id)).collect();
    modified.sort_by(by_combined);
    modified.truncate(params.m_top_ir);

    let mut chosen: Vec<Candidate> = match params.mode {
        SelectionMode::Union => {
            let mut seen: HashSet<SentenceId> = modified.iter().map(|c| c.id).collect();
            let mut out = modified;
            if lambda > 0.0 {
                for (id, _) in ngd_ranked.iter().take(params.n_top_ngd) {
                    if seen.insert(*id) {
                        out.push(make(*id));
                    }
                }
            }
            out
        }
        SelectionMode::Intersection => {
            let keep = fraction_count(ngd_ranked.len(), params.x_percent);
            let top_x: HashSet<SentenceId> = ngd_ranked[..keep].iter().map(|(id, _)| *id).collect();
            modified.into_iter().filter(|c| top_x.contains(&c.id)).collect()
        }
    };
    chosen.sort_by(by_combined);
    CandidateSet {
        query_id,
        mode: params.mode,
        candidates: chosen,
    }
}

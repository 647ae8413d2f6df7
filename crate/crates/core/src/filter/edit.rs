//! Token-level minimum edit alignment.

use std::collections::HashMap;

/// One step of an alignment that rewrites the hypothesis into the reference.
/// Positions index the hypothesis (`hyp`) and reference (`refr`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EditOp {
    Match { hyp: usize, refr: usize },
    Substitute { hyp: usize, refr: usize },
    /// Reference token with no hypothesis counterpart.
    Insert { refr: usize },
    /// Hypothesis token with no reference counterpart.
    Delete { hyp: usize },
    /// Block of `len` hypothesis tokens starting at `from` moved so that it
    /// starts at `to` in the shifted sequence.
    Shift { from: usize, len: usize, to: usize },
    StemMatch { hyp: usize, refr: usize },
    SynonymMatch { hyp: usize, refr: usize },
    Phrase { hyp: usize, hyp_len: usize, refr: usize, refr_len: usize },
}

impl EditOp {
    pub fn is_match(&self) -> bool {
        matches!(self, EditOp::Match { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditAlignment {
    pub ops: Vec<EditOp>,
    pub cost: f64,
}

impl EditAlignment {
    /// Rebuilds the reference from the ops and the (already shifted)
    /// hypothesis. Shift ops are ignored here.
    pub fn replay<T: Clone>(&self, hyp: &[T], refr: &[T]) -> Vec<T> {
        let mut out = Vec::new();
        for op in &self.ops {
            match *op {
                EditOp::Match { hyp: h, .. } => out.push(hyp[h].clone()),
                EditOp::Substitute { refr: r, .. }
                | EditOp::StemMatch { refr: r, .. }
                | EditOp::SynonymMatch { refr: r, .. }
                | EditOp::Insert { refr: r } => out.push(refr[r].clone()),
                EditOp::Phrase { refr: r, refr_len, .. } => out.extend_from_slice(&refr[r..r + refr_len]),
                EditOp::Delete { .. } | EditOp::Shift { .. } => {}
            }
        }
        out
    }

    /// Number of non-match operations.
    pub fn edit_count(&self) -> usize {
        self.ops.iter().filter(|op| !op.is_match()).count()
    }
}

/// Multi-token substitutions keyed by exclusive end `(h_end, r_end)`, each
/// as `(hyp_len, refr_len, cost)`.
pub(crate) type PhraseSpans = HashMap<(usize, usize), Vec<(usize, usize, f64)>>;

/// Substitution-cost model for the alignment DP.
pub(crate) trait SubCost {
    /// Cost and op kind of aligning `hyp[h]` with `refr[r]`.
    fn sub(&self, hyp: &[String], refr: &[String], h: usize, r: usize) -> (f64, EditOp);
    fn insertion(&self) -> f64 {
        1.0
    }
    fn deletion(&self) -> f64 {
        1.0
    }
    fn phrases(&self, _hyp: &[String], _refr: &[String]) -> PhraseSpans {
        PhraseSpans::new()
    }
}

pub(crate) struct UnitCost;

impl SubCost for UnitCost {
    fn sub(&self, hyp: &[String], refr: &[String], h: usize, r: usize) -> (f64, EditOp) {
        if hyp[h] == refr[r] {
            (0.0, EditOp::Match { hyp: h, refr: r })
        } else {
            (1.0, EditOp::Substitute { hyp: h, refr: r })
        }
    }
}

const EPS: f64 = 1e-12;

#[derive(Clone, Copy)]
enum Back {
    Start,
    Diag(EditOp),
    Up,
    Left,
    Phrase(usize, usize),
}

/// Minimum-cost alignment by dynamic programming. On equal cost, prefers
/// diagonal steps, then deletions, then insertions.
pub(crate) fn align_with<C: SubCost>(hyp: &[String], refr: &[String], costs: &C) -> EditAlignment {
    let (n, m) = (hyp.len(), refr.len());
    let width = m + 1;
    let mut dp = vec![0.0f64; (n + 1) * width];
    let mut back = vec![Back::Start; (n + 1) * width];
    let phrases = costs.phrases(hyp, refr);
    for i in 1..=n {
        dp[i * width] = dp[(i - 1) * width] + costs.deletion();
        back[i * width] = Back::Up;
    }
    for j in 1..=m {
        dp[j] = dp[j - 1] + costs.insertion();
        back[j] = Back::Left;
    }
    for i in 1..=n {
        for j in 1..=m {
            let (sc, op) = costs.sub(hyp, refr, i - 1, j - 1);
            let mut best = dp[(i - 1) * width + j - 1] + sc;
            let mut how = Back::Diag(op);
            let up = dp[(i - 1) * width + j] + costs.deletion();
            if up < best - EPS {
                best = up;
                how = Back::Up;
            }
            let left = dp[i * width + j - 1] + costs.insertion();
            if left < best - EPS {
                best = left;
                how = Back::Left;
            }
            if let Some(list) = phrases.get(&(i, j)) {
                for &(hl, rl, c) in list {
                    let v = dp[(i - hl) * width + j - rl] + c;
                    if v < best - EPS {
                        best = v;
                        how = Back::Phrase(hl, rl);
                    }
                }
            }
            dp[i * width + j] = best;
            back[i * width + j] = how;
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match back[i * width + j] {
            Back::Diag(op) => {
                ops.push(op);
                i -= 1;
                j -= 1;
            }
            Back::Up => {
                ops.push(EditOp::Delete { hyp: i - 1 });
                i -= 1;
            }
            Back::Left => {
                ops.push(EditOp::Insert { refr: j - 1 });
                j -= 1;
            }
            Back::Phrase(hl, rl) => {
                ops.push(EditOp::Phrase {
                    hyp: i - hl,
                    hyp_len: hl,
                    refr: j - rl,
                    refr_len: rl,
                });
                i -= hl;
                j -= rl;
            }
            Back::Start => unreachable!("start cell reached early"),
        }
    }
    ops.reverse();
    EditAlignment {
        ops,
        cost: dp[n * width + m],
    }
}

/// Unit-cost Levenshtein alignment over tokens.
pub fn align(hyp: &[String], refr: &[String]) -> EditAlignment {
    align_with(hyp, refr, &UnitCost)
}

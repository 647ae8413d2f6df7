//! Translation edit rate with greedy block shifts, and the TERp extension
//! with stem, synonym and phrase substitutions.
//!
//! Shift search follows tercom: a block may move only if it matches the
//! reference at the destination, the block holds at least one hypothesis
//! error, and the destination span holds at least one reference error.
//! Candidate destinations sit next to the hypothesis tokens aligned with the
//! destination span. Each round applies the shift with the largest net gain
//! (edit reduction minus the shift cost); the first candidate found wins ties,
//! scanning start positions left to right and longer blocks first.
//!
//! Greedy search misses sequences whose first shift gains nothing on its own.
//! When the hypothesis has at most [`EXACT_SEARCH_LIMIT`] distinct
//! arrangements, TER is instead the exact minimum over all sequences of
//! unconstrained block moves, found by a breadth-first search bounded by the
//! greedy result.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::edit::{align_with, EditAlignment, EditOp, PhraseSpans, SubCost, UnitCost};
use super::MetricError;

/// Longest block considered for a single shift.
pub const MAX_SHIFT_LEN: usize = 10;

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedAlignment {
    /// Hypothesis after all shifts.
    pub shifted: Vec<String>,
    /// Shift ops in the order they were applied.
    pub shifts: Vec<EditOp>,
    /// Alignment of `shifted` against the reference.
    pub alignment: EditAlignment,
    /// Shift cost plus final alignment cost.
    pub cost: f64,
}

impl ShiftedAlignment {
    pub fn ops(&self) -> impl Iterator<Item = &EditOp> {
        self.shifts.iter().chain(&self.alignment.ops)
    }
}

struct AlignView {
    hyp_err: Vec<bool>,
    ref_err: Vec<bool>,
    /// Hypothesis position aligned with each reference position, or the last
    /// hypothesis position consumed before it (-1 when none).
    ref_to_hyp: Vec<isize>,
}

fn view(al: &EditAlignment, n: usize, m: usize) -> AlignView {
    let mut hyp_err = vec![true; n];
    let mut ref_err = vec![true; m];
    let mut ref_to_hyp = vec![-1isize; m];
    let mut last_h: isize = -1;
    for op in &al.ops {
        match *op {
            EditOp::Match { hyp, refr } => {
                hyp_err[hyp] = false;
                ref_err[refr] = false;
                ref_to_hyp[refr] = hyp as isize;
                last_h = hyp as isize;
            }
            EditOp::Substitute { hyp, refr }
            | EditOp::StemMatch { hyp, refr }
            | EditOp::SynonymMatch { hyp, refr } => {
                ref_to_hyp[refr] = hyp as isize;
                last_h = hyp as isize;
            }
            EditOp::Phrase {
                hyp,
                hyp_len,
                refr,
                refr_len,
            } => {
                for k in 0..refr_len {
                    ref_to_hyp[refr + k] = (hyp + k.min(hyp_len.saturating_sub(1))) as isize;
                }
                last_h = (hyp + hyp_len) as isize - 1;
            }
            EditOp::Insert { refr } => ref_to_hyp[refr] = last_h,
            EditOp::Delete { hyp } => last_h = hyp as isize,
            EditOp::Shift { .. } => {}
        }
    }
    AlignView {
        hyp_err,
        ref_err,
        ref_to_hyp,
    }
}

/// Moves `seq[from..from+len]` so that it is inserted before original index
/// `insert_at`. Returns the new sequence and the block's new start.
fn apply_shift(seq: &[String], from: usize, len: usize, insert_at: usize) -> (Vec<String>, usize) {
    let mut rest: Vec<String> = Vec::with_capacity(seq.len());
    rest.extend_from_slice(&seq[..from]);
    rest.extend_from_slice(&seq[from + len..]);
    let to = if insert_at > from { insert_at - len } else { insert_at };
    let mut out = Vec::with_capacity(seq.len());
    out.extend_from_slice(&rest[..to]);
    out.extend_from_slice(&seq[from..from + len]);
    out.extend_from_slice(&rest[to..]);
    (out, to)
}

pub(crate) fn greedy_shifts<C: SubCost>(hyp: &[String], refr: &[String], costs: &C, shift_cost: f64) -> ShiftedAlignment {
    let mut cur = hyp.to_vec();
    let mut al = align_with(&cur, refr, costs);
    let mut shifts = Vec::new();
    let m = refr.len();
    loop {
        let n = cur.len();
        let v = view(&al, n, m);
        let mut best: Option<(f64, Vec<String>, EditAlignment, EditOp)> = None;
        let mut tried: HashSet<(usize, usize, usize)> = HashSet::new();
        for from in 0..n {
            for len in (1..=MAX_SHIFT_LEN.min(n - from).min(m)).rev() {
                if !v.hyp_err[from..from + len].iter().any(|&e| e) {
                    continue;
                }
                let block = &cur[from..from + len];
                for j in 0..=(m - len) {
                    if refr[j..j + len] != *block || !v.ref_err[j..j + len].iter().any(|&e| e) {
                        continue;
                    }
                    for r in (j as isize - 1)..((j + len) as isize) {
                        let after = if r < 0 { -1 } else { v.ref_to_hyp[r as usize] };
                        let insert_at = (after + 1) as usize;
                        if insert_at >= from && insert_at <= from + len {
                            continue;
                        }
                        if !tried.insert((from, len, insert_at)) {
                            continue;
                        }
                        let (next, to) = apply_shift(&cur, from, len, insert_at);
                        let next_al = align_with(&next, refr, costs);
                        let gain = al.cost - next_al.cost - shift_cost;
                        if gain > EPS && best.as_ref().is_none_or(|b| gain > b.0 + EPS) {
                            best = Some((gain, next, next_al, EditOp::Shift { from, len, to }));
                        }
                    }
                }
            }
        }
        match best {
            Some((_, next, next_al, op)) => {
                cur = next;
                al = next_al;
                shifts.push(op);
            }
            None => break,
        }
    }
    let cost = shifts.len() as f64 * shift_cost + al.cost;
    ShiftedAlignment {
        shifted: cur,
        shifts,
        alignment: al,
        cost,
    }
}

/// Largest number of distinct hypothesis arrangements searched exactly.
pub const EXACT_SEARCH_LIMIT: u64 = 5040;

/// Distinct orderings of the multiset of tokens, saturating past `cap`.
fn arrangements(seq: &[String], cap: u64) -> u64 {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for t in seq {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    // multiply in n!/(k1! k2! ...) incrementally as binomials
    let mut total: u64 = 1;
    let mut placed: u64 = 0;
    for &k in counts.values() {
        for i in 1..=k {
            placed += 1;
            total = match total.checked_mul(placed) {
                Some(v) => v / i,
                None => return cap.saturating_add(1),
            };
            if total > cap {
                return cap.saturating_add(1);
            }
        }
    }
    total
}

fn lev(a: &[String], b: &[String]) -> usize {
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let next = (row[j + 1] + 1).min(row[j] + 1).min(diag + usize::from(x != y));
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// Lower bound on the edit distance that no reordering can beat.
fn multiset_bound(hyp: &[String], refr: &[String]) -> usize {
    let mut counts: HashMap<&str, isize> = HashMap::new();
    for t in hyp {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut common = 0;
    for t in refr {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    hyp.len().max(refr.len()) - common
}

fn move_block(seq: &[String], from: usize, len: usize, to: usize) -> Vec<String> {
    let mut rest: Vec<String> = Vec::with_capacity(seq.len());
    rest.extend_from_slice(&seq[..from]);
    rest.extend_from_slice(&seq[from + len..]);
    let mut out = Vec::with_capacity(seq.len());
    out.extend_from_slice(&rest[..to]);
    out.extend_from_slice(&seq[from..from + len]);
    out.extend_from_slice(&rest[to..]);
    out
}

/// Exact minimum of shifts plus edits, if it beats `upper`.
fn exact_shifts(hyp: &[String], refr: &[String], upper: usize) -> Option<ShiftedAlignment> {
    let bound = multiset_bound(hyp, refr);
    if bound >= upper {
        return None;
    }
    // (state, parent index, shift that produced it)
    let mut nodes: Vec<(Vec<String>, usize, Option<EditOp>)> = vec![(hyp.to_vec(), usize::MAX, None)];
    let mut seen: HashSet<Vec<String>> = HashSet::from([hyp.to_vec()]);
    let mut layer = 0..1;
    let mut best: Option<(usize, usize)> = None;
    let mut best_cost = upper;
    for depth in 0.. {
        if depth + bound >= best_cost {
            break;
        }
        for idx in layer.clone() {
            let cost = depth + lev(&nodes[idx].0, refr);
            if cost < best_cost {
                best_cost = cost;
                best = Some((idx, depth));
            }
        }
        if depth + 1 + bound >= best_cost {
            break;
        }
        let start = nodes.len();
        for idx in layer.clone() {
            let n = nodes[idx].0.len();
            for from in 0..n {
                for len in 1..=n - from {
                    for to in 0..=n - len {
                        if to == from {
                            continue;
                        }
                        let next = move_block(&nodes[idx].0, from, len, to);
                        if seen.insert(next.clone()) {
                            nodes.push((next, idx, Some(EditOp::Shift { from, len, to })));
                        }
                    }
                }
            }
        }
        layer = start..nodes.len();
        if layer.is_empty() {
            break;
        }
    }
    let (mut idx, _) = best?;
    let shifted = nodes[idx].0.clone();
    let mut shifts = Vec::new();
    while let Some(op) = nodes[idx].2 {
        shifts.push(op);
        idx = nodes[idx].1;
    }
    shifts.reverse();
    let alignment = align_with(&shifted, refr, &UnitCost);
    let cost = shifts.len() as f64 + alignment.cost;
    Some(ShiftedAlignment {
        shifted,
        shifts,
        alignment,
        cost,
    })
}

/// Unit-cost TER alignment.
pub fn ter_alignment(hyp: &[String], refr: &[String]) -> ShiftedAlignment {
    let greedy = greedy_shifts(hyp, refr, &UnitCost, 1.0);
    if hyp.len() < 2 || refr.is_empty() || arrangements(hyp, EXACT_SEARCH_LIMIT) > EXACT_SEARCH_LIMIT {
        return greedy;
    }
    exact_shifts(hyp, refr, greedy.cost as usize).unwrap_or(greedy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerpWeights {
    pub stem: f64,
    pub synonym: f64,
    pub substitution: f64,
    pub insertion: f64,
    pub deletion: f64,
    pub shift: f64,
}

impl Default for TerpWeights {
    fn default() -> Self {
        TerpWeights {
            stem: 0.2,
            synonym: 0.2,
            substitution: 1.0,
            insertion: 1.0,
            deletion: 1.0,
            shift: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseEntry {
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TerpResources {
    stems: HashMap<String, String>,
    /// Token to synonym-set index; overlapping input sets are merged.
    synonyms: HashMap<String, usize>,
    phrases: Vec<PhraseEntry>,
}

impl TerpResources {
    pub fn new<S, I, P>(stems: S, synonym_sets: I, phrases: P) -> Result<Self, MetricError>
    where
        S: IntoIterator<Item = (String, String)>,
        I: IntoIterator<Item = Vec<String>>,
        P: IntoIterator<Item = PhraseEntry>,
    {
        let mut res = TerpResources {
            stems: stems.into_iter().collect(),
            ..Default::default()
        };
        let mut sets: Vec<HashSet<String>> = Vec::new();
        for set in synonym_sets {
            let mut merged: HashSet<String> = set.into_iter().collect();
            let mut i = 0;
            while i < sets.len() {
                if sets[i].iter().any(|w| merged.contains(w)) {
                    merged.extend(sets.swap_remove(i));
                } else {
                    i += 1;
                }
            }
            sets.push(merged);
        }
        for (idx, set) in sets.into_iter().enumerate() {
            for w in set {
                res.synonyms.insert(w, idx);
            }
        }
        for p in phrases {
            if p.cost.is_nan() || p.cost < 0.0 || p.left.is_empty() || p.right.is_empty() {
                return Err(MetricError::Resource(format!(
                    "phrase entry {:?} -> {:?} needs non-empty sides and cost >= 0",
                    p.left, p.right
                )));
            }
            res.phrases.push(p);
        }
        Ok(res)
    }

    pub fn is_empty(&self) -> bool {
        self.stems.is_empty() && self.synonyms.is_empty() && self.phrases.is_empty()
    }

    /// Parses the three resource texts: `token<TAB>stem` lines,
    /// comma-separated synonym sets, and `phrase<TAB>phrase<TAB>cost` lines.
    pub fn parse(stems: &str, synonyms: &str, phrases: &str) -> Result<Self, MetricError> {
        let lines = |t: &'_ str| -> Vec<(usize, String)> {
            t.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
                .map(|(i, l)| (i + 1, l.to_string()))
                .collect()
        };
        let mut stem_map = Vec::new();
        for (n, l) in lines(stems) {
            let (tok, stem) = l
                .split_once('\t')
                .ok_or_else(|| MetricError::Resource(format!("stems line {n}: expected token<TAB>stem")))?;
            stem_map.push((tok.trim().to_lowercase(), stem.trim().to_lowercase()));
        }
        let sets = lines(synonyms)
            .into_iter()
            .map(|(_, l)| {
                l.split(',')
                    .map(|w| w.trim().to_lowercase())
                    .filter(|w| !w.is_empty())
                    .collect()
            })
            .collect::<Vec<Vec<String>>>();
        let mut table = Vec::new();
        for (n, l) in lines(phrases) {
            let f: Vec<&str> = l.split('\t').collect();
            let bad = || MetricError::Resource(format!("phrase table line {n}: expected phrase<TAB>phrase<TAB>cost"));
            if f.len() != 3 {
                return Err(bad());
            }
            table.push(PhraseEntry {
                left: crate::corpus::tokenize(f[0]),
                right: crate::corpus::tokenize(f[1]),
                cost: f[2].trim().parse().map_err(|_| bad())?,
            });
        }
        TerpResources::new(stem_map, sets, table)
    }

    pub fn load(stems: Option<&Path>, synonyms: Option<&Path>, phrases: Option<&Path>) -> Result<Self, MetricError> {
        let read = |p: Option<&Path>| -> Result<String, MetricError> {
            match p {
                Some(p) => fs::read_to_string(p).map_err(|e| MetricError::Resource(format!("{}: {e}", p.display()))),
                None => Ok(String::new()),
            }
        };
        Self::parse(&read(stems)?, &read(synonyms)?, &read(phrases)?)
    }
}

pub(crate) struct TerpCost<'a> {
    pub res: &'a TerpResources,
    pub w: TerpWeights,
}

impl SubCost for TerpCost<'_> {
    fn sub(&self, hyp: &[String], refr: &[String], h: usize, r: usize) -> (f64, EditOp) {
        let (a, b) = (&hyp[h], &refr[r]);
        if a == b {
            return (0.0, EditOp::Match { hyp: h, refr: r });
        }
        let mut best = (self.w.substitution, EditOp::Substitute { hyp: h, refr: r });
        if let (Some(x), Some(y)) = (self.res.stems.get(a), self.res.stems.get(b)) {
            if x == y && self.w.stem < best.0 {
                best = (self.w.stem, EditOp::StemMatch { hyp: h, refr: r });
            }
        }
        if let (Some(x), Some(y)) = (self.res.synonyms.get(a), self.res.synonyms.get(b)) {
            if x == y && self.w.synonym < best.0 {
                best = (self.w.synonym, EditOp::SynonymMatch { hyp: h, refr: r });
            }
        }
        best
    }

    fn insertion(&self) -> f64 {
        self.w.insertion
    }

    fn deletion(&self) -> f64 {
        self.w.deletion
    }

    fn phrases(&self, hyp: &[String], refr: &[String]) -> PhraseSpans {
        let mut out = PhraseSpans::new();
        let ends = |seq: &[String], p: &[String]| -> Vec<usize> {
            if p.len() > seq.len() {
                return Vec::new();
            }
            (p.len()..=seq.len()).filter(|&e| seq[e - p.len()..e] == *p).collect()
        };
        for entry in &self.res.phrases {
            for (hp, rp) in [(&entry.left, &entry.right), (&entry.right, &entry.left)] {
                let he = ends(hyp, hp);
                if he.is_empty() {
                    continue;
                }
                for re in ends(refr, rp) {
                    for &h in &he {
                        out.entry((h, re)).or_default().push((hp.len(), rp.len(), entry.cost));
                    }
                }
            }
        }
        out
    }
}

/// TERp alignment: the cheaper of the greedy search run under TERp costs and
/// the unit-cost TER shift sequence re-scored under TERp costs.
pub fn terp_alignment(hyp: &[String], refr: &[String], res: &TerpResources, w: TerpWeights) -> ShiftedAlignment {
    let costs = TerpCost { res, w };
    let own = greedy_shifts(hyp, refr, &costs, w.shift);
    let ter = ter_alignment(hyp, refr);
    if ter.shifts.is_empty() {
        return own;
    }
    let rescored = align_with(&ter.shifted, refr, &costs);
    let cost = ter.shifts.len() as f64 * w.shift + rescored.cost;
    if cost < own.cost - EPS {
        ShiftedAlignment {
            shifted: ter.shifted,
            shifts: ter.shifts,
            alignment: rescored,
            cost,
        }
    } else {
        own
    }
}

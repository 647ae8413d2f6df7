//! Normalized Google Distance computed from reference-corpus document
//! frequencies, the averaged sentence dissimilarity built on it, and
//! NGD-based pruning of the retrieval search space.
//!
//! Term frequencies `f(t)` are document frequencies over a reference
//! collection and `N` is its size. Pair co-frequencies are computed lazily by
//! intersecting per-token document lists and memoized behind a lock, so a
//! built [`TermStats`] can be shared across worker threads.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use thiserror::Error;

use crate::corpus::SentenceId;

#[derive(Debug, Error)]
pub enum NgdError {
    #[error("reference collection is empty")]
    EmptyReference,
    #[error("NGD needs at least 2 reference documents, have {0}")]
    TooFewDocuments(u64),
    #[error("stats file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Floor applied when `log N - min(log f)` is not positive.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Default)]
pub struct NgdDiagnostics {
    pub floored_denominators: AtomicU64,
    pub empty_sentences: AtomicU64,
}

#[derive(Debug)]
enum CoSource {
    /// Sorted reference-document indices per interned token.
    Postings(Vec<Vec<u32>>),
    /// Loaded from a stats file; absent pairs have co-frequency 0.
    Table,
}

#[derive(Debug)]
pub struct TermStats {
    index: HashMap<String, u32>,
    df: Vec<u64>,
    n_total: u64,
    source: CoSource,
    co_cache: RwLock<HashMap<(u32, u32), u64>>,
    diagnostics: NgdDiagnostics,
}

fn ordered(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Counts document and pair frequencies over `reference_docs`. When `vocab`
/// is given, tokens outside it are ignored.
pub fn build_term_stats<D, T>(reference_docs: &[D], vocab: Option<&HashSet<String>>) -> Result<TermStats, NgdError>
where
    D: AsRef<[T]>,
    T: AsRef<str>,
{
    if reference_docs.is_empty() {
        return Err(NgdError::EmptyReference);
    }
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut lists: Vec<Vec<u32>> = Vec::new();
    for (doc_idx, doc) in reference_docs.iter().enumerate() {
        for tok in doc.as_ref() {
            let tok = tok.as_ref();
            if vocab.is_some_and(|v| !v.contains(tok)) {
                continue;
            }
            let id = match index.get(tok) {
                Some(&id) => id,
                None => {
                    let id = lists.len() as u32;
                    index.insert(tok.to_owned(), id);
                    lists.push(Vec::new());
                    id
                }
            };
            let list = &mut lists[id as usize];
            if list.last() != Some(&(doc_idx as u32)) {
                list.push(doc_idx as u32);
            }
        }
    }
    let df = lists.iter().map(|l| l.len() as u64).collect();
    Ok(TermStats {
        index,
        df,
        n_total: reference_docs.len() as u64,
        source: CoSource::Postings(lists),
        co_cache: RwLock::new(HashMap::new()),
        diagnostics: NgdDiagnostics::default(),
    })
}

fn intersection_len(a: &[u32], b: &[u32]) -> u64 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

impl TermStats {
    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn diagnostics(&self) -> &NgdDiagnostics {
        &self.diagnostics
    }

    pub fn df(&self, token: &str) -> u64 {
        self.index.get(token).map_or(0, |&i| self.df[i as usize])
    }

    pub fn co_df(&self, a: &str, b: &str) -> u64 {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&x), Some(&y)) => self.co_df_ids(x, y),
            _ => 0,
        }
    }

    fn co_df_ids(&self, a: u32, b: u32) -> u64 {
        if a == b {
            return self.df[a as usize];
        }
        let key = ordered(a, b);
        if let Some(&n) = self.co_cache.read().unwrap().get(&key) {
            return n;
        }
        match &self.source {
            CoSource::Table => 0,
            CoSource::Postings(lists) => {
                let n = intersection_len(&lists[key.0 as usize], &lists[key.1 as usize]);
                self.co_cache.write().unwrap().insert(key, n);
                n
            }
        }
    }

    /// NGD between two terms, using base-2 logarithms.
    pub fn ngd_term(&self, a: &str, b: &str) -> Result<f64, NgdError> {
        if self.n_total < 2 {
            return Err(NgdError::TooFewDocuments(self.n_total));
        }
        if a == b {
            return Ok(0.0);
        }
        let (Some(&x), Some(&y)) = (self.index.get(a), self.index.get(b)) else {
            return Ok(1.0);
        };
        Ok(self.ngd_ids(x, y))
    }

    fn ngd_ids(&self, x: u32, y: u32) -> f64 {
        if x == y {
            return 0.0;
        }
        let (fa, fb) = (self.df[x as usize], self.df[y as usize]);
        if fa == 0 || fb == 0 {
            return 1.0;
        }
        let co = self.co_df_ids(x, y);
        if fa == fb && fb == co {
            return 0.0;
        }
        let co = co.max(1);
        let (la, lb) = ((fa as f64).log2(), (fb as f64).log2());
        let numerator = la.max(lb) - (co as f64).log2();
        let mut denominator = (self.n_total as f64).log2() - la.min(lb);
        if denominator <= 0.0 {
            self.diagnostics
                .floored_denominators
                .fetch_add(1, Ordering::Relaxed);
            denominator = DENOMINATOR_FLOOR;
        }
        numerator / denominator
    }

    /// Mean NGD over all cross pairs of the two token sequences. An empty
    /// side scores 1.
    pub fn dis_ngd<A: AsRef<str>, B: AsRef<str>>(&self, s_a: &[A], s_b: &[B]) -> Result<f64, NgdError> {
        if self.n_total < 2 {
            return Err(NgdError::TooFewDocuments(self.n_total));
        }
        if s_a.is_empty() || s_b.is_empty() {
            self.diagnostics.empty_sentences.fetch_add(1, Ordering::Relaxed);
            return Ok(1.0);
        }
        let lookup = |t: &str| self.index.get(t).copied();
        let ids_b: Vec<(Option<u32>, &str)> = s_b.iter().map(|t| (lookup(t.as_ref()), t.as_ref())).collect();
        let mut total = 0.0;
        for ta in s_a {
            let ta = ta.as_ref();
            let ia = lookup(ta);
            for (ib, tb) in &ids_b {
                total += if ta == *tb {
                    0.0
                } else {
                    match (ia, ib) {
                        (Some(x), Some(y)) => self.ngd_ids(x, *y),
                        _ => 1.0,
                    }
                };
            }
        }
        Ok(total / (s_a.len() * s_b.len()) as f64)
    }

    /// Parses the text stats format: `#N<TAB>n`, `token<TAB>df` and
    /// `token<TAB>token<TAB>co_df` lines.
    pub fn parse(text: &str) -> Result<Self, NgdError> {
        let mut n_total = None;
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut df: Vec<u64> = Vec::new();
        let mut pairs: Vec<(usize, String, String, u64)> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let err = |message: String| NgdError::Parse { line: idx + 1, message };
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let count = |s: &str| s.trim().parse::<u64>().map_err(|_| err(format!("bad count {s:?}")));
            match fields.as_slice() {
                ["#N", n] => n_total = Some(count(n)?),
                [tok, _] if tok.starts_with('#') => {}
                [tok, n] => {
                    let n = count(n)?;
                    if index.insert(tok.to_string(), df.len() as u32).is_some() {
                        return Err(err(format!("duplicate token {tok:?}")));
                    }
                    df.push(n);
                }
                [a, b, n] => pairs.push((idx + 1, a.to_string(), b.to_string(), count(n)?)),
                _ if line.starts_with('#') => {}
                _ => return Err(err("expected 2 or 3 tab-separated fields".into())),
            }
        }
        let n_total = n_total.ok_or(NgdError::Parse {
            line: 1,
            message: "missing #N header".into(),
        })?;
        if n_total == 0 {
            return Err(NgdError::EmptyReference);
        }
        if let Some((t, _)) = index.iter().find(|(_, &i)| df[i as usize] > n_total) {
            return Err(NgdError::Parse {
                line: 0,
                message: format!("df of {t:?} exceeds N"),
            });
        }
        let mut cache = HashMap::new();
        for (line, a, b, n) in pairs {
            let (Some(&x), Some(&y)) = (index.get(&a), index.get(&b)) else {
                return Err(NgdError::Parse {
                    line,
                    message: format!("pair ({a:?}, {b:?}) uses a token without df"),
                });
            };
            if n > df[x as usize].min(df[y as usize]) {
                return Err(NgdError::Parse {
                    line,
                    message: "co_df exceeds a single df".into(),
                });
            }
            cache.insert(ordered(x, y), n);
        }
        Ok(TermStats {
            index,
            df,
            n_total,
            source: CoSource::Table,
            co_cache: RwLock::new(cache),
            diagnostics: NgdDiagnostics::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, NgdError> {
        let text = fs::read_to_string(path).map_err(|source| NgdError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Writes the header, every df line, and every nonzero co_df pair, all in
    /// lexicographic order.
    pub fn to_text(&self) -> String {
        let mut names: Vec<(&str, u32)> = self.index.iter().map(|(t, &i)| (t.as_str(), i)).collect();
        names.sort();
        let mut out = format!("#N\t{}\n", self.n_total);
        for (t, i) in &names {
            out.push_str(&format!("{t}\t{}\n", self.df[*i as usize]));
        }
        for (x, (ta, ia)) in names.iter().enumerate() {
            for (tb, ib) in &names[x + 1..] {
                let n = self.co_df_ids(*ia, *ib);
                if n > 0 {
                    out.push_str(&format!("{ta}\t{tb}\t{n}\n"));
                }
            }
        }
        out
    }
}

/// Keeps the `ceil(x_percent * |candidates|)` candidates least dissimilar to
/// the query, ties to the lower id. Returned ids are ordered by ascending
/// dissimilarity.
pub fn prune_search_space<Q, T>(
    stats: &TermStats,
    query: &[Q],
    candidates: &[(SentenceId, T)],
    x_percent: f64,
) -> Result<Vec<(SentenceId, f64)>, NgdError>
where
    Q: AsRef<str>,
    T: AsRef<[String]>,
{
    let mut scored = candidates
        .iter()
        .map(|(id, toks)| Ok((*id, stats.dis_ngd(query, toks.as_ref())?)))
        .collect::<Result<Vec<_>, NgdError>>()?;
    Ok(keep_fraction(&mut scored, x_percent))
}

pub(crate) fn keep_fraction(scored: &mut Vec<(SentenceId, f64)>, fraction: f64) -> Vec<(SentenceId, f64)> {
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let keep = fraction_count(scored.len(), fraction);
    scored.truncate(keep);
    std::mem::take(scored)
}

/// `ceil(fraction * n)` clamped to `n`.
pub fn fraction_count(n: usize, fraction: f64) -> usize {
    let k = (fraction * n as f64 - 1e-9).ceil();
    (k.max(0.0) as usize).min(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn docs(spec: &[&str]) -> Vec<Vec<String>> {
        spec.iter()
            .map(|d| d.split_whitespace().map(str::to_owned).collect())
            .collect()
    }

    /// Stats with df(a)=4, df(b)=2, co_df(a,b)=2 over N=16 documents.
    fn sixteen() -> TermStats {
        let mut d = vec!["a b", "a b", "a", "a"];
        d.extend(std::iter::repeat_n("z", 12));
        build_term_stats(&docs(&d), None).unwrap()
    }

    /// NGD straight from raw document counts, special cases included.
    fn oracle_term(docs: &[Vec<String>], a: &str, b: &str) -> f64 {
        let n = docs.len() as f64;
        let has = |d: &Vec<String>, t: &str| d.iter().any(|x| x == t);
        let fa = docs.iter().filter(|d| has(d, a)).count() as f64;
        let fb = docs.iter().filter(|d| has(d, b)).count() as f64;
        let co = docs.iter().filter(|d| has(d, a) && has(d, b)).count() as f64;
        if a == b || (fa == fb && fb == co && co > 0.0) {
            return 0.0;
        }
        if fa == 0.0 || fb == 0.0 {
            return 1.0;
        }
        let co = if co == 0.0 { 1.0 } else { co };
        let den = n.log2() - fa.log2().min(fb.log2());
        let den = if den <= 0.0 { DENOMINATOR_FLOOR } else { den };
        (fa.log2().max(fb.log2()) - co.log2()) / den
    }

    fn oracle_dis(docs: &[Vec<String>], sa: &[String], sb: &[String]) -> f64 {
        let mut sum = 0.0;
        for a in sa {
            for b in sb {
                sum += oracle_term(docs, a, b);
            }
        }
        sum / (sa.len() * sb.len()) as f64
    }

    #[test]
    fn counting() {
        let s = build_term_stats(&docs(&["a b", "a"]), None).unwrap();
        assert_eq!((s.df("a"), s.df("b"), s.co_df("a", "b"), s.n_total()), (2, 1, 1, 2));
        assert_eq!(s.df("q"), 0);
        let s = build_term_stats(&docs(&["a a a", "b"]), None).unwrap();
        assert_eq!(s.df("a"), 1);
        let vocab: HashSet<String> = ["a".to_string()].into();
        let s = build_term_stats(&docs(&["a b", "b"]), Some(&vocab)).unwrap();
        assert_eq!(s.df("b"), 0);
        assert!(matches!(
            build_term_stats::<Vec<String>, String>(&[], None),
            Err(NgdError::EmptyReference)
        ));
    }

    #[test]
    fn special_cases() {
        let s = sixteen();
        assert_eq!(s.ngd_term("a", "a").unwrap(), 0.0);
        assert_eq!(s.ngd_term("zzz", "zzz").unwrap(), 0.0);
        assert_eq!(s.ngd_term("a", "missing").unwrap(), 1.0);
        assert_eq!(s.ngd_term("missing", "a").unwrap(), 1.0);
        // co_df(b, z) = 0 is evaluated as 1: (log 12 - 0) / (log 16 - log 2)
        let want = 12f64.log2() / 3.0;
        assert_eq!(s.ngd_term("b", "z").unwrap(), want);
        let same = build_term_stats(&docs(&["a b", "a b", "c"]), None).unwrap();
        assert_eq!(same.ngd_term("a", "b").unwrap(), 0.0);
    }

    #[test]
    fn derived_one_third() {
        let s = sixteen();
        assert_eq!(s.ngd_term("a", "b").unwrap(), 1.0 / 3.0);
        assert_eq!(s.ngd_term("b", "a").unwrap(), 1.0 / 3.0);
        assert_eq!(s.dis_ngd(&["a"], &["b"]).unwrap(), 1.0 / 3.0);
        assert_eq!(s.dis_ngd(&["a", "a"], &["b"]).unwrap(), 1.0 / 3.0);
        assert_eq!(s.dis_ngd(&["a"], &["a"]).unwrap(), 0.0);
    }

    #[test]
    fn small_reference_and_empty_sentences() {
        let one = build_term_stats(&docs(&["a b"]), None).unwrap();
        assert!(matches!(one.ngd_term("a", "b"), Err(NgdError::TooFewDocuments(1))));
        let s = sixteen();
        assert_eq!(s.dis_ngd::<&str, &str>(&[], &["a"]).unwrap(), 1.0);
        assert_eq!(s.diagnostics().empty_sentences.load(Ordering::Relaxed), 1);
    }

    #[test]
    fn floored_denominator_is_counted() {
        // both terms occur everywhere but not together in one doc is impossible,
        // so use a loaded table that declares df = N with co_df < N
        let s = TermStats::parse("#N\t4\na\t4\nb\t4\na\tb\t2\n").unwrap();
        let v = s.ngd_term("a", "b").unwrap();
        assert_eq!(v, 1.0 / DENOMINATOR_FLOOR);
        assert_eq!(s.diagnostics().floored_denominators.load(Ordering::Relaxed), 1);
    }

    #[test]
    fn stats_file_round_trip() {
        let s = sixteen();
        let text = s.to_text();
        assert!(text.starts_with("#N\t16\n"));
        let back = TermStats::parse(&text).unwrap();
        for (a, b) in [("a", "b"), ("b", "z"), ("a", "z"), ("a", "q")] {
            assert_eq!(back.ngd_term(a, b).unwrap(), s.ngd_term(a, b).unwrap());
        }
        assert!(TermStats::parse("a\t1\n").is_err());
        assert!(TermStats::parse("#N\t2\na\t1\nb\t1\na\tb\t3\n").is_err());
    }

    #[test]
    fn pruning_examples() {
        let s = sixteen();
        let cands: Vec<(SentenceId, Vec<String>)> = (0..10)
            .map(|i| (SentenceId(i), vec![if i % 2 == 0 { "a" } else { "z" }.to_string()]))
            .collect();
        let q = ["a"];
        assert_eq!(prune_search_space(&s, &q, &cands, 1.0).unwrap().len(), 10);
        let four = prune_search_space(&s, &q, &cands, 0.4).unwrap();
        let ids: Vec<u32> = four.iter().map(|x| x.0 .0).collect();
        assert_eq!(ids, vec![0, 2, 4, 6]);
        assert_eq!(prune_search_space(&s, &q, &cands[..1], 0.4).unwrap().len(), 1);
        assert!(prune_search_space::<&str, Vec<String>>(&s, &q, &[], 0.4).unwrap().is_empty());
    }

    #[test]
    fn fraction_counts() {
        assert_eq!(fraction_count(10, 0.4), 4);
        assert_eq!(fraction_count(1, 0.4), 1);
        assert_eq!(fraction_count(10, 0.5), 5);
        assert_eq!(fraction_count(3, 1.0), 3);
        assert_eq!(fraction_count(0, 0.4), 0);
    }

    fn arb_setup() -> impl Strategy<Value = (Vec<Vec<String>>, Vec<String>, Vec<String>)> {
        let tok = "[a-j]";
        (
            proptest::collection::vec(proptest::collection::vec(tok, 0..6), 2..=20),
            proptest::collection::vec(tok, 1..6),
            proptest::collection::vec(tok, 1..6),
        )
    }

    proptest! {
        #[test]
        fn dis_ngd_matches_double_loop((refs, sa, sb) in arb_setup()) {
            let s = build_term_stats(&refs, None).unwrap();
            let got = s.dis_ngd(&sa, &sb).unwrap();
            prop_assert!((got - oracle_dis(&refs, &sa, &sb)).abs() <= 1e-12);
            prop_assert!((got - s.dis_ngd(&sb, &sa).unwrap()).abs() <= 1e-12);
            prop_assert!(got >= 0.0);
            for a in &sa {
                for b in &sb {
                    prop_assert_eq!(s.ngd_term(a, b).unwrap(), s.ngd_term(b, a).unwrap());
                }
            }
        }

        #[test]
        fn pruning_is_nested(
            (refs, q, _) in arb_setup(),
            cands in proptest::collection::vec(proptest::collection::vec("[a-j]", 1..5), 0..12),
            p in 0.05f64..1.0,
            dp in 0.0f64..0.5,
        ) {
            let s = build_term_stats(&refs, None).unwrap();
            let cands: Vec<(SentenceId, Vec<String>)> = cands.into_iter().enumerate()
                .map(|(i, t)| (SentenceId(i as u32), t)).collect();
            let small: HashSet<SentenceId> = prune_search_space(&s, &q, &cands, p).unwrap().into_iter().map(|x| x.0).collect();
            let big: HashSet<SentenceId> = prune_search_space(&s, &q, &cands, (p + dp).min(1.0)).unwrap().into_iter().map(|x| x.0).collect();
            prop_assert!(small.is_subset(&big));
        }
    }
}

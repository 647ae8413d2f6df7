//! Date-windowed BM25 retrieval over pivot-language sentences.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{remove_stop_words, SentenceId, StopWordList};

#[derive(Debug, Error)]
pub enum IrError {
    #[error("sentence id {0} indexed twice")]
    DuplicateId(SentenceId),
    #[error("sentence id {0} is not indexed")]
    UnknownId(SentenceId),
    #[error("index cache {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// A sentence as seen by the index: id, date and pivot tokens.
#[derive(Debug, Clone, Copy)]
pub struct IndexEntry<'a> {
    pub id: SentenceId,
    pub date: NaiveDate,
    pub tokens: &'a [String],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posting {
    pub id: SentenceId,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    postings: HashMap<String, Vec<Posting>>,
    doc_lengths: HashMap<SentenceId, u32>,
    date_of: HashMap<SentenceId, NaiveDate>,
    /// All indexed ids sorted by (date, id), for window enumeration.
    by_date: Vec<(NaiveDate, SentenceId)>,
    avg_len: f64,
    params: Bm25Params,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrHit {
    pub sentence_id: SentenceId,
    pub ir_score: f64,
}

pub fn build_index(
    entries: &[IndexEntry<'_>],
    stops: &StopWordList,
    params: Bm25Params,
) -> Result<InvertedIndex, IrError> {
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut doc_lengths = HashMap::with_capacity(entries.len());
    let mut date_of = HashMap::with_capacity(entries.len());
    let mut by_date = Vec::with_capacity(entries.len());
    let mut total_len = 0u64;
    for e in entries {
        if date_of.insert(e.id, e.date).is_some() {
            return Err(IrError::DuplicateId(e.id));
        }
        let kept = remove_stop_words(e.tokens, stops);
        doc_lengths.insert(e.id, kept.len() as u32);
        total_len += kept.len() as u64;
        by_date.push((e.date, e.id));
        let mut tf: HashMap<String, u32> = HashMap::new();
        for t in kept {
            *tf.entry(t).or_default() += 1;
        }
        for (t, n) in tf {
            postings.entry(t).or_default().push(Posting { id: e.id, tf: n });
        }
    }
    for list in postings.values_mut() {
        list.sort_by_key(|p| p.id);
    }
    by_date.sort();
    let avg_len = if entries.is_empty() {
        0.0
    } else {
        total_len as f64 / entries.len() as f64
    };
    Ok(InvertedIndex {
        postings,
        doc_lengths,
        date_of,
        by_date,
        avg_len,
        params,
    })
}

const CACHE_MAGIC: &[u8; 8] = b"PVMIDX01";

impl InvertedIndex {
    pub fn n_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn postings(&self, token: &str) -> &[Posting] {
        self.postings.get(token).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_length(&self, id: SentenceId) -> Option<u32> {
        self.doc_lengths.get(&id).copied()
    }

    pub fn date_of(&self, id: SentenceId) -> Option<NaiveDate> {
        self.date_of.get(&id).copied()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    /// Ids dated within `window_days` of `date`, ordered by (date, id).
    pub fn window_ids(&self, date: NaiveDate, window_days: u32) -> impl Iterator<Item = SentenceId> + '_ {
        let lo = date - chrono::Days::new(window_days as u64);
        let hi = date + chrono::Days::new(window_days as u64);
        let start = self.by_date.partition_point(|(d, _)| *d < lo);
        self.by_date[start..]
            .iter()
            .take_while(move |(d, _)| *d <= hi)
            .map(|(_, id)| *id)
    }

    /// Floored Robertson/Lucene IDF: `ln(1 + (N - df + 0.5) / (df + 0.5))`.
    fn idf(&self, df: usize) -> f64 {
        let n = self.n_docs() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln().max(0.0)
    }

    fn term_weight(&self, tf: u32, doc_len: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let norm = if self.avg_len > 0.0 {
            1.0 - b + b * doc_len as f64 / self.avg_len
        } else {
            1.0
        };
        tf * (k1 + 1.0) / (tf + k1 * norm)
    }

    /// BM25 score of one indexed sentence. Repeated query tokens count once.
    pub fn bm25_score(&self, query: &[String], id: SentenceId) -> Result<f64, IrError> {
        let doc_len = self.doc_length(id).ok_or(IrError::UnknownId(id))?;
        let mut seen = HashSet::new();
        let mut score = 0.0;
        for t in query {
            if !seen.insert(t.as_str()) {
                continue;
            }
            let list = self.postings(t);
            if let Ok(pos) = list.binary_search_by_key(&id, |p| p.id) {
                score += self.idf(list.len()) * self.term_weight(list[pos].tf, doc_len);
            }
        }
        Ok(score)
    }

    /// Ranks sentences within `window_days` of `date` that share at least one
    /// query token. Ties go to the lower id.
    pub fn query_window(
        &self,
        query: &[String],
        date: NaiveDate,
        window_days: u32,
        top_k: usize,
        restrict_to: Option<&HashSet<SentenceId>>,
    ) -> Vec<IrHit> {
        let mut seen = HashSet::new();
        let mut scores: HashMap<SentenceId, f64> = HashMap::new();
        for t in query {
            if !seen.insert(t.as_str()) {
                continue;
            }
            let list = self.postings(t);
            if list.is_empty() {
                continue;
            }
            let idf = self.idf(list.len());
            for p in list {
                if let Some(r) = restrict_to {
                    if !r.contains(&p.id) {
                        continue;
                    }
                }
                let d = self.date_of[&p.id];
                if (d - date).num_days().unsigned_abs() > window_days as u64 {
                    continue;
                }
                *scores.entry(p.id).or_default() += idf * self.term_weight(p.tf, self.doc_lengths[&p.id]);
            }
        }
        let mut hits: Vec<IrHit> = scores
            .into_iter()
            .map(|(sentence_id, ir_score)| IrHit {
                sentence_id,
                ir_score,
            })
            .collect();
        hits.sort_by(|a, b| {
            b.ir_score
                .total_cmp(&a.ir_score)
                .then_with(|| a.sentence_id.cmp(&b.sentence_id))
        });
        hits.truncate(top_k);
        hits
    }

    pub fn save(&self, path: &Path) -> Result<(), IrError> {
        let err = |message: String| IrError::Cache {
            path: path.display().to_string(),
            message,
        };
        let body = serde_json::to_vec(self).map_err(|e| err(e.to_string()))?;
        let mut f = fs::File::create(path).map_err(|e| err(e.to_string()))?;
        f.write_all(CACHE_MAGIC)
            .and_then(|_| f.write_all(&body))
            .map_err(|e| err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, IrError> {
        let err = |message: String| IrError::Cache {
            path: path.display().to_string(),
            message,
        };
        let mut buf = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| err(e.to_string()))?;
        if buf.len() < CACHE_MAGIC.len() || &buf[..CACHE_MAGIC.len()] != CACHE_MAGIC {
            return Err(err("bad magic header; rebuild the index".into()));
        }
        serde_json::from_slice(&buf[CACHE_MAGIC.len()..]).map_err(|e| err(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_date;
    use proptest::prelude::*;

    fn day(n: u64) -> NaiveDate {
        parse_date("2010-01-01").unwrap() + chrono::Days::new(n)
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn index(docs: &[(u64, &str)]) -> InvertedIndex {
        let tokens: Vec<Vec<String>> = docs.iter().map(|(_, s)| toks(s)).collect();
        let entries: Vec<IndexEntry> = docs
            .iter()
            .zip(&tokens)
            .enumerate()
            .map(|(i, ((d, _), t))| IndexEntry {
                id: SentenceId(i as u32),
                date: day(*d),
                tokens: t,
            })
            .collect();
        build_index(&entries, &StopWordList::new(["the"]), Bm25Params::default()).unwrap()
    }

    /// Straight transcription of BM25 over raw token lists.
    fn oracle_bm25(docs: &[Vec<String>], query: &[String], target: usize, k1: f64, b: f64) -> f64 {
        let n = docs.len() as f64;
        let avg = docs.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
        let mut uniq: Vec<&String> = query.iter().collect();
        uniq.sort();
        uniq.dedup();
        let mut total = 0.0;
        for q in uniq {
            let df = docs.iter().filter(|d| d.contains(q)).count() as f64;
            let tf = docs[target].iter().filter(|t| *t == q).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let idf = f64::max(0.0, (1.0 + (n - df + 0.5) / (df + 0.5)).ln());
            total += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * docs[target].len() as f64 / avg));
        }
        total
    }

    #[test]
    fn postings_shapes() {
        let idx = index(&[(0, "a"), (0, "b"), (0, "c")]);
        assert_eq!(idx.vocabulary_size(), 3);
        assert!(["a", "b", "c"].iter().all(|t| idx.postings(t).len() == 1));

        let idx = index(&[(0, "a b"), (0, "a b"), (0, "a b")]);
        assert_eq!(idx.postings("a").len(), 3);

        let idx = index(&[(0, "the the"), (0, "x")]);
        assert_eq!(idx.n_docs(), 2);
        assert_eq!(idx.doc_length(SentenceId(0)), Some(0));
        assert!(idx.postings("the").is_empty());
        assert_eq!(idx.avg_len(), 0.5);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let t = toks("a");
        let e = IndexEntry {
            id: SentenceId(1),
            date: day(0),
            tokens: &t,
        };
        assert!(matches!(
            build_index(&[e, e], &StopWordList::default(), Bm25Params::default()),
            Err(IrError::DuplicateId(SentenceId(1)))
        ));
    }

    #[test]
    fn bm25_examples() {
        let idx = index(&[(0, "a"), (0, "b")]);
        assert_eq!(idx.bm25_score(&toks("zzz"), SentenceId(0)).unwrap(), 0.0);
        // hand evaluation: idf = ln(1 + 1.5/1.5) = ln 2, tf part = 2.2 / 2.2
        let s = idx.bm25_score(&toks("a"), SentenceId(0)).unwrap();
        assert!((s - 2f64.ln()).abs() < 1e-15);
        assert_eq!(idx.bm25_score(&toks("a"), SentenceId(1)).unwrap(), 0.0);
        assert!(matches!(
            idx.bm25_score(&toks("a"), SentenceId(9)),
            Err(IrError::UnknownId(_))
        ));

        let single = index(&[(0, "x y z")]);
        assert!(single.bm25_score(&toks("x y z"), SentenceId(0)).unwrap() > 0.0);
    }

    #[test]
    fn window_examples() {
        let idx = index(&[(1, "a b"), (1, "a"), (3, "a c")]);
        assert!(idx.query_window(&toks("a"), day(0), 0, 5, None).is_empty());
        assert_eq!(idx.query_window(&toks("a"), day(1), 5, 5, None).len(), 3);
        let hits = idx.query_window(&toks("a"), day(1), 1, 5, None);
        assert_eq!(hits.len(), 2);
        let ids: Vec<_> = idx.window_ids(day(2), 1).collect();
        assert_eq!(ids, vec![SentenceId(0), SentenceId(1), SentenceId(2)]);
    }

    #[test]
    fn equal_scores_lower_id_first() {
        let idx = index(&[(0, "x q"), (0, "q x"), (0, "q x")]);
        let hits = idx.query_window(&toks("q"), day(0), 0, 5, None);
        let ids: Vec<u32> = hits.iter().map(|h| h.sentence_id.0).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        assert_eq!(hits[0].ir_score, hits[2].ir_score);
    }

    #[test]
    fn cache_round_trip() {
        let idx = index(&[(0, "a b"), (2, "b c c")]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.bin");
        idx.save(&path).unwrap();
        assert_eq!(InvertedIndex::load(&path).unwrap(), idx);
        fs::write(&path, b"garbage").unwrap();
        assert!(InvertedIndex::load(&path).is_err());
    }

    fn arb_docs() -> impl Strategy<Value = Vec<(u64, Vec<String>)>> {
        proptest::collection::vec(
            (0u64..6, proptest::collection::vec("[a-e]", 0..6)),
            1..6,
        )
    }

    proptest! {
        #[test]
        fn bm25_matches_oracle(docs in arb_docs(), query in proptest::collection::vec("[a-f]", 0..5)) {
            let entries: Vec<IndexEntry> = docs.iter().enumerate().map(|(i, (d, t))| IndexEntry {
                id: SentenceId(i as u32), date: day(*d), tokens: t,
            }).collect();
            let p = Bm25Params::default();
            let idx = build_index(&entries, &StopWordList::default(), p).unwrap();
            let raw: Vec<Vec<String>> = docs.iter().map(|d| d.1.clone()).collect();
            for i in 0..docs.len() {
                let got = idx.bm25_score(&query, SentenceId(i as u32)).unwrap();
                let want = oracle_bm25(&raw, &query, i, p.k1, p.b);
                prop_assert!((got - want).abs() <= 1e-9, "{} vs {}", got, want);
            }
        }

        #[test]
        fn window_properties(
            docs in arb_docs(),
            query in proptest::collection::vec("[a-e]", 1..4),
            qday in 0u64..6,
            w in 0u32..4,
            k in 1usize..6,
            subset in proptest::collection::vec(any::<bool>(), 6),
        ) {
            let entries: Vec<IndexEntry> = docs.iter().enumerate().map(|(i, (d, t))| IndexEntry {
                id: SentenceId(i as u32), date: day(*d), tokens: t,
            }).collect();
            let idx = build_index(&entries, &StopWordList::default(), Bm25Params::default()).unwrap();
            let all = usize::MAX;
            let narrow = idx.query_window(&query, day(qday), w, all, None);
            let wide = idx.query_window(&query, day(qday), w + 1, all, None);
            for h in &narrow {
                prop_assert!(wide.iter().any(|x| x.sentence_id == h.sentence_id));
                let d = idx.date_of(h.sentence_id).unwrap();
                prop_assert!((d - day(qday)).num_days().abs() <= w as i64);
            }
            prop_assert_eq!(&narrow, &idx.query_window(&query, day(qday), w, all, None));

            let s: HashSet<SentenceId> = (0..docs.len())
                .filter(|i| subset[*i])
                .map(|i| SentenceId(i as u32))
                .collect();
            let restricted = idx.query_window(&query, day(qday), w, k, Some(&s));
            let mut filtered: Vec<IrHit> = narrow.into_iter().filter(|h| s.contains(&h.sentence_id)).collect();
            filtered.truncate(k);
            prop_assert_eq!(restricted, filtered);
        }
    }
}

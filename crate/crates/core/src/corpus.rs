//! Comparable-corpus data model: dated documents, sentences, tokenization and
//! stop-word handling.
//!
//! Sentences carry an integer id assigned per corpus side in ingestion order.
//! That id is the only link between an original sentence and its pivot
//! translations, so every later stage refers to sentences by id.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: record {record:?} has unparseable date {date:?}")]
    BadDate {
        line: usize,
        record: String,
        date: String,
    },
    #[error("line {line}: record {record:?} has language {found:?}, expected {expected:?}")]
    LangMismatch {
        line: usize,
        record: String,
        found: String,
        expected: String,
    },
    #[error("line {line}: record {record:?} has no sentences")]
    EmptyDocument { line: usize, record: String },
    #[error("both corpus sides use language {0:?}")]
    SameLanguage(String),
}

/// Per-side sentence identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SentenceId(pub u32);

impl fmt::Display for SentenceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl SentenceId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: SentenceId,
    pub doc_id: String,
    pub lang: String,
    pub date: NaiveDate,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn new(
        id: SentenceId,
        doc_id: impl Into<String>,
        lang: impl Into<String>,
        date: NaiveDate,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Sentence {
            id,
            doc_id: doc_id.into(),
            lang: lang.into(),
            date,
            text,
            tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub lang: String,
    pub date: NaiveDate,
    pub sentence_ids: Vec<SentenceId>,
}

/// One side of a comparable corpus. Sentences are stored densely so that
/// `sentences[i].id == SentenceId(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusSide {
    pub lang: String,
    pub documents: Vec<Document>,
    pub sentences: Vec<Sentence>,
}

impl CorpusSide {
    pub fn new(lang: impl Into<String>) -> Self {
        CorpusSide {
            lang: lang.into(),
            ..Default::default()
        }
    }

    /// Appends a document, assigning the next sentence ids in order.
    pub fn push_document<S: AsRef<str>>(
        &mut self,
        doc_id: impl Into<String>,
        date: NaiveDate,
        sentences: &[S],
    ) -> &Document {
        let doc_id = doc_id.into();
        let mut ids = Vec::with_capacity(sentences.len());
        for text in sentences {
            let id = SentenceId(self.sentences.len() as u32);
            self.sentences
                .push(Sentence::new(id, doc_id.clone(), self.lang.clone(), date, text.as_ref()));
            ids.push(id);
        }
        self.documents.push(Document {
            id: doc_id,
            lang: self.lang.clone(),
            date,
            sentence_ids: ids,
        });
        self.documents.last().unwrap()
    }

    pub fn sentence(&self, id: SentenceId) -> Option<&Sentence> {
        self.sentences.get(id.index())
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Writes the side in canonical JSONL form: one document per line with
    /// explicit ids and fields in a fixed order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for doc in &self.documents {
            let record = RecordOut {
                id: &doc.id,
                date: doc.date.format("%Y-%m-%d").to_string(),
                lang: &doc.lang,
                sentences: doc
                    .sentence_ids
                    .iter()
                    .map(|id| self.sentences[id.index()].text.as_str())
                    .collect(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        let io_err = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = fs::File::create(path).map_err(io_err)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_jsonl(&mut out).map_err(io_err)?;
        out.flush().map_err(io_err)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparableCorpus {
    pub source: CorpusSide,
    pub target: CorpusSide,
}

impl ComparableCorpus {
    pub fn new(source: CorpusSide, target: CorpusSide) -> Result<Self, CorpusError> {
        if source.lang == target.lang {
            return Err(CorpusError::SameLanguage(source.lang));
        }
        Ok(ComparableCorpus { source, target })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    #[serde(default)]
    id: Option<String>,
    date: String,
    #[serde(default)]
    lang: Option<String>,
    sentences: Vec<String>,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    date: String,
    lang: &'a str,
    sentences: Vec<&'a str>,
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

/// Reads a JSONL corpus file into one corpus side.
pub fn ingest_corpus(path: &Path, lang: &str) -> Result<CorpusSide, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_corpus(BufReader::new(file), lang)
}

pub fn read_corpus<R: BufRead>(reader: R, lang: &str) -> Result<CorpusSide, CorpusError> {
    let mut side = CorpusSide::new(lang);
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RecordIn = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let record_name = record
            .id
            .clone()
            .unwrap_or_else(|| format!("doc{}", side.documents.len()));
        let date = parse_date(&record.date).ok_or_else(|| CorpusError::BadDate {
            line: line_no,
            record: record_name.clone(),
            date: record.date.clone(),
        })?;
        if let Some(found) = record.lang {
            if found != lang {
                return Err(CorpusError::LangMismatch {
                    line: line_no,
                    record: record_name,
                    found,
                    expected: lang.to_string(),
                });
            }
        }
        if record.sentences.is_empty() {
            return Err(CorpusError::EmptyDocument {
                line: line_no,
                record: record_name,
            });
        }
        side.push_document(record_name, date, &record.sentences);
    }
    Ok(side)
}

/// Lowercases the text and splits it on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopWordList {
    words: HashSet<String>,
}

impl StopWordList {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopWordList {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    /// Parses the plain-text format: one token per line, `#` comments.
    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, token: &str) -> bool {
        if token.chars().any(char::is_uppercase) {
            self.words.contains(&token.to_lowercase())
        } else {
            self.words.contains(token)
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn remove_stop_words(tokens: &[String], stops: &StopWordList) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !stops.contains(t))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The Cat, sat."), toks(&["the", "cat", "sat"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("U.S.A. 2010"), toks(&["u", "s", "a", "2010"]));
        assert_eq!(tokenize("Ça  va\tBIEN"), toks(&["ça", "va", "bien"]));
    }

    #[test]
    fn stop_word_examples() {
        let stops = StopWordList::new(["the"]);
        assert_eq!(remove_stop_words(&toks(&["the", "cat", "sat"]), &stops), toks(&["cat", "sat"]));
        assert!(remove_stop_words(&[], &stops).is_empty());
        assert!(remove_stop_words(&toks(&["the", "the"]), &stops).is_empty());
        assert!(stops.contains("THE"));
    }

    #[test]
    fn stop_word_file_format() {
        let stops = StopWordList::parse("# comment\nThe\n\n  of \n#a\n");
        assert_eq!(stops.len(), 2);
        assert!(stops.contains("of"));
        assert!(!stops.contains("a"));
    }

    #[test]
    fn ingest_counts_and_ids() {
        let data = concat!(
            r#"{"id":"a","date":"2010-03-01","lang":"fa","sentences":["x y","z","w"]}"#,
            "\n",
            r#"{"date":"2010-03-02","lang":"fa","sentences":["p","q","r"]}"#,
            "\n"
        );
        let side = read_corpus(data.as_bytes(), "fa").unwrap();
        assert_eq!(side.documents.len(), 2);
        assert_eq!(side.sentences.len(), 6);
        let ids: Vec<u32> = side.sentences.iter().map(|s| s.id.0).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(side.documents[1].id, "doc1");
        assert_eq!(side.sentences[4].date, parse_date("2010-03-02").unwrap());
        assert_eq!(side.sentences[0].tokens, toks(&["x", "y"]));
    }

    #[test]
    fn ingest_empty_file() {
        let side = read_corpus("".as_bytes(), "it").unwrap();
        assert!(side.documents.is_empty());
    }

    #[test]
    fn ingest_bad_date_names_record() {
        let data = r#"{"id":"bad-one","date":"2010-13-40","lang":"it","sentences":["a"]}"#;
        let err = read_corpus(data.as_bytes(), "it").unwrap_err();
        assert!(matches!(err, CorpusError::BadDate { line: 1, .. }));
        assert!(err.to_string().contains("bad-one"));
    }

    #[test]
    fn ingest_malformed_names_line() {
        let data = "{\"date\":\"2010-01-01\",\"sentences\":[\"a\"]}\n{not json\n";
        let err = read_corpus(data.as_bytes(), "it").unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn ingest_rejects_wrong_language_and_empty_documents() {
        let data = r#"{"date":"2010-01-01","lang":"en","sentences":["a"]}"#;
        assert!(matches!(
            read_corpus(data.as_bytes(), "it"),
            Err(CorpusError::LangMismatch { .. })
        ));
        let data = r#"{"date":"2010-01-01","sentences":[]}"#;
        assert!(matches!(
            read_corpus(data.as_bytes(), "it"),
            Err(CorpusError::EmptyDocument { .. })
        ));
    }

    #[test]
    fn sides_need_distinct_languages() {
        assert!(ComparableCorpus::new(CorpusSide::new("it"), CorpusSide::new("it")).is_err());
        assert!(ComparableCorpus::new(CorpusSide::new("fa"), CorpusSide::new("it")).is_ok());
    }

    fn arb_side() -> impl Strategy<Value = CorpusSide> {
        let doc = (
            0u32..3000,
            proptest::collection::vec("[a-zA-Z0-9 ,.\"\\\\é]{0,20}", 1..4),
        );
        proptest::collection::vec(doc, 0..5).prop_map(|docs| {
            let base = parse_date("2009-01-01").unwrap();
            let mut side = CorpusSide::new("fa");
            for (i, (day, sents)) in docs.into_iter().enumerate() {
                side.push_document(format!("d{i}"), base + chrono::Days::new(day as u64), &sents);
            }
            side
        })
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(side in arb_side()) {
            let mut first = Vec::new();
            side.write_jsonl(&mut first).unwrap();
            let back = read_corpus(first.as_slice(), "fa").unwrap();
            prop_assert_eq!(&back, &side);
            let mut second = Vec::new();
            back.write_jsonl(&mut second).unwrap();
            prop_assert_eq!(first, second);
        }

        #[test]
        fn tokenize_is_idempotent(text in "\\PC{0,40}") {
            let once = tokenize(&text);
            prop_assert_eq!(tokenize(&once.join(" ")), once.clone());
            prop_assert!(once.iter().all(|t| !t.is_empty()));
        }

        #[test]
        fn stop_word_removal_is_projection(
            words in proptest::collection::vec("[a-d]{1,2}", 0..12),
            stops in proptest::collection::vec("[a-d]{1,2}", 0..4),
        ) {
            let stops = StopWordList::new(stops);
            let once = remove_stop_words(&words, &stops);
            prop_assert_eq!(remove_stop_words(&once, &stops), once.clone());
            prop_assert!(once.iter().all(|t| !stops.contains(t)));
        }
    }
}

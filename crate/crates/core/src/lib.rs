//! Parallel sentence extraction from comparable corpora through a pivot
//! language.

pub mod corpus;
pub mod eval;
pub mod filter;
pub mod ir;
pub mod ngd;
pub mod pipeline;
pub mod select;
pub mod translate;

pub use corpus::{ComparableCorpus, CorpusError, CorpusSide, Document, Sentence, SentenceId, StopWordList};
pub use filter::{Metric, MetricError, MetricScore, ScoredPair, Scorer, SelectedBy, TailTrim, TerpResources, TerpWeights};
pub use ir::{Bm25Params, InvertedIndex, IrHit};
pub use ngd::TermStats;
pub use pipeline::{
    Adapters, Extraction, ExtractionReport, FilterMode, PipelineConfig, PipelineError, Resources, StageCounters,
};
pub use select::{Candidate, CandidateSet, SelectionMode};
pub use translate::{Hypothesis, IdentityAdapter, ProbDictionary, TranslateError, TranslationAdapter};

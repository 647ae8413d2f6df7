//! End-to-end extraction: translate both sides into the pivot language, index
//! the target side, then for every source sentence prune, retrieve, select
//! and filter, and finally rank the resulting pairs.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::Ordering;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{remove_stop_words, ComparableCorpus, Sentence, SentenceId, StopWordList};
use crate::filter::{
    best_candidate, sort_pairs, accept_pairs, sum_over_hypotheses, tail_removal, Metric, MetricError, ScoredPair, Scorer,
    SelectedBy, TerpResources, TerpWeights,
};
use crate::ir::{build_index, Bm25Params, IndexEntry, InvertedIndex, IrError};
use crate::ngd::{build_term_stats, fraction_count, keep_fraction, NgdError, TermStats};
use crate::select::{select_candidates, SelectionMode, SelectionParams};
use crate::translate::{translate_corpus, translate_sentence, Hypothesis, TranslateError, TranslationAdapter};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Index(#[from] IrError),
    #[error(transparent)]
    Ngd(#[from] NgdError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    #[default]
    Candidate,
    Inverted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Prune each query's search space to the `x_percent` least NGD-dissimilar
    /// in-window sentences before retrieval.
    pub ngd_prune: bool,
    /// Date window in days; defaults to 7 with pruning, 5 without.
    pub window_days: Option<u32>,
    pub x_percent: f64,
    pub n_top_ngd: usize,
    pub m_top_ir: usize,
    /// IR hits per query; defaults to 10 with pruning, 5 without.
    pub top_k_ir: Option<usize>,
    /// NGD weight in the modified-IR blend; 0 gives plain IR selection.
    pub lambda: f64,
    pub mode: SelectionMode,
    pub metric: Metric,
    pub filter_mode: FilterMode,
    pub n_best_inverted: usize,
    pub max_tail: f64,
    /// Score cutoff; `None` accepts every pair.
    pub threshold: Option<f64>,
    pub top_p_output: f64,
    pub one_to_one: bool,
    pub bm25: Bm25Params,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            ngd_prune: true,
            window_days: None,
            x_percent: 0.4,
            n_top_ngd: 5,
            m_top_ir: 7,
            top_k_ir: None,
            lambda: 0.5,
            mode: SelectionMode::Union,
            metric: Metric::Ter,
            filter_mode: FilterMode::Candidate,
            n_best_inverted: 5,
            max_tail: 0.3,
            threshold: None,
            top_p_output: 0.5,
            one_to_one: false,
            bm25: Bm25Params::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Plain IR without any NGD: 5-day window, top 5 hits.
    pub fn plain_ir() -> Self {
        PipelineConfig {
            ngd_prune: false,
            lambda: 0.0,
            ..Default::default()
        }
    }

    pub fn window(&self) -> u32 {
        self.window_days.unwrap_or(if self.ngd_prune { 7 } else { 5 })
    }

    pub fn top_k(&self) -> usize {
        self.top_k_ir.unwrap_or(if self.ngd_prune { 10 } else { 5 })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold.unwrap_or(f64::INFINITY)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        let frac = |x: f64| x > 0.0 && x <= 1.0;
        if self.n_top_ngd == 0 || self.m_top_ir == 0 || self.top_k() == 0 || self.n_best_inverted == 0 {
            return bad("counts must be at least 1");
        }
        if !frac(self.x_percent) {
            return bad("x_percent must be in (0, 1]");
        }
        if !frac(self.top_p_output) {
            return bad("top_p_output must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.max_tail) {
            return bad("max_tail must be in [0, 1]");
        }
        if self.threshold.is_some_and(f64::is_nan) {
            return bad("threshold is NaN");
        }
        if self.bm25.k1.is_nan() || self.bm25.k1 < 0.0 || !(0.0..=1.0).contains(&self.bm25.b) {
            return bad("bm25 needs k1 >= 0 and b in [0, 1]");
        }
        Ok(())
    }

    fn selection(&self) -> SelectionParams {
        SelectionParams {
            n_top_ngd: self.n_top_ngd,
            m_top_ir: self.m_top_ir,
            mode: self.mode,
            lambda: self.lambda,
            x_percent: self.x_percent,
        }
    }
}

#[derive(Clone, Copy)]
pub struct Adapters<'a> {
    pub source: &'a dyn TranslationAdapter,
    pub target: &'a dyn TranslationAdapter,
    /// Direct source-to-target translator for inverted filtering.
    pub inverse: Option<&'a dyn TranslationAdapter>,
}

#[derive(Debug, Default)]
pub struct Resources {
    pub stop_words: StopWordList,
    pub terp: TerpResources,
    pub terp_weights: TerpWeights,
    /// NGD statistics; built from the pivot-translated target side when absent.
    pub reference_stats: Option<TermStats>,
}

/// Per-stage query counts, each bounded by the one before it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounters {
    pub translated: usize,
    pub windowed: usize,
    pub pruned: usize,
    pub retrieved: usize,
    pub selected: usize,
    pub filtered: usize,
    pub ranked: usize,
    pub emitted: usize,
    pub tail_trimmed: usize,
}

impl StageCounters {
    pub fn chain(&self) -> [usize; 8] {
        [
            self.translated,
            self.windowed,
            self.pruned,
            self.retrieved,
            self.selected,
            self.filtered,
            self.ranked,
            self.emitted,
        ]
    }

    pub fn is_monotone(&self) -> bool {
        self.chain().windows(2).all(|w| w[0] >= w[1])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub translate: f64,
    pub index: f64,
    pub queries: f64,
    pub ranking: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub pairs_emitted: usize,
    pub counters: StageCounters,
    pub candidates_total: usize,
    pub ngd_floored_denominators: u64,
    pub ngd_empty_sentences: u64,
    pub config: PipelineConfig,
    pub window_days: u32,
    pub top_k_ir: usize,
    /// Wall-clock seconds per stage. Left out of the serialized report so
    /// that reruns produce identical files; written to a separate file.
    #[serde(skip)]
    pub timing: StageTimings,
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub pairs: Vec<ScoredPair>,
    pub report: ExtractionReport,
}

#[derive(Default)]
struct QueryOutcome {
    windowed: bool,
    pruned: bool,
    retrieved: bool,
    selected: bool,
    candidates: usize,
    pair: Option<ScoredPair>,
}

fn one_best(map: BTreeMap<SentenceId, Vec<Hypothesis>>, n: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new(); n];
    for (id, hyps) in map {
        if let Some(h) = hyps.into_iter().next() {
            out[id.index()] = h.tokens;
        }
    }
    out
}

struct QueryContext<'a> {
    cfg: &'a PipelineConfig,
    index: &'a InvertedIndex,
    stats: Option<&'a TermStats>,
    scorer: &'a Scorer,
    corpus: &'a ComparableCorpus,
    src_pivot: &'a [Vec<String>],
    src_stopped: &'a [Vec<String>],
    tgt_pivot: &'a [Vec<String>],
    tgt_stopped: &'a [Vec<String>],
    inverse: Option<&'a dyn TranslationAdapter>,
}

impl QueryContext<'_> {
    fn dis(&self, query: &[String], id: SentenceId) -> f64 {
        match self.stats {
            Some(s) => s.dis_ngd(query, &self.tgt_stopped[id.index()]).unwrap_or(1.0),
            None => 1.0,
        }
    }

    fn run(&self, src: &Sentence) -> Result<QueryOutcome, PipelineError> {
        let cfg = self.cfg;
        let mut out = QueryOutcome::default();
        let query = &self.src_stopped[src.id.index()];
        let window: Vec<SentenceId> = self.index.window_ids(src.date, cfg.window()).collect();
        if window.is_empty() {
            return Ok(out);
        }
        out.windowed = true;

        let union_ngd = cfg.mode == SelectionMode::Union && cfg.lambda > 0.0;
        let full_rank = cfg.ngd_prune || union_ngd || cfg.mode == SelectionMode::Intersection;
        let mut ngd_ranked: Vec<(SentenceId, f64)> = Vec::new();
        if full_rank {
            let mut scored: Vec<(SentenceId, f64)> = window.iter().map(|&id| (id, self.dis(query, id))).collect();
            ngd_ranked = keep_fraction(&mut scored, 1.0);
        }
        let space: Option<HashSet<SentenceId>> = cfg.ngd_prune.then(|| {
            let keep = fraction_count(ngd_ranked.len(), cfg.x_percent);
            ngd_ranked[..keep].iter().map(|(id, _)| *id).collect()
        });
        out.pruned = space.as_ref().is_none_or(|s| !s.is_empty());
        if !out.pruned {
            return Ok(out);
        }

        let hits = self
            .index
            .query_window(query, src.date, cfg.window(), cfg.top_k(), space.as_ref());
        if !full_rank {
            let mut scored: Vec<(SentenceId, f64)> =
                hits.iter().map(|h| (h.sentence_id, self.dis(query, h.sentence_id))).collect();
            ngd_ranked = keep_fraction(&mut scored, 1.0);
        }
        out.retrieved = !hits.is_empty() || (union_ngd && !ngd_ranked.is_empty());
        if !out.retrieved {
            return Ok(out);
        }

        let set = select_candidates(src.id, &hits, &ngd_ranked, &cfg.selection());
        out.candidates = set.len();
        out.selected = !set.is_empty();
        if !out.selected {
            return Ok(out);
        }

        let mut pair = match (cfg.filter_mode, self.inverse) {
            (FilterMode::Candidate, _) => {
                let cands: Vec<(SentenceId, &[String])> = set
                    .candidates
                    .iter()
                    .map(|c| (c.id, self.tgt_pivot[c.id.index()].as_slice()))
                    .collect();
                best_candidate(&self.src_pivot[src.id.index()], src.id, &cands, self.scorer)
            }
            (FilterMode::Inverted, Some(adapter)) => {
                let hyps = translate_sentence(adapter, src, cfg.n_best_inverted, cfg.seed)?;
                let toks: Vec<&[String]> = hyps.iter().map(|h| h.tokens.as_slice()).collect();
                let mut best: Option<(f64, SentenceId)> = None;
                for c in &set.candidates {
                    let target = &self.corpus.target.sentences[c.id.index()];
                    let Ok(s) = sum_over_hypotheses(&toks, &target.tokens, self.scorer) else {
                        continue;
                    };
                    if best.is_none_or(|(v, id)| s.score < v || (s.score == v && c.id < id)) {
                        best = Some((s.score, c.id));
                    }
                }
                best.map(|(score, target_id)| ScoredPair {
                    source_id: src.id,
                    target_id,
                    metric: self.scorer.metric,
                    score,
                    selected_by: SelectedBy::InvertedTranslation,
                    tail: None,
                })
            }
            (FilterMode::Inverted, None) => unreachable!("checked before queries run"),
        };
        if let Some(p) = pair.as_mut() {
            let trim = tail_removal(
                &self.src_pivot[p.source_id.index()],
                &self.tgt_pivot[p.target_id.index()],
                cfg.max_tail,
            );
            if trim.trimmed {
                p.tail = Some(trim);
            }
        }
        out.pair = pair;
        Ok(out)
    }
}

/// Runs the whole extraction. Output is identical for identical inputs
/// regardless of worker count.
pub fn run_extraction(
    corpus: &ComparableCorpus,
    adapters: Adapters<'_>,
    resources: &Resources,
    cfg: &PipelineConfig,
) -> Result<Extraction, PipelineError> {
    cfg.validate()?;
    match (cfg.filter_mode, adapters.inverse.is_some()) {
        (FilterMode::Inverted, false) => {
            return Err(PipelineError::Config("inverted filtering needs a source-to-target adapter".into()))
        }
        (FilterMode::Candidate, true) => {
            return Err(PipelineError::Config(
                "a source-to-target adapter is only used with inverted filtering".into(),
            ))
        }
        _ => {}
    }
    let mut timing = StageTimings::default();
    let mut counters = StageCounters::default();

    let t = Instant::now();
    let src_pivot = one_best(
        translate_corpus(adapters.source, &corpus.source, 1, cfg.seed)?,
        corpus.source.len(),
    );
    let tgt_pivot = one_best(
        translate_corpus(adapters.target, &corpus.target, 1, cfg.seed)?,
        corpus.target.len(),
    );
    counters.translated = corpus.source.len();
    timing.translate = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let stops = &resources.stop_words;
    let src_stopped: Vec<Vec<String>> = src_pivot.iter().map(|t| remove_stop_words(t, stops)).collect();
    let tgt_stopped: Vec<Vec<String>> = tgt_pivot.iter().map(|t| remove_stop_words(t, stops)).collect();
    let entries: Vec<IndexEntry> = corpus
        .target
        .sentences
        .iter()
        .map(|s| IndexEntry {
            id: s.id,
            date: s.date,
            tokens: &tgt_pivot[s.id.index()],
        })
        .collect();
    let index = build_index(&entries, stops, cfg.bm25)?;
    let built_stats;
    let stats = match &resources.reference_stats {
        Some(s) => Some(s),
        None if tgt_stopped.len() >= 2 => {
            built_stats = build_term_stats(&tgt_stopped, None)?;
            Some(&built_stats)
        }
        None => None,
    };
    if stats.is_some_and(|s| s.n_total() < 2) {
        return Err(NgdError::TooFewDocuments(stats.unwrap().n_total()).into());
    }
    let (floored0, empty0) = stats.map_or((0, 0), |s| {
        (
            s.diagnostics().floored_denominators.load(Ordering::Relaxed),
            s.diagnostics().empty_sentences.load(Ordering::Relaxed),
        )
    });
    timing.index = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let scorer = Scorer {
        metric: cfg.metric,
        resources: resources.terp.clone(),
        weights: resources.terp_weights,
    };
    let ctx = QueryContext {
        cfg,
        index: &index,
        stats,
        scorer: &scorer,
        corpus,
        src_pivot: &src_pivot,
        src_stopped: &src_stopped,
        tgt_pivot: &tgt_pivot,
        tgt_stopped: &tgt_stopped,
        inverse: adapters.inverse,
    };
    let parallel = adapters.inverse.is_none_or(|a| a.is_concurrent());
    let outcomes: Vec<QueryOutcome> = if parallel {
        corpus
            .source
            .sentences
            .par_iter()
            .map(|s| ctx.run(s))
            .collect::<Result<_, _>>()?
    } else {
        corpus
            .source
            .sentences
            .iter()
            .map(|s| ctx.run(s))
            .collect::<Result<_, _>>()?
    };
    timing.queries = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut candidates_total = 0;
    let mut pairs = Vec::new();
    for o in outcomes {
        counters.windowed += usize::from(o.windowed);
        counters.pruned += usize::from(o.pruned);
        counters.retrieved += usize::from(o.retrieved);
        counters.selected += usize::from(o.selected);
        candidates_total += o.candidates;
        if let Some(p) = o.pair {
            counters.tail_trimmed += usize::from(p.tail.is_some());
            pairs.push(p);
        }
    }
    counters.filtered = pairs.len();
    let pairs = rank_pairs(pairs, cfg);
    counters.ranked = pairs.len();
    let pairs = accept_pairs(&pairs, cfg.threshold());
    counters.emitted = pairs.len();
    timing.ranking = t.elapsed().as_secs_f64();

    let (floored, empty) = stats.map_or((0, 0), |s| {
        (
            s.diagnostics().floored_denominators.load(Ordering::Relaxed) - floored0,
            s.diagnostics().empty_sentences.load(Ordering::Relaxed) - empty0,
        )
    });
    let report = ExtractionReport {
        pairs_emitted: pairs.len(),
        counters,
        candidates_total,
        ngd_floored_denominators: floored,
        ngd_empty_sentences: empty,
        config: cfg.clone(),
        window_days: cfg.window(),
        top_k_ir: cfg.top_k(),
        timing,
    };
    Ok(Extraction { pairs, report })
}

/// Sorts pairs by score, applies the optional one-to-one assignment and
/// keeps the best `top_p_output` fraction.
pub fn rank_pairs(mut pairs: Vec<ScoredPair>, cfg: &PipelineConfig) -> Vec<ScoredPair> {
    sort_pairs(&mut pairs);
    if cfg.one_to_one {
        let mut used = HashSet::new();
        pairs.retain(|p| used.insert(p.target_id));
    }
    pairs.truncate(fraction_count(pairs.len(), cfg.top_p_output));
    pairs
}

/// Pairs whose sentences lie more than `window_days` apart.
pub fn window_violations<'a>(pairs: &'a [ScoredPair], corpus: &ComparableCorpus, window_days: u32) -> Vec<&'a ScoredPair> {
    pairs
        .iter()
        .filter(|p| {
            let a = corpus.source.sentences[p.source_id.index()].date;
            let b = corpus.target.sentences[p.target_id.index()].date;
            (a - b).num_days().unsigned_abs() > window_days as u64
        })
        .collect()
}

fn clean(text: &str) -> String {
    text.chars()
        .map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c })
        .collect()
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn report_path(out: &Path) -> PathBuf {
    sidecar(out, ".report.json")
}

pub fn timing_path(out: &Path) -> PathBuf {
    sidecar(out, ".timing.json")
}

/// Writes `source_id, target_id, score, source_text, target_text` TSV lines
/// in the given order, plus the report next to it as `<out>.report.json` and
/// the stage timings as `<out>.timing.json`.
pub fn emit_corpus(
    pairs: &[ScoredPair],
    corpus: &ComparableCorpus,
    report: &ExtractionReport,
    out: &Path,
) -> Result<(), PipelineError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| PipelineError::Io { path, source }
    };
    let mut buf = Vec::new();
    for p in pairs {
        let s = &corpus.source.sentences[p.source_id.index()];
        let t = &corpus.target.sentences[p.target_id.index()];
        writeln!(buf, "{}\t{}\t{}\t{}\t{}", p.source_id, p.target_id, p.score, clean(&s.text), clean(&t.text))
            .map_err(io(out))?;
    }
    fs::write(out, buf).map_err(io(out))?;
    let rp = report_path(out);
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(&rp, json + "\n").map_err(io(&rp))?;
    let tp = timing_path(out);
    let json = serde_json::to_string_pretty(&report.timing).expect("timing serializes");
    fs::write(&tp, json + "\n").map_err(io(&tp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_date, CorpusSide};
    use crate::translate::IdentityAdapter;

    fn side(lang: &str, docs: &[(&str, &[&str])]) -> CorpusSide {
        let mut s = CorpusSide::new(lang);
        for (i, (date, sents)) in docs.iter().enumerate() {
            s.push_document(format!("{lang}{i}"), parse_date(date).unwrap(), sents);
        }
        s
    }

    fn identity() -> IdentityAdapter {
        IdentityAdapter::new("en")
    }

    fn run(corpus: &ComparableCorpus, cfg: &PipelineConfig) -> Extraction {
        let id = identity();
        let adapters = Adapters {
            source: &id,
            target: &id,
            inverse: None,
        };
        run_extraction(corpus, adapters, &Resources::default(), cfg).unwrap()
    }

    fn news() -> ComparableCorpus {
        let src = side(
            "fa",
            &[
                ("2010-05-01", &["the minister visited rome today", "heavy rain hit the northern coast"]),
                ("2010-05-03", &["the football team won the final match"]),
            ],
        );
        let tgt = side(
            "it",
            &[
                ("2010-05-02", &["heavy rain hit the northern coast", "prices of bread rose again"]),
                ("2010-05-01", &["the minister visited rome today", "a new museum opened in milan"]),
                ("2010-05-04", &["the football team won the final match"]),
            ],
        );
        ComparableCorpus::new(src, tgt).unwrap()
    }

    #[test]
    fn identity_corpus_pairs_every_sentence_with_its_copy() {
        let corpus = news();
        let cfg = PipelineConfig {
            top_p_output: 1.0,
            ..Default::default()
        };
        for metric in [Metric::Wer, Metric::Ter, Metric::Terp] {
            let out = run(&corpus, &PipelineConfig { metric, ..cfg.clone() });
            assert_eq!(out.pairs.len(), 3);
            for p in &out.pairs {
                assert_eq!(p.score, 0.0);
                assert_eq!(
                    corpus.source.sentences[p.source_id.index()].text,
                    corpus.target.sentences[p.target_id.index()].text
                );
            }
            assert!(out.report.counters.is_monotone());
        }
    }

    #[test]
    fn empty_target_side() {
        let corpus = ComparableCorpus::new(news().source, CorpusSide::new("it")).unwrap();
        let out = run(&corpus, &PipelineConfig::default());
        assert!(out.pairs.is_empty());
        assert_eq!(out.report.counters.retrieved, 0);
        assert_eq!(out.report.counters.translated, 3);
    }

    #[test]
    fn configuration_errors_come_first() {
        let id = identity();
        let corpus = news();
        let cfg = PipelineConfig {
            filter_mode: FilterMode::Inverted,
            ..Default::default()
        };
        let adapters = Adapters {
            source: &id,
            target: &id,
            inverse: None,
        };
        assert!(matches!(
            run_extraction(&corpus, adapters, &Resources::default(), &cfg),
            Err(PipelineError::Config(_))
        ));
        let bad = PipelineConfig {
            x_percent: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(PipelineConfig { lambda: 1.5, ..Default::default() }.validate().is_err());
        assert!(PipelineConfig { m_top_ir: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn window_defaults_follow_pruning() {
        let d = PipelineConfig::default();
        assert_eq!((d.window(), d.top_k()), (7, 10));
        let p = PipelineConfig::plain_ir();
        assert_eq!((p.window(), p.top_k()), (5, 5));
        let json: PipelineConfig = serde_json::from_str(r#"{"window_days": 3, "metric": "wer"}"#).unwrap();
        assert_eq!((json.window(), json.metric), (3, Metric::Wer));
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn inverted_mode_uses_direct_translation() {
        let corpus = news();
        let id = identity();
        let cfg = PipelineConfig {
            filter_mode: FilterMode::Inverted,
            top_p_output: 1.0,
            ..Default::default()
        };
        let adapters = Adapters {
            source: &id,
            target: &id,
            inverse: Some(&id),
        };
        let out = run_extraction(&corpus, adapters, &Resources::default(), &cfg).unwrap();
        assert_eq!(out.pairs.len(), 3);
        assert!(out.pairs.iter().all(|p| p.selected_by == SelectedBy::InvertedTranslation && p.score == 0.0));
    }

    #[test]
    fn one_to_one_and_top_fraction() {
        let mk = |s: u32, t: u32, score: f64| ScoredPair {
            source_id: SentenceId(s),
            target_id: SentenceId(t),
            metric: Metric::Ter,
            score,
            selected_by: SelectedBy::CandidateFilter,
            tail: None,
        };
        let pairs = vec![mk(0, 1, 0.3), mk(1, 1, 0.1), mk(2, 2, 0.2), mk(3, 3, 0.9)];
        let cfg = PipelineConfig {
            top_p_output: 1.0,
            one_to_one: true,
            ..Default::default()
        };
        let ranked = rank_pairs(pairs.clone(), &cfg);
        assert_eq!(ranked.iter().map(|p| p.source_id.0).collect::<Vec<_>>(), vec![1, 2, 3]);
        let half = rank_pairs(pairs, &PipelineConfig::default());
        assert_eq!(half.iter().map(|p| p.source_id.0).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn emitted_files() {
        let corpus = news();
        let out = run(&corpus, &PipelineConfig { top_p_output: 1.0, ..Default::default() });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.tsv");
        emit_corpus(&out.pairs, &corpus, &out.report, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.split('\t').count() == 5));
        let report: ExtractionReport = serde_json::from_str(&fs::read_to_string(report_path(&path)).unwrap()).unwrap();
        assert_eq!(report.pairs_emitted, 3);

        let empty = dir.path().join("empty.tsv");
        emit_corpus(&[], &corpus, &out.report, &empty).unwrap();
        assert_eq!(fs::read_to_string(&empty).unwrap(), "");
        assert!(report_path(&empty).exists());
        assert!(emit_corpus(&[], &corpus, &out.report, &dir.path().join("no/such/dir.tsv")).is_err());
    }

    #[test]
    fn ten_pairs_half_emitted() {
        let mut src = CorpusSide::new("fa");
        let mut tgt = CorpusSide::new("it");
        let date = parse_date("2011-01-01").unwrap();
        let texts: Vec<String> = (0..10).map(|i| format!("w{i} x{i} y{i}")).collect();
        src.push_document("s", date, &texts);
        tgt.push_document("t", date, &texts);
        let corpus = ComparableCorpus::new(src, tgt).unwrap();
        let out = run(&corpus, &PipelineConfig::default());
        assert_eq!(out.report.counters.ranked, 5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.tsv");
        emit_corpus(&out.pairs, &corpus, &out.report, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 5);
    }
}

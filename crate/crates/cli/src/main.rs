mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pivotmine::corpus::ingest_corpus;
use pivotmine::eval::{
    compare_runs, generate_synthetic, load_id_pairs, score_extraction, write_synthetic, GoldAlignment, LabeledConfig, SynthSpec,
    PIVOT_LANG, SOURCE_LANG, TARGET_LANG,
};
use pivotmine::pipeline::{emit_corpus, run_extraction};
use pivotmine::{ComparableCorpus, FilterMode, Metric, SelectionMode};
use serde::de::DeserializeOwned;

use config::{AdapterSpec, Loaded, RunConfig};

#[derive(Parser)]
#[command(name = "pivotmine", version, about = "Extract parallel sentences from comparable corpora through a pivot language")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the extraction pipeline and write the pairs as TSV.
    Extract(ExtractArgs),
    /// Generate a synthetic comparable corpus with gold pairs and dictionaries.
    GenSynthetic {
        /// JSON synthetic spec; built-in defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score an extraction TSV against a gold alignment.
    Evaluate {
        #[arg(long)]
        extracted: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
    /// Run several configurations on one corpus and tabulate the scores.
    Compare(CompareArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Source-side JSONL corpus.
    #[arg(long)]
    src: PathBuf,
    /// Target-side JSONL corpus.
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long, default_value = SOURCE_LANG)]
    src_lang: String,
    #[arg(long, default_value = TARGET_LANG)]
    tgt_lang: String,
}

impl CorpusArgs {
    fn load(&self) -> Result<ComparableCorpus> {
        let source = ingest_corpus(&self.src, &self.src_lang)?;
        let target = ingest_corpus(&self.tgt, &self.tgt_lang)?;
        Ok(ComparableCorpus::new(source, target)?)
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// JSON run configuration (pipeline parameters, adapters, resources).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Date window in days [default: 7 with NGD pruning, 5 without].
    #[arg(long)]
    window_days: Option<u32>,
    /// ter | terp | wer [default: ter].
    #[arg(long, value_parser = parse_enum::<Metric>)]
    metric: Option<Metric>,
    /// candidate | inverted [default: candidate].
    #[arg(long, value_parser = parse_enum::<FilterMode>)]
    filter_mode: Option<FilterMode>,
    /// union | intersection [default: union].
    #[arg(long, value_parser = parse_enum::<SelectionMode>)]
    mode: Option<SelectionMode>,
    /// Fraction of in-window sentences kept by NGD pruning [default: 0.4].
    #[arg(long)]
    x_percent: Option<f64>,
    /// Fraction of ranked pairs emitted [default: 0.5].
    #[arg(long)]
    top_p: Option<f64>,
    /// Maximum metric score of an emitted pair [artifact default: none].
    #[arg(long)]
    threshold: Option<f64>,
    /// NGD weight in candidate selection [default: 0.5].
    #[arg(long)]
    lambda: Option<f64>,
    /// Disable NGD pruning of the search space.
    #[arg(long)]
    no_ngd_prune: bool,
    /// Give every target sentence to at most one source [artifact default: off].
    #[arg(long)]
    one_to_one: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    gold: PathBuf,
    /// Run configuration files, one table row each, labeled by file stem.
    #[arg(long, num_args = 2.., required = true)]
    configs: Vec<PathBuf>,
    /// Configuration supplying adapters and resources [default: first of --configs].
    #[arg(long)]
    setup: Option<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Run rows concurrently; timings are then not comparable.
    #[arg(long)]
    parallel: bool,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase())).map_err(|e| e.to_string())
}

fn extract(args: &ExtractArgs) -> Result<()> {
    let mut loaded = Loaded::read(args.config.as_deref())?;
    let cfg = &mut loaded.config.pipeline;
    if args.window_days.is_some() {
        cfg.window_days = args.window_days;
    }
    if let Some(m) = args.metric {
        cfg.metric = m;
    }
    if let Some(m) = args.filter_mode {
        cfg.filter_mode = m;
    }
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(x) = args.x_percent {
        cfg.x_percent = x;
    }
    if let Some(p) = args.top_p {
        cfg.top_p_output = p;
    }
    if args.threshold.is_some() {
        cfg.threshold = args.threshold;
    }
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if args.no_ngd_prune {
        cfg.ngd_prune = false;
    }
    if args.one_to_one {
        cfg.one_to_one = true;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let cfg = cfg.clone();
    let corpus = args.corpus.load()?;
    let resources = loaded.resources()?;
    let adapters = loaded.adapters()?;
    let inverted = cfg.filter_mode == FilterMode::Inverted;
    if inverted && adapters.inverse.is_none() {
        bail!("--filter-mode inverted needs an inverse_adapter in the run configuration");
    }
    let ex = run_extraction(&corpus, adapters.for_run(inverted), &resources, &cfg)?;
    emit_corpus(&ex.pairs, &corpus, &ex.report, &args.out)?;
    let c = &ex.report.counters;
    eprintln!(
        "{} pairs written to {} (translated {}, windowed {}, retrieved {}, selected {}, filtered {}, tail-trimmed {})",
        ex.pairs.len(),
        args.out.display(),
        c.translated,
        c.windowed,
        c.retrieved,
        c.selected,
        c.filtered,
        c.tail_trimmed
    );
    Ok(())
}

fn gen_synthetic(spec: Option<&Path>, out_dir: &Path) -> Result<()> {
    let spec: SynthSpec = match spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthSpec::default(),
    };
    let synth = generate_synthetic(&spec)?;
    write_synthetic(&synth, out_dir)?;
    let dict = |path: &str, lang: &str| AdapterSpec::Dictionary {
        path: path.into(),
        lang: lang.into(),
        oov: Default::default(),
    };
    let run = RunConfig {
        source_adapter: dict("source-pivot.tsv", PIVOT_LANG),
        target_adapter: dict("target-pivot.tsv", PIVOT_LANG),
        inverse_adapter: Some(dict("source-target.tsv", TARGET_LANG)),
        ..Default::default()
    };
    let path = out_dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&run)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    eprintln!(
        "{} source and {} target sentences, {} gold pairs written to {}",
        synth.corpus.source.len(),
        synth.corpus.target.len(),
        synth.gold.len(),
        out_dir.display()
    );
    Ok(())
}

fn evaluate(extracted: &Path, gold: &Path) -> Result<()> {
    let pairs = load_id_pairs(extracted)?;
    let gold = GoldAlignment::load(gold)?;
    let s = score_extraction(&pairs, &gold);
    println!("pairs\t{}\ngold\t{}", pairs.len(), gold.len());
    println!("precision\t{:.6}\nrecall\t{:.6}\nf1\t{:.6}", s.precision, s.recall, s.f1);
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<()> {
    let corpus = args.corpus.load()?;
    let gold = GoldAlignment::load(&args.gold)?;
    gold.check_ids(&corpus)?;
    let mut runs = Vec::new();
    for path in &args.configs {
        let loaded = Loaded::read(Some(path))?;
        let label = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        runs.push(LabeledConfig {
            label,
            config: loaded.config.pipeline,
        });
    }
    let setup = Loaded::read(Some(args.setup.as_ref().unwrap_or(&args.configs[0])))?;
    let resources = setup.resources()?;
    let adapters = setup.adapters()?;
    let table = compare_runs(&runs, &corpus, adapters.for_run(true), &resources, &gold, args.parallel)?;
    print!("{table}");
    if let Some(csv) = &args.csv {
        fs::write(csv, table.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match &cli.command {
        Command::Extract(args) => extract(args),
        Command::GenSynthetic { spec, out_dir } => gen_synthetic(spec.as_deref(), out_dir),
        Command::Evaluate { extracted, gold } => evaluate(extracted, gold),
        Command::Compare(args) => compare(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut message = e.to_string();
            for cause in e.chain().skip(1) {
                let cause = cause.to_string();
                if !message.contains(&cause) {
                    message = format!("{message}: {cause}");
                }
            }
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

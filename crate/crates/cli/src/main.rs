//! `hsprobe`: run-directory pipeline over labeled QA corpora and hidden-state
//! bundles.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hsprobe::pipeline::{self, RunConfig, RunDir, CONFIG_COPY};
use hsprobe::report::Output;
use hsprobe::stats::{Center, TestReport};
use hsprobe::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "hsprobe", version, about = "Layerwise similarity of true and false answers in LLM hidden states")]
struct Cli {
    /// Run directory; stages write into subdirectories of it.
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,

    /// TOML file whose keys mirror the run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores). Never changes output bytes.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Replace an existing stage directory instead of refusing.
    #[arg(long, global = true)]
    overwrite: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse, normalize and select question/answer pairs.
    Prepare(PrepareArgs),
    /// Fill answer groups with ranked paraphrases.
    Augment(AugmentArgs),
    /// Write a synthetic hidden-state bundle and its dataset.
    Synth(SynthArgs),
    /// Similarity matrices, per-pair and category averages.
    Analyze(AnalyzeArgs),
    /// Own-group vs other-group hypothesis tests.
    Test(TestArgs),
    /// Weak-layer criteria.
    Layers(LayersArgs),
    /// CSV/SVG renderings and summary tables.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct PrepareArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Keep answers without a label (they never count toward a group).
    #[arg(long)]
    allow_unlabeled: bool,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Defaults to the prepare output.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// JSONL file of paraphrase variants.
    #[arg(long)]
    rewrites: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    group_size: Option<usize>,
    /// Distance between group means in units of sqrt(D).
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    offset: Option<f64>,
    /// 1-based layer whose shared mean is scaled down.
    #[arg(long)]
    weak_layer: Option<usize>,
    #[arg(long)]
    weak_scale: Option<f64>,
    /// Bundle directory (default: <run-dir>/bundle).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Compare each answer with itself too.
    #[arg(long)]
    include_self: bool,
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CenterArg {
    Mean,
    Median,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long)]
    gate_alpha: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    center: Option<CenterArg>,
    /// Paired t-test on per-question values.
    #[arg(long)]
    paired: bool,
}

#[derive(Args, Debug)]
struct LayersArgs {
    /// Use |other - own| for group_dif.
    #[arg(long)]
    abs: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutputArg {
    Heatmaps,
    PairSheets,
    Histogram,
    GroupDifCharts,
    Tables,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Additional run directories, one model column each.
    #[arg(long = "compare")]
    compare: Vec<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    outputs: Vec<OutputArg>,
    /// Pairs that get heatmaps and sheets (0 = all).
    #[arg(long)]
    max_pairs: Option<usize>,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// Copies the config file into the run directory. A different config already
/// there is only replaced with `--overwrite`.
fn persist_config(run: &RunDir, path: &Path, overwrite: bool) -> Result<()> {
    let dest = run.root().join(CONFIG_COPY);
    if dest.is_file() && !overwrite {
        let read = |p: &Path| {
            fs::read(p).map_err(|source| Error::Io {
                path: p.to_owned(),
                source,
            })
        };
        if read(&dest)? != read(path)? {
            return Err(Error::Validation(format!(
                "{} holds a different configuration; pass --overwrite to replace it",
                dest.display()
            )));
        }
        return Ok(());
    }
    run.persist_config(path)
}

fn print_test(label: &str, r: &TestReport) {
    println!(
        "{label}: {} t={:.4} df={:.2} p={:.3e} (means {:.4} vs {:.4}){}",
        r.chosen_test.name(),
        r.t,
        r.df,
        r.p_two_sided,
        r.mean_a,
        r.mean_b,
        if r.reject_h0 { format!(", H0 rejected at {}", r.reject_h0_at) } else { String::new() }
    );
    for w in &r.warnings {
        println!("  warning: {w}");
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(t) = cli.threads.or(cfg.threads) {
        if t == 0 {
            return Err(Error::Validation("--threads must be >= 1".into()));
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    if let Some(seed) = cli.seed.or(cfg.seed) {
        cfg.synth.seed = seed;
    }
    let run = RunDir::open(&cli.run_dir)?;
    if let Some(path) = &cli.config {
        persist_config(&run, path, cli.overwrite)?;
    }
    let ow = cli.overwrite;

    match cli.command {
        Command::Prepare(a) => {
            if a.dataset.is_some() {
                cfg.prepare.dataset = a.dataset;
            }
            cfg.prepare.allow_unlabeled |= a.allow_unlabeled;
            let out = pipeline::run_prepare(&run, &cfg.prepare, ow)?;
            let s = &out.selection;
            println!("{} examples / {} pairs / {} answers", s.examples_out, s.pairs_out, s.answers_out);
            println!(
                "rejected {} of {} pairs (too few answers {}, short answer {}, length gap {}, digits {})",
                s.rejected_pairs,
                s.pairs_in,
                s.rejected_too_few_answers,
                s.rejected_short_answer,
                s.rejected_length_gap,
                s.rejected_contains_digit
            );
        }
        Command::Augment(a) => {
            if a.dataset.is_some() {
                cfg.augment.dataset = a.dataset;
            }
            if a.rewrites.is_some() {
                cfg.augment.rewrites = a.rewrites;
            }
            let out = pipeline::run_augment(&run, &cfg.augment, ow)?;
            let r = &out.report;
            println!("removed {} examples", r.removed_examples);
            println!("{} examples / {} pairs", r.examples_out, r.pairs_out);
        }
        Command::Synth(a) => {
            let s = &mut cfg.synth;
            macro_rules! set {
                ($($field:ident <- $arg:expr),*) => { $( if let Some(v) = $arg { s.$field = v; } )* };
            }
            set!(num_layers <- a.layers, hidden_dim <- a.dim, num_pairs <- a.pairs, group_size <- a.group_size,
                 separation <- a.separation, offset <- a.offset, weak_scale <- a.weak_scale);
            if a.weak_layer.is_some() {
                s.weak_layer = a.weak_layer;
            }
            let out = pipeline::run_synth(&run, &cfg.synth, a.out.as_deref(), ow)?;
            println!(
                "{}: {} entries, {} layers x {} dims, states sha256 {}",
                out.model_name, out.entries, out.num_layers, out.hidden_dim, out.states_sha256
            );
        }
        Command::Analyze(a) => {
            if a.bundle.is_some() {
                cfg.analyze.bundle = a.bundle;
            }
            if a.dataset.is_some() {
                cfg.analyze.dataset = a.dataset;
            }
            if a.include_self {
                cfg.analyze.exclude_self = false;
            }
            if let Some(b) = a.bins {
                cfg.analyze.histogram_bins = b;
            }
            let s = pipeline::run_analyze(&run, &cfg.analyze, ow)?;
            let c = &s.categories;
            println!("{} ({} pairs)", s.model_name, s.n_pairs);
            println!("own_true {:.4} / cross {:.4} / own_false {:.4}", c.own_true, c.cross, c.own_false);
            if !s.dataset_verified {
                println!("warning: no dataset found to cross-check the bundle against");
            }
        }
        Command::Test(a) => {
            let t = &mut cfg.test;
            if let Some(v) = a.gate_alpha {
                t.gate_alpha = v;
            }
            if let Some(v) = a.alpha {
                t.headline_alpha = v;
            }
            if let Some(c) = a.center {
                t.center = match c {
                    CenterArg::Mean => Center::Mean,
                    CenterArg::Median => Center::Median,
                };
            }
            t.paired |= a.paired;
            let out = pipeline::run_test(&run, &cfg.test, ow)?;
            print_test("false answers", &out.false_side);
            print_test("true answers", &out.true_side);
        }
        Command::Layers(a) => {
            cfg.layers.group_dif_abs |= a.abs;
            let scan = pipeline::run_layers(&run, &cfg.layers, ow)?;
            for r in scan.sequence.iter().chain(&scan.group) {
                let mark = if r.is_headline() { "*" } else { " " };
                println!(
                    "{mark} {:<9} {} -> {}: mode {} ({} / {})",
                    r.criterion.name(),
                    u8::from(r.source_label),
                    u8::from(r.target_label),
                    r.mode,
                    r.freq,
                    r.indices.len()
                );
            }
        }
        Command::Report(a) => {
            if !a.outputs.is_empty() {
                cfg.report.outputs = a
                    .outputs
                    .iter()
                    .map(|o| match o {
                        OutputArg::Heatmaps => Output::Heatmaps,
                        OutputArg::PairSheets => Output::PairSheets,
                        OutputArg::Histogram => Output::Histogram,
                        OutputArg::GroupDifCharts => Output::GroupDifCharts,
                        OutputArg::Tables => Output::Tables,
                    })
                    .collect();
            }
            if let Some(n) = a.max_pairs {
                cfg.report.max_pairs = n;
            }
            let extra = a.compare.iter().map(RunDir::open).collect::<Result<Vec<_>>>()?;
            let m = pipeline::run_report(&run, &extra, &cfg.report, ow)?;
            println!("{} artifacts written to {}", m.artifacts.len(), run.stage_dir(pipeline::REPORTS).display());
            for d in &m.degenerate_heatmaps {
                println!("warning: heatmap {d} has a constant value range");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

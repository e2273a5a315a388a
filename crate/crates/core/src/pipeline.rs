//! Run-directory stages.
//!
//! A run directory holds one subdirectory per stage. Each stage reads the
//! outputs of earlier stages, writes its own files and a `stage_manifest.json`
//! listing inputs and outputs with SHA-256 hashes. Paths inside the run
//! directory are recorded relative to it, so two runs with the same inputs
//! produce byte-identical trees.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{
    augment_dataset, fetch_paraphrases, read_rewrites, write_rewrites, AugmentOptions, AugmentReport, EndpointConfig,
    FetchOptions, HttpChatClient, RewriteSet,
};
use crate::bundle::{synth_bundle, synth_dataset, verify_against_dataset, BundleReader, StateSource, SynthConfig};
use crate::corpus::{
    corpus_stats, parse_dataset, select_pairs_with_report, write_dataset, CorpusStats, Dataset, InputFormat,
    ParseOptions, SelectionCriteria, SelectionReport,
};
use crate::error::{Error, Result};
use crate::layerscan::{scan, LayerScan, ScanOptions};
use crate::report::{render_report, ReportManifest, ReportOptions};
use crate::simkit::{analyze_source, category_means, similarity_histogram, CategoryAverages, Histogram, PairAnalysis};
use crate::stats::{hypothesis_pipeline, PipelineOptions, SamplePair, TestReport};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const STAGE_MANIFEST: &str = "stage_manifest.json";
pub const CONFIG_COPY: &str = "config.toml";

pub const PREPARE: &str = "prepare";
pub const AUGMENT: &str = "augment";
pub const BUNDLE: &str = "bundle";
pub const ANALYZE: &str = "analyze";
pub const TEST: &str = "test";
pub const LAYERS: &str = "layers";
pub const REPORTS: &str = "reports";

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const SELECTION_FILE: &str = "selection_report.json";
pub const STATS_FILE: &str = "corpus_stats.json";
pub const REWRITES_FILE: &str = "rewrites.jsonl";
pub const AUGMENT_REPORT_FILE: &str = "augment_report.json";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const HISTOGRAM_FILE: &str = "histogram.json";
pub const TESTS_FILE: &str = "tests.json";
pub const LAYERS_FILE: &str = "layers.json";

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                record: i,
                message: format!("{}: {e}", path.display()),
            })
        })
        .collect()
}

pub fn read_dataset_file(path: &Path, opts: ParseOptions) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(bytes.as_slice(), InputFormat::detect(&bytes), opts)
}

fn write_dataset_file(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut w = create(path)?;
    write_dataset(&mut w, dataset)?;
    finish(w, path)
}

// ---------------------------------------------------------------------------
// Run directory and manifests
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

#[derive(Clone, Debug)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(RunDir { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.root.join(stage)
    }

    /// Path of a file an earlier stage must have written.
    pub fn require(&self, stage: &str, file: &str) -> Result<PathBuf> {
        let path = self.stage_dir(stage).join(file);
        if path.is_file() {
            Ok(path)
        } else {
            Err(Error::MissingStage {
                stage: stage.to_owned(),
                path,
            })
        }
    }

    /// Creates an empty stage directory. An existing one is an error unless
    /// `overwrite` is set, in which case it is removed first.
    pub fn begin_stage(&self, stage: &str, overwrite: bool) -> Result<PathBuf> {
        self.begin_dir(self.stage_dir(stage), stage, overwrite)
    }

    fn begin_dir(&self, dir: PathBuf, stage: &str, overwrite: bool) -> Result<PathBuf> {
        if dir.exists() {
            if !overwrite {
                return Err(Error::Validation(format!(
                    "stage `{stage}` output {} already exists; pass --overwrite to replace it",
                    dir.display()
                )));
            }
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }

    /// Relative to the run root when inside it, otherwise as given.
    pub fn display_path(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.root).map(Path::to_path_buf).ok().or_else(|| {
            let p = path.canonicalize().ok()?;
            let r = self.root.canonicalize().ok()?;
            p.strip_prefix(&r).ok().map(Path::to_path_buf)
        });
        match rel {
            Some(r) if r.as_os_str().is_empty() => ".".into(),
            Some(r) => r.to_string_lossy().replace('\\', "/"),
            None => path.to_string_lossy().into_owned(),
        }
    }

    fn record(&self, path: &Path) -> Result<FileRecord> {
        Ok(FileRecord {
            path: self.display_path(path),
            sha256: sha256_file(path)?,
        })
    }

    fn write_manifest(
        &self,
        dir: &Path,
        stage: &str,
        config: serde_json::Value,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
    ) -> Result<StageManifest> {
        let manifest = StageManifest {
            stage: stage.to_owned(),
            tool_version: TOOL_VERSION.to_owned(),
            config,
            inputs: inputs.iter().map(|p| self.record(p)).collect::<Result<_>>()?,
            outputs: outputs.iter().map(|p| self.record(p)).collect::<Result<_>>()?,
        };
        write_json(&dir.join(STAGE_MANIFEST), &manifest)?;
        Ok(manifest)
    }

    /// Copies the configuration file byte for byte.
    pub fn persist_config(&self, config_path: &Path) -> Result<()> {
        let dest = self.root.join(CONFIG_COPY);
        fs::copy(config_path, &dest).map_err(|e| Error::io(config_path, e))?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub prepare: PrepareConfig,
    pub augment: AugmentConfig,
    pub synth: SynthConfig,
    pub analyze: AnalyzeConfig,
    pub test: PipelineOptions,
    pub layers: ScanOptions,
    pub report: ReportOptions,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    pub dataset: Option<PathBuf>,
    pub allow_unlabeled: bool,
    pub criteria: SelectionCriteria,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Defaults to the prepare stage output.
    pub dataset: Option<PathBuf>,
    pub rewrites: Option<PathBuf>,
    pub endpoint: Option<EndpointConfig>,
    pub options: AugmentOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Defaults to `<run>/bundle`.
    pub bundle: Option<PathBuf>,
    /// Dataset to cross-check the bundle against; defaults to the augment
    /// output, then a dataset stored next to the bundle.
    pub dataset: Option<PathBuf>,
    pub exclude_self: bool,
    pub histogram_bins: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            bundle: None,
            dataset: None,
            exclude_self: true,
            histogram_bins: 20,
        }
    }
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepareOutcome {
    pub selection: SelectionReport,
    pub stats: CorpusStats,
}

pub fn run_prepare(run: &RunDir, cfg: &PrepareConfig, overwrite: bool) -> Result<PrepareOutcome> {
    let input = cfg
        .dataset
        .clone()
        .ok_or_else(|| Error::Validation("prepare needs a dataset path".into()))?;
    let parsed = read_dataset_file(
        &input,
        ParseOptions {
            allow_unlabeled: cfg.allow_unlabeled,
            normalize: true,
        },
    )?;
    if parsed.examples.is_empty() {
        return Err(Error::Validation(format!("no examples parsed from {}", input.display())));
    }
    let (selected, selection) = select_pairs_with_report(&parsed, &cfg.criteria)?;
    if selected.examples.is_empty() {
        return Err(Error::InsufficientData("no pair satisfies the selection criteria".into()));
    }
    let stats = corpus_stats(&selected)?;

    let dir = run.begin_stage(PREPARE, overwrite)?;
    let outputs = [dir.join(DATASET_FILE), dir.join(SELECTION_FILE), dir.join(STATS_FILE)];
    write_dataset_file(&outputs[0], &selected)?;
    write_json(&outputs[1], &selection)?;
    write_json(&outputs[2], &stats)?;
    let mut config = serde_json::to_value(cfg)?;
    config["dataset"] = run.display_path(&input).into();
    run.write_manifest(&dir, PREPARE, config, &[input], &outputs)?;
    Ok(PrepareOutcome { selection, stats })
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentOutcome {
    pub report: AugmentReport,
    pub stats: CorpusStats,
}

/// Requests paraphrases for every group below the target size.
pub fn fetch_rewrites(dataset: &Dataset, endpoint: &EndpointConfig, target_size: usize) -> Result<Vec<RewriteSet>> {
    let client = HttpChatClient::new(endpoint.clone());
    let mut out = Vec::new();
    for (_, pair) in dataset.pairs() {
        for label in [true, false] {
            let group: Vec<_> = pair.group(label).cloned().collect();
            if group.len() < target_size {
                out.extend(fetch_paraphrases(&pair.pair_id, label, &group, &client, FetchOptions::default())?);
            }
        }
    }
    Ok(out)
}

pub fn run_augment(run: &RunDir, cfg: &AugmentConfig, overwrite: bool) -> Result<AugmentOutcome> {
    let input = match &cfg.dataset {
        Some(p) => p.clone(),
        None => run.require(PREPARE, DATASET_FILE)?,
    };
    let dataset = read_dataset_file(&input, ParseOptions::default())?;
    let mut inputs = vec![input.clone()];
    let rewrites = match (&cfg.rewrites, &cfg.endpoint) {
        (Some(path), _) => {
            inputs.push(path.clone());
            let f = File::open(path).map_err(|e| Error::io(path, e))?;
            read_rewrites(BufReader::new(f))?
        }
        (None, Some(endpoint)) => fetch_rewrites(&dataset, endpoint, cfg.options.target_size)?,
        (None, None) => Vec::new(),
    };
    let (augmented, report) = augment_dataset(&dataset, &rewrites, &cfg.options)?;
    if augmented.examples.is_empty() {
        return Err(Error::InsufficientData("augmentation removed every example".into()));
    }
    let stats = corpus_stats(&augmented)?;

    let dir = run.begin_stage(AUGMENT, overwrite)?;
    let mut outputs = vec![dir.join(DATASET_FILE), dir.join(AUGMENT_REPORT_FILE), dir.join(STATS_FILE)];
    write_dataset_file(&outputs[0], &augmented)?;
    write_json(&outputs[1], &report)?;
    write_json(&outputs[2], &stats)?;
    if cfg.rewrites.is_none() && cfg.endpoint.is_some() {
        let path = dir.join(REWRITES_FILE);
        let mut w = create(&path)?;
        write_rewrites(&mut w, &rewrites)?;
        finish(w, &path)?;
        outputs.push(path);
    }
    let mut config = serde_json::to_value(cfg)?;
    config["dataset"] = run.display_path(&input).into();
    if let Some(p) = &cfg.rewrites {
        config["rewrites"] = run.display_path(p).into();
    }
    run.write_manifest(&dir, AUGMENT, config, &inputs, &outputs)?;
    Ok(AugmentOutcome { report, stats })
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthOutcome {
    pub model_name: String,
    pub entries: usize,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub states_sha256: String,
}

/// Writes a synthetic bundle (and its matching dataset) to `out`, or to
/// `<run>/bundle` by default.
pub fn run_synth(run: &RunDir, cfg: &SynthConfig, out: Option<&Path>, overwrite: bool) -> Result<SynthOutcome> {
    cfg.validate()?;
    let bundle = synth_bundle(cfg)?;
    let dataset = synth_dataset(cfg);
    let dir = match out {
        Some(p) => run.begin_dir(p.to_path_buf(), BUNDLE, overwrite)?,
        None => run.begin_stage(BUNDLE, overwrite)?,
    };
    bundle.write_to(&dir)?;
    write_dataset_file(&dir.join(DATASET_FILE), &dataset)?;
    let outputs = [
        dir.join(crate::bundle::MANIFEST_FILE),
        dir.join(crate::bundle::STATES_FILE),
        dir.join(DATASET_FILE),
    ];
    let manifest = run.write_manifest(&dir, BUNDLE, serde_json::to_value(cfg)?, &[], &outputs)?;
    Ok(SynthOutcome {
        model_name: bundle.manifest.model_name.clone(),
        entries: bundle.manifest.entries.len(),
        num_layers: bundle.manifest.num_layers,
        hidden_dim: bundle.manifest.hidden_dim,
        states_sha256: manifest.outputs[1].sha256.clone(),
    })
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSummary {
    pub model_name: String,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub n_pairs: usize,
    pub exclude_self: bool,
    /// Whether the bundle was cross-checked against a dataset.
    pub dataset_verified: bool,
    pub categories: CategoryAverages,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryHistograms {
    pub bins: usize,
    pub own_true: Histogram,
    pub cross: Histogram,
    pub own_false: Histogram,
}

fn resolve_analyze_dataset(run: &RunDir, cfg: &AnalyzeConfig, bundle_dir: &Path) -> Option<PathBuf> {
    if let Some(p) = &cfg.dataset {
        return Some(p.clone());
    }
    let augmented = run.stage_dir(AUGMENT).join(DATASET_FILE);
    if augmented.is_file() {
        return Some(augmented);
    }
    let beside = bundle_dir.join(DATASET_FILE);
    beside.is_file().then_some(beside)
}

pub fn run_analyze(run: &RunDir, cfg: &AnalyzeConfig, overwrite: bool) -> Result<AnalyzeSummary> {
    if cfg.histogram_bins == 0 {
        return Err(Error::Validation("histogram_bins must be >= 1".into()));
    }
    let bundle_dir = match &cfg.bundle {
        Some(p) => p.clone(),
        None => {
            run.require(BUNDLE, crate::bundle::MANIFEST_FILE)?;
            run.stage_dir(BUNDLE)
        }
    };
    let reader = BundleReader::open(&bundle_dir)?;
    let dataset_path = resolve_analyze_dataset(run, cfg, &bundle_dir);
    if let Some(p) = &dataset_path {
        let dataset = read_dataset_file(p, ParseOptions::default())?;
        verify_against_dataset(reader.manifest(), &dataset)?;
    }
    let analyses = analyze_source(&reader, cfg.exclude_self)?;
    let averages: Vec<_> = analyses.iter().map(|a| a.averages.clone()).collect();
    let categories = category_means(&averages)?;
    let column = |f: &dyn Fn(&crate::simkit::PairAverages) -> f64| averages.iter().map(f).collect::<Vec<_>>();
    let histograms = CategoryHistograms {
        bins: cfg.histogram_bins,
        own_true: similarity_histogram(&column(&|p| p.own_true), cfg.histogram_bins)?,
        cross: similarity_histogram(&column(&|p| p.cross()), cfg.histogram_bins)?,
        own_false: similarity_histogram(&column(&|p| p.own_false), cfg.histogram_bins)?,
    };
    let m = reader.manifest();
    let summary = AnalyzeSummary {
        model_name: m.model_name.clone(),
        num_layers: m.num_layers,
        hidden_dim: m.hidden_dim,
        n_pairs: analyses.len(),
        exclude_self: cfg.exclude_self,
        dataset_verified: dataset_path.is_some(),
        categories,
    };

    let dir = run.begin_stage(ANALYZE, overwrite)?;
    let outputs = [dir.join(PAIRS_FILE), dir.join(SUMMARY_FILE), dir.join(HISTOGRAM_FILE)];
    write_jsonl(&outputs[0], &analyses)?;
    write_json(&outputs[1], &summary)?;
    write_json(&outputs[2], &histograms)?;
    let mut inputs = vec![
        bundle_dir.join(crate::bundle::MANIFEST_FILE),
        bundle_dir.join(crate::bundle::STATES_FILE),
    ];
    let mut config = serde_json::to_value(cfg)?;
    config["bundle"] = run.display_path(&bundle_dir).into();
    if let Some(p) = &dataset_path {
        config["dataset"] = run.display_path(p).into();
        inputs.push(p.clone());
    }
    run.write_manifest(&dir, ANALYZE, config, &inputs, &outputs)?;
    Ok(summary)
}

pub fn load_analyses(run: &RunDir) -> Result<Vec<PairAnalysis>> {
    read_jsonl(&run.require(ANALYZE, PAIRS_FILE)?)
}

pub fn load_summary(run: &RunDir) -> Result<AnalyzeSummary> {
    read_json(&run.require(ANALYZE, SUMMARY_FILE)?)
}

// ---------------------------------------------------------------------------
// test
// ---------------------------------------------------------------------------

pub const FALSE_SIDE_HYPOTHESIS: &str = "H0: mean similarity of false answers to the false group equals their mean similarity to the true group";
pub const TRUE_SIDE_HYPOTHESIS: &str = "H0: mean similarity of true answers to the true group equals their mean similarity to the false group";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub model_name: String,
    pub options: PipelineOptions,
    pub false_side: TestReport,
    pub true_side: TestReport,
}

/// The two observation pairs: false-side `(own_false, false->true)` and
/// true-side `(own_true, true->false)`, one value per question.
pub fn hypothesis_samples(analyses: &[PairAnalysis]) -> Result<(SamplePair, SamplePair)> {
    if analyses.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "hypothesis tests need >= 3 pairs, got {}",
            analyses.len()
        )));
    }
    let avg = |f: fn(&crate::simkit::PairAverages) -> f64| analyses.iter().map(|a| f(&a.averages)).collect::<Vec<_>>();
    Ok((
        SamplePair::new(avg(|p| p.own_false), avg(|p| p.cross_false_to_true), FALSE_SIDE_HYPOTHESIS)?,
        SamplePair::new(avg(|p| p.own_true), avg(|p| p.cross_true_to_false), TRUE_SIDE_HYPOTHESIS)?,
    ))
}

pub fn run_test(run: &RunDir, opts: &PipelineOptions, overwrite: bool) -> Result<TestOutcome> {
    opts.validate()?;
    let pairs_path = run.require(ANALYZE, PAIRS_FILE)?;
    let summary = load_summary(run)?;
    let analyses: Vec<PairAnalysis> = read_jsonl(&pairs_path)?;
    let (false_pair, true_pair) = hypothesis_samples(&analyses)?;
    let outcome = TestOutcome {
        model_name: summary.model_name,
        options: opts.clone(),
        false_side: hypothesis_pipeline(&false_pair, opts)?,
        true_side: hypothesis_pipeline(&true_pair, opts)?,
    };
    let dir = run.begin_stage(TEST, overwrite)?;
    let out = dir.join(TESTS_FILE);
    write_json(&out, &outcome)?;
    run.write_manifest(&dir, TEST, serde_json::to_value(opts)?, &[pairs_path], &[out])?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// layers
// ---------------------------------------------------------------------------

pub fn run_layers(run: &RunDir, opts: &ScanOptions, overwrite: bool) -> Result<LayerScan> {
    let pairs_path = run.require(ANALYZE, PAIRS_FILE)?;
    let analyses: Vec<PairAnalysis> = read_jsonl(&pairs_path)?;
    let result = scan(&analyses, opts)?;
    let dir = run.begin_stage(LAYERS, overwrite)?;
    let out = dir.join(LAYERS_FILE);
    write_json(&out, &result)?;
    run.write_manifest(&dir, LAYERS, serde_json::to_value(opts)?, &[pairs_path], &[out])?;
    Ok(result)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

/// Renders reports for `run`, adding model columns from `extra_runs`.
pub fn run_report(run: &RunDir, extra_runs: &[RunDir], opts: &ReportOptions, overwrite: bool) -> Result<ReportManifest> {
    opts.validate()?;
    // Fail on missing inputs before touching the output directory.
    crate::report::check_inputs(run, opts)?;
    for r in extra_runs {
        crate::report::check_inputs(r, opts)?;
    }
    let dir = run.begin_stage(REPORTS, overwrite)?;
    render_report(run, extra_runs, opts, &dir)
}

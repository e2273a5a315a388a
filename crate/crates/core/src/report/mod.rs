//! CSV and SVG renderings of a run: heatmaps, per-pair computation sheets,
//! category histograms, group_dif charts and summary tables.
//!
//! Every number drawn in an SVG is also written to a CSV at full precision.

pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusStats;
use crate::error::{Error, Result};
use crate::layerscan::{Criterion, LayerScan};
use crate::pipeline::{
    self, read_json, read_jsonl, sha256_file, AnalyzeSummary, CategoryHistograms, FileRecord, RunDir, TestOutcome,
    ANALYZE, AUGMENT, HISTOGRAM_FILE, LAYERS, LAYERS_FILE, PAIRS_FILE, PREPARE, STATS_FILE, SUMMARY_FILE, TEST,
    TESTS_FILE,
};
use crate::simkit::{PairAnalysis, SimilarityMatrix};
use crate::stats::TestReport;
pub use svg::Rgb;

pub const REPORT_MANIFEST: &str = "report_manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Heatmaps,
    PairSheets,
    Histogram,
    GroupDifCharts,
    Tables,
}

impl Output {
    pub const ALL: [Output; 5] = [
        Output::Heatmaps,
        Output::PairSheets,
        Output::Histogram,
        Output::GroupDifCharts,
        Output::Tables,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportOptions {
    pub outputs: Vec<Output>,
    pub ramp_low: [u8; 3],
    pub ramp_high: [u8; 3],
    /// Pairs (in analysis order) that get heatmaps and sheets; 0 means all.
    pub max_pairs: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            outputs: Output::ALL.to_vec(),
            ramp_low: [255, 255, 255],
            ramp_high: [33, 102, 172],
            max_pairs: 10,
        }
    }
}

impl ReportOptions {
    pub fn validate(&self) -> Result<()> {
        if self.outputs.is_empty() {
            return Err(Error::Validation("report needs at least one output".into()));
        }
        Ok(())
    }

    fn wants(&self, o: Output) -> bool {
        self.outputs.contains(&o)
    }

    fn ramp(&self) -> (Rgb, Rgb) {
        let [a, b, c] = self.ramp_low;
        let [x, y, z] = self.ramp_high;
        (Rgb(a, b, c), Rgb(x, y, z))
    }
}

// ---------------------------------------------------------------------------
// CSV renderers
// ---------------------------------------------------------------------------

/// Shortest representation that parses back to the same f64.
pub fn num(v: f64) -> String {
    format!("{v}")
}

fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Format(format!("csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn strings<const N: usize>(s: [&str; N]) -> Vec<String> {
    s.iter().map(|x| x.to_string()).collect()
}

fn layer_header(first: &str, num_layers: usize, last: Option<&str>) -> Vec<String> {
    let mut h = vec![first.to_owned()];
    h.extend((1..=num_layers).map(|l| format!("layer_{l}")));
    h.extend(last.map(str::to_owned));
    h
}

/// `label,layer_1..layer_L`, one row per answer in matrix order.
pub fn heatmap_csv(m: &SimilarityMatrix) -> Result<String> {
    let rows: Vec<Vec<String>> = m
        .rows
        .iter()
        .zip(&m.values)
        .map(|(r, v)| std::iter::once(u8::from(r.label).to_string()).chain(v.iter().map(|&x| num(x))).collect())
        .collect();
    csv_string(&layer_header("label", m.num_layers(), None), &rows)
}

/// Per-answer rows, the two per-layer group means and, in the trailing
/// column, their layer averages.
pub fn pair_sheet_csv(m: &SimilarityMatrix) -> Result<String> {
    let l = m.num_layers();
    let mut rows: Vec<Vec<String>> = m
        .rows
        .iter()
        .zip(&m.values)
        .map(|(r, v)| {
            std::iter::once(u8::from(r.label).to_string())
                .chain(v.iter().map(|&x| num(x)))
                .chain(std::iter::once(String::new()))
                .collect()
        })
        .collect();
    for label in [false, true] {
        let means = m.group_layer_means(label);
        let avg = means.iter().sum::<f64>() / means.len() as f64;
        rows.push(
            std::iter::once(format!("mean_{}", u8::from(label)))
                .chain(means.iter().map(|&x| num(x)))
                .chain(std::iter::once(num(avg)))
                .collect(),
        );
    }
    csv_string(&layer_header("label", l, Some("average")), &rows)
}

pub fn histogram_csv(h: &CategoryHistograms) -> Result<String> {
    let mut rows = Vec::new();
    for (name, hist) in [("own_true", &h.own_true), ("cross", &h.cross), ("own_false", &h.own_false)] {
        for (i, c) in hist.counts.iter().enumerate() {
            rows.push(vec![name.to_owned(), num(hist.edges[i]), num(hist.edges[i + 1]), c.to_string()]);
        }
    }
    csv_string(&strings(["category", "bin_low", "bin_high", "count"]), &rows)
}

pub fn group_dif_maxima_csv(scan: &LayerScan) -> Result<String> {
    let rows: Vec<Vec<String>> = scan
        .group_dif_maxima
        .iter()
        .map(|r| vec![r.pair_id.clone(), u8::from(r.source_label).to_string(), r.layer.to_string(), num(r.value)])
        .collect();
    csv_string(&strings(["pair_id", "source_label", "layer", "value"]), &rows)
}

pub fn occurrence_csv(scan: &LayerScan) -> Result<String> {
    let mut rows = Vec::new();
    for o in &scan.occurrence {
        let side = u8::from(o.source_label).to_string();
        for (layer, count) in &o.occurrence.counts {
            rows.push(vec![side.clone(), layer.to_string(), count.to_string()]);
        }
        rows.push(vec![side, "other".into(), o.occurrence.other.to_string()]);
    }
    csv_string(&strings(["source_label", "layer", "count"]), &rows)
}

/// Outputs of one run needed for the summary tables.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelResults {
    pub summary: AnalyzeSummary,
    pub tests: TestOutcome,
    pub layers: LayerScan,
}

impl ModelResults {
    pub fn load(run: &RunDir) -> Result<Self> {
        Ok(ModelResults {
            summary: read_json(&run.require(ANALYZE, SUMMARY_FILE)?)?,
            tests: read_json(&run.require(TEST, TESTS_FILE)?)?,
            layers: read_json(&run.require(LAYERS, LAYERS_FILE)?)?,
        })
    }

    pub fn model_name(&self) -> &str {
        &self.summary.model_name
    }
}

/// Average length and intra-group ROUGE-1 of one corpus.
pub fn corpus_table_csv(stats: &CorpusStats) -> Result<String> {
    let row = vec![
        num(stats.avg_text_len),
        num(stats.true_group.avg_answer_len),
        num(stats.true_group.intra_group_rouge1),
        num(stats.false_group.avg_answer_len),
        num(stats.false_group.intra_group_rouge1),
    ];
    csv_string(
        &strings(["avg_text_len", "true_avg_len", "true_rouge1", "false_avg_len", "false_rouge1"]),
        &[row],
    )
}

/// Category rows, one column per model.
pub fn category_means_csv(models: &[ModelResults]) -> Result<String> {
    let mut header = vec!["category".to_owned()];
    header.extend(models.iter().map(|m| m.model_name().to_owned()));
    let row = |name: &str, f: fn(&ModelResults) -> f64| {
        std::iter::once(name.to_owned())
            .chain(models.iter().map(|m| num(f(m))))
            .collect::<Vec<_>>()
    };
    let rows = vec![
        row("own_true", |m| m.summary.categories.own_true),
        row("cross", |m| m.summary.categories.cross),
        row("own_false", |m| m.summary.categories.own_false),
    ];
    csv_string(&header, &rows)
}

/// One row per (hypothesis, model) with the test actually used and the
/// gate statistics behind that choice.
pub fn hypothesis_tests_csv(models: &[ModelResults]) -> Result<String> {
    let header = strings([
        "hypothesis",
        "model",
        "p_value",
        "chosen_test",
        "t",
        "df",
        "levene_w",
        "levene_p",
        "equal_variances",
        "normality_p_a",
        "normality_p_b",
        "reject_h0_at",
        "reject_h0",
    ]);
    let mut rows = Vec::new();
    for (side, pick) in [
        ("false_side", (|t: &TestOutcome| &t.false_side) as fn(&TestOutcome) -> &TestReport),
        ("true_side", |t: &TestOutcome| &t.true_side),
    ] {
        for m in models {
            let r = pick(&m.tests);
            rows.push(vec![
                side.to_owned(),
                m.model_name().to_owned(),
                num(r.p_two_sided),
                r.chosen_test.name().to_owned(),
                num(r.t),
                num(r.df),
                num(r.levene.statistic),
                num(r.levene.p),
                r.levene.equal_variances.to_string(),
                num(r.normality_a.p),
                num(r.normality_b.p),
                num(r.reject_h0_at),
                r.reject_h0.to_string(),
            ]);
        }
    }
    csv_string(&header, &rows)
}

/// group_dif mode/freq per model, false side then true side.
pub fn group_dif_modes_csv(models: &[ModelResults]) -> Result<String> {
    let mut rows = Vec::new();
    for m in models {
        let mut row = vec![m.model_name().to_owned()];
        for source in [false, true] {
            let r = m
                .layers
                .find(Criterion::GroupDif, source, !source)
                .ok_or_else(|| Error::Format("layer scan without group_dif".into()))?;
            row.push(r.mode.to_string());
            row.push(r.freq.to_string());
        }
        rows.push(row);
    }
    csv_string(&strings(["model", "false_mode", "false_freq", "true_mode", "true_freq"]), &rows)
}

/// Sequence-level criteria per model and (source, target) group.
pub fn sequence_criteria_csv(models: &[ModelResults]) -> Result<String> {
    let mut rows = Vec::new();
    for m in models {
        for source in [false, true] {
            for target in [!source, source] {
                let mut row = vec![
                    m.model_name().to_owned(),
                    u8::from(source).to_string(),
                    u8::from(target).to_string(),
                ];
                for c in [Criterion::MinAbs, Criterion::PosDif, Criterion::NegDif] {
                    match m.layers.find(c, source, target) {
                        Some(r) => {
                            row.push(r.mode.to_string());
                            row.push(r.freq.to_string());
                        }
                        None => row.extend([String::new(), String::new()]),
                    }
                }
                rows.push(row);
            }
        }
    }
    csv_string(
        &strings([
            "model",
            "source_label",
            "target_label",
            "min_abs_mode",
            "min_abs_freq",
            "pos_dif_mode",
            "pos_dif_freq",
            "neg_dif_mode",
            "neg_dif_freq",
        ]),
        &rows,
    )
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub tool_version: String,
    pub options: ReportOptions,
    pub inputs: Vec<FileRecord>,
    pub artifacts: Vec<FileRecord>,
    /// Heatmaps drawn with a uniform fill because all values were equal.
    pub degenerate_heatmaps: Vec<String>,
}

fn required_files(opts: &ReportOptions) -> Vec<(&'static str, &'static str)> {
    let mut req = Vec::new();
    if opts.wants(Output::Heatmaps) || opts.wants(Output::PairSheets) {
        req.push((ANALYZE, PAIRS_FILE));
    }
    if opts.wants(Output::Histogram) {
        req.push((ANALYZE, HISTOGRAM_FILE));
    }
    if opts.wants(Output::GroupDifCharts) {
        req.push((LAYERS, LAYERS_FILE));
    }
    if opts.wants(Output::Tables) {
        req.extend([(ANALYZE, SUMMARY_FILE), (TEST, TESTS_FILE), (LAYERS, LAYERS_FILE)]);
    }
    req.sort();
    req.dedup();
    req
}

/// Fails with the first missing upstream output.
pub fn check_inputs(run: &RunDir, opts: &ReportOptions) -> Result<()> {
    for (stage, file) in required_files(opts) {
        run.require(stage, file)?;
    }
    Ok(())
}

/// A file name that cannot escape the output directory.
fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

struct Artifacts<'a> {
    run: &'a RunDir,
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Artifacts<'_> {
    fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn records(&self) -> Result<Vec<FileRecord>> {
        self.written
            .iter()
            .map(|p| {
                Ok(FileRecord {
                    path: self.run.display_path(p),
                    sha256: sha256_file(p)?,
                })
            })
            .collect()
    }
}

/// Writes all requested artifacts into `out_dir` plus `report_manifest.json`.
/// Tables get one model column per run (`run` first, then `extra_runs`).
pub fn render_report(run: &RunDir, extra_runs: &[RunDir], opts: &ReportOptions, out_dir: &Path) -> Result<ReportManifest> {
    opts.validate()?;
    check_inputs(run, opts)?;
    let (low, high) = opts.ramp();
    let mut art = Artifacts {
        run,
        dir: out_dir,
        written: Vec::new(),
    };
    let mut degenerate = Vec::new();
    let mut inputs: Vec<PathBuf> = required_files(opts)
        .into_iter()
        .map(|(s, f)| run.stage_dir(s).join(f))
        .collect();

    if opts.wants(Output::Heatmaps) || opts.wants(Output::PairSheets) {
        let analyses: Vec<PairAnalysis> = read_jsonl(&run.require(ANALYZE, PAIRS_FILE)?)?;
        let take = if opts.max_pairs == 0 { analyses.len() } else { opts.max_pairs };
        for a in analyses.iter().take(take) {
            let id = safe_name(&a.to_true.pair_id);
            for m in [&a.to_false, &a.to_true] {
                let stem = format!("{id}_to_{}", if m.target_label { "true" } else { "false" });
                if opts.wants(Output::Heatmaps) {
                    let (doc, flat) = svg::heatmap(m, low, high);
                    art.write(&format!("heatmaps/{stem}.svg"), &doc)?;
                    art.write(&format!("heatmaps/{stem}.csv"), &heatmap_csv(m)?)?;
                    if flat {
                        degenerate.push(stem.clone());
                    }
                }
                if opts.wants(Output::PairSheets) {
                    art.write(&format!("sheets/{stem}.csv"), &pair_sheet_csv(m)?)?;
                }
            }
        }
    }

    if opts.wants(Output::Histogram) {
        let h: CategoryHistograms = read_json(&run.require(ANALYZE, HISTOGRAM_FILE)?)?;
        art.write("histogram.csv", &histogram_csv(&h)?)?;
        let bars = |hist: &crate::simkit::Histogram| -> Vec<(String, f64)> {
            hist.counts
                .iter()
                .enumerate()
                .map(|(i, &c)| (format!("[{}, {}]: {c}", num(hist.edges[i]), num(hist.edges[i + 1])), c as f64))
                .collect()
        };
        let (a, b, c) = (bars(&h.own_true), bars(&h.cross), bars(&h.own_false));
        let doc = svg::bar_chart(
            "distribution of per-pair average cosine similarity",
            &[
                svg::Panel { title: "own group, true answers".into(), bars: &a },
                svg::Panel { title: "other group (both directions)".into(), bars: &b },
                svg::Panel { title: "own group, false answers".into(), bars: &c },
            ],
            high,
        );
        art.write("histogram.svg", &doc)?;
    }

    if opts.wants(Output::GroupDifCharts) {
        let scan: LayerScan = read_json(&run.require(LAYERS, LAYERS_FILE)?)?;
        art.write("group_dif/maxima.csv", &group_dif_maxima_csv(&scan)?)?;
        art.write("group_dif/occurrence.csv", &occurrence_csv(&scan)?)?;
        let side_bars = |source: bool| -> Vec<(String, f64)> {
            scan.group_dif_maxima
                .iter()
                .filter(|r| r.source_label == source)
                .map(|r| (format!("{} layer {}: {}", r.pair_id, r.layer, num(r.value)), r.value))
                .collect()
        };
        let (f, t) = (side_bars(false), side_bars(true));
        art.write(
            "group_dif/maxima.svg",
            &svg::bar_chart(
                "maximum group_dif per pair",
                &[
                    svg::Panel { title: "false answers".into(), bars: &f },
                    svg::Panel { title: "true answers".into(), bars: &t },
                ],
                high,
            ),
        )?;
        let occ: Vec<Vec<(String, f64)>> = scan
            .occurrence
            .iter()
            .map(|o| {
                o.occurrence
                    .counts
                    .iter()
                    .map(|(l, c)| (format!("layer {l}: {c}"), *c as f64))
                    .collect()
            })
            .collect();
        let panels: Vec<svg::Panel<'_>> = scan
            .occurrence
            .iter()
            .zip(&occ)
            .map(|(o, bars)| svg::Panel {
                title: format!(
                    "{} answers, layers {}..{} (other: {})",
                    if o.source_label { "true" } else { "false" },
                    o.occurrence.first,
                    o.occurrence.last,
                    o.occurrence.other
                ),
                bars,
            })
            .collect();
        art.write(
            "group_dif/occurrence.svg",
            &svg::bar_chart("layers where group_dif peaks", &panels, high),
        )?;
    }

    if opts.wants(Output::Tables) {
        let mut models = vec![ModelResults::load(run)?];
        for extra in extra_runs {
            check_inputs(extra, opts)?;
            models.push(ModelResults::load(extra)?);
            inputs.extend(
                required_files(opts)
                    .into_iter()
                    .map(|(s, f)| extra.stage_dir(s).join(f)),
            );
        }
        for (stage, name) in [(PREPARE, "corpus_prepared"), (AUGMENT, "corpus_augmented")] {
            let path = run.stage_dir(stage).join(STATS_FILE);
            if path.is_file() {
                let stats: CorpusStats = read_json(&path)?;
                art.write(&format!("tables/{name}.csv"), &corpus_table_csv(&stats)?)?;
                inputs.push(path);
            }
        }
        art.write("tables/category_means.csv", &category_means_csv(&models)?)?;
        art.write("tables/hypothesis_tests.csv", &hypothesis_tests_csv(&models)?)?;
        art.write("tables/group_dif_modes.csv", &group_dif_modes_csv(&models)?)?;
        art.write("tables/sequence_criteria.csv", &sequence_criteria_csv(&models)?)?;
    }

    let manifest = ReportManifest {
        tool_version: pipeline::TOOL_VERSION.to_owned(),
        options: opts.clone(),
        inputs: inputs
            .iter()
            .map(|p| {
                Ok(FileRecord {
                    path: run.display_path(p),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<_>>()?,
        artifacts: art.records()?,
        degenerate_heatmaps: degenerate,
    };
    pipeline::write_json(&out_dir.join(REPORT_MANIFEST), &manifest)?;
    Ok(manifest)
}

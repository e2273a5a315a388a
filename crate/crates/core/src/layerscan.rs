//! Weak-layer criteria.
//!
//! Per sequence, over its similarity-to-a-group series across layers:
//! `min_abs` (layer of the lowest similarity), `pos_dif` / `neg_dif` (layer
//! ending the largest rise / fall from the previous layer). Per pair and
//! side, `group_dif` is the layer where similarity to the other group most
//! exceeds similarity to the own group. Layer indices are 1-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simkit::{PairAnalysis, SimilarityMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    MinAbs,
    PosDif,
    NegDif,
    GroupDif,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::MinAbs => "min_abs",
            Criterion::PosDif => "pos_dif",
            Criterion::NegDif => "neg_dif",
            Criterion::GroupDif => "group_dif",
        }
    }

    pub fn min_index(self) -> usize {
        match self {
            Criterion::PosDif | Criterion::NegDif => 2,
            _ => 1,
        }
    }
}

/// One sequence's similarity to a group across layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSeries {
    pub pair_id: String,
    pub answer_index: usize,
    #[serde(with = "crate::label01")]
    pub source_label: bool,
    #[serde(with = "crate::label01")]
    pub target_label: bool,
    pub values: Vec<f64>,
}

/// 1-based position of the extreme value; the strict `better` comparison
/// keeps the smallest index on ties.
fn arg_extreme(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if better(v, values[best]) {
            best = i;
        }
    }
    best + 1
}

pub fn min_abs(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::Domain("min_abs of an empty series".into()));
    }
    Ok(arg_extreme(values, |v, b| v < b))
}

/// `(pos_dif, neg_dif)`; each index names the later layer of its step.
pub fn layer_diffs(values: &[f64]) -> Result<(usize, usize)> {
    if values.len() < 2 {
        return Err(Error::Domain("layer differences need >= 2 layers".into()));
    }
    let d: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    Ok((arg_extreme(&d, |v, b| v > b) + 1, arg_extreme(&d, |v, b| v < b) + 1))
}

/// `g[l] = mean(source rows -> other group) - mean(source rows -> own group)`
/// per layer, or its absolute value.
pub fn group_dif_series(
    to_false: &SimilarityMatrix,
    to_true: &SimilarityMatrix,
    source_label: bool,
    absolute: bool,
) -> Result<Vec<f64>> {
    if to_false.target_label || !to_true.target_label || to_false.rows != to_true.rows {
        return Err(Error::Validation(format!(
            "group_dif needs consistent (to_false, to_true) matrices for pair {}",
            to_true.pair_id
        )));
    }
    if !to_true.rows.iter().any(|r| r.label == source_label) {
        return Err(Error::Domain(format!(
            "pair {} has no rows with label {}",
            to_true.pair_id,
            u8::from(source_label)
        )));
    }
    let (own, other) = if source_label { (to_true, to_false) } else { (to_false, to_true) };
    let own = own.group_layer_means(source_label);
    let other = other.group_layer_means(source_label);
    Ok(other
        .iter()
        .zip(&own)
        .map(|(o, w)| if absolute { (o - w).abs() } else { o - w })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDif {
    pub layer: usize,
    pub value: f64,
}

pub fn group_dif(
    to_false: &SimilarityMatrix,
    to_true: &SimilarityMatrix,
    source_label: bool,
    absolute: bool,
) -> Result<GroupDif> {
    let g = group_dif_series(to_false, to_true, source_label, absolute)?;
    if g.is_empty() {
        return Err(Error::Domain("group_dif over zero layers".into()));
    }
    let layer = arg_extreme(&g, |v, b| v > b);
    Ok(GroupDif {
        layer,
        value: g[layer - 1],
    })
}

/// Most frequent index (smallest on ties) and its count.
pub fn mode_freq(indices: &[usize]) -> Result<(usize, usize)> {
    let max = *indices
        .iter()
        .max()
        .ok_or_else(|| Error::Domain("mode of an empty index list".into()))?;
    let mut counts = vec![0usize; max + 1];
    for &i in indices {
        counts[i] += 1;
    }
    let mut best = (0, 0);
    for (i, &c) in counts.iter().enumerate() {
        if c > best.1 {
            best = (i, c);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Occurrence {
    pub first: usize,
    pub last: usize,
    /// `(layer, count)` for every layer in `first..=last`.
    pub counts: Vec<(usize, usize)>,
    pub other: usize,
}

pub fn layer_occurrence(indices: &[usize], first: usize, last: usize) -> Result<Occurrence> {
    if first == 0 || first > last {
        return Err(Error::Validation(format!("invalid layer range {first}..={last}")));
    }
    let mut counts: Vec<(usize, usize)> = (first..=last).map(|l| (l, 0)).collect();
    let mut other = 0;
    for &i in indices {
        if (first..=last).contains(&i) {
            counts[i - first].1 += 1;
        } else {
            other += 1;
        }
    }
    Ok(Occurrence {
        first,
        last,
        counts,
        other,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCriterionResult {
    pub criterion: Criterion,
    #[serde(with = "crate::label01")]
    pub source_label: bool,
    /// For group_dif this is the "other" group.
    #[serde(with = "crate::label01")]
    pub target_label: bool,
    pub indices: Vec<usize>,
    pub mode: usize,
    pub freq: usize,
}

impl LayerCriterionResult {
    fn new(criterion: Criterion, source_label: bool, target_label: bool, indices: Vec<usize>) -> Result<Self> {
        let (mode, freq) = mode_freq(&indices)?;
        Ok(LayerCriterionResult {
            criterion,
            source_label,
            target_label,
            indices,
            mode,
            freq,
        })
    }

    /// Opposite-group series are the headline; own-group ones are extra.
    pub fn is_headline(&self) -> bool {
        self.source_label != self.target_label
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDifRow {
    pub pair_id: String,
    #[serde(with = "crate::label01")]
    pub source_label: bool,
    pub layer: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceRow {
    #[serde(with = "crate::label01")]
    pub source_label: bool,
    pub occurrence: Occurrence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanOptions {
    pub group_dif_abs: bool,
    pub occurrence_first: usize,
    pub occurrence_last: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            group_dif_abs: false,
            occurrence_first: 9,
            occurrence_last: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerScan {
    pub num_layers: usize,
    pub n_pairs: usize,
    pub options: ScanOptions,
    /// min_abs / pos_dif / neg_dif for each (source, target) combination,
    /// false sources first, opposite-group target first.
    pub sequence: Vec<LayerCriterionResult>,
    /// group_dif for false then true sources.
    pub group: Vec<LayerCriterionResult>,
    /// Per-pair group_dif maxima, false side then true side, in pair order.
    pub group_dif_maxima: Vec<GroupDifRow>,
    pub occurrence: Vec<OccurrenceRow>,
}

impl LayerScan {
    pub fn find(&self, criterion: Criterion, source_label: bool, target_label: bool) -> Option<&LayerCriterionResult> {
        self.sequence
            .iter()
            .chain(&self.group)
            .find(|r| r.criterion == criterion && r.source_label == source_label && r.target_label == target_label)
    }
}

/// Series of every `source_label` row of each pair against `target_label`.
pub fn sequence_series(analyses: &[PairAnalysis], source_label: bool, target_label: bool) -> Vec<LayerSeries> {
    analyses
        .iter()
        .flat_map(|a| {
            let m = if target_label { &a.to_true } else { &a.to_false };
            m.rows_of(source_label).map(move |(row, values)| LayerSeries {
                pair_id: m.pair_id.clone(),
                answer_index: row.answer_index,
                source_label,
                target_label,
                values: values.clone(),
            })
        })
        .collect()
}

fn check_indices(r: &LayerCriterionResult, num_layers: usize) -> Result<()> {
    let lo = r.criterion.min_index();
    if let Some(bad) = r.indices.iter().find(|&&i| i < lo || i > num_layers) {
        return Err(Error::Domain(format!(
            "{} index {bad} outside {lo}..={num_layers}",
            r.criterion.name()
        )));
    }
    Ok(())
}

pub fn scan(analyses: &[PairAnalysis], opts: &ScanOptions) -> Result<LayerScan> {
    let num_layers = analyses
        .first()
        .map(|a| a.to_true.num_layers())
        .ok_or_else(|| Error::InsufficientData("layer scan over zero pairs".into()))?;
    if analyses
        .iter()
        .any(|a| a.to_true.num_layers() != num_layers || a.to_false.num_layers() != num_layers)
    {
        return Err(Error::Validation("pairs disagree on the number of layers".into()));
    }
    if opts.occurrence_first == 0 || opts.occurrence_first > opts.occurrence_last {
        return Err(Error::Validation(format!(
            "invalid occurrence range {}..={}",
            opts.occurrence_first, opts.occurrence_last
        )));
    }
    // Models with fewer layers than the default band get it clipped to 1..=L.
    let mut opts = opts.clone();
    opts.occurrence_last = opts.occurrence_last.min(num_layers);
    if opts.occurrence_first > opts.occurrence_last {
        opts.occurrence_first = 1;
    }

    let mut sequence = Vec::new();
    for source in [false, true] {
        for target in [!source, source] {
            let series = sequence_series(analyses, source, target);
            let mut mins = Vec::with_capacity(series.len());
            let mut pos = Vec::with_capacity(series.len());
            let mut neg = Vec::with_capacity(series.len());
            for s in &series {
                mins.push(min_abs(&s.values)?);
                if num_layers >= 2 {
                    let (p, n) = layer_diffs(&s.values)?;
                    pos.push(p);
                    neg.push(n);
                }
            }
            sequence.push(LayerCriterionResult::new(Criterion::MinAbs, source, target, mins)?);
            if num_layers >= 2 {
                sequence.push(LayerCriterionResult::new(Criterion::PosDif, source, target, pos)?);
                sequence.push(LayerCriterionResult::new(Criterion::NegDif, source, target, neg)?);
            }
        }
    }

    let mut group = Vec::new();
    let mut group_dif_maxima = Vec::new();
    let mut occurrence = Vec::new();
    for source in [false, true] {
        let mut indices = Vec::with_capacity(analyses.len());
        for a in analyses {
            let g = group_dif(&a.to_false, &a.to_true, source, opts.group_dif_abs)?;
            indices.push(g.layer);
            group_dif_maxima.push(GroupDifRow {
                pair_id: a.to_true.pair_id.clone(),
                source_label: source,
                layer: g.layer,
                value: g.value,
            });
        }
        occurrence.push(OccurrenceRow {
            source_label: source,
            occurrence: layer_occurrence(&indices, opts.occurrence_first, opts.occurrence_last)?,
        });
        group.push(LayerCriterionResult::new(Criterion::GroupDif, source, !source, indices)?);
    }

    for r in sequence.iter().chain(&group) {
        check_indices(r, num_layers)?;
    }
    Ok(LayerScan {
        num_layers,
        n_pairs: analyses.len(),
        options: opts,
        sequence,
        group,
        group_dif_maxima,
        occurrence,
    })
}

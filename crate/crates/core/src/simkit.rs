//! Cosine-similarity structure of answer groups.
//!
//! For one question, every answer's last-token state at layer `l` is compared
//! with every member of a target group (the true answers or the false
//! answers). Averaging over the group gives one cell of a
//! [`SimilarityMatrix`] (rows = answers, columns = layers). Averaging rows of
//! one label and then all layers gives the four [`PairAverages`]; averaging
//! those over pairs gives the corpus-level [`CategoryAverages`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{SequenceStates, StateSource};
use crate::error::{Error, Result};

/// `u.v / (|u| |v|)` in f64, clamped to `[-1, 1]`.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Domain(format!(
            "cosine of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let (mut dot, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::Domain("cosine with a zero-norm vector".into()));
    }
    Ok((dot / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

/// Mean cosine between `seq` and the members of `group` at 0-based `layer`.
///
/// With `exclude_self`, a member that is the same object as `seq` is skipped.
pub fn seq_to_group(seq: &SequenceStates, group: &[&SequenceStates], layer: usize, exclude_self: bool) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for member in group {
        if exclude_self && std::ptr::eq(seq, *member) {
            continue;
        }
        sum += cosine(seq.layer(layer), member.layer(layer))?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Domain("similarity to an empty group".into()));
    }
    Ok(sum / n as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnswerStates {
    pub answer_index: usize,
    pub label: bool,
    pub states: SequenceStates,
}

/// All answers of one question with their hidden states.
#[derive(Clone, Debug, PartialEq)]
pub struct PairStates {
    pub pair_id: String,
    pub answers: Vec<AnswerStates>,
}

impl PairStates {
    pub fn num_layers(&self) -> usize {
        self.answers.first().map_or(0, |a| a.states.num_layers())
    }

    /// Loads the entries `indices` (manifest positions) of one pair.
    pub fn load(source: &dyn StateSource, pair_id: &str, indices: &[usize]) -> Result<Self> {
        let entries = &source.manifest().entries;
        let answers = indices
            .iter()
            .map(|&i| {
                Ok(AnswerStates {
                    answer_index: entries[i].answer_index,
                    label: entries[i].label,
                    states: source.states(i)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PairStates {
            pair_id: pair_id.to_owned(),
            answers,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub answer_index: usize,
    #[serde(with = "crate::label01")]
    pub label: bool,
}

/// Rows = answers (false answers first, then true, each in answer order),
/// columns = layers 1..=L, value = mean cosine to the `target_label` group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub pair_id: String,
    #[serde(with = "crate::label01")]
    pub target_label: bool,
    pub exclude_self: bool,
    pub rows: Vec<MatrixRow>,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn num_layers(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Per-layer mean over the rows carrying `source_label`.
    pub fn group_layer_means(&self, source_label: bool) -> Vec<f64> {
        let rows: Vec<&Vec<f64>> = self
            .rows
            .iter()
            .zip(&self.values)
            .filter(|(r, _)| r.label == source_label)
            .map(|(_, v)| v)
            .collect();
        (0..self.num_layers())
            .map(|l| rows.iter().map(|r| r[l]).sum::<f64>() / rows.len() as f64)
            .collect()
    }

    /// Rows of one label, in matrix order.
    pub fn rows_of(&self, label: bool) -> impl Iterator<Item = (&MatrixRow, &Vec<f64>)> {
        self.rows
            .iter()
            .zip(&self.values)
            .filter(move |(r, _)| r.label == label)
    }
}

fn row_order(pair: &PairStates) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pair.answers.len()).filter(|&i| !pair.answers[i].label).collect();
    order.extend((0..pair.answers.len()).filter(|&i| pair.answers[i].label));
    order
}

fn check_pair(pair: &PairStates) -> Result<()> {
    let l = pair.num_layers();
    for label in [false, true] {
        if !pair.answers.iter().any(|a| a.label == label) {
            return Err(Error::Domain(format!(
                "pair {} has no answers with label {}",
                pair.pair_id,
                u8::from(label)
            )));
        }
    }
    if pair.answers.iter().any(|a| a.states.num_layers() != l) {
        return Err(Error::Domain(format!("pair {}: inconsistent layer counts", pair.pair_id)));
    }
    Ok(())
}

/// Cosine table per layer: `table[l][i][j]` for answers `i`, `j` in pair order.
fn cosine_tables(pair: &PairStates) -> Result<Vec<Vec<Vec<f64>>>> {
    let n = pair.answers.len();
    (0..pair.num_layers())
        .map(|l| {
            let mut t = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i..n {
                    let c = cosine(pair.answers[i].states.layer(l), pair.answers[j].states.layer(l))?;
                    t[i][j] = c;
                    t[j][i] = c;
                }
            }
            Ok(t)
        })
        .collect()
}

fn matrix_from_tables(
    pair: &PairStates,
    tables: &[Vec<Vec<f64>>],
    target_label: bool,
    exclude_self: bool,
) -> Result<SimilarityMatrix> {
    let members: Vec<usize> = (0..pair.answers.len())
        .filter(|&i| pair.answers[i].label == target_label)
        .collect();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for r in row_order(pair) {
        let skip_self = exclude_self && pair.answers[r].label == target_label;
        let mut row = Vec::with_capacity(tables.len());
        for table in tables {
            let mut sum = 0.0;
            let mut n = 0usize;
            for &m in &members {
                if skip_self && m == r {
                    continue;
                }
                sum += table[r][m];
                n += 1;
            }
            if n == 0 {
                return Err(Error::Domain(format!(
                    "pair {}: answer {} has no other member in group {}",
                    pair.pair_id,
                    pair.answers[r].answer_index,
                    u8::from(target_label)
                )));
            }
            row.push(sum / n as f64);
        }
        rows.push(MatrixRow {
            answer_index: pair.answers[r].answer_index,
            label: pair.answers[r].label,
        });
        values.push(row);
    }
    Ok(SimilarityMatrix {
        pair_id: pair.pair_id.clone(),
        target_label,
        exclude_self,
        rows,
        values,
    })
}

/// Similarity of every answer of a pair to the `target_label` group, layer
/// by layer. Self-comparison is skipped only for rows of the target label.
pub fn layer_matrix(pair: &PairStates, target_label: bool, exclude_self: bool) -> Result<SimilarityMatrix> {
    check_pair(pair)?;
    let tables = cosine_tables(pair)?;
    matrix_from_tables(pair, &tables, target_label, exclude_self)
}

/// Both matrices of a pair, `(to_false, to_true)`, sharing one cosine table.
pub fn pair_matrices(pair: &PairStates, exclude_self: bool) -> Result<(SimilarityMatrix, SimilarityMatrix)> {
    check_pair(pair)?;
    let tables = cosine_tables(pair)?;
    Ok((
        matrix_from_tables(pair, &tables, false, exclude_self)?,
        matrix_from_tables(pair, &tables, true, exclude_self)?,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairAverages {
    pub pair_id: String,
    pub own_true: f64,
    pub cross_true_to_false: f64,
    pub cross_false_to_true: f64,
    pub own_false: f64,
}

impl PairAverages {
    pub fn cross(&self) -> f64 {
        (self.cross_true_to_false + self.cross_false_to_true) / 2.0
    }
}

fn layer_average(matrix: &SimilarityMatrix, source_label: bool) -> f64 {
    let means = matrix.group_layer_means(source_label);
    means.iter().sum::<f64>() / means.len() as f64
}

/// Averages rows over answers of one label, then over all layers.
pub fn pair_averages(to_false: &SimilarityMatrix, to_true: &SimilarityMatrix) -> Result<PairAverages> {
    if to_false.target_label || !to_true.target_label {
        return Err(Error::Validation("pair_averages expects (to_false, to_true) matrices".into()));
    }
    if to_false.pair_id != to_true.pair_id
        || to_false.rows != to_true.rows
        || to_false.num_layers() != to_true.num_layers()
        || to_false.num_layers() == 0
    {
        return Err(Error::Validation(format!(
            "inconsistent matrices for pairs {} / {}",
            to_false.pair_id, to_true.pair_id
        )));
    }
    Ok(PairAverages {
        pair_id: to_true.pair_id.clone(),
        own_true: layer_average(to_true, true),
        cross_true_to_false: layer_average(to_false, true),
        cross_false_to_true: layer_average(to_true, false),
        own_false: layer_average(to_false, false),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryAverages {
    pub own_true: f64,
    /// Both cross directions pooled with equal pair weight.
    pub cross: f64,
    pub own_false: f64,
    pub n_pairs: usize,
}

pub fn category_means(pairs: &[PairAverages]) -> Result<CategoryAverages> {
    if pairs.is_empty() {
        return Err(Error::Domain("category means of zero pairs".into()));
    }
    let n = pairs.len() as f64;
    let mean = |f: &dyn Fn(&PairAverages) -> f64| pairs.iter().map(f).sum::<f64>() / n;
    Ok(CategoryAverages {
        own_true: mean(&|p| p.own_true),
        cross: mean(&|p| p.cross()),
        own_false: mean(&|p| p.own_false),
        n_pairs: pairs.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width bins over `[min, max]`; intervals are right-open except the
/// last. A zero-width range collapses to a single bin.
pub fn similarity_histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 || values.is_empty() {
        return Err(Error::Domain("histogram needs >= 1 bin and >= 1 value".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Ok(Histogram {
            edges: vec![min, max],
            counts: vec![values.len()],
        });
    }
    let width = (max - min) / bins as f64;
    let edges = (0..=bins)
        .map(|i| if i == bins { max } else { min + width * i as f64 })
        .collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - min) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Matrices and averages of one pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairAnalysis {
    pub to_false: SimilarityMatrix,
    pub to_true: SimilarityMatrix,
    pub averages: PairAverages,
}

/// Analyzes every pair of a bundle, in manifest order. Pairs run in
/// parallel; results and their order do not depend on the thread count.
pub fn analyze_source(source: &dyn StateSource, exclude_self: bool) -> Result<Vec<PairAnalysis>> {
    let pairs = source.manifest().pairs();
    pairs
        .par_iter()
        .map(|(pair_id, indices)| {
            let states = PairStates::load(source, pair_id, indices)?;
            let (to_false, to_true) = pair_matrices(&states, exclude_self)?;
            let averages = pair_averages(&to_false, &to_true)?;
            Ok(PairAnalysis {
                to_false,
                to_true,
                averages,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn states(rows: &[&[f32]]) -> SequenceStates {
        let d = rows[0].len();
        SequenceStates::new(rows.len(), d, rows.iter().flat_map(|r| r.iter().copied()).collect()).unwrap()
    }

    fn pair_of(vectors: &[(bool, Vec<Vec<f32>>)]) -> PairStates {
        PairStates {
            pair_id: "p".into(),
            answers: vectors
                .iter()
                .enumerate()
                .map(|(i, (label, layers))| AnswerStates {
                    answer_index: i,
                    label: *label,
                    states: states(&layers.iter().map(Vec::as_slice).collect::<Vec<_>>()),
                })
                .collect(),
        }
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[3.0, -4.0], &[3.0, -4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn seq_to_group_examples() {
        let s = states(&[&[1.0, 0.0]]);
        assert_eq!(seq_to_group(&s, &[&s], 0, false).unwrap(), 1.0);
        assert!(seq_to_group(&s, &[&s], 0, true).is_err());

        // cos 0.4 and 0.8 to the two members
        let a = states(&[&[0.4, (1.0f32 - 0.16).sqrt()]]);
        let b = states(&[&[0.8, 0.6]]);
        let got = seq_to_group(&s, &[&a, &b], 0, false).unwrap();
        assert!((got - 0.6).abs() < 1e-7);

        let twin = s.clone();
        assert!((seq_to_group(&s, &[&s, &twin, &twin], 0, true).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_layout_and_identical_vectors() {
        let v = vec![vec![1.0f32, 2.0, 3.0]; 32];
        let p = pair_of(
            &(0..10)
                .map(|i| (i < 5, v.clone()))
                .collect::<Vec<_>>(),
        );
        let (to_false, to_true) = pair_matrices(&p, true).unwrap();
        assert_eq!(to_true.values.len(), 10);
        assert_eq!(to_true.num_layers(), 32);
        assert!(to_false.rows[..5].iter().all(|r| !r.label));
        assert!(to_false.rows[5..].iter().all(|r| r.label));
        assert_eq!(to_false.rows[0].answer_index, 5);
        for m in [&to_false, &to_true] {
            assert!(m.values.iter().flatten().all(|&x| (x - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn single_layer_matches_hand_means() {
        // T0=(1,0) T1=(0,1) F0=(1,1)
        let p = pair_of(&[
            (true, vec![vec![1.0, 0.0]]),
            (true, vec![vec![0.0, 1.0]]),
            (false, vec![vec![1.0, 1.0]]),
        ]);
        let to_true = layer_matrix(&p, true, true).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // rows: F0, T0, T1
        assert!((to_true.values[0][0] - h).abs() < 1e-15);
        assert_eq!(to_true.values[1][0], 0.0);
        assert_eq!(to_true.values[2][0], 0.0);
        let incl = layer_matrix(&p, true, false).unwrap();
        assert!((incl.values[1][0] - 0.5).abs() < 1e-15);
        assert!(layer_matrix(&p, false, true).is_err());
        assert!((layer_matrix(&p, false, false).unwrap().values[1][0] - h).abs() < 1e-15);
    }

    fn matrix(target: bool, rows: &[(bool, Vec<f64>)]) -> SimilarityMatrix {
        SimilarityMatrix {
            pair_id: "p".into(),
            target_label: target,
            exclude_self: true,
            rows: rows
                .iter()
                .enumerate()
                .map(|(i, (l, _))| MatrixRow {
                    answer_index: i,
                    label: *l,
                })
                .collect(),
            values: rows.iter().map(|(_, v)| v.clone()).collect(),
        }
    }

    #[test]
    fn pair_averages_constant_and_two_by_two() {
        let c = 0.37;
        let rows = vec![(false, vec![c; 4]), (true, vec![c; 4])];
        let pa = pair_averages(&matrix(false, &rows), &matrix(true, &rows)).unwrap();
        for v in [pa.own_true, pa.own_false, pa.cross_false_to_true, pa.cross_true_to_false] {
            assert!((v - c).abs() < 1e-15);
        }

        let to_false = matrix(false, &[(false, vec![0.9, 0.7]), (true, vec![0.2, 0.4])]);
        let to_true = matrix(true, &[(false, vec![0.1, 0.5]), (true, vec![0.8, 0.6])]);
        let pa = pair_averages(&to_false, &to_true).unwrap();
        assert!((pa.own_false - 0.8).abs() < 1e-15);
        assert!((pa.cross_true_to_false - 0.3).abs() < 1e-15);
        assert!((pa.cross_false_to_true - 0.3).abs() < 1e-15);
        assert!((pa.own_true - 0.7).abs() < 1e-15);
        assert!(pair_averages(&to_true, &to_false).is_err());
    }

    // Similarity to the true group of 5 false and 5 true sequences over 32
    // layers, as printed (two decimals) for a worked example of the cascade.
    const WORKED_FALSE_ROWS: [[f64; 32]; 5] = [
        [1.00, 0.99, 0.96, 0.95, 0.85, 0.65, 0.58, 0.52, 0.46, 0.42, 0.43, 0.42, 0.44, 0.42, 0.43, 0.47, 0.49, 0.51, 0.52, 0.54, 0.55, 0.57, 0.60, 0.60, 0.63, 0.61, 0.63, 0.64, 0.63, 0.67, 0.69, 0.81],
        [0.99, 0.98, 0.92, 0.91, 0.76, 0.54, 0.55, 0.51, 0.47, 0.37, 0.36, 0.34, 0.34, 0.36, 0.39, 0.47, 0.54, 0.57, 0.59, 0.60, 0.62, 0.64, 0.65, 0.65, 0.68, 0.66, 0.67, 0.68, 0.68, 0.70, 0.71, 0.80],
        [0.99, 0.97, 0.92, 0.90, 0.76, 0.53, 0.49, 0.43, 0.40, 0.30, 0.31, 0.28, 0.27, 0.29, 0.33, 0.40, 0.46, 0.50, 0.53, 0.52, 0.54, 0.57, 0.58, 0.58, 0.60, 0.59, 0.60, 0.62, 0.63, 0.66, 0.68, 0.80],
        [0.99, 0.97, 0.92, 0.91, 0.80, 0.56, 0.57, 0.53, 0.47, 0.33, 0.34, 0.32, 0.32, 0.35, 0.39, 0.45, 0.51, 0.55, 0.56, 0.56, 0.58, 0.60, 0.60, 0.60, 0.63, 0.63, 0.63, 0.65, 0.65, 0.68, 0.70, 0.81],
        [0.99, 0.97, 0.92, 0.90, 0.78, 0.54, 0.57, 0.54, 0.45, 0.35, 0.33, 0.30, 0.28, 0.29, 0.33, 0.38, 0.44, 0.48, 0.48, 0.49, 0.52, 0.55, 0.57, 0.57, 0.60, 0.59, 0.60, 0.61, 0.61, 0.65, 0.68, 0.80],
    ];
    const WORKED_TRUE_ROWS: [[f64; 32]; 5] = [
        [1.00, 0.99, 0.96, 0.95, 0.87, 0.75, 0.79, 0.78, 0.74, 0.71, 0.73, 0.77, 0.82, 0.83, 0.83, 0.84, 0.85, 0.86, 0.87, 0.88, 0.89, 0.90, 0.89, 0.89, 0.89, 0.89, 0.88, 0.88, 0.88, 0.89, 0.89, 0.92],
        [1.00, 0.99, 0.95, 0.95, 0.85, 0.69, 0.73, 0.68, 0.65, 0.62, 0.64, 0.68, 0.72, 0.73, 0.72, 0.73, 0.74, 0.75, 0.76, 0.76, 0.79, 0.79, 0.78, 0.78, 0.78, 0.78, 0.76, 0.77, 0.77, 0.78, 0.79, 0.87],
        [1.00, 0.99, 0.95, 0.95, 0.87, 0.76, 0.79, 0.77, 0.71, 0.67, 0.70, 0.75, 0.79, 0.82, 0.82, 0.84, 0.85, 0.86, 0.87, 0.88, 0.89, 0.89, 0.90, 0.90, 0.90, 0.89, 0.89, 0.89, 0.89, 0.90, 0.90, 0.93],
        [1.00, 0.99, 0.96, 0.96, 0.91, 0.79, 0.83, 0.81, 0.79, 0.76, 0.78, 0.81, 0.84, 0.86, 0.86, 0.87, 0.88, 0.89, 0.89, 0.90, 0.91, 0.91, 0.92, 0.92, 0.92, 0.91, 0.91, 0.91, 0.91, 0.91, 0.92, 0.95],
        [0.99, 0.99, 0.96, 0.96, 0.91, 0.79, 0.83, 0.81, 0.79, 0.76, 0.78, 0.81, 0.84, 0.86, 0.86, 0.87, 0.88, 0.89, 0.89, 0.90, 0.91, 0.91, 0.92, 0.92, 0.92, 0.91, 0.91, 0.91, 0.91, 0.91, 0.92, 0.95],
    ];
    const WORKED_FALSE_MEANS: [f64; 32] = [0.99, 0.98, 0.93, 0.92, 0.79, 0.56, 0.55, 0.51, 0.45, 0.35, 0.36, 0.33, 0.33, 0.34, 0.37, 0.44, 0.49, 0.52, 0.54, 0.54, 0.56, 0.59, 0.60, 0.60, 0.63, 0.62, 0.63, 0.64, 0.64, 0.67, 0.69, 0.81];
    // Printed with one layer column missing after layer 25.
    const WORKED_TRUE_MEANS: [f64; 25] = [1.00, 0.99, 0.96, 0.95, 0.88, 0.76, 0.79, 0.77, 0.73, 0.70, 0.73, 0.76, 0.80, 0.82, 0.82, 0.83, 0.84, 0.85, 0.86, 0.86, 0.88, 0.88, 0.88, 0.88, 0.88];

    #[test]
    fn worked_cascade_example() {
        let mut rows: Vec<(bool, Vec<f64>)> = WORKED_FALSE_ROWS.iter().map(|r| (false, r.to_vec())).collect();
        rows.extend(WORKED_TRUE_ROWS.iter().map(|r| (true, r.to_vec())));
        let to_true = matrix(true, &rows);
        // Rows and means are both printed to two decimals: +-0.005 each.
        let false_means = to_true.group_layer_means(false);
        for (got, want) in false_means.iter().zip(WORKED_FALSE_MEANS) {
            assert!((got - want).abs() <= 0.0101, "{got} vs {want}");
        }
        let true_means = to_true.group_layer_means(true);
        for (got, want) in true_means.iter().zip(WORKED_TRUE_MEANS) {
            assert!((got - want).abs() <= 0.0101, "{got} vs {want}");
        }
        let to_false = matrix(false, &rows);
        let pa = pair_averages(&to_false, &to_true).unwrap();
        assert!((pa.cross_false_to_true - 0.59).abs() < 0.005, "{}", pa.cross_false_to_true);
        assert!((pa.own_true - 0.85).abs() < 0.005, "{}", pa.own_true);
    }

    #[test]
    fn category_means_examples() {
        let pa = |t: f64| PairAverages {
            pair_id: "p".into(),
            own_true: t,
            cross_true_to_false: 0.5,
            cross_false_to_true: 0.7,
            own_false: 0.6,
        };
        let one = category_means(&[pa(0.8)]).unwrap();
        assert_eq!((one.own_true, one.own_false, one.n_pairs), (0.8, 0.6, 1));
        assert!((one.cross - 0.6).abs() < 1e-15);
        let two = category_means(&[pa(0.8), pa(0.9)]).unwrap();
        assert!((two.own_true - 0.85).abs() < 1e-15);
        assert!(category_means(&[]).is_err());
    }

    #[test]
    fn histogram_examples() {
        let h = similarity_histogram(&[0.3; 10], 4).unwrap();
        assert_eq!(h.counts, vec![10]);
        let h = similarity_histogram(&[0.0, 0.25, 0.5, 0.75, 1.0], 2).unwrap();
        assert_eq!(h.counts, vec![2, 3]);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0]);
        assert!(similarity_histogram(&[], 2).is_err());
    }

    fn arb_pair() -> impl Strategy<Value = (PairStates, Vec<f32>)> {
        (2usize..4, 2usize..4, 1usize..4, 2usize..5).prop_flat_map(|(nt, nf, l, d)| {
            let n = nt + nf;
            (
                proptest::collection::vec(proptest::collection::vec(0.1f32..2.0, d), n * l),
                proptest::collection::vec(0.5f32..3.0, 1),
            )
                .prop_map(move |(vecs, scale)| {
                    let answers = (0..n)
                        .map(|i| AnswerStates {
                            answer_index: i,
                            label: i < nt,
                            states: SequenceStates::new(l, d, vecs[i * l..(i + 1) * l].concat()).unwrap(),
                        })
                        .collect();
                    (
                        PairStates {
                            pair_id: "p".into(),
                            answers,
                        },
                        scale,
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn values_bounded_and_scale_free((pair, scale) in arb_pair(), excl in any::<bool>()) {
            let (f, t) = pair_matrices(&pair, excl).unwrap();
            for v in f.values.iter().chain(&t.values).flatten() {
                prop_assert!((-1.0 - 1e-6..=1.0 + 1e-6).contains(v));
            }
            let mut scaled = pair.clone();
            for a in &mut scaled.answers {
                let data: Vec<f32> = a.states.as_slice().iter().map(|x| x * scale[0]).collect();
                a.states = SequenceStates::new(a.states.num_layers(), a.states.hidden_dim(), data).unwrap();
            }
            let (f2, t2) = pair_matrices(&scaled, excl).unwrap();
            for (a, b) in f.values.iter().flatten().zip(f2.values.iter().flatten())
                .chain(t.values.iter().flatten().zip(t2.values.iter().flatten())) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        #[test]
        fn relabeling_swaps_categories((pair, _) in arb_pair()) {
            let (f, t) = pair_matrices(&pair, true).unwrap();
            let pa = pair_averages(&f, &t).unwrap();
            let mut flipped = pair.clone();
            for a in &mut flipped.answers {
                a.label = !a.label;
            }
            let (f2, t2) = pair_matrices(&flipped, true).unwrap();
            let pb = pair_averages(&f2, &t2).unwrap();
            prop_assert!((pa.own_true - pb.own_false).abs() < 1e-12);
            prop_assert!((pa.own_false - pb.own_true).abs() < 1e-12);
            prop_assert!((pa.cross_true_to_false - pb.cross_false_to_true).abs() < 1e-12);
            prop_assert!((pa.cross_false_to_true - pb.cross_true_to_false).abs() < 1e-12);
        }

        #[test]
        fn rotation_leaves_columns_unchanged((pair, _) in arb_pair(), theta in 0.0f64..std::f64::consts::TAU) {
            // Givens rotation of the first two coordinates at every layer.
            let (c, s) = (theta.cos(), theta.sin());
            let mut rotated = pair.clone();
            for a in &mut rotated.answers {
                let (l, d) = (a.states.num_layers(), a.states.hidden_dim());
                let mut data = a.states.as_slice().to_vec();
                for row in data.chunks_mut(d) {
                    let (x, y) = (f64::from(row[0]), f64::from(row[1]));
                    row[0] = (c * x - s * y) as f32;
                    row[1] = (s * x + c * y) as f32;
                }
                a.states = SequenceStates::new(l, d, data).unwrap();
            }
            let (f, _) = pair_matrices(&pair, true).unwrap();
            let (g, _) = pair_matrices(&rotated, true).unwrap();
            for (a, b) in f.values.iter().flatten().zip(g.values.iter().flatten()) {
                prop_assert!((a - b).abs() < 1e-5);
            }
        }
    }
}

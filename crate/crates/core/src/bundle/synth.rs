//! Synthetic bundles with known group structure.
//!
//! For every pair and layer, true answers are drawn from `N(mu_T, I)` and
//! false answers from `N(mu_F, I)` with
//!
//! ```text
//! mu_T = c_l + (delta * sqrt(D) / 2) * u
//! mu_F = c_l - (delta * sqrt(D) / 2) * u
//! ```
//!
//! where `u` is a random unit direction fixed per pair and `c_l` is a shared
//! offset of norm `offset * sqrt(D)` in a random direction per pair and layer.
//! The shared offset gives cosines the high baseline real hidden states
//! show; scaling it down at one layer plants a low-similarity "weak" layer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{build_prompt, Bundle, BundleManifest, PromptHash, SequenceStates};
use crate::corpus::{Answer, Dataset, Example, Origin, QAPair};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub num_pairs: usize,
    pub group_size: usize,
    /// Distance between group means in units of `sqrt(D)`.
    pub separation: f64,
    /// Norm of the shared per-layer mean in units of `sqrt(D)`.
    pub offset: f64,
    /// 1-based layer whose shared mean is scaled by `weak_scale`.
    pub weak_layer: Option<usize>,
    pub weak_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_layers: 32,
            hidden_dim: 64,
            num_pairs: 200,
            group_size: 5,
            separation: 0.0,
            offset: 2.0,
            weak_layer: None,
            weak_scale: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_dim == 0 || self.num_pairs == 0 || self.group_size == 0 {
            return Err(Error::Validation("synthetic counts must be >= 1".into()));
        }
        if !(self.separation >= 0.0) || !(self.offset >= 0.0) || !(self.weak_scale >= 0.0) {
            return Err(Error::Validation(
                "separation, offset and weak_scale must be >= 0".into(),
            ));
        }
        if let Some(k) = self.weak_layer {
            if k == 0 || k > self.num_layers {
                return Err(Error::Validation(format!(
                    "weak layer {k} outside 1..={}",
                    self.num_layers
                )));
            }
        }
        Ok(())
    }

    pub fn model_name(&self) -> String {
        format!(
            "synthetic(L={},D={},delta={},seed={})",
            self.num_layers, self.hidden_dim, self.separation, self.seed
        )
    }
}

const DIGITS: [&str; 10] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];

/// Spells a number digit by digit so synthetic texts stay digit-free.
fn spell(n: usize) -> String {
    n.to_string()
        .bytes()
        .map(|b| DIGITS[(b - b'0') as usize])
        .collect::<Vec<_>>()
        .join("-")
}

/// A dataset whose pairs line up with [`synth_bundle`] entries: example `i`
/// has one question with `group_size` true answers followed by `group_size`
/// false answers, all equal in length and digit-free.
pub fn synth_dataset(config: &SynthConfig) -> Dataset {
    let examples = (0..config.num_pairs)
        .map(|i| {
            let tag = spell(i);
            let mut answers = Vec::with_capacity(2 * config.group_size);
            for (label, kind) in [(true, "alpha"), (false, "omega")] {
                for j in 0..config.group_size {
                    answers.push(Answer::new(
                        format!("candidate answer {kind} for passage {tag} variant {}", spell(j)),
                        label,
                        Origin::Original,
                    ));
                }
            }
            Example {
                idx: i as u64,
                text: format!("Synthetic passage number {tag} with no real content."),
                pairs: vec![QAPair {
                    pair_id: QAPair::make_id(i as u64, 0),
                    question_idx: 0,
                    question: format!("Which candidate answer fits passage {tag}?"),
                    answers,
                }],
            }
        })
        .collect();
    Dataset { examples }
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generates a bundle fully determined by `config.seed`. Each pair draws
/// from its own ChaCha stream.
pub fn synth_bundle(config: &SynthConfig) -> Result<Bundle> {
    config.validate()?;
    let (l, d) = (config.num_layers, config.hidden_dim);
    let sqrt_d = (d as f64).sqrt();
    let half_sep = config.separation * sqrt_d / 2.0;
    let dataset = synth_dataset(config);

    let mut manifest = BundleManifest::new(config.model_name(), l, d);
    let mut states = Vec::with_capacity(config.num_pairs * 2 * config.group_size);
    for (i, (ex, pair)) in dataset.pairs().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let direction = unit_vector(&mut rng, d);
        let centers: Vec<Vec<f64>> = (0..l)
            .map(|layer| {
                let scale = if config.weak_layer == Some(layer + 1) {
                    config.offset * config.weak_scale
                } else {
                    config.offset
                };
                unit_vector(&mut rng, d)
                    .into_iter()
                    .map(|x| x * scale * sqrt_d)
                    .collect()
            })
            .collect();
        for (answer_index, answer) in pair.answers.iter().enumerate() {
            let label = answer.label == Some(true);
            let sign = if label { 1.0 } else { -1.0 };
            let mut data = Vec::with_capacity(l * d);
            for center in &centers {
                for k in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    data.push((center[k] + sign * half_sep * direction[k] + z) as f32);
                }
            }
            let prompt = build_prompt(&ex.text, &pair.question, &answer.text)?;
            manifest.push(&pair.pair_id, answer_index, label, Origin::Original, PromptHash::of(&prompt));
            states.push(SequenceStates::new(l, d, data)?);
        }
    }
    Bundle::from_states(manifest, states)
}

//! Hidden-state bundles.
//!
//! A bundle is a directory with two files:
//!
//! - `manifest.json`: model name, layer count `L`, hidden size `D`, dtype
//!   (always `"f32le"`) and one entry per answer
//!   `{pair_id, answer_index, label, origin, byte_offset, prompt_hash}`.
//! - `states.bin`: for each entry, in manifest order, an `L x D` matrix of
//!   little-endian `f32` values, row-major (layer, then dimension). Row `l`
//!   is the hidden state of the final prompt token at the output of
//!   transformer block `l + 1`; the embedding output is not stored.
//!
//! `byte_offset` of entry `i` is `4 * L * D * i`.

mod prompt;
mod synth;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use prompt::{build_prompt, fnv1a64, ANSWER_PROMPT_TEMPLATE};
pub use synth::{synth_bundle, synth_dataset, SynthConfig};

use crate::corpus::{Dataset, Origin};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STATES_FILE: &str = "states.bin";
pub const DTYPE: &str = "f32le";
pub const FORMAT_VERSION: u32 = 1;

/// 64-bit FNV-1a of the exact prompt bytes, serialized as 16 hex digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PromptHash(pub u64);

impl PromptHash {
    pub fn of(prompt: &str) -> Self {
        PromptHash(fnv1a64(prompt.as_bytes()))
    }
}

impl fmt::Display for PromptHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl Serialize for PromptHash {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PromptHash {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        u64::from_str_radix(&s, 16)
            .map(PromptHash)
            .map_err(|e| serde::de::Error::custom(format!("bad prompt_hash {s:?}: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub pair_id: String,
    pub answer_index: usize,
    #[serde(with = "crate::label01")]
    pub label: bool,
    pub origin: Origin,
    pub byte_offset: u64,
    pub prompt_hash: PromptHash,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub model_name: String,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub dtype: String,
    pub entries: Vec<ManifestEntry>,
}

impl BundleManifest {
    pub fn new(model_name: impl Into<String>, num_layers: usize, hidden_dim: usize) -> Self {
        BundleManifest {
            format_version: FORMAT_VERSION,
            model_name: model_name.into(),
            num_layers,
            hidden_dim,
            dtype: DTYPE.to_owned(),
            entries: Vec::new(),
        }
    }

    /// Bytes per entry: `4 * L * D`.
    pub fn stride(&self) -> u64 {
        4 * self.num_layers as u64 * self.hidden_dim as u64
    }

    /// Appends an entry at the next offset.
    pub fn push(&mut self, pair_id: impl Into<String>, answer_index: usize, label: bool, origin: Origin, prompt_hash: PromptHash) {
        let byte_offset = self.stride() * self.entries.len() as u64;
        self.entries.push(ManifestEntry {
            pair_id: pair_id.into(),
            answer_index,
            label,
            origin,
            byte_offset,
            prompt_hash,
        });
    }

    pub fn data_len(&self) -> u64 {
        self.stride() * self.entries.len() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_dim == 0 {
            return Err(Error::Format("manifest needs num_layers >= 1 and hidden_dim >= 1".into()));
        }
        if self.dtype != DTYPE {
            return Err(Error::Format(format!("unsupported dtype {:?}, expected {DTYPE}", self.dtype)));
        }
        let stride = self.stride();
        let mut seen = HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.byte_offset % stride != 0 || e.byte_offset + stride > self.data_len() {
                return Err(Error::Format(format!(
                    "entry {}/{}: byte_offset {} is not a multiple of {stride} inside the data file",
                    e.pair_id, e.answer_index, e.byte_offset
                )));
            }
            if e.byte_offset != stride * i as u64 {
                return Err(Error::Format(format!(
                    "entry {}/{}: byte_offset {} does not follow manifest order",
                    e.pair_id, e.answer_index, e.byte_offset
                )));
            }
            if !seen.insert((e.pair_id.as_str(), e.answer_index)) {
                return Err(Error::Format(format!(
                    "duplicate entry {}/{}",
                    e.pair_id, e.answer_index
                )));
            }
        }
        Ok(())
    }

    /// Pair ids in first-appearance order with the indices of their entries.
    pub fn pairs(&self) -> Vec<(String, Vec<usize>)> {
        let mut order: Vec<(String, Vec<usize>)> = Vec::new();
        let mut pos: HashMap<&str, usize> = HashMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            match pos.get(e.pair_id.as_str()) {
                Some(&p) => order[p].1.push(i),
                None => {
                    pos.insert(&e.pair_id, order.len());
                    order.push((e.pair_id.clone(), vec![i]));
                }
            }
        }
        order
    }
}

/// Last-token hidden states of one answer: `L` rows of `D` values.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceStates {
    num_layers: usize,
    hidden_dim: usize,
    data: Vec<f32>,
}

impl SequenceStates {
    pub fn new(num_layers: usize, hidden_dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != num_layers * hidden_dim {
            return Err(Error::Validation(format!(
                "state matrix has {} values, expected {num_layers} x {hidden_dim}",
                data.len()
            )));
        }
        Ok(SequenceStates {
            num_layers,
            hidden_dim,
            data,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// Row for 0-based `layer`.
    pub fn layer(&self, layer: usize) -> &[f32] {
        &self.data[layer * self.hidden_dim..(layer + 1) * self.hidden_dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Finite values and at least one nonzero entry per row.
    pub fn check(&self) -> std::result::Result<(), String> {
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(format!(
                "non-finite value at layer {}, dim {}",
                i / self.hidden_dim + 1,
                i % self.hidden_dim
            ));
        }
        for l in 0..self.num_layers {
            if self.layer(l).iter().all(|&v| v == 0.0) {
                return Err(format!("all-zero row at layer {}", l + 1));
            }
        }
        Ok(())
    }

    fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    fn from_le_bytes(num_layers: usize, hidden_dim: usize, bytes: &[u8]) -> Self {
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        SequenceStates {
            num_layers,
            hidden_dim,
            data,
        }
    }
}

/// Random access to the states of manifest entries.
pub trait StateSource: Sync {
    fn manifest(&self) -> &BundleManifest;

    /// States of the entry at `index` in manifest order.
    fn states(&self, index: usize) -> Result<SequenceStates>;

    fn lookup(&self, pair_id: &str, answer_index: usize) -> Result<SequenceStates> {
        let idx = self
            .manifest()
            .entries
            .iter()
            .position(|e| e.pair_id == pair_id && e.answer_index == answer_index)
            .ok_or_else(|| Error::Validation(format!("no entry {pair_id}/{answer_index}")))?;
        self.states(idx)
    }
}

/// A bundle held in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub manifest: BundleManifest,
    data: Vec<f32>,
}

impl Bundle {
    /// Builds a bundle from states listed in manifest order.
    pub fn from_states(manifest: BundleManifest, states: Vec<SequenceStates>) -> Result<Self> {
        manifest.validate().map_err(|e| Error::Validation(e.to_string()))?;
        if states.len() != manifest.entries.len() {
            return Err(Error::Validation(format!(
                "manifest lists {} entries but {} state matrices were given",
                manifest.entries.len(),
                states.len()
            )));
        }
        let mut data = Vec::with_capacity(states.len() * manifest.num_layers * manifest.hidden_dim);
        for (e, s) in manifest.entries.iter().zip(states) {
            check_entry_states(&manifest, e, &s)?;
            data.extend_from_slice(&s.data);
        }
        Ok(Bundle { manifest, data })
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        write_files(&self.manifest, dir, |out| {
            let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
            out.write_all(&bytes)
        })
    }
}

impl StateSource for Bundle {
    fn manifest(&self) -> &BundleManifest {
        &self.manifest
    }

    fn states(&self, index: usize) -> Result<SequenceStates> {
        let n = self.manifest.num_layers * self.manifest.hidden_dim;
        let slice = self
            .data
            .get(index * n..(index + 1) * n)
            .ok_or_else(|| Error::Validation(format!("entry index {index} out of range")))?;
        Ok(SequenceStates {
            num_layers: self.manifest.num_layers,
            hidden_dim: self.manifest.hidden_dim,
            data: slice.to_vec(),
        })
    }
}

fn check_entry_states(manifest: &BundleManifest, e: &ManifestEntry, s: &SequenceStates) -> Result<()> {
    if s.num_layers != manifest.num_layers || s.hidden_dim != manifest.hidden_dim {
        return Err(Error::Validation(format!(
            "entry {}/{}: states are {}x{}, manifest says {}x{}",
            e.pair_id, e.answer_index, s.num_layers, s.hidden_dim, manifest.num_layers, manifest.hidden_dim
        )));
    }
    s.check()
        .map_err(|why| Error::Validation(format!("entry {}/{}: {why}", e.pair_id, e.answer_index)))
}

fn write_files(
    manifest: &BundleManifest,
    dir: &Path,
    write_states: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let states_path = dir.join(STATES_FILE);
    let file = File::create(&states_path).map_err(|e| Error::io(&states_path, e))?;
    let mut out = BufWriter::new(file);
    write_states(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(&states_path, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_vec_pretty(manifest)?;
    json.push(b'\n');
    fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))
}

/// Writes `manifest.json` and `states.bin` into `dir`.
///
/// `states` must hold exactly one matrix per manifest entry.
pub fn write_bundle(
    manifest: &BundleManifest,
    states: &HashMap<(String, usize), SequenceStates>,
    dir: &Path,
) -> Result<()> {
    manifest.validate().map_err(|e| Error::Validation(e.to_string()))?;
    if states.len() != manifest.entries.len() {
        return Err(Error::Validation(format!(
            "manifest lists {} entries but {} state matrices were given",
            manifest.entries.len(),
            states.len()
        )));
    }
    let mut ordered = Vec::with_capacity(states.len());
    for e in &manifest.entries {
        let s = states.get(&(e.pair_id.clone(), e.answer_index)).ok_or_else(|| {
            Error::Validation(format!("no states for entry {}/{}", e.pair_id, e.answer_index))
        })?;
        check_entry_states(manifest, e, s)?;
        ordered.push(s);
    }
    write_files(manifest, dir, |out| {
        for s in ordered {
            out.write_all(&s.to_le_bytes())?;
        }
        Ok(())
    })
}

/// Read-only bundle on disk; entries are loaded on demand.
pub struct BundleReader {
    manifest: BundleManifest,
    file: File,
}

impl BundleReader {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let raw = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: BundleManifest = serde_json::from_slice(&raw)
            .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
        manifest.validate()?;
        let states_path = dir.join(STATES_FILE);
        let file = File::open(&states_path).map_err(|e| Error::io(&states_path, e))?;
        let size = file.metadata().map_err(|e| Error::io(&states_path, e))?.len();
        if size != manifest.data_len() {
            return Err(Error::Format(format!(
                "{} is {size} bytes, expected {} (4 x {} x {} x {} entries)",
                states_path.display(),
                manifest.data_len(),
                manifest.num_layers,
                manifest.hidden_dim,
                manifest.entries.len()
            )));
        }
        Ok(BundleReader { manifest, file })
    }

    /// Reads every entry into memory.
    pub fn load(&self) -> Result<Bundle> {
        let states = (0..self.manifest.entries.len())
            .map(|i| self.states(i))
            .collect::<Result<Vec<_>>>()?;
        Bundle::from_states(self.manifest.clone(), states)
    }

    #[cfg(unix)]
    fn read_exact_at(&self, buf: &mut [u8], offset: u64) -> std::io::Result<()> {
        use std::os::unix::fs::FileExt;
        self.file.read_exact_at(buf, offset)
    }

    #[cfg(windows)]
    fn read_exact_at(&self, mut buf: &mut [u8], mut offset: u64) -> std::io::Result<()> {
        use std::os::windows::fs::FileExt;
        while !buf.is_empty() {
            let n = self.file.seek_read(buf, offset)?;
            if n == 0 {
                return Err(std::io::ErrorKind::UnexpectedEof.into());
            }
            buf = &mut buf[n..];
            offset += n as u64;
        }
        Ok(())
    }
}

impl StateSource for BundleReader {
    fn manifest(&self) -> &BundleManifest {
        &self.manifest
    }

    fn states(&self, index: usize) -> Result<SequenceStates> {
        let e = self
            .manifest
            .entries
            .get(index)
            .ok_or_else(|| Error::Validation(format!("entry index {index} out of range")))?;
        let mut buf = vec![0u8; self.manifest.stride() as usize];
        self.read_exact_at(&mut buf, e.byte_offset)
            .map_err(|err| Error::io(STATES_FILE, err))?;
        let s = SequenceStates::from_le_bytes(self.manifest.num_layers, self.manifest.hidden_dim, &buf);
        s.check()
            .map_err(|why| Error::Format(format!("entry {}/{}: {why}", e.pair_id, e.answer_index)))?;
        Ok(s)
    }
}

/// Cross-checks a bundle against the dataset its prompts were built from.
///
/// Reports every pair id present on one side only, every answer whose label
/// disagrees, and every prompt hash that does not match the rebuilt prompt.
pub fn verify_against_dataset(manifest: &BundleManifest, dataset: &Dataset) -> Result<()> {
    let mut problems = Vec::new();
    let bundle_pairs: HashSet<&str> = manifest.entries.iter().map(|e| e.pair_id.as_str()).collect();
    let dataset_pairs: HashSet<&str> = dataset.pairs().map(|(_, p)| p.pair_id.as_str()).collect();
    let mut only_bundle: Vec<&str> = bundle_pairs.difference(&dataset_pairs).copied().collect();
    let mut only_dataset: Vec<&str> = dataset_pairs.difference(&bundle_pairs).copied().collect();
    only_bundle.sort_unstable();
    only_dataset.sort_unstable();
    if !only_bundle.is_empty() {
        problems.push(format!("pairs only in bundle: {}", only_bundle.join(", ")));
    }
    if !only_dataset.is_empty() {
        problems.push(format!("pairs only in dataset: {}", only_dataset.join(", ")));
    }
    for e in &manifest.entries {
        let Some((ex, pair)) = dataset.find_pair(&e.pair_id) else {
            continue;
        };
        let Some(answer) = pair.answers.get(e.answer_index) else {
            problems.push(format!("{}/{}: answer index out of range", e.pair_id, e.answer_index));
            continue;
        };
        if answer.label != Some(e.label) {
            problems.push(format!("{}/{}: label mismatch", e.pair_id, e.answer_index));
        }
        let prompt = build_prompt(&ex.text, &pair.question, &answer.text)?;
        if PromptHash::of(&prompt) != e.prompt_hash {
            problems.push(format!("{}/{}: prompt hash mismatch", e.pair_id, e.answer_index));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Mismatch(problems.join("; ")))
    }
}

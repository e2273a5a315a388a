//! The contract an out-of-process extractor must meet: it reads
//! `resources/answer_prompt.txt`, fills `{knowledge}`, `{question}` and
//! `{answer}`, hashes the UTF-8 prompt with FNV-1a 64 and writes
//! `manifest.json` + `states.bin` by hand. These tests write bundles the way
//! such a tool would, without going through the crate's writer.

use std::fs;
use std::path::Path;

use hsprobe::bundle::{build_prompt, verify_against_dataset, BundleReader, StateSource, ANSWER_PROMPT_TEMPLATE};
use hsprobe::corpus::{Answer, Dataset, Example, Origin, QAPair};
use hsprobe::simkit::analyze_source;
use hsprobe::Error;
use serde_json::json;

const L: usize = 3;
const D: usize = 4;

fn dataset() -> Dataset {
    let answers = vec![
        Answer::new("Москва — столица России", true, Origin::Original),
        Answer::new("the capital is Moscow {not a field}", true, Origin::Rewritten),
        Answer::new("the capital is Saint Petersburg", false, Origin::Original),
        Answer::new("the capital is Kazan on the Volga", false, Origin::Original),
    ];
    Dataset {
        examples: vec![Example {
            idx: 3,
            text: "Moscow is the capital of Russia.".into(),
            pairs: vec![QAPair {
                pair_id: QAPair::make_id(3, 1),
                question_idx: 1,
                question: "What is the capital?".into(),
                answers,
            }],
        }],
    }
}

/// Same template substitution an external tool would do with str.replace.
fn external_prompt(knowledge: &str, question: &str, answer: &str) -> String {
    let template = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("resources/answer_prompt.txt")).unwrap();
    template
        .replacen("{knowledge}", knowledge, 1)
        .replacen("{question}", question, 1)
        .replacen("{answer}", answer, 1)
}

fn external_fnv(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

fn write_external_bundle(dir: &Path, ds: &Dataset, tamper_answer: Option<usize>) {
    let ex = &ds.examples[0];
    let pair = &ex.pairs[0];
    let mut entries = Vec::new();
    let mut bin = Vec::new();
    for (i, a) in pair.answers.iter().enumerate() {
        let text = if tamper_answer == Some(i) { format!("{} ", a.text) } else { a.text.clone() };
        let prompt = external_prompt(&ex.text, &pair.question, &text);
        entries.push(json!({
            "pair_id": pair.pair_id,
            "answer_index": i,
            "label": u8::from(a.label == Some(true)),
            "origin": if a.origin == Origin::Original { "original" } else { "rewritten" },
            "byte_offset": 4 * L * D * i,
            "prompt_hash": external_fnv(prompt.as_bytes()),
        }));
        for l in 0..L {
            for k in 0..D {
                let v = (i * 100 + l * 10 + k) as f32 * 0.25 + 1.0;
                bin.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let manifest = json!({
        "format_version": 1,
        "model_name": "external-tool",
        "num_layers": L,
        "hidden_dim": D,
        "dtype": "f32le",
        "entries": entries,
    });
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest).unwrap()).unwrap();
    fs::write(dir.join("states.bin"), bin).unwrap();
}

#[test]
fn template_resource_matches_embedded_copy() {
    let on_disk = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("resources/answer_prompt.txt")).unwrap();
    assert_eq!(on_disk, ANSWER_PROMPT_TEMPLATE);
    let ds = dataset();
    let (ex, pair) = (&ds.examples[0], &ds.examples[0].pairs[0]);
    for a in &pair.answers {
        assert_eq!(build_prompt(&ex.text, &pair.question, &a.text).unwrap(), external_prompt(&ex.text, &pair.question, &a.text));
    }
}

#[test]
fn externally_written_bundle_reads_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset();
    write_external_bundle(dir.path(), &ds, None);
    let reader = BundleReader::open(dir.path()).unwrap();
    verify_against_dataset(reader.manifest(), &ds).unwrap();

    let s = reader.states(2).unwrap();
    assert_eq!(s.layer(1), &[(210.0f32) * 0.25 + 1.0, 211.0 * 0.25 + 1.0, 212.0 * 0.25 + 1.0, 213.0 * 0.25 + 1.0]);
    let analyses = analyze_source(&reader, true).unwrap();
    assert_eq!(analyses.len(), 1);
    assert_eq!(analyses[0].to_true.pair_id, "3-1");
}

#[test]
fn prompt_hash_drift_is_a_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset();
    write_external_bundle(dir.path(), &ds, Some(1));
    let reader = BundleReader::open(dir.path()).unwrap();
    match verify_against_dataset(reader.manifest(), &ds) {
        Err(e @ Error::Mismatch(_)) => {
            assert!(e.to_string().contains("3-1/1: prompt hash mismatch"), "{e}");
            assert_eq!(e.exit_code(), 4);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn truncated_states_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset();
    write_external_bundle(dir.path(), &ds, None);
    let bin = fs::read(dir.path().join("states.bin")).unwrap();
    fs::write(dir.path().join("states.bin"), &bin[..bin.len() - 4]).unwrap();
    assert!(matches!(BundleReader::open(dir.path()), Err(Error::Format(_))));
}

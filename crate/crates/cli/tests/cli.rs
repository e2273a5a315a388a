use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hsprobe::bundle::{BundleReader, StateSource};
use hsprobe::pipeline::{read_json, StageManifest};

fn hsprobe(run_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsprobe"))
        .arg("--run-dir")
        .arg(run_dir)
        .args(args)
        .output()
        .expect("spawn hsprobe")
}

fn ok(run_dir: &Path, args: &[&str]) -> String {
    let out = hsprobe(run_dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

// One example with a passing pair, a pair with a single true answer and a
// pair with a digit; a second example whose only pair has a short answer.
const FIXTURE: &str = r#"{"idx": 0, "text": "(1) A passage. (2) More text.", "questions": [
  {"question": "Who?", "answers": [
    {"text": "the old miller of the village", "label": 1},
    {"text": "the miller who lived by the river", "label": 1},
    {"text": "a young baker from the town", "label": 0},
    {"text": "the baker who sold bread there", "label": 0}]},
  {"question": "Where?", "answers": [
    {"text": "near the old stone bridge here", "label": 1},
    {"text": "far away in the northern hills", "label": 0},
    {"text": "somewhere in the southern plains now", "label": 0}]},
  {"question": "When?", "answers": [
    {"text": "in the year 1850 or so", "label": 1},
    {"text": "sometime in the early spring season", "label": 1},
    {"text": "during the long cold winter months", "label": 0},
    {"text": "late in the dry summer months", "label": 0}]}]}
{"idx": 1, "text": "Another passage.", "questions": [
  {"question": "Why?", "answers": [
    {"text": "because", "label": 1},
    {"text": "because the river had flooded badly", "label": 1},
    {"text": "because the mill had burned down", "label": 0},
    {"text": "because the roads were all closed", "label": 0}]}]}
"#;

#[test]
fn synthetic_chain_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let synth = ok(&run, &["synth", "--layers", "8", "--dim", "16", "--pairs", "12", "--separation", "4"]);
    assert!(synth.contains("120 entries"), "{synth}");
    let prep = ok(&run, &["prepare", "--dataset", run.join("bundle/dataset.jsonl").to_str().unwrap()]);
    assert!(prep.starts_with("12 examples / 12 pairs / 120 answers"), "{prep}");
    assert!(ok(&run, &["augment"]).contains("removed 0 examples"));
    let analyze = ok(&run, &["analyze"]);
    let means: Vec<f64> = analyze
        .lines()
        .nth(1)
        .unwrap()
        .split(" / ")
        .map(|s| s.rsplit(' ').next().unwrap().parse().unwrap())
        .collect();
    assert!(means[0] > means[1] && means[2] > means[1], "{analyze}");
    let test = ok(&run, &["test"]);
    assert_eq!(test.matches("H0 rejected at 0.001").count(), 2, "{test}");
    ok(&run, &["layers"]);
    ok(&run, &["report", "--max-pairs", "1"]);

    for stage in ["bundle", "prepare", "augment", "analyze", "test", "layers"] {
        let m: StageManifest = read_json(&run.join(stage).join("stage_manifest.json")).unwrap();
        assert_eq!(m.stage, stage);
        assert!(!m.outputs.is_empty());
        for rec in m.inputs.iter().chain(&m.outputs) {
            assert!(!Path::new(&rec.path).is_absolute(), "{}", rec.path);
            assert_eq!(rec.sha256.len(), 64);
        }
    }
    assert!(run.join("reports/tables/hypothesis_tests.csv").is_file());
    assert!(run.join("reports/heatmaps/0-0_to_false.svg").is_file());
    assert!(!run.join("reports/heatmaps/1-0_to_false.svg").exists());
}

#[test]
fn prepare_counts_match_hand_computed_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("fixture.jsonl");
    // one example per line
    let jsonl = FIXTURE.replace("\n ", " ");
    fs::write(&data, jsonl).unwrap();
    let run = tmp.path().join("run");
    let out = ok(&run, &["prepare", "--dataset", data.to_str().unwrap()]);
    assert!(out.starts_with("1 examples / 1 pairs / 4 answers"), "{out}");
    assert!(out.contains("rejected 3 of 4 pairs (too few answers 1, short answer 1, length gap 0, digits 1)"), "{out}");

    // groups of two, no rewrites: augment cannot fill them
    let aug = hsprobe(&run, &["augment"]);
    assert_eq!(code(&aug), 3, "{}", String::from_utf8_lossy(&aug.stderr));
    assert!(String::from_utf8_lossy(&aug.stderr).contains("0-0"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "\n").unwrap();
    let out = hsprobe(&tmp.path().join("a"), &["prepare", "--dataset", empty.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no examples parsed"));

    let missing = hsprobe(&tmp.path().join("b"), &["prepare", "--dataset", "/nonexistent/x.jsonl"]);
    assert_eq!(code(&missing), 1);
    assert_eq!(code(&hsprobe(&tmp.path().join("c"), &["test"])), 1);

    // two pairs cannot be tested
    let small = tmp.path().join("d");
    ok(&small, &["synth", "--layers", "3", "--dim", "8", "--pairs", "2"]);
    ok(&small, &["analyze"]);
    assert_eq!(code(&hsprobe(&small, &["test"])), 5);

    // bundle pair_ids that the dataset does not contain
    let other = tmp.path().join("e");
    ok(&other, &["synth", "--layers", "3", "--dim", "8", "--pairs", "5"]);
    let ds = small.join("bundle/dataset.jsonl");
    let mismatch = hsprobe(&other, &["analyze", "--dataset", ds.to_str().unwrap()]);
    assert_eq!(code(&mismatch), 4, "{}", String::from_utf8_lossy(&mismatch.stderr));

    let bad_cfg = tmp.path().join("bad.toml");
    fs::write(&bad_cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(code(&hsprobe(&tmp.path().join("f"), &["--config", bad_cfg.to_str().unwrap(), "layers"])), 2);
}

#[test]
fn stages_refuse_to_clobber_without_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    ok(&run, &["synth", "--layers", "3", "--dim", "8", "--pairs", "4"]);
    assert_eq!(code(&hsprobe(&run, &["synth", "--layers", "3", "--dim", "8", "--pairs", "4"])), 2);
    ok(&run, &["--overwrite", "synth", "--layers", "3", "--dim", "8", "--pairs", "4"]);
}

#[test]
fn config_is_persisted_verbatim_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.toml");
    let text = "# hidden-state toy run\nseed = 3\n\n[synth]\nnum_layers = 4\nhidden_dim = 8\nnum_pairs = 5\n";
    fs::write(&cfg, text).unwrap();
    let run = tmp.path().join("run");
    let out = ok(&run, &["--config", cfg.to_str().unwrap(), "synth", "--pairs", "6"]);
    assert!(out.contains("60 entries") && out.contains("seed=3") && out.contains("L=4"), "{out}");
    assert_eq!(fs::read_to_string(run.join("config.toml")).unwrap(), text);

    fs::write(&cfg, "seed = 4\n").unwrap();
    assert_eq!(code(&hsprobe(&run, &["--config", cfg.to_str().unwrap(), "analyze"])), 2);
}

#[test]
fn same_seed_gives_identical_states() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["synth", "--layers", "4", "--dim", "16", "--pairs", "6", "--separation", "1"];
    let hash = |name: &str, seed: &str| {
        let run = tmp.path().join(name);
        ok(&run, &[&["--seed", seed][..], &args[..]].concat());
        let m: StageManifest = read_json(&run.join("bundle/stage_manifest.json")).unwrap();
        m.outputs.iter().find(|r| r.path.ends_with("states.bin")).unwrap().sha256.clone()
    };
    let (a, b, c) = (hash("a", "11"), hash("b", "11"), hash("c", "12"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

/// Unbiased estimate of delta from per-pair group means: with unit noise,
/// `E|mean_T - mean_F|^2 = delta^2 D + D (1/n_T + 1/n_F)`.
fn measured_separation(bundle: &Path) -> f64 {
    let reader = BundleReader::open(bundle).unwrap();
    let m = reader.manifest().clone();
    let (l, d) = (m.num_layers, m.hidden_dim);
    let mut total = 0.0;
    let mut count = 0usize;
    for (_, indices) in m.pairs() {
        let states: Vec<_> = indices.iter().map(|&i| (m.entries[i].label, reader.states(i).unwrap())).collect();
        let n_t = states.iter().filter(|s| s.0).count() as f64;
        let n_f = states.len() as f64 - n_t;
        for layer in 0..l {
            let mut diff = vec![0.0f64; d];
            for (label, s) in &states {
                let w = if *label { 1.0 / n_t } else { -1.0 / n_f };
                for (acc, &x) in diff.iter_mut().zip(s.layer(layer)) {
                    *acc += w * f64::from(x);
                }
            }
            let sq: f64 = diff.iter().map(|x| x * x).sum();
            total += (sq - d as f64 * (1.0 / n_t + 1.0 / n_f)) / d as f64;
            count += 1;
        }
    }
    (total / count as f64).sqrt()
}

#[test]
fn separation_flag_is_honored_at_d256() {
    let tmp = tempfile::tempdir().unwrap();
    for (i, delta) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let run = tmp.path().join(format!("r{i}"));
        let sep = delta.to_string();
        ok(&run, &["synth", "--layers", "4", "--dim", "256", "--pairs", "100", "--separation", &sep]);
        let got = measured_separation(&run.join("bundle"));
        assert!((got / delta - 1.0).abs() < 0.05, "delta {delta}: measured {got}");
    }
}

#[test]
fn readme_config_example_parses() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n").expect("toml block") + "```toml\n".len();
    let block = &readme[start..start + readme[start..].find("```").unwrap()];
    let cfg: hsprobe::pipeline::RunConfig = toml::from_str(block).unwrap();
    assert_eq!(cfg.seed, Some(7));
    assert_eq!(cfg.report.max_pairs, 10);
    assert_eq!(cfg.test.center, hsprobe::stats::Center::Mean);
}

//! Answer-group augmentation from paraphrase variants.
//!
//! Each original answer comes with three rewritten variants. Variants of a
//! group are pooled, scored by their mean ROUGE-1 against the group's
//! original answers, and the least similar ones are appended until the group
//! reaches the target size. Pairs whose augmented groups drift apart in
//! average length are then dropped.

mod paraphrase;
mod rouge;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

pub use paraphrase::{
    fetch_paraphrases, paraphrase_prompt, parse_rewriting, ChatTransport, EndpointConfig, FetchOptions,
    HttpChatClient, PARAPHRASE_TEMPLATE,
};
pub use rouge::{rouge1, rouge_tokens};

use crate::corpus::{Answer, Dataset, Example, Origin, QAPair};
use crate::error::{Error, Result};

pub const VARIANTS_PER_ANSWER: usize = 3;
pub const DEFAULT_GROUP_SIZE: usize = 5;

/// Three paraphrases of one original answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteSet {
    pub pair_id: String,
    #[serde(with = "crate::label01")]
    pub label: bool,
    /// Index into the pair's original answers of this label.
    pub source_answer_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_text: Option<String>,
    pub variants: Vec<String>,
}

impl RewriteSet {
    pub fn validate(&self) -> Result<()> {
        if self.variants.len() != VARIANTS_PER_ANSWER {
            return Err(Error::Validation(format!(
                "rewrite set {}/{}/{} has {} variants, expected {VARIANTS_PER_ANSWER}",
                self.pair_id,
                u8::from(self.label),
                self.source_answer_index,
                self.variants.len()
            )));
        }
        if self.variants.iter().any(|v| v.trim().is_empty()) {
            return Err(Error::Validation(format!(
                "rewrite set {}/{}/{} has an empty variant",
                self.pair_id,
                u8::from(self.label),
                self.source_answer_index
            )));
        }
        Ok(())
    }
}

pub fn read_rewrites<R: Read>(source: R) -> Result<Vec<RewriteSet>> {
    let mut out = Vec::new();
    for (record, line) in BufReader::new(source).lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            record,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let set: RewriteSet = serde_json::from_str(&line).map_err(|e| Error::Parse {
            record,
            message: e.to_string(),
        })?;
        set.validate()?;
        out.push(set);
    }
    Ok(out)
}

pub fn write_rewrites<W: Write>(mut out: W, sets: &[RewriteSet]) -> Result<()> {
    for s in sets {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n").map_err(|e| Error::io("<rewrites>", e))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedVariant {
    pub text: String,
    pub avg_rouge1: f64,
    pub source_answer_index: usize,
    pub variant_position: usize,
}

/// Scores every variant against the group's original answers and sorts them
/// ascending; ties keep `(source_answer_index, variant_position)` order.
pub fn rank_variants(group: &[Answer], rewrites: &[RewriteSet]) -> Result<Vec<RankedVariant>> {
    if rewrites.is_empty() {
        return Ok(Vec::new());
    }
    let originals: Vec<&Answer> = group.iter().filter(|a| a.origin == Origin::Original).collect();
    if originals.is_empty() {
        return Err(Error::Domain("ranking variants against a group without original answers".into()));
    }

    let mut ranked = Vec::new();
    for set in rewrites {
        set.validate()?;
        if set.source_answer_index >= originals.len() {
            return Err(Error::Validation(format!(
                "rewrite set for pair {} references answer {} of a group with {} originals",
                set.pair_id,
                set.source_answer_index,
                originals.len()
            )));
        }
        for (pos, text) in set.variants.iter().enumerate() {
            let mut sum = 0.0;
            for a in &originals {
                sum += rouge1(text, &a.text)?;
            }
            ranked.push(RankedVariant {
                text: text.clone(),
                avg_rouge1: sum / originals.len() as f64,
                source_answer_index: set.source_answer_index,
                variant_position: pos,
            });
        }
    }
    ranked.sort_by(|a, b| {
        a.avg_rouge1
            .total_cmp(&b.avg_rouge1)
            .then(a.source_answer_index.cmp(&b.source_answer_index))
            .then(a.variant_position.cmp(&b.variant_position))
    });
    Ok(ranked)
}

/// Appends the lowest-ranked variants until the group has `target_size`
/// answers. Original answers keep their positions.
pub fn complete_group(
    pair_id: &str,
    label: bool,
    group: &[Answer],
    ranked: &[RankedVariant],
    target_size: usize,
) -> Result<Vec<Answer>> {
    if group.len() > target_size {
        return Err(Error::Validation(format!(
            "pair {pair_id}, group {}: {} answers already exceed target {target_size}",
            u8::from(label),
            group.len()
        )));
    }
    let needed = target_size - group.len();
    if ranked.len() < needed {
        return Err(Error::Capacity(format!(
            "pair {pair_id}, group {}: need {needed} variants, have {}",
            u8::from(label),
            ranked.len()
        )));
    }
    let mut out = group.to_vec();
    out.extend(
        ranked[..needed]
            .iter()
            .map(|v| Answer::new(v.text.clone(), label, Origin::Rewritten)),
    );
    Ok(out)
}

/// Re-applies the group length-balance condition after augmentation.
pub fn post_filter(dataset: &Dataset, max_len_diff_chars: f64) -> Dataset {
    let examples = dataset
        .examples
        .iter()
        .filter_map(|ex| {
            let pairs: Vec<QAPair> = ex
                .pairs
                .iter()
                .filter(|p| p.length_gap().is_some_and(|g| g <= max_len_diff_chars))
                .cloned()
                .collect();
            (!pairs.is_empty()).then(|| Example {
                idx: ex.idx,
                text: ex.text.clone(),
                pairs,
            })
        })
        .collect();
    Dataset { examples }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentOptions {
    pub target_size: usize,
    pub max_len_diff_chars: f64,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        AugmentOptions {
            target_size: DEFAULT_GROUP_SIZE,
            max_len_diff_chars: 30.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub examples_in: usize,
    pub pairs_in: usize,
    pub rewritten_answers_added: usize,
    pub removed_examples: usize,
    pub removed_pairs: usize,
    pub examples_out: usize,
    pub pairs_out: usize,
}

type GroupKey = (String, bool);

fn index_rewrites(rewrites: &[RewriteSet]) -> BTreeMap<GroupKey, Vec<RewriteSet>> {
    let mut by_group: BTreeMap<GroupKey, Vec<RewriteSet>> = BTreeMap::new();
    for r in rewrites {
        by_group
            .entry((r.pair_id.clone(), r.label))
            .or_default()
            .push(r.clone());
    }
    by_group
}

fn augment_pair(pair: &QAPair, rewrites: &BTreeMap<GroupKey, Vec<RewriteSet>>, target: usize) -> Result<QAPair> {
    let mut answers = pair.answers.clone();
    for label in [true, false] {
        let group: Vec<Answer> = pair.group(label).cloned().collect();
        if group.len() >= target {
            continue;
        }
        let sets = rewrites
            .get(&(pair.pair_id.clone(), label))
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let originals: Vec<&Answer> = group.iter().filter(|a| a.origin == Origin::Original).collect();
        for s in sets {
            if let (Some(src), Some(orig)) = (&s.source_text, originals.get(s.source_answer_index)) {
                if src != &orig.text {
                    return Err(Error::Validation(format!(
                        "pair {}, group {}: rewrite source {} does not match answer text",
                        pair.pair_id,
                        u8::from(label),
                        s.source_answer_index
                    )));
                }
            }
        }
        let ranked = rank_variants(&group, sets)?;
        let completed = complete_group(&pair.pair_id, label, &group, &ranked, target)?;
        answers.extend(completed.into_iter().skip(group.len()));
    }
    Ok(QAPair {
        answers,
        ..pair.clone()
    })
}

/// Fills every group to `target_size` and post-filters by length balance.
///
/// All starved groups are reported together in one capacity error.
pub fn augment_dataset(
    dataset: &Dataset,
    rewrites: &[RewriteSet],
    opts: &AugmentOptions,
) -> Result<(Dataset, AugmentReport)> {
    let by_group = index_rewrites(rewrites);
    let mut starved = Vec::new();
    let mut examples = Vec::with_capacity(dataset.examples.len());
    let mut added = 0usize;
    for ex in &dataset.examples {
        let mut pairs = Vec::with_capacity(ex.pairs.len());
        for p in &ex.pairs {
            match augment_pair(p, &by_group, opts.target_size) {
                Ok(aug) => {
                    added += aug.answers.len() - p.answers.len();
                    pairs.push(aug);
                }
                Err(Error::Capacity(msg)) => starved.push(msg),
                Err(e) => return Err(e),
            }
        }
        examples.push(Example {
            idx: ex.idx,
            text: ex.text.clone(),
            pairs,
        });
    }
    if !starved.is_empty() {
        return Err(Error::Capacity(format!(
            "{} starved group(s): {}",
            starved.len(),
            starved.join("; ")
        )));
    }
    let augmented = Dataset { examples };
    let filtered = post_filter(&augmented, opts.max_len_diff_chars);
    let report = AugmentReport {
        examples_in: dataset.examples.len(),
        pairs_in: dataset.num_pairs(),
        rewritten_answers_added: added,
        removed_examples: dataset.examples.len() - filtered.examples.len(),
        removed_pairs: dataset.num_pairs() - filtered.num_pairs(),
        examples_out: filtered.examples.len(),
        pairs_out: filtered.num_pairs(),
    };
    Ok((filtered, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn orig(text: &str, label: bool) -> Answer {
        Answer::new(text, label, Origin::Original)
    }

    fn set(pair_id: &str, label: bool, idx: usize, v: [&str; 3]) -> RewriteSet {
        RewriteSet {
            pair_id: pair_id.into(),
            label,
            source_answer_index: idx,
            source_text: None,
            variants: v.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn ranked(text: &str, score: f64) -> RankedVariant {
        RankedVariant {
            text: text.into(),
            avg_rouge1: score,
            source_answer_index: 0,
            variant_position: 0,
        }
    }

    #[test]
    fn rank_hand_example() {
        let group = [orig("a b c d e", true), orig("f g h i j", true)];
        let r = rank_variants(&group, &[set("p", true, 0, ["a b x y z", "a b c d e", "q r s t u"])]).unwrap();
        assert_eq!(r[0].text, "q r s t u");
        assert_eq!(r[0].avg_rouge1, 0.0);
        assert!((r[1].avg_rouge1 - 0.2).abs() < 1e-15);
        assert_eq!(r[1].text, "a b x y z");
        assert_eq!(r[2].text, "a b c d e");
        assert!((r[2].avg_rouge1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rank_identity_is_last_and_ties_are_deterministic() {
        let group = [orig("same words here", false), orig("same words here", false)];
        let r = rank_variants(
            &group,
            &[
                set("p", false, 1, ["zz", "same words here", "yy"]),
                set("p", false, 0, ["xx", "ww", "vv"]),
            ],
        )
        .unwrap();
        assert_eq!(r.last().unwrap().avg_rouge1, 1.0);
        let order: Vec<&str> = r.iter().map(|v| v.text.as_str()).collect();
        assert_eq!(order, ["xx", "ww", "vv", "zz", "yy", "same words here"]);
        assert!(rank_variants(&group, &[]).unwrap().is_empty());
    }

    #[test]
    fn rank_rejects_bad_index() {
        let group = [orig("a", true)];
        assert!(matches!(
            rank_variants(&group, &[set("p", true, 4, ["x", "y", "z"])]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn complete_group_cases() {
        let five: Vec<Answer> = (0..5).map(|i| orig(&format!("w{i}"), true)).collect();
        assert_eq!(complete_group("p", true, &five, &[ranked("x", 0.0)], 5).unwrap(), five);

        let two = &five[..2];
        let six: Vec<RankedVariant> = (0..6).map(|i| ranked(&format!("v{i}"), i as f64 / 10.0)).collect();
        let out = complete_group("p", true, two, &six, 5).unwrap();
        assert_eq!(out.len(), 5);
        assert_eq!(&out[..2], two);
        assert_eq!(out[2].text, "v0");
        assert_eq!(out[4].text, "v2");
        assert!(out[2..].iter().all(|a| a.origin == Origin::Rewritten && a.label == Some(true)));

        let four = &five[..4];
        let out = complete_group("p", true, four, &[ranked("v1", 0.1), ranked("v2", 0.3)], 5).unwrap();
        assert_eq!(out.last().unwrap().text, "v1");
        assert_eq!(out.len(), 5);

        let err = complete_group("7-2", false, two, &six[..2], 5).unwrap_err();
        match err {
            Error::Capacity(msg) => assert!(msg.contains("7-2") && msg.contains("group 0")),
            other => panic!("{other:?}"),
        }
    }

    fn pair_with(true_len: usize, false_len: usize) -> QAPair {
        QAPair {
            pair_id: "1-0".into(),
            question_idx: 0,
            question: "q".into(),
            answers: vec![orig(&"t".repeat(true_len), true), orig(&"f".repeat(false_len), false)],
        }
    }

    #[test]
    fn post_filter_cases() {
        let ds = Dataset {
            examples: vec![
                Example {
                    idx: 1,
                    text: "x".into(),
                    pairs: vec![pair_with(70, 105)],
                },
                Example {
                    idx: 2,
                    text: "y".into(),
                    pairs: vec![QAPair {
                        pair_id: "2-0".into(),
                        ..pair_with(40, 40)
                    }],
                },
            ],
        };
        let out = post_filter(&ds, 30.0);
        assert_eq!(out.examples.len(), 1);
        assert_eq!(out.examples[0].idx, 2);
        assert_eq!(post_filter(&out, 30.0), out);
    }

    #[test]
    fn augment_dataset_reports_starved_groups() {
        let ds = Dataset {
            examples: vec![Example {
                idx: 1,
                text: "x".into(),
                pairs: vec![QAPair {
                    pair_id: "1-0".into(),
                    question_idx: 0,
                    question: "q".into(),
                    answers: vec![
                        orig("alpha beta gamma", true),
                        orig("delta eps zeta", true),
                        orig("eta theta iota", false),
                        orig("kappa lambda mu", false),
                    ],
                }],
            }],
        };
        let rewrites = vec![set("1-0", true, 0, ["one", "two", "three"])];
        let err = augment_dataset(&ds, &rewrites, &AugmentOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Capacity(ref m) if m.contains("1-0")), "{err}");

        let rewrites = vec![
            set("1-0", true, 0, ["nu xi omicron", "pi rho sigma", "alpha beta gamma tau"]),
            set("1-0", true, 1, ["ef gh ij", "kl mn op", "delta eps zeta qr"]),
            set("1-0", false, 1, ["upsilon phi chi", "psi omega ab", "kappa lambda mu cd"]),
        ];
        let (out, report) = augment_dataset(&ds, &rewrites, &AugmentOptions::default()).unwrap();
        let p = &out.examples[0].pairs[0];
        assert_eq!(p.group_size(true), 5);
        assert_eq!(p.group_size(false), 5);
        assert_eq!(report.rewritten_answers_added, 6);
        assert_eq!(p.answers.len(), 10);
        assert_eq!(report.removed_examples, 0);
        assert!(p.group(true).all(|a| a.text != "alpha beta gamma tau"));
    }

    #[test]
    fn rewrites_roundtrip() {
        let sets = vec![set("1-0", true, 0, ["a", "b", "c"])];
        let mut buf = Vec::new();
        write_rewrites(&mut buf, &sets).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().contains("\"label\":1"));
        assert_eq!(read_rewrites(&buf[..]).unwrap(), sets);
        assert!(read_rewrites(&b"{\"pair_id\":\"x\",\"label\":1,\"source_answer_index\":0,\"variants\":[\"a\"]}"[..]).is_err());
    }

    proptest! {
        #[test]
        fn lowest_variants_do_not_raise_diversity_score(
            originals in proptest::collection::vec("[a-f]{1,2}( [a-f]{1,2}){2,5}", 2..4),
            variants in proptest::collection::vec("[a-h]{1,2}( [a-h]{1,2}){2,5}", 9),
        ) {
            let group: Vec<Answer> = originals.iter().map(|t| orig(t, true)).collect();
            let sets: Vec<RewriteSet> = (0..3).map(|i| RewriteSet {
                pair_id: "p".into(),
                label: true,
                source_answer_index: i % group.len(),
                source_text: None,
                variants: variants[i * 3..i * 3 + 3].to_vec(),
            }).collect();
            let ranked = rank_variants(&group, &sets).unwrap();
            for w in ranked.windows(2) {
                prop_assert!(w[0].avg_rouge1 <= w[1].avg_rouge1);
            }
            let needed = 5 - group.len();
            let low = complete_group("p", true, &group, &ranked, 5).unwrap();
            let mut rev = ranked.clone();
            rev.reverse();
            let high = complete_group("p", true, &group, &rev, 5).unwrap();
            prop_assert_eq!(low.len(), 5);
            prop_assert_eq!(&low[..group.len()], &group[..]);
            // Ranking controls the appended-vs-original overlap only; overlap
            // among the appended variants themselves is unconstrained.
            let to_originals = |g: &[Answer]| -> f64 {
                g[group.len()..].iter().map(|v| {
                    group.iter().map(|o| rouge1(&v.text, &o.text).unwrap()).sum::<f64>()
                }).sum()
            };
            prop_assert!(to_originals(&low) <= to_originals(&high) + 1e-12);
            prop_assert_eq!(low.len() - group.len(), needed);
        }
    }
}

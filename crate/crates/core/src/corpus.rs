//! MuSeRC-style QA corpus: parsing, text normalization, pair selection and
//! corpus statistics.
//!
//! A corpus is a list of [`Example`]s. Each example carries a passage and a
//! list of question/answer-group pairs ([`QAPair`]); every answer is labeled
//! true or false. Selection keeps a pair only when both groups are large
//! enough, every answer is long enough, the two groups have similar average
//! lengths and no answer contains a digit.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::augment::rouge1;
use crate::error::{Error, Result};

/// Where an answer came from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    #[default]
    Original,
    Rewritten,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Answer {
    pub text: String,
    /// `None` only for unlabeled splits parsed with `allow_unlabeled`.
    pub label: Option<bool>,
    pub origin: Origin,
}

impl Answer {
    pub fn new(text: impl Into<String>, label: bool, origin: Origin) -> Self {
        Answer {
            text: text.into(),
            label: Some(label),
            origin,
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QAPair {
    /// `"<example idx>-<question idx>"`, unique within a dataset.
    pub pair_id: String,
    pub question_idx: u64,
    pub question: String,
    pub answers: Vec<Answer>,
}

impl QAPair {
    pub fn make_id(example_idx: u64, question_idx: u64) -> String {
        format!("{example_idx}-{question_idx}")
    }

    /// Answers carrying `label`, in pair order.
    pub fn group(&self, label: bool) -> impl Iterator<Item = &Answer> {
        self.answers.iter().filter(move |a| a.label == Some(label))
    }

    pub fn group_size(&self, label: bool) -> usize {
        self.group(label).count()
    }

    /// Mean character length of one label group, `None` when the group is empty.
    pub fn avg_group_len(&self, label: bool) -> Option<f64> {
        let (sum, n) = self
            .group(label)
            .fold((0usize, 0usize), |(s, n), a| (s + a.char_len(), n + 1));
        (n > 0).then(|| sum as f64 / n as f64)
    }

    /// Absolute gap between the true and false group mean lengths.
    pub fn length_gap(&self) -> Option<f64> {
        Some((self.avg_group_len(true)? - self.avg_group_len(false)?).abs())
    }

    fn require_labels(&self) -> Result<()> {
        match self.answers.iter().position(|a| a.label.is_none()) {
            Some(i) => Err(Error::Validation(format!(
                "pair {}: answer {i} has no label",
                self.pair_id
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub idx: u64,
    pub text: String,
    pub pairs: Vec<QAPair>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn num_pairs(&self) -> usize {
        self.examples.iter().map(|e| e.pairs.len()).sum()
    }

    pub fn num_answers(&self) -> usize {
        self.pairs().map(|(_, p)| p.answers.len()).sum()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Example, &QAPair)> {
        self.examples
            .iter()
            .flat_map(|e| e.pairs.iter().map(move |p| (e, p)))
    }

    pub fn find_pair(&self, pair_id: &str) -> Option<(&Example, &QAPair)> {
        self.pairs().find(|(_, p)| p.pair_id == pair_id)
    }

    fn check_unique_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (_, p) in self.pairs() {
            if !seen.insert(p.pair_id.as_str()) {
                return Err(Error::Validation(format!("duplicate pair id {}", p.pair_id)));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    /// One example object per line.
    Jsonl,
    /// A single JSON array of example objects.
    SingleJson,
}

impl InputFormat {
    /// Guesses the format from the first non-whitespace byte.
    pub fn detect(bytes: &[u8]) -> InputFormat {
        match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
            Some(b'[') => InputFormat::SingleJson,
            _ => InputFormat::Jsonl,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParseOptions {
    pub allow_unlabeled: bool,
    /// Strip sentence-number markers from passage texts.
    pub normalize: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            allow_unlabeled: false,
            normalize: true,
        }
    }
}

/// Parses a MuSeRC-style stream.
///
/// Accepts `idx` or `id` for the example key, and either top-level
/// `text`/`questions` or the nested `passage.{text,questions}` layout.
pub fn parse_dataset<R: Read>(source: R, format: InputFormat, opts: ParseOptions) -> Result<Dataset> {
    let mut examples = Vec::new();
    match format {
        InputFormat::Jsonl => {
            let reader = BufReader::new(source);
            let mut record = 0usize;
            for line in reader.lines() {
                let line = line.map_err(|e| Error::Parse {
                    record,
                    message: e.to_string(),
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    record,
                    message: e.to_string(),
                })?;
                examples.push(parse_example(&value, record, opts)?);
                record += 1;
            }
        }
        InputFormat::SingleJson => {
            let value: Value = serde_json::from_reader(source).map_err(|e| Error::Parse {
                record: 0,
                message: e.to_string(),
            })?;
            let Value::Array(items) = value else {
                return Err(Error::Parse {
                    record: 0,
                    message: "expected a JSON array of examples".into(),
                });
            };
            for (record, item) in items.iter().enumerate() {
                examples.push(parse_example(item, record, opts)?);
            }
        }
    }
    let ds = Dataset { examples };
    ds.check_unique_ids()?;
    Ok(ds)
}

fn parse_example(value: &Value, record: usize, opts: ParseOptions) -> Result<Example> {
    let perr = |message: String| Error::Parse { record, message };
    let obj = value
        .as_object()
        .ok_or_else(|| perr("example is not an object".into()))?;
    let idx = obj
        .get("idx")
        .or_else(|| obj.get("id"))
        .and_then(Value::as_u64)
        .ok_or_else(|| perr("missing integer `idx`/`id`".into()))?;

    let passage: &Map<String, Value> = match obj.get("passage") {
        Some(Value::Object(p)) => p,
        Some(_) => return Err(perr("`passage` is not an object".into())),
        None => obj,
    };
    let raw_text = passage
        .get("text")
        .and_then(Value::as_str)
        .ok_or_else(|| perr("missing string `text`".into()))?;
    let text = if opts.normalize {
        normalize_text(raw_text)
    } else {
        raw_text.to_owned()
    };
    let questions = passage
        .get("questions")
        .and_then(Value::as_array)
        .ok_or_else(|| perr("missing array `questions`".into()))?;

    let mut pairs = Vec::with_capacity(questions.len());
    for (qpos, q) in questions.iter().enumerate() {
        let q = q
            .as_object()
            .ok_or_else(|| perr(format!("question {qpos} is not an object")))?;
        let question_idx = q.get("idx").and_then(Value::as_u64).unwrap_or(qpos as u64);
        let question = q
            .get("question")
            .and_then(Value::as_str)
            .ok_or_else(|| perr(format!("question {qpos}: missing string `question`")))?
            .to_owned();
        let raw_answers = q
            .get("answers")
            .and_then(Value::as_array)
            .ok_or_else(|| perr(format!("question {qpos}: missing array `answers`")))?;
        let mut answers = Vec::with_capacity(raw_answers.len());
        for (apos, a) in raw_answers.iter().enumerate() {
            let a = a
                .as_object()
                .ok_or_else(|| perr(format!("question {qpos}, answer {apos} is not an object")))?;
            let text = a
                .get("text")
                .and_then(Value::as_str)
                .ok_or_else(|| perr(format!("question {qpos}, answer {apos}: missing `text`")))?;
            if text.trim().is_empty() {
                return Err(perr(format!("question {qpos}, answer {apos}: empty text")));
            }
            let label = match a.get("label") {
                None | Some(Value::Null) => None,
                Some(Value::Bool(b)) => Some(*b),
                Some(Value::Number(n)) => match n.as_u64() {
                    Some(0) => Some(false),
                    Some(1) => Some(true),
                    _ => {
                        return Err(perr(format!(
                            "question {qpos}, answer {apos}: label must be 0 or 1"
                        )))
                    }
                },
                Some(_) => {
                    return Err(perr(format!(
                        "question {qpos}, answer {apos}: label must be 0 or 1"
                    )))
                }
            };
            if label.is_none() && !opts.allow_unlabeled {
                return Err(Error::Validation(format!(
                    "record {record}, question {qpos}, answer {apos}: missing label"
                )));
            }
            let origin = match a.get("origin") {
                None | Some(Value::Null) => Origin::Original,
                Some(v) => serde_json::from_value(v.clone())
                    .map_err(|e| perr(format!("question {qpos}, answer {apos}: {e}")))?,
            };
            answers.push(Answer {
                text: text.to_owned(),
                label,
                origin,
            });
        }
        pairs.push(QAPair {
            pair_id: QAPair::make_id(idx, question_idx),
            question_idx,
            question,
            answers,
        });
    }
    Ok(Example { idx, text, pairs })
}

#[derive(Serialize)]
struct OutExample<'a> {
    idx: u64,
    text: &'a str,
    questions: Vec<OutQuestion<'a>>,
}

#[derive(Serialize)]
struct OutQuestion<'a> {
    idx: u64,
    question: &'a str,
    answers: Vec<OutAnswer<'a>>,
}

#[derive(Serialize)]
struct OutAnswer<'a> {
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
    origin: Origin,
}

/// Writes the dataset as JSONL in the input schema, one example per line.
pub fn write_dataset<W: Write>(mut out: W, dataset: &Dataset) -> Result<()> {
    for ex in &dataset.examples {
        let rec = OutExample {
            idx: ex.idx,
            text: &ex.text,
            questions: ex
                .pairs
                .iter()
                .map(|p| OutQuestion {
                    idx: p.question_idx,
                    question: &p.question,
                    answers: p
                        .answers
                        .iter()
                        .map(|a| OutAnswer {
                            text: &a.text,
                            label: a.label.map(u8::from),
                            origin: a.origin,
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n").map_err(|e| Error::io("<dataset>", e))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

fn marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(\d+\) ?").expect("static regex"))
}

fn digit_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{Nd}").expect("static regex"))
}

/// Removes `(<digits>)` sentence markers together with one following space.
///
/// Repeats until no marker is left, so nested spellings such as `((1)2)`
/// cannot reassemble into a new marker.
pub fn normalize_text(raw: &str) -> String {
    let re = marker_re();
    let mut text = raw.to_owned();
    while re.is_match(&text) {
        text = re.replace_all(&text, "").into_owned();
    }
    text
}

pub fn contains_digit(text: &str) -> bool {
    digit_re().is_match(text)
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionCriteria {
    pub min_true: usize,
    pub min_false: usize,
    pub min_words: usize,
    pub max_len_diff_chars: f64,
    pub forbid_digits: bool,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        SelectionCriteria {
            min_true: 2,
            min_false: 2,
            min_words: 5,
            max_len_diff_chars: 30.0,
            forbid_digits: true,
        }
    }
}

impl SelectionCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.min_true == 0 || self.min_false == 0 || self.min_words == 0 {
            return Err(Error::Validation("selection counts must be >= 1".into()));
        }
        if !(self.max_len_diff_chars >= 0.0) {
            return Err(Error::Validation("max_len_diff_chars must be >= 0".into()));
        }
        Ok(())
    }
}

/// Which selection conditions a pair violates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Violations {
    pub too_few_answers: bool,
    pub short_answer: bool,
    pub length_gap: bool,
    pub contains_digit: bool,
}

impl Violations {
    pub fn any(&self) -> bool {
        self.too_few_answers || self.short_answer || self.length_gap || self.contains_digit
    }
}

pub fn check_pair(pair: &QAPair, criteria: &SelectionCriteria) -> Violations {
    let n_true = pair.group_size(true);
    let n_false = pair.group_size(false);
    Violations {
        too_few_answers: n_true < criteria.min_true || n_false < criteria.min_false,
        short_answer: pair.answers.iter().any(|a| a.word_count() < criteria.min_words),
        length_gap: pair
            .length_gap()
            .map_or(true, |gap| gap > criteria.max_len_diff_chars),
        contains_digit: criteria.forbid_digits && pair.answers.iter().any(|a| contains_digit(&a.text)),
    }
}

/// Per-condition rejection counts. A pair failing several conditions is
/// counted under each of them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub criteria: SelectionCriteria,
    pub examples_in: usize,
    pub pairs_in: usize,
    pub examples_out: usize,
    pub pairs_out: usize,
    pub answers_out: usize,
    pub rejected_pairs: usize,
    pub rejected_too_few_answers: usize,
    pub rejected_short_answer: usize,
    pub rejected_length_gap: usize,
    pub rejected_contains_digit: usize,
}

pub fn select_pairs(dataset: &Dataset, criteria: &SelectionCriteria) -> Result<Dataset> {
    select_pairs_with_report(dataset, criteria).map(|(d, _)| d)
}

pub fn select_pairs_with_report(
    dataset: &Dataset,
    criteria: &SelectionCriteria,
) -> Result<(Dataset, SelectionReport)> {
    criteria.validate()?;
    for (_, p) in dataset.pairs() {
        p.require_labels()?;
    }

    let checked: Vec<(Example, Vec<Violations>)> = dataset
        .examples
        .par_iter()
        .map(|ex| {
            let verdicts: Vec<Violations> = ex.pairs.iter().map(|p| check_pair(p, criteria)).collect();
            let kept = Example {
                idx: ex.idx,
                text: ex.text.clone(),
                pairs: ex
                    .pairs
                    .iter()
                    .zip(&verdicts)
                    .filter(|(_, v)| !v.any())
                    .map(|(p, _)| p.clone())
                    .collect(),
            };
            (kept, verdicts)
        })
        .collect();

    let mut report = SelectionReport {
        criteria: criteria.clone(),
        examples_in: dataset.examples.len(),
        pairs_in: dataset.num_pairs(),
        ..Default::default()
    };
    let mut examples = Vec::new();
    for (ex, verdicts) in checked {
        for v in verdicts.iter().filter(|v| v.any()) {
            report.rejected_pairs += 1;
            report.rejected_too_few_answers += usize::from(v.too_few_answers);
            report.rejected_short_answer += usize::from(v.short_answer);
            report.rejected_length_gap += usize::from(v.length_gap);
            report.rejected_contains_digit += usize::from(v.contains_digit);
        }
        if !ex.pairs.is_empty() {
            examples.push(ex);
        }
    }
    let out = Dataset { examples };
    report.examples_out = out.examples.len();
    report.pairs_out = out.num_pairs();
    report.answers_out = out.num_answers();
    Ok((out, report))
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n_answers: usize,
    pub avg_answer_len: f64,
    /// Mean over pairs of the mean pairwise ROUGE-1 F1 between distinct
    /// answers of this group.
    pub intra_group_rouge1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_examples: usize,
    pub n_pairs: usize,
    pub avg_text_len: f64,
    pub true_group: GroupStats,
    pub false_group: GroupStats,
}

/// Mean pairwise ROUGE-1 over distinct members; `None` with fewer than two.
pub fn mean_pairwise_rouge1<S: AsRef<str>>(texts: &[S]) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..texts.len() {
        for j in (i + 1)..texts.len() {
            sum += rouge1(texts[i].as_ref(), texts[j].as_ref())?;
            n += 1;
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}

pub fn corpus_stats(dataset: &Dataset) -> Result<CorpusStats> {
    if dataset.examples.is_empty() {
        return Err(Error::Domain("corpus statistics of an empty dataset".into()));
    }
    let avg_text_len = dataset
        .examples
        .iter()
        .map(|e| e.text.chars().count() as f64)
        .sum::<f64>()
        / dataset.examples.len() as f64;

    let group_stats = |label: bool| -> Result<GroupStats> {
        let mut len_sum = 0usize;
        let mut n_answers = 0usize;
        let mut rouge_sum = 0.0;
        let mut rouge_pairs = 0usize;
        for (_, pair) in dataset.pairs() {
            let texts: Vec<&str> = pair.group(label).map(|a| a.text.as_str()).collect();
            n_answers += texts.len();
            len_sum += texts.iter().map(|t| t.chars().count()).sum::<usize>();
            if let Some(r) = mean_pairwise_rouge1(&texts)
                .map_err(|e| Error::Domain(format!("pair {}: {e}", pair.pair_id)))?
            {
                rouge_sum += r;
                rouge_pairs += 1;
            }
        }
        Ok(GroupStats {
            n_answers,
            avg_answer_len: if n_answers > 0 {
                len_sum as f64 / n_answers as f64
            } else {
                0.0
            },
            intra_group_rouge1: if rouge_pairs > 0 {
                rouge_sum / rouge_pairs as f64
            } else {
                0.0
            },
        })
    };

    Ok(CorpusStats {
        n_examples: dataset.examples.len(),
        n_pairs: dataset.num_pairs(),
        avg_text_len,
        true_group: group_stats(true)?,
        false_group: group_stats(false)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ans(text: &str, label: bool) -> Answer {
        Answer::new(text, label, Origin::Original)
    }

    fn pair(id: &str, answers: Vec<Answer>) -> QAPair {
        QAPair {
            pair_id: id.into(),
            question_idx: 0,
            question: "q?".into(),
            answers,
        }
    }

    fn five_words(tag: &str) -> String {
        format!("one two three four {tag}")
    }

    const FIXTURE: &str = r#"{"idx": 7, "text": "(1) First sentence. (2) Second one.", "questions": [
        {"question": "Q one?", "answers": [
            {"text": "alpha beta gamma delta eps", "label": 1},
            {"text": "alpha beta gamma delta zeta", "label": 1},
            {"text": "omega psi chi phi upsilon", "label": 0},
            {"text": "omega psi chi phi tau", "label": 0}]},
        {"question": "Q two?", "answers": [
            {"text": "a b c d e", "label": 1},
            {"text": "a b c d f", "label": 1},
            {"text": "x y z w v", "label": 0},
            {"text": "x y z w u", "label": 0}]}]}"#;

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_text("(1) The Norwegian men's team won (2) They were ahead"),
            "The Norwegian men's team won They were ahead"
        );
        assert_eq!(normalize_text("no markers here"), "no markers here");
        assert_eq!(normalize_text("(12)Start (3) mid end"), "Start mid end");
    }

    #[test]
    fn normalize_reaches_fixpoint() {
        assert_eq!(normalize_text("((1)2) x"), "x");
        assert_eq!(normalize_text("(a) (x1) ()"), "(a) (x1) ()");
    }

    #[test]
    fn parse_fixture_counts() {
        let one_line = FIXTURE.replace('\n', " ");
        let ds = parse_dataset(one_line.as_bytes(), InputFormat::Jsonl, ParseOptions::default()).unwrap();
        assert_eq!(ds.examples.len(), 1);
        assert_eq!(ds.num_pairs(), 2);
        assert_eq!(ds.num_answers(), 8);
        assert_eq!(ds.examples[0].text, "First sentence. Second one.");
        assert_eq!(ds.examples[0].pairs[1].pair_id, "7-1");
    }

    #[test]
    fn parse_empty_stream() {
        let ds = parse_dataset(&b""[..], InputFormat::Jsonl, ParseOptions::default()).unwrap();
        assert!(ds.examples.is_empty());
        let ds = parse_dataset(&b"[]"[..], InputFormat::SingleJson, ParseOptions::default()).unwrap();
        assert!(ds.examples.is_empty());
    }

    #[test]
    fn parse_id_key_and_passage_layout() {
        let src = r#"[{"id": 3, "passage": {"text": "t", "questions": [{"question": "q", "answers": [{"text": "a", "label": true}]}]}}]"#;
        let ds = parse_dataset(src.as_bytes(), InputFormat::SingleJson, ParseOptions::default()).unwrap();
        assert_eq!(ds.examples[0].idx, 3);
        assert_eq!(ds.examples[0].pairs[0].answers[0].label, Some(true));
    }

    #[test]
    fn parse_rejects_unlabeled_unless_allowed() {
        let src = r#"{"idx": 1, "text": "t", "questions": [{"question": "q", "answers": [{"text": "a"}]}]}"#;
        let err = parse_dataset(src.as_bytes(), InputFormat::Jsonl, ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let opts = ParseOptions {
            allow_unlabeled: true,
            ..Default::default()
        };
        let ds = parse_dataset(src.as_bytes(), InputFormat::Jsonl, opts).unwrap();
        assert_eq!(ds.examples[0].pairs[0].answers[0].label, None);
        let err = select_pairs(&ds, &SelectionCriteria::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn parse_error_names_record() {
        let src = "{\"idx\": 1, \"text\": \"t\", \"questions\": []}\n{not json}\n";
        match parse_dataset(src.as_bytes(), InputFormat::Jsonl, ParseOptions::default()) {
            Err(Error::Parse { record, .. }) => assert_eq!(record, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_pair_ids_rejected() {
        let src = "{\"idx\": 1, \"text\": \"t\", \"questions\": []}\n{\"idx\": 1, \"text\": \"t\", \"questions\": [{\"question\": \"q\", \"answers\": []}]}\n{\"idx\": 1, \"text\": \"t\", \"questions\": [{\"question\": \"q\", \"answers\": []}]}\n";
        assert!(matches!(
            parse_dataset(src.as_bytes(), InputFormat::Jsonl, ParseOptions::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn write_then_parse_roundtrip() {
        let one_line = FIXTURE.replace('\n', " ");
        let ds = parse_dataset(one_line.as_bytes(), InputFormat::Jsonl, ParseOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        let back = parse_dataset(&buf[..], InputFormat::Jsonl, ParseOptions::default()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn four_word_answer_excludes_pair() {
        let p = pair(
            "1-0",
            vec![
                ans("only four words here", true),
                ans(&five_words("t"), true),
                ans(&five_words("f"), false),
                ans(&five_words("g"), false),
            ],
        );
        let v = check_pair(&p, &SelectionCriteria::default());
        assert!(v.short_answer && !v.length_gap && !v.too_few_answers);
    }

    #[test]
    fn length_gap_excludes_pair() {
        // true avg 5 chars, false avg 50 chars: gap 45 > 30
        let long = "Eight words long answer that keeps going and on.";
        let long2 = "Ten words long answer that keeps going and onward";
        let p = pair(
            "1-0",
            vec![
                ans("a b c d e", true),
                ans("f g h i j", true),
                ans(long, false),
                ans(long2, false),
            ],
        );
        assert_eq!(long.chars().count(), 48);
        assert_eq!(long2.chars().count(), 49);
        let gap = p.length_gap().unwrap();
        assert!((gap - (48.5 - 9.0)).abs() < 1e-12);
        assert!(check_pair(&p, &SelectionCriteria::default()).length_gap);
    }

    #[test]
    fn digit_rule_uses_unicode_digits_only() {
        assert!(contains_digit("By 0.3 seconds."));
        assert!(contains_digit("٣ items"));
        assert!(!contains_digit("Thirty minutes, half an hour."));
    }

    #[test]
    fn per_pair_filtering_keeps_subset() {
        let good = pair(
            "1-0",
            vec![
                ans(&five_words("a"), true),
                ans(&five_words("b"), true),
                ans(&five_words("c"), false),
                ans(&five_words("d"), false),
            ],
        );
        let mut bad = good.clone();
        bad.pair_id = "1-1".into();
        bad.answers[0].text = "By 0.3 seconds and more".into();
        let only_bad = Example {
            idx: 2,
            text: "t".into(),
            pairs: vec![QAPair {
                pair_id: "2-0".into(),
                ..bad.clone()
            }],
        };
        let ds = Dataset {
            examples: vec![
                Example {
                    idx: 1,
                    text: "t".into(),
                    pairs: vec![good.clone(), bad],
                },
                only_bad,
            ],
        };
        let (out, report) = select_pairs_with_report(&ds, &SelectionCriteria::default()).unwrap();
        assert_eq!(out.examples.len(), 1);
        assert_eq!(out.examples[0].pairs, vec![good]);
        assert_eq!(report.rejected_pairs, 2);
        assert_eq!(report.rejected_contains_digit, 2);
        assert_eq!(report.pairs_out, 1);
    }

    #[test]
    fn corpus_stats_fixture() {
        let p = pair(
            "1-0",
            vec![
                ans("a b c d e", true),
                ans("a b c x y", true),
                ans("same same", false),
                ans("same same", false),
            ],
        );
        let ds = Dataset {
            examples: vec![Example {
                idx: 1,
                text: "abcd".into(),
                pairs: vec![p],
            }],
        };
        let s = corpus_stats(&ds).unwrap();
        assert_eq!(s.avg_text_len, 4.0);
        assert!((s.true_group.intra_group_rouge1 - 0.6).abs() < 1e-12);
        assert_eq!(s.false_group.intra_group_rouge1, 1.0);
        assert_eq!(s.true_group.avg_answer_len, 9.0);
        assert!(matches!(corpus_stats(&Dataset::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn criteria_validation() {
        let c = SelectionCriteria {
            min_words: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = SelectionCriteria {
            max_len_diff_chars: -1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}

use crate::error::{Error, Result};

/// Chat prompt used when collecting hidden states. The answer is the last
/// thing in the prompt, so the final token belongs to the answer.
pub const ANSWER_PROMPT_TEMPLATE: &str = include_str!("../../resources/answer_prompt.txt");

const FIELDS: [&str; 3] = ["{knowledge}", "{question}", "{answer}"];

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Instantiates the answer prompt. Substitution is single-pass: braces inside
/// the field values are copied verbatim.
pub fn build_prompt(knowledge: &str, question: &str, answer: &str) -> Result<String> {
    let values = [knowledge, question, answer];
    for (name, v) in FIELDS.iter().zip(values) {
        if v.trim().is_empty() {
            return Err(Error::Validation(format!("prompt field {name} is empty")));
        }
    }
    let mut out = String::with_capacity(ANSWER_PROMPT_TEMPLATE.len() + values.iter().map(|v| v.len()).sum::<usize>());
    let mut rest = ANSWER_PROMPT_TEMPLATE;
    for (name, v) in FIELDS.iter().zip(values) {
        let at = rest.find(name).expect("template carries every field once");
        out.push_str(&rest[..at]);
        out.push_str(v);
        rest = &rest[at + name.len()..];
    }
    out.push_str(rest);
    Ok(out)
}

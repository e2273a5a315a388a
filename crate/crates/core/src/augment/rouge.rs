use std::collections::HashMap;

use crate::error::{Error, Result};

/// Lowercases, turns every non-alphanumeric character into a space and
/// splits on whitespace. No stemming.
pub fn rouge_tokens(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

fn counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

/// ROUGE-1 F1 between two strings.
///
/// With multiset unigram overlap `o`, `P = o/|cand|`, `R = o/|ref|` and the
/// harmonic mean simplifies to `2o / (|cand| + |ref|)`.
pub fn rouge1(candidate: &str, reference: &str) -> Result<f64> {
    let cand = rouge_tokens(candidate);
    let refr = rouge_tokens(reference);
    if cand.is_empty() || refr.is_empty() {
        return Err(Error::Domain(format!(
            "ROUGE-1 of a string without tokens: {:?} / {:?}",
            candidate, reference
        )));
    }
    let cc = counts(&cand);
    let rc = counts(&refr);
    let overlap: usize = cc
        .iter()
        .map(|(tok, &n)| n.min(rc.get(tok).copied().unwrap_or(0)))
        .sum();
    Ok(2.0 * overlap as f64 / (cand.len() + refr.len()) as f64)
}

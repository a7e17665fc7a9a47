//! Answer metrics: normalized exact-match accuracy and ANLS.

use crate::error::{Error, Result};

/// Default cut-off above which a normalized distance earns no credit.
pub const ANLS_THRESHOLD: f64 = 0.5;

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the longer length; 0 for two empty strings.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / longest as f64
}

/// Lowercase, trim, and collapse whitespace runs to one space.
pub fn normalize_answer(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn normalize_for_match(s: &str) -> String {
    normalize_answer(s)
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}

fn require_golds(golds: &[String]) -> Result<()> {
    if golds.is_empty() {
        Err(Error::Argument("at least one gold answer is required".into()))
    } else {
        Ok(())
    }
}

/// Best thresholded similarity between `prediction` and any gold answer.
pub fn anls_score(prediction: &str, golds: &[String], threshold: f64) -> Result<f64> {
    require_golds(golds)?;
    let pred = normalize_answer(prediction);
    Ok(golds
        .iter()
        .map(|g| {
            let nl = normalized_levenshtein(&pred, &normalize_answer(g));
            if nl < threshold {
                1.0 - nl
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max))
}

/// 1 when the prediction equals some gold answer after normalization and
/// stripping of surrounding punctuation, else 0.
pub fn accuracy_match(prediction: &str, golds: &[String]) -> Result<u8> {
    require_golds(golds)?;
    let pred = normalize_for_match(prediction);
    Ok(u8::from(golds.iter().any(|g| normalize_for_match(g) == pred)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golds(g: &[&str]) -> Vec<String> {
        g.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn distance_basics() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("ü", "u"), 1);
    }

    #[test]
    fn normalized_examples() {
        assert_eq!(normalized_levenshtein("manchester", "manchester"), 0.0);
        assert!((normalized_levenshtein("mancester", "manchester") - 0.1).abs() < 1e-12);
        assert_eq!(normalized_levenshtein("", "abc"), 1.0);
        assert_eq!(normalized_levenshtein("", ""), 0.0);
        // counted in scalar values, not bytes
        assert_eq!(normalized_levenshtein("日本", "日木"), 0.5);
    }

    #[test]
    fn anls_examples() {
        assert_eq!(anls_score("Manchester", &golds(&["manchester"]), ANLS_THRESHOLD).unwrap(), 1.0);
        let s = anls_score("mancester", &golds(&["manchester"]), ANLS_THRESHOLD).unwrap();
        assert!((s - 0.9).abs() < 1e-9);
        assert_eq!(anls_score("abc", &golds(&["xyz"]), ANLS_THRESHOLD).unwrap(), 0.0);
        // exactly at the threshold earns nothing
        assert_eq!(anls_score("ab", &golds(&["cb"]), ANLS_THRESHOLD).unwrap(), 0.0);
        assert_eq!(
            anls_score("  Half   PRICE ", &golds(&["nope", "half price"]), ANLS_THRESHOLD).unwrap(),
            1.0
        );
        assert!(anls_score("x", &[], ANLS_THRESHOLD).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy_match("half price", &golds(&["half price"])).unwrap(), 1);
        assert_eq!(accuracy_match("Half Price.", &golds(&["half price"])).unwrap(), 1);
        assert_eq!(accuracy_match("half", &golds(&["half price"])).unwrap(), 0);
        assert_eq!(accuracy_match("\"(Half price)!\"", &golds(&["half price"])).unwrap(), 1);
        assert!(accuracy_match("x", &[]).is_err());
    }
}

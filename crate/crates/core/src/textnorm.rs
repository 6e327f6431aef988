//! Text normalization applied before WER and list statistics.
//!
//! Two frozen rule sets:
//!
//! * [`normalize_eval`] (scoring): lowercase, keep letters and digits of any
//!   script plus apostrophes that sit between two alphanumerics; every other
//!   character (punctuation, symbols, hyphens) separates words.
//! * [`normalize_stats`] (list diversity): lowercase ASCII letters, digits and
//!   spaces only. Hyphens and whitespace separate words; every other
//!   character is dropped, so `it's` becomes `its`.
//!
//! Numerals are kept verbatim. Both functions are idempotent.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    Eval,
    Stats,
}

pub fn normalize(text: &str, mode: NormMode) -> String {
    match mode {
        NormMode::Eval => normalize_eval(text),
        NormMode::Stats => normalize_stats(text),
    }
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{02BC}')
}

pub fn normalize_eval(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut words: Vec<String> = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            // Some lowercase mappings emit combining marks; drop them.
            cur.extend(c.to_lowercase().filter(|l| l.is_alphanumeric()));
            continue;
        }
        if is_apostrophe(c) {
            let prev_ok = i > 0 && chars[i - 1].is_alphanumeric();
            let next_ok = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            if prev_ok && next_ok {
                cur.push('\'');
                continue;
            }
        }
        if !cur.is_empty() {
            words.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words.join(" ")
}

pub fn normalize_stats(text: &str) -> String {
    let mut words: Vec<String> = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_whitespace() || c == '-' {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let c = c.to_ascii_lowercase();
        if c.is_ascii_lowercase() || c.is_ascii_digit() {
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words.join(" ")
}

/// Whitespace tokenization of already-normalized text.
pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference table of hand-applied rule outcomes.
    const EVAL_CASES: &[(&str, &str)] = &[
        ("The gut, and the gullet.", "the gut and the gullet"),
        ("", ""),
        ("it's  A  TEST!", "it's a test"),
        ("'quoted' words", "quoted words"),
        ("dogs' bowls", "dogs bowls"),
        ("well-known", "well known"),
        ("  lots\tof \n space ", "lots of space"),
        ("Ünïcode Ärger", "ünïcode ärger"),
        ("room 101.", "room 101"),
        ("don\u{2019}t", "don't"),
    ];

    const STATS_CASES: &[(&str, &str)] = &[
        ("it's a test", "its a test"),
        ("Hello, 世界 2024!", "hello 2024"),
        ("a   b", "a b"),
        ("Well-Known", "well known"),
        ("café", "caf"),
        ("", ""),
    ];

    #[test]
    fn eval_table() {
        for (input, want) in EVAL_CASES {
            assert_eq!(normalize_eval(input), *want, "input {input:?}");
        }
    }

    #[test]
    fn stats_table() {
        for (input, want) in STATS_CASES {
            assert_eq!(normalize_stats(input), *want, "input {input:?}");
        }
    }

    #[test]
    fn idempotent_on_table() {
        for (input, _) in EVAL_CASES.iter().chain(STATS_CASES) {
            let e = normalize_eval(input);
            assert_eq!(normalize_eval(&e), e);
            let s = normalize_stats(input);
            assert_eq!(normalize_stats(&s), s);
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn eval_idempotent(s in "\\PC{0,40}") {
                let once = normalize_eval(&s);
                prop_assert_eq!(normalize_eval(&once), once);
            }

            #[test]
            fn stats_idempotent_and_closed(s in "\\PC{0,40}") {
                let once = normalize_stats(&s);
                prop_assert!(once.chars().all(|c| c == ' ' || c.is_ascii_lowercase() || c.is_ascii_digit()));
                prop_assert!(!once.starts_with(' ') && !once.ends_with(' ') && !once.contains("  "));
                prop_assert_eq!(normalize_stats(&once), once);
            }

            #[test]
            fn eval_idempotent_apostrophe_heavy(s in "[a'b ’,.-]{0,30}") {
                let once = normalize_eval(&s);
                prop_assert_eq!(normalize_eval(&once), once);
            }
        }
    }
}

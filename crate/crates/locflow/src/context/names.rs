use std::collections::BTreeSet;

use crate::features::SparseFeatureVector;

/// Binary `name:<word>` features for every wordlist word found in the app
/// name. Words are found by camel-case/delimiter splitting and, within each
/// resulting run, greedy longest-match dictionary segmentation (which also
/// covers runs that are exactly one word).
pub fn name_features(app_name: &str, wordlist: &[String]) -> SparseFeatureVector {
    let dictionary: BTreeSet<&str> = wordlist.iter().map(String::as_str).collect();
    let max_len = dictionary.iter().map(|w| w.len()).max().unwrap_or(0);
    let mut out = SparseFeatureVector::new();
    for run in split_runs(app_name) {
        for word in segment_greedy(&run, &dictionary, max_len) {
            out.set_binary(format!("name:{word}"));
        }
    }
    out
}

/// Split on non-alphanumeric delimiters and camel-case boundaries
/// ("LocalWeather" → ["local", "weather"], "HTTPServer" → ["http", "server"]),
/// lowercasing the result.
fn split_runs(name: &str) -> Vec<String> {
    let mut runs = Vec::new();
    let mut current = String::new();
    let mut prev: Option<char> = None;
    let mut chars = name.chars().peekable();
    while let Some(c) = chars.next() {
        if !c.is_alphanumeric() {
            if !current.is_empty() {
                runs.push(std::mem::take(&mut current));
            }
            prev = None;
            continue;
        }
        let boundary = match prev {
            Some(p) => {
                (p.is_lowercase() && c.is_uppercase())
                    || (p.is_uppercase()
                        && c.is_uppercase()
                        && chars.peek().is_some_and(|n| n.is_lowercase()))
            }
            None => false,
        };
        if boundary && !current.is_empty() {
            runs.push(std::mem::take(&mut current));
        }
        current.extend(c.to_lowercase());
        prev = Some(c);
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs
}

fn segment_greedy<'a>(
    run: &'a str,
    dictionary: &BTreeSet<&'a str>,
    max_len: usize,
) -> Vec<&'a str> {
    let mut found = Vec::new();
    let bytes = run.as_bytes();
    let mut pos = 0;
    while pos < bytes.len() {
        let mut matched = None;
        let upper = max_len.min(bytes.len() - pos);
        for len in (1..=upper).rev() {
            if !run.is_char_boundary(pos) || !run.is_char_boundary(pos + len) {
                continue;
            }
            let candidate = &run[pos..pos + len];
            if dictionary.contains(candidate) {
                matched = Some(candidate);
                break;
            }
        }
        match matched {
            Some(word) => {
                found.push(word);
                pos += word.len();
            }
            None => pos += 1,
        }
    }
    found
}

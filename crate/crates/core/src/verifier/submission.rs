//! Parsing of free-text submissions made through `SubmitResult`.
//!
//! Submissions are `key: value` lines. Keys are case-insensitive and may be
//! wrapped in backticks or list bullets; later lines override earlier ones.

use std::collections::BTreeMap;

pub fn fields(content: &str) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for line in content.lines() {
        let line = line
            .trim()
            .trim_start_matches(['-', '*'])
            .trim()
            .trim_matches('`');
        if let Some((k, v)) = line.split_once(':') {
            let key = k.trim().trim_matches(['`', '*']).trim().to_lowercase();
            if !key.is_empty() {
                out.insert(key, v.trim().trim_matches('`').trim().to_string());
            }
        }
    }
    out
}

/// Comma-separated list, blank entries dropped.
pub fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|x| x.trim().trim_end_matches('.').trim().to_string())
        .filter(|x| !x.is_empty())
        .collect()
}

/// `name=value` pairs separated by `;` or newlines.
pub fn pairs(value: &str) -> BTreeMap<String, String> {
    value
        .split([';', '\n'])
        .filter_map(|seg| seg.split_once('='))
        .map(|(k, v)| {
            (
                k.trim().trim_start_matches(['-', '*']).trim().to_string(),
                v.trim().to_string(),
            )
        })
        .filter(|(k, _)| !k.is_empty())
        .collect()
}

/// Number with optional thousands separators, currency sign or percent.
pub fn number(value: &str) -> Option<f64> {
    let cleaned: String = value
        .trim()
        .trim_end_matches('.')
        .chars()
        .filter(|c| !matches!(c, ',' | '$' | '%' | ' '))
        .collect();
    let cleaned = cleaned.trim_end_matches("USD").trim_end_matches("usd");
    cleaned.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Normal form used for exact text comparison: no whitespace, lowercase,
/// no trailing period.
pub fn canon(value: &str) -> String {
    value
        .trim()
        .trim_end_matches('.')
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_lowercase()
}

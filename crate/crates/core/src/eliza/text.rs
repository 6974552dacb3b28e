//! Input normalization and reply assembly.

use std::collections::HashMap;

use super::script::{ElizaScript, TemplatePiece};

const CLAUSE_SEPARATORS: &[char] = &['.', ',', '!', '?', ';', ':'];

/// A clause is a run of lowercase tokens between separators.
pub type Clause = Vec<String>;

/// Lowercases `input`, splits it into clauses and applies the script's
/// pre-substitutions token by token.
///
/// Characters outside `[a-z0-9' ]` are either clause separators (`.,!?;:`)
/// or dropped. Whitespace of any kind counts as a space, and typographic
/// apostrophes are folded to `'` so contractions survive.
pub fn preprocess(input: &str, script: &ElizaScript) -> Vec<Clause> {
    preprocess_with(input, &script.pre_substitutions)
}

pub(crate) fn preprocess_with(input: &str, pre: &HashMap<String, String>) -> Vec<Clause> {
    let mut clauses = Vec::new();
    let mut current = String::new();
    for c in input.chars().flat_map(char::to_lowercase) {
        let c = if c == '\u{2019}' { '\'' } else { c };
        if CLAUSE_SEPARATORS.contains(&c) {
            push_clause(&mut clauses, &current, pre);
            current.clear();
        } else if c.is_whitespace() {
            current.push(' ');
        } else if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '\'' {
            current.push(c);
        }
    }
    push_clause(&mut clauses, &current, pre);
    clauses
}

fn push_clause(clauses: &mut Vec<Clause>, text: &str, pre: &HashMap<String, String>) {
    let mut clause = Vec::new();
    for word in text.split_whitespace() {
        match pre.get(word) {
            Some(sub) => clause.extend(sub.split_whitespace().map(str::to_lowercase)),
            None => clause.push(word.to_string()),
        }
    }
    if !clause.is_empty() {
        clauses.push(clause);
    }
}

/// Fills a reassembly template from decomposition captures.
///
/// Each `%n` takes capture `n` with post-substitutions applied word by word.
/// The result is single-spaced, has no space before closing punctuation, and
/// starts with a capital letter.
///
/// Panics if a placeholder is outside `1..=captures.len()`; script
/// validation rules this out for parsed scripts.
pub fn assemble(pieces: &[TemplatePiece], captures: &[String], post: &HashMap<String, String>) -> String {
    let mut raw = String::new();
    for piece in pieces {
        match piece {
            TemplatePiece::Text(text) => raw.push_str(text),
            TemplatePiece::Capture(n) => {
                assert!(
                    (1..=captures.len()).contains(n),
                    "placeholder %{n} outside 1..={}",
                    captures.len()
                );
                let reflected: Vec<&str> = captures[n - 1]
                    .split_whitespace()
                    .map(|w| post.get(w).map(String::as_str).unwrap_or(w))
                    .collect();
                raw.push_str(&reflected.join(" "));
            }
        }
    }
    tidy(&raw)
}

fn tidy(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        let closing = word.chars().all(|c| matches!(c, '?' | '.' | '!' | ','));
        if !out.is_empty() && !closing {
            out.push(' ');
        }
        out.push_str(word);
    }
    capitalize(&out)
}

fn capitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

//! Decomposition matching.

use std::collections::BTreeMap;

use super::script::PatternToken;

/// Matches `clause` against `pattern`, returning one capture per pattern token.
///
/// Literal and group tokens capture the word they matched. A wildcard
/// captures its span joined by single spaces, possibly empty. Wildcards are
/// resolved left to right, each taking the shortest span that still lets the
/// rest of the pattern match.
pub fn match_decomposition(
    pattern: &[PatternToken],
    clause: &[String],
    groups: &BTreeMap<String, Vec<String>>,
) -> Option<Vec<String>> {
    let mut spans = Vec::with_capacity(pattern.len());
    if match_from(pattern, clause, groups, &mut spans) {
        Some(
            spans
                .into_iter()
                .map(|(start, end)| clause[start..end].join(" "))
                .collect(),
        )
    } else {
        None
    }
}

// `spans` accumulates (start, end) word ranges into the original clause, so
// offsets are tracked relative to the full clause length.
fn match_from(
    pattern: &[PatternToken],
    rest: &[String],
    groups: &BTreeMap<String, Vec<String>>,
    spans: &mut Vec<(usize, usize)>,
) -> bool {
    let offset = spans.last().map_or(0, |&(_, end)| end);
    let Some((token, tail)) = pattern.split_first() else {
        return rest.is_empty();
    };
    match token {
        PatternToken::Wildcard => {
            for take in 0..=rest.len() {
                spans.push((offset, offset + take));
                if match_from(tail, &rest[take..], groups, spans) {
                    return true;
                }
                spans.pop();
            }
            false
        }
        PatternToken::Literal(word) => {
            single_word(rest, |w| w == word, offset, tail, groups, spans)
        }
        PatternToken::Group(name) => {
            let members = groups.get(name).map(Vec::as_slice).unwrap_or_default();
            single_word(rest, |w| members.iter().any(|m| m == w), offset, tail, groups, spans)
        }
    }
}

fn single_word(
    rest: &[String],
    accepts: impl Fn(&str) -> bool,
    offset: usize,
    tail: &[PatternToken],
    groups: &BTreeMap<String, Vec<String>>,
    spans: &mut Vec<(usize, usize)>,
) -> bool {
    match rest.first() {
        Some(word) if accepts(word) => {
            spans.push((offset, offset + 1));
            if match_from(tail, &rest[1..], groups, spans) {
                true
            } else {
                spans.pop();
                false
            }
        }
        _ => false,
    }
}

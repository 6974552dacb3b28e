//! ELIZA script documents: the JSON schema, parsing, and validation.
//!
//! A script is a JSON object whose top-level fields mirror [`ElizaScript`].
//! Patterns are written as space-separated tokens (`"* i am *"`), where `*`
//! is a wildcard and `@name` refers to a synonym group. Reassembly templates
//! reference pattern tokens by 1-based index (`%4`), or redirect to another
//! keyword with `goto <key>`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use super::ScriptError;

/// The DOCTOR script shipped with the crate.
pub const DOCTOR_SCRIPT: &str = include_str!("../../data/doctor.json");

/// One token of a decomposition pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternToken {
    /// Matches a span of zero or more words.
    Wildcard,
    /// Matches exactly this (lowercase) word.
    Literal(String),
    /// Matches any single word belonging to the named synonym group.
    Group(String),
}

impl PatternToken {
    fn parse(raw: &str) -> Self {
        if raw == "*" {
            PatternToken::Wildcard
        } else if let Some(group) = raw.strip_prefix('@') {
            PatternToken::Group(group.to_lowercase())
        } else {
            PatternToken::Literal(raw.to_lowercase())
        }
    }
}

/// A piece of reassembly text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplatePiece {
    Text(String),
    /// 1-based index into the decomposition captures.
    Capture(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reassembly {
    Template(Vec<TemplatePiece>),
    Goto(String),
}

impl Reassembly {
    fn parse(raw: &str) -> Self {
        let trimmed = raw.trim();
        if let Some(target) = trimmed.strip_prefix("goto ") {
            return Reassembly::Goto(target.trim().to_lowercase());
        }
        let mut pieces = Vec::new();
        let mut text = String::new();
        let mut chars = trimmed.chars().peekable();
        while let Some(c) = chars.next() {
            if c == '%' && chars.peek().is_some_and(|d| d.is_ascii_digit()) {
                let mut digits = String::new();
                while let Some(d) = chars.peek().copied().filter(char::is_ascii_digit) {
                    digits.push(d);
                    chars.next();
                }
                if !text.is_empty() {
                    pieces.push(TemplatePiece::Text(std::mem::take(&mut text)));
                }
                // digit-only strings always parse; overflow saturates and fails validation
                pieces.push(TemplatePiece::Capture(digits.parse().unwrap_or(usize::MAX)));
            } else {
                text.push(c);
            }
        }
        if !text.is_empty() {
            pieces.push(TemplatePiece::Text(text));
        }
        Reassembly::Template(pieces)
    }

    pub fn is_goto(&self) -> bool {
        matches!(self, Reassembly::Goto(_))
    }

    fn max_capture(&self) -> Option<usize> {
        match self {
            Reassembly::Goto(_) => None,
            Reassembly::Template(pieces) => pieces
                .iter()
                .filter_map(|p| match p {
                    TemplatePiece::Capture(n) => Some(*n),
                    TemplatePiece::Text(_) => None,
                })
                .max(),
        }
    }
}

/// A decomposition pattern and the templates used to answer it.
///
/// The reassembly cursor lives in the engine state, not here, so a parsed
/// script can be shared between sessions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompRule {
    pub pattern: Vec<PatternToken>,
    pub reassembly: Vec<Reassembly>,
}

impl DecompRule {
    /// True when every template is plain text (no `goto`).
    pub fn is_plain(&self) -> bool {
        self.reassembly.iter().all(|r| !r.is_goto())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordEntry {
    pub key: String,
    pub rank: u32,
    pub rules: Vec<DecompRule>,
    pub is_memory_trigger: bool,
}

/// A parsed and validated ELIZA script.
#[derive(Debug, Clone, PartialEq)]
pub struct ElizaScript {
    pub initial_greeting: String,
    pub final_message: String,
    pub quit_words: Vec<String>,
    pub pre_substitutions: HashMap<String, String>,
    pub post_substitutions: HashMap<String, String>,
    pub synonym_groups: BTreeMap<String, Vec<String>>,
    pub keywords: Vec<KeywordEntry>,
    pub none_responses: Vec<String>,
    pub memory_keyword: Option<String>,
    pub memory_rules: Vec<DecompRule>,
    index: HashMap<String, usize>,
}

impl ElizaScript {
    /// Parses the bundled DOCTOR script.
    pub fn doctor() -> Self {
        parse_script(DOCTOR_SCRIPT).expect("bundled DOCTOR script is valid")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        parse_script(&text)
    }

    pub fn keyword(&self, key: &str) -> Option<&KeywordEntry> {
        self.index.get(key).map(|&i| &self.keywords[i])
    }

    pub(crate) fn keyword_index(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn group(&self, name: &str) -> Option<&[String]> {
        self.synonym_groups.get(name).map(Vec::as_slice)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    #[serde(default)]
    initial_greeting: String,
    #[serde(default)]
    final_message: String,
    #[serde(default)]
    quit_words: Vec<String>,
    #[serde(default)]
    pre_substitutions: HashMap<String, String>,
    #[serde(default)]
    post_substitutions: HashMap<String, String>,
    #[serde(default)]
    synonym_groups: BTreeMap<String, Vec<String>>,
    keywords: Vec<RawKeyword>,
    none_responses: Vec<String>,
    #[serde(default)]
    memory_keyword: Option<String>,
    #[serde(default)]
    memory_rules: Vec<RawRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKeyword {
    key: String,
    #[serde(default)]
    rank: u32,
    #[serde(default)]
    rules: Vec<RawRule>,
    /// Substitution-only entries forward to another keyword.
    #[serde(default)]
    goto: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    pattern: String,
    reassembly: Vec<String>,
}

pub(crate) fn parse_template(raw: &str) -> Reassembly {
    Reassembly::parse(raw)
}

/// Parses and validates a script document.
pub fn parse_script(document: &str) -> Result<ElizaScript, ScriptError> {
    let raw: RawScript = serde_json::from_str(document).map_err(|e| ScriptError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let memory_keyword = raw.memory_keyword.map(|k| k.to_lowercase());
    let mut keywords = Vec::with_capacity(raw.keywords.len());
    let mut index = HashMap::new();
    for (i, kw) in raw.keywords.into_iter().enumerate() {
        if kw.key.is_empty() || kw.key != kw.key.to_lowercase() || kw.key.contains(char::is_whitespace) {
            return Err(ScriptError::InvalidKeyword(kw.key));
        }
        if index.insert(kw.key.clone(), i).is_some() {
            return Err(ScriptError::DuplicateKeyword(kw.key));
        }
        let mut rules: Vec<DecompRule> = kw.rules.into_iter().map(convert_rule).collect();
        match (kw.goto, rules.is_empty()) {
            (Some(target), true) => rules.push(DecompRule {
                pattern: vec![PatternToken::Wildcard],
                reassembly: vec![Reassembly::Goto(target.to_lowercase())],
            }),
            (Some(_), false) => {
                return Err(ScriptError::Invalid {
                    context: kw.key,
                    message: "a keyword has either rules or a goto, not both".into(),
                })
            }
            (None, true) => return Err(ScriptError::NoRules(kw.key)),
            (None, false) => {}
        }
        keywords.push(KeywordEntry {
            is_memory_trigger: memory_keyword.as_deref() == Some(kw.key.as_str()),
            key: kw.key,
            rank: kw.rank,
            rules,
        });
    }

    if raw.none_responses.is_empty() {
        return Err(ScriptError::Invalid {
            context: "none_responses".into(),
            message: "at least one fallback response is required".into(),
        });
    }

    let script = ElizaScript {
        initial_greeting: raw.initial_greeting,
        final_message: raw.final_message,
        quit_words: raw.quit_words.iter().map(|w| w.to_lowercase()).collect(),
        pre_substitutions: lowercase_keys(raw.pre_substitutions),
        post_substitutions: lowercase_keys(raw.post_substitutions),
        synonym_groups: raw
            .synonym_groups
            .into_iter()
            .map(|(k, v)| (k.to_lowercase(), v.iter().map(|w| w.to_lowercase()).collect()))
            .collect(),
        keywords,
        none_responses: raw.none_responses,
        memory_keyword,
        memory_rules: raw.memory_rules.into_iter().map(convert_rule).collect(),
        index,
    };
    validate(&script)?;
    Ok(script)
}

fn lowercase_keys(map: HashMap<String, String>) -> HashMap<String, String> {
    map.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect()
}

fn convert_rule(raw: RawRule) -> DecompRule {
    DecompRule {
        pattern: raw.pattern.split_whitespace().map(PatternToken::parse).collect(),
        reassembly: raw.reassembly.iter().map(|r| Reassembly::parse(r)).collect(),
    }
}

fn validate(script: &ElizaScript) -> Result<(), ScriptError> {
    let keyword_rules = script
        .keywords
        .iter()
        .flat_map(|kw| kw.rules.iter().map(move |r| (kw.key.as_str(), r)));
    let memory_rules = script.memory_rules.iter().map(|r| ("memory_rules", r));

    for (context, rule) in keyword_rules.chain(memory_rules) {
        if rule.pattern.is_empty() {
            return Err(ScriptError::Invalid {
                context: context.into(),
                message: "empty decomposition pattern".into(),
            });
        }
        if rule.reassembly.is_empty() {
            return Err(ScriptError::EmptyReassembly(context.into()));
        }
        for token in &rule.pattern {
            if let PatternToken::Group(group) = token {
                if !script.synonym_groups.contains_key(group) {
                    return Err(ScriptError::UnknownGroup {
                        keyword: context.into(),
                        group: group.clone(),
                    });
                }
            }
        }
        for reassembly in &rule.reassembly {
            if let Reassembly::Goto(target) = reassembly {
                if !script.index.contains_key(target) {
                    return Err(ScriptError::DanglingGoto {
                        keyword: context.into(),
                        target: target.clone(),
                    });
                }
            }
            if let Some(n) = reassembly.max_capture() {
                if n > rule.pattern.len() {
                    return Err(ScriptError::PlaceholderOutOfRange {
                        keyword: context.into(),
                        index: n,
                        pattern_len: rule.pattern.len(),
                    });
                }
            }
            let has_zero = matches!(reassembly, Reassembly::Template(p) if p.contains(&TemplatePiece::Capture(0)));
            if has_zero {
                return Err(ScriptError::PlaceholderOutOfRange {
                    keyword: context.into(),
                    index: 0,
                    pattern_len: rule.pattern.len(),
                });
            }
        }
    }

    if script.memory_rules.iter().any(|r| !r.is_plain()) {
        return Err(ScriptError::Invalid {
            context: "memory_rules".into(),
            message: "memory templates cannot use goto".into(),
        });
    }
    for response in &script.none_responses {
        if !matches!(parse_template(response), Reassembly::Template(p) if p.iter().all(|p| matches!(p, TemplatePiece::Text(_)))) {
            return Err(ScriptError::Invalid {
                context: "none_responses".into(),
                message: format!("`{response}` must be plain text"),
            });
        }
    }
    if let Some(mem) = &script.memory_keyword {
        if script.memory_rules.is_empty() {
            return Err(ScriptError::Invalid {
                context: mem.clone(),
                message: "memory keyword declared without memory_rules".into(),
            });
        }
    }
    Ok(())
}

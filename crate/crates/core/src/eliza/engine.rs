use std::collections::VecDeque;
use std::sync::Arc;

use super::pattern::match_decomposition;
use super::script::{ElizaScript, Reassembly};
use super::text::{assemble, preprocess, Clause};
use super::EngineError;

/// Maximum number of deferred memory sentences.
pub const MEMORY_CAPACITY: usize = 4;

/// Maximum number of `goto` hops followed while answering one input.
pub const MAX_GOTO_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub text: String,
    pub session_end: bool,
    /// The keyword whose rules produced the reply, if any. Memory recall and
    /// fallback responses leave this empty.
    pub matched_key: Option<String>,
}

/// One conversation's worth of ELIZA state.
///
/// The script is shared; everything mutable (reassembly cursors, the memory
/// queue, the ended flag) is owned here, so two states built from the same
/// script never influence each other.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineState {
    script: Arc<ElizaScript>,
    seed: u64,
    cursors: Vec<Vec<usize>>,
    memory_cursors: Vec<usize>,
    none_cursor: usize,
    memory: VecDeque<String>,
    ended: bool,
}

impl EngineState {
    pub fn new(script: Arc<ElizaScript>, seed: u64) -> Self {
        let cursors = script.keywords.iter().map(|k| vec![0; k.rules.len()]).collect();
        let memory_cursors = vec![0; script.memory_rules.len()];
        Self {
            script,
            seed,
            cursors,
            memory_cursors,
            none_cursor: 0,
            memory: VecDeque::with_capacity(MEMORY_CAPACITY + 1),
            ended: false,
        }
    }

    pub fn script(&self) -> &Arc<ElizaScript> {
        &self.script
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_ended(&self) -> bool {
        self.ended
    }

    pub fn memory(&self) -> impl Iterator<Item = &str> {
        self.memory.iter().map(String::as_str)
    }

    pub fn memory_len(&self) -> usize {
        self.memory.len()
    }

    /// Returns the state to how [`EngineState::new`] left it, keeping the
    /// script and seed.
    pub fn reset(&mut self) {
        *self = Self::new(Arc::clone(&self.script), self.seed);
    }

    pub fn respond(&mut self, input: &str) -> Result<Reply, EngineError> {
        if self.ended {
            return Err(EngineError::Ended);
        }
        let script = Arc::clone(&self.script);
        let clauses = preprocess(input, &script);

        let quits = clauses.iter().flatten().any(|t| script.quit_words.contains(t));
        if quits {
            self.ended = true;
            return Ok(Reply {
                text: script.final_message.clone(),
                session_end: true,
                matched_key: None,
            });
        }

        if let Some(clause) = select_clause(&script, &clauses) {
            if let Some(mem) = &script.memory_keyword {
                if clause.contains(mem) {
                    self.remember(clause);
                }
            }
            for idx in keyword_stack(&script, clause) {
                if let Some(text) = self.apply(idx, clause, 0)? {
                    return Ok(Reply {
                        text,
                        session_end: false,
                        matched_key: Some(script.keywords[idx].key.clone()),
                    });
                }
            }
        }

        let text = match self.memory.pop_front() {
            Some(recalled) => recalled,
            None => {
                let text = assemble_plain(&script.none_responses[self.none_cursor]);
                self.none_cursor = (self.none_cursor + 1) % script.none_responses.len();
                text
            }
        };
        Ok(Reply {
            text,
            session_end: false,
            matched_key: None,
        })
    }

    /// Runs one keyword's rules against an already-preprocessed clause,
    /// bypassing keyword scanning. Advances cursors exactly as
    /// [`EngineState::respond`] would.
    ///
    /// Returns `Ok(None)` if the keyword is unknown or no rule matches.
    pub fn apply_keyword(&mut self, key: &str, clause: &[String]) -> Result<Option<String>, EngineError> {
        match self.script.keyword_index(key) {
            Some(idx) => self.apply(idx, clause, 0),
            None => Ok(None),
        }
    }

    fn apply(&mut self, idx: usize, clause: &[String], depth: usize) -> Result<Option<String>, EngineError> {
        let script = Arc::clone(&self.script);
        let entry = &script.keywords[idx];
        if depth > MAX_GOTO_DEPTH {
            return Err(EngineError::GotoDepthExceeded {
                key: entry.key.clone(),
            });
        }
        for (ri, rule) in entry.rules.iter().enumerate() {
            let Some(captures) = match_decomposition(&rule.pattern, clause, &script.synonym_groups) else {
                continue;
            };
            let cursor = &mut self.cursors[idx][ri];
            let chosen = &rule.reassembly[*cursor];
            *cursor = (*cursor + 1) % rule.reassembly.len();
            return match chosen {
                Reassembly::Template(pieces) => {
                    Ok(Some(assemble(pieces, &captures, &script.post_substitutions)))
                }
                Reassembly::Goto(target) => {
                    // validated at parse time
                    let next = script.keyword_index(target).expect("goto target exists");
                    self.apply(next, clause, depth + 1)
                }
            };
        }
        Ok(None)
    }

    fn remember(&mut self, clause: &[String]) {
        let script = Arc::clone(&self.script);
        for (ri, rule) in script.memory_rules.iter().enumerate() {
            let Some(captures) = match_decomposition(&rule.pattern, clause, &script.synonym_groups) else {
                continue;
            };
            let cursor = &mut self.memory_cursors[ri];
            let chosen = &rule.reassembly[*cursor];
            *cursor = (*cursor + 1) % rule.reassembly.len();
            if let Reassembly::Template(pieces) = chosen {
                self.memory
                    .push_back(assemble(pieces, &captures, &script.post_substitutions));
                while self.memory.len() > MEMORY_CAPACITY {
                    self.memory.pop_front();
                }
            }
            return;
        }
    }
}

fn assemble_plain(text: &str) -> String {
    match super::script::parse_template(text) {
        Reassembly::Template(pieces) => assemble(&pieces, &[], &Default::default()),
        Reassembly::Goto(_) => text.to_string(),
    }
}

/// The clause holding the highest-ranked keyword; earlier clauses win ties.
fn select_clause<'a>(script: &ElizaScript, clauses: &'a [Clause]) -> Option<&'a Clause> {
    let mut best: Option<(u32, &Clause)> = None;
    for clause in clauses {
        for token in clause {
            if let Some(entry) = script.keyword(token) {
                if best.is_none_or(|(rank, _)| entry.rank > rank) {
                    best = Some((entry.rank, clause));
                }
            }
        }
    }
    best.map(|(_, clause)| clause)
}

/// Keyword indices present in `clause`, highest rank first, ties in order of
/// first appearance.
fn keyword_stack(script: &ElizaScript, clause: &[String]) -> Vec<usize> {
    let mut stack: Vec<usize> = Vec::new();
    for token in clause {
        if let Some(idx) = script.keyword_index(token) {
            if !stack.contains(&idx) {
                stack.push(idx);
            }
        }
    }
    // stable sort keeps appearance order within a rank
    stack.sort_by(|&a, &b| script.keywords[b].rank.cmp(&script.keywords[a].rank));
    stack
}

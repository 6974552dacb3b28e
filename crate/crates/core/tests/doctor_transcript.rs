use std::collections::HashSet;
use std::sync::Arc;

use eca_core::eliza::{EngineState, ElizaScript, PatternToken, Reassembly};

const TRANSCRIPT: &str = include_str!("data/doctor_transcript.tsv");

fn transcript() -> Vec<(&'static str, &'static str)> {
    TRANSCRIPT
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split_once('\t').expect("input<TAB>expected"))
        .collect()
}

#[test]
fn transcript_matches_exactly() {
    let lines = transcript();
    assert!(lines.len() >= 30);
    let mut engine = EngineState::new(Arc::new(ElizaScript::doctor()), 0);
    for (i, (input, expected)) in lines.iter().enumerate() {
        let reply = engine.respond(input).unwrap();
        assert_eq!(reply.text, *expected, "turn {} ({input:?})", i + 1);
        assert_eq!(reply.session_end, i + 1 == lines.len());
    }
    assert!(engine.is_ended());
}

#[test]
fn transcript_is_reproducible() {
    let run = |seed| {
        let mut engine = EngineState::new(Arc::new(ElizaScript::doctor()), seed);
        transcript()
            .iter()
            .map(|(input, _)| engine.respond(input).unwrap().text)
            .collect::<Vec<_>>()
    };
    assert_eq!(run(1), run(99));
}

/// A clause the pattern matches: wildcards become a filler word, groups
/// their first member.
fn witness(pattern: &[PatternToken], script: &ElizaScript) -> Vec<String> {
    pattern
        .iter()
        .map(|t| match t {
            PatternToken::Wildcard => "zzz".to_string(),
            PatternToken::Literal(w) => w.clone(),
            PatternToken::Group(g) => script.synonym_groups[g][0].clone(),
        })
        .collect()
}

#[test]
fn every_plain_rule_cycles_through_its_templates() {
    let script = Arc::new(ElizaScript::doctor());
    let mut checked = 0;
    for entry in &script.keywords {
        for (ri, rule) in entry.rules.iter().enumerate() {
            if !rule.is_plain() {
                continue;
            }
            let clause = witness(&rule.pattern, &script);
            let shadowed = entry.rules[..ri].iter().any(|earlier| {
                eca_core::eliza::match_decomposition(&earlier.pattern, &clause, &script.synonym_groups).is_some()
            });
            assert!(!shadowed, "{}: rule {ri} is unreachable with {clause:?}", entry.key);

            let k = rule.reassembly.len();
            let mut engine = EngineState::new(Arc::clone(&script), 0);
            let replies: Vec<String> = (0..=k)
                .map(|_| engine.apply_keyword(&entry.key, &clause).unwrap().unwrap())
                .collect();
            let distinct: HashSet<&String> = replies[..k].iter().collect();
            assert_eq!(distinct.len(), k, "{} rule {ri}: {replies:?}", entry.key);
            assert_eq!(replies[k], replies[0], "{} rule {ri}", entry.key);
            checked += 1;
        }
    }
    let plain = script.keywords.iter().flat_map(|e| &e.rules).filter(|r| r.is_plain()).count();
    assert_eq!(checked, plain);
    assert!(plain >= 30);
}

#[test]
fn goto_rules_are_followed() {
    let script = Arc::new(ElizaScript::doctor());
    let gotos = script
        .keywords
        .iter()
        .flat_map(|e| &e.rules)
        .flat_map(|r| &r.reassembly)
        .filter(|r| matches!(r, Reassembly::Goto(_)))
        .count();
    assert!(gotos > 10);
    let mut engine = EngineState::new(script, 0);
    assert_eq!(engine.respond("Why is that").unwrap().text, "Why do you ask?");
    assert_eq!(engine.respond("Espanol").unwrap().text, "I speak only English.");
}

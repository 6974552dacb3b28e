//! The per-connection turn-taking state machine.
//!
//! ```text
//!   idle ──listen_start──▶ listening ──final_transcript──▶ thinking
//!    ▲                        ▲                              │ reply
//!    │                        └──────────tts_end────────── speaking
//!    └──── session_quit / ELIZA quit (from any phase) ───────┘
//! ```
//!
//! `face_update` is accepted in every phase and only moves the gaze. Events
//! that have no edge out of the current phase are rejected and leave the
//! session untouched; this includes the user talking over the agent.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::behavior::{
    estimate_word_timings, face_to_gaze, plan_speaking, BehaviorConfig, BehaviorEvent, BehaviorSchedule,
    CameraParams, FaceObservation, Gaze, GazeState, WordTiming,
};
use crate::eliza::{ElizaScript, EngineError, EngineState};
use crate::expression::{map_expression, BlendShapeVector, ExpressionError, PresetTable, ValenceArousal};
use crate::metrics::{metrics_summary, MetricsError, MetricsSummary, TurnRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Listening,
    Thinking,
    Speaking,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    SessionStart,
    ListenStart,
    InterimTranscript(String),
    FinalTranscript(String),
    TtsStart,
    TtsWord { word_index: Option<u64>, t_ms: f64 },
    TtsEnd,
    FaceUpdate(FaceObservation),
    SessionQuit,
}

impl SessionEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SessionEvent::SessionStart => "session_start",
            SessionEvent::ListenStart => "listen_start",
            SessionEvent::InterimTranscript(_) => "interim_transcript",
            SessionEvent::FinalTranscript(_) => "final_transcript",
            SessionEvent::TtsStart => "tts_start",
            SessionEvent::TtsWord { .. } => "tts_word",
            SessionEvent::TtsEnd => "tts_end",
            SessionEvent::FaceUpdate(_) => "face_update",
            SessionEvent::SessionQuit => "session_quit",
        }
    }
}

/// Everything the client needs to perform one agent reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub turn_id: u64,
    pub reply: String,
    pub schedule: BehaviorSchedule,
    pub expression: BlendShapeVector,
    pub timings: Vec<WordTiming>,
    pub record: TurnRecord,
    pub session_end: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    Greeting(String),
    AgentReply(Box<AgentTurn>),
    Gaze(Gaze),
    SessionEnd(String),
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("event `{event}` is not allowed in phase {phase:?}")]
    IllegalTransition { phase: Phase, event: &'static str },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Expression(#[from] ExpressionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub seed: u64,
    pub va: ValenceArousal,
    pub camera: CameraParams,
    pub gaze_alpha: f64,
    pub behavior: BehaviorConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            va: ValenceArousal::new(0.3, 0.1),
            camera: CameraParams::default(),
            gaze_alpha: 0.8,
            behavior: BehaviorConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    phase: Phase,
    engine: EngineState,
    gaze: GazeState,
    presets: Arc<PresetTable>,
    config: SessionConfig,
    turn_counter: u64,
}

impl Session {
    pub fn new(script: Arc<ElizaScript>, presets: Arc<PresetTable>, config: SessionConfig) -> Self {
        Self {
            phase: Phase::Idle,
            engine: EngineState::new(script, config.seed),
            gaze: GazeState::new(config.gaze_alpha),
            presets,
            config,
            turn_counter: 0,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn engine(&self) -> &EngineState {
        &self.engine
    }

    pub fn gaze(&self) -> Gaze {
        self.gaze.current()
    }

    pub fn turn_counter(&self) -> u64 {
        self.turn_counter
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn greeting(&self) -> &str {
        &self.engine.script().initial_greeting
    }

    pub fn handle_event(&mut self, event: SessionEvent) -> Result<Vec<Emission>, SessionError> {
        use Phase::*;
        use SessionEvent::*;

        let illegal = |phase, event: &SessionEvent| SessionError::IllegalTransition {
            phase,
            event: event.name(),
        };

        match (self.phase, event) {
            (_, FaceUpdate(obs)) => Ok(vec![Emission::Gaze(self.look_at(&obs))]),
            (_, SessionQuit) => {
                self.phase = Idle;
                Ok(vec![Emission::SessionEnd(self.engine.script().final_message.clone())])
            }
            (Idle, SessionStart) => {
                if self.engine.is_ended() {
                    self.engine.reset();
                }
                Ok(vec![Emission::Greeting(self.greeting().to_string())])
            }
            (Idle, ListenStart) if self.engine.is_ended() => Err(EngineError::Ended.into()),
            (Idle | Listening, ListenStart) => {
                self.phase = Listening;
                Ok(vec![])
            }
            (Listening, InterimTranscript(_)) => Ok(vec![]),
            (Listening, FinalTranscript(text)) => {
                self.phase = Thinking;
                match self.run_turn(&text) {
                    Ok(turn) if turn.session_end => {
                        self.phase = Idle;
                        Ok(vec![Emission::SessionEnd(turn.reply)])
                    }
                    Ok(turn) => {
                        self.phase = Speaking;
                        Ok(vec![Emission::AgentReply(Box::new(turn))])
                    }
                    Err(e) => {
                        self.phase = Listening;
                        Err(e)
                    }
                }
            }
            (Speaking, TtsStart | TtsWord { .. }) => Ok(vec![]),
            (Speaking, TtsEnd) => {
                self.phase = Listening;
                Ok(vec![])
            }
            (phase, event) => Err(illegal(phase, &event)),
        }
    }

    fn look_at(&mut self, obs: &FaceObservation) -> Gaze {
        let obs = FaceObservation {
            cx: obs.cx.clamp(0.0, 1.0),
            cy: obs.cy.clamp(0.0, 1.0),
            w: obs.w,
        };
        self.gaze.smooth(face_to_gaze(&obs, &self.config.camera))
    }

    /// Produces the agent's reply to `text` with its behaviors, expression
    /// and timing record. The caller puts the session in `thinking` first.
    pub fn run_turn(&mut self, text: &str) -> Result<AgentTurn, SessionError> {
        if self.phase != Phase::Thinking {
            return Err(SessionError::IllegalTransition {
                phase: self.phase,
                event: "run_turn",
            });
        }
        let started = Instant::now();
        let reply = self.engine.respond(text)?;
        let ai_ms = elapsed_ms(started);

        self.turn_counter += 1;
        let turn_id = self.turn_counter;
        let plan_started = Instant::now();
        let cfg = &self.config.behavior;
        let timings = estimate_word_timings(&reply.text, cfg.unit_ms);
        let mut schedule = plan_speaking(&reply.text, &timings, self.turn_seed(turn_id), cfg);
        if schedule.total_ms > 0.0 {
            schedule.insert(BehaviorEvent::gaze(self.gaze.current(), 0.0, schedule.total_ms));
        }
        let expression = map_expression(self.config.va, &self.presets)?;
        let plan_ms = elapsed_ms(plan_started);

        let record = TurnRecord {
            turn_id,
            ai_ms,
            plan_ms,
            total_server_ms: elapsed_ms(started),
            reply_len: reply.text.chars().count(),
        };
        Ok(AgentTurn {
            turn_id,
            reply: reply.text,
            schedule,
            expression,
            timings,
            record,
            session_end: reply.session_end,
        })
    }

    fn turn_seed(&self, turn_id: u64) -> u64 {
        self.config.seed ^ turn_id.wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

fn elapsed_ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1000.0
}

/// Thirty bundled utterances for benchmarking, free of quit words.
pub const BENCH_CORPUS: &str = include_str!("../data/bench_corpus.txt");

/// Parses an utterance corpus: one utterance per line, blank lines and `#`
/// comments skipped.
pub fn load_corpus(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub summary: MetricsSummary,
    pub records: Vec<TurnRecord>,
    pub replies: Vec<String>,
    pub elapsed_ms: f64,
}

/// Drives `n_turns` complete listen/reply/speak cycles through a fresh
/// session, cycling through `corpus`. A quit utterance ends the conversation
/// and the next turn starts a new one.
pub fn bench(
    n_turns: usize,
    corpus: &[String],
    script: Arc<ElizaScript>,
    presets: Arc<PresetTable>,
    config: SessionConfig,
) -> Result<BenchReport, SessionError> {
    assert!(n_turns >= 1, "bench needs at least one turn");
    assert!(!corpus.is_empty(), "bench corpus is empty");
    let started = Instant::now();
    let mut session = Session::new(script, presets, config);
    let mut records = Vec::with_capacity(n_turns);
    let mut replies = Vec::with_capacity(n_turns);

    for utterance in corpus.iter().cycle().take(n_turns) {
        if session.phase() == Phase::Idle {
            session.handle_event(SessionEvent::SessionStart)?;
            session.handle_event(SessionEvent::ListenStart)?;
        }
        for emission in session.handle_event(SessionEvent::FinalTranscript(utterance.clone()))? {
            match emission {
                Emission::AgentReply(turn) => {
                    replies.push(turn.reply.clone());
                    records.push(turn.record);
                    session.handle_event(SessionEvent::TtsStart)?;
                    session.handle_event(SessionEvent::TtsEnd)?;
                }
                Emission::SessionEnd(text) => replies.push(text),
                Emission::Greeting(_) | Emission::Gaze(_) => {}
            }
        }
    }
    let summary = metrics_summary(&records)?;
    Ok(BenchReport {
        summary,
        records,
        replies,
        elapsed_ms: elapsed_ms(started),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::BehaviorKind;

    fn session(seed: u64) -> Session {
        Session::new(
            Arc::new(ElizaScript::doctor()),
            Arc::new(PresetTable::default()),
            SessionConfig {
                seed,
                ..SessionConfig::default()
            },
        )
    }

    fn listening(seed: u64) -> Session {
        let mut s = session(seed);
        s.handle_event(SessionEvent::ListenStart).unwrap();
        s
    }

    fn reply_of(emissions: Vec<Emission>) -> AgentTurn {
        match emissions.into_iter().next() {
            Some(Emission::AgentReply(turn)) => *turn,
            other => panic!("expected a reply, got {other:?}"),
        }
    }

    #[test]
    fn final_transcript_in_idle_is_rejected() {
        let mut s = session(0);
        let err = s.handle_event(SessionEvent::FinalTranscript("hi".into())).unwrap_err();
        assert!(matches!(err, SessionError::IllegalTransition { phase: Phase::Idle, .. }));
        assert_eq!(s.phase(), Phase::Idle);
        assert_eq!(s.turn_counter(), 0);
    }

    #[test]
    fn reply_flow() {
        let mut s = listening(0);
        let turn = reply_of(
            s.handle_event(SessionEvent::FinalTranscript("Men are all alike.".into()))
                .unwrap(),
        );
        assert_eq!(turn.reply, "In what way?");
        assert_eq!(s.phase(), Phase::Speaking);
        // barge-in is refused
        assert!(s.handle_event(SessionEvent::FinalTranscript("wait".into())).is_err());
        assert_eq!(s.phase(), Phase::Speaking);
        s.handle_event(SessionEvent::TtsStart).unwrap();
        s.handle_event(SessionEvent::TtsEnd).unwrap();
        assert_eq!(s.phase(), Phase::Listening);
    }

    #[test]
    fn face_update_in_any_phase() {
        let mut s = listening(0);
        s.handle_event(SessionEvent::FinalTranscript("hello".into())).unwrap();
        let out = s
            .handle_event(SessionEvent::FaceUpdate(FaceObservation { cx: 0.5, cy: 0.5, w: 0.2 }))
            .unwrap();
        assert_eq!(out, vec![Emission::Gaze(Gaze::default())]);
        assert_eq!(s.phase(), Phase::Speaking);
    }

    #[test]
    fn sad_turn() {
        let mut s = listening(0);
        let turn = reply_of(s.handle_event(SessionEvent::FinalTranscript("I am sad".into())).unwrap());
        assert_eq!(turn.reply, "I am sorry to hear that you are sad.");
        assert!(turn.schedule.count(BehaviorKind::HeadNod) >= 1);
        assert!(turn.record.ai_ms > 0.0);
        assert!(turn.record.total_server_ms >= turn.record.ai_ms);
        assert_eq!(turn.turn_id, 1);
        assert_eq!(turn.schedule.count(BehaviorKind::Gaze), 1);
    }

    #[test]
    fn negated_reply_shakes() {
        let mut s = listening(0);
        // first `no` reply: "Are you saying no just to be negative?"
        let turn = reply_of(s.handle_event(SessionEvent::FinalTranscript("no".into())).unwrap());
        assert!(turn.reply.contains("no"));
        assert_eq!(turn.schedule.count(BehaviorKind::HeadShake), 1);
    }

    #[test]
    fn quit_returns_to_idle_and_restarts() {
        let mut s = listening(0);
        let out = s.handle_event(SessionEvent::FinalTranscript("bye".into())).unwrap();
        assert_eq!(out, vec![Emission::SessionEnd("Goodbye. It was nice talking to you.".into())]);
        assert_eq!(s.phase(), Phase::Idle);
        assert!(matches!(
            s.handle_event(SessionEvent::ListenStart),
            Err(SessionError::Engine(EngineError::Ended))
        ));
        s.handle_event(SessionEvent::SessionStart).unwrap();
        s.handle_event(SessionEvent::ListenStart).unwrap();
        assert_eq!(s.phase(), Phase::Listening);
    }

    #[test]
    fn session_quit_from_speaking() {
        let mut s = listening(0);
        s.handle_event(SessionEvent::FinalTranscript("hello".into())).unwrap();
        let out = s.handle_event(SessionEvent::SessionQuit).unwrap();
        assert!(matches!(out[0], Emission::SessionEnd(_)));
        assert_eq!(s.phase(), Phase::Idle);
    }

    #[test]
    fn sessions_are_deterministic() {
        let inputs = ["Men are all alike.", "My mother takes care of me", "I do not know", "qwerty"];
        let run = || {
            let mut s = listening(42);
            inputs
                .iter()
                .map(|i| {
                    let mut turn = reply_of(s.handle_event(SessionEvent::FinalTranscript(i.to_string())).unwrap());
                    s.handle_event(SessionEvent::TtsEnd).unwrap();
                    turn.record.ai_ms = 0.0;
                    turn.record.plan_ms = 0.0;
                    turn.record.total_server_ms = 0.0;
                    turn
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn bench_counts() {
        let corpus = load_corpus("# comment\nMen are all alike.\n\nI am sad\n");
        assert_eq!(corpus.len(), 2);
        let report = bench(
            1,
            &corpus,
            Arc::new(ElizaScript::doctor()),
            Arc::new(PresetTable::default()),
            SessionConfig::default(),
        )
        .unwrap();
        assert_eq!(report.summary.count, 1);
        assert_eq!(report.replies, vec!["In what way?"]);
    }
}

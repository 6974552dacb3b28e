//! JSON messages exchanged with browser clients over a persistent
//! connection, one object per text frame, discriminated by `type`.
//!
//! [`GatewaySession`] owns one conversation: it decodes a frame, feeds the
//! resulting event to the [`Session`] state machine, and encodes whatever the
//! machine emits. A frame that does not decode, or that fails validation,
//! produces a single `error` message and never touches the session.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::behavior::{BehaviorEvent, BehaviorKind, FaceObservation, WordTiming};
use crate::eliza::EngineError;
use crate::expression::BlendShapeVector;
use crate::lipsync::VisemeFrame;
use crate::metrics::MetricsSink;
use crate::session::{AgentTurn, Emission, Phase, Session, SessionError, SessionEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TtsKind {
    Start,
    Word,
    End,
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    UserUtterance {
        text: String,
        #[serde(rename = "final")]
        is_final: bool,
    },
    ListenStart {},
    Face {
        cx: f64,
        cy: f64,
        w: f64,
    },
    TtsEvent {
        kind: TtsKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        word_index: Option<u64>,
        t_ms: f64,
    },
    ClientMetrics {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stt_ms: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tts_ms: Option<f64>,
    },
    Quit {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireBehavior {
    pub kind: BehaviorKind,
    pub start_ms: f64,
    pub end_ms: f64,
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<f64>,
}

impl From<&BehaviorEvent> for WireBehavior {
    fn from(e: &BehaviorEvent) -> Self {
        Self {
            kind: e.kind,
            start_ms: e.start_ms,
            end_ms: e.end_ms,
            amplitude: e.amplitude,
            yaw: e.gaze_target.map(|g| g.yaw_rad),
            pitch: e.gaze_target.map(|g| g.pitch_rad),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireWordTiming {
    pub word: String,
    pub start_ms: f64,
    pub end_ms: f64,
}

impl From<&WordTiming> for WireWordTiming {
    fn from(t: &WordTiming) -> Self {
        Self {
            word: t.word.clone(),
            start_ms: t.start_ms,
            end_ms: t.end_ms,
        }
    }
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServerMessage {
    Greeting {
        text: String,
    },
    AgentReply {
        turn_id: u64,
        text: String,
        behaviors: Vec<WireBehavior>,
        expression: BlendShapeVector,
        word_timings: Vec<WireWordTiming>,
    },
    Gaze {
        yaw: f64,
        pitch: f64,
    },
    Viseme {
        t_ms: f64,
        kiss: f64,
        #[serde(rename = "lipsPressed")]
        lips_pressed: f64,
        #[serde(rename = "mouthOpen")]
        mouth_open: f64,
    },
    SessionEnd {
        text: String,
    },
    Error {
        code: String,
        detail: String,
    },
}

impl ServerMessage {
    pub fn error(code: &str, detail: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.to_string(),
            detail: detail.into(),
        }
    }

    pub fn agent_reply(turn: &AgentTurn) -> Self {
        ServerMessage::AgentReply {
            turn_id: turn.turn_id,
            text: turn.reply.clone(),
            behaviors: turn.schedule.events.iter().map(WireBehavior::from).collect(),
            expression: turn.expression,
            word_timings: turn.timings.iter().map(WireWordTiming::from).collect(),
        }
    }

    pub fn viseme(frame: &VisemeFrame) -> Self {
        ServerMessage::Viseme {
            t_ms: frame.t_ms,
            kiss: frame.weights.kiss,
            lips_pressed: frame.weights.lips_pressed,
            mouth_open: frame.weights.mouth_open,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn check(ok: bool, field: &'static str, reason: &str) -> Result<(), ProtocolError> {
    if ok {
        Ok(())
    } else {
        Err(ProtocolError::Invalid {
            field,
            reason: reason.to_string(),
        })
    }
}

impl ClientMessage {
    /// Parses and validates one text frame.
    pub fn decode(frame: &str) -> Result<Self, ProtocolError> {
        let msg: Self = serde_json::from_str(frame)?;
        msg.validate()?;
        Ok(msg)
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("client messages always serialize")
    }

    fn validate(&self) -> Result<(), ProtocolError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let non_negative = |x: f64| x.is_finite() && x >= 0.0;
        match self {
            ClientMessage::Face { cx, cy, w } => {
                check(unit(*cx), "cx", "must be in [0, 1]")?;
                check(unit(*cy), "cy", "must be in [0, 1]")?;
                check(*w > 0.0 && *w <= 1.0, "w", "must be in (0, 1]")
            }
            ClientMessage::TtsEvent { t_ms, .. } => check(non_negative(*t_ms), "t_ms", "must be >= 0"),
            ClientMessage::ClientMetrics { stt_ms, tts_ms } => {
                check(stt_ms.is_none_or(non_negative), "stt_ms", "must be >= 0")?;
                check(tts_ms.is_none_or(non_negative), "tts_ms", "must be >= 0")
            }
            ClientMessage::UserUtterance { .. } | ClientMessage::ListenStart {} | ClientMessage::Quit {} => Ok(()),
        }
    }

    /// The state-machine event this message stands for, if any.
    pub fn to_event(&self) -> Option<SessionEvent> {
        Some(match self {
            ClientMessage::UserUtterance { text, is_final: true } => SessionEvent::FinalTranscript(text.clone()),
            ClientMessage::UserUtterance { text, is_final: false } => SessionEvent::InterimTranscript(text.clone()),
            ClientMessage::ListenStart {} => SessionEvent::ListenStart,
            ClientMessage::Face { cx, cy, w } => SessionEvent::FaceUpdate(FaceObservation {
                cx: *cx,
                cy: *cy,
                w: *w,
            }),
            ClientMessage::TtsEvent { kind, word_index, t_ms } => match kind {
                TtsKind::Start => SessionEvent::TtsStart,
                TtsKind::Word => SessionEvent::TtsWord {
                    word_index: *word_index,
                    t_ms: *t_ms,
                },
                TtsKind::End => SessionEvent::TtsEnd,
            },
            ClientMessage::Quit {} => SessionEvent::SessionQuit,
            ClientMessage::ClientMetrics { .. } => return None,
        })
    }
}

impl ServerMessage {
    pub fn decode(frame: &str) -> Result<Self, ProtocolError> {
        Ok(serde_json::from_str(frame)?)
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// Speech timings measured in the browser. They are kept for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClientTimings {
    pub stt_ms: Option<f64>,
    pub tts_ms: Option<f64>,
}

/// One connection's conversation.
#[derive(Debug)]
pub struct GatewaySession {
    session: Session,
    client_timings: Vec<ClientTimings>,
    sink: Option<Arc<MetricsSink>>,
}

impl GatewaySession {
    pub fn new(session: Session) -> Self {
        Self {
            session,
            client_timings: Vec::new(),
            sink: None,
        }
    }

    /// Also reports every turn record to a shared sink.
    pub fn with_sink(mut self, sink: Arc<MetricsSink>) -> Self {
        self.sink = Some(sink);
        self
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn phase(&self) -> Phase {
        self.session.phase()
    }

    pub fn client_timings(&self) -> &[ClientTimings] {
        &self.client_timings
    }

    /// Opens the conversation; returns the greeting.
    pub fn start(&mut self) -> Vec<ServerMessage> {
        self.dispatch(SessionEvent::SessionStart)
    }

    pub fn handle_message(&mut self, frame: &str) -> Vec<ServerMessage> {
        let msg = match ClientMessage::decode(frame) {
            Ok(msg) => msg,
            Err(e) => return vec![ServerMessage::error("bad_message", e.to_string())],
        };
        match msg.to_event() {
            Some(event) => self.dispatch(event),
            None => {
                if let ClientMessage::ClientMetrics { stt_ms, tts_ms } = msg {
                    self.client_timings.push(ClientTimings { stt_ms, tts_ms });
                }
                Vec::new()
            }
        }
    }

    fn dispatch(&mut self, event: SessionEvent) -> Vec<ServerMessage> {
        match self.session.handle_event(event) {
            Ok(emissions) => emissions.iter().map(|e| self.encode_emission(e)).collect(),
            Err(SessionError::IllegalTransition { phase, event }) => vec![ServerMessage::error(
                "illegal_transition",
                format!("`{event}` is not accepted while {phase:?}").to_lowercase(),
            )],
            Err(SessionError::Engine(EngineError::Ended)) => vec![ServerMessage::error(
                "session_ended",
                "the conversation has ended; reconnect to start a new one",
            )],
            Err(e) => vec![ServerMessage::error("internal", e.to_string())],
        }
    }

    fn encode_emission(&self, emission: &Emission) -> ServerMessage {
        match emission {
            Emission::Greeting(text) => ServerMessage::Greeting { text: text.clone() },
            Emission::AgentReply(turn) => {
                if let Some(sink) = &self.sink {
                    sink.record(turn.record.clone());
                }
                ServerMessage::agent_reply(turn)
            }
            Emission::Gaze(g) => ServerMessage::Gaze {
                yaw: g.yaw_rad,
                pitch: g.pitch_rad,
            },
            Emission::SessionEnd(text) => ServerMessage::SessionEnd { text: text.clone() },
        }
    }
}

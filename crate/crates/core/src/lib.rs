//! Engine for a web-based embodied conversational agent.
//!
//! The crate turns user utterances into everything an avatar needs for one
//! conversational turn: an ELIZA reply ([`eliza`]), timed head nods, shakes
//! and gaze ([`behavior`]), an eight-weight facial expression
//! ([`expression`]), and mouth shapes from speech audio ([`lipsync`]).
//! [`session`] ties them into a per-connection state machine with latency
//! metrics, and [`protocol`] defines the JSON messages exchanged with
//! browser clients.
//!
//! The companion guide in `book/` walks through each part; its code
//! listings are compiled and run as doc-tests of this crate.

pub mod behavior;
pub mod eliza;
pub mod expression;
pub mod lipsync;
pub mod metrics;
pub mod protocol;
pub mod session;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/eliza.md")]
    mod eliza {}
    #[doc = include_str!("../../../book/src/behavior.md")]
    mod behavior {}
    #[doc = include_str!("../../../book/src/expression.md")]
    mod expression {}
    #[doc = include_str!("../../../book/src/lipsync.md")]
    mod lipsync {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    mod sessions {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
}

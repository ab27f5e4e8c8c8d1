//! Live adaptive flashcard sessions over HTTP.
//!
//! A session samples `n` cards from a deck and runs a prequiz, `T` learning
//! steps chosen by a teaching policy, and a postquiz. Every state change is an
//! event appended to the session's log, and the log alone rebuilds the state.

pub mod api;
pub mod deck;
pub mod error;
pub mod grading;
pub mod service;
pub mod session;
pub mod store;

pub use api::{router, serve, serve_on};
pub use deck::{Card, Deck, Difficulty};
pub use error::{Result, ServiceError};
pub use grading::{Grader, NormalizedMatch};
pub use service::{
    AnswerRequest, AnswerResponse, CreateSessionRequest, CreatedSession, ServiceConfig,
    SessionService, ThetaProfile,
};
pub use session::{GainSummary, Phase, SessionEvent, SessionRecord, SessionView};
pub use store::EventStore;

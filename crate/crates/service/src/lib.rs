//! Live study sessions over HTTP: a staged flow of simulated clients, the
//! assistance panels, gated ratings, surveys and an append-only event log
//! per session.

pub mod config;
mod error;
pub mod event;
pub mod export;
mod flow;
pub mod http;
mod service;
mod session;
mod survey;

pub use error::ServiceError;
pub use flow::{Stage, StudyFlow};
pub use service::{default_rating_labels, Ack, CreateRequest, MessageReply, Service, ServiceSettings, SessionView};
pub use session::Session;
pub use survey::{SurveyPhase, SurveyResponse, Q4_ITEMS};

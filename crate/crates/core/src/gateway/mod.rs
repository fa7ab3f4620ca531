//! Chain-generation backends and reply parsing.
//!
//! Two backends implement [`ChainBackend`]: [`HttpBackend`] talks to any
//! OpenAI-compatible chat-completions endpoint, [`MockBackend`] samples
//! chains from reference statistics with a fixed seed. Both return raw text
//! that goes through [`parse_completion`].

mod http;
mod mock;
mod parse;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Household, SocioProfile};
use crate::feedback::Guidance;
use crate::household::HouseholdContext;
use crate::prompt::PromptBundle;

pub use http::{BackendConfig, HttpBackend};
pub use mock::{MockBackend, MockConfig};
pub use parse::{extract_array, parse_completion, ParseError};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("request rejected (HTTP {status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("malformed response envelope: {0}")]
    MalformedEnvelope(String),
}

impl GatewayError {
    /// Errors that make further calls to the same backend pointless.
    pub fn is_fatal(&self) -> bool {
        matches!(self, GatewayError::Config(_) | GatewayError::Auth { .. })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawCompletion {
    pub text: String,
    pub usage: Option<Usage>,
    pub latency: Duration,
    /// HTTP attempts spent on this completion (1 without retries).
    pub attempts: u32,
}

/// Everything a backend may use to produce one chain. The HTTP backend only
/// looks at the prompt; the mock reads the structured inputs the prompt was
/// rendered from.
#[derive(Debug, Clone, Copy)]
pub struct GenerationRequest<'a> {
    pub prompt: &'a PromptBundle,
    pub profile: &'a SocioProfile,
    pub household: &'a Household,
    pub guidance: Option<&'a Guidance>,
    pub context: Option<&'a HouseholdContext>,
    /// Parse retry number, 0 for the first call.
    pub attempt: u32,
    /// Reconciliation regeneration number, 0 outside reconciliation.
    pub regeneration: u32,
}

pub trait ChainBackend: Send + Sync {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<RawCompletion, GatewayError>;
}

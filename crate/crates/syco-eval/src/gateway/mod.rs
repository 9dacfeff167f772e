//! Backends that turn conversations into responses, and the suite runner
//! that produces sorted, resumable record files.

mod http;
mod mock;
mod suite;

pub use http::{GenConfig, HttpBackend};
pub use mock::{MockModel, MockModelConfig};
pub use suite::{
    load_resume_manifest, run_case, run_suite, FailureEntry, SuiteOutcome, SuiteOptions,
};

use thiserror::Error;

use crate::chat::Conversation;
use crate::model::{AnswerLabel, CaseSpec, Modality, PromptProfile, ResolutionFactor, Subset};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("request {correlation_id} timed out")]
    Timeout { correlation_id: String },
    #[error("request {correlation_id} failed with HTTP status {status}")]
    HttpStatus { status: u16, correlation_id: String },
    #[error("request {correlation_id} returned a malformed response: {message}")]
    MalformedResponse {
        message: String,
        correlation_id: String,
    },
    #[error("request {correlation_id} exhausted {attempts} attempts: {last_error}")]
    RetriesExhausted {
        attempts: u32,
        last_error: String,
        correlation_id: String,
    },
    #[error("mock backend requires request metadata (item {0})")]
    MissingMetadata(String),
    #[error("item {item_id} case {case_id}: {source}")]
    ForItem {
        item_id: String,
        case_id: u8,
        #[source]
        source: Box<GatewayError>,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-request context. The HTTP backend ignores everything except the
/// correlation id; the mock backend derives its answer from it.
#[derive(Debug, Clone)]
pub struct RequestMeta {
    pub item_id: String,
    pub subset: Subset,
    pub case: CaseSpec,
    /// 1-based round being generated.
    pub round: u8,
    pub ground_truth: AnswerLabel,
    pub modality: Modality,
    pub resolution_factor: ResolutionFactor,
    pub prompt_profile: PromptProfile,
}

/// A chat backend. Seeded assistant turns in the conversation are sent as
/// prior history, never regenerated.
pub trait Backend: Sync {
    fn complete(&self, conversation: &Conversation, meta: &RequestMeta)
        -> Result<String, GatewayError>;
}

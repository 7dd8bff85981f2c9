use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::OpKind;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationParams {
    pub model_name: String,
    pub temperature: f64,
    pub max_output_chars: usize,
}

/// Shared flag that aborts in-flight provider calls.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

/// One call to the model.
///
/// `op` and `seed` identify what is being generated; real providers only send
/// `prompt` and `params`, the mock provider keys its fixtures on them.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub op: OpKind,
    pub seed: &'a str,
    pub prompt: &'a str,
    pub params: &'a GenerationParams,
    pub cancel: Option<&'a CancelToken>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider answered with HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("provider call timed out after {0} s")]
    Timeout(u64),
    #[error("provider call was cancelled")]
    Cancelled,
    #[error("no fixture {key:?} and placeholder replies are off")]
    MissingFixture { key: String },
    #[error("unexpected provider response: {0}")]
    BadResponse(String),
    #[error("provider misconfigured: {0}")]
    Config(String),
}

/// Something that can complete a prompt.
pub trait Provider: Send + Sync {
    /// Short identifier recorded on every exchange.
    fn id(&self) -> String;

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for Arc<P> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
}

impl<P: Provider + ?Sized> Provider for &P {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
}

/// Wraps a provider and counts calls.
pub struct CountingProvider<P> {
    inner: P,
    calls: AtomicUsize,
}

impl<P: Provider> CountingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: Provider> Provider for CountingProvider<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

//! Pluggable invocation of the remote code behind a transition's action.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ids::{CollaboratorId, ProcessId, StateId, TransitionId};
use crate::model::Endpoint;

/// Payload handed to the executor with every invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionContext {
    pub process_id: ProcessId,
    pub transition_id: TransitionId,
    pub actor: CollaboratorId,
    pub current_state: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionFailure {
    pub reason: String,
}

impl ActionFailure {
    pub fn new(reason: impl Into<String>) -> Self {
        Self {
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ActionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.reason)
    }
}

/// Runs the action bound to a transition. Implementations used in tests
/// must be deterministic in `(endpoint, context)`.
pub trait ActionExecutor: Send + Sync {
    fn invoke(&self, endpoint: &Endpoint, context: &ActionContext) -> Result<Value, ActionFailure>;
}

type Handler = Arc<dyn Fn(&ActionContext) -> Result<Value, ActionFailure> + Send + Sync>;

/// In-process registry of scripted handlers keyed by endpoint URI.
///
/// Unregistered endpoints succeed with an acknowledgement payload unless the
/// executor was built with [`MockExecutor::strict`].
#[derive(Clone, Default)]
pub struct MockExecutor {
    handlers: BTreeMap<String, Handler>,
    strict: bool,
}

impl MockExecutor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn strict() -> Self {
        Self {
            strict: true,
            ..Self::default()
        }
    }

    pub fn on<F>(mut self, endpoint: &str, handler: F) -> Self
    where
        F: Fn(&ActionContext) -> Result<Value, ActionFailure> + Send + Sync + 'static,
    {
        self.handlers.insert(endpoint.to_owned(), Arc::new(handler));
        self
    }

    pub fn failing(self, endpoint: &str, reason: &str) -> Self {
        let reason = reason.to_owned();
        self.on(endpoint, move |_| Err(ActionFailure::new(reason.clone())))
    }
}

impl fmt::Debug for MockExecutor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MockExecutor")
            .field("endpoints", &self.handlers.keys().collect::<Vec<_>>())
            .field("strict", &self.strict)
            .finish()
    }
}

impl ActionExecutor for MockExecutor {
    fn invoke(&self, endpoint: &Endpoint, context: &ActionContext) -> Result<Value, ActionFailure> {
        match self.handlers.get(endpoint.as_str()) {
            Some(handler) => handler(context),
            None if self.strict => Err(ActionFailure::new(format!(
                "no handler registered for {endpoint}"
            ))),
            None => Ok(json!({
                "endpoint": endpoint.as_str(),
                "transition": context.transition_id,
                "status": "ok",
            })),
        }
    }
}

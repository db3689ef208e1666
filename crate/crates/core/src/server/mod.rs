//! Hosting: the event log and its replay, the command layer that funnels
//! every change through the log, the REST API, configuration, and the
//! scenario-script runner.

mod apply;
mod community;
mod config;
mod error;
mod events;
mod http;
mod log;
mod scenario;

pub use apply::{apply_event, Effect};
pub use community::{
    replay, AdoptionOutcome, Clock, Community, ProcessView, PropagationAuthority, PropagationPolicy, SteppingClock,
    SystemClock, VersionView,
};
pub use config::Config;
pub use error::{status_for, ServerError, ERROR_STATUS};
pub use events::{Event, EventRecord};
pub use http::{router, serve, SharedCommunity, IDENTITY_HEADER};
pub use log::{parse_log, EventLog};
pub use scenario::{run_scenario, run_scenario_file, ScenarioFailure, ScenarioReport};

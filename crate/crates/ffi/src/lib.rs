//! C interface to the socproto engine.
//!
//! Structured values cross the boundary as UTF-8 JSON strings. Every
//! function returns a [`SocprotoStatus`]; on anything but `SOCPROTO_STATUS_OK` the
//! calling thread's last error holds the engine code and message. Strings
//! handed out through `out` parameters belong to the caller and must be
//! released with [`socproto_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use socproto::engine::Group;
use socproto::ids::{CollaboratorId, GroupId, ProcessId, ProposalId, SessionId, TransitionId, VersionId};
use socproto::inheritance::{PropagationStrategy, Scope};
use socproto::model::{validate_structure, Environment, ProtocolPatch, SocialProtocol};
use socproto::negotiation::{AcceptanceRule, VoteValue};
use socproto::server::{parse_log, replay, run_scenario, Community, EventLog, ServerError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocprotoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    /// The engine refused the request; see `socproto_last_error_code`.
    Rejected = 4,
    Panic = 5,
}

/// A community of groups, processes, and protocol versions, backed by an
/// event log.
pub struct SocprotoCommunity {
    inner: Community,
}

struct LastError {
    code: CString,
    message: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn set_last_error(code: &str, message: &str) {
    let clean = |s: &str| CString::new(s.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = Some(LastError {
            code: clean(code),
            message: clean(message),
        })
    });
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

enum Failure {
    Status(SocprotoStatus, String),
    Engine(ServerError),
}

impl From<ServerError> for Failure {
    fn from(e: ServerError) -> Self {
        Failure::Engine(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> SocprotoStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SocprotoStatus::Ok,
        Ok(Err(Failure::Status(status, message))) => {
            let code = match status {
                SocprotoStatus::NullPointer => "NULL_POINTER",
                SocprotoStatus::InvalidUtf8 => "INVALID_UTF8",
                SocprotoStatus::InvalidJson => "PARSE_ERROR",
                _ => "INTERNAL",
            };
            set_last_error(code, &message);
            status
        }
        Ok(Err(Failure::Engine(e))) => {
            set_last_error(e.code(), &e.to_string());
            SocprotoStatus::Rejected
        }
        Err(_) => {
            set_last_error("PANIC", "the engine panicked");
            SocprotoStatus::Panic
        }
    }
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> FfiResult<&'a str> {
    if ptr.is_null() {
        return Err(Failure::Status(SocprotoStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| Failure::Status(SocprotoStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn opt_text<'a>(ptr: *const c_char, what: &str) -> FfiResult<Option<&'a str>> {
    if ptr.is_null() {
        Ok(None)
    } else {
        text(ptr, what).map(Some)
    }
}

fn json<T: serde::de::DeserializeOwned>(raw: &str, what: &str) -> FfiResult<T> {
    serde_json::from_str(raw).map_err(|e| Failure::Status(SocprotoStatus::InvalidJson, format!("{what}: {e}")))
}

unsafe fn community<'a>(handle: *mut SocprotoCommunity) -> FfiResult<&'a mut Community> {
    handle
        .as_mut()
        .map(|h| &mut h.inner)
        .ok_or_else(|| Failure::Status(SocprotoStatus::NullPointer, "community handle is null".into()))
}

unsafe fn write_out(out: *mut *mut c_char, value: String) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure::Status(SocprotoStatus::NullPointer, "out parameter is null".into()));
    }
    let value = CString::new(value).map_err(|e| Failure::Status(SocprotoStatus::InvalidUtf8, e.to_string()))?;
    *out = value.into_raw();
    Ok(())
}

unsafe fn write_json<T: serde::Serialize>(out: *mut *mut c_char, value: &T) -> FfiResult<()> {
    let text = serde_json::to_string(value).map_err(|e| Failure::Status(SocprotoStatus::InvalidJson, e.to_string()))?;
    write_out(out, text)
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn socproto_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Error code of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn socproto_last_error_code() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.code.as_ptr()))
}

/// Message of the last failed call on this thread, or null. Same lifetime
/// as [`socproto_last_error_code`].
#[no_mangle]
pub extern "C" fn socproto_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.message.as_ptr()))
}

/// Validates a protocol document and writes the report as JSON.
///
/// # Safety
/// `protocol_json` must be a NUL-terminated string; `out_report` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_validate(protocol_json: *const c_char, out_report: *mut *mut c_char) -> SocprotoStatus {
    guard(|| {
        let protocol = SocialProtocol::from_json(text(protocol_json, "protocol_json")?).map_err(ServerError::from)?;
        write_json(out_report, &validate_structure(&protocol))
    })
}

/// Creates an empty in-memory community.
#[no_mangle]
pub extern "C" fn socproto_community_new() -> *mut SocprotoCommunity {
    Box::into_raw(Box::new(SocprotoCommunity {
        inner: Community::in_memory(),
    }))
}

/// Opens (or creates) a community backed by the event log at `log_path`,
/// replaying any events already in it.
///
/// # Safety
/// `log_path` must be a NUL-terminated string; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_community_open(log_path: *const c_char, out: *mut *mut SocprotoCommunity) -> SocprotoStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Status(SocprotoStatus::NullPointer, "out parameter is null".into()));
        }
        let log = EventLog::open(text(log_path, "log_path")?)?;
        let inner = Community::with_log(log)?;
        *out = Box::into_raw(Box::new(SocprotoCommunity { inner }));
        Ok(())
    })
}

/// Releases a community. Null is ignored.
///
/// # Safety
/// `handle` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn socproto_community_free(handle: *mut SocprotoCommunity) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Sets the acceptance rule (`unanimity` or `quorum:<fraction>`) used when
/// a close request names none.
///
/// # Safety
/// `handle` must be a live handle; `rule` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn socproto_set_acceptance_rule(handle: *mut SocprotoCommunity, rule: *const c_char) -> SocprotoStatus {
    guard(|| {
        let c = community(handle)?;
        let rule: AcceptanceRule = text(rule, "rule")?
            .parse()
            .map_err(|e: socproto::negotiation::NegotiationError| ServerError::from(e))?;
        c.set_rule(rule);
        Ok(())
    })
}

/// Registers an environment given as JSON.
///
/// # Safety
/// `handle` must be a live handle; `environment_json` a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn socproto_register_environment(
    handle: *mut SocprotoCommunity,
    environment_json: *const c_char,
) -> SocprotoStatus {
    guard(|| {
        let c = community(handle)?;
        let env: Environment = json(text(environment_json, "environment_json")?, "environment")?;
        c.register_environment(env)?;
        Ok(())
    })
}

/// Registers a group given as JSON.
///
/// # Safety
/// `handle` must be a live handle; `group_json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn socproto_register_group(handle: *mut SocprotoCommunity, group_json: *const c_char) -> SocprotoStatus {
    guard(|| {
        let c = community(handle)?;
        let group: Group = json(text(group_json, "group_json")?, "group")?;
        c.register_group(group)?;
        Ok(())
    })
}

/// Registers a protocol. `private_group` null means catalog scope. Writes
/// the version id.
///
/// # Safety
/// `handle` must be a live handle; strings NUL-terminated or null where
/// allowed; `out_version` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_register_protocol(
    handle: *mut SocprotoCommunity,
    protocol_json: *const c_char,
    private_group: *const c_char,
    out_version: *mut *mut c_char,
) -> SocprotoStatus {
    guard(|| {
        let c = community(handle)?;
        let protocol = SocialProtocol::from_json(text(protocol_json, "protocol_json")?).map_err(ServerError::from)?;
        let scope = match opt_text(private_group, "private_group")? {
            Some(g) => Scope::Private(GroupId::new(g)),
            None => Scope::Catalog,
        };
        let version = c.register_protocol(protocol, scope)?;
        write_out(out_version, version.to_string())
    })
}

/// Starts a process. `process_id` null picks the next free id. Writes the
/// process view as JSON.
///
/// # Safety
/// `handle` must be a live handle; strings NUL-terminated or null where
/// allowed; `out_process` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_instantiate(
    handle: *mut SocprotoCommunity,
    process_id: *const c_char,
    version: *const c_char,
    group: *const c_char,
    out_process: *mut *mut c_char,
) -> SocprotoStatus {
    guard(|| {
        let c = community(handle)?;
        let pid = opt_text(process_id, "process_id")?.map(ProcessId::new);
        let process = c.instantiate(
            pid,
            &VersionId::new(text(version, "version")?),
            &GroupId::new(text(group, "group")?),
            None,
        )?;
        write_json(out_process, &c.process_view(&process.process_id)?)
    })
}

/// Transitions `collaborator` may trigger now, as a JSON array.
///
/// # Safety
/// `handle` must be a live handle; strings NUL-terminated; `out_json` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_available_transitions(
    handle: *mut SocprotoCommunity,
    process_id: *const c_char,
    collaborator: *const c_char,
    out_json: *mut *mut c_char,
) -> SocprotoStatus {
    guard(|| {
        let c = community(handle)?;
        let available = c.available(
            &ProcessId::new(text(process_id, "process_id")?),
            &CollaboratorId::new(text(collaborator, "collaborator")?),
        )?;
        write_json(out_json, &available)
    })
}

/// Triggers a transition and writes the recorded transition event.
///
/// # Safety
/// `handle` must be a live handle; strings NUL-terminated; `out_event` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_trigger(
    handle: *mut SocprotoCommunity,
    process_id: *const c_char,
    actor: *const c_char,
    transition: *const c_char,
    out_event: *mut *mut c_char,
) -> SocprotoStatus {
    guard(|| {
        let event = community(handle)?.trigger(
            &ProcessId::new(text(process_id, "process_id")?),
            &CollaboratorId::new(text(actor, "actor")?),
            &TransitionId::new(text(transition, "transition")?),
        )?;
        write_json(out_event, &event)
    })
}

/// Opens a negotiation with an initial patch; writes the session id.
///
/// # Safety
/// `handle` must be a live handle; strings NUL-terminated or null where
/// allowed; `out_session` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_open_negotiation(
    handle: *mut SocprotoCommunity,
    process_id: *const c_char,
    initiator: *const c_char,
    patch_json: *const c_char,
    rationale: *const c_char,
    out_session: *mut *mut c_char,
) -> SocprotoStatus {
    guard(|| {
        let patch = ProtocolPatch::from_json(text(patch_json, "patch_json")?).map_err(ServerError::from)?;
        let session = community(handle)?.open_negotiation(
            &ProcessId::new(text(process_id, "process_id")?),
            &CollaboratorId::new(text(initiator, "initiator")?),
            patch,
            opt_text(rationale, "rationale")?.unwrap_or_default(),
        )?;
        write_out(out_session, session.session_id.to_string())
    })
}

/// Counter-proposes, superseding `supersedes`; writes the new proposal id.
///
/// # Safety
/// `handle` must be a live handle; strings NUL-terminated or null where
/// allowed; `out_proposal` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_propose(
    handle: *mut SocprotoCommunity,
    session: *const c_char,
    proposer: *const c_char,
    patch_json: *const c_char,
    rationale: *const c_char,
    supersedes: *const c_char,
    out_proposal: *mut *mut c_char,
) -> SocprotoStatus {
    guard(|| {
        let patch = ProtocolPatch::from_json(text(patch_json, "patch_json")?).map_err(ServerError::from)?;
        let proposal = community(handle)?.propose(
            &SessionId::new(text(session, "session")?),
            &CollaboratorId::new(text(proposer, "proposer")?),
            patch,
            opt_text(rationale, "rationale")?.unwrap_or_default(),
            &ProposalId::new(text(supersedes, "supersedes")?),
        )?;
        write_out(out_proposal, proposal.proposal_id.to_string())
    })
}

/// Casts a vote; `accept` nonzero means accept. Writes the tally as JSON.
///
/// # Safety
/// `handle` must be a live handle; strings NUL-terminated; `out_tally` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_vote(
    handle: *mut SocprotoCommunity,
    session: *const c_char,
    voter: *const c_char,
    proposal: *const c_char,
    accept: i32,
    out_tally: *mut *mut c_char,
) -> SocprotoStatus {
    guard(|| {
        let value = if accept != 0 { VoteValue::Accept } else { VoteValue::Reject };
        let tally = community(handle)?.vote(
            &SessionId::new(text(session, "session")?),
            &CollaboratorId::new(text(voter, "voter")?),
            &ProposalId::new(text(proposal, "proposal")?),
            value,
        )?;
        write_json(out_tally, &tally)
    })
}

/// Closes a negotiation under the configured rule; writes the outcome.
///
/// # Safety
/// `handle` must be a live handle; strings NUL-terminated; `out_outcome` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_close_negotiation(
    handle: *mut SocprotoCommunity,
    session: *const c_char,
    closer: *const c_char,
    out_outcome: *mut *mut c_char,
) -> SocprotoStatus {
    guard(|| {
        let outcome = community(handle)?.close(
            &SessionId::new(text(session, "session")?),
            &CollaboratorId::new(text(closer, "closer")?),
            None,
        )?;
        write_json(out_outcome, &outcome)
    })
}

/// Propagates an adapted version (`local`, `global`, or `instant`);
/// writes the report.
///
/// # Safety
/// `handle` must be a live handle; strings NUL-terminated; `out_report` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_propagate(
    handle: *mut SocprotoCommunity,
    actor: *const c_char,
    version: *const c_char,
    strategy: *const c_char,
    out_report: *mut *mut c_char,
) -> SocprotoStatus {
    guard(|| {
        let strategy: PropagationStrategy = text(strategy, "strategy")?
            .parse()
            .map_err(|e: socproto::inheritance::InheritanceError| ServerError::from(e))?;
        let report = community(handle)?.propagate(
            &CollaboratorId::new(text(actor, "actor")?),
            &VersionId::new(text(version, "version")?),
            strategy,
        )?;
        write_json(out_report, &report)
    })
}

/// Catalog for a group, as a JSON array.
///
/// # Safety
/// `handle` must be a live handle; `group` NUL-terminated; `out_json` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_catalog(
    handle: *mut SocprotoCommunity,
    group: *const c_char,
    out_json: *mut *mut c_char,
) -> SocprotoStatus {
    guard(|| {
        let catalog = community(handle)?.catalog(&GroupId::new(text(group, "group")?))?;
        write_json(out_json, &catalog)
    })
}

/// Lineage edges as `parent -> child [ref]` lines; `version` null exports
/// the whole repository.
///
/// # Safety
/// `handle` must be a live handle; `version` NUL-terminated or null;
/// `out_text` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_export_lineage(
    handle: *mut SocprotoCommunity,
    version: *const c_char,
    out_text: *mut *mut c_char,
) -> SocprotoStatus {
    guard(|| {
        let version = opt_text(version, "version")?.map(VersionId::new);
        let exported = community(handle)?.export_lineage(version.as_ref())?;
        write_out(out_text, exported)
    })
}

/// Negotiation history along a version's lineage as seen by `group`.
///
/// # Safety
/// `handle` must be a live handle; strings NUL-terminated; `out_json` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_history(
    handle: *mut SocprotoCommunity,
    version: *const c_char,
    group: *const c_char,
    out_json: *mut *mut c_char,
) -> SocprotoStatus {
    guard(|| {
        let views = community(handle)?.history(
            &VersionId::new(text(version, "version")?),
            &GroupId::new(text(group, "group")?),
        )?;
        write_json(out_json, &views)
    })
}

/// Canonical JSON of the whole community state.
///
/// # Safety
/// `handle` must be a live handle; `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_state_json(handle: *mut SocprotoCommunity, out_json: *mut *mut c_char) -> SocprotoStatus {
    guard(|| {
        let state = community(handle)?.state().to_canonical_json();
        write_out(out_json, state)
    })
}

/// Replays JSON-lines log text and writes the canonical state.
///
/// # Safety
/// `log_text` must be NUL-terminated; `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_replay(log_text: *const c_char, out_json: *mut *mut c_char) -> SocprotoStatus {
    guard(|| {
        let state = replay(&parse_log(text(log_text, "log_text")?)?)?;
        write_out(out_json, state.to_canonical_json())
    })
}

/// Runs a scenario script. Writes the report as JSON; a script whose
/// assertions fail still returns `SOCPROTO_STATUS_OK` with `failure` set.
///
/// # Safety
/// `script` must be NUL-terminated; `out_report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn socproto_run_scenario(script: *const c_char, out_report: *mut *mut c_char) -> SocprotoStatus {
    guard(|| {
        let report = run_scenario(text(script, "script")?)?;
        write_json(out_report, &report)
    })
}

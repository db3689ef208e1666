use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::RwLock;

use super::community::Community;
use super::config::Config;
use super::events::EventRecord;
use super::log::EventLog;
use super::ServerError;
use crate::engine::Group;
use crate::ids::{ActionName, CollaboratorId, GroupId, ProcessId, ProposalId, SessionId, StateId, TransitionId, VersionId};
use crate::inheritance::{PropagationStrategy, Scope};
use crate::model::{apply_patch, level_unchecked, validate_structure, Environment, ProtocolPatch, RoleBinding, SocialProtocol};
use crate::negotiation::{AcceptanceRule, VoteValue};

/// Request header naming the acting collaborator.
pub const IDENTITY_HEADER: &str = "x-collaborator";

pub type SharedCommunity = Arc<RwLock<Community>>;

impl IntoResponse for ServerError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = json!({
            "code": self.code(),
            "message": self.to_string(),
            "details": self.details(),
        });
        (status, Json(body)).into_response()
    }
}

/// JSON body whose rejections use the service's error shape.
struct Body<T>(T);

impl<S, T> FromRequest<S> for Body<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ServerError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(value)) => Ok(Body(value)),
            Err(e) => Err(ServerError::BadRequest(e.body_text())),
        }
    }
}

/// Parses a body that may be absent.
fn optional_body<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ServerError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ServerError::BadRequest(e.to_string()))
}

type ApiResult = Result<Response, ServerError>;

fn ok<T: Serialize>(value: T) -> ApiResult {
    Ok(Json(value).into_response())
}

fn created<T: Serialize>(value: T) -> ApiResult {
    Ok((StatusCode::CREATED, Json(value)).into_response())
}

fn identity(headers: &HeaderMap) -> Result<CollaboratorId, ServerError> {
    headers
        .get(IDENTITY_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(CollaboratorId::new)
        .ok_or(ServerError::MissingIdentity)
}

/// Builds the REST router over a shared community.
pub fn router(community: SharedCommunity) -> Router {
    Router::new()
        .route("/environments", post(register_environment))
        .route("/groups", post(register_group))
        .route("/protocols", post(register_protocol))
        .route("/protocols/{v}", get(get_protocol))
        .route("/protocols/{v}/validate", post(validate_protocol))
        .route("/processes", post(instantiate))
        .route("/processes/merge", post(merge))
        .route("/processes/{id}", get(get_process))
        .route("/processes/{id}/transitions", get(transitions))
        .route("/processes/{id}/trigger", post(trigger))
        .route("/processes/{id}/split", post(split))
        .route("/processes/{id}/migrate", post(migrate))
        .route("/negotiations", post(open_negotiation))
        .route("/negotiations/{id}", get(get_negotiation))
        .route("/negotiations/{id}/proposals", post(propose))
        .route("/negotiations/{id}/votes", post(vote))
        .route("/negotiations/{id}/consent", post(consent))
        .route("/negotiations/{id}/close", post(close))
        .route("/negotiations/{id}/history", post(record_history))
        .route("/propagate", post(propagate))
        .route("/adoptions", post(adopt))
        .route("/catalog", get(catalog))
        .route("/lineage/{v}", get(lineage))
        .route("/history/{v}", get(history))
        .route("/events", get(events))
        .route("/state", get(state))
        .fallback(|| async { ServerError::NotFound("no such endpoint".into()) })
        .with_state(community)
}

type Shared = State<SharedCommunity>;

async fn register_environment(State(c): Shared, headers: HeaderMap, Body(env): Body<Environment>) -> ApiResult {
    identity(&headers)?;
    c.write().await.register_environment(env.clone())?;
    created(env)
}

async fn register_group(State(c): Shared, headers: HeaderMap, Body(group): Body<Group>) -> ApiResult {
    identity(&headers)?;
    c.write().await.register_group(group.clone())?;
    created(group)
}

#[derive(Deserialize)]
struct RegisterProtocol {
    protocol: SocialProtocol,
    #[serde(default = "catalog_scope")]
    scope: Scope,
}

fn catalog_scope() -> Scope {
    Scope::Catalog
}

async fn register_protocol(State(c): Shared, headers: HeaderMap, Body(req): Body<RegisterProtocol>) -> ApiResult {
    identity(&headers)?;
    let mut c = c.write().await;
    let version = c.register_protocol(req.protocol, req.scope)?;
    created(c.version_view(&version)?)
}

async fn get_protocol(State(c): Shared, Path(v): Path<VersionId>) -> ApiResult {
    ok(c.read().await.version_view(&v)?)
}

#[derive(Deserialize, Default)]
struct ValidateRequest {
    #[serde(default)]
    patch: Option<ProtocolPatch>,
}

/// Validates a stored version, or the result of applying `patch` to it
/// without storing anything.
async fn validate_protocol(State(c): Shared, Path(v): Path<VersionId>, body: Bytes) -> ApiResult {
    let req: ValidateRequest = optional_body(&body)?;
    let c = c.read().await;
    let stored = c.protocol(&v)?;
    let candidate = match &req.patch {
        Some(patch) => apply_patch(stored, patch)?.sealed(),
        None => stored.clone(),
    };
    let report = validate_structure(&candidate);
    let level = report.valid.then(|| level_unchecked(&candidate));
    ok(json!({
        "version": candidate.version,
        "report": report,
        "level": level,
        "preview": req.patch.is_some().then_some(&candidate),
    }))
}

#[derive(Deserialize)]
struct InstantiateRequest {
    #[serde(default)]
    process_id: Option<ProcessId>,
    version: VersionId,
    group: GroupId,
    #[serde(default)]
    start_state: Option<StateId>,
}

async fn instantiate(State(c): Shared, headers: HeaderMap, Body(req): Body<InstantiateRequest>) -> ApiResult {
    identity(&headers)?;
    let mut c = c.write().await;
    let process = c.instantiate(req.process_id, &req.version, &req.group, req.start_state)?;
    created(c.process_view(&process.process_id)?)
}

async fn get_process(State(c): Shared, Path(id): Path<ProcessId>) -> ApiResult {
    ok(c.read().await.process_view(&id)?)
}

#[derive(Deserialize)]
struct CollaboratorQuery {
    collaborator: Option<CollaboratorId>,
}

async fn transitions(
    State(c): Shared,
    Path(id): Path<ProcessId>,
    headers: HeaderMap,
    Query(q): Query<CollaboratorQuery>,
) -> ApiResult {
    let who = match q.collaborator {
        Some(who) => who,
        None => identity(&headers)?,
    };
    ok(c.read().await.available(&id, &who)?)
}

#[derive(Deserialize)]
struct TriggerRequest {
    transition: TransitionId,
}

async fn trigger(State(c): Shared, Path(id): Path<ProcessId>, headers: HeaderMap, Body(req): Body<TriggerRequest>) -> ApiResult {
    let actor = identity(&headers)?;
    let mut c = c.write().await;
    let event = c.trigger(&id, &actor, &req.transition)?;
    ok(json!({ "event": event, "process": c.process_view(&id)? }))
}

#[derive(Deserialize)]
struct SplitRequest {
    partition: Vec<BTreeSet<CollaboratorId>>,
}

async fn split(State(c): Shared, Path(id): Path<ProcessId>, headers: HeaderMap, Body(req): Body<SplitRequest>) -> ApiResult {
    identity(&headers)?;
    let children = c.write().await.split(&id, req.partition)?;
    created(json!({ "children": children }))
}

#[derive(Deserialize)]
struct MergeRequest {
    process_ids: Vec<ProcessId>,
}

async fn merge(State(c): Shared, headers: HeaderMap, Body(req): Body<MergeRequest>) -> ApiResult {
    identity(&headers)?;
    let merged = c.write().await.merge(req.process_ids)?;
    created(json!({ "merged": merged }))
}

#[derive(Deserialize)]
struct MigrateRequest {
    version: VersionId,
}

async fn migrate(State(c): Shared, Path(id): Path<ProcessId>, headers: HeaderMap, Body(req): Body<MigrateRequest>) -> ApiResult {
    identity(&headers)?;
    let mut c = c.write().await;
    let marker = c.migrate(&id, &req.version)?;
    ok(json!({ "marker": marker, "process": c.process_view(&id)? }))
}

#[derive(Deserialize)]
struct OpenRequest {
    process_id: ProcessId,
    patch: ProtocolPatch,
    #[serde(default)]
    rationale: String,
}

async fn open_negotiation(State(c): Shared, headers: HeaderMap, Body(req): Body<OpenRequest>) -> ApiResult {
    let initiator = identity(&headers)?;
    let session = c
        .write()
        .await
        .open_negotiation(&req.process_id, &initiator, req.patch, req.rationale)?;
    created(session)
}

async fn get_negotiation(State(c): Shared, Path(id): Path<SessionId>) -> ApiResult {
    let c = c.read().await;
    let session = c.session(&id)?;
    let tally = session.tally(&session.live_proposal().proposal_id);
    ok(json!({ "session": session, "live_tally": tally }))
}

#[derive(Deserialize)]
struct ProposeRequest {
    patch: ProtocolPatch,
    #[serde(default)]
    rationale: String,
    supersedes: ProposalId,
}

async fn propose(State(c): Shared, Path(id): Path<SessionId>, headers: HeaderMap, Body(req): Body<ProposeRequest>) -> ApiResult {
    let proposer = identity(&headers)?;
    let proposal = c
        .write()
        .await
        .propose(&id, &proposer, req.patch, req.rationale, &req.supersedes)?;
    created(proposal)
}

#[derive(Deserialize)]
struct VoteRequest {
    proposal_id: ProposalId,
    value: VoteValue,
}

async fn vote(State(c): Shared, Path(id): Path<SessionId>, headers: HeaderMap, Body(req): Body<VoteRequest>) -> ApiResult {
    let voter = identity(&headers)?;
    ok(c.write().await.vote(&id, &voter, &req.proposal_id, req.value)?)
}

#[derive(Deserialize)]
struct ConsentRequest {
    consent: bool,
}

async fn consent(State(c): Shared, Path(id): Path<SessionId>, headers: HeaderMap, Body(req): Body<ConsentRequest>) -> ApiResult {
    let who = identity(&headers)?;
    c.write().await.set_consent(&id, &who, req.consent)?;
    ok(json!({ "session_id": id, "participant": who, "consent": req.consent }))
}

#[derive(Deserialize, Default)]
struct CloseRequest {
    #[serde(default)]
    rule: Option<AcceptanceRule>,
}

async fn close(State(c): Shared, Path(id): Path<SessionId>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let closer = identity(&headers)?;
    let req: CloseRequest = optional_body(&body)?;
    ok(c.write().await.close(&id, &closer, req.rule)?)
}

async fn record_history(State(c): Shared, Path(id): Path<SessionId>, headers: HeaderMap) -> ApiResult {
    identity(&headers)?;
    c.write().await.record_history(&id)?;
    created(json!({ "session_id": id, "recorded": true }))
}

#[derive(Deserialize)]
struct PropagateRequest {
    version: VersionId,
    strategy: PropagationStrategy,
}

async fn propagate(State(c): Shared, headers: HeaderMap, Body(req): Body<PropagateRequest>) -> ApiResult {
    let actor = identity(&headers)?;
    ok(c.write().await.propagate(&actor, &req.version, req.strategy)?)
}

#[derive(Deserialize)]
struct AdoptRequest {
    version: VersionId,
    group: GroupId,
    #[serde(default)]
    bindings: BTreeMap<ActionName, String>,
    #[serde(default)]
    role_bindings: Vec<RoleBinding>,
    #[serde(default)]
    register: bool,
}

async fn adopt(State(c): Shared, headers: HeaderMap, Body(req): Body<AdoptRequest>) -> ApiResult {
    identity(&headers)?;
    let outcome = c
        .write()
        .await
        .adopt(&req.version, &req.group, &req.bindings, &req.role_bindings, req.register)?;
    ok(outcome)
}

#[derive(Deserialize)]
struct GroupQuery {
    group: Option<GroupId>,
}

fn required_group(q: GroupQuery) -> Result<GroupId, ServerError> {
    q.group
        .ok_or_else(|| ServerError::BadRequest("missing query parameter `group`".into()))
}

async fn catalog(State(c): Shared, Query(q): Query<GroupQuery>) -> ApiResult {
    let group = required_group(q)?;
    ok(c.read().await.catalog(&group)?)
}

async fn lineage(State(c): Shared, Path(v): Path<VersionId>) -> ApiResult {
    let c = c.read().await;
    let hops = c.lineage(&v)?;
    let export = c.export_lineage(Some(&v))?;
    ok(json!({ "version": v, "hops": hops, "export": export }))
}

async fn history(State(c): Shared, Path(v): Path<VersionId>, Query(q): Query<GroupQuery>) -> ApiResult {
    let group = required_group(q)?;
    ok(c.read().await.history(&v, &group)?)
}

#[derive(Deserialize)]
struct SinceQuery {
    #[serde(default)]
    since: u64,
}

#[derive(Serialize)]
struct EventsPage<'a> {
    events: &'a [EventRecord],
    last_seq: u64,
}

async fn events(State(c): Shared, Query(q): Query<SinceQuery>) -> ApiResult {
    let c = c.read().await;
    ok(EventsPage {
        events: c.events_since(q.since),
        last_seq: c.log().last_seq(),
    })
}

async fn state(State(c): Shared) -> ApiResult {
    let c = c.read().await;
    let value: Value = serde_json::to_value(c.state()).map_err(|e| ServerError::StorageFailure(e.to_string()))?;
    ok(value)
}

/// Opens the log under the data directory, replays it, and serves until
/// interrupted.
pub async fn serve(config: Config) -> Result<(), ServerError> {
    let rule = config.rule()?;
    let authority = config.authority()?;
    std::fs::create_dir_all(&config.data_dir)
        .map_err(|e| ServerError::DataDirUnwritable(format!("{}: {e}", config.data_dir.display())))?;
    let probe = config.data_dir.join(".write-probe");
    std::fs::write(&probe, b"")
        .and_then(|_| std::fs::remove_file(&probe))
        .map_err(|e| ServerError::DataDirUnwritable(format!("{}: {e}", config.data_dir.display())))?;
    let log = EventLog::open(config.log_path())?;
    let community = Community::with_log(log)?
        .with_rule(rule)
        .with_policy(Arc::new(authority));
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", config.port))
        .await
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::AddrInUse => ServerError::PortInUse(config.port),
            _ => ServerError::StorageFailure(e.to_string()),
        })?;
    tracing::info!(port = config.port, data_dir = %config.data_dir.display(), "serving");
    let app = router(Arc::new(RwLock::new(community)));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServerError::StorageFailure(e.to_string()))
}

//! Line-oriented scripts that drive a fresh in-memory community.
//!
//! One command per line, split with shell quoting rules; `#` starts a
//! comment. Any command may carry `expect=CODE` to require that it fails
//! with that code. `assert ...` lines check observable state, and the
//! first failing line stops the run. After the last line the event log is
//! replayed and compared with the live state.
//!
//! ```text
//! environment env-g1 builtin=env-g1
//! group A env=env-g1 from=faq
//! protocol P1 builtin=faq-implemented scope=catalog
//! instantiate pA P1 group=A
//! trigger pA john-smith t-ask-first
//! assert state pA q1
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use super::community::{Community, PropagationAuthority, SteppingClock};
use super::ServerError;
use crate::engine::{Group, ProcessOutcome, ProcessStatus};
use crate::fixtures;
use crate::ids::{ActionName, CollaboratorId, GroupId, ProcessId, ProposalId, RoleName, SessionId, StateId, TransitionId, VersionId};
use crate::inheritance::{Adoption, PropagationStrategy, Scope};
use crate::model::{diff, Endpoint, Environment, PatchEdit, ProtocolDiff, ProtocolPatch, RoleBinding, SocialProtocol};
use crate::negotiation::{AcceptanceRule, SessionStatus, VoteValue};

#[derive(Debug, Clone, PartialEq, Eq)]
struct Line {
    number: usize,
    text: String,
    words: Vec<String>,
    options: Vec<(String, String)>,
    expect: Option<String>,
}

impl Line {
    fn option(&self, key: &str) -> Option<&str> {
        self.options.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn required(&self, key: &str) -> Result<&str, String> {
        self.option(key).ok_or_else(|| format!("missing option {key}="))
    }

    fn word(&self, index: usize, what: &str) -> Result<&str, String> {
        self.words
            .get(index)
            .map(String::as_str)
            .ok_or_else(|| format!("missing {what}"))
    }
}

const COMMANDS: &[(&str, usize)] = &[
    ("environment", 1),
    ("group", 1),
    ("protocol", 1),
    ("derive", 2),
    ("instantiate", 2),
    ("trigger", 3),
    ("split", 3),
    ("merge", 2),
    ("migrate", 2),
    ("negotiate", 3),
    ("amend", 2),
    ("vote", 3),
    ("vote-all", 2),
    ("consent", 3),
    ("close", 2),
    ("record", 1),
    ("propagate", 2),
    ("adopt", 2),
    ("reset", 0),
    ("assert", 1),
];

const ASSERTS: &[(&str, usize)] = &[
    ("state", 2),
    ("outcome", 2),
    ("status", 2),
    ("version", 2),
    ("catalog", 1),
    ("transitions", 2),
    ("session", 2),
    ("new-transitions", 2),
    ("lineage", 1),
    ("tombstoned", 1),
    ("history", 2),
    ("replay", 0),
];

fn parse_line(number: usize, raw: &str) -> Result<Option<Line>, ServerError> {
    let err = |message: String| ServerError::ScriptParse { line: number, message };
    let text = raw.trim();
    if text.is_empty() || text.starts_with('#') {
        return Ok(None);
    }
    let tokens = shlex::split(text).ok_or_else(|| err("unbalanced quotes".into()))?;
    let mut words = Vec::new();
    let mut options = Vec::new();
    let mut expect = None;
    for token in tokens {
        if token.starts_with('#') {
            break;
        }
        match token.split_once('=') {
            Some(("expect", code)) => expect = Some(code.to_owned()),
            Some((key, value)) if !key.is_empty() => options.push((key.to_owned(), value.to_owned())),
            _ => words.push(token),
        }
    }
    let Some(name) = words.first() else {
        return Err(err("a line needs a command word".into()));
    };
    let (_, min) = COMMANDS
        .iter()
        .find(|(c, _)| c == name)
        .ok_or_else(|| err(format!("unknown command {name:?}")))?;
    if words.len() - 1 < *min {
        return Err(err(format!("{name} needs at least {min} argument(s)")));
    }
    if name == "assert" {
        let what = &words[1];
        let (_, min) = ASSERTS
            .iter()
            .find(|(a, _)| a == what)
            .ok_or_else(|| err(format!("unknown assertion {what:?}")))?;
        if words.len() - 2 < *min {
            return Err(err(format!("assert {what} needs at least {min} argument(s)")));
        }
        if expect.is_some() {
            return Err(err("assertions cannot carry expect=".into()));
        }
    }
    Ok(Some(Line {
        number,
        text: text.to_owned(),
        words,
        options,
        expect,
    }))
}

fn parse_script(text: &str) -> Result<Vec<Line>, ServerError> {
    let mut lines = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        if let Some(line) = parse_line(index + 1, raw)? {
            lines.push(line);
        }
    }
    Ok(lines)
}

/// The first line that did not do what the script said.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioFailure {
    pub line: usize,
    pub command: String,
    pub expected: String,
    pub actual: String,
}

impl std::fmt::Display for ScenarioFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "line {}: {}\n  expected: {}\n  actual:   {}",
            self.line, self.command, self.expected, self.actual
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioReport {
    pub commands: usize,
    pub executed: usize,
    pub failure: Option<ScenarioFailure>,
    /// One entry per executed line.
    pub transcript: Vec<String>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

enum Outcome {
    Done(String),
    Failed(ServerError),
}

struct Mismatch {
    expected: String,
    actual: String,
}

fn mismatch(expected: impl Into<String>, actual: impl Into<String>) -> Mismatch {
    Mismatch {
        expected: expected.into(),
        actual: actual.into(),
    }
}

struct Runner {
    base: Option<PathBuf>,
    community: Community,
    versions: BTreeMap<String, VersionId>,
    sessions: BTreeMap<String, SessionId>,
}

fn fresh_community() -> Community {
    Community::in_memory()
        .with_clock(Arc::new(SteppingClock::default()))
        .with_policy(Arc::new(PropagationAuthority::Anyone))
}

/// Runs a script against a fresh in-memory community. Parse errors abort
/// with `SCRIPT_PARSE_ERROR` before anything executes.
pub fn run_scenario(text: &str) -> Result<ScenarioReport, ServerError> {
    run_with_base(text, None)
}

/// Like [`run_scenario`]; `file=` paths resolve against the script's
/// directory.
pub fn run_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioReport, ServerError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ServerError::ScriptParse { line: 0, message: format!("{}: {e}", path.display()) })?;
    run_with_base(&text, path.parent().map(Path::to_path_buf))
}

fn run_with_base(text: &str, base: Option<PathBuf>) -> Result<ScenarioReport, ServerError> {
    let lines = parse_script(text)?;
    let mut runner = Runner {
        base,
        community: fresh_community(),
        versions: BTreeMap::new(),
        sessions: BTreeMap::new(),
    };
    let mut report = ScenarioReport {
        commands: lines.len(),
        executed: 0,
        failure: None,
        transcript: Vec::new(),
    };
    for line in &lines {
        report.executed += 1;
        let failure = |m: Mismatch| ScenarioFailure {
            line: line.number,
            command: line.text.clone(),
            expected: m.expected,
            actual: m.actual,
        };
        match runner.execute(line) {
            Ok(note) => report.transcript.push(format!("{:>4}  {}  -> {note}", line.number, line.text)),
            Err(m) => {
                report.failure = Some(failure(m));
                return Ok(report);
            }
        }
    }
    if let Err(m) = runner.check_replay() {
        report.failure = Some(ScenarioFailure {
            line: 0,
            command: "(implicit replay check)".into(),
            expected: m.expected,
            actual: m.actual,
        });
    }
    Ok(report)
}

fn parse_value<T: std::str::FromStr>(raw: &str, what: &str) -> Result<T, Mismatch>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e: T::Err| mismatch(format!("a valid {what}"), format!("{raw:?}: {e}")))
}

fn bad(message: impl Into<String>) -> Mismatch {
    mismatch("a well-formed command", message)
}

impl Runner {
    fn execute(&mut self, line: &Line) -> Result<String, Mismatch> {
        if line.words[0] == "assert" {
            return self.assert(line);
        }
        let outcome = self.command(line)?;
        match (outcome, &line.expect) {
            (Outcome::Done(note), None) => Ok(note),
            (Outcome::Done(note), Some(code)) => Err(mismatch(format!("error {code}"), format!("success ({note})"))),
            (Outcome::Failed(e), None) => Err(mismatch("success", format!("{}: {e}", e.code()))),
            (Outcome::Failed(e), Some(code)) if e.code() == code => Ok(format!("failed as expected with {code}")),
            (Outcome::Failed(e), Some(code)) => Err(mismatch(format!("error {code}"), format!("{}: {e}", e.code()))),
        }
    }

    fn version(&self, alias: &str) -> Result<VersionId, Mismatch> {
        match self.versions.get(alias) {
            Some(v) => Ok(v.clone()),
            None if alias.starts_with('v') && self.community.state().repository.contains(&VersionId::new(alias)) => {
                Ok(VersionId::new(alias))
            }
            None => Err(bad(format!("unknown protocol alias {alias:?}"))),
        }
    }

    fn session(&self, alias: &str) -> SessionId {
        self.sessions
            .get(alias)
            .cloned()
            .unwrap_or_else(|| SessionId::new(alias))
    }

    fn read_file(&self, rel: &str) -> Result<String, Mismatch> {
        let path = match &self.base {
            Some(base) => base.join(rel),
            None => PathBuf::from(rel),
        };
        std::fs::read_to_string(&path).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    fn patch(&self, line: &Line) -> Result<ProtocolPatch, Mismatch> {
        if let Some(name) = line.option("patch") {
            return match name {
                "comment-expert" => Ok(fixtures::comment_expert_patch()),
                "comment-both" => Ok(fixtures::comment_both_patch()),
                "remove-q1" => Ok(fixtures::remove_q1_patch()),
                other => Err(bad(format!("unknown builtin patch {other:?}"))),
            };
        }
        let text = self.read_file(line.required("patch-file").map_err(bad)?)?;
        ProtocolPatch::from_json(&text).map_err(|e| bad(e.to_string()))
    }

    fn run(&mut self, f: impl FnOnce(&mut Community) -> Result<String, ServerError>) -> Outcome {
        match f(&mut self.community) {
            Ok(note) => Outcome::Done(note),
            Err(e) => Outcome::Failed(e),
        }
    }

    fn command(&mut self, line: &Line) -> Result<Outcome, Mismatch> {
        let w = |i: usize, what: &str| line.word(i, what).map_err(bad);
        match line.words[0].as_str() {
            "reset" => {
                self.community = fresh_community();
                self.versions.clear();
                self.sessions.clear();
                Ok(Outcome::Done("fresh community".into()))
            }
            "environment" => {
                let id = w(1, "environment id")?;
                let env = match line.option("builtin") {
                    Some("env-g1") => fixtures::env_g1(),
                    Some("env-g2") => fixtures::env_g2_without_comment(),
                    Some("env-g2c") => fixtures::env_g2_with_comment(),
                    Some(other) => return Err(bad(format!("unknown builtin environment {other:?}"))),
                    None => {
                        let mut env = Environment::new(id);
                        for (action, uri) in &line.options {
                            let endpoint = Endpoint::parse(uri).map_err(|e| bad(e.to_string()))?;
                            env = env.with_service(action.as_str(), endpoint);
                        }
                        env
                    }
                };
                let env = Environment {
                    env_id: id.into(),
                    ..env
                };
                Ok(self.run(|c| c.register_environment(env).map(|_| "registered".into())))
            }
            "group" => {
                let id = w(1, "group id")?;
                let env = line.required("env").map_err(bad)?;
                let mut group = match line.option("from") {
                    Some("faq") => fixtures::faq_group(id, env),
                    Some(other) => return Err(bad(format!("unknown group template {other:?}"))),
                    None => Group::new(id, env),
                };
                for (who, roles) in line.options.iter().filter(|(k, _)| k != "env" && k != "from") {
                    group = group.with_member(who.as_str(), roles.split(',').map(str::trim));
                }
                Ok(self.run(|c| c.register_group(group).map(|_| "registered".into())))
            }
            "protocol" => {
                let alias = w(1, "alias")?.to_owned();
                let protocol = match (line.option("builtin"), line.option("file")) {
                    (Some("faq"), _) => fixtures::faq(),
                    (Some("faq-implemented"), _) => fixtures::faq_implemented(),
                    (Some("review"), _) => fixtures::review(),
                    (Some(other), _) => return Err(bad(format!("unknown builtin protocol {other:?}"))),
                    (None, Some(file)) => SocialProtocol::from_json(&self.read_file(file)?).map_err(|e| bad(e.to_string()))?,
                    (None, None) => return Err(bad("protocol needs builtin= or file=")),
                };
                let scope = match line.option("scope").unwrap_or("catalog") {
                    "catalog" => Scope::Catalog,
                    other => match other.strip_prefix("private:") {
                        Some(group) => Scope::Private(GroupId::new(group)),
                        None => return Err(bad(format!("unknown scope {other:?}"))),
                    },
                };
                Ok(match self.community.register_protocol(protocol, scope) {
                    Ok(v) => {
                        self.versions.insert(alias, v.clone());
                        Outcome::Done(v.to_string())
                    }
                    Err(e) => Outcome::Failed(e),
                })
            }
            "derive" => {
                let alias = w(1, "alias")?.to_owned();
                let parent = self.version(w(2, "parent")?)?;
                let patch = self.patch(line)?;
                let owner = GroupId::new(line.required("owner").map_err(bad)?);
                Ok(match self.community.derive_version(&parent, patch, &owner, None) {
                    Ok(v) => {
                        self.versions.insert(alias, v.clone());
                        Outcome::Done(v.to_string())
                    }
                    Err(e) => Outcome::Failed(e),
                })
            }
            "instantiate" => {
                let pid = ProcessId::new(w(1, "process id")?);
                let version = self.version(w(2, "protocol")?)?;
                let group = GroupId::new(line.required("group").map_err(bad)?);
                let start = line.option("start").map(StateId::new);
                Ok(self.run(|c| {
                    c.instantiate(Some(pid), &version, &group, start)
                        .map(|p| format!("at {}", p.current_state))
                }))
            }
            "trigger" => {
                let pid = ProcessId::new(w(1, "process id")?);
                let actor = CollaboratorId::new(w(2, "actor")?);
                let transition = TransitionId::new(w(3, "transition")?);
                Ok(self.run(|c| c.trigger(&pid, &actor, &transition).map(|e| format!("{} -> {}", e.from, e.to))))
            }
            "split" => {
                let pid = ProcessId::new(w(1, "process id")?);
                let partition: Vec<BTreeSet<CollaboratorId>> = line.words[2..]
                    .iter()
                    .map(|part| part.split(',').map(CollaboratorId::from).collect())
                    .collect();
                Ok(self.run(|c| c.split(&pid, partition).map(|ids| format!("children {}", join(&ids)))))
            }
            "merge" => {
                let ids: Vec<ProcessId> = line.words[1..].iter().map(|s| ProcessId::new(s.as_str())).collect();
                Ok(self.run(|c| c.merge(ids).map(|id| format!("merged into {id}"))))
            }
            "migrate" => {
                let pid = ProcessId::new(w(1, "process id")?);
                let version = self.version(w(2, "protocol")?)?;
                Ok(self.run(|c| c.migrate(&pid, &version).map(|m| format!("now ruled by {}", m.to_version))))
            }
            "negotiate" => {
                let alias = w(1, "session alias")?.to_owned();
                let pid = ProcessId::new(w(2, "process id")?);
                let initiator = CollaboratorId::new(w(3, "initiator")?);
                let patch = self.patch(line)?;
                let rationale = line.option("rationale").unwrap_or_default().to_owned();
                Ok(match self.community.open_negotiation(&pid, &initiator, patch, rationale) {
                    Ok(s) => {
                        self.sessions.insert(alias, s.session_id.clone());
                        Outcome::Done(format!("session {} with {} participants", s.session_id, s.participants.len()))
                    }
                    Err(e) => Outcome::Failed(e),
                })
            }
            "amend" => {
                let session = self.session(w(1, "session")?);
                let proposer = CollaboratorId::new(w(2, "proposer")?);
                let patch = self.patch(line)?;
                let rationale = line.option("rationale").unwrap_or_default().to_owned();
                let supersedes = match line.option("supersedes") {
                    Some(p) => ProposalId::new(p),
                    None => match self.community.session(&session) {
                        Ok(s) => s.live_proposal().proposal_id.clone(),
                        Err(e) => return Ok(Outcome::Failed(e)),
                    },
                };
                Ok(self.run(|c| {
                    c.propose(&session, &proposer, patch, rationale, &supersedes)
                        .map(|p| format!("proposal {}", p.proposal_id))
                }))
            }
            "vote" | "vote-all" => {
                let session = self.session(w(1, "session")?);
                let (voters, value) = if line.words[0] == "vote" {
                    (vec![CollaboratorId::new(w(2, "voter")?)], w(3, "accept|reject")?)
                } else {
                    let voters = match self.community.session(&session) {
                        Ok(s) => s.participants.iter().cloned().collect(),
                        Err(e) => return Ok(Outcome::Failed(e)),
                    };
                    (voters, w(2, "accept|reject")?)
                };
                let value = match value {
                    "accept" => VoteValue::Accept,
                    "reject" => VoteValue::Reject,
                    other => return Err(bad(format!("vote must be accept or reject, not {other:?}"))),
                };
                let proposal = match line.option("proposal") {
                    Some(p) => ProposalId::new(p),
                    None => match self.community.session(&session) {
                        Ok(s) => s.live_proposal().proposal_id.clone(),
                        Err(e) => return Ok(Outcome::Failed(e)),
                    },
                };
                Ok(self.run(|c| {
                    let mut last = None;
                    for voter in &voters {
                        last = Some(c.vote(&session, voter, &proposal, value)?);
                    }
                    let t = last.expect("at least one voter");
                    Ok(format!(
                        "{}: {} accept, {} reject, {} pending",
                        t.proposal_id,
                        t.accept,
                        t.reject,
                        t.pending.len()
                    ))
                }))
            }
            "consent" => {
                let session = self.session(w(1, "session")?);
                let who = CollaboratorId::new(w(2, "participant")?);
                let consent = match w(3, "yes|no")? {
                    "yes" => true,
                    "no" => false,
                    other => return Err(bad(format!("consent must be yes or no, not {other:?}"))),
                };
                Ok(self.run(|c| c.set_consent(&session, &who, consent).map(|_| "noted".into())))
            }
            "close" => {
                let session = self.session(w(1, "session")?);
                let closer = CollaboratorId::new(w(2, "closer")?);
                let rule = match line.option("rule") {
                    Some(raw) => Some(parse_value::<AcceptanceRule>(raw, "acceptance rule")?),
                    None => None,
                };
                Ok(match self.community.close(&session, &closer, rule) {
                    Ok(outcome) => {
                        if let (Some(alias), Some(v)) = (line.option("as"), &outcome.result_version) {
                            self.versions.insert(alias.to_owned(), v.clone());
                        }
                        Outcome::Done(match &outcome.result_version {
                            Some(v) => format!("{:?}, result {v}", outcome.status),
                            None => format!("{:?}", outcome.status),
                        })
                    }
                    Err(e) => Outcome::Failed(e),
                })
            }
            "record" => {
                let session = self.session(w(1, "session")?);
                Ok(self.run(|c| c.record_history(&session).map(|_| "recorded".into())))
            }
            "propagate" => {
                let version = self.version(w(1, "protocol")?)?;
                let strategy: PropagationStrategy = parse_value(w(2, "strategy")?, "propagation strategy")?;
                let actor = CollaboratorId::new(line.option("by").unwrap_or("script"));
                Ok(self.run(|c| {
                    c.propagate(&actor, &version, strategy)
                        .map(|r| format!("migrated [{}], tombstoned [{}]", join(&r.migrated), join(&r.tombstoned)))
                }))
            }
            "adopt" => {
                let alias = w(1, "alias")?.to_owned();
                let version = self.version(w(2, "protocol")?)?;
                let group = GroupId::new(line.required("group").map_err(bad)?);
                let chosen: BTreeMap<ActionName, String> = line
                    .options
                    .iter()
                    .filter_map(|(k, v)| k.strip_prefix("bind:").map(|a| (ActionName::new(a), v.clone())))
                    .collect();
                let role_bindings: Vec<RoleBinding> = match line.option("roles") {
                    Some("faq") => fixtures::faq_implementation().role_bindings,
                    Some("group") => match self.community.state().groups.get(&group) {
                        Some(g) => group_bindings(g),
                        None => Vec::new(),
                    },
                    Some(other) => return Err(bad(format!("unknown role template {other:?}"))),
                    None => Vec::new(),
                };
                let want_missing = line.option("missing").map(|m| {
                    m.split(',')
                        .filter(|a| !a.is_empty())
                        .map(str::to_owned)
                        .collect::<BTreeSet<_>>()
                });
                let outcome = match self.community.adopt(&version, &group, &chosen, &role_bindings, true) {
                    Ok(outcome) => outcome,
                    Err(e) => return Ok(Outcome::Failed(e)),
                };
                match (outcome.adoption, want_missing) {
                    (Adoption::Candidate { .. }, None) => {
                        let v = outcome.registered.last().cloned().expect("registered");
                        self.versions.insert(alias, v.clone());
                        Ok(Outcome::Done(format!("candidate {v}")))
                    }
                    (Adoption::Candidate { .. }, Some(want)) => {
                        Err(mismatch(format!("missing {}", set_text(&want)), "an implemented candidate"))
                    }
                    (Adoption::Missing { actions }, want) => {
                        let actual: BTreeSet<String> = actions.iter().map(|a| a.to_string()).collect();
                        match want {
                            Some(want) if want == actual => Ok(Outcome::Done(format!("missing {}", set_text(&actual)))),
                            Some(want) => Err(mismatch(format!("missing {}", set_text(&want)), format!("missing {}", set_text(&actual)))),
                            None => Err(mismatch("an implemented candidate", format!("missing {}", set_text(&actual)))),
                        }
                    }
                }
            }
            other => Err(bad(format!("unhandled command {other}"))),
        }
    }

    fn assert(&self, line: &Line) -> Result<String, Mismatch> {
        let w = |i: usize, what: &str| line.word(i, what).map_err(bad);
        let c = &self.community;
        let failed = |e: ServerError| mismatch("a successful query", format!("{}: {e}", e.code()));
        match line.words[1].as_str() {
            "state" => {
                let p = c.process(&ProcessId::new(w(2, "process id")?)).map_err(failed)?;
                let want = w(3, "state")?;
                check(want, p.current_state.as_str())
            }
            "outcome" => {
                let view = c.process_view(&ProcessId::new(w(2, "process id")?)).map_err(failed)?;
                let actual = match view.outcome {
                    ProcessOutcome::Running => "running",
                    ProcessOutcome::Success { .. } => "success",
                    ProcessOutcome::Failure { .. } => "failure",
                };
                check(w(3, "outcome")?, actual)
            }
            "status" => {
                let p = c.process(&ProcessId::new(w(2, "process id")?)).map_err(failed)?;
                let actual = match (&p.retired, p.status) {
                    (Some(_), _) => "retired",
                    (None, ProcessStatus::Running) => "running",
                    (None, ProcessStatus::Completed) => "completed",
                };
                check(w(3, "status")?, actual)
            }
            "version" => {
                let p = c.process(&ProcessId::new(w(2, "process id")?)).map_err(failed)?;
                let want = self.version(w(3, "protocol")?)?;
                check(&self.describe(&want), &self.describe(&p.protocol_version))
            }
            "catalog" => {
                let group = GroupId::new(w(2, "group")?);
                let mut want: BTreeSet<String> = BTreeSet::new();
                for alias in &line.words[3..] {
                    want.insert(self.describe(&self.version(alias)?));
                }
                let actual: BTreeSet<String> = c
                    .catalog(&group)
                    .map_err(failed)?
                    .iter()
                    .map(|e| self.describe(&e.version))
                    .collect();
                check(&set_text(&want), &set_text(&actual))
            }
            "transitions" => {
                let pid = ProcessId::new(w(2, "process id")?);
                let who = CollaboratorId::new(w(3, "collaborator")?);
                let want: BTreeSet<String> = line.words[4..].iter().cloned().collect();
                let actual: BTreeSet<String> = c
                    .available(&pid, &who)
                    .map_err(failed)?
                    .iter()
                    .map(|t| t.id.to_string())
                    .collect();
                check(&set_text(&want), &set_text(&actual))
            }
            "session" => {
                let s = c.session(&self.session(w(2, "session")?)).map_err(failed)?;
                let actual = match s.status {
                    SessionStatus::Open => "open",
                    SessionStatus::Accepted => "accepted",
                    SessionStatus::Rejected => "rejected",
                    SessionStatus::Withdrawn => "withdrawn",
                };
                check(w(3, "status")?, actual)
            }
            "new-transitions" => {
                let new = c.protocol(&self.version(w(2, "protocol")?)?).map_err(failed)?;
                let base = c.protocol(&self.version(w(3, "base protocol")?)?).map_err(failed)?;
                let want: BTreeSet<String> = line.words[4..].iter().cloned().collect();
                let actual: BTreeSet<String> = match diff(base, new) {
                    ProtocolDiff::NoChange => BTreeSet::new(),
                    ProtocolDiff::Patch(patch) => patch
                        .edits()
                        .iter()
                        .filter_map(|e| match e {
                            PatchEdit::AddTransition { transition } => Some(transition.id.to_string()),
                            _ => None,
                        })
                        .collect(),
                };
                check(&set_text(&want), &set_text(&actual))
            }
            "lineage" => {
                let v = self.version(w(2, "protocol")?)?;
                let mut want = Vec::new();
                for alias in &line.words[3..] {
                    want.push(self.describe(&self.version(alias)?));
                }
                let actual: Vec<String> = c
                    .lineage(&v)
                    .map_err(failed)?
                    .iter()
                    .map(|h| self.describe(&h.version))
                    .collect();
                check(&want.join(" <- "), &actual.join(" <- "))
            }
            "tombstoned" => {
                let v = self.version(w(2, "protocol")?)?;
                let actual = c.state().repository.catalog_tombstones.contains(&v);
                let want = line.words.get(3).map_or("yes", String::as_str);
                check(want, if actual { "yes" } else { "no" })
            }
            "history" => {
                let v = self.version(w(2, "protocol")?)?;
                let group = GroupId::new(w(3, "group")?);
                let views = c.history(&v, &group).map_err(failed)?;
                let mut notes = Vec::new();
                if let Some(count) = line.option("count") {
                    check(count, &views.len().to_string())?;
                    notes.push(format!("{count} record(s)"));
                }
                if let Some(withheld) = line.option("withheld") {
                    let actual: usize = views.iter().map(|view| view.withheld_participants).sum();
                    check(withheld, &actual.to_string())?;
                    notes.push(format!("{actual} withheld"));
                }
                if let Some(visible) = line.option("visible") {
                    let want: BTreeSet<String> = visible.split(',').filter(|s| !s.is_empty()).map(str::to_owned).collect();
                    let actual: BTreeSet<String> = views
                        .iter()
                        .flat_map(|view| view.participants.iter().map(|p| p.to_string()))
                        .collect();
                    check(&set_text(&want), &set_text(&actual))?;
                    notes.push(format!("visible {}", set_text(&actual)));
                }
                Ok(notes.join(", "))
            }
            "replay" => self.check_replay().map(|_| "replay matches".into()),
            other => Err(bad(format!("unhandled assertion {other}"))),
        }
    }

    /// Alias of a version if the script named it, otherwise the id.
    fn describe(&self, v: &VersionId) -> String {
        self.versions
            .iter()
            .find(|(_, id)| *id == v)
            .map_or_else(|| v.to_string(), |(alias, _)| alias.clone())
    }

    fn check_replay(&self) -> Result<(), Mismatch> {
        match self.community.replay_matches() {
            Ok(true) => Ok(()),
            Ok(false) => Err(mismatch("replayed state equals live state", "replayed state differs")),
            Err(e) => Err(mismatch("log replays", format!("{}: {e}", e.code()))),
        }
    }
}

fn check(expected: &str, actual: &str) -> Result<String, Mismatch> {
    if expected == actual {
        Ok(actual.to_owned())
    } else {
        Err(mismatch(expected, actual))
    }
}

fn set_text(set: &BTreeSet<String>) -> String {
    format!("{{{}}}", set.iter().cloned().collect::<Vec<_>>().join(", "))
}

fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

fn group_bindings(group: &Group) -> Vec<RoleBinding> {
    let mut by_role: BTreeMap<RoleName, BTreeSet<CollaboratorId>> = BTreeMap::new();
    for (who, role) in group.role_pairs() {
        by_role.entry(role).or_default().insert(who);
    }
    by_role
        .into_iter()
        .map(|(role, collaborators)| RoleBinding { role, collaborators })
        .collect()
}

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use serde_json::Value;
use socproto::fixtures;
use socproto_ffi::*;

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

/// Takes ownership of a returned string and frees it.
unsafe fn take(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    socproto_string_free(p);
    s
}

unsafe fn take_json(p: *mut c_char) -> Value {
    serde_json::from_str(&take(p)).unwrap()
}

fn last_code() -> String {
    let p = socproto_last_error_code();
    if p.is_null() {
        return String::new();
    }
    unsafe { CStr::from_ptr(p).to_str().unwrap().to_owned() }
}

fn last_message() -> String {
    let p = socproto_last_error_message();
    if p.is_null() {
        return String::new();
    }
    unsafe { CStr::from_ptr(p).to_str().unwrap().to_owned() }
}

/// Community with env-g1, the FAQ group G1, and the implemented FAQ; the
/// returned string is its version.
unsafe fn faq_community(handle: *mut SocprotoCommunity) -> String {
    let env = cs(fixtures::ENV_G1_JSON);
    assert_eq!(socproto_register_environment(handle, env.as_ptr()), SocprotoStatus::Ok);
    let group = cs(&serde_json::to_string(&fixtures::faq_group("G1", "env-g1")).unwrap());
    assert_eq!(socproto_register_group(handle, group.as_ptr()), SocprotoStatus::Ok);
    let protocol = cs(&fixtures::faq_implemented().to_canonical_json());
    let mut version = ptr::null_mut();
    assert_eq!(socproto_register_protocol(handle, protocol.as_ptr(), ptr::null(), &mut version), SocprotoStatus::Ok);
    take(version)
}

unsafe fn trigger(handle: *mut SocprotoCommunity, actor: &str, transition: &str) -> SocprotoStatus {
    let mut event = ptr::null_mut();
    let status = socproto_trigger(handle, cs("faq").as_ptr(), cs(actor).as_ptr(), cs(transition).as_ptr(), &mut event);
    if status == SocprotoStatus::Ok {
        take(event);
    } else {
        assert!(event.is_null());
    }
    status
}

#[test]
fn validate_reports_findings() {
    unsafe {
        let mut report = ptr::null_mut();
        assert_eq!(socproto_validate(cs(fixtures::FAQ_JSON).as_ptr(), &mut report), SocprotoStatus::Ok);
        assert_eq!(take_json(report)["valid"], true);
        assert_eq!(last_code(), "");

        let mut report = ptr::null_mut();
        assert_eq!(socproto_validate(cs("{\"states\": 3}").as_ptr(), &mut report), SocprotoStatus::Rejected);
        assert_eq!(last_code(), "PARSE_ERROR");
        assert!(report.is_null());
    }
}

#[test]
fn null_and_bad_input_are_reported() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(socproto_validate(ptr::null(), &mut out), SocprotoStatus::NullPointer);
        assert_eq!(last_code(), "NULL_POINTER");
        assert!(last_message().contains("protocol_json"));

        assert_eq!(socproto_validate(cs(fixtures::FAQ_JSON).as_ptr(), ptr::null_mut()), SocprotoStatus::NullPointer);

        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(socproto_validate(bad.as_ptr().cast(), &mut out), SocprotoStatus::InvalidUtf8);
        assert_eq!(last_code(), "INVALID_UTF8");

        assert_eq!(socproto_register_group(ptr::null_mut(), cs("{}").as_ptr()), SocprotoStatus::NullPointer);

        let handle = socproto_community_new();
        assert_eq!(socproto_register_group(handle, cs("not json").as_ptr()), SocprotoStatus::InvalidJson);
        assert_eq!(last_code(), "PARSE_ERROR");
        assert_eq!(socproto_set_acceptance_rule(handle, cs("shouting").as_ptr()), SocprotoStatus::Rejected);
        assert_eq!(last_code(), "INVALID_RULE");
        assert_eq!(socproto_set_acceptance_rule(handle, cs("quorum:0.5").as_ptr()), SocprotoStatus::Ok);
        socproto_community_free(handle);

        socproto_community_free(ptr::null_mut());
        socproto_string_free(ptr::null_mut());
    }
}

#[test]
fn lifecycle_through_the_c_interface() {
    unsafe {
        let handle = socproto_community_new();
        let version = faq_community(handle);
        assert!(version.starts_with('v'));

        let mut process = ptr::null_mut();
        let status = socproto_instantiate(handle, cs("faq").as_ptr(), cs(&version).as_ptr(), cs("G1").as_ptr(), &mut process);
        assert_eq!(status, SocprotoStatus::Ok);
        assert_eq!(take_json(process)["process"]["current_state"], "q0");

        let mut available = ptr::null_mut();
        let status = socproto_available_transitions(handle, cs("faq").as_ptr(), cs("john-smith").as_ptr(), &mut available);
        assert_eq!(status, SocprotoStatus::Ok);
        let ids: Vec<String> = take_json(available).as_array().unwrap().iter().map(|t| t["id"].as_str().unwrap().to_owned()).collect();
        assert_eq!(ids, ["t-ask-first"]);

        assert_eq!(trigger(handle, "scott-tiger", "t-ask-first"), SocprotoStatus::Rejected);
        assert_eq!(last_code(), "ROLE_MISMATCH");
        for (actor, t) in [("john-smith", "t-ask-first"), ("jennifer-scott", "t-answer"), ("amy-tony", "t-ask-next"), ("bill-bogard", "t-answer")] {
            assert_eq!(trigger(handle, actor, t), SocprotoStatus::Ok, "{actor} {t}: {}", last_message());
        }

        let mut session = ptr::null_mut();
        let patch = cs(fixtures::COMMENT_EXPERT_PATCH_JSON);
        let status = socproto_open_negotiation(handle, cs("faq").as_ptr(), cs("bill-bogard").as_ptr(), patch.as_ptr(), ptr::null(), &mut session);
        assert_eq!(status, SocprotoStatus::Ok, "{}", last_message());
        let sid = cs(&take(session));

        let mut proposal = ptr::null_mut();
        let both = cs(fixtures::COMMENT_BOTH_PATCH_JSON);
        let status = socproto_propose(handle, sid.as_ptr(), cs("amy-tony").as_ptr(), both.as_ptr(), cs("users too").as_ptr(), cs("p1").as_ptr(), &mut proposal);
        assert_eq!(status, SocprotoStatus::Ok, "{}", last_message());
        assert_eq!(take(proposal), "p2");

        let mut outcome = ptr::null_mut();
        assert_eq!(socproto_close_negotiation(handle, sid.as_ptr(), cs("scott-tiger").as_ptr(), &mut outcome), SocprotoStatus::Rejected);
        assert_eq!(last_code(), "VOTING_INCOMPLETE");

        for who in ["amy-tony", "anna-gates", "bill-bogard", "jennifer-scott", "john-smith", "scott-tiger"] {
            let mut tally = ptr::null_mut();
            assert_eq!(socproto_vote(handle, sid.as_ptr(), cs(who).as_ptr(), cs("p2").as_ptr(), 1, &mut tally), SocprotoStatus::Ok);
            take(tally);
        }
        let mut outcome = ptr::null_mut();
        assert_eq!(socproto_close_negotiation(handle, sid.as_ptr(), cs("scott-tiger").as_ptr(), &mut outcome), SocprotoStatus::Ok);
        let outcome = take_json(outcome);
        assert_eq!(outcome["status"], "accepted");
        let adapted = outcome["result_version"].as_str().unwrap().to_owned();

        let mut lineage = ptr::null_mut();
        assert_eq!(socproto_export_lineage(handle, cs(&adapted).as_ptr(), &mut lineage), SocprotoStatus::Ok);
        assert_eq!(take(lineage), format!("{version} -> {adapted} [{}]\n", sid.to_str().unwrap()));

        let mut report = ptr::null_mut();
        let status = socproto_propagate(handle, cs("anna-gates").as_ptr(), cs(&adapted).as_ptr(), cs("global").as_ptr(), &mut report);
        assert_eq!(status, SocprotoStatus::Ok, "{}", last_message());
        assert_eq!(take_json(report)["catalog_added"][0], adapted.as_str());

        let mut report = ptr::null_mut();
        let status = socproto_propagate(handle, cs("anna-gates").as_ptr(), cs(&adapted).as_ptr(), cs("sideways").as_ptr(), &mut report);
        assert_eq!(status, SocprotoStatus::Rejected);
        assert_eq!(last_code(), "UNKNOWN_STRATEGY");

        let mut catalog = ptr::null_mut();
        assert_eq!(socproto_catalog(handle, cs("G1").as_ptr(), &mut catalog), SocprotoStatus::Ok);
        assert_eq!(take_json(catalog).as_array().unwrap().len(), 2);

        let mut history = ptr::null_mut();
        assert_eq!(socproto_history(handle, cs(&adapted).as_ptr(), cs("G2").as_ptr(), &mut history), SocprotoStatus::Ok);
        assert_eq!(take_json(history), Value::Array(vec![]));

        let mut state = ptr::null_mut();
        assert_eq!(socproto_state_json(handle, &mut state), SocprotoStatus::Ok);
        let state = take(state);
        assert!(state.contains("t-comment-user"));
        socproto_community_free(handle);
    }
}

#[test]
fn a_file_backed_community_replays() {
    let dir = tempfile::tempdir().unwrap();
    let path = cs(dir.path().join("events.jsonl").to_str().unwrap());
    unsafe {
        let mut handle = ptr::null_mut();
        assert_eq!(socproto_community_open(path.as_ptr(), &mut handle), SocprotoStatus::Ok);
        faq_community(handle);
        let mut live = ptr::null_mut();
        assert_eq!(socproto_state_json(handle, &mut live), SocprotoStatus::Ok);
        let live = take(live);
        socproto_community_free(handle);

        let mut reopened = ptr::null_mut();
        assert_eq!(socproto_community_open(path.as_ptr(), &mut reopened), SocprotoStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(socproto_state_json(reopened, &mut again), SocprotoStatus::Ok);
        assert_eq!(take(again), live);
        socproto_community_free(reopened);

        let text = cs(&std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap());
        let mut replayed = ptr::null_mut();
        assert_eq!(socproto_replay(text.as_ptr(), &mut replayed), SocprotoStatus::Ok);
        assert_eq!(take(replayed), live);

        let mut replayed = ptr::null_mut();
        assert_eq!(socproto_replay(cs("garbage\n").as_ptr(), &mut replayed), SocprotoStatus::Rejected);
        assert_eq!(last_code(), "CORRUPT_LOG");
    }
}

#[test]
fn scenarios_run_through_the_c_interface() {
    let script = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/scenarios/faq_adaptation.scn")).unwrap();
    unsafe {
        let mut report = ptr::null_mut();
        assert_eq!(socproto_run_scenario(cs(&script).as_ptr(), &mut report), SocprotoStatus::Ok);
        let report = take_json(report);
        assert_eq!(report["failure"], Value::Null);

        let mut report = ptr::null_mut();
        assert_eq!(socproto_run_scenario(cs("warp 9\n").as_ptr(), &mut report), SocprotoStatus::Rejected);
        assert_eq!(last_code(), "SCRIPT_PARSE_ERROR");
    }
}

#[test]
fn errors_are_per_thread() {
    unsafe {
        let mut out = ptr::null_mut();
        socproto_validate(ptr::null(), &mut out);
    }
    assert_eq!(last_code(), "NULL_POINTER");
    let other = std::thread::spawn(last_code).join().unwrap();
    assert_eq!(other, "");
}

#[test]
fn the_header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/socproto.h")).unwrap();
    for name in [
        "socproto_string_free",
        "socproto_last_error_code",
        "socproto_last_error_message",
        "socproto_validate",
        "socproto_community_new",
        "socproto_community_open",
        "socproto_community_free",
        "socproto_set_acceptance_rule",
        "socproto_register_environment",
        "socproto_register_group",
        "socproto_register_protocol",
        "socproto_instantiate",
        "socproto_available_transitions",
        "socproto_trigger",
        "socproto_open_negotiation",
        "socproto_propose",
        "socproto_vote",
        "socproto_close_negotiation",
        "socproto_propagate",
        "socproto_catalog",
        "socproto_export_lineage",
        "socproto_history",
        "socproto_state_json",
        "socproto_replay",
        "socproto_run_scenario",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing from the header");
    }
    assert!(header.contains("SOCPROTO_STATUS_REJECTED = 4"));
    assert!(header.contains("typedef struct SocprotoCommunity SocprotoCommunity;"));
}

use std::ffi::{c_char, CStr, CString};
use std::ptr;
use std::sync::OnceLock;

use qdlm::corpus::{serialize_kb, EvalRecord};
use qdlm::harness;
use qdlm::synthgen::{self, GenConfig, Split};
use qdlm_ffi::*;

struct Fixture {
    _dir: tempfile::TempDir,
    model: CString,
    kb: CString,
    records: Vec<EvalRecord>,
}

fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let generated = synthgen::generate(&GenConfig {
            seed: 5,
            n_dialogs: 60,
            test_dialogs: 4,
            ..Default::default()
        })
        .unwrap();
        let bundle = harness::train(&generated.train, &generated.kb, qdlm::lm::DEFAULT_ORDER).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let model = dir.path().join("model.json");
        let kb = dir.path().join("kb.txt");
        bundle.save(&model).unwrap();
        std::fs::write(&kb, serialize_kb(&generated.kb)).unwrap();
        Fixture {
            model: CString::new(model.to_str().unwrap()).unwrap(),
            kb: CString::new(kb.to_str().unwrap()).unwrap(),
            records: generated.dialog_records(Split::Test, 0),
            _dir: dir,
        }
    })
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(qdlm_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn take_string(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { qdlm_string_free(s) };
    out
}

fn load() -> *mut QdlmModel {
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { qdlm_model_load(fixture().model.as_ptr(), &mut model) },
        QdlmStatus::Ok
    );
    assert!(!model.is_null());
    model
}

fn c_candidates(candidates: &[&str]) -> (Vec<CString>, Vec<*const c_char>) {
    let owned: Vec<CString> = candidates.iter().map(|c| CString::new(*c).unwrap()).collect();
    let ptrs = owned.iter().map(|c| c.as_ptr()).collect();
    (owned, ptrs)
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(qdlm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_rejected() {
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { qdlm_model_load(ptr::null(), &mut model) },
        QdlmStatus::NullPointer
    );
    assert!(last_error().contains("path"));
    let mut n = 0usize;
    assert_eq!(
        unsafe { qdlm_model_cluster_count(ptr::null(), &mut n) },
        QdlmStatus::NullPointer
    );
    let mut session = ptr::null_mut();
    assert_eq!(
        unsafe { qdlm_session_new(ptr::null(), &mut session) },
        QdlmStatus::NullPointer
    );
    assert!(session.is_null());
    assert_eq!(
        unsafe { qdlm_word_levenshtein(ptr::null(), ptr::null(), &mut n) },
        QdlmStatus::NullPointer
    );
    unsafe {
        qdlm_model_free(ptr::null_mut());
        qdlm_session_free(ptr::null_mut());
        qdlm_string_free(ptr::null_mut());
    }
}

#[test]
fn load_errors_carry_status_and_message() {
    let missing = CString::new("/nonexistent/model.json").unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { qdlm_model_load(missing.as_ptr(), &mut model) }, QdlmStatus::Io);
    assert!(model.is_null());
    assert!(!last_error().is_empty());

    let dir = tempfile::tempdir().unwrap();
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{not json").unwrap();
    let garbage = CString::new(garbage.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { qdlm_model_load(garbage.as_ptr(), &mut model) },
        QdlmStatus::Parse
    );

    let bad = [0xffu8, 0xfe, 0];
    let mut d = 0usize;
    let ok = CString::new("a").unwrap();
    let status = unsafe { qdlm_word_levenshtein(bad.as_ptr().cast(), ok.as_ptr(), &mut d) };
    assert_eq!(status, QdlmStatus::InvalidUtf8);
}

#[test]
fn levenshtein_counts_words() {
    let a = CString::new("api_call spanish bombay eight moderate business").unwrap();
    let b = CString::new("api_call spanish paris eight cheap business").unwrap();
    let mut d = 99usize;
    assert_eq!(
        unsafe { qdlm_word_levenshtein(a.as_ptr(), b.as_ptr(), &mut d) },
        QdlmStatus::Ok
    );
    assert_eq!(d, 2);
    assert_eq!(
        unsafe { qdlm_word_levenshtein(a.as_ptr(), a.as_ptr(), &mut d) },
        QdlmStatus::Ok
    );
    assert_eq!(d, 0);
}

#[test]
fn session_tracks_state_and_builds_api_call() {
    let model = load();
    let mut clusters = 0usize;
    assert_eq!(
        unsafe { qdlm_model_cluster_count(model, &mut clusters) },
        QdlmStatus::Ok
    );
    assert!(clusters > 0);
    assert_eq!(
        unsafe { qdlm_model_load_kb(model, fixture().kb.as_ptr()) },
        QdlmStatus::Ok
    );

    let mut session = ptr::null_mut();
    assert_eq!(unsafe { qdlm_session_new(model, &mut session) }, QdlmStatus::Ok);

    let mut call = ptr::null_mut();
    assert_eq!(
        unsafe { qdlm_session_api_call(session, &mut call) },
        QdlmStatus::InvalidArgument
    );
    assert!(call.is_null());

    let turns = [
        ("hello", "hello what can i help you with today"),
        (
            "i'd like to book a table with a business atmosphere with spanish cuisine",
            "i am on it",
        ),
        (
            "in bombay for eight people please",
            "which price range are you looking for",
        ),
    ];
    let last = "moderate price range please";
    for (user, system) in turns {
        let user = CString::new(user).unwrap();
        let system = CString::new(system).unwrap();
        assert_eq!(unsafe { qdlm_session_user(session, user.as_ptr()) }, QdlmStatus::Ok);
        assert_eq!(unsafe { qdlm_session_system(session, system.as_ptr()) }, QdlmStatus::Ok);
    }
    let user = CString::new(last).unwrap();
    assert_eq!(unsafe { qdlm_session_user(session, user.as_ptr()) }, QdlmStatus::Ok);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { qdlm_session_state_json(session, &mut json) }, QdlmStatus::Ok);
    let state: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
    assert_eq!(state["location"], "bombay");
    assert_eq!(state["price_range"], "moderate");

    assert_eq!(unsafe { qdlm_session_api_call(session, &mut call) }, QdlmStatus::Ok);
    let expected = "api_call spanish bombay eight moderate business";
    assert_eq!(take_string(call), expected);

    let candidates = [
        "api_call spanish bombay eight cheap business",
        expected,
        "where should it be",
    ];
    let bundle = qdlm::ModelBundle::load(std::path::Path::new(fixture().model.to_str().unwrap())).unwrap();
    let kb = qdlm::corpus::parse_kb_str(&std::fs::read_to_string(fixture().kb.to_str().unwrap()).unwrap()).unwrap();
    let lexicon = bundle.runtime_lexicon(Some(&qdlm::kb::Lexicon::from_kb(&kb)));
    let mut core = qdlm::Session::new(std::sync::Arc::new(bundle), std::sync::Arc::new(lexicon));
    for (user, system) in turns {
        core.observe_user(user);
        core.observe_system(system);
    }
    core.observe_user(last);
    let want = core.select(&candidates).unwrap().best();

    let (_owned, ptrs) = c_candidates(&candidates);
    let (mut index, mut score) = (99usize, 0.0f64);
    let status = unsafe { qdlm_session_select(session, ptrs.as_ptr(), ptrs.len(), &mut index, &mut score) };
    assert_eq!(status, QdlmStatus::Ok);
    assert_eq!((index, score), want);

    let status = unsafe { qdlm_session_select(session, ptrs.as_ptr(), 0, &mut index, &mut score) };
    assert_eq!(status, QdlmStatus::InvalidArgument);

    let status = unsafe { qdlm_session_respond(session, ptrs.as_ptr(), ptrs.len(), &mut index, &mut score) };
    assert_eq!(status, QdlmStatus::Ok);
    assert_eq!(index, want.0);

    unsafe {
        qdlm_session_free(session);
        qdlm_model_free(model);
    }
}

#[test]
fn predict_record_matches_core() {
    let model = load();
    let bundle =
        std::sync::Arc::new(qdlm::ModelBundle::load(std::path::Path::new(fixture().model.to_str().unwrap())).unwrap());
    let lexicon = std::sync::Arc::new(bundle.runtime_lexicon(None));
    for record in &fixture().records {
        let json = CString::new(serde_json::to_string(record).unwrap()).unwrap();
        let (mut index, mut score) = (0usize, 0.0f64);
        let status = unsafe { qdlm_predict_record(model, json.as_ptr(), &mut index, &mut score) };
        assert_eq!(status, QdlmStatus::Ok, "{}", last_error());
        let expected = qdlm::predictor::predict_record(bundle.clone(), lexicon.clone(), record)
            .unwrap()
            .best();
        assert_eq!((index, score), expected);
    }
    let junk = CString::new("{\"context\": 3}").unwrap();
    let (mut index, mut score) = (0usize, 0.0f64);
    let status = unsafe { qdlm_predict_record(model, junk.as_ptr(), &mut index, &mut score) };
    assert_eq!(status, QdlmStatus::Parse);
    unsafe { qdlm_model_free(model) };
}

#[test]
fn results_feed_placeholders() {
    let model = load();
    let mut session = ptr::null_mut();
    assert_eq!(unsafe { qdlm_session_new(model, &mut session) }, QdlmStatus::Ok);
    let bad = CString::new("lonely").unwrap();
    assert_eq!(
        unsafe { qdlm_session_results(session, bad.as_ptr()) },
        QdlmStatus::Parse
    );
    let kb = std::fs::read_to_string(fixture().kb.to_str().unwrap()).unwrap();
    let first: Vec<&str> = kb.lines().take(7).collect();
    let lines = CString::new(first.join("\n")).unwrap();
    assert_eq!(
        unsafe { qdlm_session_results(session, lines.as_ptr()) },
        QdlmStatus::Ok,
        "{}",
        last_error()
    );
    unsafe {
        qdlm_session_free(session);
        qdlm_model_free(model);
    }
}

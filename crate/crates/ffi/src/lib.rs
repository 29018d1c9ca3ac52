//! C ABI over the `qdlm` dialog model.
//!
//! Every fallible function returns a [`QdlmStatus`]; on failure a message is
//! available from [`qdlm_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their `_free` function. Strings
//! returned through out-pointers are owned by the caller and released with
//! [`qdlm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use qdlm::corpus::{parse_kb, parse_kb_str, EvalRecord};
use qdlm::kb::Lexicon;
use qdlm::predictor::{build_api_call, predict_record, utterance_distance, Session};
use qdlm::{Error, ModelBundle};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QdlmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Model = 5,
    InvalidArgument = 6,
    Panic = 7,
}

/// A loaded model bundle plus the lexicon new sessions match against.
pub struct QdlmModel {
    bundle: Arc<ModelBundle>,
    lexicon: Arc<Lexicon>,
}

/// One conversation.
pub struct QdlmSession {
    inner: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(QdlmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io(_) => QdlmStatus::Io,
            Error::Parse { .. } | Error::Json(_) | Error::Kb(_) => QdlmStatus::Parse,
            Error::NoCandidates | Error::NoSlots | Error::NoResults => QdlmStatus::InvalidArgument,
            _ => QdlmStatus::Model,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QdlmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QdlmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside qdlm");
            QdlmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(QdlmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(QdlmStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(QdlmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn mut_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(QdlmStatus::NullPointer, format!("{what} is null")))
}

fn out_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(QdlmStatus::InvalidArgument, "string contains NUL".into()))
}

unsafe fn candidate_list<'a>(candidates: *const *const c_char, n: usize) -> Result<Vec<&'a str>, Failure> {
    if n == 0 {
        return Err(Failure(QdlmStatus::InvalidArgument, "empty candidate list".into()));
    }
    if candidates.is_null() {
        return Err(Failure(QdlmStatus::NullPointer, "candidates is null".into()));
    }
    (0..n).map(|i| str_arg(*candidates.add(i), "candidate")).collect()
}

/// Message for the last failed call on this thread. Valid until the next
/// call on the same thread; never null.
#[no_mangle]
pub extern "C" fn qdlm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn qdlm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qdlm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load a model bundle from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qdlm_model_load(path: *const c_char, out: *mut *mut QdlmModel) -> QdlmStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = ptr::null_mut();
        let bundle = ModelBundle::load(Path::new(str_arg(path, "path")?))?;
        let lexicon = Arc::new(bundle.lexicon.clone());
        *out = Box::into_raw(Box::new(QdlmModel {
            bundle: Arc::new(bundle),
            lexicon,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`qdlm_model_load`] and not have been freed.
/// Sessions created from it stay valid.
#[no_mangle]
pub unsafe extern "C" fn qdlm_model_free(model: *mut QdlmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Add the entities of a knowledge-base file to the lexicon used by
/// sessions created afterwards.
///
/// # Safety
/// `model` must be a live handle; `kb_path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qdlm_model_load_kb(model: *mut QdlmModel, kb_path: *const c_char) -> QdlmStatus {
    guard(|| {
        let model = mut_arg(model, "model")?;
        let file = std::fs::File::open(str_arg(kb_path, "kb_path")?).map_err(Error::from)?;
        let kb = parse_kb(std::io::BufReader::new(file))?;
        let mut lexicon = (*model.lexicon).clone();
        lexicon.merge(&Lexicon::from_kb(&kb));
        model.lexicon = Arc::new(lexicon);
        Ok(())
    })
}

/// Number of utterance clusters in the model.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qdlm_model_cluster_count(model: *const QdlmModel, out: *mut usize) -> QdlmStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        *mut_arg(out, "out")? = model.bundle.clusters.len();
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qdlm_session_new(model: *const QdlmModel, out: *mut *mut QdlmSession) -> QdlmStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = ptr::null_mut();
        let model = ref_arg(model, "model")?;
        let inner = Session::new(model.bundle.clone(), model.lexicon.clone());
        *out = Box::into_raw(Box::new(QdlmSession { inner }));
        Ok(())
    })
}

/// # Safety
/// `session` must come from [`qdlm_session_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qdlm_session_free(session: *mut QdlmSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Feed a user turn; `<SILENCE>` marks an empty one.
///
/// # Safety
/// `session` must be a live handle; `utterance` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qdlm_session_user(session: *mut QdlmSession, utterance: *const c_char) -> QdlmStatus {
    guard(|| {
        let session = mut_arg(session, "session")?;
        session.inner.observe_user(str_arg(utterance, "utterance")?);
        Ok(())
    })
}

/// Feed a system turn that was actually said.
///
/// # Safety
/// `session` must be a live handle; `utterance` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qdlm_session_system(session: *mut QdlmSession, utterance: *const c_char) -> QdlmStatus {
    guard(|| {
        let session = mut_arg(session, "session")?;
        session.inner.observe_system(str_arg(utterance, "utterance")?);
        Ok(())
    })
}

/// Feed api_call results as `<restaurant> <property> <value>` lines.
///
/// # Safety
/// `session` must be a live handle; `lines` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qdlm_session_results(session: *mut QdlmSession, lines: *const c_char) -> QdlmStatus {
    guard(|| {
        let session = mut_arg(session, "session")?;
        let kb = parse_kb_str(str_arg(lines, "lines")?)?;
        session.inner.observe_results(kb.records())?;
        Ok(())
    })
}

unsafe fn select(
    session: &QdlmSession,
    candidates: *const *const c_char,
    n: usize,
    out_index: *mut usize,
    out_score: *mut f64,
) -> Result<usize, Failure> {
    let list = candidate_list(candidates, n)?;
    let (index, score) = session.inner.select(&list)?.best();
    *mut_arg(out_index, "out_index")? = index;
    if let Some(s) = out_score.as_mut() {
        *s = score;
    }
    Ok(index)
}

/// Rank `n` candidates for the next system turn without changing the
/// session. `out_score` may be null.
///
/// # Safety
/// `candidates` must point to `n` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn qdlm_session_select(
    session: *const QdlmSession,
    candidates: *const *const c_char,
    n: usize,
    out_index: *mut usize,
    out_score: *mut f64,
) -> QdlmStatus {
    guard(|| {
        select(ref_arg(session, "session")?, candidates, n, out_index, out_score)?;
        Ok(())
    })
}

/// Like [`qdlm_session_select`], then records the chosen candidate as the
/// system turn.
///
/// # Safety
/// `candidates` must point to `n` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn qdlm_session_respond(
    session: *mut QdlmSession,
    candidates: *const *const c_char,
    n: usize,
    out_index: *mut usize,
    out_score: *mut f64,
) -> QdlmStatus {
    guard(|| {
        let session = mut_arg(session, "session")?;
        let index = select(session, candidates, n, out_index, out_score)?;
        let chosen = str_arg(*candidates.add(index), "candidate")?;
        session.inner.observe_system(chosen);
        Ok(())
    })
}

/// The api_call the current state implies.
///
/// # Safety
/// `session` must be a live handle; `out` writable. Free the result with
/// [`qdlm_string_free`].
#[no_mangle]
pub unsafe extern "C" fn qdlm_session_api_call(session: *const QdlmSession, out: *mut *mut c_char) -> QdlmStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = ptr::null_mut();
        let session = ref_arg(session, "session")?;
        *out = out_string(build_api_call(&session.inner.state.slots)?)?;
        Ok(())
    })
}

/// Filled slots as a JSON object.
///
/// # Safety
/// `session` must be a live handle; `out` writable. Free the result with
/// [`qdlm_string_free`].
#[no_mangle]
pub unsafe extern "C" fn qdlm_session_state_json(session: *const QdlmSession, out: *mut *mut c_char) -> QdlmStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = ptr::null_mut();
        let session = ref_arg(session, "session")?;
        let json = serde_json::to_string(&session.inner.state.slots).map_err(Error::from)?;
        *out = out_string(json)?;
        Ok(())
    })
}

/// Rank the candidates of one JSON evaluation record from its context.
///
/// # Safety
/// `model` must be a live handle; `record_json` a NUL-terminated string.
/// `out_score` may be null.
#[no_mangle]
pub unsafe extern "C" fn qdlm_predict_record(
    model: *const QdlmModel,
    record_json: *const c_char,
    out_index: *mut usize,
    out_score: *mut f64,
) -> QdlmStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let record: EvalRecord = serde_json::from_str(str_arg(record_json, "record_json")?).map_err(Error::from)?;
        record.validate().map_err(|e| Failure(QdlmStatus::InvalidArgument, e))?;
        let (index, score) = predict_record(model.bundle.clone(), model.lexicon.clone(), &record)?.best();
        *mut_arg(out_index, "out_index")? = index;
        if let Some(s) = out_score.as_mut() {
            *s = score;
        }
        Ok(())
    })
}

/// Word-level edit distance between two utterances.
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qdlm_word_levenshtein(a: *const c_char, b: *const c_char, out: *mut usize) -> QdlmStatus {
    guard(|| {
        let d = utterance_distance(str_arg(a, "a")?, str_arg(b, "b")?);
        *mut_arg(out, "out")? = d;
        Ok(())
    })
}

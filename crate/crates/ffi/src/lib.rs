//! C ABI over the `noharm` library.
//!
//! Games and reports are opaque handles created by this library and
//! released with their `_free` functions. Every fallible call returns a
//! [`NhStatus`]; on failure [`nh_last_error`] describes the cause on the
//! calling thread. Strings returned by reference stay valid until the
//! owning handle is freed; owned strings are released with
//! [`nh_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use noharm::config::ConfigFile;
use noharm::{solve, Error, NormalFormGame};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NhStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Format = 4,
    NotStrict = 5,
    Policy = 6,
    Resource = 7,
    Internal = 8,
    Panic = 9,
}

impl From<&Error> for NhStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::Contract(_) | Error::Io(_) => NhStatus::InvalidInput,
            Error::Format(_) | Error::Json(_) => NhStatus::Format,
            Error::NotStrict { .. } => NhStatus::NotStrict,
            Error::Policy(_) => NhStatus::Policy,
            Error::Resource(_) => NhStatus::Resource,
            Error::Internal(_) | Error::Coverage(_) => NhStatus::Internal,
        }
    }
}

/// A normal-form game.
pub struct NhGame {
    game: NormalFormGame,
}

/// The result of one solve.
pub struct NhReport {
    outcome: CString,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

/// Runs `f`, turning errors and panics into a status and a thread-local message.
fn guarded(f: impl FnOnce() -> Result<(), (NhStatus, String)>) -> NhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NhStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside noharm");
            NhStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (NhStatus, String) {
    (NhStatus::from(&e), e.to_string())
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (NhStatus, String)> {
    if s.is_null() {
        return Err((NhStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| (NhStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn owned(text: String) -> Result<CString, (NhStatus, String)> {
    CString::new(text).map_err(|_| (NhStatus::Internal, "output contains a NUL byte".into()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn nh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn nh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a game from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nh_game_from_json(json: *const c_char, out: *mut *mut NhGame) -> NhStatus {
    guarded(|| {
        if out.is_null() {
            return Err((NhStatus::NullArgument, "out is null".into()));
        }
        *out = ptr::null_mut();
        let text = read_str(json, "json")?;
        let game = NormalFormGame::from_json_str(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NhGame { game }));
        Ok(())
    })
}

/// # Safety
/// `game` must come from [`nh_game_from_json`] and not be freed yet, or be null.
#[no_mangle]
pub unsafe extern "C" fn nh_game_free(game: *mut NhGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Number of players, or 0 for a null handle.
///
/// # Safety
/// `game` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nh_game_num_players(game: *const NhGame) -> usize {
    game.as_ref().map_or(0, |g| g.game.num_players())
}

/// Number of action profiles, or 0 for a null handle.
///
/// # Safety
/// `game` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nh_game_num_profiles(game: *const NhGame) -> usize {
    game.as_ref().map_or(0, |g| g.game.num_profiles())
}

/// Pareto-optimal profiles as a JSON array of keys, e.g. `["C,C","C,D"]`.
/// Free the result with [`nh_string_free`].
///
/// # Safety
/// `game` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nh_pareto_json(game: *const NhGame, out: *mut *mut c_char) -> NhStatus {
    guarded(|| {
        if out.is_null() {
            return Err((NhStatus::NullArgument, "out is null".into()));
        }
        *out = ptr::null_mut();
        let g = &game.as_ref().ok_or((NhStatus::NullArgument, "game is null".to_string()))?.game;
        let keys: Vec<String> = g.pareto_optimal_set().into_iter().map(|p| g.key(p)).collect();
        let text = serde_json::to_string(&keys).map_err(|e| (NhStatus::Internal, e.to_string()))?;
        *out = owned(text)?.into_raw();
        Ok(())
    })
}

/// Solves from the configuration given as JSON, for example
/// `{"ref": "D,D", "k": 1, "order": ["Row", "Column"]}`.
///
/// # Safety
/// `game` must be a live handle, `config_json` a NUL-terminated string and
/// `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nh_solve(
    game: *const NhGame,
    config_json: *const c_char,
    out: *mut *mut NhReport,
) -> NhStatus {
    guarded(|| {
        if out.is_null() {
            return Err((NhStatus::NullArgument, "out is null".into()));
        }
        *out = ptr::null_mut();
        let g = &game.as_ref().ok_or((NhStatus::NullArgument, "game is null".to_string()))?.game;
        let text = read_str(config_json, "config_json")?;
        let cfg = ConfigFile::from_json_str(text).and_then(|c| c.resolve(g)).map_err(lib_err)?;
        let report = solve(g, &cfg).map_err(lib_err)?;
        let mut value = report.to_json(g);
        value["config"] =
            serde_json::to_value(ConfigFile::describe(&cfg, g)).map_err(|e| (NhStatus::Internal, e.to_string()))?;
        let json = serde_json::to_string(&value).map_err(|e| (NhStatus::Internal, e.to_string()))?;
        *out = Box::into_raw(Box::new(NhReport { outcome: owned(g.key(report.outcome))?, json: owned(json)? }));
        Ok(())
    })
}

/// Outcome profile key such as `C,C`; null for a null handle.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nh_report_outcome(report: *const NhReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.outcome.as_ptr())
}

/// Full report as JSON; null for a null handle.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nh_report_json(report: *const NhReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// # Safety
/// `report` must come from [`nh_solve`] and not be freed yet, or be null.
#[no_mangle]
pub unsafe extern "C" fn nh_report_free(report: *mut NhReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be a string returned as owned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn nh_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

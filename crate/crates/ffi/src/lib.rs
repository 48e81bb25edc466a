//! C ABI over the `ltdps` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new` and
//! released by the matching `*_free`. Every fallible call returns an
//! [`LtdpsStatus`]; the message behind the most recent failure on the
//! calling thread is available from [`ltdps_last_error`]. Panics never
//! unwind into C: they are caught and reported as `LTDPS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ltdps::eval::{run_experiment, ExperimentConfig, Scheme};
use ltdps::grid::{ApId, GridTopology, RegionId};
use ltdps::miner::{predict_next_ap, MinerError, PatternDatabase, ScoringConfig};
use ltdps::mobility::{read_history, MobilePath};
use ltdps::security::{compute_mic, BlockCipher, CipherKind, SharedKey};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LtdpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfBounds = 3,
    Parse = 4,
    BufferTooSmall = 5,
    EmptyCandidates = 6,
    Io = 7,
    Runtime = 8,
    Panic = 9,
}

/// Block cipher used for MIC computation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LtdpsCipher {
    Substitution = 0,
    Xor = 1,
}

impl From<LtdpsCipher> for CipherKind {
    fn from(c: LtdpsCipher) -> Self {
        match c {
            LtdpsCipher::Substitution => CipherKind::Substitution,
            LtdpsCipher::Xor => CipherKind::Xor,
        }
    }
}

/// AP and region lattice. Opaque.
pub struct LtdpsGrid {
    grid: GridTopology,
}

/// Pattern database bound to a grid. Opaque.
pub struct LtdpsPredictor {
    grid: GridTopology,
    db: PatternDatabase,
    scoring: ScoringConfig,
}

/// Mean accuracies, in percent, of one seeded experiment.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LtdpsAccuracy {
    pub ltdps: f64,
    pub tm: f64,
    pub ip: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: LtdpsStatus, message: impl Into<String>) -> LtdpsStatus {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
    status
}

fn guard(f: impl FnOnce() -> LtdpsStatus) -> LtdpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(LtdpsStatus::Panic, "internal panic"),
    }
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, LtdpsStatus> {
    if p.is_null() {
        return Err(fail(LtdpsStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(LtdpsStatus::InvalidArgument, "string is not UTF-8"))
}

/// Copies `src` into a caller buffer of `cap` elements and stores the full
/// length in `out_len` even when the buffer is too small.
unsafe fn copy_out<T: Copy>(src: &[T], out: *mut T, cap: usize, out_len: *mut usize) -> LtdpsStatus {
    if out_len.is_null() || (out.is_null() && cap > 0) {
        return fail(LtdpsStatus::NullPointer, "null output pointer");
    }
    *out_len = src.len();
    if src.len() > cap {
        return fail(LtdpsStatus::BufferTooSmall, format!("need {} elements, buffer holds {cap}", src.len()));
    }
    if !src.is_empty() {
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    }
    LtdpsStatus::Ok
}

/// Static description of a status code. Never null.
#[no_mangle]
pub extern "C" fn ltdps_status_str(status: LtdpsStatus) -> *const c_char {
    let s: &'static CStr = match status {
        LtdpsStatus::Ok => c"ok",
        LtdpsStatus::NullPointer => c"null pointer",
        LtdpsStatus::InvalidArgument => c"invalid argument",
        LtdpsStatus::OutOfBounds => c"id out of bounds",
        LtdpsStatus::Parse => c"parse error",
        LtdpsStatus::BufferTooSmall => c"buffer too small",
        LtdpsStatus::EmptyCandidates => c"no candidate AP",
        LtdpsStatus::Io => c"I/O error",
        LtdpsStatus::Runtime => c"runtime error",
        LtdpsStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Message of the latest failure on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ltdps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn ltdps_grid_new(ap_rows: usize, ap_cols: usize, out: *mut *mut LtdpsGrid) -> LtdpsStatus {
    guard(|| {
        if out.is_null() {
            return fail(LtdpsStatus::NullPointer, "null output pointer");
        }
        match GridTopology::new(ap_rows, ap_cols) {
            Ok(grid) => {
                *out = Box::into_raw(Box::new(LtdpsGrid { grid }));
                LtdpsStatus::Ok
            }
            Err(e) => fail(LtdpsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `grid` must come from [`ltdps_grid_new`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ltdps_grid_free(grid: *mut LtdpsGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// # Safety
/// `grid` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn ltdps_grid_ap_count(grid: *const LtdpsGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.grid.ap_count())
}

/// # Safety
/// `grid` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn ltdps_grid_region_count(grid: *const LtdpsGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.grid.region_count())
}

/// APs bordering `region`, ascending.
///
/// # Safety
/// `grid` must be a live handle; `out` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn ltdps_grid_region_aps(
    grid: *const LtdpsGrid,
    region: u16,
    out: *mut u16,
    cap: usize,
    out_len: *mut usize,
) -> LtdpsStatus {
    guard(|| {
        let Some(g) = grid.as_ref() else { return fail(LtdpsStatus::NullPointer, "null grid") };
        match g.grid.region_aps(RegionId(region)) {
            Ok(aps) => copy_out(&aps.iter().map(|a| a.0).collect::<Vec<_>>(), out, cap, out_len),
            Err(e) => fail(LtdpsStatus::OutOfBounds, e.to_string()),
        }
    })
}

/// Candidate set `S` for a node at `current` entering `next_region`.
///
/// # Safety
/// `grid` must be a live handle; `out` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn ltdps_grid_candidates(
    grid: *const LtdpsGrid,
    current: u16,
    next_region: u16,
    out: *mut u16,
    cap: usize,
    out_len: *mut usize,
) -> LtdpsStatus {
    guard(|| {
        let Some(g) = grid.as_ref() else { return fail(LtdpsStatus::NullPointer, "null grid") };
        match g.grid.candidate_next_aps(ApId(current), RegionId(next_region)) {
            Ok(aps) => copy_out(&aps.iter().map(|a| a.0).collect::<Vec<_>>(), out, cap, out_len),
            Err(e) => fail(LtdpsStatus::OutOfBounds, e.to_string()),
        }
    })
}

/// Empty predictor over a copy of `grid`.
///
/// # Safety
/// `grid` must be a live handle; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn ltdps_predictor_new(grid: *const LtdpsGrid, out: *mut *mut LtdpsPredictor) -> LtdpsStatus {
    guard(|| {
        let Some(g) = grid.as_ref() else { return fail(LtdpsStatus::NullPointer, "null grid") };
        if out.is_null() {
            return fail(LtdpsStatus::NullPointer, "null output pointer");
        }
        let p = LtdpsPredictor { grid: g.grid, db: PatternDatabase::new(), scoring: ScoringConfig::default() };
        *out = Box::into_raw(Box::new(p));
        LtdpsStatus::Ok
    })
}

/// # Safety
/// `predictor` must come from [`ltdps_predictor_new`] and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ltdps_predictor_free(predictor: *mut LtdpsPredictor) {
    if !predictor.is_null() {
        drop(Box::from_raw(predictor));
    }
}

/// Weight of indirect counts when three or more APs compete.
///
/// # Safety
/// `predictor` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ltdps_predictor_set_corruption_factor(
    predictor: *mut LtdpsPredictor,
    factor: f64,
) -> LtdpsStatus {
    guard(|| {
        let Some(p) = predictor.as_mut() else { return fail(LtdpsStatus::NullPointer, "null predictor") };
        if !(factor.is_finite() && factor >= 0.0) {
            return fail(LtdpsStatus::InvalidArgument, "corruption factor must be finite and >= 0");
        }
        p.scoring.corruption_factor = factor;
        LtdpsStatus::Ok
    })
}

/// Records one path written as `ap(region),ap(region),...`.
///
/// # Safety
/// `predictor` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ltdps_predictor_add_path(predictor: *mut LtdpsPredictor, path: *const c_char) -> LtdpsStatus {
    guard(|| {
        let Some(p) = predictor.as_mut() else { return fail(LtdpsStatus::NullPointer, "null predictor") };
        let text = match c_str(path) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let parsed: MobilePath = match text.parse() {
            Ok(m) => m,
            Err(e) => return fail(LtdpsStatus::Parse, format!("{e}")),
        };
        match p.db.record_path(&parsed, &p.grid) {
            Ok(()) => LtdpsStatus::Ok,
            Err(e) => fail(LtdpsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Records every path of a history file, one per line. On error nothing
/// is recorded.
///
/// # Safety
/// `predictor` must be a live handle and `file` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn ltdps_predictor_load_history(
    predictor: *mut LtdpsPredictor,
    file: *const c_char,
) -> LtdpsStatus {
    guard(|| {
        let Some(p) = predictor.as_mut() else { return fail(LtdpsStatus::NullPointer, "null predictor") };
        let name = match c_str(file) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let f = match File::open(name) {
            Ok(f) => f,
            Err(e) => return fail(LtdpsStatus::Io, format!("{name}: {e}")),
        };
        let paths = match read_history(BufReader::new(f), &p.grid) {
            Ok(paths) => paths,
            Err(e) => return fail(LtdpsStatus::Parse, e.to_string()),
        };
        let mut db = p.db.clone();
        for path in &paths {
            if let Err(e) = db.record_path(path, &p.grid) {
                return fail(LtdpsStatus::InvalidArgument, e.to_string());
            }
        }
        p.db = db;
        LtdpsStatus::Ok
    })
}

/// # Safety
/// `predictor` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn ltdps_predictor_path_count(predictor: *const LtdpsPredictor) -> u64 {
    predictor.as_ref().map_or(0, |p| p.db.path_count())
}

/// Predicts the AP a node at `current` attaches to on entering
/// `next_region`. `out_score` may be null.
///
/// # Safety
/// `predictor` must be a live handle; `out_ap` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ltdps_predictor_predict(
    predictor: *const LtdpsPredictor,
    current: u16,
    next_region: u16,
    out_ap: *mut u16,
    out_score: *mut f64,
) -> LtdpsStatus {
    guard(|| {
        let Some(p) = predictor.as_ref() else { return fail(LtdpsStatus::NullPointer, "null predictor") };
        if out_ap.is_null() {
            return fail(LtdpsStatus::NullPointer, "null output pointer");
        }
        let s = match p.grid.candidate_next_aps(ApId(current), RegionId(next_region)) {
            Ok(s) => s,
            Err(e) => return fail(LtdpsStatus::OutOfBounds, e.to_string()),
        };
        match predict_next_ap(&p.db, ApId(current), &s, &p.scoring) {
            Ok(pred) => {
                *out_ap = pred.ap.0;
                if !out_score.is_null() {
                    *out_score = pred.ranking[0].score;
                }
                LtdpsStatus::Ok
            }
            Err(MinerError::EmptyCandidates) => fail(
                LtdpsStatus::EmptyCandidates,
                format!("region {next_region} does not border the neighbours of AP {current}"),
            ),
            Err(e) => fail(LtdpsStatus::Runtime, e.to_string()),
        }
    })
}

/// CBC residue of `message` under `key`; writes one cipher block.
///
/// # Safety
/// `key` must hold `key_len` bytes, `message` `message_len` bytes (it may
/// be null when the length is 0) and `out` `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn ltdps_compute_mic(
    cipher: LtdpsCipher,
    key: *const u8,
    key_len: usize,
    message: *const u8,
    message_len: usize,
    out: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> LtdpsStatus {
    guard(|| {
        if key.is_null() || (message.is_null() && message_len > 0) {
            return fail(LtdpsStatus::NullPointer, "null input buffer");
        }
        let kind = CipherKind::from(cipher);
        let key = match SharedKey::new(slice::from_raw_parts(key, key_len), &kind) {
            Ok(k) => k,
            Err(e) => return fail(LtdpsStatus::InvalidArgument, e.to_string()),
        };
        let msg = if message_len == 0 { &[][..] } else { slice::from_raw_parts(message, message_len) };
        let mic = compute_mic(msg, &key, &kind as &dyn BlockCipher);
        copy_out(&mic, out, cap, out_len)
    })
}

/// Runs one seeded experiment with the default path parameters and all
/// three schemes.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ltdps_run_experiment(
    seed: u64,
    history_size: usize,
    test_paths: usize,
    out: *mut LtdpsAccuracy,
) -> LtdpsStatus {
    guard(|| {
        if out.is_null() {
            return fail(LtdpsStatus::NullPointer, "null output pointer");
        }
        let cfg = ExperimentConfig { seed, history_size, test_paths, ..ExperimentConfig::default() };
        let report = match run_experiment(&cfg) {
            Ok(r) => r,
            Err(e) => return fail(LtdpsStatus::InvalidArgument, e.to_string()),
        };
        let pct = |s: Scheme| report.scheme(s).map_or(0.0, |r| 100.0 * r.mean_accuracy());
        *out = LtdpsAccuracy { ltdps: pct(Scheme::Ltdps), tm: pct(Scheme::Tm), ip: pct(Scheme::Ip) };
        LtdpsStatus::Ok
    })
}

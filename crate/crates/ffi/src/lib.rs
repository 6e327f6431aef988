//! C ABI over the asrec toolkit.
//!
//! Every entry point returns an [`AsrecStatus`]. On failure the message is
//! available from [`asrec_last_error_message`] on the same thread. Strings
//! returned through `char **` out-parameters are owned by the caller and
//! released with [`asrec_string_free`]. Handles are released with their
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Duration;

use asrec::combine::rover;
use asrec::decode::{closest_map, lattice_decode, select_constrained};
use asrec::lattice::lattice_from_nbest;
use asrec::metrics::{align_text, werr};
use asrec::scorer::{HttpScorer, RetryPolicy, ToyScorer};
use asrec::textnorm::{normalize, NormMode};
use asrec::{
    EcConfig, Error, Lattice, MarkerConvention, NBestList, Scorer, ScorerContext, Utterance,
};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsrecStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    Lattice = 5,
    Scorer = 6,
    Internal = 7,
}

/// Text normalization flavour.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsrecNormMode {
    /// Lowercase words; punctuation separates words, inner apostrophes stay.
    Eval = 0,
    /// ASCII letters and digits only; hyphens split words.
    Stats = 1,
}

/// Word alignment counts.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AsrecCounts {
    pub cor: usize,
    pub sub: usize,
    pub del: usize,
    pub ins: usize,
    pub ref_len: usize,
}

/// Decoding knobs. Obtain defaults from [`asrec_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsrecConfig {
    /// Weight on the correction-model score, in `[0, 1]`.
    pub lambda: f64,
    pub beam_width: usize,
    /// Hypotheses fed to the scorer context.
    pub n_input: usize,
    pub length_norm: bool,
}

/// Ranked hypothesis list.
pub struct AsrecNBest {
    list: NBestList,
}

/// Token lattice.
pub struct AsrecLattice {
    lattice: Lattice,
}

/// Correction-model scorer.
pub struct AsrecScorer {
    scorer: Box<dyn Scorer>,
    convention: MarkerConvention,
}

struct Failure {
    status: AsrecStatus,
    message: String,
}

impl Failure {
    fn new(status: AsrecStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }

    fn null(name: &str) -> Self {
        Failure::new(AsrecStatus::NullPointer, format!("{name} is null"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } | Error::Json(_) | Error::DuplicateId { .. } | Error::Io { .. } => {
                AsrecStatus::Parse
            }
            Error::Lattice(_) => AsrecStatus::Lattice,
            Error::Scorer(_) | Error::Selection => AsrecStatus::Scorer,
            _ => AsrecStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<asrec::LatticeError> for Failure {
    fn from(e: asrec::LatticeError) -> Self {
        Failure::new(AsrecStatus::Lattice, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AsrecStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(Failure::new(AsrecStatus::Internal, msg))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AsrecStatus::Ok
        }
        Err(f) => {
            set_last_error(&f.message);
            f.status
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure::new(
            AsrecStatus::InvalidUtf8,
            format!("{name} is not valid UTF-8"),
        )
    })
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(name))
}

unsafe fn write_out<T>(p: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    p.write(value);
    Ok(())
}

unsafe fn write_string(p: *mut *mut c_char, s: String, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    let c = CString::new(s)
        .map_err(|_| Failure::new(AsrecStatus::Internal, "result contains an interior NUL"))?;
    p.write(c.into_raw());
    Ok(())
}

unsafe fn write_handle<T>(p: *mut *mut T, value: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::null("out"));
    }
    p.write(Box::into_raw(Box::new(value)));
    Ok(())
}

fn ec_config(c: &AsrecConfig) -> EcConfig {
    EcConfig {
        lambda: c.lambda,
        beam_width: c.beam_width,
        n_input: c.n_input,
        length_norm: c.length_norm,
        ..EcConfig::default()
    }
}

fn convention(marker: Option<&str>) -> Result<MarkerConvention, Failure> {
    match marker {
        None | Some("") => Ok(MarkerConvention::Words),
        Some(m) => MarkerConvention::parse(m).ok_or_else(|| {
            Failure::new(
                AsrecStatus::InvalidArgument,
                format!("unknown marker convention {m:?}"),
            )
        }),
    }
}

/// Message for the last failed call on this thread, or null when the last
/// call succeeded. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn asrec_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn asrec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn asrec_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default decoding knobs.
#[no_mangle]
pub extern "C" fn asrec_config_default() -> AsrecConfig {
    let d = EcConfig::default();
    AsrecConfig {
        lambda: d.lambda,
        beam_width: d.beam_width,
        n_input: d.n_input,
        length_norm: d.length_norm,
    }
}

/// Normalizes `text` into a newly allocated string.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn asrec_normalize(
    text: *const c_char,
    mode: AsrecNormMode,
    out: *mut *mut c_char,
) -> AsrecStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let mode = match mode {
            AsrecNormMode::Eval => NormMode::Eval,
            AsrecNormMode::Stats => NormMode::Stats,
        };
        write_string(out, normalize(text, mode), "out")
    })
}

/// Word alignment of `hyp` against `reference` after eval normalization.
///
/// # Safety
/// `reference` and `hyp` must be NUL-terminated strings and `out` a
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn asrec_align(
    reference: *const c_char,
    hyp: *const c_char,
    out: *mut AsrecCounts,
) -> AsrecStatus {
    guard(|| {
        let c = align_text(str_arg(reference, "reference")?, str_arg(hyp, "hyp")?);
        let counts = AsrecCounts {
            cor: c.cor,
            sub: c.sub,
            del: c.del,
            ins: c.ins,
            ref_len: c.ref_len,
        };
        write_out(out, counts, "out")
    })
}

/// Relative error-rate reduction in percent.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn asrec_werr(
    baseline_wer: f64,
    system_wer: f64,
    out: *mut f64,
) -> AsrecStatus {
    guard(|| write_out(out, werr(baseline_wer, system_wer)?, "out"))
}

/// Builds a list from `count` texts and log-scores. The list is re-ranked
/// by descending score.
///
/// # Safety
/// `texts` and `scores` must point to `count` elements; every text must be
/// a NUL-terminated string. `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn asrec_nbest_new(
    texts: *const *const c_char,
    scores: *const f64,
    count: usize,
    out: *mut *mut AsrecNBest,
) -> AsrecStatus {
    guard(|| {
        if texts.is_null() {
            return Err(Failure::null("texts"));
        }
        if scores.is_null() {
            return Err(Failure::null("scores"));
        }
        let texts = std::slice::from_raw_parts(texts, count);
        let scores = std::slice::from_raw_parts(scores, count);
        let mut entries = Vec::with_capacity(count);
        for (i, (&t, &s)) in texts.iter().zip(scores).enumerate() {
            entries.push((str_arg(t, &format!("texts[{i}]"))?.to_owned(), s));
        }
        let list = NBestList::new(entries)?;
        write_handle(out, AsrecNBest { list })
    })
}

/// Number of hypotheses in `nbest`, or 0 when null.
///
/// # Safety
/// `nbest` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn asrec_nbest_len(nbest: *const AsrecNBest) -> usize {
    nbest.as_ref().map_or(0, |n| n.list.len())
}

/// Text of the hypothesis at 1-based `rank`.
///
/// # Safety
/// `nbest` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn asrec_nbest_text(
    nbest: *const AsrecNBest,
    rank: usize,
    out: *mut *mut c_char,
) -> AsrecStatus {
    guard(|| {
        let n = ref_arg(nbest, "nbest")?;
        let h = n.list.rank(rank).ok_or_else(|| {
            Failure::new(
                AsrecStatus::InvalidArgument,
                format!("rank {rank} outside 1..={}", n.list.len()),
            )
        })?;
        write_string(out, h.text.clone(), "out")
    })
}

/// Releases an N-best handle.
///
/// # Safety
/// `nbest` must be null or a live handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn asrec_nbest_free(nbest: *mut AsrecNBest) {
    if !nbest.is_null() {
        drop(Box::from_raw(nbest));
    }
}

/// Parses a lattice from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn asrec_lattice_from_json(
    json: *const c_char,
    out: *mut *mut AsrecLattice,
) -> AsrecStatus {
    guard(|| {
        let lattice = Lattice::from_json(str_arg(json, "json")?)?;
        write_handle(out, AsrecLattice { lattice })
    })
}

/// Lattice whose paths are exactly the texts of `nbest`.
///
/// # Safety
/// `nbest` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn asrec_lattice_from_nbest(
    nbest: *const AsrecNBest,
    out: *mut *mut AsrecLattice,
) -> AsrecStatus {
    guard(|| {
        let lattice = lattice_from_nbest(&ref_arg(nbest, "nbest")?.list)?;
        write_handle(out, AsrecLattice { lattice })
    })
}

/// Serializes a lattice to JSON.
///
/// # Safety
/// `lattice` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn asrec_lattice_to_json(
    lattice: *const AsrecLattice,
    out: *mut *mut c_char,
) -> AsrecStatus {
    guard(|| {
        let json = ref_arg(lattice, "lattice")?.lattice.to_json();
        write_string(out, json, "out")
    })
}

/// Number of start-to-end paths, saturating at `UINT64_MAX`.
///
/// # Safety
/// `lattice` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn asrec_lattice_num_paths(lattice: *const AsrecLattice) -> u64 {
    lattice.as_ref().map_or(0, |l| {
        u64::try_from(l.lattice.num_paths()).unwrap_or(u64::MAX)
    })
}

/// Releases a lattice handle.
///
/// # Safety
/// `lattice` must be null or a live handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn asrec_lattice_free(lattice: *mut AsrecLattice) {
    if !lattice.is_null() {
        drop(Box::from_raw(lattice));
    }
}

/// Built-in character bigram scorer. `marker` is null or empty for whole
/// words, otherwise `continuation:@@` or `word-start:▁`.
///
/// # Safety
/// `marker` must be null or a NUL-terminated string and `out` a writable
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn asrec_scorer_new_toy(
    marker: *const c_char,
    out: *mut *mut AsrecScorer,
) -> AsrecStatus {
    guard(|| {
        let marker = if marker.is_null() {
            None
        } else {
            Some(str_arg(marker, "marker")?)
        };
        let convention = convention(marker)?;
        let scorer = Box::new(ToyScorer::with_convention(convention.clone()));
        write_handle(out, AsrecScorer { scorer, convention })
    })
}

/// Client for a remote scoring service at `base_url`. `retries` counts
/// attempts after the first.
///
/// # Safety
/// `base_url` must be a NUL-terminated string, `marker` null or a
/// NUL-terminated string, and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn asrec_scorer_new_http(
    base_url: *const c_char,
    marker: *const c_char,
    retries: u32,
    timeout_ms: u64,
    max_in_flight: usize,
    seed: u64,
    out: *mut *mut AsrecScorer,
) -> AsrecStatus {
    guard(|| {
        let url = str_arg(base_url, "base_url")?;
        let marker = if marker.is_null() {
            None
        } else {
            Some(str_arg(marker, "marker")?)
        };
        let convention = convention(marker)?;
        if max_in_flight == 0 {
            return Err(Failure::new(
                AsrecStatus::InvalidArgument,
                "max_in_flight must be at least 1",
            ));
        }
        let policy = RetryPolicy {
            max_attempts: retries.saturating_add(1),
            timeout: Duration::from_millis(timeout_ms),
            ..RetryPolicy::default()
        };
        let scorer = Box::new(HttpScorer::new(url, policy, max_in_flight, seed));
        write_handle(out, AsrecScorer { scorer, convention })
    })
}

/// Releases a scorer handle.
///
/// # Safety
/// `scorer` must be null or a live handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn asrec_scorer_free(scorer: *mut AsrecScorer) {
    if !scorer.is_null() {
        drop(Box::from_raw(scorer));
    }
}

/// Picks the best of the top `n_input` hypotheses under the interpolated
/// score, with `n_input` capped at the list length. Writes the 1-based rank
/// and the score.
///
/// # Safety
/// `nbest`, `scorer` and `config` must be live; `rank_out` and `score_out`
/// must be writable pointers.
#[no_mangle]
pub unsafe extern "C" fn asrec_select_constrained(
    nbest: *const AsrecNBest,
    scorer: *const AsrecScorer,
    config: *const AsrecConfig,
    rank_out: *mut usize,
    score_out: *mut f64,
) -> AsrecStatus {
    guard(|| {
        let nb = ref_arg(nbest, "nbest")?;
        let sc = ref_arg(scorer, "scorer")?;
        let cfg = ec_config(ref_arg(config, "config")?).for_list(nb.list.len());
        let utt = Utterance::new("ffi", None, nb.list.clone());
        let s = select_constrained(&utt, sc.scorer.as_ref(), &cfg)?;
        write_out(rank_out, s.hypothesis.rank, "rank_out")?;
        write_out(score_out, s.score, "score_out")
    })
}

/// The top-`n` hypothesis nearest to `output` in word edit distance.
/// Writes its 1-based rank and the distance.
///
/// # Safety
/// `output` must be a NUL-terminated string, `nbest` live, and `rank_out`
/// and `distance_out` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn asrec_closest_map(
    output: *const c_char,
    nbest: *const AsrecNBest,
    n: usize,
    rank_out: *mut usize,
    distance_out: *mut usize,
) -> AsrecStatus {
    guard(|| {
        let m = closest_map(
            str_arg(output, "output")?,
            &ref_arg(nbest, "nbest")?.list,
            n,
        )?;
        write_out(rank_out, m.hypothesis.rank, "rank_out")?;
        write_out(distance_out, m.distance, "distance_out")
    })
}

/// Beam search over `lattice`. The scorer context is built from the top
/// `n_input` hypotheses of `context`, or is empty when `context` is null.
/// Writes the decoded text in the scorer's marker convention.
///
/// # Safety
/// `lattice`, `scorer` and `config` must be live; `context` null or live;
/// `text_out` and `score_out` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn asrec_lattice_decode(
    lattice: *const AsrecLattice,
    scorer: *const AsrecScorer,
    context: *const AsrecNBest,
    config: *const AsrecConfig,
    text_out: *mut *mut c_char,
    score_out: *mut f64,
) -> AsrecStatus {
    guard(|| {
        let l = ref_arg(lattice, "lattice")?;
        let sc = ref_arg(scorer, "scorer")?;
        let cfg = ec_config(ref_arg(config, "config")?);
        let ctx = match context.as_ref() {
            Some(nb) => ScorerContext::new(&nb.list, cfg.n_input.min(nb.list.len()), &cfg.sep)?,
            None => ScorerContext::from_text("", cfg.sep.clone()),
        };
        let r = lattice_decode(&l.lattice, sc.scorer.as_ref(), &ctx, &cfg)?;
        write_out(score_out, r.score, "score_out")?;
        write_string(text_out, r.text(&sc.convention), "text_out")
    })
}

/// Word-level voting over `count` system outputs with per-system weights.
///
/// # Safety
/// `texts` and `weights` must point to `count` elements; every text must be
/// a NUL-terminated string. `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn asrec_rover(
    texts: *const *const c_char,
    weights: *const f64,
    count: usize,
    out: *mut *mut c_char,
) -> AsrecStatus {
    guard(|| {
        if texts.is_null() {
            return Err(Failure::null("texts"));
        }
        if weights.is_null() {
            return Err(Failure::null("weights"));
        }
        let texts = std::slice::from_raw_parts(texts, count);
        let weights = std::slice::from_raw_parts(weights, count);
        let mut hyps = Vec::with_capacity(count);
        for (i, (&t, &w)) in texts.iter().zip(weights).enumerate() {
            hyps.push((str_arg(t, &format!("texts[{i}]"))?, w));
        }
        write_string(out, rover(&hyps)?, "out")
    })
}

//! C ABI over the fedfresh simulator.
//!
//! Every fallible function returns an [`FfStatus`]. On failure a message is
//! kept per thread and can be read with [`ff_last_error`]. Models are opaque
//! [`FfModel`] handles released with [`ff_model_free`]; strings handed out by
//! the library are released with [`ff_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use fedfresh::experiment::io::{read_checkpoint, write_checkpoint};
use fedfresh::experiment::{run_scenario, ScenarioConfig};
use fedfresh::metrics::{edit_distance, error_correction_percent};
use fedfresh::mitigation::average_checkpoints;
use fedfresh::model::decode_nbest;
use fedfresh::{Error, ParameterVector, Utterance};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidConfig = 3,
    NonFinite = 4,
    Io = 5,
    MissingArtifacts = 6,
    /// The quantity is mathematically undefined for these inputs.
    Undefined = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Opaque model parameters (`V x F` weights followed by `V` biases).
pub struct FfModel {
    inner: ParameterVector,
}

/// Substitution, insertion and deletion counts of one alignment.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FfWerBreakdown {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_tokens: usize,
    pub wer: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(FfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidInput(_) | Error::Json(_) => FfStatus::InvalidInput,
            Error::InvalidConfig(_) => FfStatus::InvalidConfig,
            Error::NonFinite(_) => FfStatus::NonFinite,
            Error::MissingArtifacts(_) => FfStatus::MissingArtifacts,
            Error::Io { .. } => FfStatus::Io,
        };
        Fail(status, e.to_string())
    }
}

fn fail<T>(status: FfStatus, msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(status, msg.into()))
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            FfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return fail(FfStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(FfStatus::InvalidInput, format!("{what} is not valid UTF-8")))
}

unsafe fn model_arg<'a>(p: *const FfModel, what: &str) -> Result<&'a ParameterVector, Fail> {
    if p.is_null() {
        return fail(FfStatus::NullPointer, format!("{what} is null"));
    }
    Ok(&(*p).inner)
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(FfStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn emit_model(out: *mut *mut FfModel, inner: ParameterVector) {
    *out = Box::into_raw(Box::new(FfModel { inner }));
}

fn check_out<T>(out: *mut T) -> Result<(), Fail> {
    if out.is_null() {
        return fail(FfStatus::NullPointer, "output pointer is null");
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ff_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ff_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ff_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// All-zero model of shape `vocab x dim`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ff_model_zeros(
    vocab: usize,
    dim: usize,
    out: *mut *mut FfModel,
) -> FfStatus {
    guard(|| {
        check_out(out)?;
        if vocab == 0 || dim == 0 {
            return fail(FfStatus::InvalidInput, "vocab and dim must be positive");
        }
        emit_model(out, ParameterVector::zeros(vocab, dim));
        Ok(())
    })
}

/// Model from `len == vocab * dim + vocab` values.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_model_from_values(
    vocab: usize,
    dim: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut FfModel,
) -> FfStatus {
    guard(|| {
        check_out(out)?;
        let v = slice_arg(values, len, "values")?;
        emit_model(out, ParameterVector::from_values(vocab, dim, v.to_vec())?);
        Ok(())
    })
}

/// Reads a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_model_load(path: *const c_char, out: *mut *mut FfModel) -> FfStatus {
    guard(|| {
        check_out(out)?;
        let p = str_arg(path, "path")?;
        emit_model(out, read_checkpoint(&PathBuf::from(p))?);
        Ok(())
    })
}

/// Writes a checkpoint file.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ff_model_save(model: *const FfModel, path: *const c_char) -> FfStatus {
    guard(|| {
        let m = model_arg(model, "model")?;
        let p = str_arg(path, "path")?;
        write_checkpoint(&PathBuf::from(p), m)?;
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ff_model_free(model: *mut FfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Vocabulary size, 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_model_vocab(model: *const FfModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.vocab())
}

/// Feature dimension, 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_model_dim(model: *const FfModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Number of parameters, 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_model_len(model: *const FfModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.len())
}

/// Copies the parameters into `out`, which must hold `ff_model_len` doubles.
///
/// # Safety
/// `model` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ff_model_values(
    model: *const FfModel,
    out: *mut f64,
    len: usize,
) -> FfStatus {
    guard(|| {
        let m = model_arg(model, "model")?;
        if len < m.len() {
            return fail(
                FfStatus::BufferTooSmall,
                format!("need {} values, buffer holds {len}", m.len()),
            );
        }
        check_out(out)?;
        ptr::copy_nonoverlapping(m.values().as_ptr(), out, m.len());
        Ok(())
    })
}

/// `alpha * theta_0 + (1 - alpha) * theta_t` as a new handle.
///
/// # Safety
/// Both models must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_average_checkpoints(
    theta_0: *const FfModel,
    theta_t: *const FfModel,
    alpha: f64,
    out: *mut *mut FfModel,
) -> FfStatus {
    guard(|| {
        check_out(out)?;
        let a = model_arg(theta_0, "theta_0")?;
        let b = model_arg(theta_t, "theta_t")?;
        emit_model(out, average_checkpoints(a, b, alpha)?);
        Ok(())
    })
}

/// N-best decode of one utterance.
///
/// `frames` is row-major `n_frames x dim`. On success `out_words` holds
/// `out_count` hypotheses of `n_frames` word ids each, best first, and
/// `out_log_probs` their sequence log-probabilities. Buffers must hold `n`
/// hypotheses.
///
/// # Safety
/// `frames` must hold `n_frames * dim` doubles, `out_words` room for
/// `n * n_frames` ids, `out_log_probs` room for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ff_decode_nbest(
    model: *const FfModel,
    frames: *const f64,
    n_frames: usize,
    n: usize,
    beam: usize,
    out_words: *mut usize,
    out_log_probs: *mut f64,
    out_count: *mut usize,
) -> FfStatus {
    guard(|| {
        let m = model_arg(model, "model")?;
        check_out(out_words)?;
        check_out(out_log_probs)?;
        check_out(out_count)?;
        let flat = slice_arg(frames, n_frames * m.dim(), "frames")?;
        let utt = Utterance::new(
            flat.chunks_exact(m.dim()).map(<[f64]>::to_vec).collect(),
            vec![0; n_frames],
        )?;
        let hyps = decode_nbest(m, &utt, n, beam)?;
        for (i, h) in hyps.iter().enumerate() {
            ptr::copy_nonoverlapping(h.words.as_ptr(), out_words.add(i * n_frames), n_frames);
            *out_log_probs.add(i) = h.log_prob;
        }
        *out_count = hyps.len();
        Ok(())
    })
}

/// Levenshtein alignment counts of `hyp` against a non-empty `reference`.
///
/// # Safety
/// The id arrays must hold the given lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_edit_distance(
    reference: *const usize,
    ref_len: usize,
    hyp: *const usize,
    hyp_len: usize,
    out: *mut FfWerBreakdown,
) -> FfStatus {
    guard(|| {
        check_out(out)?;
        let r = slice_arg(reference, ref_len, "reference")?;
        let h = slice_arg(hyp, hyp_len, "hyp")?;
        let b = edit_distance(r, h)?;
        *out = FfWerBreakdown {
            substitutions: b.substitutions,
            insertions: b.insertions,
            deletions: b.deletions,
            ref_tokens: b.ref_tokens,
            wer: b.wer,
        };
        Ok(())
    })
}

/// Share of baseline errors on a word that the new model fixes.
/// Returns `Undefined` when the baseline was already perfect.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_error_correction_percent(
    acc_base: f64,
    acc_exp: f64,
    out: *mut f64,
) -> FfStatus {
    guard(|| {
        check_out(out)?;
        if !(0.0..=1.0).contains(&acc_base) || !(0.0..=1.0).contains(&acc_exp) {
            return fail(FfStatus::InvalidInput, "accuracies must lie in [0, 1]");
        }
        match error_correction_percent(acc_base, acc_exp) {
            Some(v) => {
                *out = v;
                Ok(())
            }
            None => fail(
                FfStatus::Undefined,
                "EC% is undefined when the baseline accuracy is 1",
            ),
        }
    })
}

/// JSON config of a named preset; free the result with [`ff_string_free`].
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_preset_json(
    name: *const c_char,
    seed: u64,
    out: *mut *mut c_char,
) -> FfStatus {
    guard(|| {
        check_out(out)?;
        let n = str_arg(name, "name")?;
        let cfg = ScenarioConfig::preset(n, seed)?;
        *out = CString::new(cfg.to_json())
            .expect("json has no NUL")
            .into_raw();
        Ok(())
    })
}

/// Runs a scenario given as JSON and writes its artifacts under `out_dir`.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ff_run_scenario(
    config_json: *const c_char,
    out_dir: *const c_char,
) -> FfStatus {
    guard(|| {
        let cfg = ScenarioConfig::from_json(str_arg(config_json, "config_json")?)?;
        let out = PathBuf::from(str_arg(out_dir, "out_dir")?);
        run_scenario(&cfg, &out)?;
        Ok(())
    })
}

//! C interface. Objects are opaque handles created by `rfsd_*_new`-style
//! functions and released by the matching `*_free`. Every fallible call
//! returns an `RfsdStatus`; on failure `rfsd_last_error` describes it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rfsd::discrepancy::{rphisd, RPhiSDConfig};
use rfsd::goftest::{run_test, GofOptions};
use rfsd::hyper::{ConfigRecipe, Family, Overrides};
use rfsd::io::read_sample_csv;
use rfsd::kernels::{ksd_squared, BaseKernel};
use rfsd::models::{gaussian_model, ModelSpec, SampleSet, ScoreModel};
use rfsd::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfsdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    EmptyInput = 4,
    Unsupported = 5,
    Numerical = 6,
    Parse = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfsdFamily {
    L1Imq = 0,
    L2Sechexp = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RfsdGofResult {
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: f64,
    /// 1 when the null is rejected.
    pub reject: i32,
}

/// A sample of `n` points in `dim` dimensions.
pub struct RfsdSample(SampleSet);

/// A target distribution.
pub struct RfsdModel(Box<dyn ScoreModel>);

/// Estimator configuration.
pub struct RfsdConfig(RPhiSDConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RfsdStatus {
    match e {
        Error::InvalidParameter(_) => RfsdStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => RfsdStatus::DimensionMismatch,
        Error::EmptyInput(_) => RfsdStatus::EmptyInput,
        Error::Unsupported(_) => RfsdStatus::Unsupported,
        Error::Numerical(_) => RfsdStatus::Numerical,
        Error::Parse(_) | Error::Json(_) => RfsdStatus::Parse,
        Error::Io(_) => RfsdStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> RfsdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RfsdStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            RfsdStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            RfsdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::Parse(format!("{what} is not valid UTF-8"))))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn rfsd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn rfsd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n * dim` row-major values into a new sample.
///
/// # Safety
/// `data` must point to `n * dim` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsd_sample_new(data: *const f64, n: usize, dim: usize, out: *mut *mut RfsdSample) -> RfsdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if data.is_null() {
            return Err(Failure::Null("data"));
        }
        let len = n.checked_mul(dim).ok_or(Error::InvalidParameter("n * dim overflows".into()))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        *out = Box::into_raw(Box::new(RfsdSample(SampleSet::new(values, dim)?)));
        Ok(())
    })
}

/// Reads a sample CSV file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsd_sample_from_csv(path: *const c_char, out: *mut *mut RfsdSample) -> RfsdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let path = str_arg(path, "path")?;
        *out = Box::into_raw(Box::new(RfsdSample(read_sample_csv(Path::new(path))?)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rfsd_sample_len(s: *const RfsdSample) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `s` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rfsd_sample_dim(s: *const RfsdSample) -> usize {
    s.as_ref().map_or(0, |s| s.0.dim())
}

/// # Safety
/// `s` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rfsd_sample_free(s: *mut RfsdSample) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Standard Gaussian target in `dim` dimensions.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsd_model_gaussian(dim: usize, out: *mut *mut RfsdModel) -> RfsdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(RfsdModel(Box::new(gaussian_model(dim)?))));
        Ok(())
    })
}

/// Model from a JSON document `{"kind": ..., "params": {...}}`.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsd_model_from_json(json: *const c_char, out: *mut *mut RfsdModel) -> RfsdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let spec = ModelSpec::from_json_str(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(RfsdModel(spec.build()?)));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rfsd_model_free(m: *mut RfsdModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Default configuration of `family` for `sample`, with `m` importance
/// draws (0 keeps the default).
///
/// # Safety
/// `sample` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsd_config_default(
    sample: *const RfsdSample,
    family: RfsdFamily,
    gamma: f64,
    m: usize,
    seed: u64,
    out: *mut *mut RfsdConfig,
) -> RfsdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let sample = deref(sample, "sample")?;
        let family = match family {
            RfsdFamily::L1Imq => Family::L1Imq,
            RfsdFamily::L2Sechexp => Family::L2Sechexp,
        };
        let overrides = Overrides { m: (m > 0).then_some(m), seed: Some(seed), ..Default::default() };
        let cfg = ConfigRecipe::new(family, gamma, overrides).build(&sample.0)?;
        *out = Box::into_raw(Box::new(RfsdConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsd_config_from_json(json: *const c_char, out: *mut *mut RfsdConfig) -> RfsdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let cfg = RPhiSDConfig::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(RfsdConfig(cfg)));
        Ok(())
    })
}

/// Serializes the configuration; release the string with `rfsd_string_free`.
///
/// # Safety
/// `cfg` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsd_config_to_json(cfg: *const RfsdConfig, out: *mut *mut c_char) -> RfsdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let json = deref(cfg, "cfg")?.0.to_json()?;
        *out = CString::new(json).expect("JSON has no nul bytes").into_raw();
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rfsd_config_free(cfg: *mut RfsdConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn rfsd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Estimates the discrepancy. `per_dim`, when not null, receives the
/// squared per-dimension terms, which sum to `value²`.
///
/// # Safety
/// Handles must be valid; `value` must be writable; `per_dim` must be null
/// or hold `rfsd_sample_dim(sample)` doubles.
#[no_mangle]
pub unsafe extern "C" fn rfsd_rphisd(
    sample: *const RfsdSample,
    model: *const RfsdModel,
    cfg: *const RfsdConfig,
    value: *mut f64,
    per_dim: *mut f64,
) -> RfsdStatus {
    guard(|| {
        let value = out_ref(value, "value")?;
        let (s, m, c) = (deref(sample, "sample")?, deref(model, "model")?, deref(cfg, "cfg")?);
        let res = rphisd(&s.0, m.0.as_ref(), &c.0)?;
        *value = res.value;
        if !per_dim.is_null() {
            std::slice::from_raw_parts_mut(per_dim, res.per_dim.len()).copy_from_slice(&res.per_dim);
        }
        Ok(())
    })
}

/// Squared kernel Stein discrepancy with the IMQ kernel `(c² + r²)^beta`.
///
/// # Safety
/// Handles must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsd_ksd_squared_imq(
    sample: *const RfsdSample,
    model: *const RfsdModel,
    c: f64,
    beta: f64,
    out: *mut f64,
) -> RfsdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let (s, m) = (deref(sample, "sample")?, deref(model, "model")?);
        *out = ksd_squared(&s.0, m.0.as_ref(), &BaseKernel::imq(c, beta)?)?;
        Ok(())
    })
}

/// Goodness-of-fit test at level `alpha` with `n_sims` null simulations.
///
/// # Safety
/// Handles must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsd_gof_test(
    sample: *const RfsdSample,
    model: *const RfsdModel,
    cfg: *const RfsdConfig,
    alpha: f64,
    n_sims: usize,
    out: *mut RfsdGofResult,
) -> RfsdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let (s, m, c) = (deref(sample, "sample")?, deref(model, "model")?, deref(cfg, "cfg")?);
        let opts = GofOptions { alpha, n_sims, ..Default::default() };
        let r = run_test(&s.0, m.0.as_ref(), &c.0, &opts)?;
        *out = RfsdGofResult { statistic: r.statistic, threshold: r.threshold, p_value: r.p_value, reject: r.reject as i32 };
        Ok(())
    })
}

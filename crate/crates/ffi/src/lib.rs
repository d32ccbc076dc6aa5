//! C ABI for the `qillum` engine.
//!
//! Every fallible function returns a [`QiStatus`] and writes its result
//! through an out-pointer. On failure a message is kept per thread and can be
//! read with [`qi_last_error_message`]. Probe states are opaque heap handles
//! created by the `qi_probe_*` constructors and released with
//! [`qi_probe_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qillum::detection::{run_campaign, CampaignSpec};
use qillum::fock::{thermal_cutoff, TruncationSpec};
use qillum::metrics::{self, MeasurementMoments};
use qillum::oracle;
use qillum::probe::{self, DiagonalSchmidtState, SchmidtFamily, Sign};
use qillum::{Complex64, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidDimension = 2,
    TruncationTooSmall = 3,
    LabelCollision = 4,
    LabelNotFound = 5,
    Domain = 6,
    Convergence = 7,
    ArgumentOrder = 8,
    DegenerateMeasurement = 9,
    SupportMismatch = 10,
    InvalidBasis = 11,
    HierarchyViolation = 12,
    BufferTooSmall = 13,
    Panic = 99,
}

/// Photon addition (`QI_SIGN_PLUS`) or subtraction (`QI_SIGN_MINUS`).
pub const QI_SIGN_PLUS: i32 = 0;
pub const QI_SIGN_MINUS: i32 = 1;

/// Single-copy outcome statistics.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QiMoments {
    pub mu0: f64,
    pub mu1: f64,
    pub var0: f64,
    pub var1: f64,
    pub eta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QiCampaignResult {
    pub empirical_false_alarm: f64,
    pub empirical_miss: f64,
    pub empirical_perr: f64,
    pub analytic_perr: f64,
    pub stderr_: f64,
}

/// Opaque diagonal-Schmidt probe state.
pub struct QiProbeState {
    inner: DiagonalSchmidtState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QiStatus {
    match e {
        Error::InvalidDimension(_) => QiStatus::InvalidDimension,
        Error::TruncationTooSmall(_) => QiStatus::TruncationTooSmall,
        Error::LabelCollision(_) => QiStatus::LabelCollision,
        Error::LabelNotFound(_) => QiStatus::LabelNotFound,
        Error::Domain(_) => QiStatus::Domain,
        Error::Convergence(_) => QiStatus::Convergence,
        Error::ArgumentOrder(_) => QiStatus::ArgumentOrder,
        Error::DegenerateMeasurement(_) => QiStatus::DegenerateMeasurement,
        Error::SupportMismatch(_) => QiStatus::SupportMismatch,
        Error::InvalidBasis(_) => QiStatus::InvalidBasis,
        Error::HierarchyViolation(_) => QiStatus::HierarchyViolation,
        Error::Configuration { source, .. } => status_of(source),
    }
}

/// Runs `f`, storing its value in `out` and translating errors and panics.
fn guard<T>(out: *mut T, f: impl FnOnce() -> Result<T, Error>) -> QiStatus {
    if out.is_null() {
        set_error("output pointer is null".into());
        return QiStatus::NullPointer;
    }
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => {
            // SAFETY: `out` was checked non-null; the caller guarantees it is writable.
            unsafe { out.write(v) };
            QiStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            QiStatus::Panic
        }
    }
}

fn sign_of(sign: i32) -> Result<Sign, Error> {
    match sign {
        QI_SIGN_PLUS => Ok(Sign::Plus),
        QI_SIGN_MINUS => Ok(Sign::Minus),
        s => Err(Error::Domain(format!("sign must be 0 (plus) or 1 (minus), got {s}"))),
    }
}

fn handle<'a>(h: *const QiProbeState) -> Result<&'a QiProbeState, Error> {
    // SAFETY: a non-null handle must come from a `qi_probe_*` constructor.
    unsafe { h.as_ref() }.ok_or_else(|| Error::Domain("probe handle is null".into()))
}

/// Message of the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn qi_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qi_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

#[no_mangle]
pub extern "C" fn qi_erfc(x: f64) -> f64 {
    metrics::erfc(x)
}

#[no_mangle]
pub extern "C" fn qi_qfi_ci(a_re: f64, a_im: f64, n_b: f64, out: *mut f64) -> QiStatus {
    guard(out, || metrics::qfi_ci(Complex64::new(a_re, a_im), n_b))
}

#[no_mangle]
pub extern "C" fn qi_qfi_coherent(n_s: f64, n_b: f64, out: *mut f64) -> QiStatus {
    guard(out, || metrics::qfi_coherent(n_s, n_b))
}

#[no_mangle]
pub extern "C" fn qi_qfi_tmsv(n_s: f64, n_b: f64, out: *mut f64) -> QiStatus {
    guard(out, || metrics::qfi_tmsv(n_s, n_b))
}

#[no_mangle]
pub extern "C" fn qi_qfi_psi(p: f64, sign: i32, n_b: f64, out: *mut f64) -> QiStatus {
    guard(out, || metrics::qfi_psi(p, sign_of(sign)?, n_b))
}

#[no_mangle]
pub extern "C" fn qi_g2_tmsv(n_s: f64, out: *mut f64) -> QiStatus {
    guard(out, || metrics::g2_tmsv(n_s))
}

#[no_mangle]
pub extern "C" fn qi_g2_schmidt(sign: i32, kappa: usize, z: f64, out: *mut f64) -> QiStatus {
    guard(out, || metrics::g2_schmidt(sign_of(sign)?, kappa, z))
}

#[no_mangle]
pub extern "C" fn qi_normalization_factor(sign: i32, kappa: usize, iota: usize, z: f64, out: *mut f64) -> QiStatus {
    guard(out, || probe::normalization_factor(sign_of(sign)?, kappa, iota, z))
}

#[no_mangle]
pub extern "C" fn qi_quantum_advantage(qfi_probe: f64, n_s: f64, n_b: f64, out: *mut f64) -> QiStatus {
    guard(out, || metrics::quantum_advantage(qfi_probe, n_s, n_b))
}

#[no_mangle]
pub extern "C" fn qi_perr_from_snr(r: f64, m: u64, out: *mut f64) -> QiStatus {
    guard(out, || metrics::perr_from_snr(r, m))
}

#[no_mangle]
pub extern "C" fn qi_perr_snr_exp_bound(r: f64, m: u64, out: *mut f64) -> QiStatus {
    guard(out, || metrics::perr_snr_exp_bound(r, m))
}

#[no_mangle]
pub extern "C" fn qi_perr_from_fisher(f: f64, eta: f64, m: u64, out: *mut f64) -> QiStatus {
    guard(out, || metrics::perr_from_fisher(f, eta, m))
}

fn moments_in(m: &QiMoments) -> MeasurementMoments {
    MeasurementMoments {
        mu0: m.mu0,
        mu1: m.mu1,
        var0: m.var0,
        var1: m.var1,
        eta: m.eta,
    }
}

fn moments_out(m: MeasurementMoments) -> QiMoments {
    QiMoments {
        mu0: m.mu0,
        mu1: m.mu1,
        var0: m.var0,
        var1: m.var1,
        eta: m.eta,
    }
}

fn moments_ref<'a>(m: *const QiMoments) -> Result<&'a QiMoments, Error> {
    // SAFETY: the caller passes a pointer to a readable `QiMoments` or NULL.
    unsafe { m.as_ref() }.ok_or_else(|| Error::Domain("moments pointer is null".into()))
}

#[no_mangle]
pub extern "C" fn qi_snr(moments: *const QiMoments, out: *mut f64) -> QiStatus {
    guard(out, || metrics::snr(&moments_in(moments_ref(moments)?)))
}

#[no_mangle]
pub extern "C" fn qi_moments_quadrature(a_re: f64, a_im: f64, phi: f64, n_b: f64, eta: f64, out: *mut QiMoments) -> QiStatus {
    guard(out, || metrics::moments_quadrature(Complex64::new(a_re, a_im), phi, n_b, eta).map(moments_out))
}

#[no_mangle]
pub extern "C" fn qi_threshold(moments: *const QiMoments, m: u64, out: *mut f64) -> QiStatus {
    guard(out, || qillum::detection::threshold(&moments_in(moments_ref(moments)?), m))
}

/// Monte Carlo campaign; deterministic for a fixed seed.
#[no_mangle]
pub extern "C" fn qi_run_campaign(
    moments: *const QiMoments,
    m: u64,
    trials: u64,
    seed: u64,
    out: *mut QiCampaignResult,
) -> QiStatus {
    guard(out, || {
        let spec = CampaignSpec {
            moments: moments_in(moments_ref(moments)?),
            m,
            trials,
            seed,
        };
        let r = run_campaign(&spec)?;
        Ok(QiCampaignResult {
            empirical_false_alarm: r.empirical_false_alarm,
            empirical_miss: r.empirical_miss,
            empirical_perr: r.empirical_perr,
            analytic_perr: r.analytic_perr,
            stderr_: r.stderr,
        })
    })
}

fn new_probe(family: SchmidtFamily, z: f64, kappa: usize, tail: f64) -> Result<*mut QiProbeState, Error> {
    let trunc = probe::fit_truncation(family, z, kappa, 0.0, tail)?;
    let inner = probe::schmidt_state(family, z, kappa, &trunc)?;
    Ok(Box::into_raw(Box::new(QiProbeState { inner })))
}

/// TMSV with squeezing `z = tanh r`; cutoff fitted to `tail`.
#[no_mangle]
pub extern "C" fn qi_probe_tmsv(z: f64, tail: f64, out: *mut *mut QiProbeState) -> QiStatus {
    guard(out, || new_probe(SchmidtFamily::Added, z, 0, tail))
}

/// Photon-added TMSV (`kappa >= 1`).
#[no_mangle]
pub extern "C" fn qi_probe_mpa(z: f64, kappa: usize, tail: f64, out: *mut *mut QiProbeState) -> QiStatus {
    guard(out, || {
        if kappa == 0 {
            return Err(Error::Domain("photon addition needs kappa >= 1".into()));
        }
        new_probe(SchmidtFamily::Added, z, kappa, tail)
    })
}

/// Photon-subtracted TMSV (`kappa >= 1`).
#[no_mangle]
pub extern "C" fn qi_probe_mps(z: f64, kappa: usize, tail: f64, out: *mut *mut QiProbeState) -> QiStatus {
    guard(out, || {
        if kappa == 0 {
            return Err(Error::Domain("photon subtraction needs kappa >= 1".into()));
        }
        new_probe(SchmidtFamily::Subtracted, z, kappa, tail)
    })
}

/// Two-term toy state `√(1−p)|kk⟩ + √p|k+1,k+1⟩` with `k = 0` (minus) or `1` (plus).
#[no_mangle]
pub extern "C" fn qi_probe_psi(p: f64, sign: i32, out: *mut *mut QiProbeState) -> QiStatus {
    guard(out, || {
        let toy = probe::psi_toy(p, sign_of(sign)?)?;
        Ok(Box::into_raw(Box::new(QiProbeState { inner: toy.schmidt() })))
    })
}

/// Releases a handle; NULL is ignored.
///
/// # Safety
/// `state` must be NULL or a handle from a `qi_probe_*` constructor that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn qi_probe_free(state: *mut QiProbeState) {
    if !state.is_null() {
        drop(unsafe { Box::from_raw(state) });
    }
}

#[no_mangle]
pub extern "C" fn qi_probe_mean_photon(state: *const QiProbeState, out: *mut f64) -> QiStatus {
    guard(out, || Ok(probe::mean_photon(&handle(state)?.inner)))
}

#[no_mangle]
pub extern "C" fn qi_probe_m_min(state: *const QiProbeState, out: *mut usize) -> QiStatus {
    guard(out, || Ok(handle(state)?.inner.m_min))
}

#[no_mangle]
pub extern "C" fn qi_probe_len(state: *const QiProbeState, out: *mut usize) -> QiStatus {
    guard(out, || Ok(handle(state)?.inner.amplitudes.len()))
}

/// Copies amplitudes `c_{m_min} ..` into `buf` (capacity `cap`); `written` gets the count.
///
/// # Safety
/// `buf` must be NULL or writable for `cap` doubles, and `written` NULL or
/// writable for one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn qi_probe_amplitudes(
    state: *const QiProbeState,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> QiStatus {
    let mut needed = 0usize;
    let status = guard(&mut needed as *mut usize, || {
        let amps = &handle(state)?.inner.amplitudes;
        Ok(amps.len())
    });
    if status != QiStatus::Ok {
        return status;
    }
    if buf.is_null() || written.is_null() {
        set_error("output pointer is null".into());
        return QiStatus::NullPointer;
    }
    if cap < needed {
        set_error(format!("buffer holds {cap} values, {needed} needed"));
        // SAFETY: `written` checked non-null.
        unsafe { written.write(needed) };
        return QiStatus::BufferTooSmall;
    }
    let amps = match handle(state) {
        Ok(h) => &h.inner.amplitudes,
        Err(e) => {
            set_error(e.to_string());
            return status_of(&e);
        }
    };
    // SAFETY: `buf` is non-null with room for `cap >= amps.len()` values.
    unsafe {
        ptr::copy_nonoverlapping(amps.as_ptr(), buf, amps.len());
        written.write(amps.len());
    }
    QiStatus::Ok
}

#[no_mangle]
pub extern "C" fn qi_probe_qfi(state: *const QiProbeState, n_b: f64, out: *mut f64) -> QiStatus {
    guard(out, || metrics::qfi_schmidt(&handle(state)?.inner, n_b))
}

/// QFI from the numerical oracle, with the bath cutoff fitted to `tail`.
#[no_mangle]
pub extern "C" fn qi_probe_qfi_oracle(state: *const QiProbeState, n_b: f64, tail: f64, out: *mut f64) -> QiStatus {
    guard(out, || {
        let st = &handle(state)?.inner;
        let d = st.m_max() + 1;
        let trunc = TruncationSpec::new(d.max(2), d.max(2), thermal_cutoff(n_b, tail), tail)?;
        oracle::qfi_numeric(&oracle::derivative_schmidt(st, n_b, &trunc)?)
    })
}

#[no_mangle]
pub extern "C" fn qi_probe_g2(state: *const QiProbeState, out: *mut f64) -> QiStatus {
    guard(out, || metrics::g2_fock_sum(&handle(state)?.inner))
}

#[no_mangle]
pub extern "C" fn qi_probe_moments_joint_photon(
    state: *const QiProbeState,
    n_b: f64,
    eta: f64,
    out: *mut QiMoments,
) -> QiStatus {
    guard(out, || metrics::moments_joint_photon(&handle(state)?.inner, n_b, eta).map(moments_out))
}

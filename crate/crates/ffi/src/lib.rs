//! C ABI over `hopres`: profiles and random potentials behind opaque
//! handles, status codes on every call, and a thread-local last-error
//! message.
//!
//! Ownership: every `*_new`/`*_parse` handle is released with the matching
//! `*_free`. Output buffers are always caller-allocated.

use hopres::ensemble::{sample_coefficients, CoefficientLaw, RandomPotential};
use hopres::profiles::Profile;
use hopres::resonances::{defect, find_resonances, Rect};
use hopres::Error;
use num_complex::Complex64;
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopresStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    /// Integrator or contour accuracy could not be certified.
    NumericalError = 4,
    /// `count` holds the required capacity.
    BufferTooSmall = 5,
    Unsupported = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopresComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for HopresComplex {
    fn from(z: Complex64) -> Self {
        HopresComplex { re: z.re, im: z.im }
    }
}

impl From<HopresComplex> for Complex64 {
    fn from(z: HopresComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopresResonance {
    pub lambda: HopresComplex,
    pub multiplicity: usize,
    /// |F(λ)| after polishing.
    pub residual: f64,
}

/// Opaque profile handle.
pub struct HopresProfile(Profile);

/// Opaque handle for one realization of q₀(x) + Σ u_j q(Nx − j).
pub struct HopresPotential(RandomPotential);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HopresStatus {
    match e {
        Error::Parse { .. } => HopresStatus::ParseError,
        Error::Accuracy(_)
        | Error::ContourAccuracy(_)
        | Error::NumericalInconsistency(_)
        | Error::NotInRegime(_)
        | Error::OutsideWorkingBox(_) => HopresStatus::NumericalError,
        Error::UnsupportedDimension(_) | Error::Capability(_) => HopresStatus::Unsupported,
        _ => HopresStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and turning panics into a status.
fn guard<F: FnOnce() -> Result<(), (HopresStatus, String)>>(f: F) -> HopresStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            HopresStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            HopresStatus::Panic
        }
    }
}

fn lib<T>(r: hopres::Result<T>) -> Result<T, (HopresStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (HopresStatus, String) {
    (HopresStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (HopresStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (HopresStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (HopresStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hopres_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses a profile expression such as `d1(psi)` or `box(-2, 1, 0.2)`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hopres_profile_parse(text: *const c_char, out: *mut *mut HopresProfile) -> HopresStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let p = lib(Profile::parse(c_str(text, "text")?))?;
        *out = Box::into_raw(Box::new(HopresProfile(p)));
        Ok(())
    })
}

/// # Safety
/// `p` must be NULL or a handle from `hopres_profile_parse` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hopres_profile_free(p: *mut HopresProfile) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live profile handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hopres_profile_eval(p: *const HopresProfile, x: f64, out: *mut HopresComplex) -> HopresStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("profile"))?;
        *out_ref(out, "out")? = p.0.eval(x).into();
        Ok(())
    })
}

/// q̂(ξ) = ∫ e^{-ixξ} q(x) dx.
///
/// # Safety
/// `p` must be a live profile handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hopres_profile_fourier(
    p: *const HopresProfile,
    xi: f64,
    out: *mut HopresComplex,
) -> HopresStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("profile"))?;
        *out_ref(out, "out")? = p.0.fourier(xi).into();
        Ok(())
    })
}

/// Number of vanishing moments of q in one dimension.
///
/// # Safety
/// `p` must be a live profile handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hopres_profile_vanishing_order(p: *const HopresProfile, out: *mut usize) -> HopresStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("profile"))?;
        *out_ref(out, "out")? = lib(p.0.vanishing_order(hopres::profiles::MOMENT_TOL))?;
        Ok(())
    })
}

/// Samples coefficients u_j, |j| ≤ n, from `law` (`rademacher` or
/// `uniform_scaled`) with `seed` and builds V = q₀ + Σ u_j q(n x − j).
/// Pass n = 0 for the bare q₀. The profiles are copied.
///
/// # Safety
/// `q0`, `q` must be live profile handles, `law` a NUL-terminated string
/// (or NULL when n = 0) and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hopres_potential_new(
    q0: *const HopresProfile,
    q: *const HopresProfile,
    law: *const c_char,
    n: usize,
    seed: u64,
    out: *mut *mut HopresPotential,
) -> HopresStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let q0 = q0.as_ref().ok_or_else(|| null("q0"))?;
        let q = q.as_ref().ok_or_else(|| null("q"))?;
        let v = if n == 0 {
            // A single zero coefficient leaves exactly q₀.
            let u = lib(hopres::ensemble::CoefficientField::zeros(1, 1))?;
            RandomPotential::new(q0.0.clone(), Profile::zero(), u)
        } else {
            let law = lib(CoefficientLaw::parse(c_str(law, "law")?))?;
            let u = lib(sample_coefficients(&law, n, 1, seed))?;
            RandomPotential::new(q0.0.clone(), q.0.clone(), u)
        };
        *out = Box::into_raw(Box::new(HopresPotential(v)));
        Ok(())
    })
}

/// # Safety
/// `v` must be NULL or a handle from `hopres_potential_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hopres_potential_free(v: *mut HopresPotential) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// # Safety
/// `v` must be a live potential handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hopres_potential_eval(
    v: *const HopresPotential,
    x: f64,
    out: *mut HopresComplex,
) -> HopresStatus {
    guard(|| {
        let v = v.as_ref().ok_or_else(|| null("potential"))?;
        *out_ref(out, "out")? = v.0.eval(x).into();
        Ok(())
    })
}

/// The outgoing-matching function F(λ); zero exactly at resonances.
///
/// # Safety
/// `v` must be a live potential handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hopres_outgoing_defect(
    v: *const HopresPotential,
    lambda: HopresComplex,
    out: *mut HopresComplex,
) -> HopresStatus {
    guard(|| {
        let v = v.as_ref().ok_or_else(|| null("potential"))?;
        *out_ref(out, "out")? = lib(defect(&v.0, lambda.into()))?.into();
        Ok(())
    })
}

/// All resonances in [re0, re1] × [im0, im1], certified by winding numbers.
/// `*count` receives the number found; when it exceeds `capacity` nothing
/// is written and `BufferTooSmall` is returned.
///
/// # Safety
/// `v` must be a live potential handle, `buf` must point to `capacity`
/// writable records (or be NULL when `capacity` is 0), `count` writable.
#[no_mangle]
pub unsafe extern "C" fn hopres_find_resonances(
    v: *const HopresPotential,
    re0: f64,
    re1: f64,
    im0: f64,
    im1: f64,
    tol: f64,
    buf: *mut HopresResonance,
    capacity: usize,
    count: *mut usize,
) -> HopresStatus {
    guard(|| {
        let v = v.as_ref().ok_or_else(|| null("potential"))?;
        let count = out_ref(count, "count")?;
        let rect = lib(Rect::new(re0, re1, im0, im1))?;
        let roots = lib(find_resonances(&v.0, rect, tol))?;
        *count = roots.len();
        if roots.len() > capacity {
            return Err((
                HopresStatus::BufferTooSmall,
                format!("{} resonances, capacity {capacity}", roots.len()),
            ));
        }
        if roots.is_empty() {
            return Ok(());
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        for (k, r) in roots.iter().enumerate() {
            *buf.add(k) = HopresResonance {
                lambda: r.lambda.into(),
                multiplicity: r.multiplicity,
                residual: r.residual,
            };
        }
        Ok(())
    })
}

//! C ABI for the iqckit library.
//!
//! Systems are opaque handles created from the same JSON schema the CLI
//! uses; analysis results come back through out-parameters or as
//! heap-allocated JSON strings that the caller must release with
//! [`iqc_string_free`]. Every entry point returns an [`IqcStatus`]; on
//! failure [`iqc_last_error_message`] yields a human-readable description.
//!
//! The header `include/iqckit.h` is generated by cbindgen at build time.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};

use iqckit::analysis::{classify_passivity, hinf_norm, HINF_TOL_CT, HINF_TOL_DT};
use iqckit::destabilizer::{destabilize, SynthesisProfile, DEFAULT_RHO_LADDER};
use iqckit::grid::FrequencyGrid;
use iqckit::io::{
    certificate_to_json, system_from_json, system_to_json, Jv, MultiplierSpec,
};
use iqckit::lti::{Domain, StateSpaceSystem};
use iqckit::multiplier::{factorize_constant, membership, MultiplierForm, SetId};
use iqckit::Error;
use num_complex::Complex64;

/// Status code of every C entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum IqcStatus {
    /// Success.
    IqcOk = 0,
    /// A required pointer argument was null.
    IqcNullArgument = 1,
    /// A string argument was not valid UTF-8.
    IqcInvalidUtf8 = 2,
    /// JSON parsing or schema validation failed.
    IqcParseError = 3,
    /// Arguments were structurally invalid (dimensions, parameters).
    IqcInvalidArgument = 4,
    /// A precondition on system stability was violated.
    IqcUnstable = 5,
    /// The computation failed numerically.
    IqcNumericalError = 6,
    /// The requested construction does not apply (e.g. the plant already
    /// satisfies the constraint).
    IqcNothingToDo = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error").expect("static"));
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_for(err: &Error) -> IqcStatus {
    match err {
        Error::Json(_) | Error::Io(_) => IqcStatus::IqcParseError,
        Error::UnstableSystem { .. } => IqcStatus::IqcUnstable,
        Error::NumericalFailure(_) | Error::SingularResolvent(_) | Error::SingularPsi4 => {
            IqcStatus::IqcNumericalError
        }
        Error::PlantSatisfiesIqc(_) => IqcStatus::IqcNothingToDo,
        _ => IqcStatus::IqcInvalidArgument,
    }
}

fn fail(err: Error) -> IqcStatus {
    let status = status_for(&err);
    set_error(err.to_string());
    status
}

/// Opaque LTI system handle.
pub struct IqcSystem {
    inner: StateSpaceSystem,
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, IqcStatus> {
    if ptr.is_null() {
        set_error("null string argument".into());
        return Err(IqcStatus::IqcNullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8".into());
        IqcStatus::IqcInvalidUtf8
    })
}

fn grid_for(sys: &StateSpaceSystem, points: usize) -> FrequencyGrid {
    let n = if points == 0 {
        iqckit::grid::DEFAULT_GRID_POINTS
    } else {
        points.max(2)
    };
    FrequencyGrid::default_with_points(sys.domain(), n)
}

fn to_cstring(text: String) -> *mut c_char {
    match CString::new(text) {
        Ok(c) => c.into_raw(),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Last error message of this thread, or null when none was recorded.
/// Release with [`iqc_string_free`].
#[no_mangle]
pub extern "C" fn iqc_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map(|c| c.clone().into_raw())
            .unwrap_or(std::ptr::null_mut())
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must have been returned by an iqckit function and not freed before.
#[no_mangle]
pub unsafe extern "C" fn iqc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a system from its JSON description into an opaque handle.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iqc_system_from_json(
    json: *const c_char,
    out: *mut *mut IqcSystem,
) -> IqcStatus {
    if out.is_null() {
        set_error("null output pointer".into());
        return IqcStatus::IqcNullArgument;
    }
    let text = match cstr(json) {
        Ok(t) => t,
        Err(s) => return s,
    };
    match system_from_json(text) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(IqcSystem { inner }));
            IqcStatus::IqcOk
        }
        Err(e) => fail(e),
    }
}

/// Releases a system handle.
///
/// # Safety
/// `sys` must come from [`iqc_system_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn iqc_system_free(sys: *mut IqcSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Serializes a system back to JSON. Release with [`iqc_string_free`].
///
/// # Safety
/// `sys` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn iqc_system_to_json(sys: *const IqcSystem) -> *mut c_char {
    if sys.is_null() {
        set_error("null system handle".into());
        return std::ptr::null_mut();
    }
    to_cstring(system_to_json(&(*sys).inner))
}

/// State dimension, or -1 on a null handle.
///
/// # Safety
/// `sys` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn iqc_system_order(sys: *const IqcSystem) -> c_int {
    if sys.is_null() {
        return -1;
    }
    (*sys).inner.order() as c_int
}

/// Output count, or -1 on a null handle.
///
/// # Safety
/// `sys` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn iqc_system_outputs(sys: *const IqcSystem) -> c_int {
    if sys.is_null() {
        return -1;
    }
    (*sys).inner.noutputs() as c_int
}

/// Input count, or -1 on a null handle.
///
/// # Safety
/// `sys` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn iqc_system_inputs(sys: *const IqcSystem) -> c_int {
    if sys.is_null() {
        return -1;
    }
    (*sys).inner.ninputs() as c_int
}

/// Stability of the system: writes the eigenvalue margin and returns 1
/// (stable), 0 (unstable) or -1 (error).
///
/// # Safety
/// `sys` must be a live handle; `out_margin` may be null.
#[no_mangle]
pub unsafe extern "C" fn iqc_system_is_stable(
    sys: *const IqcSystem,
    out_margin: *mut c_double,
) -> c_int {
    if sys.is_null() {
        return -1;
    }
    let rep = (*sys).inner.is_stable();
    if !out_margin.is_null() {
        *out_margin = rep.margin;
    }
    rep.stable as c_int
}

/// Transfer matrix at `lambda = re + j im`, written row-major into the
/// `outputs x inputs` buffers `out_re` and `out_im`.
///
/// # Safety
/// Buffers must hold at least `outputs * inputs` doubles each.
#[no_mangle]
pub unsafe extern "C" fn iqc_system_evaluate(
    sys: *const IqcSystem,
    re: c_double,
    im: c_double,
    out_re: *mut c_double,
    out_im: *mut c_double,
) -> IqcStatus {
    if sys.is_null() || out_re.is_null() || out_im.is_null() {
        set_error("null argument".into());
        return IqcStatus::IqcNullArgument;
    }
    let sys = &(*sys).inner;
    match sys.evaluate(Complex64::new(re, im)) {
        Ok(v) => {
            let (ny, nu) = sys.shape();
            for i in 0..ny {
                for j in 0..nu {
                    *out_re.add(i * nu + j) = v[(i, j)].re;
                    *out_im.add(i * nu + j) = v[(i, j)].im;
                }
            }
            IqcStatus::IqcOk
        }
        Err(e) => fail(e),
    }
}

/// H-infinity norm over a default grid with `points` interior points
/// (0 selects the default density).
///
/// # Safety
/// `sys` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn iqc_hinf_norm(
    sys: *const IqcSystem,
    points: usize,
    out_gamma: *mut c_double,
    out_peak_frequency: *mut c_double,
) -> IqcStatus {
    if sys.is_null() {
        set_error("null system handle".into());
        return IqcStatus::IqcNullArgument;
    }
    let sys = &(*sys).inner;
    let grid = grid_for(sys, points);
    let tol = match sys.domain() {
        Domain::Ct => HINF_TOL_CT,
        Domain::Dt => HINF_TOL_DT,
    };
    match hinf_norm(sys, &grid, tol) {
        Ok(h) => {
            if !out_gamma.is_null() {
                *out_gamma = h.gamma;
            }
            if !out_peak_frequency.is_null() {
                *out_peak_frequency = h.peak_frequency;
            }
            IqcStatus::IqcOk
        }
        Err(e) => fail(e),
    }
}

/// Passivity report as JSON. Release with [`iqc_string_free`]; null on error.
///
/// # Safety
/// `sys` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn iqc_passivity_report_json(
    sys: *const IqcSystem,
    points: usize,
) -> *mut c_char {
    if sys.is_null() {
        set_error("null system handle".into());
        return std::ptr::null_mut();
    }
    let sys = &(*sys).inner;
    let grid = grid_for(sys, points);
    match classify_passivity(sys, &grid) {
        Ok(rep) => to_cstring(
            Jv::Obj(vec![
                ("nu", Jv::Num(rep.nu)),
                ("rho", Jv::Num(rep.rho)),
                ("classification", Jv::Str(rep.classification.as_str().into())),
                ("worst_frequency_nu", Jv::Num(rep.worst_frequency_nu)),
                ("worst_frequency_rho", Jv::Num(rep.worst_frequency_rho)),
            ])
            .render(),
        ),
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

fn factors_for(
    spec: &MultiplierSpec,
    n: usize,
    m: usize,
    domain: Domain,
) -> iqckit::Result<(
    iqckit::multiplier::Multiplier,
    iqckit::multiplier::JSpectralFactors,
)> {
    let entry = spec.instantiate(n, m, domain)?;
    let psi = match &entry.factors {
        Some(psi) => psi.clone(),
        None => match entry.multiplier.form() {
            MultiplierForm::Constant(_) => factorize_constant(&entry.multiplier)?,
            MultiplierForm::Factored(psi) => psi.clone(),
        },
    };
    Ok((entry.multiplier, psi))
}

/// Membership of a system in one of the four IQC sets. `set` is one of
/// `g1_strict`, `g1_nonstrict`, `g2_strict`, `g2_nonstrict`. Writes 1 or 0
/// into `out_holds` and the signed margin into `out_margin`.
///
/// # Safety
/// Pointers must be live; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn iqc_membership(
    sys: *const IqcSystem,
    multiplier_json: *const c_char,
    set: *const c_char,
    points: usize,
    out_holds: *mut c_int,
    out_margin: *mut c_double,
) -> IqcStatus {
    if sys.is_null() {
        set_error("null system handle".into());
        return IqcStatus::IqcNullArgument;
    }
    let mult_text = match cstr(multiplier_json) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let set_text = match cstr(set) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let sys = &(*sys).inner;
    let result = (|| {
        let set_id = SetId::parse(set_text)?;
        let (n, m) = if set_id.is_plant_side() {
            sys.shape()
        } else {
            (sys.ninputs(), sys.noutputs())
        };
        let spec = MultiplierSpec::from_json(mult_text)?;
        let entry = spec.instantiate(n, m, sys.domain())?;
        let grid = grid_for(sys, points);
        membership(&entry.multiplier, sys, set_id, &grid)
    })();
    match result {
        Ok(v) => {
            if !out_holds.is_null() {
                *out_holds = v.holds as c_int;
            }
            if !out_margin.is_null() {
                *out_margin = v.margin;
            }
            IqcStatus::IqcOk
        }
        Err(e) => fail(e),
    }
}

/// Runs the destabilizer synthesis and returns the certificate as JSON.
/// `profile` is `t1` or `t3`. Null on failure. Release with
/// [`iqc_string_free`].
///
/// # Safety
/// Pointers must be live; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn iqc_destabilize_json(
    g1: *const IqcSystem,
    multiplier_json: *const c_char,
    profile: *const c_char,
    points: usize,
) -> *mut c_char {
    if g1.is_null() {
        set_error("null system handle".into());
        return std::ptr::null_mut();
    }
    let mult_text = match cstr(multiplier_json) {
        Ok(t) => t,
        Err(_) => return std::ptr::null_mut(),
    };
    let profile_text = match cstr(profile) {
        Ok(t) => t,
        Err(_) => return std::ptr::null_mut(),
    };
    let g1 = &(*g1).inner;
    let result = (|| {
        let spec = MultiplierSpec::from_json(mult_text)?;
        let (mult, psi) = factors_for(&spec, g1.noutputs(), g1.ninputs(), g1.domain())?;
        let profile = SynthesisProfile::parse(profile_text)?;
        let grid = grid_for(g1, points);
        destabilize(g1, &psi, &mult, profile, &grid, &DEFAULT_RHO_LADDER)
    })();
    match result {
        Ok(cert) => to_cstring(certificate_to_json(&cert)),
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn make_system(json: &str) -> *mut IqcSystem {
        let c = CString::new(json).unwrap();
        let mut out: *mut IqcSystem = std::ptr::null_mut();
        let status = unsafe { iqc_system_from_json(c.as_ptr(), &mut out) };
        assert!(status == IqcStatus::IqcOk);
        out
    }

    #[test]
    fn system_lifecycle_and_eval() {
        let sys = make_system(r#"{"domain":"ct","A":[[-1.0]],"B":[[1.0]],"C":[[1.0]],"D":[[0.0]]}"#);
        unsafe {
            assert_eq!(iqc_system_order(sys), 1);
            assert_eq!(iqc_system_outputs(sys), 1);
            let mut margin = 0.0;
            assert_eq!(iqc_system_is_stable(sys, &mut margin), 1);
            assert!((margin - 1.0).abs() < 1e-12);
            let (mut re, mut im) = (0.0, 0.0);
            let st = iqc_system_evaluate(sys, 0.0, 1.0, &mut re, &mut im);
            assert!(st == IqcStatus::IqcOk);
            assert!((re - 0.5).abs() < 1e-12 && (im + 0.5).abs() < 1e-12);
            let json = iqc_system_to_json(sys);
            assert!(!json.is_null());
            iqc_string_free(json);
            iqc_system_free(sys);
        }
    }

    #[test]
    fn hinf_and_passivity_through_abi() {
        let sys = make_system(r#"{"domain":"ct","A":[[-1.0]],"B":[[1.0]],"C":[[1.0]],"D":[[0.0]]}"#);
        unsafe {
            let (mut gamma, mut peak) = (0.0, -1.0);
            let st = iqc_hinf_norm(sys, 0, &mut gamma, &mut peak);
            assert!(st == IqcStatus::IqcOk);
            assert!((gamma - 1.0).abs() < 1e-5);
            let rep = iqc_passivity_report_json(sys, 200);
            assert!(!rep.is_null());
            let text = CStr::from_ptr(rep).to_str().unwrap().to_string();
            assert!(text.contains("OutputStrict"), "{text}");
            iqc_string_free(rep);
            iqc_system_free(sys);
        }
    }

    #[test]
    fn membership_and_destabilize_through_abi() {
        let sys = make_system(r#"{"domain":"ct","D":[[0.5]]}"#);
        let mult = CString::new(r#"{"kind":"catalog","name":"passivity"}"#).unwrap();
        let set = CString::new("g1_nonstrict").unwrap();
        unsafe {
            let (mut holds, mut margin) = (-1, 0.0);
            let st = iqc_membership(sys, mult.as_ptr(), set.as_ptr(), 200, &mut holds, &mut margin);
            assert!(st == IqcStatus::IqcOk);
            assert_eq!(holds, 0);
            assert!((margin + 1.0).abs() < 1e-10);

            let profile = CString::new("t1").unwrap();
            let cert = iqc_destabilize_json(sys, mult.as_ptr(), profile.as_ptr(), 200);
            assert!(!cert.is_null());
            let text = CStr::from_ptr(cert).to_str().unwrap();
            assert!(text.contains("CaseB_DeltaPath"));
            iqc_string_free(cert);
            iqc_system_free(sys);
        }
    }

    #[test]
    fn errors_surface_through_last_error() {
        let bad = CString::new("{not json").unwrap();
        let mut out: *mut IqcSystem = std::ptr::null_mut();
        unsafe {
            let st = iqc_system_from_json(bad.as_ptr(), &mut out);
            assert!(st == IqcStatus::IqcParseError);
            let msg = iqc_last_error_message();
            assert!(!msg.is_null());
            iqc_string_free(msg);
        }
        // destabilize refuses a plant already satisfying the constraint
        let sys = make_system(r#"{"domain":"ct","D":[[-0.5]]}"#);
        let mult = CString::new(r#"{"kind":"catalog","name":"passivity"}"#).unwrap();
        let profile = CString::new("t1").unwrap();
        unsafe {
            let cert = iqc_destabilize_json(sys, mult.as_ptr(), profile.as_ptr(), 120);
            assert!(cert.is_null());
            let msg = iqc_last_error_message();
            assert!(!msg.is_null());
            let text = CStr::from_ptr(msg).to_str().unwrap();
            assert!(text.contains("satisfies"), "{text}");
            iqc_string_free(msg);
            iqc_system_free(sys);
        }
    }
}

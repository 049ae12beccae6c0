//! C ABI over the core toolkit.
//!
//! Every function returns a [`VdStatus`]; on failure the message is kept
//! per thread and read back with [`vd_last_error_message`]. Objects cross
//! the boundary as opaque handles released by their `_free` function.

use num_complex::Complex64;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use vlasov_decay::cli::{parse_config, run_experiment};
use vlasov_decay::dispersion::{dispersion_transform, penrose_margin, PenroseGrid};
use vlasov_decay::equilibria::{make_equilibrium, Equilibrium, Family};
use vlasov_decay::kernel::{build_mode_kernel_table, radial_modes, solve_mode_resolvent, ResolventTable, TimeGrid};
use vlasov_decay::transport::{free_norms, norm_grid, InitialDatum};
use vlasov_decay::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VdStatus {
    Ok = 0,
    NullPointer = 1,
    Parameter = 2,
    Domain = 3,
    Capability = 4,
    Precision = 5,
    Range = 6,
    UnstableMode = 7,
    Divergence = 8,
    Invertibility = 9,
    Instability = 10,
    Configuration = 11,
    Dimension = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

/// Equilibrium families.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VdFamily {
    Maxwellian = 0,
    /// Equal-weight Maxwellians at `±u·e₁`.
    DoubleBump = 1,
}

/// Opaque equilibrium handle.
pub struct VdEquilibrium(Equilibrium);

/// Opaque per-mode resolvent table.
pub struct VdResolvent(ResolventTable);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let clean = message.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).expect("no interior nul"));
}

fn status_of(error: &Error) -> VdStatus {
    match error {
        Error::Parameter { .. } => VdStatus::Parameter,
        Error::Domain(_) => VdStatus::Domain,
        Error::Capability(_) => VdStatus::Capability,
        Error::Precision(_) => VdStatus::Precision,
        Error::Range(_) => VdStatus::Range,
        Error::UnstableMode { .. } => VdStatus::UnstableMode,
        Error::Divergence { .. } => VdStatus::Divergence,
        Error::Invertibility { .. } => VdStatus::Invertibility,
        Error::Instability { .. } => VdStatus::Instability,
        Error::Configuration(_) => VdStatus::Configuration,
        Error::Dimension(_) => VdStatus::Dimension,
    }
}

fn fail(status: VdStatus, message: &str) -> VdStatus {
    set_error(message);
    status
}

fn from_error(error: Error) -> VdStatus {
    fail(status_of(&error), &error.to_string())
}

/// Runs `body`, mapping panics to [`VdStatus::Panic`] and clearing the
/// error message on success.
fn guard(body: impl FnOnce() -> Result<(), VdStatus>) -> VdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            VdStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => fail(VdStatus::Panic, "internal panic"),
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), VdStatus> {
    if p.is_null() {
        Err(fail(VdStatus::NullPointer, &format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], VdStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failure on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn vd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an equilibrium; `u` is ignored for the Maxwellian.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn vd_equilibrium_new(
    family: VdFamily,
    dim: usize,
    sigma: f64,
    u: f64,
    out: *mut *mut VdEquilibrium,
) -> VdStatus {
    guard(|| {
        non_null(out, "out")?;
        let family = match family {
            VdFamily::Maxwellian => Family::Maxwellian { sigma },
            VdFamily::DoubleBump => Family::DoubleBump { separation: u, sigma },
        };
        let eq = make_equilibrium(family, dim).map_err(from_error)?;
        *out = Box::into_raw(Box::new(VdEquilibrium(eq)));
        Ok(())
    })
}

/// Releases an equilibrium; null is ignored.
///
/// # Safety
/// `eq` must come from [`vd_equilibrium_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vd_equilibrium_free(eq: *mut VdEquilibrium) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

/// `μ(v)` for `v` of length `d`.
///
/// # Safety
/// `eq` must be a live handle, `v` must hold `len` doubles and `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_equilibrium_value(eq: *const VdEquilibrium, v: *const f64, len: usize, out: *mut f64) -> VdStatus {
    guard(|| {
        non_null(eq, "eq")?;
        non_null(out, "out")?;
        let eq = &(*eq).0;
        let v = slice(v, len, "v")?;
        if len != eq.dim() {
            return Err(fail(VdStatus::Dimension, &format!("v has length {len}, equilibrium has d = {}", eq.dim())));
        }
        *out = eq.value(v);
        Ok(())
    })
}

/// `K̃(τ, ξ)` with `Im τ ≤ 0`, written as real and imaginary parts.
///
/// # Safety
/// `eq` must be a live handle, `xi` must hold `len` doubles and the
/// outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_dispersion_transform(
    eq: *const VdEquilibrium,
    tau_re: f64,
    tau_im: f64,
    xi: *const f64,
    len: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> VdStatus {
    guard(|| {
        non_null(eq, "eq")?;
        non_null(out_re, "out_re")?;
        non_null(out_im, "out_im")?;
        let eq = &(*eq).0;
        let xi = slice(xi, len, "xi")?;
        if len != eq.dim() {
            return Err(fail(VdStatus::Dimension, &format!("xi has length {len}, equilibrium has d = {}", eq.dim())));
        }
        let k = dispersion_transform(eq, Complex64::new(tau_re, tau_im), xi, None, None).map_err(from_error)?;
        *out_re = k.value.re;
        *out_im = k.value.im;
        Ok(())
    })
}

/// Penrose margin on the default grid; `out_stable` is 1 when the margin is
/// positive and every winding count vanishes.
///
/// # Safety
/// `eq` must be a live handle and the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_penrose_margin(eq: *const VdEquilibrium, out_margin: *mut f64, out_stable: *mut i32) -> VdStatus {
    guard(|| {
        non_null(eq, "eq")?;
        non_null(out_margin, "out_margin")?;
        non_null(out_stable, "out_stable")?;
        let report = penrose_margin(&(*eq).0, &PenroseGrid::default_grid()).map_err(from_error)?;
        *out_margin = report.margin;
        *out_stable = i32::from(report.is_stable());
        Ok(())
    })
}

/// Resolvent `G(t, r·e₁)` on `t = n·dt ≤ horizon` for the given radii.
///
/// # Safety
/// `eq` must be a live handle, `radii` must hold `n_radii` doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_resolvent_new(
    eq: *const VdEquilibrium,
    radii: *const f64,
    n_radii: usize,
    dt: f64,
    horizon: f64,
    out: *mut *mut VdResolvent,
) -> VdStatus {
    guard(|| {
        non_null(eq, "eq")?;
        non_null(out, "out")?;
        let eq = &(*eq).0;
        let radii = slice(radii, n_radii, "radii")?;
        if radii.is_empty() {
            return Err(fail(VdStatus::Parameter, "need at least one radius"));
        }
        let time = TimeGrid::new(dt, horizon).map_err(from_error)?;
        let table = build_mode_kernel_table(eq, time, radial_modes(eq.dim(), radii)).map_err(from_error)?;
        let res = solve_mode_resolvent(&table).map_err(from_error)?;
        *out = Box::into_raw(Box::new(VdResolvent(res)));
        Ok(())
    })
}

/// Releases a resolvent table; null is ignored.
///
/// # Safety
/// `res` must come from [`vd_resolvent_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vd_resolvent_free(res: *mut VdResolvent) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Number of time steps and of modes.
///
/// # Safety
/// `res` must be a live handle and the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_resolvent_shape(res: *const VdResolvent, out_steps: *mut usize, out_modes: *mut usize) -> VdStatus {
    guard(|| {
        non_null(res, "res")?;
        non_null(out_steps, "out_steps")?;
        non_null(out_modes, "out_modes")?;
        let (n, m) = (*res).0.shape();
        *out_steps = n;
        *out_modes = m;
        Ok(())
    })
}

/// `G(t_step, mode)` and `K(t_step, mode)`.
///
/// # Safety
/// `res` must be a live handle and the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_resolvent_get(
    res: *const VdResolvent,
    step: usize,
    mode: usize,
    out_g: *mut f64,
    out_k: *mut f64,
) -> VdStatus {
    guard(|| {
        non_null(res, "res")?;
        non_null(out_g, "out_g")?;
        non_null(out_k, "out_k")?;
        let res = &(*res).0;
        let (n, m) = res.shape();
        if step >= n || mode >= m {
            return Err(fail(
                VdStatus::Range,
                &format!("index ({step}, {mode}) outside the {n} x {m} table"),
            ));
        }
        *out_g = res.get(step, mode);
        *out_k = res.kernel().get(step, mode);
        Ok(())
    })
}

/// `(‖∇ᵏρ_free(t)‖_{L¹}, ‖∇ᵏρ_free(t)‖_{L^∞})` for `k ≤ order` of the
/// Gaussian datum with smallness `eps0`. Both buffers need `order + 1`
/// entries.
///
/// # Safety
/// The output buffers must hold `capacity` doubles each.
#[no_mangle]
pub unsafe extern "C" fn vd_free_transport_norms(
    dim: usize,
    eps0: f64,
    order: usize,
    t: f64,
    out_l1: *mut f64,
    out_linf: *mut f64,
    capacity: usize,
) -> VdStatus {
    guard(|| {
        non_null(out_l1, "out_l1")?;
        non_null(out_linf, "out_linf")?;
        if capacity < order + 1 {
            return Err(fail(
                VdStatus::BufferTooSmall,
                &format!("need {} entries, buffers hold {capacity}", order + 1),
            ));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(fail(VdStatus::Parameter, &format!("t must be non-negative, got {t}")));
        }
        let f0 = InitialDatum::gaussian(dim, eps0, order).map_err(from_error)?;
        let grid = norm_grid(&f0, t);
        for (k, (l1, linf)) in free_norms(&f0, t, order, &grid).into_iter().enumerate() {
            *out_l1.add(k) = l1;
            *out_linf.add(k) = linf;
        }
        Ok(())
    })
}

/// Least-squares decay exponent of `values` against `t` over the window.
///
/// # Safety
/// `t` and `values` must hold `len` doubles; outputs must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn vd_fit_decay(
    t: *const f64,
    values: *const f64,
    len: usize,
    t_min: f64,
    t_max: f64,
    log_correction: i32,
    out_exponent: *mut f64,
    out_amplitude: *mut f64,
    out_residual: *mut f64,
) -> VdStatus {
    guard(|| {
        non_null(out_exponent, "out_exponent")?;
        non_null(out_amplitude, "out_amplitude")?;
        non_null(out_residual, "out_residual")?;
        let t = slice(t, len, "t")?;
        let values = slice(values, len, "values")?;
        let series: Vec<(f64, f64)> = t.iter().copied().zip(values.iter().copied()).collect();
        let fit = vlasov_decay::cli::fit_decay(&series, (t_min, t_max), log_correction != 0).map_err(from_error)?;
        *out_exponent = fit.exponent;
        *out_amplitude = fit.amplitude;
        *out_residual = fit.residual_rms;
        Ok(())
    })
}

/// Parses `config_text` and runs the experiment, writing CSV files and the
/// manifest into `out_dir` (or the config's `output` when null).
///
/// # Safety
/// `config_text` and a non-null `out_dir` must be NUL-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn vd_run_config(config_text: *const c_char, out_dir: *const c_char) -> VdStatus {
    guard(|| {
        non_null(config_text, "config_text")?;
        let text = CStr::from_ptr(config_text)
            .to_str()
            .map_err(|_| fail(VdStatus::Parameter, "config_text is not UTF-8"))?;
        let mut config = parse_config(text).map_err(|e| fail(VdStatus::Configuration, e.to_string().trim_end()))?;
        if !out_dir.is_null() {
            let dir = CStr::from_ptr(out_dir)
                .to_str()
                .map_err(|_| fail(VdStatus::Parameter, "out_dir is not UTF-8"))?;
            config.output = PathBuf::from(dir);
        }
        run_experiment(&config, true).map_err(|e| fail(status_of(&e.error), &e.to_string()))?;
        Ok(())
    })
}

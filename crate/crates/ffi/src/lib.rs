//! C ABI over `abc_optimal`.
//!
//! Densities and proposals are opaque heap handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns an
//! [`AbcStatus`]; on failure the message is available from
//! [`abc_last_error_message`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use abc_optimal::efficiency::{
    analytic_gaussian_efficiency, kish_ess, sampling_efficiency, AnalyticScheme, EfficiencyReport, GaussianToyParams,
};
use abc_optimal::proposals::{
    beaumont_kde_proposal, bounded_proposal, geometric_mean_proposal, optimal_proposal, Proposal, Scheme,
};
use abc_optimal::{DensitySpec, Error};

/// Relative tolerance on `A*` used by [`abc_proposal_new`] for the optimal scheme.
pub const ABC_OPTIMAL_TOL: f64 = 1e-7;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Divergent = 3,
    NumericalFailure = 4,
    Inadmissible = 5,
    NotAvailable = 6,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbcScheme {
    Prior = 0,
    Posterior = 1,
    BeaumontKde = 2,
    GeometricMean = 3,
    Bounded = 4,
    Optimal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbcAnalyticScheme {
    Prior = 0,
    Posterior = 1,
    BeaumontKde = 2,
    GeometricMean = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AbcEfficiency {
    pub a: f64,
    pub b: f64,
    pub omega: f64,
    pub est_error: f64,
}

impl From<EfficiencyReport> for AbcEfficiency {
    fn from(r: EfficiencyReport) -> Self {
        Self {
            a: r.a,
            b: r.b,
            omega: r.omega,
            est_error: r.est_error,
        }
    }
}

/// Opaque one-dimensional density.
pub struct AbcDensity(DensitySpec);

/// Opaque proposal: a density plus the parameters it was built with.
pub struct AbcProposal(Proposal);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AbcStatus {
    match e {
        Error::Usage(_) | Error::DimensionMismatch { .. } | Error::Config(_) | Error::InadmissibleParameter(_) => {
            AbcStatus::InvalidArgument
        }
        Error::Divergent(_) => AbcStatus::Divergent,
        Error::InadmissibleProposal { .. } => AbcStatus::Inadmissible,
        Error::Unsupported(_) => AbcStatus::NotAvailable,
        _ => AbcStatus::NumericalFailure,
    }
}

/// Runs `f`, recording the error message and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (AbcStatus, String)>) -> AbcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AbcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            AbcStatus::Panic
        }
    }
}

fn lib<T>(r: abc_optimal::Result<T>) -> Result<T, (AbcStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (AbcStatus, String)> {
    p.as_ref().ok_or_else(|| (AbcStatus::NullPointer, format!("{name} is null")))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), (AbcStatus, String)> {
    if out.is_null() {
        return Err((AbcStatus::NullPointer, "output pointer is null".into()));
    }
    out.write(value);
    Ok(())
}

unsafe fn new_density(out: *mut *mut AbcDensity, spec: abc_optimal::Result<DensitySpec>) -> AbcStatus {
    guard(|| {
        if out.is_null() {
            return Err((AbcStatus::NullPointer, "output pointer is null".into()));
        }
        let d = lib(spec)?;
        write(out, Box::into_raw(Box::new(AbcDensity(d))))
    })
}

/// Message of the last failing call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn abc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn abc_density_gaussian(mean: f64, std: f64, out: *mut *mut AbcDensity) -> AbcStatus {
    new_density(out, DensitySpec::gaussian(mean, std))
}

/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn abc_density_uniform(lo: f64, hi: f64, out: *mut *mut AbcDensity) -> AbcStatus {
    new_density(out, DensitySpec::uniform(lo, hi))
}

/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn abc_density_chi_squared(dof: u32, out: *mut *mut AbcDensity) -> AbcStatus {
    new_density(out, DensitySpec::chi_squared(dof))
}

/// Gaussian mixture from `n` parallel arrays of weights, means and standard deviations.
///
/// # Safety
/// Each array must hold `n` doubles; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn abc_density_mixture(
    weights: *const f64,
    means: *const f64,
    stds: *const f64,
    n: usize,
    out: *mut *mut AbcDensity,
) -> AbcStatus {
    if n > 0 && (weights.is_null() || means.is_null() || stds.is_null()) {
        set_error("mixture arrays are null".into());
        return AbcStatus::NullPointer;
    }
    let triples: Vec<(f64, f64, f64)> = if n == 0 {
        Vec::new()
    } else {
        let (w, m, s) = (
            std::slice::from_raw_parts(weights, n),
            std::slice::from_raw_parts(means, n),
            std::slice::from_raw_parts(stds, n),
        );
        (0..n).map(|i| (w[i], m[i], s[i])).collect()
    };
    new_density(out, DensitySpec::mixture(&triples))
}

/// # Safety
/// `density` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn abc_density_free(density: *mut AbcDensity) {
    if !density.is_null() {
        drop(Box::from_raw(density));
    }
}

/// Natural log of the density at `theta`; `-inf` outside the support.
///
/// # Safety
/// `density` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn abc_density_log_pdf(density: *const AbcDensity, theta: f64, out: *mut f64) -> AbcStatus {
    guard(|| {
        let d = deref(density, "density")?;
        write(out, d.0.ln_pdf(theta))
    })
}

/// `A[q]`, `B[q]` and `ω[q]` by adaptive quadrature.
///
/// # Safety
/// All handles must be live; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn abc_sampling_efficiency(
    q: *const AbcDensity,
    posterior: *const AbcDensity,
    prior: *const AbcDensity,
    out: *mut AbcEfficiency,
) -> AbcStatus {
    guard(|| {
        let (q, p, pi) = (deref(q, "q")?, deref(posterior, "posterior")?, deref(prior, "prior")?);
        let r = lib(sampling_efficiency(&q.0, &p.0, &pi.0))?;
        write(out, r.into())
    })
}

/// Builds the proposal of `scheme` for the given posterior and prior.
///
/// # Safety
/// Both handles must be live; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn abc_proposal_new(
    scheme: AbcScheme,
    posterior: *const AbcDensity,
    prior: *const AbcDensity,
    out: *mut *mut AbcProposal,
) -> AbcStatus {
    guard(|| {
        let (p, pi) = (&deref(posterior, "posterior")?.0, &deref(prior, "prior")?.0);
        if out.is_null() {
            return Err((AbcStatus::NullPointer, "output pointer is null".into()));
        }
        let proposal = lib(match scheme {
            AbcScheme::Prior => Ok(Proposal::prior(pi)),
            AbcScheme::Posterior => Ok(Proposal::posterior(p)),
            AbcScheme::BeaumontKde => beaumont_kde_proposal(p),
            AbcScheme::GeometricMean => geometric_mean_proposal(p, pi),
            AbcScheme::Bounded => bounded_proposal(p, pi, None),
            AbcScheme::Optimal => optimal_proposal(p, pi, ABC_OPTIMAL_TOL),
        })?;
        write(out, Box::into_raw(Box::new(AbcProposal(proposal))))
    })
}

/// # Safety
/// `proposal` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn abc_proposal_free(proposal: *mut AbcProposal) {
    if !proposal.is_null() {
        drop(Box::from_raw(proposal));
    }
}

/// # Safety
/// `proposal` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn abc_proposal_log_pdf(proposal: *const AbcProposal, theta: f64, out: *mut f64) -> AbcStatus {
    guard(|| {
        let q = deref(proposal, "proposal")?;
        write(out, q.0.ln_pdf(theta))
    })
}

/// A new density handle holding a copy of the proposal density.
///
/// # Safety
/// `proposal` must be a live handle; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn abc_proposal_density(proposal: *const AbcProposal, out: *mut *mut AbcDensity) -> AbcStatus {
    guard(|| {
        let q = deref(proposal, "proposal")?;
        write(out, Box::into_raw(Box::new(AbcDensity(q.0.density.clone()))))
    })
}

/// `A*` of the optimal scheme or `Ā` of the bounded scheme; `NotAvailable` otherwise.
///
/// # Safety
/// `proposal` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn abc_proposal_acceptance_parameter(proposal: *const AbcProposal, out: *mut f64) -> AbcStatus {
    guard(|| {
        let q = &deref(proposal, "proposal")?.0;
        let value = match q.scheme {
            Scheme::Optimal => q.params.a_star,
            Scheme::Bounded => q.params.a_bar,
            _ => None,
        };
        let v = value.ok_or_else(|| (AbcStatus::NotAvailable, format!("{} proposals carry no A parameter", q.scheme.name())))?;
        write(out, v)
    })
}

/// Kish effective sample size `(Σw)² / Σw²` of `n` nonnegative weights.
///
/// # Safety
/// `weights` must hold `n` doubles; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn abc_kish_ess(weights: *const f64, n: usize, out: *mut f64) -> AbcStatus {
    guard(|| {
        if weights.is_null() && n > 0 {
            return Err((AbcStatus::NullPointer, "weights is null".into()));
        }
        let w = if n == 0 { &[][..] } else { std::slice::from_raw_parts(weights, n) };
        let ess = lib(kish_ess(w))?;
        write(out, ess)
    })
}

/// Closed-form efficiency for the isotropic Gaussian toy with posterior
/// `N(0, I)` and prior `N(mu_pi, sigma_pi² I)` in `n_theta` dimensions.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn abc_analytic_gaussian_efficiency(
    n_theta: u32,
    mu_pi: f64,
    sigma_pi: f64,
    scheme: AbcAnalyticScheme,
    out: *mut AbcEfficiency,
) -> AbcStatus {
    guard(|| {
        let params = lib(GaussianToyParams::new(n_theta, mu_pi, sigma_pi))?;
        let scheme = match scheme {
            AbcAnalyticScheme::Prior => AnalyticScheme::Prior,
            AbcAnalyticScheme::Posterior => AnalyticScheme::Posterior,
            AbcAnalyticScheme::BeaumontKde => AnalyticScheme::BeaumontKde,
            AbcAnalyticScheme::GeometricMean => AnalyticScheme::GeometricMean,
        };
        let r = lib(analytic_gaussian_efficiency(&params, scheme))?;
        write(out, r.into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    fn density(f: impl FnOnce(*mut *mut AbcDensity) -> AbcStatus) -> *mut AbcDensity {
        let mut d = ptr::null_mut();
        assert_eq!(f(&mut d), AbcStatus::Ok);
        d
    }

    #[test]
    fn log_pdf_of_standard_normal() {
        unsafe {
            let d = density(|o| abc_density_gaussian(0.0, 1.0, o));
            let mut v = 0.0;
            assert_eq!(abc_density_log_pdf(d, 0.0, &mut v), AbcStatus::Ok);
            assert!((v + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
            abc_density_free(d);
        }
    }

    #[test]
    fn invalid_arguments_set_the_message() {
        unsafe {
            let mut d = ptr::null_mut();
            assert_eq!(abc_density_gaussian(0.0, -1.0, &mut d), AbcStatus::InvalidArgument);
            assert!(d.is_null());
            let msg = CStr::from_ptr(abc_last_error_message()).to_str().unwrap();
            assert!(!msg.is_empty());
            let mut v = 0.0;
            assert_eq!(abc_density_log_pdf(ptr::null(), 0.0, &mut v), AbcStatus::NullPointer);
            assert_eq!(abc_kish_ess(ptr::null(), 3, &mut v), AbcStatus::NullPointer);
        }
    }

    #[test]
    fn kish_examples() {
        unsafe {
            let mut v = 0.0;
            assert_eq!(abc_kish_ess([2.0, 1.0, 1.0].as_ptr(), 3, &mut v), AbcStatus::Ok);
            assert!((v - 16.0 / 6.0).abs() < 1e-14);
        }
    }

    #[test]
    fn prior_proposal_has_no_acceptance_parameter() {
        unsafe {
            let p = density(|o| abc_density_gaussian(0.0, 1.0, o));
            let pi = density(|o| abc_density_gaussian(0.0, 5.0, o));
            let mut q = ptr::null_mut();
            assert_eq!(abc_proposal_new(AbcScheme::Prior, p, pi, &mut q), AbcStatus::Ok);
            let mut v = 0.0;
            assert_eq!(abc_proposal_acceptance_parameter(q, &mut v), AbcStatus::NotAvailable);
            abc_proposal_free(q);
            abc_density_free(p);
            abc_density_free(pi);
        }
    }
}

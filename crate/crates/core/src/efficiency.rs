//! Sampling-efficiency functionals.
//!
//! With the `q`-independent prefactors dropped,
//!
//! ```text
//! A[q] = ∫ (q/π) p dθ,    B[q] = ∫ (π/q) p dθ,    ω[q] = A[q] / B[q]
//! ```
//!
//! where `p` is the posterior and `π` the prior. `A` tracks the expected
//! acceptance fraction and `1/B` the fraction of accepted samples that survive
//! importance weighting by `π/q`.

use std::cell::RefCell;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{DensitySpec, Interval};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, uniform_breaks, QuadOptions, QuadResult};

/// `exp` underflows to zero below this.
const LN_UNDERFLOW: f64 = -745.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub omega: f64,
    pub method: Method,
    pub est_error: f64,
}

impl EfficiencyReport {
    fn new(a: f64, b: f64, method: Method, a_err: f64, b_err: f64) -> Result<Self> {
        let omega = a / b;
        if !(a > 0.0 && b > 0.0 && omega.is_finite()) {
            return Err(Error::Divergent(format!("A = {a}, B = {b}")));
        }
        Ok(Self {
            a,
            b,
            omega,
            method,
            est_error: omega * (a_err / a + b_err / b),
        })
    }
}

/// Default integration domain for the functionals: the hull of the posterior
/// and prior effective ranges, clipped to the prior support.
pub fn functional_domain(p: &DensitySpec, prior: &DensitySpec) -> Result<Interval> {
    p.effective_range()
        .hull(&prior.effective_range())
        .intersect(&prior.support())
        .ok_or_else(|| Error::usage("posterior and prior supports do not overlap"))
}

#[derive(Clone, Copy)]
enum Functional {
    A,
    B,
}

fn log_integrand(which: Functional, q: &DensitySpec, p: &DensitySpec, prior: &DensitySpec, x: f64) -> Result<f64> {
    let lp = p.ln_pdf(x);
    if lp == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let lpi = prior.ln_pdf(x);
    let lq = q.ln_pdf(x);
    if lp.is_nan() || lpi.is_nan() || lq.is_nan() || lp == f64::INFINITY {
        return Err(Error::NonFiniteIntegrand { theta: x });
    }
    match which {
        Functional::A => {
            if lpi == f64::NEG_INFINITY {
                return Err(Error::NonFiniteIntegrand { theta: x });
            }
            Ok(lq + lp - lpi)
        }
        Functional::B => {
            if lq == f64::NEG_INFINITY {
                if lp + lpi < LN_UNDERFLOW {
                    return Ok(f64::NEG_INFINITY);
                }
                return Err(Error::Divergent(format!(
                    "proposal vanishes at theta = {x} where the posterior does not (B = +inf)"
                )));
            }
            Ok(lpi + lp - lq)
        }
    }
}

fn breaks_for(q: &DensitySpec, p: &DensitySpec, prior: &DensitySpec, domain: Interval) -> Vec<f64> {
    let mut breaks = vec![domain.lo, domain.hi];
    if let Some(core) = p.effective_range().intersect(&domain) {
        breaks.extend(uniform_breaks(core.lo, core.hi, 32));
    }
    for d in [p, q, prior] {
        breaks.extend(d.landmarks().into_iter().filter(|x| domain.contains(*x)));
    }
    breaks
}

fn integrate_functional(
    which: Functional,
    q: &DensitySpec,
    p: &DensitySpec,
    prior: &DensitySpec,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let result = integrate_with_breaks(
        |x| match log_integrand(which, q, p, prior, x) {
            Ok(l) => {
                let v = l.exp();
                if v.is_finite() {
                    v
                } else {
                    failure.borrow_mut().get_or_insert(Error::Divergent(format!("integrand overflows at theta = {x}")));
                    f64::NAN
                }
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        breaks,
        opts,
    );
    match (result, failure.into_inner()) {
        (_, Some(e)) => Err(e),
        (r, None) => r,
    }
}

/// Doubling rounds tried before a functional is declared divergent.
const MAX_DOMAIN_EXTENSIONS: usize = 8;

fn evaluate_functional(which: Functional, q: &DensitySpec, p: &DensitySpec, prior: &DensitySpec, domain: Interval) -> Result<QuadResult> {
    for d in [q, p, prior] {
        if d.dim() != 1 {
            return Err(Error::Unsupported(
                "quadrature functionals are one-dimensional; use a diagonal Gaussian triple or mc_functionals".into(),
            ));
        }
    }
    let opts = QuadOptions::default();
    let breaks = breaks_for(q, p, prior, domain);
    let mut total = integrate_functional(which, q, p, prior, &breaks, opts)?;

    // push the domain outward until the tails are negligible; a convergent
    // integrand sheds shrinking tails, a divergent one does not
    let support = prior.support().intersect(&q.support()).unwrap_or(domain);
    let mut span = domain;
    let mut last_tail = f64::INFINITY;
    for _ in 0..MAX_DOMAIN_EXTENSIONS {
        let half = 0.5 * span.width();
        let lo = support.lo.max(span.lo - half);
        let hi = support.hi.min(span.hi + half);
        let mut tail = 0.0;
        for ext in [Interval::new(lo, span.lo), Interval::new(span.hi, hi)].into_iter().flatten() {
            let r = integrate_functional(which, q, p, prior, &[ext.lo, ext.hi], opts)?;
            tail += r.value.abs();
            total.value += r.value;
            total.abs_error += r.abs_error;
        }
        if tail <= 1e-10 * total.value.abs() {
            return Ok(total);
        }
        if tail >= last_tail {
            break;
        }
        last_tail = tail;
        span = Interval { lo, hi };
    }
    let name = match which {
        Functional::A => "A",
        Functional::B => "B",
    };
    Err(Error::Divergent(format!(
        "{name} keeps growing under domain extension ({last_tail} beyond {span})"
    )))
}

/// `A[q] = ∫ (q/π) p dθ` by adaptive quadrature.
pub fn functional_a(q: &DensitySpec, p: &DensitySpec, prior: &DensitySpec) -> Result<f64> {
    let domain = functional_domain(p, prior)?;
    Ok(evaluate_functional(Functional::A, q, p, prior, domain)?.value)
}

/// `B[q] = ∫ (π/q) p dθ` by adaptive quadrature.
pub fn functional_b(q: &DensitySpec, p: &DensitySpec, prior: &DensitySpec) -> Result<f64> {
    let domain = functional_domain(p, prior)?;
    Ok(evaluate_functional(Functional::B, q, p, prior, domain)?.value)
}

pub fn sampling_efficiency(q: &DensitySpec, p: &DensitySpec, prior: &DensitySpec) -> Result<EfficiencyReport> {
    let domain = functional_domain(p, prior)?;
    sampling_efficiency_on(q, p, prior, domain)
}

/// As [`sampling_efficiency`] over an explicit integration domain.
pub fn sampling_efficiency_on(q: &DensitySpec, p: &DensitySpec, prior: &DensitySpec, domain: Interval) -> Result<EfficiencyReport> {
    if let (
        DensitySpec::DiagonalGaussian { means: qm, stds: qs },
        DensitySpec::DiagonalGaussian { means: pm, stds: ps },
        DensitySpec::DiagonalGaussian { means: rm, stds: rs },
    ) = (q, p, prior)
    {
        if qm.len() > 1 || pm.len() > 1 || rm.len() > 1 {
            if qm.len() != pm.len() || pm.len() != rm.len() {
                return Err(Error::DimensionMismatch {
                    expected: pm.len(),
                    got: qm.len().max(rm.len()),
                });
            }
            return product_form_efficiency(qm, qs, pm, ps, rm, rs);
        }
    }
    let a = evaluate_functional(Functional::A, q, p, prior, domain)?;
    let b = evaluate_functional(Functional::B, q, p, prior, domain)?;
    EfficiencyReport::new(a.value, b.value, Method::Quadrature, a.abs_error, b.abs_error)
}

fn product_form_efficiency(qm: &[f64], qs: &[f64], pm: &[f64], ps: &[f64], rm: &[f64], rs: &[f64]) -> Result<EfficiencyReport> {
    let mut a = 1.0;
    let mut b = 1.0;
    for i in 0..pm.len() {
        let (vq, vp, vr) = (qs[i] * qs[i], ps[i] * ps[i], rs[i] * rs[i]);
        a *= gaussian_ratio_integral(qm[i], vq, pm[i], vp, rm[i], vr)?;
        b *= gaussian_ratio_integral(rm[i], vr, pm[i], vp, qm[i], vq)?;
    }
    EfficiencyReport::new(a, b, Method::Analytic, 0.0, 0.0)
}

/// `∫ N(x; m1, v1) N(x; m2, v2) / N(x; m3, v3) dx` in closed form (variances, not stds).
pub fn gaussian_ratio_integral(m1: f64, v1: f64, m2: f64, v2: f64, m3: f64, v3: f64) -> Result<f64> {
    let precision = 1.0 / v1 + 1.0 / v2 - 1.0 / v3;
    if precision <= 0.0 {
        return Err(Error::Divergent(format!(
            "Gaussian ratio integral diverges (net precision {precision} <= 0)"
        )));
    }
    let h = m1 / v1 + m2 / v2 - m3 / v3;
    let c = m1 * m1 / v1 + m2 * m2 / v2 - m3 * m3 / v3 - h * h / precision;
    Ok((v3 / (v1 * v2 * precision)).sqrt() * (-0.5 * c).exp())
}

/// Self-normalized particle estimates of `A = E_p[q/π]` and `B = E_p[π/q]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McFunctionals {
    pub a_hat: f64,
    pub b_hat: f64,
    pub a_std_error: f64,
    pub b_std_error: f64,
}

impl McFunctionals {
    pub fn report(&self) -> Result<EfficiencyReport> {
        EfficiencyReport::new(self.a_hat, self.b_hat, Method::MonteCarlo, self.a_std_error, self.b_std_error)
    }
}

/// Monte Carlo functionals from weighted posterior particles, with
/// delete-one jackknife standard errors.
pub fn mc_functionals(q: &DensitySpec, thetas: &[Vec<f64>], weights: &[f64], prior: &DensitySpec) -> Result<McFunctionals> {
    if thetas.len() != weights.len() || thetas.is_empty() {
        return Err(Error::usage("need one weight per particle and at least one particle"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::usage("weights must be finite and nonnegative"));
    }
    let mut log_ratio = Vec::with_capacity(thetas.len());
    for t in thetas {
        let lq = q.log_pdf(t)?;
        let lpi = prior.log_pdf(t)?;
        if !lpi.is_finite() || !lq.is_finite() {
            return Err(Error::InadmissibleProposal { theta: t.clone() });
        }
        log_ratio.push(lq - lpi);
    }
    let a_vals: Vec<f64> = log_ratio.iter().map(|l| l.exp()).collect();
    let b_vals: Vec<f64> = log_ratio.iter().map(|l| (-l).exp()).collect();
    let (a_hat, a_std_error) = jackknife_weighted_mean(&a_vals, weights)?;
    let (b_hat, b_std_error) = jackknife_weighted_mean(&b_vals, weights)?;
    Ok(McFunctionals {
        a_hat,
        b_hat,
        a_std_error,
        b_std_error,
    })
}

fn jackknife_weighted_mean(values: &[f64], weights: &[f64]) -> Result<(f64, f64)> {
    let sw: f64 = weights.iter().sum();
    if sw <= 0.0 {
        return Err(Error::usage("all weights are zero"));
    }
    let swv: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let mean = swv / sw;
    let n = values.iter().zip(weights).filter(|(_, w)| **w > 0.0).count();
    if n < 2 {
        return Ok((mean, 0.0));
    }
    let loo: Vec<f64> = values
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| {
            let rest = sw - w;
            if rest > 0.0 {
                (swv - v * w) / rest
            } else {
                mean
            }
        })
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / n as f64;
    let var = (n as f64 - 1.0) / n as f64 * loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>();
    Ok((mean, var.sqrt()))
}

/// Kish effective sample size `(Σw)² / Σw²`.
pub fn kish_ess(weights: &[f64]) -> Result<f64> {
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::usage("weights must be finite and nonnegative"));
    }
    // scale by the largest weight so the squares cannot overflow
    let max = weights.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::usage("kish_ess needs at least one positive weight"));
    }
    let (s, s2) = weights.iter().fold((0.0, 0.0), |(s, s2), w| {
        let x = w / max;
        (s + x, s2 + x * x)
    });
    Ok(s * s / s2)
}

/// Isotropic Gaussian toy: posterior `N(0, 1)` and prior `N(mu_pi, sigma_pi²)`
/// in every one of `n_theta` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianToyParams {
    pub n_theta: u32,
    pub mu_pi: f64,
    pub sigma_pi: f64,
}

impl GaussianToyParams {
    pub fn new(n_theta: u32, mu_pi: f64, sigma_pi: f64) -> Result<Self> {
        if n_theta == 0 || !(sigma_pi > 0.0 && sigma_pi.is_finite()) || !mu_pi.is_finite() {
            return Err(Error::usage(format!(
                "invalid toy parameters n_theta={n_theta}, mu_pi={mu_pi}, sigma_pi={sigma_pi}"
            )));
        }
        Ok(Self { n_theta, mu_pi, sigma_pi })
    }

    pub fn posterior_1d(&self) -> DensitySpec {
        DensitySpec::Gaussian { mean: 0.0, std: 1.0 }
    }

    pub fn prior_1d(&self) -> DensitySpec {
        DensitySpec::Gaussian {
            mean: self.mu_pi,
            std: self.sigma_pi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticScheme {
    Prior,
    Posterior,
    BeaumontKde,
    GeometricMean,
}

impl AnalyticScheme {
    /// One-dimensional proposal `(mean, variance)` for this scheme.
    fn proposal_moments(self, params: &GaussianToyParams) -> (f64, f64) {
        let vp = params.sigma_pi * params.sigma_pi;
        match self {
            Self::Prior => (params.mu_pi, vp),
            Self::Posterior => (0.0, 1.0),
            // kernel variance twice the posterior variance
            Self::BeaumontKde => (0.0, 3.0),
            Self::GeometricMean => {
                let precision = 0.5 * (1.0 + 1.0 / vp);
                let mean = 0.5 * (params.mu_pi / vp) / precision;
                (mean, 1.0 / precision)
            }
        }
    }

    /// The scheme's proposal in one dimension, as a density.
    pub fn proposal_1d(self, params: &GaussianToyParams) -> DensitySpec {
        let (m, v) = self.proposal_moments(params);
        DensitySpec::Gaussian { mean: m, std: v.sqrt() }
    }
}

/// Closed-form `A`, `B` and `ω` for the isotropic Gaussian toy; each
/// factorizes over dimensions, so the `n`-dimensional values are the 1-D
/// values raised to the `n`-th power.
pub fn analytic_gaussian_efficiency(params: &GaussianToyParams, scheme: AnalyticScheme) -> Result<EfficiencyReport> {
    let (mq, vq) = scheme.proposal_moments(params);
    let vpi = params.sigma_pi * params.sigma_pi;
    let mpi = params.mu_pi;
    let a1 = gaussian_ratio_integral(mq, vq, 0.0, 1.0, mpi, vpi)
        .map_err(|_| Error::Divergent(format!("A diverges for scheme {scheme:?} at sigma_pi = {}", params.sigma_pi)))?;
    let b1 = gaussian_ratio_integral(mpi, vpi, 0.0, 1.0, mq, vq)
        .map_err(|_| Error::Divergent(format!("B diverges for scheme {scheme:?} at sigma_pi = {}", params.sigma_pi)))?;
    let n = params.n_theta as i32;
    EfficiencyReport::new(a1.powi(n), b1.powi(n), Method::Analytic, 0.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceRow {
    pub mu_pi: f64,
    pub sigma_pi: f64,
    pub n_theta: u32,
    /// NaN when the grid point is inadmissible.
    pub a: f64,
    pub admissible: bool,
}

impl SurfaceRow {
    pub fn below_one(&self) -> bool {
        self.admissible && self.a < 1.0
    }
}

/// Improvement factor `ω[numerator] / ω[denominator]` at every grid point.
/// Rows keep the grid order whatever the number of worker threads.
pub fn improvement_surface(grid: &[GaussianToyParams], numerator: AnalyticScheme, denominator: AnalyticScheme) -> Vec<SurfaceRow> {
    grid.par_iter()
        .map(|params| {
            let ratio = analytic_gaussian_efficiency(params, numerator)
                .and_then(|n| analytic_gaussian_efficiency(params, denominator).map(|d| n.omega / d.omega));
            let (a, admissible) = match ratio {
                Ok(a) if a.is_finite() => (a, true),
                _ => (f64::NAN, false),
            };
            SurfaceRow {
                mu_pi: params.mu_pi,
                sigma_pi: params.sigma_pi,
                n_theta: params.n_theta,
                a,
                admissible,
            }
        })
        .collect()
}

/// Rectangular `(mu_pi, sigma_pi)` grid with `n` nodes per axis, inclusive.
pub fn surface_grid(n_theta: u32, mu: (f64, f64), sigma: (f64, f64), n_mu: usize, n_sigma: usize) -> Result<Vec<GaussianToyParams>> {
    if n_mu < 2 || n_sigma < 2 {
        return Err(Error::usage("surface grid needs at least two nodes per axis"));
    }
    let mut grid = Vec::with_capacity(n_mu * n_sigma);
    for i in 0..n_mu {
        let m = mu.0 + (mu.1 - mu.0) * i as f64 / (n_mu - 1) as f64;
        for j in 0..n_sigma {
            let s = sigma.0 + (sigma.1 - sigma.0) * j as f64 / (n_sigma - 1) as f64;
            grid.push(GaussianToyParams::new(n_theta, m, s)?);
        }
    }
    Ok(grid)
}

pub const SURFACE_CSV_HEADER: &str = "mu_pi,sigma_pi,n_theta,a,admissible";

/// Writes `mu_pi,sigma_pi,n_theta,a,admissible` (plus `a_below_one` when
/// `flag_column` is set).
pub fn write_surface_csv<W: Write>(rows: &[SurfaceRow], mut out: W, flag_column: bool) -> std::io::Result<()> {
    if flag_column {
        writeln!(out, "{SURFACE_CSV_HEADER},a_below_one")?;
    } else {
        writeln!(out, "{SURFACE_CSV_HEADER}")?;
    }
    for r in rows {
        write!(out, "{},{},{},{},{}", r.mu_pi, r.sigma_pi, r.n_theta, r.a, r.admissible)?;
        if flag_column {
            write!(out, ",{}", r.below_one())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

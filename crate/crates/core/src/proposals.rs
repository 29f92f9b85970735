//! Proposal constructions.
//!
//! The optimal proposal satisfies
//!
//! ```text
//! q*(θ) ∝ sqrt( p(θ) π(θ) / (2 A* - p(θ)/π(θ)) ),    A* = A[q*]
//! ```
//!
//! with `½ sup p/π < A* ≤ sup p/π`. The overall scale (which carries `ω*`)
//! is fixed by normalization, so the family is indexed by `A*` alone.

use serde::Serialize;

use crate::density::{convolve_gaussian, normalize_with_hints, sup_ratio, DensitySpec, Interval, SupRatioResult};
use crate::efficiency::{functional_domain, sampling_efficiency_on, EfficiencyReport};
use crate::error::{Error, Result};
use crate::optimize::{golden_section_max, is_unimodal};
use crate::quadrature::uniform_breaks;

/// Relative exclusion margin above the lower Hölder bound `½ sup p/π`.
pub const LOWER_BOUND_MARGIN: f64 = 1e-3;

/// Nodes in the coarse `ω(A*)` scan that brackets the golden-section search.
const BRACKET_NODES: usize = 17;

/// Nodes in the fallback scan when the coarse profile is not unimodal.
const FALLBACK_NODES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Prior,
    Posterior,
    BeaumontKde,
    GeometricMean,
    Bounded,
    Optimal,
    Series,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Prior => "prior",
            Self::Posterior => "posterior",
            Self::BeaumontKde => "beaumont_kde",
            Self::GeometricMean => "geometric_mean",
            Self::Bounded => "bounded",
            Self::Optimal => "optimal",
            Self::Series => "series",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "prior" => Self::Prior,
            "posterior" => Self::Posterior,
            "beaumont_kde" | "kde" => Self::BeaumontKde,
            "geometric_mean" | "q0" => Self::GeometricMean,
            "bounded" | "q_bounded" => Self::Bounded,
            "optimal" | "q_optimal" => Self::Optimal,
            "series" => Self::Series,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProposalParams {
    pub a_bar: Option<f64>,
    pub a_star: Option<f64>,
    pub omega_star: Option<f64>,
    pub bandwidth_sq: Option<f64>,
    pub order: Option<u32>,
    pub sup_ratio: Option<f64>,
    /// The coarse `ω(A*)` profile was not unimodal and a dense scan was used.
    pub fallback_scan: bool,
    /// Iterations used by the fixed-point solver, when it produced this proposal.
    pub fixed_point_iterations: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Proposal {
    pub density: DensitySpec,
    pub scheme: Scheme,
    pub params: ProposalParams,
}

impl Proposal {
    pub fn prior(prior: &DensitySpec) -> Self {
        Self {
            density: prior.clone(),
            scheme: Scheme::Prior,
            params: ProposalParams::default(),
        }
    }

    pub fn posterior(p: &DensitySpec) -> Self {
        Self {
            density: p.clone(),
            scheme: Scheme::Posterior,
            params: ProposalParams::default(),
        }
    }

    pub fn ln_pdf(&self, theta: f64) -> f64 {
        self.density.ln_pdf(theta)
    }
}

fn hints(p: &DensitySpec, prior: &DensitySpec, domain: Interval, extra: &[f64]) -> Vec<f64> {
    let mut h: Vec<f64> = p.landmarks().into_iter().chain(prior.landmarks()).chain(extra.iter().copied()).collect();
    if let Some(core) = p.effective_range().intersect(&domain) {
        h.extend(uniform_breaks(core.lo, core.hi, 16));
    }
    h.retain(|x| domain.contains(*x));
    h
}

/// `q0 ∝ sqrt(p π)`.
pub fn geometric_mean_proposal(p: &DensitySpec, prior: &DensitySpec) -> Result<Proposal> {
    let params = ProposalParams::default();
    let analytic = match (p, prior) {
        (DensitySpec::Gaussian { mean: m1, std: s1 }, DensitySpec::Gaussian { mean: m2, std: s2 }) => {
            let (t1, t2) = (1.0 / (s1 * s1), 1.0 / (s2 * s2));
            let precision = 0.5 * (t1 + t2);
            let mean = 0.5 * (t1 * m1 + t2 * m2) / precision;
            Some(DensitySpec::gaussian(mean, precision.recip().sqrt())?)
        }
        (DensitySpec::DiagonalGaussian { means: m1, stds: s1 }, DensitySpec::DiagonalGaussian { means: m2, stds: s2 })
            if m1.len() == m2.len() =>
        {
            let mut means = Vec::with_capacity(m1.len());
            let mut stds = Vec::with_capacity(m1.len());
            for i in 0..m1.len() {
                let (t1, t2) = (1.0 / (s1[i] * s1[i]), 1.0 / (s2[i] * s2[i]));
                let precision = 0.5 * (t1 + t2);
                means.push(0.5 * (t1 * m1[i] + t2 * m2[i]) / precision);
                stds.push(precision.recip().sqrt());
            }
            Some(DensitySpec::diagonal_gaussian(means, stds)?)
        }
        _ => None,
    };
    let density = match analytic {
        Some(d) => d,
        None => {
            check_one_dimensional(p, prior)?;
            let domain = functional_domain(p, prior)?;
            let (p2, pi2) = (p.clone(), prior.clone());
            normalize_with_hints(move |x| 0.5 * (p2.ln_pdf(x) + pi2.ln_pdf(x)), domain, &hints(p, prior, domain, &[]))?
        }
    };
    Ok(Proposal {
        density,
        scheme: Scheme::GeometricMean,
        params,
    })
}

fn check_one_dimensional(p: &DensitySpec, prior: &DensitySpec) -> Result<()> {
    if p.dim() != 1 || prior.dim() != 1 {
        return Err(Error::Unsupported(
            "numeric proposal construction is one-dimensional".into(),
        ));
    }
    Ok(())
}

/// Normalized member `q(·; A) ∝ sqrt(p π / (2A - p/π))` of the optimal family.
pub fn optimal_family_density(p: &DensitySpec, prior: &DensitySpec, a: f64, sup: &SupRatioResult) -> Result<DensitySpec> {
    check_one_dimensional(p, prior)?;
    if !(a > 0.5 * sup.sup_value) {
        return Err(Error::InadmissibleParameter(format!(
            "A = {a} must exceed the lower Hölder bound ½·sup p/π = {}",
            0.5 * sup.sup_value
        )));
    }
    let domain = functional_domain(p, prior)?;
    let (p2, pi2) = (p.clone(), prior.clone());
    let two_a = 2.0 * a;
    normalize_with_hints(
        move |x| {
            let lp = p2.ln_pdf(x);
            let lpi = pi2.ln_pdf(x);
            if lp == f64::NEG_INFINITY || lpi == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            let gap = (two_a - (lp - lpi).exp()).max(f64::MIN_POSITIVE);
            0.5 * (lp + lpi - gap.ln())
        },
        domain,
        &hints(p, prior, domain, &sup.theta_star),
    )
}

fn ratio_sup(p: &DensitySpec, prior: &DensitySpec) -> Result<SupRatioResult> {
    check_one_dimensional(p, prior)?;
    sup_ratio(p, prior, functional_domain(p, prior)?)
}

/// Bounded approximation with `Ā` defaulting to `¾ sup p/π`.
pub fn bounded_proposal(p: &DensitySpec, prior: &DensitySpec, a_bar: Option<f64>) -> Result<Proposal> {
    let sup = ratio_sup(p, prior)?;
    let a_bar = a_bar.unwrap_or(0.75 * sup.sup_value);
    if !(a_bar > 0.5 * sup.sup_value) {
        return Err(Error::InadmissibleParameter(format!(
            "Ā = {a_bar} violates the Hölder lower bound: it must exceed ½·sup p/π = {}",
            0.5 * sup.sup_value
        )));
    }
    let density = optimal_family_density(p, prior, a_bar, &sup)?;
    Ok(Proposal {
        density,
        scheme: Scheme::Bounded,
        params: ProposalParams {
            a_bar: Some(a_bar),
            sup_ratio: Some(sup.sup_value),
            ..Default::default()
        },
    })
}

fn score(p: &DensitySpec, prior: &DensitySpec, domain: Interval, sup: &SupRatioResult, a: f64) -> Result<(DensitySpec, EfficiencyReport)> {
    let q = optimal_family_density(p, prior, a, sup)?;
    let report = sampling_efficiency_on(&q, p, prior, domain)?;
    Ok((q, report))
}

/// Optimal proposal by golden-section maximization of `ω` over
/// `A* ∈ (½ sup (1 + δ), sup]`, to relative tolerance `tol` in `A*`.
pub fn optimal_proposal(p: &DensitySpec, prior: &DensitySpec, tol: f64) -> Result<Proposal> {
    if !(tol > 0.0) {
        return Err(Error::usage("optimal_proposal tolerance must be positive"));
    }
    let sup = ratio_sup(p, prior)?;
    let domain = functional_domain(p, prior)?;
    let lo = 0.5 * sup.sup_value * (1.0 + LOWER_BOUND_MARGIN);
    let hi = sup.sup_value;

    let omega_at = |a: f64| -> Result<f64> {
        match score(p, prior, domain, &sup, a) {
            Ok((_, r)) => Ok(r.omega),
            Err(Error::Divergent(_)) | Err(Error::QuadratureNotConverged { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    };

    let coarse = uniform_breaks(lo, hi, BRACKET_NODES - 1);
    let coarse_values = coarse.iter().map(|&a| omega_at(a)).collect::<Result<Vec<_>>>()?;
    let (nodes, values, fallback) = if is_unimodal(&coarse_values) {
        (coarse, coarse_values, false)
    } else {
        let dense = uniform_breaks(lo, hi, FALLBACK_NODES - 1);
        let vals = dense.iter().map(|&a| omega_at(a)).collect::<Result<Vec<_>>>()?;
        (dense, vals, true)
    };
    let best = values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > values[best] { i } else { best });
    if values[best] == f64::NEG_INFINITY {
        return Err(Error::Divergent("no admissible A* in the Hölder interval".into()));
    }
    let bracket_lo = nodes[best.saturating_sub(1)];
    let bracket_hi = nodes[(best + 1).min(nodes.len() - 1)];
    let refined = golden_section_max(omega_at, bracket_lo, bracket_hi, tol)?;
    let a_star = if refined.value >= values[best] { refined.x } else { nodes[best] };

    let (density, report) = score(p, prior, domain, &sup, a_star)?;
    Ok(Proposal {
        density,
        scheme: Scheme::Optimal,
        params: ProposalParams {
            a_star: Some(a_star),
            omega_star: Some(report.omega),
            sup_ratio: Some(sup.sup_value),
            fallback_scan: fallback,
            ..Default::default()
        },
    })
}

/// Fixed-point cross-check: starting from `Ā = ¾ sup`, iterate
/// `A_{k+1} = A[q(·; A_k)]` until successive values differ by less than 1e-8.
pub fn optimal_proposal_fixed_point(p: &DensitySpec, prior: &DensitySpec, max_iterations: usize) -> Result<Proposal> {
    let sup = ratio_sup(p, prior)?;
    let domain = functional_domain(p, prior)?;
    let floor = 0.5 * sup.sup_value * (1.0 + LOWER_BOUND_MARGIN);
    let mut a = 0.75 * sup.sup_value;
    for k in 1..=max_iterations {
        let (_, report) = score(p, prior, domain, &sup, a)?;
        let next = report.a.clamp(floor, sup.sup_value);
        if (next - a).abs() < 1e-8 {
            let (density, report) = score(p, prior, domain, &sup, next)?;
            return Ok(Proposal {
                density,
                scheme: Scheme::Optimal,
                params: ProposalParams {
                    a_star: Some(next),
                    omega_star: Some(report.omega),
                    sup_ratio: Some(sup.sup_value),
                    fixed_point_iterations: Some(k),
                    ..Default::default()
                },
            });
        }
        a = next;
    }
    Err(Error::InadmissibleParameter(format!(
        "fixed-point iteration for A* did not settle within {max_iterations} iterations"
    )))
}

/// Normalized truncation of the series expansion of `q*` at `order`:
/// `sqrt(p π) Σ_{i ≤ order} C(i - ½, i) (p / (2 A* π))^i`.
pub fn series_proposal(p: &DensitySpec, prior: &DensitySpec, order: u32, a_star: f64) -> Result<Proposal> {
    let sup = ratio_sup(p, prior)?;
    if !(a_star > 0.5 * sup.sup_value) {
        return Err(Error::Divergent(format!(
            "series diverges: A* = {a_star} is not above ½·sup p/π = {}",
            0.5 * sup.sup_value
        )));
    }
    let domain = functional_domain(p, prior)?;
    let coefficients = series_coefficients(order);
    let (p2, pi2) = (p.clone(), prior.clone());
    let inv_two_a = 1.0 / (2.0 * a_star);
    let density = normalize_with_hints(
        move |x| {
            let lp = p2.ln_pdf(x);
            let lpi = pi2.ln_pdf(x);
            let base = 0.5 * (lp + lpi);
            if base == f64::NEG_INFINITY {
                return base;
            }
            let z = (lp - lpi).exp() * inv_two_a;
            // Horner evaluation of the truncated binomial series
            let sum = coefficients.iter().rev().fold(0.0, |acc, c| acc * z + c);
            base + sum.ln()
        },
        domain,
        &hints(p, prior, domain, &sup.theta_star),
    )?;
    Ok(Proposal {
        density,
        scheme: Scheme::Series,
        params: ProposalParams {
            a_star: Some(a_star),
            order: Some(order),
            sup_ratio: Some(sup.sup_value),
            ..Default::default()
        },
    })
}

/// `C(i - ½, i)` for `i = 0..=order`.
pub fn series_coefficients(order: u32) -> Vec<f64> {
    let mut c = Vec::with_capacity(order as usize + 1);
    c.push(1.0);
    for i in 1..=order as usize {
        let prev = c[i - 1];
        c.push(prev * (i as f64 - 0.5) / i as f64);
    }
    c
}

/// Gaussian-kernel KDE proposal: the posterior convolved with a Gaussian of
/// variance `variance_factor · Var[p]`, optionally truncated and renormalized
/// to `truncate_to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct KdeSettings {
    pub variance_factor: f64,
    pub truncate_to: Option<Interval>,
}

impl Default for KdeSettings {
    fn default() -> Self {
        Self {
            variance_factor: 2.0,
            truncate_to: None,
        }
    }
}

/// KDE baseline with kernel variance twice the posterior variance.
pub fn beaumont_kde_proposal(p: &DensitySpec) -> Result<Proposal> {
    kde_proposal(p, KdeSettings::default())
}

pub fn kde_proposal(p: &DensitySpec, settings: KdeSettings) -> Result<Proposal> {
    if !(settings.variance_factor > 0.0) {
        return Err(Error::usage("KDE variance factor must be positive"));
    }
    let bandwidth_sq = settings.variance_factor * p.variance()?;
    if !bandwidth_sq.is_finite() {
        return Err(Error::usage("posterior variance is not finite"));
    }
    let mut density = convolve_gaussian(p, bandwidth_sq)?;
    if let Some(interval) = settings.truncate_to {
        density = density.restrict_to(interval)?;
    }
    Ok(Proposal {
        density,
        scheme: Scheme::BeaumontKde,
        params: ProposalParams {
            bandwidth_sq: Some(bandwidth_sq),
            ..Default::default()
        },
    })
}

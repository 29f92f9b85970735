//! Probability densities: analytic families, black-box numeric densities,
//! normalization, Gaussian convolution and the posterior/prior ratio supremum.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{ChiSquared as ChiSquaredDist, Distribution, Normal, Uniform as UniformDist};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared as StatrsChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::optimize::golden_section_max;
use crate::quadrature::{integrate_with_breaks, uniform_breaks, QuadOptions};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Number of standard deviations kept when truncating infinite supports.
pub const TRUNCATION_SIGMAS: f64 = 12.0;

/// Upper-tail mass discarded when truncating a chi-squared support.
const CHI2_TAIL_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::usage(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub const fn unbounded() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

/// Pointwise log density, up to an additive constant.
pub type LogDensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A one-dimensional density known only through a pointwise evaluator.
///
/// `log_pdf(θ) = evaluator(θ) - log_normalizer` inside `domain`, `-inf` outside.
#[derive(Clone)]
pub struct NumericDensity {
    domain: Interval,
    evaluator: LogDensityFn,
    log_normalizer: f64,
    hints: Arc<[f64]>,
}

impl NumericDensity {
    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// Natural log of the integral of `exp(evaluator)` over the domain.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn evaluator(&self) -> &LogDensityFn {
        &self.evaluator
    }

    fn ln_pdf(&self, theta: f64) -> f64 {
        if !self.domain.contains(theta) {
            return f64::NEG_INFINITY;
        }
        (self.evaluator)(theta) - self.log_normalizer
    }
}

impl fmt::Debug for NumericDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NumericDensity")
            .field("domain", &self.domain)
            .field("log_normalizer", &self.log_normalizer)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum DensitySpec {
    Gaussian { mean: f64, std: f64 },
    GaussianMixture { components: Vec<MixtureComponent> },
    ChiSquared { dof: u32 },
    Uniform { lo: f64, hi: f64 },
    DiagonalGaussian { means: Vec<f64>, stds: Vec<f64> },
    Numeric(NumericDensity),
}

fn check_std(std: f64) -> Result<()> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::usage(format!("standard deviation must be positive and finite, got {std}")));
    }
    Ok(())
}

#[inline]
fn gaussian_ln_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - LN_SQRT_2PI
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn mixture_ln_pdf(components: &[MixtureComponent], x: f64) -> f64 {
    // shift by the nearest component's exponent so the sum cannot underflow
    let shift = components
        .iter()
        .filter(|c| c.weight > 0.0)
        .map(|c| {
            let z = (x - c.mean) / c.std;
            0.5 * z * z
        })
        .fold(f64::INFINITY, f64::min);
    let sum: f64 = components
        .iter()
        .map(|c| {
            let z = (x - c.mean) / c.std;
            c.weight / c.std * (shift - 0.5 * z * z).exp()
        })
        .sum();
    if sum > 0.0 && sum.is_finite() {
        return sum.ln() - shift - LN_SQRT_2PI;
    }
    log_sum_exp(components.iter().filter(|c| c.weight > 0.0).map(|c| c.weight.ln() + gaussian_ln_pdf(x, c.mean, c.std)))
}

impl DensitySpec {
    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        check_std(std)?;
        if !mean.is_finite() {
            return Err(Error::usage("gaussian mean must be finite"));
        }
        Ok(Self::Gaussian { mean, std })
    }

    /// Mixture from `(weight, mean, std)` triples; weights must sum to 1 within 1e-12.
    pub fn mixture(components: &[(f64, f64, f64)]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::usage("mixture needs at least one component"));
        }
        let mut out = Vec::with_capacity(components.len());
        for &(weight, mean, std) in components {
            check_std(std)?;
            if !(weight >= 0.0) || !mean.is_finite() {
                return Err(Error::usage(format!("invalid mixture component ({weight}, {mean}, {std})")));
            }
            out.push(MixtureComponent { weight, mean, std });
        }
        let total: f64 = out.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::usage(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self::GaussianMixture { components: out })
    }

    /// Mixture whose weights are rescaled to sum to one.
    pub fn mixture_normalized(mut components: Vec<MixtureComponent>) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if !(total > 0.0 && total.is_finite()) || components.iter().any(|c| !(c.weight >= 0.0)) {
            return Err(Error::usage("mixture weights must be nonnegative with a positive finite sum"));
        }
        for c in components.iter_mut() {
            check_std(c.std)?;
            if !c.mean.is_finite() {
                return Err(Error::usage("mixture means must be finite"));
            }
            c.weight /= total;
        }
        Ok(Self::GaussianMixture { components })
    }

    pub fn chi_squared(dof: u32) -> Result<Self> {
        if dof == 0 {
            return Err(Error::usage("chi-squared degrees of freedom must be positive"));
        }
        Ok(Self::ChiSquared { dof })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Interval::new(lo, hi)?;
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::usage("uniform bounds must be finite"));
        }
        Ok(Self::Uniform { lo, hi })
    }

    pub fn diagonal_gaussian(means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        if means.is_empty() || means.len() != stds.len() {
            return Err(Error::usage("diagonal gaussian needs equal-length, nonempty means and stds"));
        }
        for &s in &stds {
            check_std(s)?;
        }
        Ok(Self::DiagonalGaussian { means, stds })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::DiagonalGaussian { means, .. } => means.len(),
            _ => 1,
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, Self::Numeric(_))
    }

    pub fn as_numeric(&self) -> Option<&NumericDensity> {
        match self {
            Self::Numeric(n) => Some(n),
            _ => None,
        }
    }

    pub fn log_pdf(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        Ok(match self {
            Self::DiagonalGaussian { means, stds } => theta
                .iter()
                .zip(means.iter().zip(stds))
                .map(|(&x, (&m, &s))| gaussian_ln_pdf(x, m, s))
                .sum(),
            _ => self.ln_pdf(theta[0]),
        })
    }

    /// Log density of a one-dimensional spec. Multi-dimensional specs of
    /// dimension > 1 return NaN; use [`DensitySpec::log_pdf`] for those.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian { mean, std } => gaussian_ln_pdf(x, *mean, *std),
            Self::GaussianMixture { components } => {
                mixture_ln_pdf(components, x)
            }
            Self::ChiSquared { dof } => chi2_ln_pdf(x, *dof),
            Self::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::DiagonalGaussian { means, stds } => {
                if means.len() == 1 {
                    gaussian_ln_pdf(x, means[0], stds[0])
                } else {
                    f64::NAN
                }
            }
            Self::Numeric(n) => n.ln_pdf(x),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Set on which the density can be nonzero.
    pub fn support(&self) -> Interval {
        match self {
            Self::ChiSquared { .. } => Interval {
                lo: 0.0,
                hi: f64::INFINITY,
            },
            Self::Uniform { lo, hi } => Interval { lo: *lo, hi: *hi },
            Self::Numeric(n) => n.domain,
            _ => Interval::unbounded(),
        }
    }

    /// Finite interval carrying all but a negligible fraction of the mass:
    /// mean ± 12 std (per component), or the 1 - 1e-12 chi-squared quantile.
    pub fn effective_range(&self) -> Interval {
        match self {
            Self::Gaussian { mean, std } => Interval {
                lo: mean - TRUNCATION_SIGMAS * std,
                hi: mean + TRUNCATION_SIGMAS * std,
            },
            Self::GaussianMixture { components } => components
                .iter()
                .map(|c| Interval {
                    lo: c.mean - TRUNCATION_SIGMAS * c.std,
                    hi: c.mean + TRUNCATION_SIGMAS * c.std,
                })
                .reduce(|a, b| a.hull(&b))
                .expect("nonempty mixture"),
            Self::ChiSquared { dof } => Interval {
                lo: 0.0,
                hi: chi2_upper_quantile(*dof, CHI2_TAIL_MASS),
            },
            Self::Uniform { lo, hi } => Interval { lo: *lo, hi: *hi },
            Self::DiagonalGaussian { means, stds } => Interval {
                lo: means[0] - TRUNCATION_SIGMAS * stds[0],
                hi: means[0] + TRUNCATION_SIGMAS * stds[0],
            },
            Self::Numeric(n) => n.domain,
        }
    }

    /// Characteristic points (modes, shoulders, support edges) used to seed
    /// quadrature panels so narrow features are never stepped over.
    pub fn landmarks(&self) -> Vec<f64> {
        match self {
            Self::Gaussian { mean, std } => [-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0].iter().map(|k| mean + k * std).collect(),
            Self::GaussianMixture { components } => {
                if components.len() <= 16 {
                    components
                        .iter()
                        .flat_map(|c| [-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0].map(|k| c.mean + k * c.std))
                        .collect()
                } else {
                    // large kernel mixtures: resolve the bulk with panels no wider than the smallest kernel
                    let min_std = components.iter().map(|c| c.std).fold(f64::INFINITY, f64::min);
                    let lo = components.iter().map(|c| c.mean).fold(f64::INFINITY, f64::min) - 6.0 * min_std;
                    let hi = components.iter().map(|c| c.mean).fold(f64::NEG_INFINITY, f64::max) + 6.0 * min_std;
                    let n = (((hi - lo) / min_std).ceil() as usize).clamp(8, 512);
                    uniform_breaks(lo, hi, n)
                }
            }
            Self::ChiSquared { dof } => {
                let k = *dof as f64;
                let sd = (2.0 * k).sqrt();
                vec![0.0, (k - 2.0).max(0.0), k, k + sd, k + 3.0 * sd, k + 6.0 * sd]
            }
            Self::Uniform { lo, hi } => vec![*lo, *hi],
            Self::DiagonalGaussian { means, stds } => [-6.0, -3.0, 0.0, 3.0, 6.0].iter().map(|k| means[0] + k * stds[0]).collect(),
            Self::Numeric(n) => n.hints.to_vec(),
        }
    }

    pub fn mean(&self) -> Result<f64> {
        match self {
            Self::Gaussian { mean, .. } => Ok(*mean),
            Self::GaussianMixture { components } => Ok(components.iter().map(|c| c.weight * c.mean).sum()),
            Self::ChiSquared { dof } => Ok(*dof as f64),
            Self::Uniform { lo, hi } => Ok(0.5 * (lo + hi)),
            Self::DiagonalGaussian { means, .. } if means.len() == 1 => Ok(means[0]),
            Self::DiagonalGaussian { .. } => Err(Error::Unsupported("scalar mean of a multi-dimensional density".into())),
            Self::Numeric(_) => Ok(self.moments()?.0),
        }
    }

    pub fn variance(&self) -> Result<f64> {
        match self {
            Self::Gaussian { std, .. } => Ok(std * std),
            Self::GaussianMixture { components } => {
                let m = self.mean()?;
                Ok(components.iter().map(|c| c.weight * (c.std * c.std + (c.mean - m).powi(2))).sum())
            }
            Self::ChiSquared { dof } => Ok(2.0 * *dof as f64),
            Self::Uniform { lo, hi } => Ok((hi - lo).powi(2) / 12.0),
            Self::DiagonalGaussian { stds, .. } if stds.len() == 1 => Ok(stds[0] * stds[0]),
            Self::DiagonalGaussian { .. } => Err(Error::Unsupported("scalar variance of a multi-dimensional density".into())),
            Self::Numeric(_) => Ok(self.moments()?.1),
        }
    }

    /// Mean and variance by quadrature (tolerance 1e-8 on each moment).
    pub fn moments(&self) -> Result<(f64, f64)> {
        if self.dim() != 1 {
            return Err(Error::Unsupported("quadrature moments of a multi-dimensional density".into()));
        }
        let range = self.effective_range();
        let mut breaks = vec![range.lo, range.hi];
        breaks.extend(self.landmarks().into_iter().filter(|x| range.contains(*x)));
        let opts = QuadOptions::default().with_abs_tol(1e-10);
        let mass = integrate_with_breaks(|x| self.pdf(x), &breaks, opts)?.value;
        let m1 = integrate_with_breaks(|x| x * self.pdf(x), &breaks, opts)?.value / mass;
        let m2 = integrate_with_breaks(|x| (x - m1).powi(2) * self.pdf(x), &breaks, opts)?.value / mass;
        Ok((m1, m2))
    }

    /// Total mass over the effective range, by quadrature.
    pub fn total_mass(&self) -> Result<f64> {
        let range = self.effective_range();
        let mut breaks = vec![range.lo, range.hi];
        breaks.extend(self.landmarks().into_iter().filter(|x| range.contains(*x)));
        Ok(integrate_with_breaks(|x| self.pdf(x), &breaks, QuadOptions::default().with_abs_tol(1e-10))?.value)
    }

    /// Draw `n` i.i.d. samples. Numeric densities are not directly samplable;
    /// use [`crate::smc::mh_sample`] for those.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::usage("sample count must be at least 1"));
        }
        match self {
            Self::DiagonalGaussian { means, stds } => {
                let dists: Vec<Normal<f64>> = means
                    .iter()
                    .zip(stds)
                    .map(|(&m, &s)| Normal::new(m, s).expect("validated std"))
                    .collect();
                Ok((0..n).map(|_| dists.iter().map(|d| d.sample(rng)).collect()).collect())
            }
            _ => (0..n).map(|_| self.sample_scalar(rng).map(|x| vec![x])).collect(),
        }
    }

    /// One draw from a one-dimensional analytic density.
    pub fn sample_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match self {
            Self::Gaussian { mean, std } => Normal::new(*mean, *std).expect("validated std").sample(rng),
            Self::GaussianMixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = components.last().expect("nonempty mixture");
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        chosen = c;
                        break;
                    }
                }
                Normal::new(chosen.mean, chosen.std).expect("validated std").sample(rng)
            }
            Self::ChiSquared { dof } => ChiSquaredDist::new(*dof as f64).expect("positive dof").sample(rng),
            Self::Uniform { lo, hi } => UniformDist::new_inclusive(*lo, *hi).expect("lo < hi").sample(rng),
            Self::DiagonalGaussian { means, stds } if means.len() == 1 => {
                Normal::new(means[0], stds[0]).expect("validated std").sample(rng)
            }
            Self::DiagonalGaussian { .. } => {
                return Err(Error::Unsupported("scalar draw from a multi-dimensional density; use sample".into()))
            }
            Self::Numeric(_) => {
                return Err(Error::Unsupported(
                    "numeric densities cannot be sampled directly; use smc::mh_sample".into(),
                ))
            }
        })
    }

    /// Renormalized restriction of a one-dimensional density to `interval`.
    pub fn restrict_to(&self, interval: Interval) -> Result<DensitySpec> {
        let domain = self
            .support()
            .intersect(&interval)
            .ok_or_else(|| Error::usage(format!("restriction interval {interval} misses the support")))?;
        let this = self.clone();
        let hints: Vec<f64> = self.landmarks().into_iter().filter(|x| domain.contains(*x)).collect();
        normalize_with_hints(move |x| this.ln_pdf(x), domain, &hints)
    }
}

fn chi2_ln_pdf(x: f64, dof: u32) -> f64 {
    let k = dof as f64;
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    if x == 0.0 {
        return match dof {
            1 => f64::INFINITY,
            2 => -std::f64::consts::LN_2,
            _ => f64::NEG_INFINITY,
        };
    }
    (0.5 * k - 1.0) * x.ln() - 0.5 * x - 0.5 * k * std::f64::consts::LN_2 - ln_gamma(0.5 * k)
}

fn chi2_upper_quantile(dof: u32, tail: f64) -> f64 {
    let dist = StatrsChiSquared::new(dof as f64).expect("positive dof");
    let (mut lo, mut hi) = (0.0, dof as f64 + 10.0);
    while dist.sf(hi) > tail {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist.sf(mid) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * hi {
            break;
        }
    }
    hi
}

/// Normalize a pointwise log density over `domain`.
pub fn normalize<F>(evaluator: F, domain: Interval) -> Result<DensitySpec>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    normalize_with_hints(evaluator, domain, &[])
}

/// As [`normalize`], with extra points where the integrand has structure.
pub fn normalize_with_hints<F>(evaluator: F, domain: Interval, hints: &[f64]) -> Result<DensitySpec>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    if !domain.is_finite() {
        return Err(Error::Normalization(format!("domain {domain} must be finite")));
    }
    let mut breaks = uniform_breaks(domain.lo, domain.hi, 32);
    breaks.extend(hints.iter().copied().filter(|x| domain.contains(*x)));

    // shift by the largest probed value so exp() neither overflows nor underflows wholesale
    let probes = uniform_breaks(domain.lo, domain.hi, 2048);
    let shift = probes
        .iter()
        .chain(breaks.iter())
        .map(|&x| evaluator(x))
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Err(Error::Normalization(format!("log density is -inf or non-finite everywhere on {domain}")));
    }

    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_evals: 1_000_000,
    };
    let r = integrate_with_breaks(|x| (evaluator(x) - shift).exp(), &breaks, opts)
        .map_err(|e| Error::Normalization(e.to_string()))?;
    if !(r.value > 0.0 && r.value.is_finite()) {
        return Err(Error::Normalization(format!("integral is {} on {domain}", r.value)));
    }
    let mut hint_vec: Vec<f64> = hints.iter().copied().filter(|x| domain.contains(*x)).collect();
    hint_vec.extend([domain.lo, domain.hi]);
    Ok(DensitySpec::Numeric(NumericDensity {
        domain,
        evaluator: Arc::new(evaluator),
        log_normalizer: shift + r.value.ln(),
        hints: hint_vec.into(),
    }))
}

/// Convolve with a zero-mean Gaussian of variance `added_variance`.
pub fn convolve_gaussian(spec: &DensitySpec, added_variance: f64) -> Result<DensitySpec> {
    if !(added_variance > 0.0 && added_variance.is_finite()) {
        return Err(Error::usage(format!("added variance must be positive, got {added_variance}")));
    }
    match spec {
        DensitySpec::Gaussian { mean, std } => DensitySpec::gaussian(*mean, (std * std + added_variance).sqrt()),
        DensitySpec::GaussianMixture { components } => Ok(DensitySpec::GaussianMixture {
            components: components
                .iter()
                .map(|c| MixtureComponent {
                    weight: c.weight,
                    mean: c.mean,
                    std: (c.std * c.std + added_variance).sqrt(),
                })
                .collect(),
        }),
        DensitySpec::DiagonalGaussian { means, stds } => DensitySpec::diagonal_gaussian(
            means.clone(),
            stds.iter().map(|s| (s * s + added_variance).sqrt()).collect(),
        ),
        DensitySpec::Uniform { lo, hi } => {
            let (lo, hi) = (*lo, *hi);
            let s = added_variance.sqrt();
            let domain = Interval::new(lo - TRUNCATION_SIGMAS * s, hi + TRUNCATION_SIGMAS * s)?;
            let width = hi - lo;
            normalize_with_hints(
                move |t| {
                    let upper = (t - lo) / (s * std::f64::consts::SQRT_2);
                    let lower = (t - hi) / (s * std::f64::consts::SQRT_2);
                    // 0.5 * (erf(upper) - erf(lower)), written with erfc to keep tail precision
                    let mass = if lower > 0.0 {
                        0.5 * (statrs::function::erf::erfc(lower) - statrs::function::erf::erfc(upper))
                    } else if upper < 0.0 {
                        0.5 * (statrs::function::erf::erfc(-upper) - statrs::function::erf::erfc(-lower))
                    } else {
                        1.0 - 0.5 * (statrs::function::erf::erfc(upper) + statrs::function::erf::erfc(-lower))
                    };
                    (mass / width).ln()
                },
                domain,
                &[lo, hi],
            )
        }
        DensitySpec::ChiSquared { .. } | DensitySpec::Numeric(_) => numeric_convolution(spec, added_variance),
    }
}

fn numeric_convolution(spec: &DensitySpec, added_variance: f64) -> Result<DensitySpec> {
    let s = added_variance.sqrt();
    let range = spec.effective_range();
    let domain = Interval::new(range.lo - TRUNCATION_SIGMAS * s, range.hi + TRUNCATION_SIGMAS * s)?;
    let inner = spec.clone();
    let landmarks: Vec<f64> = spec.landmarks();
    let hints = landmarks.clone();
    let evaluator = move |t: f64| -> f64 {
        let lo = range.lo.max(t - TRUNCATION_SIGMAS * s);
        let hi = range.hi.min(t + TRUNCATION_SIGMAS * s);
        if lo >= hi {
            return f64::NEG_INFINITY;
        }
        let mut breaks = vec![lo, hi, t.clamp(lo, hi)];
        breaks.extend(landmarks.iter().copied().filter(|x| *x > lo && *x < hi));
        let opts = QuadOptions {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            max_evals: 200_000,
        };
        match integrate_with_breaks(|u| (inner.ln_pdf(u) + gaussian_ln_pdf(t, u, s)).exp(), &breaks, opts) {
            Ok(r) if r.value > 0.0 => r.value.ln(),
            Ok(_) => f64::NEG_INFINITY,
            Err(_) => f64::NAN,
        }
    };
    normalize_with_hints(evaluator, domain, &hints)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupRatioResult {
    pub theta_star: Vec<f64>,
    pub sup_value: f64,
    /// Set when the supremum sits on the search-domain edge and the ratio
    /// keeps growing outward, i.e. the reported value is not a true sup.
    pub boundary_warning: bool,
}

/// Number of grid nodes used by [`sup_ratio`] before refinement.
pub const SUP_GRID_NODES: usize = 4096;

/// Supremum of `p / prior` on `domain`: grid scan followed by golden-section
/// refinement (relative tolerance 1e-10) around the best node.
pub fn sup_ratio(p: &DensitySpec, prior: &DensitySpec, domain: Interval) -> Result<SupRatioResult> {
    if p.dim() != 1 || prior.dim() != 1 {
        return Err(Error::Unsupported("sup_ratio is implemented for one-dimensional densities".into()));
    }
    if !domain.is_finite() {
        return Err(Error::usage("sup_ratio needs a finite search domain"));
    }
    let log_ratio = |x: f64| -> Result<f64> {
        let lp = p.ln_pdf(x);
        let lq = prior.ln_pdf(x);
        if lq == f64::NEG_INFINITY || lq.is_nan() {
            return Err(Error::usage(format!("prior is not positive at theta = {x} inside the search domain")));
        }
        if lp.is_nan() || lp == f64::INFINITY {
            return Err(Error::NonFiniteIntegrand { theta: x });
        }
        Ok(lp - lq)
    };

    let nodes = uniform_breaks(domain.lo, domain.hi, SUP_GRID_NODES - 1);
    let mut best_idx = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, &x) in nodes.iter().enumerate() {
        let v = log_ratio(x)?;
        // ties within 1e-12 keep the smallest theta
        if v > best && (best == f64::NEG_INFINITY || (v - best) > 1e-12 * best.abs().max(1e-300)) {
            best = v;
            best_idx = i;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::usage("posterior vanishes on the whole search domain"));
    }

    let lo = nodes[best_idx.saturating_sub(1)];
    let hi = nodes[(best_idx + 1).min(nodes.len() - 1)];
    let refined = golden_section_max(log_ratio, lo, hi, 1e-10)?;
    let (theta, log_sup) = if refined.value > best {
        (refined.x, refined.value)
    } else {
        (nodes[best_idx], best)
    };

    let at_edge = best_idx == 0 || best_idx == nodes.len() - 1;
    let boundary_warning = at_edge && {
        let h = domain.width() / (SUP_GRID_NODES as f64 - 1.0);
        let outward = if best_idx == 0 { domain.lo - h } else { domain.hi + h };
        let lq = prior.ln_pdf(outward);
        lq.is_finite() && p.ln_pdf(outward) - lq > log_sup
    };

    Ok(SupRatioResult {
        theta_star: vec![theta],
        sup_value: log_sup.exp(),
        boundary_warning,
    })
}

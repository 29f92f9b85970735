//! Density estimates of a weighted population.

use serde::{Deserialize, Serialize};

use super::Population;
use crate::density::{DensitySpec, MixtureComponent};
use crate::error::{Error, Result};

pub const MIN_FIT_ESS: f64 = 10.0;
const EM_MAX_ITER: usize = 200;
const EM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    WeightedKde,
    GaussianMixture,
}

/// Kernel bandwidth for the weighted KDE, as `h²` relative to the weighted variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `h² = var · ess^(-2/5)`
    #[default]
    EssPower,
    /// `h² = var`
    Variance,
    /// `h² = 2 var`
    TwiceVariance,
    /// `h = std · ess^(-1/3)`
    CubeRoot,
}

impl BandwidthRule {
    pub fn bandwidth_sq(self, var: f64, ess: f64) -> f64 {
        match self {
            Self::EssPower => var * ess.powf(-0.4),
            Self::Variance => var,
            Self::TwiceVariance => 2.0 * var,
            Self::CubeRoot => var * ess.powf(-2.0 / 3.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub method: FitMethod,
    pub k: Option<usize>,
    pub bandwidth: BandwidthRule,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            method: FitMethod::GaussianMixture,
            k: None,
            bandwidth: BandwidthRule::default(),
        }
    }
}

pub fn fit_density(pop: &Population, opts: &FitOptions) -> Result<DensitySpec> {
    if !(pop.ess >= MIN_FIT_ESS) {
        return Err(Error::DegeneratePopulation {
            ess: pop.ess,
            required: MIN_FIT_ESS,
        });
    }
    let dim = pop.dim();
    let k = opts.k.unwrap_or(2);
    if k == 0 {
        return Err(Error::usage("mixture component count must be positive"));
    }
    if dim > 1 {
        if opts.method == FitMethod::GaussianMixture && k == 1 {
            let (means, stds) = (0..dim)
                .map(|i| {
                    let (m, v) = pop.weighted_moments(i);
                    (m, v.sqrt())
                })
                .unzip();
            return DensitySpec::diagonal_gaussian(means, stds);
        }
        return Err(Error::Unsupported(format!(
            "{dim}-dimensional populations can only be fitted with a single-component gaussian_mixture"
        )));
    }
    let (_, var) = pop.weighted_moments(0);
    if !(var > 0.0) {
        return Err(Error::DegeneratePopulation {
            ess: pop.ess,
            required: MIN_FIT_ESS,
        });
    }
    match opts.method {
        FitMethod::WeightedKde => {
            let h = opts.bandwidth.bandwidth_sq(var, pop.ess).sqrt();
            let components = pop
                .thetas
                .iter()
                .zip(&pop.weights)
                .filter(|(_, w)| **w > 0.0)
                .map(|(t, &weight)| MixtureComponent { weight, mean: t[0], std: h })
                .collect();
            DensitySpec::mixture_normalized(components)
        }
        FitMethod::GaussianMixture => {
            let xs: Vec<f64> = pop.thetas.iter().map(|t| t[0]).collect();
            DensitySpec::mixture_normalized(weighted_em(&xs, &pop.weights, k, var))
        }
    }
}

fn weighted_quantile(sorted: &[(f64, f64)], total: f64, q: f64) -> f64 {
    let target = q * total;
    let mut acc = 0.0;
    for &(x, w) in sorted {
        acc += w;
        if acc >= target {
            return x;
        }
    }
    sorted[sorted.len() - 1].0
}

fn weighted_em(xs: &[f64], ws: &[f64], k: usize, var: f64) -> Vec<MixtureComponent> {
    let total: f64 = ws.iter().sum();
    let mut sorted: Vec<(f64, f64)> = xs.iter().copied().zip(ws.iter().copied()).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let floor = 1e-6 * var.sqrt();
    let mut comps: Vec<MixtureComponent> = (0..k)
        .map(|j| MixtureComponent {
            weight: 1.0 / k as f64,
            mean: weighted_quantile(&sorted, total, (j as f64 + 0.5) / k as f64),
            std: var.sqrt(),
        })
        .collect();

    let mut resp = vec![0.0; xs.len() * k];
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..EM_MAX_ITER {
        let mut loglik = 0.0;
        for (i, (&x, &w)) in xs.iter().zip(ws).enumerate() {
            let row = &mut resp[i * k..(i + 1) * k];
            let mut max = f64::NEG_INFINITY;
            for (r, c) in row.iter_mut().zip(&comps) {
                let z = (x - c.mean) / c.std;
                *r = c.weight.ln() - 0.5 * z * z - c.std.ln();
                max = max.max(*r);
            }
            let sum: f64 = row.iter().map(|r| (r - max).exp()).sum();
            for r in row.iter_mut() {
                *r = (*r - max).exp() / sum;
            }
            loglik += w * (max + sum.ln());
        }
        loglik /= total;
        for (j, c) in comps.iter_mut().enumerate() {
            let nj: f64 = ws.iter().enumerate().map(|(i, w)| w * resp[i * k + j]).sum();
            if nj <= 0.0 {
                continue;
            }
            let mean = xs.iter().zip(ws).enumerate().map(|(i, (x, w))| w * resp[i * k + j] * x).sum::<f64>() / nj;
            let v = xs
                .iter()
                .zip(ws)
                .enumerate()
                .map(|(i, (x, w))| w * resp[i * k + j] * (x - mean).powi(2))
                .sum::<f64>()
                / nj;
            c.weight = nj / total;
            c.mean = mean;
            c.std = v.sqrt().max(floor);
        }
        if (loglik - prev).abs() < EM_TOL {
            break;
        }
        prev = loglik;
    }
    comps
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn population(thetas: Vec<f64>) -> Population {
        let n = thetas.len();
        Population::new(thetas.into_iter().map(|t| vec![t]).collect(), vec![1.0; n], 0.1, n).unwrap()
    }

    #[test]
    fn kde_of_standard_normal_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = DensitySpec::gaussian(0.0, 1.0).unwrap();
        let xs: Vec<f64> = d.sample(&mut rng, 10_000).unwrap().into_iter().map(|v| v[0]).collect();
        let opts = FitOptions {
            method: FitMethod::WeightedKde,
            ..Default::default()
        };
        let fit = fit_density(&population(xs), &opts).unwrap();
        let (mean, var) = fit.moments().unwrap();
        assert!(mean.abs() < 0.05);
        assert!((var - 1.0).abs() < 0.1);
        assert!((fit.total_mass().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn repeated_particle_is_degenerate() {
        let pop = Population::new(vec![vec![1.0]; 5], vec![1.0, 0.0, 0.0, 0.0, 0.0], 0.1, 5).unwrap();
        assert!(matches!(
            fit_density(&pop, &FitOptions::default()),
            Err(Error::DegeneratePopulation { .. })
        ));
    }

    #[test]
    fn em_recovers_bimodal_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = DensitySpec::mixture(&[(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)]).unwrap();
        let xs: Vec<f64> = d.sample(&mut rng, 10_000).unwrap().into_iter().map(|v| v[0]).collect();
        let opts = FitOptions {
            method: FitMethod::GaussianMixture,
            k: Some(2),
            ..Default::default()
        };
        let fit = fit_density(&population(xs), &opts).unwrap();
        let DensitySpec::GaussianMixture { components } = fit else { panic!() };
        let mut means: Vec<f64> = components.iter().map(|c| c.mean).collect();
        means.sort_by(f64::total_cmp);
        assert!((means[0] + 2.0).abs() < 0.15 && (means[1] - 2.0).abs() < 0.15, "{means:?}");
    }

    #[test]
    fn bandwidth_rules() {
        assert!((BandwidthRule::EssPower.bandwidth_sq(2.0, 32.0) - 2.0 * 0.25).abs() < 1e-15);
        assert_eq!(BandwidthRule::TwiceVariance.bandwidth_sq(2.0, 32.0), 4.0);
    }
}

//! Toy forward models.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ForwardProblem;
use crate::density::DensitySpec;
use crate::error::{Error, Result};

pub const TOY_NAMES: [&str; 2] = ["gaussian_mean", "gaussian_mean_bimodal_prior"];

/// Summary = mean of `n_obs` draws from `N(θ, noise_std)`.
#[derive(Debug, Clone)]
pub struct GaussianMeanToy {
    prior: DensitySpec,
    observed: Vec<f64>,
    pub n_obs: usize,
    pub noise_std: f64,
}

impl GaussianMeanToy {
    /// Ten draws, unit noise, observed mean 0, prior `N(0, 5)`.
    pub fn standard() -> Self {
        Self {
            prior: DensitySpec::Gaussian { mean: 0.0, std: 5.0 },
            observed: vec![0.0],
            n_obs: 10,
            noise_std: 1.0,
        }
    }

    /// Same likelihood under the prior `½ N(-3, 2) + ½ N(3, 2)`.
    pub fn bimodal_prior() -> Self {
        Self {
            prior: DensitySpec::mixture(&[(0.5, -3.0, 2.0), (0.5, 3.0, 2.0)]).expect("valid mixture"),
            ..Self::standard()
        }
    }

    pub fn with_prior(prior: DensitySpec, observed: f64) -> Result<Self> {
        if prior.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: prior.dim(),
            });
        }
        Ok(Self {
            prior,
            observed: vec![observed],
            ..Self::standard()
        })
    }

    /// Standard deviation of the simulated summary given θ.
    pub fn summary_std(&self) -> f64 {
        self.noise_std / (self.n_obs as f64).sqrt()
    }

    /// Exact posterior `(mean, std)` when the prior is Gaussian.
    pub fn conjugate_posterior(&self) -> Option<(f64, f64)> {
        let DensitySpec::Gaussian { mean, std } = self.prior else {
            return None;
        };
        let s = self.summary_std();
        let precision = 1.0 / (std * std) + 1.0 / (s * s);
        let post_mean = (mean / (std * std) + self.observed[0] / (s * s)) / precision;
        Some((post_mean, precision.recip().sqrt()))
    }
}

impl ForwardProblem for GaussianMeanToy {
    fn prior(&self) -> &DensitySpec {
        &self.prior
    }

    fn observed(&self) -> &[f64] {
        &self.observed
    }

    fn simulate(&self, theta: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let sum: f64 = (0..self.n_obs)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                theta[0] + self.noise_std * z
            })
            .sum();
        vec![sum / self.n_obs as f64]
    }
}

pub fn toy_by_name(name: &str) -> Result<GaussianMeanToy> {
    match name {
        "gaussian_mean" => Ok(GaussianMeanToy::standard()),
        "gaussian_mean_bimodal_prior" => Ok(GaussianMeanToy::bimodal_prior()),
        other => Err(Error::Config(format!(
            "unknown model {other:?}; expected one of {}",
            TOY_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn summary_distribution() {
        let toy = GaussianMeanToy::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| toy.simulate(&[1.5], &mut rng)[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 1.5).abs() < 4.0 * (0.1f64 / n as f64).sqrt());
        assert!((var - 0.1).abs() < 0.005);
    }

    #[test]
    fn distance_is_a_metric_on_examples() {
        let toy = GaussianMeanToy::standard();
        assert_eq!(toy.distance(&[0.3], &[0.3]), 0.0);
        assert_eq!(toy.distance(&[0.3], &[-0.2]), toy.distance(&[-0.2], &[0.3]));
    }

    #[test]
    fn conjugate_posterior_precision() {
        let (m, s) = GaussianMeanToy::standard().conjugate_posterior().unwrap();
        assert_eq!(m, 0.0);
        assert!((s - 10.04f64.recip().sqrt()).abs() < 1e-15);
        assert!(toy_by_name("nope").is_err());
        assert!(GaussianMeanToy::bimodal_prior().conjugate_posterior().is_none());
    }
}

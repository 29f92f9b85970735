//! Sequential Monte Carlo ABC: propose, simulate, accept within ε, weight by π/q.

mod engine;
mod fit;
mod mh;
mod rng;
mod toy;

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::DensitySpec;
use crate::efficiency::kish_ess;
use crate::error::{Error, Result};
use crate::proposals::Proposal;

pub use engine::{
    abc_iteration, build_proposal, smc_run, IterationRecord, RunDiagnostics, SmcFailure, SmcOptions, SmcRun, DEFAULT_MAX_PROPOSALS_PER_TARGET,
};
pub use fit::{fit_density, BandwidthRule, FitMethod, FitOptions, MIN_FIT_ESS};
pub use mh::{mh_sample, Chain, ChainStats, MhConfig, MhOutput, DEFAULT_BURN_IN, DEFAULT_STEP_SCALE, DEFAULT_THIN};
pub use rng::{Purpose, RngStream};
pub use toy::{toy_by_name, GaussianMeanToy, TOY_NAMES};

/// A simulator with observed summaries, a distance and a prior.
pub trait ForwardProblem: Sync {
    fn prior(&self) -> &DensitySpec;
    fn observed(&self) -> &[f64];
    fn simulate(&self, theta: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// Euclidean distance between summary vectors.
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    fn dim(&self) -> usize {
        self.prior().dim()
    }
}

/// Strictly decreasing positive thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EpsilonSchedule(Vec<f64>);

impl EpsilonSchedule {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::usage("epsilon schedule is empty"));
        }
        if thresholds.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::usage("epsilon thresholds must be positive"));
        }
        if thresholds.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::usage("epsilon thresholds must be strictly decreasing"));
        }
        Ok(Self(thresholds))
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for EpsilonSchedule {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EpsilonSchedule> for Vec<f64> {
    fn from(s: EpsilonSchedule) -> Self {
        s.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Population {
    pub thetas: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub epsilon: f64,
    pub ess: f64,
    pub n_proposed: usize,
    pub accepted: usize,
}

impl Population {
    pub fn new(thetas: Vec<Vec<f64>>, weights: Vec<f64>, epsilon: f64, n_proposed: usize) -> Result<Self> {
        if thetas.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: thetas.len(),
                got: weights.len(),
            });
        }
        if thetas.len() > n_proposed {
            return Err(Error::usage("more accepted particles than proposals"));
        }
        let ess = if weights.is_empty() { 0.0 } else { kish_ess(&weights)? };
        Ok(Self {
            accepted: thetas.len(),
            thetas,
            weights,
            epsilon,
            ess,
            n_proposed,
        })
    }

    pub fn dim(&self) -> usize {
        self.thetas.first().map_or(0, Vec::len)
    }

    pub fn acceptance_fraction(&self) -> f64 {
        if self.n_proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.n_proposed as f64
        }
    }

    pub fn ess_per_proposal(&self) -> f64 {
        if self.n_proposed == 0 {
            0.0
        } else {
            self.ess / self.n_proposed as f64
        }
    }

    /// Weighted mean and (biased) variance of coordinate `i`.
    pub fn weighted_moments(&self, i: usize) -> (f64, f64) {
        let total: f64 = self.weights.iter().sum();
        let mean = self.thetas.iter().zip(&self.weights).map(|(t, w)| w * t[i]).sum::<f64>() / total;
        let var = self
            .thetas
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * (t[i] - mean).powi(2))
            .sum::<f64>()
            / total;
        (mean, var)
    }

    /// CSV with header `theta_0,..,theta_{n-1},weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dim()).map(|i| format!("theta_{i}")).chain(["weight".to_string()]).collect();
        writeln!(out, "{}", header.join(","))?;
        for (t, w) in self.thetas.iter().zip(&self.weights) {
            for x in t {
                write!(out, "{x},")?;
            }
            writeln!(out, "{w}")?;
        }
        Ok(())
    }
}

/// `w_i = π(θ_i) / q(θ_i)`, unnormalized.
pub fn importance_weights(thetas: &[Vec<f64>], prior: &DensitySpec, proposal: &Proposal) -> Result<Vec<f64>> {
    thetas
        .iter()
        .map(|t| {
            let lq = proposal.density.log_pdf(t)?;
            if lq == f64::NEG_INFINITY {
                return Err(Error::InadmissibleProposal { theta: t.clone() });
            }
            let lp = prior.log_pdf(t)?;
            Ok((lp - lq).exp())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_examples() {
        let prior = DensitySpec::gaussian(0.0, 2.0).unwrap();
        let thetas = vec![vec![-1.0], vec![0.3], vec![4.0]];
        let w = importance_weights(&thetas, &prior, &Proposal::prior(&prior)).unwrap();
        assert!(w.iter().all(|&x| x == 1.0));

        let u = DensitySpec::uniform(0.0, 2.0).unwrap();
        let narrow = Proposal::posterior(&DensitySpec::uniform(0.0, 1.0).unwrap());
        let w = importance_weights(&[vec![0.25], vec![0.75]], &u, &narrow).unwrap();
        assert!(w.iter().all(|&x| (x - 0.5).abs() < 1e-15));
        assert!(matches!(
            importance_weights(&[vec![1.5]], &u, &narrow),
            Err(Error::InadmissibleProposal { .. })
        ));
    }

    #[test]
    fn schedule_validation() {
        assert!(EpsilonSchedule::new(vec![2.0, 1.0, 0.5]).is_ok());
        assert!(EpsilonSchedule::new(vec![]).is_err());
        assert!(EpsilonSchedule::new(vec![1.0, 1.0]).is_err());
        assert!(EpsilonSchedule::new(vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn population_csv_header() {
        let p = Population::new(vec![vec![1.0, 2.0]], vec![0.5], 0.1, 3).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "theta_0,theta_1,weight\n1,2,0.5\n");
        assert_eq!(p.ess, 1.0);
        assert!((p.acceptance_fraction() - 1.0 / 3.0).abs() < 1e-15);
    }
}

//! Random-walk Metropolis sampling of an unnormalized log density.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_BURN_IN: usize = 1000;
pub const DEFAULT_THIN: usize = 10;
/// Step scale relative to the per-dimension target std.
pub const DEFAULT_STEP_SCALE: f64 = 2.4;

/// Acceptance rates outside this band are reported as a warning.
pub const HEALTHY_ACCEPTANCE: (f64, f64) = (0.05, 0.95);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MhConfig {
    pub step_std: Vec<f64>,
    pub burn_in: usize,
    pub thin: usize,
}

impl MhConfig {
    pub fn new(step_std: Vec<f64>) -> Self {
        Self {
            step_std,
            burn_in: DEFAULT_BURN_IN,
            thin: DEFAULT_THIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainStats {
    pub proposed: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
    pub warning: Option<String>,
}

impl ChainStats {
    fn from_counts(proposed: usize, accepted: usize) -> Self {
        let acceptance_rate = if proposed == 0 { 0.0 } else { accepted as f64 / proposed as f64 };
        let (lo, hi) = HEALTHY_ACCEPTANCE;
        let warning = (proposed > 0 && !(lo..=hi).contains(&acceptance_rate))
            .then(|| format!("Metropolis acceptance rate {acceptance_rate:.3} outside [{lo}, {hi}]"));
        Self {
            proposed,
            accepted,
            acceptance_rate,
            warning,
        }
    }
}

/// A resumable Metropolis chain.
pub struct Chain<F> {
    log_q: F,
    config: MhConfig,
    state: Vec<f64>,
    log_q_state: f64,
    proposed: usize,
    accepted: usize,
    burned_in: bool,
    scratch: Vec<f64>,
}

impl<F: Fn(&[f64]) -> f64> Chain<F> {
    pub fn new(log_q: F, init: &[f64], config: MhConfig) -> Result<Self> {
        if config.step_std.len() != init.len() {
            return Err(Error::DimensionMismatch {
                expected: init.len(),
                got: config.step_std.len(),
            });
        }
        if config.step_std.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::usage("Metropolis step sizes must be positive and finite"));
        }
        if config.thin == 0 {
            return Err(Error::usage("thinning interval must be at least 1"));
        }
        let log_q_state = log_q(init);
        if !log_q_state.is_finite() {
            return Err(Error::usage(format!("chain initialized where log q = {log_q_state}")));
        }
        Ok(Self {
            log_q,
            state: init.to_vec(),
            scratch: init.to_vec(),
            log_q_state,
            config,
            proposed: 0,
            accepted: 0,
            burned_in: false,
        })
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for (i, s) in self.config.step_std.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            self.scratch[i] = self.state[i] + s * z;
        }
        let candidate = (self.log_q)(&self.scratch);
        self.proposed += 1;
        let log_u = rng.random::<f64>().ln();
        if log_u < candidate - self.log_q_state {
            std::mem::swap(&mut self.state, &mut self.scratch);
            self.log_q_state = candidate;
            self.accepted += 1;
        }
    }

    /// Draws `n` thinned states, running the burn-in first on the initial call.
    /// Acceptance statistics cover post-burn-in steps only.
    pub fn draw<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        if !self.burned_in {
            for _ in 0..self.config.burn_in {
                self.step(rng);
            }
            self.proposed = 0;
            self.accepted = 0;
            self.burned_in = true;
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            for _ in 0..self.config.thin {
                self.step(rng);
            }
            out.push(self.state.clone());
        }
        out
    }

    pub fn stats(&self) -> ChainStats {
        ChainStats::from_counts(self.proposed, self.accepted)
    }
}

#[derive(Debug, Clone)]
pub struct MhOutput {
    pub samples: Vec<Vec<f64>>,
    pub stats: ChainStats,
}

/// `n` post-burn-in, thinned states of a random-walk Metropolis chain on `log_q`.
pub fn mh_sample<F, R>(log_q: F, n: usize, init: &[f64], config: MhConfig, rng: &mut R) -> Result<MhOutput>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut chain = Chain::new(log_q, init, config)?;
    let samples = chain.draw(n, rng);
    Ok(MhOutput {
        samples,
        stats: chain.stats(),
    })
}

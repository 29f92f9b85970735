//! The propose / simulate / accept / weight loop and the multi-population driver.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::fit::{fit_density, FitOptions};
use super::mh::{Chain, ChainStats, MhConfig, DEFAULT_STEP_SCALE};
use super::rng::{Purpose, RngStream};
use super::{importance_weights, EpsilonSchedule, ForwardProblem, Population};
use crate::density::DensitySpec;
use crate::error::{Error, Result};
use crate::proposals::{
    bounded_proposal, geometric_mean_proposal, kde_proposal, optimal_proposal, KdeSettings, Proposal, ProposalParams, Scheme,
};

/// Default stall budget: proposals allowed per requested particle.
pub const DEFAULT_MAX_PROPOSALS_PER_TARGET: usize = 10_000;

/// Proposals simulated per parallel batch. Results do not depend on it.
const BATCH: usize = 2048;

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub epsilon: f64,
    pub scheme: Scheme,
    pub acceptance_fraction: f64,
    pub ess: f64,
    pub ess_per_proposal: f64,
    pub n_proposed: usize,
    pub accepted: usize,
    pub proposal: ProposalParams,
    pub chain: Option<ChainStats>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunDiagnostics {
    pub seed: u64,
    pub n_particles: usize,
    pub iterations: Vec<IterationRecord>,
    pub error: Option<String>,
}

impl RunDiagnostics {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

fn record(iteration: usize, scheme: Scheme, pop: &Population, proposal: &Proposal, chain: Option<ChainStats>) -> IterationRecord {
    IterationRecord {
        iteration,
        epsilon: pop.epsilon,
        scheme,
        acceptance_fraction: pop.acceptance_fraction(),
        ess: pop.ess,
        ess_per_proposal: pop.ess_per_proposal(),
        n_proposed: pop.n_proposed,
        accepted: pop.accepted,
        proposal: proposal.params.clone(),
        chain,
    }
}

type LogDensity<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;

enum Sampler<'a> {
    Direct(&'a DensitySpec),
    Chain(Box<(Chain<LogDensity<'a>>, rand_chacha::ChaCha8Rng)>),
}

impl<'a> Sampler<'a> {
    fn new(proposal: &'a Proposal, stream: RngStream) -> Result<Self> {
        let q = &proposal.density;
        if q.is_analytic() {
            return Ok(Self::Direct(q));
        }
        let (mean, var) = q.moments()?;
        let init = std::iter::once(mean)
            .chain(q.landmarks())
            .find(|x| q.ln_pdf(*x).is_finite())
            .ok_or_else(|| Error::InadmissibleProposal { theta: vec![mean] })?;
        let log_q: LogDensity<'a> = Box::new(move |x: &[f64]| q.ln_pdf(x[0]));
        let chain = Chain::new(log_q, &[init], MhConfig::new(vec![DEFAULT_STEP_SCALE * var.sqrt()]))?;
        Ok(Self::Chain(Box::new((chain, stream.rng(Purpose::Chain, 0)))))
    }

    fn draw(&mut self, stream: RngStream, first: u64, n: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            Self::Direct(q) => (first..first + n as u64)
                .into_par_iter()
                .map(|c| {
                    let mut rng = stream.rng(Purpose::Proposal, c);
                    q.sample(&mut rng, 1).map(|mut v| v.swap_remove(0))
                })
                .collect(),
            Self::Chain(state) => {
                let (chain, rng) = &mut **state;
                Ok(chain.draw(n, rng))
            }
        }
    }

    fn stats(&self) -> Option<ChainStats> {
        match self {
            Self::Direct(_) => None,
            Self::Chain(state) => Some(state.0.stats()),
        }
    }
}

/// One rejection-ABC population from `proposal` at threshold `epsilon`.
///
/// Candidates are drawn and simulated in parallel batches and accepted in
/// counter order, so the population is independent of the worker count.
pub fn abc_iteration<P: ForwardProblem + ?Sized>(
    problem: &P,
    proposal: &Proposal,
    epsilon: f64,
    n_target: usize,
    max_proposals: usize,
    stream: RngStream,
) -> Result<(Population, Option<ChainStats>)> {
    if n_target == 0 {
        return Err(Error::usage("n_target must be at least 1"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::usage("epsilon must be positive"));
    }
    let mut sampler = Sampler::new(proposal, stream)?;
    let observed = problem.observed();
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(n_target);
    let mut used = 0usize;
    while used < max_proposals && accepted.len() < n_target {
        let n = BATCH.min(max_proposals - used);
        let thetas = sampler.draw(stream, used as u64, n)?;
        let hits: Vec<bool> = thetas
            .par_iter()
            .enumerate()
            .map(|(j, theta)| {
                let mut rng = stream.rng(Purpose::Simulation, (used + j) as u64);
                let simulated = problem.simulate(theta, &mut rng);
                problem.distance(observed, &simulated) <= epsilon
            })
            .collect();
        for (j, (theta, hit)) in thetas.into_iter().zip(hits).enumerate() {
            if hit {
                accepted.push(theta);
                if accepted.len() == n_target {
                    used += j + 1;
                    break;
                }
            }
        }
        if accepted.len() < n_target {
            used += n;
        }
    }
    if accepted.is_empty() {
        return Err(Error::Stall {
            epsilon,
            proposals: used,
            iteration: None,
        });
    }
    let weights = importance_weights(&accepted, problem.prior(), proposal)?;
    let population = Population::new(accepted, weights, epsilon, used)?;
    Ok((population, sampler.stats()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SmcOptions {
    pub fit: FitOptions,
    pub max_proposals_per_target: usize,
    pub kde: KdeSettings,
    /// Relative tolerance on `A*` for the optimal scheme.
    pub optimal_tol: f64,
}

impl Default for SmcOptions {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            max_proposals_per_target: DEFAULT_MAX_PROPOSALS_PER_TARGET,
            kde: KdeSettings::default(),
            optimal_tol: 1e-6,
        }
    }
}

/// Builds a proposal of the given scheme from a posterior estimate and the prior.
pub fn build_proposal(scheme: Scheme, p_hat: &DensitySpec, prior: &DensitySpec, opts: &SmcOptions) -> Result<Proposal> {
    match scheme {
        Scheme::Prior => Ok(Proposal::prior(prior)),
        Scheme::Posterior => Ok(Proposal::posterior(p_hat)),
        Scheme::BeaumontKde => kde_proposal(p_hat, opts.kde),
        Scheme::GeometricMean => geometric_mean_proposal(p_hat, prior),
        Scheme::Bounded => bounded_proposal(p_hat, prior, None),
        Scheme::Optimal => optimal_proposal(p_hat, prior, opts.optimal_tol),
        Scheme::Series => Err(Error::usage("the series scheme is not available as an SMC proposal")),
    }
}

#[derive(Debug, Clone)]
pub struct SmcRun {
    pub populations: Vec<Population>,
    pub diagnostics: RunDiagnostics,
}

/// A failed run with everything completed before the failure.
#[derive(Debug)]
pub struct SmcFailure {
    pub error: Error,
    pub partial: Box<SmcRun>,
}

impl From<SmcFailure> for Error {
    fn from(f: SmcFailure) -> Self {
        f.error
    }
}

/// Iteration 0 proposes from the prior; later iterations fit the previous
/// population and build `scheme` from the fit and the prior.
pub fn smc_run<P: ForwardProblem + ?Sized>(
    problem: &P,
    schedule: &EpsilonSchedule,
    scheme: Scheme,
    n_particles: usize,
    seed: u64,
    opts: &SmcOptions,
) -> std::result::Result<SmcRun, SmcFailure> {
    let mut run = SmcRun {
        populations: Vec::with_capacity(schedule.thresholds().len()),
        diagnostics: RunDiagnostics {
            seed,
            n_particles,
            ..Default::default()
        },
    };
    let max_proposals = n_particles.saturating_mul(opts.max_proposals_per_target);
    for (i, &epsilon) in schedule.thresholds().iter().enumerate() {
        let step = || -> Result<(Population, Proposal, Option<ChainStats>)> {
            let proposal = match run.populations.last() {
                None => Proposal::prior(problem.prior()),
                Some(prev) => build_proposal(scheme, &fit_density(prev, &opts.fit)?, problem.prior(), opts)?,
            };
            let stream = RngStream::new(seed, i as u32);
            let (pop, chain) = abc_iteration(problem, &proposal, epsilon, n_particles, max_proposals, stream)?;
            Ok((pop, proposal, chain))
        };
        match step() {
            Ok((pop, proposal, chain)) => {
                let used_scheme = if i == 0 { Scheme::Prior } else { scheme };
                run.diagnostics.iterations.push(record(i, used_scheme, &pop, &proposal, chain));
                run.populations.push(pop);
            }
            Err(e) => {
                let error = match e {
                    Error::Stall { epsilon, proposals, .. } => Error::Stall {
                        epsilon,
                        proposals,
                        iteration: Some(i),
                    },
                    other => other,
                };
                run.diagnostics.error = Some(error.to_string());
                return Err(SmcFailure {
                    error,
                    partial: Box::new(run),
                });
            }
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smc::GaussianMeanToy;

    #[test]
    fn infinite_threshold_accepts_everything() {
        let toy = GaussianMeanToy::standard();
        let q = Proposal::prior(toy.prior());
        let (pop, _) = abc_iteration(&toy, &q, 1e9, 500, 10_000, RngStream::new(1, 0)).unwrap();
        assert_eq!(pop.acceptance_fraction(), 1.0);
        assert_eq!(pop.ess, 500.0);
    }

    #[test]
    fn stall_names_epsilon() {
        let toy = GaussianMeanToy::standard();
        let q = Proposal::prior(toy.prior());
        let err = abc_iteration(&toy, &q, 1e-9, 10, 300, RngStream::new(1, 0)).unwrap_err();
        assert!(matches!(err, Error::Stall { epsilon, proposals: 300, .. } if epsilon == 1e-9));
    }

    #[test]
    fn result_is_independent_of_thread_count() {
        let toy = GaussianMeanToy::standard();
        let q = Proposal::prior(toy.prior());
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| abc_iteration(&toy, &q, 0.2, 300, 1_000_000, RngStream::new(5, 2)).unwrap().0)
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn numeric_proposals_are_sampled_by_chain() {
        let toy = GaussianMeanToy::standard();
        let p = DensitySpec::gaussian(0.0, 0.4).unwrap();
        let q = bounded_proposal(&p, toy.prior(), None).unwrap();
        let (pop, chain) = abc_iteration(&toy, &q, 0.3, 200, 1_000_000, RngStream::new(3, 1)).unwrap();
        assert_eq!(pop.accepted, 200);
        let stats = chain.unwrap();
        assert!(stats.acceptance_rate > 0.05 && stats.acceptance_rate < 0.95);
    }

    #[test]
    fn stall_carries_iteration_index() {
        let toy = GaussianMeanToy::standard();
        let schedule = EpsilonSchedule::new(vec![1.0, 1e-9]).unwrap();
        let opts = SmcOptions {
            max_proposals_per_target: 2,
            ..Default::default()
        };
        let f = smc_run(&toy, &schedule, Scheme::Prior, 200, 4, &opts).unwrap_err();
        assert!(matches!(f.error, Error::Stall { iteration: Some(1), .. }));
        assert_eq!(f.partial.populations.len(), 1);
        assert!(f.partial.diagnostics.error.is_some());
    }
}

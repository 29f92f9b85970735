//! Cross-module invariant checks, grouped for the `verify` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::density::DensitySpec;
use crate::efficiency::{analytic_gaussian_efficiency, sampling_efficiency, AnalyticScheme, GaussianToyParams};
use crate::error::Result;
use crate::proposals::{bounded_proposal, geometric_mean_proposal, optimal_proposal, series_proposal, Scheme};
use crate::scenario::{compute_table, Case, ScenarioSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Multiplier on `sup p/π` used for `Ā` in the Hölder group; `0.75` is the
    /// bounded approximation, values at or below `0.5` must make the group fail.
    pub a_bar_factor: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            a_bar_factor: 0.75,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupResult {
    pub name: &'static str,
    pub passed: bool,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl GroupResult {
    fn run(name: &'static str, body: impl FnOnce(&mut Vec<String>) -> Result<usize>) -> Self {
        let mut failures = Vec::new();
        let checks = match body(&mut failures) {
            Ok(n) => n,
            Err(e) => {
                failures.push(format!("error: {e}"));
                0
            }
        };
        Self {
            name,
            passed: failures.is_empty(),
            checks,
            failures,
        }
    }
}

fn random_posterior(rng: &mut ChaCha8Rng) -> DensitySpec {
    if rng.random_bool(0.5) {
        DensitySpec::Gaussian {
            mean: rng.random_range(-3.0..3.0),
            std: rng.random_range(0.3..2.0),
        }
    } else {
        let w = rng.random_range(0.2..0.8);
        DensitySpec::mixture(&[
            (w, rng.random_range(-4.0..0.0), rng.random_range(0.3..1.5)),
            (1.0 - w, rng.random_range(0.0..4.0), rng.random_range(0.3..1.5)),
        ])
        .expect("valid random mixture")
    }
}

fn random_prior(rng: &mut ChaCha8Rng) -> DensitySpec {
    if rng.random_bool(0.7) {
        DensitySpec::Gaussian {
            mean: rng.random_range(-2.0..2.0),
            std: rng.random_range(3.0..12.0),
        }
    } else {
        DensitySpec::mixture(&[(0.5, -2.0, rng.random_range(3.0..8.0)), (0.5, 2.0, rng.random_range(3.0..8.0))])
            .expect("valid random mixture")
    }
}

/// Random posterior/prior pairs for the property sweeps.
pub fn random_pairs(seed: u64, n: usize) -> Vec<(DensitySpec, DensitySpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (random_posterior(&mut rng), random_prior(&mut rng))).collect()
}

fn prior_identity(opts: &VerifyOptions) -> GroupResult {
    GroupResult::run("prior_identity", |fail| {
        let mut pairs: Vec<(DensitySpec, DensitySpec)> = Vec::new();
        for case in Case::ALL {
            let s = ScenarioSpec::new(case)?;
            pairs.push((s.posterior, s.prior));
        }
        pairs.extend(random_pairs(opts.seed, 20));
        for (p, pi) in &pairs {
            let r = sampling_efficiency(pi, p, pi)?;
            if (r.omega - 1.0).abs() > 1e-10 {
                fail.push(format!("omega[prior] = {} for {p:?}", r.omega));
            }
        }
        Ok(pairs.len())
    })
}

fn jensen(opts: &VerifyOptions) -> GroupResult {
    GroupResult::run("jensen", |fail| {
        let pairs = random_pairs(opts.seed.wrapping_add(1), 50);
        for (p, pi) in &pairs {
            let q0 = geometric_mean_proposal(p, pi)?;
            let w0 = sampling_efficiency(&q0.density, p, pi)?.omega;
            let wp = sampling_efficiency(p, p, pi)?.omega;
            if w0 < 1.0 - 1e-9 || wp < 1.0 - 1e-9 {
                fail.push(format!("omega[q0] = {w0}, omega[posterior] = {wp} for {p:?} / {pi:?}"));
            }
        }
        Ok(pairs.len())
    })
}

fn holder(opts: &VerifyOptions) -> GroupResult {
    GroupResult::run("holder", |fail| {
        for case in Case::ALL {
            let s = ScenarioSpec::new(case)?;
            let q = optimal_proposal(&s.posterior, &s.prior, 1e-7)?;
            let sup = q.params.sup_ratio.expect("optimal proposal records sup");
            let a = s.efficiency(&q.density)?.a;
            if !(a > 0.5 * sup && a <= sup * (1.0 + 1e-9)) {
                fail.push(format!("case {case}: A[q*] = {a} outside (½·{sup}, {sup}]"));
            }
            let a_bar = opts.a_bar_factor * sup;
            if let Err(e) = bounded_proposal(&s.posterior, &s.prior, Some(a_bar)) {
                fail.push(format!("case {case}: {e}"));
            }
        }
        Ok(Case::ALL.len() * 2)
    })
}

fn analytic_vs_quadrature(opts: &VerifyOptions) -> GroupResult {
    GroupResult::run("analytic_vs_quadrature", |fail| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(2));
        let mut checks = 0;
        for _ in 0..100 {
            let params = GaussianToyParams::new(1, rng.random_range(-5.0..5.0), rng.random_range(1.0..10.0))?;
            for scheme in [AnalyticScheme::Posterior, AnalyticScheme::BeaumontKde, AnalyticScheme::GeometricMean] {
                let exact = analytic_gaussian_efficiency(&params, scheme)?.omega;
                let numeric = sampling_efficiency(&scheme.proposal_1d(&params), &params.posterior_1d(), &params.prior_1d())?.omega;
                checks += 1;
                if ((exact - numeric) / exact).abs() > 1e-6 {
                    fail.push(format!("{scheme:?} at {params:?}: {exact} vs {numeric}"));
                }
            }
        }
        Ok(checks)
    })
}

/// `ω` of series truncations of orders `0..=max_order` for a scenario.
pub fn series_omegas(s: &ScenarioSpec, a_star: f64, max_order: u32) -> Result<Vec<f64>> {
    (0..=max_order)
        .map(|k| {
            let q = series_proposal(&s.posterior, &s.prior, k, a_star)?;
            Ok(s.efficiency(&q.density)?.omega)
        })
        .collect()
}

fn series(_: &VerifyOptions) -> GroupResult {
    GroupResult::run("series", |fail| {
        let s = ScenarioSpec::new(Case::I)?;
        let q = optimal_proposal(&s.posterior, &s.prior, 1e-8)?;
        let (a_star, omega_star) = (q.params.a_star.unwrap_or(f64::NAN), q.params.omega_star.unwrap_or(f64::NAN));
        let omegas = series_omegas(&s, a_star, 12)?;
        for (k, w) in omegas.windows(2).enumerate() {
            if w[1] < w[0] * (1.0 - 1e-12) {
                fail.push(format!("omega decreases from order {k} to {}: {} -> {}", k + 1, w[0], w[1]));
            }
        }
        let last = omegas[12];
        if ((omega_star - last) / omega_star).abs() > 1e-3 {
            fail.push(format!("order-12 omega {last} is not within 1e-3 of {omega_star}"));
        }
        let q0 = geometric_mean_proposal(&s.posterior, &s.prior)?;
        let s0 = series_proposal(&s.posterior, &s.prior, 0, a_star)?;
        for i in 0..=120 {
            let x = -12.0 + 0.2 * i as f64;
            let (a, b) = (q0.density.pdf(x), s0.density.pdf(x));
            if (a - b).abs() > 1e-12 * a.max(1e-300) {
                fail.push(format!("order-0 series differs from q0 at {x}: {a} vs {b}"));
                break;
            }
        }
        Ok(omegas.len() + 1)
    })
}

fn optimality(_: &VerifyOptions) -> GroupResult {
    GroupResult::run("optimality", |fail| {
        let rows = compute_table(&Case::ALL)?;
        for case in Case::ALL {
            let of = |k: Scheme| rows.iter().find(|r| r.case == case && r.scheme == k).map(|r| r.report.omega);
            let best = of(Scheme::Optimal).unwrap_or(f64::NAN);
            for k in [Scheme::Posterior, Scheme::BeaumontKde, Scheme::GeometricMean, Scheme::Bounded] {
                let w = of(k).unwrap_or(f64::NAN);
                if !(best >= w * (1.0 - 1e-3)) {
                    fail.push(format!("case {case}: omega[q*] = {best} < omega[{}] = {w}", k.name()));
                }
            }
        }
        Ok(12)
    })
}

fn dimension_scaling(_: &VerifyOptions) -> GroupResult {
    GroupResult::run("dimension_scaling", |fail| {
        let mut checks = 0;
        for (mu, sigma) in [(0.0, 5.0), (2.0, 1.5), (7.0, 3.0)] {
            for reference in [AnalyticScheme::Posterior, AnalyticScheme::BeaumontKde] {
                let a = |n: u32| -> Result<f64> {
                    let p = GaussianToyParams::new(n, mu, sigma)?;
                    Ok(analytic_gaussian_efficiency(&p, AnalyticScheme::GeometricMean)?.omega
                        / analytic_gaussian_efficiency(&p, reference)?.omega)
                };
                let a1 = a(1)?;
                for n in [2u32, 3, 10] {
                    let an = a(n)?;
                    checks += 1;
                    let expected = a1.powi(n as i32);
                    if ((an - expected) / expected).abs() > 1e-9 {
                        fail.push(format!("a({n}) = {an}, a(1)^{n} = {expected} at ({mu}, {sigma})"));
                    }
                }
            }
        }
        Ok(checks)
    })
}

/// Runs every group in a fixed order.
pub fn run_all(opts: &VerifyOptions) -> Vec<GroupResult> {
    let groups: [fn(&VerifyOptions) -> GroupResult; 7] = [
        prior_identity,
        jensen,
        holder,
        analytic_vs_quadrature,
        series,
        optimality,
        dimension_scaling,
    ];
    groups.iter().map(|g| g(opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_groups_pass() {
        let results = run_all(&VerifyOptions::default());
        for r in &results {
            assert!(r.passed, "{}: {:?}", r.name, r.failures);
        }
    }

    #[test]
    fn corrupted_a_bar_fails_holder_group() {
        let opts = VerifyOptions {
            a_bar_factor: 0.4,
            ..Default::default()
        };
        let r = holder(&opts);
        assert!(!r.passed);
        assert!(r.failures.iter().all(|f| f.contains("Hölder")), "{:?}", r.failures);
    }
}

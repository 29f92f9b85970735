//! Command implementations behind the `abc-optimal` binary.
//!
//! Each command writes its files, reports to `out`, and returns whether all
//! of its checks passed; errors map to exit codes through [`Error::exit_code`].

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::config::RunConfig;
use crate::efficiency::{improvement_surface, surface_grid, write_surface_csv, AnalyticScheme};
use crate::error::{Error, Result};
use crate::proposals::Scheme;
use crate::scenario::{compute_table, write_table_csv, write_table_diff, Case, ScenarioSpec};
use crate::smc::{smc_run, RunDiagnostics, SmcRun};
use crate::verify::{run_all, VerifyOptions};

pub const CURVES_CSV_HEADER: &str = "theta,posterior,kde,q0,q_bounded,q_optimal";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Returns `false` when any cell lies outside the reference tolerance.
pub fn cmd_table1(cases: &[Case], out_path: Option<&Path>, out: &mut dyn Write) -> Result<bool> {
    if cases.is_empty() {
        return Err(Error::usage("no cases selected"));
    }
    let rows = compute_table(cases)?;
    if let Some(path) = out_path {
        let mut f = create(path)?;
        write_table_csv(&rows, &mut f)?;
        f.flush()?;
    }
    let ok = write_table_diff(&rows, &mut *out)?;
    writeln!(out, "{}", if ok { "all cells within tolerance" } else { "cells marked ! are outside tolerance" })?;
    Ok(ok)
}

pub fn cmd_curves(case: Case, lo: f64, hi: f64, n: usize, out_path: &Path, out: &mut dyn Write) -> Result<bool> {
    if n < 2 || !(lo < hi) {
        return Err(Error::usage("curves need lo < hi and at least two nodes"));
    }
    let s = ScenarioSpec::new(case)?;
    let d = s.functional_domain;
    if lo < d.lo || hi > d.hi {
        return Err(Error::usage(format!("grid [{lo}, {hi}] is outside the functional domain {d}")));
    }
    let proposals = [Scheme::BeaumontKde, Scheme::GeometricMean, Scheme::Bounded, Scheme::Optimal]
        .into_iter()
        .map(|k| s.proposal(k))
        .collect::<Result<Vec<_>>>()?;
    let mut f = create(out_path)?;
    writeln!(f, "{CURVES_CSV_HEADER}")?;
    for i in 0..n {
        let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        write!(f, "{x},{}", s.posterior.pdf(x))?;
        for q in &proposals {
            write!(f, ",{}", q.density.pdf(x))?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    writeln!(out, "wrote {n} rows for case {case} to {}", out_path.display())?;
    Ok(true)
}

#[derive(Debug, Clone, Copy)]
pub struct SurfaceArgs {
    pub ndim: u32,
    pub reference: AnalyticScheme,
    pub mu: (f64, f64),
    pub sigma: (f64, f64),
    pub n_mu: usize,
    pub n_sigma: usize,
}

impl SurfaceArgs {
    pub fn new(ndim: u32, reference: AnalyticScheme) -> Self {
        Self {
            ndim,
            reference,
            mu: (0.0, 10.0),
            sigma: (1.0, 20.0),
            n_mu: 101,
            n_sigma: 101,
        }
    }
}

pub fn parse_reference(s: &str) -> Result<AnalyticScheme> {
    match s {
        "posterior" => Ok(AnalyticScheme::Posterior),
        "kde" | "beaumont_kde" => Ok(AnalyticScheme::BeaumontKde),
        other => Err(Error::usage(format!("unknown surface reference {other:?}; expected posterior or kde"))),
    }
}

pub fn cmd_surface(args: SurfaceArgs, out_path: &Path, out: &mut dyn Write) -> Result<bool> {
    let grid = surface_grid(args.ndim, args.mu, args.sigma, args.n_mu, args.n_sigma)?;
    let rows = improvement_surface(&grid, AnalyticScheme::GeometricMean, args.reference);
    let mut f = create(out_path)?;
    write_surface_csv(&rows, &mut f, true)?;
    f.flush()?;
    let below = rows.iter().filter(|r| r.below_one()).count();
    let inadmissible = rows.iter().filter(|r| !r.admissible).count();
    writeln!(
        out,
        "wrote {} cells to {} ({below} with a < 1, {inadmissible} inadmissible)",
        rows.len(),
        out_path.display()
    )?;
    Ok(true)
}

fn write_run(dir: &Path, scheme: Scheme, populations: &[crate::smc::Population], diagnostics: &RunDiagnostics) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, pop) in populations.iter().enumerate() {
        let mut f = create(&dir.join(format!("{}_population_{i}.csv", scheme.name())))?;
        pop.write_csv(&mut f)?;
        f.flush()?;
    }
    let mut f = create(&dir.join(format!("{}_diagnostics.json", scheme.name())))?;
    diagnostics.write_json(&mut f)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn print_run(out: &mut dyn Write, scheme: Scheme, d: &RunDiagnostics) -> Result<()> {
    writeln!(out, "scheme {}", scheme.name())?;
    writeln!(out, "{:>4} {:>10} {:>10} {:>10} {:>12}", "iter", "epsilon", "accept %", "ESS", "ESS/prop")?;
    for r in &d.iterations {
        writeln!(
            out,
            "{:>4} {:>10.4} {:>10.4} {:>10.1} {:>12.6}",
            r.iteration,
            r.epsilon,
            100.0 * r.acceptance_fraction,
            r.ess,
            r.ess_per_proposal
        )?;
    }
    Ok(())
}

/// Resolves the run seed: command line first, then config, then 0 if allowed.
pub fn resolve_seed(cli: Option<u64>, config: Option<u64>, allow_default: bool) -> Result<u64> {
    match cli.or(config) {
        Some(s) => Ok(s),
        None if allow_default => Ok(0),
        None => Err(Error::usage(
            "this command is stochastic: pass --seed, set seed in the config, or allow the default with --allow-default-seed",
        )),
    }
}

pub fn cmd_smc(config_path: &Path, cli_seed: Option<u64>, allow_default_seed: bool, out: &mut dyn Write) -> Result<bool> {
    let cfg = RunConfig::load(config_path)?;
    let smc = cfg.smc()?;
    let seed = resolve_seed(cli_seed, smc.seed.or(cfg.seed), allow_default_seed)?;
    let problem = smc.problem()?;
    let schedule = smc.schedule()?;
    let opts = smc.options()?;
    for scheme in smc.schemes()? {
        match smc_run(&problem, &schedule, scheme, smc.n_particles, seed, &opts) {
            Ok(SmcRun { populations, diagnostics }) => {
                write_run(&smc.out_dir, scheme, &populations, &diagnostics)?;
                print_run(out, scheme, &diagnostics)?;
            }
            Err(failure) => {
                write_run(&smc.out_dir, scheme, &failure.partial.populations, &failure.partial.diagnostics)?;
                print_run(out, scheme, &failure.partial.diagnostics)?;
                return Err(failure.error);
            }
        }
    }
    writeln!(out, "outputs in {}", smc.out_dir.display())?;
    Ok(true)
}

pub fn cmd_verify(opts: &VerifyOptions, out: &mut dyn Write) -> Result<bool> {
    let results = run_all(opts);
    for r in &results {
        writeln!(out, "{} {:<24} ({} checks)", if r.passed { "PASS" } else { "FAIL" }, r.name, r.checks)?;
        for f in &r.failures {
            writeln!(out, "     {f}")?;
        }
    }
    Ok(results.iter().all(|r| r.passed))
}

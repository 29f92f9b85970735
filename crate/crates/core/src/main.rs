use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use abc_optimal::cli::{self, SurfaceArgs};
use abc_optimal::scenario::Case;
use abc_optimal::verify::VerifyOptions;
use abc_optimal::Result;

/// Sampling-efficiency benchmarks and an SMC-ABC engine with optimal proposals.
#[derive(Debug, Parser)]
#[command(name = "abc-optimal", version)]
struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Run stochastic commands with seed 0 when no seed is given.
    #[arg(long, global = true)]
    allow_default_seed: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// A, B and omega for every proposal scheme, compared with the reference table.
    Table1 {
        #[arg(long, default_value = "all")]
        case: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Proposal densities of one case on a grid.
    Curves {
        #[arg(long)]
        case: String,
        #[arg(long, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Improvement of the geometric-mean proposal over a reference on a prior grid.
    Surface {
        #[arg(long)]
        ndim: u32,
        #[arg(long = "ref")]
        reference: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
        mu: Option<Vec<f64>>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        sigma: Option<Vec<f64>>,
        #[arg(long, default_value_t = 101)]
        n_mu: usize,
        #[arg(long, default_value_t = 101)]
        n_sigma: usize,
    },
    /// SMC-ABC runs described by a TOML config.
    Smc {
        #[arg(long)]
        config: PathBuf,
    },
    /// Cross-module invariant suite.
    Verify {
        /// Use A-bar = 0.4 sup p/pi in the Hölder group (negative control).
        #[arg(long, hide = true)]
        corrupt_a_bar: bool,
    },
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<bool> {
    match cli.command {
        Command::Table1 { case, out: path } => cli::cmd_table1(&Case::parse_selection(&case)?, path.as_deref(), out),
        Command::Curves { case, lo, hi, n, out: path } => {
            let case = Case::parse(&case)
                .ok_or_else(|| abc_optimal::Error::Usage(format!("unknown case {case:?}; expected I, II or III")))?;
            cli::cmd_curves(case, lo, hi, n, &path, out)
        }
        Command::Surface {
            ndim,
            reference,
            out: path,
            mu,
            sigma,
            n_mu,
            n_sigma,
        } => {
            let mut args = SurfaceArgs::new(ndim, cli::parse_reference(&reference)?);
            if let Some(m) = mu {
                args.mu = (m[0], m[1]);
            }
            if let Some(s) = sigma {
                args.sigma = (s[0], s[1]);
            }
            args.n_mu = n_mu;
            args.n_sigma = n_sigma;
            cli::cmd_surface(args, &path, out)
        }
        Command::Smc { config } => cli::cmd_smc(&config, cli.seed, cli.allow_default_seed, out),
        Command::Verify { corrupt_a_bar } => {
            let opts = VerifyOptions {
                seed: cli::resolve_seed(cli.seed, None, cli.allow_default_seed)?,
                a_bar_factor: if corrupt_a_bar { 0.4 } else { 0.75 },
            };
            cli::cmd_verify(&opts, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let _ = out.flush();
            eprintln!("abc-optimal: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

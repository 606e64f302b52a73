use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use frachardy_cli::{commands, ExperimentConfig};
use frachardy_core::par::configure_threads;
use frachardy_core::DomainSpec;

/// Numerical laboratory for the fractional Laplacian with a Hardy potential.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on errors.
#[derive(Parser)]
#[command(name = "frachardy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed-form constants for (d, α) and the audit lines.
    Constants(Flags),
    /// Assemble, eigensolve and fit exponents on one grid.
    Solve(Flags),
    /// Run the full check suite over a refinement ladder.
    VerifyAll(Flags),
    /// Heat kernels along a time ladder.
    Heat(Flags),
    /// Operator-free quadrature of the Riesz identity.
    RieszCheck(Flags),
    /// Ground states along a ladder of couplings.
    Sweep(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Absolute Hardy coupling.
    #[arg(long, conflicts_with = "c_frac")]
    c: Option<f64>,
    /// Hardy coupling as a fraction of c*.
    #[arg(long)]
    c_frac: Option<f64>,
    /// interval:a,b | rect:ax,bx,ay,by | disk:R
    #[arg(long)]
    domain: Option<DomainSpec>,
    /// Cells per axis.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    refinements: Option<usize>,
    /// Comma-separated heat-kernel times.
    #[arg(long, value_delimiter = ',')]
    t_ladder: Option<Vec<f64>>,
    /// Comma-separated check names.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
    /// Riesz exponent β.
    #[arg(long)]
    beta: Option<f64>,
    /// Comma-separated radii for riesz-check.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if self.d.is_some() {
            cfg.d = self.d;
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if self.c.is_some() {
            cfg.c = self.c;
            cfg.c_frac = None;
        }
        if self.c_frac.is_some() {
            cfg.c_frac = self.c_frac;
            cfg.c = None;
        }
        if let Some(dom) = self.domain {
            cfg.domain = dom;
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(r) = self.refinements {
            cfg.refinements = r;
        }
        if let Some(t) = self.t_ladder {
            cfg.t_ladder = t;
        }
        if let Some(c) = self.checks {
            cfg.checks = c;
        }
        if self.beta.is_some() {
            cfg.beta = self.beta;
        }
        if let Some(r) = self.radii {
            cfg.radii = r;
        }
        if let Some(o) = self.out {
            cfg.out_dir = o;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("FRACHARDY_THREADS") {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("FRACHARDY_THREADS = '{v}'"))?)),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let threads = configure_threads(threads_from_env()?);
    match cli.command {
        Command::Constants(f) => commands::constants(&f.resolve()?),
        Command::Solve(f) => commands::solve(&f.resolve()?, threads),
        Command::VerifyAll(f) => commands::verify_all(&f.resolve()?, threads),
        Command::Heat(f) => commands::heat(&f.resolve()?, threads),
        Command::RieszCheck(f) => commands::riesz_check(&f.resolve()?, threads),
        Command::Sweep(f) => commands::sweep(&f.resolve()?, threads),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

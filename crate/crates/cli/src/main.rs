//! `vpgrav`: steady states, perturbation runs, the verification battery and
//! the Green-function self-test.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vpgrav::dynamic::DynamicSolver;
use vpgrav::io::csv::{write_convergence, write_time_series};
use vpgrav::io::{format_real, RunConfig, Snapshot};
use vpgrav::poisson::green_selftest;
use vpgrav::steady::{grad_h_table, SteadySolver};
use vpgrav::verify::{dynamic_config, run_battery};

/// Configuration used when `--config` is not given.
const BUILTIN_CONFIG: &str = "[physics]\ng = 10\neta = 1\nbeta = 1.5\n";

#[derive(Parser)]
#[command(
    name = "vpgrav",
    version,
    about = "Vlasov-Poisson under gravity in a periodic half-space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the steady state; writes snapshots and convergence.csv.
    Steady(Common),
    /// Evolve a perturbation of the steady state; writes strided snapshots and timeseries.csv.
    Evolve(Common),
    /// Run the inequality battery; writes report.txt. Fails on any hard failure.
    Verify(Common),
    /// Check the half-space Green function.
    GreenSelftest(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides verify.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when unset.
    #[arg(long, env = "VPGRAV_THREADS")]
    threads: Option<usize>,
}

impl Common {
    /// Loads the configuration, applies overrides and prints the result.
    fn setup(&self) -> Result<(RunConfig, PathBuf)> {
        if let Some(n) = self.threads {
            if n == 0 {
                bail!("--threads must be at least 1");
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("starting the worker pool")?;
        }
        let (mut cfg, base) = match &self.config {
            Some(path) => {
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (RunConfig::from_path(path)?, base)
            }
            None => (RunConfig::parse(BUILTIN_CONFIG)?, PathBuf::new()),
        };
        if let Some(seed) = self.seed {
            cfg.verify.seed = seed;
        }
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let echo = cfg.echo();
        println!("# resolved configuration\n{echo}");
        fs::write(self.out.join("config.toml"), &echo)?;
        Ok((cfg, base))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn steady(args: &Common) -> Result<ExitCode> {
    let (cfg, base) = args.setup()?;
    let sc = cfg.scenario(&base)?;
    let g = sc.params.g;
    let sol = SteadySolver::new(sc.params, sc.grid.clone(), sc.boundary, sc.steady)?.solve()?;
    Snapshot::from_distribution(&sol.h, g).write(&args.out.join("steady_h.snap"))?;
    let spatial = &sc.grid.spatial;
    Snapshot::from_spatial("density", spatial, sc.params.beta, g, sol.rho.values())?
        .write(&args.out.join("steady_rho.snap"))?;
    Snapshot::from_spatial(
        "potential",
        spatial,
        sc.params.beta,
        g,
        sol.phi.node_potential(),
    )?
    .write(&args.out.join("steady_phi.snap"))?;
    write_convergence(create(&args.out.join("convergence.csv"))?, &sol.history)?;
    println!(
        "steady: {} after {} iterations, sup |grad Phi| = {}",
        if sol.converged {
            "converged"
        } else {
            "not converged"
        },
        sol.iterations(),
        format_real(sol.phi.gradient_sup())
    );
    Ok(if sol.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn evolve(args: &Common) -> Result<ExitCode> {
    let (cfg, base) = args.setup()?;
    let sc = cfg.scenario(&base)?;
    let p = sc.params;
    let sol =
        SteadySolver::new(p, sc.grid.clone(), sc.boundary.clone(), sc.steady.clone())?.solve()?;
    let table = grad_h_table(&sol)?;
    let solver = DynamicSolver::new(&sol, &table, dynamic_config(&sc, &sol, &table)?)?;
    let f0 = sc.f0.build(&sc.grid, &p)?;
    let out = &args.out;
    let evolution = solver.evolve(f0, |state| {
        let tag = format!("{:06}", state.step);
        Snapshot::from_distribution(&state.f, p.g).write(&out.join(format!("f_{tag}.snap")))?;
        Snapshot::from_spatial("density", &sc.grid.spatial, p.beta, p.g, state.rho.values())?
            .write(&out.join(format!("rho_{tag}.snap")))
    })?;
    write_time_series(create(&out.join("timeseries.csv"))?, &evolution.samples)?;
    let r = &evolution.report;
    println!(
        "evolve: T = {}, lambda_inf = {}, lambda_fit = {}, decay bound {}, e_b = {}",
        format_real(evolution.last.t),
        format_real(r.lambda_infinity),
        r.lambda_fit.map_or_else(|| "none".into(), format_real),
        if r.decay_holds { "holds" } else { "violated" },
        format_real(r.e_b)
    );
    Ok(ExitCode::SUCCESS)
}

fn verify(args: &Common) -> Result<ExitCode> {
    let (cfg, base) = args.setup()?;
    let battery = run_battery(&cfg.scenario(&base)?)?;
    let text = battery.report.render();
    fs::write(args.out.join("report.txt"), &text)?;
    print!("{text}");
    for r in battery
        .report
        .records
        .iter()
        .filter(|r| r.label() == "warn")
    {
        eprintln!("warning: soft check {} failed", r.spec.id);
    }
    Ok(if battery.report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn green(args: &Common) -> Result<ExitCode> {
    args.setup()?;
    let r = green_selftest()?;
    let mut text = String::new();
    text.push_str(&format!(
        "c2 {}\nc2_error {}\n",
        format_real(r.c2),
        format_real(r.c2_error)
    ));
    text.push_str(&format!("dirichlet_max {}\n", format_real(r.dirichlet_max)));
    text.push_str(&format!(
        "remainder_near_max {}\n",
        format_real(r.remainder_near_max)
    ));
    text.push_str(&format!("tail_estimate {}\n", format_real(r.tail_estimate)));
    text.push_str(&format!(
        "decay_constant {}\ndecay_factor {}\n",
        format_real(r.decay_constant),
        format_real(r.decay_factor)
    ));
    for (d, b) in &r.decay_samples {
        text.push_str(&format!("b0 {} {}\n", format_real(*d), format_real(*b)));
    }
    text.push_str(&format!(
        "elliptic_constant {}\n",
        format_real(r.elliptic.constant)
    ));
    text.push_str(&format!("passed {}\n", r.passed));
    fs::write(args.out.join("green_selftest.txt"), &text)?;
    print!("{text}");
    Ok(if r.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Steady(a) => steady(a),
        Command::Evolve(a) => evolve(a),
        Command::Verify(a) => verify(a),
        Command::GreenSelftest(a) => green(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! `diverge` — equilibria, calibration, social optima, and command sweeps
//! for the two-exit bypass model, driven by TOML scenarios.
//!
//! Exit codes: 0 success, 2 parse/validation error, 3 solver
//! non-convergence, 4 I/O failure. Results go to stdout (fixed formatting,
//! byte-reproducible); diagnostics and notes go to stderr.

mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use diverge::calibrate::{
    calibrate, export_milp, CalibError, CalibOptions, CalibrationResult, ObservationSet,
};
use diverge::social::{minimize_social_cost, DEFAULT_SOCIAL_GRID};
use diverge::stackelberg::{bypass_threshold, optimal_beta, sweep_beta, StackelbergError};
use diverge::{
    check_uniqueness_conditions, grid_oracle, solve_equilibrium, DemandConfig, OccupancyOffsets,
    SolverError,
};

use output::{atomic_write, equilibrium_csv, f12, f9, social_curve_csv, sweep_csv, CurveRow};
use scenario::load_scenario;

#[derive(Parser)]
#[command(name = "diverge", version, about = "Two-exit diverge bypass model")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the route-choice equilibrium of a scenario.
    Eq {
        #[arg(long)]
        scenario: PathBuf,
        /// Cross-check against the exhaustive grid certificate.
        #[arg(long)]
        oracle: bool,
        /// Grid step of the cross-check.
        #[arg(long, default_value_t = 1e-3)]
        grid_step: f64,
        /// Write the equilibrium row as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit cost coefficients to an observation CSV.
    Calibrate {
        /// Observations: `f1,x1s,x1b,x2s,x2b[,d]`.
        #[arg(long)]
        data: PathBuf,
        /// Tie both exits to one parameter set.
        #[arg(long)]
        symmetric: bool,
        #[arg(long, default_value_t = 64)]
        starts: usize,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        /// Violation margin on the complementarity products.
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        /// Big-M constant of the exported program.
        #[arg(long, default_value_t = 1e6)]
        big_m: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the fit as a mixed-integer program (LP format).
        #[arg(long)]
        export_milp: Option<PathBuf>,
        /// Write the fitted costs as a scenario fragment.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the social optimum against the equilibrium.
    Social {
        #[arg(long)]
        scenario: PathBuf,
        /// Scan resolution of the optimizer.
        #[arg(long, default_value_t = DEFAULT_SOCIAL_GRID)]
        grid: f64,
        /// Demand-split step of the optional curve output.
        #[arg(long, default_value_t = 0.05)]
        f1_step: f64,
        /// Sweep f1 over [0, 1] and write both curves as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the commanded-steadfast share beta on exit 1.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Controlled share of exit 1's demand.
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 101)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure classes with their process exit codes.
pub enum Failure {
    /// Exit 2: bad arguments, documents, or model parameters.
    Validation(String),
    /// Exit 3: a solve did not reach the convergence certificate.
    NonConvergence(String),
    /// Exit 4: filesystem trouble.
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::NonConvergence(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::NonConvergence(m) | Failure::Io(m) => m,
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Failure {
        match e {
            SolverError::EmptyCertificateCertified | SolverError::EmptyCertificateUncertified => {
                Failure::NonConvergence(e.to_string())
            }
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<StackelbergError> for Failure {
    fn from(e: StackelbergError) -> Failure {
        match e {
            StackelbergError::Solver(s) => s.into(),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<CalibError> for Failure {
    fn from(e: CalibError) -> Failure {
        match e {
            CalibError::Io(io) => Failure::Io(io.to_string()),
            CalibError::Csv(c) if c.is_io_error() => Failure::Io(c.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Eq {
            scenario,
            oracle,
            grid_step,
            out,
        } => cmd_eq(&scenario, oracle, grid_step, out.as_deref()),
        Command::Calibrate {
            data,
            symmetric,
            starts,
            iters,
            eps,
            big_m,
            seed,
            export_milp,
            out,
        } => {
            let opts = CalibOptions {
                eps,
                big_m,
                symmetric,
                starts,
                iters,
                seed,
            };
            cmd_calibrate(&data, &opts, export_milp.as_deref(), out.as_deref())
        }
        Command::Social {
            scenario,
            grid,
            f1_step,
            out,
        } => cmd_social(&scenario, grid, f1_step, out.as_deref()),
        Command::Sweep {
            scenario,
            alpha,
            steps,
            out,
        } => cmd_sweep(&scenario, alpha, steps, &out),
    }
}

fn cmd_eq(
    scenario: &std::path::Path,
    oracle: bool,
    grid_step: f64,
    out: Option<&std::path::Path>,
) -> Result<(), Failure> {
    let sc = load_scenario(scenario)?;
    let eq = solve_equilibrium(&sc.demand, &sc.costs, &sc.offsets, &sc.solver)?;
    if !eq.converged {
        return Err(Failure::NonConvergence(format!(
            "no equilibrium certificate after {} iterations (residual {})",
            eq.iterations,
            f12(eq.residual)
        )));
    }

    let mut stdout = String::new();
    stdout.push_str(&format!("f1 {}\n", f9(sc.demand.f1())));
    stdout.push_str(&format!("f2 {}\n", f9(sc.demand.f2())));
    for (name, v) in [
        ("x1s", eq.flow.x1s),
        ("x1b", eq.flow.x1b),
        ("x2s", eq.flow.x2s),
        ("x2b", eq.flow.x2b),
        ("j1s", eq.costs.j1s),
        ("j1b", eq.costs.j1b),
        ("j2s", eq.costs.j2s),
        ("j2b", eq.costs.j2b),
    ] {
        stdout.push_str(&format!("{name} {}\n", f9(v)));
    }
    stdout.push_str(&format!("residual {}\n", f12(eq.residual)));
    stdout.push_str(&format!("iterations {}\n", eq.iterations));
    let unique = check_uniqueness_conditions(&sc.costs);
    stdout.push_str(&format!("unique_certified {}\n", unique.all_hold));

    if oracle {
        let candidates = grid_oracle(&sc.demand, &sc.costs, &sc.offsets, grid_step)?;
        let best = candidates
            .iter()
            .min_by(|a, b| a.residual.total_cmp(&b.residual))
            .expect("grid_oracle returns at least one candidate");
        let dev = eq
            .flow
            .as_array()
            .iter()
            .zip(best.flow.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        stdout.push_str(&format!("oracle_clusters {}\n", candidates.len()));
        stdout.push_str(&format!("oracle_max_dev {}\n", f9(dev)));
    }

    if let Some(path) = out {
        atomic_write(path, equilibrium_csv(&sc.demand, &eq).as_bytes())?;
        eprintln!("wrote {}", path.display());
    }
    print!("{stdout}");
    Ok(())
}

fn cmd_calibrate(
    data: &std::path::Path,
    opts: &CalibOptions,
    milp: Option<&std::path::Path>,
    out: Option<&std::path::Path>,
) -> Result<(), Failure> {
    let file = std::fs::File::open(data)
        .map_err(|e| Failure::Io(format!("reading {}: {e}", data.display())))?;
    let set = ObservationSet::read_csv(file)?;
    let fit = calibrate(&set, opts)?;

    if let Some(path) = milp {
        let mut buf = Vec::new();
        export_milp(&set, opts, &mut buf)?;
        atomic_write(path, &buf)?;
        eprintln!("wrote {}", path.display());
    }
    if let Some(path) = out {
        atomic_write(path, scenario_fragment(&fit, set.len()).as_bytes())?;
        eprintln!("wrote {}", path.display());
    }

    print!("{}", fit_summary(&fit));
    Ok(())
}

fn fit_summary(fit: &CalibrationResult) -> String {
    let c = &fit.costs;
    format!(
        "violations {}\nhinge {}\nct1 {}\ncc1 {}\ngamma1 {}\nct2 {}\ncc2 {}\ngamma2 {}\n",
        fit.violations,
        f9(fit.hinge),
        f9(c.exit1.ct),
        f9(c.exit1.cc),
        f9(c.exit1.gamma),
        f9(c.exit2.ct),
        f9(c.exit2.cc),
        f9(c.exit2.gamma),
    )
}

fn scenario_fragment(fit: &CalibrationResult, observations: usize) -> String {
    let c = &fit.costs;
    format!(
        "# fitted to {observations} observations: violations = {}, hinge = {}\n\
         [costs.exit1]\nct = {}\ncc = {}\ngamma = {}\n\n\
         [costs.exit2]\nct = {}\ncc = {}\ngamma = {}\n",
        fit.violations,
        f9(fit.hinge),
        f9(c.exit1.ct),
        f9(c.exit1.cc),
        f9(c.exit1.gamma),
        f9(c.exit2.ct),
        f9(c.exit2.cc),
        f9(c.exit2.gamma),
    )
}

fn cmd_social(
    scenario: &std::path::Path,
    grid: f64,
    f1_step: f64,
    out: Option<&std::path::Path>,
) -> Result<(), Failure> {
    let sc = load_scenario(scenario)?;
    if sc.offsets != OccupancyOffsets::ZERO {
        eprintln!("note: social optimization treats all demand as free; scenario offsets ignored");
    }
    let opt = minimize_social_cost(&sc.demand, &sc.costs, grid, &sc.solver)?;

    let mut stdout = String::new();
    for (name, v) in [
        ("opt_x1s", opt.flow.x1s),
        ("opt_x1b", opt.flow.x1b),
        ("opt_x2s", opt.flow.x2s),
        ("opt_x2b", opt.flow.x2b),
        ("opt_cost", opt.cost),
        ("eq_cost", opt.equilibrium_cost),
        ("ratio", opt.ratio),
    ] {
        stdout.push_str(&format!("{name} {}\n", f9(v)));
    }

    if let Some(path) = out {
        if !(f1_step.is_finite() && f1_step > 0.0 && f1_step <= 0.5) {
            return Err(Failure::Validation(format!(
                "--f1-step must lie in (0, 0.5], got {f1_step}"
            )));
        }
        let mut rows = Vec::new();
        let mut f1 = 0.0_f64;
        let mut k = 0u32;
        while f1 < 1.0 + 1e-12 {
            let demand = DemandConfig::from_f1(f1.min(1.0)).map_err(SolverError::from)?;
            let eq = solve_equilibrium(&demand, &sc.costs, &OccupancyOffsets::ZERO, &sc.solver)?;
            if !eq.converged {
                return Err(Failure::NonConvergence(format!(
                    "curve point f1={} did not converge",
                    f9(f1)
                )));
            }
            let optimum = minimize_social_cost(&demand, &sc.costs, grid, &sc.solver)?;
            rows.push(CurveRow {
                f1: f1.min(1.0),
                eq_cost: optimum.equilibrium_cost,
                eq,
                opt: optimum,
            });
            k += 1;
            f1 = k as f64 * f1_step;
        }
        atomic_write(path, social_curve_csv(&rows).as_bytes())?;
        eprintln!("wrote {}", path.display());
    }

    print!("{stdout}");
    Ok(())
}

fn cmd_sweep(
    scenario: &std::path::Path,
    alpha: f64,
    steps: usize,
    out: &std::path::Path,
) -> Result<(), Failure> {
    let sc = load_scenario(scenario)?;
    if sc.offsets != OccupancyOffsets::ZERO {
        return Err(Failure::Validation(
            "sweep derives exit-1 offsets from --alpha and beta; scenario offsets must be zero"
                .into(),
        ));
    }

    let rows = sweep_beta(&sc.demand, &sc.costs, alpha, steps, &sc.solver)?;
    atomic_write(out, sweep_csv(&rows).as_bytes())?;
    eprintln!("wrote {}", out.display());

    if let Some(bad) = rows.iter().find(|r| !r.converged) {
        return Err(Failure::NonConvergence(format!(
            "sweep row beta={} did not converge (residual {})",
            f9(bad.beta),
            f12(bad.residual)
        )));
    }

    let mut stdout = String::new();
    match bypass_threshold(&rows) {
        Some(beta) => stdout.push_str(&format!("threshold {}\n", f9(beta))),
        None => stdout.push_str("threshold none\n"),
    }
    let (beta, cost) = optimal_beta(&sc.demand, &sc.costs, alpha, steps, &sc.solver)?;
    stdout.push_str(&format!("optimal_beta {}\n", f9(beta)));
    stdout.push_str(&format!("optimal_cost {}\n", f9(cost)));
    print!("{stdout}");
    Ok(())
}

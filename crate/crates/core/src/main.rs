//! Command-line front end: parameter ingestion, solve/shoot/sweep/eval/
//! simulate commands, CSV emission.
//!
//! Data goes to standard output and files under `--out`; diagnostics go to
//! standard error. The exit code is 0 on success and maps each error kind to
//! a distinct nonzero value (see `exit_code`).

use clap::{Parser, Subcommand};
use merton_indivisible::config::FileConfig;
use merton_indivisible::montecarlo::{self, SimConfig};
use merton_indivisible::table;
use merton_indivisible::{
    find_free_boundary, hjb_residual_on_grid, integrate_shot, Envelopes, Error, ModelParams,
    Policy, Result,
};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "merton-indivisible",
    about = "Free-boundary solver and Monte Carlo bench for optimal consumption with one indivisible asset"
)]
struct Cli {
    /// Key=value configuration file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV tables and summaries.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Drift of the tradable asset.
    #[arg(long, global = true)]
    mu: Option<f64>,
    /// Volatility of the tradable asset.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Drift of the indivisible asset.
    #[arg(long, global = true)]
    mu_tilde: Option<f64>,
    /// Volatility of the indivisible asset.
    #[arg(long, global = true)]
    sigma_tilde: Option<f64>,
    /// Discount rate.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Utility exponent in (0, 1).
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Local error tolerance of the shot integrator.
    #[arg(long, global = true)]
    ode_tol: Option<f64>,
    /// Width at which boundary bisection stops.
    #[arg(long, global = true)]
    bisect_tol: Option<f64>,
    /// Right end of the integration domain in the ratio coordinate.
    #[arg(long, global = true)]
    z_max: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate parameters and print the derived closed-form constants.
    Validate,
    /// Locate the free boundary; write summary.txt and k_table.csv.
    Solve,
    /// Integrate a single shot from a candidate boundary; write k_shot.csv.
    Shoot {
        #[arg(long)]
        z_star: f64,
    },
    /// Classify a list of candidate boundaries; write classification.csv and
    /// one k_<i>.csv per candidate.
    Sweep {
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        z_stars: Vec<f64>,
    },
    /// Print value, consumption level and sell decision at a state (x, y).
    Eval {
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
    },
    /// Estimate the value at (x0, y0) by Monte Carlo under the solved policy.
    Simulate {
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        paths: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long)]
        y0: Option<f64>,
        /// Pair consecutive paths with negated increments.
        #[arg(long)]
        antithetic: bool,
        /// Also write per_path.csv with one row per simulated path.
        #[arg(long)]
        per_path: bool,
    },
}

/// Fully resolved run settings: defaults, overridden by the configuration
/// file, overridden by flags.
struct Resolved {
    params: ModelParams,
    ode_tol: f64,
    bisect_tol: f64,
    z_max: f64,
    sim: SimConfig,
}

fn resolve(cli: &Cli) -> Result<Resolved> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };

    let need = |flag: Option<f64>, file_v: Option<f64>, name: &str| -> Result<f64> {
        flag.or(file_v).ok_or_else(|| {
            Error::Config(format!(
                "{name} missing: pass --{} or set it in the config file",
                name.replace('_', "-")
            ))
        })
    };

    let params = ModelParams::new(
        need(cli.mu, file.mu, "mu")?,
        need(cli.sigma, file.sigma, "sigma")?,
        need(cli.mu_tilde, file.mu_tilde, "mu_tilde")?,
        need(cli.sigma_tilde, file.sigma_tilde, "sigma_tilde")?,
        need(cli.beta, file.beta, "beta")?,
        need(cli.alpha, file.alpha, "alpha")?,
    )?;

    let defaults = SimConfig::default();
    Ok(Resolved {
        params,
        ode_tol: cli.ode_tol.or(file.ode_tol).unwrap_or(1e-10),
        bisect_tol: cli.bisect_tol.or(file.bisect_tol).unwrap_or(1e-7),
        z_max: cli.z_max.or(file.z_max).unwrap_or(50.0),
        sim: SimConfig {
            dt: file.dt.unwrap_or(defaults.dt),
            horizon: file.horizon.unwrap_or(defaults.horizon),
            n_paths: file.paths.unwrap_or(defaults.n_paths),
            seed: file.seed.unwrap_or(defaults.seed),
            x0: file.x0.unwrap_or(defaults.x0),
            y0: file.y0.unwrap_or(defaults.y0),
            antithetic: file.antithetic.unwrap_or(defaults.antithetic),
        },
    })
}

fn solve_policy(r: &Resolved) -> Result<Policy> {
    let boundary = find_free_boundary(&r.params, r.z_max, r.ode_tol, r.bisect_tol)?;
    Policy::new(r.params, boundary)
}

fn cmd_validate(r: &Resolved) -> Result<()> {
    let p = &r.params;
    let m = p.merton();
    println!("mu={}", p.mu());
    println!("sigma={}", p.sigma());
    println!("mu_tilde={}", p.mu_tilde());
    println!("sigma_tilde={}", p.sigma_tilde());
    println!("beta={}", p.beta());
    println!("alpha={}", p.alpha());
    println!("beta_floor={}", p.beta_floor());
    println!("a={}", m.a);
    println!("c_rate={}", m.c_rate);
    println!("z_bar={}", p.zbar_upper_bound());
    Ok(())
}

fn cmd_solve(r: &Resolved, out: &Path) -> Result<()> {
    let boundary = find_free_boundary(&r.params, r.z_max, r.ode_tol, r.bisect_tol)?;
    let m = r.params.merton();
    let env = Envelopes::new(&r.params);
    let residual = hjb_residual_on_grid(&r.params, &boundary.solution);

    std::fs::create_dir_all(out)?;
    table::write_k_table(&out.join("k_table.csv"), &boundary.solution, &env)?;

    let pairs: Vec<(&str, String)> = vec![
        ("z_hat", format!("{:.16e}", boundary.z_hat)),
        ("z_bar", format!("{:.16e}", r.params.zbar_upper_bound())),
        ("a", format!("{:.16e}", m.a)),
        ("c_rate", format!("{:.16e}", m.c_rate)),
        (
            "classification",
            boundary.solution.classification.kind.to_string(),
        ),
        (
            "z_event",
            format!("{:.16e}", boundary.solution.classification.z_event),
        ),
        ("bracket_low", format!("{:.16e}", boundary.bracket_low)),
        ("bracket_high", format!("{:.16e}", boundary.bracket_high)),
        ("iterations", boundary.iterations.to_string()),
        ("grid_points", boundary.solution.grid.len().to_string()),
        ("scaled_residual", format!("{residual:.3e}")),
        ("ode_tol", format!("{:e}", r.ode_tol)),
        ("bisect_tol", format!("{:e}", r.bisect_tol)),
        ("z_max", format!("{}", r.z_max)),
    ];
    table::write_summary(&out.join("summary.txt"), &pairs)?;
    for (k, v) in &pairs {
        println!("{k}={v}");
    }
    Ok(())
}

fn cmd_shoot(r: &Resolved, out: &Path, z_star: f64) -> Result<()> {
    let sol = integrate_shot(&r.params, z_star, r.z_max, r.ode_tol)?;
    let env = Envelopes::new(&r.params);
    std::fs::create_dir_all(out)?;
    table::write_k_table(&out.join("k_shot.csv"), &sol, &env)?;
    println!("z_star={z_star:.16e}");
    println!("classification={}", sol.classification.kind);
    println!("z_event={:.16e}", sol.classification.z_event);
    println!("grid_points={}", sol.grid.len());
    Ok(())
}

fn cmd_sweep(r: &Resolved, out: &Path, z_stars: &[f64]) -> Result<()> {
    let env = Envelopes::new(&r.params);
    std::fs::create_dir_all(out)?;
    let mut rows = Vec::with_capacity(z_stars.len());
    for (i, &z_star) in z_stars.iter().enumerate() {
        let sol = integrate_shot(&r.params, z_star, r.z_max, r.ode_tol)?;
        table::write_k_table(&out.join(format!("k_{}.csv", i + 1)), &sol, &env)?;
        println!(
            "shot_{}: z_star={z_star} classification={} z_event={:.9}",
            i + 1,
            sol.classification.kind,
            sol.classification.z_event
        );
        rows.push((z_star, sol.classification.kind, sol.classification.z_event));
    }
    table::write_classification(&out.join("classification.csv"), &rows)?;
    Ok(())
}

fn cmd_eval(r: &Resolved, x: f64, y: f64) -> Result<()> {
    let pol = solve_policy(r)?;
    println!("value={:.16e}", pol.value(x, y)?);
    println!("consumption_level={:.16e}", pol.consumption_level(x, y)?);
    println!("should_sell={}", pol.should_sell(x, y));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(r: &Resolved, out: &Path, sim: SimConfig, per_path: bool) -> Result<()> {
    let pol = solve_policy(r)?;
    let (est, records) = montecarlo::estimate_value_detailed(&pol, &sim)?;
    println!("mean={:.16e}", est.mean);
    println!("stderr={:.16e}", est.stderr);
    println!("n_paths={}", est.n_paths);
    println!("sold_fraction={}", est.sold_fraction);
    println!("clamp_events={}", est.clamp_events);
    println!("total_steps={}", est.total_steps);
    println!("resampled_paths={}", est.resampled_paths);
    println!("truncation_tail={:.16e}", est.truncation_tail);
    if est.clamp_flagged() {
        eprintln!(
            "warning: {} clamp events over {} steps exceed 0.1%; increase --z-max",
            est.clamp_events, est.total_steps
        );
    }
    if per_path {
        std::fs::create_dir_all(out)?;
        let mut text = String::from("path,payoff,sold,steps\n");
        for (i, rec) in records.iter().enumerate() {
            text.push_str(&format!(
                "{},{:.16e},{},{}\n",
                i, rec.payoff, rec.sold, rec.steps
            ));
        }
        std::fs::write(out.join("per_path.csv"), text)?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 1,
        Error::Range(_) => 2,
        Error::BetaTooSmall(_) => 3,
        Error::DriftCondition(_) => 4,
        Error::NoBracket(_) => 5,
        Error::StepFailure { .. } => 6,
        Error::OutOfRange { .. } => 7,
        Error::NonFinite(_) => 8,
        Error::BoundaryUnstable { .. } => 9,
        Error::Config(_) => 10,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let r = resolve(cli)?;
    match &cli.command {
        Command::Validate => cmd_validate(&r),
        Command::Solve => cmd_solve(&r, &cli.out),
        Command::Shoot { z_star } => cmd_shoot(&r, &cli.out, *z_star),
        Command::Sweep { z_stars } => cmd_sweep(&r, &cli.out, z_stars),
        Command::Eval { x, y } => cmd_eval(&r, *x, *y),
        Command::Simulate {
            dt,
            horizon,
            paths,
            seed,
            x0,
            y0,
            antithetic,
            per_path,
        } => {
            let sim = SimConfig {
                dt: dt.unwrap_or(r.sim.dt),
                horizon: horizon.unwrap_or(r.sim.horizon),
                n_paths: paths.unwrap_or(r.sim.n_paths),
                seed: seed.unwrap_or(r.sim.seed),
                x0: x0.unwrap_or(r.sim.x0),
                y0: y0.unwrap_or(r.sim.y0),
                antithetic: *antithetic || r.sim.antithetic,
            };
            cmd_simulate(&r, &cli.out, sim, *per_path)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

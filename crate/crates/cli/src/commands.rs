//! Subcommand implementations. Each returns an [`Output`] that the caller emits.

use std::io::Write;
use std::path::{Path, PathBuf};

use bai_core::diffusion::Environment;
use bai_core::finite_sample::{scaled_regret_curve, Family, BERNOULLI_SIGMA};
use bai_core::game::solve_equilibrium;
use bai_core::policy::{PolicySpec, SamplingRule};
use bai_core::regret::{regret_closed_form, regret_monte_carlo, RegretEstimate};
use bai_core::Error;
use serde::Serialize;
use serde_json::Value;

use crate::args::{RegretArgs, SimulateArgs, SolveArgs, SweepArgs, VerifyArgs};
use crate::error::{CliError, Result};
use crate::format::{number, Csv};
use crate::manifest::{RunManifest, DEFAULT_SEED};
use crate::verify::{self, VerifyConfig};

pub const SWEEP_COLUMNS: [&str; 5] = ["gamma", "c", "delta", "side", "regret"];
pub const SIMULATE_COLUMNS: [&str; 10] =
    ["family", "policy", "n", "gap", "h1", "h0", "scaled_regret", "std_error", "replications", "seed"];

#[derive(Debug, Clone, Copy, Default)]
pub struct Context {
    pub wall_clock: bool,
}

#[derive(Debug)]
pub enum Output {
    Json(Value),
    Table { csv: Csv, manifest: RunManifest, out: Option<PathBuf> },
    Report { text: String, passed: bool },
}

impl Output {
    /// Writes the output and reports whether the command succeeded.
    ///
    /// Tables go to `out` with a `<out>.manifest.json` sidecar, or to stdout
    /// with the manifest as one JSON line on stderr.
    pub fn emit(self, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<bool> {
        match self {
            Output::Json(value) => {
                writeln!(stdout, "{}", serde_json::to_string_pretty(&value)?)?;
                Ok(true)
            }
            Output::Table { csv, manifest, out: Some(path) } => {
                std::fs::write(&path, csv.as_str()).map_err(|e| CliError::io(&path, e))?;
                let sidecar = sidecar_path(&path);
                let json = serde_json::to_string_pretty(&manifest)? + "\n";
                std::fs::write(&sidecar, json).map_err(|e| CliError::io(&sidecar, e))?;
                Ok(true)
            }
            Output::Table { csv, manifest, out: None } => {
                stdout.write_all(csv.as_str().as_bytes())?;
                writeln!(stderr, "{}", serde_json::to_string(&manifest)?)?;
                Ok(true)
            }
            Output::Report { text, passed } => {
                stdout.write_all(text.as_bytes())?;
                Ok(passed)
            }
        }
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn solve(args: &SolveArgs, ctx: Context) -> Result<Output> {
    let solution = solve_equilibrium(args.sigma1, args.sigma0, args.tol)?;
    let manifest = RunManifest::new("solve", args, DEFAULT_SEED, ctx.wall_clock)?;
    Ok(Output::Json(manifest.attach(&solution)?))
}

#[derive(Serialize)]
struct RegretReport {
    closed_form: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<RegretEstimate>,
}

pub fn regret(args: &RegretArgs, ctx: Context) -> Result<Output> {
    let env = Environment::new(args.mu1, args.mu0, args.sigma1, args.sigma0)?;
    let closed_form = regret_closed_form(args.gamma, args.c, &env)?;
    let monte_carlo = match args.mc_reps {
        Some(reps) => {
            let policy = PolicySpec::new(SamplingRule::fixed(args.gamma)?, args.c)?;
            Some(regret_monte_carlo(&policy, &env, reps, args.seed)?)
        }
        None => None,
    };
    let manifest = RunManifest::new("regret", args, args.seed, ctx.wall_clock)?;
    Ok(Output::Json(manifest.attach(&RegretReport { closed_form, monte_carlo })?))
}

pub fn sweep(args: &SweepArgs, ctx: Context) -> Result<Output> {
    if args.delta_grid.values.iter().any(|&d| d < 0.0) {
        return Err(Error::Usage("delta grid must be nonnegative".into()).into());
    }
    let mut csv = Csv::new(&SWEEP_COLUMNS);
    for &gamma in &args.gamma_grid.values {
        for &c in &args.c_grid.values {
            for &delta in &args.delta_grid.values {
                let half = 0.5 * delta;
                for (side, mu1, mu0) in [("theta1", half, -half), ("theta0", -half, half)] {
                    let env = Environment::new(mu1, mu0, args.sigma1, args.sigma0)?;
                    let regret = regret_closed_form(gamma, c, &env)?;
                    csv.row(&[number(gamma), number(c), number(delta), side.to_owned(), number(regret)]);
                }
            }
        }
    }
    let manifest = RunManifest::new("sweep", args, DEFAULT_SEED, ctx.wall_clock)?;
    Ok(Output::Table { csv, manifest, out: args.out.clone() })
}

pub fn simulate(args: &SimulateArgs, ctx: Context) -> Result<Output> {
    let sigmas = match args.family {
        Family::Gaussian => (args.sigma1, args.sigma0),
        Family::Bernoulli => (BERNOULLI_SIGMA, BERNOULLI_SIGMA),
    };
    let policy = args.policy.to_spec(sigmas.0, sigmas.1, args.rho, args.batch)?;
    let curve = scaled_regret_curve(
        args.family,
        sigmas,
        args.placement,
        &policy,
        &args.gap_grid.values,
        &args.n_grid.values,
        args.reps,
        args.seed,
    )?;
    let mut csv = Csv::new(&SIMULATE_COLUMNS);
    for cell in &curve.cells {
        csv.row(&[
            args.family.to_string(),
            args.policy.to_string(),
            cell.n.to_string(),
            number(cell.gap),
            number(cell.h1),
            number(cell.h0),
            number(cell.estimate.mean),
            number(cell.estimate.std_error),
            cell.estimate.replications.to_string(),
            args.seed.to_string(),
        ]);
    }
    let manifest = RunManifest::new("simulate", args, args.seed, ctx.wall_clock)?;
    Ok(Output::Table { csv, manifest, out: args.out.clone() })
}

/// Runs the acceptance checks. `exe` is the `bai` binary used by the determinism check.
pub fn verify(args: &VerifyArgs, exe: &Path, progress: &mut dyn Write) -> Result<Output> {
    let config = if args.fast { VerifyConfig::fast() } else { VerifyConfig::full() };
    let reports = verify::run_all(&config, exe, |r| {
        let _ = writeln!(progress, "criterion {} finished in {:.1?}", r.id, r.elapsed);
    });
    Ok(Output::Report { text: verify::table(&reports), passed: reports.iter().all(|r| r.passed) })
}

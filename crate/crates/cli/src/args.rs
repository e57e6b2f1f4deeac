//! Command-line grammar.

use std::fmt::Display;
use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::str::FromStr;

use bai_core::finite_sample::{Family, Placement, DEFAULT_RHO};
use bai_core::policy::PolicyName;
use clap::{Args, Parser, Subcommand};
use serde::{Serialize, Serializer};

use crate::manifest::DEFAULT_SEED;

/// Largest number of points a grid flag may expand to.
pub const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Debug, Parser)]
#[command(name = "bai", version, about = "Minimax-regret best-arm identification with two arms")]
pub struct Cli {
    /// Worker threads for Monte Carlo runs [default: available parallelism].
    #[arg(long, global = true)]
    pub threads: Option<NonZeroUsize>,
    /// Record the wall-clock time in manifests instead of the fixed epoch.
    #[arg(long, global = true)]
    pub stamp: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the minimax game and print the equilibrium as JSON.
    Solve(SolveArgs),
    /// Regret of a threshold policy, closed form and optionally Monte Carlo.
    Regret(RegretArgs),
    /// Regret surface of nature's centred points over a (γ, c, δ) grid, as CSV.
    Sweep(SweepArgs),
    /// √n-scaled finite-sample regret over budgets and gaps, as CSV.
    Simulate(SimulateArgs),
    /// Run the acceptance checks and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct SolveArgs {
    #[arg(long)]
    pub sigma1: f64,
    #[arg(long)]
    pub sigma0: f64,
    /// Largest exploitability accepted on the verification grids.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct RegretArgs {
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub mu1: f64,
    #[arg(long)]
    pub mu0: f64,
    #[arg(long)]
    pub sigma1: f64,
    #[arg(long)]
    pub sigma0: f64,
    /// Monte Carlo replications; omitted means closed form only.
    #[arg(long)]
    pub mc_reps: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub sigma1: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma0: f64,
    /// Sampling fractions as `start:stop:step`.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_grid: FloatGrid,
    /// Thresholds as `start:stop:step`.
    #[arg(long, allow_hyphen_values = true)]
    pub c_grid: FloatGrid,
    /// Gaps as `start:stop:step`.
    #[arg(long, allow_hyphen_values = true)]
    pub delta_grid: FloatGrid,
    /// Write the CSV here, with the manifest in `<out>.manifest.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    #[serde(serialize_with = "as_display")]
    pub family: Family,
    /// neyman, equal, two-stage, adaptive-neyman or fixed:<gamma>.
    #[arg(long)]
    #[serde(serialize_with = "as_display")]
    pub policy: PolicyName,
    /// Budgets as a comma list.
    #[arg(long)]
    pub n_grid: CountList,
    /// Gaps `h1 - h0` as a comma list or `start:stop:step`.
    #[arg(long, allow_hyphen_values = true)]
    pub gap_grid: FloatGrid,
    #[arg(long)]
    pub reps: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Gaussian outcome standard deviations (Bernoulli uses 1/2).
    #[arg(long, default_value_t = 1.0)]
    pub sigma1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma0: f64,
    /// Pilot exponent of the two-stage rule.
    #[arg(long, default_value_t = DEFAULT_RHO)]
    pub rho: f64,
    /// Periods between re-estimates of the adaptive rule.
    #[arg(long, default_value_t = 100)]
    pub batch: u32,
    /// `lfp` or a weight w with h1 = w gap, h0 = -(1 - w) gap.
    #[arg(long, default_value = "lfp")]
    #[serde(serialize_with = "as_display")]
    pub placement: Placement,
    /// Write the CSV here, with the manifest in `<out>.manifest.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// 10^4 replications and doubled tolerances.
    #[arg(long)]
    pub fast: bool,
}

fn as_display<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(value)
}

/// Real grid given as `start:stop:step` or as a comma list.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatGrid {
    text: String,
    pub values: Vec<f64>,
}

impl FromStr for FloatGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let values = if s.contains(':') { parse_range(s)? } else { parse_list(s)? };
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(format!("grid value {bad} is not finite"));
        }
        Ok(Self { text: s.to_owned(), values })
    }
}

impl Serialize for FloatGrid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

/// Comma list of positive integers.
#[derive(Debug, Clone, PartialEq)]
pub struct CountList {
    text: String,
    pub values: Vec<u64>,
}

impl FromStr for CountList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(Self { text: s.to_owned(), values: parse_list(s)? })
    }
}

impl Serialize for CountList {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',').map(|item| item.trim().parse().map_err(|_| format!("cannot parse `{item}` in list `{s}`"))).collect()
}

fn parse_range(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<f64> =
        parse_list::<f64>(&s.replace(':', ",")).map_err(|_| format!("expected `start:stop:step`, got `{s}`"))?;
    let [start, stop, step] = parts[..] else {
        return Err(format!("expected `start:stop:step`, got `{s}`"));
    };
    if !(step > 0.0) || !(stop >= start) {
        return Err(format!("grid `{s}` needs step > 0 and stop >= start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() + 1.0;
    if !(count <= MAX_GRID_POINTS as f64) {
        return Err(format!("grid `{s}` has more than {MAX_GRID_POINTS} points"));
    }
    Ok((0..count as usize).map(|i| start + i as f64 * step).collect())
}

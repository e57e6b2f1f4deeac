//! Acceptance checks. Reference values come from [`oracle`], never from the
//! production solvers under test.

pub mod oracle;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bai_core::diffusion::{log_likelihood_ratio, simulate_path_with, Environment, DEFAULT_STEPS};
use bai_core::finite_sample::{run_trial, two_stage_trial, Family, LocalEnvironment, TrialConfig};
use bai_core::game::{divergence_probe, solve_equilibrium, PROBE_LEVELS};
use bai_core::normal::{solve_delta_star, v_star};
use bai_core::policy::{PolicySpec, SamplingRule, TwoPointPrior};
use bai_core::regret::{max_regret_at_neyman, regret_closed_form, regret_monte_carlo, RegretEstimate};
use bai_core::seed::{derive_seed, map_replications};
use bai_core::stats::{ks_one_sample, ks_two_sample};

const FAST_REPLICATIONS: u64 = 10_000;
const MASTER_SEED: u64 = 20_240_229;
const ADAPTIVE_BATCH: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    /// Replication cap; `None` runs the full counts.
    pub replication_cap: Option<u64>,
    /// Multiplier applied to every numerical tolerance.
    pub widen: f64,
}

impl VerifyConfig {
    pub fn full() -> Self {
        Self { replication_cap: None, widen: 1.0 }
    }

    pub fn fast() -> Self {
        Self { replication_cap: Some(FAST_REPLICATIONS), widen: 2.0 }
    }

    fn reps(&self, full: u64) -> u64 {
        self.replication_cap.map_or(full, |cap| cap.min(full))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl CriterionReport {
    pub fn status(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }

    pub fn line(&self) -> String {
        format!("{:>2}  {}  {}: {}", self.id, self.status(), self.title, self.detail)
    }
}

struct Check {
    passed: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self { passed: true, notes: Vec::new() }
    }

    fn require(&mut self, ok: bool, note: String) {
        self.passed &= ok;
        self.notes.push(if ok { note } else { format!("FAILED {note}") });
    }

    fn finish(self, id: u8, title: &'static str, started: Instant, limit: Option<Duration>) -> CriterionReport {
        let elapsed = started.elapsed();
        let mut passed = self.passed;
        let mut notes = self.notes;
        if let Some(limit) = limit {
            if elapsed > limit {
                passed = false;
                notes.push(format!("FAILED runtime {elapsed:.1?} exceeds {limit:?}"));
            }
        }
        CriterionReport { id, title, passed, detail: notes.join("; "), elapsed }
    }
}

fn fail(id: u8, title: &'static str, started: Instant, err: impl std::fmt::Display) -> CriterionReport {
    let mut check = Check::new();
    check.require(false, format!("error: {err}"));
    check.finish(id, title, started, None)
}

fn combined_se(a: &RegretEstimate, b: &RegretEstimate) -> f64 {
    a.std_error.hypot(b.std_error)
}

/// Equilibrium recovery for four variance pairs.
pub fn criterion_1(cfg: &VerifyConfig) -> CriterionReport {
    const TITLE: &str = "equilibrium recovery";
    let started = Instant::now();
    let delta = oracle::delta_star_bisection();
    let mut check = Check::new();
    for (s1, s0) in [(1.0, 1.0), (2.0, 1.0), (1.0, 5.0), (0.3, 0.7)] {
        let sol = match solve_equilibrium(s1, s0, 1e-8) {
            Ok(sol) => sol,
            Err(e) => return fail(1, TITLE, started, e),
        };
        let e_gamma = (sol.gamma_star - s1 / (s1 + s0)).abs();
        let e_c = sol.c_star.abs();
        let e_delta = (sol.delta_prior_star - 2.0 * delta).abs();
        let e_value = (sol.v_star - oracle::value(s1, s0)).abs();
        let ok = e_gamma <= 1e-6 * cfg.widen
            && e_c <= 1e-6 * cfg.widen
            && e_delta <= 1e-6 * cfg.widen
            && e_value <= 1e-8 * cfg.widen;
        check.require(ok, format!("({s1},{s0}) errors γ {e_gamma:.1e} c {e_c:.1e} Δ {e_delta:.1e} V {e_value:.1e}"));
    }
    check.finish(1, TITLE, started, Some(Duration::from_secs(10)))
}

/// δ* and δ*Φ(-δ*) against a brute-force grid.
pub fn criterion_2(cfg: &VerifyConfig) -> CriterionReport {
    const TITLE: &str = "equilibrium constants";
    let started = Instant::now();
    let (grid_delta, grid_value) = oracle::delta_star_grid(1e-6, 3.0);
    let solved = match solve_delta_star(1e-9) {
        Ok(s) => s,
        Err(e) => return fail(2, TITLE, started, e),
    };
    let tol = 1e-4 * cfg.widen;
    let mut check = Check::new();
    check.require(
        (grid_delta - 0.75179).abs() <= tol && (grid_value - 0.16997).abs() <= tol,
        format!("grid δ* {grid_delta:.6} value {grid_value:.6}"),
    );
    check.require(
        (solved.delta_star - grid_delta).abs() <= tol && (solved.objective_value - grid_value).abs() <= tol,
        format!("solver δ* {:.6} value {:.6}", solved.delta_star, solved.objective_value),
    );
    check.finish(2, TITLE, started, Some(Duration::from_secs(5)))
}

/// Law of the log likelihood ratio is the same under every sampling rule.
pub fn criterion_3(cfg: &VerifyConfig) -> CriterionReport {
    const TITLE: &str = "indifference invariance";
    let started = Instant::now();
    let alpha = 0.01 / cfg.widen;
    let reps = cfg.reps(10_000);
    let delta = 2.0 * oracle::delta_star_bisection();
    let prior = match TwoPointPrior::indifference(1.0, 1.0, delta, 0.5) {
        Ok(p) => p,
        Err(e) => return fail(3, TITLE, started, e),
    };
    let env = match Environment::new(prior.state1.mu1, prior.state1.mu0, 1.0, 1.0) {
        Ok(e) => e,
        Err(e) => return fail(3, TITLE, started, e),
    };
    let rules = [
        ("fixed 0.3", SamplingRule::FixedFraction { gamma: 0.3 }),
        ("fixed 0.7", SamplingRule::FixedFraction { gamma: 0.7 }),
        ("adaptive", SamplingRule::AdaptivePlugIn { batch: ADAPTIVE_BATCH }),
    ];
    let samples: Vec<Vec<f64>> = rules
        .iter()
        .enumerate()
        .map(|(k, &(_, rule))| {
            let policy = PolicySpec { sampling: rule, threshold_c: 0.0 };
            map_replications(derive_seed(MASTER_SEED, 3_000 + k as u64), reps, |rng| {
                let path = simulate_path_with(&env, &policy, DEFAULT_STEPS, rng);
                log_likelihood_ratio(&path.terminal, &prior, 1.0, 1.0)
            })
        })
        .collect();
    let mut check = Check::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        match ks_two_sample(&samples[i], &samples[j], alpha) {
            Ok(t) => check.require(t.passes(), format!("{} vs {} p {:.3}", rules[i].0, rules[j].0, t.p_value)),
            Err(e) => return fail(3, TITLE, started, e),
        }
    }
    let (mean, sd) = (0.5 * delta * delta, delta);
    for (k, sample) in samples.iter().enumerate() {
        match ks_one_sample(sample, |x| oracle::cdf((x - mean) / sd), alpha) {
            Ok(t) => check.require(t.passes(), format!("{} vs normal p {:.3}", rules[k].0, t.p_value)),
            Err(e) => return fail(3, TITLE, started, e),
        }
    }
    check.finish(3, TITLE, started, Some(Duration::from_secs(60)))
}

/// Uniform draw in `[lo, hi)` from a counter.
fn uniform(seed: u64, counter: u64, lo: f64, hi: f64) -> f64 {
    let u = (derive_seed(seed, counter) >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * u
}

/// Monte Carlo regret against the closed form on random instances.
pub fn criterion_4(cfg: &VerifyConfig) -> CriterionReport {
    const TITLE: &str = "Monte Carlo matches closed form";
    let started = Instant::now();
    let reps = cfg.reps(100_000);
    let seed = derive_seed(MASTER_SEED, 4);
    let mut check = Check::new();
    let mut worst_z: f64 = 0.0;
    for k in 0..20u64 {
        let u = |j: u64, lo: f64, hi: f64| uniform(seed, 6 * k + j, lo, hi);
        let (gamma, c) = (u(0, 0.1, 0.9), u(1, -1.0, 1.0));
        let (mu1, mu0) = (u(2, -2.0, 2.0), u(3, -2.0, 2.0));
        let (s1, s0) = (u(4, 0.5, 2.0), u(5, 0.5, 2.0));
        let run = || -> bai_core::Result<(f64, RegretEstimate)> {
            let env = Environment::new(mu1, mu0, s1, s0)?;
            let policy = PolicySpec::new(SamplingRule::fixed(gamma)?, c)?;
            Ok((
                regret_closed_form(gamma, c, &env)?,
                regret_monte_carlo(&policy, &env, reps, derive_seed(seed, 100 + k))?,
            ))
        };
        let (closed, mc) = match run() {
            Ok(r) => r,
            Err(e) => return fail(4, TITLE, started, e),
        };
        let reference = oracle::threshold_regret(gamma, c, mu1, mu0, s1, s0);
        let z = (mc.mean - closed).abs() / mc.std_error;
        worst_z = worst_z.max(z);
        if z > 3.0 * cfg.widen || (closed - reference).abs() > 1e-12 {
            check.require(
                false,
                format!(
                    "tuple {k}: MC {:.5} ± {:.5}, closed form {closed:.5}, reference {reference:.5}",
                    mc.mean, mc.std_error
                ),
            );
        }
    }
    check.require(check.passed, format!("20 tuples, largest |MC - closed form|/SE {worst_z:.2}"));
    check.finish(4, TITLE, started, Some(Duration::from_secs(60)))
}

/// The Neyman worst case is smallest at c = 0.
pub fn criterion_5(cfg: &VerifyConfig) -> CriterionReport {
    const TITLE: &str = "c* = 0 minimizes worst-case regret";
    let started = Instant::now();
    let grid = [-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0];
    let mut values = Vec::with_capacity(grid.len());
    for c in grid {
        match max_regret_at_neyman(c, 1.0, 1.0) {
            Ok(m) => values.push(m.value),
            Err(e) => return fail(5, TITLE, started, e),
        }
    }
    let at_zero = values[3];
    let mut check = Check::new();
    let others_larger = grid.iter().zip(&values).all(|(&c, &v)| c == 0.0 || v > at_zero);
    check.require(others_larger, format!("values {:?}", values.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>()));
    let production = v_star(1.0, 1.0).unwrap_or(f64::NAN);
    let tol = 1e-8 * cfg.widen;
    check.require(
        (at_zero - production).abs() <= tol && (at_zero - oracle::value(1.0, 1.0)).abs() <= tol,
        format!("at c=0 {at_zero:.12}, v_star {production:.12}"),
    );
    check.finish(5, TITLE, started, None)
}

/// Off-Neyman fractions let nature push regret without bound.
pub fn criterion_6(_cfg: &VerifyConfig) -> CriterionReport {
    const TITLE: &str = "divergence off Neyman";
    let started = Instant::now();
    let value = oracle::value(1.0, 1.0);
    let mut check = Check::new();
    for gamma in [0.2, 0.4, 0.6, 0.8] {
        let probe = match divergence_probe(gamma, 0.0, 1.0, 1.0, PROBE_LEVELS) {
            Ok(p) => p,
            Err(e) => return fail(6, TITLE, started, e),
        };
        let increasing = probe.windows(2).all(|w| w[1] > w[0]);
        let last = *probe.last().unwrap_or(&f64::NAN);
        check.require(
            probe.len() == PROBE_LEVELS as usize && increasing && last >= 2.0 * value,
            format!("γ {gamma}: final {last:.4} = {:.2} V*", last / value),
        );
    }
    check.finish(6, TITLE, started, None)
}

/// Finite-sample Neyman regret approaches V*.
pub fn criterion_7(cfg: &VerifyConfig) -> CriterionReport {
    const TITLE: &str = "finite-sample attainment";
    let started = Instant::now();
    let reps = cfg.reps(100_000);
    let value = oracle::value(1.0, 1.0);
    let eta = 2.0 * oracle::delta_star_bisection();
    let seed = derive_seed(MASTER_SEED, 7);
    let mut estimates = Vec::new();
    for n in [100, 1_000, 10_000] {
        let run = || -> bai_core::Result<RegretEstimate> {
            let env = LocalEnvironment::at_gap(Family::Gaussian, eta, 1.0, 1.0)?;
            run_trial(&env, &TrialConfig::new(n, PolicySpec::neyman(1.0, 1.0)?, reps, seed)?)
        };
        match run() {
            Ok(est) => estimates.push((n, est)),
            Err(e) => return fail(7, TITLE, started, e),
        }
    }
    let mut check = Check::new();
    let (_, last) = estimates[2];
    check.require(
        (last.mean - value).abs() <= 0.05 * cfg.widen * value,
        format!("n=10^4: {:.5} ± {:.5} vs V* {value:.5}", last.mean, last.std_error),
    );
    let errors: Vec<f64> = estimates.iter().map(|(_, e)| (e.mean - value).abs()).collect();
    let monotone = estimates
        .windows(2)
        .zip(errors.windows(2))
        .all(|(e, err)| err[1] <= err[0] + 2.0 * cfg.widen * combined_se(&e[0].1, &e[1].1));
    check.require(monotone, format!("errors {:?}", errors.iter().map(|e| format!("{e:.5}")).collect::<Vec<_>>()));
    check.finish(7, TITLE, started, Some(Duration::from_secs(300)))
}

fn unequal_instance() -> bai_core::Result<LocalEnvironment> {
    LocalEnvironment::at_gap(Family::Gaussian, 3.0 * oracle::delta_star_bisection(), 2.0, 1.0)
}

fn known_neyman_run(reps: u64, seed: u64) -> bai_core::Result<RegretEstimate> {
    run_trial(&unequal_instance()?, &TrialConfig::new(10_000, PolicySpec::neyman(2.0, 1.0)?, reps, seed)?)
}

/// Two-stage plug-in Neyman with unknown variances.
pub fn criterion_8(cfg: &VerifyConfig) -> CriterionReport {
    const TITLE: &str = "two-stage unknown variance";
    let started = Instant::now();
    let reps = cfg.reps(100_000);
    let seed = derive_seed(MASTER_SEED, 8);
    let value = oracle::value(2.0, 1.0);
    let run = || -> bai_core::Result<(RegretEstimate, RegretEstimate)> {
        Ok((two_stage_trial(&unequal_instance()?, 10_000, 0.5, reps, seed)?, known_neyman_run(reps, seed)?))
    };
    let (plug_in, known) = match run() {
        Ok(r) => r,
        Err(e) => return fail(8, TITLE, started, e),
    };
    let mut check = Check::new();
    check.require(
        (plug_in.mean - value).abs() <= 0.10 * cfg.widen * value,
        format!("two-stage {:.5} ± {:.5} vs V* {value:.5}", plug_in.mean, plug_in.std_error),
    );
    let se = combined_se(&plug_in, &known);
    check.require(
        (plug_in.mean - known.mean).abs() <= 2.0 * cfg.widen * se,
        format!(
            "known-variance {:.5} ± {:.5}, difference {:.2} SE",
            known.mean,
            known.std_error,
            (plug_in.mean - known.mean).abs() / se
        ),
    );
    check.finish(8, TITLE, started, Some(Duration::from_secs(300)))
}

/// Adaptive plug-in Neyman does no better than fixed Neyman.
pub fn criterion_9(cfg: &VerifyConfig) -> CriterionReport {
    const TITLE: &str = "no benefit from adaptation";
    let started = Instant::now();
    let reps = cfg.reps(100_000);
    let seed = derive_seed(MASTER_SEED, 9);
    let run = || -> bai_core::Result<(RegretEstimate, RegretEstimate)> {
        let adaptive = PolicySpec::new(SamplingRule::adaptive(ADAPTIVE_BATCH)?, 0.0)?;
        let adaptive = run_trial(&unequal_instance()?, &TrialConfig::new(10_000, adaptive, reps, seed)?)?;
        Ok((adaptive, known_neyman_run(reps, seed)?))
    };
    let (adaptive, fixed) = match run() {
        Ok(r) => r,
        Err(e) => return fail(9, TITLE, started, e),
    };
    let se = combined_se(&adaptive, &fixed);
    let mut check = Check::new();
    check.require(
        (adaptive.mean - fixed.mean).abs() <= 2.0 * cfg.widen * se,
        format!(
            "adaptive {:.5} ± {:.5}, fixed {:.5} ± {:.5}, difference {:.2} SE",
            adaptive.mean,
            adaptive.std_error,
            fixed.mean,
            fixed.std_error,
            (adaptive.mean - fixed.mean).abs() / se
        ),
    );
    check.finish(9, TITLE, started, Some(Duration::from_secs(300)))
}

/// Invocations exercised by the determinism check. `{out}` is replaced by a scratch path.
pub const DETERMINISM_COMMANDS: &[&[&str]] = &[
    &["solve", "--sigma1", "2", "--sigma0", "1"],
    &["solve", "--sigma1", "0.3", "--sigma0", "0.7", "--tol", "1e-6"],
    &["regret", "--gamma", "0.4", "--c", "-0.2", "--mu1", "0.5", "--mu0", "-0.3", "--sigma1", "1", "--sigma0", "2"],
    &[
        "regret",
        "--gamma",
        "0.4",
        "--c",
        "0.1",
        "--mu1",
        "0.5",
        "--mu0",
        "-0.2",
        "--sigma1",
        "1",
        "--sigma0",
        "2",
        "--mc-reps",
        "20000",
        "--seed",
        "7",
    ],
    &[
        "sweep",
        "--sigma1",
        "1",
        "--sigma0",
        "1",
        "--gamma-grid",
        "0.3:0.7:0.2",
        "--c-grid",
        "-0.5:0.5:0.5",
        "--delta-grid",
        "0:3:0.25",
    ],
    &[
        "sweep",
        "--sigma1",
        "2",
        "--sigma0",
        "1",
        "--gamma-grid",
        "0.5:0.7:0.1",
        "--c-grid",
        "0:0:1",
        "--delta-grid",
        "0:2:0.5",
        "--out",
        "{out}",
    ],
    &[
        "simulate",
        "--family",
        "gaussian",
        "--policy",
        "adaptive-neyman",
        "--n-grid",
        "100,400",
        "--gap-grid",
        "0,1.5,3",
        "--reps",
        "2000",
        "--seed",
        "3",
        "--sigma1",
        "2",
    ],
    &[
        "simulate",
        "--family",
        "bernoulli",
        "--policy",
        "two-stage",
        "--n-grid",
        "400",
        "--gap-grid",
        "0:2:1",
        "--reps",
        "2000",
        "--seed",
        "5",
        "--out",
        "{out}",
    ],
    &[
        "simulate",
        "--family",
        "gaussian",
        "--policy",
        "fixed:0.3",
        "--n-grid",
        "50",
        "--gap-grid",
        "1",
        "--reps",
        "3000",
        "--placement",
        "1",
    ],
];

#[derive(Debug, PartialEq, Eq)]
struct Capture {
    status: Option<i32>,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
    files: Vec<Vec<u8>>,
}

fn capture(exe: &Path, threads: &str, args: &[&str], out: &Path) -> std::io::Result<Capture> {
    let out_text = out.to_string_lossy();
    let args: Vec<String> = args.iter().map(|a| a.replace("{out}", &out_text)).collect();
    let writes_file = args.iter().any(|a| a == &*out_text);
    let result = Command::new(exe).arg("--threads").arg(threads).args(&args).output()?;
    let mut files = Vec::new();
    if writes_file {
        let sidecar = crate::commands::sidecar_path(out);
        files.push(std::fs::read(out)?);
        files.push(std::fs::read(&sidecar)?);
        std::fs::remove_file(out)?;
        std::fs::remove_file(sidecar)?;
    }
    Ok(Capture { status: result.status.code(), stdout: result.stdout, stderr: result.stderr, files })
}

/// Runs every command three times (1, 1 and 8 threads) and compares all output bytes.
pub fn criterion_10(exe: &Path) -> CriterionReport {
    const TITLE: &str = "determinism";
    let started = Instant::now();
    let dir = std::env::temp_dir().join(format!("bai-determinism-{}", std::process::id()));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return fail(10, TITLE, started, e);
    }
    let out = dir.join("table.csv");
    let mut check = Check::new();
    for args in DETERMINISM_COMMANDS {
        let runs: std::io::Result<Vec<Capture>> = ["1", "1", "8"].iter().map(|t| capture(exe, t, args, &out)).collect();
        let runs = match runs {
            Ok(r) => r,
            Err(e) => {
                let _ = std::fs::remove_dir_all(&dir);
                return fail(10, TITLE, started, e);
            }
        };
        let ok = runs[0].status == Some(0) && (!runs[0].stdout.is_empty() || !runs[0].files.is_empty());
        let same = runs[0] == runs[1] && runs[0] == runs[2];
        if !(ok && same) {
            check.require(false, format!("`{}` status {:?}, identical {same}", args.join(" "), runs[0].status));
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    check.require(
        check.passed,
        format!("{} commands byte-identical across runs and thread counts", DETERMINISM_COMMANDS.len()),
    );
    check.finish(10, TITLE, started, None)
}

/// Runs all criteria in order, calling `progress` after each.
pub fn run_all(cfg: &VerifyConfig, exe: &Path, mut progress: impl FnMut(&CriterionReport)) -> Vec<CriterionReport> {
    let numeric: [fn(&VerifyConfig) -> CriterionReport; 9] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
    ];
    let mut reports = Vec::with_capacity(10);
    for criterion in numeric {
        let report = criterion(cfg);
        progress(&report);
        reports.push(report);
    }
    let report = criterion_10(exe);
    progress(&report);
    reports.push(report);
    reports
}

/// Pass/fail table without timings, so that it is reproducible.
pub fn table(reports: &[CriterionReport]) -> String {
    let mut text = String::from(" #  result  check\n");
    for r in reports {
        text.push_str(&r.line());
        text.push('\n');
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    text.push_str(&format!("{passed}/{} criteria passed\n", reports.len()));
    text
}

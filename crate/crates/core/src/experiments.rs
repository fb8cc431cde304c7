//! Monte Carlo harness: named experiments with trend-based acceptance.
//!
//! Replicate `i` draws all of its randomness from seeds derived from
//! `(master seed, i, purpose)`. Horizons do not enter the seeds, so a single
//! walk run to the largest horizon serves every horizon of the grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::environment::{potential, sample_environment, DistributionSpec, Environment, EnvironmentDistribution, Window};
use crate::error::{Error, Result};
use crate::infinite_valley::{
    s_infty_eval, tilde_nu, HTransformSampler, LadderEstimate, TruncationPolicy, DEFAULT_TAIL_TOLERANCE,
};
use crate::measures::{omega_plus_indicator, sigma_n_eval, CylinderFunction, FunctionSpec};
use crate::numeric::log_add_exp;
use crate::rng::{derive_seed, stream, unit_f64, StreamTag};
use crate::stats::{ks_two_sample, wasserstein1, DistributionSample};
use crate::valley::{find_valley, mu_n, Valley};
use crate::walk::{hitting_probability, Walker};
use crate::environment::Potential;
use rand::RngCore;

pub const EXPERIMENTS: [&str; 6] = ["theorem1", "deviation", "lln", "clt", "growth", "excursion_variance"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    Theorem1,
    Deviation,
    Lln,
    Clt,
    Growth,
    ExcursionVariance,
}

impl ExperimentName {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::Theorem1 => "theorem1",
            ExperimentName::Deviation => "deviation",
            ExperimentName::Lln => "lln",
            ExperimentName::Clt => "clt",
            ExperimentName::Growth => "growth",
            ExperimentName::ExcursionVariance => "excursion_variance",
        }
    }
}

/// Experiment-specific knobs. Unused ones are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Deviation threshold; defaults to 0.05 for `lln` and 0.1 for `deviation`.
    pub epsilon: Option<f64>,
    /// `f(1)` and `f(-1)` of the step functional.
    pub f_up: f64,
    pub f_down: f64,
    /// Growth exponent and prefactor of the right-side event.
    pub eta_exp: f64,
    pub delta: f64,
    pub k_list: Vec<u64>,
    pub quantile: f64,
    /// Initial walk window is `[-1 - m, window_factor * (log n)^2 + 64]`.
    pub window_factor: f64,
    /// Fix one environment and vary only the walk (diagnostic only).
    pub quenched: bool,
    /// Excursion spot check of the variance bound.
    pub spot_check: bool,
    pub excursions: usize,
    /// The spot-checked site is `b_n + spot_offset`.
    pub spot_offset: i64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            epsilon: None,
            f_up: 1.0,
            f_down: 0.0,
            eta_exp: 0.3,
            delta: 0.5,
            k_list: vec![1, 2, 4, 8, 16, 32],
            quantile: 0.9,
            window_factor: 10.0,
            quenched: false,
            spot_check: true,
            excursions: 10_000,
            spot_offset: 1,
        }
    }
}

/// Acceptance thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// theorem1: size of the one tolerated upward step in the KS sequence.
    pub inversion_allowance: f64,
    /// theorem1: required KS decrease from the first to the last horizon.
    pub ks_drop: f64,
    /// lln: largest deviation probability allowed at the last horizon.
    pub lln_final_max: f64,
    /// deviation: last/first must shrink by this factor, or be below the floor.
    pub deviation_factor: f64,
    pub deviation_floor: f64,
    pub clt_ks_max: f64,
    /// growth: smallest event probability allowed at the largest K.
    pub growth_final_min: f64,
    /// excursion_variance: bound on the quantile of `log M_n / log n`.
    pub quantile_max: f64,
    pub quantile_noise: f64,
    /// Largest fraction of replicates allowed to fail.
    pub failure_budget: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            inversion_allowance: 0.02,
            ks_drop: 0.05,
            lln_final_max: 0.05,
            deviation_factor: 2.0,
            deviation_floor: 0.02,
            clt_ks_max: 0.08,
            growth_final_min: 0.95,
            quantile_max: 0.95,
            quantile_noise: 0.03,
            failure_budget: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    pub distribution: DistributionSpec,
    pub horizons: Vec<u64>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Test function for `theorem1` and `deviation`.
    #[serde(default)]
    pub function: Option<FunctionSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Where the CLI writes results; not part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentConfig {
    /// Fills experiment-dependent defaults.
    pub fn resolved(mut self) -> Self {
        if self.function.is_none() {
            self.function = match self.experiment {
                ExperimentName::Theorem1 => Some(FunctionSpec::Omega0Variance),
                ExperimentName::Deviation => Some(FunctionSpec::Omega0),
                _ => None,
            };
        }
        if self.params.epsilon.is_none() {
            self.params.epsilon = match self.experiment {
                ExperimentName::Lln => Some(0.05),
                ExperimentName::Deviation => Some(0.1),
                _ => None,
            };
        }
        self
    }

    /// All problems found, in a stable order; empty means valid.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let dist = match EnvironmentDistribution::from_spec(&self.distribution) {
            Ok(d) => Some(d),
            Err(e) => {
                out.push(format!("distribution: {e}"));
                None
            }
        };
        if let Some(d) = &dist {
            let needs_lattice = matches!(
                self.experiment,
                ExperimentName::Theorem1 | ExperimentName::Clt | ExperimentName::Growth | ExperimentName::ExcursionVariance
            );
            if needs_lattice && !d.is_arithmetic() {
                out.push(format!(
                    "distribution: experiment {} requires the arithmetic assumption (log rho on a lattice \
                     {{k h}}), which this distribution violates",
                    self.experiment.as_str()
                ));
            }
        }
        if self.horizons.is_empty() {
            out.push("horizons: at least one horizon is required".into());
        }
        if self.horizons.iter().any(|&n| n == 0) {
            out.push("horizons: every horizon must be at least 1".into());
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            out.push("horizons: must be strictly increasing".into());
        }
        if self.replicates < 2 {
            out.push("replicates: at least 2 are required".into());
        }
        if let Some(f) = &self.function {
            match CylinderFunction::from_spec(f) {
                Ok(f) => {
                    if let Err(e) = f.spot_check(1000, self.seed) {
                        out.push(format!("function: {e}"));
                    }
                }
                Err(e) => out.push(format!("function: {e}")),
            }
        }
        let p = &self.params;
        if let Some(e) = p.epsilon {
            if !(e > 0.0) {
                out.push("params.epsilon: must be positive".into());
            }
        }
        if self.experiment == ExperimentName::Growth {
            if !(p.eta_exp > 0.0 && p.eta_exp < 1.0 / 3.0) {
                out.push("params.eta_exp: must lie in (0, 1/3) so both growth events apply".into());
            }
            if !(p.delta > 0.0) {
                out.push("params.delta: must be positive".into());
            }
            if p.k_list.is_empty() || p.k_list.windows(2).any(|w| w[0] >= w[1]) || p.k_list[0] == 0 {
                out.push("params.k_list: must be a non-empty increasing list of positive integers".into());
            }
        }
        if !(p.quantile > 0.0 && p.quantile < 1.0) {
            out.push("params.quantile: must lie in (0, 1)".into());
        }
        if !(p.window_factor > 0.0) {
            out.push("params.window_factor: must be positive".into());
        }
        if p.spot_offset == 0 {
            out.push("params.spot_offset: must be nonzero".into());
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("inversion_allowance", t.inversion_allowance),
            ("ks_drop", t.ks_drop),
            ("lln_final_max", t.lln_final_max),
            ("deviation_factor", t.deviation_factor),
            ("deviation_floor", t.deviation_floor),
            ("clt_ks_max", t.clt_ks_max),
            ("growth_final_min", t.growth_final_min),
            ("quantile_max", t.quantile_max),
            ("quantile_noise", t.quantile_noise),
            ("failure_budget", t.failure_budget),
        ] {
            if !(v > 0.0) {
                out.push(format!("tolerances.{name}: must be positive"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(d.join("; ")))
        }
    }

    /// Canonical JSON (sorted keys, output path dropped).
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let value = serde_json::to_value(&c).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical_json().as_bytes()))
    }
}

/// Successful replicate values in replicate order plus the failures.
#[derive(Debug, Clone, PartialEq)]
pub struct Replications<T> {
    pub results: Vec<(u64, T)>,
    pub failures: Vec<(u64, String)>,
}

impl<T> Replications<T> {
    pub fn total(&self) -> usize {
        self.results.len() + self.failures.len()
    }

    pub fn failure_rate(&self) -> f64 {
        self.failures.len() as f64 / self.total().max(1) as f64
    }
}

fn is_fatal(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::UnsupportedSampler(_))
}

/// Runs `task(i)` for `i in 0..r` on `jobs` threads. The output is the same
/// for every `jobs`. Configuration errors abort; other errors are recorded
/// as failures, and exceeding `budget` (a fraction) is an error.
pub fn run_replications<T, F>(r: usize, jobs: usize, budget: f64, task: F) -> Result<Replications<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<T>> = pool.install(|| (0..r as u64).into_par_iter().map(&task).collect());
    let mut reps = Replications { results: Vec::with_capacity(r), failures: Vec::new() };
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(v) => reps.results.push((i as u64, v)),
            Err(e) if is_fatal(&e) => return Err(e),
            Err(e) => {
                log::warn!("replicate {i} failed: {e}");
                reps.failures.push((i as u64, e.to_string()));
            }
        }
    }
    if reps.failure_rate() > budget {
        return Err(Error::FailureBudget { failed: reps.failures.len(), total: r });
    }
    Ok(reps)
}

/// Largest window the retry loop will build.
pub const WINDOW_CAP: i64 = 1 << 20;

/// Runs `body` on environments with growing right edges until it stops
/// reading past the window. Sites depend only on `(seed, x)`, so growth
/// does not change anything already drawn.
pub fn with_growing_window<T>(
    dist: &Arc<EnvironmentDistribution>,
    min: i64,
    initial_max: i64,
    seed: u64,
    mut body: impl FnMut(&Environment) -> Result<T>,
) -> Result<T> {
    let mut max = initial_max.max(1);
    loop {
        let env = sample_environment(dist, Window::new(min, max)?, seed)?;
        match body(&env) {
            Err(Error::OutOfWindow { site, .. }) if site > max && max < WINDOW_CAP => {
                log::info!("site {site} outside window [{min}, {max}]; doubling to {}", 2 * max);
                max *= 2;
            }
            other => return other,
        }
    }
}

fn initial_window_max(factor: f64, n: u64) -> i64 {
    let l = (n.max(2) as f64).ln();
    (factor * l * l).ceil() as i64 + 64
}

/// One row of the per-horizon summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    /// Non-gating verdicts are reported but do not affect the exit status.
    pub gating: bool,
    pub detail: String,
}

/// Long-format data row `(experiment, n, replicate, value)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataRow {
    pub experiment: String,
    pub n: u64,
    pub replicate: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureSummary {
    pub failed: usize,
    pub total: usize,
    pub budget: f64,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub experiment: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub rows: Vec<SummaryRow>,
    pub verdicts: Vec<Verdict>,
    pub failures: FailureSummary,
    #[serde(skip)]
    pub data: Vec<DataRow>,
}

impl Report {
    fn new(config: &ExperimentConfig) -> Self {
        Self {
            experiment: config.experiment.as_str().to_owned(),
            config_hash: config.hash(),
            master_seed: config.seed,
            config: config.clone(),
            rows: Vec::new(),
            verdicts: Vec::new(),
            failures: FailureSummary { failed: 0, total: 0, budget: config.tolerances.failure_budget, messages: Vec::new() },
            data: Vec::new(),
        }
    }

    fn record_failures<T>(&mut self, reps: &Replications<T>) {
        self.failures.failed += reps.failures.len();
        self.failures.total += reps.total();
        self.failures.messages.extend(reps.failures.iter().take(10).map(|(i, m)| format!("replicate {i}: {m}")));
    }

    fn verdict(&mut self, name: &str, passed: bool, gating: bool, detail: String) {
        self.verdicts.push(Verdict { name: name.to_owned(), passed, gating, detail });
    }

    fn finish(mut self) -> Self {
        let rate = self.failures.failed as f64 / self.failures.total.max(1) as f64;
        let ok = rate < self.failures.budget;
        let detail = format!("{} of {} replicates failed", self.failures.failed, self.failures.total);
        self.verdict("failure_budget", ok, true, detail);
        self
    }

    /// True iff every gating verdict passed.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed || !v.gating)
    }

    pub fn verdict_named(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn metric(&self, n: u64, k: Option<u64>, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n && r.k == k).and_then(|r| r.metrics.get(name).copied())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# config_hash: {}", self.config_hash)?;
        writeln!(out, "experiment,n,replicate,value")?;
        for r in &self.data {
            writeln!(out, "{},{},{},{}", r.experiment, r.n, r.replicate, r.value)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment   {}", self.experiment);
        let _ = writeln!(s, "config hash  {}", self.config_hash);
        let _ = writeln!(s, "master seed  {}", self.master_seed);
        let _ = writeln!(s, "replicates   {}", self.config.replicates);
        let _ = writeln!(s);
        for r in &self.rows {
            let head = match r.k {
                Some(k) => format!("n={} K={}", r.n, k),
                None => format!("n={}", r.n),
            };
            let cols: Vec<String> = r.metrics.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
            let _ = writeln!(s, "{head:<16} {}", cols.join("  "));
        }
        let _ = writeln!(s);
        for v in &self.verdicts {
            let mark = if v.passed { "PASS" } else { "FAIL" };
            let gate = if v.gating { "" } else { " (informational)" };
            let _ = writeln!(s, "{mark} {}{gate}: {}", v.name, v.detail);
        }
        let _ = writeln!(s, "\noverall: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

/// `true` if `seq` never increases by more than `noise`, allowing up to
/// `inversions` increases of at most `allowance` beyond that.
pub fn trend_non_increasing(seq: &[f64], noise: f64, allowance: f64, inversions: usize) -> bool {
    let mut used = 0;
    for w in seq.windows(2) {
        let rise = w[1] - w[0];
        if rise > noise {
            if rise > noise + allowance {
                return false;
            }
            used += 1;
        }
    }
    used <= inversions
}

struct Setup {
    dist: Arc<EnvironmentDistribution>,
    f: Option<CylinderFunction>,
    n_max: u64,
}

fn setup(config: &ExperimentConfig) -> Result<Setup> {
    config.validate()?;
    let dist = Arc::new(EnvironmentDistribution::from_spec(&config.distribution)?);
    let f = config.function.as_ref().map(CylinderFunction::from_spec).transpose()?;
    Ok(Setup { dist, f, n_max: *config.horizons.last().expect("validated") })
}

fn env_seed(config: &ExperimentConfig, i: u64) -> u64 {
    let i = if config.params.quenched { 0 } else { i };
    derive_seed(config.seed, i, StreamTag::Environment)
}

/// Runs the experiment named in `config` (after filling defaults).
pub fn run(config: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let config = config.clone().resolved();
    match config.experiment {
        ExperimentName::Theorem1 => run_theorem1(&config, jobs),
        ExperimentName::Deviation => run_deviation(&config, jobs),
        ExperimentName::Lln => run_lln(&config, jobs),
        ExperimentName::Clt => run_clt(&config, jobs),
        ExperimentName::Growth => run_growth_diagnostic(&config, jobs),
        ExperimentName::ExcursionVariance => run_excursion_variance(&config, jobs),
    }
}

/// `S_n(F)` at each horizon from one streamed walk, and `Σ_n(F)` from the
/// same environment.
fn walk_and_valley_measures(
    env: &Environment,
    f: &CylinderFunction,
    horizons: &[u64],
    walk_seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = f.radius() as i64;
    let profile = f.profile(env);
    let base = env.window().min + m;
    let mut walker = Walker::new(env, walk_seed);
    let mut sum = 0.0;
    let mut k = 0;
    let mut s_n = Vec::with_capacity(horizons.len());
    for &n in horizons {
        while k < n {
            let x = walker.advance()?;
            let i = (x - base) as usize;
            if i >= profile.len() {
                return Err(Error::OutOfWindow { site: x + m, min: env.window().min, max: env.window().max });
            }
            sum += profile[i];
            k += 1;
        }
        s_n.push(sum / n as f64);
    }
    let pot = potential(env);
    let mut sigma = Vec::with_capacity(horizons.len());
    for &n in horizons {
        let valley = valley_for(&pot, n, m)?;
        let mu = mu_n(&pot, &valley)?;
        sigma.push(sigma_n_eval(&mu, env, f)?.value);
    }
    Ok((s_n, sigma))
}

// The valley plus room for a radius-m function at c_n.
fn valley_for(pot: &Potential, n: u64, m: i64) -> Result<Valley> {
    let v = find_valley(pot, n)?;
    let w = pot.window();
    if v.border + m > w.max {
        return Err(Error::OutOfWindow { site: v.border + m, min: w.min, max: w.max });
    }
    Ok(v)
}

/// `R` draws of `S_∞(F)`, each from a fresh infinite valley.
pub fn s_infinity_sample(
    dist: &EnvironmentDistribution,
    f: &CylinderFunction,
    config: &ExperimentConfig,
    jobs: usize,
) -> Result<Replications<f64>> {
    let sampler = HTransformSampler::new(dist, &LadderEstimate { seed: config.seed, ..Default::default() })?;
    let policy = TruncationPolicy::default();
    run_replications(config.replicates, jobs, config.tolerances.failure_budget, |i| {
        let v = sampler.sample_adaptive(derive_seed(config.seed, i, StreamTag::Valley), &policy)?;
        let nu = tilde_nu(&v, DEFAULT_TAIL_TOLERANCE)?;
        Ok(s_infty_eval(&v, &nu, f)?.value)
    })
}

fn sample_of(reps: &[(u64, f64)]) -> DistributionSample {
    DistributionSample::new(reps.to_vec())
}

fn column<T>(reps: &Replications<T>, get: impl Fn(&T) -> f64) -> Vec<(u64, f64)> {
    reps.results.iter().map(|(i, v)| (*i, get(v))).collect()
}

pub fn run_theorem1(config: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let s = setup(config)?;
    let f = s.f.expect("resolved config has a function");
    let m = f.radius() as i64;
    let wmax = initial_window_max(config.params.window_factor, s.n_max);
    let reps = run_replications(config.replicates, jobs, config.tolerances.failure_budget, |i| {
        let walk_seed = derive_seed(config.seed, i, StreamTag::Walk);
        with_growing_window(&s.dist, -1 - m, wmax, env_seed(config, i), |env| {
            walk_and_valley_measures(env, &f, &config.horizons, walk_seed)
        })
    })?;
    let limit = s_infinity_sample(&s.dist, &f, config, jobs)?;

    let mut report = Report::new(config);
    report.record_failures(&reps);
    report.record_failures(&limit);
    let s_inf = sample_of(&limit.results);
    for &(i, v) in &limit.results {
        report.data.push(DataRow { experiment: "theorem1:S_infty".into(), n: 0, replicate: i, value: v });
    }
    let mut ks_s = Vec::new();
    let mut ks_sigma = Vec::new();
    for (j, &n) in config.horizons.iter().enumerate() {
        let sn = column(&reps, |r| r.0[j]);
        let sg = column(&reps, |r| r.1[j]);
        for (&(i, a), &(_, b)) in sn.iter().zip(&sg) {
            report.data.push(DataRow { experiment: "theorem1:S_n".into(), n, replicate: i, value: a });
            report.data.push(DataRow { experiment: "theorem1:Sigma_n".into(), n, replicate: i, value: b });
        }
        let (sn, sg) = (sample_of(&sn), sample_of(&sg));
        let mut metrics = BTreeMap::new();
        metrics.insert("ks_s_n".into(), ks_two_sample(&sn, &s_inf)?);
        metrics.insert("ks_sigma_n".into(), ks_two_sample(&sg, &s_inf)?);
        if sn.len() == s_inf.len() {
            metrics.insert("w1_s_n".into(), wasserstein1(&sn, &s_inf)?);
            metrics.insert("w1_sigma_n".into(), wasserstein1(&sg, &s_inf)?);
        }
        metrics.insert("mean_s_n".into(), sn.mean());
        metrics.insert("mean_sigma_n".into(), sg.mean());
        metrics.insert("mean_s_infty".into(), s_inf.mean());
        ks_s.push(metrics["ks_s_n"]);
        ks_sigma.push(metrics["ks_sigma_n"]);
        report.rows.push(SummaryRow { n, k: None, metrics });
    }
    let t = &config.tolerances;
    for (name, seq, gating) in [("ks_sigma_n_trend", &ks_sigma, true), ("ks_s_n_trend", &ks_s, false)] {
        let trend = trend_non_increasing(seq, 0.0, t.inversion_allowance, 1);
        let drop = seq[0] - seq[seq.len() - 1];
        let ok = trend && drop >= t.ks_drop;
        let detail = format!("KS by horizon {seq:?}; drop {drop:.4} (need >= {})", t.ks_drop);
        report.verdict(name, ok, gating, detail);
    }
    Ok(report.finish())
}

pub fn run_deviation(config: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let s = setup(config)?;
    let f = s.f.expect("resolved config has a function");
    let m = f.radius() as i64;
    let eps = config.params.epsilon.expect("resolved");
    let wmax = initial_window_max(config.params.window_factor, s.n_max);
    let reps = run_replications(config.replicates, jobs, config.tolerances.failure_budget, |i| {
        let walk_seed = derive_seed(config.seed, i, StreamTag::Walk);
        with_growing_window(&s.dist, -1 - m, wmax, env_seed(config, i), |env| {
            walk_and_valley_measures(env, &f, &config.horizons, walk_seed)
        })
    })?;
    let mut report = Report::new(config);
    report.record_failures(&reps);
    let mut probs = Vec::new();
    for (j, &n) in config.horizons.iter().enumerate() {
        let diffs = column(&reps, |r| r.0[j] - r.1[j]);
        for &(i, d) in &diffs {
            report.data.push(DataRow { experiment: "deviation:S_n-Sigma_n".into(), n, replicate: i, value: d });
        }
        let p = diffs.iter().filter(|(_, d)| d.abs() > eps).count() as f64 / diffs.len() as f64;
        let mean_abs = diffs.iter().map(|(_, d)| d.abs()).sum::<f64>() / diffs.len() as f64;
        probs.push(p);
        let mut metrics = BTreeMap::new();
        metrics.insert("p_deviation".into(), p);
        metrics.insert("mean_abs_deviation".into(), mean_abs);
        report.rows.push(SummaryRow { n, k: None, metrics });
    }
    let t = &config.tolerances;
    let monotone = trend_non_increasing(&probs, 0.0, 0.0, 0);
    let (first, last) = (probs[0], probs[probs.len() - 1]);
    let shrink = last <= t.deviation_floor || (last < first && last * t.deviation_factor <= first);
    report.verdict(
        "deviation_trend",
        monotone && shrink,
        true,
        format!("P(|S_n - Sigma_n| > {eps}) by horizon {probs:?}"),
    );
    Ok(report.finish())
}

/// Per horizon: `(1/n) Σ f(ΔX_k)` and `n^{-1/2} Σ [f(ΔX_k) - E_k]` with
/// `ΔX_k = X_{k+1} - X_k`, `k = 1..n`.
fn step_functionals(env: &Environment, horizons: &[u64], seed: u64, f_up: f64, f_down: f64) -> Result<Vec<(f64, f64)>> {
    let omega = env.values();
    let offset = -env.window().min;
    let mut walker = Walker::new(env, seed);
    let mut prev = walker.advance()?;
    let (mut sum, mut comp) = (0.0, 0.0);
    let mut k = 0;
    let mut out = Vec::with_capacity(horizons.len());
    for &n in horizons {
        while k < n {
            // the up-probability of the reflected walk is 1 at the origin
            let p = if prev == 0 { 1.0 } else { omega[(prev + offset) as usize] };
            comp += f_up * p + f_down * (1.0 - p);
            let next = walker.advance()?;
            sum += if next > prev { f_up } else { f_down };
            prev = next;
            k += 1;
        }
        out.push((sum / n as f64, (sum - comp) / (n as f64).sqrt()));
    }
    Ok(out)
}

pub fn run_lln(config: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let s = setup(config)?;
    let p = &config.params;
    let eps = p.epsilon.expect("resolved");
    let limit = (p.f_up + p.f_down) / 2.0;
    let wmax = initial_window_max(p.window_factor, s.n_max);
    let reps = run_replications(config.replicates, jobs, config.tolerances.failure_budget, |i| {
        let walk_seed = derive_seed(config.seed, i, StreamTag::Walk);
        with_growing_window(&s.dist, -1, wmax, env_seed(config, i), |env| {
            step_functionals(env, &config.horizons, walk_seed, p.f_up, p.f_down)
        })
    })?;
    let mut report = Report::new(config);
    report.record_failures(&reps);
    let mut probs = Vec::new();
    for (j, &n) in config.horizons.iter().enumerate() {
        let avgs = column(&reps, |r| r[j].0);
        for &(i, a) in &avgs {
            report.data.push(DataRow { experiment: "lln:mean".into(), n, replicate: i, value: a });
        }
        let prob = avgs.iter().filter(|(_, a)| (a - limit).abs() > eps).count() as f64 / avgs.len() as f64;
        probs.push(prob);
        let mut metrics = BTreeMap::new();
        metrics.insert("limit".into(), limit);
        metrics.insert("mean".into(), avgs.iter().map(|x| x.1).sum::<f64>() / avgs.len() as f64);
        metrics.insert("p_deviation".into(), prob);
        report.rows.push(SummaryRow { n, k: None, metrics });
    }
    let t = &config.tolerances;
    let last = probs[probs.len() - 1];
    let ok = trend_non_increasing(&probs, 0.0, 0.0, 0) && last <= t.lln_final_max;
    report.verdict(
        "lln_trend",
        ok,
        true,
        format!("P(|mean - {limit}| > {eps}) by horizon {probs:?}; last must be <= {}", t.lln_final_max),
    );
    Ok(report.finish())
}

pub fn run_clt(config: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let s = setup(config)?;
    let p = &config.params;
    let wmax = initial_window_max(p.window_factor, s.n_max);
    let reps = run_replications(config.replicates, jobs, config.tolerances.failure_budget, |i| {
        let walk_seed = derive_seed(config.seed, i, StreamTag::Walk);
        with_growing_window(&s.dist, -1, wmax, env_seed(config, i), |env| {
            step_functionals(env, &config.horizons, walk_seed, p.f_up, p.f_down)
        })
    })?;
    let var = CylinderFunction::from_spec(&FunctionSpec::Omega0Variance)?;
    let scale = (p.f_up - p.f_down).powi(2);
    let etas = s_infinity_sample(&s.dist, &var, config, jobs)?;
    let mut report = Report::new(config);
    report.record_failures(&reps);
    report.record_failures(&etas);
    let mixture: Vec<(u64, f64)> = etas
        .results
        .iter()
        .map(|&(i, v)| {
            let u: f64 = StandardNormal.sample(&mut stream(derive_seed(config.seed, i, StreamTag::Mixture)));
            (i, (scale * v).sqrt() * u)
        })
        .collect();
    for &(i, z) in &mixture {
        report.data.push(DataRow { experiment: "clt:mixture".into(), n: 0, replicate: i, value: z });
    }
    let mix = sample_of(&mixture);
    let mut ks = Vec::new();
    for (j, &n) in config.horizons.iter().enumerate() {
        let z = column(&reps, |r| r[j].1);
        for &(i, v) in &z {
            report.data.push(DataRow { experiment: "clt:Z_n".into(), n, replicate: i, value: v });
        }
        let zs = sample_of(&z);
        let d = ks_two_sample(&zs, &mix)?;
        ks.push(d);
        let mut metrics = BTreeMap::new();
        metrics.insert("ks".into(), d);
        metrics.insert("var_z_n".into(), zs.values().iter().map(|v| v * v).sum::<f64>() / zs.len() as f64);
        metrics.insert("var_mixture".into(), mix.values().iter().map(|v| v * v).sum::<f64>() / mix.len() as f64);
        if zs.len() == mix.len() {
            metrics.insert("w1".into(), wasserstein1(&zs, &mix)?);
        }
        report.rows.push(SummaryRow { n, k: None, metrics });
    }
    let t = &config.tolerances;
    let last = ks[ks.len() - 1];
    report.verdict("clt_ks", last <= t.clt_ks_max, true, format!("KS by horizon {ks:?}; last must be <= {}", t.clt_ks_max));
    Ok(report.finish())
}

/// Largest `x` in `1..=c_n - b_n` violating the right growth bound and
/// largest `x` in `1..=b_n` violating the left one (0 when none).
pub fn growth_violations(pot: &Potential, valley: &Valley, eta_exp: f64, delta: f64) -> Result<(u64, u64)> {
    let (b, c) = (valley.bottom, valley.border);
    let vb = pot.get(b)?;
    let mut right = 0;
    for x in 1..=c - b {
        if pot.get(b + x)? - vb < delta * (x as f64).powf(eta_exp) {
            right = x as u64;
        }
    }
    let mut left = 0;
    for x in 1..=b {
        if pot.get(b - x)? - vb < (x as f64).powf(eta_exp) {
            left = x as u64;
        }
    }
    Ok((right, left))
}

pub fn run_growth_diagnostic(config: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let s = setup(config)?;
    let p = &config.params;
    let wmax = initial_window_max(p.window_factor, s.n_max);
    let reps = run_replications(config.replicates, jobs, config.tolerances.failure_budget, |i| {
        with_growing_window(&s.dist, -1, wmax, env_seed(config, i), |env| {
            let pot = potential(env);
            config
                .horizons
                .iter()
                .map(|&n| growth_violations(&pot, &find_valley(&pot, n)?, p.eta_exp, p.delta))
                .collect::<Result<Vec<_>>>()
        })
    })?;
    let mut report = Report::new(config);
    report.record_failures(&reps);
    let mut right_ok = true;
    let mut left_ok = true;
    let mut detail_r = Vec::new();
    let mut detail_l = Vec::new();
    let k_last = *p.k_list.last().expect("validated");
    for (j, &n) in config.horizons.iter().enumerate() {
        let viol = column(&reps, |r| r[j].0 as f64);
        let viol_l = column(&reps, |r| r[j].1 as f64);
        for (&(i, a), &(_, b)) in viol.iter().zip(&viol_l) {
            report.data.push(DataRow { experiment: "growth:last_right_violation".into(), n, replicate: i, value: a });
            report.data.push(DataRow { experiment: "growth:last_left_violation".into(), n, replicate: i, value: b });
        }
        let total = viol.len() as f64;
        let (mut pr, mut pl) = (Vec::new(), Vec::new());
        for &k in &p.k_list {
            let r = viol.iter().filter(|(_, v)| *v < k as f64).count() as f64 / total;
            let l = viol_l.iter().filter(|(_, v)| *v < k as f64).count() as f64 / total;
            let both = viol.iter().zip(&viol_l).filter(|((_, a), (_, b))| *a < k as f64 && *b < k as f64).count() as f64
                / total;
            let mut metrics = BTreeMap::new();
            metrics.insert("p_right".into(), r);
            metrics.insert("p_left".into(), l);
            metrics.insert("p_both".into(), both);
            report.rows.push(SummaryRow { n, k: Some(k), metrics });
            pr.push(-r);
            pl.push(-l);
        }
        let (fr, fl) = (-pr[pr.len() - 1], -pl[pl.len() - 1]);
        right_ok &= trend_non_increasing(&pr, 0.0, 0.0, 0) && fr >= config.tolerances.growth_final_min;
        left_ok &= trend_non_increasing(&pl, 0.0, 0.0, 0) && fl >= config.tolerances.growth_final_min;
        detail_r.push(format!("n={n}: {:?}", pr.iter().map(|v| -v).collect::<Vec<_>>()));
        detail_l.push(format!("n={n}: {:?}", pl.iter().map(|v| -v).collect::<Vec<_>>()));
    }
    let need = config.tolerances.growth_final_min;
    report.verdict(
        "growth_right",
        right_ok,
        true,
        format!("P(event) by K {:?} {}; need >= {need} at K={k_last}", p.k_list, detail_r.join("; ")),
    );
    report.verdict(
        "growth_left",
        left_ok,
        true,
        format!("P(event) by K {:?} {}; need >= {need} at K={k_last}", p.k_list, detail_l.join("; ")),
    );
    Ok(report.finish())
}

/// `log max_x A_n(x)` over `x ∈ [-b_n, c_n - b_n] \ {0}`.
///
/// Right of the bottom `A(x) = Σ_{j=b}^{b+x-1} e^{V(j) - V(b+x-1)}`, left of
/// it `A(y) = Σ_{j=b+y}^{b-1} e^{V(j) - V(b+y)}`; both are built by the
/// recursions `A ← 1 + e^{ΔV} A` in log space.
pub fn log_max_a(pot: &Potential, valley: &Valley) -> Result<f64> {
    let (b, c) = (valley.bottom, valley.border);
    let mut best = f64::NEG_INFINITY;
    let mut log_a = 0.0;
    for x in 1..=c - b {
        if x > 1 {
            let dv = pot.get(b + x - 2)? - pot.get(b + x - 1)?;
            log_a = log_add_exp(log_a + dv, 0.0);
        }
        best = best.max(log_a);
    }
    let mut log_a = 0.0;
    for y in 1..=b {
        if y > 1 {
            let dv = pot.get(b - y + 1)? - pot.get(b - y)?;
            log_a = log_add_exp(log_a + dv, 0.0);
        }
        best = best.max(log_a);
    }
    Ok(best)
}

/// `β(x)` for the chain reflected at 0 and `c_n`.
pub fn beta(env: &Environment, pot: &Potential, valley: &Valley, x: i64) -> Result<f64> {
    let b = valley.bottom;
    if x > b && x <= valley.border {
        let escape = 1.0 - hitting_probability(pot, x - 1, b, x)?;
        let down = if x == valley.border { 1.0 } else { 1.0 - env.omega(x)? };
        Ok(down * escape)
    } else if x >= 0 && x < b {
        let up = if x == 0 { 1.0 } else { env.omega(x)? };
        Ok(up * hitting_probability(pot, x + 1, x, b)?)
    } else {
        Err(Error::Domain(format!("β({x}) needs x in [0, c_n] and x != b_n")))
    }
}

/// Visits to `x` during `count` excursions from `b_n` of the chain
/// reflected at 0 and `c_n`.
pub fn excursion_visits(env: &Environment, valley: &Valley, x: i64, count: usize, seed: u64) -> Result<Vec<u64>> {
    let (b, c) = (valley.bottom, valley.border);
    let omega = env.values();
    let offset = -env.window().min;
    env.omega(c)?;
    let mut rng = stream(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut pos = b;
        let mut visits = 0;
        loop {
            let u = unit_f64(rng.next_u64());
            pos = if pos == 0 {
                1
            } else if pos == c {
                c - 1
            } else if u < omega[(pos + offset) as usize] {
                pos + 1
            } else {
                pos - 1
            };
            if pos == b {
                break;
            }
            visits += (pos == x) as u64;
        }
        out.push(visits);
    }
    Ok(out)
}

/// Sample variance of `Y_x`, its standard error, and the bound `4/β(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceCheck {
    pub x: i64,
    pub variance: f64,
    pub standard_error: f64,
    pub bound: f64,
}

impl VarianceCheck {
    pub fn passed(&self) -> bool {
        self.variance <= self.bound + 3.0 * self.standard_error
    }
}

pub fn variance_check(visits: &[u64], x: i64, beta: f64) -> VarianceCheck {
    let n = visits.len() as f64;
    let mean = visits.iter().sum::<u64>() as f64 / n;
    let centered: Vec<f64> = visits.iter().map(|&v| v as f64 - mean).collect();
    let m2 = centered.iter().map(|d| d * d).sum::<f64>() / n;
    let m4 = centered.iter().map(|d| d.powi(4)).sum::<f64>() / n;
    let variance = m2 * n / (n - 1.0);
    let standard_error = ((m4 - m2 * m2).max(0.0) / n).sqrt();
    VarianceCheck { x, variance, standard_error, bound: 4.0 / beta }
}

pub fn run_excursion_variance(config: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let s = setup(config)?;
    let p = &config.params;
    let wmax = initial_window_max(p.window_factor, s.n_max);
    let reps = run_replications(config.replicates, jobs, config.tolerances.failure_budget, |i| {
        with_growing_window(&s.dist, -1, wmax, env_seed(config, i), |env| {
            let pot = potential(env);
            config
                .horizons
                .iter()
                .map(|&n| Ok(log_max_a(&pot, &find_valley(&pot, n)?)? / (n as f64).ln()))
                .collect::<Result<Vec<_>>>()
        })
    })?;
    let mut report = Report::new(config);
    report.record_failures(&reps);
    let mut quantiles = Vec::new();
    for (j, &n) in config.horizons.iter().enumerate() {
        let r = column(&reps, |v| v[j]);
        for &(i, v) in &r {
            report.data.push(DataRow { experiment: "excursion_variance:log_M_over_log_n".into(), n, replicate: i, value: v });
        }
        let sample = sample_of(&r);
        let q = sample.quantile(p.quantile)?;
        quantiles.push(q);
        let mut metrics = BTreeMap::new();
        metrics.insert("quantile".into(), q);
        metrics.insert("delta_emp".into(), 1.0 - q);
        metrics.insert("mean".into(), sample.mean());
        report.rows.push(SummaryRow { n, k: None, metrics });
    }
    let t = &config.tolerances;
    let below = quantiles.iter().all(|&q| q <= t.quantile_max);
    let trend = trend_non_increasing(&quantiles, t.quantile_noise, 0.0, 0);
    report.verdict(
        "excursion_quantile",
        below && trend,
        true,
        format!(
            "{}-quantile of log M_n / log n by horizon {quantiles:?}; need <= {} and non-increasing within {}",
            p.quantile, t.quantile_max, t.quantile_noise
        ),
    );

    if p.spot_check {
        let n = config.horizons[0];
        let check = with_growing_window(&s.dist, -1, wmax, env_seed(config, 0), |env| {
            let pot = potential(env);
            let valley = find_valley(&pot, n)?;
            let x = (valley.bottom + p.spot_offset).clamp(0, valley.border);
            let x = if x == valley.bottom { valley.bottom + 1 } else { x };
            let beta = beta(env, &pot, &valley, x)?;
            let visits =
                excursion_visits(env, &valley, x, p.excursions, derive_seed(config.seed, 0, StreamTag::Excursion))?;
            Ok(variance_check(&visits, x, beta))
        });
        match check {
            Ok(c) => {
                let mut metrics = BTreeMap::new();
                metrics.insert("spot_x".into(), c.x as f64);
                metrics.insert("spot_variance".into(), c.variance);
                metrics.insert("spot_standard_error".into(), c.standard_error);
                metrics.insert("spot_bound".into(), c.bound);
                report.rows.push(SummaryRow { n, k: None, metrics });
                report.verdict(
                    "variance_bound",
                    c.passed(),
                    true,
                    format!(
                        "Var(Y_{}) = {:.4} (se {:.4}) against 4/beta = {:.4}",
                        c.x, c.variance, c.standard_error, c.bound
                    ),
                );
            }
            Err(e) => report.verdict("variance_bound", false, true, format!("spot check failed: {e}")),
        }
    }
    Ok(report.finish())
}

/// Fraction of i.i.d. environments passing the `Ω₊` proxy on `[1, w]`.
pub fn omega_plus_rate(dist: &Arc<EnvironmentDistribution>, w: i64, replicates: usize, master: u64, jobs: usize) -> Result<f64> {
    let reps = run_replications(replicates, jobs, 0.0, |i| {
        let env = sample_environment(dist, Window::new(0, w)?, derive_seed(master, i, StreamTag::Environment))?;
        omega_plus_indicator(&env, w)
    })?;
    Ok(reps.results.iter().filter(|(_, v)| *v).count() as f64 / replicates as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(experiment: ExperimentName, horizons: Vec<u64>, replicates: usize) -> ExperimentConfig {
        ExperimentConfig {
            experiment,
            distribution: DistributionSpec::TwoPoint { a: 0.3 },
            horizons,
            replicates,
            seed: 42,
            function: None,
            params: Params::default(),
            tolerances: Tolerances::default(),
            output: None,
        }
        .resolved()
    }

    #[test]
    fn replications_are_independent_of_jobs() {
        let task = |i: u64| Ok(unit_f64(derive_seed(7, i, StreamTag::Walk)));
        let a = run_replications(100, 1, 0.01, task).unwrap();
        let b = run_replications(100, 8, 0.01, task).unwrap();
        assert_eq!(a, b);
        let one = run_replications(1, 4, 0.01, task).unwrap();
        assert_eq!(one.results, vec![(0, task(0).unwrap())]);
        let c = run_replications(1000, 3, 0.01, |_| Ok(2.5)).unwrap();
        assert!(c.results.iter().all(|(_, v)| *v == 2.5));
    }

    #[test]
    fn failure_budget() {
        let task = |i: u64| if i % 50 == 0 { Err(Error::Truncation("x".into())) } else { Ok(i) };
        let r = run_replications(100, 2, 0.05, task).unwrap();
        assert_eq!(r.failures.len(), 2);
        assert_eq!(run_replications(100, 2, 0.01, task), Err(Error::FailureBudget { failed: 2, total: 100 }));
        let fatal = |_| -> Result<u64> { Err(Error::Config("bad".into())) };
        assert!(matches!(run_replications(10, 1, 1.0, fatal), Err(Error::Config(_))));
    }

    #[test]
    fn trend_rules() {
        assert!(trend_non_increasing(&[0.3, 0.2, 0.2, 0.1], 0.0, 0.0, 0));
        assert!(!trend_non_increasing(&[0.3, 0.31, 0.1], 0.0, 0.0, 0));
        assert!(trend_non_increasing(&[0.3, 0.31, 0.1], 0.0, 0.02, 1));
        assert!(!trend_non_increasing(&[0.3, 0.31, 0.1, 0.11], 0.0, 0.02, 1));
        assert!(!trend_non_increasing(&[0.3, 0.33, 0.1], 0.0, 0.02, 1));
    }

    #[test]
    fn config_validation() {
        let mut c = config(ExperimentName::Lln, vec![10, 5], 1);
        c.tolerances.clt_ks_max = 0.0;
        let d = c.diagnostics();
        assert_eq!(d.len(), 3, "{d:?}");
        let mut c = config(ExperimentName::Theorem1, vec![10], 2);
        c.distribution = DistributionSpec::TwoPoint { a: 0.5 };
        assert!(c.diagnostics()[0].contains("non-degeneracy"));
    }

    #[test]
    fn hash_ignores_output_and_tracks_seed() {
        let c = config(ExperimentName::Lln, vec![10], 2);
        let mut d = c.clone();
        d.output = Some("elsewhere".into());
        assert_eq!(c.hash(), d.hash());
        d.seed += 1;
        assert_ne!(c.hash(), d.hash());
    }

    #[test]
    fn flat_potential_a_is_linear() {
        let pot = Potential::from_values(-1, vec![0.0; 12]).unwrap();
        let valley = Valley { n: 0, depth: 1.0, bottom: 0, border: 8 };
        assert!((log_max_a(&pot, &valley).unwrap() - 8f64.ln()).abs() < 1e-12);
        let valley = Valley { n: 0, depth: 1.0, bottom: 3, border: 8 };
        assert!((log_max_a(&pot, &valley).unwrap() - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn beta_on_flat_segment_is_gamblers_ruin() {
        let env = Environment::from_values(0, vec![0.5; 10]).unwrap();
        let pot = potential(&env);
        let valley = Valley { n: 0, depth: 1.0, bottom: 2, border: 8 };
        // from x - 1 = b the chain is already at the bottom
        assert_eq!(beta(&env, &pot, &valley, 3).unwrap(), 0.5);
        // from 4, reach 2 before 5 with probability 1/3
        assert!((beta(&env, &pot, &valley, 5).unwrap() - 0.5 / 3.0).abs() < 1e-15);
        assert!((beta(&env, &pot, &valley, 0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn excursion_variance_within_bound() {
        let env = Environment::from_values(0, vec![0.5, 0.3, 0.7, 0.7, 0.3, 0.3, 0.3, 0.3, 0.5]).unwrap();
        let pot = potential(&env);
        let valley = Valley { n: 0, depth: 1.0, bottom: 3, border: 7 };
        for x in [0, 1, 2, 4, 5, 6, 7] {
            let b = beta(&env, &pot, &valley, x).unwrap();
            let visits = excursion_visits(&env, &valley, x, 20_000, x as u64).unwrap();
            let c = variance_check(&visits, x, b);
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn lln_constant_f_has_no_deviation() {
        let mut c = config(ExperimentName::Lln, vec![100, 1000], 8);
        c.params.f_up = 0.4;
        c.params.f_down = 0.4;
        let r = run(&c, 2).unwrap();
        assert!(r.data.iter().all(|d| (d.value - 0.4).abs() < 1e-12));
        assert_eq!(r.metric(1000, None, "p_deviation"), Some(0.0));
    }

    #[test]
    fn theorem1_constant_function_is_degenerate() {
        let mut c = config(ExperimentName::Theorem1, vec![100, 1000], 6);
        c.function = Some(FunctionSpec::Constant { value: 1.0 });
        let r = run(&c, 2).unwrap();
        assert_eq!(r.metric(1000, None, "ks_sigma_n"), Some(0.0));
        assert_eq!(r.metric(1000, None, "ks_s_n"), Some(0.0));
    }

    #[test]
    fn deviation_with_wide_epsilon_is_zero() {
        let mut c = config(ExperimentName::Deviation, vec![100, 1000], 6);
        c.params.epsilon = Some(2.0);
        let r = run(&c, 1).unwrap();
        assert_eq!(r.metric(100, None, "p_deviation"), Some(0.0));
    }

    #[test]
    fn clt_constant_f_is_degenerate() {
        let mut c = config(ExperimentName::Clt, vec![1000], 10);
        c.params.f_up = 1.0;
        c.params.f_down = 1.0;
        let r = run(&c, 2).unwrap();
        assert!(r.data.iter().all(|d| d.value == 0.0));
        assert_eq!(r.metric(1000, None, "ks"), Some(0.0));
    }

    #[test]
    fn growth_with_huge_k_is_vacuous() {
        let mut c = config(ExperimentName::Growth, vec![1000], 20);
        c.params.k_list = vec![1_000_000];
        let r = run(&c, 2).unwrap();
        assert_eq!(r.metric(1000, Some(1_000_000), "p_right"), Some(1.0));
        assert_eq!(r.metric(1000, Some(1_000_000), "p_left"), Some(1.0));
    }
}

//! The infinite valley `Ṽ`: the two-sided potential conditioned to stay
//! non-negative on the right and strictly positive on the left.
//!
//! Each side is sampled as a Doob h-transform of the lattice walk of
//! `log ρ` (right side) or `-log ρ` (left side, read from 0 leftwards).
//! The two sides are independent. `Ṽ(0) = 0`.
//!
//! The harmonic function of the walk killed on entering `(-∞, 0)` is the
//! renewal function of its strict descending ladder heights. For two-point
//! laws this is `h(u) = u + 1` in lattice units; for other lattice laws it
//! is estimated by simulating ladder heights.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::environment::{Environment, EnvironmentDistribution, Window};
use crate::error::{Error, Result};
use crate::measures::CylinderFunction;
use crate::numeric::log_sum_exp;
use crate::rng::{mix64, stream, unit_f64};

/// Which sampler produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SamplerTag {
    HTransform,
    RejectionOracle,
    /// Built from explicit values.
    Explicit,
}

/// A truncated realization of `Ṽ` on `[window.min, window.max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfiniteValleySample {
    pub window: Window,
    /// `Ṽ(x)` in window order.
    pub values: Vec<f64>,
    /// Lattice levels `Ṽ(x) / span`, when sampled on a lattice.
    pub levels: Option<Vec<i64>>,
    /// Estimate of `Σ e^{-Ṽ(x)}` over sites outside the window.
    pub tail_mass_bound: f64,
    pub sampler: SamplerTag,
}

impl InfiniteValleySample {
    /// Sample with explicit values; sites outside the window carry no mass.
    pub fn from_values(x_min: i64, values: Vec<f64>) -> Result<Self> {
        let window = Window::new(x_min, x_min + values.len() as i64 - 1)?;
        if !window.contains(0) {
            return Err(Error::Domain("window must contain 0".into()));
        }
        Ok(Self { window, values, levels: None, tail_mass_bound: 0.0, sampler: SamplerTag::Explicit })
    }

    fn from_levels(left: &[i64], right: &[i64], span: f64, tail: f64, sampler: SamplerTag) -> Self {
        // left[k] = level at -(k+1), right[k] = level at k
        let levels: Vec<i64> = left.iter().rev().chain(right.iter()).copied().collect();
        let window = Window { min: -(left.len() as i64), max: right.len() as i64 - 1 };
        let values = levels.iter().map(|&l| l as f64 * span).collect();
        Self { window, values, levels: Some(levels), tail_mass_bound: tail, sampler }
    }

    pub fn get(&self, x: i64) -> Result<f64> {
        Ok(self.values[self.window.check(x)?])
    }

    /// `log Σ_{window} e^{-Ṽ}`.
    pub fn log_mass(&self) -> f64 {
        log_sum_exp(self.values.iter().map(|v| -v))
    }

    /// `ω̃(x)` with `Ṽ = +∞` outside the window: 1 at and left of the
    /// left edge, 0 right of the right edge.
    pub fn omega_truncated(&self, x: i64) -> f64 {
        if x <= self.window.min {
            1.0
        } else if x > self.window.max {
            0.0
        } else {
            let i = (x - self.window.min) as usize;
            logistic_down(self.values[i] - self.values[i - 1])
        }
    }

    /// Writes `x,V,omega,nu` rows for `x` in the window.
    pub fn write_csv<W: std::io::Write>(&self, nu: &TildeNu, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,V,omega,nu")?;
        for (i, x) in (self.window.min..=self.window.max).enumerate() {
            writeln!(out, "{x},{},{},{}", self.values[i], self.omega_truncated(x), nu.get(x))?;
        }
        Ok(())
    }

    /// The environment `ω̃` on `[window.min + 1, window.max]`.
    pub fn tilde_environment(&self) -> Result<Environment> {
        let omega = (self.window.min + 1..=self.window.max).map(|x| self.omega_truncated(x)).collect();
        Environment::from_values(self.window.min + 1, omega)
    }
}

// 1 / (1 + e^d), evaluated without overflow.
#[inline]
fn logistic_down(d: f64) -> f64 {
    if d >= 0.0 {
        let e = (-d).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + d.exp())
    }
}

/// `ω̃(x) = e^{-Ṽ(x)} / (e^{-Ṽ(x)} + e^{-Ṽ(x-1)})`; `x - 1` and `x` must be
/// in the window.
pub fn tilde_omega(sample: &InfiniteValleySample, x: i64) -> Result<f64> {
    if !(sample.window.contains(x) && sample.window.contains(x - 1)) {
        return Err(Error::Domain(format!(
            "ω̃({x}) needs sites {} and {x} inside [{}, {}]",
            x - 1,
            sample.window.min,
            sample.window.max
        )));
    }
    Ok(sample.omega_truncated(x))
}

/// `ν̃` of the truncated valley on `[window.min, window.max + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeNu {
    pub first: i64,
    pub weights: Vec<f64>,
    /// `log(2 Σ_z e^{-Ṽ(z)})` over the window.
    pub log_normalizer: f64,
}

impl TildeNu {
    pub fn get(&self, x: i64) -> f64 {
        let i = x - self.first;
        if i < 0 || i as usize >= self.weights.len() {
            0.0
        } else {
            self.weights[i as usize]
        }
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.weights.iter().enumerate().map(|(i, &w)| (self.first + i as i64, w))
    }
}

pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-9;

/// `ν̃(x) = (e^{-Ṽ(x-1)} + e^{-Ṽ(x)}) / (2 Σ_z e^{-Ṽ(z)})`.
///
/// Fails when the declared tail mass exceeds `tolerance` relative to the
/// window mass.
pub fn tilde_nu(sample: &InfiniteValleySample, tolerance: f64) -> Result<TildeNu> {
    let log_mass = sample.log_mass();
    let relative_tail = sample.tail_mass_bound / log_mass.exp();
    if !(relative_tail <= tolerance) {
        return Err(Error::Truncation(format!(
            "tail mass {relative_tail:e} exceeds tolerance {tolerance:e}; extend the window"
        )));
    }
    // shift by the minimum of Ṽ so the largest term is e^0
    let base = sample.values.iter().copied().fold(f64::INFINITY, f64::min);
    let g: Vec<f64> = sample.values.iter().map(|&v| (base - v).exp()).collect();
    let total: f64 = 2.0 * g.iter().sum::<f64>();
    let mut weights = Vec::with_capacity(g.len() + 1);
    weights.push(g[0] / total);
    for i in 1..g.len() {
        weights.push((g[i - 1] + g[i]) / total);
    }
    weights.push(g[g.len() - 1] / total);
    Ok(TildeNu { first: sample.window.min, weights, log_normalizer: (2.0f64).ln() + log_mass })
}

/// One draw of `S_∞(F) = Σ_x ν̃(x) F(ω̃(x-m), ..., ω̃(x+m))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SInfinityDraw {
    pub value: f64,
    /// `sup|F|` times the relative tail mass left out of the window.
    pub tail_error_bound: f64,
}

pub fn s_infty_eval(
    sample: &InfiniteValleySample,
    nu: &TildeNu,
    f: &CylinderFunction,
) -> Result<SInfinityDraw> {
    let m = f.radius() as i64;
    if (sample.window.len() as i64) < 2 * m + 1 {
        return Err(Error::Domain(format!(
            "window of {} sites is too small for a radius-{m} function",
            sample.window.len()
        )));
    }
    let mut coords = vec![0.0; 2 * m as usize + 1];
    let (mut sum, mut mass) = (0.0, 0.0);
    for (x, w) in nu.sites() {
        for (j, c) in coords.iter_mut().enumerate() {
            *c = sample.omega_truncated(x - m + j as i64);
        }
        sum += w * f.eval(&coords);
        mass += w;
    }
    let value = sum / mass;
    let relative_tail = sample.tail_mass_bound / sample.log_mass().exp();
    Ok(SInfinityDraw { value, tail_error_bound: relative_tail * f.sup_bound() })
}

/// Harmonic function of a lattice walk killed on entering `(-∞, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Harmonic {
    /// `h(u) = u + 1`.
    Linear,
    /// Tabulated renewal function, linearly extrapolated past the table.
    Tabulated { values: Vec<f64>, slope: f64 },
}

impl Harmonic {
    pub fn eval(&self, u: i64) -> f64 {
        if u < 0 {
            return 0.0;
        }
        match self {
            Harmonic::Linear => u as f64 + 1.0,
            Harmonic::Tabulated { values, slope } => {
                let last = values.len() as i64 - 1;
                if u <= last {
                    values[u as usize]
                } else {
                    values[last as usize] + slope * (u - last) as f64
                }
            }
        }
    }
}

/// Settings for the ladder-height estimate of the renewal function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderEstimate {
    /// Upper limit on the number of ladder heights drawn.
    pub max_samples: usize,
    /// Samples per batch; estimation stops once the mean ladder height
    /// changes by less than `plateau` (relative) between batches.
    pub batch: usize,
    pub plateau: f64,
    /// Excursions longer than this are discarded.
    pub max_steps: u64,
    pub table_len: usize,
    pub seed: u64,
}

impl Default for LadderEstimate {
    fn default() -> Self {
        Self {
            max_samples: 1_000_000,
            batch: 100_000,
            plateau: 1e-3,
            max_steps: 10_000,
            table_len: 4096,
            seed: 0x5eed,
        }
    }
}

/// Renewal function of the strict descending ladder heights of the walk with
/// the given `(step, probability)` increments, estimated by simulation.
pub fn estimate_renewal(increments: &[(i64, f64)], cfg: &LadderEstimate) -> Result<Harmonic> {
    let max_down = increments.iter().map(|&(d, _)| -d).max().unwrap_or(0);
    if max_down <= 0 {
        return Err(Error::Domain("walk has no downward steps".into()));
    }
    let cumulative: Vec<f64> = increments
        .iter()
        .scan(0.0, |acc, &(_, p)| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let pick = |u: f64| {
        let i = cumulative.iter().position(|&c| u < c).unwrap_or(increments.len() - 1);
        increments[i].0
    };

    let mut rng = stream(cfg.seed);
    let mut counts = vec![0u64; max_down as usize + 1];
    let mut drawn = 0usize;
    let mut previous_mean = f64::NAN;
    while drawn < cfg.max_samples {
        let mut accepted = 0usize;
        while accepted < cfg.batch.min(cfg.max_samples - drawn) {
            let mut s: i64 = 0;
            let mut steps = 0u64;
            while s >= 0 && steps < cfg.max_steps {
                s += pick(unit_f64(rng.next_u64()));
                steps += 1;
            }
            if s < 0 {
                counts[(-s) as usize] += 1;
                accepted += 1;
            }
        }
        drawn += accepted;
        let total: u64 = counts.iter().sum();
        let mean = counts.iter().enumerate().map(|(j, &c)| j as f64 * c as f64).sum::<f64>() / total as f64;
        if ((mean - previous_mean) / mean).abs() < cfg.plateau {
            break;
        }
        previous_mean = mean;
    }

    let total: u64 = counts.iter().sum();
    let q: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let mean_height: f64 = q.iter().enumerate().map(|(j, &p)| j as f64 * p).sum();
    // renewal masses r(0) = 1, r(m) = Σ_j q_j r(m - j); h(u) = Σ_{m <= u} r(m)
    let mut r = vec![0.0; cfg.table_len];
    r[0] = 1.0;
    for m in 1..cfg.table_len {
        r[m] = (1..q.len()).filter(|&j| j <= m).map(|j| q[j] * r[m - j]).sum();
    }
    let values = r
        .iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    Ok(Harmonic::Tabulated { values, slope: 1.0 / mean_height })
}

/// One side of the valley as a conditioned lattice walk.
#[derive(Debug, Clone, PartialEq)]
struct SideChain {
    increments: Vec<(i64, f64)>,
    harmonic: Harmonic,
    /// Smallest allowed level after the start.
    floor: i64,
}

impl SideChain {
    // Harmonic function for the walk confined to [floor, ∞).
    fn h(&self, v: i64) -> f64 {
        self.harmonic.eval(v - self.floor)
    }

    fn next(&self, u: i64, rng: &mut ChaCha8Rng) -> i64 {
        let mut weights = [0.0f64; 16];
        let mut total = 0.0;
        for (k, &(d, p)) in self.increments.iter().enumerate() {
            let w = if u + d >= self.floor { p * self.h(u + d) } else { 0.0 };
            weights[k] = w;
            total += w;
        }
        let mut target = unit_f64(rng.next_u64()) * total;
        for (k, &(d, _)) in self.increments.iter().enumerate() {
            if target < weights[k] {
                return u + d;
            }
            target -= weights[k];
        }
        // rounding: take the last admissible step
        let d = self
            .increments
            .iter()
            .enumerate()
            .rev()
            .find(|(k, _)| weights[*k] > 0.0)
            .map(|(_, &(d, _))| d)
            .unwrap_or(0);
        u + d
    }
}

/// Truncation policy for adaptive windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationPolicy {
    pub initial: usize,
    pub block: usize,
    pub relative_tolerance: f64,
    pub cap: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { initial: 64, block: 32, relative_tolerance: 1e-10, cap: 10_000 }
    }
}

/// A prepared h-transform sampler for one distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct HTransformSampler {
    span: f64,
    right: SideChain,
    left: SideChain,
}

fn lattice_increments(dist: &EnvironmentDistribution) -> Result<(f64, Vec<(i64, f64)>)> {
    let lattice = dist.lattice().ok_or_else(|| {
        Error::UnsupportedSampler("the h-transform sampler needs an arithmetic law of log rho".into())
    })?;
    if dist.atoms().len() > 16 {
        return Err(Error::UnsupportedSampler("at most 16 atoms are supported".into()));
    }
    let inc = lattice.steps.iter().zip(dist.atoms()).map(|(&s, a)| (s, a.weight)).collect();
    Ok((lattice.span, inc))
}

fn is_simple(inc: &[(i64, f64)]) -> bool {
    inc.iter().all(|&(d, _)| d == 1 || d == -1)
}

impl HTransformSampler {
    /// Uses the exact harmonic function for `±1` lattice walks and the
    /// ladder-height estimate otherwise.
    pub fn new(dist: &EnvironmentDistribution, ladder: &LadderEstimate) -> Result<Self> {
        let (span, right_inc) = lattice_increments(dist)?;
        let left_inc: Vec<(i64, f64)> = right_inc.iter().map(|&(d, p)| (-d, p)).collect();
        let harmonic_for = |inc: &[(i64, f64)], salt: u64| -> Result<Harmonic> {
            if is_simple(inc) {
                Ok(Harmonic::Linear)
            } else {
                estimate_renewal(inc, &LadderEstimate { seed: mix64(ladder.seed ^ salt), ..*ladder })
            }
        };
        Ok(Self {
            span,
            right: SideChain { harmonic: harmonic_for(&right_inc, 1)?, increments: right_inc, floor: 0 },
            left: SideChain { harmonic: harmonic_for(&left_inc, 2)?, increments: left_inc, floor: 1 },
        })
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    fn side_streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
        (stream(mix64(seed ^ 0x7269_6768_74)), stream(mix64(seed ^ 0x6c65_6674)))
    }

    /// Samples `Ṽ` on a fixed window `[-left_len, right_len]`.
    pub fn sample(&self, window: Window, seed: u64) -> Result<InfiniteValleySample> {
        if !window.contains(0) {
            return Err(Error::Domain("window must contain 0".into()));
        }
        let (mut rr, mut rl) = Self::side_streams(seed);
        let mut right = vec![0i64];
        extend_side(&self.right, &mut right, window.max as usize + 1, &mut rr);
        let mut left = Vec::new();
        extend_side_left(&self.left, &mut left, (-window.min) as usize, &mut rl);
        let tail = edge_mass(&left, self.span, 32) + edge_mass(&right, self.span, 32);
        Ok(InfiniteValleySample::from_levels(&left, &right, self.span, tail, SamplerTag::HTransform))
    }

    /// Samples with windows grown until each side's outer block carries
    /// relative mass below the policy tolerance.
    pub fn sample_adaptive(&self, seed: u64, policy: &TruncationPolicy) -> Result<InfiniteValleySample> {
        let (mut rr, mut rl) = Self::side_streams(seed);
        let mut right = vec![0i64];
        let mut left = Vec::new();
        let mut right_len = policy.initial + 1;
        let mut left_len = policy.initial;
        loop {
            extend_side(&self.right, &mut right, right_len, &mut rr);
            extend_side_left(&self.left, &mut left, left_len, &mut rl);
            let total = log_sum_exp(left.iter().chain(right.iter()).map(|&l| -(l as f64) * self.span)).exp();
            let grow_right = edge_mass(&right, self.span, policy.block) > policy.relative_tolerance * total;
            let grow_left = edge_mass(&left, self.span, policy.block) > policy.relative_tolerance * total;
            if !grow_right && !grow_left {
                break;
            }
            if grow_right {
                right_len *= 2;
            }
            if grow_left {
                left_len *= 2;
            }
            if right_len > policy.cap + 1 || left_len > policy.cap {
                return Err(Error::Truncation(format!(
                    "window cap of {} sites per side reached",
                    policy.cap
                )));
            }
        }
        let tail = edge_mass(&left, self.span, policy.block) + edge_mass(&right, self.span, policy.block);
        Ok(InfiniteValleySample::from_levels(&left, &right, self.span, tail, SamplerTag::HTransform))
    }
}

fn extend_side(chain: &SideChain, levels: &mut Vec<i64>, len: usize, rng: &mut ChaCha8Rng) {
    while levels.len() < len {
        let u = *levels.last().expect("right side starts at level 0");
        levels.push(chain.next(u, rng));
    }
}

// Left levels are stored from -1 outwards; the chain starts at level 0 at x = 0.
fn extend_side_left(chain: &SideChain, levels: &mut Vec<i64>, len: usize, rng: &mut ChaCha8Rng) {
    while levels.len() < len {
        let u = levels.last().copied().unwrap_or(0);
        levels.push(chain.next(u, rng));
    }
}

// Σ e^{-Ṽ} over the outermost `block` sites of one side.
fn edge_mass(levels: &[i64], span: f64, block: usize) -> f64 {
    let start = levels.len().saturating_sub(block);
    levels[start..].iter().map(|&l| (-(l as f64) * span).exp()).sum()
}

/// Samples `Ṽ` on `window` with the h-transform.
pub fn sample_tilde_v_htransform(
    dist: &EnvironmentDistribution,
    window: Window,
    seed: u64,
) -> Result<InfiniteValleySample> {
    HTransformSampler::new(dist, &LadderEstimate::default())?.sample(window, seed)
}

pub const ORACLE_PROPOSAL_BUDGET: u64 = 10_000_000;

/// Finite-depth rejection approximation of `Ṽ`: unconditioned paths on
/// `[-depth, depth]` are kept iff `V >= 0` on `[0, depth]` and `V > 0` on
/// `[-depth, -1]`. The two sides are independent and their acceptance
/// events factorize, so each side is proposed until it is accepted.
pub fn sample_tilde_v_rejection(
    dist: &EnvironmentDistribution,
    window: Window,
    depth: usize,
    seed: u64,
) -> Result<InfiniteValleySample> {
    let (span, inc) = lattice_increments(dist).map_err(|_| {
        Error::UnsupportedSampler("the rejection oracle needs an arithmetic law of log rho".into())
    })?;
    if !window.contains(0) {
        return Err(Error::Domain("window must contain 0".into()));
    }
    if depth < window.max as usize || depth < (-window.min) as usize {
        return Err(Error::Domain(format!("depth {depth} is smaller than the window")));
    }
    let cumulative: Vec<f64> = inc
        .iter()
        .scan(0.0, |acc, &(_, p)| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let pick = |u: f64| {
        let i = cumulative.iter().position(|&c| u < c).unwrap_or(inc.len() - 1);
        inc[i].0
    };
    let (mut rr, mut rl) = HTransformSampler::side_streams(seed);

    let draw = |rng: &mut ChaCha8Rng, sign: i64, floor: i64| -> Result<Vec<i64>> {
        let mut path = Vec::with_capacity(depth);
        for _ in 0..ORACLE_PROPOSAL_BUDGET {
            path.clear();
            let mut level = 0i64;
            let ok = (0..depth).all(|_| {
                level += sign * pick(unit_f64(rng.next_u64()));
                path.push(level);
                level >= floor
            });
            if ok {
                return Ok(path);
            }
        }
        Err(Error::OracleInfeasible { proposals: ORACLE_PROPOSAL_BUDGET })
    };

    let right_path = draw(&mut rr, 1, 0)?;
    let left_path = draw(&mut rl, -1, 1)?;
    let mut right = vec![0i64];
    right.extend_from_slice(&right_path[..window.max as usize]);
    let left = left_path[..(-window.min) as usize].to_vec();
    Ok(InfiniteValleySample::from_levels(&left, &right, span, 0.0, SamplerTag::RejectionOracle))
}

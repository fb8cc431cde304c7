//! The quenched walk reflected at 0: stepping, trajectories, local times,
//! hitting times, and exact birth-death hitting probabilities.

use std::io::{self, Write};

use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::environment::{Environment, Potential};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::rng::{stream, unit_f64};

/// One transition of the walk from `x` driven by the uniform `u`.
pub fn step(env: &Environment, x: i64, u: f64) -> Result<i64> {
    if x < 0 {
        return Err(Error::Domain(format!("the walk lives on x >= 0, got {x}")));
    }
    if x == 0 {
        return Ok(1);
    }
    Ok(if u < env.omega(x)? { x + 1 } else { x - 1 })
}

/// Streaming walker: yields `X_1, X_2, ...` without storing the path.
///
/// Step `k` consumes the `k`-th uniform of the stream whether or not the
/// walk is at the reflecting site.
pub struct Walker<'a> {
    omega: &'a [f64],
    offset: i64,
    max: i64,
    pos: i64,
    rng: ChaCha8Rng,
}

impl<'a> Walker<'a> {
    pub fn new(env: &'a Environment, seed: u64) -> Self {
        let w = env.window();
        Self { omega: env.values(), offset: -w.min, max: w.max, pos: 0, rng: stream(seed) }
    }

    /// Starts at `start` instead of 0.
    pub fn starting_at(env: &'a Environment, start: i64, seed: u64) -> Result<Self> {
        if start < 0 {
            return Err(Error::Domain(format!("the walk lives on x >= 0, got {start}")));
        }
        env.omega(start)?;
        let mut w = Self::new(env, seed);
        w.pos = start;
        Ok(w)
    }

    pub fn position(&self) -> i64 {
        self.pos
    }

    #[inline]
    pub fn advance(&mut self) -> Result<i64> {
        let u = unit_f64(self.rng.next_u64());
        let x = self.pos;
        let next = if x == 0 || u < self.omega[(x + self.offset) as usize] {
            x + 1
        } else {
            x - 1
        };
        if next > self.max {
            return Err(Error::OutOfWindow { site: next, min: -self.offset, max: self.max });
        }
        self.pos = next;
        Ok(next)
    }
}

/// A stored path `X_0 = 0, X_1, ..., X_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<i64>,
    /// Seed of the environment the path was run in.
    pub env_seed: u64,
    pub seed: u64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    /// Writes `k,X_k` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,x")?;
        for (k, x) in self.steps.iter().enumerate() {
            writeln!(out, "{k},{x}")?;
        }
        Ok(())
    }
}

/// Runs the walk for `n` steps in `env`.
pub fn simulate(env: &Environment, n: usize, seed: u64) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let mut walker = Walker::new(env, seed);
    let mut steps = Vec::with_capacity(n + 1);
    steps.push(0);
    for _ in 0..n {
        steps.push(walker.advance()?);
    }
    Ok(Trajectory { steps, env_seed: env.seed(), seed })
}

/// `ξ(n, x)`: visits to `x` at times `1..=n`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocalTimeProfile {
    pub n: u64,
    /// `counts[x]` for `x = 0, 1, ...`.
    pub counts: Vec<u64>,
}

impl LocalTimeProfile {
    pub fn record(&mut self, x: i64) {
        let x = x as usize;
        if x >= self.counts.len() {
            self.counts.resize(x + 1, 0);
        }
        self.counts[x] += 1;
        self.n += 1;
    }

    pub fn get(&self, x: i64) -> u64 {
        if x < 0 {
            return 0;
        }
        self.counts.get(x as usize).copied().unwrap_or(0)
    }

    /// Sites with a nonzero count and their counts.
    pub fn iter(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(x, &c)| (x as i64, c))
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Writes `x,count` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,count")?;
        for (x, c) in self.iter() {
            writeln!(out, "{x},{c}")?;
        }
        Ok(())
    }
}

pub fn local_times(traj: &Trajectory) -> LocalTimeProfile {
    let mut lt = LocalTimeProfile::default();
    for &x in &traj.steps[1..] {
        lt.record(x);
    }
    lt
}

/// A first-passage time observed up to a finite horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HittingTime {
    Hit(u64),
    /// Not hit by the horizon.
    Censored { horizon: u64 },
}

impl HittingTime {
    pub fn time(self) -> Option<u64> {
        match self {
            HittingTime::Hit(t) => Some(t),
            HittingTime::Censored { .. } => None,
        }
    }
}

/// First `k > 0` with `X_k = target`.
pub fn hitting_time(traj: &Trajectory, target: i64) -> HittingTime {
    hitting_time_after(traj, target, 0)
}

/// First `k > after` with `X_k = target`.
pub fn hitting_time_after(traj: &Trajectory, target: i64, after: u64) -> HittingTime {
    traj.steps
        .iter()
        .enumerate()
        .skip(after as usize + 1)
        .find(|(_, &x)| x == target)
        .map(|(k, _)| HittingTime::Hit(k as u64))
        .unwrap_or(HittingTime::Censored { horizon: traj.horizon() as u64 })
}

/// Successive visit times `T^1_y < T^2_y < ...` within the trajectory.
pub fn visit_times(traj: &Trajectory, target: i64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut after = 0;
    while let HittingTime::Hit(t) = hitting_time_after(traj, target, after) {
        out.push(t);
        after = t;
    }
    out
}

/// Runs a fresh walk from `start` until it reaches `target` or `horizon`
/// steps have elapsed.
pub fn hitting_time_lazy(
    env: &Environment,
    start: i64,
    target: i64,
    horizon: u64,
    seed: u64,
) -> Result<HittingTime> {
    if target < 0 {
        return Err(Error::Domain(format!("target {target} is negative")));
    }
    let mut walker = Walker::starting_at(env, start, seed)?;
    for k in 1..=horizon {
        if walker.advance()? == target {
            return Ok(HittingTime::Hit(k));
        }
    }
    Ok(HittingTime::Censored { horizon })
}

/// Probability, started at `a`, of hitting `right` before `left` for the
/// chain with conductances `C(x, x+1) = exp(-V(x))`:
///
/// `Σ_{j=left}^{a-1} e^{V(j)} / Σ_{j=left}^{right-1} e^{V(j)}`.
pub fn hitting_probability(pot: &Potential, a: i64, left: i64, right: i64) -> Result<f64> {
    Ok(hitting_probabilities(pot, a, left, right)?.0)
}

/// `(P_a(right before left), P_a(left before right))`, each computed from
/// its own partial resistance sum.
pub fn hitting_probabilities(pot: &Potential, a: i64, left: i64, right: i64) -> Result<(f64, f64)> {
    if !(left < right && left <= a && a <= right) {
        return Err(Error::Domain(format!(
            "need left < right and left <= a <= right, got a={a}, [{left}, {right}]"
        )));
    }
    let v = pot.range(left, right - 1)?;
    let split = (a - left) as usize;
    let lower = log_sum_exp(v[..split].iter().copied());
    let upper = log_sum_exp(v[split..].iter().copied());
    let total = log_sum_exp([lower, upper]);
    Ok(((lower - total).exp(), (upper - total).exp()))
}

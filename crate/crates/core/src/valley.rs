//! The valley `(0, b_n, c_n)` of the potential, the reflected-chain
//! measure `μ_n`, and the `ℓ¹` vector `Ξ_n`.

use serde::Serialize;

use crate::environment::{Environment, Potential};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;

/// Depth threshold `L_n = log n + sqrt(log n)`.
pub fn depth_threshold(n: u64) -> f64 {
    let l = (n as f64).ln();
    l + l.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Valley {
    pub n: u64,
    pub depth: f64,
    /// `b_n`: first minimizer of `V` on `[0, c_n]`.
    pub bottom: i64,
    /// `c_n`: first site whose rise above the running minimum reaches the depth.
    pub border: i64,
}

pub fn find_valley(pot: &Potential, n: u64) -> Result<Valley> {
    let mut v = find_valley_with_depth(pot, depth_threshold(n))?;
    v.n = n;
    Ok(v)
}

/// Single left-to-right scan maintaining the running minimum.
pub fn find_valley_with_depth(pot: &Potential, depth: f64) -> Result<Valley> {
    let w = pot.window();
    let values = pot.range(0, w.max)?;
    let mut min = values[0];
    let mut argmin = 0usize;
    for (x, &v) in values.iter().enumerate() {
        if v < min {
            min = v;
            argmin = x;
        } else if v - min >= depth {
            return Ok(Valley { n: 0, depth, bottom: argmin as i64, border: x as i64 });
        }
    }
    Err(Error::OutOfWindow { site: w.max + 1, min: w.min, max: w.max })
}

/// `μ_n` on `{0, ..., c_n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValleyMeasure {
    pub valley: Valley,
    /// `weights[x]` for `x = 0..=c_n`.
    pub weights: Vec<f64>,
    /// `log Z_n`, `Z_n = 2 Σ_{x=0}^{c_n-1} e^{-V(x)}`.
    pub log_normalizer: f64,
}

impl ValleyMeasure {
    pub fn get(&self, x: i64) -> f64 {
        if x < 0 || x > self.valley.border {
            0.0
        } else {
            self.weights[x as usize]
        }
    }

    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }

    /// Largest absolute violation of `μ = μ P̃` for the chain reflected at
    /// 0 and `c_n`.
    pub fn stationarity_residual(&self, env: &Environment) -> Result<f64> {
        let c = self.valley.border;
        let mut worst: f64 = 0.0;
        for x in 0..=c {
            let from_left = if x == 0 {
                0.0
            } else if x - 1 == 0 {
                self.get(0)
            } else {
                self.get(x - 1) * env.omega(x - 1)?
            };
            let from_right = if x == c {
                0.0
            } else if x + 1 == c {
                self.get(c)
            } else {
                self.get(x + 1) * (1.0 - env.omega(x + 1)?)
            };
            worst = worst.max((self.get(x) - from_left - from_right).abs());
        }
        Ok(worst)
    }
}

/// `μ_n(0) = 1/Z_n`, `μ_n(x) = (e^{-V(x)} + e^{-V(x-1)})/Z_n` inside,
/// `μ_n(c_n) = e^{-V(c_n - 1)}/Z_n`; exponentials are shifted by `V(b_n)`.
pub fn mu_n(pot: &Potential, valley: &Valley) -> Result<ValleyMeasure> {
    let c = valley.border;
    let v = pot.range(0, c)?;
    let base = pot.get(valley.bottom)?;
    let g: Vec<f64> = v.iter().map(|&vx| (base - vx).exp()).collect();
    let sum_g: f64 = g[..c as usize].iter().sum();
    let z = 2.0 * sum_g;
    let mut weights = Vec::with_capacity(c as usize + 1);
    weights.push(g[0] / z);
    for x in 1..c as usize {
        weights.push((g[x] + g[x - 1]) / z);
    }
    weights.push(g[c as usize - 1] / z);
    let log_normalizer = (2.0f64).ln() - base + log_sum_exp(v[..c as usize].iter().map(|&vx| base - vx));
    Ok(ValleyMeasure { valley: *valley, weights, log_normalizer })
}

/// `Ξ_n(x) = exp(-(V(b_n + x) - V(b_n)))` on `[-b_n, c_n - b_n - 1]`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct XiVector {
    pub bottom: i64,
    /// Entries for `x = -b_n, ..., c_n - b_n - 1`.
    pub entries: Vec<f64>,
    pub l1: f64,
}

impl XiVector {
    pub fn first(&self) -> i64 {
        -self.bottom
    }

    pub fn last(&self) -> i64 {
        -self.bottom + self.entries.len() as i64 - 1
    }

    pub fn get(&self, x: i64) -> f64 {
        if x < self.first() || x > self.last() {
            0.0
        } else {
            self.entries[(x - self.first()) as usize]
        }
    }
}

pub fn xi_vector(pot: &Potential, valley: &Valley) -> Result<XiVector> {
    let v = pot.range(0, valley.border - 1)?;
    let base = pot.get(valley.bottom)?;
    let entries: Vec<f64> = v.iter().map(|&vx| (base - vx).exp()).collect();
    let l1 = entries.iter().sum();
    Ok(XiVector { bottom: valley.bottom, entries, l1 })
}

/// `μ(b_n + x) = (Ξ(x) + Ξ(x-1)) / (2 ‖Ξ‖₁)` for `x = -b_n, ..., c_n - b_n`;
/// returned as `(x, weight)` pairs.
pub fn mu_from_xi(xi: &XiVector) -> Vec<(i64, f64)> {
    (xi.first()..=xi.last() + 1)
        .map(|x| (x, (xi.get(x) + xi.get(x - 1)) / (2.0 * xi.l1)))
        .collect()
}

/// `ω(b_n + x) = Ξ(x) / (Ξ(x) + Ξ(x-1))`.
pub fn omega_from_xi(xi: &XiVector, x: i64) -> Result<f64> {
    let (a, b) = (xi.get(x), xi.get(x - 1));
    if a + b == 0.0 {
        return Err(Error::Domain(format!("Ξ vanishes at {x} and {}", x - 1)));
    }
    Ok(a / (a + b))
}

//! Cylinder test functions and the measures `S_n`, `Σ_n`, `S_∞` evaluated
//! on them, plus the Hilbert-cube distance and the kernel `R`.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::environment::{potential, Environment};
use crate::error::{Error, Result};
use crate::rng::{stream, unit_f64};
use crate::valley::ValleyMeasure;
use crate::walk::{LocalTimeProfile, Trajectory};

/// Built-in test functions, selected by name in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant { value: f64 },
    /// `ω₀`.
    Omega0,
    /// `2ω₀ - 1`.
    Drift,
    /// `ω₀(1 - ω₀)`.
    Omega0Variance,
    /// `ω₀ ω₁`.
    AdjacentProduct,
    /// `Π_i ω(x + offsets[i])`.
    Product { offsets: Vec<i64> },
    /// Piecewise-linear interpolation of `(ω₀, value)` knots, constant
    /// beyond the end knots.
    Table { knots: Vec<(f64, f64)> },
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A bounded function of `ω(x - m), ..., ω(x + m)`.
#[derive(Clone)]
pub struct CylinderFunction {
    name: String,
    radius: usize,
    sup_bound: f64,
    eval: Evaluator,
}

impl fmt::Debug for CylinderFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylinderFunction")
            .field("name", &self.name)
            .field("radius", &self.radius)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

impl CylinderFunction {
    pub fn custom<F>(name: impl Into<String>, radius: usize, sup_bound: f64, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), radius, sup_bound, eval: Arc::new(f) }
    }

    pub fn from_spec(spec: &FunctionSpec) -> Result<Self> {
        Ok(match spec {
            FunctionSpec::Constant { value } => {
                let c = *value;
                Self::custom("constant", 0, c.abs(), move |_| c)
            }
            FunctionSpec::Omega0 => Self::custom("omega0", 0, 1.0, |w| w[0]),
            FunctionSpec::Drift => Self::custom("drift", 0, 1.0, |w| 2.0 * w[0] - 1.0),
            FunctionSpec::Omega0Variance => Self::custom("omega0_variance", 0, 0.25, |w| w[0] * (1.0 - w[0])),
            FunctionSpec::AdjacentProduct => Self::custom("adjacent_product", 1, 1.0, |w| w[1] * w[2]),
            FunctionSpec::Product { offsets } => {
                if offsets.is_empty() {
                    return Err(Error::Config("product needs at least one offset".into()));
                }
                let m = offsets.iter().map(|o| o.unsigned_abs()).max().unwrap_or(0) as usize;
                let idx: Vec<usize> = offsets.iter().map(|&o| (o + m as i64) as usize).collect();
                Self::custom("product", m, 1.0, move |w| idx.iter().map(|&i| w[i]).product())
            }
            FunctionSpec::Table { knots } => {
                if knots.is_empty() {
                    return Err(Error::Config("table function needs at least one knot".into()));
                }
                if knots.windows(2).any(|k| !(k[0].0 < k[1].0)) {
                    return Err(Error::Config("table knots must be strictly increasing".into()));
                }
                let knots = knots.clone();
                let sup = knots.iter().map(|k| k.1.abs()).fold(0.0, f64::max);
                Self::custom("table", 0, sup, move |w| interpolate(&knots, w[0]))
            }
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// `coords` holds the `2m + 1` values centered on the site.
    #[inline]
    pub fn eval(&self, coords: &[f64]) -> f64 {
        (self.eval)(coords)
    }

    /// `F(T_x ω)`.
    pub fn at(&self, env: &Environment, x: i64) -> Result<f64> {
        let m = self.radius as i64;
        let w = env.window();
        if x - m < w.min || x + m > w.max {
            return Err(Error::OutOfWindow { site: if x - m < w.min { x - m } else { x + m }, min: w.min, max: w.max });
        }
        let start = (x - m - w.min) as usize;
        Ok(self.eval(&env.values()[start..start + 2 * self.radius + 1]))
    }

    /// `F(T_x ω)` for every `x` whose neighbourhood fits in the window,
    /// indexed from `window.min + m`.
    pub fn profile(&self, env: &Environment) -> Vec<f64> {
        env.values().windows(2 * self.radius + 1).map(|c| self.eval(c)).collect()
    }

    /// Checks `|F| <= sup_bound` on `samples` random points of the cube.
    pub fn spot_check(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = stream(seed);
        let mut coords = vec![0.0; 2 * self.radius + 1];
        for _ in 0..samples {
            coords.iter_mut().for_each(|c| *c = unit_f64(rng.next_u64()));
            let v = self.eval(&coords);
            if !(v.abs() <= self.sup_bound * (1.0 + 1e-12)) {
                return Err(Error::Config(format!(
                    "function {} returned {v} at {coords:?}, above its bound {}",
                    self.name, self.sup_bound
                )));
            }
        }
        Ok(())
    }
}

fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    let i = knots.partition_point(|k| k.0 <= x);
    if i == 0 {
        return knots[0].1;
    }
    if i == knots.len() {
        return knots[i - 1].1;
    }
    let (x0, y0) = knots[i - 1];
    let (x1, y1) = knots[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MeasureKind {
    #[serde(rename = "S_n")]
    SN,
    #[serde(rename = "Sigma_n")]
    SigmaN,
    #[serde(rename = "S_infty")]
    SInfty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureEvaluation {
    pub value: f64,
    pub kind: MeasureKind,
    pub n: Option<u64>,
    pub function: String,
    pub env_seed: Option<u64>,
    pub walk_seed: Option<u64>,
}

/// `S_n(F) = Σ_x (ξ(n, x) / n) F(T_x ω)`.
pub fn s_n_eval(lt: &LocalTimeProfile, env: &Environment, f: &CylinderFunction) -> Result<MeasureEvaluation> {
    let mut sum = 0.0;
    for (x, count) in lt.iter() {
        sum += count as f64 * f.at(env, x)?;
    }
    Ok(MeasureEvaluation {
        value: sum / lt.n as f64,
        kind: MeasureKind::SN,
        n: Some(lt.n),
        function: f.name().to_owned(),
        env_seed: Some(env.seed()),
        walk_seed: None,
    })
}

/// `(1/n) Σ_{k=1}^n F(T_{X_k} ω)`, summed along the path.
pub fn s_n_temporal(traj: &Trajectory, env: &Environment, f: &CylinderFunction) -> Result<MeasureEvaluation> {
    let n = traj.horizon();
    let mut sum = 0.0;
    for &x in &traj.steps[1..] {
        sum += f.at(env, x)?;
    }
    Ok(MeasureEvaluation {
        value: sum / n as f64,
        kind: MeasureKind::SN,
        n: Some(n as u64),
        function: f.name().to_owned(),
        env_seed: Some(traj.env_seed),
        walk_seed: Some(traj.seed),
    })
}

/// `Σ_n(F) = Σ_x μ_n(x) F(T_x ω)`.
pub fn sigma_n_eval(mu: &ValleyMeasure, env: &Environment, f: &CylinderFunction) -> Result<MeasureEvaluation> {
    // dividing by the summed weights makes constant F come out exact
    let (mut sum, mut mass) = (0.0, 0.0);
    for (x, &w) in mu.weights.iter().enumerate() {
        sum += w * f.at(env, x as i64)?;
        mass += w;
    }
    Ok(MeasureEvaluation {
        value: sum / mass,
        kind: MeasureKind::SigmaN,
        n: Some(mu.valley.n),
        function: f.name().to_owned(),
        env_seed: Some(env.seed()),
        walk_seed: None,
    })
}

/// `d(ω, ω') = Σ_x 2^{-|x|} |ω(x) - ω'(x)|` over the common window, with
/// the largest possible contribution of the sites outside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HilbertDistance {
    pub value: f64,
    pub tail_bound: f64,
}

pub fn hilbert_distance(a: &Environment, b: &Environment) -> Result<HilbertDistance> {
    let w = a.window();
    if w != b.window() {
        return Err(Error::Domain("environments must share a window".into()));
    }
    let value = (w.min..=w.max)
        .zip(a.values().iter().zip(b.values()))
        .map(|(x, (p, q))| (-(x.abs() as f64)).exp2() * (p - q).abs())
        .sum();
    let tail_bound = (-(w.max as f64)).exp2() + (w.min as f64).exp2();
    Ok(HilbertDistance { value, tail_bound })
}

/// `RF(ω) = ω(0) F(T_1 ω) + (1 - ω(0)) F(T_{-1} ω)`.
pub fn r_kernel_expectation(env: &Environment, f: &CylinderFunction) -> Result<f64> {
    r_kernel_at(env, f, 0)
}

/// `RF(T_x ω)`.
pub fn r_kernel_at(env: &Environment, f: &CylinderFunction, x: i64) -> Result<f64> {
    let p = env.omega(x)?;
    let up = f.at(env, x + 1)?;
    let down = f.at(env, x - 1)?;
    Ok(p * up + (1.0 - p) * down)
}

/// Finite-window proxy of `Ω₊`: `Σ_{y=1}^x log ρ_y >= 0` for `1 <= x <= upto`.
/// `false` is definitive; `true` only speaks for the window.
pub fn omega_plus_indicator(env: &Environment, upto: i64) -> Result<bool> {
    if upto < 1 {
        return Err(Error::Domain("the Ω₊ proxy needs at least one site".into()));
    }
    let pot = potential(env);
    let values = pot.range(1, upto)?;
    // absorbs rounding in environments rebuilt from float potentials
    Ok(values.iter().all(|&v| v >= -1e-9))
}

//! Random environments, `log ρ`, and the potential `V`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SiteUniforms;

const WEIGHT_TOL: f64 = 1e-12;
const MEAN_TOL: f64 = 1e-12;
const LATTICE_TOL: f64 = 1e-12;

/// Inclusive integer interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub min: i64,
    pub max: i64,
}

impl Window {
    pub fn new(min: i64, max: i64) -> Result<Self> {
        if min > max {
            return Err(Error::Domain(format!("empty window [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, x: i64) -> bool {
        self.min <= x && x <= self.max
    }

    pub fn len(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub(crate) fn check(&self, x: i64) -> Result<usize> {
        if self.contains(x) {
            Ok((x - self.min) as usize)
        } else {
            Err(Error::OutOfWindow { site: x, min: self.min, max: self.max })
        }
    }
}

/// Distribution of a single site as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// `ω ∈ {a, 1-a}` with equal probabilities.
    TwoPoint { a: f64 },
    /// Finitely many `(value, weight)` atoms. `span` is the lattice step of
    /// `log ρ`; when omitted it is inferred.
    FiniteSupport {
        atoms: Vec<(f64, f64)>,
        delta0: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        span: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub omega: f64,
    pub weight: f64,
    pub log_rho: f64,
}

/// `log ρ = step · span` for every atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub span: f64,
    /// Lattice step of each atom, in atom order.
    pub steps: Vec<i64>,
}

/// A validated site distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentDistribution {
    spec: DistributionSpec,
    atoms: Vec<Atom>,
    cumulative: Vec<f64>,
    delta0: f64,
    lattice: Option<Lattice>,
}

impl EnvironmentDistribution {
    /// The two-point ("Temkin") law `ω ∈ {a, 1-a}`.
    pub fn two_point(a: f64) -> Result<Self> {
        Self::from_spec(&DistributionSpec::TwoPoint { a })
    }

    pub fn finite_support(atoms: Vec<(f64, f64)>, delta0: f64, span: Option<f64>) -> Result<Self> {
        Self::from_spec(&DistributionSpec::FiniteSupport { atoms, delta0, span })
    }

    pub fn from_spec(spec: &DistributionSpec) -> Result<Self> {
        let (raw, delta0, declared_span) = match spec {
            DistributionSpec::TwoPoint { a } => {
                let a = *a;
                if !(a > 0.0 && a <= 0.5) {
                    return Err(Error::Config(format!(
                        "two_point parameter a = {a} must lie in (0, 1/2)"
                    )));
                }
                let delta0 = a.min(1.0 - a);
                let span = ((1.0 - a) / a).ln();
                (vec![(a, 0.5), (1.0 - a, 0.5)], delta0, Some(span))
            }
            DistributionSpec::FiniteSupport { atoms, delta0, span } => {
                (atoms.clone(), *delta0, *span)
            }
        };

        if !(delta0 > 0.0 && delta0 <= 0.5) {
            return Err(Error::Config(format!("delta0 = {delta0} must lie in (0, 1/2]")));
        }
        if raw.is_empty() {
            return Err(Error::Config("distribution has no atoms".into()));
        }
        let mut atoms = Vec::with_capacity(raw.len());
        for &(omega, weight) in &raw {
            if !(weight > 0.0) {
                return Err(Error::Config(format!("atom {omega} has non-positive weight {weight}")));
            }
            if !(omega >= delta0 && omega <= 1.0 - delta0) {
                return Err(Error::Config(format!(
                    "ellipticity: atom {omega} is outside [delta0, 1 - delta0] = [{delta0}, {}]",
                    1.0 - delta0
                )));
            }
            atoms.push(Atom { omega, weight, log_rho: ((1.0 - omega) / omega).ln() });
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::Config(format!("atom weights sum to {total}, not 1")));
        }
        let mean: f64 = atoms.iter().map(|a| a.weight * a.log_rho).sum();
        if mean.abs() > MEAN_TOL {
            return Err(Error::Config(format!(
                "recurrence: E[log rho] = {mean:e} must vanish (the walk would be transient)"
            )));
        }
        let var: f64 = atoms.iter().map(|a| a.weight * (a.log_rho - mean).powi(2)).sum();
        if !(var > 1e-12) {
            return Err(Error::Config(
                "non-degeneracy: Var(log rho) = 0, the environment is deterministic".into(),
            ));
        }

        let lattice = match declared_span {
            Some(span) => {
                if !(span > 0.0) {
                    return Err(Error::Config(format!("lattice span {span} must be positive")));
                }
                let steps = lattice_steps(&atoms, span).ok_or_else(|| {
                    Error::Config(format!(
                        "arithmetic: some log rho atom is not a multiple of the span {span}"
                    ))
                })?;
                Some(Lattice { span, steps })
            }
            None => infer_lattice(&atoms),
        };

        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|a| {
                acc += a.weight;
                acc
            })
            .collect();

        Ok(Self { spec: spec.clone(), atoms, cumulative, delta0, lattice })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    /// Lattice structure of `log ρ`, present iff the law is arithmetic.
    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    pub fn is_arithmetic(&self) -> bool {
        self.lattice.is_some()
    }

    pub fn log_rho_variance(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.log_rho * a.log_rho).sum()
    }

    /// Index of the atom selected by a uniform variate.
    #[inline]
    pub fn atom_index(&self, u: f64) -> usize {
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.atoms.len() - 1)
    }
}

fn lattice_steps(atoms: &[Atom], span: f64) -> Option<Vec<i64>> {
    atoms
        .iter()
        .map(|a| {
            let k = (a.log_rho / span).round();
            ((a.log_rho - k * span).abs() <= LATTICE_TOL).then_some(k as i64)
        })
        .collect()
}

// Largest span of the form min|log rho| / k, k <= 64, that fits every atom.
fn infer_lattice(atoms: &[Atom]) -> Option<Lattice> {
    let smallest = atoms
        .iter()
        .map(|a| a.log_rho.abs())
        .filter(|&v| v > LATTICE_TOL)
        .fold(f64::INFINITY, f64::min);
    if !smallest.is_finite() {
        return None;
    }
    (1..=64).find_map(|k| {
        let span = smallest / k as f64;
        lattice_steps(atoms, span).map(|steps| Lattice { span, steps })
    })
}

/// A realization of the site probabilities on a finite window.
#[derive(Debug, Clone)]
pub struct Environment {
    window: Window,
    omega: Vec<f64>,
    /// Atom index per site; absent for hand-built environments.
    atom: Option<Vec<u16>>,
    dist: Option<Arc<EnvironmentDistribution>>,
    seed: u64,
}

/// Draws an environment on `window`. Site `x` depends only on `(seed, x)`.
pub fn sample_environment(
    dist: &Arc<EnvironmentDistribution>,
    window: Window,
    seed: u64,
) -> Result<Environment> {
    if !window.contains(0) {
        return Err(Error::Domain(format!(
            "window [{}, {}] must contain 0",
            window.min, window.max
        )));
    }
    let mut u = vec![0.0; window.len()];
    SiteUniforms::new(seed).fill(window.min, &mut u);
    let atom: Vec<u16> = u.iter().map(|&u| dist.atom_index(u) as u16).collect();
    let omega = atom.iter().map(|&i| dist.atoms[i as usize].omega).collect();
    Ok(Environment { window, omega, atom: Some(atom), dist: Some(Arc::clone(dist)), seed })
}

impl Environment {
    /// Environment with explicit site values `omega[i] = ω(x_min + i)`.
    pub fn from_values(x_min: i64, omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::Domain("no site values".into()));
        }
        if let Some(bad) = omega.iter().find(|&&w| !(w > 0.0 && w < 1.0)) {
            return Err(Error::Domain(format!("site probability {bad} is outside (0, 1)")));
        }
        let window = Window::new(x_min, x_min + omega.len() as i64 - 1)?;
        if !window.contains(0) {
            return Err(Error::Domain(format!("window [{}, {}] must contain 0", window.min, window.max)));
        }
        Ok(Self { window, omega, atom: None, dist: None, seed: 0 })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn distribution(&self) -> Option<&Arc<EnvironmentDistribution>> {
        self.dist.as_ref()
    }

    pub fn omega(&self, x: i64) -> Result<f64> {
        Ok(self.omega[self.window.check(x)?])
    }

    /// Site values in window order.
    pub fn values(&self) -> &[f64] {
        &self.omega
    }

    /// The same realization on a larger window. Only sampled environments
    /// can be extended.
    pub fn extended(&self, window: Window) -> Result<Self> {
        match &self.dist {
            Some(dist) => sample_environment(dist, window, self.seed),
            None => Err(Error::Domain("hand-built environments cannot be extended".into())),
        }
    }
}

/// `log ρ_x = log((1 - ω(x)) / ω(x))`.
pub fn log_rho(env: &Environment, x: i64) -> Result<f64> {
    let w = env.omega(x)?;
    Ok(((1.0 - w) / w).ln())
}

/// The potential `V` on the window of its environment, with `V(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    window: Window,
    values: Vec<f64>,
}

/// Cumulative sums of `log ρ`. On arithmetic environments the values are
/// computed as exact lattice multiples, so equal levels compare equal.
pub fn potential(env: &Environment) -> Potential {
    let w = env.window;
    let zero = (-w.min) as usize;
    let n = w.len();
    let mut values = vec![0.0; n];

    if let (Some(atoms), Some(lattice)) = (&env.atom, env.dist.as_ref().and_then(|d| d.lattice())) {
        let mut level: i64 = 0;
        for i in zero + 1..n {
            level += lattice.steps[atoms[i] as usize];
            values[i] = level as f64 * lattice.span;
        }
        level = 0;
        for i in (0..zero).rev() {
            // V(x) = V(x + 1) - log ρ_{x+1}
            level -= lattice.steps[atoms[i + 1] as usize];
            values[i] = level as f64 * lattice.span;
        }
    } else {
        let lr: Vec<f64> = env.omega.iter().map(|&w| ((1.0 - w) / w).ln()).collect();
        let mut acc = 0.0;
        for i in zero + 1..n {
            acc += lr[i];
            values[i] = acc;
        }
        acc = 0.0;
        for i in (0..zero).rev() {
            acc -= lr[i + 1];
            values[i] = acc;
        }
    }
    Potential { window: w, values }
}

impl Potential {
    /// A potential given by explicit values, `values[i] = V(x_min + i)`.
    /// When the window contains 0 the value there must be 0.
    pub fn from_values(x_min: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("no potential values".into()));
        }
        let window = Window::new(x_min, x_min + values.len() as i64 - 1)?;
        if window.contains(0) && values[(-x_min) as usize] != 0.0 {
            return Err(Error::Domain("potential must vanish at 0".into()));
        }
        Ok(Self { window, values })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn get(&self, x: i64) -> Result<f64> {
        Ok(self.values[self.window.check(x)?])
    }

    /// `V` on `[from, to]` (inclusive) as a slice.
    pub fn range(&self, from: i64, to: i64) -> Result<&[f64]> {
        let a = self.window.check(from)?;
        let b = self.window.check(to)?;
        Ok(&self.values[a..=b])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

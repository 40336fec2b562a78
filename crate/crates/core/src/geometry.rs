//! Perturbation budget, robust-set geometry and the empirical coverage `phi_n`.
//!
//! Under the locally linear model, the set of defense vectors `v` at a point
//! `x` that no budget-feasible attacker can overturn is the ball `‖v‖ ≤ ε`
//! intersected with one half-space
//!
//! ```text
//! { v : cᵀv + b ≥ 0 },   c = sgn(f(x)) ∇f(x),   b = |f(x)| − ε ‖∇f(x)‖
//! ```
//!
//! Everything downstream (game, solver, oracle) works on these half-spaces.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, scaled};

/// Relative slack on the ball constraint, absorbing projection round-off.
pub const BALL_TOLERANCE: f64 = 1e-9;

/// The defender's and attacker's common action set: the ℓ2 ball of radius
/// `epsilon` in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    epsilon: f64,
    dim: usize,
}

impl Budget {
    pub fn new(epsilon: f64, dim: usize) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        Ok(Self { epsilon, dim })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Ball membership with the `BALL_TOLERANCE` relative slack.
    pub fn contains(&self, v: &[f64]) -> bool {
        norm(v) <= self.epsilon * (1.0 + BALL_TOLERANCE)
    }

    pub(crate) fn check_dim(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "{what} has dimension {}, expected {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub(crate) fn check_in_ball(&self, v: &[f64], what: &str) -> Result<()> {
        self.check_dim(v, what)?;
        if !self.contains(v) {
            return Err(Error::InvalidInput(format!(
                "{what} has norm {} which exceeds the budget {}",
                norm(v),
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// One data point's local linear model: `f_L(x') = f(x) + ∇f(x)ᵀ(x' − x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationRecord {
    pub f_value: f64,
    pub gradient: Vec<f64>,
    /// Explicit label in `{-1, +1}`; only consulted when `f_value == 0`.
    pub label: Option<i8>,
    /// The input point itself. Only model-backed attacks (PGD) need it.
    pub point: Option<Vec<f64>>,
}

impl LinearizationRecord {
    pub fn new(f_value: f64, gradient: Vec<f64>) -> Self {
        Self {
            f_value,
            gradient,
            label: None,
            point: None,
        }
    }

    pub fn with_label(mut self, label: i8) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_point(mut self, point: Vec<f64>) -> Self {
        self.point = Some(point);
        self
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    /// `sgn(f(x))` as ±1. At `f == 0` the explicit label decides.
    pub fn sign(&self) -> Result<f64> {
        if self.f_value > 0.0 {
            Ok(1.0)
        } else if self.f_value < 0.0 {
            Ok(-1.0)
        } else {
            match self.label {
                Some(l) => Ok(f64::from(l)),
                None => Err(Error::DegenerateRecord),
            }
        }
    }

    /// The label used for scoring: the explicit one if present, else `sgn(f)`.
    pub fn label_value(&self) -> Result<i8> {
        match self.label {
            Some(l) => Ok(l),
            None => self.sign().map(|s| s as i8),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.gradient.len() != dim {
            return Err(Error::InvalidInput(format!(
                "gradient has dimension {}, expected {dim}",
                self.gradient.len()
            )));
        }
        if !self.f_value.is_finite() || self.gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidInput("non-finite f value or gradient".into()));
        }
        if let Some(l) = self.label {
            if l != 1 && l != -1 {
                return Err(Error::InvalidInput(format!("label must be ±1, got {l}")));
            }
            if self.f_value != 0.0 && f64::from(l) != self.f_value.signum() {
                return Err(Error::InvalidInput(format!(
                    "label {l} disagrees with sign of f = {}",
                    self.f_value
                )));
            }
        }
        if let Some(p) = &self.point {
            if p.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "point has dimension {}, expected {dim}",
                    p.len()
                )));
            }
        }
        self.sign().map(|_| ())
    }

    /// `f_L(x + delta) = f(x) + ∇f(x)ᵀ delta`
    pub fn linearized_value(&self, delta: &[f64]) -> f64 {
        self.f_value + dot(&self.gradient, delta)
    }
}

/// `{ v : cᵀv + b ≥ 0 }`, stored unnormalised.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub c: Vec<f64>,
    pub b: f64,
}

impl HalfSpace {
    pub fn new(c: Vec<f64>, b: f64) -> Self {
        Self { c, b }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn margin(&self, v: &[f64]) -> f64 {
        dot(&self.c, v) + self.b
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.margin(v) >= 0.0
    }

    /// Whether the half-space covers the entire ball of radius `epsilon`:
    /// the minimum of `cᵀv` over the ball is `−ε‖c‖`.
    pub fn covers_ball(&self, epsilon: f64) -> bool {
        self.b >= epsilon * norm(&self.c)
    }

    /// Projection of the origin onto the half-space.
    pub fn min_norm_point(&self) -> Vec<f64> {
        let cc = dot(&self.c, &self.c);
        if self.b >= 0.0 || cc == 0.0 {
            vec![0.0; self.c.len()]
        } else {
            scaled(&self.c, -self.b / cc)
        }
    }
}

pub fn halfspace_of(record: &LinearizationRecord, budget: &Budget) -> Result<HalfSpace> {
    budget.check_dim(&record.gradient, "gradient")?;
    let s = record.sign()?;
    let c = scaled(&record.gradient, s);
    let b = record.f_value.abs() - budget.epsilon() * norm(&record.gradient);
    Ok(HalfSpace { c, b })
}

/// Closed membership test `cᵀv + b ≥ 0` and `‖v‖ ≤ ε` (with ball slack).
pub fn in_robust_set(v: &[f64], hs: &HalfSpace, budget: &Budget) -> Result<bool> {
    budget.check_dim(v, "v")?;
    budget.check_dim(&hs.c, "half-space normal")?;
    Ok(budget.contains(v) && hs.contains(v))
}

/// `a_FGM(x) = −ε sgn(f(x)) ∇f(x) / ‖∇f(x)‖`
pub fn fgm_direction(record: &LinearizationRecord, budget: &Budget) -> Result<Vec<f64>> {
    budget.check_dim(&record.gradient, "gradient")?;
    let s = record.sign()?;
    fgm_with_sign(&record.gradient, s, budget.epsilon())
}

pub(crate) fn fgm_with_sign(gradient: &[f64], sign: f64, epsilon: f64) -> Result<Vec<f64>> {
    let g = norm(gradient);
    if g == 0.0 {
        return Err(Error::ZeroGradient);
    }
    Ok(scaled(gradient, -epsilon * sign / g))
}

/// Radial projection onto the ball. The result always has `‖·‖ ≤ ε` in
/// floating point, so projecting twice returns the same bits.
pub fn project_to_ball(v: &[f64], budget: &Budget) -> Vec<f64> {
    let eps = budget.epsilon();
    let n = norm(v);
    if n <= eps {
        return v.to_vec();
    }
    let mut k = eps / n;
    let mut p = scaled(v, k);
    while norm(&p) > eps {
        k *= 1.0 - f64::EPSILON;
        p = scaled(v, k);
    }
    p
}

/// An immutable, validated collection of records sharing one budget, with the
/// robust-set half-spaces derived once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<LinearizationRecord>,
    budget: Budget,
    halfspaces: Vec<HalfSpace>,
}

impl Dataset {
    pub fn new(records: Vec<LinearizationRecord>, budget: Budget) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput("dataset is empty".into()));
        }
        for (i, r) in records.iter().enumerate() {
            r.validate(budget.dim()).map_err(|e| match e {
                Error::InvalidInput(msg) => Error::InvalidInput(format!("record {i}: {msg}")),
                other => other,
            })?;
        }
        let halfspaces = records
            .iter()
            .map(|r| halfspace_of(r, &budget))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            records,
            budget,
            halfspaces,
        })
    }

    /// Re-derives every robust set under a different budget radius.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(
            self.records.clone(),
            Budget::new(epsilon, self.budget.dim())?,
        )
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[LinearizationRecord] {
        &self.records
    }

    pub fn budget(&self) -> &Budget {
        &self.budget
    }

    pub fn dim(&self) -> usize {
        self.budget.dim()
    }

    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.halfspaces
    }

    /// Number of robust sets containing `v`. Zero if `v` is outside the ball.
    pub fn satisfied_count(&self, v: &[f64]) -> usize {
        if !self.budget.contains(v) {
            return 0;
        }
        self.halfspaces.iter().filter(|h| h.contains(v)).count()
    }

    pub fn satisfied_indices(&self, v: &[f64]) -> Vec<usize> {
        if !self.budget.contains(v) {
            return Vec::new();
        }
        self.halfspaces
            .iter()
            .enumerate()
            .filter(|(_, h)| h.contains(v))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Fraction of records whose robust set contains `v`; always a multiple of `1/n`.
pub fn phi_n(v: &[f64], dataset: &Dataset) -> Result<f64> {
    dataset.budget().check_dim(v, "v")?;
    Ok(dataset.satisfied_count(v) as f64 / dataset.len() as f64)
}

//! Approximate maximisation of `phi_n` over the ε-ball.
//!
//! The objective is a sum of indicators `1[cᵢᵀv + bᵢ ≥ 0]`, whose gradient is
//! zero almost everywhere. We ascend the clamp relaxation
//! `min(max(0, α), 1) ≤ 1[α ≥ 0]` with projected gradient steps, but score
//! every iterate with the exact objective and return the best one seen.
//! Constraints with negative margin contribute no gradient, so on small
//! datasets each restart ends with a greedy pass that adds violated
//! constraints one at a time through the oracle's feasibility routine.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{project_to_ball, Budget, Dataset};
use crate::linalg::{axpy, norm, scaled, zeros};
use crate::oracle::{feasible_point, FEASIBILITY_TOLERANCE};
use crate::rng::{seeded, uniform_in_ball};

/// Min-norm starting points are pushed this far (relative) past the
/// half-space boundary so that closed membership survives round-off.
const BOUNDARY_NUDGE: f64 = 1e-9;

/// Above this many records the augmentation pass is skipped: each round
/// costs up to `n` feasibility solves.
pub const POLISH_MAX_N: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub step_size: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Margins are divided by this before clamping; widens or narrows the
    /// band in which a constraint contributes gradient.
    pub surrogate_scale: f64,
    /// Run greedy augmentation on each restart's best iterate (only for
    /// datasets of at most `POLISH_MAX_N` records).
    pub polish: bool,
}

impl SolveConfig {
    /// Step `ε/10`, 500 iterations, 20 restarts, unit surrogate scale.
    pub fn for_budget(budget: &Budget) -> Self {
        Self {
            step_size: budget.epsilon() / 10.0,
            iterations: 500,
            restarts: 20,
            seed: 0,
            surrogate_scale: 1.0,
            polish: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidInput("step size must be positive".into()));
        }
        if self.iterations == 0 || self.restarts == 0 {
            return Err(Error::InvalidInput(
                "iterations and restarts must be positive".into(),
            ));
        }
        if !(self.surrogate_scale.is_finite() && self.surrogate_scale > 0.0) {
            return Err(Error::InvalidInput(
                "surrogate scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub v_star: Vec<f64>,
    pub phi_value: f64,
    pub satisfied_indices: Vec<usize>,
    /// Best exact `phi_n` reached by each restart, in restart order.
    pub restarts_log: Vec<f64>,
}

/// The clamp relaxation of the indicator `1[α ≥ 0]`.
pub fn surrogate(alpha: f64) -> f64 {
    alpha.clamp(0.0, 1.0)
}

/// Mean relaxed objective `(1/n) Σ clamp((cᵢᵀv + bᵢ) / scale)`.
pub fn surrogate_objective(v: &[f64], dataset: &Dataset, scale: f64) -> f64 {
    let total: f64 = dataset
        .halfspaces()
        .iter()
        .map(|h| surrogate(h.margin(v) / scale))
        .sum();
    total / dataset.len() as f64
}

/// Subgradient of the relaxed objective at unit scale.
pub fn surrogate_gradient(v: &[f64], dataset: &Dataset) -> Vec<f64> {
    surrogate_gradient_scaled(v, dataset, 1.0)
}

/// `(1/n) Σ cᵢ/scale · 1[0 < (cᵢᵀv + bᵢ)/scale < 1]`; kinks contribute zero.
pub fn surrogate_gradient_scaled(v: &[f64], dataset: &Dataset, scale: f64) -> Vec<f64> {
    let mut g = zeros(v.len());
    let weight = 1.0 / (scale * dataset.len() as f64);
    for h in dataset.halfspaces() {
        let m = h.margin(v) / scale;
        if m > 0.0 && m < 1.0 {
            axpy(&mut g, weight, &h.c);
        }
    }
    g
}

#[derive(Debug, Clone)]
struct Candidate {
    v: Vec<f64>,
    count: usize,
    norm: f64,
}

impl Candidate {
    fn new(v: Vec<f64>, dataset: &Dataset) -> Self {
        Self {
            count: dataset.satisfied_count(&v),
            norm: norm(&v),
            v,
        }
    }

    /// Higher coverage wins, then smaller norm; exact ties keep the incumbent.
    fn beats(&self, other: &Candidate) -> bool {
        self.count > other.count || (self.count == other.count && self.norm < other.norm)
    }
}

fn initial_points(dataset: &Dataset, config: &SolveConfig) -> Vec<Vec<f64>> {
    let budget = dataset.budget();
    let mut starts = vec![zeros(budget.dim())];
    for h in dataset.halfspaces() {
        if starts.len() >= config.restarts {
            break;
        }
        if h.b < 0.0 && norm(&h.c) > 0.0 {
            let p = project_to_ball(&scaled(&h.min_norm_point(), 1.0 + BOUNDARY_NUDGE), budget);
            if !starts.contains(&p) {
                starts.push(p);
            }
        }
    }
    starts.truncate(config.restarts);
    for idx in starts.len()..config.restarts {
        let mut rng = seeded(config.seed.wrapping_add(idx as u64));
        starts.push(uniform_in_ball(&mut rng, budget.dim(), budget.epsilon()));
    }
    starts
}

fn run_trajectory(start: Vec<f64>, dataset: &Dataset, config: &SolveConfig) -> Candidate {
    let budget = dataset.budget();
    let mut v = start;
    let mut best = Candidate::new(v.clone(), dataset);
    for _ in 0..config.iterations {
        let g = surrogate_gradient_scaled(&v, dataset, config.surrogate_scale);
        let mut next = v.clone();
        axpy(&mut next, config.step_size, &g);
        let next = project_to_ball(&next, budget);
        if next == v {
            break;
        }
        v = next;
        let cand = Candidate::new(v.clone(), dataset);
        if cand.beats(&best) {
            best = cand;
        }
    }
    best
}

/// Repeatedly tries to add one violated constraint to the satisfied set,
/// moving to the min-norm point of the enlarged intersection when it meets
/// the ball. The clamp gradient is blind to violated constraints; this is
/// what lets a trajectory pick them up.
fn polish(mut best: Candidate, dataset: &Dataset) -> Candidate {
    let budget = dataset.budget();
    let tol = FEASIBILITY_TOLERANCE * budget.epsilon();
    let hs = dataset.halfspaces();
    loop {
        let satisfied = dataset.satisfied_indices(&best.v);
        let mut improved = false;
        for j in (0..hs.len()).filter(|j| !satisfied.contains(j)) {
            let group: Vec<_> = satisfied.iter().chain([&j]).map(|&i| &hs[i]).collect();
            if let Some(p) = feasible_point(&group, budget, tol) {
                let cand = Candidate::new(p, dataset);
                if cand.count > best.count {
                    best = cand;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    best
}

/// Projected gradient ascent on the relaxed objective from `restarts`
/// starting points (origin, per-constraint min-norm points, then seeded
/// random ball points), returning the best iterate under the exact `phi_n`.
/// Small datasets also get a greedy augmentation pass per restart.
pub fn solve(dataset: &Dataset, config: &SolveConfig) -> Result<SolveResult> {
    config.validate()?;
    let polish_enabled = config.polish && dataset.len() <= POLISH_MAX_N;
    let per_restart: Vec<Candidate> = initial_points(dataset, config)
        .into_par_iter()
        .map(|start| {
            let best = run_trajectory(start, dataset, config);
            if polish_enabled {
                polish(best, dataset)
            } else {
                best
            }
        })
        .collect();

    let mut best = per_restart[0].clone();
    for cand in &per_restart[1..] {
        if cand.beats(&best) {
            best = cand.clone();
        }
    }
    let n = dataset.len() as f64;
    let restarts_log = per_restart.iter().map(|c| c.count as f64 / n).collect();
    Ok(SolveResult {
        phi_value: best.count as f64 / n,
        satisfied_indices: dataset.satisfied_indices(&best.v),
        v_star: best.v,
        restarts_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{phi_n, LinearizationRecord};

    /// Records whose half-spaces are `{ eᵢᵀv ≥ t }` style constraints:
    /// `c = g`, `b = f − ε‖g‖` for positive `f`.
    fn ds_from(halfspaces: &[(Vec<f64>, f64)], eps: f64) -> Dataset {
        let dim = halfspaces[0].0.len();
        let records = halfspaces
            .iter()
            .map(|(c, b)| {
                let f = b + eps * norm(c);
                assert!(f > 0.0);
                LinearizationRecord::new(f, c.clone())
            })
            .collect();
        Dataset::new(records, Budget::new(eps, dim).unwrap()).unwrap()
    }

    #[test]
    fn surrogate_clamps() {
        assert_eq!(surrogate(-1.0), 0.0);
        assert_eq!(surrogate(0.5), 0.5);
        assert_eq!(surrogate(2.0), 1.0);
    }

    #[test]
    fn surrogate_gradient_examples() {
        let ds = ds_from(&[(vec![1.0, 0.0], -0.15)], 0.25);
        let g = surrogate_gradient(&[0.2, 0.0], &ds);
        assert_eq!(g, vec![1.0, 0.0]);
        assert_eq!(surrogate_gradient(&[0.0, 0.0], &ds), vec![0.0, 0.0]);
        let flat = ds_from(&[(vec![1.0, 0.0], 1.5), (vec![0.0, 2.0], 1.2)], 0.25);
        assert_eq!(surrogate_gradient(&[0.1, 0.1], &flat), vec![0.0, 0.0]);
    }

    #[test]
    fn confident_dataset_needs_no_defense() {
        let ds = ds_from(&[(vec![1.0, 0.0], 0.1), (vec![0.0, -1.0], 0.3)], 0.25);
        let res = solve(&ds, &SolveConfig::for_budget(ds.budget())).unwrap();
        assert_eq!(res.phi_value, 1.0);
        assert_eq!(res.v_star, vec![0.0, 0.0]);
        assert_eq!(res.satisfied_indices, vec![0, 1]);
    }

    #[test]
    fn two_compatible_constraints() {
        let ds = ds_from(&[(vec![1.0, 0.0], -0.1), (vec![0.0, 1.0], -0.1)], 0.25);
        let res = solve(&ds, &SolveConfig::for_budget(ds.budget())).unwrap();
        assert_eq!(res.phi_value, 1.0);
        assert!(res.v_star[0] >= 0.1 && res.v_star[1] >= 0.1);
    }

    #[test]
    fn two_incompatible_constraints() {
        let ds = ds_from(&[(vec![1.0, 0.0], -0.15), (vec![-1.0, 0.0], -0.15)], 0.25);
        let res = solve(&ds, &SolveConfig::for_budget(ds.budget())).unwrap();
        assert_eq!(res.phi_value, 0.5);
        assert_eq!(res.satisfied_indices.len(), 1);
    }

    #[test]
    fn reported_value_is_exact_and_feasible() {
        let ds = ds_from(
            &[
                (vec![1.0, 0.2, 0.0], -0.05),
                (vec![-0.3, 1.0, 0.5], -0.12),
                (vec![0.0, -1.0, 1.0], -0.2),
                (vec![2.0, 2.0, -1.0], -0.4),
            ],
            0.3,
        );
        let res = solve(&ds, &SolveConfig::for_budget(ds.budget()).with_seed(3)).unwrap();
        assert_eq!(res.phi_value, phi_n(&res.v_star, &ds).unwrap());
        assert!(norm(&res.v_star) <= 0.3 * (1.0 + 1e-9));
        assert_eq!(res.restarts_log.len(), 20);
        assert!(res.restarts_log.iter().all(|&p| p <= res.phi_value));
    }

    #[test]
    fn fewer_restarts_than_constraints() {
        let ds = ds_from(
            &[
                (vec![1.0, 0.0], -0.1),
                (vec![0.0, 1.0], -0.1),
                (vec![-1.0, 0.0], -0.1),
            ],
            0.25,
        );
        let mut cfg = SolveConfig::for_budget(ds.budget());
        cfg.restarts = 2;
        cfg.polish = false;
        let res = solve(&ds, &cfg).unwrap();
        assert_eq!(res.restarts_log.len(), 2);
        // origin and the first constraint's min-norm point only; ascent
        // from there never sees the second constraint
        assert_eq!(res.restarts_log[0], 0.0);
        assert_eq!(res.phi_value, 1.0 / 3.0);

        cfg.polish = true;
        let res = solve(&ds, &cfg).unwrap();
        assert_eq!(res.phi_value, 2.0 / 3.0);
        assert_eq!(res.satisfied_indices, vec![0, 1]);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let ds = ds_from(&[(vec![1.0], 0.1)], 0.25);
        let mut cfg = SolveConfig::for_budget(ds.budget());
        cfg.iterations = 0;
        assert!(solve(&ds, &cfg).is_err());
        let mut cfg = SolveConfig::for_budget(ds.budget());
        cfg.step_size = -1.0;
        assert!(solve(&ds, &cfg).is_err());
    }
}

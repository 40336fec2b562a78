//! The single-shot zero-sum game between an additive attacker and a
//! constant-vector defender, scored on the linearised classifier.
//!
//! The attacker earns `+1` at a point when the perturbed linearised score
//! changes sign, `−1` otherwise; the defender earns the negation. A score
//! landing exactly on zero is not a flip, matching the closed robust sets.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{fgm_direction, fgm_with_sign, Budget, Dataset, LinearizationRecord};
use crate::linalg::{add, norm, scaled, sub, zeros};
use crate::rng::{seeded, uniform_in_ball};
use crate::synthetic::SyntheticModel;

pub const DEFAULT_PGD_ITERS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum AttackSpec {
    None,
    Fgm,
    /// Iterated FGM against the true model, re-projected to the ε-sphere.
    Pgd {
        iters: usize,
    },
    /// The same perturbation at every point.
    Fixed(Vec<f64>),
    /// Precomputed per-point perturbations, index-aligned with the dataset.
    PerPoint(Vec<Vec<f64>>),
}

impl AttackSpec {
    pub fn pgd() -> Self {
        AttackSpec::Pgd {
            iters: DEFAULT_PGD_ITERS,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackSpec::None => "none",
            AttackSpec::Fgm => "fgm",
            AttackSpec::Pgd { .. } => "pgd",
            AttackSpec::Fixed(_) => "fixed",
            AttackSpec::PerPoint(_) => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DefenseSpec {
    None,
    /// The constant function `d_v(x) = v`.
    Fixed(Vec<f64>),
}

impl DefenseSpec {
    pub fn vector(&self, dim: usize) -> Vec<f64> {
        match self {
            DefenseSpec::None => zeros(dim),
            DefenseSpec::Fixed(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameReport {
    /// `+1` where the attacker flipped the linearised label, `−1` elsewhere.
    pub per_point_utilities: Vec<i8>,
    pub mean_attacker_utility: f64,
    pub approximate_accuracy: f64,
    /// Accuracy of the actual model on the perturbed inputs; only present
    /// when a synthetic model backs every record.
    pub true_accuracy: Option<f64>,
}

impl GameReport {
    fn from_outcomes(per_point_utilities: Vec<i8>, true_correct: Option<usize>) -> Self {
        let n = per_point_utilities.len();
        let sum: i64 = per_point_utilities.iter().map(|&u| i64::from(u)).sum();
        let defender_wins = per_point_utilities.iter().filter(|&&u| u < 0).count();
        Self {
            mean_attacker_utility: sum as f64 / n as f64,
            approximate_accuracy: defender_wins as f64 / n as f64,
            true_accuracy: true_correct.map(|c| c as f64 / n as f64),
            per_point_utilities,
        }
    }

    pub fn n(&self) -> usize {
        self.per_point_utilities.len()
    }

    pub fn utility_sum(&self) -> i64 {
        self.per_point_utilities.iter().map(|&u| i64::from(u)).sum()
    }

    pub fn defender_wins(&self) -> usize {
        self.per_point_utilities.iter().filter(|&&u| u < 0).count()
    }

    pub fn mean_defender_utility(&self) -> f64 {
        -self.mean_attacker_utility
    }
}

/// Whether `sgn(f(x)) · f_L(x + delta)` is negative, i.e. the label flipped.
fn flipped(record: &LinearizationRecord, delta: &[f64]) -> Result<bool> {
    Ok(record.sign()? * record.linearized_value(delta) < 0.0)
}

/// Attacker utility at one point: `+1` if the linearised sign flips under
/// `a + d`, else `−1`. The defender's utility is the negation.
pub fn utility(record: &LinearizationRecord, a: &[f64], d: &[f64], budget: &Budget) -> Result<i8> {
    budget.check_dim(&record.gradient, "gradient")?;
    budget.check_in_ball(a, "attack")?;
    budget.check_in_ball(d, "defense")?;
    Ok(if flipped(record, &add(a, d))? { 1 } else { -1 })
}

pub fn defender_utility(
    record: &LinearizationRecord,
    a: &[f64],
    d: &[f64],
    budget: &Budget,
) -> Result<i8> {
    utility(record, a, d, budget).map(|u| -u)
}

/// Concrete perturbation the attacker plays at `record` (the record at
/// position `index` in its dataset).
pub fn resolve_attack(
    record: &LinearizationRecord,
    index: usize,
    spec: &AttackSpec,
    model: Option<&SyntheticModel>,
    budget: &Budget,
) -> Result<Vec<f64>> {
    match spec {
        AttackSpec::None => Ok(zeros(budget.dim())),
        AttackSpec::Fgm => fgm_direction(record, budget),
        AttackSpec::Fixed(v) => {
            budget.check_in_ball(v, "fixed attack")?;
            Ok(v.clone())
        }
        AttackSpec::PerPoint(vs) => {
            let v = vs.get(index).ok_or_else(|| {
                Error::InvalidInput(format!("no attack vector for record {index}"))
            })?;
            budget.check_in_ball(v, "attack vector")?;
            Ok(v.clone())
        }
        AttackSpec::Pgd { iters } => {
            let model = model.ok_or(Error::ModelRequired)?;
            let x = record.point.as_deref().ok_or(Error::ModelRequired)?;
            pgd_attack(model, x, record.sign()?, *iters, budget)
        }
    }
}

/// Iterates `p' = p + a_FGM(p)`, `p = x + ε (p' − x)/‖p' − x‖` from `p = x`,
/// querying the model's true gradient at each iterate. Every step pushes
/// against the original label `label_sign`. Returns `p_final − x`.
pub fn pgd_attack(
    model: &SyntheticModel,
    x: &[f64],
    label_sign: f64,
    iters: usize,
    budget: &Budget,
) -> Result<Vec<f64>> {
    budget.check_dim(x, "x")?;
    let eps = budget.epsilon();
    let mut p = x.to_vec();
    for _ in 0..iters {
        let step = fgm_with_sign(&model.gradient(&p), label_sign, eps)?;
        let moved = sub(&add(&p, &step), x);
        let len = norm(&moved);
        if len == 0.0 {
            return Ok(zeros(x.len()));
        }
        p = add(x, &scaled(&moved, eps / len));
    }
    Ok(sub(&p, x))
}

/// Plays the game at every record and aggregates utilities and accuracies.
pub fn simulate(
    dataset: &Dataset,
    attack: &AttackSpec,
    defense: &DefenseSpec,
    model: Option<&SyntheticModel>,
) -> Result<GameReport> {
    let budget = dataset.budget();
    let d = defense.vector(budget.dim());
    budget.check_in_ball(&d, "defense")?;
    if let AttackSpec::PerPoint(vs) = attack {
        if vs.len() != dataset.len() {
            return Err(Error::InvalidInput(format!(
                "{} attack vectors for {} records",
                vs.len(),
                dataset.len()
            )));
        }
    }
    let with_truth = model.filter(|_| dataset.records().iter().all(|r| r.point.is_some()));

    let outcomes = dataset
        .records()
        .par_iter()
        .enumerate()
        .map(|(i, record)| {
            let a = resolve_attack(record, i, attack, model, budget)?;
            let u = utility(record, &a, &d, budget)?;
            let correct = match (with_truth, &record.point) {
                (Some(m), Some(x)) => {
                    let y = f64::from(record.label_value()?);
                    Some(y * m.value(&add(x, &add(&a, &d))) >= 0.0)
                }
                _ => None,
            };
            Ok((u, correct))
        })
        .collect::<Result<Vec<_>>>()?;

    let true_correct =
        with_truth.map(|_| outcomes.iter().filter(|(_, c)| *c == Some(true)).count());
    let utilities = outcomes.into_iter().map(|(u, _)| u).collect();
    Ok(GameReport::from_outcomes(utilities, true_correct))
}

/// Empirical check that FGM is a best response to the fixed defense: at every
/// record, no uniformly sampled attack earns more than FGM does.
pub fn fgm_best_response_check(
    dataset: &Dataset,
    defense_vector: &[f64],
    num_random_attacks: usize,
    seed: u64,
) -> Result<bool> {
    Ok(fgm_dominance_violations(dataset, defense_vector, num_random_attacks, seed)? == 0)
}

/// Number of (record, sampled attack) pairs where the sampled attack beat FGM.
pub fn fgm_dominance_violations(
    dataset: &Dataset,
    defense_vector: &[f64],
    num_random_attacks: usize,
    seed: u64,
) -> Result<usize> {
    let budget = dataset.budget();
    budget.check_in_ball(defense_vector, "defense")?;
    let mut rng = seeded(seed);
    let mut violations = 0;
    for record in dataset.records() {
        let fgm = match fgm_direction(record, budget) {
            Ok(a) => a,
            // a constant linearisation cannot be moved by any attack
            Err(Error::ZeroGradient) => zeros(budget.dim()),
            Err(e) => return Err(e),
        };
        let best = utility(record, &fgm, defense_vector, budget)?;
        for _ in 0..num_random_attacks {
            let a = uniform_in_ball(&mut rng, budget.dim(), budget.epsilon());
            if utility(record, &a, defense_vector, budget)? > best {
                violations += 1;
            }
        }
    }
    Ok(violations)
}

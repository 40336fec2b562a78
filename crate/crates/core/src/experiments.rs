//! Desk-scale reproductions on synthetic classifiers: the attack/defense
//! accuracy table, the generalization-rate study and the region-count check.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{simulate, AttackSpec, DefenseSpec};
use crate::geometry::{Budget, Dataset, HalfSpace, LinearizationRecord};
use crate::linalg::norm;
use crate::oracle::{count_regions_2d, general_position_regions, is_general_position};
use crate::rng::{derive_seed, gaussian_vector, seeded};
use crate::solve::{solve, SolveConfig};
use crate::synthetic::{
    phi_closed_form, sample_points, true_vstar_linear, GaussianSpec, SyntheticModel,
};

/// `n` records in `m` dimensions with standard Gaussian gradients, random
/// signs and `|f| = ε‖∇f‖·U(0, 1)`, so every robust set is a proper cap of
/// the ball (`−ε‖c‖ < b ≤ 0`). Used for solver/oracle comparisons.
pub fn random_instance(n: usize, m: usize, epsilon: f64, seed: u64) -> Result<Dataset> {
    let budget = Budget::new(epsilon, m)?;
    let mut rng = seeded(seed);
    let records = (0..n)
        .map(|_| {
            let g = gaussian_vector(&mut rng, m);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let u: f64 = rng.random();
            LinearizationRecord::new(sign * epsilon * norm(&g) * u, g).with_label(sign as i8)
        })
        .collect();
    Dataset::new(records, budget)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameRow {
    pub attack: String,
    pub defense: String,
    pub approximate_accuracy: f64,
    pub true_accuracy: Option<f64>,
    pub mean_utility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameTable {
    pub rows: Vec<GameRow>,
    /// Defense vector fitted on the training split.
    pub smooth_vector: Vec<f64>,
    /// `phi_n` of the defense vector on the training split.
    pub train_phi: f64,
}

impl GameTable {
    pub fn row(&self, attack: &str, defense: &str) -> Option<&GameRow> {
        self.rows
            .iter()
            .find(|r| r.attack == attack && r.defense == defense)
    }
}

/// Draws `2n` points, splits them into disjoint train/test halves, fits the
/// defense on train and plays {none, FGM, PGD} × {none, SMOOTH} on test.
pub fn game_table(
    model: &SyntheticModel,
    dist: &GaussianSpec,
    n: usize,
    budget: &Budget,
    seed: u64,
) -> Result<GameTable> {
    let (mut records, _) = sample_points(model, dist, 2 * n, budget, seed)?;
    let test = Dataset::new(records.split_off(n), *budget)?;
    let train = Dataset::new(records, *budget)?;

    let fit = solve(&train, &SolveConfig::for_budget(budget).with_seed(seed))?;
    let defenses = [
        ("none", DefenseSpec::None),
        ("smooth", DefenseSpec::Fixed(fit.v_star.clone())),
    ];
    let attacks = [AttackSpec::None, AttackSpec::Fgm, AttackSpec::pgd()];

    let mut rows = Vec::with_capacity(6);
    for attack in &attacks {
        for (name, defense) in &defenses {
            let rep = simulate(&test, attack, defense, Some(model))?;
            rows.push(GameRow {
                attack: attack.name().to_string(),
                defense: name.to_string(),
                approximate_accuracy: rep.approximate_accuracy,
                true_accuracy: rep.true_accuracy,
                mean_utility: rep.mean_attacker_utility,
            });
        }
    }
    Ok(GameTable {
        rows,
        smooth_vector: fit.v_star,
        train_phi: fit.phi_value,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub mean_gap: f64,
    pub std_gap: f64,
    pub gaps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `ln(mean gap)` against `ln n`; `None` when
    /// fewer than two sweep points have a mean gap above `GAP_FLOOR`.
    pub slope: Option<f64>,
    /// `phi` at the population maximiser.
    pub optimum: f64,
}

impl RateReport {
    /// Number of consecutive sweep points where the mean gap went up.
    pub fn inversions(&self) -> usize {
        self.rows
            .windows(2)
            .filter(|w| w[1].mean_gap > w[0].mean_gap)
            .count()
    }
}

/// Mean gaps below this are excluded from the slope fit.
pub const GAP_FLOOR: f64 = 1e-4;

/// For each sample size, fits the defense on `trials` fresh datasets and
/// measures the population shortfall `phi(v*) − phi(v_n*)`.
pub fn generalization_rate(
    model: &SyntheticModel,
    dist: &GaussianSpec,
    budget: &Budget,
    ns: &[usize],
    trials: usize,
    seed: u64,
) -> Result<RateReport> {
    if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] == 0 {
        return Err(Error::InvalidInput(
            "sample sizes must be positive and strictly increasing".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be positive".into()));
    }
    let (_, optimum) = true_vstar_linear(model, dist, budget)?;

    let mut rows = Vec::with_capacity(ns.len());
    for (ni, &n) in ns.iter().enumerate() {
        let gaps = (0..trials)
            .into_par_iter()
            .map(|t| {
                let s = derive_seed(seed, &[ni as u64, t as u64]);
                let (records, _) = sample_points(model, dist, n, budget, s)?;
                let ds = Dataset::new(records, *budget)?;
                let fit = solve(&ds, &SolveConfig::for_budget(budget).with_seed(s))?;
                let achieved = phi_closed_form(model, dist, &fit.v_star, budget)?;
                // `optimum` comes from a 1D search; clamp its round-off
                Ok((optimum - achieved).max(0.0))
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean_gap = gaps.iter().sum::<f64>() / trials as f64;
        let std_gap = if trials > 1 {
            (gaps.iter().map(|g| (g - mean_gap).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt()
        } else {
            0.0
        };
        rows.push(RateRow {
            n,
            mean_gap,
            std_gap,
            gaps,
        });
    }

    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_gap >= GAP_FLOOR)
        .map(|r| ((r.n as f64).ln(), r.mean_gap.ln()))
        .collect();
    Ok(RateReport {
        slope: least_squares_slope(&points),
        rows,
        optimum,
    })
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub n: usize,
    pub regions: usize,
    pub formula: usize,
    pub matches: bool,
    /// Distinct membership patterns seen over sampled points of the plane.
    pub distinct_patterns: usize,
    pub attempts: usize,
}

const MAX_REGION_ATTEMPTS: usize = 100;
const PATTERN_SAMPLES: usize = 20_000;

/// Random lines in general position: counted cells vs. `(n² + n + 2)/2`,
/// plus the observed number of membership patterns (never above the cell count).
pub fn region_check(n: usize, seed: u64) -> Result<RegionReport> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one line".into()));
    }
    let mut rng = seeded(seed);
    for attempt in 1..=MAX_REGION_ATTEMPTS {
        let halfspaces: Vec<HalfSpace> = (0..n)
            .map(|_| HalfSpace::new(gaussian_vector(&mut rng, 2), rng.random_range(-1.0..1.0)))
            .collect();
        if !is_general_position(&halfspaces)? {
            continue;
        }
        let regions = count_regions_2d(&halfspaces)?;
        let formula = general_position_regions(n);
        let distinct_patterns = membership_patterns(&halfspaces, &mut rng);
        return Ok(RegionReport {
            n,
            regions,
            formula,
            matches: regions == formula,
            distinct_patterns,
            attempts: attempt,
        });
    }
    Err(Error::InvalidInput(format!(
        "no general-position arrangement in {MAX_REGION_ATTEMPTS} draws"
    )))
}

fn membership_patterns<R: Rng>(halfspaces: &[HalfSpace], rng: &mut R) -> usize {
    // a box comfortably containing every vertex of the arrangement
    let mut reach: f64 = 1.0;
    for (i, a) in halfspaces.iter().enumerate() {
        for b in &halfspaces[i + 1..] {
            let det = a.c[0] * b.c[1] - a.c[1] * b.c[0];
            if det != 0.0 {
                let x = (-a.b * b.c[1] + b.b * a.c[1]) / det;
                let y = (-b.b * a.c[0] + a.b * b.c[0]) / det;
                reach = reach.max(x.abs()).max(y.abs());
            }
        }
    }
    let half = 2.0 * reach;
    let mut seen = HashSet::new();
    for _ in 0..PATTERN_SAMPLES {
        let v = [rng.random_range(-half..half), rng.random_range(-half..half)];
        let pattern: Vec<bool> = halfspaces.iter().map(|h| h.contains(&v)).collect();
        seen.insert(pattern);
    }
    seen.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_are_proper_caps() {
        let ds = random_instance(10, 3, 0.25, 5).unwrap();
        assert_eq!((ds.len(), ds.dim()), (10, 3));
        for h in ds.halfspaces() {
            assert!(h.b <= 0.0 && h.b > -0.25 * norm(&h.c));
        }
        assert_eq!(ds, random_instance(10, 3, 0.25, 5).unwrap());
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [10.0f64, 100.0, 1000.0]
            .iter()
            .map(|n| (n.ln(), (3.0 * n.powf(-0.5)).ln()))
            .collect();
        assert!((least_squares_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(least_squares_slope(&pts[..1]), None);
    }

    #[test]
    fn region_examples() {
        let r3 = region_check(3, 1).unwrap();
        assert_eq!((r3.regions, r3.formula, r3.matches), (7, 7, true));
        let r10 = region_check(10, 1).unwrap();
        assert_eq!((r10.regions, r10.formula), (56, 56));
        for seed in 0..10 {
            let r = region_check(6, seed).unwrap();
            assert!(r.distinct_patterns <= r.regions);
        }
    }

    #[test]
    fn game_table_structure() {
        let model = SyntheticModel::roof(2, 1.0).unwrap();
        let budget = Budget::new(0.25, 2).unwrap();
        let table = game_table(&model, &GaussianSpec::standard(2), 150, &budget, 7).unwrap();
        assert_eq!(table.rows.len(), 6);
        let clean = table.row("none", "none").unwrap();
        assert_eq!(clean.approximate_accuracy, 1.0);
        assert_eq!(clean.true_accuracy, Some(1.0));
        for r in &table.rows {
            assert!((0.0..=1.0).contains(&r.approximate_accuracy));
            assert!((0.0..=1.0).contains(&r.true_accuracy.unwrap()));
        }
        let fgm = table.row("fgm", "none").unwrap().approximate_accuracy;
        let fgm_smooth = table.row("fgm", "smooth").unwrap().approximate_accuracy;
        assert!(fgm_smooth >= fgm);
    }

    #[test]
    fn generalization_rate_rejects_bad_sweeps() {
        let model = SyntheticModel::linear(vec![1.0, 0.0], 0.0).unwrap();
        let b = Budget::new(0.1, 2).unwrap();
        let dist = GaussianSpec::standard(2);
        assert!(generalization_rate(&model, &dist, &b, &[100, 30], 2, 0).is_err());
        assert!(generalization_rate(&model, &dist, &b, &[30], 0, 0).is_err());
        let fan = SyntheticModel::roof(2, 1.0).unwrap();
        assert!(matches!(
            generalization_rate(&fan, &dist, &b, &[30], 1, 0),
            Err(Error::Unsupported(_))
        ));
    }
}

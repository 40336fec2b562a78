//! Exact maximisation of `phi_n` for small instances, and region counting
//! for 2D line arrangements.
//!
//! `phi_n(v) = k/n` is achievable iff some `k` robust half-spaces have a
//! common point in the ball, and that holds iff the min-norm point of their
//! intersection lies in the ball. The oracle enumerates index subsets from
//! the largest cardinality down and stops at the first feasible level.

use itertools::Itertools;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Budget, Dataset, HalfSpace};
use crate::linalg::{axpy, dot, norm, scaled, sub, zeros};

pub const DEFAULT_MAX_N: usize = 20;
pub const MAX_PROJECTION_CYCLES: usize = 10_000;

/// Relative tolerance (times ε) for the projection scheme.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;

/// Constraints are tightened by this many tolerances before solving, so the
/// returned point satisfies the original closed constraints exactly.
const TIGHTENING_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub v_star: Vec<f64>,
    pub phi_value: f64,
    /// Indices of all robust sets containing `v_star`, ascending.
    pub certificate: Vec<usize>,
    /// Number of index subsets whose feasibility was tested.
    pub subsets_checked: usize,
    /// How many subsets of the winning cardinality were feasible. Above one,
    /// the optimum is not unique and the lexicographically first was kept.
    pub ties: usize,
}

fn project_onto(h: &HalfSpace, y: &[f64], cc: f64) -> Vec<f64> {
    let m = h.margin(y);
    if m >= 0.0 {
        y.to_vec()
    } else {
        let mut x = y.to_vec();
        axpy(&mut x, -m / cc, &h.c);
        x
    }
}

/// Min-norm point of `∩ {cᵢᵀv + bᵢ ≥ 0}`, if it lies in the ball.
///
/// Uses Dykstra's cyclic projections started at the origin, which converge
/// to the projection of the origin onto the intersection (plain alternating
/// projections only find *some* feasible point). Stops once a full cycle
/// moves less than `tol` and every constraint is violated by less than
/// `tol`; gives up (returns `None`) after `MAX_PROJECTION_CYCLES`, or as
/// soon as the dual bound proves the min-norm point lies outside the ball.
pub fn min_norm_feasible_point(
    halfspaces: &[HalfSpace],
    budget: &Budget,
    tol: f64,
) -> Option<Vec<f64>> {
    let dim = budget.dim();
    let mut active = Vec::with_capacity(halfspaces.len());
    for h in halfspaces {
        let cc = dot(&h.c, &h.c);
        if cc == 0.0 {
            if h.b < 0.0 {
                return None;
            }
        } else {
            active.push((h, cc));
        }
    }

    let mut x = zeros(dim);
    let mut increments = vec![zeros(dim); active.len()];
    let mut converged = active.is_empty();
    for _ in 0..MAX_PROJECTION_CYCLES {
        if converged {
            break;
        }
        let start = x.clone();
        for ((h, cc), p) in active.iter().zip(increments.iter_mut()) {
            let mut y = x;
            axpy(&mut y, 1.0, p);
            x = project_onto(h, &y, *cc);
            *p = sub(&y, &x);
        }
        // Each increment is −λᵢcᵢ with λᵢ ≥ 0, and x = −Σ increments, so the
        // dual objective −½‖x‖² − Σλᵢbᵢ lower-bounds ½‖min-norm point‖².
        let dual = -0.5 * dot(&x, &x)
            - active
                .iter()
                .zip(&increments)
                .map(|((h, cc), p)| -dot(p, &h.c) / cc * h.b)
                .sum::<f64>();
        let reach = budget.epsilon() + 10.0 * tol;
        if dual > 0.5 * reach * reach {
            return None;
        }
        let movement = norm(&sub(&x, &start));
        let violation = active
            .iter()
            .map(|(h, cc)| (-h.margin(&x) / cc.sqrt()).max(0.0))
            .fold(0.0, f64::max);
        converged = movement < tol && violation < tol;
    }
    if !converged || norm(&x) > budget.epsilon() + 10.0 * tol {
        return None;
    }
    Some(x)
}

/// A point of the ball lying in every given half-space under the exact
/// closed test, or `None`.
pub(crate) fn feasible_point(
    halfspaces: &[&HalfSpace],
    budget: &Budget,
    tol: f64,
) -> Option<Vec<f64>> {
    let pad = TIGHTENING_FACTOR * tol;
    let tightened: Vec<HalfSpace> = halfspaces
        .iter()
        .map(|h| HalfSpace::new(h.c.clone(), h.b - pad * norm(&h.c)))
        .collect();
    let mut x = min_norm_feasible_point(&tightened, budget, tol)?;
    let len = norm(&x);
    if len > budget.epsilon() {
        x = scaled(&x, budget.epsilon() / len);
    }
    (budget.contains(&x) && halfspaces.iter().all(|h| h.contains(&x))).then_some(x)
}

/// Exact maximiser of `phi_n` by subset enumeration, for `n ≤ max_n`.
pub fn oracle_solve(dataset: &Dataset, max_n: usize) -> Result<OracleResult> {
    let n = dataset.len();
    if n > max_n {
        return Err(Error::TooLarge { n, max_n });
    }
    let budget = dataset.budget();
    let tol = FEASIBILITY_TOLERANCE * budget.epsilon();
    let hs = dataset.halfspaces();

    let viable: Vec<usize> = (0..n)
        .filter(|&i| feasible_point(&[&hs[i]], budget, tol).is_some())
        .collect();
    let mut pair_ok = vec![vec![true; n]; n];
    for (a, &i) in viable.iter().enumerate() {
        for &j in &viable[a + 1..] {
            let ok = feasible_point(&[&hs[i], &hs[j]], budget, tol).is_some();
            pair_ok[i][j] = ok;
            pair_ok[j][i] = ok;
        }
    }

    let mut subsets_checked = 0;
    for k in (1..=viable.len()).rev() {
        let candidates: Vec<Vec<usize>> = viable
            .iter()
            .copied()
            .combinations(k)
            .filter(|s| s.iter().tuple_combinations().all(|(&i, &j)| pair_ok[i][j]))
            .collect();
        subsets_checked += candidates.len();
        let points: Vec<Option<Vec<f64>>> = candidates
            .par_iter()
            .map(|s| {
                let subset: Vec<&HalfSpace> = s.iter().map(|&i| &hs[i]).collect();
                feasible_point(&subset, budget, tol)
            })
            .collect();
        let ties = points.iter().filter(|p| p.is_some()).count();
        if let Some(v) = points.into_iter().flatten().next() {
            return Ok(OracleResult {
                phi_value: dataset.satisfied_count(&v) as f64 / n as f64,
                certificate: dataset.satisfied_indices(&v),
                v_star: v,
                subsets_checked,
                ties,
            });
        }
    }

    let v = zeros(budget.dim());
    Ok(OracleResult {
        phi_value: dataset.satisfied_count(&v) as f64 / n as f64,
        certificate: dataset.satisfied_indices(&v),
        v_star: v,
        subsets_checked,
        ties: 1,
    })
}

/// A boundary line `{cᵀv + b = 0}` in 2D, normalised so `‖c‖ = 1`.
#[derive(Debug, Clone, Copy)]
struct Line {
    c: [f64; 2],
    b: f64,
}

const LINE_TOLERANCE: f64 = 1e-9;

fn lines_2d(halfspaces: &[HalfSpace]) -> Result<Vec<Line>> {
    halfspaces
        .iter()
        .map(|h| {
            if h.dim() != 2 {
                return Err(Error::InvalidInput(format!(
                    "region counting needs 2D half-spaces, got dimension {}",
                    h.dim()
                )));
            }
            let len = norm(&h.c);
            if len == 0.0 {
                return Err(Error::InvalidInput(
                    "half-space with zero normal has no boundary line".into(),
                ));
            }
            Ok(Line {
                c: [h.c[0] / len, h.c[1] / len],
                b: h.b / len,
            })
        })
        .collect()
}

fn cross(a: &Line, b: &Line) -> f64 {
    a.c[0] * b.c[1] - a.c[1] * b.c[0]
}

fn same_line(a: &Line, b: &Line) -> bool {
    if cross(a, b).abs() > LINE_TOLERANCE {
        return false;
    }
    // parallel: same line iff offsets agree up to the orientation of c
    let orient = if dot(&a.c, &b.c) >= 0.0 { 1.0 } else { -1.0 };
    (a.b - orient * b.b).abs() <= LINE_TOLERANCE * (1.0 + a.b.abs())
}

fn intersection(a: &Line, b: &Line) -> Option<[f64; 2]> {
    let det = cross(a, b);
    if det.abs() <= LINE_TOLERANCE {
        return None;
    }
    Some([
        (-a.b * b.c[1] + b.b * a.c[1]) / det,
        (-b.b * a.c[0] + a.b * b.c[0]) / det,
    ])
}

fn same_point(p: &[f64; 2], q: &[f64; 2]) -> bool {
    let scale = 1.0 + p[0].abs().max(p[1].abs());
    (p[0] - q[0]).abs() <= LINE_TOLERANCE * scale && (p[1] - q[1]).abs() <= LINE_TOLERANCE * scale
}

/// Number of cells in the arrangement of the half-spaces' boundary lines
/// (the whole plane, ignoring the ball).
///
/// Lines are added one at a time; a new line crossing earlier lines at `p`
/// distinct points is cut into `p + 1` pieces, each splitting one cell.
/// Duplicate lines add nothing and parallel lines do not cross, so the count
/// is exact for degenerate arrangements too; in general position it equals
/// `(n² + n + 2)/2`.
pub fn count_regions_2d(halfspaces: &[HalfSpace]) -> Result<usize> {
    let lines = lines_2d(halfspaces)?;
    let mut kept: Vec<Line> = Vec::with_capacity(lines.len());
    let mut regions = 1;
    for line in lines {
        if kept.iter().any(|k| same_line(k, &line)) {
            continue;
        }
        let mut points: Vec<[f64; 2]> = Vec::new();
        for p in kept.iter().filter_map(|k| intersection(k, &line)) {
            if !points.iter().any(|q| same_point(q, &p)) {
                points.push(p);
            }
        }
        regions += 1 + points.len();
        kept.push(line);
    }
    Ok(regions)
}

/// No two boundary lines parallel (or equal) and no three through one point.
pub fn is_general_position(halfspaces: &[HalfSpace]) -> Result<bool> {
    let lines = lines_2d(halfspaces)?;
    let mut points = Vec::new();
    for (i, a) in lines.iter().enumerate() {
        for b in &lines[i + 1..] {
            match intersection(a, b) {
                None => return Ok(false),
                Some(p) => points.push(p),
            }
        }
    }
    for (i, p) in points.iter().enumerate() {
        if points[i + 1..].iter().any(|q| same_point(p, q)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `(n² + n + 2)/2`, the cell count of `n` lines in general position.
pub fn general_position_regions(n: usize) -> usize {
    (n * n + n + 2) / 2
}

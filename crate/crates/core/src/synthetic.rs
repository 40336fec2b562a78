//! Analytically known classifiers and data distributions.
//!
//! Two model families:
//!
//! - `Linear`: `f(x) = wᵀx + b0`. The linearisation is exact everywhere and,
//!   with Gaussian inputs, `phi(v)` has a closed form in the scalar `wᵀv`.
//! - `Fan`: a piecewise-affine function over `K` angular sectors around an
//!   apex (sectors are cut in the plane of the first two coordinates). Points
//!   within `2ε` of a sector boundary are excluded, so on every admitted
//!   point the function is exactly affine across the whole `2ε`-ball.

use std::f64::consts::{PI, SQRT_2, TAU};

use libm::erfc;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{Budget, Dataset, LinearizationRecord};
use crate::linalg::{dot, norm, scaled, sub};
use crate::rng::{gaussian_vector, seeded};

/// One affine piece `f(x) = wᵀ(x − apex) + b0` of a fan model.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub w: Vec<f64>,
    pub b0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanModel {
    apex: Vec<f64>,
    /// Sector start angles in `[0, 2π)`, strictly increasing. Sector `k`
    /// spans `[angles[k], angles[k + 1])`, the last one wrapping around.
    angles: Vec<f64>,
    pieces: Vec<AffinePiece>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticModel {
    Linear { w: Vec<f64>, b0: f64 },
    Fan(FanModel),
}

impl SyntheticModel {
    pub fn linear(w: Vec<f64>, b0: f64) -> Result<Self> {
        if w.is_empty() || norm(&w) == 0.0 || !b0.is_finite() {
            return Err(Error::InvalidInput("linear model needs a nonzero w".into()));
        }
        Ok(SyntheticModel::Linear { w, b0 })
    }

    pub fn fan(apex: Vec<f64>, angles: Vec<f64>, pieces: Vec<AffinePiece>) -> Result<Self> {
        let dim = apex.len();
        if dim < 2 {
            return Err(Error::InvalidInput("fan model needs dimension ≥ 2".into()));
        }
        if angles.len() < 2 || angles.len() != pieces.len() {
            return Err(Error::InvalidInput(
                "fan model needs K ≥ 2 sectors with one piece per sector".into(),
            ));
        }
        if angles.iter().any(|a| !(0.0..TAU).contains(a)) || angles.windows(2).any(|p| p[0] >= p[1])
        {
            return Err(Error::InvalidInput(
                "sector angles must be strictly increasing in [0, 2π)".into(),
            ));
        }
        for p in &pieces {
            if p.w.len() != dim || norm(&p.w) == 0.0 {
                return Err(Error::InvalidInput(
                    "every fan piece needs a nonzero w of the model dimension".into(),
                ));
            }
        }
        Ok(SyntheticModel::Fan(FanModel {
            apex,
            angles,
            pieces,
        }))
    }

    /// The two-sector "roof" `f(x) = x₂ − slope·|x₁ − a₁| + (offset)`: a
    /// continuous classifier whose decision boundary bends at the apex.
    pub fn roof(dim: usize, slope: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput("roof model needs dimension ≥ 2".into()));
        }
        let mut left = vec![0.0; dim];
        left[0] = slope;
        left[1] = 1.0;
        let mut right = left.clone();
        right[0] = -slope;
        Self::fan(
            vec![0.0; dim],
            vec![PI / 2.0, 3.0 * PI / 2.0],
            vec![
                AffinePiece { w: left, b0: 0.0 },
                AffinePiece { w: right, b0: 0.0 },
            ],
        )
    }

    pub fn dim(&self) -> usize {
        match self {
            SyntheticModel::Linear { w, .. } => w.len(),
            SyntheticModel::Fan(fan) => fan.apex.len(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SyntheticModel::Linear { w, b0 } => dot(w, x) + b0,
            SyntheticModel::Fan(fan) => {
                let p = &fan.pieces[fan.sector(x)];
                dot(&p.w, &sub(x, &fan.apex)) + p.b0
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            SyntheticModel::Linear { w, .. } => w.clone(),
            SyntheticModel::Fan(fan) => fan.pieces[fan.sector(x)].w.clone(),
        }
    }

    /// Whether the model is exactly affine on the `2ε`-ball around `x`.
    pub fn is_valid_point(&self, x: &[f64], epsilon: f64) -> bool {
        match self {
            SyntheticModel::Linear { .. } => true,
            SyntheticModel::Fan(fan) => fan.boundary_distance(x) >= 2.0 * epsilon,
        }
    }
}

impl FanModel {
    pub fn apex(&self) -> &[f64] {
        &self.apex
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    fn planar(&self, x: &[f64]) -> (f64, f64) {
        (x[0] - self.apex[0], x[1] - self.apex[1])
    }

    fn sector(&self, x: &[f64]) -> usize {
        let (qx, qy) = self.planar(x);
        let theta = qy.atan2(qx).rem_euclid(TAU);
        // last sector wraps through angle 0
        match self.angles.iter().rposition(|&a| a <= theta) {
            Some(k) => k,
            None => self.angles.len() - 1,
        }
    }

    /// Distance from `x` to the union of the sector boundary half-hyperplanes.
    fn boundary_distance(&self, x: &[f64]) -> f64 {
        let (qx, qy) = self.planar(x);
        self.angles
            .iter()
            .map(|a| {
                let (ux, uy) = (a.cos(), a.sin());
                let along = qx * ux + qy * uy;
                if along >= 0.0 {
                    (qx * uy - qy * ux).abs()
                } else {
                    qx.hypot(qy)
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Axis-aligned Gaussian input distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    /// Per-coordinate variances (diagonal covariance).
    pub variances: Vec<f64>,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != variances.len() {
            return Err(Error::InvalidInput(
                "mean and variances must be nonempty and of equal length".into(),
            ));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("variances must be positive".into()));
        }
        Ok(Self { mean, variances })
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            variances: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        gaussian_vector(rng, self.dim())
            .into_iter()
            .zip(self.mean.iter().zip(&self.variances))
            .map(|(z, (m, var))| m + var.sqrt() * z)
            .collect()
    }
}

pub fn linearize(
    model: &SyntheticModel,
    x: &[f64],
    budget: &Budget,
) -> Result<LinearizationRecord> {
    budget.check_dim(x, "x")?;
    if model.dim() != budget.dim() {
        return Err(Error::InvalidInput(format!(
            "model dimension {} does not match budget dimension {}",
            model.dim(),
            budget.dim()
        )));
    }
    if !model.is_valid_point(x, budget.epsilon()) {
        return Err(Error::ModelAssumptionViolated(
            "point lies within 2ε of a sector boundary".into(),
        ));
    }
    let f = model.value(x);
    if f == 0.0 {
        return Err(Error::DegenerateRecord);
    }
    Ok(LinearizationRecord::new(f, model.gradient(x))
        .with_label(if f > 0.0 { 1 } else { -1 })
        .with_point(x.to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingStats {
    pub draws: usize,
    pub accepted: usize,
}

impl SamplingStats {
    pub fn rejection_rate(&self) -> f64 {
        1.0 - self.accepted as f64 / self.draws as f64
    }
}

const MAX_DRAWS_BEFORE_GIVING_UP: usize = 1_000_000;

/// Draws points until `n` of them pass the validity predicate.
pub fn sample_points(
    model: &SyntheticModel,
    dist: &GaussianSpec,
    n: usize,
    budget: &Budget,
    seed: u64,
) -> Result<(Vec<LinearizationRecord>, SamplingStats)> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if dist.dim() != budget.dim() || model.dim() != budget.dim() {
        return Err(Error::InvalidInput(
            "model, distribution and budget dimensions disagree".into(),
        ));
    }
    let mut rng = seeded(seed);
    let mut records = Vec::with_capacity(n);
    let mut draws = 0usize;
    while records.len() < n {
        if draws >= MAX_DRAWS_BEFORE_GIVING_UP && records.len() * 100 < draws {
            return Err(Error::DistributionMismatch {
                accepted: records.len(),
                draws,
            });
        }
        draws += 1;
        let x = dist.sample(&mut rng);
        match linearize(model, &x, budget) {
            Ok(r) => records.push(r),
            Err(Error::ModelAssumptionViolated(_)) | Err(Error::DegenerateRecord) => {}
            Err(e) => return Err(e),
        }
    }
    let stats = SamplingStats {
        draws,
        accepted: records.len(),
    };
    Ok((records, stats))
}

pub fn sample_dataset(
    model: &SyntheticModel,
    dist: &GaussianSpec,
    n: usize,
    budget: &Budget,
    seed: u64,
) -> Result<Dataset> {
    let (records, _) = sample_points(model, dist, n, budget, seed)?;
    Dataset::new(records, *budget)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal survival function `1 − Φ(z)`, accurate in the upper tail.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Mean and standard deviation of the score `s = wᵀX + b0`.
fn score_moments(w: &[f64], b0: f64, dist: &GaussianSpec) -> (f64, f64) {
    let mean = dot(w, &dist.mean) + b0;
    let var: f64 = w
        .iter()
        .zip(&dist.variances)
        .map(|(wi, s)| wi * wi * s)
        .sum();
    (mean, var.sqrt())
}

/// `phi` as a function of `u = wᵀv` for a linear model:
/// `P[s ≥ ε‖w‖ − u] + P[s ≤ −ε‖w‖ − u]`.
fn phi_of_projection(u: f64, radius: f64, mean: f64, sd: f64) -> f64 {
    normal_sf((radius - u - mean) / sd) + normal_cdf((-radius - u - mean) / sd)
}

fn linear_parts<'a>(
    model: &'a SyntheticModel,
    dist: &GaussianSpec,
    budget: &Budget,
) -> Result<(&'a [f64], f64)> {
    let (w, b0) = match model {
        SyntheticModel::Linear { w, b0 } => (w.as_slice(), *b0),
        SyntheticModel::Fan(_) => {
            return Err(Error::Unsupported(
                "closed-form phi is only available for linear models".into(),
            ))
        }
    };
    if w.len() != budget.dim() || dist.dim() != budget.dim() {
        return Err(Error::InvalidInput(
            "model, distribution and budget dimensions disagree".into(),
        ));
    }
    Ok((w, b0))
}

/// Population coverage `phi(v)` of a linear model under Gaussian inputs.
pub fn phi_closed_form(
    model: &SyntheticModel,
    dist: &GaussianSpec,
    v: &[f64],
    budget: &Budget,
) -> Result<f64> {
    let (w, b0) = linear_parts(model, dist, budget)?;
    budget.check_dim(v, "v")?;
    let (mean, sd) = score_moments(w, b0, dist);
    let radius = budget.epsilon() * norm(w);
    Ok(phi_of_projection(dot(w, v), radius, mean, sd))
}

const VSTAR_GRID: usize = 2001;
const TIE_TOLERANCE: f64 = 1e-12;

/// Exact maximiser of `phi` for a linear model.
///
/// `phi` depends on `v` only through `u = wᵀv ∈ [−ε‖w‖, ε‖w‖]`, so this is a
/// 1D search: a 2001-point grid followed by golden-section refinement around
/// the best grid point. Near-ties between `±u` resolve toward `u ≥ 0`.
pub fn true_vstar_linear(
    model: &SyntheticModel,
    dist: &GaussianSpec,
    budget: &Budget,
) -> Result<(Vec<f64>, f64)> {
    let (w, b0) = linear_parts(model, dist, budget)?;
    let (mean, sd) = score_moments(w, b0, dist);
    let radius = budget.epsilon() * norm(w);
    let phi = |u: f64| phi_of_projection(u, radius, mean, sd);
    let grid_u = |k: usize| -radius + 2.0 * radius * k as f64 / (VSTAR_GRID - 1) as f64;

    let mut best_k = 0;
    let mut best = phi(grid_u(0));
    for k in 1..VSTAR_GRID {
        let u = grid_u(k);
        let val = phi(u);
        let prefer_nonneg = (val - best).abs() <= TIE_TOLERANCE && u >= 0.0 && grid_u(best_k) < 0.0;
        if val > best + TIE_TOLERANCE || prefer_nonneg {
            best = val;
            best_k = k;
        }
    }

    let lo = grid_u(best_k.saturating_sub(1));
    let hi = grid_u((best_k + 1).min(VSTAR_GRID - 1));
    let refined = golden_section_max(phi, lo, hi, 80);
    let u_star = if phi(refined) > best + TIE_TOLERANCE {
        refined
    } else {
        grid_u(best_k)
    };
    let v = scaled(w, u_star / dot(w, w));
    let value = phi_closed_form(model, dist, &v, budget)?;
    Ok((v, value))
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        }
    }
    if fa >= fb {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::phi_n;

    fn std_linear() -> (SyntheticModel, GaussianSpec, Budget) {
        (
            SyntheticModel::linear(vec![1.0, 0.0], 0.0).unwrap(),
            GaussianSpec::standard(2),
            Budget::new(0.1, 2).unwrap(),
        )
    }

    /// Monte Carlo estimate of phi by direct robust-set membership.
    fn monte_carlo_phi(
        model: &SyntheticModel,
        dist: &GaussianSpec,
        v: &[f64],
        budget: &Budget,
        samples: usize,
        seed: u64,
    ) -> f64 {
        let ds = sample_dataset(model, dist, samples, budget, seed).unwrap();
        phi_n(v, &ds).unwrap()
    }

    #[test]
    fn linearize_examples() {
        let model = SyntheticModel::linear(vec![1.0, 0.0], 0.0).unwrap();
        let b = Budget::new(0.1, 2).unwrap();
        let r = linearize(&model, &[2.0, 3.0], &b).unwrap();
        assert_eq!(r.f_value, 2.0);
        assert_eq!(r.gradient, vec![1.0, 0.0]);
        let r = linearize(&model, &[-0.5, 0.0], &b).unwrap();
        assert_eq!(r.f_value, -0.5);
        assert_eq!(r.label, Some(-1));
        assert_eq!(
            linearize(&model, &[0.0, 1.0], &b),
            Err(Error::DegenerateRecord)
        );
    }

    #[test]
    fn fan_linearization_inside_sector() {
        let model = SyntheticModel::roof(2, 0.5).unwrap();
        let b = Budget::new(0.1, 2).unwrap();
        // deep in the left sector (x₁ < 0)
        let r = linearize(&model, &[-3.0, 1.0], &b).unwrap();
        assert_eq!(r.gradient, vec![0.5, 1.0]);
        let r = linearize(&model, &[3.0, 1.0], &b).unwrap();
        assert_eq!(r.gradient, vec![-0.5, 1.0]);
        assert!(matches!(
            linearize(&model, &[0.15, 1.0], &b),
            Err(Error::ModelAssumptionViolated(_))
        ));
    }

    #[test]
    fn fan_linearization_is_exact_on_the_double_ball() {
        let model = SyntheticModel::roof(3, 0.7).unwrap();
        let b = Budget::new(0.2, 3).unwrap();
        let ds = sample_dataset(&model, &GaussianSpec::standard(3), 200, &b, 3).unwrap();
        let mut rng = seeded(11);
        for r in ds.records() {
            let x = r.point.as_ref().unwrap();
            for _ in 0..20 {
                let d = crate::rng::uniform_in_ball(&mut rng, 3, 2.0 * b.epsilon());
                let exact = model.value(&crate::linalg::add(x, &d));
                assert!((exact - r.linearized_value(&d)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let (model, dist, b) = std_linear();
        let a = sample_dataset(&model, &dist, 5, &b, 42).unwrap();
        let c = sample_dataset(&model, &dist, 5, &b, 42).unwrap();
        assert_eq!(a, c);
        let d = sample_dataset(&model, &dist, 5, &b, 43).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn linear_model_never_rejects() {
        let (model, dist, b) = std_linear();
        let (_, stats) = sample_points(&model, &dist, 1000, &b, 1).unwrap();
        assert_eq!(stats.draws, 1000);
    }

    #[test]
    fn fan_rejection_matches_strip_probability() {
        // The roof's two boundary rays form the full line x₁ = 0, so the
        // excluded region is the strip |x₁| < 2ε.
        let model = SyntheticModel::roof(2, 0.5).unwrap();
        let eps = 0.05;
        let b = Budget::new(eps, 2).unwrap();
        let (_, stats) = sample_points(&model, &GaussianSpec::standard(2), 20_000, &b, 9).unwrap();
        let expected = 2.0 * normal_cdf(2.0 * eps) - 1.0;
        let observed = 1.0 - 20_000.0 / stats.draws as f64;
        assert!(
            (observed - expected).abs() < 0.01,
            "{observed} vs {expected}"
        );
    }

    #[test]
    fn unreachable_distribution_is_reported() {
        let model = SyntheticModel::roof(2, 0.5).unwrap();
        let b = Budget::new(0.5, 2).unwrap();
        // all mass sits right on the boundary line
        let dist = GaussianSpec::new(vec![0.0, 0.0], vec![1e-6, 1.0]).unwrap();
        assert!(matches!(
            sample_points(&model, &dist, 10, &b, 0),
            Err(Error::DistributionMismatch { .. })
        ));
    }

    #[test]
    fn closed_form_examples() {
        let (model, dist, b) = std_linear();
        let at_plus = phi_closed_form(&model, &dist, &[0.1, 0.0], &b).unwrap();
        let at_minus = phi_closed_form(&model, &dist, &[-0.1, 0.0], &b).unwrap();
        let at_zero = phi_closed_form(&model, &dist, &[0.0, 0.0], &b).unwrap();
        assert!((at_plus - 0.9207).abs() < 1e-4, "{at_plus}");
        assert!((at_plus - at_minus).abs() < 1e-15);
        assert!((at_zero - 2.0 * (1.0 - normal_cdf(0.1))).abs() < 1e-15);

        for (v, val) in [
            ([0.1, 0.0], at_plus),
            ([-0.1, 0.0], at_minus),
            ([0.0, 0.0], at_zero),
        ] {
            let mc = monte_carlo_phi(&model, &dist, &v, &b, 1_000_000, 5);
            assert!((mc - val).abs() < 0.002, "{v:?}: mc {mc} vs {val}");
        }
    }

    #[test]
    fn closed_form_rejects_fan() {
        let model = SyntheticModel::roof(2, 0.5).unwrap();
        let b = Budget::new(0.1, 2).unwrap();
        assert!(matches!(
            phi_closed_form(&model, &GaussianSpec::standard(2), &[0.0, 0.0], &b),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn normal_cdf_reference_values() {
        // tabulated values
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-1.959_963_984_540_054) - 0.025).abs() < 1e-12);
        let sf5 = 2.866_515_718_791_933e-7;
        assert!((normal_sf(5.0) - sf5).abs() < 1e-13 * sf5);
    }

    #[test]
    fn true_vstar_symmetric_case_prefers_nonnegative() {
        let (model, dist, b) = std_linear();
        let (v, val) = true_vstar_linear(&model, &dist, &b).unwrap();
        assert!(v[0] >= 0.0);
        // grid oracle
        let grid_max = (0..=4000)
            .map(|k| {
                let u = -0.1 + 0.2 * k as f64 / 4000.0;
                phi_closed_form(&model, &dist, &[u, 0.0], &b).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(val >= grid_max - 1e-12);
    }

    #[test]
    fn true_vstar_one_sided_case_hits_the_boundary() {
        // mean three standard deviations along w: all mass on the positive side
        let model = SyntheticModel::linear(vec![0.6, 0.8], 0.0).unwrap();
        let dist = GaussianSpec::new(vec![1.8, 2.4], vec![1.0, 1.0]).unwrap();
        let b = Budget::new(0.3, 2).unwrap();
        let (v, _) = true_vstar_linear(&model, &dist, &b).unwrap();
        let u = dot(&[0.6, 0.8], &v);
        assert!((u - 0.3).abs() < 1e-9, "u = {u}");
    }

    #[test]
    fn true_vstar_tiny_budget_is_full_coverage() {
        let model = SyntheticModel::linear(vec![1.0, -1.0], 0.2).unwrap();
        let b = Budget::new(1e-12, 2).unwrap();
        let (_, val) = true_vstar_linear(&model, &GaussianSpec::standard(2), &b).unwrap();
        assert!((val - 1.0).abs() < 1e-9);
    }

    #[test]
    fn closed_form_matches_empirical_phi_n() {
        let mut rng = seeded(2024);
        for trial in 0..20u64 {
            let dim = rng.random_range(1..=4);
            let w = gaussian_vector(&mut rng, dim);
            let b0 = rng.random_range(-1.0..1.0);
            let model = SyntheticModel::linear(w, b0).unwrap();
            let mean = gaussian_vector(&mut rng, dim);
            let variances = (0..dim).map(|_| rng.random_range(0.2..2.0)).collect();
            let dist = GaussianSpec::new(mean, variances).unwrap();
            let b = Budget::new(rng.random_range(0.05..0.6), dim).unwrap();
            let v = crate::rng::uniform_in_ball(&mut rng, dim, b.epsilon());
            let exact = phi_closed_form(&model, &dist, &v, &b).unwrap();
            let mc = monte_carlo_phi(&model, &dist, &v, &b, 100_000, trial);
            assert!((exact - mc).abs() < 0.01, "trial {trial}: {exact} vs {mc}");
        }
    }
}

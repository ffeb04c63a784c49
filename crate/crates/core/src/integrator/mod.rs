//! Success rates: the probability mass of the predicted endpoint
//! distribution over a target region.
//!
//! Rectangles use the closed-form product of per-axis normal intervals.
//! Discs reduce to a one-dimensional integral over `x` which is evaluated by
//! adaptive Gauss–Kronrod quadrature after the substitution `x = r·sin θ`,
//! removing the square-root singularity at the rim. A seeded Monte Carlo
//! sampler and a direct two-dimensional quadrature of the joint density are
//! provided as independent cross-checks.

mod normal;
pub mod quadrature;

use std::f64::consts::{FRAC_PI_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DistributionParams, ModelError, ModelSpec, OffsetMode, Prediction};

pub use normal::{normal_cdf, normal_interval, normal_pdf, SATURATION_Z};

/// Absolute tolerance requested from the disc quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-12;
/// Largest error bound a quadrature result may carry.
pub const QUADRATURE_MAX_ERROR: f64 = 1e-9;
/// Reported bound for the closed-form rectangle product.
pub const CLOSED_FORM_ERROR: f64 = 1e-14;
pub const MIN_MONTE_CARLO_SAMPLES: usize = 1000;

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("correlated parameters (rho = {0}) are not supported")]
    Correlated(f64),
    #[error("invalid distribution parameters")]
    InvalidParams,
    #[error("target size must be positive, got {0}")]
    NonPositiveSize(f64),
    #[error("quadrature did not reach {QUADRATURE_MAX_ERROR} (estimate {0})")]
    NotConverged(f64),
    #[error("Monte Carlo needs at least {MIN_MONTE_CARLO_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessRate {
    pub value: f64,
    pub method: Method,
    pub error_bound: f64,
}

/// Target region in angular coordinates centered on the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Disc { diameter: f64 },
    Rect { w_x: f64, w_y: f64 },
}

impl Region {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Region::Disc { diameter } => {
                let r = diameter / 2.0;
                x * x + y * y <= r * r
            }
            Region::Rect { w_x, w_y } => x.abs() <= w_x / 2.0 && y.abs() <= w_y / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Disc,
    Square,
}

impl std::str::FromStr for ShapeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "disc" => Ok(ShapeKind::Disc),
            "square" => Ok(ShapeKind::Square),
            _ => Err(format!("unknown shape `{s}` (expected disc or square)")),
        }
    }
}

fn check_diagonal(params: &DistributionParams) -> Result<(), IntegrationError> {
    if !params.is_valid() {
        return Err(IntegrationError::InvalidParams);
    }
    if params.rho != 0.0 {
        return Err(IntegrationError::Correlated(params.rho));
    }
    Ok(())
}

fn check_size(v: f64) -> Result<(), IntegrationError> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(IntegrationError::NonPositiveSize(v))
    }
}

/// Closed-form mass over an axis-aligned rectangle centered on the target.
/// Infinite extents are allowed.
pub fn sr_rect(params: &DistributionParams, w_x: f64, w_y: f64) -> Result<SuccessRate, IntegrationError> {
    check_diagonal(params)?;
    check_size(w_x)?;
    check_size(w_y)?;
    let p = params;
    let px = normal_interval((-w_x / 2.0 - p.mu_x) / p.sigma_x, (w_x / 2.0 - p.mu_x) / p.sigma_x);
    let py = normal_interval((-w_y / 2.0 - p.mu_y) / p.sigma_y, (w_y / 2.0 - p.mu_y) / p.sigma_y);
    Ok(SuccessRate { value: (px * py).clamp(0.0, 1.0), method: Method::ClosedForm, error_bound: CLOSED_FORM_ERROR })
}

/// Mass over a disc of diameter `w` centered on the target.
pub fn sr_circle(params: &DistributionParams, w: f64) -> Result<SuccessRate, IntegrationError> {
    check_diagonal(params)?;
    check_size(w)?;
    let p = *params;
    let r = w / 2.0;

    // Mass over the chord at x = r sin θ, weighted by dx = r cos θ dθ.
    let integrand = |theta: f64| {
        let (s, c) = theta.sin_cos();
        let half_chord = r * c.max(0.0);
        let x = r * s;
        let density = normal_pdf((x - p.mu_x) / p.sigma_x) / p.sigma_x;
        let chord = normal_interval((-half_chord - p.mu_y) / p.sigma_y, (half_chord - p.mu_y) / p.sigma_y);
        half_chord * density * chord
    };

    // Anchor the quadrature on the bulk of the x-marginal so narrow
    // distributions inside huge discs are not stepped over.
    let breakpoints: Vec<f64> =
        (-8..=8).map(|k| ((p.mu_x + k as f64 * p.sigma_x) / r).clamp(-1.0, 1.0).asin()).collect();
    let out =
        quadrature::integrate(integrand, -FRAC_PI_2, FRAC_PI_2, &breakpoints, QUADRATURE_TOLERANCE, MAX_INTERVALS);
    if !(out.error <= QUADRATURE_MAX_ERROR) {
        return Err(IntegrationError::NotConverged(out.error));
    }
    Ok(SuccessRate { value: out.value.clamp(0.0, 1.0), method: Method::Quadrature, error_bound: out.error })
}

/// Two-dimensional quadrature of the joint density over a rectangle.
/// Supports correlated parameters; used to cross-check [`sr_rect`].
pub fn sr_rect_quadrature(params: &DistributionParams, w_x: f64, w_y: f64) -> Result<SuccessRate, IntegrationError> {
    if !params.is_valid() {
        return Err(IntegrationError::InvalidParams);
    }
    check_size(w_x)?;
    check_size(w_y)?;
    let p = *params;
    let one_minus = 1.0 - p.rho * p.rho;
    let norm = 1.0 / (2.0 * PI * p.sigma_x * p.sigma_y * one_minus.sqrt());
    let density = move |x: f64, y: f64| {
        let u = (x - p.mu_x) / p.sigma_x;
        let v = (y - p.mu_y) / p.sigma_y;
        norm * (-(u * u - 2.0 * p.rho * u * v + v * v) / (2.0 * one_minus)).exp()
    };
    let bulk = |mu: f64, sigma: f64| -> Vec<f64> { (-8..=8).map(|k| mu + k as f64 * sigma).collect() };
    let (hx, hy) = (w_x / 2.0, w_y / 2.0);
    let y_breaks = bulk(p.mu_y, p.sigma_y);
    let x_breaks = bulk(p.mu_x, p.sigma_x);

    let inner_tol = QUADRATURE_TOLERANCE * 0.1 / w_x.max(1.0);
    let worst_row = std::cell::Cell::new(0.0f64);
    let outer = quadrature::integrate(
        |x| {
            let row = quadrature::integrate(|y| density(x, y), -hy, hy, &y_breaks, inner_tol, MAX_INTERVALS);
            worst_row.set(worst_row.get().max(row.error));
            row.value
        },
        -hx,
        hx,
        &x_breaks,
        QUADRATURE_TOLERANCE,
        MAX_INTERVALS,
    );
    let error = outer.error + worst_row.get() * w_x;
    if !(error <= QUADRATURE_MAX_ERROR) {
        return Err(IntegrationError::NotConverged(error));
    }
    Ok(SuccessRate { value: outer.value.clamp(0.0, 1.0), method: Method::Quadrature, error_bound: error })
}

/// Seeded Monte Carlo estimate; `error_bound` is three standard errors.
pub fn sr_monte_carlo(
    params: &DistributionParams,
    region: Region,
    n: usize,
    seed: u64,
) -> Result<SuccessRate, IntegrationError> {
    if !params.is_valid() {
        return Err(IntegrationError::InvalidParams);
    }
    if n < MIN_MONTE_CARLO_SAMPLES {
        return Err(IntegrationError::TooFewSamples(n));
    }
    let p = *params;
    let cross = (1.0 - p.rho * p.rho).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let x = p.mu_x + p.sigma_x * z1;
        let y = p.mu_y + p.sigma_y * (p.rho * z1 + cross * z2);
        if region.contains(x, y) {
            hits += 1;
        }
    }
    let value = hits as f64 / n as f64;
    let standard_error = (value * (1.0 - value) / n as f64).sqrt();
    Ok(SuccessRate { value, method: Method::MonteCarlo, error_bound: 3.0 * standard_error })
}

/// Per-query evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalOptions {
    pub amplitude: Option<f64>,
    pub offset: OffsetMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    #[serde(flatten)]
    pub prediction: Prediction,
    pub success_rate: SuccessRate,
}

/// Model prediction and success rate for a disc of angular diameter `w`.
pub fn evaluate_disc(spec: &ModelSpec, w: f64, opts: &EvalOptions) -> Result<Evaluation, IntegrationError> {
    let prediction = spec.params_with(w, w, opts.amplitude, opts.offset)?;
    let success_rate = sr_circle(&prediction.params, w)?;
    Ok(Evaluation { prediction, success_rate })
}

/// Model prediction and success rate for a rectangle with angular extent
/// `(w_x, w_y)`.
pub fn evaluate_rect(spec: &ModelSpec, w_x: f64, w_y: f64, opts: &EvalOptions) -> Result<Evaluation, IntegrationError> {
    let prediction = spec.params_with(w_x, w_y, opts.amplitude, opts.offset)?;
    let success_rate = sr_rect(&prediction.params, w_x, w_y)?;
    Ok(Evaluation { prediction, success_rate })
}

pub fn evaluate_shape(
    spec: &ModelSpec,
    kind: ShapeKind,
    w: f64,
    opts: &EvalOptions,
) -> Result<Evaluation, IntegrationError> {
    match kind {
        ShapeKind::Disc => evaluate_disc(spec, w, opts),
        ShapeKind::Square => evaluate_rect(spec, w, w, opts),
    }
}

pub const INVERSE_GRID_STEP: f64 = 0.1;
pub const INVERSE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InverseError {
    #[error("target success rate must lie strictly between 0 and 1, got {0}")]
    InvalidTarget(f64),
    #[error("invalid search range [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("target {target} unreachable: success rate at {w_max_deg} deg is only {sr_at_max}")]
    Unreachable { target: f64, w_max_deg: f64, sr_at_max: f64 },
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InverseSolution {
    pub w_deg: f64,
    pub success_rate: f64,
    /// Whether the grid pre-check found the success rate nondecreasing, in
    /// which case bisection was used.
    pub monotone: bool,
}

/// Smallest width in `range` whose success rate reaches `target_sr`.
pub fn inverse_width(
    target_sr: f64,
    spec: &ModelSpec,
    kind: ShapeKind,
    range: (f64, f64),
    opts: &EvalOptions,
) -> Result<InverseSolution, InverseError> {
    if !(target_sr > 0.0 && target_sr < 1.0) {
        return Err(InverseError::InvalidTarget(target_sr));
    }
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(InverseError::InvalidRange(lo, hi));
    }
    let sr = |w: f64| evaluate_shape(spec, kind, w, opts).map(|e| e.success_rate.value);

    let steps = ((hi - lo) / INVERSE_GRID_STEP).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|i| lo + i as f64 * INVERSE_GRID_STEP).collect();
    if *grid.last().expect("grid") < hi {
        grid.push(hi);
    }
    let values = grid.iter().map(|&w| sr(w)).collect::<Result<Vec<_>, _>>()?;
    let monotone = values.windows(2).all(|v| v[1] >= v[0]);

    let Some(first) = values.iter().position(|&v| v >= target_sr) else {
        return Err(InverseError::Unreachable {
            target: target_sr,
            w_max_deg: hi,
            sr_at_max: values[values.len() - 1],
        });
    };
    if first == 0 {
        return Ok(InverseSolution { w_deg: lo, success_rate: values[0], monotone });
    }

    let (mut below, mut above, mut above_sr) = (grid[first - 1], grid[first], values[first]);
    if monotone {
        while above - below > INVERSE_TOLERANCE {
            let mid = 0.5 * (below + above);
            let v = sr(mid)?;
            if v >= target_sr {
                above = mid;
                above_sr = v;
            } else {
                below = mid;
            }
        }
    } else {
        let n = ((above - below) / INVERSE_TOLERANCE).ceil() as usize;
        for i in 1..=n {
            let w = (below + i as f64 * INVERSE_TOLERANCE).min(above);
            let v = sr(w)?;
            if v >= target_sr {
                above = w;
                above_sr = v;
                break;
            }
        }
    }
    Ok(InverseSolution { w_deg: above, success_rate: above_sr, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn baseline_at(w: f64) -> DistributionParams {
        ModelSpec::baseline().distribution_params(w, None).unwrap().params
    }

    /// Midpoint-rule disc mass on a fine polar grid, sharing no code with
    /// the production path.
    fn polar_oracle(p: &DistributionParams, w: f64) -> f64 {
        let (nr, nt) = (2000, 2000);
        let r_max = w / 2.0;
        let mut sum = 0.0;
        for i in 0..nr {
            let r = (i as f64 + 0.5) * r_max / nr as f64;
            for j in 0..nt {
                let t = (j as f64 + 0.5) * 2.0 * PI / nt as f64;
                let (x, y) = (r * t.cos(), r * t.sin());
                let u = (x - p.mu_x) / p.sigma_x;
                let v = y / p.sigma_y;
                sum += r * (-(u * u + v * v) / 2.0).exp();
            }
        }
        sum * (r_max / nr as f64) * (2.0 * PI / nt as f64) / (2.0 * PI * p.sigma_x * p.sigma_y)
    }

    #[test]
    fn circle_matches_polar_grid() {
        for w in [0.95, 2.0, 4.5] {
            let p = baseline_at(w);
            let q = sr_circle(&p, w).unwrap();
            assert!(q.error_bound <= QUADRATURE_MAX_ERROR);
            assert_abs_diff_eq!(q.value, polar_oracle(&p, w), epsilon = 5e-6);
        }
    }

    #[test]
    fn circle_reference_value_at_fig_width() {
        // Independent adaptive-quadrature evaluation of the same integral.
        let q = sr_circle(&baseline_at(0.95), 0.95).unwrap();
        assert_abs_diff_eq!(q.value, 0.638_526_081_468_615, epsilon = 1e-9);
    }

    #[test]
    fn huge_disc_holds_everything() {
        // Model parameters at every grid width, integrated over a 1000° disc.
        for i in 0..=390 {
            let w = 0.5 + 0.05 * i as f64;
            assert_abs_diff_eq!(sr_circle(&baseline_at(w), 1000.0).unwrap().value, 1.0, epsilon = 1e-6);
        }
        // The model's own spread at W = 1000° is ~110°, so that disc is not all-enclosing.
        assert!(sr_circle(&baseline_at(1000.0), 1000.0).unwrap().value < 1.0 - 1e-5);
        let wide = DistributionParams::diagonal(0.0, 3.0, 2.0);
        assert_abs_diff_eq!(sr_circle(&wide, 1000.0).unwrap().value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn rect_limits() {
        let p = DistributionParams::diagonal(0.0, 0.4, 0.3);
        let marginal = sr_rect(&p, f64::INFINITY, 1.0).unwrap().value;
        assert_abs_diff_eq!(marginal, normal_interval(-0.5 / 0.3, 0.5 / 0.3), epsilon = 1e-15);
        assert_eq!(sr_rect(&p, f64::INFINITY, f64::INFINITY).unwrap().value, 1.0);
        assert_abs_diff_eq!(sr_rect(&p, 1e6, 1e6).unwrap().value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rect_matches_two_dimensional_quadrature() {
        let p = baseline_at(2.0);
        let closed = sr_rect(&p, 2.0, 2.0).unwrap();
        let quad = sr_rect_quadrature(&p, 2.0, 2.0).unwrap();
        assert_eq!(closed.method, Method::ClosedForm);
        assert_abs_diff_eq!(closed.value, quad.value, epsilon = 1e-9);
    }

    #[test]
    fn correlated_params_rejected_by_closed_forms() {
        let p = DistributionParams { rho: 0.3, ..DistributionParams::diagonal(0.0, 0.4, 0.3) };
        assert_eq!(sr_rect(&p, 1.0, 1.0), Err(IntegrationError::Correlated(0.3)));
        assert_eq!(sr_circle(&p, 1.0), Err(IntegrationError::Correlated(0.3)));
        // The 2-D quadrature still handles it and agrees with sampling.
        let q = sr_rect_quadrature(&p, 1.0, 1.0).unwrap();
        let mc = sr_monte_carlo(&p, Region::Rect { w_x: 1.0, w_y: 1.0 }, 200_000, 3).unwrap();
        assert!((q.value - mc.value).abs() <= mc.error_bound);
    }

    #[test]
    fn bad_sizes() {
        let p = baseline_at(1.0);
        assert!(sr_circle(&p, 0.0).is_err());
        assert!(sr_circle(&p, -1.0).is_err());
        assert!(sr_rect(&p, 1.0, 0.0).is_err());
    }

    #[test]
    fn monte_carlo_contract() {
        let p = baseline_at(2.0);
        let all = sr_monte_carlo(&p, Region::Rect { w_x: f64::INFINITY, w_y: f64::INFINITY }, 5000, 0).unwrap();
        assert_eq!((all.value, all.error_bound, all.method), (1.0, 0.0, Method::MonteCarlo));
        let a = sr_monte_carlo(&p, Region::Disc { diameter: 2.0 }, 10_000, 42).unwrap();
        let b = sr_monte_carlo(&p, Region::Disc { diameter: 2.0 }, 10_000, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            sr_monte_carlo(&p, Region::Disc { diameter: 2.0 }, 999, 0),
            Err(IntegrationError::TooFewSamples(999))
        );
    }

    #[test]
    fn monte_carlo_agrees_with_circle() {
        let p = baseline_at(2.0);
        let mc = sr_monte_carlo(&p, Region::Disc { diameter: 2.0 }, 1_000_000, 7).unwrap();
        let q = sr_circle(&p, 2.0).unwrap();
        assert!((mc.value - q.value).abs() <= mc.error_bound, "{} vs {}", mc.value, q.value);
    }

    #[test]
    fn inverse_self_consistency() {
        let spec = ModelSpec::baseline();
        let opts = EvalOptions::default();
        let sol = inverse_width(0.95, &spec, ShapeKind::Disc, (0.5, 10.0), &opts).unwrap();
        assert!(sol.monotone);
        assert!(evaluate_disc(&spec, sol.w_deg, &opts).unwrap().success_rate.value >= 0.95);
        assert!(evaluate_disc(&spec, sol.w_deg - 1e-3, &opts).unwrap().success_rate.value < 0.95);
        let half = inverse_width(0.5, &spec, ShapeKind::Disc, (0.5, 10.0), &opts).unwrap();
        assert!(half.w_deg < sol.w_deg);
    }

    #[test]
    fn inverse_boundaries() {
        let spec = ModelSpec::baseline();
        let opts = EvalOptions::default();
        let at_min = evaluate_disc(&spec, 0.5, &opts).unwrap().success_rate.value;
        let sol = inverse_width(at_min - 1e-9, &spec, ShapeKind::Disc, (0.5, 10.0), &opts).unwrap();
        assert_eq!(sol.w_deg, 0.5);
        let sol = inverse_width(at_min + 1e-6, &spec, ShapeKind::Disc, (0.5, 10.0), &opts).unwrap();
        assert!(sol.w_deg - 0.5 < 1e-3);

        let err = inverse_width(0.9999, &spec, ShapeKind::Disc, (0.5, 1.0), &opts).unwrap_err();
        match err {
            InverseError::Unreachable { sr_at_max, w_max_deg, .. } => {
                assert_eq!(w_max_deg, 1.0);
                assert!(sr_at_max < 0.9999);
            }
            e => panic!("{e}"),
        }
        assert!(matches!(
            inverse_width(1.0, &spec, ShapeKind::Disc, (0.5, 1.0), &opts),
            Err(InverseError::InvalidTarget(_))
        ));
        assert!(matches!(
            inverse_width(0.5, &spec, ShapeKind::Disc, (1.0, 0.5), &opts),
            Err(InverseError::InvalidRange(..))
        ));
    }

    #[test]
    fn inverse_square_needs_less_width_than_disc() {
        let spec = ModelSpec::baseline();
        let opts = EvalOptions::default();
        let disc = inverse_width(0.9, &spec, ShapeKind::Disc, (0.5, 10.0), &opts).unwrap();
        let square = inverse_width(0.9, &spec, ShapeKind::Square, (0.5, 10.0), &opts).unwrap();
        assert!(square.w_deg < disc.w_deg);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn nested_discs_and_bounding_square(w in 0.2f64..8.0, grow in 0.01f64..3.0, mu in -1.0f64..1.0) {
            let p = DistributionParams::diagonal(mu, 0.2 + 0.1 * w, 0.25 + 0.07 * w);
            let inner = sr_circle(&p, w).unwrap().value;
            let outer = sr_circle(&p, w + grow).unwrap().value;
            prop_assert!(inner <= outer + 1e-12);
            prop_assert!(inner <= sr_rect(&p, w, w).unwrap().value + 1e-12);
            let nested = sr_rect(&p, w, w * 0.5).unwrap().value;
            prop_assert!(nested <= sr_rect(&p, w + grow, w * 0.5 + grow).unwrap().value + 1e-15);
        }

        #[test]
        fn offset_sign_does_not_matter(w in 0.2f64..8.0, delta in 0.0f64..1.5) {
            let plus = DistributionParams::diagonal(delta, 0.4, 0.3);
            let minus = DistributionParams::diagonal(-delta, 0.4, 0.3);
            let a = sr_circle(&plus, w).unwrap().value;
            let b = sr_circle(&minus, w).unwrap().value;
            prop_assert!((a - b).abs() < 1e-11);
            let a = sr_rect(&plus, w, w).unwrap().value;
            let b = sr_rect(&minus, w, w).unwrap().value;
            prop_assert!((a - b).abs() < 1e-14);
        }
    }
}

//! Scoring a model against observed success rates.

use serde::{Deserialize, Serialize};

use super::{fit_conditions, prepare, ConditionStats, FitError, KsOptions, TrialRecord};
use crate::integrator::{evaluate_disc, EvalOptions};
use crate::model::{ModelSpec, ModelVariant, OffsetMode, ValidityRange};

pub const VALIDATION_SCHEMA_VERSION: u32 = 1;
const MIN_EVAL_CONDITIONS: usize = 3;
const MIN_LOOCV_CONDITIONS: usize = 4;

/// Hit fraction of a group on a centered disc of diameter `w`. A trial's
/// `success` flag takes precedence over its endpoint when present.
pub fn observed_sr<'a>(group: impl IntoIterator<Item = &'a TrialRecord>, w: f64) -> f64 {
    let r2 = 0.25 * w * w;
    let (mut hits, mut n) = (0usize, 0usize);
    for t in group {
        n += 1;
        if t.success.unwrap_or(t.x * t.x + t.y * t.y <= r2) {
            hits += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedCondition {
    pub w: f64,
    pub a: f64,
    pub observed_sr: f64,
}

impl From<&ConditionStats> for ObservedCondition {
    fn from(c: &ConditionStats) -> Self {
        Self { w: c.w, a: c.a, observed_sr: c.observed_sr }
    }
}

/// Screened per-condition observed success rates.
pub fn observed_conditions(trials: &[TrialRecord]) -> Result<Vec<ObservedCondition>, FitError> {
    Ok(prepare(trials, KsOptions::default())?.conditions.iter().map(Into::into).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionResult {
    pub w: f64,
    pub a: f64,
    pub observed_sr: f64,
    pub estimated_sr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationMetrics {
    pub variant: ModelVariant,
    pub conditions: usize,
    /// Percentage points.
    pub mae: f64,
    pub r_squared: f64,
    /// Absent when the residuals are exactly zero.
    pub aic: Option<f64>,
    pub rss: f64,
    pub loocv_mae: Option<f64>,
    pub loocv_r_squared: Option<f64>,
    pub per_condition: Vec<ConditionResult>,
}

#[derive(Serialize)]
struct ValidationDocument<'a> {
    raysr_validation: u32,
    #[serde(flatten)]
    metrics: &'a ValidationMetrics,
}

impl ValidationMetrics {
    pub fn to_json(&self) -> String {
        let doc = ValidationDocument { raysr_validation: VALIDATION_SCHEMA_VERSION, metrics: self };
        let mut s = serde_json::to_string_pretty(&doc).expect("metrics serialize");
        s.push('\n');
        s
    }
}

fn estimate(spec: &ModelSpec, w: f64, a: f64) -> Result<f64, FitError> {
    let opts = EvalOptions { amplitude: Some(a), offset: OffsetMode::Model };
    evaluate_disc(spec, w, &opts).map(|e| e.success_rate.value).map_err(|e| FitError::Integration(e.to_string()))
}

struct Scores {
    mae: f64,
    r_squared: f64,
    rss: f64,
}

fn scores(rows: &[ConditionResult]) -> Scores {
    let n = rows.len() as f64;
    let mae = rows.iter().map(|r| (r.observed_sr - r.estimated_sr).abs()).sum::<f64>() / n * 100.0;
    let mean = rows.iter().map(|r| r.observed_sr).sum::<f64>() / n;
    let tss: f64 = rows.iter().map(|r| (r.observed_sr - mean).powi(2)).sum();
    let rss: f64 = rows.iter().map(|r| (r.observed_sr - r.estimated_sr).powi(2)).sum();
    let r_squared = if tss > 0.0 {
        1.0 - rss / tss
    } else if rss == 0.0 {
        1.0
    } else {
        0.0
    };
    Scores { mae, r_squared, rss }
}

/// Gaussian least-squares AIC over success-rate residuals.
pub fn aic(rss: f64, n: usize, k: usize) -> Option<f64> {
    (rss > 0.0).then(|| n as f64 * (rss / n as f64).ln() + 2.0 * k as f64)
}

/// Training metrics of `spec` against per-condition observed rates. The
/// LOOCV fields are left empty; see [`validate`].
pub fn evaluate(spec: &ModelSpec, conditions: &[ObservedCondition]) -> Result<ValidationMetrics, FitError> {
    if conditions.len() < MIN_EVAL_CONDITIONS {
        return Err(FitError::InsufficientConditions { needed: MIN_EVAL_CONDITIONS, got: conditions.len() });
    }
    let per_condition = conditions
        .iter()
        .map(|c| {
            Ok(ConditionResult { w: c.w, a: c.a, observed_sr: c.observed_sr, estimated_sr: estimate(spec, c.w, c.a)? })
        })
        .collect::<Result<Vec<_>, FitError>>()?;
    let s = scores(&per_condition);
    Ok(ValidationMetrics {
        variant: spec.variant(),
        conditions: per_condition.len(),
        mae: s.mae,
        r_squared: s.r_squared,
        aic: aic(s.rss, per_condition.len(), spec.variant().parameter_count()),
        rss: s.rss,
        loocv_mae: None,
        loocv_r_squared: None,
        per_condition,
    })
}

pub type LoocvFold = ConditionResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoocvMetrics {
    pub mae: f64,
    pub r_squared: f64,
    pub folds: Vec<LoocvFold>,
}

fn loocv_conditions(
    conditions: &[ConditionStats],
    variant: ModelVariant,
    validity: ValidityRange,
) -> Result<LoocvMetrics, FitError> {
    if conditions.len() < MIN_LOOCV_CONDITIONS {
        return Err(FitError::InsufficientConditions { needed: MIN_LOOCV_CONDITIONS, got: conditions.len() });
    }
    let mut folds = Vec::with_capacity(conditions.len());
    for (i, held) in conditions.iter().enumerate() {
        let fold_err = |e: FitError| FitError::Fold { w: held.w, a: held.a, reason: e.to_string() };
        let rest: Vec<ConditionStats> =
            conditions.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, c)| c.clone()).collect();
        let (spec, _) = fit_conditions(&rest, variant, validity).map_err(fold_err)?;
        let estimated_sr = estimate(&spec, held.w, held.a).map_err(fold_err)?;
        folds.push(ConditionResult { w: held.w, a: held.a, observed_sr: held.observed_sr, estimated_sr });
    }
    let s = scores(&folds);
    Ok(LoocvMetrics { mae: s.mae, r_squared: s.r_squared, folds })
}

/// Leave-one-condition-out cross-validation: each `(W, A)` condition is
/// predicted by a model refit on the other conditions' aggregated stats.
pub fn loocv(trials: &[TrialRecord], variant: ModelVariant) -> Result<LoocvMetrics, FitError> {
    let prepared = prepare(trials, KsOptions::default())?;
    loocv_conditions(&prepared.conditions, variant, ValidityRange::DEFAULT)
}

/// Training metrics of `spec` on `trials`, plus LOOCV of the same variant.
pub fn validate(spec: &ModelSpec, trials: &[TrialRecord]) -> Result<ValidationMetrics, FitError> {
    let prepared = prepare(trials, KsOptions::default())?;
    let observed: Vec<ObservedCondition> = prepared.conditions.iter().map(Into::into).collect();
    let mut metrics = evaluate(spec, &observed)?;
    let cv = loocv_conditions(&prepared.conditions, spec.variant(), spec.validity_range())?;
    metrics.loocv_mae = Some(cv.mae);
    metrics.loocv_r_squared = Some(cv.r_squared);
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::sr_circle;
    use crate::model::DistributionParams;
    use crate::synth::SyntheticDesign;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn trial(x: f64, y: f64) -> TrialRecord {
        TrialRecord { participant: "P".into(), w: 1.0, a: 30.0, x, y, movement_time: 800.0, success: None }
    }

    fn grid_conditions() -> Vec<(f64, f64)> {
        (0..8).flat_map(|i| [30.0, 35.0, 40.0].map(|a| (1.0 + 0.5 * i as f64, a))).collect()
    }

    fn model_conditions(spec: &ModelSpec, bias: f64) -> Vec<ObservedCondition> {
        grid_conditions()
            .into_iter()
            .map(|(w, a)| ObservedCondition { w, a, observed_sr: estimate(spec, w, a).unwrap() + bias })
            .collect()
    }

    #[test]
    fn observed_sr_basics() {
        assert_eq!(observed_sr(&vec![trial(0.0, 0.0); 5], 1.0), 1.0);
        let half = [trial(0.1, 0.0), trial(0.0, -0.2), trial(0.6, 0.0), trial(0.0, 0.51)];
        assert_eq!(observed_sr(&half, 1.0), 0.5);
        let mut flagged = trial(0.0, 0.0);
        flagged.success = Some(false);
        assert_eq!(observed_sr([&flagged], 1.0), 0.0);
    }

    #[test]
    fn observed_sr_matches_binomial_bound() {
        let params = DistributionParams::diagonal(-0.15, 0.3, 0.25);
        let p = sr_circle(&params, 0.8).unwrap().value;
        let n = 4000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let sample: Vec<_> = (0..n)
            .map(|_| {
                let zx: f64 = rng.sample(rand_distr::StandardNormal);
                let zy: f64 = rng.sample(rand_distr::StandardNormal);
                trial(params.mu_x + params.sigma_x * zx, params.sigma_y * zy)
            })
            .collect();
        let got = observed_sr(&sample, 0.8);
        assert!((got - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{got} vs {p}");
    }

    #[test]
    fn perfect_estimates() {
        let spec = ModelSpec::baseline();
        let m = evaluate(&spec, &model_conditions(&spec, 0.0)).unwrap();
        assert_eq!((m.mae, m.r_squared, m.aic), (0.0, 1.0, None));
    }

    #[test]
    fn constant_bias_mae() {
        let spec = ModelSpec::baseline();
        let m = evaluate(&spec, &model_conditions(&spec, 0.02)).unwrap();
        assert_abs_diff_eq!(m.mae, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.rss, 24.0 * 0.02f64.powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(m.aic.unwrap(), 24.0 * (0.0004f64).ln() + 12.0, epsilon = 1e-9);
    }

    #[test]
    fn too_few_conditions() {
        let spec = ModelSpec::baseline();
        let c = &model_conditions(&spec, 0.0)[..2];
        assert!(matches!(evaluate(&spec, c), Err(FitError::InsufficientConditions { needed: 3, got: 2 })));
    }

    #[test]
    fn aic_rescaling_shift() {
        let (n, s) = (24usize, 1.7f64);
        for (rss, k) in [(0.03, 6), (0.05, 4)] {
            let shift = aic(rss * s * s, n, k).unwrap() - aic(rss, n, k).unwrap();
            assert_abs_diff_eq!(shift, n as f64 * (s * s).ln(), epsilon = 1e-9);
        }
    }

    #[test]
    fn loocv_on_noise_free_conditions_is_exact() {
        let spec = ModelSpec::baseline();
        let k = spec.constants();
        let conditions: Vec<ConditionStats> = grid_conditions()
            .into_iter()
            .map(|(w, a)| ConditionStats {
                w,
                a,
                mu_x: k.e * w + k.f,
                sigma_x: k.a * w + k.b,
                mu_y: 0.0,
                sigma_y: k.c * w + k.d,
                rho: 0.0,
                cells: 1,
                trials: 20,
                observed_sr: estimate(&spec, w, a).unwrap(),
            })
            .collect();
        let cv = loocv_conditions(&conditions, ModelVariant::Baseline, ValidityRange::DEFAULT).unwrap();
        assert!(cv.mae < 1e-9, "{}", cv.mae);
        assert_eq!(cv.folds.len(), 24);
    }

    #[test]
    fn validate_on_synthetic_data() {
        let data = SyntheticDesign::full_size(2).generate();
        let m = validate(&ModelSpec::baseline(), &data.trials).unwrap();
        assert!(m.mae <= 3.5, "{}", m.mae);
        let cv = m.loocv_mae.unwrap();
        assert!(cv.is_finite() && cv > 0.0);
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["raysr_validation"], 1);
        assert_eq!(v["per_condition"].as_array().unwrap().len(), 24);
    }

    proptest! {
        #[test]
        fn evaluate_is_permutation_invariant(seed in any::<u64>(), noise in 0.001f64..0.05) {
            let spec = ModelSpec::baseline();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut c = model_conditions(&spec, 0.0);
            for o in &mut c {
                o.observed_sr = (o.observed_sr + rng.random_range(-noise..noise)).clamp(0.0, 1.0);
            }
            let base = evaluate(&spec, &c).unwrap();
            let mut shuffled = c.clone();
            shuffled.reverse();
            shuffled.rotate_left((seed % 24) as usize);
            let other = evaluate(&spec, &shuffled).unwrap();
            prop_assert!((base.mae - other.mae).abs() < 1e-12);
            prop_assert!((base.r_squared - other.r_squared).abs() < 1e-12);
            prop_assert!(base.mae >= 0.0);
        }
    }
}

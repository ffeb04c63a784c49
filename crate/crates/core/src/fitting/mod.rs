//! Model fitting from raw endpoint trials.
//!
//! Pipeline: 3SD screening per participant and condition, per-cell maximum
//! likelihood Gaussian estimates with KS normality checks, averaging of the
//! cell estimates per `(W, A)` condition, and linear regressions of
//! `sigma_x`, `sigma_y` and `mu_x` on `W` (plus `A` for `with_amplitude`).

mod normality;
mod regression;
mod screen;
mod trials;
mod validation;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    AmplitudeConstants, ModelConstants, ModelDocument, ModelError, ModelSpec, ModelVariant, ValidityRange,
};

pub use normality::{kolmogorov_sf, ks_normality, KsOptions, KsResult, KS_ALPHA, KS_MIN_SAMPLES};
pub use regression::{fit_linear, fit_plane, LinearFit, PlaneFit};
pub use screen::{screen_outliers, Screening, SCREEN_SD};
pub use trials::{read_trials, write_trials, TrialRecord};
pub use validation::{
    evaluate, loocv, observed_conditions, observed_sr, validate, ConditionResult, LoocvFold, LoocvMetrics,
    ObservedCondition, ValidationMetrics,
};

pub const FIT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("all regressor values are identical")]
    IdenticalRegressor,
    #[error("regression failed: {0}")]
    Regression(String),
    #[error("need at least {needed} distinct W levels, got {got}")]
    InsufficientWidths { needed: usize, got: usize },
    #[error("need at least {needed} conditions, got {got}")]
    InsufficientConditions { needed: usize, got: usize },
    #[error("need at least two distinct A levels to fit amplitude terms")]
    InsufficientAmplitudes,
    #[error("screening left condition W={w} A={a} without usable cells")]
    ConditionRemoved { w: f64, a: f64 },
    #[error("no trials")]
    Empty,
    #[error("trial data: {0}")]
    Csv(String),
    #[error("leave-out fold W={w} A={a} failed: {reason}")]
    Fold { w: f64, a: f64, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("success-rate evaluation failed: {0}")]
    Integration(String),
}

/// Total-order wrapper for grouping by floating-point levels.
#[derive(Debug, Clone, Copy)]
struct Level(f64);

impl PartialEq for Level {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}

impl Eq for Level {}

impl PartialOrd for Level {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Level {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct ConditionKey {
    w: Level,
    a: Level,
}

impl ConditionKey {
    fn of(t: &TrialRecord) -> Self {
        Self { w: Level(t.w), a: Level(t.a) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct CellKey {
    condition: ConditionKey,
    participant: String,
}

impl CellKey {
    fn of(t: &TrialRecord) -> Self {
        Self { condition: ConditionKey::of(t), participant: t.participant.clone() }
    }
}

/// Maximum-likelihood Gaussian estimates for one participant and condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStats {
    pub participant: String,
    pub w: f64,
    pub a: f64,
    pub mu_x: f64,
    pub sigma_x: f64,
    pub mu_y: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub n: usize,
    /// An axis had zero spread; `rho` is reported as 0.
    pub degenerate: bool,
}

/// Means, MLE (divide-by-n) standard deviations and the Pearson correlation
/// of a group's endpoints. Identity fields come from the first trial.
pub fn mle_cell_stats(group: &[TrialRecord]) -> Result<CellStats, FitError> {
    if group.len() < 2 {
        return Err(FitError::TooFewSamples { needed: 2, got: group.len() });
    }
    let n = group.len() as f64;
    let mu_x = group.iter().map(|t| t.x).sum::<f64>() / n;
    let mu_y = group.iter().map(|t| t.y).sum::<f64>() / n;
    let sxx = group.iter().map(|t| (t.x - mu_x).powi(2)).sum::<f64>();
    let syy = group.iter().map(|t| (t.y - mu_y).powi(2)).sum::<f64>();
    let sxy = group.iter().map(|t| (t.x - mu_x) * (t.y - mu_y)).sum::<f64>();
    let degenerate = !(sxx > 0.0 && syy > 0.0);
    let rho = if degenerate { 0.0 } else { (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0) };
    let first = &group[0];
    Ok(CellStats {
        participant: first.participant.clone(),
        w: first.w,
        a: first.a,
        mu_x,
        sigma_x: (sxx / n).sqrt(),
        mu_y,
        sigma_y: (syy / n).sqrt(),
        rho,
        n: group.len(),
        degenerate,
    })
}

/// Cell estimates averaged across participants, with the pooled observed
/// success rate of the condition's kept trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionStats {
    pub w: f64,
    pub a: f64,
    pub mu_x: f64,
    pub sigma_x: f64,
    pub mu_y: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub cells: usize,
    pub trials: usize,
    pub observed_sr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellNormality {
    pub participant: String,
    pub w: f64,
    pub a: f64,
    pub x: Option<KsResult>,
    pub y: Option<KsResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct NormalitySummary {
    pub cells_tested: usize,
    pub x_pass: usize,
    pub y_pass: usize,
}

/// Screened and aggregated trial data, shared by fitting and validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub screening: Screening,
    pub cells: Vec<CellStats>,
    pub conditions: Vec<ConditionStats>,
    pub normality: Vec<CellNormality>,
}

pub fn prepare(trials: &[TrialRecord], ks: KsOptions) -> Result<Prepared, FitError> {
    if trials.is_empty() {
        return Err(FitError::Empty);
    }
    let all_conditions: Vec<ConditionKey> = {
        let mut keys: Vec<_> = trials.iter().map(ConditionKey::of).collect();
        keys.sort();
        keys.dedup();
        keys
    };
    let screening = screen_outliers(trials);

    let mut by_cell: BTreeMap<CellKey, Vec<TrialRecord>> = BTreeMap::new();
    for t in &screening.kept {
        by_cell.entry(CellKey::of(t)).or_default().push(t.clone());
    }

    let mut cells = Vec::new();
    let mut normality = Vec::new();
    let mut by_condition: BTreeMap<ConditionKey, (Vec<CellStats>, Vec<&TrialRecord>)> = BTreeMap::new();
    for (key, group) in &by_cell {
        let entry = by_condition.entry(key.condition.clone()).or_default();
        entry.1.extend(group.iter());
        let Ok(stats) = mle_cell_stats(group) else { continue };
        let xs: Vec<f64> = group.iter().map(|t| t.x).collect();
        let ys: Vec<f64> = group.iter().map(|t| t.y).collect();
        normality.push(CellNormality {
            participant: key.participant.clone(),
            w: key.condition.w.0,
            a: key.condition.a.0,
            x: ks_normality(&xs, ks).ok(),
            y: ks_normality(&ys, ks).ok(),
        });
        entry.0.push(stats.clone());
        cells.push(stats);
    }

    let mut conditions = Vec::with_capacity(all_conditions.len());
    for key in all_conditions {
        let (w, a) = (key.w.0, key.a.0);
        let Some((stats, kept)) = by_condition.get(&key).filter(|(s, _)| !s.is_empty()) else {
            return Err(FitError::ConditionRemoved { w, a });
        };
        let m = stats.len() as f64;
        let avg = |f: fn(&CellStats) -> f64| stats.iter().map(f).sum::<f64>() / m;
        conditions.push(ConditionStats {
            w,
            a,
            mu_x: avg(|c| c.mu_x),
            sigma_x: avg(|c| c.sigma_x),
            mu_y: avg(|c| c.mu_y),
            sigma_y: avg(|c| c.sigma_y),
            rho: avg(|c| c.rho),
            cells: stats.len(),
            trials: kept.len(),
            observed_sr: observed_sr(kept.iter().copied(), w),
        });
    }
    Ok(Prepared { screening, cells, conditions, normality })
}

/// One parameter's regression on W (and A under `with_amplitude`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionSummary {
    pub slope: f64,
    pub intercept: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude_slope: Option<f64>,
    pub r_squared: f64,
}

impl From<LinearFit> for RegressionSummary {
    fn from(f: LinearFit) -> Self {
        Self { slope: f.slope, intercept: f.intercept, amplitude_slope: None, r_squared: f.r_squared }
    }
}

impl From<PlaneFit> for RegressionSummary {
    fn from(f: PlaneFit) -> Self {
        Self { slope: f.w_slope, intercept: f.intercept, amplitude_slope: Some(f.a_slope), r_squared: f.r_squared }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regressions {
    pub sigma_x: RegressionSummary,
    pub sigma_y: RegressionSummary,
    /// Absent under `zero_offset`, where the offset is fixed at zero.
    pub mu_x: Option<RegressionSummary>,
}

pub const MIN_WIDTH_LEVELS: usize = 3;

/// Regresses condition-level parameters into a model of the given variant.
pub fn fit_conditions(
    conditions: &[ConditionStats],
    variant: ModelVariant,
    validity_range: ValidityRange,
) -> Result<(ModelSpec, Regressions), FitError> {
    let mut widths: Vec<f64> = conditions.iter().map(|c| c.w).collect();
    widths.sort_by(f64::total_cmp);
    widths.dedup();
    if widths.len() < MIN_WIDTH_LEVELS {
        return Err(FitError::InsufficientWidths { needed: MIN_WIDTH_LEVELS, got: widths.len() });
    }

    let (constants, amplitude, regressions) = if variant == ModelVariant::WithAmplitude {
        let plane = |f: fn(&ConditionStats) -> f64| {
            let pts: Vec<_> = conditions.iter().map(|c| (c.w, c.a, f(c))).collect();
            fit_plane(&pts).map_err(|e| match e {
                FitError::IdenticalRegressor => FitError::InsufficientAmplitudes,
                e => e,
            })
        };
        let (sx, sy, mx) = (plane(|c| c.sigma_x)?, plane(|c| c.sigma_y)?, plane(|c| c.mu_x)?);
        (
            ModelConstants {
                a: sx.w_slope,
                b: sx.intercept,
                c: sy.w_slope,
                d: sy.intercept,
                e: mx.w_slope,
                f: mx.intercept,
            },
            Some(AmplitudeConstants { sigma_x: sx.a_slope, sigma_y: sy.a_slope, mu_x: mx.a_slope }),
            Regressions { sigma_x: sx.into(), sigma_y: sy.into(), mu_x: Some(mx.into()) },
        )
    } else {
        let line = |f: fn(&ConditionStats) -> f64| {
            let pts: Vec<_> = conditions.iter().map(|c| (c.w, f(c))).collect();
            fit_linear(&pts)
        };
        let (sx, sy) = (line(|c| c.sigma_x)?, line(|c| c.sigma_y)?);
        let mx = if variant.uses_offset() { Some(line(|c| c.mu_x)?) } else { None };
        let (e, f) = mx.map_or((0.0, 0.0), |m| (m.slope, m.intercept));
        (
            ModelConstants { a: sx.slope, b: sx.intercept, c: sy.slope, d: sy.intercept, e, f },
            None,
            Regressions { sigma_x: sx.into(), sigma_y: sy.into(), mu_x: mx.map(Into::into) },
        )
    };
    let spec = ModelSpec::new(variant, constants, amplitude, validity_range)?;
    Ok((spec, regressions))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub regressions: Regressions,
    pub trials_total: usize,
    pub screened_out: usize,
    pub normality_summary: NormalitySummary,
    pub normality_reports: Vec<CellNormality>,
    pub conditions: Vec<ConditionStats>,
}

pub fn fit_model(trials: &[TrialRecord], variant: ModelVariant) -> Result<FitResult, FitError> {
    fit_model_with(trials, variant, KsOptions::default())
}

pub fn fit_model_with(trials: &[TrialRecord], variant: ModelVariant, ks: KsOptions) -> Result<FitResult, FitError> {
    let prepared = prepare(trials, ks)?;
    let (spec, regressions) = fit_conditions(&prepared.conditions, variant, ValidityRange::DEFAULT)?;
    let mut summary = NormalitySummary::default();
    for c in &prepared.normality {
        if c.x.is_some() || c.y.is_some() {
            summary.cells_tested += 1;
        }
        summary.x_pass += usize::from(c.x.is_some_and(|r| r.pass));
        summary.y_pass += usize::from(c.y.is_some_and(|r| r.pass));
    }
    Ok(FitResult {
        spec,
        regressions,
        trials_total: trials.len(),
        screened_out: prepared.screening.removed.len(),
        normality_summary: summary,
        normality_reports: prepared.normality,
        conditions: prepared.conditions,
    })
}

#[derive(Serialize)]
struct FitDocument<'a> {
    raysr_fit: u32,
    model: ModelDocument,
    regressions: &'a Regressions,
    trials_total: usize,
    screened_out: usize,
    normality: NormalityDocument<'a>,
    conditions: &'a [ConditionStats],
}

#[derive(Serialize)]
struct NormalityDocument<'a> {
    alpha: f64,
    #[serde(flatten)]
    summary: NormalitySummary,
    cells: &'a [CellNormality],
}

impl FitResult {
    pub fn to_json(&self) -> String {
        let doc = FitDocument {
            raysr_fit: FIT_SCHEMA_VERSION,
            model: self.spec.to_document(),
            regressions: &self.regressions,
            trials_total: self.trials_total,
            screened_out: self.screened_out,
            normality: NormalityDocument {
                alpha: KS_ALPHA,
                summary: self.normality_summary,
                cells: &self.normality_reports,
            },
            conditions: &self.conditions,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("fit result serializes");
        s.push('\n');
        s
    }
}

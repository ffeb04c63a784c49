use serde::Serialize;
use thiserror::Error;

use super::{FrameOption, Scene, SceneError, SceneTarget};
use crate::geometry::{
    angular_extent_rect, angular_width_sphere, movement_frame, rect_view_angle, AngularExtent, FrameSpec,
    GeometryError, TargetShape,
};
use crate::integrator::{
    evaluate_disc, evaluate_rect, evaluate_shape, EvalOptions, IntegrationError, ShapeKind, SuccessRate,
};
use crate::model::{DistributionParams, ModelSpec, ModelVariant, OffsetMode, Warning};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub raysr_report: u32,
    pub variant: ModelVariant,
    pub offset_enabled: bool,
    pub targets: Vec<TargetEstimate>,
}

impl EstimateReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetEstimate {
    pub id: String,
    #[serde(flatten)]
    pub outcome: TargetOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TargetOutcome {
    Ok {
        shape: ShapeKind,
        extent: AngularExtent,
        #[serde(skip_serializing_if = "Option::is_none")]
        amplitude_deg: Option<f64>,
        params: DistributionParams,
        success_rate: SuccessRate,
        warnings: Vec<Warning>,
    },
    Error {
        error: String,
    },
}

#[derive(Debug, Error)]
enum TargetError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

fn estimate_target(scene: &Scene, spec: &ModelSpec, target: &SceneTarget) -> Result<TargetOutcome, TargetError> {
    let camera = &scene.camera;
    let amplitude = scene.amplitude_for(target);
    let opts = EvalOptions {
        amplitude: if spec.variant() == ModelVariant::WithAmplitude { amplitude } else { None },
        offset: if scene.options.offset_enabled { OffsetMode::Model } else { OffsetMode::Zero },
    };
    let (shape, extent, evaluation, view_angle) = match &target.shape {
        TargetShape::Sphere(sphere) => {
            let w = angular_width_sphere(camera, sphere)?;
            let extent = AngularExtent { w_x: w, w_y: w, grazing: false };
            (ShapeKind::Disc, extent, evaluate_disc(spec, w, &opts)?, None)
        }
        TargetShape::Rect(rect) => {
            let frame = match (scene.options.frame, target.start) {
                (FrameOption::Movement, Some(start)) => {
                    FrameSpec::Movement(movement_frame(camera, &start, &rect.center)?)
                }
                _ => FrameSpec::World,
            };
            let extent = angular_extent_rect(camera, rect, &frame)?;
            let evaluation = evaluate_rect(spec, extent.w_x, extent.w_y, &opts)?;
            (ShapeKind::Square, extent, evaluation, Some(rect_view_angle(camera, rect)))
        }
    };
    let mut warnings = evaluation.prediction.warnings;
    if extent.grazing {
        warnings.push(Warning::Grazing { view_angle_deg: view_angle.unwrap_or(0.0) });
    }
    Ok(TargetOutcome::Ok {
        shape,
        extent,
        amplitude_deg: opts.amplitude,
        params: evaluation.prediction.params,
        success_rate: evaluation.success_rate,
        warnings,
    })
}

/// Success-rate report for every target in the scene. Per-target failures
/// (a target behind the camera, say) become error entries.
pub fn estimate_scene(scene: &Scene, spec: &ModelSpec) -> Result<EstimateReport, SceneError> {
    if spec.variant() != scene.options.variant {
        return Err(SceneError::VariantMismatch { scene: scene.options.variant, model: spec.variant() });
    }
    let targets = scene
        .targets
        .iter()
        .map(|t| TargetEstimate {
            id: t.id.clone(),
            outcome: estimate_target(scene, spec, t).unwrap_or_else(|e| TargetOutcome::Error { error: e.to_string() }),
        })
        .collect();
    Ok(EstimateReport {
        raysr_report: REPORT_SCHEMA_VERSION,
        variant: spec.variant(),
        offset_enabled: scene.options.offset_enabled,
        targets,
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("empty range: from {from} is greater than to {to}")]
    EmptyRange { from: f64, to: f64 },
    #[error("step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("widths must be positive, got from {0}")]
    NonPositiveStart(f64),
    #[error("sweep at w={w}: {source}")]
    Integration { w: f64, source: IntegrationError },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub w_deg: f64,
    pub params: DistributionParams,
    pub success_rate: SuccessRate,
    pub warnings: Vec<Warning>,
}

/// Success rate on the grid `from, from + step, ..` up to `to`.
pub fn sweep(
    spec: &ModelSpec,
    kind: ShapeKind,
    from: f64,
    to: f64,
    step: f64,
    opts: &EvalOptions,
) -> Result<Vec<SweepRow>, SweepError> {
    if !(from.is_finite() && to.is_finite()) || from > to {
        return Err(SweepError::EmptyRange { from, to });
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(SweepError::NonPositiveStep(step));
    }
    if !(from > 0.0) {
        return Err(SweepError::NonPositiveStart(from));
    }
    // tolerate the rounding in e.g. (4.5 - 1.0) / 0.5
    let count = ((to - from) / step * (1.0 + 1e-12) + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|i| {
            // snap to a 1e-9 degree lattice so 0.95 + 12 * 0.01 prints as 1.07
            let w = ((from + step * i as f64) * 1e9).round() / 1e9;
            let e = evaluate_shape(spec, kind, w, opts).map_err(|source| SweepError::Integration { w, source })?;
            Ok(SweepRow {
                w_deg: w,
                params: e.prediction.params,
                success_rate: e.success_rate,
                warnings: e.prediction.warnings,
            })
        })
        .collect()
}

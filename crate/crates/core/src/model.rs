//! Endpoint-distribution model.
//!
//! Endpoints are modeled as a bivariate Gaussian in angular coordinates
//! whose standard deviations and movement-axis offset grow linearly with the
//! target's angular width `W`:
//!
//! ```text
//! sigma_x = a*W + b      sigma_y = c*W + d      mu_x = e*W + f      mu_y = 0
//! ```
//!
//! Everything here is in degrees.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Schema version written to and required from `model.json` documents.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("angular width must be positive and finite, got {0}")]
    NonPositiveWidth(f64),
    #[error("variant with_amplitude needs a positive movement amplitude")]
    MissingAmplitude,
    #[error("movement amplitude must be positive and finite, got {0}")]
    NonPositiveAmplitude(f64),
    #[error("model yields non-positive {axis} standard deviation {value} at W={w}")]
    NonPositiveSigma { axis: &'static str, w: f64, value: f64 },
    #[error("amplitude constants are required by with_amplitude and only allowed there")]
    AmplitudeConstantsMismatch,
    #[error("invalid validity range [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("unsupported model schema version {0}")]
    UnsupportedVersion(u32),
    #[error("model document: {0}")]
    Document(String),
}

/// Regression coefficients mapping angular width to distribution parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConstants {
    /// Slope of `sigma_x` in W.
    pub a: f64,
    /// Intercept of `sigma_x` (deg).
    pub b: f64,
    /// Slope of `sigma_y` in W.
    pub c: f64,
    /// Intercept of `sigma_y` (deg).
    pub d: f64,
    /// Slope of `mu_x` in W.
    pub e: f64,
    /// Intercept of `mu_x` (deg).
    pub f: f64,
}

impl ModelConstants {
    /// Default constants, regressed from spherical-target selection data.
    pub const BASELINE: ModelConstants =
        ModelConstants { a: 0.1102, b: 0.23130, c: 0.0715, d: 0.2311, e: -0.0623, f: -0.0846 };
}

impl Default for ModelConstants {
    fn default() -> Self {
        Self::BASELINE
    }
}

/// Additive per-axis slopes on the movement amplitude `A` (deg per deg).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeConstants {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub mu_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// Width-only model with the movement-axis offset.
    Baseline,
    /// Baseline plus additive linear amplitude terms on every parameter.
    WithAmplitude,
    /// Baseline covariance with `mu_x` pinned to zero.
    ZeroOffset,
    /// Baseline form fed with world-frame angular geometry.
    WorldCoordinate,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] =
        [ModelVariant::Baseline, ModelVariant::WithAmplitude, ModelVariant::ZeroOffset, ModelVariant::WorldCoordinate];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Baseline => "baseline",
            ModelVariant::WithAmplitude => "with_amplitude",
            ModelVariant::ZeroOffset => "zero_offset",
            ModelVariant::WorldCoordinate => "world_coordinate",
        }
    }

    /// Number of fitted constants, used as `k` in AIC.
    pub fn parameter_count(self) -> usize {
        match self {
            ModelVariant::Baseline | ModelVariant::WorldCoordinate => 6,
            ModelVariant::ZeroOffset => 4,
            ModelVariant::WithAmplitude => 9,
        }
    }

    pub fn uses_offset(self) -> bool {
        self != ModelVariant::ZeroOffset
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelVariant::ALL.into_iter().find(|v| v.as_str() == s).ok_or_else(|| format!("unknown variant `{s}`"))
    }
}

/// Closed interval of angular widths the constants are trusted on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct ValidityRange {
    pub min_deg: f64,
    pub max_deg: f64,
}

impl ValidityRange {
    pub const DEFAULT: ValidityRange = ValidityRange { min_deg: 0.5, max_deg: 10.0 };

    pub fn new(min_deg: f64, max_deg: f64) -> Result<Self, ModelError> {
        if !(min_deg.is_finite() && max_deg.is_finite() && min_deg >= 0.0 && min_deg < max_deg) {
            return Err(ModelError::InvalidRange(min_deg, max_deg));
        }
        Ok(Self { min_deg, max_deg })
    }

    pub fn contains(&self, w: f64) -> bool {
        w >= self.min_deg && w <= self.max_deg
    }
}

impl Default for ValidityRange {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<[f64; 2]> for ValidityRange {
    type Error = ModelError;

    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        ValidityRange::new(v[0], v[1])
    }
}

impl From<ValidityRange> for [f64; 2] {
    fn from(r: ValidityRange) -> Self {
        [r.min_deg, r.max_deg]
    }
}

/// Predicted endpoint distribution in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionParams {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
}

impl DistributionParams {
    /// Uncorrelated parameters; panics in debug builds on non-positive sigmas.
    pub fn diagonal(mu_x: f64, sigma_x: f64, sigma_y: f64) -> Self {
        debug_assert!(sigma_x > 0.0 && sigma_y > 0.0);
        Self { mu_x, mu_y: 0.0, sigma_x, sigma_y, rho: 0.0 }
    }

    pub fn is_valid(&self) -> bool {
        self.sigma_x > 0.0
            && self.sigma_y > 0.0
            && self.rho > -1.0
            && self.rho < 1.0
            && self.mu_x.is_finite()
            && self.mu_y.is_finite()
            && self.sigma_x.is_finite()
            && self.sigma_y.is_finite()
    }
}

/// Non-fatal conditions attached to predictions and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// A width fell outside the model's validity range.
    OutOfRange { w_deg: f64, min_deg: f64, max_deg: f64 },
    /// A flat target is viewed at a steep angle to its normal.
    Grazing { view_angle_deg: f64 },
}

/// Distribution parameters plus any warnings raised while computing them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub params: DistributionParams,
    pub warnings: Vec<Warning>,
}

/// How the movement-axis offset is applied at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffsetMode {
    /// Use the variant's own rule.
    #[default]
    Model,
    /// Force `mu_x = 0` without touching the constants.
    Zero,
}

/// A complete, validated model description.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    variant: ModelVariant,
    constants: ModelConstants,
    amplitude_constants: Option<AmplitudeConstants>,
    validity_range: ValidityRange,
}

impl ModelSpec {
    pub fn new(
        variant: ModelVariant,
        constants: ModelConstants,
        amplitude_constants: Option<AmplitudeConstants>,
        validity_range: ValidityRange,
    ) -> Result<Self, ModelError> {
        if amplitude_constants.is_some() != (variant == ModelVariant::WithAmplitude) {
            return Err(ModelError::AmplitudeConstantsMismatch);
        }
        let spec = Self { variant, constants, amplitude_constants, validity_range };
        // Linear terms: positivity at both ends covers the whole range.
        if variant != ModelVariant::WithAmplitude {
            for w in [validity_range.min_deg, validity_range.max_deg] {
                spec.sigmas(w, w, 0.0)?;
            }
        }
        Ok(spec)
    }

    /// Shipped preset for a variant. `with_amplitude` ships no
    /// amplitude constants and therefore no preset.
    pub fn preset(variant: ModelVariant) -> Option<Self> {
        match variant {
            ModelVariant::WithAmplitude => None,
            v => Some(Self {
                variant: v,
                constants: ModelConstants::BASELINE,
                amplitude_constants: None,
                validity_range: ValidityRange::DEFAULT,
            }),
        }
    }

    pub fn baseline() -> Self {
        Self::preset(ModelVariant::Baseline).expect("baseline preset")
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn constants(&self) -> &ModelConstants {
        &self.constants
    }

    pub fn amplitude_constants(&self) -> Option<&AmplitudeConstants> {
        self.amplitude_constants.as_ref()
    }

    pub fn validity_range(&self) -> ValidityRange {
        self.validity_range
    }

    /// Parameters for a circular or spherical target of angular width `w`.
    pub fn distribution_params(&self, w: f64, amplitude: Option<f64>) -> Result<Prediction, ModelError> {
        self.per_axis_params(w, w, amplitude)
    }

    /// Parameters for a target with independent per-axis widths.
    pub fn per_axis_params(&self, w_x: f64, w_y: f64, amplitude: Option<f64>) -> Result<Prediction, ModelError> {
        self.params_with(w_x, w_y, amplitude, OffsetMode::Model)
    }

    pub fn params_with(
        &self,
        w_x: f64,
        w_y: f64,
        amplitude: Option<f64>,
        offset: OffsetMode,
    ) -> Result<Prediction, ModelError> {
        for w in [w_x, w_y] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(ModelError::NonPositiveWidth(w));
            }
        }
        let amp = match (self.variant, amplitude) {
            (ModelVariant::WithAmplitude, None) => return Err(ModelError::MissingAmplitude),
            (ModelVariant::WithAmplitude, Some(a)) if !(a > 0.0 && a.is_finite()) => {
                return Err(ModelError::NonPositiveAmplitude(a))
            }
            (ModelVariant::WithAmplitude, Some(a)) => a,
            _ => 0.0,
        };

        let (sigma_x, sigma_y) = self.sigmas(w_x, w_y, amp)?;
        let k = &self.constants;
        let mu_x = if self.variant.uses_offset() && offset == OffsetMode::Model {
            let amp_term = self.amplitude_constants.map_or(0.0, |g| g.mu_x * amp);
            k.e * w_x + k.f + amp_term
        } else {
            0.0
        };

        let mut warnings = Vec::new();
        let range = self.validity_range;
        for w in [w_x, w_y] {
            if !range.contains(w)
                && !warnings.iter().any(|x| matches!(x, Warning::OutOfRange { w_deg, .. } if *w_deg == w))
            {
                warnings.push(Warning::OutOfRange { w_deg: w, min_deg: range.min_deg, max_deg: range.max_deg });
            }
        }

        Ok(Prediction { params: DistributionParams::diagonal(mu_x, sigma_x, sigma_y), warnings })
    }

    fn sigmas(&self, w_x: f64, w_y: f64, amp: f64) -> Result<(f64, f64), ModelError> {
        let k = &self.constants;
        let (gx, gy) = self.amplitude_constants.map_or((0.0, 0.0), |g| (g.sigma_x, g.sigma_y));
        let sigma_x = k.a * w_x + k.b + gx * amp;
        let sigma_y = k.c * w_y + k.d + gy * amp;
        if !(sigma_x > 0.0) {
            return Err(ModelError::NonPositiveSigma { axis: "x", w: w_x, value: sigma_x });
        }
        if !(sigma_y > 0.0) {
            return Err(ModelError::NonPositiveSigma { axis: "y", w: w_y, value: sigma_y });
        }
        Ok((sigma_x, sigma_y))
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            raysr_model: MODEL_SCHEMA_VERSION,
            variant: self.variant,
            constants: self.constants,
            amplitude_constants: self.amplitude_constants,
            validity_range_deg: self.validity_range,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_document()).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ModelDocument = serde_path_to_error::deserialize(de)
            .map_err(|e| ModelError::Document(format!("{}: {}", e.path(), e.inner())))?;
        doc.try_into()
    }
}

/// Wire form of [`ModelSpec`] (`model.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub raysr_model: u32,
    pub variant: ModelVariant,
    pub constants: ModelConstants,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_constants: Option<AmplitudeConstants>,
    #[serde(default)]
    pub validity_range_deg: ValidityRange,
}

impl TryFrom<ModelDocument> for ModelSpec {
    type Error = ModelError;

    fn try_from(doc: ModelDocument) -> Result<Self, Self::Error> {
        if doc.raysr_model != MODEL_SCHEMA_VERSION {
            return Err(ModelError::UnsupportedVersion(doc.raysr_model));
        }
        ModelSpec::new(doc.variant, doc.constants, doc.amplitude_constants, doc.validity_range_deg)
    }
}

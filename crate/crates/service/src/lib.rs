//! Stateless JSON API over the estimation library.
//!
//! * `POST /api/v1/estimate` evaluates one target.
//! * `POST /api/v1/inverse` solves for the width reaching a success rate.
//! * `GET /api/v1/model` describes the loaded models.
//!
//! Malformed bodies get 400 with the offending field path. Inputs outside
//! the validity range and unreachable thresholds get 422.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use tower_http::cors::CorsLayer;

use raysr_core::geometry::{angular_extent_rect, angular_width_sphere, FrameSpec};
use raysr_core::integrator::{evaluate_disc, evaluate_rect, inverse_width, Evaluation};
use raysr_core::model::{ModelDocument, MODEL_SCHEMA_VERSION};
use raysr_core::scene::{REPORT_SCHEMA_VERSION, SCENE_SCHEMA_VERSION};
use raysr_core::{
    AngularExtent, CameraPose, DistributionParams, EvalOptions, InverseError, ModelSpec, ModelVariant, OffsetMode,
    Rect, ShapeKind, Sphere, SuccessRate, Vec3, Warning,
};

pub const API_SCHEMA_VERSION: u32 = 1;

/// Short content hash of a model document, echoed so clients can cache.
pub fn constants_version(spec: &ModelSpec) -> String {
    let digest = Sha256::digest(spec.to_json().as_bytes());
    hex::encode(&digest[..8])
}

#[derive(Debug)]
struct Loaded {
    spec: ModelSpec,
    version: String,
}

/// Immutable models shared by all requests.
#[derive(Debug, Clone)]
pub struct AppState {
    models: Arc<BTreeMap<ModelVariant, Loaded>>,
    default_variant: ModelVariant,
}

impl AppState {
    /// The shipped presets, with `custom` (if any) replacing the preset of
    /// its variant and becoming the default.
    pub fn new(custom: Option<ModelSpec>) -> Self {
        let mut models = BTreeMap::new();
        for v in ModelVariant::ALL {
            if let Some(spec) = ModelSpec::preset(v) {
                models.insert(v, spec);
            }
        }
        let default_variant = custom.as_ref().map_or(ModelVariant::Baseline, |s| s.variant());
        if let Some(spec) = custom {
            models.insert(spec.variant(), spec);
        }
        let models = models
            .into_iter()
            .map(|(v, spec)| {
                let version = constants_version(&spec);
                (v, Loaded { spec, version })
            })
            .collect();
        Self { models: Arc::new(models), default_variant }
    }

    fn resolve(&self, variant: Option<ModelVariant>) -> Result<&Loaded, ApiError> {
        let v = variant.unwrap_or(self.default_variant);
        self.models.get(&v).ok_or_else(|| ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({ "error": format!("no model loaded for variant {v}"), "path": "variant" }),
        })
    }
}

impl Default for AppState {
    fn default() -> Self {
        Self::new(None)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/estimate", post(estimate))
        .route("/api/v1/inverse", post(inverse))
        .route("/api/v1/model", get(model_info))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves the API on `listener` until the task is cancelled.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn bad_request(path: &str, message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, body: json!({ "error": message.into(), "path": path }) }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        ApiError::bad_request(&path, e.into_inner().to_string())
    })
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateRequest {
    pub shape_kind: ShapeKind,
    /// Disc diameter or square side, in degrees.
    #[serde(default)]
    pub w_deg: Option<f64>,
    /// Per-axis extent `[w_x, w_y]` in degrees (square only).
    #[serde(default)]
    pub extent_deg: Option<[f64; 2]>,
    /// Physical size in meters: sphere diameter or square side.
    #[serde(default)]
    pub size_m: Option<f64>,
    #[serde(default)]
    pub distance_m: Option<f64>,
    #[serde(default)]
    pub variant: Option<ModelVariant>,
    #[serde(default = "default_true")]
    pub offset_enabled: bool,
    #[serde(default)]
    pub amplitude_deg: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateResponse {
    pub variant: ModelVariant,
    pub constants_version: String,
    pub extent: AngularExtent,
    pub params: DistributionParams,
    pub success_rate: SuccessRate,
    pub warnings: Vec<Warning>,
}

fn positive(v: f64, path: &str) -> Result<f64, ApiError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ApiError::bad_request(path, format!("must be positive, got {v}")))
    }
}

/// Angular extent of a target `size_m` across, centered `distance_m` ahead.
fn metric_extent(kind: ShapeKind, size: f64, distance: f64) -> Result<AngularExtent, ApiError> {
    let camera = CameraPose::new(Vec3::zeros(), Vec3::z(), Vec3::y()).expect("axis-aligned camera");
    let center = Vec3::new(0.0, 0.0, distance);
    let geometry = |e: raysr_core::GeometryError| ApiError::bad_request("size_m", e.to_string());
    match kind {
        ShapeKind::Disc => {
            let sphere = Sphere::new(center, size).map_err(geometry)?;
            let w = angular_width_sphere(&camera, &sphere).map_err(geometry)?;
            Ok(AngularExtent { w_x: w, w_y: w, grazing: false })
        }
        ShapeKind::Square => {
            let rect = Rect::new(center, -Vec3::z(), Vec3::y(), size, size).map_err(geometry)?;
            angular_extent_rect(&camera, &rect, &FrameSpec::World).map_err(geometry)
        }
    }
}

fn requested_extent(req: &EstimateRequest) -> Result<AngularExtent, ApiError> {
    let square = |w_x, w_y| AngularExtent { w_x, w_y, grazing: false };
    match (req.w_deg, req.extent_deg, req.size_m, req.distance_m) {
        (Some(w), None, None, None) => {
            let w = positive(w, "w_deg")?;
            Ok(square(w, w))
        }
        (None, Some([w_x, w_y]), None, None) => {
            if req.shape_kind != ShapeKind::Square {
                return Err(ApiError::bad_request("extent_deg", "per-axis extent applies to squares only"));
            }
            Ok(square(positive(w_x, "extent_deg[0]")?, positive(w_y, "extent_deg[1]")?))
        }
        (None, None, Some(size), Some(distance)) => {
            let size = positive(size, "size_m")?;
            let distance = positive(distance, "distance_m")?;
            metric_extent(req.shape_kind, size, distance)
        }
        (None, None, Some(_), None) => Err(ApiError::bad_request("distance_m", "required with size_m")),
        (None, None, None, Some(_)) => Err(ApiError::bad_request("size_m", "required with distance_m")),
        _ => Err(ApiError::bad_request("", "give exactly one of w_deg, extent_deg, or size_m with distance_m")),
    }
}

fn eval_options(spec: &ModelSpec, amplitude: Option<f64>, offset_enabled: bool) -> Result<EvalOptions, ApiError> {
    let amplitude = match (spec.variant(), amplitude) {
        (ModelVariant::WithAmplitude, None) => {
            return Err(ApiError::bad_request("amplitude_deg", "required for variant with_amplitude"));
        }
        (_, Some(a)) => Some(positive(a, "amplitude_deg")?),
        (_, None) => None,
    };
    Ok(EvalOptions { amplitude, offset: if offset_enabled { OffsetMode::Model } else { OffsetMode::Zero } })
}

fn unprocessable(message: String, extra: serde_json::Value) -> ApiError {
    let mut body = json!({ "error": message });
    if let (Some(b), Some(e)) = (body.as_object_mut(), extra.as_object()) {
        b.extend(e.clone());
    }
    ApiError { status: StatusCode::UNPROCESSABLE_ENTITY, body }
}

async fn estimate(State(state): State<AppState>, body: Bytes) -> Result<Json<EstimateResponse>, ApiError> {
    let req: EstimateRequest = parse(&body)?;
    let loaded = state.resolve(req.variant)?;
    let extent = requested_extent(&req)?;
    let opts = eval_options(&loaded.spec, req.amplitude_deg, req.offset_enabled)?;
    let evaluated: Result<Evaluation, _> = match req.shape_kind {
        ShapeKind::Disc => evaluate_disc(&loaded.spec, extent.w_x, &opts),
        ShapeKind::Square => evaluate_rect(&loaded.spec, extent.w_x, extent.w_y, &opts),
    };
    let e = evaluated.map_err(|e| unprocessable(e.to_string(), json!({})))?;
    let response = EstimateResponse {
        variant: loaded.spec.variant(),
        constants_version: loaded.version.clone(),
        extent,
        params: e.prediction.params,
        success_rate: e.success_rate,
        warnings: e.prediction.warnings,
    };
    if response.warnings.iter().any(|w| matches!(w, Warning::OutOfRange { .. })) {
        let range = loaded.spec.validity_range();
        return Err(unprocessable(
            format!("width outside the model's validity range [{}, {}] deg", range.min_deg, range.max_deg),
            json!({ "warnings": response.warnings, "result": response }),
        ));
    }
    Ok(Json(response))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseRequest {
    pub shape_kind: ShapeKind,
    pub target_sr: f64,
    /// Search interval in degrees; defaults to the model's validity range.
    #[serde(default)]
    pub range_deg: Option<[f64; 2]>,
    #[serde(default)]
    pub variant: Option<ModelVariant>,
    #[serde(default = "default_true")]
    pub offset_enabled: bool,
    #[serde(default)]
    pub amplitude_deg: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InverseResponse {
    pub variant: ModelVariant,
    pub constants_version: String,
    pub w_for_threshold: f64,
    pub success_rate: f64,
    pub monotone: bool,
}

async fn inverse(State(state): State<AppState>, body: Bytes) -> Result<Json<InverseResponse>, ApiError> {
    let req: InverseRequest = parse(&body)?;
    if !(req.target_sr > 0.0 && req.target_sr < 1.0) {
        return Err(ApiError::bad_request(
            "target_sr",
            format!("must lie strictly between 0 and 1, got {}", req.target_sr),
        ));
    }
    let loaded = state.resolve(req.variant)?;
    let opts = eval_options(&loaded.spec, req.amplitude_deg, req.offset_enabled)?;
    let range = loaded.spec.validity_range();
    let [lo, hi] = req.range_deg.unwrap_or([range.min_deg, range.max_deg]);
    match inverse_width(req.target_sr, &loaded.spec, req.shape_kind, (lo, hi), &opts) {
        Ok(s) => Ok(Json(InverseResponse {
            variant: loaded.spec.variant(),
            constants_version: loaded.version.clone(),
            w_for_threshold: s.w_deg,
            success_rate: s.success_rate,
            monotone: s.monotone,
        })),
        Err(InverseError::InvalidRange(..)) => {
            Err(ApiError::bad_request("range_deg", format!("invalid search range [{lo}, {hi}]")))
        }
        Err(InverseError::InvalidTarget(t)) => Err(ApiError::bad_request("target_sr", format!("invalid target {t}"))),
        Err(e @ InverseError::Unreachable { w_max_deg, sr_at_max, .. }) => {
            Err(unprocessable(e.to_string(), json!({ "w_max_deg": w_max_deg, "sr_at_max": sr_at_max })))
        }
        Err(e) => Err(unprocessable(e.to_string(), json!({}))),
    }
}

#[derive(Debug, Serialize)]
struct ModelEntry {
    constants_version: String,
    #[serde(flatten)]
    document: ModelDocument,
}

async fn model_info(State(state): State<AppState>) -> Json<serde_json::Value> {
    let loaded = &state.models[&state.default_variant];
    let models: Vec<ModelEntry> = state
        .models
        .values()
        .map(|l| ModelEntry { constants_version: l.version.clone(), document: l.spec.to_document() })
        .collect();
    Json(json!({
        "variant": state.default_variant,
        "constants_version": loaded.version,
        "constants": loaded.spec.constants(),
        "amplitude_constants": loaded.spec.amplitude_constants(),
        "validity_range_deg": loaded.spec.validity_range(),
        "variants": ModelVariant::ALL,
        "models": models,
        "schema_versions": {
            "api": API_SCHEMA_VERSION,
            "model": MODEL_SCHEMA_VERSION,
            "scene": SCENE_SCHEMA_VERSION,
            "report": REPORT_SCHEMA_VERSION,
        },
    }))
}

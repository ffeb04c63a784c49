//! Scene documents (`scene.json`) and estimation reports.

mod estimate;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraPose, GeometryError, Rect, Sphere, TargetShape, Vec3};
use crate::model::ModelVariant;

pub use estimate::{
    estimate_scene, sweep, EstimateReport, SweepError, SweepRow, TargetEstimate, TargetOutcome, REPORT_SCHEMA_VERSION,
};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("unsupported raysr_scene version {0}")]
    UnsupportedVersion(u32),
    #[error("{path}: {source}")]
    Geometry { path: String, source: GeometryError },
    #[error("duplicate target id `{0}`")]
    DuplicateId(String),
    #[error("scene has no targets")]
    NoTargets,
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("scene variant {scene} does not match model variant {model}")]
    VariantMismatch { scene: ModelVariant, model: ModelVariant },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::Invalid { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub raysr_scene: u32,
    pub camera: CameraDocument,
    pub targets: Vec<TargetDocument>,
    pub options: SceneOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDocument {
    pub position: [f64; 3],
    pub forward: [f64; 3],
    pub up: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDocument {
    pub id: String,
    pub shape: ShapeDocument,
    /// Movement amplitude towards this target, in degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Where the pointing movement starts (meters); orients the movement
    /// frame for rect targets. Without it, movement is taken as horizontal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeDocument {
    Sphere { center: [f64; 3], diameter_m: f64 },
    Rect { center: [f64; 3], normal: [f64; 3], up: [f64; 3], width_m: f64, height_m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameOption {
    Movement,
    World,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneOptions {
    pub variant: ModelVariant,
    pub offset_enabled: bool,
    pub distance_enabled: bool,
    pub frame: FrameOption,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_amplitude: Option<f64>,
    /// Model document to evaluate with, resolved by the caller relative to
    /// the scene file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneTarget {
    pub id: String,
    pub shape: TargetShape,
    pub amplitude: Option<f64>,
    pub start: Option<Vec3>,
}

/// A validated scene. The source document is kept for [`emit_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub camera: CameraPose,
    pub targets: Vec<SceneTarget>,
    pub options: SceneOptions,
    document: SceneDocument,
}

impl Scene {
    pub fn document(&self) -> &SceneDocument {
        &self.document
    }

    /// Amplitude used for a target: its own, else the scene default.
    pub fn amplitude_for(&self, target: &SceneTarget) -> Option<f64> {
        target.amplitude.or(self.options.default_amplitude)
    }
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

pub fn parse_scene(text: &str) -> Result<Scene, SceneError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: SceneDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SceneError::Schema {
            path: if path == "." { "(root)".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    Scene::try_from(doc)
}

impl TryFrom<SceneDocument> for Scene {
    type Error = SceneError;

    fn try_from(doc: SceneDocument) -> Result<Self, SceneError> {
        if doc.raysr_scene != SCENE_SCHEMA_VERSION {
            return Err(SceneError::UnsupportedVersion(doc.raysr_scene));
        }
        let c = &doc.camera;
        let camera = CameraPose::new(vec3(c.position), vec3(c.forward), vec3(c.up))
            .map_err(|source| SceneError::Geometry { path: "camera".into(), source })?;

        if doc.targets.is_empty() {
            return Err(SceneError::NoTargets);
        }
        let opts = &doc.options;
        if let Some(a) = opts.default_amplitude {
            if !(a > 0.0 && a.is_finite()) {
                return Err(invalid("options.default_amplitude", format!("must be positive, got {a}")));
            }
        }
        if opts.variant == ModelVariant::WithAmplitude && !opts.distance_enabled {
            return Err(invalid("options.distance_enabled", "variant with_amplitude requires distance_enabled"));
        }
        if opts.distance_enabled && opts.variant != ModelVariant::WithAmplitude {
            return Err(invalid("options.variant", "distance_enabled requires variant with_amplitude"));
        }
        if opts.variant == ModelVariant::WorldCoordinate && opts.frame != FrameOption::World {
            return Err(invalid("options.frame", "variant world_coordinate requires frame world"));
        }

        let mut seen = HashSet::new();
        let mut targets = Vec::with_capacity(doc.targets.len());
        for (i, t) in doc.targets.iter().enumerate() {
            let at = |field: &str| format!("targets[{i}].{field}");
            if !seen.insert(t.id.as_str()) {
                return Err(SceneError::DuplicateId(t.id.clone()));
            }
            let shape = match &t.shape {
                ShapeDocument::Sphere { center, diameter_m } => {
                    Sphere::new(vec3(*center), *diameter_m).map(TargetShape::Sphere)
                }
                ShapeDocument::Rect { center, normal, up, width_m, height_m } => {
                    Rect::new(vec3(*center), vec3(*normal), vec3(*up), *width_m, *height_m).map(TargetShape::Rect)
                }
            }
            .map_err(|source| SceneError::Geometry { path: at("shape"), source })?;
            if let Some(a) = t.amplitude {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(invalid(at("amplitude"), format!("must be positive, got {a}")));
                }
            }
            if opts.distance_enabled && t.amplitude.is_none() && opts.default_amplitude.is_none() {
                return Err(invalid(
                    "options.default_amplitude",
                    format!("distance_enabled needs an amplitude for target `{}` (set options.default_amplitude or targets[{i}].amplitude)", t.id),
                ));
            }
            let start = t.start.map(vec3);
            if start.is_some_and(|s| !s.iter().all(|v| v.is_finite())) {
                return Err(invalid(at("start"), "must be finite"));
            }
            targets.push(SceneTarget { id: t.id.clone(), shape, amplitude: t.amplitude, start });
        }

        Ok(Scene { camera, targets, options: doc.options.clone(), document: doc })
    }
}

/// Serializes a scene back to its document form.
pub fn emit_scene(scene: &Scene) -> String {
    let mut s = serde_json::to_string_pretty(&scene.document).expect("scene serializes");
    s.push('\n');
    s
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn minimal() -> String {
        r#"{
  "raysr_scene": 1,
  "camera": {"position": [0, 0, 0], "forward": [0, 0, 1], "up": [0, 1, 0]},
  "targets": [{"id": "button", "shape": {"kind": "sphere", "center": [0, 0, 2], "diameter_m": 0.05}}],
  "options": {"variant": "baseline", "offset_enabled": true, "distance_enabled": false, "frame": "movement"}
}"#
        .to_string()
    }

    #[test]
    fn minimal_document() {
        let scene = parse_scene(&minimal()).unwrap();
        assert_eq!(scene.targets.len(), 1);
        assert!(matches!(scene.targets[0].shape, TargetShape::Sphere(s) if s.diameter == 0.05));
    }

    #[test]
    fn unknown_field_reports_path() {
        let doc = minimal().replace("\"diameter_m\": 0.05", "\"diameter_m\": 0.05, \"colour\": 1");
        match parse_scene(&doc) {
            Err(SceneError::Schema { path, message }) => {
                assert_eq!(path, "targets[0].shape");
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let doc = minimal().replace("\"frame\": \"movement\"", "\"frame\": \"sideways\"");
        assert!(matches!(parse_scene(&doc), Err(SceneError::Schema { path, .. }) if path == "options.frame"));
    }

    #[test]
    fn duplicate_ids() {
        let doc = minimal().replace(
            "\"targets\": [",
            "\"targets\": [{\"id\": \"button\", \"shape\": {\"kind\": \"sphere\", \"center\": [1, 0, 2], \"diameter_m\": 0.05}}, ",
        );
        let err = parse_scene(&doc).unwrap_err();
        assert_eq!(err, SceneError::DuplicateId("button".into()));
        assert!(err.to_string().contains("button"));
    }

    #[test]
    fn distance_needs_amplitude() {
        let doc = minimal()
            .replace("\"baseline\"", "\"with_amplitude\"")
            .replace("\"distance_enabled\": false", "\"distance_enabled\": true");
        let err = parse_scene(&doc).unwrap_err();
        assert!(err.to_string().contains("options.default_amplitude"), "{err}");
        let fixed = doc.replace("\"frame\": \"movement\"", "\"frame\": \"movement\", \"default_amplitude\": 30");
        assert!(parse_scene(&fixed).is_ok());
    }

    #[test]
    fn option_combinations() {
        let amp_without_distance = minimal().replace("\"baseline\"", "\"with_amplitude\"");
        assert!(
            matches!(parse_scene(&amp_without_distance), Err(SceneError::Invalid { path, .. }) if path == "options.distance_enabled")
        );
        let world_variant = minimal().replace("\"baseline\"", "\"world_coordinate\"");
        assert!(
            matches!(parse_scene(&world_variant), Err(SceneError::Invalid { path, .. }) if path == "options.frame")
        );
    }

    #[test]
    fn geometry_errors_carry_paths() {
        let doc = minimal().replace("\"forward\": [0, 0, 1]", "\"forward\": [0, 0, 2]");
        assert!(matches!(parse_scene(&doc), Err(SceneError::Geometry { path, .. }) if path == "camera"));
        let doc = minimal().replace("0.05", "-1");
        assert!(matches!(parse_scene(&doc), Err(SceneError::Geometry { path, .. }) if path == "targets[0].shape"));
        let doc = minimal().replace("\"raysr_scene\": 1", "\"raysr_scene\": 2");
        assert_eq!(parse_scene(&doc).unwrap_err(), SceneError::UnsupportedVersion(2));
    }

    // `1` and `1.0` are the same value to a reader of the document
    fn numbers_as_f64(v: serde_json::Value) -> serde_json::Value {
        use serde_json::Value;
        match v {
            Value::Number(n) => Value::from(n.as_f64().unwrap()),
            Value::Array(a) => Value::Array(a.into_iter().map(numbers_as_f64).collect()),
            Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, numbers_as_f64(v))).collect()),
            other => other,
        }
    }

    #[test]
    fn emit_round_trips() {
        let doc = r#"{
  "raysr_scene": 1,
  "camera": {"position": [0.5, 1.6, -2], "forward": [0, 0, 1], "up": [0, 1, 0]},
  "targets": [
    {"id": "a", "shape": {"kind": "rect", "center": [0, 1.6, 3], "normal": [0, 0, -1], "up": [0, 1, 0], "width_m": 0.3, "height_m": 0.1}, "amplitude": 25.5, "start": [-1, 1.6, 3]},
    {"id": "b", "shape": {"kind": "sphere", "center": [0.2, 1.0, 4], "diameter_m": 0.12}}
  ],
  "options": {"variant": "with_amplitude", "offset_enabled": false, "distance_enabled": true, "frame": "movement", "default_amplitude": 30, "model_path": "model.json"}
}"#;
        let scene = parse_scene(doc).unwrap();
        let emitted = emit_scene(&scene);
        let a: serde_json::Value = serde_json::from_str(doc).unwrap();
        let b: serde_json::Value = serde_json::from_str(&emitted).unwrap();
        assert_eq!(numbers_as_f64(a), numbers_as_f64(b));
        assert_eq!(parse_scene(&emitted).unwrap(), scene);
    }
}

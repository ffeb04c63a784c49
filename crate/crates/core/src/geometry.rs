//! World-space scene geometry to angular quantities.
//!
//! Directions are decomposed relative to a reference view ray using an
//! azimuthal-equidistant (great-circle) mapping: a direction at angle `θ`
//! from the reference, leaving it along tangent `t`, maps to `θ·t` expressed
//! in the frame's tangent axes. Camera right is `up × forward`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Unit-length and orthogonality tolerance for user-supplied vectors.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// View angle (between reversed view ray and rect normal) beyond which a
/// flat target is flagged as grazing.
pub const GRAZING_THRESHOLD_DEG: f64 = 75.0;

/// Samples per rect edge when tracing its outline in angular space.
const EDGE_SAMPLES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{name} must be unit length (|v| = {norm})")]
    NotUnit { name: &'static str, norm: f64 },
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("forward and up must not be parallel")]
    ParallelAxes,
    #[error("rect normal and up must be orthogonal (dot = {0})")]
    NotOrthogonal(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositiveSize { name: &'static str, value: f64 },
    #[error("camera is inside the sphere (distance {distance} m, radius {radius} m)")]
    CameraInsideSphere { distance: f64, radius: f64 },
    #[error("target is behind the camera")]
    BehindCamera,
    #[error("camera lies in the rect's plane")]
    CameraInRectPlane,
    #[error("camera is behind the rect's front face")]
    BehindRectPlane,
    #[error("start and goal coincide as seen from the camera")]
    CoincidentTargets,
    #[error("ray points away from the goal hemisphere")]
    RayAwayFromGoal,
    #[error("frame axes are not perpendicular to the reference direction")]
    DegenerateFrame,
}

fn check_finite(v: &Vec3, name: &'static str) -> Result<(), GeometryError> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(GeometryError::NonFinite(name))
    }
}

fn check_unit(v: &Vec3, name: &'static str) -> Result<(), GeometryError> {
    check_finite(v, name)?;
    let norm = v.norm();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(GeometryError::NotUnit { name, norm });
    }
    Ok(())
}

fn check_positive(value: f64, name: &'static str) -> Result<(), GeometryError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::NonPositiveSize { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    position: Vec3,
    forward: Vec3,
    up: Vec3,
}

impl CameraPose {
    pub fn new(position: Vec3, forward: Vec3, up: Vec3) -> Result<Self, GeometryError> {
        check_finite(&position, "camera.position")?;
        check_unit(&forward, "camera.forward")?;
        check_unit(&up, "camera.up")?;
        if forward.cross(&up).norm() < 1e-9 {
            return Err(GeometryError::ParallelAxes);
        }
        Ok(Self { position, forward, up })
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn forward(&self) -> Vec3 {
        self.forward
    }

    pub fn up(&self) -> Vec3 {
        self.up
    }

    pub fn right(&self) -> Vec3 {
        self.up.cross(&self.forward).normalize()
    }

    /// Unit direction from the camera to `point`, requiring it in front.
    fn direction_to(&self, point: &Vec3) -> Result<Vec3, GeometryError> {
        let v = point - self.position;
        if v.dot(&self.forward) <= 0.0 {
            return Err(GeometryError::BehindCamera);
        }
        Ok(v.normalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub diameter: f64,
}

impl Sphere {
    pub fn new(center: Vec3, diameter: f64) -> Result<Self, GeometryError> {
        check_finite(&center, "center")?;
        check_positive(diameter, "diameter_m")?;
        Ok(Self { center, diameter })
    }
}

/// Flat rectangle. `normal` points out of the front face; `up` runs along
/// the height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub center: Vec3,
    pub normal: Vec3,
    pub up: Vec3,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(center: Vec3, normal: Vec3, up: Vec3, width: f64, height: f64) -> Result<Self, GeometryError> {
        check_finite(&center, "center")?;
        check_unit(&normal, "normal")?;
        check_unit(&up, "up")?;
        let dot = normal.dot(&up);
        if dot.abs() > UNIT_TOLERANCE {
            return Err(GeometryError::NotOrthogonal(dot));
        }
        check_positive(width, "width_m")?;
        check_positive(height, "height_m")?;
        Ok(Self { center, normal, up, width, height })
    }

    /// In-plane axis along the width.
    pub fn across(&self) -> Vec3 {
        self.up.cross(&self.normal).normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetShape {
    Sphere(Sphere),
    Rect(Rect),
}

impl TargetShape {
    pub fn center(&self) -> Vec3 {
        match self {
            TargetShape::Sphere(s) => s.center,
            TargetShape::Rect(r) => r.center,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularExtent {
    pub w_x: f64,
    pub w_y: f64,
    pub grazing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularEndpoint {
    pub x: f64,
    pub y: f64,
}

/// Orthonormal tangent axes at a reference view direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularBasis {
    reference: Vec3,
    x_axis: Vec3,
    y_axis: Vec3,
}

impl AngularBasis {
    /// `x_hint` is projected onto the plane perpendicular to `reference`;
    /// `y = reference × x`, so `x × y = reference`.
    fn from_hint(reference: Vec3, x_hint: Vec3) -> Result<Self, GeometryError> {
        let x = x_hint - reference * reference.dot(&x_hint);
        let n = x.norm();
        if n < 1e-12 {
            return Err(GeometryError::DegenerateFrame);
        }
        let x_axis = x / n;
        let y_axis = reference.cross(&x_axis);
        Ok(Self { reference, x_axis, y_axis })
    }

    pub fn reference(&self) -> Vec3 {
        self.reference
    }

    pub fn x_axis(&self) -> Vec3 {
        self.x_axis
    }

    pub fn y_axis(&self) -> Vec3 {
        self.y_axis
    }

    /// Carries the basis to a new reference direction, keeping the x-axis
    /// as close as possible to its current orientation.
    pub fn rebased(&self, reference: Vec3) -> Result<Self, GeometryError> {
        Self::from_hint(reference, self.x_axis)
    }

    /// Great-circle decomposition of `direction` in degrees.
    pub fn decompose(&self, direction: &Vec3) -> AngularEndpoint {
        let d = direction.normalize();
        let cos = d.dot(&self.reference).clamp(-1.0, 1.0);
        let tangent = d - self.reference * cos;
        let sin = tangent.norm();
        // below this the tangent is rounding noise from normalization
        if sin <= 4.0 * f64::EPSILON {
            return AngularEndpoint { x: 0.0, y: 0.0 };
        }
        let theta = sin.atan2(cos).to_degrees();
        AngularEndpoint { x: theta * tangent.dot(&self.x_axis) / sin, y: theta * tangent.dot(&self.y_axis) / sin }
    }
}

/// Which axes the angular extent of a flat target is measured along.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameSpec {
    /// Camera-horizontal and camera-vertical axes.
    World,
    /// Movement-direction axes, e.g. from [`movement_frame`].
    Movement(AngularBasis),
}

/// Camera-aligned basis at the direction towards `center`.
pub fn world_frame(camera: &CameraPose, center: &Vec3) -> Result<AngularBasis, GeometryError> {
    let reference = camera.direction_to(center)?;
    AngularBasis::from_hint(reference, camera.right())
}

/// Full angular diameter of a sphere, in degrees.
pub fn angular_width_sphere(camera: &CameraPose, sphere: &Sphere) -> Result<f64, GeometryError> {
    let to_center = sphere.center - camera.position;
    let distance = to_center.norm();
    let radius = sphere.diameter / 2.0;
    if distance <= radius {
        return Err(GeometryError::CameraInsideSphere { distance, radius });
    }
    if to_center.dot(&camera.forward) <= 0.0 {
        return Err(GeometryError::BehindCamera);
    }
    Ok(2.0 * (radius / distance).asin().to_degrees())
}

/// Angular width and height of a flat rectangle along the frame's axes.
///
/// The rect outline is traced in angular coordinates centered on the view
/// ray to the rect center, and the extent is the span along each axis. For
/// an axis-aligned rect this is the angle between the rays to opposite edge
/// midpoints.
pub fn angular_extent_rect(
    camera: &CameraPose,
    rect: &Rect,
    frame: &FrameSpec,
) -> Result<AngularExtent, GeometryError> {
    let to_camera = camera.position - rect.center;
    let facing = to_camera.dot(&rect.normal);
    if facing.abs() <= 1e-12 * to_camera.norm().max(1.0) {
        return Err(GeometryError::CameraInRectPlane);
    }
    if facing < 0.0 {
        return Err(GeometryError::BehindRectPlane);
    }
    let reference = camera.direction_to(&rect.center)?;
    let basis = match frame {
        FrameSpec::World => AngularBasis::from_hint(reference, camera.right())?,
        FrameSpec::Movement(b) => b.rebased(reference)?,
    };

    let view_angle = (facing / to_camera.norm()).clamp(-1.0, 1.0).acos().to_degrees();

    let across = rect.across() * (rect.width / 2.0);
    let along = rect.up * (rect.height / 2.0);
    let corners = [
        rect.center - across - along,
        rect.center + across - along,
        rect.center + across + along,
        rect.center - across + along,
    ];

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..4 {
        let (p0, p1) = (corners[i], corners[(i + 1) % 4]);
        for s in 0..EDGE_SAMPLES {
            let t = s as f64 / EDGE_SAMPLES as f64;
            let point = p0 + (p1 - p0) * t;
            let v = point - camera.position;
            if v.dot(&camera.forward) <= 0.0 {
                return Err(GeometryError::BehindCamera);
            }
            let e = basis.decompose(&v);
            x_min = x_min.min(e.x);
            x_max = x_max.max(e.x);
            y_min = y_min.min(e.y);
            y_max = y_max.max(e.y);
        }
    }

    Ok(AngularExtent { w_x: x_max - x_min, w_y: y_max - y_min, grazing: view_angle > GRAZING_THRESHOLD_DEG })
}

/// View angle between the reversed view ray and a rect normal, in degrees.
pub fn rect_view_angle(camera: &CameraPose, rect: &Rect) -> f64 {
    let to_camera = (camera.position - rect.center).normalize();
    to_camera.dot(&rect.normal).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Movement-direction basis at the goal: x runs along the great circle from
/// start to goal (pointing away from start), y completes a right-handed
/// triple with the view ray.
pub fn movement_frame(
    camera: &CameraPose,
    start_center: &Vec3,
    goal_center: &Vec3,
) -> Result<AngularBasis, GeometryError> {
    let goal = camera.direction_to(goal_center)?;
    let start = camera.direction_to(start_center)?;
    let away = goal * start.dot(&goal) - start;
    if away.norm() < 1e-12 {
        return Err(GeometryError::CoincidentTargets);
    }
    AngularBasis::from_hint(goal, away)
}

/// Signed angular error of a pointing ray relative to the goal center.
pub fn endpoint_to_angular(
    camera: &CameraPose,
    frame: &AngularBasis,
    goal_center: &Vec3,
    ray_direction: &Vec3,
) -> Result<AngularEndpoint, GeometryError> {
    check_finite(ray_direction, "ray_direction")?;
    let goal = camera.direction_to(goal_center)?;
    let basis = if (frame.reference - goal).norm() < 1e-12 { *frame } else { frame.rebased(goal)? };
    if ray_direction.norm() == 0.0 || ray_direction.dot(&goal) <= 0.0 {
        return Err(GeometryError::RayAwayFromGoal);
    }
    Ok(basis.decompose(ray_direction))
}

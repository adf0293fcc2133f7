//! Observation models between world-frame and sensor-frame wall parameters.
//!
//! Two models are provided:
//!
//! * [`SensorModel::Paper`] moves the closest point `(u, v)` like an ordinary
//!   point: `h = R(-θ)·(w - t)`. The Jacobian is the rotation `R(-θ)` and does
//!   not depend on `w`.
//! * [`SensorModel::Hessian`] transforms the wall as a line. With `ρ = ‖w‖`,
//!   `n = w/ρ` and translation `t`, the sensor-frame closest point is
//!   `(ρ - n·t)·R(-θ)·n`.
//!
//! The two agree whenever `t` is parallel to `n`. Otherwise the point model
//! slides the closest point along the wall by the tangential part of `t`.

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};
use crate::types::{LineMC, Pose2D, WallParam, EPS_DEGENERATE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SensorModel {
    /// Point translation/rotation of the closest point.
    #[default]
    Paper,
    /// Exact line transform in Hessian normal form.
    Hessian,
}

impl SensorModel {
    /// World-frame wall to sensor-frame observation.
    pub fn forward(self, w: &WallParam, pose: &Pose2D) -> Result<WallParam> {
        match self {
            SensorModel::Paper => forward_paper(w, pose),
            SensorModel::Hessian => forward_hessian(w, pose),
        }
    }

    /// `∂forward/∂(u, v)`
    pub fn jacobian(self, w: &WallParam, pose: &Pose2D) -> Mat2 {
        match self {
            SensorModel::Paper => jacobian_paper(pose),
            SensorModel::Hessian => jacobian_hessian(w, pose),
        }
    }

    /// Sensor-frame observation to world-frame wall.
    pub fn inverse(self, z: &WallParam, pose: &Pose2D) -> Result<WallParam> {
        match self {
            SensorModel::Paper => inverse_paper(z, pose),
            SensorModel::Hessian => inverse_hessian(z, pose),
        }
    }

    /// `∂inverse/∂(u', v')`
    pub fn inverse_jacobian(self, z: &WallParam, pose: &Pose2D) -> Mat2 {
        match self {
            SensorModel::Paper => Mat2::rotation(pose.theta()),
            SensorModel::Hessian => inverse_jacobian_hessian(z, pose),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SensorModel::Paper => "paper",
            SensorModel::Hessian => "hessian",
        }
    }
}

impl core::str::FromStr for SensorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(SensorModel::Paper),
            "hessian" => Ok(SensorModel::Hessian),
            _ => Err(Error::InvalidConfig {
                field: "sensor_model",
                reason: "expected `paper` or `hessian`",
            }),
        }
    }
}

/// `R(-θ)·((u, v) - (x, y))`
pub fn forward_paper(w: &WallParam, pose: &Pose2D) -> Result<WallParam> {
    WallParam::from_vec(jacobian_paper(pose) * (w.as_vec() - pose.position()))
}

/// `R(θ)·(u', v') + (x, y)`
pub fn inverse_paper(z: &WallParam, pose: &Pose2D) -> Result<WallParam> {
    WallParam::from_vec(Mat2::rotation(pose.theta()) * z.as_vec() + pose.position())
}

/// `[[cos θ, sin θ], [-sin θ, cos θ]]`
pub fn jacobian_paper(pose: &Pose2D) -> Mat2 {
    Mat2::rotation(-pose.theta())
}

/// Exact sensor-frame closest point of the world line `w`.
///
/// Fails when the sensor lies on the wall line. A sensor on the far side of
/// the line from the world origin is valid and yields `ρ - n·t < 0`.
pub fn forward_hessian(w: &WallParam, pose: &Pose2D) -> Result<WallParam> {
    let n = w.normal();
    let rho_s = w.rho() - n.dot(pose.position());
    if libm::fabs(rho_s) < EPS_DEGENERATE {
        return Err(Error::DegenerateWall(libm::fabs(rho_s)));
    }
    WallParam::from_vec(Mat2::rotation(-pose.theta()) * n * rho_s)
}

/// Analytic `∂forward_hessian/∂(u, v)`.
///
/// Writing the model as `R(-θ)·(w - n·nᵀ·t)` and using
/// `∂n/∂w = (I - n·nᵀ)/ρ`:
/// `J = R(-θ)·(I - ((n·t)·I + n·tᵀ)·(I - n·nᵀ)/ρ)`.
pub fn jacobian_hessian(w: &WallParam, pose: &Pose2D) -> Mat2 {
    let n = w.normal();
    let t = pose.position();
    let inner = projection_derivative(n, t, w.rho());
    Mat2::rotation(-pose.theta()) * (Mat2::IDENTITY - inner)
}

/// Inverse of [`forward_hessian`]: `R(θ)·z + n·nᵀ·t` with `n` the world normal.
pub fn inverse_hessian(z: &WallParam, pose: &Pose2D) -> Result<WallParam> {
    let y = Mat2::rotation(pose.theta()) * z.as_vec();
    let n = y * (1.0 / z.rho());
    WallParam::from_vec(y + n * n.dot(pose.position()))
}

/// Analytic `∂inverse_hessian/∂(u', v')`.
pub fn inverse_jacobian_hessian(z: &WallParam, pose: &Pose2D) -> Mat2 {
    let rot = Mat2::rotation(pose.theta());
    let n = rot * z.normal();
    let inner = projection_derivative(n, pose.position(), z.rho());
    (Mat2::IDENTITY + inner) * rot
}

/// `∂(n·nᵀ·t)/∂w` for `n = w/‖w‖`, `‖w‖ = rho`.
fn projection_derivative(n: Vec2, t: Vec2, rho: f64) -> Mat2 {
    let tangent_proj = Mat2::IDENTITY - Mat2::outer(n, n);
    (Mat2::IDENTITY.scale(n.dot(t)) + Mat2::outer(n, t)) * tangent_proj.scale(1.0 / rho)
}

/// Closest point of `v = m·u + c`: `u = -mc/(m²+1)`, `v = c/(m²+1)`.
pub fn mc_to_uv(line: &LineMC) -> Result<WallParam> {
    let (m, c) = (line.m(), line.c());
    if libm::fabs(c) < EPS_DEGENERATE {
        return Err(Error::DegenerateWall(libm::fabs(c)));
    }
    let denom = m * m + 1.0;
    WallParam::new(-m * c / denom, c / denom)
}

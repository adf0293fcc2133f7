//! Geometric and estimation value types.
//!
//! Constructors validate every invariant and fail with [`Error`]; once built a
//! value cannot be mutated into an invalid state.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};

/// Walls whose closest point is nearer than this to the frame origin are
/// rejected: the line direction is lost at the origin.
pub const EPS_DEGENERATE: f64 = 1e-6;

/// Tolerance on the smallest eigenvalue accepted by [`Cov2::new`].
pub const PSD_TOLERANCE: f64 = 1e-12;

/// Wraps `theta` into `(-π, π]`.
pub fn normalize_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    let r = libm::fmod(theta, TAU);
    Ok(if r <= -PI {
        r + TAU
    } else if r > PI {
        r - TAU
    } else {
        r
    })
}

/// Sensor pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    x: f64,
    y: f64,
    theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite("pose position"));
        }
        Ok(Self {
            x,
            y,
            theta: normalize_angle(theta)?,
        })
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn theta(&self) -> f64 {
        self.theta
    }

    #[inline]
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Maps a sensor-frame point into the world frame.
    pub fn to_world(&self, p: Vec2) -> Vec2 {
        Mat2::rotation(self.theta) * p + self.position()
    }

    /// Maps a world-frame point into the sensor frame.
    pub fn to_sensor(&self, p: Vec2) -> Vec2 {
        Mat2::rotation(-self.theta) * (p - self.position())
    }
}

/// A wall line given by its point closest to the frame origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallParam {
    u: f64,
    v: f64,
}

impl WallParam {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        if !(u.is_finite() && v.is_finite()) {
            return Err(Error::NonFinite("wall parameter"));
        }
        let rho = libm::hypot(u, v);
        if rho < EPS_DEGENERATE {
            return Err(Error::DegenerateWall(rho));
        }
        Ok(Self { u, v })
    }

    pub fn from_vec(p: Vec2) -> Result<Self> {
        Self::new(p.x, p.y)
    }

    /// Wall through `a` and `b`, computed as the foot of the perpendicular
    /// from the origin.
    pub fn through_points(a: Vec2, b: Vec2) -> Result<Self> {
        let d = b - a;
        let len_sq = d.norm_sq();
        if !(len_sq > 0.0) {
            return Err(Error::NonFinite("coincident line points"));
        }
        let t = -a.dot(d) / len_sq;
        Self::from_vec(a + d * t)
    }

    #[inline]
    pub fn u(&self) -> f64 {
        self.u
    }

    #[inline]
    pub fn v(&self) -> f64 {
        self.v
    }

    #[inline]
    pub fn as_vec(&self) -> Vec2 {
        Vec2::new(self.u, self.v)
    }

    /// Distance from the origin to the line.
    #[inline]
    pub fn rho(&self) -> f64 {
        libm::hypot(self.u, self.v)
    }

    /// Unit normal pointing from the origin towards the line.
    #[inline]
    pub fn normal(&self) -> Vec2 {
        self.as_vec() * (1.0 / self.rho())
    }

    /// Signed distance of `p` from the line, positive on the far side from the origin.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        self.normal().dot(p) - self.rho()
    }
}

/// Slope-intercept line `v = m·u + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMC {
    m: f64,
    c: f64,
}

impl LineMC {
    pub fn new(m: f64, c: f64) -> Result<Self> {
        if !(m.is_finite() && c.is_finite()) {
            return Err(Error::NonFinite("slope/intercept"));
        }
        Ok(Self { m, c })
    }

    #[inline]
    pub fn m(&self) -> f64 {
        self.m
    }

    #[inline]
    pub fn c(&self) -> f64 {
        self.c
    }
}

/// Symmetric positive semi-definite 2×2 covariance in m².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cov2(Mat2);

impl Cov2 {
    /// Symmetrizes `m` to `(m + mᵀ)/2` and checks it is PSD within [`PSD_TOLERANCE`].
    pub fn new(m: Mat2) -> Result<Self> {
        Self::with_tolerance(m, PSD_TOLERANCE)
    }

    pub(crate) fn with_tolerance(m: Mat2, tol: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite("covariance"));
        }
        let s = m.symmetrized();
        let (min, _) = s.sym_eigenvalues();
        if min < -tol {
            return Err(Error::NotPositiveSemiDefinite(min));
        }
        Ok(Self(s))
    }

    pub fn diag(var_u: f64, var_v: f64) -> Result<Self> {
        Self::new(Mat2::diag(var_u, var_v))
    }

    pub fn from_entries(s_uu: f64, s_uv: f64, s_vv: f64) -> Result<Self> {
        Self::new(Mat2::new(s_uu, s_uv, s_uv, s_vv))
    }

    #[inline]
    pub fn as_mat(&self) -> Mat2 {
        self.0
    }

    #[inline]
    pub fn uu(&self) -> f64 {
        self.0.m[0][0]
    }

    #[inline]
    pub fn uv(&self) -> f64 {
        self.0.m[0][1]
    }

    #[inline]
    pub fn vv(&self) -> f64 {
        self.0.m[1][1]
    }

    /// `(min, max)`
    pub fn eigenvalues(&self) -> (f64, f64) {
        self.0.sym_eigenvalues()
    }
}

/// One estimated wall with its EKF state.
#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub id: u64,
    /// World frame.
    pub mean: WallParam,
    pub cov: Cov2,
    /// Number of observations fused, including the initializing one.
    pub hits: u32,
    pub first_seen: u64,
    pub last_seen: u64,
}

/// One ground-plane row of depth samples in the sensor frame. `None` marks an
/// invalid sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    samples: Vec<Option<Vec2>>,
}

impl ScanRow {
    pub fn new(samples: Vec<Option<Vec2>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyRow);
        }
        if samples.iter().flatten().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("scan sample"));
        }
        Ok(Self { samples })
    }

    /// Builds a row from raw coordinates; any sample with a non-finite
    /// coordinate becomes invalid.
    pub fn from_xy(raw: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            raw.iter()
                .map(|&(x, y)| {
                    let p = Vec2::new(x, y);
                    p.is_finite().then_some(p)
                })
                .collect(),
        )
    }

    /// A row of `width` invalid samples.
    pub fn invalid(width: usize) -> Result<Self> {
        Self::new(alloc::vec![None; width])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn samples(&self) -> &[Option<Vec2>] {
        &self.samples
    }

    pub fn valid_count(&self) -> usize {
        self.samples.iter().flatten().count()
    }
}

/// A wall detected in one scan row, in the sensor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub wall: WallParam,
    pub inliers: usize,
    /// Projections of the extreme inliers onto the fitted line.
    pub extent: Option<(Vec2, Vec2)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_angle_examples() {
        assert_eq!(normalize_angle(0.0).unwrap(), 0.0);
        assert!((normalize_angle(3.0 * PI).unwrap() - PI).abs() < 1e-12);
        assert_eq!(normalize_angle(-PI).unwrap(), PI);
        assert_eq!(normalize_angle(PI).unwrap(), PI);
        assert!(normalize_angle(f64::NAN).is_err());
        assert!(normalize_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn pose_normalizes_heading() {
        let p = Pose2D::new(1.0, 2.0, -3.0 * PI).unwrap();
        assert!((p.theta() - PI).abs() < 1e-12);
        assert!(Pose2D::new(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn wall_param_rejects_origin() {
        assert!(matches!(
            WallParam::new(1e-7, 0.0),
            Err(Error::DegenerateWall(_))
        ));
        assert!(WallParam::new(f64::INFINITY, 1.0).is_err());
        assert!(WallParam::new(2.0, 0.0).is_ok());
    }

    #[test]
    fn wall_through_points_is_foot_of_perpendicular() {
        let w = WallParam::through_points(Vec2::new(2.0, -1.0), Vec2::new(2.0, 3.0)).unwrap();
        assert_eq!(w.as_vec(), Vec2::new(2.0, 0.0));
    }

    #[test]
    fn cov_symmetrizes() {
        let c = Cov2::new(Mat2::new(2.0, 0.4, 0.0, 1.0)).unwrap();
        assert_eq!(c.uv(), 0.2);
        assert_eq!(c.as_mat().m[1][0], 0.2);
    }

    #[test]
    fn cov_rejects_indefinite() {
        assert!(matches!(
            Cov2::new(Mat2::new(1.0, 2.0, 2.0, 1.0)),
            Err(Error::NotPositiveSemiDefinite(_))
        ));
        assert!(Cov2::new(Mat2::ZERO).is_ok());
        assert!(Cov2::new(Mat2::new(f64::NAN, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn scan_row_invariants() {
        assert_eq!(ScanRow::new(alloc::vec![]), Err(Error::EmptyRow));
        assert!(ScanRow::new(alloc::vec![Some(Vec2::new(f64::INFINITY, 0.0))]).is_err());
        let row = ScanRow::from_xy(&[(1.0, 0.0), (f64::NAN, f64::NAN), (1.0, f64::INFINITY)]).unwrap();
        assert_eq!(row.width(), 3);
        assert_eq!(row.valid_count(), 1);
    }
}

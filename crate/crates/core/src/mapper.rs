//! Per-wall EKF mapping.
//!
//! Given known poses the posterior over walls factors into independent
//! per-wall posteriors, so each landmark carries its own 2-dimensional filter
//! and an update touches exactly one landmark. Walls are static and there is
//! no prediction step.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::sensor_model::SensorModel;
use crate::types::{Cov2, Landmark, Observation, Pose2D, WallParam};

/// Eigenvalue floor below which a posterior covariance is a numerical failure.
pub const UPDATE_PSD_TOLERANCE: f64 = 1e-9;

/// Sensor-frame observation covariance `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementNoise(Cov2);

impl MeasurementNoise {
    pub fn new(r: Cov2) -> Result<Self> {
        let (min, _) = r.eigenvalues();
        if min < 1e-12 {
            return Err(Error::NotPositiveDefinite(min));
        }
        Ok(Self(r))
    }

    /// `diag(sigma², sigma²)`
    pub fn isotropic(sigma: f64) -> Result<Self> {
        Self::new(Cov2::diag(sigma * sigma, sigma * sigma)?)
    }

    #[inline]
    pub fn cov(&self) -> Cov2 {
        self.0
    }

    #[inline]
    pub fn as_mat(&self) -> Mat2 {
        self.0.as_mat()
    }
}

impl Default for MeasurementNoise {
    fn default() -> Self {
        Self::isotropic(0.05).expect("positive sigma")
    }
}

/// Posterior covariance formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceUpdate {
    /// `(I - K·H)·Σ`
    #[default]
    Standard,
    /// `(I - K·H)·Σ·(I - K·H)ᵀ + K·R·Kᵀ`
    Joseph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapperConfig {
    pub sensor_model: SensorModel,
    pub noise: MeasurementNoise,
    /// Inflation applied to a new landmark's covariance, at least 1.
    pub kappa_init: f64,
    pub covariance_update: CovarianceUpdate,
}

impl Default for MapperConfig {
    fn default() -> Self {
        Self {
            sensor_model: SensorModel::Paper,
            noise: MeasurementNoise::default(),
            kappa_init: 2.0,
            covariance_update: CovarianceUpdate::Standard,
        }
    }
}

impl MapperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_init >= 1.0 && self.kappa_init.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "mapper.kappa_init",
                reason: "must be finite and at least 1",
            });
        }
        Ok(())
    }
}

/// The landmarks making up the inferred wall configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct WallMap {
    landmarks: Vec<Landmark>,
    next_id: u64,
}

impl Default for WallMap {
    fn default() -> Self {
        Self::new()
    }
}

impl WallMap {
    pub fn new() -> Self {
        Self {
            landmarks: Vec::new(),
            next_id: 1,
        }
    }

    /// Rebuilds a map from stored landmarks; ids must be strictly increasing.
    pub fn from_landmarks(landmarks: Vec<Landmark>) -> Result<Self> {
        if landmarks.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(Error::InvalidConfig {
                field: "landmark id",
                reason: "ids must be unique and increasing",
            });
        }
        let next_id = landmarks.last().map_or(1, |l| l.id + 1);
        Ok(Self { landmarks, next_id })
    }

    #[inline]
    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    /// Constant time while ids are dense, which holds for every map built by
    /// `insert`; maps loaded with gaps fall back to a binary search.
    #[inline]
    fn index_of(&self, id: u64) -> Option<usize> {
        let guess = usize::try_from(id).ok()?.checked_sub(1)?;
        match self.landmarks.get(guess) {
            Some(l) if l.id == id => Some(guess),
            _ => self.landmarks.binary_search_by_key(&id, |l| l.id).ok(),
        }
    }

    pub fn get(&self, id: u64) -> Option<&Landmark> {
        self.index_of(id).map(|i| &self.landmarks[i])
    }

    /// Appends a landmark under a fresh id and returns the id.
    pub fn insert(&mut self, mut landmark: Landmark) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        landmark.id = id;
        self.landmarks.push(landmark);
        id
    }

    /// Replaces the landmark with the same id.
    pub fn replace(&mut self, landmark: Landmark) -> Result<()> {
        let i = self.index_of(landmark.id).ok_or(Error::UnknownLandmark(landmark.id))?;
        self.landmarks[i] = landmark;
        Ok(())
    }
}

/// New landmark from its first observation: mean from the inverse model,
/// covariance `κ·G·R·Gᵀ` with `G` the inverse-model Jacobian. The id is
/// assigned by [`WallMap::insert`].
pub fn init_landmark(z: &Observation, pose: &Pose2D, cfg: &MapperConfig, frame: u64) -> Result<Landmark> {
    let model = cfg.sensor_model;
    let mean = model.inverse(&z.wall, pose)?;
    let g = model.inverse_jacobian(&z.wall, pose);
    let cov = (g * cfg.noise.as_mat() * g.transpose()).scale(cfg.kappa_init);
    Ok(Landmark {
        id: 0,
        mean,
        cov: Cov2::new(cov)?,
        hits: 1,
        first_seen: frame,
        last_seen: frame,
    })
}

/// `K = Σ·Hᵀ·(R + H·Σ·Hᵀ)⁻¹`
pub fn kalman_gain(cov: &Cov2, h: &Mat2, noise: &MeasurementNoise) -> Result<Mat2> {
    let sigma = cov.as_mat();
    let s = noise.as_mat() + *h * sigma * h.transpose();
    let s_inv = s.inverse().ok_or(Error::SingularCovariance)?;
    Ok(sigma * h.transpose() * s_inv)
}

/// Fuses observation `z` into `lm`. `hits` is incremented; `last_seen` is left
/// to the caller.
pub fn ekf_update(lm: &Landmark, z: &Observation, pose: &Pose2D, cfg: &MapperConfig) -> Result<Landmark> {
    let model = cfg.sensor_model;
    let predicted = model.forward(&lm.mean, pose)?;
    let h = model.jacobian(&lm.mean, pose);
    let k = kalman_gain(&lm.cov, &h, &cfg.noise)?;
    let innovation = z.wall.as_vec() - predicted.as_vec();
    let mean = WallParam::from_vec(lm.mean.as_vec() + k * innovation)?;

    let sigma = lm.cov.as_mat();
    let i_kh = Mat2::IDENTITY - k * h;
    let posterior = match cfg.covariance_update {
        CovarianceUpdate::Standard => i_kh * sigma,
        CovarianceUpdate::Joseph => {
            i_kh * sigma * i_kh.transpose() + k * cfg.noise.as_mat() * k.transpose()
        }
    };
    let cov = Cov2::with_tolerance(posterior, UPDATE_PSD_TOLERANCE).map_err(|e| match e {
        Error::NotPositiveSemiDefinite(min) => Error::NumericalFailure(min),
        other => other,
    })?;
    Ok(Landmark {
        mean,
        cov,
        hits: lm.hits.saturating_add(1),
        ..lm.clone()
    })
}

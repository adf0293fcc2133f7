//! Maximum-likelihood data association by exhaustive search.
//!
//! The likelihood of observation `z` under landmark `w` is proportional to
//! `exp(-d²/2)` with `d² = (z - h)ᵀ·Σ⁻¹·(z - h)`, so maximizing likelihood is
//! minimizing `d²`. Gating is done on `d²`, which is chi-square with two
//! degrees of freedom; the dropped proportionality constant would make a
//! threshold on the likelihood itself unit-dependent.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mapper::{MapperConfig, WallMap};
use crate::types::{Landmark, Observation, Pose2D};

/// 99% quantile of chi-square with 2 degrees of freedom.
pub const CHI2_2DOF_99: f64 = 9.21;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationConfig {
    /// Largest `d²` accepted as a match.
    pub gate: f64,
    /// Use `S = H·Σ·Hᵀ + R` instead of the landmark covariance alone.
    pub use_innovation_cov: bool,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            gate: CHI2_2DOF_99,
            use_innovation_cov: false,
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gate > 0.0) || self.gate.is_nan() {
            return Err(Error::InvalidConfig {
                field: "association.gate",
                reason: "must be positive",
            });
        }
        Ok(())
    }
}

/// Outcome for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Association {
    Matched { id: u64, d2: f64 },
    New,
}

/// One entry per observation, in observation order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssociationResult {
    pub assignments: Vec<Association>,
}

impl AssociationResult {
    pub fn matched_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.assignments.iter().filter_map(|a| match a {
            Association::Matched { id, .. } => Some(*id),
            Association::New => None,
        })
    }

    pub fn new_count(&self) -> usize {
        self.assignments.iter().filter(|a| matches!(a, Association::New)).count()
    }
}

/// Squared Mahalanobis distance between `z` and the landmark's prediction.
pub fn likelihood_exponent(
    z: &Observation,
    lm: &Landmark,
    pose: &Pose2D,
    cfg: &AssociationConfig,
    mapper: &MapperConfig,
) -> Result<f64> {
    let model = mapper.sensor_model;
    let h = model.forward(&lm.mean, pose)?;
    let sigma = if cfg.use_innovation_cov {
        let jac = model.jacobian(&lm.mean, pose);
        jac * lm.cov.as_mat() * jac.transpose() + mapper.noise.as_mat()
    } else {
        lm.cov.as_mat()
    };
    if !(sigma.det() > 0.0) {
        return Err(Error::SingularCovariance);
    }
    let inv = sigma.inverse().ok_or(Error::SingularCovariance)?;
    let r = z.wall.as_vec() - h.as_vec();
    Ok(r.dot(inv * r).max(0.0))
}

/// Matches observations to landmarks one-to-one.
///
/// Every (observation, landmark) pair is scored. Pairs within the gate are
/// taken greedily in ascending `d²`, ties broken by lower landmark id and then
/// lower observation index. Observations left over are `New`. Landmarks whose
/// prediction is degenerate from `pose` or whose covariance is singular are
/// not candidates.
pub fn associate(
    observations: &[Observation],
    map: &WallMap,
    pose: &Pose2D,
    cfg: &AssociationConfig,
    mapper: &MapperConfig,
) -> AssociationResult {
    let mut candidates: Vec<(f64, u64, usize)> = Vec::new();
    for (oi, z) in observations.iter().enumerate() {
        for lm in map.landmarks() {
            if let Ok(d2) = likelihood_exponent(z, lm, pose, cfg, mapper) {
                if d2 <= cfg.gate {
                    candidates.push((d2, lm.id, oi));
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut assignments = alloc::vec![Association::New; observations.len()];
    let mut taken: Vec<u64> = Vec::new();
    for (d2, id, oi) in candidates {
        if matches!(assignments[oi], Association::Matched { .. }) || taken.contains(&id) {
            continue;
        }
        assignments[oi] = Association::Matched { id, d2 };
        taken.push(id);
    }
    AssociationResult { assignments }
}

//! Per-frame orchestration: detect, associate, then update or initialize.

use alloc::vec::Vec;

use crate::association::{associate, Association, AssociationConfig};
use crate::detector::{detect_walls, DetectorConfig};
use crate::error::{Error, Result};
use crate::mapper::{ekf_update, init_landmark, MapperConfig, WallMap};
use crate::types::{Landmark, Pose2D, ScanRow};

/// Monotone time source in seconds.
pub trait Clock {
    fn now(&self) -> f64;
}

/// Always reads zero; every stage duration is reported as 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now(&self) -> f64 {
        0.0
    }
}

impl<C: Clock + ?Sized> Clock for &C {
    fn now(&self) -> f64 {
        (**self).now()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub detector: DetectorConfig,
    pub mapper: MapperConfig,
    pub association: AssociationConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.mapper.validate()?;
        self.association.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetrics {
    pub frame: u64,
    pub t_detect: f64,
    pub t_associate: f64,
    pub t_update: f64,
    pub n_observations: usize,
    /// Map size after the frame.
    pub n_landmarks: usize,
    pub n_new: usize,
    /// Set when the frame was skipped.
    pub error: Option<Error>,
}

impl FrameMetrics {
    pub fn total(&self) -> f64 {
        self.t_detect + self.t_associate + self.t_update
    }
}

fn elapsed(clock: &impl Clock, since: f64) -> f64 {
    (clock.now() - since).max(0.0)
}

/// Runs one frame against `map`.
///
/// Matched observations update their landmark, the rest initialize new ones.
/// Observations that cannot seed a landmark (degenerate in the world frame)
/// are ignored. If any update fails the map is left exactly as it was and
/// the error is recorded in the returned metrics.
pub fn process_frame(
    map: &mut WallMap,
    frame: u64,
    pose: &Pose2D,
    row: &ScanRow,
    cfg: &PipelineConfig,
    clock: &impl Clock,
) -> FrameMetrics {
    let t0 = clock.now();
    let observations = detect_walls(row, &cfg.detector);
    let t_detect = elapsed(clock, t0);

    let t1 = clock.now();
    let result = associate(&observations, map, pose, &cfg.association, &cfg.mapper);
    let t_associate = elapsed(clock, t1);

    let t2 = clock.now();
    let staged = stage_updates(map, frame, pose, &observations, &result.assignments, &cfg.mapper);
    let (n_new, error) = match staged {
        Ok((updated, created)) => {
            let n_new = created.len();
            for lm in updated {
                map.replace(lm).expect("landmark came from this map");
            }
            for lm in created {
                map.insert(lm);
            }
            (n_new, None)
        }
        Err(e) => (0, Some(e)),
    };
    let t_update = elapsed(clock, t2);

    FrameMetrics {
        frame,
        t_detect,
        t_associate,
        t_update,
        n_observations: observations.len(),
        n_landmarks: map.len(),
        n_new,
        error,
    }
}

type Staged = (Vec<Landmark>, Vec<Landmark>);

fn stage_updates(
    map: &WallMap,
    frame: u64,
    pose: &Pose2D,
    observations: &[crate::Observation],
    assignments: &[Association],
    cfg: &MapperConfig,
) -> Result<Staged> {
    let mut updated = Vec::new();
    let mut created = Vec::new();
    for (z, a) in observations.iter().zip(assignments) {
        match *a {
            Association::Matched { id, .. } => {
                let lm = map.get(id).ok_or(Error::UnknownLandmark(id))?;
                let mut next = ekf_update(lm, z, pose, cfg)?;
                next.last_seen = frame;
                updated.push(next);
            }
            Association::New => {
                if let Ok(lm) = init_landmark(z, pose, cfg, frame) {
                    created.push(lm);
                }
            }
        }
    }
    Ok((updated, created))
}

/// Owns a map and feeds it frames in order.
#[derive(Debug, Clone)]
pub struct Pipeline<C: Clock> {
    config: PipelineConfig,
    clock: C,
    map: WallMap,
    next_frame: u64,
}

impl<C: Clock> Pipeline<C> {
    pub fn new(config: PipelineConfig, clock: C) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            clock,
            map: WallMap::new(),
            next_frame: 0,
        })
    }

    pub fn process(&mut self, pose: &Pose2D, row: &ScanRow) -> FrameMetrics {
        let frame = self.next_frame;
        self.next_frame += 1;
        process_frame(&mut self.map, frame, pose, row, &self.config, &self.clock)
    }

    pub fn map(&self) -> &WallMap {
        &self.map
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn into_map(self) -> WallMap {
        self.map
    }
}

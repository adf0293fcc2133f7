//! Synthetic environments, trajectories and scan rows with exact ground truth.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::sensor_model::{forward_paper, SensorModel};
use crate::types::{normalize_angle, Pose2D, ScanRow, WallParam, EPS_DEGENERATE};

/// Seconds between simulated frames.
pub const FRAME_PERIOD: f64 = 0.1;

/// A wall segment in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(ax: f64, ay: f64, bx: f64, by: f64) -> Self {
        Self {
            a: Vec2::new(ax, ay),
            b: Vec2::new(bx, by),
        }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Closest point of the supporting line to the world origin.
    pub fn supporting_line(&self) -> Result<WallParam> {
        WallParam::through_points(self.a, self.b)
    }

    /// Distance of `p` from the segment itself.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let d = self.b - self.a;
        let s = ((p - self.a).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
        p.distance(self.a + d * s)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Environment {
    segments: Vec<Segment>,
}

impl Environment {
    /// Segments must have positive length and a supporting line that misses
    /// the world origin.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for (index, s) in segments.iter().enumerate() {
            if !(s.a.is_finite() && s.b.is_finite()) {
                return Err(Error::InvalidEnvironment {
                    index,
                    reason: "has non-finite endpoints",
                });
            }
            if !(s.length() > 0.0) {
                return Err(Error::InvalidEnvironment {
                    index,
                    reason: "has zero length",
                });
            }
            if s.supporting_line().is_err() {
                return Err(Error::InvalidEnvironment {
                    index,
                    reason: "lies on a line through the origin",
                });
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// One world-frame wall per segment.
    pub fn ground_truth(&self) -> Vec<WallParam> {
        self.segments
            .iter()
            .map(|s| s.supporting_line().expect("validated in new"))
            .collect()
    }
}

/// Depth sensor producing one ground-plane row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    /// Horizontal field of view, radians.
    pub fov: f64,
    pub samples: usize,
    pub min_range: f64,
    pub max_range: f64,
    /// Range noise at 1 m; the standard deviation grows with range squared.
    pub sigma: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            fov: 1.0,
            samples: 640,
            min_range: 0.4,
            max_range: 5.0,
            sigma: 0.0,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason| Err(Error::InvalidConfig { field, reason });
        if !(self.fov > 0.0 && self.fov < PI) {
            return bad("sensor.fov", "must lie in (0, pi)");
        }
        if self.samples < 2 {
            return bad("sensor.samples", "must be at least 2");
        }
        if !(self.min_range >= 0.0 && self.max_range > self.min_range && self.max_range.is_finite()) {
            return bad("sensor.max_range", "must be finite and exceed min_range >= 0");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sensor.sigma", "must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return bad("sensor.dropout", "must lie in [0, 1]");
        }
        Ok(())
    }

    /// Bearing of sample `i`, evenly spanning `[-fov/2, fov/2]`.
    pub fn bearing(&self, i: usize) -> f64 {
        -0.5 * self.fov + self.fov * i as f64 / (self.samples - 1) as f64
    }
}

/// Nearest in-range hit per ray: `(segment index, point in sensor frame)`.
fn cast(env: &Environment, pose: &Pose2D, spec: &SensorSpec) -> Vec<Option<(usize, Vec2)>> {
    let local: Vec<(Vec2, Vec2)> = env
        .segments()
        .iter()
        .map(|s| (pose.to_sensor(s.a), pose.to_sensor(s.b)))
        .collect();
    (0..spec.samples)
        .map(|i| {
            let d = Vec2::from_angle(spec.bearing(i));
            let mut best: Option<(usize, f64)> = None;
            for (k, &(a, b)) in local.iter().enumerate() {
                let e = b - a;
                let denom = d.cross(e);
                if denom == 0.0 {
                    continue;
                }
                let t = a.cross(e) / denom;
                let s = a.cross(d) / denom;
                if t > 0.0 && (0.0..=1.0).contains(&s) && best.is_none_or(|(_, bt)| t < bt) {
                    best = Some((k, t));
                }
            }
            match best {
                Some((k, t)) if t >= spec.min_range && t <= spec.max_range => Some((k, d * t)),
                _ => None,
            }
        })
        .collect()
}

/// Noiseless scan row from `pose`: the nearest wall hit per bearing, or an
/// invalid sample when nothing lies within range.
pub fn raycast_row(env: &Environment, pose: &Pose2D, spec: &SensorSpec) -> ScanRow {
    let samples = cast(env, pose, spec).into_iter().map(|h| h.map(|(_, p)| p)).collect();
    ScanRow::new(samples).expect("sensor has at least two samples")
}

/// Adds range noise with standard deviation `sigma·r²` along each ray and
/// drops samples with probability `dropout`. `stream` selects an independent
/// random sequence under `spec.seed`, typically the frame index.
pub fn corrupt(row: &ScanRow, spec: &SensorSpec, stream: u64) -> ScanRow {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let samples = row
        .samples()
        .iter()
        .map(|s| {
            let noise: f64 = rng.sample(StandardNormal);
            let drop = rng.random::<f64>() < spec.dropout;
            let p = (*s)?;
            if drop {
                return None;
            }
            if spec.sigma == 0.0 {
                return Some(p);
            }
            let r = p.norm();
            let noisy = r + spec.sigma * r * r * noise;
            (noisy > 0.0).then(|| p * (noisy / r))
        })
        .collect();
    ScanRow::new(samples).expect("width unchanged")
}

/// Piecewise-linear path through `waypoints`.
///
/// Starts at the first waypoint with its heading. Before each leg the
/// heading turns in place towards the leg's bearing in increments of at most
/// `turn_step`, then the position advances in equal increments of at most
/// `step`. Zero-length legs are skipped.
pub fn generate_trajectory(waypoints: &[Pose2D], step: f64, turn_step: f64) -> Result<Vec<Pose2D>> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidTrajectory("needs at least two waypoints"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidTrajectory("step must be positive"));
    }
    if !(turn_step > 0.0 && turn_step.is_finite()) {
        return Err(Error::InvalidTrajectory("turn_step must be positive"));
    }
    let mut out = alloc::vec![waypoints[0]];
    let mut heading = waypoints[0].theta();
    for leg in waypoints.windows(2) {
        let (p0, p1) = (leg[0].position(), leg[1].position());
        let delta = p1 - p0;
        let len = delta.norm();
        if len == 0.0 {
            continue;
        }
        let bearing = libm::atan2(delta.y, delta.x);
        let turn = normalize_angle(bearing - heading)?;
        if libm::fabs(turn) > 1e-12 {
            let k = libm::ceil(libm::fabs(turn) / turn_step - 1e-9).max(1.0) as usize;
            for i in 1..=k {
                out.push(Pose2D::new(p0.x, p0.y, heading + turn * i as f64 / k as f64)?);
            }
        }
        heading = bearing;
        let n = libm::ceil(len / step - 1e-9).max(1.0) as usize;
        for i in 1..=n {
            let p = p0 + delta * (i as f64 / n as f64);
            out.push(Pose2D::new(p.x, p.y, heading)?);
        }
    }
    Ok(out)
}

/// A segment seen from a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibleWall {
    pub segment: usize,
    /// Sensor frame.
    pub wall: WallParam,
    /// Noiseless samples landing on the segment.
    pub samples: usize,
}

/// Sensor-frame walls of every segment hit by at least one noiseless ray.
///
/// With [`SensorModel::Hessian`] the parameter is built directly from the
/// segment endpoints mapped into the sensor frame (foot of the perpendicular
/// from the sensor). With [`SensorModel::Paper`] it is what the point model
/// predicts from the world-frame wall. Walls through the sensor are skipped.
pub fn ground_truth_observation(
    env: &Environment,
    pose: &Pose2D,
    spec: &SensorSpec,
    model: SensorModel,
) -> Vec<VisibleWall> {
    let mut counts = alloc::vec![0usize; env.segments().len()];
    for (k, _) in cast(env, pose, spec).into_iter().flatten() {
        counts[k] += 1;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .filter_map(|(k, &samples)| {
            let s = &env.segments()[k];
            let wall = match model {
                SensorModel::Hessian => {
                    WallParam::through_points(pose.to_sensor(s.a), pose.to_sensor(s.b)).ok()?
                }
                SensorModel::Paper => forward_paper(&s.supporting_line().ok()?, pose).ok()?,
            };
            Some(VisibleWall {
                segment: k,
                wall,
                samples,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub t: f64,
    pub pose: Pose2D,
    pub row: ScanRow,
}

/// A named environment with a trajectory and sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub env: Environment,
    pub waypoints: Vec<Pose2D>,
    pub step: f64,
    pub turn_step: f64,
    pub sensor: SensorSpec,
}

pub const SCENARIO_NAMES: [&str; 5] = ["single_wall", "corner", "square_room", "corridor", "l_room"];

fn pose(x: f64, y: f64, theta: f64) -> Pose2D {
    Pose2D::new(x, y, theta).expect("finite literal")
}

fn polygon(vertices: &[(f64, f64)]) -> Vec<Segment> {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let (ax, ay) = vertices[i];
            let (bx, by) = vertices[(i + 1) % n];
            Segment::new(ax, ay, bx, by)
        })
        .collect()
}

impl Scenario {
    pub fn by_name(name: &str) -> Option<Scenario> {
        let (name, segments, waypoints) = match name {
            "single_wall" => (
                "single_wall",
                alloc::vec![Segment::new(2.0, -5.0, 2.0, 5.0)],
                alloc::vec![pose(-1.0, 0.0, 0.0), pose(0.5, 0.0, 0.0)],
            ),
            "corner" => (
                "corner",
                alloc::vec![Segment::new(3.0, -2.0, 3.0, 3.0), Segment::new(3.0, 3.0, -2.0, 3.0)],
                alloc::vec![pose(-1.0, -1.0, FRAC_PI_4), pose(1.5, 1.5, FRAC_PI_4)],
            ),
            "square_room" => (
                "square_room",
                polygon(&[(-4.0, -4.0), (4.0, -4.0), (4.0, 4.0), (-4.0, 4.0)]),
                // Starts facing the nearest corner so two walls are in view.
                alloc::vec![
                    pose(-2.0, -2.0, -3.0 * FRAC_PI_4),
                    pose(2.0, -2.0, 0.0),
                    pose(2.0, 2.0, 0.0),
                    pose(-2.0, 2.0, 0.0),
                    pose(-2.0, -2.0, 0.0),
                ],
            ),
            "corridor" => (
                "corridor",
                polygon(&[(-10.0, -1.0), (10.0, -1.0), (10.0, 1.0), (-10.0, 1.0)]),
                alloc::vec![pose(-8.0, 0.0, 0.0), pose(8.0, 0.0, 0.0), pose(-8.0, 0.0, 0.0)],
            ),
            "l_room" => (
                "l_room",
                polygon(&[(-3.0, -3.0), (5.0, -3.0), (5.0, 1.0), (1.0, 1.0), (1.0, 5.0), (-3.0, 5.0)]),
                alloc::vec![
                    pose(-2.0, -2.0, 0.0),
                    pose(4.0, -2.0, 0.0),
                    pose(4.0, 0.0, 0.0),
                    pose(0.0, 0.0, 0.0),
                    pose(0.0, 4.0, 0.0),
                    pose(-2.0, 4.0, 0.0),
                    pose(-2.0, -2.0, FRAC_PI_2),
                ],
            ),
            _ => return None,
        };
        Some(Scenario {
            name,
            env: Environment::new(segments).expect("built-in scenarios are valid"),
            waypoints,
            step: 0.1,
            turn_step: 0.2,
            sensor: SensorSpec::default(),
        })
    }

    pub fn trajectory(&self) -> Result<Vec<Pose2D>> {
        generate_trajectory(&self.waypoints, self.step, self.turn_step)
    }

    /// Renders the trajectory; with `frames` set the trajectory is cycled or
    /// truncated to exactly that many frames. Frame `i` uses noise stream `i`.
    pub fn simulate(&self, frames: Option<usize>) -> Result<Vec<SimFrame>> {
        self.sensor.validate()?;
        let poses = self.trajectory()?;
        let n = frames.unwrap_or(poses.len());
        Ok((0..n)
            .map(|i| {
                let pose = poses[i % poses.len()];
                let clean = raycast_row(&self.env, &pose, &self.sensor);
                SimFrame {
                    t: i as f64 * FRAME_PERIOD,
                    pose,
                    row: corrupt(&clean, &self.sensor, i as u64),
                }
            })
            .collect())
    }
}

/// True when no segment's supporting line comes within `EPS_DEGENERATE` of `p`.
pub fn off_all_walls(env: &Environment, p: Vec2) -> bool {
    env.ground_truth()
        .iter()
        .all(|w| libm::fabs(w.signed_distance(p)) >= EPS_DEGENERATE)
}

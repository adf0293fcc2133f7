//! Timing sweeps for the three pipeline stages.

use std::hint::black_box;
use std::io::{self, Write};
use std::time::Instant;

use wallmap_core::association::associate;
use wallmap_core::detector::detect_walls;
use wallmap_core::mapper::{ekf_update, WallMap};
use wallmap_core::pipeline::{process_frame, Clock, NullClock, Pipeline, PipelineConfig};
use wallmap_core::sim::{Scenario, SimFrame};
use wallmap_core::{Cov2, Landmark, Observation, Pose2D, Vec2, WallParam};

use crate::stats::{median, quantile, LinearFit};

/// Seconds since construction, from [`Instant`].
#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    start: Instant,
}

impl Default for WallClock {
    fn default() -> Self {
        Self { start: Instant::now() }
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Per-operation times for one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub stage: &'static str,
    pub n: usize,
    pub samples: Vec<f64>,
}

impl Series {
    pub fn median(&self) -> f64 {
        median(&self.samples)
    }

    pub fn p99(&self) -> f64 {
        quantile(&self.samples, 0.99)
    }
}

/// Median time against `n` across a sweep.
pub fn fit_medians(series: &[Series]) -> Option<LinearFit> {
    let x: Vec<f64> = series.iter().map(|s| s.n as f64).collect();
    let y: Vec<f64> = series.iter().map(Series::median).collect();
    LinearFit::fit(&x, &y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Timed samples per sweep point.
    pub reps: usize,
    pub detector_widths: Vec<usize>,
    pub association_sizes: Vec<usize>,
    pub ekf_sizes: Vec<usize>,
    /// Map size for the whole-frame benchmark.
    pub frame_landmarks: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            reps: 31,
            detector_widths: vec![80, 160, 320, 640, 1280],
            association_sizes: vec![1, 10, 100, 1000],
            ekf_sizes: (0..=10).map(|k| (10 * k).max(1)).collect(),
            frame_landmarks: 20,
        }
    }
}

/// Mean time of one call over a batch of `batch` calls.
fn timed(batch: usize, mut f: impl FnMut()) -> f64 {
    let t0 = Instant::now();
    for _ in 0..batch {
        f();
    }
    t0.elapsed().as_secs_f64() / batch as f64
}

/// `n` distinct walls on a deterministic spiral, none through the origin.
pub fn synthetic_landmarks(n: usize) -> Vec<Landmark> {
    (0..n)
        .map(|k| {
            let angle = 2.399_963_229_728_653 * k as f64;
            let rho = 1.0 + 0.5 * (k % 17) as f64 + 0.01 * (k / 17) as f64;
            Landmark {
                id: k as u64 + 1,
                mean: WallParam::from_vec(Vec2::from_angle(angle) * rho).expect("rho >= 1"),
                cov: Cov2::diag(0.01, 0.01).expect("positive"),
                hits: 1,
                first_seen: 0,
                last_seen: 0,
            }
        })
        .collect()
}

fn synthetic_map(n: usize) -> WallMap {
    WallMap::from_landmarks(synthetic_landmarks(n)).expect("ids increase")
}

fn noisy_frames(width: usize, cfg_sigma: f64) -> Vec<SimFrame> {
    let mut sc = Scenario::by_name("square_room").expect("built in");
    sc.sensor.samples = width;
    sc.sensor.sigma = cfg_sigma;
    sc.simulate(Some(40)).expect("valid scenario")
}

/// `detect_walls` on noisy square-room rows of each width.
pub fn bench_detector(cfg: &PipelineConfig, bench: &BenchConfig) -> Vec<Series> {
    bench
        .detector_widths
        .iter()
        .map(|&w| {
            let frames = noisy_frames(w, 0.01);
            let samples = (0..bench.reps)
                .map(|k| {
                    let row = &frames[k % frames.len()].row;
                    timed(1, || {
                        black_box(detect_walls(black_box(row), &cfg.detector));
                    })
                })
                .collect();
            Series {
                stage: "detect",
                n: w,
                samples,
            }
        })
        .collect()
}

/// Batch size keeping each timed sample near `work` landmark visits.
fn batch_for(n: usize, work: usize) -> usize {
    (work / n.max(1)).clamp(1, 1000)
}

/// `associate` of four observations against maps of each size.
pub fn bench_association(cfg: &PipelineConfig, bench: &BenchConfig) -> Vec<Series> {
    let pose = Pose2D::identity();
    bench
        .association_sizes
        .iter()
        .map(|&n| {
            let map = synthetic_map(n);
            let observations: Vec<Observation> = synthetic_landmarks(4)
                .iter()
                .map(|l| Observation {
                    wall: WallParam::from_vec(l.mean.as_vec() * 1.01).expect("off origin"),
                    inliers: 40,
                    extent: None,
                })
                .collect();
            let batch = batch_for(n, 20_000);
            let samples = (0..bench.reps)
                .map(|_| {
                    timed(batch, || {
                        black_box(associate(black_box(&observations), &map, &pose, &cfg.association, &cfg.mapper));
                    })
                })
                .collect();
            Series {
                stage: "associate",
                n,
                samples,
            }
        })
        .collect()
}

/// One `ekf_update` plus write-back into maps of each size. Every landmark
/// shares one wall so the arithmetic per update is the same at every size and
/// only the map grows. Sweep points are interleaved within each repetition so
/// slow drift in machine load spreads evenly over all sizes.
pub fn bench_ekf(cfg: &PipelineConfig, bench: &BenchConfig) -> Vec<Series> {
    let pose = Pose2D::new(0.2, -0.1, 0.3).expect("finite");
    let wall = synthetic_landmarks(2).swap_remove(1);
    let mut maps: Vec<WallMap> = bench
        .ekf_sizes
        .iter()
        .map(|&n| {
            let landmarks = (1..=n as u64).map(|id| Landmark { id, ..wall.clone() }).collect();
            WallMap::from_landmarks(landmarks).expect("ids increase")
        })
        .collect();
    let mut samples = vec![Vec::with_capacity(bench.reps); maps.len()];
    let mut k = 0usize;
    for rep in 0..bench.reps {
        // Alternate the sweep direction so drift within a repetition does not
        // masquerade as a trend in n.
        let order: Vec<usize> = if rep % 2 == 0 {
            (0..maps.len()).collect()
        } else {
            (0..maps.len()).rev().collect()
        };
        for i in order {
            let (map, out) = (&mut maps[i], &mut samples[i]);
            let n = map.len();
            out.push(timed(500, || {
                let lm = &map.landmarks()[(k * 7919) % n];
                let z = cfg.mapper.sensor_model.forward(&lm.mean, &pose).expect("off the pose");
                let z = Observation {
                    wall: WallParam::from_vec(z.as_vec() * 1.001).expect("off origin"),
                    inliers: 40,
                    extent: None,
                };
                let mut next = ekf_update(lm, &z, &pose, &cfg.mapper).expect("well-conditioned update");
                // Keep the landmark stationary so every sample does the same work.
                (next.mean, next.cov) = (lm.mean, lm.cov);
                map.replace(black_box(next)).expect("same id");
                k += 1;
            }));
        }
    }
    bench
        .ekf_sizes
        .iter()
        .zip(samples)
        .map(|(&n, samples)| Series { stage: "ekf", n, samples })
        .collect()
}

/// Whole `process_frame` calls over the noisy l-room replay, with the map
/// padded by distant synthetic walls to `bench.frame_landmarks`.
pub fn bench_frame(cfg: &PipelineConfig, bench: &BenchConfig) -> Series {
    let mut sc = Scenario::by_name("l_room").expect("built in");
    sc.sensor.sigma = 0.02;
    let frames = sc.simulate(None).expect("valid scenario");
    let mut warm = Pipeline::new(cfg.clone(), NullClock).expect("validated config");
    for f in &frames {
        warm.process(&f.pose, &f.row);
    }
    let mut landmarks = warm.into_map().landmarks().to_vec();
    let mut next_id = landmarks.last().map_or(1, |l| l.id + 1);
    for mut l in synthetic_landmarks(bench.frame_landmarks.saturating_sub(landmarks.len())) {
        l.mean = WallParam::from_vec(l.mean.as_vec() + l.mean.normal() * 50.0).expect("off origin");
        l.id = next_id;
        next_id += 1;
        landmarks.push(l);
    }
    landmarks.truncate(bench.frame_landmarks);
    let base = WallMap::from_landmarks(landmarks).expect("ids increase");

    let samples = frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut map = base.clone();
            let t0 = Instant::now();
            black_box(process_frame(&mut map, i as u64, &f.pose, &f.row, cfg, &NullClock));
            t0.elapsed().as_secs_f64()
        })
        .collect();
    Series {
        stage: "frame",
        n: bench.frame_landmarks,
        samples,
    }
}

pub fn write_table<'a>(w: &mut impl Write, series: impl IntoIterator<Item = &'a Series>) -> io::Result<()> {
    writeln!(w, "stage,n,median_s,p99_s,samples")?;
    for s in series {
        writeln!(w, "{},{},{:e},{:e},{}", s.stage, s.n, s.median(), s.p99(), s.samples.len())?;
    }
    Ok(())
}

use std::cell::Cell;

use wallmap_core::detector::DetectorConfig;
use wallmap_core::association::AssociationConfig;
use wallmap_core::mapper::{CovarianceUpdate, MapperConfig, MeasurementNoise, WallMap};
use wallmap_core::pipeline::*;
use wallmap_core::sim::{ground_truth_observation, raycast_row, Scenario};
use wallmap_core::{Cov2, Error, Landmark, Mat2, Pose2D, ScanRow, SensorModel, Vec2, WallParam};

fn hessian() -> PipelineConfig {
    PipelineConfig {
        mapper: MapperConfig {
            sensor_model: SensorModel::Hessian,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// Advances by one millisecond per reading.
struct Ticker(Cell<f64>);

impl Clock for Ticker {
    fn now(&self) -> f64 {
        let t = self.0.get();
        self.0.set(t + 1e-3);
        t
    }
}

#[test]
fn empty_row_is_a_no_op() {
    let mut p = Pipeline::new(hessian(), NullClock).unwrap();
    let m = p.process(&Pose2D::new(0.0, 0.0, 0.0).unwrap(), &ScanRow::invalid(640).unwrap());
    assert_eq!((m.n_observations, m.n_landmarks, m.n_new), (0, 0, 0));
    assert!(m.error.is_none());
    assert!(p.map().is_empty());
}

#[test]
fn first_square_room_frame_adds_visible_walls() {
    let sc = Scenario::by_name("square_room").unwrap();
    let frame = &sc.simulate(Some(1)).unwrap()[0];
    let visible = ground_truth_observation(&sc.env, &frame.pose, &sc.sensor, SensorModel::Hessian);
    assert_eq!(visible.len(), 2);
    let mut p = Pipeline::new(hessian(), NullClock).unwrap();
    let m = p.process(&frame.pose, &frame.row);
    assert_eq!(m.n_new, 2);
    assert_eq!(p.map().len(), 2);
}

#[test]
fn same_frame_twice_adds_nothing() {
    let sc = Scenario::by_name("square_room").unwrap();
    let frame = &sc.simulate(Some(1)).unwrap()[0];
    for innovation in [false, true] {
        let mut cfg = hessian();
        cfg.association.use_innovation_cov = innovation;
        let mut p = Pipeline::new(cfg, NullClock).unwrap();
        p.process(&frame.pose, &frame.row);
        let m = p.process(&frame.pose, &frame.row);
        assert_eq!(m.n_new, 0);
        assert_eq!(m.n_observations, 2);
        assert!(p.map().landmarks().iter().all(|l| l.hits == 2 && l.last_seen == 1));
    }
}

#[test]
fn replay_is_bit_identical() {
    let mut sc = Scenario::by_name("l_room").unwrap();
    sc.sensor.sigma = 0.02;
    sc.sensor.dropout = 0.02;
    let frames = sc.simulate(Some(120)).unwrap();
    let run = || {
        let mut p = Pipeline::new(hessian(), NullClock).unwrap();
        let metrics: Vec<FrameMetrics> = frames.iter().map(|f| p.process(&f.pose, &f.row)).collect();
        (p.into_map(), metrics)
    };
    let (a, ma) = run();
    let (b, mb) = run();
    assert_eq!(ma, mb);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.landmarks().iter().zip(b.landmarks()) {
        assert_eq!(x.mean.u().to_bits(), y.mean.u().to_bits());
        assert_eq!(x.mean.v().to_bits(), y.mean.v().to_bits());
        assert_eq!(x.cov.uv().to_bits(), y.cov.uv().to_bits());
    }
}

#[test]
fn landmark_count_never_decreases() {
    let mut sc = Scenario::by_name("square_room").unwrap();
    sc.sensor.sigma = 0.02;
    let mut p = Pipeline::new(hessian(), NullClock).unwrap();
    let mut last = 0;
    for f in sc.simulate(Some(100)).unwrap() {
        let m = p.process(&f.pose, &f.row);
        assert!(m.n_landmarks >= last);
        assert_eq!(m.n_landmarks, last + m.n_new);
        last = m.n_landmarks;
    }
}

#[test]
fn stage_timings_come_from_the_clock() {
    let sc = Scenario::by_name("corner").unwrap();
    let f = &sc.simulate(Some(1)).unwrap()[0];
    let mut p = Pipeline::new(hessian(), Ticker(Cell::new(0.0))).unwrap();
    let m = p.process(&f.pose, &f.row);
    for t in [m.t_detect, m.t_associate, m.t_update] {
        assert!((t - 1e-3).abs() < 1e-12);
    }
    let m = p.process(&f.pose, &f.row);
    assert!((m.total() - 3e-3).abs() < 1e-12);
    assert_eq!(m.frame, 1);
}

#[test]
fn null_clock_reports_zero() {
    let sc = Scenario::by_name("corner").unwrap();
    let f = &sc.simulate(Some(1)).unwrap()[0];
    let mut p = Pipeline::new(hessian(), NullClock).unwrap();
    assert_eq!(p.process(&f.pose, &f.row).total(), 0.0);
}

#[test]
fn failed_update_leaves_map_untouched() {
    // A needle-shaped prior and a near-exact sensor: the standard update loses
    // positive semi-definiteness on the first landmark, so the frame must not
    // touch the second one either.
    let rot = Mat2::rotation(0.3);
    let needle = Cov2::new(rot * Mat2::diag(1e4, 1e-4) * rot.transpose()).unwrap();
    let lm = |id, u, v, cov| Landmark {
        id,
        mean: WallParam::new(u, v).unwrap(),
        cov,
        hits: 3,
        first_seen: 0,
        last_seen: 0,
    };
    let mut map = WallMap::from_landmarks(vec![lm(1, 2.0, 0.5, needle), lm(2, 0.0, 2.0, Cov2::diag(0.01, 0.01).unwrap())]).unwrap();
    let before = map.clone();
    let cfg = PipelineConfig {
        mapper: MapperConfig {
            sensor_model: SensorModel::Paper,
            noise: MeasurementNoise::isotropic(1e-6).unwrap(),
            covariance_update: CovarianceUpdate::Standard,
            ..Default::default()
        },
        association: AssociationConfig {
            gate: 1e12,
            use_innovation_cov: true,
        },
        ..Default::default()
    };
    let wall = |c: Vec2| (0..80).map(move |i| Some(c + c.perp() * ((i as f64 / 79.0 - 0.5) * 0.8 / c.norm())));
    let samples: Vec<_> = wall(Vec2::new(2.0, 0.5)).chain([None]).chain(wall(Vec2::new(0.0, 2.0))).collect();
    let m = process_frame(&mut map, 5, &Pose2D::new(0.0, 0.0, 0.0).unwrap(), &ScanRow::new(samples).unwrap(), &cfg, &NullClock);
    assert_eq!(m.n_observations, 2);
    assert!(matches!(m.error, Some(Error::NumericalFailure(_))), "{:?}", m.error);
    assert_eq!((m.n_new, m.n_landmarks), (0, 2));
    assert_eq!(map, before);
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = PipelineConfig {
        detector: DetectorConfig {
            min_inliers: 1,
            ..Default::default()
        },
        ..Default::default()
    };
    assert!(Pipeline::new(cfg, NullClock).is_err());
    let cfg = PipelineConfig {
        mapper: MapperConfig {
            kappa_init: 0.5,
            ..Default::default()
        },
        ..Default::default()
    };
    assert!(Pipeline::new(cfg, NullClock).is_err());
}

#[test]
fn frontal_wall_replay_converges() {
    let sc = Scenario::by_name("single_wall").unwrap();
    let mut p = Pipeline::new(hessian(), NullClock).unwrap();
    for f in sc.simulate(None).unwrap() {
        p.process(&f.pose, &f.row);
    }
    assert_eq!(p.map().len(), 1);
    let lm = &p.map().landmarks()[0];
    assert!((lm.mean.as_vec() - sc.env.ground_truth()[0].as_vec()).norm() < 1e-9);
    let row = raycast_row(&sc.env, &Pose2D::new(0.0, 0.0, 0.0).unwrap(), &sc.sensor);
    assert!(row.valid_count() > 0);
}

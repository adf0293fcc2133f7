use proptest::prelude::*;
use wallmap_core::sensor_model::*;
use wallmap_core::{LineMC, Mat2, Pose2D, Vec2, WallParam};

const H: f64 = 1e-6;

fn wall() -> impl Strategy<Value = WallParam> {
    (0.2f64..8.0, -3.14f64..3.14).prop_map(|(rho, a)| WallParam::from_vec(Vec2::from_angle(a) * rho).unwrap())
}

fn pose() -> impl Strategy<Value = Pose2D> {
    (-5.0f64..5.0, -5.0f64..5.0, -3.14f64..3.14).prop_map(|(x, y, t)| Pose2D::new(x, y, t).unwrap())
}

/// Central differences of `f` with respect to (u, v), column by column.
fn numeric_jacobian(w: &WallParam, f: impl Fn(&WallParam) -> Vec2) -> Mat2 {
    let col = |d: Vec2| {
        let plus = WallParam::from_vec(w.as_vec() + d * H).unwrap();
        let minus = WallParam::from_vec(w.as_vec() - d * H).unwrap();
        (f(&plus) - f(&minus)) * (1.0 / (2.0 * H))
    };
    let (a, b) = (col(Vec2::new(1.0, 0.0)), col(Vec2::new(0.0, 1.0)));
    Mat2::new(a.x, b.x, a.y, b.y)
}

fn rel_err(a: &Mat2, b: &Mat2) -> f64 {
    let scale = b.max_abs_diff(&Mat2::ZERO).max(1.0);
    a.max_abs_diff(b) / scale
}

/// Exact sensor-frame closest point: map two points of the line and drop the
/// perpendicular from the sensor origin.
fn foot_of_perpendicular(w: &WallParam, pose: &Pose2D) -> Vec2 {
    let dir = w.normal().perp();
    let a = pose.to_sensor(w.as_vec());
    let b = pose.to_sensor(w.as_vec() + dir * 3.0);
    let d = b - a;
    a - d * (a.dot(d) / d.norm_sq())
}

fn close(a: Vec2, b: Vec2, tol: f64) -> bool {
    (a - b).norm() <= tol
}

#[test]
fn forward_paper_examples() {
    let w = WallParam::new(2.0, 0.0).unwrap();
    let z = forward_paper(&w, &Pose2D::new(0.0, 0.0, 0.0).unwrap()).unwrap();
    assert!(close(z.as_vec(), Vec2::new(2.0, 0.0), 1e-15));
    let z = forward_paper(&w, &Pose2D::new(1.0, 0.0, 0.0).unwrap()).unwrap();
    assert!(close(z.as_vec(), Vec2::new(1.0, 0.0), 1e-15));
    let w = WallParam::new(0.0, 2.0).unwrap();
    let z = forward_paper(&w, &Pose2D::new(0.0, 0.0, core::f64::consts::FRAC_PI_2).unwrap()).unwrap();
    assert!(close(z.as_vec(), Vec2::new(2.0, 0.0), 1e-15));
}

#[test]
fn inverse_paper_examples() {
    let z = WallParam::new(2.0, 0.0).unwrap();
    let w = inverse_paper(&z, &Pose2D::new(0.0, 0.0, 0.0).unwrap()).unwrap();
    assert!(close(w.as_vec(), Vec2::new(2.0, 0.0), 1e-15));
    let z = WallParam::new(1.0, 0.0).unwrap();
    let w = inverse_paper(&z, &Pose2D::new(1.0, 0.0, 0.0).unwrap()).unwrap();
    assert!(close(w.as_vec(), Vec2::new(2.0, 0.0), 1e-15));
}

#[test]
fn forward_paper_flags_sensor_at_closest_point() {
    let w = WallParam::new(2.0, 1.0).unwrap();
    assert!(forward_paper(&w, &Pose2D::new(2.0, 1.0, 0.3).unwrap()).is_err());
}

#[test]
fn hessian_translation_along_wall() {
    let w = WallParam::new(2.0, 0.0).unwrap();
    let p = Pose2D::new(0.0, 1.0, 0.0).unwrap();
    let exact = forward_hessian(&w, &p).unwrap();
    assert!(close(exact.as_vec(), Vec2::new(2.0, 0.0), 1e-15));
    assert!(close(exact.as_vec(), foot_of_perpendicular(&w, &p), 1e-12));
    // The point model moves the closest point with the sensor.
    let paper = forward_paper(&w, &p).unwrap();
    assert!(close(paper.as_vec(), Vec2::new(2.0, -1.0), 1e-15));
    assert!(!close(paper.as_vec(), foot_of_perpendicular(&w, &p), 0.5));
}

#[test]
fn hessian_translation_along_normal() {
    let w = WallParam::new(2.0, 0.0).unwrap();
    let p = Pose2D::new(1.0, 0.0, 0.0).unwrap();
    assert!(close(forward_hessian(&w, &p).unwrap().as_vec(), Vec2::new(1.0, 0.0), 1e-15));
}

#[test]
fn hessian_flags_sensor_on_wall() {
    let w = WallParam::new(2.0, 0.0).unwrap();
    assert!(forward_hessian(&w, &Pose2D::new(2.0, 7.0, 1.0).unwrap()).is_err());
    // Beyond the wall the closest point is still well defined.
    let z = forward_hessian(&w, &Pose2D::new(3.0, 0.0, 0.0).unwrap()).unwrap();
    assert!(close(z.as_vec(), Vec2::new(-1.0, 0.0), 1e-15));
}

#[test]
fn jacobian_paper_examples() {
    let j = jacobian_paper(&Pose2D::new(3.0, -1.0, 0.0).unwrap());
    assert_eq!(j, Mat2::IDENTITY);
    let j = jacobian_paper(&Pose2D::new(0.0, 0.0, core::f64::consts::FRAC_PI_2).unwrap());
    assert!(j.max_abs_diff(&Mat2::new(0.0, 1.0, -1.0, 0.0)) < 1e-15);
}

#[test]
fn jacobian_hessian_identity_pose() {
    let w = WallParam::new(2.0, 0.0).unwrap();
    let p = Pose2D::new(0.0, 0.0, 0.0).unwrap();
    let numeric = numeric_jacobian(&w, |w| forward_hessian(w, &p).unwrap().as_vec());
    assert!(rel_err(&jacobian_hessian(&w, &p), &numeric) < 1e-5);
}

#[test]
fn mc_to_uv_examples() {
    let uv = mc_to_uv(&LineMC::new(0.0, 2.0).unwrap()).unwrap();
    assert!(close(uv.as_vec(), Vec2::new(0.0, 2.0), 1e-15));
    let uv = mc_to_uv(&LineMC::new(1.0, 2.0).unwrap()).unwrap();
    assert!(close(uv.as_vec(), Vec2::new(-1.0, 1.0), 1e-15));
    assert!(mc_to_uv(&LineMC::new(3.0, 1e-9).unwrap()).is_err());
}

#[test]
fn models_are_selectable() {
    let w = WallParam::new(2.0, 0.0).unwrap();
    let p = Pose2D::new(0.0, 1.0, 0.0).unwrap();
    assert_eq!(SensorModel::Paper.forward(&w, &p).unwrap(), forward_paper(&w, &p).unwrap());
    assert_eq!(SensorModel::Hessian.forward(&w, &p).unwrap(), forward_hessian(&w, &p).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn paper_round_trip(w in wall(), p in pose()) {
        if let Ok(z) = forward_paper(&w, &p) {
            let back = inverse_paper(&z, &p).unwrap();
            prop_assert!(close(back.as_vec(), w.as_vec(), 1e-9));
        }
    }

    #[test]
    fn paper_round_trip_from_sensor(z in wall(), p in pose()) {
        if let Ok(w) = inverse_paper(&z, &p) {
            prop_assert!(close(forward_paper(&w, &p).unwrap().as_vec(), z.as_vec(), 1e-9));
        }
    }

    #[test]
    fn hessian_round_trip(w in wall(), p in pose()) {
        if let Ok(z) = forward_hessian(&w, &p) {
            if z.rho() > 1e-3 {
                let back = inverse_hessian(&z, &p).unwrap();
                prop_assert!(close(back.as_vec(), w.as_vec(), 1e-9 * w.rho().max(1.0)));
            }
        }
    }

    #[test]
    fn jacobian_paper_matches_differences(w in wall(), p in pose()) {
        prop_assume!(forward_paper(&w, &p).map(|z| z.rho() > 1e-3).unwrap_or(false));
        let numeric = numeric_jacobian(&w, |w| forward_paper(w, &p).map(|z| z.as_vec()).unwrap_or(w.as_vec()));
        prop_assert!(rel_err(&jacobian_paper(&p), &numeric) < 1e-6);
    }

    #[test]
    fn jacobian_paper_orthonormal(p in pose()) {
        let j = jacobian_paper(&p);
        prop_assert!((j.transpose() * j).max_abs_diff(&Mat2::IDENTITY) < 1e-12);
    }

    #[test]
    fn jacobian_hessian_matches_differences(w in wall(), p in pose()) {
        let rho_s = w.rho() - w.normal().dot(p.position());
        prop_assume!(rho_s.abs() > 1e-2);
        let numeric = numeric_jacobian(&w, |w| forward_hessian(w, &p).unwrap().as_vec());
        prop_assert!(rel_err(&jacobian_hessian(&w, &p), &numeric) < 1e-5);
    }

    #[test]
    fn pure_rotation_jacobians_agree(w in wall(), t in -3.14f64..3.14) {
        let p = Pose2D::new(0.0, 0.0, t).unwrap();
        prop_assert!(jacobian_hessian(&w, &p).max_abs_diff(&jacobian_paper(&p)) < 1e-12);
    }

    #[test]
    fn hessian_is_foot_of_perpendicular(w in wall(), p in pose()) {
        if let Ok(z) = forward_hessian(&w, &p) {
            prop_assert!(close(z.as_vec(), foot_of_perpendicular(&w, &p), 1e-9));
        }
    }

    #[test]
    fn models_agree_for_translation_along_normal(w in wall(), s in -3.0f64..3.0, t in -3.14f64..3.14) {
        let along = w.normal() * s;
        let p = Pose2D::new(along.x, along.y, t).unwrap();
        prop_assume!(p.position().cross(w.normal()).abs() < 1e-12);
        if let (Ok(a), Ok(b)) = (forward_paper(&w, &p), forward_hessian(&w, &p)) {
            prop_assert!(close(a.as_vec(), b.as_vec(), 1e-9));
        }
    }

    #[test]
    fn mc_to_uv_on_line_and_perpendicular(m in -50.0f64..50.0, c in prop_oneof![-10.0f64..-1e-3, 1e-3f64..10.0]) {
        let uv = mc_to_uv(&LineMC::new(m, c).unwrap()).unwrap();
        let (u, v) = (uv.u(), uv.v());
        let scale = c.abs().max(1.0) * (1.0 + m.abs());
        prop_assert!((v - (m * u + c)).abs() <= 1e-12 * scale);
        prop_assert!((u + m * v).abs() <= 1e-12 * scale);
    }
}

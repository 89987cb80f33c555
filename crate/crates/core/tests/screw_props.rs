mod common;

use nalgebra::{DMatrix, DVector, Matrix4};
use proptest::prelude::*;
use tendon_statics::chain::{assemble_operators, build_chain};
use tendon_statics::screw::{ad, adjoint, exp_screw, hat, log_pose, Mat6, Pose, Rotation, ScrewAxis, Twist, Vec3};
use tendon_statics::ModelConfig;

fn unit_vec() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-2)
        .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalize())
}

fn vec3(scale: f64) -> impl Strategy<Value = Vec3> {
    (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn pose() -> impl Strategy<Value = Pose> {
    (unit_vec(), -3.0..3.0f64, vec3(1.0)).prop_map(|(a, t, p)| Pose::new(Rotation::from_axis_angle(&a, t), p))
}

fn screw_matrix(s: &ScrewAxis, theta: f64) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(hat(&s.twist().angular) * theta));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(s.twist().linear * theta));
    m
}

proptest! {
    #[test]
    fn exp_matches_dense_exponential(w in unit_vec(), v in vec3(2.0), theta in -3.0..3.0f64) {
        let s = ScrewAxis::new(Twist::new(w, v)).unwrap();
        let closed = exp_screw(&s, theta).to_homogeneous();
        let dense = common::expm4(&screw_matrix(&s, theta));
        prop_assert!((closed - dense).amax() < 1e-10);
    }

    #[test]
    fn exp_log_round_trip(w in unit_vec(), v in vec3(2.0), theta in 0.0..3.1f64) {
        let s = ScrewAxis::new(Twist::new(w, v)).unwrap();
        let t = exp_screw(&s, theta);
        let (s2, theta2) = log_pose(&t).unwrap();
        prop_assert!(exp_screw(&s2, theta2).max_abs_diff(&t) < 1e-9);
    }

    #[test]
    fn log_exp_round_trip(t in pose()) {
        if let Ok((s, theta)) = log_pose(&t) {
            prop_assert!(exp_screw(&s, theta).max_abs_diff(&t) < 1e-9);
        }
    }

    #[test]
    fn adjoint_is_a_homomorphism(a in pose(), b in pose()) {
        let lhs = adjoint(&(a * b));
        let rhs = adjoint(&a) * adjoint(&b);
        prop_assert!((lhs - rhs).amax() < 1e-10);
        prop_assert!((adjoint(&a.inverse()) * adjoint(&a) - Mat6::identity()).amax() < 1e-10);
    }

    #[test]
    fn adjoint_conjugates_the_bracket(t in pose(), v in vec3(1.0), w in vec3(1.0)) {
        // Ad_T [V, W] = [Ad_T V, Ad_T W]
        let v = Twist::new(v, w.cross(&v));
        let w = Twist::new(w, v.angular);
        let adt = adjoint(&t);
        let lhs = adt * ad(&v) * w.to_vector();
        let rhs = ad(&Twist::from_vector(&(adt * v.to_vector()))) * (adt * w.to_vector());
        prop_assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn bracket_with_itself_vanishes(a in vec3(2.0), b in vec3(2.0)) {
        let v = Twist::new(a, b);
        prop_assert!((ad(&v) * v.to_vector()).amax() < 1e-14);
    }

    #[test]
    fn l_inverts_i_minus_w(n in 1usize..=8, seed in 0u64..1000) {
        let m = build_chain(&ModelConfig::uniform(1, n, 0.03, 0.01, 0.5)).unwrap();
        let theta = DVector::from_fn(n, |i, _| ((seed as f64 + 1.0) * (i as f64 + 0.7)).sin());
        let ops = assemble_operators(&m, &theta).unwrap();
        let eye = DMatrix::<f64>::identity(6 * n, 6 * n);
        prop_assert!((&ops.l * (&eye - &ops.w) - &eye).amax() < 1e-10);
        // W is nilpotent of order n, so the Neumann series terminates.
        let mut neumann = eye.clone();
        let mut power = eye.clone();
        for _ in 1..n {
            power = &power * &ops.w;
            neumann += &power;
        }
        prop_assert!((neumann - &ops.l).amax() < 1e-10);
    }
}

#[test]
fn exp_of_pure_translation() {
    let s = ScrewAxis::new(Twist::new(Vec3::zeros(), Vec3::x())).unwrap();
    let t = exp_screw(&s, 0.25);
    assert_eq!(t.position, Vec3::new(0.25, 0.0, 0.0));
    let (s2, d) = log_pose(&t).unwrap();
    assert_eq!(s2, s);
    assert!((d - 0.25).abs() < 1e-15);
}

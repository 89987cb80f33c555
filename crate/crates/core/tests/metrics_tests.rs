use proptest::prelude::*;
use tendon_statics::metrics::rotation_distance;
use tendon_statics::{pose_error, Pose, Rotation, Vec3};

fn rot(ax: f64, ay: f64, az: f64, angle: f64) -> Rotation {
    let axis = Vec3::new(ax, ay, az);
    if axis.norm() < 1e-6 {
        return Rotation::identity();
    }
    Rotation::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
}

#[test]
fn angle_matches_axis_angle_construction() {
    for angle in [1e-3, 0.1, 1.0, 2.5, 3.1] {
        let r = rot(0.3, -0.8, 0.5, angle);
        let e = pose_error(&Pose::from_rotation(r), &Pose::identity(), &Pose::identity());
        assert!((e.e_theta - angle).abs() < 1e-7, "{angle}: {}", e.e_theta);
    }
}

#[test]
fn relative_errors_use_reference_travel() {
    let reference = Pose::new(rot(0.0, 1.0, 0.0, 0.5), Vec3::new(0.2, 0.0, 0.4));
    let home = Pose::from_translation(Vec3::new(0.0, 0.0, 0.4));
    let est = Pose::new(rot(0.0, 1.0, 0.0, 0.45), Vec3::new(0.19, 0.0, 0.4));
    let e = pose_error(&est, &reference, &home);
    assert!((e.e_p - 0.01).abs() < 1e-12);
    assert!((e.eps_p.unwrap() - 0.05).abs() < 1e-12);
    assert!((e.e_theta - 0.05).abs() < 1e-7);
    assert!((e.eps_theta.unwrap() - 0.1).abs() < 1e-6);
}

proptest! {
    #[test]
    fn invariant_under_common_left_motion(
        a in prop::array::uniform3(-1.0..1.0f64), ta in 0.0..3.0f64,
        b in prop::array::uniform3(-1.0..1.0f64), tb in 0.0..3.0f64,
        g in prop::array::uniform3(-1.0..1.0f64), tg in 0.0..3.0f64,
        pa in prop::array::uniform3(-0.5..0.5f64), pb in prop::array::uniform3(-0.5..0.5f64),
        pg in prop::array::uniform3(-0.5..0.5f64),
    ) {
        let x = Pose::new(rot(a[0], a[1], a[2], ta), Vec3::from(pa));
        let y = Pose::new(rot(b[0], b[1], b[2], tb), Vec3::from(pb));
        let g = Pose::new(rot(g[0], g[1], g[2], tg), Vec3::from(pg));
        let e0 = pose_error(&x, &y, &Pose::identity());
        let e1 = pose_error(&(g * x), &(g * y), &Pose::identity());
        prop_assert!((e0.e_p - e1.e_p).abs() < 1e-12);
        prop_assert!((e0.e_theta - e1.e_theta).abs() < 1e-6);
    }

    #[test]
    fn rotation_distance_is_symmetric_and_bounded(
        a in prop::array::uniform3(-1.0..1.0f64), ta in -3.0..3.0f64,
        b in prop::array::uniform3(-1.0..1.0f64), tb in -3.0..3.0f64,
    ) {
        let ra = rot(a[0], a[1], a[2], ta);
        let rb = rot(b[0], b[1], b[2], tb);
        let d = rotation_distance(ra.matrix(), rb.matrix());
        prop_assert!((0.0..=std::f64::consts::PI).contains(&d));
        prop_assert!((d - rotation_distance(rb.matrix(), ra.matrix())).abs() < 1e-12);
    }
}

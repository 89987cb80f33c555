mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use tendon_statics::chain::build_chain;
use tendon_statics::pcc::{discretized_joint_angles, pcc_forward, pcc_from_tip_quaternion, pcc_segment_poses, pcc_tendon_lengths, segment_lengths, ArcParams};
use tendon_statics::screw::{Rotation, Vec3};
use tendon_statics::tendon::geometric_tendon_length;
use tendon_statics::{ChainModel, ModelConfig};

fn arcs_for(m: &ChainModel, bends: &[(f64, f64)]) -> Vec<ArcParams> {
    segment_lengths(m).iter().zip(bends).map(|(s, (beta, phi))| ArcParams { kappa: beta / s, phi: *phi, length: *s }).collect()
}

fn discretization_error(beads: usize, bends: &[(f64, f64)]) -> f64 {
    let h = 0.472 / beads as f64;
    let mut c = ModelConfig::uniform(2, beads, h, 0.01, 0.5);
    let r = 0.022;
    let d = r / 2f64.sqrt();
    for (i, o) in [[r, 0.0], [0.0, r], [-r, 0.0], [0.0, -r]].iter().enumerate() {
        c = c.with_tendon(i as u32 + 1, 1, *o);
    }
    for (i, o) in [[d, d], [-d, d], [-d, -d], [d, -d]].iter().enumerate() {
        c = c.with_tendon(i as u32 + 5, 2, *o);
    }
    let m = build_chain(&c).unwrap();
    let arcs = arcs_for(&m, bends);
    let ideal = pcc_tendon_lengths(&m, &arcs).unwrap();
    let theta = discretized_joint_angles(&m, &arcs).unwrap();
    m.tendons()
        .iter()
        .zip(ideal.iter())
        .map(|(t, l)| (geometric_tendon_length(&m, &theta, t) - l).abs() / l)
        .fold(0.0, f64::max)
}

#[test]
fn ideal_lengths_match_discretized_chain() {
    for bends in [[(0.6, 0.0), (0.4, 1.2)], [(1.0, -2.0), (0.3, 0.7)], [(0.2, 0.4), (0.9, std::f64::consts::PI)]] {
        let e = discretization_error(16, &bends);
        assert!(e <= 5e-3, "{bends:?}: {e}");
    }
}

#[test]
fn discretization_error_converges_at_second_order() {
    let bends = [(0.8, 0.0), (0.5, std::f64::consts::FRAC_PI_2)];
    let coarse = discretization_error(8, &bends);
    let fine = discretization_error(16, &bends);
    let finer = discretization_error(32, &bends);
    let orders = [(coarse / fine).log2(), (fine / finer).log2()];
    assert!(orders.iter().all(|o| *o >= 2.0 - 0.05), "{coarse} {fine} {finer}: orders {orders:?}");
}

#[test]
fn straight_arcs_give_home_lengths() {
    let m = common::paper_platform();
    let l = pcc_tendon_lengths(&m, &arcs_for(&m, &[(0.0, 0.3), (0.0, -1.0)])).unwrap();
    for (t, li) in m.tendons().iter().zip(l.iter()) {
        assert_eq!(*li, t.rest_length);
    }
}

#[test]
fn antagonist_length_changes_are_symmetric() {
    let m = common::paper_platform();
    let arcs = arcs_for(&m, &[(0.7, 0.0), (0.0, 0.0)]);
    let l = pcc_tendon_lengths(&m, &arcs).unwrap();
    let l0 = DVector::from_iterator(8, m.tendons().iter().map(|t| t.rest_length));
    let d = l - l0;
    assert!((d[0] + d[2]).abs() < 1e-15);
    assert!((d[0] + 0.7 * 0.022).abs() < 1e-15);
}

#[test]
fn wrong_segment_count_is_rejected() {
    let m = common::paper_platform();
    assert!(pcc_tendon_lengths(&m, &[ArcParams { kappa: 0.0, phi: 0.0, length: 0.472 }]).is_err());
}

proptest! {
    #[test]
    fn quaternion_inverse_recovers_arcs(b1 in 1e-3..3.0f64, p1 in -3.1..3.1f64, b2 in 1e-3..3.0f64, p2 in -3.1..3.1f64) {
        let s = [0.472, 0.3];
        let arcs = [ArcParams { kappa: b1 / s[0], phi: p1, length: s[0] }, ArcParams { kappa: b2 / s[1], phi: p2, length: s[1] }];
        let tips: Vec<[f64; 4]> = pcc_segment_poses(&arcs).iter().map(|p| {
            let q = p.rotation.to_quaternion();
            [q.w, q.i, q.j, q.k]
        }).collect();
        let back = pcc_from_tip_quaternion(&tips, &s).unwrap();
        for (a, b) in arcs.iter().zip(&back) {
            prop_assert!((a.kappa - b.kappa).abs() * a.length < 1e-9);
            prop_assert!((a.phi - b.phi).abs() < 1e-9);
        }
        prop_assert!(pcc_forward(&back).max_abs_diff(&pcc_forward(&arcs)) < 1e-9);
    }

    #[test]
    fn azimuth_rotates_the_tip_about_z(beta in -2.0..2.0f64, phi in -3.0..3.0f64, delta in -1.0..1.0f64) {
        let a = pcc_forward(&[ArcParams { kappa: beta / 0.4, phi, length: 0.4 }]);
        let b = pcc_forward(&[ArcParams { kappa: beta / 0.4, phi: phi + delta, length: 0.4 }]);
        let rz = Rotation::from_axis_angle(&Vec3::z(), delta);
        prop_assert!((rz * a.position - b.position).norm() < 1e-12);
    }
}

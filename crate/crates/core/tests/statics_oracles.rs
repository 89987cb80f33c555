mod common;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tendon_statics::chain::build_chain;
use tendon_statics::config::JointAxis;
use tendon_statics::statics::{coriolis, gravity_torque, mass_matrix};
use tendon_statics::{dtau_df, dtau_dtheta, torque_residual, ChainModel, ModelConfig, TendonDirection, Vec3, Wrench};

const G: f64 = 9.81;

fn pendulum() -> ChainModel {
    let mut c = ModelConfig::uniform(1, 1, 0.04, 0.3, 0.2);
    c.geometry.first_joint_axis = JointAxis::Y;
    c.gravity = [0.0, 0.0, -G];
    build_chain(&c).unwrap()
}

fn random_theta(rng: &mut ChaCha8Rng, n: usize, range: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-range..range))
}

fn random_f(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(0.0..5.0))
}

#[test]
fn pendulum_gravity_torque_closed_form() {
    let m = pendulum();
    let (mass, d) = (0.3, 0.02);
    for &th in &[0.0, 0.3, -0.9, 1.4] {
        let g = gravity_torque(&m, &DVector::from_element(1, th)).unwrap()[0];
        assert!((g + mass * G * d * f64::sin(th)).abs() < 1e-12, "theta {th}: {g}");
        let j = dtau_dtheta(&m, &DVector::from_element(1, th), &DVector::zeros(0), &Wrench::zero(), true).unwrap()[(0, 0)];
        assert!((j - (0.2 - mass * G * d * f64::cos(th))).abs() < 1e-12);
    }
}

#[test]
fn gravity_torque_is_the_potential_gradient() {
    let m = common::paper_platform();
    let unloaded = m.with_stiffness(&vec![0.0; 32]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let th = random_theta(&mut rng, 32, 0.4);
        let fd = common::central_difference(&th, 1e-6, |t| DVector::from_element(1, common::potential_energy(&unloaded, t)));
        let g = gravity_torque(&m, &th).unwrap();
        let err = (&g - fd.transpose().column(0)).amax() / g.amax();
        assert!(err < 1e-6, "relative error {err}");
    }
}

#[test]
fn joint_jacobian_matches_finite_differences() {
    let base = common::paper_platform();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for dir in [TendonDirection::BeadAxis, TendonDirection::Chord] {
        let m = base.with_tendon_direction(dir);
        for _ in 0..100 {
            let th = random_theta(&mut rng, 32, 0.3);
            let f = random_f(&mut rng, 8);
            let j = dtau_dtheta(&m, &th, &f, &Wrench::zero(), true).unwrap();
            let fd = common::central_difference(&th, 1e-6, |t| torque_residual(&m, t, &f, &Wrench::zero()).unwrap().tau);
            let tol = 1e-6 * (1.0 + fd.amax());
            assert!((&j - &fd).amax() <= tol, "{dir:?}: {}", (&j - &fd).amax());
        }
    }
}

#[test]
fn quasi_jacobian_omits_only_the_direction_term() {
    let m = common::paper_platform().with_tendon_direction(TendonDirection::Chord);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let th = random_theta(&mut rng, 32, 0.3);
    let f = random_f(&mut rng, 8);
    let exact = dtau_dtheta(&m, &th, &f, &Wrench::zero(), true).unwrap();
    let quasi = dtau_dtheta(&m, &th, &f, &Wrench::zero(), false).unwrap();
    let diff = &exact - &quasi;
    // Only the anchor joints of the two segments see a direction change.
    for j in 0..32 {
        if j != 15 && j != 31 {
            assert_eq!(diff.column(j).amax(), 0.0);
        }
    }
    assert!(diff.amax() > 0.0);
}

#[test]
fn external_wrench_jacobian_matches_finite_differences() {
    let m = common::paper_platform();
    let w = Wrench::new(Vec3::new(0.01, -0.02, 0.005), Vec3::new(0.3, 0.1, -0.4));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let th = random_theta(&mut rng, 32, 0.3);
    let f = random_f(&mut rng, 8);
    let j = dtau_dtheta(&m, &th, &f, &w, false).unwrap();
    let fd = common::central_difference(&th, 1e-6, |t| torque_residual(&m, t, &f, &w).unwrap().tau);
    assert!((&j - &fd).amax() <= 1e-6 * (1.0 + fd.amax()));
}

#[test]
fn single_joint_tendon_equilibrium() {
    let (r, f, k) = (0.022, 3.0, 0.5);
    let mut c = ModelConfig::uniform(1, 1, 0.0295, 0.01, k).with_tendon(1, 1, [r, 0.0]);
    c.geometry.first_joint_axis = JointAxis::Y;
    let m = build_chain(&c).unwrap();
    let th = DVector::from_element(1, r * f / k);
    let res = torque_residual(&m, &th, &DVector::from_element(1, f), &Wrench::zero()).unwrap();
    assert!(res.tau.amax() <= 1e-12);
}

#[test]
fn residual_is_affine_in_tension_and_load() {
    let m = common::paper_platform();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let th = random_theta(&mut rng, 32, 0.3);
    let (f1, f2) = (random_f(&mut rng, 8), random_f(&mut rng, 8));
    let zero = DVector::zeros(8);
    let tau = |f: &DVector<f64>, w: &Wrench| torque_residual(&m, &th, f, w).unwrap().tau;
    let z = Wrench::zero();
    let t0 = tau(&zero, &z);
    let lhs = tau(&(&f1 * 0.7 + &f2 * 1.9), &z) - &t0;
    let rhs = (tau(&f1, &z) - &t0) * 0.7 + (tau(&f2, &z) - &t0) * 1.9;
    assert!((lhs - rhs).amax() < 1e-12);

    let w1 = Wrench::new(Vec3::new(0.1, 0.0, 0.2), Vec3::new(0.0, 1.0, 0.0));
    let w2 = Wrench::new(Vec3::new(0.0, -0.3, 0.0), Vec3::new(2.0, 0.0, 1.0));
    let sum = Wrench::new(w1.moment + w2.moment, w1.force + w2.force);
    let lhs = tau(&zero, &sum) - &t0;
    let rhs = (tau(&zero, &w1) - &t0) + (tau(&zero, &w2) - &t0);
    assert!((lhs - rhs).amax() < 1e-12);
}

#[test]
fn breakdown_without_tendons_or_load() {
    let m = common::paper_platform();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let th = random_theta(&mut rng, 32, 0.3);
    let r = torque_residual(&m, &th, &DVector::zeros(8), &Wrench::zero()).unwrap();
    let expected = gravity_torque(&m, &th).unwrap() + m.stiffness_vector().component_mul(&th);
    assert!((&r.tau - expected).amax() < 1e-14);
    assert_eq!(r.tendon.amax(), 0.0);
    assert!((r.norm - r.tau.norm()).abs() == 0.0);
}

#[test]
fn tension_jacobian_column_probe() {
    let m = common::paper_platform();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let th = random_theta(&mut rng, 32, 0.3);
    let d = dtau_df(&m, &th).unwrap();
    let t0 = torque_residual(&m, &th, &DVector::zeros(8), &Wrench::zero()).unwrap().tau;
    for i in 0..8 {
        let mut e = DVector::zeros(8);
        e[i] = 1.0;
        let probe = torque_residual(&m, &th, &e, &Wrench::zero()).unwrap().tau - &t0;
        assert!((d.column(i) - probe).amax() < 1e-14);
    }
}

#[test]
fn antagonist_columns_cancel_on_straight_chain() {
    let m = common::paper_platform();
    let d = dtau_df(&m, &m.zero_configuration()).unwrap();
    for (a, b) in [(0, 2), (1, 3), (4, 6), (5, 7)] {
        assert!((d.column(a) + d.column(b)).amax() < 1e-15);
    }
}

#[test]
fn no_tendons_gives_empty_tension_jacobian() {
    let m = build_chain(&ModelConfig::uniform(1, 3, 0.03, 0.01, 0.5)).unwrap();
    let d = dtau_df(&m, &m.zero_configuration()).unwrap();
    assert_eq!(d.shape(), (3, 0));
}

#[test]
fn mass_matrix_is_symmetric_positive_definite() {
    let m = common::paper_platform();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let mm = mass_matrix(&m, &random_theta(&mut rng, 32, 0.5)).unwrap();
        assert!((&mm - mm.transpose()).amax() <= 1e-12);
        let eig = SymmetricEigen::new(mm).eigenvalues;
        assert!(eig.min() > 0.0);
    }
}

#[test]
fn coriolis_is_quadratic_in_velocity() {
    let m = build_chain(&ModelConfig::uniform(1, 6, 0.03, 0.01, 0.5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let th = random_theta(&mut rng, 6, 0.5);
    let v = random_theta(&mut rng, 6, 2.0);
    let a = -1.7;
    let c1 = coriolis(&m, &th, &v).unwrap();
    let c2 = coriolis(&m, &th, &(&v * a)).unwrap();
    assert!((c2 - c1 * a * a).amax() < 1e-10);
}

#[test]
fn coriolis_satisfies_power_balance() {
    // θ̇ᵀ c = ½ θ̇ᵀ Ṁ θ̇, with Ṁ from central differences of M along θ̇.
    let m = common::paper_platform();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let th = random_theta(&mut rng, 32, 0.4);
        let v = random_theta(&mut rng, 32, 1.0);
        let h = 1e-6;
        let m_dot: DMatrix<f64> = (mass_matrix(&m, &(&th + &v * h)).unwrap() - mass_matrix(&m, &(&th - &v * h)).unwrap()) / (2.0 * h);
        let lhs = v.dot(&coriolis(&m, &th, &v).unwrap());
        let rhs = 0.5 * v.dot(&(m_dot * &v));
        assert!((lhs - rhs).abs() <= 1e-6 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }
}

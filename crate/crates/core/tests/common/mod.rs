//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix4};
use tendon_statics::chain::com_positions;
use tendon_statics::{ChainModel, JointVector, LoadedModel, ModelConfig};

pub fn paper_platform() -> ChainModel {
    LoadedModel::from_config(ModelConfig::paper_platform()).unwrap().model
}

/// Dense matrix exponential by scaling and squaring of a Taylor series.
pub fn expm4(m: &Matrix4<f64>) -> Matrix4<f64> {
    let mut squarings = 0;
    let mut scaled = *m;
    while scaled.abs().row_sum().max() > 0.25 {
        scaled /= 2.0;
        squarings += 1;
    }
    let mut term = Matrix4::identity();
    let mut sum = Matrix4::identity();
    for k in 1..30 {
        term = term * scaled / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// Derivative-free minimizer (Nelder–Mead with standard coefficients).
pub fn nelder_mead<F: Fn(&DVector<f64>) -> f64>(f: F, x0: &DVector<f64>, step: f64, tol: f64, max_iter: usize) -> DVector<f64> {
    let n = x0.len();
    let mut simplex: Vec<DVector<f64>> = vec![x0.clone()];
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(&f).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let spread = simplex.iter().skip(1).map(|x| (x - &simplex[0]).amax()).fold(0.0, f64::max);
        if spread < tol {
            break;
        }
        let centroid = simplex[..n].iter().fold(DVector::zeros(n), |acc, x| acc + x) / n as f64;
        let worst = simplex[n].clone();
        let reflected = &centroid + (&centroid - &worst);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = &centroid + (&centroid - &worst) * 2.0;
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] {
                &centroid + (&reflected - &centroid) * 0.5
            } else {
                &centroid + (&worst - &centroid) * 0.5
            };
            let fc = f(&contracted);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = &best + (&simplex[i] - &best) * 0.5;
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap()).unwrap();
    simplex[best].clone()
}

/// Gravitational plus elastic potential energy.
pub fn potential_energy(model: &ChainModel, theta: &JointVector) -> f64 {
    let coms = com_positions(model, theta).unwrap();
    let gravity: f64 = coms.iter().zip(model.beads()).map(|(p, b)| -b.mass * model.gravity().dot(p)).sum();
    let elastic: f64 = model.joints().iter().zip(theta.iter()).map(|(j, t)| 0.5 * j.stiffness * t * t).sum();
    gravity + elastic
}

pub fn central_difference<F: Fn(&DVector<f64>) -> DVector<f64>>(x: &DVector<f64>, h: f64, f: F) -> DMatrix<f64> {
    let rows = f(x).len();
    let mut out = DMatrix::zeros(rows, x.len());
    for j in 0..x.len() {
        let mut p = x.clone();
        p[j] += h;
        let mut m = x.clone();
        m[j] -= h;
        out.set_column(j, &((f(&p) - f(&m)) / (2.0 * h)));
    }
    out
}

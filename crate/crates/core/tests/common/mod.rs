#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use noma_vlc::experiment::{gen_scenario, LinkDefaults};
use noma_vlc::linalg::Matrix;
use noma_vlc::noma::{dbm_to_mw, Scenario};
use noma_vlc::transform::{constraint_eval, constraint_value, ConstraintRow, TransformedPoint};
use noma_vlc::{PowerAllocation, RoomConfig};
use rand::Rng;

pub const NOISE_MW: f64 = 3.981071705534972e-11;

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

/// Synthetic scenario with gains spread over four decades around the noise
/// floor.
pub fn random_scenario(rng: &mut impl Rng, m: usize) -> Scenario<f64> {
    let gains: Vec<f64> = (0..m).map(|_| log_uniform(rng, 1e-12, 1e-8)).collect();
    let p_max = rng.random_range(1.0..50.0);
    let delta = rng.random_range(0.2..2.0);
    Scenario::build(&gains, NOISE_MW, p_max, 20.0, 30.0, delta).unwrap()
}

pub fn random_allocation(rng: &mut impl Rng, m: usize) -> PowerAllocation {
    PowerAllocation::new((0..m).map(|_| log_uniform(rng, 1e-4, 20.0)).collect()).unwrap()
}

/// Point in the rate-row domain (`y > 0`), not necessarily feasible.
pub fn random_point(rng: &mut impl Rng, m: usize) -> TransformedPoint<f64> {
    TransformedPoint {
        y: (0..m).map(|_| log_uniform(rng, 0.05, 20.0)).collect(),
        rho: (0..m).map(|_| log_uniform(rng, 1e-4, 20.0).ln()).collect(),
    }
}

pub fn random_row(rng: &mut impl Rng, family: usize, m: usize) -> ConstraintRow {
    match family {
        0 => ConstraintRow::Rate(rng.random_range(0..m)),
        1 => ConstraintRow::Power,
        _ => ConstraintRow::Amplitude,
    }
}

/// Seeded room drop with overridden budgets.
pub fn room_scenario(num_users: usize, seed: u64, p_max: f64, delta: f64) -> Scenario<f64> {
    let room = RoomConfig { num_users, seed, ..RoomConfig::default() };
    let link = LinkDefaults { p_max_mw: p_max, pam_coefficient: delta, ..LinkDefaults::default() };
    let (s, _) = gen_scenario(&room, &link).unwrap();
    assert_eq!(s.noise_power(), dbm_to_mw(-104.0));
    s
}

fn fd_step(x: f64) -> f64 {
    1e-6 * (1.0 + x.abs())
}

fn shifted(x: &[f64], j: usize, by: f64) -> TransformedPoint<f64> {
    let mut v = x.to_vec();
    v[j] += by;
    TransformedPoint::from_slice(&v)
}

fn inf_norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Norm-wise relative error of the analytic gradient against central
/// differences of the value.
pub fn gradient_error(s: &Scenario<f64>, t: &TransformedPoint<f64>, row: ConstraintRow) -> f64 {
    let x = t.to_vec();
    let analytic = constraint_eval(s, t, row, false).unwrap().gradient;
    let fd: Vec<f64> = (0..x.len())
        .map(|j| {
            let h = fd_step(x[j]);
            let up = constraint_value(s, &shifted(&x, j, h), row).unwrap();
            let down = constraint_value(s, &shifted(&x, j, -h), row).unwrap();
            (up - down) / (2.0 * h)
        })
        .collect();
    let diff = inf_norm(analytic.iter().zip(&fd).map(|(a, b)| a - b));
    diff / inf_norm(analytic.iter().chain(&fd).copied()).max(f64::MIN_POSITIVE)
}

/// Norm-wise relative error of the analytic Hessian against central
/// differences of the analytic gradient.
pub fn hessian_error(s: &Scenario<f64>, t: &TransformedPoint<f64>, row: ConstraintRow) -> f64 {
    let x = t.to_vec();
    let n = x.len();
    let analytic = constraint_eval(s, t, row, true).unwrap().hessian.unwrap();
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..n {
        let h = fd_step(x[j]);
        let up = constraint_eval(s, &shifted(&x, j, h), row, false).unwrap().gradient;
        let down = constraint_eval(s, &shifted(&x, j, -h), row, false).unwrap().gradient;
        for i in 0..n {
            let fd = (up[i] - down[i]) / (2.0 * h);
            diff = diff.max((analytic.get(i, j) - fd).abs());
            scale = scale.max(analytic.get(i, j).abs()).max(fd.abs());
        }
    }
    diff / scale.max(f64::MIN_POSITIVE)
}

pub fn min_eigenvalue(h: &Matrix<f64>) -> f64 {
    let n = h.dim();
    let dense = DMatrix::from_fn(n, n, |i, j| 0.5 * (h.get(i, j) + h.get(j, i)));
    SymmetricEigen::new(dense).eigenvalues.min()
}

/// `f(mid) - (f(a) + f(b)) / 2`; positive means the midpoint test failed.
pub fn midpoint_excess(s: &Scenario<f64>, a: &TransformedPoint<f64>, b: &TransformedPoint<f64>, row: ConstraintRow) -> f64 {
    let xa = a.to_vec();
    let xb = b.to_vec();
    let mid: Vec<f64> = xa.iter().zip(&xb).map(|(p, q)| 0.5 * (p + q)).collect();
    let fm = constraint_value(s, &TransformedPoint::from_slice(&mid), row).unwrap();
    let fa = constraint_value(s, a, row).unwrap();
    let fb = constraint_value(s, b, row).unwrap();
    fm - 0.5 * (fa + fb)
}

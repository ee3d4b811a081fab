//! Convex reformulation of the harmonic power control problem.
//!
//! With `rho_m = ln p_m` and an epigraph variable `y_m >= 1/R_m`, the problem
//! becomes: minimize `sum(y)` subject to
//!
//! ```text
//! f_m(y, rho) = ln( n0/g_m e^{-rho_m} + sum_{i>m} e^{rho_i - rho_m} ) + ln(e^{1/y_m} - 1) <= 0
//! sum e^{rho_m}   - P_max <= 0
//! sum e^{rho_m/2} - U_max <= 0
//! ```
//!
//! Every constraint is convex in `(y, rho)`. Variables are stacked as
//! `x = [y_0 .. y_{M-1}, rho_0 .. rho_{M-1}]`; gradients and Hessians use
//! that layout.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::noma::{rate_report, PowerAllocation, Scenario};
use crate::scalar::{log_expm1, log_sum_exp, Real};

/// Smallest `y_m` accepted by the constraint evaluations.
pub const Y_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedPoint<T> {
    pub y: Vec<T>,
    pub rho: Vec<T>,
}

impl<T: Real> TransformedPoint<T> {
    pub fn num_users(&self) -> usize {
        self.y.len()
    }

    /// Stacked variable vector `[y, rho]`.
    pub fn to_vec(&self) -> Vec<T> {
        self.y.iter().chain(&self.rho).copied().collect()
    }

    pub fn from_slice(x: &[T]) -> Self {
        let m = x.len() / 2;
        Self { y: x[..m].to_vec(), rho: x[m..].to_vec() }
    }

    pub fn objective(&self) -> T {
        self.y.iter().copied().sum()
    }
}

/// Value, gradient and (optionally) Hessian of one constraint row.
#[derive(Debug, Clone)]
pub struct ConstraintEval<T> {
    pub value: T,
    pub gradient: Vec<T>,
    pub hessian: Option<Matrix<T>>,
}

/// Maps a strictly positive allocation (SIC order) into the convex domain,
/// with `y_m = (1 + slack) / R_m`.
pub fn to_transformed<T: Real>(
    s: &Scenario<T>,
    p: &PowerAllocation<T>,
    slack: T,
) -> Result<TransformedPoint<T>> {
    if !(slack >= T::zero()) {
        return Err(Error::Domain(format!("slack must be >= 0, got {slack}")));
    }
    if let Some((i, _)) = p.as_slice().iter().enumerate().find(|(_, &v)| !(v > T::zero())) {
        return Err(Error::Domain(format!("power[{i}] must be > 0 to take its logarithm")));
    }
    let report = rate_report(s, p)?;
    let mut y = Vec::with_capacity(p.len());
    for (m, &r) in report.rates.iter().enumerate() {
        if !(r > T::zero()) {
            return Err(Error::InfeasibleInput(format!("rate of SIC user {m} is zero")));
        }
        y.push((T::one() + slack) / r);
    }
    let rho = p.as_slice().iter().map(|v| v.ln()).collect();
    Ok(TransformedPoint { y, rho })
}

/// Back-transform `p_m = exp(rho_m)`, refusing `rho_m > rho_cap`.
pub fn from_transformed<T: Real>(t: &TransformedPoint<T>, rho_cap: T) -> Result<PowerAllocation<T>> {
    for (index, &r) in t.rho.iter().enumerate() {
        if !r.is_finite() || r > rho_cap {
            return Err(Error::Divergence {
                index,
                rho: r.to_f64_lossy(),
                cap: rho_cap.to_f64_lossy(),
            });
        }
    }
    PowerAllocation::new(t.rho.iter().map(|r| r.exp()).collect())
}

/// Default divergence cap on `rho`: `ln(10 P_max)`.
pub fn default_rho_cap<T: Real>(s: &Scenario<T>) -> T {
    (T::lit(10.0) * s.p_max()).ln()
}

fn check_y<T: Real>(y: T, m: usize) -> Result<()> {
    if !(y >= T::lit(Y_FLOOR)) {
        return Err(Error::Domain(format!("y[{m}] = {y} is below the floor {Y_FLOOR}")));
    }
    Ok(())
}

fn rate_exponents<T: Real>(s: &Scenario<T>, t: &TransformedPoint<T>, m: usize) -> Vec<T> {
    let rho_m = t.rho[m];
    let mut a = Vec::with_capacity(t.rho.len() - m);
    a.push((s.noise_power() / s.gains()[m]).ln() - rho_m);
    a.extend(t.rho[m + 1..].iter().map(|&r| r - rho_m));
    a
}

/// Value of the rate row `f_m` only.
pub fn rate_constraint_value<T: Real>(s: &Scenario<T>, t: &TransformedPoint<T>, m: usize) -> Result<T> {
    check_y(t.y[m], m)?;
    Ok(log_sum_exp(&rate_exponents(s, t, m)) + log_expm1(t.y[m].recip()))
}

/// Rate row `f_m` with analytic derivatives.
pub fn rate_constraint<T: Real>(
    s: &Scenario<T>,
    t: &TransformedPoint<T>,
    m: usize,
    with_hessian: bool,
) -> Result<ConstraintEval<T>> {
    let n = t.num_users();
    let y = t.y[m];
    check_y(y, m)?;
    let a = rate_exponents(s, t, m);
    let lse = log_sum_exp(&a);
    let u = y.recip();
    let value = lse + log_expm1(u);

    // softmax weights of the interference terms i > m; the noise term's
    // weight never enters the derivatives because shifting rho_m moves
    // every exponent together
    let w: Vec<T> = a[1..].iter().map(|&ai| (ai - lse).exp()).collect();

    // 1 - e^{-u}
    let q = -(-u).exp_m1();
    let mut gradient = vec![T::zero(); 2 * n];
    gradient[m] = -(u * u) / q;
    gradient[n + m] = -T::one();
    for (k, &wk) in w.iter().enumerate() {
        gradient[n + m + 1 + k] = wk;
    }

    let hessian = with_hessian.then(|| {
        let mut h = Matrix::zeros(2 * n);
        let e = (-u).exp();
        let u2 = u * u;
        h.add_at(m, m, -e * u2 * u2 / (q * q) + T::two() * u2 * u / q);
        for (k, &wk) in w.iter().enumerate() {
            let i = n + m + 1 + k;
            h.add_at(i, i, wk);
            for (l, &wl) in w.iter().enumerate() {
                h.add_at(i, n + m + 1 + l, -wk * wl);
            }
        }
        h
    });

    Ok(ConstraintEval { value, gradient, hessian })
}

pub fn power_constraint_value<T: Real>(s: &Scenario<T>, t: &TransformedPoint<T>) -> T {
    t.rho.iter().map(|r| r.exp()).sum::<T>() - s.p_max()
}

/// `sum(e^rho) - P_max`.
pub fn power_constraint<T: Real>(
    s: &Scenario<T>,
    t: &TransformedPoint<T>,
    with_hessian: bool,
) -> ConstraintEval<T> {
    let n = t.num_users();
    let e: Vec<T> = t.rho.iter().map(|r| r.exp()).collect();
    let value = e.iter().copied().sum::<T>() - s.p_max();
    let mut gradient = vec![T::zero(); 2 * n];
    gradient[n..].copy_from_slice(&e);
    let hessian = with_hessian.then(|| {
        let mut h = Matrix::zeros(2 * n);
        for (k, &ek) in e.iter().enumerate() {
            h.add_at(n + k, n + k, ek);
        }
        h
    });
    ConstraintEval { value, gradient, hessian }
}

pub fn amplitude_constraint_value<T: Real>(s: &Scenario<T>, t: &TransformedPoint<T>) -> T {
    t.rho.iter().map(|&r| (r * T::half()).exp()).sum::<T>() - s.u_max()
}

/// `sum(e^{rho/2}) - U_max`.
pub fn amplitude_constraint<T: Real>(
    s: &Scenario<T>,
    t: &TransformedPoint<T>,
    with_hessian: bool,
) -> ConstraintEval<T> {
    let n = t.num_users();
    let e: Vec<T> = t.rho.iter().map(|&r| (r * T::half()).exp()).collect();
    let value = e.iter().copied().sum::<T>() - s.u_max();
    let mut gradient = vec![T::zero(); 2 * n];
    for (k, &ek) in e.iter().enumerate() {
        gradient[n + k] = ek * T::half();
    }
    let hessian = with_hessian.then(|| {
        let mut h = Matrix::zeros(2 * n);
        let quarter = T::lit(0.25);
        for (k, &ek) in e.iter().enumerate() {
            h.add_at(n + k, n + k, ek * quarter);
        }
        h
    });
    ConstraintEval { value, gradient, hessian }
}

/// Which row of the transformed problem. Rows are ordered rate rows
/// `0..M`, then power, then amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintRow {
    Rate(usize),
    Power,
    Amplitude,
}

impl ConstraintRow {
    pub fn all(num_users: usize) -> impl Iterator<Item = ConstraintRow> {
        (0..num_users)
            .map(ConstraintRow::Rate)
            .chain([ConstraintRow::Power, ConstraintRow::Amplitude])
    }
}

pub fn constraint_value<T: Real>(s: &Scenario<T>, t: &TransformedPoint<T>, row: ConstraintRow) -> Result<T> {
    match row {
        ConstraintRow::Rate(m) => rate_constraint_value(s, t, m),
        ConstraintRow::Power => Ok(power_constraint_value(s, t)),
        ConstraintRow::Amplitude => Ok(amplitude_constraint_value(s, t)),
    }
}

pub fn constraint_eval<T: Real>(
    s: &Scenario<T>,
    t: &TransformedPoint<T>,
    row: ConstraintRow,
    with_hessian: bool,
) -> Result<ConstraintEval<T>> {
    match row {
        ConstraintRow::Rate(m) => rate_constraint(s, t, m, with_hessian),
        ConstraintRow::Power => Ok(power_constraint(s, t, with_hessian)),
        ConstraintRow::Amplitude => Ok(amplitude_constraint(s, t, with_hessian)),
    }
}

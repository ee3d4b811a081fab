//! Log-barrier interior-point solver for the convex reformulation.
//!
//! Each centering stage minimizes
//!
//! ```text
//! phi_t(x) = t * sum(y) - sum_i ln(-f_i(x))
//! ```
//!
//! over the `M + 2` constraint rows with damped Newton steps and a
//! backtracking line search that never leaves the strict interior. The
//! outer loop multiplies `t` by `barrier_mu` until the duality gap bound
//! `(M + 2) / t` drops below `gap_tol`.
//!
//! The starting point is strictly feasible for every valid scenario: equal
//! powers scaled below both `P_max / M` and `(U_max / M)^2` satisfy the
//! power and amplitude rows strictly, and inflating `y` above `1 / R`
//! satisfies every rate row strictly. No phase-1 problem is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::noma::{rate_report, PowerAllocation, Scenario};
use crate::scalar::Real;
use crate::transform::{
    constraint_eval, constraint_value, default_rho_cap, from_transformed, to_transformed, ConstraintRow,
    TransformedPoint, Y_FLOOR,
};

/// Consecutive non-descent Newton directions tolerated before giving up.
const MAX_NON_DESCENT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig<T> {
    /// Factor applied to `t` after each centering stage.
    pub barrier_mu: T,
    /// Initial barrier weight. `None` picks `(M + 2) / sum(y0)` so the first
    /// duality gap bound matches the starting objective.
    pub t_init: Option<T>,
    /// Target bound on the duality gap, `(M + 2) / t`.
    pub gap_tol: T,
    /// Centering stops once `lambda^2 / 2` falls below this, or below the
    /// resolution of the barrier value itself.
    pub newton_tol: T,
    pub max_outer: usize,
    /// Newton iterations allowed per centering stage.
    pub max_newton: usize,
    pub line_search_alpha: T,
    pub line_search_beta: T,
    /// Relative margin of the starting point inside the feasible set.
    pub feasibility_slack: T,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            barrier_mu: T::lit(10.0),
            t_init: None,
            gap_tol: T::lit(1e-8),
            newton_tol: T::lit(1e-10),
            max_outer: 60,
            max_newton: 100,
            line_search_alpha: T::lit(0.25),
            line_search_beta: T::lit(0.5),
            feasibility_slack: T::lit(0.05),
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, v: String| Err(Error::Domain(format!("solver config `{field}` out of range: {v}")));
        if !(self.barrier_mu > T::one()) {
            return bad("barrier_mu", self.barrier_mu.to_string());
        }
        if let Some(t) = self.t_init {
            if !(t > T::zero()) {
                return bad("t_init", t.to_string());
            }
        }
        if !(self.gap_tol > T::zero()) {
            return bad("gap_tol", self.gap_tol.to_string());
        }
        if !(self.newton_tol > T::zero()) {
            return bad("newton_tol", self.newton_tol.to_string());
        }
        if self.max_outer == 0 {
            return bad("max_outer", "0".into());
        }
        if self.max_newton == 0 {
            return bad("max_newton", "0".into());
        }
        if !(self.line_search_alpha > T::zero() && self.line_search_alpha < T::half()) {
            return bad("line_search_alpha", self.line_search_alpha.to_string());
        }
        if !(self.line_search_beta > T::zero() && self.line_search_beta < T::one()) {
            return bad("line_search_beta", self.line_search_beta.to_string());
        }
        if !(self.feasibility_slack > T::zero() && self.feasibility_slack < T::one()) {
            return bad("feasibility_slack", self.feasibility_slack.to_string());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
    InfeasibleInput,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::NumericalFailure => "numerical_failure",
            SolveStatus::InfeasibleInput => "infeasible_input",
        })
    }
}

/// One centering stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTrace<T> {
    pub t: T,
    /// `sum(y)` at the end of the stage.
    pub objective: T,
    pub max_constraint: T,
    /// `lambda^2` of the last Newton system solved in the stage.
    pub newton_decrement_sq: T,
    pub newton_iterations: usize,
    /// Barrier value after each accepted step, starting with the entry point.
    pub barrier_values: Vec<T>,
    /// `sum(y)` after each accepted step, starting with the entry point.
    /// Unlike the barrier value this can rise within a stage.
    pub objective_values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult<T> {
    pub status: SolveStatus,
    /// Powers in the original user order.
    pub allocation: PowerAllocation<T>,
    /// Powers in SIC order.
    pub sic_allocation: PowerAllocation<T>,
    /// `sum(1 / R_m)` recomputed from the powers.
    pub objective: T,
    pub sum_rate: T,
    /// `sum(y)` at the final iterate.
    pub transformed_objective: T,
    pub kkt_residual: T,
    /// `|y_m - 1 / R_m|`, original user order.
    pub rate_binding_gaps: Vec<T>,
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    /// Final iterate in SIC order.
    #[serde(skip)]
    pub point: Option<TransformedPoint<T>>,
    /// Multipliers certifying the result, rate rows then power then
    /// amplitude: the barrier duals `1 / (-t f_i)` after a least-squares
    /// polish of their stationarity residual.
    pub duals: Vec<T>,
    pub trace: Vec<StageTrace<T>>,
}

/// Strictly feasible equal-power starting point.
pub fn initial_point<T: Real>(s: &Scenario<T>, cfg: &SolverConfig<T>) -> Result<TransformedPoint<T>> {
    let m = T::from_usize(s.num_users()).expect("user count fits in scalar");
    let per_user_amplitude = s.u_max() / m;
    let power = (T::one() - cfg.feasibility_slack)
        * (s.p_max() / m).min(per_user_amplitude * per_user_amplitude);
    let p = PowerAllocation::uniform(s.num_users(), power)?;
    match to_transformed(s, &p, cfg.feasibility_slack) {
        Ok(t) => Ok(t),
        Err(Error::InfeasibleInput(msg)) => Err(Error::InfeasibleInput(format!(
            "equal-power start has zero rate ({msg})"
        ))),
        Err(e) => Err(e),
    }
}

/// Components of the KKT residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport<T> {
    pub stationarity: T,
    pub complementarity: T,
    pub primal_infeasibility: T,
}

impl<T: Real> KktReport<T> {
    pub fn residual(&self) -> T {
        self.stationarity.max(self.complementarity).max(self.primal_infeasibility)
    }
}

/// KKT certificate for multipliers `duals` (rate rows, power, amplitude).
pub fn kkt_report<T: Real>(s: &Scenario<T>, t: &TransformedPoint<T>, duals: &[T]) -> Result<KktReport<T>> {
    let n = t.num_users();
    if duals.len() != n + 2 {
        return Err(Error::DimensionMismatch { expected: n + 2, found: duals.len() });
    }
    let mut stationarity_vec: Vec<T> = (0..2 * n).map(|k| if k < n { T::one() } else { T::zero() }).collect();
    let mut complementarity = T::zero();
    let mut primal_infeasibility = T::zero();
    for (row, &lambda) in ConstraintRow::all(n).zip(duals) {
        let ev = constraint_eval(s, t, row, false)?;
        for (acc, &g) in stationarity_vec.iter_mut().zip(&ev.gradient) {
            *acc = *acc + lambda * g;
        }
        complementarity = complementarity.max((lambda * ev.value).abs());
        primal_infeasibility = primal_infeasibility.max(ev.value.max(T::zero()));
    }
    let stationarity = stationarity_vec.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    Ok(KktReport { stationarity, complementarity, primal_infeasibility })
}

/// `max(stationarity, complementarity, primal infeasibility)`.
pub fn kkt_residual<T: Real>(s: &Scenario<T>, t: &TransformedPoint<T>, duals: &[T]) -> Result<T> {
    Ok(kkt_report(s, t, duals)?.residual())
}

struct Barrier<'a, T> {
    s: &'a Scenario<T>,
    rows: Vec<ConstraintRow>,
}

impl<T: Real> Barrier<'_, T> {
    /// Constraint values at `x`, or `None` outside the strict interior.
    fn constraint_values(&self, x: &TransformedPoint<T>) -> Option<Vec<T>> {
        if x.y.iter().any(|&y| !(y >= T::lit(Y_FLOOR))) || x.rho.iter().any(|r| !r.is_finite()) {
            return None;
        }
        let mut values = Vec::with_capacity(self.rows.len());
        for &row in &self.rows {
            let f = constraint_value(self.s, x, row).ok()?;
            if !(f < T::zero()) {
                return None;
            }
            values.push(f);
        }
        Some(values)
    }

    fn value(&self, t: T, x: &TransformedPoint<T>) -> Option<T> {
        let values = self.constraint_values(x)?;
        let log_barrier: T = values.iter().map(|&f| (-f).ln()).sum();
        Some(t * x.objective() - log_barrier)
    }

    fn gradient_and_hessian(&self, t: T, x: &TransformedPoint<T>) -> Result<(Vec<T>, Matrix<T>)> {
        let n = x.num_users();
        let mut grad: Vec<T> = (0..2 * n).map(|k| if k < n { t } else { T::zero() }).collect();
        let mut hess = Matrix::zeros(2 * n);
        for &row in &self.rows {
            let ev = constraint_eval(self.s, x, row, true)?;
            let inv = (-ev.value).recip();
            for (g, &d) in grad.iter_mut().zip(&ev.gradient) {
                *g = *g + inv * d;
            }
            hess.add_outer(inv * inv, &ev.gradient);
            hess.add_scaled(inv, ev.hessian.as_ref().expect("requested"));
        }
        Ok((grad, hess))
    }
}

enum Centering {
    Converged,
    BudgetExhausted,
    Failed,
}

/// Solves the harmonic power control problem for `s`.
pub fn solve<T: Real>(s: &Scenario<T>, cfg: &SolverConfig<T>) -> Result<SolveResult<T>> {
    cfg.validate()?;
    let n = s.num_users();
    let mut x = match initial_point(s, cfg) {
        Ok(x) => x,
        Err(Error::InfeasibleInput(_)) => return Ok(infeasible_result(s)),
        Err(e) => return Err(e),
    };
    let barrier = Barrier { s, rows: ConstraintRow::all(n).collect() };
    let num_rows = T::from_usize(barrier.rows.len()).expect("row count fits in scalar");
    // relative allowance for round-off when comparing barrier values
    let roundoff = T::lit(64.0) * T::epsilon();

    let mut t = cfg.t_init.unwrap_or_else(|| num_rows / x.objective());
    let mut trace = Vec::new();
    let mut newton_total = 0;
    let mut status = SolveStatus::MaxIterations;

    'outer: for _ in 0..cfg.max_outer {
        let mut phi = barrier.value(t, &x).expect("iterate stays interior");
        let mut stage = StageTrace {
            t,
            objective: x.objective(),
            max_constraint: T::zero(),
            newton_decrement_sq: T::infinity(),
            newton_iterations: 0,
            barrier_values: vec![phi],
            objective_values: vec![x.objective()],
        };
        let mut non_descent = 0;
        let mut reg_boost = T::one();
        let mut outcome = Centering::BudgetExhausted;

        while stage.newton_iterations < cfg.max_newton {
            let (grad, mut hess) = barrier.gradient_and_hessian(t, &x)?;
            let dim = T::from_usize(2 * n).expect("dimension fits in scalar");
            let reg = T::lit(1e-12) * (T::one() + hess.trace() / dim) * reg_boost;
            for k in 0..2 * n {
                hess.add_at(k, k, reg);
            }
            let direction = hess.cholesky().map(|c| {
                let dx: Vec<T> = c.solve(&grad).into_iter().map(|v| -v).collect();
                let lambda_sq = -grad.iter().zip(&dx).map(|(&g, &d)| g * d).sum::<T>();
                (dx, lambda_sq)
            });
            let (dx, lambda_sq) = match direction {
                Some((dx, l)) if l > T::zero() && l.is_finite() => (dx, l),
                _ => {
                    non_descent += 1;
                    if non_descent >= MAX_NON_DESCENT {
                        outcome = Centering::Failed;
                        break;
                    }
                    reg_boost = reg_boost * T::lit(1e3);
                    continue;
                }
            };
            non_descent = 0;
            reg_boost = T::one();
            stage.newton_decrement_sq = lambda_sq;
            // predicted decrease below what phi can resolve counts as centered
            let resolvable = T::lit(16.0) * T::epsilon() * (T::one() + phi.abs());
            if lambda_sq * T::half() <= cfg.newton_tol.max(resolvable) {
                outcome = Centering::Converged;
                break;
            }

            stage.newton_iterations += 1;
            newton_total += 1;

            let xv = x.to_vec();
            let trial = |step: T| {
                let v: Vec<T> = xv.iter().zip(&dx).map(|(&a, &d)| a + step * d).collect();
                TransformedPoint::from_slice(&v)
            };
            let mut step = T::one();
            let mut accepted = None;
            while step > T::lit(1e-20) {
                let candidate = trial(step);
                if let Some(value) = barrier.value(t, &candidate) {
                    let bound = phi - cfg.line_search_alpha * step * lambda_sq + roundoff * (T::one() + phi.abs());
                    if value <= bound {
                        accepted = Some((candidate, value));
                        break;
                    }
                }
                step = step * cfg.line_search_beta;
            }
            match accepted {
                Some((candidate, value)) => {
                    x = candidate;
                    phi = value;
                    stage.barrier_values.push(phi);
                    stage.objective_values.push(x.objective());
                }
                None => {
                    // no representable decrease left along a descent
                    // direction: the stage is centered to working precision
                    outcome = Centering::Converged;
                    break;
                }
            }
        }

        stage.objective = x.objective();
        stage.max_constraint = barrier
            .constraint_values(&x)
            .map(|v| v.into_iter().fold(T::neg_infinity(), T::max))
            .unwrap_or(T::nan());
        trace.push(stage);

        match outcome {
            Centering::Converged => {}
            Centering::BudgetExhausted => {
                status = SolveStatus::MaxIterations;
                break 'outer;
            }
            Centering::Failed => {
                status = SolveStatus::NumericalFailure;
                break 'outer;
            }
        }
        if num_rows / t <= cfg.gap_tol {
            status = SolveStatus::Optimal;
            break;
        }
        t = t * cfg.barrier_mu;
    }

    finish(s, x, t, status, trace, newton_total)
}

fn finish<T: Real>(
    s: &Scenario<T>,
    x: TransformedPoint<T>,
    t: T,
    mut status: SolveStatus,
    trace: Vec<StageTrace<T>>,
    newton_iterations: usize,
) -> Result<SolveResult<T>> {
    let barrier_duals: Vec<T> = ConstraintRow::all(s.num_users())
        .map(|row| constraint_value(s, &x, row).map(|f| (-t * f).recip()))
        .collect::<Result<_>>()?;
    let (duals, kkt) = refine_duals(s, &x, barrier_duals)?;
    let sic_allocation = match from_transformed(&x, default_rho_cap(s)) {
        Ok(p) => p,
        Err(Error::Divergence { .. }) => {
            status = SolveStatus::NumericalFailure;
            PowerAllocation::new(x.rho.iter().map(|r| r.exp().min(s.p_max())).collect())?
        }
        Err(e) => return Err(e),
    };
    let report = rate_report(s, &sic_allocation)?;
    let gaps: Vec<T> = x
        .y
        .iter()
        .zip(&report.rates)
        .map(|(&y, &r)| (y - r.recip()).abs())
        .collect();
    Ok(SolveResult {
        status,
        allocation: PowerAllocation::new(s.to_original_order(sic_allocation.as_slice()))?,
        sic_allocation,
        objective: report.harmonic_objective,
        sum_rate: report.sum_rate,
        transformed_objective: x.objective(),
        kkt_residual: kkt,
        rate_binding_gaps: s.to_original_order(&gaps),
        outer_iterations: trace.len(),
        newton_iterations,
        point: Some(x),
        duals,
        trace,
    })
}

/// Polishes barrier duals `lambda0` against round-off in the constraint
/// values: `lambda = lambda0 * (1 + z)` where `z` solves the ridge-regularized
/// least-squares stationarity problem. Scaling by `lambda0` keeps inactive
/// rows near zero and every multiplier nonnegative. The refined duals are
/// kept only if they lower the KKT residual.
fn refine_duals<T: Real>(s: &Scenario<T>, x: &TransformedPoint<T>, lambda0: Vec<T>) -> Result<(Vec<T>, T)> {
    let n = x.num_users();
    let rows: Vec<_> = ConstraintRow::all(n)
        .map(|row| constraint_eval(s, x, row, false).map(|ev| ev.gradient))
        .collect::<Result<_>>()?;
    let mut best_residual = kkt_residual(s, x, &lambda0)?;
    let mut best = lambda0;
    for _ in 0..2 {
        let scaled: Vec<Vec<T>> = rows
            .iter()
            .zip(&best)
            .map(|(g, &l)| g.iter().map(|&v| v * l).collect())
            .collect();
        // stationarity residual r = c + sum lambda_i grad f_i
        let mut r: Vec<T> = (0..2 * n).map(|k| if k < n { T::one() } else { T::zero() }).collect();
        for b in &scaled {
            for (acc, &v) in r.iter_mut().zip(b) {
                *acc = *acc + v;
            }
        }
        let k = scaled.len();
        let mut normal = Matrix::zeros(k);
        for i in 0..k {
            for j in 0..k {
                let d: T = scaled[i].iter().zip(&scaled[j]).map(|(&a, &b)| a * b).sum();
                normal.add_at(i, j, d);
            }
        }
        let ridge = T::lit(1e-14) * (T::one() + normal.trace() / T::from_usize(k).expect("row count fits"));
        for i in 0..k {
            normal.add_at(i, i, ridge);
        }
        let Some(chol) = normal.cholesky() else { break };
        let rhs: Vec<T> = scaled.iter().map(|b| -b.iter().zip(&r).map(|(&a, &v)| a * v).sum::<T>()).collect();
        let z = chol.solve(&rhs);
        let candidate: Vec<T> = best
            .iter()
            .zip(&z)
            .map(|(&l, &zi)| (l * (T::one() + zi)).max(T::zero()))
            .collect();
        let residual = kkt_residual(s, x, &candidate)?;
        if !(residual < best_residual) {
            break;
        }
        best = candidate;
        best_residual = residual;
    }
    Ok((best, best_residual))
}

fn infeasible_result<T: Real>(s: &Scenario<T>) -> SolveResult<T> {
    let zeros = PowerAllocation::uniform(s.num_users(), T::zero()).expect("zeros are valid");
    SolveResult {
        status: SolveStatus::InfeasibleInput,
        allocation: zeros.clone(),
        sic_allocation: zeros,
        objective: T::infinity(),
        sum_rate: T::zero(),
        transformed_objective: T::nan(),
        kkt_residual: T::nan(),
        rate_binding_gaps: vec![T::nan(); s.num_users()],
        outer_iterations: 0,
        newton_iterations: 0,
        point: None,
        duals: Vec::new(),
        trace: Vec::new(),
    }
}

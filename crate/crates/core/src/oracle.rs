//! Brute-force reference solutions for small cells.
//!
//! Enumerates a log-spaced grid over `[p_floor, min(P_max, U_max^2)]` on
//! every power axis and keeps the feasible point with the smallest harmonic
//! objective. Shares nothing with the solver except the rate model.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noma::{check_feasibility, rate_report, PowerAllocation, Scenario};
use crate::scalar::Real;

/// Largest cell size the oracle accepts.
pub const MAX_ORACLE_USERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    /// Log-spaced cells per axis; the axis has `resolution + 1` nodes, so
    /// doubling the resolution refines the grid in place.
    pub resolution: usize,
    /// Lower end of every axis (mW). Excludes the zero-rate boundary.
    pub p_floor: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(resolution: usize) -> Self {
        Self { resolution, p_floor: T::lit(1e-6) }
    }

    /// 2000 cells per axis for `M <= 2`, 400 for `M = 3`, 60 for `M = 4`.
    pub fn default_for(num_users: usize) -> Self {
        Self::new(match num_users {
            0..=2 => 2000,
            3 => 400,
            _ => 60,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.resolution < 10 {
            return Err(Error::Oracle(format!("resolution must be >= 10, got {}", self.resolution)));
        }
        if !(self.p_floor > T::zero()) {
            return Err(Error::Oracle(format!("p_floor must be > 0, got {}", self.p_floor)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult<T> {
    /// Minimizer in the original user order.
    pub allocation: PowerAllocation<T>,
    pub sic_allocation: PowerAllocation<T>,
    pub objective: T,
    /// Largest objective difference between the minimizer and any feasible
    /// point of its `3^M` grid neighbourhood.
    pub error_bound: T,
    /// Grid index of the minimizer per SIC slot.
    pub grid_index: Vec<usize>,
}

/// Log-spaced axis nodes `p_floor * (hi / p_floor)^(k / resolution)`.
pub fn grid_axis<T: Real>(spec: &GridSpec<T>, hi: T) -> Vec<T> {
    let n = spec.resolution;
    let lo_ln = spec.p_floor.ln();
    let span = hi.ln() - lo_ln;
    let nf = T::from_usize(n).expect("resolution fits in scalar");
    (0..=n)
        .map(|k| {
            if k == 0 {
                spec.p_floor
            } else if k == n {
                hi
            } else {
                let frac = T::from_usize(k).expect("index fits in scalar") / nf;
                (lo_ln + frac * span).exp()
            }
        })
        .collect()
}

#[derive(Clone)]
struct Best<T> {
    objective: T,
    index: Vec<usize>,
}

impl<T: Real> Best<T> {
    fn empty(m: usize) -> Self {
        Self { objective: T::infinity(), index: vec![usize::MAX; m] }
    }

    fn better(self, other: Self) -> Self {
        if other.objective < self.objective
            || (other.objective == self.objective && other.index < self.index)
        {
            other
        } else {
            self
        }
    }
}

struct Search<'a, T> {
    s: &'a Scenario<T>,
    nodes: &'a [T],
    roots: &'a [T],
}

impl<T: Real> Search<'_, T> {
    /// Depth-first over SIC slots from the strongest user down, carrying the
    /// interference, budget sums and the partial objective of slots above.
    #[allow(clippy::too_many_arguments)]
    fn descend(&self, slot: usize, partial: T, interference: T, power: T, amplitude: T, index: &mut [usize], best: &mut Best<T>) {
        let g = self.s.gains()[slot];
        let denom = self.s.noise_power() + g * interference;
        for (k, (&p, &root)) in self.nodes.iter().zip(self.roots).enumerate() {
            let power_k = power + p;
            let amplitude_k = amplitude + root;
            // nodes increase, so every later node breaks the budgets too
            if power_k > self.s.p_max() || amplitude_k > self.s.u_max() {
                break;
            }
            let rate = (g * p / denom).ln_1p();
            if !(rate > T::zero()) {
                continue;
            }
            let objective = partial + rate.recip();
            // lower slots only add positive terms
            if objective > best.objective {
                continue;
            }
            index[slot] = k;
            if slot == 0 {
                self.offer(objective, index, best);
            } else {
                self.descend(slot - 1, objective, interference + p, power_k, amplitude_k, index, best);
            }
        }
    }

    fn offer(&self, objective: T, index: &[usize], best: &mut Best<T>) {
        if objective < best.objective || (objective == best.objective && index < &best.index[..]) {
            let powers: Vec<T> = index.iter().map(|&k| self.nodes[k]).collect();
            if check_feasibility(self.s, &powers, T::zero()).feasible {
                best.objective = objective;
                best.index.copy_from_slice(index);
            }
        }
    }
}

/// Grid minimizer of the harmonic objective with an empirical error bound.
pub fn grid_search<T: Real>(s: &Scenario<T>, spec: &GridSpec<T>) -> Result<OracleResult<T>> {
    spec.validate()?;
    let m = s.num_users();
    if m > MAX_ORACLE_USERS {
        return Err(Error::Oracle(format!(
            "grid search supports at most {MAX_ORACLE_USERS} users, scenario has {m}"
        )));
    }
    let hi = s.p_max().min(s.u_max() * s.u_max());
    if !(hi > spec.p_floor) {
        return Err(Error::Oracle(format!(
            "no feasible grid point: min(P_max, U_max^2) = {hi} <= p_floor = {}",
            spec.p_floor
        )));
    }
    let nodes = grid_axis(spec, hi);
    let roots: Vec<T> = nodes.iter().map(|p| p.sqrt()).collect();
    let search = Search { s, nodes: &nodes, roots: &roots };

    let top = m - 1;
    let best = (0..nodes.len())
        .into_par_iter()
        .map(|k| {
            let mut best = Best::empty(m);
            let mut index = vec![0; m];
            let p = nodes[k];
            if p > s.p_max() || roots[k] > s.u_max() {
                return best;
            }
            let g = s.gains()[top];
            let rate = (g * p / s.noise_power()).ln_1p();
            if !(rate > T::zero()) {
                return best;
            }
            index[top] = k;
            if top == 0 {
                search.offer(rate.recip(), &index, &mut best);
            } else {
                search.descend(top - 1, rate.recip(), p, p, roots[k], &mut index, &mut best);
            }
            best
        })
        .reduce(|| Best::empty(m), Best::better);

    if !best.objective.is_finite() {
        return Err(Error::Oracle("no feasible grid point with positive rates".into()));
    }

    let sic: Vec<T> = best.index.iter().map(|&k| nodes[k]).collect();
    let sic_allocation = PowerAllocation::new(sic)?;
    let objective = rate_report(s, &sic_allocation)?.harmonic_objective;
    let error_bound = neighbourhood_spread(s, &nodes, &best.index, objective)?;

    Ok(OracleResult {
        allocation: PowerAllocation::new(s.to_original_order(sic_allocation.as_slice()))?,
        sic_allocation,
        objective,
        error_bound,
        grid_index: best.index,
    })
}

fn neighbourhood_spread<T: Real>(s: &Scenario<T>, nodes: &[T], center: &[usize], objective: T) -> Result<T> {
    let m = center.len();
    let mut spread = T::zero();
    let mut powers = vec![T::zero(); m];
    'offsets: for code in 0..3usize.pow(m as u32) {
        let mut c = code;
        for (slot, p) in powers.iter_mut().enumerate() {
            let k = center[slot] as isize + (c % 3) as isize - 1;
            c /= 3;
            if k < 0 || k as usize >= nodes.len() {
                continue 'offsets;
            }
            *p = nodes[k as usize];
        }
        if !check_feasibility(s, &powers, T::zero()).feasible {
            continue;
        }
        let h = rate_report(s, &PowerAllocation::new(powers.clone())?)?.harmonic_objective;
        if h.is_finite() {
            spread = spread.max((h - objective).abs());
        }
    }
    Ok(spread)
}

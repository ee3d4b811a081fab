//! Downlink NOMA cell model: problem instances, SIC-ordered SINRs, rates,
//! the harmonic objective and the constraints of the power control problem.
//!
//! Users are indexed in SIC order, i.e. by ascending power gain. User `m`
//! decodes and cancels every weaker user and sees users `m+1..M` as
//! interference. All powers are in mW; `dc_bias`, `peak_intensity` and the
//! amplitude budget `u_max` are in an amplitude unit consistent with
//! `sqrt(mW)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::Provenance;
use crate::scalar::Real;

/// Fairness index of the alpha-fair utility optimized by this crate
/// (harmonic utility).
pub const FAIRNESS_ALPHA: u32 = 2;

/// Default absolute tolerance of [`check_feasibility`].
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Converts a power in dBm to mW.
pub fn dbm_to_mw<T: Real>(dbm: T) -> T {
    T::lit(10.0).powf(dbm / T::lit(10.0))
}

/// A validated problem instance with gains in SIC order.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    gains: Vec<T>,
    permutation: Vec<usize>,
    noise_power: T,
    p_max: T,
    dc_bias: T,
    peak_intensity: T,
    pam_coefficient: T,
    u_max: T,
}

impl<T: Real> Scenario<T> {
    /// Validates the inputs, sorts the gains ascending (stable, so equal gains
    /// keep their input order) and derives `u_max = min(A/δ, (B-A)/δ)`.
    pub fn build(
        gains_unsorted: &[T],
        noise_power: T,
        p_max: T,
        dc_bias: T,
        peak_intensity: T,
        pam_coefficient: T,
    ) -> Result<Self> {
        let invalid = |field: &str, reason: String| Error::InvalidScenario {
            field: field.to_string(),
            reason,
        };
        if gains_unsorted.is_empty() {
            return Err(invalid("gains", "at least one user is required".into()));
        }
        for (i, &g) in gains_unsorted.iter().enumerate() {
            if !(g.is_finite() && g > T::zero()) {
                return Err(invalid(
                    &format!("gains[{i}]"),
                    format!("channel gain must be finite and > 0, got {g} (user has no line of sight)"),
                ));
            }
        }
        let positive = |field: &str, v: T| {
            if v.is_finite() && v > T::zero() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("noise_power_mw", noise_power)?;
        positive("p_max_mw", p_max)?;
        positive("dc_bias", dc_bias)?;
        positive("pam_coefficient", pam_coefficient)?;
        if !(peak_intensity.is_finite() && peak_intensity > dc_bias) {
            return Err(invalid(
                "peak_intensity",
                format!("must exceed dc_bias ({dc_bias}), got {peak_intensity}"),
            ));
        }

        let mut permutation: Vec<usize> = (0..gains_unsorted.len()).collect();
        permutation.sort_by(|&a, &b| {
            gains_unsorted[a]
                .partial_cmp(&gains_unsorted[b])
                .expect("finite gains")
        });
        let gains = permutation.iter().map(|&i| gains_unsorted[i]).collect();
        let u_max = (dc_bias / pam_coefficient).min((peak_intensity - dc_bias) / pam_coefficient);

        Ok(Self {
            gains,
            permutation,
            noise_power,
            p_max,
            dc_bias,
            peak_intensity,
            pam_coefficient,
            u_max,
        })
    }

    pub fn num_users(&self) -> usize {
        self.gains.len()
    }

    /// Power gains in SIC (ascending) order.
    pub fn gains(&self) -> &[T] {
        &self.gains
    }

    /// `permutation()[k]` is the original index of the user in SIC slot `k`.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn noise_power(&self) -> T {
        self.noise_power
    }

    pub fn p_max(&self) -> T {
        self.p_max
    }

    pub fn dc_bias(&self) -> T {
        self.dc_bias
    }

    pub fn peak_intensity(&self) -> T {
        self.peak_intensity
    }

    pub fn pam_coefficient(&self) -> T {
        self.pam_coefficient
    }

    pub fn u_max(&self) -> T {
        self.u_max
    }

    /// Gains in the order the users were given.
    pub fn original_gains(&self) -> Vec<T> {
        self.to_original_order(&self.gains)
    }

    /// Same users and signal constraints with a different power budget.
    pub fn with_p_max(&self, p_max: T) -> Result<Self> {
        if !(p_max.is_finite() && p_max > T::zero()) {
            return Err(Error::InvalidScenario {
                field: "p_max_mw".into(),
                reason: format!("must be finite and > 0, got {p_max}"),
            });
        }
        Ok(Self { p_max, ..self.clone() })
    }

    /// Reorders a per-user vector from SIC order to the original user order.
    pub fn to_original_order<V: Copy + Default>(&self, sic: &[V]) -> Vec<V> {
        let mut out = vec![V::default(); sic.len()];
        for (k, &orig) in self.permutation.iter().enumerate() {
            out[orig] = sic[k];
        }
        out
    }

    /// Reorders a per-user vector from the original user order to SIC order.
    pub fn to_sic_order<V: Copy>(&self, original: &[V]) -> Vec<V> {
        self.permutation.iter().map(|&orig| original[orig]).collect()
    }
}

/// Per-user transmit powers (mW), in SIC order unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerAllocation<T> {
    powers: Vec<T>,
}

impl<T: Real> PowerAllocation<T> {
    pub fn new(powers: Vec<T>) -> Result<Self> {
        if let Some((i, p)) = powers.iter().enumerate().find(|(_, p)| !(**p >= T::zero())) {
            return Err(Error::Domain(format!("power[{i}] must be >= 0, got {p}")));
        }
        Ok(Self { powers })
    }

    pub fn uniform(num_users: usize, power: T) -> Result<Self> {
        Self::new(vec![power; num_users])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.powers
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn into_vec(self) -> Vec<T> {
        self.powers
    }

    /// True when some power is so small that its square underflows, i.e. the
    /// allocation effectively switched a user off.
    pub fn is_degenerate(&self) -> bool {
        let floor = T::min_positive_value().sqrt();
        self.powers.iter().any(|&p| p < floor)
    }
}

/// SINR of user `m` (0-based SIC slot) after cancelling all weaker users.
///
/// # Panics
/// If `m` is out of range for the scenario or allocation.
pub fn sinr<T: Real>(s: &Scenario<T>, p: &PowerAllocation<T>, m: usize) -> T {
    let interference: T = p.powers[m + 1..].iter().copied().sum();
    let g = s.gains[m];
    g * p.powers[m] / (s.noise_power + g * interference)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport<T> {
    pub sinrs: Vec<T>,
    /// Achievable rates in nats/s/Hz (unit bandwidth).
    pub rates: Vec<T>,
    pub sum_rate: T,
    /// `sum(1 / rate)`, `+inf` when any rate is zero.
    pub harmonic_objective: T,
}

/// SINRs, rates and objective of an allocation given in SIC order.
pub fn rate_report<T: Real>(s: &Scenario<T>, p: &PowerAllocation<T>) -> Result<RateReport<T>> {
    let m_users = s.num_users();
    if p.len() != m_users {
        return Err(Error::DimensionMismatch { expected: m_users, found: p.len() });
    }
    let mut sinrs = vec![T::zero(); m_users];
    let mut interference = T::zero();
    for m in (0..m_users).rev() {
        let g = s.gains[m];
        sinrs[m] = g * p.powers[m] / (s.noise_power + g * interference);
        interference = interference + p.powers[m];
    }
    let rates: Vec<T> = sinrs.iter().map(|&g| g.ln_1p()).collect();
    let sum_rate = rates.iter().copied().sum();
    let harmonic_objective = harmonic_objective(&rates);
    Ok(RateReport { sinrs, rates, sum_rate, harmonic_objective })
}

/// `sum(1 / r)` with `+inf` as the value whenever a rate is not positive.
pub fn harmonic_objective<T: Real>(rates: &[T]) -> T {
    if rates.iter().any(|&r| !(r > T::zero())) {
        return T::infinity();
    }
    rates.iter().map(|&r| r.recip()).sum()
}

/// Slacks of the three constraint families; negative means violated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility<T> {
    /// `min_m p_m`.
    pub nonnegativity_slack: T,
    /// `P_max - sum(p)`.
    pub power_slack: T,
    /// `U_max - sum(sqrt(p))`, with negative powers contributing zero.
    pub amplitude_slack: T,
    pub feasible: bool,
}

impl<T: Real> Feasibility<T> {
    pub fn min_slack(&self) -> T {
        self.nonnegativity_slack.min(self.power_slack).min(self.amplitude_slack)
    }
}

pub fn check_feasibility<T: Real>(s: &Scenario<T>, powers: &[T], tol: T) -> Feasibility<T> {
    let nonnegativity_slack = powers.iter().copied().fold(T::infinity(), T::min);
    let total: T = powers.iter().copied().sum();
    let amplitude: T = powers.iter().map(|&p| p.max(T::zero()).sqrt()).sum();
    let power_slack = s.p_max - total;
    let amplitude_slack = s.u_max - amplitude;
    let feasible = [nonnegativity_slack, power_slack, amplitude_slack]
        .iter()
        .all(|&slack| slack >= -tol);
    Feasibility { nonnegativity_slack, power_slack, amplitude_slack, feasible }
}

/// On-disk scenario document. Gains are stored in the original user order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub gains: Vec<f64>,
    pub noise_power_mw: f64,
    pub p_max_mw: f64,
    pub dc_bias: f64,
    pub peak_intensity: f64,
    pub pam_coefficient: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl ScenarioFile {
    pub fn from_scenario<T: Real>(s: &Scenario<T>, provenance: Option<Provenance>) -> Self {
        Self {
            gains: s.original_gains().into_iter().map(Real::to_f64_lossy).collect(),
            noise_power_mw: s.noise_power.to_f64_lossy(),
            p_max_mw: s.p_max.to_f64_lossy(),
            dc_bias: s.dc_bias.to_f64_lossy(),
            peak_intensity: s.peak_intensity.to_f64_lossy(),
            pam_coefficient: s.pam_coefficient.to_f64_lossy(),
            provenance,
        }
    }

    pub fn to_scenario<T: Real>(&self) -> Result<Scenario<T>> {
        let gains: Vec<T> = self.gains.iter().map(|&g| T::lit(g)).collect();
        Scenario::build(
            &gains,
            T::lit(self.noise_power_mw),
            T::lit(self.p_max_mw),
            T::lit(self.dc_bias),
            T::lit(self.peak_intensity),
            T::lit(self.pam_coefficient),
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Parses a scenario document. Errors name the offending field path.
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                e.inner().to_string()
            } else {
                format!("field `{path}`: {}", e.inner())
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scen(gains: &[f64], n0: f64, p_max: f64, u_max: f64) -> Scenario<f64> {
        // A = u_max, B = 2 u_max, delta = 1 gives the requested amplitude budget
        Scenario::build(gains, n0, p_max, u_max, 2.0 * u_max, 1.0).unwrap()
    }

    #[test]
    fn build_sorts_and_records_permutation() {
        let s = scen(&[4.0, 1.0, 9.0], 1.0, 1.0, 1.0);
        assert_eq!(s.gains(), &[1.0, 4.0, 9.0]);
        assert_eq!(s.permutation(), &[1, 0, 2]);
        assert_eq!(s.original_gains(), vec![4.0, 1.0, 9.0]);
    }

    #[test]
    fn ties_keep_input_order() {
        let s = scen(&[2.0, 1.0, 2.0, 1.0], 1.0, 1.0, 1.0);
        assert_eq!(s.permutation(), &[1, 3, 0, 2]);
    }

    #[test]
    fn u_max_examples() {
        let s = Scenario::build(&[1.0], 1.0, 1.0, 20.0, 30.0, 1.0).unwrap();
        assert_eq!(s.u_max(), 10.0);
        let s = Scenario::build(&[1.0], 1.0, 1.0, 20.0, 30.0, 2.0).unwrap();
        assert_eq!(s.u_max(), 5.0);
    }

    #[test]
    fn build_rejections() {
        let e = Scenario::build(&[1.0, 0.0], 1.0, 1.0, 20.0, 30.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::InvalidScenario { ref field, .. } if field == "gains[1]"));
        assert!(Scenario::build(&[-1.0], 1.0, 1.0, 20.0, 30.0, 1.0).is_err());
        let e = Scenario::build(&[1.0], 1.0, 1.0, 30.0, 30.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::InvalidScenario { ref field, .. } if field == "peak_intensity"));
        assert!(Scenario::build(&[1.0], 1.0, 1.0, 20.0, 30.0, 0.0).is_err());
        assert!(Scenario::<f64>::build(&[], 1.0, 1.0, 20.0, 30.0, 1.0).is_err());
    }

    #[test]
    fn sinr_examples() {
        let s = scen(&[1e-7], 1e-9, 100.0, 100.0);
        let p = PowerAllocation::new(vec![10.0]).unwrap();
        assert_relative_eq!(sinr(&s, &p, 0), 1000.0, max_relative = 1e-14);

        let s = scen(&[1.0, 2.0], 1.0, 100.0, 100.0);
        let p = PowerAllocation::new(vec![3.0, 1.0]).unwrap();
        assert_eq!(sinr(&s, &p, 0), 1.5);
        assert_eq!(sinr(&s, &p, 1), 2.0);

        let p = PowerAllocation::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(sinr(&s, &p, 0), 0.0);
    }

    #[test]
    fn harmonic_examples() {
        assert_eq!(harmonic_objective(&[1.0, 2.0]), 1.5);
        let s = scen(&[1.0, 2.0], 1.0, 10.0, 10.0);
        let r = rate_report(&s, &PowerAllocation::uniform(2, 0.0).unwrap()).unwrap();
        assert_eq!(r.sum_rate, 0.0);
        assert_eq!(r.harmonic_objective, f64::INFINITY);
    }

    #[test]
    fn rate_report_reference() {
        // mpmath, 40 digits
        let s = scen(&[1e-8, 4e-8], 3.98e-11, 16.0, 10.0);
        let r = rate_report(&s, &PowerAllocation::new(vec![6.0, 2.0]).unwrap()).unwrap();
        assert_relative_eq!(r.sinrs[0], 2.9940418567051567, max_relative = 1e-13);
        assert_relative_eq!(r.sinrs[1], 2010.050251256281, max_relative = 1e-13);
        assert_relative_eq!(r.rates[0], 1.384803714834843, max_relative = 1e-13);
        assert_relative_eq!(r.rates[1], 7.606_412_377_653_531, max_relative = 1e-13);
        assert_relative_eq!(r.sum_rate, 8.991_216_092_488_374, max_relative = 1e-13);
        assert_relative_eq!(r.harmonic_objective, 0.853_592_024_949_457_2, max_relative = 1e-13);
        for (g, rate) in r.sinrs.iter().zip(&r.rates) {
            assert!((rate - g.ln_1p()).abs() <= 1e-12);
        }
    }

    #[test]
    fn rate_report_dimension_mismatch() {
        let s = scen(&[1.0, 2.0], 1.0, 10.0, 10.0);
        assert!(matches!(
            rate_report(&s, &PowerAllocation::uniform(3, 1.0).unwrap()),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn feasibility_examples() {
        let s = scen(&[1.0, 2.0], 1.0, 3.0, 3.0);
        let f = check_feasibility(&s, &[1.0, 1.0], FEASIBILITY_TOL);
        assert!(f.feasible);
        assert_eq!(f.power_slack, 1.0);
        assert_eq!(f.amplitude_slack, 1.0);

        let s = scen(&[1.0, 2.0], 1.0, 10.0, 3.0);
        let f = check_feasibility(&s, &[4.0, 4.0], FEASIBILITY_TOL);
        assert!(!f.feasible);
        assert_eq!(f.amplitude_slack, -1.0);
        assert!(f.power_slack > 0.0);

        let f = check_feasibility(&s, &[-1.0, 2.0], FEASIBILITY_TOL);
        assert!(!f.feasible);
        assert_eq!(f.nonnegativity_slack, -1.0);
    }

    #[test]
    fn negative_power_rejected_by_allocation() {
        assert!(PowerAllocation::new(vec![1.0, -1e-300]).is_err());
        assert!(PowerAllocation::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn scenario_file_roundtrip_is_lossless() {
        let s = Scenario::build(
            &[0.1 + 0.2, 1.0 / 3.0, 5.044_952_043_935_813e-11],
            dbm_to_mw(-104.0),
            16.0,
            20.0,
            30.0,
            1.0,
        )
        .unwrap();
        let file = ScenarioFile::from_scenario(&s, None);
        let parsed = ScenarioFile::from_json(&file.to_json()).unwrap();
        assert_eq!(parsed, file);
        assert_eq!(parsed.to_scenario::<f64>().unwrap(), s);
    }

    #[test]
    fn scenario_file_errors_name_field() {
        let e = ScenarioFile::from_json(
            r#"{"gains":[1.0],"noise_power_mw":"x","p_max_mw":1,"dc_bias":1,"peak_intensity":2,"pam_coefficient":1}"#,
        )
        .unwrap_err();
        assert!(e.contains("noise_power_mw"), "{e}");
        let e = ScenarioFile::from_json(r#"{"gains":[1.0]}"#).unwrap_err();
        assert!(e.contains("noise_power_mw"), "{e}");
        let e = ScenarioFile::from_json(
            r#"{"gains":[1.0],"noise_power_mw":1,"p_max_mw":1,"dc_bias":1,"peak_intensity":2,"pam_coefficient":1,"bogus":0}"#,
        )
        .unwrap_err();
        assert!(e.contains("bogus"), "{e}");
    }

    #[test]
    fn dbm_conversion() {
        assert_relative_eq!(dbm_to_mw(-104.0), 3.981_071_705_534_973e-11, max_relative = 1e-14);
        assert_eq!(dbm_to_mw(0.0), 1.0);
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
        (1usize..6).prop_flat_map(|m| {
            (
                prop::collection::vec(1e-10f64..1e-6, m),
                prop::collection::vec(0.0f64..5.0, m),
                1e-12f64..1e-9,
            )
        })
    }

    proptest! {
        #[test]
        fn last_user_sees_only_noise((g, p, n0) in instance()) {
            let s = scen(&g, n0, 100.0, 100.0);
            let last = s.num_users() - 1;
            let alloc = PowerAllocation::new(p).unwrap();
            let expected = s.gains()[last] * alloc.as_slice()[last] / n0;
            prop_assert_eq!(sinr(&s, &alloc, last), expected);
        }

        #[test]
        fn sinr_monotonicity((g, p, n0) in instance(), bump in 0.01f64..1.0) {
            let s = scen(&g, n0, 100.0, 100.0);
            let n = s.num_users();
            let base = PowerAllocation::new(p.clone()).unwrap();
            for m in 0..n {
                let mut own = p.clone();
                own[m] += bump;
                prop_assert!(sinr(&s, &PowerAllocation::new(own).unwrap(), m) >= sinr(&s, &base, m));
                for i in m + 1..n {
                    let mut other = p.clone();
                    other[i] += bump;
                    prop_assert!(sinr(&s, &PowerAllocation::new(other).unwrap(), m) <= sinr(&s, &base, m));
                }
            }
        }

        #[test]
        fn objective_symmetric_under_permutation((g, p, n0) in instance()) {
            let s = scen(&g, n0, 100.0, 100.0);
            let alloc = PowerAllocation::new(p).unwrap();
            let r = rate_report(&s, &alloc).unwrap();
            let shuffled = s.to_original_order(&r.rates);
            let h = harmonic_objective(&shuffled);
            prop_assert!(h == r.harmonic_objective || ((h - r.harmonic_objective) / h).abs() < 1e-14);
        }

        #[test]
        fn zero_allocation_always_feasible((g, _p, n0) in instance(), pm in 1e-3f64..100.0, um in 1e-3f64..100.0) {
            let s = scen(&g, n0, pm, um);
            let zeros = vec![0.0; s.num_users()];
            prop_assert!(check_feasibility(&s, &zeros, 0.0).feasible);
        }
    }
}

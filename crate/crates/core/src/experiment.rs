//! Simulation harness: seeded user drops in a single-LED room, `P_max`
//! sweeps and oracle cross-checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_dc_gain, LedConfig, OpticalFrontEnd, ReceiverPose, Vec3};
use crate::error::{Error, Result};
use crate::noma::{dbm_to_mw, rate_report, Scenario};
use crate::oracle::{grid_search, GridSpec};
use crate::solver::{solve, SolveStatus, SolverConfig};

/// Resamples allowed per user before generation gives up.
pub const MAX_RESAMPLES: usize = 1000;

/// Header of sweep CSV files.
pub const SWEEP_CSV_HEADER: &str =
    "p_max_mw,sum_rate_nats,harmonic_objective,status,outer_iters,newton_iters,kkt_residual";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomConfig {
    pub dimensions: Vec3<f64>,
    /// LED mounted here, facing straight down.
    pub led_position: Vec3<f64>,
    /// Height of the receiver plane; receivers face straight up.
    pub receiver_plane_z: f64,
    pub num_users: usize,
    pub seed: u64,
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self {
            dimensions: [10.0, 10.0, 3.0],
            led_position: [5.0, 5.0, 3.0],
            receiver_plane_z: 0.0,
            num_users: 20,
            seed: 0,
        }
    }
}

impl RoomConfig {
    pub fn validate(&self) -> Result<()> {
        let [dx, dy, dz] = self.dimensions;
        if !(dx > 0.0 && dy > 0.0 && dz > 0.0) {
            return Err(Error::Generation(format!("room dimensions must be positive, got {:?}", self.dimensions)));
        }
        let inside = self.led_position.iter().zip(&self.dimensions).all(|(&p, &d)| (0.0..=d).contains(&p));
        if !inside {
            return Err(Error::Generation("LED must be inside the room".into()));
        }
        if !(self.receiver_plane_z >= 0.0 && self.receiver_plane_z < self.led_position[2]) {
            return Err(Error::Generation("receiver plane must lie below the LED".into()));
        }
        if self.num_users == 0 {
            return Err(Error::Generation("at least one user is required".into()));
        }
        Ok(())
    }
}

/// Link budget and optics shared by every generated user.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkDefaults {
    pub optics: OpticalFrontEnd<f64>,
    pub semiangle_half_power: f64,
    pub noise_power_dbm: f64,
    pub p_max_mw: f64,
    pub dc_bias: f64,
    pub peak_intensity: f64,
    pub pam_coefficient: f64,
}

impl Default for LinkDefaults {
    fn default() -> Self {
        Self {
            optics: OpticalFrontEnd::default(),
            semiangle_half_power: 60f64.to_radians(),
            noise_power_dbm: -104.0,
            p_max_mw: 20.0,
            dc_bias: 20.0,
            peak_intensity: 30.0,
            pam_coefficient: 1.0,
        }
    }
}

/// Geometry a generated scenario came from, kept alongside it in files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub seed: u64,
    pub room_dimensions: Vec3<f64>,
    pub led_position: Vec3<f64>,
    pub semiangle_half_power_rad: f64,
    /// Receiver positions in the original user order.
    pub user_positions: Vec<Vec3<f64>>,
}

/// Drops `room.num_users` users uniformly on the receiver plane, redrawing
/// any user that falls outside the receiver field of view.
pub fn gen_scenario(room: &RoomConfig, link: &LinkDefaults) -> Result<(Scenario<f64>, Provenance)> {
    room.validate()?;
    let led = LedConfig::new(room.led_position, [0.0, 0.0, -1.0], link.semiangle_half_power)?;
    let mut rng = ChaCha8Rng::seed_from_u64(room.seed);
    let mut gains = Vec::with_capacity(room.num_users);
    let mut positions = Vec::with_capacity(room.num_users);
    for user in 0..room.num_users {
        let mut drawn = None;
        for _ in 0..MAX_RESAMPLES {
            let pos = [
                rng.random_range(0.0..room.dimensions[0]),
                rng.random_range(0.0..room.dimensions[1]),
                room.receiver_plane_z,
            ];
            let gain = channel_dc_gain(&led, &ReceiverPose::facing_up(pos), &link.optics)?;
            if gain.g > 0.0 {
                drawn = Some((pos, gain.g));
                break;
            }
        }
        let (pos, g) = drawn.ok_or_else(|| {
            Error::Generation(format!(
                "user {user} outside the field of view after {MAX_RESAMPLES} draws"
            ))
        })?;
        positions.push(pos);
        gains.push(g);
    }
    let scenario = Scenario::build(
        &gains,
        dbm_to_mw(link.noise_power_dbm),
        link.p_max_mw,
        link.dc_bias,
        link.peak_intensity,
        link.pam_coefficient,
    )?;
    let provenance = Provenance {
        seed: room.seed,
        room_dimensions: room.dimensions,
        led_position: room.led_position,
        semiangle_half_power_rad: link.semiangle_half_power,
        user_positions: positions,
    };
    Ok((scenario, provenance))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub p_max_values: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { p_max_values: (0..7).map(|k| 8.0 + 2.0 * k as f64).collect() }
    }
}

impl SweepSpec {
    pub fn new(p_max_values: Vec<f64>) -> Result<Self> {
        if p_max_values.is_empty() {
            return Err(Error::Domain("sweep needs at least one P_max value".into()));
        }
        if p_max_values.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Domain("sweep P_max values must be positive".into()));
        }
        if p_max_values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("sweep P_max values must be strictly increasing".into()));
        }
        Ok(Self { p_max_values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p_max_mw: f64,
    pub sum_rate_nats: f64,
    pub harmonic_objective: f64,
    pub status: SolveStatus,
    pub outer_iters: usize,
    pub newton_iters: usize,
    pub kkt_residual: f64,
}

/// One cold solve per `P_max` on the same user drop. `threads == 0` runs
/// sequentially; rows always come back in sweep order.
pub fn run_sweep(
    template: &Scenario<f64>,
    sweep: &SweepSpec,
    cfg: &SolverConfig<f64>,
    threads: usize,
) -> Result<Vec<SweepRow>> {
    let point = |&p_max: &f64| -> Result<SweepRow> {
        let s = template.with_p_max(p_max)?;
        let r = solve(&s, cfg)?;
        let report = rate_report(&s, &r.sic_allocation)?;
        Ok(SweepRow {
            p_max_mw: p_max,
            sum_rate_nats: report.sum_rate,
            harmonic_objective: report.harmonic_objective,
            status: r.status,
            outer_iters: r.outer_iterations,
            newton_iters: r.newton_iterations,
            kkt_residual: r.kkt_residual,
        })
    };
    if threads == 0 {
        return sweep.p_max_values.iter().map(point).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    pool.install(|| sweep.p_max_values.par_iter().map(point).collect())
}

/// Sweep rows as CSV with [`SWEEP_CSV_HEADER`]; floats use the shortest
/// representation that parses back to the same value.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(SWEEP_CSV_HEADER.split(',')).expect("in-memory write");
    }
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Relative change of the sum rate over the last sweep step.
pub fn final_step_gain(rows: &[SweepRow]) -> Option<f64> {
    let [.., a, b] = rows else { return None };
    Some((b.sum_rate_nats - a.sum_rate_nats) / a.sum_rate_nats)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub solver_status: SolveStatus,
    pub solver_objective: f64,
    pub oracle_objective: f64,
    pub oracle_error_bound: f64,
    /// `|oracle - solver| / solver`.
    pub relative_gap: f64,
    /// `max(1e-3, oracle_error_bound / solver)`.
    pub tolerance: f64,
    pub passed: bool,
}

/// Solves `s` and checks the result against the grid oracle.
pub fn compare_with_oracle(s: &Scenario<f64>, cfg: &SolverConfig<f64>, grid: &GridSpec<f64>) -> Result<OracleComparison> {
    let solved = solve(s, cfg)?;
    let oracle = grid_search(s, grid)?;
    let relative_gap = (oracle.objective - solved.objective).abs() / solved.objective;
    let tolerance = (1e-3f64).max(oracle.error_bound / solved.objective);
    Ok(OracleComparison {
        solver_status: solved.status,
        solver_objective: solved.objective,
        oracle_objective: oracle.objective,
        oracle_error_bound: oracle.error_bound,
        relative_gap,
        tolerance,
        passed: solved.status == SolveStatus::Optimal && relative_gap <= tolerance,
    })
}

/// Parses a solver config document; every key is optional, unknown keys are
/// rejected and errors name the offending key.
pub fn parse_solver_config(text: &str) -> std::result::Result<SolverConfig<f64>, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: SolverConfig<f64> = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("field `{path}`: {}", e.inner())
        }
    })?;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// Sweep parallelism from `NOMA_VLC_THREADS`; unset, empty or unparsable
/// means sequential.
pub fn threads_from_env() -> usize {
    std::env::var("NOMA_VLC_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

//! Built-in benchmark case: a five-period forecast on a small grid with six
//! resources.

use crate::config::{Config, ForecastSection, GridSection, OutputSection, SolverSection};
use crate::error::Result;
use crate::metrics::MetricsOptions;
use crate::model::{IbrSpec, SecurityLimits};
use crate::worst::{enumerate_scenarios, envelope_of, DEFAULT_SCENARIO_CAP};

/// Reference plant parameters for the benchmark.
pub const REFERENCE_H: f64 = 19.86;
pub const REFERENCE_D: f64 = 10.68;

pub fn benchmark_config() -> Config {
    let a = [3.0, 4.0, 1.0, 1.0, 2.0, 1.0];
    let b = [2.0, 3.0, 1.0, 1.0, 1.6, 1.0];
    let p = [12.12, 10.9, 1.22, 2.42, 8.48, 4.84];
    let ibrs = (0..6)
        .map(|i| IbrSpec { a_i: a[i], b_i: b[i], p_av: p[i], h_bounds: (0.1, 6.0), d_bounds: (0.1, 6.0) })
        .collect();
    Config {
        grid: GridSection { h0: 10.0, d0: 2.0, r: 10.0, t_sg: 7.0, h_dvpp: REFERENCE_H, d_dvpp: REFERENCE_D },
        limits: SecurityLimits::new(0.4, 0.55, 0.45),
        forecast: ForecastSection {
            n: Some(5),
            tau: 60.0,
            magnitudes: vec![0.095, 0.109, -0.204, -0.158, 0.253],
            probabilities: vec![0.8, 0.5, 0.8, 0.9, 0.7],
            candidate_offsets: None,
            power_base: 1.0,
        },
        ibrs,
        solver: SolverSection::default(),
        output: OutputSection::default(),
    }
}

/// Power base at which the worst-case nadir at `(h, d)` equals the nadir
/// limit exactly. Metrics are linear in the magnitudes, so this is the
/// limit divided by the unit-base envelope.
pub fn nadir_calibrated_base(cfg: &Config, h: f64, d: f64) -> Result<f64> {
    let mut unit = cfg.clone();
    unit.forecast.power_base = 1.0;
    let f = unit.forecast();
    let scenarios = enumerate_scenarios(&f, DEFAULT_SCENARIO_CAP)?;
    let derived = crate::response::derive_second_order(&unit.base_grid().with_dvpp(h, d))?;
    let env = envelope_of(&scenarios, &f, &derived, MetricsOptions::analytic())?;
    Ok(cfg.limits.nadir_lim / env.worst_nadir)
}

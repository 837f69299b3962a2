//! Enumeration of occurrence timings and the worst-case metric envelope.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{metrics_for, MetricsOptions, MetricsResult};
use crate::model::{DisturbanceForecast, DisturbanceScenario, GridParameters, SecurityLimits};
use crate::response::{derive_second_order, DerivedSecondOrder};
use crate::scalar::Scalar;

pub const DEFAULT_SCENARIO_CAP: usize = 1_000_000;

/// Envelope of the three metrics over a scenario set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstEnvelope<T> {
    pub worst_rocof: T,
    pub worst_nadir: T,
    pub worst_ss: T,
    pub rocof_witness: DisturbanceScenario<T>,
    pub nadir_witness: DisturbanceScenario<T>,
    pub ss_witness: DisturbanceScenario<T>,
    /// Index of each witness in enumeration order.
    pub witness_index: [usize; 3],
    pub scenario_count: usize,
}

impl<T: Scalar> WorstEnvelope<T> {
    pub fn as_metrics(&self) -> MetricsResult<T> {
        MetricsResult {
            m_rocof: self.worst_rocof,
            m_nadir: self.worst_nadir,
            m_ss: self.worst_ss,
            ..MetricsResult::zero()
        }
    }
}

/// One audit row: a scenario and its metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRow<T> {
    pub index: usize,
    pub scenario: DisturbanceScenario<T>,
    pub metrics: MetricsResult<T>,
}

/// Number of scenarios `|offsets|^n`, as a float so overflow is visible.
pub fn scenario_count<T: Scalar>(forecast: &DisturbanceForecast<T>) -> f64 {
    (forecast.candidate_offsets.len() as f64).powi(forecast.n as i32)
}

/// Cartesian product of the candidate offsets over all periods, all
/// disturbances active, in lexicographic order of the offset indices.
pub fn enumerate_scenarios<T: Scalar>(
    forecast: &DisturbanceForecast<T>,
    cap: usize,
) -> Result<Vec<DisturbanceScenario<T>>> {
    let count = scenario_count(forecast);
    if count > cap as f64 {
        return Err(Error::CombinatorialOverflow { count, cap });
    }
    let k = forecast.candidate_offsets.len();
    let n = forecast.n;
    let total = count as usize;
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let offsets: Vec<T> = idx.iter().map(|&j| forecast.candidate_offsets[j]).collect();
        out.push(DisturbanceScenario::from_offsets(forecast.tau, &offsets));
        for pos in (0..n).rev() {
            idx[pos] += 1;
            if idx[pos] < k {
                break;
            }
            idx[pos] = 0;
        }
    }
    Ok(out)
}

/// Metrics of every scenario, in input order.
pub fn evaluate_all<T: Scalar>(
    scenarios: &[DisturbanceScenario<T>],
    forecast: &DisturbanceForecast<T>,
    d: &DerivedSecondOrder<T>,
    opts: MetricsOptions,
) -> Result<Vec<MetricsResult<T>>> {
    scenarios.par_iter().map(|s| metrics_for(s, forecast, d, opts)).collect()
}

/// Envelope over `scenarios` for a derived system. Ties keep the earliest
/// scenario.
pub fn envelope_of<T: Scalar>(
    scenarios: &[DisturbanceScenario<T>],
    forecast: &DisturbanceForecast<T>,
    d: &DerivedSecondOrder<T>,
    opts: MetricsOptions,
) -> Result<WorstEnvelope<T>> {
    let all = evaluate_all(scenarios, forecast, d, opts)?;
    Ok(reduce(scenarios, &all))
}

fn reduce<T: Scalar>(scenarios: &[DisturbanceScenario<T>], all: &[MetricsResult<T>]) -> WorstEnvelope<T> {
    let mut best = [T::neg_infinity(); 3];
    let mut idx = [0usize; 3];
    for (i, m) in all.iter().enumerate() {
        for (k, v) in m.as_array().into_iter().enumerate() {
            if v > best[k] {
                best[k] = v;
                idx[k] = i;
            }
        }
    }
    if all.is_empty() {
        best = [T::zero(); 3];
    }
    let pick = |i: usize| scenarios.get(i).cloned().unwrap_or_else(|| DisturbanceScenario::from_times(vec![]));
    WorstEnvelope {
        worst_rocof: best[0],
        worst_nadir: best[1],
        worst_ss: best[2],
        rocof_witness: pick(idx[0]),
        nadir_witness: pick(idx[1]),
        ss_witness: pick(idx[2]),
        witness_index: idx,
        scenario_count: all.len(),
    }
}

/// Worst-case envelope of the forecast at the grid's plant parameters.
/// `limits` is accepted for symmetry with the feasibility check and does not
/// affect the envelope.
pub fn find_worst<T: Scalar>(
    forecast: &DisturbanceForecast<T>,
    grid: &GridParameters<T>,
    _limits: &SecurityLimits<T>,
) -> Result<WorstEnvelope<T>> {
    let scenarios = enumerate_scenarios(forecast, DEFAULT_SCENARIO_CAP)?;
    let d = derive_second_order(grid)?;
    envelope_of(&scenarios, forecast, &d, MetricsOptions::default())
}

/// Every scenario with its metrics, for audit dumps.
pub fn audit_rows<T: Scalar>(
    forecast: &DisturbanceForecast<T>,
    grid: &GridParameters<T>,
    cap: usize,
) -> Result<Vec<ScenarioRow<T>>> {
    let scenarios = enumerate_scenarios(forecast, cap)?;
    let d = derive_second_order(grid)?;
    let all = evaluate_all(&scenarios, forecast, &d, MetricsOptions::default())?;
    Ok(scenarios
        .into_iter()
        .zip(all)
        .enumerate()
        .map(|(index, (scenario, metrics))| ScenarioRow { index, scenario, metrics })
        .collect())
}

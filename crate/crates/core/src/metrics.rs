//! RoCoF, nadir and steady-state metrics of a scenario and their check
//! against security limits.

use serde::Serialize;

use crate::error::Result;
use crate::model::{DisturbanceForecast, DisturbanceScenario, GridParameters, SecurityLimits};
use crate::response::{derive_second_order, sequential_response, DerivedSecondOrder};
use crate::scalar::{lit, Scalar};
use crate::trajectory::SegmentedTrajectory;

/// Where a metric attains its value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness<T> {
    pub time: T,
    pub segment: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsResult<T> {
    pub m_rocof: T,
    pub m_nadir: T,
    pub m_ss: T,
    pub rocof_witness: Option<Witness<T>>,
    pub nadir_witness: Option<Witness<T>>,
    pub ss_witness: Option<Witness<T>>,
    /// Every gap between occurrence instants is at least `5/(ζωn)`.
    pub spacing_ok: bool,
}

impl<T: Scalar> MetricsResult<T> {
    pub fn zero() -> Self {
        Self {
            m_rocof: T::zero(),
            m_nadir: T::zero(),
            m_ss: T::zero(),
            rocof_witness: None,
            nadir_witness: None,
            ss_witness: None,
            spacing_ok: true,
        }
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.m_rocof, self.m_nadir, self.m_ss]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConstraintReport {
    pub rocof_ok: bool,
    pub nadir_ok: bool,
    pub ss_ok: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricsOptions {
    /// Extra uniform nadir sweep with step `tau / divisions`; `None` relies on
    /// the analytic candidate set alone.
    pub sweep_divisions: Option<usize>,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self { sweep_divisions: Some(600) }
    }
}

impl MetricsOptions {
    pub fn analytic() -> Self {
        Self { sweep_divisions: None }
    }

    fn sweep_step<T: Scalar>(&self, tau: T) -> Option<T> {
        self.sweep_divisions
            .filter(|&k| k > 0)
            .map(|k| tau / T::from_usize_lossy(k))
    }
}

/// First extremum of the single-step response opened at `t_start`:
/// `t_start + (atan(ωd/(ζωn)) − φ)/ωd`, moved by multiples of `π/ωd` into
/// `(t_start, t_start + 2π/ωd]` when needed.
pub fn peak_time<T: Scalar>(d: &DerivedSecondOrder<T>, t_start: T) -> T {
    let period = T::PI() / d.omega_d;
    let mut dt = (d.omega_d.atan2(d.decay_rate()) - d.phi) / d.omega_d;
    while dt <= T::zero() {
        dt = dt + period;
    }
    while dt > lit::<T>(2.0) * period {
        dt = dt - period;
    }
    t_start + dt
}

/// Metrics of `scenario` at the grid's current plant parameters.
pub fn evaluate_metrics<T: Scalar>(
    scenario: &DisturbanceScenario<T>,
    forecast: &DisturbanceForecast<T>,
    grid: &GridParameters<T>,
) -> Result<MetricsResult<T>> {
    let d = derive_second_order(grid)?;
    metrics_for(scenario, forecast, &d, MetricsOptions::default())
}

/// Metrics for an already-derived system.
pub fn metrics_for<T: Scalar>(
    scenario: &DisturbanceScenario<T>,
    forecast: &DisturbanceForecast<T>,
    d: &DerivedSecondOrder<T>,
    opts: MetricsOptions,
) -> Result<MetricsResult<T>> {
    let traj = sequential_response(scenario, forecast, d)?;
    Ok(metrics_of_trajectory(&traj, forecast, d, opts))
}

pub fn metrics_of_trajectory<T: Scalar>(
    traj: &SegmentedTrajectory<T>,
    forecast: &DisturbanceForecast<T>,
    d: &DerivedSecondOrder<T>,
    opts: MetricsOptions,
) -> MetricsResult<T> {
    if traj.segments.is_empty() {
        return MetricsResult::zero();
    }
    let mut out = MetricsResult::zero();

    // RoCoF at each (possibly stacked) occurrence instant.
    let two_h = lit::<T>(2.0) * d.h_total;
    for (i, seg) in traj.segments.iter().enumerate() {
        let r = seg.step.abs() / two_h;
        if out.rocof_witness.is_none() || r > out.m_rocof {
            out.m_rocof = r;
            out.rocof_witness = Some(Witness { time: seg.start, segment: Some(i) });
        }
    }

    // Nadir: peak instants, window start and horizon, plus every other
    // interior extremum and segment endpoint.
    let mut nadir = |v: T, time: T, segment: Option<usize>| {
        let a = v.abs();
        if out.nadir_witness.is_none() || a > out.m_nadir {
            out.m_nadir = a;
            out.nadir_witness = Some(Witness { time, segment });
        }
    };
    let first = traj.segments[0].start;
    nadir(traj.value(first), first, Some(0));
    for (i, seg) in traj.segments.iter().enumerate() {
        let tp = peak_time(d, seg.start);
        if tp <= seg.end {
            nadir(seg.value(tp), tp, Some(i));
        }
    }
    nadir(traj.value(traj.horizon), traj.horizon, traj.segment_at(traj.horizon));
    for (seg, t) in traj.candidates() {
        let v = seg.map_or(T::zero(), |i| traj.value_in(i, t));
        nadir(v, t, seg);
    }
    if let Some(step) = opts.sweep_step(forecast.tau) {
        for t in crate::trajectory::sweep_times(traj.horizon, step) {
            nadir(traj.value(t), t, traj.segment_at(t));
        }
    }

    // Steady state: cumulative value at each segment's right boundary.
    for (i, seg) in traj.segments.iter().enumerate() {
        let v = seg.value(seg.end).abs();
        if out.ss_witness.is_none() || v > out.m_ss {
            out.m_ss = v;
            out.ss_witness = Some(Witness { time: seg.end, segment: Some(i) });
        }
    }

    out.spacing_ok = crate::response::spacing_holds(traj, d, lit(5.0));
    out
}

/// Non-strict comparison of each metric with its limit.
pub fn check_limits<T: Scalar>(m: &MetricsResult<T>, limits: &SecurityLimits<T>) -> ConstraintReport {
    let rocof_ok = m.m_rocof <= limits.rocof_lim;
    let nadir_ok = m.m_nadir <= limits.nadir_lim;
    let ss_ok = m.m_ss <= limits.ss_lim;
    ConstraintReport { rocof_ok, nadir_ok, ss_ok, pass: rocof_ok && nadir_ok && ss_ok }
}

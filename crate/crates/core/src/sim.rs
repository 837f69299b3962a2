//! Fixed-step time-domain simulation of the aggregate swing/governor loop.
//!
//! ```text
//! 2(H0 + H_dvpp)·dΔf/dt = ΔP_e(t) − (D0 + D_dvpp)·Δf − p_sg
//! T_sg·dp_sg/dt        = R·Δf − p_sg
//! ```
//!
//! `ΔP_e` is a staircase of probability-weighted steps. Steps are integrated
//! with classical RK4 and split at every disturbance instant so that the input
//! is constant inside each step.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DisturbanceForecast, DisturbanceScenario, GridParameters};
use crate::scalar::{lit, Scalar};
use crate::trajectory::disturbance_groups;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SimState<T> {
    pub delta_f: T,
    pub p_sg: T,
    pub t: T,
}

/// Sampled simulation output. All columns have the same length.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TimeSeries<T> {
    pub t: Vec<T>,
    pub delta_f: Vec<T>,
    pub rocof: Vec<T>,
    pub p_sg: Vec<T>,
    /// Plant injection `−(2 H_dvpp·dΔf/dt + D_dvpp·Δf)`.
    pub p_dvpp: Vec<T>,
}

impl<T: Scalar> TimeSeries<T> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn max_abs_delta_f(&self) -> T {
        self.delta_f.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

struct Plant<T> {
    two_h: T,
    d: T,
    r: T,
    t_sg: T,
}

impl<T: Scalar> Plant<T> {
    fn rhs(&self, p_e: T, df: T, p: T) -> (T, T) {
        ((p_e - self.d * df - p) / self.two_h, (self.r * df - p) / self.t_sg)
    }

    fn rk4(&self, p_e: T, s: (T, T), h: T) -> (T, T) {
        let half = lit::<T>(0.5);
        let six = lit::<T>(6.0);
        let two = lit::<T>(2.0);
        let k1 = self.rhs(p_e, s.0, s.1);
        let k2 = self.rhs(p_e, s.0 + half * h * k1.0, s.1 + half * h * k1.1);
        let k3 = self.rhs(p_e, s.0 + half * h * k2.0, s.1 + half * h * k2.1);
        let k4 = self.rhs(p_e, s.0 + h * k3.0, s.1 + h * k3.1);
        (
            s.0 + h / six * (k1.0 + two * k2.0 + two * k3.0 + k4.0),
            s.1 + h / six * (k1.1 + two * k2.1 + two * k3.1 + k4.1),
        )
    }
}

/// Simulate `scenario` from a zero initial state on `[0, horizon]`, sampling
/// every `dt` (the last sample is exactly `horizon`).
pub fn simulate<T: Scalar>(
    scenario: &DisturbanceScenario<T>,
    forecast: &DisturbanceForecast<T>,
    grid: &GridParameters<T>,
    dt: T,
    horizon: T,
) -> Result<TimeSeries<T>> {
    if !(dt > T::zero()) || !(horizon >= T::zero()) {
        return Err(Error::InvalidInput(format!("dt ({dt}) must be > 0 and horizon ({horizon}) >= 0")));
    }
    let max_dt = grid.t_sg / lit(100.0);
    if dt > max_dt {
        return Err(Error::StepTooLarge { dt: dt.as_f64(), max: max_dt.as_f64() });
    }
    let events: Vec<(T, T)> = disturbance_groups(scenario, forecast)?
        .into_iter()
        .map(|(t, w, _)| (t, w))
        .collect();
    let plant = Plant {
        two_h: lit::<T>(2.0) * grid.h_total(),
        d: grid.d_total(),
        r: grid.r,
        t_sg: grid.t_sg,
    };
    let input_at = |t: T| -> T {
        events.iter().take_while(|(te, _)| *te <= t).fold(T::zero(), |acc, (_, w)| acc + *w)
    };

    let n_steps = (horizon / dt).ceil().to_usize().unwrap_or(0);
    let mut out = TimeSeries::default();
    let mut state = SimState { delta_f: T::zero(), p_sg: T::zero(), t: T::zero() };
    let record = |s: &SimState<T>, out: &mut TimeSeries<T>| {
        let p_e = input_at(s.t);
        let rocof = plant.rhs(p_e, s.delta_f, s.p_sg).0;
        out.t.push(s.t);
        out.delta_f.push(s.delta_f);
        out.rocof.push(rocof);
        out.p_sg.push(s.p_sg);
        out.p_dvpp.push(-(lit::<T>(2.0) * grid.h_dvpp * rocof + grid.d_dvpp * s.delta_f));
    };
    record(&state, &mut out);
    for k in 1..=n_steps {
        let target = if k == n_steps { horizon } else { T::from_usize_lossy(k) * dt };
        // Split the step at every event strictly inside (t, target).
        let t0 = state.t;
        let mut t = t0;
        let mut y = (state.delta_f, state.p_sg);
        for &(te, _) in events.iter().filter(|(te, _)| *te > t0 && *te < target) {
            y = plant.rk4(input_at(t), y, te - t);
            t = te;
        }
        y = plant.rk4(input_at(t), y, target - t);
        state = SimState { delta_f: y.0, p_sg: y.1, t: target };
        if !(y.0.is_finite() && y.1.is_finite()) {
            return Err(Error::InvalidInput(format!("simulation diverged at t = {target}")));
        }
        record(&state, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::{derive_second_order, step_response};

    fn grid() -> GridParameters<f64> {
        GridParameters::new(10.0, 2.0, 10.0, 7.0).with_dvpp(19.86, 10.68)
    }

    #[test]
    fn quiet_scenario_stays_at_zero() {
        let f = DisturbanceForecast::new(60.0, vec![0.1, -0.2], vec![1.0, 1.0]);
        let s = DisturbanceScenario::quiet(&f);
        let ts = simulate(&s, &f, &grid(), 0.01, 120.0).unwrap();
        assert!(ts.delta_f.iter().chain(&ts.p_sg).chain(&ts.p_dvpp).all(|v| *v == 0.0));
    }

    #[test]
    fn step_matches_closed_form() {
        let g = grid();
        let d = derive_second_order(&g).unwrap();
        let f = DisturbanceForecast::new(1000.0, vec![-0.204], vec![1.0]);
        let s = DisturbanceScenario::from_offsets(1000.0, &[0.0]);
        let horizon = 10.0 / d.decay_rate();
        let ts = simulate(&s, &f, &g, 1e-2, horizon).unwrap();
        let scale = 0.204 / (g.d_total() + g.r);
        let err = ts
            .t
            .iter()
            .zip(&ts.delta_f)
            .map(|(t, v)| (v - step_response(&d, -0.204, *t)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6 * scale, "err = {err}");
    }

    #[test]
    fn fourth_order_convergence() {
        let g = grid();
        let f = DisturbanceForecast::new(1000.0, vec![0.253], vec![1.0]);
        let s = DisturbanceScenario::from_offsets(1000.0, &[0.0]);
        let end = |dt: f64| *simulate(&s, &f, &g, dt, 8.0).unwrap().delta_f.last().unwrap();
        let (a, b, c) = (end(0.064), end(0.032), end(0.016));
        assert!((c - b).abs() <= (b - a).abs() / 16.0 * 1.1, "{a} {b} {c}");
    }

    #[test]
    fn pure_inertia_has_constant_rocof() {
        let g = GridParameters::new(10.0, 0.0, 0.0, 7.0).with_dvpp(5.0, 0.0);
        let f = DisturbanceForecast::new(100.0, vec![0.3], vec![1.0]);
        let s = DisturbanceScenario::from_offsets(100.0, &[10.0]);
        let ts = simulate(&s, &f, &g, 0.05, 50.0).unwrap();
        for (t, r) in ts.t.iter().zip(&ts.rocof) {
            if *t >= 10.0 {
                assert!((r - 0.3_f64 / 30.0).abs() < 1e-14);
            } else {
                assert_eq!(*r, 0.0);
            }
        }
    }

    #[test]
    fn settled_injection_matches_damping_share() {
        let g = grid();
        let d = derive_second_order(&g).unwrap();
        let f = DisturbanceForecast::new(1000.0, vec![1.0], vec![1.0]);
        let s = DisturbanceScenario::from_offsets(1000.0, &[0.0]);
        let ts = simulate(&s, &f, &g, 0.02, 25.0 / d.decay_rate()).unwrap();
        let expect = -g.d_dvpp / (g.d_total() + g.r);
        assert!((ts.p_dvpp.last().unwrap() - expect).abs() < 1e-6);
        assert!((ts.delta_f.last().unwrap() - 1.0 / 22.68).abs() < 1e-8);
    }

    #[test]
    fn rejects_large_step() {
        let f = DisturbanceForecast::new(60.0, vec![0.1], vec![1.0]);
        let s = DisturbanceScenario::from_offsets(60.0, &[0.0]);
        assert!(matches!(simulate(&s, &f, &grid(), 0.1, 60.0), Err(Error::StepTooLarge { .. })));
    }
}

//! Regulation power of the plant and of each inverter-based resource, the
//! inertia/damping weights of that power, and reserve extraction.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::model::{DisturbanceForecast, DisturbanceScenario};
use crate::response::DerivedSecondOrder;
use crate::scalar::{lit, Scalar};
use crate::trajectory::{compose, DampedSinusoid, SegmentedTrajectory};

/// Coefficients of the injection of an entity holding `(h_part, d_part)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InjectionCoefficients<T> {
    pub a_coef: T,
    pub b_coef: T,
    pub c_coef: T,
}

impl<T: Scalar> InjectionCoefficients<T> {
    pub fn new(d: &DerivedSecondOrder<T>, h_part: T, d_part: T, delta_p: T) -> Self {
        let two = lit::<T>(2.0);
        let wn2 = d.omega_n * d.omega_n;
        let a_coef = delta_p * d_part / wn2;
        let b_coef = two * d.t_sg * h_part * delta_p - delta_p * d_part / wn2;
        let c_coef = (d.t_sg * d_part + two * h_part) * delta_p - two * d.zeta * delta_p * d_part / d.omega_n;
        Self { a_coef, b_coef, c_coef }
    }

    /// `I(t) = −(A + e^{−σt}((C − σB)/ωd·sin ωd t + B·cos ωd t)) / (2HT)`.
    pub fn kernel(&self, d: &DerivedSecondOrder<T>) -> DampedSinusoid<T> {
        let sigma = d.decay_rate();
        let den = lit::<T>(2.0) * d.h_total * d.t_sg;
        DampedSinusoid {
            offset: -self.a_coef / den,
            sin_coef: -(self.c_coef - sigma * self.b_coef) / d.omega_d / den,
            cos_coef: -self.b_coef / den,
            decay: sigma,
            omega: d.omega_d,
        }
    }
}

/// Injection at `t` after a single step `delta_p` applied at 0.
pub fn step_injection<T: Scalar>(d: &DerivedSecondOrder<T>, h_part: T, d_part: T, delta_p: T, t: T) -> T {
    InjectionCoefficients::new(d, h_part, d_part, delta_p).kernel(d).value(t)
}

/// Weights `(α, β)` with `I(t) = α·h_part + β·d_part`.
pub fn alpha_beta<T: Scalar>(d: &DerivedSecondOrder<T>, delta_p: T, t: T) -> (T, T) {
    let two = lit::<T>(2.0);
    let tt = d.t_sg;
    let sigma = d.decay_rate();
    let wn = d.omega_n;
    let wd = d.omega_d;
    let den = two * d.h_total * tt;
    let e = (-sigma * t).exp();
    let (s, c) = (wd * t).sin_cos();
    let alpha = -e * ((two * delta_p - sigma * two * tt * delta_p) / wd * s + two * tt * delta_p * c) / den;
    let k = delta_p / (wn * wn);
    let beta = -(k + e * ((tt * delta_p - two * d.zeta * delta_p / wn + sigma * k) / wd * s - k * c)) / den;
    (alpha, beta)
}

/// Piecewise injection over a scenario for the entity `(h_part, d_part)`.
pub fn sequential_injection<T: Scalar>(
    scenario: &DisturbanceScenario<T>,
    forecast: &DisturbanceForecast<T>,
    d: &DerivedSecondOrder<T>,
    h_part: T,
    d_part: T,
) -> Result<SegmentedTrajectory<T>> {
    compose(scenario, forecast, |w| InjectionCoefficients::new(d, h_part, d_part, w).kernel(d))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReservePair<T> {
    pub r_up: T,
    /// Signed, never positive.
    pub r_down: T,
    /// Time of each trajectory's maximum.
    pub up_times: Vec<T>,
    /// Time of each trajectory's minimum.
    pub down_times: Vec<T>,
}

/// Per-trajectory `(max, t_max, min, t_min)` from analytic candidates and an
/// optional uniform sweep.
pub fn peaks<T: Scalar>(trajectories: &[SegmentedTrajectory<T>], sweep_step: Option<T>) -> Vec<(T, T, T, T)> {
    trajectories
        .par_iter()
        .map(|tr| {
            let (hi, lo) = tr.extrema(sweep_step);
            (hi.value, hi.time, lo.value, lo.time)
        })
        .collect()
}

/// Upward reserve `max(Σ max_t, 0)` and downward reserve `min(Σ min_t, 0)`.
pub fn reserves<T: Scalar>(trajectories: &[SegmentedTrajectory<T>], sweep_step: Option<T>) -> ReservePair<T> {
    let p = peaks(trajectories, sweep_step);
    let up = p.iter().fold(T::zero(), |acc, x| acc + x.0);
    let down = p.iter().fold(T::zero(), |acc, x| acc + x.2);
    ReservePair {
        r_up: up.max(T::zero()),
        r_down: down.min(T::zero()),
        up_times: p.iter().map(|x| x.1).collect(),
        down_times: p.iter().map(|x| x.3).collect(),
    }
}

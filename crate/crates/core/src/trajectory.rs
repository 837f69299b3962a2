//! Piecewise trajectories built from shifted damped-sinusoid segments.
//!
//! Every segment has the shape `baseline + offset + e^{-στ}(s·sin ωτ + c·cos ωτ)`
//! with `τ` the time since the segment opened, so interior extrema are known
//! in closed form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DisturbanceForecast, DisturbanceScenario};
use crate::scalar::{lit, Scalar};

/// `offset + e^{-decay·t}·(sin_coef·sin(omega·t) + cos_coef·cos(omega·t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DampedSinusoid<T> {
    pub offset: T,
    pub sin_coef: T,
    pub cos_coef: T,
    pub decay: T,
    pub omega: T,
}

impl<T: Scalar> DampedSinusoid<T> {
    pub fn value(&self, t: T) -> T {
        let (s, c) = (self.omega * t).sin_cos();
        self.offset + (-self.decay * t).exp() * (self.sin_coef * s + self.cos_coef * c)
    }

    pub fn derivative(&self, t: T) -> T {
        let (s, c) = (self.omega * t).sin_cos();
        let p = self.omega * self.sin_coef - self.decay * self.cos_coef;
        let q = self.decay * self.sin_coef + self.omega * self.cos_coef;
        (-self.decay * t).exp() * (p * c - q * s)
    }

    /// Value as `t -> inf`.
    pub fn final_value(&self) -> T {
        self.offset
    }

    /// Roots of the derivative in `(0, len]`, ascending.
    ///
    /// The derivative is `e^{-σt}·ρ·cos(ωt + ψ)`, so the roots are
    /// `t_k = (π/2 − ψ + kπ)/ω`.
    pub fn critical_times(&self, len: T) -> Vec<T> {
        let p = self.omega * self.sin_coef - self.decay * self.cos_coef;
        let q = self.decay * self.sin_coef + self.omega * self.cos_coef;
        if (p == T::zero() && q == T::zero()) || self.omega <= T::zero() || len <= T::zero() {
            return Vec::new();
        }
        let pi = T::PI();
        let psi = q.atan2(p);
        let mut x0 = T::FRAC_PI_2() - psi;
        while x0 < T::zero() {
            x0 = x0 + pi;
        }
        while x0 >= pi {
            x0 = x0 - pi;
        }
        let step = pi / self.omega;
        let mut t = x0 / self.omega;
        let mut out = Vec::new();
        // The cap only guards against pathological omega; amplitudes are
        // negligible long before it is reached.
        while t <= len && out.len() < 100_000 {
            if t > T::zero() {
                out.push(t);
            }
            t = t + step;
        }
        out
    }

    pub fn scaled(&self, k: T) -> Self {
        Self {
            offset: self.offset * k,
            sin_coef: self.sin_coef * k,
            cos_coef: self.cos_coef * k,
            ..*self
        }
    }
}

/// One piece of a sequential trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment<T> {
    pub start: T,
    pub end: T,
    /// Value carried in from the previous segment at `start`.
    pub baseline: T,
    /// Probability-weighted disturbance step applied at `start`.
    pub step: T,
    /// 0-based forecast indices of the disturbances stacked at `start`.
    pub members: Vec<usize>,
    pub kernel: DampedSinusoid<T>,
}

impl<T: Scalar> Segment<T> {
    pub fn value(&self, t: T) -> T {
        self.baseline + self.kernel.value(t - self.start)
    }

    pub fn derivative(&self, t: T) -> T {
        self.kernel.derivative(t - self.start)
    }

    pub fn len(&self) -> T {
        self.end - self.start
    }

    /// Absolute times where an extremum over `[start, end]` can occur.
    pub fn candidate_times(&self) -> Vec<T> {
        let mut out = vec![self.start];
        out.extend(self.kernel.critical_times(self.len()).into_iter().map(|t| self.start + t));
        out.push(self.end);
        out
    }
}

/// Extremum of a trajectory with the segment that attains it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum<T> {
    pub value: T,
    pub time: T,
    pub segment: Option<usize>,
}

/// Piecewise composition over a scenario; zero before the first occurrence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentedTrajectory<T> {
    pub segments: Vec<Segment<T>>,
    pub horizon: T,
}

impl<T: Scalar> SegmentedTrajectory<T> {
    /// Index of the segment governing `t` (right-continuous at boundaries).
    pub fn segment_at(&self, t: T) -> Option<usize> {
        let idx = self.segments.partition_point(|s| s.start <= t);
        idx.checked_sub(1)
    }

    pub fn value(&self, t: T) -> T {
        self.segment_at(t).map_or(T::zero(), |i| self.segments[i].value(t))
    }

    pub fn derivative(&self, t: T) -> T {
        self.segment_at(t).map_or(T::zero(), |i| self.segments[i].derivative(t))
    }

    /// Value at `t` using the formula of segment `seg` (gives left limits at
    /// boundaries when `seg` is the earlier segment).
    pub fn value_in(&self, seg: usize, t: T) -> T {
        self.segments[seg].value(t)
    }

    /// All `(segment, time)` pairs where an extremum over `[0, horizon]` can occur.
    pub fn candidates(&self) -> Vec<(Option<usize>, T)> {
        let mut out = Vec::new();
        if self.segments.first().map_or(true, |s| s.start > T::zero()) {
            out.push((None, T::zero()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            out.extend(s.candidate_times().into_iter().map(|t| (Some(i), t)));
        }
        out
    }

    fn eval_candidate(&self, seg: Option<usize>, t: T) -> T {
        seg.map_or(T::zero(), |i| self.value_in(i, t))
    }

    /// Largest and smallest values over `[0, horizon]` from the analytic
    /// candidates, optionally cross-checked by a uniform sweep.
    pub fn extrema(&self, sweep_step: Option<T>) -> (Extremum<T>, Extremum<T>) {
        let mut hi = Extremum { value: T::neg_infinity(), time: T::zero(), segment: None };
        let mut lo = Extremum { value: T::infinity(), time: T::zero(), segment: None };
        let mut visit = |seg: Option<usize>, t: T, v: T| {
            if v > hi.value {
                hi = Extremum { value: v, time: t, segment: seg };
            }
            if v < lo.value {
                lo = Extremum { value: v, time: t, segment: seg };
            }
        };
        for (seg, t) in self.candidates() {
            visit(seg, t, self.eval_candidate(seg, t));
        }
        if let Some(step) = sweep_step {
            for t in sweep_times(self.horizon, step) {
                let seg = self.segment_at(t);
                visit(seg, t, self.value(t));
            }
        }
        (hi, lo)
    }

    /// Largest `|value|` over `[0, horizon]`.
    pub fn max_abs(&self, sweep_step: Option<T>) -> Extremum<T> {
        let (hi, lo) = self.extrema(sweep_step);
        if lo.value.abs() > hi.value.abs() {
            Extremum { value: lo.value.abs(), ..lo }
        } else {
            Extremum { value: hi.value.abs(), ..hi }
        }
    }

    /// Uniformly sampled `(t, value)` pairs.
    pub fn sample(&self, step: T) -> Vec<(T, T)> {
        sweep_times(self.horizon, step).into_iter().map(|t| (t, self.value(t))).collect()
    }

    /// Smallest gap between consecutive occurrence instants, and from the
    /// last instant to the horizon.
    pub fn min_spacing(&self) -> Option<T> {
        let mut starts: Vec<T> = self.segments.iter().map(|s| s.start).collect();
        starts.push(self.horizon);
        starts.windows(2).map(|w| w[1] - w[0]).reduce(T::min)
    }
}

/// `0, step, 2·step, …, horizon` (horizon always included).
pub fn sweep_times<T: Scalar>(horizon: T, step: T) -> Vec<T> {
    if horizon <= T::zero() || step <= T::zero() {
        return vec![T::zero()];
    }
    let n = (horizon / step).ceil().to_usize().unwrap_or(0);
    let mut out: Vec<T> = (0..n).map(|k| T::from_usize_lossy(k) * step).collect();
    out.push(horizon);
    out
}

/// Disturbance groups: active disturbances at coincident instants merge into
/// one step equal to the sum of their probability-weighted magnitudes.
pub(crate) fn disturbance_groups<T: Scalar>(
    scenario: &DisturbanceScenario<T>,
    forecast: &DisturbanceForecast<T>,
) -> Result<Vec<(T, T, Vec<usize>)>> {
    if scenario.len() != forecast.n || scenario.active_flags.len() != forecast.n {
        return Err(Error::ScenarioMismatch {
            expected: forecast.n,
            found: scenario.len().min(scenario.active_flags.len()),
        });
    }
    if forecast.magnitudes.len() != forecast.n || forecast.probabilities.len() != forecast.n {
        return Err(Error::InvalidInput("forecast vectors do not match n".into()));
    }
    let tol = lit::<T>(1e-9) * forecast.tau.max(T::one());
    let mut groups: Vec<(T, T, Vec<usize>)> = Vec::new();
    let mut last_time = T::neg_infinity();
    for i in 0..forecast.n {
        let t = scenario.occurrence_times[i];
        if !t.is_finite() || t + tol < last_time {
            return Err(Error::InvalidInput(format!(
                "occurrence times must be finite and non-decreasing (period {})",
                i + 1
            )));
        }
        last_time = t;
        if !scenario.active_flags[i] {
            continue;
        }
        let w = forecast.weighted(i);
        match groups.last_mut() {
            Some((t0, step, members)) if (t - *t0).abs() <= tol => {
                *step = *step + w;
                members.push(i);
            }
            _ => groups.push((t, w, vec![i])),
        }
    }
    Ok(groups)
}

/// Chain segments per the carried-baseline rule: each segment adds its own
/// step response on top of the previous segment's value at its start.
pub(crate) fn compose<T: Scalar>(
    scenario: &DisturbanceScenario<T>,
    forecast: &DisturbanceForecast<T>,
    kernel: impl Fn(T) -> DampedSinusoid<T>,
) -> Result<SegmentedTrajectory<T>> {
    let groups = disturbance_groups(scenario, forecast)?;
    let horizon = forecast.horizon();
    let mut segments: Vec<Segment<T>> = Vec::with_capacity(groups.len());
    for (k, (start, step, members)) in groups.iter().enumerate() {
        let end = groups.get(k + 1).map_or(horizon.max(*start), |g| g.0);
        let baseline = segments.last().map_or(T::zero(), |prev| prev.value(*start));
        segments.push(Segment {
            start: *start,
            end,
            baseline,
            step: *step,
            members: members.clone(),
            kernel: kernel(*step),
        });
    }
    Ok(SegmentedTrajectory { segments, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds() -> DampedSinusoid<f64> {
        DampedSinusoid { offset: 0.3, sin_coef: 0.7, cos_coef: -0.3, decay: 0.15, omega: 0.4 }
    }

    #[test]
    fn critical_times_zero_the_derivative() {
        let k = ds();
        let ts = k.critical_times(60.0);
        assert!(ts.len() >= 5);
        for t in ts {
            assert!(k.derivative(t).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let k = ds();
        for &t in &[0.1, 1.0, 3.3, 10.0] {
            let h = 1e-6;
            let fd = (k.value(t + h) - k.value(t - h)) / (2.0 * h);
            assert!((fd - k.derivative(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn critical_times_catch_dense_extremum() {
        let k = ds();
        let len = 40.0;
        let mut best = f64::NEG_INFINITY;
        let mut t = 0.0;
        while t <= len {
            best = best.max(k.value(t));
            t += 1e-3;
        }
        let cand = k
            .critical_times(len)
            .into_iter()
            .chain([0.0, len])
            .map(|t| k.value(t))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(cand >= best - 1e-9);
    }

    #[test]
    fn sweep_includes_horizon() {
        let ts = sweep_times(1.0, 0.3);
        assert_eq!(ts.len(), 5);
        assert_eq!(*ts.last().unwrap(), 1.0);
    }
}

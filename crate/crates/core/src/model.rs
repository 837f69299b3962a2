//! Input data: grid constants, disturbance forecast, security limits and the
//! inverter-based resources available to the plant.
//!
//! Units: powers in one consistent system (MW or per-unit), frequency in Hz,
//! time in s. Inertia constants are power·s/Hz, damping and droop power/Hz.

use serde::{Deserialize, Serialize};

use crate::scalar::{lit, Scalar};

/// Synchronous-generator/load constants plus the plant's aggregate virtual
/// inertia and damping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParameters<T> {
    pub h0: T,
    pub d0: T,
    pub r: T,
    pub t_sg: T,
    #[serde(default)]
    pub h_dvpp: T,
    #[serde(default)]
    pub d_dvpp: T,
}

impl<T: Scalar> GridParameters<T> {
    pub fn new(h0: T, d0: T, r: T, t_sg: T) -> Self {
        Self { h0, d0, r, t_sg, h_dvpp: T::zero(), d_dvpp: T::zero() }
    }

    /// Same grid with the plant set to `(h_dvpp, d_dvpp)`.
    pub fn with_dvpp(&self, h_dvpp: T, d_dvpp: T) -> Self {
        Self { h_dvpp, d_dvpp, ..*self }
    }

    /// Combined inertia `H0 + H_dvpp`.
    pub fn h_total(&self) -> T {
        self.h0 + self.h_dvpp
    }

    /// Combined damping `D0 + D_dvpp`.
    pub fn d_total(&self) -> T {
        self.d0 + self.d_dvpp
    }
}

/// Frequency-security thresholds in Hz/s (RoCoF) and Hz (nadir, steady state).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityLimits<T> {
    pub rocof_lim: T,
    pub nadir_lim: T,
    pub ss_lim: T,
}

impl<T: Scalar> SecurityLimits<T> {
    pub fn new(rocof_lim: T, nadir_lim: T, ss_lim: T) -> Self {
        Self { rocof_lim, nadir_lim, ss_lim }
    }
}

/// Forecast of `n` sequential disturbances, one per window of length `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceForecast<T> {
    pub n: usize,
    pub tau: T,
    pub magnitudes: Vec<T>,
    pub probabilities: Vec<T>,
    /// Admissible occurrence offsets inside each window, ascending.
    pub candidate_offsets: Vec<T>,
}

impl<T: Scalar> DisturbanceForecast<T> {
    /// Forecast with the default offset grid `{0, tau/2, tau}`.
    pub fn new(tau: T, magnitudes: Vec<T>, probabilities: Vec<T>) -> Self {
        let candidate_offsets = Self::default_offsets(tau);
        Self { n: magnitudes.len(), tau, magnitudes, probabilities, candidate_offsets }
    }

    pub fn default_offsets(tau: T) -> Vec<T> {
        vec![T::zero(), lit::<T>(0.5) * tau, tau]
    }

    pub fn with_offsets(mut self, offsets: Vec<T>) -> Self {
        self.candidate_offsets = offsets;
        self
    }

    /// End of the regulation period, `n * tau`.
    pub fn horizon(&self) -> T {
        T::from_usize_lossy(self.n) * self.tau
    }

    /// Probability-weighted magnitude `P_i * dP_i` (0-based index).
    pub fn weighted(&self, i: usize) -> T {
        self.probabilities[i] * self.magnitudes[i]
    }

    /// Copy with every magnitude multiplied by `k`.
    pub fn scaled(&self, k: T) -> Self {
        let mut out = self.clone();
        out.magnitudes.iter_mut().for_each(|m| *m = *m * k);
        out
    }
}

/// One point of the timing-uncertainty set: absolute occurrence instants and
/// which disturbances are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceScenario<T> {
    pub occurrence_times: Vec<T>,
    pub active_flags: Vec<bool>,
}

impl<T: Scalar> DisturbanceScenario<T> {
    /// All-active scenario with `t_i = (i-1) tau + offsets[i]`.
    pub fn from_offsets(tau: T, offsets: &[T]) -> Self {
        let occurrence_times = offsets
            .iter()
            .enumerate()
            .map(|(i, &o)| T::from_usize_lossy(i) * tau + o)
            .collect::<Vec<_>>();
        let active_flags = vec![true; offsets.len()];
        Self { occurrence_times, active_flags }
    }

    /// All-active scenario from absolute instants.
    pub fn from_times(times: Vec<T>) -> Self {
        let n = times.len();
        Self { occurrence_times: times, active_flags: vec![true; n] }
    }

    /// `n` periods, none active.
    pub fn quiet(forecast: &DisturbanceForecast<T>) -> Self {
        Self::from_offsets(forecast.tau, &vec![T::zero(); forecast.n]).deactivated()
    }

    pub fn deactivated(mut self) -> Self {
        self.active_flags.iter_mut().for_each(|f| *f = false);
        self
    }

    pub fn len(&self) -> usize {
        self.occurrence_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occurrence_times.is_empty()
    }

    /// Offsets `t_i - (i-1) tau` within each window.
    pub fn offsets(&self, tau: T) -> Vec<T> {
        self.occurrence_times
            .iter()
            .enumerate()
            .map(|(i, &t)| t - T::from_usize_lossy(i) * tau)
            .collect()
    }
}

/// One inverter-based resource inside the plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbrSpec<T> {
    /// Cost per unit of virtual inertia.
    pub a_i: T,
    /// Cost per unit of virtual damping.
    pub b_i: T,
    /// Largest admissible |injection|.
    pub p_av: T,
    pub h_bounds: (T, T),
    pub d_bounds: (T, T),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub failures: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn names(&self, path: &str) -> bool {
        self.failures.iter().any(|v| v.path == path)
    }

    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.failures.push(Violation { path: path.into(), message: message.into() });
    }

    fn check<T: Scalar>(&mut self, path: &str, value: T, ok: bool, rule: &str) {
        if !value.is_finite() {
            self.fail(path, format!("must be finite, got {value}"));
        } else if !ok {
            self.fail(path, format!("must be {rule}, got {value}"));
        }
    }
}

/// Check every input invariant. Indices in reported paths are 1-based to
/// match the period/resource numbering (`probabilities[3]` is the third period).
pub fn validate_inputs<T: Scalar>(
    grid: &GridParameters<T>,
    forecast: &DisturbanceForecast<T>,
    limits: &SecurityLimits<T>,
    ibrs: &[IbrSpec<T>],
) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let zero = T::zero();

    rep.check("grid.h0", grid.h0, grid.h0 > zero, "> 0");
    rep.check("grid.d0", grid.d0, grid.d0 >= zero, ">= 0");
    rep.check("grid.r", grid.r, grid.r >= zero, ">= 0");
    rep.check("grid.t_sg", grid.t_sg, grid.t_sg > zero, "> 0");
    rep.check("grid.h_dvpp", grid.h_dvpp, grid.h_dvpp >= zero, ">= 0");
    rep.check("grid.d_dvpp", grid.d_dvpp, grid.d_dvpp >= zero, ">= 0");

    rep.check("limits.rocof_lim", limits.rocof_lim, limits.rocof_lim >= zero, ">= 0");
    rep.check("limits.nadir_lim", limits.nadir_lim, limits.nadir_lim >= zero, ">= 0");
    rep.check("limits.ss_lim", limits.ss_lim, limits.ss_lim >= zero, ">= 0");

    rep.check("forecast.tau", forecast.tau, forecast.tau > zero, "> 0");
    if forecast.magnitudes.len() != forecast.n {
        rep.fail(
            "forecast.magnitudes",
            format!("length {} differs from n = {}", forecast.magnitudes.len(), forecast.n),
        );
    }
    if forecast.probabilities.len() != forecast.n {
        rep.fail(
            "forecast.probabilities",
            format!("length {} differs from n = {}", forecast.probabilities.len(), forecast.n),
        );
    }
    for (i, &m) in forecast.magnitudes.iter().enumerate() {
        rep.check(&format!("forecast.magnitudes[{}]", i + 1), m, true, "finite");
    }
    for (i, &p) in forecast.probabilities.iter().enumerate() {
        rep.check(
            &format!("forecast.probabilities[{}]", i + 1),
            p,
            p >= zero && p <= T::one(),
            "within [0, 1]",
        );
    }
    if forecast.n > 0 && forecast.candidate_offsets.is_empty() {
        rep.fail("forecast.candidate_offsets", "must not be empty when n > 0");
    }
    for (i, &o) in forecast.candidate_offsets.iter().enumerate() {
        let path = format!("forecast.candidate_offsets[{}]", i + 1);
        rep.check(&path, o, o >= zero && o <= forecast.tau, "within [0, tau]");
        if i > 0 && o.is_finite() && o <= forecast.candidate_offsets[i - 1] {
            rep.fail(path, "offsets must be strictly ascending");
        }
    }

    for (i, ibr) in ibrs.iter().enumerate() {
        let p = format!("ibrs[{}]", i + 1);
        rep.check(&format!("{p}.a_i"), ibr.a_i, ibr.a_i >= zero, ">= 0");
        rep.check(&format!("{p}.b_i"), ibr.b_i, ibr.b_i >= zero, ">= 0");
        rep.check(&format!("{p}.p_av"), ibr.p_av, ibr.p_av > zero, "> 0");
        for (name, (lo, hi)) in [("h_bounds", ibr.h_bounds), ("d_bounds", ibr.d_bounds)] {
            rep.check(&format!("{p}.{name}[1]"), lo, true, "finite");
            rep.check(&format!("{p}.{name}[2]"), hi, true, "finite");
            if lo.is_finite() && hi.is_finite() && lo > hi {
                rep.fail(format!("{p}.{name}"), format!("min {lo} exceeds max {hi}"));
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_ii() -> (GridParameters<f64>, DisturbanceForecast<f64>, SecurityLimits<f64>) {
        let grid = GridParameters::new(10.0, 2.0, 10.0, 7.0);
        let forecast = DisturbanceForecast::new(
            60.0,
            vec![0.095, 0.109, -0.204, -0.158, 0.253],
            vec![0.8, 0.5, 0.8, 0.9, 0.7],
        );
        (grid, forecast, SecurityLimits::new(0.4, 0.55, 0.45))
    }

    #[test]
    fn table_ii_passes() {
        let (g, f, l) = table_ii();
        let rep = validate_inputs(&g, &f, &l, &[]);
        assert!(rep.is_pass(), "{rep:?}");
        assert_eq!(f.candidate_offsets, vec![0.0, 30.0, 60.0]);
    }

    #[test]
    fn zero_governor_time_constant_is_named() {
        let (mut g, f, l) = table_ii();
        g.t_sg = 0.0;
        let rep = validate_inputs(&g, &f, &l, &[]);
        assert!(rep.names("grid.t_sg"));
        assert_eq!(rep.failures.len(), 1);
    }

    #[test]
    fn probability_above_one_is_named() {
        let (g, mut f, l) = table_ii();
        f.probabilities[2] = 1.2;
        let rep = validate_inputs(&g, &f, &l, &[]);
        assert!(rep.names("forecast.probabilities[3]"), "{rep:?}");
    }

    #[test]
    fn offsets_and_lengths() {
        let (g, mut f, l) = table_ii();
        f.candidate_offsets = vec![0.0, 30.0, 30.0, 61.0];
        f.magnitudes.pop();
        let rep = validate_inputs(&g, &f, &l, &[]);
        assert!(rep.names("forecast.candidate_offsets[3]"));
        assert!(rep.names("forecast.candidate_offsets[4]"));
        assert!(rep.names("forecast.magnitudes"));
    }

    #[test]
    fn ibr_bounds_and_capacity() {
        let (g, f, l) = table_ii();
        let bad = IbrSpec { a_i: -1.0, b_i: 1.0, p_av: 0.0, h_bounds: (6.0, 0.1), d_bounds: (0.1, 6.0) };
        let rep = validate_inputs(&g, &f, &l, &[bad]);
        assert!(rep.names("ibrs[1].a_i"));
        assert!(rep.names("ibrs[1].p_av"));
        assert!(rep.names("ibrs[1].h_bounds"));
        assert!(!rep.names("ibrs[1].d_bounds"));
    }

    #[test]
    fn validation_is_idempotent_and_pure() {
        let (g, mut f, l) = table_ii();
        f.probabilities[0] = -0.1;
        let before = f.clone();
        let a = validate_inputs(&g, &f, &l, &[]);
        let b = validate_inputs(&g, &f, &l, &[]);
        assert_eq!(a, b);
        assert_eq!(f, before);
    }

    #[test]
    fn empty_forecast_validates() {
        let (g, _, l) = table_ii();
        let f = DisturbanceForecast::<f64>::new(60.0, vec![], vec![]);
        assert!(validate_inputs(&g, &f, &l, &[]).is_pass());
        assert_eq!(f.horizon(), 0.0);
    }

    #[test]
    fn scenario_offsets_roundtrip() {
        let s = DisturbanceScenario::from_offsets(60.0, &[60.0, 0.0, 60.0, 0.0, 0.0]);
        assert_eq!(s.occurrence_times, vec![60.0, 60.0, 180.0, 180.0, 240.0]);
        assert_eq!(s.offsets(60.0), vec![60.0, 0.0, 60.0, 0.0, 0.0]);
    }
}

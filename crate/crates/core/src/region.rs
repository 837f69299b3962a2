//! Robust feasible set of aggregate (inertia, damping) pairs.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{check_limits, MetricsOptions};
use crate::model::{DisturbanceForecast, DisturbanceScenario, GridParameters, SecurityLimits};
use crate::response::derive_second_order;
use crate::scalar::{lit, Scalar};
use crate::worst::{enumerate_scenarios, envelope_of, WorstEnvelope, DEFAULT_SCENARIO_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    Rocof,
    Nadir,
    Ss,
    Overdamped,
}

impl FailureCause {
    pub const ALL: [FailureCause; 4] = [Self::Rocof, Self::Nadir, Self::Ss, Self::Overdamped];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rocof => "rocof",
            Self::Nadir => "nadir",
            Self::Ss => "ss",
            Self::Overdamped => "overdamped",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// Set of failure causes packed in a byte.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct CauseSet(u8);

impl CauseSet {
    pub fn insert(&mut self, c: FailureCause) {
        self.0 |= c.bit();
    }

    pub fn contains(self, c: FailureCause) -> bool {
        self.0 & c.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = FailureCause> {
        FailureCause::ALL.into_iter().filter(move |c| self.contains(*c))
    }

    /// `|`-joined cause names, or `none`.
    pub fn label(self) -> String {
        if self.is_empty() {
            return "none".into();
        }
        self.iter().map(FailureCause::name).collect::<Vec<_>>().join("|")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityVerdict<T> {
    pub feasible: bool,
    pub causes: CauseSet,
    /// `None` when the point is overdamped.
    pub envelope: Option<WorstEnvelope<T>>,
}

/// Reusable membership test: the scenario set is enumerated once.
#[derive(Debug, Clone)]
pub struct FeasibilityCheck<T> {
    pub forecast: DisturbanceForecast<T>,
    pub base: GridParameters<T>,
    pub limits: SecurityLimits<T>,
    pub options: MetricsOptions,
    scenarios: Vec<DisturbanceScenario<T>>,
}

impl<T: Scalar> FeasibilityCheck<T> {
    /// Region checks use the analytic extremum candidates without the uniform
    /// sweep.
    pub fn new(forecast: &DisturbanceForecast<T>, base: &GridParameters<T>, limits: &SecurityLimits<T>) -> Result<Self> {
        Self::with_options(forecast, base, limits, MetricsOptions::analytic(), DEFAULT_SCENARIO_CAP)
    }

    pub fn with_options(
        forecast: &DisturbanceForecast<T>,
        base: &GridParameters<T>,
        limits: &SecurityLimits<T>,
        options: MetricsOptions,
        cap: usize,
    ) -> Result<Self> {
        Ok(Self {
            forecast: forecast.clone(),
            base: *base,
            limits: *limits,
            options,
            scenarios: enumerate_scenarios(forecast, cap)?,
        })
    }

    /// Check against an explicit scenario set instead of the enumeration.
    pub fn with_scenarios(
        forecast: &DisturbanceForecast<T>,
        base: &GridParameters<T>,
        limits: &SecurityLimits<T>,
        options: MetricsOptions,
        scenarios: Vec<DisturbanceScenario<T>>,
    ) -> Self {
        Self { forecast: forecast.clone(), base: *base, limits: *limits, options, scenarios }
    }

    pub fn scenarios(&self) -> &[DisturbanceScenario<T>] {
        &self.scenarios
    }

    pub fn verdict(&self, h_dvpp: T, d_dvpp: T) -> FeasibilityVerdict<T> {
        let grid = self.base.with_dvpp(h_dvpp, d_dvpp);
        let mut causes = CauseSet::default();
        let d = match derive_second_order(&grid) {
            Ok(d) => d,
            Err(_) => {
                causes.insert(FailureCause::Overdamped);
                return FeasibilityVerdict { feasible: false, causes, envelope: None };
            }
        };
        let env = match envelope_of(&self.scenarios, &self.forecast, &d, self.options) {
            Ok(e) => e,
            Err(_) => {
                causes.insert(FailureCause::Overdamped);
                return FeasibilityVerdict { feasible: false, causes, envelope: None };
            }
        };
        let rep = check_limits(&env.as_metrics(), &self.limits);
        if !rep.rocof_ok {
            causes.insert(FailureCause::Rocof);
        }
        if !rep.nadir_ok {
            causes.insert(FailureCause::Nadir);
        }
        if !rep.ss_ok {
            causes.insert(FailureCause::Ss);
        }
        FeasibilityVerdict { feasible: rep.pass, causes, envelope: Some(env) }
    }

    pub fn is_feasible(&self, h_dvpp: T, d_dvpp: T) -> bool {
        self.verdict(h_dvpp, d_dvpp).feasible
    }
}

/// One-off membership test at `(h_dvpp, d_dvpp)`.
pub fn is_feasible<T: Scalar>(
    h_dvpp: T,
    d_dvpp: T,
    forecast: &DisturbanceForecast<T>,
    grid_base: &GridParameters<T>,
    limits: &SecurityLimits<T>,
) -> Result<FeasibilityVerdict<T>> {
    Ok(FeasibilityCheck::new(forecast, grid_base, limits)?.verdict(h_dvpp, d_dvpp))
}

/// Scan box over `(H_dvpp, D_dvpp)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RegionBounds<T> {
    pub h_min: T,
    pub h_max: T,
    pub d_min: T,
    pub d_max: T,
}

impl<T: Scalar> Default for RegionBounds<T> {
    fn default() -> Self {
        Self { h_min: T::zero(), h_max: lit(40.0), d_min: T::zero(), d_max: lit(20.0) }
    }
}

/// Sample points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Resolution {
    pub h_steps: usize,
    pub d_steps: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Self { h_steps: 200, d_steps: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionGrid<T> {
    pub h_axis: Vec<T>,
    pub d_axis: Vec<T>,
    /// Row-major, `h` index first.
    pub feasible: Vec<bool>,
    pub causes: Vec<CauseSet>,
    pub bounds: RegionBounds<T>,
    pub resolution: Resolution,
}

impl<T: Scalar> RegionGrid<T> {
    pub fn index(&self, i_h: usize, j_d: usize) -> usize {
        i_h * self.d_axis.len() + j_d
    }

    pub fn at(&self, i_h: usize, j_d: usize) -> bool {
        self.feasible[self.index(i_h, j_d)]
    }

    pub fn cause(&self, i_h: usize, j_d: usize) -> CauseSet {
        self.causes[self.index(i_h, j_d)]
    }

    pub fn feasible_count(&self) -> usize {
        self.feasible.iter().filter(|&&f| f).count()
    }

    pub fn h_step(&self) -> T {
        axis_step(&self.h_axis)
    }

    pub fn d_step(&self) -> T {
        axis_step(&self.d_axis)
    }

    /// Runs of equal membership along `h` for every `d` sample:
    /// `(j_d, i_start, i_end_inclusive, feasible)`.
    pub fn runs(&self) -> Vec<(usize, usize, usize, bool)> {
        let mut out = Vec::new();
        for j in 0..self.d_axis.len() {
            let mut start = 0;
            for i in 1..=self.h_axis.len() {
                if i == self.h_axis.len() || self.at(i, j) != self.at(start, j) {
                    out.push((j, start, i - 1, self.at(start, j)));
                    start = i;
                }
            }
        }
        out
    }
}

fn axis_step<T: Scalar>(axis: &[T]) -> T {
    if axis.len() < 2 {
        T::zero()
    } else {
        axis[1] - axis[0]
    }
}

/// `n` evenly spaced samples from `lo` to `hi` inclusive.
pub fn linspace<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    let last = T::from_usize_lossy(n.saturating_sub(1).max(1));
    (0..n)
        .map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * T::from_usize_lossy(k) / last })
        .collect()
}

/// Rasterized membership over `bounds`.
pub fn scan_region<T: Scalar>(check: &FeasibilityCheck<T>, bounds: RegionBounds<T>, resolution: Resolution) -> Result<RegionGrid<T>> {
    if resolution.h_steps < 2 || resolution.d_steps < 2 {
        return Err(Error::InvalidInput(format!(
            "resolution must be at least 2 per axis, got {}x{}",
            resolution.h_steps, resolution.d_steps
        )));
    }
    let ok = |lo: T, hi: T| lo.is_finite() && hi.is_finite() && lo >= T::zero() && hi > lo;
    if !ok(bounds.h_min, bounds.h_max) || !ok(bounds.d_min, bounds.d_max) {
        return Err(Error::InvalidInput("region bounds must be finite, non-negative and increasing".into()));
    }
    let h_axis = linspace(bounds.h_min, bounds.h_max, resolution.h_steps);
    let d_axis = linspace(bounds.d_min, bounds.d_max, resolution.d_steps);
    let cells: Vec<(bool, CauseSet)> = (0..h_axis.len() * d_axis.len())
        .into_par_iter()
        .map(|k| {
            let v = check.verdict(h_axis[k / d_axis.len()], d_axis[k % d_axis.len()]);
            (v.feasible, v.causes)
        })
        .collect();
    let (feasible, causes) = cells.into_iter().unzip();
    Ok(RegionGrid { h_axis, d_axis, feasible, causes, bounds, resolution })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forecast() -> DisturbanceForecast<f64> {
        DisturbanceForecast::new(
            60.0,
            vec![0.095, 0.109, -0.204, -0.158, 0.253],
            vec![0.8, 0.5, 0.8, 0.9, 0.7],
        )
    }

    fn base() -> GridParameters<f64> {
        GridParameters::new(10.0, 2.0, 10.0, 7.0)
    }

    /// Limits placing the nadir boundary through (19.86, 10.68).
    fn tight() -> (DisturbanceForecast<f64>, SecurityLimits<f64>) {
        let f = forecast();
        let lim = SecurityLimits::new(1e9, 1e9, 1e9);
        let v = is_feasible(19.86, 10.68, &f, &base(), &lim).unwrap();
        let env = v.envelope.unwrap();
        (f, SecurityLimits::new(env.worst_rocof * 1.5, env.worst_nadir, env.worst_ss * 1.5))
    }

    #[test]
    fn vacuous_limits_accept_underdamped_points() {
        let lim = SecurityLimits::new(1e9, 1e9, 1e9);
        let c = FeasibilityCheck::new(&forecast(), &base(), &lim).unwrap();
        for (h, d) in [(0.0, 0.0), (40.0, 20.0), (3.0, 17.0)] {
            let v = c.verdict(h, d);
            assert_eq!(v.feasible, !v.causes.contains(FailureCause::Overdamped));
        }
    }

    #[test]
    fn overdamped_is_a_cause_not_an_error() {
        let lim = SecurityLimits::new(1e9, 1e9, 1e9);
        let g = GridParameters::new(0.1, 2.0, 10.0, 7.0);
        let v = is_feasible(0.0, 60.0, &forecast(), &g, &lim).unwrap();
        assert!(!v.feasible);
        assert!(v.causes.contains(FailureCause::Overdamped));
        assert_eq!(v.causes.label(), "overdamped");
    }

    #[test]
    fn boundary_point_is_feasible_and_lower_inertia_is_not() {
        let (f, lim) = tight();
        let c = FeasibilityCheck::new(&f, &base(), &lim).unwrap();
        assert!(c.is_feasible(19.86, 10.68));
        let v = c.verdict(14.0, 10.68);
        assert!(!v.feasible && v.causes.contains(FailureCause::Nadir));
    }

    #[test]
    fn zero_limits_reject_everything() {
        let lim = SecurityLimits::new(1e-12, 1e-12, 1e-12);
        let c = FeasibilityCheck::new(&forecast(), &base(), &lim).unwrap();
        let r = scan_region(&c, RegionBounds::default(), Resolution { h_steps: 5, d_steps: 4 }).unwrap();
        assert_eq!(r.feasible_count(), 0);
        assert!(r
            .causes
            .iter()
            .all(|c| c.contains(FailureCause::Rocof) ^ c.contains(FailureCause::Overdamped)));
    }

    #[test]
    fn cells_match_direct_checks_and_refinement_is_pointwise() {
        let (f, lim) = tight();
        let c = FeasibilityCheck::new(&f, &base(), &lim).unwrap();
        let coarse = scan_region(&c, RegionBounds::default(), Resolution { h_steps: 5, d_steps: 5 }).unwrap();
        let fine = scan_region(&c, RegionBounds::default(), Resolution { h_steps: 9, d_steps: 9 }).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let direct = c.verdict(coarse.h_axis[i], coarse.d_axis[j]);
                assert_eq!(direct.feasible, coarse.at(i, j));
                assert_eq!(direct.causes, coarse.cause(i, j));
                assert_eq!(fine.h_axis[2 * i], coarse.h_axis[i]);
                assert_eq!(fine.at(2 * i, 2 * j), coarse.at(i, j));
            }
        }
    }

    #[test]
    fn rocof_and_ss_monotonicity() {
        let (f, lim) = tight();
        let c = FeasibilityCheck::new(&f, &base(), &lim).unwrap();
        let r = scan_region(&c, RegionBounds::default(), Resolution { h_steps: 9, d_steps: 7 }).unwrap();
        for j in 0..7 {
            let ok: Vec<bool> = (0..9)
                .filter(|&i| !r.cause(i, j).contains(FailureCause::Overdamped))
                .map(|i| !r.cause(i, j).contains(FailureCause::Rocof))
                .collect();
            assert!(ok.windows(2).all(|w| !w[0] || w[1]));
        }
        for i in 0..9 {
            let ok: Vec<bool> = (0..7)
                .filter(|&j| !r.cause(i, j).contains(FailureCause::Overdamped))
                .map(|j| !r.cause(i, j).contains(FailureCause::Ss))
                .collect();
            assert!(ok.windows(2).all(|w| !w[0] || w[1]));
        }
    }

    #[test]
    fn runs_cover_every_cell() {
        let (f, lim) = tight();
        let c = FeasibilityCheck::new(&f, &base(), &lim).unwrap();
        let r = scan_region(&c, RegionBounds::default(), Resolution { h_steps: 6, d_steps: 3 }).unwrap();
        let runs = r.runs();
        let covered: usize = runs.iter().map(|(_, a, b, _)| b - a + 1).sum();
        assert_eq!(covered, 18);
        for (j, a, b, v) in runs {
            assert!((a..=b).all(|i| r.at(i, j) == v));
        }
    }

    #[test]
    fn invalid_resolution() {
        let lim = SecurityLimits::new(1.0, 1.0, 1.0);
        let c = FeasibilityCheck::new(&forecast(), &base(), &lim).unwrap();
        assert!(scan_region(&c, RegionBounds::default(), Resolution { h_steps: 1, d_steps: 5 }).is_err());
    }

    #[test]
    fn linspace_endpoints() {
        let a = linspace(0.0, 40.0, 200);
        assert_eq!(a[0], 0.0);
        assert_eq!(a[199], 40.0);
        assert!(a.windows(2).all(|w| w[1] > w[0]));
    }
}

//! Damping-then-inertia choice of the required aggregate parameters.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::GridParameters;
use crate::region::{FeasibilityCheck, RegionGrid};
use crate::scalar::{lit, Scalar};
use crate::worst::WorstEnvelope;

/// Relative width (of the axis range) at which bisection stops.
pub const REFINE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectedParameters<T> {
    pub h_re: T,
    pub d_re: T,
    /// Grid-only choice before refinement.
    pub h_grid: T,
    pub d_grid: T,
    pub feasible_cells: usize,
    /// Feasible cells in the chosen damping column.
    pub column_cells: usize,
    /// `S(ΔP_i, d_re)` for each forecast magnitude.
    pub s_values: Vec<T>,
    /// `1/(2 T_sg) + D/(4 H)` at the chosen point.
    pub decay_rate: T,
    pub envelope: Option<WorstEnvelope<T>>,
    /// `limit − metric` for RoCoF, nadir and steady state.
    pub margins: [T; 3],
}

/// Smallest sampled damping with at least one feasible inertia.
pub fn select_damping<T: Scalar>(region: &RegionGrid<T>) -> Result<T> {
    first_feasible_column(region).map(|j| region.d_axis[j]).ok_or(Error::EmptyRegion)
}

/// Smallest feasible sampled inertia in the column at `d_re`.
pub fn select_inertia<T: Scalar>(region: &RegionGrid<T>, d_re: T) -> Result<T> {
    let empty = Error::EmptyColumn { d: d_re.as_f64() };
    let j = column_of(region, d_re).ok_or(empty.clone())?;
    (0..region.h_axis.len()).find(|&i| region.at(i, j)).map(|i| region.h_axis[i]).ok_or(empty)
}

fn first_feasible_column<T: Scalar>(region: &RegionGrid<T>) -> Option<usize> {
    (0..region.d_axis.len()).find(|&j| (0..region.h_axis.len()).any(|i| region.at(i, j)))
}

fn column_of<T: Scalar>(region: &RegionGrid<T>, d: T) -> Option<usize> {
    let tol = region.d_step().abs() * lit(1e-9);
    region.d_axis.iter().position(|&x| (x - d).abs() <= tol)
}

/// `S(ΔP, D) = ΔP / (1 + (D0 + R)/D_dvpp)`: steady-state share of a step
/// carried by the plant.
pub fn steady_share<T: Scalar>(delta_p: T, d_dvpp: T, grid: &GridParameters<T>) -> T {
    if d_dvpp <= T::zero() {
        return T::zero();
    }
    delta_p / (T::one() + (grid.d0 + grid.r) / d_dvpp)
}

/// Shrink `(bad, good)` until its width is at most `tol`; returns the last
/// point where `pred` held.
fn bisect<T: Scalar>(mut bad: T, mut good: T, tol: T, pred: impl Fn(T) -> bool) -> T {
    while (good - bad).abs() > tol {
        let mid = lit::<T>(0.5) * (bad + good);
        if pred(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

/// Two-stage selection over a scanned region. With `refine`, each stage is
/// sharpened by bisection between the chosen sample and its predecessor.
pub fn select_parameters<T: Scalar>(
    check: &FeasibilityCheck<T>,
    region: &RegionGrid<T>,
    refine: bool,
) -> Result<SelectedParameters<T>> {
    let d_grid = select_damping(region)?;
    let h_grid = select_inertia(region, d_grid)?;
    let j = column_of(region, d_grid).ok_or(Error::EmptyColumn { d: d_grid.as_f64() })?;
    let tol = lit::<T>(REFINE_TOL);

    let (mut h_re, mut d_re) = (h_grid, d_grid);
    if refine {
        if j > 0 {
            let any_h = |d: T| region.h_axis.iter().any(|&h| check.is_feasible(h, d));
            d_re = bisect(region.d_axis[j - 1], d_grid, tol * (region.bounds.d_max - region.bounds.d_min), any_h);
        }
        let i = region
            .h_axis
            .iter()
            .position(|&h| check.is_feasible(h, d_re))
            .ok_or(Error::EmptyColumn { d: d_re.as_f64() })?;
        h_re = region.h_axis[i];
        if i > 0 {
            let at = |h: T| check.is_feasible(h, d_re);
            h_re = bisect(region.h_axis[i - 1], h_re, tol * (region.bounds.h_max - region.bounds.h_min), at);
        }
    }

    let base = &check.base;
    let verdict = check.verdict(h_re, d_re);
    let margins = verdict.envelope.as_ref().map_or([T::nan(); 3], |e| {
        [
            check.limits.rocof_lim - e.worst_rocof,
            check.limits.nadir_lim - e.worst_nadir,
            check.limits.ss_lim - e.worst_ss,
        ]
    });
    let g = base.with_dvpp(h_re, d_re);
    Ok(SelectedParameters {
        h_re,
        d_re,
        h_grid,
        d_grid,
        feasible_cells: region.feasible_count(),
        column_cells: (0..region.h_axis.len()).filter(|&i| region.at(i, j)).count(),
        s_values: check.forecast.magnitudes.iter().map(|&p| steady_share(p, d_re, base)).collect(),
        decay_rate: T::one() / (lit::<T>(2.0) * base.t_sg) + g.d_total() / (lit::<T>(4.0) * g.h_total()),
        envelope: verdict.envelope,
        margins,
    })
}

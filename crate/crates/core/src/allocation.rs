//! Cost-minimal split of the required aggregate inertia and damping across
//! inverter-based resources, subject to per-resource injection limits.
//!
//! Decision vector: `x = [H_1, D_1, H_2, D_2, …]`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, InfeasibilityCause, Result};
use crate::injection::{reserves, sequential_injection, ReservePair};
use crate::lp::{kkt_residuals, solve, KktResiduals, LinearProgram, LpOptions, RowKind};
use crate::model::{DisturbanceForecast, DisturbanceScenario, GridParameters, IbrSpec};
use crate::response::{derive_second_order, DerivedSecondOrder};
use crate::scalar::{lit, Scalar};
use crate::trajectory::SegmentedTrajectory;

/// Which scenarios the injection limits are enforced under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationScope {
    /// The distinct per-metric worst-case witnesses.
    #[default]
    Worst,
    /// Every enumerated scenario.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationOptions<T> {
    /// Uniform sample times per scenario.
    pub samples: usize,
    /// Add each segment's analytic extremum candidates to the samples.
    pub candidates: bool,
    /// Post-solve sweep step; `None` uses `tau / 600`.
    pub sweep_step: Option<T>,
    /// Relative (to `p_av`) violation that triggers a cutting-plane round.
    pub cut_tol: T,
    pub max_cut_rounds: usize,
    /// Break ties among optimal vertices by lexicographically smallest `x`.
    pub lexicographic: bool,
    pub lp: LpOptions<T>,
}

impl<T: Scalar> Default for AllocationOptions<T> {
    fn default() -> Self {
        Self {
            samples: 600,
            candidates: true,
            sweep_step: None,
            cut_tol: lit(1e-4),
            max_cut_rounds: 10,
            lexicographic: true,
            lp: LpOptions::default(),
        }
    }
}

/// A constraint sample: one instant on one segment of one scenario, with the
/// injection weights of unit inertia (`a`) and unit damping (`b`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplePoint<T> {
    pub scenario: usize,
    pub segment: usize,
    pub time: T,
    pub a: T,
    pub b: T,
}

#[derive(Debug, Clone)]
pub struct AllocationProblem<T> {
    pub ibrs: Vec<IbrSpec<T>>,
    pub h_re: T,
    pub d_re: T,
    pub base: GridParameters<T>,
    pub forecast: DisturbanceForecast<T>,
    pub scenarios: Vec<DisturbanceScenario<T>>,
    pub samples: Vec<SamplePoint<T>>,
    derived: DerivedSecondOrder<T>,
    unit: Vec<(SegmentedTrajectory<T>, SegmentedTrajectory<T>)>,
}

impl<T: Scalar> AllocationProblem<T> {
    /// Unit-weight trajectories for every scenario and the sample set.
    pub fn new(
        ibrs: Vec<IbrSpec<T>>,
        h_re: T,
        d_re: T,
        base: &GridParameters<T>,
        forecast: &DisturbanceForecast<T>,
        scenarios: Vec<DisturbanceScenario<T>>,
        opts: &AllocationOptions<T>,
    ) -> Result<Self> {
        if ibrs.is_empty() {
            return Err(Error::InvalidInput("allocation needs at least one resource".into()));
        }
        let derived = derive_second_order(&base.with_dvpp(h_re, d_re))?;
        let unit = scenarios
            .par_iter()
            .map(|s| {
                Ok((
                    sequential_injection(s, forecast, &derived, T::one(), T::zero())?,
                    sequential_injection(s, forecast, &derived, T::zero(), T::one())?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut p = Self {
            ibrs,
            h_re,
            d_re,
            base: *base,
            forecast: forecast.clone(),
            scenarios,
            samples: Vec::new(),
            derived,
            unit,
        };
        p.samples = p.default_samples(opts.samples, opts.candidates);
        Ok(p)
    }

    pub fn derived(&self) -> &DerivedSecondOrder<T> {
        &self.derived
    }

    pub fn n(&self) -> usize {
        self.ibrs.len()
    }

    /// Weights at `(scenario, segment, time)`.
    pub fn point(&self, scenario: usize, segment: usize, time: T) -> SamplePoint<T> {
        let (ta, tb) = &self.unit[scenario];
        SamplePoint { scenario, segment, time, a: ta.value_in(segment, time), b: tb.value_in(segment, time) }
    }

    /// `k` uniform instants from the first occurrence to the horizon plus,
    /// optionally, each segment's start, end (left limit) and interior
    /// critical points.
    pub fn default_samples(&self, k: usize, candidates: bool) -> Vec<SamplePoint<T>> {
        let horizon = self.forecast.horizon();
        let mut out = Vec::new();
        for (s, (ta, tb)) in self.unit.iter().enumerate() {
            let Some(first) = ta.segments.first().map(|g| g.start) else { continue };
            let span = horizon - first;
            for j in 0..k {
                let t = if k < 2 { horizon } else { first + span * T::from_usize_lossy(j) / T::from_usize_lossy(k - 1) };
                if let Some(seg) = ta.segment_at(t) {
                    out.push(self.point(s, seg, t));
                }
            }
            if candidates {
                for (seg, sa) in ta.segments.iter().enumerate() {
                    let len = sa.len();
                    let mut times = vec![T::zero(), len];
                    times.extend(sa.kernel.critical_times(len));
                    times.extend(tb.segments[seg].kernel.critical_times(len));
                    out.extend(times.into_iter().map(|dt| self.point(s, seg, sa.start + dt)));
                }
            }
        }
        out
    }

    fn equalities(&self) -> LinearProgram<T> {
        let n = self.n();
        let objective = self.ibrs.iter().flat_map(|r| [r.a_i, r.b_i]).collect();
        let mut lp = LinearProgram::new(objective);
        lp.lower = self.ibrs.iter().flat_map(|r| [r.h_bounds.0, r.d_bounds.0]).collect();
        lp.upper = self.ibrs.iter().flat_map(|r| [r.h_bounds.1, r.d_bounds.1]).collect();
        for parity in 0..2 {
            let coeffs = (0..2 * n).map(|k| if k % 2 == parity { T::one() } else { T::zero() }).collect();
            lp.push(coeffs, RowKind::Eq, if parity == 0 { self.h_re } else { self.d_re });
        }
        lp
    }

    fn injection_row(&self, ibr: usize, p: &SamplePoint<T>, upper: bool) -> (Vec<T>, RowKind, T) {
        let mut c = vec![T::zero(); 2 * self.n()];
        c[2 * ibr] = p.a;
        c[2 * ibr + 1] = p.b;
        let lim = self.ibrs[ibr].p_av;
        if upper {
            (c, RowKind::Le, lim)
        } else {
            (c, RowKind::Ge, -lim)
        }
    }

    /// Injection of resource `ibr` at sample `p` for allocation `x`.
    pub fn injection_at(&self, x: &[T], ibr: usize, p: &SamplePoint<T>) -> T {
        x[2 * ibr] * p.a + x[2 * ibr + 1] * p.b
    }

    /// Per-resource injection trajectory under scenario `s`.
    pub fn trajectory(&self, s: usize, h: T, d: T) -> Result<SegmentedTrajectory<T>> {
        sequential_injection(&self.scenarios[s], &self.forecast, &self.derived, h, d)
    }

    fn cause_hint(&self) -> InfeasibilityCause {
        let sum = |f: &dyn Fn(&IbrSpec<T>) -> T| self.ibrs.iter().fold(T::zero(), |a, r| a + f(r));
        let tol = lit::<T>(1e-12);
        if sum(&|r| r.h_bounds.1) < self.h_re - tol || sum(&|r| r.d_bounds.1) < self.d_re - tol {
            InfeasibilityCause::Capacity
        } else if sum(&|r| r.h_bounds.0) > self.h_re + tol || sum(&|r| r.d_bounds.0) > self.d_re + tol {
            InfeasibilityCause::Bounds
        } else {
            InfeasibilityCause::InjectionLimits
        }
    }
}

/// The full program: 2 equalities, `2·N·K` injection rows over every sample
/// point, and the box limits as variable bounds.
pub fn build_lp<T: Scalar>(problem: &AllocationProblem<T>) -> LinearProgram<T> {
    let mut lp = problem.equalities();
    for p in &problem.samples {
        for i in 0..problem.n() {
            for upper in [true, false] {
                let (c, k, r) = problem.injection_row(i, p, upper);
                lp.push(c, k, r);
            }
        }
    }
    lp
}

/// An injection row that holds with equality at the solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BindingRow<T> {
    pub ibr: usize,
    pub upper: bool,
    pub point: SamplePoint<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IbrReport<T> {
    pub h: T,
    pub d: T,
    pub cost: T,
    pub peak_up: T,
    pub peak_down: T,
    pub binding_up: bool,
    pub binding_down: bool,
    pub h_at_bound: bool,
    pub d_at_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation<T> {
    pub h: Vec<T>,
    pub d: Vec<T>,
    pub cost: T,
    pub per_ibr: Vec<IbrReport<T>>,
    pub binding: Vec<BindingRow<T>>,
    pub reserves: ReservePair<T>,
    /// Scenario whose reserves are reported (largest `r_up − r_down`).
    pub reserve_scenario: usize,
    pub kkt: KktResiduals<T>,
    pub active_rows: usize,
    pub cut_rounds: usize,
    /// Largest continuous injection violation relative to `p_av` after the
    /// final round.
    pub max_violation: T,
}

struct RowGen<'a, T> {
    problem: &'a AllocationProblem<T>,
    active: Vec<(usize, usize, bool)>,
    lp_opts: LpOptions<T>,
}

impl<T: Scalar> RowGen<'_, T> {
    fn lp(&self, base: &LinearProgram<T>) -> LinearProgram<T> {
        let mut lp = base.clone();
        for &(pt, ibr, upper) in &self.active {
            let (c, k, r) = self.problem.injection_row(ibr, &self.problem.samples[pt], upper);
            lp.push(c, k, r);
        }
        lp
    }

    /// Most-violated sample per (resource, side), or none.
    fn separate(&self, x: &[T]) -> Vec<(usize, usize, bool)> {
        let p = self.problem;
        let mut out = Vec::new();
        for i in 0..p.n() {
            let tol = p.ibrs[i].p_av * lit::<T>(1e-9) + lit::<T>(1e-15);
            for upper in [true, false] {
                let mut worst: Option<(usize, T)> = None;
                for (k, s) in p.samples.iter().enumerate() {
                    let v = p.injection_at(x, i, s);
                    let viol = if upper { v - p.ibrs[i].p_av } else { -p.ibrs[i].p_av - v };
                    if viol > tol && worst.map_or(true, |(_, w)| viol > w) {
                        worst = Some((k, viol));
                    }
                }
                if let Some((k, _)) = worst {
                    if !self.active.contains(&(k, i, upper)) {
                        out.push((k, i, upper));
                    }
                }
            }
        }
        out
    }

    /// Solve `base` plus the active rows, adding violated samples until none
    /// remain. Returns the solution with the duals of the final row set.
    fn solve(&mut self, base: &LinearProgram<T>) -> Result<crate::lp::LpSolution<T>> {
        loop {
            let sol = solve(&self.lp(base), &self.lp_opts)?;
            let add = self.separate(&sol.x);
            if add.is_empty() {
                return Ok(sol);
            }
            self.active.extend(add);
        }
    }
}

/// Solve the allocation with row generation over the sample set, an optional
/// lexicographic tie-break, and cutting-plane rounds driven by a continuous
/// check of every resource trajectory.
pub fn solve_allocation<T: Scalar>(problem: &mut AllocationProblem<T>, opts: &AllocationOptions<T>) -> Result<Allocation<T>> {
    let infeasible = |p: &AllocationProblem<T>, e: Error| match e {
        Error::LpInfeasible => Error::AllocationInfeasible { cause: p.cause_hint() },
        other => other,
    };
    if problem.cause_hint() != InfeasibilityCause::InjectionLimits {
        return Err(Error::AllocationInfeasible { cause: problem.cause_hint() });
    }
    let sweep = opts.sweep_step.unwrap_or(problem.forecast.tau / lit(600.0));
    let mut active: Vec<(usize, usize, bool)> = Vec::new();
    let mut rounds = 0;
    loop {
        let base = problem.equalities();
        let mut gen = RowGen { problem, active: std::mem::take(&mut active), lp_opts: opts.lp };
        let primary = gen.solve(&base).map_err(|e| infeasible(problem, e))?;
        let mut x = primary.x.clone();

        if opts.lexicographic {
            let z = primary.objective;
            let mut tied = base.clone();
            let tol = lit::<T>(1e-13) * T::one().max(z.abs());
            tied.push(tied.objective.clone(), RowKind::Le, z + tol);
            for k in 0..tied.num_vars() {
                let mut lex = tied.clone();
                lex.objective = (0..lex.num_vars()).map(|j| if j == k { T::one() } else { T::zero() }).collect();
                let s = gen.solve(&lex).map_err(|e| infeasible(problem, e))?;
                x = s.x.clone();
                let slack = lit::<T>(1e-13) * T::one().max(x[k].abs());
                let mut row = vec![T::zero(); tied.num_vars()];
                row[k] = T::one();
                tied.push(row, RowKind::Le, x[k] + slack);
            }
        }

        for (j, v) in x.iter_mut().enumerate() {
            for b in [base.lower[j], base.upper[j]] {
                if (*v - b).abs() <= lit::<T>(1e-11) * T::one().max(b.abs()) {
                    *v = b;
                }
            }
        }

        // KKT of the final point against the primary duals, with zero
        // multipliers on rows added after the primary solve.
        let full = gen.lp(&base);
        let mut y = primary.duals.clone();
        y.resize(full.rows.len(), T::zero());
        let (kkt, _) = kkt_residuals(&full, &x, &y);
        active = gen.active;

        // Continuous check on every scenario.
        let n = problem.n();
        let mut worst_rel = T::zero();
        let mut cuts: Vec<SamplePoint<T>> = Vec::new();
        let mut traj: Vec<Vec<SegmentedTrajectory<T>>> = Vec::with_capacity(problem.scenarios.len());
        for s in 0..problem.scenarios.len() {
            let row: Vec<_> = (0..n).map(|i| problem.trajectory(s, x[2 * i], x[2 * i + 1])).collect::<Result<_>>()?;
            for (i, tr) in row.iter().enumerate() {
                let lim = problem.ibrs[i].p_av;
                let (hi, lo) = tr.extrema(Some(sweep));
                for e in [hi, lo] {
                    let rel = (e.value.abs() - lim) / lim.max(lit(1e-300));
                    worst_rel = worst_rel.max(rel);
                    if rel > opts.cut_tol {
                        if let Some(seg) = e.segment {
                            cuts.push(problem.point(s, seg, e.time));
                        }
                    }
                }
            }
            traj.push(row);
        }
        if !cuts.is_empty() && rounds < opts.max_cut_rounds {
            problem.samples.extend(cuts);
            rounds += 1;
            continue;
        }
        return Ok(report(problem, &x, traj, &active, kkt, rounds, worst_rel.max(T::zero()), sweep));
    }
}

#[allow(clippy::too_many_arguments)]
fn report<T: Scalar>(
    problem: &AllocationProblem<T>,
    x: &[T],
    traj: Vec<Vec<SegmentedTrajectory<T>>>,
    active: &[(usize, usize, bool)],
    kkt: KktResiduals<T>,
    cut_rounds: usize,
    max_violation: T,
    sweep: T,
) -> Allocation<T> {
    let n = problem.n();
    let bind_tol = lit::<T>(1e-7);
    let binding: Vec<BindingRow<T>> = active
        .iter()
        .filter_map(|&(pt, ibr, upper)| {
            let point = problem.samples[pt];
            let v = problem.injection_at(x, ibr, &point);
            let lim = problem.ibrs[ibr].p_av;
            let gap = if upper { lim - v } else { v + lim };
            (gap.abs() <= bind_tol * lim.max(T::one())).then_some(BindingRow { ibr, upper, point })
        })
        .collect();

    let mut reserve_scenario = 0;
    let mut best: Option<ReservePair<T>> = None;
    for (s, row) in traj.iter().enumerate() {
        let r = reserves(row, Some(sweep));
        if best.as_ref().map_or(true, |b| r.r_up - r.r_down > b.r_up - b.r_down) {
            best = Some(r);
            reserve_scenario = s;
        }
    }
    let per_ibr = (0..n)
        .map(|i| {
            let spec = &problem.ibrs[i];
            let (h, d) = (x[2 * i], x[2 * i + 1]);
            let (up, down) = traj.iter().fold((T::neg_infinity(), T::infinity()), |(u, l), row| {
                let (hi, lo) = row[i].extrema(Some(sweep));
                (u.max(hi.value), l.min(lo.value))
            });
            let near = |v: T, b: T| (v - b).abs() <= lit::<T>(1e-9) * T::one().max(b.abs());
            IbrReport {
                h,
                d,
                cost: spec.a_i * h + spec.b_i * d,
                peak_up: up,
                peak_down: down,
                binding_up: binding.iter().any(|b| b.ibr == i && b.upper),
                binding_down: binding.iter().any(|b| b.ibr == i && !b.upper),
                h_at_bound: near(h, spec.h_bounds.0) || near(h, spec.h_bounds.1),
                d_at_bound: near(d, spec.d_bounds.0) || near(d, spec.d_bounds.1),
            }
        })
        .collect::<Vec<_>>();
    Allocation {
        h: (0..n).map(|i| x[2 * i]).collect(),
        d: (0..n).map(|i| x[2 * i + 1]).collect(),
        cost: per_ibr.iter().fold(T::zero(), |a, r| a + r.cost),
        per_ibr,
        binding,
        reserves: best.unwrap_or(ReservePair { r_up: T::zero(), r_down: T::zero(), up_times: vec![], down_times: vec![] }),
        reserve_scenario,
        kkt,
        active_rows: active.len(),
        cut_rounds,
        max_violation,
    }
}

/// Distinct scenarios among the envelope witnesses, in metric order.
pub fn witness_scenarios<T: Scalar>(env: &crate::worst::WorstEnvelope<T>) -> Vec<DisturbanceScenario<T>> {
    let mut out: Vec<DisturbanceScenario<T>> = Vec::new();
    for s in [&env.rocof_witness, &env.nadir_witness, &env.ss_witness] {
        if !out.contains(s) {
            out.push(s.clone());
        }
    }
    out
}

//! End-to-end planning run: worst case, region, selection, allocation and
//! reserves, with failures tagged by stage.

use std::fmt;

use crate::allocation::{solve_allocation, witness_scenarios, Allocation, AllocationProblem, AllocationScope};
use crate::config::Config;
use crate::error::Error;
use crate::region::{scan_region, FeasibilityCheck, RegionGrid};
use crate::response::derive_second_order;
use crate::selection::{select_parameters, SelectedParameters};
use crate::trajectory::SegmentedTrajectory;
use crate::worst::{enumerate_scenarios, envelope_of, evaluate_all, ScenarioRow, WorstEnvelope};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Validate,
    WorstCase,
    Region,
    Selection,
    Allocation,
    Reserves,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Validate => "validate",
            Stage::WorstCase => "worst_case",
            Stage::Region => "region",
            Stage::Selection => "selection",
            Stage::Allocation => "allocation",
            Stage::Reserves => "reserves",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl StageError {
    /// True when the inputs are valid but no secure plan exists.
    pub fn is_infeasible(&self) -> bool {
        matches!(self.error, Error::EmptyRegion | Error::EmptyColumn { .. } | Error::AllocationInfeasible { .. })
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage.name(), self.error)
    }
}

impl std::error::Error for StageError {}

pub type StageResult<T> = std::result::Result<T, StageError>;

fn at<T>(stage: Stage) -> impl FnOnce(Error) -> StageError {
    move |error| StageError { stage, error }
}

/// Worst case and per-scenario audit at a fixed plant setting.
#[derive(Debug, Clone)]
pub struct WorstCase {
    pub h_dvpp: f64,
    pub d_dvpp: f64,
    pub envelope: WorstEnvelope<f64>,
    pub rows: Vec<ScenarioRow<f64>>,
}

pub fn worst_case(cfg: &Config, h_dvpp: f64, d_dvpp: f64) -> StageResult<WorstCase> {
    let f = cfg.forecast();
    let scenarios = enumerate_scenarios(&f, cfg.solver.scenario_cap).map_err(at::<()>(Stage::WorstCase))?;
    let d = derive_second_order(&cfg.base_grid().with_dvpp(h_dvpp, d_dvpp)).map_err(at::<()>(Stage::WorstCase))?;
    let opts = cfg.metrics_options();
    let all = evaluate_all(&scenarios, &f, &d, opts).map_err(at::<()>(Stage::WorstCase))?;
    let envelope = envelope_of(&scenarios, &f, &d, opts).map_err(at::<()>(Stage::WorstCase))?;
    let rows = scenarios
        .into_iter()
        .zip(all)
        .enumerate()
        .map(|(index, (scenario, metrics))| ScenarioRow { index, scenario, metrics })
        .collect();
    Ok(WorstCase { h_dvpp, d_dvpp, envelope, rows })
}

pub fn feasibility_check(cfg: &Config) -> StageResult<FeasibilityCheck<f64>> {
    FeasibilityCheck::with_options(
        &cfg.forecast(),
        &cfg.base_grid(),
        &cfg.limits,
        crate::metrics::MetricsOptions::analytic(),
        cfg.solver.scenario_cap,
    )
    .map_err(at::<()>(Stage::Region))
}

pub fn region(cfg: &Config, check: &FeasibilityCheck<f64>) -> StageResult<RegionGrid<f64>> {
    scan_region(check, cfg.solver.region, cfg.resolution()).map_err(at::<()>(Stage::Region))
}

#[derive(Debug, Clone)]
pub struct AllocationStage {
    pub problem: AllocationProblem<f64>,
    pub allocation: Allocation<f64>,
    /// Injection of each resource under the reserve scenario.
    pub injections: Vec<SegmentedTrajectory<f64>>,
}

/// Split `(h_re, d_re)` across the configured resources.
pub fn allocate(cfg: &Config, h_re: f64, d_re: f64) -> StageResult<AllocationStage> {
    let f = cfg.forecast();
    let base = cfg.base_grid();
    let scenarios = match cfg.solver.allocation_scope {
        AllocationScope::All => enumerate_scenarios(&f, cfg.solver.scenario_cap).map_err(at::<()>(Stage::Allocation))?,
        AllocationScope::Worst => {
            let all = enumerate_scenarios(&f, cfg.solver.scenario_cap).map_err(at::<()>(Stage::Allocation))?;
            let d = derive_second_order(&base.with_dvpp(h_re, d_re)).map_err(at::<()>(Stage::Allocation))?;
            let env = envelope_of(&all, &f, &d, cfg.metrics_options()).map_err(at::<()>(Stage::Allocation))?;
            witness_scenarios(&env)
        }
    };
    let opts = cfg.allocation_options();
    let mut problem = AllocationProblem::new(cfg.ibrs.clone(), h_re, d_re, &base, &f, scenarios, &opts)
        .map_err(at::<()>(Stage::Allocation))?;
    let allocation = solve_allocation(&mut problem, &opts).map_err(at::<()>(Stage::Allocation))?;
    let injections = (0..problem.n())
        .map(|i| problem.trajectory(allocation.reserve_scenario, allocation.h[i], allocation.d[i]))
        .collect::<crate::error::Result<Vec<_>>>()
        .map_err(at::<()>(Stage::Reserves))?;
    Ok(AllocationStage { problem, allocation, injections })
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub region: RegionGrid<f64>,
    pub selection: SelectedParameters<f64>,
    pub worst: WorstCase,
    pub allocation: AllocationStage,
}

pub fn analyze(cfg: &Config) -> StageResult<Analysis> {
    cfg.validate().map_err(at::<()>(Stage::Validate))?;
    let check = feasibility_check(cfg)?;
    let region = region(cfg, &check)?;
    let selection = select_parameters(&check, &region, cfg.solver.refine).map_err(at::<()>(Stage::Selection))?;
    let worst = worst_case(cfg, selection.h_re, selection.d_re)?;
    let allocation = allocate(cfg, selection.h_re, selection.d_re)?;
    Ok(Analysis { region, selection, worst, allocation })
}

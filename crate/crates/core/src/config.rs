//! JSON run configuration.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::allocation::{AllocationOptions, AllocationScope};
use crate::error::{Error, Result};
use crate::metrics::MetricsOptions;
use crate::model::{validate_inputs, DisturbanceForecast, GridParameters, IbrSpec, SecurityLimits};
use crate::region::{RegionBounds, Resolution};
use crate::worst::DEFAULT_SCENARIO_CAP;

pub const SECTIONS: [&str; 6] = ["grid", "limits", "forecast", "ibrs", "solver", "output"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub h0: f64,
    pub d0: f64,
    pub r: f64,
    pub t_sg: f64,
    #[serde(default)]
    pub h_dvpp: f64,
    #[serde(default)]
    pub d_dvpp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastSection {
    /// Optional; must equal the number of magnitudes when given.
    #[serde(default)]
    pub n: Option<usize>,
    pub tau: f64,
    pub magnitudes: Vec<f64>,
    pub probabilities: Vec<f64>,
    #[serde(default)]
    pub candidate_offsets: Option<Vec<f64>>,
    /// Magnitudes are given in per-unit of this base.
    #[serde(default = "one")]
    pub power_base: f64,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub region: RegionBounds<f64>,
    /// Samples per axis of the region scan.
    pub resolution: usize,
    pub refine: bool,
    pub scenario_cap: usize,
    /// Uniform nadir sweep divisions per window for single-point metrics; 0
    /// disables the sweep.
    pub sweep_divisions: usize,
    pub samples: usize,
    pub candidates: bool,
    pub max_cut_rounds: usize,
    pub allocation_scope: AllocationScope,
    pub lexicographic: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            region: RegionBounds::default(),
            resolution: Resolution::default().h_steps,
            refine: true,
            scenario_cap: DEFAULT_SCENARIO_CAP,
            sweep_divisions: 600,
            samples: 600,
            candidates: true,
            max_cut_rounds: 10,
            allocation_scope: AllocationScope::Worst,
            lexicographic: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<String>,
    #[serde(default = "yes")]
    pub audit: bool,
    /// Simulation step for traces.
    pub trace_dt: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None, audit: true, trace_dt: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub grid: GridSection,
    pub limits: SecurityLimits<f64>,
    pub forecast: ForecastSection,
    pub ibrs: Vec<IbrSpec<f64>>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn section<T: for<'de> Deserialize<'de>>(root: &serde_json::Map<String, Value>, name: &str) -> Result<Option<T>> {
    match root.get(name) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| Error::InvalidInput(format!("{name}: {e}"))),
    }
}

fn required<T: for<'de> Deserialize<'de>>(root: &serde_json::Map<String, Value>, name: &str) -> Result<T> {
    section(root, name)?.ok_or_else(|| Error::InvalidInput(format!("{name}: missing section")))
}

impl Config {
    /// Parse and validate a configuration document.
    pub fn from_json(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        let Value::Object(map) = root else {
            return Err(Error::InvalidInput("config: top level must be an object".into()));
        };
        if let Some(k) = map.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(Error::InvalidInput(format!("{k}: unknown section")));
        }
        let cfg = Config {
            grid: required(&map, "grid")?,
            limits: required(&map, "limits")?,
            forecast: required(&map, "forecast")?,
            ibrs: required(&map, "ibrs")?,
            solver: section(&map, "solver")?.unwrap_or_default(),
            output: section(&map, "output")?.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let mut rep = validate_inputs(&self.grid(), &self.forecast(), &self.limits, &self.ibrs);
        let f = &self.forecast;
        if let Some(n) = f.n {
            if n != f.magnitudes.len() {
                rep.failures.push(crate::model::Violation {
                    path: "forecast.n".into(),
                    message: format!("n = {n} but {} magnitudes given", f.magnitudes.len()),
                });
            }
        }
        if !(f.power_base.is_finite() && f.power_base > 0.0) {
            rep.failures.push(crate::model::Violation {
                path: "forecast.power_base".into(),
                message: format!("must be finite and > 0, got {}", f.power_base),
            });
        }
        if self.solver.resolution < 2 {
            rep.failures.push(crate::model::Violation {
                path: "solver.resolution".into(),
                message: format!("must be >= 2, got {}", self.solver.resolution),
            });
        }
        let b = &self.solver.region;
        for (name, lo, hi) in [("h", b.h_min, b.h_max), ("d", b.d_min, b.d_max)] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
                rep.failures.push(crate::model::Violation {
                    path: format!("solver.region.{name}_min"),
                    message: format!("bounds must satisfy 0 <= min < max, got [{lo}, {hi}]"),
                });
            }
        }
        if !(self.output.trace_dt.is_finite() && self.output.trace_dt > 0.0) {
            rep.failures.push(crate::model::Violation {
                path: "output.trace_dt".into(),
                message: format!("must be > 0, got {}", self.output.trace_dt),
            });
        }
        if rep.is_pass() {
            Ok(())
        } else {
            let msg = rep.failures.iter().map(|v| format!("{}: {}", v.path, v.message)).collect::<Vec<_>>();
            Err(Error::InvalidInput(msg.join("; ")))
        }
    }

    /// Grid including any configured plant parameters.
    pub fn grid(&self) -> GridParameters<f64> {
        let g = &self.grid;
        GridParameters::new(g.h0, g.d0, g.r, g.t_sg).with_dvpp(g.h_dvpp, g.d_dvpp)
    }

    /// Grid without any plant contribution.
    pub fn base_grid(&self) -> GridParameters<f64> {
        self.grid().with_dvpp(0.0, 0.0)
    }

    /// Forecast with magnitudes converted to absolute power.
    pub fn forecast(&self) -> DisturbanceForecast<f64> {
        let f = &self.forecast;
        let mut out = DisturbanceForecast::new(f.tau, f.magnitudes.clone(), f.probabilities.clone());
        if let Some(o) = &f.candidate_offsets {
            out = out.with_offsets(o.clone());
        }
        out.scaled(f.power_base)
    }

    pub fn limits(&self) -> SecurityLimits<f64> {
        self.limits
    }

    pub fn resolution(&self) -> Resolution {
        Resolution { h_steps: self.solver.resolution, d_steps: self.solver.resolution }
    }

    pub fn metrics_options(&self) -> MetricsOptions {
        MetricsOptions { sweep_divisions: Some(self.solver.sweep_divisions).filter(|&k| k > 0) }
    }

    pub fn allocation_options(&self) -> AllocationOptions<f64> {
        AllocationOptions {
            samples: self.solver.samples,
            candidates: self.solver.candidates,
            max_cut_rounds: self.solver.max_cut_rounds,
            lexicographic: self.solver.lexicographic,
            ..AllocationOptions::default()
        }
    }
}

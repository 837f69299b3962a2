//! Plain CSV tables with `#` metadata lines. Output is deterministic: numbers
//! use nine significant digits and no wall-clock data is written.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::allocation::Allocation;
use crate::model::{DisturbanceScenario, IbrSpec, SecurityLimits};
use crate::region::RegionGrid;
use crate::selection::SelectedParameters;
use crate::sim::TimeSeries;
use crate::trajectory::SegmentedTrajectory;
use crate::worst::ScenarioRow;

/// Format with nine significant digits, `%g` style.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mant.to_string()))
    }
}

fn trim(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" { "0".into() } else { t.into() }
}

fn flag(b: bool) -> String {
    (b as u8).to_string()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), ..Self::default() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn columns(&self) -> usize {
        self.header.len()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let _ = writeln!(s, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.render())
    }
}

/// Simulated trace, optionally with the closed-form frequency alongside.
pub fn trace_table(ts: &TimeSeries<f64>, closed_form: Option<&[f64]>) -> Table {
    let mut h = vec!["t", "delta_f", "rocof", "p_sg", "p_dvpp"];
    if closed_form.is_some() {
        h.push("delta_f_closed_form");
    }
    let mut t = Table::new(&h);
    for k in 0..ts.len() {
        let mut row = vec![num(ts.t[k]), num(ts.delta_f[k]), num(ts.rocof[k]), num(ts.p_sg[k]), num(ts.p_dvpp[k])];
        if let Some(c) = closed_form {
            row.push(num(c[k]));
        }
        t.push(row);
    }
    t
}

pub fn region_table(g: &RegionGrid<f64>) -> Table {
    let mut t = Table::new(&["h", "d", "feasible", "cause"])
        .meta("h_steps", g.resolution.h_steps)
        .meta("d_steps", g.resolution.d_steps)
        .meta("feasible_cells", g.feasible_count());
    for (j, &d) in g.d_axis.iter().enumerate() {
        for (i, &h) in g.h_axis.iter().enumerate() {
            t.push(vec![num(h), num(d), flag(g.at(i, j)), g.cause(i, j).label()]);
        }
    }
    t
}

/// Run-length encoding of each damping column along the inertia axis.
pub fn region_runs_table(g: &RegionGrid<f64>) -> Table {
    let mut t = Table::new(&["d", "h_start", "h_end", "feasible"]);
    for (j, a, b, f) in g.runs() {
        t.push(vec![num(g.d_axis[j]), num(g.h_axis[a]), num(g.h_axis[b]), flag(f)]);
    }
    t
}

pub fn selection_table(s: &SelectedParameters<f64>, limits: &SecurityLimits<f64>) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    let mut kv = |k: &str, v: String| t.push(vec![k.into(), v]);
    kv("h_re", num(s.h_re));
    kv("d_re", num(s.d_re));
    kv("h_grid", num(s.h_grid));
    kv("d_grid", num(s.d_grid));
    kv("feasible_cells", s.feasible_cells.to_string());
    kv("column_cells", s.column_cells.to_string());
    kv("decay_rate", num(s.decay_rate));
    for (i, v) in s.s_values.iter().enumerate() {
        kv(&format!("s_{}", i + 1), num(*v));
    }
    if let Some(e) = &s.envelope {
        kv("worst_rocof", num(e.worst_rocof));
        kv("worst_nadir", num(e.worst_nadir));
        kv("worst_ss", num(e.worst_ss));
    }
    kv("rocof_lim", num(limits.rocof_lim));
    kv("nadir_lim", num(limits.nadir_lim));
    kv("ss_lim", num(limits.ss_lim));
    kv("margin_rocof", num(s.margins[0]));
    kv("margin_nadir", num(s.margins[1]));
    kv("margin_ss", num(s.margins[2]));
    t
}

pub fn allocation_table(a: &Allocation<f64>, ibrs: &[IbrSpec<f64>]) -> Table {
    let mut t = Table::new(&[
        "ibr", "h", "d", "cost", "peak_up", "peak_down", "p_av", "binding_up", "binding_down", "h_at_bound",
        "d_at_bound",
    ])
    .meta("cost", num(a.cost))
    .meta("h_total", num(a.h.iter().sum()))
    .meta("d_total", num(a.d.iter().sum()))
    .meta("cut_rounds", a.cut_rounds)
    .meta("active_rows", a.active_rows)
    .meta("max_violation", num(a.max_violation))
    .meta("kkt_max", num(a.kkt.max()));
    for (i, r) in a.per_ibr.iter().enumerate() {
        t.push(vec![
            (i + 1).to_string(),
            num(r.h),
            num(r.d),
            num(r.cost),
            num(r.peak_up),
            num(r.peak_down),
            num(ibrs[i].p_av),
            flag(r.binding_up),
            flag(r.binding_down),
            flag(r.h_at_bound),
            flag(r.d_at_bound),
        ]);
    }
    t
}

/// Per-IBR injections plus their aggregate, sampled every `step`.
pub fn injection_table(trajs: &[SegmentedTrajectory<f64>], horizon: f64, step: f64) -> Table {
    let mut h = vec!["t".to_string()];
    h.extend((1..=trajs.len()).map(|i| format!("p_{i}")));
    h.push("p_total".into());
    let mut t = Table::new(&h);
    for &x in &crate::trajectory::sweep_times(horizon, step) {
        let vals: Vec<f64> = trajs.iter().map(|tr| tr.value(x)).collect();
        let mut row = vec![num(x)];
        row.extend(vals.iter().map(|&v| num(v)));
        row.push(num(vals.iter().sum()));
        t.push(row);
    }
    t
}

pub fn audit_table(rows: &[ScenarioRow<f64>]) -> Table {
    let mut t = Table::new(&["index", "times", "active", "m_rocof", "m_nadir", "m_ss", "spacing_ok"]);
    for r in rows {
        t.push(vec![
            r.index.to_string(),
            join(&r.scenario.occurrence_times),
            r.scenario.active_flags.iter().map(|&b| flag(b)).collect::<Vec<_>>().join(" "),
            num(r.metrics.m_rocof),
            num(r.metrics.m_nadir),
            num(r.metrics.m_ss),
            flag(r.metrics.spacing_ok),
        ]);
    }
    t
}

pub fn reserve_table(a: &Allocation<f64>, scenario: &DisturbanceScenario<f64>) -> Table {
    let r = &a.reserves;
    let mut t = Table::new(&["quantity", "value"]).meta("scenario_times", join(&scenario.occurrence_times));
    t.push(vec!["r_up".into(), num(r.r_up)]);
    t.push(vec!["r_down".into(), num(r.r_down)]);
    t.push(vec!["r_down_abs".into(), num(r.r_down.abs())]);
    for (i, (u, d)) in r.up_times.iter().zip(&r.down_times).enumerate() {
        t.push(vec![format!("t_up_{}", i + 1), num(*u)]);
        t.push(vec![format!("t_down_{}", i + 1), num(*d)]);
    }
    t
}

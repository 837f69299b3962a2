use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use dvpp_core::export::{self, Table};
use dvpp_core::pipeline::{self, StageError};
use dvpp_core::response::{derive_second_order, sequential_response};
use dvpp_core::sim::simulate;
use dvpp_core::worst::enumerate_scenarios;
use dvpp_core::{Config, Scenario};
use serde_json::json;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "dvpp", version, about = "Plan virtual inertia and damping for a DVPP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to output.dir in the config, then `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override solver.resolution.
    #[arg(long)]
    resolution: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Full run: worst case, region, selection, allocation and reserves.
    Analyze(Common),
    /// Scan the feasible region only.
    Region(Common),
    /// Worst-case audit at the configured plant parameters.
    Worst(Common),
    /// Time-domain trace of one scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// `worst`, `none`, or a scenario index.
        #[arg(long, default_value = "worst")]
        scenario: String,
        #[arg(long)]
        h_dvpp: Option<f64>,
        #[arg(long)]
        d_dvpp: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Split given aggregate parameters across the resources.
    Allocate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        h_re: f64,
        #[arg(long)]
        d_re: f64,
    },
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Input(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Infeasible(_) => 2,
        }
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        if e.is_infeasible() {
            Failure::Infeasible(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<dvpp_core::Error> for Failure {
    fn from(e: dvpp_core::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Input(format!("{}: {e}", path.display()))
}

struct Run {
    cfg: Config,
    config_hash: String,
    out: PathBuf,
    command: &'static str,
    started: u64,
    outputs: Vec<serde_json::Value>,
}

impl Run {
    fn start(c: &Common, command: &'static str) -> Result<Self, Failure> {
        let started = now();
        let text = fs::read_to_string(&c.config).map_err(io_err(&c.config))?;
        let mut cfg = Config::from_json(&text)?;
        if let Some(r) = c.resolution {
            cfg.solver.resolution = r;
            cfg.validate()?;
        }
        if c.threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(c.threads)
                .build_global()
                .map_err(|e| Failure::Input(format!("threads: {e}")))?;
        }
        let out = c.out.clone().or_else(|| cfg.output.dir.clone().map(PathBuf::from)).unwrap_or_else(|| "out".into());
        fs::create_dir_all(&out).map_err(io_err(&out))?;
        Ok(Self { cfg, config_hash: hex::encode(Sha256::digest(text.as_bytes())), out, command, started, outputs: vec![] })
    }

    fn emit(&mut self, name: &str, table: &Table) -> Result<(), Failure> {
        let path = self.out.join(name);
        let body = table.render();
        fs::write(&path, &body).map_err(io_err(&path))?;
        self.outputs.push(json!({
            "file": name,
            "rows": table.rows.len(),
            "columns": table.columns(),
            "sha256": hex::encode(Sha256::digest(body.as_bytes())),
        }));
        Ok(())
    }

    fn finish(self, status: &str) -> Result<(), Failure> {
        let manifest = json!({
            "tool": "dvpp",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "status": status,
            "config_sha256": self.config_hash,
            "threads": rayon::current_num_threads(),
            "started_unix": self.started,
            "finished_unix": now(),
            "outputs": self.outputs,
        });
        let path = self.out.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Input(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(io_err(&path))
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn trace(cfg: &Config, scenario: &Scenario, h: f64, d: f64, dt: f64) -> Result<Table, Failure> {
    let f = cfg.forecast();
    let grid = cfg.base_grid().with_dvpp(h, d);
    let ts = simulate(scenario, &f, &grid, dt, f.horizon())?;
    let closed = derive_second_order(&grid)
        .and_then(|dv| sequential_response(scenario, &f, &dv))
        .ok()
        .map(|tr| ts.t.iter().map(|&t| tr.value(t)).collect::<Vec<_>>());
    Ok(export::trace_table(&ts, closed.as_deref())
        .meta("h_dvpp", export::num(h))
        .meta("d_dvpp", export::num(d))
        .meta("scenario_times", scenario.occurrence_times.iter().map(|&x| export::num(x)).collect::<Vec<_>>().join(" ")))
}

fn analyze(c: &Common) -> Result<(), Failure> {
    let mut run = Run::start(c, "analyze")?;
    let cfg = run.cfg.clone();
    let result = (|| -> Result<(), Failure> {
        let check = pipeline::feasibility_check(&cfg)?;
        let region = pipeline::region(&cfg, &check)?;
        run.emit("region.csv", &export::region_table(&region))?;
        run.emit("region_runs.csv", &export::region_runs_table(&region))?;
        let sel = dvpp_core::selection::select_parameters(&check, &region, cfg.solver.refine)
            .map_err(|error| StageError { stage: pipeline::Stage::Selection, error })?;
        run.emit("selection.csv", &export::selection_table(&sel, &cfg.limits))?;
        let worst = pipeline::worst_case(&cfg, sel.h_re, sel.d_re)?;
        if cfg.output.audit {
            run.emit("worst.csv", &export::audit_table(&worst.rows))?;
        }
        let t = trace(&cfg, &worst.envelope.nadir_witness, sel.h_re, sel.d_re, cfg.output.trace_dt)?;
        run.emit("trace.csv", &t)?;
        emit_allocation(&mut run, &cfg, sel.h_re, sel.d_re)
    })();
    finish(run, result)
}

fn emit_allocation(run: &mut Run, cfg: &Config, h_re: f64, d_re: f64) -> Result<(), Failure> {
    let st = pipeline::allocate(cfg, h_re, d_re)?;
    let a = &st.allocation;
    run.emit("allocation.csv", &export::allocation_table(a, &cfg.ibrs))?;
    let horizon = cfg.forecast().horizon();
    run.emit("injection.csv", &export::injection_table(&st.injections, horizon, cfg.forecast.tau / 600.0))?;
    run.emit("reserves.csv", &export::reserve_table(a, &st.problem.scenarios[a.reserve_scenario]))
}

fn finish(run: Run, result: Result<(), Failure>) -> Result<(), Failure> {
    let status = match &result {
        Ok(()) => "ok",
        Err(Failure::Infeasible(_)) => "infeasible",
        Err(Failure::Input(_)) => "error",
    };
    run.finish(status)?;
    result
}

fn region(c: &Common) -> Result<(), Failure> {
    let mut run = Run::start(c, "region")?;
    let cfg = run.cfg.clone();
    let result = (|| {
        let check = pipeline::feasibility_check(&cfg)?;
        let g = pipeline::region(&cfg, &check)?;
        run.emit("region.csv", &export::region_table(&g))?;
        run.emit("region_runs.csv", &export::region_runs_table(&g))
    })();
    finish(run, result)
}

fn worst(c: &Common) -> Result<(), Failure> {
    let mut run = Run::start(c, "worst")?;
    let cfg = run.cfg.clone();
    let result = (|| {
        let w = pipeline::worst_case(&cfg, cfg.grid.h_dvpp, cfg.grid.d_dvpp)?;
        run.emit("worst.csv", &export::audit_table(&w.rows))
    })();
    finish(run, result)
}

fn simulate_cmd(c: &Common, which: &str, h: Option<f64>, d: Option<f64>, dt: Option<f64>) -> Result<(), Failure> {
    let mut run = Run::start(c, "simulate")?;
    let cfg = run.cfg.clone();
    let result = (|| {
        let h = h.unwrap_or(cfg.grid.h_dvpp);
        let d = d.unwrap_or(cfg.grid.d_dvpp);
        let f = cfg.forecast();
        let scenario = match which {
            "none" => Scenario::quiet(&f),
            "worst" => pipeline::worst_case(&cfg, h, d)?.envelope.nadir_witness,
            s => {
                let k: usize = s.parse().map_err(|_| Failure::Input(format!("scenario: expected worst, none or an index, got {s}")))?;
                let all = enumerate_scenarios(&f, cfg.solver.scenario_cap)?;
                let n = all.len();
                all.into_iter().nth(k).ok_or_else(|| Failure::Input(format!("scenario: index {k} out of range (0..{n})")))?
            }
        };
        let t = trace(&cfg, &scenario, h, d, dt.unwrap_or(cfg.output.trace_dt))?;
        run.emit("trace.csv", &t)
    })();
    finish(run, result)
}

fn allocate(c: &Common, h_re: f64, d_re: f64) -> Result<(), Failure> {
    let mut run = Run::start(c, "allocate")?;
    let cfg = run.cfg.clone();
    let result = emit_allocation(&mut run, &cfg, h_re, d_re);
    finish(run, result)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::Analyze(c) => analyze(c),
        Command::Region(c) => region(c),
        Command::Worst(c) => worst(c),
        Command::Simulate { common, scenario, h_dvpp, d_dvpp, dt } => simulate_cmd(common, scenario, *h_dvpp, *d_dvpp, *dt),
        Command::Allocate { common, h_re, d_re } => allocate(common, *h_re, *d_re),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dvpp: {e}");
            ExitCode::from(e.code())
        }
    }
}

//! Scenario runner behind the `setobs` binary.

pub mod config;
pub mod plots;
pub mod report;
pub mod trace;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use setobs::model::{IntervalOrder, SignCase};
use setobs::monotone::Assumption2Report;
use setobs::sim::Simulation;
use setobs::verifier::VerifierSettings;

pub use config::{Check, FileConfig, Overrides, RunConfig};
pub use report::RunReport;

/// Outcome of a command that completed without an execution error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Passed,
    ChecksFailed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Passed => 0,
            Status::ChecksFailed => 2,
        }
    }

    fn from_pass(passed: bool) -> Status {
        if passed {
            Status::Passed
        } else {
            Status::ChecksFailed
        }
    }
}

pub struct RunOutput {
    pub report: RunReport,
    pub trace: PathBuf,
    pub plots: Vec<PathBuf>,
}

/// Simulates the configured scenario and writes `trace.csv`,
/// `report.json`, `report.txt` and, if enabled, SVG plots into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let started = Instant::now();
    let scenario = cfg.scenario()?;
    let assumption2 = scenario.assumption2();
    if !assumption2.passed() && !cfg.force {
        scenario
            .checked()
            .context("rerun with --force to simulate anyway")?;
        unreachable!("checked() fails whenever the report fails");
    }
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let trace_path = cfg.out.join("trace.csv");
    let file =
        File::create(&trace_path).with_context(|| format!("creating {}", trace_path.display()))?;
    let spec = &scenario.spec;
    let mut writer = trace::TraceWriter::new(BufWriter::new(file), spec.n, spec.p, spec.q)?;

    let sim = Simulation::new(&scenario, cfg.sim_config())?;
    let count = if cfg.horizon > 0.0 {
        sim.sample_count()
    } else {
        0
    };
    let mut collector = report::Collector::new(count, &scenario, cfg.step);
    let mut plot_data = plots::PlotData::new(count);
    for sample in sim.take(count) {
        let sample = sample?;
        writer.write(&sample)?;
        collector.push(&scenario, &sample);
        if cfg.plots {
            plot_data.push(&scenario, &sample);
        }
    }
    writer.finish()?;

    let plots = if cfg.plots {
        plots::write_all(&plot_data, &cfg.out)?
    } else {
        Vec::new()
    };
    let report = collector.finish(cfg, &scenario, assumption2, started.elapsed().as_secs_f64());
    fs::write(
        cfg.out.join("report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    fs::write(cfg.out.join("report.txt"), format!("{report}\n"))?;
    Ok(RunOutput {
        report,
        trace: trace_path,
        plots,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxSummary {
    pub start: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub sign_case: Option<SignCase>,
    pub claimed_order: Option<IntervalOrder>,
}

/// Static checks of a scenario, computed without simulating.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub scenario: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub assumption2: Assumption2Report,
    pub c_nonnegative: bool,
    pub y_dependent_bounds: bool,
    pub parameter_boxes: Vec<BoxSummary>,
    pub verifier: VerifierSettings,
    pub gamma_lower: Vec<f64>,
    pub gamma_upper: Vec<f64>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.assumption2.passed()
    }
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = &self.assumption2;
        writeln!(
            f,
            "scenario {}  n {}  m {}  p {}  q {}",
            self.scenario, self.n, self.m, self.p, self.q
        )?;
        writeln!(
            f,
            "assumption 2: {}",
            if a.passed() { "pass" } else { "FAIL" }
        )?;
        writeln!(
            f,
            "  lower bound cooperative {}  Hurwitz {}",
            a.cooperative_lower, a.hurwitz_lower
        )?;
        writeln!(
            f,
            "  upper bound cooperative {}  Hurwitz {}",
            a.cooperative_upper, a.hurwitz_upper
        )?;
        writeln!(f, "  G nonnegative {}", a.g_nonnegative)?;
        writeln!(
            f,
            "  worst off-diagonal entry {:e}  max Re λ {:e}",
            a.worst_offdiag_entry, a.max_eig_realpart
        )?;
        writeln!(f, "  output samples checked {}", a.samples_used)?;
        writeln!(
            f,
            "C nonnegative {}  output-dependent bounds {}",
            self.c_nonnegative, self.y_dependent_bounds
        )?;
        for b in &self.parameter_boxes {
            writeln!(
                f,
                "box from {} s: [{:?}, {:?}]  sign {:?}  claimed order {:?}",
                b.start, b.lower, b.upper, b.sign_case, b.claimed_order
            )?;
        }
        let v = &self.verifier;
        write!(
            f,
            "excitation window {} s  periodic window {:?}  excitation threshold {:e}  margin {:e}",
            v.pe_window, v.periodic_window, v.theta_min, v.margin
        )
    }
}

pub fn verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let scenario = cfg.scenario()?;
    let spec = &scenario.spec;
    let diag = |side| scenario.gains.gamma(side).diagonal().as_slice().to_vec();
    Ok(VerifyReport {
        scenario: scenario.name.clone(),
        n: spec.n,
        m: spec.m,
        p: spec.p,
        q: spec.q,
        assumption2: scenario.assumption2(),
        c_nonnegative: spec.c_nonnegative(),
        y_dependent_bounds: spec.y_dependent,
        parameter_boxes: spec
            .theta_boxes
            .iter()
            .map(|b| BoxSummary {
                start: b.start,
                lower: b.lower.as_slice().to_vec(),
                upper: b.upper.as_slice().to_vec(),
                sign_case: b.sign_case,
                claimed_order: b.claimed_order,
            })
            .collect(),
        verifier: scenario.verifier.clone(),
        gamma_lower: diag(setobs::model::Side::Lower),
        gamma_upper: diag(setobs::model::Side::Upper),
    })
}

pub struct BatchEntry {
    pub config: PathBuf,
    pub result: Result<RunOutput>,
}

/// Every `*.toml` in `dir`, sorted by name.
pub fn batch_configs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut configs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    configs.sort();
    if configs.is_empty() {
        bail!("no .toml configs in {}", dir.display());
    }
    Ok(configs)
}

/// Runs each config into `out/<config stem>/` on up to `workers` threads.
pub fn batch(configs: &[PathBuf], out: &Path, workers: usize) -> Vec<BatchEntry> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunOutput>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, configs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = configs.get(i) else { break };
                let result = batch_one(path, out);
                results.lock().expect("batch result lock")[i] = Some(result);
            });
        }
    });
    let results = results.into_inner().expect("batch result lock");
    configs
        .iter()
        .zip(results)
        .map(|(config, r)| BatchEntry {
            config: config.clone(),
            result: r.expect("every config is run"),
        })
        .collect()
}

fn batch_one(path: &Path, out: &Path) -> Result<RunOutput> {
    let stem = path.file_stem().context("config without a file name")?;
    let file = FileConfig::load(path)?;
    let cfg = RunConfig::resolve(
        file,
        Overrides {
            out: Some(out.join(stem)),
            ..Overrides::default()
        },
    )?;
    run(&cfg)
}

/// Worst status of a batch; `Err` when any run failed to execute.
pub fn batch_status(entries: &[BatchEntry]) -> Result<Status> {
    let mut status = Status::Passed;
    for e in entries {
        match &e.result {
            Ok(r) if !r.report.passed() => status = Status::ChecksFailed,
            Ok(_) => {}
            Err(err) => bail!("{}: {err:#}", e.config.display()),
        }
    }
    Ok(status)
}

pub fn run_status(report: &RunReport) -> Status {
    Status::from_pass(report.passed())
}

pub fn verify_status(report: &VerifyReport) -> Status {
    Status::from_pass(report.passed())
}

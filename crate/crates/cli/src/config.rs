//! Run configuration: builtin defaults, a TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use setobs::scenarios::{Scenario, ScenarioParams};
use setobs::sim::SimConfig;

/// Verifier checks a run can be gated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    /// Assumption 2 holds on the scenario's sample set.
    Assumption2,
    /// Both copies are persistently excited at the last sample.
    Pe,
    /// An interval ordering is certified at the last sample.
    Certified,
    /// The true parameter lies in the certified interval on at least
    /// `containment_min` of the certified samples.
    Containment,
}

impl Check {
    pub const DEFAULT: [Check; 3] = [Check::Assumption2, Check::Pe, Check::Certified];

    pub fn parse(s: &str) -> Result<Check> {
        Ok(match s {
            "assumption2" => Check::Assumption2,
            "pe" => Check::Pe,
            "certified" => Check::Certified,
            "containment" => Check::Containment,
            other => bail!(
                "unknown check '{other}' (expected assumption2, pe, certified or containment)"
            ),
        })
    }
}

/// Contents of a config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub noise: Option<bool>,
    pub noise_amplitude: Option<Vec<f64>>,
    pub gamma_scale: Option<f64>,
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub out: Option<PathBuf>,
    pub plots: Option<bool>,
    pub force: Option<bool>,
    pub checks: Option<Vec<Check>>,
    pub containment_min: Option<f64>,
    /// Overrides merged key by key onto the scenario's builtin parameters.
    pub params: Option<toml::Table>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Command-line values; `None` leaves the config file or default in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub noise: Option<bool>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub out: Option<PathBuf>,
    pub plots: bool,
    pub force: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ScenarioParams,
    pub horizon: f64,
    pub step: f64,
    pub seed: u64,
    pub noise: bool,
    pub noise_amplitude: Option<Vec<f64>>,
    pub gamma_scale: f64,
    pub out: PathBuf,
    pub plots: bool,
    pub force: bool,
    pub checks: Vec<Check>,
    pub containment_min: f64,
}

impl RunConfig {
    pub fn resolve(file: FileConfig, cli: Overrides) -> Result<RunConfig> {
        let name = match (cli.scenario, file.scenario) {
            (Some(c), _) => c,
            (None, Some(f)) => f,
            (None, None) => bail!("no scenario given (use --scenario or the `scenario` key)"),
        };
        let params = scenario_params(&name, file.params.as_ref())?;
        let (default_horizon, default_step) = params_horizon_step(&params);
        let cfg = RunConfig {
            horizon: cli.horizon.or(file.horizon).unwrap_or(default_horizon),
            step: cli.step.or(file.step).unwrap_or(default_step),
            seed: cli.seed.or(file.seed).unwrap_or(0),
            noise: cli.noise.or(file.noise).unwrap_or(false),
            noise_amplitude: file.noise_amplitude,
            gamma_scale: file.gamma_scale.unwrap_or(1.0),
            out: cli
                .out
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("out").join(params.name())),
            plots: cli.plots || file.plots.unwrap_or(false),
            force: cli.force || file.force.unwrap_or(false),
            checks: file.checks.unwrap_or_else(|| Check::DEFAULT.to_vec()),
            containment_min: file.containment_min.unwrap_or(0.95),
            params,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            bail!("step must be positive, got {}", self.step);
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            bail!("horizon must be nonnegative, got {}", self.horizon);
        }
        if !(self.gamma_scale > 0.0 && self.gamma_scale.is_finite()) {
            bail!("gamma_scale must be positive, got {}", self.gamma_scale);
        }
        if !(0.0..=1.0).contains(&self.containment_min) {
            bail!(
                "containment_min must lie in [0, 1], got {}",
                self.containment_min
            );
        }
        Ok(())
    }

    /// The scenario without the Assumption 2 gate; `run` applies it.
    pub fn scenario(&self) -> Result<Scenario> {
        Ok(self.params.build_unchecked()?)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            horizon: self.horizon,
            step: self.step,
            seed: self.seed,
            noise: self.noise,
            noise_amplitude: self.noise_amplitude.clone(),
            gamma_scale: self.gamma_scale,
        }
    }
}

/// Builtin parameters of `name` with `overrides` merged in recursively.
/// Unknown or mistyped keys are errors.
pub fn scenario_params(name: &str, overrides: Option<&toml::Table>) -> Result<ScenarioParams> {
    let defaults = ScenarioParams::defaults(name)?;
    let Some(overrides) = overrides else {
        return Ok(defaults);
    };
    if overrides.contains_key("kind") {
        bail!("[params] may not set `kind`; choose the scenario with `scenario`");
    }
    let mut base = toml::Table::try_from(&defaults).context("serializing builtin parameters")?;
    merge(&mut base, overrides);
    let merged: ScenarioParams = toml::Value::Table(base)
        .try_into()
        .with_context(|| format!("invalid [params] for scenario '{name}'"))?;
    Ok(merged)
}

fn merge(base: &mut toml::Table, patch: &toml::Table) {
    for (key, value) in patch {
        match (base.get_mut(key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(p)) => merge(b, p),
            _ => {
                base.insert(key.clone(), value.clone());
            }
        }
    }
}

fn params_horizon_step(params: &ScenarioParams) -> (f64, f64) {
    match params {
        ScenarioParams::Example1(p) => (p.horizon, p.step),
        ScenarioParams::Example2(p) => (p.horizon, p.step),
        ScenarioParams::Crusher(p) => (p.horizon, p.step),
        ScenarioParams::Tank1(p) | ScenarioParams::Tank2(p) => (p.horizon, p.step),
    }
}

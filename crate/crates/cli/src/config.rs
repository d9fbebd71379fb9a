//! TOML run configuration and `--set key=value` overrides.

use std::path::{Path, PathBuf};

use flockcert::experiments::SweepConfig;
use flockcert::{ControllerSpec, KernelSpec, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "FLOCKCERT_OUTPUT_DIR";
const FALLBACK_OUTPUT_DIR: &str = "flockcert-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(alias = "N")]
    pub n: usize,
    #[serde(default = "default_dim")]
    pub d: usize,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub initial: InitialCondition,
}

/// Where the simulated initial condition comes from: a CSV file, or a seeded
/// draw optionally rescaled to `(x0, v0)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

/// Grid axis: explicit values or `count` evenly spaced points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values(Vec<f64>),
    Linspace { start: f64, stop: f64, count: usize },
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        match *self {
            Self::Values(ref v) => v.clone(),
            Self::Linspace {
                count: 1, start, ..
            } => vec![start],
            Self::Linspace { start, stop, count } => (0..count)
                .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
                .collect(),
        }
    }
}

fn default_samples() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub x_grid: GridSpec,
    pub v_grid: GridSpec,
    #[serde(default = "default_samples")]
    pub samples_per_cell: usize,
    #[serde(default)]
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Gnuplot,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Gnuplot]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            formats: all_formats(),
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

impl RunConfig {
    /// Reads `path`, applies overrides in order and validates the result.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, String> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = doc.try_into().map_err(|e: toml::de::Error| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        let m = &self.model;
        if m.n == 0 || m.d == 0 {
            return Err("model: N and d must be >= 1".into());
        }
        m.kernel
            .validate()
            .map_err(|e| format!("model.kernel: {e}"))?;
        let init = &m.initial;
        if init.x0.is_some() != init.v0.is_some() {
            return Err("model.initial: give both x0 and v0 or neither".into());
        }
        if init.file.is_some() && init.x0.is_some() {
            return Err("model.initial: file and x0/v0 are mutually exclusive".into());
        }
        self.controller
            .validate(m.n, m.d)
            .map_err(|e| format!("controller: {e}"))?;
        self.sim.validate().map_err(|e| format!("sim: {e}"))?;
        if let Some(sweep) = self.sweep_config() {
            sweep.validate().map_err(|e| format!("experiment: {e}"))?;
        }
        if self.output.formats.is_empty() {
            return Err("output.formats: must list at least one format".into());
        }
        Ok(())
    }

    pub fn sweep_config(&self) -> Option<SweepConfig> {
        let e = self.experiment.as_ref()?;
        Some(SweepConfig {
            n: self.model.n,
            dim: self.model.d,
            x_grid: e.x_grid.points(),
            v_grid: e.v_grid.points(),
            samples_per_cell: e.samples_per_cell,
            master_seed: e.master_seed,
            controller: self.controller.clone(),
            kernel: self.model.kernel.clone(),
            sim: self.sim.clone(),
        })
    }

    /// Flag, then config, then environment, then `flockcert-out`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output.directory.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}

/// Sets a dotted key, creating intermediate tables. The value is parsed as a
/// TOML value and falls back to a bare string.
fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<(), String> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| format!("override `{spec}` is not of the form key=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("override `{spec}` has an empty key segment"));
    }
    let value = parse_value(raw.trim());
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut table = doc;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| format!("override `{spec}`: `{p}` is not a table"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[model]
N = 5
d = 2
kernel = { kind = "power_law", delta = 1.0 }

[controller]
kind = "uniform"
gamma = 1.0

[sim]
dt = 0.01
T = 5.0
"#;

    #[test]
    fn parses_basic_config() {
        let c = RunConfig::parse(BASIC, &[]).unwrap();
        assert_eq!(c.model.n, 5);
        assert_eq!(c.controller, ControllerSpec::Uniform { gamma: 1.0 });
        assert_eq!(c.sim.horizon, 5.0);
        assert_eq!(c.sim.record_stride, 10);
        assert!(c.experiment.is_none());
    }

    #[test]
    fn echo_round_trips() {
        let text = format!(
            "{BASIC}\n[experiment]\nx_grid = [0.5, 1.0]\nv_grid = {{ start = 0.1, stop = 1.0, count = 4 }}\n"
        );
        let c = RunConfig::parse(&text, &["controller.gamma=2.5".into()]).unwrap();
        let again = RunConfig::parse(&c.to_toml(), &[]).unwrap();
        assert_eq!(c, again);
        assert_eq!(
            again.sweep_config().unwrap().v_grid,
            vec![0.1, 0.4, 0.7, 1.0]
        );
    }

    #[test]
    fn overrides_apply_in_order() {
        let c = RunConfig::parse(
            BASIC,
            &[
                "sim.dt=0.02".into(),
                "controller.kind=local_radius".into(),
                "controller.radius=3".into(),
                "controller.normalization=exact".into(),
                "output.directory=elsewhere".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.sim.dt, 0.02);
        assert!(matches!(
            c.controller,
            ControllerSpec::LocalRadius { radius, .. } if radius == 3.0
        ));
        assert_eq!(c.output.directory, Some(PathBuf::from("elsewhere")));
    }

    #[test]
    fn errors_name_the_field() {
        let bad_key = BASIC.replace("gamma = 1.0", "gama = 1.0");
        let e = RunConfig::parse(&bad_key, &[]).unwrap_err();
        assert!(e.contains("gama"), "{e}");

        let bad_dt = RunConfig::parse(BASIC, &["sim.dt=-1".into()]).unwrap_err();
        assert!(bad_dt.contains("sim") && bad_dt.contains("dt"), "{bad_dt}");

        let syntax = RunConfig::parse("[model\nN = 2", &[]).unwrap_err();
        assert!(syntax.contains("line 1"), "{syntax}");

        assert!(RunConfig::parse(BASIC, &["nonsense".into()]).is_err());
    }

    #[test]
    fn output_dir_precedence() {
        let mut c = RunConfig::parse(BASIC, &[]).unwrap();
        assert_eq!(c.output_dir(Some(Path::new("flag"))), PathBuf::from("flag"));
        c.output.directory = Some("cfg".into());
        assert_eq!(c.output_dir(None), PathBuf::from("cfg"));
    }
}

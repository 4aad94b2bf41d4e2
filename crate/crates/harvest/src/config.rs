//! Run configuration: one JSON document, `--set` overrides, defaults.

use std::path::Path;

use harvest_core::averaging::GridSpec;
use harvest_core::mcs::SimConfig;
use harvest_core::model::Feedback;
use harvest_core::resonance::RateConvention;
use harvest_core::spectrum::PsdSettings;
use harvest_core::{ExcitationParams, NoiseParams, SystemParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("physically invalid parameters: {0}")]
    Physical(#[from] harvest_core::Error),
}

impl ConfigError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Schema { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub delta1: f64,
    pub delta3: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default)]
    pub tau1: f64,
    #[serde(default)]
    pub tau2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    #[serde(rename = "D")]
    pub intensity: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationBlock {
    #[serde(default)]
    pub eps: f64,
    #[serde(rename = "G", default = "default_gravity")]
    pub gravity: f64,
    #[serde(rename = "Omega", default = "default_forcing_frequency")]
    pub omega: f64,
}

fn default_gravity() -> f64 {
    0.1
}
fn default_forcing_frequency() -> f64 {
    0.05
}

impl Default for ExcitationBlock {
    fn default() -> Self {
        Self { eps: 0.0, gravity: default_gravity(), omega: default_forcing_frequency() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub nv: usize,
}

impl GridBlock {
    fn square(n: usize) -> Self {
        Self { x_min: -2.5, x_max: 2.5, nx: n, v_min: -3.0, v_max: 3.0, nv: n }
    }
    pub fn spec(&self) -> Result<GridSpec, harvest_core::Error> {
        GridSpec::new(self.x_min, self.x_max, self.nx, self.v_min, self.v_max, self.nv)
    }
}

fn sim_grid() -> GridBlock {
    GridBlock::square(64)
}
fn analysis_grid() -> GridBlock {
    GridBlock::square(201)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsdBlock {
    pub segment_periods: u32,
    pub stride: usize,
    pub background_bins: usize,
    pub bootstrap: usize,
}

impl Default for PsdBlock {
    fn default() -> Self {
        let d = PsdSettings::default();
        Self {
            segment_periods: d.segment_periods,
            stride: d.stride,
            background_bins: d.background_bins,
            bootstrap: d.bootstrap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimBlock {
    pub dt: f64,
    pub t_total: f64,
    /// `null`: 20% of t_total, at least 200 forcing periods when forced.
    pub t_transient: Option<f64>,
    pub n_traj: usize,
    pub seed: u64,
    /// `null`: the bare equilibrium √(δ₁/δ₃).
    pub x0: Option<f64>,
    pub v0: f64,
    #[serde(rename = "V0")]
    pub voltage0: f64,
    #[serde(default = "sim_grid")]
    pub grid: GridBlock,
    pub psd: Option<PsdBlock>,
}

impl Default for SimBlock {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            dt: d.dt,
            t_total: d.t_total,
            t_transient: None,
            n_traj: d.n_traj,
            seed: d.seed,
            x0: None,
            v0: 0.0,
            voltage0: 0.0,
            grid: sim_grid(),
            psd: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateConventionName {
    #[default]
    SingleWell,
    BothWells,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisBlock {
    #[serde(default = "analysis_grid")]
    pub grid: GridBlock,
    pub rate_convention: RateConventionName,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self { grid: analysis_grid(), rate_convention: RateConventionName::SingleWell }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreqBlock {
    /// Largest cross-well energy tabulated.
    pub h_max: f64,
    pub samples: usize,
}

impl Default for FreqBlock {
    fn default() -> Self {
        Self { h_max: 2.0, samples: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted parameter name, e.g. `system.tau1`.
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                match self.scale {
                    Scale::Linear => self.start + f * (self.stop - self.start),
                    Scale::Log => (self.start.ln() + f * (self.stop.ln() - self.start.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Analytic E[P].
    Power,
    /// Analytic √E[V²].
    VRms,
    /// Two-state SNR.
    Snr,
    /// ΔU at the well-bottom frequency.
    WellDepth,
    OmegaEq,
    McsPower,
    McsVRms,
    McsEfficiency,
    McsSnr,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Power => "power",
            Quantity::VRms => "v_rms",
            Quantity::Snr => "snr",
            Quantity::WellDepth => "well_depth",
            Quantity::OmegaEq => "omega_eq",
            Quantity::McsPower => "mcs_power",
            Quantity::McsVRms => "mcs_v_rms",
            Quantity::McsEfficiency => "mcs_efficiency",
            Quantity::McsSnr => "mcs_snr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub quantities: Vec<Quantity>,
    pub axes: Vec<Axis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: String,
    pub prefix: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: ".".into(), prefix: "harvest".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemBlock,
    pub noise: NoiseBlock,
    #[serde(default)]
    pub excitation: ExcitationBlock,
    #[serde(default)]
    pub sim: SimBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default)]
    pub freq: FreqBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Parameters a sweep axis may vary.
pub const SWEEPABLE: &[&str] = &[
    "system.delta1",
    "system.delta3",
    "system.kappa",
    "system.alpha",
    "system.beta",
    "system.mu",
    "system.nu",
    "system.tau1",
    "system.tau2",
    "noise.D",
    "noise.c",
    "excitation.eps",
    "excitation.G",
    "excitation.Omega",
];

/// Validated physics objects built from a [`RunConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Physics {
    pub system: SystemParams,
    pub noise: NoiseParams,
    pub excitation: ExcitationParams,
    pub sim: SimConfig,
    pub grid: GridSpec,
    pub convention: RateConvention,
}

/// A parsed document together with the keys that were filled by defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub config: RunConfig,
    pub defaults_applied: Vec<String>,
}

impl RunConfig {
    /// The document as serialised after defaulting.
    pub fn resolved(&self) -> Value {
        serde_json::to_value(self).expect("config serialises")
    }

    pub fn physics(&self) -> Result<Physics, ConfigError> {
        let s = &self.system;
        let system = SystemParams::new(s.delta1, s.delta3, s.kappa, s.alpha, s.beta)?
            .with_feedback(Feedback::new(s.mu, s.nu, s.tau1, s.tau2))?;
        let noise = NoiseParams::new(self.noise.intensity, self.noise.c)?;
        let e = &self.excitation;
        let excitation = ExcitationParams::new(e.eps, e.gravity, e.omega)?;
        let m = &self.sim;
        let sim = SimConfig {
            dt: m.dt,
            t_total: m.t_total,
            t_transient: m.t_transient,
            n_traj: m.n_traj,
            seed: m.seed,
            x0: m.x0.unwrap_or_else(|| (s.delta1 / s.delta3).sqrt()),
            v0: m.v0,
            voltage0: m.voltage0,
            grid: m.grid.spec()?,
            psd: m.psd.map(|p| PsdSettings {
                segment_periods: p.segment_periods,
                stride: p.stride,
                background_bins: p.background_bins,
                bootstrap: p.bootstrap,
            }),
        };
        let grid = self.analysis.grid.spec()?;
        let convention = match self.analysis.rate_convention {
            RateConventionName::SingleWell => RateConvention::SingleWell,
            RateConventionName::BothWells => RateConvention::BothWells,
        };
        Ok(Physics { system, noise, excitation, sim, grid, convention })
    }

    /// Copy with one sweepable scalar replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<RunConfig, ConfigError> {
        if !SWEEPABLE.contains(&name) {
            return Err(ConfigError::schema(name, "not a sweepable parameter"));
        }
        let mut doc = self.resolved();
        set_path(&mut doc, name, Value::from(value))?;
        from_value(doc)
    }

    fn check_sweep(&self) -> Result<(), ConfigError> {
        let Some(sw) = &self.sweep else { return Ok(()) };
        if sw.axes.is_empty() || sw.axes.len() > 2 {
            return Err(ConfigError::schema("sweep.axes", "a sweep needs one or two axes"));
        }
        if sw.quantities.is_empty() {
            return Err(ConfigError::schema("sweep.quantities", "at least one quantity is required"));
        }
        for (i, a) in sw.axes.iter().enumerate() {
            let at = |f: &str| format!("sweep.axes[{i}].{f}");
            if !SWEEPABLE.contains(&a.param.as_str()) {
                return Err(ConfigError::schema(
                    at("param"),
                    format!("unknown parameter `{}`; expected one of {}", a.param, SWEEPABLE.join(", ")),
                ));
            }
            if a.count < 2 {
                return Err(ConfigError::schema(at("count"), "count must be >= 2"));
            }
            if !(a.start.is_finite() && a.stop.is_finite()) {
                return Err(ConfigError::schema(at("start"), "bounds must be finite"));
            }
            if a.scale == Scale::Log && !(a.start > 0.0 && a.stop > 0.0) {
                return Err(ConfigError::schema(at("scale"), "log axes need positive bounds"));
            }
        }
        if sw.axes.len() == 2 && sw.axes[0].param == sw.axes[1].param {
            return Err(ConfigError::schema("sweep.axes[1].param", "axes must differ"));
        }
        Ok(())
    }
}

fn from_value(doc: Value) -> Result<RunConfig, ConfigError> {
    serde_path_to_error::deserialize::<_, RunConfig>(doc).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Schema { path, message: e.into_inner().to_string() }
    })
}

/// Sets `a.b.c` in a JSON object tree, creating intermediate objects.
pub fn set_path(doc: &mut Value, dotted: &str, value: Value) -> Result<(), ConfigError> {
    let mut cur = doc;
    let parts: Vec<&str> = dotted.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::schema(dotted, "empty path segment"));
    }
    for (k, part) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(m) => m,
            Value::Null => {
                *cur = Value::Object(Map::new());
                cur.as_object_mut().expect("just created")
            }
            _ => return Err(ConfigError::schema(parts[..k].join("."), "not an object")),
        };
        if k + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*part).to_string()).or_insert(Value::Null);
    }
    unreachable!("path has at least one segment")
}

/// Applies `key=value` overrides; the value is read as JSON, else as a
/// string.
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<(), ConfigError> {
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| ConfigError::schema(o.as_str(), "override must look like key=value"))?;
        let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(doc, key.trim(), value)?;
    }
    Ok(())
}

fn collect_defaults(given: Option<&Value>, resolved: &Value, prefix: &str, out: &mut Vec<String>) {
    let Value::Object(res) = resolved else { return };
    for (k, v) in res {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match given.and_then(|g| g.get(k)) {
            None => out.push(path),
            Some(g) => {
                if v.is_object() {
                    collect_defaults(Some(g), v, &path, out);
                }
            }
        }
    }
}

/// Parses a JSON document after applying overrides.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<Loaded, ConfigError> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| ConfigError::schema("", e.to_string()))?;
    if !doc.is_object() {
        return Err(ConfigError::schema("", "the document must be a JSON object"));
    }
    apply_overrides(&mut doc, overrides)?;
    let config = from_value(doc.clone())?;
    config.check_sweep()?;
    config.physics()?;
    let mut defaults_applied = Vec::new();
    collect_defaults(Some(&doc), &config.resolved(), "", &mut defaults_applied);
    Ok(Loaded { config, defaults_applied })
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<Loaded, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text, overrides)
}

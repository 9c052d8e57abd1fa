//! Scenario configuration: TOML with unit-suffixed quantities.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use photocount_core::analysis::TheoryForm;
use photocount_core::drives::DisplacementConvention;
use photocount_core::dynamics::models::{ModelOptions, Spectator};
use photocount_core::dynamics::Method;
use photocount_core::params::{Calibration, SystemParams};
use photocount_core::readout::RabiForm;
use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::units::*;
use crate::Scenario;

/// Base parameter table that overrides are applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamBase {
    /// Couplings refined by simulation.
    #[default]
    Fitted,
    Measured,
}

/// Optional overrides of [`SystemParams`]; absent fields keep the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(default)]
    pub base: ParamBase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_ro: Option<DeviceFrequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_s: Option<DeviceFrequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_yn: Option<DeviceFrequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_mp: Option<DeviceFrequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_s_yn: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_s_mp: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_ro_yn: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_yn_yn: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_mp_mp: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_s_s: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_s_s_yn: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_s_s_mp: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_ro: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_1_s: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_2_s: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_1_yn: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_2_yn: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_1_mp: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_2_mp: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_th_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<PerMillivoltMicrosecond>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photons_per_volt: Option<PerVolt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<RabiScale>,
}

impl ParamOverrides {
    pub fn apply(&self) -> SystemParams {
        let mut p = match self.base {
            ParamBase::Fitted => SystemParams::default(),
            ParamBase::Measured => SystemParams::measured(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f {
                    p.$f = v.value();
                }
            )*};
        }
        set!(f_ro, f_s, f_yn, f_mp, chi_s_yn, chi_s_mp, chi_ro_yn, chi_yn_yn, chi_mp_mp, chi_s_s, chi_s_s_yn, chi_s_s_mp);
        set!(gamma_ro, gamma_1_s, gamma_2_s, gamma_1_yn, gamma_2_yn, gamma_1_mp, gamma_2_mp);
        if let Some(v) = self.n_th_s {
            p.n_th_s = v;
        }
        let c = &mut p.calibration;
        *c = Calibration {
            mu: self.mu.map_or(c.mu, |v| v.value()),
            photons_per_volt: self.photons_per_volt.map_or(c.photons_per_volt, |v| v.value()),
            xi: self.xi.map_or(c.xi, |v| v.value()),
        };
        p
    }
}

/// Drive settings; each scenario reads the fields it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSettings {
    /// Probe Rabi frequency over chi_s_mp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_over_chi: Option<f64>,
    /// Initial coherent amplitude (real).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Peak displacement drive amplitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_max: Option<Rate>,
    /// Qubit drive detuning below the bare qubit frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_f: Option<Frequency>,
    /// Storage frame offset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_f_s0: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_tones: Option<usize>,
    /// Gap between the displacement and the probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_delay: Option<Time>,
    /// Probe (or evolution) duration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<Time>,
    /// Qubit drive voltage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_mp: Option<Voltage>,
    /// Qubit probe applied before a snapshot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    None,
    /// One tone at the one-photon line, f_mp - chi_s_mp.
    Single,
    /// `n_tones` comb spaced by chi_s_mp.
    Comb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    #[default]
    Adaptive,
    Rk4,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    /// RK4 step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectator: Option<Spectator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage_loss: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displacement: Option<DisplacementConvention>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_form: Option<RabiForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory_form: Option<TheoryForm>,
    /// Omega/chi at and above which Ramsey fits use the two-tone model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_tone_threshold: Option<f64>,
    /// Samples before this time are excluded from decay fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_start: Option<Time>,
    /// Largest photon number of the coherence pairs analysed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Samples of a normalized coherence below this are excluded from decay
    /// fits. Raise it to about 1e-3 when tomography is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence_floor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySettings {
    /// Go through Wigner sampling and reconstruction instead of reading the
    /// simulated density matrix directly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    /// Half-width of the square phase-space grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
}

/// Number or unit-suffixed string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Number(f64),
    Text(String),
}

impl AxisValue {
    fn resolve(&self, kind: UnitKind) -> Result<f64, String> {
        match self {
            AxisValue::Number(v) if kind == UnitKind::Dimensionless => Ok(*v),
            AxisValue::Number(v) => Err(format!("{v} needs a unit suffix, e.g. \"{v} {}\"", kind.canonical())),
            AxisValue::Text(s) => kind.parse(s),
        }
    }
}

/// One sweep axis: either an explicit list or `count` evenly spaced values
/// from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<AxisValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<AxisValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<AxisValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

impl SweepAxis {
    pub fn list(parameter: &str, kind: UnitKind, values: &[f64]) -> Self {
        let values = values.iter().map(|&v| axis_value(kind, v)).collect();
        Self { parameter: parameter.into(), values: Some(values), start: None, stop: None, count: None }
    }

    pub fn range(parameter: &str, kind: UnitKind, start: f64, stop: f64, count: usize) -> Self {
        Self {
            parameter: parameter.into(),
            values: None,
            start: Some(axis_value(kind, start)),
            stop: Some(axis_value(kind, stop)),
            count: Some(count),
        }
    }

    pub fn resolve(&self, kind: UnitKind) -> Result<Vec<f64>, String> {
        let p = &self.parameter;
        match (&self.values, &self.start, &self.stop, self.count) {
            (Some(v), None, None, None) => {
                if v.is_empty() {
                    return Err(format!("sweep `{p}` has no values"));
                }
                v.iter().map(|x| x.resolve(kind).map_err(|e| format!("sweep `{p}`: {e}"))).collect()
            }
            (None, Some(a), Some(b), Some(n)) => {
                let a = a.resolve(kind).map_err(|e| format!("sweep `{p}`: {e}"))?;
                let b = b.resolve(kind).map_err(|e| format!("sweep `{p}`: {e}"))?;
                match n {
                    0 => Err(format!("sweep `{p}`: count must be >= 1")),
                    1 => Ok(vec![a]),
                    _ => Ok((0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()),
                }
            }
            _ => Err(format!("sweep `{p}` needs either `values` or all of `start`, `stop`, `count`")),
        }
    }
}

fn axis_value(kind: UnitKind, v: f64) -> AxisValue {
    match kind {
        UnitKind::Dimensionless => AxisValue::Number(v),
        _ => AxisValue::Text(kind.format(v)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Reserved; every scenario is deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(default)]
    pub drive: DriveSettings,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    #[serde(default)]
    pub tomography: TomographySettings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
}

fn config_error(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Config(msg.into())
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: 0,
            output: None,
            params: ParamOverrides::default(),
            drive: DriveSettings::default(),
            solver: SolverSettings::default(),
            analysis: AnalysisSettings::default(),
            tomography: TomographySettings::default(),
            sweep: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| config_error(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string(self).map_err(|e| config_error(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            ScenarioError::Config(m) => config_error(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Applies `key=value` overrides, where `key` is a dotted path such as
    /// `drive.beta` or `params.chi_s_mp` and `value` is a TOML value or a
    /// bare string.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, ScenarioError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = toml::Value::try_from(self).map_err(|e| config_error(e.to_string()))?;
        for o in overrides {
            let (key, raw) = o.split_once('=').ok_or_else(|| config_error(format!("override `{o}` is not key=value")))?;
            let value = parse_override_value(raw.trim());
            let path: Vec<&str> = key.trim().split('.').collect();
            if path.iter().any(|s| s.is_empty()) {
                return Err(config_error(format!("override key `{key}` is malformed")));
            }
            let mut node = &mut doc;
            for seg in &path[..path.len() - 1] {
                let table = node.as_table_mut().ok_or_else(|| config_error(format!("override `{key}`: `{seg}` is not a section")))?;
                node = table.entry(seg.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
            }
            let table = node.as_table_mut().ok_or_else(|| config_error(format!("override `{key}` does not name a field")))?;
            table.insert(path[path.len() - 1].to_string(), value);
        }
        doc.try_into().map_err(|e: toml::de::Error| config_error(format!("after overrides: {e}")))
    }

    /// Fills unset fields from the scenario's canonical configuration.
    pub fn merged(&self) -> Self {
        let d = self.scenario.canonical_config();
        let mut sweep = self.sweep.clone();
        for axis in &d.sweep {
            if !sweep.iter().any(|a| a.parameter == axis.parameter) {
                sweep.push(axis.clone());
            }
        }
        Self {
            scenario: self.scenario,
            seed: self.seed,
            output: self.output.clone(),
            params: self.params.clone(),
            drive: merge_drive(&self.drive, &d.drive),
            solver: merge_solver(&self.solver, &d.solver),
            analysis: merge_analysis(&self.analysis, &d.analysis),
            tomography: merge_tomography(&self.tomography, &d.tomography),
            sweep,
        }
    }

    /// Merges defaults, resolves units and checks ranges.
    pub fn resolve(&self) -> Result<Resolved, ScenarioError> {
        let cfg = self.merged();
        let params = cfg.params.apply();
        params.validate().map_err(|e| config_error(format!("params: {e}")))?;
        if let Some(n) = cfg.params.n_th_s {
            if !(n >= 0.0) {
                return Err(config_error(format!("params.n_th_s = {n} must be >= 0")));
            }
        }
        let spec = cfg.scenario.axes();
        let mut axes = BTreeMap::new();
        for axis in &cfg.sweep {
            let kind = spec.iter().find(|(n, _)| *n == axis.parameter).map(|(_, k)| *k).ok_or_else(|| {
                let known: Vec<&str> = spec.iter().map(|(n, _)| *n).collect();
                config_error(format!("sweep parameter `{}` does not exist for {} (expected one of {known:?})", axis.parameter, cfg.scenario.name()))
            })?;
            if axes.contains_key(&axis.parameter) {
                return Err(config_error(format!("sweep parameter `{}` given twice", axis.parameter)));
            }
            axes.insert(axis.parameter.clone(), axis.resolve(kind).map_err(config_error)?);
        }
        let r = Resolved { scenario: cfg.scenario, params, config: cfg, axes };
        r.check_ranges()?;
        Ok(r)
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

macro_rules! merge_fields {
    ($name:ident, $ty:ident, $($f:ident),*) => {
        fn $name(a: &$ty, d: &$ty) -> $ty {
            $ty { $($f: a.$f.clone().or(d.$f.clone())),* }
        }
    };
}

merge_fields!(merge_drive, DriveSettings, omega_over_chi, beta, eps_max, delta_f, delta_f_s0, n_tones, probe_delay, duration, v_mp, probe);
merge_fields!(merge_solver, SolverSettings, method, rtol, atol, dt, storage_dim, spectator, storage_loss, displacement);
merge_fields!(merge_analysis, AnalysisSettings, rabi_form, theory_form, two_tone_threshold, fit_start, n_max, coherence_floor);
merge_fields!(merge_tomography, TomographySettings, enabled, extent, points, n_max);

/// A validated configuration with defaults filled and units resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub params: SystemParams,
    /// Merged configuration; every field the scenario reads is set.
    pub config: ScenarioConfig,
    /// Sweep values in canonical units.
    pub axes: BTreeMap<String, Vec<f64>>,
}

impl Resolved {
    pub fn axis(&self, name: &str) -> Result<&[f64], ScenarioError> {
        self.axes.get(name).map(|v| v.as_slice()).ok_or_else(|| config_error(format!("missing sweep axis `{name}`")))
    }

    pub fn drive(&self) -> &DriveSettings {
        &self.config.drive
    }

    pub fn method(&self) -> Method {
        let s = &self.config.solver;
        match s.method.unwrap_or_default() {
            MethodKind::Adaptive => Method::Adaptive { rtol: s.rtol.unwrap_or(1e-8), atol: s.atol.unwrap_or(1e-10) },
            MethodKind::Rk4 => Method::Rk4 { dt: s.dt.map_or(1e-3, |d| d.value()) },
        }
    }

    pub fn model_options(&self) -> ModelOptions {
        let s = &self.config.solver;
        let d = ModelOptions::default();
        ModelOptions {
            storage_dim: s.storage_dim.unwrap_or(d.storage_dim),
            spectator: s.spectator.unwrap_or(d.spectator),
            displacement: s.displacement.unwrap_or(d.displacement),
            storage_loss: s.storage_loss.unwrap_or(d.storage_loss),
        }
    }

    pub fn omega(&self) -> f64 {
        self.drive().omega_over_chi.unwrap_or(0.0) * self.params.chi_s_mp
    }

    fn check_ranges(&self) -> Result<(), ScenarioError> {
        let d = self.drive();
        let nonneg = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x >= 0.0) || !x.is_finite() => Err(config_error(format!("drive.{name} = {x} must be >= 0"))),
            _ => Ok(()),
        };
        nonneg("omega_over_chi", d.omega_over_chi)?;
        nonneg("eps_max", d.eps_max.map(|v| v.value()))?;
        nonneg("probe_delay", d.probe_delay.map(|v| v.value()))?;
        if let Some(b) = d.beta {
            if !b.is_finite() {
                return Err(config_error("drive.beta must be finite"));
            }
        }
        if let Some(t) = d.duration {
            if !(t.value() > 0.0) {
                return Err(config_error(format!("drive.duration = {t} must be > 0")));
            }
        }
        if d.n_tones == Some(0) {
            return Err(config_error("drive.n_tones must be >= 1"));
        }
        if let Some(v) = d.v_mp {
            if !(v.value() > 0.0) {
                return Err(config_error(format!("drive.v_mp = {v} must be > 0")));
            }
        }
        let s = &self.config.solver;
        for (name, v) in [("rtol", s.rtol), ("atol", s.atol), ("dt", s.dt.map(|t| t.value()))] {
            if let Some(x) = v {
                if !(x > 0.0) || !x.is_finite() {
                    return Err(config_error(format!("solver.{name} = {x} must be > 0")));
                }
            }
        }
        if let Some(f) = self.config.analysis.coherence_floor {
            if !(f > 0.0 && f < 1.0) {
                return Err(config_error(format!("analysis.coherence_floor = {f} must lie in (0, 1)")));
            }
        }
        for (name, values) in &self.axes {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(config_error(format!("sweep `{name}` has non-finite values")));
            }
            let must_be_nonneg = ["eps_max", "nbar", "omega_over_chi", "duration", "time", "v_mp"];
            if must_be_nonneg.contains(&name.as_str()) && values.iter().any(|v| *v < 0.0) {
                return Err(config_error(format!("sweep `{name}` must be >= 0")));
            }
            if (name == "duration" || name == "v_mp") && values.iter().any(|v| *v == 0.0) {
                return Err(config_error(format!("sweep `{name}` must be > 0")));
            }
        }
        let t = &self.config.tomography;
        if let (Some(n), Some(pts), Some(ext)) = (t.n_max, t.points, t.extent) {
            if pts < 2 || !(ext > 0.0) {
                return Err(config_error("tomography grid needs >= 2 points and extent > 0"));
            }
            let step = 2.0 * ext / (pts - 1) as f64;
            if step > 0.1 + 1e-12 || ext * std::f64::consts::SQRT_2 < (n as f64).sqrt() + 2.0 {
                return Err(config_error(format!(
                    "tomography grid (extent {ext}, {pts} points) too coarse or small for n_max = {n}"
                )));
            }
        }
        let dim = self.model_options().storage_dim;
        if let Some(k) = self.scenario.max_photon_probed(self)? {
            if dim < k + 6 {
                return Err(config_error(format!(
                    "solver.storage_dim = {dim} is below max photon number probed ({k}) + 6"
                )));
            }
        }
        if dim < 2 {
            return Err(config_error("solver.storage_dim must be >= 2"));
        }
        Ok(())
    }
}

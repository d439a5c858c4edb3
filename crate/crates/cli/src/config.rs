//! The TOML scenario file. Every section has a default; the copy written
//! next to the outputs has all of them filled in.

use std::path::PathBuf;

use gibbslab::classical::CutoffFunction;
use gibbslab::experiments::{config_hash, EpsilonSchedule, FlowSettings, NMaxPolicy, Scenario};
use gibbslab::potentials::Potential;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub mode_set: ModeSetConfig,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_potential")]
    pub potential: Potential<f64>,
    #[serde(default)]
    pub cutoff: CutoffFunction<f64>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default = "default_fock")]
    pub fock: NMaxPolicy,
    #[serde(default)]
    pub schedule: Option<EpsilonSchedule<f64>>,
    #[serde(default)]
    pub flow: FlowSettings<f64>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub observable: ObservableConfig,
    #[serde(default)]
    pub correlations: CorrelationConfig,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub tail: TailConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_kappa() -> f64 {
    1.0
}

fn default_potential() -> Potential<f64> {
    Potential::constant(0.2)
}

fn default_fock() -> NMaxPolicy {
    NMaxPolicy::Auto
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSetConfig {
    pub k_max: usize,
}

impl Default for ModeSetConfig {
    fn default() -> Self {
        Self { k_max: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { n_samples: 100_000, seed: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Tau,
    Epsilon,
    Time,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { kind: SweepKind::Tau, values: vec![2.0, 4.0, 8.0, 16.0] }
    }
}

/// `ξ` is the projector onto one mode; `times` are the observation times
/// of the time correlation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    pub mode: i64,
    pub times: Vec<f64>,
}

impl Default for ObservableConfig {
    fn default() -> Self {
        Self { mode: 0, times: vec![0.0, 0.5] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationConfig {
    pub p: usize,
    /// Quantum `γ_{τ,p}` along the τ sweep instead of the classical `γ̂_p`.
    pub quantum: bool,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self { p: 1, quantum: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub quantum_order: usize,
    pub quadrature_order: usize,
    pub quadrature_panels: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self { quantum_order: 2, quadrature_order: 16, quadrature_panels: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    /// Horizon of the ε sweep.
    pub t_final: f64,
    pub stride: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self { t_final: 0.5, stride: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    pub b: f64,
    pub c: f64,
    pub levels: Vec<usize>,
    pub n_lambda: usize,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self { b: 1.0, c: 0.5, levels: vec![8, 16], n_lambda: 12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), formats: vec![Format::Csv, Format::Json] }
    }
}

/// A field path with what is wrong with it.
#[derive(Debug)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn err(field: &str, message: impl Into<String>) -> FieldError {
    FieldError { field: field.into(), message: message.into() }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, FieldError> {
        toml::from_str(text).map_err(|e| err("config", e.to_string().trim_end()))
    }

    /// Fills in values left to the code (the flow grid) so the stored copy
    /// needs no defaults.
    pub fn materialize(mut self) -> Self {
        if self.flow.n_x.is_none() {
            self.flow.n_x = Some(self.scenario().flow_config().n_x);
        }
        self
    }

    pub fn validate(&self) -> Result<(), Vec<FieldError>> {
        let mut errors = Vec::new();
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            errors.push(err("kappa", format!("must be positive, got {}", self.kappa)));
        }
        if let Err(e) = self.potential.validate() {
            errors.push(err("potential", e.to_string()));
        }
        if let Err(e) = self.cutoff.validate() {
            errors.push(err("cutoff", e));
        }
        if self.sampler.n_samples == 0 {
            errors.push(err("sampler.n_samples", "must be at least 1"));
        }
        if let NMaxPolicy::Explicit { n_max } = self.fock {
            if n_max == 0 {
                errors.push(err("fock.n_max", "must be at least 1"));
            }
        } else if self.cutoff.radius().is_none() {
            errors.push(err("fock.policy", "the diagnostic cutoff needs policy = \"explicit\" with n_max"));
        }
        if let Some(s) = &self.schedule {
            if !(s.exponent > 0.0) {
                errors.push(err("schedule.exponent", "must be positive"));
            }
        }
        if !(self.flow.dt > 0.0) {
            errors.push(err("flow.dt", "must be positive"));
        }
        if let Some(n) = self.flow.n_x {
            if n < 4 || !n.is_power_of_two() {
                errors.push(err("flow.n_x", format!("must be a power of two ≥ 4, got {n}")));
            }
        }
        if self.sweep.values.is_empty() {
            errors.push(err("sweep.values", "must not be empty"));
        }
        if self.sweep.values.iter().any(|v| !v.is_finite() || *v <= 0.0 && self.sweep.kind != SweepKind::Time) {
            errors.push(err("sweep.values", "τ and ε values must be positive"));
        }
        if self.observable.mode.unsigned_abs() as usize > self.mode_set.k_max {
            errors.push(err("observable.mode", format!("|{}| exceeds k_max = {}", self.observable.mode, self.mode_set.k_max)));
        }
        if self.observable.times.is_empty() {
            errors.push(err("observable.times", "must not be empty"));
        }
        if self.correlations.p == 0 {
            errors.push(err("correlations.p", "must be at least 1"));
        }
        if self.series.quadrature_order == 0 || self.series.quadrature_panels == 0 {
            errors.push(err("series", "quadrature order and panels must be positive"));
        }
        if !(self.evolve.t_final > 0.0) || self.evolve.stride == 0 {
            errors.push(err("evolve", "t_final and stride must be positive"));
        }
        if self.tail.levels.is_empty() || !(self.tail.b > 0.0) || self.tail.n_lambda < 3 {
            errors.push(err("tail", "need levels, b > 0 and n_lambda ≥ 3"));
        }
        if self.output.formats.is_empty() {
            errors.push(err("output.formats", "must name at least one of \"csv\", \"json\""));
        }
        if errors.is_empty() {
            if let Err(e) = self.scenario().validate() {
                errors.push(err("scenario", e.to_string()));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn scenario(&self) -> Scenario<f64> {
        Scenario {
            k_max: self.mode_set.k_max,
            kappa: self.kappa,
            potential: self.potential.clone(),
            cutoff: self.cutoff.clone(),
            n_samples: self.sampler.n_samples,
            seed: self.sampler.seed,
            n_max: self.fock,
            schedule: self.schedule.clone(),
            flow: self.flow,
        }
    }

    /// Hash of everything except where the outputs go.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        config_hash(&c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("the config serializes")
    }
}

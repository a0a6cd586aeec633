//! Canonical run-configuration schema (TOML) and its translation into the
//! core model types. One config file drives every subcommand; the embedded
//! hash of its bytes ties all outputs back to it.

use gridflc_core::dynamics::FaultScenario;
use gridflc_core::grid::{
    kron_reduce, manufacture_equilibrium, solve_equilibrium, FullNetwork, GeneratorParams, Line,
    ReducedNetwork, Shunt,
};
use gridflc_core::kan::{Architecture, Optimizer, TrainHyper};
use gridflc_core::linalg::{Complex, Matrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub system: SystemConfig,
    #[serde(default)]
    pub generators: Vec<GeneratorConfig>,
    #[serde(default)]
    pub faults: Vec<FaultConfig>,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_schema_version() -> u32 {
    1
}

/// Exactly one of the full bus/line description or the reduced matrices.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub buses: Option<usize>,
    /// 1-based bus ids of generator internal nodes, in generator order.
    #[serde(default)]
    pub generator_buses: Vec<usize>,
    #[serde(default)]
    pub lines: Vec<LineConfig>,
    #[serde(default)]
    pub shunts: Vec<ShuntConfig>,
    /// Direct generator-only matrices (alternative to buses/lines).
    pub reduced: Option<ReducedConfig>,
    /// When set, mechanical powers are manufactured so these angles are the
    /// exact pre-fault equilibrium (radians, one per generator).
    pub manufactured_angles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub from: usize,
    pub to: usize,
    /// Series admittance, per-unit.
    pub g: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuntConfig {
    pub bus: usize,
    pub g: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedConfig {
    pub conductance: Vec<Vec<f64>>,
    pub susceptance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    /// 1-based internal bus id; required with a full network.
    pub bus: Option<usize>,
    pub inertia: f64,
    pub damping: f64,
    pub voltage: f64,
    /// Mechanical power; optional when `manufactured_angles` is given.
    pub pm: Option<f64>,
    /// Desired angle; defaults to the pre-fault equilibrium.
    pub delta_star: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_alpha() -> f64 {
    0.5
}

fn default_beta() -> f64 {
    0.005
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultConfig {
    pub id: String,
    /// 1-based faulted bus.
    pub bus: usize,
    pub trip_from: usize,
    pub trip_to: usize,
    pub t_fault: f64,
    pub t_clear: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    /// Controller for `simulate`: none | dpfl | cpfl | flc.
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_level")]
    pub level_pct: f64,
    /// Optional symmetric ESS limit (pu); absent = unbounded.
    pub saturation: Option<f64>,
    /// Checkpoint path for mode = "flc" (CLI flag overrides).
    pub checkpoint: Option<String>,
    /// Sweep axes for `evaluate`.
    #[serde(default = "default_sweep_modes")]
    pub sweep_modes: Vec<String>,
    #[serde(default = "default_sweep_levels")]
    pub sweep_levels: Vec<f64>,
    /// Fault ids evaluated by `evaluate`; empty = all configured faults.
    #[serde(default)]
    pub sweep_faults: Vec<String>,
}

fn default_mode() -> String {
    "cpfl".into()
}

fn default_level() -> f64 {
    100.0
}

fn default_sweep_modes() -> Vec<String> {
    vec!["flc".into(), "dpfl".into()]
}

fn default_sweep_levels() -> Vec<f64> {
    vec![0.0, 33.0, 67.0, 100.0]
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            level_pct: default_level(),
            saturation: None,
            checkpoint: None,
            sweep_modes: default_sweep_modes(),
            sweep_levels: default_sweep_levels(),
            sweep_faults: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_lr_decay")]
    pub lr_decay: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs_per_round: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Every `probe_stride`-th sample is held out of training as the probe.
    #[serde(default = "default_probe_stride")]
    pub probe_stride: usize,
}

fn default_dims() -> Vec<usize> {
    vec![3, 32, 1]
}

fn default_degree() -> usize {
    5
}

fn default_optimizer() -> String {
    "adam".into()
}

fn default_lr() -> f64 {
    1e-3
}

fn default_lr_decay() -> f64 {
    1.0
}

fn default_batch() -> usize {
    1024
}

fn default_epochs() -> usize {
    1
}

fn default_rounds() -> usize {
    20
}

fn default_probe_stride() -> usize {
    10
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            dims: default_dims(),
            degree: default_degree(),
            optimizer: default_optimizer(),
            learning_rate: default_lr(),
            lr_decay: default_lr_decay(),
            batch_size: default_batch(),
            epochs_per_round: default_epochs(),
            rounds: default_rounds(),
            master_seed: 0,
            probe_stride: default_probe_stride(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Horizon for `gen-data` runs; defaults to `t_max`.
    pub t_max_train: Option<f64>,
    /// Controllers are idle before this time (seconds).
    #[serde(default)]
    pub control_start: f64,
    /// |omega| band for the stability-time metric.
    #[serde(default = "default_band")]
    pub stability_band: f64,
}

fn default_band() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
}

fn default_dir() -> String {
    "runs/out".into()
}

fn default_base_mva() -> f64 {
    100.0
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            base_mva: default_base_mva(),
        }
    }
}

/// A validated, core-typed view of the configuration.
pub struct ResolvedSystem {
    /// Present when the config gives bus/line data (needed for faults).
    pub full: Option<FullNetwork>,
    pub reduced: ReducedNetwork,
    pub params: Vec<GeneratorParams>,
    pub faults: Vec<FaultScenario>,
    /// Pre-fault equilibrium angles.
    pub equilibrium: Vec<f64>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<gridflc_core::Error> for ConfigError {
    fn from(e: gridflc_core::Error) -> Self {
        ConfigError(e.to_string())
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig =
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))?;
    if cfg.schema_version != 1 {
        return Err(ConfigError(format!(
            "unsupported schema_version {}",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn architecture(&self) -> Architecture {
        Architecture::uniform_degree(self.training.dims.clone(), self.training.degree)
    }

    pub fn train_hyper(&self) -> Result<TrainHyper, ConfigError> {
        let optimizer = match self.training.optimizer.as_str() {
            "adam" => Optimizer::Adam,
            "sgd" => Optimizer::Sgd,
            other => return Err(ConfigError(format!("unknown optimizer '{other}'"))),
        };
        Ok(TrainHyper {
            learning_rate: self.training.learning_rate,
            batch_size: self.training.batch_size,
            epochs: self.training.epochs_per_round,
            seed: 0,
            optimizer,
        })
    }

    /// Builds the network, generator parameters and fault list, solving or
    /// manufacturing the equilibrium as configured.
    pub fn resolve_system(&self) -> Result<ResolvedSystem, ConfigError> {
        let n_gen = self.generators.len();
        if n_gen == 0 {
            return Err(ConfigError("at least one [[generators]] entry is required".into()));
        }

        let has_full = self.system.buses.is_some()
            || !self.system.lines.is_empty()
            || !self.system.generator_buses.is_empty();
        let has_reduced = self.system.reduced.is_some();
        if has_full == has_reduced {
            return Err(ConfigError(
                "exactly one of the full network (buses/lines) or [system.reduced] must be given"
                    .into(),
            ));
        }

        let (full, reduced) = if has_full {
            let n_bus = self
                .system
                .buses
                .ok_or_else(|| ConfigError("system.buses is required with bus/line data".into()))?;
            let mut gen_buses = Vec::with_capacity(n_gen);
            if !self.system.generator_buses.is_empty() {
                if self.system.generator_buses.len() != n_gen {
                    return Err(ConfigError(
                        "system.generator_buses length must match [[generators]]".into(),
                    ));
                }
                for &b in &self.system.generator_buses {
                    gen_buses.push(to_zero_based(b, n_bus, "generator bus")?);
                }
            } else {
                for g in &self.generators {
                    let b = g.bus.ok_or_else(|| {
                        ConfigError("generator bus is required with a full network".into())
                    })?;
                    gen_buses.push(to_zero_based(b, n_bus, "generator bus")?);
                }
            }
            let mut lines = Vec::with_capacity(self.system.lines.len());
            for l in &self.system.lines {
                lines.push(Line {
                    from: to_zero_based(l.from, n_bus, "line endpoint")?,
                    to: to_zero_based(l.to, n_bus, "line endpoint")?,
                    y: Complex::new(l.g, l.b),
                });
            }
            let mut shunts = Vec::with_capacity(self.system.shunts.len());
            for s in &self.system.shunts {
                shunts.push(Shunt {
                    bus: to_zero_based(s.bus, n_bus, "shunt bus")?,
                    y: Complex::new(s.g, s.b),
                });
            }
            let full = FullNetwork::from_elements(n_bus, gen_buses, lines, shunts)?;
            let reduced = kron_reduce(&full)?;
            (Some(full), reduced)
        } else {
            let rc = self.system.reduced.as_ref().unwrap();
            let g = Matrix::from_rows(&rc.conductance);
            let b = Matrix::from_rows(&rc.susceptance);
            (None, ReducedNetwork::new(g, b)?)
        };

        if reduced.len() != n_gen {
            return Err(ConfigError(format!(
                "network has {} generators but {} [[generators]] entries",
                reduced.len(),
                n_gen
            )));
        }

        for w in reduced.assumption_warnings() {
            eprintln!("warning: {w}");
        }

        // mechanical power: explicit, or manufactured from chosen angles
        let voltages: Vec<f64> = self.generators.iter().map(|g| g.voltage).collect();
        let pm: Vec<f64> = match &self.system.manufactured_angles {
            Some(angles) => {
                if angles.len() != n_gen {
                    return Err(ConfigError(
                        "manufactured_angles length must match generator count".into(),
                    ));
                }
                manufacture_equilibrium(angles, &voltages, &reduced)?
            }
            None => {
                let mut pm = Vec::with_capacity(n_gen);
                for (i, g) in self.generators.iter().enumerate() {
                    pm.push(g.pm.ok_or_else(|| {
                        ConfigError(format!(
                            "generator {} needs pm (or set system.manufactured_angles)",
                            i + 1
                        ))
                    })?);
                }
                pm
            }
        };

        let mut params: Vec<GeneratorParams> = self
            .generators
            .iter()
            .zip(&pm)
            .map(|(g, &mech_power)| GeneratorParams {
                inertia: g.inertia,
                damping: g.damping,
                mech_power,
                voltage: g.voltage,
                delta_star: g.delta_star.unwrap_or(f64::NAN),
                alpha: g.alpha,
                beta: g.beta,
            })
            .collect();

        let equilibrium = solve_equilibrium(&params, &reduced)?;
        for (p, &eq) in params.iter_mut().zip(&equilibrium) {
            if p.delta_star.is_nan() {
                p.delta_star = eq;
            }
        }
        for p in &params {
            p.validate()?;
        }

        let mut faults = Vec::with_capacity(self.faults.len());
        if !self.faults.is_empty() {
            let full_ref = full.as_ref().ok_or_else(|| {
                ConfigError("faults require the full network form".into())
            })?;
            for f in &self.faults {
                if !(f.t_fault >= 0.0 && f.t_fault < f.t_clear) {
                    return Err(ConfigError(format!(
                        "fault {}: need 0 <= t_fault < t_clear",
                        f.id
                    )));
                }
                let scenario = FaultScenario {
                    id: f.id.clone(),
                    faulted_bus: to_zero_based(f.bus, full_ref.n_bus(), "fault bus")?,
                    tripped_line: (
                        to_zero_based(f.trip_from, full_ref.n_bus(), "tripped line endpoint")?,
                        to_zero_based(f.trip_to, full_ref.n_bus(), "tripped line endpoint")?,
                    ),
                    t_fault: f.t_fault,
                    t_clear: f.t_clear,
                };
                scenario.validate(full_ref)?;
                faults.push(scenario);
            }
        }

        Ok(ResolvedSystem {
            full,
            reduced,
            params,
            faults,
            equilibrium,
        })
    }
}

fn to_zero_based(id: usize, n: usize, what: &str) -> Result<usize, ConfigError> {
    if id == 0 || id > n {
        return Err(ConfigError(format!("{what} {id} out of range 1..={n}")));
    }
    Ok(id - 1)
}

/// FNV-1a over the raw config bytes; embedded in every artifact.
pub fn config_hash(text: &str) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

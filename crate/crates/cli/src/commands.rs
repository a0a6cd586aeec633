//! Subcommand implementations. Every command reads one config file, writes
//! its artifacts under the output directory only, and embeds the config hash
//! so a run can be traced back to its exact inputs.

use crate::config::{config_hash, ConfigError, ResolvedSystem, RunConfig};
use gridflc_core::control::{
    assign_controllers, ControlAssignment, ControllerMode, TimeFeature,
};
use gridflc_core::dynamics::{simulate, SimOptions};
use gridflc_core::experiments::{
    energy_metrics, generate_dataset, stability_time, penetration_sweep, StabilityCriterion,
    SweepMode, SweepSpec,
};
use gridflc_core::federated::{run_federated_training_observed, Aggregation, FederatedConfig};
use gridflc_core::kan::{Checkpoint, CheckpointMeta, ChebyKanModel, TrainingSample};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub enum CmdError {
    Config(String),
    Runtime(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 2,
            CmdError::Runtime(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CmdError::Config(_) => "config",
            CmdError::Runtime(_) => "runtime",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CmdError::Config(m) | CmdError::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e.0)
    }
}

impl From<gridflc_core::Error> for CmdError {
    fn from(e: gridflc_core::Error) -> Self {
        match e {
            gridflc_core::Error::Config(m) => CmdError::Config(m),
            other => CmdError::Runtime(other.to_string()),
        }
    }
}

fn io_err(e: std::io::Error, what: &str) -> CmdError {
    CmdError::Runtime(format!("{what}: {e}"))
}

pub struct LoadedConfig {
    pub config: RunConfig,
    pub hash: String,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config = crate::config::parse_config(&text)?;
    Ok(LoadedConfig {
        config,
        hash: config_hash(&text),
    })
}

fn out_dir(cfg: &RunConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir))
}

fn ensure_dir(dir: &Path) -> Result<(), CmdError> {
    fs::create_dir_all(dir).map_err(|e| io_err(e, "creating output directory"))
}

fn find_fault<'a>(
    system: &'a ResolvedSystem,
    id: Option<&str>,
) -> Result<Option<&'a gridflc_core::dynamics::FaultScenario>, CmdError> {
    match id {
        None => Ok(None),
        Some(id) => system
            .faults
            .iter()
            .find(|f| f.id == id)
            .map(Some)
            .ok_or_else(|| CmdError::Config(format!("unknown fault id '{id}'"))),
    }
}

fn load_checkpoint(path: &Path) -> Result<(ChebyKanModel, CheckpointMeta), CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::Config(format!("cannot read checkpoint {}: {e}", path.display())))?;
    let ckpt = Checkpoint::from_json(&text).map_err(CmdError::from)?;
    let meta = ckpt.metadata.clone();
    Ok((ckpt.to_model()?, meta))
}

fn build_assignment(
    cfg: &RunConfig,
    system: &ResolvedSystem,
    checkpoint: Option<&Path>,
) -> Result<ControlAssignment, CmdError> {
    let n = system.params.len();
    let mode = cfg.control.mode.as_str();
    let level = cfg.control.level_pct;
    match mode {
        "none" => Ok(ControlAssignment::none(n)),
        "cpfl" => Ok(ControlAssignment::uniform(n, ControllerMode::Cpfl)),
        "dpfl" => Ok(assign_controllers(n, ControllerMode::Dpfl, level)?),
        "flc" => {
            let path = checkpoint
                .map(Path::to_path_buf)
                .or_else(|| cfg.control.checkpoint.as_ref().map(PathBuf::from))
                .ok_or_else(|| {
                    CmdError::Config("mode 'flc' needs a checkpoint (--checkpoint or control.checkpoint)".into())
                })?;
            let (model, meta) = load_checkpoint(&path)?;
            let time = TimeFeature {
                t_fault: meta.t_fault,
                t_max: if meta.t_max_train > 0.0 { meta.t_max_train } else { cfg.simulation.t_max },
            };
            Ok(assign_controllers(
                n,
                ControllerMode::Flc { model: Arc::new(model), time },
                level,
            )?)
        }
        other => Err(CmdError::Config(format!("unknown control mode '{other}'"))),
    }
}

fn sim_options(cfg: &RunConfig, system: &ResolvedSystem, t_max: f64) -> SimOptions {
    SimOptions {
        dt: cfg.simulation.dt,
        t_max,
        control_start: cfg.simulation.control_start,
        saturation: cfg.control.saturation,
        initial: Some((system.equilibrium.clone(), vec![0.0; system.params.len()])),
    }
}

#[derive(Serialize)]
struct GeneratorSummary {
    generator: usize,
    stab_time_s: f64,
    unstable: bool,
}

#[derive(Serialize)]
struct SimulateSummary {
    config_hash: String,
    fault: Option<String>,
    dt: f64,
    t_max: f64,
    control_mode: String,
    level_pct: f64,
    stability: Vec<GeneratorSummary>,
    p_inj: f64,
    p_stor: f64,
}

/// `simulate`: run one scenario, write trajectory.csv + summary.json.
pub fn cmd_simulate(
    loaded: &LoadedConfig,
    fault_id: Option<&str>,
    out: Option<&Path>,
    checkpoint: Option<&Path>,
) -> Result<(), CmdError> {
    let cfg = &loaded.config;
    let system = cfg.resolve_system()?;
    let scenario = find_fault(&system, fault_id)?;
    let full = system.full.as_ref();
    if scenario.is_some() && full.is_none() {
        return Err(CmdError::Config("faults require the full network form".into()));
    }
    let assignment = build_assignment(cfg, &system, checkpoint)?;
    let opts = sim_options(cfg, &system, cfg.simulation.t_max);

    let trajectory = match full {
        Some(full) => simulate(full, &system.params, scenario, &assignment, &opts)?,
        None => {
            let phases =
                gridflc_core::dynamics::PhaseNetworks::fault_free(system.reduced.clone());
            gridflc_core::dynamics::simulate_on(&phases, &system.params, &assignment, &opts)?
        }
    };

    let dir = out_dir(cfg, out);
    ensure_dir(&dir)?;
    fs::write(dir.join("trajectory.csv"), trajectory.to_csv())
        .map_err(|e| io_err(e, "writing trajectory.csv"))?;

    let criterion = StabilityCriterion::new(cfg.simulation.stability_band, cfg.simulation.t_max)
        .map_err(CmdError::from)?;
    let t_fault = scenario.map_or(0.0, |s| s.t_fault);
    let mut stability = Vec::new();
    for i in 0..system.params.len() {
        let st = stability_time(&trajectory, i, &criterion, t_fault)?;
        stability.push(GeneratorSummary {
            generator: i + 1,
            stab_time_s: st.seconds,
            unstable: st.unstable,
        });
    }
    let all: Vec<usize> = (0..system.params.len()).collect();
    let energy = energy_metrics(&trajectory, &all, cfg.output.base_mva * 1000.0)?;
    let summary = SimulateSummary {
        config_hash: loaded.hash.clone(),
        fault: scenario.map(|s| s.id.clone()),
        dt: cfg.simulation.dt,
        t_max: cfg.simulation.t_max,
        control_mode: cfg.control.mode.clone(),
        level_pct: assignment.level_pct(),
        stability,
        p_inj: energy.p_inj,
        p_stor: energy.p_stor,
    };
    write_json(&dir.join("summary.json"), &summary)?;

    for s in &summary.stability {
        println!(
            "generator {}: stability time {} s{}",
            s.generator,
            s.stab_time_s,
            if s.unstable { " (UNSTABLE)" } else { "" }
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ShardManifest {
    schema_version: u32,
    config_hash: String,
    fault: String,
    dt: f64,
    t_max: f64,
    t_fault: f64,
    n_generators: usize,
    samples_per_shard: usize,
    files: Vec<String>,
}

/// `gen-data`: 100%-CPFL simulation, one sample shard per generator.
pub fn cmd_gen_data(
    loaded: &LoadedConfig,
    fault_id: &str,
    out: Option<&Path>,
) -> Result<(), CmdError> {
    let cfg = &loaded.config;
    let system = cfg.resolve_system()?;
    let scenario = find_fault(&system, Some(fault_id))?.unwrap();
    let full = system
        .full
        .as_ref()
        .ok_or_else(|| CmdError::Config("gen-data requires the full network form".into()))?;

    let t_max = cfg.simulation.t_max_train.unwrap_or(cfg.simulation.t_max);
    let opts = sim_options(cfg, &system, t_max);
    let bundle = generate_dataset(full, &system.params, scenario, &opts)?;

    let dir = out_dir(cfg, out);
    ensure_dir(&dir)?;
    let mut files = Vec::new();
    for (i, shard) in bundle.shards.iter().enumerate() {
        let name = format!("shard_{}.csv", i + 1);
        let mut text = String::from("omega,delta_err,t_feature,pa\n");
        for s in shard {
            writeln!(text, "{},{},{},{}", s.input[0], s.input[1], s.input[2], s.target)
                .expect("string write");
        }
        fs::write(dir.join(&name), text).map_err(|e| io_err(e, "writing shard"))?;
        files.push(name);
    }
    let manifest = ShardManifest {
        schema_version: 1,
        config_hash: loaded.hash.clone(),
        fault: scenario.id.clone(),
        dt: cfg.simulation.dt,
        t_max,
        t_fault: scenario.t_fault,
        n_generators: bundle.shards.len(),
        samples_per_shard: bundle.shards[0].len(),
        files,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    println!(
        "wrote {} shards x {} samples to {}",
        bundle.shards.len(),
        bundle.shards[0].len(),
        dir.display()
    );
    Ok(())
}

fn read_shards(dir: &Path) -> Result<(Vec<Vec<TrainingSample>>, serde_json::Value), CmdError> {
    let manifest_text = fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| CmdError::Config(format!("cannot read shard manifest: {e}")))?;
    let manifest: serde_json::Value = serde_json::from_str(&manifest_text)
        .map_err(|e| CmdError::Config(format!("invalid manifest: {e}")))?;
    let files = manifest["files"]
        .as_array()
        .ok_or_else(|| CmdError::Config("manifest missing files".into()))?;
    let mut shards = Vec::new();
    for f in files {
        let name = f
            .as_str()
            .ok_or_else(|| CmdError::Config("bad file entry in manifest".into()))?;
        let text = fs::read_to_string(dir.join(name))
            .map_err(|e| CmdError::Config(format!("cannot read shard {name}: {e}")))?;
        let mut shard = Vec::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',').map(str::parse::<f64>);
            let mut next = |what: &str| -> Result<f64, CmdError> {
                parts
                    .next()
                    .and_then(Result::ok)
                    .ok_or_else(|| CmdError::Config(format!("shard {name} line {ln}: bad {what}")))
            };
            let omega = next("omega")?;
            let delta_err = next("delta_err")?;
            let t_feature = next("t_feature")?;
            let pa = next("pa")?;
            shard.push(TrainingSample {
                input: vec![omega, delta_err, t_feature],
                target: pa,
            });
        }
        shards.push(shard);
    }
    Ok((shards, manifest))
}

/// Splits off every `stride`-th sample of each shard as the shared probe.
pub fn probe_split(
    shards: &[Vec<TrainingSample>],
    stride: usize,
) -> (Vec<Vec<TrainingSample>>, Vec<TrainingSample>) {
    let stride = stride.max(2);
    let mut train = Vec::with_capacity(shards.len());
    let mut probe = Vec::new();
    for shard in shards {
        let mut tr = Vec::with_capacity(shard.len());
        for (k, s) in shard.iter().enumerate() {
            if k % stride == stride - 1 {
                probe.push(s.clone());
            } else {
                tr.push(s.clone());
            }
        }
        train.push(tr);
    }
    (train, probe)
}

/// `train`: federated rounds over the shard files; writes the final
/// checkpoint, per-round checkpoints and the round report.
pub fn cmd_train(
    loaded: &LoadedConfig,
    shards_dir: &Path,
    out: Option<&Path>,
    seed_flag: Option<u64>,
) -> Result<(), CmdError> {
    let cfg = &loaded.config;
    if cfg.training.rounds == 0 {
        return Err(CmdError::Config("training.rounds must be >= 1".into()));
    }
    let (shards, manifest) = read_shards(shards_dir)?;
    let (train_shards, probe) = probe_split(&shards, cfg.training.probe_stride);

    let fed = FederatedConfig {
        rounds: cfg.training.rounds,
        clients: shards.len(),
        hyper: cfg.train_hyper()?,
        lr_decay: cfg.training.lr_decay,
        aggregation: Aggregation::FedAvg,
        master_seed: seed_flag.unwrap_or(cfg.training.master_seed),
        architecture: cfg.architecture(),
    };
    fed.validate().map_err(CmdError::from)?;

    let dir = out_dir(cfg, out);
    ensure_dir(&dir)?;
    let rounds_dir = dir.join("rounds");
    ensure_dir(&rounds_dir)?;

    let t_fault = manifest["t_fault"].as_f64().unwrap_or(0.0);
    let t_max_train = manifest["t_max"].as_f64().unwrap_or(cfg.simulation.t_max);
    let meta_for = |rounds: usize, final_loss: f64| CheckpointMeta {
        seed: fed.master_seed,
        rounds,
        final_loss,
        t_fault,
        t_max_train,
        config_hash: Some(loaded.hash.clone()),
    };

    let mut round_io_error: Option<std::io::Error> = None;
    let (global, reports) = run_federated_training_observed(
        &fed,
        &train_shards,
        &probe,
        |round, model| {
            if round_io_error.is_none() {
                let ckpt = Checkpoint::from_model(model, meta_for(round + 1, f64::NAN));
                let path = rounds_dir.join(format!("round_{:02}.json", round + 1));
                if let Err(e) = fs::write(path, ckpt.to_json()) {
                    round_io_error = Some(e);
                }
            }
        },
    )?;
    if let Some(e) = round_io_error {
        return Err(io_err(e, "writing per-round checkpoint"));
    }

    let meta = meta_for(fed.rounds, reports.last().map_or(f64::NAN, |r| r.probe_loss));
    let ckpt = Checkpoint::from_model(&global, meta);
    fs::write(dir.join("checkpoint.json"), ckpt.to_json())
        .map_err(|e| io_err(e, "writing checkpoint"))?;

    let mut report_csv = String::from("round,probe_loss");
    for c in 1..=shards.len() {
        write!(report_csv, ",client_{c}_loss").expect("string write");
    }
    report_csv.push('\n');
    for r in &reports {
        write!(report_csv, "{},{}", r.round + 1, r.probe_loss).expect("string write");
        for l in &r.client_losses {
            write!(report_csv, ",{l}").expect("string write");
        }
        report_csv.push('\n');
        eprintln!(
            "round {}: probe {:.6} ({:.2?})",
            r.round + 1,
            r.probe_loss,
            r.wall_clock
        );
    }
    fs::write(dir.join("round_report.csv"), report_csv)
        .map_err(|e| io_err(e, "writing round report"))?;

    // soft health check: probe should be non-increasing most rounds
    let non_increasing = reports
        .windows(2)
        .filter(|w| w[1].probe_loss <= w[0].probe_loss)
        .count();
    if reports.len() > 1 {
        let frac = non_increasing as f64 / (reports.len() - 1) as f64;
        if frac < 0.8 {
            eprintln!(
                "warning: probe loss non-increasing in only {:.0}% of rounds",
                frac * 100.0
            );
        }
    }
    let init_probe = probe_initial(&fed, &probe)?;
    let best = reports
        .iter()
        .map(|r| r.probe_loss)
        .fold(f64::INFINITY, f64::min);
    println!(
        "trained {} rounds; initial probe {}, best {}, final {}",
        fed.rounds,
        init_probe,
        best,
        reports.last().map_or(f64::NAN, |r| r.probe_loss)
    );
    Ok(())
}

fn probe_initial(
    fed: &FederatedConfig,
    probe: &[TrainingSample],
) -> Result<f64, CmdError> {
    if probe.is_empty() {
        return Ok(f64::NAN);
    }
    let init = gridflc_core::federated::initial_global_model(fed)?;
    Ok(gridflc_core::kan::loss_mse(&init, probe)?)
}

#[derive(Serialize)]
struct EvaluateMetadata {
    config_hash: String,
    checkpoint_seed: u64,
    dt: f64,
    t_max: f64,
    control_start: f64,
    stability_band: f64,
    base_mva: f64,
    faults: Vec<String>,
    modes: Vec<String>,
    levels: Vec<f64>,
    cell_errors: Vec<String>,
}

/// `evaluate`: penetration sweep over faults x modes x levels.
pub fn cmd_evaluate(
    loaded: &LoadedConfig,
    checkpoint: &Path,
    out: Option<&Path>,
    jobs: usize,
) -> Result<(), CmdError> {
    let cfg = &loaded.config;
    let system = cfg.resolve_system()?;
    let full = system
        .full
        .as_ref()
        .ok_or_else(|| CmdError::Config("evaluate requires the full network form".into()))?;

    let (model, meta) = load_checkpoint(checkpoint)?;
    let time = TimeFeature {
        t_fault: meta.t_fault,
        t_max: if meta.t_max_train > 0.0 { meta.t_max_train } else { cfg.simulation.t_max },
    };

    let fault_ids: Vec<String> = if cfg.control.sweep_faults.is_empty() {
        system.faults.iter().map(|f| f.id.clone()).collect()
    } else {
        cfg.control.sweep_faults.clone()
    };
    let mut faults = Vec::new();
    for id in &fault_ids {
        faults.push(
            system
                .faults
                .iter()
                .find(|f| &f.id == id)
                .cloned()
                .ok_or_else(|| CmdError::Config(format!("unknown fault id '{id}'")))?,
        );
    }
    let mut modes = Vec::new();
    for m in &cfg.control.sweep_modes {
        modes.push(match m.as_str() {
            "flc" => SweepMode::Flc,
            "dpfl" => SweepMode::Dpfl,
            other => return Err(CmdError::Config(format!("unknown sweep mode '{other}'"))),
        });
    }

    let spec = SweepSpec {
        faults,
        modes,
        levels: cfg.control.sweep_levels.clone(),
        criterion: StabilityCriterion::new(cfg.simulation.stability_band, cfg.simulation.t_max)?,
        base_power_kw: cfg.output.base_mva * 1000.0,
        dt: cfg.simulation.dt,
        t_max: cfg.simulation.t_max,
        control_start: cfg.simulation.control_start,
        saturation: cfg.control.saturation,
        model: Some((Arc::new(model), time)),
        jobs,
    };
    let table = penetration_sweep(full, &system.params, &spec)?;

    let dir = out_dir(cfg, out);
    ensure_dir(&dir)?;
    fs::write(dir.join("results.csv"), table.to_csv())
        .map_err(|e| io_err(e, "writing results.csv"))?;
    let metadata = EvaluateMetadata {
        config_hash: loaded.hash.clone(),
        checkpoint_seed: meta.seed,
        dt: cfg.simulation.dt,
        t_max: cfg.simulation.t_max,
        control_start: cfg.simulation.control_start,
        stability_band: cfg.simulation.stability_band,
        base_mva: cfg.output.base_mva,
        faults: fault_ids,
        modes: cfg.control.sweep_modes.clone(),
        levels: cfg.control.sweep_levels.clone(),
        cell_errors: table
            .errors
            .iter()
            .map(|e| format!("{} {} {}%: {}", e.fault, e.mode, e.level_pct, e.message))
            .collect(),
    };
    write_json(&dir.join("metadata.json"), &metadata)?;
    println!("wrote {} result rows to {}", table.rows.len(), dir.display());
    for e in &metadata.cell_errors {
        eprintln!("cell error: {e}");
    }
    Ok(())
}

/// `info`: parameter and operation counts for the configured architecture or
/// a checkpoint; optionally exports the edge-function report.
pub fn cmd_info(
    loaded: &LoadedConfig,
    checkpoint: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CmdError> {
    let model = match checkpoint {
        Some(path) => load_checkpoint(path)?.0,
        None => ChebyKanModel::zeros(&loaded.config.architecture())?,
    };
    let arch = model.architecture();
    println!("dims: {:?}", arch.dims);
    println!("degrees: {:?}", arch.degrees);
    println!("trainable parameters: {}", model.param_count());
    println!("flops per forward pass: {}", model.flop_count());
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let report = gridflc_core::kan::export_edges(&model);
        write_json(&dir.join("edges.json"), &report)?;
        println!("wrote edge report to {}", dir.join("edges.json").display());
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CmdError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CmdError::Runtime(format!("serializing {}: {e}", path.display())))?;
    fs::write(path, text).map_err(|e| io_err(e, "writing json"))
}

//! Reproduction harness: training-data generation from CPFL-controlled runs,
//! stability-time and energy metrics, and fault x mode x level sweeps.

use crate::control::{assign_controllers, ControlAssignment, ControllerMode, TimeFeature};
use crate::dynamics::{simulate_on, FaultScenario, PhaseNetworks, SimOptions, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{solve_equilibrium, FullNetwork, GeneratorParams};
use crate::kan::{ChebyKanModel, TrainingSample};
use std::sync::{Arc, Mutex};

/// Band and cap for the stabilization-time metric: a generator is settled
/// once |omega| stays within `epsilon` through the end of the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCriterion {
    pub epsilon: f64,
    pub cap: f64,
}

impl StabilityCriterion {
    pub fn new(epsilon: f64, cap: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self { epsilon, cap })
    }
}

/// Stabilization time of one generator, measured from fault onset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityTime {
    pub seconds: f64,
    pub unstable: bool,
}

/// Time to permanently re-enter the band, from fault onset. Zero when the
/// band is never left after the fault; the cap (flagged unstable) when the
/// band is still violated at the end of the record.
pub fn stability_time(
    trajectory: &Trajectory,
    generator: usize,
    criterion: &StabilityCriterion,
    t_fault: f64,
) -> Result<StabilityTime> {
    if trajectory.steps.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut last_violation: Option<usize> = None;
    for (idx, step) in trajectory.steps.iter().enumerate() {
        if step.omega[generator].abs() > criterion.epsilon {
            last_violation = Some(idx);
        }
    }
    match last_violation {
        None => Ok(StabilityTime { seconds: 0.0, unstable: false }),
        Some(idx) => {
            let t_violation = trajectory.steps[idx].t;
            if t_violation < t_fault {
                return Ok(StabilityTime { seconds: 0.0, unstable: false });
            }
            if idx + 1 == trajectory.steps.len() {
                return Ok(StabilityTime { seconds: criterion.cap, unstable: true });
            }
            let t_settled = trajectory.steps[idx + 1].t;
            Ok(StabilityTime {
                seconds: (t_settled - t_fault).max(0.0),
                unstable: false,
            })
        }
    }
}

/// Group-level stabilization: arithmetic mean over the generators of one
/// controller mode; unstable if any member is.
pub fn group_stability_time(
    trajectory: &Trajectory,
    assignment: &ControlAssignment,
    mode_label: &str,
    criterion: &StabilityCriterion,
    t_fault: f64,
) -> Result<StabilityTime> {
    let members = assignment.group(mode_label);
    if members.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mut acc = 0.0;
    let mut unstable = false;
    for &i in &members {
        let st = stability_time(trajectory, i, criterion, t_fault)?;
        acc += st.seconds;
        unstable |= st.unstable;
    }
    Ok(StabilityTime {
        seconds: acc / members.len() as f64,
        unstable,
    })
}

/// Integrated ESS use of a generator set, split into discharge (injection)
/// and charge (storage), reported in kW*s on the given base power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub p_inj: f64,
    pub p_stor: f64,
}

pub fn energy_metrics(
    trajectory: &Trajectory,
    generators: &[usize],
    base_power_kw: f64,
) -> Result<EnergyReport> {
    if generators.is_empty() {
        return Err(Error::EmptyGroup);
    }
    if trajectory.steps.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let dt = trajectory.dt;
    let mut inj = 0.0;
    let mut stor = 0.0;
    for step in &trajectory.steps {
        for &i in generators {
            let pu = step.pu[i];
            inj += pu.max(0.0) * dt;
            stor += (-pu).max(0.0) * dt;
        }
    }
    Ok(EnergyReport {
        p_inj: inj * base_power_kw,
        p_stor: stor * base_power_kw,
    })
}

/// Dataset produced by one 100%-CPFL run: one shard per generator plus the
/// source trajectory and the time-feature normalization the samples used.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub shards: Vec<Vec<TrainingSample>>,
    pub trajectory: Trajectory,
    pub time: TimeFeature,
}

/// Simulates the scenario with every generator under CPFL and emits, per
/// step and per generator, the sample `(omega, delta - delta*, t_feature) ->
/// Pa`. Shard i belongs to client i.
///
/// `opts.control_start` should normally be the clearing time: with CPFL
/// active from t = 0 the run never leaves the equilibrium (the control
/// cancels the fault exactly), which would make every sample identical.
pub fn generate_dataset(
    full: &FullNetwork,
    params: &[GeneratorParams],
    scenario: &FaultScenario,
    opts: &SimOptions,
) -> Result<DatasetBundle> {
    let phases = PhaseNetworks::build(full, Some(scenario))?;
    let n = phases.pre().len();
    let assignment = ControlAssignment::uniform(n, ControllerMode::Cpfl);
    let trajectory = simulate_on(&phases, params, &assignment, opts)?;
    let time = TimeFeature {
        t_fault: scenario.t_fault,
        t_max: opts.t_max,
    };
    let mut shards = vec![Vec::with_capacity(trajectory.steps.len()); n];
    for step in &trajectory.steps {
        let feature = time.feature(step.t);
        for i in 0..n {
            shards[i].push(TrainingSample {
                input: vec![
                    step.omega[i],
                    step.delta[i] - params[i].delta_star,
                    feature,
                ],
                target: step.pa[i],
            });
        }
    }
    Ok(DatasetBundle {
        shards,
        trajectory,
        time,
    })
}

/// Distributed controller family being swept against the CPFL remainder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Flc,
    Dpfl,
}

impl SweepMode {
    pub fn label(self) -> &'static str {
        match self {
            SweepMode::Flc => "flc",
            SweepMode::Dpfl => "dpfl",
        }
    }
}

/// One results row: metrics of one controller group in one (fault, mode,
/// level) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub fault: String,
    pub mode: String,
    pub level_pct: f64,
    pub group: String,
    pub stab_time_s: f64,
    pub unstable: bool,
    pub p_inj: f64,
    pub p_stor: f64,
}

/// A cell that failed; the sweep continues past it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCellError {
    pub fault: String,
    pub mode: String,
    pub level_pct: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub errors: Vec<SweepCellError>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fault,mode,level_pct,group,stab_time_s,unstable,p_inj,p_stor\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.fault, r.mode, r.level_pct, r.group, r.stab_time_s, r.unstable, r.p_inj, r.p_stor
            ));
        }
        out
    }
}

/// Everything a sweep needs besides the network itself.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub faults: Vec<FaultScenario>,
    pub modes: Vec<SweepMode>,
    pub levels: Vec<f64>,
    pub criterion: StabilityCriterion,
    pub base_power_kw: f64,
    pub dt: f64,
    pub t_max: f64,
    pub control_start: f64,
    pub saturation: Option<f64>,
    /// Trained model for FLC cells, with its training-time feature scaling.
    pub model: Option<(Arc<ChebyKanModel>, TimeFeature)>,
    /// Worker cap for concurrent cells.
    pub jobs: usize,
}

struct Cell {
    fault_idx: usize,
    mode: SweepMode,
    level: f64,
}

/// Runs every (fault, mode, level) combination: simulate, measure the
/// distributed group and the complementary CPFL group, and record energy use
/// per group. Cells run concurrently up to `jobs`; the table is assembled in
/// deterministic (fault, mode, level) order and per-cell failures are
/// recorded without aborting the sweep.
pub fn penetration_sweep(
    full: &FullNetwork,
    params: &[GeneratorParams],
    spec: &SweepSpec,
) -> Result<SweepTable> {
    let n = params.len();
    // phase networks per fault and the shared pre-fault equilibrium are
    // computed once, outside the cell loop
    let mut phases_per_fault = Vec::with_capacity(spec.faults.len());
    for sc in &spec.faults {
        phases_per_fault.push(PhaseNetworks::build(full, Some(sc))?);
    }
    let equilibrium = match phases_per_fault.first() {
        Some(p) => solve_equilibrium(params, p.pre())?,
        None => return Ok(SweepTable::default()),
    };

    let mut cells = Vec::new();
    for fault_idx in 0..spec.faults.len() {
        for &mode in &spec.modes {
            for &level in &spec.levels {
                cells.push(Cell { fault_idx, mode, level });
            }
        }
    }

    let outcomes: Vec<Mutex<Option<std::result::Result<Vec<SweepRow>, SweepCellError>>>> =
        (0..cells.len()).map(|_| Mutex::new(None)).collect();
    let next = Mutex::new(0usize);
    let jobs = spec.jobs.max(1).min(cells.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let idx = {
                    let mut guard = next.lock().unwrap();
                    let idx = *guard;
                    if idx >= cells.len() {
                        break;
                    }
                    *guard += 1;
                    idx
                };
                let cell = &cells[idx];
                let outcome = run_cell(
                    &phases_per_fault[cell.fault_idx],
                    &spec.faults[cell.fault_idx],
                    params,
                    spec,
                    cell,
                    &equilibrium,
                    n,
                );
                *outcomes[idx].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut table = SweepTable::default();
    for slot in outcomes {
        match slot.into_inner().unwrap().expect("cell not executed") {
            Ok(mut rows) => table.rows.append(&mut rows),
            Err(err) => table.errors.push(err),
        }
    }
    Ok(table)
}

fn run_cell(
    phases: &PhaseNetworks,
    scenario: &FaultScenario,
    params: &[GeneratorParams],
    spec: &SweepSpec,
    cell: &Cell,
    equilibrium: &[f64],
    n: usize,
) -> std::result::Result<Vec<SweepRow>, SweepCellError> {
    let cell_error = |e: Error| SweepCellError {
        fault: scenario.id.clone(),
        mode: cell.mode.label().into(),
        level_pct: cell.level,
        message: e.to_string(),
    };
    let distributed = match cell.mode {
        SweepMode::Dpfl => ControllerMode::Dpfl,
        SweepMode::Flc => {
            let (model, time) = spec
                .model
                .as_ref()
                .ok_or_else(|| cell_error(Error::Config("FLC sweep needs a model".into())))?;
            ControllerMode::Flc {
                model: Arc::clone(model),
                time: *time,
            }
        }
    };
    let assignment =
        assign_controllers(n, distributed, cell.level).map_err(cell_error)?;
    let opts = SimOptions {
        dt: spec.dt,
        t_max: spec.t_max,
        control_start: spec.control_start,
        saturation: spec.saturation,
        initial: Some((equilibrium.to_vec(), vec![0.0; n])),
    };
    let trajectory = simulate_on(phases, params, &assignment, &opts).map_err(cell_error)?;

    let mut rows = Vec::new();
    for group_label in [cell.mode.label(), "cpfl"] {
        if assignment.group(group_label).is_empty() {
            continue;
        }
        let st = group_stability_time(
            &trajectory,
            &assignment,
            group_label,
            &spec.criterion,
            scenario.t_fault,
        )
        .map_err(cell_error)?;
        let energy = energy_metrics(
            &trajectory,
            &assignment.group(group_label),
            spec.base_power_kw,
        )
        .map_err(cell_error)?;
        rows.push(SweepRow {
            fault: scenario.id.clone(),
            mode: cell.mode.label().into(),
            level_pct: assignment.level_pct(),
            group: group_label.into(),
            stab_time_s: st.seconds,
            unstable: st.unstable,
            p_inj: energy.p_inj,
            p_stor: energy.p_stor,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TrajectoryStep;

    fn synthetic_trajectory(omegas: Vec<f64>, dt: f64, pu: Vec<f64>) -> Trajectory {
        let steps = omegas
            .iter()
            .zip(&pu)
            .enumerate()
            .map(|(k, (&w, &p))| TrajectoryStep {
                t: k as f64 * dt,
                delta: vec![0.0],
                omega: vec![w],
                pu: vec![p],
                pa: vec![0.0],
            })
            .collect();
        Trajectory { dt, steps }
    }

    #[test]
    fn stability_zero_when_always_in_band() {
        let traj = synthetic_trajectory(vec![0.0; 100], 0.01, vec![0.0; 100]);
        let c = StabilityCriterion::new(0.01, 60.0).unwrap();
        let st = stability_time(&traj, 0, &c, 0.5).unwrap();
        assert_eq!(st, StabilityTime { seconds: 0.0, unstable: false });
    }

    #[test]
    fn stability_exponential_crossing_near_ln2() {
        // omega(t) = 0.02 exp(-(t - 0.5)) for t >= 0.5: crosses 0.01 at ln 2
        let dt = 1e-3;
        let n = 5001;
        let omegas: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                if t < 0.5 { 0.0 } else { 0.02 * (-(t - 0.5)).exp() }
            })
            .collect();
        let traj = synthetic_trajectory(omegas, dt, vec![0.0; n]);
        let c = StabilityCriterion::new(0.01, 60.0).unwrap();
        let st = stability_time(&traj, 0, &c, 0.5).unwrap();
        assert!(!st.unstable);
        assert!((st.seconds - std::f64::consts::LN_2).abs() <= dt + 1e-12, "got {}", st.seconds);
    }

    #[test]
    fn stability_capped_when_band_violated_at_end() {
        let dt = 0.01;
        let omegas: Vec<f64> = (0..200).map(|k| 0.05 * (k as f64 * 0.3).sin() + 0.02).collect();
        let traj = synthetic_trajectory(omegas, dt, vec![0.0; 200]);
        let c = StabilityCriterion::new(0.01, 60.0).unwrap();
        let st = stability_time(&traj, 0, &c, 0.5).unwrap();
        assert!(st.unstable);
        assert_eq!(st.seconds, 60.0);
    }

    #[test]
    fn stability_ignores_pre_fault_violations() {
        let dt = 0.1;
        let mut omegas = vec![0.0; 50];
        omegas[2] = 1.0; // excursion before the fault at t = 1.0
        let traj = synthetic_trajectory(omegas, dt, vec![0.0; 50]);
        let c = StabilityCriterion::new(0.01, 60.0).unwrap();
        let st = stability_time(&traj, 0, &c, 1.0).unwrap();
        assert_eq!(st.seconds, 0.0);
    }

    #[test]
    fn stability_monotone_in_band_width() {
        let dt = 1e-2;
        let omegas: Vec<f64> = (0..2000)
            .map(|k| 0.2 * (-(k as f64 * dt)).exp() * (k as f64 * 0.7).cos())
            .collect();
        let traj = synthetic_trajectory(omegas, dt, vec![0.0; 2000]);
        let mut last = f64::INFINITY;
        for eps in [0.005, 0.01, 0.02, 0.05, 0.1] {
            let c = StabilityCriterion::new(eps, 60.0).unwrap();
            let st = stability_time(&traj, 0, &c, 0.0).unwrap();
            assert!(st.seconds <= last);
            last = st.seconds;
        }
    }

    #[test]
    fn group_mean_and_singleton() {
        use crate::control::{ControlAssignment, ControllerMode};
        let dt = 1.0;
        // gen 0 settles after 4 s, gen 1 after 6 s (fault at 0)
        let steps: Vec<TrajectoryStep> = (0..11)
            .map(|k| TrajectoryStep {
                t: k as f64 * dt,
                delta: vec![0.0; 2],
                omega: vec![
                    if k < 4 { 1.0 } else { 0.0 },
                    if k < 6 { 1.0 } else { 0.0 },
                ],
                pu: vec![0.0; 2],
                pa: vec![0.0; 2],
            })
            .collect();
        let traj = Trajectory { dt, steps };
        let c = StabilityCriterion::new(0.01, 60.0).unwrap();
        let assignment = ControlAssignment::uniform(2, ControllerMode::Dpfl);
        let st = group_stability_time(&traj, &assignment, "dpfl", &c, 0.0).unwrap();
        assert_eq!(st.seconds, 5.0);
        assert!(group_stability_time(&traj, &assignment, "cpfl", &c, 0.0).is_err());

        let single = stability_time(&traj, 0, &c, 0.0).unwrap();
        assert_eq!(single.seconds, 4.0);
    }

    #[test]
    fn energy_hand_sums_and_decomposition() {
        let traj = synthetic_trajectory(vec![0.0; 3], 1.0, vec![1.0, -2.0, 3.0]);
        let e = energy_metrics(&traj, &[0], 1.0).unwrap();
        assert_eq!(e.p_inj, 4.0);
        assert_eq!(e.p_stor, 2.0);
        // signed total equals the decomposition difference
        let signed: f64 = [1.0, -2.0, 3.0].iter().sum::<f64>() * 1.0;
        assert_eq!(e.p_inj - e.p_stor, signed);

        let zero = energy_metrics(&synthetic_trajectory(vec![0.0; 3], 1.0, vec![0.0; 3]), &[0], 5.0)
            .unwrap();
        assert_eq!(zero.p_inj, 0.0);
        assert_eq!(zero.p_stor, 0.0);

        assert!(matches!(energy_metrics(&traj, &[], 1.0), Err(Error::EmptyGroup)));
    }
}

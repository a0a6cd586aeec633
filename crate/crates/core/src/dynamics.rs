//! Time-domain integration of the controlled swing equation
//!
//! ```text
//! d_i' = w_i
//! M_i w_i' = -D_i w_i + (Pm_i - Pe_i) + Pu_i
//! ```
//!
//! with classical fixed-step RK4. A three-phase fault grounds one bus
//! (deleted before reduction) between `t_fault` and `t_clear`; clearing
//! removes the tripped line. The three phase networks are reduced once and
//! cached. Controller outputs are sampled at the start of every step and held
//! constant across the four RK4 stages (zero-order hold), which mirrors a
//! discrete controller running at the sampling rate.

use crate::control::{cpfl_action, dpfl_action, flc_action, ControlAssignment, ControllerMode};
use crate::error::{Error, Result};
use crate::grid::{
    accelerating_power, electrical_power, kron_reduce, solve_equilibrium, voltages, FullNetwork,
    GeneratorParams, ReducedNetwork,
};

/// Rotor angles and frequency deviations at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub delta: Vec<f64>,
    pub omega: Vec<f64>,
}

impl SystemState {
    pub fn is_finite(&self) -> bool {
        self.delta.iter().all(|v| v.is_finite()) && self.omega.iter().all(|v| v.is_finite())
    }
}

/// One Table-I style contingency: ground `faulted_bus` at `t_fault`, clear at
/// `t_clear` by tripping `tripped_line`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultScenario {
    pub id: String,
    pub faulted_bus: usize,
    pub tripped_line: (usize, usize),
    pub t_fault: f64,
    pub t_clear: f64,
}

impl FaultScenario {
    pub fn validate(&self, full: &FullNetwork) -> Result<()> {
        if !(self.t_fault >= 0.0 && self.t_fault < self.t_clear) {
            return Err(Error::Config(format!(
                "fault {} must satisfy 0 <= t_fault < t_clear",
                self.id
            )));
        }
        if !full.has_line(self.tripped_line.0, self.tripped_line.1) {
            return Err(Error::UnknownLine {
                from: self.tripped_line.0,
                to: self.tripped_line.1,
            });
        }
        if full.gen_buses().contains(&self.faulted_bus) {
            return Err(Error::FaultOnGeneratorInternalNode {
                bus: self.faulted_bus,
            });
        }
        if self.faulted_bus >= full.n_bus() {
            return Err(Error::Config(format!(
                "fault bus {} out of range",
                self.faulted_bus
            )));
        }
        Ok(())
    }
}

/// Pre-fault / fault-on / post-fault reductions, computed once per scenario.
#[derive(Debug, Clone)]
pub struct PhaseNetworks {
    pre: ReducedNetwork,
    fault: Option<FaultPhases>,
}

#[derive(Debug, Clone)]
struct FaultPhases {
    t_fault: f64,
    t_clear: f64,
    during: ReducedNetwork,
    post: ReducedNetwork,
}

impl PhaseNetworks {
    /// Static network with no contingency.
    pub fn fault_free(pre: ReducedNetwork) -> Self {
        Self { pre, fault: None }
    }

    pub fn build(full: &FullNetwork, scenario: Option<&FaultScenario>) -> Result<Self> {
        let pre = kron_reduce(full)?;
        let fault = match scenario {
            None => None,
            Some(sc) => {
                sc.validate(full)?;
                let during = kron_reduce(&full.with_bus_grounded(sc.faulted_bus)?)?;
                let post =
                    kron_reduce(&full.without_line(sc.tripped_line.0, sc.tripped_line.1)?)?;
                Some(FaultPhases {
                    t_fault: sc.t_fault,
                    t_clear: sc.t_clear,
                    during,
                    post,
                })
            }
        };
        Ok(Self { pre, fault })
    }

    pub fn pre(&self) -> &ReducedNetwork {
        &self.pre
    }

    pub fn at(&self, t: f64) -> &ReducedNetwork {
        match &self.fault {
            None => &self.pre,
            Some(f) => {
                if t < f.t_fault {
                    &self.pre
                } else if t < f.t_clear {
                    &f.during
                } else {
                    &f.post
                }
            }
        }
    }
}

/// Reduction in effect at time `t` under the scenario. Thin wrapper over
/// [`PhaseNetworks`]; callers running whole simulations should build the
/// cache once instead.
pub fn network_for_phase(
    scenario: &FaultScenario,
    t: f64,
    full: &FullNetwork,
) -> Result<ReducedNetwork> {
    let phases = PhaseNetworks::build(full, Some(scenario))?;
    Ok(phases.at(t).clone())
}

/// Classical fourth-order Runge-Kutta update of (delta, omega); `t` advances
/// by `dt`. `derivs` must return (delta-rate, omega-rate) for a stage state.
pub fn rk4_step<F>(state: &SystemState, dt: f64, mut derivs: F) -> Result<SystemState>
where
    F: FnMut(&SystemState) -> (Vec<f64>, Vec<f64>),
{
    let n = state.delta.len();
    let stage = |s0: &SystemState, kd: &[f64], kw: &[f64], frac: f64| -> SystemState {
        SystemState {
            t: s0.t + frac * dt,
            delta: (0..n).map(|i| s0.delta[i] + frac * dt * kd[i]).collect(),
            omega: (0..n).map(|i| s0.omega[i] + frac * dt * kw[i]).collect(),
        }
    };

    let (k1d, k1w) = derivs(state);
    let s2 = stage(state, &k1d, &k1w, 0.5);
    let (k2d, k2w) = derivs(&s2);
    let s3 = stage(state, &k2d, &k2w, 0.5);
    let (k3d, k3w) = derivs(&s3);
    let s4 = stage(state, &k3d, &k3w, 1.0);
    let (k4d, k4w) = derivs(&s4);

    let sixth = dt / 6.0;
    let next = SystemState {
        t: state.t + dt,
        delta: (0..n)
            .map(|i| state.delta[i] + sixth * (k1d[i] + 2.0 * k2d[i] + 2.0 * k3d[i] + k4d[i]))
            .collect(),
        omega: (0..n)
            .map(|i| state.omega[i] + sixth * (k1w[i] + 2.0 * k2w[i] + 2.0 * k3w[i] + k4w[i]))
            .collect(),
    };
    if !next.is_finite() {
        return Err(Error::NonFiniteState {
            step: 0,
            time: state.t,
        });
    }
    Ok(next)
}

/// One recorded sample: state plus the control and accelerating power applied
/// over the step that starts here.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub t: f64,
    pub delta: Vec<f64>,
    pub omega: Vec<f64>,
    pub pu: Vec<f64>,
    pub pa: Vec<f64>,
}

/// Uniformly sampled simulation record.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn n_gens(&self) -> usize {
        self.steps.first().map_or(0, |s| s.delta.len())
    }

    /// CSV export with full double precision (shortest round-trip decimals).
    pub fn to_csv(&self) -> String {
        let n = self.n_gens();
        let mut out = String::new();
        out.push('t');
        for field in ["delta", "omega", "pu", "pa"] {
            for i in 1..=n {
                out.push(',');
                out.push_str(&format!("{field}_{i}"));
            }
        }
        out.push('\n');
        for s in &self.steps {
            out.push_str(&format!("{}", s.t));
            for vec in [&s.delta, &s.omega, &s.pu, &s.pa] {
                for v in vec {
                    out.push_str(&format!(",{v}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Simulation controls beyond the scenario itself.
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub dt: f64,
    pub t_max: f64,
    /// Controllers output zero before this time. Zero means always active;
    /// setting it to the clearing time reproduces controllers that engage
    /// once the disturbance is over.
    pub control_start: f64,
    /// Optional symmetric ESS power limit (pu).
    pub saturation: Option<f64>,
    /// Initial (delta, omega); defaults to the pre-fault equilibrium at rest.
    pub initial: Option<(Vec<f64>, Vec<f64>)>,
}

impl SimOptions {
    pub fn new(dt: f64, t_max: f64) -> Self {
        Self {
            dt,
            t_max,
            control_start: 0.0,
            saturation: None,
            initial: None,
        }
    }
}

fn check_aligned(what: &'static str, value: f64, dt: f64) -> Result<()> {
    let k = value / dt;
    if (k - k.round()).abs() > 1e-6 {
        return Err(Error::TimingNotAligned { what, value });
    }
    Ok(())
}

/// Integrates the controlled swing equation and records every step
/// (inclusive of both endpoints: `t_max / dt + 1` rows).
pub fn simulate(
    full: &FullNetwork,
    params: &[GeneratorParams],
    scenario: Option<&FaultScenario>,
    assignment: &ControlAssignment,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let phases = PhaseNetworks::build(full, scenario)?;
    simulate_on(&phases, params, assignment, opts)
}

/// Same as [`simulate`] but reusing an already-built phase cache.
pub fn simulate_on(
    phases: &PhaseNetworks,
    params: &[GeneratorParams],
    assignment: &ControlAssignment,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let n = phases.pre().len();
    if params.len() != n {
        return Err(Error::DimensionMismatch {
            context: "simulate params",
            expected: n,
            got: params.len(),
        });
    }
    if assignment.len() != n {
        return Err(Error::DimensionMismatch {
            context: "simulate assignment",
            expected: n,
            got: assignment.len(),
        });
    }
    for p in params {
        p.validate()?;
    }
    let dt = opts.dt;
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be > 0, got {dt}")));
    }
    check_aligned("t_max", opts.t_max, dt)?;
    if let Some(f) = &phases.fault {
        check_aligned("t_fault", f.t_fault, dt)?;
        check_aligned("t_clear", f.t_clear, dt)?;
    }

    let e = voltages(params);
    let (mut delta, mut omega) = match &opts.initial {
        Some((d, w)) => {
            if d.len() != n || w.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "simulate initial state",
                    expected: n,
                    got: d.len(),
                });
            }
            (d.clone(), w.clone())
        }
        None => (solve_equilibrium(params, phases.pre())?, vec![0.0; n]),
    };

    let n_steps = (opts.t_max / dt).round() as usize;
    let mut steps = Vec::with_capacity(n_steps + 1);

    for step_idx in 0..=n_steps {
        let t = step_idx as f64 * dt;
        let net = phases.at(t);
        let pa = accelerating_power(&delta, params, net)?;
        let active = t >= opts.control_start;
        let mut pu = vec![0.0; n];
        if active {
            for i in 0..n {
                let p = &params[i];
                let raw = match assignment.mode(i) {
                    ControllerMode::None => 0.0,
                    ControllerMode::Dpfl => {
                        dpfl_action(omega[i], delta[i], p.delta_star, p.alpha, p.beta)
                    }
                    ControllerMode::Cpfl => {
                        let pd = dpfl_action(omega[i], delta[i], p.delta_star, p.alpha, p.beta);
                        cpfl_action(pa[i], pd)
                    }
                    ControllerMode::Flc { model, time } => {
                        flc_action(
                            model,
                            omega[i],
                            delta[i] - p.delta_star,
                            t,
                            time,
                            p.alpha,
                            p.beta,
                        )?
                        .0
                    }
                };
                pu[i] = match opts.saturation {
                    Some(s) => raw.clamp(-s, s),
                    None => raw,
                };
            }
        }

        steps.push(TrajectoryStep {
            t,
            delta: delta.clone(),
            omega: omega.clone(),
            pu: pu.clone(),
            pa: pa.clone(),
        });

        if step_idx == n_steps {
            break;
        }

        // phase network and control are both frozen over the step
        let state = SystemState { t, delta, omega };
        let next = rk4_step(&state, dt, |s: &SystemState| {
            let pe = electrical_power(&s.delta, net, &e).expect("dimensions fixed");
            let domega = (0..n)
                .map(|i| {
                    let p = &params[i];
                    (-p.damping * s.omega[i] + (p.mech_power - pe[i]) + pu[i]) / p.inertia
                })
                .collect();
            (s.omega.clone(), domega)
        })
        .map_err(|err| match err {
            Error::NonFiniteState { .. } => Error::NonFiniteState {
                step: step_idx,
                time: t,
            },
            other => other,
        })?;
        delta = next.delta;
        omega = next.omega;
    }

    Ok(Trajectory { dt, steps })
}

//! The three control laws and the penetration-level assignment.
//!
//! Sign convention for the ESS command: Pu < 0 charges (absorbs power from
//! the bus), Pu > 0 discharges (injects).
//!
//! - DPFL uses only local measurements:  `Pd = -(alpha w + beta (d - d*))`
//! - CPFL cancels the true accelerating power: `Pu = -(Pa - Pd)`, which turns
//!   the swing dynamics into the linear system `M x'' = -(D + alpha) x' - beta x`
//! - FLC replaces Pa by a learned estimate from local data:
//!   `Pu = -(Pa_hat - Pd)` with `Pa_hat = f(w, d - d*, t_feature)`

use crate::error::{Error, Result};
use crate::kan::ChebyKanModel;
use std::sync::Arc;

/// Normalization of the controller's time input:
/// `t_feature = clamp((t - t_fault) / t_max, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFeature {
    pub t_fault: f64,
    pub t_max: f64,
}

impl TimeFeature {
    pub fn feature(&self, t: f64) -> f64 {
        ((t - self.t_fault) / self.t_max).clamp(0.0, 1.0)
    }
}

/// Which law drives a generator's ESS.
#[derive(Debug, Clone)]
pub enum ControllerMode {
    /// ESS idle.
    None,
    /// Decentralized feedback on local frequency and phase.
    Dpfl,
    /// Centralized cancellation using the true accelerating power.
    Cpfl,
    /// Learned cancellation; holds an immutable model snapshot.
    Flc {
        model: Arc<ChebyKanModel>,
        time: TimeFeature,
    },
}

impl ControllerMode {
    pub fn label(&self) -> &'static str {
        match self {
            ControllerMode::None => "none",
            ControllerMode::Dpfl => "dpfl",
            ControllerMode::Cpfl => "cpfl",
            ControllerMode::Flc { .. } => "flc",
        }
    }

    pub fn is_distributed(&self) -> bool {
        matches!(self, ControllerMode::Dpfl | ControllerMode::Flc { .. })
    }
}

/// Per-generator controller list with its penetration level.
#[derive(Debug, Clone)]
pub struct ControlAssignment {
    modes: Vec<ControllerMode>,
    level_pct: f64,
}

impl ControlAssignment {
    pub fn uniform(n: usize, mode: ControllerMode) -> Self {
        let level_pct = if mode.is_distributed() { 100.0 } else { 0.0 };
        Self {
            modes: vec![mode; n],
            level_pct,
        }
    }

    pub fn none(n: usize) -> Self {
        Self {
            modes: vec![ControllerMode::None; n],
            level_pct: 0.0,
        }
    }

    pub fn modes(&self) -> &[ControllerMode] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> &ControllerMode {
        &self.modes[i]
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn level_pct(&self) -> f64 {
        self.level_pct
    }

    /// Generator indices whose controller matches the given label.
    pub fn group(&self, label: &str) -> Vec<usize> {
        self.modes
            .iter()
            .enumerate()
            .filter(|(_, m)| m.label() == label)
            .map(|(i, _)| i)
            .collect()
    }
}

/// `Pd = -(alpha w + beta (d - d*))`.
pub fn dpfl_action(omega: f64, delta: f64, delta_star: f64, alpha: f64, beta: f64) -> f64 {
    -(alpha * omega + beta * (delta - delta_star))
}

/// `Pu = -(Pa - Pd)`.
pub fn cpfl_action(pa: f64, pd: f64) -> f64 {
    -(pa - pd)
}

/// Learned variant: `Pu = -(Pa_hat - Pd)`. Returns `(Pu, Pa_hat)` so the
/// estimate can be logged.
pub fn flc_action(
    model: &ChebyKanModel,
    omega: f64,
    delta_err: f64,
    t: f64,
    time: &TimeFeature,
    alpha: f64,
    beta: f64,
) -> Result<(f64, f64)> {
    if model.input_arity() != 3 {
        return Err(Error::ModelArityMismatch {
            expected: 3,
            got: model.input_arity(),
        });
    }
    let pa_hat = model.forward_scalar(&[omega, delta_err, time.feature(t)])?;
    let pd = dpfl_action(omega, delta_err, 0.0, alpha, beta);
    Ok((-(pa_hat - pd), pa_hat))
}

/// How far a requested level may sit from a whole number of generators
/// before it is rejected (covers 33% of 3 meaning one of three).
const LEVEL_TOL: f64 = 0.05;

/// Assigns the first `level_pct * n / 100` generators the distributed mode
/// and the remainder CPFL.
pub fn assign_controllers(
    n: usize,
    distributed: ControllerMode,
    level_pct: f64,
) -> Result<ControlAssignment> {
    if !distributed.is_distributed() {
        return Err(Error::InvalidDistributedMode);
    }
    let exact = level_pct * n as f64 / 100.0;
    let k = exact.round();
    if (exact - k).abs() > LEVEL_TOL || k < 0.0 || k > n as f64 {
        return Err(Error::NonIntegralAssignment { n, level_pct });
    }
    let k = k as usize;
    let mut modes = Vec::with_capacity(n);
    for i in 0..n {
        if i < k {
            modes.push(distributed.clone());
        } else {
            modes.push(ControllerMode::Cpfl);
        }
    }
    Ok(ControlAssignment {
        modes,
        level_pct: k as f64 * 100.0 / n as f64,
    })
}

//! Error type shared by all simulation, training and evaluation code.

use std::fmt;

/// Errors produced by grid modeling, simulation, training and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Vector or matrix dimensions do not agree.
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// The interior (non-generator) block of the admittance matrix cannot be
    /// eliminated: singular or past the configured condition-number limit.
    SingularInterior { condition_estimate: f64 },
    /// A network was declared with no generator buses.
    EmptyGeneratorSet,
    /// Admittance matrix of a full network is not symmetric.
    AsymmetricAdmittance { row: usize, col: usize },
    /// Generator bus indices are out of range or repeated.
    InvalidGeneratorBuses,
    /// A referenced line does not exist in the network.
    UnknownLine { from: usize, to: usize },
    /// Fault bus coincides with a generator internal node; grounding it would
    /// delete the generator itself.
    FaultOnGeneratorInternalNode { bus: usize },
    /// Newton iteration failed to reach the residual tolerance.
    NoConvergence {
        iterations: usize,
        residual: f64,
    },
    /// Integration produced NaN or infinity.
    NonFiniteState { step: usize, time: f64 },
    /// Fault / clearing / horizon times are not multiples of the step size,
    /// or are ordered inconsistently.
    TimingNotAligned { what: &'static str, value: f64 },
    /// A neural model was queried with the wrong input arity.
    ModelArityMismatch { expected: usize, got: usize },
    /// Requested penetration level does not map to a whole number of
    /// generators.
    NonIntegralAssignment { n: usize, level_pct: f64 },
    /// The distributed side of an assignment must be FLC or DPFL.
    InvalidDistributedMode,
    /// Training was asked to run on an empty batch or shard.
    EmptyBatch,
    /// Training loss became non-finite.
    DivergedLoss { round: Option<usize>, epoch: usize },
    /// Client models do not share one architecture.
    ArchitectureMismatch { client: usize },
    /// FedAvg over zero clients.
    EmptyClientSet,
    /// Flat parameter vector length does not match the architecture.
    LengthMismatch { expected: usize, got: usize },
    /// A metric was requested on an empty trajectory.
    EmptyTrajectory,
    /// A group metric was requested for an empty generator group.
    EmptyGroup,
    /// Checkpoint or message payload failed to decode.
    Codec(String),
    /// Invalid run configuration.
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                context,
                expected,
                got,
            } => write!(f, "dimension mismatch in {context}: expected {expected}, got {got}"),
            Error::SingularInterior { condition_estimate } => write!(
                f,
                "interior admittance block is singular or ill-conditioned (cond estimate {condition_estimate:.3e})"
            ),
            Error::EmptyGeneratorSet => write!(f, "network has no generator buses"),
            Error::AsymmetricAdmittance { row, col } => {
                write!(f, "admittance matrix is not symmetric at ({row}, {col})")
            }
            Error::InvalidGeneratorBuses => {
                write!(f, "generator bus indices must be distinct and in range")
            }
            Error::UnknownLine { from, to } => {
                write!(f, "line {from}-{to} does not exist in the network")
            }
            Error::FaultOnGeneratorInternalNode { bus } => {
                write!(f, "fault bus {bus} is a generator internal node")
            }
            Error::NoConvergence { iterations, residual } => write!(
                f,
                "equilibrium solve did not converge after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::NonFiniteState { step, time } => {
                write!(f, "non-finite state at step {step} (t = {time} s)")
            }
            Error::TimingNotAligned { what, value } => {
                write!(f, "{what} = {value} is not aligned to the step size")
            }
            Error::ModelArityMismatch { expected, got } => {
                write!(f, "model expects {expected} inputs, got {got}")
            }
            Error::NonIntegralAssignment { n, level_pct } => write!(
                f,
                "penetration level {level_pct}% of {n} generators is not a whole number of units"
            ),
            Error::InvalidDistributedMode => {
                write!(f, "distributed controller mode must be FLC or DPFL")
            }
            Error::EmptyBatch => write!(f, "empty training batch"),
            Error::DivergedLoss { round, epoch } => match round {
                Some(r) => write!(f, "training loss diverged (round {r}, epoch {epoch})"),
                None => write!(f, "training loss diverged (epoch {epoch})"),
            },
            Error::ArchitectureMismatch { client } => {
                write!(f, "client {client} model architecture differs from client 0")
            }
            Error::EmptyClientSet => write!(f, "cannot aggregate zero client models"),
            Error::LengthMismatch { expected, got } => {
                write!(f, "parameter vector length {got} does not match architecture ({expected})")
            }
            Error::EmptyTrajectory => write!(f, "empty trajectory"),
            Error::EmptyGroup => write!(f, "empty generator group"),
            Error::Codec(msg) => write!(f, "codec error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

//! Bundled desk-scale test system: three generators behind reactive branches,
//! a lossy meshed 3-bus transmission triangle, constant-impedance loads, and
//! three bus-fault scenarios. Mechanical powers are manufactured so the
//! chosen (dyadic) angles are an exact pre-fault equilibrium, which makes
//! every regression on this case self-contained.

use crate::dynamics::FaultScenario;
use crate::grid::{kron_reduce, manufacture_equilibrium, FullNetwork, GeneratorParams, Line, Shunt};
use crate::linalg::Complex;

/// Exact pre-fault equilibrium angles (dyadic so uniform-shift tests can be
/// asserted bit-for-bit). The last generator is the angle reference.
pub const DESK3_DELTA0: [f64; 3] = [0.25, 0.25, 0.0];

pub const DESK3_VOLTAGE: [f64; 3] = [1.04, 1.04, 1.04];
pub const DESK3_INERTIA: [f64; 3] = [5.0, 5.0, 5.0];
pub const DESK3_DAMPING: [f64; 3] = [0.006, 0.006, 0.006];

/// Paper-fixed controller gains.
pub const DESK3_ALPHA: f64 = 0.5;
pub const DESK3_BETA: f64 = 0.05;

/// A complete ready-to-simulate system.
#[derive(Debug, Clone)]
pub struct DeskCase {
    pub full: FullNetwork,
    pub params: Vec<GeneratorParams>,
    pub faults: Vec<FaultScenario>,
    pub delta0: Vec<f64>,
}

impl DeskCase {
    pub fn fault(&self, id: &str) -> Option<&FaultScenario> {
        self.faults.iter().find(|f| f.id == id)
    }
}

/// Buses 0-2 are generator internal nodes, 3-5 their terminal buses and 6 a
/// central hub. Strong spokes carry the bulk power; the terminal-to-terminal
/// ties are weak, so tripping one perturbs the equilibrium only mildly while
/// the bolted bus fault itself still hits hard.
pub fn desk3() -> DeskCase {
    let lines = vec![
        // generator branches (transient reactance, purely reactive)
        Line { from: 0, to: 3, y: Complex::new(0.0, -4.5) },
        Line { from: 1, to: 4, y: Complex::new(0.0, -4.5) },
        Line { from: 2, to: 5, y: Complex::new(0.0, -4.5) },
        // strong spokes to the hub
        Line { from: 3, to: 6, y: Complex::new(0.45, -4.5) },
        Line { from: 4, to: 6, y: Complex::new(0.45, -4.5) },
        Line { from: 5, to: 6, y: Complex::new(0.45, -4.5) },
        // weak terminal-to-terminal ties (the tripped elements)
        Line { from: 3, to: 4, y: Complex::new(0.05, -0.5) },
        Line { from: 4, to: 5, y: Complex::new(0.05, -0.5) },
        Line { from: 3, to: 5, y: Complex::new(0.05, -0.5) },
    ];
    let shunts = vec![
        Shunt { bus: 3, y: Complex::new(0.4, -0.1) },
        Shunt { bus: 4, y: Complex::new(0.45, -0.1) },
        Shunt { bus: 5, y: Complex::new(0.9, -0.15) },
        Shunt { bus: 6, y: Complex::new(0.08, -0.03) },
    ];
    let full = FullNetwork::from_elements(7, vec![0, 1, 2], lines, shunts)
        .expect("desk3 network is well-formed");
    let reduced = kron_reduce(&full).expect("desk3 reduction is well-conditioned");
    let pm = manufacture_equilibrium(&DESK3_DELTA0, &DESK3_VOLTAGE, &reduced)
        .expect("dimensions agree");

    let params = (0..3)
        .map(|i| GeneratorParams {
            inertia: DESK3_INERTIA[i],
            damping: DESK3_DAMPING[i],
            mech_power: pm[i],
            voltage: DESK3_VOLTAGE[i],
            delta_star: DESK3_DELTA0[i],
            alpha: DESK3_ALPHA,
            beta: DESK3_BETA,
        })
        .collect();

    let faults = vec![
        FaultScenario {
            id: "DF1".into(),
            faulted_bus: 6,
            tripped_line: (3, 4),
            t_fault: 0.5,
            t_clear: 0.75,
        },
        FaultScenario {
            id: "DF2".into(),
            faulted_bus: 3,
            tripped_line: (3, 5),
            t_fault: 0.5,
            t_clear: 0.75,
        },
        FaultScenario {
            id: "DF3".into(),
            faulted_bus: 5,
            tripped_line: (3, 5),
            t_fault: 0.5,
            t_clear: 0.75,
        },
    ];

    DeskCase {
        full,
        params,
        faults,
        delta0: DESK3_DELTA0.to_vec(),
    }
}

//! Authoritative description of the run-configuration format, printed by
//! `--print-schema`.

pub const SCHEMA: &str = r#"# gridflc run configuration (TOML). All powers, admittances and voltages are
# per-unit on a common system base; angles are radians; times are seconds.

schema_version = 1            # required, currently 1

[system]                      # exactly ONE of: full network | reduced matrices
buses = 7                     # bus count (full network form)
generator_buses = [1, 2, 3]   # 1-based internal buses, one per generator;
                              # may be omitted when each [[generators]] has `bus`
# manufactured_angles = [0.25, 0.25, 0.0]
                              # optional: choose Pm so these angles are the
                              # exact pre-fault equilibrium

[[system.lines]]              # series branch admittance y = g + jb
from = 1                      # 1-based endpoints
to = 4
g = 0.0
b = -4.5

[[system.shunts]]             # constant-impedance shunt (loads)
bus = 4
g = 0.45
b = -0.1

# [system.reduced]            # alternative: generator-only matrices
# conductance = [[...], ...]  # N x N, symmetric
# susceptance = [[...], ...]

[[generators]]                # one block per generator, order = index
bus = 1                       # required with the full network form
inertia = 5.0                 # M  (pu s^2), > 0
damping = 0.01                # D  (pu), >= 0
voltage = 1.04                # |E| (pu), > 0
pm = 0.7448                   # optional when manufactured_angles is set
delta_star = 0.25             # optional; default: pre-fault equilibrium angle
alpha = 0.5                   # frequency gain (default 0.5)
beta = 0.005                  # phase gain     (default 0.005)

[[faults]]                    # Table-style contingency rows
id = "DF1"
bus = 7                       # 1-based faulted bus (grounded during fault)
trip_from = 4                 # line removed at clearing
trip_to = 5
t_fault = 0.5
t_clear = 0.75

[control]
mode = "cpfl"                 # simulate: none | dpfl | cpfl | flc
level_pct = 100.0             # penetration for dpfl/flc (k = level * N / 100)
# saturation = 0.5            # optional symmetric ESS limit (pu)
# checkpoint = "model.json"   # model for mode = "flc"
sweep_modes = ["flc", "dpfl"] # evaluate: distributed modes to sweep
sweep_levels = [0.0, 33.0, 67.0, 100.0]
sweep_faults = []             # evaluate: fault ids (empty = all)

[training]
dims = [3, 32, 1]             # layer widths
degree = 5                    # Chebyshev degree per layer
optimizer = "adam"            # adam | sgd
learning_rate = 1e-3
lr_decay = 1.0                # per-round multiplier in (0, 1]
batch_size = 1024
epochs_per_round = 1
rounds = 20
master_seed = 42
probe_stride = 10             # every Nth sample held out as the probe set

[simulation]
dt = 0.001                    # integration/sampling step
t_max = 60.0                  # horizon for simulate/evaluate (also the
                              # stability-time cap)
t_max_train = 100.0           # optional horizon for gen-data (default t_max)
control_start = 0.0           # controllers idle before this time
stability_band = 0.01         # |omega| band for stability time

[output]
dir = "runs/out"              # all artifacts are written below this directory
base_mva = 100.0              # scales per-unit energies to kW s in reports
"#;

//! Chebyshev Kolmogorov-Arnold network, written from scratch.
//!
//! Every edge (input node -> output node) of a layer carries a learnable
//! degree-d Chebyshev expansion. Inputs are squashed to (-1, 1) with tanh
//! before the basis is evaluated, so a layer computes
//!
//! ```text
//! z_i = tanh(x_i)
//! y_o = sum_i sum_n C[i][o][n] * T_n(z_i)
//! ```
//!
//! with T_n the first-kind Chebyshev polynomials (T_0 = 1, T_1 = z,
//! T_n = 2 z T_{n-1} - T_{n-2}). The model output is linear in the
//! coefficients, so mean-squared-error training is convex per layer and the
//! exact gradient follows from the chain rule with T_n'(z) = n * U_{n-1}(z).
//!
//! Training is deterministic: shuffling and initialization are driven purely
//! by explicit seeds, and gradient accumulation order is fixed.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};

/// First-kind Chebyshev basis `[T_0(x) .. T_d(x)]` by recurrence.
pub fn chebyshev_basis(x: f64, degree: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(degree + 1);
    t.push(1.0);
    if degree >= 1 {
        t.push(x);
    }
    for n in 2..=degree {
        t.push(2.0 * x * t[n - 1] - t[n - 2]);
    }
    t
}

/// Second-kind basis `[U_0(x) .. U_d(x)]`; `T_n'(x) = n * U_{n-1}(x)`.
pub fn chebyshev_basis_second(x: f64, degree: usize) -> Vec<f64> {
    let mut u = Vec::with_capacity(degree + 1);
    u.push(1.0);
    if degree >= 1 {
        u.push(2.0 * x);
    }
    for n in 2..=degree {
        u.push(2.0 * x * u[n - 1] - u[n - 2]);
    }
    u
}

/// One KAN layer: coefficient tensor of shape (in_dim, out_dim, degree + 1),
/// stored flat in (input, output, degree) order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyKanLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub degree: usize,
    coeffs: Vec<f64>,
}

impl ChebyKanLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, degree: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            degree,
            coeffs: vec![0.0; in_dim * out_dim * (degree + 1)],
        }
    }

    /// Zero-mean uniform init with half-width 1 / (in_dim * (degree + 1)),
    /// which keeps initial outputs O(1).
    pub fn init(in_dim: usize, out_dim: usize, degree: usize, rng: &mut SplitMix64) -> Self {
        let mut layer = Self::zeros(in_dim, out_dim, degree);
        let w = 1.0 / (in_dim as f64 * (degree + 1) as f64);
        for c in layer.coeffs.iter_mut() {
            *c = rng.uniform(-w, w);
        }
        layer
    }

    #[inline]
    fn idx(&self, input: usize, output: usize, n: usize) -> usize {
        (input * self.out_dim + output) * (self.degree + 1) + n
    }

    pub fn coeff(&self, input: usize, output: usize, n: usize) -> f64 {
        self.coeffs[self.idx(input, output, n)]
    }

    pub fn coeff_mut(&mut self, input: usize, output: usize, n: usize) -> &mut f64 {
        let i = self.idx(input, output, n);
        &mut self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn param_count(&self) -> usize {
        self.coeffs.len()
    }

    /// Forward pass: tanh squashing, basis evaluation, edge-wise weighted sum.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim {
            return Err(Error::DimensionMismatch {
                context: "layer_forward",
                expected: self.in_dim,
                got: input.len(),
            });
        }
        let mut out = vec![0.0; self.out_dim];
        for (i, &x) in input.iter().enumerate() {
            let t = chebyshev_basis(x.tanh(), self.degree);
            for o in 0..self.out_dim {
                let base = self.idx(i, o, 0);
                let mut acc = 0.0;
                for (n, tn) in t.iter().enumerate() {
                    acc += self.coeffs[base + n] * tn;
                }
                out[o] += acc;
            }
        }
        Ok(out)
    }
}

/// Stacked KAN layers; adjacent dimensions must chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyKanModel {
    layers: Vec<ChebyKanLayer>,
}

/// Layer widths plus per-layer polynomial degree, e.g. dims [3, 32, 1] with
/// degree 5 is the two-layer controller architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub dims: Vec<usize>,
    pub degrees: Vec<usize>,
}

impl Architecture {
    pub fn uniform_degree(dims: Vec<usize>, degree: usize) -> Self {
        let degrees = vec![degree; dims.len().saturating_sub(1)];
        Self { dims, degrees }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 || self.degrees.len() != self.dims.len() - 1 {
            return Err(Error::Config(format!(
                "architecture needs >= 2 dims and one degree per layer (dims {:?}, degrees {:?})",
                self.dims, self.degrees
            )));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("zero-width layer".into()));
        }
        Ok(())
    }
}

impl ChebyKanModel {
    pub fn zeros(arch: &Architecture) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .dims
            .windows(2)
            .zip(&arch.degrees)
            .map(|(w, &d)| ChebyKanLayer::zeros(w[0], w[1], d))
            .collect();
        Ok(Self { layers })
    }

    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = SplitMix64::new(seed);
        let layers = arch
            .dims
            .windows(2)
            .zip(&arch.degrees)
            .map(|(w, &d)| ChebyKanLayer::init(w[0], w[1], d, &mut rng))
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<ChebyKanLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("model needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::DimensionMismatch {
                    context: "layer chaining",
                    expected: pair[0].out_dim,
                    got: pair[1].in_dim,
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[ChebyKanLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ChebyKanLayer] {
        &mut self.layers
    }

    pub fn architecture(&self) -> Architecture {
        let mut dims = vec![self.layers[0].in_dim];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        Architecture {
            dims,
            degrees: self.layers.iter().map(|l| l.degree).collect(),
        }
    }

    pub fn input_arity(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_arity(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cur = input.to_vec();
        for layer in &self.layers {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    /// Scalar convenience for the controller path.
    pub fn forward_scalar(&self, input: &[f64]) -> Result<f64> {
        let out = self.forward(input)?;
        if out.len() != 1 {
            return Err(Error::DimensionMismatch {
                context: "forward_scalar output",
                expected: 1,
                got: out.len(),
            });
        }
        Ok(out[0])
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Deterministic operation count per forward pass. Convention: one op per
    /// multiply and one per add/subtract; each basis value T_2..T_d costs 3
    /// (recurrence), and every edge summation costs 2 * in * out * (d + 1).
    /// The paper's two-layer architecture counts 1956 under this convention.
    pub fn flop_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                let recurrence = if l.degree >= 2 { l.in_dim * (l.degree - 1) * 3 } else { 0 };
                let sums = 2 * l.in_dim * l.out_dim * (l.degree + 1);
                recurrence + sums
            })
            .sum()
    }

    pub fn same_architecture(&self, other: &ChebyKanModel) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| {
                    a.in_dim == b.in_dim && a.out_dim == b.out_dim && a.degree == b.degree
                })
    }
}

/// A supervised sample: local measurements to accelerating-power target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub input: Vec<f64>,
    pub target: f64,
}

/// Mean squared error of the scalar model output over a batch.
pub fn loss_mse(model: &ChebyKanModel, batch: &[TrainingSample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut acc = 0.0;
    for sample in batch {
        let y = model.forward_scalar(&sample.input)?;
        let r = y - sample.target;
        acc += r * r;
    }
    Ok(acc / batch.len() as f64)
}

/// Gradient of [`loss_mse`] with respect to every coefficient; same shapes as
/// the model's layers.
pub fn backward(model: &ChebyKanModel, batch: &[TrainingSample]) -> Result<Vec<Vec<f64>>> {
    let mut grads: Vec<Vec<f64>> = model
        .layers
        .iter()
        .map(|l| vec![0.0; l.param_count()])
        .collect();
    backward_into(model, batch, &mut Workspace::default(), &mut grads)?;
    Ok(grads)
}

/// Per-layer scratch buffers so the training loop runs allocation-free.
#[derive(Debug, Default)]
struct Workspace {
    squashed: Vec<Vec<f64>>,
    bases: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    activations: Vec<Vec<f64>>,
    grad_out: Vec<f64>,
    grad_in: Vec<f64>,
}

impl Workspace {
    fn prepare(&mut self, model: &ChebyKanModel) {
        let n_layers = model.layers.len();
        self.squashed.resize(n_layers, Vec::new());
        self.bases.resize(n_layers, Vec::new());
        self.second.resize(n_layers, Vec::new());
        self.activations.resize(n_layers + 1, Vec::new());
        for (li, layer) in model.layers.iter().enumerate() {
            let d1 = layer.degree + 1;
            self.squashed[li].resize(layer.in_dim, 0.0);
            self.bases[li].resize(layer.in_dim * d1, 0.0);
            self.second[li].resize(layer.degree.max(1), 0.0);
            self.activations[li].resize(layer.in_dim, 0.0);
        }
        let out = model.output_arity();
        self.activations[n_layers].resize(out, 0.0);
        let widest = model
            .layers
            .iter()
            .map(|l| l.in_dim.max(l.out_dim))
            .max()
            .unwrap_or(1);
        self.grad_out.resize(widest, 0.0);
        self.grad_in.resize(widest, 0.0);
    }
}

fn backward_into(
    model: &ChebyKanModel,
    batch: &[TrainingSample],
    ws: &mut Workspace,
    grads: &mut [Vec<f64>],
) -> Result<f64> {
    let idx: Vec<usize> = (0..batch.len()).collect();
    backward_over(model, batch, &idx, ws, grads)
}

/// Accumulates the batch gradient over `shard[idx]` without copying samples.
fn backward_over(
    model: &ChebyKanModel,
    shard: &[TrainingSample],
    idx: &[usize],
    ws: &mut Workspace,
    grads: &mut [Vec<f64>],
) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if model.output_arity() != 1 {
        return Err(Error::DimensionMismatch {
            context: "backward output arity",
            expected: 1,
            got: model.output_arity(),
        });
    }
    ws.prepare(model);
    for g in grads.iter_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let inv_batch = 1.0 / idx.len() as f64;
    let n_layers = model.layers.len();
    let mut loss = 0.0;

    for &sample_idx in idx {
        let sample = &shard[sample_idx];
        if sample.input.len() != model.input_arity() {
            return Err(Error::DimensionMismatch {
                context: "backward input",
                expected: model.input_arity(),
                got: sample.input.len(),
            });
        }
        // forward pass, caching tanh values and basis rows per layer
        ws.activations[0].copy_from_slice(&sample.input);
        for (li, layer) in model.layers.iter().enumerate() {
            let d1 = layer.degree + 1;
            let (head, tail) = ws.activations.split_at_mut(li + 1);
            let cur = &head[li];
            let out = &mut tail[0];
            out.iter_mut().for_each(|v| *v = 0.0);
            for (i, &x) in cur.iter().enumerate() {
                let zi = x.tanh();
                ws.squashed[li][i] = zi;
                let t = &mut ws.bases[li][i * d1..(i + 1) * d1];
                t[0] = 1.0;
                if d1 > 1 {
                    t[1] = zi;
                }
                for np in 2..d1 {
                    t[np] = 2.0 * zi * t[np - 1] - t[np - 2];
                }
                for o in 0..layer.out_dim {
                    let base = layer.idx(i, o, 0);
                    let mut acc = 0.0;
                    for n in 0..d1 {
                        acc += layer.coeffs[base + n] * t[n];
                    }
                    out[o] += acc;
                }
            }
        }

        // d(mse)/d(prediction)
        let residual = ws.activations[n_layers][0] - sample.target;
        loss += residual * residual;
        ws.grad_out[0] = 2.0 * residual * inv_batch;

        // backward through layers
        for (li, layer) in model.layers.iter().enumerate().rev() {
            let d1 = layer.degree + 1;
            for v in ws.grad_in[..layer.in_dim].iter_mut() {
                *v = 0.0;
            }
            for i in 0..layer.in_dim {
                let zi = ws.squashed[li][i];
                // second-kind recurrence for dT_n/dz = n U_{n-1}(z)
                let u = &mut ws.second[li];
                u[0] = 1.0;
                if layer.degree >= 2 {
                    u[1] = 2.0 * zi;
                }
                for np in 2..layer.degree {
                    u[np] = 2.0 * zi * u[np - 1] - u[np - 2];
                }
                let dsquash = 1.0 - zi * zi;
                let t_row = &ws.bases[li][i * d1..(i + 1) * d1];
                for o in 0..layer.out_dim {
                    let g = ws.grad_out[o];
                    if g == 0.0 {
                        continue;
                    }
                    let base = layer.idx(i, o, 0);
                    let gslice = &mut grads[li][base..base + d1];
                    let mut dxd = 0.0;
                    for n in 0..d1 {
                        gslice[n] += g * t_row[n];
                        if n >= 1 {
                            dxd += layer.coeffs[base + n] * (n as f64) * u[n - 1];
                        }
                    }
                    ws.grad_in[i] += g * dxd * dsquash;
                }
            }
            let take = layer.in_dim;
            let (gi, go) = (&mut ws.grad_in, &mut ws.grad_out);
            go[..take].copy_from_slice(&gi[..take]);
        }
    }
    Ok(loss * inv_batch)
}

/// First-order optimizer selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// Local training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 1024,
            epochs: 1,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Mini-batch training on one shard. Shuffling is driven solely by the seed;
/// the same seed gives a bit-identical result model.
pub fn train_local(
    model: &ChebyKanModel,
    shard: &[TrainingSample],
    hyper: &TrainHyper,
) -> Result<(ChebyKanModel, f64)> {
    if shard.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut model = model.clone();
    let mut rng = SplitMix64::new(hyper.seed);
    let batch = hyper.batch_size.max(1);

    let mut adam_m: Vec<Vec<f64>> = model.layers.iter().map(|l| vec![0.0; l.param_count()]).collect();
    let mut adam_v = adam_m.clone();
    let mut grads = adam_m.clone();
    let mut ws = Workspace::default();
    let mut step_count = 0usize;

    let mut order: Vec<usize> = (0..shard.len()).collect();

    for epoch in 0..hyper.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(batch) {
            backward_over(&model, shard, chunk, &mut ws, &mut grads)?;
            step_count += 1;
            match hyper.optimizer {
                Optimizer::Sgd => {
                    for (layer, g) in model.layers.iter_mut().zip(&grads) {
                        for (c, gi) in layer.coeffs_mut().iter_mut().zip(g) {
                            *c -= hyper.learning_rate * gi;
                        }
                    }
                }
                Optimizer::Adam => {
                    let b1t = 1.0 - ADAM_BETA1.powi(step_count as i32);
                    let b2t = 1.0 - ADAM_BETA2.powi(step_count as i32);
                    for (li, (layer, g)) in model.layers.iter_mut().zip(&grads).enumerate() {
                        let m = &mut adam_m[li];
                        let v = &mut adam_v[li];
                        for (k, (c, &gi)) in layer.coeffs_mut().iter_mut().zip(g).enumerate() {
                            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * gi;
                            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * gi * gi;
                            let m_hat = m[k] / b1t;
                            let v_hat = v[k] / b2t;
                            *c -= hyper.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
                        }
                    }
                }
            }
            if model
                .layers
                .iter()
                .any(|l| l.coeffs().iter().any(|c| !c.is_finite()))
            {
                return Err(Error::DivergedLoss { round: None, epoch });
            }
        }
    }
    let final_loss = loss_mse(&model, shard)?;
    if !final_loss.is_finite() {
        return Err(Error::DivergedLoss { round: None, epoch: hyper.epochs });
    }
    Ok((model, final_loss))
}

/// The learned univariate function on one edge, tabulated for plotting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeFunction {
    pub layer: usize,
    pub input: usize,
    pub output: usize,
    pub coefficients: Vec<f64>,
    /// Values of the edge polynomial at [`EdgeReport::z_grid`].
    pub values: Vec<f64>,
}

/// Interpretability export: every edge's polynomial and its curve over
/// z in [-1, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeReport {
    pub z_grid: Vec<f64>,
    pub edges: Vec<EdgeFunction>,
}

pub const EDGE_GRID_POINTS: usize = 129;

/// Tabulates every edge function over 129 uniform points of [-1, 1].
pub fn export_edges(model: &ChebyKanModel) -> EdgeReport {
    let z_grid: Vec<f64> = (0..EDGE_GRID_POINTS)
        .map(|j| -1.0 + 2.0 * j as f64 / (EDGE_GRID_POINTS - 1) as f64)
        .collect();
    let mut edges = Vec::new();
    for (li, layer) in model.layers.iter().enumerate() {
        for i in 0..layer.in_dim {
            for o in 0..layer.out_dim {
                let coefficients: Vec<f64> =
                    (0..=layer.degree).map(|n| layer.coeff(i, o, n)).collect();
                let values = z_grid
                    .iter()
                    .map(|&z| {
                        chebyshev_basis(z, layer.degree)
                            .iter()
                            .zip(&coefficients)
                            .map(|(t, c)| t * c)
                            .sum()
                    })
                    .collect();
                edges.push(EdgeFunction {
                    layer: li,
                    input: i,
                    output: o,
                    coefficients,
                    values,
                });
            }
        }
    }
    EdgeReport { z_grid, edges }
}

/// Versioned on-disk model format. Coefficients are nested in
/// (layer, input, output, degree) order and round-trip losslessly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub dims: Vec<usize>,
    pub degrees: Vec<usize>,
    pub coefficients: Vec<Vec<Vec<Vec<f64>>>>,
    pub metadata: CheckpointMeta,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub rounds: usize,
    pub final_loss: f64,
    /// Fault onset used by the deployed time feature (seconds).
    #[serde(default)]
    pub t_fault: f64,
    /// Horizon that normalizes the deployed time feature (seconds).
    #[serde(default)]
    pub t_max_train: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

impl Checkpoint {
    pub fn from_model(model: &ChebyKanModel, metadata: CheckpointMeta) -> Self {
        let arch = model.architecture();
        let coefficients = model
            .layers
            .iter()
            .map(|l| {
                (0..l.in_dim)
                    .map(|i| {
                        (0..l.out_dim)
                            .map(|o| (0..=l.degree).map(|n| l.coeff(i, o, n)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            dims: arch.dims,
            degrees: arch.degrees,
            coefficients,
            metadata,
        }
    }

    pub fn to_model(&self) -> Result<ChebyKanModel> {
        if self.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Codec(format!(
                "unsupported checkpoint schema_version {}",
                self.schema_version
            )));
        }
        let arch = Architecture {
            dims: self.dims.clone(),
            degrees: self.degrees.clone(),
        };
        let mut model = ChebyKanModel::zeros(&arch)?;
        if self.coefficients.len() != model.layers.len() {
            return Err(Error::Codec("coefficient layer count mismatch".into()));
        }
        for (layer, lc) in model.layers.iter_mut().zip(&self.coefficients) {
            if lc.len() != layer.in_dim {
                return Err(Error::Codec("coefficient input dim mismatch".into()));
            }
            for (i, ic) in lc.iter().enumerate() {
                if ic.len() != layer.out_dim {
                    return Err(Error::Codec("coefficient output dim mismatch".into()));
                }
                for (o, oc) in ic.iter().enumerate() {
                    if oc.len() != layer.degree + 1 {
                        return Err(Error::Codec("coefficient degree mismatch".into()));
                    }
                    for (n, &c) in oc.iter().enumerate() {
                        *layer.coeff_mut(i, o, n) = c;
                    }
                }
            }
        }
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Codec(e.to_string()))
    }
}

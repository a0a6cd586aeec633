//! Federated orchestration of the local controllers: synchronous rounds with
//! a full barrier, unweighted FedAvg aggregation, broadcast.
//!
//! Clients are independent tasks owning a model copy and a data shard; the
//! server is the only aggregation point. Every exchange crosses the
//! [`serialize_params`] boundary, so the in-process transport exercises the
//! same wire contract as the optional loopback socket transport in
//! [`transport`]. Results are schedule-independent: aggregation always runs
//! in ascending client order and per-client seeds are derived from
//! `(master_seed, client, round)`.

use crate::error::{Error, Result};
use crate::kan::{loss_mse, train_local, Architecture, ChebyKanModel, TrainHyper, TrainingSample};
use crate::rng::derive_seed;
use std::time::Instant;

/// Aggregation strategy tag. Only FedAvg is implemented; the tag keeps the
/// config format explicit about what ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    FedAvg,
}

/// Round-loop configuration.
#[derive(Debug, Clone)]
pub struct FederatedConfig {
    pub rounds: usize,
    pub clients: usize,
    pub hyper: TrainHyper,
    /// Per-round learning-rate multiplier: round r trains at
    /// `lr * lr_decay^r`. 1.0 keeps the rate constant. Decaying the local
    /// rate shrinks client drift late in training, pulling the average from
    /// the mean of per-client optima toward the joint optimum.
    pub lr_decay: f64,
    pub aggregation: Aggregation,
    pub master_seed: u64,
    pub architecture: Architecture,
}

impl FederatedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be >= 1".into()));
        }
        if self.clients < 1 {
            return Err(Error::EmptyClientSet);
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!(
                "lr_decay must be in (0, 1], got {}",
                self.lr_decay
            )));
        }
        self.architecture.validate()
    }

    pub fn round_learning_rate(&self, round: usize) -> f64 {
        self.hyper.learning_rate * self.lr_decay.powi(round as i32)
    }
}

/// Observability record for one round.
#[derive(Debug, Clone)]
pub struct RoundReport {
    pub round: usize,
    pub client_losses: Vec<f64>,
    /// Global-model loss on the held-out probe set (NaN when no probe given).
    pub probe_loss: f64,
    pub wall_clock: std::time::Duration,
}

/// Coefficient-wise mean in ascending client order: `theta_G = (1/N) sum theta_i`.
pub fn fedavg_aggregate(models: &[ChebyKanModel]) -> Result<ChebyKanModel> {
    let first = models.first().ok_or(Error::EmptyClientSet)?;
    for (idx, m) in models.iter().enumerate().skip(1) {
        if !first.same_architecture(m) {
            return Err(Error::ArchitectureMismatch { client: idx });
        }
    }
    // mean computed as first + mean(x - first): averaging N identical models
    // then returns the input bit-for-bit
    let inv = 1.0 / models.len() as f64;
    let mut out = first.clone();
    for (li, layer) in out.layers_mut().iter_mut().enumerate() {
        for (k, c) in layer.coeffs_mut().iter_mut().enumerate() {
            let base = *c;
            let mut acc = 0.0;
            for m in models {
                acc += m.layers()[li].coeffs()[k] - base;
            }
            *c = base + acc * inv;
        }
    }
    Ok(out)
}

/// Canonical (layer, input, output, degree) flattening of the coefficients.
pub fn serialize_params(model: &ChebyKanModel) -> Vec<f64> {
    let mut out = Vec::with_capacity(model.param_count());
    for layer in model.layers() {
        out.extend_from_slice(layer.coeffs());
    }
    out
}

/// Inverse of [`serialize_params`] for a known architecture.
pub fn deserialize_params(params: &[f64], arch: &Architecture) -> Result<ChebyKanModel> {
    let mut model = ChebyKanModel::zeros(arch)?;
    let expected = model.param_count();
    if params.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            got: params.len(),
        });
    }
    let mut offset = 0;
    for layer in model.layers_mut() {
        let len = layer.param_count();
        layer
            .coeffs_mut()
            .copy_from_slice(&params[offset..offset + len]);
        offset += len;
    }
    Ok(model)
}

/// Initial global model derived from the master seed.
pub fn initial_global_model(cfg: &FederatedConfig) -> Result<ChebyKanModel> {
    ChebyKanModel::init(&cfg.architecture, cfg.master_seed)
}

/// Runs the synchronous round loop: every client trains from the current
/// global model on its own shard, the server averages, broadcasts, repeats.
/// A diverging client fails the whole round. The result depends only on
/// `(cfg, shards, probe)`, never on thread scheduling.
pub fn run_federated_training(
    cfg: &FederatedConfig,
    shards: &[Vec<TrainingSample>],
    probe: &[TrainingSample],
) -> Result<(ChebyKanModel, Vec<RoundReport>)> {
    run_federated_training_observed(cfg, shards, probe, |_, _| {})
}

/// Same loop with a per-round hook on the freshly aggregated global model
/// (checkpointing, logging).
pub fn run_federated_training_observed(
    cfg: &FederatedConfig,
    shards: &[Vec<TrainingSample>],
    probe: &[TrainingSample],
    mut on_round: impl FnMut(usize, &ChebyKanModel),
) -> Result<(ChebyKanModel, Vec<RoundReport>)> {
    cfg.validate()?;
    if shards.len() != cfg.clients {
        return Err(Error::DimensionMismatch {
            context: "client shards",
            expected: cfg.clients,
            got: shards.len(),
        });
    }
    if shards.iter().any(|s| s.is_empty()) {
        return Err(Error::EmptyBatch);
    }

    let mut global = initial_global_model(cfg)?;
    let mut reports = Vec::with_capacity(cfg.rounds);

    for round in 0..cfg.rounds {
        let started = Instant::now();
        let global_wire = serialize_params(&global);

        // clients run concurrently; each owns its model copy and shard
        let results: Vec<Result<(Vec<f64>, f64)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = shards
                .iter()
                .enumerate()
                .map(|(client, shard)| {
                    let wire = &global_wire;
                    let arch = &cfg.architecture;
                    let hyper = TrainHyper {
                        seed: derive_seed(cfg.master_seed, client, round),
                        learning_rate: cfg.round_learning_rate(round),
                        ..cfg.hyper.clone()
                    };
                    scope.spawn(move || -> Result<(Vec<f64>, f64)> {
                        let local = deserialize_params(wire, arch)?;
                        let (trained, loss) = train_local(&local, shard, &hyper)
                            .map_err(|e| match e {
                                Error::DivergedLoss { epoch, .. } => Error::DivergedLoss {
                                    round: Some(round),
                                    epoch,
                                },
                                other => other,
                            })?;
                        Ok((serialize_params(&trained), loss))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("client task panicked"))
                .collect()
        });

        let mut client_models = Vec::with_capacity(cfg.clients);
        let mut client_losses = Vec::with_capacity(cfg.clients);
        for result in results {
            let (wire, loss) = result?;
            client_models.push(deserialize_params(&wire, &cfg.architecture)?);
            client_losses.push(loss);
        }

        global = match cfg.aggregation {
            Aggregation::FedAvg => fedavg_aggregate(&client_models)?,
        };

        let probe_loss = if probe.is_empty() {
            f64::NAN
        } else {
            loss_mse(&global, probe)?
        };
        on_round(round, &global);
        reports.push(RoundReport {
            round,
            client_losses,
            probe_loss,
            wall_clock: started.elapsed(),
        });
    }
    Ok((global, reports))
}

pub mod transport {
    //! Loopback wire format: each frame is a 4-byte little-endian length
    //! followed by a versioned JSON message.

    use crate::error::{Error, Result};
    use serde::{Deserialize, Serialize};
    use std::io::{Read, Write};

    pub const WIRE_VERSION: u32 = 1;

    /// Parameter exchange message.
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct Message {
        pub v: u32,
        #[serde(rename = "type")]
        pub kind: MessageKind,
        pub round: usize,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        pub client_id: Option<usize>,
        pub params: Vec<f64>,
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
    #[serde(rename_all = "lowercase")]
    pub enum MessageKind {
        /// Client-to-server local parameters.
        Params,
        /// Server-to-client global broadcast.
        Global,
    }

    impl Message {
        pub fn params(round: usize, client_id: usize, params: Vec<f64>) -> Self {
            Self {
                v: WIRE_VERSION,
                kind: MessageKind::Params,
                round,
                client_id: Some(client_id),
                params,
            }
        }

        pub fn global(round: usize, params: Vec<f64>) -> Self {
            Self {
                v: WIRE_VERSION,
                kind: MessageKind::Global,
                round,
                client_id: None,
                params,
            }
        }
    }

    pub fn write_message<W: Write>(writer: &mut W, msg: &Message) -> Result<()> {
        let body = serde_json::to_vec(msg).map_err(|e| Error::Codec(e.to_string()))?;
        let len = u32::try_from(body.len()).map_err(|_| Error::Codec("frame too large".into()))?;
        writer
            .write_all(&len.to_le_bytes())
            .and_then(|_| writer.write_all(&body))
            .map_err(|e| Error::Codec(e.to_string()))
    }

    pub fn read_message<R: Read>(reader: &mut R) -> Result<Message> {
        let mut len_buf = [0u8; 4];
        reader
            .read_exact(&mut len_buf)
            .map_err(|e| Error::Codec(e.to_string()))?;
        let len = u32::from_le_bytes(len_buf) as usize;
        let mut body = vec![0u8; len];
        reader
            .read_exact(&mut body)
            .map_err(|e| Error::Codec(e.to_string()))?;
        let msg: Message =
            serde_json::from_slice(&body).map_err(|e| Error::Codec(e.to_string()))?;
        if msg.v != WIRE_VERSION {
            return Err(Error::Codec(format!("unsupported wire version {}", msg.v)));
        }
        Ok(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn arch() -> Architecture {
        Architecture::uniform_degree(vec![3, 4, 1], 3)
    }

    fn random_shard(seed: u64, len: usize) -> Vec<TrainingSample> {
        let mut rng = SplitMix64::new(seed);
        (0..len)
            .map(|_| TrainingSample {
                input: vec![
                    rng.uniform(-0.5, 0.5),
                    rng.uniform(-1.0, 1.0),
                    rng.uniform(0.0, 1.0),
                ],
                target: rng.uniform(-0.5, 0.5),
            })
            .collect()
    }

    #[test]
    fn fedavg_of_identical_models_is_identity() {
        let m = ChebyKanModel::init(&arch(), 9).unwrap();
        let avg = fedavg_aggregate(&[m.clone(), m.clone(), m.clone()]).unwrap();
        assert_eq!(avg, m);
    }

    #[test]
    fn fedavg_two_model_hand_mean() {
        let a = deserialize_params(&[1.0, 2.0], &Architecture::uniform_degree(vec![1, 1], 1))
            .unwrap();
        let b = deserialize_params(&[3.0, 4.0], &Architecture::uniform_degree(vec![1, 1], 1))
            .unwrap();
        let avg = fedavg_aggregate(&[a, b]).unwrap();
        assert_eq!(serialize_params(&avg), vec![2.0, 3.0]);
    }

    #[test]
    fn fedavg_matches_flatten_average_oracle() {
        let models: Vec<ChebyKanModel> = (0..5)
            .map(|i| ChebyKanModel::init(&arch(), 100 + i).unwrap())
            .collect();
        let avg = fedavg_aggregate(&models).unwrap();
        let flats: Vec<Vec<f64>> = models.iter().map(serialize_params).collect();
        let oracle: Vec<f64> = (0..flats[0].len())
            .map(|k| flats.iter().map(|f| f[k]).sum::<f64>() / flats.len() as f64)
            .collect();
        for (got, want) in serialize_params(&avg).iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn fedavg_rejects_empty_and_mismatched() {
        assert!(matches!(fedavg_aggregate(&[]), Err(Error::EmptyClientSet)));
        let a = ChebyKanModel::zeros(&arch()).unwrap();
        let b = ChebyKanModel::zeros(&Architecture::uniform_degree(vec![3, 5, 1], 3)).unwrap();
        assert!(matches!(
            fedavg_aggregate(&[a, b]),
            Err(Error::ArchitectureMismatch { client: 1 })
        ));
    }

    #[test]
    fn params_round_trip_bit_exact() {
        let m = ChebyKanModel::init(&arch(), 55).unwrap();
        let flat = serialize_params(&m);
        let back = deserialize_params(&flat, &arch()).unwrap();
        assert_eq!(m, back);
        assert!(matches!(
            deserialize_params(&flat[..flat.len() - 1], &arch()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn paper_architecture_flattens_to_768() {
        let m = ChebyKanModel::zeros(&Architecture::uniform_degree(vec![3, 32, 1], 5)).unwrap();
        assert_eq!(serialize_params(&m).len(), 768);
    }

    #[test]
    fn flattening_order_matches_edge_indexing() {
        // set a marker through the (layer, input, output, degree) indexing and
        // find it at the computed flat offset
        let mut m = ChebyKanModel::zeros(&arch()).unwrap();
        let (li, i, o, n) = (1, 2, 0, 3);
        *m.layers_mut()[li].coeff_mut(i, o, n) = 42.0;
        let layer0_len = m.layers()[0].param_count();
        let l1 = &m.layers()[li];
        let flat_idx = layer0_len + (i * l1.out_dim + o) * (l1.degree + 1) + n;
        assert_eq!(serialize_params(&m)[flat_idx], 42.0);

        let report = crate::kan::export_edges(&m);
        let hit = report
            .edges
            .iter()
            .find(|e| e.layer == li && e.input == i && e.output == o)
            .unwrap();
        assert_eq!(hit.coefficients[n], 42.0);
    }

    fn small_cfg(clients: usize, rounds: usize) -> FederatedConfig {
        FederatedConfig {
            rounds,
            clients,
            hyper: TrainHyper {
                batch_size: 32,
                epochs: 1,
                ..Default::default()
            },
            lr_decay: 1.0,
            aggregation: Aggregation::FedAvg,
            master_seed: 4242,
            architecture: arch(),
        }
    }

    #[test]
    fn single_client_equals_local_training() {
        let cfg = small_cfg(1, 1);
        let shard = random_shard(1, 200);
        let (global, reports) =
            run_federated_training(&cfg, std::slice::from_ref(&shard), &[]).unwrap();
        let init = initial_global_model(&cfg).unwrap();
        let hyper = TrainHyper {
            seed: derive_seed(cfg.master_seed, 0, 0),
            ..cfg.hyper.clone()
        };
        let (local, loss) = train_local(&init, &shard, &hyper).unwrap();
        assert_eq!(global, local);
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].client_losses[0].to_bits(), loss.to_bits());
    }

    #[test]
    fn zero_learning_rate_keeps_initial_model() {
        let mut cfg = small_cfg(3, 4);
        cfg.hyper.learning_rate = 0.0;
        let shards: Vec<_> = (0..3).map(|i| random_shard(i as u64, 64)).collect();
        let (global, _) = run_federated_training(&cfg, &shards, &[]).unwrap();
        assert_eq!(global, initial_global_model(&cfg).unwrap());
    }

    #[test]
    fn identical_shards_make_global_equal_to_clients() {
        // two clients with the same data and the same derived seed produce
        // identical updates, and averaging identical models is the identity;
        // force equal seeds by running each round comparison manually
        let cfg = small_cfg(2, 1);
        let shard = random_shard(33, 128);
        let shards = vec![shard.clone(), shard.clone()];
        let (global, _) = run_federated_training(&cfg, &shards, &[]).unwrap();

        let init = initial_global_model(&cfg).unwrap();
        let h0 = TrainHyper { seed: derive_seed(cfg.master_seed, 0, 0), ..cfg.hyper.clone() };
        let h1 = TrainHyper { seed: derive_seed(cfg.master_seed, 1, 0), ..cfg.hyper.clone() };
        let (m0, _) = train_local(&init, &shard, &h0).unwrap();
        let (m1, _) = train_local(&init, &shard, &h1).unwrap();
        let avg = fedavg_aggregate(&[m0, m1]).unwrap();
        assert_eq!(global, avg);
    }

    #[test]
    fn federated_training_is_reproducible() {
        let cfg = small_cfg(3, 3);
        let shards: Vec<_> = (0..3).map(|i| random_shard(10 + i as u64, 96)).collect();
        let probe = random_shard(99, 40);
        let (a, ra) = run_federated_training(&cfg, &shards, &probe).unwrap();
        let (b, rb) = run_federated_training(&cfg, &shards, &probe).unwrap();
        assert_eq!(a, b);
        for (x, y) in ra.iter().zip(&rb) {
            assert_eq!(x.probe_loss.to_bits(), y.probe_loss.to_bits());
            assert_eq!(x.client_losses, y.client_losses);
        }
    }

    #[test]
    fn rejects_empty_shard_and_zero_rounds() {
        let cfg = small_cfg(2, 0);
        let shards = vec![random_shard(1, 10), random_shard(2, 10)];
        assert!(run_federated_training(&cfg, &shards, &[]).is_err());

        let cfg = small_cfg(2, 1);
        let shards = vec![random_shard(1, 10), vec![]];
        assert!(matches!(
            run_federated_training(&cfg, &shards, &[]),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn wire_messages_round_trip() {
        use transport::*;
        let msg = Message::params(3, 1, vec![0.5, -1.25, 3.0]);
        let mut buf = Vec::new();
        write_message(&mut buf, &msg).unwrap();
        assert_eq!(&buf[..4], &(buf.len() as u32 - 4).to_le_bytes());
        let back = read_message(&mut buf.as_slice()).unwrap();
        assert_eq!(msg, back);

        let global = Message::global(3, vec![1.0]);
        let mut buf = Vec::new();
        write_message(&mut buf, &global).unwrap();
        let text = std::str::from_utf8(&buf[4..]).unwrap();
        assert!(text.contains("\"type\":\"global\""));
        assert!(!text.contains("client_id"));
    }
}

//! The simulated device: circuits on a qubit coupled to a classical
//! environment, exact or shot-sampled readout, and the survival experiment.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::noise::{ContextModel, LowFreqModel};
use crate::ptm::{DualVec, StateVec, TransferMatrix};

/// Seeded generator for an independent stream; used so results do not depend
/// on evaluation order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Action of one gate: system map `blocks[λ]` for environment value λ, then the
/// environment moves according to the column-stochastic `transition`.
#[derive(Debug, Clone)]
pub struct GateAction {
    blocks: Vec<Matrix4<f64>>,
    transition: DMatrix<f64>,
    identity_transition: bool,
}

impl GateAction {
    pub fn new(blocks: Vec<Matrix4<f64>>, transition: DMatrix<f64>) -> Result<Self> {
        let m = blocks.len();
        if transition.shape() != (m, m) {
            return Err(Error::DimensionMismatch { expected: m, found: transition.nrows() });
        }
        let identity_transition = transition == DMatrix::identity(m, m);
        Ok(Self { blocks, transition, identity_transition })
    }

    fn apply(&self, v: &mut [Vector4<f64>]) {
        if self.identity_transition {
            for (b, x) in self.blocks.iter().zip(v.iter_mut()) {
                *x = b * *x;
            }
            return;
        }
        let images: Vec<Vector4<f64>> = self.blocks.iter().zip(v.iter()).map(|(b, x)| b * x).collect();
        for (dst, out) in v.iter_mut().enumerate() {
            *out = Vector4::zeros();
            for (src, img) in images.iter().enumerate() {
                let t = self.transition[(dst, src)];
                if t != 0.0 {
                    *out += img * t;
                }
            }
        }
    }

    /// Transfer matrix in full coordinates `λ·4 + σ`.
    pub fn full_transfer(&self) -> TransferMatrix {
        let m = self.blocks.len();
        let mut out = DMatrix::zeros(4 * m, 4 * m);
        for src in 0..m {
            for dst in 0..m {
                let t = self.transition[(dst, src)];
                if t != 0.0 {
                    out.view_mut((4 * dst, 4 * src), (4, 4)).copy_from(&(self.blocks[src] * t));
                }
            }
        }
        TransferMatrix(out)
    }
}

fn to_matrix4(t: &TransferMatrix) -> Result<Matrix4<f64>> {
    if t.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: t.dim() });
    }
    Ok(Matrix4::from_fn(|i, j| t.0[(i, j)]))
}

/// The "actual" device: initial state `|0⟩⟨0|⊗ρ_E`, readout `|0⟩⟨0|⊗1_E`, and
/// one [`GateAction`] per gate label.
#[derive(Debug, Clone)]
pub struct Device {
    weights: Vec<f64>,
    gates: BTreeMap<Gate, GateAction>,
}

impl Device {
    pub fn new(weights: Vec<f64>, gates: BTreeMap<Gate, GateAction>) -> Result<Self> {
        let m = weights.len();
        if let Some(a) = gates.values().find(|a| a.blocks.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, found: a.blocks.len() });
        }
        Ok(Self { weights, gates })
    }

    pub fn from_low_freq(model: &LowFreqModel) -> Result<Self> {
        model.validate()?;
        let mut gates = BTreeMap::new();
        for &g in &model.gates {
            let blocks = model.per_gate(g)?.iter().map(to_matrix4).collect::<Result<Vec<_>>>()?;
            gates.insert(g, GateAction::new(blocks, model.transition_for(g)?.clone())?);
        }
        Self::new(model.weights(), gates)
    }

    pub fn from_context(model: &ContextModel) -> Result<Self> {
        let m = model.env_dim();
        let mut gates = BTreeMap::new();
        for &chi in &model.gate_labels {
            let dst = model.env_index(chi)?;
            let blocks = model
                .gate_labels
                .iter()
                .map(|&lambda| {
                    model.per_pair.get(&(chi, lambda)).ok_or_else(|| Error::UnknownGate(format!("{chi}{lambda}"))).and_then(to_matrix4)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut t = DMatrix::zeros(m, m);
            t.row_mut(dst).fill(1.0);
            gates.insert(chi, GateAction::new(blocks, t)?);
        }
        Self::new(model.initial.clone(), gates)
    }

    pub fn env_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gate_labels(&self) -> Vec<Gate> {
        self.gates.keys().copied().collect()
    }

    fn action(&self, g: Gate) -> Result<&GateAction> {
        self.gates.get(&g).ok_or_else(|| Error::UnknownGate(g.to_string()))
    }

    pub fn full_transfer(&self, g: Gate) -> Result<TransferMatrix> {
        Ok(self.action(g)?.full_transfer())
    }

    /// `|ρ_in⟩⟩` in full coordinates.
    pub fn initial_state(&self) -> StateVec {
        let mut v = DVector::zeros(4 * self.env_dim());
        for (l, p) in self.weights.iter().enumerate() {
            v[4 * l] = *p;
            v[4 * l + 3] = *p;
        }
        StateVec(v)
    }

    /// `⟨⟨Q_out|` in full coordinates.
    pub fn readout(&self) -> DualVec {
        let mut v = DVector::zeros(4 * self.env_dim());
        for l in 0..self.env_dim() {
            v[4 * l] = 0.5;
            v[4 * l + 3] = 0.5;
        }
        DualVec(v)
    }

    fn evolve(&self, circuit: &Circuit) -> Result<Vec<Vector4<f64>>> {
        let mut v: Vec<Vector4<f64>> = self.weights.iter().map(|&p| Vector4::new(p, 0.0, 0.0, p)).collect();
        for &g in &circuit.gates {
            self.action(g)?.apply(&mut v);
        }
        Ok(v)
    }

    /// `O_N ⋯ O_1 |ρ_in⟩⟩` in full coordinates.
    pub fn propagate_state(&self, circuit: &Circuit) -> Result<StateVec> {
        let v = self.evolve(circuit)?;
        Ok(StateVec(DVector::from_iterator(4 * v.len(), v.iter().flat_map(|x| x.iter().copied()))))
    }

    /// `⟨⟨Q_out| O_{GN} ⋯ O_{G1}` for measurement gates `(G1, …, GN)` applied
    /// in that order before readout.
    pub fn propagate_dual(&self, measurement: &Circuit) -> Result<DualVec> {
        let mut q = self.readout().0.transpose();
        for &g in measurement.gates.iter().rev() {
            q *= &self.full_transfer(g)?.0;
        }
        Ok(DualVec(q.transpose()))
    }

    /// Noise-free expectation of `|0⟩⟨0|` after the circuit.
    pub fn exact_mean(&self, circuit: &Circuit) -> Result<f64> {
        let v = self.evolve(circuit)?;
        let mean: f64 = v.iter().map(|x| 0.5 * (x[0] + x[3])).sum();
        if !(-1e-9..=1.0 + 1e-9).contains(&mean) {
            return Err(Error::MeanOutOfRange { mean });
        }
        Ok(mean)
    }
}

/// Readout mode: exact means or a finite number of shots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shots {
    #[default]
    Exact,
    Sampled(u64),
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Exact => write!(f, "exact"),
            Shots::Sampled(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => s.serialize_str("exact"),
            Shots::Sampled(n) => s.serialize_u64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(0) => Err(serde::de::Error::custom("shot count must be positive")),
            Raw::Count(n) => Ok(Shots::Sampled(n)),
            Raw::Word(w) if w == "exact" => Ok(Shots::Exact),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("expected \"exact\" or a shot count, got {w:?}"))),
        }
    }
}

/// One measured circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub circuit: Circuit,
    pub mean: f64,
    pub variance: f64,
    pub shots: Shots,
}

/// Runs one circuit. Sampled mode draws `Binomial(shots, C)`; the variance
/// estimate uses the add-one smoothed frequency `(k+1)/(n+2)` so it stays
/// positive when all shots agree.
pub fn run_circuit<R: Rng + ?Sized>(device: &Device, circuit: &Circuit, shots: Shots, rng: &mut R) -> Result<MeasurementRecord> {
    let exact = device.exact_mean(circuit)?;
    match shots {
        Shots::Exact => Ok(MeasurementRecord { circuit: circuit.clone(), mean: exact, variance: 0.0, shots }),
        Shots::Sampled(n) => {
            let dist = Binomial::new(n, exact.clamp(0.0, 1.0)).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let k = dist.sample(rng);
            let smoothed = (k as f64 + 1.0) / (n as f64 + 2.0);
            Ok(MeasurementRecord {
                circuit: circuit.clone(),
                mean: k as f64 / n as f64,
                variance: smoothed * (1.0 - smoothed) / n as f64,
                shots,
            })
        }
    }
}

/// Default cap on rejection-sampling attempts per accepted circuit.
pub const DEFAULT_ATTEMPTS_PER_CIRCUIT: usize = 1000;

/// Uniformly random H/S circuits of length `n_gates` whose ideal action maps
/// |0⟩ to |0⟩ up to a phase.
pub fn random_identity_sequences(n_gates: usize, count: usize, seed: u64) -> Result<Vec<Circuit>> {
    random_identity_sequences_capped(n_gates, count, seed, DEFAULT_ATTEMPTS_PER_CIRCUIT * count.max(1))
}

pub fn random_identity_sequences_capped(n_gates: usize, count: usize, seed: u64, max_attempts: usize) -> Result<Vec<Circuit>> {
    let mut rng = stream_rng(seed, n_gates as u64);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        if attempts >= max_attempts {
            return Err(Error::RejectionCap { attempts, accepted: out.len(), rate: out.len() as f64 / attempts as f64 });
        }
        attempts += 1;
        let c = Circuit::new((0..n_gates).map(|_| if rng.random::<bool>() { Gate::H } else { Gate::S }).collect());
        if c.ideally_preserves_zero() {
            out.push(c);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub n_gates: usize,
    pub mean: f64,
    pub stderr: f64,
    pub circuits: usize,
    pub shots: Shots,
    pub seed: u64,
}

/// Average survival over random identity circuits for each gate count.
/// Evaluated in parallel; every circuit draws from its own seeded stream.
pub fn survival_curve(
    device: &Device,
    n_gates_list: &[usize],
    circuits_per_point: usize,
    shots: Shots,
    seed: u64,
) -> Result<Vec<SurvivalPoint>> {
    if n_gates_list.is_empty() || circuits_per_point == 0 {
        return Err(Error::InvalidParameter("survival grid and circuit count must be nonempty".into()));
    }
    n_gates_list
        .par_iter()
        .map(|&n| {
            let circuits = random_identity_sequences(n, circuits_per_point, seed)?;
            let means = circuits
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    let mut rng = stream_rng(seed, (1 << 40) + ((n as u64) << 20) + j as u64);
                    run_circuit(device, c, shots, &mut rng).map(|r| r.mean)
                })
                .collect::<Result<Vec<_>>>()?;
            let (mean, stderr) = mean_and_stderr(&means);
            Ok(SurvivalPoint { n_gates: n, mean, stderr, circuits: means.len(), shots, seed })
        })
        .collect()
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `F(N) = (1 + 1/√(1 + 2Nσ²))/2`, the survival for full-strength noise.
pub fn analytic_survival(n_gates: usize, sigma: f64) -> f64 {
    0.5 * (1.0 + 1.0 / (1.0 + 2.0 * n_gates as f64 * sigma * sigma).sqrt())
}

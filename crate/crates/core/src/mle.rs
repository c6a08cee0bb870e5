//! Maximum-likelihood tomography with the block-diagonal depolarizing model
//! `ρ̄_in = Σ p(λ)|0⟩⟨0|⊗|λ⟩⟨λ|`, `Ō(G) = Σ E(ε_G(λ))[G]⊗[|λ⟩⟨λ|]`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::device::{run_circuit, stream_rng, Device, MeasurementRecord, Shots};
use crate::error::{Error, Result};
use crate::exact_lot::{ErrorModel, Matrix};
use crate::noise::noisy_gate_transfer;
use crate::optim;
use crate::ptm::{DualVec, StateVec, StationaryBasis, TransferMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateRates {
    pub h: f64,
    pub s: f64,
}

impl GateRates {
    pub fn get(&self, g: Gate) -> f64 {
        match g {
            Gate::H => self.h,
            Gate::S => self.s,
        }
    }
}

/// Weights `p(λ)` and depolarizing rates `ε_G(λ)` per environment point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamModel {
    pub weights: Vec<f64>,
    pub rates: Vec<GateRates>,
}

impl ParamModel {
    pub fn new(weights: Vec<f64>, rates: Vec<GateRates>) -> Result<Self> {
        let m = Self { weights, rates };
        m.validate()?;
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.rates.len() {
            return Err(Error::InvalidParameter("weights and rates must be nonempty and equally long".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("weights {:?} are not a probability vector", self.weights)));
        }
        if self.rates.iter().any(|r| !(0.0..=1.0).contains(&r.h) || !(0.0..=1.0).contains(&r.s)) {
            return Err(Error::InvalidParameter("rates must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Points sorted by ascending `ε_H`.
    pub fn canonical(&self) -> Self {
        let mut idx: Vec<usize> = (0..self.size()).collect();
        idx.sort_by(|&a, &b| self.rates[a].h.total_cmp(&self.rates[b].h).then(a.cmp(&b)));
        Self { weights: idx.iter().map(|&i| self.weights[i]).collect(), rates: idx.iter().map(|&i| self.rates[i]).collect() }
    }

    /// Unconstrained coordinates: `L − 1` weight logits relative to the first
    /// point, then logits of `ε_H(λ)`, then of `ε_S(λ)`.
    pub fn to_vector(&self) -> Vec<f64> {
        let logit = |e: f64| {
            let e = e.clamp(1e-300, 1.0 - 1e-16);
            (e / (1.0 - e)).ln()
        };
        let w0 = self.weights[0].max(1e-300);
        let mut v: Vec<f64> = self.weights[1..].iter().map(|&p| (p.max(1e-300) / w0).ln()).collect();
        v.extend(self.rates.iter().map(|r| logit(r.h)));
        v.extend(self.rates.iter().map(|r| logit(r.s)));
        v
    }

    pub fn from_vector(v: &[f64], size: usize) -> Result<Self> {
        if v.len() != 3 * size - 1 {
            return Err(Error::DimensionMismatch { expected: 3 * size - 1, found: v.len() });
        }
        let mut logits = vec![0.0];
        logits.extend_from_slice(&v[..size - 1]);
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|a| (a - top).exp()).collect();
        let z: f64 = exps.iter().sum();
        let logistic = |u: f64| 1.0 / (1.0 + (-u).exp());
        let rates = (0..size).map(|i| GateRates { h: logistic(v[size - 1 + i]), s: logistic(v[2 * size - 1 + i]) }).collect();
        Ok(Self { weights: exps.iter().map(|e| e / z).collect(), rates })
    }
}

/// Block-diagonal evaluation `Σ_λ p(λ) ⟨⟨(I+Z)/2| Π_j E(ε_{G_j}(λ))[G_j] |0⟩⟩`.
pub fn model_predict(model: &ParamModel, circuit: &Circuit) -> Result<f64> {
    model.validate()?;
    let mut total = 0.0;
    for (p, r) in model.weights.iter().zip(&model.rates) {
        let mats: BTreeMap<Gate, TransferMatrix> =
            Gate::ALL.iter().map(|&g| Ok((g, noisy_gate_transfer(g, r.get(g))?))).collect::<Result<_>>()?;
        let mut v = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
        for g in &circuit.gates {
            v = &mats[g].0 * v;
        }
        total += p * 0.5 * (v[0] + v[3]);
    }
    Ok(total)
}

/// Sufficient statistic of a circuit under isotropic depolarizing noise:
/// gate counts and the ideal `⟨⟨Z|U|Z⟩⟩ ∈ {−1, 0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CircuitClass {
    pub n_h: usize,
    pub n_s: usize,
    pub z: i8,
}

impl CircuitClass {
    pub fn of(circuit: &Circuit) -> Self {
        let u = circuit.ideal_unitary();
        let z = u[(0, 0)].norm_sqr() - u[(1, 0)].norm_sqr();
        Self { n_h: circuit.count(Gate::H), n_s: circuit.count(Gate::S), z: z.round() as i8 }
    }

    fn predict(&self, model: &ParamModel) -> f64 {
        model
            .weights
            .iter()
            .zip(&model.rates)
            .map(|(p, r)| {
                let decay = (1.0 - r.h).powi(self.n_h as i32) * (1.0 - r.s).powi(self.n_s as i32);
                p * 0.5 * (1.0 + f64::from(self.z) * decay)
            })
            .sum()
    }
}

fn weight_of(record: &MeasurementRecord, index: usize, sigma_floor: f64) -> Result<f64> {
    let var = record.variance.max(sigma_floor * sigma_floor);
    if !(var > 0.0) {
        return Err(Error::ZeroVariance { index });
    }
    Ok(1.0 / var)
}

/// `Σ_m (C̄_m − C_m)² / σ_m²` with `σ_m ≥ sigma_floor`.
pub fn negative_log_likelihood(model: &ParamModel, records: &[MeasurementRecord], sigma_floor: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no records".into()));
    }
    let mut total = 0.0;
    for (i, r) in records.iter().enumerate() {
        let w = weight_of(r, i, sigma_floor)?;
        total += w * (model_predict(model, &r.circuit)? - r.mean).powi(2);
    }
    Ok(total)
}

/// Records grouped by [`CircuitClass`]: `Σ_m w_m (C̄ − C_m)²` becomes
/// `Σ_g W_g (C̄_g − mean_g)² + scatter`.
#[derive(Debug, Clone)]
pub struct CompressedRecords {
    classes: Vec<CircuitClass>,
    weight: Vec<f64>,
    mean: Vec<f64>,
    scatter: f64,
}

impl CompressedRecords {
    pub fn new(records: &[MeasurementRecord], sigma_floor: f64) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidParameter("no records".into()));
        }
        let mut groups: BTreeMap<CircuitClass, Vec<(f64, f64)>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            let w = weight_of(r, i, sigma_floor)?;
            groups.entry(CircuitClass::of(&r.circuit)).or_default().push((w, r.mean));
        }
        let mut out = Self { classes: Vec::new(), weight: Vec::new(), mean: Vec::new(), scatter: 0.0 };
        for (class, items) in groups {
            let w: f64 = items.iter().map(|x| x.0).sum();
            let mean = items.iter().map(|x| x.0 * x.1).sum::<f64>() / w;
            out.scatter += items.iter().map(|x| x.0 * (x.1 - mean).powi(2)).sum::<f64>();
            out.classes.push(class);
            out.weight.push(w);
            out.mean.push(mean);
        }
        Ok(out)
    }

    pub fn groups(&self) -> usize {
        self.classes.len()
    }

    pub fn objective(&self, model: &ParamModel) -> f64 {
        self.scatter
            + self.classes.iter().zip(self.weight.iter().zip(&self.mean)).map(|(c, (w, m))| w * (c.predict(model) - m).powi(2)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub starts: usize,
    pub sigma_floor: f64,
    pub max_iters: u64,
    /// Extra simplex restarts from the incumbent after the multi-start phase.
    pub polish_rounds: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { starts: 16, sigma_floor: 1e-3, max_iters: 4000, polish_rounds: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub index: usize,
    pub nll: f64,
    pub iterations: u64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ParamModel,
    pub nll: f64,
    pub converged: bool,
    pub starts: Vec<StartSummary>,
    pub polish_iterations: u64,
    pub error_model: ErrorModel,
}

/// Multi-start simplex minimization of the negative log-likelihood. Starts
/// run in parallel; the winner is chosen by `(nll, start index)`.
pub fn fit(records: &[MeasurementRecord], size: usize, config: &FitConfig, seed: u64) -> Result<FitResult> {
    if size == 0 || config.starts == 0 {
        return Err(Error::InvalidParameter("fit needs at least one point and one start".into()));
    }
    let data = CompressedRecords::new(records, config.sigma_floor)?;
    let objective = |v: &[f64]| match ParamModel::from_vector(v, size) {
        Ok(m) => data.objective(&m),
        Err(_) => f64::INFINITY,
    };
    let starts: Vec<Vec<f64>> = (0..config.starts)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let weights: Vec<f64> = (0..size).map(|_| rng.random_range(0.5..1.5)).collect();
            let z: f64 = weights.iter().sum();
            let rate = |rng: &mut rand_chacha::ChaCha8Rng| 10f64.powf(rng.random_range(-4.0..-1.0));
            let rates = (0..size).map(|_| GateRates { h: rate(&mut rng), s: rate(&mut rng) }).collect();
            ParamModel { weights: weights.iter().map(|w| w / z).collect(), rates }.to_vector()
        })
        .collect();
    let outcomes =
        starts.par_iter().map(|x0| optim::nelder_mead(&objective, x0, 0.5, config.max_iters, 1e-15)).collect::<Result<Vec<_>>>()?;
    let summaries: Vec<StartSummary> = outcomes
        .iter()
        .enumerate()
        .map(|(index, o)| StartSummary { index, nll: o.value, iterations: o.iterations, converged: o.converged })
        .collect();
    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .map(|(_, o)| o.clone())
        .expect("at least one start");
    let mut incumbent = best;
    let mut polish_iterations = 0;
    for round in 0..config.polish_rounds {
        let step = 0.1 / (1 << round) as f64;
        let o = optim::nelder_mead(&objective, &incumbent.x, step, config.max_iters, 1e-15)?;
        polish_iterations += o.iterations;
        if o.value <= incumbent.value {
            incumbent = o;
        }
    }
    let params = ParamModel::from_vector(&incumbent.x, size)?.canonical();
    let converged = incumbent.value.is_finite() && summaries.iter().any(|s| s.converged);
    Ok(FitResult {
        nll: data.objective(&params),
        error_model: induced_error_model(&params)?,
        params,
        converged,
        starts: summaries,
        polish_iterations,
    })
}

/// The parametric model as a reduced `(3L+1)`-dimensional error model in the
/// stationary basis of its environment weights.
pub fn induced_error_model(model: &ParamModel) -> Result<ErrorModel> {
    model.validate()?;
    let basis = StationaryBasis::new(model.weights.clone())?;
    let l = model.size();
    let mut state = DVector::zeros(4 * l);
    let mut dual = DVector::zeros(4 * l);
    for (i, p) in model.weights.iter().enumerate() {
        state[4 * i] = *p;
        state[4 * i + 3] = *p;
        dual[4 * i] = 0.5;
        dual[4 * i + 3] = 0.5;
    }
    let mut gates = BTreeMap::new();
    for g in Gate::ALL {
        let mut full = DMatrix::zeros(4 * l, 4 * l);
        for (i, r) in model.rates.iter().enumerate() {
            full.view_mut((4 * i, 4 * i), (4, 4)).copy_from(&noisy_gate_transfer(g, r.get(g))?.0);
        }
        gates.insert(g, Matrix(basis.reduce_transfer(&TransferMatrix(full))?.0));
    }
    Ok(ErrorModel { state: basis.reduce_state(&StateVec(state)).0, dual: basis.reduce_dual(&DualVec(dual)).0, gates, gauge: None })
}

/// Circuits `prep_i ++ middle ++ meas_k` for middle ∈ {(), (H), (S)}.
pub fn tomography_circuits(prep: &[Circuit], meas: &[Circuit]) -> Vec<Circuit> {
    let middles: [&[Gate]; 3] = [&[], &[Gate::H], &[Gate::S]];
    let mut out = Vec::with_capacity(prep.len() * meas.len() * 3);
    for p in prep {
        for m in meas {
            for mid in middles {
                out.push(p.with_measurement(mid, m));
            }
        }
    }
    out
}

/// Runs every circuit with its own random stream.
pub fn collect_records(device: &Device, circuits: &[Circuit], shots: Shots, seed: u64) -> Result<Vec<MeasurementRecord>> {
    circuits.par_iter().enumerate().map(|(i, c)| run_circuit(device, c, shots, &mut stream_rng(seed, i as u64))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordResidual {
    pub circuit: Circuit,
    pub mean: f64,
    pub predicted: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub size: usize,
    pub params: ParamModel,
    pub nll: f64,
    pub converged: bool,
    pub starts: Vec<StartSummary>,
    pub polish_iterations: u64,
    pub records: usize,
    pub groups: usize,
    pub rms_residual: f64,
    pub residuals: Vec<RecordResidual>,
}

pub fn fit_report(result: &FitResult, records: &[MeasurementRecord], sigma_floor: f64) -> Result<FitReport> {
    let residuals: Vec<RecordResidual> = records
        .iter()
        .map(|r| {
            let predicted = CircuitClass::of(&r.circuit).predict(&result.params);
            RecordResidual { circuit: r.circuit.clone(), mean: r.mean, predicted, residual: predicted - r.mean }
        })
        .collect();
    let rms = (residuals.iter().map(|r| r.residual.powi(2)).sum::<f64>() / residuals.len().max(1) as f64).sqrt();
    Ok(FitReport {
        size: result.params.size(),
        params: result.params.clone(),
        nll: result.nll,
        converged: result.converged,
        starts: result.starts.clone(),
        polish_iterations: result.polish_iterations,
        records: records.len(),
        groups: CompressedRecords::new(records, sigma_floor)?.groups(),
        rms_residual: rms,
        residuals,
    })
}

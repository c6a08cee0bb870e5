//! Exact linear operator tomography: fiducials, data collection, the
//! factorization identity, and gauge-fixed reconstruction.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::device::{run_circuit, stream_rng, Device, Shots};
use crate::error::{Error, Result};
use crate::linalg::{self, serde_rows, serde_vec};

/// Default condition-number ceiling for matrices that get inverted.
pub const DEFAULT_CONDITION_BOUND: f64 = 1e12;

/// State-preparation and measurement sequences. Both lists start with the
/// empty sequence, so `ρ_1 = ρ_in` and `Q_1 = Q_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiducialSet {
    pub prep_sequences: Vec<Circuit>,
    pub meas_sequences: Vec<Circuit>,
}

impl FiducialSet {
    pub fn new(prep_sequences: Vec<Circuit>, meas_sequences: Vec<Circuit>) -> Result<Self> {
        if prep_sequences.len() != meas_sequences.len() {
            return Err(Error::DimensionMismatch { expected: prep_sequences.len(), found: meas_sequences.len() });
        }
        if prep_sequences.first().is_none_or(|c| !c.is_empty()) || meas_sequences.first().is_none_or(|c| !c.is_empty()) {
            return Err(Error::InvalidParameter("fiducial lists must start with the empty sequence".into()));
        }
        Ok(Self { prep_sequences, meas_sequences })
    }

    pub fn d(&self) -> usize {
        self.prep_sequences.len()
    }

    /// Circuit measuring `⟨⟨Q_k| middle |ρ_i⟩⟩`.
    pub fn cell(&self, k: usize, i: usize, middle: &[Gate]) -> Circuit {
        self.prep_sequences[i].with_measurement(middle, &self.meas_sequences[k])
    }
}

/// `g_{k,i} = ⟨⟨Q_k|ρ_i⟩⟩` and `Õ_{k,i}(χ) = ⟨⟨Q_k|O(χ)|ρ_i⟩⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyData {
    #[serde(with = "serde_rows")]
    pub gram: DMatrix<f64>,
    pub gate_mats: BTreeMap<Gate, Matrix>,
    pub fiducials: FiducialSet,
    pub shots: Shots,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matrix(#[serde(with = "serde_rows")] pub DMatrix<f64>);

impl TomographyData {
    pub fn gate(&self, g: Gate) -> Result<&DMatrix<f64>> {
        self.gate_mats.get(&g).map(|m| &m.0).ok_or_else(|| Error::UnknownGate(g.to_string()))
    }
}

/// Measures every cell with `run_circuit`. Cells run in parallel, each with
/// its own random stream, and are assembled by index.
pub fn collect_data(device: &Device, fiducials: &FiducialSet, gates: &[Gate], shots: Shots, seed: u64) -> Result<TomographyData> {
    let d = fiducials.d();
    let slots: Vec<Option<Gate>> = std::iter::once(None).chain(gates.iter().copied().map(Some)).collect();
    let cells: Vec<(usize, usize, usize)> =
        (0..slots.len()).flat_map(|s| (0..d).flat_map(move |k| (0..d).map(move |i| (s, k, i)))).collect();
    let values = cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(s, k, i))| {
            let middle: Vec<Gate> = slots[s].into_iter().collect();
            let circuit = fiducials.cell(k, i, &middle);
            let mut rng = stream_rng(seed, idx as u64);
            run_circuit(device, &circuit, shots, &mut rng).map(|r| r.mean)
        })
        .collect::<Result<Vec<f64>>>()?;
    let block = |s: usize| DMatrix::from_fn(d, d, |k, i| values[s * d * d + k * d + i]);
    let gate_mats = gates.iter().enumerate().map(|(gi, &g)| (g, Matrix(block(gi + 1)))).collect();
    Ok(TomographyData { gram: block(0), gate_mats, fiducials: fiducials.clone(), shots, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub max_residual: f64,
    pub condition: f64,
    pub residuals: Vec<f64>,
}

/// Compares `M_out O_N ⋯ O_1 M_in`, measured directly, with
/// `Õ_N g⁻¹ ⋯ g⁻¹ Õ_1` for each sequence.
pub fn verify_factorization(data: &TomographyData, device: &Device, sequences: &[Circuit]) -> Result<FactorizationReport> {
    let condition = linalg::condition_number(&data.gram);
    let g_inv = linalg::inverse_checked(&data.gram, DEFAULT_CONDITION_BOUND)?;
    let d = data.fiducials.d();
    let residuals = sequences
        .par_iter()
        .map(|seq| {
            let mut lhs = DMatrix::zeros(d, d);
            for k in 0..d {
                for i in 0..d {
                    lhs[(k, i)] = device.exact_mean(&data.fiducials.cell(k, i, &seq.gates))?;
                }
            }
            let rhs = chain(data, &g_inv, &seq.gates)?;
            Ok(linalg::max_abs(&(lhs - rhs)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(FactorizationReport { max_residual, condition, residuals })
}

fn chain(data: &TomographyData, g_inv: &DMatrix<f64>, gates: &[Gate]) -> Result<DMatrix<f64>> {
    let Some((&first, rest)) = gates.split_first() else {
        return Ok(data.gram.clone());
    };
    let mut acc = data.gate(first)?.clone();
    for &g in rest {
        acc = data.gate(g)? * g_inv * acc;
    }
    Ok(acc)
}

/// A reconstructed model `(ρ̂_in, Q̂_out, {Ô(χ)})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    #[serde(with = "serde_vec")]
    pub state: DVector<f64>,
    #[serde(with = "serde_vec")]
    pub dual: DVector<f64>,
    pub gates: BTreeMap<Gate, Matrix>,
    /// `M̂_in` used to fix the gauge, when known.
    pub gauge: Option<Matrix>,
}

impl ErrorModel {
    pub fn dim(&self) -> usize {
        self.state.len()
    }

    pub fn gate(&self, g: Gate) -> Result<&DMatrix<f64>> {
        self.gates.get(&g).map(|m| &m.0).ok_or_else(|| Error::UnknownGate(g.to_string()))
    }
}

/// `M̂_out = g M̂_in⁻¹`, `ρ̂_in = M̂_in e_1`, `Q̂_out = e_1ᵀ M̂_out`,
/// `Ô(χ) = M̂_out⁻¹ Õ(χ) M̂_in⁻¹`.
pub fn gauge_reconstruct(data: &TomographyData, m_hat_in: &DMatrix<f64>, condition_bound: f64) -> Result<ErrorModel> {
    reconstruct(&data.gram, &data.gate_mats, m_hat_in, condition_bound)
}

pub(crate) fn reconstruct(
    gram: &DMatrix<f64>,
    gate_mats: &BTreeMap<Gate, Matrix>,
    m_hat_in: &DMatrix<f64>,
    condition_bound: f64,
) -> Result<ErrorModel> {
    if m_hat_in.shape() != gram.shape() {
        return Err(Error::DimensionMismatch { expected: gram.nrows(), found: m_hat_in.nrows() });
    }
    let in_inv = linalg::inverse_checked(m_hat_in, condition_bound)?;
    linalg::inverse_checked(gram, condition_bound)?;
    let m_hat_out = gram * &in_inv;
    let out_inv = linalg::inverse_checked(&m_hat_out, condition_bound)?;
    let gates = gate_mats.iter().map(|(&g, m)| (g, Matrix(&out_inv * &m.0 * &in_inv))).collect();
    Ok(ErrorModel {
        state: m_hat_in.column(0).into_owned(),
        dual: m_hat_out.row(0).transpose(),
        gates,
        gauge: Some(Matrix(m_hat_in.clone())),
    })
}

/// `state ← S·state`, `dual ← dual·S⁻¹`, `gates ← S·Ô·S⁻¹`.
pub fn gauge_transform(model: &ErrorModel, s: &DMatrix<f64>) -> Result<ErrorModel> {
    let s_inv = linalg::inverse_checked(s, DEFAULT_CONDITION_BOUND)?;
    Ok(ErrorModel {
        state: s * &model.state,
        dual: (model.dual.transpose() * &s_inv).transpose(),
        gates: model.gates.iter().map(|(&g, m)| (g, Matrix(s * &m.0 * &s_inv))).collect(),
        gauge: model.gauge.as_ref().map(|m| Matrix(s * &m.0)),
    })
}

/// `Q̂_out Ô(χ_N) ⋯ Ô(χ_1) ρ̂_in`.
pub fn predict(model: &ErrorModel, circuit: &Circuit) -> Result<f64> {
    let mut v = model.state.clone();
    for &g in &circuit.gates {
        v = model.gate(g)? * v;
    }
    Ok(model.dual.dot(&v))
}

/// Exact Gram matrix between every measurement and preparation sequence
/// (rows: measurements, columns: preparations).
pub fn enlarged_gram(device: &Device, prep: &[Circuit], meas: &[Circuit]) -> Result<DMatrix<f64>> {
    let m_in = state_matrix(device, prep)?;
    let m_out = dual_matrix(device, meas)?;
    Ok(m_out * m_in)
}

/// Columns `|ρ_i⟩⟩` in full device coordinates.
pub fn state_matrix(device: &Device, prep: &[Circuit]) -> Result<DMatrix<f64>> {
    let cols = prep.iter().map(|c| device.propagate_state(c).map(|s| s.0)).collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// Rows `⟨⟨Q_k|` in full device coordinates.
pub fn dual_matrix(device: &Device, meas: &[Circuit]) -> Result<DMatrix<f64>> {
    let rows = meas.iter().map(|c| device.propagate_dual(c).map(|q| q.0.transpose())).collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_rows(&rows))
}

/// Picks `d` preparation and `d` measurement sequences from `candidates` by
/// complete pivoting on the exact candidate Gram matrix, with the empty
/// sequence forced first on both sides.
pub fn select_fiducials(device: &Device, candidates: &[Circuit], d: usize) -> Result<FiducialSet> {
    let Some(empty) = candidates.iter().position(Circuit::is_empty) else {
        return Err(Error::InvalidParameter("candidate list must contain the empty sequence".into()));
    };
    if d > candidates.len() {
        return Err(Error::DimensionMismatch { expected: candidates.len(), found: d });
    }
    let mut r = enlarged_gram(device, candidates, candidates)?;
    let mut rows = vec![empty];
    let mut cols = vec![empty];
    eliminate(&mut r, empty, empty)?;
    while rows.len() < d {
        let mut best = (0.0, 0, 0);
        for k in 0..r.nrows() {
            if rows.contains(&k) {
                continue;
            }
            for i in 0..r.ncols() {
                if !cols.contains(&i) && r[(k, i)].abs() > best.0 {
                    best = (r[(k, i)].abs(), k, i);
                }
            }
        }
        if best.0 <= 1e-12 {
            return Err(Error::Singular { condition: f64::INFINITY });
        }
        eliminate(&mut r, best.1, best.2)?;
        rows.push(best.1);
        cols.push(best.2);
    }
    FiducialSet::new(cols.iter().map(|&i| candidates[i].clone()).collect(), rows.iter().map(|&k| candidates[k].clone()).collect())
}

fn eliminate(r: &mut DMatrix<f64>, k: usize, i: usize) -> Result<()> {
    let pivot = r[(k, i)];
    if pivot.abs() <= 1e-12 {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let row = r.row(k).into_owned();
    let col = r.column(i).into_owned();
    *r -= col * row / pivot;
    Ok(())
}

/// All H/S sequences of length `0..=max_len`, shortest first.
pub fn all_sequences(max_len: usize) -> Vec<Circuit> {
    let mut out = vec![Circuit::empty()];
    let mut layer = vec![Circuit::empty()];
    for _ in 0..max_len {
        layer = layer.iter().flat_map(|c| Gate::ALL.iter().map(move |&g| c.then(&Circuit::new(vec![g])))).collect();
        out.extend(layer.iter().cloned());
    }
    out
}

//! Approximate tomography by linear inversion: trial sets, SVD truncation of
//! the trial Gram matrix, reconstruction, and gauge fitting to ideal gates.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::device::{stream_rng, Device, Shots};
use crate::error::{Error, Result};
use crate::exact_lot::{
    all_sequences, collect_data, reconstruct, ErrorModel, FiducialSet, Matrix, TomographyData, DEFAULT_CONDITION_BOUND,
};
use crate::linalg::{self, serde_rows};
use crate::optim;
use crate::ptm::ideal_ptm;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialPreset {
    D4,
    D7,
    Custom(Vec<Circuit>),
}

/// Trial sequences; each defines a state `G_N⋯G_1|0⟩` and the observable
/// `(G_1⋯G_N)† Z (G_1⋯G_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub d_trial: usize,
    pub sequences: Vec<Circuit>,
    pub selection_seed: u64,
}

impl TrialSpec {
    /// States from the sequences; measurements apply the same sequences
    /// reversed.
    pub fn fiducials(&self) -> Result<FiducialSet> {
        FiducialSet::new(self.sequences.clone(), self.sequences.iter().map(Circuit::reversed).collect())
    }
}

pub const RANDOM_LENGTHS: std::ops::RangeInclusive<usize> = 6..=20;
pub const PICKS_PER_LENGTH: usize = 4;

/// `d4`: (), (H), (H,S), (H,S,H). `d7`: every sequence of length ≤ 5 plus
/// four distinct random sequences of each length 6…20 (123 in total).
pub fn trial_sequences(preset: &TrialPreset, seed: u64) -> Result<TrialSpec> {
    let sequences = match preset {
        TrialPreset::D4 => ["", "H", "HS", "HSH"].iter().map(|s| s.parse()).collect::<Result<Vec<Circuit>>>()?,
        TrialPreset::D7 => {
            let mut seqs = all_sequences(5);
            for n in RANDOM_LENGTHS {
                let mut rng = stream_rng(seed, n as u64);
                let mut picked = BTreeSet::new();
                while picked.len() < PICKS_PER_LENGTH {
                    let c = Circuit::new((0..n).map(|_| if rng.random::<bool>() { Gate::H } else { Gate::S }).collect());
                    if picked.insert(c.clone()) {
                        seqs.push(c);
                    }
                }
            }
            seqs
        }
        TrialPreset::Custom(seqs) => {
            if seqs.first().is_none_or(|c| !c.is_empty()) {
                return Err(Error::InvalidParameter("custom trial set must start with the empty sequence".into()));
            }
            seqs.clone()
        }
    };
    Ok(TrialSpec { d_trial: sequences.len(), sequences, selection_seed: seed })
}

pub fn collect_trial_data(device: &Device, spec: &TrialSpec, shots: Shots, seed: u64) -> Result<TomographyData> {
    collect_data(device, &spec.fiducials()?, &Gate::ALL, shots, seed)
}

/// Full singular-value list, descending.
pub fn singular_spectrum(g_trial: &DMatrix<f64>) -> Vec<f64> {
    linalg::singular_values(g_trial)
}

/// `U g^t V = Λ` truncated to the `d` largest singular values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationResult {
    #[serde(with = "serde_rows")]
    pub u: DMatrix<f64>,
    #[serde(with = "serde_rows")]
    pub v: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub d: usize,
    #[serde(with = "serde_rows")]
    pub g_trunc: DMatrix<f64>,
    pub gate_mats_trunc: BTreeMap<Gate, Matrix>,
    /// `D U g^t_{•,1}`.
    pub state_column: Vec<f64>,
    /// `g^t_{1,•} V D†`.
    pub dual_row: Vec<f64>,
    /// Set when `d` exceeds the numerical rank of `g^t`.
    pub warning: Option<String>,
}

/// Relative singular-value cutoff behind the rank warning of [`svd_truncate`].
pub const RANK_WARNING_CUTOFF: f64 = 1e-10;

pub fn svd_truncate(g_trial: &DMatrix<f64>, gate_mats_trial: &BTreeMap<Gate, Matrix>, d: usize) -> Result<TruncationResult> {
    let dt = g_trial.nrows();
    if d == 0 || d > dt.min(g_trial.ncols()) {
        return Err(Error::DimensionMismatch { expected: dt, found: d });
    }
    let svd = linalg::sorted_svd(g_trial);
    let u = svd.w.transpose();
    let v = svd.z;
    let ud = u.rows(0, d).into_owned();
    let vd = v.columns(0, d).into_owned();
    let gate_mats_trunc = gate_mats_trial.iter().map(|(&g, m)| (g, Matrix(&ud * &m.0 * &vd))).collect();
    let rank = linalg::numerical_rank(g_trial, RANK_WARNING_CUTOFF);
    let warning = (d > rank).then(|| format!("kept dimension {d} exceeds numerical rank {rank}; spectrum {:?}", svd.s));
    Ok(TruncationResult {
        state_column: (&ud * g_trial.column(0)).iter().copied().collect(),
        dual_row: (g_trial.row(0) * &vd).iter().copied().collect(),
        g_trunc: DMatrix::from_diagonal(&DVector::from_row_slice(&svd.s[..d])),
        u,
        v,
        singular_values: svd.s,
        d,
        gate_mats_trunc,
        warning,
    })
}

/// Both expressions for `ρ̂_in`: `Σ_i M̂_in;•,i V_{1,i}` and `M̂_out⁻¹ D U g^t_{•,1}`.
pub fn rho_in_formulas(t: &TruncationResult, m_hat_in: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let v_row = DVector::from_iterator(t.d, t.v.row(0).iter().take(t.d).copied());
    let via_v = m_hat_in * v_row;
    let m_hat_out = &t.g_trunc * linalg::inverse_checked(m_hat_in, DEFAULT_CONDITION_BOUND)?;
    let via_g = linalg::inverse_checked(&m_hat_out, DEFAULT_CONDITION_BOUND)? * DVector::from_column_slice(&t.state_column);
    Ok((via_v, via_g))
}

/// Model in the gauge `M̂_in`, with `M̂_out = g_trunc M̂_in⁻¹`.
pub fn lim_reconstruct(t: &TruncationResult, m_hat_in: &DMatrix<f64>) -> Result<ErrorModel> {
    let mut model = reconstruct(&t.g_trunc, &t.gate_mats_trunc, m_hat_in, DEFAULT_CONDITION_BOUND)?;
    let (via_v, _) = rho_in_formulas(t, m_hat_in)?;
    let in_inv = linalg::inverse_checked(m_hat_in, DEFAULT_CONDITION_BOUND)?;
    model.state = via_v;
    model.dual = (DVector::from_column_slice(&t.dual_row).transpose() * in_inv).transpose();
    Ok(model)
}

/// Ideal gate matrices of dimension `d` for every gate.
pub fn ideal_ptms(d: usize) -> Result<BTreeMap<Gate, DMatrix<f64>>> {
    Gate::ALL.iter().map(|&g| Ok((g, ideal_ptm(g, d)?.0))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeFitConfig {
    /// Extra seeded combinations of near-intertwiner directions tried as
    /// starting points.
    pub random_starts: usize,
    pub seed: u64,
    /// Evaluation budget factor per start.
    pub patience: usize,
}

impl Default for GaugeFitConfig {
    fn default() -> Self {
        Self { random_starts: 8, seed: 0, patience: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeFit {
    #[serde(with = "serde_rows")]
    pub m_hat_out: DMatrix<f64>,
    #[serde(with = "serde_rows")]
    pub m_hat_in: DMatrix<f64>,
    /// `Σ_G ‖M_O(G) − M^ideal(G)‖²_F`.
    pub objective: f64,
    pub evaluations: u64,
    pub converged: bool,
    pub model: ErrorModel,
}

/// Chooses `M̂_out` (with `M̂_in = M̂_out⁻¹ g_trunc`) minimizing
/// `Σ_G ‖M̂_out⁻¹ Õ(G) M̂_in⁻¹ − M^ideal_G‖²_F`.
///
/// With `S = M̂_out⁻¹` and `B_G = Õ(G) g_trunc⁻¹` the gates are `S B_G S⁻¹`.
/// Starting points are taken from the least-singular directions of the
/// linear map `S ↦ (S B_G − M^ideal_G S)_G`; each start is refined by
/// Levenberg-Marquardt and the best result is kept.
pub fn gauge_fit_to_ideal(t: &TruncationResult, ideal: &BTreeMap<Gate, DMatrix<f64>>, config: &GaugeFitConfig) -> Result<GaugeFit> {
    let d = t.d;
    let g_inv = linalg::inverse_checked(&t.g_trunc, DEFAULT_CONDITION_BOUND)?;
    let mut pairs = Vec::new();
    for (g, m) in &t.gate_mats_trunc {
        let target = ideal.get(g).ok_or_else(|| Error::UnknownGate(g.to_string()))?;
        if target.shape() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, found: target.nrows() });
        }
        pairs.push((&m.0 * &g_inv, target.clone()));
    }

    let residual = |x: &DVector<f64>| -> Option<(DVector<f64>, DMatrix<f64>)> {
        let s = DMatrix::from_row_slice(d, d, x.as_slice());
        let s_inv = s.clone().try_inverse()?;
        let n = d * d;
        let mut r = DVector::zeros(pairs.len() * n);
        let mut jac = DMatrix::zeros(pairs.len() * n, n);
        for (p, (b, target)) in pairs.iter().enumerate() {
            let c = b * &s_inv;
            let a = &s * &c;
            for i in 0..d {
                for j in 0..d {
                    r[p * n + i * d + j] = a[(i, j)] - target[(i, j)];
                }
            }
            // ∂(S B S⁻¹)_{ij}/∂S_{ab} = δ_{ia} C_{bj} − A_{ia} (S⁻¹)_{bj}
            for a_ in 0..d {
                for b_ in 0..d {
                    let col = a_ * d + b_;
                    for i in 0..d {
                        for j in 0..d {
                            let mut v = -a[(i, a_)] * s_inv[(b_, j)];
                            if i == a_ {
                                v += c[(b_, j)];
                            }
                            jac[(p * n + i * d + j, col)] = v;
                        }
                    }
                }
            }
        }
        Some((r, jac))
    };

    let starts = initial_gauges(&pairs, ideal, d, config)?;
    let mut best: Option<(optim::Outcome, usize)> = None;
    let mut evaluations = 0;
    for (idx, s0) in starts.iter().enumerate() {
        let x0 = DVector::from_row_slice(&linalg::to_rows(s0).concat());
        let out = optim::levenberg_marquardt(&residual, x0, config.patience);
        evaluations += out.iterations;
        let better = match &best {
            None => true,
            Some((b, _)) => out.value < b.value,
        };
        if better && out.value.is_finite() {
            best = Some((out, idx));
        }
    }
    let (out, _) = best.ok_or(Error::Singular { condition: f64::INFINITY })?;
    let s = DMatrix::from_row_slice(d, d, &out.x);
    let m_hat_out = linalg::inverse_checked(&s, DEFAULT_CONDITION_BOUND)?;
    let m_hat_in = &s * &t.g_trunc;
    let model = lim_reconstruct(t, &m_hat_in)?;
    Ok(GaugeFit { m_hat_out, m_hat_in, objective: out.value, evaluations, converged: out.converged, model })
}

/// The linear map `S ↦ (S B_G − M_G S)_G` as a `(k d²) × d²` matrix acting on
/// row-major `vec(S)`.
fn intertwiner_map(pairs: &[(DMatrix<f64>, DMatrix<f64>)], d: usize) -> DMatrix<f64> {
    let n = d * d;
    let mut k = DMatrix::zeros(pairs.len() * n, n);
    for (p, (b, m)) in pairs.iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                let row = p * n + i * d + j;
                for q in 0..d {
                    k[(row, i * d + q)] += b[(q, j)];
                    k[(row, q * d + j)] -= m[(i, q)];
                }
            }
        }
    }
    k
}

fn initial_gauges(
    pairs: &[(DMatrix<f64>, DMatrix<f64>)],
    ideal: &BTreeMap<Gate, DMatrix<f64>>,
    d: usize,
    config: &GaugeFitConfig,
) -> Result<Vec<DMatrix<f64>>> {
    // Dimension of the commutant of the ideal gates fixes how many
    // near-null directions to combine.
    let ideal_pairs: Vec<_> = ideal.values().map(|m| (m.clone(), m.clone())).collect();
    let commutant = singular_spectrum(&intertwiner_map(&ideal_pairs, d)).iter().filter(|&&s| s < 1e-9).count().max(1);
    let k = intertwiner_map(pairs, d);
    let svd = k.svd(false, true);
    let vt = svd.v_t.expect("requested Vt");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]).then(a.cmp(&b)));
    let dirs: Vec<DMatrix<f64>> =
        order.iter().take(commutant).map(|&i| DMatrix::from_row_slice(d, d, vt.row(i).transpose().as_slice())).collect();

    let mut candidates: Vec<DMatrix<f64>> = dirs.clone();
    candidates.push(dirs.iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m));
    let mut rng = stream_rng(config.seed, 0);
    for _ in 0..config.random_starts {
        let combo = dirs.iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m * (2.0 * rng.random::<f64>() - 1.0));
        candidates.push(combo);
    }
    let usable: Vec<DMatrix<f64>> = candidates.into_iter().filter(|m| linalg::condition_number(m) < 1e10).collect();
    if usable.is_empty() {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    Ok(usable)
}

/// `M_O(G) − M^ideal_G` for every gate of a fitted model.
pub fn ideal_differences(model: &ErrorModel, ideal: &BTreeMap<Gate, DMatrix<f64>>) -> Result<BTreeMap<Gate, DMatrix<f64>>> {
    model
        .gates
        .iter()
        .map(|(&g, m)| {
            let target = ideal.get(&g).ok_or_else(|| Error::UnknownGate(g.to_string()))?;
            Ok((g, &m.0 - target))
        })
        .collect()
}

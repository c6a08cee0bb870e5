//! Truncation and linear-inversion error bounds, checked numerically against
//! the simulated device, plus the dimension-counting formulas.
//!
//! Vectors live in full device coordinates `λ·4 + σ`: states carry
//! `Tr(σρ)` and duals carry `Tr(Qσ)/2`, so the Euclidean pairing of the two is
//! `Tr(Qρ)` and Euclidean orthogonality of states is Hilbert-Schmidt
//! orthogonality.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::device::{stream_rng, Device};
use crate::error::{Error, Result};
use crate::exact_lot::{dual_matrix, state_matrix, FiducialSet};
use crate::linalg::{inverse_checked, max_abs, sorted_svd};
use crate::optim::nelder_mead;

/// Tolerance on `Π² = Π` and `Π = Πᵀ`.
pub const PROJECTION_TOL: f64 = 1e-12;

/// Slack for rounding when comparing a measured LHS to its bound.
pub const ABS_SLACK: f64 = 1e-12;
pub const REL_SLACK: f64 = 1e-9;

/// Orthogonal projection given by an orthonormal spanning set.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    basis: DMatrix<f64>,
    matrix: DMatrix<f64>,
}

impl Projection {
    /// From a matrix that must be symmetric and idempotent.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let deviation = max_abs(&(&matrix * &matrix - &matrix)).max(max_abs(&(&matrix - matrix.transpose())));
        if deviation > PROJECTION_TOL {
            return Err(Error::NotProjection { deviation });
        }
        let eig = matrix.clone().symmetric_eigen();
        let cols: Vec<DVector<f64>> =
            (0..matrix.nrows()).filter(|&i| eig.eigenvalues[i] > 0.5).map(|i| eig.eigenvectors.column(i).into_owned()).collect();
        let basis = if cols.is_empty() { DMatrix::zeros(matrix.nrows(), 0) } else { DMatrix::from_columns(&cols) };
        Ok(Self { basis, matrix })
    }

    /// From columns that must already be orthonormal.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        let gram = basis.transpose() * &basis;
        let deviation = max_abs(&(gram - DMatrix::identity(basis.ncols(), basis.ncols())));
        if deviation > PROJECTION_TOL {
            return Err(Error::NotProjection { deviation });
        }
        let matrix = &basis * basis.transpose();
        Ok(Self { basis, matrix })
    }

    /// Column space of `vectors`, keeping directions with singular value above
    /// `rel · s_1`.
    pub fn span(vectors: &DMatrix<f64>, rel: f64) -> Result<Self> {
        let svd = sorted_svd(vectors);
        let s1 = svd.s.first().copied().unwrap_or(0.0);
        let k = svd.s.iter().filter(|&&s| s > rel * s1 && s > 0.0).count();
        Self::from_orthonormal(svd.w.columns(0, k).into_owned())
    }

    /// Span of the first `k` columns after Gram-Schmidt, for callers that
    /// want a fixed dimension.
    pub fn leading(vectors: &DMatrix<f64>, k: usize) -> Result<Self> {
        if k > vectors.ncols() || k > vectors.nrows() {
            return Err(Error::DimensionMismatch { expected: vectors.ncols().min(vectors.nrows()), found: k });
        }
        let q = vectors.columns(0, k).into_owned().qr().q();
        Self::from_orthonormal(q)
    }

    pub fn identity(n: usize) -> Self {
        Self { basis: DMatrix::identity(n, n), matrix: DMatrix::identity(n, n) }
    }

    /// Ambient dimension.
    pub fn ambient_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `δ_Π = self − other`.
    pub fn difference(&self, other: &Projection) -> Result<DMatrix<f64>> {
        check_dim(self.ambient_dim(), other.ambient_dim())?;
        Ok(&self.matrix - &other.matrix)
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Vector norm used by the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Trace norm on states, operator norm on observables; CPTP maps have
    /// induced norm 1.
    #[default]
    Trace,
    /// Hilbert-Schmidt norm throughout.
    Frobenius,
}

fn blocks(n: usize) -> Result<usize> {
    if !n.is_multiple_of(4) {
        return Err(Error::InvalidParameter(format!("dimension {n} is not a multiple of 4")));
    }
    Ok(n / 4)
}

fn block_state_norm(v: &[f64]) -> f64 {
    let r = (v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt();
    v[0].abs().max(r)
}

/// Norm of `|B⟩⟩`; for the trace norm each qubit block contributes
/// `max(|v_0|, |v⃗|)`.
pub fn state_norm(v: &DVector<f64>, kind: NormKind) -> Result<f64> {
    let m = blocks(v.len())?;
    Ok(match kind {
        NormKind::Trace => (0..m).map(|l| block_state_norm(&v.as_slice()[4 * l..4 * l + 4])).sum(),
        NormKind::Frobenius => (0.5 * v.norm_squared()).sqrt(),
    })
}

/// Norm of `⟨⟨A|`; for the trace norm this is the largest block operator norm
/// `|q_0| + |q⃗|`.
pub fn dual_norm(q: &DVector<f64>, kind: NormKind) -> Result<f64> {
    let m = blocks(q.len())?;
    Ok(match kind {
        NormKind::Trace => (0..m)
            .map(|l| {
                let b = &q.as_slice()[4 * l..4 * l + 4];
                b[0].abs() + (b[1] * b[1] + b[2] * b[2] + b[3] * b[3]).sqrt()
            })
            .fold(0.0, f64::max),
        NormKind::Frobenius => (2.0 * q.norm_squared()).sqrt(),
    })
}

const SPHERE_GRID: usize = 400;
const REFINE_STARTS: usize = 4;

fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

fn bloch(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// Induced operator norm of `a`.
///
/// For the trace norm the unit ball is the hull of `±|ψ⟩⟨ψ|⊗|λ⟩⟨λ|`, so the
/// norm is the largest image norm of a pure state in one block. That maximum
/// over the Bloch sphere is located on a grid and refined by simplex search.
pub fn operator_norm(a: &DMatrix<f64>, kind: NormKind) -> Result<f64> {
    let m = blocks(a.ncols())?;
    blocks(a.nrows())?;
    if kind == NormKind::Frobenius {
        return Ok(crate::linalg::singular_values(a).first().copied().unwrap_or(0.0));
    }
    let image = |l: usize, n: &Vector3<f64>| -> f64 {
        let x = Vector4::new(1.0, n[0], n[1], n[2]);
        let y = a.columns(4 * l, 4) * x;
        state_norm(&y, NormKind::Trace).unwrap_or(f64::NAN)
    };
    let grid = fibonacci_sphere(SPHERE_GRID);
    let mut candidates: Vec<(f64, usize, Vector3<f64>)> = Vec::with_capacity(m * SPHERE_GRID);
    for l in 0..m {
        for n in &grid {
            candidates.push((image(l, n), l, *n));
        }
    }
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut best = candidates.first().map_or(0.0, |c| c.0);
    for &(_, l, n) in candidates.iter().take(REFINE_STARTS) {
        let theta = n[2].clamp(-1.0, 1.0).acos();
        let phi = n[1].atan2(n[0]);
        let f = |p: &[f64]| -image(l, &bloch(p[0], p[1]));
        let out = nelder_mead(&f, &[theta, phi], 0.05, 400, 1e-13)?;
        best = best.max(-out.value);
    }
    Ok(best)
}

/// `‖Π O Π − O Π‖`, the invariance defect ε of `transfer` on the subspace.
pub fn invariance_defect(projection: &Projection, transfer: &DMatrix<f64>, kind: NormKind) -> Result<f64> {
    check_dim(projection.ambient_dim(), transfer.nrows())?;
    let p = projection.matrix();
    let delta = p * transfer * p - transfer * p;
    operator_norm(&delta, kind)
}

/// `N_Q N_ρ [(N_O + ε)^N − N_O^N]`.
pub fn sequence_bound(n_q: f64, n_rho: f64, n_o: f64, epsilon: f64, n: usize) -> f64 {
    let n = n as i32;
    n_q * n_rho * ((n_o + epsilon).powi(n) - n_o.powi(n))
}

/// `N_Q N_ρ [(1 + ε_g)^{N−1} (N_O + ε_O)^N − N_O^N]`.
pub fn lim_bound(n_q: f64, n_rho: f64, n_o: f64, eps_g: f64, eps_o: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as i32;
    n_q * n_rho * ((1.0 + eps_g).powi(n - 1) * (n_o + eps_o).powi(n) - n_o.powi(n))
}

/// `(d_S² − 1) m + 1`.
pub fn effective_dimension(d_s: usize, m: usize) -> usize {
    (d_s * d_s - 1) * m + 1
}

/// `⌈(l_t + 1)/2⌉` support points to match moments through order `l_t`.
pub fn min_support(l_t: usize) -> usize {
    (l_t + 2) / 2
}

/// `C(n_λ + l_t, l_t)`.
pub fn cubature_count(n_lambda: usize, l_t: usize) -> u128 {
    let k = l_t.min(n_lambda) as u128;
    let n = (n_lambda + l_t) as u128;
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Gates, fiducial states (columns of `m_in`) and observables (rows of
/// `m_out`) in full coordinates.
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub gates: BTreeMap<Gate, DMatrix<f64>>,
    pub m_in: DMatrix<f64>,
    pub m_out: DMatrix<f64>,
}

impl BoundModel {
    pub fn from_device(device: &Device, fiducials: &FiducialSet) -> Result<Self> {
        let gates =
            device.gate_labels().into_iter().map(|g| device.full_transfer(g).map(|t| (g, t.0))).collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self { gates, m_in: state_matrix(device, &fiducials.prep_sequences)?, m_out: dual_matrix(device, &fiducials.meas_sequences)? })
    }

    pub fn dim(&self) -> usize {
        self.m_in.nrows()
    }

    fn gate(&self, g: Gate) -> Result<&DMatrix<f64>> {
        self.gates.get(&g).ok_or_else(|| Error::UnknownGate(g.to_string()))
    }

    fn labels(&self) -> Vec<Gate> {
        self.gates.keys().copied().collect()
    }
}

/// The `3m + 1`-dimensional subspace spanned by `Σ_λ p_λ |1⟩⟩⊗|λ⟩` and
/// every non-identity Pauli of every block. It is exactly invariant under any
/// block-diagonal operation with identity transitions that preserves the
/// weights `p`.
pub fn stationary_subspace(weights: &[f64]) -> Result<Projection> {
    let m = weights.len();
    let norm = weights.iter().map(|p| p * p).sum::<f64>().sqrt();
    if m == 0 || norm == 0.0 {
        return Err(Error::InvalidParameter("weights must be nonzero".into()));
    }
    let mut cols = vec![DVector::from_fn(4 * m, |i, _| if i % 4 == 0 { weights[i / 4] / norm } else { 0.0 })];
    for l in 0..m {
        for s in 1..4 {
            cols.push(DVector::from_fn(4 * m, |i, _| if i == 4 * l + s { 1.0 } else { 0.0 }));
        }
    }
    Projection::from_orthonormal(DMatrix::from_columns(&cols))
}

/// Span of the `d` state directions that dominate the Gram matrix
/// `M_out M_in = W Σ Zᵀ`, namely those of `M_in Z_d`.
pub fn dominant_state_subspace(model: &BoundModel, d: usize) -> Result<Projection> {
    let svd = sorted_svd(&(&model.m_out * &model.m_in));
    if d > svd.s.len() {
        return Err(Error::DimensionMismatch { expected: svd.s.len(), found: d });
    }
    let dirs = &model.m_in * svd.z.columns(0, d);
    Projection::leading(&dirs, d)
}

/// Seeded Haar-like random `k`-dimensional subspace of `R^n`.
pub fn random_subspace(n: usize, k: usize, seed: u64) -> Result<Projection> {
    let mut rng = stream_rng(seed, 0);
    let g = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    Projection::leading(&g, k)
}

/// Seeded random circuits with lengths uniform in `1..=max_len`; circuit `j`
/// draws from stream `j`.
pub fn random_sequences(labels: &[Gate], n_sequences: usize, max_len: usize, seed: u64) -> Result<Vec<Circuit>> {
    if labels.is_empty() || max_len == 0 {
        return Err(Error::InvalidParameter("need at least one gate and max_len ≥ 1".into()));
    }
    Ok((0..n_sequences)
        .map(|j| {
            let mut rng = stream_rng(seed, j as u64);
            let len = rng.random_range(1..=max_len);
            Circuit::new((0..len).map(|_| labels[rng.random_range(0..labels.len())]).collect())
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceCheck {
    pub circuit: Circuit,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles; NaN entries are skipped.
    pub fn of(xs: &[f64]) -> Self {
        let mut v: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| -> f64 {
            if v.is_empty() {
                return 0.0;
            }
            let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
            v[rank - 1]
        };
        Self { p50: at(0.50), p90: at(0.90), p99: at(0.99), max: at(1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub norm: NormKind,
    pub subspace_dim: usize,
    pub n_q: f64,
    pub n_rho: f64,
    pub n_o: f64,
    pub epsilon: f64,
    /// Only for the linear-inversion bound.
    pub eps_g: Option<f64>,
    pub checks: Vec<SequenceCheck>,
    pub max_ratio: f64,
    pub ratio_percentiles: Percentiles,
}

fn within(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + REL_SLACK) + ABS_SLACK
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs <= ABS_SLACK {
        0.0
    } else {
        lhs / rhs
    }
}

fn finish(
    kind: NormKind,
    subspace_dim: usize,
    (n_q, n_rho, n_o, epsilon, eps_g): (f64, f64, f64, f64, Option<f64>),
    checks: Vec<SequenceCheck>,
) -> Result<BoundReport> {
    if let Some(bad) = checks.iter().find(|c| !within(c.lhs, c.rhs)) {
        return Err(Error::BoundViolation { sequence: bad.circuit.clone(), lhs: bad.lhs, rhs: bad.rhs });
    }
    let ratios: Vec<f64> = checks.iter().map(|c| c.ratio).collect();
    let ratio_percentiles = Percentiles::of(&ratios);
    Ok(BoundReport {
        norm: kind,
        subspace_dim,
        n_q,
        n_rho,
        n_o,
        epsilon,
        eps_g,
        max_ratio: ratio_percentiles.max,
        ratio_percentiles,
        checks,
    })
}

fn max_col_norm(m: &DMatrix<f64>, kind: NormKind) -> Result<f64> {
    m.column_iter().map(|c| state_norm(&c.into_owned(), kind)).try_fold(0.0_f64, |acc, x| x.map(|x| acc.max(x)))
}

fn max_row_norm(m: &DMatrix<f64>, kind: NormKind) -> Result<f64> {
    m.row_iter().map(|r| dual_norm(&r.transpose(), kind)).try_fold(0.0_f64, |acc, x| x.map(|x| acc.max(x)))
}

fn max_over_gates<F>(model: &BoundModel, f: F) -> Result<f64>
where
    F: Fn(&DMatrix<f64>) -> Result<f64>,
{
    model.gates.values().map(f).try_fold(0.0_f64, |acc, x| x.map(|x| acc.max(x)))
}

/// Compares `M_out O_N⋯O_1 M_in` with the projected chain
/// `M_out ΠO_NΠ⋯ΠO_1Π M_in` on seeded random sequences. The fiducial states
/// are first projected onto the subspace; `N_Q`, `N_ρ`, `N_O` and `ε` are
/// measured from the model.
pub fn empirical_bound_check(
    model: &BoundModel,
    projection: &Projection,
    n_sequences: usize,
    max_len: usize,
    seed: u64,
    kind: NormKind,
) -> Result<BoundReport> {
    check_dim(model.dim(), projection.ambient_dim())?;
    let p = projection.matrix();
    let m_in = p * &model.m_in;
    let n_q = max_row_norm(&model.m_out, kind)?;
    let n_rho = max_col_norm(&m_in, kind)?;
    let n_o = max_over_gates(model, |o| operator_norm(o, kind))?;
    let epsilon = max_over_gates(model, |o| invariance_defect(projection, o, kind))?;
    let projected: BTreeMap<Gate, DMatrix<f64>> = model.gates.iter().map(|(&g, o)| (g, p * o * p)).collect();

    let sequences = random_sequences(&model.labels(), n_sequences, max_len, seed)?;
    let checks = sequences
        .into_par_iter()
        .map(|circuit| {
            let mut exact = m_in.clone();
            let mut chain = m_in.clone();
            for &g in &circuit.gates {
                exact = model.gate(g)? * exact;
                chain = &projected[&g] * chain;
            }
            let lhs = max_abs(&(&model.m_out * (exact - chain)));
            let rhs = sequence_bound(n_q, n_rho, n_o, epsilon, circuit.len());
            Ok(SequenceCheck { lhs, rhs, ratio: ratio(lhs, rhs), circuit })
        })
        .collect::<Result<Vec<_>>>()?;
    finish(kind, projection.rank(), (n_q, n_rho, n_o, epsilon, None), checks)
}

/// Linear-inversion bound with the projective approximate model on
/// `Π_in = span(M_in)`: compares the data chain `Õ_N g⁻¹ ⋯ g⁻¹ Õ_1` with
/// `M_out^a O^a_N ⋯ O^a_1 M_in^a`. Model-space norms are bounded by the
/// corresponding full-space norms after conjugation with `T⁺ · T`.
pub fn lim_bound_check(model: &BoundModel, n_sequences: usize, max_len: usize, seed: u64, kind: NormKind) -> Result<BoundReport> {
    let d = model.m_in.ncols();
    check_dim(d, model.m_out.nrows())?;
    let projection = Projection::span(&model.m_in, 1e-12)?;
    check_dim(d, projection.rank())?;
    let p = projection.matrix();
    let t = projection.basis().transpose();
    let t_plus = projection.basis();

    let gram = &model.m_out * &model.m_in;
    let g_inv = inverse_checked(&gram, 1e14)?;
    let m_in_a = &t * &model.m_in;
    let m_out_a = &model.m_out * t_plus;
    let out_p_pinv = (&model.m_out * p).pseudo_inverse(1e-13).map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let n_q = max_row_norm(&(&model.m_out * p), kind)?;
    let n_rho = max_col_norm(&model.m_in, kind)?;
    let n_o = max_over_gates(model, |o| operator_norm(&(p * o * p), kind))?;
    let eps_o = max_over_gates(model, |o| operator_norm(&(&out_p_pinv * &model.m_out * o * p - p * o * p), kind))?;
    let eps_g = operator_norm(&(&model.m_in * &g_inv * &model.m_out * p - p), kind)?;

    let data: BTreeMap<Gate, DMatrix<f64>> = model.gates.iter().map(|(&g, o)| (g, &model.m_out * o * &model.m_in)).collect();
    let approx: BTreeMap<Gate, DMatrix<f64>> = model.gates.iter().map(|(&g, o)| (g, &t * o * t_plus)).collect();

    let sequences = random_sequences(&model.labels(), n_sequences, max_len, seed)?;
    let checks = sequences
        .into_par_iter()
        .map(|circuit| {
            let mut chain = data[&circuit.gates[0]].clone();
            for &g in &circuit.gates[1..] {
                chain = &data[&g] * &g_inv * chain;
            }
            let mut a = m_in_a.clone();
            for &g in &circuit.gates {
                a = &approx[&g] * a;
            }
            let lhs = max_abs(&(chain - &m_out_a * a));
            let rhs = lim_bound(n_q, n_rho, n_o, eps_g, eps_o, circuit.len());
            Ok(SequenceCheck { lhs, rhs, ratio: ratio(lhs, rhs), circuit })
        })
        .collect::<Result<Vec<_>>>()?;
    finish(kind, d, (n_q, n_rho, n_o, eps_o, Some(eps_g)), checks)
}

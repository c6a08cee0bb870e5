//! Vectorized Hermitian operators: states as real columns, observables as real
//! rows, operations as real matrices.
//!
//! Composite system-environment operators use the environment index as the
//! slow index, i.e. matrix index `λ·2 + s` and transfer-matrix coordinate
//! `λ·4 + σ` with σ ordered (I, X, Y, Z).

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::Gate;
use crate::error::{Error, Result};
use crate::linalg::{self, serde_rows, serde_vec};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance on the imaginary part of traces that must be real.
pub const IMAG_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;
const ORTHOGONALITY_TOL: f64 = 1e-12;
/// Largest allowed overlap with a discarded stationary-basis direction.
pub const DISCARD_TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Pauli matrix by index 0..4 = I, X, Y, Z.
pub fn pauli(index: usize) -> CMatrix {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    let entries = match index {
        0 => [l, o, o, l],
        1 => [o, l, l, o],
        2 => [o, -i, i, o],
        3 => [l, o, o, -l],
        _ => panic!("pauli index {index} out of range"),
    };
    CMatrix::from_row_slice(2, 2, &entries)
}

pub const PAULI_LABELS: [&str; 4] = ["I", "X", "Y", "Z"];

pub fn to_cmatrix(m: &nalgebra::Matrix2<Complex64>) -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = c(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

fn real_part(z: Complex64, scale: f64) -> Result<f64> {
    if z.im.abs() > IMAG_TOL * scale.max(1.0) {
        return Err(Error::NotHermitian { deviation: z.im.abs() });
    }
    Ok(z.re)
}

fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn check_hermitian(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let deviation = hermitian_deviation(m);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn env_projector(m: usize, lambda: usize) -> CMatrix {
    let mut p = CMatrix::zeros(m, m);
    p[(lambda, lambda)] = c(1.0, 0.0);
    p
}

#[derive(Debug, Clone)]
pub struct BasisElement {
    pub label: String,
    pub matrix: CMatrix,
}

/// An orthogonal set of Hermitian operators with `Tr(σ τ) = norm · δ`.
///
/// The set need not span the whole operator space.
#[derive(Debug, Clone)]
pub struct Basis {
    elements: Vec<BasisElement>,
    norm: f64,
}

impl Basis {
    pub fn new(elements: Vec<BasisElement>, norm: f64) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(Error::InvalidParameter("empty basis".into()));
        };
        let n = first.matrix.nrows();
        for e in &elements {
            if e.matrix.nrows() != n {
                return Err(Error::DimensionMismatch { expected: n, found: e.matrix.nrows() });
            }
            check_hermitian(&e.matrix)?;
        }
        let mut deviation = 0.0_f64;
        for (a, ea) in elements.iter().enumerate() {
            for (b, eb) in elements.iter().enumerate() {
                let target = if a == b { norm } else { 0.0 };
                deviation = deviation.max((trace_product(&ea.matrix, &eb.matrix) - c(target, 0.0)).norm());
            }
        }
        if deviation > ORTHOGONALITY_TOL {
            return Err(Error::NonOrthogonalBasis { deviation });
        }
        Ok(Self { elements, norm })
    }

    /// (I, X, Y, Z) on one qubit, `d_H = 2`.
    pub fn pauli() -> Self {
        let elements = (0..4).map(|i| BasisElement { label: PAULI_LABELS[i].to_string(), matrix: pauli(i) }).collect();
        Self { elements, norm: 2.0 }
    }

    /// σ ⊗ |λ⟩⟨λ| for a qubit and an `m`-valued classical environment,
    /// normalized so that `Tr(σ τ) = 2 δ`.
    pub fn qubit_with_environment(m: usize) -> Self {
        let mut elements = Vec::with_capacity(4 * m);
        for lambda in 0..m {
            let p = env_projector(m, lambda);
            for s in 0..4 {
                elements.push(BasisElement { label: format!("{}{}", PAULI_LABELS[s], lambda + 1), matrix: kron(&p, &pauli(s)) });
            }
        }
        Self { elements, norm: 2.0 }
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Normalizer `d_H`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn hilbert_dim(&self) -> usize {
        self.elements[0].matrix.nrows()
    }

    pub fn labels(&self) -> Vec<String> {
        self.elements.iter().map(|e| e.label.clone()).collect()
    }

    fn check_operator(&self, m: &CMatrix) -> Result<()> {
        if m.nrows() != self.hilbert_dim() || m.ncols() != self.hilbert_dim() {
            return Err(Error::DimensionMismatch { expected: self.hilbert_dim(), found: m.nrows() });
        }
        Ok(())
    }
}

/// Column vector with entries `Tr(σ ρ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVec(#[serde(with = "serde_vec")] pub DVector<f64>);

/// Row vector with entries `Tr(Q σ) / d_H`, stored as a column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DualVec(#[serde(with = "serde_vec")] pub DVector<f64>);

/// Real matrix with entries `Tr[σ O(τ)] / d_H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransferMatrix(#[serde(with = "serde_rows")] pub DMatrix<f64>);

impl StateVec {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl DualVec {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn apply(&self, state: &StateVec) -> Result<f64> {
        if self.dim() != state.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: state.dim() });
        }
        Ok(self.0.dot(&state.0))
    }
}

impl TransferMatrix {
    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// The operation `self` followed by `next`, i.e. `next · self`.
    pub fn then(&self, next: &TransferMatrix) -> TransferMatrix {
        TransferMatrix(&next.0 * &self.0)
    }

    pub fn apply(&self, state: &StateVec) -> Result<StateVec> {
        if self.dim() != state.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: state.dim() });
        }
        Ok(StateVec(&self.0 * &state.0))
    }

    /// Largest deviation of the first row from (1, 0, …, 0).
    pub fn trace_preservation_defect(&self) -> f64 {
        (0..self.dim()).map(|j| (self.0[(0, j)] - if j == 0 { 1.0 } else { 0.0 }).abs()).fold(0.0, f64::max)
    }
}

pub fn vectorize_state(rho: &CMatrix, basis: &Basis) -> Result<StateVec> {
    basis.check_operator(rho)?;
    check_hermitian(rho)?;
    let v = basis.elements.iter().map(|e| real_part(trace_product(&e.matrix, rho), 1.0)).collect::<Result<Vec<_>>>()?;
    Ok(StateVec(DVector::from_vec(v)))
}

pub fn dualize_observable(q: &CMatrix, basis: &Basis) -> Result<DualVec> {
    basis.check_operator(q)?;
    check_hermitian(q)?;
    let v =
        basis.elements.iter().map(|e| real_part(trace_product(q, &e.matrix), 1.0).map(|x| x / basis.norm)).collect::<Result<Vec<_>>>()?;
    Ok(DualVec(DVector::from_vec(v)))
}

/// Transfer matrix of an arbitrary Hermiticity-preserving linear map.
pub fn transfer_of_map<F>(map: F, basis: &Basis) -> Result<TransferMatrix>
where
    F: Fn(&CMatrix) -> CMatrix,
{
    let images: Vec<CMatrix> = basis.elements.iter().map(|e| map(&e.matrix)).collect();
    let d = basis.len();
    let mut out = DMatrix::zeros(d, d);
    for (a, ea) in basis.elements.iter().enumerate() {
        for (b, img) in images.iter().enumerate() {
            out[(a, b)] = real_part(trace_product(&ea.matrix, img), basis.norm)? / basis.norm;
        }
    }
    Ok(TransferMatrix(out))
}

pub fn transfer_of_unitary(u: &CMatrix, basis: &Basis) -> Result<TransferMatrix> {
    basis.check_operator(u)?;
    let n = u.nrows();
    let deviation = (u.adjoint() * u - CMatrix::identity(n, n)).iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
    if deviation > UNITARY_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    let ud = u.adjoint();
    transfer_of_map(|t| u * t * &ud, basis)
}

/// `⟨⟨Q| O_N ⋯ O_1 |ρ⟩⟩` with `sequence` listed in application order.
pub fn expectation<'a, I>(dual: &DualVec, sequence: I, state: &StateVec) -> Result<f64>
where
    I: IntoIterator<Item = &'a TransferMatrix>,
{
    let mut v = state.0.clone();
    for op in sequence {
        if op.dim() != v.len() {
            return Err(Error::DimensionMismatch { expected: v.len(), found: op.dim() });
        }
        v = &op.0 * v;
    }
    if dual.dim() != v.len() {
        return Err(Error::DimensionMismatch { expected: v.len(), found: dual.dim() });
    }
    Ok(dual.0.dot(&v))
}

/// A completely positive map given by Kraus operators.
#[derive(Debug, Clone)]
pub struct Channel {
    pub kraus: Vec<CMatrix>,
}

impl Channel {
    pub fn identity(n: usize) -> Self {
        Self { kraus: vec![CMatrix::identity(n, n)] }
    }

    pub fn unitary(u: CMatrix) -> Self {
        Self { kraus: vec![u] }
    }

    pub fn gate(g: Gate) -> Self {
        Self::unitary(to_cmatrix(&g.unitary()))
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let n = rho.nrows();
        self.kraus.iter().fold(CMatrix::zeros(n, n), |acc, k| acc + k * rho * k.adjoint())
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Channel) -> Channel {
        let mut kraus = Vec::with_capacity(self.kraus.len() * next.kraus.len());
        for b in &next.kraus {
            for a in &self.kraus {
                kraus.push(b * a);
            }
        }
        Channel { kraus }
    }

    /// Convex combination `Σ_i w_i Φ_i`.
    pub fn mixture(parts: &[(f64, Channel)]) -> Result<Channel> {
        let mut kraus = Vec::new();
        for (w, ch) in parts {
            if *w < 0.0 {
                return Err(Error::InvalidParameter(format!("negative mixture weight {w}")));
            }
            let s = w.sqrt();
            kraus.extend(ch.kraus.iter().map(|k| k * c(s, 0.0)));
        }
        Ok(Channel { kraus })
    }

    pub fn transfer(&self, basis: &Basis) -> Result<TransferMatrix> {
        transfer_of_map(|t| self.apply(t), basis)
    }
}

/// Operation on a qubit coupled to an `m`-valued classical environment:
/// `O = Σ_{λ',λ} t_{λ'λ} Φ_λ ⊗ |λ'⟩⟨λ|`.
///
/// `channels[λ]` is the system map applied when the environment holds `λ`;
/// `transition` is column-stochastic.
#[derive(Debug, Clone)]
pub struct BlockOperation {
    pub channels: Vec<Channel>,
    pub transition: DMatrix<f64>,
}

impl BlockOperation {
    pub fn new(channels: Vec<Channel>, transition: DMatrix<f64>) -> Result<Self> {
        let m = channels.len();
        if transition.nrows() != m || transition.ncols() != m {
            return Err(Error::DimensionMismatch { expected: m, found: transition.nrows() });
        }
        for j in 0..m {
            let col = transition.column(j);
            if col.iter().any(|&x| x < -1e-15) || (col.sum() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("transition column {j} is not a probability vector")));
            }
        }
        Ok(Self { channels, transition })
    }

    pub fn env_dim(&self) -> usize {
        self.channels.len()
    }

    /// Action on a composite `2m × 2m` operator. Environment coherences are
    /// dropped since the environment is classical.
    pub fn apply(&self, a: &CMatrix) -> CMatrix {
        let m = self.env_dim();
        let mut out = CMatrix::zeros(2 * m, 2 * m);
        for src in 0..m {
            let block = a.view((2 * src, 2 * src), (2, 2)).into_owned();
            let img = self.channels[src].apply(&block);
            for dst in 0..m {
                let t = self.transition[(dst, src)];
                if t != 0.0 {
                    let mut view = out.view_mut((2 * dst, 2 * dst), (2, 2));
                    view += &img * c(t, 0.0);
                }
            }
        }
        out
    }

    /// Transfer matrix in the `σ ⊗ |λ⟩⟨λ|` basis (dimension `4m`).
    pub fn full_transfer(&self) -> Result<TransferMatrix> {
        let m = self.env_dim();
        let pauli = Basis::pauli();
        let blocks = self.channels.iter().map(|ch| ch.transfer(&pauli)).collect::<Result<Vec<_>>>()?;
        let mut out = DMatrix::zeros(4 * m, 4 * m);
        for src in 0..m {
            for dst in 0..m {
                let t = self.transition[(dst, src)];
                if t != 0.0 {
                    out.view_mut((4 * dst, 4 * src), (4, 4)).copy_from(&(&blocks[src].0 * t));
                }
            }
        }
        Ok(TransferMatrix(out))
    }
}

/// Reduced basis for a qubit with an `m`-valued environment in the stationary
/// state `ρ_E = Σ p_λ |λ⟩⟨λ|`:
/// `I⊗ρ_E/√a, X⊗|1⟩⟨1|, Y⊗|1⟩⟨1|, Z⊗|1⟩⟨1|, …` with `a = Tr(ρ_E²)`.
///
/// For `m = 2` this is the seven-element basis. The `m − 1` identity-sector
/// directions orthogonal to `I⊗ρ_E` are kept separately and checked to carry
/// no weight.
#[derive(Debug, Clone)]
pub struct StationaryBasis {
    weights: Vec<f64>,
    purity: f64,
    basis: Basis,
    discarded: Vec<BasisElement>,
    coords: DMatrix<f64>,
    discarded_coords: DMatrix<f64>,
}

pub type SevenBasis = StationaryBasis;

impl StationaryBasis {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let m = weights.len();
        if m == 0 || weights.iter().any(|&p| !(p >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("environment weights {weights:?} are not a probability vector")));
        }
        let purity: f64 = weights.iter().map(|p| p * p).sum();
        let root = purity.sqrt();
        let full = 4 * m;

        let mut rows: Vec<DVector<f64>> = Vec::with_capacity(3 * m + 1);
        let mut labels = Vec::with_capacity(3 * m + 1);
        let mut first = DVector::zeros(full);
        for (l, p) in weights.iter().enumerate() {
            first[4 * l] = p / root;
        }
        rows.push(first);
        labels.push("I_rhoE".to_string());
        for l in 0..m {
            for s in 1..4 {
                let mut r = DVector::zeros(full);
                r[4 * l + s] = 1.0;
                rows.push(r);
                labels.push(format!("{}{}", PAULI_LABELS[s], l + 1));
            }
        }

        // Gram-Schmidt on the identity sector, against I⊗ρ_E.
        let mut sector: Vec<DVector<f64>> = vec![DVector::from_iterator(m, weights.iter().map(|p| p / root))];
        let mut discarded_rows = Vec::new();
        for l in 0..m {
            let mut v = DVector::zeros(m);
            v[l] = 1.0;
            for u in &sector {
                let proj = u.dot(&v);
                v -= u * proj;
            }
            let n = v.norm();
            if n > 1e-8 && sector.len() < m {
                v /= n;
                let mut r = DVector::zeros(full);
                for k in 0..m {
                    r[4 * k] = v[k];
                }
                discarded_rows.push(r);
                sector.push(v);
            }
        }

        let to_element = |row: &DVector<f64>, label: String| {
            let mut mat = CMatrix::zeros(2 * m, 2 * m);
            for l in 0..m {
                let p = env_projector(m, l);
                for s in 0..4 {
                    let x = row[4 * l + s];
                    if x != 0.0 {
                        mat += kron(&p, &pauli(s)) * c(x, 0.0);
                    }
                }
            }
            BasisElement { label, matrix: mat }
        };
        let elements: Vec<BasisElement> = rows.iter().zip(labels).map(|(r, l)| to_element(r, l)).collect();
        let discarded: Vec<BasisElement> =
            discarded_rows.iter().enumerate().map(|(i, r)| to_element(r, format!("I_perp{}", i + 1))).collect();
        let coords = DMatrix::from_fn(rows.len(), full, |i, j| rows[i][j]);
        let discarded_coords = DMatrix::from_fn(discarded_rows.len(), full, |i, j| discarded_rows[i][j]);
        let basis = Basis::new(elements, 2.0)?;
        Ok(Self { weights, purity, basis, discarded, coords, discarded_coords })
    }

    /// The seven-element basis for environment weights `(p1, p2)`.
    pub fn seven(p1: f64, p2: f64) -> Result<Self> {
        Self::new(vec![p1, p2])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `a = Tr(ρ_E²)`.
    pub fn purity(&self) -> f64 {
        self.purity
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn discarded(&self) -> &[BasisElement] {
        &self.discarded
    }

    pub fn env_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Orthonormal rows expressing each reduced element in the `4m` full
    /// coordinates.
    pub fn coordinates(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn reduce_state(&self, full: &StateVec) -> StateVec {
        StateVec(&self.coords * &full.0)
    }

    pub fn reduce_dual(&self, full: &DualVec) -> DualVec {
        DualVec(&self.coords * &full.0)
    }

    /// `R O Rᵀ`, failing if `O` leaks into a discarded direction.
    pub fn reduce_transfer(&self, full: &TransferMatrix) -> Result<TransferMatrix> {
        let image = &full.0 * self.coords.transpose();
        if self.discarded_coords.nrows() > 0 {
            let residual = linalg::max_abs(&(&self.discarded_coords * &image));
            if residual > DISCARD_TOL {
                return Err(Error::NonStationary { residual });
            }
        }
        Ok(TransferMatrix(&self.coords * image))
    }
}

/// Reduced transfer matrix `Tr[σ O(τ)]/2` of a block operation in a
/// stationary basis, computed from composite operators.
pub fn seven_dim_ptm(op: &BlockOperation, basis: &StationaryBasis) -> Result<TransferMatrix> {
    if op.env_dim() != basis.env_dim() {
        return Err(Error::DimensionMismatch { expected: basis.env_dim(), found: op.env_dim() });
    }
    let images: Vec<CMatrix> = basis.basis.elements.iter().map(|e| op.apply(&e.matrix)).collect();
    let mut residual = 0.0_f64;
    for d in &basis.discarded {
        for img in &images {
            residual = residual.max(trace_product(&d.matrix, img).norm() / 2.0);
        }
    }
    if residual > DISCARD_TOL {
        return Err(Error::NonStationary { residual });
    }
    transfer_of_map(|t| op.apply(t), &basis.basis)
}

#[rustfmt::skip]
const IDEAL_H7: [[f64; 7]; 7] = [
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
];

#[rustfmt::skip]
const IDEAL_S7: [[f64; 7]; 7] = [
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
];

/// Ideal gate matrix in a stationary basis of dimension `d = 3m + 1`:
/// the leading entry 1 followed by the gate's Bloch rotation once per
/// environment value. `d = 4` and `d = 7` give the standard tables.
pub fn ideal_ptm(gate: Gate, d: usize) -> Result<TransferMatrix> {
    if d == 0 || !(d - 1).is_multiple_of(3) {
        return Err(Error::InvalidParameter(format!("ideal gate dimension {d} is not 3m+1")));
    }
    let table = match gate {
        Gate::H => &IDEAL_H7,
        Gate::S => &IDEAL_S7,
    };
    let mut out = DMatrix::zeros(d, d);
    out[(0, 0)] = 1.0;
    for block in 0..(d - 1) / 3 {
        for i in 0..3 {
            for j in 0..3 {
                out[(1 + 3 * block + i, 1 + 3 * block + j)] = table[1 + i][1 + j];
            }
        }
    }
    Ok(TransferMatrix(out))
}

/// A matrix with row/column labels, the exchange format for transfer
/// matrices and Gram data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMatrix {
    pub labels: Vec<String>,
    #[serde(with = "serde_rows")]
    pub matrix: DMatrix<f64>,
}

impl LabeledMatrix {
    pub fn new(labels: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        if labels.len() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.ncols(), found: labels.len() });
        }
        Ok(Self { labels, matrix })
    }

    /// Labels `e1, e2, …` for matrices without a physical basis.
    pub fn indexed(matrix: DMatrix<f64>) -> Self {
        let labels = (1..=matrix.ncols()).map(|i| format!("e{i}")).collect();
        Self { labels, matrix }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.labels)?;
        for i in 0..self.matrix.nrows() {
            w.write_record(self.matrix.row(i).iter().map(|x| format!("{x:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let labels: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::InvalidParameter(format!("bad matrix entry {s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let matrix = linalg::from_rows(&rows)?;
        Self::new(labels, matrix)
    }
}

impl fmt::Display for TransferMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.0.nrows() {
            let row: Vec<String> = self.0.row(i).iter().map(|x| format!("{x:9.5}")).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

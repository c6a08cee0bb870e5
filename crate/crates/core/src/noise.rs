//! Temporally correlated noise: low-frequency classical variables with
//! moment-matched discretization, decaying correlations, and noise that
//! depends on the previous operation.

use std::collections::BTreeMap;

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::Gate;
use crate::error::{Error, Result};
use crate::linalg::serde_rows;
use crate::ptm::{pauli, BlockOperation, CMatrix, Channel, TransferMatrix};

/// `E(ε)`: diag(1, 1−ε, 1−ε, 1−ε).
pub fn depolarizing_channel(epsilon: f64) -> Result<TransferMatrix> {
    check_rate(epsilon)?;
    let k = 1.0 - epsilon;
    Ok(TransferMatrix(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, k, k, k]))))
}

/// Kraus form of `E(ε) = (1−ε)·id + ε·D` with `D(ρ) = ¼ Σ_P PρP`.
pub fn depolarizing_kraus(epsilon: f64) -> Result<Channel> {
    check_rate(epsilon)?;
    let mut kraus = vec![pauli(0) * Complex64::new((1.0 - 0.75 * epsilon).sqrt(), 0.0)];
    let s = Complex64::new((0.25 * epsilon).sqrt(), 0.0);
    for i in 1..4 {
        kraus.push(pauli(i) * s);
    }
    Ok(Channel { kraus })
}

/// `E(ε)[G]`: the ideal gate followed by depolarization.
pub fn noisy_gate(gate: Gate, epsilon: f64) -> Result<Channel> {
    Ok(Channel::gate(gate).then(&depolarizing_kraus(epsilon)?))
}

/// Transfer matrix of `E(ε)[G]`.
pub fn noisy_gate_transfer(gate: Gate, epsilon: f64) -> Result<TransferMatrix> {
    let ideal = crate::ptm::ideal_ptm(gate, 4)?;
    Ok(ideal.then(&depolarizing_channel(epsilon)?))
}

fn check_rate(epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("depolarizing rate {epsilon} outside [0, 1]")));
    }
    Ok(())
}

/// `ε_G(λ) = η (1 − e^{−λ²})`, identical for both gates.
pub fn gate_error_rate(_gate: Gate, lambda: f64, eta: f64) -> f64 {
    eta * (1.0 - (-lambda * lambda).exp())
}

/// `E[(e^{−λ²})^k]` for `λ ~ N(0, σ²)`.
pub fn gaussian_x_moments(sigma: f64, k: u32) -> f64 {
    (1.0 + 2.0 * f64::from(k) * sigma * sigma).powf(-0.5)
}

/// A discrete distribution reproducing the moments `μ_1 … μ_{2m−1}`
/// (with `μ_0 = 1`), returned as `(node, weight)` pairs in ascending node order.
///
/// The three-term recurrence is obtained from the moments by the Chebyshev
/// algorithm; nodes and weights come from the eigen-decomposition of the
/// Jacobi matrix.
pub fn discretize_from_moments(moments: &[f64], m: usize) -> Result<Vec<(f64, f64)>> {
    if m == 0 {
        return Err(Error::InvalidParameter("support size must be at least 1".into()));
    }
    if moments.len() < 2 * m - 1 {
        return Err(Error::InvalidParameter(format!("{} moments given, {} needed for {m} points", moments.len(), 2 * m - 1)));
    }
    let mut mu = Vec::with_capacity(2 * m);
    mu.push(1.0);
    mu.extend_from_slice(&moments[..2 * m - 1]);
    check_hankel(&mu, m)?;
    let (alpha, beta) = chebyshev_recurrence(&mu, m)?;
    let mut jacobi = DMatrix::zeros(m, m);
    for k in 0..m {
        jacobi[(k, k)] = alpha[k];
        if k + 1 < m {
            let off = beta[k + 1].sqrt();
            jacobi[(k, k + 1)] = off;
            jacobi[(k + 1, k)] = off;
        }
    }
    let eig = jacobi.symmetric_eigen();
    let mut support: Vec<(f64, f64)> = (0..m).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2))).collect();
    support.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(support)
}

/// Cholesky of the Hankel matrix `[μ_{i+j}]`, i, j < m.
fn check_hankel(mu: &[f64], m: usize) -> Result<()> {
    let mut l = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let mut s = mu[i + j];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::HankelNotPositive { minor: i + 1, pivot: s });
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(())
}

fn chebyshev_recurrence(mu: &[f64], m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n2 = 2 * m;
    let mut alpha = vec![0.0; m];
    let mut beta = vec![0.0; m];
    alpha[0] = mu[1] / mu[0];
    beta[0] = mu[0];
    let mut prev = vec![0.0; n2];
    let mut cur = mu[..n2].to_vec();
    for k in 1..m {
        let mut next = vec![0.0; n2];
        for l in k..(n2 - k) {
            next[l] = cur[l + 1] - alpha[k - 1] * cur[l] - beta[k - 1] * prev[l];
        }
        alpha[k] = next[k + 1] / next[k] - cur[k] / cur[k - 1];
        beta[k] = next[k] / cur[k - 1];
        if !(beta[k] > 0.0) {
            return Err(Error::HankelNotPositive { minor: k + 1, pivot: beta[k] });
        }
        prev = cur;
        cur = next;
    }
    Ok((alpha, beta))
}

/// Composite Gauss-Legendre rule for the density of `|λ|`, `λ ~ N(0, σ²)`:
/// 20 geometrically graded panels on `[0, 12σ]` (the first starting at 0),
/// 10 nodes each. Returns `(λ, weight)` with λ ≥ 0.
pub fn dense_lambda_grid(sigma: f64) -> Result<Vec<(f64, f64)>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    const PANELS: usize = 20;
    const NODES: usize = 10;
    let rule = GaussLegendre::new(NODES).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let (lo, hi) = (1e-3 * sigma, 12.0 * sigma);
    let mut edges = vec![0.0];
    for i in 0..PANELS {
        edges.push(lo * (hi / lo).powf(i as f64 / (PANELS - 1) as f64));
    }
    let norm = 2.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let mut grid = Vec::with_capacity(PANELS * NODES);
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for &(t, wt) in rule.as_node_weight_pairs() {
            let lambda = mid + half * t;
            let density = norm * (-0.5 * lambda * lambda / (sigma * sigma)).exp();
            grid.push((lambda, wt * half * density));
        }
    }
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(grid)
}

/// `T′(Γ) = ½[[1+e^{−Γ}, 1−e^{−Γ}], [1−e^{−Γ}, 1+e^{−Γ}]]`.
pub fn transition_decay(gamma: f64) -> Result<DMatrix<f64>> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("decay rate must be nonnegative, got {gamma}")));
    }
    let e = (-gamma).exp();
    let (d, o) = ((1.0 + e) / 2.0, (1.0 - e) / 2.0);
    Ok(DMatrix::from_row_slice(2, 2, &[d, o, o, d]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub lambda: f64,
    /// `x = e^{−λ²}`.
    pub x: f64,
    pub weight: f64,
}

/// Low-frequency noise: a classical variable λ with a discrete distribution,
/// gate maps `E(η(1 − x_λ))[G]`, and per-gate environment transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowFreqModel {
    pub sigma: f64,
    pub eta: f64,
    pub m: usize,
    pub support: Vec<SupportPoint>,
    pub transition: BTreeMap<Gate, Transition>,
    pub gates: Vec<Gate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transition(#[serde(with = "serde_rows")] pub DMatrix<f64>);

impl LowFreqModel {
    fn from_support(sigma: f64, eta: f64, support: Vec<SupportPoint>) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("eta {eta} outside [0, 1]")));
        }
        let m = support.len();
        let transition = Gate::ALL.iter().map(|&g| (g, Transition(DMatrix::identity(m, m)))).collect();
        Ok(Self { sigma, eta, m, support, transition, gates: Gate::ALL.to_vec() })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.support.iter().map(|p| p.weight).collect()
    }

    /// `ε_G` at support point `i`.
    pub fn rate(&self, _gate: Gate, i: usize) -> f64 {
        self.eta * (1.0 - self.support[i].x)
    }

    /// `Σ_i w_i x_i^k`.
    pub fn x_moment(&self, k: u32) -> f64 {
        self.support.iter().map(|p| p.weight * p.x.powi(k as i32)).sum()
    }

    /// Per-λ system transfer matrices of gate `g`.
    pub fn per_gate(&self, gate: Gate) -> Result<Vec<TransferMatrix>> {
        self.check_gate(gate)?;
        (0..self.m).map(|i| noisy_gate_transfer(gate, self.rate(gate, i))).collect()
    }

    pub fn transition_for(&self, gate: Gate) -> Result<&DMatrix<f64>> {
        self.check_gate(gate)?;
        self.transition.get(&gate).map(|t| &t.0).ok_or_else(|| Error::UnknownGate(gate.to_string()))
    }

    /// Kraus-level block operation of gate `g`.
    pub fn block_operation(&self, gate: Gate) -> Result<BlockOperation> {
        self.check_gate(gate)?;
        let channels = (0..self.m).map(|i| noisy_gate(gate, self.rate(gate, i))).collect::<Result<Vec<_>>>()?;
        BlockOperation::new(channels, self.transition_for(gate)?.clone())
    }

    /// `E[λ_after λ_before]` across the gate sequence, for a model whose
    /// support is expressed in λ.
    pub fn lambda_correlation(&self, gates: &[Gate]) -> Result<f64> {
        let lam = DVector::from_iterator(self.m, self.support.iter().map(|p| p.lambda));
        let mut v = DVector::from_iterator(self.m, self.support.iter().map(|p| p.weight * p.lambda));
        for &g in gates {
            v = self.transition_for(g)? * v;
        }
        Ok(lam.dot(&v))
    }

    pub fn with_decay(mut self, decay: &BTreeMap<Gate, f64>) -> Result<Self> {
        if self.m != 2 {
            return Err(Error::InvalidParameter("decaying transitions need a two-point support".into()));
        }
        for (&g, &gamma) in decay {
            self.transition.insert(g, Transition(transition_decay(gamma)?));
        }
        Ok(self)
    }

    fn check_gate(&self, gate: Gate) -> Result<()> {
        if self.gates.contains(&gate) {
            Ok(())
        } else {
            Err(Error::UnknownGate(gate.to_string()))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.support.iter().map(|p| p.weight).sum();
        if self.support.iter().any(|p| p.weight < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("support weights sum to {total}")));
        }
        for t in self.transition.values() {
            for j in 0..t.0.ncols() {
                if (t.0.column(j).sum() - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("transition columns must sum to 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Moment-matched model: the variable `x = e^{−λ²}` discretized to `m`
/// points matching `E[x^k]`, k = 1 … 2m−1. Transitions are identity.
pub fn build_low_freq_model(sigma: f64, eta: f64, m: usize) -> Result<LowFreqModel> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let moments: Vec<f64> = (1..2 * m as u32).map(|k| gaussian_x_moments(sigma, k)).collect();
    let support = discretize_from_moments(&moments, m)?
        .into_iter()
        .map(|(x, weight)| SupportPoint { lambda: (-x.clamp(f64::MIN_POSITIVE, 1.0).ln()).sqrt(), x, weight })
        .collect();
    LowFreqModel::from_support(sigma, eta, support)
}

/// Reference model on the dense λ grid.
pub fn dense_model(sigma: f64, eta: f64) -> Result<LowFreqModel> {
    let support = dense_lambda_grid(sigma)?
        .into_iter()
        .map(|(lambda, weight)| SupportPoint { lambda, x: (-lambda * lambda).exp(), weight })
        .collect();
    let mut model = LowFreqModel::from_support(sigma, eta, support)?;
    model.m = model.support.len();
    Ok(model)
}

/// Second-order model: λ = ±σ with probability ½ each, with optional
/// per-gate decaying transitions.
pub fn second_order_model(sigma: f64, eta: f64, decay: Option<&BTreeMap<Gate, f64>>) -> Result<LowFreqModel> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let x = (-sigma * sigma).exp();
    let support = vec![SupportPoint { lambda: -sigma, x, weight: 0.5 }, SupportPoint { lambda: sigma, x, weight: 0.5 }];
    let model = LowFreqModel::from_support(sigma, eta, support)?;
    match decay {
        Some(d) => model.with_decay(d),
        None => Ok(model),
    }
}

/// Noise depending on the last operation: the environment register holds the
/// label of the previous gate, and gate χ applied after λ acts as
/// `O_S(χ, λ)` on the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextModel {
    pub gate_labels: Vec<Gate>,
    /// `per_pair[(χ, λ)]`, keyed as the two-letter string "χλ" when serialized.
    #[serde(with = "pair_map")]
    pub per_pair: BTreeMap<(Gate, Gate), TransferMatrix>,
    /// Distribution of the register before the first gate.
    pub initial: Vec<f64>,
}

mod pair_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::circuit::Gate;
    use crate::ptm::TransferMatrix;

    pub fn serialize<S: Serializer>(m: &BTreeMap<(Gate, Gate), TransferMatrix>, s: S) -> Result<S::Ok, S::Error> {
        let keyed: BTreeMap<String, &TransferMatrix> = m.iter().map(|((a, b), v)| (format!("{a}{b}"), v)).collect();
        keyed.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(Gate, Gate), TransferMatrix>, D::Error> {
        let keyed = BTreeMap::<String, TransferMatrix>::deserialize(d)?;
        keyed
            .into_iter()
            .map(|(k, v)| {
                let mut chars = k.chars().map(|c| c.to_string().parse::<Gate>());
                match (chars.next(), chars.next(), chars.next()) {
                    (Some(Ok(a)), Some(Ok(b)), None) => Ok(((a, b), v)),
                    _ => Err(serde::de::Error::custom(format!("bad gate pair key {k:?}"))),
                }
            })
            .collect()
    }
}

impl ContextModel {
    /// Depolarizing context noise `O_S(χ, λ) = E(ε_{χλ})[χ]`, uniform initial
    /// register.
    pub fn depolarizing(rates: &BTreeMap<(Gate, Gate), f64>) -> Result<Self> {
        let gate_labels = Gate::ALL.to_vec();
        let mut per_pair = BTreeMap::new();
        for &chi in &gate_labels {
            for &lambda in &gate_labels {
                let eps = rates
                    .get(&(chi, lambda))
                    .copied()
                    .ok_or_else(|| Error::InvalidParameter(format!("missing context rate for {chi}{lambda}")))?;
                per_pair.insert((chi, lambda), noisy_gate_transfer(chi, eps)?);
            }
        }
        let n = gate_labels.len();
        Ok(Self { gate_labels, per_pair, initial: vec![1.0 / n as f64; n] })
    }

    pub fn env_index(&self, label: Gate) -> Result<usize> {
        self.gate_labels.iter().position(|&g| g == label).ok_or_else(|| Error::UnknownGate(label.to_string()))
    }

    pub fn env_dim(&self) -> usize {
        self.gate_labels.len()
    }
}

/// Full transfer matrix (dimension `4m`) of `O(χ) = Σ_λ O_S(χ,λ) ⊗ |χ⟩⟨λ|`.
pub fn context_gate(chi: Gate, model: &ContextModel) -> Result<TransferMatrix> {
    let m = model.env_dim();
    let dst = model.env_index(chi)?;
    let mut out = DMatrix::zeros(4 * m, 4 * m);
    for (src, &lambda) in model.gate_labels.iter().enumerate() {
        let block = model.per_pair.get(&(chi, lambda)).ok_or_else(|| Error::UnknownGate(format!("{chi}{lambda}")))?;
        out.view_mut((4 * dst, 4 * src), (4, 4)).copy_from(&block.0);
    }
    Ok(TransferMatrix(out))
}

/// Composite `2m × 2m` density operator `ρ_S ⊗ Σ p_λ |λ⟩⟨λ|`.
pub fn product_state(rho_s: &CMatrix, weights: &[f64]) -> CMatrix {
    let m = weights.len();
    let mut env = CMatrix::zeros(m, m);
    for (l, p) in weights.iter().enumerate() {
        env[(l, l)] = Complex64::new(*p, 0.0);
    }
    env.kronecker(rho_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ptm::Basis;
    use approx::assert_abs_diff_eq;

    #[test]
    fn depolarizing_examples() {
        assert_eq!(depolarizing_channel(0.0).unwrap(), TransferMatrix::identity(4));
        assert!(depolarizing_channel(1.5).is_err());
        // Oracle: Kraus average ¼ Σ_P P ρ P.
        let b = Basis::pauli();
        let ch = Channel { kraus: (0..4).map(|i| pauli(i) * Complex64::new(0.5, 0.0)).collect() };
        let m = ch.transfer(&b).unwrap();
        assert!(crate::linalg::max_abs(&(m.0 - depolarizing_channel(1.0).unwrap().0)) < 1e-15);
        let half = depolarizing_kraus(0.5).unwrap().transfer(&b).unwrap();
        assert!(crate::linalg::max_abs(&(half.0 - depolarizing_channel(0.5).unwrap().0)) < 1e-15);
    }

    #[test]
    fn error_rate_examples() {
        assert_eq!(gate_error_rate(Gate::H, 0.0, 0.3), 0.0);
        assert_abs_diff_eq!(gate_error_rate(Gate::S, 40.0, 0.02), 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(gate_error_rate(Gate::H, 1.0, 1.0), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn uniform_two_point_rule() {
        let mu: Vec<f64> = (1..4).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        let s = discretize_from_moments(&mu, 2).unwrap();
        let d = 0.5 / 3f64.sqrt();
        assert_abs_diff_eq!(s[0].0, 0.5 - d, epsilon = 1e-14);
        assert_abs_diff_eq!(s[1].0, 0.5 + d, epsilon = 1e-14);
        assert_abs_diff_eq!(s[0].1, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s[1].1, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn single_point_and_bad_moments() {
        assert_eq!(discretize_from_moments(&[0.3], 1).unwrap(), vec![(0.3, 1.0)]);
        // Variance −0.01: second leading minor fails.
        let err = discretize_from_moments(&[0.5, 0.24, 0.1], 2).unwrap_err();
        assert!(matches!(err, Error::HankelNotPositive { minor: 2, .. }));
    }

    #[test]
    fn transition_decay_examples() {
        assert_eq!(transition_decay(0.0).unwrap(), DMatrix::identity(2, 2));
        let t = transition_decay(2f64.ln()).unwrap();
        assert_abs_diff_eq!(t[(0, 0)], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(t[(1, 0)], 0.25, epsilon = 1e-15);
        let inf = transition_decay(800.0).unwrap();
        assert!(inf.iter().all(|&x| x == 0.5));
        assert!(transition_decay(-1.0).is_err());
    }

    #[test]
    fn second_order_moments_and_correlation() {
        let sigma = 0.7;
        let mut decay = BTreeMap::new();
        decay.insert(Gate::H, 0.1);
        decay.insert(Gate::S, 0.1);
        let m = second_order_model(sigma, 0.02, Some(&decay)).unwrap();
        let mean: f64 = m.support.iter().map(|p| p.weight * p.lambda).sum();
        let var: f64 = m.support.iter().map(|p| p.weight * p.lambda * p.lambda).sum();
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(var, sigma * sigma, epsilon = 1e-15);
        let corr = m.lambda_correlation(&[Gate::H; 5]).unwrap();
        assert_abs_diff_eq!(corr, sigma * sigma * (-0.5f64).exp(), epsilon = 1e-14);
        let flat = second_order_model(sigma, 0.02, None).unwrap();
        assert_abs_diff_eq!(flat.lambda_correlation(&[Gate::S; 9]).unwrap(), sigma * sigma, epsilon = 1e-15);
    }

    #[test]
    fn one_point_model_is_constant_depolarizing() {
        let m = build_low_freq_model(0.8, 0.1, 1).unwrap();
        let eps = 0.1 * (1.0 - gaussian_x_moments(0.8, 1));
        assert_abs_diff_eq!(m.rate(Gate::H, 0), eps, epsilon = 1e-15);
        let zero = build_low_freq_model(1.0, 0.0, 5).unwrap();
        for g in Gate::ALL {
            for t in zero.per_gate(g).unwrap() {
                assert_eq!(t, crate::ptm::ideal_ptm(g, 4).unwrap());
            }
        }
    }

    #[test]
    fn dense_grid_integrates_gaussian_moments() {
        for sigma in [0.5, 1.0, 2.0] {
            let g = dense_lambda_grid(sigma).unwrap();
            assert_eq!(g.len(), 200);
            for n in [0u32, 1, 9, 50, 100] {
                let q: f64 = g.iter().map(|(l, w)| w * (-(n as f64) * l * l).exp()).sum();
                assert_abs_diff_eq!(q, gaussian_x_moments(sigma, n), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn model_json_round_trip() {
        let m = build_low_freq_model(1.0, 0.02, 3).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"support\"") && s.contains("\"transition\""));
        assert_eq!(serde_json::from_str::<LowFreqModel>(&s).unwrap(), m);
        let mut rates = BTreeMap::new();
        for a in Gate::ALL {
            for b in Gate::ALL {
                rates.insert((a, b), 0.01 * (1 + a.index() + 2 * b.index()) as f64);
            }
        }
        let c = ContextModel::depolarizing(&rates).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ContextModel>(&s).unwrap(), c);
    }
}

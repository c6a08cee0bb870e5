//! Derived example values checked against oracles computed here, independently
//! of the library code paths.

use std::collections::BTreeMap;

use approx::{assert_abs_diff_eq, assert_relative_eq};
use nalgebra::{Complex, DMatrix, DVector, Matrix2};

use lot_core::bounds::random_sequences;
use lot_core::device::{analytic_survival, random_identity_sequences, Device, Shots};
use lot_core::exact_lot::{all_sequences, collect_data, gauge_reconstruct, predict, select_fiducials, verify_factorization};
use lot_core::lim::{
    collect_trial_data, gauge_fit_to_ideal, ideal_differences, ideal_ptms, lim_reconstruct, singular_spectrum, svd_truncate,
    trial_sequences, GaugeFitConfig, TrialPreset,
};
use lot_core::mle::{collect_records, fit, tomography_circuits, FitConfig};
use lot_core::noise::{
    build_low_freq_model, depolarizing_channel, discretize_from_moments, gate_error_rate, gaussian_x_moments, transition_decay,
    ContextModel,
};
use lot_core::ptm::{dualize_observable, expectation, to_cmatrix, transfer_of_unitary, vectorize_state};
use lot_core::{Basis, Circuit, Gate};

type C = Complex<f64>;
type M2 = Matrix2<C>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn paulis() -> [M2; 4] {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [M2::new(l, o, o, l), M2::new(o, l, l, o), M2::new(o, -i, i, o), M2::new(l, o, o, -l)]
}

fn hadamard() -> M2 {
    let r = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    M2::new(r, r, r, -r)
}

fn phase() -> M2 {
    M2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0))
}

fn unitary(g: Gate) -> M2 {
    match g {
        Gate::H => hadamard(),
        Gate::S => phase(),
    }
}

fn ket0() -> M2 {
    M2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0))
}

fn depolarize(rho: &M2, eps: f64) -> M2 {
    let twirl: M2 = paulis().iter().map(|p| p * rho * p).sum::<M2>() * c(0.25, 0.0);
    rho * c(1.0 - eps, 0.0) + twirl * c(eps, 0.0)
}

fn noisy(g: Gate, eps: f64, rho: &M2) -> M2 {
    let u = unitary(g);
    depolarize(&(u * rho * u.adjoint()), eps)
}

fn bloch(rho: &M2) -> [f64; 4] {
    let p = paulis();
    [0, 1, 2, 3].map(|i| (p[i] * rho).trace().re)
}

#[test]
fn vectors_by_direct_traces() {
    let basis = Basis::pauli();
    let h = c(0.5, 0.0);
    let plus = M2::new(h, h, h, h);
    let v = vectorize_state(&to_cmatrix(&plus), &basis).unwrap();
    let oracle = bloch(&plus);
    for i in 0..4 {
        assert_abs_diff_eq!(v.0[i], oracle[i], epsilon = 1e-15);
    }
    assert_eq!(oracle, [1.0, 1.0, 0.0, 0.0]);
    let q = dualize_observable(&to_cmatrix(&ket0()), &basis).unwrap();
    let zero = bloch(&ket0());
    for i in 0..4 {
        assert_abs_diff_eq!(q.0[i], zero[i] / 2.0, epsilon = 1e-15);
    }
}

#[test]
fn hssh_expectation_matches_dense_product() {
    let basis = Basis::pauli();
    let seq = [Gate::H, Gate::S, Gate::S, Gate::H];
    let mut u = M2::identity();
    for g in seq {
        u = unitary(g) * u;
    }
    let dense = (ket0() * u * ket0() * u.adjoint()).trace().re;
    let transfers: Vec<_> = seq.iter().map(|&g| transfer_of_unitary(&to_cmatrix(&g.unitary()), &basis).unwrap()).collect();
    let rho = vectorize_state(&to_cmatrix(&ket0()), &basis).unwrap();
    let q = dualize_observable(&to_cmatrix(&ket0()), &basis).unwrap();
    let got = expectation(&q, &transfers, &rho).unwrap();
    assert_abs_diff_eq!(got, dense, epsilon = 1e-15);
    assert_abs_diff_eq!(got, 0.0, epsilon = 1e-15);
}

#[test]
fn depolarizing_matches_kraus_average() {
    for eps in [1.0, 0.5] {
        let t = depolarizing_channel(eps).unwrap();
        for (j, p) in paulis().iter().enumerate() {
            let image = bloch(&depolarize(&(p * c(0.5, 0.0)), eps));
            for i in 0..4 {
                assert_abs_diff_eq!(t.0[(i, j)], image[i], epsilon = 1e-15);
            }
        }
    }
    assert_eq!(depolarizing_channel(0.5).unwrap().0, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5, 0.5, 0.5])));
}

#[test]
fn error_rate_direct_evaluation() {
    assert_abs_diff_eq!(gate_error_rate(Gate::H, 1.0, 1.0), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
    assert_abs_diff_eq!(gate_error_rate(Gate::S, 1.0, 1.0), 0.63212, epsilon = 1e-5);
}

fn simpson_gaussian_moment(sigma: f64, k: u32) -> f64 {
    let n = 40_000;
    let (a, b) = (-12.0 * sigma, 12.0 * sigma);
    let h = (b - a) / n as f64;
    let f = |x: f64| (-(k as f64) * x * x).exp() * (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn gaussian_moments_match_numerical_integration() {
    for (k, expected) in [(1, 3f64.powf(-0.5)), (4, 1.0 / 3.0)] {
        let q = simpson_gaussian_moment(1.0, k);
        assert_abs_diff_eq!(q, expected, epsilon = 1e-10);
        assert_abs_diff_eq!(gaussian_x_moments(1.0, k), q, epsilon = 1e-10);
    }
}

#[test]
fn two_point_rule_is_gauss_legendre() {
    let moments: Vec<f64> = (1..=3).map(|k| 1.0 / (k as f64 + 1.0)).collect();
    let rule = discretize_from_moments(&moments, 2).unwrap();
    let r = 1.0 / (2.0 * 3f64.sqrt());
    assert_abs_diff_eq!(rule[0].0, 0.5 - r, epsilon = 1e-12);
    assert_abs_diff_eq!(rule[1].0, 0.5 + r, epsilon = 1e-12);
    assert_abs_diff_eq!(rule[0].1, 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(rule[1].1, 0.5, epsilon = 1e-12);
}

#[test]
fn five_point_rule_by_direct_summation() {
    let moments: Vec<f64> = (1..=9).map(|k| gaussian_x_moments(1.0, k)).collect();
    let rule = discretize_from_moments(&moments, 5).unwrap();
    for k in 1..=9 {
        let sum: f64 = rule.iter().map(|(x, w)| w * x.powi(k)).sum();
        assert_abs_diff_eq!(sum, simpson_gaussian_moment(1.0, k as u32), epsilon = 1e-10);
    }
}

#[test]
fn decay_matrix_values() {
    let t = transition_decay(std::f64::consts::LN_2).unwrap();
    let oracle = |g: f64| (0.5 * (1.0 + (-g).exp()), 0.5 * (1.0 - (-g).exp()));
    let (d, o) = oracle(std::f64::consts::LN_2);
    assert_abs_diff_eq!(t[(0, 0)], d, epsilon = 1e-15);
    assert_abs_diff_eq!(t[(0, 1)], o, epsilon = 1e-15);
    assert_abs_diff_eq!(t[(0, 0)], 0.75, epsilon = 1e-15);
    assert_abs_diff_eq!(t[(1, 0)], 0.25, epsilon = 1e-15);
    let inf = transition_decay(80.0).unwrap();
    assert!(inf.iter().all(|&x| (x - 0.5).abs() < 1e-15));
}

#[test]
fn context_noise_matches_block_simulation() {
    let rates: BTreeMap<(Gate, Gate), f64> =
        [((Gate::H, Gate::H), 0.01), ((Gate::H, Gate::S), 0.03), ((Gate::S, Gate::H), 0.07), ((Gate::S, Gate::S), 0.13)].into();
    let model = ContextModel::depolarizing(&rates).unwrap();
    let dev = Device::from_context(&model).unwrap();
    for seq in [[Gate::H, Gate::S], [Gate::S, Gate::S], [Gate::S, Gate::H]] {
        // Register starts uniform over gate labels.
        let mut rho = M2::zeros();
        for prev in Gate::ALL {
            let first = noisy(seq[0], rates[&(seq[0], prev)], &ket0());
            rho += noisy(seq[1], rates[&(seq[1], seq[0])], &first) * c(0.5, 0.0);
        }
        let oracle = bloch(&rho);
        let v = dev.propagate_state(&Circuit::new(seq.to_vec())).unwrap().0;
        let at = 4 * model.env_index(seq[1]).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(v[at + i], oracle[i], epsilon = 1e-14);
        }
        let other = 4 - at;
        assert!(v.rows(other, 4).iter().all(|x| x.abs() < 1e-15));
    }
}

fn preserves_zero_dense(circuit: &Circuit) -> bool {
    let mut psi = nalgebra::Vector2::new(c(1.0, 0.0), c(0.0, 0.0));
    for &g in &circuit.gates {
        psi = unitary(g) * psi;
    }
    (psi[0].norm() - 1.0).abs() < 1e-9
}

#[test]
fn identity_sequences_by_state_oracle() {
    let one = random_identity_sequences(1, 20, 3).unwrap();
    assert!(one.iter().all(|c| c.to_string() == "(S)"));
    let two = random_identity_sequences(2, 20, 3).unwrap();
    assert!(two.iter().all(|c| ["(S,S)", "(H,H)"].contains(&c.to_string().as_str())));
    for n in [3, 6, 11] {
        for c in random_identity_sequences(n, 30, 5).unwrap() {
            assert!(preserves_zero_dense(&c));
        }
    }
}

#[test]
fn survival_formula_value() {
    assert_abs_diff_eq!(analytic_survival(4, 1.0), 2.0 / 3.0, epsilon = 1e-15);
}

fn device(sigma: f64, eta: f64, m: usize) -> Device {
    Device::from_low_freq(&build_low_freq_model(sigma, eta, m).unwrap()).unwrap()
}

#[test]
fn undersized_fiducials_break_factorization() {
    let dev = device(1.0, 0.02, 2);
    let fid = select_fiducials(&dev, &all_sequences(6), 4).unwrap();
    let data = collect_data(&dev, &fid, &Gate::ALL, Shots::Exact, 0).unwrap();
    let seqs = random_sequences(&Gate::ALL, 100, 20, 8).unwrap();
    let report = verify_factorization(&data, &dev, &seqs).unwrap();
    assert!(report.max_residual > 1e-6, "residual {}", report.max_residual);
}

#[test]
fn any_gauge_predicts_the_simulator() {
    let dev = device(1.0, 0.02, 2);
    let fid = select_fiducials(&dev, &all_sequences(6), 7).unwrap();
    let data = collect_data(&dev, &fid, &Gate::ALL, Shots::Exact, 0).unwrap();
    let circuits = random_sequences(&Gate::ALL, 100, 20, 12).unwrap();
    let gauges = [
        DMatrix::identity(7, 7),
        data.gram.clone(),
        DMatrix::from_fn(7, 7, |i, j| if i == j { 2.0 } else { 0.1 * ((i * 7 + j) as f64).sin() }),
    ];
    for m_hat_in in gauges {
        let model = gauge_reconstruct(&data, &m_hat_in, 1e12).unwrap();
        for c in &circuits {
            assert_abs_diff_eq!(predict(&model, c).unwrap(), dev.exact_mean(c).unwrap(), epsilon = 1e-9);
        }
    }
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let mut e: Vec<(f64, f64)> = m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    e.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    e
}

#[test]
fn noiseless_d4_gates_are_similar_to_ideal() {
    let dev = device(1.0, 0.0, 1);
    let spec = trial_sequences(&TrialPreset::D4, 0).unwrap();
    let data = collect_trial_data(&dev, &spec, Shots::Exact, 0).unwrap();
    let spectrum = singular_spectrum(&data.gram);
    assert!(spectrum.iter().take(4).all(|&s| s > 0.1));
    let t = svd_truncate(&data.gram, &data.gate_mats, 4).unwrap();
    let model = lim_reconstruct(&t, &DMatrix::identity(4, 4)).unwrap();
    let ideal = ideal_ptms(4).unwrap();
    for g in Gate::ALL {
        let a = sorted_eigenvalues(model.gate(g).unwrap());
        let b = sorted_eigenvalues(&ideal[&g]);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x.0, y.0, epsilon = 1e-8);
            assert_abs_diff_eq!(x.1, y.1, epsilon = 1e-8);
        }
    }
}

#[test]
fn d7_trial_length_histogram() {
    let spec = trial_sequences(&TrialPreset::D7, 0).unwrap();
    let mut hist = BTreeMap::new();
    for s in &spec.sequences {
        *hist.entry(s.len()).or_insert(0usize) += 1;
    }
    for len in 0..=5 {
        assert_eq!(hist[&len], 1 << len);
    }
    for len in 6..=20 {
        assert_eq!(hist[&len], 4);
    }
    assert_eq!(spec.sequences.len(), 1 + 2 + 4 + 8 + 16 + 32 + 60);
}

#[test]
fn trial_spectra() {
    let spec = trial_sequences(&TrialPreset::D7, 0).unwrap();
    let noiseless = singular_spectrum(&collect_trial_data(&device(1.0, 0.0, 1), &spec, Shots::Exact, 0).unwrap().gram);
    assert!(noiseless[3] > 1e-3 * noiseless[0]);
    assert!(noiseless[4..].iter().all(|&s| s <= 1e-10 * noiseless[0]));
    let two = singular_spectrum(&collect_trial_data(&device(1.0, 0.02, 2), &spec, Shots::Exact, 0).unwrap().gram);
    assert!(two[7..].iter().all(|&s| s <= 1e-10 * two[0]));
    let actual = singular_spectrum(&collect_trial_data(&device(1.0, 0.02, 5), &spec, Shots::Exact, 0).unwrap().gram);
    assert!(actual[7..].iter().all(|&s| s <= 1e-3 * actual[0]));
}

#[test]
fn d7_difference_matrices_are_small() {
    let dev = device(1.0, 0.02, 5);
    let spec = trial_sequences(&TrialPreset::D7, 0).unwrap();
    let data = collect_trial_data(&dev, &spec, Shots::Exact, 0).unwrap();
    let t = svd_truncate(&data.gram, &data.gate_mats, 7).unwrap();
    let ideal = ideal_ptms(7).unwrap();
    let fitted = gauge_fit_to_ideal(&t, &ideal, &GaugeFitConfig::default()).unwrap();
    for diff in ideal_differences(&fitted.model, &ideal).unwrap().values() {
        assert!(diff.abs().max() <= 0.05);
    }
}

#[test]
fn two_point_fit_beats_one_point_fit() {
    let spec = trial_sequences(&TrialPreset::D7, 0).unwrap();
    let fid = spec.fiducials().unwrap();
    let circuits = tomography_circuits(&fid.prep_sequences, &fid.meas_sequences);
    let records = collect_records(&device(1.0, 0.02, 5), &circuits, Shots::Exact, 0).unwrap();
    let config = FitConfig::default();
    let one = fit(&records, 1, &config, 1).unwrap();
    let two = fit(&records, 2, &config, 1).unwrap();
    assert!(two.nll < one.nll);
    assert_relative_eq!(two.params.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
}

/// At full noise strength the survival is `(1 + E[x^N])/2`, so an m-point
/// rule is exact for `N <= 2m - 1` gates and not beyond.
#[test]
fn m_point_rule_is_exact_up_to_its_moment_order() {
    let closed_form = |n: usize| 0.5 * (1.0 + (1.0 + 2.0 * n as f64).powf(-0.5));
    for m in 1..=5 {
        let dev = Device::from_low_freq(&build_low_freq_model(1.0, 1.0, m).unwrap()).unwrap();
        for n in 0..=2 * m {
            let circuit = random_identity_sequences(n, 1, 5).unwrap().remove(0);
            let err = (dev.exact_mean(&circuit).unwrap() - closed_form(n)).abs();
            if n < 2 * m {
                assert!(err < 1e-13, "m {m}, N {n}: {err:e}");
            } else {
                assert!(err > 1e-7, "m {m}, N {n}: {err:e}");
            }
        }
    }
}

//! Property tests for the model invariants.

use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;

use lot_core::bounds::{empirical_bound_check, lim_bound, random_subspace, sequence_bound, BoundModel, NormKind};
use lot_core::device::{analytic_survival, random_identity_sequences, survival_curve, Device, MeasurementRecord, Shots};
use lot_core::exact_lot::{all_sequences, collect_data, enlarged_gram, gauge_reconstruct, gauge_transform, predict, select_fiducials};
use lot_core::lim::{
    collect_trial_data, gauge_fit_to_ideal, ideal_ptms, lim_reconstruct, rho_in_formulas, svd_truncate, trial_sequences, GaugeFitConfig,
    TrialPreset,
};
use lot_core::linalg::{condition_number, numerical_rank};
use lot_core::mle::{induced_error_model, model_predict, negative_log_likelihood, GateRates, ParamModel};
use lot_core::noise::{build_low_freq_model, noisy_gate, transition_decay, ContextModel};
use lot_core::ptm::{expectation, seven_dim_ptm, transfer_of_unitary, CMatrix};
use lot_core::{Basis, BlockOperation, Channel, Circuit, DualVec, Gate, SevenBasis, StateVec};

type C = Complex<f64>;

fn su2(a: f64, b: f64, g: f64, phase: f64) -> CMatrix {
    let e = |t: f64| C::from_polar(1.0, t);
    let (cb, sb) = ((b / 2.0).cos(), (b / 2.0).sin());
    let p = e(phase);
    CMatrix::from_row_slice(
        2,
        2,
        &[p * e(-(a + g) / 2.0) * cb, -p * e(-(a - g) / 2.0) * sb, p * e((a - g) / 2.0) * sb, p * e((a + g) / 2.0) * cb],
    )
}

fn angles() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-3.2..3.2f64, 0.0..3.2f64, -3.2..3.2f64, -3.2..3.2f64)
}

fn circuit(max_len: usize) -> impl Strategy<Value = Circuit> {
    prop::collection::vec(prop_oneof![Just(Gate::H), Just(Gate::S)], 0..=max_len).prop_map(Circuit::new)
}

fn kraus_apply(ch: &Channel, rho: &CMatrix) -> CMatrix {
    ch.kraus.iter().map(|k| k * rho * k.adjoint()).fold(CMatrix::zeros(2, 2), |a, b| a + b)
}

fn device(sigma: f64, eta: f64, m: usize) -> Device {
    Device::from_low_freq(&build_low_freq_model(sigma, eta, m).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_orthogonality(m in 1usize..6) {
        let basis = Basis::qubit_with_environment(m);
        for (a, ea) in basis.elements().iter().enumerate() {
            for (b, eb) in basis.elements().iter().enumerate() {
                let t = (&ea.matrix * &eb.matrix).trace();
                let target = if a == b { basis.norm() } else { 0.0 };
                prop_assert!((t - C::new(target, 0.0)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn composition_homomorphism(u in angles(), v in angles()) {
        let basis = Basis::pauli();
        let (u, v) = (su2(u.0, u.1, u.2, u.3), su2(v.0, v.1, v.2, v.3));
        let tuv = transfer_of_unitary(&(&u * &v), &basis).unwrap();
        let prod = &transfer_of_unitary(&u, &basis).unwrap().0 * &transfer_of_unitary(&v, &basis).unwrap().0;
        prop_assert!((tuv.0 - prod).abs().max() <= 1e-12);
    }

    #[test]
    fn expectation_matches_dense_simulation(
        ops in prop::collection::vec((angles(), angles(), 0.0..1.0f64), 1..6),
        state in angles(),
        mix in 0.0..1.0f64,
        q in prop::array::uniform4(-1.0..1.0f64),
    ) {
        let basis = Basis::pauli();
        let channels: Vec<Channel> = ops
            .iter()
            .map(|(a, b, p)| {
                Channel::mixture(&[
                    (*p, Channel::unitary(su2(a.0, a.1, a.2, a.3))),
                    (1.0 - p, Channel::unitary(su2(b.0, b.1, b.2, b.3))),
                ])
                .unwrap()
            })
            .collect();
        let u = su2(state.0, state.1, state.2, state.3);
        let pure = &u * CMatrix::from_row_slice(2, 2, &[C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)]) * u.adjoint();
        let rho = pure * C::new(mix, 0.0) + CMatrix::identity(2, 2) * C::new(0.5 * (1.0 - mix), 0.0);
        let obs: CMatrix = (0..4).map(|i| lot_core::ptm::pauli(i) * C::new(q[i], 0.0)).fold(CMatrix::zeros(2, 2), |a, b| a + b);

        let mut dense = rho.clone();
        for ch in &channels {
            dense = kraus_apply(ch, &dense);
        }
        let oracle = (&obs * dense).trace().re;

        let transfers: Vec<_> = channels.iter().map(|c| c.transfer(&basis).unwrap()).collect();
        let s = lot_core::ptm::vectorize_state(&rho, &basis).unwrap();
        let d = lot_core::ptm::dualize_observable(&obs, &basis).unwrap();
        prop_assert!((expectation(&d, &transfers, &s).unwrap() - oracle).abs() <= 1e-12);
    }

    #[test]
    fn seven_dim_ptm_is_linear_in_mixtures(
        p in 0.05..0.95f64,
        a in 0.0..1.0f64,
        rates in prop::array::uniform2(0.0..0.5f64),
        rot in angles(),
        g in prop_oneof![Just(Gate::H), Just(Gate::S)],
    ) {
        let basis = SevenBasis::seven(p, 1.0 - p).unwrap();
        let first: Vec<Channel> = rates.iter().map(|&e| noisy_gate(g, e).unwrap()).collect();
        let u = Channel::unitary(su2(rot.0, rot.1, rot.2, rot.3));
        let second = vec![u.clone(), u];
        let mixed: Vec<Channel> = first
            .iter()
            .zip(&second)
            .map(|(x, y)| Channel::mixture(&[(a, x.clone()), (1.0 - a, y.clone())]).unwrap())
            .collect();
        let op = |chs: Vec<Channel>| BlockOperation::new(chs, DMatrix::identity(2, 2)).unwrap();
        let lhs = seven_dim_ptm(&op(mixed), &basis).unwrap().0;
        let rhs = seven_dim_ptm(&op(first), &basis).unwrap().0 * a + seven_dim_ptm(&op(second), &basis).unwrap().0 * (1.0 - a);
        prop_assert!((lhs - rhs).abs().max() <= 1e-12);
    }

    #[test]
    fn transition_semigroup(a in 0.0..10.0f64, b in 0.0..10.0f64) {
        let lhs = transition_decay(a).unwrap() * transition_decay(b).unwrap();
        prop_assert!((lhs - transition_decay(a + b).unwrap()).abs().max() <= 1e-12);
    }

    #[test]
    fn moment_fidelity_and_weights(sigma in 0.5..2.0f64, eta in 0.0..1.0f64, m in 1usize..=5) {
        let model = build_low_freq_model(sigma, eta, m).unwrap();
        let w: Vec<f64> = model.support.iter().map(|s| s.weight).collect();
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for k in 1..(2 * m as u32) {
            let got: f64 = model.support.iter().map(|s| s.weight * s.x.powi(k as i32)).sum();
            let expected = (1.0 + 2.0 * f64::from(k) * sigma * sigma).powf(-0.5);
            prop_assert!((got - expected).abs() <= 1e-10, "k={} got {} expected {}", k, got, expected);
        }
    }

    #[test]
    fn generated_transfer_matrices_preserve_trace(sigma in 0.5..2.0f64, eta in 0.0..1.0f64, m in 1usize..=5, rates in prop::array::uniform4(0.0..1.0f64)) {
        let model = build_low_freq_model(sigma, eta, m).unwrap();
        let mut mats = Vec::new();
        for g in Gate::ALL {
            mats.extend(model.per_gate(g).unwrap());
        }
        let ctx = ContextModel::depolarizing(&[
            ((Gate::H, Gate::H), rates[0]),
            ((Gate::H, Gate::S), rates[1]),
            ((Gate::S, Gate::H), rates[2]),
            ((Gate::S, Gate::S), rates[3]),
        ].into()).unwrap();
        mats.extend(ctx.per_pair.values().cloned());
        for t in mats {
            prop_assert!(t.trace_preservation_defect() <= 1e-12);
            prop_assert!((t.0[(0, 0)] - 1.0).abs() <= 1e-12 && t.0.row(0).iter().skip(1).all(|x| x.abs() <= 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn survival_is_non_increasing(sigma in 0.5..2.0f64, eta in 0.0..1.0f64, m in 1usize..=5, seed in 0u64..1000) {
        let grid: Vec<usize> = (0..=40).collect();
        let curve = survival_curve(&device(sigma, eta, m), &grid, 5, Shots::Exact, seed).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1].mean <= w[0].mean + 1e-12);
        }
    }

    #[test]
    fn cubature_survival_is_exact_up_to_nine_gates(sigma in 0.5..2.0f64, seed in 0u64..1000) {
        let grid: Vec<usize> = (0..=9).collect();
        for p in survival_curve(&device(sigma, 1.0, 5), &grid, 10, Shots::Exact, seed).unwrap() {
            prop_assert!((p.mean - analytic_survival(p.n_gates, sigma)).abs() <= 1e-12);
        }
    }

    #[test]
    fn gauge_transform_keeps_predictions(seed in 0u64..10_000, scale in 0.05..0.5f64, circuits in prop::collection::vec(circuit(20), 10)) {
        let dev = device(1.0, 0.02, 2);
        let fid = select_fiducials(&dev, &all_sequences(6), 7).unwrap();
        let data = collect_data(&dev, &fid, &Gate::ALL, Shots::Exact, 0).unwrap();
        let model = gauge_reconstruct(&data, &DMatrix::identity(7, 7), 1e12).unwrap();
        let mut x = seed;
        let s = DMatrix::identity(7, 7) + DMatrix::from_fn(7, 7, |_, _| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            scale * ((x >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        });
        let cond = condition_number(&s);
        let moved = gauge_transform(&model, &s).unwrap();
        for c in &circuits {
            prop_assert!((predict(&moved, c).unwrap() - predict(&model, c).unwrap()).abs() <= 1e-10 * cond);
        }
    }

    #[test]
    fn rho_in_formulas_agree(m in 1usize..=3, shots in prop_oneof![Just(Shots::Exact), Just(Shots::Sampled(500)), Just(Shots::Sampled(20_000))], seed in 0u64..1000) {
        let dev = device(1.0, 0.05, m);
        // Both formulas need an invertible truncated Gram matrix, so d may not
        // exceed the device rank 3m + 1.
        for (preset, d) in [(TrialPreset::D4, 4), (TrialPreset::D7, 7)].into_iter().filter(|&(_, d)| d <= 3 * m + 1) {
            let spec = trial_sequences(&preset, seed).unwrap();
            let data = collect_trial_data(&dev, &spec, shots, seed).unwrap();
            let t = svd_truncate(&data.gram, &data.gate_mats, d).unwrap();
            for m_hat_in in [DMatrix::identity(d, d), DMatrix::from_fn(d, d, |i, j| if i == j { 1.5 } else { 0.1 / (1 + i + j) as f64 })] {
                let (a, b) = rho_in_formulas(&t, &m_hat_in).unwrap();
                prop_assert!((a - b).abs().max() <= 1e-10);
            }
        }
    }

    #[test]
    fn label_permutation_symmetry(
        w in prop::collection::vec(0.05..1.0f64, 2..=4),
        r in prop::collection::vec((0.0..0.2f64, 0.0..0.2f64), 4),
        circuits in prop::collection::vec(circuit(24), 8),
        shift in 1usize..4,
    ) {
        let total: f64 = w.iter().sum();
        let weights: Vec<f64> = w.iter().map(|x| x / total).collect();
        let rates: Vec<GateRates> = r.iter().take(weights.len()).map(|&(h, s)| GateRates { h, s }).collect();
        let model = ParamModel::new(weights.clone(), rates.clone()).unwrap();
        let l = weights.len();
        let perm: Vec<usize> = (0..l).map(|i| (i + shift) % l).collect();
        let permuted = ParamModel::new(perm.iter().map(|&i| weights[i]).collect(), perm.iter().map(|&i| rates[i]).collect()).unwrap();
        for c in &circuits {
            prop_assert!((model_predict(&model, c).unwrap() - model_predict(&permuted, c).unwrap()).abs() <= 1e-14);
        }
        prop_assert_eq!(model.canonical(), permuted.canonical());
    }

    #[test]
    fn induced_model_predicts_like_parameters(
        p in 0.05..0.95f64,
        r in prop::array::uniform4(0.0..0.2f64),
        circuits in prop::collection::vec(circuit(30), 10),
    ) {
        let model = ParamModel::new(vec![p, 1.0 - p], vec![GateRates { h: r[0], s: r[1] }, GateRates { h: r[2], s: r[3] }]).unwrap();
        let induced = induced_error_model(&model).unwrap();
        for c in &circuits {
            prop_assert!((predict(&induced, c).unwrap() - model_predict(&model, c).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn nll_scales_with_sigma(scale in 0.1..10.0f64, circuits in prop::collection::vec((circuit(12), 0.0..1.0f64, 1e-4..1e-2f64), 1..20)) {
        let model = ParamModel::new(vec![1.0], vec![GateRates { h: 0.01, s: 0.02 }]).unwrap();
        let records = |k: f64| -> Vec<MeasurementRecord> {
            circuits
                .iter()
                .map(|(c, mean, var)| MeasurementRecord { circuit: c.clone(), mean: *mean, variance: var * k * k, shots: Shots::Sampled(100) })
                .collect()
        };
        let base = negative_log_likelihood(&model, &records(1.0), 1e-12).unwrap();
        let scaled = negative_log_likelihood(&model, &records(scale), 1e-12).unwrap();
        prop_assert!((scaled * scale * scale - base).abs() <= 1e-10 * base.max(1.0));
    }

    #[test]
    fn bound_formulas_are_monotone(
        nq in 0.0..3.0f64, nr in 0.0..3.0f64, no in 0.0..1.5f64,
        e in 0.0..0.5f64, de in 0.0..0.5f64, eg in 0.0..0.1f64, deg in 0.0..0.1f64,
        n in 1usize..30,
    ) {
        let tol = 1e-12;
        let s = sequence_bound(nq, nr, no, e, n);
        prop_assert!(sequence_bound(nq, nr, no, e + de, n) >= s - tol);
        prop_assert!(sequence_bound(nq, nr, no, e, n + 1) >= s - tol || no < 1.0);
        let l = lim_bound(nq, nr, no, eg, e, n);
        prop_assert!(lim_bound(nq, nr, no, eg + deg, e, n) >= l - tol);
        prop_assert!(lim_bound(nq, nr, no, eg, e + de, n) >= l - tol);
        prop_assert!(lim_bound(nq, nr, no, eg, e, n + 1) >= l - tol || no < 1.0);
        prop_assert!(s >= -tol && l >= -tol);
    }

    #[test]
    fn empirical_bound_never_violated(k in 1usize..12, seed in 0u64..10_000, kind in prop_oneof![Just(NormKind::Trace), Just(NormKind::Frobenius)]) {
        let dev = device(1.0, 0.05, 3);
        let spec = trial_sequences(&TrialPreset::D4, 0).unwrap();
        let model = BoundModel::from_device(&dev, &spec.fiducials().unwrap()).unwrap();
        let p = random_subspace(model.dim(), k, seed).unwrap();
        let report = empirical_bound_check(&model, &p, 30, 20, seed, kind);
        prop_assert!(report.is_ok(), "{:?}", report.err());
    }
}

#[test]
fn log_survival_shape() {
    let grid: Vec<usize> = (0..=60).collect();
    let log = |dev: &Device| -> Vec<f64> {
        survival_curve(dev, &grid, 5, Shots::Exact, 1).unwrap().iter().map(|p| (2.0 * p.mean - 1.0).ln()).collect()
    };
    let correlated = log(&device(1.0, 1.0, 5));
    assert!(correlated.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] > 0.0));
    let one_point = log(&device(1.0, 0.3, 1));
    assert!(one_point.windows(3).all(|w| (w[2] - 2.0 * w[1] + w[0]).abs() <= 1e-12));
}

#[test]
fn anchors_reproduce_data() {
    // Anchor error is rounding of order cond(g)·ε; this dataset has cond(g) ≈ 4e2.
    let dev = device(1.0, 0.3, 2);
    let fid = select_fiducials(&dev, &all_sequences(6), 7).unwrap();
    let data = collect_data(&dev, &fid, &Gate::ALL, Shots::Exact, 0).unwrap();
    let m_hat_in = DMatrix::from_fn(7, 7, |i, j| if i == j { 1.0 } else { 0.05 * (i as f64 - j as f64) });
    let model = gauge_reconstruct(&data, &m_hat_in, 1e12).unwrap();
    for k in 0..7 {
        for i in 0..7 {
            assert!((predict(&model, &fid.cell(k, i, &[])).unwrap() - data.gram[(k, i)]).abs() <= 1e-12);
            for g in Gate::ALL {
                let e = (predict(&model, &fid.cell(k, i, &[g])).unwrap() - data.gate(g).unwrap()[(k, i)]).abs();
                assert!(e <= 1e-12, "{k} {i} {g} {e:e}");
            }
        }
    }
}

#[test]
fn lim_at_full_rank_reproduces_trial_data() {
    let dev = device(1.0, 0.02, 2);
    let spec = trial_sequences(&TrialPreset::D7, 0).unwrap();
    let fid = spec.fiducials().unwrap();
    let data = collect_trial_data(&dev, &spec, Shots::Exact, 0).unwrap();
    let t = svd_truncate(&data.gram, &data.gate_mats, 7).unwrap();
    let model = lim_reconstruct(&t, &DMatrix::identity(7, 7)).unwrap();
    let mut worst = 0.0_f64;
    for k in 0..fid.d() {
        for i in 0..fid.d() {
            worst = worst.max((predict(&model, &fid.cell(k, i, &[])).unwrap() - data.gram[(k, i)]).abs());
            for g in Gate::ALL {
                worst = worst.max((predict(&model, &fid.cell(k, i, &[g])).unwrap() - data.gate(g).unwrap()[(k, i)]).abs());
            }
        }
    }
    assert!(worst <= 1e-8, "max trial error {worst:e}");
}

#[test]
fn truncation_degrades_monotonically_and_gauge_fit_keeps_predictions() {
    let dev = device(1.0, 0.02, 5);
    let held_out: Vec<Circuit> = (10..=60).step_by(10).flat_map(|n| random_identity_sequences(n, 10, 77).unwrap()).collect();
    let mut rms = Vec::new();
    for (preset, d) in [(TrialPreset::D4, 4), (TrialPreset::D7, 7)] {
        let spec = trial_sequences(&preset, 0).unwrap();
        let data = collect_trial_data(&dev, &spec, Shots::Exact, 0).unwrap();
        let t = svd_truncate(&data.gram, &data.gate_mats, d).unwrap();
        let plain = lim_reconstruct(&t, &DMatrix::identity(d, d)).unwrap();
        let fitted = gauge_fit_to_ideal(&t, &ideal_ptms(d).unwrap(), &GaugeFitConfig::default()).unwrap().model;
        let mut sq = 0.0;
        for c in &held_out {
            let a = predict(&plain, c).unwrap();
            assert!((a - predict(&fitted, c).unwrap()).abs() <= 1e-9);
            sq += (a - dev.exact_mean(c).unwrap()).powi(2);
        }
        rms.push((sq / held_out.len() as f64).sqrt());
    }
    assert!(rms[1] <= rms[0], "rms d4 {} d7 {}", rms[0], rms[1]);
}

#[test]
fn two_point_gram_rank_is_seven() {
    let dev = device(1.0, 0.02, 2);
    let spec = trial_sequences(&TrialPreset::D7, 0).unwrap();
    let fid = spec.fiducials().unwrap();
    let g = enlarged_gram(&dev, &fid.prep_sequences, &fid.meas_sequences).unwrap();
    assert!(fid.d() * fid.d() >= 49);
    assert_eq!(numerical_rank(&g, 1e-8), lot_core::bounds::effective_dimension(2, 2));
}

#[test]
fn full_state_round_trip_through_expectation() {
    let dev = device(1.0, 0.1, 3);
    let c: Circuit = "HSHHSSHSH".parse().unwrap();
    let transfers: Vec<_> = c.gates.iter().map(|&g| dev.full_transfer(g).unwrap()).collect();
    let got = expectation(&DualVec(dev.readout().0), &transfers, &StateVec(dev.initial_state().0)).unwrap();
    assert!((got - dev.exact_mean(&c).unwrap()).abs() <= 1e-14);
}

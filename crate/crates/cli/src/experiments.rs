use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use lot_core::bounds::{
    dominant_state_subspace, empirical_bound_check, lim_bound_check, random_sequences, random_subspace, stationary_subspace,
};
use lot_core::device::random_identity_sequences;
use lot_core::exact_lot::{
    all_sequences, collect_data, enlarged_gram, gauge_reconstruct, predict, select_fiducials, verify_factorization, DEFAULT_CONDITION_BOUND,
};
use lot_core::lim::{
    collect_trial_data, gauge_fit_to_ideal, ideal_differences, ideal_ptms, singular_spectrum, svd_truncate, trial_sequences, GaugeFitConfig,
};
use lot_core::linalg::numerical_rank;
use lot_core::mle::{collect_records, fit, fit_report, tomography_circuits, FitConfig, StartSummary};
use lot_core::{device, BoundModel, Circuit, Device, ErrorModel, FiducialSet, Gate, ParamModel, TrialSpec};

use crate::config::{Experiment, ExperimentConfig, SubspaceKind};
use crate::error::CliError;
use crate::output::Outputs;
use crate::report::{ModelReport, TruthRecord};

/// Candidate Gram rank cutoff used when the exact-LOT dimension is not given.
const RANK_CUTOFF: f64 = 1e-8;
/// Longest candidate fiducial for the linear-inversion bound check.
const LINEAR_INVERSION_CANDIDATE_LEN: usize = 6;

pub fn run(config: &ExperimentConfig, device: &Device) -> Result<Outputs, CliError> {
    let mut out = Outputs::default();
    let seed = config.seed;
    match &config.experiment {
        Experiment::Survival { n_gates, circuits_per_point, record_circuits } => {
            let curve = device::survival_curve(device, n_gates, *circuits_per_point, config.shots, seed)?;
            out.csv("survival.csv", "mean survival per gate count", &curve)?;
            if *record_circuits {
                let truth = truth_records(device, n_gates, *circuits_per_point, seed)?;
                out.json("circuits.json", "every sampled circuit with its exact survival", &truth)?;
            }
        }
        Experiment::ExactLot { d, candidate_max_len, verify_sequences, verify_max_len } => {
            let fiducials = exact_fiducials(device, *candidate_max_len, *d)?;
            let d = fiducials.d();
            let data = collect_data(device, &fiducials, &Gate::ALL, config.shots, seed)?;
            let model = gauge_reconstruct(&data, &DMatrix::identity(d, d), DEFAULT_CONDITION_BOUND)?;
            let sequences = random_sequences(&Gate::ALL, *verify_sequences, *verify_max_len, seed)?;
            let factorization = verify_factorization(&data, device, &sequences)?;
            out.json("fiducials.json", "selected preparation and measurement sequences", &fiducials)?;
            out.table("gram.csv", "Gram matrix of the fiducials", &matrix_header(d), &matrix_rows(&data.gram))?;
            out.json("factorization.json", "factorization residuals on random sequences", &factorization)?;
            out.json("model.json", "reconstructed error model", &ModelReport::new("exact-lot", model))?;
        }
        Experiment::Lim { d, gauge_random_starts, n_gates, circuits_per_point } => {
            let spec = trial_spec(config)?;
            let d = d.unwrap_or_else(|| config.default_lim_dim());
            let data = collect_trial_data(device, &spec, config.shots, seed)?;
            let spectrum = singular_spectrum(&data.gram);
            let truncation = svd_truncate(&data.gram, &data.gate_mats, d)?;
            if let Some(w) = &truncation.warning {
                eprintln!("warning: {w}");
            }
            let ideal = ideal_ptms(d)?;
            let gauge = GaugeFitConfig { random_starts: *gauge_random_starts, seed, ..GaugeFitConfig::default() };
            let fitted = gauge_fit_to_ideal(&truncation, &ideal, &gauge)?;
            if !fitted.objective.is_finite() {
                return Err(lot_core::Error::InvalidParameter("gauge fit diverged".into()).into());
            }
            let differences = ideal_differences(&fitted.model, &ideal)?;

            let top = spectrum.first().copied().unwrap_or(0.0);
            let rows: Vec<SpectrumRow> = spectrum
                .iter()
                .enumerate()
                .map(|(i, &s)| SpectrumRow { index: i + 1, singular_value: s, relative: if top > 0.0 { s / top } else { 0.0 } })
                .collect();
            out.csv("spectrum.csv", "singular values of the trial Gram matrix", &rows)?;
            for g in Gate::ALL {
                out.table(
                    &format!("ptm_{g}.csv"),
                    &format!("reconstructed gate {g}"),
                    &matrix_header(d),
                    &matrix_rows(fitted.model.gate(g)?),
                )?;
                out.table(
                    &format!("difference_{g}.csv"),
                    &format!("reconstructed minus ideal gate {g}"),
                    &matrix_header(d),
                    &matrix_rows(&differences[&g]),
                )?;
            }
            let curve = model_survival(device, &fitted.model, n_gates, *circuits_per_point, seed)?;
            out.csv("lim_survival.csv", "device and model survival per gate count", &curve)?;
            out.json(
                "gauge_fit.json",
                "gauge fit summary",
                &GaugeSummary {
                    d,
                    objective: fitted.objective,
                    evaluations: fitted.evaluations,
                    converged: fitted.converged,
                    truncation_warning: truncation.warning.clone(),
                    retained_singular_values: truncation.singular_values.clone(),
                },
            )?;
            out.json("model.json", "reconstructed error model", &ModelReport::new("lim", fitted.model))?;
        }
        Experiment::Mle { size, starts, sigma_floor, max_iters } => {
            let spec = trial_spec(config)?;
            let fiducials = spec.fiducials()?;
            let circuits = tomography_circuits(&fiducials.prep_sequences, &fiducials.meas_sequences);
            let records = collect_records(device, &circuits, config.shots, seed)?;
            let fit_config = FitConfig { starts: *starts, sigma_floor: *sigma_floor, max_iters: *max_iters, ..FitConfig::default() };
            let result = fit(&records, *size, &fit_config, seed)?;
            if !result.nll.is_finite() {
                return Err(lot_core::Error::InvalidParameter("likelihood fit did not reach a finite objective".into()).into());
            }
            if !result.converged {
                eprintln!("warning: simplex search stopped at its iteration limit");
            }
            let report = fit_report(&result, &records, *sigma_floor)?;
            let params: Vec<ParamRow> = (0..result.params.size())
                .map(|i| ParamRow {
                    component: i + 1,
                    weight: result.params.weights[i],
                    eps_h: result.params.rates[i].h,
                    eps_s: result.params.rates[i].s,
                })
                .collect();
            out.csv("parameters.csv", "fitted weights and error rates", &params)?;
            out.csv("residuals.csv", "per-record fit residuals", &report.residuals)?;
            out.json(
                "fit.json",
                "likelihood fit summary",
                &FitSummary {
                    size: report.size,
                    params: report.params.clone(),
                    nll: report.nll,
                    converged: report.converged,
                    starts: report.starts.clone(),
                    polish_iterations: report.polish_iterations,
                    records: report.records,
                    groups: report.groups,
                    rms_residual: report.rms_residual,
                },
            )?;
            out.json("model.json", "error model induced by the fit", &ModelReport::new("mle", result.error_model))?;
        }
        Experiment::Bounds { subspace, dim, sequences, max_len, norm } => {
            let report = match subspace {
                SubspaceKind::LinearInversion => {
                    let fiducials = exact_fiducials(device, LINEAR_INVERSION_CANDIDATE_LEN, None)?;
                    let model = BoundModel::from_device(device, &fiducials)?;
                    lim_bound_check(&model, *sequences, *max_len, seed, *norm)?
                }
                kind => {
                    let model = BoundModel::from_device(device, &trial_spec(config)?.fiducials()?)?;
                    let projection = match (kind, dim) {
                        (SubspaceKind::Invariant, _) => stationary_subspace(device.weights())?,
                        (SubspaceKind::Dominant, Some(k)) => dominant_state_subspace(&model, *k)?,
                        (SubspaceKind::Random, Some(k)) => random_subspace(model.dim(), *k, seed)?,
                        _ => unreachable!("validated"),
                    };
                    empirical_bound_check(&model, &projection, *sequences, *max_len, seed, *norm)?
                }
            };
            out.json("bounds.json", "bound check report", &report)?;
        }
    }
    Ok(out)
}

/// `d` fiducials chosen among all sequences up to `max_len`; `d` defaults to
/// the numerical rank of the candidate Gram matrix.
fn exact_fiducials(device: &Device, max_len: usize, d: Option<usize>) -> Result<FiducialSet, CliError> {
    let candidates = all_sequences(max_len);
    let d = match d {
        Some(d) => d,
        None => numerical_rank(&enlarged_gram(device, &candidates, &candidates)?, RANK_CUTOFF),
    };
    Ok(select_fiducials(device, &candidates, d)?)
}

fn trial_spec(config: &ExperimentConfig) -> Result<TrialSpec, CliError> {
    Ok(trial_sequences(&config.trial.preset, config.trial.seed)?)
}

#[derive(Serialize)]
struct SpectrumRow {
    index: usize,
    singular_value: f64,
    relative: f64,
}

#[derive(Serialize)]
struct ParamRow {
    component: usize,
    weight: f64,
    eps_h: f64,
    eps_s: f64,
}

#[derive(Serialize)]
struct GaugeSummary {
    d: usize,
    objective: f64,
    evaluations: u64,
    converged: bool,
    truncation_warning: Option<String>,
    retained_singular_values: Vec<f64>,
}

#[derive(Serialize)]
struct FitSummary {
    size: usize,
    params: ParamModel,
    nll: f64,
    converged: bool,
    starts: Vec<StartSummary>,
    polish_iterations: u64,
    records: usize,
    groups: usize,
    rms_residual: f64,
}

#[derive(Serialize)]
struct ModelSurvivalRow {
    n_gates: usize,
    actual: f64,
    model: f64,
    abs_error: f64,
    circuits: usize,
    seed: u64,
}

fn matrix_header(d: usize) -> Vec<String> {
    std::iter::once("row".to_string()).chain((1..=d).map(|j| format!("c{j}"))).collect()
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<String>> {
    (0..m.nrows())
        .map(|i| std::iter::once((i + 1).to_string()).chain((0..m.ncols()).map(|j| format!("{:?}", m[(i, j)]))).collect())
        .collect()
}

fn truth_records(device: &Device, n_gates: &[usize], count: usize, seed: u64) -> Result<Vec<TruthRecord>, CliError> {
    let per_n = n_gates
        .par_iter()
        .map(|&n| {
            random_identity_sequences(n, count, seed)?
                .into_iter()
                .map(|circuit| {
                    let truth = device.exact_mean(&circuit)?;
                    Ok(TruthRecord { circuit, truth })
                })
                .collect::<lot_core::Result<Vec<_>>>()
        })
        .collect::<lot_core::Result<Vec<_>>>()?;
    Ok(per_n.into_iter().flatten().collect())
}

/// Exact device survival next to the model prediction on the same circuits.
fn model_survival(
    device: &Device,
    model: &ErrorModel,
    n_gates: &[usize],
    count: usize,
    seed: u64,
) -> Result<Vec<ModelSurvivalRow>, CliError> {
    let rows = n_gates
        .par_iter()
        .map(|&n| {
            let circuits = random_identity_sequences(n, count, seed)?;
            let mean = |f: &dyn Fn(&Circuit) -> lot_core::Result<f64>| -> lot_core::Result<f64> {
                Ok(circuits.iter().map(f).collect::<lot_core::Result<Vec<_>>>()?.iter().sum::<f64>() / circuits.len() as f64)
            };
            let actual = mean(&|c| device.exact_mean(c))?;
            let predicted = mean(&|c| predict(model, c))?;
            Ok(ModelSurvivalRow {
                n_gates: n,
                actual,
                model: predicted,
                abs_error: (predicted - actual).abs(),
                circuits: circuits.len(),
                seed,
            })
        })
        .collect::<lot_core::Result<Vec<_>>>()?;
    Ok(rows)
}

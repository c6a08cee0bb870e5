//! Experiment configuration files.
//!
//! A config is a JSON object with the keys `model`, `experiment`, and
//! optionally `trial`, `shots`, `seed` and `output_dir`. Unknown keys are
//! rejected at every level. Omitted optional fields take the defaults below,
//! and the fully resolved config is echoed into the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lot_core::bounds::NormKind;
use lot_core::lim::trial_sequences;
use lot_core::noise::{build_low_freq_model, dense_model};
use lot_core::{ContextModel, Device, Gate, Shots, TrialPreset};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub experiment: Experiment,
    #[serde(default)]
    pub trial: TrialConfig,
    #[serde(default)]
    pub shots: Shots,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_seed() -> u64 {
    2024
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Noise model of the simulated device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Gaussian low-frequency noise discretized on `m` points.
    LowFreq {
        sigma: f64,
        eta: f64,
        #[serde(default = "default_support")]
        m: usize,
        /// Per-gate decay `Γ` of the environment variable.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        decay: BTreeMap<Gate, f64>,
    },
    /// Low-frequency noise on the dense reference grid.
    Dense { sigma: f64, eta: f64 },
    /// Depolarizing noise depending on the previous gate. Keys are two gate
    /// letters `"χλ"`: gate χ applied after λ.
    Context { rates: BTreeMap<String, f64> },
}

fn default_support() -> usize {
    5
}

impl ModelConfig {
    pub fn device(&self) -> Result<Device, CliError> {
        let invalid = |e: lot_core::Error| CliError::Validation(format!("model: {e}"));
        match self {
            ModelConfig::LowFreq { sigma, eta, m, decay } => {
                check_sigma(*sigma)?;
                let mut model = build_low_freq_model(*sigma, *eta, *m).map_err(invalid)?;
                if !decay.is_empty() {
                    model = model.with_decay(decay).map_err(invalid)?;
                }
                Device::from_low_freq(&model).map_err(invalid)
            }
            ModelConfig::Dense { sigma, eta } => {
                check_sigma(*sigma)?;
                Device::from_low_freq(&dense_model(*sigma, *eta).map_err(invalid)?).map_err(invalid)
            }
            ModelConfig::Context { rates } => {
                let mut parsed = BTreeMap::new();
                for (key, &eps) in rates {
                    let gates: Vec<Gate> = key
                        .chars()
                        .map(|c| c.to_string().parse())
                        .collect::<Result<_, _>>()
                        .map_err(|_| CliError::Validation(format!("model: bad context key {key:?}")))?;
                    if gates.len() != 2 {
                        return Err(CliError::Validation(format!("model: context key {key:?} must name two gates")));
                    }
                    if !(0.0..=1.0).contains(&eps) {
                        return Err(CliError::Validation(format!("model: context rate {eps} for {key} outside [0, 1]")));
                    }
                    parsed.insert((gates[0], gates[1]), eps);
                }
                Device::from_context(&ContextModel::depolarizing(&parsed).map_err(invalid)?).map_err(invalid)
            }
        }
    }
}

fn check_sigma(sigma: f64) -> Result<(), CliError> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!("model: sigma must be positive, got {sigma}")))
    }
}

/// Trial sequences used by `lim`, `mle` and `bounds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    #[serde(default = "default_preset")]
    pub preset: TrialPreset,
    /// Seed of the random part of the `d7` preset.
    #[serde(default)]
    pub seed: u64,
}

fn default_preset() -> TrialPreset {
    TrialPreset::D7
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self { preset: default_preset(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Survival of random ideally-identity sequences.
    Survival {
        #[serde(default = "default_grid")]
        n_gates: Vec<usize>,
        #[serde(default = "default_circuits")]
        circuits_per_point: usize,
        /// Also write every circuit with its exact mean, for `lot compare`.
        #[serde(default)]
        record_circuits: bool,
    },
    /// Exact reconstruction from fiducials chosen among short sequences.
    ExactLot {
        /// Defaults to the numerical rank of the candidate Gram matrix.
        #[serde(default)]
        d: Option<usize>,
        #[serde(default = "default_candidate_len")]
        candidate_max_len: usize,
        #[serde(default = "default_verify")]
        verify_sequences: usize,
        #[serde(default = "default_max_len")]
        verify_max_len: usize,
    },
    /// Truncated linear inversion on the trial set.
    Lim {
        /// Defaults to the trial preset dimension (4 or 7).
        #[serde(default)]
        d: Option<usize>,
        #[serde(default = "default_random_starts")]
        gauge_random_starts: usize,
        /// Gate counts at which model and device survival are compared.
        #[serde(default = "default_grid")]
        n_gates: Vec<usize>,
        #[serde(default = "default_circuits")]
        circuits_per_point: usize,
    },
    /// Maximum-likelihood fit of a discrete low-frequency model.
    Mle {
        #[serde(default = "default_size")]
        size: usize,
        #[serde(default = "default_starts")]
        starts: usize,
        #[serde(default = "default_sigma_floor")]
        sigma_floor: f64,
        #[serde(default = "default_max_iters")]
        max_iters: u64,
    },
    /// Seeded check of the sequence error bound on a subspace. The model
    /// rows and columns are the trial fiducials.
    Bounds {
        #[serde(default)]
        subspace: SubspaceKind,
        /// Dimension for `dominant` and `random`.
        #[serde(default)]
        dim: Option<usize>,
        #[serde(default = "default_bound_sequences")]
        sequences: usize,
        #[serde(default = "default_max_len")]
        max_len: usize,
        #[serde(default)]
        norm: NormKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceKind {
    /// The exactly invariant stationary subspace (ε = 0).
    #[default]
    Invariant,
    /// Span of the dominant reachable states.
    Dominant,
    /// A seeded random subspace.
    Random,
    /// The projective construction behind linear inversion, on fiducials
    /// chosen among sequences of length at most 6 as for `exact-lot`.
    LinearInversion,
}

fn default_grid() -> Vec<usize> {
    (0..=100).collect()
}
fn default_circuits() -> usize {
    200
}
fn default_candidate_len() -> usize {
    6
}
fn default_verify() -> usize {
    100
}
fn default_max_len() -> usize {
    20
}
fn default_random_starts() -> usize {
    8
}
fn default_size() -> usize {
    2
}
fn default_starts() -> usize {
    16
}
fn default_sigma_floor() -> f64 {
    1e-3
}
fn default_max_iters() -> u64 {
    4000
}
fn default_bound_sequences() -> usize {
    1000
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    /// Checks everything that can be checked without running the experiment.
    /// Returns the simulated device on success.
    pub fn validate(&self) -> Result<Device, CliError> {
        let bad = |msg: String| Err(CliError::Validation(format!("experiment: {msg}")));
        let device = self.model.device()?;
        match &self.experiment {
            Experiment::Survival { n_gates, circuits_per_point, .. } | Experiment::Lim { n_gates, circuits_per_point, .. } => {
                if n_gates.is_empty() {
                    return bad("n_gates must be nonempty".into());
                }
                if *circuits_per_point == 0 {
                    return bad("circuits_per_point must be positive".into());
                }
            }
            _ => {}
        }
        match &self.experiment {
            Experiment::Survival { .. } => {}
            Experiment::ExactLot { d, candidate_max_len, verify_sequences, verify_max_len } => {
                if *d == Some(0) {
                    return bad("d must be positive".into());
                }
                if *candidate_max_len > 12 {
                    return bad(format!("candidate_max_len {candidate_max_len} exceeds 12"));
                }
                if *verify_sequences == 0 || *verify_max_len == 0 {
                    return bad("verify_sequences and verify_max_len must be positive".into());
                }
            }
            Experiment::Lim { d, .. } => {
                let n = self.trial_size()?;
                let d = d.unwrap_or_else(|| self.default_lim_dim());
                if !matches!(d, 4 | 7) {
                    return bad(format!("d {d} has no ideal gate set; use 4 or 7"));
                }
                if d > n {
                    return bad(format!("d {d} exceeds the {n} trial sequences"));
                }
            }
            Experiment::Mle { size, starts, sigma_floor, max_iters } => {
                if *size == 0 || *starts == 0 || *max_iters == 0 {
                    return bad("size, starts and max_iters must be positive".into());
                }
                if !(sigma_floor.is_finite() && *sigma_floor > 0.0) {
                    return bad(format!("sigma_floor must be positive, got {sigma_floor}"));
                }
            }
            Experiment::Bounds { subspace, dim, sequences, max_len, .. } => {
                if *sequences == 0 || *max_len == 0 {
                    return bad("sequences and max_len must be positive".into());
                }
                let full = 4 * device.env_dim();
                match (subspace, dim) {
                    (SubspaceKind::Dominant | SubspaceKind::Random, None) => {
                        return bad(format!("subspace {subspace:?} needs dim"));
                    }
                    (SubspaceKind::Dominant | SubspaceKind::Random, Some(k)) if *k == 0 || *k > full => {
                        return bad(format!("dim {k} outside 1..={full}"));
                    }
                    (SubspaceKind::Invariant | SubspaceKind::LinearInversion, Some(_)) => {
                        return bad(format!("subspace {subspace:?} takes no dim"));
                    }
                    _ => {}
                }
            }
        }
        Ok(device)
    }

    /// LIM dimension when none is configured: 4 for the `d4` preset, else 7.
    pub fn default_lim_dim(&self) -> usize {
        match self.trial.preset {
            TrialPreset::D4 => 4,
            _ => 7,
        }
    }

    fn trial_size(&self) -> Result<usize, CliError> {
        let invalid = |e: lot_core::Error| CliError::Validation(format!("trial: {e}"));
        let spec = trial_sequences(&self.trial.preset, self.trial.seed).map_err(invalid)?;
        spec.fiducials().map_err(invalid)?;
        Ok(spec.sequences.len())
    }
}

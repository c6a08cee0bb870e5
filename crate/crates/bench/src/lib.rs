//! Fixtures shared by the benchmarks.

use lot_core::lim::{collect_trial_data, trial_sequences};
use lot_core::mle::{collect_records, tomography_circuits};
use lot_core::noise::build_low_freq_model;
use lot_core::{Device, MeasurementRecord, Result, Shots, TomographyData, TrialPreset};

pub const SIGMA: f64 = 1.0;
pub const ETA: f64 = 0.02;
pub const SEED: u64 = 2024;

/// Low-frequency device on `m` support points.
pub fn device(m: usize) -> Result<Device> {
    Device::from_low_freq(&build_low_freq_model(SIGMA, ETA, m)?)
}

/// Exact trial data of the `d7` preset.
pub fn d7_trial_data(device: &Device) -> Result<TomographyData> {
    let spec = trial_sequences(&TrialPreset::D7, 0)?;
    collect_trial_data(device, &spec, Shots::Exact, SEED)
}

/// Exact records of every `d7` tomography circuit.
pub fn d7_records(device: &Device) -> Result<Vec<MeasurementRecord>> {
    let fid = trial_sequences(&TrialPreset::D7, 0)?.fiducials()?;
    collect_records(device, &tomography_circuits(&fid.prep_sequences, &fid.meas_sequences), Shots::Exact, SEED)
}

//! Simulation and tomography of a single qubit under temporally correlated
//! noise.

pub mod bounds;
pub mod circuit;
pub mod device;
pub mod error;
pub mod exact_lot;
pub mod lim;
pub mod linalg;
pub mod mle;
pub mod noise;
pub mod optim;
pub mod ptm;

pub use bounds::{BoundModel, BoundReport, NormKind, Projection};
pub use circuit::{Circuit, Gate};
pub use device::{Device, MeasurementRecord, Shots, SurvivalPoint};
pub use error::{Error, Result};
pub use exact_lot::{ErrorModel, FiducialSet, TomographyData};
pub use lim::{TrialPreset, TrialSpec};
pub use mle::{FitResult, ParamModel};
pub use noise::{ContextModel, LowFreqModel};
pub use ptm::{Basis, BasisElement, BlockOperation, Channel, DualVec, SevenBasis, StateVec, StationaryBasis, TransferMatrix};

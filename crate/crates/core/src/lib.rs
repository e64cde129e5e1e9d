//! Clutter-map tracking for TDM MIMO radar by variational message passing
//! on a basis-expanded AR(1) field model.
//!
//! The core is generic over the real scalar type (`f32` or `f64`); the
//! aliases below fix it to `f64`.

pub mod basis;
pub mod container;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod scene;

pub use error::{Error, Result};
pub use scalar::{Cx, Real};

pub type BasisConfig64 = basis::BasisConfig<f64>;
pub type ForwardModel64 = basis::ForwardModel<f64>;
pub type ChirpWaveform64 = basis::ChirpWaveform<f64>;
pub type ArrayGeometry64 = basis::ArrayGeometry<f64>;
pub type ARParams64 = scene::ARParams<f64>;
pub type ClutterCoefficients64 = scene::ClutterCoefficients<f64>;
pub type MeasurementFrame64 = scene::MeasurementFrame<f64>;
pub type Scatterer64 = scene::Scatterer<f64>;
pub type RadarConfig64 = scene::RadarConfig<f64>;
pub type GaussianBelief64 = inference::GaussianBelief<f64>;
pub type GammaBelief64 = inference::GammaBelief<f64>;
pub type PosteriorState64 = inference::PosteriorState<f64>;

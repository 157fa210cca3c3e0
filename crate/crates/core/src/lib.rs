//! Pseudo-spectral simulation of the perturbed 2D Boussinesq system and the
//! dispersive SQG equation on a periodic box, with the Littlewood-Paley norms
//! and measurements used to probe their dispersive behaviour.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32` or `f64`); the
//! experiment drivers and file formats work in `f64`.

pub mod scalar;
pub mod spectral;
pub mod littlewood_paley;
pub mod model;
pub mod timestepper;
pub mod diagnostics;
pub mod experiments;
pub mod io;
pub mod selftest;

pub type Grid64 = spectral::Grid<f64>;
pub type Grid32 = spectral::Grid<f32>;
pub type Field64 = spectral::SpectralField<f64>;
pub type Field32 = spectral::SpectralField<f32>;
pub type VorticityState64 = model::VorticityState<f64>;
pub type VorticityState32 = model::VorticityState<f32>;
pub type ZState64 = model::ZState<f64>;
pub type ZState32 = model::ZState<f32>;
pub type SqgState64 = model::SqgState<f64>;
pub type SqgState32 = model::SqgState<f32>;

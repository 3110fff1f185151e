//! Simulation and analysis toolkit for optically detected magnetic resonance
//! (ODMR) of boron-vacancy spin defects in hexagonal boron nitride.
//!
//! The numerical core is generic over the scalar type (see [`num::Real`]);
//! the aliases below pin everything to `f64`, which is what the CLI and the
//! Monte Carlo / quadrature modules use.

pub mod constants;
pub mod fit;
pub mod ion;
pub mod num;
pub mod odmr;
pub mod plasmon;
pub mod pulse;
pub mod sensitivity;
pub mod spin;

pub type ZfsSpinParams = spin::ZfsSpinParams<f64>;
pub type MagneticField = spin::MagneticField<f64>;
pub type ResonancePair = spin::ResonancePair<f64>;
pub type LorentzianLine = odmr::LorentzianLine<f64>;
pub type OdmrSpectrum = odmr::OdmrSpectrum<f64>;
pub type PowerResponse = odmr::PowerResponse<f64>;
pub type FitResult = fit::FitResult<f64>;
pub type SensitivityInput = sensitivity::SensitivityInput<f64>;

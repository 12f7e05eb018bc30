//! Hybrid continuous/discrete-variable teleportation over lossy channels.
//!
//! Gaussian channel algebra, the teleported photon-number entangled state in
//! closed form, logarithmic negativity, gain and squeezing searches, and
//! CH-based key-rate bounds. Everything is generic over the scalar type; the
//! `*F64` and `*F32` aliases fix it.

pub mod entanglement;
pub mod error;
pub mod gaussian;
pub mod num;
pub mod optimize;
pub mod qkd;
pub mod teleportation;

pub use entanglement::{
    direct_log_negativity, direct_state, log_negativity_blocks, log_negativity_generic,
    singlet_state, DensityMatrix, LogBase, LogNegativity,
};
pub use error::{Error, Result};
pub use gaussian::{
    attenuate, convolve_rescale, homodyne_teleport_oracle, tmsv_state, GaussianKernel,
    GaussianTwoModeState, Quadrature, SingleModeGaussian, TeleportOracle, Transmissivity,
};
pub use num::{binary_entropy, Real};
pub use optimize::{
    optimal_gain, teleport_advantage, teleported_log_negativity, threshold_squeezing,
    GainSearchOptions, GainSearchResult, Threshold,
};
pub use qkd::{
    ch_value, key_rate_bound, optimize_settings, CHProbabilities, CHResult, CHSettings,
    KeyRateBound, KeyRateFunction, NonlocalFractionBound,
};
pub use teleportation::{
    assemble_density_matrix, sigma_tel, teleported_coefficients,
    teleported_coefficients_with_cutoff, ChannelConfig, SigmaTel, TeleportedCoefficients,
};

pub type ChannelConfigF64 = ChannelConfig<f64>;
pub type ChannelConfigF32 = ChannelConfig<f32>;
pub type GaussianStateF64 = GaussianTwoModeState<f64>;
pub type GaussianStateF32 = GaussianTwoModeState<f32>;
pub type DensityMatrixF64 = DensityMatrix<f64>;
pub type DensityMatrixF32 = DensityMatrix<f32>;
pub type TeleportedCoefficientsF64 = TeleportedCoefficients<f64>;
pub type TeleportedCoefficientsF32 = TeleportedCoefficients<f32>;
pub type TransmissivityF64 = Transmissivity<f64>;
pub type TransmissivityF32 = Transmissivity<f32>;
pub type CHSettingsF64 = CHSettings<f64>;

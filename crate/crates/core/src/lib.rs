//! FMCW radar processing and representation learning toolkit.
//!
//! The crate covers the full pipeline from raw ADC samples to task metrics:
//!
//! ```text
//! scene ── simsig ──> AdcFrame ── dsp ──> RadarMap (RD / RA)
//!                        │                    │
//!                        │                    ├──> baseline estimators
//!                        └── vae (chirp) <────┤
//!                                             └──> vae (map) ──> latents ── downstream
//! ```
//!
//! - [`config`] — sensor configuration and the derived range/velocity/angle axes
//! - [`simsig`] — synthetic point-target ADC frame generation with analytic ground truth
//! - [`dsp`] — range FFT, range-Doppler maps, Capon range-azimuth maps, sigmoid squash
//! - [`baseline`] — classical peak-detection estimators for the four regression tasks
//! - [`vae`] — map and chirp variational autoencoders trained with GECO
//! - [`downstream`] — frozen-encoder regression heads and RMSE/median/IQR metrics
//! - [`dataio`] — self-describing binary container for frames, maps and latents

pub mod baseline;
pub mod config;
pub mod dataio;
pub mod downstream;
pub mod dsp;
pub mod error;
pub mod fft;
pub mod nn;
pub mod simsig;
pub mod vae;

pub use config::{RadarAxes, RadarConfig};
pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

//! One-class anomaly detection with auto-encoding GANs.
//!
//! Models are trained on normal images only. At test time frames are scored
//! by reconstruction residual, discriminator output, or a residual weighted
//! by GradCAM++ attention maps taken from the discriminator. The crate also
//! contains the baselines (DCAE, Deep SVDD, f-AnoGAN), a synthetic
//! four-chamber phantom generator, and a ROC / Youden / DeLong evaluation
//! harness.

pub mod data;
pub mod error;
pub mod experiments;
pub mod float;
pub mod metrics;
pub mod networks;
pub mod nn;
pub mod scoring;
pub mod training;

pub use error::{Error, Result};
pub use float::Float;

/// Package name and version, recorded in every report.
pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

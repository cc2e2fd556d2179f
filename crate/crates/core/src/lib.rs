//! Exact likelihood inference, conditional-moment signal extraction and
//! robust state-space filtering for Gauss-Cauchy (Voigt) measurement models.

pub mod error;
pub mod exact_bench;
pub mod io;
pub mod levy;
pub mod mc;
pub mod optim;
pub mod quad;
pub mod rng;
pub mod selftest;
pub mod special_fn;
pub mod ssm_filters;
pub mod stats;
pub mod voigt;
pub mod voigt_mle;

pub use error::{Error, Result};
pub use voigt::VoigtParams;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

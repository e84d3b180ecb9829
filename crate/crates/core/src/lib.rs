//! Stochastic human motion prediction with orthogonal latent directions.
//!
//! A past pose sequence is projected onto a truncated DCT basis and
//! encoded by residual graph blocks over the skeleton. Each of `K` learned
//! motion queries is mapped, together with the past feature, to a
//! coefficient vector over `M` orthonormal latent directions; the resulting
//! latent code is decoded back into a future pose sequence. Editing the
//! coefficients of one sample steers its decoded motion.

pub mod error;
pub mod latent;
pub mod metrics;
pub mod motion;
pub mod net;
pub mod numkit;
pub mod train;

pub use error::{Error, Result};

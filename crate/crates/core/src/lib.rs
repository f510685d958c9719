//! Learning small-body gravity fields from trajectory data.
//!
//! The crate covers the whole characterization loop: a zonal-harmonic truth
//! field ([`gravity`]), orbit propagation and collision screening
//! ([`dynamics`]), dataset generation with state/acceleration noise
//! ([`data`]), two learning frameworks ([`gp`] and [`nn`]), fractional-error
//! characterization ([`characterize`]) and the single-run / sweep
//! orchestration behind the CLI ([`pipeline`]).

pub mod characterize;
pub mod config;
pub mod data;
pub mod dynamics;
pub mod error;
pub mod gp;
mod linalg;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod gravity;
pub mod seed;

pub use error::{Error, Result};

/// Cartesian 3-vector used for positions, velocities and accelerations.
pub type Vec3 = nalgebra::Vector3<f64>;

/// A learned (or reference) map from position to acceleration.
pub trait Regressor {
    /// Predicts accelerations at each position, preserving order.
    fn predict(&self, positions: &[Vec3]) -> Vec<Vec3>;

    /// True when training hit a numerical instability and the model was frozen.
    fn unstable(&self) -> bool {
        false
    }
}

//! Decentralized non-PDC controller synthesis for networks of interconnected
//! Takagi-Sugeno descriptor subsystems.
//!
//! The pipeline is: [`model`] (network definition) → [`lmi`] (affine block
//! inequalities) → [`sdp`] (vectorization and interior-point solve) →
//! [`synth`] (gains, ρ values, posterior checks) → [`sim`] (closed-loop
//! trajectories and dissipation checks) and [`sweep`] (feasibility domains).

pub mod error;
pub mod linalg;
pub mod lmi;
pub mod memexpr;
pub mod model;
pub mod plot;
pub mod sdp;
pub mod sim;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};

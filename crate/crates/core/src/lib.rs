//! Local randomness in nonlocal games: NPA bounds on CHSH guessing
//! probability, Magic Square rigidity checks, and a certified-deletion
//! protocol simulator.

pub mod cli;
pub mod deletion;
pub mod error;
pub mod fmt;
pub mod games;
pub mod npa;
pub mod qsim;
pub mod rigidity;
pub mod sdp;
pub mod strategies;

pub use error::{Error, Result};

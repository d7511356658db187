//! Rate and fidelity of satellite-assisted distribution of multiple
//! event-ready entangled pairs, for photonic qubit and qudit operation.
//!
//! The analytic layer ([`analytics`], [`cutoff`]) is cross-checked by an
//! event-driven Monte Carlo ([`montecarlo`]); [`optimizer`] searches the
//! squeezing parameter and cutoff for the best rate under a fidelity floor.

pub mod analytics;
pub mod availability;
pub mod config;
pub mod cutoff;
pub mod error;
pub mod fidelity;
mod geometric;
pub mod link;
pub mod memory;
pub mod montecarlo;
pub mod operating;
pub mod optimizer;
pub mod report;
pub mod source;

pub use error::{ConfigErrors, ConfigIssue, Error, Result};
pub use fidelity::FidelityCurve;
pub use link::LinkConfig;
pub use memory::MemoryConfig;
pub use source::{Mode, SlotLayout, SourceConfig};

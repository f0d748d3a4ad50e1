//! Strength statistics of fishnet-like lattices with softening links.
//!
//! The crate has two halves that can be used independently and are meant to
//! be compared against each other:
//!
//! * a high-throughput, event-driven simulator of a lattice of axial links
//!   with random strength and discrete post-peak softening, loaded in
//!   uniaxial displacement control ([`mesh`], [`solver`], [`ensemble`]);
//! * an analytic failure-probability model built from the order statistics
//!   of the k-th smallest link strength, a geometric-Poisson distribution of
//!   the damage count at peak load, and a stress-to-order-statistic scaling
//!   factor ([`order_stats`], [`polya_aeppli`], [`tail`]).
//!
//! The `fishnet` binary wires both halves into reproducible campaigns; see
//! [`cli`] for the subcommand implementations and output formats.

pub mod cli;
pub mod ensemble;
pub mod mesh;
pub mod order_stats;
pub mod polya_aeppli;
pub mod solver;
pub mod strength;
pub mod tail;

pub use ensemble::{EnsembleConfig, EnsembleResult};
pub use mesh::{FishnetTopology, LinkState, SofteningLaw};
pub use order_stats::OrderStatBasis;
pub use polya_aeppli::PolyaAeppli;
pub use solver::{run_simulation, SimulationConfig, SimulationRecord};
pub use strength::StrengthDistribution;
pub use tail::{GammaScaling, TailModel};

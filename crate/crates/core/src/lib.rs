//! Simulation and analysis toolkit for evolving birth-death-competition
//! populations with rare mutations.
//!
//! The crate covers four linked layers:
//!
//! * [`model`]: trait space, demographic rates, mutation kernels, and the
//!   invasion-fitness functions built from them.
//! * [`lv`]: competitive Lotka-Volterra systems between mutation events,
//!   their equilibria, stability, and invasion outcomes.
//! * [`ibm`], [`pes`], [`tss`]: the stochastic processes at the three
//!   scales: exact individual-based simulation, the polymorphic evolution
//!   sequence of jumps between metastable equilibria, and the trait
//!   substitution sequence with its deterministic (canonical) limit.
//! * [`singularity`]: location and classification of evolutionary
//!   singularities, expansion diagnostics, and pairwise invasibility plots.
//!
//! Replicate batches and grid sweeps run through [`par`], which uses a
//! rayon pool when the `parallel` feature (default) is enabled and a plain
//! sequential loop otherwise. Results are identical either way because
//! every replicate owns an RNG stream derived from the master seed.

pub mod ibm;
pub mod lotka_volterra;
pub mod model;
pub mod ode;
pub mod par;
pub mod pes;
pub mod quad;
pub mod rng;
pub mod singularity;
pub mod tss;

pub use model::gaussian::GaussianExampleParams;
pub use model::{ModelError, ModelSpec, MutationKernel, TraitSpace};

//! Frequency-domain IQC verification and worst-case destabilizer synthesis
//! for finite-dimensional LTI systems.
//!
//! The library checks integral quadratic constraints of the form
//! `[G; I]^* Pi [G; I] < 0` over the stability boundary and, when a plant
//! violates one, constructs a real-rational stable uncertainty in the
//! complementary constraint set that makes the feedback loop singular or
//! drives its gain beyond any bound. The pieces:
//!
//! - [`lti`]: state-space systems, evaluation, interconnection algebra;
//! - [`grid`]: boundary grids and extremum refinement;
//! - [`analysis`]: H-infinity norms and passivity indices;
//! - [`multiplier`]: multipliers, quadratic forms, membership, J-spectral
//!   factors and the closed-form catalog;
//! - [`smallgain`]: peak-gain certificates and rank-one all-pass
//!   perturbations;
//! - [`destabilizer`]: chain scattering, destabilizer synthesis, certificate
//!   verification and the gain-divergence family;
//! - [`feedback`]: loop well-posedness, stability, gain;
//! - [`tables`]: scripted reproduction of the stability condition matrices;
//! - [`io`], [`cli`], [`sampling`]: interchange formats, the command-line
//!   frontend, and seeded test-system generators.

pub mod analysis;
pub mod cli;
pub mod destabilizer;
pub mod error;
pub mod feedback;
pub mod grid;
pub mod io;
pub mod lti;
pub mod multiplier;
pub mod sampling;
pub mod smallgain;
pub mod tables;

pub use error::{Error, Result};
pub use grid::FrequencyGrid;
pub use lti::{Domain, StateSpaceSystem};
pub use multiplier::{JSpectralFactors, Multiplier, SetId};

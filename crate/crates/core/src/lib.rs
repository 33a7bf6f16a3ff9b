// SPDX-License-Identifier: Apache-2.0

//! Dephasing, phase shift and fringe visibility induced by Bremsstrahlung
//! emission in a Stern-Gerlach interferometer.
//!
//! Two formulations are implemented side by side:
//!
//! * [`qbe`]: the non-spin and spin dephasing integrals obtained from the
//!   damping term of the quantum Boltzmann equation, plus the phase shift
//!   carried by the spin term;
//! * [`influence`]: the classical-current decoherence functional and its
//!   closed forms, used as an independent check of the non-spin path.
//!
//! All computation happens in natural units (ħ = c = k_B = 1) with energies
//! in eV. Public entry points take SI quantities and convert through
//! [`units`].

pub mod bath;
pub mod cli;
pub mod error;
pub mod influence;
pub mod qbe;
pub mod quadrature;
pub mod scenarios;
pub mod special;
pub mod units;

pub use error::{Error, Result};

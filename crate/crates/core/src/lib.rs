//! Quantum Cramér–Rao laboratory: Helstrom and Fisher information, the
//! `tr(H⁻¹I) ≤ N(d-1)` trace bound, optimal qubit measurement designs and a
//! two-stage adaptive estimation protocol.

pub mod error;
pub mod matkit;
pub mod quantum;
pub mod random;
pub mod information;
pub mod design;
pub mod estimation;

pub use error::{Error, Result};

//! Finite-dimensional projection lattices, two-valued measures and
//! Kochen-Specker colourability.
//!
//! The crate is organised bottom-up: [`scalar`] and [`matrix`] provide exact
//! and float arithmetic, [`linalg`] the spectral calculus, [`lattice`],
//! [`rays`] and [`contexts`] the projection-lattice layer. On top of that sit
//! [`measures`] (probability measures, valuations, quasi-states), [`search`]
//! (colourability with replayable certificates), [`algebra`] (density
//! operators, GNS, central decomposition) and [`presheaf`].

pub mod algebra;
pub mod contexts;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod matrix;
pub mod measures;
pub mod presheaf;
pub mod random;
pub mod rays;
pub mod rayset;
pub mod scalar;
pub mod search;

pub use error::{Error, Result};

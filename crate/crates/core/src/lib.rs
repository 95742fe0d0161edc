//! Kinetic Vlasov–Poisson solver for particles falling under gravity onto a
//! wall, in the horizontally periodic half-space `T² × [0, ∞)`.
//!
//! The crate builds steady states with an inflow boundary condition by Picard
//! iteration along characteristics, evolves perturbations of them with a
//! Duhamel scheme, and checks the quantitative bounds that accompany both.

pub mod boundary;
pub mod characteristics;
pub mod conditions;
pub mod distribution;
pub mod dynamic;
pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod poisson;
pub mod quadrature;
pub mod steady;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/poisson.md")]
    mod poisson {}
    #[doc = include_str!("../../../book/src/characteristics.md")]
    mod characteristics {}
    #[doc = include_str!("../../../book/src/steady.md")]
    mod steady {}
    #[doc = include_str!("../../../book/src/dynamic.md")]
    mod dynamic {}
    #[doc = include_str!("../../../book/src/verify.md")]
    mod verify {}
    #[doc = include_str!("../../../book/src/io.md")]
    mod io {}
}

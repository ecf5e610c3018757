//! Localization diagnostics for periodically driven Anderson models.

pub mod disorder;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod operators;
pub mod resolvent;
pub mod dynamics;
pub mod experiments;
pub mod cli;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/quasi_energy.md")]
    mod quasi_energy {}
    #[doc = include_str!("../../../book/src/greens.md")]
    mod greens {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

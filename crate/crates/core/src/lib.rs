//! Model-free pricing and hedging on a finite path grid.
//!
//! The engine decides whether a set of quoted options admits a martingale
//! pricing measure or a model-independent arbitrage, computes robust price
//! bounds for further payoffs together with the semi-static hedges that
//! attain them, converts between call strips and marginal laws, and checks
//! the pathwise Doob hedge exhaustively.

pub mod error;
pub mod ftap;
pub mod gen;
pub mod instance;
pub mod lp;
pub mod marginals;
pub mod market;
pub mod martingale;
pub mod pathwise;
pub mod superrep;

pub use error::{Error, Result};

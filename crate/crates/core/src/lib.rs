//! Feature-space adapters that let a frozen univariate forecaster produce
//! multivariate, uncertainty-aware forecasts.
//!
//! The pipeline is `dec(f(enc(X)))`: an encoder maps each time step of a
//! `L × D` context into a `D′`-channel latent space, the frozen forecaster
//! `f` runs on every latent channel independently, and the decoder maps the
//! `H × D′` latent forecast back to `H × D`.

pub mod adapters;
pub mod data;
pub mod error;
pub mod eval;
pub mod forecaster;
pub mod numkit;
pub mod optim;

pub use error::{Error, Result};
pub use numkit::{Matrix, Rng};

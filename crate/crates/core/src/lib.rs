//! A small laboratory for studying how cross-entropy, Blurry and
//! Piecewise-zero losses respond to the initial guessing bias of deep ReLU
//! networks.
//!
//! The library is organised bottom-up: [`numerics`] (matrices, seeded
//! randomness, softmax, He init), [`losses`], [`model`], [`diagnostics`],
//! [`trainer`] and [`data`]. [`config`], [`csvlog`] and [`svg`] back the
//! `igb-lab` command-line tool.

pub mod cli;
pub mod config;
pub mod csvlog;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod losses;
pub mod model;
pub mod numerics;
pub mod svg;
pub mod trainer;

pub use error::{Error, Result};

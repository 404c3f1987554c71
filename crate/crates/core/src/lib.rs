//! Numerical toolkit for holomorphic correspondences on the Riemann sphere.

pub mod commands;
pub mod config;
pub mod correspondence;
pub mod entropy;
pub mod error;
pub mod family;
pub mod fit;
pub mod graph;
pub mod io;
pub mod measures;
pub mod poly;
pub mod ramification;
pub mod rational;
pub mod raster;
pub mod resultant;
pub mod sphere;
pub mod verify;

pub use error::{Error, Result};

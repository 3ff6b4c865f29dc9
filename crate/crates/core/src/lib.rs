//! Discrete Teichmüller-theory laboratory on closed hyperbolic surfaces.

pub mod ads;
pub mod center;
pub mod error;
pub mod geom;
pub mod grafting3d;
pub mod harmonic;
pub mod landslide;
pub mod minlag;
pub mod oracle;
pub mod quaddiff;
pub mod wolf;

pub use error::{LabError, Result};

//! Linear stability numerics for the self-similar power-law vortex, one
//! azimuthal mode at a time.

pub mod appendix;
pub mod error;
pub mod grid;
pub mod identities;
pub mod mode;
pub mod params;
pub mod quad;
pub mod resolvent;
pub mod runner;
pub mod special;
pub mod spectrum;
pub mod testfn;

pub use num_complex::Complex64 as C64;

pub mod disc;
pub mod error;
pub mod fft;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod herm;
pub mod io;
pub mod spectral;
pub mod sum;
pub mod krylov;
pub mod monitor;
pub mod operators;

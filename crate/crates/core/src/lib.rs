//! Full-duplex bisparse blind deconvolution (FD-BBD) key agreement.
//!
//! Alice and Bob transmit coded sparse signals simultaneously over a
//! reciprocal multipath channel. Each side blindly deconvolves the received
//! superposition with HiHTP, recovers `h (x) beta_other`, and combines it
//! with its own signal in the DFT domain to obtain a common secret. An
//! eavesdropper only sees `h (x) (beta_A + gamma beta_B)`.
//!
//! Modules, bottom-up:
//! - [`signals`]: random sparse signals, channels, codebooks, noise, convolution.
//! - [`lifting`]: the lifted linear operator and its adjoint.
//! - [`hihtp`]: the hierarchical hard thresholding pursuit solver.
//! - [`keygen`]: secret computation, quantization, hashing, full protocol.
//! - [`adversary`]: eavesdropper observation models and the separation attack.
//! - [`security`]: entropy bounds and brute-force verification oracles.
//! - [`harness`]: Monte Carlo experiments, CSV/JSON output, SVG plots.

pub mod adversary;
pub mod dft;
pub mod error;
pub mod harness;
pub mod hihtp;
pub mod keygen;
pub mod lifting;
pub mod rng;
pub mod security;
pub mod signals;
pub mod vector;

pub use error::{Error, Result};
pub use vector::C64;

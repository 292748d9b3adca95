//! Simulation of two single-photon qubit carriers whose internal (spectral)
//! degrees of freedom form a joint "environment".
//!
//! The central quantity is the flip-operator expectation `D = Tr[F ρ]` over the
//! joint environment. Its magnitude bounds the fidelity of a linear-optical
//! qubit-transfer protocol (partial rail exchange, projective measurement and
//! feed-forward), and it is measured directly by the depth of a Hong-Ou-Mandel
//! dip.
//!
//! Modules:
//! - [`linalg`]: small dense complex linear algebra and state metrics.
//! - [`environment`]: environment states, the flip operator and `D`.
//! - [`spectral`]: SPDC two-photon spectra, `D(Δt)` and HOM coincidences.
//! - [`protocol`]: qubit transfer and quantum erasure.
//! - [`tomography`]: Poissonian count simulation and maximum-likelihood reconstruction.
//! - [`cli`]: run configuration, CSV output and the command implementations.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod environment;
pub mod error;
pub mod linalg;
pub mod protocol;
pub mod sample;
pub mod spectral;
pub mod tomography;

pub use error::{Error, Result};

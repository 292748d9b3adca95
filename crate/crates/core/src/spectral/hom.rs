use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::SpectralModel;
use crate::environment::EnvState;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, I, ONE};

/// Largest `|D|` accepted at the normalization delay.
pub const REFERENCE_TOL: f64 = 0.02;

/// One delay setting of a Hong-Ou-Mandel scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomPoint {
    pub delay: f64,
    pub d: f64,
    /// Coincidence probability `(1 − D)/2`.
    pub p_c: f64,
    /// Coincidence rate relative to fully distinguishable photons, `2·P_C = 1 − D`.
    pub r_rel: f64,
}

impl HomPoint {
    fn from_d(delay: f64, d: f64) -> Self {
        let p_c = 0.5 * (1.0 - d);
        Self {
            delay,
            d,
            p_c,
            r_rel: 2.0 * p_c,
        }
    }
}

/// Evaluates `D`, `P_C` and `R_rel` at every delay, in input order.
///
/// `R_rel` is normalized to the coincidence rate of distinguishable photons,
/// which is what a reference delay far outside the dip measures; the
/// reference is checked to satisfy `|D| < REFERENCE_TOL`.
pub fn hom_scan(model: &SpectralModel, delays: &[f64], reference_delay: f64) -> Result<Vec<HomPoint>> {
    let d_ref = model.flip_expectation(reference_delay)?;
    if d_ref.abs() >= REFERENCE_TOL {
        return Err(Error::InvalidParameter(format!(
            "reference delay {reference_delay} ps is too close to the dip (|D| = {:.3e})",
            d_ref.abs()
        )));
    }
    delays
        .par_iter()
        .map(|&dt| model.flip_expectation(dt).map(|d| HomPoint::from_d(dt, d)))
        .collect()
}

/// Coincidence probability of the two photons behind a balanced beam splitter,
/// computed from the explicit mode transformation
/// `a† → (i c† + d†)/√2`, `b† → (c† + i d†)/√2`
/// applied to the symmetrized two-photon wavefunction, then post-selected on
/// one photon in each output port.
pub fn beam_splitter_coincidence(env: &EnvState) -> Result<f64> {
    if env.ds() != env.dt() {
        return Err(Error::DimensionMismatch {
            expected: env.ds(),
            found: env.dt(),
        });
    }
    let d = env.ds();
    // single-photon space: port (0 = a/c, 1 = b/d) ⊗ environment
    let single = 2 * d;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let port_map = [[I * h, ONE * h], [ONE * h, I * h]]; // port_map[out][in]

    // columns: images of |a i⟩|b k⟩ in the first-quantized two-photon space
    let mut w = ComplexMatrix::zeros(single * single, d * d);
    for i in 0..d {
        for k in 0..d {
            let col = i * d + k;
            for out1 in 0..2 {
                for out2 in 0..2 {
                    let amp_ab = port_map[out1][0] * port_map[out2][1];
                    let amp_ba = port_map[out1][1] * port_map[out2][0];
                    // |a i⟩|b k⟩ and |b k⟩|a i⟩, each with weight 1/√2
                    let r1 = (out1 * d + i) * single + (out2 * d + k);
                    let r2 = (out1 * d + k) * single + (out2 * d + i);
                    w[(r1, col)] += amp_ab * h;
                    w[(r2, col)] += amp_ba * h;
                }
            }
        }
    }
    let out = &w * env.rho().matrix() * w.adjoint();
    let mut p = 0.0;
    for x1 in 0..single {
        for x2 in 0..single {
            if (x1 / d) != (x2 / d) {
                let r = x1 * single + x2;
                p += out[(r, r)].re;
            }
        }
    }
    let total: Complex64 = out.diagonal().iter().sum();
    debug_assert!((total.re - 1.0).abs() < 1e-9);
    Ok(p)
}

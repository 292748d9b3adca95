//! Qubit transfer between two dual-rail photons by partial rail exchange,
//! projective measurement of the source and feed-forward on the target, and
//! the mirror task of quantum erasure.
//!
//! The composite state lives on `S ⊗ T ⊗ E_S ⊗ E_T` with index
//! `s·2d² + t·d² + i·d + k`; qubit index 0 is `|0,1⟩` and index 1 is `|1,0⟩`.
//!
//! Post-selection is bookkept over rail occupations: each input branch routes
//! the two photons through the rail exchange and survives only if each qubit
//! still holds exactly one photon. The phase `θ` is only used to prepare the
//! source and to score the output; measurement and feed-forward never read it.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64;

use crate::environment::{flip_expectation, EnvState};
use crate::error::{Error, Result};
use crate::linalg::{outer, ComplexMatrix, DensityMatrix, QubitState, ONE, ZERO};

const EQUATORIAL_TOL: f64 = 1e-12;

/// Phase of an equatorial source state, kept in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquatorialPhase(f64);

impl EquatorialPhase {
    pub fn from_radians(theta: f64) -> Self {
        Self(theta.rem_euclid(TAU))
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::from_radians(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// `(|0,1⟩ + e^{iθ}|1,0⟩)/√2`
    pub fn state(self) -> [Complex64; 2] {
        [
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            Complex64::from_polar(FRAC_1_SQRT_2, self.0),
        ]
    }

    /// `(|0,1⟩ − e^{iθ}|1,0⟩)/√2`
    pub fn orthogonal(self) -> [Complex64; 2] {
        Self::from_radians(self.0 + PI).state()
    }
}

pub fn make_source(theta: EquatorialPhase) -> QubitState {
    QubitState::Pure(theta.state())
}

/// `(|0,1⟩ + |1,0⟩)/√2`, the initial target state.
pub fn make_target() -> QubitState {
    make_source(EquatorialPhase::from_radians(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rail {
    S1,
    S2,
    T1,
    T2,
}

impl Rail {
    fn on_source(self) -> bool {
        matches!(self, Rail::S1 | Rail::S2)
    }

    /// Qubit basis index of a photon sitting in this rail.
    fn label(self) -> usize {
        match self {
            Rail::S1 | Rail::T1 => 1,
            Rail::S2 | Rail::T2 => 0,
        }
    }
}

/// Where each input rail ends up. The `|1,0⟩` rail of the source is exchanged
/// into the target's `|1,0⟩` slot and the target's `|1,0⟩` rail into the
/// source's `|0,1⟩` slot; the source's own `|0,1⟩` rail takes the remaining
/// source slot. The two surviving branches are then
/// `|1,0⟩_S|0,1⟩_T|ψ_i ψ_k⟩` and `e^{iθ}|0,1⟩_S|1,0⟩_T|ψ_k ψ_i⟩`.
fn route(rail: Rail) -> Rail {
    match rail {
        Rail::S1 => Rail::T1,
        Rail::S2 => Rail::S1,
        Rail::T1 => Rail::S2,
        Rail::T2 => Rail::T2,
    }
}

/// A surviving branch: input `(s, t)` goes to output `(s', t')`, with the
/// environments exchanged when the photons changed qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Branch {
    input: (usize, usize),
    output: (usize, usize),
    exchanged: bool,
}

fn surviving_branches() -> Vec<Branch> {
    let mut out = Vec::new();
    for s in 0..2 {
        for t in 0..2 {
            let src = route(if s == 1 { Rail::S1 } else { Rail::S2 });
            let tgt = route(if t == 1 { Rail::T1 } else { Rail::T2 });
            match (src.on_source(), tgt.on_source()) {
                (true, false) => out.push(Branch {
                    input: (s, t),
                    output: (src.label(), tgt.label()),
                    exchanged: false,
                }),
                (false, true) => out.push(Branch {
                    input: (s, t),
                    output: (tgt.label(), src.label()),
                    exchanged: true,
                }),
                _ => {}
            }
        }
    }
    out
}

/// Post-selected composite state after the partial exchange.
#[derive(Debug, Clone)]
pub struct ExchangedState {
    rho: DensityMatrix,
    env_dim: usize,
    prior_d: f64,
    success_probability: f64,
}

impl ExchangedState {
    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    /// `D` of the environment the photons were prepared with; the a-priori
    /// knowledge used for sign compensation.
    pub fn prior_d(&self) -> f64 {
        self.prior_d
    }

    /// Probability of finding one photon per qubit.
    pub fn success_probability(&self) -> f64 {
        self.success_probability
    }

    /// Reduced two-qubit state `ρ_ST` with the environments traced out.
    pub fn qubit_state(&self) -> DensityMatrix {
        let e = self.env_dim * self.env_dim;
        let m = self.rho.matrix();
        let out = ComplexMatrix::from_fn(4, 4, |a, b| (0..e).map(|x| m[(a * e + x, b * e + x)]).sum());
        DensityMatrix::from_trusted(out)
    }
}

fn check_equatorial(q: &QubitState) -> Result<[Complex64; 2]> {
    let amps = q
        .amplitudes()
        .ok_or_else(|| Error::InvalidState("source must be a pure state".into()))?;
    if (amps[0].norm_sqr() - 0.5).abs() > EQUATORIAL_TOL || (amps[1].norm_sqr() - 0.5).abs() > EQUATORIAL_TOL {
        return Err(Error::InvalidState(
            "only equatorial source states are supported".into(),
        ));
    }
    Ok(amps)
}

fn check_target(q: &QubitState) -> Result<[Complex64; 2]> {
    let amps = q
        .amplitudes()
        .ok_or_else(|| Error::InvalidState("target must be a pure state".into()))?;
    let phi = EquatorialPhase::from_radians(0.0).state();
    let ov: Complex64 = phi.iter().zip(&amps).map(|(a, b)| a.conj() * b).sum();
    if (ov.norm_sqr() - 1.0).abs() > EQUATORIAL_TOL {
        return Err(Error::InvalidState(
            "target must be prepared in (|0,1> + |1,0>)/sqrt(2)".into(),
        ));
    }
    Ok(amps)
}

/// Applies the rail exchange to `|Ψ⟩_S ⊗ |Φ⟩_T ⊗ ρ_E` and post-selects one
/// photon per qubit.
pub fn partial_exchange(source: &QubitState, target: &QubitState, env: &EnvState) -> Result<ExchangedState> {
    let alpha = check_equatorial(source)?;
    let beta = check_target(target)?;
    if env.ds() != env.dt() {
        return Err(Error::DimensionMismatch {
            expected: env.ds(),
            found: env.dt(),
        });
    }
    let d = env.ds();
    let e = d * d;
    let n = 4 * e;

    // partial isometry on S⊗T⊗E: input basis index -> output basis index
    let mut image: Vec<Option<usize>> = vec![None; n];
    for br in surviving_branches() {
        let (s, t) = br.input;
        let (so, to) = br.output;
        for i in 0..d {
            for k in 0..d {
                let (io, ko) = if br.exchanged { (k, i) } else { (i, k) };
                image[s * 2 * e + t * e + i * d + k] = Some(so * 2 * e + to * e + io * d + ko);
            }
        }
    }

    let qubits = outer(&[
        alpha[0] * beta[0],
        alpha[0] * beta[1],
        alpha[1] * beta[0],
        alpha[1] * beta[1],
    ]);
    let env_m = env.rho().matrix();
    let mut out = ComplexMatrix::zeros(n, n);
    for a in 0..n {
        let Some(ra) = image[a] else { continue };
        for b in 0..n {
            let Some(rb) = image[b] else { continue };
            // ρ_ini = |ΨΦ⟩⟨ΨΦ| ⊗ ρ_E
            out[(ra, rb)] = qubits[(a / e, b / e)] * env_m[(a % e, b % e)];
        }
    }
    let p: f64 = out.diagonal().iter().map(|c| c.re).sum();
    if !(p > 0.0) {
        return Err(Error::Numerical("post-selection probability vanishes".into()));
    }
    Ok(ExchangedState {
        rho: DensityMatrix::from_trusted(out.unscale(p)),
        env_dim: d,
        prior_d: flip_expectation(env)?,
        success_probability: p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Qubit {
    S,
    T,
}

/// Unnormalized state of the unmeasured qubit after projecting `measured` on
/// `|m⟩`, with all environments traced out.
fn conditional(state: &ExchangedState, measured: Qubit, m: &[Complex64; 2]) -> ComplexMatrix {
    let e = state.env_dim * state.env_dim;
    let rho = state.rho.matrix();
    let idx = |s: usize, t: usize, x: usize| s * 2 * e + t * e + x;
    ComplexMatrix::from_fn(2, 2, |a, b| {
        let mut acc = ZERO;
        for x in 0..e {
            for u in 0..2 {
                for w in 0..2 {
                    let coeff = m[u].conj() * m[w];
                    let entry = match measured {
                        Qubit::S => rho[(idx(u, a, x), idx(w, b, x))],
                        Qubit::T => rho[(idx(a, u, x), idx(b, w, x))],
                    };
                    acc += coeff * entry;
                }
            }
        }
        acc
    })
}

/// `|1,0⟩ → −|1,0⟩`
fn pi_flip(m: &ComplexMatrix) -> ComplexMatrix {
    let z = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, -ONE]));
    &z * m * &z
}

/// Exchange of the two rail labels, `|0,1⟩ ↔ |1,0⟩`.
fn relabel(m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(2, 2, |a, b| m[(1 - a, 1 - b)])
}

#[derive(Debug, Clone)]
pub struct TransferOutcome {
    /// Conditional output states before feed-forward.
    pub rho_plus: DensityMatrix,
    pub rho_minus: DensityMatrix,
    /// Output averaged over both outcomes after feed-forward.
    pub rho_corrected: DensityMatrix,
    pub p_plus: f64,
    pub p_minus: f64,
    /// `D` governing the corrected output (`|D|` once sign-compensated).
    pub d_effective: f64,
}

impl TransferOutcome {
    /// `⟨Ψ|ρ|Ψ⟩` against the equatorial input.
    pub fn overlap(&self, theta: EquatorialPhase) -> f64 {
        self.rho_corrected.overlap(&theta.state())
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.rho_corrected.max_eigenvalue()
    }

    pub fn purity(&self) -> f64 {
        crate::linalg::purity(&self.rho_corrected)
    }
}

fn readout(state: &ExchangedState, measured: Qubit, compensate_sign: bool) -> TransferOutcome {
    let plus = [Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(FRAC_1_SQRT_2, 0.0)];
    let minus = [Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(-FRAC_1_SQRT_2, 0.0)];
    let cp = conditional(state, measured, &plus);
    let cm = conditional(state, measured, &minus);
    let p_plus = crate::linalg::trace(&cp).re;
    let p_minus = crate::linalg::trace(&cm).re;
    let flip_sign = compensate_sign && state.prior_d < 0.0;
    // the flip goes on "−", or on "+" when compensating a negative D
    let corrected = if flip_sign {
        pi_flip(&cp) + &cm
    } else {
        &cp + pi_flip(&cm)
    };
    TransferOutcome {
        rho_plus: DensityMatrix::from_trusted(cp.unscale(p_plus)),
        rho_minus: DensityMatrix::from_trusted(cm.unscale(p_minus)),
        rho_corrected: DensityMatrix::from_trusted_unnormalized(corrected),
        p_plus,
        p_minus,
        d_effective: if flip_sign { -state.prior_d } else { state.prior_d },
    }
}

/// Measures the source in `|±⟩ = (|0,1⟩ ± |1,0⟩)/√2` and, on `−`, applies the
/// π-flip to the target. With `compensate_sign` and a negative prior `D`, the
/// flip is applied on `+` instead.
pub fn measure_and_feedforward(state: &ExchangedState, compensate_sign: bool) -> TransferOutcome {
    readout(state, Qubit::S, compensate_sign)
}

/// Mirror of the transfer: measures the target and feeds forward onto the
/// source, concentrating the phase back onto qubit S. States are reported in
/// the source's original rail labels (the exchange routes the source's
/// `|0,1⟩` rail into the slot labelled `|1,0⟩`).
pub fn erase(state: &ExchangedState, compensate_sign: bool) -> TransferOutcome {
    let raw = readout(state, Qubit::T, compensate_sign);
    let back = |r: &DensityMatrix| DensityMatrix::from_trusted(relabel(r.matrix()));
    TransferOutcome {
        rho_plus: back(&raw.rho_plus),
        rho_minus: back(&raw.rho_minus),
        rho_corrected: back(&raw.rho_corrected),
        ..raw
    }
}

/// `½[I ± D(e^{−iθ}|0,1⟩⟨1,0| + h.c.)]`
fn dephased(theta: EquatorialPhase, d: f64) -> DensityMatrix {
    let off = Complex64::from_polar(0.5 * d, -theta.radians());
    let m = ComplexMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(0.5, 0.0), off, off.conj(), Complex64::new(0.5, 0.0)],
    );
    DensityMatrix::from_trusted(m)
}

/// Closed-form outcome: `ρ_T = (1+D)/2 |Ψ⟩⟨Ψ| + (1−D)/2 |Ψ⊥⟩⟨Ψ⊥|`.
pub fn transfer_analytic(theta: EquatorialPhase, d: f64, compensate_sign: bool) -> Result<TransferOutcome> {
    if !(d.abs() <= 1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("|D| = {} exceeds 1", d.abs())));
    }
    let d = d.clamp(-1.0, 1.0);
    let d_eff = if compensate_sign { d.abs() } else { d };
    Ok(TransferOutcome {
        rho_plus: dephased(theta, d),
        rho_minus: dephased(theta, -d),
        rho_corrected: dephased(theta, d_eff),
        p_plus: 0.5,
        p_minus: 0.5,
        d_effective: d_eff,
    })
}

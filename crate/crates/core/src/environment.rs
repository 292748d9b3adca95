//! Joint state of the two carriers' internal degrees of freedom and the flip
//! operator acting on it.
//!
//! An [`EnvState`] lives on `C^dS ⊗ C^dT` with the joint index `(i, k) ↦ i·dT + k`,
//! so that its matrix elements are the coefficients
//! `c_{ij,kl} = ⟨ψ_i ψ_k| ρ |ψ_j ψ_l⟩`. The flip operator exchanges the two
//! factors, `F |ψ_m⟩|ψ_n⟩ = |ψ_n⟩|ψ_m⟩`, and `D = Tr[F ρ] = Σ_{ij} c_{ij,ji}`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{check_unitary, kron, ComplexMatrix, DensityMatrix, ONE, ZERO};

/// Tolerance below which a negative `D` is not reported as an entanglement witness.
pub const WITNESS_TOL: f64 = 1e-10;

/// Imaginary part of `Tr[F ρ]` above which the state is considered corrupted.
const IMAG_ERROR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    ds: usize,
    dt: usize,
    rho: DensityMatrix,
}

impl EnvState {
    pub fn new(ds: usize, dt: usize, rho: DensityMatrix) -> Result<Self> {
        if ds == 0 || dt == 0 {
            return Err(Error::InvalidParameter("subsystem dimensions must be positive".into()));
        }
        if rho.dim() != ds * dt {
            return Err(Error::DimensionMismatch {
                expected: ds * dt,
                found: rho.dim(),
            });
        }
        Ok(Self { ds, dt, rho })
    }

    pub fn pure(ds: usize, dt: usize, psi: &[Complex64]) -> Result<Self> {
        Self::new(ds, dt, DensityMatrix::pure(psi)?)
    }

    /// `ρ_S ⊗ ρ_T`
    pub fn product(s: &DensityMatrix, t: &DensityMatrix) -> Self {
        Self {
            ds: s.dim(),
            dt: t.dim(),
            rho: crate::linalg::tensor(s, t),
        }
    }

    /// `(|01⟩ − |10⟩)/√2`, `D = −1`.
    pub fn singlet() -> Self {
        Self::bell(-1.0)
    }

    /// `(|01⟩ + |10⟩)/√2`, `D = +1`.
    pub fn symmetric_bell() -> Self {
        Self::bell(1.0)
    }

    // entries written out so that D comes out as exactly ±1
    fn bell(sign: f64) -> Self {
        let mut m = ComplexMatrix::zeros(4, 4);
        m[(1, 1)] = Complex64::new(0.5, 0.0);
        m[(2, 2)] = Complex64::new(0.5, 0.0);
        m[(1, 2)] = Complex64::new(0.5 * sign, 0.0);
        m[(2, 1)] = Complex64::new(0.5 * sign, 0.0);
        Self::new(
            2,
            2,
            DensityMatrix::new(m).expect("Bell state is a valid density matrix"),
        )
        .expect("dimensions match")
    }

    /// `|ψ⟩|φ⟩` with qubit environments `ψ = |0⟩` and `φ = c|0⟩ + √(1−c²)|1⟩`, so `D = c²`.
    pub fn product_with_overlap(c: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&c) {
            return Err(Error::InvalidParameter(format!("overlap {c} outside [-1, 1]")));
        }
        let s = DensityMatrix::basis(2, 0);
        let phi = [
            Complex64::new(c, 0.0),
            Complex64::new((1.0 - c * c).max(0.0).sqrt(), 0.0),
        ];
        let t = DensityMatrix::pure(&phi)?;
        Ok(Self::product(&s, &t))
    }

    pub fn ds(&self) -> usize {
        self.ds
    }

    pub fn dt(&self) -> usize {
        self.dt
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    /// `c_{ij,kl} = ⟨ψ_i ψ_k| ρ |ψ_j ψ_l⟩`
    pub fn coefficient(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        self.rho.matrix()[(i * self.dt + k, j * self.dt + l)]
    }

    fn require_square(&self) -> Result<usize> {
        if self.ds != self.dt {
            return Err(Error::DimensionMismatch {
                expected: self.ds,
                found: self.dt,
            });
        }
        Ok(self.ds)
    }
}

/// The `d² × d²` permutation matrix exchanging the two factors of `C^d ⊗ C^d`.
pub fn build_flip(d: usize) -> ComplexMatrix {
    assert!(d >= 1, "flip operator needs d >= 1");
    let n = d * d;
    let mut f = ComplexMatrix::zeros(n, n);
    for i in 0..d {
        for k in 0..d {
            f[(i * d + k, k * d + i)] = ONE;
        }
    }
    f
}

/// `D = Tr[F ρ]`, summed over the `d²` index-swapped entries without forming `F`.
pub fn flip_expectation(env: &EnvState) -> Result<f64> {
    let d = env.require_square()?;
    let m = env.rho.matrix();
    let mut acc = ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += m[(i * d + j, j * d + i)];
        }
    }
    if acc.im.abs() > IMAG_ERROR_TOL {
        return Err(Error::Numerical(format!("Tr[F rho] has imaginary part {:.3e}", acc.im)));
    }
    Ok(acc.re)
}

/// Effective indistinguishability `|D|`.
pub fn indistinguishability(env: &EnvState) -> Result<f64> {
    flip_expectation(env).map(f64::abs)
}

/// Weights of a state on the symmetric and antisymmetric subspaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipDecomposition {
    pub p_sym: f64,
    pub p_anti: f64,
}

/// `p_sym = Tr[Π_sym ρ]`, `p_anti = Tr[Π_anti ρ]` with `Π_sym/anti = (I ± F)/2`.
pub fn flip_decompose(env: &EnvState) -> Result<FlipDecomposition> {
    let d = flip_expectation(env)?;
    let tr = env.rho.trace();
    Ok(FlipDecomposition {
        p_sym: 0.5 * (tr + d),
        p_anti: 0.5 * (tr - d),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Witness {
    /// `D < 0`: the state has weight on the antisymmetric subspace that no
    /// separable state can produce.
    Witnessed,
    /// Nothing can be concluded; this never certifies separability.
    Inconclusive,
}

pub fn witness_entanglement(env: &EnvState) -> Result<Witness> {
    let d = flip_expectation(env)?;
    Ok(if d < -WITNESS_TOL {
        Witness::Witnessed
    } else {
        Witness::Inconclusive
    })
}

/// Projection onto the Werner family: the average of `(U⊗U) ρ (U⊗U)†` over Haar `U`,
/// computed in closed form from the symmetric/antisymmetric weights.
pub fn twirl(env: &EnvState) -> Result<EnvState> {
    let d = env.require_square()?;
    let FlipDecomposition { p_sym, p_anti } = flip_decompose(env)?;
    let n = d * d;
    let id = ComplexMatrix::identity(n, n);
    let f = build_flip(d);
    let sym_dim = (d * (d + 1) / 2) as f64;
    let mut w = (&id + &f).scale(0.5 * p_sym / sym_dim);
    if d > 1 {
        let anti_dim = (d * (d - 1) / 2) as f64;
        w += (&id - &f).scale(0.5 * p_anti / anti_dim);
    }
    EnvState::new(d, d, DensityMatrix::from_trusted(w))
}

/// `(U ⊗ V) ρ (U ⊗ V)†`
pub fn apply_local_unitary(env: &EnvState, u: &ComplexMatrix, v: &ComplexMatrix) -> Result<EnvState> {
    check_unitary(u)?;
    check_unitary(v)?;
    if u.nrows() != env.ds {
        return Err(Error::DimensionMismatch {
            expected: env.ds,
            found: u.nrows(),
        });
    }
    if v.nrows() != env.dt {
        return Err(Error::DimensionMismatch {
            expected: env.dt,
            found: v.nrows(),
        });
    }
    let uv = kron(u, v);
    Ok(EnvState {
        ds: env.ds,
        dt: env.dt,
        rho: env.rho.conjugate_by(&uv),
    })
}

/// `F ρ F`: the state with the two carriers' environments exchanged.
pub fn exchange(env: &EnvState) -> Result<EnvState> {
    let d = env.require_square()?;
    let m = env.rho.matrix();
    let swapped = ComplexMatrix::from_fn(d * d, d * d, |r, c| {
        let (i, k) = (r / d, r % d);
        let (j, l) = (c / d, c % d);
        m[(k * d + i, l * d + j)]
    });
    EnvState::new(d, d, DensityMatrix::from_trusted(swapped))
}

/// Schmidt coefficients (descending) of a pure environment, from the SVD of its
/// `dS × dT` amplitude matrix.
pub fn schmidt_coefficients(env: &EnvState) -> Result<Vec<f64>> {
    let purity = crate::linalg::purity(&env.rho);
    if (purity - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!(
            "Schmidt decomposition needs a pure state (purity {purity})"
        )));
    }
    let eig = crate::linalg::eig_hermitian(env.rho.matrix())?;
    let psi = eig.vectors.column(0);
    let amp = ComplexMatrix::from_fn(env.ds, env.dt, |i, k| psi[i * env.dt + k]);
    let mut sv: Vec<f64> = amp.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, trace};
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_env(rng: &mut ChaCha8Rng, d: usize) -> EnvState {
        EnvState::new(d, d, sample::random_density(rng, d * d)).unwrap()
    }

    #[test]
    fn flip_small_cases() {
        assert_eq!(build_flip(1), ComplexMatrix::identity(1, 1));
        let f = build_flip(2);
        let expect = [[1., 0., 0., 0.], [0., 0., 1., 0.], [0., 1., 0., 0.], [0., 0., 0., 1.]];
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(f[(r, c)], Complex64::new(expect[r][c], 0.0));
            }
        }
    }

    #[test]
    fn flip_is_involution_exactly() {
        let f = build_flip(5);
        assert_eq!(&f * &f, ComplexMatrix::identity(25, 25));
        assert_eq!(f.adjoint(), f);
    }

    #[test]
    fn named_states() {
        assert_eq!(flip_expectation(&EnvState::singlet()).unwrap(), -1.0);
        assert!((flip_expectation(&EnvState::symmetric_bell()).unwrap() - 1.0).abs() < 1e-15);
        let e = EnvState::product_with_overlap(0.6).unwrap();
        assert!((flip_expectation(&e).unwrap() - 0.36).abs() < 1e-15);
    }

    #[test]
    fn identical_pure_product_has_unit_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = sample::random_pure(&mut rng, 4);
        let p = DensityMatrix::pure(&psi).unwrap();
        let env = EnvState::product(&p, &p);
        assert!((flip_expectation(&env).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn product_of_pure_states_gives_squared_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = sample::random_pure(&mut rng, 3);
        let b = sample::random_pure(&mut rng, 3);
        let ov: Complex64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
        let env = EnvState::product(&DensityMatrix::pure(&a).unwrap(), &DensityMatrix::pure(&b).unwrap());
        assert!((flip_expectation(&env).unwrap() - ov.norm_sqr()).abs() < 1e-14);
    }

    #[test]
    fn index_sum_matches_brute_force_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for d in 1..=8 {
            let env = random_env(&mut rng, d);
            let brute = trace(&(build_flip(d) * env.rho().matrix())).re;
            assert!((flip_expectation(&env).unwrap() - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn non_square_environment_is_rejected() {
        let env = EnvState::product(&DensityMatrix::maximally_mixed(2), &DensityMatrix::maximally_mixed(3));
        assert!(flip_expectation(&env).is_err());
        assert!(twirl(&env).is_err());
    }

    #[test]
    fn decomposition_cases() {
        let s = flip_decompose(&EnvState::singlet()).unwrap();
        assert!(s.p_sym.abs() < 1e-15 && (s.p_anti - 1.0).abs() < 1e-15);
        let p = flip_decompose(&EnvState::product_with_overlap(1.0).unwrap()).unwrap();
        assert!((p.p_sym - 1.0).abs() < 1e-15 && p.p_anti.abs() < 1e-15);
        let werner = twirl(&EnvState::product_with_overlap(0.5f64.sqrt()).unwrap()).unwrap();
        let w = flip_decompose(&werner).unwrap();
        assert!((w.p_sym - 0.75).abs() < 1e-12 && (w.p_anti - 0.25).abs() < 1e-12);
    }

    #[test]
    fn witness_cases() {
        assert_eq!(witness_entanglement(&EnvState::singlet()).unwrap(), Witness::Witnessed);
        assert_eq!(
            witness_entanglement(&EnvState::symmetric_bell()).unwrap(),
            Witness::Inconclusive
        );
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let a = sample::random_density(&mut rng, 3);
            let b = sample::random_density(&mut rng, 3);
            let env = EnvState::product(&a, &b);
            assert_eq!(witness_entanglement(&env).unwrap(), Witness::Inconclusive);
        }
    }

    #[test]
    fn twirl_of_singlet_and_idempotence() {
        let s = EnvState::singlet();
        let t = twirl(&s).unwrap();
        assert!(max_abs_diff(t.rho().matrix(), s.rho().matrix()) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let w = twirl(&random_env(&mut rng, 3)).unwrap();
        let ww = twirl(&w).unwrap();
        assert!(max_abs_diff(w.rho().matrix(), ww.rho().matrix()) < 1e-13);
    }

    #[test]
    fn twirl_commutes_with_flip_and_keeps_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let env = random_env(&mut rng, 3);
        let w = twirl(&env).unwrap();
        let f = build_flip(3);
        let m = w.rho().matrix();
        assert!(max_abs_diff(&(&f * m), &(m * &f)) < 1e-14);
        assert!((flip_expectation(&w).unwrap() - flip_expectation(&env).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn twirl_matches_haar_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let env = random_env(&mut rng, 3);
        let samples = 20_000;
        let mut acc = ComplexMatrix::zeros(9, 9);
        for _ in 0..samples {
            let u = sample::haar_unitary(&mut rng, 3);
            let uu = kron(&u, &u);
            acc += &uu * env.rho().matrix() * uu.adjoint();
        }
        acc.unscale_mut(samples as f64);
        let exact = twirl(&env).unwrap();
        assert!(max_abs_diff(&acc, exact.rho().matrix()) < 1e-2);
    }

    #[test]
    fn local_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let env = random_env(&mut rng, 3);
        let id = ComplexMatrix::identity(3, 3);
        let same = apply_local_unitary(&env, &id, &id).unwrap();
        assert!(max_abs_diff(same.rho().matrix(), env.rho().matrix()) < 1e-15);

        let u = sample::haar_unitary(&mut rng, 3);
        let rot = apply_local_unitary(&env, &u, &u).unwrap();
        assert!((flip_expectation(&rot).unwrap() - flip_expectation(&env).unwrap()).abs() < 1e-12);

        // U ≠ V on |ψ⟩|ψ⟩ gives |⟨ψ|U†V|ψ⟩|²
        let psi = sample::random_pure(&mut rng, 3);
        let p = DensityMatrix::pure(&psi).unwrap();
        let prod = EnvState::product(&p, &p);
        let v = sample::haar_unitary(&mut rng, 3);
        let moved = apply_local_unitary(&prod, &u, &v).unwrap();
        let x = nalgebra::DVector::from_vec(psi.clone());
        let direct: Complex64 = x
            .iter()
            .zip((u.adjoint() * &v * &x).iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!((flip_expectation(&moved).unwrap() - direct.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn non_unitary_is_rejected() {
        let env = EnvState::singlet();
        let mut bad = ComplexMatrix::identity(2, 2);
        bad[(0, 0)] = Complex64::new(2.0, 0.0);
        assert!(matches!(
            apply_local_unitary(&env, &bad, &ComplexMatrix::identity(2, 2)),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn exchange_preserves_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let env = random_env(&mut rng, 4);
        let f = build_flip(4);
        let ex = exchange(&env).unwrap();
        assert!(max_abs_diff(ex.rho().matrix(), &(&f * env.rho().matrix() * &f)) < 1e-15);
        assert!((flip_expectation(&ex).unwrap() - flip_expectation(&env).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn schmidt_of_named_states() {
        let s = schmidt_coefficients(&EnvState::singlet()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s[0] - h).abs() < 1e-12 && (s[1] - h).abs() < 1e-12);
        let p = schmidt_coefficients(&EnvState::product_with_overlap(0.3).unwrap()).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-7);
    }
}

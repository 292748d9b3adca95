//! Dense complex linear algebra for the small Hermitian systems used throughout
//! the crate: Kronecker products, partial traces, Hermitian eigendecomposition
//! and the usual state metrics.
//!
//! All matrices are dense. Environment dimensions stay well below a hundred, so
//! there is no sparse path.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Tolerance on `‖M − M†‖_max` for a matrix to be accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Lowest eigenvalue tolerated in a density matrix.
pub const PSD_TOL: f64 = -1e-10;
/// Tolerance on `|Tr ρ − 1|`.
pub const TRACE_TOL: f64 = 1e-12;
/// Tolerance on `‖U U† − I‖_max`.
pub const UNITARY_TOL: f64 = 1e-10;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest entry-wise modulus of `a − b`.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn hermiticity_residual(m: &ComplexMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

pub fn unitarity_residual(u: &ComplexMatrix) -> f64 {
    let n = u.nrows();
    max_abs_diff(&(u * u.adjoint()), &ComplexMatrix::identity(n, n))
}

pub fn check_unitary(u: &ComplexMatrix) -> Result<()> {
    if !u.is_square() {
        return Err(Error::NotSquare {
            rows: u.nrows(),
            cols: u.ncols(),
        });
    }
    let r = unitarity_residual(u);
    if r > UNITARY_TOL {
        return Err(Error::NotUnitary(r));
    }
    Ok(())
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Kronecker product with `a`'s index major: `(a ⊗ b)[(i·db + k), (j·db + l)] = a[i,j]·b[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// `|ψ⟩⟨ψ|`
pub fn outer(psi: &[Complex64]) -> ComplexMatrix {
    let n = psi.len();
    ComplexMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj())
}

/// `⟨ψ|M|ψ⟩`, real part. Intended for Hermitian `M`.
pub fn expectation(m: &ComplexMatrix, psi: &[Complex64]) -> f64 {
    let n = psi.len();
    assert_eq!(m.nrows(), n);
    let mut acc = ZERO;
    for i in 0..n {
        let mut row = ZERO;
        for j in 0..n {
            row += m[(i, j)] * psi[j];
        }
        acc += psi[i].conj() * row;
    }
    acc.re
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted in descending order; the columns of `vectors`
/// follow the same order. Ties keep the order produced by the solver.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `V Λ V†`
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lam);
        }
        let out = scaled * self.vectors.adjoint();
        debug_assert_eq!(out.nrows(), n);
        out
    }

    /// `V f(Λ) V†`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(lam));
        }
        scaled * self.vectors.adjoint()
    }
}

pub fn eig_hermitian(m: &ComplexMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let dev = hermiticity_residual(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    Ok(eig_symmetrized(m))
}

fn eig_symmetrized(m: &ComplexMatrix) -> HermitianEigen {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep the solver's order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// Which factor of a bipartite system survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    A,
    B,
}

/// A validated density matrix: Hermitian, unit trace, positive semi-definite.
///
/// Construction symmetrizes the input as `(M + M†)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidState("empty matrix".into()));
        }
        let dev = hermiticity_residual(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let m = (&m + m.adjoint()).scale(0.5);
        let tr = trace(&m).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::BadTrace(tr));
        }
        let min = eig_symmetrized(&m).values.last().copied().unwrap_or(0.0);
        if min < PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(Self { m })
    }

    /// Divides by the trace before validating.
    pub fn from_unnormalized(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let tr = trace(&m).re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::BadTrace(tr));
        }
        Self::new(m.unscale(tr))
    }

    /// Skips the eigenvalue check; for results of operations that preserve
    /// positivity by construction.
    pub(crate) fn from_trusted(m: ComplexMatrix) -> Self {
        debug_assert!(m.is_square());
        debug_assert!(hermiticity_residual(&m) < 1e-8);
        let m = (&m + m.adjoint()).scale(0.5);
        Self { m }
    }

    /// Normalizes by the trace, skipping the eigenvalue check.
    pub(crate) fn from_trusted_unnormalized(m: ComplexMatrix) -> Self {
        let tr = trace(&m).re;
        Self::from_trusted(m.unscale(tr))
    }

    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if psi.is_empty() || !(norm > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("state vector has squared norm {norm}")));
        }
        Ok(Self::from_trusted(outer(psi)))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        assert!(dim > 0);
        Self {
            m: ComplexMatrix::identity(dim, dim).unscale(dim as f64),
        }
    }

    /// `|index⟩⟨index|`
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim);
        let mut m = ComplexMatrix::zeros(dim, dim);
        m[(index, index)] = ONE;
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        trace(&self.m).re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eig_symmetrized(&self.m).values
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `⟨ψ|ρ|ψ⟩`
    pub fn overlap(&self, psi: &[Complex64]) -> f64 {
        expectation(&self.m, psi)
    }

    /// `U ρ U†`; the caller guarantees unitarity.
    pub(crate) fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self::from_trusted(u * &self.m * u.adjoint())
    }
}

pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::from_trusted(kron(a.matrix(), b.matrix()))
}

pub fn partial_trace(rho: &DensityMatrix, dims: (usize, usize), keep: Keep) -> Result<DensityMatrix> {
    let (da, db) = dims;
    if da == 0 || db == 0 || da * db != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: da * db,
            found: rho.dim(),
        });
    }
    let m = rho.matrix();
    let out = match keep {
        Keep::A => ComplexMatrix::from_fn(da, da, |i, j| (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()),
        Keep::B => ComplexMatrix::from_fn(db, db, |k, l| (0..da).map(|i| m[(i * db + k, i * db + l)]).sum()),
    };
    Ok(DensityMatrix::from_trusted(out))
}

/// Matrix square root of a positive semi-definite Hermitian matrix; negative
/// round-off eigenvalues are clamped to zero.
/// Eigenvalues below this fraction of the largest are round-off and would be
/// amplified by the square root.
const SQRT_CUTOFF: f64 = 1e-13;

fn clipped_sqrt(x: f64, scale: f64) -> f64 {
    if x > SQRT_CUTOFF * scale {
        x.sqrt()
    } else {
        0.0
    }
}

fn psd_sqrt(m: &ComplexMatrix) -> ComplexMatrix {
    let eig = eig_symmetrized(m);
    let scale = eig.values[0].max(0.0);
    eig.map(|x| clipped_sqrt(x, scale))
}

/// `[Tr √(√a b √a)]²`, clamped to `[0, 1]`.
pub fn uhlmann_fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let sa = psd_sqrt(a.matrix());
    let inner = &sa * b.matrix() * &sa;
    let values = eig_symmetrized(&inner).values;
    let scale = values[0].max(0.0);
    let root_trace: f64 = values.iter().map(|&x| clipped_sqrt(x, scale)).sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// `Tr[ρ²]`
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix().iter().map(|c| c.norm_sqr()).sum()
}

/// `½ Tr|a − b|`
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let diff = a.matrix() - b.matrix();
    Ok(0.5 * eig_symmetrized(&diff).values.iter().map(|x| x.abs()).sum::<f64>())
}

/// State of a dual-rail qubit. Index 0 is `|0,1⟩`, index 1 is `|1,0⟩`.
#[derive(Debug, Clone, PartialEq)]
pub enum QubitState {
    Pure([Complex64; 2]),
    Mixed(DensityMatrix),
}

impl QubitState {
    pub fn pure(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!(
                "qubit amplitudes have squared norm {norm}"
            )));
        }
        Ok(QubitState::Pure([alpha, beta]))
    }

    pub fn mixed(rho: DensityMatrix) -> Result<Self> {
        if rho.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: rho.dim(),
            });
        }
        Ok(QubitState::Mixed(rho))
    }

    pub fn amplitudes(&self) -> Option<[Complex64; 2]> {
        match self {
            QubitState::Pure(a) => Some(*a),
            QubitState::Mixed(_) => None,
        }
    }

    pub fn density(&self) -> DensityMatrix {
        match self {
            QubitState::Pure(a) => DensityMatrix::from_trusted(outer(a)),
            QubitState::Mixed(rho) => rho.clone(),
        }
    }

    /// Bloch vector `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` with `Z = |0⟩⟨0| − |1⟩⟨1|`.
    pub fn bloch(&self) -> [f64; 3] {
        let rho = self.density();
        let m = rho.matrix();
        [2.0 * m[(1, 0)].re, 2.0 * m[(1, 0)].im, (m[(0, 0)] - m[(1, 1)]).re]
    }
}

//! Random states and unitaries for property checks and Monte-Carlo oracles.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{kron, ComplexMatrix, DensityMatrix};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Normalized pure state drawn uniformly from the unit sphere.
pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..dim).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / norm).collect()
}

/// Density matrix `G G† / Tr[G G†]` with `G` a `dim × rank` Ginibre matrix.
pub fn random_density_with_rank<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> DensityMatrix {
    let g = ginibre(rng, dim, rank.max(1));
    DensityMatrix::from_trusted_unnormalized(&g * g.adjoint())
}

/// Full-rank Hilbert-Schmidt random density matrix.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    random_density_with_rank(rng, dim, dim)
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = ginibre(rng, dim, dim);
    (&g + g.adjoint()).scale(0.5)
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the phases of
/// `R`'s diagonal absorbed into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let qr = ginibre(rng, dim, dim).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `Σₙ pₙ ρₙ ⊗ σₙ` with `terms` random product components on `d ⊗ d`.
pub fn random_separable<R: Rng + ?Sized>(rng: &mut R, d: usize, terms: usize) -> DensityMatrix {
    let weights: Vec<f64> = (0..terms).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = ComplexMatrix::zeros(d * d, d * d);
    for w in weights {
        let rank_a = rng.random_range(1..=d);
        let rank_b = rng.random_range(1..=d);
        let a = random_density_with_rank(rng, d, rank_a);
        let b = random_density_with_rank(rng, d, rank_b);
        acc += kron(a.matrix(), b.matrix()).scale(w / total);
    }
    DensityMatrix::from_trusted_unnormalized(acc)
}

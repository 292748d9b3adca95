//! Gaussian quadrature rules from the Golub-Welsch eigenvalue method.

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Nodes are the eigenvalues of the symmetric Jacobi matrix with zero diagonal
/// and off-diagonal `beta`; weights are `mu0 · v₀²`.
fn golub_welsch(n: usize, beta: impl Fn(usize) -> f64, mu0: f64) -> Rule {
    assert!(n >= 1);
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = beta(k);
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // both weight functions are even: make the rule exactly mirror-symmetric
    for k in 0..n / 2 {
        let m = n - 1 - k;
        let x = 0.5 * (pairs[m].0 - pairs[k].0);
        let w = 0.5 * (pairs[m].1 + pairs[k].1);
        pairs[k] = (-x, w);
        pairs[m] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    golub_welsch(
        n,
        |k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        },
        2.0,
    )
}

/// Gauss-Hermite rule for the weight `e^{-x²}` on the real line.
pub fn gauss_hermite(n: usize) -> Rule {
    golub_welsch(n, |k| (k as f64 / 2.0).sqrt(), std::f64::consts::PI.sqrt())
}

//! Three-basis qubit tomography: Poissonian count simulation with unequal
//! detector efficiencies, numeric efficiency correction and maximum-likelihood
//! reconstruction by the `RρR` fixed-point iteration.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::linalg::{outer, purity, uhlmann_fidelity, ComplexMatrix, DensityMatrix, I, ONE, ZERO};

pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Floor on `Tr[Π_k ρ]` inside `R(ρ)`.
pub const PROBABILITY_FLOOR: f64 = 1e-15;
/// Allowed decrease of the log-likelihood per count before a step is rejected.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisLabel {
    Z,
    X,
    Y,
}

pub const ALL_BASES: [BasisLabel; 3] = [BasisLabel::Z, BasisLabel::X, BasisLabel::Y];

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisLabel::Z => "Z",
            BasisLabel::X => "X",
            BasisLabel::Y => "Y",
        })
    }
}

impl FromStr for BasisLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Z" | "z" => Ok(BasisLabel::Z),
            "X" | "x" => Ok(BasisLabel::X),
            "Y" | "y" => Ok(BasisLabel::Y),
            other => Err(Error::InvalidParameter(format!("unknown basis '{other}'"))),
        }
    }
}

/// A projective qubit measurement with two outcomes.
#[derive(Debug, Clone)]
pub struct MeasurementBasis {
    pub label: BasisLabel,
    pub vectors: [[Complex64; 2]; 2],
}

impl MeasurementBasis {
    pub fn new(label: BasisLabel) -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let vectors = match label {
            BasisLabel::Z => [[ONE, ZERO], [ZERO, ONE]],
            BasisLabel::X => [[h, h], [h, -h]],
            BasisLabel::Y => [[h, I * h], [h, -I * h]],
        };
        Self { label, vectors }
    }

    pub fn projectors(&self) -> [ComplexMatrix; 2] {
        [outer(&self.vectors[0]), outer(&self.vectors[1])]
    }

    /// Outcome probabilities `Tr[Π_k ρ]`.
    pub fn probabilities(&self, rho: &DensityMatrix) -> [f64; 2] {
        [rho.overlap(&self.vectors[0]), rho.overlap(&self.vectors[1])]
    }
}

/// Counts of the two detectors for one basis setting. Counts are real so that
/// efficiency-corrected rates can be carried forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountRecord {
    pub basis: BasisLabel,
    pub counts: [f64; 2],
    pub efficiencies: [f64; 2],
}

impl CountRecord {
    pub fn new(basis: BasisLabel, counts: [f64; 2], efficiencies: [f64; 2]) -> Result<Self> {
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "counts must be non-negative, got {counts:?}"
            )));
        }
        check_efficiencies(efficiencies)?;
        Ok(Self {
            basis,
            counts,
            efficiencies,
        })
    }

    pub fn total(&self) -> f64 {
        self.counts[0] + self.counts[1]
    }
}

fn check_efficiencies(eta: [f64; 2]) -> Result<()> {
    if eta.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "efficiencies must lie in (0, 1], got {eta:?}"
        )));
    }
    Ok(())
}

/// Generator for task `index` of a sweep seeded with `seed`; streams are
/// independent of the order in which tasks are executed.
pub fn task_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    // mean is finite and positive here, so construction cannot fail
    Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(0.0)
}

/// Draws `counts[k] ~ Poisson(mean_total · η_k · Tr[Π_k ρ])` for each basis.
pub fn simulate_counts_with<R: Rng + ?Sized>(
    rng: &mut R,
    rho: &DensityMatrix,
    bases: &[BasisLabel],
    mean_total_per_basis: f64,
    efficiencies: [f64; 2],
) -> Result<Vec<CountRecord>> {
    check_inputs(rho, mean_total_per_basis, efficiencies)?;
    Ok(bases
        .iter()
        .map(|&b| {
            let p = MeasurementBasis::new(b).probabilities(rho);
            let counts = [0, 1].map(|k| poisson(rng, mean_total_per_basis * efficiencies[k] * p[k].max(0.0)));
            CountRecord {
                basis: b,
                counts,
                efficiencies,
            }
        })
        .collect())
}

pub fn simulate_counts(
    rho: &DensityMatrix,
    bases: &[BasisLabel],
    mean_total_per_basis: f64,
    efficiencies: [f64; 2],
    seed: u64,
) -> Result<Vec<CountRecord>> {
    simulate_counts_with(&mut task_rng(seed, 0), rho, bases, mean_total_per_basis, efficiencies)
}

/// Noise-free records holding the expected counts.
pub fn expected_counts(
    rho: &DensityMatrix,
    bases: &[BasisLabel],
    mean_total_per_basis: f64,
    efficiencies: [f64; 2],
) -> Result<Vec<CountRecord>> {
    check_inputs(rho, mean_total_per_basis, efficiencies)?;
    Ok(bases
        .iter()
        .map(|&b| {
            let p = MeasurementBasis::new(b).probabilities(rho);
            let counts = [0, 1].map(|k| mean_total_per_basis * efficiencies[k] * p[k].max(0.0));
            CountRecord {
                basis: b,
                counts,
                efficiencies,
            }
        })
        .collect())
}

fn check_inputs(rho: &DensityMatrix, mean: f64, eta: [f64; 2]) -> Result<()> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mean counts must be positive, got {mean}"
        )));
    }
    check_efficiencies(eta)
}

/// Rescales counts by `1/η_k`; the returned record has unit efficiencies.
pub fn correct_efficiencies(record: &CountRecord) -> Result<CountRecord> {
    if record.efficiencies.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidParameter("zero detector efficiency".into()));
    }
    Ok(CountRecord {
        basis: record.basis,
        counts: [0, 1].map(|k| record.counts[k] / record.efficiencies[k]),
        efficiencies: [1.0, 1.0],
    })
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub rho_rec: DensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after each accepted iteration, starting with the initial state.
    pub trace: Vec<f64>,
    /// Iterations where the plain step lowered the likelihood and a diluted
    /// step `(I + εR)ρ(I + εR)` was taken instead.
    pub diluted_steps: usize,
}

type M2 = Matrix2<Complex64>;

struct Term {
    weight: f64,
    projector: M2,
    vector: Vector2<Complex64>,
}

fn prob(t: &Term, rho: &M2) -> f64 {
    (t.vector.adjoint() * rho * t.vector)[(0, 0)].re
}

fn log_likelihood(terms: &[Term], rho: &M2) -> f64 {
    terms
        .iter()
        .filter(|t| t.weight > 0.0)
        .map(|t| t.weight * prob(t, rho).max(PROBABILITY_FLOOR).ln())
        .sum()
}

fn r_operator(terms: &[Term], rho: &M2, total: f64) -> M2 {
    let mut r = M2::zeros();
    for t in terms {
        if t.weight > 0.0 {
            r += t.projector * Complex64::from(t.weight / (total * prob(t, rho).max(PROBABILITY_FLOOR)));
        }
    }
    r
}

fn normalized_sandwich(m: &M2, rho: &M2) -> M2 {
    let out = m * rho * m.adjoint();
    let out = (out + out.adjoint()) * Complex64::from(0.5);
    let tr = out.trace().re;
    out / Complex64::from(tr)
}

/// Maximum-likelihood state from count records.
///
/// Records with non-unit efficiencies are corrected first. Iteration starts
/// at `I/2` and stops when the log-likelihood gain per count drops below `tol`.
pub fn mle_reconstruct(records: &[CountRecord], max_iters: usize, tol: f64) -> Result<ReconstructionResult> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no count records".into()));
    }
    let mut terms = Vec::with_capacity(2 * records.len());
    for r in records {
        let c = correct_efficiencies(r)?;
        if c.counts.iter().any(|n| !n.is_finite() || *n < 0.0) {
            return Err(Error::InvalidParameter(format!("invalid counts in basis {}", r.basis)));
        }
        if c.total() <= 0.0 {
            return Err(Error::InvalidParameter(format!("no counts in basis {}", r.basis)));
        }
        let basis = MeasurementBasis::new(r.basis);
        for k in 0..2 {
            let v = Vector2::from(basis.vectors[k]);
            terms.push(Term {
                weight: c.counts[k],
                projector: v * v.adjoint(),
                vector: v,
            });
        }
    }
    let total: f64 = terms.iter().map(|t| t.weight).sum();

    let mut rho = M2::identity() * Complex64::from(0.5);
    let mut ll = log_likelihood(&terms, &rho);
    let mut trace = vec![ll];
    let mut diluted_steps = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let r = r_operator(&terms, &rho, total);
        let mut next = normalized_sandwich(&r, &rho);
        let mut next_ll = log_likelihood(&terms, &next);
        if next_ll < ll - MONOTONE_SLACK * total {
            // plain step overshot: fall back to dilution with shrinking ε
            diluted_steps += 1;
            let mut eps = 1.0;
            loop {
                let m = M2::identity() + r * Complex64::from(eps);
                next = normalized_sandwich(&m, &rho);
                next_ll = log_likelihood(&terms, &next);
                if next_ll >= ll || eps < 1e-12 {
                    break;
                }
                eps *= 0.5;
            }
            if next_ll < ll {
                next = rho;
                next_ll = ll;
            }
        }
        let gain = next_ll - ll;
        rho = next;
        ll = next_ll;
        trace.push(ll);
        if gain / total < tol {
            converged = true;
            break;
        }
    }
    let m = ComplexMatrix::from_fn(2, 2, |i, j| rho[(i, j)]);
    Ok(ReconstructionResult {
        rho_rec: DensityMatrix::from_trusted(m),
        log_likelihood: ll,
        iterations,
        converged,
        trace,
        diluted_steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub uhlmann_fidelity: f64,
    pub overlap: f64,
    pub purity: f64,
    /// Descending.
    pub eigenvalues: Vec<f64>,
}

impl Metrics {
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }
}

pub fn analyze(rho_rec: &DensityMatrix, rho_theory: &DensityMatrix, psi_in: &[Complex64]) -> Result<Metrics> {
    if psi_in.len() != rho_rec.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho_rec.dim(),
            found: psi_in.len(),
        });
    }
    Ok(Metrics {
        uhlmann_fidelity: uhlmann_fidelity(rho_rec, rho_theory)?,
        overlap: rho_rec.overlap(psi_in),
        purity: purity(rho_rec),
        eigenvalues: rho_rec.eigenvalues(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, trace_distance};
    use crate::protocol::{transfer_analytic, EquatorialPhase};
    use crate::sample;

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    #[test]
    fn bases_are_complete_and_orthogonal() {
        for b in ALL_BASES {
            let m = MeasurementBasis::new(b);
            let [p0, p1] = m.projectors();
            let id = ComplexMatrix::identity(2, 2);
            assert!(max_abs_diff(&(&p0 + &p1), &id) < 1e-12);
            assert!((&p0 * &p1).iter().all(|c| c.norm() < 1e-12));
            assert_eq!(b.to_string().parse::<BasisLabel>().unwrap(), b);
        }
    }

    #[test]
    fn simulated_means() {
        let zero = DensityMatrix::basis(2, 0);
        let recs = expected_counts(&zero, &[BasisLabel::Z], 1000.0, [1.0, 1.0]).unwrap();
        assert_eq!(recs[0].counts, [1000.0, 0.0]);
        let sim = simulate_counts(&zero, &[BasisLabel::Z], 1000.0, [1.0, 1.0], 5).unwrap();
        assert_eq!(sim[0].counts[1], 0.0);

        let mixed = DensityMatrix::maximally_mixed(2);
        for r in expected_counts(&mixed, &ALL_BASES, 1000.0, [1.0, 1.0]).unwrap() {
            assert!((r.counts[0] - 500.0).abs() < 1e-9 && (r.counts[1] - 500.0).abs() < 1e-9);
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let rho = transfer_analytic(EquatorialPhase::from_degrees(30.0), 0.7, false)
            .unwrap()
            .rho_corrected;
        let a = simulate_counts(&rho, &ALL_BASES, 1e4, [0.9, 1.0], 77).unwrap();
        let b = simulate_counts(&rho, &ALL_BASES, 1e4, [0.9, 1.0], 77).unwrap();
        let c = simulate_counts(&rho, &ALL_BASES, 1e4, [0.9, 1.0], 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mut r1 = task_rng(77, 3);
        let mut r2 = task_rng(77, 3);
        assert_eq!(r1.random::<u64>(), r2.random::<u64>());
        assert_ne!(task_rng(77, 3).random::<u64>(), task_rng(77, 4).random::<u64>());
    }

    #[test]
    fn poisson_statistics() {
        // oracle: sample mean and variance of Poisson(λ) both equal λ
        let mut rng = task_rng(9, 0);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| poisson(&mut rng, 50.0)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 50.0).abs() < 0.25);
        assert!((var - 50.0).abs() < 2.5);
    }

    #[test]
    fn efficiency_correction() {
        let r = CountRecord::new(BasisLabel::Z, [900.0, 1000.0], [0.9, 1.0]).unwrap();
        let c = correct_efficiencies(&r).unwrap();
        assert!((c.counts[0] - 1000.0).abs() < 1e-12 && c.counts[1] == 1000.0);
        assert_eq!(c.efficiencies, [1.0, 1.0]);
        let unit = CountRecord::new(BasisLabel::X, [3.0, 4.0], [1.0, 1.0]).unwrap();
        assert_eq!(correct_efficiencies(&unit).unwrap(), unit);
        let bad = CountRecord {
            basis: BasisLabel::Y,
            counts: [1.0, 1.0],
            efficiencies: [0.0, 1.0],
        };
        assert!(correct_efficiencies(&bad).is_err());
        assert!(CountRecord::new(BasisLabel::Y, [1.0, 1.0], [0.0, 1.0]).is_err());
    }

    #[test]
    fn fixed_point_on_exact_probabilities() {
        let mixed = DensityMatrix::maximally_mixed(2);
        let res = mle_reconstruct(
            &expected_counts(&mixed, &ALL_BASES, 1e6, [1.0, 1.0]).unwrap(),
            10_000,
            1e-10,
        )
        .unwrap();
        assert!(max_abs_diff(res.rho_rec.matrix(), mixed.matrix()) < 1e-8);
        assert!(res.converged);

        let theta = EquatorialPhase::from_degrees(60.0);
        let truth = transfer_analytic(theta, 0.8, false).unwrap().rho_corrected;
        let res = mle_reconstruct(
            &expected_counts(&truth, &ALL_BASES, 1e6, [1.0, 1.0]).unwrap(),
            10_000,
            1e-16,
        )
        .unwrap();
        assert!(uhlmann_fidelity(&res.rho_rec, &truth).unwrap() > 1.0 - 1e-8);
        assert!(max_abs_diff(res.rho_rec.matrix(), truth.matrix()) < 1e-7);
    }

    #[test]
    fn reconstruction_rejects_empty_records() {
        assert!(mle_reconstruct(&[], 10, 1e-10).is_err());
        let zero = CountRecord::new(BasisLabel::Z, [0.0, 0.0], [1.0, 1.0]).unwrap();
        assert!(mle_reconstruct(&[zero], 10, 1e-10).is_err());
    }

    #[test]
    fn likelihood_never_decreases() {
        let mut rng = task_rng(11, 0);
        for k in 0..30 {
            let rho = sample::random_density(&mut rng, 2);
            let recs = simulate_counts(&rho, &ALL_BASES, 1e3 * (1 + k) as f64, [1.0, 1.0], k).unwrap();
            let res = mle_reconstruct(&recs, 2000, 1e-12).unwrap();
            let total: f64 = recs.iter().map(|r| r.total()).sum();
            for w in res.trace.windows(2) {
                assert!(w[1] >= w[0] - MONOTONE_SLACK * total);
            }
            assert!(DensityMatrix::new(res.rho_rec.matrix().clone()).is_ok());
        }
    }

    #[test]
    fn skewed_efficiencies_are_corrected() {
        let mixed = DensityMatrix::maximally_mixed(2);
        let mut dist = Vec::new();
        for seed in 0..20 {
            let skew = simulate_counts(&mixed, &ALL_BASES, 1e6, [0.8, 1.0], seed).unwrap();
            let unit = simulate_counts(&mixed, &ALL_BASES, 1e6, [1.0, 1.0], seed + 1000).unwrap();
            let a = mle_reconstruct(&skew, 10_000, 1e-10).unwrap().rho_rec;
            let b = mle_reconstruct(&unit, 10_000, 1e-10).unwrap().rho_rec;
            dist.push(trace_distance(&a, &b).unwrap());
        }
        assert!(median(dist) <= 0.01);
    }

    #[test]
    fn fidelity_improves_with_counts() {
        let theta = EquatorialPhase::from_degrees(120.0);
        let truth = transfer_analytic(theta, 0.9, false).unwrap().rho_corrected;
        let med = |n: f64| {
            median(
                (0..40)
                    .map(|s| {
                        let recs = simulate_counts(&truth, &ALL_BASES, n, [1.0, 1.0], s).unwrap();
                        let r = mle_reconstruct(&recs, 10_000, 1e-10).unwrap();
                        uhlmann_fidelity(&r.rho_rec, &truth).unwrap()
                    })
                    .collect(),
            )
        };
        let (a, b, c) = (med(1e3), med(1e4), med(1e6));
        assert!(a <= b && b <= c, "{a} {b} {c}");
        assert!(c >= 0.999);
    }

    #[test]
    fn analyze_metrics() {
        let theta = EquatorialPhase::from_degrees(30.0);
        let d = 0.6;
        let rho = transfer_analytic(theta, d, false).unwrap().rho_corrected;
        let m = analyze(&rho, &rho, &theta.state()).unwrap();
        assert!((m.uhlmann_fidelity - 1.0).abs() < 1e-10);
        assert!((m.overlap - 0.5 * (1.0 + d)).abs() < 1e-14);
        assert!((m.max_eigenvalue() - 0.5 * (1.0 + d)).abs() < 1e-14);

        let mixed = DensityMatrix::maximally_mixed(2);
        let m = analyze(&mixed, &rho, &theta.state()).unwrap();
        assert!((m.purity - 0.5).abs() < 1e-15);
        assert!(m.eigenvalues.iter().all(|e| (e - 0.5).abs() < 1e-15));
        assert!(analyze(&mixed, &rho, &[ONE]).is_err());
    }
}

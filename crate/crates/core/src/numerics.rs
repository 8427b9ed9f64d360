//! Small numerical helpers shared across modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Pairwise (cascade) summation. The split points depend only on the length,
/// so the result is bitwise reproducible.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().fold(0.0, |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_sum_c(xs: &[C64]) -> C64 {
    if xs.len() <= 32 {
        return xs.iter().fold(C64::new(0.0, 0.0), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum_c(&xs[..mid]) + pairwise_sum_c(&xs[mid..])
}

/// `ln(n!)`; exact product up to 20, log-space sum above.
pub fn ln_factorial(n: usize) -> f64 {
    if n <= 20 {
        let mut f = 1.0f64;
        for k in 2..=n {
            f *= k as f64;
        }
        f.ln()
    } else {
        ln_factorial(20) + (21..=n).map(|k| (k as f64).ln()).sum::<f64>()
    }
}

/// Principal square root of a real number, placing negative inputs on the
/// positive imaginary axis.
pub fn principal_sqrt_real(x: f64) -> C64 {
    if x >= 0.0 {
        C64::new(x.sqrt(), 0.0)
    } else {
        C64::new(0.0, (-x).sqrt())
    }
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

pub fn max_abs_c(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.norm()))
}

/// Symmetric positive-definite square root via eigendecomposition.
pub fn spd_sqrt(m: &RMat) -> Option<RMat> {
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return None;
    }
    let d = RMat::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Some(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

pub fn is_positive_definite(m: &RMat) -> bool {
    m.clone().cholesky().is_some()
}

/// Deterministic complex dot product `Σ conj(a) b` in index order.
pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

/// Eigenvalues of a complex 1×1 or 2×2 matrix.
pub fn small_eigenvalues(m: &CMat) -> Option<Vec<C64>> {
    match m.nrows() {
        1 => Some(vec![m[(0, 0)]]),
        2 => {
            let tr = m[(0, 0)] + m[(1, 1)];
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            let disc = (tr * tr / 4.0 - det).sqrt();
            Some(vec![tr / 2.0 + disc, tr / 2.0 - disc])
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..100).map(|k| k as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&xs), 2475.0);
    }

    #[test]
    fn ln_factorial_small_and_large() {
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-14);
        let direct: f64 = (1..=30).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(30) - direct).abs() < 1e-10);
    }

    #[test]
    fn negative_real_sqrt_is_upper_half_plane() {
        let r = principal_sqrt_real(-0.5);
        assert_eq!(r.re, 0.0);
        assert!((r.im - 0.5f64.sqrt()).abs() < 1e-15);
    }
}

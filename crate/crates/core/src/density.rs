//! Density operators, unitary evolution and microstate counting.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{build_ladder, FockVector, TruncatedBasis};
use crate::numerics::{max_abs_c, CMat, C64};

/// Tolerance of the density-matrix invariants.
pub const DENSITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub basis: TruncatedBasis,
    pub matrix: CMat,
}

/// Weighted ensemble of basis vectors.
#[derive(Clone, Debug)]
pub struct MixtureSpec {
    pub components: Vec<(f64, FockVector)>,
}

fn hermitian_eigen(m: &CMat) -> (DVector<f64>, CMat) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

fn require_hermitian(m: &CMat, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{what} is not square")));
    }
    if max_abs_c(&(m - m.adjoint())) > DENSITY_TOL * (1.0 + max_abs_c(m)) {
        return Err(Error::Invalid(format!("{what} is not Hermitian")));
    }
    Ok(())
}

impl DensityMatrix {
    /// Wraps a matrix after checking Hermiticity, positivity and unit trace.
    pub fn new(basis: TruncatedBasis, matrix: CMat) -> Result<Self> {
        if matrix.nrows() != basis.dim() {
            return Err(Error::Dimension(format!("{}×{} matrix for a basis of {}", matrix.nrows(), matrix.ncols(), basis.dim())));
        }
        require_hermitian(&matrix, "density matrix")?;
        let rho = Self { basis, matrix };
        let tr = rho.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::Invalid(format!("density matrix trace {tr:.12} ≠ 1")));
        }
        if let Some(min) = rho.eigenvalues().first() {
            if *min < -DENSITY_TOL {
                return Err(Error::Invalid(format!("density matrix has negative eigenvalue {min:.3e}")));
            }
        }
        Ok(rho)
    }

    pub fn from_pure(state: &FockVector) -> Result<Self> {
        let n = state.coeffs.norm_squared();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(n));
        }
        let m = &state.coeffs * state.coeffs.adjoint();
        Self::new(state.basis.clone(), m)
    }

    pub fn from_mixture(mix: &MixtureSpec) -> Result<Self> {
        let first = mix.components.first().ok_or_else(|| Error::Invalid("empty mixture".into()))?;
        let basis = first.1.basis.clone();
        let mut total = 0.0;
        let mut m = CMat::zeros(basis.dim(), basis.dim());
        for (w, v) in &mix.components {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::Invalid(format!("mixture weight {w} is not a probability")));
            }
            if v.basis != basis {
                return Err(Error::Invalid("mixture components use different bases".into()));
            }
            let n = v.coeffs.norm_squared();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::NotNormalized(n));
            }
            total += w;
            m += &v.coeffs * v.coeffs.adjoint() * C64::new(*w, 0.0);
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("mixture weights sum to {total}")));
        }
        Self::new(basis, m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = hermitian_eigen(&self.matrix).0.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Spectral ensemble `(λ_i, v_i)` with negligible weights dropped and
    /// round-off negatives clamped to zero.
    pub fn ensemble(&self) -> Vec<(f64, DVector<C64>)> {
        let (vals, vecs) = hermitian_eigen(&self.matrix);
        // Weights below the tolerance are round-off (e.g. from a CSV round trip);
        // their eigenvectors are arbitrary and need not be grid-representable.
        let cut = DENSITY_TOL * vals.iter().copied().fold(0.0, f64::max);
        (0..vals.len())
            .filter(|&k| vals[k] > cut)
            .map(|k| (vals[k], vecs.column(k).into_owned()))
            .collect()
    }
}

pub fn expectation(rho: &DensityMatrix, a: &CMat) -> Result<C64> {
    if a.shape() != rho.matrix.shape() {
        return Err(Error::Dimension("operator and density matrix dimensions differ".into()));
    }
    Ok((&rho.matrix * a).trace())
}

/// `ρ(t) = e^{−iHt/ℏ} ρ e^{iHt/ℏ}` by exact diagonalization of `H`.
pub fn evolve_lvn(rho: &DensityMatrix, h: &CMat, t: f64) -> Result<DensityMatrix> {
    if h.shape() != rho.matrix.shape() {
        return Err(Error::Dimension("Hamiltonian and density matrix dimensions differ".into()));
    }
    require_hermitian(h, "Hamiltonian")?;
    let hbar = rho.basis.reference.hbar;
    let (vals, vecs) = hermitian_eigen(h);
    let phases = DVector::from_iterator(vals.len(), vals.iter().map(|e| C64::from_polar(1.0, -e * t / hbar)));
    let u = &vecs * CMat::from_diagonal(&phases) * vecs.adjoint();
    let m = &u * &rho.matrix * u.adjoint();
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    Ok(DensityMatrix { basis: rho.basis.clone(), matrix: m })
}

/// `H = ℏω Σ_μ (𝔑_μ + ½)` in the truncated basis.
pub fn number_omega_hamiltonian(basis: &TruncatedBasis, omega: f64) -> CMat {
    let hbar = basis.reference.hbar;
    let n = build_ladder(basis).number;
    let half = basis.axes() as f64 / 2.0;
    (n + CMat::identity(basis.dim(), basis.dim()) * C64::new(half, 0.0)) * C64::new(hbar * omega, 0.0)
}

pub fn boltzmann_entropy(omega: f64) -> Result<f64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Invalid(format!("microstate count must be positive, got {omega}")));
    }
    Ok(omega.ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MicrostateCount {
    pub hypervolume: f64,
    pub dim: usize,
    pub h: f64,
    pub omega: f64,
    /// In units of the Boltzmann constant.
    pub entropy: f64,
}

pub fn count_microstates(hypervolume: f64, dim: usize, hbar: f64) -> Result<MicrostateCount> {
    if !(hypervolume.is_finite() && hypervolume > 0.0) {
        return Err(Error::Invalid(format!("hypervolume must be positive, got {hypervolume}")));
    }
    if !(hbar.is_finite() && hbar > 0.0) || dim == 0 {
        return Err(Error::Invalid("counting needs hbar > 0 and D ≥ 1".into()));
    }
    let h = 2.0 * std::f64::consts::PI * hbar;
    let omega = hypervolume / h.powi(dim as i32);
    Ok(MicrostateCount { hypervolume, dim, h, omega, entropy: boltzmann_entropy(omega)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint::JointStateSpec;
    use std::f64::consts::{E, PI};

    fn basis(n: usize) -> TruncatedBasis {
        TruncatedBasis::new(vec![n], JointStateSpec::ground(1, 1.0).unwrap()).unwrap()
    }

    fn e(b: &TruncatedBasis, k: usize) -> FockVector {
        FockVector::basis_state(b, &[k]).unwrap()
    }

    #[test]
    fn pure_and_mixed_constructors() {
        let b = basis(4);
        let r = DensityMatrix::from_pure(&e(&b, 0)).unwrap();
        assert_eq!(r.matrix[(0, 0)], C64::new(1.0, 0.0));
        assert!((r.purity() - 1.0).abs() < 1e-10);
        let plus = FockVector::new(b.clone(), (e(&b, 0).coeffs + e(&b, 1).coeffs) / C64::new(2f64.sqrt(), 0.0)).unwrap();
        let r = DensityMatrix::from_pure(&plus).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((r.matrix[(i, j)].re - 0.5).abs() < 1e-15);
        }
        let mix = MixtureSpec { components: vec![(0.5, e(&b, 0)), (0.5, e(&b, 1))] };
        let r = DensityMatrix::from_mixture(&mix).unwrap();
        assert!((r.purity() - 0.5).abs() < 1e-15);
        let n = build_ladder(&b).number;
        assert!((expectation(&r, &n).unwrap() - 0.5).norm() < 1e-15);
        let bad = MixtureSpec { components: vec![(0.6, e(&b, 0)), (0.6, e(&b, 1))] };
        assert!(DensityMatrix::from_mixture(&bad).is_err());
    }

    #[test]
    fn ground_energy_and_identity() {
        let b = basis(4);
        let r = DensityMatrix::from_pure(&e(&b, 0)).unwrap();
        let h = number_omega_hamiltonian(&b, 1.0);
        assert!((expectation(&r, &h).unwrap() - 0.5).norm() < 1e-15);
        assert!((expectation(&r, &CMat::identity(4, 4)).unwrap() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn stationary_and_reversible_evolution() {
        let b = basis(5);
        let h = number_omega_hamiltonian(&b, 1.3);
        let mix = MixtureSpec { components: vec![(0.3, e(&b, 1)), (0.7, e(&b, 3))] };
        let r = DensityMatrix::from_mixture(&mix).unwrap();
        let later = evolve_lvn(&r, &h, 2.7).unwrap();
        assert!(max_abs_c(&(&later.matrix - &r.matrix)) < 1e-12);
        let plus = FockVector::new(b.clone(), (e(&b, 0).coeffs + e(&b, 2).coeffs) / C64::new(2f64.sqrt(), 0.0)).unwrap();
        let r = DensityMatrix::from_pure(&plus).unwrap();
        let back = evolve_lvn(&evolve_lvn(&r, &h, 1.1).unwrap(), &h, -1.1).unwrap();
        assert!(max_abs_c(&(back.matrix - &r.matrix)) < 1e-10);
        let mut nh = h.clone();
        nh[(0, 1)] = C64::new(1.0, 0.0);
        assert!(evolve_lvn(&r, &nh, 1.0).is_err());
    }

    #[test]
    fn entropy_and_counting() {
        assert_eq!(boltzmann_entropy(1.0).unwrap(), 0.0);
        assert!((boltzmann_entropy(E).unwrap() - 1.0).abs() < 1e-15);
        assert!((boltzmann_entropy(10.0).unwrap() - std::f64::consts::LN_10).abs() < 1e-15);
        assert!(boltzmann_entropy(0.0).is_err());
        let h = 2.0 * PI;
        assert!((count_microstates(10.0 * h, 1, 1.0).unwrap().omega - 10.0).abs() < 1e-12);
        let c = count_microstates(h * h, 2, 1.0).unwrap();
        assert!((c.omega - 1.0).abs() < 1e-15 && c.entropy.abs() < 1e-15);
        assert!(count_microstates(-1.0, 1, 1.0).is_err());
    }
}

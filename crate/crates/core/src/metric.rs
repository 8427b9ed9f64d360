//! Signature, moments, shape parameters and the covariance decomposition.
//!
//! Moments are stored for canonical coordinates `q_μ` and canonical momenta
//! `π_μ = −iℏ ∂/∂q_μ`. The metric enters when covariant objects are formed:
//! `x_μ = η_μ q_μ`, `p_μ = −π_μ` (so `p_μ = iℏ ∂/∂x^μ` with `x^μ = q_μ`).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{max_abs_c, principal_sqrt_real, spd_sqrt, to_complex, CMat, RMat, C64, I};

/// Reduced Planck constant in SI units (J·s).
pub const HBAR_SI: f64 = 1.054_571_817e-34;

/// Relative saturation tolerance for analytically specified moments.
pub const ANALYTIC_SATURATION_TOL: f64 = 1e-9;
/// Relative saturation tolerance for moments measured on a grid.
pub const GRID_SATURATION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub d_plus: usize,
    pub d_minus: usize,
}

impl Signature {
    pub fn new(d_plus: usize, d_minus: usize) -> Result<Self> {
        if d_plus + d_minus == 0 {
            return Err(Error::Invalid("signature must have at least one axis".into()));
        }
        Ok(Self { d_plus, d_minus })
    }

    /// All axes spatial (η = −1), the non-relativistic case.
    pub fn spatial(d: usize) -> Self {
        Self { d_plus: 0, d_minus: d }
    }

    pub fn dim(&self) -> usize {
        self.d_plus + self.d_minus
    }

    pub fn eta(&self, mu: usize) -> f64 {
        if mu < self.d_plus {
            1.0
        } else {
            -1.0
        }
    }

    pub fn metric(&self) -> Metric {
        Metric {
            diag: (0..self.dim()).map(|mu| self.eta(mu)).collect(),
        }
    }
}

/// Diagonal metric tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    diag: Vec<f64>,
}

impl Metric {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn eta(&self, mu: usize) -> f64 {
        self.diag[mu]
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn matrix(&self) -> RMat {
        RMat::from_diagonal(&DVector::from_column_slice(&self.diag))
    }
}

pub fn build_metric(sig: Signature) -> RMat {
    sig.metric().matrix()
}

pub fn raise_lower(components: &[f64], metric: &Metric) -> Result<Vec<f64>> {
    if components.len() != metric.dim() {
        return Err(Error::Dimension(format!(
            "vector of length {} against metric of dimension {}",
            components.len(),
            metric.dim()
        )));
    }
    Ok(components.iter().zip(metric.diagonal()).map(|(c, e)| c * e).collect())
}

/// Means and variance-covariance blocks of a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MomentsRepr", into = "MomentsRepr")]
pub struct StatMoments {
    pub mean_p: Vec<f64>,
    pub mean_x: Vec<f64>,
    /// Momentum covariance.
    pub p: RMat,
    /// Coordinate covariance.
    pub x: RMat,
    /// Symmetrized momentum–coordinate covariance, row = momentum axis.
    pub rho: RMat,
}

#[derive(Serialize, Deserialize)]
struct MomentsRepr {
    mean_p: Vec<f64>,
    mean_x: Vec<f64>,
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    #[serde(rename = "X")]
    x: Vec<Vec<f64>>,
    rho: Vec<Vec<f64>>,
}

pub(crate) fn rows_to_mat(rows: &[Vec<f64>], d: usize, name: &str) -> Result<RMat> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension(format!("{name} must be {d}×{d}")));
    }
    Ok(RMat::from_fn(d, d, |i, j| rows[i][j]))
}

pub(crate) fn mat_to_rows(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl TryFrom<MomentsRepr> for StatMoments {
    type Error = Error;
    fn try_from(r: MomentsRepr) -> Result<Self> {
        let d = r.mean_x.len();
        let m = StatMoments {
            mean_p: r.mean_p,
            p: rows_to_mat(&r.p, d, "P")?,
            x: rows_to_mat(&r.x, d, "X")?,
            rho: rows_to_mat(&r.rho, d, "rho")?,
            mean_x: r.mean_x,
        };
        m.validate()?;
        Ok(m)
    }
}

impl From<StatMoments> for MomentsRepr {
    fn from(m: StatMoments) -> Self {
        MomentsRepr {
            p: mat_to_rows(&m.p),
            x: mat_to_rows(&m.x),
            rho: mat_to_rows(&m.rho),
            mean_p: m.mean_p,
            mean_x: m.mean_x,
        }
    }
}

impl StatMoments {
    pub fn dim(&self) -> usize {
        self.mean_x.len()
    }

    /// Checks shapes, finiteness, symmetry of P and X and positive-definiteness of X.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::Dimension("moments need at least one axis".into()));
        }
        if self.mean_p.len() != d
            || self.p.shape() != (d, d)
            || self.x.shape() != (d, d)
            || self.rho.shape() != (d, d)
        {
            return Err(Error::Dimension("inconsistent moment block sizes".into()));
        }
        let finite = self.mean_p.iter().chain(&self.mean_x).all(|v| v.is_finite())
            && self.p.iter().chain(self.x.iter()).chain(self.rho.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Invalid("moments contain non-finite entries".into()));
        }
        let sym_tol = 1e-12 * (1.0 + self.p.amax().max(self.x.amax()));
        if (&self.p - self.p.transpose()).amax() > sym_tol || (&self.x - self.x.transpose()).amax() > sym_tol {
            return Err(Error::Invalid("P and X must be symmetric".into()));
        }
        if self.x.clone().cholesky().is_none() {
            return Err(Error::SingularCovariance);
        }
        Ok(())
    }

    pub fn x_inverse(&self) -> Result<RMat> {
        self.x.clone().cholesky().map(|c| c.inverse()).ok_or(Error::SingularCovariance)
    }

    /// Covariant momentum means `⟨p_μ⟩ = −⟨π_μ⟩`.
    pub fn covariant_mean_p(&self) -> Vec<f64> {
        self.mean_p.iter().map(|v| -v).collect()
    }

    /// Covariant coordinate means `⟨x_μ⟩ = η_μ⟨q_μ⟩`.
    pub fn covariant_mean_x(&self, metric: &Metric) -> Result<Vec<f64>> {
        raise_lower(&self.mean_x, metric)
    }

    /// Covariant blocks `(𝒫_{μν}, 𝒳_{μν}, ϱ_{μν})`.
    pub fn covariant_blocks(&self, metric: &Metric) -> (RMat, RMat, RMat) {
        let eta = metric.matrix();
        let x_cov = &eta * &self.x * &eta;
        let rho_cov = -(&self.rho * &eta);
        (self.p.clone(), x_cov, rho_cov)
    }
}

/// Shape matrix `B` of the Gaussian exponent `−(q−⟨q⟩)ᵀB(q−⟨q⟩)/ℏ²`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeParams {
    pub b: CMat,
    pub x_inv: RMat,
    pub hbar: f64,
}

fn check_hbar(hbar: f64) -> Result<()> {
    if hbar.is_finite() && hbar > 0.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("hbar must be positive, got {hbar}")))
    }
}

pub fn build_shape(moments: &StatMoments, metric: &Metric, hbar: f64) -> Result<ShapeParams> {
    check_hbar(hbar)?;
    let d = moments.dim();
    if metric.dim() != d {
        return Err(Error::Dimension("metric and moments differ in dimension".into()));
    }
    let x_inv = moments.x_inverse()?;
    let eta = metric.matrix();
    let (_, _, rho_cov) = moments.covariant_blocks(metric);
    // Mixed-index inverse 𝒳̃^ρ_ν of 𝒳^μ_ν = (Xη)^μ_ν.
    let x_tilde_mixed = &eta * &x_inv;
    let front = to_complex(&eta) * C64::new(hbar * hbar, 0.0) + to_complex(&rho_cov) * (I * 2.0 * hbar);
    let b = front * to_complex(&x_tilde_mixed) * C64::new(0.25, 0.0);
    for mu in 0..d {
        if b[(mu, mu)].re <= 0.0 {
            return Err(Error::NonDecaying { axis: mu });
        }
    }
    let re_sym = b.map(|v| v.re);
    let re_sym = (&re_sym + re_sym.transpose()) * 0.5;
    if let Some(axis) = first_failing_pivot(&re_sym) {
        return Err(Error::NonDecaying { axis });
    }
    Ok(ShapeParams { b, x_inv, hbar })
}

/// Index of the first non-positive leading principal minor, if any.
fn first_failing_pivot(m: &RMat) -> Option<usize> {
    (1..=m.nrows()).find(|&k| m.view((0, 0), (k, k)).into_owned().cholesky().is_none()).map(|k| k - 1)
}

/// Result of the scalar uncertainty determinant test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UncertaintyReport {
    pub det: f64,
    pub bound: f64,
    pub saturated: bool,
    pub violated: bool,
}

pub fn uncertainty_determinant(p11: f64, x11: f64, rho11: f64, hbar: f64) -> UncertaintyReport {
    uncertainty_determinant_with_tol(p11, x11, rho11, hbar, ANALYTIC_SATURATION_TOL)
}

pub fn uncertainty_determinant_with_tol(p11: f64, x11: f64, rho11: f64, hbar: f64, rel_tol: f64) -> UncertaintyReport {
    let det = p11 * x11 - rho11 * rho11;
    let bound = hbar * hbar / 4.0;
    let tol = rel_tol * bound;
    UncertaintyReport {
        det,
        bound,
        saturated: (det - bound).abs() <= tol,
        violated: det < bound - tol,
    }
}

/// Residual of the matrix saturation identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SaturationResidual {
    /// Frobenius norm of `𝒫 − (ℏ²/4)𝒳̃ − ϱ𝒳̃ϱᵀ`.
    pub absolute: f64,
    /// `absolute / ‖𝒫‖`.
    pub relative: f64,
}

/// Momentum covariance implied by saturation for the given coordinate block.
pub fn saturating_p(x: &RMat, rho: &RMat, metric: &Metric, hbar: f64) -> Result<RMat> {
    let x_inv = x.clone().cholesky().map(|c| c.inverse()).ok_or(Error::SingularCovariance)?;
    let eta = metric.matrix();
    let rho_cov = -(rho * &eta);
    // Fully covariant 𝒳̃_{μν} and contravariant 𝒳̃^{αβ}.
    let lower = &x_inv;
    let upper = &eta * &x_inv * &eta;
    Ok(lower * (hbar * hbar / 4.0) + &rho_cov * upper * rho_cov.transpose())
}

pub fn check_saturation(moments: &StatMoments, metric: &Metric, hbar: f64) -> Result<SaturationResidual> {
    check_hbar(hbar)?;
    if metric.dim() != moments.dim() {
        return Err(Error::Dimension("metric and moments differ in dimension".into()));
    }
    let implied = saturating_p(&moments.x, &moments.rho, metric, hbar)?;
    let absolute = (&moments.p - implied).norm();
    let scale = moments.p.norm();
    let relative = if scale > 0.0 { absolute / scale } else { f64::INFINITY };
    Ok(SaturationResidual { absolute, relative })
}

/// Factors of the covariance block decomposition.
///
/// Momenta are measured in units of ℏ (wave vectors), which makes `a·b = ½`.
#[derive(Clone, Debug)]
pub struct CovarianceFactors {
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
}

/// Covariant covariance block with momenta in units of ℏ:
/// `[[𝒫/ℏ², ϱ/ℏ], [ϱᵀ/ℏ, 𝒳]]`.
pub fn reduced_covariant_block(moments: &StatMoments, metric: &Metric, hbar: f64) -> RMat {
    let d = moments.dim();
    let (p, x, rho) = moments.covariant_blocks(metric);
    let mut m = RMat::zeros(2 * d, 2 * d);
    m.view_mut((0, 0), (d, d)).copy_from(&(p / (hbar * hbar)));
    m.view_mut((0, d), (d, d)).copy_from(&(&rho / hbar));
    m.view_mut((d, 0), (d, d)).copy_from(&(rho.transpose() / hbar));
    m.view_mut((d, d), (d, d)).copy_from(&x);
    m
}

/// Principal square root of `Xη`, computed through the symmetric matrix
/// `X^{1/2} η X^{1/2}` which is similar to it.
fn sqrt_x_eta(x: &RMat, eta: &RMat) -> Result<CMat> {
    let t = spd_sqrt(x).ok_or(Error::SingularCovariance)?;
    let t_inv = t.clone().try_inverse().ok_or(Error::SingularCovariance)?;
    let m = &t * eta * &t;
    let eig = ((&m + m.transpose()) * 0.5).symmetric_eigen();
    let d = eig.eigenvalues.len();
    let mut root = CMat::zeros(d, d);
    for k in 0..d {
        root[(k, k)] = principal_sqrt_real(eig.eigenvalues[k]);
    }
    let v = to_complex(&eig.eigenvectors);
    Ok(to_complex(&t) * &v * root * v.transpose() * to_complex(&t_inv))
}

pub fn decompose_covariance(moments: &StatMoments, metric: &Metric, hbar: f64) -> Result<CovarianceFactors> {
    let sat = check_saturation(moments, metric, hbar)?;
    if sat.relative > GRID_SATURATION_TOL {
        return Err(Error::NotSaturated { residual: sat.relative });
    }
    let eta = metric.matrix();
    let (_, _, rho_cov) = moments.covariant_blocks(metric);
    let a = sqrt_x_eta(&moments.x, &eta)?;
    let a_inv = a.clone().try_inverse().ok_or(Error::SingularCovariance)?;
    let b = &a_inv * C64::new(0.5, 0.0);
    // Lower-left block L = 2·a·c·b solves Lᵀ η a = ϱ/ℏ.
    let eta_c = to_complex(&eta);
    let rho_red = to_complex(&(&rho_cov / hbar));
    let l = &eta_c * a_inv.transpose() * rho_red.transpose();
    let c = &a_inv * l * &a;
    let factors = CovarianceFactors { a, b, c };
    let res = factors.constraint_residual(metric);
    if res > 1e-10 * (1.0 + factors.scale()) {
        return Err(Error::Unsupported(format!(
            "covariance factors violate the conjugation constraints (residual {res:.3e}); \
             coordinate covariance couples axes of opposite signature"
        )));
    }
    Ok(factors)
}

impl CovarianceFactors {
    fn scale(&self) -> f64 {
        max_abs_c(&self.a).max(max_abs_c(&self.b)).max(max_abs_c(&self.c))
    }

    /// `M = [[b, 0], [2·a·c·b, a]]`.
    pub fn block_factor(&self) -> CMat {
        let d = self.a.nrows();
        let mut m = CMat::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&self.b);
        let l = &self.a * &self.c * &self.b * C64::new(2.0, 0.0);
        m.view_mut((d, 0), (d, d)).copy_from(&l);
        m.view_mut((d, d), (d, d)).copy_from(&self.a);
        m
    }

    /// `Mᵀ (η⊕η) M`, which reproduces [`reduced_covariant_block`].
    pub fn reconstruct(&self, metric: &Metric) -> CMat {
        let d = self.a.nrows();
        let mut g = CMat::zeros(2 * d, 2 * d);
        for mu in 0..d {
            g[(mu, mu)] = C64::new(metric.eta(mu), 0.0);
            g[(d + mu, d + mu)] = C64::new(metric.eta(mu), 0.0);
        }
        let m = self.block_factor();
        m.transpose() * g * m
    }

    /// Largest violation among the algebraic constraints on `(a, b, c)`.
    pub fn constraint_residual(&self, metric: &Metric) -> f64 {
        let d = self.a.nrows();
        let eta = to_complex(&metric.matrix());
        let half = CMat::identity(d, d) * C64::new(0.5, 0.0);
        let a = &self.a;
        let b = &self.b;
        let c = &self.c;
        let checks = [
            a * b - &half,
            b * a - &half,
            a.transpose() - &eta * a * &eta,
            b.transpose() - &eta * b * &eta,
            a.adjoint() - &eta * a.transpose(),
            b.adjoint() - &eta * b.transpose(),
            c.transpose() - &eta * a * c * b * &eta * C64::new(2.0, 0.0),
        ];
        checks.iter().map(max_abs_c).fold(0.0, f64::max)
    }
}

/// Angular frequency and wave vector of a particle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaveVector {
    pub omega: f64,
    pub k: Vec<f64>,
}

pub fn wave_particle_convert(energy: f64, momentum: &[f64], hbar: f64) -> WaveVector {
    WaveVector {
        omega: energy / hbar,
        k: momentum.iter().map(|p| p / hbar).collect(),
    }
}

/// Inverse of [`wave_particle_convert`]: returns `(energy, momentum)`.
pub fn particle_from_wave(wave: &WaveVector, hbar: f64) -> (f64, Vec<f64>) {
    (wave.omega * hbar, wave.k.iter().map(|k| k * hbar).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn one_d(p: f64, x: f64, rho: f64) -> StatMoments {
        StatMoments {
            mean_p: vec![0.0],
            mean_x: vec![0.0],
            p: RMat::from_element(1, 1, p),
            x: RMat::from_element(1, 1, x),
            rho: RMat::from_element(1, 1, rho),
        }
    }

    #[test]
    fn metric_diagonals() {
        assert_eq!(build_metric(Signature::new(1, 3).unwrap()).diagonal().as_slice(), &[1.0, -1.0, -1.0, -1.0]);
        assert_eq!(build_metric(Signature::new(0, 1).unwrap()).diagonal().as_slice(), &[-1.0]);
        assert_eq!(build_metric(Signature::new(2, 0).unwrap()).diagonal().as_slice(), &[1.0, 1.0]);
        assert!(Signature::new(0, 0).is_err());
    }

    #[test]
    fn raise_lower_flips_spatial_components() {
        let m = Signature::spatial(1).metric();
        assert_eq!(raise_lower(&[2.0], &m).unwrap(), vec![-2.0]);
        assert_eq!(raise_lower(&[0.0], &m).unwrap(), vec![0.0]);
        assert!(raise_lower(&[1.0, 2.0], &m).is_err());
    }

    #[test]
    fn shape_examples() {
        let m = Signature::spatial(1).metric();
        let s = build_shape(&one_d(0.5, 0.5, 0.0), &m, 1.0).unwrap();
        assert_relative_eq!(s.b[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_eq!(s.b[(0, 0)].im, 0.0);
        let s = build_shape(&one_d(1.0, 0.5, 0.5), &m, 1.0).unwrap();
        assert_relative_eq!(s.b[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(s.b[(0, 0)].im, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn shape_two_axes_decouple() {
        let m = Signature::spatial(2).metric();
        let mom = StatMoments {
            mean_p: vec![0.0; 2],
            mean_x: vec![0.0; 2],
            p: RMat::identity(2, 2) * 0.5,
            x: RMat::identity(2, 2) * 0.5,
            rho: RMat::zeros(2, 2),
        };
        let s = build_shape(&mom, &m, 1.0).unwrap();
        assert!(max_abs_c(&(s.b.clone() - CMat::identity(2, 2) * C64::new(0.5, 0.0))) < 1e-15);
        assert!((&mom.x * &s.x_inv - RMat::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn shape_is_signature_independent() {
        let x = RMat::from_row_slice(2, 2, &[0.7, 0.2, 0.2, 0.4]);
        let rho = RMat::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -0.3]);
        let mom = StatMoments {
            mean_p: vec![0.0; 2],
            mean_x: vec![0.0; 2],
            p: RMat::identity(2, 2),
            x: x.clone(),
            rho: rho.clone(),
        };
        let hbar = 1.3;
        let expected = (CMat::identity(2, 2) * C64::new(hbar * hbar, 0.0) - to_complex(&rho) * (I * 2.0 * hbar))
            * to_complex(&x.clone().try_inverse().unwrap())
            * C64::new(0.25, 0.0);
        for sig in [Signature::new(0, 2).unwrap(), Signature::new(1, 1).unwrap(), Signature::new(2, 0).unwrap()] {
            let s = build_shape(&mom, &sig.metric(), hbar).unwrap();
            assert!(max_abs_c(&(s.b - &expected)) < 1e-14);
        }
    }

    #[test]
    fn singular_x_is_rejected() {
        let m = Signature::spatial(1).metric();
        assert!(matches!(build_shape(&one_d(1.0, 0.0, 0.0), &m, 1.0), Err(Error::SingularCovariance)));
    }

    #[test]
    fn determinant_examples() {
        let r = uncertainty_determinant(0.5, 0.5, 0.0, 1.0);
        assert_eq!(r.det, 0.25);
        assert!(r.saturated && !r.violated);
        let r = uncertainty_determinant(1.0, 1.0, 0.0, 1.0);
        assert_eq!(r.det, 1.0);
        assert!(!r.saturated && !r.violated);
        let r = uncertainty_determinant(1.0, 0.5, 0.5, 1.0);
        assert_relative_eq!(r.det, 0.25);
        assert!(r.saturated);
        assert!(uncertainty_determinant(0.1, 0.1, 0.0, 1.0).violated);
    }

    #[test]
    fn saturation_residual_detects_doubling() {
        let m = Signature::spatial(1).metric();
        let ok = one_d(1.0, 0.5, 0.5);
        assert!(check_saturation(&ok, &m, 1.0).unwrap().relative < 1e-15);
        let doubled = one_d(2.0, 0.5, 0.5);
        let r = check_saturation(&doubled, &m, 1.0).unwrap();
        assert_relative_eq!(r.absolute, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn decomposition_one_axis_examples() {
        let m = Signature::spatial(1).metric();
        let f = decompose_covariance(&one_d(0.5, 0.5, 0.0), &m, 1.0).unwrap();
        let s = 0.5f64.sqrt();
        assert!((f.a[(0, 0)] - C64::new(0.0, s)).norm() < 1e-15);
        assert!((f.b[(0, 0)] - C64::new(0.0, -1.0 / (2.0 * s))).norm() < 1e-15);
        assert!(f.c[(0, 0)].norm() < 1e-15);

        let f = decompose_covariance(&one_d(1.0, 0.5, 0.5), &m, 1.0).unwrap();
        // The sign that reproduces the covariance block.
        assert!((f.c[(0, 0)] - C64::new(0.0, 0.5 / s)).norm() < 1e-14);
        let rec = f.reconstruct(&m);
        let target = to_complex(&reduced_covariant_block(&one_d(1.0, 0.5, 0.5), &m, 1.0));
        assert!(max_abs_c(&(rec - target)) < 1e-12);
    }

    #[test]
    fn decomposition_rejects_unsaturated() {
        let m = Signature::spatial(1).metric();
        assert!(matches!(
            decompose_covariance(&one_d(2.0, 0.5, 0.0), &m, 1.0),
            Err(Error::NotSaturated { .. })
        ));
    }

    #[test]
    fn wave_particle_round_trip() {
        let w = wave_particle_convert(1.0, &[2.0, 0.0, 0.0], 1.0);
        assert_eq!(w.omega, 1.0);
        assert_eq!(w.k, vec![2.0, 0.0, 0.0]);
        let (e, _) = particle_from_wave(&WaveVector { omega: 3.5, k: vec![] }, 1.0);
        assert_eq!(wave_particle_convert(e, &[], 1.0).omega, 3.5);
    }

    #[test]
    fn moments_json_round_trip() {
        let m = one_d(1.0, 0.5, 0.5);
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"P\"") && s.contains("\"X\"") && s.contains("\"rho\""));
        let back: StatMoments = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}

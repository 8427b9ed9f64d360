//! Ladder operators, number states and matrix representations in a truncated basis.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    apply_momentum, apply_position, inner_product, raw_inverse_transform, raw_momentum_transform, CoordinateGrid,
    GridOperator, GridWavefunction, Space,
};
use crate::joint::{coordinate_wavefunction, JointStateSpec};
use crate::metric::{decompose_covariance, CovarianceFactors};
use crate::numerics::{ln_factorial, max_abs_c, CMat, C64, I};

/// Default cap on the truncated basis dimension.
pub const DEFAULT_BASIS_BUDGET: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedBasis {
    pub n_max: Vec<usize>,
    pub reference: JointStateSpec,
}

impl TruncatedBasis {
    pub fn new(n_max: Vec<usize>, reference: JointStateSpec) -> Result<Self> {
        if n_max.len() != reference.dim() {
            return Err(Error::Dimension(format!(
                "{} cutoffs for a {}-axis reference state",
                n_max.len(),
                reference.dim()
            )));
        }
        if n_max.iter().any(|&n| n < 2) {
            return Err(Error::Invalid("each cutoff must be at least 2".into()));
        }
        let dim = n_max.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        match dim {
            Some(d) if d <= DEFAULT_BASIS_BUDGET => Ok(Self { n_max, reference }),
            _ => Err(Error::Invalid(format!("basis dimension exceeds {DEFAULT_BASIS_BUDGET}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.n_max.iter().product()
    }

    pub fn axes(&self) -> usize {
        self.n_max.len()
    }

    /// Flat index of a multi-index (last axis fastest).
    pub fn index(&self, n: &[usize]) -> Result<usize> {
        if n.len() != self.axes() {
            return Err(Error::Dimension("multi-index length differs from the number of axes".into()));
        }
        let mut idx = 0;
        for (k, (&nk, &cut)) in n.iter().zip(&self.n_max).enumerate() {
            if nk >= cut {
                return Err(Error::Invalid(format!("occupation {nk} on axis {k} exceeds cutoff {cut}")));
            }
            idx = idx * cut + nk;
        }
        Ok(idx)
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut n = vec![0; self.axes()];
        for k in (0..self.axes()).rev() {
            n[k] = idx % self.n_max[k];
            idx /= self.n_max[k];
        }
        n
    }

    pub fn factors(&self) -> Result<CovarianceFactors> {
        let r = &self.reference;
        decompose_covariance(&r.moments, &r.metric(), r.hbar)
    }
}

/// Amplitudes in a truncated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    pub basis: TruncatedBasis,
    pub coeffs: DVector<C64>,
}

impl FockVector {
    pub fn new(basis: TruncatedBasis, coeffs: DVector<C64>) -> Result<Self> {
        if coeffs.len() != basis.dim() {
            return Err(Error::Dimension(format!("{} amplitudes for a basis of {}", coeffs.len(), basis.dim())));
        }
        Ok(Self { basis, coeffs })
    }

    pub fn basis_state(basis: &TruncatedBasis, n: &[usize]) -> Result<Self> {
        let mut c = DVector::zeros(basis.dim());
        c[basis.index(n)?] = C64::new(1.0, 0.0);
        Self::new(basis.clone(), c)
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    pub fn is_normalized(&self) -> bool {
        (self.coeffs.norm_squared() - 1.0).abs() <= 1e-9
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::Invalid("cannot normalize the zero vector".into()));
        }
        self.coeffs /= C64::new(n, 0.0);
        Ok(self)
    }

    /// Coordinate-grid realization `Σ c_n ψ_n`.
    pub fn to_grid(&self, grid: &CoordinateGrid) -> Result<GridWavefunction> {
        let states = number_states(&self.basis, grid)?;
        let mut out = states[0].scale(self.coeffs[0]);
        for (k, s) in states.iter().enumerate().skip(1) {
            out = out.add_scaled(self.coeffs[k], s)?;
        }
        Ok(out)
    }

    /// Projection of a grid state onto the basis, `c_n = ⟨n|ψ⟩`.
    pub fn project(psi: &GridWavefunction, basis: &TruncatedBasis) -> Result<Self> {
        let states = number_states(basis, &psi.grid)?;
        let c: Vec<C64> = states.par_iter().map(|s| inner_product(s, psi)).collect::<Result<_>>()?;
        Self::new(basis.clone(), DVector::from_vec(c))
    }
}

/// Ladder and number matrices of a truncated basis, one pair per axis.
#[derive(Clone, Debug)]
pub struct LadderMatrices {
    pub lower: Vec<CMat>,
    pub raise: Vec<CMat>,
    pub number: CMat,
}

fn kron_axis(single: &CMat, axis: usize, n_max: &[usize]) -> CMat {
    let mut out = CMat::identity(1, 1);
    for (k, &n) in n_max.iter().enumerate() {
        let factor = if k == axis { single.clone() } else { CMat::identity(n, n) };
        out = out.kronecker(&factor);
    }
    out
}

pub fn build_ladder(basis: &TruncatedBasis) -> LadderMatrices {
    let dim = basis.dim();
    let mut lower = Vec::new();
    let mut raise = Vec::new();
    let mut number = CMat::zeros(dim, dim);
    for (axis, &n) in basis.n_max.iter().enumerate() {
        let mut l = CMat::zeros(n, n);
        for k in 1..n {
            l[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
        }
        let lk = kron_axis(&l, axis, &basis.n_max);
        raise.push(lk.adjoint());
        lower.push(lk);
    }
    // 𝔷†𝔷 is diagonal with integer entries; write them exactly.
    for idx in 0..dim {
        number[(idx, idx)] = C64::new(basis.multi_index(idx).iter().sum::<usize>() as f64, 0.0);
    }
    LadderMatrices { lower, raise, number }
}

/// Grid realization of the ladder operators of a reference joint state.
///
/// `𝔷_μ = (1/ℏ) Σ_ν a_{μν}(z_ν − ⟨z_ν⟩)` and its adjoint, with
/// `z_ν = π_ν − (2i/ℏ) Σ_λ B_{νλ} q_λ`.
pub struct GridLadder {
    pub spec: JointStateSpec,
    pub factors: CovarianceFactors,
}

impl GridLadder {
    pub fn new(spec: &JointStateSpec) -> Result<Self> {
        let factors = decompose_covariance(&spec.moments, &spec.metric(), spec.hbar)?;
        Ok(Self { spec: spec.clone(), factors })
    }

    /// `(z_ν − ⟨z_ν⟩)ψ`, or the adjoint combination when `adjoint` is set.
    fn shifted_z(&self, psi: &GridWavefunction, nu: usize, adjoint: bool) -> Result<GridWavefunction> {
        let s = &self.spec;
        let zbar = s.mean_z()[nu];
        let (zbar, sign) = if adjoint { (zbar.conj(), 1.0) } else { (zbar, -1.0) };
        let mut out = apply_momentum(psi, nu)?.add_scaled(-zbar, psi)?;
        for lam in 0..s.dim() {
            let b = if adjoint { s.shape.b[(nu, lam)].conj() } else { s.shape.b[(nu, lam)] };
            out = out.add_scaled(I * (sign * 2.0 / s.hbar) * b, &apply_position(psi, lam)?)?;
        }
        Ok(out)
    }

    pub fn lower(&self, psi: &GridWavefunction, mu: usize) -> Result<GridWavefunction> {
        self.combine(psi, mu, false)
    }

    pub fn raise(&self, psi: &GridWavefunction, mu: usize) -> Result<GridWavefunction> {
        self.combine(psi, mu, true)
    }

    fn combine(&self, psi: &GridWavefunction, mu: usize, adjoint: bool) -> Result<GridWavefunction> {
        let d = self.spec.dim();
        if mu >= d {
            return Err(Error::Dimension(format!("axis {mu} out of range")));
        }
        let mut out = psi.scale(C64::new(0.0, 0.0));
        for nu in 0..d {
            let a = self.factors.a[(mu, nu)];
            let a = if adjoint { a.conj() } else { a };
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            out = out.add_scaled(a / self.spec.hbar, &self.shifted_z(psi, nu, adjoint)?)?;
        }
        Ok(out)
    }

    /// `𝔑ψ = Σ_μ 𝔷_μ†𝔷_μ ψ`.
    pub fn number(&self, psi: &GridWavefunction) -> Result<GridWavefunction> {
        let mut out = psi.scale(C64::new(0.0, 0.0));
        for mu in 0..self.spec.dim() {
            out = out.add_scaled(C64::new(1.0, 0.0), &self.raise(&self.lower(psi, mu)?, mu)?)?;
        }
        Ok(out)
    }
}

impl GridOperator for GridLadder {
    fn apply(&self, psi: &GridWavefunction) -> Result<GridWavefunction> {
        self.number(psi)
    }
}

/// Coverage half-width, in standard deviations, needed by occupation `n`.
pub fn number_state_sigmas(n: usize) -> f64 {
    6.0 + (2.0 * (2 * n + 1) as f64).sqrt() - 2f64.sqrt()
}

fn check_number_coverage(spec: &JointStateSpec, n: &[usize], grid: &CoordinateGrid) -> Result<()> {
    for (mu, ax) in grid.axes.iter().enumerate() {
        let k = number_state_sigmas(n[mu]);
        let sx = spec.moments.x[(mu, mu)].sqrt();
        let q0 = spec.moments.mean_x[mu];
        if q0 - k * sx < ax.min || q0 + k * sx > ax.max {
            return Err(Error::Coverage(format!("axis {mu} too narrow for occupation {}", n[mu])));
        }
        let sp = spec.moments.p[(mu, mu)].sqrt();
        if spec.moments.mean_p[mu].abs() + k * sp > ax.dual(spec.hbar).max {
            return Err(Error::Coverage(format!("axis {mu} too coarse for occupation {}", n[mu])));
        }
    }
    Ok(())
}

/// Removes momentum components farther than `sigmas` momentum widths from
/// the reference mean. Repeated spectral raising otherwise amplifies
/// round-off at the band edge by roughly `p_max/σ_p` per step.
fn band_limit(psi: &GridWavefunction, spec: &JointStateSpec, sigmas: f64) -> GridWavefunction {
    let mut phi = raw_momentum_transform(psi);
    let Space::Momentum(coord) = &phi.space else { unreachable!("forward transform yields momentum samples") };
    let coord = coord.as_ref().clone();
    let dual = phi.grid.clone();
    let cut: Vec<f64> = (0..spec.dim()).map(|mu| sigmas * spec.moments.p[(mu, mu)].sqrt()).collect();
    phi.values.par_iter_mut().enumerate().for_each(|(k, v)| {
        if (0..cut.len()).any(|mu| (dual.coord(k, mu) - spec.moments.mean_p[mu]).abs() > cut[mu]) {
            *v = C64::new(0.0, 0.0);
        }
    });
    raw_inverse_transform(&phi, &coord)
}

fn band_sigmas(top: &[usize]) -> f64 {
    number_state_sigmas(top.iter().copied().max().unwrap_or(0)) + 6.0
}

/// Grid realization of `|n, ⟨z⟩⟩` built by repeated raising.
pub fn number_state(n: &[usize], basis: &TruncatedBasis, grid: &CoordinateGrid) -> Result<GridWavefunction> {
    basis.index(n)?;
    let spec = &basis.reference;
    check_number_coverage(spec, n, grid)?;
    let ladder = GridLadder::new(spec)?;
    let mut psi = coordinate_wavefunction(spec, grid)?;
    for (mu, &occ) in n.iter().enumerate().rev() {
        for k in 1..=occ {
            let raised = ladder.raise(&psi, mu)?.scale(C64::new(1.0 / (k as f64).sqrt(), 0.0));
            psi = band_limit(&raised, spec, band_sigmas(n));
        }
    }
    let norm = psi.norm_sq();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Coverage(format!(
            "number state {n:?} has norm² {norm:.12}; ln(n!) = {:.3}; widen or refine the grid",
            n.iter().map(|&k| ln_factorial(k)).sum::<f64>()
        )));
    }
    Ok(psi)
}

/// All basis states on the grid, in flat-index order.
pub fn number_states(basis: &TruncatedBasis, grid: &CoordinateGrid) -> Result<Vec<GridWavefunction>> {
    let spec = &basis.reference;
    let ladder = GridLadder::new(spec)?;
    let top: Vec<usize> = basis.n_max.iter().map(|n| n - 1).collect();
    check_number_coverage(spec, &top, grid)?;
    let ground = coordinate_wavefunction(spec, grid)?;
    // Raise along the last axis first so each state reuses its predecessor.
    let mut states: Vec<Option<GridWavefunction>> = vec![None; basis.dim()];
    for idx in 0..basis.dim() {
        let n = basis.multi_index(idx);
        let psi = match n.iter().rposition(|&k| k > 0) {
            None => ground.clone(),
            Some(axis) => {
                let mut prev = n.clone();
                prev[axis] -= 1;
                let prev_state = states[basis.index(&prev)?].as_ref().expect("predecessor built");
                let raised = ladder.raise(prev_state, axis)?.scale(C64::new(1.0 / (n[axis] as f64).sqrt(), 0.0));
                band_limit(&raised, spec, band_sigmas(&top))
            }
        };
        states[idx] = Some(psi);
    }
    let states: Vec<GridWavefunction> = states.into_iter().map(|s| s.expect("all built")).collect();
    for (idx, s) in states.iter().enumerate() {
        let norm = s.norm_sq();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Coverage(format!(
                "number state {:?} has norm² {norm:.12}; widen or refine the grid",
                basis.multi_index(idx)
            )));
        }
    }
    Ok(states)
}

fn gram(states: &[GridWavefunction], op_states: &[GridWavefunction]) -> Result<CMat> {
    let dim = states.len();
    let cols: Vec<Vec<C64>> = op_states
        .par_iter()
        .map(|col| states.iter().map(|row| inner_product(row, col)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok(CMat::from_fn(dim, dim, |i, j| cols[j][i]))
}

/// Largest deviation of the grid Gram matrix from the identity.
pub fn orthonormality_check(basis: &TruncatedBasis, grid: &CoordinateGrid) -> Result<f64> {
    let states = number_states(basis, grid)?;
    let g = gram(&states, &states)?;
    Ok(max_abs_c(&(g - CMat::identity(basis.dim(), basis.dim()))))
}

/// Matrix elements `⟨n|A|n′⟩` by quadrature.
pub fn operator_matrix(op: &dyn GridOperator, basis: &TruncatedBasis, grid: &CoordinateGrid) -> Result<CMat> {
    let states = number_states(basis, grid)?;
    let applied: Vec<GridWavefunction> = states.par_iter().map(|s| op.apply(s)).collect::<Result<_>>()?;
    gram(&states, &applied)
}

/// Coordinate and canonical momentum matrices in the truncated basis,
/// expressed through the ladder matrices.
pub fn quadrature_matrices(basis: &TruncatedBasis) -> Result<(Vec<CMat>, Vec<CMat>)> {
    let spec = &basis.reference;
    let d = spec.dim();
    let hbar = spec.hbar;
    let f = basis.factors()?;
    let lad = build_ladder(basis);
    let dim = basis.dim();
    let a_inv = f.a.clone().try_inverse().ok_or(Error::SingularCovariance)?;
    let a_bar_inv = f.a.map(|v| v.conj()).try_inverse().ok_or(Error::SingularCovariance)?;
    let id = CMat::identity(dim, dim);
    // Centered z′ = ℏ a⁻¹ 𝔷 and z′† = ℏ ā⁻¹ 𝔷†.
    let zc: Vec<CMat> = (0..d)
        .map(|nu| (0..d).fold(CMat::zeros(dim, dim), |acc, l| acc + &lad.lower[l] * (a_inv[(nu, l)] * hbar)))
        .collect();
    let zd: Vec<CMat> = (0..d)
        .map(|nu| (0..d).fold(CMat::zeros(dim, dim), |acc, l| acc + &lad.raise[l] * (a_bar_inv[(nu, l)] * hbar)))
        .collect();
    let xs: Vec<CMat> = (0..d)
        .map(|mu| {
            (0..d).fold(&id * C64::new(spec.moments.mean_x[mu], 0.0), |acc, nu| {
                acc + (&zc[nu] - &zd[nu]) * (I * spec.moments.x[(mu, nu)] / hbar)
            })
        })
        .collect();
    let ps: Vec<CMat> = (0..d)
        .map(|mu| {
            (0..d).fold(&zc[mu] + &id * C64::new(spec.moments.mean_p[mu], 0.0), |acc, nu| {
                let qc = &xs[nu] - &id * C64::new(spec.moments.mean_x[nu], 0.0);
                acc + qc * (I * 2.0 / hbar * spec.shape.b[(mu, nu)])
            })
        })
        .collect();
    Ok((xs, ps))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobertsonReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn check_hermitian(m: &CMat, name: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{name} is not square")));
    }
    if max_abs_c(&(m - m.adjoint())) > 1e-10 * (1.0 + max_abs_c(m)) {
        return Err(Error::Invalid(format!("{name} is not Hermitian")));
    }
    Ok(())
}

/// `σ_A σ_B ≥ ½|⟨[A, B]⟩|` on a basis vector.
pub fn robertson_check(a: &CMat, b: &CMat, state: &FockVector) -> Result<RobertsonReport> {
    check_hermitian(a, "A")?;
    check_hermitian(b, "B")?;
    let n = state.coeffs.len();
    if a.nrows() != n || b.nrows() != n {
        return Err(Error::Dimension("operator and state dimensions differ".into()));
    }
    let psi = state.coeffs.clone() / C64::new(state.norm(), 0.0);
    let spread = |m: &CMat| {
        let mpsi = m * &psi;
        let mean = psi.dotc(&mpsi);
        (mpsi - &psi * mean).norm()
    };
    let comm = a * b - b * a;
    let rhs = 0.5 * psi.dotc(&(comm * &psi)).norm();
    let lhs = spread(a) * spread(b);
    Ok(RobertsonReport { lhs, rhs, holds: lhs >= rhs - 1e-8 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Identity, Position};

    fn basis(n: usize) -> TruncatedBasis {
        TruncatedBasis::new(vec![n], JointStateSpec::ground(1, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn ladder_action_on_basis_vectors() {
        let b = basis(5);
        let l = build_ladder(&b);
        let e = |k: usize| FockVector::basis_state(&b, &[k]).unwrap().coeffs;
        assert_eq!(&l.lower[0] * e(1), e(0));
        assert_eq!((&l.lower[0] * e(0)).norm(), 0.0);
        assert!((&l.number * e(3) - e(3) * C64::new(3.0, 0.0)).norm() < 1e-15);
        let comm = &l.lower[0] * &l.raise[0] - &l.raise[0] * &l.lower[0];
        for k in 0..4 {
            assert!((comm[(k, k)] - 1.0).norm() < 1e-15);
        }
    }

    #[test]
    fn two_axis_kronecker_structure() {
        let spec = JointStateSpec::ground(2, 1.0).unwrap();
        let b = TruncatedBasis::new(vec![3, 4], spec).unwrap();
        let l = build_ladder(&b);
        let v = FockVector::basis_state(&b, &[2, 3]).unwrap().coeffs;
        let w = FockVector::basis_state(&b, &[1, 3]).unwrap().coeffs;
        assert!((&l.lower[0] * &v - w * C64::new(2f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!((&l.number * &v - &v * C64::new(5.0, 0.0)).norm() < 1e-14);
        let rl = &l.raise[0] * &l.lower[0] + &l.raise[1] * &l.lower[1];
        assert!(max_abs_c(&(rl - &l.number)) < 1e-14);
        assert_eq!(b.multi_index(b.index(&[2, 1]).unwrap()), vec![2, 1]);
    }

    #[test]
    fn first_excited_state_has_node_at_mean() {
        let grid = CoordinateGrid::default_for(1).unwrap();
        let psi = number_state(&[1], &basis(4), &grid).unwrap();
        let mid = grid.axes[0].n / 2;
        assert!(psi.values[mid].norm() < 1e-12);
        assert!((psi.norm_sq() - 1.0).abs() < 1e-8);
        let ground = number_state(&[0], &basis(4), &grid).unwrap();
        assert!(inner_product(&ground, &psi).unwrap().norm() < 1e-10);
    }

    #[test]
    fn grid_matrices() {
        let grid = CoordinateGrid::default_for(1).unwrap();
        let b = basis(4);
        assert!(orthonormality_check(&b, &grid).unwrap() < 1e-6);
        let id = operator_matrix(&Identity, &b, &grid).unwrap();
        assert!(max_abs_c(&(id - CMat::identity(4, 4))) < 1e-8);
        let x = operator_matrix(&Position(0), &b, &grid).unwrap();
        assert!((x[(0, 1)] - C64::new(0.5f64.sqrt(), 0.0)).norm() < 1e-6);
        assert!(max_abs_c(&(&x - x.adjoint())) < 1e-8);
        let ladder = GridLadder::new(&b.reference).unwrap();
        let n = operator_matrix(&ladder, &b, &grid).unwrap();
        let diag = CMat::from_diagonal(&DVector::from_fn(4, |k, _| C64::new(k as f64, 0.0)));
        assert!(max_abs_c(&(n - diag)) < 1e-7);
    }

    #[test]
    fn quadrature_matrices_match_grid() {
        let grid = CoordinateGrid::default_for(1).unwrap();
        let spec = JointStateSpec::one_axis(0.4, -0.3, 0.7, 0.3, 1.0).unwrap();
        let b = TruncatedBasis::new(vec![6], spec).unwrap();
        let (xs, ps) = quadrature_matrices(&b).unwrap();
        let xg = operator_matrix(&Position(0), &b, &grid).unwrap();
        let pg = operator_matrix(&crate::grid::Momentum(0), &b, &grid).unwrap();
        // Entries not touched by truncation.
        for i in 0..5 {
            for j in 0..5 {
                assert!((xs[0][(i, j)] - xg[(i, j)]).norm() < 1e-8);
                assert!((ps[0][(i, j)] - pg[(i, j)]).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn robertson_on_ground_state() {
        let b = basis(6);
        let (xs, ps) = quadrature_matrices(&b).unwrap();
        let e0 = FockVector::basis_state(&b, &[0]).unwrap();
        let r = robertson_check(&xs[0], &ps[0], &e0).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-12 && (r.rhs - 0.5).abs() < 1e-12 && r.holds);
        let r = robertson_check(&xs[0], &xs[0], &e0).unwrap();
        assert_eq!(r.rhs, 0.0);
        assert!(r.holds);
    }
}

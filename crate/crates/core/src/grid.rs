//! Uniform coordinate grids and sampled wavefunctions: the brute-force oracle.

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::metric::StatMoments;
use crate::numerics::{pairwise_sum, pairwise_sum_c, RMat, C64};

/// Default cap on the total number of grid points.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 24;
/// Normalization tolerance for states handed to the oracle.
pub const NORM_TOL: f64 = 1e-9;
/// Coverage requirement in standard deviations.
pub const COVERAGE_SIGMAS: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || max <= min {
            return Err(Error::Invalid(format!("axis range [{min}, {max}] is empty")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Invalid(format!("axis point count {n} is not a power of two ≥ 2")));
        }
        Ok(Self { min, max, n })
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        self.min + j as f64 * self.step()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Momentum axis dual to this coordinate axis.
    pub fn dual(&self, hbar: f64) -> Axis {
        let dp = 2.0 * std::f64::consts::PI * hbar / (self.n as f64 * self.step());
        let half = self.n as f64 * dp / 2.0;
        Axis { min: -half, max: half, n: self.n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateGrid {
    pub axes: Vec<Axis>,
}

impl CoordinateGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        Self::with_budget(axes, DEFAULT_POINT_BUDGET)
    }

    pub fn with_budget(axes: Vec<Axis>, budget: usize) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Invalid("grid needs at least one axis".into()));
        }
        if axes.len() > 2 {
            return Err(Error::Unsupported(format!("grid oracle supports D ≤ 2, got D = {}", axes.len())));
        }
        for a in &axes {
            Axis::new(a.min, a.max, a.n)?;
        }
        let total = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.n));
        match total {
            Some(t) if t <= budget => Ok(Self { axes }),
            _ => Err(Error::Invalid(format!("grid exceeds the point budget of {budget}"))),
        }
    }

    /// The default grid `[−12, 12]` with 1024 points per axis.
    pub fn default_for(dim: usize) -> Result<Self> {
        Self::new(vec![Axis { min: -12.0, max: 12.0, n: 1024 }; dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::step).product()
    }

    /// Row-major strides (last axis fastest).
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for k in (0..self.dim().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.axes[k + 1].n;
        }
        s
    }

    /// Coordinate of axis `axis` at flat index `idx`.
    pub fn coord(&self, idx: usize, axis: usize) -> f64 {
        let s = self.strides();
        self.axes[axis].point((idx / s[axis]) % self.axes[axis].n)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        (0..self.dim()).map(|a| self.coord(idx, a)).collect()
    }

    pub fn dual(&self, hbar: f64) -> CoordinateGrid {
        CoordinateGrid { axes: self.axes.iter().map(|a| a.dual(hbar)).collect() }
    }

    pub fn same_as(&self, other: &CoordinateGrid) -> bool {
        self == other
    }
}

/// Which representation a set of samples lives in.
#[derive(Clone, Debug, PartialEq)]
pub enum Space {
    Coordinate,
    /// Momentum samples together with the coordinate grid they came from.
    Momentum(Box<CoordinateGrid>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridWavefunction {
    pub grid: CoordinateGrid,
    pub values: Vec<C64>,
    pub hbar: f64,
    pub space: Space,
}

impl GridWavefunction {
    pub fn new(grid: CoordinateGrid, values: Vec<C64>, hbar: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!("{} samples for a grid of {}", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Invalid("wavefunction samples must be finite".into()));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::Invalid(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { grid, values, hbar, space: Space::Coordinate })
    }

    /// Samples a function of the grid point.
    pub fn from_fn(grid: CoordinateGrid, hbar: f64, f: impl Fn(&[f64]) -> C64 + Sync) -> Result<Self> {
        let values: Vec<C64> = (0..grid.len()).into_par_iter().map(|i| f(&grid.point(i))).collect();
        Self::new(grid, values, hbar)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn norm_sq(&self) -> f64 {
        let w: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        pairwise_sum(&w) * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sq() - 1.0).abs() <= NORM_TOL
    }

    pub fn require_normalized(&self) -> Result<()> {
        let n = self.norm_sq();
        if (n - 1.0).abs() <= NORM_TOL {
            Ok(())
        } else {
            Err(Error::NotNormalized(n))
        }
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::Invalid("cannot normalize the zero vector".into()));
        }
        self.values.iter_mut().for_each(|v| *v /= n);
        Ok(self)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + s·other` on the same grid.
    pub fn add_scaled(&self, s: C64, other: &GridWavefunction) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += s * b);
        Ok(out)
    }

    fn check_compatible(&self, other: &GridWavefunction) -> Result<()> {
        if !self.grid.same_as(&other.grid) || self.space != other.space {
            return Err(Error::Dimension("wavefunctions live on different grids".into()));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &GridWavefunction) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// L2 distance with the grid measure.
    pub fn l2_distance(&self, other: &GridWavefunction) -> Result<f64> {
        self.check_compatible(other)?;
        let w: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).collect();
        Ok((pairwise_sum(&w) * self.grid.cell_volume()).sqrt())
    }
}

/// `⟨psi|phi⟩` by quadrature.
pub fn inner_product(psi: &GridWavefunction, phi: &GridWavefunction) -> Result<C64> {
    psi.check_compatible(phi)?;
    let terms: Vec<C64> = psi.values.iter().zip(&phi.values).map(|(a, b)| a.conj() * b).collect();
    Ok(pairwise_sum_c(&terms) * psi.grid.cell_volume())
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Applies `f` to every 1-D line of `values` along `axis`.
fn for_each_line(grid: &CoordinateGrid, values: &mut [C64], axis: usize, f: impl Fn(&mut [C64]) + Sync) {
    let n = grid.axes[axis].n;
    let stride = grid.strides()[axis];
    let block = n * stride;
    if stride == 1 {
        values.par_chunks_mut(n).for_each(&f);
        return;
    }
    values.par_chunks_mut(block).for_each(|chunk| {
        let mut line = vec![C64::new(0.0, 0.0); n];
        for inner in 0..stride {
            for j in 0..n {
                line[j] = chunk[j * stride + inner];
            }
            f(&mut line);
            for j in 0..n {
                chunk[j * stride + inner] = line[j];
            }
        }
    });
}

/// Signed FFT frequency index of bin `k`.
fn signed_index(k: usize, n: usize) -> f64 {
    if k < n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Unitary transform to momentum samples without coverage checks.
pub(crate) fn raw_momentum_transform(psi: &GridWavefunction) -> GridWavefunction {
    let hbar = psi.hbar;
    let mut values = psi.values.clone();
    let dual = psi.grid.dual(hbar);
    for (axis, a) in psi.grid.axes.iter().enumerate() {
        let n = a.n;
        let fft = plan(n, false);
        let dx = a.step();
        let p_axis = dual.axes[axis];
        let norm = dx / (2.0 * std::f64::consts::PI * hbar).sqrt();
        let x0 = a.min;
        for_each_line(&psi.grid, &mut values, axis, |line| {
            fft.process(line);
            let spectrum = line.to_vec();
            for (j, v) in line.iter_mut().enumerate() {
                let p = p_axis.point(j);
                *v = spectrum[(j + n / 2) % n] * C64::from_polar(norm, -p * x0 / hbar);
            }
        });
    }
    GridWavefunction {
        grid: dual,
        values,
        hbar,
        space: Space::Momentum(Box::new(psi.grid.clone())),
    }
}

pub(crate) fn raw_inverse_transform(phi: &GridWavefunction, coord: &CoordinateGrid) -> GridWavefunction {
    let hbar = phi.hbar;
    let mut values = phi.values.clone();
    for (axis, a) in coord.axes.iter().enumerate() {
        let n = a.n;
        let fft = plan(n, true);
        let dx = a.step();
        let p_axis = phi.grid.axes[axis];
        let norm = (2.0 * std::f64::consts::PI * hbar).sqrt() / (dx * n as f64);
        let x0 = a.min;
        for_each_line(coord, &mut values, axis, |line| {
            let mut spectrum = vec![C64::new(0.0, 0.0); n];
            for j in 0..n {
                let p = p_axis.point(j);
                spectrum[(j + n / 2) % n] = line[j] * C64::from_polar(norm, p * x0 / hbar);
            }
            fft.process(&mut spectrum);
            line.copy_from_slice(&spectrum);
        });
    }
    GridWavefunction { grid: coord.clone(), values, hbar, space: Space::Coordinate }
}

/// Moments of the distribution `|values|²` along each axis: `(mean, variance)`.
fn axis_marginal_moments(psi: &GridWavefunction) -> Vec<(f64, f64)> {
    let vol = psi.grid.cell_volume();
    let dens: Vec<f64> = psi.values.iter().map(|v| v.norm_sqr()).collect();
    let total = pairwise_sum(&dens) * vol;
    (0..psi.dim())
        .map(|axis| {
            let m: Vec<f64> = dens.iter().enumerate().map(|(i, d)| d * psi.grid.coord(i, axis)).collect();
            let mean = pairwise_sum(&m) * vol / total;
            let v: Vec<f64> =
                dens.iter().enumerate().map(|(i, d)| d * (psi.grid.coord(i, axis) - mean).powi(2)).collect();
            (mean, pairwise_sum(&v) * vol / total)
        })
        .collect()
}

/// Checks that the momentum content fits inside the Nyquist band of the grid.
pub(crate) fn check_nyquist(phi: &GridWavefunction) -> Result<()> {
    for (axis, (mean, var)) in axis_marginal_moments(phi).into_iter().enumerate() {
        let p_max = phi.grid.axes[axis].max;
        let need = mean.abs() + COVERAGE_SIGMAS * var.sqrt();
        if p_max < need {
            return Err(Error::Coverage(format!(
                "axis {axis}: Nyquist momentum {p_max:.6} below required {need:.6}; refine the grid"
            )));
        }
    }
    Ok(())
}

pub fn momentum_transform(psi: &GridWavefunction) -> Result<GridWavefunction> {
    if psi.space != Space::Coordinate {
        return Err(Error::Invalid("input is already in the momentum representation".into()));
    }
    psi.require_normalized()?;
    let phi = raw_momentum_transform(psi);
    check_nyquist(&phi)?;
    Ok(phi)
}

pub fn inverse_momentum_transform(phi: &GridWavefunction) -> Result<GridWavefunction> {
    match &phi.space {
        Space::Momentum(coord) => Ok(raw_inverse_transform(phi, coord)),
        Space::Coordinate => Err(Error::Invalid("input is not a momentum-space wavefunction".into())),
    }
}

fn check_axis(psi: &GridWavefunction, axis: usize) -> Result<()> {
    if axis >= psi.dim() {
        return Err(Error::Dimension(format!("axis {axis} out of range for D = {}", psi.dim())));
    }
    if psi.space != Space::Coordinate {
        return Err(Error::Invalid("operator expects coordinate-space samples".into()));
    }
    Ok(())
}

/// Multiplication by the coordinate of `axis`.
pub fn apply_position(psi: &GridWavefunction, axis: usize) -> Result<GridWavefunction> {
    check_axis(psi, axis)?;
    let mut out = psi.clone();
    out.values.par_iter_mut().enumerate().for_each(|(i, v)| *v *= psi.grid.coord(i, axis));
    Ok(out)
}

/// `−iℏ ∂/∂x_axis`, computed spectrally.
pub fn apply_momentum(psi: &GridWavefunction, axis: usize) -> Result<GridWavefunction> {
    check_axis(psi, axis)?;
    let a = psi.grid.axes[axis];
    let n = a.n;
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * a.step());
    let hbar = psi.hbar;
    let fwd = plan(n, false);
    let inv = plan(n, true);
    let mut out = psi.clone();
    for_each_line(&psi.grid, &mut out.values, axis, |line| {
        fwd.process(line);
        for (k, v) in line.iter_mut().enumerate() {
            *v *= hbar * dk * signed_index(k, n) / n as f64;
        }
        inv.process(line);
    });
    Ok(out)
}

/// A linear operator acting on sampled wavefunctions.
pub trait GridOperator: Sync {
    fn apply(&self, psi: &GridWavefunction) -> Result<GridWavefunction>;
}

impl<F> GridOperator for F
where
    F: Fn(&GridWavefunction) -> Result<GridWavefunction> + Sync,
{
    fn apply(&self, psi: &GridWavefunction) -> Result<GridWavefunction> {
        self(psi)
    }
}

pub struct Identity;

impl GridOperator for Identity {
    fn apply(&self, psi: &GridWavefunction) -> Result<GridWavefunction> {
        Ok(psi.clone())
    }
}

/// Coordinate operator of one axis.
pub struct Position(pub usize);

impl GridOperator for Position {
    fn apply(&self, psi: &GridWavefunction) -> Result<GridWavefunction> {
        apply_position(psi, self.0)
    }
}

/// Canonical momentum operator of one axis.
pub struct Momentum(pub usize);

impl GridOperator for Momentum {
    fn apply(&self, psi: &GridWavefunction) -> Result<GridWavefunction> {
        apply_momentum(psi, self.0)
    }
}

/// `Re ⟨u|v⟩` by quadrature.
fn re_inner(u: &GridWavefunction, v: &GridWavefunction) -> f64 {
    inner_product(u, v).map(|z| z.re).unwrap_or(f64::NAN)
}

/// Means and covariance blocks measured by quadrature.
pub fn moments(psi: &GridWavefunction) -> Result<StatMoments> {
    if psi.space != Space::Coordinate {
        return Err(Error::Invalid("moments expect coordinate-space samples".into()));
    }
    let norm = psi.norm_sq();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(norm));
    }
    let d = psi.dim();
    let mut mean_x = vec![0.0; d];
    let mut mean_p = vec![0.0; d];
    let mut dq = Vec::with_capacity(d);
    let mut dp = Vec::with_capacity(d);
    for mu in 0..d {
        let xq = apply_position(psi, mu)?;
        let pq = apply_momentum(psi, mu)?;
        mean_x[mu] = re_inner(psi, &xq);
        mean_p[mu] = re_inner(psi, &pq);
        dq.push(xq.add_scaled(C64::new(-mean_x[mu], 0.0), psi)?);
        dp.push(pq.add_scaled(C64::new(-mean_p[mu], 0.0), psi)?);
    }
    let x = RMat::from_fn(d, d, |m, n| re_inner(&dq[m], &dq[n]));
    let p = RMat::from_fn(d, d, |m, n| re_inner(&dp[m], &dp[n]));
    let rho = RMat::from_fn(d, d, |m, n| re_inner(&dq[n], &dp[m]));
    let x = (&x + x.transpose()) * 0.5;
    let p = (&p + p.transpose()) * 0.5;
    Ok(StatMoments { mean_p, mean_x, p, x, rho })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn gaussian(grid: &CoordinateGrid, x0: f64, var: f64, p0: f64) -> GridWavefunction {
        GridWavefunction::from_fn(grid.clone(), 1.0, |q| {
            let u = q[0] - x0;
            C64::from_polar((2.0 * PI * var).powf(-0.25) * (-u * u / (4.0 * var)).exp(), p0 * q[0])
        })
        .unwrap()
    }

    #[test]
    fn axis_validation() {
        assert!(Axis::new(0.0, 1.0, 3).is_err());
        assert!(Axis::new(1.0, 0.0, 4).is_err());
        assert!(CoordinateGrid::new(vec![Axis::new(0.0, 1.0, 4).unwrap(); 3]).is_err());
        assert!(CoordinateGrid::with_budget(vec![Axis::new(0.0, 1.0, 1 << 12).unwrap(); 2], 1 << 24).is_ok());
        assert!(CoordinateGrid::with_budget(vec![Axis::new(0.0, 1.0, 1 << 12).unwrap(); 2], 1 << 20).is_err());
    }

    #[test]
    fn transform_of_ground_gaussian() {
        let grid = CoordinateGrid::default_for(1).unwrap();
        let psi = gaussian(&grid, 0.0, 0.5, 0.0);
        let phi = momentum_transform(&psi).unwrap();
        assert!((phi.norm_sq() - 1.0).abs() < 1e-12);
        for (i, v) in phi.values.iter().enumerate() {
            let p = phi.grid.coord(i, 0);
            let expected = PI.powf(-0.25) * (-p * p / 2.0).exp();
            assert!((v.norm() - expected).abs() < 1e-12);
        }
        let back = inverse_momentum_transform(&phi).unwrap();
        assert!(back.max_abs_diff(&psi).unwrap() < 1e-12);
    }

    #[test]
    fn transform_rejects_unresolved_momentum() {
        let grid = CoordinateGrid::new(vec![Axis::new(-12.0, 12.0, 64).unwrap()]).unwrap();
        let psi = gaussian(&grid, 0.0, 0.5, 5.0);
        assert!(matches!(momentum_transform(&psi), Err(Error::Coverage(_))));
    }

    #[test]
    fn momentum_mean_and_ccr() {
        let grid = CoordinateGrid::default_for(1).unwrap();
        let psi = gaussian(&grid, 0.7, 0.8, 1.5);
        let m = moments(&psi).unwrap();
        assert_relative_eq!(m.mean_p[0], 1.5, epsilon = 1e-10);
        assert_relative_eq!(m.mean_x[0], 0.7, epsilon = 1e-10);
        let px = apply_momentum(&apply_position(&psi, 0).unwrap(), 0).unwrap();
        let xp = apply_position(&apply_momentum(&psi, 0).unwrap(), 0).unwrap();
        let comm = inner_product(&psi, &px).unwrap() - inner_product(&psi, &xp).unwrap();
        assert!((comm - C64::new(0.0, -1.0)).norm() < 1e-8);
    }

    #[test]
    fn even_real_state_has_zero_correlation() {
        let grid = CoordinateGrid::default_for(1).unwrap();
        let m = moments(&gaussian(&grid, 0.0, 0.5, 0.0)).unwrap();
        assert!(m.rho[(0, 0)].abs() < 1e-12);
        assert!(m.mean_p[0].abs() < 1e-12);
        assert_relative_eq!(m.p[(0, 0)], 0.5, epsilon = 1e-10);
        assert_relative_eq!(m.x[(0, 0)], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn inner_product_is_conjugate_symmetric() {
        let grid = CoordinateGrid::default_for(1).unwrap();
        let a = gaussian(&grid, 0.3, 0.5, 0.2);
        let b = gaussian(&grid, -0.4, 0.7, -1.0);
        let ab = inner_product(&a, &b).unwrap();
        let ba = inner_product(&b, &a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-15);
        assert!((inner_product(&a, &a).unwrap() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn two_axis_transform_is_unitary() {
        let ax = Axis::new(-10.0, 10.0, 128).unwrap();
        let grid = CoordinateGrid::new(vec![ax, ax]).unwrap();
        let psi = GridWavefunction::from_fn(grid, 1.0, |q| {
            C64::from_polar((-(q[0] - 1.0).powi(2) / 2.0 - q[1] * q[1] / 2.0).exp() / PI.sqrt(), 0.5 * q[1])
        })
        .unwrap();
        let phi = momentum_transform(&psi).unwrap();
        assert!((phi.norm_sq() - 1.0).abs() < 1e-12);
        let back = inverse_momentum_transform(&phi).unwrap();
        assert!(back.max_abs_diff(&psi).unwrap() < 1e-12);
    }
}

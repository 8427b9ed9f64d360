//! Representative operators acting on phase-space wavefunctions.
//!
//! With `c` the gauge coefficient (`K = c·Σπq/ℏ`), covariant momentum
//! `p_μ = −π_μ` and covariant coordinate `x_μ = η_μ q_μ`:
//!
//! `p̃_μ = iℏ ∂/∂⟨x^μ⟩ + ⟨p_μ⟩ + ℏ ∂K/∂⟨x^μ⟩ = iℏ ∂/∂q_μ − (1 − c) π_μ`
//!
//! `x̃_μ = −iℏ ∂/∂⟨p^μ⟩ − ℏ ∂K/∂⟨p^μ⟩ = iℏ η_μ ∂/∂π_μ + c η_μ q_μ`
//!
//! so that `[p̃_μ, x̃_ν] = iℏ η_{μν}` in every gauge.

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::grid::{apply_momentum, apply_position, CoordinateGrid, GridOperator, GridWavefunction};
use crate::joint::GaugeChoice;
use crate::numerics::{cdot, pairwise_sum, CMat, C64, I};
use crate::phase::{along_axis, analyze, family_ket, AnalyzingFamily, PhaseGrid, PhaseWavefunction};

/// Relative edge magnitude (and band-edge spectral content) above which
/// spectral differentiation is refused.
pub const EDGE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum PhaseOpKind {
    PTilde(usize),
    XTilde(usize),
    /// Operator product in written order (the last factor acts first).
    Composed(Vec<PhaseOperator>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseOperator {
    pub gauge: GaugeChoice,
    pub hbar: f64,
    pub kind: PhaseOpKind,
}

impl PhaseOperator {
    pub fn ptilde(gauge: GaugeChoice, hbar: f64, axis: usize) -> Self {
        Self { gauge, hbar, kind: PhaseOpKind::PTilde(axis) }
    }

    pub fn xtilde(gauge: GaugeChoice, hbar: f64, axis: usize) -> Self {
        Self { gauge, hbar, kind: PhaseOpKind::XTilde(axis) }
    }

    pub fn apply(&self, pw: &PhaseWavefunction) -> Result<PhaseWavefunction> {
        if pw.gauge() != self.gauge {
            return Err(Error::GaugeMismatch { family: pw.gauge().to_string(), requested: self.gauge.to_string() });
        }
        if (pw.family.hbar() - self.hbar).abs() > 1e-15 * self.hbar {
            return Err(Error::Invalid("operator and phase wavefunction use different hbar".into()));
        }
        match &self.kind {
            PhaseOpKind::PTilde(axis) => apply_ptilde(pw, *axis),
            PhaseOpKind::XTilde(axis) => apply_xtilde(pw, *axis),
            PhaseOpKind::Composed(ops) => {
                let mut out = pw.clone();
                for op in ops.iter().rev() {
                    out = op.apply(&out)?;
                }
                Ok(out)
            }
        }
    }
}

/// Tensor position of the momentum (`which = 0`) or coordinate (`which = 1`) direction of `axis`.
fn split(shape: &[usize], dim: usize) -> (usize, usize, usize) {
    (shape[..dim].iter().product(), shape[dim], shape[dim + 1..].iter().product())
}

/// Spectral derivative of the samples along one tensor dimension.
fn spectral_derivative(pw: &PhaseWavefunction, dim: usize, step: f64) -> Result<Vec<C64>> {
    let shape = pw.shape();
    let (outer, n, inner) = split(&shape, dim);
    let peak = pw.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let mut edge = 0.0f64;
    for o in 0..outer {
        for r in 0..inner {
            edge = edge.max(pw.values[o * n * inner + r].norm());
            edge = edge.max(pw.values[(o * n + n - 1) * inner + r].norm());
        }
    }
    if peak > 0.0 && edge > EDGE_TOL * peak {
        return Err(Error::Coverage(format!(
            "phase function does not decay at the grid edge (relative {:.3e}); widen the phase grid",
            edge / peak
        )));
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * step);
    // Largest per-line energy in the top eighth of the band, as f64 bits.
    let high = AtomicU64::new(0);
    let out = along_axis(&pw.values, outer, n, inner, n, |line| {
        let mut buf = line.to_vec();
        fwd.process(&mut buf);
        let e: f64 = (7 * n / 16..=9 * n / 16).map(|k| buf[k].norm_sqr()).sum();
        high.fetch_max(e.to_bits(), Ordering::Relaxed);
        for (k, v) in buf.iter_mut().enumerate() {
            let kk = if k < n / 2 {
                k as f64
            } else if k == n / 2 {
                0.0
            } else {
                k as f64 - n as f64
            };
            *v *= I * kk * dk / n as f64;
        }
        inv.process(&mut buf);
        buf
    });
    let total: f64 = n as f64 * pw.values.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let ratio = (f64::from_bits(high.into_inner()) / total).sqrt();
    if total > 0.0 && ratio > EDGE_TOL {
        return Err(Error::Coverage(format!(
            "phase grid too coarse along direction {dim}: relative band-edge content {ratio:.3e}; add points"
        )));
    }
    Ok(out)
}

fn check_pair(pw: &PhaseWavefunction, axis: usize) -> Result<()> {
    if axis >= pw.grid.dim() {
        return Err(Error::Dimension(format!("axis {axis} out of range for {} pairs", pw.grid.dim())));
    }
    Ok(())
}

/// Phase-point coordinate of `axis` at flat index `idx`.
fn phase_coord(pw: &PhaseWavefunction, idx: usize, axis: usize, momentum: bool) -> f64 {
    let shape = pw.shape();
    let dim = 2 * axis + usize::from(!momentum);
    let inner: usize = shape[dim + 1..].iter().product();
    let k = (idx / inner) % shape[dim];
    let pr = &pw.grid.pairs[axis];
    if momentum {
        pr.p(k)
    } else {
        pr.x(k)
    }
}

pub fn apply_ptilde(pw: &PhaseWavefunction, axis: usize) -> Result<PhaseWavefunction> {
    check_pair(pw, axis)?;
    let hbar = pw.family.hbar();
    let c = pw.gauge().coefficient();
    let d = spectral_derivative(pw, 2 * axis + 1, pw.grid.pairs[axis].dx())?;
    let values = (0..pw.values.len())
        .into_par_iter()
        .map(|k| I * hbar * d[k] - pw.values[k] * ((1.0 - c) * phase_coord(pw, k, axis, true)))
        .collect();
    pw.with_values(values)
}

pub fn apply_xtilde(pw: &PhaseWavefunction, axis: usize) -> Result<PhaseWavefunction> {
    check_pair(pw, axis)?;
    let hbar = pw.family.hbar();
    let c = pw.gauge().coefficient();
    let eta = pw.family.template.signature.eta(axis);
    let d = spectral_derivative(pw, 2 * axis, pw.grid.pairs[axis].dp())?;
    let values = (0..pw.values.len())
        .into_par_iter()
        .map(|k| I * hbar * eta * d[k] + pw.values[k] * (c * eta * phase_coord(pw, k, axis, false)))
        .collect();
    pw.with_values(values)
}

fn rel_norm(r: &[C64], f: &[C64]) -> f64 {
    let num: Vec<f64> = r.iter().map(|v| v.norm_sqr()).collect();
    let den: Vec<f64> = f.iter().map(|v| v.norm_sqr()).collect();
    (pairwise_sum(&num) / pairwise_sum(&den)).sqrt()
}

/// `‖(p̃_μ x̃_ν − x̃_ν p̃_μ) f − iℏη_{μν} f‖ / ‖f‖` with `f` relabelled into `gauge`.
pub fn ccr_residual(gauge: GaugeChoice, test_pw: &PhaseWavefunction, mu: usize, nu: usize) -> Result<f64> {
    let f = PhaseWavefunction { family: test_pw.family.with_gauge(gauge), ..test_pw.clone() };
    let hbar = f.family.hbar();
    let eta = if mu == nu { f.family.template.signature.eta(mu) } else { 0.0 };
    let px = apply_ptilde(&apply_xtilde(&f, nu)?, mu)?;
    let xp = apply_xtilde(&apply_ptilde(&f, mu)?, nu)?;
    let r: Vec<C64> = (0..f.values.len()).map(|k| px.values[k] - xp.values[k] - I * hbar * eta * f.values[k]).collect();
    Ok(rel_norm(&r, &f.values))
}

/// CCR residuals for every axis pair.
pub fn ccr_residuals(gauge: GaugeChoice, test_pw: &PhaseWavefunction) -> Result<DMatrix<f64>> {
    let d = test_pw.grid.dim();
    let mut m = DMatrix::zeros(d, d);
    for mu in 0..d {
        for nu in 0..d {
            m[(mu, nu)] = ccr_residual(gauge, test_pw, mu, nu)?;
        }
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub p_error: f64,
    pub x_error: f64,
}

/// Compares `⟨⟨z⟩|p_μ|ψ⟩`, `⟨⟨z⟩|x_μ|ψ⟩` from the grid oracle with `p̃ψ̃`, `x̃ψ̃`.
pub fn consistency_check(
    psi: &GridWavefunction,
    family: &AnalyzingFamily,
    pgrid: &PhaseGrid,
    gauge: GaugeChoice,
) -> Result<ConsistencyReport> {
    if family.gauge() != gauge {
        return Err(Error::GaugeMismatch { family: family.gauge().to_string(), requested: gauge.to_string() });
    }
    let pw = crate::phase::phase_wavefunction(psi, family, pgrid)?;
    let sup = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
    let mut p_error = 0.0f64;
    let mut x_error = 0.0f64;
    for mu in 0..psi.dim() {
        let eta = family.template.signature.eta(mu);
        let p_psi = apply_momentum(psi, mu)?.scale(C64::new(-1.0, 0.0));
        let x_psi = apply_position(psi, mu)?.scale(C64::new(eta, 0.0));
        let direct_p = analyze(&p_psi, family, pgrid)?;
        let direct_x = analyze(&x_psi, family, pgrid)?;
        p_error = p_error.max(sup(&direct_p.values, &apply_ptilde(&pw, mu)?.values));
        x_error = x_error.max(sup(&direct_x.values, &apply_xtilde(&pw, mu)?.values));
    }
    Ok(ConsistencyReport { p_error, x_error })
}

/// Samples `A(z, z′) = ⟨⟨z⟩|A|⟨z′⟩⟩` on a phase grid.
#[derive(Clone, Debug)]
pub struct ContinuousKernel {
    pub grid: PhaseGrid,
    pub family: AnalyzingFamily,
    pub values: CMat,
}

pub fn continuous_kernel(
    op: &dyn GridOperator,
    family: &AnalyzingFamily,
    pgrid: &PhaseGrid,
    grid: &CoordinateGrid,
) -> Result<ContinuousKernel> {
    if family.dim() != pgrid.dim() || grid.dim() != pgrid.dim() {
        return Err(Error::Dimension("family, phase grid and coordinate grid dimensions differ".into()));
    }
    let n = pgrid.len();
    let cols: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let ket = family_ket(family, &pgrid.point(k), grid)?;
            Ok(analyze(&op.apply(&ket)?, family, pgrid)?.values)
        })
        .collect::<Result<_>>()?;
    let values = CMat::from_fn(n, n, |i, j| cols[j][i]);
    Ok(ContinuousKernel { grid: pgrid.clone(), family: family.clone(), values })
}

impl ContinuousKernel {
    /// `Σ_{z′} A(z, z′) ψ̃(z′) · measure`.
    pub fn contract(&self, pw: &PhaseWavefunction) -> Result<Vec<C64>> {
        if pw.grid != self.grid || pw.gauge() != self.family.gauge() {
            return Err(Error::Invalid("phase wavefunction does not match the kernel grid and gauge".into()));
        }
        let w = self.grid.measure();
        Ok((0..self.values.nrows())
            .into_par_iter()
            .map(|i| {
                let row: Vec<C64> = self.values.row(i).iter().map(|v| v.conj()).collect();
                cdot(&row, &pw.values) * w
            })
            .collect())
    }

    /// `max |A(z, z′) − conj(A(z′, z))|`.
    pub fn hermiticity_defect(&self) -> f64 {
        crate::numerics::max_abs_c(&(&self.values - self.values.adjoint()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{number_state, TruncatedBasis};
    use crate::grid::{Axis, Identity, Position};
    use crate::joint::{analytic_overlap, coordinate_wavefunction, JointStateSpec};
    use crate::phase::phase_wavefunction;

    fn setup(gauge: GaugeChoice) -> (GridWavefunction, AnalyzingFamily, PhaseGrid) {
        let grid = CoordinateGrid::default_for(1).unwrap();
        let fam = AnalyzingFamily::ground(1, 1.0, gauge).unwrap();
        let psi = coordinate_wavefunction(&JointStateSpec::one_axis(0.4, -0.6, 0.5, 0.0, 1.0).unwrap(), &grid).unwrap();
        let pg = PhaseGrid::default_for(&psi, &fam).unwrap();
        (psi, fam, pg)
    }

    #[test]
    fn ccr_holds_in_every_gauge() {
        let (psi, fam, pg) = setup(GaugeChoice::Zero);
        let pw = phase_wavefunction(&psi, &fam, &pg).unwrap();
        let r: Vec<f64> = GaugeChoice::printed().iter().map(|g| ccr_residual(*g, &pw, 0, 0).unwrap()).collect();
        for v in &r {
            assert!(*v < 1e-8, "{r:?}");
        }
        assert!((r[0] - r[1]).abs() < 1e-10 && (r[0] - r[2]).abs() < 1e-10);
    }

    #[test]
    fn consistency_for_each_gauge() {
        for g in GaugeChoice::printed() {
            let (psi, fam, pg) = setup(g);
            let rep = consistency_check(&psi, &fam, &pg, g).unwrap();
            assert!(rep.p_error < 1e-3 && rep.x_error < 1e-3, "{g}: {rep:?}");
        }
        let (psi, fam, pg) = setup(GaugeChoice::Zero);
        assert!(matches!(consistency_check(&psi, &fam, &pg, GaugeChoice::Full), Err(Error::GaugeMismatch { .. })));
    }

    #[test]
    fn consistency_for_first_excited_state() {
        let grid = CoordinateGrid::default_for(1).unwrap();
        let fam = AnalyzingFamily::ground(1, 1.0, GaugeChoice::Half).unwrap();
        let b = TruncatedBasis::new(vec![3], JointStateSpec::ground(1, 1.0).unwrap()).unwrap();
        let psi = number_state(&[1], &b, &grid).unwrap();
        let pg = PhaseGrid::default_for(&psi, &fam).unwrap();
        let rep = consistency_check(&psi, &fam, &pg, GaugeChoice::Half).unwrap();
        assert!(rep.x_error < 1e-3 && rep.p_error < 1e-3, "{rep:?}");
    }

    #[test]
    fn printed_gauge_forms() {
        let (psi, fam, pg) = setup(GaugeChoice::Zero);
        let pw = phase_wavefunction(&psi, &fam, &pg).unwrap();
        // Zero gauge: x̃ carries no additive term, so it vanishes on constants along p.
        let x = apply_xtilde(&pw, 0).unwrap();
        let d = spectral_derivative(&pw, 0, pg.pairs[0].dp()).unwrap();
        for k in (0..pw.values.len()).step_by(101) {
            assert!((x.values[k] + I * d[k]).norm() < 1e-12);
        }
        // Full gauge: p̃ is the bare derivative.
        let full = PhaseWavefunction { family: fam.with_gauge(GaugeChoice::Full), ..pw.clone() };
        let p = apply_ptilde(&full, 0).unwrap();
        let dq = spectral_derivative(&full, 1, pg.pairs[0].dx()).unwrap();
        for k in (0..pw.values.len()).step_by(101) {
            assert!((p.values[k] - I * dq[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn modulus_is_gauge_independent() {
        let mut mods = Vec::new();
        for g in GaugeChoice::printed() {
            let (psi, fam, pg) = setup(g);
            let pw = phase_wavefunction(&psi, &fam, &pg).unwrap();
            mods.push(apply_ptilde(&pw, 0).unwrap().values.iter().map(|v| v.norm()).collect::<Vec<_>>());
        }
        for ((a, b), c) in mods[0].iter().zip(&mods[1]).zip(&mods[2]) {
            assert!((a - b).abs() < 1e-10 && (a - c).abs() < 1e-10);
        }
    }

    fn small() -> (CoordinateGrid, AnalyzingFamily, PhaseGrid) {
        let grid = CoordinateGrid::new(vec![Axis::new(-12.0, 12.0, 256).unwrap()]).unwrap();
        let fam = AnalyzingFamily::ground(1, 1.0, GaugeChoice::Zero).unwrap();
        let pg = PhaseGrid::new(vec![crate::phase::PhasePair::new(-6.0, 6.0, 32, -6.0, 6.0, 32).unwrap()], 1.0).unwrap();
        (grid, fam, pg)
    }

    #[test]
    fn identity_kernel_is_overlap() {
        let (grid, fam, pg) = small();
        let k = continuous_kernel(&Identity, &fam, &pg, &grid).unwrap();
        for (i, j) in [(0, 0), (10, 500), (700, 3), (1023, 512)] {
            let a = pg.point(i);
            let b = pg.point(j);
            let za = fam.member(vec![a[0].0], vec![a[0].1]).unwrap();
            let zb = fam.member(vec![b[0].0], vec![b[0].1]).unwrap();
            let o = analytic_overlap(&za, &zb).unwrap().value;
            assert!((k.values[(i, j)] - o).norm() < 1e-8);
        }
    }

    #[test]
    fn position_kernel_is_hermitian_and_contracts() {
        let (grid, fam, pg) = small();
        let k = continuous_kernel(&Position(0), &fam, &pg, &grid).unwrap();
        assert!(k.hermiticity_defect() < 1e-8);
        let psi = coordinate_wavefunction(&JointStateSpec::one_axis(0.2, 0.3, 0.5, 0.0, 1.0).unwrap(), &grid).unwrap();
        let pw = crate::phase::analyze(&psi, &fam, &pg).unwrap();
        let via_kernel = k.contract(&pw).unwrap();
        let direct = crate::phase::analyze(&apply_position(&psi, 0).unwrap(), &fam, &pg).unwrap();
        let err = via_kernel.iter().zip(&direct.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }
}

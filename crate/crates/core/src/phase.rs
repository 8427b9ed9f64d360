//! Phase-space wavefunctions and distributions on uniform phase grids.
//!
//! Overlaps with the analyzing family are evaluated by direct quadrature on
//! the coordinate grid of the source state. Families with diagonal
//! covariance factorize over axes, so each axis is contracted separately.

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::fock::number_states;
use crate::grid::{moments, CoordinateGrid, GridWavefunction, Space};
use crate::joint::{GaugeChoice, JointStateSpec};
use crate::numerics::{pairwise_sum, C64};

/// Smallest allowed number of phase points per direction.
pub const MIN_PHASE_POINTS: usize = 32;
/// Default phase points per direction for one pair.
pub const DEFAULT_PHASE_POINTS: usize = 128;
/// Default phase points per direction when two pairs are present.
pub const DEFAULT_PHASE_POINTS_2D: usize = 32;
/// Minimum coverage for the closure relation, in standard deviations.
pub const CLOSURE_SIGMAS: f64 = 8.0;
/// Half-width of default phase grids, in standard deviations. Wide enough
/// that range truncation stays below the quadrature round-off floor.
pub const DEFAULT_PHASE_SIGMAS: f64 = 12.0;
/// Closure error treated as converged to the double-precision floor.
pub const CLOSURE_FLOOR: f64 = 1e-9;

/// One momentum–coordinate pair of a phase grid, sampled at cell midpoints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePair {
    pub p_min: f64,
    pub p_max: f64,
    pub n_p: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
}

impl PhasePair {
    pub fn new(p_min: f64, p_max: f64, n_p: usize, x_min: f64, x_max: f64, n_x: usize) -> Result<Self> {
        for (lo, hi, n, name) in [(p_min, p_max, n_p, "momentum"), (x_min, x_max, n_x, "coordinate")] {
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(Error::Invalid(format!("{name} range [{lo}, {hi}] is empty")));
            }
            if n < MIN_PHASE_POINTS {
                return Err(Error::Invalid(format!("{name} direction needs at least {MIN_PHASE_POINTS} points, got {n}")));
            }
        }
        Ok(Self { p_min, p_max, n_p, x_min, x_max, n_x })
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.n_p as f64
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_x as f64
    }

    pub fn p(&self, i: usize) -> f64 {
        self.p_min + (i as f64 + 0.5) * self.dp()
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dx()
    }

    pub fn len(&self) -> usize {
        self.n_p * self.n_x
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same ranges with the point counts multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self { n_p: self.n_p * factor, n_x: self.n_x * factor, ..*self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub pairs: Vec<PhasePair>,
    pub hbar: f64,
}

impl PhaseGrid {
    pub fn new(pairs: Vec<PhasePair>, hbar: f64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Invalid("phase grid needs at least one pair".into()));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::Invalid(format!("hbar must be positive, got {hbar}")));
        }
        for p in &pairs {
            PhasePair::new(p.p_min, p.p_max, p.n_p, p.x_min, p.x_max, p.n_x)?;
        }
        Ok(Self { pairs, hbar })
    }

    /// Grid centred on the phase-space footprint of `psi` seen through `family`,
    /// spanning `sigmas` standard deviations with `n` points per direction.
    pub fn covering(psi: &GridWavefunction, family: &AnalyzingFamily, sigmas: f64, n: usize) -> Result<Self> {
        let spread = husimi_spread(psi, family)?;
        let pairs = spread
            .iter()
            .map(|s| {
                PhasePair::new(
                    s.mean_p - sigmas * s.sd_p,
                    s.mean_p + sigmas * s.sd_p,
                    n,
                    s.mean_x - sigmas * s.sd_x,
                    s.mean_x + sigmas * s.sd_x,
                    n,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs, psi.hbar)
    }

    /// Closure-grade grid with the default point count for the dimension.
    pub fn default_for(psi: &GridWavefunction, family: &AnalyzingFamily) -> Result<Self> {
        let n = if psi.dim() == 1 { DEFAULT_PHASE_POINTS } else { DEFAULT_PHASE_POINTS_2D };
        Self::covering(psi, family, DEFAULT_PHASE_SIGMAS, n)
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn len(&self) -> usize {
        self.pairs.iter().map(PhasePair::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.hbar
    }

    /// Cell weight `Π Δp Δx / h`.
    pub fn measure(&self) -> f64 {
        self.pairs.iter().map(|p| p.dp() * p.dx() / self.h()).product()
    }

    /// Cell weight without the `1/h` factors.
    pub fn cell_volume(&self) -> f64 {
        self.pairs.iter().map(|p| p.dp() * p.dx()).product()
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self { pairs: self.pairs.iter().map(|p| p.refined(factor)).collect(), hbar: self.hbar }
    }

    /// `(p, x)` of every pair at flat index `idx` (pair-major, momentum before coordinate).
    pub fn point(&self, mut idx: usize) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0); self.dim()];
        for k in (0..self.dim()).rev() {
            let pr = &self.pairs[k];
            let local = idx % pr.len();
            idx /= pr.len();
            out[k] = (pr.p(local / pr.n_x), pr.x(local % pr.n_x));
        }
        out
    }
}

/// Per-axis parameters of a separable analyzing family.
#[derive(Clone, Copy, Debug, PartialEq)]
struct AxisFactor {
    b: C64,
    norm: f64,
    x_var: f64,
    p_var: f64,
}

/// The family of joint states `|⟨z⟩⟩` sharing one covariance and gauge.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyzingFamily {
    pub template: JointStateSpec,
    axes: Vec<AxisFactor>,
}

impl AnalyzingFamily {
    pub fn new(template: &JointStateSpec) -> Result<Self> {
        let m = &template.moments;
        let d = template.dim();
        for i in 0..d {
            for j in 0..d {
                if i != j && (m.x[(i, j)] != 0.0 || m.rho[(i, j)] != 0.0) {
                    return Err(Error::Unsupported(
                        "phase-space quadrature needs an analyzing family with diagonal covariance".into(),
                    ));
                }
            }
        }
        let axes = (0..d)
            .map(|mu| AxisFactor {
                b: template.shape.b[(mu, mu)],
                norm: (2.0 * std::f64::consts::PI * m.x[(mu, mu)]).powf(-0.25),
                x_var: m.x[(mu, mu)],
                p_var: m.p[(mu, mu)],
            })
            .collect();
        Ok(Self { template: template.clone(), axes })
    }

    /// Ground-form family with `X = (ℏ/2)·I`.
    pub fn ground(dim: usize, hbar: f64, gauge: GaugeChoice) -> Result<Self> {
        Self::new(&JointStateSpec::ground(dim, hbar)?.with_gauge(gauge))
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn gauge(&self) -> GaugeChoice {
        self.template.gauge
    }

    pub fn hbar(&self) -> f64 {
        self.template.hbar
    }

    pub fn with_gauge(&self, gauge: GaugeChoice) -> Self {
        Self { template: self.template.with_gauge(gauge), axes: self.axes.clone() }
    }

    /// Member of the family centred at the given phase point.
    pub fn member(&self, mean_p: Vec<f64>, mean_x: Vec<f64>) -> Result<JointStateSpec> {
        self.template.with_means(mean_p, mean_x)
    }

    /// Envelope `g(u)` of axis `mu` without momentum or gauge phases.
    fn envelope(&self, mu: usize, u: f64) -> C64 {
        let a = &self.axes[mu];
        let h2 = self.hbar() * self.hbar();
        (-a.b * u * u / h2).exp() * a.norm
    }

    /// Half-width beyond which the envelope is below `1e-17` of its peak.
    fn support(&self, mu: usize) -> f64 {
        let a = &self.axes[mu];
        let h2 = self.hbar() * self.hbar();
        (39.2 * h2 / a.b.re).sqrt()
    }

    /// Gauge phase `K` restricted to one axis (the constant sits on axis 0).
    fn axis_k(&self, mu: usize, p: f64, x: f64) -> f64 {
        let g = self.gauge();
        let c = if mu == 0 { g.constant() } else { 0.0 };
        g.coefficient() * p * x / self.hbar() + c
    }
}

#[derive(Clone, Copy, Debug)]
struct Spread {
    mean_p: f64,
    mean_x: f64,
    sd_p: f64,
    sd_x: f64,
}

/// Means and standard deviations of the Husimi-type distribution of `psi`.
fn husimi_spread(psi: &GridWavefunction, family: &AnalyzingFamily) -> Result<Vec<Spread>> {
    if family.dim() != psi.dim() {
        return Err(Error::Dimension("family and state dimensions differ".into()));
    }
    let m = moments(psi)?;
    Ok((0..psi.dim())
        .map(|mu| Spread {
            mean_p: m.mean_p[mu],
            mean_x: m.mean_x[mu],
            sd_p: (m.p[(mu, mu)] + family.axes[mu].p_var).sqrt(),
            sd_x: (m.x[(mu, mu)] + family.axes[mu].x_var).sqrt(),
        })
        .collect())
}

fn check_phase_coverage(psi: &GridWavefunction, family: &AnalyzingFamily, pgrid: &PhaseGrid, sigmas: f64) -> Result<()> {
    if pgrid.dim() != psi.dim() {
        return Err(Error::Dimension("phase grid and state dimensions differ".into()));
    }
    if (pgrid.hbar - psi.hbar).abs() > 1e-15 * psi.hbar || (family.hbar() - psi.hbar).abs() > 1e-15 * psi.hbar {
        return Err(Error::Invalid("state, family and phase grid must share hbar".into()));
    }
    for (mu, s) in husimi_spread(psi, family)?.iter().enumerate() {
        let pr = &pgrid.pairs[mu];
        let ok = pr.p_min <= s.mean_p - sigmas * s.sd_p
            && pr.p_max >= s.mean_p + sigmas * s.sd_p
            && pr.x_min <= s.mean_x - sigmas * s.sd_x
            && pr.x_max >= s.mean_x + sigmas * s.sd_x;
        if !ok {
            return Err(Error::Coverage(format!(
                "pair {mu}: phase grid does not cover {sigmas}σ of the state (mean p {:.4}, x {:.4}; σ_p {:.4}, σ_x {:.4})",
                s.mean_p, s.mean_x, s.sd_p, s.sd_x
            )));
        }
        let nyq = psi.grid.axes[mu].dual(psi.hbar).max;
        let reach = pr.p_min.abs().max(pr.p_max.abs()) + 6.0 * family.axes[mu].p_var.sqrt();
        if reach > nyq {
            return Err(Error::Coverage(format!(
                "pair {mu}: phase momenta up to {reach:.4} exceed the coordinate-grid Nyquist momentum {nyq:.4}"
            )));
        }
    }
    Ok(())
}

/// Precomputed per-axis quadrature tables.
struct AxisTables {
    n_p: usize,
    n_q: usize,
    n_x: usize,
    /// `e^{−iπ_i x/ℏ}`, row-major `(i, x)`.
    wave: Vec<C64>,
    /// `conj(g(x − q_j))`, row-major `(j, x)`.
    env: Vec<C64>,
    /// Index range of `x` where the envelope around `q_j` is significant.
    span: Vec<(usize, usize)>,
    /// `e^{iK_μ(π_i, q_j)}`, row-major `(i, j)`.
    gauge: Vec<C64>,
    dx: f64,
}

impl AxisTables {
    fn build(family: &AnalyzingFamily, mu: usize, pair: &PhasePair, grid: &CoordinateGrid) -> Self {
        let hbar = family.hbar();
        let ax = grid.axes[mu];
        let xs = ax.points();
        let n_x = ax.n;
        let wave: Vec<C64> = (0..pair.n_p)
            .flat_map(|i| {
                let p = pair.p(i);
                xs.iter().map(move |&x| C64::from_polar(1.0, -p * x / hbar)).collect::<Vec<_>>()
            })
            .collect();
        let reach = family.support(mu);
        let mut env = vec![C64::new(0.0, 0.0); pair.n_x * n_x];
        let mut span = Vec::with_capacity(pair.n_x);
        for j in 0..pair.n_x {
            let q = pair.x(j);
            let lo = (((q - reach - ax.min) / ax.step()).floor().max(0.0) as usize).min(n_x);
            let hi = (((q + reach - ax.min) / ax.step()).ceil().max(0.0) as usize + 1).min(n_x);
            for k in lo..hi {
                env[j * n_x + k] = family.envelope(mu, xs[k] - q).conj();
            }
            span.push((lo, hi));
        }
        let gauge = (0..pair.n_p)
            .flat_map(|i| (0..pair.n_x).map(move |j| (i, j)))
            .map(|(i, j)| C64::from_polar(1.0, family.axis_k(mu, pair.p(i), pair.x(j))))
            .collect();
        Self { n_p: pair.n_p, n_q: pair.n_x, n_x, wave, env, span, gauge, dx: ax.step() }
    }

    /// `⟨g_{π,q}|f⟩` along this axis for one line `f` of samples.
    fn analyze_line(&self, line: &[C64]) -> Vec<C64> {
        let cols: Vec<Vec<C64>> = (0..self.n_q)
            .into_par_iter()
            .map(|j| {
                let (lo, hi) = self.span[j];
                let h: Vec<C64> = (lo..hi).map(|k| self.env[j * self.n_x + k] * line[k]).collect();
                (0..self.n_p)
                    .map(|i| {
                        let row = &self.wave[i * self.n_x + lo..i * self.n_x + hi];
                        let mut acc = C64::new(0.0, 0.0);
                        for (w, v) in row.iter().zip(&h) {
                            acc += w * v;
                        }
                        acc * self.gauge[i * self.n_q + j] * self.dx
                    })
                    .collect()
            })
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); self.n_p * self.n_q];
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                out[i * self.n_q + j] = *v;
            }
        }
        out
    }

    /// `Σ_{i,j} g_{π_i,q_j}(x) c_{ij} w` along this axis.
    fn synthesize_line(&self, coeffs: &[C64], weight: f64) -> Vec<C64> {
        let shifted: Vec<C64> = coeffs.iter().zip(&self.gauge).map(|(c, g)| c * g.conj()).collect();
        (0..self.n_x)
            .into_par_iter()
            .map(|k| {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..self.n_q {
                    let (lo, hi) = self.span[j];
                    if k < lo || k >= hi {
                        continue;
                    }
                    let mut inner = C64::new(0.0, 0.0);
                    for i in 0..self.n_p {
                        inner += self.wave[i * self.n_x + k].conj() * shifted[i * self.n_q + j];
                    }
                    acc += self.env[j * self.n_x + k].conj() * inner;
                }
                acc * weight
            })
            .collect()
    }
}

/// Applies a line transform along one tensor axis: `(outer, n_in, inner) → (outer, n_out, inner)`.
pub(crate) fn along_axis(
    data: &[C64],
    outer: usize,
    n_in: usize,
    inner: usize,
    n_out: usize,
    f: impl Fn(&[C64]) -> Vec<C64> + Sync,
) -> Vec<C64> {
    let lines: Vec<Vec<C64>> = (0..outer * inner)
        .into_par_iter()
        .map(|l| {
            let (o, r) = (l / inner, l % inner);
            let line: Vec<C64> = (0..n_in).map(|k| data[(o * n_in + k) * inner + r]).collect();
            f(&line)
        })
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); outer * n_out * inner];
    for (l, line) in lines.iter().enumerate() {
        let (o, r) = (l / inner, l % inner);
        for (k, v) in line.iter().enumerate() {
            out[(o * n_out + k) * inner + r] = *v;
        }
    }
    out
}

/// Samples of `ψ̃(⟨z⟩) = ⟨⟨z⟩|ψ⟩` on a phase grid.
#[derive(Clone, Debug)]
pub struct PhaseWavefunction {
    pub grid: PhaseGrid,
    pub values: Vec<C64>,
    pub family: AnalyzingFamily,
}

impl PhaseWavefunction {
    pub fn gauge(&self) -> GaugeChoice {
        self.family.gauge()
    }

    /// `Σ |ψ̃|² · measure`.
    pub fn normalization(&self) -> f64 {
        let w: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        pairwise_sum(&w) * self.grid.measure()
    }

    pub fn husimi(&self) -> PhaseDistribution {
        PhaseDistribution {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
            kind: DistKind::HusimiLike,
            gauge: Some(self.gauge()),
        }
    }

    /// Same samples with the values replaced.
    /// Tensor shape `[n_p0, n_x0, n_p1, n_x1, …]` of the samples.
    pub fn shape(&self) -> Vec<usize> {
        self.grid.pairs.iter().flat_map(|p| [p.n_p, p.n_x]).collect()
    }

    pub fn with_values(&self, values: Vec<C64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::Dimension("sample count differs from the phase grid".into()));
        }
        Ok(Self { grid: self.grid.clone(), values, family: self.family.clone() })
    }
}

/// Phase-space transform without coverage or normalization checks.
pub(crate) fn analyze(psi: &GridWavefunction, family: &AnalyzingFamily, pgrid: &PhaseGrid) -> Result<PhaseWavefunction> {
    if psi.space != Space::Coordinate {
        return Err(Error::Invalid("phase transform expects coordinate-space samples".into()));
    }
    let d = psi.dim();
    if family.dim() != d || pgrid.dim() != d {
        return Err(Error::Dimension("state, family and phase grid dimensions differ".into()));
    }
    let mut data = psi.values.clone();
    // Current tensor shape: first `mu` axes already in phase form.
    let mut shape: Vec<usize> = psi.grid.axes.iter().map(|a| a.n).collect();
    for mu in 0..d {
        let tables = AxisTables::build(family, mu, &pgrid.pairs[mu], &psi.grid);
        let outer: usize = shape[..mu].iter().product();
        let inner: usize = shape[mu + 1..].iter().product();
        let n_out = tables.n_p * tables.n_q;
        data = along_axis(&data, outer, shape[mu], inner, n_out, |line| tables.analyze_line(line));
        shape[mu] = n_out;
    }
    Ok(PhaseWavefunction { grid: pgrid.clone(), values: data, family: family.clone() })
}

/// `Σ_z ψ̃(z) |z⟩ · measure` sampled on `grid`.
pub(crate) fn synthesize(pw: &PhaseWavefunction, grid: &CoordinateGrid) -> Result<GridWavefunction> {
    let d = pw.grid.dim();
    if grid.dim() != d {
        return Err(Error::Dimension("phase grid and coordinate grid dimensions differ".into()));
    }
    let h = pw.grid.h();
    let mut data = pw.values.clone();
    let mut shape: Vec<usize> = pw.grid.pairs.iter().map(PhasePair::len).collect();
    for mu in 0..d {
        let pair = &pw.grid.pairs[mu];
        let tables = AxisTables::build(&pw.family, mu, pair, grid);
        let weight = pair.dp() * pair.dx() / h;
        let outer: usize = shape[..mu].iter().product();
        let inner: usize = shape[mu + 1..].iter().product();
        data = along_axis(&data, outer, shape[mu], inner, tables.n_x, |line| tables.synthesize_line(line, weight));
        shape[mu] = tables.n_x;
    }
    GridWavefunction::new(grid.clone(), data, pw.family.hbar())
}

pub fn phase_wavefunction(psi: &GridWavefunction, family: &AnalyzingFamily, pgrid: &PhaseGrid) -> Result<PhaseWavefunction> {
    psi.require_normalized()?;
    check_phase_coverage(psi, family, pgrid, crate::grid::COVERAGE_SIGMAS)?;
    analyze(psi, family, pgrid)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    HusimiLike,
    Wigner,
}

/// Real phase-space density, normalized against the measure `Π dp dx / h`.
#[derive(Clone, Debug)]
pub struct PhaseDistribution {
    pub grid: PhaseGrid,
    pub values: Vec<f64>,
    pub kind: DistKind,
    pub gauge: Option<GaugeChoice>,
}

impl PhaseDistribution {
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.measure()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> Vec<(f64, f64)> {
        let k = (0..self.values.len()).max_by(|&a, &b| self.values[a].total_cmp(&self.values[b])).unwrap_or(0);
        self.grid.point(k)
    }

    /// Integral restricted to phase points satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(&[(f64, f64)]) -> bool) -> f64 {
        let w: Vec<f64> =
            self.values.iter().enumerate().map(|(k, v)| if pred(&self.grid.point(k)) { *v } else { 0.0 }).collect();
        pairwise_sum(&w) * self.grid.measure()
    }
}

/// Source of a Husimi-type distribution.
pub enum Source<'a> {
    Pure(&'a GridWavefunction),
    /// Weighted pure states `Σ p_I |ψ_I⟩⟨ψ_I|`.
    Ensemble(&'a [(f64, GridWavefunction)]),
    /// Density matrix realized on a coordinate grid through its basis.
    Density(&'a DensityMatrix, &'a CoordinateGrid),
}

pub fn husimi_distribution(source: Source<'_>, family: &AnalyzingFamily, pgrid: &PhaseGrid) -> Result<PhaseDistribution> {
    let ensemble: Vec<(f64, GridWavefunction)> = match source {
        Source::Pure(psi) => vec![(1.0, psi.clone())],
        Source::Ensemble(items) => {
            let total: f64 = items.iter().map(|(w, _)| w).sum();
            if items.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                return Err(Error::Invalid("ensemble weights must be probabilities summing to 1".into()));
            }
            items.to_vec()
        }
        Source::Density(rho, grid) => {
            if let Some(min) = rho.eigenvalues().first() {
                if *min < -crate::density::DENSITY_TOL {
                    return Err(Error::Invalid(format!("density matrix has negative eigenvalue {min:.3e}")));
                }
            }
            let states = number_states(&rho.basis, grid)?;
            rho.ensemble()
                .into_iter()
                .map(|(w, v)| {
                    let mut psi = states[0].scale(v[0]);
                    for (k, s) in states.iter().enumerate().skip(1) {
                        psi = psi.add_scaled(v[k], s)?;
                    }
                    Ok((w, psi))
                })
                .collect::<Result<_>>()?
        }
    };
    let mut values = vec![0.0; pgrid.len()];
    for (w, psi) in &ensemble {
        let pw = phase_wavefunction(psi, family, pgrid)?;
        for (acc, v) in values.iter_mut().zip(&pw.values) {
            *acc += w * v.norm_sqr();
        }
    }
    Ok(PhaseDistribution { grid: pgrid.clone(), values, kind: DistKind::HusimiLike, gauge: Some(family.gauge()) })
}

/// Wigner function of a one-axis state, stored as `h·W` so that it shares the
/// measure `dp dx / h` with the Husimi-type distribution.
pub fn wigner_distribution(psi: &GridWavefunction, pgrid: &PhaseGrid) -> Result<PhaseDistribution> {
    if psi.dim() != 1 || pgrid.dim() != 1 {
        return Err(Error::Unsupported("the Wigner baseline is implemented for D = 1 only".into()));
    }
    psi.require_normalized()?;
    let hbar = psi.hbar;
    let ax = psi.grid.axes[0];
    let n = ax.n;
    let dx = ax.step();
    let pair = pgrid.pairs[0];
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spectrum = psi.values.clone();
    fwd.process(&mut spectrum);
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * dx);
    let cols: Vec<Vec<C64>> = (0..pair.n_x)
        .into_par_iter()
        .map(|j| {
            let x = pair.x(j);
            let k0 = ((x - ax.min) / dx).round().clamp(0.0, (n - 1) as f64) as usize;
            let delta = x - ax.point(k0);
            // ψ(· + δ) by a spectral shift.
            let mut shifted: Vec<C64> = spectrum
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let kk = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
                    v * C64::from_polar(1.0 / n as f64, kk * dk * delta)
                })
                .collect();
            inv.process(&mut shifted);
            let m_max = k0.min(n - 1 - k0);
            let f: Vec<(f64, C64)> = (0..=m_max)
                .map(|m| (m as f64 * dx, shifted[k0 + m].conj() * shifted[k0 - m]))
                .collect();
            (0..pair.n_p)
                .map(|i| {
                    let p = pair.p(i);
                    // Σ over ±y, folded into a cosine-like sum.
                    let mut acc = f[0].1;
                    for (y, v) in &f[1..] {
                        let ph = C64::from_polar(1.0, 2.0 * p * y / hbar);
                        acc += v * ph + v.conj() * ph.conj();
                    }
                    // h·W = 2·∫ψ*(x+y)ψ(x−y)e^{2ipy/ℏ}dy.
                    acc * (2.0 * dx)
                })
                .collect()
        })
        .collect();
    let mut values = vec![0.0; pgrid.len()];
    let mut worst_im = 0.0f64;
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            values[i * pair.n_x + j] = v.re;
            worst_im = worst_im.max(v.im.abs());
        }
    }
    if worst_im > 1e-10 {
        return Err(Error::Invalid(format!("Wigner samples have imaginary part {worst_im:.3e}")));
    }
    Ok(PhaseDistribution { grid: pgrid.clone(), values, kind: DistKind::Wigner, gauge: None })
}

/// Outcome of a closure refinement ladder.
#[derive(Clone, Debug)]
pub struct RefinementReport {
    /// `(points per direction, l2 error)` for each rung.
    pub errors: Vec<(usize, f64)>,
    /// Steps whose coarse error lay above [`CLOSURE_FLOOR`].
    pub resolved_steps: usize,
    /// Every resolved step decreased strictly and every step from the floor stayed at the floor.
    pub monotone: bool,
}

/// Closure errors on grids with the range of `pgrid` and `n0·2^k` points per direction.
pub fn closure_refinement(
    psi: &GridWavefunction,
    family: &AnalyzingFamily,
    pgrid: &PhaseGrid,
    n0: usize,
    rungs: usize,
) -> Result<RefinementReport> {
    let mut errors = Vec::with_capacity(rungs);
    for k in 0..rungs {
        let n = n0 << k;
        let mut g = pgrid.clone();
        for p in &mut g.pairs {
            p.n_p = n;
            p.n_x = n;
        }
        errors.push((n, closure_reconstruct(psi, family, &g)?.l2_error));
    }
    let mut resolved_steps = 0;
    let mut monotone = true;
    for w in errors.windows(2) {
        let (coarse, fine) = (w[0].1, w[1].1);
        if coarse > CLOSURE_FLOOR {
            resolved_steps += 1;
            monotone &= fine < coarse;
        } else {
            monotone &= fine <= CLOSURE_FLOOR;
        }
    }
    Ok(RefinementReport { errors, resolved_steps, monotone })
}

#[derive(Clone, Debug)]
pub struct ClosureResult {
    pub reconstruction: GridWavefunction,
    pub l2_error: f64,
}

pub fn closure_reconstruct(psi: &GridWavefunction, family: &AnalyzingFamily, pgrid: &PhaseGrid) -> Result<ClosureResult> {
    psi.require_normalized()?;
    check_phase_coverage(psi, family, pgrid, CLOSURE_SIGMAS)?;
    let pw = analyze(psi, family, pgrid)?;
    let reconstruction = synthesize(&pw, &psi.grid)?;
    let l2_error = reconstruction.l2_distance(psi)?;
    Ok(ClosureResult { reconstruction, l2_error })
}

/// `∫ |ψ̃|² Π d⟨p⟩ d⟨x⟩` without the `1/h` factors.
pub fn microstate_hypervolume(psi: &GridWavefunction, family: &AnalyzingFamily, pgrid: &PhaseGrid) -> Result<f64> {
    let pw = phase_wavefunction(psi, family, pgrid)?;
    let w: Vec<f64> = pw.values.iter().map(|v| v.norm_sqr()).collect();
    Ok(pairwise_sum(&w) * pgrid.cell_volume())
}

/// Coordinate samples of the family member at one phase point.
pub fn family_ket(family: &AnalyzingFamily, point: &[(f64, f64)], grid: &CoordinateGrid) -> Result<GridWavefunction> {
    let spec = family.member(point.iter().map(|pq| pq.0).collect(), point.iter().map(|pq| pq.1).collect())?;
    GridWavefunction::from_fn(grid.clone(), family.hbar(), |q| spec.amplitude(q))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_product, Axis};
    use crate::joint::{analytic_overlap, coordinate_wavefunction};

    fn coherent(p: f64, x: f64) -> JointStateSpec {
        JointStateSpec::one_axis(p, x, 0.5, 0.0, 1.0).unwrap()
    }

    #[test]
    fn phase_grid_indexing() {
        let pg = PhaseGrid::new(vec![PhasePair::new(-1.0, 1.0, 32, -2.0, 2.0, 64).unwrap()], 1.0).unwrap();
        assert_eq!(pg.len(), 32 * 64);
        let pt = pg.point(64 + 3);
        assert!((pt[0].0 - pg.pairs[0].p(1)).abs() < 1e-15);
        assert!((pt[0].1 - pg.pairs[0].x(3)).abs() < 1e-15);
        assert!(PhasePair::new(-1.0, 1.0, 16, -1.0, 1.0, 32).is_err());
    }

    #[test]
    fn coherent_phase_wavefunction_matches_overlap() {
        let grid = CoordinateGrid::default_for(1).unwrap();
        let family = AnalyzingFamily::ground(1, 1.0, GaugeChoice::Zero).unwrap();
        let spec = coherent(0.5, -0.7);
        let psi = coordinate_wavefunction(&spec, &grid).unwrap();
        let pg = PhaseGrid::default_for(&psi, &family).unwrap();
        let pw = phase_wavefunction(&psi, &family, &pg).unwrap();
        assert!((pw.normalization() - 1.0).abs() < 1e-3);
        let mut worst = 0.0f64;
        for k in (0..pg.len()).step_by(37) {
            let pt = pg.point(k);
            let member = family.member(vec![pt[0].0], vec![pt[0].1]).unwrap();
            let o = analytic_overlap(&member, &spec).unwrap().value;
            worst = worst.max((pw.values[k] - o).norm());
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn closure_of_coherent_state() {
        let grid = CoordinateGrid::default_for(1).unwrap();
        let family = AnalyzingFamily::ground(1, 1.0, GaugeChoice::Half).unwrap();
        let psi = coordinate_wavefunction(&coherent(0.3, 0.4), &grid).unwrap();
        let pg = PhaseGrid::default_for(&psi, &family).unwrap();
        let r = closure_reconstruct(&psi, &family, &pg).unwrap();
        assert!(r.l2_error < 1e-3, "{}", r.l2_error);
    }

    #[test]
    fn hypervolume_is_planck_constant() {
        let grid = CoordinateGrid::default_for(1).unwrap();
        let family = AnalyzingFamily::ground(1, 1.0, GaugeChoice::Zero).unwrap();
        let psi = coordinate_wavefunction(&coherent(0.0, 1.0), &grid).unwrap();
        let pg = PhaseGrid::covering(&psi, &family, 8.0, 128).unwrap();
        let v = microstate_hypervolume(&psi, &family, &pg).unwrap();
        assert!((v / (2.0 * std::f64::consts::PI) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn two_axis_transform_matches_direct_overlap() {
        let ax = Axis::new(-8.0, 8.0, 128).unwrap();
        let grid = CoordinateGrid::new(vec![ax, ax]).unwrap();
        let family = AnalyzingFamily::ground(2, 1.0, GaugeChoice::Full).unwrap();
        let spec = JointStateSpec::diagonal(vec![0.3, -0.2], vec![0.5, 0.1], &[0.4, 0.6], 1.0).unwrap();
        let psi = coordinate_wavefunction(&spec, &grid).unwrap();
        let pg = PhaseGrid::covering(&psi, &family, 6.0, 32).unwrap();
        let pw = phase_wavefunction(&psi, &family, &pg).unwrap();
        for k in [0usize, 5000, 123_456, pg.len() - 1] {
            let ket = family_ket(&family, &pg.point(k), &grid).unwrap();
            let direct = inner_product(&ket, &psi).unwrap();
            assert!((direct - pw.values[k]).norm() < 1e-10);
        }
        assert!((pw.normalization() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn wigner_of_ground_state_is_positive() {
        let grid = CoordinateGrid::default_for(1).unwrap();
        let family = AnalyzingFamily::ground(1, 1.0, GaugeChoice::Zero).unwrap();
        let psi = coordinate_wavefunction(&coherent(0.0, 0.0), &grid).unwrap();
        let pg = PhaseGrid::covering(&psi, &family, 6.0, 64).unwrap();
        let w = wigner_distribution(&psi, &pg).unwrap();
        assert!(w.min() >= -1e-10);
        assert!((w.integral() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn non_diagonal_family_is_unsupported() {
        let spec = JointStateSpec::from_coordinate_block(
            vec![0.0; 2],
            vec![0.0; 2],
            nalgebra::DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.5]),
            nalgebra::DMatrix::zeros(2, 2),
            crate::metric::Signature::spatial(2),
            GaugeChoice::Zero,
            1.0,
        )
        .unwrap();
        assert!(matches!(AnalyzingFamily::new(&spec), Err(Error::Unsupported(_))));
    }
}

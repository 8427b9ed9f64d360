//! Joint momentum–coordinate Gaussian states and their analytic properties.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{apply_momentum, apply_position, CoordinateGrid, GridWavefunction, Space, COVERAGE_SIGMAS};
use crate::metric::{
    build_shape, check_saturation, saturating_p, Metric, ShapeParams, Signature, StatMoments,
    ANALYTIC_SATURATION_TOL,
};
use crate::numerics::{small_eigenvalues, RMat, C64, I};

/// Choice of the free real phase `K` of a joint state.
///
/// With `π` the canonical momentum means and `q` the coordinate means,
/// `K_full = −⟨p_μ⟩⟨x^μ⟩/ℏ = Σ π_μ q_μ / ℏ` and `K_half = K_full / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GaugeChoice {
    #[default]
    Zero,
    Full,
    Half,
    Const(f64),
}

impl GaugeChoice {
    /// Coefficient `c` in `K = c·Σπq/ℏ` for the mean-dependent gauges.
    pub fn coefficient(&self) -> f64 {
        match self {
            GaugeChoice::Full => 1.0,
            GaugeChoice::Half => 0.5,
            GaugeChoice::Zero | GaugeChoice::Const(_) => 0.0,
        }
    }

    pub fn constant(&self) -> f64 {
        match self {
            GaugeChoice::Const(c) => *c,
            _ => 0.0,
        }
    }

    pub fn k_value(&self, mean_p: &[f64], mean_x: &[f64], hbar: f64) -> f64 {
        let dot: f64 = mean_p.iter().zip(mean_x).map(|(p, x)| p * x).sum();
        self.coefficient() * dot / hbar + self.constant()
    }

    /// The three mean-dependent gauges with printed closed forms.
    pub fn printed() -> [GaugeChoice; 3] {
        [GaugeChoice::Zero, GaugeChoice::Full, GaugeChoice::Half]
    }
}

impl fmt::Display for GaugeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaugeChoice::Zero => write!(f, "zero"),
            GaugeChoice::Full => write!(f, "full"),
            GaugeChoice::Half => write!(f, "half"),
            GaugeChoice::Const(c) => write!(f, "const:{c}"),
        }
    }
}

impl FromStr for GaugeChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(GaugeChoice::Zero),
            "full" => Ok(GaugeChoice::Full),
            "half" => Ok(GaugeChoice::Half),
            _ => match s.strip_prefix("const:").map(str::parse::<f64>) {
                Some(Ok(c)) if c.is_finite() => Ok(GaugeChoice::Const(c)),
                _ => Err(Error::Invalid(format!("unknown gauge '{s}'"))),
            },
        }
    }
}

/// Full parameterization of a joint state.
#[derive(Clone, Debug)]
pub struct JointStateSpec {
    pub moments: StatMoments,
    pub shape: ShapeParams,
    pub gauge: GaugeChoice,
    pub hbar: f64,
    pub signature: Signature,
}

impl PartialEq for JointStateSpec {
    fn eq(&self, other: &Self) -> bool {
        self.moments == other.moments
            && self.gauge == other.gauge
            && self.hbar == other.hbar
            && self.signature == other.signature
    }
}

impl JointStateSpec {
    pub fn new(moments: StatMoments, signature: Signature, gauge: GaugeChoice, hbar: f64) -> Result<Self> {
        moments.validate()?;
        if signature.dim() != moments.dim() {
            return Err(Error::Dimension(format!(
                "signature has {} axes, moments have {}",
                signature.dim(),
                moments.dim()
            )));
        }
        let metric = signature.metric();
        let sat = check_saturation(&moments, &metric, hbar)?;
        if sat.relative > ANALYTIC_SATURATION_TOL {
            return Err(Error::NotSaturated { residual: sat.relative });
        }
        let shape = build_shape(&moments, &metric, hbar)?;
        let corr = &moments.rho * &shape.x_inv;
        let asym = (&corr - corr.transpose()).amax();
        if asym > 1e-9 * (1.0 + corr.amax()) {
            return Err(Error::Invalid(
                "correlation block must make rho·X⁻¹ symmetric for a Gaussian joint state".into(),
            ));
        }
        Ok(Self { moments, shape, gauge, hbar, signature })
    }

    /// Builds the state from means and the coordinate/correlation blocks,
    /// taking the momentum block from the saturation identity.
    pub fn from_coordinate_block(
        mean_p: Vec<f64>,
        mean_x: Vec<f64>,
        x: RMat,
        rho: RMat,
        signature: Signature,
        gauge: GaugeChoice,
        hbar: f64,
    ) -> Result<Self> {
        let p = saturating_p(&x, &rho, &signature.metric(), hbar)?;
        let p = (&p + p.transpose()) * 0.5;
        Self::new(StatMoments { mean_p, mean_x, p, x, rho }, signature, gauge, hbar)
    }

    /// One-axis state with coordinate variance `x_var` and correlation `rho`.
    pub fn one_axis(mean_p: f64, mean_x: f64, x_var: f64, rho: f64, hbar: f64) -> Result<Self> {
        Self::from_coordinate_block(
            vec![mean_p],
            vec![mean_x],
            RMat::from_element(1, 1, x_var),
            RMat::from_element(1, 1, rho),
            Signature::spatial(1),
            GaugeChoice::Zero,
            hbar,
        )
    }

    /// Uncorrelated state with diagonal coordinate covariance.
    pub fn diagonal(mean_p: Vec<f64>, mean_x: Vec<f64>, x_var: &[f64], hbar: f64) -> Result<Self> {
        let d = x_var.len();
        Self::from_coordinate_block(
            mean_p,
            mean_x,
            RMat::from_fn(d, d, |i, j| if i == j { x_var[i] } else { 0.0 }),
            RMat::zeros(d, d),
            Signature::spatial(d),
            GaugeChoice::Zero,
            hbar,
        )
    }

    /// Ground form with `X = (ℏ/2)·I` centered at the origin.
    pub fn ground(dim: usize, hbar: f64) -> Result<Self> {
        Self::diagonal(vec![0.0; dim], vec![0.0; dim], &vec![hbar / 2.0; dim], hbar)
    }

    pub fn dim(&self) -> usize {
        self.moments.dim()
    }

    pub fn metric(&self) -> Metric {
        self.signature.metric()
    }

    pub fn with_gauge(&self, gauge: GaugeChoice) -> Self {
        Self { gauge, ..self.clone() }
    }

    /// Same covariance and gauge, displaced means.
    pub fn with_means(&self, mean_p: Vec<f64>, mean_x: Vec<f64>) -> Result<Self> {
        if mean_p.len() != self.dim() || mean_x.len() != self.dim() {
            return Err(Error::Dimension("mean vectors do not match the state dimension".into()));
        }
        let mut out = self.clone();
        out.moments.mean_p = mean_p;
        out.moments.mean_x = mean_x;
        Ok(out)
    }

    /// Eigenvalues `⟨z_μ⟩ = ⟨π_μ⟩ − (2i/ℏ) Σ_ν B_{μν}⟨q_ν⟩`.
    pub fn mean_z(&self) -> Vec<C64> {
        let d = self.dim();
        (0..d)
            .map(|mu| {
                let mut z = C64::new(self.moments.mean_p[mu], 0.0);
                for nu in 0..d {
                    z -= I * 2.0 / self.hbar * self.shape.b[(mu, nu)] * self.moments.mean_x[nu];
                }
                z
            })
            .collect()
    }

    pub fn k_value(&self) -> f64 {
        self.gauge.k_value(&self.moments.mean_p, &self.moments.mean_x, self.hbar)
    }

    pub fn normalization(&self) -> f64 {
        let d = self.dim() as f64;
        ((2.0 * std::f64::consts::PI).powf(d) * self.moments.x.determinant()).powf(-0.25)
    }

    /// Coordinate-representation amplitude at the point `q`.
    pub fn amplitude(&self, q: &[f64]) -> C64 {
        let d = self.dim();
        let hbar = self.hbar;
        let mut expo = C64::new(0.0, -self.k_value());
        for mu in 0..d {
            let um = q[mu] - self.moments.mean_x[mu];
            expo += I * self.moments.mean_p[mu] * q[mu] / hbar;
            for (nu, &qn) in q.iter().enumerate().take(d) {
                let un = qn - self.moments.mean_x[nu];
                expo -= self.shape.b[(mu, nu)] * um * un / (hbar * hbar);
            }
        }
        expo.exp() * self.normalization()
    }

    /// Checks that `grid` resolves this state to the required number of sigmas.
    pub fn check_coverage(&self, grid: &CoordinateGrid, sigmas: f64) -> Result<()> {
        if grid.dim() != self.dim() {
            return Err(Error::Dimension(format!("grid has {} axes, state has {}", grid.dim(), self.dim())));
        }
        for (mu, ax) in grid.axes.iter().enumerate() {
            let sx = self.moments.x[(mu, mu)].sqrt();
            let q0 = self.moments.mean_x[mu];
            if q0 - sigmas * sx < ax.min || q0 + sigmas * sx > ax.max {
                return Err(Error::Coverage(format!(
                    "axis {mu}: [{:.6}, {:.6}] does not cover {sigmas}σ around {q0:.6}",
                    ax.min, ax.max
                )));
            }
            let sp = self.moments.p[(mu, mu)].sqrt();
            let p_nyq = ax.dual(self.hbar).max;
            let need = self.moments.mean_p[mu].abs() + sigmas * sp;
            if need > p_nyq {
                return Err(Error::Coverage(format!(
                    "axis {mu}: Nyquist momentum {p_nyq:.6} below required {need:.6}"
                )));
            }
        }
        Ok(())
    }
}

pub fn coordinate_wavefunction(spec: &JointStateSpec, grid: &CoordinateGrid) -> Result<GridWavefunction> {
    spec.check_coverage(grid, COVERAGE_SIGMAS)?;
    let psi = GridWavefunction::from_fn(grid.clone(), spec.hbar, |q| spec.amplitude(q))?;
    let n = psi.norm_sq();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::Coverage(format!("sampled norm² {n:.12} deviates from 1; refine the grid")));
    }
    Ok(psi)
}

/// Momentum-space wavefunction of `spec` on the grid dual to `grid`.
///
/// `φ(π) = N (ℏ/2)^{D/2} det(B)^{−1/2} e^{−iK} e^{i(⟨π⟩−π)·⟨q⟩/ℏ}
///        exp(−(π−⟨π⟩)ᵀ A (π−⟨π⟩)/ℏ²)` with `A = (ℏ²/4) B⁻¹`.
pub fn momentum_wavefunction(spec: &JointStateSpec, grid: &CoordinateGrid) -> Result<GridWavefunction> {
    spec.check_coverage(grid, COVERAGE_SIGMAS)?;
    let hbar = spec.hbar;
    let d = spec.dim();
    let a = momentum_shape(spec)?;
    let eig = small_eigenvalues(&spec.shape.b)
        .ok_or_else(|| Error::Unsupported("momentum wavefunction is evaluated for D ≤ 2".into()))?;
    let sqrt_det: C64 = eig.iter().map(|l| l.sqrt()).product();
    let pref = C64::new(spec.normalization() * (hbar / 2.0).powf(d as f64 / 2.0), 0.0) / sqrt_det;
    let k = spec.k_value();
    let m = &spec.moments;
    let dual = grid.dual(hbar);
    let mut phi = GridWavefunction::from_fn(dual, hbar, |p| {
        let mut expo = C64::new(0.0, -k);
        for mu in 0..d {
            let dm = p[mu] - m.mean_p[mu];
            expo -= I * dm * m.mean_x[mu] / hbar;
            for nu in 0..d {
                expo -= a[(mu, nu)] * dm * (p[nu] - m.mean_p[nu]) / (hbar * hbar);
            }
        }
        pref * expo.exp()
    })?;
    phi.space = Space::Momentum(Box::new(grid.clone()));
    Ok(phi)
}

/// Momentum-side shape matrix `A = (ℏ²/4) B⁻¹`.
pub fn momentum_shape(spec: &JointStateSpec) -> Result<crate::numerics::CMat> {
    let inv = spec.shape.b.clone().try_inverse().ok_or(Error::SingularCovariance)?;
    Ok(inv * C64::new(spec.hbar * spec.hbar / 4.0, 0.0))
}

/// `max_μ ‖(z_μ − ⟨z_μ⟩)ψ‖/‖ψ‖` with `z_μ = π_μ − (2i/ℏ) Σ_ν B_{μν} q_ν`.
pub fn z_residual(spec: &JointStateSpec, psi: &GridWavefunction) -> Result<f64> {
    if psi.dim() != spec.dim() {
        return Err(Error::Dimension("state and spec dimensions differ".into()));
    }
    let d = spec.dim();
    let zbar = spec.mean_z();
    let xs: Vec<GridWavefunction> = (0..d).map(|nu| apply_position(psi, nu)).collect::<Result<_>>()?;
    let norm = psi.norm();
    let mut worst = 0.0f64;
    for (mu, &z) in zbar.iter().enumerate().take(d) {
        let mut r = apply_momentum(psi, mu)?.add_scaled(-z, psi)?;
        for (nu, x) in xs.iter().enumerate() {
            r = r.add_scaled(-I * 2.0 / spec.hbar * spec.shape.b[(mu, nu)], x)?;
        }
        worst = worst.max(r.norm() / norm);
    }
    Ok(worst)
}

pub fn z_eigencheck(spec: &JointStateSpec, grid: &CoordinateGrid) -> Result<f64> {
    z_residual(spec, &coordinate_wavefunction(spec, grid)?)
}

/// An overlap value together with the gauge it was evaluated in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugedOverlap {
    pub value: C64,
    pub gauge: GaugeChoice,
}

/// Closed-form overlap `⟨a|b⟩` for uncorrelated states sharing a diagonal covariance.
pub fn analytic_overlap(a: &JointStateSpec, b: &JointStateSpec) -> Result<GaugedOverlap> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::Dimension("overlap of states with different dimensions".into()));
    }
    if a.gauge != b.gauge || a.hbar != b.hbar {
        return Err(Error::Invalid("overlap requires a common gauge and hbar".into()));
    }
    let (ma, mb) = (&a.moments, &b.moments);
    let scale = ma.x.amax().max(ma.p.amax());
    if (&ma.x - &mb.x).amax() > 1e-12 * scale || (&ma.p - &mb.p).amax() > 1e-12 * scale {
        return Err(Error::Invalid("overlap requires a common covariance".into()));
    }
    if ma.rho.amax() > 0.0 || mb.rho.amax() > 0.0 {
        return Err(Error::Invalid("closed-form overlap requires zero momentum–coordinate correlation".into()));
    }
    for i in 0..d {
        for j in 0..d {
            if i != j && (ma.x[(i, j)] != 0.0 || ma.p[(i, j)] != 0.0) {
                return Err(Error::Invalid("closed-form overlap requires a diagonal covariance".into()));
            }
        }
    }
    let hbar = a.hbar;
    let mut expo = C64::new(0.0, 0.0);
    for mu in 0..d {
        let dp = ma.mean_p[mu] - mb.mean_p[mu];
        let dx = ma.mean_x[mu] - mb.mean_x[mu];
        let sum_x = ma.mean_x[mu] + mb.mean_x[mu];
        expo += C64::new(-dp * dp / (8.0 * ma.p[(mu, mu)]) - dx * dx / (8.0 * ma.x[(mu, mu)]), 0.0);
        expo -= I * dp * sum_x / (2.0 * hbar);
    }
    Ok(GaugedOverlap { value: expo.exp(), gauge: a.gauge })
}

//! Self-contained invariant suites producing machine-readable reports.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::density::{count_microstates, evolve_lvn, number_omega_hamiltonian, DensityMatrix};
use crate::error::{Error, Result};
use crate::fock::{build_ladder, operator_matrix, orthonormality_check, quadrature_matrices, robertson_check};
use crate::fock::{number_state, FockVector, GridLadder, TruncatedBasis};
use crate::grid::{moments, Axis, CoordinateGrid, GridWavefunction};
use crate::joint::{coordinate_wavefunction, GaugeChoice, JointStateSpec};
use crate::metric::check_saturation;
use crate::numerics::{max_abs_c, C64};
use crate::phase::{
    closure_reconstruct, closure_refinement, husimi_distribution, microstate_hypervolume, phase_wavefunction,
    AnalyzingFamily, PhaseGrid, PhasePair, Source,
};
use crate::psop::ccr_residual;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Uncertainty,
    Closure,
    Microstate,
    Fock,
    Gauge,
    Density,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Uncertainty, Suite::Closure, Suite::Microstate, Suite::Fock, Suite::Gauge, Suite::Density];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Uncertainty => "uncertainty",
            Suite::Closure => "closure",
            Suite::Microstate => "microstate",
            Suite::Fock => "fock",
            Suite::Gauge => "gauge",
            Suite::Density => "density",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown suite '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value ≤ bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value <= bound }
    }

    /// Passes when `value ≥ bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value >= bound }
    }

    /// Passes when `|value − target| ≤ rel·|target|`; `bound` records the target.
    pub fn near(name: impl Into<String>, value: f64, target: f64, rel: f64) -> Self {
        Self { name: name.into(), value, bound: target, pass: (value - target).abs() <= rel * target.abs() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub suite: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Reads a report written by [`run`] or [`run_all`].
pub fn parse_report(data: &[u8]) -> Result<Report> {
    let r: Report = serde_json::from_slice(data)?;
    if r.schema != crate::io::SCHEMA {
        return Err(Error::Parse(format!("report schema {} is not {}", r.schema, crate::io::SCHEMA)));
    }
    Ok(r)
}

/// Named tolerance overrides.
#[derive(Clone, Debug, Default)]
pub struct Tolerances(pub BTreeMap<String, f64>);

impl Tolerances {
    pub fn get(&self, name: &str, default: f64) -> f64 {
        self.0.get(name).copied().unwrap_or(default)
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub hbar: f64,
    pub gauge: GaugeChoice,
    pub tol: Tolerances,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { hbar: 1.0, gauge: GaugeChoice::Zero, tol: Tolerances::default() }
    }
}

/// One-axis coordinate grid of 1024 points spanning ±12 ground widths·√2.
pub fn scaled_grid(hbar: f64) -> Result<CoordinateGrid> {
    let w = 12.0 * hbar.sqrt();
    CoordinateGrid::new(vec![Axis::new(-w, w, 1024)?])
}

fn ground_basis(levels: usize, hbar: f64) -> Result<TruncatedBasis> {
    TruncatedBasis::new(vec![levels], JointStateSpec::ground(1, hbar)?)
}

/// Normalized `Σ_{n<k} |n⟩ / √k` on the grid.
pub fn number_superposition(levels: usize, hbar: f64, grid: &CoordinateGrid) -> Result<GridWavefunction> {
    let basis = ground_basis(levels, hbar)?;
    let c = nalgebra::DVector::from_element(levels, C64::new(1.0 / (levels as f64).sqrt(), 0.0));
    FockVector::new(basis, c)?.to_grid(grid)
}

pub fn run(suite: Suite, cfg: &VerifyConfig) -> Result<Report> {
    let checks = match suite {
        Suite::Uncertainty => uncertainty(cfg)?,
        Suite::Closure => closure(cfg)?,
        Suite::Microstate => microstate(cfg)?,
        Suite::Fock => fock(cfg)?,
        Suite::Gauge => gauge(cfg)?,
        Suite::Density => density(cfg)?,
    };
    Ok(Report { schema: crate::io::SCHEMA, suite: suite.name().into(), checks })
}

/// Every suite, with check names prefixed by the suite name.
pub fn run_all(cfg: &VerifyConfig) -> Result<Report> {
    let mut checks = Vec::new();
    for s in Suite::ALL {
        for mut c in run(s, cfg)?.checks {
            c.name = format!("{}.{}", s.name(), c.name);
            checks.push(c);
        }
    }
    Ok(Report { schema: crate::io::SCHEMA, suite: "all".into(), checks })
}

fn uncertainty(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let hbar = cfg.hbar;
    let tol = cfg.tol.get("saturation", crate::metric::GRID_SATURATION_TOL);
    let grid = scaled_grid(hbar)?;
    let mut out = Vec::new();
    let states = [(0.0, 0.0, 0.5, 0.0), (0.3, -0.2, 0.8, 0.3), (-0.4, 0.5, 0.2, -0.1)];
    for (k, (p, x, xv, r)) in states.into_iter().enumerate() {
        let spec = JointStateSpec::one_axis(p * hbar.sqrt(), x * hbar.sqrt(), xv * hbar, r * hbar, hbar)?;
        let m = moments(&coordinate_wavefunction(&spec, &grid)?)?;
        let res = check_saturation(&m, &spec.metric(), hbar)?;
        out.push(Check::at_most(format!("saturation_{k}"), res.relative, tol));
    }
    let basis = ground_basis(3, hbar)?;
    for n in 1..3 {
        let m = moments(&number_state(&[n], &basis, &grid)?)?;
        let product = (m.p[(0, 0)] * m.x[(0, 0)]).sqrt();
        out.push(Check::at_least(format!("kennard_n{n}"), product, hbar / 2.0 - 1e-8));
    }
    let wide = ground_basis(8, hbar)?;
    let (xs, ps) = quadrature_matrices(&wide)?;
    let c = nalgebra::DVector::from_fn(8, |k, _| C64::new(1.0 / (k as f64 + 1.0), 0.3 * k as f64));
    let state = FockVector::new(wide.clone(), c)?.normalized()?;
    // Probe the interior of the truncated space only.
    let inner = TruncatedBasis::new(vec![6], wide.reference.clone())?;
    let cut = |m: &crate::numerics::CMat| m.view((0, 0), (6, 6)).into_owned();
    let probe = FockVector::new(inner, state.coeffs.rows(0, 6).into_owned())?.normalized()?;
    let rep = robertson_check(&cut(&xs[0]), &cut(&ps[0]), &probe)?;
    out.push(Check::at_least("robertson_matrix", rep.lhs, rep.rhs - 1e-8));
    Ok(out)
}

fn closure(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let hbar = cfg.hbar;
    let tol = cfg.tol.get("closure", 1e-3);
    let grid = scaled_grid(hbar)?;
    let family = AnalyzingFamily::ground(1, hbar, cfg.gauge)?;
    let coherent = coordinate_wavefunction(&JointStateSpec::one_axis(0.5 * hbar.sqrt(), -0.3 * hbar.sqrt(), hbar / 2.0, 0.0, hbar)?, &grid)?;
    let superposition = number_superposition(4, hbar, &grid)?;
    let mut out = Vec::new();
    for (name, psi) in [("coherent", &coherent), ("superposition_n3", &superposition)] {
        let pg = PhaseGrid::default_for(psi, &family)?;
        out.push(Check::at_most(format!("l2_{name}"), closure_reconstruct(psi, &family, &pg)?.l2_error, tol));
        let rep = closure_refinement(psi, &family, &pg, 32, 3)?;
        let last = rep.errors.last().map(|e| e.1).unwrap_or(f64::NAN);
        out.push(Check {
            name: format!("refinement_{name}"),
            value: last,
            bound: rep.errors[0].1,
            pass: rep.monotone && rep.resolved_steps >= 1,
        });
    }
    Ok(out)
}

fn microstate(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let hbar = cfg.hbar;
    let h = 2.0 * PI * hbar;
    let rel = cfg.tol.get("hypervolume", 1e-3);
    let grid = scaled_grid(hbar)?;
    let family = AnalyzingFamily::ground(1, hbar, cfg.gauge)?;
    let spec = JointStateSpec::one_axis(0.2 * hbar.sqrt(), 0.1 * hbar.sqrt(), 0.35 * hbar, 0.1 * hbar, hbar)?;
    let psi = coordinate_wavefunction(&spec, &grid)?;
    let pg = PhaseGrid::default_for(&psi, &family)?;
    let v = microstate_hypervolume(&psi, &family, &pg)?;
    let count = count_microstates(v, 1, hbar)?;
    let analytic = count_microstates(7.0 * h, 1, hbar)?;
    Ok(vec![
        Check::near("integral_h", v, h, rel),
        Check::near("omega_single_state", count.omega, 1.0, rel),
        Check::at_most("omega_analytic_error", (analytic.omega - 7.0).abs(), 1e-12),
        Check::at_most("entropy_analytic_error", (analytic.entropy - 7f64.ln()).abs(), 1e-12),
    ])
}

fn fock(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let hbar = cfg.hbar;
    let tol = cfg.tol.get("gram", 1e-6);
    let grid = scaled_grid(hbar)?;
    let basis = ground_basis(5, hbar)?;
    let lad = build_ladder(&basis);
    let mut sub = 0.0f64;
    let mut off = 0.0f64;
    for i in 0..5 {
        for j in 0..5 {
            let want = if j == i + 1 { (j as f64).sqrt() } else { 0.0 };
            let err = (lad.lower[0][(i, j)] - want).norm();
            if j == i + 1 {
                sub = sub.max(err);
            } else {
                off = off.max(err);
            }
        }
    }
    let number_err = (0..5).map(|k| (lad.number[(k, k)] - k as f64).norm()).fold(0.0, f64::max);
    let eig = lad.number.clone().symmetric_eigen();
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let eig_err = ev.iter().enumerate().map(|(k, v)| (v - k as f64).abs()).fold(0.0, f64::max);
    let gram = orthonormality_check(&basis, &grid)?;
    let grid_number = operator_matrix(&GridLadder::new(&basis.reference)?, &basis, &grid)?;
    let grid_number_err = max_abs_c(&(grid_number - &lad.number));
    Ok(vec![
        Check::at_most("sqrt_n_entries", sub, 0.0),
        Check::at_most("lower_other_entries", off, 0.0),
        Check::at_most("number_diagonal", number_err, 0.0),
        Check::at_most("number_eigenvalues", eig_err, 1e-12),
        Check::at_most("gram_identity", gram, tol),
        Check::at_most("grid_number_matrix", grid_number_err, tol),
    ])
}

fn gauge(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let hbar = cfg.hbar;
    let tol = cfg.tol.get("ccr", 1e-8);
    let agree = cfg.tol.get("gauge_agreement", 1e-10);
    let grid = scaled_grid(hbar)?;
    let family = AnalyzingFamily::ground(1, hbar, GaugeChoice::Zero)?;
    let psi = number_superposition(2, hbar, &grid)?;
    let pw = phase_wavefunction(&psi, &family, &PhaseGrid::default_for(&psi, &family)?)?;
    let mut out = Vec::new();
    let mut res = Vec::new();
    for g in GaugeChoice::printed() {
        let r = ccr_residual(g, &pw, 0, 0)?;
        out.push(Check::at_most(format!("ccr_{g}"), r, tol));
        res.push((g, r));
    }
    for i in 0..res.len() {
        for j in i + 1..res.len() {
            out.push(Check::at_most(format!("agreement_{}_{}", res[i].0, res[j].0), (res[i].1 - res[j].1).abs(), agree));
        }
    }
    Ok(out)
}

/// Coherent density matrix centered at `(p, x)` in a ground-referenced basis.
pub fn coherent_density(p: f64, x: f64, levels: usize, hbar: f64, grid: &CoordinateGrid) -> Result<DensityMatrix> {
    let basis = ground_basis(levels, hbar)?;
    let psi = coordinate_wavefunction(&JointStateSpec::one_axis(p, x, hbar / 2.0, 0.0, hbar)?, grid)?;
    DensityMatrix::from_pure(&FockVector::project(&psi, &basis)?.normalized()?)
}

/// Phase-space point reached after time `t` by `(p, x)` under `H = ℏω(𝔑 + ½)`.
pub fn rotated_point(p: f64, x: f64, omega_t: f64) -> (f64, f64) {
    let (s, c) = omega_t.sin_cos();
    (p * c - x * s, x * c + p * s)
}

fn density(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let hbar = cfg.hbar;
    let tol = cfg.tol.get("unitarity", 1e-10);
    let grid = scaled_grid(hbar)?;
    let (p0, x0) = (0.0, 2.0 * hbar.sqrt());
    let rho = coherent_density(p0, x0, 20, hbar, &grid)?;
    let h = number_omega_hamiltonian(&rho.basis, 1.0);
    let mid = evolve_lvn(&rho, &h, 1.3)?;
    let spectrum = rho
        .eigenvalues()
        .iter()
        .zip(mid.eigenvalues())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let period = evolve_lvn(&rho, &h, 2.0 * PI)?;
    let quarter = evolve_lvn(&rho, &h, PI / 2.0)?;
    let family = AnalyzingFamily::ground(1, hbar, cfg.gauge)?;
    let w = 8.0 * hbar.sqrt();
    let pg = PhaseGrid::new(vec![PhasePair::new(-w, w, 128, -w, w, 128)?], hbar)?;
    let dist = husimi_distribution(Source::Density(&quarter, &grid), &family, &pg)?;
    let peak = dist.argmax()[0];
    let want = rotated_point(p0, x0, PI / 2.0);
    let cell = pg.pairs[0].dp().max(pg.pairs[0].dx());
    let miss = (peak.0 - want.0).abs().max((peak.1 - want.1).abs());
    Ok(vec![
        Check::at_most("purity_drift", (mid.purity() - rho.purity()).abs(), tol),
        Check::at_most("trace_drift", (mid.trace() - rho.trace()).abs(), tol),
        Check::at_most("spectrum_drift", spectrum, tol),
        Check::at_most("period_return", max_abs_c(&(&period.matrix - &rho.matrix)), 1e-8),
        Check::at_most("quarter_turn_peak_offset", miss, cell),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trips() {
        let r = run(Suite::Uncertainty, &VerifyConfig::default()).unwrap();
        let back = parse_report(serde_json::to_string(&r).unwrap().as_bytes()).unwrap();
        assert_eq!(back, r);
        assert!(parse_report(br#"{"schema":2,"suite":"x","checks":[]}"#).is_err());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn fast_suites_pass() {
        let cfg = VerifyConfig::default();
        for s in [Suite::Microstate, Suite::Fock, Suite::Gauge, Suite::Density, Suite::Uncertainty] {
            let r = run(s, &cfg).unwrap();
            assert!(r.passed(), "{r:#?}");
        }
    }

    #[test]
    fn microstate_reports_h() {
        let r = run(Suite::Microstate, &VerifyConfig::default()).unwrap();
        let c = r.checks.iter().find(|c| c.name == "integral_h").unwrap();
        assert!((c.value - 2.0 * PI).abs() < 1e-2 && c.pass);
    }

    #[test]
    fn report_json_round_trip() {
        let r = Report { schema: 1, suite: "x".into(), checks: vec![Check::at_most("a", 1.0, 2.0)] };
        let back: Report = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}

use std::path::Path;

use serde_json::{json, Value};

use qps::density::{evolve_lvn, number_omega_hamiltonian, DensityMatrix};
use qps::fock::{number_state, number_state_sigmas, quadrature_matrices, FockVector, TruncatedBasis};
use qps::grid::{moments, Axis, CoordinateGrid, GridWavefunction};
use qps::io::{self, fmt_num};
use qps::joint::{coordinate_wavefunction, GaugeChoice, JointStateSpec};
use qps::metric::check_saturation;
use qps::numerics::max_abs_c;
use qps::phase::{
    husimi_distribution, phase_wavefunction, wigner_distribution, AnalyzingFamily, PhaseDistribution, PhaseGrid,
    PhasePair, Source, DEFAULT_PHASE_POINTS, DEFAULT_PHASE_POINTS_2D, DEFAULT_PHASE_SIGMAS,
};
use qps::verify::{self, Suite, Tolerances, VerifyConfig};
use qps::{Error, Result};

use crate::output::{read, read_sibling, write_atomic, write_json};
use crate::{Cli, Command, DistArg, StateCommand, SuiteArg};

struct Ctx {
    hbar: f64,
    gauge: GaugeChoice,
    tol: Tolerances,
}

fn context(cli: &Cli) -> Result<Ctx> {
    if !(cli.hbar.is_finite() && cli.hbar > 0.0) {
        return Err(Error::Invalid(format!("--hbar must be positive, got {}", cli.hbar)));
    }
    let mut tol = Tolerances::default();
    for t in &cli.tol {
        let (k, v) = io::parse_tol(t)?;
        tol.0.insert(k, v);
    }
    Ok(Ctx { hbar: cli.hbar, gauge: cli.gauge.parse()?, tol })
}

pub fn run(cli: &Cli) -> Result<bool> {
    let ctx = context(cli)?;
    match &cli.command {
        Command::State(StateCommand::Synth { spec, basis, name }) => synth(cli, &ctx, spec, *basis, name),
        Command::State(StateCommand::Fock { n, reference, levels, name }) => {
            fock(cli, &ctx, n, reference.as_deref(), *levels, name)
        }
        Command::Dist { state, kind } => dist(cli, &ctx, state, *kind),
        Command::Verify { suite } => verify_cmd(cli, &ctx, *suite),
        Command::Evolve { density, hamiltonian, omega, hamiltonian_csv, t, snapshots, husimi } => evolve(
            cli,
            &ctx,
            density,
            hamiltonian,
            *omega,
            hamiltonian_csv.as_deref(),
            *t,
            *snapshots,
            *husimi,
        ),
    }
}

/// Spec file with `hbar` and `gauge` filled from the command line when absent.
fn load_spec(path: &Path, ctx: &Ctx) -> Result<JointStateSpec> {
    let mut v: Value = serde_json::from_slice(&read(path)?)?;
    let obj = v.as_object_mut().ok_or_else(|| Error::Parse("spec must be a JSON object".into()))?;
    obj.entry("hbar").or_insert(json!(ctx.hbar));
    obj.entry("gauge").or_insert(json!(ctx.gauge.to_string()));
    io::parse_spec_json(serde_json::to_string(&v)?.as_bytes())
}

/// Grid covering `sigmas` widths of `spec` in both coordinate and momentum.
fn auto_grid(spec: &JointStateSpec, sigmas: f64) -> Result<CoordinateGrid> {
    let d = spec.dim();
    let base = if d == 1 { 1024 } else { 256 };
    let axes = (0..d)
        .map(|mu| {
            let m = &spec.moments;
            let half = (m.mean_x[mu].abs() + sigmas * m.x[(mu, mu)].sqrt()).max(12.0 * spec.hbar.sqrt());
            let p_max = m.mean_p[mu].abs() + sigmas * m.p[(mu, mu)].sqrt();
            let need = (2.0 * half * p_max / (std::f64::consts::PI * spec.hbar) * 1.25).ceil() as usize;
            Axis::new(-half, half, need.max(base).next_power_of_two())
        })
        .collect::<Result<Vec<_>>>()?;
    CoordinateGrid::new(axes)
}

fn grid_for(cli: &Cli, spec: &JointStateSpec, sigmas: f64) -> Result<CoordinateGrid> {
    match &cli.grid {
        Some(g) => {
            let grid = io::parse_grid_spec(g)?;
            if grid.dim() != spec.dim() {
                return Err(Error::Dimension(format!("--grid has {} axes, state has {}", grid.dim(), spec.dim())));
            }
            Ok(grid)
        }
        None => auto_grid(spec, sigmas),
    }
}

fn write_wavefunction(out: &Path, name: &str, psi: &GridWavefunction) -> Result<()> {
    let csv = format!("{name}.csv");
    let p = write_atomic(out, &csv, &io::wavefunction_to_csv(psi)?)?;
    println!("wrote {}", p.display());
    let p = write_json(out, &format!("{name}.json"), &io::wavefunction_meta(psi, &csv))?;
    println!("wrote {}", p.display());
    Ok(())
}

fn write_density(out: &Path, name: &str, rho: &DensityMatrix, extra: Option<(&str, Value)>) -> Result<()> {
    let csv = format!("{name}.csv");
    write_atomic(out, &csv, &io::matrix_to_csv(&rho.matrix)?)?;
    let mut meta = serde_json::to_value(io::density_meta(rho, &csv)?)?;
    if let (Some((k, v)), Some(obj)) = (extra, meta.as_object_mut()) {
        obj.insert(k.into(), v);
    }
    let p = write_json(out, &format!("{name}.json"), &meta)?;
    println!("wrote {}", p.display());
    Ok(())
}

fn write_moments(out: &Path, name: &str, spec: &JointStateSpec, psi: &GridWavefunction) -> Result<f64> {
    let m = moments(psi)?;
    let sat = check_saturation(&m, &spec.metric(), spec.hbar)?;
    let report = json!({
        "schema": io::SCHEMA,
        "kind": "moments",
        "hbar": spec.hbar,
        "gauge": spec.gauge.to_string(),
        "spec": serde_json::from_str::<Value>(&io::spec_to_json(spec)?)?,
        "measured": m,
        "normalization": psi.norm_sq(),
        "saturation_residual": sat.relative,
    });
    let p = write_json(out, &format!("{name}_moments.json"), &report)?;
    println!("wrote {}", p.display());
    println!("normalization {}", fmt_num(psi.norm_sq()));
    Ok(sat.relative)
}

fn synth(cli: &Cli, ctx: &Ctx, spec_path: &Path, basis: Option<usize>, name: &str) -> Result<bool> {
    let spec = load_spec(spec_path, ctx)?;
    let grid = grid_for(cli, &spec, DEFAULT_PHASE_SIGMAS)?;
    let psi = coordinate_wavefunction(&spec, &grid)?;
    write_wavefunction(&cli.out, name, &psi)?;
    let residual = write_moments(&cli.out, name, &spec, &psi)?;
    println!("saturation residual {}", fmt_num(residual));
    if let Some(levels) = basis {
        let reference = JointStateSpec::ground(spec.dim(), spec.hbar)?.with_gauge(spec.gauge);
        let b = TruncatedBasis::new(vec![levels; spec.dim()], reference)?;
        let v = FockVector::project(&psi, &b)?;
        let captured = v.norm() * v.norm();
        let rho = DensityMatrix::from_pure(&v.normalized()?)?;
        write_density(&cli.out, &format!("{name}_density"), &rho, None)?;
        println!("basis weight captured {}", fmt_num(captured));
    }
    Ok(true)
}

fn parse_occupation(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Parse(format!("occupation '{t}' is not a count"))))
        .collect()
}

fn fock(cli: &Cli, ctx: &Ctx, n: &str, reference: Option<&Path>, levels: Option<usize>, name: &str) -> Result<bool> {
    let n = parse_occupation(n)?;
    let spec = match reference {
        Some(p) => load_spec(p, ctx)?,
        None => JointStateSpec::ground(n.len(), ctx.hbar)?.with_gauge(ctx.gauge),
    };
    if spec.dim() != n.len() {
        return Err(Error::Dimension(format!("{} occupations for a {}-axis reference", n.len(), spec.dim())));
    }
    let top = n.iter().copied().max().unwrap_or(0);
    let n_max: Vec<usize> = match levels {
        Some(l) => vec![l; n.len()],
        None => n.iter().map(|k| (k + 1).max(2)).collect(),
    };
    let basis = TruncatedBasis::new(n_max, spec.clone())?;
    let grid = grid_for(cli, &spec, number_state_sigmas(top) + 6.0)?;
    let psi = number_state(&n, &basis, &grid)?;
    write_wavefunction(&cli.out, name, &psi)?;
    write_moments(&cli.out, name, &spec, &psi)?;
    let rho = DensityMatrix::from_pure(&FockVector::basis_state(&basis, &n)?)?;
    write_density(&cli.out, &format!("{name}_density"), &rho, None)?;
    Ok(true)
}

fn family_for(dim: usize, hbar: f64, ctx: &Ctx) -> Result<AnalyzingFamily> {
    AnalyzingFamily::ground(dim, hbar, ctx.gauge)
}

/// Phase grid spanning the Husimi spread of a density matrix, from its
/// quadrature moments in the truncated basis. Each pair is a square centered
/// on the basis reference, so it also covers every rotation of the state
/// about that center.
fn density_pgrid(rho: &DensityMatrix, family: &AnalyzingFamily) -> Result<PhaseGrid> {
    let (xs, ps) = quadrature_matrices(&rho.basis)?;
    let d = rho.basis.axes();
    let n = if d == 1 { DEFAULT_PHASE_POINTS } else { DEFAULT_PHASE_POINTS_2D };
    let fam = &family.template.moments;
    let reference = &rho.basis.reference.moments;
    let pairs = (0..d)
        .map(|mu| {
            let ev = |m: &qps::numerics::CMat| (&rho.matrix * m).trace().re;
            let (mx, mp) = (ev(&xs[mu]), ev(&ps[mu]));
            let vx = ev(&(&xs[mu] * &xs[mu])) - mx * mx + fam.x[(mu, mu)];
            let vp = ev(&(&ps[mu] * &ps[mu])) - mp * mp + fam.p[(mu, mu)];
            let (cp, cx) = (reference.mean_p[mu], reference.mean_x[mu]);
            let half = (mp - cp).hypot(mx - cx) + DEFAULT_PHASE_SIGMAS * vx.max(vp).max(0.0).sqrt();
            PhasePair::new(cp - half, cp + half, n, cx - half, cx + half, n)
        })
        .collect::<Result<Vec<_>>>()?;
    PhaseGrid::new(pairs, rho.basis.reference.hbar)
}

fn density_grid(cli: &Cli, rho: &DensityMatrix) -> Result<CoordinateGrid> {
    let top = rho.basis.n_max.iter().copied().max().unwrap_or(1) - 1;
    grid_for(cli, &rho.basis.reference, number_state_sigmas(top) + 6.0)
}

fn pgrid_or(cli: &Cli, hbar: f64, dim: usize, default: impl FnOnce() -> Result<PhaseGrid>) -> Result<PhaseGrid> {
    match &cli.pgrid {
        Some(s) => {
            let pg = io::parse_pgrid_spec(s, hbar)?;
            if pg.dim() != dim {
                return Err(Error::Dimension(format!("--pgrid has {} pairs, state has {dim} axes", pg.dim())));
            }
            Ok(pg)
        }
        None => default(),
    }
}

fn dist(cli: &Cli, ctx: &Ctx, state: &Path, kind: DistArg) -> Result<bool> {
    let meta_bytes = read(state)?;
    let meta: Value = serde_json::from_slice(&meta_bytes)?;
    let (dist, imag, label) = match meta.get("kind").and_then(Value::as_str) {
        Some("wavefunction") => {
            let meta = io::parse_wavefunction_meta(&meta_bytes)?;
            let psi = io::parse_wavefunction_csv(&read_sibling(state, &meta.csv)?, &meta)?;
            let family = family_for(psi.dim(), psi.hbar, ctx)?;
            let pg = pgrid_or(cli, psi.hbar, psi.dim(), || PhaseGrid::default_for(&psi, &family))?;
            match kind {
                DistArg::Husimi => (husimi_distribution(Source::Pure(&psi), &family, &pg)?, None, "husimi"),
                DistArg::Wigner => (wigner_distribution(&psi, &pg)?, None, "wigner"),
                DistArg::Phasewave => {
                    let pw = phase_wavefunction(&psi, &family, &pg)?;
                    let mut d = pw.husimi();
                    d.values = pw.values.iter().map(|v| v.re).collect();
                    let im: Vec<f64> = pw.values.iter().map(|v| v.im).collect();
                    println!("normalization {}", fmt_num(pw.normalization()));
                    (d, Some(im), "phasewave")
                }
            }
        }
        Some("density") => {
            let (m, _) = io::parse_density_meta(&meta_bytes)?;
            let rho = io::parse_density(&meta_bytes, &read_sibling(state, &m.csv)?)?;
            if !matches!(kind, DistArg::Husimi) {
                return Err(Error::Unsupported("density inputs support the husimi kind only".into()));
            }
            let hbar = rho.basis.reference.hbar;
            let family = family_for(rho.basis.axes(), hbar, ctx)?;
            let grid = density_grid(cli, &rho)?;
            let pg = pgrid_or(cli, hbar, rho.basis.axes(), || density_pgrid(&rho, &family))?;
            (husimi_distribution(Source::Density(&rho, &grid), &family, &pg)?, None, "husimi")
        }
        other => return Err(Error::Parse(format!("unrecognized state sidecar kind {other:?}"))),
    };
    write_distribution(&cli.out, label, &dist, imag.as_deref())?;
    Ok(true)
}

fn write_distribution(out: &Path, label: &str, dist: &PhaseDistribution, imag: Option<&[f64]>) -> Result<()> {
    let csv = format!("{label}.csv");
    let p = write_atomic(out, &csv, &io::distribution_to_csv(dist, imag)?)?;
    println!("wrote {}", p.display());
    let normalization = match imag {
        Some(im) => {
            let w: Vec<f64> = dist.values.iter().zip(im).map(|(r, i)| r * r + i * i).collect();
            qps::numerics::pairwise_sum(&w) * dist.grid.measure()
        }
        None => dist.integral(),
    };
    let meta = json!({
        "schema": io::SCHEMA,
        "kind": "distribution",
        "distribution": label,
        "gauge": dist.gauge.map(|g| g.to_string()),
        "hbar": dist.grid.hbar,
        "pgrid": dist.grid,
        "normalization": normalization,
        "min": dist.min(),
        "max": dist.max(),
        "argmax": dist.argmax(),
        "csv": csv,
    });
    let p = write_json(out, &format!("{label}.json"), &meta)?;
    println!("wrote {}", p.display());
    if imag.is_none() {
        println!("normalization {}", fmt_num(normalization));
    }
    println!("min {}", fmt_num(dist.min()));
    println!("max {}", fmt_num(dist.max()));
    Ok(())
}

fn verify_cmd(cli: &Cli, ctx: &Ctx, suite: SuiteArg) -> Result<bool> {
    let cfg = VerifyConfig { hbar: ctx.hbar, gauge: ctx.gauge, tol: ctx.tol.clone() };
    let (report, name) = match suite {
        SuiteArg::All => (verify::run_all(&cfg)?, "all"),
        other => {
            let s = match other {
                SuiteArg::Uncertainty => Suite::Uncertainty,
                SuiteArg::Closure => Suite::Closure,
                SuiteArg::Microstate => Suite::Microstate,
                SuiteArg::Fock => Suite::Fock,
                SuiteArg::Gauge => Suite::Gauge,
                SuiteArg::Density => Suite::Density,
                SuiteArg::All => unreachable!("handled above"),
            };
            (verify::run(s, &cfg)?, s.name())
        }
    };
    if matches!(suite, SuiteArg::Fock | SuiteArg::All) {
        let basis = TruncatedBasis::new(vec![5], JointStateSpec::ground(1, ctx.hbar)?)?;
        let lad = qps::fock::build_ladder(&basis);
        write_atomic(&cli.out, "fock_lower.csv", &io::matrix_to_csv(&lad.lower[0])?)?;
        write_atomic(&cli.out, "fock_number.csv", &io::matrix_to_csv(&lad.number)?)?;
    }
    write_json(&cli.out, &format!("verify_{name}.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report.passed())
}

#[allow(clippy::too_many_arguments)]
fn evolve(
    cli: &Cli,
    ctx: &Ctx,
    density: &Path,
    hamiltonian: &str,
    omega: f64,
    hamiltonian_csv: Option<&Path>,
    t: f64,
    snapshots: usize,
    husimi: bool,
) -> Result<bool> {
    if !t.is_finite() || snapshots == 0 {
        return Err(Error::Invalid("--t must be finite and --snapshots at least 1".into()));
    }
    let meta_bytes = read(density)?;
    let (m, _) = io::parse_density_meta(&meta_bytes)?;
    let rho = io::parse_density(&meta_bytes, &read_sibling(density, &m.csv)?)?;
    let h = match hamiltonian_csv {
        Some(p) => io::parse_matrix_csv(&read(p)?, rho.dim())?,
        None if hamiltonian == "number_omega" => {
            if !omega.is_finite() {
                return Err(Error::Invalid("--omega must be finite".into()));
            }
            number_omega_hamiltonian(&rho.basis, omega)
        }
        None => return Err(Error::Invalid(format!("unknown Hamiltonian '{hamiltonian}'; use number_omega"))),
    };
    let hbar = rho.basis.reference.hbar;
    let family = family_for(rho.basis.axes(), hbar, ctx)?;
    let (grid, pg) = if husimi {
        let grid = density_grid(cli, &rho)?;
        let pg = pgrid_or(cli, hbar, rho.basis.axes(), || density_pgrid(&rho, &family))?;
        (Some(grid), Some(pg))
    } else {
        (None, None)
    };
    let spectrum0 = rho.eigenvalues();
    let (mut purity_drift, mut trace_drift, mut spectrum_drift) = (0.0f64, 0.0f64, 0.0f64);
    let mut times = Vec::new();
    let mut purities = Vec::new();
    let mut peaks = Vec::new();
    let mut last = rho.clone();
    for i in 0..=snapshots {
        let ti = t * i as f64 / snapshots as f64;
        let r = evolve_lvn(&rho, &h, ti)?;
        purity_drift = purity_drift.max((r.purity() - rho.purity()).abs());
        trace_drift = trace_drift.max((r.trace() - rho.trace()).abs());
        for (a, b) in r.eigenvalues().iter().zip(&spectrum0) {
            spectrum_drift = spectrum_drift.max((a - b).abs());
        }
        write_density(&cli.out, &format!("snapshot_{i:03}"), &r, Some(("t", json!(ti))))?;
        if let (Some(grid), Some(pg)) = (&grid, &pg) {
            let d = husimi_distribution(Source::Density(&r, grid), &family, pg)?;
            write_atomic(&cli.out, &format!("snapshot_{i:03}_husimi.csv"), &io::distribution_to_csv(&d, None)?)?;
            peaks.push(d.argmax());
        }
        times.push(ti);
        purities.push(r.purity());
        last = r;
    }
    let return_error = max_abs_c(&(&last.matrix - &rho.matrix));
    let summary = json!({
        "schema": io::SCHEMA,
        "kind": "evolution",
        "hamiltonian": if hamiltonian_csv.is_some() { "csv" } else { hamiltonian },
        "omega": omega,
        "times": times,
        "purity": purities,
        "purity_drift": purity_drift,
        "trace_drift": trace_drift,
        "spectrum_drift": spectrum_drift,
        "final_minus_initial": return_error,
        "husimi_argmax": if husimi { json!(peaks) } else { Value::Null },
        "pgrid": pg,
    });
    let p = write_json(&cli.out, "evolve.json", &summary)?;
    println!("wrote {}", p.display());
    println!("purity drift {}", fmt_num(purity_drift));
    println!("trace drift {}", fmt_num(trace_drift));
    println!("spectrum drift {}", fmt_num(spectrum_drift));
    println!("final minus initial {}", fmt_num(return_error));
    Ok(purity_drift <= ctx.tol.get("purity", 1e-10))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupations_parse() {
        assert_eq!(parse_occupation("2, 0").unwrap(), vec![2, 0]);
        assert!(parse_occupation("1,-1").is_err());
        assert!(parse_occupation("").is_err());
    }

    #[test]
    fn auto_grid_resolves_displaced_momentum() {
        let spec = JointStateSpec::diagonal(vec![9.0], vec![0.0], &[0.5], 1.0).unwrap();
        let g = auto_grid(&spec, DEFAULT_PHASE_SIGMAS).unwrap();
        let a = &g.axes[0];
        let nyquist = std::f64::consts::PI / a.step();
        assert!(nyquist > 9.0 + DEFAULT_PHASE_SIGMAS * spec.moments.p[(0, 0)].sqrt());
    }
}

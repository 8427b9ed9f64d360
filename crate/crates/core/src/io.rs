//! Plain-text exchange formats: JSON specs and sidecars, CSV samples.
//!
//! Every parser takes untrusted bytes and reports malformed input as
//! [`Error::Parse`] (or the validation error of the constructed value).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::fock::TruncatedBasis;
use crate::grid::{Axis, CoordinateGrid, GridWavefunction};
use crate::joint::{GaugeChoice, JointStateSpec};
use crate::metric::{rows_to_mat, saturating_p, Signature, StatMoments};
use crate::numerics::{CMat, RMat, C64};
use crate::phase::{PhaseDistribution, PhaseGrid, PhasePair};

pub const SCHEMA: u32 = 1;

/// Twelve significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.11e}")
}

fn check_schema(schema: Option<u32>) -> Result<()> {
    match schema {
        None | Some(SCHEMA) => Ok(()),
        Some(s) => Err(Error::Parse(format!("unsupported schema version {s}"))),
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse(format!("'{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("'{s}' is not finite")));
    }
    Ok(v)
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Parse(format!("'{s}' is not a count")))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum SignatureRepr {
    Pair([usize; 2]),
    Named { d_plus: usize, d_minus: usize },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    schema: Option<u32>,
    mean_p: Vec<f64>,
    mean_x: Vec<f64>,
    #[serde(rename = "P")]
    p: Option<Vec<Vec<f64>>>,
    #[serde(rename = "X")]
    x: Vec<Vec<f64>>,
    rho: Option<Vec<Vec<f64>>>,
    hbar: Option<f64>,
    signature: Option<SignatureRepr>,
    gauge: Option<String>,
}

/// Joint-state spec: `mean_p`, `mean_x`, `X` required; `P` taken from the
/// saturation identity when absent (and checked when present); `rho`
/// defaults to zero, `hbar` to 1, `signature` to all-spatial, `gauge` to zero.
pub fn parse_spec_json(data: &[u8]) -> Result<JointStateSpec> {
    let r: SpecRepr = serde_json::from_slice(data)?;
    check_schema(r.schema)?;
    let d = r.mean_x.len();
    if d == 0 || r.mean_p.len() != d {
        return Err(Error::Dimension(format!("mean_p has {} entries, mean_x has {d}", r.mean_p.len())));
    }
    let hbar = r.hbar.unwrap_or(1.0);
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::Invalid(format!("hbar must be positive, got {hbar}")));
    }
    let signature = match r.signature {
        None => Signature::spatial(d),
        Some(SignatureRepr::Pair([a, b])) | Some(SignatureRepr::Named { d_plus: a, d_minus: b }) => Signature::new(a, b)?,
    };
    if signature.dim() != d {
        return Err(Error::Dimension(format!("signature has {} axes, means have {d}", signature.dim())));
    }
    let gauge = match r.gauge {
        None => GaugeChoice::Zero,
        Some(g) => g.parse()?,
    };
    let x = rows_to_mat(&r.x, d, "X")?;
    let rho = match &r.rho {
        Some(rows) => rows_to_mat(rows, d, "rho")?,
        None => RMat::zeros(d, d),
    };
    let p = match &r.p {
        Some(rows) => rows_to_mat(rows, d, "P")?,
        None => {
            if x.iter().chain(rho.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Invalid("non-finite covariance entry".into()));
            }
            let p = saturating_p(&x, &rho, &signature.metric(), hbar)?;
            (&p + p.transpose()) * 0.5
        }
    };
    let moments = StatMoments { mean_p: r.mean_p, mean_x: r.mean_x, p, x, rho };
    JointStateSpec::new(moments, signature, gauge, hbar)
}

/// Inverse of [`parse_spec_json`].
pub fn spec_to_json(spec: &JointStateSpec) -> Result<String> {
    let mut v = serde_json::to_value(&spec.moments)?;
    let obj = v.as_object_mut().expect("moments serialize to an object");
    obj.insert("schema".into(), SCHEMA.into());
    obj.insert("hbar".into(), spec.hbar.into());
    obj.insert(
        "signature".into(),
        serde_json::to_value(SignatureRepr::Named { d_plus: spec.signature.d_plus, d_minus: spec.signature.d_minus })?,
    );
    obj.insert("gauge".into(), spec.gauge.to_string().into());
    Ok(serde_json::to_string_pretty(&v)?)
}

/// `"min:max:n"` for one axis; axes separated by commas.
pub fn parse_grid_spec(s: &str) -> Result<CoordinateGrid> {
    let axes = s
        .split(',')
        .map(|part| {
            let f: Vec<&str> = part.split(':').collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("grid axis '{part}' is not min:max:n")));
            }
            Axis::new(parse_f64(f[0])?, parse_f64(f[1])?, parse_usize(f[2])?)
        })
        .collect::<Result<Vec<_>>>()?;
    CoordinateGrid::new(axes)
}

/// `"pmin:pmax:np,xmin:xmax:nx"` per pair; pairs separated by `;`.
pub fn parse_pgrid_spec(s: &str, hbar: f64) -> Result<PhaseGrid> {
    let pairs = s
        .split(';')
        .map(|pair| {
            let halves: Vec<&str> = pair.split(',').collect();
            if halves.len() != 2 {
                return Err(Error::Parse(format!("phase pair '{pair}' is not pmin:pmax:np,xmin:xmax:nx")));
            }
            let mut v = Vec::with_capacity(6);
            for h in halves {
                let f: Vec<&str> = h.split(':').collect();
                if f.len() != 3 {
                    return Err(Error::Parse(format!("phase range '{h}' is not min:max:n")));
                }
                v.push((parse_f64(f[0])?, parse_f64(f[1])?, parse_usize(f[2])?));
            }
            PhasePair::new(v[0].0, v[0].1, v[0].2, v[1].0, v[1].1, v[1].2)
        })
        .collect::<Result<Vec<_>>>()?;
    PhaseGrid::new(pairs, hbar)
}

/// `NAME=VALUE` with a positive finite value.
pub fn parse_tol(s: &str) -> Result<(String, f64)> {
    let (name, val) = s.split_once('=').ok_or_else(|| Error::Parse(format!("tolerance '{s}' is not NAME=VALUE")))?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(Error::Parse(format!("bad tolerance name '{name}'")));
    }
    let v = parse_f64(val)?;
    if v <= 0.0 {
        return Err(Error::Invalid(format!("tolerance {name} must be positive")));
    }
    Ok((name.to_string(), v))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WavefunctionMeta {
    pub schema: u32,
    pub kind: String,
    pub hbar: f64,
    pub grid: CoordinateGrid,
    pub csv: String,
}

pub fn wavefunction_meta(psi: &GridWavefunction, csv_name: &str) -> WavefunctionMeta {
    WavefunctionMeta { schema: SCHEMA, kind: "wavefunction".into(), hbar: psi.hbar, grid: psi.grid.clone(), csv: csv_name.into() }
}

/// Columns `q0[,q1],re,im`, row-major with the last axis fastest.
pub fn wavefunction_to_csv(psi: &GridWavefunction) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..psi.dim()).map(|a| format!("q{a}")).collect();
    header.extend(["re".into(), "im".into()]);
    w.write_record(&header)?;
    for (k, v) in psi.values.iter().enumerate() {
        let mut row: Vec<String> = psi.grid.point(k).into_iter().map(fmt_num).collect();
        row.push(fmt_num(v.re));
        row.push(fmt_num(v.im));
        w.write_record(&row)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn validated_grid(grid: &CoordinateGrid) -> Result<CoordinateGrid> {
    let axes = grid.axes.iter().map(|a| Axis::new(a.min, a.max, a.n)).collect::<Result<Vec<_>>>()?;
    CoordinateGrid::new(axes)
}

pub fn parse_wavefunction_meta(data: &[u8]) -> Result<WavefunctionMeta> {
    let m: WavefunctionMeta = serde_json::from_slice(data)?;
    check_schema(Some(m.schema))?;
    if m.kind != "wavefunction" {
        return Err(Error::Parse(format!("expected a wavefunction sidecar, got '{}'", m.kind)));
    }
    if !(m.hbar.is_finite() && m.hbar > 0.0) {
        return Err(Error::Invalid("hbar must be positive".into()));
    }
    Ok(WavefunctionMeta { grid: validated_grid(&m.grid)?, ..m })
}

/// Reads samples against the sidecar grid; coordinates must match within
/// a thousandth of a cell.
pub fn parse_wavefunction_csv(data: &[u8], meta: &WavefunctionMeta) -> Result<GridWavefunction> {
    let grid = validated_grid(&meta.grid)?;
    let d = grid.dim();
    let mut rdr = csv::Reader::from_reader(data);
    let mut values = Vec::with_capacity(grid.len());
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 2 {
            return Err(Error::Parse(format!("row {k} has {} columns, expected {}", rec.len(), d + 2)));
        }
        if k >= grid.len() {
            return Err(Error::Parse(format!("more rows than the {} grid points", grid.len())));
        }
        for a in 0..d {
            let q = parse_f64(&rec[a])?;
            if (q - grid.coord(k, a)).abs() > 1e-3 * grid.axes[a].step() {
                return Err(Error::Parse(format!("row {k} coordinate {a} = {q} is off the grid")));
            }
        }
        values.push(C64::new(parse_f64(&rec[d])?, parse_f64(&rec[d + 1])?));
    }
    if values.len() != grid.len() {
        return Err(Error::Parse(format!("{} rows for {} grid points", values.len(), grid.len())));
    }
    GridWavefunction::new(grid, values, meta.hbar)
}

/// Columns `row,col,re,im`, all entries.
pub fn matrix_to_csv(m: &CMat) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["row", "col", "re", "im"])?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            w.write_record([i.to_string(), j.to_string(), fmt_num(v.re), fmt_num(v.im)])?;
        }
    }
    finish(w)
}

/// Reads a `row,col,re,im` CSV into an `n×n` matrix; absent entries are zero.
pub fn parse_matrix_csv(data: &[u8], n: usize) -> Result<CMat> {
    let mut m = CMat::zeros(n, n);
    let mut seen = vec![false; n * n];
    let mut rdr = csv::Reader::from_reader(data);
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Parse(format!("matrix row has {} columns, expected 4", rec.len())));
        }
        let (i, j) = (parse_usize(&rec[0])?, parse_usize(&rec[1])?);
        if i >= n || j >= n {
            return Err(Error::Parse(format!("entry ({i}, {j}) outside a {n}×{n} matrix")));
        }
        if std::mem::replace(&mut seen[i * n + j], true) {
            return Err(Error::Parse(format!("entry ({i}, {j}) given twice")));
        }
        m[(i, j)] = C64::new(parse_f64(&rec[2])?, parse_f64(&rec[3])?);
    }
    Ok(m)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityMeta {
    pub schema: u32,
    pub kind: String,
    pub n_max: Vec<usize>,
    /// Reference joint state of the number basis, in spec form.
    pub reference: serde_json::Value,
    pub csv: String,
}

pub fn density_meta(rho: &DensityMatrix, csv_name: &str) -> Result<DensityMeta> {
    Ok(DensityMeta {
        schema: SCHEMA,
        kind: "density".into(),
        n_max: rho.basis.n_max.clone(),
        reference: serde_json::from_str(&spec_to_json(&rho.basis.reference)?)?,
        csv: csv_name.into(),
    })
}

pub fn parse_density_meta(data: &[u8]) -> Result<(DensityMeta, TruncatedBasis)> {
    let m: DensityMeta = serde_json::from_slice(data)?;
    check_schema(Some(m.schema))?;
    if m.kind != "density" {
        return Err(Error::Parse(format!("expected a density sidecar, got '{}'", m.kind)));
    }
    let reference = parse_spec_json(serde_json::to_string(&m.reference)?.as_bytes())?;
    let basis = TruncatedBasis::new(m.n_max.clone(), reference)?;
    Ok((m, basis))
}

pub fn parse_density(meta: &[u8], csv_data: &[u8]) -> Result<DensityMatrix> {
    let (_, basis) = parse_density_meta(meta)?;
    let m = parse_matrix_csv(csv_data, basis.dim())?;
    DensityMatrix::new(basis, m)
}

/// Columns `p0,x0[,p1,x1],value[,im]`.
pub fn distribution_to_csv(dist: &PhaseDistribution, imag: Option<&[f64]>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let d = dist.grid.dim();
    let mut header: Vec<String> = (0..d).flat_map(|a| [format!("p{a}"), format!("x{a}")]).collect();
    header.push("value".into());
    if imag.is_some() {
        header.push("im".into());
    }
    w.write_record(&header)?;
    for (k, v) in dist.values.iter().enumerate() {
        let mut row: Vec<String> = dist.grid.point(k).into_iter().flat_map(|(p, x)| [fmt_num(p), fmt_num(x)]).collect();
        row.push(fmt_num(*v));
        if let Some(im) = imag {
            row.push(fmt_num(im[k]));
        }
        w.write_record(&row)?;
    }
    finish(w)
}

/// Reads the value column(s) of a distribution CSV written for `grid`.
pub fn parse_distribution_csv(data: &[u8], grid: &PhaseGrid) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let d = grid.dim();
    let mut rdr = csv::Reader::from_reader(data);
    let width = rdr.headers()?.len();
    if width != 2 * d + 1 && width != 2 * d + 2 {
        return Err(Error::Parse(format!("distribution CSV has {width} columns")));
    }
    let mut re = Vec::with_capacity(grid.len());
    let mut im = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Parse("ragged distribution CSV".into()));
        }
        if re.len() >= grid.len() {
            return Err(Error::Parse("more rows than phase grid points".into()));
        }
        re.push(parse_f64(&rec[2 * d])?);
        if width == 2 * d + 2 {
            im.push(parse_f64(&rec[2 * d + 1])?);
        }
    }
    if re.len() != grid.len() {
        return Err(Error::Parse(format!("{} rows for {} phase grid points", re.len(), grid.len())));
    }
    Ok((re, (width == 2 * d + 2).then_some(im)))
}

/// Builds a [`crate::fock::FockVector`] coefficient vector from `(index, re, im)` triples.
pub fn coeffs_from_triples(n: usize, triples: &[(usize, f64, f64)]) -> Result<DVector<C64>> {
    let mut c = DVector::zeros(n);
    for &(k, re, im) in triples {
        if k >= n {
            return Err(Error::Dimension(format!("index {k} outside a basis of {n}")));
        }
        c[k] = C64::new(re, im);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::DensityMatrix;
    use crate::fock::FockVector;
    use crate::joint::coordinate_wavefunction;

    #[test]
    fn spec_round_trip_and_defaults() {
        let s = parse_spec_json(br#"{"mean_p":[0.3],"mean_x":[-1.0],"X":[[0.5]],"rho":[[0.2]]}"#).unwrap();
        assert_eq!(s.gauge, GaugeChoice::Zero);
        assert!((s.moments.p[(0, 0)] - (0.25 + 0.04) / 0.5).abs() < 1e-14);
        let back = parse_spec_json(spec_to_json(&s).unwrap().as_bytes()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn spec_rejects_non_saturating() {
        let e = parse_spec_json(br#"{"mean_p":[0],"mean_x":[0],"P":[[1.0]],"X":[[1.0]],"rho":[[0]]}"#).unwrap_err();
        assert!(e.to_string().contains("saturation"));
    }

    #[test]
    fn spec_signature_and_gauge() {
        let s = parse_spec_json(
            br#"{"mean_p":[0,0],"mean_x":[0,0],"X":[[0.5,0],[0,0.5]],"signature":[1,1],"gauge":"half","hbar":2.0}"#,
        )
        .unwrap();
        assert_eq!(s.signature, Signature::new(1, 1).unwrap());
        assert_eq!(s.gauge, GaugeChoice::Half);
        assert!(parse_spec_json(br#"{"mean_p":[0],"mean_x":[0],"X":[[1]],"schema":2}"#).is_err());
        assert!(parse_spec_json(br#"{"mean_p":[0],"mean_x":[0],"X":[[1]],"bogus":1}"#).is_err());
    }

    #[test]
    fn grid_specs() {
        let g = parse_grid_spec("-8:8:256").unwrap();
        assert_eq!(g.axes[0].n, 256);
        assert_eq!(parse_grid_spec("-8:8:64,-4:4:32").unwrap().dim(), 2);
        assert!(parse_grid_spec("-8:8:100").is_err());
        assert!(parse_grid_spec("8:-8:64").is_err());
        assert!(parse_grid_spec("nan:1:64").is_err());
        let pg = parse_pgrid_spec("-6:6:64,-5:5:32", 1.0).unwrap();
        assert_eq!(pg.len(), 64 * 32);
        assert!(parse_pgrid_spec("-6:6:64", 1.0).is_err());
        assert_eq!(parse_tol("closure=1e-4").unwrap(), ("closure".into(), 1e-4));
        assert!(parse_tol("closure=-1").is_err());
        assert!(parse_tol("=1").is_err());
    }

    #[test]
    fn wavefunction_round_trip() {
        let grid = parse_grid_spec("-10:10:128").unwrap();
        let psi = coordinate_wavefunction(&JointStateSpec::one_axis(0.5, 0.2, 0.5, 0.1, 1.0).unwrap(), &grid).unwrap();
        let meta = wavefunction_meta(&psi, "psi.csv");
        let meta2 = parse_wavefunction_meta(serde_json::to_string(&meta).unwrap().as_bytes()).unwrap();
        let back = parse_wavefunction_csv(wavefunction_to_csv(&psi).unwrap().as_bytes(), &meta2).unwrap();
        assert!(back.max_abs_diff(&psi).unwrap() < 1e-11);
    }

    #[test]
    fn density_round_trip() {
        let basis = TruncatedBasis::new(vec![4], JointStateSpec::ground(1, 1.0).unwrap()).unwrap();
        let c = coeffs_from_triples(4, &[(0, 0.6, 0.0), (2, 0.0, 0.8)]).unwrap();
        let rho = DensityMatrix::from_pure(&FockVector::new(basis, c).unwrap()).unwrap();
        let meta = serde_json::to_string(&density_meta(&rho, "rho.csv").unwrap()).unwrap();
        let back = parse_density(meta.as_bytes(), matrix_to_csv(&rho.matrix).unwrap().as_bytes()).unwrap();
        assert!(crate::numerics::max_abs_c(&(&back.matrix - &rho.matrix)) < 1e-11);
        assert!(parse_matrix_csv(b"row,col,re,im\n0,0,1,0\n0,0,1,0\n", 2).is_err());
        assert!(parse_matrix_csv(b"row,col,re,im\n5,0,1,0\n", 2).is_err());
    }

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt_num(std::f64::consts::PI), "3.14159265359e0");
    }
}

//! Deterministic CSV input/output. Floats are written with 17 significant
//! digits so a written field re-read is bit-identical, and nothing
//! wall-clock dependent ever reaches an output file.

use crate::error::Error;
use crate::evolution::{RegionLabel, StepReport};
use crate::grid::{Mesh, ScalarField};
use std::io::Write;
use std::path::Path;

/// Render a float with enough digits for exact round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_monitors(path: &Path, reports: &[StepReport], initial: (f64, [f64; 2])) -> Result<(), Error> {
    let mut out = String::new();
    out.push_str("t,mass1,mass2,energy,dissipation,slack,gap,kkt_max\n");
    let (e0, m0) = initial;
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{}\n",
        fmt_f64(0.0),
        fmt_f64(m0[0]),
        fmt_f64(m0[1]),
        fmt_f64(e0),
        fmt_f64(0.0),
        fmt_f64(0.0),
        fmt_f64(0.0),
        fmt_f64(0.0),
    ));
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.time),
            fmt_f64(r.mass[0]),
            fmt_f64(r.mass[1]),
            fmt_f64(r.energy),
            fmt_f64(r.dissipation),
            fmt_f64(r.slack),
            fmt_f64(r.gap),
            fmt_f64(r.kkt.max_violation),
        ));
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_snapshot(
    path: &Path,
    mesh: &Mesh,
    rho: &[ScalarField; 2],
    eta: &[ScalarField; 2],
    labels: &[RegionLabel],
) -> Result<(), Error> {
    let mut out = String::new();
    if mesh.dim() == 1 {
        out.push_str("x,rho1,rho2,eta1,eta2,region\n");
    } else {
        out.push_str("x,y,rho1,rho2,eta1,eta2,region\n");
    }
    for i in 0..mesh.n_nodes() {
        let p = mesh.node(i);
        if mesh.dim() == 1 {
            out.push_str(&fmt_f64(p[0]));
        } else {
            out.push_str(&format!("{},{}", fmt_f64(p[0]), fmt_f64(p[1])));
        }
        out.push_str(&format!(
            ",{},{},{},{},{}\n",
            fmt_f64(rho[0][i]),
            fmt_f64(rho[1][i]),
            fmt_f64(eta[0][i]),
            fmt_f64(eta[1][i]),
            labels[i].token(),
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Columns of a snapshot read back from disk.
pub struct SnapshotData {
    pub coords: Vec<[f64; 2]>,
    pub rho: [Vec<f64>; 2],
    pub eta: [Vec<f64>; 2],
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotData, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Usage(format!("{} is empty", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    let dim = if cols.get(1) == Some(&"y") { 2 } else { 1 };
    let expect = if dim == 1 { 6 } else { 7 };
    if cols.len() != expect {
        return Err(Error::Usage(format!(
            "unexpected snapshot header '{header}' in {}",
            path.display()
        )));
    }
    let mut data = SnapshotData {
        coords: Vec::new(),
        rho: [Vec::new(), Vec::new()],
        eta: [Vec::new(), Vec::new()],
    };
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expect {
            return Err(Error::Usage(format!(
                "line {} of {} has {} fields, expected {expect}",
                ln + 2,
                path.display(),
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64, Error> {
            s.parse::<f64>()
                .map_err(|_| Error::Usage(format!("bad float '{s}' in {}", path.display())))
        };
        let mut k = 0;
        let x = parse(fields[k])?;
        k += 1;
        let y = if dim == 2 {
            let y = parse(fields[k])?;
            k += 1;
            y
        } else {
            0.0
        };
        data.coords.push([x, y]);
        data.rho[0].push(parse(fields[k])?);
        data.rho[1].push(parse(fields[k + 1])?);
        data.eta[0].push(parse(fields[k + 2])?);
        data.eta[1].push(parse(fields[k + 3])?);
    }
    Ok(data)
}

/// Read a two-species nodal field file: columns x[,y],f1,f2.
pub fn read_field_pair(path: &Path) -> Result<(Vec<[f64; 2]>, [Vec<f64>; 2]), Error> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Usage(format!("{} is empty", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    let dim = if cols.get(1) == Some(&"y") { 2 } else { 1 };
    let expect = dim + 2;
    let mut coords = Vec::new();
    let mut f = [Vec::new(), Vec::new()];
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < expect {
            return Err(Error::Usage(format!(
                "line {} of {} has {} fields, expected at least {expect}",
                ln + 2,
                path.display(),
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64, Error> {
            s.parse::<f64>()
                .map_err(|_| Error::Usage(format!("bad float '{s}' in {}", path.display())))
        };
        let x = parse(fields[0])?;
        let y = if dim == 2 { parse(fields[1])? } else { 0.0 };
        coords.push([x, y]);
        f[0].push(parse(fields[dim])?);
        f[1].push(parse(fields[dim + 1])?);
    }
    Ok((coords, f))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for &v in &[
            0.1,
            1.0 / 3.0,
            std::f64::consts::PI,
            1e-300,
            -2.5e17,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {s} -> {back}");
        }
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        use crate::evolution::region_classify;
        let dir = tempfile::tempdir().unwrap();
        let mesh = Mesh::interval(0.0, 1.0, 5).unwrap();
        let rho = [
            ScalarField::from_fn(&mesh, |p| (p[0] * 7.3).sin().abs()),
            ScalarField::from_fn(&mesh, |p| 1.0 / (1.0 + p[0])),
        ];
        let eta = [
            ScalarField::from_fn(&mesh, |p| p[0] * p[0] - 0.33),
            ScalarField::zeros(6),
        ];
        let labels = region_classify(&rho, 1e-6);
        let path = dir.path().join("snap.csv");
        write_snapshot(&path, &mesh, &rho, &eta, &labels).unwrap();
        let back = read_snapshot(&path).unwrap();
        for i in 0..6 {
            assert_eq!(back.rho[0][i].to_bits(), rho[0][i].to_bits());
            assert_eq!(back.rho[1][i].to_bits(), rho[1][i].to_bits());
            assert_eq!(back.eta[0][i].to_bits(), eta[0][i].to_bits());
            assert_eq!(back.coords[i][0].to_bits(), mesh.node(i)[0].to_bits());
        }
    }
}

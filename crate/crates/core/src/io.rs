//! CSV snapshots, energy logs and archive checksums.

use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::energy::EnergySample;
use crate::error::{Error, Result};
use crate::field::{ScalarBc, ScalarField, VectorBc, VectorField2};
use crate::grid::Grid2D;
use crate::model::State;

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(
        path,
    )?)))
}

/// `x,y,value`, one row per node in storage order.
pub fn write_scalar_snapshot(path: &Path, f: &ScalarField) -> Result<()> {
    let g = f.grid();
    let mut w = writer(path)?;
    w.write_record(["x", "y", "value"])?;
    for j in 0..=g.ny() {
        for i in 0..=g.nx() {
            w.serialize((g.x(i), g.y(j), f.at(i, j)))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `x,y,vx,vy`, one row per node in storage order.
pub fn write_vector_snapshot(path: &Path, f: &VectorField2) -> Result<()> {
    let g = f.grid();
    let mut w = writer(path)?;
    w.write_record(["x", "y", "vx", "vy"])?;
    for j in 0..=g.ny() {
        for i in 0..=g.nx() {
            let (a, b) = f.at(i, j);
            w.serialize((g.x(i), g.y(j), a, b))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_columns(path: &Path, grid: &Grid2D, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut cols = vec![Vec::with_capacity(grid.node_count()); width - 2];
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Archive(format!(
                "{}: row {} has {} columns, expected {width}",
                path.display(),
                k + 1,
                rec.len()
            )));
        }
        let (i, j) = (k % grid.row_len(), k / grid.row_len());
        if j > grid.ny() {
            return Err(Error::Archive(format!(
                "{}: more rows than grid nodes",
                path.display()
            )));
        }
        let parse = |c: usize| -> Result<f64> {
            rec[c].trim().parse().map_err(|_| {
                Error::Archive(format!(
                    "{}: bad number {:?} in row {}",
                    path.display(),
                    &rec[c],
                    k + 1
                ))
            })
        };
        if (parse(0)? - grid.x(i)).abs() > 1e-9 * grid.lx()
            || (parse(1)? - grid.y(j)).abs() > 1e-9 * grid.ly()
        {
            return Err(Error::GridMismatch(format!(
                "{}: row {} is not at node ({i}, {j})",
                path.display(),
                k + 1
            )));
        }
        for (c, col) in cols.iter_mut().enumerate() {
            col.push(parse(c + 2)?);
        }
    }
    if cols[0].len() != grid.node_count() {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            found: cols[0].len(),
        });
    }
    Ok(cols)
}

pub fn read_scalar_snapshot(path: &Path, grid: Grid2D, bc: ScalarBc) -> Result<ScalarField> {
    let mut cols = read_columns(path, &grid, 3)?;
    ScalarField::from_values(grid, cols.remove(0), bc)
}

pub fn read_vector_snapshot(path: &Path, grid: Grid2D, bc: VectorBc) -> Result<VectorField2> {
    let mut cols = read_columns(path, &grid, 4)?;
    let uy = cols.remove(1);
    VectorField2::from_components(grid, cols.remove(0), uy, bc)
}

/// Writes `u.csv`, `ut.csv` and `h.csv` of a state into `dir`.
pub fn write_state(dir: &Path, state: &State) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_vector_snapshot(&dir.join("u.csv"), &state.u)?;
    write_vector_snapshot(&dir.join("ut.csv"), &state.ut)?;
    write_scalar_snapshot(&dir.join("h.csv"), &state.h)
}

pub fn read_state(dir: &Path, grid: Grid2D, t: f64) -> Result<State> {
    State::new(
        read_vector_snapshot(&dir.join("u.csv"), grid, VectorBc::DirichletZero)?,
        read_vector_snapshot(&dir.join("ut.csv"), grid, VectorBc::DirichletZero)?,
        read_scalar_snapshot(&dir.join("h.csv"), grid, ScalarBc::Neumann)?,
        t,
    )
}

pub fn write_energy_csv(path: &Path, rows: &[EnergySample]) -> Result<()> {
    let mut w = writer(path)?;
    if rows.is_empty() {
        w.write_record(EnergySample::CSV_HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergySample>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != EnergySample::CSV_HEADER {
        return Err(Error::Archive(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header.join(",")
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Hex SHA-256 of a file.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    Ok(hex::encode(Sha256::digest(&buf)))
}

pub fn write_json<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

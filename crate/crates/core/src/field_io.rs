//! Field export: CSV with one row per node and legacy VTK structured
//! points. Values are written with 17 significant digits so they read back
//! bit-identically.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{KgmError, Result};
use crate::grid::{Domain, ScalarField};

const AXES: [&str; 3] = ["x", "y", "z"];

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_fields(fields: &[(&str, &ScalarField)]) -> Result<Domain> {
    let (_, first) = fields.first().ok_or_else(|| KgmError::Config("no fields to write".into()))?;
    let d = first.domain().clone();
    for (name, f) in fields {
        d.check_same(f.domain(), name)?;
        if name.is_empty() || name.contains([',', ' ', '\n']) {
            return Err(KgmError::Config(format!("invalid field name {name:?}")));
        }
    }
    Ok(d)
}

/// CSV text: header `x,y[,z],name...`, then every node in storage order.
pub fn csv_string(fields: &[(&str, &ScalarField)]) -> Result<String> {
    let d = check_fields(fields)?;
    let mut out = String::new();
    let header: Vec<&str> = AXES[..d.dim()].iter().copied().chain(fields.iter().map(|(n, _)| *n)).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..d.num_nodes() {
        let x = d.coords(i);
        let row: Vec<String> = x[..d.dim()].iter().map(|v| num(*v)).chain(fields.iter().map(|(_, f)| num(f.get(i)))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv(path: &Path, fields: &[(&str, &ScalarField)]) -> Result<()> {
    fs::write(path, csv_string(fields)?)?;
    Ok(())
}

/// Parses CSV written by [`write_csv`] back onto `d`.
pub fn read_csv(path: &Path, d: &Domain) -> Result<Vec<(String, ScalarField)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| KgmError::Parse("empty csv".into()))?.split(',').collect();
    let dim = d.dim();
    if header.len() <= dim || header[..dim] != AXES[..dim] {
        return Err(KgmError::Parse(format!("unexpected csv header {header:?}")));
    }
    let names: Vec<String> = header[dim..].iter().map(|s| s.to_string()).collect();
    let mut cols = vec![Vec::with_capacity(d.num_nodes()); names.len()];
    for (row, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(KgmError::Parse(format!("row {row} has {} cells", cells.len())));
        }
        for (k, cell) in cells[dim..].iter().enumerate() {
            cols[k].push(cell.parse::<f64>().map_err(|e| KgmError::Parse(format!("row {row}: {e}")))?);
        }
    }
    names
        .into_iter()
        .zip(cols)
        .map(|(n, c)| Ok((n, ScalarField::from_values(d, c)?)))
        .collect()
}

/// Legacy VTK `STRUCTURED_POINTS` text with one `SCALARS` block per field.
pub fn vtk_string(fields: &[(&str, &ScalarField)], title: &str) -> Result<String> {
    let d = check_fields(fields)?;
    let mut dims = [1usize; 3];
    let mut spacing = [1.0f64; 3];
    dims[..d.dim()].copy_from_slice(d.full_dims());
    spacing[..d.dim()].copy_from_slice(d.spacing());
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{}", title.replace('\n', " "));
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(out, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2]);
    let _ = writeln!(out, "ORIGIN 0 0 0");
    let _ = writeln!(out, "SPACING {} {} {}", num(spacing[0]), num(spacing[1]), num(spacing[2]));
    let _ = writeln!(out, "POINT_DATA {}", d.num_nodes());
    for (name, f) in fields {
        let _ = writeln!(out, "SCALARS {name} double 1");
        let _ = writeln!(out, "LOOKUP_TABLE default");
        for v in f.values() {
            let _ = writeln!(out, "{}", num(*v));
        }
    }
    Ok(out)
}

pub fn write_vtk(path: &Path, fields: &[(&str, &ScalarField)], title: &str) -> Result<()> {
    fs::write(path, vtk_string(fields, title)?)?;
    Ok(())
}

/// Parses the `SCALARS` blocks of a file written by [`write_vtk`].
pub fn read_vtk(path: &Path, d: &Domain) -> Result<Vec<(String, ScalarField)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let mut out = Vec::new();
    while let Some(line) = lines.next() {
        let Some(rest) = line.strip_prefix("SCALARS ") else { continue };
        let name = rest.split_whitespace().next().unwrap_or_default().to_string();
        if lines.next() != Some("LOOKUP_TABLE default") {
            return Err(KgmError::Parse(format!("missing lookup table for {name}")));
        }
        let mut vals = Vec::with_capacity(d.num_nodes());
        for _ in 0..d.num_nodes() {
            let l = lines.next().ok_or_else(|| KgmError::Parse(format!("truncated block {name}")))?;
            vals.push(l.trim().parse::<f64>().map_err(|e| KgmError::Parse(format!("{name}: {e}")))?);
        }
        out.push((name, ScalarField::from_values(d, vals)?));
    }
    Ok(out)
}

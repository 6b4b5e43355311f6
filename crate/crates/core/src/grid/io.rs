//! Binary field dumps: one JSON header line followed by `nx * ny`
//! little-endian f64 values in row-major order (`x1` fastest), NaN at exterior
//! nodes.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HalfDiskGrid, ScalarField};
use crate::error::{Error, Result};

pub const DUMP_FORMAT: &str = "freebound-field";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub format: String,
    pub version: u32,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// `[x1_min, x1_max, x2_min, x2_max]`.
    pub domain_box: [f64; 4],
    pub byte_order: String,
    pub value_count: usize,
}

pub fn write_field_dump(u: &ScalarField, path: &Path) -> Result<()> {
    let g = u.grid();
    let header = DumpHeader {
        format: DUMP_FORMAT.into(),
        version: 1,
        nx: g.nx(),
        ny: g.ny(),
        h: g.h(),
        domain_box: [-1.0, 1.0, 0.0, 1.0],
        byte_order: "little-endian".into(),
        value_count: g.len(),
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for v in u.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_field_dump(path: &Path) -> Result<ScalarField> {
    let mut input = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: DumpHeader = serde_json::from_str(line.trim_end())?;
    if header.format != DUMP_FORMAT || header.byte_order != "little-endian" {
        return Err(Error::validation("dump.header", "unsupported format"));
    }
    let grid = HalfDiskGrid::with_cells(header.ny.saturating_sub(1))?;
    if grid.nx() != header.nx || header.value_count != grid.len() {
        return Err(Error::validation("dump.header", "inconsistent grid size"));
    }
    let mut bytes = vec![0u8; 8 * header.value_count];
    input.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarField::new(grid, values)
}

/// `x1,x2,value` rows for the non-exterior nodes.
pub fn write_field_csv(u: &ScalarField, path: &Path) -> Result<()> {
    let g = u.grid();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x1", "x2", "value"])?;
    for k in (0..g.len()).filter(|&k| g.has_value(k)) {
        let p = g.point(k);
        w.write_record(&[p[0].to_string(), p[1].to_string(), u.at(k).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip_is_bitwise() {
        let g = HalfDiskGrid::new(1.0 / 16.0).unwrap();
        let u = ScalarField::from_fn(g, |p| (p[0] * 3.1).sin() * p[1]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bin");
        write_field_dump(&u, &path).unwrap();
        let back = read_field_dump(&path).unwrap();
        assert_eq!(u, back);
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let g = HalfDiskGrid::new(0.25).unwrap();
        let u = ScalarField::zeros(g.clone());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        write_field_csv(&u, &path).unwrap();
        let rows = csv::Reader::from_path(&path).unwrap().records().count();
        assert_eq!(rows, (0..g.len()).filter(|&k| g.has_value(k)).count());
    }
}

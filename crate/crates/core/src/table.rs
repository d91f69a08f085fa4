//! CSV emission of solution tables and shot classifications.
//!
//! The solution table carries the trajectory together with both envelope
//! bands, one row per grid point, header exactly
//! `z,K,Kprime,B_lower,B_upper,C_upper`. Values are written with 17
//! significant digits so a read-back reproduces the in-memory doubles
//! bit-for-bit.

use crate::error::{Error, Result};
use crate::hjb::{Envelopes, KSolution, ShotKind};
use std::io::Write;
use std::path::Path;

pub const K_TABLE_HEADER: &str = "z,K,Kprime,B_lower,B_upper,C_upper";

/// One row of the solution table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KTableRow {
    pub z: f64,
    pub k: f64,
    pub kprime: f64,
    pub b_lower: f64,
    pub b_upper: f64,
    pub c_upper: f64,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn k_table_rows(sol: &KSolution, env: &Envelopes) -> Vec<KTableRow> {
    sol.grid
        .iter()
        .zip(sol.k_values.iter())
        .zip(sol.kprime_values.iter())
        .map(|((&z, &k), &kp)| KTableRow {
            z,
            k,
            kprime: kp,
            b_lower: env.b_lower(z),
            b_upper: env.b_upper(z),
            c_upper: env.c_upper(z, k),
        })
        .collect()
}

pub fn write_k_table(path: &Path, sol: &KSolution, env: &Envelopes) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{K_TABLE_HEADER}")?;
    for row in k_table_rows(sol, env) {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt(row.z),
            fmt(row.k),
            fmt(row.kprime),
            fmt(row.b_lower),
            fmt(row.b_upper),
            fmt(row.c_upper)
        )?;
    }
    Ok(())
}

pub fn read_k_table(path: &Path) -> Result<Vec<KTableRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == K_TABLE_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "bad table header in {}: {other:?}",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(Error::Config(format!(
                "row {}: expected 6 columns, got {}",
                idx + 2,
                cols.len()
            )));
        }
        let mut vals = [0.0f64; 6];
        for (v, c) in vals.iter_mut().zip(cols.iter()) {
            *v = c.parse::<f64>().map_err(|_| {
                Error::Config(format!("row {}: bad number {c:?}", idx + 2))
            })?;
        }
        rows.push(KTableRow {
            z: vals[0],
            k: vals[1],
            kprime: vals[2],
            b_lower: vals[3],
            b_upper: vals[4],
            c_upper: vals[5],
        });
    }
    Ok(rows)
}

/// Classification summary for a sweep over candidate boundaries: one row per
/// candidate with its outcome and event location.
pub fn write_classification(path: &Path, rows: &[(f64, ShotKind, f64)]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "z_star,classification,z_event")?;
    for (z_star, kind, z_event) in rows {
        writeln!(out, "{},{},{}", fmt(*z_star), kind.as_str(), fmt(*z_event))?;
    }
    Ok(())
}

/// Key=value summary lines, one per pair.
pub fn write_summary(path: &Path, pairs: &[(&str, String)]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (k, v) in pairs {
        writeln!(out, "{k}={v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::integrate_shot;
    use crate::model::ModelParams;

    #[test]
    fn table_round_trips_bit_for_bit() {
        let p = ModelParams::new(1.0, 1.0, 0.5, 0.5, 2.0, 1.0 / 3.0).unwrap();
        let sol = integrate_shot(&p, 1.0, 5.0, 1e-10).unwrap();
        let env = Envelopes::new(&p);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k_table.csv");
        write_k_table(&path, &sol, &env).unwrap();
        let rows = read_k_table(&path).unwrap();
        assert_eq!(rows.len(), sol.grid.len());
        for (row, ((&z, &k), &kp)) in rows.iter().zip(
            sol.grid
                .iter()
                .zip(sol.k_values.iter())
                .zip(sol.kprime_values.iter()),
        ) {
            assert_eq!(row.z.to_bits(), z.to_bits());
            assert_eq!(row.k.to_bits(), k.to_bits());
            assert_eq!(row.kprime.to_bits(), kp.to_bits());
            assert_eq!(row.b_lower.to_bits(), env.b_lower(z).to_bits());
        }
    }

    #[test]
    fn classification_csv_handles_empty_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("classification.csv");
        write_classification(&path, &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "z_star,classification,z_event\n");
    }

    #[test]
    fn bad_tables_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "nope\n").unwrap();
        assert!(read_k_table(&path).is_err());
        std::fs::write(&path, format!("{K_TABLE_HEADER}\n1,2,3\n")).unwrap();
        assert!(read_k_table(&path).is_err());
        std::fs::write(&path, format!("{K_TABLE_HEADER}\n1,2,3,4,5,x\n")).unwrap();
        assert!(read_k_table(&path).is_err());
    }
}

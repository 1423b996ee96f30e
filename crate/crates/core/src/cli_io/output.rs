use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::solver::Trajectory;

/// Reals in CSV output: 17 significant digits, so values re-read exactly.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Builds CSV text with a fixed header.
pub struct CsvTable {
    text: String,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn reals(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| fmt_real(*v)).collect();
        self.row(&cells);
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.text)?;
        Ok(())
    }
}

/// `t` and the four built-in observables, one row per saved sample.
pub fn trajectory_csv(traj: &Trajectory) -> CsvTable {
    let mut table = CsvTable::new(&["t", "h_norm_sq", "mode_1", "point", "sup_abs"]);
    let o = &traj.observables;
    for (k, f) in traj.samples.iter().enumerate() {
        table.reals(&[f.t, o.h_norm_sq[k], o.mode_1[k], o.point[k], o.sup_abs[k]]);
    }
    table
}

/// Binary profile dump, little-endian:
///
/// * header: `n_cells: u32`, `n_samples: u32`
/// * then `n_samples` rows of `n_cells` `f64`: the time followed by the
///   `n_cells - 1` interior values.
pub fn write_profiles(traj: &Trajectory, path: &Path) -> Result<()> {
    let grid = traj.grid();
    let mut buf = Vec::with_capacity(8 + traj.samples.len() * grid.n_cells() * 8);
    buf.extend_from_slice(&(grid.n_cells() as u32).to_le_bytes());
    buf.extend_from_slice(&(traj.samples.len() as u32).to_le_bytes());
    for f in &traj.samples {
        buf.extend_from_slice(&f.t.to_le_bytes());
        for v in &f.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Reads a dump written by [`write_profiles`]: `(n_cells, rows)`.
pub fn read_profiles(path: &Path) -> Result<(u32, Vec<Vec<f64>>)> {
    let bytes = std::fs::read(path)?;
    let bad = || crate::error::SpdeError::config(format!("{} is not a profile dump", path.display()));
    if bytes.len() < 8 {
        return Err(bad());
    }
    let n_cells = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes"));
    let n_samples = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let row_len = n_cells as usize;
    if bytes.len() != 8 + 8 * row_len * n_samples as usize {
        return Err(bad());
    }
    let rows = bytes[8..]
        .chunks_exact(8 * row_len)
        .map(|row| row.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect())
        .collect();
    Ok((n_cells, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_through_text() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_real(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.reals(&[1.0, 2.0]);
        assert_eq!(t.as_str(), "a,b\n1.0000000000000000e0,2.0000000000000000e0\n");
    }
}

//! Field CSV: a `# n=<n> N=<N> L=<L>` header, then one row per node in
//! row-major order holding the coordinates followed by the value, all with
//! 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn field_to_csv(f: &Field) -> String {
    let g = f.grid();
    let mut out = String::new();
    let _ = writeln!(out, "# n={} N={} L={}", g.dim(), g.points_per_axis(), fmt17(g.half_width()));
    let coords = g.node_coordinates();
    for (x, v) in coords.chunks(g.dim()).zip(f.values()) {
        for c in x {
            out.push_str(&fmt17(*c));
            out.push(',');
        }
        out.push_str(&fmt17(*v));
        out.push('\n');
    }
    out
}

pub fn field_from_csv(text: &str) -> Result<Field> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("missing '#' header".into()))?;
    let (mut n, mut points, mut half) = (None, None, None);
    for tok in header.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| Error::Parse(format!("bad header token {tok}")))?;
        match k {
            "n" => n = v.parse::<usize>().ok(),
            "N" => points = v.parse::<usize>().ok(),
            "L" => half = v.parse::<f64>().ok(),
            _ => return Err(Error::Parse(format!("unknown header key {k}"))),
        }
    }
    let (n, points, half) = match (n, points, half) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::Parse("header must carry n, N and L".into())),
    };
    let grid = Grid::new(n, points, half)?;
    let mut values = Vec::with_capacity(grid.len());
    for (row, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != n + 1 {
            return Err(Error::Parse(format!("row {row}: expected {} columns", n + 1)));
        }
        let v = cols[n]
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        values.push(v);
    }
    Field::new(grid, values)
}

pub fn write_field_csv(path: &Path, f: &Field) -> Result<()> {
    std::fs::write(path, field_to_csv(f))?;
    Ok(())
}

pub fn read_field_csv(path: &Path) -> Result<Field> {
    field_from_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn header_and_row_layout() {
        let g = make_grid(2, 4, 1.0).unwrap();
        let f = Field::from_fn(g, |x| x[0] + 10.0 * x[1]);
        let text = field_to_csv(&f);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# n=2 N=4 L=1.0000000000000000e0");
        assert_eq!(
            lines.next().unwrap(),
            "-1.0000000000000000e0,-1.0000000000000000e0,-1.1000000000000000e1"
        );
        // second row advances the last axis
        assert!(lines.next().unwrap().starts_with("-1.0000000000000000e0,-5.0000000000000000e-1,"));
        assert_eq!(text.lines().count(), 17);
    }

    #[test]
    fn parse_recovers_values_exactly() {
        let g = make_grid(1, 16, 2.5).unwrap();
        let f = Field::from_fn(g, |x| (x[0] * 1.1).sin() / 3.0);
        let back = field_from_csv(&field_to_csv(&f)).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(field_from_csv("").is_err());
        assert!(field_from_csv("n=1 N=4 L=1\n").is_err());
        assert!(field_from_csv("# n=1 N=4 L=1\n0,1\n").is_err());
        assert!(field_from_csv("# n=1 N=4\n").is_err());
    }
}

//! CSV field dumps: header `i,j,x,y,value`, one row per grid point, values
//! with 17 significant digits so a dump parses back bit for bit.

use std::io::{Read, Write};

use gfdprop_core::{Field, Grid};

/// Where on the C-grid a field lives; sets the x, y columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stagger {
    Center,
    XFace,
    YFace,
}

impl Stagger {
    fn coords(self, grid: &Grid, i: usize, j: usize) -> (f64, f64) {
        match self {
            Stagger::Center => (grid.x_center(i), grid.y_center(j)),
            Stagger::XFace => (grid.x_face(i), grid.y_center(j)),
            Stagger::YFace => (grid.x_center(i), grid.y_face(j)),
        }
    }
}

pub fn write_csv<W: Write>(out: W, field: &Field, grid: &Grid, at: Stagger) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "x", "y", "value"])?;
    for i in 0..field.nx() {
        for j in 0..field.ny() {
            let (x, y) = at.coords(grid, i, j);
            w.write_record([
                i.to_string(),
                j.to_string(),
                format!("{x:.16e}"),
                format!("{y:.16e}"),
                format!("{:.16e}", field[(i, j)]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses a dump back into a field. The shape is taken from the largest
/// indices; every (i, j) must appear exactly once.
pub fn read_csv<R: Read>(input: R) -> Result<Field, String> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().collect::<Vec<_>>() != ["i", "j", "x", "y", "value"] {
        return Err(format!("unexpected header {headers:?}"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let parse_idx = |k: usize| rec[k].parse::<usize>().map_err(|e| format!("row {}: {e}", rows.len() + 1));
        let (i, j) = (parse_idx(0)?, parse_idx(1)?);
        let value: f64 = rec[4].parse().map_err(|e| format!("row {}: {e}", rows.len() + 1))?;
        rows.push((i, j, value));
    }
    let nx = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let ny = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    if rows.len() != nx * ny {
        return Err(format!("{} rows for a {nx}x{ny} field", rows.len()));
    }
    let mut field = Field::zeros(nx, ny);
    let mut seen = vec![false; nx * ny];
    for (i, j, value) in rows {
        if std::mem::replace(&mut seen[i * ny + j], true) {
            return Err(format!("duplicate entry ({i}, {j})"));
        }
        field[(i, j)] = value;
    }
    Ok(field)
}

//! Field snapshots: a `dim,n,L` header followed by one value per line in
//! canonical index order. Values are written with 17 significant digits,
//! so a write/read cycle is bit-exact.

use nonlocal_core::grid::{Field, GridSpec};
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

pub fn write_field(path: &Path, field: &Field) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    render_field(&mut out, field)
}

pub fn render_field(out: &mut impl Write, field: &Field) -> io::Result<()> {
    let grid = field.grid();
    writeln!(
        out,
        "{},{},{}",
        grid.dim(),
        grid.points_per_axis(),
        crate::json::format_float(grid.half_width())
    )?;
    for v in field.values() {
        writeln!(out, "{}", crate::json::format_float(*v))?;
    }
    Ok(())
}

pub fn read_field(path: &Path) -> io::Result<Field> {
    let file = std::fs::File::open(path)?;
    let mut lines = io::BufReader::new(file).lines();
    let header = lines.next().ok_or_else(|| bad("empty snapshot file"))??;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 3 {
        return Err(bad("snapshot header must be `dim,n,L`"));
    }
    let dim: usize = parts[0].trim().parse().map_err(|_| bad("bad dim"))?;
    let n: usize = parts[1].trim().parse().map_err(|_| bad("bad n"))?;
    let l: f64 = parts[2].trim().parse().map_err(|_| bad("bad L"))?;
    let grid = GridSpec::new(dim, l, n).map_err(|e| bad(&e.to_string()))?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        values.push(line.parse::<f64>().map_err(|_| bad("bad value"))?);
    }
    Field::new(grid, values).map_err(|e| bad(&e.to_string()))
}

fn bad(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nonlocal_core::rng::Rng;

    #[test]
    fn snapshot_roundtrip_is_bit_exact() {
        let grid = GridSpec::new(2, 3.5, 16).unwrap();
        let mut rng = Rng::new(77);
        let field = Field::from_fn(grid, |_| rng.range(-1.0, 1.0) * 1e3).unwrap();
        let dir = std::env::temp_dir().join("nonlocal_lab_field_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("snap.csv");
        write_field(&path, &field).unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(back.grid(), grid);
        for (a, b) in field.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}

//! Field CSV format.
//!
//! ```text
//! # field=<name> mode=<mode> R=<half width> h=<spacing>
//! x,<name>            (1D / radial: x is the radius in radial mode)
//! x,y,<name>          (cartesian2d)
//! ```
//! followed by one row per interior node. Values are written with the
//! shortest round-trip representation, so reading reproduces them exactly.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::discretization::field::Field;
use crate::discretization::grid::{Grid, GridMode};
use crate::error::{Error, Result};

pub fn write_field<W: Write>(out: &mut W, grid: &Grid, name: &str, field: &Field) -> Result<()> {
    grid.check(field.grid_id())?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "# field={name} mode={} R={} h={}",
        grid.mode(),
        grid.half_width(),
        grid.spacing()
    );
    match grid.mode() {
        GridMode::Cartesian2d => {
            let _ = writeln!(text, "x,y,{name}");
        }
        _ => {
            let _ = writeln!(text, "x,{name}");
        }
    }
    for (node, v) in grid.nodes().zip(field.values()) {
        match grid.mode() {
            GridMode::Cartesian2d => {
                let _ = writeln!(text, "{},{},{}", node.coords[0], node.coords[1], v);
            }
            _ => {
                let _ = writeln!(text, "{},{}", node.coords[0], v);
            }
        }
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn field_to_csv(grid: &Grid, name: &str, field: &Field) -> Result<String> {
    let mut buf = Vec::new();
    write_field(&mut buf, grid, name, field)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// Reads a field and reconstructs its grid from the header line.
pub fn read_field<R: BufRead>(input: R) -> Result<(Grid, String, Field)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty field file".into()))??;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("missing `#` header line".into()))?;
    let mut name = None;
    let mut mode = None;
    let mut half_width = None;
    let mut spacing = None;
    for token in header.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header token `{token}`")))?;
        match key {
            "field" => name = Some(value.to_string()),
            "mode" => mode = Some(GridMode::parse(value)?),
            "R" => half_width = Some(parse_number(value)?),
            "h" => spacing = Some(parse_number(value)?),
            _ => return Err(Error::Parse(format!("unknown header key `{key}`"))),
        }
    }
    let missing = |what: &str| Error::Parse(format!("header lacks `{what}`"));
    let name = name.ok_or_else(|| missing("field"))?;
    let grid = Grid::new(
        mode.ok_or_else(|| missing("mode"))?,
        half_width.ok_or_else(|| missing("R"))?,
        spacing.ok_or_else(|| missing("h"))?,
    )?;
    let _columns = lines
        .next()
        .ok_or_else(|| Error::Parse("missing column header".into()))??;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let last = line
            .rsplit(',')
            .next()
            .ok_or_else(|| Error::Parse(format!("bad row `{line}`")))?;
        values.push(parse_number(last)?);
    }
    let field = Field::from_values(&grid, values)?;
    Ok((grid, name, field))
}

fn parse_number(text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("`{text}`: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        for mode in [
            GridMode::Cartesian1d,
            GridMode::Cartesian2d,
            GridMode::Radial { dim: 3 },
        ] {
            let g = Grid::new(mode, 1.5, 0.1).unwrap();
            let f = Field::from_fn(&g, |n| {
                (n.coords[0] * 3.1).sin() / (1.0 + n.radius) + 1e-300
            });
            let text = field_to_csv(&g, "u2", &f).unwrap();
            assert!(text.starts_with("# field=u2 mode="));
            let (g2, name, f2) = read_field(text.as_bytes()).unwrap();
            assert_eq!(name, "u2");
            assert_eq!(g2, g);
            assert_eq!(f2, f);
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let g = Grid::new(GridMode::Cartesian1d, 1.0, 0.1).unwrap();
        let text = field_to_csv(&g, "u", &Field::zeros(&g)).unwrap();
        let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(read_field(cut.as_bytes()).is_err());
        assert!(read_field("x,u\n1,2\n".as_bytes()).is_err());
    }
}

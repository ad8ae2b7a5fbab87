//! Plain-text and image outputs: fixed-format CSV and 8-bit graymaps.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::field::ScalarField2D;

/// Nine significant digits in scientific notation; stable across platforms.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.8e}")
    }
}

/// Comma-separated table with a header row and `\n` line endings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// One CSV cell.
pub enum Cell<'a> {
    Num(f64),
    Int(i64),
    Text(&'a str),
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: &[Cell]) {
        assert_eq!(
            cells.len(),
            self.header.len(),
            "row width must match the header"
        );
        self.rows.push(
            cells
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => fmt_num(*v),
                    Cell::Int(v) => v.to_string(),
                    Cell::Text(s) => s.to_string(),
                })
                .collect(),
        );
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// Binary PGM (P5) with linear min-max scaling to 0..255; a constant field maps to 0.
pub fn encode_pgm(field: &ScalarField2D) -> Vec<u8> {
    let (lo, hi) = (field.min(), field.max());
    let span = hi - lo;
    let mut out = format!("P5\n{} {}\n255\n", field.width(), field.height()).into_bytes();
    out.extend(field.values().iter().map(|&v| {
        if span > 0.0 {
            ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    out
}

pub fn write_pgm(path: impl AsRef<Path>, field: &ScalarField2D) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_pgm(field))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.0), "0.00000000e0");
        assert_eq!(fmt_num(-0.226), "-2.26000000e-1");
        assert_eq!(fmt_num(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(fmt_num(f64::NAN), "nan");
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["a", "b", "c"]);
        c.push(&[Cell::Num(1.5), Cell::Int(3), Cell::Text("tie")]);
        assert_eq!(c.render(), "a,b,c\n1.50000000e0,3,tie\n");
    }

    #[test]
    fn pgm_scaling() {
        let g = Grid::square(8, 1.0).unwrap();
        let f = ScalarField2D::from_fn(g, |r, _| r as f64).unwrap();
        let b = encode_pgm(&f);
        let hdr = b"P5\n8 8\n255\n".len();
        assert_eq!(b.len(), hdr + 64);
        assert_eq!(b[hdr], 0);
        assert_eq!(b[hdr + 63], 255);
    }
}

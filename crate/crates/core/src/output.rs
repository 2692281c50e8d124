//! File formats: CSV tables, plain (P2) graymaps and run manifests.
//!
//! CSV files have a header row, comma separators, `.` decimals and `\n`
//! line ends. Floats use the shortest representation that parses back to
//! the same value, so rerunning a manifest reproduces files byte for byte.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{PopulationRow, Rho0Row, RuleRow, SweepRow};
use crate::fitting::{FitFamily, FitResult};
use crate::lattice::{Lattice, Strategy};
use crate::meanfield::MeanFieldState;

/// Gray level of a cooperator pixel; defectors are 0.
pub const PGM_MAXVAL: u8 = 255;

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// A header plus string rows, written as CSV.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Density per round, `t,rho`.
    pub fn series(series: &[f64]) -> Self {
        let mut table = Table::new(&["t", "rho"]);
        for (t, rho) in series.iter().enumerate() {
            table.push(vec![t.to_string(), num(*rho)]);
        }
        table
    }

    pub fn meanfield(states: &[MeanFieldState]) -> Self {
        let mut table = Table::new(&["t", "rho"]);
        for s in states {
            table.push(vec![num(s.t), num(s.rho)]);
        }
        table
    }

    /// `b,rho_mean,rho_sd,U_C,U_D`; a return is empty when that strategy
    /// died out in every replicate.
    pub fn sweep(rows: &[SweepRow]) -> Self {
        let mut table = Table::new(&["b", "rho_mean", "rho_sd", "U_C", "U_D"]);
        for r in rows {
            table.push(vec![
                num(r.b),
                num(r.stats.rho_mean),
                num(r.stats.rho_stddev),
                opt(r.stats.avg_return_c),
                opt(r.stats.avg_return_d),
            ]);
        }
        table
    }

    pub fn rho0(rows: &[Rho0Row]) -> Self {
        let mut table = Table::new(&["rho0", "rho_mean", "rho_sd"]);
        for r in rows {
            table.push(vec![
                num(r.rho0),
                num(r.stats.rho_mean),
                num(r.stats.rho_stddev),
            ]);
        }
        table
    }

    pub fn population(rows: &[PopulationRow]) -> Self {
        let mut table = Table::new(&["L", "N", "rho_mean", "rho_sd"]);
        for r in rows {
            table.push(vec![
                r.side.to_string(),
                r.population.to_string(),
                num(r.stats.rho_mean),
                num(r.stats.rho_stddev),
            ]);
        }
        table
    }

    pub fn rules(rows: &[RuleRow]) -> Self {
        let mut table = Table::new(&["rule", "rho_mean", "rho_sd", "rho_se"]);
        for r in rows {
            table.push(vec![
                r.rule.name().to_string(),
                num(r.stats.rho_mean),
                num(r.stats.rho_stddev),
                num(r.stats.standard_error()),
            ]);
        }
        table
    }

    /// `family,parameters,rmse,R` with parameters as `name=value` pairs
    /// joined by `;`. Failed fits keep their row with the error message.
    pub fn fit_report(rows: &[(FitFamily, Result<FitResult>)]) -> Self {
        let mut table = Table::new(&["family", "parameters", "rmse", "R"]);
        for (family, fit) in rows {
            match fit {
                Ok(fit) => table.push(vec![
                    family.name().to_string(),
                    fit.model.to_string(),
                    num(fit.rmse),
                    opt(fit.goodness),
                ]),
                Err(e) => table.push(vec![
                    family.name().to_string(),
                    format!("error: {e}"),
                    String::new(),
                    String::new(),
                ]),
            }
        }
        table
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        writer.write_record(&self.header)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(fs::File::create(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV fields are UTF-8")
    }
}

/// Reads `(x, y)` pairs from a sweep CSV, taking the `b` and `rho_mean`
/// columns when present and the first two columns otherwise.
pub fn read_xy(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let (xi, yi) = match (find("b"), find("rho_mean")) {
        (Some(x), Some(y)) => (x, y),
        _ if header.len() >= 2 => (0, 1),
        _ => {
            return Err(Error::InvalidInput(format!(
                "{} needs at least two columns",
                path.display()
            )))
        }
    };
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let field = |k: usize| -> Result<f64> {
            let text = record.get(k).unwrap_or("").trim();
            text.parse().map_err(|_| Error::Malformed {
                line: i + 2,
                text: record.iter().collect::<Vec<_>>().join(","),
            })
        };
        xs.push(field(xi)?);
        ys.push(field(yi)?);
    }
    Ok((xs, ys))
}

/// Writes the lattice as a plain graymap, cooperators white.
pub fn write_pgm<W: Write>(mut out: W, lattice: &Lattice) -> Result<()> {
    let side = lattice.side();
    writeln!(out, "P2")?;
    writeln!(out, "{side} {side}")?;
    writeln!(out, "{PGM_MAXVAL}")?;
    // Plain PGM lines are kept within 70 characters.
    for row in lattice.cells().chunks(side) {
        let mut width = 0;
        for (k, cell) in row.iter().enumerate() {
            let value = if cell.is_cooperator() { "255" } else { "0" };
            if k > 0 {
                if width + 1 + value.len() > 70 {
                    writeln!(out)?;
                    width = 0;
                } else {
                    write!(out, " ")?;
                    width += 1;
                }
            }
            write!(out, "{value}")?;
            width += value.len();
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_pgm(path: &Path, lattice: &Lattice) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    write_pgm(&mut file, lattice)?;
    file.flush()?;
    Ok(())
}

/// Parses a square plain graymap; pixels at or above half of maxval are
/// cooperators.
pub fn read_pgm<R: BufRead>(input: R) -> Result<Lattice> {
    let mut tokens = Vec::new();
    for line in input.lines() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("");
        tokens.extend(content.split_whitespace().map(str::to_string));
    }
    let bad = |what: &str| Error::InvalidInput(format!("PGM: {what}"));
    let mut it = tokens.into_iter();
    if it.next().as_deref() != Some("P2") {
        return Err(bad("missing P2 magic"));
    }
    let mut number = |what: &str| -> Result<usize> {
        it.next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(what))
    };
    let (w, h, maxval) = (number("width")?, number("height")?, number("maxval")?);
    if w != h {
        return Err(bad("lattice snapshots are square"));
    }
    let cells = (0..w * h)
        .map(|_| {
            number("pixel").map(|v| {
                if 2 * v >= maxval {
                    Strategy::Cooperate
                } else {
                    Strategy::Defect
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Lattice::from_cells(w, cells)
}

pub fn load_pgm(path: &Path) -> Result<Lattice> {
    read_pgm(BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Pattern;

    #[test]
    fn series_csv_layout() {
        let text = Table::series(&[0.5, 0.25, 1.0]).to_csv_string();
        assert_eq!(text, "t,rho\n0,0.5\n1,0.25\n2,1\n");
    }

    #[test]
    fn floats_round_trip() {
        let x = 0.1 + 0.2;
        let text = Table::series(&[x]).to_csv_string();
        let parsed: f64 = text
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(parsed.to_bits(), x.to_bits());
    }

    #[test]
    fn pgm_layout() {
        let mut lattice = Lattice::uniform(3, Strategy::Cooperate).unwrap();
        lattice.set(1, 2, Strategy::Defect);
        let mut buf = Vec::new();
        write_pgm(&mut buf, &lattice).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "P2\n3 3\n255\n255 255 255\n255 255 0\n255 255 255\n"
        );
    }

    #[test]
    fn pgm_round_trip_and_line_width() {
        let lattice = Lattice::new(40, Pattern::Bernoulli(0.5), 3).unwrap();
        let mut buf = Vec::new();
        write_pgm(&mut buf, &lattice).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().all(|l| l.len() <= 70));
        assert_eq!(read_pgm(&buf[..]).unwrap(), lattice);
    }

    #[test]
    fn pgm_rejects_garbage() {
        assert!(read_pgm(&b"P5\n3 3\n255\n"[..]).is_err());
        assert!(read_pgm(&b"P2\n3 3\n255\n0 0\n"[..]).is_err());
    }
}

//! Plain-text snapshot formats.
//!
//! Particles: header `m d domain period` (`domain` is `torus` or `euclidean`,
//! `period` is 0 for Euclidean), then `m` rows of `d` floats.
//! Grids: header `n_g d period`, then `n_g^d` cell masses in row-major order,
//! one per line.
//!
//! Floats are written in shortest round-trip form, so read(write(x)) == x.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::functionals::parse_row;
use crate::measures::{Domain, GridDensity, ParticleEnsemble};
use crate::{Error, Result};

pub fn write_particles<W: Write>(mut w: W, ens: &ParticleEnsemble) -> Result<()> {
    let dom = ens.domain();
    let (kind, period) = match dom.period() {
        Some(p) => ("torus", p),
        None => ("euclidean", 0.0),
    };
    writeln!(w, "{} {} {} {:?}", ens.len(), ens.dim(), kind, period)?;
    let mut line = String::new();
    for row in ens.iter() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{v:?}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_particles<R: BufRead>(r: R) -> Result<ParticleEnsemble> {
    let mut lines = data_lines(r);
    let (line_no, header) = lines.next().transpose()?.ok_or(Error::Parse {
        line: 1,
        msg: "missing header `m d domain period`".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            line: line_no,
            msg: "header must be `m d domain period`".into(),
        });
    }
    let m: usize = parse_field(fields[0], line_no)?;
    let d: usize = parse_field(fields[1], line_no)?;
    let period: f64 = parse_field(fields[3], line_no)?;
    let domain = match fields[2] {
        "torus" => Domain::torus(d, period)?,
        "euclidean" => Domain::euclidean(d)?,
        other => {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("unknown domain `{other}`"),
            })
        }
    };
    let mut positions = Vec::with_capacity(m * d);
    let mut rows = 0;
    for item in lines {
        let (line_no, line) = item?;
        let row = parse_row(&line, line_no)?;
        if row.len() != d {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {d} values, found {}", row.len()),
            });
        }
        positions.extend_from_slice(&row);
        rows += 1;
    }
    if rows != m {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header announces {m} rows, found {rows}"),
        });
    }
    ParticleEnsemble::new(domain, positions)
}

pub fn write_grid<W: Write>(mut w: W, grid: &GridDensity) -> Result<()> {
    let period = grid.domain().period().expect("grids live on a torus");
    writeln!(w, "{} {} {:?}", grid.n(), grid.dim(), period)?;
    for v in grid.values() {
        writeln!(w, "{v:?}")?;
    }
    Ok(())
}

pub fn read_grid<R: BufRead>(r: R) -> Result<GridDensity> {
    let mut lines = data_lines(r);
    let (line_no, header) = lines.next().transpose()?.ok_or(Error::Parse {
        line: 1,
        msg: "missing header `n_g d period`".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Parse {
            line: line_no,
            msg: "header must be `n_g d period`".into(),
        });
    }
    let n: usize = parse_field(fields[0], line_no)?;
    let d: usize = parse_field(fields[1], line_no)?;
    let period: f64 = parse_field(fields[2], line_no)?;
    let domain = Domain::torus(d, period)?;
    let mut values = Vec::new();
    for item in lines {
        let (line_no, line) = item?;
        values.extend(parse_row(&line, line_no)?);
    }
    GridDensity::from_masses(domain, n, values)
}

pub fn save_particles(path: &Path, ens: &ParticleEnsemble) -> Result<()> {
    let mut buf = Vec::new();
    write_particles(&mut buf, ens)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_particles(path: &Path) -> Result<ParticleEnsemble> {
    read_particles(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_grid(path: &Path, grid: &GridDensity) -> Result<()> {
    let mut buf = Vec::new();
    write_grid(&mut buf, grid)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_grid(path: &Path) -> Result<GridDensity> {
    read_grid(std::io::BufReader::new(std::fs::File::open(path)?))
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| Error::Parse {
        line,
        msg: format!("bad header field `{s}`: {e}"),
    })
}

/// Non-blank lines with 1-based line numbers.
fn data_lines<R: BufRead>(r: R) -> impl Iterator<Item = Result<(usize, String)>> {
    r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        Ok(s) => Some(Ok((i + 1, s))),
        Err(e) => Some(Err(e.into())),
    })
}

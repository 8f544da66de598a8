//! Field export and import: SLF text, CSV rows and legacy VTK structured
//! points.

use crate::solver::{Grid, ScalarField3};
use crate::Error;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Slf,
    Csv,
    Vtk,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "slf" => Ok(Format::Slf),
            "csv" => Ok(Format::Csv),
            "vtk" => Ok(Format::Vtk),
            _ => Err(Error::Format(format!("unknown field format `{s}`"))),
        }
    }
}

impl Format {
    pub fn from_path(p: &Path) -> Option<Format> {
        p.extension()?.to_str()?.parse().ok()
    }
}

/// `SLF1 nx ny nz ox oy oz h`, then one value per line, x-fastest.
pub fn write_slf<W: Write>(f: &ScalarField3, mut w: W) -> std::io::Result<()> {
    let [nx, ny, nz] = f.dims;
    let [ox, oy, oz] = f.origin;
    writeln!(w, "SLF1 {nx} {ny} {nz} {ox} {oy} {oz} {}", f.h)?;
    for v in &f.values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn read_slf<R: Read>(r: R) -> Result<ScalarField3, Error> {
    let mut lines = BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty SLF file".into()))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 8 || parts[0] != "SLF1" {
        return Err(Error::Format(format!("bad SLF header `{header}`")));
    }
    let int = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad SLF dimension `{s}`")))
    };
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Format(format!("bad SLF number `{s}`")))
    };
    let dims = [int(parts[1])?, int(parts[2])?, int(parts[3])?];
    let origin = [num(parts[4])?, num(parts[5])?, num(parts[6])?];
    let h = num(parts[7])?;
    let grid = Grid::new(origin, h, dims)?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        values.push(num(t)?);
    }
    let f = ScalarField3 {
        origin,
        h,
        dims,
        values,
    };
    f.validate()?;
    Ok(f)
}

/// `x,y,z,value` rows with a header line.
pub fn write_csv<W: Write>(f: &ScalarField3, mut w: W) -> std::io::Result<()> {
    let g = f.grid();
    writeln!(w, "x,y,z,value")?;
    for (i, v) in f.values.iter().enumerate() {
        let p = g.point(i);
        writeln!(w, "{},{},{},{v}", p[0], p[1], p[2])?;
    }
    Ok(())
}

/// Legacy ASCII structured points.
pub fn write_vtk<W: Write>(f: &ScalarField3, name: &str, mut w: W) -> std::io::Result<()> {
    let [nx, ny, nz] = f.dims;
    let [ox, oy, oz] = f.origin;
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{name}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {nx} {ny} {nz}")?;
    writeln!(w, "ORIGIN {ox} {oy} {oz}")?;
    writeln!(w, "SPACING {0} {0} {0}", f.h)?;
    writeln!(w, "POINT_DATA {}", nx * ny * nz)?;
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in &f.values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn write_field(f: &ScalarField3, path: &Path, format: Format) -> Result<(), Error> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        Format::Slf => write_slf(f, &mut w)?,
        Format::Csv => write_csv(f, &mut w)?,
        Format::Vtk => write_vtk(f, "field", &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ScalarField3, Error> {
    read_slf(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slf_line_count() {
        let g = Grid::new([0.0; 3], 0.1, [5, 5, 5]).unwrap();
        let f = ScalarField3::from_fn(&g, |x| x[0] + 2.0 * x[1]);
        let mut buf = Vec::new();
        write_slf(&f, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 126);
    }
}

//! CSV point files: header `x1,...,xn` with an optional trailing `y`
//! column, one point per row.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use repgap_core::learners::{Example, Label};
use repgap_core::Point;

use crate::{Error, Result};

/// Points read from a CSV file, with labels when the file has a `y` column.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub dim: usize,
    pub points: Vec<Point>,
    pub labels: Option<Vec<Label>>,
}

impl PointSet {
    pub fn examples(&self) -> Option<Vec<Example>> {
        let labels = self.labels.as_ref()?;
        Some(
            self.points
                .iter()
                .zip(labels)
                .map(|(p, &y)| Example { x: p.0.clone(), y })
                .collect(),
        )
    }
}

/// Round-trip exact float text.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Csv { line, msg: msg.into() }
}

fn parse_header(header: &csv::StringRecord) -> Result<(usize, bool)> {
    let mut dim = 0;
    let mut labeled = false;
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        if name == "y" && i + 1 == header.len() && i > 0 {
            labeled = true;
        } else if name == format!("x{}", i + 1) {
            dim += 1;
        } else {
            return Err(csv_err(1, format!("unexpected column '{name}', want x{} or a final y", i + 1)));
        }
    }
    if dim == 0 {
        return Err(csv_err(1, "no coordinate columns"));
    }
    Ok((dim, labeled))
}

/// Reads a point file. When `dim` is given, the header must match it.
pub fn read_points<R: Read>(reader: R, dim: Option<usize>) -> Result<PointSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
    let (n, labeled) = parse_header(&header)?;
    if let Some(d) = dim.filter(|&d| d != n) {
        return Err(csv_err(1, format!("header has {n} coordinates, expected {d}")));
    }
    let mut points = Vec::new();
    let mut labels = labeled.then(Vec::new);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut x = Vec::with_capacity(n);
        for (i, field) in rec.iter().take(n).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| csv_err(line, format!("x{} is not a number: '{field}'", i + 1)))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(csv_err(line, format!("x{} = {v} lies outside [0, 1]", i + 1)));
            }
            x.push(v);
        }
        if let Some(labels) = labels.as_mut() {
            let y = match &rec[n] {
                "0" => 0,
                "1" => 1,
                other => return Err(csv_err(line, format!("label must be 0 or 1, got '{other}'"))),
            };
            labels.push(y);
        }
        points.push(Point(x));
    }
    Ok(PointSet { dim: n, points, labels })
}

pub fn read_points_file(path: &Path, dim: Option<usize>) -> Result<PointSet> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_points(BufReader::new(f), dim).map_err(|e| match e {
        Error::Csv { line, msg } => Error::Csv {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })
}

fn header(dim: usize, labeled: bool) -> String {
    let mut cols: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    if labeled {
        cols.push("y".into());
    }
    cols.join(",")
}

fn write_rows<W: Write>(mut w: W, dim: usize, rows: &[(&[f64], Option<Label>)]) -> std::io::Result<()> {
    writeln!(w, "{}", header(dim, rows.first().is_some_and(|r| r.1.is_some())))?;
    for (x, y) in rows {
        let mut line: Vec<String> = x.iter().map(|&v| fmt_f64(v)).collect();
        if let Some(y) = y {
            line.push(y.to_string());
        }
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()
}

pub fn write_points<W: Write>(w: W, dim: usize, points: &[Point]) -> std::io::Result<()> {
    let rows: Vec<_> = points.iter().map(|p| (p.coords(), None)).collect();
    write_rows(w, dim, &rows)
}

pub fn write_examples<W: Write>(w: W, dim: usize, data: &[Example]) -> std::io::Result<()> {
    let rows: Vec<_> = data.iter().map(|e| (e.x.as_slice(), Some(e.y))).collect();
    write_rows(w, dim, &rows)
}

/// Opens `path` for buffered writing, reporting the path on failure.
pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

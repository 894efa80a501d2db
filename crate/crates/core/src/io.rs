//! CSV and JSON serialization.
//!
//! Every float is written with 17 significant digits (`{:.16e}`), which
//! round-trips exactly at double precision. CSV profiles put `t` first, then
//! components in flat Weyl order; complex components take two columns,
//! `<name>_re` and `<name>_im`.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{NmdError, Result};
use crate::rates::{CumulativeRates, ProbabilityProfile, RateProfile, Spectrum, TimeGrid};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON whose floats carry 17 significant digits.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
        write!(w, "{:.16e}", f64::from(v))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| NmdError::Io(e.to_string()))
}

pub fn from_json_str<T: DeserializeOwned>(s: &str) -> Result<T> {
    Ok(serde_json::from_str(s)?)
}

/// Write a header and rows of floats.
pub fn write_table<W: Write>(w: W, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(NmdError::DimensionMismatch {
                expected: header.len(),
                found: row.len(),
            });
        }
        out.write_record(row.iter().map(|&x| fmt_f64(x)))?;
    }
    out.flush()?;
    Ok(())
}

/// Read a float table; returns the header and rows. Blank input is a parse error.
pub fn read_table<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(NmdError::Parse("empty table: missing header".into()));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|_| {
                    NmdError::Parse(format!(
                        "row {}, column '{}': not a number: '{field}'",
                        line + 1,
                        header.get(col).map(String::as_str).unwrap_or("?")
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(NmdError::Parse("table has a header but no data rows".into()));
    }
    Ok((header, rows))
}

pub fn real_header(name: &str, range: std::ops::Range<usize>) -> Vec<String> {
    range.map(|a| format!("{name}_{a}")).collect()
}

pub fn complex_header(name: &str, range: std::ops::Range<usize>) -> Vec<String> {
    range
        .flat_map(|a| [format!("{name}_{a}_re"), format!("{name}_{a}_im")])
        .collect()
}

fn with_t(mut cols: Vec<String>) -> Vec<String> {
    cols.insert(0, "t".into());
    cols
}

fn real_rows(grid: &TimeGrid, values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    grid.points()
        .iter()
        .zip(values)
        .map(|(&t, v)| std::iter::once(t).chain(v.iter().copied()).collect())
        .collect()
}

fn complex_rows(grid: &TimeGrid, values: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
    grid.points()
        .iter()
        .zip(values)
        .map(|(&t, v)| std::iter::once(t).chain(v.iter().flat_map(|z| [z.re, z.im])).collect())
        .collect()
}

fn check_header(found: &[String], expected: &[String]) -> Result<()> {
    if found != expected {
        return Err(NmdError::Parse(format!(
            "unexpected header: found [{}], expected [{}]",
            found.join(","),
            expected.join(",")
        )));
    }
    Ok(())
}

/// Infer `d` from `d^2 + extra` columns.
fn infer_dim(columns: usize, extra: usize, per: usize) -> Result<usize> {
    if columns <= extra || !(columns - extra).is_multiple_of(per) {
        return Err(NmdError::Parse(format!("cannot infer dimension from {columns} columns")));
    }
    let n = (columns - extra) / per;
    let d = (n as f64).sqrt().round() as usize;
    if d < 2 || d * d != n {
        return Err(NmdError::Parse(format!(
            "{columns} columns do not correspond to a dimension d >= 2"
        )));
    }
    Ok(d)
}

fn check_expected_dim(inferred: usize, expected: Option<usize>) -> Result<()> {
    match expected {
        Some(d) if d != inferred => Err(NmdError::WrongDimension {
            required: d,
            found: inferred,
        }),
        _ => Ok(()),
    }
}

fn split_t(rows: Vec<Vec<f64>>) -> Result<(TimeGrid, Vec<Vec<f64>>)> {
    let t = rows.iter().map(|r| r[0]).collect();
    let grid = TimeGrid::new(t)?;
    Ok((grid, rows.into_iter().map(|r| r[1..].to_vec()).collect()))
}

fn pair_up(v: &[f64]) -> Vec<Complex64> {
    v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

/// Rate table header: `t,gamma_1,...,gamma_{d^2-1}`.
pub fn rates_header(d: usize) -> Vec<String> {
    with_t(real_header("gamma", 1..d * d))
}

pub fn write_rates_csv<W: Write>(w: W, r: &RateProfile) -> Result<()> {
    write_table(w, &rates_header(r.dim()), &real_rows(r.grid(), r.values()))
}

/// Parse a rate table. The dimension comes from the column count and must
/// equal `expected_d` when one is given.
pub fn read_rates_csv<R: Read>(r: R, expected_d: Option<usize>) -> Result<RateProfile> {
    let (header, rows) = read_table(r)?;
    let d = infer_dim(header.len(), 0, 1).map_err(|_| {
        NmdError::Parse(format!(
            "rate table needs 1 + (d^2 - 1) columns, found {}",
            header.len()
        ))
    })?;
    check_expected_dim(d, expected_d)?;
    check_header(&header, &rates_header(d))?;
    let (grid, values) = split_t(rows)?;
    RateProfile::new(d, grid, values)
}

pub fn spectrum_header(d: usize) -> Vec<String> {
    with_t(complex_header("lambda", 0..d * d))
}

pub fn write_spectrum_csv<W: Write>(w: W, s: &Spectrum) -> Result<()> {
    write_table(w, &spectrum_header(s.dim()), &complex_rows(s.grid(), s.values()))
}

pub fn read_spectrum_csv<R: Read>(r: R) -> Result<Spectrum> {
    let (header, rows) = read_table(r)?;
    let d = infer_dim(header.len(), 1, 2)?;
    check_header(&header, &spectrum_header(d))?;
    let (grid, values) = split_t(rows)?;
    Spectrum::new(d, grid, values.iter().map(|v| pair_up(v)).collect())
}

pub fn probs_header(d: usize) -> Vec<String> {
    with_t(real_header("p", 0..d * d))
}

pub fn write_probs_csv<W: Write>(w: W, p: &ProbabilityProfile) -> Result<()> {
    write_table(w, &probs_header(p.dim()), &real_rows(p.grid(), p.values()))
}

pub fn read_probs_csv<R: Read>(r: R) -> Result<ProbabilityProfile> {
    let (header, rows) = read_table(r)?;
    let d = infer_dim(header.len(), 1, 1)?;
    check_header(&header, &probs_header(d))?;
    let (grid, values) = split_t(rows)?;
    ProbabilityProfile::new(d, grid, values)
}

pub fn cumulative_header(d: usize) -> Vec<String> {
    with_t(real_header("Gamma", 1..d * d))
}

pub fn write_cumulative_csv<W: Write>(w: W, g: &CumulativeRates) -> Result<()> {
    write_table(w, &cumulative_header(g.dim()), &real_rows(g.grid(), g.values()))
}

pub fn read_cumulative_csv<R: Read>(r: R) -> Result<CumulativeRates> {
    let (header, rows) = read_table(r)?;
    let d = infer_dim(header.len(), 0, 1)?;
    check_header(&header, &cumulative_header(d))?;
    let (grid, values) = split_t(rows)?;
    CumulativeRates::new(d, grid, values)
}

#[derive(Deserialize)]
struct ProfileDoc<T> {
    dimension: usize,
    grid: Vec<f64>,
    values: Vec<Vec<T>>,
}

pub fn rates_from_json(s: &str) -> Result<RateProfile> {
    let doc: ProfileDoc<f64> = from_json_str(s)?;
    RateProfile::new(doc.dimension, TimeGrid::new(doc.grid)?, doc.values)
}

pub fn spectrum_from_json(s: &str) -> Result<Spectrum> {
    let doc: ProfileDoc<Complex64> = from_json_str(s)?;
    Spectrum::new(doc.dimension, TimeGrid::new(doc.grid)?, doc.values)
}

pub fn probs_from_json(s: &str) -> Result<ProbabilityProfile> {
    let doc: ProfileDoc<f64> = from_json_str(s)?;
    ProbabilityProfile::new(doc.dimension, TimeGrid::new(doc.grid)?, doc.values)
}

pub fn cumulative_from_json(s: &str) -> Result<CumulativeRates> {
    let doc: ProfileDoc<f64> = from_json_str(s)?;
    CumulativeRates::new(doc.dimension, TimeGrid::new(doc.grid)?, doc.values)
}

/// A complex matrix as rows of `[re, im]` pairs.
pub fn complex_matrix_rows(m: &nalgebra::DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Square complex matrix as CSV: a `row` column, then `c<j>_re,c<j>_im` per column.
pub fn write_complex_matrix_csv<W: Write>(w: W, m: &nalgebra::DMatrix<Complex64>) -> Result<()> {
    let mut header = vec!["row".to_string()];
    header.extend((0..m.ncols()).flat_map(|j| [format!("c{j}_re"), format!("c{j}_im")]));
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| {
            std::iter::once(i as f64)
                .chain((0..m.ncols()).flat_map(|j| [m[(i, j)].re, m[(i, j)].im]))
                .collect()
        })
        .collect();
    write_table(w, &header, &rows)
}

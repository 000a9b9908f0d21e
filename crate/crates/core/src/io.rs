//! Plain-text data formats.
//!
//! All readers skip blank lines and lines starting with `#`. Columns are
//! separated by whitespace, commas, semicolons or tabs.
//!
//! | format             | layout                                   |
//! |--------------------|------------------------------------------|
//! | sample             | one value per line                       |
//! | vector sample      | `k` columns per line                     |
//! | regression data    | response first, then the `k` predictors  |
//! | tabulated density  | `x f(x)`, `x` strictly increasing        |

use std::io::{BufRead, Write};

use crate::densities::TabulatedDensity;
use crate::detect::Sample;
use crate::error::{Error, Result};
use crate::multivariate::regression::RegressionData;
use crate::multivariate::VectorSample;

fn rows<R: BufRead>(reader: R) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Result<Vec<f64>> = t
            .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
            .filter(|f| !f.is_empty())
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("cannot parse {f:?} as a number"),
                })
            })
            .collect();
        out.push((i + 1, fields?));
    }
    Ok(out)
}

fn fixed_width<R: BufRead>(reader: R, width: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let rows = rows(reader)?;
    let expected = width.or_else(|| rows.first().map(|r| r.1.len()));
    rows.into_iter()
        .map(|(line, r)| {
            if Some(r.len()) != expected {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} columns, found {}", expected.unwrap_or(0), r.len()),
                });
            }
            Ok(r)
        })
        .collect()
}

pub fn read_sample<R: BufRead>(reader: R) -> Result<Sample> {
    let values = fixed_width(reader, Some(1))?.into_iter().map(|r| r[0]).collect();
    Sample::new(values)
}

pub fn read_vector_sample<R: BufRead>(reader: R) -> Result<VectorSample> {
    VectorSample::from_rows(fixed_width(reader, None)?)
}

pub fn read_regression<R: BufRead>(reader: R) -> Result<RegressionData> {
    let rows = fixed_width(reader, None)?;
    if rows.first().is_some_and(|r| r.len() < 2) {
        return Err(Error::Parse {
            line: 1,
            message: "regression rows need a response and at least one predictor".into(),
        });
    }
    let (y, x): (Vec<f64>, Vec<Vec<f64>>) = rows.into_iter().map(|r| (r[0], r[1..].to_vec())).unzip();
    RegressionData::new(x, y)
}

pub fn read_tabulated_density<R: BufRead>(reader: R) -> Result<TabulatedDensity> {
    let pts = fixed_width(reader, Some(2))?.into_iter().map(|r| (r[0], r[1])).collect();
    TabulatedDensity::new(pts)
}

pub fn write_sample<W: Write>(mut w: W, s: &Sample) -> Result<()> {
    for v in s.values() {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

pub fn write_vector_sample<W: Write>(mut w: W, vs: &VectorSample) -> Result<()> {
    for r in vs.rows() {
        let line: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_regression<W: Write>(mut w: W, rd: &RegressionData) -> Result<()> {
    for i in 0..rd.n() {
        let mut line = vec![format!("{:e}", rd.y()[i])];
        line.extend(rd.x().row(i).iter().map(|v| format!("{v:e}")));
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

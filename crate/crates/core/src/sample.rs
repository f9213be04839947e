//! Sample storage: `n` observations of dimension `p`, row-major.
//!
//! Row-major layout keeps each observation contiguous, which is what the
//! pairwise inner-product kernels want. Construction validates shape and
//! finiteness once so the numeric code can assume clean input.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numfmt::{format_significant, OUTPUT_SIG_DIGITS};

/// A two-sample-test input sample: `n` rows (observations) by `p` columns
/// (coordinates), stored row-major in one contiguous buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    /// Wrap a row-major buffer of `n·p` finite values.
    ///
    /// # Errors
    ///
    /// [`Error::DimensionMismatch`] if the buffer length is not `n·p`,
    /// [`Error::EmptyInput`] if `n` or `p` is zero, and [`Error::NonFinite`]
    /// if any entry is NaN or infinite.
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::EmptyInput {
                what: "sample matrix",
            });
        }
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                what: "sample buffer length",
                expected: n * p,
                got: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                what: "sample entry",
            });
        }
        Ok(SampleMatrix { n, p, data })
    }

    /// Build from nested rows; every row must have length `p`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput {
                what: "sample rows",
            });
        }
        let p = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    what: "sample row length",
                    expected: p,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        SampleMatrix::new(rows.len(), p, data)
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of each observation.
    pub fn dim(&self) -> usize {
        self.p
    }

    /// Observation `i` as a contiguous slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    /// The whole row-major buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Read a sample from a CSV file: one observation per line, `,`-separated
    /// plain decimal values, every line the same width. Blank lines are
    /// skipped. A single leading header line is tolerated (detected by its
    /// first field failing numeric parsing).
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = BufReader::new(file);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width: Option<usize> = None;
        // Only the first non-blank line may be a header; any later
        // non-numeric field is a format error.
        let mut may_be_header = true;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').collect();
            let mut row = Vec::with_capacity(fields.len());
            let mut parse_failed = None;
            for (col, field) in fields.iter().enumerate() {
                match field.trim().parse::<f64>() {
                    Ok(v) => row.push(v),
                    Err(_) => {
                        parse_failed = Some(col);
                        break;
                    }
                }
            }
            if let Some(col) = parse_failed {
                if may_be_header {
                    may_be_header = false;
                    continue;
                }
                return Err(Error::CsvFormat {
                    line: line_no,
                    message: format!(
                        "field {} is not a number: {:?}",
                        col + 1,
                        fields[col].trim()
                    ),
                });
            }
            may_be_header = false;
            if let Some(w) = width {
                if row.len() != w {
                    return Err(Error::CsvFormat {
                        line: line_no,
                        message: format!("expected {w} fields, got {}", row.len()),
                    });
                }
            } else {
                width = Some(row.len());
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput { what: "csv sample" });
        }
        SampleMatrix::from_rows(&rows)
    }

    /// Write the sample as CSV: plain decimal, 12 significant digits,
    /// LF line endings, no header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut line = String::new();
        for i in 0..self.n {
            line.clear();
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&format_significant(*v, OUTPUT_SIG_DIGITS));
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        out.flush()?;
        Ok(())
    }
}

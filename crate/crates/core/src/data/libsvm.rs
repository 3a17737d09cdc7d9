//! LIBSVM text format.
//!
//! ```text
//! line  := label (SP index ":" value)*
//! label := float
//! index := integer >= 1, strictly increasing within a line
//! value := float
//! ```
//!
//! Blank lines and lines starting with `#` are skipped. LF and CRLF endings
//! are both accepted.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::models::LabeledSample;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    BadLabel,
    MissingColon,
    BadIndex,
    ZeroIndex,
    BadValue,
    NonIncreasingIndex { previous: u32, index: u32 },
    IndexBeyondDimension { index: u32, dim: usize },
}

/// Parse failure with the offending token and, when known, its 1-based line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: Option<usize>,
    pub token: String,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        match &self.kind {
            ParseErrorKind::BadLabel => write!(f, "unparsable label '{}'", self.token),
            ParseErrorKind::MissingColon => write!(f, "feature '{}' lacks ':'", self.token),
            ParseErrorKind::BadIndex => write!(f, "unparsable feature index in '{}'", self.token),
            ParseErrorKind::ZeroIndex => {
                write!(f, "feature index must be >= 1 in '{}'", self.token)
            }
            ParseErrorKind::BadValue => write!(f, "unparsable feature value in '{}'", self.token),
            ParseErrorKind::NonIncreasingIndex { previous, index } => write!(
                f,
                "feature index {index} in '{}' does not increase past {previous}",
                self.token
            ),
            ParseErrorKind::IndexBeyondDimension { index, dim } => {
                write!(f, "feature index {index} exceeds dimension {dim}")
            }
        }
    }
}

impl std::error::Error for ParseError {}

/// One sparse row; indices are 1-based as in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow<T> {
    pub label: T,
    pub indices: Vec<u32>,
    pub values: Vec<T>,
}

impl<T: Scalar> SparseRow<T> {
    /// Formats the row back into LIBSVM text.
    pub fn to_line(&self) -> String {
        let mut s = self.label.to_string();
        for (i, v) in self.indices.iter().zip(&self.values) {
            s.push_str(&format!(" {i}:{v}"));
        }
        s
    }

    pub fn max_index(&self) -> u32 {
        self.indices.last().copied().unwrap_or(0)
    }

    pub fn densify(&self, dim: usize) -> Vector<T> {
        let mut x = Vector::zeros(dim);
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            x[i as usize - 1] = v;
        }
        x
    }
}

fn err(token: &str, kind: ParseErrorKind) -> ParseError {
    ParseError {
        line: None,
        token: token.to_owned(),
        kind,
    }
}

fn parse_float<T: Scalar>(s: &str) -> Option<T> {
    s.parse::<T>().ok().filter(|v| v.is_finite())
}

/// Parses one line; `Ok(None)` for blank and comment lines.
pub fn parse_libsvm_line<T: Scalar>(line: &str) -> Result<Option<SparseRow<T>>, ParseError> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut tokens = trimmed.split_whitespace();
    let label_tok = tokens.next().expect("non-empty line has a token");
    let label = parse_float(label_tok).ok_or_else(|| err(label_tok, ParseErrorKind::BadLabel))?;
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(tok, ParseErrorKind::MissingColon))?;
        let idx: u32 = idx
            .parse()
            .map_err(|_| err(tok, ParseErrorKind::BadIndex))?;
        if idx == 0 {
            return Err(err(tok, ParseErrorKind::ZeroIndex));
        }
        if let Some(&previous) = indices.last() {
            if idx <= previous {
                return Err(err(
                    tok,
                    ParseErrorKind::NonIncreasingIndex {
                        previous,
                        index: idx,
                    },
                ));
            }
        }
        let val = parse_float(val).ok_or_else(|| err(tok, ParseErrorKind::BadValue))?;
        indices.push(idx);
        values.push(val);
    }
    Ok(Some(SparseRow {
        label,
        indices,
        values,
    }))
}

/// Maps the (at most two) distinct labels onto `{0, 1}`: the smaller becomes 0,
/// the larger 1. A single distinct label keeps its sign convention
/// (`<= 0` -> 0, `> 0` -> 1).
fn normalize_labels<T: Scalar>(labels: &[T]) -> Result<Vec<T>> {
    let mut distinct: Vec<T> = Vec::new();
    for &l in labels {
        if !distinct.contains(&l) {
            distinct.push(l);
            if distinct.len() > 2 {
                return Err(Error::InvalidArgument(format!(
                    "binary classification expects two label values, found at least {:?}",
                    distinct
                )));
            }
        }
    }
    let map = |l: T| -> T {
        let positive = match distinct.as_slice() {
            [a, b] => l == a.max(*b),
            _ => l > T::zero(),
        };
        if positive {
            T::one()
        } else {
            T::zero()
        }
    };
    Ok(labels.iter().map(|&l| map(l)).collect())
}

/// Reads LIBSVM rows and densifies them to the largest index seen, or to
/// `dim_hint` when given. Labels are normalized to `{0, 1}`.
pub fn read_libsvm<T: Scalar, R: BufRead>(
    reader: R,
    dim_hint: Option<usize>,
) -> Result<Dataset<T>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let parsed = parse_libsvm_line::<T>(&line).map_err(|mut e| {
            e.line = Some(i + 1);
            e
        })?;
        if let Some(row) = parsed {
            if let Some(dim) = dim_hint {
                if row.max_index() as usize > dim {
                    return Err(ParseError {
                        line: Some(i + 1),
                        token: line.clone(),
                        kind: ParseErrorKind::IndexBeyondDimension {
                            index: row.max_index(),
                            dim,
                        },
                    }
                    .into());
                }
            }
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument(
            "LIBSVM input contains no data rows".into(),
        ));
    }
    let dim = dim_hint.unwrap_or_else(|| {
        rows.iter()
            .map(|r| r.max_index() as usize)
            .max()
            .unwrap_or(0)
    });
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "LIBSVM input has no features".into(),
        ));
    }
    let labels = normalize_labels(&rows.iter().map(|r| r.label).collect::<Vec<_>>())?;
    let samples = rows
        .iter()
        .zip(labels)
        .map(|(r, y)| LabeledSample::new(r.densify(dim), y))
        .collect();
    Ok(Dataset { samples, dim })
}

pub fn load_libsvm<T: Scalar>(
    path: impl AsRef<Path>,
    dim_hint: Option<usize>,
) -> Result<Dataset<T>> {
    let file = File::open(path)?;
    read_libsvm(BufReader::new(file), dim_hint)
}

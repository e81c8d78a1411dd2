//! CSV tables and the sparse triplet text format.
//!
//! Triplet files start with a header line `N nnz` followed by `nnz` lines
//! `i j value` with zero-based indices. Values are written in shortest
//! round-trip form, so a written matrix reads back bit-identically.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use sublap_core::sparse::CsrMatrix;

use crate::error::LabError;

/// A plot-ready table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(file_name: &str, header: &[&str]) -> Self {
        Table {
            file_name: file_name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<(), LabError> {
        let path = dir.join(&self.file_name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| LabError::Report(format!("{}: {e}", path.display())))?;
        let fail = |e: csv::Error| LabError::Report(format!("{}: {e}", path.display()));
        w.write_record(&self.header).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(fail)?;
        }
        w.flush().map_err(|e| LabError::io(&path, e))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Table, LabError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| LabError::Report(format!("{}: {e}", path.display())))?;
        let fail = |e: csv::Error| LabError::Report(format!("{}: {e}", path.display()));
        let header = r.headers().map_err(fail)?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(fail)?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| LabError::Report(format!("{}: {e}", path.display())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Table {
            file_name: path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            header,
            rows,
        })
    }
}

pub fn write_triplets<W: Write>(matrix: &CsrMatrix, mut out: W) -> std::io::Result<()> {
    let mut buf = String::new();
    writeln!(buf, "{} {}", matrix.nrows(), matrix.nnz()).unwrap();
    for (i, j, v) in matrix.triplets() {
        writeln!(buf, "{i} {j} {v:?}").unwrap();
    }
    out.write_all(buf.as_bytes())
}

/// A diagonal as a triplet file.
pub fn write_diagonal_triplets<W: Write>(diag: &[f64], out: W) -> std::io::Result<()> {
    let n = diag.len();
    let m = CsrMatrix::from_triplets(n, n, diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect());
    write_triplets(&m, out)
}

pub fn read_triplets<R: Read>(input: R) -> Result<CsrMatrix, LabError> {
    let bad = |msg: String| LabError::Report(format!("triplet file: {msg}"));
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("missing header".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let mut h = header.split_whitespace();
    let parse_usize = |s: Option<&str>, what: &str| -> Result<usize, LabError> {
        s.and_then(|x| x.parse().ok()).ok_or_else(|| bad(format!("bad {what}")))
    };
    let n = parse_usize(h.next(), "N")?;
    let nnz = parse_usize(h.next(), "nnz")?;
    let mut triplets = Vec::with_capacity(nnz);
    for line in lines {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let i = parse_usize(it.next(), "row index")?;
        let j = parse_usize(it.next(), "column index")?;
        let v: f64 = it
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| bad(format!("bad value in line {line:?}")))?;
        if i >= n || j >= n {
            return Err(bad(format!("index ({i}, {j}) out of range for N = {n}")));
        }
        triplets.push((i, j, v));
    }
    if triplets.len() != nnz {
        return Err(bad(format!("header announces {nnz} entries, found {}", triplets.len())));
    }
    Ok(CsrMatrix::from_triplets(n, n, triplets))
}

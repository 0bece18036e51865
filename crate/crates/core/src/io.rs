//! File formats: Matrix Market matrices, JSON problem files and JSON
//! polynomial files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sdls::{Constraint, ConstraintMatrix, SdlsProblem};
use crate::sos::Polynomial;
use crate::symcore::SymMatrix;

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

/// Whitespace-separated tokens with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn parse_num<T: std::str::FromStr>(tok: (usize, &str), line: usize, what: &str) -> Result<T> {
    tok.1
        .parse()
        .map_err(|_| parse_err(line, tok.0, format!("expected {what}, found '{}'", tok.1)))
}

fn parse_header(line: &str) -> Result<(Layout, Symmetry)> {
    let toks = tokens(line);
    if toks.first().map(|t| t.1) != Some("%%MatrixMarket") {
        return Err(parse_err(1, 1, "missing %%MatrixMarket banner"));
    }
    if toks.len() != 5 {
        return Err(parse_err(1, 1, "banner must read: %%MatrixMarket matrix <layout> <field> <symmetry>"));
    }
    if !toks[1].1.eq_ignore_ascii_case("matrix") {
        return Err(parse_err(1, toks[1].0, format!("unsupported object '{}'", toks[1].1)));
    }
    let layout = match toks[2].1.to_ascii_lowercase().as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_err(1, toks[2].0, format!("unsupported layout '{other}'"))),
    };
    match toks[3].1.to_ascii_lowercase().as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(parse_err(1, toks[3].0, format!("unsupported field '{other}'"))),
    }
    let symmetry = match toks[4].1.to_ascii_lowercase().as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(parse_err(1, toks[4].0, format!("unsupported symmetry '{other}'"))),
    };
    Ok((layout, symmetry))
}

/// Parses Matrix Market text (coordinate or array, real or integer, general
/// or symmetric). Symmetric files must store only entries with `i ≥ j`.
pub fn parse_matrix_market(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, banner) = lines.next().ok_or_else(|| parse_err(1, 1, "empty file"))?;
    let (layout, symmetry) = parse_header(banner)?;

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim_start();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line_no, size_line) = body.next().ok_or_else(|| parse_err(2, 1, "missing size line"))?;
    let size = tokens(size_line);
    let want = if layout == Layout::Coordinate { 3 } else { 2 };
    if size.len() != want {
        return Err(parse_err(size_line_no, 1, format!("size line needs {want} integers")));
    }
    let rows: usize = parse_num(size[0], size_line_no, "row count")?;
    let cols: usize = parse_num(size[1], size_line_no, "column count")?;
    if symmetry == Symmetry::Symmetric && rows != cols {
        return Err(parse_err(size_line_no, 1, "symmetric matrix must be square"));
    }
    let mut m = DMatrix::zeros(rows, cols);

    match layout {
        Layout::Coordinate => {
            let nnz: usize = parse_num(size[2], size_line_no, "entry count")?;
            let mut seen = 0;
            for (no, line) in body {
                let t = tokens(line);
                if t.len() != 3 {
                    return Err(parse_err(no, 1, "coordinate entry needs: row column value"));
                }
                let i: usize = parse_num(t[0], no, "row index")?;
                let j: usize = parse_num(t[1], no, "column index")?;
                let v: f64 = parse_num(t[2], no, "value")?;
                if i == 0 || i > rows {
                    return Err(parse_err(no, t[0].0, format!("row index {i} outside 1..={rows}")));
                }
                if j == 0 || j > cols {
                    return Err(parse_err(no, t[1].0, format!("column index {j} outside 1..={cols}")));
                }
                if symmetry == Symmetry::Symmetric {
                    if i < j {
                        return Err(parse_err(no, t[0].0, "symmetric file stores only entries with row ≥ column"));
                    }
                    m[(j - 1, i - 1)] += v;
                    if i != j {
                        m[(i - 1, j - 1)] += v;
                    }
                } else {
                    m[(i - 1, j - 1)] += v;
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(parse_err(size_line_no, size[2].0, format!("header declares {nnz} entries, found {seen}")));
            }
        }
        Layout::Array => {
            let mut values = Vec::new();
            let mut last_line = size_line_no;
            for (no, line) in body {
                last_line = no;
                for t in tokens(line) {
                    values.push(parse_num::<f64>(t, no, "value")?);
                }
            }
            match symmetry {
                Symmetry::General => {
                    if values.len() != rows * cols {
                        return Err(parse_err(last_line, 1, format!("expected {} values, found {}", rows * cols, values.len())));
                    }
                    m = DMatrix::from_column_slice(rows, cols, &values);
                }
                Symmetry::Symmetric => {
                    let want = rows * (rows + 1) / 2;
                    if values.len() != want {
                        return Err(parse_err(last_line, 1, format!("expected {want} values, found {}", values.len())));
                    }
                    let mut it = values.into_iter();
                    for j in 0..cols {
                        for i in j..rows {
                            let v = it.next().expect("count checked");
                            m[(i, j)] = v;
                            m[(j, i)] = v;
                        }
                    }
                }
            }
        }
    }
    Ok(m)
}

pub fn read_matrix_market(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix_market(&fs::read_to_string(path)?)
}

/// Reads a Matrix Market file and validates symmetry.
pub fn read_sym_matrix(path: &Path) -> Result<SymMatrix> {
    SymMatrix::new(read_matrix_market(path)?)
}

/// Array, real, general; 17 significant digits per value.
pub fn format_matrix_market(m: &DMatrix<f64>) -> String {
    let mut s = String::with_capacity(32 + 26 * m.len());
    s.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", m.nrows(), m.ncols());
    for v in m.iter() {
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}

pub fn write_matrix_market(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, format_matrix_market(m))?;
    Ok(())
}

/// Coordinate, real, symmetric (lower triangle, nonzeros only).
pub fn format_matrix_market_symmetric(x: &SymMatrix) -> String {
    let n = x.dim();
    let mut entries = Vec::new();
    for j in 0..n {
        for i in j..n {
            if x[(i, j)] != 0.0 {
                entries.push((i, j, x[(i, j)]));
            }
        }
    }
    let mut s = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(s, "{n} {n} {}", entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(s, "{} {} {v:.16e}", i + 1, j + 1);
    }
    s
}

/// Matrix in a problem file: a path to a Matrix Market file (relative to the
/// problem file), 0-based triplets mirrored across the diagonal, or dense
/// rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixRef {
    Path(String),
    Triplets { triplets: Vec<(usize, usize, f64)> },
    Dense { dense: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintFile {
    #[serde(rename = "A")]
    pub a: MatrixRef,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub rho: f64,
    #[serde(rename = "C")]
    pub c: MatrixRef,
    #[serde(default)]
    pub constraints: Vec<ConstraintFile>,
}

fn resolve_dense(r: &MatrixRef, n: usize, base: &Path, what: &str) -> Result<SymMatrix> {
    match resolve(r, n, base, what)? {
        ConstraintMatrix::Dense(m) => Ok(m),
        sparse => Ok(sparse.to_dense()),
    }
}

fn resolve(r: &MatrixRef, n: usize, base: &Path, what: &str) -> Result<ConstraintMatrix> {
    match r {
        MatrixRef::Path(p) => {
            let path = base.join(p);
            let m = read_sym_matrix(&path)?;
            if m.dim() != n {
                return Err(Error::mismatch(format!("{what} in {} is {1}x{1}, expected n = {n}", path.display(), m.dim())));
            }
            Ok(ConstraintMatrix::Dense(m))
        }
        MatrixRef::Triplets { triplets } => {
            let mut seen = std::collections::BTreeMap::new();
            for &(i, j, v) in triplets {
                let key = (i.min(j), i.max(j));
                if let Some(prev) = seen.insert(key, v) {
                    if prev != v {
                        return Err(Error::invalid(format!(
                            "{what}: conflicting values {prev} and {v} at ({}, {})",
                            key.0, key.1
                        )));
                    }
                }
            }
            ConstraintMatrix::sparse(n, seen.into_iter().map(|((i, j), v)| (i, j, v)))
                .map_err(|e| Error::mismatch(format!("{what}: {e}")))
        }
        MatrixRef::Dense { dense } => {
            if dense.len() != n {
                return Err(Error::mismatch(format!("{what} has {} rows, expected n = {n}", dense.len())));
            }
            Ok(ConstraintMatrix::Dense(SymMatrix::from_rows(dense)?))
        }
    }
}

impl ProblemFile {
    /// Builds the problem, resolving matrix paths against `base`.
    pub fn into_problem(&self, base: &Path) -> Result<SdlsProblem> {
        if self.n == 0 {
            return Err(Error::EmptyMatrix);
        }
        let c = resolve_dense(&self.c, self.n, base, "C")?;
        let constraints = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, con)| Ok(Constraint::new(resolve(&con.a, self.n, base, &format!("A[{i}]"))?, con.b)))
            .collect::<Result<Vec<_>>>()?;
        SdlsProblem::new(c, self.rho, constraints)
    }

    /// Inline (dense) description of a problem.
    pub fn from_problem(prob: &SdlsProblem) -> Self {
        let dense = |m: &SymMatrix| MatrixRef::Dense {
            dense: (0..m.dim()).map(|i| (0..m.dim()).map(|j| m[(i, j)]).collect()).collect(),
        };
        Self {
            n: prob.dim(),
            rho: prob.rho,
            c: dense(&prob.c),
            constraints: prob
                .constraints
                .iter()
                .map(|c| ConstraintFile {
                    a: dense(&c.a.to_dense()),
                    b: c.b,
                })
                .collect(),
        }
    }
}

pub fn parse_problem(text: &str, base: &Path) -> Result<SdlsProblem> {
    let file: ProblemFile = serde_json::from_str(text)?;
    file.into_problem(base)
}

pub fn read_problem(path: &Path) -> Result<SdlsProblem> {
    let base: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_problem(&fs::read_to_string(path)?, &base)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermFile {
    pub exps: Vec<u32>,
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFile {
    pub nvars: usize,
    pub terms: Vec<TermFile>,
}

impl PolynomialFile {
    pub fn into_polynomial(self) -> Result<Polynomial> {
        if self.nvars == 0 {
            return Err(Error::invalid("nvars must be at least 1"));
        }
        Polynomial::from_terms(self.nvars, self.terms.into_iter().map(|t| (t.exps, t.coeff)))
    }

    pub fn from_polynomial(p: &Polynomial) -> Self {
        Self {
            nvars: p.nvars(),
            terms: p
                .terms()
                .map(|(e, c)| TermFile {
                    exps: e.clone(),
                    coeff: c,
                })
                .collect(),
        }
    }
}

pub fn parse_polynomial(text: &str) -> Result<Polynomial> {
    serde_json::from_str::<PolynomialFile>(text)?.into_polynomial()
}

pub fn read_polynomial(path: &Path) -> Result<Polynomial> {
    parse_polynomial(&fs::read_to_string(path)?)
}

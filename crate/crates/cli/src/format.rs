//! The line-oriented structure file format.
//!
//! ```text
//! # comments run to the end of the line
//! dim 3
//! horizontal 2
//! basis X1 X2 T
//! bracket X1 X2 = 1 T
//! complement 2
//! vec 0 0 1
//! ```
//!
//! Unlisted brackets are zero. A pair may be listed once, in either order.
//! `complement <m>` blocks are optional and only read by `check`.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use srcomplement::StructureSpec;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("ParseError: line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Structure(#[from] srcomplement::Error),
}

/// `(i, j, [(k, c)])` for `[e_i, e_j] = Σ c e_k`.
type Bracket = (usize, usize, Vec<(usize, f64)>);

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse { line, message: message.into() }
}

/// Vectors listed under one `complement <m>` header.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplementBlock {
    pub level: usize,
    pub line: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl ComplementBlock {
    /// Columns are the listed vectors.
    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, self.vectors.len(), |i, j| self.vectors[j][i])
    }
}

#[derive(Clone, Debug)]
pub struct ParsedFile {
    pub spec: StructureSpec,
    pub complement: Vec<ComplementBlock>,
}

fn number(tok: &str, line: usize) -> Result<f64, FormatError> {
    let v: f64 = tok.parse().map_err(|_| parse_err(line, format!("expected a number, found {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("coefficient {tok:?} is not finite")));
    }
    Ok(v)
}

fn count(tok: Option<&str>, what: &str, line: usize) -> Result<usize, FormatError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("{what} must be a non-negative integer, found {tok:?}")))
}

/// Parses and validates a structure file (Jacobi with tolerance `tol`).
pub fn parse_structure(text: &str, tol: f64) -> Result<ParsedFile, FormatError> {
    let mut dim: Option<usize> = None;
    let mut horizontal: Option<usize> = None;
    let mut names: Option<Vec<String>> = None;
    let mut brackets: Vec<Bracket> = Vec::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut blocks: Vec<ComplementBlock> = Vec::new();
    let mut last = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let key = toks.next().expect("non-empty line has a token");
        let index_of = |names: &Option<Vec<String>>, s: &str| -> Result<usize, FormatError> {
            let names = names.as_ref().ok_or_else(|| parse_err(line, "`basis` must precede brackets"))?;
            names.iter().position(|x| x == s).ok_or_else(|| parse_err(line, format!("unknown frame vector {s:?}")))
        };
        match key {
            "dim" | "horizontal" => {
                let v = count(toks.next(), key, line)?;
                if toks.next().is_some() {
                    return Err(parse_err(line, format!("trailing tokens after `{key}`")));
                }
                let slot = if key == "dim" { &mut dim } else { &mut horizontal };
                if slot.replace(v).is_some() {
                    return Err(parse_err(line, format!("`{key}` given twice")));
                }
            }
            "basis" => {
                let list: Vec<String> = toks.map(String::from).collect();
                if list.is_empty() {
                    return Err(parse_err(line, "`basis` needs at least one name"));
                }
                let unique: HashSet<&String> = list.iter().collect();
                if unique.len() != list.len() {
                    return Err(parse_err(line, "repeated frame name in `basis`"));
                }
                if names.replace(list).is_some() {
                    return Err(parse_err(line, "`basis` given twice"));
                }
            }
            "bracket" => {
                let toks: Vec<&str> = toks.collect();
                if toks.len() < 5 || toks[2] != "=" || !(toks.len() - 3).is_multiple_of(2) {
                    return Err(parse_err(line, "expected `bracket <a> <b> = <c> <name> [<c> <name> ...]`"));
                }
                let (i, j) = (index_of(&names, toks[0])?, index_of(&names, toks[1])?);
                if i == j {
                    return Err(parse_err(line, format!("bracket of {} with itself", toks[0])));
                }
                if !seen.insert((i.min(j), i.max(j))) {
                    return Err(parse_err(line, format!("bracket [{}, {}] listed twice", toks[0], toks[1])));
                }
                let terms = toks[3..]
                    .chunks(2)
                    .map(|p| Ok((index_of(&names, p[1])?, number(p[0], line)?)))
                    .collect::<Result<Vec<_>, FormatError>>()?;
                brackets.push((i, j, terms));
            }
            "complement" => {
                let level = count(toks.next(), "complement level", line)?;
                if toks.next().is_some() {
                    return Err(parse_err(line, "trailing tokens after `complement <level>`"));
                }
                blocks.push(ComplementBlock { level, line, vectors: Vec::new() });
            }
            "vec" => {
                let block = blocks.last_mut().ok_or_else(|| parse_err(line, "`vec` outside a `complement` block"))?;
                let v = toks.map(|t| number(t, line)).collect::<Result<Vec<_>, _>>()?;
                block.vectors.push(v);
            }
            other => return Err(parse_err(line, format!("unknown keyword {other:?}"))),
        }
    }

    let names = names.ok_or_else(|| parse_err(last, "missing `basis`"))?;
    let n = dim.ok_or_else(|| parse_err(last, "missing `dim`"))?;
    let d1 = horizontal.ok_or_else(|| parse_err(last, "missing `horizontal`"))?;
    if names.len() != n {
        return Err(parse_err(last, format!("`dim {n}` but `basis` lists {} names", names.len())));
    }
    if d1 == 0 || d1 > n {
        return Err(parse_err(last, format!("`horizontal {d1}` must lie in 1..={n}")));
    }
    for b in &blocks {
        if let Some(v) = b.vectors.iter().find(|v| v.len() != n) {
            return Err(parse_err(b.line, format!("complement vector has {} entries instead of {n}", v.len())));
        }
    }
    let mut builder = StructureSpec::builder(names, d1);
    for (i, j, terms) in brackets {
        builder = builder.bracket(i, j, &terms)?;
    }
    Ok(ParsedFile { spec: builder.build(tol)?, complement: blocks })
}

/// Serializes a structure (and optional complement blocks) in the file
/// format; [`parse_structure`] reads it back exactly.
pub fn write_structure(spec: &StructureSpec, complement: &[(usize, DMatrix<f64>)]) -> String {
    let n = spec.dim();
    let names = spec.names();
    let mut out = String::new();
    writeln!(out, "dim {n}").unwrap();
    writeln!(out, "horizontal {}", spec.horizontal_rank()).unwrap();
    writeln!(out, "basis {}", names.join(" ")).unwrap();
    for i in 0..n {
        for j in i + 1..n {
            let terms: Vec<String> =
                (0..n).filter(|&k| spec.coef(i, j, k) != 0.0).map(|k| format!("{} {}", spec.coef(i, j, k), names[k])).collect();
            if !terms.is_empty() {
                writeln!(out, "bracket {} {} = {}", names[i], names[j], terms.join(" ")).unwrap();
            }
        }
    }
    for (level, basis) in complement {
        writeln!(out, "complement {level}").unwrap();
        for col in basis.column_iter() {
            let entries: Vec<String> = col.iter().map(|x| format!("{x}")).collect();
            writeln!(out, "vec {}", entries.join(" ")).unwrap();
        }
    }
    out
}

//! DIMACS CNF export and a reader for the files it writes.
//!
//! SAT clauses become one CNF clause each, NAE clauses two (the forbidden
//! pattern and its complement). XOR constraints use the `x` row dialect:
//! `x1 2 3 0` asserts `x1 ⊕ x2 ⊕ x3 = 1`, and a leading negative literal
//! flips the target to 0.

use std::fmt::Write as _;

use crate::error::{CspError, Result};
use crate::formula::{complement, Clause, ClauseSemantics, Edge, Family, Formula, Model, MAX_ARITY};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DimacsOptions {
    /// Write XORSAT instances as `x` rows instead of rejecting them.
    pub xor_dialect: bool,
}

fn literal(var: u32, forbidden_bit: bool) -> i64 {
    let v = var as i64 + 1;
    if forbidden_bit {
        -v
    } else {
        v
    }
}

fn push_pattern(out: &mut String, edge: &Edge, pattern: u32) {
    let k = edge.arity();
    for (pos, &v) in edge.vars().iter().enumerate() {
        let bit = (pattern >> (k - 1 - pos)) & 1 == 1;
        let _ = write!(out, "{} ", literal(v, bit));
    }
    out.push_str("0\n");
}

/// Exports a SAT or NAESAT formula as DIMACS CNF.
pub fn export_dimacs(f: &Formula) -> Result<String> {
    export_dimacs_with(f, DimacsOptions::default())
}

pub fn export_dimacs_with(f: &Formula, opts: DimacsOptions) -> Result<String> {
    let rows = match f.family {
        Family::Sat => f.len(),
        Family::Naesat => 2 * f.len(),
        Family::Xorsat if opts.xor_dialect => f.len(),
        Family::Xorsat => {
            return Err(CspError::UnsupportedFamily("xorsat has no plain CNF form; enable the xor dialect".into()))
        }
        Family::Gold => return Err(CspError::UnsupportedFamily("gold formulas cannot be exported".into())),
    };
    let mut out = format!("p cnf {} {}\n", f.n, rows);
    for c in &f.clauses {
        match &c.semantics {
            ClauseSemantics::SatForbidden { pattern } => push_pattern(&mut out, &c.edge, *pattern),
            ClauseSemantics::NaeForbidden { pattern } => {
                push_pattern(&mut out, &c.edge, *pattern);
                push_pattern(&mut out, &c.edge, complement(*pattern, c.arity()));
            }
            ClauseSemantics::XorTarget { bit } => {
                out.push('x');
                for (pos, &v) in c.edge.vars().iter().enumerate() {
                    let lit = v as i64 + 1;
                    let lit = if pos == 0 && !bit { -lit } else { lit };
                    let _ = write!(out, "{lit} ");
                }
                out.push_str("0\n");
            }
            ClauseSemantics::GoldTarget { .. } => unreachable!("gold rejected above"),
        }
    }
    Ok(out)
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> CspError {
    CspError::Parse(format!("line {line}: {msg}"))
}

/// Reads DIMACS text in the form written by [`export_dimacs_with`]. Plain
/// clauses come back as SAT clauses (so an exported NAESAT formula returns
/// as its CNF encoding), `x` rows as XORSAT constraints. All rows must have
/// the same width, and a file may not mix the two kinds.
pub fn read_dimacs(text: &str) -> Result<Formula> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut width: Option<usize> = None;
    let mut family: Option<Family> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if header.is_some() {
                return Err(parse_err(line_no, "duplicate header"));
            }
            let fields: Vec<&str> = rest.split_whitespace().collect();
            match fields.as_slice() {
                ["cnf", n, m] => {
                    let n = n.parse().map_err(|_| parse_err(line_no, "bad variable count"))?;
                    let m = m.parse().map_err(|_| parse_err(line_no, "bad clause count"))?;
                    header = Some((n, m));
                }
                _ => return Err(parse_err(line_no, "expected 'p cnf <vars> <clauses>'")),
            }
            continue;
        }
        let (n, _) = header.ok_or_else(|| parse_err(line_no, "clause before header"))?;
        let (is_xor, body) = match line.strip_prefix('x') {
            Some(b) => (true, b),
            None => (false, line),
        };
        let row_family = if is_xor { Family::Xorsat } else { Family::Sat };
        if *family.get_or_insert(row_family) != row_family {
            return Err(parse_err(line_no, "file mixes cnf and xor rows"));
        }
        let lits = body
            .split_whitespace()
            .map(|t| t.parse::<i64>().map_err(|_| parse_err(line_no, format!("bad literal '{t}'"))))
            .collect::<Result<Vec<i64>>>()?;
        let Some((&0, lits)) = lits.split_last() else {
            return Err(parse_err(line_no, "row not terminated by 0"));
        };
        if lits.is_empty() || lits.contains(&0) {
            return Err(parse_err(line_no, "empty row or embedded 0"));
        }
        let k = lits.len();
        if k > MAX_ARITY || *width.get_or_insert(k) != k {
            return Err(parse_err(line_no, format!("row width {k} differs from {}", width.unwrap())));
        }
        let mut vars = Vec::with_capacity(k);
        for &l in lits {
            let v = l.unsigned_abs() as usize;
            if v > n {
                return Err(parse_err(line_no, format!("variable {v} exceeds {n}")));
            }
            vars.push((v - 1) as u32);
        }
        let edge = Edge::new(vars).map_err(|e| parse_err(line_no, e))?;
        let semantics = if is_xor {
            let flips = lits.iter().filter(|&&l| l < 0).count();
            ClauseSemantics::XorTarget { bit: flips % 2 == 0 }
        } else {
            let pattern = lits.iter().fold(0u32, |acc, &l| (acc << 1) | (l < 0) as u32);
            ClauseSemantics::SatForbidden { pattern }
        };
        clauses.push(Clause::new(edge, semantics).map_err(|e| parse_err(line_no, e))?);
    }
    let (n, m) = header.ok_or_else(|| CspError::Parse("missing 'p cnf' header".into()))?;
    if clauses.len() != m {
        return Err(CspError::Parse(format!("header declares {m} rows, found {}", clauses.len())));
    }
    let k = width.unwrap_or(1);
    Formula::new(n, k, family.unwrap_or(Family::Sat), Model::Unplanted, None, clauses)
}

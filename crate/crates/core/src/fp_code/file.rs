//! Plain-text codebook files.
//!
//! ```text
//! n d seed
//! <n lines of d entries, each 1 or -1>
//! <one line of d entries: the trace reference>
//! ```

use std::io::{BufRead, Write};

use super::{Codebook, TraceKey};
use crate::error::{Error, Result};
use crate::matrix::SignMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct CodebookFile {
    pub codebook: Codebook,
    pub key: TraceKey,
    pub seed: u64,
}

fn format_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Format { line, reason: reason.into() }
}

fn write_signs<W: Write>(out: &mut W, signs: impl Iterator<Item = i8>) -> Result<()> {
    let mut first = true;
    for v in signs {
        if !first {
            out.write_all(b" ")?;
        }
        out.write_all(if v == 1 { b"1" } else { b"-1" })?;
        first = false;
    }
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_codebook<W: Write>(out: &mut W, codebook: &Codebook, key: &TraceKey, seed: u64) -> Result<()> {
    let m = &codebook.matrix;
    writeln!(out, "{} {} {}", m.rows(), m.cols(), seed)?;
    for i in 0..m.rows() {
        write_signs(out, (0..m.cols()).map(|j| m.get(i, j)))?;
    }
    write_signs(out, key.reference.iter().copied())?;
    Ok(())
}

fn parse_signs(text: &str, line: usize, d: usize) -> Result<Vec<i8>> {
    let signs = text
        .split_whitespace()
        .map(|tok| match tok {
            "1" => Ok(1),
            "-1" => Ok(-1),
            other => Err(format_err(line, format!("entry {other:?} is not 1 or -1"))),
        })
        .collect::<Result<Vec<i8>>>()?;
    if signs.len() != d {
        return Err(format_err(line, format!("expected {d} entries, found {}", signs.len())));
    }
    Ok(signs)
}

pub fn read_codebook<R: BufRead>(input: R) -> Result<CodebookFile> {
    let mut lines = input.lines();
    let mut next = |line: usize| -> Result<String> {
        lines.next().ok_or_else(|| format_err(line, "unexpected end of file"))?.map_err(Error::from)
    };
    let header = next(1)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(format_err(1, "header must be \"n d seed\""));
    }
    let parse =
        |s: &str, what: &str| -> Result<u64> { s.parse().map_err(|_| format_err(1, format!("bad {what} {s:?}"))) };
    let n = parse(fields[0], "n")? as usize;
    let d = parse(fields[1], "d")? as usize;
    let seed = parse(fields[2], "seed")?;
    if n == 0 || d == 0 {
        return Err(format_err(1, "n and d must be positive"));
    }
    let mut matrix = SignMatrix::filled(n, d, false)?;
    for i in 0..n {
        let row = parse_signs(&next(i + 2)?, i + 2, d)?;
        for (j, v) in row.into_iter().enumerate() {
            matrix.set_positive(i, j, v == 1);
        }
    }
    let reference = parse_signs(&next(n + 2)?, n + 2, d)?;
    Ok(CodebookFile { codebook: Codebook { matrix }, key: TraceKey { reference }, seed })
}

/// Reads the first line of `input` as whitespace-separated reals.
pub fn read_answer<R: BufRead>(input: R) -> Result<Vec<f64>> {
    let line = input.lines().next().ok_or_else(|| format_err(1, "answer file is empty"))??;
    line.split_whitespace()
        .map(|tok| tok.parse::<f64>().map_err(|_| format_err(1, format!("bad number {tok:?}"))))
        .collect()
}

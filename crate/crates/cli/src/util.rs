//! Shared plumbing: exit-code errors, rational parsing/printing, float
//! formatting and small file helpers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cuspidal_core::rates::{rat, Ext, Rat};

/// Failures are sorted into the two documented exit classes: parameter or
/// data problems (exit 2, machine-readable) and I/O problems (exit 3).
#[derive(Debug)]
pub enum AppError {
    Validation(String),
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) => 2,
            AppError::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            AppError::Validation(m) | AppError::Io(m) => m,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Validation(_) => "validation",
            AppError::Io(_) => "io",
        }
    }
}

pub fn validation(e: impl std::fmt::Display) -> AppError {
    AppError::Validation(e.to_string())
}

pub fn io_err(e: impl std::fmt::Display) -> AppError {
    AppError::Io(e.to_string())
}

pub type AppResult<T> = Result<T, AppError>;

/// Parse `a`, `a/b` or `inf` into an extended exponent.
pub fn parse_ext(s: &str) -> AppResult<Ext> {
    if s.eq_ignore_ascii_case("inf") || s == "oo" {
        return Ok(Ext::Inf);
    }
    Ok(Ext::Fin(parse_rat(s)?))
}

/// Parse `a` or `a/b` into an exact rational.
pub fn parse_rat(s: &str) -> AppResult<Rat> {
    let parts: Vec<&str> = s.split('/').collect();
    let bad = || AppError::Validation(format!("expected an integer or a/b fraction, got `{s}`"));
    match parts.as_slice() {
        [a] => Ok(rat(a.trim().parse::<i64>().map_err(|_| bad())?, 1)),
        [a, b] => {
            let num = a.trim().parse::<i64>().map_err(|_| bad())?;
            let den = b.trim().parse::<i64>().map_err(|_| bad())?;
            if den == 0 {
                return Err(bad());
            }
            Ok(rat(num, den))
        }
        _ => Err(bad()),
    }
}

pub fn fmt_rat(r: Rat) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn fmt_ext(e: Ext) -> String {
    match e {
        Ext::Inf => "inf".to_string(),
        Ext::Fin(r) => fmt_rat(r),
    }
}

/// 17 significant digits, locale-free; identical inputs print identically.
pub fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_file(path: &Path, contents: &str) -> AppResult<()> {
    std::fs::write(path, contents).map_err(|e| io_err(format!("writing {}: {e}", path.display())))
}

pub fn read_file(path: &Path) -> AppResult<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(format!("reading {}: {e}", path.display())))
}

/// Resolve an output path against `--out-dir` when it is relative.
pub fn resolve_out(out_dir: &Option<PathBuf>, path: &Path) -> PathBuf {
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

/// Minimal CSV writer for purely numeric tables; no quoting needed.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        let mut buf = String::new();
        let _ = writeln!(buf, "{}", header.join(","));
        Csv { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.buf, "{}", fields.join(","));
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Parse a CSV produced by this tool (or any plain numeric CSV) and pull two
/// columns by header name.
pub fn csv_columns(text: &str, xcol: &str, ycol: &str) -> AppResult<Vec<(f64, f64)>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| validation("empty CSV"))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let xi = names
        .iter()
        .position(|n| *n == xcol)
        .ok_or_else(|| validation(format!("column `{xcol}` not found")))?;
    let yi = names
        .iter()
        .position(|n| *n == ycol)
        .ok_or_else(|| validation(format!("column `{ycol}` not found")))?;
    let mut out = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| -> AppResult<f64> {
            cells
                .get(i)
                .and_then(|c| c.trim().parse::<f64>().ok())
                .ok_or_else(|| validation(format!("row {}: bad number", ln + 2)))
        };
        out.push((parse(xi)?, parse(yi)?));
    }
    Ok(out)
}

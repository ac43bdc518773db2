//! Export of the k-clustering LP relaxation in CPLEX LP text format.
//!
//! ```text
//! min   Σ_{a,b} cost(a,b) · x_a_b
//! s.t.  Σ_b y_b <= k
//!       Σ_b x_a_b = 1          for every client a
//!       y_b - x_a_b >= 0       for every client a and facility b
//!       x, y >= 0
//! ```
//!
//! Coefficients are written with 12 significant digits in C `%.12g` style so
//! that the output is byte-stable across platforms.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::instance::Instance;

const TERMS_PER_LINE: usize = 8;

/// Formats `v` like C's `%.{digits}g`.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn coef(v: f64) -> String {
    format_significant(v, 12)
}

fn push_terms(out: &mut String, terms: impl Iterator<Item = String>) {
    for (i, t) in terms.enumerate() {
        if i > 0 {
            if i % TERMS_PER_LINE == 0 {
                out.push_str("\n   ");
            }
            out.push_str(" + ");
        }
        out.push_str(&t);
    }
}

/// LP text for the relaxation of `instance`.
pub fn lp_string(instance: &Instance) -> String {
    let (n, m) = (instance.n_clients(), instance.n_facilities());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\\ k-clustering LP relaxation: {n} clients, {m} facilities, k = {}, p = {}",
        instance.k(),
        coef(instance.p())
    );
    out.push_str("Minimize\n obj: ");
    push_terms(
        &mut out,
        (0..n).flat_map(|a| (0..m).map(move |b| (a, b))).map(|(a, b)| {
            format!("{} x_{a}_{b}", coef(instance.cost(a, b)))
        }),
    );
    out.push_str("\nSubject To\n open: ");
    push_terms(&mut out, (0..m).map(|b| format!("y_{b}")));
    let _ = writeln!(out, " <= {}", instance.k());
    for a in 0..n {
        let _ = write!(out, " assign_{a}: ");
        push_terms(&mut out, (0..m).map(|b| format!("x_{a}_{b}")));
        out.push_str(" = 1\n");
    }
    for a in 0..n {
        for b in 0..m {
            let _ = writeln!(out, " link_{a}_{b}: y_{b} - x_{a}_{b} >= 0");
        }
    }
    out.push_str("Bounds\n");
    for a in 0..n {
        for b in 0..m {
            let _ = writeln!(out, " x_{a}_{b} >= 0");
        }
    }
    for b in 0..m {
        let _ = writeln!(out, " y_{b} >= 0");
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, lp_string(instance))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(f64, String)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// The subset of LP format produced by [`lp_string`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpModel {
    pub objective: BTreeMap<String, f64>,
    pub constraints: Vec<Constraint>,
    /// Variables with an explicit `>= lower` bound.
    pub lower_bounds: BTreeMap<String, f64>,
}

impl LpModel {
    /// Objective coefficients as a client × facility matrix.
    pub fn cost_matrix(&self, n: usize, m: usize) -> Result<Vec<Vec<f64>>> {
        let mut rows = vec![vec![f64::NAN; m]; n];
        for (name, &v) in &self.objective {
            let mut parts = name.strip_prefix("x_").ok_or_else(|| bad(name))?.split('_');
            let a: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(name))?;
            let b: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(name))?;
            if a >= n || b >= m {
                return Err(bad(name));
            }
            rows[a][b] = v;
        }
        if rows.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::invalid("objective is missing coefficients"));
        }
        Ok(rows)
    }
}

fn bad(what: &str) -> Error {
    Error::invalid(format!("unexpected LP token {what:?}"))
}

#[derive(PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Done,
}

/// Parses a linear expression like `2 x + y - 3.5 z`.
fn parse_terms(tokens: &[&str]) -> Result<Vec<(f64, String)>> {
    let mut out = Vec::new();
    let mut sign = 1.0;
    let mut pending: Option<f64> = None;
    for &tok in tokens {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            t => {
                if let Ok(v) = t.parse::<f64>() {
                    pending = Some(v);
                } else {
                    out.push((sign * pending.take().unwrap_or(1.0), t.to_string()));
                    sign = 1.0;
                }
            }
        }
    }
    if pending.is_some() {
        return Err(Error::invalid("dangling coefficient in LP expression"));
    }
    Ok(out)
}

pub fn parse_lp(text: &str) -> Result<LpModel> {
    let mut model = LpModel::default();
    // statements may continue over several lines; gather them first
    let mut statements: Vec<(usize, String)> = Vec::new();
    let mut current: Option<String> = None;
    let push_current = |cur: &mut Option<String>, stmts: &mut Vec<(usize, String)>, sec: usize| {
        if let Some(s) = cur.take() {
            stmts.push((sec, s));
        }
    };
    let mut sec_id = 0;
    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        let header = match lower.as_str() {
            "minimize" | "minimise" | "min" => Some(1),
            "subject to" | "st" | "s.t." => Some(2),
            "bounds" => Some(3),
            "end" => Some(4),
            _ => None,
        };
        if let Some(h) = header {
            push_current(&mut current, &mut statements, sec_id);
            sec_id = h;
            continue;
        }
        let starts_new = line.contains(':') || sec_id == 3;
        if starts_new {
            push_current(&mut current, &mut statements, sec_id);
            current = Some(line.to_string());
        } else {
            match &mut current {
                Some(s) => {
                    s.push(' ');
                    s.push_str(line);
                }
                None => current = Some(line.to_string()),
            }
        }
    }
    push_current(&mut current, &mut statements, sec_id);

    for (sec, stmt) in statements {
        let section = match sec {
            1 => Section::Objective,
            2 => Section::Constraints,
            3 => Section::Bounds,
            4 => Section::Done,
            _ => Section::Preamble,
        };
        match section {
            Section::Objective => {
                let body = stmt.split_once(':').map_or(stmt.as_str(), |(_, b)| b);
                let tokens: Vec<&str> = body.split_whitespace().collect();
                for (c, v) in parse_terms(&tokens)? {
                    *model.objective.entry(v).or_insert(0.0) += c;
                }
            }
            Section::Constraints => {
                let (name, body) = stmt
                    .split_once(':')
                    .ok_or_else(|| Error::invalid(format!("unnamed constraint {stmt:?}")))?;
                let tokens: Vec<&str> = body.split_whitespace().collect();
                let pos = tokens
                    .iter()
                    .position(|t| matches!(*t, "<=" | ">=" | "=" | "=<" | "=>"))
                    .ok_or_else(|| Error::invalid(format!("constraint {name} has no sense")))?;
                let sense = match tokens[pos] {
                    "<=" | "=<" => Sense::Le,
                    ">=" | "=>" => Sense::Ge,
                    _ => Sense::Eq,
                };
                let rhs: f64 = tokens
                    .get(pos + 1)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::invalid(format!("constraint {name} has no rhs")))?;
                model.constraints.push(Constraint {
                    name: name.trim().to_string(),
                    terms: parse_terms(&tokens[..pos])?,
                    sense,
                    rhs,
                });
            }
            Section::Bounds => {
                let tokens: Vec<&str> = stmt.split_whitespace().collect();
                match tokens.as_slice() {
                    [var, ">=", v] => {
                        let v: f64 = v.parse().map_err(|_| bad(v))?;
                        model.lower_bounds.insert(var.to_string(), v);
                    }
                    _ => return Err(bad(&stmt)),
                }
            }
            Section::Preamble | Section::Done => {}
        }
    }
    Ok(model)
}

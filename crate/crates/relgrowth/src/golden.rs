//! Golden-value table: write, read and check.

use anyhow::{bail, Context, Result};
use relgrowth_core::oracle::{golden_value_report, GoldenRow};

use crate::format::{csv, num};

pub const HEADER: [&str; 10] = ["weighting", "c", "g", "a", "b", "d", "lambda_star", "l", "regime", "max_residual"];

/// Residuals must stay below this.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Relative agreement with the stored values (which carry 12 digits).
pub const VALUE_TOL: f64 = 1e-9;

pub fn render(rows: &[GoldenRow]) -> String {
    csv(
        &HEADER,
        rows.iter().map(|r| {
            vec![
                r.weighting.to_string(),
                num(r.c),
                num(r.g),
                num(r.a),
                num(r.b),
                if r.d.is_nan() { String::new() } else { num(r.d) },
                num(r.lambda_star),
                num(r.l),
                r.regime.to_string(),
                num(r.max_residual()),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredRow {
    pub weighting: String,
    pub c: f64,
    pub g: f64,
    pub a: f64,
    pub b: f64,
    pub d: Option<f64>,
    pub lambda_star: f64,
    pub l: f64,
    pub regime: String,
}

pub fn parse(text: &str) -> Result<Vec<StoredRow>> {
    let mut lines = text.lines();
    let header = lines.next().context("empty golden file")?;
    if header.split(',').collect::<Vec<_>>() != HEADER {
        bail!("unexpected golden header `{header}`");
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != HEADER.len() {
            bail!("golden line {}: expected {} fields, got {}", i + 2, HEADER.len(), f.len());
        }
        let x = |k: usize| -> Result<f64> { f[k].parse().with_context(|| format!("golden line {}: bad number `{}`", i + 2, f[k])) };
        out.push(StoredRow {
            weighting: f[0].to_string(),
            c: x(1)?,
            g: x(2)?,
            a: x(3)?,
            b: x(4)?,
            d: if f[5].is_empty() { None } else { Some(x(5)?) },
            lambda_star: x(6)?,
            l: x(7)?,
            regime: f[8].to_string(),
        });
    }
    Ok(out)
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= VALUE_TOL * x.abs().max(y.abs()).max(1e-300)
}

/// One line per problem found; empty when the check passes.
pub fn compare(fresh: &[GoldenRow], stored: &[StoredRow]) -> Vec<String> {
    let mut problems = Vec::new();
    if fresh.len() != stored.len() {
        problems.push(format!("row count: computed {}, stored {}", fresh.len(), stored.len()));
    }
    for (r, s) in fresh.iter().zip(stored) {
        let id = format!("{} c={} g={}", r.weighting, num(r.c), num(r.g));
        if r.weighting != s.weighting || !close(r.c, s.c) || !close(r.g, s.g) {
            problems.push(format!("{id}: stored row is {} c={} g={}", s.weighting, num(s.c), num(s.g)));
            continue;
        }
        if r.max_residual() >= RESIDUAL_TOL {
            problems.push(format!("{id}: residual {:e}", r.max_residual()));
        }
        let d = if r.d.is_nan() { None } else { Some(r.d) };
        let d_ok = match (d, s.d) {
            (None, None) => true,
            (Some(x), Some(y)) => close(x, y),
            _ => false,
        };
        for (name, ok) in [
            ("a", close(r.a, s.a)),
            ("b", close(r.b, s.b)),
            ("d", d_ok),
            ("lambda_star", close(r.lambda_star, s.lambda_star)),
            ("l", close(r.l, s.l)),
            ("regime", r.regime == s.regime),
        ] {
            if !ok {
                problems.push(format!("{id}: {name} differs from the stored value"));
            }
        }
    }
    problems
}

pub fn compute() -> Result<Vec<GoldenRow>> {
    Ok(golden_value_report()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_mismatch() {
        let rows = compute().unwrap();
        let stored = parse(&render(&rows)).unwrap();
        assert!(compare(&rows, &stored).is_empty());
        let mut bad = stored.clone();
        bad[4].lambda_star *= 1.0 + 1e-6;
        let p = compare(&rows, &bad);
        assert_eq!(p.len(), 1);
        assert!(p[0].contains("lambda_star"));
        assert!(parse("x,y\n").is_err());
    }
}

//! Fixed number formatting for the CSV outputs.

use std::fmt::Write as _;

/// Twelve significant digits, plain notation for exponents in `[-5, 12)`,
/// trailing zeros trimmed. Non-finite values print as `nan`, `inf`, `-inf`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{:.11e}", x);
    let (mantissa, exp) = s.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let out = if (-5..12).contains(&exp) {
        if exp >= 0 {
            let (int, frac) = digits.split_at(exp as usize + 1);
            format!("{int}.{frac}")
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        }
    } else {
        format!("{}.{}e{}", &digits[..1], &digits[1..], exp)
    };
    let out = if out.contains('.') {
        let (head, tail) = match out.split_once('e') {
            Some((h, t)) => (h.to_string(), format!("e{t}")),
            None => (out.clone(), String::new()),
        };
        let head = head.trim_end_matches('0').trim_end_matches('.');
        format!("{head}{tail}")
    } else {
        out
    };
    format!("{sign}{out}")
}

/// A value that may be missing (written as an empty field).
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// CSV text with LF line endings.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.join(","));
    }
    out
}

//! Solves the scenario matrix and writes the per-cell files.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use relgrowth_core::market::{exposure, exposure_grid, WealthMap};
use relgrowth_core::solver::{compare_maps, rho_grid, solve, solve_zhang, Comparison, StateClass};
use relgrowth_core::{Error, JinZhou, SolverSolution, Weighting, ZhangSolution};
use serde::Serialize;

use crate::config::{Config, Grids, Scenario};
use crate::format::{csv, num, opt};

#[derive(Debug, Clone)]
pub struct ExposureCurves {
    pub t: f64,
    pub rho_t: Vec<f64>,
    pub ours: Vec<f64>,
    pub zhang: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub solution: SolverSolution,
    pub zhang: std::result::Result<ZhangSolution, Error>,
    pub rho: Vec<f64>,
    pub comparison: Option<Comparison>,
    pub exposure: ExposureCurves,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub scenario: Scenario,
    pub outcome: std::result::Result<Box<Solved>, Error>,
}

pub fn status_of(e: &Error) -> &'static str {
    match e {
        Error::Infeasible { .. } => "infeasible",
        Error::NoMultiplier { .. } => "no_multiplier",
        Error::IllPosed(_) => "ill_posed",
        Error::Unsupported(_) => "unsupported",
        _ => "error",
    }
}

/// Signs of successive differences, with runs merged and changes below
/// `tol · max|y|` ignored: `"-+-"` is decrease, increase, decrease.
pub fn shape_pattern(y: &[f64], tol: f64) -> String {
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = String::new();
    for w in y.windows(2) {
        let d = w[1] - w[0];
        let c = if d > tol * scale {
            '+'
        } else if d < -tol * scale {
            '-'
        } else {
            continue;
        };
        if !out.ends_with(c) {
            out.push(c);
        }
    }
    out
}

pub const PATTERN_TOL: f64 = 1e-9;

fn exposure_curve<M: WealthMap + Sync>(s: &Scenario, map: &M, t: f64, grid: &[f64]) -> Result<Vec<f64>, Error> {
    grid.iter().map(|&r| exposure(&s.problem.market, map, t, r)).collect()
}

pub fn solve_cell(s: &Scenario, grids: &Grids) -> CellResult {
    let outcome = (|| -> std::result::Result<Box<Solved>, Error> {
        let solution = solve(&s.problem)?;
        let zhang = solve_zhang(&s.problem);
        let m = &s.problem.market;
        let mut features = solution.breakpoints();
        if let Ok(z) = &zhang {
            features.extend(z.breakpoints());
        }
        let rho = rho_grid(m, &features, grids.rho);
        let comparison = zhang.as_ref().ok().map(|z| compare_maps(&solution, z, &rho));
        let t = grids.exposure_time;
        let rho_t = exposure_grid(m, t, &features, grids.exposure);
        let ours = exposure_curve(s, &solution, t, &rho_t)?;
        let zh = match &zhang {
            Ok(z) => Some(exposure_curve(s, z, t, &rho_t)?),
            Err(_) => None,
        };
        Ok(Box::new(Solved {
            solution,
            zhang,
            rho,
            comparison,
            exposure: ExposureCurves { t, rho_t, ours, zhang: zh },
        }))
    })();
    CellResult { scenario: s.clone(), outcome }
}

/// Solves every cell, in matrix order, on the current rayon pool.
pub fn solve_all(config: &Config) -> Result<Vec<CellResult>> {
    let scenarios = config.scenarios()?;
    Ok(scenarios.par_iter().map(|s| solve_cell(s, &config.grids)).collect())
}

#[derive(Debug, Serialize)]
struct ZhangJson {
    status: &'static str,
    reason: Option<String>,
    l: Option<f64>,
    lambda1: Option<f64>,
    max_loss: Option<f64>,
    jump_rho: Option<f64>,
    budget_residual: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SolutionJson<'a> {
    id: &'a str,
    weighting: &'a str,
    c: f64,
    g: f64,
    status: &'static str,
    reason: Option<String>,
    lambda_star: Option<f64>,
    a: f64,
    b: f64,
    d: Option<f64>,
    c_hat: f64,
    regime: Option<&'static str>,
    jumps: Vec<f64>,
    kinks: Vec<f64>,
    budget_residual: Option<f64>,
    quantile_budget_residual: Option<f64>,
    one_sided_f: Option<[f64; 2]>,
    f_history: Vec<[f64; 2]>,
    lambda_set: Vec<f64>,
    phi_shape: Option<String>,
    wellposedness: Option<f64>,
    zhang: Option<ZhangJson>,
    lower_crossing: Option<f64>,
    upper_crossing: Option<f64>,
    ordering_holds: Option<bool>,
    exposure_pattern: Option<String>,
}

fn solution_json(cell: &CellResult) -> Result<String> {
    let s = &cell.scenario;
    let env = relgrowth_core::EnvelopeData::local(&s.problem.utility, s.problem.benchmark.c_hat())?;
    let mut j = SolutionJson {
        id: &s.id,
        weighting: &s.weighting_name,
        c: s.c,
        g: s.g,
        status: "solved",
        reason: None,
        lambda_star: None,
        a: env.a,
        b: env.b,
        d: env.d,
        c_hat: env.c_hat,
        regime: None,
        jumps: vec![],
        kinks: vec![],
        budget_residual: None,
        quantile_budget_residual: None,
        one_sided_f: None,
        f_history: vec![],
        lambda_set: vec![],
        phi_shape: None,
        wellposedness: None,
        zhang: None,
        lower_crossing: None,
        upper_crossing: None,
        ordering_holds: None,
        exposure_pattern: None,
    };
    match &cell.outcome {
        Err(e) => {
            j.status = status_of(e);
            j.reason = Some(e.to_string());
            if let Error::NoMultiplier { lambda0, f_left, f_right } = e {
                j.lambda_star = Some(*lambda0);
                j.one_sided_f = Some([*f_left, *f_right]);
            }
        }
        Ok(sv) => {
            let sol = &sv.solution;
            let d = &sol.diagnostics;
            j.lambda_star = Some(sol.lambda_star);
            j.regime = Some(sol.regime.name());
            j.jumps = sol.jump_rho.clone();
            j.kinks = sol.kink_rho.clone();
            j.budget_residual = Some(d.budget_residual);
            j.quantile_budget_residual = Some(d.quantile_budget - 1.0);
            j.one_sided_f = Some([d.one_sided.0, d.one_sided.1]);
            j.f_history = d.history.iter().map(|&(l, f)| [l, f]).collect();
            j.lambda_set = d.lambda_set.clone();
            j.phi_shape = Some(format!("{:?}", d.shape));
            j.wellposedness = Some(d.wellposedness.value);
            j.zhang = Some(match &sv.zhang {
                Ok(z) => ZhangJson {
                    status: "solved",
                    reason: None,
                    l: Some(z.l),
                    lambda1: Some(z.lambda1),
                    max_loss: Some(z.big_l),
                    jump_rho: (z.jump_rho.is_finite() && z.jump_rho > 0.0).then_some(z.jump_rho),
                    budget_residual: Some(z.budget_residual),
                },
                Err(e) => ZhangJson {
                    status: status_of(e),
                    reason: Some(e.to_string()),
                    l: None,
                    lambda1: None,
                    max_loss: None,
                    jump_rho: None,
                    budget_residual: None,
                },
            });
            if let Some(c) = &sv.comparison {
                j.lower_crossing = c.lower_crossing;
                j.upper_crossing = c.upper_crossing;
                j.ordering_holds = Some(c.ordering_holds);
            }
            j.exposure_pattern = Some(shape_pattern(&sv.exposure.ours, PATTERN_TOL));
        }
    }
    let mut text = serde_json::to_string_pretty(&j)?;
    text.push('\n');
    Ok(text)
}

fn class_name(c: StateClass) -> &'static str {
    match c {
        StateClass::Good => "good",
        StateClass::Intermediate => "intermediate",
        StateClass::Bad => "bad",
    }
}

pub fn write_cell(dir: &Path, cell: &CellResult) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("solution.json"), solution_json(cell)?)?;
    let Ok(sv) = &cell.outcome else {
        return Ok(());
    };
    let zhang = sv.zhang.as_ref().ok();
    let rows = sv.rho.iter().map(|&r| {
        vec![
            num(r),
            num(sv.solution.wealth(r)),
            opt(zhang.map(|z| z.wealth(r))),
            class_name(sv.solution.state_class(r)).to_string(),
        ]
    });
    fs::write(dir.join("wealth_map.csv"), csv(&["rho", "ours", "zhang", "class"], rows))?;
    let e = &sv.exposure;
    let rows = (0..e.rho_t.len()).map(|i| {
        vec![num(e.rho_t[i]), num(e.ours[i]), opt(e.zhang.as_ref().map(|z| z[i]))]
    });
    fs::write(dir.join("exposure.csv"), csv(&["rho_t", "ours", "zhang"], rows))?;
    Ok(())
}

pub const SUMMARY_HEADER: [&str; 15] = [
    "id",
    "weighting",
    "c",
    "g",
    "status",
    "regime",
    "lambda_star",
    "budget_residual",
    "quantile_budget_residual",
    "n_jumps",
    "zhang_status",
    "lambda1",
    "ordering_holds",
    "exposure_pattern",
    "reason",
];

pub fn summary_row(cell: &CellResult) -> Vec<String> {
    let s = &cell.scenario;
    let mut row = vec![s.id.clone(), s.weighting_name.clone(), num(s.c), num(s.g)];
    match &cell.outcome {
        Err(e) => {
            row.push(status_of(e).into());
            row.extend(std::iter::repeat(String::new()).take(9));
            row.push(csv_text(&e.to_string()));
        }
        Ok(sv) => {
            let sol = &sv.solution;
            row.push("solved".into());
            row.push(sol.regime.name().into());
            row.push(num(sol.lambda_star));
            row.push(num(sol.diagnostics.budget_residual));
            row.push(num(sol.diagnostics.quantile_budget - 1.0));
            row.push(sol.jump_rho.len().to_string());
            match &sv.zhang {
                Ok(z) => {
                    row.push("solved".into());
                    row.push(num(z.lambda1));
                }
                Err(e) => {
                    row.push(status_of(e).into());
                    row.push(String::new());
                }
            }
            row.push(sv.comparison.as_ref().map(|c| c.ordering_holds.to_string()).unwrap_or_default());
            row.push(shape_pattern(&sv.exposure.ours, PATTERN_TOL));
            row.push(match &sv.zhang {
                Err(e) => csv_text(&e.to_string()),
                Ok(_) => String::new(),
            });
        }
    }
    row
}

fn csv_text(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// `p, identity, power, jinzhou` on `n` equally spaced points of `[0, 1]`.
pub fn weighting_figure(config: &Config, n: usize) -> Result<String> {
    let m = config.market()?;
    let ws = [Weighting::Identity, Weighting::sqrt(), Weighting::JinZhou(JinZhou::for_kernel_sigma(m.kernel().sigma)?)];
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let p = if i + 1 == n { 1.0 } else { i as f64 / (n - 1) as f64 };
        let mut r = vec![num(p)];
        for w in &ws {
            r.push(num(w.w(p)?));
        }
        rows.push(r);
    }
    Ok(csv(&["p", "identity", "power", "jinzhou"], rows))
}

/// Solves and writes everything under `out`.
pub fn run(config: &Config, out: &Path) -> Result<Vec<CellResult>> {
    let cells = solve_all(config)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    cells.par_iter().try_for_each(|c| write_cell(&out.join(&c.scenario.id), c))?;
    fs::write(out.join("summary.csv"), csv(&SUMMARY_HEADER, cells.iter().map(summary_row)))?;
    fs::write(out.join("weighting.csv"), weighting_figure(config, config.grids.weighting)?)?;
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patterns() {
        assert_eq!(shape_pattern(&[3.0, 2.0, 1.0, 2.0, 3.0, 1.0], 0.0), "-+-");
        assert_eq!(shape_pattern(&[1.0, 1.0, 1.0], 0.0), "");
        assert_eq!(shape_pattern(&[1.0, 1.0 + 1e-12, 1.0, 0.5], 1e-9), "-");
    }

    #[test]
    fn weighting_rows() {
        let text = weighting_figure(&Config::default(), 1001).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1002);
        assert_eq!(lines[1], "0,0,0,0");
        assert_eq!(lines[1001], "1,1,1,1");
        assert_eq!(lines[251], "0.25,0.25,0.5,".to_string() + lines[251].rsplit(',').next().unwrap());
    }
}

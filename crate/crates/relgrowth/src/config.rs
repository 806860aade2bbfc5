//! Run configuration. An empty JSON object reproduces the default study:
//! `c ∈ {0.1, 0.2, 0.3}`, `g ∈ {0, 0.05, -0.05}`, three weightings.

use anyhow::{bail, Context, Result};
use relgrowth_core::market::{Benchmark, MarketParams};
use relgrowth_core::oracle::{GOLDEN_C, GOLDEN_G};
use relgrowth_core::{JinZhou, Problem, UtilityParams, Weighting};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketConfig {
    pub r: f64,
    pub theta: f64,
    pub horizon: f64,
    pub x0: f64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        let m = MarketParams::default();
        Self { r: m.r, theta: m.theta, horizon: m.horizon, x0: m.x0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtilityConfig {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        let u = UtilityParams::TVERSKY_KAHNEMAN;
        Self { alpha: u.alpha, beta: u.beta, kappa: u.kappa }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum WeightingConfig {
    Identity,
    Power {
        #[serde(default = "half")]
        gamma: f64,
    },
    /// Parameters default to `(0.3, 1.6σ, 0.8σ)` for the kernel volatility σ.
    JinZhou {
        #[serde(default)]
        p_bar: Option<f64>,
        #[serde(default)]
        a_bar: Option<f64>,
        #[serde(default)]
        b_bar: Option<f64>,
    },
}

fn half() -> f64 {
    0.5
}

impl WeightingConfig {
    pub fn build(&self, m: &MarketParams) -> Result<Weighting> {
        Ok(match *self {
            Self::Identity => Weighting::Identity,
            Self::Power { gamma } => Weighting::power(gamma)?,
            Self::JinZhou { p_bar, a_bar, b_bar } => {
                let d = JinZhou::for_kernel_sigma(m.kernel().sigma)?;
                Weighting::JinZhou(JinZhou::new(
                    p_bar.unwrap_or(d.p_bar),
                    a_bar.unwrap_or(d.a_bar),
                    b_bar.unwrap_or(d.b_bar),
                )?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    /// Points of the `φ` grid.
    pub phi: usize,
    /// Base points of the terminal `ρ` grid (jumps add more).
    pub rho: usize,
    pub exposure: usize,
    pub exposure_time: f64,
    /// Rows of the weighting figure.
    pub weighting: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            phi: relgrowth_core::quantile::DEFAULT_GRID,
            rho: relgrowth_core::solver::RHO_GRID_POINTS,
            exposure: 401,
            exposure_time: 0.5,
            weighting: 1001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub market: MarketConfig,
    pub utility: UtilityConfig,
    pub c: Vec<f64>,
    pub g: Vec<f64>,
    pub weightings: Vec<WeightingConfig>,
    pub grids: Grids,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            market: MarketConfig::default(),
            utility: UtilityConfig::default(),
            c: GOLDEN_C.to_vec(),
            g: GOLDEN_G.to_vec(),
            weightings: vec![
                WeightingConfig::Identity,
                WeightingConfig::Power { gamma: 0.5 },
                WeightingConfig::JinZhou { p_bar: None, a_bar: None, b_bar: None },
            ],
            grids: Grids::default(),
            seed: 20240601,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub weighting_name: String,
    pub c: f64,
    pub g: f64,
    pub problem: Problem,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("invalid configuration")
    }

    pub fn market(&self) -> Result<MarketParams> {
        let m = MarketParams {
            r: self.market.r,
            theta: self.market.theta,
            horizon: self.market.horizon,
            x0: self.market.x0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn utility(&self) -> Result<UtilityParams> {
        Ok(UtilityParams::new(self.utility.alpha, self.utility.beta, self.utility.kappa)?)
    }

    /// Weighting-major, then `c`, then `g`.
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        if self.c.is_empty() || self.g.is_empty() || self.weightings.is_empty() {
            bail!("the scenario matrix is empty");
        }
        let m = self.market()?;
        let u = self.utility()?;
        let mut out = Vec::new();
        for wc in &self.weightings {
            let w = wc.build(&m)?;
            for &c in &self.c {
                for &g in &self.g {
                    let mut problem = Problem::new(m, Benchmark::constant_excess(g, c)?, u, w);
                    problem.n_grid = self.grids.phi;
                    out.push(Scenario {
                        id: scenario_id(w.name(), c, g),
                        weighting_name: w.name().to_string(),
                        c,
                        g,
                        problem,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Applies `KEY=VAL[,KEY=VAL...]`. Setting `c`, `g` or `weighting`
    /// narrows the matrix to that single value.
    pub fn apply_overrides(&mut self, overrides: &str) -> Result<()> {
        for item in overrides.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, val) = item.split_once('=').with_context(|| format!("expected KEY=VAL, got `{item}`"))?;
            let num = || -> Result<f64> { val.trim().parse::<f64>().with_context(|| format!("bad number for {key}: `{val}`")) };
            match key.trim() {
                "c" => self.c = vec![num()?],
                "g" => self.g = vec![num()?],
                "weighting" | "w" => {
                    self.weightings = vec![match val.trim() {
                        "identity" => WeightingConfig::Identity,
                        "power" | "sqrt" => WeightingConfig::Power { gamma: 0.5 },
                        "jinzhou" => WeightingConfig::JinZhou { p_bar: None, a_bar: None, b_bar: None },
                        other => bail!("unknown weighting `{other}`"),
                    }]
                }
                "gamma" => {
                    let gamma = num()?;
                    for w in &mut self.weightings {
                        if let WeightingConfig::Power { gamma: g } = w {
                            *g = gamma;
                        }
                    }
                }
                "r" => self.market.r = num()?,
                "theta" => self.market.theta = num()?,
                "T" | "horizon" => self.market.horizon = num()?,
                "x0" => self.market.x0 = num()?,
                "alpha" => self.utility.alpha = num()?,
                "beta" => self.utility.beta = num()?,
                "kappa" => self.utility.kappa = num()?,
                "seed" => self.seed = val.trim().parse().with_context(|| format!("bad seed `{val}`"))?,
                other => bail!("unknown scenario key `{other}`"),
            }
        }
        Ok(())
    }
}

pub fn scenario_id(weighting: &str, c: f64, g: f64) -> String {
    format!("{weighting}_c{c}_g{g}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default_study() {
        let c = Config::from_json("{}").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.scenarios().unwrap().len(), 27);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(Config::from_json(r#"{"market": {"rate": 0.1}}"#).is_err());
        assert!(Config::from_json(r#"{"colour": 1}"#).is_err());
        assert!(Config::from_json(r#"{"weightings": [{"kind": "prelec"}]}"#).is_err());
    }

    #[test]
    fn weighting_entries() {
        let c = Config::from_json(r#"{"weightings": [{"kind": "power", "gamma": 0.7}, {"kind": "jinzhou", "b_bar": 0.4}]}"#).unwrap();
        let s = c.scenarios().unwrap();
        assert_eq!(s.len(), 18);
        match s[17].problem.weighting {
            Weighting::JinZhou(j) => assert_eq!(j.b_bar, 0.4),
            _ => panic!(),
        }
    }

    #[test]
    fn overrides_narrow_the_matrix() {
        let mut c = Config::default();
        c.apply_overrides("c=0.3,g=0,weighting=identity").unwrap();
        let s = c.scenarios().unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].id, "identity_c0.3_g0");
        assert!(c.apply_overrides("colour=1").is_err());
        assert!(c.apply_overrides("c").is_err());
    }
}

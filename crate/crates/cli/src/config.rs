//! Flat `key = value` run configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use mixflow::{ClassParams, PgaConfig, SolverConfig, SolverMode};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "MIXFLOW_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    Nguyen,
    SiouxFalls,
}

impl FromStr for Fixture {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nguyen" | "nguyen-dupuis" => Ok(Fixture::Nguyen),
            "sioux-falls" | "siouxfalls" => Ok(Fixture::SiouxFalls),
            other => bail!("unknown fixture '{other}' (expected nguyen or sioux-falls)"),
        }
    }
}

/// Everything one command needs: model parameters, solver and PGA settings,
/// inputs and outputs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ClassParams,
    pub solver: SolverConfig,
    pub pga: PgaConfig,
    pub net: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub fixture: Option<Fixture>,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: usize,
    pub timing: bool,
    pub check_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ClassParams::default(),
            solver: SolverConfig::default(),
            pga: PgaConfig::default(),
            net: None,
            trips: None,
            fixture: None,
            seed: 0,
            out: PathBuf::from("mixflow-out"),
            threads: 0,
            timing: true,
            check_tol: 1e-3,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value '{value}' for {key}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => bail!("invalid value '{value}' for {key}: expected on or off"),
    }
}

impl RunConfig {
    /// Applies one setting. `gap` sets both the solver tolerance and the
    /// final PGA gap.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.params;
        let s = &mut self.solver;
        match key {
            "vot_rv" => p.vot_rv = parse(key, value)?,
            "vot_av" => p.vot_av = parse(key, value)?,
            "fuel_price" => p.fuel_price = parse(key, value)?,
            "theta" => p.theta = parse(key, value)?,
            "nesting" | "u" => p.nesting = parse(key, value)?,
            "mu_rv" => p.mu_rv = parse(key, value)?,
            "mu_av" => p.mu_av = parse(key, value)?,
            "penetration" => p.penetration = parse(key, value)?,
            "av_capacity_ratio" => p.av_capacity_ratio = parse(key, value)?,
            "flow_floor" => p.flow_floor = parse(key, value)?,
            "gap" => {
                s.gap_tol = parse(key, value)?;
                self.pga.final_gap = s.gap_tol;
            }
            "gamma_init" => s.gamma_init = parse(key, value)?,
            "gamma_growth" => s.gamma_growth = parse(key, value)?,
            "lambda2" => s.lambda2 = parse(key, value)?,
            "max_iters" => s.max_iters = parse(key, value)?,
            "mode" => s.mode = value.parse::<SolverMode>().map_err(|e| anyhow!(e))?,
            "h_floor" => s.h_floor = parse(key, value)?,
            "step_damping" => s.step_damping = parse(key, value)?,
            "damping_recovery" => s.damping_recovery = parse(key, value)?,
            "k" => self.pga.k = parse(key, value)?,
            "outer_tol" => self.pga.outer_tol = parse(key, value)?,
            "inner_gap" => self.pga.inner_gap = parse(key, value)?,
            "max_outer" => self.pga.max_outer = parse(key, value)?,
            "net" => self.net = Some(PathBuf::from(value)),
            "trips" => self.trips = Some(PathBuf::from(value)),
            "fixture" => self.fixture = Some(value.parse()?),
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "threads" => self.threads = parse(key, value)?,
            "timing" => self.timing = parse_bool(key, value)?,
            "check_tol" => self.check_tol = parse(key, value)?,
            other => bail!("unknown config key '{other}'"),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{source}:{}: expected 'key = value'", i + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("{source}:{}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<'a>(&mut self, overrides: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("override '{item}' is not key=value"))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.solver.validate()?;
        self.pga.validate()?;
        if !(self.check_tol > 0.0) {
            bail!("check_tol must be positive, got {}", self.check_tol);
        }
        Ok(())
    }
}

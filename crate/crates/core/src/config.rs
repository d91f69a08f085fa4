//! Plain-text key=value configuration files.
//!
//! Format: one `key = value` pair per line, `#` comments, and an optional
//! `[simulate]` section holding simulation keys. Top-level keys are the six
//! market constants plus solver tolerances:
//!
//! ```text
//! mu = 1.0
//! sigma = 1.0
//! mu_tilde = 0.5
//! sigma_tilde = 0.5
//! beta = 2.0
//! alpha = 0.3333333333333333
//! ode_tol = 1e-10
//! bisect_tol = 1e-7
//! z_max = 50
//!
//! [simulate]
//! dt = 1e-3
//! horizon = 20
//! paths = 10000
//! seed = 42
//! x0 = 2
//! y0 = 1
//! antithetic = false
//! ```
//!
//! Every key is optional in the file; command-line flags override file values
//! and defaults fill the rest (market constants have no defaults and must
//! come from the file or flags).

use crate::error::{Error, Result};

/// Raw values read from a configuration file; `None` means the key was
/// absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub mu_tilde: Option<f64>,
    pub sigma_tilde: Option<f64>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub ode_tol: Option<f64>,
    pub bisect_tol: Option<f64>,
    pub z_max: Option<f64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub paths: Option<u64>,
    pub seed: Option<u64>,
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub antithetic: Option<bool>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<FileConfig> {
        let mut cfg = FileConfig::default();
        let mut in_simulate = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                match line {
                    "[simulate]" => in_simulate = true,
                    other => {
                        return Err(Error::Config(format!(
                            "line {line_no}: unknown section {other}"
                        )))
                    }
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {line_no}: expected key = value, got {line:?}"))
            })?;
            let key = key.trim();
            let value = value.trim();
            if in_simulate {
                cfg.set_simulate(key, value, line_no)?;
            } else {
                cfg.set_top_level(key, value, line_no)?;
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set_top_level(&mut self, key: &str, value: &str, line_no: usize) -> Result<()> {
        let slot = match key {
            "mu" => &mut self.mu,
            "sigma" => &mut self.sigma,
            "mu_tilde" => &mut self.mu_tilde,
            "sigma_tilde" => &mut self.sigma_tilde,
            "beta" => &mut self.beta,
            "alpha" => &mut self.alpha,
            "ode_tol" => &mut self.ode_tol,
            "bisect_tol" => &mut self.bisect_tol,
            "z_max" => &mut self.z_max,
            other => {
                return Err(Error::Config(format!(
                    "line {line_no}: unknown key {other:?}"
                )))
            }
        };
        *slot = Some(parse_f64(key, value, line_no)?);
        Ok(())
    }

    fn set_simulate(&mut self, key: &str, value: &str, line_no: usize) -> Result<()> {
        match key {
            "dt" => self.dt = Some(parse_f64(key, value, line_no)?),
            "horizon" => self.horizon = Some(parse_f64(key, value, line_no)?),
            "x0" => self.x0 = Some(parse_f64(key, value, line_no)?),
            "y0" => self.y0 = Some(parse_f64(key, value, line_no)?),
            "paths" => self.paths = Some(parse_u64(key, value, line_no)?),
            "seed" => self.seed = Some(parse_u64(key, value, line_no)?),
            "antithetic" => {
                self.antithetic = Some(match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    other => {
                        return Err(Error::Config(format!(
                            "line {line_no}: antithetic must be true/false, got {other:?}"
                        )))
                    }
                })
            }
            other => {
                return Err(Error::Config(format!(
                    "line {line_no}: unknown simulate key {other:?}"
                )))
            }
        }
        Ok(())
    }
}

fn parse_f64(key: &str, value: &str, line_no: usize) -> Result<f64> {
    value.parse::<f64>().map_err(|_| {
        Error::Config(format!(
            "line {line_no}: {key} must be a number, got {value:?}"
        ))
    })
}

fn parse_u64(key: &str, value: &str, line_no: usize) -> Result<u64> {
    value.parse::<u64>().map_err(|_| {
        Error::Config(format!(
            "line {line_no}: {key} must be a nonnegative integer, got {value:?}"
        ))
    })
}

//! Experiment configuration: a flat TOML table whose keys carry their units.
//!
//! ```toml
//! seed = 7
//! capacity_price_usd_per_kw_mo = [0.01, 0.1, 1, 10, 50]
//! wind_capacity_kw = [100]
//! cost_rsd = [0.15]
//! policies = ["opt", "seq", "pred", "lin"]
//! ```
//!
//! Keys left out take the defaults of [`ExperimentConfig::default`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flex::{FlexParams, ViolationMode};
use crate::lin::NegotiationParams;
use crate::outcome::PolicyTag;

/// How LIN's contract is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinSolver {
    #[default]
    Centralized,
    /// Price negotiation between the LSE and the customers.
    Distributed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Household load traces (CSV); synthetic homes when absent.
    pub home_traces: Option<PathBuf>,
    /// Wind trace (CSV, first trace used); synthetic wind when absent.
    pub wind_trace: Option<PathBuf>,
    pub synth_homes: usize,
    pub synth_days: usize,
    pub customers_per_base: usize,
    pub slot_seconds: u32,
    /// Master seed. Synthesis, day split and cost draws use seed, seed + 1
    /// and seed + 2.
    pub seed: u64,
    pub penalty_usd_per_kw2: f64,
    pub cost_min_usd_per_kw2: f64,
    pub cost_max_usd_per_kw2: f64,
    pub cost_rsd: Vec<f64>,
    pub capacity_price_usd_per_kw_mo: Vec<f64>,
    pub wind_capacity_kw: Vec<f64>,
    pub policies: Vec<PolicyTag>,
    /// Commitment levels evaluated for lin-plus; must contain 1.
    pub rho: Vec<f64>,
    pub flex_mode: ViolationMode,
    pub audit_tolerance: f64,
    pub lin_solver: LinSolver,
    pub negotiation_zeta: f64,
    pub negotiation_eps: Option<f64>,
    pub negotiation_max_iter: usize,
    pub negotiation_prox: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let neg = NegotiationParams::default();
        ExperimentConfig {
            home_traces: None,
            wind_trace: None,
            synth_homes: 3,
            synth_days: 42,
            customers_per_base: 100,
            slot_seconds: 300,
            seed: 1,
            penalty_usd_per_kw2: 0.1 / 144.0,
            cost_min_usd_per_kw2: 1.0 / 144.0,
            cost_max_usd_per_kw2: 10.0 / 144.0,
            cost_rsd: vec![0.15],
            capacity_price_usd_per_kw_mo: vec![0.01, 0.1, 1.0, 10.0, 50.0],
            wind_capacity_kw: vec![100.0],
            policies: vec![PolicyTag::Opt, PolicyTag::Seq, PolicyTag::Pred, PolicyTag::Lin],
            rho: (1..=10).map(|k| k as f64 / 10.0).collect(),
            flex_mode: ViolationMode::Clairvoyant,
            audit_tolerance: FlexParams::default().audit_tolerance,
            lin_solver: LinSolver::Centralized,
            negotiation_zeta: neg.zeta,
            negotiation_eps: neg.eps,
            negotiation_max_iter: neg.max_iter,
            negotiation_prox: neg.prox,
            output_dir: PathBuf::from("results"),
        }
    }
}

fn check_list(name: &str, values: &[f64], ok: impl Fn(f64) -> bool, expect: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Config(format!("`{name}` must not be empty")));
    }
    if let Some(v) = values.iter().find(|v| !ok(**v)) {
        return Err(Error::Config(format!("`{name}` values must be {expect}, got {v}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1));
            Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.slot_seconds == 0 || 86_400 % self.slot_seconds != 0 {
            return Err(Error::Config(format!("slot_seconds {} must divide a day", self.slot_seconds)));
        }
        if self.customers_per_base == 0 {
            return Err(Error::Config("customers_per_base must be at least 1".into()));
        }
        if self.home_traces.is_none() && (self.synth_homes == 0 || self.synth_days == 0) {
            return Err(Error::Config("synthetic traces need synth_homes and synth_days >= 1".into()));
        }
        if !(self.penalty_usd_per_kw2 > 0.0 && self.penalty_usd_per_kw2.is_finite()) {
            return Err(Error::Config(format!("penalty_usd_per_kw2 must be positive, got {}", self.penalty_usd_per_kw2)));
        }
        let (lo, hi) = (self.cost_min_usd_per_kw2, self.cost_max_usd_per_kw2);
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Config(format!("cost range [{lo}, {hi}] must satisfy 0 < min <= max")));
        }
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        check_list("capacity_price_usd_per_kw_mo", &self.capacity_price_usd_per_kw_mo, finite_nonneg, "finite and >= 0")?;
        check_list("wind_capacity_kw", &self.wind_capacity_kw, finite_nonneg, "finite and >= 0")?;
        check_list("cost_rsd", &self.cost_rsd, |v| (0.0..1.0).contains(&v), "in [0, 1)")?;
        if self.policies.is_empty() {
            return Err(Error::Config("`policies` must not be empty".into()));
        }
        let mut sorted = self.policies.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.policies.len() {
            return Err(Error::Config("`policies` lists a policy twice".into()));
        }
        if self.policies.contains(&PolicyTag::LinPlus) {
            check_list("rho", &self.rho, |v| (0.0..=1.0).contains(&v), "in [0, 1]")?;
            if !self.rho.contains(&1.0) {
                return Err(Error::Config("`rho` must contain 1".into()));
            }
        }
        self.flex_params(1.0).map_err(|e| Error::Config(e.to_string()))?;
        let n = self.negotiation_params();
        if !(n.zeta > 0.0) || n.eps.is_some_and(|e| !(e > 0.0)) || n.max_iter == 0 || !(n.prox >= 0.0) {
            return Err(Error::Config(
                "negotiation needs zeta > 0, eps > 0, max_iter >= 1 and prox >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn flex_params(&self, rho: f64) -> Result<FlexParams> {
        let p = FlexParams {
            rho,
            audit_tolerance: self.audit_tolerance,
            mode: self.flex_mode,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn negotiation_params(&self) -> NegotiationParams {
        NegotiationParams {
            zeta: self.negotiation_zeta,
            eps: self.negotiation_eps,
            max_iter: self.negotiation_max_iter,
            prox: self.negotiation_prox,
        }
    }

    /// Replace the master seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn synth_seed(&self) -> u64 {
        self.seed
    }

    pub fn split_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn cost_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }
}

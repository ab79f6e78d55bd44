//! Per-slot simulation results shared by all policies, and the summary
//! metrics computed from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Relative slack when deciding whether |Δ| exceeds κ.
const EXCEED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyTag {
    Opt,
    Seq,
    Pred,
    Lin,
    LinPlus,
}

impl PolicyTag {
    pub const ALL: [PolicyTag; 5] = [
        PolicyTag::Opt,
        PolicyTag::Seq,
        PolicyTag::Pred,
        PolicyTag::Lin,
        PolicyTag::LinPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyTag::Opt => "opt",
            PolicyTag::Seq => "seq",
            PolicyTag::Pred => "pred",
            PolicyTag::Lin => "lin",
            PolicyTag::LinPlus => "lin-plus",
        }
    }
}

impl fmt::Display for PolicyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        PolicyTag::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}` (expected opt, seq, pred, lin or lin-plus)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotOutcome {
    pub d: f64,
    /// Σ_i x_i.
    pub absorbed: f64,
    /// Δ = D − Σ_i x_i.
    pub leftover: f64,
    pub customer_cost: f64,
    pub lse_cost: f64,
}

impl SlotOutcome {
    pub fn new(d: f64, absorbed: f64, customer_cost: f64, penalty: f64) -> Self {
        let leftover = d - absorbed;
        SlotOutcome {
            d,
            absorbed,
            leftover,
            customer_cost,
            lse_cost: penalty * leftover * leftover,
        }
    }

    pub fn cost(&self) -> f64 {
        self.customer_cost + self.lse_cost
    }

    pub fn exceedance(&self, kappa: f64) -> f64 {
        (self.leftover.abs() - kappa).max(0.0)
    }

    pub fn exceeds(&self, kappa: f64) -> bool {
        self.leftover.abs() > kappa * (1.0 + EXCEED_TOL) + EXCEED_TOL
    }
}

/// A policy's run over one scenario set.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub policy: PolicyTag,
    pub kappa: f64,
    /// c·κ, per slot.
    pub capacity_cost: f64,
    pub slots: Vec<SlotOutcome>,
}

impl Outcome {
    fn mean(&self, f: impl Fn(&SlotOutcome) -> f64) -> f64 {
        if self.slots.is_empty() {
            return 0.0;
        }
        self.slots.iter().map(f).sum::<f64>() / self.slots.len() as f64
    }

    /// Mean real-time cost per slot, without capacity.
    pub fn operating_cost(&self) -> f64 {
        self.mean(SlotOutcome::cost)
    }

    /// Capacity plus mean real-time cost, per slot.
    pub fn social_cost(&self) -> f64 {
        self.capacity_cost + self.operating_cost()
    }

    pub fn mean_abs_d(&self) -> f64 {
        self.mean(|s| s.d.abs())
    }

    fn normalized(&self, value: f64) -> f64 {
        let scale = self.mean_abs_d();
        if scale > 0.0 { value / scale } else { 0.0 }
    }

    pub fn dr_norm(&self) -> f64 {
        self.normalized(self.mean(|s| s.absorbed.abs()))
    }

    pub fn leftover_norm(&self) -> f64 {
        let k = self.kappa;
        self.normalized(self.mean(|s| s.exceedance(k)))
    }

    pub fn exceedance_rate(&self) -> f64 {
        let k = self.kappa;
        self.mean(|s| if s.exceeds(k) { 1.0 } else { 0.0 })
    }
}

//! Prediction-based pricing: the LSE posts a price computed from the
//! estimated costs â_i and customers respond with their realized costs.

use crate::error::{Error, Result};
use crate::model::LseCost;
use crate::outcome::{Outcome, PolicyTag, SlotOutcome};
use crate::planner::CapacityPlan;
use crate::scenario::ScenarioSet;

/// Number of κ candidates in the capacity search.
pub const KAPPA_GRID: usize = 200;

/// Customer responses to price `p` under estimated costs: x_i = p/(2â_i).
pub fn estimated_response(a_hat: &[f64], p: f64) -> Vec<f64> {
    a_hat.iter().map(|a| p / (2.0 * a)).collect()
}

/// Price as a function of the observed mismatch, for fixed κ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRule {
    pub kappa: f64,
    pub penalty: f64,
    /// S = Σ 1/(2â_i): estimated aggregate response per unit price.
    pub slope: f64,
}

impl PriceRule {
    /// Unclamped price 2AD/(1+2AS).
    pub fn free_price(&self, d: f64) -> f64 {
        2.0 * self.penalty * d / (1.0 + 2.0 * self.penalty * self.slope)
    }

    pub fn price(&self, d: f64) -> f64 {
        let p = self.free_price(d);
        let left = d - p * self.slope;
        if left.abs() > self.kappa {
            (d - self.kappa.copysign(left)) / self.slope
        } else {
            p
        }
    }

    pub fn estimated_leftover(&self, d: f64) -> f64 {
        d - self.price(d) * self.slope
    }

    /// H(κ; D): estimated customer cost plus penalty at the posted price.
    pub fn estimated_cost(&self, d: f64) -> f64 {
        let p = self.price(d);
        let left = d - p * self.slope;
        p * p * self.slope / 2.0 + self.penalty * left * left
    }

    /// Realized outcome when customers face costs with Σ 1/a_i(t) = `inv_sum`.
    pub fn respond(&self, d: f64, inv_sum: f64) -> SlotOutcome {
        let p = self.price(d);
        let absorbed = p * inv_sum / 2.0;
        SlotOutcome::new(d, absorbed, p * p * inv_sum / 4.0, self.penalty)
    }
}

pub fn price_rule(a_hat: &[f64], penalty: f64, kappa: f64) -> Result<PriceRule> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!("kappa must be >= 0, got {kappa}")));
    }
    if !(penalty > 0.0) {
        return Err(Error::InvalidModel(format!("penalty must be positive, got {penalty}")));
    }
    if a_hat.is_empty() {
        return Err(Error::InvalidModel("price rule needs at least one customer".into()));
    }
    if let Some(a) = a_hat.iter().find(|a| !(**a > 0.0)) {
        return Err(Error::InvalidModel(format!("estimated cost {a} is not positive")));
    }
    Ok(PriceRule {
        kappa,
        penalty,
        slope: a_hat.iter().map(|a| 0.5 / a).sum(),
    })
}

/// Capacity by exhaustive search over an evenly spaced grid on
/// [0, worst-case |D|], scoring c·κ + mean H(κ; D) on the training set.
pub fn solve_pred(train: &ScenarioSet, cost: &LseCost) -> Result<(CapacityPlan, PriceRule)> {
    solve_pred_on_grid(train, cost, KAPPA_GRID)
}

pub fn solve_pred_on_grid(train: &ScenarioSet, cost: &LseCost, points: usize) -> Result<(CapacityPlan, PriceRule)> {
    if train.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let top = train.support.d_abs_max();
    let base = price_rule(&train.a_hat, cost.penalty, 0.0)?;
    let objective = |kappa: f64| {
        let rule = PriceRule { kappa, ..base };
        let h = train.mismatches().map(|d| rule.estimated_cost(d)).sum::<f64>() / train.len() as f64;
        cost.capacity_cost(kappa) + h
    };
    let points = points.max(2);
    let mut best = (0.0, objective(0.0));
    for k in 1..points {
        let kappa = top * k as f64 / (points - 1) as f64;
        let value = objective(kappa);
        if value < best.1 {
            best = (kappa, value);
        }
    }
    let plan = CapacityPlan {
        kappa: best.0,
        expected_cost: best.1,
        policy: PolicyTag::Pred,
    };
    Ok((plan, PriceRule { kappa: best.0, ..base }))
}

/// Post prices by `rule` on every slot of `set`; customers respond with
/// their realized a_i(t). Leftovers beyond κ are kept and reported.
pub fn simulate_pred(rule: &PriceRule, set: &ScenarioSet, cost: &LseCost, policy: PolicyTag) -> Outcome {
    let slots = set
        .scenarios
        .iter()
        .zip(&set.inv_cost_sums)
        .map(|(s, &inv)| rule.respond(s.d, inv))
        .collect();
    Outcome {
        policy,
        kappa: rule.kappa,
        capacity_cost: cost.capacity_cost(rule.kappa),
        slots,
    }
}

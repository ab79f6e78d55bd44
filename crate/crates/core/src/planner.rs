//! Capacity planning for the offline optimum (OPT) and the sequential
//! worst-case baseline (SEQ).

use crate::error::{Error, Result};
use crate::model::{dispatch_aggregate, dispatch_capped, DispatchResult, LseCost};
use crate::outcome::{Outcome, PolicyTag, SlotOutcome};
use crate::pred::{price_rule, simulate_pred, PriceRule};
use crate::scenario::ScenarioSet;

const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityPlan {
    pub kappa: f64,
    /// c·κ plus mean real-time cost, per slot.
    pub expected_cost: f64,
    pub policy: PolicyTag,
}

fn mean_over(set: &ScenarioSet, f: impl Fn(f64, f64) -> f64) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    set.mismatches()
        .zip(&set.inv_cost_sums)
        .map(|(d, &inv)| f(d, inv))
        .sum::<f64>()
        / set.len() as f64
}

/// mean_t R(κ; t): optimal real-time cost with realized costs.
pub fn mean_realtime_cost(set: &ScenarioSet, penalty: f64, kappa: f64) -> f64 {
    mean_over(set, |d, inv| dispatch_aggregate(inv, penalty, d, kappa).total_cost())
}

/// mean_t (θ̲ + θ̄) at κ.
pub fn mean_dual_sum(set: &ScenarioSet, penalty: f64, kappa: f64) -> f64 {
    mean_over(set, |d, inv| dispatch_aggregate(inv, penalty, d, kappa).dual_sum)
}

/// c·κ + mean_t R(κ; t).
pub fn opt_objective(set: &ScenarioSet, cost: &LseCost, kappa: f64) -> f64 {
    cost.capacity_cost(kappa) + mean_realtime_cost(set, cost.penalty, kappa)
}

/// Smallest κ at which no slot's capacity constraint binds.
pub fn free_kappa(set: &ScenarioSet, penalty: f64) -> f64 {
    set.mismatches()
        .zip(&set.inv_cost_sums)
        .map(|(d, &inv)| (d / (1.0 + penalty * inv)).abs())
        .fold(0.0, f64::max)
}

/// OPT capacity: the smallest κ with mean dual sum ≤ c, by bisection on
/// [0, κ_free]. The dual sum is nonincreasing in κ, so this is the first
/// order condition of the convex outer problem.
pub fn solve_opt(set: &ScenarioSet, cost: &LseCost) -> Result<CapacityPlan> {
    if set.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let c = cost.capacity_price;
    let a = cost.penalty;
    let mut hi = free_kappa(set, a);
    let kappa = if c == 0.0 {
        hi
    } else if mean_dual_sum(set, a, 0.0) <= c {
        0.0
    } else {
        let mut lo = 0.0;
        let tol = 1e-13 * hi.max(1e-300);
        for _ in 0..BISECTION_STEPS {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mean_dual_sum(set, a, mid) > c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    Ok(CapacityPlan {
        kappa,
        expected_cost: opt_objective(set, cost, kappa),
        policy: PolicyTag::Opt,
    })
}

/// Full per-customer dispatch of every slot at κ.
pub fn opt_dispatches(set: &ScenarioSet, cost: &LseCost, kappa: f64) -> Result<Vec<DispatchResult>> {
    set.scenarios
        .iter()
        .map(|s| dispatch_capped(&s.a, cost.penalty, s.d, kappa))
        .collect()
}

pub fn simulate_opt(set: &ScenarioSet, cost: &LseCost, kappa: f64) -> Outcome {
    let slots = set
        .mismatches()
        .zip(&set.inv_cost_sums)
        .map(|(d, &inv)| {
            let r = dispatch_aggregate(inv, cost.penalty, d, kappa);
            SlotOutcome {
                d,
                absorbed: r.absorbed,
                leftover: r.leftover,
                customer_cost: r.customer_cost,
                lse_cost: r.lse_cost,
            }
        })
        .collect();
    Outcome {
        policy: PolicyTag::Opt,
        kappa,
        capacity_cost: cost.capacity_cost(kappa),
        slots,
    }
}

/// SEQ: capacity covers the worst training mismatch, then real-time prices
/// follow the prediction-based rule at that capacity. The expected cost is
/// evaluated on the training set.
pub fn solve_seq(train: &ScenarioSet, cost: &LseCost) -> Result<(CapacityPlan, PriceRule)> {
    if train.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let kappa = train.support.d_abs_max();
    let rule = price_rule(&train.a_hat, cost.penalty, kappa)?;
    let expected_cost = simulate_pred(&rule, train, cost, PolicyTag::Seq).social_cost();
    Ok((
        CapacityPlan {
            kappa,
            expected_cost,
            policy: PolicyTag::Seq,
        },
        rule,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::realized_social_cost;
    use crate::scenario::Scenario;

    fn set(ds: &[f64], a: f64) -> ScenarioSet {
        let scenarios = ds.iter().map(|&d| Scenario::new(vec![d], 0.0, vec![a])).collect();
        ScenarioSet::new(scenarios, vec![a], vec![a]).unwrap()
    }

    #[test]
    fn two_scenario_toy() {
        // κ < 1: each slot's dual is 4 − 4κ, so 0.5 = 4 − 4κ
        let s = set(&[2.0, -2.0], 1.0);
        let plan = solve_opt(&s, &LseCost::new(1.0, 0.5).unwrap()).unwrap();
        assert!((plan.kappa - 0.875).abs() < 1e-9, "{}", plan.kappa);
    }

    #[test]
    fn free_capacity_never_binds() {
        let s = set(&[3.0, -1.0, 0.5], 2.0);
        let plan = solve_opt(&s, &LseCost::new(1.0, 0.0).unwrap()).unwrap();
        assert!((plan.kappa - 2.0).abs() < 1e-12);
        assert_eq!(mean_dual_sum(&s, 1.0, plan.kappa), 0.0);
    }

    #[test]
    fn expensive_capacity_matches_golden_section() {
        let s = set(&[5.0, -3.0, 1.0, 4.0, -6.0], 0.7);
        for c in [0.1, 1.0, 3.0, 50.0] {
            let cost = LseCost::new(1.3, c).unwrap();
            let plan = solve_opt(&s, &cost).unwrap();
            let (mut lo, mut hi) = (0.0, 10.0);
            let g = 0.618_033_988_749_895;
            for _ in 0..200 {
                let m1 = hi - g * (hi - lo);
                let m2 = lo + g * (hi - lo);
                if opt_objective(&s, &cost, m1) < opt_objective(&s, &cost, m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let golden = opt_objective(&s, &cost, 0.5 * (lo + hi));
            assert!(plan.expected_cost <= golden + 1e-9, "c={c}: {} vs {golden}", plan.expected_cost);
        }
        let huge = LseCost::new(1.3, 1e6).unwrap();
        assert_eq!(solve_opt(&s, &huge).unwrap().kappa, 0.0);
    }

    #[test]
    fn aggregate_agrees_with_full_dispatch() {
        let scenarios = vec![
            Scenario::new(vec![1.0, 2.0], -0.5, vec![0.5, 2.0]),
            Scenario::new(vec![-2.0, 0.5], 1.0, vec![1.0, 3.0]),
        ];
        let s = ScenarioSet::new(scenarios, vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
        let cost = LseCost::new(0.8, 0.2).unwrap();
        let out = simulate_opt(&s, &cost, 0.4);
        let full = opt_dispatches(&s, &cost, 0.4).unwrap();
        for ((slot, r), sc) in out.slots.iter().zip(&full).zip(&s.scenarios) {
            assert!((slot.cost() - realized_social_cost(r, &sc.a, 0.8)).abs() < 1e-12);
            assert!((slot.leftover - r.delta).abs() < 1e-12);
        }
    }

    #[test]
    fn seq_capacity_is_worst_case() {
        let s = set(&[60.0, -90.0, 10.0], 1.0);
        let (plan, _) = solve_seq(&s, &LseCost::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(plan.kappa, 90.0);
        let zero = set(&[0.0, 0.0], 1.0);
        assert_eq!(solve_seq(&zero, &LseCost::new(1.0, 1.0).unwrap()).unwrap().0.kappa, 0.0);
        let sym = set(&[-7.5, 7.5], 1.0);
        assert_eq!(solve_seq(&sym, &LseCost::new(1.0, 1.0).unwrap()).unwrap().0.kappa, 7.5);
    }

    #[test]
    fn opt_below_seq() {
        let s = set(&[5.0, -3.0, 1.0, 4.0, -6.0], 0.7);
        for c in [0.0, 0.5, 5.0] {
            let cost = LseCost::new(1.0, c).unwrap();
            let opt = solve_opt(&s, &cost).unwrap();
            let (seq, _) = solve_seq(&s, &cost).unwrap();
            assert!(opt.expected_cost <= seq.expected_cost + 1e-12);
        }
    }
}

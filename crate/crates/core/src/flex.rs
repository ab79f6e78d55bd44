//! LIN⁺(ρ): the linear contract with flexible commitment. Each customer may
//! skip up to a (1 − ρ) share of slots, picked by realized cost, and an
//! audit compares the mismatch on skipped slots with its overall mean.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lin::{simulate_contract, LinearContract};
use crate::model::LseCost;
use crate::outcome::{Outcome, PolicyTag};
use crate::scenario::ScenarioSet;

/// How customers decide which slots to skip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationMode {
    /// Sort the whole horizon of realized costs and skip the most expensive.
    #[default]
    Clairvoyant,
    /// Skip whenever the realized cost is above the training quantile that
    /// leaves a (1 − ρ) share above it.
    OnlineQuantile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlexParams {
    pub rho: f64,
    /// Flag a customer when E[D | skips] exceeds E[D] by more than
    /// (tolerance − 1)·|E[D]|.
    pub audit_tolerance: f64,
    pub mode: ViolationMode,
}

impl FlexParams {
    pub fn new(rho: f64) -> Result<Self> {
        let p = FlexParams {
            rho,
            ..FlexParams::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidArgument(format!("rho must be in [0, 1], got {}", self.rho)));
        }
        if !(self.audit_tolerance >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "audit tolerance must be >= 1, got {}",
                self.audit_tolerance
            )));
        }
        Ok(())
    }
}

impl Default for FlexParams {
    fn default() -> Self {
        FlexParams {
            rho: 1.0,
            audit_tolerance: 1.5,
            mode: ViolationMode::Clairvoyant,
        }
    }
}

/// Largest number of skipped slots allowed over `len` slots.
pub fn violation_budget(len: usize, rho: f64) -> usize {
    (((1.0 - rho) * len as f64) + 1e-9).floor().max(0.0) as usize
}

/// The ⌊(1 − ρ)T⌋ slots with the highest cost, ties to the earlier slot,
/// returned in increasing slot order.
pub fn select_violations(costs: &[f64], rho: f64) -> Vec<usize> {
    let k = violation_budget(costs.len(), rho).min(costs.len());
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[b].total_cmp(&costs[a]).then(a.cmp(&b)));
    let mut picked = order[..k].to_vec();
    picked.sort_unstable();
    picked
}

/// Cost level above which a customer skips in online mode: the value with
/// a ρ share of training costs at or below it.
pub fn online_threshold(train_costs: &[f64], rho: f64) -> f64 {
    if rho >= 1.0 || train_costs.is_empty() {
        return f64::INFINITY;
    }
    if rho <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut sorted = train_costs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((rho * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn cost_series(set: &ScenarioSet, i: usize) -> Vec<f64> {
    set.scenarios.iter().map(|s| s.a[i]).collect()
}

/// Skip masks per customer, `mask[i][t]`.
pub fn violation_masks(test: &ScenarioSet, params: &FlexParams, train: Option<&ScenarioSet>) -> Result<Vec<Vec<bool>>> {
    params.validate()?;
    let n = test.customers();
    let t = test.len();
    let mut masks = vec![vec![false; t]; n];
    if params.rho >= 1.0 {
        return Ok(masks);
    }
    for (i, mask) in masks.iter_mut().enumerate() {
        let costs = cost_series(test, i);
        match params.mode {
            ViolationMode::Clairvoyant => {
                for s in select_violations(&costs, params.rho) {
                    mask[s] = true;
                }
            }
            ViolationMode::OnlineQuantile => {
                let train = train.ok_or_else(|| {
                    Error::InvalidArgument("online skipping needs the training set's cost draws".into())
                })?;
                let threshold = online_threshold(&cost_series(train, i), params.rho);
                for (m, c) in mask.iter_mut().zip(&costs) {
                    *m = params.rho <= 0.0 || *c > threshold;
                }
            }
        }
    }
    Ok(masks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub mean_d: f64,
    /// E[D | i skips], `None` for customers that never skip.
    pub conditional_mean: Vec<Option<f64>>,
    pub flagged: Vec<usize>,
}

impl AuditReport {
    /// E[D | i skips] / E[D].
    pub fn ratio(&self, i: usize) -> Option<f64> {
        self.conditional_mean[i].map(|m| m / self.mean_d)
    }
}

pub fn audit(test: &ScenarioSet, masks: &[Vec<bool>], tolerance: f64) -> AuditReport {
    let mean_d = test.mismatches().sum::<f64>() / test.len().max(1) as f64;
    let conditional_mean: Vec<Option<f64>> = masks
        .iter()
        .map(|mask| {
            let (sum, count) = test
                .mismatches()
                .zip(mask)
                .filter(|(_, m)| **m)
                .fold((0.0, 0usize), |(s, c), (d, _)| (s + d, c + 1));
            (count > 0).then(|| sum / count as f64)
        })
        .collect();
    let bound = mean_d + (tolerance - 1.0) * mean_d.abs();
    let flagged = conditional_mean
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_some_and(|m| m > bound))
        .map(|(i, _)| i)
        .collect();
    AuditReport {
        mean_d,
        conditional_mean,
        flagged,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlexOutcome {
    pub outcome: Outcome,
    pub audit: AuditReport,
    /// Skipped (customer, slot) pairs over all pairs.
    pub violation_rate: f64,
}

/// Run the contract, letting each customer skip the slots its mask selects.
/// `train` is only read in online mode.
pub fn simulate_lin_plus(
    contract: &LinearContract,
    params: &FlexParams,
    test: &ScenarioSet,
    cost: &LseCost,
    train: Option<&ScenarioSet>,
) -> Result<FlexOutcome> {
    let masks = violation_masks(test, params, train)?;
    let outcome = simulate_contract(contract, test, cost, PolicyTag::LinPlus, |t, i, _| !masks[i][t])?;
    let skipped: usize = masks.iter().map(|m| m.iter().filter(|v| **v).count()).sum();
    let pairs = (test.customers() * test.len()).max(1);
    Ok(FlexOutcome {
        audit: audit(test, &masks, params.audit_tolerance),
        violation_rate: skipped as f64 / pairs as f64,
        outcome,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoPoint {
    pub rho: f64,
    pub social_cost: f64,
    pub leftover_norm: f64,
    pub exceedance_rate: f64,
    pub violation_rate: f64,
    pub audit_flags: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoSweep {
    pub points: Vec<RhoPoint>,
    /// Index of the cheapest point.
    pub best: usize,
}

impl RhoSweep {
    pub fn best_point(&self) -> &RhoPoint {
        &self.points[self.best]
    }

    pub fn at(&self, rho: f64) -> Option<&RhoPoint> {
        self.points.iter().find(|p| p.rho == rho)
    }

    /// `rho,social_cost,leftover_norm,violation_rate,audit_flags`.
    pub fn write_csv(&self, mut out: impl Write, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        writeln!(out, "rho,social_cost,leftover_norm,violation_rate,audit_flags").map_err(io)?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{}",
                p.rho, p.social_cost, p.leftover_norm, p.violation_rate, p.audit_flags
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

/// Evaluate LIN⁺ at every ρ in `grid` (which must contain 1) with the
/// contract's κ held fixed.
pub fn sweep_rho(
    contract: &LinearContract,
    test: &ScenarioSet,
    cost: &LseCost,
    grid: &[f64],
    base: &FlexParams,
    train: Option<&ScenarioSet>,
) -> Result<RhoSweep> {
    if !grid.contains(&1.0) {
        return Err(Error::InvalidArgument("rho grid must include 1".into()));
    }
    let points = grid
        .iter()
        .map(|&rho| {
            let params = FlexParams { rho, ..*base };
            let r = simulate_lin_plus(contract, &params, test, cost, train)?;
            Ok(RhoPoint {
                rho,
                social_cost: r.outcome.social_cost(),
                leftover_norm: r.outcome.leftover_norm(),
                exceedance_rate: r.outcome.exceedance_rate(),
                violation_rate: r.violation_rate,
                audit_flags: r.audit.flagged.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = (0..points.len())
        .min_by(|&a, &b| points[a].social_cost.total_cmp(&points[b].social_cost))
        .expect("grid is not empty");
    Ok(RhoSweep { points, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lin::simulate_lin;
    use crate::scenario::Scenario;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn selection_examples() {
        assert!(select_violations(&[5.0, 1.0, 9.0, 3.0], 1.0).is_empty());
        assert_eq!(select_violations(&[5.0, 1.0, 9.0, 3.0], 0.0), vec![0, 1, 2, 3]);
        // the two largest, first and third slot
        assert_eq!(select_violations(&[5.0, 1.0, 9.0, 3.0], 0.5), vec![0, 2]);
        // ties go to the earlier slot
        assert_eq!(select_violations(&[2.0, 2.0, 2.0], 0.5), vec![0]);
        assert_eq!(violation_budget(10, 0.8), 2);
        assert_eq!(violation_budget(7, 0.3), 4);
    }

    #[test]
    fn online_threshold_quantile() {
        let costs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(online_threshold(&costs, 0.6), 3.0);
        assert_eq!(online_threshold(&costs, 1.0), f64::INFINITY);
    }

    fn random_set(n: usize, t: usize, seed: u64, drift: f64) -> ScenarioSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenarios = (0..t)
            .map(|_| {
                let delta = (0..n).map(|_| rng.random_range(-1.0..1.0) + drift).collect();
                let a = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
                Scenario::new(delta, rng.random_range(-0.5..0.5), a)
            })
            .collect();
        ScenarioSet::new(scenarios, vec![1.0; n], vec![1.0; n]).unwrap()
    }

    fn contract(n: usize) -> LinearContract {
        LinearContract {
            alpha: vec![0.2; n],
            beta: vec![0.1; n],
            gamma: vec![0.0; n],
            kappa: 1.0,
        }
    }

    #[test]
    fn rho_one_is_lin() {
        let set = random_set(3, 50, 1, 0.0);
        let cost = LseCost::new(1.0, 0.1).unwrap();
        let c = contract(3);
        let lin = simulate_lin(&c, &set, &cost).unwrap();
        let plus = simulate_lin_plus(&c, &FlexParams::new(1.0).unwrap(), &set, &cost, None).unwrap();
        assert_eq!(lin.slots, plus.outcome.slots);
        assert!(plus.audit.flagged.is_empty());
        assert_eq!(plus.violation_rate, 0.0);
    }

    #[test]
    fn rho_zero_is_no_response() {
        let set = random_set(3, 50, 2, 0.0);
        let cost = LseCost::new(1.0, 0.1).unwrap();
        let plus = simulate_lin_plus(&contract(3), &FlexParams::new(0.0).unwrap(), &set, &cost, None).unwrap();
        for (s, d) in plus.outcome.slots.iter().zip(set.mismatches()) {
            assert_eq!(s.leftover, d);
            assert_eq!(s.customer_cost, 0.0);
        }
        let online = FlexParams { mode: ViolationMode::OnlineQuantile, ..FlexParams::new(0.0).unwrap() };
        let r = simulate_lin_plus(&contract(3), &online, &set, &cost, Some(&set)).unwrap();
        assert_eq!(r.violation_rate, 1.0);
    }

    #[test]
    fn independent_costs_give_unit_audit_ratio() {
        let set = random_set(1, 20_000, 3, 2.0);
        let masks = violation_masks(&set, &FlexParams::new(0.7).unwrap(), None).unwrap();
        let report = audit(&set, &masks, 1.5);
        let skipped: Vec<f64> = set.mismatches().zip(&masks[0]).filter(|(_, m)| **m).map(|(d, _)| d).collect();
        let m = skipped.len() as f64;
        let mean = skipped.iter().sum::<f64>() / m;
        let sd = (skipped.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
        let se = sd / m.sqrt() / report.mean_d;
        assert!((report.ratio(0).unwrap() - 1.0).abs() < 3.0 * se, "{:?} se {se}", report.ratio(0));
        assert!(report.flagged.is_empty());
    }

    #[test]
    fn gaming_customer_is_flagged() {
        let set = random_set(1, 2000, 4, 1.0);
        let mask: Vec<bool> = set.mismatches().map(|d| d > 1.5).collect();
        let report = audit(&set, &[mask], 1.2);
        assert_eq!(report.flagged, vec![0]);
    }

    #[test]
    fn selection_ignores_the_mismatch_series() {
        let set = random_set(2, 40, 5, 0.0);
        let mut shuffled = set.scenarios.clone();
        let deltas: Vec<(Vec<f64>, f64)> = shuffled.iter().rev().map(|s| (s.delta.clone(), s.delta_r)).collect();
        for (s, (d, r)) in shuffled.iter_mut().zip(deltas) {
            *s = Scenario::new(d, r, s.a.clone());
        }
        let other = ScenarioSet::new(shuffled, set.a_hat.clone(), set.a_tilde.clone()).unwrap();
        let p = FlexParams::new(0.6).unwrap();
        assert_eq!(violation_masks(&set, &p, None).unwrap(), violation_masks(&other, &p, None).unwrap());
    }

    #[test]
    fn sweep_needs_one_and_reports_budget() {
        let set = random_set(2, 100, 6, 0.0);
        let cost = LseCost::new(1.0, 0.1).unwrap();
        let c = contract(2);
        assert!(sweep_rho(&c, &set, &cost, &[0.5], &FlexParams::default(), None).is_err());
        let s = sweep_rho(&c, &set, &cost, &[1.0, 0.8, 0.5], &FlexParams::default(), None).unwrap();
        assert_eq!(s.points[0].social_cost, simulate_lin(&c, &set, &cost).unwrap().social_cost());
        assert!((s.at(0.8).unwrap().violation_rate - 0.2).abs() < 1e-12);
        let mut buf = Vec::new();
        s.write_csv(&mut buf, Path::new("mem")).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("rho,social_cost,leftover_norm,violation_rate,audit_flags\n1,"));
    }
}

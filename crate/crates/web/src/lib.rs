//! Browser bindings for the demo page in `www/`.
//!
//! Three operations are exposed: a single-slot dispatch, the capacity cost
//! curve with each policy's cost at a chosen price, and the LIN⁺ ρ sweep.
//! Results are returned as flat `Float64Array`s; the layouts are documented
//! on each function.

use wasm_bindgen::prelude::*;

use flexdr_core::eval::{annualize, capacity_price_per_slot};
use flexdr_core::flex::{simulate_lin_plus, FlexParams};
use flexdr_core::lin::{simulate_lin, solve_lin_centralized, LinearContract};
use flexdr_core::model::{dispatch_capped, LseCost};
use flexdr_core::outcome::PolicyTag;
use flexdr_core::planner::{free_kappa, opt_objective, simulate_opt, solve_opt, solve_seq};
use flexdr_core::pred::{simulate_pred, solve_pred};
use flexdr_core::scenario::{
    build_error_series, build_scenario_pair, synth_homes, synth_wind, CostSpec, ScenarioSet, SplitSpec, SynthSpec,
};

const SLOT_SECONDS: u32 = 300;
const PENALTY: f64 = 0.1 / 144.0;

fn js_err(e: flexdr_core::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// One slot's dispatch for costs `a` ($/kW²), penalty `penalty`, mismatch
/// `d` and capacity `kappa` (kW).
///
/// Returns `[x_1 .. x_N, leftover, theta_lo, theta_hi, total_cost]`.
#[wasm_bindgen]
pub fn dispatch(a: &[f64], penalty: f64, d: f64, kappa: f64) -> Result<Vec<f64>, JsValue> {
    let r = dispatch_capped(a, penalty, d, kappa).map_err(js_err)?;
    let mut out = r.x.clone();
    out.extend([r.delta, r.theta_lo, r.theta_hi, r.total_cost()]);
    Ok(out)
}

/// A small synthetic population with its training and test sets.
#[wasm_bindgen]
pub struct Demo {
    train: ScenarioSet,
    test: ScenarioSet,
}

#[wasm_bindgen]
impl Demo {
    /// `customers` per synthetic home (three homes), 12 synthetic days.
    #[wasm_bindgen(constructor)]
    pub fn new(customers: usize, wind_kw: f64, rsd: f64, seed: u64) -> Result<Demo, JsValue> {
        let synth = SynthSpec {
            homes: 3,
            days: 12,
            slot_seconds: SLOT_SECONDS,
            seed,
        };
        let homes = synth_homes(&synth).map_err(js_err)?;
        let wind = synth_wind(&synth).map_err(js_err)?;
        let split = SplitSpec {
            customers_per_base: customers.max(1),
            seed: seed.wrapping_add(1),
            ..SplitSpec::default()
        };
        let errors = build_error_series(&homes, &wind, &split).map_err(js_err)?;
        let costs = CostSpec {
            range: (1.0 / 144.0, 10.0 / 144.0),
            rsd,
            seed: seed.wrapping_add(2),
        };
        let (train, test) = build_scenario_pair(&errors, wind_kw, &costs).map_err(js_err)?;
        Ok(Demo { train, test })
    }

    pub fn customers(&self) -> usize {
        self.train.customers()
    }

    /// Mismatch series of the test set (kW).
    pub fn mismatch(&self) -> Vec<f64> {
        self.test.mismatches().collect()
    }

    /// OPT's annual cost over `points` capacities from 0 to the free
    /// capacity, at price `c_usd_per_kw_mo`.
    ///
    /// Returns `[kappa_0, cost_0, kappa_1, cost_1, ..]`.
    pub fn kappa_curve(&self, c_usd_per_kw_mo: f64, points: usize) -> Result<Vec<f64>, JsValue> {
        let cost = self.cost(c_usd_per_kw_mo)?;
        let top = free_kappa(&self.test, cost.penalty) * 1.1;
        let n = points.max(2);
        Ok((0..n)
            .flat_map(|k| {
                let kappa = top * k as f64 / (n - 1) as f64;
                [kappa, annualize(opt_objective(&self.test, &cost, kappa), SLOT_SECONDS)]
            })
            .collect())
    }

    /// Each policy at price `c_usd_per_kw_mo`, in the order OPT, SEQ, PRED,
    /// LIN.
    ///
    /// Returns `[kappa, annual_cost, leftover_norm]` per policy.
    pub fn policies(&self, c_usd_per_kw_mo: f64) -> Result<Vec<f64>, JsValue> {
        let cost = self.cost(c_usd_per_kw_mo)?;
        let opt = solve_opt(&self.test, &cost).map_err(js_err)?;
        let (_, seq) = solve_seq(&self.train, &cost).map_err(js_err)?;
        let (_, pred) = solve_pred(&self.train, &cost).map_err(js_err)?;
        let lin = self.contract(&cost)?;
        let outcomes = [
            simulate_opt(&self.test, &cost, opt.kappa),
            simulate_pred(&seq, &self.test, &cost, PolicyTag::Seq),
            simulate_pred(&pred, &self.test, &cost, PolicyTag::Pred),
            simulate_lin(&lin, &self.test, &cost).map_err(js_err)?,
        ];
        Ok(outcomes
            .iter()
            .flat_map(|o| [o.kappa, annualize(o.social_cost(), SLOT_SECONDS), o.leftover_norm()])
            .collect())
    }

    /// LIN⁺ at `points` commitment levels from 0 to 1.
    ///
    /// Returns `[rho, annual_cost, leftover_norm, violation_rate]` per level.
    pub fn rho_curve(&self, c_usd_per_kw_mo: f64, points: usize) -> Result<Vec<f64>, JsValue> {
        let cost = self.cost(c_usd_per_kw_mo)?;
        let lin = self.contract(&cost)?;
        let n = points.max(2);
        let mut out = Vec::with_capacity(4 * n);
        for k in 0..n {
            let rho = k as f64 / (n - 1) as f64;
            let params = FlexParams::new(rho).map_err(js_err)?;
            let r = simulate_lin_plus(&lin, &params, &self.test, &cost, Some(&self.train)).map_err(js_err)?;
            out.extend([
                rho,
                annualize(r.outcome.social_cost(), SLOT_SECONDS),
                r.outcome.leftover_norm(),
                r.violation_rate,
            ]);
        }
        Ok(out)
    }
}

impl Demo {
    fn cost(&self, c_usd_per_kw_mo: f64) -> Result<LseCost, JsValue> {
        LseCost::new(PENALTY, capacity_price_per_slot(c_usd_per_kw_mo, SLOT_SECONDS)).map_err(js_err)
    }

    fn contract(&self, cost: &LseCost) -> Result<LinearContract, JsValue> {
        Ok(solve_lin_centralized(&self.train, cost).map_err(js_err)?.contract)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispatch_layout() {
        // κ large: x_i = D·(1/a_i)/(1/A + Σ1/a_j)
        let out = dispatch(&[1.0, 1.0], 1.0, 3.0, 10.0).unwrap();
        assert_eq!(out.len(), 6);
        assert!((out[0] - 1.0).abs() < 1e-12 && (out[1] - 1.0).abs() < 1e-12);
        assert!((out[2] - 1.0).abs() < 1e-12);
        assert_eq!((out[3], out[4]), (0.0, 0.0));
        assert!((out[5] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn demo_curves() {
        let demo = Demo::new(2, 20.0, 0.2, 3).unwrap();
        assert_eq!(demo.customers(), 6);
        let curve = demo.kappa_curve(10.0, 21).unwrap();
        assert_eq!(curve.len(), 42);
        let p = demo.policies(10.0).unwrap();
        assert_eq!(p.len(), 12);
        let opt_kappa = p[0];
        let opt_cost = p[1];
        // the curve never dips below OPT's optimum
        for pair in curve.chunks(2) {
            assert!(pair[1] >= opt_cost * (1.0 - 1e-9), "{pair:?} vs {opt_kappa} {opt_cost}");
        }
        for k in 1..4 {
            assert!(p[3 * k + 1] >= opt_cost * (1.0 - 1e-9));
        }
        let rho = demo.rho_curve(10.0, 5).unwrap();
        assert_eq!(rho.len(), 20);
        // ρ = 1 is LIN
        assert_eq!(rho[16], 1.0);
        assert_eq!(rho[17], p[10]);
        assert_eq!(rho[19], 0.0);
    }
}

//! Scenario sets: per-slot realizations plus the moments and support
//! bounds the contract policies are fitted on.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::predict::min_max;

/// One slot's realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Per-customer demand prediction errors δ_i (kW).
    pub delta: Vec<f64>,
    /// Renewable prediction error δ_r (kW).
    pub delta_r: f64,
    /// Realized cost coefficients a_i(t).
    pub a: Vec<f64>,
    /// Net mismatch Σδ_i − δ_r (kW).
    pub d: f64,
}

impl Scenario {
    pub fn new(delta: Vec<f64>, delta_r: f64, a: Vec<f64>) -> Self {
        let d = mismatch(&delta, delta_r);
        Scenario { delta, delta_r, a, d }
    }

    /// Σ_i 1/a_i(t).
    pub fn inv_cost_sum(&self) -> f64 {
        self.a.iter().map(|a| 1.0 / a).sum()
    }
}

pub fn mismatch(delta: &[f64], delta_r: f64) -> f64 {
    delta.iter().sum::<f64>() - delta_r
}

/// Raw (uncentered) first and second moments of y = (δ_1..δ_N, δ_r).
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub second: Matrix,
}

impl Moments {
    pub fn from_scenarios(scenarios: &[Scenario]) -> Moments {
        let n = scenarios.first().map_or(0, |s| s.delta.len());
        let dim = n + 1;
        let mut mean = vec![0.0; dim];
        let mut second = Matrix::zeros(dim, dim);
        let mut y = vec![0.0; dim];
        for s in scenarios {
            y[..n].copy_from_slice(&s.delta);
            y[n] = s.delta_r;
            for i in 0..dim {
                mean[i] += y[i];
                let yi = y[i];
                if yi == 0.0 {
                    continue;
                }
                for j in i..dim {
                    second[(i, j)] += yi * y[j];
                }
            }
        }
        let t = scenarios.len().max(1) as f64;
        for v in &mut mean {
            *v /= t;
        }
        for i in 0..dim {
            for j in i..dim {
                let v = second[(i, j)] / t;
                second[(i, j)] = v;
                second[(j, i)] = v;
            }
        }
        Moments { mean, second }
    }

    pub fn customers(&self) -> usize {
        self.mean.len() - 1
    }

    /// Weight of coordinate k in D = wᵀy.
    fn w(&self, k: usize) -> f64 {
        if k == self.customers() { -1.0 } else { 1.0 }
    }

    pub fn mean_d(&self) -> f64 {
        (0..self.mean.len()).map(|k| self.w(k) * self.mean[k]).sum()
    }

    pub fn mean_delta(&self, i: usize) -> f64 {
        self.mean[i]
    }

    /// E[δ_i δ_j].
    pub fn delta_delta(&self, i: usize, j: usize) -> f64 {
        self.second[(i, j)]
    }

    /// E[D·y_k] for every coordinate k of y.
    pub fn d_cross(&self) -> Vec<f64> {
        let dim = self.mean.len();
        (0..dim)
            .map(|k| (0..dim).map(|j| self.w(j) * self.second[(j, k)]).sum())
            .collect()
    }

    /// E[D²] = wᵀ S w.
    pub fn d_second(&self) -> f64 {
        let cross = self.d_cross();
        (0..cross.len()).map(|k| self.w(k) * cross[k]).sum()
    }
}

/// Per-coordinate bounds over a scenario set.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    pub delta_lo: Vec<f64>,
    pub delta_hi: Vec<f64>,
    pub delta_r_lo: f64,
    pub delta_r_hi: f64,
    pub d_lo: f64,
    pub d_hi: f64,
}

impl Support {
    pub fn from_scenarios(scenarios: &[Scenario]) -> Support {
        let n = scenarios.first().map_or(0, |s| s.delta.len());
        let mut delta_lo = vec![f64::INFINITY; n];
        let mut delta_hi = vec![f64::NEG_INFINITY; n];
        for s in scenarios {
            for (i, v) in s.delta.iter().enumerate() {
                delta_lo[i] = delta_lo[i].min(*v);
                delta_hi[i] = delta_hi[i].max(*v);
            }
        }
        if scenarios.is_empty() {
            delta_lo.clear();
            delta_hi.clear();
        }
        let (delta_r_lo, delta_r_hi) = min_max(&scenarios.iter().map(|s| s.delta_r).collect::<Vec<_>>());
        let (d_lo, d_hi) = min_max(&scenarios.iter().map(|s| s.d).collect::<Vec<_>>());
        Support {
            delta_lo,
            delta_hi,
            delta_r_lo,
            delta_r_hi,
            d_lo,
            d_hi,
        }
    }

    /// Largest |D| over the set.
    pub fn d_abs_max(&self) -> f64 {
        self.d_lo.abs().max(self.d_hi.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub moments: Moments,
    pub support: Support,
    pub a_hat: Vec<f64>,
    pub a_tilde: Vec<f64>,
    /// Σ_i 1/a_i(t) per scenario.
    pub inv_cost_sums: Vec<f64>,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>, a_hat: Vec<f64>, a_tilde: Vec<f64>) -> Result<Self> {
        let n = a_hat.len();
        if let Some((t, _)) = scenarios
            .iter()
            .enumerate()
            .find(|(_, s)| s.delta.len() != n || s.a.len() != n)
        {
            return Err(Error::InvalidArgument(format!(
                "scenario {t} does not have {n} customers"
            )));
        }
        if a_tilde.len() != n {
            return Err(Error::InvalidArgument("a_tilde and a_hat lengths differ".into()));
        }
        if let Some(v) = a_hat
            .iter()
            .chain(scenarios.iter().flat_map(|s| &s.a))
            .find(|v| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidModel(format!("cost coefficient {v} is not positive")));
        }
        let inv_cost_sums = scenarios.iter().map(Scenario::inv_cost_sum).collect();
        Ok(ScenarioSet {
            moments: Moments::from_scenarios(&scenarios),
            support: Support::from_scenarios(&scenarios),
            scenarios,
            a_hat,
            a_tilde,
            inv_cost_sums,
        })
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn customers(&self) -> usize {
        self.a_hat.len()
    }

    pub fn mismatches(&self) -> impl Iterator<Item = f64> + '_ {
        self.scenarios.iter().map(|s| s.d)
    }

    pub fn mean_abs_d(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.mismatches().map(f64::abs).sum::<f64>() / self.len() as f64
    }

    /// Write `slot,customer_id,delta_kw,a_coeff` rows, followed in each slot
    /// by a `_system` row whose last two columns hold δ_r and D.
    pub fn write_csv(&self, mut out: impl Write, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        writeln!(out, "slot,customer_id,delta_kw,a_coeff").map_err(io)?;
        for (t, s) in self.scenarios.iter().enumerate() {
            for (i, (d, a)) in s.delta.iter().zip(&s.a).enumerate() {
                writeln!(out, "{t},{i},{d},{a}").map_err(io)?;
            }
            writeln!(out, "{t},_system,{},{}", s.delta_r, s.d).map_err(io)?;
        }
        Ok(())
    }
}

/// Combine per-customer error series (`customer_errors[i][t]`), normalized
/// renewable errors and slot-major cost draws into a scenario set.
pub fn assemble_scenarios(
    customer_errors: &[Vec<f64>],
    renewable_errors: &[f64],
    cost_draws: &[Vec<f64>],
    a_hat: &[f64],
    a_tilde: &[f64],
    wind_capacity: f64,
) -> Result<ScenarioSet> {
    if !(wind_capacity >= 0.0) || !wind_capacity.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "wind capacity must be >= 0, got {wind_capacity}"
        )));
    }
    let slots = renewable_errors.len();
    if cost_draws.len() != slots {
        return Err(Error::InvalidArgument(format!(
            "{} cost draws for {slots} slots",
            cost_draws.len()
        )));
    }
    if let Some((i, e)) = customer_errors.iter().enumerate().find(|(_, e)| e.len() != slots) {
        return Err(Error::InvalidArgument(format!(
            "customer {i} has {} error samples, expected {slots}",
            e.len()
        )));
    }
    let n = customer_errors.len();
    if cost_draws.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument(format!("cost draws must have {n} customers per slot")));
    }
    let scenarios = (0..slots)
        .map(|t| {
            let delta = customer_errors.iter().map(|e| e[t]).collect();
            Scenario::new(delta, wind_capacity * renewable_errors[t], cost_draws[t].clone())
        })
        .collect();
    ScenarioSet::new(scenarios, a_hat.to_vec(), a_tilde.to_vec())
}

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::LseCost;
use crate::outcome::{Outcome, PolicyTag, SlotOutcome};
use crate::scenario::{Scenario, ScenarioSet};

use super::distributed::DualPrices;

/// x_i = α_i D + β_i δ_i + γ_i, with capacity κ.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearContract {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// kW.
    pub gamma: Vec<f64>,
    /// kW.
    pub kappa: f64,
}

impl LinearContract {
    pub fn zero(n: usize, kappa: f64) -> Self {
        LinearContract {
            alpha: vec![0.0; n],
            beta: vec![0.0; n],
            gamma: vec![0.0; n],
            kappa,
        }
    }

    /// Split a stacked (α, β, γ) vector.
    pub fn from_stacked(z: &[f64], kappa: f64) -> Self {
        let n = z.len() / 3;
        LinearContract {
            alpha: z[..n].to_vec(),
            beta: z[n..2 * n].to_vec(),
            gamma: z[2 * n..3 * n].to_vec(),
            kappa,
        }
    }

    pub fn stacked(&self) -> Vec<f64> {
        self.alpha.iter().chain(&self.beta).chain(&self.gamma).copied().collect()
    }

    pub fn customers(&self) -> usize {
        self.alpha.len()
    }

    pub fn response(&self, i: usize, d: f64, delta: f64) -> f64 {
        self.alpha[i] * d + self.beta[i] * delta + self.gamma[i]
    }

    fn check(&self, set: &ScenarioSet) -> Result<()> {
        let n = self.customers();
        if self.beta.len() != n || self.gamma.len() != n || set.customers() != n {
            return Err(Error::InvalidArgument(format!(
                "contract covers {n} customers but the scenario set has {}",
                set.customers()
            )));
        }
        Ok(())
    }
}

/// Run `contract` on every slot; `complies(t, i, s)` decides whether
/// customer i follows it in slot t (x_i = 0 and no cost otherwise).
pub(crate) fn simulate_contract(
    contract: &LinearContract,
    set: &ScenarioSet,
    cost: &LseCost,
    policy: PolicyTag,
    complies: impl Fn(usize, usize, &Scenario) -> bool,
) -> Result<Outcome> {
    contract.check(set)?;
    let slots = set
        .scenarios
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let (mut absorbed, mut customer_cost) = (0.0, 0.0);
            for i in 0..contract.customers() {
                if complies(t, i, s) {
                    let x = contract.response(i, s.d, s.delta[i]);
                    absorbed += x;
                    customer_cost += s.a[i] * x * x;
                }
            }
            SlotOutcome::new(s.d, absorbed, customer_cost, cost.penalty)
        })
        .collect();
    Ok(Outcome {
        policy,
        kappa: contract.kappa,
        capacity_cost: cost.capacity_cost(contract.kappa),
        slots,
    })
}

/// Customers follow the contract on every slot, paying their realized cost.
pub fn simulate_lin(contract: &LinearContract, set: &ScenarioSet, cost: &LseCost) -> Result<Outcome> {
    simulate_contract(contract, set, cost, PolicyTag::Lin, |_, _, _| true)
}

/// How a contract was reached, for the export header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegotiationSummary {
    pub zeta: f64,
    pub eps: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `customer_id,alpha,beta,gamma,pi,lambda,mu,payment`, preceded by a
/// `#`-prefixed line carrying κ and the negotiation summary. Price columns
/// are empty when no prices are given.
pub fn write_contract_csv(
    contract: &LinearContract,
    prices: Option<&DualPrices>,
    summary: Option<&NegotiationSummary>,
    mut out: impl Write,
    path: &Path,
) -> Result<()> {
    let io = |e| Error::io(path, e);
    let meta = match summary {
        Some(s) => format!(
            "zeta={},eps={},iterations={},converged={}",
            s.zeta, s.eps, s.iterations, s.converged
        ),
        None => "zeta=,eps=,iterations=0,converged=true".to_string(),
    };
    writeln!(out, "#kappa_kw={},{meta}", contract.kappa).map_err(io)?;
    writeln!(out, "customer_id,alpha,beta,gamma,pi,lambda,mu,payment").map_err(io)?;
    for i in 0..contract.customers() {
        let (a, b, g) = (contract.alpha[i], contract.beta[i], contract.gamma[i]);
        match prices {
            Some(p) => {
                let pay = p.payment(i, a, b, g);
                writeln!(out, "{i},{a},{b},{g},{},{},{},{pay}", p.pi[i], p.lambda[i], p.mu[i]).map_err(io)?
            }
            None => writeln!(out, "{i},{a},{b},{g},,,,").map_err(io)?,
        }
    }
    Ok(())
}

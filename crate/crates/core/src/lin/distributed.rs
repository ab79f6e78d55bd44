//! Dual decomposition of the contract problem between the LSE and its
//! customers.
//!
//! Each round the LSE posts its preferred contract for the current prices,
//! every customer answers with the parameters it would accept, and the
//! prices move along the disagreement with step length ζ/k. Prices are
//! exchanged per kW-equivalent unit: the α-coupling is scaled by RMS(D),
//! the β-coupling by RMS(δ_i), the γ-coupling by 1. The LSE subproblem
//! carries a proximal term τ/2·Σ h_k (z_k − u_k)² centred on the customers'
//! last answers, weighted by the customers' own curvature h_k; without it
//! the LSE's best response is unbounded whenever prices differ across
//! customers.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, solve_spd, Matrix};
use crate::model::LseCost;
use crate::scenario::ScenarioSet;

use super::contract::{LinearContract, NegotiationSummary};
use super::problem::LinProblem;
use super::qp::VertexQp;

/// Payments per unit of α, β and γ, per customer.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPrices {
    pub pi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl DualPrices {
    pub fn zeros(n: usize) -> Self {
        DualPrices {
            pi: vec![0.0; n],
            lambda: vec![0.0; n],
            mu: vec![0.0; n],
        }
    }

    pub fn from_stacked(v: &[f64]) -> Self {
        let n = v.len() / 3;
        DualPrices {
            pi: v[..n].to_vec(),
            lambda: v[n..2 * n].to_vec(),
            mu: v[2 * n..].to_vec(),
        }
    }

    pub fn stacked(&self) -> Vec<f64> {
        self.pi.iter().chain(&self.lambda).chain(&self.mu).copied().collect()
    }

    /// π_i u + λ_i v + μ_i w.
    pub fn payment(&self, i: usize, u: f64, v: f64, w: f64) -> f64 {
        self.pi[i] * u + self.lambda[i] * v + self.mu[i] * w
    }
}

/// The parameters customers would accept at the posted prices.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentProposal {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl AgentProposal {
    pub fn stacked(&self) -> Vec<f64> {
        self.u.iter().chain(&self.v).chain(&self.w).copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegotiationParams {
    /// Price step length at k = 1, in kW-equivalent price units.
    pub zeta: f64,
    /// Residual tolerance; `None` means 1e-4·(1 + ‖G_1‖).
    pub eps: Option<f64>,
    pub max_iter: usize,
    /// Weight τ of the LSE's proximal term.
    pub prox: f64,
}

impl Default for NegotiationParams {
    fn default() -> Self {
        NegotiationParams {
            zeta: 1.0,
            eps: None,
            max_iter: 5000,
            prox: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub iteration: usize,
    /// ‖(α, β, γ) − (u, v, w)‖₂.
    pub residual: f64,
    pub eta: f64,
    pub kappa: f64,
}

/// Where the message loop stands after a round.
#[derive(Debug, Clone, PartialEq)]
pub struct NegotiationState {
    pub iteration: usize,
    pub prices: DualPrices,
    pub lse: LinearContract,
    pub proposals: AgentProposal,
    pub residual: f64,
    pub best_residual: f64,
    pub eta: f64,
    pub zeta: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Negotiation {
    /// The customers' final answers, with κ covering their worst case.
    pub contract: LinearContract,
    pub prices: DualPrices,
    pub log: Vec<LogEntry>,
    pub summary: NegotiationSummary,
    /// c·κ + F(u, v, w) on the training moments.
    pub objective: f64,
}

/// Customer i's best answer: minimize â·E[(uD + vδ + w)²] − πu − λv − μw,
/// i.e. solve 2â·Φ·(u, v, w) = (π, λ, μ). When δ_i never moves, v is pinned
/// to zero.
pub fn customer_subproblem(pi: f64, lambda: f64, mu: f64, phi: &[[f64; 3]; 3], a_hat: f64) -> Result<(f64, f64, f64)> {
    if !(a_hat > 0.0) {
        return Err(Error::InvalidModel(format!("estimated cost {a_hat} is not positive")));
    }
    let m = Matrix::from_fn(3, 3, |r, c| 2.0 * a_hat * phi[r][c]);
    let ridge = 1e-12 * m.trace().max(1e-300);
    if phi[1][1] <= 0.0 {
        let sub = m.select(&[0, 2]);
        let s = solve_spd(&sub, &[pi, mu], ridge).ok_or_else(singular)?;
        return Ok((s[0], 0.0, s[1]));
    }
    let s = solve_spd(&m, &[pi, lambda, mu], ridge).ok_or_else(singular)?;
    Ok((s[0], s[1], s[2]))
}

fn singular() -> Error {
    Error::Numerical("customer moment matrix is singular".into())
}

fn answer_all(problem: &LinProblem, prices: &DualPrices) -> Result<AgentProposal> {
    let n = problem.customers();
    let mut p = AgentProposal {
        u: vec![0.0; n],
        v: vec![0.0; n],
        w: vec![0.0; n],
    };
    for i in 0..n {
        let (u, v, w) = customer_subproblem(prices.pi[i], prices.lambda[i], prices.mu[i], &problem.phi(i), problem.a_hat[i])?;
        p.u[i] = u;
        p.v[i] = v;
        p.w[i] = w;
    }
    Ok(p)
}

/// Diagonal of the customers' block Hessian 2â_iΦ_i, floored.
fn customer_curvature(problem: &LinProblem) -> Vec<f64> {
    let l = problem.layout();
    let mut h = vec![0.0; l.dim()];
    for i in 0..l.n {
        let phi = problem.phi(i);
        let a2 = 2.0 * problem.a_hat[i];
        h[l.alpha(i)] = a2 * phi[0][0];
        h[l.beta(i)] = a2 * phi[1][1];
        h[l.gamma(i)] = a2;
    }
    let floor = 1e-9 * h.iter().cloned().fold(0.0, f64::max).max(1e-300);
    h.iter().map(|v| v.max(floor)).collect()
}

/// The LSE's side: for fixed prices, pick (α, β, γ, κ) minimizing
/// c·κ + Σ(π_iα_i + λ_iβ_i + μ_iγ_i) + A·E[(D − Σx_i)²] + prox
/// under the worst-case constraints.
pub struct LseSubproblem<'a> {
    problem: &'a LinProblem,
    qp: VertexQp<'a>,
    prox: Vec<f64>,
    q: Vec<f64>,
}

impl<'a> LseSubproblem<'a> {
    pub fn new(problem: &'a LinProblem, prox: f64) -> Result<Self> {
        if !(prox >= 0.0) {
            return Err(Error::InvalidArgument(format!("prox weight must be >= 0, got {prox}")));
        }
        let l = problem.layout();
        let prox: Vec<f64> = customer_curvature(problem).iter().map(|h| prox * h).collect();
        let m = problem.aggregate_second_moment();
        let mut h = Matrix::from_fn(l.dim(), l.dim(), |r, c| 2.0 * problem.penalty * m[(r, c)]);
        for (k, p) in prox.iter().enumerate() {
            h[(k, k)] += p;
        }
        let q = problem.q_vector();
        let g = vec![0.0; l.dim()];
        let qp = VertexQp::new(&h, &g, (0..l.dim()).collect(), &problem.support)?;
        Ok(LseSubproblem { problem, qp, prox, q })
    }

    /// Best response to `prices`, with the proximal term centred on `center`.
    pub fn solve(&mut self, prices: &DualPrices, center: &[f64]) -> Result<LinearContract> {
        let lam = prices.stacked();
        let g: Vec<f64> = (0..lam.len())
            .map(|k| lam[k] - 2.0 * self.q[k] - self.prox[k] * center[k])
            .collect();
        self.qp.set_linear(&g);
        let (kappa, point) = self.qp.optimize_kappa(self.problem.capacity_price)?;
        Ok(LinearContract::from_stacked(&point.z, kappa))
    }
}

/// One-shot LSE best response.
pub fn lse_subproblem(prices: &DualPrices, problem: &LinProblem, prox: f64, center: &[f64]) -> Result<LinearContract> {
    LseSubproblem::new(problem, prox)?.solve(prices, center)
}

/// Lagrangian of the coupled problem, split into the LSE's part and each
/// customer's part. The first value equals the second plus the sum of the
/// third.
pub fn lagrangian_split(
    problem: &LinProblem,
    lse: &LinearContract,
    proposals: &AgentProposal,
    prices: &DualPrices,
) -> (f64, f64, Vec<f64>) {
    let z = lse.stacked();
    let u = proposals.stacked();
    let lam = prices.stacked();
    let customer = problem.customer_costs(&u);
    let total = problem.capacity_price * lse.kappa
        + customer.iter().sum::<f64>()
        + problem.penalty_cost(&z)
        + dot(&lam, &z.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>());
    let lse_part = problem.capacity_price * lse.kappa + dot(&lam, &z) + problem.penalty_cost(&z);
    let parts = (0..problem.customers())
        .map(|i| customer[i] - prices.payment(i, proposals.u[i], proposals.v[i], proposals.w[i]))
        .collect();
    (total, lse_part, parts)
}

/// kW-equivalent scale of each coupling constraint.
fn coupling_scale(problem: &LinProblem) -> Vec<f64> {
    let l = problem.layout();
    let mut s = vec![1.0; l.dim()];
    for i in 0..l.n {
        s[l.alpha(i)] = positive_sqrt(problem.ed2);
        s[l.beta(i)] = positive_sqrt(problem.delta2[(i, i)]);
    }
    s
}

fn positive_sqrt(v: f64) -> f64 {
    if v > 0.0 { v.sqrt() } else { 1.0 }
}

pub fn negotiate(train: &ScenarioSet, cost: &LseCost, params: &NegotiationParams) -> Result<Negotiation> {
    let problem = LinProblem::from_set(train, cost.penalty, cost.capacity_price)?;
    negotiate_problem(&problem, params, |_| {})
}

/// Run the message loop, calling `observe` after every round.
pub fn negotiate_problem(
    problem: &LinProblem,
    params: &NegotiationParams,
    mut observe: impl FnMut(&NegotiationState),
) -> Result<Negotiation> {
    if !(params.zeta > 0.0) {
        return Err(Error::InvalidArgument(format!("zeta must be positive, got {}", params.zeta)));
    }
    if let Some(e) = params.eps {
        if !(e > 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {e}")));
        }
    }
    if params.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let n = problem.customers();
    let scale = coupling_scale(problem);
    let mut lse = LseSubproblem::new(problem, params.prox)?;
    // prices in kW-equivalent units; raw prices are scale ∘ scaled
    let mut scaled = vec![0.0; 3 * n];
    let mut prices = DualPrices::zeros(n);
    let mut proposals = answer_all(problem, &prices)?;
    let mut log = Vec::new();
    let mut eps = params.eps.unwrap_or(f64::NAN);
    let mut best: Option<(f64, AgentProposal, DualPrices, f64)> = None;
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=params.max_iter {
        iterations = k;
        let offer = lse.solve(&prices, &proposals.stacked())?;
        let diff: Vec<f64> = offer.stacked().iter().zip(proposals.stacked()).map(|(a, b)| a - b).collect();
        let residual = norm2(&diff);
        if k == 1 && params.eps.is_none() {
            eps = 1e-4 * (1.0 + residual);
        }
        if best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, proposals.clone(), prices.clone(), offer.kappa));
        }
        let done = residual <= eps;
        let g_scaled: Vec<f64> = diff.iter().zip(&scale).map(|(d, s)| d * s).collect();
        let g_norm = norm2(&g_scaled);
        let eta = if done || g_norm == 0.0 { 0.0 } else { params.zeta / k as f64 / g_norm };
        log.push(LogEntry { iteration: k, residual, eta, kappa: offer.kappa });
        observe(&NegotiationState {
            iteration: k,
            prices: prices.clone(),
            lse: offer,
            proposals: proposals.clone(),
            residual,
            best_residual: best.as_ref().map_or(residual, |b| b.0),
            eta,
            zeta: params.zeta,
            eps,
        });
        if done {
            converged = true;
            break;
        }
        for (p, g) in scaled.iter_mut().zip(&g_scaled) {
            *p += eta * g;
        }
        prices = DualPrices::from_stacked(&scaled.iter().zip(&scale).map(|(p, s)| p * s).collect::<Vec<_>>());
        proposals = answer_all(problem, &prices)?;
    }

    let (final_proposals, final_prices, lse_kappa) = if converged {
        (proposals, prices, log.last().map_or(0.0, |e| e.kappa))
    } else {
        let (_, p, pr, k) = best.expect("at least one round runs");
        (p, pr, k)
    };
    let z = final_proposals.stacked();
    let kappa = lse_kappa.max(problem.support.worst_leftover(&z));
    let contract = LinearContract::from_stacked(&z, kappa);
    Ok(Negotiation {
        objective: problem.total_cost(&z, kappa),
        contract,
        prices: final_prices,
        log,
        summary: NegotiationSummary {
            zeta: params.zeta,
            eps,
            iterations,
            converged,
        },
    })
}

//! Centralized solve of the linear contract from training moments.
//!
//! The problem is first solved with every β_i pinned at zero. That point is
//! accepted when the β-components of the gradient lie inside the
//! subdifferential the worst-case terms allow at β = 0, which makes it
//! optimal for the full problem too. Otherwise the full problem is solved.

use crate::error::Result;
use crate::model::LseCost;
use crate::outcome::PolicyTag;
use crate::planner::CapacityPlan;
use crate::scenario::ScenarioSet;

use super::contract::LinearContract;
use super::problem::LinProblem;
use super::qp::{QpPoint, VertexQp};

#[derive(Debug, Clone, PartialEq)]
pub struct LinSolution {
    pub contract: LinearContract,
    pub plan: CapacityPlan,
    /// c·κ + F(α, β, γ) on the training moments.
    pub objective: f64,
    /// Total multiplier on the worst-case constraints at the optimum.
    pub nu: f64,
    /// True when the β = 0 point passed the optimality check.
    pub beta_pinned: bool,
}

/// Whether the β-gradient at a β = 0 point is covered by the constraint
/// multipliers: ∂F/∂β_i ∈ [ν_u lo_i − ν_l hi_i, ν_u hi_i − ν_l lo_i].
pub fn beta_zero_certified(problem: &LinProblem, gradient: &[f64], point: &QpPoint) -> bool {
    let l = problem.layout();
    let b = &problem.support;
    let scale = gradient.iter().map(|g| g.abs()).fold(0.0, f64::max);
    let tol = 1e-7 * (1.0 + scale);
    (0..l.n).all(|i| {
        let g = gradient[l.beta(i)];
        let lo = point.nu_upper * b.lo[i] - point.nu_lower * b.hi[i];
        let hi = point.nu_upper * b.hi[i] - point.nu_lower * b.lo[i];
        g >= lo - tol && g <= hi + tol
    })
}

pub fn solve_lin_centralized(train: &ScenarioSet, cost: &LseCost) -> Result<LinSolution> {
    let problem = LinProblem::from_set(train, cost.penalty, cost.capacity_price)?;
    solve_problem(&problem)
}

pub fn solve_problem(problem: &LinProblem) -> Result<LinSolution> {
    let l = problem.layout();
    let p = problem.p_matrix();
    let mut h = p.clone();
    for r in 0..l.dim() {
        for c in 0..l.dim() {
            h[(r, c)] *= 2.0;
        }
    }
    let g: Vec<f64> = problem.q_vector().iter().map(|v| -2.0 * v).collect();

    let pinned: Vec<usize> = (0..l.n).map(|i| l.alpha(i)).chain((0..l.n).map(|i| l.gamma(i))).collect();
    let mut qp = VertexQp::new(&h, &g, pinned, &problem.support)?;
    let (kappa, point) = qp.optimize_kappa(problem.capacity_price)?;
    let gradient = problem.gradient(&p, &point.z);
    let (kappa, point, beta_pinned) = if beta_zero_certified(problem, &gradient, &point) {
        (kappa, point, true)
    } else {
        let mut full = VertexQp::new(&h, &g, (0..l.dim()).collect(), &problem.support)?;
        let (kappa, point) = full.optimize_kappa(problem.capacity_price)?;
        (kappa, point, false)
    };
    let kappa = kappa.max(problem.support.worst_leftover(&point.z));
    let objective = problem.total_cost(&point.z, kappa);
    Ok(LinSolution {
        contract: LinearContract::from_stacked(&point.z, kappa),
        plan: CapacityPlan {
            kappa,
            expected_cost: objective,
            policy: PolicyTag::Lin,
        },
        objective,
        nu: point.nu(),
        beta_pinned,
    })
}

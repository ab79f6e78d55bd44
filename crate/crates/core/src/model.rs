//! Cost model and single-timeslot dispatch.
//!
//! A timeslot has customers with quadratic costs `C_i(x) = a_i x²`, an LSE
//! penalty `C_g(Δ) = A Δ²` on the leftover mismatch `Δ = D − Σ x_i`, and a
//! capacity bound `−κ ≤ Δ ≤ κ`. With quadratic costs the optimum is closed
//! form: every customer's marginal cost equals the LSE's marginal penalty,
//! unless the capacity bound binds, in which case the leftover sits on the
//! bound and the multiplier of that face absorbs the difference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadratic customer cost `a·x²` ($ per kW² per slot).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CustomerCost {
    pub a: f64,
}

impl CustomerCost {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidModel(format!(
                "customer cost coefficient must be positive, got {a}"
            )));
        }
        Ok(CustomerCost { a })
    }
}

/// LSE costs: mismatch penalty `A·Δ²` and a linear capacity price `c·κ`
/// amortized to one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LseCost {
    pub penalty: f64,
    pub capacity_price: f64,
}

impl LseCost {
    pub fn new(penalty: f64, capacity_price: f64) -> Result<Self> {
        if !(penalty > 0.0) || !penalty.is_finite() {
            return Err(Error::InvalidModel(format!(
                "mismatch penalty must be positive, got {penalty}"
            )));
        }
        if !(capacity_price >= 0.0) || !capacity_price.is_finite() {
            return Err(Error::InvalidModel(format!(
                "capacity price must be non-negative, got {capacity_price}"
            )));
        }
        Ok(LseCost {
            penalty,
            capacity_price,
        })
    }

    pub fn capacity_cost(&self, kappa: f64) -> f64 {
        self.capacity_price * kappa
    }
}

/// Solution of one slot's dispatch problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    /// Per-customer demand response (kW, positive = reduction).
    pub x: Vec<f64>,
    /// Leftover mismatch `D − Σx` (kW).
    pub delta: f64,
    /// Multiplier of `Δ ≥ −κ`.
    pub theta_lo: f64,
    /// Multiplier of `Δ ≤ κ`.
    pub theta_hi: f64,
    pub customer_cost: f64,
    pub lse_cost: f64,
}

impl DispatchResult {
    pub fn total_cost(&self) -> f64 {
        self.customer_cost + self.lse_cost
    }

    pub fn absorbed(&self) -> f64 {
        self.x.iter().sum()
    }
}

fn check_inputs(a: &[f64], penalty: f64, d: f64) -> Result<()> {
    if a.is_empty() {
        return Err(Error::InvalidModel("no customers".into()));
    }
    if let Some(bad) = a.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "customer cost coefficient must be positive, got {bad}"
        )));
    }
    if !(penalty > 0.0) || !penalty.is_finite() {
        return Err(Error::InvalidModel(format!(
            "mismatch penalty must be positive, got {penalty}"
        )));
    }
    if !d.is_finite() {
        return Err(Error::InvalidArgument(format!("mismatch must be finite, got {d}")));
    }
    Ok(())
}

fn costs(x: &[f64], a: &[f64], penalty: f64, delta: f64) -> (f64, f64) {
    let customer = x.iter().zip(a).map(|(x, a)| a * x * x).sum();
    (customer, penalty * delta * delta)
}

/// Unconstrained optimum: `x_i = A / ((1 + Σ_j A/a_j) a_i) · D`.
pub fn dispatch_unconstrained(a: &[f64], penalty: f64, d: f64) -> Result<DispatchResult> {
    check_inputs(a, penalty, d)?;
    let share: f64 = a.iter().map(|aj| penalty / aj).sum();
    let delta = d / (1.0 + share);
    let x: Vec<f64> = a.iter().map(|ai| penalty * delta / ai).collect();
    let (customer_cost, lse_cost) = costs(&x, a, penalty, delta);
    Ok(DispatchResult {
        x,
        delta,
        theta_lo: 0.0,
        theta_hi: 0.0,
        customer_cost,
        lse_cost,
    })
}

/// Optimum under the capacity bound `−κ ≤ D − Σx ≤ κ`.
///
/// The binding face is chosen by the sign of the unconstrained leftover.
/// On a binding face `x_i ∝ 1/a_i` with `Σx = D ∓ κ`, and the face's
/// multiplier is the stationarity residual `2a_i x_i − 2AΔ` (sign-adjusted).
pub fn dispatch_capped(a: &[f64], penalty: f64, d: f64, kappa: f64) -> Result<DispatchResult> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "capacity must be non-negative, got {kappa}"
        )));
    }
    let free = dispatch_unconstrained(a, penalty, d)?;
    if kappa > 0.0 && free.delta.abs() <= kappa {
        return Ok(free);
    }
    if d == 0.0 {
        return Ok(free);
    }
    let delta = if free.delta > 0.0 { kappa } else { -kappa };
    let inv_sum: f64 = a.iter().map(|aj| 1.0 / aj).sum();
    let absorbed = d - delta;
    let x: Vec<f64> = a.iter().map(|ai| absorbed / (ai * inv_sum)).collect();
    // Common customer marginal 2·a_i·x_i.
    let marginal = 2.0 * absorbed / inv_sum;
    let residual = marginal - 2.0 * penalty * delta;
    let (theta_lo, theta_hi) = if free.delta > 0.0 {
        (0.0, residual.max(0.0))
    } else {
        ((-residual).max(0.0), 0.0)
    };
    let (customer_cost, lse_cost) = costs(&x, a, penalty, delta);
    Ok(DispatchResult {
        x,
        delta,
        theta_lo,
        theta_hi,
        customer_cost,
        lse_cost,
    })
}

/// Subgradient of the optimal slot cost `R(κ)` with respect to `κ`.
pub fn kappa_subgradient(result: &DispatchResult) -> f64 {
    -(result.theta_lo + result.theta_hi)
}

/// `Σ a_i x_i² + A Δ²` for an arbitrary dispatch.
pub fn realized_social_cost(result: &DispatchResult, a: &[f64], penalty: f64) -> f64 {
    let (customer, lse) = costs(&result.x, a, penalty, result.delta);
    customer + lse
}

/// Residuals of the first-order optimality system of a capped dispatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    pub stationarity: f64,
    pub complementary: f64,
    pub primal: f64,
    pub dual: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.complementary)
            .max(self.primal)
            .max(self.dual)
    }
}

pub fn kkt_residual(result: &DispatchResult, a: &[f64], penalty: f64, d: f64, kappa: f64) -> KktResidual {
    let leftover = d - result.x.iter().sum::<f64>();
    let stationarity = result
        .x
        .iter()
        .zip(a)
        .map(|(x, a)| {
            (2.0 * a * x - 2.0 * penalty * leftover + result.theta_lo - result.theta_hi).abs()
        })
        .fold(0.0, f64::max);
    let complementary = (result.theta_lo * (leftover + kappa))
        .abs()
        .max((result.theta_hi * (leftover - kappa)).abs());
    let primal = (leftover.abs() - kappa).max(0.0) + (leftover - result.delta).abs();
    let dual = (-result.theta_lo).max(0.0) + (-result.theta_hi).max(0.0);
    KktResidual {
        stationarity,
        complementary,
        primal,
        dual,
    }
}

/// Scalar summary of a slot whose customers all see the same marginal cost.
///
/// With quadratic costs the optimal split is `x_i ∝ 1/a_i`, so every
/// aggregate quantity depends on the customers only through `Σ 1/a_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateDispatch {
    pub leftover: f64,
    pub absorbed: f64,
    pub dual_sum: f64,
    pub customer_cost: f64,
    pub lse_cost: f64,
}

impl AggregateDispatch {
    pub fn total_cost(&self) -> f64 {
        self.customer_cost + self.lse_cost
    }
}

/// Same optimum as [`dispatch_capped`], computed from `inv_sum = Σ 1/a_i`.
pub fn dispatch_aggregate(inv_sum: f64, penalty: f64, d: f64, kappa: f64) -> AggregateDispatch {
    let free_leftover = d / (1.0 + penalty * inv_sum);
    let (leftover, dual_sum) = if free_leftover.abs() <= kappa && (kappa > 0.0 || d == 0.0) {
        (free_leftover, 0.0)
    } else {
        let leftover = kappa.copysign(free_leftover);
        let residual = 2.0 * (d - leftover) / inv_sum - 2.0 * penalty * leftover;
        (leftover, residual.abs())
    };
    let absorbed = d - leftover;
    AggregateDispatch {
        leftover,
        absorbed,
        dual_sum,
        customer_cost: absorbed * absorbed / inv_sum,
        lse_cost: penalty * leftover * leftover,
    }
}

/// Convex, differentiable cost with `C(0) = 0` and `C′(0) = 0`.
///
/// Extension point for non-quadratic customer or penalty costs; dispatch
/// goes through [`dispatch_convex`], which only needs the marginal.
pub trait ConvexCost {
    fn value(&self, x: f64) -> f64;
    /// Nondecreasing derivative.
    fn marginal(&self, x: f64) -> f64;
}

/// `a·x²`.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic(pub f64);

impl ConvexCost for Quadratic {
    fn value(&self, x: f64) -> f64 {
        self.0 * x * x
    }

    fn marginal(&self, x: f64) -> f64 {
        2.0 * self.0 * x
    }
}

const BISECT_ITERS: usize = 200;

/// Smallest bracket `[lo, hi]` around the root of a nondecreasing `f`.
fn bracket(f: &dyn Fn(f64) -> f64, scale: f64) -> (f64, f64) {
    let mut width = scale.abs().max(1.0);
    loop {
        let (lo, hi) = (-width, width);
        if f(lo) <= 0.0 && f(hi) >= 0.0 {
            return (lo, hi);
        }
        width *= 2.0;
        if !width.is_finite() {
            return (lo, hi);
        }
    }
}

fn bisect(f: &dyn Fn(f64) -> f64, scale: f64) -> f64 {
    let (mut lo, mut hi) = bracket(f, scale);
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Customer response to a common marginal level `m`: solves `C_i′(x) = m`.
fn response(cost: &dyn ConvexCost, level: f64, scale: f64) -> f64 {
    if level == 0.0 {
        return 0.0;
    }
    bisect(&|x| cost.marginal(x) - level, scale)
}

/// Capped dispatch for general convex costs by nested bisection.
///
/// The outer search runs on the leftover `Δ` (or, on a binding face, on
/// the common marginal level); each customer's response inverts its own
/// marginal. Matches [`dispatch_capped`] for quadratic costs.
pub fn dispatch_convex(
    customers: &[&dyn ConvexCost],
    penalty: &dyn ConvexCost,
    d: f64,
    kappa: f64,
) -> Result<DispatchResult> {
    if customers.is_empty() {
        return Err(Error::InvalidModel("no customers".into()));
    }
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "capacity must be non-negative, got {kappa}"
        )));
    }
    let scale = d.abs().max(1.0);
    let absorbed_at = |level: f64| -> f64 {
        customers.iter().map(|c| response(*c, level, scale)).sum()
    };
    // Unconstrained: Δ + Σ x_i(C_g′(Δ)) = D, increasing in Δ.
    let free = bisect(&|delta| delta + absorbed_at(penalty.marginal(delta)) - d, scale);
    let (delta, level, theta_lo, theta_hi) = if free.abs() <= kappa && (kappa > 0.0 || d == 0.0) {
        (free, penalty.marginal(free), 0.0, 0.0)
    } else {
        let delta = kappa.copysign(free);
        let target = d - delta;
        let level = bisect(&|m| absorbed_at(m) - target, scale);
        let residual = level - penalty.marginal(delta);
        if free > 0.0 {
            (delta, level, 0.0, residual.max(0.0))
        } else {
            (delta, level, (-residual).max(0.0), 0.0)
        }
    };
    let x: Vec<f64> = customers.iter().map(|c| response(*c, level, scale)).collect();
    let customer_cost = customers.iter().zip(&x).map(|(c, x)| c.value(*x)).sum();
    Ok(DispatchResult {
        x,
        delta,
        theta_lo,
        theta_hi,
        customer_cost,
        lse_cost: penalty.value(delta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Grid search over (x1, x2) for Σ a_i x_i² + A (D − Σx)², with an
    /// optional |Δ| ≤ κ filter. Independent of the closed form.
    fn grid_min2(a: [f64; 2], penalty: f64, d: f64, kappa: Option<f64>) -> (f64, [f64; 2]) {
        let span = d.abs() + 1.0;
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        let coarse = 400;
        let mut center = [0.0, 0.0];
        let mut width = span;
        for _ in 0..6 {
            for i in 0..=coarse {
                for j in 0..=coarse {
                    let x1 = center[0] - width + 2.0 * width * i as f64 / coarse as f64;
                    let x2 = center[1] - width + 2.0 * width * j as f64 / coarse as f64;
                    let left = d - x1 - x2;
                    if let Some(k) = kappa {
                        if left.abs() > k + 1e-12 {
                            continue;
                        }
                    }
                    let v = a[0] * x1 * x1 + a[1] * x2 * x2 + penalty * left * left;
                    if v < best.0 {
                        best = (v, [x1, x2]);
                    }
                }
            }
            center = best.1;
            width /= 20.0;
        }
        best
    }

    #[test]
    fn closed_form_two_equal_customers() {
        let r = dispatch_unconstrained(&[1.0, 1.0], 1.0, 3.0).unwrap();
        assert!(close(r.x[0], 1.0, 1e-12) && close(r.x[1], 1.0, 1e-12));
        assert!(close(r.delta, 1.0, 1e-12));
        assert_eq!((r.theta_lo, r.theta_hi), (0.0, 0.0));
    }

    #[test]
    fn zero_mismatch_gives_zero_dispatch() {
        let r = dispatch_unconstrained(&[5.0, 2.0], 1.0, 0.0).unwrap();
        assert_eq!(r.x, vec![0.0, 0.0]);
        assert_eq!(r.delta, 0.0);
    }

    #[test]
    fn closed_form_matches_grid_oracle() {
        // Oracle value computed first, then compared to the closed form.
        let (best, xs) = grid_min2([2.0, 4.0], 2.0, 6.0, None);
        let r = dispatch_unconstrained(&[2.0, 4.0], 2.0, 6.0).unwrap();
        // S = 2/2 + 2/4 = 1.5, delta = 6/2.5 = 2.4, x = [2.4, 1.2].
        assert!(close(r.delta, 2.4, 1e-12));
        assert!(close(r.x[0], 2.4, 1e-12) && close(r.x[1], 1.2, 1e-12));
        assert!(close(xs[0], 2.4, 1e-6) && close(xs[1], 1.2, 1e-6));
        assert!(close(r.total_cost(), best, 1e-6));
    }

    #[test]
    fn marginal_costs_equalized() {
        let a = [0.3, 1.7, 4.0];
        let r = dispatch_unconstrained(&a, 0.8, -7.5).unwrap();
        for (ai, xi) in a.iter().zip(&r.x) {
            assert!(close(2.0 * ai * xi, 2.0 * 0.8 * r.delta, 1e-12));
        }
    }

    #[test]
    fn capped_single_customer_upper_face() {
        let r = dispatch_capped(&[1.0], 1.0, 4.0, 1.0).unwrap();
        assert!(close(r.x[0], 3.0, 1e-12));
        assert!(close(r.delta, 1.0, 1e-12));
        assert!(close(r.theta_hi, 4.0, 1e-12));
        assert_eq!(r.theta_lo, 0.0);
        assert!(close(kappa_subgradient(&r), -4.0, 1e-12));
        assert!(close(realized_social_cost(&r, &[1.0], 1.0), 10.0, 1e-12));
    }

    #[test]
    fn capped_non_binding_equals_unconstrained() {
        let r = dispatch_capped(&[1.0, 1.0], 1.0, 3.0, 2.0).unwrap();
        assert_eq!(r, dispatch_unconstrained(&[1.0, 1.0], 1.0, 3.0).unwrap());
        assert_eq!(kappa_subgradient(&r), 0.0);
        assert!(close(realized_social_cost(&r, &[1.0, 1.0], 1.0), 3.0, 1e-12));
    }

    #[test]
    fn capped_lower_face_matches_projected_grid() {
        let (best, xs) = grid_min2([1.0, 1.0], 1.0, -3.0, Some(0.5));
        let r = dispatch_capped(&[1.0, 1.0], 1.0, -3.0, 0.5).unwrap();
        assert!(close(r.delta, -0.5, 1e-12));
        assert!(close(r.x[0], -1.25, 1e-12) && close(r.x[1], -1.25, 1e-12));
        assert!(close(xs[0], -1.25, 1e-4) && close(xs[1], -1.25, 1e-4));
        assert!(r.theta_lo > 0.0 && r.theta_hi == 0.0);
        assert!(close(r.total_cost(), best, 1e-6));
        assert!(kkt_residual(&r, &[1.0, 1.0], 1.0, -3.0, 0.5).max() < 1e-12);
    }

    #[test]
    fn zero_capacity_reports_sign_of_mismatch() {
        let up = dispatch_capped(&[1.0, 2.0], 1.0, 3.0, 0.0).unwrap();
        assert_eq!(up.delta, 0.0);
        assert!(up.theta_hi > 0.0 && up.theta_lo == 0.0);
        let down = dispatch_capped(&[1.0, 2.0], 1.0, -3.0, 0.0).unwrap();
        assert!(down.theta_lo > 0.0 && down.theta_hi == 0.0);
        let flat = dispatch_capped(&[1.0, 2.0], 1.0, 0.0, 0.0).unwrap();
        assert_eq!((flat.theta_lo, flat.theta_hi), (0.0, 0.0));
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(matches!(
            dispatch_unconstrained(&[1.0, 0.0], 1.0, 1.0),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            dispatch_unconstrained(&[1.0], -1.0, 1.0),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            dispatch_capped(&[1.0], 1.0, 1.0, -0.1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(CustomerCost::new(0.0).is_err());
        assert!(LseCost::new(1.0, -1.0).is_err());
    }

    #[test]
    fn subgradient_matches_finite_difference() {
        let a = [0.5, 2.0];
        let (penalty, d, kappa, h) = (1.5, 9.0, 0.7, 1e-4);
        let r = |k: f64| dispatch_capped(&a, penalty, d, k).unwrap().total_cost();
        let fd = (r(kappa + h) - r(kappa - h)) / (2.0 * h);
        let g = kappa_subgradient(&dispatch_capped(&a, penalty, d, kappa).unwrap());
        assert!(((fd - g) / g).abs() < 1e-6, "fd {fd} vs {g}");
    }

    #[test]
    fn aggregate_matches_vector_dispatch() {
        let a = [0.3, 1.1, 2.5];
        let inv: f64 = a.iter().map(|v| 1.0 / v).sum();
        for &(d, k) in &[(5.0, 0.5), (-5.0, 0.5), (5.0, 10.0), (2.0, 0.0), (0.0, 0.0)] {
            let v = dispatch_capped(&a, 0.9, d, k).unwrap();
            let g = dispatch_aggregate(inv, 0.9, d, k);
            assert!(close(v.delta, g.leftover, 1e-12));
            assert!(close(v.total_cost(), g.total_cost(), 1e-12));
            assert!(close(v.theta_lo + v.theta_hi, g.dual_sum, 1e-12));
        }
    }

    #[test]
    fn convex_seam_matches_quadratic_closed_form() {
        let a = [0.4, 1.0, 3.0];
        let quads: Vec<Quadratic> = a.iter().map(|v| Quadratic(*v)).collect();
        let refs: Vec<&dyn ConvexCost> = quads.iter().map(|q| q as &dyn ConvexCost).collect();
        for &(d, k) in &[(6.0, 100.0), (6.0, 0.3), (-4.0, 0.2), (3.0, 0.0)] {
            let g = dispatch_convex(&refs, &Quadratic(1.2), d, k).unwrap();
            let c = dispatch_capped(&a, 1.2, d, k).unwrap();
            assert!(close(g.delta, c.delta, 1e-9), "{d} {k}");
            for (x, y) in g.x.iter().zip(&c.x) {
                assert!(close(*x, *y, 1e-9));
            }
            assert!(close(g.theta_hi, c.theta_hi, 1e-8));
            assert!(close(g.theta_lo, c.theta_lo, 1e-8));
        }
    }
}

//! Strictly convex QP under the worst-case leftover constraints
//!
//!   min ½zᵀHz + gᵀz   s.t.  −κ ≤ D(1 − Σα) − Σβ_iδ_i − Σγ ≤ κ  for every
//!   vertex (D, δ) of the support box.
//!
//! The vertex set is never enumerated. Cuts are added one at a time from an
//! oracle that returns the most violated vertex, and each restricted
//! problem is solved exactly through its small nonnegative dual.
//! Coordinates outside `free` stay pinned at zero.

use crate::error::{Error, Result};
use crate::linalg::{dot, solve_spd, Cholesky, Matrix};

use super::problem::{Layout, SupportBox};

const MAX_CUTS: usize = 500;
const BISECTION_STEPS: usize = 200;

/// One vertex constraint, written as rowᵀz ≥ sign·D_v − κ.
#[derive(Debug, Clone)]
struct Cut {
    upper: bool,
    sign_d: f64,
    row: Vec<f64>,
    h_inv_row: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpPoint {
    /// Full-length variable vector.
    pub z: Vec<f64>,
    /// Multiplier mass on the upper and lower constraint families.
    pub nu_upper: f64,
    pub nu_lower: f64,
}

impl QpPoint {
    pub fn nu(&self) -> f64 {
        self.nu_upper + self.nu_lower
    }
}

#[derive(Debug, Clone)]
pub struct VertexQp<'a> {
    support: &'a SupportBox,
    layout: Layout,
    free: Vec<usize>,
    chol: Cholesky,
    z_free: Vec<f64>,
    cuts: Vec<Cut>,
    gram: Vec<Vec<f64>>,
    tol: f64,
}

impl<'a> VertexQp<'a> {
    /// `h` and `g` are full length; a ridge of 1e-12·trace keeps the
    /// restricted Hessian positive definite.
    pub fn new(h: &Matrix, g: &[f64], free: Vec<usize>, support: &'a SupportBox) -> Result<Self> {
        let layout = Layout { n: support.lo.len() };
        assert_eq!(h.rows(), layout.dim());
        let mut hf = h.select(&free);
        let ridge = 1e-12 * hf.trace().abs().max(1e-300);
        hf.add_diagonal(ridge);
        let chol = Cholesky::new(&hf)
            .ok_or_else(|| Error::Numerical("contract Hessian is not positive definite".into()))?;
        let scale = support.d_lo.abs().max(support.d_hi.abs()).max(1.0);
        let mut qp = VertexQp {
            support,
            layout,
            free,
            chol,
            z_free: Vec::new(),
            cuts: Vec::new(),
            gram: Vec::new(),
            tol: 1e-10 * scale,
        };
        qp.set_linear(g);
        Ok(qp)
    }

    /// Replace the linear term, keeping the factorization and known cuts.
    pub fn set_linear(&mut self, g: &[f64]) {
        let gf: Vec<f64> = self.free.iter().map(|&k| -g[k]).collect();
        self.z_free = self.chol.solve(&gf);
    }

    fn expand(&self, zf: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.layout.dim()];
        for (&k, v) in self.free.iter().zip(zf) {
            z[k] = *v;
        }
        z
    }

    /// The unconstrained minimizer.
    pub fn free_point(&self) -> Vec<f64> {
        self.expand(&self.z_free)
    }

    fn vertex_cut(&self, z: &[f64], upper: bool) -> Cut {
        let b = self.support;
        let l = self.layout;
        let slope = 1.0 - (0..l.n).map(|i| z[l.alpha(i)]).sum::<f64>();
        // Upper cuts maximize Δ over the box, lower cuts minimize it.
        let d = if (slope >= 0.0) == upper { b.d_hi } else { b.d_lo };
        let sign = if upper { 1.0 } else { -1.0 };
        let mut full = vec![0.0; l.dim()];
        for i in 0..l.n {
            let beta = z[l.beta(i)];
            let delta = if (beta > 0.0) == upper { b.lo[i] } else { b.hi[i] };
            full[l.alpha(i)] = sign * d;
            full[l.beta(i)] = sign * delta;
            full[l.gamma(i)] = sign;
        }
        let row: Vec<f64> = self.free.iter().map(|&k| full[k]).collect();
        let h_inv_row = self.chol.solve(&row);
        Cut { upper, sign_d: sign * d, row, h_inv_row }
    }

    fn add_cut(&mut self, cut: Cut) -> Result<()> {
        if self.cuts.iter().any(|c| c.upper == cut.upper && c.row == cut.row) {
            return Err(Error::Numerical("worst-case cut repeated; dual solve stalled".into()));
        }
        let col: Vec<f64> = self.cuts.iter().map(|c| dot(&c.row, &cut.h_inv_row)).collect();
        for (r, v) in self.gram.iter_mut().zip(&col) {
            r.push(*v);
        }
        let mut last = col;
        last.push(dot(&cut.row, &cut.h_inv_row));
        self.gram.push(last);
        self.cuts.push(cut);
        Ok(())
    }

    /// Minimize subject to the constraints at capacity κ.
    pub fn solve(&mut self, kappa: f64) -> Result<QpPoint> {
        for _ in 0..MAX_CUTS {
            let r: Vec<f64> = self
                .cuts
                .iter()
                .map(|c| c.sign_d - kappa - dot(&c.row, &self.z_free))
                .collect();
            let lambda = nonnegative_qp(&self.gram, &r);
            let mut zf = self.z_free.clone();
            for (c, &l) in self.cuts.iter().zip(&lambda) {
                if l > 0.0 {
                    for (z, h) in zf.iter_mut().zip(&c.h_inv_row) {
                        *z += l * h;
                    }
                }
            }
            let z = self.expand(&zf);
            let (max, min) = self.support.leftover_range(&z);
            let over = max - kappa;
            let under = -kappa - min;
            if over <= self.tol && under <= self.tol {
                let (mut nu_upper, mut nu_lower) = (0.0, 0.0);
                for (c, l) in self.cuts.iter().zip(&lambda) {
                    if c.upper {
                        nu_upper += l;
                    } else {
                        nu_lower += l;
                    }
                }
                return Ok(QpPoint { z, nu_upper, nu_lower });
            }
            let cut = self.vertex_cut(&z, over >= under);
            self.add_cut(cut)?;
        }
        Err(Error::Numerical(format!("no feasible contract after {MAX_CUTS} cuts")))
    }

    /// Jointly optimal κ for min c·κ + V(κ): bisection on ν(κ) = c over
    /// [0, κ_free], where ν is the total multiplier and κ_free the worst-case
    /// leftover of the unconstrained minimizer.
    pub fn optimize_kappa(&mut self, capacity_price: f64) -> Result<(f64, QpPoint)> {
        let z0 = self.free_point();
        let kappa_free = self.support.worst_leftover(&z0);
        let free = QpPoint { z: z0, nu_upper: 0.0, nu_lower: 0.0 };
        if capacity_price <= 0.0 || kappa_free == 0.0 {
            return Ok((kappa_free, free));
        }
        let (mut lo, mut hi) = (0.0, kappa_free);
        let mut best = None;
        for _ in 0..BISECTION_STEPS {
            if hi - lo <= 1e-12 * kappa_free {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let point = self.solve(mid)?;
            if point.nu() > capacity_price {
                lo = mid;
            } else {
                hi = mid;
                best = Some(point);
            }
        }
        let point = match best {
            Some(p) => p,
            None => free,
        };
        Ok((hi, point))
    }
}

/// min ½λᵀQλ − rᵀλ over λ ≥ 0, by a Lawson–Hanson style active set.
pub(crate) fn nonnegative_qp(q: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
    let m = r.len();
    let mut lambda = vec![0.0; m];
    if m == 0 {
        return lambda;
    }
    let scale = (0..m).map(|i| q[i][i].abs()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-14 * (1.0 + r.iter().map(|v| v.abs()).fold(0.0, f64::max));
    let mut passive = vec![false; m];
    for _ in 0..(3 * m + 20) {
        let w: Vec<f64> = (0..m).map(|i| r[i] - dot(&q[i], &lambda)).collect();
        let entering = (0..m)
            .filter(|&i| !passive[i] && w[i] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = entering else { break };
        passive[j] = true;
        for _ in 0..(m + 5) {
            let idx: Vec<usize> = (0..m).filter(|&i| passive[i]).collect();
            let sub = Matrix::from_fn(idx.len(), idx.len(), |a, b| q[idx[a]][idx[b]]);
            let rhs: Vec<f64> = idx.iter().map(|&i| r[i]).collect();
            let s = solve_spd(&sub, &rhs, 1e-13 * scale).unwrap_or_else(|| vec![0.0; idx.len()]);
            if s.iter().all(|v| *v > 0.0) {
                for (&i, v) in idx.iter().zip(&s) {
                    lambda[i] = *v;
                }
                break;
            }
            let mut step = 1.0f64;
            for (&i, &v) in idx.iter().zip(&s) {
                if v <= 0.0 {
                    let denom = lambda[i] - v;
                    step = step.min(if denom > 0.0 { lambda[i] / denom } else { 0.0 });
                }
            }
            for (&i, &v) in idx.iter().zip(&s) {
                lambda[i] += step * (v - lambda[i]);
                if lambda[i] <= 1e-15 * scale.max(1.0) || (v <= 0.0 && lambda[i] <= 0.0) {
                    lambda[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    lambda
}

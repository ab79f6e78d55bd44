//! The linear-contract problem in moment form.
//!
//! Variables are stacked as z = (α_1..α_N, β_1..β_N, γ_1..γ_N). With
//! Ψ = (D·1, δ, 1) the aggregate response is Σx = Ψᵀz, and
//!
//!   F(z) = Σ_i â_i E[(α_i D + β_i δ_i + γ_i)²] + A·E[(D − Ψᵀz)²]
//!        = zᵀPz − 2qᵀz + A·E[D²].

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scenario::ScenarioSet;

/// Product box the worst-case constraints range over.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportBox {
    pub d_lo: f64,
    pub d_hi: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SupportBox {
    /// Largest and smallest leftover Δ = D(1 − Σα) − Σβ_iδ_i − Σγ over the box.
    pub fn leftover_range(&self, z: &[f64]) -> (f64, f64) {
        let n = self.lo.len();
        let (alpha, rest) = z.split_at(n);
        let (beta, gamma) = rest.split_at(n);
        let slope = 1.0 - alpha.iter().sum::<f64>();
        let shift = gamma.iter().sum::<f64>();
        let (d_min, d_max) = if slope >= 0.0 {
            (slope * self.d_lo, slope * self.d_hi)
        } else {
            (slope * self.d_hi, slope * self.d_lo)
        };
        let mut max = d_max - shift;
        let mut min = d_min - shift;
        for i in 0..n {
            let (a, b) = (-beta[i] * self.lo[i], -beta[i] * self.hi[i]);
            max += a.max(b);
            min += a.min(b);
        }
        (max, min)
    }

    /// max |Δ| over the box.
    pub fn worst_leftover(&self, z: &[f64]) -> f64 {
        let (max, min) = self.leftover_range(z);
        max.max(-min).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct LinProblem {
    pub a_hat: Vec<f64>,
    pub penalty: f64,
    pub capacity_price: f64,
    /// E[D²], E[D].
    pub ed2: f64,
    pub ed: f64,
    /// E[D δ_i].
    pub ed_delta: Vec<f64>,
    /// E[δ_i].
    pub e_delta: Vec<f64>,
    /// E[δ_i δ_j].
    pub delta2: Matrix,
    pub support: SupportBox,
}

/// Index helpers for the stacked variable vector.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub n: usize,
}

impl Layout {
    pub fn alpha(&self, i: usize) -> usize {
        i
    }
    pub fn beta(&self, i: usize) -> usize {
        self.n + i
    }
    pub fn gamma(&self, i: usize) -> usize {
        2 * self.n + i
    }
    pub fn dim(&self) -> usize {
        3 * self.n
    }
}

impl LinProblem {
    pub fn from_set(set: &ScenarioSet, penalty: f64, capacity_price: f64) -> Result<Self> {
        let n = set.customers();
        if set.is_empty() || n == 0 {
            return Err(Error::InsufficientData { needed: 1, got: set.len() });
        }
        let m = &set.moments;
        let cross = m.d_cross();
        Ok(LinProblem {
            a_hat: set.a_hat.clone(),
            penalty,
            capacity_price,
            ed2: m.d_second(),
            ed: m.mean_d(),
            ed_delta: cross[..n].to_vec(),
            e_delta: m.mean[..n].to_vec(),
            delta2: Matrix::from_fn(n, n, |i, j| m.second[(i, j)]),
            support: SupportBox {
                d_lo: set.support.d_lo,
                d_hi: set.support.d_hi,
                lo: set.support.delta_lo.clone(),
                hi: set.support.delta_hi.clone(),
            },
        })
    }

    pub fn customers(&self) -> usize {
        self.a_hat.len()
    }

    pub fn layout(&self) -> Layout {
        Layout { n: self.customers() }
    }

    /// Customer i's second-moment matrix of (D, δ_i, 1).
    pub fn phi(&self, i: usize) -> [[f64; 3]; 3] {
        let (dd, d1) = (self.ed_delta[i], self.e_delta[i]);
        [
            [self.ed2, dd, self.ed],
            [dd, self.delta2[(i, i)], d1],
            [self.ed, d1, 1.0],
        ]
    }

    /// E[ΨΨᵀ].
    pub fn aggregate_second_moment(&self) -> Matrix {
        let l = self.layout();
        let n = l.n;
        Matrix::from_fn(l.dim(), l.dim(), |r, c| {
            let (br, i) = (r / n, r % n);
            let (bc, j) = (c / n, c % n);
            match (br, bc) {
                (0, 0) => self.ed2,
                (0, 1) => self.ed_delta[j],
                (1, 0) => self.ed_delta[i],
                (0, 2) | (2, 0) => self.ed,
                (1, 1) => self.delta2[(i, j)],
                (1, 2) => self.e_delta[i],
                (2, 1) => self.e_delta[j],
                _ => 1.0,
            }
        })
    }

    /// E[D Ψ].
    pub fn d_psi(&self) -> Vec<f64> {
        let n = self.customers();
        let mut v = vec![self.ed2; n];
        v.extend_from_slice(&self.ed_delta);
        v.extend(std::iter::repeat_n(self.ed, n));
        v
    }

    /// P with F(z) = zᵀPz − 2qᵀz + A·E[D²].
    pub fn p_matrix(&self) -> Matrix {
        let l = self.layout();
        let mut p = self.aggregate_second_moment();
        for r in 0..l.dim() {
            for c in 0..l.dim() {
                p[(r, c)] *= self.penalty;
            }
        }
        for i in 0..l.n {
            let phi = self.phi(i);
            let idx = [l.alpha(i), l.beta(i), l.gamma(i)];
            for (a, &r) in idx.iter().enumerate() {
                for (b, &c) in idx.iter().enumerate() {
                    p[(r, c)] += self.a_hat[i] * phi[a][b];
                }
            }
        }
        p
    }

    pub fn q_vector(&self) -> Vec<f64> {
        self.d_psi().into_iter().map(|v| self.penalty * v).collect()
    }

    /// F(z): expected customer cost plus expected mismatch penalty, per slot.
    pub fn objective(&self, z: &[f64]) -> f64 {
        self.customer_costs(z).iter().sum::<f64>() + self.penalty_cost(z)
    }

    /// â_i E[x_i²] per customer.
    pub fn customer_costs(&self, z: &[f64]) -> Vec<f64> {
        let l = self.layout();
        (0..l.n)
            .map(|i| {
                let phi = self.phi(i);
                let v = [z[l.alpha(i)], z[l.beta(i)], z[l.gamma(i)]];
                let mut s = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        s += v[a] * phi[a][b] * v[b];
                    }
                }
                self.a_hat[i] * s
            })
            .collect()
    }

    /// A·E[(D − Ψᵀz)²].
    pub fn penalty_cost(&self, z: &[f64]) -> f64 {
        let m = self.aggregate_second_moment();
        let v = self.ed2 - 2.0 * dot(&self.d_psi(), z) + m.quad_form(z);
        self.penalty * v.max(0.0)
    }

    /// ∇F(z) = 2(Pz − q).
    pub fn gradient(&self, p: &Matrix, z: &[f64]) -> Vec<f64> {
        let q = self.q_vector();
        p.mul_vec(z).iter().zip(&q).map(|(a, b)| 2.0 * (a - b)).collect()
    }

    /// c·κ + F(z).
    pub fn total_cost(&self, z: &[f64], kappa: f64) -> f64 {
        self.capacity_price * kappa + self.objective(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    fn toy() -> ScenarioSet {
        let scenarios = vec![
            Scenario::new(vec![1.0, -0.5], 0.2, vec![1.0, 2.0]),
            Scenario::new(vec![-1.0, 0.7], -0.4, vec![1.0, 2.0]),
            Scenario::new(vec![0.3, 0.1], 0.5, vec![1.0, 2.0]),
            Scenario::new(vec![0.6, -1.2], -0.1, vec![1.0, 2.0]),
        ];
        ScenarioSet::new(scenarios, vec![1.0, 2.0], vec![1.0, 2.0]).unwrap()
    }

    /// Sample-average objective computed slot by slot.
    fn direct_objective(set: &ScenarioSet, z: &[f64], penalty: f64) -> f64 {
        let n = set.customers();
        let mut total = 0.0;
        for s in &set.scenarios {
            let mut sum_x = 0.0;
            for i in 0..n {
                let x = z[i] * s.d + z[n + i] * s.delta[i] + z[2 * n + i];
                sum_x += x;
                total += set.a_hat[i] * x * x;
            }
            total += penalty * (s.d - sum_x).powi(2);
        }
        total / set.len() as f64
    }

    #[test]
    fn moment_objective_matches_sample_average() {
        let set = toy();
        let p = LinProblem::from_set(&set, 0.7, 0.0).unwrap();
        let z = [0.2, 0.3, -0.4, 0.1, 0.05, -0.02];
        let direct = direct_objective(&set, &z, 0.7);
        assert!((p.objective(&z) - direct).abs() < 1e-12);
        let pm = p.p_matrix();
        let quad = pm.quad_form(&z) - 2.0 * dot(&p.q_vector(), &z) + 0.7 * p.ed2;
        assert!((quad - direct).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let set = toy();
        let p = LinProblem::from_set(&set, 0.7, 0.0).unwrap();
        let pm = p.p_matrix();
        let z = vec![0.2, 0.3, -0.4, 0.1, 0.05, -0.02];
        let g = p.gradient(&pm, &z);
        let h = 1e-6;
        for k in 0..z.len() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[k] += h;
            zm[k] -= h;
            let fd = (p.objective(&zp) - p.objective(&zm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6, "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn leftover_range_matches_vertex_enumeration() {
        let set = toy();
        let p = LinProblem::from_set(&set, 0.7, 0.0).unwrap();
        let b = &p.support;
        let z = [0.2, 0.3, -0.4, 0.1, 0.05, -0.02];
        let (mut max, mut min) = (f64::MIN, f64::MAX);
        for d in [b.d_lo, b.d_hi] {
            for d0 in [b.lo[0], b.hi[0]] {
                for d1 in [b.lo[1], b.hi[1]] {
                    let x = (z[0] + z[1]) * d + z[2] * d0 + z[3] * d1 + z[4] + z[5];
                    max = max.max(d - x);
                    min = min.min(d - x);
                }
            }
        }
        let (hi, lo) = b.leftover_range(&z);
        assert!((hi - max).abs() < 1e-12 && (lo - min).abs() < 1e-12);
    }
}

//! Stochastic customer cost coefficients: latent means ã_i, per-slot
//! draws a_i(t) and the LSE's estimate â_i.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

const MAX_REJECTIONS: usize = 1000;

const STREAM_MEANS: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_TEST: u64 = 2;

/// Normal(mean, sd) restricted to [lo, hi] by rejection.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedNormal {
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !mean.is_finite() || !(sd >= 0.0) || !sd.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "truncated normal needs finite mean, sd >= 0 and lo <= hi (got mean={mean}, sd={sd}, [{lo}, {hi}])"
            )));
        }
        Ok(TruncatedNormal { mean, sd, lo, hi })
    }

    /// After `MAX_REJECTIONS` misses the last draw is clamped into range.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sd == 0.0 {
            return self.mean.clamp(self.lo, self.hi);
        }
        let normal = Normal::new(self.mean, self.sd).expect("sd checked in constructor");
        let mut x = self.mean;
        for _ in 0..MAX_REJECTIONS {
            x = normal.sample(rng);
            if (self.lo..=self.hi).contains(&x) {
                return x;
            }
        }
        x.clamp(self.lo, self.hi)
    }
}

/// Slot-major cost draws: `train[t][i]` is customer i's coefficient in
/// training slot t.
#[derive(Debug, Clone, PartialEq)]
pub struct CostDraws {
    pub a_tilde: Vec<f64>,
    pub a_hat: Vec<f64>,
    pub train: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
}

/// Draw ã_i around the middle of `mean_range` (sd = quarter of the width),
/// then `train_len` and `test_len` slots of a_i(t) ~ N(ã_i, rsd·ã_i), all
/// truncated to the range. The three stages use disjoint ChaCha streams.
pub fn sample_cost_coeffs(
    n: usize,
    mean_range: (f64, f64),
    rsd: f64,
    train_len: usize,
    test_len: usize,
    seed: u64,
) -> Result<CostDraws> {
    let (lo, hi) = mean_range;
    if !(lo > 0.0) || !(hi > lo) || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "cost range must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    if !(rsd >= 0.0) || !rsd.is_finite() {
        return Err(Error::InvalidArgument(format!("rsd must be >= 0, got {rsd}")));
    }
    if train_len == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let rng_for = |stream| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    };

    let mean_dist = TruncatedNormal::new((lo + hi) / 2.0, (hi - lo) / 4.0, lo, hi)?;
    let mut rng = rng_for(STREAM_MEANS);
    let a_tilde: Vec<f64> = (0..n).map(|_| mean_dist.sample(&mut rng)).collect();

    let slot_dists = a_tilde
        .iter()
        .map(|&m| TruncatedNormal::new(m, rsd * m, lo, hi))
        .collect::<Result<Vec<_>>>()?;
    let draw = |stream, len| {
        let mut rng = rng_for(stream);
        (0..len)
            .map(|_| slot_dists.iter().map(|d| d.sample(&mut rng)).collect::<Vec<f64>>())
            .collect::<Vec<_>>()
    };
    let train = draw(STREAM_TRAIN, train_len);
    let test = draw(STREAM_TEST, test_len);

    let mut a_hat = vec![0.0; n];
    for row in &train {
        for (s, v) in a_hat.iter_mut().zip(row) {
            *s += v;
        }
    }
    for s in &mut a_hat {
        *s /= train_len as f64;
    }
    Ok(CostDraws {
        a_tilde,
        a_hat,
        train,
        test,
    })
}

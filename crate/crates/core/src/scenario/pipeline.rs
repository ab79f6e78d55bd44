//! From base traces to a training/test pair of scenario sets.
//!
//! Days are split at random into three pools. Each base trace's predictor
//! is fitted on the history pool; the training and test pools are both
//! scored against that fit, so their errors are out of sample alike.
//! Customers are then bootstrapped from the error traces separately inside
//! each pool. Cost draws come last, so sweeps over rsd or wind capacity
//! reuse the error series.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::bootstrap::bootstrap_series;
use super::costs::sample_cost_coeffs;
use super::predict::Predictor;
use super::set::{assemble_scenarios, ScenarioSet};
use super::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub customers_per_base: usize,
    /// Share of days used to fit the predictors.
    pub history_fraction: f64,
    /// Share of the remaining days used for training; the rest is test.
    pub train_fraction: f64,
    pub predictor: Predictor,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            customers_per_base: 100,
            history_fraction: 1.0 / 3.0,
            train_fraction: 0.5,
            predictor: Predictor::default(),
            seed: 1,
        }
    }
}

/// Prediction errors per customer (`customers[i][t]`) and normalized wind
/// errors, for both pools.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub train_customers: Vec<Vec<f64>>,
    pub test_customers: Vec<Vec<f64>>,
    pub train_wind: Vec<f64>,
    pub test_wind: Vec<f64>,
}

impl ErrorSeries {
    pub fn customers(&self) -> usize {
        self.train_customers.len()
    }

    /// Keep only the first `n` customers.
    pub fn truncate(&mut self, n: usize) {
        self.train_customers.truncate(n);
        self.test_customers.truncate(n);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaySplit {
    pub history: Vec<usize>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_days(days: usize, spec: &SplitSpec) -> Result<DaySplit> {
    if days < 3 {
        return Err(Error::InsufficientData { needed: 3, got: days });
    }
    for (name, f) in [("history", spec.history_fraction), ("train", spec.train_fraction)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidArgument(format!("{name} fraction must be in (0, 1), got {f}")));
        }
    }
    let n_hist = ((days as f64 * spec.history_fraction).round() as usize).clamp(1, days - 2);
    let rest = days - n_hist;
    let n_train = ((rest as f64 * spec.train_fraction).round() as usize).clamp(1, rest - 1);
    let mut order: Vec<usize> = (0..days).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(20);
    order.shuffle(&mut rng);
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(DaySplit {
        history: sorted(&order[..n_hist]),
        train: sorted(&order[n_hist..n_hist + n_train]),
        test: sorted(&order[n_hist + n_train..]),
    })
}

/// Error traces of one base trace on the training and test pools.
fn pool_errors(base: &Trace, split: &DaySplit, predictor: Predictor) -> Result<(Trace, Trace)> {
    let fit = predictor.fit(&base.select_days(&split.history).series)?;
    let errors = |days: &[usize]| {
        let mut t = base.select_days(days);
        t.series = fit.errors(&t.series);
        t
    };
    Ok((errors(&split.train), errors(&split.test)))
}

pub fn build_error_series(homes: &[Trace], wind: &Trace, spec: &SplitSpec) -> Result<ErrorSeries> {
    if homes.is_empty() {
        return Err(Error::InvalidArgument("at least one load trace is required".into()));
    }
    let resolution = wind.resolution;
    if let Some(h) = homes.iter().find(|h| h.resolution != resolution) {
        return Err(Error::InvalidArgument(format!(
            "trace {} has {}s slots but wind has {resolution}s",
            h.source_id, h.resolution
        )));
    }
    let per_day = wind.slots_per_day();
    let days = homes.iter().map(Trace::len).chain([wind.len()]).min().unwrap_or(0) / per_day;
    let split = split_days(days, spec)?;

    let mut train_bases = Vec::with_capacity(homes.len());
    let mut test_bases = Vec::with_capacity(homes.len());
    for h in homes {
        let (tr, te) = pool_errors(h, &split, spec.predictor)?;
        train_bases.push(tr);
        test_bases.push(te);
    }
    let (wind_train, wind_test) = pool_errors(wind, &split, spec.predictor)?;

    let seed = spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let block = wind.slots_per_day();
    let resample = |bases: &[Trace], count: usize, seed: u64| {
        let series: Vec<&[f64]> = bases.iter().map(|b| b.series.as_slice()).collect();
        bootstrap_series(&series, count, block, seed)
    };
    let train_customers = resample(&train_bases, spec.customers_per_base, seed ^ 1)?;
    let test_customers = resample(&test_bases, spec.customers_per_base, seed ^ 2)?;
    Ok(ErrorSeries {
        train_customers,
        test_customers,
        train_wind: resample(std::slice::from_ref(&wind_train), 1, seed ^ 3)?.remove(0),
        test_wind: resample(std::slice::from_ref(&wind_test), 1, seed ^ 4)?.remove(0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSpec {
    /// Range of the cost coefficients ($/kW² per slot).
    pub range: (f64, f64),
    pub rsd: f64,
    pub seed: u64,
}

/// Draw costs and assemble the training and test sets.
pub fn build_scenario_pair(
    errors: &ErrorSeries,
    wind_capacity: f64,
    costs: &CostSpec,
) -> Result<(ScenarioSet, ScenarioSet)> {
    let n = errors.customers();
    let draws = sample_cost_coeffs(
        n,
        costs.range,
        costs.rsd,
        errors.train_wind.len(),
        errors.test_wind.len(),
        costs.seed,
    )?;
    let train = assemble_scenarios(
        &errors.train_customers,
        &errors.train_wind,
        &draws.train,
        &draws.a_hat,
        &draws.a_tilde,
        wind_capacity,
    )?;
    let test = assemble_scenarios(
        &errors.test_customers,
        &errors.test_wind,
        &draws.test,
        &draws.a_hat,
        &draws.a_tilde,
        wind_capacity,
    )?;
    Ok((train, test))
}

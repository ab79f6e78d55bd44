//! Point predictors for load and renewable traces, and the prediction
//! error series built from them.

use crate::error::{Error, Result};

use super::trace::Trace;

/// Slots per day at five-minute resolution.
pub const SLOTS_PER_DAY: usize = 288;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    /// One constant: the mean of the fitting window.
    GlobalMean,
    /// Per slot-of-period mean, e.g. `period = 288` for a daily profile.
    PeriodicMean { period: usize },
}

impl Default for Predictor {
    fn default() -> Self {
        Predictor::PeriodicMean {
            period: SLOTS_PER_DAY,
        }
    }
}

impl Predictor {
    /// Minimum number of samples needed to fit.
    pub fn warm_up(&self) -> usize {
        match self {
            Predictor::GlobalMean => 1,
            Predictor::PeriodicMean { period } => *period,
        }
    }

    pub fn fit(&self, series: &[f64]) -> Result<FittedPredictor> {
        let needed = self.warm_up();
        if series.len() < needed || needed == 0 {
            return Err(Error::InsufficientData {
                needed: needed.max(1),
                got: series.len(),
            });
        }
        let profile = match *self {
            Predictor::GlobalMean => vec![series.iter().sum::<f64>() / series.len() as f64],
            Predictor::PeriodicMean { period } => {
                let mut sum = vec![0.0; period];
                let mut count = vec![0usize; period];
                for (t, v) in series.iter().enumerate() {
                    sum[t % period] += v;
                    count[t % period] += 1;
                }
                sum.iter().zip(&count).map(|(s, &n)| s / n as f64).collect()
            }
        };
        Ok(FittedPredictor { profile })
    }
}

/// A predictor fitted to a window. Slot `t` is predicted as
/// `profile[t % profile.len()]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPredictor {
    pub profile: Vec<f64>,
}

impl FittedPredictor {
    pub fn predict(&self, len: usize) -> Vec<f64> {
        (0..len).map(|t| self.profile[t % self.profile.len()]).collect()
    }

    /// Actual minus predicted for each slot of `series`.
    pub fn errors(&self, series: &[f64]) -> Vec<f64> {
        series
            .iter()
            .enumerate()
            .map(|(t, v)| v - self.profile[t % self.profile.len()])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionErrors {
    pub predicted: Vec<f64>,
    /// δ(t) = actual − predicted.
    pub errors: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl PredictionErrors {
    fn from_parts(predicted: Vec<f64>, errors: Vec<f64>) -> Self {
        let (lower, upper) = min_max(&errors);
        PredictionErrors {
            predicted,
            errors,
            lower,
            upper,
        }
    }
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Fit `predictor` on the whole trace and return its in-sample errors.
pub fn build_prediction_errors(trace: &Trace, predictor: Predictor) -> Result<PredictionErrors> {
    let fitted = predictor.fit(&trace.series)?;
    Ok(PredictionErrors::from_parts(
        fitted.predict(trace.len()),
        fitted.errors(&trace.series),
    ))
}

/// Fit on `train` and return errors of that fit applied to `test`.
pub fn out_of_sample_errors(train: &Trace, test: &Trace, predictor: Predictor) -> Result<PredictionErrors> {
    let fitted = predictor.fit(&train.series)?;
    Ok(PredictionErrors::from_parts(
        fitted.predict(test.len()),
        fitted.errors(&test.series),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trace_has_zero_error() {
        let t = Trace::new("c", 300, vec![5.0; 600]).unwrap();
        for p in [Predictor::GlobalMean, Predictor::default()] {
            let e = build_prediction_errors(&t, p).unwrap();
            assert!(e.errors.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn global_mean_alternating() {
        let t = Trace::new("x", 300, vec![4.0, 6.0, 4.0, 6.0]).unwrap();
        let e = build_prediction_errors(&t, Predictor::GlobalMean).unwrap();
        assert_eq!(e.errors, vec![-1.0, 1.0, -1.0, 1.0]);
        assert_eq!(e.predicted, vec![5.0; 4]);
        assert_eq!((e.lower, e.upper), (-1.0, 1.0));
    }

    #[test]
    fn periodic_mean_zero_per_slot() {
        let series: Vec<f64> = (0..2 * SLOTS_PER_DAY)
            .map(|t| {
                let phase = (t % SLOTS_PER_DAY) as f64 / SLOTS_PER_DAY as f64;
                2.0 + (phase * std::f64::consts::TAU).sin() + 0.37 * ((t * 7919) % 13) as f64
            })
            .collect();
        let t = Trace::new("s", 300, series).unwrap();
        let e = build_prediction_errors(&t, Predictor::default()).unwrap();
        for s in 0..SLOTS_PER_DAY {
            let m = (e.errors[s] + e.errors[s + SLOTS_PER_DAY]) / 2.0;
            assert!(m.abs() < 1e-12, "slot {s}: {m}");
        }
    }

    #[test]
    fn short_trace_rejected() {
        let t = Trace::new("s", 300, vec![1.0; 10]).unwrap();
        assert!(matches!(
            build_prediction_errors(&t, Predictor::default()),
            Err(Error::InsufficientData { needed: 288, got: 10 })
        ));
        let empty = Trace::new("e", 300, vec![]).unwrap();
        assert!(build_prediction_errors(&empty, Predictor::GlobalMean).is_err());
    }

    #[test]
    fn out_of_sample_uses_training_profile() {
        let train = Trace::new("a", 300, vec![1.0, 3.0]).unwrap();
        let test = Trace::new("a", 300, vec![4.0, 4.0, 0.0]).unwrap();
        let e = out_of_sample_errors(&train, &test, Predictor::GlobalMean).unwrap();
        assert_eq!(e.errors, vec![2.0, 2.0, -2.0]);
    }
}

//! Synthetic stand-ins for household load and wind traces.
//!
//! A home is a baseline plus a daily two-peak profile, AR(1) noise and
//! occasional appliance bursts. Wind is an hourly AR(1) process pushed
//! through a logistic curve and normalized so its maximum is 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

use super::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub homes: usize,
    pub days: usize,
    pub slot_seconds: u32,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            homes: 3,
            days: 42,
            slot_seconds: 300,
            seed: 1,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<usize> {
        if self.slot_seconds == 0 || 86_400 % self.slot_seconds != 0 {
            return Err(Error::InvalidArgument(format!(
                "slot length {}s must divide a day",
                self.slot_seconds
            )));
        }
        if self.days == 0 {
            return Err(Error::InvalidArgument("synthetic traces need at least one day".into()));
        }
        Ok((86_400 / self.slot_seconds) as usize)
    }
}

/// Per-home shape parameters, drawn once per home.
struct HomeShape {
    base: f64,
    morning: f64,
    evening: f64,
    noise_sd: f64,
    phi: f64,
    burst_rate: f64,
    burst_kw: f64,
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    let d = (hour - centre + 12.0).rem_euclid(24.0) - 12.0;
    (-0.5 * (d / width).powi(2)).exp()
}

pub fn synth_homes(spec: &SynthSpec) -> Result<Vec<Trace>> {
    let per_day = spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(10);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(spec.homes);
    for h in 0..spec.homes {
        let shape = HomeShape {
            base: rng.random_range(0.3..0.8),
            morning: rng.random_range(0.3..0.9),
            evening: rng.random_range(0.8..1.8),
            noise_sd: rng.random_range(0.08..0.2),
            phi: rng.random_range(0.85..0.95),
            burst_rate: rng.random_range(0.01..0.03),
            burst_kw: rng.random_range(1.0..3.0),
        };
        let len = spec.days * per_day;
        let mut series = Vec::with_capacity(len);
        let mut ar = 0.0;
        let mut burst_left = 0usize;
        let mut burst_level = 0.0;
        for t in 0..len {
            let hour = (t % per_day) as f64 * 24.0 / per_day as f64;
            let profile = shape.base + shape.morning * bump(hour, 7.5, 1.2) + shape.evening * bump(hour, 19.0, 2.0);
            ar = shape.phi * ar + shape.noise_sd * (1.0 - shape.phi * shape.phi).sqrt() * std.sample(&mut rng);
            if burst_left == 0 && rng.random::<f64>() < shape.burst_rate {
                burst_left = rng.random_range(2..10);
                burst_level = shape.burst_kw * rng.random_range(0.5..1.0);
            }
            let burst = if burst_left > 0 {
                burst_left -= 1;
                burst_level
            } else {
                0.0
            };
            series.push((profile + ar * (1.0 + profile) + burst).max(0.0));
        }
        out.push(Trace::new(format!("home_{}", (b'a' + (h % 26) as u8) as char), spec.slot_seconds, series)?);
    }
    Ok(out)
}

/// Normalized wind output in [0, 1], constant within each hour.
pub fn synth_wind(spec: &SynthSpec) -> Result<Trace> {
    let per_day = spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(11);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let hours = spec.days * 24;
    let phi: f64 = 0.93;
    let mut x = 0.0;
    let mut hourly = Vec::with_capacity(hours);
    for _ in 0..hours {
        x = phi * x + 1.2 * (1.0 - phi * phi).sqrt() * std.sample(&mut rng);
        hourly.push(1.0 / (1.0 + (-(x - 0.3) * 2.0).exp()));
    }
    let max = hourly.iter().cloned().fold(f64::MIN, f64::max);
    let slots_per_hour = (per_day / 24).max(1);
    let len = spec.days * per_day;
    let series = (0..len)
        .map(|t| hourly[(t / slots_per_hour).min(hours - 1)] / max)
        .collect();
    Trace::new("wind", spec.slot_seconds, series)
}

//! Block bootstrap of synthetic customers from a few base traces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::trace::Trace;

/// Resample `count_per_base` customers from each base trace, drawing whole
/// days with replacement. Output traces have the same length as their base.
pub fn bootstrap_customers(base_traces: &[Trace], count_per_base: usize, seed: u64) -> Result<Vec<Trace>> {
    let block = base_traces.first().map_or(1, Trace::slots_per_day);
    bootstrap_with_block(base_traces, count_per_base, block, seed)
}

pub fn bootstrap_with_block(
    base_traces: &[Trace],
    count_per_base: usize,
    block: usize,
    seed: u64,
) -> Result<Vec<Trace>> {
    if base_traces.is_empty() {
        return Err(Error::InvalidArgument("bootstrap needs at least one base trace".into()));
    }
    let series: Vec<&[f64]> = base_traces.iter().map(|t| t.series.as_slice()).collect();
    let resampled = bootstrap_series(&series, count_per_base, block, seed)?;
    Ok(resampled
        .into_iter()
        .enumerate()
        .map(|(j, series)| {
            let base = &base_traces[j / count_per_base];
            Trace {
                source_id: format!("{}#{}", base.source_id, j % count_per_base),
                resolution: base.resolution,
                start: base.start,
                series,
            }
        })
        .collect())
}

/// Block bootstrap of plain series (values may be negative). Output is
/// grouped by base: `count_per_base` resamples of the first, then the next.
pub fn bootstrap_series(bases: &[&[f64]], count_per_base: usize, block: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if bases.is_empty() {
        return Err(Error::InvalidArgument("bootstrap needs at least one base series".into()));
    }
    if count_per_base == 0 {
        return Err(Error::InvalidArgument("count_per_base must be at least 1".into()));
    }
    if block == 0 {
        return Err(Error::InvalidArgument("bootstrap block length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(bases.len() * count_per_base);
    for (b, base) in bases.iter().enumerate() {
        let len = base.len();
        if len == 0 {
            return Err(Error::InvalidArgument(format!("base series {b} is empty")));
        }
        let blocks = len.div_ceil(block);
        for _ in 0..count_per_base {
            let mut series = Vec::with_capacity(len);
            while series.len() < len {
                let lo = rng.random_range(0..blocks) * block;
                let hi = (lo + block).min(len).min(lo + len - series.len());
                series.extend_from_slice(&base[lo..hi]);
            }
            out.push(series);
        }
    }
    Ok(out)
}

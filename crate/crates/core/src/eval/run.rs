//! Running experiments: build the scenario sets once per (wind, rsd) pair,
//! fit every requested policy on training, evaluate on test.

use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flex::simulate_lin_plus;
use crate::lin::{negotiate, simulate_lin, solve_lin_centralized, DualPrices, LinearContract, NegotiationSummary};
use crate::model::LseCost;
use crate::outcome::{Outcome, PolicyTag};
use crate::planner::{simulate_opt, solve_opt, solve_seq};
use crate::pred::{simulate_pred, solve_pred};
use crate::scenario::{
    build_error_series, build_scenario_pair, read_traces, synth_homes, synth_wind, CostSpec, ErrorSeries, ScenarioSet,
    SplitSpec, SynthSpec, Trace,
};

use super::config::{ExperimentConfig, LinSolver};
use super::results::{capacity_price_per_slot, MetricRow};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub c_usd_per_kw_mo: f64,
    pub wind_kw: f64,
    pub rsd: f64,
}

/// The LIN contract fitted at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedContract {
    pub point: SweepPoint,
    pub contract: LinearContract,
    pub prices: Option<DualPrices>,
    pub summary: Option<NegotiationSummary>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    /// In sweep order; [`super::emit_results`] sorts them.
    pub rows: Vec<MetricRow>,
    pub contracts: Vec<FittedContract>,
}

impl ExperimentReport {
    /// Points where the negotiation stopped at max_iter.
    pub fn nonconverged(&self) -> Vec<SweepPoint> {
        self.contracts
            .iter()
            .filter(|c| c.summary.is_some_and(|s| !s.converged))
            .map(|c| c.point)
            .collect()
    }
}

fn load_traces(path: &Path) -> Result<Vec<Trace>> {
    let traces = read_traces(path)?;
    if traces.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(traces)
}

/// Prediction errors for the configured traces (synthetic when no trace
/// files are given).
pub fn prepare_errors(config: &ExperimentConfig) -> Result<ErrorSeries> {
    let synth = SynthSpec {
        homes: config.synth_homes,
        days: config.synth_days,
        slot_seconds: config.slot_seconds,
        seed: config.synth_seed(),
    };
    let homes = match &config.home_traces {
        Some(p) => load_traces(p)?,
        None => synth_homes(&synth)?,
    };
    let wind = match &config.wind_trace {
        Some(p) => load_traces(p)?.swap_remove(0),
        None => synth_wind(&synth)?,
    };
    let split = SplitSpec {
        customers_per_base: config.customers_per_base,
        seed: config.split_seed(),
        ..SplitSpec::default()
    };
    build_error_series(&homes, &wind, &split)
}

/// Training and test sets for one (wind, rsd) pair.
pub fn scenario_pair(errors: &ErrorSeries, config: &ExperimentConfig, wind_kw: f64, rsd: f64) -> Result<(ScenarioSet, ScenarioSet)> {
    let costs = CostSpec {
        range: (config.cost_min_usd_per_kw2, config.cost_max_usd_per_kw2),
        rsd,
        seed: config.cost_seed(),
    };
    build_scenario_pair(errors, wind_kw, &costs)
}

pub fn lse_cost(config: &ExperimentConfig, c_usd_per_kw_mo: f64) -> Result<LseCost> {
    LseCost::new(
        config.penalty_usd_per_kw2,
        capacity_price_per_slot(c_usd_per_kw_mo, config.slot_seconds),
    )
}

fn fit_lin(config: &ExperimentConfig, train: &ScenarioSet, cost: &LseCost, point: SweepPoint) -> Result<FittedContract> {
    Ok(match config.lin_solver {
        LinSolver::Centralized => FittedContract {
            point,
            contract: solve_lin_centralized(train, cost)?.contract,
            prices: None,
            summary: None,
        },
        LinSolver::Distributed => {
            let n = negotiate(train, cost, &config.negotiation_params())?;
            FittedContract {
                point,
                contract: n.contract,
                prices: Some(n.prices),
                summary: Some(n.summary),
            }
        }
    })
}

/// Every requested policy at one sweep point. All policies see the same
/// test set.
pub fn evaluate_point(
    config: &ExperimentConfig,
    train: &ScenarioSet,
    test: &ScenarioSet,
    point: SweepPoint,
) -> Result<(Vec<MetricRow>, Option<FittedContract>)> {
    let cost = lse_cost(config, point.c_usd_per_kw_mo)?;
    let row = |o: &Outcome, rho: f64| {
        MetricRow::from_outcome(o, point.c_usd_per_kw_mo, point.wind_kw, point.rsd, rho, config.slot_seconds)
    };
    let wants = |p: PolicyTag| config.policies.contains(&p);
    let mut rows = Vec::new();
    if wants(PolicyTag::Opt) {
        let plan = solve_opt(test, &cost)?;
        rows.push(row(&simulate_opt(test, &cost, plan.kappa), 1.0));
    }
    if wants(PolicyTag::Seq) {
        let (_, rule) = solve_seq(train, &cost)?;
        rows.push(row(&simulate_pred(&rule, test, &cost, PolicyTag::Seq), 1.0));
    }
    if wants(PolicyTag::Pred) {
        let (_, rule) = solve_pred(train, &cost)?;
        rows.push(row(&simulate_pred(&rule, test, &cost, PolicyTag::Pred), 1.0));
    }
    let mut fitted = None;
    if wants(PolicyTag::Lin) || wants(PolicyTag::LinPlus) {
        let f = fit_lin(config, train, &cost, point)?;
        if wants(PolicyTag::Lin) {
            rows.push(row(&simulate_lin(&f.contract, test, &cost)?, 1.0));
        }
        if wants(PolicyTag::LinPlus) {
            for &rho in &config.rho {
                let params = config.flex_params(rho)?;
                let r = simulate_lin_plus(&f.contract, &params, test, &cost, Some(train))?;
                rows.push(row(&r.outcome, rho));
            }
        }
        fitted = Some(f);
    }
    if let Some(bad) = rows.iter().find(|r| !r.is_sane()) {
        return Err(Error::Numerical(format!("non-finite or negative metric in {bad:?}")));
    }
    Ok((rows, fitted))
}

fn map_points<T, R>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R>
where
    T: Sync,
    R: Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// All sweep points of `config`, results in (wind, rsd, c) order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let errors = prepare_errors(config)?;
    run_on_errors(config, &errors)
}

/// Like [`run_experiment`] with sweep points spread over `workers` threads.
pub fn run_experiment_with_workers(config: &ExperimentConfig, workers: usize) -> Result<ExperimentReport> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))?;
        pool.install(|| run_experiment(config))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        run_experiment(config)
    }
}

pub fn run_on_errors(config: &ExperimentConfig, errors: &ErrorSeries) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::default();
    for &wind_kw in &config.wind_capacity_kw {
        for &rsd in &config.cost_rsd {
            let (train, test) = scenario_pair(errors, config, wind_kw, rsd)?;
            let points: Vec<SweepPoint> = config
                .capacity_price_usd_per_kw_mo
                .iter()
                .map(|&c| SweepPoint {
                    c_usd_per_kw_mo: c,
                    wind_kw,
                    rsd,
                })
                .collect();
            for result in map_points(&points, |&p| evaluate_point(config, &train, &test, p)) {
                let (rows, fitted) = result?;
                report.rows.extend(rows);
                report.contracts.extend(fitted);
            }
        }
    }
    Ok(report)
}

/// The four standard sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Figure {
    /// c ∈ {0.01, 0.1, 1, 10, 50} $/kW-mo at 100 kW wind, rsd 0.15.
    CapacityPrice,
    /// Wind ∈ {0, 50, 100, 200} kW at c = 1, rsd 0.15.
    Wind,
    /// rsd ∈ {0, 0.15, 0.3} at c = 10, 100 kW wind.
    Rsd,
    /// LIN⁺ over the configured ρ grid at c = 10, rsd 0.3, 100 kW wind.
    Rho,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::CapacityPrice, Figure::Wind, Figure::Rsd, Figure::Rho];

    pub fn name(self) -> &'static str {
        match self {
            Figure::CapacityPrice => "capacity_price",
            Figure::Wind => "wind",
            Figure::Rsd => "rsd",
            Figure::Rho => "rho",
        }
    }

    pub fn parse(s: &str) -> Result<Figure> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown sweep `{s}` (expected capacity_price, wind, rsd or rho)")))
    }

    /// `base` with this sweep's axes filled in.
    pub fn config(self, base: &ExperimentConfig) -> ExperimentConfig {
        use PolicyTag::*;
        let mut c = base.clone();
        let (prices, wind, rsd, policies): (&[f64], &[f64], &[f64], &[PolicyTag]) = match self {
            Figure::CapacityPrice => (&[0.01, 0.1, 1.0, 10.0, 50.0], &[100.0], &[0.15], &[Opt, Seq, Pred, Lin]),
            Figure::Wind => (&[1.0], &[0.0, 50.0, 100.0, 200.0], &[0.15], &[Opt, Seq, Pred, Lin]),
            Figure::Rsd => (&[10.0], &[100.0], &[0.0, 0.15, 0.3], &[Opt, Seq, Pred, Lin]),
            Figure::Rho => (&[10.0], &[100.0], &[0.3], &[Opt, Lin, LinPlus]),
        };
        c.capacity_price_usd_per_kw_mo = prices.to_vec();
        c.wind_capacity_kw = wind.to_vec();
        c.cost_rsd = rsd.to_vec();
        c.policies = policies.to_vec();
        c
    }
}

/// Run each figure's sweep on shared prediction errors.
pub fn run_figures(base: &ExperimentConfig, figures: &[Figure]) -> Result<Vec<(Figure, ExperimentReport)>> {
    base.validate()?;
    let errors = prepare_errors(base)?;
    figures
        .iter()
        .map(|&f| {
            let config = f.config(base);
            config.validate()?;
            Ok((f, run_on_errors(&config, &errors)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            synth_homes: 2,
            synth_days: 6,
            customers_per_base: 3,
            capacity_price_usd_per_kw_mo: vec![1.0, 10.0],
            wind_capacity_kw: vec![10.0],
            policies: PolicyTag::ALL.to_vec(),
            rho: vec![0.5, 1.0],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn one_row_per_policy_and_point() {
        let report = run_experiment(&small()).unwrap();
        // opt, seq, pred, lin and two lin-plus rows at each of two prices
        assert_eq!(report.rows.len(), 12);
        assert_eq!(report.contracts.len(), 2);
        assert!(report.rows.iter().all(|r| r.is_sane()));
        let at = |p: PolicyTag, c: f64, rho: f64| {
            report
                .rows
                .iter()
                .find(|r| r.policy == p && r.c_usd_per_kw_mo == c && r.rho == rho)
                .unwrap()
        };
        for c in [1.0, 10.0] {
            let opt = at(PolicyTag::Opt, c, 1.0).social_cost_usd_yr;
            for p in [PolicyTag::Seq, PolicyTag::Pred, PolicyTag::Lin] {
                assert!(at(p, c, 1.0).social_cost_usd_yr >= opt * (1.0 - 1e-9));
            }
            assert_eq!(at(PolicyTag::Seq, c, 1.0).exceedance_rate, 0.0);
            let (lin, plus) = (at(PolicyTag::Lin, c, 1.0), at(PolicyTag::LinPlus, c, 1.0));
            assert_eq!(lin.social_cost_usd_yr, plus.social_cost_usd_yr);
            assert_eq!(lin.leftover_norm, plus.leftover_norm);
        }
    }

    #[test]
    fn single_policy_single_point() {
        let config = ExperimentConfig {
            capacity_price_usd_per_kw_mo: vec![1.0],
            policies: vec![PolicyTag::Opt],
            ..small()
        };
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.contracts.is_empty());
    }

    #[test]
    fn workers_do_not_change_results() {
        let config = ExperimentConfig {
            policies: vec![PolicyTag::Opt, PolicyTag::Pred],
            cost_rsd: vec![0.0, 0.3],
            ..small()
        };
        let a = run_experiment_with_workers(&config, 1).unwrap();
        let b = run_experiment_with_workers(&config, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distributed_solver_reports_its_summary() {
        let config = ExperimentConfig {
            capacity_price_usd_per_kw_mo: vec![10.0],
            policies: vec![PolicyTag::Lin],
            lin_solver: LinSolver::Distributed,
            negotiation_max_iter: 3,
            ..small()
        };
        let report = run_experiment(&config).unwrap();
        let s = report.contracts[0].summary.unwrap();
        assert_eq!(s.iterations, 3);
        assert_eq!(report.nonconverged().len(), 1);
    }

    #[test]
    fn figure_configs() {
        let base = ExperimentConfig::default();
        assert_eq!(Figure::Wind.config(&base).wind_capacity_kw, vec![0.0, 50.0, 100.0, 200.0]);
        assert!(Figure::Rho.config(&base).policies.contains(&PolicyTag::LinPlus));
        for f in Figure::ALL {
            assert_eq!(Figure::parse(f.name()).unwrap(), f);
            f.config(&base).validate().unwrap();
        }
        assert!(Figure::parse("heat").is_err());
    }
}

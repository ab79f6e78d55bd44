//! Result rows, unit conversions and the CSV files they are written to.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcome::{Outcome, PolicyTag};

/// Seconds in a Julian year.
pub const SECONDS_PER_YEAR: f64 = 31_557_600.0;

/// Days in the billing month used to amortize capacity prices.
pub const DAYS_PER_MONTH: f64 = 30.0;

pub const RESULTS_HEADER: &str =
    "policy,c_usd_per_kw_mo,wind_kw,rsd,rho,social_cost_usd_yr,kappa_kw,dr_norm,leftover_norm,exceedance_rate";

/// Scale a per-slot cost to a year of slots.
pub fn annualize(cost_per_slot: f64, slot_seconds: u32) -> f64 {
    assert!(slot_seconds > 0, "slot length must be positive");
    cost_per_slot * (SECONDS_PER_YEAR / slot_seconds as f64)
}

/// $/kW-month to $/kW per slot.
pub fn capacity_price_per_slot(usd_per_kw_mo: f64, slot_seconds: u32) -> f64 {
    let slots_per_day = 86_400.0 / slot_seconds as f64;
    usd_per_kw_mo / (DAYS_PER_MONTH * slots_per_day)
}

/// One policy at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub policy: PolicyTag,
    pub c_usd_per_kw_mo: f64,
    pub wind_kw: f64,
    pub rsd: f64,
    /// Commitment level; 1 for every policy but lin-plus.
    pub rho: f64,
    pub social_cost_usd_yr: f64,
    pub kappa_kw: f64,
    pub dr_norm: f64,
    pub leftover_norm: f64,
    pub exceedance_rate: f64,
}

impl MetricRow {
    pub fn from_outcome(outcome: &Outcome, c_usd_per_kw_mo: f64, wind_kw: f64, rsd: f64, rho: f64, slot_seconds: u32) -> Self {
        MetricRow {
            policy: outcome.policy,
            c_usd_per_kw_mo,
            wind_kw,
            rsd,
            rho,
            social_cost_usd_yr: annualize(outcome.social_cost(), slot_seconds),
            kappa_kw: outcome.kappa,
            dr_norm: outcome.dr_norm(),
            leftover_norm: outcome.leftover_norm(),
            exceedance_rate: outcome.exceedance_rate(),
        }
    }

    fn sort_key(&self) -> (PolicyTag, [f64; 4]) {
        (self.policy, [self.c_usd_per_kw_mo, self.wind_kw, self.rsd, self.rho])
    }

    fn metrics(&self) -> [f64; 5] {
        [
            self.social_cost_usd_yr,
            self.kappa_kw,
            self.dr_norm,
            self.leftover_norm,
            self.exceedance_rate,
        ]
    }

    /// All metrics finite and non-negative.
    pub fn is_sane(&self) -> bool {
        self.metrics().iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Sort by policy, then capacity price, wind, rsd and ρ.
pub fn sort_rows(rows: &mut [MetricRow]) {
    rows.sort_by(|a, b| {
        let (pa, ka) = a.sort_key();
        let (pb, kb) = b.sort_key();
        pa.cmp(&pb).then_with(|| {
            ka.iter()
                .zip(&kb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
}

/// `x` rounded to 9 significant digits, printed in its shortest form.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    rounded.to_string()
}

pub fn write_results(rows: &[MetricRow], mut out: impl Write, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    writeln!(out, "{RESULTS_HEADER}").map_err(io)?;
    for r in &sorted {
        let nums = [r.c_usd_per_kw_mo, r.wind_kw, r.rsd, r.rho]
            .into_iter()
            .chain(r.metrics())
            .map(format_sig)
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{},{nums}", r.policy).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Write `rows` sorted to `path`, creating parent directories.
pub fn emit_results(rows: &[MetricRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_results(rows, BufWriter::new(file), path)
}

pub fn read_results(path: &Path) -> Result<Vec<MetricRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Social cost of each policy side by side, per sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub policies: Vec<PolicyTag>,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub c_usd_per_kw_mo: f64,
    pub wind_kw: f64,
    pub rsd: f64,
    pub rho: f64,
    /// Indexed like `Comparison::policies`.
    pub social_cost_usd_yr: Vec<Option<f64>>,
}

impl ComparisonRow {
    /// cost / OPT's cost − 1 for policy column `k`.
    pub fn gap(&self, policies: &[PolicyTag], k: usize) -> Option<f64> {
        let opt = policies.iter().position(|p| *p == PolicyTag::Opt)?;
        Some(self.social_cost_usd_yr[k]? / self.social_cost_usd_yr[opt]? - 1.0)
    }
}

type Point = [u64; 3];

fn point_key(r: &MetricRow) -> Point {
    [r.c_usd_per_kw_mo.to_bits(), r.wind_kw.to_bits(), r.rsd.to_bits()]
}

/// Join rows from one or more result files on (c, wind, rsd, ρ). A policy
/// reported only at ρ = 1 for a point is repeated on that point's other ρ.
pub fn compare(rows: &[MetricRow]) -> Comparison {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    let mut policies: Vec<PolicyTag> = rows.iter().map(|r| r.policy).collect();
    policies.dedup();
    let mut points: BTreeMap<Point, Vec<&MetricRow>> = BTreeMap::new();
    for r in &rows {
        points.entry(point_key(r)).or_default().push(r);
    }
    let mut out = Vec::new();
    for group in points.values() {
        let mut rhos: Vec<f64> = group.iter().map(|r| r.rho).collect();
        rhos.sort_by(f64::total_cmp);
        rhos.dedup();
        for &rho in &rhos {
            let costs = policies
                .iter()
                .map(|&p| {
                    let mine: Vec<&&MetricRow> = group.iter().filter(|r| r.policy == p).collect();
                    mine.iter()
                        .find(|r| r.rho == rho)
                        .or_else(|| (mine.len() == 1 && mine[0].rho == 1.0).then(|| &mine[0]))
                        .map(|r| r.social_cost_usd_yr)
                })
                .collect();
            let first = group[0];
            out.push(ComparisonRow {
                c_usd_per_kw_mo: first.c_usd_per_kw_mo,
                wind_kw: first.wind_kw,
                rsd: first.rsd,
                rho,
                social_cost_usd_yr: costs,
            });
        }
    }
    Comparison { policies, rows: out }
}

impl Comparison {
    /// Columns: the four coordinates, `<policy>_usd_yr` per policy, then
    /// `<policy>_gap_vs_opt` per non-OPT policy when OPT is present.
    pub fn write_csv(&self, mut out: impl Write, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let has_opt = self.policies.contains(&PolicyTag::Opt);
        let gap_cols: Vec<usize> = if has_opt {
            (0..self.policies.len()).filter(|&k| self.policies[k] != PolicyTag::Opt).collect()
        } else {
            Vec::new()
        };
        let mut header = vec!["c_usd_per_kw_mo".to_string(), "wind_kw".into(), "rsd".into(), "rho".into()];
        header.extend(self.policies.iter().map(|p| format!("{p}_usd_yr")));
        header.extend(gap_cols.iter().map(|&k| format!("{}_gap_vs_opt", self.policies[k])));
        writeln!(out, "{}", header.join(",")).map_err(io)?;
        let cell = |v: Option<f64>| v.map(format_sig).unwrap_or_default();
        for r in &self.rows {
            let mut fields: Vec<String> = [r.c_usd_per_kw_mo, r.wind_kw, r.rsd, r.rho].into_iter().map(format_sig).collect();
            fields.extend(r.social_cost_usd_yr.iter().map(|v| cell(*v)));
            fields.extend(gap_cols.iter().map(|&k| cell(r.gap(&self.policies, k))));
            writeln!(out, "{}", fields.join(",")).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(policy: PolicyTag, c: f64, rho: f64, cost: f64) -> MetricRow {
        MetricRow {
            policy,
            c_usd_per_kw_mo: c,
            wind_kw: 100.0,
            rsd: 0.15,
            rho,
            social_cost_usd_yr: cost,
            kappa_kw: 10.0,
            dr_norm: 0.5,
            leftover_norm: 0.0,
            exceedance_rate: 0.0,
        }
    }

    #[test]
    fn annualize_examples() {
        assert!((annualize(1.0, 300) - 105_192.0).abs() < 1e-9);
        assert_eq!(annualize(0.0, 300), 0.0);
        assert!((annualize(0.5, 600) - 26_298.0).abs() < 1e-9);
    }

    #[test]
    fn capacity_price_conversion() {
        assert!((capacity_price_per_slot(8640.0, 300) - 1.0).abs() < 1e-12);
        assert!((capacity_price_per_slot(8640.0, 600) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig(0.1 + 0.2), "0.3");
        assert_eq!(format_sig(123_456.789_123_4), "123456.789");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig(-2.5e-7), "-0.00000025");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn empty_rows_give_header_only() {
        let mut buf = Vec::new();
        write_results(&[], &mut buf, Path::new("mem")).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{RESULTS_HEADER}\n"));
    }

    #[test]
    fn rows_are_sorted_and_read_back() {
        let rows = vec![
            row(PolicyTag::Lin, 10.0, 1.0, 3.0),
            row(PolicyTag::Opt, 10.0, 1.0, 2.0),
            row(PolicyTag::Opt, 0.1, 1.0, 1.0),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/results.csv");
        emit_results(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "opt,0.1,100,0.15,1,1,10,0.5,0,0");
        assert!(lines[3].starts_with("lin,10,"));
        let back = read_results(&path).unwrap();
        assert_eq!(back[0], rows[2]);
        assert_eq!(back.len(), 3);
    }

    #[test]
    fn bad_result_file_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, format!("{RESULTS_HEADER}\nopt,1,1,1,1,1,1,1,1,1\nnope,1,1,1,1,1,1,1,1,1\n")).unwrap();
        match read_results(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn comparison_joins_and_broadcasts() {
        let rows = vec![
            row(PolicyTag::Opt, 10.0, 1.0, 100.0),
            row(PolicyTag::Lin, 10.0, 1.0, 110.0),
            row(PolicyTag::LinPlus, 10.0, 1.0, 110.0),
            row(PolicyTag::LinPlus, 10.0, 0.5, 105.0),
        ];
        let cmp = compare(&rows);
        assert_eq!(cmp.policies, vec![PolicyTag::Opt, PolicyTag::Lin, PolicyTag::LinPlus]);
        assert_eq!(cmp.rows.len(), 2);
        let half = &cmp.rows[0];
        assert_eq!(half.rho, 0.5);
        assert_eq!(half.social_cost_usd_yr, vec![Some(100.0), Some(110.0), Some(105.0)]);
        assert!((half.gap(&cmp.policies, 2).unwrap() - 0.05).abs() < 1e-12);
        let mut buf = Vec::new();
        cmp.write_csv(&mut buf, Path::new("mem")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "c_usd_per_kw_mo,wind_kw,rsd,rho,opt_usd_yr,lin_usd_yr,lin-plus_usd_yr,lin_gap_vs_opt,lin-plus_gap_vs_opt\n"
        ));
        assert!(text.contains("\n10,100,0.15,0.5,100,110,105,0.1,0.05\n"));
    }
}

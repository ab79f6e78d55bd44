use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
synth_homes = 2
synth_days = 6
customers_per_base = 3
capacity_price_usd_per_kw_mo = [1, 10]
wind_capacity_kw = [10]
"#;

fn flexdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flexdr")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn run_writes_results_and_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = flexdr(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "policy,c_usd_per_kw_mo,wind_kw,rsd,rho,social_cost_usd_yr,kappa_kw,dr_norm,leftover_norm,exceedance_rate"
    );
    // four policies at two prices
    assert_eq!(lines.len(), 9);
    assert!(lines[1].starts_with("opt,1,10,0.15,1,"));
    let contract = fs::read_to_string(out.join("lin_contract_c10_wind10_rsd0.15.csv")).unwrap();
    assert!(contract.starts_with("#kappa_kw="));
    assert_eq!(contract.lines().count(), 2 + 6);
}

#[test]
fn same_seed_same_bytes_other_seed_differs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = flexdr(&["run", "--config", &cfg, "--seed", seed, "--policies", "opt,pred", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        fs::read(out.join("results.csv")).unwrap()
    };
    let a = run("a", "5");
    assert_eq!(a, run("b", "5"));
    assert_ne!(a, run("c", "6"));
}

#[test]
fn sweep_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}rho = [0.5, 1.0]\n"));
    let out = dir.path().join("sweeps");
    let o = flexdr(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--only", "rsd,rho"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("rsd.csv").exists() && out.join("rho.csv").exists());
    assert!(!out.join("wind.csv").exists());
    let rho = fs::read_to_string(out.join("rho.csv")).unwrap();
    assert!(rho.lines().any(|l| l.starts_with("lin-plus,10,100,0.3,0.5,")));

    let table = dir.path().join("cmp.csv");
    let o = flexdr(&[
        "compare",
        out.join("rsd.csv").to_str().unwrap(),
        out.join("rho.csv").to_str().unwrap(),
        "--out",
        table.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(table).unwrap();
    assert!(text.starts_with("c_usd_per_kw_mo,wind_kw,rsd,rho,opt_usd_yr,seq_usd_yr,pred_usd_yr,lin_usd_yr,lin-plus_usd_yr,"));
    // rsd 0, 0.15, 0.3 at ρ = 1 plus the ρ = 0.5 row
    assert_eq!(text.lines().count(), 1 + 4);

    let o = flexdr(&["compare", out.join("rsd.csv").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("c_usd_per_kw_mo,"));
}

#[test]
fn gen_writes_scenarios_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("gen");
    let o = flexdr(&["gen", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["homes.csv", "wind.csv", "train_scenarios.csv", "test_scenarios.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    // 2 of 6 days, 288 slots each, with six customer rows and one system
    // row per slot, plus a header
    let test = fs::read_to_string(out.join("test_scenarios.csv")).unwrap();
    assert_eq!(test.lines().count(), 2 * 288 * 7 + 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // malformed config
    let bad = write_config(dir.path(), "seed = \"x\"\n");
    let o = flexdr(&["run", "--config", &bad]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("exp.toml:1"));
    // invalid value
    let cfg = write_config(dir.path(), "cost_rsd = []\n");
    assert_eq!(code(&flexdr(&["run", "--config", &cfg])), 2);
    assert_eq!(code(&flexdr(&["run", "--policies", "best"])), 2);
    // unreadable trace
    let missing = dir.path().join("missing.csv");
    let cfg = write_config(dir.path(), &format!("home_traces = {:?}\n", missing.to_str().unwrap()));
    let o = flexdr(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&flexdr(&["compare", missing.to_str().unwrap()])), 3);
    // negotiation cut short
    let cfg = write_config(
        dir.path(),
        &format!("{SMALL}policies = [\"lin\"]\nlin_solver = \"distributed\"\nnegotiation_max_iter = 2\n"),
    );
    let o = flexdr(&["run", "--config", &cfg, "--out", dir.path().join("neg").to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("neg/results.csv").exists());
}

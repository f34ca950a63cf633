use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use secure_isac::experiment::PersistedPlan;
use secure_isac::{default_scenario, ScenarioConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_secure-isac"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_scenario(dir: &Path, edit: impl FnOnce(&mut ScenarioConfig)) -> String {
    let mut c = default_scenario();
    edit(&mut c);
    let p = dir.join("scenario.json");
    c.save(&p).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_artifacts_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = write_scenario(tmp.path(), |_| {});
    let outs = ["a", "b"].map(|d| tmp.path().join(d));
    for out in &outs {
        let o = run(&["run", "--scenario", &scen, "--scheme", "scs_proposed", "--seed", "3", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        for f in ["trajectory.csv", "rates.csv", "sensing.csv", "summary.json"] {
            assert!(out.join(f).exists(), "{f} missing");
        }
    }
    for f in ["trajectory.csv", "rates.csv", "sensing.csv", "plan.json"] {
        assert_eq!(fs::read(outs[0].join(f)).unwrap(), fs::read(outs[1].join(f)).unwrap(), "{f} differs");
    }

    let s = summary(&outs[0]);
    let scheme = &s["schemes"][0];
    assert!(scheme["asr"].as_f64().unwrap() >= 0.0);
    let history: Vec<f64> = scheme["bcd_history"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(!history.is_empty());
    assert!(history.windows(2).all(|w| w[1] >= w[0] - 1e-7));
    assert_eq!(s["config"]["n_slots"], 20);
    assert!(s["schemes"][0]["solver_stats"]["solves"].as_u64().unwrap() > 0);

    let trajectory = read_csv(&outs[0].join("trajectory.csv"));
    assert_eq!(trajectory.len(), 2 * 21);
    let sensing = read_csv(&outs[0].join("sensing.csv"));
    assert_eq!(sensing.len(), 8);
    assert!(sensing.iter().all(|r| r[4] == "true"));

    // Every rate row re-derives from the persisted plan.
    let plan: PersistedPlan = serde_json::from_str(&fs::read_to_string(outs[0].join("plan.json")).unwrap()).unwrap();
    let report = plan.evaluate(&default_scenario()).unwrap();
    let rates = read_csv(&outs[0].join("rates.csv"));
    assert_eq!(rates.len(), 20);
    for (row, m) in rates.iter().zip(&report.slots) {
        assert_eq!(row[1], m.label.phase());
        let cols: Vec<f64> = row[2..].iter().map(|x| x.parse().unwrap()).collect();
        for (got, want) in cols.iter().zip([m.sinr_bob, m.sinr_eve, m.secrecy_rate]) {
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
        }
    }
}

#[test]
fn missing_scenario_exits_one() {
    let o = run(&["run", "--scenario", "/nonexistent/scenario.json", "--out", "/tmp/unused"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn unknown_config_key_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.json");
    let mut v: serde_json::Value = serde_json::from_str(&default_scenario().to_json().unwrap()).unwrap();
    v["noise_powr_bob"] = serde_json::json!(1e-11);
    fs::write(&p, v.to_string()).unwrap();
    let o = run(&["validate", "--scenario", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unattainable_threshold_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = write_scenario(tmp.path(), |c| c.beampattern_threshold = 1.0);
    let out = tmp.path().join("out");
    let o = run(&["run", "--scenario", &scen, "--scheme", "fhf_beamforming", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["status"], "infeasible");
    let g = s["schemes"][0]["max_attainable_gain"].as_f64().unwrap();
    assert!(g > 0.0 && g < 1.0);
}

#[test]
fn all_schemes_get_subdirectories() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = write_scenario(tmp.path(), |c| c.algo.max_outer_iters = 2);
    let out = tmp.path().join("all");
    let o = run(&["run", "--scenario", &scen, "--all-schemes", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for s in ["scs_proposed", "fhf", "fhf_beamforming", "single_uav"] {
        assert!(out.join(s).join("rates.csv").exists());
        assert!(summary(&out)["asr"][s].as_f64().is_some());
    }
}

#[test]
fn sweep_rows_and_empty_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("empty");
    let o = run(&["sweep", "--sweep-param", "p_max_jack", "--sweep-values", "", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.trim(), "scheme,parameter,value,asr,sum_secrecy,min_beampattern_gain,outer_iters,wall_seconds,status");

    let bodies: Vec<Vec<Vec<String>>> = ["j1", "j2"]
        .iter()
        .zip(["1", "2"])
        .map(|(d, jobs)| {
            let out = tmp.path().join(d);
            let o = run(&[
                "sweep", "--scheme", "fhf", "--sweep-param", "residual_bob", "--sweep-values", "1e-4,1e-2,1,-1",
                "--jobs", jobs, "--seed", "5", "--out", out.to_str().unwrap(),
            ]);
            assert!(o.status.success());
            read_csv(&out.join("sweep.csv"))
                .into_iter()
                .map(|mut r| {
                    r.remove(7); // wall_seconds
                    r
                })
                .collect()
        })
        .collect();
    assert_eq!(bodies[0], bodies[1]);
    let rows = &bodies[0];
    assert_eq!(rows.len(), 4);
    assert!(rows[..3].iter().all(|r| r[7] == "ok"));
    assert!(rows[3][7].starts_with("error"), "negative residual is rejected per row");
    let asr: Vec<f64> = rows[..3].iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(asr.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn validate_reports_properties() {
    let o = run(&["validate"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("PASS ")));

    let tmp = tempfile::tempdir().unwrap();
    let scen = write_scenario(tmp.path(), |c| c.noise_power_eve = -1e-11);
    let o = run(&["validate", "--scenario", &scen]);
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL config.noise_power_eve"));

    let scen = write_scenario(tmp.path(), |c| c.n_antennas = 1);
    let o = run(&["validate", "--scenario", &scen]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn defaults_round_trip() {
    let o = run(&["defaults"]);
    assert!(o.status.success());
    let c = ScenarioConfig::from_json(&String::from_utf8_lossy(&o.stdout)).unwrap();
    assert_eq!(c, default_scenario());
}

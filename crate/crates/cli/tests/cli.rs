use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

/// Small grids so most runs finish quickly.
const FAST: &str = r#"{
    "epsilons": [0.0, 0.01, 0.02, 0.04, 0.08],
    "phase_points": 73,
    "u_points": 11,
    "steps": 4000,
    "gamma_tau_values": [0.0, 0.5, 1.0],
    "shots": {"n_br": 2000, "repetitions": 20, "r_values": [1.0, 3.0]}
}"#;

fn kdsta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdsta")).args(args).output().expect("binary runs")
}

fn fast_config(dir: &Path) -> PathBuf {
    let path = dir.join("fast.json");
    fs::write(&path, FAST).unwrap();
    path
}

fn run_ok(args: &[&str]) {
    let out = kdsta(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: PathBuf) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn csv_rows(path: PathBuf) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(kdsta(&["--help"]).status.code(), Some(0));
    assert_eq!(kdsta(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(kdsta(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(kdsta(&["shots", "--bogus"]).status.code(), Some(1));
    assert_eq!(kdsta(&["shots", "--seed", "minus-one"]).status.code(), Some(1));
    assert_eq!(kdsta(&[]).status.code(), Some(1));

    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"stepz": 10}"#).unwrap();
    let r = kdsta(&["qubit-sweep", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("stepz"));

    fs::write(&bad, r#"{"epsilons": [0.1, 0.01]}"#).unwrap();
    assert_eq!(kdsta(&["qubit-sweep", "--config", s(&bad), "--out", s(&out)]).status.code(), Some(1));
    fs::write(&bad, "not json").unwrap();
    assert_eq!(kdsta(&["qubit-sweep", "--config", s(&bad), "--out", s(&out)]).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(kdsta(&["qubit-sweep", "--config", s(&missing), "--out", s(&out)]).status.code(), Some(1));
    assert_eq!(kdsta(&["shots", "--steps", "0", "--out", s(&out)]).status.code(), Some(1));
    assert!(!out.exists(), "failed runs must not write artifacts");
}

#[test]
fn unconverged_fock_truncation_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = fast_config(dir.path());
    let out = dir.path().join("out");
    let r = kdsta(&["oscillator-sweep", "--config", s(&cfg), "--dim", "4", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).contains("numerical quality"));
    assert!(!out.exists());
}

#[test]
fn default_oscillator_sweep_reproduces_scaling() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("a");
    run_ok(&["oscillator-sweep", "--out", s(&out), "--svg"]);
    let slopes = json(out.join("oscillator_slopes.json"));
    let s_coh = slopes["s_coh"]["fit"]["slope"].as_f64().unwrap();
    let s_pop = slopes["s_pop"]["fit"]["slope"].as_f64().unwrap();
    assert!((0.95..=1.05).contains(&s_coh), "s_coh = {s_coh}");
    assert!((1.95..=2.05).contains(&s_pop), "s_pop = {s_pop}");
    assert!(slopes["oracle"]["max_difference"].as_f64().unwrap() < 1e-6);
    assert_eq!(slopes["config"]["dim"], 40);
    assert!(fs::read_to_string(out.join("oscillator_scaling.svg")).unwrap().starts_with("<svg"));

    // Only the Δn = ±2 bands respond.
    let (header, rows) = csv_rows(out.join("oscillator_sweep.csv"));
    for row in &rows {
        for dn in [-4, -3, -1, 0, 1, 3, 4] {
            let v: f64 = row[column(&header, &format!("band_{dn:+} [1]"))].parse().unwrap();
            assert!(v < 1e-7);
        }
        let v: f64 = row[column(&header, "band_+2 [1]")].parse().unwrap();
        assert!(v > 1e-3);
    }

    // Rerunning from the manifest gives identical bytes.
    let again = dir.path().join("b");
    run_ok(&["oscillator-sweep", "--config", s(&out.join("manifest.json")), "--out", s(&again)]);
    for name in ["oscillator_heatmap.csv", "oscillator_sweep.csv", "oscillator_slopes.json", "oscillator_fingerprints.json"] {
        let a = fs::read(out.join(name)).unwrap();
        let b = fs::read(again.join(name)).unwrap();
        if name.ends_with(".json") {
            // Only the output directory differs.
            let (mut a, mut b): (Value, Value) = (serde_json::from_slice(&a).unwrap(), serde_json::from_slice(&b).unwrap());
            a["config"]["out"] = Value::Null;
            b["config"]["out"] = Value::Null;
            assert_eq!(a, b, "{name}");
        } else {
            assert_eq!(a, b, "{name}");
        }
    }
}

#[test]
fn zero_amplitude_rows_are_floor() {
    let dir = TempDir::new().unwrap();
    let cfg = fast_config(dir.path());
    let out = dir.path().join("out");
    run_ok(&["oscillator-sweep", "--config", s(&cfg), "--out", s(&out)]);
    run_ok(&["qubit-sweep", "--config", s(&cfg), "--out", s(&out)]);
    for (file, flags) in [
        ("oscillator_sweep.csv", &["coherent_flag", "population_flag"][..]),
        ("qubit_sweep.csv", &["coherent_flag", "population_flag", "d_kd_flag", "n_mh_flag"][..]),
    ] {
        let (header, rows) = csv_rows(out.join(file));
        assert_eq!(rows.len(), 5);
        for f in flags {
            let c = column(&header, f);
            assert_eq!(rows[0][c], "floor", "{file} {f}");
            assert!(rows[1..].iter().all(|r| r[c] == "fit"), "{file} {f}");
        }
    }
    // Both manifests list what the last run wrote.
    let manifest = json(out.join("manifest.json"));
    assert_eq!(manifest["command"], "qubit-sweep");
    assert_eq!(manifest["config"]["steps"], 4000);
    assert!(manifest["files"].as_array().unwrap().iter().any(|f| f == "qubit_sweep.csv"));
}

#[test]
fn csv_headers_carry_units() {
    let dir = TempDir::new().unwrap();
    let cfg = fast_config(dir.path());
    let out = dir.path().join("out");
    run_ok(&["oscillator-sweep", "--config", s(&cfg), "--out", s(&out)]);
    run_ok(&["qubit-sweep", "--config", s(&cfg), "--out", s(&out)]);
    run_ok(&["robustness", "--config", s(&cfg), "--out", s(&out)]);
    let mut seen = 0;
    for entry in fs::read_dir(&out).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let (header, _) = csv_rows(path.clone());
            for h in header.iter().filter(|h| !h.ends_with("_flag")) {
                assert!(h.ends_with(']') && h.contains(" ["), "{}: column {h} has no unit", path.display());
            }
            seen += 1;
        }
    }
    assert_eq!(seen, 6);
    let (header, _) = csv_rows(out.join("oscillator_heatmap.csv"));
    assert!(header.contains(&"theta [rad]".to_string()));
}

#[test]
fn qubit_sweep_reports_revival_and_embeds_config() {
    let dir = TempDir::new().unwrap();
    let cfg = fast_config(dir.path());
    let out = dir.path().join("out");
    run_ok(&["qubit-sweep", "--config", s(&cfg), "--out", s(&out)]);
    let fp = json(out.join("qubit_fingerprints.json"));
    assert_eq!(fp["config"]["phase_points"], 73);
    let at = &fp["fingerprints"][1];
    assert_eq!(at["epsilon"], 0.05);
    assert!(at["witnesses"]["n_mh"]["value"].as_f64().unwrap() > 0.0);
    let re = at["witnesses"]["n_mh"]["kd"]["re"].as_array().unwrap();
    let min_re = re.iter().flat_map(|r| r.as_array().unwrap()).map(|v| v.as_f64().unwrap()).fold(f64::INFINITY, f64::min);
    assert!(min_re < 0.0);
    let exact = &fp["fingerprints"][0];
    assert!(exact["witnesses"]["n_mh"]["value"].as_f64().unwrap() < 1e-7);

    let (header, rows) = csv_rows(out.join("qubit_chi_gap.csv"));
    let eps = column(&header, "epsilon [1]");
    let gap = column(&header, "chi_gap [1]");
    assert_eq!(rows.len(), 5 * 11);
    for r in rows.iter().filter(|r| r[eps].parse::<f64>().unwrap() == 0.0) {
        assert!(r[gap].parse::<f64>().unwrap() < 1e-7);
    }
}

#[test]
fn robustness_series_behave() {
    let dir = TempDir::new().unwrap();
    let cfg = fast_config(dir.path());
    let out = dir.path().join("out");
    run_ok(&["robustness", "--config", s(&cfg), "--out", s(&out)]);
    let (header, rows) = csv_rows(out.join("robustness_dephasing.csv"));
    let (g, e, c) = (column(&header, "gamma_tau [1]"), column(&header, "epsilon [1]"), column(&header, "coherent [energy]"));
    // Four positive amplitudes times three dephasing values.
    assert_eq!(rows.len(), 12);
    for chunk in rows.chunks(3) {
        let coherent: Vec<f64> = chunk.iter().map(|r| r[c].parse().unwrap()).collect();
        assert!(chunk.iter().all(|r| r[e] == chunk[0][e]));
        assert_eq!(chunk[0][g], "0e0");
        assert!(coherent.windows(2).all(|w| w[1] < w[0]));
        let gt: f64 = chunk[2][g].parse().unwrap();
        assert!((coherent[2] / coherent[0] - (-gt).exp()).abs() < 1e-12);
    }
    let fits = json(out.join("robustness_fits.json"));
    assert_eq!(fits["monotone_in_gamma_tau"], true);
    assert!(fits["undephased_deviation"].as_f64().unwrap() < 1e-12);
    let s_pop = fits["waveform_s_pop"]["fit"]["slope"].as_f64().unwrap();
    assert!((s_pop - 2.0).abs() < 0.05, "{s_pop}");
}

#[test]
fn shots_record_seed_and_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = fast_config(dir.path());
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    run_ok(&["shots", "--config", s(&cfg), "--seed", "7", "--out", s(&a)]);
    run_ok(&["shots", "--config", s(&a.join("manifest.json")), "--out", s(&b)]);
    run_ok(&["shots", "--config", s(&cfg), "--seed", "8", "--out", s(&c)]);
    let (ra, rb, rc) = (json(a.join("shots.json")), json(b.join("shots.json")), json(c.join("shots.json")));
    assert_eq!(ra["seed"], 7);
    assert_eq!(ra["monte_carlo"]["seed"], 7);
    assert_eq!(ra["config"]["seed"], 7);
    assert_eq!(rb["seed"], 7);
    assert_eq!(ra["monte_carlo"], rb["monte_carlo"]);
    assert_ne!(ra["monte_carlo"]["estimates"], rc["monte_carlo"]["estimates"]);

    // Budgets scale as 1/ε² at fixed R and Γτ.
    let budgets = ra["budgets"].as_array().unwrap();
    assert_eq!(budgets.len(), 4 * 3 * 2);
    let pick = |eps: f64| {
        budgets
            .iter()
            .find(|b| b["epsilon"] == eps && b["gamma_phi"] == 0.0 && b["r"] == 3.0)
            .map(|b| b["n_br"].as_f64().unwrap())
            .unwrap()
    };
    let ratio = pick(0.01) / pick(0.02);
    assert!((ratio - 4.0).abs() < 1e-3, "{ratio}");
}

#[test]
fn fingerprint_covers_both_systems() {
    let dir = TempDir::new().unwrap();
    let cfg = fast_config(dir.path());
    let out = dir.path().join("out");
    run_ok(&["fingerprint", "--config", s(&cfg), "--out", s(&out)]);
    let fp = json(out.join("fingerprint.json"));
    assert_eq!(fp["oscillator"]["h_off_re"].as_array().unwrap().len(), 10);
    let bands = fp["oscillator"]["bands"].as_array().unwrap();
    assert_eq!(bands.len(), 9);
    assert!(fp["qubit"]["witnesses"]["d_kd"]["kd"]["re"].is_array());
    assert_eq!(json(out.join("manifest.json"))["files"], serde_json::json!(["fingerprint.json"]));
}

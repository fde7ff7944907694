use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn pvwind(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvwind")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SHORT_DYNAMIC: &str = r#"
mode = "dynamic"
[clock]
t_end = 1.0
[dynamic]
record_interval = 0.05
"#;

const SHORT_HOURLY: &str = r#"
mode = "quasi_static"
[weather]
source = "synthetic"
days = 2
"#;

const SMALL_TUNE: &str = r#"
population = 6
generations = 8
[fitness]
horizon = 5.0
ts = 1e-3
[fitness.scenario]
kind = "pole_surrogate"
a = 1.0
b = 1.0
zeta = 0.8
omega_n = 4.0
[fitness.reference]
kind = "constant"
value = 1.0
"#;

#[test]
fn dynamic_run_writes_csv_and_json() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "d.toml", SHORT_DYNAMIC);
    let o = pvwind(&["--out-dir", s(dir.path()), "simulate-dynamic", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("dynamic.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("time_s,"), "{header}");
    for ch in ["pv_power_mw", "wind_power_mw", "v_dc_v", "lambda"] {
        assert!(header.contains(ch), "{ch}");
    }
    assert_eq!(csv.lines().count(), 1 + 21);

    let o = pvwind(&["--out-dir", s(dir.path()), "--format", "json", "simulate-dynamic", &cfg]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("dynamic.json")).unwrap()).unwrap();
    assert!(v.is_object());
}

#[test]
fn hourly_then_econ_from_run_then_coverage() {
    let dir = TempDir::new().unwrap();
    let out = s(dir.path());
    let o = pvwind(&["--out-dir", out, "simulate-hourly", &config("hourly.toml")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let hourly = fs::read_to_string(dir.path().join("hourly.csv")).unwrap();
    assert_eq!(hourly.lines().count(), 1 + 31 * 24);

    let o = pvwind(&["--out-dir", out, "econ", &config("econ.toml"), "--energy", "from-run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let flow = fs::read_to_string(dir.path().join("cashflow.csv")).unwrap();
    assert_eq!(flow.lines().next(), Some("year,revenue,cost,net,cumulative"));
    assert_eq!(flow.lines().count(), 1 + 26);
    let summary = fs::read_to_string(dir.path().join("econ_summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("lcoe,")));
    assert!(summary.lines().any(|l| l.starts_with("emissions.co2,")));

    let run = dir.path().join("hourly.csv");
    let o = pvwind(&["--out-dir", out, "coverage", s(&run), &config("load_january.csv")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cov = fs::read_to_string(dir.path().join("coverage.csv")).unwrap();
    assert_eq!(cov.lines().count(), 1 + 31 * 24);
}

#[test]
fn numeric_energy_reproduces_reference_figures() {
    let dir = TempDir::new().unwrap();
    let mwh = format!("{}", 28_393_342.0 / 400.0);
    let o = pvwind(&[
        "--out-dir",
        s(dir.path()),
        "--format",
        "json",
        "econ",
        &config("econ.toml"),
        "--energy",
        &mwh,
        "--pv-share",
        "0.145",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("econ.json")).unwrap()).unwrap();
    let sm = &v["summary"];
    assert_eq!(sm["capital"].as_f64(), Some(42_081_490.0));
    assert_eq!(sm["om_annual"].as_f64(), Some(336_566.0));
    assert!((sm["payback_simple"].as_f64().unwrap() - 5.43).abs() < 0.01);
    assert!((sm["emissions"]["co2"].as_f64().unwrap() - 28_393_342.0).abs() < 1.0);
    assert_eq!(v["cashflow"].as_array().unwrap().len(), 26);
}

#[test]
fn seed_flag_controls_synthetic_weather() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "h.toml", SHORT_HOURLY);
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = pvwind(&["--seed", seed, "--out-dir", s(&out), "simulate-hourly", &cfg]);
        assert_eq!(code(&o), 0);
        fs::read(out.join("hourly.csv")).unwrap()
    };
    assert_eq!(run("11", "a"), run("11", "b"));
    assert_ne!(run("11", "a"), run("12", "c"));
}

#[test]
fn tune_reports_gains_in_both_formats() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "t.toml", SMALL_TUNE);
    let o = pvwind(&["--out-dir", s(dir.path()), "--seed", "4", "--format", "json", "tune", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("tune.json")).unwrap()).unwrap();
    assert_eq!(v["seed"].as_u64(), Some(4));
    assert!(v["gains"]["kp"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["trace"].as_array().unwrap().len(), 8);

    let o = pvwind(&["--out-dir", s(dir.path()), "tune", &cfg]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("tune.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("generation,best_mse"));
    assert_eq!(csv.lines().count(), 1 + 8);
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = s(dir.path());
    let bad_toml = write(dir.path(), "bad.toml", "mode = [");
    let unknown = write(dir.path(), "unknown.toml", "warp_factor = 9\n");
    let no_days = write(dir.path(), "nodays.toml", "[weather]\nsource = \"synthetic\"\ndays = 0\n");
    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate-dynamic", &bad_toml],
        vec!["simulate-dynamic", &unknown],
        vec!["simulate-hourly", &no_days],
    ];
    for args in cases {
        let mut full = vec!["--out-dir", out];
        full.extend(args.iter());
        let o = pvwind(&full);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    let econ = config("econ.toml");
    assert_eq!(code(&pvwind(&["--out-dir", out, "econ", &econ, "--energy", "lots"])), 2);
    assert_eq!(code(&pvwind(&["--out-dir", out, "econ", &econ])), 2);
    assert_eq!(
        code(&pvwind(&["--out-dir", out, "econ", &econ, "--energy", "100", "--pv-share", "2"])),
        2
    );
    assert_eq!(code(&pvwind(&["--format", "xml", "simulate-dynamic", &econ])), 2);
}

#[test]
fn misaligned_coverage_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "h.toml", SHORT_HOURLY);
    let o = pvwind(&["--out-dir", s(dir.path()), "simulate-hourly", &cfg]);
    assert_eq!(code(&o), 0);
    let run = dir.path().join("hourly.csv");
    let o = pvwind(&["--out-dir", s(dir.path()), "coverage", s(&run), &config("load_january.csv")]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("misaligned"));
}

#[test]
fn diverging_run_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "coarse.toml",
        "mode = \"dynamic\"\n[clock]\ndt_electrical = 1e-2\ndt_control = 1e-2\nt_end = 2.0\n[dynamic]\nrecord_interval = 1e-2\n",
    );
    let o = pvwind(&["--out-dir", s(dir.path()), "simulate-dynamic", &cfg]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn missing_files_exit_4() {
    let dir = TempDir::new().unwrap();
    let out = s(dir.path());
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&pvwind(&["--out-dir", out, "simulate-dynamic", s(&missing)])), 4);
    assert_eq!(code(&pvwind(&["--out-dir", out, "tune", s(&missing)])), 4);
    assert_eq!(
        code(&pvwind(&["--out-dir", out, "econ", &config("econ.toml"), "--energy", "from-run"])),
        4
    );
    let ghost = dir.path().join("ghost.csv");
    assert_eq!(
        code(&pvwind(&["--out-dir", out, "coverage", s(&ghost), &config("load_january.csv")])),
        4
    );

    let csv_weather = write(
        dir.path(),
        "w.toml",
        "mode = \"quasi_static\"\n[weather]\nsource = \"csv\"\npath = \"absent.csv\"\n",
    );
    assert_eq!(code(&pvwind(&["--out-dir", out, "simulate-hourly", &csv_weather])), 4);

    // A regular file where the output directory should go.
    let blocker = write(dir.path(), "blocker", "");
    let cfg = write(dir.path(), "d.toml", SHORT_DYNAMIC);
    assert_eq!(code(&pvwind(&["--out-dir", &blocker, "simulate-dynamic", &cfg])), 4);
}

#[test]
fn shipped_configs_parse() {
    use pvwind::econ::EconConfig;
    use pvwind::sim::Scenario;
    use pvwind::tuning::TuneConfig;
    let read = |n: &str| fs::read_to_string(configs().join(n)).unwrap();
    for n in ["dynamic.toml", "hourly.toml"] {
        Scenario::from_toml(&read(n)).unwrap().validate().unwrap();
    }
    for n in ["tune_pv.toml", "tune_speed.toml"] {
        let cfg: TuneConfig = toml::from_str(&read(n)).unwrap();
        cfg.fitness.validate().unwrap();
    }
    let econ: EconConfig = toml::from_str(&read("econ.toml")).unwrap();
    econ.finance.validate().unwrap();
}

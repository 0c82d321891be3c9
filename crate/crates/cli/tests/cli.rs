use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use stratshear_cli::{execute, main_with_args, resolve_out_dir, RunConfig, OUT_ENV};

const COUETTE: &str = "mode = \"couette\"\nR = 1.0\nbeta = 0.0\nk_list = [1]\n\
                       grid.eta_max = 20.0\ngrid.N = 256\ntime.t_max = 40.0\ntime.dt = 0.01\ntime.record_every = 10\n";

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stratshear"));
    cmd.env_remove(OUT_ENV);
    cmd
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn stratshear")
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_owned();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn smoke_config_is_fast_and_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let start = Instant::now();
    let out = run(bin()
        .arg("--config")
        .arg(root.join("configs/couette_smoke.toml"))
        .arg("--out")
        .arg(dir.path()));
    assert!(start.elapsed().as_secs_f64() < 10.0);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("couette_smoke_k1.csv"));
    assert_eq!(header, "t,E,E_lower,E_upper,q_norm,vx_norm,vy_norm,growth_norm,Es");
    assert_eq!(rows.len(), 1001);
    for row in &rows {
        assert_eq!(row.len(), 9);
        assert!(row[2] <= row[1] * (1.0 + 1e-12) && row[1] <= row[3] * (1.0 + 1e-12));
        assert!(row[4..8].iter().all(|v| v.is_finite() && *v >= 0.0));
    }
    assert!(dir.path().join("couette_smoke_summary.json").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "empty.toml",
            "mode = \"couette\"\nR = 1.0\nbeta = 0.0\nk_list = []\n",
            "k_list",
        ),
        ("typo.toml", &format!("{COUETTE}grid.Nx = 4\n"), "line 10"),
        ("syntax.toml", "mode = couette\n", "line 1"),
        (
            "unstable.toml",
            &COUETTE.replace("time.dt = 0.01", "time.dt = 0.2"),
            "dt",
        ),
        (
            "coarse.toml",
            "mode = \"near_couette\"\nR = 1.0\nbeta = 1.0\nk_list = [1]\ngrid.eta_max = 8.0\ngrid.N = 64\n\
             profile.amplitude = 0.02\nprofile.sigma = 4.0\n",
            "resolve",
        ),
    ];
    for (name, text, needle) in cases {
        let cfg = write(dir.path(), name, text);
        let out = run(bin().arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("o")));
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "{name}: {stderr}");
        assert!(stderr.contains(needle), "{name}: {stderr}");
    }
    assert_eq!(main_with_args(["stratshear", "--config", "/nonexistent/run.toml"]), 2);
    assert_eq!(main_with_args(["stratshear", "--bogus"]), 2);
}

#[test]
fn assertions_only_bite_when_enabled() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "a.toml",
        &format!("{COUETTE}assert.exponent_q = [5.0, 6.0]\n"),
    );
    let plain = run(bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("plain")));
    assert_eq!(plain.status.code(), Some(0));
    let strict = run(bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("strict"))
        .arg("--assert"));
    assert_eq!(strict.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("exponent_q"));
    // Evidence is still written.
    assert!(dir.path().join("strict/run_summary.json").exists());

    let cfg = write(
        dir.path(),
        "b.toml",
        &format!("{COUETTE}assert.exponent_vy = [-3.0, 0.0]\nassert.enabled = true\n"),
    );
    let ok = run(bin().arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("ok")));
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{COUETTE}output.dir = \"{}\"\n",
        dir.path().join("from_config").display()
    );
    let cfg = write(dir.path(), "c.toml", &text);
    let config = RunConfig::load(&cfg).unwrap();
    let flag = dir.path().join("flag");
    let env = dir.path().join("env");
    assert_eq!(resolve_out_dir(Some(&flag), Some(env.clone().into()), &config), flag);
    assert_eq!(resolve_out_dir(None, Some(env.clone().into()), &config), env);
    assert_eq!(
        resolve_out_dir(None, Some("".into()), &config),
        dir.path().join("from_config")
    );

    let out = run(bin().arg("--config").arg(&cfg).env(OUT_ENV, &env));
    assert_eq!(out.status.code(), Some(0));
    assert!(env.join("run_k1.csv").exists());
    assert!(!dir.path().join("from_config").exists());
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = RunConfig::from_toml(&COUETTE.replace("k_list = [1]", "k_list = [2, 1, -1]")).unwrap();
    let serial = execute(&cfg, Some(1)).unwrap();
    let parallel = execute(&cfg, Some(3)).unwrap();
    assert_eq!(serial, parallel);
    let ks: Vec<i64> = serial.series.iter().map(|(k, _)| *k).collect();
    assert_eq!(ks, vec![2, 1, -1]);
    assert_eq!(serial.summary.runs.len(), 3);
}

#[test]
fn exploratory_runs_below_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let text = COUETTE.replace("R = 1.0", "R = 0.2") + "exploratory = true\n";
    let cfg = write(dir.path(), "x.toml", &text);
    let out = run(bin().arg("--config").arg(&cfg).arg("--out").arg(dir.path()));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.path().join("run_k1.csv"));
    assert!(rows.iter().all(|r| r[8].is_nan()));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run_summary.json")).unwrap()).unwrap();
    assert!(summary["delta_used"].is_null());
    assert_eq!(summary["Es_monotone"], serde_json::Value::Bool(false));
    // The lower coercivity constant is negative here.
    assert!(rows.iter().all(|r| r[2] < 0.0));
}

#[test]
fn summary_reports_the_near_couette_setup() {
    let text = "mode = \"near_couette\"\nR = 1.0\nbeta = 1.0\nk_list = [1]\ngrid.eta_max = 8.0\ngrid.N = 256\n\
                profile.amplitude = 0.02\nprofile.sigma = 4.0\ntime.t_max = 20.0\ntime.dt = 0.01\ntime.record_every = 5\n";
    let cfg = RunConfig::from_toml(text).unwrap();
    let a = execute(&cfg, None).unwrap();
    let s = &a.summary;
    assert!(s.epsilon_measured > 0.04 && s.epsilon_measured < 0.05);
    assert_eq!(s.delta_used, 64.0 * s.epsilon_measured);
    assert!(s.epsilon_physical > 0.0);
    assert!(s.solver.solves > 0 && s.solver.max_residual <= 1e-10 && s.solver.max_contraction < 0.1);
    assert!(s.Es_monotone);
    assert_eq!(s.runs[0].energy_envelope, None);
    assert_eq!(s.fit_window, [2.0, 20.0]);
}

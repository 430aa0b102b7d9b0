use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn landau(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_landau"))
        .args(args)
        .current_dir(dir)
        .env_remove("LANDAU_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn small(epsilon: f64, extra: &str) -> String {
    format!(
        r#"
gamma = -1.0
epsilon = {epsilon}
[dims]
d_x = 1
d_v = 2
[grid]
n_x = 128
n_v = 32
L_x = 40.0
v_max = 6.0
[time]
t_final = 1.0
dt_max = 0.25
output_every = 0.5
[initial_data]
kind = "gaussian"
parameters = {{ width_x = 2.0, width_v = 1.0 }}
[diagnostics]
K_diag = 1
{extra}
"#
    )
}

fn json_lines(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn vacuum_run_streams_zeros() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small(0.0, ""));
    let o = landau(&["run", "--config", cfg.to_str().unwrap(), "--output", "out", "--quiet"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stderr.is_empty());
    let rows = json_lines(&tmp.path().join("out/diagnostics.ndjson"));
    assert_eq!(rows.len(), 3);
    for row in rows {
        for (k, v) in row.as_object().unwrap() {
            if k == "t" {
                continue;
            }
            let zero = match v {
                serde_json::Value::Array(a) => a.iter().all(|x| x.as_f64() == Some(0.0)),
                x => x.as_f64() == Some(0.0),
            };
            assert!(zero, "{k} = {v}");
        }
    }
}

#[test]
fn identical_runs_give_identical_streams() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small(1e-3, ""));
    let c = cfg.to_str().unwrap();
    for out in ["a", "b"] {
        let o = landau(&["run", "--config", c, "--output", out, "--quiet"], tmp.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = fs::read(tmp.path().join("a/diagnostics.ndjson")).unwrap();
    let b = fs::read(tmp.path().join("b/diagnostics.ndjson")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let csv = fs::read_to_string(tmp.path().join("a/diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,mass,momentum_0,momentum_1,energy"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn checkpoints_round_trip_and_resume() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small(1e-3, "[output]\ncheckpoint_every = 0.5"));
    let c = cfg.to_str().unwrap();
    let o = landau(&["run", "--config", c, "--output", "full", "--quiet"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mid = tmp.path().join("full/checkpoint_0001.lndk");
    let bytes = fs::read(&mid).unwrap();
    assert_eq!(&bytes[..4], b"LNDK");
    let back = landau_core::checkpoint::Checkpoint::load(&mid).unwrap();
    assert_eq!(back.field.time, 0.5);
    assert_eq!(back.encode(), bytes);

    // resuming into a copy of the directory rewrites the tail of the stream
    fs::create_dir(tmp.path().join("resumed")).unwrap();
    fs::copy(tmp.path().join("full/diagnostics.ndjson"), tmp.path().join("resumed/diagnostics.ndjson")).unwrap();
    let o = landau(
        &["run", "--config", c, "--output", "resumed", "--resume", mid.to_str().unwrap(), "--quiet"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(tmp.path().join("full/final.lndk")).unwrap(),
        fs::read(tmp.path().join("resumed/final.lndk")).unwrap()
    );
    let t: Vec<f64> = json_lines(&tmp.path().join("resumed/diagnostics.ndjson"))
        .iter()
        .map(|r| r["t"].as_f64().unwrap())
        .collect();
    assert_eq!(t, vec![0.0, 0.5, 1.0]);
}

fn free_streaming(t_final: f64, width_x: f64, window: [f64; 2]) -> String {
    format!(
        r#"
gamma = -1.0
epsilon = 1.0
[dims]
d_x = 1
d_v = 1
[grid]
n_x = 1280
n_v = 512
L_x = 640.0
v_max = 6.0
[time]
t_final = {t_final}
dt_max = 1.0
output_every = 1.0
[initial_data]
kind = "gaussian"
parameters = {{ width_x = {width_x}, width_v = 1.0 }}
[diagnostics]
K_diag = 0
fit_window = [{}, {}]
[solver]
collisions = false
"#,
        window[0], window[1]
    )
}

#[test]
fn fit_report_recovers_one_dimensional_dispersion() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &free_streaming(50.0, 1.0, [5.0, 50.0]));
    let o = landau(&["fit-report", "--config", cfg.to_str().unwrap(), "--quiet"], tmp.path());
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{out}{}", stderr(&o));
    let rho = out.lines().find(|l| l.starts_with("rho_sup")).unwrap();
    let slope: f64 = rho.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((slope + 1.0).abs() <= 0.1, "{rho}");
    assert!(rho.ends_with("PASS"));
}

#[test]
fn fit_report_off_target_exits_two() {
    // before the dispersive regime the density has barely started to fall
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &free_streaming(6.0, 20.0, [1.0, 6.0]));
    let o = landau(&["fit-report", "--config", cfg.to_str().unwrap(), "--quiet"], tmp.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn fit_report_reads_a_stored_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &free_streaming(50.0, 1.0, [5.0, 50.0]));
    let c = cfg.to_str().unwrap();
    let o = landau(&["run", "--config", c, "--output", "out", "--quiet"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = landau(&["fit-report", "--config", c, "--output", "out"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("reading"));
}

#[test]
fn errors_exit_one_with_module_names() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", &small(1e-3, "").replace("gamma = -1.0", "gamma = -2.0"));
    let o = landau(&["run", "--config", bad.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("cli::ConfigInvalid"), "{}", stderr(&o));

    let o = landau(&["run"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--config"));

    let junk = write_config(tmp.path(), "junk.toml", "gamma = \n");
    let o = landau(&["run", "--config", junk.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("cli::ParseError"));

    let ok = write_config(tmp.path(), "ok.toml", &small(1e-3, ""));
    let o = Command::new(env!("CARGO_BIN_EXE_landau"))
        .args(["run", "--config", ok.to_str().unwrap(), "--quiet"])
        .current_dir(tmp.path())
        .env("LANDAU_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("LANDAU_THREADS"));
}

#[test]
fn thread_cap_does_not_change_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small(1e-3, ""));
    let c = cfg.to_str().unwrap();
    let o = landau(&["run", "--config", c, "--output", "a", "--quiet"], tmp.path());
    assert_eq!(code(&o), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_landau"))
        .args(["run", "--config", c, "--output", "b", "--quiet"])
        .current_dir(tmp.path())
        .env("LANDAU_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(tmp.path().join("a/diagnostics.ndjson")).unwrap(),
        fs::read(tmp.path().join("b/diagnostics.ndjson")).unwrap()
    );
}

fn last_deviation(stdout: &[u8]) -> f64 {
    let text = String::from_utf8_lossy(stdout);
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    last["deviation"].as_f64().unwrap()
}

#[test]
fn compare_free_scales_with_amplitude() {
    let tmp = TempDir::new().unwrap();
    let mut dev = Vec::new();
    for eps in [1e-3, 5e-4] {
        let cfg = write_config(tmp.path(), "c.toml", &small(eps, ""));
        let o = landau(&["compare-free", "--config", cfg.to_str().unwrap(), "--quiet"], tmp.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let first: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stdout).lines().next().unwrap()).unwrap();
        assert_eq!(first["deviation"].as_f64(), Some(0.0));
        dev.push(last_deviation(&o.stdout));
    }
    let ratio = dev[0] / dev[1];
    assert!(ratio >= 0.85 * 2f64.powf(1.5), "ratio {ratio}");
}

#[test]
fn maxfit_of_free_transport_is_constant() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        r#"
gamma = -1.0
epsilon = 1e-3
[dims]
d_x = 2
d_v = 2
[grid]
n_x = 16
n_v = 16
L_x = 40.0
v_max = 5.5
[time]
t_final = 0.5
dt_max = 0.25
output_every = 0.25
[initial_data]
kind = "seed"
parameters = { width_x = 1.5, width_v = 0.8, separation_x = 3.0, separation_v = 1.0 }
[diagnostics]
K_diag = 0
[solver]
collisions = false
"#,
    );
    let o = landau(&["maxfit", "--config", cfg.to_str().unwrap(), "--output", "out", "--quiet"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows: Vec<serde_json::Value> =
        String::from_utf8_lossy(&o.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    // free transport leaves f♯ and hence the fit unchanged
    let first = rows[0]["relative_residual"].as_f64().unwrap();
    assert!(first > 0.0 && first < 1.0);
    for r in &rows {
        let rel = r["relative_residual"].as_f64().unwrap();
        assert!((rel - first).abs() <= 1e-6 * first, "{r}");
    }
    assert_eq!(json_lines(&tmp.path().join("out/maxfit.ndjson")), rows);
}

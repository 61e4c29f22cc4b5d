//! End-to-end runs of the `sac` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn sac(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sac"));
    cmd.args(args).env_remove("SAC_THREADS");
    if let Some(n) = threads {
        cmd.env("SAC_THREADS", n.to_string());
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

/// Every file under `dir`, by relative path.
fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

const CIRCLE: &str = r#"
[grid]
dim = 2
m = 128

[solver]
eps = 0.03
dt = 2e-5
t_end = 0.02
snapshot_stride = 100

[solver.initial]
kind = "circle"
radius = 0.3

[output]
dir = "out"
"#;

const KINKS: &str = r#"
[grid]
dim = 1
m = 96

[noise]
modes = [{ kind = "bump", center = [0.5, 0.0], radius = 0.35, amplitude = 0.5 }]

[solver]
eps = 0.06
dt = 2e-5
t_end = 0.01
snapshot_stride = 50

[solver.initial]
kind = "two_kinks"

[ensemble]
samples = 1
master_seed = 42
residual_windows = [[0.0, 0.01]]
residual_probes = [{ kind = "bump", center = [0.4, 0.0], radius = 0.2 }]

[output]
dir = "out"
trajectories = true
"#;

#[test]
fn missing_config_exits_2_with_path() {
    let o = sac(&["run", "/nonexistent/dir/experiment.toml"], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/nonexistent/dir/experiment.toml"), "{}", stderr(&o));
}

#[test]
fn unknown_key_exits_2_naming_the_key() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[solver]\ntimestep = 1e-5\n");
    let o = sac(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("timestep"), "{}", stderr(&o));
}

#[test]
fn unstable_step_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[grid]\nm = 256\n[solver]\ndiffusion = \"explicit\"\ndt = 1e-4\n");
    let o = sac(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn blowup_exits_4() {
    // admissible step, but data far outside the wells overshoot in the
    // explicit reaction term
    let dir = TempDir::new().unwrap();
    let body = "[grid]\ndim = 1\nm = 64\n[solver]\neps = 0.05\ndt = 7e-4\nt_end = 0.007\n\
                [solver.initial]\nkind = \"constant\"\nvalue = 3.0\n";
    let cfg = write_config(dir.path(), "c.toml", body);
    let o = sac(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("blowup"), "{}", stderr(&o));
}

#[test]
fn circle_radius_follows_curvature_flow() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "circle.toml", CIRCLE);
    let o = sac(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("out/trajectory.csv"));
    assert_eq!(header, ["t", "E", "willmore", "bv_g", "l1", "min", "max", "radius"]);
    assert_eq!(rows.len(), 11);
    for r in &rows {
        let exact = (0.09 - 2.0 * r[0]).sqrt();
        assert!((r[7] - exact).abs() <= 0.02 * exact, "t = {}: radius {} vs {exact}", r[0], r[7]);
    }
    assert!(dir.path().join("out/radius.svg").exists());
    assert!(dir.path().join("out/energy.svg").exists());
    assert_eq!(fs::read_dir(dir.path().join("out/snapshots")).unwrap().count(), 11);
}

#[test]
fn zero_horizon_writes_only_the_initial_snapshot() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &CIRCLE.replace("t_end = 0.02", "t_end = 0.0"));
    let o = sac(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = csv_rows(&dir.path().join("out/trajectory.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], 0.0);
    let snaps: Vec<_> = fs::read_dir(dir.path().join("out/snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 1);
    let bytes = fs::read(snaps[0].as_ref().unwrap().path()).unwrap();
    assert_eq!(&bytes[..4], b"SACF");
}

#[test]
fn single_sample_ensemble_matches_run() {
    let dir = TempDir::new().unwrap();
    let run_dir = dir.path().join("run");
    let ens_dir = dir.path().join("ens");
    fs::create_dir_all(&run_dir).unwrap();
    fs::create_dir_all(&ens_dir).unwrap();
    let run_cfg = write_config(&run_dir, "k.toml", KINKS);
    let ens_cfg = write_config(&ens_dir, "k.toml", KINKS);
    assert_eq!(code(&sac(&["run", run_cfg.to_str().unwrap()], None)), 0);
    let o = sac(&["ensemble", ens_cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a = fs::read(run_dir.join("out/trajectory.csv")).unwrap();
    let b = fs::read(ens_dir.join("out/trajectories/eps0_s0000.csv")).unwrap();
    assert!(a.len() > 100);
    assert_eq!(a, b);
}

#[test]
fn ensemble_bytes_do_not_depend_on_worker_count() {
    let body = KINKS.replace("samples = 1", "samples = 6").replace("trajectories = true", "trajectories = true\nsvg = true");
    let mut trees = Vec::new();
    for threads in [1usize, 4] {
        let dir = TempDir::new().unwrap();
        let cfg = write_config(dir.path(), "k.toml", &body);
        let o = sac(&["ensemble", cfg.to_str().unwrap()], Some(threads));
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        trees.push(tree(&dir.path().join("out")));
    }
    assert!(trees[0].len() >= 10, "{:?}", trees[0].keys());
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn constant_mode_residuals_sit_in_the_clt_band() {
    let dir = TempDir::new().unwrap();
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/ensemble.toml");
    let cfg = dir.path().join("ensemble.toml");
    fs::copy(shipped, &cfg).unwrap();
    let o = sac(&["ensemble", cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("out/ensemble/summary.toml")).unwrap();
    assert!(summary.contains("eps0_residual_probe0_w0 = true"), "{summary}");
    assert!(dir.path().join("out/ensemble/residuals_eps0_probe0_w0.svg").exists());
}

#[test]
fn failing_gate_exits_5() {
    // the global martingale of a constant mode vanishes, so its band is
    // degenerate and the discretization bias fails the gate
    let dir = TempDir::new().unwrap();
    let shipped = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/ensemble.toml")).unwrap();
    let body = shipped.replace("residual_gates = [\"probe0\"]", "residual_gates = [\"global\"]");
    assert_ne!(body, shipped);
    let cfg = write_config(dir.path(), "e.toml", &body);
    let o = sac(&["ensemble", cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 5, "{}", stderr(&o));
    assert!(stderr(&o).contains("eps0_residual_global_w0"), "{}", stderr(&o));
}

#[test]
fn plots_are_rebuilt_from_tables_alone() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "circle.toml", &CIRCLE.replace("t_end = 0.02", "t_end = 0.004"));
    assert_eq!(code(&sac(&["run", cfg.to_str().unwrap()], None)), 0);
    let out = dir.path().join("out");
    let before = fs::read(out.join("radius.svg")).unwrap();
    fs::remove_file(out.join("radius.svg")).unwrap();
    let o = sac(&["plot", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(out.join("radius.svg")).unwrap(), before);
    let empty = TempDir::new().unwrap();
    assert_eq!(code(&sac(&["plot", empty.path().to_str().unwrap()], None)), 2);
}

#[test]
fn validation_suite_passes_and_is_falsifiable() {
    let o = sac(&["validate"], None);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    for name in ["transport exactness", "Ito/Heun agreement", "flow-property defect", "backend L1 equivalence"] {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap_or_else(|| panic!("{name} missing: {text}"));
        assert!(line.contains(" pass "), "{line}");
    }

    let o = sac(&["--unsafe-debug", "zero-c", "validate"], None);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("Ito/Heun agreement"), "{}", stderr(&o));
    let line = stdout(&o).lines().find(|l| l.starts_with("Ito/Heun agreement")).unwrap().to_string();
    assert!(line.contains("FAIL"), "{line}");
}

#[test]
fn validation_without_modes_skips_transport_checks() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "silent.toml", "[grid]\ndim = 1\nm = 64\n[solver.initial]\nkind = \"kink\"\n");
    let o = sac(&["validate", cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.contains(" skipped ")).count(), 4, "{text}");
    assert!(text.lines().any(|l| l.starts_with("deterministic energy decay") && l.contains(" pass ")), "{text}");
}

#[test]
fn debug_flags_are_hidden_from_help() {
    let o = sac(&["--help"], None);
    assert_eq!(code(&o), 0);
    let help = stdout(&o);
    assert!(help.contains("validate") && help.contains("ensemble"), "{help}");
    assert!(!help.contains("unsafe"), "{help}");
}

#[test]
fn bad_thread_override_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "k.toml", KINKS);
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sac"));
    let o = cmd.args(["ensemble", cfg.to_str().unwrap()]).env("SAC_THREADS", "zero").output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("SAC_THREADS"), "{}", stderr(&o));
}

#[test]
fn sweep_writes_one_row_per_eps() {
    let dir = TempDir::new().unwrap();
    let body = KINKS
        .replace("samples = 1", "samples = 2\neps_list = [0.08, 0.06, 0.04]")
        .replace("residual_windows = [[0.0, 0.01]]\n", "")
        .replace("residual_probes = [{ kind = \"bump\", center = [0.4, 0.0], radius = 0.2 }]\n", "");
    let cfg = write_config(dir.path(), "s.toml", &body);
    let o = sac(&["sweep", cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("out/sweep.csv"));
    assert_eq!(header[0], "eps");
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![0.08, 0.06, 0.04]);
    let (_, coupling) = csv_rows(&dir.path().join("out/coupling.csv"));
    assert_eq!(coupling.len(), 2);
    assert!(dir.path().join("out/sweep.svg").exists());
}

#[test]
fn flow_backend_run_tracks_the_direct_run() {
    let dir = TempDir::new().unwrap();
    let body = KINKS.replace("residual_windows = [[0.0, 0.01]]\n", "").replace("snapshot_stride = 50", "snapshot_stride = 500");
    let direct = write_config(dir.path(), "d.toml", &body.replace("dir = \"out\"", "dir = \"direct\""));
    let flow = write_config(
        dir.path(),
        "f.toml",
        &body.replace("dir = \"out\"", "dir = \"flow\"").replace("snapshot_stride = 500", "snapshot_stride = 500\nbackend = \"flow\""),
    );
    assert_eq!(code(&sac(&["run", direct.to_str().unwrap()], None)), 0);
    let o = sac(&["run", flow.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, a) = csv_rows(&dir.path().join("direct/trajectory.csv"));
    let (_, b) = csv_rows(&dir.path().join("flow/trajectory.csv"));
    assert_eq!(a.len(), b.len());
    let (ea, eb) = (a.last().unwrap()[1], b.last().unwrap()[1]);
    assert!((ea - eb).abs() < 0.02 * ea, "final energies {ea} vs {eb}");
}

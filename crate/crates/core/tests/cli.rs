use std::path::Path;
use std::process::{Command, Output};

use pksns_core::functionals::CSV_HEADER;

fn pksns(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pksns")).args(args).current_dir(cwd).env_remove("PKSNS_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

const TINY: &str = "grid.N = 32\ngrid.L = 20\nphysics.poisson = periodic\nphysics.init_u = random\nphysics.u_energy = 0.1\n\
                    physics.u_band = 4\nstepper.dt = 0.01\noutput.cadence = 0.05\nseed = 2\n";

#[test]
fn preset_list_names_every_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = pksns(&["preset", "list"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().count() >= 6);
    for name in ["subcritical_radial", "critical_radial", "critical_coupled", "supercritical_radial", "heat_sanity", "ns_sanity"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn zero_horizon_run_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.cfg", &format!("{TINY}stepper.t_end = 0\noutput.series_path = out/series.csv\n"));
    let o = pksns(&["run", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("out/series.csv")).unwrap();
    assert_eq!(text, format!("{CSV_HEADER}\n"));
}

#[test]
fn run_reports_and_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", &format!("{TINY}stepper.t_end = 0.2\noutput.series_path = s.csv\n"));
    let o = pksns(&["run", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("status=ok") && out.contains("rows=5"), "{out}");
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn preset_show_feeds_back_into_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = pksns(&["preset", "show", "ns_sanity"], dir.path());
    assert_eq!(code(&o), 0);
    let cfg = write_config(dir.path(), "ns.cfg", &String::from_utf8(o.stdout).unwrap().replace("stepper.t_end = 1\n", "stepper.t_end = 0.1\n"));
    let o = pksns(&["run", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&pksns(&["preset", "show", "nope"], dir.path())), 1);
}

#[test]
fn check_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a.csv", "b.csv"] {
        let o = pksns(&["check", "--suite", "loghls", "--count", "100", "--seed", "7", "--out", out], dir.path());
        assert_eq!(code(&o), 0);
        assert!(String::from_utf8(o.stdout).unwrap().contains("failures=0"));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 101);
    let o = pksns(&["check", "--suite", "bm", "--count", "3"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("check_bm_0.csv").exists());
}

#[test]
fn numerical_abort_exits_2_and_keeps_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "abort.cfg",
        &format!("{TINY}stepper.resolution_threshold = 1e-300\nstepper.t_end = 1\noutput.series_path = s.csv\n"),
    );
    let o = pksns(&["run", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8(o.stderr).unwrap().contains("under-resolved"));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn usage_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&pksns(&[], dir.path())), 1);
    assert_eq!(code(&pksns(&["run"], dir.path())), 1);
    assert_eq!(code(&pksns(&["run", "--preset", "missing"], dir.path())), 1);
    assert_eq!(code(&pksns(&["check", "--suite", "loghls", "--count", "x"], dir.path())), 1);
    let bad = write_config(dir.path(), "bad.cfg", "grid.N = 64\nwhat = 1\n");
    let o = pksns(&["run", "--config", &bad], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stderr).unwrap().contains("line 2"));
    assert_eq!(code(&pksns(&["run", "--config", "missing.cfg"], dir.path())), 3);
    std::fs::write(dir.path().join("blocker"), b"").unwrap();
    let cfg = write_config(dir.path(), "io.cfg", &format!("{TINY}output.series_path = blocker/s.csv\n"));
    assert_eq!(code(&pksns(&["run", "--config", &cfg], dir.path())), 3);
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_pksns"))
            .args(["check", "--suite", "bm", "--count", "2"])
            .current_dir(dir.path())
            .env("PKSNS_THREADS", v)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("2")), 0);
    assert_eq!(code(&run("zero")), 1);
    assert_eq!(code(&run("0")), 1);
}

#[test]
fn oracle_reports_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", "preset = small_data\ngrid.N = 32\ngrid.L = 10\nphysics.u_band = 3\n");
    let o = pksns(&["oracle", "--config", &cfg, "--T", "0.005", "--iters", "3", "--out", "oracle.txt"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("oracle.txt")).unwrap();
    assert_eq!(text, String::from_utf8(o.stdout).unwrap());
    let rel: f64 = text.lines().find_map(|l| l.strip_prefix("rel_l2_n=")).unwrap().parse().unwrap();
    assert!(rel < 1e-3);
}

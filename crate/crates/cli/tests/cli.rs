use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &["--nu", "1e-2", "--dt", "1e-2", "--t-end", "0.05", "--law", "fb", "--gamma", "1"];

fn efrlab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_efrlab"))
        .env_remove("EFRLAB_OUT")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_and_config_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&efrlab(tmp.path(), &["--help"])), 0);
    assert_eq!(code(&efrlab(tmp.path(), &["frobnicate"])), 3);
    assert_eq!(code(&efrlab(tmp.path(), &["simulate", "--nu", "-1"])), 3);
    assert_eq!(code(&efrlab(tmp.path(), &["simulate", "--dt", "0.3", "--t-end", "1"])), 3);
    assert_eq!(code(&efrlab(tmp.path(), &["simulate", "--efr", "adaptive", "--law", "fb"])), 3);
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[flow]\nnu = \"fast\"\n").unwrap();
    assert_eq!(code(&efrlab(tmp.path(), &["simulate", "-c", cfg.to_str().unwrap()])), 3);
}

#[test]
fn missing_files_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    assert_eq!(code(&efrlab(tmp.path(), &["simulate", "-c", missing.to_str().unwrap()])), 4);
    let mut args = vec!["rom", "--basis", "/nonexistent/basis.bin"];
    args.extend_from_slice(SMALL);
    assert_eq!(code(&efrlab(tmp.path(), &args)), 4);
}

#[test]
fn newton_failure_exits_2_and_keeps_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--newton-max-iters", "1", "--newton-tol", "1e-300", "--dir", "fail"];
    args.extend_from_slice(SMALL);
    let o = efrlab(tmp.path(), &args);
    assert_eq!(code(&o), 2);
    let summary = fs::read_to_string(tmp.path().join("fail/summary.txt")).unwrap();
    assert!(summary.contains("Newton diverged"));
}

#[test]
fn mesh_info_reports_coarse_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = efrlab(tmp.path(), &["mesh", "info"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("N_u         2388"), "{s}");
    assert!(s.contains("N_p         324"), "{s}");
    let file = tmp.path().join("m.txt");
    assert_eq!(code(&efrlab(tmp.path(), &["mesh", "gen", "-o", file.to_str().unwrap()])), 0);
    let o = efrlab(tmp.path(), &["mesh", "info", "--mesh-file", file.to_str().unwrap()]);
    assert_eq!(stdout(&o), s);
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[flow]\nnu = 0.5\ndt = 0.01\nt_end = 0.03\n[control]\nlaw = \"fa\"\ngamma = 2.0\n[output]\ndir = \"fromfile\"\n").unwrap();
    let o = efrlab(tmp.path(), &["simulate", "-c", cfg.to_str().unwrap(), "--nu", "0.25"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let echo = fs::read_to_string(tmp.path().join("fromfile/config.toml")).unwrap();
    assert!(echo.contains("nu = 0.25"), "{echo}");
    assert!(echo.contains("law = \"fa\""), "{echo}");
    let series = fs::read_to_string(tmp.path().join("fromfile/series.csv")).unwrap();
    assert_eq!(series.lines().count(), 1 + 4);
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--dir", "envrun"];
    args.extend_from_slice(SMALL);
    let o = Command::new(env!("CARGO_BIN_EXE_efrlab")).env("EFRLAB_OUT", tmp.path()).args(&args).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("envrun/series.csv").exists());
}

#[test]
fn simulate_pod_rom_report_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let mut args = vec!["simulate", "--dir", "fom"];
    args.extend_from_slice(SMALL);
    assert_eq!(code(&efrlab(root, &args)), 0);
    for f in ["config.toml", "snapshots.bin", "series.csv", "series.gp", "summary.txt"] {
        assert!(root.join("fom").join(f).exists(), "{f}");
    }
    let snaps = root.join("fom/snapshots.bin");
    let mut args = vec!["pod", "--snapshots-file", snaps.to_str().unwrap(), "--r-u", "3", "--r-s", "2", "--r-p", "2"];
    args.extend_from_slice(SMALL);
    let o = efrlab(root, &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(root.join("pod/eigenvalues.csv").exists());
    let basis = root.join("pod/basis.bin");
    let mut args = vec!["rom", "--basis", basis.to_str().unwrap(), "--fom", snaps.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let o = efrlab(root, &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let series = fs::read_to_string(root.join("rom/series.csv")).unwrap();
    assert!(series.lines().next().unwrap().contains("err_u"));
    let csv = root.join("rom/series.csv");
    assert_eq!(code(&efrlab(root, &["report", csv.to_str().unwrap(), "--y", "err_u", "--log"])), 0);
    let gp = fs::read_to_string(root.join("rom/series.gp")).unwrap();
    assert!(gp.contains("logscale"));
    assert_eq!(code(&efrlab(root, &["report", csv.to_str().unwrap(), "--y", "nosuch"])), 3);
}

#[test]
fn reruns_are_bitwise_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        let mut args = vec!["simulate", "--dir", dir, "--efr", "on"];
        args.extend_from_slice(SMALL);
        assert_eq!(code(&efrlab(tmp.path(), &args)), 0);
    }
    for f in ["series.csv", "snapshots.bin"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn full_scale_dry_run_echoes_published_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let o = efrlab(tmp.path(), &["experiment", "exp2", "--scale", "full", "--dry-run"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    for needle in ["nu = 0.0001", "dt = 0.0004", "t_end = 4.0", "gamma = 0.0001", "tau = 0.006", "chi_factor = 5.0", "c_delta = 3.3166247903554"] {
        assert!(s.contains(needle), "{needle} missing in\n{s}");
    }
    let o = efrlab(tmp.path(), &["experiment", "exp3", "--scale", "full", "--dry-run"]);
    let s = stdout(&o);
    assert!(s.contains("snapshots = 1000") && s.contains("ranks = [[20, 1, 1]]"), "{s}");
    let o = efrlab(tmp.path(), &["experiment", "exp1", "--scale", "full", "--dry-run"]);
    let s = stdout(&o);
    for g in ["gamma = 50.0", "gamma = 25.0", "gamma = 5.0", "gamma = 1.0", "t_end = 8.0"] {
        assert!(s.contains(g), "{g}");
    }
    assert!(fs::read_dir(tmp.path()).unwrap().next().is_none(), "dry run writes nothing");
}

fn csv_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            csv_files(&p, out);
        } else if p.extension().is_some_and(|x| x == "csv") {
            out.push(p);
        }
    }
}

#[test]
fn desk_experiment_rerun_reproduces_every_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for root in [a.path(), b.path()] {
        let o = efrlab(root, &["experiment", "exp3"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let summary = fs::read_to_string(a.path().join("exp3_desk/summary.txt")).unwrap();
    assert!(summary.contains("PASS aefr filters exactly while E_U >= tau"), "{summary}");
    let mut files = Vec::new();
    csv_files(a.path(), &mut files);
    assert!(files.len() >= 5, "{files:?}");
    for f in files {
        let rel = f.strip_prefix(a.path()).unwrap();
        assert_eq!(fs::read(&f).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{}", rel.display());
    }
}

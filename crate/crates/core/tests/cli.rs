use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lsfem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsfem"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_writes_sampled_solution() {
    let dir = tempfile::tempdir().unwrap();
    let o = lsfem(dir.path(), &["solve", "--problem", "decay", "--degree", "3", "--elements", "10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,y_1,exact_1,abs_err");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 211);
    assert!(rows.windows(2).all(|w| w[0][0] <= w[1][0]));
    for r in &rows {
        assert!((r[2] - (-r[0]).exp()).abs() < 1e-15);
        assert!(r[3] < 1e-6);
    }
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("converged_by=direct"));
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["solve", "--problem", "logistic", "--elements", "12", "--multistart", "3", "--seed", "9"];
    let mut outs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let mut a = args.to_vec();
        a.extend(["--out", name]);
        assert_eq!(code(&lsfem(dir.path(), &a)), 0);
        outs.push(fs::read(dir.path().join(name)).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn usage_and_input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 6] = [
        &["solve"],
        &["frobnicate"],
        &["solve", "--problem", "nope"],
        &["solve", "--problem", "decay", "--degree", "x"],
        &["convergence", "--problem", "decay", "--elements", ""],
        &["solve", "--config", "missing.cfg"],
    ];
    for args in cases {
        let o = lsfem(dir.path(), args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
    }
    let o = lsfem(dir.path(), &["solve"]);
    assert!(stderr(&o).contains("problem"));
    let o = lsfem(dir.path(), &["solve", "--problem", "decay", "--degree", "x"]);
    assert!(stderr(&o).contains("--degree"));
    assert_eq!(code(&lsfem(dir.path(), &["--help"])), 0);
}

#[test]
fn unconverged_runs_exit_two_and_still_write() {
    let dir = tempfile::tempdir().unwrap();
    let o = lsfem(
        dir.path(),
        &["solve", "--problem", "logistic", "--elements", "20", "--max-iter", "1", "--out", "s.csv"],
    );
    assert_eq!(code(&o), 2);
    assert!(dir.path().join("s.csv").exists());

    let o = lsfem(
        dir.path(),
        &["adapt", "--problem", "logistic", "--tol", "1e-12", "--max-control-points", "30", "--out", "ad.csv"],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(dir.path().join("ad.csv").exists());
    let hist = fs::read_to_string(dir.path().join("ad_history.csv")).unwrap();
    assert!(hist.starts_with("round,n_control_points,worst_residual,objective\n"));
    assert!(hist.lines().count() >= 2);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "# decay run\nproblem = decay\nelements = 4\ndegree = 1\nout = from_cfg.csv\n",
    )
    .unwrap();
    let o = lsfem(dir.path(), &["solve", "--config", "run.cfg", "--out", "from_flag.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("from_flag.csv").exists());
    assert!(!dir.path().join("from_cfg.csv").exists());
    // 200 samples plus 5 breakpoints
    let csv = fs::read_to_string(dir.path().join("from_flag.csv")).unwrap();
    assert_eq!(csv.lines().count(), 206);

    fs::write(dir.path().join("bad.cfg"), "problem = decay\nelements = many\n").unwrap();
    let o = lsfem(dir.path(), &["solve", "--config", "bad.cfg"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("bad.cfg:2"), "{}", stderr(&o));
}

#[test]
fn convergence_writes_one_file_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let o = lsfem(
        dir.path(),
        &["convergence", "--problem", "decay", "--degree", "1:2", "--fdm", "rk4", "--out", "conv"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for label in ["k1", "k2", "rk4"] {
        let csv = fs::read_to_string(dir.path().join(format!("conv/convergence_{label}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 22);
        let slope: f64 = csv.lines().last().unwrap().strip_prefix("slope=").unwrap().parse().unwrap();
        assert!(slope > 1.5);
    }
}

#[test]
fn compare_fdm_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = lsfem(dir.path(), &["compare-fdm", "--problem", "fig1", "--elements", "30,300", "--out", "c.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "h,lsfem_l2,lsfem_max,rk3_l2,rk3_max,rk4_l2,rk4_max");
    assert_eq!(lines.count(), 2);
}

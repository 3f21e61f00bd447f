use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn codazzi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codazzi")).args(args).current_dir(dir).output().expect("spawn codazzi")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const EXAMPLE: &[&str] = &[
    "--metric",
    "catenoid",
    "--beta",
    "1.4142135",
    "--c",
    "1",
    "--delta",
    "0.5",
    "--eps",
    "1e-3",
    "--nx",
    "256",
    "--y0",
    "1",
];

#[test]
fn example_flags_dry_run() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["solve", "--dry-run"];
    args.extend_from_slice(EXAMPLE);
    let o = codazzi(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("delta = 0.5"));
    assert!(text.contains("beta = 1.4142135"));
}

#[test]
fn empty_input_prints_defaults() {
    let dir = TempDir::new().unwrap();
    let o = codazzi(dir.path(), &["solve", "--dry-run"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for key in codazzi_cli::config::KEYS {
        assert!(text.contains(&format!("{key} = ")), "missing {key}");
    }
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none(), "dry run wrote files");
}

#[test]
fn delta_at_or_beyond_sqrt_c_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o =
        codazzi(dir.path(), &["solve", "--delta", "1.5", "--metric", "catenoid", "--beta", "1.4142135", "--c", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("admissibility"), "{}", stderr(&o));
    let o = codazzi(dir.path(), &["region", "print", "--delta", "1", "--c", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_errors_carry_line_numbers() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.cfg"), "# comment\neps = 1e-2\nvelocity = 3\n").unwrap();
    let o = codazzi(dir.path(), &["solve", "--config", "run.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run.cfg:3"), "{}", stderr(&o));

    fs::write(dir.path().join("ok.cfg"), "eps = 1e-2\nnx = 64\n").unwrap();
    let o = codazzi(dir.path(), &["solve", "--config", "ok.cfg", "--nx", "128", "--dry-run"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("nx = 128") && stdout(&o).contains("eps = 0.01"));
}

#[test]
fn bad_flags_exit_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(codazzi(dir.path(), &["solve", "--bogus"]).status.code(), Some(1));
    assert_eq!(codazzi(dir.path(), &["solve", "--eps", "abc"]).status.code(), Some(1));
    assert_eq!(codazzi(dir.path(), &["solve", "--init", "perturb:x"]).status.code(), Some(1));
    assert_eq!(codazzi(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn positivity_loss_exits_two() {
    let dir = TempDir::new().unwrap();
    let o = codazzi(dir.path(), &["solve", "--v-floor", "5", "--nx", "32"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

fn solve_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut args = vec!["solve", "--out", "det", "--init", "random", "--seed", "7", "--levels", "4"];
    args.extend_from_slice(&EXAMPLE[..EXAMPLE.len() - 4]);
    let o = codazzi(dir, &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = codazzi(dir, &["immerse", "--from", "run:det", "--out", "det.obj"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn identical_configs_give_identical_files() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let fa = solve_outputs(a.path());
    let fb = solve_outputs(b.path());
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(
        names,
        ["det.obj", "det_level0.txt", "det_level1.txt", "det_level2.txt", "det_level3.txt", "det_log.csv"]
    );
    assert_eq!(fa, fb);
    let log = String::from_utf8(fa[5].1.clone()).unwrap();
    assert!(log.contains("# seed = 7") && log.contains("step,y,dy,max_lambda,violation"));
    let obj = String::from_utf8(fa[0].1.clone()).unwrap();
    assert!(obj.contains("# init = random"));
}

#[test]
fn solve_from_tabulated_metric_and_stored_level() {
    let dir = TempDir::new().unwrap();
    let o = codazzi(dir.path(), &["metric", "--points", "1025", "--out", "tab.txt"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o =
        codazzi(dir.path(), &["solve", "--metric", "tabulated:tab.txt", "--out", "tb", "--levels", "2", "--nx", "64"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("max region violation 0e0"), "{}", stdout(&o));
    let o = codazzi(
        dir.path(),
        &["solve", "--init", "file:tb_level0.txt", "--out", "again", "--levels", "2", "--nx", "64"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = codazzi(dir.path(), &["solve", "--init", "file:tb_level0.txt", "--nx", "32"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exact_catenoid_obj() {
    let dir = TempDir::new().unwrap();
    let o = codazzi(dir.path(), &["immerse", "--from", "exact-catenoid", "--out", "cat.obj"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("cat.obj")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 256 * 256);
    assert_eq!(text.lines().filter(|l| l.starts_with("vn ")).count(), 256 * 256);
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 2 * 255 * 255);
    assert_eq!(codazzi(dir.path(), &["immerse", "--from", "run:missing", "--out", "m.obj"]).status.code(), Some(1));
}

#[test]
fn sweep_writes_csv_with_summary() {
    let dir = TempDir::new().unwrap();
    let o = codazzi(dir.path(), &["sweep", "--nx", "64", "--eps-list", "1e-1,1e-2", "--out", "sw"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sw_sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "eps,dissipation,bound_estimate,visc_residual,r1,r2");
    assert_eq!(rows.len(), 3);
    assert!(csv.contains("# visc_residual_slope = "));
}

#[test]
fn quick_validate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = codazzi(dir.path(), &["validate", "--quick"]);
    let b = codazzi(dir.path(), &["validate", "--quick"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().filter(|l| l.starts_with("PASS") || l.starts_with("SKIP")).count(), 10);
}

#[test]
fn flipped_christoffels_fail_region_preservation() {
    let dir = TempDir::new().unwrap();
    let o = codazzi(dir.path(), &["validate", "--quick", "--inject-fault", "gamma-sign"]);
    assert_eq!(o.status.code(), Some(4));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.contains(" 3 invariant-region")).expect("criterion 3 line");
    assert!(line.starts_with("FAIL"), "{line}");
}

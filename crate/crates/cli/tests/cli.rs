//! End-to-end tests of the `sdfem` binary: exit codes, output schemas and
//! consistency between the run summary and the convergence table.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sdfem(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdfem"))
        .args(args)
        .arg("--out")
        .arg(out_dir)
        .output()
        .expect("binary runs")
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sdfem-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn stderr_line(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).trim().to_string()
}

#[test]
fn usage_and_config_errors_exit_one() {
    let out = Command::new(env!("CARGO_BIN_EXE_sdfem")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).contains("usage"));

    let dir = temp_dir("cfg");
    let out = sdfem(&["convergence", "params.gamma=-1"], &dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).contains("gamma"));

    let out = sdfem(&["convergence", "study.h_list=1/4,1/3"], &dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).contains("halving"));

    let out = sdfem(&["convergence", "nope.key=1"], &dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).contains("nope.key"));

    let out = sdfem(&["frobnicate"], &dir);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_three() {
    let dir = temp_dir("unwritable");
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("blocker");
    std::fs::write(&file, "x").unwrap();
    // the output directory path passes through a regular file
    let out = sdfem(
        &["ritz", "study.h_list=1/2,1/4"],
        &file.join("nested"),
    );
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_line(&out));
    assert!(!stderr_line(&out).is_empty());
}

#[test]
fn convergence_csv_schema_and_determinism() {
    let dir = temp_dir("csv");
    let args = [
        "convergence",
        "study.h_list=1/4,1/8",
        "time.t_end=0.25",
        "--jobs",
        "1",
    ];
    let out = sdfem(&args, &dir);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
    let csv = std::fs::read_to_string(dir.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "h,tau,err_uf_L2,rate_uf,err_up_L2,rate_up,err_phi_L2,rate_phi,wall_s"
    );
    assert_eq!(lines.len(), 3);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first.len(), 9);
    assert!(first[3].is_empty(), "first row has no rate");
    let second: Vec<&str> = lines[2].split(',').collect();
    assert!(!second[3].is_empty());
    let rate: f64 = second[3].parse().unwrap();
    assert!(rate > 1.5, "velocity rate {rate}");

    // numeric columns are reproducible across runs
    let dir2 = temp_dir("csv2");
    let out = sdfem(&args, &dir2);
    assert_eq!(out.status.code(), Some(0));
    let csv2 = std::fs::read_to_string(dir2.join("convergence.csv")).unwrap();
    for (a, b) in csv.lines().zip(csv2.lines()) {
        let fields_a: Vec<&str> = a.split(',').collect();
        let fields_b: Vec<&str> = b.split(',').collect();
        assert_eq!(fields_a.len(), fields_b.len());
        // wall-clock column necessarily differs
        assert_eq!(fields_a[..fields_a.len() - 1], fields_b[..fields_b.len() - 1]);
    }
}

#[test]
fn zero_run_writes_zero_vtk() {
    let dir = temp_dir("vtk");
    let out = sdfem(
        &["run", "case=zero", "run.n=4", "time.tau=0.5"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
    let vtk = std::fs::read_to_string(dir.join("fields.vtk")).unwrap();
    let mut lines = vtk.lines();
    assert_eq!(lines.next().unwrap(), "# vtk DataFile Version 2.0");
    let _title = lines.next().unwrap();
    assert_eq!(lines.next().unwrap(), "ASCII");
    assert_eq!(lines.next().unwrap(), "DATASET UNSTRUCTURED_GRID");
    assert!(vtk.contains("POINTS 45 double"));
    assert!(vtk.contains("CELLS 64 256"));
    assert!(vtk.contains("CELL_TYPES 64"));
    assert!(vtk.contains("VECTORS u_f double"));
    assert!(vtk.contains("SCALARS phi_p double 1"));
    // all velocity samples are zero for the zero case
    let u_f_block: Vec<&str> = vtk
        .split("VECTORS u_f double\n")
        .nth(1)
        .unwrap()
        .lines()
        .take(45)
        .collect();
    for line in u_f_block {
        for v in line.split(' ') {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn run_summary_matches_convergence_row() {
    let dir = temp_dir("summary");
    let out = sdfem(&["run", "run.n=8"], &dir);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
    let summary = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    let field = |name: &str| -> f64 {
        summary
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{name}=")))
            .unwrap_or_else(|| panic!("{name} missing in summary"))
            .parse()
            .unwrap()
    };
    let (uf, up, phi) = (
        field("err_uf_L2"),
        field("err_up_L2"),
        field("err_phi_L2"),
    );

    let dir2 = temp_dir("summary-conv");
    let out = sdfem(&["convergence", "study.h_list=1/4,1/8"], &dir2);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir2.join("convergence.csv")).unwrap();
    let row: Vec<&str> = csv
        .lines()
        .find(|l| l.starts_with("0.125,"))
        .unwrap()
        .split(',')
        .collect();
    let parse = |s: &str| -> f64 { s.parse().unwrap() };
    assert!((parse(row[2]) - uf).abs() <= 1e-12, "{} vs {uf}", row[2]);
    assert!((parse(row[4]) - up).abs() <= 1e-12);
    assert!((parse(row[6]) - phi).abs() <= 1e-12);
}

#[test]
fn ritz_mode_writes_rate_table() {
    let dir = temp_dir("ritz");
    let out = sdfem(&["ritz", "study.h_list=1/4,1/8,1/16"], &dir);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
    let csv = std::fs::read_to_string(dir.join("ritz.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "h,err_uf_L2,rate_uf,err_up_L2,rate_up,err_phi_L2,rate_phi,wall_s"
    );
    assert_eq!(lines.len(), 4);
    let last: Vec<&str> = lines[3].split(',').collect();
    let rate_uf: f64 = last[2].parse().unwrap();
    let rate_phi: f64 = last[6].parse().unwrap();
    assert!(rate_uf > 1.85 && rate_uf < 2.15);
    assert!(rate_phi > 0.9 && rate_phi < 1.1);
}

#[test]
fn config_file_and_env_output_dir() {
    let dir = temp_dir("cfgfile");
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("run.cfg");
    std::fs::write(
        &config_path,
        "# sample configuration\ncase = zero\nrun.n = 4\ntime.tau = 0.5\ntime.t_end = 1\n",
    )
    .unwrap();
    let out_env = dir.join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_sdfem"))
        .args(["run", "--config"])
        .arg(&config_path)
        .env("SDFEM_OUT_DIR", &out_env)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
    assert!(out_env.join("fields.vtk").exists());
    let summary = std::fs::read_to_string(out_env.join("summary.txt")).unwrap();
    assert!(summary.contains("case=zero"));
    assert!(summary.contains("steps=2"));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn srbd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srbd")).args(args).current_dir(cwd).env("SRBD_LOG", "warn").output().unwrap()
}

fn scenario(name: &str) -> String {
    let p: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    p.canonicalize().unwrap().display().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn run_then_check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = srbd(&["run", &scenario("standing"), "--out-dir", "st"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let dir = tmp.path().join("st");
    for f in ["trajectory.csv", "report.json", "torques.csv", "collisions.csv"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    assert_eq!(report(&dir)["solve"]["status"], "converged");
    let check = srbd(&["check", "st/trajectory.csv", "--config", &scenario("standing"), "--out-dir", "chk"], tmp.path());
    assert_eq!(code(&check), 0, "{}", stderr(&check));
    assert_eq!(report(&tmp.path().join("chk"))["validation"]["passed"], true);
}

fn edit_field(path: &Path, row: usize, column: &str, f: impl Fn(f64) -> String) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let col = lines[0].split(',').position(|h| h == column).unwrap();
    let mut fields: Vec<String> = lines[row].split(',').map(String::from).collect();
    fields[col] = f(fields[col].parse().unwrap());
    lines[row] = fields.join(",");
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn check_flags_edited_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&srbd(&["run", &scenario("standing"), "--out-dir", "st"], tmp.path())), 0);
    let traj = tmp.path().join("st/trajectory.csv");
    let original = std::fs::read_to_string(&traj).unwrap();

    edit_field(&traj, 5, "LF_p_z", |z| format!("{:.16e}", z + 0.05));
    let out = srbd(&["check", traj.to_str().unwrap(), "--config", &scenario("standing")], tmp.path());
    assert_eq!(code(&out), 2);
    let failures = report(&tmp.path().join("st"))["validation"]["failures"].to_string();
    assert!(failures.contains("stance_terrain"), "{failures}");

    std::fs::write(&traj, &original).unwrap();
    edit_field(&traj, 3, "RH_f_z", |_| "NaN".into());
    let out = srbd(&["check", traj.to_str().unwrap(), "--config", &scenario("standing")], tmp.path());
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("schema error at row 4, column 37"), "{}", stderr(&out));
}

#[test]
fn flat_crawl_without_polytope_fails_torque_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = srbd(&["run", &scenario("flat_crawl"), "--no-polytope", "--out-dir", "fc"], tmp.path());
    assert_eq!(code(&out), 2);
    let r = report(&tmp.path().join("fc"));
    assert_eq!(r["constraints"]["polytope"], false);
    assert!(r["validation"]["failures"].to_string().contains("torque"));
    let out = srbd(&["run", &scenario("flat_crawl"), "--out-dir", "fc"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn batch_mode_writes_one_directory_per_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = srbd(&["run", &scenario("standing"), &scenario("flat_crawl"), "--jobs", "2", "--out-dir", "batch"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(tmp.path().join("batch/standing/report.json").is_file());
    assert!(tmp.path().join("batch/flat_crawl/report.json").is_file());
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn polytope_dump_grids() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&srbd(&["polytope-dump", "--l-count", "10", "--alpha-count", "5", "--out-dir", "grid"], tmp.path())), 0);
    let errors = csv_rows(&tmp.path().join("grid/polytope_errors.csv"));
    assert_eq!(errors.len(), 51);
    assert_eq!(csv_rows(&tmp.path().join("grid/polytopes.csv")).len(), 1 + 50 * 2 * 4);

    assert_eq!(code(&srbd(&["polytope-dump", "--l-count", "0", "--out-dir", "empty"], tmp.path())), 0);
    for f in ["polytopes.csv", "polytope_errors.csv"] {
        let rows = csv_rows(&tmp.path().join("empty").join(f));
        assert_eq!(rows.len(), 1, "{f}");
    }

    assert_eq!(code(&srbd(&["polytope-dump", "--sample", "0.5,0", "--leg", "LH", "--out-dir", "nominal"], tmp.path())), 0);
    let rows = csv_rows(&tmp.path().join("nominal/polytope_errors.csv"));
    let row_error: f64 = rows[1][5].parse().unwrap();
    assert!(row_error < 1e-9, "{row_error}");
}

#[test]
fn jacobian_check_passes_on_bundled_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = srbd(&["jacobian-check", &scenario("pallet10_foot_radius_and_shin"), "--samples", "2", "--out-dir", "jc"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let reports: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("jc/jacobians.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 2);
}

#[test]
fn bad_input_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "schema_version = 7\nname = \"x\"\n").unwrap();
    let out = srbd(&["run", "bad.toml"], tmp.path());
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("schema_version"));
    assert_eq!(code(&srbd(&["run", "missing.toml"], tmp.path())), 3);
    assert_eq!(code(&srbd(&["frobnicate"], tmp.path())), 3);
    assert_eq!(code(&srbd(&["--help"], tmp.path())), 0);
}

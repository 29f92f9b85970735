use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_abc-optimal");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn smc_config(out_dir: &Path, extra: &str) -> String {
    format!(
        "[smc]\nmodel = \"gaussian_mean\"\nschedule = [2.0, 1.0, 0.5]\nn_particles = 300\nout_dir = {:?}\n{extra}",
        out_dir.to_str().unwrap()
    )
}

#[test]
fn table1_case_one_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let out = run(&["table1", "--case", "I", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let (header, rows) = read_csv(&csv);
    assert_eq!(header, ["case", "scheme", "A", "B", "omega", "est_error"]);
    assert_eq!(rows.len(), 5);
}

#[test]
fn table1_exit_status_reflects_worst_cell() {
    let out = run(&["table1"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    // the Case III omega cells of the bounded and optimal rows sit just outside ±0.05
    assert_eq!(code(&out), 1, "{stdout}");
    assert!(stdout.contains('!'));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&["table1", "--case", "IV"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let out = run(&["curves", "--case", "I", "--lo", "-100", "--hi", "0", "--n", "5", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let out = run(&["surface", "--ndim", "2", "--ref", "prior", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn curves_order_at_the_peak_and_in_the_tail() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let out = run(&["curves", "--case", "I", "--lo", "-6", "--hi", "6", "--n", "121", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let (header, rows) = read_csv(&csv);
    assert_eq!(header, ["theta", "posterior", "kde", "q0", "q_bounded", "q_optimal"]);
    let at = |x: f64| -> Vec<f64> {
        rows.iter()
            .map(|r| r.iter().map(|v| v.parse().unwrap()).collect::<Vec<f64>>())
            .find(|r| (r[0] - x).abs() < 1e-9)
            .unwrap()
    };
    let peak = at(0.0);
    assert!(peak[5] > peak[4] && peak[4] > peak[3] && peak[3] > peak[2], "{peak:?}");
    let tail = at(6.0);
    assert!(tail[5] > tail[1], "{tail:?}");

    let out = run(&["curves", "--case", "II", "--lo", "-1", "--hi", "1", "--n", "3", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let (_, rows) = read_csv(&csv);
    let mid: Vec<f64> = rows[1].iter().map(|v| v.parse().unwrap()).collect();
    assert!(mid.iter().skip(1).all(|v| v.is_finite() && *v > 0.0), "{mid:?}");
}

fn surface(ndim: &str, reference: &str, path: &Path) -> Vec<(f64, f64, f64, bool)> {
    let out = run(&["surface", "--ndim", ndim, "--ref", reference, "--n-mu", "21", "--n-sigma", "20", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let (header, rows) = read_csv(path);
    assert_eq!(header, ["mu_pi", "sigma_pi", "n_theta", "a", "admissible", "a_below_one"]);
    rows.iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap(), r[3].parse().unwrap(), r[5] == "true"))
        .collect()
}

#[test]
fn surface_files_factorize_and_flag_the_corner() {
    let dir = tempfile::tempdir().unwrap();
    let three = surface("3", "kde", &dir.path().join("k3.csv"));
    let ten = surface("10", "kde", &dir.path().join("k10.csv"));
    for (a, b) in three.iter().zip(&ten) {
        if a.2.is_finite() && b.2.is_finite() {
            let expected = a.2.powf(10.0 / 3.0);
            assert!(((b.2 - expected) / expected).abs() < 1e-9, "{a:?} {b:?}");
        }
    }
    let post = surface("3", "posterior", &dir.path().join("p3.csv"));
    let origin = post.iter().find(|r| r.0 == 0.0 && r.1 == 1.0).unwrap();
    assert!((origin.2 - 1.0).abs() < 1e-12 && !origin.3);
    assert!(post.iter().any(|r| r.3 && r.0 == 10.0 && r.1 == 1.0));
    assert!(post.iter().filter(|r| r.3).all(|r| r.1 < 1.5));
}

#[test]
fn smc_refuses_to_run_without_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &smc_config(&dir.path().join("out"), "scheme = \"prior\""));
    assert_eq!(code(&run(&["smc", "--config", &cfg])), 2);
    assert_eq!(code(&run(&["--allow-default-seed", "smc", "--config", &cfg])), 0);
}

#[test]
fn smc_writes_one_diagnostics_row_per_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), &smc_config(&out_dir, "scheme = \"prior\"\nseed = 5"));
    let out = run(&["smc", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("prior_diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["iterations"].as_array().unwrap().len(), 3);
    assert_eq!(diag["seed"], 5);
    for i in 0..3 {
        let (header, rows) = read_csv(&out_dir.join(format!("prior_population_{i}.csv")));
        assert_eq!(header, ["theta_0", "weight"]);
        assert_eq!(rows.len(), 300);
    }
}

#[test]
fn smc_outputs_repeat_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let mut snapshots = Vec::new();
    for tag in ["a", "b"] {
        let out_dir = dir.path().join(tag);
        let cfg_dir = dir.path().join(format!("cfg_{tag}"));
        std::fs::create_dir_all(&cfg_dir).unwrap();
        let cfg = write_config(&cfg_dir, &smc_config(&out_dir, "schemes = [\"beaumont_kde\", \"optimal\"]"));
        assert_eq!(code(&run(&["--seed", "3", "smc", "--config", &cfg])), 0);
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        snapshots.push(files);
    }
    assert_eq!(snapshots[0].len(), 8);
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn smc_stall_exits_nonzero_and_keeps_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let body = format!(
        "[smc]\nmodel = \"gaussian_mean\"\nschedule = [1.0, 1e-9]\nn_particles = 100\nmax_proposals_per_target = 2\n\
         scheme = \"prior\"\nout_dir = {:?}\n",
        out_dir.to_str().unwrap()
    );
    let cfg = write_config(dir.path(), &body);
    let out = run(&["--seed", "1", "smc", "--config", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("stalled at epsilon = 0.000000001 (iteration 1)"));
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("prior_diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["iterations"].as_array().unwrap().len(), 1);
    assert!(diag["error"].is_string());
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[smc]\nmodel = \"gaussian_mean\"\nschedule = [0.5, 1.0]\n");
    assert_eq!(code(&run(&["--seed", "1", "smc", "--config", &cfg])), 2);
    assert_eq!(code(&run(&["--seed", "1", "smc", "--config", "/nonexistent.toml"])), 2);
}

#[test]
fn verify_passes_and_negative_control_fails() {
    assert_eq!(code(&run(&["verify"])), 2);
    let out = run(&["--seed", "4", "verify"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 7);
    let out = run(&["--seed", "4", "verify", "--corrupt-a-bar"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 1);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL") && l.contains("holder")), "{stdout}");
}

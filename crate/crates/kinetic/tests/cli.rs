use std::path::Path;
use std::process::{Command, Output};

use kinetic::table::parse_rows;

fn kinetic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinetic")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_suite_exits_two() {
    let o = kinetic(&["verify", "--suite", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown suite"));
}

#[test]
fn no_interior_minimizer_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"model": {"type": "deterministic", "weights": [1, 1]}}"#);
    let o = kinetic(&["spectral", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no interior minimizer"));
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"model": {"type": "kac_angle"}, "replicate": 5}"#);
    let o = kinetic(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field"));
}

#[test]
fn missing_config_exits_two() {
    let o = kinetic(&["simulate", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn boundary_with_mismatched_tail_index_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model": {"type": "power_uniform", "n": 2, "p": 1.2071067811865475},
            "law": {"type": "finite_mean_degenerate", "mean": 1},
            "times": [1, 2], "xi_grid": {"min": -1, "max": 1, "points": 5}, "replicates": 100}"#,
    );
    let o = kinetic(&["verify", "--suite", "boundary", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tail index"));
}

#[test]
fn spectral_writes_phi_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kinetic(&["spectral", "--out", out, "--label", "pu"]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let gamma: f64 = stdout.lines().next().unwrap().split(' ').nth(1).unwrap().parse().unwrap();
    assert!((gamma - 1.0).abs() < 1e-9);
    let text = std::fs::read_to_string(dir.path().join("spectral_pu.csv")).unwrap();
    assert!(text.starts_with("# kinetic "));
    assert!(text.contains("# config_sha256: ") && text.contains("# seed: "));
    let rows = parse_rows(&text);
    assert_eq!(rows[0], vec!["0.0", "1.0", "inf"]);
}

#[test]
fn simulate_schema_and_time_zero_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kinetic(&["simulate", "--out", out, "--label", "s", "--times", "0,1,2", "--replicates", "2000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("simulate_s.csv")).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with(
        "t,mean_M,stderr_M,mean_D,stderr_D,mean_secmom,median_sqrt_t_max,n_ok,n_aborted"
    ));
    let rows = parse_rows(&text);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][1], "1.0");
    assert_eq!(rows[0][7], "2000");
    let secmom: f64 = rows[2][5].parse().unwrap();
    let se: f64 = rows[2][9].parse().unwrap();
    assert!((secmom - 2.0 * (2.0 - 2f64.sqrt())).abs() <= 4.0 * se);
}

#[test]
fn all_aborted_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model": {"type": "power_uniform", "n": 2, "p": 2.5}, "particle_cap": 2}"#,
    );
    let o = kinetic(&["simulate", "--config", &cfg, "--times", "30", "--replicates", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("aborted"));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "4", "8"] {
        let out = dir.path().join(workers);
        let out = out.to_str().unwrap();
        let runs: [&[&str]; 4] = [
            &["verify", "--suite", "yule", "--replicates", "20000"],
            &["simulate", "--times", "1,3", "--replicates", "3000"],
            &["fixed-point", "--pool", "5000", "--iterations", "5"],
            &["ecf", "--replicates", "2000"],
        ];
        for args in runs {
            let mut full = args.to_vec();
            full.extend(["--workers", workers, "--out", out]);
            let o = kinetic(&full);
            assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        }
        let mut files: Vec<_> = std::fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        let contents: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
            .collect();
        outputs.push(contents);
    }
    assert!(outputs[0].len() >= 8);
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn seed_flag_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let read = |seed: &str| {
        let out = dir.path().join(seed);
        let o = kinetic(&["simulate", "--times", "1", "--replicates", "500", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        parse_rows(&std::fs::read_to_string(out.join("simulate_martingale.csv")).unwrap())
    };
    assert_ne!(read("1"), read("2"));
    assert_eq!(read("1"), read("1"));
}

#[test]
fn ecf_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kinetic(&["ecf", "--replicates", "500", "--times", "1", "--label", "e", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("ecf_e_t1.0.csv")).unwrap();
    assert!(text.contains("\nxi,re,im,stderr_re,stderr_im,n\n"));
    assert!(text.contains("# sampling: one independent (trajectory, initial values) pair per sample"));
    let rows = parse_rows(&text);
    assert_eq!(rows.len(), 401);
    assert_eq!(rows[200][0], "0.0");
    assert_eq!(rows[200][1], "1.0");
    assert!(rows.iter().all(|r| r[5] == "500"));
}

#[test]
fn ode_check_passes_at_small_scale() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kinetic(&["ode-check", "--replicates", "5000", "--times", "0.5,1", "--label", "o", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("ode-check_o.csv").exists());
    assert!(dir.path().join("ode-check_o_t0.5.csv").exists());
}

#[test]
fn fixed_point_sample_is_single_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kinetic(&["fixed-point", "--pool", "2000", "--iterations", "3", "--label", "f", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("fixed-point_f_dinf.csv")).unwrap();
    assert!(text.contains("# route: fixed-point-iteration"));
    let rows = parse_rows(&text);
    assert_eq!(rows.len(), 2000);
    assert!(rows.iter().all(|r| r.len() == 1 && r[0].parse::<f64>().unwrap() >= 0.0));
}

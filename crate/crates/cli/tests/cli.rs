use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn coopnet(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("experiment.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_coopnet"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let Ok(entries) = fs::read_dir(dir.join("out")) else {
        return Vec::new();
    };
    let mut files: Vec<_> = entries.map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

/// Data lines (header row first) without the `#` block.
fn data(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn point_query_reproduces_good_anchor() {
    let dir = TempDir::new().unwrap();
    let out = coopnet(
        dir.path(),
        "kind = \"point\"\nengines = [\"analytic\"]\n",
        &[],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = data(&dir.path().join("out/point.csv"));
    let omega_col = rows[0].iter().position(|c| c == "omega").unwrap();
    let omega: f64 = rows[1][omega_col].parse().unwrap();
    assert!((omega - 0.45830).abs() / 0.45830 < 1e-4, "{omega}");
}

#[test]
fn header_records_digest_seed_and_version() {
    let dir = TempDir::new().unwrap();
    let out = coopnet(
        dir.path(),
        "kind = \"point\"\nengines = [\"analytic\"]\n",
        &["--seed", "99"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("out/point.csv")).unwrap();
    assert!(text.contains("# seed = 99\n"));
    assert!(text.contains(&format!(
        "# coopnet_version = {}\n",
        env!("CARGO_PKG_VERSION")
    )));
    let digest = text
        .lines()
        .find_map(|l| l.strip_prefix("# config_sha256 = "))
        .unwrap();
    assert_eq!(digest.len(), 64);
}

#[test]
fn relay_on_destination_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = coopnet(
        dir.path(),
        "kind = \"point\"\nengines = [\"analytic\"]\n[scenario]\nrelays = [[1.0, 0.0]]\n",
        &[],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("scenario.relays"), "{}", stderr(&out));
    assert!(csv_files(dir.path()).is_empty());
}

#[test]
fn unknown_key_is_named() {
    let dir = TempDir::new().unwrap();
    let out = coopnet(
        dir.path(),
        "kind = \"point\"\n[params]\nthetta = 1.0\n",
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("params"), "{}", stderr(&out));
}

#[test]
fn empty_trial_budget_is_rejected() {
    let dir = TempDir::new().unwrap();
    let config = "kind = \"point\"\nengines = [\"montecarlo\"]\n";
    let out = coopnet(dir.path(), config, &["--trials", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("trials"), "{}", stderr(&out));
    assert!(csv_files(dir.path()).is_empty());

    let out = coopnet(dir.path(), "kind = \"acceptance\"\n", &["--trials", "0"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(csv_files(dir.path()).is_empty());
}

#[test]
fn singular_mrc_layout_is_numerical_unless_nudged() {
    // g_rd equals g_sd, so eta has no finite value.
    let config = "kind = \"point\"\nengines = [\"analytic\"]\n\
                  [params]\ncombiners = [\"mrc\"]\n[scenario]\nrelays = [[1.0, 1.0]]\n";
    let dir = TempDir::new().unwrap();
    let out = coopnet(dir.path(), config, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("(1, 1)"), "{}", stderr(&out));
    assert!(csv_files(dir.path()).is_empty());

    let out = coopnet(dir.path(), config, &["--eta-nudge"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn corrupted_eta_fails_acceptance() {
    let dir = TempDir::new().unwrap();
    let config = "kind = \"acceptance\"\n[acceptance]\ncriteria = [2]\neta_sign_fault = true\n";
    let out = coopnet(dir.path(), config, &[]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("[FAIL] criterion 2"));

    let clean = "kind = \"acceptance\"\n[acceptance]\ncriteria = [2]\n";
    let out = coopnet(dir.path(), clean, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn cluster_sweep_table_shape() {
    let dir = TempDir::new().unwrap();
    let config = "kind = \"cluster_sweep\"\nengines = [\"analytic\"]\n";
    let out = coopnet(dir.path(), config, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let files = csv_files(dir.path());
    assert_eq!(files.len(), 2, "{files:?}");
    for f in &files {
        let rows = data(f);
        assert_eq!(rows.len(), 42);
        assert!(rows.iter().all(|r| r.len() == 13));
        assert_eq!(rows[0][0], "position");
        for r in &rows[1..] {
            for v in &r[1..] {
                let v: f64 = v.parse().unwrap();
                assert!(v.is_finite() && v >= 0.0);
            }
        }
    }
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let config = "kind = \"point\"\nengines = [\"montecarlo\", \"conditional\"]\n\
                  trials = 20000\nreplicates = 200\n\
                  [params]\npresets = [\"harsh\"]\ncombiners = [\"sc\", \"mrc\"]\n\
                  [scenario]\nrelays = [[0.3, 0.1], [0.6, -0.2]]\n";
    let mut outputs = Vec::new();
    for workers in ["1", "2", "0"] {
        let dir = TempDir::new().unwrap();
        let out = coopnet(dir.path(), config, &["--workers", workers]);
        assert!(out.status.success(), "{}", stderr(&out));
        outputs.push(fs::read(dir.path().join("out/point.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn attempt_cdf_is_monotone() {
    let dir = TempDir::new().unwrap();
    let config = "kind = \"retransmission_cdf\"\nreplicates = 200\n\
                  [params]\npresets = [\"harsh\"]\n[retransmission]\nt_max = 6\n";
    let out = coopnet(dir.path(), config, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let files = csv_files(dir.path());
    assert_eq!(files.len(), 1);
    let rows = data(&files[0]);
    assert_eq!(rows.len(), 7);
    let cdf_cols: Vec<usize> = (0..rows[0].len())
        .filter(|&j| rows[0][j].starts_with("cdf_"))
        .collect();
    assert!(!cdf_cols.is_empty());
    for j in cdf_cols {
        let col: Vec<f64> = rows[1..].iter().map(|r| r[j].parse().unwrap()).collect();
        assert!(col.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{col:?}");
        assert!(col.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

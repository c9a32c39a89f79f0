use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coopsim_core::experiments::{ExperimentConfig, HostSpace};
use tempfile::TempDir;

fn coopsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coopsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("COOPSIM_SEED")
        .output()
        .unwrap()
}

fn write_config(dir: &TempDir, name: &str, config: &ExperimentConfig) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, config.to_toml().unwrap()).unwrap();
    path
}

fn small_line() -> ExperimentConfig {
    ExperimentConfig {
        a_grid: vec![1.0, 2.0],
        replicates: 10,
        bound_replicates: 500,
        ..ExperimentConfig::new(HostSpace::Cube { dimension: 1 }, 1_000.0, 0.6)
    }
}

fn lines(bytes: &[u8]) -> Vec<String> {
    String::from_utf8(bytes.to_vec())
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn sweep_writes_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "c.toml", &small_line());
    let out = dir.path().join("sweep.csv");
    let o = coopsim(
        dir.path(),
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = lines(&std::fs::read(&out).unwrap());
    assert_eq!(
        rows[0],
        "a,v,replicates,invaded,fraction,stderr,pi_lower,pi_upper"
    );
    assert_eq!(rows.len(), 3);
    // Summary goes to stdout when the CSV goes to a file.
    assert!(!o.stdout.is_empty());
}

#[test]
fn csv_goes_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "c.toml", &small_line());
    let o = coopsim(dir.path(), &["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(lines(&o.stdout)[0].starts_with("a,v,"));
    assert!(!o.stderr.is_empty());
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = coopsim(dir.path(), &["sweep", "--config", "nope.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = coopsim(dir.path(), &["sweep"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "space = \"sphere2\"\nintensity = 100.0\nbeta = 0.5\nbogus = 1\n",
    )
    .unwrap();
    let o = coopsim(dir.path(), &["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn beta_outside_unit_interval_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "c.toml", &small_line());
    for beta in ["1.5", "0", "1"] {
        let o = coopsim(
            dir.path(),
            &["validate", "--config", cfg.to_str().unwrap(), "--beta", beta],
        );
        assert_eq!(o.status.code(), Some(2), "beta {beta}");
    }
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "c.toml", &small_line());
    let out = dir.path().join("missing").join("out.csv");
    let o = coopsim(
        dir.path(),
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn no_temporary_files_are_left_behind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "c.toml", &small_line());
    let out = dir.path().join("out.csv");
    for _ in 0..2 {
        let o = coopsim(
            dir.path(),
            &[
                "sweep",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
        );
        assert!(o.status.success());
    }
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["c.toml", "out.csv"]);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "c.toml", &small_line());
    let run = |seed: &str| {
        coopsim(
            dir.path(),
            &["sweep", "--config", cfg.to_str().unwrap(), "--seed", seed],
        )
        .stdout
    };
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));
}

#[test]
fn seed_precedence_flag_then_config_then_env() {
    let dir = tempfile::tempdir().unwrap();
    let plain = write_config(&dir, "plain.toml", &small_line());
    let seeded = write_config(
        &dir,
        "seeded.toml",
        &ExperimentConfig {
            base_seed: Some(11),
            ..small_line()
        },
    );
    let run = |cfg: &Path, flag: Option<&str>, env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_coopsim"));
        cmd.args(["sweep", "--config", cfg.to_str().unwrap()])
            .current_dir(dir.path());
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        match env {
            Some(e) => cmd.env("COOPSIM_SEED", e),
            None => cmd.env_remove("COOPSIM_SEED"),
        };
        let o = cmd.output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    let eleven = run(&plain, Some("11"), None);
    assert_eq!(run(&seeded, None, Some("12")), eleven);
    assert_eq!(run(&plain, None, Some("11")), eleven);
    assert_eq!(
        run(&seeded, Some("12"), Some("11")),
        run(&plain, Some("12"), None)
    );
}

#[test]
fn bad_env_seed_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "c.toml", &small_line());
    let o = Command::new(env!("CARGO_BIN_EXE_coopsim"))
        .args(["sweep", "--config", cfg.to_str().unwrap()])
        .env("COOPSIM_SEED", "twelve")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dbpc_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = coopsim(
        dir.path(),
        &["dbpc", "--a", "2.0", "--replicates", "2000", "--seed", "3"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = lines(&o.stdout);
    assert_eq!(
        rows[0],
        "a,z0,threshold,replicates,survived,died,undecided,pi_hat,stderr"
    );
    assert_eq!(rows.len(), 2);
    let fields: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(fields[2], "10000");
    assert_eq!(fields[3], "2000");
    let pi: f64 = fields[7].parse().unwrap();
    assert!((0.0..=1.0).contains(&pi));
}

#[test]
fn dbpc_rejects_nonpositive_a() {
    let dir = tempfile::tempdir().unwrap();
    let o = coopsim(dir.path(), &["dbpc", "--a", "0.0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_one_with_a_single_parasite_lasts_one_generation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "c.toml", &small_line());
    let o = coopsim(
        dir.path(),
        &["run-one", "--config", cfg.to_str().unwrap(), "--v", "1"],
    );
    assert!(o.status.success());
    let rows = lines(&o.stdout);
    assert_eq!(rows[0], "g,new_infected,cumulative,box_distance,cosame,codiff");
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("1,0,1,"));
}

#[test]
fn time_and_wavefront_need_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "c.toml",
        &ExperimentConfig {
            a_grid: vec![2.0],
            replicates: 5,
            ..ExperimentConfig::new(HostSpace::Complete, 1e4, 0.5)
        },
    );
    for cmd in ["time", "wavefront", "validate"] {
        let o = coopsim(dir.path(), &[cmd, "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
    }
}

#[test]
fn time_rows_respect_the_lower_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "c.toml",
        &ExperimentConfig {
            a_grid: vec![3.0],
            replicates: 50,
            successes: Some(3),
            ..ExperimentConfig::new(HostSpace::Cube { dimension: 1 }, 2_000.0, 0.6)
        },
    );
    let o = coopsim(
        dir.path(),
        &["time", "--config", cfg.to_str().unwrap(), "--seed", "1"],
    );
    assert!(o.status.success());
    let rows = lines(&o.stdout);
    assert_eq!(rows[0], "replicate,T,T_lower,T_upper_base,T_minus_initial");
    assert_eq!(rows.len(), 4);
    for r in &rows[1..] {
        let f: Vec<&str> = r.split(',').collect();
        let (t, lower): (u64, u64) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        assert!(t >= lower, "{r}");
    }
}

//! End-to-end CLI behavior: exit codes, catalog listing, snapshot
//! round-trips through the `from_file` initial condition, and output
//! determinism across thread counts.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nonlocal-lab"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("nonlocal_lab_cli").join(tag);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn catalog_lists_every_bundled_config() {
    let out = bin().arg("catalog").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for entry in nonlocal_lab::catalog::ENTRIES {
        assert!(text.contains(entry.name), "missing {}", entry.name);
    }
}

#[test]
fn catalog_write_materializes_runnable_configs() {
    let dir = temp_dir("catalog_write");
    let out = bin()
        .args(["catalog", "--write"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let config = dir.join("lp_inequality_1d.conf");
    assert!(config.exists());
    // shrink the trial count so this stays a smoke test
    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replace("verify.trials = 1000", "verify.trials = 20");
    std::fs::write(&config, text).unwrap();
    let run_out = temp_dir("catalog_write_run");
    let out = bin()
        .args(["verify-inequality", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&run_out)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(run_out.join("report.json").exists());
    assert!(run_out.join("summary.json").exists());
}

#[test]
fn malformed_config_exits_2_with_line_anchor() {
    let dir = temp_dir("malformed");
    let path = dir.join("bad.conf");
    std::fs::write(&path, "pipeline = simulate\ngrid.dim ==\n").unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.conf:2"), "stderr: {err}");
}

#[test]
fn unknown_key_exits_2() {
    let dir = temp_dir("unknown_key");
    let path = dir.join("typo.conf");
    std::fs::write(
        &path,
        "pipeline = constants\nconstants.dim = 1\nconstants.typo = 3\n",
    )
    .unwrap();
    let out = bin()
        .args(["constants", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("constants.typo"));
}

#[test]
fn pipeline_subcommand_mismatch_exits_2() {
    let dir = temp_dir("mismatch");
    let path = dir.join("c.conf");
    std::fs::write(&path, "pipeline = constants\n").unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_check_exits_1() {
    // an envelope slope limit that cannot hold (positive slope demanded)
    let dir = temp_dir("failcheck");
    let path = dir.join("fail.conf");
    let text = "\
pipeline = envelope
label = failcheck
grid.dim = 1
grid.L = 32
grid.n = 256
kernel.kind = box
kernel.R_sup = 1
kernel.height = 0.5
init.kind = gaussian
sim.horizon = 5
sim.sample_dt = 0.5
envelope.p_list = 2
envelope.slope_limit = -5
seed = 1
";
    std::fs::write(&path, text).unwrap();
    let out = bin()
        .args(["envelope", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL]"));
}

#[test]
fn snapshot_feeds_from_file_initial_condition() {
    let dir = temp_dir("snapshot");
    // write a field snapshot, then run a tiny simulation from it
    let grid = nonlocal_core::grid::GridSpec::new(1, 8.0, 64).unwrap();
    let field = nonlocal_core::grid::Field::from_fn(grid, |x| (-x[0] * x[0]).exp()).unwrap();
    let snap = dir.join("u0.csv");
    nonlocal_lab::field_io::write_field(&snap, &field).unwrap();
    let back = nonlocal_lab::field_io::read_field(&snap).unwrap();
    for (a, b) in field.values().iter().zip(back.values()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let path = dir.join("sim.conf");
    let text = format!(
        "pipeline = simulate\nlabel = snapshot_sim\ngrid.dim = 1\ngrid.L = 8\ngrid.n = 64\n\
         kernel.kind = box\nkernel.R_sup = 1\nkernel.height = 0.5\nequation = convolution\n\
         init.kind = from_file\ninit.path = {}\nsim.horizon = 1\nsim.sample_dt = 0.5\nseed = 3\n",
        snap.display()
    );
    std::fs::write(&path, text).unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("out/timeseries.csv").exists());
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let entry = nonlocal_lab::catalog::find("derivative_inequality_1d").unwrap();
    let mut outputs = Vec::new();
    for threads in [1usize, 4] {
        let out_dir = temp_dir(&format!("threads_{threads}"));
        let opts = nonlocal_lab::runner::Options {
            seed: None,
            out: Some(out_dir.clone()),
            threads,
        };
        nonlocal_lab::runner::run_config_text(entry.text, entry.name, &opts).unwrap();
        outputs.push(std::fs::read(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn seed_flag_overrides_config_seed() {
    let entry = nonlocal_lab::catalog::find("lp_inequality_1d").unwrap();
    let text = entry
        .text
        .replace("verify.trials = 1000", "verify.trials = 30");
    let run = |seed: Option<u64>, tag: &str| {
        let out_dir = temp_dir(tag);
        let opts = nonlocal_lab::runner::Options {
            seed,
            out: Some(out_dir.clone()),
            threads: 1,
        };
        nonlocal_lab::runner::run_config_text(&text, "seeded", &opts).unwrap();
        std::fs::read(out_dir.join("report.json")).unwrap()
    };
    let default = run(None, "seed_default");
    let same = run(None, "seed_default_again");
    let other = run(Some(99), "seed_other");
    assert_eq!(default, same);
    assert_ne!(default, other);
}

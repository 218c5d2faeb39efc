use std::fs;
use std::process::{Command, Output};

use singlap::harness::{format_csv, run_experiment, Experiment, ExperimentConfig};

fn singlap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singlap"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("spawn singlap")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn table2_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cone.csv");
    let out = singlap(&[
        "table2",
        "--t-values",
        "1e-1,1e-4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(
        text,
        "t,computed,scaled,predicted,abs_error,rel_error\n\
         1e-1,-1.110721,-0.351241,-1.110721,0.000000,0.000000\n\
         1e-4,-1.110721,-0.011107,-1.110721,0.000000,0.000000\n"
    );
    assert!(out.stdout.is_empty());
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for i in 0..2 {
        let path = dir.path().join(format!("mc{i}.csv"));
        let out = singlap(&[
            "mc",
            "--n-values",
            "1000,4000",
            "--replicates",
            "3",
            "--seed",
            "7",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        texts.push(fs::read(&path).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn outcome_independent_of_thread_count() {
    let mut cfg = ExperimentConfig::defaults(Experiment::McConvergence);
    cfg.sample_sizes = vec![5000, 20_000];
    cfg.replicates = 2;
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| format_csv(&run_experiment(&cfg).unwrap().rows))
    };
    assert_eq!(run(1), run(3));

    let mut cfg = ExperimentConfig::defaults(Experiment::Counterexample);
    cfg.quad.n_r = 400;
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| format_csv(&run_experiment(&cfg).unwrap().rows))
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(
        &conf,
        "experiment = table2\nt-values = 1e-1, 1e-2, 1e-3\nn-r = 200\n",
    )
    .unwrap();
    let out = singlap(&["--config", conf.to_str().unwrap(), "--t-values", "1e-2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("1e-2,-1.110721,"));
}

#[test]
fn argument_errors_exit_two() {
    for args in [
        vec!["table3"],
        vec!["table2", "--t-values", "1e-2,1e-1"],
        vec!["table2", "--trunc", "power:0.6"],
        vec!["table2", "--n-theta", "15"],
        vec!["curvature", "--metric", "torus"],
        vec!["table2", "--config", "/nonexistent/x.conf"],
        vec![],
    ] {
        let out = singlap(&args);
        assert_eq!(
            code(&out),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn unwritable_output_exits_two() {
    let out = singlap(&[
        "table2",
        "--t-values",
        "1e-2",
        "--out",
        "/nonexistent-dir/x.csv",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent-dir/x.csv"));
}

#[test]
fn check_flag_exit_codes() {
    let pass = singlap(&["table2", "--t-values", "1e-2,1e-4", "--check"]);
    assert_eq!(code(&pass), 0, "{}", String::from_utf8_lossy(&pass.stderr));
    assert!(String::from_utf8_lossy(&pass.stderr).contains("[PASS]"));

    let fail = singlap(&["counterexample", "--t-values", "1e-2,5e-3,2e-3", "--check"]);
    // Too few bandwidths for a rate fit is an argument error.
    assert_eq!(code(&fail), 2);

    let fail = singlap(&["table1", "--t-values", "1e-2,5e-4", "--check"]);
    assert_eq!(code(&fail), 4, "{}", String::from_utf8_lossy(&fail.stderr));
    assert!(String::from_utf8_lossy(&fail.stderr).contains("[FAIL]"));
}

#[test]
fn unconverged_quadrature_exits_three() {
    let out = singlap(&[
        "table1",
        "--t-values",
        "1e-3",
        "--n-theta",
        "16",
        "--n-r",
        "8",
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    // The row is still written.
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
}

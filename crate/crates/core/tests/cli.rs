use std::path::PathBuf;
use std::process::{Command, Output};

fn blas_pe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blas-pe")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn tmp(name: &str, contents: &str) -> PathBuf {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

#[test]
fn ablate_default_grid_has_thirty_cells() {
    let o = blas_pe(&["ablate", "gemm"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 30);
    assert!(rows.iter().all(|r| r.ends_with(',')), "no cell should carry an error");
}

#[test]
fn misaligned_gemm_is_a_shape_error() {
    let o = blas_pe(&["run", "gemm", "--n", "22"]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error[shape]: "), "{err}");
}

#[test]
fn tiles_b2_speedup_is_monotone_and_below_four() {
    let o = blas_pe(&["tiles", "--b", "2", "--n", "20,40,60,80,100"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let speedups: Vec<f64> =
        stdout(&o).lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert_eq!(speedups.len(), 5);
    assert!(speedups.windows(2).all(|w| w[1] >= w[0]), "{speedups:?}");
    assert!(speedups.iter().all(|&s| (1.0..4.0).contains(&s)), "{speedups:?}");
}

#[test]
fn output_is_byte_identical_across_runs() {
    let cfg = tmp("det.cfg", "gm_handshake = 4\n");
    let args = ["ablate", "gemv", "--n", "8,16", "--config", cfg.to_str().unwrap(), "--format", "json"];
    let a = blas_pe(&args);
    let b = blas_pe(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_flag_writes_the_report() {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("run.txt");
    let o = blas_pe(&["run", "--kernel", "ddot", "--n", "16", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("kernel = ddot"));
    assert!(text.contains("latency = "));
}

#[test]
fn trace_lists_issued_instructions() {
    let o = blas_pe(&["run", "daxpy", "--n", "4", "--trace"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let trace: Vec<&str> = out.lines().skip_while(|l| !l.starts_with("# trace")).skip(1).collect();
    assert!(!trace.is_empty());
    assert!(trace.iter().all(|l| l.split_whitespace().next().unwrap().parse::<u64>().is_ok()));
}

#[test]
fn input_files_replace_seeded_operands() {
    let x = tmp("x.txt", "1 4\n1 2 3 4\n");
    let y = tmp("y.txt", "4 1\n1\n1\n1\n1\n");
    let o = blas_pe(&[
        "run",
        "ddot",
        "--n",
        "4",
        "--input",
        &format!("x={}", x.display()),
        "--input",
        &format!("y={}", y.display()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let short = tmp("short.txt", "1 3\n1 2 3\n");
    let o = blas_pe(&["run", "ddot", "--n", "4", "--input", &format!("x={}", short.display())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[dimension]"));
}

#[test]
fn reassociation_overflow_is_a_numerical_error() {
    // Summed in order this saturates to +inf; the DOT4 tree adds +inf to -inf.
    let x = tmp("big.txt", "1 4\n1e308 1e308 -1e308 -1e308\n");
    let y = tmp("ones.txt", "1 4\n1 1 1 1\n");
    let inputs = [format!("x={}", x.display()), format!("y={}", y.display())];
    let run = |ae: &str| {
        blas_pe(&["run", "ddot", "--n", "4", "--ae", ae, "--input", &inputs[0], "--input", &inputs[1]])
    };
    assert!(run("AE0").status.success());
    let o = run("AE5");
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[numerical]"));
}

#[test]
fn config_errors_are_usage_errors() {
    let cfg = tmp("bad.cfg", "gm_handshak = 3\n");
    let o = blas_pe(&["run", "gemm", "--n", "8", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[parse]"));

    let o = blas_pe(&["run", "gemm", "--n", "8", "--config", "/nonexistent/pe.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[io]"));

    assert_eq!(blas_pe(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(blas_pe(&["run", "gemm"]).status.code(), Some(2));
}

#[test]
fn checked_in_config_matches_defaults() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/pe.cfg");
    let a = blas_pe(&["run", "gemm", "--n", "8", "--config", path]);
    let b = blas_pe(&["run", "gemm", "--n", "8"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn dag_emits_dot_with_summary() {
    let o = blas_pe(&["dag", "ddot", "--n", "8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("// depth 4 width 8"));
    assert!(out.contains("digraph"));
    assert!(out.trim_end().ends_with('}'));

    let o = blas_pe(&["dag", "ddot", "--n", "6"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tile_partition_errors_exit_three() {
    let o = blas_pe(&["tiles", "--b", "3", "--n", "20"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[partition]"));
}

#[test]
fn calibrate_reports_every_reference_cell() {
    let o = blas_pe(&["calibrate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows = out.lines().filter(|l| !l.starts_with('#') && !l.starts_with("n,")).count();
    assert_eq!(rows, 30);
    assert_eq!(out.lines().filter(|l| l.starts_with("# speedup")).count(), 3);
}

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use blas_pe_sim::calibrate::{calibrate, ReferenceTables};
use blas_pe_sim::compiler::compile_kernel;
use blas_pe_sim::config::{AeLevel, ConfigFile};
use blas_pe_sim::dag::{build_dag, critical_path, max_parallelism, DagKind, KernelSpec};
use blas_pe_sim::error::{Error, Result};
use blas_pe_sim::isa::KernelKind;
use blas_pe_sim::matrix::{max_rel_error, Matrix};
use blas_pe_sim::metrics::{ablation_report, Metrics};
use blas_pe_sim::sim::{kernel_image, kernel_oracle, simulate, simulate_traced};
use blas_pe_sim::tiles::{default_sizes, run_parallel_gemm};

/// Results above this relative error are reported as a numerical mismatch.
const TOLERANCE: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "blas-pe", version, about = "Simulate BLAS kernels on the PE and tile array")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Key = value config file; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one kernel and check it against the oracle.
    Run {
        #[arg(value_name = "KERNEL", required_unless_present = "kernel")]
        pos_kernel: Option<KernelKind>,
        #[arg(long, conflicts_with = "pos_kernel")]
        kernel: Option<KernelKind>,
        #[arg(long)]
        n: usize,
        /// Defaults to the level in the config file.
        #[arg(long)]
        ae: Option<AeLevel>,
        /// Load a GM region from a matrix file, e.g. `--input A=a.txt`.
        #[arg(long, value_name = "REGION=FILE")]
        input: Vec<String>,
        /// Append the per-cycle issue trace to the report.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep enhancement levels and sizes.
    Ablate {
        #[arg(value_name = "KERNEL", required_unless_present = "kernel")]
        pos_kernel: Option<KernelKind>,
        #[arg(long, conflicts_with = "pos_kernel")]
        kernel: Option<KernelKind>,
        #[arg(long, value_delimiter = ',', default_value = "20,40,60,80,100")]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "AE0,AE1,AE2,AE3,AE4,AE5")]
        ae: Vec<AeLevel>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        common: Common,
    },
    /// Parallel GEMM speedup on b x b tile arrays.
    Tiles {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        b: Vec<usize>,
        /// Defaults to a per-array sweep.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long)]
        ae: Option<AeLevel>,
        #[command(flatten)]
        common: Common,
    },
    /// Export a kernel DAG in DOT form with its level summary.
    Dag {
        #[arg(value_name = "KIND", required_unless_present = "kernel")]
        pos_kernel: Option<DagKind>,
        #[arg(long, conflicts_with = "pos_kernel")]
        kernel: Option<DagKind>,
        #[arg(long, value_delimiter = ',', default_value = "8")]
        n: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare simulated latencies with the reference measurements.
    Calibrate {
        #[arg(value_name = "KERNEL", default_value = "gemm")]
        kernel: KernelKind,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::Io(format!("{}: {e}", p.display())))?
            .parse(),
        None => Ok(ConfigFile::default()),
    }
}

fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(kind: KernelKind, n: usize, ae: Option<AeLevel>, inputs: &[String], trace: bool, common: &Common) -> Result<String> {
    let file = load_config(common.config.as_deref())?;
    let cfg = match ae {
        Some(ae) => file.pe.with_ae(ae),
        None => file.pe,
    };
    let prog = compile_kernel(kind, n, &cfg)?;
    let mut gm = kernel_image(&prog, common.seed);
    for spec in inputs {
        let (region, path) =
            spec.split_once('=').ok_or_else(|| Error::Config(format!("--input expects REGION=FILE, got {spec:?}")))?;
        let (base, len) = prog
            .layout
            .region(region)
            .ok_or_else(|| Error::Config(format!("{kind} has no region {region:?}")))?;
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}")))?;
        let m: Matrix = text.parse()?;
        if m.data().len() != len {
            return Err(Error::Dimension(format!(
                "region {region} holds {len} values, {path} is {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        gm[base..base + len].copy_from_slice(m.data());
    }
    let expected = kernel_oracle(kind, n, &prog, &gm)?;
    let (sim, events) = if trace {
        simulate_traced(&prog, &cfg, &gm)?
    } else {
        (simulate(&prog, &cfg, &gm)?, Vec::new())
    };
    let err = max_rel_error(&sim.output, &expected);
    if !(err <= TOLERANCE) {
        return Err(Error::Numerical(format!("{kind} n={n} {}: max relative error {err:e}", cfg.ae)));
    }
    let m = Metrics::compute(kind, n, sim.latency, sim.dot4_issued, &cfg)?;
    let c = &sim.cycles;
    let mut s = String::new();
    let _ = writeln!(s, "kernel = {kind}\nn = {n}\nae = {}\nseed = {}", cfg.ae, common.seed);
    let _ = writeln!(s, "latency = {}\nflops = {}\ncpf = {:.4}\nfpc = {:.4}", m.latency_cycles, m.flops, m.cpf, m.fpc);
    let _ = writeln!(s, "pct_peak_fpc = {:.2}", m.percent_of_peak_fpc);
    if let Some(a) = m.alpha {
        let _ = writeln!(s, "alpha = {a:.4}");
    }
    let _ = writeln!(s, "gflops_per_watt = {:.3}", m.gflops_per_watt);
    let _ = writeln!(
        s,
        "cycles = busy {} raw {} lm-wait {} gm-wait {} bandwidth {} structural {} drain {}",
        c.busy, c.raw_hazard, c.lm_wait, c.gm_wait, c.bandwidth_wait, c.structural, c.drain
    );
    let _ = writeln!(s, "gm_words = {}\nlm_words = {}\ndot4 = {}", sim.gm_words_moved, sim.lm_words_moved, sim.dot4_issued);
    let _ = writeln!(s, "code_size = {}\nmax_rel_error = {err:.3e}", prog.code_size);
    if trace {
        s.push_str("# trace: cycle unit instruction\n");
        for e in &events {
            let _ = writeln!(s, "{e}");
        }
    }
    Ok(s)
}

fn cmd_tiles(bs: &[usize], ns: &[usize], ae: Option<AeLevel>, common: &Common) -> Result<String> {
    let file = load_config(common.config.as_deref())?;
    let mut s = String::from("b,n,latency,single_pe_latency,speedup,comp_comm_ratio,noc_words,max_rel_error\n");
    for &b in bs {
        let mut cfg = file.tile_config(b);
        if let Some(ae) = ae {
            cfg.pe = cfg.pe.with_ae(ae);
        }
        let sizes = if ns.is_empty() { default_sizes(b) } else { ns.to_vec() };
        for n in sizes {
            let r = run_parallel_gemm(n, &cfg, common.seed)?;
            if !(r.max_rel_error <= TOLERANCE) {
                return Err(Error::Numerical(format!("tiles b={b} n={n}: max relative error {:e}", r.max_rel_error)));
            }
            let _ = writeln!(
                s,
                "{b},{n},{},{},{:.4},{:.2},{},{:.3e}",
                r.latency, r.single_pe_latency, r.speedup, r.comp_comm_ratio, r.noc_words_moved, r.max_rel_error
            );
        }
    }
    Ok(s)
}

fn cmd_dag(kind: DagKind, ns: &[usize]) -> Result<String> {
    let mut s = String::new();
    for &n in ns {
        let d = build_dag(KernelSpec::new(kind, n))?;
        let levels = d.level_sizes();
        let _ = writeln!(s, "// {} n={n}", d.name);
        let _ = writeln!(s, "// nodes {} edges {}", d.nodes.len(), d.edges().count());
        let _ = writeln!(s, "// depth {} width {}", critical_path(&d)?, max_parallelism(&d));
        let _ = writeln!(s, "// level sizes {levels:?}");
        s.push_str(&d.to_dot());
    }
    Ok(s)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { pos_kernel, kernel, n, ae, input, trace, common } => {
            let kind = pos_kernel.or(kernel).expect("clap requires a kernel");
            let text = cmd_run(kind, n, ae, &input, trace, &common)?;
            emit(&common, &text)
        }
        Command::Ablate { pos_kernel, kernel, n, ae, format, common } => {
            let kind = pos_kernel.or(kernel).expect("clap requires a kernel");
            let file = load_config(common.config.as_deref())?;
            let report = ablation_report(kind, &n, &ae, &file.pe, common.seed);
            let text = match format {
                Format::Csv => report.to_csv(),
                Format::Json => report.to_json() + "\n",
            };
            emit(&common, &text)
        }
        Command::Tiles { b, n, ae, common } => {
            let text = cmd_tiles(&b, &n, ae, &common)?;
            emit(&common, &text)
        }
        Command::Dag { pos_kernel, kernel, n, common } => {
            let kind = pos_kernel.or(kernel).expect("clap requires a kind");
            let text = cmd_dag(kind, &n)?;
            emit(&common, &text)
        }
        Command::Calibrate { kernel, common } => {
            let file = load_config(common.config.as_deref())?;
            let report = calibrate(kernel, &ReferenceTables::builtin(), &file.pe, common.seed)?;
            emit(&common, &report.to_text())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

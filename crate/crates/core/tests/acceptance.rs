//! Acceptance suite. Each test prints one `criterion N ...: PASS|FAIL` line.
//! Run with `cargo test --test acceptance -- --nocapture --test-threads=1`
//! to see the lines in order.

use std::time::{Duration, Instant};

use blas_pe_sim::calibrate::ReferenceTables;
use blas_pe_sim::config::{AeLevel, PeConfig, TileArrayConfig};
use blas_pe_sim::dag::{build_dag, critical_path, eval_block2x2, BlockScheme, DagKind, KernelSpec, OpKind};
use blas_pe_sim::isa::KernelKind;
use blas_pe_sim::matrix::{oracle_gemm, seeded_rng, Matrix};
use blas_pe_sim::metrics::{ablation_report, cpf, fpc, improvement_percent, percent_of_peak_fpc};
use blas_pe_sim::tiles::{default_sizes, run_parallel_gemm};

const GRID: [usize; 5] = [20, 40, 60, 80, 100];

/// Collects sub-check outcomes for one criterion.
struct Criterion {
    id: u32,
    name: &'static str,
    start: Instant,
    budget: Duration,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Criterion {
    fn new(id: u32, name: &'static str, budget: Duration) -> Self {
        Self { id, name, start: Instant::now(), budget, failures: Vec::new(), notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    /// Print the verdict line and return the failures.
    fn finish(mut self) -> Vec<String> {
        let elapsed = self.start.elapsed();
        self.check(elapsed < self.budget, format!("took {elapsed:?}, budget {:?}", self.budget));
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {} ({}): {verdict} in {:.2?}", self.id, self.name, elapsed);
        for n in &self.notes {
            println!("    {n}");
        }
        for f in &self.failures {
            println!("    failed: {f}");
        }
        self.failures
    }
}

fn table() -> ReferenceTables {
    ReferenceTables::builtin()
}

#[test]
fn criterion_1_cpf_regression() {
    let mut c = Criterion::new(1, "CPF from reference latencies", Duration::from_secs(1));
    let t = table();
    assert_eq!(t.cpf.len(), 5);
    for row in &t.cpf {
        let lat = t.latency(row.kernel, row.ae, row.n).expect("latency for every CPF cell");
        let got = cpf(lat, row.kernel, row.n).unwrap();
        c.note(format!("n={} cpf {got:.4} printed {}", row.n, row.value));
        c.check((got - row.value).abs() <= 0.002, format!("n={} cpf {got:.4} vs {}", row.n, row.value));
    }
    let f = c.finish();
    assert!(f.is_empty(), "{f:?}");
}

#[test]
fn criterion_2_improvement_regression() {
    let mut c = Criterion::new(2, "improvement percentages from reference latencies", Duration::from_secs(1));
    let t = table();
    let mut checked = 0;
    for row in &t.latencies {
        let Some(printed) = row.printed_improvement else { continue };
        let prev = t.latency(row.kernel, row.ae.previous().unwrap(), row.n).unwrap();
        let got = improvement_percent(prev, row.cycles);
        checked += 1;
        c.check(
            (got - printed).abs() <= 0.3,
            format!("{} n={}: {got:.2}% vs printed {printed}%", row.ae, row.n),
        );
    }
    c.note(format!("{checked} printed percentages compared"));
    c.check(checked == 25, format!("expected 25 printed percentages, found {checked}"));
    let f = c.finish();
    assert!(f.is_empty(), "{f:?}");
}

#[test]
fn criterion_3_peak_fpc() {
    let mut c = Criterion::new(3, "percent of peak FPC", Duration::from_secs(1));
    let t = table();
    for (ae, lo, hi) in [(AeLevel::Ae1, 54.0, 55.0), (AeLevel::Ae5, 74.0, 75.0)] {
        let lat = t.latency(KernelKind::Gemm, ae, 100).unwrap();
        let pct = percent_of_peak_fpc(fpc(lat, KernelKind::Gemm, 100).unwrap(), &PeConfig::new(ae));
        c.note(format!("{ae} n=100: {pct:.2}% of peak {}", ae.peak_fpc()));
        c.check((lo..=hi).contains(&pct), format!("{ae}: {pct:.2}% outside [{lo}, {hi}]"));
    }
    let f = c.finish();
    assert!(f.is_empty(), "{f:?}");
}

#[test]
fn criterion_4_numerical_correctness() {
    let mut c = Criterion::new(4, "simulated results match oracles", Duration::from_secs(120));
    let ns = [4, 8, 20, 40];
    let mut worst = 0.0f64;
    let mut cells = 0;
    for kind in KernelKind::ALL {
        for seed in 0..20u64 {
            let r = ablation_report(kind, &ns, &AeLevel::ALL, &PeConfig::default(), seed);
            for cell in &r.cells {
                cells += 1;
                match (cell.max_rel_error, &cell.error) {
                    (Some(e), None) => {
                        worst = worst.max(e);
                        c.check(e <= 1e-10, format!("{kind} n={} {} seed {seed}: error {e:e}", cell.n, cell.ae));
                    }
                    (_, err) => c.check(false, format!("{kind} n={} {} seed {seed}: {err:?}", cell.n, cell.ae)),
                }
            }
        }
    }
    c.note(format!("{cells} runs, worst relative error {worst:.3e}"));
    let f = c.finish();
    assert!(f.is_empty(), "{f:?}");
}

#[test]
fn criterion_5_calibrated_trends() {
    let mut c = Criterion::new(5, "calibrated trends", Duration::from_secs(600));
    let cfg = PeConfig::default();
    c.note(format!("free parameters: gm_handshake={} channel_handshake={}", cfg.gm_handshake, cfg.channel_handshake));
    let r = ablation_report(KernelKind::Gemm, &GRID, &AeLevel::ALL, &cfg, 42);
    for n in GRID {
        let lat = |ae| r.latency(n, ae).unwrap();
        let a = improvement_percent(lat(AeLevel::Ae0), lat(AeLevel::Ae1));
        let b = improvement_percent(lat(AeLevel::Ae3), lat(AeLevel::Ae4));
        c.note(format!("n={n}: AE0->AE1 {a:.2}%, AE3->AE4 {b:.2}%"));
        c.check((35.0..=50.0).contains(&a), format!("n={n} AE0->AE1 {a:.2}% outside [35, 50]"));
        c.check((38.0..=52.0).contains(&b), format!("n={n} AE3->AE4 {b:.2}% outside [38, 52]"));
    }
    let s = r.latency(60, AeLevel::Ae0).unwrap() as f64 / r.latency(60, AeLevel::Ae5).unwrap() as f64;
    c.note(format!("n=60 AE0->AE5 speedup {s:.2}x"));
    c.check((6.5..=10.0).contains(&s), format!("n=60 speedup {s:.2} outside [6.5, 10]"));
    let f = c.finish();
    assert!(f.is_empty(), "{f:?}");
}

#[test]
fn criterion_6_property_suite() {
    let mut c = Criterion::new(6, "ablation properties", Duration::from_secs(600));
    let cfg = PeConfig::default();
    for kind in KernelKind::ALL {
        let r = ablation_report(kind, &GRID, &AeLevel::ALL, &cfg, 42);
        for cell in &r.cells {
            let m = cell.metrics.as_ref().expect("every grid cell runs");
            c.check(
                m.fpc <= cell.ae.peak_fpc(),
                format!("{kind} n={} {}: fpc {:.3} above peak", cell.n, cell.ae, m.fpc),
            );
        }
        for n in GRID {
            let lat: Vec<u64> = AeLevel::ALL.iter().map(|&ae| r.latency(n, ae).unwrap()).collect();
            c.check(lat.windows(2).all(|w| w[1] <= w[0]), format!("{kind} n={n}: latencies not monotone {lat:?}"));
        }
        // Prefetch reorders the load stream of the blocked matrix kernels.
        // The level-1 kernels already load in consumption order.
        let mut lm = Vec::new();
        for n in GRID {
            let wait = |ae| {
                blas_pe_sim::sim::run_kernel(kind, n, &cfg.with_ae(ae), 42).unwrap().sim.cycles.lm_wait
            };
            let (w4, w5) = (wait(AeLevel::Ae4), wait(AeLevel::Ae5));
            lm.push(format!("{w4}->{w5}"));
            if matches!(kind, KernelKind::Gemm | KernelKind::Gemv) {
                c.check(w5 < w4, format!("{kind} n={n}: AE5 lm-wait {w5} not below AE4 {w4}"));
            }
        }
        c.note(format!("{kind} lm-wait AE4->AE5: {}", lm.join(" ")));
        let again = ablation_report(kind, &GRID, &AeLevel::ALL, &cfg, 42);
        c.check(r.to_csv() == again.to_csv(), format!("{kind}: CSV differs between runs"));
        c.check(r.to_json() == again.to_json(), format!("{kind}: JSON differs between runs"));
    }
    let f = c.finish();
    assert!(f.is_empty(), "{f:?}");
}

#[test]
fn criterion_7_tile_scaling() {
    let mut c = Criterion::new(7, "tile scaling", Duration::from_secs(600));
    for b in [2usize, 3, 4] {
        let cfg = TileArrayConfig::new(b, PeConfig::default());
        let mut curve = Vec::new();
        for n in default_sizes(b) {
            let r = run_parallel_gemm(n, &cfg, 42).unwrap();
            let cap = (b * b) as f64;
            c.check((1.0..=cap).contains(&r.speedup), format!("b={b} n={n}: speedup {:.3} outside [1, {cap}]", r.speedup));
            c.check(r.max_rel_error <= 1e-10, format!("b={b} n={n}: error {:e}", r.max_rel_error));
            curve.push((n, r.speedup));
        }
        c.note(format!(
            "b={b}: {}",
            curve.iter().map(|(n, s)| format!("{n}:{s:.3}")).collect::<Vec<_>>().join(" ")
        ));
        c.check(curve.windows(2).all(|w| w[1].1 >= w[0].1), format!("b={b}: speedup not non-decreasing"));
        if b == 2 {
            let s100 = curve.iter().find(|p| p.0 == 100).unwrap().1;
            c.check(s100 >= 3.2, format!("speedup(100, 2) = {s100:.3} < 3.2"));
        }
        if b == 4 {
            let last = *curve.last().unwrap();
            c.check(last.1 >= 11.0, format!("speedup({}, 4) = {:.3} < 11", last.0, last.1));
        }
    }
    let f = c.finish();
    assert!(f.is_empty(), "{f:?}");
}

/// Reference level sizes for the Strassen DAG.
const REFERENCE_SMM_LEVELS: [usize; 4] = [9, 7, 6, 2];

fn smm_level_check() -> (bool, String) {
    let smm = build_dag(KernelSpec::new(DagKind::Smm2x2, 2)).unwrap();
    let levels = smm.level_sizes();
    (levels == REFERENCE_SMM_LEVELS, format!("SMM level sizes {levels:?} vs reference {REFERENCE_SMM_LEVELS:?}"))
}

#[test]
fn criterion_8_dag_golden() {
    let mut c = Criterion::new(8, "DAG golden values", Duration::from_secs(30));
    let smm = build_dag(KernelSpec::new(DagKind::Smm2x2, 2)).unwrap();
    let wmm = build_dag(KernelSpec::new(DagKind::Wmm2x2, 2)).unwrap();
    let g22 = build_dag(KernelSpec::new(DagKind::Gemm2x2, 2)).unwrap();
    let ddot = build_dag(KernelSpec::new(DagKind::Ddot, 8)).unwrap();

    // 18 adds and 7 multiplies are 25 compute nodes; the reference level
    // sizes sum to 24, so both cannot hold. Reported here, asserted in
    // `smm_reference_level_sizes`.
    let (ok, msg) = smm_level_check();
    c.check(ok, msg.clone());
    c.note(msg);
    c.check(critical_path(&wmm).unwrap() == 6, "WMM depth is not 6");
    c.check(g22.count(OpKind::Mul) == 8 && g22.add_count() == 4, "GEMM-2x2 is not 8 mul / 4 add");
    c.check(
        ddot.count(OpKind::Mul) == 8 && ddot.count(OpKind::Add) == 7 && critical_path(&ddot).unwrap() == 4,
        "ddot n=8 is not 8 mul / 7 add / depth 4",
    );
    c.check(smm.add_count() == 18, format!("SMM adds {} != 18", smm.add_count()));
    c.check(wmm.add_count() == 15, format!("WMM adds {} != 15", wmm.add_count()));
    c.note(format!("WMM levels {:?}, SMM adds {}, WMM adds {}", wmm.level_sizes(), smm.add_count(), wmm.add_count()));

    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let n = 2 * (seed as usize % 6 + 1);
        let mut rng = seeded_rng(seed);
        let a = Matrix::random(n, n, &mut rng);
        let b = Matrix::random(n, n, &mut rng);
        let want = oracle_gemm(&a, &b, &Matrix::zeros(n, n)).unwrap();
        for scheme in [BlockScheme::Gemm, BlockScheme::Smm, BlockScheme::Wmm] {
            let e = eval_block2x2(scheme, &a, &b).unwrap().max_rel_error(&want);
            worst = worst.max(e);
            c.check(e <= 1e-12, format!("{scheme:?} seed {seed}: error {e:e}"));
        }
    }
    c.note(format!("300 block evaluations, worst relative error {worst:.3e}"));

    let failures = c.finish();
    let unexpected: Vec<_> = failures.iter().filter(|f| !f.starts_with("SMM level sizes")).collect();
    assert!(unexpected.is_empty(), "{unexpected:?}");
}

#[test]
#[ignore = "reference SMM level sizes contradict the reference add count; see criterion 8"]
fn smm_reference_level_sizes() {
    let (ok, msg) = smm_level_check();
    assert!(ok, "{msg}");
}

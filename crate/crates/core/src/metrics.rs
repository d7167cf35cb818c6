//! Performance metrics and the ablation report.
//!
//! GEMM is accounted at `3n³` flops rather than the usual `2n³`: that is the
//! convention under which the reference cycles-per-flop figures for the
//! baseline PE are consistent (39000 cycles / 1.625 CPF = 24000 = 3·20³).

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AeLevel, PeConfig};
use crate::error::{Error, Result};
use crate::isa::KernelKind;
use crate::sim::run_kernel;

/// Accounted floating-point operations of `kind` at size `n`.
pub fn flop_count(kind: KernelKind, n: usize) -> u64 {
    let n = n as u64;
    match kind {
        KernelKind::Gemm => 3 * n * n * n,
        KernelKind::Gemv => 2 * n * n,
        KernelKind::Ddot => (2 * n).saturating_sub(1),
        KernelKind::Dnrm2 => 2 * n,
        KernelKind::Daxpy => 2 * n,
    }
}

/// Cycles per flop.
pub fn cpf(latency: u64, kind: KernelKind, n: usize) -> Result<f64> {
    if latency == 0 {
        return Err(Error::MetricInput("latency must be positive".into()));
    }
    let flops = flop_count(kind, n);
    if flops == 0 {
        return Err(Error::MetricInput(format!("{kind} n={n} performs no flops")));
    }
    Ok(latency as f64 / flops as f64)
}

/// Flops per cycle.
pub fn fpc(latency: u64, kind: KernelKind, n: usize) -> Result<f64> {
    cpf(latency, kind, n).map(|c| 1.0 / c)
}

pub fn percent_of_peak_fpc(fpc: f64, cfg: &PeConfig) -> f64 {
    100.0 * fpc / cfg.ae.peak_fpc()
}

/// Latency over DOT4 issues; 1.0 means compute fully hides data movement.
pub fn alpha(latency: u64, dot4_issues: u64) -> Result<f64> {
    if dot4_issues == 0 {
        return Err(Error::UndefinedMetric("alpha needs DOT4 work; none was issued".into()));
    }
    Ok(latency as f64 / dot4_issues as f64)
}

pub fn gflops_per_watt(latency: u64, kind: KernelKind, n: usize, frequency_hz: f64, power_watts: f64) -> Result<f64> {
    if !(frequency_hz > 0.0) || !(power_watts > 0.0) {
        return Err(Error::MetricInput("frequency and power must be positive".into()));
    }
    Ok(fpc(latency, kind, n)? * frequency_hz / power_watts / 1e9)
}

/// `100 × (prev − cur) / prev`.
pub fn improvement_percent(prev: u64, cur: u64) -> f64 {
    100.0 * (prev as f64 - cur as f64) / prev as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub latency_cycles: u64,
    pub flops: u64,
    pub cpf: f64,
    pub fpc: f64,
    pub percent_of_peak_fpc: f64,
    /// Absent when the program issued no DOT4.
    pub alpha: Option<f64>,
    pub gflops_per_watt: f64,
    pub frequency_hz: f64,
    pub power_watts: f64,
}

impl Metrics {
    pub fn compute(kind: KernelKind, n: usize, latency: u64, dot4_issues: u64, cfg: &PeConfig) -> Result<Self> {
        let fpc = fpc(latency, kind, n)?;
        Ok(Self {
            latency_cycles: latency,
            flops: flop_count(kind, n),
            cpf: cpf(latency, kind, n)?,
            fpc,
            percent_of_peak_fpc: percent_of_peak_fpc(fpc, cfg),
            alpha: alpha(latency, dot4_issues).ok(),
            gflops_per_watt: gflops_per_watt(latency, kind, n, cfg.frequency_hz, cfg.power())?,
            frequency_hz: cfg.frequency_hz,
            power_watts: cfg.power(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub n: usize,
    pub ae: AeLevel,
    /// Improvement over the previous level in the report, when both ran.
    pub improvement_percent: Option<f64>,
    pub metrics: Option<Metrics>,
    pub max_rel_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub kernel: KernelKind,
    pub seed: u64,
    /// Sorted by `(n, ae)`.
    pub cells: Vec<Cell>,
}

/// Simulate `kind` for every `(n, ae)` pair. A failing cell records its
/// error and leaves the rest of the report intact.
pub fn ablation_report(kind: KernelKind, ns: &[usize], aes: &[AeLevel], base: &PeConfig, seed: u64) -> AblationReport {
    let mut aes = aes.to_vec();
    aes.sort();
    aes.dedup();
    let jobs: Vec<(usize, AeLevel)> = ns.iter().flat_map(|&n| aes.iter().map(move |&ae| (n, ae))).collect();
    let mut cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(n, ae)| {
            let cfg = base.with_ae(ae);
            let outcome = run_kernel(kind, n, &cfg, seed).and_then(|run| {
                let m = Metrics::compute(kind, n, run.sim.latency, run.sim.dot4_issued, &cfg)?;
                Ok((m, run.max_rel_error))
            });
            match outcome {
                Ok((m, err)) => Cell { n, ae, improvement_percent: None, metrics: Some(m), max_rel_error: Some(err), error: None },
                Err(e) => Cell {
                    n,
                    ae,
                    improvement_percent: None,
                    metrics: None,
                    max_rel_error: None,
                    error: Some(format!("{}: {e}", e.category())),
                },
            }
        })
        .collect();
    cells.sort_by_key(|c| (c.n, c.ae));
    for i in 1..cells.len() {
        if cells[i].n != cells[i - 1].n {
            continue;
        }
        if let (Some(prev), Some(cur)) = (&cells[i - 1].metrics, &cells[i].metrics) {
            cells[i].improvement_percent = Some(improvement_percent(prev.latency_cycles, cur.latency_cycles));
        }
    }
    AblationReport { kernel: kind, seed, cells }
}

impl AblationReport {
    pub const CSV_HEADER: &'static str =
        "kernel,n,ae,latency,improvement_pct,cpf,fpc,pct_peak_fpc,alpha,gflops_per_watt,max_rel_error,error";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        let opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_default();
        for c in &self.cells {
            let m = c.metrics.as_ref();
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                self.kernel,
                c.n,
                c.ae,
                m.map(|m| m.latency_cycles.to_string()).unwrap_or_default(),
                opt(c.improvement_percent, 2),
                opt(m.map(|m| m.cpf), 4),
                opt(m.map(|m| m.fpc), 4),
                opt(m.map(|m| m.percent_of_peak_fpc), 2),
                opt(m.and_then(|m| m.alpha), 4),
                opt(m.map(|m| m.gflops_per_watt), 3),
                c.max_rel_error.map(|e| format!("{e:.3e}")).unwrap_or_default(),
                c.error.as_deref().unwrap_or("").replace(',', ";"),
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn cell(&self, n: usize, ae: AeLevel) -> Option<&Cell> {
        self.cells.iter().find(|c| c.n == n && c.ae == ae)
    }

    pub fn latency(&self, n: usize, ae: AeLevel) -> Option<u64> {
        self.cell(n, ae)?.metrics.as_ref().map(|m| m.latency_cycles)
    }
}

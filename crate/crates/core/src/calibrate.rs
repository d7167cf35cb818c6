//! Reference measurements and the comparison against simulated latencies.

use std::str::FromStr;

use serde::Serialize;

use crate::config::{AeLevel, PeConfig};
use crate::error::{Error, Result};
use crate::isa::KernelKind;
use crate::metrics::{ablation_report, improvement_percent};

/// The checked-in reference table.
pub const REFERENCE_TABLES: &str = include_str!("../data/reference_tables.txt");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyRow {
    pub kernel: KernelKind,
    pub ae: AeLevel,
    pub n: usize,
    pub cycles: u64,
    /// Improvement over the previous level as printed alongside the latency.
    pub printed_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueRow {
    pub kernel: KernelKind,
    pub ae: AeLevel,
    pub n: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReferenceTables {
    pub latencies: Vec<LatencyRow>,
    pub cpf: Vec<ValueRow>,
    pub gflops_per_watt: Vec<ValueRow>,
    pub peak_percent: Vec<ValueRow>,
    /// `(kernel, n, AE0 → AE5 speedup)`.
    pub speedups: Vec<(KernelKind, usize, f64)>,
    /// Cells printed twice with different values.
    pub alternates: Vec<LatencyRow>,
}

impl ReferenceTables {
    pub fn builtin() -> Self {
        Self::parse(REFERENCE_TABLES).expect("checked-in reference table parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut t = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let f: Vec<&str> = body.split_whitespace().collect();
            let err = |msg: String| Error::Parse { line, msg };
            let num = |s: &str| f64::from_str(s).map_err(|_| err(format!("bad number {s:?}")));
            let arity = |want: usize| {
                if f.len() == want {
                    Ok(())
                } else {
                    Err(err(format!("{} record takes {} fields, got {}", f[0], want - 1, f.len() - 1)))
                }
            };
            let kernel = |s: &str| KernelKind::from_str(s).map_err(|e| err(e.to_string()));
            let ae = |s: &str| AeLevel::from_str(s).map_err(|e| err(e.to_string()));
            let size = |s: &str| usize::from_str(s).map_err(|_| err(format!("bad size {s:?}")));
            match f[0] {
                "latency" | "alt" => {
                    arity(if f[0] == "latency" { 6 } else { 5 })?;
                    let row = LatencyRow {
                        kernel: kernel(f[1])?,
                        ae: ae(f[2])?,
                        n: size(f[3])?,
                        cycles: u64::from_str(f[4]).map_err(|_| err(format!("bad cycle count {:?}", f[4])))?,
                        printed_improvement: match f.get(5) {
                            Some(&"-") | None => None,
                            Some(v) => Some(num(v)?),
                        },
                    };
                    if f[0] == "latency" {
                        t.latencies.push(row);
                    } else {
                        t.alternates.push(row);
                    }
                }
                "cpf" | "gflops_w" | "peak_pct" => {
                    arity(5)?;
                    let row = ValueRow { kernel: kernel(f[1])?, ae: ae(f[2])?, n: size(f[3])?, value: num(f[4])? };
                    match f[0] {
                        "cpf" => t.cpf.push(row),
                        "gflops_w" => t.gflops_per_watt.push(row),
                        _ => t.peak_percent.push(row),
                    }
                }
                "speedup" => {
                    arity(4)?;
                    t.speedups.push((kernel(f[1])?, size(f[2])?, num(f[3])?));
                }
                other => return Err(err(format!("unknown record kind {other:?}"))),
            }
        }
        Ok(t)
    }

    pub fn latency(&self, kernel: KernelKind, ae: AeLevel, n: usize) -> Option<u64> {
        self.latencies.iter().find(|r| r.kernel == kernel && r.ae == ae && r.n == n).map(|r| r.cycles)
    }

    /// Sizes with a latency for every level of `kernel`.
    pub fn sizes(&self, kernel: KernelKind) -> Vec<usize> {
        let mut ns: Vec<usize> = self.latencies.iter().filter(|r| r.kernel == kernel).map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns.retain(|&n| AeLevel::ALL.iter().all(|&ae| self.latency(kernel, ae, n).is_some()));
        ns
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub ae: AeLevel,
    pub n: usize,
    pub reference: u64,
    pub simulated: u64,
    /// `(simulated − reference) / reference`.
    pub relative_error: f64,
    pub reference_improvement: Option<f64>,
    pub simulated_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub kernel: KernelKind,
    pub gm_handshake: u64,
    pub channel_handshake: u64,
    pub rows: Vec<CalibrationRow>,
    /// `(n, reference, simulated)` AE0 → AE5 speedups.
    pub speedups: Vec<(usize, f64, f64)>,
}

/// Simulate every reference cell of `kernel` and line the results up.
pub fn calibrate(kernel: KernelKind, tables: &ReferenceTables, base: &PeConfig, seed: u64) -> Result<CalibrationReport> {
    let ns = tables.sizes(kernel);
    if ns.is_empty() {
        return Err(Error::Spec(format!("no reference latencies for {kernel}")));
    }
    let report = ablation_report(kernel, &ns, &AeLevel::ALL, base, seed);
    if let Some(bad) = report.cells.iter().find(|c| c.error.is_some()) {
        return Err(Error::Spec(format!(
            "{kernel} n={} {} failed: {}",
            bad.n,
            bad.ae,
            bad.error.as_deref().unwrap_or_default()
        )));
    }
    let mut rows = Vec::new();
    for &n in &ns {
        for &ae in &AeLevel::ALL {
            let reference = tables.latency(kernel, ae, n).expect("size filter guarantees the cell");
            let simulated = report.latency(n, ae).expect("all cells succeeded");
            let prev = ae.previous();
            rows.push(CalibrationRow {
                ae,
                n,
                reference,
                simulated,
                relative_error: (simulated as f64 - reference as f64) / reference as f64,
                reference_improvement: prev.and_then(|p| tables.latency(kernel, p, n)).map(|p| improvement_percent(p, reference)),
                simulated_improvement: report.cell(n, ae).and_then(|c| c.improvement_percent),
            });
        }
    }
    let speedups = tables
        .speedups
        .iter()
        .filter(|(k, n, _)| *k == kernel && ns.contains(n))
        .map(|&(_, n, s)| {
            let sim = report.latency(n, AeLevel::Ae0).unwrap() as f64 / report.latency(n, AeLevel::Ae5).unwrap() as f64;
            (n, s, sim)
        })
        .collect();
    Ok(CalibrationReport {
        kernel,
        gm_handshake: base.gm_handshake,
        channel_handshake: base.channel_handshake,
        rows,
        speedups,
    })
}

impl CalibrationReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# {} calibration, gm_handshake={} channel_handshake={}\n",
            self.kernel, self.gm_handshake, self.channel_handshake
        );
        s.push_str("n,ae,reference,simulated,rel_error,reference_improvement_pct,simulated_improvement_pct\n");
        let pct = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{:+.4},{},{}\n",
                r.n,
                r.ae,
                r.reference,
                r.simulated,
                r.relative_error,
                pct(r.reference_improvement),
                pct(r.simulated_improvement)
            ));
        }
        for (n, reference, sim) in &self.speedups {
            s.push_str(&format!("# speedup AE0->AE5 n={n}: reference {reference:.2}x, simulated {sim:.2}x\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_is_complete() {
        let t = ReferenceTables::builtin();
        assert_eq!(t.latencies.len(), 30);
        assert_eq!(t.cpf.len(), 5);
        assert_eq!(t.gflops_per_watt.len(), 30);
        assert_eq!(t.sizes(KernelKind::Gemm), vec![20, 40, 60, 80, 100]);
        assert_eq!(t.latency(KernelKind::Gemm, AeLevel::Ae5, 100), Some(573_442));
        assert_eq!(t.alternates[0].cycles, 312_075);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match ReferenceTables::parse("# c\nlatency gemm AE9 20 1 -\n") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("expected a parse error on line 2, got {other:?}"),
        }
        assert!(ReferenceTables::parse("latency gemm AE0 20\n").is_err());
        assert!(ReferenceTables::parse("bogus 1 2\n").is_err());
    }

    #[test]
    fn calibration_lines_up_cells() {
        let t = ReferenceTables::parse(
            "latency gemm AE0 20 39000 -\nlatency gemm AE1 20 23000 41\nlatency gemm AE2 20 15251 33.7\n\
             latency gemm AE3 20 12745 16.4\nlatency gemm AE4 20 7079 44.4\nlatency gemm AE5 20 5561 21.44\n\
             speedup gemm 20 7\n",
        )
        .unwrap();
        let r = calibrate(KernelKind::Gemm, &t, &PeConfig::default(), 42).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert!(r.rows.iter().all(|row| row.simulated > 0));
        assert!((r.rows[1].reference_improvement.unwrap() - 41.03).abs() < 0.01);
        assert_eq!(r.speedups.len(), 1);
        assert!(r.to_text().lines().count() >= 8);
    }
}

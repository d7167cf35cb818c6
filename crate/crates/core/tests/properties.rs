use proptest::prelude::*;

use blas_pe_sim::config::{AeLevel, PeConfig, TileArrayConfig};
use blas_pe_sim::isa::KernelKind;
use blas_pe_sim::metrics::{cpf, flop_count, fpc, gflops_per_watt};
use blas_pe_sim::sim::run_kernel;
use blas_pe_sim::tiles::run_parallel_gemm;

fn kernel() -> impl Strategy<Value = KernelKind> {
    prop::sample::select(KernelKind::ALL.to_vec())
}

fn level() -> impl Strategy<Value = AeLevel> {
    prop::sample::select(AeLevel::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cpf_times_fpc_is_one(lat in 1u64..10_000_000, k in kernel(), n in 1usize..200) {
        let p = cpf(lat, k, n).unwrap() * fpc(lat, k, n).unwrap();
        prop_assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn efficiency_is_linear_in_frequency_and_inverse_in_power(
        lat in 1u64..10_000_000,
        n in 4usize..120,
        f in prop::sample::select(vec![0.2e9, 0.33e9, 0.95e9, 1.81e9]),
        p in 1e-3f64..1.0,
    ) {
        let base = gflops_per_watt(lat, KernelKind::Gemm, n, 0.2e9, p).unwrap();
        let scaled = gflops_per_watt(lat, KernelKind::Gemm, n, f, 2.0 * p).unwrap();
        let want = base * (f / 0.2e9) / 2.0;
        prop_assert!((scaled - want).abs() <= 1e-9 * want.abs());
    }

    #[test]
    fn simulated_runs_respect_machine_bounds(k in kernel(), ae in level(), q in 1usize..7, seed in 0u64..1000) {
        let n = 4 * q;
        let cfg = PeConfig::new(ae);
        let r = run_kernel(k, n, &cfg, seed).unwrap();
        prop_assert!(r.max_rel_error <= 1e-10);
        prop_assert_eq!(r.sim.cycles.total(), r.sim.latency);
        prop_assert_eq!(r.sim.flops_retired, flop_count(k, n));
        prop_assert!(cpf(r.sim.latency, k, n).unwrap() >= 1.0 / ae.peak_fpc());
        let again = run_kernel(k, n, &cfg, seed).unwrap();
        prop_assert_eq!(again, r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tile_runs_cover_the_work_once(b in 1usize..4, q in 1usize..4, ae in level(), seed in 0u64..100) {
        let n = 4 * b * q;
        let r = run_parallel_gemm(n, &TileArrayConfig::new(b, PeConfig::new(ae)), seed).unwrap();
        prop_assert_eq!(r.flops(), 3 * (n as u64).pow(3));
        prop_assert!(r.speedup >= 1.0 && r.speedup <= (b * b) as f64, "speedup {}", r.speedup);
        prop_assert!(r.max_rel_error <= 1e-10);
    }
}

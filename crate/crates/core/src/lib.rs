//! Cycle-level model of a BLAS processing element, its kernel compiler, and
//! a tile array for parallel GEMM.
//!
//! Start with [`sim::run_kernel`] for a single kernel,
//! [`metrics::ablation_report`] for sweeps over enhancement levels and
//! [`tiles::run_parallel_gemm`] for the array. The guide under `book/`
//! walks through each part.

pub mod config;
pub mod error;
pub mod isa;
pub mod matrix;
pub mod compiler;
pub mod metrics;
pub mod sim;
pub mod dag;
pub mod tiles;
pub mod calibrate;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/matrices.md")]
    mod matrices {}
    #[doc = include_str!("../../../book/src/compiler.md")]
    mod compiler {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/tiles.md")]
    mod tiles {}
    #[doc = include_str!("../../../book/src/dags.md")]
    mod dags {}
    #[doc = include_str!("../../../book/src/config.md")]
    mod config {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

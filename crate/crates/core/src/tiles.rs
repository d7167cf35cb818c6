//! GEMM across a `b × b` grid of PE tiles fed by a memory column.
//!
//! Tile `(i, j)` owns output block `(i, j)`. It pulls row panel `i` of A,
//! column panel `j` of B and its block of C from the memory column to the
//! right of the grid, runs the blocked kernel on its PE, and writes the block
//! back. All tiles in a grid row share one link to the memory column, which
//! serves one request of at most 16 words at a time: each request costs the
//! round trip to the memory column plus the words on the wire. Timing is
//! computed per tile from the link schedule and the tile's own PE
//! simulation; the PE simulations are independent and run in parallel.

use rayon::prelude::*;
use serde::Serialize;

use crate::compiler::compile_gemm;
use crate::config::TileArrayConfig;
use crate::error::{Error, Result};
use crate::isa::BLOCK_ELEMS;
use crate::matrix::{oracle_gemm, partition_blocks, seeded_rng, Block, Matrix};
use crate::sim::{simulate, SimResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TileRun {
    pub row: usize,
    pub col: usize,
    /// Hops between the tile and the memory column.
    pub hops: usize,
    pub sim: SimResult,
    pub fetch_start: u64,
    pub fetch_end: u64,
    pub compute_end: u64,
    pub writeback_end: u64,
    pub noc_words: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TileSimResult {
    pub n: usize,
    pub b: usize,
    pub tiles: Vec<TileRun>,
    /// Last writeback completion over all tiles.
    pub latency: u64,
    pub noc_words_moved: u64,
    /// Latency of the same product on a single tile (`b = 1`).
    pub single_pe_latency: u64,
    pub speedup: f64,
    /// Output block edge over panel count, `n / b`.
    pub comp_comm_ratio: f64,
    pub max_rel_error: f64,
}

impl TileSimResult {
    pub fn max_tile_latency(&self) -> u64 {
        self.tiles.iter().map(|t| t.sim.latency).max().unwrap_or(0)
    }

    pub fn flops(&self) -> u64 {
        self.tiles.iter().map(|t| t.sim.flops_retired).sum()
    }
}

struct ArrayRun {
    tiles: Vec<TileRun>,
    latency: u64,
    output: Matrix,
}

/// Seeded `A`, `B`, `C` operands of an `n × n` product.
pub fn gemm_operands(n: usize, seed: u64) -> (Matrix, Matrix, Matrix) {
    let mut rng = seeded_rng(seed);
    let a = Matrix::random(n, n, &mut rng);
    let b = Matrix::random(n, n, &mut rng);
    let c = Matrix::random(n, n, &mut rng);
    (a, b, c)
}

/// Link occupancy of moving `words` to or from a tile `hops` away, one
/// request in flight at a time.
fn link_cycles(words: u64, hops: usize, cfg: &TileArrayConfig) -> u64 {
    let round_trip = 2 * hops as u64 * cfg.hop_latency;
    let w = cfg.link_words_per_cycle as u64;
    let req = BLOCK_ELEMS as u64;
    let full = words / req;
    let tail = words % req;
    full * (round_trip + req.div_ceil(w)) + if tail > 0 { round_trip + tail.div_ceil(w) } else { 0 }
}

fn run_tile(blk: &Block, n: usize, cfg: &TileArrayConfig, ops: &(Matrix, Matrix, Matrix)) -> Result<(SimResult, Matrix)> {
    let s = blk.rows.len();
    let p = blk.cols.len();
    let flops = 3 * (s * n * p) as u64;
    let prog = compile_gemm(s, n, p, &cfg.pe, flops)?;
    let mut gm = Vec::with_capacity(prog.layout.total_words);
    gm.extend_from_slice(ops.0.submatrix(blk.rows.clone(), 0..n).data());
    gm.extend_from_slice(ops.1.submatrix(0..n, blk.cols.clone()).data());
    gm.extend_from_slice(ops.2.submatrix(blk.rows.clone(), blk.cols.clone()).data());
    debug_assert_eq!(gm.len(), prog.layout.total_words);
    let sim = simulate(&prog, &cfg.pe, &gm)?;
    let out = Matrix::from_vec(s, p, sim.output.clone())?;
    Ok((sim, out))
}

fn run_array(n: usize, cfg: &TileArrayConfig, ops: &(Matrix, Matrix, Matrix)) -> Result<ArrayRun> {
    if cfg.link_words_per_cycle == 0 {
        return Err(Error::Config("link_words_per_cycle must be at least 1".into()));
    }
    let plan = partition_blocks(n, cfg.b)?;
    let sims: Vec<(SimResult, Matrix)> = plan
        .blocks
        .par_iter()
        .map(|blk| {
            run_tile(blk, n, cfg, ops).map_err(|e| Error::Tile { row: blk.tile_row, col: blk.tile_col, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let overlap = cfg.pe.ae.has_prefetch();
    let mut tiles = Vec::with_capacity(sims.len());
    let mut output = Matrix::zeros(n, n);
    for i in 0..cfg.b {
        // Fetches go out farthest tile first; writebacks follow in
        // completion order.
        let mut link_free = 0u64;
        let mut row: Vec<TileRun> = Vec::with_capacity(cfg.b);
        for j in 0..cfg.b {
            let idx = i * cfg.b + j;
            let blk = &plan.blocks[idx];
            let (sim, out) = &sims[idx];
            output.write_block(blk.rows.start, blk.cols.start, out);
            let (s, p) = (blk.rows.len() as u64, blk.cols.len() as u64);
            let hops = cfg.b - j;
            let fetch_words = s * n as u64 + n as u64 * p + s * p;
            let fetch_start = link_free;
            link_free += link_cycles(fetch_words, hops, cfg);
            let fetch_end = link_free;
            let compute_end = if overlap {
                let first_word = fetch_start + 2 * hops as u64 * cfg.hop_latency + 1;
                (first_word + sim.latency).max(fetch_end)
            } else {
                fetch_end + sim.latency
            };
            row.push(TileRun {
                row: i,
                col: j,
                hops,
                sim: sim.clone(),
                fetch_start,
                fetch_end,
                compute_end,
                writeback_end: 0,
                noc_words: fetch_words + s * p,
            });
        }
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by_key(|&j| (row[j].compute_end, j));
        for j in order {
            let t = &mut row[j];
            let blk = &plan.blocks[i * cfg.b + j];
            let words = (blk.rows.len() * blk.cols.len()) as u64;
            let start = link_free.max(t.compute_end);
            link_free = start + link_cycles(words, t.hops, cfg);
            t.writeback_end = link_free;
        }
        tiles.extend(row);
    }
    let latency = tiles.iter().map(|t| t.writeback_end).max().unwrap_or(0);
    Ok(ArrayRun { tiles, latency, output })
}

/// Simulate `C += A·B` for seeded `n × n` operands on the tile array.
pub fn run_parallel_gemm(n: usize, cfg: &TileArrayConfig, seed: u64) -> Result<TileSimResult> {
    cfg.pe.validate()?;
    let ops = gemm_operands(n, seed);
    let run = run_array(n, cfg, &ops)?;
    let single_pe_latency = if cfg.b == 1 {
        run.latency
    } else {
        run_array(n, &TileArrayConfig { b: 1, ..cfg.clone() }, &ops)?.latency
    };
    let expected = oracle_gemm(&ops.0, &ops.1, &ops.2)?;
    Ok(TileSimResult {
        n,
        b: cfg.b,
        noc_words_moved: run.tiles.iter().map(|t| t.noc_words).sum(),
        latency: run.latency,
        single_pe_latency,
        speedup: single_pe_latency as f64 / run.latency as f64,
        comp_comm_ratio: n as f64 / cfg.b as f64,
        max_rel_error: run.output.max_rel_error(&expected),
        tiles: run.tiles,
    })
}

/// Sizes swept by default on a `b × b` array. Larger arrays need larger
/// products before the link stops dominating.
pub fn default_sizes(b: usize) -> Vec<usize> {
    match b {
        1 | 2 => vec![20, 40, 60, 80, 100],
        3 => vec![24, 48, 96, 144, 192],
        4 => vec![32, 64, 96, 128, 192, 256],
        _ => (1..=6).map(|k| 16 * b * k).collect(),
    }
}

/// `(n, speedup)` for each size on a `cfg.b × cfg.b` array.
pub fn speedup_curve(ns: &[usize], cfg: &TileArrayConfig, seed: u64) -> Result<Vec<(usize, f64)>> {
    ns.iter().map(|&n| run_parallel_gemm(n, cfg, seed).map(|r| (n, r.speedup))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AeLevel, PeConfig};

    fn cfg(b: usize) -> TileArrayConfig {
        TileArrayConfig::new(b, PeConfig::new(AeLevel::Ae5))
    }

    #[test]
    fn single_tile_is_the_baseline() {
        let r = run_parallel_gemm(20, &cfg(1), 42).unwrap();
        assert_eq!(r.speedup, 1.0);
        assert!(r.max_rel_error < 1e-10);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(run_parallel_gemm(20, &cfg(2), 42).unwrap().comp_comm_ratio, 10.0);
        assert_eq!(run_parallel_gemm(60, &cfg(3), 42).unwrap().comp_comm_ratio, 20.0);
    }

    #[test]
    fn flops_and_bounds() {
        let r = run_parallel_gemm(40, &cfg(2), 7).unwrap();
        assert_eq!(r.flops(), 3 * 40 * 40 * 40);
        assert!(r.latency >= r.max_tile_latency());
        assert!(r.speedup >= 1.0 && r.speedup <= 4.0, "{}", r.speedup);
        assert!(r.max_rel_error < 1e-10);
    }

    #[test]
    fn partition_errors_propagate() {
        assert!(matches!(run_parallel_gemm(20, &cfg(3), 42), Err(Error::Partition(_))));
    }

    #[test]
    fn tile_errors_carry_coordinates() {
        let mut c = cfg(2);
        c.pe.lm_capacity_bits = 64 * 40;
        match run_parallel_gemm(20, &c, 42) {
            Err(Error::Tile { row: 0, col: 0, source }) => assert!(matches!(*source, Error::Capacity { .. })),
            other => panic!("expected a tile capacity error, got {other:?}"),
        }
    }
}

//! Lowering of BLAS kernels to FPS and Load-Store CFU instruction streams.
//!
//! Matrix kernels use a register-blocked microkernel over output tiles of
//! `rows × cols` cells, 4x4 in the interior. The register file is split as:
//!
//! | bank | registers | holds |
//! |------|-----------|-------|
//! | A    | r0..      | `A[I+i][K+kk]` at `r(4i+kk)` |
//! | B    | after A   | `B[K+kk][J+j]` at `r(4rows+4j+kk)` (transposed, so a column is contiguous) |
//! | C    | r32..r47  | `C[I+i][J+j]` at `r(32+i*cols+j)` |
//! | S    | r48..r63  | products / DOT4 partials, same indexing as C |
//!
//! A and B share r0..r31, so a tile needs `4(rows + cols) ≤ 32` and
//! `rows·cols ≤ 16`. Remainder strips are 3 wide where possible and use
//! 5x3 tiles, so each fetched block feeds nearly as many cells as in the
//! interior.
//!
//! Every level keeps this layout; what changes is how operands reach the
//! registers and which arithmetic instructions are used.

use std::collections::BTreeMap;

use crate::config::{AeLevel, PeConfig};
use crate::error::{Error, Result};
use crate::isa::{
    BlockShape, GmLayout, Instruction, KernelKind, MemRef, Opcode, Operand, Program, Space,
    StaticCounts, BLOCK_ELEMS, INSTRUCTION_BYTES,
};
use crate::metrics::flop_count;

const RA: u8 = 0;
const RC: u8 = 32;
const RS: u8 = 48;

/// Local-memory slots used by the matrix kernels: two 32-word step buffers
/// (A block then B block), one slot each for incoming and outgoing C.
const LM_BUF: [usize; 2] = [0, 32];
const LM_CIN: usize = 64;
const LM_COUT: usize = 80;
const GEMM_LM_WORDS: usize = 96;

/// Level-1 kernels move vectors in chunks of this many elements.
const CHUNK: usize = 16;

/// Instruction stream that remembers the longest body emitted under each
/// template name. Straight-line repetitions of a template share one copy in
/// instruction memory, so code size is the sum of template lengths.
#[derive(Default)]
struct Stream {
    code: Vec<Instruction>,
    templates: BTreeMap<&'static str, usize>,
}

impl Stream {
    fn segment(&mut self, name: &'static str, f: impl FnOnce(&mut Vec<Instruction>)) {
        let start = self.code.len();
        f(&mut self.code);
        let len = self.code.len() - start;
        let slot = self.templates.entry(name).or_insert(0);
        *slot = (*slot).max(len);
    }

    fn template_words(&self) -> usize {
        self.templates.values().sum()
    }
}

/// Compile `kind` at size `n` for the level and parameters in `cfg`.
pub fn compile_kernel(kind: KernelKind, n: usize, cfg: &PeConfig) -> Result<Program> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::Dimension("n must be at least 1".into()));
    }
    let flops = flop_count(kind, n);
    match kind {
        KernelKind::Gemm | KernelKind::Gemv => {
            if n % 4 != 0 {
                return Err(Error::Shape(format!("{kind} needs n divisible by 4, got n={n}")));
            }
            let p = if kind == KernelKind::Gemm { n } else { 1 };
            let names = if kind == KernelKind::Gemm { ["A", "B", "C"] } else { ["A", "x", "y"] };
            let mut prog = compile_gemm_named(n, n, p, cfg, flops, names)?;
            prog.label = format!("{kind} n={n} {}", cfg.ae);
            Ok(prog)
        }
        KernelKind::Ddot | KernelKind::Dnrm2 | KernelKind::Daxpy => compile_level1(kind, n, cfg, flops),
    }
}

/// `C(m×p) += A(m×k) · B(k×p)` for arbitrary `m`, `p` and `k % 4 == 0`.
///
/// Global memory holds A, then B, then C, all row-major. Edge blocks with
/// fewer than four rows or columns use narrower transfers and fewer
/// arithmetic instructions. `flops` is the accounted flop count recorded in
/// the program's static counts.
pub fn compile_gemm(m: usize, k: usize, p: usize, cfg: &PeConfig, flops: u64) -> Result<Program> {
    let mut prog = compile_gemm_named(m, k, p, cfg, flops, ["A", "B", "C"])?;
    prog.label = format!("gemm {m}x{k}x{p} {}", cfg.ae);
    Ok(prog)
}

fn compile_gemm_named(
    m: usize,
    k: usize,
    p: usize,
    cfg: &PeConfig,
    flops: u64,
    names: [&str; 3],
) -> Result<Program> {
    cfg.validate()?;
    if m == 0 || k == 0 || p == 0 {
        return Err(Error::Dimension(format!("gemm dimensions must be positive, got {m}x{k}x{p}")));
    }
    if k % 4 != 0 {
        return Err(Error::Shape(format!("inner dimension must be divisible by 4, got {k}")));
    }
    let ae = cfg.ae;
    if ae.has_local_memory() {
        let working_set = if ae.has_prefetch() { GEMM_LM_WORDS / 2 } else { GEMM_LM_WORDS };
        check_capacity(working_set, cfg)?;
    }
    let g = GemmGeometry { m, k, p, a: 0, b: m * k, c: m * k + k * p };
    let layout = GmLayout {
        regions: vec![
            (names[0].into(), g.a, m * k),
            (names[1].into(), g.b, k * p),
            (names[2].into(), g.c, m * p),
        ],
        output: (g.c, m * p),
        total_words: g.c + m * p,
    };

    let mut fps = Stream::default();
    let mut ls = Stream::default();
    if ae.has_local_memory() {
        gemm_fps_staged(&g, cfg, &mut fps);
        gemm_lscfu(&g, ae, &mut ls);
    } else {
        gemm_fps_direct(&g, &mut fps);
    }
    finish(fps, ls, flops, if ae.has_local_memory() { GEMM_LM_WORDS } else { 0 }, layout, cfg)
}

fn check_capacity(needed: usize, cfg: &PeConfig) -> Result<()> {
    // Prefetching splits local memory into two halves, one per buffer set,
    // and `needed` is the working set of one buffer set.
    let available = if cfg.ae.has_prefetch() { cfg.lm_words() / 2 } else { cfg.lm_words() };
    if needed > available {
        return Err(Error::Capacity { needed, available });
    }
    Ok(())
}

fn finish(
    fps: Stream,
    ls: Stream,
    flops: u64,
    lm_footprint: usize,
    layout: GmLayout,
    cfg: &PeConfig,
) -> Result<Program> {
    let code_size = (fps.template_words() + ls.template_words()) * INSTRUCTION_BYTES;
    if code_size > cfg.imem_bytes {
        return Err(Error::InstructionMemory { needed: code_size, capacity: cfg.imem_bytes });
    }
    let mut prog = Program::from_streams(fps.code, ls.code);
    prog.counts = StaticCounts { flops, ..prog.counts };
    prog.code_size = code_size;
    prog.lm_footprint = lm_footprint;
    prog.layout = layout;
    Ok(prog)
}

struct GemmGeometry {
    m: usize,
    k: usize,
    p: usize,
    a: usize,
    b: usize,
    c: usize,
}

#[derive(Clone, Copy)]
struct Tile {
    i0: usize,
    j0: usize,
    rows: usize,
    cols: usize,
}

impl GemmGeometry {
    /// Interior 4x4 tiles row by row, then the right remainder strips top to
    /// bottom, then the bottom remainder bands left to right.
    fn tiles(&self) -> Vec<Tile> {
        let (row_edges, col_edges) = (edge_segments(self.m), edge_segments(self.p));
        let m4 = self.m - row_edges.iter().sum::<usize>();
        let p4 = self.p - col_edges.iter().sum::<usize>();
        let mut out = Vec::new();
        for i0 in (0..m4).step_by(4) {
            for j0 in (0..p4).step_by(4) {
                out.push(Tile { i0, j0, rows: 4, cols: 4 });
            }
        }
        let mut j0 = p4;
        for &w in &col_edges {
            let h = strip_len(w);
            for i0 in (0..self.m).step_by(h) {
                out.push(Tile { i0, j0, rows: h.min(self.m - i0), cols: w });
            }
            j0 += w;
        }
        let mut i0 = m4;
        for &h in &row_edges {
            let w = strip_len(h);
            for j0 in (0..p4).step_by(w) {
                out.push(Tile { i0, j0, rows: h, cols: w.min(p4 - j0) });
            }
            i0 += h;
        }
        out
    }

    fn steps(&self) -> usize {
        self.k / 4
    }

    fn a_addr(&self, t: Tile, k0: usize, i: usize, kk: usize) -> usize {
        self.a + (t.i0 + i) * self.k + k0 + kk
    }

    fn b_addr(&self, t: Tile, k0: usize, j: usize, kk: usize) -> usize {
        self.b + (k0 + kk) * self.p + t.j0 + j
    }

    fn c_addr(&self, t: Tile, i: usize, j: usize) -> usize {
        self.c + (t.i0 + i) * self.p + t.j0 + j
    }

    fn a_shape(&self, t: Tile) -> BlockShape {
        BlockShape::new(t.rows, 4, self.k, 1)
    }

    /// Transposed gather: packed element `(j, kk)` comes from `B[k0+kk][j0+j]`.
    fn b_shape(&self, t: Tile) -> BlockShape {
        BlockShape::new(t.cols, 4, 1, self.p)
    }

    fn c_shape(&self, t: Tile) -> BlockShape {
        BlockShape::new(t.rows, t.cols, self.p, 1)
    }
}

/// Widths of the remainder segments at the end of a dimension of length
/// `d`; the rest is covered by 4-wide segments. Width-3 strips run
/// 5x3 tiles, nearly as dense as 4x4, so remainders of 1 and 2 borrow from
/// the last 4-wide segments when there are enough of them.
fn edge_segments(d: usize) -> Vec<usize> {
    match d % 4 {
        0 => vec![],
        3 => vec![3],
        2 if d >= 6 => vec![3, 3],
        1 if d >= 9 => vec![3, 3, 3],
        r => vec![r],
    }
}

/// Long side of a remainder-strip tile whose short side is `r`.
fn strip_len(r: usize) -> usize {
    match r {
        1 => 7,
        2 => 6,
        _ => 5,
    }
}

fn ra(i: usize, kk: usize) -> u8 {
    RA + (4 * i + kk) as u8
}

fn rb(t: Tile, j: usize, kk: usize) -> u8 {
    RA + (4 * (t.rows + j) + kk) as u8
}

/// Local-memory address of a step's B block in buffer `buf`.
fn lm_b(t: Tile, buf: usize) -> usize {
    LM_BUF[buf] + 4 * t.rows
}

/// Split a block into row groups of at most [`BLOCK_ELEMS`] elements, as
/// `(first row, shape)` pairs.
fn split_rows(shape: BlockShape) -> Vec<(usize, BlockShape)> {
    let cols = shape.cols as usize;
    let per = (BLOCK_ELEMS / cols).max(1);
    (0..shape.rows as usize)
        .step_by(per)
        .map(|r0| {
            let rows = per.min(shape.rows as usize - r0);
            (r0, BlockShape::new(rows, cols, shape.row_stride as usize, shape.col_stride as usize))
        })
        .collect()
}

fn rc(t: Tile, i: usize, j: usize) -> u8 {
    RC + (i * t.cols + j) as u8
}

fn rs(t: Tile, i: usize, j: usize) -> u8 {
    RS + (i * t.cols + j) as u8
}

fn cells(t: Tile) -> impl Iterator<Item = (usize, usize)> {
    (0..t.rows).flat_map(move |i| (0..t.cols).map(move |j| (i, j)))
}

/// Four rounds of per-cell multiplies then accumulating adds, one round per `kk`.
fn scalar_block_madd(t: Tile, code: &mut Vec<Instruction>) {
    for kk in 0..4 {
        for (i, j) in cells(t) {
            code.push(Instruction::fmul(rs(t, i, j), ra(i, kk), rb(t, j, kk)));
        }
        for (i, j) in cells(t) {
            code.push(Instruction::fadd(rc(t, i, j), rc(t, i, j), rs(t, i, j)));
        }
    }
}

/// Baseline: every operand comes straight from global memory for every
/// block product and C is written back after each one.
fn gemm_fps_direct(g: &GemmGeometry, fps: &mut Stream) {
    for t in g.tiles() {
        for s in 0..g.steps() {
            let k0 = 4 * s;
            fps.segment("ae0.block_madd", |code| {
                for i in 0..t.rows {
                    for kk in 0..4 {
                        code.push(Instruction::load(Operand::Reg(ra(i, kk)), MemRef::gm(g.a_addr(t, k0, i, kk))));
                    }
                }
                for j in 0..t.cols {
                    for kk in 0..4 {
                        code.push(Instruction::load(Operand::Reg(rb(t, j, kk)), MemRef::gm(g.b_addr(t, k0, j, kk))));
                    }
                }
                for (i, j) in cells(t) {
                    code.push(Instruction::load(Operand::Reg(rc(t, i, j)), MemRef::gm(g.c_addr(t, i, j))));
                }
                scalar_block_madd(t, code);
                for (i, j) in cells(t) {
                    code.push(Instruction::store(MemRef::gm(g.c_addr(t, i, j)), Operand::Reg(rc(t, i, j))));
                }
            });
        }
    }
}

/// Move a packed block between local memory at `lm` and registers from
/// `reg`, as one block transfer or as per-word transfers.
fn fps_lm_block(code: &mut Vec<Instruction>, load: bool, reg: u8, lm: usize, shape: BlockShape, block: bool) {
    if block {
        let cols = shape.cols as usize;
        for (r0, part) in split_rows(shape) {
            let packed = BlockShape::packed(part.rows as usize, cols);
            let (reg, lm) = (reg + (r0 * cols) as u8, lm + r0 * cols);
            code.push(if load {
                Instruction::block_load(Operand::Reg(reg), MemRef::lm(lm), packed)
            } else {
                Instruction::block_store(MemRef::lm(lm), Operand::Reg(reg), packed)
            });
        }
    } else {
        for w in 0..shape.len() {
            code.push(if load {
                Instruction::load(Operand::Reg(reg + w as u8), MemRef::lm(lm + w))
            } else {
                Instruction::store(MemRef::lm(lm + w), Operand::Reg(reg + w as u8))
            });
        }
    }
}

/// Operands staged through local memory, C resident in registers for the
/// whole k loop of an output block.
fn gemm_fps_staged(g: &GemmGeometry, cfg: &PeConfig, fps: &mut Stream) {
    let ae = cfg.ae;
    let block = ae.has_block_transfer();
    let beat = 1 + cfg.channel_handshake as usize;
    let mut step = 0usize;
    for t in g.tiles() {
        fps.segment("c_in", |code| fps_lm_block(code, true, RC, LM_CIN, g.c_shape(t), block));
        for s in 0..g.steps() {
            let buf = step % 2;
            step += 1;
            fps.segment("block_madd", |code| {
                // Fold the previous step's partials into C while this step's
                // operands cross the channel; with block transfers, enough
                // folds go between the A and B loads to cover the A beats.
                let folds: Vec<Instruction> = if ae.has_dot() && s > 0 {
                    cells(t).map(|(i, j)| Instruction::fadd(rc(t, i, j), rc(t, i, j), rs(t, i, j))).collect()
                } else {
                    Vec::new()
                };
                let a_shape = g.a_shape(t);
                let split = if block {
                    let beats = a_shape.len().div_ceil(cfg.channel_words_per_beat());
                    (beats * beat).saturating_sub(1).min(folds.len())
                } else {
                    0
                };
                fps_lm_block(code, true, RA, LM_BUF[buf], a_shape, block);
                code.extend_from_slice(&folds[..split]);
                fps_lm_block(code, true, rb(t, 0, 0), lm_b(t, buf), g.b_shape(t), block);
                code.extend_from_slice(&folds[split..]);
                if ae.has_dot() {
                    for (i, j) in cells(t) {
                        code.push(Instruction::dot(4, rs(t, i, j), ra(i, 0), rb(t, j, 0)));
                    }
                } else {
                    scalar_block_madd(t, code);
                }
            });
        }
        fps.segment("c_out", |code| {
            if ae.has_dot() {
                for (i, j) in cells(t) {
                    code.push(Instruction::fadd(rc(t, i, j), rc(t, i, j), rs(t, i, j)));
                }
            }
            fps_lm_block(code, false, RC, LM_COUT, g.c_shape(t), block);
        });
    }
}

/// Load-Store CFU transfer between global memory (strided) and a packed
/// local-memory slot.
fn ls_transfer(code: &mut Vec<Instruction>, load: bool, lm: usize, gm: usize, shape: BlockShape, block: bool) {
    if block {
        for (r0, part) in split_rows(shape) {
            let (lm, gm) = (lm + r0 * shape.cols as usize, gm + r0 * shape.row_stride as usize);
            code.push(if load {
                Instruction::block_load(Operand::Local(lm as u32), MemRef::gm(gm), part)
            } else {
                Instruction::block_store(MemRef::gm(gm), Operand::Local(lm as u32), part)
            });
        }
    } else {
        for (w, off) in shape.offsets().enumerate() {
            let addr = MemRef::gm(gm + off as usize);
            code.push(if load {
                Instruction::load(Operand::Local((lm + w) as u32), addr)
            } else {
                Instruction::store(addr, Operand::Local((lm + w) as u32))
            });
        }
    }
}

/// Load-Store CFU program. Without prefetch each output block's loads wait
/// behind the previous block's C store; with prefetch the next block's C and
/// first two A/B steps (one per buffer) are hoisted above that store.
fn gemm_lscfu(g: &GemmGeometry, ae: AeLevel, ls: &mut Stream) {
    let block = ae.has_block_transfer();
    let tiles = g.tiles();
    let steps = g.steps();
    let hoist = if ae.has_prefetch() { steps.min(2) } else { 0 };

    let emit_step = |ls: &mut Stream, t: Tile, s: usize, global: usize| {
        let buf = global % 2;
        ls.segment("ls.step", |code| {
            ls_transfer(code, true, LM_BUF[buf], g.a_addr(t, 4 * s, 0, 0), g.a_shape(t), block);
            ls_transfer(code, true, lm_b(t, buf), g.b_addr(t, 4 * s, 0, 0), g.b_shape(t), block);
        });
    };
    let emit_head = |ls: &mut Stream, ti: usize, upto: usize| {
        let t = tiles[ti];
        ls.segment("ls.c_in", |code| ls_transfer(code, true, LM_CIN, g.c_addr(t, 0, 0), g.c_shape(t), block));
        for s in 0..upto {
            emit_step(ls, t, s, ti * steps + s);
        }
    };
    let emit_cout = |ls: &mut Stream, ti: usize| {
        let t = tiles[ti];
        ls.segment("ls.c_out", |code| ls_transfer(code, false, LM_COUT, g.c_addr(t, 0, 0), g.c_shape(t), block));
    };

    for ti in 0..tiles.len() {
        let t = tiles[ti];
        let first = if ti == 0 || hoist == 0 { 0 } else { hoist };
        if ti == 0 || hoist == 0 {
            emit_head(ls, ti, 0);
        }
        for s in first..steps {
            emit_step(ls, t, s, ti * steps + s);
        }
        if hoist > 0 && ti + 1 < tiles.len() {
            emit_head(ls, ti + 1, hoist);
        }
        emit_cout(ls, ti);
    }
}

/// Level-1 kernels: vectors are walked in chunks of 16 elements.
fn compile_level1(kind: KernelKind, n: usize, cfg: &PeConfig, flops: u64) -> Result<Program> {
    let ae = cfg.ae;
    let has_y = kind != KernelKind::Dnrm2;
    // Global memory: x, [y], [a], then the output.
    let x_gm = 0;
    let y_gm = n;
    let mut regions = vec![("x".to_string(), x_gm, n)];
    let mut next = n;
    if has_y {
        regions.push(("y".into(), y_gm, n));
        next += n;
    }
    let a_gm = next;
    if kind == KernelKind::Daxpy {
        regions.push(("a".into(), a_gm, 1));
        next += 1;
    }
    let out_len = if kind == KernelKind::Daxpy { n } else { 1 };
    let out_gm = next;
    regions.push(("out".into(), out_gm, out_len));
    let layout = GmLayout { regions, output: (out_gm, out_len), total_words: out_gm + out_len };

    // Local memory mirrors the global layout, output region included.
    let lm_words = out_gm + out_len;
    if ae.has_local_memory() {
        check_capacity(lm_words, cfg)?;
    }
    let lm_out = out_gm;

    let chunks: Vec<(usize, usize)> = (0..n).step_by(CHUNK).map(|o| (o, CHUNK.min(n - o))).collect();
    let block = ae.has_block_transfer();
    let staged = ae.has_local_memory();
    let space_ref = |addr: usize| if staged { MemRef::lm(addr) } else { MemRef::gm(addr) };
    const ACC: u8 = 48;
    const ALPHA: u8 = 63;

    let load_vec = |code: &mut Vec<Instruction>, reg: u8, base: usize, len: usize| {
        if block {
            code.push(Instruction::block_load(Operand::Reg(reg), MemRef::lm(base), BlockShape::packed(1, len)));
        } else {
            for w in 0..len {
                code.push(Instruction::load(Operand::Reg(reg + w as u8), space_ref(base + w)));
            }
        }
    };

    let mut fps = Stream::default();
    if kind == KernelKind::Daxpy {
        fps.segment("alpha", |code| code.push(Instruction::load(Operand::Reg(ALPHA), space_ref(a_gm))));
    }
    // Scalar levels stream element by element (DOT levels quad by quad) so
    // the FPS works on data as it trickles in; each group's accumulating
    // adds are deferred behind the next group's loads to hide the multiply
    // latency. Block levels move the whole chunk at once.
    let quad = ae.has_dot() && kind != KernelKind::Daxpy;
    let yr: u8 = if has_y { 16 } else { 0 };
    let group_ops = |go: usize, glen: usize| -> (Vec<Instruction>, Vec<Instruction>) {
        let (mut muls, mut adds) = (Vec::new(), Vec::new());
        let quads = if quad { glen / 4 } else { 0 };
        for q in 0..quads {
            let w = (go + 4 * q) as u8;
            let s = 32 + w / 4;
            muls.push(Instruction::dot(4, s, w, yr + w));
            adds.push(Instruction::fadd(ACC, ACC, s));
        }
        for w in (go + 4 * quads) as u8..(go + glen) as u8 {
            if kind == KernelKind::Daxpy {
                muls.push(Instruction::fmul(32 + w, ALPHA, w));
                adds.push(Instruction::fadd(16 + w, 32 + w, 16 + w));
            } else {
                muls.push(Instruction::fmul(32 + w, w, yr + w));
                adds.push(Instruction::fadd(ACC, ACC, 32 + w));
            }
        }
        (muls, adds)
    };
    let unit = if block { CHUNK } else if quad { 4 } else { 1 };
    for &(o, len) in &chunks {
        fps.segment("chunk", |code| {
            let mut deferred: Vec<Instruction> = Vec::new();
            for go in (0..len).step_by(unit) {
                let glen = unit.min(len - go);
                load_vec(code, go as u8, x_gm + o + go, glen);
                if has_y {
                    load_vec(code, 16 + go as u8, y_gm + o + go, glen);
                }
                let (muls, adds) = group_ops(go, glen);
                code.extend(muls);
                code.append(&mut deferred);
                deferred = adds;
            }
            code.append(&mut deferred);
            if kind == KernelKind::Daxpy {
                let dst = lm_out + o;
                if block {
                    code.push(Instruction::block_store(MemRef::lm(dst), Operand::Reg(16), BlockShape::packed(1, len)));
                } else {
                    for w in 0..len {
                        let to = if staged { MemRef::lm(dst + w) } else { MemRef::gm(out_gm + o + w) };
                        code.push(Instruction::store(to, Operand::Reg(16 + w as u8)));
                    }
                }
            }
        });
    }
    if kind != KernelKind::Daxpy {
        fps.segment("result", |code| {
            let mut src = ACC;
            if kind == KernelKind::Dnrm2 {
                code.push(Instruction::fsqrt(ACC + 1, ACC));
                src = ACC + 1;
            }
            code.push(Instruction::store(space_ref(lm_out), Operand::Reg(src)));
        });
    }

    let mut ls = Stream::default();
    if staged {
        let vec_xfer = |code: &mut Vec<Instruction>, load: bool, lm: usize, gm: usize, len: usize| {
            ls_transfer(code, load, lm, gm, BlockShape::packed(1, len), block)
        };
        if kind == KernelKind::Daxpy {
            ls.segment("ls.alpha", |code| code.push(Instruction::load(Operand::Local(a_gm as u32), MemRef::gm(a_gm))));
        }
        let load_chunk = |ls: &mut Stream, o: usize, len: usize| {
            ls.segment("ls.chunk", |code| {
                vec_xfer(code, true, x_gm + o, x_gm + o, len);
                if has_y {
                    vec_xfer(code, true, y_gm + o, y_gm + o, len);
                }
            });
        };
        if kind == KernelKind::Daxpy {
            // Chunk c is stored once chunk c+1 has been requested; prefetching
            // runs one chunk further ahead.
            let ahead = if ae.has_prefetch() { 3 } else { 2 };
            let mut loaded = 0;
            for (ci, &(o, len)) in chunks.iter().enumerate() {
                while loaded < chunks.len().min(ci + ahead) {
                    let (lo, llen) = chunks[loaded];
                    load_chunk(&mut ls, lo, llen);
                    loaded += 1;
                }
                ls.segment("ls.store", |code| vec_xfer(code, false, lm_out + o, out_gm + o, len));
            }
        } else {
            for &(o, len) in &chunks {
                load_chunk(&mut ls, o, len);
            }
            ls.segment("ls.result", |code| code.push(Instruction::store(MemRef::gm(out_gm), Operand::Local(lm_out as u32))));
        }
    }

    let mut prog = finish(fps, ls, flops, if staged { lm_words } else { 0 }, layout, cfg)?;
    prog.label = format!("{kind} n={n} {ae}");
    Ok(prog)
}

/// Check a program against the machine it is meant for. Violations are
/// returned as messages; an empty list means the program is legal.
pub fn validate_program(p: &Program, cfg: &PeConfig) -> Vec<String> {
    let mut out = Vec::new();
    let ae = cfg.ae;
    let regs = cfg.register_count;
    let lm_words = cfg.lm_words();

    if p.code_size > cfg.imem_bytes {
        out.push(format!("code size {} bytes exceeds instruction memory of {} bytes", p.code_size, cfg.imem_bytes));
    }
    if !ae.has_local_memory() && !p.lscfu.is_empty() {
        out.push("Load-Store CFU stream requires AE1+".into());
    }

    let check_lm = |out: &mut Vec<String>, idx: usize, stream: &str, addr: usize, words: usize| {
        if addr + words > lm_words {
            out.push(format!("{stream}[{idx}]: LM address {addr}+{words} beyond capacity {lm_words}"));
        }
    };

    for (idx, ins) in p.fps.iter().enumerate() {
        let op = ins.op;
        if op.dot_width().is_some() && !ae.has_dot() {
            out.push(format!("fps[{idx}]: {} requires AE2+", op.mnemonic()));
        }
        if op.is_block() && !ae.has_block_transfer() {
            out.push(format!("fps[{idx}]: {} requires AE3+", op.mnemonic()));
        }
        if let Some(b) = ins.block {
            if b.is_empty() || b.len() > BLOCK_ELEMS {
                out.push(format!("fps[{idx}]: block of {} elements (1..=16 allowed)", b.len()));
            }
        }
        for r in ins.reads().chain(ins.writes()) {
            if r as usize >= regs {
                out.push(format!("fps[{idx}]: register r{r} out of range (file has {regs})"));
            }
        }
        let shape_ok = match op {
            Opcode::Nop => true,
            Opcode::Load | Opcode::BlockLoad => {
                matches!(ins.dst, Operand::Reg(_)) && matches!(ins.src[0], Operand::Mem(_))
            }
            Opcode::Store | Opcode::BlockStore => {
                matches!(ins.dst, Operand::Mem(_)) && matches!(ins.src[0], Operand::Reg(_))
            }
            Opcode::Fsqrt => matches!((ins.dst, ins.src[0]), (Operand::Reg(_), Operand::Reg(_))),
            _ => matches!(
                (ins.dst, ins.src[0], ins.src[1]),
                (Operand::Reg(_), Operand::Reg(_), Operand::Reg(_))
            ),
        };
        if !shape_ok {
            out.push(format!("fps[{idx}]: malformed operands for {}", op.mnemonic()));
        }
        if let Some(m) = ins.mem() {
            if m.space == Space::Lm {
                if !ae.has_local_memory() {
                    out.push(format!("fps[{idx}]: LM access requires AE1+"));
                }
                check_lm(&mut out, idx, "fps", m.addr as usize, ins.words().max(1));
            }
        }
    }

    for (idx, ins) in p.lscfu.iter().enumerate() {
        let op = ins.op;
        if !op.is_memory() {
            out.push(format!("lscfu[{idx}]: {} is not a Load-Store CFU instruction", op.mnemonic()));
            continue;
        }
        if op.is_block() && !ae.has_block_transfer() {
            out.push(format!("lscfu[{idx}]: {} requires AE3+", op.mnemonic()));
        }
        if let Some(b) = ins.block {
            if b.is_empty() || b.len() > BLOCK_ELEMS {
                out.push(format!("lscfu[{idx}]: block of {} elements (1..=16 allowed)", b.len()));
            }
        }
        let local = [ins.dst, ins.src[0]].into_iter().find_map(|o| match o {
            Operand::Local(a) => Some(a as usize),
            _ => None,
        });
        match (local, ins.mem()) {
            (Some(a), Some(m)) if m.space == Space::Gm => check_lm(&mut out, idx, "lscfu", a, ins.words()),
            _ => out.push(format!("lscfu[{idx}]: needs one LM endpoint and one GM reference")),
        }
    }
    out
}

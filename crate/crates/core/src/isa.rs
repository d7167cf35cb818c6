//! PE instruction set and the program container.
//!
//! Assembly syntax, one instruction per line:
//!
//! ```text
//! .fps
//! LOAD r3, @GM:120
//! BLOCK_LOAD r0, @LM:16 {4x4/4,1}
//! DOT4 r48, r0, r32
//! FADD r32, r32, r48
//! STORE @LM:64, r32
//! .lscfu
//! BLOCK_LOAD LM:16, @GM:400 {4x4/100,1}
//! STORE @GM:0, LM:64
//! ```
//!
//! `rN` is a register, `LM:a` a contiguous local-memory endpoint used by the
//! Load-Store CFU, and `@SPACE:a` the memory side of a transfer. For block
//! transfers the `{RxC/rs,cs}` suffix gives the tile shape and the strides
//! of the `@` side: element `(r, c)` lives at `a + r*rs + c*cs`, while the
//! other side is packed row by row.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Bytes per encoded instruction when sizing instruction memory.
pub const INSTRUCTION_BYTES: usize = 8;
/// Elements in a full block transfer (one 4x4 tile).
pub const BLOCK_ELEMS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Opcode {
    Load,
    Store,
    BlockLoad,
    BlockStore,
    Fmul,
    Fadd,
    Fsub,
    Fdiv,
    Fsqrt,
    Dot2,
    Dot3,
    Dot4,
    Nop,
}

impl Opcode {
    pub const ALL: [Opcode; 13] = [
        Opcode::Load,
        Opcode::Store,
        Opcode::BlockLoad,
        Opcode::BlockStore,
        Opcode::Fmul,
        Opcode::Fadd,
        Opcode::Fsub,
        Opcode::Fdiv,
        Opcode::Fsqrt,
        Opcode::Dot2,
        Opcode::Dot3,
        Opcode::Dot4,
        Opcode::Nop,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Load => "LOAD",
            Opcode::Store => "STORE",
            Opcode::BlockLoad => "BLOCK_LOAD",
            Opcode::BlockStore => "BLOCK_STORE",
            Opcode::Fmul => "FMUL",
            Opcode::Fadd => "FADD",
            Opcode::Fsub => "FSUB",
            Opcode::Fdiv => "FDIV",
            Opcode::Fsqrt => "FSQRT",
            Opcode::Dot2 => "DOT2",
            Opcode::Dot3 => "DOT3",
            Opcode::Dot4 => "DOT4",
            Opcode::Nop => "NOP",
        }
    }

    /// Width `k` of a DOT instruction.
    pub fn dot_width(self) -> Option<usize> {
        match self {
            Opcode::Dot2 => Some(2),
            Opcode::Dot3 => Some(3),
            Opcode::Dot4 => Some(4),
            _ => None,
        }
    }

    /// Floating-point operations performed: DOTk is k multiplies and k-1 adds.
    pub fn flops(self) -> u64 {
        match self {
            Opcode::Fmul | Opcode::Fadd | Opcode::Fsub | Opcode::Fdiv | Opcode::Fsqrt => 1,
            op => op.dot_width().map_or(0, |k| 2 * k as u64 - 1),
        }
    }

    pub fn is_memory(self) -> bool {
        matches!(self, Opcode::Load | Opcode::Store | Opcode::BlockLoad | Opcode::BlockStore)
    }

    pub fn is_block(self) -> bool {
        matches!(self, Opcode::BlockLoad | Opcode::BlockStore)
    }
}

impl FromStr for Opcode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Opcode::ALL
            .into_iter()
            .find(|op| op.mnemonic() == s)
            .ok_or_else(|| Error::Parse { line: 0, msg: format!("unknown opcode {s:?}") })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Space {
    Lm,
    Gm,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Lm => "LM",
            Space::Gm => "GM",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct MemRef {
    pub space: Space,
    pub addr: u32,
}

impl MemRef {
    pub fn gm(addr: usize) -> Self {
        Self { space: Space::Gm, addr: addr as u32 }
    }

    pub fn lm(addr: usize) -> Self {
        Self { space: Space::Lm, addr: addr as u32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub enum Operand {
    #[default]
    None,
    Reg(u8),
    /// Packed local-memory endpoint of a Load-Store CFU transfer.
    Local(u32),
    /// Memory side of a transfer.
    Mem(MemRef),
}

impl Operand {
    pub fn reg(self) -> Option<u8> {
        match self {
            Operand::Reg(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::None => Ok(()),
            Operand::Reg(r) => write!(f, "r{r}"),
            Operand::Local(a) => write!(f, "LM:{a}"),
            Operand::Mem(m) => write!(f, "@{}:{}", m.space, m.addr),
        }
    }
}

impl FromStr for Operand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Parse { line: 0, msg: format!("bad operand {s:?}") };
        let num = |t: &str| t.parse::<u32>().map_err(|_| err());
        if let Some(r) = s.strip_prefix('r') {
            return r.parse::<u8>().map(Operand::Reg).map_err(|_| err());
        }
        if let Some(a) = s.strip_prefix("LM:") {
            return Ok(Operand::Local(num(a)?));
        }
        if let Some(a) = s.strip_prefix("@LM:") {
            return Ok(Operand::Mem(MemRef { space: Space::Lm, addr: num(a)? }));
        }
        if let Some(a) = s.strip_prefix("@GM:") {
            return Ok(Operand::Mem(MemRef { space: Space::Gm, addr: num(a)? }));
        }
        Err(err())
    }
}

/// Shape of a block transfer; strides apply to the `@` side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BlockShape {
    pub rows: u8,
    pub cols: u8,
    pub row_stride: u32,
    pub col_stride: u32,
}

impl BlockShape {
    pub fn new(rows: usize, cols: usize, row_stride: usize, col_stride: usize) -> Self {
        Self {
            rows: rows as u8,
            cols: cols as u8,
            row_stride: row_stride as u32,
            col_stride: col_stride as u32,
        }
    }

    /// `rows × cols` packed row by row.
    pub fn packed(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, cols, 1)
    }

    pub fn len(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Offsets of the strided side in packed order.
    pub fn offsets(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.rows as u32).flat_map(move |r| {
            (0..self.cols as u32).map(move |c| r * self.row_stride + c * self.col_stride)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Instruction {
    pub op: Opcode,
    pub dst: Operand,
    pub src: [Operand; 2],
    pub block: Option<BlockShape>,
}

impl Instruction {
    fn new(op: Opcode, dst: Operand, a: Operand, b: Operand) -> Self {
        Self { op, dst, src: [a, b], block: None }
    }

    pub fn nop() -> Self {
        Self::new(Opcode::Nop, Operand::None, Operand::None, Operand::None)
    }

    pub fn arith(op: Opcode, dst: u8, a: u8, b: u8) -> Self {
        Self::new(op, Operand::Reg(dst), Operand::Reg(a), Operand::Reg(b))
    }

    pub fn fmul(dst: u8, a: u8, b: u8) -> Self {
        Self::arith(Opcode::Fmul, dst, a, b)
    }

    pub fn fadd(dst: u8, a: u8, b: u8) -> Self {
        Self::arith(Opcode::Fadd, dst, a, b)
    }

    pub fn fsqrt(dst: u8, a: u8) -> Self {
        Self::new(Opcode::Fsqrt, Operand::Reg(dst), Operand::Reg(a), Operand::None)
    }

    /// DOT`k`: `dst = Σ r[a+i] * r[b+i]` for `i < k`.
    pub fn dot(k: usize, dst: u8, a: u8, b: u8) -> Self {
        let op = match k {
            2 => Opcode::Dot2,
            3 => Opcode::Dot3,
            4 => Opcode::Dot4,
            _ => panic!("DOT width must be 2, 3 or 4, got {k}"),
        };
        Self::arith(op, dst, a, b)
    }

    /// Scalar load into a register (FPS) or a local-memory word (LS-CFU).
    pub fn load(dst: Operand, from: MemRef) -> Self {
        Self::new(Opcode::Load, dst, Operand::Mem(from), Operand::None)
    }

    pub fn store(to: MemRef, src: Operand) -> Self {
        Self::new(Opcode::Store, Operand::Mem(to), src, Operand::None)
    }

    pub fn block_load(dst: Operand, from: MemRef, shape: BlockShape) -> Self {
        Self { block: Some(shape), ..Self::new(Opcode::BlockLoad, dst, Operand::Mem(from), Operand::None) }
    }

    pub fn block_store(to: MemRef, src: Operand, shape: BlockShape) -> Self {
        Self { block: Some(shape), ..Self::new(Opcode::BlockStore, Operand::Mem(to), src, Operand::None) }
    }

    /// Memory side of a transfer.
    pub fn mem(&self) -> Option<MemRef> {
        [self.dst, self.src[0]].into_iter().find_map(|o| match o {
            Operand::Mem(m) => Some(m),
            _ => None,
        })
    }

    /// Number of words moved by a transfer.
    pub fn words(&self) -> usize {
        match self.op {
            Opcode::Load | Opcode::Store => 1,
            Opcode::BlockLoad | Opcode::BlockStore => self.block.map_or(0, |b| b.len()),
            _ => 0,
        }
    }

    /// Registers read, including every lane of a DOT operand group.
    pub fn reads(&self) -> impl Iterator<Item = u8> + '_ {
        let width = self.op.dot_width().unwrap_or(1) as u8;
        let lanes = if self.op == Opcode::BlockStore { self.words() as u8 } else { width };
        self.src
            .iter()
            .filter_map(|o| o.reg())
            .flat_map(move |r| (0..lanes).map(move |i| r.wrapping_add(i)))
    }

    /// Registers written.
    pub fn writes(&self) -> impl Iterator<Item = u8> + '_ {
        let lanes = if self.op == Opcode::BlockLoad { self.words() as u8 } else { 1 };
        self.dst.reg().into_iter().flat_map(move |r| (0..lanes).map(move |i| r.wrapping_add(i)))
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.op.mnemonic())?;
        let ops: Vec<String> = std::iter::once(self.dst)
            .chain(self.src)
            .filter(|o| *o != Operand::None)
            .map(|o| o.to_string())
            .collect();
        if !ops.is_empty() {
            write!(f, " {}", ops.join(", "))?;
        }
        if let Some(b) = self.block {
            write!(f, " {{{}x{}/{},{}}}", b.rows, b.cols, b.row_stride, b.col_stride)?;
        }
        Ok(())
    }
}

impl FromStr for Instruction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (body, block) = match s.split_once('{') {
            Some((body, rest)) => {
                let shape = rest.trim_end_matches('}');
                (body.trim(), Some(parse_shape(shape)?))
            }
            None => (s, None),
        };
        let (mn, rest) = body.split_once(' ').unwrap_or((body, ""));
        let op: Opcode = mn.parse()?;
        let mut ops = rest
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Operand::from_str)
            .collect::<Result<Vec<_>>>()?;
        if ops.len() > 3 {
            return Err(Error::Parse { line: 0, msg: format!("too many operands in {s:?}") });
        }
        ops.resize(3, Operand::None);
        if op.is_block() != block.is_some() {
            return Err(Error::Parse { line: 0, msg: format!("block shape mismatch in {s:?}") });
        }
        Ok(Instruction { op, dst: ops[0], src: [ops[1], ops[2]], block })
    }
}

fn parse_shape(s: &str) -> Result<BlockShape> {
    let err = || Error::Parse { line: 0, msg: format!("bad block shape {s:?}") };
    let (dims, strides) = s.split_once('/').ok_or_else(err)?;
    let (r, c) = dims.split_once('x').ok_or_else(err)?;
    let (rs, cs) = strides.split_once(',').ok_or_else(err)?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|_| err());
    Ok(BlockShape::new(p(r)?, p(c)?, p(rs)?, p(cs)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum KernelKind {
    Ddot,
    Dnrm2,
    Daxpy,
    Gemv,
    Gemm,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] =
        [KernelKind::Ddot, KernelKind::Dnrm2, KernelKind::Daxpy, KernelKind::Gemv, KernelKind::Gemm];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Ddot => "ddot",
            KernelKind::Dnrm2 => "dnrm2",
            KernelKind::Daxpy => "daxpy",
            KernelKind::Gemv => "gemv",
            KernelKind::Gemm => "gemm",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Spec(format!("unknown kernel {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StaticCounts {
    /// Accounted flops (the metric convention, see `metrics::flop_count`).
    pub flops: u64,
    /// Arithmetic operations actually present in the instruction stream.
    pub arith_flops: u64,
    pub dot4_issues: u64,
    pub gm_words_moved: u64,
    pub lm_words_moved: u64,
}

/// Where the operands and the result live in the global-memory image.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct GmLayout {
    /// `(name, base, len)` of each operand region.
    pub regions: Vec<(String, usize, usize)>,
    /// Region holding the result after execution.
    pub output: (usize, usize),
    pub total_words: usize,
}

impl GmLayout {
    pub fn region(&self, name: &str) -> Option<(usize, usize)> {
        self.regions.iter().find(|(n, ..)| n == name).map(|&(_, b, l)| (b, l))
    }
}

/// Compiled kernel: the two instruction streams plus static facts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Program {
    pub label: String,
    pub fps: Vec<Instruction>,
    pub lscfu: Vec<Instruction>,
    pub counts: StaticCounts,
    /// Bytes of instruction memory occupied by the loop-body templates.
    pub code_size: usize,
    /// Local-memory words touched (highest address + 1).
    pub lm_footprint: usize,
    pub layout: GmLayout,
}

impl Program {
    pub fn empty() -> Self {
        Self {
            label: "empty".into(),
            fps: Vec::new(),
            lscfu: Vec::new(),
            counts: StaticCounts::default(),
            code_size: 0,
            lm_footprint: 0,
            layout: GmLayout::default(),
        }
    }

    /// Program with only an FPS stream; counts derived from the instructions.
    pub fn from_streams(fps: Vec<Instruction>, lscfu: Vec<Instruction>) -> Self {
        let arith: u64 = fps.iter().map(|i| i.op.flops()).sum();
        let dot4 = fps.iter().filter(|i| i.op == Opcode::Dot4).count() as u64;
        let moved = |space: Space| -> u64 {
            fps.iter()
                .chain(&lscfu)
                .filter(|i| i.mem().is_some_and(|m| m.space == space))
                .map(|i| i.words() as u64)
                .sum()
        };
        let counts = StaticCounts {
            flops: arith,
            arith_flops: arith,
            dot4_issues: dot4,
            gm_words_moved: moved(Space::Gm),
            lm_words_moved: moved(Space::Lm),
        };
        let code_size = (fps.len() + lscfu.len()) * INSTRUCTION_BYTES;
        Self { label: "custom".into(), fps, lscfu, counts, code_size, lm_footprint: 0, layout: GmLayout::default() }
    }

    pub fn instruction_count(&self) -> usize {
        self.fps.len() + self.lscfu.len()
    }

    pub fn to_asm(&self) -> String {
        let mut s = format!(
            "; {}\n; flops={} dot4={} gm_words={} lm_words={} code_bytes={}\n.fps\n",
            self.label,
            self.counts.flops,
            self.counts.dot4_issues,
            self.counts.gm_words_moved,
            self.counts.lm_words_moved,
            self.code_size
        );
        for i in &self.fps {
            s.push_str(&i.to_string());
            s.push('\n');
        }
        s.push_str(".lscfu\n");
        for i in &self.lscfu {
            s.push_str(&i.to_string());
            s.push('\n');
        }
        s
    }
}

/// Parse assembly back into `(fps, lscfu)` streams.
pub fn parse_asm(text: &str) -> Result<(Vec<Instruction>, Vec<Instruction>)> {
    let mut fps = Vec::new();
    let mut ls = Vec::new();
    let mut in_ls = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("").trim();
        match line {
            "" => continue,
            ".fps" => in_ls = false,
            ".lscfu" => in_ls = true,
            _ => {
                let ins: Instruction = line.parse().map_err(|e| match e {
                    Error::Parse { msg, .. } => Error::Parse { line: idx + 1, msg },
                    other => other,
                })?;
                if in_ls { &mut ls } else { &mut fps }.push(ins);
            }
        }
    }
    Ok((fps, ls))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn display_forms() {
        assert_eq!(Instruction::fmul(5, 1, 2).to_string(), "FMUL r5, r1, r2");
        assert_eq!(Instruction::load(Operand::Reg(3), MemRef::gm(120)).to_string(), "LOAD r3, @GM:120");
        assert_eq!(
            Instruction::block_load(Operand::Local(16), MemRef::gm(400), BlockShape::new(4, 4, 100, 1))
                .to_string(),
            "BLOCK_LOAD LM:16, @GM:400 {4x4/100,1}"
        );
        assert_eq!(Instruction::store(MemRef::lm(64), Operand::Reg(32)).to_string(), "STORE @LM:64, r32");
        assert_eq!(Instruction::nop().to_string(), "NOP");
    }

    #[test]
    fn dot_reads_all_lanes() {
        let d = Instruction::dot(4, 48, 0, 32);
        let reads: Vec<u8> = d.reads().collect();
        assert_eq!(reads, vec![0, 1, 2, 3, 32, 33, 34, 35]);
        assert_eq!(d.writes().collect::<Vec<_>>(), vec![48]);
        assert_eq!(Opcode::Dot4.flops(), 7);
        assert_eq!(Opcode::Dot2.flops(), 3);
    }

    #[test]
    fn parse_errors() {
        assert!("FOO r1".parse::<Instruction>().is_err());
        assert!("FMUL r1, x2".parse::<Instruction>().is_err());
        assert!("BLOCK_LOAD r0, @LM:0".parse::<Instruction>().is_err());
        assert!(matches!(parse_asm(".fps\nNOP\nBAD\n"), Err(Error::Parse { line: 3, .. })));
    }

    fn arb_operand() -> impl Strategy<Value = Operand> {
        prop_oneof![
            any::<u8>().prop_map(Operand::Reg),
            any::<u32>().prop_map(Operand::Local),
            any::<u32>().prop_map(|a| Operand::Mem(MemRef { space: Space::Gm, addr: a })),
            any::<u32>().prop_map(|a| Operand::Mem(MemRef { space: Space::Lm, addr: a })),
        ]
    }

    fn arb_instruction() -> impl Strategy<Value = Instruction> {
        (
            0usize..Opcode::ALL.len(),
            arb_operand(),
            arb_operand(),
            prop::option::of(arb_operand()),
            (1usize..=4, 1usize..=4, 0usize..200, 0usize..200),
        )
            .prop_map(|(op, d, a, b, (r, c, rs, cs))| {
                let op = Opcode::ALL[op];
                let block = op.is_block().then(|| BlockShape::new(r, c, rs, cs));
                Instruction { op, dst: d, src: [a, b.unwrap_or(Operand::None)], block }
            })
    }

    proptest! {
        #[test]
        fn asm_round_trips(fps in prop::collection::vec(arb_instruction(), 0..20),
                           ls in prop::collection::vec(arb_instruction(), 0..20)) {
            let p = Program::from_streams(fps.clone(), ls.clone());
            let (f2, l2) = parse_asm(&p.to_asm()).unwrap();
            prop_assert_eq!(f2, fps);
            prop_assert_eq!(l2, ls);
        }
    }
}

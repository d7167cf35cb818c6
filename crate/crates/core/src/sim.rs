//! Cycle-level execution of a [`Program`] on one PE.
//!
//! The FPS issues at most one instruction per cycle, in order. Every
//! register carries a ready cycle; an instruction issues only when its
//! sources (and, for the destination, the previous write) are ready. Values
//! are computed at issue and become visible at the ready cycle.
//!
//! The Load-Store CFU runs its own in-order stream beside the FPS. The two
//! meet only in local memory, where every word has a full/empty flag: the
//! CFU fills empty words from global memory and drains full ones back, the
//! FPS consumes full words and fills empty ones.
//!
//! Timing of data movement:
//!
//! * global memory: one port, `gm_latency` cycles deep. A scalar transaction
//!   occupies the port for `1 + gm_handshake` cycles, a block transaction
//!   for `gm_handshake + words`; word `i` of a block arrives at
//!   `start + gm_handshake + gm_latency + i`.
//! * FPS <-> CFU channel: every beat (1 word, 4 from AE4 on) carries its own
//!   request/acknowledge, so a beat takes `1 + channel_handshake` cycles and
//!   the word in beat `i` lands at `start + lm_latency + (i + 1) * beat - 1`.
//!   Block transfers save issue slots here, not handshakes.
//! * without local memory (AE0) the FPS talks to global memory itself and
//!   is held for the whole `1 + gm_handshake` handshake.

use serde::Serialize;

use crate::compiler::{compile_kernel, validate_program};
use crate::config::PeConfig;
use crate::error::{Error, Result};
use crate::isa::{Instruction, KernelKind, Opcode, Operand, Program, Space};
use crate::matrix::{
    max_rel_error, oracle_axpy, oracle_dot, oracle_gemm, oracle_gemv, oracle_nrm2, seeded_rng, Matrix, Vector,
};
use rand::Rng;

/// DOT`k` on the reconfigurable data-path: products summed by a balanced
/// tree, `(a0b0 + a1b1) + (a2b2 + a3b3)` for `k = 4`.
pub fn rdp_eval(k: usize, a: &[f64], b: &[f64]) -> f64 {
    assert!((2..=4).contains(&k) && a.len() >= k && b.len() >= k, "rdp_eval needs k in 2..=4 operand pairs");
    let p: Vec<f64> = (0..k).map(|i| a[i] * b[i]).collect();
    match k {
        2 => p[0] + p[1],
        3 => (p[0] + p[1]) + p[2],
        _ => (p[0] + p[1]) + (p[2] + p[3]),
    }
}

/// Issue counts per unit; pipelined units count one cycle per issue,
/// unpipelined ones their full occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct UnitBusy {
    pub fps_issue: u64,
    pub mul: u64,
    pub add: u64,
    pub rdp: u64,
    pub div: u64,
    pub sqrt: u64,
    pub channel: u64,
    pub gm_port: u64,
    pub lscfu_issue: u64,
}

impl UnitBusy {
    pub fn max(&self) -> u64 {
        [self.fps_issue, self.mul, self.add, self.rdp, self.div, self.sqrt, self.channel, self.gm_port, self.lscfu_issue]
            .into_iter()
            .max()
            .unwrap_or(0)
    }
}

/// What the FPS did in each cycle. The fields sum to the latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CycleBreakdown {
    pub busy: u64,
    pub raw_hazard: u64,
    pub lm_wait: u64,
    pub gm_wait: u64,
    pub bandwidth_wait: u64,
    /// Waiting for the unpipelined divide/square-root unit.
    pub structural: u64,
    /// FPS stream finished; waiting for pipelines and outstanding stores.
    pub drain: u64,
}

impl CycleBreakdown {
    pub fn total(&self) -> u64 {
        self.busy + self.raw_hazard + self.lm_wait + self.gm_wait + self.bandwidth_wait + self.structural + self.drain
    }

    pub fn stalls(&self) -> u64 {
        self.total() - self.busy - self.drain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stall {
    Raw,
    Lm,
    Gm,
    Bandwidth,
    Structural,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub latency: u64,
    pub units: UnitBusy,
    pub cycles: CycleBreakdown,
    pub gm_words_moved: u64,
    pub lm_words_moved: u64,
    pub dot4_issued: u64,
    /// Accounted flops of the program, credited once it completes.
    pub flops_retired: u64,
    /// Arithmetic operations actually executed (DOT4 counts 7).
    pub arith_ops_retired: u64,
    /// Contents of the program's output region after execution.
    pub output: Vec<f64>,
    #[serde(skip)]
    pub registers: Vec<f64>,
}

/// One line of the optional execution trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub cycle: u64,
    pub unit: &'static str,
    pub instruction: Instruction,
}

impl std::fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {}", self.cycle, self.unit, self.instruction)
    }
}

/// Run `p` against the global-memory image `gm`.
pub fn simulate(p: &Program, cfg: &PeConfig, gm: &[f64]) -> Result<SimResult> {
    Machine::new(p, cfg, gm)?.run(None)
}

/// As [`simulate`], also returning every issue event.
pub fn simulate_traced(p: &Program, cfg: &PeConfig, gm: &[f64]) -> Result<(SimResult, Vec<TraceEvent>)> {
    let mut trace = Vec::new();
    let r = Machine::new(p, cfg, gm)?.run(Some(&mut trace))?;
    Ok((r, trace))
}

struct Machine<'a> {
    p: &'a Program,
    cfg: &'a PeConfig,
    regs: Vec<f64>,
    reg_ready: Vec<u64>,
    lm: Vec<f64>,
    lm_full: Vec<bool>,
    lm_ready: Vec<u64>,
    gm: Vec<f64>,
    gm_ready: Vec<u64>,
    port_free: u64,
    channel_free: u64,
    fps_hold_until: u64,
    div_free: u64,
    sqrt_free: u64,
    /// Latest completion of anything issued so far.
    completion: u64,
    /// Latest cycle at which anything in flight changes state.
    pending: u64,
    units: UnitBusy,
    cycles: CycleBreakdown,
    gm_words: u64,
    lm_words: u64,
    dot4: u64,
    arith_ops: u64,
}

impl<'a> Machine<'a> {
    fn new(p: &'a Program, cfg: &'a PeConfig, gm: &[f64]) -> Result<Self> {
        cfg.validate()?;
        let violations = validate_program(p, cfg);
        if !violations.is_empty() {
            return Err(Error::InvalidProgram(violations.join("; ")));
        }
        let regs = cfg.register_count;
        let lm = cfg.lm_words();
        Ok(Self {
            p,
            cfg,
            regs: vec![0.0; regs],
            reg_ready: vec![0; regs],
            lm: vec![0.0; lm],
            lm_full: vec![false; lm],
            lm_ready: vec![0; lm],
            gm: gm.to_vec(),
            gm_ready: vec![0; gm.len()],
            port_free: 0,
            channel_free: 0,
            fps_hold_until: 0,
            div_free: 0,
            sqrt_free: 0,
            completion: 0,
            pending: 0,
            units: UnitBusy::default(),
            cycles: CycleBreakdown::default(),
            gm_words: 0,
            lm_words: 0,
            dot4: 0,
            arith_ops: 0,
        })
    }

    fn done_at(&mut self, c: u64) {
        self.completion = self.completion.max(c);
        self.pending = self.pending.max(c);
    }

    fn busy_until(&mut self, c: u64) {
        self.pending = self.pending.max(c);
    }

    fn gm_check(&self, addr: usize) -> Result<()> {
        if addr >= self.gm.len() {
            return Err(Error::AddressFault(format!("GM address {addr} outside image of {} words", self.gm.len())));
        }
        Ok(())
    }

    fn regs_ready(&self, ins: &Instruction, t: u64) -> bool {
        ins.reads().chain(ins.writes()).all(|r| self.reg_ready[r as usize] <= t)
    }

    fn run(mut self, mut trace: Option<&mut Vec<TraceEvent>>) -> Result<SimResult> {
        let fps = &self.p.fps;
        let ls = &self.p.lscfu;
        let (mut fpc, mut lpc) = (0usize, 0usize);
        let threshold = self.cfg.gm_latency
            + [self.cfg.rdp_depth(4), self.cfg.div_depth, self.cfg.sqrt_depth, self.cfg.mul_depth, self.cfg.add_depth]
                .into_iter()
                .max()
                .unwrap_or(0);
        let mut t = 0u64;
        while fpc < fps.len() || lpc < ls.len() {
            let mut progressed = false;
            if lpc < ls.len() && self.ls_try(&ls[lpc], t)? {
                if let Some(tr) = trace.as_deref_mut() {
                    tr.push(TraceEvent { cycle: t, unit: "lscfu", instruction: ls[lpc] });
                }
                self.units.lscfu_issue += 1;
                lpc += 1;
                progressed = true;
            }
            if t < self.fps_hold_until {
                self.cycles.gm_wait += 1;
            } else if fpc < fps.len() {
                match self.fps_try(&fps[fpc], t)? {
                    None => {
                        if let Some(tr) = trace.as_deref_mut() {
                            tr.push(TraceEvent { cycle: t, unit: "fps", instruction: fps[fpc] });
                        }
                        self.cycles.busy += 1;
                        self.units.fps_issue += 1;
                        fpc += 1;
                        progressed = true;
                    }
                    Some(Stall::Raw) => self.cycles.raw_hazard += 1,
                    Some(Stall::Lm) => self.cycles.lm_wait += 1,
                    Some(Stall::Gm) => self.cycles.gm_wait += 1,
                    Some(Stall::Bandwidth) => self.cycles.bandwidth_wait += 1,
                    Some(Stall::Structural) => self.cycles.structural += 1,
                }
            } else {
                self.cycles.drain += 1;
            }
            if !progressed && t > self.pending + threshold {
                return Err(Error::Deadlock {
                    cycle: t,
                    detail: format!(
                        "fps at {fpc}/{} ({}), lscfu at {lpc}/{} ({})",
                        fps.len(),
                        fps.get(fpc).map(|i| i.to_string()).unwrap_or_else(|| "done".into()),
                        ls.len(),
                        ls.get(lpc).map(|i| i.to_string()).unwrap_or_else(|| "done".into()),
                    ),
                });
            }
            t += 1;
        }
        let latency = self.completion;
        // Cycles after the loop: the FPS is either still held by a global
        // memory handshake or simply waiting for results to land.
        let held = self.fps_hold_until.clamp(t, latency) - t;
        self.cycles.gm_wait += held;
        self.cycles.drain += latency - t - held;
        debug_assert_eq!(self.cycles.total(), latency);

        let (base, len) = self.p.layout.output;
        let output = if len > 0 && base + len <= self.gm.len() { self.gm[base..base + len].to_vec() } else { Vec::new() };
        Ok(SimResult {
            latency,
            units: self.units,
            cycles: self.cycles,
            gm_words_moved: self.gm_words,
            lm_words_moved: self.lm_words,
            dot4_issued: self.dot4,
            flops_retired: self.p.counts.flops,
            arith_ops_retired: self.arith_ops,
            output,
            registers: self.regs,
        })
    }

    /// Try to issue `ins` on the FPS at cycle `t`. `None` means it issued.
    fn fps_try(&mut self, ins: &Instruction, t: u64) -> Result<Option<Stall>> {
        if !self.regs_ready(ins, t) {
            return Ok(Some(Stall::Raw));
        }
        let cfg = self.cfg;
        let reg = |o: Operand| o.reg().map(|r| r as usize).unwrap_or(0);
        match ins.op {
            Opcode::Nop => self.done_at(t + 1),
            Opcode::Fmul | Opcode::Fadd | Opcode::Fsub | Opcode::Fdiv | Opcode::Fsqrt => {
                let a = self.regs[reg(ins.src[0])];
                let b = self.regs[reg(ins.src[1])];
                let (v, depth) = match ins.op {
                    Opcode::Fmul => (a * b, cfg.mul_depth),
                    Opcode::Fadd => (a + b, cfg.add_depth),
                    Opcode::Fsub => (a - b, cfg.add_depth),
                    Opcode::Fdiv => (a / b, cfg.div_depth),
                    _ => (a.sqrt(), cfg.sqrt_depth),
                };
                match ins.op {
                    Opcode::Fdiv if self.div_free > t => return Ok(Some(Stall::Structural)),
                    Opcode::Fsqrt if self.sqrt_free > t => return Ok(Some(Stall::Structural)),
                    Opcode::Fdiv => {
                        self.div_free = t + depth;
                        self.units.div += depth;
                    }
                    Opcode::Fsqrt => {
                        self.sqrt_free = t + depth;
                        self.units.sqrt += depth;
                    }
                    Opcode::Fmul => self.units.mul += 1,
                    _ => self.units.add += 1,
                }
                self.write_reg(reg(ins.dst), v, t + depth);
                self.arith_ops += 1;
            }
            Opcode::Dot2 | Opcode::Dot3 | Opcode::Dot4 => {
                let k = ins.op.dot_width().unwrap_or(4);
                let (a0, b0) = (reg(ins.src[0]), reg(ins.src[1]));
                let v = rdp_eval(k, &self.regs[a0..a0 + k], &self.regs[b0..b0 + k]);
                self.write_reg(reg(ins.dst), v, t + cfg.rdp_depth(k));
                self.units.rdp += 1;
                self.arith_ops += ins.op.flops();
                if k == 4 {
                    self.dot4 += 1;
                }
            }
            Opcode::Load | Opcode::Store | Opcode::BlockLoad | Opcode::BlockStore => {
                let m = ins.mem().expect("validated memory operand");
                let load = matches!(ins.op, Opcode::Load | Opcode::BlockLoad);
                let offsets: Vec<usize> = match ins.block {
                    Some(b) => b.offsets().map(|o| o as usize).collect(),
                    None => vec![0],
                };
                let base_reg = reg(if load { ins.dst } else { ins.src[0] });
                match m.space {
                    Space::Gm => return self.fps_gm(load, base_reg, m.addr as usize, &offsets, t),
                    Space::Lm => return self.fps_lm(load, base_reg, m.addr as usize, &offsets, t),
                }
            }
        }
        Ok(None)
    }

    fn write_reg(&mut self, r: usize, v: f64, ready: u64) {
        self.regs[r] = v;
        self.reg_ready[r] = ready;
        self.done_at(ready);
    }

    /// Direct global-memory access by the FPS (no local memory).
    fn fps_gm(&mut self, load: bool, reg: usize, base: usize, offsets: &[usize], t: u64) -> Result<Option<Stall>> {
        if self.port_free > t {
            return Ok(Some(Stall::Gm));
        }
        let h = self.cfg.gm_handshake;
        let lat = self.cfg.gm_latency;
        let words = offsets.len() as u64;
        let port = if offsets.len() > 1 { h + words } else { 1 + h };
        for (w, &off) in offsets.iter().enumerate() {
            let a = base + off;
            self.gm_check(a)?;
            let arrive = t + h + lat + w as u64;
            if load {
                let ready = arrive.max(self.gm_ready[a]);
                self.write_reg(reg + w, self.gm[a], ready);
            } else {
                self.gm[a] = self.regs[reg + w];
                self.gm_ready[a] = arrive;
                self.done_at(arrive);
            }
        }
        self.port_free = t + port;
        self.fps_hold_until = t + port;
        self.busy_until(t + port);
        self.units.gm_port += port;
        self.gm_words += words;
        Ok(None)
    }

    /// FPS transfer over the channel to or from local memory.
    fn fps_lm(&mut self, load: bool, reg: usize, base: usize, offsets: &[usize], t: u64) -> Result<Option<Stall>> {
        let addrs: Vec<usize> = offsets.iter().map(|o| base + o).collect();
        let ready_word = |m: &Self, a: usize| m.lm_full[a] && m.lm_ready[a] <= t;
        let ok = if load { addrs.iter().all(|&a| ready_word(self, a)) } else { addrs.iter().all(|&a| !self.lm_full[a]) };
        if !ok {
            return Ok(Some(Stall::Lm));
        }
        if self.channel_free > t {
            return Ok(Some(Stall::Bandwidth));
        }
        let w = self.cfg.channel_words_per_beat();
        let ch = self.cfg.channel_handshake;
        let beat = 1 + ch;
        let busy = addrs.len().div_ceil(w) as u64 * beat;
        for (i, &a) in addrs.iter().enumerate() {
            let lands = t + self.cfg.lm_latency + ((i / w) as u64 + 1) * beat - 1;
            if load {
                self.lm_full[a] = false;
                self.write_reg(reg + i, self.lm[a], lands);
            } else {
                self.lm[a] = self.regs[reg + i];
                self.lm_full[a] = true;
                self.lm_ready[a] = lands;
                self.done_at(lands);
            }
        }
        self.channel_free = t + busy;
        self.busy_until(t + busy);
        self.units.channel += busy;
        self.lm_words += addrs.len() as u64;
        Ok(None)
    }

    /// Try to issue a Load-Store CFU instruction; `true` if it issued.
    fn ls_try(&mut self, ins: &Instruction, t: u64) -> Result<bool> {
        if self.port_free > t {
            return Ok(false);
        }
        let local = [ins.dst, ins.src[0]]
            .into_iter()
            .find_map(|o| match o {
                Operand::Local(a) => Some(a as usize),
                _ => None,
            })
            .expect("validated local operand");
        let gm_base = ins.mem().expect("validated memory operand").addr as usize;
        let (gm_addrs, port): (Vec<usize>, u64) = match ins.block {
            Some(b) => (b.offsets().map(|o| gm_base + o as usize).collect(), self.cfg.gm_handshake + b.len() as u64),
            None => (vec![gm_base], 1 + self.cfg.gm_handshake),
        };
        let load = matches!(ins.op, Opcode::Load | Opcode::BlockLoad);
        let lm_addrs = local..local + gm_addrs.len();
        let ok = if load {
            lm_addrs.clone().all(|a| !self.lm_full[a])
        } else {
            lm_addrs.clone().all(|a| self.lm_full[a] && self.lm_ready[a] <= t)
        };
        if !ok {
            return Ok(false);
        }
        let arrive0 = t + self.cfg.gm_handshake + self.cfg.gm_latency;
        for (i, (&g, l)) in gm_addrs.iter().zip(lm_addrs).enumerate() {
            self.gm_check(g)?;
            let arrive = arrive0 + i as u64;
            if load {
                self.lm[l] = self.gm[g];
                self.lm_full[l] = true;
                self.lm_ready[l] = arrive.max(self.gm_ready[g]);
                self.done_at(self.lm_ready[l]);
            } else {
                self.gm[g] = self.lm[l];
                self.lm_full[l] = false;
                self.gm_ready[g] = arrive;
                self.done_at(arrive);
            }
        }
        self.port_free = t + port;
        self.busy_until(t + port);
        self.units.gm_port += port;
        self.gm_words += gm_addrs.len() as u64;
        Ok(true)
    }
}

/// Seeded operands for `kind`, laid out as the compiled program expects.
pub fn kernel_image(p: &Program, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed);
    let mut gm = vec![0.0; p.layout.total_words];
    for (name, base, len) in &p.layout.regions {
        if name == "out" {
            continue;
        }
        for v in &mut gm[*base..base + len] {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    gm
}

/// Oracle result for the operands in `gm`.
pub fn kernel_oracle(kind: KernelKind, n: usize, p: &Program, gm: &[f64]) -> Result<Vec<f64>> {
    let region = |name: &str| {
        let (b, l) = p.layout.region(name).ok_or_else(|| Error::Spec(format!("layout lacks region {name}")))?;
        Ok::<_, Error>(gm[b..b + l].to_vec())
    };
    Ok(match kind {
        KernelKind::Gemm => {
            let a = Matrix::from_vec(n, n, region("A")?)?;
            let b = Matrix::from_vec(n, n, region("B")?)?;
            let c = Matrix::from_vec(n, n, region("C")?)?;
            oracle_gemm(&a, &b, &c)?.into_vec()
        }
        KernelKind::Gemv => {
            let a = Matrix::from_vec(n, n, region("A")?)?;
            oracle_gemv(&a, &Vector::new(region("x")?), &Vector::new(region("y")?))?.into_vec()
        }
        KernelKind::Ddot => vec![oracle_dot(&Vector::new(region("x")?), &Vector::new(region("y")?))?],
        KernelKind::Dnrm2 => vec![oracle_nrm2(&Vector::new(region("x")?))?],
        KernelKind::Daxpy => {
            let a = region("a")?[0];
            oracle_axpy(a, &Vector::new(region("x")?), &Vector::new(region("y")?))?.into_vec()
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelRun {
    pub kind: KernelKind,
    pub n: usize,
    pub sim: SimResult,
    pub expected: Vec<f64>,
    pub max_rel_error: f64,
}

impl KernelRun {
    pub fn output(&self) -> &[f64] {
        &self.sim.output
    }
}

/// Compile, load seeded operands, simulate, and compare with the oracle.
pub fn run_kernel(kind: KernelKind, n: usize, cfg: &PeConfig, seed: u64) -> Result<KernelRun> {
    let p = compile_kernel(kind, n, cfg)?;
    let gm = kernel_image(&p, seed);
    let expected = kernel_oracle(kind, n, &p, &gm)?;
    let sim = simulate(&p, cfg, &gm)?;
    let err = max_rel_error(&sim.output, &expected);
    Ok(KernelRun { kind, n, sim, expected, max_rel_error: err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AeLevel;
    use crate::isa::{BlockShape, MemRef};

    fn cfg(ae: AeLevel) -> PeConfig {
        PeConfig::new(ae)
    }

    #[test]
    fn rdp_examples() {
        assert_eq!(rdp_eval(4, &[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]), 1.0);
        assert_eq!(rdp_eval(4, &[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]), 20.0);
        assert_eq!(rdp_eval(2, &[1.0, 1.0], &[1.0, -1.0]), 0.0);
        assert_eq!(rdp_eval(3, &[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), 6.0);
    }

    #[test]
    fn empty_program_takes_no_time() {
        let r = simulate(&Program::empty(), &cfg(AeLevel::Ae5), &[]).unwrap();
        assert_eq!(r.latency, 0);
        assert_eq!(r.cycles.total(), 0);
    }

    #[test]
    fn single_dot4_latency() {
        let p = Program::from_streams(vec![Instruction::dot(4, 48, 0, 16)], vec![]);
        let r = simulate(&p, &cfg(AeLevel::Ae2), &[]).unwrap();
        assert_eq!(r.latency, 15);
        assert_eq!(r.dot4_issued, 1);
        assert_eq!(r.cycles.total(), 15);
    }

    #[test]
    fn single_fmul_latency() {
        let p = Program::from_streams(vec![Instruction::fmul(2, 0, 1)], vec![]);
        assert_eq!(simulate(&p, &cfg(AeLevel::Ae0), &[]).unwrap().latency, 5);
    }

    #[test]
    fn dependent_add_waits_for_product() {
        let p = Program::from_streams(vec![Instruction::fmul(2, 0, 1), Instruction::fadd(3, 2, 2)], vec![]);
        let r = simulate(&p, &cfg(AeLevel::Ae0), &[]).unwrap();
        assert_eq!(r.latency, 10);
        assert_eq!(r.cycles.raw_hazard, 4);
    }

    #[test]
    fn gm_load_latency() {
        let c = cfg(AeLevel::Ae0);
        let p = Program::from_streams(vec![Instruction::load(Operand::Reg(0), MemRef::gm(0))], vec![]);
        let r = simulate(&p, &c, &[2.5]).unwrap();
        assert_eq!(r.latency, c.gm_handshake + c.gm_latency);
        assert_eq!(r.registers[0], 2.5);
    }

    #[test]
    fn address_fault() {
        let p = Program::from_streams(vec![Instruction::load(Operand::Reg(0), MemRef::gm(10))], vec![]);
        assert!(matches!(simulate(&p, &cfg(AeLevel::Ae0), &[0.0]), Err(Error::AddressFault(_))));
    }

    #[test]
    fn invalid_program_is_rejected() {
        let p = Program::from_streams(vec![Instruction::dot(4, 48, 0, 16)], vec![]);
        assert!(matches!(simulate(&p, &cfg(AeLevel::Ae1), &[]), Err(Error::InvalidProgram(_))));
    }

    #[test]
    fn reading_an_empty_word_deadlocks() {
        let p = Program::from_streams(vec![Instruction::load(Operand::Reg(0), MemRef::lm(0))], vec![]);
        assert!(matches!(simulate(&p, &cfg(AeLevel::Ae1), &[]), Err(Error::Deadlock { .. })));
    }

    #[test]
    fn lscfu_feeds_fps() {
        let p = Program::from_streams(
            vec![Instruction::block_load(Operand::Reg(0), MemRef::lm(0), BlockShape::packed(1, 4))],
            vec![Instruction::block_load(Operand::Local(0), MemRef::gm(0), BlockShape::packed(1, 4))],
        );
        let (r, trace) = simulate_traced(&p, &cfg(AeLevel::Ae4), &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(&r.registers[..4], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(trace.len(), 2);
        assert!(r.cycles.lm_wait > 0);
        assert_eq!(r.cycles.total(), r.latency);
    }

    #[test]
    fn ddot_ae0_is_bitwise_exact() {
        let r = run_kernel(KernelKind::Ddot, 8, &cfg(AeLevel::Ae0), 42).unwrap();
        assert_eq!(r.sim.output, r.expected);
    }

    #[test]
    fn gemm_matches_oracle_at_every_level() {
        for ae in AeLevel::ALL {
            let r = run_kernel(KernelKind::Gemm, 20, &cfg(ae), 7).unwrap();
            assert!(r.max_rel_error < 1e-10, "{ae}: {}", r.max_rel_error);
            assert_eq!(r.sim.cycles.total(), r.sim.latency);
        }
    }

    #[test]
    fn prefetch_beats_baseline() {
        let a0 = run_kernel(KernelKind::Gemm, 20, &cfg(AeLevel::Ae0), 1).unwrap();
        let a5 = run_kernel(KernelKind::Gemm, 20, &cfg(AeLevel::Ae5), 1).unwrap();
        assert!(a5.sim.latency < a0.sim.latency);
    }

    #[test]
    fn deterministic() {
        let a = run_kernel(KernelKind::Gemv, 20, &cfg(AeLevel::Ae3), 3).unwrap();
        let b = run_kernel(KernelKind::Gemv, 20, &cfg(AeLevel::Ae3), 3).unwrap();
        assert_eq!(a, b);
    }
}

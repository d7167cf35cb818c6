//! Machine configuration: enhancement level, timing and capacity parameters.
//!
//! The on-disk form is a flat `key = value` file (`#` starts a comment).
//! Every field of [`PeConfig`] and [`TileArrayConfig`] has a key; unknown
//! keys are rejected so a typo never silently falls back to a default.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architectural enhancement level. Each level includes every feature of the
/// levels below it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AeLevel {
    /// Baseline PE: scalar FPU, loads straight from global memory.
    Ae0,
    /// Local memory and Load-Store CFU running beside the FPS.
    Ae1,
    /// DOT2/DOT3/DOT4 on the reconfigurable data-path.
    Ae2,
    /// Block load/store between global and local memory.
    Ae3,
    /// 4x wider FPS <-> Load-Store CFU channel.
    Ae4,
    /// Double-buffered prefetch of the next iteration's blocks.
    Ae5,
}

impl AeLevel {
    pub const ALL: [AeLevel; 6] =
        [AeLevel::Ae0, AeLevel::Ae1, AeLevel::Ae2, AeLevel::Ae3, AeLevel::Ae4, AeLevel::Ae5];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn has_local_memory(self) -> bool {
        self >= AeLevel::Ae1
    }

    pub fn has_dot(self) -> bool {
        self >= AeLevel::Ae2
    }

    pub fn has_block_transfer(self) -> bool {
        self >= AeLevel::Ae3
    }

    pub fn has_wide_channel(self) -> bool {
        self >= AeLevel::Ae4
    }

    pub fn has_prefetch(self) -> bool {
        self >= AeLevel::Ae5
    }

    /// Flops per cycle with every arithmetic unit busy: one multiply plus one
    /// add before the RDP exists, one DOT4 (4 mul + 3 add) after.
    pub fn peak_fpc(self) -> f64 {
        if self.has_dot() {
            7.0
        } else {
            2.0
        }
    }

    pub fn previous(self) -> Option<Self> {
        self.index().checked_sub(1).and_then(Self::from_index)
    }
}

impl fmt::Display for AeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AE{}", self.index())
    }
}

impl FromStr for AeLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t.strip_prefix("AE").or_else(|| t.strip_prefix("ae")).unwrap_or(t);
        digits
            .parse::<usize>()
            .ok()
            .and_then(AeLevel::from_index)
            .ok_or_else(|| Error::Config(format!("unknown enhancement level {s:?}")))
    }
}

/// Default power per level, each back-calculated from one reference
/// Gflops/watt figure at 0.2 GHz for 100x100 DGEMM (see `data/pe.cfg`).
pub const DEFAULT_POWER_WATTS: [f64; 6] = [
    7.237_409e-3,
    1.375_162e-2,
    2.931_854e-2,
    2.932_258e-2,
    2.931_002e-2,
    2.930_850e-2,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeConfig {
    pub ae: AeLevel,
    pub register_count: usize,
    pub lm_capacity_bits: usize,
    pub imem_bytes: usize,
    /// Pipelined delay between the PE and global memory.
    pub gm_latency: u64,
    pub lm_latency: u64,
    /// Extra cycles per global-memory transaction (request/acknowledge).
    pub gm_handshake: u64,
    /// Extra cycles per FPS <-> Load-Store CFU beat (request/acknowledge).
    pub channel_handshake: u64,
    /// Words per channel beat; `None` picks 1 below AE4 and 4 from AE4 on.
    pub channel_words: Option<usize>,
    pub mul_depth: u64,
    pub add_depth: u64,
    pub div_depth: u64,
    pub sqrt_depth: u64,
    pub frequency_hz: f64,
    /// `None` uses [`DEFAULT_POWER_WATTS`] for the level.
    pub power_watts: Option<f64>,
}

impl PeConfig {
    pub fn new(ae: AeLevel) -> Self {
        Self {
            ae,
            register_count: 64,
            lm_capacity_bits: 262_144,
            imem_bytes: 16_384,
            gm_latency: 20,
            lm_latency: 1,
            gm_handshake: 3,
            channel_handshake: 1,
            channel_words: None,
            mul_depth: 5,
            add_depth: 5,
            div_depth: 16,
            sqrt_depth: 16,
            frequency_hz: 0.2e9,
            power_watts: None,
        }
    }

    pub fn with_ae(&self, ae: AeLevel) -> Self {
        Self { ae, ..self.clone() }
    }

    pub fn lm_words(&self) -> usize {
        self.lm_capacity_bits / 64
    }

    pub fn channel_words_per_beat(&self) -> usize {
        self.channel_words.unwrap_or(if self.ae.has_wide_channel() { 4 } else { 1 })
    }

    /// Depth of the RDP configured as DOT`k`: one multiply level followed by
    /// a balanced adder tree.
    pub fn rdp_depth(&self, k: usize) -> u64 {
        let add_levels = match k {
            0 | 1 => 0,
            2 => 1,
            _ => 2,
        };
        self.mul_depth + add_levels * self.add_depth
    }

    pub fn power(&self) -> f64 {
        self.power_watts.unwrap_or(DEFAULT_POWER_WATTS[self.ae.index()])
    }

    pub fn validate(&self) -> Result<()> {
        let depths = [
            ("mul_depth", self.mul_depth),
            ("add_depth", self.add_depth),
            ("div_depth", self.div_depth),
            ("sqrt_depth", self.sqrt_depth),
            ("gm_latency", self.gm_latency),
            ("lm_latency", self.lm_latency),
        ];
        if let Some((k, _)) = depths.iter().find(|(_, d)| *d == 0) {
            return Err(Error::Config(format!("{k} must be at least 1")));
        }
        if self.register_count == 0 || self.register_count > 256 {
            return Err(Error::Config("register_count must be in 1..=256".into()));
        }
        if self.channel_words == Some(0) {
            return Err(Error::Config("channel_words must be at least 1".into()));
        }
        if !(self.frequency_hz > 0.0) || self.power_watts.is_some_and(|p| !(p > 0.0)) {
            return Err(Error::Config("frequency and power must be positive".into()));
        }
        Ok(())
    }
}

impl Default for PeConfig {
    fn default() -> Self {
        Self::new(AeLevel::Ae5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileArrayConfig {
    /// Compute grid is `b × b`; the memory column sits to its right.
    pub b: usize,
    pub pe: PeConfig,
    pub hop_latency: u64,
    pub link_words_per_cycle: usize,
}

impl TileArrayConfig {
    pub fn new(b: usize, pe: PeConfig) -> Self {
        Self { b, pe, hop_latency: 4, link_words_per_cycle: 1 }
    }
}

impl Default for TileArrayConfig {
    fn default() -> Self {
        Self::new(2, PeConfig::default())
    }
}

/// Everything a config file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub pe: PeConfig,
    pub hop_latency: u64,
    pub link_words_per_cycle: usize,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let t = TileArrayConfig::default();
        Self { pe: t.pe, hop_latency: t.hop_latency, link_words_per_cycle: t.link_words_per_cycle }
    }
}

impl ConfigFile {
    pub fn tile_config(&self, b: usize) -> TileArrayConfig {
        TileArrayConfig {
            b,
            pe: self.pe.clone(),
            hop_latency: self.hop_latency,
            link_words_per_cycle: self.link_words_per_cycle,
        }
    }

    /// Render every key with its current value.
    pub fn to_text(&self) -> String {
        let p = &self.pe;
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        [
            format!("ae = {}", p.ae),
            format!("register_count = {}", p.register_count),
            format!("lm_capacity_bits = {}", p.lm_capacity_bits),
            format!("imem_bytes = {}", p.imem_bytes),
            format!("gm_latency = {}", p.gm_latency),
            format!("lm_latency = {}", p.lm_latency),
            format!("gm_handshake = {}", p.gm_handshake),
            format!("channel_handshake = {}", p.channel_handshake),
            format!("channel_words = {}", opt(p.channel_words.map(|w| w.to_string()))),
            format!("mul_depth = {}", p.mul_depth),
            format!("add_depth = {}", p.add_depth),
            format!("div_depth = {}", p.div_depth),
            format!("sqrt_depth = {}", p.sqrt_depth),
            format!("frequency_hz = {}", p.frequency_hz),
            format!("power_watts = {}", opt(p.power_watts.map(|w| w.to_string()))),
            format!("hop_latency = {}", self.hop_latency),
            format!("link_words_per_cycle = {}", self.link_words_per_cycle),
        ]
        .join("\n")
            + "\n"
    }
}

impl FromStr for ConfigFile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        for (idx, raw) in s.lines().enumerate() {
            let line = idx + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let (key, value) = text
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parse { line, msg: format!("expected key = value, got {text:?}") })?;
            let bad = |e: String| Error::Parse { line, msg: format!("{key}: {e}") };
            let int = || value.parse::<u64>().map_err(|e| bad(e.to_string()));
            let float = || value.parse::<f64>().map_err(|e| bad(e.to_string()));
            let p = &mut cfg.pe;
            match key {
                "ae" => p.ae = value.parse().map_err(|e: Error| bad(e.to_string()))?,
                "register_count" => p.register_count = int()? as usize,
                "lm_capacity_bits" => p.lm_capacity_bits = int()? as usize,
                "imem_bytes" => p.imem_bytes = int()? as usize,
                "gm_latency" => p.gm_latency = int()?,
                "lm_latency" => p.lm_latency = int()?,
                "gm_handshake" => p.gm_handshake = int()?,
                "channel_handshake" => p.channel_handshake = int()?,
                "channel_words" => {
                    p.channel_words = if value == "auto" { None } else { Some(int()? as usize) }
                }
                "mul_depth" => p.mul_depth = int()?,
                "add_depth" => p.add_depth = int()?,
                "div_depth" => p.div_depth = int()?,
                "sqrt_depth" => p.sqrt_depth = int()?,
                "frequency_hz" => p.frequency_hz = float()?,
                "power_watts" => {
                    p.power_watts = if value == "auto" { None } else { Some(float()?) }
                }
                "hop_latency" => cfg.hop_latency = int()?,
                "link_words_per_cycle" => cfg.link_words_per_cycle = int()? as usize,
                other => {
                    return Err(Error::Parse { line, msg: format!("unknown key {other:?}") })
                }
            }
        }
        cfg.pe.validate()?;
        if cfg.link_words_per_cycle == 0 {
            return Err(Error::Config("link_words_per_cycle must be at least 1".into()));
        }
        Ok(cfg)
    }
}

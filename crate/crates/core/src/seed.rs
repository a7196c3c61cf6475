//! Seed fan-out: every stage seed derives from one master seed.
//!
//! `derive(master, stage) = splitmix64(master + (stage + 1) * 0x9E3779B97F4A7C15)`,
//! i.e. the `stage + 1`-th output of a SplitMix64 stream seeded with `master`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Fixed stage indices used by the command pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Balance = 0,
    Split = 1,
    ModelInit = 2,
    Search = 3,
    Baseline = 4,
    Assess = 5,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Balance,
        Stage::Split,
        Stage::ModelInit,
        Stage::Search,
        Stage::Baseline,
        Stage::Assess,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Balance => "balance",
            Stage::Split => "split",
            Stage::ModelInit => "model_init",
            Stage::Search => "search",
            Stage::Baseline => "baseline",
            Stage::Assess => "assess",
        }
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(master: u64, stage: u64) -> u64 {
    splitmix64(master.wrapping_add(stage.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn stage_seed(master: u64, stage: Stage) -> u64 {
    derive(master, stage as u64)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

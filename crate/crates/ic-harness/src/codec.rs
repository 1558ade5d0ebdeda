use ic_core::amd_uf::{
    amd_decode, amd_encode_with, amd_exhaustive_max_miss, amd_test_vector, AmdCodeword,
    AmdTestVector, GF2kField,
};
use ic_core::scheme_iter::{rand5_decode, Rand5Code};
use ic_core::util::mix64;
use serde::{Deserialize, Serialize};

/// Largest degree swept exhaustively; larger degrees sample offsets.
pub const EXHAUSTIVE_MAX_K: u32 = 5;
pub const SAMPLED_MAX_K: u32 = 16;
const SAMPLED_OFFSETS: u64 = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmdSweep {
    pub k: u32,
    pub exhaustive: bool,
    /// Largest number of `x` values, out of `2^k`, for which a fixed message
    /// and nonzero offset decode to another message.
    pub worst_misses: u64,
    pub q: u64,
    /// `None` below the degrees where the `2/2^k` bound is asserted.
    pub pass: Option<bool>,
}

impl AmdSweep {
    pub fn line(&self) -> String {
        let verdict = match self.pass {
            Some(true) => ": PASS".to_string(),
            Some(false) => ": FAIL".to_string(),
            None => " (reported only)".to_string(),
        };
        let how = if self.exhaustive { "all" } else { "sampled" };
        format!(
            "k={}: miss {}/{} vs bound 2/{} for {how} nonzero offsets{verdict}",
            self.k, self.worst_misses, self.q, self.q
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("k={0} outside 2..={SAMPLED_MAX_K}")]
    Degree(u32),
}

fn misses(field: &GF2kField, s: u64, delta: AmdCodeword) -> u64 {
    (0..field.order() as u64)
        .filter(|x| {
            let w = amd_encode_with(field, s, *x).expect("in range").xor(delta);
            matches!(amd_decode(field, &w), Some(v) if v != s)
        })
        .count() as u64
}

pub fn amd_sweep(k: u32) -> Result<AmdSweep, CodecError> {
    if !(2..=SAMPLED_MAX_K).contains(&k) {
        return Err(CodecError::Degree(k));
    }
    let field = GF2kField::new(k).map_err(|_| CodecError::Degree(k))?;
    let q = field.order() as u64;
    let (worst, exhaustive) = if k <= EXHAUSTIVE_MAX_K {
        (
            (amd_exhaustive_max_miss(&field) * q as f64).round() as u64,
            true,
        )
    } else {
        let mask = field.mask();
        let worst = (0..SAMPLED_OFFSETS)
            .map(|i| {
                let h = |j: u64| mix64(i * 4 + j) & mask;
                let delta = AmdCodeword {
                    s: h(1),
                    x: h(2),
                    tag: h(3) | (h(1) == 0 && h(2) == 0) as u64,
                };
                misses(&field, h(0), delta)
            })
            .max()
            .unwrap_or(0);
        (worst, false)
    };
    Ok(AmdSweep {
        k,
        exhaustive,
        worst_misses: worst,
        q,
        pass: (k >= 4).then_some(worst <= 2),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rand5Sweep {
    /// Smallest number of codewords, out of 3, that a nonzero offset sends
    /// outside both sets, over both bits and all 31 offsets.
    pub min_erasing_codewords: u32,
    pub pass: bool,
}

impl Rand5Sweep {
    pub fn line(&self) -> String {
        format!(
            "rand5: erasure probability >= {}/3 for all 31 offsets{}",
            self.min_erasing_codewords,
            if self.pass { ": PASS" } else { ": FAIL" }
        )
    }
}

pub fn rand5_sweep() -> Rand5Sweep {
    let min = (1u8..32)
        .flat_map(|d| {
            [0u8, 1].map(|b| {
                Rand5Code::set(b)
                    .iter()
                    .filter(|cw| rand5_decode(*cw ^ d).is_none())
                    .count() as u32
            })
        })
        .min()
        .unwrap();
    Rand5Sweep {
        min_erasing_codewords: min,
        pass: min >= 1,
    }
}

pub fn test_vectors(k: u32, count: u64) -> Vec<AmdTestVector> {
    let Ok(field) = GF2kField::new(k) else {
        return Vec::new();
    };
    (0..count)
        .map(|i| {
            let s = mix64(k as u64 * 1000 + 2 * i) & field.mask();
            let x = mix64(k as u64 * 1000 + 2 * i + 1) & field.mask();
            amd_test_vector(&field, s, x).expect("in range")
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodecReport {
    pub amd: Vec<AmdSweep>,
    pub rand5: Rand5Sweep,
    pub vectors: Vec<AmdTestVector>,
}

impl CodecReport {
    pub fn pass(&self) -> bool {
        self.rand5.pass && self.amd.iter().all(|a| a.pass != Some(false))
    }
}

pub fn codec_report(ks: &[u32]) -> Result<CodecReport, CodecError> {
    let amd = ks
        .iter()
        .map(|k| amd_sweep(*k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CodecReport {
        amd,
        rand5: rand5_sweep(),
        vectors: ks.iter().flat_map(|k| test_vectors(*k, 4)).collect(),
    })
}

//! Algebraic manipulation detection codes over GF(2^k) and the compiler that
//! runs a UPEF-resilient protocol over a UF channel.
//!
//! A round with flip budget `p_i` is sent as a `3 k_i`-bit AMD encoding with
//! `k_i = ceil(log2(1/p_i)) + 1`. Any fixed additive error on the encoding is
//! either detected (an erasure) or, with probability at most `p_i` over the
//! encoder's randomness, turns the bit around.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{ChannelSymbol, Delivery, Effect, NoisePattern, UpefSchedule, WireChannel};
use crate::proto_core::Party;
use crate::scalar::{ceil_log2_inv, ceil_log2_u128, Scalar};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AmdError {
    #[error("field degree {0} outside the supported range 2..=64")]
    UnsupportedDegree(u32),
    #[error("target probability must lie in (0, 1/2]")]
    BadProbability,
    #[error("value {value:#x} does not fit in {k} bits")]
    Overflow { value: u64, k: u32 },
}

/// Low-order terms of an irreducible polynomial `x^k + ...` for `k = 2..=64`
/// (lowest weight, then smallest exponents).
const IRREDUCIBLE_LOW: [u64; 63] = [
    0x3, 0x3, 0x3, 0x5, 0x3, 0x3, 0x1b, 0x3, 0x9, 0x5, 0x9, 0x1b, 0x21, 0x3, 0x2b, 0x9, 0x9, 0x27,
    0x9, 0x5, 0x3, 0x21, 0x1b, 0x9, 0x1b, 0x27, 0x3, 0x5, 0x3, 0x9, 0x8d, 0x401, 0x81, 0x5, 0x201,
    0x53, 0x63, 0x11, 0x39, 0x9, 0x81, 0x59, 0x21, 0x1b, 0x3, 0x21, 0x2d, 0x201, 0x1d, 0x4b, 0x9,
    0x47, 0x201, 0x81, 0x95, 0x11, 0x80001, 0x95, 0x3, 0x27, 0x20000001, 0x3, 0x1b,
];

/// GF(2^k) with elements as the low `k` bits of a `u64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GF2kField {
    k: u32,
    low: u64,
}

impl GF2kField {
    pub fn new(k: u32) -> Result<Self, AmdError> {
        if !(2..=64).contains(&k) {
            return Err(AmdError::UnsupportedDegree(k));
        }
        Ok(GF2kField {
            k,
            low: IRREDUCIBLE_LOW[(k - 2) as usize],
        })
    }

    pub fn degree(&self) -> u32 {
        self.k
    }

    /// Full modulus as a `u128`, including the `x^k` term.
    pub fn modulus(&self) -> u128 {
        (1u128 << self.k) | self.low as u128
    }

    pub fn mask(&self) -> u64 {
        if self.k == 64 {
            u64::MAX
        } else {
            (1u64 << self.k) - 1
        }
    }

    pub fn order(&self) -> u128 {
        1u128 << self.k
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        a ^ b
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        let mut prod: u128 = 0;
        let mut b = b as u128;
        let mut a = a as u128;
        while b != 0 {
            if b & 1 == 1 {
                prod ^= a;
            }
            a <<= 1;
            b >>= 1;
        }
        let m = self.modulus();
        let k = self.k;
        for bit in (k..(2 * k - 1)).rev() {
            if (prod >> bit) & 1 == 1 {
                prod ^= m << (bit - k);
            }
        }
        prod as u64
    }

    pub fn pow(&self, a: u64, mut e: u128) -> u64 {
        let mut base = a;
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: u64) -> Option<u64> {
        if a == 0 {
            None
        } else {
            Some(self.pow(a, self.order() - 2))
        }
    }

    fn check(&self, v: u64) -> Result<u64, AmdError> {
        if v & !self.mask() != 0 {
            Err(AmdError::Overflow {
                value: v,
                k: self.k,
            })
        } else {
            Ok(v)
        }
    }
}

/// Parameters of the bit-level AMD code targeting miss probability `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmdParams {
    pub k: u32,
}

impl AmdParams {
    /// `k = ceil(log2(1/p)) + 1`, so that `2 / 2^k <= p`.
    pub fn for_probability<S: Scalar>(p: &S) -> Result<Self, AmdError> {
        if !(*p > S::zero() && *p <= S::half()) {
            return Err(AmdError::BadProbability);
        }
        let k = ceil_log2_inv(p) + 1;
        if k > 64 {
            return Err(AmdError::UnsupportedDegree(k));
        }
        Ok(AmdParams { k })
    }

    pub fn field(&self) -> GF2kField {
        GF2kField::new(self.k).expect("degree checked on construction")
    }

    /// Codeword length in bits.
    pub fn codeword_bits(&self) -> u32 {
        3 * self.k
    }
}

/// A codeword `(s, x, f(s, x))` with `f(s, x) = x^3 + s x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AmdCodeword {
    pub s: u64,
    pub x: u64,
    pub tag: u64,
}

impl AmdCodeword {
    /// Adds the error described by a `3k`-bit mask given as bit positions
    /// `0..3k`, where position 0 is the most significant bit of `s`.
    pub fn xor_positions(
        self,
        field: &GF2kField,
        positions: impl IntoIterator<Item = u32>,
    ) -> Self {
        let k = field.degree();
        let mut out = self;
        for pos in positions {
            let (slot, within) = (pos / k, pos % k);
            let bit = 1u64 << (k - 1 - within);
            match slot {
                0 => out.s ^= bit,
                1 => out.x ^= bit,
                2 => out.tag ^= bit,
                _ => panic!("position {pos} outside a {}-bit codeword", 3 * k),
            }
        }
        out
    }

    pub fn xor(self, delta: AmdCodeword) -> Self {
        AmdCodeword {
            s: self.s ^ delta.s,
            x: self.x ^ delta.x,
            tag: self.tag ^ delta.tag,
        }
    }

    /// The `3k` bits, most significant first, `s` then `x` then the tag.
    pub fn to_bits(&self, k: u32) -> Vec<u8> {
        let mut bits = Vec::with_capacity(3 * k as usize);
        for v in [self.s, self.x, self.tag] {
            for j in (0..k).rev() {
                bits.push(((v >> j) & 1) as u8);
            }
        }
        bits
    }

    pub fn from_bits(bits: &[u8], k: u32) -> Self {
        assert_eq!(bits.len(), 3 * k as usize, "codeword length");
        let read = |chunk: &[u8]| {
            chunk
                .iter()
                .fold(0u64, |acc, b| (acc << 1) | (*b & 1) as u64)
        };
        let k = k as usize;
        AmdCodeword {
            s: read(&bits[..k]),
            x: read(&bits[k..2 * k]),
            tag: read(&bits[2 * k..]),
        }
    }
}

fn amd_tag(field: &GF2kField, s: u64, x: u64) -> u64 {
    field.mul(field.mul(x, x), x) ^ field.mul(s, x)
}

/// Deterministic encoding with the randomness `x` supplied.
pub fn amd_encode_with(field: &GF2kField, s: u64, x: u64) -> Result<AmdCodeword, AmdError> {
    let s = field.check(s)?;
    let x = field.check(x)?;
    Ok(AmdCodeword {
        s,
        x,
        tag: amd_tag(field, s, x),
    })
}

pub fn amd_encode<R: Rng + ?Sized>(
    field: &GF2kField,
    s: u64,
    rng: &mut R,
) -> Result<AmdCodeword, AmdError> {
    let x = rng.gen::<u64>() & field.mask();
    amd_encode_with(field, s, x)
}

/// The message if the tag verifies, `None` (an erasure) otherwise.
pub fn amd_decode(field: &GF2kField, w: &AmdCodeword) -> Option<u64> {
    let m = field.mask();
    if w.s & !m != 0 || w.x & !m != 0 || w.tag & !m != 0 {
        return None;
    }
    (amd_tag(field, w.s, w.x) == w.tag).then_some(w.s)
}

/// Encodes one bit as the last bit of a uniformly padded message.
pub fn amd_encode_bit<R: Rng + ?Sized>(field: &GF2kField, b: u8, rng: &mut R) -> AmdCodeword {
    let pad = rng.gen::<u64>() & (field.mask() >> 1);
    let s = (pad << 1) | (b & 1) as u64;
    amd_encode(field, s, rng).expect("message fits the field")
}

pub fn amd_decode_bit(field: &GF2kField, w: &AmdCodeword) -> Option<u8> {
    amd_decode(field, w).map(|s| (s & 1) as u8)
}

/// Largest fraction of `x` values for which a fixed nonzero error turns the
/// encoding of `s` into a valid encoding of another message, over all `s`
/// and errors. Exhaustive, so only practical for small `k`.
pub fn amd_exhaustive_max_miss(field: &GF2kField) -> f64 {
    let q = field.order() as u64;
    let mut worst = 0u64;
    for s in 0..q {
        let words: Vec<AmdCodeword> = (0..q)
            .map(|x| amd_encode_with(field, s, x).unwrap())
            .collect();
        for ds in 0..q {
            for dx in 0..q {
                for dt in 0..q {
                    if ds == 0 && dx == 0 && dt == 0 {
                        continue;
                    }
                    let delta = AmdCodeword {
                        s: ds,
                        x: dx,
                        tag: dt,
                    };
                    let misses = words
                        .iter()
                        .filter(|w| matches!(amd_decode(field, &w.xor(delta)), Some(v) if v != s))
                        .count() as u64;
                    worst = worst.max(misses);
                }
            }
        }
    }
    worst as f64 / q as f64
}

/// Test vector for external implementations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmdTestVector {
    pub k: u32,
    pub s_hex: String,
    pub x_hex: String,
    pub codeword_hex: String,
    pub tag_hex: String,
}

fn bits_to_hex(bits: &[u8]) -> String {
    let pad = (4 - bits.len() % 4) % 4;
    let padded: Vec<u8> = std::iter::repeat_n(0, pad)
        .chain(bits.iter().copied())
        .collect();
    padded
        .chunks(4)
        .map(|c| {
            let v = c.iter().fold(0u8, |acc, b| (acc << 1) | b);
            char::from_digit(v as u32, 16).unwrap()
        })
        .collect()
}

fn field_hex(v: u64, k: u32) -> String {
    format!("{:0width$x}", v, width = k.div_ceil(4) as usize)
}

pub fn amd_test_vector(field: &GF2kField, s: u64, x: u64) -> Result<AmdTestVector, AmdError> {
    let w = amd_encode_with(field, s, x)?;
    let k = field.degree();
    Ok(AmdTestVector {
        k,
        s_hex: field_hex(w.s, k),
        x_hex: field_hex(w.x, k),
        codeword_hex: bits_to_hex(&w.to_bits(k)),
        tag_hex: field_hex(w.tag, k),
    })
}

/// How a matched UF adversary attacks the encoding of a corrupted round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockAttack {
    /// Flip every bit of the codeword.
    #[default]
    WholeBlock,
    /// Flip one uniformly chosen bit.
    SingleBit,
}

/// Window length `ceil(N + 4 log2 i)`.
pub fn zero_run_window(n: u64, round: u64) -> u64 {
    let r = round.max(1) as u128;
    n + ceil_log2_u128(r * r * r * r) as u64
}

/// Bob's termination rule over UF: he stops once, for some round `i` in which
/// Alice speaks, the `t_i` bits received from Alice starting at the encoding
/// of round `i` are all zero (or, relaxed, at least 90% zero).
#[derive(Clone, Debug)]
pub struct ZeroRunDetector {
    n: u64,
    relaxed: bool,
    received: u64,
    ones_prefix: Vec<u64>,
    pending: VecDeque<(u64, u64, u64)>,
    fired: Option<u64>,
}

impl ZeroRunDetector {
    pub fn new(n: u64, relaxed: bool) -> Self {
        ZeroRunDetector {
            n,
            relaxed,
            received: 0,
            ones_prefix: vec![0],
            pending: VecDeque::new(),
            fired: None,
        }
    }

    /// Marks the start of the encoding of round `round` sent by Alice.
    pub fn start_round(&mut self, round: u64) {
        if self.fired.is_none() {
            let t = zero_run_window(self.n, round);
            self.pending
                .push_back((self.received, self.received + t, round));
        }
    }

    /// Feeds one received bit; returns the round whose window completed.
    pub fn push_bit(&mut self, bit: u8) -> Option<u64> {
        if self.fired.is_some() {
            return self.fired;
        }
        self.received += 1;
        let ones = self.ones_prefix.last().copied().unwrap_or(0) + (bit & 1) as u64;
        self.ones_prefix.push(ones);
        if bit & 1 == 1 && !self.relaxed {
            self.pending.clear();
        }
        while let Some(&(start, end, round)) = self.pending.front() {
            if end > self.received {
                break;
            }
            self.pending.pop_front();
            let window_ones = self.ones_prefix[end as usize] - self.ones_prefix[start as usize];
            let ok = if self.relaxed {
                10 * window_ones <= end - start
            } else {
                window_ones == 0
            };
            if ok {
                self.fired = Some(round);
                return self.fired;
            }
        }
        None
    }

    pub fn fired(&self) -> Option<u64> {
        self.fired
    }
}

/// Batch form of [`ZeroRunDetector`]: `bits` are the bits Bob received from
/// Alice and `round_starts` the offsets in `bits` where the encoding of each
/// of Alice's rounds begins, as `(offset, round)`.
pub fn bob_zero_run_terminate(
    bits: &[u8],
    round_starts: &[(usize, u64)],
    n: u64,
    relaxed: bool,
) -> Option<u64> {
    let mut det = ZeroRunDetector::new(n, relaxed);
    let mut starts = round_starts.iter().peekable();
    for (pos, b) in bits.iter().enumerate() {
        while let Some(&&(off, round)) = starts.peek() {
            if off != pos {
                break;
            }
            det.start_round(round);
            starts.next();
        }
        if let Some(r) = det.push_bit(*b) {
            return Some(r);
        }
    }
    None
}

/// A UPEF-to-UF compiler configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UfCompiled<S: Scalar> {
    pub schedule: UpefSchedule<S>,
    /// Maximum number of rounds of the compiled protocol.
    pub horizon: u64,
    /// Use the 90%-zeros termination window.
    pub relaxed_termination: bool,
}

/// Configures compilation of a protocol for `schedule` over UF.
pub fn compile_uf<S: Scalar>(schedule: UpefSchedule<S>, horizon: u64) -> UfCompiled<S> {
    UfCompiled {
        schedule,
        horizon,
        relaxed_termination: false,
    }
}

impl<S: Scalar> UfCompiled<S> {
    /// AMD degree of round `i`.
    pub fn k(&self, i: u64) -> u32 {
        AmdParams::for_probability(&self.schedule.p(i))
            .expect("schedule probabilities lie in (0, 1/2]")
            .k
    }

    /// Total UF bits for the first `m` rounds.
    pub fn compiled_bits(&self, m: u64) -> u64 {
        (1..=m).map(|i| 3 * self.k(i) as u64).sum()
    }

    pub fn layout(&self) -> UfLayout {
        UfLayout {
            ks: Vec::new(),
            offsets: vec![0],
            schedule: UpefSchedule::with_c(self.schedule.c.to_f64(), self.schedule.n),
        }
    }

    /// Maps a pattern over the original rounds to a pattern over UF bits,
    /// attacking each corrupted round's encoding with `attack`.
    pub fn lift_pattern<R: Rng + ?Sized>(
        &self,
        e: &NoisePattern,
        attack: BlockAttack,
        rng: &mut R,
    ) -> NoisePattern {
        let mut layout = self.layout();
        let mut bits = Vec::new();
        for round in e.rounds() {
            let (start, len) = layout.block(round);
            match attack {
                BlockAttack::WholeBlock => bits.extend(start + 1..=start + len),
                BlockAttack::SingleBit => bits.push(start + 1 + rng.gen_range(0..len)),
            }
        }
        NoisePattern::new(bits).expect("blocks are disjoint")
    }

    /// The communication bound `6M + 3 sqrt(2CN) + 3 (M - sqrt(2CN)) log2(M^2 / (CN))`.
    pub fn length_bound(&self, m: u64) -> f64 {
        let cn = self.schedule.cn().to_f64();
        let r = (2.0 * cn).sqrt();
        let m = m as f64;
        6.0 * m + 3.0 * r + 3.0 * (m - r) * (m * m / cn).log2()
    }

    pub fn channel<'a, R: Rng>(&self, e_uf: &'a NoisePattern, rng: R) -> UfChannel<'a, R> {
        UfChannel {
            layout: self.layout(),
            e: e_uf,
            rng,
            horizon: self.horizon,
            detector: ZeroRunDetector::new(self.schedule.n, self.relaxed_termination),
            wire_bits: 0,
            overflow: false,
        }
    }
}

/// Lazily extended block layout of a compiled protocol.
#[derive(Clone, Debug)]
pub struct UfLayout {
    ks: Vec<u32>,
    offsets: Vec<u64>,
    schedule: UpefSchedule<f64>,
}

impl UfLayout {
    /// `(offset, length)` in UF bits of the encoding of round `i`.
    pub fn block(&mut self, i: u64) -> (u64, u64) {
        while (self.ks.len() as u64) < i {
            let r = self.ks.len() as u64 + 1;
            let k = AmdParams::for_probability(&self.schedule.p(r))
                .expect("valid schedule")
                .k;
            self.ks.push(k);
            let last = *self.offsets.last().unwrap();
            self.offsets.push(last + 3 * k as u64);
        }
        let idx = (i - 1) as usize;
        (self.offsets[idx], 3 * self.ks[idx] as u64)
    }

    pub fn k(&mut self, i: u64) -> u32 {
        self.block(i);
        self.ks[(i - 1) as usize]
    }
}

/// Bit channel seen by the compiled protocol: round `i`'s bit travels as an
/// AMD codeword across UF and is decoded on arrival.
pub struct UfChannel<'a, R: Rng> {
    layout: UfLayout,
    e: &'a NoisePattern,
    rng: R,
    horizon: u64,
    detector: ZeroRunDetector,
    wire_bits: u64,
    overflow: bool,
}

impl<R: Rng> WireChannel for UfChannel<'_, R> {
    /// A terminated sender transmits raw zeros.
    fn send(&mut self, index: u64, bit: Option<u8>, sender: Party) -> Delivery {
        if index > self.horizon {
            self.overflow = true;
        }
        let (start, len) = self.layout.block(index);
        let k = (len / 3) as u32;
        let field = GF2kField::new(k).expect("degree within table");
        let sent = match bit {
            Some(b) => amd_encode_bit(&field, b, &mut self.rng),
            None => AmdCodeword { s: 0, x: 0, tag: 0 },
        };
        let positions: Vec<u32> = self
            .e
            .in_range(start + 1, start + len)
            .map(|p| (p - start - 1) as u32)
            .collect();
        let received = sent.xor_positions(&field, positions.iter().copied());
        self.wire_bits += len;
        if sender == Party::Alice {
            self.detector.start_round(index);
            for b in received.to_bits(k) {
                self.detector.push_bit(b);
            }
        }
        let true_bit = bit.unwrap_or(0);
        let decoded = amd_decode_bit(&field, &received);
        let symbol = match decoded {
            Some(b) => ChannelSymbol::from_bit(b),
            None => ChannelSymbol::Erasure,
        };
        let effect = match (positions.is_empty(), decoded) {
            (true, _) => Effect::Clean,
            (false, None) => Effect::Erased,
            (false, Some(b)) if b == true_bit => Effect::Passed,
            (false, Some(_)) => Effect::Flipped,
        };
        Delivery { symbol, effect }
    }

    fn bob_terminated(&self) -> Option<u64> {
        self.detector.fired()
    }

    fn wire_bits(&self) -> u64 {
        self.wire_bits
    }

    fn overflowed(&self) -> bool {
        self.overflow
    }
}

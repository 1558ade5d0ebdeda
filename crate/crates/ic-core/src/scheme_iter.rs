//! Iterative doubling scheme over the mUPEF channel, and its lift to the UF
//! channel through a five-bit random code.
//!
//! Iteration `i` runs the substitution-resilient protocol from scratch with
//! every bit repeated `2^i` times (part 1), then Bob reports his erasure count
//! with a success or error string (part 2). Runs are simulated block-wise:
//! only the corrupted rounds of a repetition block are sampled, the rest are
//! counted.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{mupef_corrupt, ChannelSymbol, Delivery, Effect, MupefParams, NoisePattern};
use crate::proto_core::{run_noiseless, Party, SubstResilientProtocol, Symbol};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_ITERATION: u32 = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationParams<S: Scalar> {
    /// `L_0`, the length of the resilient protocol.
    pub base_len: u64,
    pub p_e: S,
}

impl<S: Scalar> IterationParams<S> {
    pub fn new(base_len: u64) -> Self {
        IterationParams {
            base_len,
            p_e: S::from_ratio(1, 3),
        }
    }

    pub fn with_p_e(base_len: u64, p_e: S) -> Self {
        IterationParams { base_len, p_e }
    }

    pub fn len(&self, i: u32) -> u64 {
        self.base_len << i
    }

    /// Wire rounds used by iterations `0..i`.
    pub fn offset(&self, i: u32) -> u64 {
        2 * self.base_len * ((1u64 << i) - 1)
    }

    pub fn erasure_threshold(&self, i: u32) -> S {
        self.p_e.clone() * S::from_u64(self.len(i)) / S::from_u64(1000)
    }

    pub fn ones_threshold(&self, i: u32) -> S {
        S::from_u64(self.len(i)) / S::from_u64(40)
    }

    pub fn below(&self, count: u64, threshold: &S) -> bool {
        S::from_u64(count) < *threshold
    }

    pub fn at_most(&self, count: u64, threshold: &S) -> bool {
        S::from_u64(count) <= *threshold
    }
}

/// Per-round noise as seen by the iterative scheme.
pub trait IterNoise {
    /// Corrupted rounds in `lo..=hi`, ascending.
    fn corrupted(&self, lo: u64, hi: u64) -> Vec<u64>;
    fn deliver(&mut self, round: u64, bit: u8) -> Delivery;
    /// Wire bits per scheme round.
    fn expansion(&self) -> u64 {
        1
    }
}

pub struct MupefNoise<'a, S: Scalar, R: Rng> {
    pub pattern: &'a NoisePattern,
    pub params: MupefParams<S>,
    pub rng: R,
}

impl<'a, S: Scalar, R: Rng> MupefNoise<'a, S, R> {
    pub fn new(pattern: &'a NoisePattern, params: MupefParams<S>, rng: R) -> Self {
        MupefNoise {
            pattern,
            params,
            rng,
        }
    }
}

impl<S: Scalar, R: Rng> IterNoise for MupefNoise<'_, S, R> {
    fn corrupted(&self, lo: u64, hi: u64) -> Vec<u64> {
        self.pattern.in_range(lo, hi).collect()
    }

    fn deliver(&mut self, round: u64, bit: u8) -> Delivery {
        mupef_corrupt(bit, self.pattern.choice(round), &self.params, &mut self.rng)
    }
}

pub struct Rand5Code;

impl Rand5Code {
    pub const ZERO_SET: [u8; 3] = [0b00000, 0b10000, 0b01000];
    pub const ONE_SET: [u8; 3] = [0b00100, 0b10010, 0b01001];

    pub fn set(bit: u8) -> &'static [u8; 3] {
        if bit & 1 == 0 {
            &Self::ZERO_SET
        } else {
            &Self::ONE_SET
        }
    }
}

/// A uniformly chosen codeword of `bit`, first transmitted bit in bit 4.
pub fn rand5_encode<R: Rng + ?Sized>(bit: u8, rng: &mut R) -> u8 {
    Rand5Code::set(bit)[rng.gen_range(0..3)]
}

pub fn rand5_decode(word: u8) -> Option<u8> {
    let w = word & 0x1f;
    if Rand5Code::ZERO_SET.contains(&w) {
        Some(0)
    } else if Rand5Code::ONE_SET.contains(&w) {
        Some(1)
    } else {
        None
    }
}

/// UF noise on the five-bit lift: scheme round `g` occupies UF bits
/// `5g-4..=5g` of the pattern.
pub struct Rand5UfNoise<'a, R: Rng> {
    pub pattern: &'a NoisePattern,
    pub rng: R,
}

impl<'a, R: Rng> Rand5UfNoise<'a, R> {
    pub fn new(pattern: &'a NoisePattern, rng: R) -> Self {
        Rand5UfNoise { pattern, rng }
    }

    pub fn offset(&self, round: u64) -> u8 {
        let base = 5 * (round - 1);
        (0..5u64).fold(0u8, |acc, pos| {
            acc | ((self.pattern.contains(base + pos + 1) as u8) << (4 - pos))
        })
    }
}

impl<R: Rng> IterNoise for Rand5UfNoise<'_, R> {
    fn corrupted(&self, lo: u64, hi: u64) -> Vec<u64> {
        let mut out: Vec<u64> = self
            .pattern
            .in_range(5 * (lo - 1) + 1, 5 * hi)
            .map(|u| (u - 1) / 5 + 1)
            .collect();
        out.dedup();
        out
    }

    fn deliver(&mut self, round: u64, bit: u8) -> Delivery {
        let word = rand5_encode(bit, &mut self.rng) ^ self.offset(round);
        match rand5_decode(word) {
            Some(b) if b == bit => Delivery {
                symbol: ChannelSymbol::from_bit(b),
                effect: Effect::Passed,
            },
            Some(b) => Delivery {
                symbol: ChannelSymbol::from_bit(b),
                effect: Effect::Flipped,
            },
            None => Delivery {
                symbol: ChannelSymbol::Erasure,
                effect: Effect::Erased,
            },
        }
    }

    fn expansion(&self) -> u64 {
        5
    }
}

/// Maps a scheme-level mUPEF pattern to a UF pattern on the five-bit lift by
/// flipping the first bit of every corrupted round's block.
pub fn lift_to_uf(e: &NoisePattern) -> NoisePattern {
    NoisePattern::new(e.rounds().map(|g| 5 * (g - 1) + 1)).expect("distinct rounds stay distinct")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BobString {
    Success,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterOutcome {
    pub i: u32,
    pub part1_erasures_alice: u64,
    pub part1_erasures_bob: u64,
    pub part2_erasures_alice: u64,
    pub part2_zeros_alice: u64,
    pub part2_ones_alice: u64,
    pub ones_received_by_bob: u64,
    pub bob_string: BobString,
    pub alice_active: bool,
    pub bob_active: bool,
    pub alice_terminated: bool,
    pub bob_terminated: bool,
    pub alice_output: Vec<Symbol>,
    pub bob_output: Vec<Symbol>,
    pub valid_for_bob: bool,
    /// Corrupted rounds in part 1 and part 2.
    pub corrupted: (u64, u64),
}

struct Part1 {
    erasures_alice: u64,
    erasures_bob: u64,
    ones_bob: u64,
    alice_ts: Vec<Symbol>,
    bob_ts: Vec<Symbol>,
    corrupted: u64,
}

fn send_block<N: IterNoise>(noise: &mut N, lo: u64, copies: u64, bit: u8) -> (u64, u64, u64) {
    let hit = noise.corrupted(lo, lo + copies - 1);
    let mut ones = if bit == 1 {
        copies - hit.len() as u64
    } else {
        0
    };
    let mut erasures = 0;
    for g in &hit {
        match noise.deliver(*g, bit).symbol {
            ChannelSymbol::One => ones += 1,
            ChannelSymbol::Erasure => erasures += 1,
            _ => {}
        }
    }
    (ones, erasures, hit.len() as u64)
}

/// Part 1 of iteration `i`: the resilient protocol with `2^i`-fold
/// repetition, decoded by majority with ties and erasures read as 0. A
/// terminated party sends zeros.
#[allow(clippy::too_many_arguments)]
fn run_part1_raw<S: Scalar, N: IterNoise>(
    params: &IterationParams<S>,
    i: u32,
    robust: &SubstResilientProtocol,
    x: &[u8],
    y: &[u8],
    alice_active: bool,
    bob_active: bool,
    noise: &mut N,
) -> Part1 {
    let copies = 1u64 << i;
    let base = params.offset(i);
    let mut out = Part1 {
        erasures_alice: 0,
        erasures_bob: 0,
        ones_bob: 0,
        alice_ts: Vec::with_capacity(robust.len()),
        bob_ts: Vec::with_capacity(robust.len()),
        corrupted: 0,
    };
    for r in 0..robust.len() {
        let speaker = robust.pi_prime.speaker(r + 1);
        let (bit, active) = match speaker {
            Party::Alice => (
                robust.next_symbol(Party::Alice, x, &out.alice_ts) as u8,
                alice_active,
            ),
            Party::Bob => (
                robust.next_symbol(Party::Bob, y, &out.bob_ts) as u8,
                bob_active,
            ),
        };
        let sent = if active { bit } else { 0 };
        let lo = base + r as u64 * copies + 1;
        let (ones, erasures, hit) = send_block(noise, lo, copies, sent);
        out.corrupted += hit;
        let decoded = (2 * ones > copies) as Symbol;
        match speaker {
            Party::Alice => {
                out.alice_ts.push(bit as Symbol);
                out.bob_ts.push(decoded);
                out.erasures_bob += erasures;
                out.ones_bob += ones;
            }
            Party::Bob => {
                out.bob_ts.push(bit as Symbol);
                out.alice_ts.push(decoded);
                out.erasures_alice += erasures;
            }
        }
    }
    out
}

/// Runs part 1 of iteration `i` and fills the part-1 fields of an outcome.
#[allow(clippy::too_many_arguments)]
pub fn run_part1<S: Scalar, N: IterNoise>(
    params: &IterationParams<S>,
    i: u32,
    robust: &SubstResilientProtocol,
    x: &[u8],
    y: &[u8],
    alice_active: bool,
    bob_active: bool,
    noise: &mut N,
) -> IterOutcome {
    let p = run_part1_raw(params, i, robust, x, y, alice_active, bob_active, noise);
    let thr = params.erasure_threshold(i);
    let bob_string = if params.below(p.erasures_bob, &thr) {
        BobString::Success
    } else {
        BobString::Error
    };
    IterOutcome {
        i,
        part1_erasures_alice: p.erasures_alice,
        part1_erasures_bob: p.erasures_bob,
        part2_erasures_alice: 0,
        part2_zeros_alice: 0,
        part2_ones_alice: 0,
        ones_received_by_bob: p.ones_bob,
        bob_string,
        alice_active,
        bob_active,
        alice_terminated: false,
        bob_terminated: false,
        alice_output: robust.output(Party::Alice, &p.alice_ts),
        bob_output: robust.output(Party::Bob, &p.bob_ts),
        valid_for_bob: false,
        corrupted: (p.corrupted, 0),
    }
}

/// Part 2: Bob sends his string; Alice counts zeros, ones and erasures.
pub fn run_part2<S: Scalar, N: IterNoise>(
    params: &IterationParams<S>,
    o: &mut IterOutcome,
    noise: &mut N,
) {
    let l = params.len(o.i);
    let lo = params.offset(o.i) + l + 1;
    let bit = if o.bob_active && o.bob_string == BobString::Error {
        1
    } else {
        0
    };
    let (ones, erasures, hit) = send_block(noise, lo, l, bit);
    o.part2_ones_alice = ones;
    o.part2_erasures_alice = erasures;
    o.part2_zeros_alice = l - ones - erasures;
    o.corrupted.1 = hit;
}

pub fn alice_decodes_success(o: &IterOutcome) -> bool {
    o.part2_zeros_alice > o.part2_ones_alice
}

pub fn alice_terminate<S: Scalar>(params: &IterationParams<S>, o: &IterOutcome) -> bool {
    let thr = params.erasure_threshold(o.i);
    params.below(o.part1_erasures_alice, &thr)
        && params.below(o.part2_erasures_alice, &thr)
        && alice_decodes_success(o)
}

pub fn bob_terminate<S: Scalar>(params: &IterationParams<S>, o: &IterOutcome) -> bool {
    let thr = params.erasure_threshold(o.i);
    params.below(o.part1_erasures_bob, &thr) && params.at_most(o.ones_received_by_bob, &thr)
}

pub fn bob_valid<S: Scalar>(params: &IterationParams<S>, o: &IterOutcome) -> bool {
    params.below(o.part1_erasures_bob, &params.erasure_threshold(o.i))
        && !params.below(o.ones_received_by_bob, &params.ones_threshold(o.i))
}

/// Bob's output at termination in iteration `j`: the resilient protocol's
/// output in the latest valid iteration before `j`.
pub fn bob_output(history: &[IterOutcome], j: u32) -> Option<&[Symbol]> {
    history
        .iter()
        .filter(|o| o.i < j && o.valid_for_bob)
        .max_by_key(|o| o.i)
        .map(|o| o.bob_output.as_slice())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterResult {
    pub n: usize,
    pub t: usize,
    pub iterations: Vec<IterOutcome>,
    pub alice_output: Option<Vec<Symbol>>,
    pub bob_output: Option<Vec<Symbol>>,
    pub terminated_i_a: Option<u32>,
    pub terminated_i_b: Option<u32>,
    /// Scheme rounds, `sum 2 L_i` over the iterations run.
    pub comm_bits: u64,
    /// Channel bits, including the lift's expansion.
    pub wire_bits: u64,
    pub alice_ok: bool,
    pub bob_ok: bool,
    /// Bob terminated with no valid iteration to output from.
    pub bob_no_output: bool,
    pub aborted: Option<String>,
}

impl IterResult {
    pub fn success(&self) -> bool {
        self.alice_ok && self.bob_ok && self.aborted.is_none()
    }

    /// Bob terminated no later than Alice.
    pub fn premature_bob(&self) -> bool {
        match (self.terminated_i_a, self.terminated_i_b) {
            (Some(a), Some(b)) => b <= a,
            (None, Some(_)) => true,
            _ => false,
        }
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "N": self.n,
            "T": self.t,
            "iterations": self.iterations,
            "comm_bits": self.comm_bits,
            "alice_ok": self.alice_ok,
            "bob_ok": self.bob_ok,
            "terminated_i_A": self.terminated_i_a,
            "terminated_i_B": self.terminated_i_b,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterOptions {
    pub max_iteration: u32,
    /// Recorded as `T` in the result.
    pub t: usize,
}

impl Default for IterOptions {
    fn default() -> Self {
        IterOptions {
            max_iteration: DEFAULT_MAX_ITERATION,
            t: 0,
        }
    }
}

/// Runs iterations `0, 1, 2, ...` until both parties terminate.
pub fn run_iter_with<S: Scalar, N: IterNoise>(
    robust: &SubstResilientProtocol,
    x: &[u8],
    y: &[u8],
    params: &IterationParams<S>,
    noise: &mut N,
    opts: &IterOptions,
) -> IterResult {
    let (ta, tb) = run_noiseless(&robust.pi_prime, x, y);
    let expect_a = robust.output(Party::Alice, &ta.symbols());
    let expect_b = robust.output(Party::Bob, &tb.symbols());
    let mut res = IterResult {
        n: robust.inner.len(),
        t: opts.t,
        iterations: Vec::new(),
        alice_output: None,
        bob_output: None,
        terminated_i_a: None,
        terminated_i_b: None,
        comm_bits: 0,
        wire_bits: 0,
        alice_ok: false,
        bob_ok: false,
        bob_no_output: false,
        aborted: None,
    };
    for i in 0..=opts.max_iteration {
        let alice_active = res.terminated_i_a.is_none();
        let bob_active = res.terminated_i_b.is_none();
        let mut o = run_part1(params, i, robust, x, y, alice_active, bob_active, noise);
        run_part2(params, &mut o, noise);
        o.valid_for_bob = bob_valid(params, &o);
        if alice_active && alice_terminate(params, &o) {
            o.alice_terminated = true;
            res.terminated_i_a = Some(i);
            res.alice_output = Some(o.alice_output.clone());
        }
        if bob_active && bob_terminate(params, &o) {
            o.bob_terminated = true;
            res.terminated_i_b = Some(i);
        }
        res.comm_bits += 2 * params.len(i);
        res.iterations.push(o);
        if let Some(j) = res.terminated_i_b.filter(|_| bob_active) {
            match bob_output(&res.iterations, j) {
                Some(out) => res.bob_output = Some(out.to_vec()),
                None => res.bob_no_output = true,
            }
        }
        if res.terminated_i_a.is_some() && res.terminated_i_b.is_some() {
            break;
        }
    }
    if res.terminated_i_a.is_none() || res.terminated_i_b.is_none() {
        res.aborted = Some(format!(
            "iteration ceiling {} reached (Alice {:?}, Bob {:?})",
            opts.max_iteration, res.terminated_i_a, res.terminated_i_b
        ));
    }
    res.wire_bits = res.comm_bits * noise.expansion();
    res.alice_ok = res.alice_output.as_deref() == Some(expect_a.as_slice());
    res.bob_ok = res.bob_output.as_deref() == Some(expect_b.as_slice());
    res
}

/// The scheme over mUPEF with pattern `e` and its per-round choices.
pub fn run_iter<S: Scalar, R: Rng>(
    robust: &SubstResilientProtocol,
    x: &[u8],
    y: &[u8],
    e: &NoisePattern,
    mupef: MupefParams<S>,
    rng: R,
) -> IterResult {
    let params = IterationParams::<S>::new(robust.len() as u64);
    let mut noise = MupefNoise::new(e, mupef, rng);
    let opts = IterOptions {
        t: e.t(),
        ..IterOptions::default()
    };
    run_iter_with(robust, x, y, &params, &mut noise, &opts)
}

/// The scheme over UF on the five-bit lift, `e_uf` indexing UF bits.
pub fn run_iter_uf<S: Scalar, R: Rng>(
    robust: &SubstResilientProtocol,
    x: &[u8],
    y: &[u8],
    e_uf: &NoisePattern,
    rng: R,
) -> IterResult {
    let params = IterationParams::<S>::new(robust.len() as u64);
    let mut noise = Rand5UfNoise::new(e_uf, rng);
    let opts = IterOptions {
        t: e_uf.t(),
        ..IterOptions::default()
    };
    run_iter_with(robust, x, y, &params, &mut noise, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proto_core::{make_random_protocol, toy_subst_resilient};
    use num_rational::Rational64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn robust() -> SubstResilientProtocol {
        toy_subst_resilient(&make_random_protocol(9, 64, 2).unwrap(), 3).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn params_double_and_thresholds_are_exact() {
        let p = IterationParams::<Rational64>::new(256);
        assert_eq!(p.len(3), 2 * p.len(2));
        assert_eq!(p.erasure_threshold(0), Rational64::new(256, 3000));
        assert_eq!(p.ones_threshold(1), Rational64::new(512, 40));
        assert_eq!(p.offset(2), 2 * 256 + 2 * 512);
        assert!(!p.below(3, &Rational64::from_integer(3)));
    }

    #[test]
    fn zero_noise_alice_stops_first_and_bob_next() {
        let pi = robust();
        let r = run_iter(
            &pi,
            b"a",
            b"b",
            &NoisePattern::empty(),
            MupefParams::<f64>::default(),
            rng(1),
        );
        assert!(r.success(), "{r:?}");
        assert_eq!(r.terminated_i_a, Some(0));
        assert_eq!(r.terminated_i_b, Some(1));
        assert_eq!(r.comm_bits, 6 * pi.len() as u64);
        assert!(!r.premature_bob());
    }

    #[test]
    fn erased_copy_reads_as_zero_and_wrapper_absorbs_it() {
        let pi = robust();
        let params = IterationParams::<f64>::new(pi.len() as u64);
        let clean = run_part1(
            &params,
            1,
            &pi,
            b"a",
            b"b",
            true,
            true,
            &mut MupefNoise::new(
                &NoisePattern::empty(),
                MupefParams::<f64>::default(),
                rng(0),
            ),
        );
        let first_one = (0..pi.len()).find(|r| {
            let (ta, _) = run_noiseless(&pi.pi_prime, b"a", b"b");
            pi.pi_prime.speaker(*r + 1) == Party::Alice && ta.symbols()[*r] == 1
        });
        let r = first_one.unwrap() as u64;
        let g = params.offset(1) + 2 * r + 1;
        let e = NoisePattern::new([g]).unwrap();
        let erase = e
            .clone()
            .with_choices(BTreeMap::from([(g, crate::channels::MupefChoice::Erase)]))
            .unwrap();
        let o = run_part1(
            &params,
            1,
            &pi,
            b"a",
            b"b",
            true,
            true,
            &mut MupefNoise::new(&erase, MupefParams::<f64>::default(), rng(0)),
        );
        assert_eq!(o.part1_erasures_bob, 1);
        assert_eq!(o.ones_received_by_bob + 1, clean.ones_received_by_bob);
        assert_eq!(o.bob_output, clean.bob_output);
    }

    #[test]
    fn flipping_most_of_success_string_reads_error() {
        let pi = robust();
        let params = IterationParams::<f64>::new(pi.len() as u64);
        let l = params.len(0);
        let lo = params.offset(0) + l + 1;
        let rounds: Vec<u64> = (lo..lo + l / 2 + 1).collect();
        let choices = rounds
            .iter()
            .map(|g| (*g, crate::channels::MupefChoice::Flip))
            .collect();
        let e = NoisePattern::new(rounds)
            .unwrap()
            .with_choices(choices)
            .unwrap();
        let mut noise = MupefNoise::new(&e, MupefParams::with_p_erase(0.0), rng(0));
        let mut o = run_part1(&params, 0, &pi, b"a", b"b", true, true, &mut noise);
        run_part2(&params, &mut o, &mut noise);
        assert_eq!(o.bob_string, BobString::Success);
        assert!(!alice_decodes_success(&o));
    }

    #[test]
    fn heavy_erasures_delay_termination() {
        let pi = robust();
        let e = NoisePattern::new(1..=40).unwrap();
        let r = run_iter(&pi, b"a", b"b", &e, MupefParams::<f64>::default(), rng(3));
        assert!(r.terminated_i_a.unwrap() >= 1);
        assert!(!r.iterations[0].alice_terminated);
        assert!(r.success());
    }

    #[test]
    fn rand5_sets() {
        assert_eq!(rand5_decode(0b00000), Some(0));
        assert_eq!(rand5_decode(0b00100), Some(1));
        assert_eq!(rand5_decode(0b11111), None);
        let mut g = rng(4);
        for _ in 0..100 {
            let b = g.gen_range(0..2u8);
            assert_eq!(rand5_decode(rand5_encode(b, &mut g)), Some(b));
        }
    }

    #[test]
    fn uf_lift_zero_noise_expands_by_five() {
        let pi = robust();
        let bare = run_iter(
            &pi,
            b"a",
            b"b",
            &NoisePattern::empty(),
            MupefParams::<f64>::default(),
            rng(1),
        );
        let uf = run_iter_uf::<f64, _>(&pi, b"a", b"b", &NoisePattern::empty(), rng(1));
        assert_eq!(bare.comm_bits, uf.comm_bits);
        assert_eq!(uf.wire_bits, 5 * bare.wire_bits);
        assert_eq!(bare.terminated_i_b, uf.terminated_i_b);
        assert!(uf.success());
    }
}

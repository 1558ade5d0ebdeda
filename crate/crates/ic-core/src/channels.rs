//! Channel models: unknown flips (UF), unknown positions with erasure or flip
//! (UPEF), the modified variant with adversarial per-position choices (mUPEF),
//! and a message-driven insertion-deletion channel.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proto_core::{Direction, Party, Protocol, Symbol, Transcript};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChannelError {
    #[error("noise pattern declares T = {declared} but lists {actual} rounds")]
    CountMismatch { declared: usize, actual: usize },
    #[error("noise pattern rounds are 1-based, found 0")]
    ZeroRound,
    #[error("noise pattern lists round {0} twice")]
    DuplicateRound(u64),
    #[error("choice given for round {0} which is not corrupted")]
    StrayChoice(u64),
    #[error("indel script event {0} refers to a transmission that never happens")]
    EventAfterHalt(usize),
    #[error("indel script has two events at transmission {0}")]
    DuplicateEvent(usize),
    #[error("substitution at transmission {0} does not change the symbol")]
    NoopSubstitution(usize),
}

/// What a receiver observes for one transmitted bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelSymbol {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "erasure")]
    Erasure,
    #[serde(rename = "silence")]
    Silence,
}

impl ChannelSymbol {
    pub fn from_bit(b: u8) -> Self {
        if b & 1 == 1 {
            ChannelSymbol::One
        } else {
            ChannelSymbol::Zero
        }
    }

    pub fn bit(self) -> Option<u8> {
        match self {
            ChannelSymbol::Zero => Some(0),
            ChannelSymbol::One => Some(1),
            _ => None,
        }
    }
}

/// Ground truth of what the channel did to one bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effect {
    Clean,
    Flipped,
    Erased,
    /// Corrupted, but delivered unchanged.
    Passed,
}

impl Effect {
    pub fn corrupted(self) -> bool {
        self != Effect::Clean
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub symbol: ChannelSymbol,
    pub effect: Effect,
}

impl Delivery {
    pub fn clean(bit: u8) -> Self {
        Delivery {
            symbol: ChannelSymbol::from_bit(bit),
            effect: Effect::Clean,
        }
    }
}

/// Adversary's action on a corrupted mUPEF position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MupefChoice {
    #[default]
    Flip,
    Erase,
    Pass,
}

#[derive(Serialize, Deserialize)]
struct RawPattern {
    #[serde(rename = "T")]
    t: usize,
    rounds: Vec<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    choices: BTreeMap<u64, MupefChoice>,
}

/// The set `E` of corrupted 1-based round indices, fixed before execution,
/// with optional per-round mUPEF choices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPattern", into = "RawPattern")]
pub struct NoisePattern {
    rounds: BTreeSet<u64>,
    choices: BTreeMap<u64, MupefChoice>,
}

impl TryFrom<RawPattern> for NoisePattern {
    type Error = ChannelError;

    fn try_from(raw: RawPattern) -> Result<Self, Self::Error> {
        let mut rounds = BTreeSet::new();
        for r in &raw.rounds {
            if *r == 0 {
                return Err(ChannelError::ZeroRound);
            }
            if !rounds.insert(*r) {
                return Err(ChannelError::DuplicateRound(*r));
            }
        }
        if raw.t != rounds.len() {
            return Err(ChannelError::CountMismatch {
                declared: raw.t,
                actual: rounds.len(),
            });
        }
        if let Some(r) = raw.choices.keys().find(|r| !rounds.contains(r)) {
            return Err(ChannelError::StrayChoice(*r));
        }
        Ok(NoisePattern {
            rounds,
            choices: raw.choices,
        })
    }
}

impl From<NoisePattern> for RawPattern {
    fn from(p: NoisePattern) -> Self {
        RawPattern {
            t: p.rounds.len(),
            rounds: p.rounds.into_iter().collect(),
            choices: p.choices,
        }
    }
}

impl NoisePattern {
    pub fn new<I: IntoIterator<Item = u64>>(rounds: I) -> Result<Self, ChannelError> {
        let rounds: Vec<u64> = rounds.into_iter().collect();
        NoisePattern::try_from(RawPattern {
            t: rounds.len(),
            rounds,
            choices: BTreeMap::new(),
        })
    }

    pub fn empty() -> Self {
        NoisePattern::default()
    }

    pub fn with_choices(
        mut self,
        choices: BTreeMap<u64, MupefChoice>,
    ) -> Result<Self, ChannelError> {
        if let Some(r) = choices.keys().find(|r| !self.rounds.contains(r)) {
            return Err(ChannelError::StrayChoice(*r));
        }
        self.choices = choices;
        Ok(self)
    }

    /// `|E|`.
    pub fn t(&self) -> usize {
        self.rounds.len()
    }

    pub fn contains(&self, round: u64) -> bool {
        self.rounds.contains(&round)
    }

    /// Choice at `round`, flip when unspecified.
    pub fn choice(&self, round: u64) -> MupefChoice {
        self.choices.get(&round).copied().unwrap_or_default()
    }

    pub fn rounds(&self) -> impl Iterator<Item = u64> + '_ {
        self.rounds.iter().copied()
    }

    /// Corrupted rounds in `lo..=hi`.
    pub fn in_range(&self, lo: u64, hi: u64) -> impl Iterator<Item = u64> + '_ {
        self.rounds.range(lo..=hi).copied()
    }

    pub fn count_in_range(&self, lo: u64, hi: u64) -> usize {
        if lo > hi {
            0
        } else {
            self.rounds.range(lo..=hi).count()
        }
    }

    pub fn max_round(&self) -> Option<u64> {
        self.rounds.iter().next_back().copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pattern serializes")
    }
}

/// Flip probabilities `p_i = min(C N / i^2, 1/2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpefSchedule<S: Scalar> {
    pub c: S,
    pub n: u64,
}

impl<S: Scalar> UpefSchedule<S> {
    /// The default constant `C = 1 / (90 * 1.1 * 3)`.
    pub fn default_c() -> S {
        S::from_ratio(1, 297)
    }

    pub fn new(n: u64) -> Self {
        UpefSchedule {
            c: Self::default_c(),
            n,
        }
    }

    pub fn with_c(c: S, n: u64) -> Self {
        UpefSchedule { c, n }
    }

    /// `C * N`.
    pub fn cn(&self) -> S {
        self.c.clone() * S::from_u64(self.n)
    }

    /// Flip probability of 1-based round `i`.
    pub fn p(&self, i: u64) -> S {
        assert!(i >= 1, "rounds are 1-based");
        let raw = self.cn() / S::from_u64(i * i);
        S::min_of(raw, S::half())
    }
}

/// `sum_{i <= horizon} p_i + C N / horizon`, an upper bound on the expected
/// number of flips over an unbounded execution.
pub fn schedule_tail_sum<S: Scalar>(sched: &UpefSchedule<S>, horizon: u64) -> S {
    let mut acc = S::zero();
    for i in 1..=horizon {
        acc = acc + sched.p(i);
    }
    acc + sched.cn() / S::from_u64(horizon)
}

/// Bound `(1/sqrt(2) + pi^2/6) C N` on the total flip mass.
pub fn schedule_sum_bound(sched: &UpefSchedule<f64>) -> f64 {
    (std::f64::consts::FRAC_1_SQRT_2 + std::f64::consts::PI.powi(2) / 6.0) * sched.cn()
}

/// mUPEF parameters: a corrupted position is erased with probability
/// `p_erase`, otherwise the adversary's choice applies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MupefParams<S: Scalar> {
    pub p_erase: S,
}

impl<S: Scalar> Default for MupefParams<S> {
    fn default() -> Self {
        MupefParams {
            p_erase: S::from_ratio(1, 3),
        }
    }
}

impl<S: Scalar> MupefParams<S> {
    pub fn with_p_erase(p_erase: S) -> Self {
        MupefParams { p_erase }
    }

    pub fn p_corrupt(&self) -> S {
        S::one() - self.p_erase.clone()
    }
}

/// UF channel: flips iff the round is corrupted.
pub fn transmit_uf(bit: u8, index: u64, e: &NoisePattern) -> u8 {
    if e.contains(index) {
        bit ^ 1
    } else {
        bit
    }
}

/// UPEF channel: a corrupted round is flipped with probability `p_i`, erased
/// otherwise.
pub fn transmit_upef<S: Scalar, R: Rng + ?Sized>(
    bit: u8,
    index: u64,
    e: &NoisePattern,
    sched: &UpefSchedule<S>,
    rng: &mut R,
) -> Delivery {
    if !e.contains(index) {
        return Delivery::clean(bit);
    }
    if rng.gen::<f64>() < sched.p(index).to_f64() {
        Delivery {
            symbol: ChannelSymbol::from_bit(bit ^ 1),
            effect: Effect::Flipped,
        }
    } else {
        Delivery {
            symbol: ChannelSymbol::Erasure,
            effect: Effect::Erased,
        }
    }
}

/// Applies an mUPEF corruption to `bit`.
pub fn mupef_corrupt<S: Scalar, R: Rng + ?Sized>(
    bit: u8,
    choice: MupefChoice,
    params: &MupefParams<S>,
    rng: &mut R,
) -> Delivery {
    let erased = Delivery {
        symbol: ChannelSymbol::Erasure,
        effect: Effect::Erased,
    };
    if rng.gen::<f64>() < params.p_erase.to_f64() {
        return erased;
    }
    match choice {
        MupefChoice::Flip => Delivery {
            symbol: ChannelSymbol::from_bit(bit ^ 1),
            effect: Effect::Flipped,
        },
        MupefChoice::Erase => erased,
        MupefChoice::Pass => Delivery {
            symbol: ChannelSymbol::from_bit(bit),
            effect: Effect::Passed,
        },
    }
}

/// mUPEF channel.
pub fn transmit_mupef<S: Scalar, R: Rng + ?Sized>(
    bit: u8,
    index: u64,
    e: &NoisePattern,
    params: &MupefParams<S>,
    rng: &mut R,
) -> Delivery {
    if !e.contains(index) {
        return Delivery::clean(bit);
    }
    mupef_corrupt(bit, e.choice(index), params, rng)
}

/// A bit channel indexed by the 1-based round of the protocol running over it.
pub trait WireChannel {
    /// Delivers round `index`'s bit from `sender`; `None` means the sender has
    /// terminated.
    fn send(&mut self, index: u64, bit: Option<u8>, sender: Party) -> Delivery;

    /// Whether a terminated sender is announced to the receiver.
    fn signals_silence(&self) -> bool {
        false
    }

    /// Round at which Bob's own termination rule fired, for channels without
    /// a silence signal.
    fn bob_terminated(&self) -> Option<u64> {
        None
    }

    /// Physical bits used so far.
    fn wire_bits(&self) -> u64;

    /// Whether the configured horizon was exceeded.
    fn overflowed(&self) -> bool {
        false
    }
}

/// Noiseless channel with a silence signal.
#[derive(Clone, Debug, Default)]
pub struct NoiselessChannel {
    bits: u64,
}

impl WireChannel for NoiselessChannel {
    fn send(&mut self, _index: u64, bit: Option<u8>, _sender: Party) -> Delivery {
        match bit {
            Some(b) => {
                self.bits += 1;
                Delivery::clean(b)
            }
            None => Delivery {
                symbol: ChannelSymbol::Silence,
                effect: Effect::Clean,
            },
        }
    }

    fn signals_silence(&self) -> bool {
        true
    }

    fn wire_bits(&self) -> u64 {
        self.bits
    }
}

/// UPEF channel as a [`WireChannel`]; silence is delivered noiselessly.
pub struct UpefChannel<'a, S: Scalar, R: Rng> {
    pub pattern: &'a NoisePattern,
    pub schedule: UpefSchedule<S>,
    rng: R,
    bits: u64,
}

impl<'a, S: Scalar, R: Rng> UpefChannel<'a, S, R> {
    pub fn new(pattern: &'a NoisePattern, schedule: UpefSchedule<S>, rng: R) -> Self {
        UpefChannel {
            pattern,
            schedule,
            rng,
            bits: 0,
        }
    }
}

impl<S: Scalar, R: Rng> WireChannel for UpefChannel<'_, S, R> {
    fn send(&mut self, index: u64, bit: Option<u8>, _sender: Party) -> Delivery {
        match bit {
            Some(b) => {
                self.bits += 1;
                transmit_upef(b, index, self.pattern, &self.schedule, &mut self.rng)
            }
            None => Delivery {
                symbol: ChannelSymbol::Silence,
                effect: Effect::Clean,
            },
        }
    }

    fn signals_silence(&self) -> bool {
        true
    }

    fn wire_bits(&self) -> u64 {
        self.bits
    }
}

/// mUPEF channel as a [`WireChannel`]; silence is delivered noiselessly.
pub struct MupefChannel<'a, S: Scalar, R: Rng> {
    pub pattern: &'a NoisePattern,
    pub params: MupefParams<S>,
    rng: R,
    bits: u64,
}

impl<'a, S: Scalar, R: Rng> MupefChannel<'a, S, R> {
    pub fn new(pattern: &'a NoisePattern, params: MupefParams<S>, rng: R) -> Self {
        MupefChannel {
            pattern,
            params,
            rng,
            bits: 0,
        }
    }
}

impl<S: Scalar, R: Rng> WireChannel for MupefChannel<'_, S, R> {
    fn send(&mut self, index: u64, bit: Option<u8>, _sender: Party) -> Delivery {
        match bit {
            Some(b) => {
                self.bits += 1;
                transmit_mupef(b, index, self.pattern, &self.params, &mut self.rng)
            }
            None => Delivery {
                symbol: ChannelSymbol::Silence,
                effect: Effect::Clean,
            },
        }
    }

    fn signals_silence(&self) -> bool {
        true
    }

    fn wire_bits(&self) -> u64 {
        self.bits
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndelEventKind {
    /// The receiver gets `symbol` instead of the sent symbol.
    Substitution,
    /// The sent symbol is deleted and `symbol` is delivered back to its sender.
    OutOfSync,
}

/// One corruption of the insertion-deletion channel, keyed by the 1-based
/// index of the transmission it hits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndelEvent {
    pub kind: IndelEventKind,
    pub round_index: usize,
    pub symbol: Symbol,
}

impl IndelEvent {
    pub fn substitution(round_index: usize, symbol: Symbol) -> Self {
        IndelEvent {
            kind: IndelEventKind::Substitution,
            round_index,
            symbol,
        }
    }

    pub fn out_of_sync(round_index: usize, injected: Symbol) -> Self {
        IndelEvent {
            kind: IndelEventKind::OutOfSync,
            round_index,
            symbol: injected,
        }
    }
}

/// When an insertion-deletion execution stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndelStop {
    /// A party halts once its transcript holds `N'` symbols; the execution
    /// ends when the party holding the turn has halted.
    Halting,
    /// Exactly this many transmissions, ignoring halting.
    Transmissions(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndelOutcome {
    pub alice: Transcript,
    pub bob: Transcript,
    pub transmissions: usize,
    /// Number of edit corruptions applied.
    pub corruptions: usize,
}

/// Runs the alternating protocol `pi_prime` over the message-driven
/// insertion-deletion channel under `events`.
pub fn indel_transmit(
    pi_prime: &Protocol,
    x: &[u8],
    y: &[u8],
    events: &[IndelEvent],
    stop: IndelStop,
) -> Result<IndelOutcome, ChannelError> {
    let mut script: BTreeMap<usize, IndelEvent> = BTreeMap::new();
    for ev in events {
        if script.insert(ev.round_index, *ev).is_some() {
            return Err(ChannelError::DuplicateEvent(ev.round_index));
        }
    }
    let n_prime = pi_prime.len();
    let mut ts = [Transcript::new(), Transcript::new()];
    let mut syms: [Vec<Symbol>; 2] = [Vec::new(), Vec::new()];
    let idx = |p: Party| match p {
        Party::Alice => 0,
        Party::Bob => 1,
    };
    let mut sender = Party::Alice;
    let mut transmissions = 0;
    let mut corruptions = 0;
    loop {
        match stop {
            IndelStop::Halting if syms[idx(sender)].len() >= n_prime => break,
            IndelStop::Transmissions(n) if transmissions == n => break,
            _ => {}
        }
        transmissions += 1;
        let s = idx(sender);
        let r = 1 - s;
        let input = if sender == Party::Alice { x } else { y };
        let m = pi_prime.next_symbol(sender, input, &syms[s]);
        syms[s].push(m);
        ts[s].push(m, Direction::Sent);
        let delivered = match script.get(&transmissions) {
            None => Some(m),
            Some(ev) => {
                corruptions += 1;
                match ev.kind {
                    IndelEventKind::Substitution => {
                        if ev.symbol == m {
                            return Err(ChannelError::NoopSubstitution(transmissions));
                        }
                        Some(ev.symbol)
                    }
                    IndelEventKind::OutOfSync => {
                        syms[s].push(ev.symbol);
                        ts[s].push(ev.symbol, Direction::Received);
                        None
                    }
                }
            }
        };
        if let Some(d) = delivered {
            if stop == IndelStop::Halting && syms[r].len() >= n_prime {
                break;
            }
            syms[r].push(d);
            ts[r].push(d, Direction::Received);
            sender = sender.other();
        }
    }
    if let Some((t, _)) = script.range(transmissions + 1..).next() {
        return Err(ChannelError::EventAfterHalt(*t));
    }
    let [alice, bob] = ts;
    Ok(IndelOutcome {
        alice,
        bob,
        transmissions,
        corruptions,
    })
}

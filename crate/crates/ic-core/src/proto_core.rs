//! Two-party protocols with a fixed speaking order, transcripts, and the toy
//! robust wrappers used as inner protocols by the coding schemes.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{IndelEvent, IndelEventKind};
use crate::util::{hash_words, mix64};

pub type Symbol = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }

    fn tag(self) -> u64 {
        match self {
            Party::Alice => 0xa11ce,
            Party::Bob => 0xb0b,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtoError {
    #[error("the wrappers need a nonempty inner protocol")]
    EmptyProtocol,
    #[error("alphabet size must be at least 2, got {0}")]
    BadAlphabet(u32),
    #[error("repetition must be positive")]
    BadRepetition,
    #[error("inner protocol must be alternating with Alice first")]
    NotAlternating,
    #[error("inner protocol must be binary, alphabet is {0}")]
    NotBinary(u32),
}

/// Who speaks in each round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpeakingOrder {
    /// Alice speaks in odd rounds, Bob in even rounds.
    Alternating,
    /// Bursts of `k` rounds per party, Alice first.
    KAlternating(usize),
    /// Explicit speaker per round; rounds past the end alternate.
    Custom(Arc<[Party]>),
}

impl SpeakingOrder {
    /// Speaker of 1-based round `round`.
    pub fn speaker(&self, round: usize) -> Party {
        assert!(round >= 1, "rounds are 1-based");
        let alternating = |r: usize| if r % 2 == 1 { Party::Alice } else { Party::Bob };
        match self {
            SpeakingOrder::Alternating => alternating(round),
            SpeakingOrder::KAlternating(k) => {
                if ((round - 1) / k.max(&1)).is_multiple_of(2) {
                    Party::Alice
                } else {
                    Party::Bob
                }
            }
            SpeakingOrder::Custom(order) => order
                .get(round - 1)
                .copied()
                .unwrap_or_else(|| alternating(round)),
        }
    }
}

pub type NextSymbolFn = dyn Fn(Party, &[u8], &[Symbol]) -> Symbol + Send + Sync;

/// A deterministic protocol: the speaker's next symbol is a function of its
/// input and the symbols seen so far.
#[derive(Clone)]
pub struct Protocol {
    len: usize,
    alphabet: u32,
    order: SpeakingOrder,
    next: Arc<NextSymbolFn>,
}

impl fmt::Debug for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Protocol")
            .field("len", &self.len)
            .field("alphabet", &self.alphabet)
            .field("order", &self.order)
            .finish()
    }
}

impl Protocol {
    pub fn new(
        len: usize,
        alphabet: u32,
        order: SpeakingOrder,
        next: Arc<NextSymbolFn>,
    ) -> Result<Self, ProtoError> {
        if alphabet < 2 {
            return Err(ProtoError::BadAlphabet(alphabet));
        }
        Ok(Protocol {
            len,
            alphabet,
            order,
            next,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet
    }

    pub fn order(&self) -> &SpeakingOrder {
        &self.order
    }

    pub fn speaker(&self, round: usize) -> Party {
        self.order.speaker(round)
    }

    /// Next symbol of `party` given its view `transcript`. Total: transcripts
    /// longer than the protocol or holding out-of-alphabet symbols are accepted.
    pub fn next_symbol(&self, party: Party, input: &[u8], transcript: &[Symbol]) -> Symbol {
        (self.next)(party, input, transcript)
    }

    pub fn is_alternating(&self) -> bool {
        (1..=self.len).all(|r| self.speaker(r) == SpeakingOrder::Alternating.speaker(r))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub symbol: Symbol,
    pub dir: Direction,
}

/// A party's view of an execution.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, symbol: Symbol, dir: Direction) {
        self.entries.push(TranscriptEntry { symbol, dir });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        self.entries.iter().map(|e| e.symbol).collect()
    }

    pub fn truncate(&mut self, len: usize) {
        self.entries.truncate(len);
    }
}

/// Runs `p` over a noiseless channel and returns both parties' transcripts.
pub fn run_noiseless(p: &Protocol, x: &[u8], y: &[u8]) -> (Transcript, Transcript) {
    let mut ta = Transcript::new();
    let mut tb = Transcript::new();
    let mut seen: Vec<Symbol> = Vec::with_capacity(p.len());
    for round in 1..=p.len() {
        let speaker = p.speaker(round);
        let input = match speaker {
            Party::Alice => x,
            Party::Bob => y,
        };
        let s = p.next_symbol(speaker, input, &seen);
        seen.push(s);
        let (send, recv) = match speaker {
            Party::Alice => (&mut ta, &mut tb),
            Party::Bob => (&mut tb, &mut ta),
        };
        send.push(s, Direction::Sent);
        recv.push(s, Direction::Received);
    }
    (ta, tb)
}

/// Pads `p` with dummy rounds so that speakers alternate starting with Alice.
/// The result has even length at most `2 * p.len()`; alternating inputs are
/// returned unchanged.
pub fn to_alternating(p: &Protocol) -> Protocol {
    if p.is_alternating() {
        return p.clone();
    }
    // real[t] = Some(original round) or None for padding.
    let mut real: Vec<Option<usize>> = Vec::with_capacity(2 * p.len());
    for round in 1..=p.len() {
        let speaker = p.speaker(round);
        let slot = SpeakingOrder::Alternating.speaker(real.len() + 1);
        if slot != speaker {
            real.push(None);
        }
        real.push(Some(round));
    }
    if real.len() % 2 == 1 {
        real.push(None);
    }
    let real: Arc<[Option<usize>]> = real.into();
    let inner = p.clone();
    let map = real.clone();
    let next = move |party: Party, input: &[u8], ts: &[Symbol]| -> Symbol {
        match map.get(ts.len()) {
            Some(Some(_)) => {
                let stripped: Vec<Symbol> = ts
                    .iter()
                    .zip(map.iter())
                    .filter(|(_, r)| r.is_some())
                    .map(|(s, _)| *s)
                    .collect();
                inner.next_symbol(party, input, &stripped)
            }
            _ => 0,
        }
    };
    Protocol {
        len: real.len(),
        alphabet: p.alphabet,
        order: SpeakingOrder::Alternating,
        next: Arc::new(next),
    }
}

/// Strips the padding rounds that [`to_alternating`] inserted for `original`.
pub fn strip_padding(original: &Protocol, padded: &[Symbol]) -> Vec<Symbol> {
    if original.is_alternating() {
        return padded.to_vec();
    }
    let mut out = Vec::with_capacity(original.len());
    let mut t = 0;
    for round in 1..=original.len() {
        if SpeakingOrder::Alternating.speaker(t + 1) != original.speaker(round) {
            t += 1;
        }
        if let Some(s) = padded.get(t) {
            out.push(*s);
        }
        t += 1;
    }
    out
}

/// An alternating protocol whose messages are a keyed hash of the speaker's
/// input and the transcript so far.
pub fn make_random_protocol(seed: u64, n: usize, alphabet: u32) -> Result<Protocol, ProtoError> {
    let next = move |party: Party, input: &[u8], ts: &[Symbol]| -> Symbol {
        let h = hash_words(
            seed ^ party.tag(),
            input
                .iter()
                .map(|b| *b as u64 | 0x100)
                .chain(std::iter::once(0xffff_0000))
                .chain(ts.iter().map(|s| *s as u64)),
        );
        (mix64(h ^ ts.len() as u64) % alphabet as u64) as Symbol
    };
    Protocol::new(n, alphabet, SpeakingOrder::Alternating, Arc::new(next))
}

/// Majority of `values`; ties go to the value whose last occurrence is latest.
fn majority_latest(values: impl Iterator<Item = Symbol>) -> Option<Symbol> {
    let mut tally: Vec<(Symbol, usize, usize)> = Vec::new();
    for (pos, v) in values.enumerate() {
        match tally.iter_mut().find(|(s, _, _)| *s == v) {
            Some(entry) => {
                entry.1 += 1;
                entry.2 = pos;
            }
            None => tally.push((v, 1, pos)),
        }
    }
    tally
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(a.2.cmp(&b.2)))
        .map(|(s, _, _)| s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Data { block: usize },
    Marker,
    Filler,
}

/// Exchange layout of a repetition wrapper. Exchange `u` covers wrapper rounds
/// `2u + 1` (Alice) and `2u + 2` (Bob).
#[derive(Debug)]
struct RepetitionLayout {
    repetition: usize,
    inner_len: usize,
    slots: Vec<Slot>,
    block_exchanges: Vec<Vec<usize>>,
}

impl RepetitionLayout {
    fn new(inner_len: usize, repetition: usize, markers: bool) -> Self {
        let blocks = inner_len.div_ceil(2);
        let data = blocks * repetition;
        let mut slots = Vec::new();
        let mut block_exchanges = vec![Vec::with_capacity(repetition); blocks];
        let mut d = 0;
        while d < data || (markers && slots.len() % 4 != 0) {
            if markers && slots.len() % 4 == 3 {
                slots.push(Slot::Marker);
            } else if d < data {
                let block = d / repetition;
                block_exchanges[block].push(slots.len());
                slots.push(Slot::Data { block });
                d += 1;
            } else {
                slots.push(Slot::Filler);
            }
        }
        RepetitionLayout {
            repetition,
            inner_len,
            slots,
            block_exchanges,
        }
    }

    fn wrapper_len(&self) -> usize {
        2 * self.slots.len()
    }

    fn block_of_round(&self, round: usize) -> Option<usize> {
        match self.slots.get((round - 1) / 2) {
            Some(Slot::Data { block }) => Some(*block),
            _ => None,
        }
    }

    /// Inner transcript carried by the complete blocks of `ts`.
    fn decode(&self, party: Party, ts: &[Symbol]) -> Vec<Symbol> {
        let mut out = Vec::with_capacity(self.inner_len);
        for (g, exchanges) in self.block_exchanges.iter().enumerate() {
            let last = *exchanges.last().expect("blocks are non-empty");
            if 2 * last + 1 >= ts.len() {
                break;
            }
            let (a, b) = match party {
                Party::Alice => (
                    ts[2 * exchanges[0]],
                    majority_latest(exchanges.iter().map(|u| ts[2 * u + 1])).unwrap_or(0),
                ),
                Party::Bob => (
                    majority_latest(exchanges.iter().map(|u| ts[2 * u])).unwrap_or(0),
                    ts[2 * last + 1],
                ),
            };
            out.push(a);
            if 2 * g + 1 < self.inner_len {
                out.push(b);
            }
        }
        out
    }

    fn next(&self, inner: &Protocol, party: Party, input: &[u8], ts: &[Symbol]) -> Symbol {
        let u = ts.len() / 2;
        match (self.slots.get(u), party) {
            (Some(Slot::Marker), Party::Alice) => 1,
            (Some(Slot::Data { block }), Party::Alice) => {
                let prefix = self.decode(party, &ts[..2 * self.block_exchanges[*block][0]]);
                inner.next_symbol(Party::Alice, input, &prefix)
            }
            (Some(Slot::Data { block }), Party::Bob) => {
                let g = *block;
                if 2 * g + 1 >= self.inner_len {
                    return 0;
                }
                let exchanges = &self.block_exchanges[g];
                let mut prefix = self.decode(party, &ts[..2 * exchanges[0]]);
                let a = majority_latest(
                    exchanges
                        .iter()
                        .take_while(|e| **e <= u)
                        .filter_map(|e| ts.get(2 * e).copied()),
                )
                .unwrap_or(0);
                prefix.push(a);
                inner.next_symbol(Party::Bob, input, &prefix)
            }
            _ => 0,
        }
    }
}

pub type OutputFn = dyn Fn(Party, &[Symbol]) -> Vec<Symbol> + Send + Sync;

/// An alternating protocol `pi_prime` over a power-of-two alphabet that
/// simulates `inner` under insertion-deletion noise up to its budget.
#[derive(Clone)]
pub struct IndelRobustProtocol {
    pub inner: Protocol,
    pub pi_prime: Protocol,
    /// Tolerated fraction of edit corruptions.
    pub delta: f64,
    /// Rate slack: `N' / N - 1`.
    pub epsilon: f64,
    output: Arc<OutputFn>,
    layout: Option<Arc<RepetitionLayout>>,
}

impl fmt::Debug for IndelRobustProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndelRobustProtocol")
            .field("inner", &self.inner)
            .field("n_prime", &self.n_prime())
            .field("alphabet_prime", &self.alphabet_prime())
            .field("delta", &self.delta)
            .finish()
    }
}

impl IndelRobustProtocol {
    /// Wraps an arbitrary robust protocol. `output` maps a party's wrapper
    /// transcript to its reconstruction of the inner transcript.
    pub fn new(
        inner: Protocol,
        pi_prime: Protocol,
        delta: f64,
        output: Arc<OutputFn>,
    ) -> Result<Self, ProtoError> {
        if !pi_prime.is_alternating() {
            return Err(ProtoError::NotAlternating);
        }
        if !pi_prime.alphabet_size().is_power_of_two() {
            return Err(ProtoError::BadAlphabet(pi_prime.alphabet_size()));
        }
        let epsilon = pi_prime.len() as f64 / inner.len() as f64 - 1.0;
        Ok(IndelRobustProtocol {
            inner,
            pi_prime,
            delta,
            epsilon,
            output,
            layout: None,
        })
    }

    pub fn n_prime(&self) -> usize {
        self.pi_prime.len()
    }

    pub fn alphabet_prime(&self) -> u32 {
        self.pi_prime.alphabet_size()
    }

    /// Bits per wrapper symbol.
    pub fn symbol_bits(&self) -> u32 {
        self.alphabet_prime().trailing_zeros()
    }

    pub fn next_symbol(&self, party: Party, input: &[u8], transcript: &[Symbol]) -> Symbol {
        self.pi_prime.next_symbol(party, input, transcript)
    }

    /// Reconstructed inner transcript; only the first `N'` symbols count.
    pub fn output(&self, party: Party, transcript: &[Symbol]) -> Vec<Symbol> {
        let end = transcript.len().min(self.n_prime());
        (self.output)(party, &transcript[..end])
    }

    /// For the repetition wrapper: whether `events` exceed what it tolerates,
    /// i.e. any out-of-sync event or more than `(r - 1) / 2` substitutions in
    /// one block. `None` for wrappers without a stated budget.
    pub fn budget_exceeded(&self, events: &[IndelEvent]) -> Option<bool> {
        let layout = self.layout.as_ref()?;
        let allowed = (layout.repetition - 1) / 2;
        let mut per_block = vec![0usize; layout.block_exchanges.len()];
        for ev in events {
            match ev.kind {
                IndelEventKind::OutOfSync => return Some(true),
                IndelEventKind::Substitution => {
                    if let Some(g) = layout.block_of_round(ev.round_index) {
                        per_block[g] += 1;
                    }
                }
            }
        }
        Some(per_block.iter().any(|c| *c > allowed))
    }
}

fn check_inner(p: &Protocol, repetition: usize) -> Result<(), ProtoError> {
    if repetition == 0 {
        return Err(ProtoError::BadRepetition);
    }
    if !p.is_alternating() {
        return Err(ProtoError::NotAlternating);
    }
    if p.is_empty() {
        return Err(ProtoError::EmptyProtocol);
    }
    Ok(())
}

/// Repetition wrapper: every inner symbol is carried in `repetition`
/// exchanges and decoded by majority. Bob re-derives his reply from the
/// running majority of Alice's copies, so a reply sent on a corrupted copy is
/// corrected by the later ones. Tolerates `(repetition - 1) / 2`
/// substitutions per inner round pair and no out-of-sync events.
pub fn toy_indel_robust(
    p: &Protocol,
    repetition: usize,
) -> Result<IndelRobustProtocol, ProtoError> {
    check_inner(p, repetition)?;
    let layout = Arc::new(RepetitionLayout::new(p.len(), repetition, false));
    let alphabet = p.alphabet_size().next_power_of_two().max(2);
    let inner = p.clone();
    let l = layout.clone();
    let pi_prime = Protocol::new(
        layout.wrapper_len(),
        alphabet,
        SpeakingOrder::Alternating,
        Arc::new(move |party, input, ts| l.next(&inner, party, input, ts)),
    )?;
    let l = layout.clone();
    let output: Arc<OutputFn> = Arc::new(move |party, ts| l.decode(party, ts));
    let allowed = (repetition - 1) / 2;
    let mut robust = IndelRobustProtocol::new(
        p.clone(),
        pi_prime,
        allowed as f64 / (2 * repetition) as f64,
        output,
    )?;
    robust.layout = Some(layout);
    Ok(robust)
}

/// A binary alternating protocol that tolerates a constant fraction of
/// substitutions, with at least one 1 among every eight of its rounds sent by
/// Alice regardless of the inputs.
#[derive(Clone)]
pub struct SubstResilientProtocol {
    pub inner: Protocol,
    pub pi_prime: Protocol,
    pub resilience_fraction: f64,
    /// Minimum fraction of the wrapper's rounds in which Alice sends a 1.
    pub ones_density_floor: f64,
    output: Arc<OutputFn>,
}

impl fmt::Debug for SubstResilientProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubstResilientProtocol")
            .field("inner", &self.inner)
            .field("len", &self.pi_prime.len())
            .field("resilience_fraction", &self.resilience_fraction)
            .finish()
    }
}

impl SubstResilientProtocol {
    pub fn new(
        inner: Protocol,
        pi_prime: Protocol,
        resilience_fraction: f64,
        ones_density_floor: f64,
        output: Arc<OutputFn>,
    ) -> Self {
        SubstResilientProtocol {
            inner,
            pi_prime,
            resilience_fraction,
            ones_density_floor,
            output,
        }
    }

    pub fn len(&self) -> usize {
        self.pi_prime.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi_prime.is_empty()
    }

    pub fn next_symbol(&self, party: Party, input: &[u8], transcript: &[Symbol]) -> Symbol {
        self.pi_prime.next_symbol(party, input, transcript)
    }

    pub fn output(&self, party: Party, transcript: &[Symbol]) -> Vec<Symbol> {
        let end = transcript.len().min(self.len());
        (self.output)(party, &transcript[..end])
    }
}

/// Binary repetition wrapper with a forced 1 from Alice in every fourth
/// exchange. Each block of `2 * repetition` data rounds tolerates
/// `(repetition - 1) / 2` substitutions.
pub fn toy_subst_resilient(
    p: &Protocol,
    repetition: usize,
) -> Result<SubstResilientProtocol, ProtoError> {
    check_inner(p, repetition)?;
    if p.alphabet_size() != 2 {
        return Err(ProtoError::NotBinary(p.alphabet_size()));
    }
    let layout = Arc::new(RepetitionLayout::new(p.len(), repetition, true));
    let inner = p.clone();
    let l = layout.clone();
    let pi_prime = Protocol::new(
        layout.wrapper_len(),
        2,
        SpeakingOrder::Alternating,
        Arc::new(move |party, input, ts| l.next(&inner, party, input, ts)),
    )?;
    let l = layout.clone();
    let output: Arc<OutputFn> = Arc::new(move |party, ts| l.decode(party, ts));
    let allowed = (repetition - 1) / 2;
    Ok(SubstResilientProtocol::new(
        p.clone(),
        pi_prime,
        allowed as f64 / (2 * repetition) as f64 * 0.75,
        0.125,
        output,
    ))
}

/// Serializable recipe for the random protocols and wrappers used in
/// experiments and stored with traces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub seed: u64,
    pub n: usize,
    pub alphabet: u32,
    pub repetition: usize,
}

impl ProtocolSpec {
    pub fn inner(&self) -> Result<Protocol, ProtoError> {
        make_random_protocol(self.seed, self.n, self.alphabet)
    }

    pub fn indel_robust(&self) -> Result<IndelRobustProtocol, ProtoError> {
        toy_indel_robust(&self.inner()?, self.repetition)
    }

    pub fn subst_resilient(&self) -> Result<SubstResilientProtocol, ProtoError> {
        toy_subst_resilient(&self.inner()?, self.repetition)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_symbols(p: &Protocol, x: &[u8], y: &[u8]) -> Vec<Symbol> {
        run_noiseless(p, x, y).0.symbols()
    }

    #[test]
    fn noiseless_transcripts_agree() {
        let p = make_random_protocol(3, 9, 5).unwrap();
        let (ta, tb) = run_noiseless(&p, b"x", b"y");
        assert_eq!(ta.symbols(), tb.symbols());
        assert_eq!(ta.len(), 9);
        for (r, e) in ta.entries.iter().enumerate() {
            let expect = if r % 2 == 0 {
                Direction::Sent
            } else {
                Direction::Received
            };
            assert_eq!(e.dir, expect);
        }
    }

    #[test]
    fn random_protocol_depends_on_inputs() {
        let p = make_random_protocol(3, 32, 2).unwrap();
        assert_ne!(run_symbols(&p, b"a", b"y"), run_symbols(&p, b"b", b"y"));
        assert_ne!(run_symbols(&p, b"a", b"y"), run_symbols(&p, b"a", b"z"));
    }

    #[test]
    fn alternating_is_unchanged() {
        let p = make_random_protocol(1, 7, 3).unwrap();
        let q = to_alternating(&p);
        assert_eq!(q.len(), 7);
        assert_eq!(run_symbols(&p, b"x", b"y"), run_symbols(&q, b"x", b"y"));
    }

    #[test]
    fn all_alice_doubles() {
        let base = make_random_protocol(5, 6, 4).unwrap();
        let order: Arc<[Party]> = vec![Party::Alice; 6].into();
        let b = base.clone();
        let p = Protocol::new(
            6,
            4,
            SpeakingOrder::Custom(order),
            Arc::new(move |party, input, ts| b.next_symbol(party, input, ts)),
        )
        .unwrap();
        let q = to_alternating(&p);
        assert_eq!(q.len(), 12);
        assert!(q.is_alternating());
        let padded = run_symbols(&q, b"x", b"y");
        assert_eq!(strip_padding(&p, &padded), run_symbols(&p, b"x", b"y"));
    }

    #[test]
    fn k_alternating_converts() {
        let base = make_random_protocol(9, 12, 3).unwrap();
        let b = base.clone();
        let p = Protocol::new(
            12,
            3,
            SpeakingOrder::KAlternating(3),
            Arc::new(move |party, input, ts| b.next_symbol(party, input, ts)),
        )
        .unwrap();
        let q = to_alternating(&p);
        assert!(q.len() <= 24 && q.len().is_multiple_of(2));
        let padded = run_symbols(&q, b"in", b"put");
        assert_eq!(strip_padding(&p, &padded), run_symbols(&p, b"in", b"put"));
    }

    #[test]
    fn majority_breaks_ties_toward_latest() {
        assert_eq!(majority_latest([1, 2].into_iter()), Some(2));
        assert_eq!(majority_latest([2, 1].into_iter()), Some(1));
        assert_eq!(majority_latest([1, 2, 1].into_iter()), Some(1));
        assert_eq!(majority_latest([3, 1, 2, 2].into_iter()), Some(2));
    }

    #[test]
    fn repetition_one_is_identity() {
        let p = make_random_protocol(11, 16, 4).unwrap();
        let r = toy_indel_robust(&p, 1).unwrap();
        assert_eq!(r.n_prime(), 16);
        let inner = run_symbols(&p, b"x", b"y");
        let outer = run_symbols(&r.pi_prime, b"x", b"y");
        assert_eq!(inner, outer);
        assert_eq!(r.output(Party::Alice, &outer), inner);
        assert_eq!(r.output(Party::Bob, &outer), inner);
    }

    #[test]
    fn odd_inner_length_is_supported() {
        let p = make_random_protocol(2, 7, 2).unwrap();
        let r = toy_indel_robust(&p, 3).unwrap();
        assert_eq!(r.n_prime(), 24);
        let outer = run_symbols(&r.pi_prime, b"x", b"y");
        let inner = run_symbols(&p, b"x", b"y");
        assert_eq!(r.output(Party::Alice, &outer), inner);
        assert_eq!(r.output(Party::Bob, &outer), inner);
    }

    #[test]
    fn subst_wrapper_layout() {
        let p = make_random_protocol(4, 64, 2).unwrap();
        let s = toy_subst_resilient(&p, 3).unwrap();
        assert_eq!(s.len(), 256);
        let outer = run_symbols(&s.pi_prime, b"x", b"y");
        let alice_ones = outer.iter().step_by(2).filter(|b| **b == 1).count();
        assert!(alice_ones * 8 >= s.len());
        let inner = run_symbols(&p, b"x", b"y");
        assert_eq!(s.output(Party::Alice, &outer), inner);
        assert_eq!(s.output(Party::Bob, &outer), inner);
    }

    #[test]
    fn rejects_bad_parameters() {
        let empty = make_random_protocol(7, 0, 2).unwrap();
        assert_eq!(run_noiseless(&empty, b"", b"").0.len(), 0);
        assert_eq!(to_alternating(&empty).len(), 0);
        assert_eq!(
            toy_indel_robust(&empty, 1).unwrap_err(),
            ProtoError::EmptyProtocol
        );
        assert_eq!(
            make_random_protocol(0, 4, 1).unwrap_err(),
            ProtoError::BadAlphabet(1)
        );
        let p = make_random_protocol(0, 4, 3).unwrap();
        assert_eq!(
            toy_indel_robust(&p, 0).unwrap_err(),
            ProtoError::BadRepetition
        );
        assert_eq!(
            toy_subst_resilient(&p, 3).unwrap_err(),
            ProtoError::NotBinary(3)
        );
    }
}

//! Challenge-response simulation of an insertion-deletion resilient protocol
//! over a bit channel with erasures and rare flips.
//!
//! Every iteration Alice sends her next symbol of `pi'` with the parity of her
//! counter; Bob accepts when the parity is new to him and answers, otherwise
//! he repeats his last answer. Alice keeps her symbol only if the answer
//! carries her parity, and rewinds one symbol otherwise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{
    ChannelSymbol, Effect, NoisePattern, UpefChannel, UpefSchedule, WireChannel,
};
use crate::proto_core::{run_noiseless, IndelRobustProtocol, Party, ProtocolSpec, Symbol};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("trace is missing its {0} record")]
    Missing(&'static str),
}

/// A symbol of `pi'` with a parity bit, as sent on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireMessage {
    pub symbol: Symbol,
    pub parity: u8,
}

impl WireMessage {
    /// `symbol_bits` bits of the symbol, most significant first, then parity.
    pub fn bits(&self, symbol_bits: u32) -> Vec<u8> {
        let mut out: Vec<u8> = (0..symbol_bits)
            .rev()
            .map(|j| ((self.symbol >> j) & 1) as u8)
            .collect();
        out.push(self.parity & 1);
        out
    }
}

/// What a party reconstructs from the `k` received bits of a message.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Received {
    /// `None` if any symbol bit was erased.
    pub symbol: Option<Symbol>,
    pub parity: Option<u8>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub silence: bool,
}

impl Received {
    pub fn from_symbols(bits: &[ChannelSymbol]) -> Self {
        let silence = bits.contains(&ChannelSymbol::Silence);
        let (msg, par) = bits.split_at(bits.len() - 1);
        let symbol = msg
            .iter()
            .try_fold(0u32, |acc, b| b.bit().map(|v| (acc << 1) | v as u32));
        Received {
            symbol,
            parity: par[0].bit(),
            silence,
        }
    }

    /// The message, if nothing was erased.
    pub fn complete(&self) -> Option<WireMessage> {
        if self.silence {
            return None;
        }
        Some(WireMessage {
            symbol: self.symbol?,
            parity: self.parity?,
        })
    }
}

/// A corrupted bit within a `k`-bit message; offset `k - 1` is the parity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitEvent {
    pub offset: u32,
    pub effect: Effect,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliceState {
    pub r: u64,
    pub transcript: Vec<Symbol>,
}

impl AliceState {
    /// Advances the counter and sends the next symbol.
    pub fn begin(&mut self, pi: &IndelRobustProtocol, x: &[u8]) -> WireMessage {
        self.r += 1;
        let m = pi.next_symbol(Party::Alice, x, &self.transcript);
        self.transcript.push(m);
        WireMessage {
            symbol: m,
            parity: (self.r % 2) as u8,
        }
    }

    /// Keeps the answer if it is complete and carries Alice's parity, rewinds
    /// otherwise. Returns whether Alice progressed.
    pub fn finish(&mut self, received: &Received) -> bool {
        match received.complete() {
            Some(w) if w.parity as u64 == self.r % 2 => {
                self.transcript.push(w.symbol);
                true
            }
            _ => {
                self.transcript.pop();
                self.r -= 1;
                false
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BobState {
    pub r: u64,
    pub transcript: Vec<Symbol>,
    pub last_sent: WireMessage,
}

impl Default for BobState {
    fn default() -> Self {
        BobState {
            r: 0,
            transcript: Vec::new(),
            last_sent: WireMessage {
                symbol: 0,
                parity: 0,
            },
        }
    }
}

impl BobState {
    /// Accepts a complete message with a parity different from his counter's
    /// and answers it; otherwise repeats the last answer. Returns whether Bob
    /// progressed and the message to send.
    pub fn respond(
        &mut self,
        pi: &IndelRobustProtocol,
        y: &[u8],
        received: &Received,
    ) -> (bool, WireMessage) {
        match received.complete() {
            Some(w) if w.parity as u64 != self.r % 2 => {
                self.transcript.push(w.symbol);
                self.r += 1;
                let m = pi.next_symbol(Party::Bob, y, &self.transcript);
                self.transcript.push(m);
                self.last_sent = WireMessage {
                    symbol: m,
                    parity: (self.r % 2) as u8,
                };
                (true, self.last_sent)
            }
            _ => (false, self.last_sent),
        }
    }
}

/// Alice's half of an iteration: the message she sends.
pub fn alice_iteration(state: &mut AliceState, pi: &IndelRobustProtocol, x: &[u8]) -> WireMessage {
    state.begin(pi, x)
}

/// Bob's full iteration on a received message.
pub fn bob_iteration(
    state: &mut BobState,
    pi: &IndelRobustProtocol,
    y: &[u8],
    received: &Received,
) -> (bool, WireMessage) {
    state.respond(pi, y, received)
}

/// Everything that happened in one iteration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: u64,
    pub alice_active: bool,
    pub alice_sent: Option<WireMessage>,
    pub bob_received: Received,
    pub bob_sent: Option<WireMessage>,
    pub alice_received: Received,
    pub a_to_b: Vec<BitEvent>,
    pub b_to_a: Vec<BitEvent>,
    pub r_a_before: u64,
    pub r_a_after: u64,
    pub r_b_before: u64,
    pub r_b_after: u64,
    pub ta_len_before: usize,
    pub ta_len_after: usize,
    pub tb_len_before: usize,
    pub tb_len_after: usize,
    pub alice_progress: bool,
    pub bob_progress: bool,
    /// Added after the run for analysis only; never transmitted.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub analysis_only: bool,
}

impl IterationRecord {
    pub(crate) fn flips(events: &[BitEvent], parity_offset: u32, parity: bool) -> usize {
        events
            .iter()
            .filter(|e| e.effect == Effect::Flipped && (e.offset == parity_offset) == parity)
            .count()
    }

    /// Symbol-bit flips in both directions.
    pub fn m_flips(&self, k: u32) -> usize {
        Self::flips(&self.a_to_b, k - 1, false) + Self::flips(&self.b_to_a, k - 1, false)
    }

    /// Parity-bit flips in both directions.
    pub fn r_flips(&self, k: u32) -> usize {
        Self::flips(&self.a_to_b, k - 1, true) + Self::flips(&self.b_to_a, k - 1, true)
    }

    pub fn flips_total(&self) -> usize {
        self.a_to_b
            .iter()
            .chain(&self.b_to_a)
            .filter(|e| e.effect == Effect::Flipped)
            .count()
    }

    /// Corrupted transmissions of any kind.
    pub fn corruptions(&self) -> usize {
        self.a_to_b.len() + self.b_to_a.len()
    }

    pub fn erasures(&self) -> usize {
        self.a_to_b
            .iter()
            .chain(&self.b_to_a)
            .filter(|e| e.effect == Effect::Erased)
            .count()
    }

    /// Symbols Alice appended, `(sigma, rho')`.
    pub fn alice_added(&self) -> Option<(Symbol, Symbol)> {
        if !self.alice_progress {
            return None;
        }
        Some((self.alice_sent?.symbol, self.alice_received.symbol?))
    }

    /// Symbols Bob appended, `(sigma', rho)`.
    pub fn bob_added(&self) -> Option<(Symbol, Symbol)> {
        if !self.bob_progress {
            return None;
        }
        Some((self.bob_received.symbol?, self.bob_sent?.symbol))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    /// Bits per message and direction.
    pub k: u32,
    pub n_prime: usize,
    pub alphabet_prime: u32,
    /// `|E|`.
    #[serde(rename = "T")]
    pub t: usize,
    pub ceiling: u64,
    #[serde(default)]
    pub protocol: Option<ProtocolSpec>,
    #[serde(default)]
    pub x: Vec<u8>,
    #[serde(default)]
    pub y: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrOutcome {
    pub alice_output: Vec<Symbol>,
    pub bob_output: Vec<Symbol>,
    pub alice_ok: bool,
    pub bob_ok: bool,
    /// Alice's last iteration.
    pub alice_iterations: u64,
    pub iterations: u64,
    /// `2k` bits per iteration.
    pub comm_bits: u64,
    pub wire_bits: u64,
    /// Flipped bits.
    pub f: usize,
    /// Erased bits.
    pub d: usize,
    pub bob_terminated_first: bool,
    #[serde(default)]
    pub aborted: Option<String>,
}

impl CrOutcome {
    pub fn success(&self) -> bool {
        self.alice_ok && self.bob_ok && self.aborted.is_none()
    }
}

/// A complete run: header, one record per iteration, final states, outcome.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CRTrace {
    pub header: TraceHeader,
    pub iterations: Vec<IterationRecord>,
    pub final_alice: AliceState,
    pub final_bob: BobState,
    pub outcome: CrOutcome,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TraceLine {
    Header(TraceHeader),
    Iteration(IterationRecord),
    Final {
        alice: AliceState,
        bob: BobState,
        outcome: CrOutcome,
    },
}

impl CRTrace {
    /// JSONL: a header line, one line per iteration, and a final line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &TraceLine| {
            out.push_str(&serde_json::to_string(line).expect("trace serializes"));
            out.push('\n');
        };
        push(&TraceLine::Header(self.header.clone()));
        for it in &self.iterations {
            push(&TraceLine::Iteration(it.clone()));
        }
        push(&TraceLine::Final {
            alice: self.final_alice.clone(),
            bob: self.final_bob.clone(),
            outcome: self.outcome.clone(),
        });
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let mut header = None;
        let mut iterations = Vec::new();
        let mut fin = None;
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TraceLine = serde_json::from_str(line).map_err(|e| TraceError::Parse {
                line: no + 1,
                msg: e.to_string(),
            })?;
            match parsed {
                TraceLine::Header(h) => header = Some(h),
                TraceLine::Iteration(it) => iterations.push(it),
                TraceLine::Final {
                    alice,
                    bob,
                    outcome,
                } => fin = Some((alice, bob, outcome)),
            }
        }
        let header = header.ok_or(TraceError::Missing("header"))?;
        let (final_alice, final_bob, outcome) = fin.ok_or(TraceError::Missing("final"))?;
        Ok(CRTrace {
            header,
            iterations,
            final_alice,
            final_bob,
            outcome,
        })
    }

    /// Records up to and including Alice's last iteration.
    pub fn alice_span(&self) -> &[IterationRecord] {
        let j = self.outcome.alice_iterations as usize;
        &self.iterations[..j.min(self.iterations.len())]
    }
}

/// Options for [`run_cr_with`].
#[derive(Clone, Debug, Default)]
pub struct CrOptions {
    /// Iteration ceiling; `10 (N' + T)` when `None`.
    pub ceiling: Option<u64>,
    /// `|E|` for the header and the default ceiling.
    pub t: usize,
    pub protocol: Option<ProtocolSpec>,
}

fn send_message<C: WireChannel>(
    ch: &mut C,
    base: u64,
    k: u32,
    msg: Option<WireMessage>,
    sender: Party,
) -> (Received, Vec<BitEvent>) {
    let bits = msg.map(|m| m.bits(k - 1));
    let mut got = Vec::with_capacity(k as usize);
    let mut events = Vec::new();
    for j in 0..k {
        let d = ch.send(
            base + j as u64 + 1,
            bits.as_ref().map(|b| b[j as usize]),
            sender,
        );
        if d.effect.corrupted() {
            events.push(BitEvent {
                offset: j,
                effect: d.effect,
            });
        }
        got.push(d.symbol);
    }
    (Received::from_symbols(&got), events)
}

/// Runs the scheme for `pi` over `ch`.
pub fn run_cr_with<C: WireChannel>(
    pi: &IndelRobustProtocol,
    x: &[u8],
    y: &[u8],
    ch: &mut C,
    opts: &CrOptions,
) -> CRTrace {
    let n_prime = pi.n_prime();
    let k = pi.symbol_bits() + 1;
    let half = (n_prime / 2) as u64;
    let ceiling = opts
        .ceiling
        .unwrap_or(10 * (n_prime as u64 + opts.t as u64));
    let mut alice = AliceState::default();
    let mut bob = BobState::default();
    let mut alice_active = true;
    let mut bob_active = true;
    let mut alice_iterations = 0;
    let mut bob_first = false;
    let mut aborted = None;
    let mut records = Vec::new();
    let mut iter = 0u64;
    loop {
        if alice_active && alice.r >= half {
            alice_active = false;
            alice_iterations = iter;
            if ch.signals_silence() {
                bob_active = false;
            }
        }
        if !alice_active && !bob_active {
            break;
        }
        if iter >= ceiling {
            aborted = Some(format!("iteration ceiling {ceiling} reached"));
            if alice_active {
                alice_iterations = iter;
            }
            break;
        }
        if ch.overflowed() {
            aborted = Some("channel horizon exceeded".to_string());
            break;
        }
        iter += 1;
        let base = (iter - 1) * 2 * k as u64;
        let (r_a_before, ta_len_before) = (alice.r, alice.transcript.len());
        let (r_b_before, tb_len_before) = (bob.r, bob.transcript.len());
        let alice_sent = alice_active.then(|| alice.begin(pi, x));
        let (bob_received, a_to_b) = send_message(ch, base, k, alice_sent, Party::Alice);
        if bob_active && (ch.bob_terminated().is_some() || bob_received.silence) {
            bob_active = false;
            bob_first = alice_active;
        }
        let (bob_progress, bob_sent) = if bob_active {
            let (p, m) = bob.respond(pi, y, &bob_received);
            (p, Some(m))
        } else {
            (false, None)
        };
        let (alice_received, b_to_a) = send_message(ch, base + k as u64, k, bob_sent, Party::Bob);
        let alice_progress = alice_active && alice.finish(&alice_received);
        records.push(IterationRecord {
            index: iter,
            alice_active,
            alice_sent,
            bob_received,
            bob_sent,
            alice_received,
            a_to_b,
            b_to_a,
            r_a_before,
            r_a_after: alice.r,
            r_b_before,
            r_b_after: bob.r,
            ta_len_before,
            ta_len_after: alice.transcript.len(),
            tb_len_before,
            tb_len_after: bob.transcript.len(),
            alice_progress,
            bob_progress,
            analysis_only: false,
        });
    }
    let (expected, _) = run_noiseless(&pi.inner, x, y);
    let expected = expected.symbols();
    let alice_output = pi.output(Party::Alice, &alice.transcript);
    let bob_output = pi.output(Party::Bob, &bob.transcript);
    let f = records.iter().map(|r| r.flips_total()).sum();
    let d = records.iter().map(|r| r.erasures()).sum();
    CRTrace {
        header: TraceHeader {
            k,
            n_prime,
            alphabet_prime: pi.alphabet_prime(),
            t: opts.t,
            ceiling,
            protocol: opts.protocol.clone(),
            x: x.to_vec(),
            y: y.to_vec(),
        },
        outcome: CrOutcome {
            alice_ok: alice_output == expected,
            bob_ok: bob_output == expected,
            alice_output,
            bob_output,
            alice_iterations,
            iterations: iter,
            comm_bits: 2 * k as u64 * iter,
            wire_bits: ch.wire_bits(),
            f,
            d,
            bob_terminated_first: bob_first,
            aborted,
        },
        iterations: records,
        final_alice: alice,
        final_bob: bob,
    }
}

/// Runs the scheme over UPEF with pattern `e` and schedule `s`.
pub fn run_cr<S: Scalar>(
    pi: &IndelRobustProtocol,
    x: &[u8],
    y: &[u8],
    e: &NoisePattern,
    s: UpefSchedule<S>,
    seed: u64,
) -> CRTrace {
    let mut ch = UpefChannel::new(e, s, ChaCha8Rng::seed_from_u64(seed));
    let opts = CrOptions {
        t: e.t(),
        ..CrOptions::default()
    };
    run_cr_with(pi, x, y, &mut ch, &opts)
}

/// One noiseless iteration appended after Alice's last one, used to close a
/// trailing incomplete sequence. Alice's symbol is whatever `pi'` yields past
/// its end.
pub fn extend_noiseless(trace: &CRTrace, pi: &IndelRobustProtocol, x: &[u8], y: &[u8]) -> CRTrace {
    let mut out = trace.clone();
    let j = trace.outcome.alice_iterations as usize;
    out.iterations.truncate(j);
    let mut alice = trace.final_alice.clone();
    let mut bob = trace.final_bob.clone();
    let (r_a_before, ta_len_before) = (alice.r, alice.transcript.len());
    let (r_b_before, tb_len_before) = (bob.r, bob.transcript.len());
    let sent = alice.begin(pi, x);
    let bob_received = Received {
        symbol: Some(sent.symbol),
        parity: Some(sent.parity),
        silence: false,
    };
    let (bob_progress, bob_sent) = bob.respond(pi, y, &bob_received);
    let alice_received = Received {
        symbol: Some(bob_sent.symbol),
        parity: Some(bob_sent.parity),
        silence: false,
    };
    let alice_progress = alice.finish(&alice_received);
    out.iterations.push(IterationRecord {
        index: j as u64 + 1,
        alice_active: true,
        alice_sent: Some(sent),
        bob_received,
        bob_sent: Some(bob_sent),
        alice_received,
        a_to_b: Vec::new(),
        b_to_a: Vec::new(),
        r_a_before,
        r_a_after: alice.r,
        r_b_before,
        r_b_after: bob.r,
        ta_len_before,
        ta_len_after: alice.transcript.len(),
        tb_len_before,
        tb_len_after: bob.transcript.len(),
        alice_progress,
        bob_progress,
        analysis_only: true,
    });
    out.outcome.alice_iterations = j as u64 + 1;
    out.final_alice = alice;
    out.final_bob = bob;
    out
}

//! Offline analysis of challenge-response traces.
//!
//! Iterations are grouped into sequences (maximal stretches between points
//! where both counters agree in parity), good sequences (Alice progresses at
//! the end) anchor frames, and every iteration in which Alice progresses
//! closes a segment together with Bob's preceding lone insertions. Each
//! segment maps to a short script of substitutions and out-of-sync events, so
//! the whole run maps to an insertion-deletion execution of `pi'` that ends in
//! the same transcripts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{indel_transmit, IndelEvent, IndelStop};
use crate::proto_core::{IndelRobustProtocol, Party, Symbol};
use crate::scheme_cr::{CRTrace, IterationRecord};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabError {
    #[error("iteration {index}: {msg}")]
    Malformed { index: u64, msg: String },
    #[error("the run was aborted: {0}")]
    Aborted(String),
    #[error("replay failed: {0}")]
    Replay(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgressClass {
    /// Both progress with identical symbols.
    SameProgress,
    /// Both progress, with differing symbols.
    Substitution,
    /// Only the given party progresses.
    Insertion(Party),
    NoProgress,
}

impl ProgressClass {
    pub fn alice(self) -> bool {
        matches!(
            self,
            ProgressClass::SameProgress
                | ProgressClass::Substitution
                | ProgressClass::Insertion(Party::Alice)
        )
    }

    pub fn bob(self) -> bool {
        matches!(
            self,
            ProgressClass::SameProgress
                | ProgressClass::Substitution
                | ProgressClass::Insertion(Party::Bob)
        )
    }

    pub fn any(self) -> bool {
        self != ProgressClass::NoProgress
    }
}

fn malformed(index: u64, msg: impl Into<String>) -> LabError {
    LabError::Malformed {
        index,
        msg: msg.into(),
    }
}

/// Classifies each record, checking it against its own counter and
/// transcript deltas.
pub fn classify_iterations(records: &[IterationRecord]) -> Result<Vec<ProgressClass>, LabError> {
    records
        .iter()
        .map(|r| {
            let growth_a = r.ta_len_after as i64 - r.ta_len_before as i64;
            let growth_b = r.tb_len_after as i64 - r.tb_len_before as i64;
            let step_a = r.r_a_after as i64 - r.r_a_before as i64;
            let step_b = r.r_b_after as i64 - r.r_b_before as i64;
            let expect = |p: bool| if p { (2, 1) } else { (0, 0) };
            if (growth_a, step_a) != expect(r.alice_progress) {
                return Err(malformed(
                    r.index,
                    "Alice's deltas disagree with her progress flag",
                ));
            }
            if (growth_b, step_b) != expect(r.bob_progress) {
                return Err(malformed(
                    r.index,
                    "Bob's deltas disagree with his progress flag",
                ));
            }
            Ok(match (r.alice_added(), r.bob_added()) {
                (Some(a), Some(b)) if a == b => ProgressClass::SameProgress,
                (Some(_), Some(_)) => ProgressClass::Substitution,
                (Some(_), None) => ProgressClass::Insertion(Party::Alice),
                (None, Some(_)) => ProgressClass::Insertion(Party::Bob),
                (None, None) => {
                    if r.alice_progress || r.bob_progress {
                        return Err(malformed(r.index, "progress without recorded symbols"));
                    }
                    ProgressClass::NoProgress
                }
            })
        })
        .collect()
}

/// Iterations `start..=end` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSpan {
    pub start: u64,
    pub end: u64,
    /// Alice progresses in the last iteration.
    pub good: bool,
    /// Ends with both counters of equal parity.
    pub complete: bool,
    /// Closed by the analysis-only iteration after Alice's last one.
    pub augmented: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpan {
    pub start: u64,
    pub end: u64,
    /// Indices into [`Decomposition::sequences`].
    pub sequences: Vec<usize>,
    /// Indices into [`Decomposition::segments`].
    pub segments: Vec<usize>,
    pub augmented: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentSpan {
    pub start: u64,
    pub end: u64,
    /// 1: Alice alone, no Bob insertions; 2: both, none; 3: Alice alone after
    /// Bob insertions; 4: both after Bob insertions.
    pub seg_type: u8,
    /// Iterations in which only Bob progressed.
    pub bob_insertions: Vec<u64>,
    /// The closing segment of the analysis-only iteration.
    pub virtual_segment: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Alice's last iteration.
    pub j: u64,
    pub classes: Vec<ProgressClass>,
    pub sequences: Vec<SequenceSpan>,
    pub frames: Vec<FrameSpan>,
    pub segments: Vec<SegmentSpan>,
    /// Bob-only progress iterations after Alice's last progress.
    pub dangling_bob: Vec<u64>,
}

/// Decomposes iterations `1..=j` of a trace. A trailing incomplete sequence
/// is closed by one noiseless analysis-only iteration in which only Alice
/// progresses.
pub fn decompose(trace: &CRTrace) -> Result<Decomposition, LabError> {
    let records = trace.alice_span();
    let j = records.len() as u64;
    let classes = classify_iterations(records)?;
    let mut sequences = Vec::new();
    let mut start = 1u64;
    for r in records {
        if r.index == start && (r.r_a_before + r.r_b_before) % 2 != 0 {
            return Err(malformed(
                r.index,
                "sequence starts with counters of different parity",
            ));
        }
        if (r.r_a_after + r.r_b_after) % 2 == 0 {
            sequences.push(SequenceSpan {
                start,
                end: r.index,
                good: r.alice_progress,
                complete: true,
                augmented: false,
            });
            start = r.index + 1;
        }
    }
    if start <= j {
        sequences.push(SequenceSpan {
            start,
            end: j + 1,
            good: true,
            complete: true,
            augmented: true,
        });
    }
    let seq_has_progress =
        |s: &SequenceSpan| (s.start..=s.end.min(j)).any(|i| classes[(i - 1) as usize].any());
    let mut frames = Vec::new();
    let mut run_start = 0usize;
    for (idx, s) in sequences.iter().enumerate() {
        if !s.good {
            continue;
        }
        let first = (run_start..idx)
            .find(|b| seq_has_progress(&sequences[*b]))
            .unwrap_or(idx);
        frames.push(FrameSpan {
            start: sequences[first].start,
            end: s.end,
            sequences: (first..=idx).collect(),
            segments: Vec::new(),
            augmented: s.augmented,
        });
        run_start = idx + 1;
    }
    let mut segments = Vec::new();
    let mut pending: Vec<u64> = Vec::new();
    for (pos, c) in classes.iter().enumerate() {
        let i = pos as u64 + 1;
        if c.alice() {
            let seg_type = match (c.bob(), pending.is_empty()) {
                (false, true) => 1,
                (true, true) => 2,
                (false, false) => 3,
                (true, false) => 4,
            };
            segments.push(SegmentSpan {
                start: pending.first().copied().unwrap_or(i),
                end: i,
                seg_type,
                bob_insertions: std::mem::take(&mut pending),
                virtual_segment: false,
            });
        } else if c.bob() {
            pending.push(i);
        }
    }
    if sequences.last().is_some_and(|s| s.augmented) {
        segments.push(SegmentSpan {
            start: j + 1,
            end: j + 1,
            seg_type: 1,
            bob_insertions: Vec::new(),
            virtual_segment: true,
        });
    }
    for (si, seg) in segments.iter().enumerate() {
        if let Some(f) = frames
            .iter_mut()
            .find(|f| f.start <= seg.end && seg.end <= f.end)
        {
            f.segments.push(si);
        }
    }
    Ok(Decomposition {
        j,
        classes,
        sequences,
        frames,
        segments,
        dangling_bob: pending,
    })
}

/// Edit corruptions charged to one segment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentScript {
    pub segment: usize,
    pub events: Vec<IndelEvent>,
    pub transmissions: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameAccount {
    pub start: u64,
    pub end: u64,
    pub c: usize,
    pub f: usize,
    pub augmented: bool,
}

/// The insertion-deletion execution matching a trace, and its replay.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndelExecution {
    pub events: Vec<IndelEvent>,
    pub transmissions: usize,
    pub scripts: Vec<SegmentScript>,
    /// Edit corruptions.
    pub c: usize,
    /// Flips during iterations `1..=j`.
    pub f: usize,
    pub frames: Vec<FrameAccount>,
    pub expected_alice: Vec<Symbol>,
    pub expected_bob: Vec<Symbol>,
    pub replay_alice: Vec<Symbol>,
    pub replay_bob: Vec<Symbol>,
}

impl IndelExecution {
    pub fn replay_matches(&self) -> bool {
        self.replay_alice == self.expected_alice && self.replay_bob == self.expected_bob
    }
}

fn need<T>(v: Option<T>, index: u64, what: &str) -> Result<T, LabError> {
    v.ok_or_else(|| malformed(index, format!("missing {what}")))
}

/// Builds the matching insertion-deletion execution of `pi` for the trace,
/// replays it, and accounts edit corruptions against flips per frame.
pub fn build_matching_execution(
    trace: &CRTrace,
    pi: &IndelRobustProtocol,
    x: &[u8],
    y: &[u8],
) -> Result<IndelExecution, LabError> {
    if let Some(reason) = &trace.outcome.aborted {
        return Err(LabError::Aborted(reason.clone()));
    }
    let dec = decompose(trace)?;
    let records = trace.alice_span();
    let rec = |i: u64| &records[(i - 1) as usize];
    let mut events = Vec::new();
    let mut scripts = Vec::new();
    let mut t = 0usize;
    let push_sub = |events: &mut Vec<IndelEvent>, t: &mut usize, sent: Symbol, got: Symbol| {
        *t += 1;
        if sent != got {
            events.push(IndelEvent::substitution(*t, got));
        }
    };
    for (si, seg) in dec.segments.iter().enumerate() {
        if seg.virtual_segment {
            continue;
        }
        let before = events.len();
        let t0 = t;
        let last = rec(seg.end);
        let sigma = need(last.alice_sent, last.index, "Alice's message")?.symbol;
        let rho_in = need(
            last.alice_received.symbol,
            last.index,
            "Alice's received symbol",
        )?;
        match seg.seg_type {
            1 => {
                t += 1;
                events.push(IndelEvent::out_of_sync(t, rho_in));
            }
            2 => {
                let got = need(
                    last.bob_received.symbol,
                    last.index,
                    "Bob's received symbol",
                )?;
                push_sub(&mut events, &mut t, sigma, got);
                let rho = need(last.bob_sent, last.index, "Bob's message")?.symbol;
                push_sub(&mut events, &mut t, rho, rho_in);
            }
            3 | 4 => {
                let p = &seg.bob_insertions;
                let first = rec(p[0]);
                let got = need(
                    first.bob_received.symbol,
                    first.index,
                    "Bob's received symbol",
                )?;
                push_sub(&mut events, &mut t, sigma, got);
                for w in p.windows(2) {
                    let next = rec(w[1]);
                    t += 1;
                    let inj = need(
                        next.bob_received.symbol,
                        next.index,
                        "Bob's received symbol",
                    )?;
                    events.push(IndelEvent::out_of_sync(t, inj));
                }
                let last_insert = rec(*p.last().unwrap());
                let rho_last =
                    need(last_insert.bob_sent, last_insert.index, "Bob's message")?.symbol;
                if seg.seg_type == 3 {
                    push_sub(&mut events, &mut t, rho_last, rho_in);
                } else {
                    t += 1;
                    let inj = need(
                        last.bob_received.symbol,
                        last.index,
                        "Bob's received symbol",
                    )?;
                    events.push(IndelEvent::out_of_sync(t, inj));
                    let rho = need(last.bob_sent, last.index, "Bob's message")?.symbol;
                    push_sub(&mut events, &mut t, rho, rho_in);
                }
            }
            other => return Err(malformed(seg.end, format!("unknown segment type {other}"))),
        }
        scripts.push(SegmentScript {
            segment: si,
            events: events[before..].to_vec(),
            transmissions: t - t0,
        });
    }
    let out = indel_transmit(&pi.pi_prime, x, y, &events, IndelStop::Transmissions(t))
        .map_err(|e| LabError::Replay(e.to_string()))?;
    let expected_alice = trace.final_alice.transcript.clone();
    let tb_len = records.last().map(|r| r.tb_len_after).unwrap_or(0);
    let expected_bob =
        trace.final_bob.transcript[..tb_len.min(trace.final_bob.transcript.len())].to_vec();
    let flips_in =
        |a: u64, b: u64| -> usize { (a..=b.min(dec.j)).map(|i| rec(i).flips_total()).sum() };
    let seg_cost: Vec<usize> = {
        let mut v = vec![0; dec.segments.len()];
        for s in &scripts {
            v[s.segment] = s.events.len();
        }
        v
    };
    let frames = dec
        .frames
        .iter()
        .map(|f| FrameAccount {
            start: f.start,
            end: f.end,
            c: f.segments.iter().map(|s| seg_cost[*s]).sum(),
            f: flips_in(f.start, f.end),
            augmented: f.augmented,
        })
        .collect();
    Ok(IndelExecution {
        c: events.len(),
        f: flips_in(1, dec.j),
        events,
        transmissions: t,
        scripts,
        frames,
        expected_alice,
        expected_bob,
        replay_alice: out.alice.symbols(),
        replay_bob: out.bob.symbols(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma_id: String,
    pub pass: bool,
    pub witness_iterations: Vec<u64>,
}

impl LemmaReport {
    fn new(id: &str, witnesses: Vec<u64>) -> Self {
        LemmaReport {
            lemma_id: id.to_string(),
            pass: witnesses.is_empty(),
            witness_iterations: witnesses,
        }
    }
}

/// Structural checks on a decomposed trace. Each report lists the
/// iterations that violate it.
pub fn check_lemmas(trace: &CRTrace, dec: &Decomposition) -> Vec<LemmaReport> {
    let records = trace.alice_span();
    let k = trace.header.k;
    let rec = |i: u64| &records[(i - 1) as usize];
    let class = |i: u64| dec.classes[(i - 1) as usize];
    let j = dec.j;
    let mut out = Vec::new();

    let growth: Vec<u64> = records
        .iter()
        .filter(|r| {
            let ga = r.ta_len_after as i64 - r.ta_len_before as i64;
            let gb = r.tb_len_after as i64 - r.tb_len_before as i64;
            !(ga == 0 || ga == 2) || !(gb == 0 || gb == 2)
        })
        .map(|r| r.index)
        .collect();
    out.push(LemmaReport::new("growth", growth));

    let no_progress: Vec<u64> = (1..=j).filter(|i| !class(*i).any()).collect();
    let corruptions: usize = records.iter().map(|r| r.corruptions()).sum();
    let bound = corruptions.min(trace.header.t);
    out.push(LemmaReport::new(
        "no_progress_bound",
        if no_progress.len() > bound {
            no_progress.clone()
        } else {
            Vec::new()
        },
    ));

    let f: usize = records.iter().map(|r| r.flips_total()).sum();
    let progress: Vec<u64> = (1..=j).filter(|i| class(*i).any()).collect();
    out.push(LemmaReport::new(
        "progress_bound",
        if progress.len() > trace.header.n_prime + 2 * f {
            progress
        } else {
            Vec::new()
        },
    ));

    let mut prefix_bad = Vec::new();
    let mut structure_bad = Vec::new();
    for s in dec.sequences.iter().filter(|s| !s.augmented) {
        let (mut np, mut corr) = (0usize, 0usize);
        for i in s.start..=s.end {
            corr += rec(i).corruptions();
            if !class(i).any() {
                np += 1;
            }
            if np > corr {
                prefix_bad.push(i);
            }
        }
        let flips: usize = (s.start..=s.end).map(|i| rec(i).flips_total()).sum();
        if s.start == s.end {
            let c = class(s.start);
            let ok = match c {
                ProgressClass::NoProgress => rec(s.start).corruptions() >= 1,
                ProgressClass::SameProgress => true,
                ProgressClass::Substitution => flips > 0,
                ProgressClass::Insertion(_) => false,
            };
            if !ok {
                structure_bad.push(s.start);
            }
            continue;
        }
        let first = rec(s.start);
        match class(s.start) {
            ProgressClass::Insertion(Party::Bob) if first.corruptions() >= 1 => {}
            ProgressClass::Insertion(Party::Alice) if first.r_flips(k) >= 1 => {}
            _ => structure_bad.push(s.start),
        }
        for i in s.start + 1..s.end {
            let ok = match class(i) {
                ProgressClass::NoProgress => rec(i).corruptions() >= 1,
                ProgressClass::SameProgress | ProgressClass::Substitution => {
                    IterationRecord::flips(&rec(i).a_to_b, k - 1, true) == 1
                        && IterationRecord::flips(&rec(i).b_to_a, k - 1, true) == 1
                }
                ProgressClass::Insertion(_) => false,
            };
            if !ok {
                structure_bad.push(i);
            }
        }
        match class(s.end) {
            ProgressClass::Insertion(Party::Alice) => {}
            ProgressClass::Insertion(Party::Bob) if rec(s.end).r_flips(k) >= 1 => {}
            _ => structure_bad.push(s.end),
        }
        if flips == 0 && rec(s.end).alice_added() != rec(s.start).bob_added() {
            structure_bad.push(s.end);
        }
    }
    out.push(LemmaReport::new("sequence_prefix_accounting", prefix_bad));
    out.push(LemmaReport::new("sequence_structure", structure_bad));

    let mut position_bad = Vec::new();
    let mut crossing = Vec::new();
    for fr in &dec.frames {
        let n = fr.segments.len();
        for (pos, si) in fr.segments.iter().enumerate() {
            let seg = &dec.segments[*si];
            if seg.start < fr.start {
                crossing.push(seg.end);
            }
            let ok = match seg.seg_type {
                1 => n == 1 || pos == 0 || pos == n - 1,
                2 => (n == 1 && fr.start == fr.end) || (pos > 0 && pos < n - 1),
                _ => true,
            };
            if !ok {
                position_bad.push(seg.end);
            }
        }
    }
    out.push(LemmaReport::new("segment_positions", position_bad));
    out.push(LemmaReport::new("segments_within_frames", crossing));

    let outside: Vec<u64> = progress_outside_frames(dec);
    out.push(LemmaReport::new("progress_in_frames", outside));
    out
}

fn progress_outside_frames(dec: &Decomposition) -> Vec<u64> {
    (1..=dec.j)
        .filter(|i| dec.classes[(*i - 1) as usize].any())
        .filter(|i| !dec.frames.iter().any(|f| f.start <= *i && *i <= f.end))
        .collect()
}

/// Checks on a matching execution: bit-identical replay, `c <= 2f` overall
/// and per frame.
pub fn check_reduction(exec: &IndelExecution) -> Vec<LemmaReport> {
    let mut out = vec![LemmaReport::new(
        "replay_matches",
        if exec.replay_matches() {
            Vec::new()
        } else {
            vec![0]
        },
    )];
    out.push(LemmaReport::new(
        "reduction_bound",
        if exec.c <= 2 * exec.f {
            Vec::new()
        } else {
            vec![0]
        },
    ));
    let frames: Vec<u64> = exec
        .frames
        .iter()
        .filter(|f| f.c > 2 * f.f)
        .map(|f| f.end)
        .collect();
    out.push(LemmaReport::new("frame_reduction_bound", frames));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{NoisePattern, NoiselessChannel, UpefSchedule};
    use crate::proto_core::{make_random_protocol, toy_indel_robust};
    use crate::scheme_cr::{run_cr, run_cr_with, CrOptions};

    fn robust() -> IndelRobustProtocol {
        toy_indel_robust(&make_random_protocol(5, 16, 4).unwrap(), 1).unwrap()
    }

    #[test]
    fn noiseless_trace_is_all_same_progress() {
        let pi = robust();
        let tr = run_cr_with(
            &pi,
            b"x",
            b"y",
            &mut NoiselessChannel::default(),
            &CrOptions::default(),
        );
        let dec = decompose(&tr).unwrap();
        assert!(dec
            .classes
            .iter()
            .all(|c| *c == ProgressClass::SameProgress));
        assert_eq!(dec.sequences.len(), 8);
        assert_eq!(dec.frames.len(), 8);
        assert!(dec.segments.iter().all(|s| s.seg_type == 2));
        let exec = build_matching_execution(&tr, &pi, b"x", b"y").unwrap();
        assert_eq!(exec.c, 0);
        assert!(exec.replay_matches());
        assert!(check_lemmas(&tr, &dec).iter().all(|r| r.pass));
    }

    #[test]
    fn erasures_only_give_zero_edits() {
        let pi = robust();
        let e = NoisePattern::new([1, 6, 9, 14, 20]).unwrap();
        let tr = run_cr(&pi, b"x", b"y", &e, UpefSchedule::<f64>::with_c(0.0, 16), 3);
        let dec = decompose(&tr).unwrap();
        let exec = build_matching_execution(&tr, &pi, b"x", b"y").unwrap();
        assert!(exec.replay_matches());
        assert_eq!(exec.c, 0);
        for r in check_lemmas(&tr, &dec)
            .iter()
            .chain(&check_reduction(&exec))
        {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn malformed_record_is_rejected() {
        let pi = robust();
        let mut tr = run_cr_with(
            &pi,
            b"x",
            b"y",
            &mut NoiselessChannel::default(),
            &CrOptions::default(),
        );
        tr.iterations[2].ta_len_after += 1;
        assert!(matches!(
            decompose(&tr),
            Err(LabError::Malformed { index: 3, .. })
        ));
    }

    #[test]
    fn random_noise_reduces_to_matching_execution() {
        let pi = robust();
        let mut worst = 0usize;
        for seed in 0..300u64 {
            let t = 1 + (seed % 12) as usize;
            let rounds: Vec<u64> = (0..t as u64)
                .map(|i| 1 + crate::util::mix64(seed * 31 + i) % 120)
                .collect();
            let Ok(e) = NoisePattern::new(rounds) else {
                continue;
            };
            let tr = run_cr(
                &pi,
                b"x",
                b"y",
                &e,
                UpefSchedule::<f64>::with_c(0.5, 16),
                seed,
            );
            let dec = decompose(&tr).unwrap();
            let exec = build_matching_execution(&tr, &pi, b"x", b"y").unwrap();
            for r in check_lemmas(&tr, &dec)
                .iter()
                .chain(&check_reduction(&exec))
            {
                assert!(r.pass, "seed {seed}: {r:?}");
            }
            worst = worst.max(exec.c);
        }
        assert!(worst > 0);
    }
}

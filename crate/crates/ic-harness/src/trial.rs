use ic_core::amd_uf::{compile_uf, BlockAttack};
use ic_core::channels::{MupefParams, NoisePattern, UpefChannel, UpefSchedule};
use ic_core::proto_core::ProtocolSpec;
use ic_core::scheme_cr::{run_cr_with, CRTrace, CrOptions};
use ic_core::scheme_iter::{run_iter, run_iter_uf, IterResult};
use ic_core::trace_lab::{build_matching_execution, check_lemmas, check_reduction, decompose};
use ic_core::util::{hash_words, trial_seed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{generate, lift_rand5, RoundSpace};
use crate::config::{ExperimentConfig, SchemeKind};

/// One row of the per-trial output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u64,
    pub seed: u64,
    pub scheme: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub comm_bits: u64,
    pub wire_bits: u64,
    pub success: bool,
    pub alice_ok: bool,
    pub bob_ok: bool,
    /// Alice's last iteration.
    pub alice_term: Option<u64>,
    /// Bob's last iteration.
    pub bob_term: Option<u64>,
    pub premature_bob: bool,
    /// Flips and erasures, for challenge-response traces.
    pub f: Option<usize>,
    pub d: Option<usize>,
    /// Edit corruptions of the matching execution.
    pub c: Option<usize>,
    /// Failed trace checks by name.
    pub lemma_failures: Vec<String>,
    pub aborted: Option<String>,
    /// Panic message of a crashed trial.
    pub error: Option<String>,
}

impl TrialResult {
    pub fn failed_checks(&self) -> bool {
        !self.lemma_failures.is_empty()
    }

    fn crashed(trial: u64, seed: u64, cfg: &ExperimentConfig, t: usize, msg: String) -> Self {
        TrialResult {
            trial,
            seed,
            scheme: cfg.scheme.name().into(),
            n: cfg.n,
            t,
            comm_bits: 0,
            wire_bits: 0,
            success: false,
            alice_ok: false,
            bob_ok: false,
            alice_term: None,
            bob_term: None,
            premature_bob: false,
            f: None,
            d: None,
            c: None,
            lemma_failures: Vec::new(),
            aborted: None,
            error: Some(msg),
        }
    }
}

/// Everything a trial draws from its seed.
pub struct TrialSetup {
    pub spec: ProtocolSpec,
    pub x: Vec<u8>,
    pub y: Vec<u8>,
    pub rng: ChaCha8Rng,
}

pub fn setup(cfg: &ExperimentConfig, seed: u64) -> TrialSetup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = ProtocolSpec {
        seed: hash_words(seed, [1]),
        n: cfg.n,
        alphabet: cfg.alphabet(),
        repetition: cfg.repetition,
    };
    let x: Vec<u8> = (0..8).map(|_| rng.gen()).collect();
    let y: Vec<u8> = (0..8).map(|_| rng.gen()).collect();
    TrialSetup { spec, x, y, rng }
}

pub fn schedule(cfg: &ExperimentConfig, n_prime: usize) -> UpefSchedule<f64> {
    match cfg.schedule_c {
        Some(c) => UpefSchedule::with_c(c, n_prime as u64),
        None => UpefSchedule::new(n_prime as u64),
    }
}

/// Runs the trace checks and the reduction on a challenge-response trace.
pub fn trace_checks(
    trace: &CRTrace,
    spec: &ProtocolSpec,
    x: &[u8],
    y: &[u8],
) -> (Option<usize>, Vec<String>) {
    let pi = match spec.indel_robust() {
        Ok(p) => p,
        Err(e) => return (None, vec![format!("protocol: {e}")]),
    };
    let mut failures = Vec::new();
    let dec = match decompose(trace) {
        Ok(d) => d,
        Err(e) => return (None, vec![format!("decompose: {e}")]),
    };
    failures.extend(
        check_lemmas(trace, &dec)
            .into_iter()
            .filter(|r| !r.pass)
            .map(|r| r.lemma_id),
    );
    let c = match build_matching_execution(trace, &pi, x, y) {
        Ok(exec) => {
            failures.extend(
                check_reduction(&exec)
                    .into_iter()
                    .filter(|r| !r.pass)
                    .map(|r| r.lemma_id),
            );
            Some(exec.c)
        }
        Err(e) => {
            failures.push(format!("matching_execution: {e}"));
            None
        }
    };
    (c, failures)
}

/// The challenge-response trace of a trial, for `cr` and `uf_compiled`.
pub fn cr_trace(cfg: &ExperimentConfig, t: usize, seed: u64) -> (CRTrace, TrialSetup) {
    let mut s = setup(cfg, seed);
    let pi = s.spec.indel_robust().expect("validated config");
    let n_prime = pi.n_prime();
    let space = RoundSpace::Cr {
        k: pi.symbol_bits() + 1,
        n_prime,
    };
    let e = generate(&cfg.adversary, space, t, &mut s.rng);
    let opts = CrOptions {
        t,
        protocol: Some(s.spec.clone()),
        ..CrOptions::default()
    };
    let sched = schedule(cfg, n_prime);
    let chan_rng = ChaCha8Rng::seed_from_u64(s.rng.gen());
    let trace = match cfg.scheme {
        SchemeKind::Cr => run_cr_with(
            &pi,
            &s.x,
            &s.y,
            &mut UpefChannel::new(&e, sched, chan_rng),
            &opts,
        ),
        SchemeKind::UfCompiled => {
            let ceiling = 10 * (n_prime as u64 + t as u64);
            let horizon = cfg.horizon.unwrap_or(2 * space_k(&space) * ceiling);
            let mut comp = compile_uf(sched, horizon);
            comp.relaxed_termination = cfg.relaxed_termination;
            let e_uf = comp.lift_pattern(&e, BlockAttack::WholeBlock, &mut s.rng);
            run_cr_with(&pi, &s.x, &s.y, &mut comp.channel(&e_uf, chan_rng), &opts)
        }
        _ => unreachable!("not a challenge-response scheme"),
    };
    (trace, s)
}

fn space_k(space: &RoundSpace) -> u64 {
    match space {
        RoundSpace::Cr { k, .. } => *k as u64,
        RoundSpace::Iter { .. } => 1,
    }
}

/// The iterative-scheme result of a trial, for `iter` and `iter_uf`.
pub fn iter_result(cfg: &ExperimentConfig, t: usize, seed: u64) -> IterResult {
    let mut s = setup(cfg, seed);
    let pi = s.spec.subst_resilient().expect("validated config");
    let space = RoundSpace::Iter {
        base_len: pi.len() as u64,
    };
    let e = generate(&cfg.adversary, space, t, &mut s.rng);
    let chan_rng = ChaCha8Rng::seed_from_u64(s.rng.gen());
    match cfg.scheme {
        SchemeKind::Iter => run_iter(&pi, &s.x, &s.y, &e, MupefParams::<f64>::default(), chan_rng),
        SchemeKind::IterUf => {
            let e_uf: NoisePattern = lift_rand5(&e, &mut s.rng);
            let mut r = run_iter_uf::<f64, _>(&pi, &s.x, &s.y, &e_uf, chan_rng);
            r.t = t;
            r
        }
        _ => unreachable!("not an iterative scheme"),
    }
}

pub fn run_trial(cfg: &ExperimentConfig, t: usize, trial: u64) -> TrialResult {
    let seed = trial_seed(cfg.master_seed, trial);
    let scheme = cfg.scheme.name().to_string();
    if cfg.scheme.is_cr() {
        let (trace, s) = cr_trace(cfg, t, seed);
        let (c, lemma_failures) = if cfg.check_lemmas && trace.outcome.aborted.is_none() {
            trace_checks(&trace, &s.spec, &s.x, &s.y)
        } else {
            (None, Vec::new())
        };
        let o = &trace.outcome;
        TrialResult {
            trial,
            seed,
            scheme,
            n: cfg.n,
            t,
            comm_bits: o.comm_bits,
            wire_bits: o.wire_bits,
            success: o.success(),
            alice_ok: o.alice_ok,
            bob_ok: o.bob_ok,
            alice_term: Some(o.alice_iterations),
            bob_term: Some(o.iterations),
            premature_bob: o.bob_terminated_first,
            f: Some(o.f),
            d: Some(o.d),
            c,
            lemma_failures,
            aborted: o.aborted.clone(),
            error: None,
        }
    } else {
        let r = iter_result(cfg, t, seed);
        TrialResult {
            trial,
            seed,
            scheme,
            n: cfg.n,
            t,
            comm_bits: r.comm_bits,
            wire_bits: r.wire_bits,
            success: r.success(),
            alice_ok: r.alice_ok,
            bob_ok: r.bob_ok,
            alice_term: r.terminated_i_a.map(u64::from),
            bob_term: r.terminated_i_b.map(u64::from),
            premature_bob: r.premature_bob(),
            f: None,
            d: None,
            c: None,
            lemma_failures: Vec::new(),
            aborted: r.aborted.clone(),
            error: None,
        }
    }
}

/// [`run_trial`] with panics recorded as failed trials.
pub fn run_trial_isolated(cfg: &ExperimentConfig, t: usize, trial: u64) -> TrialResult {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run_trial(cfg, t, trial))) {
        Ok(r) => r,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".to_string());
            TrialResult::crashed(trial, trial_seed(cfg.master_seed, trial), cfg, t, msg)
        }
    }
}

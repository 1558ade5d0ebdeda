use std::process::ExitCode;
use std::time::Instant;

use ic_core::amd_uf::{amd_decode, amd_encode_with, AmdCodeword, GF2kField};
use ic_core::channels::{schedule_tail_sum, NoiselessChannel, UpefChannel, UpefSchedule};
use ic_core::proto_core::{make_random_protocol, run_noiseless, toy_indel_robust, Party};
use ic_core::scheme_cr::{run_cr_with, CRTrace, CrOptions};
use ic_core::scheme_iter::{rand5_decode, Rand5Code};
use ic_core::trace_lab::{build_matching_execution, check_lemmas, check_reduction, decompose};
use ic_core::util::trial_seed;
use ic_core::{BigRational, Scalar};
use ic_harness::adversary::{generate, AdversarySpec, ChoicePolicy, Generator, RoundSpace};
use ic_harness::runner::{comm_fit, run_experiment};
use ic_harness::trial::{cr_trace, setup};
use ic_harness::{iter_base_len, iter_comm_bound, ExperimentConfig, SchemeKind, TrialResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rat(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

fn cr_config(generator: Generator, choice: ChoicePolicy) -> ExperimentConfig {
    ExperimentConfig {
        scheme: SchemeKind::Cr,
        n: 16,
        t_values: vec![0],
        adversary: AdversarySpec::new(generator, choice),
        trials: 1,
        master_seed: 0xacce,
        horizon: None,
        out: None,
        repetition: 4,
        alphabet: None,
        schedule_c: None,
        check_lemmas: true,
        relaxed_termination: false,
        threads: None,
    }
}

fn mixed_generators() -> [Generator; 4] {
    [
        Generator::Uniform { window: None },
        Generator::PrefixBurst { start: 1 },
        Generator::PerIterationBudget { budget: 2 },
        Generator::ParityTargeting { window: None },
    ]
}

fn rand5_exhaustive() -> Verdict {
    let mut worst = 3;
    for bit in 0..2u8 {
        let set = Rand5Code::set(bit);
        for delta in 1u8..32 {
            let erased = set
                .iter()
                .filter(|cw| rand5_decode(*cw ^ delta).is_none())
                .count();
            worst = worst.min(erased);
        }
    }
    verdict(
        3 * worst >= 3,
        format!("min erased codewords over all offsets {worst}/3"),
    )
}

fn amd_k4_exhaustive() -> Verdict {
    let f = GF2kField::new(4).unwrap();
    let mut worst = 0;
    for s in 0..16u64 {
        for delta in 1..(1u64 << 12) {
            let d = AmdCodeword {
                s: delta >> 8,
                x: delta >> 4 & 15,
                tag: delta & 15,
            };
            let misses = (0..16u64)
                .filter(|x| {
                    let w = amd_encode_with(&f, s, *x).unwrap().xor(d);
                    matches!(amd_decode(&f, &w), Some(m) if m != s)
                })
                .count();
            worst = worst.max(misses);
        }
    }
    verdict(
        worst <= 2,
        format!("worst miss rate {worst}/16, bound 2/16"),
    )
}

fn zero_noise_cr() -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for (n, r, expect) in [(16, 1, 16), (16, 4, 64), (64, 4, 256)] {
        let p = make_random_protocol(n as u64, n, 4).unwrap();
        let pi = toy_indel_robust(&p, r).unwrap();
        let k = pi.symbol_bits() as u64 + 1;
        let tr = run_cr_with(
            &pi,
            b"alice",
            b"bob",
            &mut NoiselessChannel::default(),
            &CrOptions::default(),
        );
        let (ta, tb) = run_noiseless(&pi.pi_prime, b"alice", b"bob");
        let o = &tr.outcome;
        let ok = pi.n_prime() == expect
            && o.alice_iterations == expect as u64 / 2
            && o.iterations == expect as u64 / 2
            && o.comm_bits == k * expect as u64
            && o.alice_output == pi.output(Party::Alice, &ta.symbols())
            && o.bob_output == pi.output(Party::Bob, &tb.symbols())
            && o.success();
        pass &= ok;
        lines.push(format!(
            "N'={} iterations {} comm {}",
            pi.n_prime(),
            o.iterations,
            o.comm_bits
        ));
    }
    verdict(pass, lines.join(", "))
}

struct FuzzRun {
    trace: CRTrace,
    growth: bool,
    no_progress: bool,
    progress: bool,
    replay: bool,
    reduction: bool,
    c: Option<usize>,
}

fn fuzz_runs() -> Vec<FuzzRun> {
    let gens = mixed_generators();
    (0..1000u64)
        .into_par_iter()
        .map(|j| {
            let mut pick = ChaCha8Rng::seed_from_u64(trial_seed(4, j));
            let t = pick.gen_range(0..=200usize);
            let cfg = cr_config(gens[(j % 4) as usize].clone(), ChoicePolicy::Flip);
            let (trace, s) = cr_trace(&cfg, t, trial_seed(cfg.master_seed, j));
            let pi = s.spec.indel_robust().unwrap();
            let dec = decompose(&trace).unwrap();
            let lemmas = check_lemmas(&trace, &dec);
            let ok = |id: &str| lemmas.iter().filter(|l| l.lemma_id == id).all(|l| l.pass);
            let (replay, reduction, c) = match build_matching_execution(&trace, &pi, &s.x, &s.y) {
                Ok(exec) => {
                    let red = check_reduction(&exec);
                    let ok = |id: &str| red.iter().filter(|l| l.lemma_id == id).all(|l| l.pass);
                    (
                        exec.replay_matches() && ok("replay_matches"),
                        exec.c <= 2 * trace.outcome.f && ok("reduction_bound"),
                        Some(exec.c),
                    )
                }
                Err(_) => (false, false, None),
            };
            FuzzRun {
                growth: ok("growth"),
                no_progress: ok("no_progress_bound"),
                progress: ok("progress_bound"),
                trace,
                replay,
                reduction,
                c,
            }
        })
        .collect()
}

fn lemma_suite(runs: &[FuzzRun]) -> Verdict {
    let g = runs.iter().filter(|r| !r.growth).count();
    let np = runs.iter().filter(|r| !r.no_progress).count();
    let p = runs.iter().filter(|r| !r.progress).count();
    let t_max = runs.iter().map(|r| r.trace.header.t).max().unwrap_or(0);
    verdict(
        g + np + p == 0 && runs.len() == 1000,
        format!(
            "{} traces (T up to {t_max}), violations: growth {g}, no-progress {np}, progress {p}",
            runs.len()
        ),
    )
}

fn reduction_soundness(runs: &[FuzzRun]) -> Verdict {
    let replay = runs.iter().filter(|r| !r.replay).count();
    let bound = runs.iter().filter(|r| !r.reduction).count();
    let c_max = runs.iter().filter_map(|r| r.c).max().unwrap_or(0);
    let f_total: usize = runs.iter().map(|r| r.trace.outcome.f).sum();
    verdict(
        replay + bound == 0,
        format!("replay mismatches {replay}, c > 2f {bound}, max c {c_max}, total flips {f_total}"),
    )
}

fn erasure_only() -> Verdict {
    let gens = mixed_generators();
    let results: Vec<(bool, usize, usize)> = (0..500u64)
        .into_par_iter()
        .map(|j| {
            let cfg = cr_config(gens[(j % 4) as usize].clone(), ChoicePolicy::Erase);
            let mut s = setup(&cfg, trial_seed(6, j));
            let t = s.rng.gen_range(0..=200usize);
            let pi = s.spec.indel_robust().unwrap();
            let space = RoundSpace::Cr {
                k: pi.symbol_bits() + 1,
                n_prime: pi.n_prime(),
            };
            let e = generate(&cfg.adversary, space, t, &mut s.rng);
            let mut ch = UpefChannel::new(
                &e,
                UpefSchedule::with_c(0.0, pi.n_prime() as u64),
                ChaCha8Rng::seed_from_u64(j),
            );
            let opts = CrOptions {
                t,
                ..CrOptions::default()
            };
            let tr = run_cr_with(&pi, &s.x, &s.y, &mut ch, &opts);
            (tr.outcome.success(), tr.outcome.f, tr.outcome.d)
        })
        .collect();
    let failed = results.iter().filter(|r| !r.0).count();
    let flips: usize = results.iter().map(|r| r.1).sum();
    let erasures: usize = results.iter().map(|r| r.2).sum();
    verdict(
        failed == 0 && flips == 0,
        format!(
            "{} runs, {failed} incorrect, {flips} flips, {erasures} erasures",
            results.len()
        ),
    )
}

fn iter_sweep() -> (Verdict, Vec<TrialResult>) {
    let cfg = ExperimentConfig {
        scheme: SchemeKind::Iter,
        n: 64,
        t_values: vec![0, 64, 256, 1024, 4096],
        trials: 300,
        master_seed: 7,
        repetition: 3,
        alphabet: None,
        ..cr_config(Generator::Uniform { window: None }, ChoicePolicy::Flip)
    };
    let out = run_experiment(&cfg).unwrap();
    let l0 = iter_base_len(&cfg).unwrap();
    let (a, b) = comm_fit(&out.results).unwrap();
    let over = out
        .results
        .iter()
        .filter(|r| r.comm_bits as f64 > iter_comm_bound(l0, 18000.0, r.t))
        .count();
    let max = out.results.iter().map(|r| r.comm_bits).max().unwrap_or(0);
    (
        verdict(
            b <= 18000.0 && over == 0,
            format!(
                "fit comm = {a:.0} + {b:.2} T, max comm {max}, runs above 8*{l0} + 18000 T: {over}"
            ),
        ),
        out.results,
    )
}

fn termination_ordering(fuzz: &[FuzzRun], sweep: &[TrialResult]) -> Verdict {
    let cfg = ExperimentConfig {
        scheme: SchemeKind::Iter,
        n: 64,
        t_values: vec![0, 64, 256, 1024],
        trials: 2500,
        master_seed: 8,
        repetition: 3,
        alphabet: None,
        ..cr_config(Generator::Uniform { window: None }, ChoicePolicy::Mixed)
    };
    let dedicated = run_experiment(&cfg).unwrap().results;
    let from_fuzz: Vec<&FuzzRun> = fuzz
        .iter()
        .filter(|r| r.trace.outcome.bob_terminated_first)
        .collect();
    let from_sweep = sweep.iter().filter(|r| r.premature_bob).count();
    let from_dedicated: Vec<&TrialResult> = dedicated.iter().filter(|r| r.premature_bob).collect();
    for r in &from_fuzz {
        eprintln!("premature termination trace:\n{}", r.trace.to_jsonl());
    }
    for r in &from_dedicated {
        eprintln!(
            "premature termination: {}",
            serde_json::to_string(r).unwrap()
        );
    }
    let total = from_fuzz.len() + from_sweep + from_dedicated.len();
    verdict(
        total == 0 && dedicated.len() == 10_000,
        format!(
            "Bob first: {} of {} cr, {from_sweep} of {} sweep, {} of {} dedicated",
            from_fuzz.len(),
            fuzz.len(),
            sweep.len(),
            from_dedicated.len(),
            dedicated.len()
        ),
    )
}

fn uf_consistency() -> Verdict {
    let trials = 2000u64;
    let cfg = ExperimentConfig {
        t_values: vec![100],
        master_seed: 9,
        ..cr_config(Generator::Uniform { window: None }, ChoicePolicy::Flip)
    };
    let uf = ExperimentConfig {
        scheme: SchemeKind::UfCompiled,
        ..cfg.clone()
    };
    let pairs: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|j| {
            let seed = trial_seed(cfg.master_seed, j);
            let bare = cr_trace(&cfg, 100, seed).0.outcome.success();
            let compiled = cr_trace(&uf, 100, seed).0.outcome.success();
            (bare, compiled)
        })
        .collect();
    let n = trials as f64;
    let p1 = pairs.iter().filter(|p| p.0).count() as f64 / n;
    let p2 = pairs.iter().filter(|p| p.1).count() as f64 / n;
    let sigma = ((p1 * (1.0 - p1) + p2 * (1.0 - p2)) / n).sqrt();
    let diff = (p1 - p2).abs();
    verdict(
        diff <= 3.0 * sigma,
        format!(
            "bare {p1:.4}, compiled {p2:.4}, |diff| {diff:.4}, 3 sigma {:.4}",
            3.0 * sigma
        ),
    )
}

fn schedule_sum() -> Verdict {
    let mut pass = true;
    let mut lines = Vec::new();
    let horizon = 1024u64;
    for n in [64i64, 256, 1024] {
        let cn = rat(n, 297);
        let half = rat(1, 2);
        let mut oracle = cn.clone() / BigRational::from_integer(horizon.into());
        for i in 1..=horizon {
            let p = cn.clone() / BigRational::from_integer((i * i).into());
            oracle += if p < half { p } else { half.clone() };
        }
        let lib = schedule_tail_sum(&UpefSchedule::<BigRational>::new(n as u64), horizon);
        let ok = oracle == lib && oracle < rat(n, 99);
        pass &= ok;
        lines.push(format!(
            "N={n}: {:.4} < {:.4}",
            oracle.to_f64(),
            n as f64 / 99.0
        ));
    }
    verdict(pass, lines.join(", "))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |name: &str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        println!(
            "{name}: {} ({}) [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed += 1;
        }
    };
    report("criterion 1 rand5 exhaustive", &mut rand5_exhaustive);
    report("criterion 2 AMD k=4 exhaustive", &mut amd_k4_exhaustive);
    report(
        "criterion 3 zero-noise challenge-response",
        &mut zero_noise_cr,
    );
    let fuzz = fuzz_runs();
    report("criterion 4 trace lemmas on fuzzed runs", &mut || {
        lemma_suite(&fuzz)
    });
    report("criterion 5 reduction soundness", &mut || {
        reduction_soundness(&fuzz)
    });
    report("criterion 6 erasure-only correctness", &mut erasure_only);
    let mut sweep = Vec::new();
    report("criterion 7 iterative communication", &mut || {
        let (v, r) = iter_sweep();
        sweep = r;
        v
    });
    report("criterion 8 termination ordering", &mut || {
        termination_ordering(&fuzz, &sweep)
    });
    report("criterion 9 UF compiler consistency", &mut uf_consistency);
    report("criterion 10 schedule sum", &mut schedule_sum);
    if failed == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria fail");
        ExitCode::FAILURE
    }
}

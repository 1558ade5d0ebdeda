use std::collections::BTreeMap;

use ic_core::channels::{MupefChoice, NoisePattern};
use ic_core::scheme_iter::IterationParams;
use ic_core::Rational64;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SchemeKind;

/// Named oblivious pattern generators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// `T` distinct rounds uniformly from `1..=window`.
    Uniform {
        #[serde(default)]
        window: Option<u64>,
    },
    /// Rounds `start..start+T`.
    PrefixBurst {
        #[serde(default = "one")]
        start: u64,
    },
    /// Up to `budget` random rounds in each iteration, earliest first.
    PerIterationBudget { budget: usize },
    /// Just enough erasures in part 1 of each iteration of the iterative
    /// scheme to block Alice's termination, earliest first.
    ThresholdBlocking,
    /// `T` parity bits of challenge-response messages, uniformly from
    /// `1..=window`.
    ParityTargeting {
        #[serde(default)]
        window: Option<u64>,
    },
}

fn one() -> u64 {
    1
}

impl Default for Generator {
    fn default() -> Self {
        Generator::Uniform { window: None }
    }
}

/// Fate of corrupted mUPEF rounds when the adversary is given the choice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoicePolicy {
    #[default]
    Flip,
    Erase,
    Pass,
    /// Uniform over the three, per round.
    Mixed,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    #[serde(default)]
    pub generator: Generator,
    #[serde(default)]
    pub choice: ChoicePolicy,
}

impl AdversarySpec {
    pub fn new(generator: Generator, choice: ChoicePolicy) -> Self {
        AdversarySpec { generator, choice }
    }

    pub fn validate(&self, scheme: SchemeKind) -> Result<(), String> {
        match &self.generator {
            Generator::Uniform { window: Some(0) }
            | Generator::ParityTargeting { window: Some(0) } => {
                Err("window must be positive".into())
            }
            Generator::PrefixBurst { start: 0 } => {
                Err("rounds are 1-based, start must be positive".into())
            }
            Generator::PerIterationBudget { budget: 0 } => Err("budget must be positive".into()),
            Generator::ThresholdBlocking if scheme.is_cr() => {
                Err("threshold_blocking applies to the iterative schemes".into())
            }
            Generator::ParityTargeting { .. } if !scheme.is_cr() => {
                Err("parity_targeting applies to the challenge-response schemes".into())
            }
            _ => Ok(()),
        }
    }
}

/// Round geometry of a scheme, for pattern generation.
#[derive(Clone, Copy, Debug)]
pub enum RoundSpace {
    /// Message length in bits and `N'`.
    Cr { k: u32, n_prime: usize },
    /// `L_0`.
    Iter { base_len: u64 },
}

impl RoundSpace {
    /// 1-based rounds of 0-based iteration `idx`.
    pub fn iteration(&self, idx: u32) -> (u64, u64) {
        match *self {
            RoundSpace::Cr { k, .. } => {
                let w = 2 * k as u64;
                (idx as u64 * w + 1, (idx as u64 + 1) * w)
            }
            RoundSpace::Iter { base_len } => {
                let p = IterationParams::<Rational64>::new(base_len);
                (p.offset(idx) + 1, p.offset(idx + 1))
            }
        }
    }

    /// The rounds a budget of `T` can reach: for challenge-response, a run
    /// stretched by `T` iterations; for the iterative scheme, every iteration
    /// up to the first whose erasure threshold exceeds `T`.
    pub fn default_window(&self, t: usize) -> u64 {
        match *self {
            RoundSpace::Cr { k, n_prime } => 2 * k as u64 * (n_prime as u64 / 2 + t as u64),
            RoundSpace::Iter { base_len } => {
                let p = IterationParams::<Rational64>::new(base_len);
                let target = Rational64::from_integer(t as i64);
                let m = (0..63)
                    .find(|i| p.erasure_threshold(*i) > target)
                    .unwrap_or(62);
                p.offset(m + 1)
            }
        }
    }
}

fn sample_range<R: Rng + ?Sized>(rng: &mut R, lo: u64, hi: u64, count: usize) -> Vec<u64> {
    let len = hi - lo + 1;
    let count = count.min(len as usize);
    if len <= usize::MAX as u64 && len < (1 << 32) {
        sample(rng, len as usize, count)
            .into_iter()
            .map(|i| lo + i as u64)
            .collect()
    } else {
        let mut set = std::collections::BTreeSet::new();
        while set.len() < count {
            set.insert(rng.gen_range(lo..=hi));
        }
        set.into_iter().collect()
    }
}

/// Corrupted rounds for budget `t`.
pub fn generate_rounds<R: Rng + ?Sized>(
    g: &Generator,
    space: RoundSpace,
    t: usize,
    rng: &mut R,
) -> Vec<u64> {
    if t == 0 {
        return Vec::new();
    }
    let mut rounds = match g {
        Generator::Uniform { window } => {
            let w = window
                .unwrap_or_else(|| space.default_window(t))
                .max(t as u64);
            sample_range(rng, 1, w, t)
        }
        Generator::PrefixBurst { start } => (*start..*start + t as u64).collect(),
        Generator::PerIterationBudget { budget } => {
            let mut out = Vec::with_capacity(t);
            let mut idx = 0;
            while out.len() < t {
                let (lo, hi) = space.iteration(idx);
                let take = (*budget).min(t - out.len());
                out.extend(sample_range(rng, lo, hi, take));
                idx += 1;
            }
            out
        }
        Generator::ThresholdBlocking => {
            let base_len = match space {
                RoundSpace::Iter { base_len } => base_len,
                RoundSpace::Cr { .. } => unreachable!("rejected by validation"),
            };
            let p = IterationParams::<Rational64>::new(base_len);
            let mut out = Vec::with_capacity(t);
            let mut idx = 0;
            while out.len() < t {
                let need = p.erasure_threshold(idx).ceil().to_integer().max(1) as usize;
                let lo = p.offset(idx) + 1;
                let take = need.min(t - out.len());
                out.extend(lo..lo + take as u64);
                idx += 1;
            }
            out
        }
        Generator::ParityTargeting { window } => {
            let k = match space {
                RoundSpace::Cr { k, .. } => k as u64,
                RoundSpace::Iter { .. } => unreachable!("rejected by validation"),
            };
            let w = window.unwrap_or_else(|| space.default_window(t));
            let slots = (w / k).max(t as u64);
            sample_range(rng, 0, slots - 1, t)
                .into_iter()
                .map(|m| m * k + k)
                .collect()
        }
    };
    rounds.sort_unstable();
    rounds
}

/// A pattern with per-round choices drawn from `policy`.
pub fn make_pattern<R: Rng + ?Sized>(
    rounds: Vec<u64>,
    policy: ChoicePolicy,
    rng: &mut R,
) -> NoisePattern {
    let choices: BTreeMap<u64, MupefChoice> = rounds
        .iter()
        .filter_map(|r| {
            let c = match policy {
                ChoicePolicy::Flip => return None,
                ChoicePolicy::Erase => MupefChoice::Erase,
                ChoicePolicy::Pass => MupefChoice::Pass,
                ChoicePolicy::Mixed => {
                    [MupefChoice::Flip, MupefChoice::Erase, MupefChoice::Pass][rng.gen_range(0..3)]
                }
            };
            Some((*r, c))
        })
        .collect();
    NoisePattern::new(rounds)
        .and_then(|p| p.with_choices(choices))
        .expect("generated rounds are distinct")
}

pub fn generate<R: Rng + ?Sized>(
    spec: &AdversarySpec,
    space: RoundSpace,
    t: usize,
    rng: &mut R,
) -> NoisePattern {
    let rounds = generate_rounds(&spec.generator, space, t, rng);
    make_pattern(rounds, spec.choice, rng)
}

/// A UF pattern on the five-bit lift: every corrupted scheme round gets a
/// uniformly chosen nonzero offset on its block.
pub fn lift_rand5<R: Rng + ?Sized>(e: &NoisePattern, rng: &mut R) -> NoisePattern {
    let mut bits = Vec::new();
    for g in e.rounds() {
        let delta: u8 = rng.gen_range(1..32);
        for pos in 0..5u64 {
            if delta >> (4 - pos) & 1 == 1 {
                bits.push(5 * (g - 1) + pos + 1);
            }
        }
    }
    NoisePattern::new(bits).expect("blocks are disjoint")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn generators_produce_t_distinct_rounds() {
        let cr = RoundSpace::Cr { k: 4, n_prime: 64 };
        let it = RoundSpace::Iter { base_len: 256 };
        let gens = [
            (Generator::Uniform { window: None }, cr),
            (Generator::PrefixBurst { start: 5 }, cr),
            (Generator::PerIterationBudget { budget: 3 }, cr),
            (Generator::ParityTargeting { window: None }, cr),
            (Generator::Uniform { window: Some(10) }, it),
            (Generator::ThresholdBlocking, it),
        ];
        for (g, space) in gens {
            for t in [0, 1, 17, 200] {
                let r = generate_rounds(&g, space, t, &mut rng());
                assert_eq!(r.len(), t, "{g:?}");
                assert!(r.windows(2).all(|w| w[0] < w[1]));
                assert!(r.iter().all(|x| *x >= 1));
            }
        }
    }

    #[test]
    fn iter_window_covers_blockable_iterations() {
        let space = RoundSpace::Iter { base_len: 256 };
        // threshold first exceeds 1 at L_4 = 4096
        assert_eq!(space.default_window(1), space.iteration(4).1);
        assert!(space.default_window(1000) > space.default_window(64));
    }

    #[test]
    fn parity_targeting_hits_parity_bits() {
        let r = generate_rounds(
            &Generator::ParityTargeting { window: None },
            RoundSpace::Cr { k: 4, n_prime: 64 },
            50,
            &mut rng(),
        );
        assert!(r.iter().all(|g| g % 4 == 0));
    }

    #[test]
    fn threshold_blocking_fills_part_one() {
        let space = RoundSpace::Iter { base_len: 256 };
        let r = generate_rounds(&Generator::ThresholdBlocking, space, 6, &mut rng());
        // one round per iteration while L_i < 3000, then two at L_4 = 4096
        assert_eq!(r, vec![1, 513, 1537, 3585, 7681, 7682]);
    }

    #[test]
    fn rand5_lift_stays_in_block() {
        let e = NoisePattern::new([1, 4]).unwrap();
        let uf = lift_rand5(&e, &mut rng());
        assert!(uf
            .rounds()
            .all(|u| (1..=5).contains(&u) || (16..=20).contains(&u)));
        assert!(uf.count_in_range(1, 5) > 0 && uf.count_in_range(16, 20) > 0);
    }

    #[test]
    fn validation_rejects_mismatched_generator() {
        let spec = AdversarySpec::new(Generator::ThresholdBlocking, ChoicePolicy::Erase);
        assert!(spec.validate(SchemeKind::Cr).is_err());
        assert!(spec.validate(SchemeKind::Iter).is_ok());
    }
}

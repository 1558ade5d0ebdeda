use ic_core::amd_uf::{
    amd_decode, amd_decode_bit, amd_encode, amd_encode_bit, amd_encode_with, AmdCodeword,
    AmdParams, GF2kField,
};
use ic_core::scheme_iter::{rand5_decode, rand5_encode, Rand5Code};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Polynomials over GF(2) as bit masks, independent of the library's field.

fn clmul(a: u128, b: u128) -> u128 {
    let mut acc = 0u128;
    for i in 0..128 {
        if b >> i & 1 == 1 {
            acc ^= a << i;
        }
    }
    acc
}

fn deg(p: u128) -> i32 {
    127 - p.leading_zeros() as i32
}

fn pmod(mut a: u128, m: u128) -> u128 {
    let dm = deg(m);
    while a != 0 && deg(a) >= dm {
        a ^= m << (deg(a) - dm);
    }
    a
}

fn mulmod(a: u128, b: u128, m: u128) -> u128 {
    // a, b < 2^64 so the product fits before reduction
    pmod(clmul(a, b), m)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = pmod(a, b);
        a = b;
        b = r;
    }
    a
}

/// `x^(2^e) mod m` by repeated squaring.
fn x_pow_2e(e: u32, m: u128) -> u128 {
    let mut r = pmod(2, m);
    for _ in 0..e {
        r = mulmod(r, r, m);
    }
    r
}

fn prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Rabin's irreducibility test.
fn irreducible(m: u128, k: u32) -> bool {
    if x_pow_2e(k, m) != 2 {
        return false;
    }
    prime_factors(k)
        .into_iter()
        .all(|q| gcd(m, x_pow_2e(k / q, m) ^ 2) == 1)
}

#[test]
fn every_modulus_is_irreducible() {
    for k in 2..=64 {
        let f = GF2kField::new(k).unwrap();
        assert_eq!(deg(f.modulus()), k as i32);
        assert!(irreducible(f.modulus(), k), "k={k}");
    }
}

#[test]
fn rabin_rejects_reducible() {
    // (x^2 + x + 1)^2 = x^4 + x^2 + 1
    assert!(!irreducible(0b10101, 4));
    assert!(irreducible(0b10011, 4));
}

#[test]
fn gf16_multiplication_matches_schoolbook() {
    let f = GF2kField::new(4).unwrap();
    for a in 0..16u64 {
        for b in 0..16u64 {
            assert_eq!(
                f.mul(a, b) as u128,
                mulmod(a as u128, b as u128, f.modulus())
            );
        }
    }
}

fn amd_tag(f: &GF2kField, s: u64, x: u64) -> u64 {
    let m = f.modulus();
    let (s, x) = (s as u128, x as u128);
    (mulmod(mulmod(x, x, m), x, m) ^ mulmod(s, x, m)) as u64
}

#[test]
fn k4_message_misses_are_at_most_two_of_sixteen() {
    let f = GF2kField::new(4).unwrap();
    let mut worst = 0;
    for s in 0..16u64 {
        for delta in 1..(1u64 << 12) {
            let (ds, dx, dt) = (delta >> 8, delta >> 4 & 15, delta & 15);
            let misses = (0..16u64)
                .filter(|x| {
                    let (s2, x2, t2) = (s ^ ds, x ^ dx, amd_tag(&f, s, *x) ^ dt);
                    s2 != s && amd_tag(&f, s2, x2) == t2
                })
                .count();
            worst = worst.max(misses);
        }
    }
    assert!(worst <= 2, "worst {worst}/16");
}

#[test]
fn k4_library_decoder_agrees_with_oracle() {
    let f = GF2kField::new(4).unwrap();
    for s in 0..16u64 {
        for x in 0..16u64 {
            let w = amd_encode_with(&f, s, x).unwrap();
            assert_eq!(w.tag, amd_tag(&f, s, x));
            for dt in 1..16u64 {
                let bad = AmdCodeword {
                    tag: w.tag ^ dt,
                    ..w
                };
                assert_eq!(amd_decode(&f, &bad), None);
            }
        }
    }
}

#[test]
fn k4_bit_misses_are_at_most_two_of_sixteen() {
    // For the bit code the pad is uniform too; a miss is a decode to the
    // other bit, taken over the 8 pads and 16 values of x.
    let f = GF2kField::new(4).unwrap();
    for b in 0..2u64 {
        for delta in 1..(1u64 << 12) {
            let (ds, dx, dt) = (delta >> 8, delta >> 4 & 15, delta & 15);
            let mut misses = 0;
            for pad in 0..8u64 {
                let s = pad << 1 | b;
                for x in 0..16u64 {
                    let w = AmdCodeword {
                        s: s ^ ds,
                        x: x ^ dx,
                        tag: amd_tag(&f, s, x) ^ dt,
                    };
                    if amd_decode_bit(&f, &w) == Some(1 - b as u8) {
                        misses += 1;
                    }
                }
            }
            assert!(
                misses * 16 <= 2 * 128,
                "b={b} delta={delta:#x}: {misses}/128"
            );
        }
    }
}

#[test]
fn amd_degree_meets_target() {
    for p in [0.5, 0.3, 0.1, 1.0 / 297.0, 1e-6, 1e-12] {
        let k = AmdParams::for_probability(&p).unwrap().k;
        assert!(2.0 / 2f64.powi(k as i32) <= p);
        assert!(4.0 / 2f64.powi(k as i32) > p, "k one too large for {p}");
    }
}

#[test]
fn amd_round_trip_at_large_degrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in [8, 16] {
        let f = GF2kField::new(k).unwrap();
        for i in 0..100_000u64 {
            let s = i.wrapping_mul(0x9e37_79b9) & f.mask();
            let w = amd_encode(&f, s, &mut rng).unwrap();
            assert_eq!(amd_decode(&f, &w), Some(s));
        }
    }
}

#[test]
fn bit_prefix_has_half_uniform_bits() {
    // Over many encodings of a fixed bit, every prefix of length k' carries
    // at least k'/2 bits whose empirical frequency of ones is near 1/2.
    let k = 6;
    let f = GF2kField::new(k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples = 10_000;
    for b in 0..2u8 {
        let mut ones = vec![0u32; 3 * k as usize];
        for _ in 0..samples {
            let bits = amd_encode_bit(&f, b, &mut rng).to_bits(k);
            for (pos, v) in bits.iter().enumerate() {
                ones[pos] += *v as u32;
            }
        }
        let uniform: Vec<bool> = ones
            .iter()
            .map(|c| (*c as f64 / samples as f64 - 0.5).abs() < 0.03)
            .collect();
        for kp in 1..=3 * k as usize {
            let u = uniform[..kp].iter().filter(|u| **u).count();
            assert!(2 * u >= kp, "b={b} prefix {kp}: {u} uniform bits");
        }
    }
}

#[test]
fn rand5_decodes_named_words() {
    assert_eq!(rand5_decode(0b00000), Some(0));
    assert_eq!(rand5_decode(0b00100), Some(1));
    assert_eq!(rand5_decode(0b11111), None);
}

#[test]
fn rand5_offsets_erase_at_least_a_third() {
    let zero = [0b00000u8, 0b10000, 0b01000];
    let one = [0b00100u8, 0b10010, 0b01001];
    assert_eq!(Rand5Code::set(0), &zero);
    assert_eq!(Rand5Code::set(1), &one);
    let outside = |w: u8| !zero.contains(&w) && !one.contains(&w);
    for set in [zero, one] {
        for delta in 1u8..32 {
            let erased = set.iter().filter(|cw| outside(*cw ^ delta)).count();
            assert!(erased >= 1, "delta {delta:05b}");
            for cw in set {
                assert_eq!(rand5_decode(cw ^ delta).is_none(), outside(cw ^ delta));
            }
        }
    }
}

proptest! {
    #[test]
    fn field_axioms(k in 2u32..=64, a: u64, b: u64, c: u64) {
        let f = GF2kField::new(k).unwrap();
        let (a, b, c) = (a & f.mask(), b & f.mask(), c & f.mask());
        prop_assert_eq!(f.mul(a, f.mul(b, c)), f.mul(f.mul(a, b), c));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.mul(a, b), f.mul(b, a));
        prop_assert_eq!(f.mul(a, b) as u128, mulmod(a as u128, b as u128, f.modulus()));
        if a != 0 {
            prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        }
    }

    #[test]
    fn amd_round_trip(k in 2u32..=64, s: u64, seed: u64) {
        let f = GF2kField::new(k).unwrap();
        let s = s & f.mask();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = amd_encode(&f, s, &mut rng).unwrap();
        prop_assert_eq!(amd_decode(&f, &w), Some(s));
        prop_assert_eq!(AmdCodeword::from_bits(&w.to_bits(k), k), w);
        let b = (seed & 1) as u8;
        prop_assert_eq!(amd_decode_bit(&f, &amd_encode_bit(&f, b, &mut rng)), Some(b));
    }

    #[test]
    fn rand5_round_trip(bit in 0u8..2, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(rand5_decode(rand5_encode(bit, &mut rng)), Some(bit));
    }
}

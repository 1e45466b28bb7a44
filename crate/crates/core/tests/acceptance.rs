//! Acceptance suite. Run with `cargo test --test acceptance -- --nocapture`
//! to see one PASS/FAIL line per criterion.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use z4ring::format::{read_binary, read_file, read_text, write_binary, write_file, write_text};
use z4ring::gf2poly::check_condition;
use z4ring::schedule::{
    cost_model, simulate, simulate_with, staggered_selftest, FaultInjection, ScheduleParams, Timing,
};
use z4ring::sequence::{companion, empirical_check, impulse, select_uniform};
use z4ring::strassen::{mul_strassen, StrassenConfig};
use z4ring::z4core::{dot, dot_iterated, ma, ma_packed, MaTables};
use z4ring::{BlockParams, Gf2Poly, PackedZ4Vector, RecurrenceSpec, Z4Digit, Z4Matrix};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_digits(r: &mut ChaCha8Rng, len: usize) -> Vec<Z4Digit> {
    (0..len).map(|_| Z4Digit::reduce(r.gen_range(0..4))).collect()
}

fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Z4Matrix {
    Z4Matrix::from_fn(rows, cols, |_, _| Z4Digit::reduce(r.gen_range(0..4)))
}

fn digit(v: u64) -> Z4Digit {
    Z4Digit::reduce(v)
}

/// Integer dot product reduced at the end.
fn oracle_dot(u: &[Z4Digit], v: &[Z4Digit]) -> u64 {
    u.iter().zip(v).map(|(a, b)| a.value() as u64 * b.value() as u64).sum::<u64>() % 4
}

fn criterion_1_ma_exactness() {
    // low-output table, rows (a0,b0) = 00, 01, 10, 11 and columns s0 = 0, 1
    const L0_EXPECTED: [u8; 8] = [0, 1, 0, 1, 0, 1, 1, 0];
    let stored = MaTables::stored();
    assert_eq!(stored.l0, L0_EXPECTED);
    assert_eq!(stored, MaTables::derive());
    let mut count = 0;
    for a in 0..4u64 {
        for b in 0..4u64 {
            for s in 0..4u64 {
                let expect = (a * b + s) % 4;
                assert_eq!(ma(digit(a), digit(b), digit(s)).value() as u64, expect, "({a},{b},{s})");
                let l1 = stored.l1[((a << 4) | (b << 2) | s) as usize] as u64;
                assert_eq!(l1, expect >> 1, "high table at ({a},{b},{s})");
                let l0 = stored.l0[(((a & 1) << 2) | ((b & 1) << 1) | (s & 1)) as usize] as u64;
                assert_eq!(l0, expect & 1, "low table at ({a},{b},{s})");
                count += 1;
            }
        }
    }
    assert_eq!(count, 64);

    // all 64 triples at once through the packed path
    let lanes: Vec<(u64, u64, u64)> =
        (0..64u64).map(|i| (i >> 4, (i >> 2) & 3, i & 3)).collect();
    let pack = |f: fn(&(u64, u64, u64)) -> u64| {
        PackedZ4Vector::from_digits(&lanes.iter().map(|t| digit(f(t))).collect::<Vec<_>>())
    };
    let out = ma_packed(&pack(|t| t.0), &pack(|t| t.1), &pack(|t| t.2)).unwrap();
    for (i, &(a, b, s)) in lanes.iter().enumerate() {
        assert_eq!(out.get(i).value() as u64, (a * b + s) % 4);
    }
}

fn criterion_2_dot_oracle() {
    let mut r = rng(2);
    for len in [1usize, 27, 28, 29, 56, 896] {
        for _ in 0..100_000 {
            let u = random_digits(&mut r, len);
            let v = random_digits(&mut r, len);
            let acc = digit(r.gen_range(0..4));
            let expect = oracle_dot(&u, &v);
            let packed =
                dot(&PackedZ4Vector::from_digits(&u), &PackedZ4Vector::from_digits(&v), acc).unwrap();
            assert_eq!(packed.value() as u64, (expect + acc.value() as u64) % 4, "dot, len {len}");
            let chunked = dot_iterated(&u, &v, 28).unwrap();
            assert_eq!(chunked.value() as u64, expect, "dot_iterated, len {len}");
        }
    }
}

fn criterion_3_multiplier_equivalence() {
    let mut r = rng(3);
    let blocked = BlockParams::new(20, 28, 32).unwrap();
    let mut cases: Vec<(usize, usize)> = Vec::new();
    for k in [7usize, 20, 45, 128] {
        cases.extend(std::iter::repeat_n((k, 16), 20));
    }
    cases.push((896, 64));
    for (k, threshold) in cases {
        let a = random_matrix(&mut r, k, k);
        let b = random_matrix(&mut r, k, k);
        let naive = a.mul_naive(&b).unwrap();
        assert_eq!(a.mul_blocked(&b, blocked).unwrap(), naive, "blocked, k={k}");
        let cfg = StrassenConfig::new(threshold).unwrap();
        assert_eq!(mul_strassen(&a, &b, &cfg).unwrap(), naive, "strassen, k={k}");
        let cfg = cfg.with_base(blocked);
        assert_eq!(mul_strassen(&a, &b, &cfg).unwrap(), naive, "strassen over blocked, k={k}");
    }
}

fn reference_params() -> ScheduleParams {
    ScheduleParams { n: 28, depth: 32, k: 896, z: 10, delta: 140, block: 20 }
}

fn criterion_4_reference_costs() {
    let r = cost_model(&reference_params());
    assert_eq!(r.kappa, 45);
    assert_eq!(r.k_improved, 270);
    assert_eq!(r.phi_improved, 44_100);
    assert_eq!(r.gamma, 64_800);
    assert!(r.feasible, "{:?}", r.reasons);
}

fn criterion_5_schedule_simulation() {
    let sim = simulate_with(&reference_params(), Timing::Strict).unwrap();
    assert_eq!(sim.report.simulated_cycles, Some(64_800));
    assert_eq!(sim.row_fills, 45);
    assert_eq!(sim.column_fills, 225);
    let stalled = simulate(&reference_params()).unwrap();
    assert_eq!(stalled.report.simulated_cycles, Some(64_800));
    assert!(stalled.trace.iter().all(|s| s.memory <= s.compute));
}

fn criterion_6_sequence_pipeline() {
    let spec = RecurrenceSpec::new(&[1, 1, 0, 1], 2).unwrap();
    let adm = check_condition(&spec).unwrap();
    assert!(adm.admissible);
    assert_eq!(adm.char_poly, Gf2Poly::from_exponents(&[4, 3, 1, 0]));
    let p = adm.p.expect("admissible spec reports P");
    assert_eq!(p, Gf2Poly::from_exponents(&[2, 1, 0]));
    assert!(p.is_irreducible().unwrap());
    assert_eq!(p.order().unwrap(), 3);

    let report = select_uniform(&spec).unwrap();
    assert_eq!(report.exponent, BigUint::from(30u32));
    assert_eq!(report.candidates.len(), 4);
    for c in &report.candidates {
        let m = companion(&c.spec);
        let mut power = Z4Matrix::identity(4);
        for _ in 0..30 {
            power = power.mul_naive(&m).unwrap();
        }
        assert_eq!(c.identity_test, power.is_identity(), "candidate {}", c.index);
        assert_eq!(report.survivors.contains(&c.index), !c.identity_test);
        if c.identity_test {
            for init in [impulse(4), vec![1, 0, 0, 0], vec![1, 2, 3, 1], vec![3, 3, 3, 3]] {
                let e = empirical_check(&c.spec, &init).unwrap();
                assert_eq!(e.tail, 0);
                assert_eq!(30 % e.period, 0, "candidate {} from {init:?}: period {}", c.index, e.period);
            }
        }
    }
}

fn reducible_by_trial_division(p: u64, deg: u32) -> bool {
    let mul = |a: u64, b: u64| {
        let mut out = 0u64;
        for i in 0..64 {
            if (b >> i) & 1 == 1 {
                out ^= a << i;
            }
        }
        out
    };
    for dd in 1..=deg / 2 {
        for q in (1u64 << dd)..(1u64 << (dd + 1)) {
            for c in (1u64 << (deg - dd))..(1u64 << (deg - dd + 1)) {
                if mul(q, c) == p {
                    return true;
                }
            }
        }
    }
    false
}

fn random_poly(r: &mut ChaCha8Rng, max_bits: usize) -> Gf2Poly {
    let bits = r.gen_range(0..=max_bits);
    let words = (0..bits.div_ceil(64))
        .map(|w| {
            let x: u64 = r.gen();
            let used = (bits - 64 * w).min(64);
            if used == 64 {
                x
            } else {
                x & ((1u64 << used) - 1)
            }
        })
        .collect();
    Gf2Poly::from_words(words)
}

fn criterion_7_property_suites() {
    let mut r = rng(7);

    for case in 0..500 {
        let k = r.gen_range(1..=12);
        let m = random_matrix(&mut r, k, k);
        let a = BigUint::from(r.gen_range(0u64..1 << 40));
        let b = BigUint::from(r.gen_range(0u64..1 << 40));
        let lhs = m.matpow(&(&a + &b)).unwrap();
        let rhs = m.matpow(&a).unwrap().mul_naive(&m.matpow(&b).unwrap()).unwrap();
        assert_eq!(lhs, rhs, "matpow case {case}");
    }

    for _ in 0..10_000 {
        let a = random_poly(&mut r, 300);
        let b = random_poly(&mut r, 150);
        if b.is_zero() {
            assert!(a.divrem(&b).is_err());
            continue;
        }
        let (q, rem) = a.divrem(&b).unwrap();
        assert_eq!(&(&q * &b) + &rem, a);
        assert!(rem.degree().is_none_or(|d| d < b.degree().unwrap()));
    }

    let mut irreducible = [0u32; 11];
    for deg in 1..=10u32 {
        for bits in (1u64 << deg)..(1u64 << (deg + 1)) {
            let p = Gf2Poly::from_bits(bits);
            let expect = !reducible_by_trial_division(bits, deg);
            assert_eq!(p.is_irreducible().unwrap(), expect, "{p}");
            irreducible[deg as usize] += expect as u32;
        }
    }
    // counts of irreducible binary polynomials by degree
    assert_eq!(irreducible[1..], [2, 1, 2, 3, 6, 9, 18, 30, 56, 99]);

    let dir = tempfile::tempdir().unwrap();
    for case in 0..300 {
        let rows = r.gen_range(0..40);
        let cols = r.gen_range(0..90);
        let m = random_matrix(&mut r, rows, cols);
        assert_eq!(read_text(&write_text(&m)).unwrap(), m);
        assert_eq!(read_binary(&write_binary(&m)).unwrap(), m);
        if case % 30 == 0 {
            for name in ["m.z4t", "m.z4b"] {
                let path = dir.path().join(name);
                write_file(&path, &m).unwrap();
                assert_eq!(read_file(&path).unwrap(), m, "{name}");
            }
        }
    }
}

fn criterion_8_selftest() {
    let clean = staggered_selftest(28, 1_000_000, None).unwrap();
    assert_eq!(clean.rounds, 1_000_000);
    assert_eq!(clean.errors, 0);
    let faulty = staggered_selftest(28, 1_000_000, Some(FaultInjection { period: 1000 })).unwrap();
    assert!(faulty.errors > 0);
    assert!(faulty.first_error_round.is_some());
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn(), Duration); 8] = [
        ("1 MA exactness", criterion_1_ma_exactness, Duration::from_secs(1)),
        ("2 dot oracle", criterion_2_dot_oracle, Duration::from_secs(30)),
        ("3 multiplier equivalence", criterion_3_multiplier_equivalence, Duration::from_secs(120)),
        ("4 reference costs", criterion_4_reference_costs, Duration::from_secs(1)),
        ("5 schedule simulation", criterion_5_schedule_simulation, Duration::from_secs(1)),
        ("6 sequence pipeline", criterion_6_sequence_pipeline, Duration::from_secs(10)),
        ("7 property suites", criterion_7_property_suites, Duration::from_secs(120)),
        ("8 self-test harness", criterion_8_selftest, Duration::from_secs(60)),
    ];
    let mut failed = Vec::new();
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let verdict = match outcome {
            Ok(()) => "PASS",
            Err(_) => {
                failed.push(name);
                "FAIL"
            }
        };
        let over = if elapsed > budget { " (over time budget)" } else { "" };
        println!("criterion {name:<28} {verdict} {:>9.3}s{over}", elapsed.as_secs_f64());
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

//! Linear recurring sequences mod `2^s` with coefficients in Z4, and the
//! companion-matrix test that picks out the uniformly distributed member of
//! a family of four related recurrences.
//!
//! A recurrence of order `d` is
//!
//! ```text
//! u_n = a_{d-1} u_{n-1} + ... + a_1 u_{n-d+1} + a_0 u_{n-d}   (mod 2^s)
//! ```
//!
//! Given admissible coefficients, the four variants obtained by adding 0 or
//! 2 to `a_0` and `a_1` contain exactly one uniformly distributed sequence.
//! A variant whose companion matrix satisfies `M^(2^(d+1)-2) = I (mod 4)` is
//! not that sequence.

use std::fmt;

use log::warn;
use num_bigint::BigUint;
use rayon::prelude::*;

use crate::error::{domain_err, Error, Result};
use crate::gf2poly::check_condition;
use crate::matrix::Z4Matrix;
use crate::z4core::Z4Digit;

/// Largest modulus exponent accepted by [`empirical_check`].
pub const EMPIRICAL_MAX_S: u32 = 4;
/// Largest order accepted by [`empirical_check`].
pub const EMPIRICAL_MAX_ORDER: usize = 8;

/// Coefficients `a_0..a_{d-1}` and modulus exponent `s` of a recurrence.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RecurrenceSpec {
    coeffs: Vec<Z4Digit>,
    s: u32,
}

impl RecurrenceSpec {
    /// `coeffs[i]` is `a_i`. Requires at least one coefficient, all below 4,
    /// and `1 <= s <= 64`.
    pub fn new(coeffs: &[u8], s: u32) -> Result<Self> {
        if coeffs.is_empty() {
            return domain_err("a recurrence needs at least one coefficient");
        }
        if !(1..=64).contains(&s) {
            return domain_err(format!("modulus exponent must be in 1..=64, got {s}"));
        }
        let coeffs = coeffs.iter().map(|&c| Z4Digit::new(c)).collect::<Result<Vec<_>>>()?;
        Ok(RecurrenceSpec { coeffs, s })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Z4Digit] {
        &self.coeffs
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn with_s(&self, s: u32) -> Result<Self> {
        let raw: Vec<u8> = self.coeffs.iter().map(|c| c.value()).collect();
        RecurrenceSpec::new(&raw, s)
    }

    fn mask(&self) -> u64 {
        if self.s == 64 {
            u64::MAX
        } else {
            (1u64 << self.s) - 1
        }
    }

    /// Adds `delta` (mod 4) to coefficient `i`.
    fn bumped(&self, i: usize, delta: u8) -> RecurrenceSpec {
        let mut out = self.clone();
        out.coeffs[i] = out.coeffs[i].add(Z4Digit::reduce(delta as u64));
        out
    }

    /// The recurrence's next value from the last `d` values (oldest first).
    fn next_value(&self, window: &[u64]) -> u64 {
        self.coeffs
            .iter()
            .zip(window)
            .fold(0u64, |acc, (a, &u)| acc.wrapping_add((a.value() as u64).wrapping_mul(u)))
            & self.mask()
    }
}

impl fmt::Display for RecurrenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        write!(f, "({}) mod 2^{}", list.join(","), self.s)
    }
}

impl fmt::Debug for RecurrenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RecurrenceSpec{self}")
    }
}

/// Companion matrix: ones on the superdiagonal, `(a_0, ..., a_{d-1})` in the
/// last row. It maps the state `(u_{n-d}, ..., u_{n-1})` to
/// `(u_{n-d+1}, ..., u_n)`.
pub fn companion(spec: &RecurrenceSpec) -> Z4Matrix {
    let d = spec.order();
    let mut m = Z4Matrix::zeros(d, d);
    for i in 0..d - 1 {
        m.put(i, i + 1, Z4Digit::ONE);
    }
    for (j, &a) in spec.coeffs.iter().enumerate() {
        m.put(d - 1, j, a);
    }
    m
}

/// The four variants of a recurrence: base, `a_0 + 2`, `a_1 + 2`, both.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    pub specs: [RecurrenceSpec; 4],
}

pub fn candidates(spec: &RecurrenceSpec) -> Result<CandidateSet> {
    if spec.order() < 2 {
        return domain_err(format!("candidate variants need order >= 2, got {}", spec.order()));
    }
    Ok(CandidateSet {
        specs: [
            spec.clone(),
            spec.bumped(0, 2),
            spec.bumped(1, 2),
            spec.bumped(0, 2).bumped(1, 2),
        ],
    })
}

/// `2^(d+1) - 2`.
pub fn uniform_test_exponent(d: usize) -> BigUint {
    (BigUint::from(1u8) << (d + 1)) - BigUint::from(2u8)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateResult {
    pub index: usize,
    pub spec: RecurrenceSpec,
    /// `M^(2^(d+1)-2) == I (mod 4)`.
    pub identity_test: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionReport {
    pub exponent: BigUint,
    /// `None` when the order is too small for the admissibility test.
    pub admissible: Option<bool>,
    pub candidates: Vec<CandidateResult>,
    /// Indices of candidates that failed the identity test.
    pub survivors: Vec<usize>,
    pub unique: bool,
}

impl SelectionReport {
    /// The single survivor, if exactly one candidate failed the identity test.
    pub fn uniform_candidate(&self) -> Option<&RecurrenceSpec> {
        match self.survivors.as_slice() {
            [i] => Some(&self.candidates[*i].spec),
            _ => None,
        }
    }
}

/// Runs the identity test on all four variants.
///
/// The test always runs mod 4 regardless of `spec.s()`. Inadmissible
/// coefficients are reported and logged, not refused.
pub fn select_uniform(spec: &RecurrenceSpec) -> Result<SelectionReport> {
    let set = candidates(spec)?;
    let admissible = if spec.order() >= 3 {
        let adm = check_condition(spec)?.admissible;
        if !adm {
            warn!("coefficients {spec} are not admissible; the identity test may be meaningless");
        }
        Some(adm)
    } else {
        None
    };
    let exponent = uniform_test_exponent(spec.order());
    let candidates = set
        .specs
        .par_iter()
        .enumerate()
        .map(|(index, c)| {
            let power = companion(c).matpow(&exponent)?;
            Ok(CandidateResult { index, spec: c.clone(), identity_test: power.is_identity() })
        })
        .collect::<Result<Vec<_>>>()?;
    let survivors: Vec<usize> =
        candidates.iter().filter(|c| !c.identity_test).map(|c| c.index).collect();
    let unique = survivors.len() == 1;
    Ok(SelectionReport { exponent, admissible, candidates, survivors, unique })
}

fn check_init(spec: &RecurrenceSpec, init: &[u64]) -> Result<()> {
    if init.len() != spec.order() {
        return domain_err(format!(
            "initial state has {} values, recurrence order is {}",
            init.len(),
            spec.order()
        ));
    }
    if let Some(v) = init.iter().find(|&&v| v & !spec.mask() != 0) {
        return domain_err(format!("initial value {v} is not below 2^{}", spec.s));
    }
    Ok(())
}

/// Emits `u_d, ..., u_{d+count-1}` from `init = (u_0, ..., u_{d-1})`.
pub fn generate(spec: &RecurrenceSpec, init: &[u64], count: usize) -> Result<Vec<u64>> {
    check_init(spec, init)?;
    let d = spec.order();
    let mut window = init.to_vec();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let next = spec.next_value(&window[window.len() - d..]);
        window.push(next);
        out.push(next);
    }
    Ok(out)
}

/// Same output as [`generate`], computed by multiplying the state vector by
/// the companion matrix mod `2^s` and reading off its last component.
pub fn generate_via_companion(
    spec: &RecurrenceSpec,
    init: &[u64],
    count: usize,
) -> Result<Vec<u64>> {
    check_init(spec, init)?;
    let m = companion(spec);
    let d = spec.order();
    let mask = spec.mask();
    let mut state = init.to_vec();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        state = (0..d)
            .map(|i| {
                (0..d).fold(0u64, |acc, j| {
                    acc.wrapping_add((m.at(i, j).value() as u64).wrapping_mul(state[j]))
                }) & mask
            })
            .collect();
        out.push(state[d - 1]);
    }
    Ok(out)
}

/// Result of walking one sequence around its cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmpiricalReport {
    /// Length of the cycle the state eventually enters.
    pub period: u64,
    /// Steps before the cycle is entered (nonzero only when `a_0` is even).
    pub tail: u64,
    /// How often each residue mod `2^s` is emitted over one period.
    pub counts: Vec<u64>,
    pub uniform: bool,
    /// The initial state was all zero.
    pub degenerate: bool,
}

/// Default initial state `(0, ..., 0, 1)`.
pub fn impulse(d: usize) -> Vec<u64> {
    let mut v = vec![0; d];
    if let Some(last) = v.last_mut() {
        *last = 1;
    }
    v
}

/// State packed `s` bits per value, oldest value in the lowest bits.
struct PackedState<'a> {
    spec: &'a RecurrenceSpec,
    d: usize,
    s: u32,
}

impl PackedState<'_> {
    fn pack(&self, values: &[u64]) -> u64 {
        values.iter().enumerate().fold(0, |acc, (i, &v)| acc | (v << (self.s as usize * i)))
    }

    /// Advances one step; returns the new state and the emitted value.
    fn step(&self, state: u64) -> (u64, u64) {
        let mask = self.spec.mask();
        let mut next = 0u64;
        for (i, a) in self.spec.coeffs.iter().enumerate() {
            let u = (state >> (self.s as usize * i)) & mask;
            next = next.wrapping_add(a.value() as u64 * u);
        }
        next &= mask;
        let shifted = (state >> self.s) | (next << (self.s as usize * (self.d - 1)));
        (shifted, next)
    }
}

/// Walks the state sequence from `init` until it repeats and tallies the
/// values emitted over one period.
///
/// With `a_0` odd the state map is a permutation, so the walk simply waits
/// for `init` to recur. Otherwise Brent's cycle finder locates the tail and
/// the cycle first. Refuses `s > 4` or `d > 8`.
pub fn empirical_check(spec: &RecurrenceSpec, init: &[u64]) -> Result<EmpiricalReport> {
    if spec.s > EMPIRICAL_MAX_S || spec.order() > EMPIRICAL_MAX_ORDER {
        return Err(Error::Budget(format!(
            "empirical check is limited to s <= {EMPIRICAL_MAX_S} and d <= {EMPIRICAL_MAX_ORDER}, got s = {}, d = {}",
            spec.s,
            spec.order()
        )));
    }
    check_init(spec, init)?;
    let walker = PackedState { spec, d: spec.order(), s: spec.s };
    let start = walker.pack(init);
    let degenerate = init.iter().all(|&v| v == 0);

    let (tail, period) = if spec.coeffs[0].lo() {
        let mut state = walker.step(start).0;
        let mut period = 1u64;
        while state != start {
            state = walker.step(state).0;
            period += 1;
        }
        (0, period)
    } else {
        brent(|x| walker.step(x).0, start)
    };

    let mut state = start;
    for _ in 0..tail {
        state = walker.step(state).0;
    }
    let mut counts = vec![0u64; 1usize << spec.s];
    for _ in 0..period {
        let (next, value) = walker.step(state);
        counts[value as usize] += 1;
        state = next;
    }
    let uniform = counts.iter().all(|&c| c == counts[0]);
    Ok(EmpiricalReport { period, tail, counts, uniform, degenerate })
}

/// Brent's cycle detection: `(tail length, cycle length)`.
fn brent(f: impl Fn(u64) -> u64, x0: u64) -> (u64, u64) {
    let mut power = 1u64;
    let mut lam = 1u64;
    let mut tortoise = x0;
    let mut hare = f(x0);
    while tortoise != hare {
        if power == lam {
            tortoise = hare;
            power *= 2;
            lam = 0;
        }
        hare = f(hare);
        lam += 1;
    }
    let mut tortoise = x0;
    let mut hare = x0;
    for _ in 0..lam {
        hare = f(hare);
    }
    let mut mu = 0u64;
    while tortoise != hare {
        tortoise = f(tortoise);
        hare = f(hare);
        mu += 1;
    }
    (mu, lam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(coeffs: &[u8], s: u32) -> RecurrenceSpec {
        RecurrenceSpec::new(coeffs, s).unwrap()
    }

    /// `M^e == I` decided by checking that every state of the mod-4 state
    /// space returns to itself after `e` steps.
    fn identity_by_enumeration(spec: &RecurrenceSpec, e: u64) -> bool {
        let spec = spec.with_s(2).unwrap();
        let d = spec.order();
        let walker = PackedState { spec: &spec, d, s: 2 };
        (0..(1u64 << (2 * d))).all(|x| {
            let mut y = x;
            for _ in 0..e {
                y = walker.step(y).0;
            }
            y == x
        })
    }

    #[test]
    fn spec_validation() {
        assert!(RecurrenceSpec::new(&[], 2).is_err());
        assert!(RecurrenceSpec::new(&[4], 2).is_err());
        assert!(RecurrenceSpec::new(&[1], 0).is_err());
        assert_eq!(spec(&[1, 2, 3], 5).order(), 3);
    }

    #[test]
    fn companion_examples() {
        assert_eq!(companion(&spec(&[3], 2)), Z4Matrix::from_rows(&[[3]]).unwrap());
        assert_eq!(
            companion(&spec(&[1, 1, 0, 1], 2)),
            Z4Matrix::from_rows(&[[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [1, 1, 0, 1]])
                .unwrap()
        );
        assert_eq!(
            companion(&spec(&[0, 0], 2)),
            Z4Matrix::from_rows(&[[0, 1], [0, 0]]).unwrap()
        );
    }

    #[test]
    fn candidate_examples() {
        let set = candidates(&spec(&[1, 1, 0, 1], 2)).unwrap();
        let firsts: Vec<(u8, u8)> =
            set.specs.iter().map(|s| (s.coeffs[0].value(), s.coeffs[1].value())).collect();
        assert_eq!(firsts, vec![(1, 1), (3, 1), (1, 3), (3, 3)]);
        assert!(set.specs.iter().all(|s| s.coeffs[2..] == spec(&[1, 1, 0, 1], 2).coeffs[2..]));

        let set = candidates(&spec(&[3, 3], 2)).unwrap();
        assert_eq!(set.specs[0], spec(&[3, 3], 2));
        assert_eq!(set.specs[1], spec(&[1, 3], 2));
        assert_eq!(set.specs[2], spec(&[3, 1], 2));
        assert_eq!(set.specs[3], spec(&[1, 1], 2));

        assert!(candidates(&spec(&[1], 2)).is_err());
    }

    #[test]
    fn select_uniform_d4_against_repeated_multiplication() {
        let report = select_uniform(&spec(&[1, 1, 0, 1], 2)).unwrap();
        assert_eq!(report.exponent, BigUint::from(30u8));
        assert_eq!(report.admissible, Some(true));
        for c in &report.candidates {
            let m = companion(&c.spec);
            let mut chain = m.clone();
            for _ in 1..30 {
                chain = chain.mul_naive(&m).unwrap();
            }
            assert_eq!(c.identity_test, chain.is_identity(), "candidate {}", c.index);
            assert_eq!(c.identity_test, identity_by_enumeration(&c.spec, 30));
        }
    }

    #[test]
    fn select_uniform_cube_against_enumeration() {
        let report = select_uniform(&spec(&[1, 1, 1], 2)).unwrap();
        assert_eq!(report.exponent, BigUint::from(14u8));
        for c in &report.candidates {
            assert_eq!(c.identity_test, identity_by_enumeration(&c.spec, 14), "candidate {}", c.index);
        }
    }

    #[test]
    fn select_uniform_is_independent_of_s() {
        let a = select_uniform(&spec(&[1, 1, 0, 1], 2)).unwrap();
        let b = select_uniform(&spec(&[1, 1, 0, 1], 9)).unwrap();
        let strip = |r: &SelectionReport| r.candidates.iter().map(|c| c.identity_test).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.survivors, b.survivors);
    }

    #[test]
    fn generate_examples() {
        assert_eq!(generate(&spec(&[1, 3, 2], 3), &[0, 0, 0], 5).unwrap(), vec![0; 5]);
        assert_eq!(
            generate(&spec(&[1, 1], 2), &[0, 1], 6).unwrap(),
            vec![1, 2, 3, 1, 0, 1]
        );
        assert!(generate(&spec(&[1, 1], 2), &[0], 3).is_err());
        assert!(generate(&spec(&[1, 1], 2), &[0, 4], 3).is_err());
    }

    #[test]
    fn empirical_examples() {
        let zero = empirical_check(&spec(&[1, 1, 0, 1], 2), &[0, 0, 0, 0]).unwrap();
        assert_eq!(zero.period, 1);
        assert!(zero.degenerate);
        assert!(!zero.uniform);

        let fib = empirical_check(&spec(&[1, 1], 1), &[0, 1]).unwrap();
        assert_eq!(fib.period, 3);
        assert_eq!(fib.counts, vec![1, 2]);
        assert!(!fib.uniform);
        assert!(!fib.degenerate);

        assert!(matches!(
            empirical_check(&spec(&[1, 1], 5), &[0, 1]),
            Err(Error::Budget(_))
        ));
        assert!(matches!(
            empirical_check(&spec(&[1; 9], 2), &impulse(9)),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn empirical_with_tail() {
        // u_n = 2 u_{n-2} + u_{n-1} mod 4 has a non-invertible state map
        let r = empirical_check(&spec(&[2, 1], 2), &[1, 0]).unwrap();
        let seq = generate(&spec(&[2, 1], 2), &[1, 0], 200).unwrap();
        let p = r.period as usize;
        let t = r.tail as usize;
        for i in t..150 {
            assert_eq!(seq[i], seq[i + p]);
        }
        assert_eq!(r.counts.iter().sum::<u64>(), r.period);
    }

    #[test]
    fn d4_identity_test_leaves_three_survivors() {
        let report = select_uniform(&spec(&[1, 1, 0, 1], 2)).unwrap();
        assert_eq!(report.survivors, vec![0, 1, 3]);
        assert!(!report.unique);
        assert!(report.uniform_candidate().is_none());
        // only candidate 1, a0 + 2, is uniform from the impulse seed
        let uniform: Vec<usize> = report
            .candidates
            .iter()
            .filter(|c| empirical_check(&c.spec, &impulse(4)).unwrap().uniform)
            .map(|c| c.index)
            .collect();
        assert_eq!(uniform, vec![1]);
        let r = empirical_check(&report.candidates[1].spec, &impulse(4)).unwrap();
        assert_eq!((r.period, r.counts.clone()), (12, vec![3, 3, 3, 3]));
    }

    #[test]
    fn identity_test_soundness_small_orders() {
        for coeffs in [&[1u8, 1, 1][..], &[1, 1, 0, 1], &[1, 0, 1, 1, 1], &[1, 1, 0, 0, 0, 1]] {
            let report = select_uniform(&spec(coeffs, 2)).unwrap();
            let e = uniform_test_exponent(coeffs.len()).to_u64_digits()[0];
            for c in report.candidates.iter().filter(|c| c.identity_test) {
                let r = empirical_check(&c.spec, &impulse(coeffs.len())).unwrap();
                assert_eq!(e % r.period, 0, "{:?} period {}", c.spec, r.period);
            }
        }
    }

    proptest! {
        #[test]
        fn companion_path_matches_recurrence(
            coeffs in proptest::collection::vec(0u8..4, 1..10),
            s in 1u32..=64,
            seed in any::<u64>(),
        ) {
            let sp = spec(&coeffs, s);
            let mask = sp.mask();
            let init: Vec<u64> = (0..coeffs.len() as u64)
                .map(|i| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(i as u32 * 7) & mask)
                .collect();
            prop_assert_eq!(
                generate(&sp, &init, 1000).unwrap(),
                generate_via_companion(&sp, &init, 1000).unwrap()
            );
        }

        #[test]
        fn candidates_share_admissibility(coeffs in proptest::collection::vec(0u8..4, 3..10)) {
            let set = candidates(&spec(&coeffs, 2)).unwrap();
            let base = check_condition(&set.specs[0]).unwrap().admissible;
            for c in &set.specs[1..] {
                prop_assert_eq!(check_condition(c).unwrap().admissible, base);
            }
        }
    }
}

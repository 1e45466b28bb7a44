//! Polynomials over GF(2).
//!
//! Used to decide whether a recurrence's characteristic polynomial, reduced
//! mod 2, has the shape `(x+1)^2 * P(x)` with `P` irreducible.

use std::fmt;
use std::ops::{Add, Mul};

use crate::error::{domain_err, Result};
use crate::sequence::RecurrenceSpec;

/// Largest degree accepted by [`Gf2Poly::order`].
pub const ORDER_DEGREE_CAP: usize = 24;

/// A polynomial over GF(2). Bit `i` of the coefficient words is the
/// coefficient of `x^i`; trailing zero words are never stored, so the zero
/// polynomial has no words at all.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Gf2Poly {
    words: Vec<u64>,
}

impl Gf2Poly {
    pub fn zero() -> Self {
        Gf2Poly { words: Vec::new() }
    }

    pub fn one() -> Self {
        Gf2Poly { words: vec![1] }
    }

    pub fn x() -> Self {
        Gf2Poly { words: vec![2] }
    }

    pub fn monomial(k: usize) -> Self {
        let mut p = Gf2Poly { words: vec![0; k / 64 + 1] };
        p.words[k / 64] = 1 << (k % 64);
        p
    }

    /// Sum of `x^e` over the given exponents (repeats cancel).
    pub fn from_exponents(exps: &[usize]) -> Self {
        exps.iter().fold(Gf2Poly::zero(), |acc, &e| acc + Gf2Poly::monomial(e))
    }

    /// Coefficients packed in a `u64`, bit `i` for `x^i`.
    pub fn from_bits(bits: u64) -> Self {
        Self::from_words(vec![bits])
    }

    pub fn from_words(words: Vec<u64>) -> Self {
        let mut p = Gf2Poly { words };
        p.normalize();
        p
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Low 64 coefficients as a bit mask.
    pub fn low_bits(&self) -> u64 {
        self.words.first().copied().unwrap_or(0)
    }

    fn normalize(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.words == [1]
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        let top = *self.words.last()?;
        Some((self.words.len() - 1) * 64 + 63 - top.leading_zeros() as usize)
    }

    pub fn coeff(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| (w >> (i % 64)) & 1 == 1)
    }

    fn flip(&mut self, i: usize) {
        if self.words.len() <= i / 64 {
            self.words.resize(i / 64 + 1, 0);
        }
        self.words[i / 64] ^= 1 << (i % 64);
    }

    /// XOR of `other << shift` into `self`.
    fn add_shifted(&mut self, other: &Gf2Poly, shift: usize) {
        let (ws, bs) = (shift / 64, shift % 64);
        let need = other.words.len() + ws + 1;
        if self.words.len() < need {
            self.words.resize(need, 0);
        }
        for (i, &w) in other.words.iter().enumerate() {
            self.words[i + ws] ^= w << bs;
            if bs != 0 {
                self.words[i + ws + 1] ^= w >> (64 - bs);
            }
        }
        self.normalize();
    }

    /// `(q, r)` with `self = q*divisor + r` and `deg r < deg divisor`.
    pub fn divrem(&self, divisor: &Gf2Poly) -> Result<(Gf2Poly, Gf2Poly)> {
        let Some(db) = divisor.degree() else {
            return domain_err("division by the zero polynomial");
        };
        let mut q = Gf2Poly::zero();
        let mut r = self.clone();
        while let Some(dr) = r.degree() {
            if dr < db {
                break;
            }
            q.flip(dr - db);
            r.add_shifted(divisor, dr - db);
        }
        q.normalize();
        Ok((q, r))
    }

    pub fn rem(&self, modulus: &Gf2Poly) -> Result<Gf2Poly> {
        Ok(self.divrem(modulus)?.1)
    }

    pub fn gcd(&self, other: &Gf2Poly) -> Gf2Poly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.divrem(&b).expect("b is nonzero").1;
            a = b;
            b = r;
        }
        a
    }

    /// Irreducibility over GF(2) by the distinct-degree test: `p` of degree
    /// `n` is irreducible iff `gcd(x^(2^i) - x, p) = 1` for every
    /// `1 <= i <= n/2`.
    pub fn is_irreducible(&self) -> Result<bool> {
        let n = match self.degree() {
            None | Some(0) => return domain_err("irreducibility of a constant polynomial"),
            Some(n) => n,
        };
        if n == 1 {
            return Ok(true);
        }
        // p(0) = 0 means x divides p
        if !self.coeff(0) {
            return Ok(false);
        }
        let x = Gf2Poly::x();
        let mut h = x.clone();
        for _ in 1..=n / 2 {
            h = (&h * &h).rem(self)?;
            if !(&h + &x).gcd(self).is_one() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Multiplicative order of `x` modulo an irreducible `p != x`, by
    /// repeated multiplication. Refuses degrees above [`ORDER_DEGREE_CAP`].
    pub fn order(&self) -> Result<u64> {
        let n = match self.degree() {
            Some(n) if n >= 1 => n,
            _ => return domain_err("order of a constant polynomial"),
        };
        if n > ORDER_DEGREE_CAP {
            return domain_err(format!(
                "order is computed by brute force only up to degree {ORDER_DEGREE_CAP}, got {n}"
            ));
        }
        if *self == Gf2Poly::x() {
            return domain_err("x has no multiplicative order modulo x");
        }
        if !self.is_irreducible()? {
            return domain_err(format!("{self} is not irreducible"));
        }
        let modulus = self.low_bits();
        let top = 1u64 << n;
        let step = |r: u64| {
            let s = r << 1;
            if s & top != 0 {
                s ^ modulus
            } else {
                s
            }
        };
        let mut r = step(1);
        let mut e = 1u64;
        while r != 1 {
            r = step(r);
            e += 1;
        }
        Ok(e)
    }
}

impl Add for &Gf2Poly {
    type Output = Gf2Poly;

    fn add(self, rhs: &Gf2Poly) -> Gf2Poly {
        let mut out = self.clone();
        out.add_shifted(rhs, 0);
        out
    }
}

impl Add for Gf2Poly {
    type Output = Gf2Poly;

    fn add(self, rhs: Gf2Poly) -> Gf2Poly {
        &self + &rhs
    }
}

impl Mul for &Gf2Poly {
    type Output = Gf2Poly;

    fn mul(self, rhs: &Gf2Poly) -> Gf2Poly {
        let mut out = Gf2Poly::zero();
        let Some(db) = rhs.degree() else {
            return out;
        };
        for i in 0..=db {
            if rhs.coeff(i) {
                out.add_shifted(self, i);
            }
        }
        out
    }
}

impl Mul for Gf2Poly {
    type Output = Gf2Poly;

    fn mul(self, rhs: Gf2Poly) -> Gf2Poly {
        &self * &rhs
    }
}

impl fmt::Display for Gf2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(deg) = self.degree() else {
            return write!(f, "0");
        };
        let mut first = true;
        for i in (0..=deg).rev().filter(|&i| self.coeff(i)) {
            if !first {
                write!(f, "+")?;
            }
            first = false;
            match i {
                0 => write!(f, "1")?,
                1 => write!(f, "x")?,
                _ => write!(f, "x^{i}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Gf2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf2Poly({self})")
    }
}

/// `x^d - a_{d-1}x^{d-1} - ... - a_0` reduced mod 2; the signs vanish.
pub fn char_poly_mod2(spec: &RecurrenceSpec) -> Gf2Poly {
    let mut p = Gf2Poly::monomial(spec.order());
    for (i, a) in spec.coeffs().iter().enumerate() {
        if a.lo() {
            p.flip(i);
        }
    }
    p.normalize();
    p
}

/// Outcome of the admissibility test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Admissibility {
    pub admissible: bool,
    pub char_poly: Gf2Poly,
    /// `char_poly / (x+1)^2` when the division is exact and the quotient irreducible.
    pub p: Option<Gf2Poly>,
}

/// Tests whether the characteristic polynomial mod 2 equals `(x+1)^2 P(x)`
/// with `P` irreducible.
///
/// `P = x+1` (so that the characteristic polynomial is `(x+1)^3`) is
/// accepted and reported; whether to use such a recurrence is up to the
/// caller.
pub fn check_condition(spec: &RecurrenceSpec) -> Result<Admissibility> {
    if spec.order() < 3 {
        return domain_err(format!("admissibility needs order >= 3, got {}", spec.order()));
    }
    let char_poly = char_poly_mod2(spec);
    // (x+1)^2 = x^2 + 1 over GF(2)
    let square = Gf2Poly::from_exponents(&[2, 0]);
    let (q, r) = char_poly.divrem(&square)?;
    let admissible = r.is_zero() && q.is_irreducible()?;
    Ok(Admissibility { admissible, p: admissible.then_some(q), char_poly })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly(exps: &[usize]) -> Gf2Poly {
        Gf2Poly::from_exponents(exps)
    }

    fn spec(coeffs: &[u8]) -> RecurrenceSpec {
        RecurrenceSpec::new(coeffs, 2).unwrap()
    }

    /// Reference irreducibility: no divisor of degree 1..=deg/2.
    fn trial_division(p: &Gf2Poly) -> bool {
        let n = p.degree().unwrap();
        for dd in 1..=n / 2 {
            for low in 0..(1u64 << dd) {
                let cand = Gf2Poly::from_bits((1 << dd) | low);
                if p.rem(&cand).unwrap().is_zero() {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn degree_and_display() {
        assert_eq!(Gf2Poly::zero().degree(), None);
        assert_eq!(Gf2Poly::one().degree(), Some(0));
        assert_eq!(poly(&[130, 3]).degree(), Some(130));
        assert_eq!(poly(&[4, 3, 1, 0]).to_string(), "x^4+x^3+x+1");
        assert_eq!(Gf2Poly::zero().to_string(), "0");
    }

    #[test]
    fn char_poly_examples() {
        assert_eq!(char_poly_mod2(&spec(&[1, 1, 0, 1])), poly(&[4, 3, 1, 0]));
        assert_eq!(char_poly_mod2(&spec(&[0, 0, 0, 0, 0])), poly(&[5]));
        assert_eq!(char_poly_mod2(&spec(&[2, 2])), poly(&[2]));
    }

    #[test]
    fn divrem_examples() {
        let (q, r) = poly(&[4, 3, 1, 0]).divrem(&poly(&[2, 0])).unwrap();
        assert_eq!(q, poly(&[2, 1, 0]));
        assert!(r.is_zero());

        let a = poly(&[7, 2, 0]);
        assert_eq!(a.divrem(&a).unwrap(), (Gf2Poly::one(), Gf2Poly::zero()));

        let (q, r) = poly(&[2, 0]).divrem(&poly(&[3, 1, 0])).unwrap();
        assert!(q.is_zero());
        assert_eq!(r, poly(&[2, 0]));

        assert!(matches!(a.divrem(&Gf2Poly::zero()), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn irreducibility_examples() {
        assert!(poly(&[2, 1, 0]).is_irreducible().unwrap());
        assert!(!poly(&[2, 0]).is_irreducible().unwrap());
        assert!(Gf2Poly::x().is_irreducible().unwrap());
        assert!(Gf2Poly::one().is_irreducible().is_err());
        assert!(Gf2Poly::zero().is_irreducible().is_err());
    }

    #[test]
    fn irreducible_matches_trial_division_up_to_degree_10() {
        for bits in 2u64..(1 << 11) {
            let p = Gf2Poly::from_bits(bits);
            assert_eq!(p.is_irreducible().unwrap(), trial_division(&p), "{p}");
        }
    }

    #[test]
    fn order_examples() {
        assert_eq!(poly(&[2, 1, 0]).order().unwrap(), 3);
        assert_eq!(poly(&[1, 0]).order().unwrap(), 1);
        assert_eq!(poly(&[3, 1, 0]).order().unwrap(), 7);
        // x^4 + x^3 + x^2 + x + 1 divides x^5 - 1
        assert_eq!(poly(&[4, 3, 2, 1, 0]).order().unwrap(), 5);
    }

    #[test]
    fn order_refuses_bad_input() {
        assert!(Gf2Poly::x().order().is_err());
        assert!(poly(&[2, 0]).order().is_err());
        assert!(poly(&[25, 3, 0]).order().is_err());
    }

    #[test]
    fn order_divides_group_size() {
        for bits in 3u64..(1 << 13) {
            let p = Gf2Poly::from_bits(bits);
            if p != Gf2Poly::x() && p.is_irreducible().unwrap() {
                let n = p.degree().unwrap();
                let e = p.order().unwrap();
                assert_eq!(((1u64 << n) - 1) % e, 0, "{p} has order {e}");
            }
        }
    }

    #[test]
    fn check_condition_examples() {
        let a = check_condition(&spec(&[1, 1, 0, 1])).unwrap();
        assert!(a.admissible);
        assert_eq!(a.p, Some(poly(&[2, 1, 0])));

        let z = check_condition(&spec(&[0, 0, 0, 0])).unwrap();
        assert!(!z.admissible);
        assert_eq!(z.p, None);

        let cube = check_condition(&spec(&[1, 1, 1])).unwrap();
        assert!(cube.admissible);
        assert_eq!(cube.p, Some(poly(&[1, 0])));

        assert!(check_condition(&spec(&[1, 1])).is_err());
    }

    proptest! {
        #[test]
        fn divrem_round_trip(
            a in proptest::collection::vec(any::<u64>(), 0..4),
            b in proptest::collection::vec(any::<u64>(), 1..3),
        ) {
            let a = Gf2Poly::from_words(a);
            let b = Gf2Poly::from_words(b);
            prop_assume!(!b.is_zero());
            let (q, r) = a.divrem(&b).unwrap();
            prop_assert_eq!(&(&q * &b) + &r, a);
            prop_assert!(r.degree().is_none_or(|dr| dr < b.degree().unwrap()));
        }

        #[test]
        fn adding_two_keeps_admissibility(
            coeffs in proptest::collection::vec(0u8..4, 3..12),
            pos in 0usize..12,
        ) {
            let base = spec(&coeffs);
            let mut bumped = coeffs.clone();
            let pos = pos % bumped.len();
            bumped[pos] = (bumped[pos] + 2) % 4;
            prop_assert_eq!(check_condition(&base).unwrap(), check_condition(&spec(&bumped)).unwrap());
        }
    }
}

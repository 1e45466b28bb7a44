//! Multiply-accumulate over Z4 and the bit-sliced vector kernels built on it.
//!
//! A digit `c = 2*hi + lo` is split into two bits. The scalar primitive
//! [`ma`] reads its result from two truth tables: `l0` maps the three low
//! bits `(a0, b0, s0)` to the low output bit and `l1` maps all six input bits
//! to the high output bit. The packed kernels evaluate the equivalent boolean
//! form on 64 lanes per word:
//!
//! ```text
//! p0 = a0 & b0
//! p1 = (a1 & b0) ^ (a0 & b1)
//! c0 = p0 ^ s0
//! c1 = p1 ^ s1 ^ (p0 & s0)
//! ```
//!
//! [`MaTables::get`] checks once per process that the stored tables and the
//! boolean form agree on all 64 inputs.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{dim_err, domain_err, Result};

/// Default chunk width of the dot-product unit.
pub const DEFAULT_CHUNK: usize = 28;

/// One element of Z4.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Z4Digit(u8);

impl Z4Digit {
    pub const ZERO: Z4Digit = Z4Digit(0);
    pub const ONE: Z4Digit = Z4Digit(1);
    pub const TWO: Z4Digit = Z4Digit(2);
    pub const THREE: Z4Digit = Z4Digit(3);

    pub fn new(value: u8) -> Result<Self> {
        if value < 4 {
            Ok(Z4Digit(value))
        } else {
            domain_err(format!("{value} is not a Z4 digit"))
        }
    }

    /// Reduces any integer mod 4.
    pub const fn reduce(value: u64) -> Self {
        Z4Digit((value & 3) as u8)
    }

    pub const fn from_bits(hi: bool, lo: bool) -> Self {
        Z4Digit(((hi as u8) << 1) | lo as u8)
    }

    pub const fn value(self) -> u8 {
        self.0
    }

    pub const fn hi(self) -> bool {
        self.0 & 2 != 0
    }

    pub const fn lo(self) -> bool {
        self.0 & 1 != 0
    }

    pub const fn add(self, rhs: Self) -> Self {
        Z4Digit((self.0 + rhs.0) & 3)
    }

    pub const fn sub(self, rhs: Self) -> Self {
        Z4Digit((self.0 + 4 - rhs.0) & 3)
    }

    pub const fn mul(self, rhs: Self) -> Self {
        Z4Digit((self.0 * rhs.0) & 3)
    }

    pub const fn neg(self) -> Self {
        Z4Digit((4 - self.0) & 3)
    }
}

impl fmt::Display for Z4Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<u8> for Z4Digit {
    type Error = crate::Error;

    fn try_from(value: u8) -> Result<Self> {
        Z4Digit::new(value)
    }
}

impl From<Z4Digit> for u8 {
    fn from(d: Z4Digit) -> u8 {
        d.0
    }
}

/// Contents of `l0`, indexed by `(a0 << 2) | (b0 << 1) | s0`.
///
/// Rows `(a0,b0)` = (0,0), (0,1), (1,0), (1,1); columns `s0` = 0, 1.
const L0_TABLE: [u8; 8] = [
    0, 1, //
    0, 1, //
    0, 1, //
    1, 0, //
];

/// Contents of `l1`, indexed by `(a << 4) | (b << 2) | s`.
///
/// Rows `(a,b)` in lexicographic order; columns `s` = 0, 1, 2, 3.
const L1_TABLE: [u8; 64] = [
    0, 0, 1, 1, // (0,0)
    0, 0, 1, 1, // (0,1)
    0, 0, 1, 1, // (0,2)
    0, 0, 1, 1, // (0,3)
    0, 0, 1, 1, // (1,0)
    0, 1, 1, 0, // (1,1)
    1, 1, 0, 0, // (1,2)
    1, 0, 0, 1, // (1,3)
    0, 0, 1, 1, // (2,0)
    1, 1, 0, 0, // (2,1)
    0, 0, 1, 1, // (2,2)
    1, 1, 0, 0, // (2,3)
    0, 0, 1, 1, // (3,0)
    1, 0, 0, 1, // (3,1)
    1, 1, 0, 0, // (3,2)
    0, 1, 1, 0, // (3,3)
];

/// The two lookup tables of the multiply-accumulate unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaTables {
    pub l0: [u8; 8],
    pub l1: [u8; 64],
}

impl MaTables {
    /// The stored tables, verified against the boolean form on first use.
    pub fn get() -> &'static MaTables {
        static TABLES: OnceLock<MaTables> = OnceLock::new();
        TABLES.get_or_init(|| {
            let stored = MaTables::stored();
            let derived = MaTables::derive();
            assert_eq!(stored, derived, "MA lookup tables disagree with the boolean formula");
            stored
        })
    }

    /// The tables exactly as tabulated.
    pub const fn stored() -> MaTables {
        MaTables { l0: L0_TABLE, l1: L1_TABLE }
    }

    /// Rebuilds both tables from the bit-sliced boolean form.
    pub fn derive() -> MaTables {
        let mut l0 = [0u8; 8];
        for (idx, out) in l0.iter_mut().enumerate() {
            let (a0, b0, s0) = ((idx >> 2) & 1 == 1, (idx >> 1) & 1 == 1, idx & 1 == 1);
            *out = ((a0 & b0) ^ s0) as u8;
        }
        let mut l1 = [0u8; 64];
        for (idx, out) in l1.iter_mut().enumerate() {
            let (a, b, s) = ((idx >> 4) as u64, ((idx >> 2) & 3) as u64, (idx & 3) as u64);
            let (_, c1) = ma_bits(a, b, s);
            *out = (c1 & 1) as u8;
        }
        MaTables { l0, l1 }
    }

    pub fn l0_lookup(&self, a0: bool, b0: bool, s0: bool) -> bool {
        self.l0[((a0 as usize) << 2) | ((b0 as usize) << 1) | s0 as usize] == 1
    }

    pub fn l1_lookup(&self, a: Z4Digit, b: Z4Digit, s: Z4Digit) -> bool {
        self.l1[((a.0 as usize) << 4) | ((b.0 as usize) << 2) | s.0 as usize] == 1
    }
}

/// Boolean multiply-accumulate on bit-planes packed in words.
/// Inputs are digit values whose bit 0 is the low plane and bit 1 the high
/// plane when called on scalars; on words each bit position is a lane.
#[inline(always)]
fn ma_planes(a0: u64, a1: u64, b0: u64, b1: u64, s0: u64, s1: u64) -> (u64, u64) {
    let p0 = a0 & b0;
    let p1 = (a1 & b0) ^ (a0 & b1);
    (p0 ^ s0, p1 ^ s1 ^ (p0 & s0))
}

fn ma_bits(a: u64, b: u64, s: u64) -> (u64, u64) {
    ma_planes(a & 1, a >> 1, b & 1, b >> 1, s & 1, s >> 1)
}

/// `(a*b + s) mod 4`, read from the lookup tables.
pub fn ma(a: Z4Digit, b: Z4Digit, s: Z4Digit) -> Z4Digit {
    let t = MaTables::get();
    Z4Digit::from_bits(t.l1_lookup(a, b, s), t.l0_lookup(a.lo(), b.lo(), s.lo()))
}

#[inline]
fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

#[inline]
fn tail_mask(len: usize) -> u64 {
    match len % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// A vector of Z4 digits stored as a low and a high bit-plane.
///
/// Bits past `len` in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PackedZ4Vector {
    len: usize,
    lo: Vec<u64>,
    hi: Vec<u64>,
}

impl fmt::Debug for PackedZ4Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits: String = (0..self.len).map(|i| char::from(b'0' + self.get(i).0)).collect();
        write!(f, "PackedZ4Vector[{digits}]")
    }
}

impl PackedZ4Vector {
    pub fn zeros(len: usize) -> Self {
        let w = words_for(len);
        PackedZ4Vector { len, lo: vec![0; w], hi: vec![0; w] }
    }

    pub fn from_digits(digits: &[Z4Digit]) -> Self {
        let mut v = PackedZ4Vector::zeros(digits.len());
        for (i, d) in digits.iter().enumerate() {
            v.lo[i / 64] |= (d.lo() as u64) << (i % 64);
            v.hi[i / 64] |= (d.hi() as u64) << (i % 64);
        }
        v
    }

    /// Builds a vector from raw values, rejecting anything outside 0..4.
    pub fn from_values(values: &[u8]) -> Result<Self> {
        let digits = values.iter().map(|&v| Z4Digit::new(v)).collect::<Result<Vec<_>>>()?;
        Ok(Self::from_digits(&digits))
    }

    /// Same digit repeated `len` times.
    pub fn splat(len: usize, d: Z4Digit) -> Self {
        let w = words_for(len);
        let fill = |bit: bool| if bit { u64::MAX } else { 0 };
        let mut v = PackedZ4Vector { len, lo: vec![fill(d.lo()); w], hi: vec![fill(d.hi()); w] };
        v.mask_tail();
        v
    }

    /// Builds a vector from planes; bits past `len` are cleared.
    pub fn from_planes(len: usize, lo: Vec<u64>, hi: Vec<u64>) -> Result<Self> {
        let w = words_for(len);
        if lo.len() != w || hi.len() != w {
            return dim_err(format!(
                "planes of {} and {} words cannot hold {len} digits ({w} words)",
                lo.len(),
                hi.len()
            ));
        }
        let mut v = PackedZ4Vector { len, lo, hi };
        v.mask_tail();
        Ok(v)
    }

    fn mask_tail(&mut self) {
        if let (Some(l), Some(h)) = (self.lo.last_mut(), self.hi.last_mut()) {
            let m = tail_mask(self.len);
            *l &= m;
            *h &= m;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn plane_lo(&self) -> &[u64] {
        &self.lo
    }

    pub fn plane_hi(&self) -> &[u64] {
        &self.hi
    }

    /// Panics if `i >= len`.
    pub fn get(&self, i: usize) -> Z4Digit {
        assert!(i < self.len, "index {i} out of range for length {}", self.len);
        let (w, b) = (i / 64, i % 64);
        Z4Digit::from_bits((self.hi[w] >> b) & 1 == 1, (self.lo[w] >> b) & 1 == 1)
    }

    /// Panics if `i >= len`.
    pub fn set(&mut self, i: usize, d: Z4Digit) {
        assert!(i < self.len, "index {i} out of range for length {}", self.len);
        let (w, b) = (i / 64, i % 64);
        self.lo[w] = (self.lo[w] & !(1 << b)) | ((d.lo() as u64) << b);
        self.hi[w] = (self.hi[w] & !(1 << b)) | ((d.hi() as u64) << b);
    }

    pub fn to_digits(&self) -> Vec<Z4Digit> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// Copies `len` digits starting at `start`; out-of-range positions read as zero.
    pub fn slice(&self, start: usize, len: usize) -> PackedZ4Vector {
        let mut out = PackedZ4Vector::zeros(len);
        let avail = self.len.saturating_sub(start).min(len);
        for i in 0..out.lo.len() {
            let pos = start + i * 64;
            let keep = match avail.saturating_sub(i * 64) {
                0 => 0,
                r if r >= 64 => u64::MAX,
                r => (1u64 << r) - 1,
            };
            out.lo[i] = extract_word(&self.lo, pos) & keep;
            out.hi[i] = extract_word(&self.hi, pos) & keep;
        }
        out
    }
}

/// The 64 bits of `words` starting at bit `pos`, zero beyond the end.
#[inline]
pub(crate) fn extract_word(words: &[u64], pos: usize) -> u64 {
    let (w, b) = (pos / 64, pos % 64);
    let first = words.get(w).copied().unwrap_or(0);
    if b == 0 {
        first
    } else {
        let second = words.get(w + 1).copied().unwrap_or(0);
        (first >> b) | (second << (64 - b))
    }
}

fn check_len(a: &PackedZ4Vector, b: &PackedZ4Vector) -> Result<()> {
    if a.len != b.len {
        return dim_err(format!("vector lengths differ: {} vs {}", a.len, b.len));
    }
    Ok(())
}

/// Lane-wise `(a*b + s) mod 4`.
pub fn ma_packed(
    a: &PackedZ4Vector,
    b: &PackedZ4Vector,
    s: &PackedZ4Vector,
) -> Result<PackedZ4Vector> {
    check_len(a, b)?;
    check_len(a, s)?;
    let mut out = PackedZ4Vector::zeros(a.len);
    for w in 0..a.lo.len() {
        let (c0, c1) = ma_planes(a.lo[w], a.hi[w], b.lo[w], b.hi[w], s.lo[w], s.hi[w]);
        out.lo[w] = c0;
        out.hi[w] = c1;
    }
    Ok(out)
}

/// Lane-wise mod-4 counters accumulated with carry-save plane additions.
#[derive(Clone, Copy, Default)]
struct LaneAccumulator {
    c0: u64,
    c1: u64,
}

impl LaneAccumulator {
    #[inline(always)]
    fn add_product(&mut self, u0: u64, u1: u64, v0: u64, v1: u64) {
        let p0 = u0 & v0;
        let p1 = (u1 & v0) ^ (u0 & v1);
        let carry = self.c0 & p0;
        self.c0 ^= p0;
        self.c1 ^= p1 ^ carry;
    }

    /// Sum of all lanes mod 4.
    #[inline(always)]
    fn reduce(self) -> u32 {
        (self.c0.count_ones() + 2 * self.c1.count_ones()) & 3
    }
}

/// Dot product of digit ranges `[start, start+len)` of two plane pairs,
/// added to `acc` mod 4. Bits beyond the slices read as zero.
#[inline]
pub(crate) fn dot_range(
    u_lo: &[u64],
    u_hi: &[u64],
    v_lo: &[u64],
    v_hi: &[u64],
    start: usize,
    len: usize,
    acc: u8,
) -> u8 {
    let mut lanes = LaneAccumulator::default();
    let mut off = 0;
    while off < len {
        let take = (len - off).min(64);
        let mask = if take == 64 { u64::MAX } else { (1u64 << take) - 1 };
        let pos = start + off;
        lanes.add_product(
            extract_word(u_lo, pos) & mask,
            extract_word(u_hi, pos) & mask,
            extract_word(v_lo, pos),
            extract_word(v_hi, pos),
        );
        off += take;
    }
    ((acc as u32 + lanes.reduce()) & 3) as u8
}

/// Dot product of word-aligned plane pairs (whole slices), plus `acc`.
#[inline]
pub(crate) fn dot_words(u_lo: &[u64], u_hi: &[u64], v_lo: &[u64], v_hi: &[u64], acc: u8) -> u8 {
    let mut lanes = LaneAccumulator::default();
    for w in 0..u_lo.len() {
        lanes.add_product(u_lo[w], u_hi[w], v_lo[w], v_hi[w]);
    }
    ((acc as u32 + lanes.reduce()) & 3) as u8
}

/// `(acc_in + sum u_i*v_i) mod 4`.
pub fn dot(u: &PackedZ4Vector, v: &PackedZ4Vector, acc_in: Z4Digit) -> Result<Z4Digit> {
    check_len(u, v)?;
    Ok(Z4Digit(dot_words(&u.lo, &u.hi, &v.lo, &v.hi, acc_in.0)))
}

/// Dot product fed through a unit of width `n`: both inputs are zero-padded
/// to a multiple of `n` and consumed `n` digits at a time, each chunk's
/// result becoming the next chunk's accumulator input.
pub fn dot_iterated(u: &[Z4Digit], v: &[Z4Digit], n: usize) -> Result<Z4Digit> {
    if u.len() != v.len() {
        return dim_err(format!("vector lengths differ: {} vs {}", u.len(), v.len()));
    }
    if n == 0 {
        return domain_err("chunk width must be at least 1");
    }
    let chunks = u.len().div_ceil(n);
    let mut w = Z4Digit::ZERO;
    let mut ut = vec![Z4Digit::ZERO; n];
    let mut vt = vec![Z4Digit::ZERO; n];
    for c in 0..chunks {
        for j in 0..n {
            let idx = c * n + j;
            ut[j] = u.get(idx).copied().unwrap_or(Z4Digit::ZERO);
            vt[j] = v.get(idx).copied().unwrap_or(Z4Digit::ZERO);
        }
        w = dot(&PackedZ4Vector::from_digits(&ut), &PackedZ4Vector::from_digits(&vt), w)?;
    }
    Ok(w)
}

/// Packed form of [`dot_iterated`].
pub fn dot_chunked(u: &PackedZ4Vector, v: &PackedZ4Vector, n: usize) -> Result<Z4Digit> {
    check_len(u, v)?;
    if n == 0 {
        return domain_err("chunk width must be at least 1");
    }
    let mut acc = 0u8;
    let mut start = 0;
    while start < u.len {
        acc = dot_range(&u.lo, &u.hi, &v.lo, &v.hi, start, n, acc);
        start += n;
    }
    Ok(Z4Digit(acc))
}

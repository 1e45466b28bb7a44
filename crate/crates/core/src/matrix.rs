//! Dense Z4 matrices stored as row-major bit-planes.

use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{dim_err, domain_err, Result};
use crate::z4core::{dot_range, dot_words, extract_word, PackedZ4Vector, Z4Digit, DEFAULT_CHUNK};

/// Default output tile edge.
pub const DEFAULT_BLOCK: usize = 20;
/// Default container depth (activations per tile iteration).
pub const DEFAULT_DEPTH: usize = 32;

/// A `rows x cols` matrix over Z4.
///
/// Each row occupies `stride` words in both planes and starts on a word
/// boundary. Bits past `cols` in a row's last word are zero, so derived
/// equality compares logical contents.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Z4Matrix {
    rows: usize,
    cols: usize,
    stride: usize,
    lo: Vec<u64>,
    hi: Vec<u64>,
}

/// Tiling parameters for [`Z4Matrix::mul_blocked`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockParams {
    /// Output tile edge.
    pub block: usize,
    /// Chunk width of the dot-product unit.
    pub n: usize,
    /// Container depth; a container holds `n * depth` digits of one row.
    pub depth: usize,
}

impl Default for BlockParams {
    fn default() -> Self {
        BlockParams { block: DEFAULT_BLOCK, n: DEFAULT_CHUNK, depth: DEFAULT_DEPTH }
    }
}

impl BlockParams {
    pub fn new(block: usize, n: usize, depth: usize) -> Result<Self> {
        let p = BlockParams { block, n, depth };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.block == 0 || self.n == 0 || self.depth == 0 {
            return domain_err(format!(
                "block parameters must be positive (block={}, n={}, depth={})",
                self.block, self.n, self.depth
            ));
        }
        Ok(())
    }

    /// `k` rounded up to a whole number of tiles.
    pub fn padded(&self, k: usize) -> usize {
        k.div_ceil(self.block) * self.block
    }

    /// Whether one container can hold a full row of a `k x k` matrix.
    pub fn container_fits(&self, k: usize) -> bool {
        self.n * self.depth >= k
    }
}

#[inline]
fn lane_add(a0: u64, a1: u64, b0: u64, b1: u64) -> (u64, u64) {
    (a0 ^ b0, a1 ^ b1 ^ (a0 & b0))
}

impl Z4Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = cols.div_ceil(64);
        Z4Matrix { rows, cols, stride, lo: vec![0; rows * stride], hi: vec![0; rows * stride] }
    }

    pub fn identity(k: usize) -> Self {
        let mut m = Z4Matrix::zeros(k, k);
        for i in 0..k {
            m.put(i, i, Z4Digit::ONE);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Z4Digit) -> Self {
        let mut m = Z4Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.put(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a matrix from rows of raw values; all rows must have equal length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Z4Matrix::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return dim_err(format!("row {i} has {} entries, expected {cols}", r.len()));
            }
            for (j, &v) in r.iter().enumerate() {
                m.put(i, j, Z4Digit::new(v)?);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    fn check_index(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.rows || j >= self.cols {
            return dim_err(format!(
                "index ({i},{j}) out of range for {}x{} matrix",
                self.rows, self.cols
            ));
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Result<Z4Digit> {
        self.check_index(i, j)?;
        Ok(self.at(i, j))
    }

    pub fn set(&mut self, i: usize, j: usize, v: Z4Digit) -> Result<()> {
        self.check_index(i, j)?;
        self.put(i, j, v);
        Ok(())
    }

    /// Unchecked read; panics on out-of-range word access only.
    #[inline]
    pub(crate) fn at(&self, i: usize, j: usize) -> Z4Digit {
        let w = i * self.stride + j / 64;
        let b = j % 64;
        Z4Digit::from_bits((self.hi[w] >> b) & 1 == 1, (self.lo[w] >> b) & 1 == 1)
    }

    #[inline]
    pub(crate) fn put(&mut self, i: usize, j: usize, v: Z4Digit) {
        let w = i * self.stride + j / 64;
        let b = j % 64;
        self.lo[w] = (self.lo[w] & !(1 << b)) | ((v.lo() as u64) << b);
        self.hi[w] = (self.hi[w] & !(1 << b)) | ((v.hi() as u64) << b);
    }

    /// Low and high plane words of row `i`.
    pub fn row_planes(&self, i: usize) -> (&[u64], &[u64]) {
        let r = i * self.stride..(i + 1) * self.stride;
        (&self.lo[r.clone()], &self.hi[r])
    }

    pub fn row(&self, i: usize) -> PackedZ4Vector {
        let (lo, hi) = self.row_planes(i);
        PackedZ4Vector::from_planes(self.cols, lo.to_vec(), hi.to_vec())
            .expect("row planes have the row stride")
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.at(i, j).value()).collect()).collect()
    }

    pub fn transpose(&self) -> Z4Matrix {
        let mut t = Z4Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.at(i, j);
                if v != Z4Digit::ZERO {
                    t.put(j, i, v);
                }
            }
        }
        t
    }

    pub fn is_zero(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|&w| w == 0)
    }

    pub fn is_identity(&self) -> bool {
        self.is_square() && *self == Z4Matrix::identity(self.rows)
    }

    /// The `rows x cols` window at `(r0, c0)`; positions outside `self` read as zero.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Z4Matrix {
        let mut out = Z4Matrix::zeros(rows, cols);
        let live_cols = self.cols.saturating_sub(c0).min(cols);
        for i in 0..rows.min(self.rows.saturating_sub(r0)) {
            let (slo, shi) = self.row_planes(r0 + i);
            let base = i * out.stride;
            for w in 0..out.stride {
                let keep = match live_cols.saturating_sub(w * 64) {
                    0 => 0,
                    r if r >= 64 => u64::MAX,
                    r => (1u64 << r) - 1,
                };
                out.lo[base + w] = extract_word(slo, c0 + w * 64) & keep;
                out.hi[base + w] = extract_word(shi, c0 + w * 64) & keep;
            }
        }
        out
    }

    /// Copies `src` into `self` with its top-left corner at `(r0, c0)`,
    /// clipping whatever falls outside.
    pub fn paste(&mut self, r0: usize, c0: usize, src: &Z4Matrix) {
        let rows = src.rows.min(self.rows.saturating_sub(r0));
        let cols = src.cols.min(self.cols.saturating_sub(c0));
        if cols == 0 {
            return;
        }
        if c0.is_multiple_of(64) {
            let (w0, nw) = (c0 / 64, cols.div_ceil(64));
            for i in 0..rows {
                let (slo, shi) = src.row_planes(i);
                let base = (r0 + i) * self.stride + w0;
                for w in 0..nw {
                    let keep = match cols - w * 64 {
                        r if r >= 64 => u64::MAX,
                        r => (1u64 << r) - 1,
                    };
                    let d = &mut self.lo[base + w];
                    *d = (*d & !keep) | (slo[w] & keep);
                    let d = &mut self.hi[base + w];
                    *d = (*d & !keep) | (shi[w] & keep);
                }
            }
        } else {
            for i in 0..rows {
                for j in 0..cols {
                    self.put(r0 + i, c0 + j, src.at(i, j));
                }
            }
        }
    }

    /// Top-left `rows x cols` corner, zero-extended where `self` is smaller.
    pub fn resized(&self, rows: usize, cols: usize) -> Z4Matrix {
        self.submatrix(0, 0, rows, cols)
    }

    fn check_same_shape(&self, other: &Z4Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return dim_err(format!(
                "shapes differ: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Z4Matrix) -> Result<Z4Matrix> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.add_assign(other);
        Ok(out)
    }

    pub fn sub(&self, other: &Z4Matrix) -> Result<Z4Matrix> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.sub_assign(other);
        Ok(out)
    }

    /// Shapes must already match.
    pub(crate) fn add_assign(&mut self, other: &Z4Matrix) {
        for w in 0..self.lo.len() {
            (self.lo[w], self.hi[w]) = lane_add(self.lo[w], self.hi[w], other.lo[w], other.hi[w]);
        }
    }

    /// Shapes must already match. `-b` keeps the low bit and flips the high
    /// bit wherever the low bit is set.
    pub(crate) fn sub_assign(&mut self, other: &Z4Matrix) {
        for w in 0..self.lo.len() {
            let (n0, n1) = (other.lo[w], other.hi[w] ^ other.lo[w]);
            (self.lo[w], self.hi[w]) = lane_add(self.lo[w], self.hi[w], n0, n1);
        }
    }

    /// Writes `a + b` into `self` without reallocating. Shapes must match.
    pub(crate) fn assign_sum(&mut self, a: &Z4Matrix, b: &Z4Matrix) {
        self.lo.copy_from_slice(&a.lo);
        self.hi.copy_from_slice(&a.hi);
        self.add_assign(b);
    }

    /// Writes `a - b` into `self` without reallocating. Shapes must match.
    pub(crate) fn assign_diff(&mut self, a: &Z4Matrix, b: &Z4Matrix) {
        self.lo.copy_from_slice(&a.lo);
        self.hi.copy_from_slice(&a.hi);
        self.sub_assign(b);
    }

    pub fn neg(&self) -> Z4Matrix {
        Z4Matrix::zeros(self.rows, self.cols).sub(self).expect("same shape")
    }

    /// Textbook product: every entry is the packed dot product of a row of
    /// `self` with a column of `other` (a row of its transpose).
    pub fn mul_naive(&self, other: &Z4Matrix) -> Result<Z4Matrix> {
        if self.cols != other.rows {
            return dim_err(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let bt = other.transpose();
        let mut out = Z4Matrix::zeros(self.rows, other.cols);
        let stride = out.stride;
        if stride == 0 || self.rows == 0 {
            return Ok(out);
        }
        out.lo
            .par_chunks_mut(stride)
            .zip(out.hi.par_chunks_mut(stride))
            .enumerate()
            .for_each(|(i, (olo, ohi))| {
                let (alo, ahi) = self.row_planes(i);
                for j in 0..bt.rows {
                    let (blo, bhi) = bt.row_planes(j);
                    let c = dot_words(alo, ahi, blo, bhi, 0) as u64;
                    olo[j / 64] |= (c & 1) << (j % 64);
                    ohi[j / 64] |= (c >> 1) << (j % 64);
                }
            });
        Ok(out)
    }

    /// Tiled product mirroring the hardware dataflow.
    ///
    /// Both operands are zero-padded to a multiple of `p.block`, each
    /// `block x block` output tile is produced from `block` rows of `A` and
    /// `block` columns of `B`, and every tile entry is accumulated `p.n`
    /// digits at a time with the running sum fed back as the next chunk's
    /// accumulator. The result is cut back to `k x k`.
    ///
    /// The original pseudocode sizes the padded matrices as `kappa * n` while
    /// its loops run to `20 * kappa` with `kappa = ceil(k / 20)`; the padding
    /// here follows the loops and uses the tile edge, treating `n` in the
    /// size declaration as a typo.
    pub fn mul_blocked(&self, other: &Z4Matrix, p: BlockParams) -> Result<Z4Matrix> {
        p.validate()?;
        if !self.is_square() || self.rows != other.rows || self.cols != other.cols {
            return dim_err(format!(
                "blocked multiplication needs equal square operands, got {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let k = self.rows;
        let padded = p.padded(k);
        let a = self.resized(padded, padded);
        let bt = other.resized(padded, padded).transpose();
        let mut c = Z4Matrix::zeros(padded, padded);
        let stride = c.stride;
        if padded == 0 {
            return Ok(c);
        }
        let band = stride * p.block;
        c.lo.par_chunks_mut(band).zip(c.hi.par_chunks_mut(band)).enumerate().for_each(
            |(ti, (olo, ohi))| {
                for tj in 0..padded / p.block {
                    tile_product(&a, &bt, ti * p.block, tj * p.block, p, stride, olo, ohi);
                }
            },
        );
        Ok(c.resized(k, k))
    }

    /// `self^e` by left-to-right square-and-multiply; `e = 0` gives the identity.
    pub fn matpow(&self, e: &BigUint) -> Result<Z4Matrix> {
        if !self.is_square() {
            return dim_err(format!("power of a non-square {}x{} matrix", self.rows, self.cols));
        }
        let mut acc = Z4Matrix::identity(self.rows);
        if e.is_zero() {
            return Ok(acc);
        }
        for bit in (0..e.bits()).rev() {
            acc = acc.mul_naive(&acc)?;
            if e.bit(bit) {
                acc = acc.mul_naive(self)?;
            }
        }
        Ok(acc)
    }
}

/// One output tile: rows `r0..r0+block` of `a` against rows `c0..c0+block`
/// of `bt`, written into a band of output rows starting at `r0`.
#[allow(clippy::too_many_arguments)]
fn tile_product(
    a: &Z4Matrix,
    bt: &Z4Matrix,
    r0: usize,
    c0: usize,
    p: BlockParams,
    stride: usize,
    olo: &mut [u64],
    ohi: &mut [u64],
) {
    let len = a.cols;
    for r in 0..p.block {
        let (alo, ahi) = a.row_planes(r0 + r);
        for cc in 0..p.block {
            let (blo, bhi) = bt.row_planes(c0 + cc);
            let mut acc = 0u8;
            let mut start = 0;
            while start < len {
                acc = dot_range(alo, ahi, blo, bhi, start, p.n, acc);
                start += p.n;
            }
            let j = c0 + cc;
            let w = r * stride + j / 64;
            olo[w] |= ((acc & 1) as u64) << (j % 64);
            ohi[w] |= ((acc >> 1) as u64) << (j % 64);
        }
    }
}

impl fmt::Debug for Z4Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Z4Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let line: String = (0..self.cols).map(|j| char::from(b'0' + self.at(i, j).value())).collect();
            writeln!(f, "  {line}")?;
        }
        write!(f, "]")
    }
}

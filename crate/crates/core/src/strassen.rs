//! Seven-product block recursion (Strassen) over Z4.
//!
//! With both operands split into 2x2 blocks:
//!
//! ```text
//! D1 = A11 (B12 - B22)          C11 = -D2 + D4 + D5 + D6
//! D2 = (A11 + A12) B22          C12 = D1 + D2
//! D3 = (A21 + A22) B11          C21 = D3 + D4
//! D4 = A22 (B21 - B11)          C22 = D1 - D3 + D5 - D7
//! D5 = (A11 + A22)(B11 + B22)
//! D6 = (A12 - A22)(B21 + B22)
//! D7 = (A11 - A21)(B11 + B12)
//! ```
//!
//! Subtraction in Z4 is exact, so no sign bookkeeping is needed beyond
//! additive inverses.

use crate::error::{dim_err, domain_err, Result};
use crate::matrix::{BlockParams, Z4Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StrassenConfig {
    /// Edge at or below which recursion stops.
    pub threshold: usize,
    /// Base-case multiplier: blocked with these parameters, or naive if `None`.
    pub base: Option<BlockParams>,
}

impl StrassenConfig {
    pub fn new(threshold: usize) -> Result<Self> {
        if threshold == 0 {
            return domain_err("Strassen threshold must be at least 1");
        }
        Ok(StrassenConfig { threshold, base: None })
    }

    pub fn with_base(mut self, base: BlockParams) -> Self {
        self.base = Some(base);
        self
    }

    /// Smallest `threshold * 2^m` that is at least `k`, and `m`.
    pub fn padded(&self, k: usize) -> (usize, usize) {
        let mut size = self.threshold;
        let mut levels = 0;
        while size < k {
            size *= 2;
            levels += 1;
        }
        (size, levels)
    }
}

/// Multiplication counts gathered during one recursive product.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecursionStats {
    /// Sub-products issued at each recursion depth (depth 0 is the top split).
    pub products_per_level: Vec<u64>,
    /// Calls into the base-case multiplier.
    pub base_products: u64,
}

struct Scratch {
    left: Z4Matrix,
    right: Z4Matrix,
}

fn check_operands(a: &Z4Matrix, b: &Z4Matrix) -> Result<()> {
    if !a.is_square() || a.rows() != b.rows() || a.cols() != b.cols() {
        return dim_err(format!(
            "recursive multiplication needs equal square operands, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        ));
    }
    Ok(())
}

pub fn mul_strassen(a: &Z4Matrix, b: &Z4Matrix, cfg: &StrassenConfig) -> Result<Z4Matrix> {
    Ok(mul_strassen_with_stats(a, b, cfg)?.0)
}

/// Pads to `threshold * 2^m`, recurses with seven products per split and
/// truncates the result back to `k x k`.
pub fn mul_strassen_with_stats(
    a: &Z4Matrix,
    b: &Z4Matrix,
    cfg: &StrassenConfig,
) -> Result<(Z4Matrix, RecursionStats)> {
    run(a, b, cfg, Variant::Seven)
}

/// Same recursion with the eight textbook block products, as a control for
/// the product counters.
pub fn mul_recursive_eight(
    a: &Z4Matrix,
    b: &Z4Matrix,
    cfg: &StrassenConfig,
) -> Result<(Z4Matrix, RecursionStats)> {
    run(a, b, cfg, Variant::Eight)
}

#[derive(Clone, Copy)]
enum Variant {
    Seven,
    Eight,
}

fn run(
    a: &Z4Matrix,
    b: &Z4Matrix,
    cfg: &StrassenConfig,
    variant: Variant,
) -> Result<(Z4Matrix, RecursionStats)> {
    check_operands(a, b)?;
    if cfg.threshold == 0 {
        return domain_err("Strassen threshold must be at least 1");
    }
    let k = a.rows();
    let mut stats = RecursionStats::default();
    if k == 0 {
        return Ok((Z4Matrix::zeros(0, 0), stats));
    }
    let (size, levels) = cfg.padded(k);
    stats.products_per_level = vec![0; levels];
    let mut scratch: Vec<Scratch> = (1..=levels)
        .map(|l| {
            let h = size >> l;
            Scratch { left: Z4Matrix::zeros(h, h), right: Z4Matrix::zeros(h, h) }
        })
        .collect();
    let ap = a.resized(size, size);
    let bp = b.resized(size, size);
    let c = recurse(&ap, &bp, cfg, variant, &mut scratch, 0, &mut stats)?;
    Ok((c.resized(k, k), stats))
}

fn recurse(
    a: &Z4Matrix,
    b: &Z4Matrix,
    cfg: &StrassenConfig,
    variant: Variant,
    scratch: &mut [Scratch],
    depth: usize,
    stats: &mut RecursionStats,
) -> Result<Z4Matrix> {
    let Some((lvl, deeper)) = scratch.split_first_mut() else {
        stats.base_products += 1;
        return match cfg.base {
            Some(p) => a.mul_blocked(b, p),
            None => a.mul_naive(b),
        };
    };
    let n = a.rows();
    let h = n / 2;
    let q = |m: &Z4Matrix, i: usize, j: usize| m.submatrix(i * h, j * h, h, h);
    let (a11, a12, a21, a22) = (q(a, 0, 0), q(a, 0, 1), q(a, 1, 0), q(a, 1, 1));
    let (b11, b12, b21, b22) = (q(b, 0, 0), q(b, 0, 1), q(b, 1, 0), q(b, 1, 1));

    let mut sub = |x: &Z4Matrix, y: &Z4Matrix, deeper: &mut [Scratch]| {
        stats.products_per_level[depth] += 1;
        recurse(x, y, cfg, variant, deeper, depth + 1, stats)
    };

    let (c11, c12, c21, c22) = match variant {
        Variant::Seven => {
            let Scratch { left, right } = lvl;

            right.assign_diff(&b12, &b22);
            let d1 = sub(&a11, right, &mut *deeper)?;
            let mut c12 = d1.clone();
            let mut c22 = d1;

            left.assign_sum(&a11, &a12);
            let d2 = sub(left, &b22, &mut *deeper)?;
            let mut c11 = d2.neg();
            c12.add_assign(&d2);

            left.assign_sum(&a21, &a22);
            let d3 = sub(left, &b11, &mut *deeper)?;
            c22.sub_assign(&d3);
            let mut c21 = d3;

            right.assign_diff(&b21, &b11);
            let d4 = sub(&a22, right, &mut *deeper)?;
            c11.add_assign(&d4);
            c21.add_assign(&d4);

            left.assign_sum(&a11, &a22);
            right.assign_sum(&b11, &b22);
            let d5 = sub(left, right, &mut *deeper)?;
            c11.add_assign(&d5);
            c22.add_assign(&d5);

            left.assign_diff(&a12, &a22);
            right.assign_sum(&b21, &b22);
            let d6 = sub(left, right, &mut *deeper)?;
            c11.add_assign(&d6);

            left.assign_diff(&a11, &a21);
            right.assign_sum(&b11, &b12);
            let d7 = sub(left, right, &mut *deeper)?;
            c22.sub_assign(&d7);

            (c11, c12, c21, c22)
        }
        Variant::Eight => {
            let mut block = |x1: &Z4Matrix, y1: &Z4Matrix, x2: &Z4Matrix, y2: &Z4Matrix| {
                let mut c = sub(x1, y1, &mut *deeper)?;
                c.add_assign(&sub(x2, y2, &mut *deeper)?);
                Ok::<_, crate::Error>(c)
            };
            (
                block(&a11, &b11, &a12, &b21)?,
                block(&a11, &b12, &a12, &b22)?,
                block(&a21, &b11, &a22, &b21)?,
                block(&a21, &b12, &a22, &b22)?,
            )
        }
    };

    let mut c = Z4Matrix::zeros(n, n);
    c.paste(0, 0, &c11);
    c.paste(0, h, &c12);
    c.paste(h, 0, &c21);
    c.paste(h, h, &c22);
    Ok(c)
}

//! Dense complex linear-algebra helpers on top of `nalgebra`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMat = DMatrix<Complex64>;

/// Relative singular-value tolerance for rank decisions on probing matrices.
pub const RANK_EPS: f64 = 1e-10;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `exp(j 2 pi num / den)`, reducing `num` modulo `den` first so large
/// arguments keep full precision.
pub fn unit_phase(num: i128, den: u64) -> Complex64 {
    let den_i = den as i128;
    let reduced = num.rem_euclid(den_i);
    Complex64::from_polar(1.0, TAU * reduced as f64 / den as f64)
}

/// Table of `exp(j 2 pi k / n)` for `k = 0..n`.
pub fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n).map(|k| unit_phase(k as i128, n as u64)).collect()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Singular values in descending order. Empty for matrices with a zero
/// dimension.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Number of singular values strictly above `rel_tol * sigma_max`.
pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    rank_from_singular_values(&singular_values(m), rel_tol)
}

pub(crate) fn rank_from_singular_values(sv: &[f64], rel_tol: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

pub fn select_columns(m: &CMat, cols: &[usize]) -> CMat {
    CMat::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

pub fn select_rows(m: &CMat, rows: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Minimum-norm least-squares solution of `a x = b`, treating singular values
/// below `rel_tol * sigma_max` as zero.
pub fn lstsq(a: &CMat, b: &CMat, rel_tol: f64) -> CMat {
    debug_assert_eq!(a.nrows(), b.nrows());
    if a.ncols() == 0 || a.nrows() == 0 {
        return CMat::zeros(a.ncols(), b.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return CMat::zeros(a.ncols(), b.ncols());
    }
    svd.solve(b, rel_tol * smax)
        .expect("u and v_t were requested")
}

/// Orthonormal basis (as columns) of the null space of `a`, using the
/// relative singular-value threshold `rel_tol`.
pub fn null_space(a: &CMat, rel_tol: f64) -> CMat {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return CMat::zeros(0, 0);
    }
    // Pad to at least square so the SVD returns a complete right basis.
    let padded_rows = rows.max(cols);
    let mut padded = CMat::zeros(padded_rows, cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("v_t was requested");
    let sv = &svd.singular_values;
    let smax = sv.max();
    let null_rows: Vec<usize> = (0..sv.len())
        .filter(|&i| smax == 0.0 || sv[i] <= rel_tol * smax)
        .collect();
    CMat::from_fn(cols, null_rows.len(), |i, j| v_t[(null_rows[j], i)].conj())
}

/// Leading `k` left singular vectors of `m` together with all singular values.
pub(crate) fn leading_left_singular(m: &CMat, k: usize) -> (CMat, Vec<f64>) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (CMat::zeros(m.nrows(), 0), Vec::new());
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("u was requested");
    let k = k.min(u.ncols());
    (
        u.columns(0, k).into_owned(),
        svd.singular_values.iter().copied().collect(),
    )
}

/// `n choose k` without overflow for the sizes used here.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Lexicographic iterator over the `k`-subsets of `0..n`.
pub struct Combinations {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.current[i] < self.n - k + i {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn combinations_are_lexicographic_and_complete() {
        let all: Vec<_> = Combinations::new(5, 3).collect();
        assert_eq!(all.len() as u128, binomial(5, 3));
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[1], vec![0, 1, 3]);
        assert_eq!(all.last().unwrap(), &vec![2, 3, 4]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(Combinations::new(3, 0).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(25, 5), 53130);
        assert_eq!(binomial(361, 0), 1);
        assert_eq!(binomial(4, 7), 0);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = CMat::from_row_slice(2, 3, &[c(1.0, 0.0), c(0.0, 1.0), c(1.0, 1.0), c(2.0, 0.0), c(0.0, 0.0), c(1.0, -1.0)]);
        let n = null_space(&a, RANK_EPS);
        assert_eq!(n.shape(), (3, 1));
        assert!(frobenius(&(&a * &n)) < 1e-12);
        assert!((frobenius(&n) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lstsq_handles_degenerate_inputs() {
        let b = CMat::from_element(3, 2, c(1.0, 0.0));
        let x = lstsq(&CMat::zeros(3, 0), &b, 1e-12);
        assert_eq!(x.shape(), (0, 2));
        let x = lstsq(&CMat::zeros(3, 2), &b, 1e-12);
        assert_eq!(x, CMat::zeros(2, 2));
    }

    #[test]
    fn unit_phase_reduces_arguments() {
        let a = unit_phase(7, 5);
        let b = unit_phase(2, 5);
        assert!((a - b).norm() < 1e-15);
        assert!((unit_phase(-1, 4) - c(0.0, -1.0)).norm() < 1e-15);
    }
}

//! Exhaustive minimum-support search.

use nalgebra::DVector;
use num_complex::Complex64;

use super::{check_shapes, failed, finish, Diagnostics, RecoveryResult, SolverOptions, SupportSolver};
use crate::linalg::{binomial, frobenius, singular_values, CMat, RANK_EPS};
use crate::{Error, Result};

/// Largest number of supports of the top cardinality the oracle will visit.
pub const ORACLE_BUDGET: u128 = 10_000_000;

/// Smallest support `Gamma` with `||Z - A_Gamma S||_F <= tol ||Z||_F` for some
/// `S`, by enumeration in order of increasing size. Among supports of the
/// minimal size the lexicographically first one is returned, and
/// `Diagnostics::unique` records whether it was the only one.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleSolver;

impl SupportSolver for OracleSolver {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn solve(&self, z: &CMat, a: &CMat, opts: &SolverOptions) -> Result<RecoveryResult> {
        opts.validate(a.ncols())?;
        let max = opts.oracle_max_cardinality.unwrap_or(z.nrows());
        search(z, a, max, opts.oracle_tol, opts.reconstruction_tol)
    }
}

/// Depth-first walk over the `k`-subsets in lexicographic order, keeping an
/// orthonormal basis of the chosen columns and the projected residual so each
/// node costs one Gram-Schmidt step.
struct Walk<'a> {
    a: &'a CMat,
    k: usize,
    tol_abs: f64,
    norms: Vec<f64>,
    basis: Vec<DVector<Complex64>>,
    residuals: Vec<CMat>,
    current: Vec<usize>,
    first: Option<Vec<usize>>,
    count: usize,
}

impl Walk<'_> {
    fn visit(&mut self, start: usize) {
        let depth = self.current.len();
        let residual_norm = frobenius(self.residuals.last().expect("root residual"));
        if depth == self.k {
            if residual_norm <= self.tol_abs {
                self.count += 1;
                if self.first.is_none() {
                    self.first = Some(self.current.clone());
                }
            }
            return;
        }
        let n = self.a.ncols();
        for j in start..=n - (self.k - depth) {
            let mut v = self.a.column(j).clone_owned();
            // classical Gram-Schmidt, applied twice for stability
            for _ in 0..2 {
                for q in &self.basis {
                    let coef = q.dotc(&v);
                    v -= q * coef;
                }
            }
            let vn = v.norm();
            let extends = vn > RANK_EPS * self.norms[j].max(f64::MIN_POSITIVE);
            let next = {
                let r = self.residuals.last().expect("root residual");
                if extends {
                    let q = v / Complex64::new(vn, 0.0);
                    let proj = &q * (q.adjoint() * r);
                    let next = r - proj;
                    self.basis.push(q);
                    next
                } else {
                    r.clone()
                }
            };
            self.residuals.push(next);
            self.current.push(j);
            self.visit(j + 1);
            self.current.pop();
            self.residuals.pop();
            if extends {
                self.basis.pop();
            }
        }
    }
}

pub(crate) fn search(z: &CMat, a: &CMat, max_cardinality: usize, tol: f64, recon_tol: f64) -> Result<RecoveryResult> {
    let l = check_shapes(z, a)?;
    let n = a.ncols();
    let max = max_cardinality.min(n);
    let needed = binomial(n, max);
    if needed > ORACLE_BUDGET {
        return Err(Error::BudgetExceeded {
            needed,
            budget: ORACLE_BUDGET,
        });
    }
    let opts = SolverOptions {
        reconstruction_tol: recon_tol,
        ..SolverOptions::default()
    };
    let mut diagnostics = Diagnostics {
        singular_values: singular_values(z),
        ..Diagnostics::default()
    };
    let z_norm = frobenius(z);
    if z_norm == 0.0 {
        diagnostics.unique = Some(true);
        return finish(z, a, l, Vec::new(), 0, &opts, diagnostics);
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    for k in 1..=max {
        let mut walk = Walk {
            a,
            k,
            tol_abs: tol * z_norm,
            norms: norms.clone(),
            basis: Vec::with_capacity(k),
            residuals: vec![z.clone()],
            current: Vec::with_capacity(k),
            first: None,
            count: 0,
        };
        walk.visit(0);
        diagnostics.iterations += binomial(n, k) as usize;
        if let Some(first) = walk.first {
            diagnostics.unique = Some(walk.count == 1);
            if walk.count > 1 {
                diagnostics
                    .warnings
                    .push(format!("{} supports of size {k} explain the measurements", walk.count));
            }
            return finish(z, a, l, first, k, &opts, diagnostics);
        }
    }
    let reason = format!("no support of at most {max} columns explains the measurements");
    Ok(failed(l, z.ncols(), 0, reason, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{lstsq, null_space, select_columns, Combinations};
    use crate::model::{complex_normal, random_support, GridParams, SupportSet};
    use crate::probing::{build_matrix, column_submatrix, random_disc};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Plain enumeration with a fresh least-squares solve per subset.
    fn brute_force(z: &CMat, a: &CMat, max: usize, tol: f64) -> Option<(Vec<usize>, usize)> {
        let zn = frobenius(z);
        for k in 1..=max {
            let hits: Vec<Vec<usize>> = Combinations::new(a.ncols(), k)
                .filter(|cols| {
                    let sel = select_columns(a, cols);
                    let x = lstsq(&sel, z, 1e-12);
                    frobenius(&(z - sel * x)) <= tol * zn
                })
                .collect();
            if let Some(first) = hits.first() {
                return Some((first.clone(), hits.len()));
            }
        }
        None
    }

    #[test]
    fn zero_input_gives_empty_unique_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = build_matrix(&random_disc(5, &mut rng).unwrap());
        let r = search(&CMat::zeros(5, 2), a.matrix(), 5, 1e-9, 1e-10).unwrap();
        assert!(r.support.is_empty());
        assert_eq!(r.diagnostics.unique, Some(true));
    }

    #[test]
    fn recovers_small_generic_instance_and_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let a = build_matrix(&random_disc(5, &mut rng).unwrap());
        let grid = GridParams::new(5, 1, 2).unwrap();
        for _ in 0..5 {
            let support = random_support(&grid, 3, &mut rng).unwrap();
            let s = CMat::from_fn(3, 2, |_, _| complex_normal(&mut rng));
            let z = column_submatrix(&a, &support) * &s;
            let r = search(&z, a.matrix(), 5, 1e-9, 1e-10).unwrap();
            assert_eq!(r.support, support);
            assert_eq!(r.diagnostics.unique, Some(true));
            assert!(frobenius(&(&r.s_hat - &s)) < 1e-8);
            let (bf, count) = brute_force(&z, a.matrix(), 5, 1e-9).unwrap();
            assert_eq!(bf, support.indices());
            assert_eq!(count, 1);
        }
    }

    #[test]
    fn detects_two_minimal_supports() {
        // a null vector of 4 columns of a 3-row dictionary splits into two
        // disjoint 2-column representations of the same measurement
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let a = build_matrix(&random_disc(3, &mut rng).unwrap());
        let cols = [0usize, 4, 5, 7];
        let null = null_space(&select_columns(a.matrix(), &cols), RANK_EPS);
        assert_eq!(null.ncols(), 1);
        let left = select_columns(a.matrix(), &cols[..2]) * null.rows(0, 2);
        let z = left;
        let r = search(&z, a.matrix(), 3, 1e-9, 1e-10).unwrap();
        let (bf, count) = brute_force(&z, a.matrix(), 3, 1e-9).unwrap();
        assert_eq!(r.support.indices(), bf);
        assert_eq!(r.diagnostics.unique, Some(count == 1));
        assert!(count >= 2);
        assert_eq!(r.support.len(), 2);
        assert!(r.support != SupportSet::empty(3));
    }

    #[test]
    fn budget_guard_rejects_large_searches() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let a = build_matrix(&random_disc(11, &mut rng).unwrap());
        let z = a.matrix().columns(0, 1).into_owned();
        assert!(matches!(
            search(&z, a.matrix(), 11, 1e-9, 1e-10),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}

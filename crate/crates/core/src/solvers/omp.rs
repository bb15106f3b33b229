//! Multiple-measurement-vector orthogonal matching pursuit.

use super::{check_shapes, finish, fit, Diagnostics, RecoveryResult, SolverOptions, SupportSolver};
use crate::linalg::{frobenius, singular_values, CMat};
use crate::Result;

/// Greedily adds the column with the largest normalised correlation
/// `||a_j^H R||_2 / ||a_j||` with the residual, refitting all coefficients by
/// least squares after every pick.
#[derive(Clone, Copy, Debug, Default)]
pub struct OmpSolver;

/// `||a_j^H R|| / ||a_j||` for every column, via the Gram matrix `R R^H`.
fn correlations(a: &CMat, residual: &CMat, norms: &[f64]) -> Vec<f64> {
    let gram = residual * residual.adjoint();
    let ga = &gram * a;
    (0..a.ncols())
        .map(|j| {
            if norms[j] == 0.0 {
                return 0.0;
            }
            let q = a.column(j).dotc(&ga.column(j)).re.max(0.0);
            q.sqrt() / norms[j]
        })
        .collect()
}

impl SupportSolver for OmpSolver {
    fn name(&self) -> &'static str {
        "omp"
    }

    fn solve(&self, z: &CMat, a: &CMat, opts: &SolverOptions) -> Result<RecoveryResult> {
        let l = check_shapes(z, a)?;
        opts.validate(a.ncols())?;
        let rows = z.nrows();
        let mut diagnostics = Diagnostics {
            singular_values: singular_values(z),
            ..Diagnostics::default()
        };
        let limit = match opts.omp_stop.max_support {
            Some(k) => {
                if k > rows {
                    diagnostics
                        .warnings
                        .push(format!("max_support {k} exceeds the {rows} rows"));
                }
                k.min(a.ncols())
            }
            None => rows.min(a.ncols()),
        };
        let norms: Vec<f64> = (0..a.ncols()).map(|j| a.column(j).norm()).collect();
        let z_norm = frobenius(z);
        let stop = opts.omp_stop.residual_tol * z_norm;

        let mut chosen: Vec<usize> = Vec::new();
        let mut residual = z.clone();
        let mut residual_norm = z_norm;
        diagnostics.residual_history.push(residual_norm);
        while residual_norm > stop && chosen.len() < limit {
            let scores = correlations(a, &residual, &norms);
            let mut best: Option<(usize, f64)> = None;
            for (j, &s) in scores.iter().enumerate() {
                if chosen.contains(&j) {
                    continue;
                }
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((j, s));
                }
            }
            let Some((j, score)) = best else { break };
            if score == 0.0 {
                break;
            }
            debug_assert!(!chosen.contains(&j));
            chosen.push(j);
            let mut sorted = chosen.clone();
            sorted.sort_unstable();
            let (coeffs, _) = fit(z, a, &sorted, opts.reconstruction_tol);
            residual = z - crate::linalg::select_columns(a, &sorted) * coeffs;
            residual_norm = frobenius(&residual);
            diagnostics.residual_history.push(residual_norm);
        }
        diagnostics.iterations = chosen.len();
        diagnostics.column_scores = correlations(a, &residual, &norms);
        let rank = chosen.len();
        finish(z, a, l, chosen, rank, opts, diagnostics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{complex_normal, random_support, GridParams};
    use crate::probing::{build_matrix, column_submatrix, random_disc};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_one_single_column_is_found_in_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = build_matrix(&random_disc(7, &mut rng).unwrap());
        let s = CMat::from_fn(1, 5, |_, _| complex_normal(&mut rng));
        let z = a.matrix().columns(17, 1) * &s;
        let r = OmpSolver.solve(&z, a.matrix(), &SolverOptions::default()).unwrap();
        assert_eq!(r.support.indices(), vec![17]);
        assert_eq!(r.diagnostics.iterations, 1);
        assert!(frobenius(&(&r.s_hat - &s)) < 1e-10);
    }

    #[test]
    fn zero_measurements_give_empty_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let a = build_matrix(&random_disc(5, &mut rng).unwrap());
        let r = OmpSolver.solve(&CMat::zeros(5, 4), a.matrix(), &SolverOptions::default()).unwrap();
        assert!(r.support.is_empty());
        assert_eq!(r.diagnostics.iterations, 0);
        assert_eq!(r.s_hat.shape(), (0, 4));
    }

    #[test]
    fn residual_is_nonincreasing_and_picks_are_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = build_matrix(&random_disc(13, &mut rng).unwrap());
        let grid = GridParams::new(13, 1, 1).unwrap();
        for _ in 0..10 {
            let support = random_support(&grid, 6, &mut rng).unwrap();
            let s = CMat::from_fn(6, 4, |_, _| complex_normal(&mut rng));
            let z = column_submatrix(&a, &support) * s;
            let r = OmpSolver.solve(&z, a.matrix(), &SolverOptions::default()).unwrap();
            let h = &r.diagnostics.residual_history;
            assert!(h.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
            assert!(r.support.len() <= 13);
            assert_eq!(r.support.len(), r.diagnostics.iterations);
        }
    }

    #[test]
    fn known_sparsity_caps_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let a = build_matrix(&random_disc(11, &mut rng).unwrap());
        let z = CMat::from_fn(11, 3, |_, _| complex_normal(&mut rng));
        let r = OmpSolver.solve(&z, a.matrix(), &SolverOptions::known_sparsity(3)).unwrap();
        assert_eq!(r.support.len(), 3);
    }
}

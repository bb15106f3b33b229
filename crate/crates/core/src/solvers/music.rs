//! Multiple-measurement-vector MUSIC.

use super::{check_shapes, failed, finish, rank_with_rule, Diagnostics, MusicMode, RecoveryResult, SolverOptions, SupportSolver};
use crate::linalg::{leading_left_singular, singular_values, CMat};
use crate::Result;

/// Selects the columns of `A` that lie (numerically) in the column space of
/// `Z`, measured by the normalised projection onto its orthogonal complement.
#[derive(Clone, Copy, Debug, Default)]
pub struct MusicSolver;

/// `||(I - U U^H) a_j|| / ||a_j||` for every column of `a`, computed from the
/// explicit residual so scores of in-span columns stay near machine precision.
pub(crate) fn noise_projection_scores(u: &CMat, a: &CMat) -> Vec<f64> {
    let residual = a - u * (u.adjoint() * a);
    (0..a.ncols())
        .map(|j| {
            let norm = a.column(j).norm();
            if norm == 0.0 {
                1.0
            } else {
                residual.column(j).norm() / norm
            }
        })
        .collect()
}

impl SupportSolver for MusicSolver {
    fn name(&self) -> &'static str {
        "music"
    }

    fn uses_noise_subspace(&self) -> bool {
        true
    }

    fn solve(&self, z: &CMat, a: &CMat, opts: &SolverOptions) -> Result<RecoveryResult> {
        let l = check_shapes(z, a)?;
        opts.validate(a.ncols())?;
        let rows = z.nrows();
        let sv = singular_values(z);
        let rank = rank_with_rule(&sv, rows, opts.rank_rule);
        let mut diagnostics = Diagnostics {
            singular_values: sv,
            ..Diagnostics::default()
        };
        if rank >= rows {
            let reason = format!("estimated rank {rank} leaves no noise subspace in {rows} rows");
            return Ok(failed(l, z.ncols(), rank, reason, diagnostics));
        }
        let (u, _) = leading_left_singular(z, rank);
        let scores = noise_projection_scores(&u, a);
        let columns: Vec<usize> = match opts.music_mode {
            MusicMode::Threshold(delta) => (0..scores.len()).filter(|&j| scores[j] <= delta).collect(),
            MusicMode::TopK(k) => {
                if k > rows {
                    diagnostics
                        .warnings
                        .push(format!("top_k {k} exceeds the {rows} rows; support cannot be identified"));
                }
                let mut order: Vec<usize> = (0..scores.len()).collect();
                order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(i.cmp(&j)));
                order.truncate(k);
                order
            }
        };
        diagnostics.column_scores = scores;
        diagnostics.iterations = 1;
        finish(z, a, l, columns, rank, opts, diagnostics)
    }
}

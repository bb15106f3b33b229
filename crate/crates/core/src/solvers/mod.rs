//! Joint-sparse support recovery for `Z = A_Gamma S_Gamma`.
//!
//! Every algorithm implements [`SupportSolver`] and is registered by name in
//! [`registry`]: `music` (subspace method), `omp` (greedy pursuit) and
//! `oracle` (exhaustive minimum-support search, small `L` only).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::{frobenius, lstsq, rank_from_singular_values, select_columns, select_rows, singular_values, CMat};
use crate::model::{unpack_unknowns, DiscreteSpreadingFunction, GridParams, SupportSet, UnknownMatrix};
use crate::pipeline::{consumed_samples, MeasurementEnsemble};
use crate::probing::{row_submatrix, MeasurementMatrix, RowSubset};
use crate::registry::Registry;
use crate::{Error, Result};

mod music;
mod omp;
mod oracle;

pub use music::MusicSolver;
pub use omp::OmpSolver;
pub use oracle::{OracleSolver, ORACLE_BUDGET};

/// How the signal-subspace dimension `K` is estimated from `Z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankRule {
    /// Count singular values above `tol * sigma_max`.
    Relative(f64),
    /// Count eigenvalues of `Z Z^H` above `factor` times the median of the
    /// trailing half of the spectrum.
    NoiseFloor { factor: f64 },
    /// Known subspace dimension.
    Fixed(usize),
}

/// Support selection rule for MUSIC.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MusicMode {
    /// Columns whose normalised noise-subspace projection is at most `delta`.
    Threshold(f64),
    /// The `k` columns with the smallest projection.
    TopK(usize),
}

/// Stopping rule for OMP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmpStop {
    /// Stop once `||R||_F <= residual_tol * ||Z||_F`.
    pub residual_tol: f64,
    /// Upper bound on the support size; defaults to the number of rows.
    pub max_support: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rank_rule: RankRule,
    pub music_mode: MusicMode,
    pub omp_stop: OmpStop,
    /// Relative singular-value cutoff of the least-squares solve.
    pub reconstruction_tol: f64,
    /// Largest support the oracle enumerates; defaults to the number of rows.
    pub oracle_max_cardinality: Option<usize>,
    /// Relative residual below which the oracle accepts a support.
    pub oracle_tol: f64,
}

pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const DEFAULT_MUSIC_THRESHOLD: f64 = 1e-5;
pub const DEFAULT_NOISE_FLOOR_FACTOR: f64 = 10.0;

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rank_rule: RankRule::Relative(DEFAULT_RANK_TOL),
            music_mode: MusicMode::Threshold(DEFAULT_MUSIC_THRESHOLD),
            omp_stop: OmpStop {
                residual_tol: 1e-10,
                max_support: None,
            },
            reconstruction_tol: 1e-10,
            oracle_max_cardinality: None,
            oracle_tol: 1e-9,
        }
    }
}

impl SolverOptions {
    /// Options for a known support size `k`: MUSIC keeps the `k` best
    /// columns of a rank-`k` signal subspace and OMP stops after `k` picks.
    pub fn known_sparsity(k: usize) -> Self {
        let mut opts = Self::default();
        opts.rank_rule = RankRule::Fixed(k);
        opts.music_mode = MusicMode::TopK(k);
        opts.omp_stop.max_support = Some(k);
        opts
    }

    pub fn validate(&self, columns: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        match self.rank_rule {
            RankRule::Relative(t) => positive("rank_tol", t)?,
            RankRule::NoiseFloor { factor } => positive("noise floor factor", factor)?,
            RankRule::Fixed(_) => {}
        }
        match self.music_mode {
            MusicMode::Threshold(d) => positive("MUSIC threshold", d)?,
            MusicMode::TopK(k) if k > columns => {
                return Err(Error::invalid(format!("top_k {k} exceeds the {columns} columns")))
            }
            MusicMode::TopK(_) => {}
        }
        positive("residual_tol", self.omp_stop.residual_tol)?;
        positive("reconstruction_tol", self.reconstruction_tol)?;
        positive("oracle_tol", self.oracle_tol)?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Singular values of `Z`, descending.
    pub singular_values: Vec<f64>,
    /// One score per dictionary column: noise-subspace projection for MUSIC,
    /// final residual correlation for OMP.
    pub column_scores: Vec<f64>,
    pub residual_fro: f64,
    /// Oracle only: whether the minimal consistent support is unique.
    pub unique: Option<bool>,
    pub iterations: usize,
    /// OMP only: `||R||_F` before the first and after every iteration.
    pub residual_history: Vec<f64>,
    pub warnings: Vec<String>,
    /// Set when the solver declined to produce a support.
    pub failure: Option<String>,
    /// Compressive recovery: received-sample indices the rows used depend on.
    pub consumed_samples: Option<Vec<usize>>,
}

/// Estimated support, coefficients on it, and diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryResult {
    pub support: SupportSet,
    /// `|support| x E D`, rows in ascending column-index order.
    pub s_hat: CMat,
    pub rank_hat: usize,
    pub diagnostics: Diagnostics,
}

impl RecoveryResult {
    pub fn is_failure(&self) -> bool {
        self.diagnostics.failure.is_some()
    }

    /// `S_hat` scattered into the full `L^2 x E D` layout.
    pub fn expand(&self) -> CMat {
        let l = self.support.l();
        let mut full = CMat::zeros(l * l, self.s_hat.ncols());
        for (row, idx) in self.support.indices().into_iter().enumerate() {
            full.set_row(idx, &self.s_hat.row(row));
        }
        full
    }
}

/// A support-recovery algorithm working on raw `(Z, A)` pairs. `A` has
/// `L^2` columns; `Z` and `A` share their row count, which may be smaller
/// than `L` for row-subsampled systems.
pub trait SupportSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether the method needs a nontrivial noise subspace (more rows than
    /// the signal rank).
    fn uses_noise_subspace(&self) -> bool {
        false
    }

    fn solve(&self, z: &CMat, a: &CMat, opts: &SolverOptions) -> Result<RecoveryResult>;
}

/// Registry preloaded with `music`, `omp` and `oracle`.
pub fn registry() -> Registry<dyn SupportSolver> {
    let mut reg: Registry<dyn SupportSolver> = Registry::new("solver");
    reg.register("music", Arc::new(MusicSolver));
    reg.register("omp", Arc::new(OmpSolver));
    reg.register("oracle", Arc::new(OracleSolver));
    reg
}

pub(crate) fn cells_per_axis(a: &CMat) -> Result<usize> {
    let n = a.ncols();
    let l = (n as f64).sqrt().round() as usize;
    if l * l != n || l == 0 {
        return Err(Error::invalid(format!("dictionary has {n} columns, expected L^2")));
    }
    Ok(l)
}

pub(crate) fn check_shapes(z: &CMat, a: &CMat) -> Result<usize> {
    if z.nrows() != a.nrows() {
        return Err(Error::invalid(format!(
            "Z has {} rows but A has {}",
            z.nrows(),
            a.nrows()
        )));
    }
    cells_per_axis(a)
}

/// Signal-subspace dimension of `z` under `rule`.
pub fn estimate_rank_with(z: &CMat, rule: RankRule) -> usize {
    let sv = singular_values(z);
    rank_with_rule(&sv, z.nrows(), rule)
}

pub(crate) fn rank_with_rule(sv: &[f64], rows: usize, rule: RankRule) -> usize {
    match rule {
        RankRule::Relative(tol) => rank_from_singular_values(sv, tol),
        RankRule::Fixed(k) => k.min(rows),
        RankRule::NoiseFloor { factor } => {
            // eigenvalues of Z Z^H, padded with zeros when Z is wide-short
            let mut eig: Vec<f64> = sv.iter().map(|s| s * s).collect();
            eig.resize(rows.max(eig.len()), 0.0);
            let lmax = eig.first().copied().unwrap_or(0.0);
            if lmax == 0.0 {
                return 0;
            }
            let half = eig.len().div_ceil(2);
            let mut tail: Vec<f64> = eig[eig.len() - half..].to_vec();
            tail.sort_by(f64::total_cmp);
            let floor = if tail.len() % 2 == 1 {
                tail[tail.len() / 2]
            } else {
                0.5 * (tail[tail.len() / 2 - 1] + tail[tail.len() / 2])
            };
            let cut = (factor * floor).max(DEFAULT_RANK_TOL * DEFAULT_RANK_TOL * lmax);
            eig.iter().filter(|&&v| v > cut).count()
        }
    }
}

/// Number of singular values of `Z` above `rank_tol * sigma_max`.
pub fn estimate_rank(z: &MeasurementEnsemble, rank_tol: f64) -> usize {
    estimate_rank_with(z.z(), RankRule::Relative(rank_tol))
}

/// Least-squares coefficients on `columns` plus the residual norm.
pub(crate) fn fit(z: &CMat, a: &CMat, columns: &[usize], tol: f64) -> (CMat, f64) {
    let a_sel = select_columns(a, columns);
    let s_hat = lstsq(&a_sel, z, tol);
    let residual = frobenius(&(z - &a_sel * &s_hat));
    (s_hat, residual)
}

/// Result for a chosen support: least-squares fit and residual.
pub(crate) fn finish(
    z: &CMat,
    a: &CMat,
    l: usize,
    mut columns: Vec<usize>,
    rank_hat: usize,
    opts: &SolverOptions,
    mut diagnostics: Diagnostics,
) -> Result<RecoveryResult> {
    columns.sort_unstable();
    if columns.len() > z.nrows() {
        diagnostics.warnings.push(format!(
            "support of {} exceeds the {} equations; minimum-norm coefficients returned",
            columns.len(),
            z.nrows()
        ));
    }
    let (s_hat, residual) = fit(z, a, &columns, opts.reconstruction_tol);
    diagnostics.residual_fro = residual;
    Ok(RecoveryResult {
        support: SupportSet::from_indices(l, &columns)?,
        s_hat,
        rank_hat,
        diagnostics,
    })
}

pub(crate) fn failed(l: usize, ed: usize, rank_hat: usize, reason: String, mut diagnostics: Diagnostics) -> RecoveryResult {
    diagnostics.failure = Some(reason);
    RecoveryResult {
        support: SupportSet::empty(l),
        s_hat: CMat::zeros(0, ed),
        rank_hat,
        diagnostics,
    }
}

/// MMV-MUSIC on a measurement ensemble.
pub fn mmv_music(z: &MeasurementEnsemble, a: &MeasurementMatrix, opts: &SolverOptions) -> Result<RecoveryResult> {
    MusicSolver.solve(z.z(), a.matrix(), opts)
}

/// MMV-OMP on a measurement ensemble.
pub fn mmv_omp(z: &MeasurementEnsemble, a: &MeasurementMatrix, opts: &SolverOptions) -> Result<RecoveryResult> {
    OmpSolver.solve(z.z(), a.matrix(), opts)
}

/// Exhaustive minimum-support search.
pub fn p0_oracle(z: &MeasurementEnsemble, a: &MeasurementMatrix, max_cardinality: usize, tol: f64) -> Result<RecoveryResult> {
    oracle::search(z.z(), a.matrix(), max_cardinality, tol, SolverOptions::default().reconstruction_tol)
}

/// Least-squares `S_Gamma` for a known support.
pub fn reconstruct(z: &MeasurementEnsemble, a: &MeasurementMatrix, support: &SupportSet) -> Result<CMat> {
    if support.is_empty() {
        return Err(Error::invalid("reconstruction needs a nonempty support"));
    }
    if support.len() > a.l() {
        log::warn!(
            "support of {} cells exceeds L = {}; returning the minimum-norm solution",
            support.len(),
            a.l()
        );
    }
    let (s_hat, _) = fit(z.z(), a.matrix(), &support.indices(), SolverOptions::default().reconstruction_tol);
    Ok(s_hat)
}

/// Spreading function described by a recovery result.
pub fn spreading_from_result(result: &RecoveryResult, grid: &GridParams) -> Result<DiscreteSpreadingFunction> {
    if result.support.l() != grid.l() {
        return Err(Error::invalid("result and grid disagree on L"));
    }
    if result.s_hat.shape() != (result.support.len(), grid.ed()) {
        return Err(Error::invalid(format!(
            "S_hat is {:?}, expected {}x{}",
            result.s_hat.shape(),
            result.support.len(),
            grid.ed()
        )));
    }
    let unknown = UnknownMatrix::new(*grid, result.support.clone(), result.expand())?;
    Ok(unpack_unknowns(&unknown))
}

/// Recovery from the rows `omega` of `Z`. The support is found on the
/// row-restricted system; coefficients are then fitted on all rows.
pub fn compressive_recover(
    z: &MeasurementEnsemble,
    a: &MeasurementMatrix,
    omega: &RowSubset,
    solver: &dyn SupportSolver,
    opts: &SolverOptions,
) -> Result<RecoveryResult> {
    if omega.rows().iter().any(|&r| r >= a.l()) {
        return Err(Error::invalid("row subset does not fit the measurement matrix"));
    }
    let z_omega = select_rows(z.z(), omega.rows());
    let a_omega = row_submatrix(a, omega);
    if solver.uses_noise_subspace() {
        let rank = estimate_rank_with(&z_omega, opts.rank_rule);
        if omega.len() < rank + 1 {
            return Err(Error::InsufficientRows {
                rows: omega.len(),
                rank,
            });
        }
    }
    let mut result = solver.solve(&z_omega, &a_omega, opts)?;
    if !result.support.is_empty() {
        let (s_hat, residual) = fit(z.z(), a.matrix(), &result.support.indices(), opts.reconstruction_tol);
        result.s_hat = s_hat;
        result.diagnostics.residual_fro = residual;
    }
    result.diagnostics.consumed_samples = Some(consumed_samples(z.grid(), omega.rows()));
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{complex_normal, random_support};
    use crate::probing::{build_matrix, column_submatrix, random_disc};
    use rand::SeedableRng;
    use num_complex::Complex64;
    use rand_chacha::ChaCha8Rng;

    fn random_cmat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(rows, cols, |_, _| complex_normal(rng))
    }

    #[test]
    fn rank_estimates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(estimate_rank_with(&CMat::zeros(5, 3), RankRule::Relative(1e-8)), 0);
        let outer = random_cmat(5, 1, &mut rng) * random_cmat(1, 7, &mut rng);
        assert_eq!(estimate_rank_with(&outer, RankRule::Relative(1e-8)), 1);

        let g = GridParams::new(19, 2, 2).unwrap();
        let a = build_matrix(&random_disc(19, &mut rng).unwrap());
        let support = random_support(&g, 8, &mut rng).unwrap();
        let s = random_cmat(8, 10, &mut rng);
        let z = column_submatrix(&a, &support) * &s;
        assert_eq!(estimate_rank_with(&z, RankRule::Relative(1e-8)), 8);
        // independent route: Gram-determinant style check via the rank of S
        assert_eq!(crate::linalg::rank(&s, 1e-10), 8);
        assert_eq!(estimate_rank_with(&z, RankRule::Fixed(30)), 19);
    }

    #[test]
    fn noise_floor_rule_separates_signal_from_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = build_matrix(&random_disc(19, &mut rng).unwrap());
        let g = GridParams::new(19, 19, 19).unwrap();
        let support = random_support(&g, 5, &mut rng).unwrap();
        let clean = column_submatrix(&a, &support) * random_cmat(5, 361, &mut rng);
        let noise = random_cmat(19, 361, &mut rng) * Complex64::from(0.01 * frobenius(&clean) / (19.0f64 * 361.0).sqrt());
        let rule = RankRule::NoiseFloor {
            factor: DEFAULT_NOISE_FLOOR_FACTOR,
        };
        assert_eq!(estimate_rank_with(&(clean + noise), rule), 5);
    }

    #[test]
    fn option_validation() {
        assert!(SolverOptions::default().validate(25).is_ok());
        let mut o = SolverOptions::default();
        o.music_mode = MusicMode::TopK(26);
        assert!(o.validate(25).is_err());
        let mut o = SolverOptions::default();
        o.oracle_tol = 0.0;
        assert!(o.validate(25).is_err());
        let mut o = SolverOptions::default();
        o.rank_rule = RankRule::Relative(-1.0);
        assert!(o.validate(25).is_err());
    }

    #[test]
    fn registry_lists_solvers() {
        let reg = registry();
        assert_eq!(reg.names(), vec!["music", "omp", "oracle"]);
        assert!(reg.get("music").unwrap().uses_noise_subspace());
        assert!(!reg.get("omp").unwrap().uses_noise_subspace());
        assert!(reg.get("lasso").is_err());
    }
}

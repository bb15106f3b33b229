//! Conditioning of support-restricted dictionaries, the uniqueness threshold,
//! explicit non-uniqueness witnesses, and the recovery error metric.

use rand::Rng;
use serde::Serialize;

use crate::linalg::{frobenius, null_space, rank, select_columns, select_rows, singular_values, CMat, RANK_EPS};
use crate::model::{complex_normal, GridParams, SupportSet};
use crate::probing::{column_submatrix, MeasurementMatrix};
use crate::{Error, Result};

/// Discrete stability proxy: extreme singular values of `A_Gamma`, scaled by
/// `1 / sqrt(T L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityBounds {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_card: usize,
}

pub fn stability_bounds(a: &MeasurementMatrix, support: &SupportSet, grid: &GridParams) -> Result<StabilityBounds> {
    if support.is_empty() {
        return Err(Error::invalid("stability bounds need a nonempty support"));
    }
    if support.l() != a.l() || grid.l() != a.l() {
        return Err(Error::invalid("support, grid and matrix disagree on L"));
    }
    let sub = column_submatrix(a, support);
    let sv = singular_values(&sub);
    let scale = 1.0 / (grid.t() * grid.l() as f64).sqrt();
    let beta = sv.first().copied().unwrap_or(0.0) * scale;
    // more columns than rows: the smallest singular value of A_Gamma is zero
    let sigma_min = if support.len() > a.l() {
        0.0
    } else {
        sv.last().copied().unwrap_or(0.0)
    };
    Ok(StabilityBounds {
        alpha: sigma_min * scale,
        beta,
        gamma_card: support.len(),
    })
}

/// Whether a support of size `gamma_card` observed with `K` independent
/// snapshots is guaranteed to be the unique sparsest explanation:
/// `2 |Gamma| < L + K`.
pub fn uniqueness_guaranteed(gamma_card: usize, l: usize, k: usize) -> Result<bool> {
    if k == 0 || k > gamma_card.min(l) {
        return Err(Error::invalid(format!(
            "K = {k} must lie in 1..={} for |Gamma| = {gamma_card}, L = {l}",
            gamma_card.min(l)
        )));
    }
    Ok(2 * gamma_card < l + k)
}

/// Two disjoint supports with coefficient blocks producing identical
/// measurements: `A_Gamma B_Gamma = A_Gamma' B_Gamma'`.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbiguityWitness {
    pub gamma: SupportSet,
    pub b_gamma: CMat,
    pub gamma_prime: SupportSet,
    pub b_gamma_prime: CMat,
}

impl AmbiguityWitness {
    /// The shared measurement `A_Gamma B_Gamma`.
    pub fn measurement(&self, a: &MeasurementMatrix) -> CMat {
        column_submatrix(a, &self.gamma) * &self.b_gamma
    }

    /// `||A_Gamma B_Gamma - A_Gamma' B_Gamma'||_F / ||A_Gamma B_Gamma||_F`.
    pub fn mismatch(&self, a: &MeasurementMatrix) -> f64 {
        let lhs = self.measurement(a);
        let rhs = column_submatrix(a, &self.gamma_prime) * &self.b_gamma_prime;
        frobenius(&(&lhs - rhs)) / frobenius(&lhs)
    }
}

/// Witness for `K` snapshots from `L + K` random columns: the null space of
/// `A_Phi` (dimension `K`) is split into a part carrying `ceil((L+K)/2)`
/// rows of full rank `K` and the remaining `floor((L+K)/2)` rows.
pub fn ambiguous_instance<R: Rng + ?Sized>(a: &MeasurementMatrix, k: usize, rng: &mut R) -> Result<AmbiguityWitness> {
    let l = a.l();
    if k == 0 || k > l {
        return Err(Error::invalid(format!("K = {k} must lie in 1..={l}")));
    }
    build_witness(a, k, l + k, (l + k).div_ceil(2), rng)
}

/// Witness with `|Gamma| = |Gamma'| = cardinality`, for any cardinality with
/// `2 cardinality >= L + K`. The `K` null vectors are random combinations of
/// a basis of the `(2 cardinality - L)`-dimensional null space of `A_Phi`.
pub fn ambiguous_instance_with_cardinality<R: Rng + ?Sized>(
    a: &MeasurementMatrix,
    k: usize,
    cardinality: usize,
    rng: &mut R,
) -> Result<AmbiguityWitness> {
    let l = a.l();
    if k == 0 || k > l {
        return Err(Error::invalid(format!("K = {k} must lie in 1..={l}")));
    }
    if 2 * cardinality < l + k {
        return Err(Error::invalid(format!(
            "cardinality {cardinality} is below the ambiguity threshold (L + K) / 2 = {}",
            (l + k) as f64 / 2.0
        )));
    }
    if cardinality > l {
        return Err(Error::invalid(format!(
            "cardinality {cardinality} exceeds L = {l}; K independent coefficients cannot be split"
        )));
    }
    build_witness(a, k, 2 * cardinality, cardinality, rng)
}

fn build_witness<R: Rng + ?Sized>(
    a: &MeasurementMatrix,
    k: usize,
    phi_size: usize,
    prime_size: usize,
    rng: &mut R,
) -> Result<AmbiguityWitness> {
    let l = a.l();
    let columns = l * l;
    if phi_size > columns {
        return Err(Error::invalid(format!("{phi_size} columns requested but only {columns} exist")));
    }
    let mut phi: Vec<usize> = rand::seq::index::sample(rng, columns, phi_size).into_vec();
    phi.sort_unstable();
    let basis = null_space(&select_columns(a.matrix(), &phi), RANK_EPS);
    let expected = phi_size - l;
    if basis.ncols() != expected {
        return Err(Error::Precondition(format!(
            "null space of the chosen {phi_size} columns has dimension {}, expected {expected}; \
             the probing matrix is not full spark",
            basis.ncols()
        )));
    }
    let b_phi = if expected == k {
        basis
    } else {
        let mix = CMat::from_fn(expected, k, |_, _| complex_normal(rng));
        basis * mix
    };

    // K independent rows first (greedy, smallest index), then fill up
    let mut prime_rows: Vec<usize> = Vec::with_capacity(prime_size);
    for i in 0..phi_size {
        if prime_rows.len() == k {
            break;
        }
        let mut trial = prime_rows.clone();
        trial.push(i);
        if rank(&select_rows(&b_phi, &trial), RANK_EPS) == trial.len() {
            prime_rows = trial;
        }
    }
    if prime_rows.len() < k {
        return Err(Error::Numerical("null-space basis lost rank".into()));
    }
    for i in 0..phi_size {
        if prime_rows.len() == prime_size {
            break;
        }
        if !prime_rows.contains(&i) {
            prime_rows.push(i);
        }
    }
    prime_rows.sort_unstable();
    let rest: Vec<usize> = (0..phi_size).filter(|i| !prime_rows.contains(i)).collect();

    let gamma_prime_idx: Vec<usize> = prime_rows.iter().map(|&i| phi[i]).collect();
    let gamma_idx: Vec<usize> = rest.iter().map(|&i| phi[i]).collect();
    Ok(AmbiguityWitness {
        gamma: SupportSet::from_indices(l, &gamma_idx)?,
        b_gamma: -select_rows(&b_phi, &rest),
        gamma_prime: SupportSet::from_indices(l, &gamma_prime_idx)?,
        b_gamma_prime: select_rows(&b_phi, &prime_rows),
    })
}

/// `||S_hat - S||_F^2 / ||S||_F^2` on the full `L^2`-row layout, so support
/// mismatches count as errors.
pub fn relative_sq_error(s_hat_full: &CMat, s_true_full: &CMat) -> Result<f64> {
    if s_hat_full.shape() != s_true_full.shape() {
        return Err(Error::invalid(format!(
            "estimate is {:?} but truth is {:?}",
            s_hat_full.shape(),
            s_true_full.shape()
        )));
    }
    let truth = frobenius(s_true_full);
    if truth == 0.0 {
        return Err(Error::invalid("relative error is undefined for a zero truth"));
    }
    let diff = frobenius(&(s_hat_full - s_true_full));
    Ok((diff / truth).powi(2))
}

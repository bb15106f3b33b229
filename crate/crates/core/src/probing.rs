//! Probing sequences and the measurement matrix `A_c`.
//!
//! `A_c = [A_{c,0} | ... | A_{c,L-1}]` with `A_{c,k} = C_{c,k} F^H`, where
//! `C_{c,k} = diag(c_k, c_{k-1}, ..., c_{k-L+1})` and `[F]_{p,m} = exp(-j 2 pi p m / L)`.
//! Entry `(p, k L + m)` is therefore `c_{(k-p) mod L} exp(j 2 pi p m / L)`.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{binomial, rank_from_singular_values, select_columns, select_rows, singular_values, unit_phase, CMat, Combinations, RANK_EPS};
use crate::model::{is_prime, SupportSet};
use crate::registry::Registry;
use crate::{Complex64, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbingKind {
    RandomDisc,
    Alltop,
    Custom,
}

/// Coefficients `c_0..c_{L-1}` of the probing Dirac train, extended
/// `L`-periodically.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbingSequence {
    coeffs: Vec<Complex64>,
    kind: ProbingKind,
}

impl ProbingSequence {
    pub fn custom(coeffs: Vec<Complex64>) -> Result<Self> {
        Self::with_kind(coeffs, ProbingKind::Custom)
    }

    fn with_kind(coeffs: Vec<Complex64>, kind: ProbingKind) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("probing sequence must have length >= 1"));
        }
        if coeffs.iter().all(|c| c.norm_sqr() == 0.0) {
            return Err(Error::invalid("probing sequence must not be identically zero"));
        }
        Ok(Self { coeffs, kind })
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
    pub fn kind(&self) -> ProbingKind {
        self.kind
    }
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
    /// `c_i` with periodic extension to any integer index.
    pub fn at(&self, i: i64) -> Complex64 {
        self.coeffs[i.rem_euclid(self.coeffs.len() as i64) as usize]
    }
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Alltop sequence `(1/sqrt L) exp(j 2 pi i^3 / L)`.
pub fn alltop(l: usize) -> Result<ProbingSequence> {
    if l == 0 {
        return Err(Error::invalid("Alltop sequence needs L >= 1"));
    }
    if l < 5 || !is_prime(l) {
        log::warn!("Alltop sequence with L={l}: Welch-bound optimality needs prime L >= 5");
    }
    let scale = 1.0 / (l as f64).sqrt();
    let coeffs = (0..l)
        .map(|i| {
            let cube = (i as u128).pow(3) % l as u128;
            unit_phase(cube as i128, l as u64) * scale
        })
        .collect();
    ProbingSequence::with_kind(coeffs, ProbingKind::Alltop)
}

/// i.i.d. entries uniform on the closed complex unit disc.
pub fn random_disc<R: Rng + ?Sized>(l: usize, rng: &mut R) -> Result<ProbingSequence> {
    if l == 0 {
        return Err(Error::invalid("random probing sequence needs L >= 1"));
    }
    if !is_prime(l) {
        log::warn!("random probing with non-prime L={l}: full spark is not guaranteed");
    }
    let coeffs = (0..l)
        .map(|_| {
            let radius = rng.random::<f64>().sqrt();
            let angle = TAU * rng.random::<f64>();
            Complex64::from_polar(radius, angle)
        })
        .collect();
    ProbingSequence::with_kind(coeffs, ProbingKind::RandomDisc)
}

/// A named family of probing sequences.
pub trait ProbingFamily: Send + Sync {
    fn name(&self) -> &'static str;
    /// Whether [`ProbingFamily::generate`] consumes randomness.
    fn is_random(&self) -> bool;
    fn generate(&self, l: usize, rng: &mut dyn RngCore) -> Result<ProbingSequence>;
}

pub struct AlltopFamily;

impl ProbingFamily for AlltopFamily {
    fn name(&self) -> &'static str {
        "alltop"
    }
    fn is_random(&self) -> bool {
        false
    }
    fn generate(&self, l: usize, _rng: &mut dyn RngCore) -> Result<ProbingSequence> {
        alltop(l)
    }
}

pub struct RandomDiscFamily;

impl ProbingFamily for RandomDiscFamily {
    fn name(&self) -> &'static str {
        "random-disc"
    }
    fn is_random(&self) -> bool {
        true
    }
    fn generate(&self, l: usize, rng: &mut dyn RngCore) -> Result<ProbingSequence> {
        random_disc(l, rng)
    }
}

/// Registry preloaded with `alltop` and `random-disc`.
pub fn registry() -> Registry<dyn ProbingFamily> {
    let mut reg: Registry<dyn ProbingFamily> = Registry::new("probing family");
    reg.register("alltop", Arc::new(AlltopFamily));
    reg.register("random-disc", Arc::new(RandomDiscFamily));
    reg
}

/// `L x L^2` measurement matrix with column `(k, m)` at index `k L + m`.
#[derive(Clone, Debug)]
pub struct MeasurementMatrix {
    matrix: CMat,
    source: ProbingSequence,
}

impl MeasurementMatrix {
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }
    pub fn source(&self) -> &ProbingSequence {
        &self.source
    }
    pub fn l(&self) -> usize {
        self.source.len()
    }
}

pub fn build_matrix(c: &ProbingSequence) -> MeasurementMatrix {
    let l = c.len();
    let mut a = CMat::zeros(l, l * l);
    for p in 0..l {
        for k in 0..l {
            let coeff = c.at(k as i64 - p as i64);
            for m in 0..l {
                a[(p, k * l + m)] = coeff * unit_phase((p * m) as i128, l as u64);
            }
        }
    }
    MeasurementMatrix {
        matrix: a,
        source: c.clone(),
    }
}

/// Columns of `A` indexed by `support`, in ascending `k L + m` order.
pub fn column_submatrix(a: &MeasurementMatrix, support: &SupportSet) -> CMat {
    select_columns(&a.matrix, &support.indices())
}

/// Ordered subset `Omega` of the rows `0..L`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowSubset {
    rows: Vec<usize>,
}

impl RowSubset {
    pub fn new(l: usize, rows: Vec<usize>) -> Result<Self> {
        if rows.is_empty() || rows.len() > l {
            return Err(Error::invalid(format!(
                "row subset must have between 1 and {l} rows, got {}",
                rows.len()
            )));
        }
        let mut seen = vec![false; l];
        for &r in &rows {
            if r >= l {
                return Err(Error::invalid(format!("row {r} outside 0..{l}")));
            }
            if std::mem::replace(&mut seen[r], true) {
                return Err(Error::invalid(format!("duplicate row {r}")));
            }
        }
        Ok(Self { rows })
    }
    /// `{0, ..., p-1}`.
    pub fn prefix(l: usize, p: usize) -> Result<Self> {
        Self::new(l, (0..p).collect())
    }
    pub fn all(l: usize) -> Self {
        Self {
            rows: (0..l).collect(),
        }
    }
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }
    pub fn len(&self) -> usize {
        self.rows.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Rows of `A` indexed by `omega`, in the listed order.
pub fn row_submatrix(a: &MeasurementMatrix, omega: &RowSubset) -> CMat {
    select_rows(&a.matrix, omega.rows())
}

/// Outcome of an exhaustive spark search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spark {
    /// Size of the smallest linearly dependent column set.
    Exact(usize),
    /// No dependent set of size up to and including this bound.
    Exceeds(usize),
}

impl Spark {
    /// Uses `spark <= rows + 1` to pin the value when every set of up to
    /// `rows` columns is independent.
    pub fn resolve(self, rows: usize, cols: usize) -> Spark {
        match self {
            Spark::Exceeds(max) if max >= rows && cols > rows => Spark::Exact(rows + 1),
            other => other,
        }
    }
}

/// Largest number of column subsets a spark search may visit.
pub const SPARK_BUDGET: u128 = 10_000_000;

/// Smallest linearly dependent column set of `m`, searched up to
/// `max_cardinality` columns. A subset is dependent when its smallest
/// singular value is at most `1e-10` times its largest.
pub fn spark_exhaustive(m: &CMat, max_cardinality: usize) -> Result<Spark> {
    let cols = m.ncols();
    let max = max_cardinality.min(cols);
    let needed: u128 = (1..=max).map(|k| binomial(cols, k)).sum();
    if needed > SPARK_BUDGET {
        return Err(Error::BudgetExceeded {
            needed,
            budget: SPARK_BUDGET,
        });
    }
    for k in 1..=max {
        if k > m.nrows() {
            return Ok(Spark::Exact(k));
        }
        let dependent = Combinations::new(cols, k)
            .par_bridge()
            .any(|subset| is_dependent(&select_columns(m, &subset)));
        if dependent {
            return Ok(Spark::Exact(k));
        }
    }
    Ok(Spark::Exceeds(max))
}

fn is_dependent(sub: &CMat) -> bool {
    let sv = singular_values(sub);
    rank_from_singular_values(&sv, RANK_EPS) < sub.ncols()
}

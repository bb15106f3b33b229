//! Discretisation geometry, cell supports and discrete spreading functions.
//!
//! The delay-Doppler rectangle `[0, T L) x [0, 1/T)` is tiled by `L x L`
//! cells. Each cell holds `E` samples along delay and `D` along Doppler, so
//! the full sample grid is `E L x D L`. A spreading function is cell-sparse:
//! samples are nonzero only inside the active cells of a [`SupportSet`].

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{unit_phase, CMat, ZERO};
use crate::{Complex64, Error, Result};

/// Discretisation geometry `(L, T, E, D)`.
///
/// Derived: bandwidth `B = E / T`, observation window `V = D T L`, and
/// `B V = E D L` received samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    l: usize,
    t: f64,
    e: usize,
    d: usize,
}

impl GridParams {
    /// Grid with `T = 1` and the prime-`L` check enabled.
    pub fn new(l: usize, e: usize, d: usize) -> Result<Self> {
        Self::with_options(l, 1.0, e, d, true)
    }

    pub fn with_options(l: usize, t: f64, e: usize, d: usize, require_prime_l: bool) -> Result<Self> {
        if l < 2 {
            return Err(Error::invalid(format!("L must be at least 2, got {l}")));
        }
        if e == 0 || d == 0 {
            return Err(Error::invalid(format!("E and D must be positive, got E={e}, D={d}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("T must be positive and finite, got {t}")));
        }
        if require_prime_l && !is_prime(l) {
            return Err(Error::invalid(format!(
                "L={l} is not prime (full spark of A_c is only guaranteed for prime L)"
            )));
        }
        Ok(Self { l, t, e, d })
    }

    pub fn l(&self) -> usize {
        self.l
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn e(&self) -> usize {
        self.e
    }
    pub fn d(&self) -> usize {
        self.d
    }
    /// Samples per cell, which is also the number of measurement vectors.
    pub fn ed(&self) -> usize {
        self.e * self.d
    }
    /// `B = E / T`.
    pub fn bandwidth(&self) -> f64 {
        self.e as f64 / self.t
    }
    /// `V = D T L`.
    pub fn window(&self) -> f64 {
        self.d as f64 * self.t * self.l as f64
    }
    /// `B V = E D L`.
    pub fn samples_total(&self) -> usize {
        self.e * self.d * self.l
    }
    /// Samples along delay, `E L`.
    pub fn delay_len(&self) -> usize {
        self.e * self.l
    }
    /// Samples along Doppler, `D L`.
    pub fn doppler_len(&self) -> usize {
        self.d * self.l
    }
    pub fn cell_count(&self) -> usize {
        self.l * self.l
    }
    /// Cell containing grid sample `(r, l)`.
    pub fn cell_of(&self, r: usize, l: usize) -> Cell {
        Cell::new(r / self.e, l / self.d)
    }
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut i = 2;
    while i * i <= n {
        if n % i == 0 {
            return false;
        }
        i += 1;
    }
    true
}

/// Cell index `(k, m)`: `k` along delay, `m` along Doppler. Ordering is by
/// `k` then `m`, i.e. by the flat column index `k L + m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub k: usize,
    pub m: usize,
}

impl Cell {
    pub fn new(k: usize, m: usize) -> Self {
        Self { k, m }
    }
    pub fn index(&self, l: usize) -> usize {
        self.k * l + self.m
    }
    pub fn from_index(index: usize, l: usize) -> Self {
        Self::new(index / l, index % l)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k, self.m)
    }
}

/// Set of active cells `Gamma` on an `L x L` cell grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSet {
    l: usize,
    cells: BTreeSet<Cell>,
}

impl SupportSet {
    pub fn empty(l: usize) -> Self {
        Self {
            l,
            cells: BTreeSet::new(),
        }
    }

    /// Every cell of the grid.
    pub fn full(l: usize) -> Self {
        Self {
            l,
            cells: (0..l * l).map(|i| Cell::from_index(i, l)).collect(),
        }
    }

    /// Builds a support, rejecting out-of-range and duplicate cells.
    pub fn new(l: usize, cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for cell in cells {
            if cell.k >= l || cell.m >= l {
                return Err(Error::invalid(format!("cell {cell} outside the {l}x{l} grid")));
            }
            if !set.insert(cell) {
                return Err(Error::invalid(format!("duplicate cell {cell}")));
            }
        }
        Ok(Self { l, cells: set })
    }

    /// Builds a support from flat column indices `k L + m`.
    pub fn from_indices(l: usize, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= l * l) {
            return Err(Error::invalid(format!("column index {bad} outside 0..{}", l * l)));
        }
        Self::new(l, indices.iter().map(|&i| Cell::from_index(i, l)))
    }

    pub fn l(&self) -> usize {
        self.l
    }
    pub fn len(&self) -> usize {
        self.cells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
    pub fn contains(&self, cell: Cell) -> bool {
        self.cells.contains(&cell)
    }
    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells.iter().copied()
    }
    /// Flat column indices in ascending order.
    pub fn indices(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c.index(self.l)).collect()
    }
    /// Occupied area `|Gamma| / L` in units of the delay-Doppler plane.
    pub fn area(&self) -> f64 {
        self.cells.len() as f64 / self.l as f64
    }
}

impl fmt::Display for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.cells.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

/// Samples of a spreading function on the `E L x D L` grid, zero outside
/// the active cells.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSpreadingFunction {
    grid: GridParams,
    samples: CMat,
    support: SupportSet,
}

impl DiscreteSpreadingFunction {
    /// Validates shape and that every off-support sample is exactly zero.
    pub fn new(grid: GridParams, samples: CMat, support: SupportSet) -> Result<Self> {
        if samples.shape() != (grid.delay_len(), grid.doppler_len()) {
            return Err(Error::invalid(format!(
                "sample array is {:?}, grid requires {}x{}",
                samples.shape(),
                grid.delay_len(),
                grid.doppler_len()
            )));
        }
        if support.l() != grid.l() {
            return Err(Error::invalid("support and grid disagree on L"));
        }
        for r in 0..grid.delay_len() {
            for l in 0..grid.doppler_len() {
                if samples[(r, l)] != ZERO && !support.contains(grid.cell_of(r, l)) {
                    return Err(Error::invalid(format!(
                        "nonzero sample ({r},{l}) in inactive cell {}",
                        grid.cell_of(r, l)
                    )));
                }
            }
        }
        Ok(Self {
            grid,
            samples,
            support,
        })
    }

    pub fn zeros(grid: GridParams, support: SupportSet) -> Self {
        Self {
            samples: CMat::zeros(grid.delay_len(), grid.doppler_len()),
            grid,
            support,
        }
    }

    pub fn grid(&self) -> &GridParams {
        &self.grid
    }
    pub fn samples(&self) -> &CMat {
        &self.samples
    }
    pub fn support(&self) -> &SupportSet {
        &self.support
    }
}

/// Row-sparse unknown matrix `S` (`L^2 x E D`).
///
/// Row `k L + m` belongs to cell `(k, m)`; column `n D + r` to the within-cell
/// sample `(n, r)`. Entries carry the phase `exp(j 2 pi n (r + D m) / (E D L))`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnknownMatrix {
    grid: GridParams,
    support: SupportSet,
    matrix: CMat,
}

impl UnknownMatrix {
    pub fn new(grid: GridParams, support: SupportSet, matrix: CMat) -> Result<Self> {
        if matrix.shape() != (grid.cell_count(), grid.ed()) {
            return Err(Error::invalid(format!(
                "unknown matrix is {:?}, expected {}x{}",
                matrix.shape(),
                grid.cell_count(),
                grid.ed()
            )));
        }
        Ok(Self {
            grid,
            support,
            matrix,
        })
    }
    pub fn grid(&self) -> &GridParams {
        &self.grid
    }
    pub fn support(&self) -> &SupportSet {
        &self.support
    }
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }
    /// Rows of the active cells, ascending by column index (`S_Gamma`).
    pub fn active_rows(&self) -> CMat {
        crate::linalg::select_rows(&self.matrix, &self.support.indices())
    }
}

fn packing_phase(grid: &GridParams, n: usize, r: usize, m: usize) -> Complex64 {
    let num = (n * (r + grid.d() * m)) as i128;
    unit_phase(num, grid.samples_total() as u64)
}

/// Packs spreading samples into the unknown matrix `S`.
pub fn pack_unknowns(sf: &DiscreteSpreadingFunction) -> UnknownMatrix {
    let g = sf.grid;
    let mut s = CMat::zeros(g.cell_count(), g.ed());
    for cell in sf.support.iter() {
        let row = cell.index(g.l());
        for n in 0..g.e() {
            for r in 0..g.d() {
                let v = sf.samples[(n + g.e() * cell.k, r + g.d() * cell.m)];
                s[(row, n * g.d() + r)] = v * packing_phase(&g, n, r, cell.m);
            }
        }
    }
    UnknownMatrix {
        grid: g,
        support: sf.support.clone(),
        matrix: s,
    }
}

/// Inverse of [`pack_unknowns`]: strips the phase and scatters rows of
/// active cells back onto the sample grid.
pub fn unpack_unknowns(u: &UnknownMatrix) -> DiscreteSpreadingFunction {
    let g = u.grid;
    let mut samples = CMat::zeros(g.delay_len(), g.doppler_len());
    for cell in u.support.iter() {
        let row = cell.index(g.l());
        for n in 0..g.e() {
            for r in 0..g.d() {
                let v = u.matrix[(row, n * g.d() + r)];
                samples[(n + g.e() * cell.k, r + g.d() * cell.m)] =
                    v * packing_phase(&g, n, r, cell.m).conj();
            }
        }
    }
    DiscreteSpreadingFunction {
        grid: g,
        samples,
        support: u.support.clone(),
    }
}

/// Generator behind every seeded command-line and harness run.
pub type SeededRng = ChaCha8Rng;

/// The crate's reproducible random stream for a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Circularly-symmetric complex Gaussian with unit variance: real and
/// imaginary parts i.i.d. `N(0, 1/2)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Uniformly random support with exactly `cardinality` cells.
pub fn random_support<R: Rng + ?Sized>(
    grid: &GridParams,
    cardinality: usize,
    rng: &mut R,
) -> Result<SupportSet> {
    let total = grid.cell_count();
    if cardinality > total {
        return Err(Error::invalid(format!(
            "support cardinality {cardinality} exceeds the {total} available cells"
        )));
    }
    let mut picked = rand::seq::index::sample(rng, total, cardinality).into_vec();
    picked.sort_unstable();
    SupportSet::from_indices(grid.l(), &picked)
}

/// Draws i.i.d. CN(0,1) samples in every active cell.
pub fn random_spreading<R: Rng + ?Sized>(
    grid: &GridParams,
    support: &SupportSet,
    rng: &mut R,
) -> Result<DiscreteSpreadingFunction> {
    if support.l() != grid.l() {
        return Err(Error::invalid("support and grid disagree on L"));
    }
    let mut sf = DiscreteSpreadingFunction::zeros(*grid, support.clone());
    for cell in support.iter() {
        for n in 0..grid.e() {
            for r in 0..grid.d() {
                sf.samples[(n + grid.e() * cell.k, r + grid.d() * cell.m)] = complex_normal(rng);
            }
        }
    }
    Ok(sf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_derived_quantities() {
        let g = GridParams::with_options(19, 0.5, 3, 2, true).unwrap();
        assert_eq!(g.bandwidth(), 6.0);
        assert_eq!(g.window(), 19.0);
        assert_eq!(g.samples_total(), 3 * 2 * 19);
        assert_eq!((g.bandwidth() * g.window()).round() as usize, g.samples_total());
        assert_eq!(g.delay_len(), 57);
        assert_eq!(g.doppler_len(), 38);
    }

    #[test]
    fn grid_validation() {
        assert!(GridParams::new(1, 1, 1).is_err());
        assert!(GridParams::new(4, 1, 1).is_err());
        assert!(GridParams::with_options(4, 1.0, 1, 1, false).is_ok());
        assert!(GridParams::new(5, 0, 1).is_err());
        assert!(GridParams::with_options(5, 0.0, 1, 1, true).is_err());
    }

    #[test]
    fn support_rejects_duplicates_and_out_of_range() {
        assert!(SupportSet::new(3, [Cell::new(0, 1), Cell::new(0, 1)]).is_err());
        assert!(SupportSet::new(3, [Cell::new(3, 0)]).is_err());
        let s = SupportSet::from_indices(3, &[5, 1]).unwrap();
        assert_eq!(s.indices(), vec![1, 5]);
        assert_eq!(s.iter().next(), Some(Cell::new(0, 1)));
        assert!((s.area() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn random_support_edge_cardinalities() {
        let g = GridParams::new(19, 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(random_support(&g, 0, &mut rng).unwrap().is_empty());
        assert_eq!(random_support(&g, 361, &mut rng).unwrap(), SupportSet::full(19));
        assert!(random_support(&g, 362, &mut rng).is_err());
    }

    #[test]
    fn random_support_is_seed_deterministic() {
        let g = GridParams::new(5, 1, 1).unwrap();
        let a = random_support(&g, 3, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = random_support(&g, 3, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a, b);
    }

    #[test]
    fn random_spreading_respects_support() {
        let g = GridParams::new(5, 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let empty = random_spreading(&g, &SupportSet::empty(5), &mut rng).unwrap();
        assert_eq!(frobenius(empty.samples()), 0.0);

        let single = SupportSet::new(5, [Cell::new(2, 3)]).unwrap();
        let sf = random_spreading(&g, &single, &mut rng).unwrap();
        let nonzero = sf.samples().iter().filter(|z| **z != ZERO).count();
        assert_eq!(nonzero, 1);
        assert_ne!(sf.samples()[(2, 3)], ZERO);
    }

    #[test]
    fn random_spreading_has_unit_variance() {
        let g = GridParams::new(5, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let support = random_support(&g, 10, &mut rng).unwrap();
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..10_000 {
            let sf = random_spreading(&g, &support, &mut rng).unwrap();
            for cell in support.iter() {
                for n in 0..2 {
                    for r in 0..2 {
                        acc += sf.samples()[(n + 2 * cell.k, r + 2 * cell.m)].norm_sqr();
                        count += 1;
                    }
                }
            }
        }
        let var = acc / count as f64;
        assert!((var - 1.0).abs() < 0.05, "empirical variance {var}");
    }

    #[test]
    fn new_rejects_off_support_energy() {
        let g = GridParams::new(3, 1, 1).unwrap();
        let mut samples = CMat::zeros(3, 3);
        samples[(1, 1)] = Complex64::new(1.0, 0.0);
        assert!(DiscreteSpreadingFunction::new(g, samples.clone(), SupportSet::empty(3)).is_err());
        let s = SupportSet::new(3, [Cell::new(1, 1)]).unwrap();
        assert!(DiscreteSpreadingFunction::new(g, samples, s).is_ok());
    }

    #[test]
    fn packing_zero_and_first_block() {
        let g = GridParams::new(3, 2, 2).unwrap();
        let zero = DiscreteSpreadingFunction::zeros(g, SupportSet::full(3));
        assert_eq!(frobenius(pack_unknowns(&zero).matrix()), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let support = random_support(&g, 4, &mut rng).unwrap();
        let sf = random_spreading(&g, &support, &mut rng).unwrap();
        let s = pack_unknowns(&sf);
        for cell in support.iter() {
            for r in 0..2 {
                // n = 0: unit phase
                assert_eq!(
                    s.matrix()[(cell.index(3), r)],
                    sf.samples()[(2 * cell.k, r + 2 * cell.m)]
                );
            }
        }
        for row in 0..9 {
            if !support.contains(Cell::from_index(row, 3)) {
                assert!(s.matrix().row(row).iter().all(|z| *z == ZERO));
            }
        }
    }

    #[test]
    fn packing_matches_entry_formula() {
        let g = GridParams::new(3, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let support = SupportSet::full(3);
        let sf = random_spreading(&g, &support, &mut rng).unwrap();
        let s = pack_unknowns(&sf);
        for k in 0..3 {
            for m in 0..3 {
                for n in 0..2 {
                    for r in 0..2 {
                        let theta = std::f64::consts::TAU * (n * (r + 2 * m)) as f64 / 12.0;
                        let expect = sf.samples()[(n + 2 * k, r + 2 * m)] * Complex64::from_polar(1.0, theta);
                        assert!((s.matrix()[(k * 3 + m, n * 2 + r)] - expect).norm() < 1e-14);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trip(seed in any::<u64>(), e in 1usize..4, d in 1usize..4, card in 0usize..10) {
            let g = GridParams::new(3, e, d).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let support = random_support(&g, card.min(9), &mut rng).unwrap();
            let sf = random_spreading(&g, &support, &mut rng).unwrap();
            let back = unpack_unknowns(&pack_unknowns(&sf));
            let err = frobenius(&(back.samples() - sf.samples()));
            prop_assert!(err <= 1e-12 * frobenius(sf.samples()).max(1e-300));
            prop_assert_eq!(back.support(), sf.support());
            // invert the other way too
            let u = pack_unknowns(&sf);
            let again = pack_unknowns(&unpack_unknowns(&u));
            prop_assert!(frobenius(&(again.matrix() - u.matrix())) <= 1e-12 * frobenius(u.matrix()).max(1e-300));
        }
    }
}

//! From spreading function to measurement ensemble.
//!
//! The operator response to the probing train is sampled at rate `B`:
//!
//! `y[n] = (1/BV) sum_{r,l} s(r,l) x[(n - r) mod EL] exp(j 2 pi l n / BV)`,
//!
//! where one period of `x` carries `c_{-k}` at `m = E k` and zeros elsewhere.
//! The discrete Zak transform with parameters `(EL, D)` followed by a
//! per-row phase correction and the scale `BV` turns `y` into `L` parallel
//! equations `Z = A_c S`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{twiddles, unit_phase, CMat, ZERO};
use crate::model::{complex_normal, DiscreteSpreadingFunction, GridParams};
use crate::probing::ProbingSequence;
use crate::{Complex64, Error, Result};

/// How the noise in a [`ReceivedSignal`] was generated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseMeta {
    pub snr_db: f64,
    /// Per-sample variance of the added noise.
    pub noise_power: f64,
    pub seed: Option<u64>,
}

/// Received samples `y[n]`, `n = 0..E D L`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReceivedSignal {
    samples: Vec<Complex64>,
    grid: GridParams,
    noise: Option<NoiseMeta>,
}

impl ReceivedSignal {
    pub fn new(samples: Vec<Complex64>, grid: GridParams) -> Result<Self> {
        if samples.len() != grid.samples_total() {
            return Err(Error::invalid(format!(
                "received signal has {} samples, grid requires E*D*L = {}",
                samples.len(),
                grid.samples_total()
            )));
        }
        Ok(Self {
            samples,
            grid,
            noise: None,
        })
    }
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }
    pub fn grid(&self) -> &GridParams {
        &self.grid
    }
    pub fn noise(&self) -> Option<&NoiseMeta> {
        self.noise.as_ref()
    }
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// One period (length `E L`) of the sampled probing signal.
pub fn probe_samples(c: &ProbingSequence, grid: &GridParams) -> Vec<Complex64> {
    let mut x = vec![ZERO; grid.delay_len()];
    for k in 0..grid.l() {
        x[grid.e() * k] = c.at(-(k as i64));
    }
    x
}

/// Sampled response of the operator with spreading function `sf` to the
/// probing train built from `c`.
pub fn simulate(sf: &DiscreteSpreadingFunction, c: &ProbingSequence) -> Result<ReceivedSignal> {
    let grid = *sf.grid();
    if c.len() != grid.l() {
        return Err(Error::invalid(format!(
            "probing sequence has length {}, grid has L = {}",
            c.len(),
            grid.l()
        )));
    }
    let e = grid.e();
    let total = grid.samples_total();
    let period = grid.delay_len();
    let x = probe_samples(c, &grid);
    let tw = twiddles(total);
    let mut y = vec![ZERO; total];
    let samples = sf.samples();
    // x[(n - r) mod EL] vanishes unless n = r (mod E), so row r only reaches
    // the outputs n_j = r mod E + E j. For each such row, first sum the
    // Doppler terms, then apply the probe sample once per output.
    let per_row = total / e;
    let mut acc = vec![ZERO; per_row];
    for r in 0..grid.delay_len() {
        let n0 = r % e;
        let mut active = false;
        acc.iter_mut().for_each(|v| *v = ZERO);
        for dl in 0..grid.doppler_len() {
            let s = samples[(r, dl)];
            if s == ZERO {
                continue;
            }
            active = true;
            let step = (dl * e) % total;
            let mut idx = (dl * n0) % total;
            for a in acc.iter_mut() {
                *a += s * tw[idx];
                idx += step;
                if idx >= total {
                    idx -= total;
                }
            }
        }
        if !active {
            continue;
        }
        let mut xi = (n0 + period - r % period) % period;
        for (j, a) in acc.iter().enumerate() {
            y[n0 + e * j] += x[xi] * a;
            xi += e;
            if xi >= period {
                xi -= period;
            }
        }
    }
    let scale = 1.0 / total as f64;
    for v in &mut y {
        *v *= scale;
    }
    ReceivedSignal::new(y, grid)
}

/// Adds circularly-symmetric complex Gaussian noise at the given SNR relative
/// to the empirical power of `y`. `+inf` leaves the signal unchanged.
pub fn add_noise<R: Rng + ?Sized>(y: &ReceivedSignal, snr_db: f64, rng: &mut R) -> Result<ReceivedSignal> {
    if snr_db.is_nan() {
        return Err(Error::invalid("SNR must not be NaN"));
    }
    if snr_db == f64::INFINITY {
        return Ok(y.clone());
    }
    let signal_power = y.energy() / y.samples.len() as f64;
    if signal_power == 0.0 {
        return Err(Error::invalid("cannot set a finite SNR on an all-zero signal"));
    }
    let noise_power = signal_power * 10f64.powf(-snr_db / 10.0);
    let sigma = noise_power.sqrt();
    let samples = y
        .samples
        .iter()
        .map(|v| v + complex_normal(rng) * sigma)
        .collect();
    Ok(ReceivedSignal {
        samples,
        grid: y.grid,
        noise: Some(NoiseMeta {
            snr_db,
            noise_power,
            seed: None,
        }),
    })
}

/// [`add_noise`] with its own ChaCha stream; the seed is recorded.
pub fn add_noise_seeded(y: &ReceivedSignal, snr_db: f64, seed: u64) -> Result<ReceivedSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = add_noise(y, snr_db, &mut rng)?;
    if let Some(meta) = out.noise.as_mut() {
        meta.seed = Some(seed);
    }
    Ok(out)
}

/// Discrete Zak transform `Z[n, r]`, `n < E L`, `r < D`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZakTransform {
    values: CMat,
    grid: GridParams,
}

impl ZakTransform {
    pub fn values(&self) -> &CMat {
        &self.values
    }
    pub fn grid(&self) -> &GridParams {
        &self.grid
    }
}

/// `Z[n, r] = (1/D) sum_{q<D} y[n + E L q] exp(-j 2 pi q r / D)`.
pub fn discrete_zak(y: &ReceivedSignal) -> Result<ZakTransform> {
    let grid = y.grid;
    zak_of_samples(&y.samples, &grid)
}

pub fn zak_of_samples(samples: &[Complex64], grid: &GridParams) -> Result<ZakTransform> {
    if samples.len() != grid.samples_total() {
        return Err(Error::invalid(format!(
            "Zak transform needs {} samples, got {}",
            grid.samples_total(),
            samples.len()
        )));
    }
    let (period, d) = (grid.delay_len(), grid.d());
    let tw = twiddles(d);
    let mut values = CMat::zeros(period, d);
    let inv_d = 1.0 / d as f64;
    for n in 0..period {
        for r in 0..d {
            let mut acc = ZERO;
            for q in 0..d {
                acc += samples[n + period * q] * tw[(d - (q * r) % d) % d];
            }
            values[(n, r)] = acc * inv_d;
        }
    }
    Ok(ZakTransform {
        values,
        grid: *grid,
    })
}

/// `L x E D` measurement matrix `Z` with columns `z[n, r]` at `n D + r`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementEnsemble {
    z: CMat,
    grid: GridParams,
}

impl MeasurementEnsemble {
    pub fn new(z: CMat, grid: GridParams) -> Result<Self> {
        if z.shape() != (grid.l(), grid.ed()) {
            return Err(Error::invalid(format!(
                "measurement matrix is {:?}, grid requires {}x{}",
                z.shape(),
                grid.l(),
                grid.ed()
            )));
        }
        Ok(Self { z, grid })
    }
    pub fn z(&self) -> &CMat {
        &self.z
    }
    pub fn grid(&self) -> &GridParams {
        &self.grid
    }
}

/// Row `p`, column `n D + r` of `Z` is
/// `B V * Zak[n + E p, r] * exp(-j 2 pi r p / (D L))`.
///
/// The factor `B V = E D L` undoes the `1/(BV)` normalisation of the
/// sampled response so that `Z = A_c S` holds exactly.
pub fn assemble_z(zak: &ZakTransform) -> MeasurementEnsemble {
    let g = zak.grid;
    let (l, e, d) = (g.l(), g.e(), g.d());
    let scale = g.samples_total() as f64;
    let dl = g.doppler_len() as u64;
    let z = CMat::from_fn(l, g.ed(), |p, col| {
        let (n, r) = (col / d, col % d);
        zak.values[(n + e * p, r)] * unit_phase(-((r * p) as i128), dl) * scale
    });
    MeasurementEnsemble { z, grid: g }
}

/// Zak transform and assembly in one step.
pub fn measure(y: &ReceivedSignal) -> Result<MeasurementEnsemble> {
    Ok(assemble_z(&discrete_zak(y)?))
}

/// Indices of received samples that rows `omega` of `Z` depend on: row `p`
/// reads Zak rows `n + E p`, each of which reads `y[n + E p + E L q]`.
pub fn consumed_samples(grid: &GridParams, omega: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = omega
        .iter()
        .flat_map(|&p| {
            (0..grid.e()).flat_map(move |n| (0..grid.d()).map(move |q| n + grid.e() * p + grid.delay_len() * q))
        })
        .collect();
    out.sort_unstable();
    out
}

//! Monte Carlo experiment driver: per-trial pipeline runs, parallel sweeps
//! with schedule-independent seeding, and CSV output.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analysis::relative_sq_error;
use crate::model::{pack_unknowns, random_spreading, random_support, GridParams};
use crate::pipeline::{add_noise, measure, simulate};
use crate::probing::{self, build_matrix, ProbingSequence, RowSubset};
use crate::solvers::{self, compressive_recover, MusicMode, RankRule, SolverOptions};
use crate::{Error, Result};

pub mod io;

/// Row subset used by compressive runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    /// The literal string `"prefix"`: rows `0..P`.
    Named(String),
    List(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressiveConfig {
    #[serde(alias = "P")]
    pub p: usize,
    #[serde(default = "default_omega")]
    pub omega: OmegaSpec,
}

fn default_omega() -> OmegaSpec {
    OmegaSpec::Named("prefix".into())
}

impl CompressiveConfig {
    pub fn rows(&self, l: usize) -> Result<RowSubset> {
        match &self.omega {
            OmegaSpec::Named(name) if name == "prefix" => RowSubset::prefix(l, self.p),
            OmegaSpec::Named(name) => Err(Error::invalid(format!(
                "omega must be \"prefix\" or a list of rows, got \"{name}\""
            ))),
            OmegaSpec::List(rows) => {
                if rows.len() != self.p {
                    return Err(Error::invalid(format!(
                        "omega lists {} rows but P = {}",
                        rows.len(),
                        self.p
                    )));
                }
                RowSubset::new(l, rows.clone())
            }
        }
    }
}

/// How solver options are chosen per trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparsityMode {
    /// `blind` for noiseless runs, `known` otherwise.
    #[default]
    Auto,
    /// Solvers receive `|Gamma|`: MUSIC keeps the `|Gamma|` best columns of a
    /// rank-`min(|Gamma|, ED)` subspace, OMP stops after `|Gamma|` picks.
    Known,
    /// Default thresholds only.
    Blind,
}

impl SparsityMode {
    pub fn label(self) -> &'static str {
        match self {
            SparsityMode::Auto => "auto",
            SparsityMode::Known => "known",
            SparsityMode::Blind => "blind",
        }
    }

    fn resolve(self, snr_db: f64) -> SparsityMode {
        match self {
            SparsityMode::Auto if snr_db.is_infinite() => SparsityMode::Blind,
            SparsityMode::Auto => SparsityMode::Known,
            other => other,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(alias = "L")]
    pub l: usize,
    #[serde(alias = "T", default = "default_t")]
    pub t: f64,
    #[serde(alias = "E", default)]
    pub e: Option<usize>,
    #[serde(alias = "D", default)]
    pub d: Option<usize>,
    /// Alternative to `e`/`d`: several `(E, D)` pairs swept in order.
    #[serde(default)]
    pub ed_pairs: Option<Vec<(usize, usize)>>,
    pub probing: String,
    pub solver: String,
    pub delta_grid: Vec<f64>,
    #[serde(default = "default_snr", serialize_with = "ser_snr", deserialize_with = "de_snr")]
    pub snr_db: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
    #[serde(default)]
    pub compressive: Option<CompressiveConfig>,
    /// Draw one random probing sequence for the whole sweep instead of one
    /// per trial.
    #[serde(default)]
    pub fix_probing: bool,
    #[serde(default)]
    pub sparsity: SparsityMode,
}

fn default_t() -> f64 {
    1.0
}
fn default_snr() -> f64 {
    f64::INFINITY
}
fn default_trials() -> usize {
    1000
}
fn default_threshold() -> f64 {
    1e-5
}

fn ser_snr<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_snr<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Snr {
        Num(f64),
        Text(String),
        Null(()),
    }
    match Snr::deserialize(d)? {
        Snr::Num(v) => Ok(v),
        Snr::Null(()) => Ok(f64::INFINITY),
        Snr::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
            other => Err(serde::de::Error::custom(format!(
                "snr_db must be a number, null or \"inf\", got \"{other}\""
            ))),
        },
    }
}

impl ExperimentConfig {
    /// Parses JSON, reporting the offending line on failure, and validates.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The `(E, D)` pairs of the sweep.
    pub fn pairs(&self) -> Result<Vec<(usize, usize)>> {
        match (&self.ed_pairs, self.e, self.d) {
            (Some(pairs), None, None) => Ok(pairs.clone()),
            (None, Some(e), Some(d)) => Ok(vec![(e, d)]),
            (Some(_), _, _) => Err(Error::invalid("give either ed_pairs or e and d, not both")),
            _ => Err(Error::invalid("both e and d (or ed_pairs) are required")),
        }
    }

    pub fn grid(&self, e: usize, d: usize) -> Result<GridParams> {
        GridParams::with_options(self.l, self.t, e, d, false)
    }

    /// `round(delta * L)`.
    pub fn gamma_card(&self, delta: f64) -> usize {
        (delta * self.l as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let pairs = self.pairs()?;
        if pairs.is_empty() {
            return Err(Error::invalid("at least one (E, D) pair is required"));
        }
        for &(e, d) in &pairs {
            self.grid(e, d)?;
        }
        probing::registry().get(&self.probing)?;
        solvers::registry().get(&self.solver)?;
        if self.delta_grid.is_empty() {
            return Err(Error::invalid("delta_grid is empty"));
        }
        for &delta in &self.delta_grid {
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(Error::invalid(format!("delta {delta} is outside (0, 1]")));
            }
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid("snr_db must be finite or +inf"));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::invalid("success_threshold must be positive"));
        }
        if let Some(c) = &self.compressive {
            c.rows(self.l)?;
        }
        Ok(())
    }
}

/// Outcome of one pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    /// Hash of the trial's seed material, for cross-referencing runs.
    pub trial_id: u64,
    pub delta: f64,
    pub gamma_card: usize,
    pub e: usize,
    pub d: usize,
    pub ed: usize,
    pub solver: String,
    pub probing: String,
    pub snr_db: f64,
    pub rank_hat: usize,
    pub rel_sq_error: f64,
    pub success: bool,
    pub support_exact: bool,
    /// Success with a wrong support.
    pub anomaly: bool,
    /// Solver error or declared failure.
    pub error: Option<String>,
    pub runtime_ms: f64,
}

/// 32-byte ChaCha seed from the experiment seed, `delta` and the trial index.
fn trial_seed(seed: u64, delta: f64, trial_index: usize) -> [u8; 32] {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&delta.to_bits().to_le_bytes());
    bytes[16..24].copy_from_slice(&(trial_index as u64).to_le_bytes());
    bytes[24..].copy_from_slice(b"spreadid");
    bytes
}

fn trial_id(seed: &[u8; 32]) -> u64 {
    // FNV-1a
    seed.iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// The probing sequence shared by all trials when `fix_probing` is set.
pub fn fixed_probing(cfg: &ExperimentConfig) -> Result<ProbingSequence> {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&cfg.seed.to_le_bytes());
    bytes[24..].copy_from_slice(b"probing!");
    let mut rng = ChaCha8Rng::from_seed(bytes);
    probing::registry().get(&cfg.probing)?.generate(cfg.l, &mut rng)
}

fn options_for(cfg: &ExperimentConfig, gamma_card: usize, ed: usize, rows: usize) -> SolverOptions {
    match cfg.sparsity.resolve(cfg.snr_db) {
        SparsityMode::Known => {
            let mut opts = SolverOptions::known_sparsity(gamma_card);
            opts.rank_rule = RankRule::Fixed(gamma_card.min(ed).min(rows));
            opts.music_mode = MusicMode::TopK(gamma_card);
            opts.oracle_max_cardinality = Some(gamma_card);
            opts
        }
        _ => SolverOptions::default(),
    }
}

/// Runs one trial of the full pipeline for `delta` on the pair `(e, d)`.
///
/// Invalid settings (including `|Gamma| = 0`) are errors; solver errors are
/// folded into the record as failures with relative error 1.
pub fn run_trial(
    cfg: &ExperimentConfig,
    delta: f64,
    (e, d): (usize, usize),
    trial_index: usize,
    fixed: Option<&ProbingSequence>,
) -> Result<TrialRecord> {
    let start = Instant::now();
    let grid = cfg.grid(e, d)?;
    let gamma_card = cfg.gamma_card(delta);
    if gamma_card == 0 {
        return Err(Error::invalid(format!(
            "delta {delta} gives an empty support; the relative error is undefined"
        )));
    }
    let seed = trial_seed(cfg.seed, delta, trial_index);
    let mut rng = ChaCha8Rng::from_seed(seed);

    let support = random_support(&grid, gamma_card, &mut rng)?;
    let sf = random_spreading(&grid, &support, &mut rng)?;
    let c = match fixed {
        Some(c) => c.clone(),
        None => probing::registry().get(&cfg.probing)?.generate(cfg.l, &mut rng)?,
    };
    let mut y = simulate(&sf, &c)?;
    if cfg.snr_db.is_finite() {
        y = add_noise(&y, cfg.snr_db, &mut rng)?;
    }
    let z = measure(&y)?;
    let a = build_matrix(&c);
    let solver = solvers::registry().get(&cfg.solver)?;
    let rows = cfg.compressive.as_ref().map_or(cfg.l, |c| c.p);
    let opts = options_for(cfg, gamma_card, grid.ed(), rows);
    let outcome = match &cfg.compressive {
        Some(cc) => compressive_recover(&z, &a, &cc.rows(cfg.l)?, solver.as_ref(), &opts),
        None => solver.solve(z.z(), a.matrix(), &opts),
    };

    let truth = pack_unknowns(&sf);
    let (rank_hat, rel_sq_error, support_exact, error) = match outcome {
        Ok(result) => {
            let err = relative_sq_error(&result.expand(), truth.matrix())?;
            let failure = result.diagnostics.failure.clone();
            (result.rank_hat, err, result.support == support, failure)
        }
        Err(e) => (0, 1.0, false, Some(e.to_string())),
    };
    let success = rel_sq_error <= cfg.success_threshold;
    Ok(TrialRecord {
        trial_index,
        trial_id: trial_id(&seed),
        delta,
        gamma_card,
        e,
        d,
        ed: grid.ed(),
        solver: cfg.solver.clone(),
        probing: cfg.probing.clone(),
        snr_db: cfg.snr_db,
        rank_hat,
        rel_sq_error,
        success,
        support_exact,
        anomaly: success && !support_exact,
        error,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// One aggregated `(delta, (E, D))` cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub delta: f64,
    pub gamma_card: usize,
    pub e: usize,
    pub d: usize,
    pub ed: usize,
    pub snr_db: f64,
    pub solver: String,
    pub probing: String,
    pub sparsity: String,
    pub recovery_prob: f64,
    /// Mean relative squared error.
    pub ere: f64,
    pub trials: usize,
    pub anomalies: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<AggregateRow>,
    /// All trial records, ordered by `(delta, pair, trial_index)`.
    pub trials: Vec<TrialRecord>,
}

pub fn aggregate(cfg: &ExperimentConfig, records: &[TrialRecord]) -> AggregateRow {
    let first = &records[0];
    let n = records.len();
    AggregateRow {
        delta: first.delta,
        gamma_card: first.gamma_card,
        e: first.e,
        d: first.d,
        ed: first.ed,
        snr_db: first.snr_db,
        solver: first.solver.clone(),
        probing: first.probing.clone(),
        sparsity: cfg.sparsity.resolve(cfg.snr_db).label().to_string(),
        recovery_prob: records.iter().filter(|r| r.success).count() as f64 / n as f64,
        ere: records.iter().map(|r| r.rel_sq_error).sum::<f64>() / n as f64,
        trials: n,
        anomalies: records.iter().filter(|r| r.anomaly).count(),
        failures: records.iter().filter(|r| r.error.is_some()).count(),
    }
}

/// Thread count from `SPREADID_THREADS`, if set and valid.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("SPREADID_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs every `(delta, pair)` cell. Trials run in parallel on `threads`
/// workers (default: `SPREADID_THREADS`, else all cores); output order and
/// values do not depend on scheduling.
pub fn run_sweep(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<SweepOutput> {
    cfg.validate()?;
    let pairs = cfg.pairs()?;
    let fixed = if cfg.fix_probing {
        Some(fixed_probing(cfg)?)
    } else {
        None
    };
    let mut cells = Vec::new();
    for &delta in &cfg.delta_grid {
        if cfg.gamma_card(delta) == 0 {
            log::warn!("skipping delta {delta}: round(delta * L) = 0");
            continue;
        }
        for &pair in &pairs {
            cells.push((delta, pair));
        }
    }
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.or_else(threads_from_env) {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let records: Vec<TrialRecord> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, t)| {
                let (delta, pair) = cells[c];
                run_trial(cfg, delta, pair, t, fixed.as_ref())
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows = records
        .chunks(cfg.trials)
        .map(|chunk| aggregate(cfg, chunk))
        .collect();
    Ok(SweepOutput { rows, trials: records })
}

fn num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub const AGGREGATE_HEADER: &str =
    "delta,gamma_card,e,d,ed,snr_db,solver,probing,sparsity,recovery_prob,ere,trials,anomalies,failures";

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], mut out: W) -> Result<()> {
    writeln!(out, "{AGGREGATE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            num(r.delta),
            r.gamma_card,
            r.e,
            r.d,
            r.ed,
            num(r.snr_db),
            r.solver,
            r.probing,
            r.sparsity,
            num(r.recovery_prob),
            num(r.ere),
            r.trials,
            r.anomalies,
            r.failures
        )?;
    }
    Ok(())
}

/// Per-trial CSV. Runtimes are machine-dependent, so they are only written
/// when `timings` is set.
pub fn write_trials_csv<W: Write>(records: &[TrialRecord], timings: bool, mut out: W) -> Result<()> {
    write!(
        out,
        "trial_index,trial_id,delta,gamma_card,e,d,ed,solver,probing,snr_db,rank_hat,rel_sq_error,success,support_exact,anomaly,error"
    )?;
    writeln!(out, "{}", if timings { ",runtime_ms" } else { "" })?;
    for r in records {
        let error = r.error.as_deref().unwrap_or("").replace([',', '\n', '"'], " ");
        write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.trial_index,
            r.trial_id,
            num(r.delta),
            r.gamma_card,
            r.e,
            r.d,
            r.ed,
            r.solver,
            r.probing,
            num(r.snr_db),
            r.rank_hat,
            num(r.rel_sq_error),
            r.success,
            r.support_exact,
            r.anomaly,
            error
        )?;
        if timings {
            write!(out, ",{}", num(r.runtime_ms))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn aggregate_csv_string(rows: &[AggregateRow]) -> String {
    let mut buf = Vec::new();
    write_aggregate_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("ASCII output")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(solver: &str, l: usize, e: usize, d: usize, deltas: &[f64], trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            l,
            t: 1.0,
            e: Some(e),
            d: Some(d),
            ed_pairs: None,
            probing: "random-disc".into(),
            solver: solver.into(),
            delta_grid: deltas.to_vec(),
            snr_db: f64::INFINITY,
            trials,
            seed: 11,
            success_threshold: 1e-5,
            compressive: None,
            fix_probing: false,
            sparsity: SparsityMode::Auto,
        }
    }

    #[test]
    fn config_parsing_accepts_spec_field_names() {
        let text = r#"{
            "L": 5, "E": 2, "D": 3, "probing": "alltop", "solver": "omp",
            "delta_grid": [0.2, 0.4], "snr_db": "inf", "seed": 4
        }"#;
        let cfg = ExperimentConfig::from_json_str(text).unwrap();
        assert_eq!((cfg.l, cfg.trials, cfg.t), (5, 1000, 1.0));
        assert!(cfg.snr_db.is_infinite());
        assert_eq!(cfg.pairs().unwrap(), vec![(2, 3)]);
        let text = r#"{"l": 5, "ed_pairs": [[1, 1], [2, 2]], "probing": "alltop", "solver": "music",
            "delta_grid": [0.6], "snr_db": 10, "seed": 1, "compressive": {"P": 4, "omega": [0, 1, 2, 4]}}"#;
        let cfg = ExperimentConfig::from_json_str(text).unwrap();
        assert_eq!(cfg.snr_db, 10.0);
        assert_eq!(cfg.compressive.unwrap().rows(5).unwrap().rows(), &[0, 1, 2, 4]);
    }

    #[test]
    fn config_errors_carry_line_numbers() {
        let text = "{\n  \"L\": 5,\n  \"probing\": alltop\n}";
        match ExperimentConfig::from_json_str(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad = [
            r#"{"L":5,"E":1,"D":1,"probing":"alltop","solver":"lasso","delta_grid":[0.2],"seed":1}"#,
            r#"{"L":5,"E":1,"D":1,"probing":"alltop","solver":"omp","delta_grid":[1.2],"seed":1}"#,
            r#"{"L":5,"E":1,"D":1,"probing":"alltop","solver":"omp","delta_grid":[0.2],"seed":1,"trials":0}"#,
            r#"{"L":5,"E":1,"probing":"alltop","solver":"omp","delta_grid":[0.2],"seed":1}"#,
            r#"{"L":5,"E":1,"D":1,"probing":"alltop","solver":"omp","delta_grid":[0.2],"seed":1,"extra":1}"#,
            r#"{"L":5,"E":1,"D":1,"probing":"alltop","solver":"omp","delta_grid":[0.2],"seed":1,"compressive":{"P":6}}"#,
        ];
        for text in bad {
            assert!(ExperimentConfig::from_json_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn trials_are_deterministic_and_successful_when_identifiable() {
        let cfg = config("music", 11, 3, 4, &[0.5], 1);
        let a = run_trial(&cfg, 0.5, (3, 4), 7, None).unwrap();
        let b = run_trial(&cfg, 0.5, (3, 4), 7, None).unwrap();
        assert_eq!(
            (a.trial_id, a.rel_sq_error, a.success, a.support_exact),
            (b.trial_id, b.rel_sq_error, b.success, b.support_exact)
        );
        assert_eq!(a.gamma_card, 6);
        assert!(a.success && a.support_exact && !a.anomaly);
        let c = run_trial(&cfg, 0.5, (3, 4), 8, None).unwrap();
        assert_ne!(a.trial_id, c.trial_id);
    }

    #[test]
    fn empty_support_is_rejected() {
        let cfg = config("omp", 11, 1, 1, &[0.01], 1);
        assert!(run_trial(&cfg, 0.01, (1, 1), 0, None).is_err());
    }

    #[test]
    fn single_trial_sweep_matches_run_trial() {
        let cfg = config("omp", 7, 2, 2, &[0.3], 1);
        let out = run_sweep(&cfg, Some(1)).unwrap();
        let rec = run_trial(&cfg, 0.3, (2, 2), 0, None).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].ere, rec.rel_sq_error);
        assert_eq!(out.rows[0].recovery_prob, if rec.success { 1.0 } else { 0.0 });
    }

    #[test]
    fn sweep_is_independent_of_thread_count() {
        let mut cfg = config("music", 7, 2, 3, &[0.3, 0.6], 6);
        cfg.ed_pairs = Some(vec![(1, 1), (2, 3)]);
        cfg.e = None;
        cfg.d = None;
        cfg.snr_db = 15.0;
        let one = run_sweep(&cfg, Some(1)).unwrap();
        let four = run_sweep(&cfg, Some(4)).unwrap();
        assert_eq!(aggregate_csv_string(&one.rows), aggregate_csv_string(&four.rows));
        assert_eq!(one.rows.len(), 4);
        let ed: Vec<usize> = one.rows.iter().map(|r| r.ed).collect();
        assert_eq!(ed, vec![1, 6, 1, 6]);
        assert_eq!(one.rows[0].sparsity, "known");
    }

    #[test]
    fn aggregates_are_recomputable_from_trials() {
        let cfg = config("omp", 7, 1, 2, &[0.3, 0.5], 5);
        let out = run_sweep(&cfg, Some(2)).unwrap();
        for (row, chunk) in out.rows.iter().zip(out.trials.chunks(5)) {
            let mean = chunk.iter().map(|r| r.rel_sq_error).sum::<f64>() / 5.0;
            assert_eq!(row.ere, mean);
            assert!(chunk.iter().all(|r| r.success == (r.rel_sq_error <= 1e-5)));
        }
        let mut buf = Vec::new();
        write_trials_csv(&out.trials, false, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn csv_layout() {
        let cfg = config("music", 5, 1, 1, &[0.4], 2);
        let out = run_sweep(&cfg, Some(1)).unwrap();
        let text = aggregate_csv_string(&out.rows);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), AGGREGATE_HEADER);
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 14);
        assert_eq!(fields[0], "4.0000000000000002e-1");
        assert_eq!(fields[5], "inf");
        assert_eq!(fields[8], "blind");
    }

    #[test]
    fn compressive_oracle_trial() {
        let mut cfg = config("oracle", 5, 1, 1, &[0.4], 1);
        cfg.compressive = Some(CompressiveConfig {
            p: 4,
            omega: OmegaSpec::Named("prefix".into()),
        });
        let rec = run_trial(&cfg, 0.4, (1, 1), 0, None).unwrap();
        assert_eq!(rec.gamma_card, 2);
        assert!(rec.success);
    }
}

//! Command-line front end: probing matrices, simulation, recovery, sweeps and
//! the analysis tools.
//!
//! Exit status: 0 on success, 1 for invalid input, 2 for numerical failures.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use spreadid::analysis::{ambiguous_instance, ambiguous_instance_with_cardinality, stability_bounds};
use spreadid::harness::io::{matrix_from_json, matrix_to_json, matrix_to_string, read_matrix};
use spreadid::harness::{run_sweep, write_aggregate_csv, write_trials_csv, ExperimentConfig};
use spreadid::model::{random_spreading, random_support, seeded_rng, Cell, SeededRng, GridParams, SupportSet};
use spreadid::pipeline::{add_noise, measure, simulate, MeasurementEnsemble, ReceivedSignal};
use spreadid::probing::{self, build_matrix, spark_exhaustive, ProbingSequence, RowSubset};
use spreadid::solvers::{self, compressive_recover, spreading_from_result, MusicMode, RankRule, RecoveryResult, SolverOptions};
use spreadid::{CMat, Complex64, Error, Result};

#[derive(Parser)]
#[command(name = "spreadid", version, about = "Identify sparse time-varying operators from one probing response")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the L x L^2 measurement matrix of a probing sequence.
    GenMatrix {
        #[command(flatten)]
        probe: ProbeArgs,
        /// Output file (matrix container); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the received signal for a spreading-function description.
    Simulate {
        /// JSON description: l, e, d, probing, seed, support or cardinality,
        /// optional snr_db.
        #[arg(long)]
        spec: PathBuf,
        /// Received signal (single-column matrix container).
        #[arg(long)]
        out: PathBuf,
        /// Also write the probing coefficients (single-column matrix).
        #[arg(long)]
        probe_out: Option<PathBuf>,
        /// Also write the true spreading samples (EL x DL matrix).
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Recover support and coefficients from a received signal or from Z.
    Recover(RecoverArgs),
    /// Run a Monte Carlo sweep and write aggregated CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write one CSV row per trial to this file.
        #[arg(long)]
        emit_trials: Option<PathBuf>,
        /// Worker threads (default: SPREADID_THREADS, else all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Include per-trial runtimes in the trial CSV (not reproducible).
        #[arg(long)]
        timings: bool,
    },
    /// Stability bounds alpha, beta of the columns of a support.
    Stability {
        #[command(flatten)]
        probe: ProbeArgs,
        /// Comma-separated column indices k*L + m.
        #[arg(long, value_delimiter = ',', required = true)]
        gamma: Vec<usize>,
        /// Window length T.
        #[arg(long = "T", default_value_t = 1.0)]
        t: f64,
    },
    /// Construct two supports producing identical measurements.
    Counterexample {
        #[arg(long = "L")]
        l: usize,
        #[arg(long = "K")]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Common support size (default: the smallest ambiguous split).
        #[arg(long)]
        cardinality: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive spark of the measurement matrix (small L only).
    Spark {
        #[command(flatten)]
        probe: ProbeArgs,
        /// Largest subset size examined (default L).
        #[arg(long)]
        max: Option<usize>,
    },
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long = "L")]
    l: usize,
    /// Probing family: alltop or random-disc.
    #[arg(long, default_value = "random-disc")]
    probing: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ProbeArgs {
    fn sequence(&self) -> Result<ProbingSequence> {
        probing::registry().get(&self.probing)?.generate(self.l, &mut seeded_rng(self.seed))
    }
}

#[derive(Args)]
struct RecoverArgs {
    /// Received signal (single-column matrix container).
    #[arg(long, conflicts_with = "z", required_unless_present = "z")]
    y: Option<PathBuf>,
    /// Measurement ensemble Z (L x ED matrix container).
    #[arg(long)]
    z: Option<PathBuf>,
    #[arg(long = "L")]
    l: usize,
    #[arg(long = "E")]
    e: usize,
    #[arg(long = "D")]
    d: usize,
    /// Probing coefficients file written by `simulate --probe-out`.
    #[arg(long, conflicts_with = "probing")]
    probe: Option<PathBuf>,
    /// Probing family regenerated from --seed when no --probe file is given.
    #[arg(long)]
    probing: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "music")]
    solver: String,
    /// Relative singular-value threshold for the rank estimate.
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Fixed signal-subspace dimension.
    #[arg(long)]
    rank: Option<usize>,
    /// MUSIC acceptance threshold on the noise-subspace projection.
    #[arg(long)]
    threshold: Option<f64>,
    /// Known support size: MUSIC top-k, OMP and oracle cap.
    #[arg(long)]
    sparsity: Option<usize>,
    /// Use only these rows of Z (comma-separated).
    #[arg(long, value_delimiter = ',', conflicts_with = "rows")]
    omega: Option<Vec<usize>>,
    /// Use only the first P rows of Z.
    #[arg(long)]
    rows: Option<usize>,
    /// JSON output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the recovered spreading samples (EL x DL matrix).
    #[arg(long)]
    spreading_out: Option<PathBuf>,
}

fn read_matrix_file(path: &Path) -> Result<CMat> {
    let file = File::open(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    read_matrix(BufReader::new(file))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn column(values: &[Complex64]) -> CMat {
    CMat::from_column_slice(values.len(), 1, values)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialise");
    s.push('\n');
    s
}

fn spec_field<'a>(spec: &'a Value, names: &[&str]) -> Option<&'a Value> {
    names.iter().find_map(|n| spec.get(*n))
}

fn spec_usize(spec: &Value, names: &[&str]) -> Result<usize> {
    spec_field(spec, names)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| Error::InvalidArgument(format!("spec needs a nonnegative integer `{}`", names[0])))
}

fn spec_probing(spec: &Value, l: usize, rng: &mut SeededRng) -> Result<ProbingSequence> {
    match spec.get("probing") {
        None => probing::registry().get("random-disc")?.generate(l, rng),
        Some(Value::String(name)) => probing::registry().get(name)?.generate(l, rng),
        Some(v @ Value::Array(_)) => {
            let m = matrix_from_json(&json!({ "rows": l, "cols": 1, "data": v }))?;
            ProbingSequence::custom(m.iter().copied().collect())
        }
        Some(_) => Err(Error::InvalidArgument(
            "`probing` must be a family name or a list of [re, im] pairs".into(),
        )),
    }
}

fn cmd_simulate(spec_path: &Path, out: &Path, probe_out: Option<&Path>, truth_out: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(spec_path)?;
    let spec: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    let l = spec_usize(&spec, &["l", "L"])?;
    let e = spec_usize(&spec, &["e", "E"])?;
    let d = spec_usize(&spec, &["d", "D"])?;
    let t = spec_field(&spec, &["t", "T"]).and_then(Value::as_f64).unwrap_or(1.0);
    let seed = spec.get("seed").and_then(Value::as_u64).unwrap_or(0);
    let grid = GridParams::with_options(l, t, e, d, false)?;
    let mut rng = seeded_rng(seed);
    let support = match (spec.get("support"), spec.get("cardinality")) {
        (Some(cells), None) => {
            let cells = cells
                .as_array()
                .ok_or_else(|| Error::InvalidArgument("`support` must be a list of [k, m] pairs".into()))?
                .iter()
                .map(|c| match c.as_array().map(|a| a.as_slice()) {
                    Some([k, m]) => match (k.as_u64(), m.as_u64()) {
                        (Some(k), Some(m)) => Ok(Cell::new(k as usize, m as usize)),
                        _ => Err(Error::InvalidArgument("support cells must be integer pairs".into())),
                    },
                    _ => Err(Error::InvalidArgument("support cells must be [k, m] pairs".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            SupportSet::new(l, cells)?
        }
        (None, Some(card)) => {
            let card = card
                .as_u64()
                .ok_or_else(|| Error::InvalidArgument("`cardinality` must be an integer".into()))?;
            random_support(&grid, card as usize, &mut rng)?
        }
        _ => return Err(Error::InvalidArgument("spec needs exactly one of `support` or `cardinality`".into())),
    };
    let sf = random_spreading(&grid, &support, &mut rng)?;
    let c = spec_probing(&spec, l, &mut rng)?;
    let mut y = simulate(&sf, &c)?;
    match spec.get("snr_db") {
        None | Some(Value::Null) => {}
        Some(Value::String(s)) if s == "inf" => {}
        Some(v) => {
            let snr = v
                .as_f64()
                .ok_or_else(|| Error::InvalidArgument("`snr_db` must be a number or \"inf\"".into()))?;
            y = add_noise(&y, snr, &mut rng)?;
        }
    }
    write_text(Some(out), &matrix_to_string(&column(y.samples())))?;
    if let Some(p) = probe_out {
        write_text(Some(p), &matrix_to_string(&column(c.coeffs())))?;
    }
    if let Some(p) = truth_out {
        write_text(Some(p), &matrix_to_string(sf.samples()))?;
    }
    Ok(())
}

fn result_json(name: &str, result: &RecoveryResult) -> Result<Value> {
    let l = result.support.l();
    let cells: Vec<Value> = result.support.iter().map(|c| json!([c.k, c.m])).collect();
    Ok(json!({
        "solver": name,
        "L": l,
        "support": cells,
        "support_indices": result.support.indices(),
        "rank_hat": result.rank_hat,
        "s_hat": matrix_to_json(&result.s_hat),
        "diagnostics": serde_json::to_value(&result.diagnostics)?,
    }))
}

fn cmd_recover(args: &RecoverArgs) -> Result<()> {
    let grid = GridParams::with_options(args.l, 1.0, args.e, args.d, false)?;
    let z = match (&args.y, &args.z) {
        (Some(path), _) => {
            let m = read_matrix_file(path)?;
            if m.ncols() != 1 {
                return Err(Error::InvalidArgument("received signal must be a single column".into()));
            }
            measure(&ReceivedSignal::new(m.iter().copied().collect(), grid)?)?
        }
        (None, Some(path)) => MeasurementEnsemble::new(read_matrix_file(path)?, grid)?,
        (None, None) => return Err(Error::InvalidArgument("give --y or --z".into())),
    };
    let c = match (&args.probe, &args.probing) {
        (Some(path), _) => {
            let m = read_matrix_file(path)?;
            if m.shape() != (args.l, 1) {
                return Err(Error::InvalidArgument(format!("probe file must be {}x1", args.l)));
            }
            ProbingSequence::custom(m.iter().copied().collect())?
        }
        (None, Some(name)) => probing::registry().get(name)?.generate(args.l, &mut seeded_rng(args.seed))?,
        (None, None) => return Err(Error::InvalidArgument("give --probe or --probing".into())),
    };
    let a = build_matrix(&c);
    let solver = solvers::registry().get(&args.solver)?;

    let mut opts = match args.sparsity {
        Some(k) => {
            let mut o = SolverOptions::known_sparsity(k);
            o.rank_rule = RankRule::Fixed(k.min(grid.ed()));
            o.oracle_max_cardinality = Some(k);
            o
        }
        None => SolverOptions::default(),
    };
    if let Some(t) = args.rank_tol {
        opts.rank_rule = RankRule::Relative(t);
    }
    if let Some(k) = args.rank {
        opts.rank_rule = RankRule::Fixed(k);
    }
    if let Some(t) = args.threshold {
        opts.music_mode = MusicMode::Threshold(t);
    }
    let omega = match (&args.omega, args.rows) {
        (Some(rows), _) => Some(RowSubset::new(args.l, rows.clone())?),
        (None, Some(p)) => Some(RowSubset::prefix(args.l, p)?),
        (None, None) => None,
    };
    let result = match &omega {
        Some(rows) => compressive_recover(&z, &a, rows, solver.as_ref(), &opts)?,
        None => solver.solve(z.z(), a.matrix(), &opts)?,
    };
    for w in &result.diagnostics.warnings {
        log::warn!("{w}");
    }
    if let Some(reason) = &result.diagnostics.failure {
        log::warn!("solver failure: {reason}");
    }
    write_text(args.out.as_deref(), &pretty(&result_json(solver.name(), &result)?))?;
    if let Some(p) = &args.spreading_out {
        let sf = spreading_from_result(&result, &grid)?;
        write_text(Some(p), &matrix_to_string(sf.samples()))?;
    }
    Ok(())
}

fn cmd_sweep(config: &Path, out: &Path, emit_trials: Option<&Path>, threads: Option<usize>, timings: bool) -> Result<()> {
    let text = fs::read_to_string(config)?;
    let cfg = ExperimentConfig::from_json_str(&text)?;
    let result = run_sweep(&cfg, threads)?;
    let mut w = BufWriter::new(File::create(out)?);
    write_aggregate_csv(&result.rows, &mut w)?;
    w.flush()?;
    if let Some(p) = emit_trials {
        let mut w = BufWriter::new(File::create(p)?);
        write_trials_csv(&result.trials, timings, &mut w)?;
        w.flush()?;
    }
    let anomalies: usize = result.rows.iter().map(|r| r.anomalies).sum();
    if anomalies > 0 {
        log::warn!("{anomalies} trials met the error threshold with a wrong support");
    }
    Ok(())
}

fn cmd_stability(probe: &ProbeArgs, gamma: &[usize], t: f64) -> Result<()> {
    let c = probe.sequence()?;
    let a = build_matrix(&c);
    let grid = GridParams::with_options(probe.l, t, 1, 1, false)?;
    let support = SupportSet::from_indices(probe.l, gamma)?;
    let b = stability_bounds(&a, &support, &grid)?;
    write_text(
        None,
        &pretty(&json!({
            "label": "discrete stability proxy",
            "alpha": b.alpha,
            "beta": b.beta,
            "gamma_card": b.gamma_card,
        })),
    )
}

fn cmd_counterexample(l: usize, k: usize, seed: u64, cardinality: Option<usize>, out: Option<&Path>) -> Result<()> {
    let mut rng = seeded_rng(seed);
    let c = probing::random_disc(l, &mut rng)?;
    let a = build_matrix(&c);
    let w = match cardinality {
        Some(card) => ambiguous_instance_with_cardinality(&a, k, card, &mut rng)?,
        None => ambiguous_instance(&a, k, &mut rng)?,
    };
    let value = json!({
        "L": l,
        "K": k,
        "seed": seed,
        "probing": matrix_to_json(&column(c.coeffs())),
        "gamma": w.gamma.indices(),
        "b_gamma": matrix_to_json(&w.b_gamma),
        "gamma_prime": w.gamma_prime.indices(),
        "b_gamma_prime": matrix_to_json(&w.b_gamma_prime),
        "mismatch": w.mismatch(&a),
    });
    write_text(out, &pretty(&value))
}

fn cmd_spark(probe: &ProbeArgs, max: Option<usize>) -> Result<()> {
    let a = build_matrix(&probe.sequence()?);
    let m = a.matrix();
    let spark = spark_exhaustive(m, max.unwrap_or(probe.l))?.resolve(m.nrows(), m.ncols());
    let line = match spark {
        probing::Spark::Exact(s) => format!("spark = {s}\n"),
        probing::Spark::Exceeds(s) => format!("spark > {s}\n"),
    };
    write_text(None, &line)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenMatrix { probe, out } => {
            let a = build_matrix(&probe.sequence()?);
            write_text(out.as_deref(), &matrix_to_string(a.matrix()))
        }
        Command::Simulate {
            spec,
            out,
            probe_out,
            truth_out,
        } => cmd_simulate(&spec, &out, probe_out.as_deref(), truth_out.as_deref()),
        Command::Recover(args) => cmd_recover(&args),
        Command::Sweep {
            config,
            out,
            emit_trials,
            threads,
            timings,
        } => cmd_sweep(&config, &out, emit_trials.as_deref(), threads, timings),
        Command::Stability { probe, gamma, t } => cmd_stability(&probe, &gamma, t),
        Command::Counterexample {
            l,
            k,
            seed,
            cardinality,
            out,
        } => cmd_counterexample(l, k, seed, cardinality, out.as_deref()),
        Command::Spark { probe, max } => cmd_spark(&probe, max),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

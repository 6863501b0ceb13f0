//! `rrif` command-line front end.
//!
//! [`run`] parses arguments and writes to the supplied streams, so the whole
//! tool can be driven in-process.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::authcore::{
    authenticate, enroll, extract_frames, load_db, save_db, AuthParams, EnrollParams, FrameParams,
    ReferenceDb,
};
use crate::cohort::{generate_cohort, CohortSpec, Manifest, ManifestEntry, Role};
use crate::evalx::{
    accuracy, linear_grid, overall_performance, LabeledRecord, PreparedPool,
    DEFAULT_AUTO_GRID_POINTS,
};
use crate::infotheory::{rank_features, DEFAULT_RANK_BINS, DEFAULT_RANK_K};
use crate::learners::bench::compare;
use crate::learners::{DtParams, FeatureMap, KernelParams};
use crate::signal::{load_csv, save_csv, EcgRecord};
use crate::{Error, Result, DEFAULT_FRAME_LEN};

#[derive(Debug, Parser)]
#[command(name = "rrif", version, about = "ECG biometric authentication over RR-interval frames")]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags accepted by every command.
#[derive(Debug, Clone, Args)]
pub struct Shared {
    /// Reference database (JSON)
    #[arg(long, global = true, value_name = "PATH")]
    pub db: Option<PathBuf>,
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Points per RR frame
    #[arg(long, global = true, default_value_t = DEFAULT_FRAME_LEN, value_name = "POINTS")]
    pub frame_len: usize,
    /// Enrollment window, seconds from the record start
    #[arg(long, global = true, default_value_t = 50.0, value_name = "SECONDS")]
    pub train_window_s: f64,
    /// Probe window, seconds
    #[arg(long, global = true, default_value_t = 15.0, value_name = "SECONDS")]
    pub test_window_s: f64,
    /// Quality gate on per-frame MSE, mV² [default: largest enrolled UCL]
    #[arg(long, global = true, value_name = "MV2")]
    pub gate_ucl: Option<f64>,
    /// Minimum fraction of frames that must pass the gate
    #[arg(long, global = true, default_value_t = 0.5, value_name = "FRACTION")]
    pub apr_min: f64,
    /// Multiplier on the candidate's UCL when identifying
    #[arg(long, global = true, default_value_t = 1.0, value_name = "FACTOR")]
    pub id_margin: f64,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort: one ECG CSV per subject plus manifest.json
    Gen(GenArgs),
    /// Train reference functions and add them to the database
    Enroll(EnrollArgs),
    /// Authenticate one ECG record
    Auth(AuthArgs),
    /// Run randomised authentication trials and print the confusion matrix
    Eval(EvalArgs),
    /// Sweep the quality-gate UCL and report OP at each point
    Sweep(SweepArgs),
    /// Compare the decision tree with the kernel regressor on one subject
    Bench(BenchArgs),
    /// Rank frame positions by mutual information with the subject label
    Rank(RankArgs),
    /// Print or dump the RR frames of one record
    Frames(FramesArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Enrolled subjects
    #[arg(long, default_value_t = 10)]
    pub enrolled: usize,
    /// Unknown (never enrolled) subjects
    #[arg(long, default_value_t = 2)]
    pub unknown: usize,
    /// Recording session; 0 is the enrollment session
    #[arg(long, default_value_t = 0)]
    pub session: u64,
    /// Record length, seconds
    #[arg(long, default_value_t = 110.0, value_name = "SECONDS")]
    pub duration_s: f64,
    /// Sampling rate, Hz
    #[arg(long, default_value_t = 360.0, value_name = "HZ")]
    pub fs: f64,
    /// Minimum beat-template MSE between subjects, mV²
    #[arg(long, default_value_t = crate::cohort::DEFAULT_MIN_SEPARATION, value_name = "MV2")]
    pub min_separation: f64,
}

#[derive(Debug, Args)]
pub struct EnrollArgs {
    /// ECG CSV files; the entity id is the file stem
    #[arg(value_name = "CSV")]
    pub records: Vec<PathBuf>,
    /// Enroll every `enrolled` subject of this manifest
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    /// Enrollment timestamp, Unix seconds [default: $SOURCE_DATE_EPOCH or now]
    #[arg(long, value_name = "UNIX_S")]
    pub enrolled_at: Option<u64>,
    /// Accept records shorter than the training window
    #[arg(long)]
    pub allow_short: bool,
    /// Minimum samples per tree leaf
    #[arg(long, default_value_t = 4)]
    pub min_leaf: usize,
    /// Maximum tree depth
    #[arg(long, default_value_t = 32)]
    pub max_depth: usize,
}

#[derive(Debug, Args)]
pub struct AuthArgs {
    /// ECG CSV of the probe; its first test window is used
    #[arg(value_name = "CSV")]
    pub record: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Cohort manifest providing the probe pool
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Number of trials
    #[arg(long, default_value_t = crate::evalx::DEFAULT_TRIALS)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Explicit grid `lo:hi:steps`, mV²
    #[arg(long, value_name = "LO:HI:STEPS", conflicts_with = "grid_auto")]
    pub grid: Option<String>,
    /// Grid from the smallest probe-frame MSE to 3x the largest enrolled UCL (default)
    #[arg(long)]
    pub grid_auto: bool,
    /// Points of the automatic grid
    #[arg(long, default_value_t = DEFAULT_AUTO_GRID_POINTS)]
    pub grid_steps: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Cohort manifest; the chosen subject's training window is used
    #[arg(long, value_name = "PATH", required_unless_present = "record")]
    pub manifest: Option<PathBuf>,
    /// Single ECG CSV instead of a manifest subject
    #[arg(long, value_name = "CSV", conflicts_with = "manifest")]
    pub record: Option<PathBuf>,
    /// Manifest subject id [default: first enrolled]
    #[arg(long)]
    pub subject: Option<String>,
    /// Training pairs drawn (seeded) from the subject's frames
    #[arg(long, default_value_t = 2000)]
    pub max_pairs: usize,
    /// Gaussian kernel scale on standardised features
    #[arg(long, default_value_t = 0.35)]
    pub kernel_scale: f64,
    /// Kernel box constraint C
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Insensitive-zone half width, mV [default: IQR(y)/13.49]
    #[arg(long, value_name = "MV")]
    pub epsilon: Option<f64>,
    /// Minimum samples per tree leaf
    #[arg(long, default_value_t = 4)]
    pub min_leaf: usize,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Cohort manifest; enrolled subjects' training windows are ranked
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Histogram bins per position
    #[arg(long, default_value_t = DEFAULT_RANK_BINS)]
    pub bins: usize,
    /// Positions to report
    #[arg(long, default_value_t = DEFAULT_RANK_K)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct FramesArgs {
    /// ECG CSV file
    #[arg(value_name = "CSV")]
    pub record: PathBuf,
    /// Write one CSV row per frame here instead of a summary
    #[arg(long, value_name = "PATH")]
    pub dump: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 success, 1 domain error, 2 usage error.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let name = command_name(&cli.command);
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {name}: {msg}");
            2
        }
        Err(CliError::Domain(e)) => {
            let _ = writeln!(err, "error: {name}: {e}");
            1
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Gen(_) => "gen",
        Command::Enroll(_) => "enroll",
        Command::Auth(_) => "auth",
        Command::Eval(_) => "eval",
        Command::Sweep(_) => "sweep",
        Command::Bench(_) => "bench",
        Command::Rank(_) => "rank",
        Command::Frames(_) => "frames",
    }
}

enum CliError {
    Usage(String),
    Domain(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        })
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let s = &cli.shared;
    match &cli.command {
        Command::Gen(a) => cmd_gen(s, a, out),
        Command::Enroll(a) => cmd_enroll(s, a, out),
        Command::Auth(a) => cmd_auth(s, a, out, err),
        Command::Eval(a) => cmd_eval(s, a, out),
        Command::Sweep(a) => cmd_sweep(s, a, out),
        Command::Bench(a) => cmd_bench(s, a, out),
        Command::Rank(a) => cmd_rank(s, a, out),
        Command::Frames(a) => cmd_frames(s, a, out),
    }
}

fn header(s: &Shared, out: &mut dyn Write) -> CliResult<()> {
    writeln!(
        out,
        "# frame_len={} train_window_s={} test_window_s={} apr_min={} id_margin={} seed={}",
        s.frame_len, s.train_window_s, s.test_window_s, s.apr_min, s.id_margin, s.seed
    )?;
    Ok(())
}

fn out_dir(s: &Shared) -> CliResult<Option<&Path>> {
    match &s.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn require_db(s: &Shared) -> CliResult<&Path> {
    s.db
        .as_deref()
        .ok_or_else(|| CliError::Usage("--db <PATH> is required".into()))
}

fn auth_params(s: &Shared) -> AuthParams {
    AuthParams {
        test_window_s: s.test_window_s,
        apr_min: s.apr_min,
        id_margin: s.id_margin,
        frames: FrameParams::default(),
    }
}

fn gate(s: &Shared, db: &ReferenceDb) -> CliResult<f64> {
    match s.gate_ucl {
        Some(g) => Ok(g),
        None => Ok(db.max_ucl().ok_or(Error::EmptyDb)?),
    }
}

fn cmd_gen(s: &Shared, a: &GenArgs, out: &mut dyn Write) -> CliResult<()> {
    let dir = out_dir(s)?.ok_or_else(|| CliError::Usage("--out <DIR> is required".into()))?;
    let spec = CohortSpec {
        enrolled: a.enrolled,
        unknown: a.unknown,
        seed: s.seed,
        min_separation: a.min_separation,
    };
    let cohort = generate_cohort(&spec)?;
    let mut subjects = Vec::with_capacity(cohort.len());
    for m in &cohort {
        let rec = m.record(a.duration_s, a.fs, a.session)?;
        let file = format!("{}.csv", m.id);
        save_csv(&rec, dir.join(&file))?;
        subjects.push(ManifestEntry {
            id: m.id.clone(),
            role: m.role,
            file,
            record_seed: m.session_seed(a.session),
            profile: m.profile.clone(),
        });
    }
    let manifest = Manifest {
        seed: s.seed,
        session: a.session,
        fs: a.fs,
        duration_s: a.duration_s,
        subjects,
    };
    write_file(&dir.join("manifest.json"), &manifest.to_json())?;
    writeln!(
        out,
        "wrote {} records ({} enrolled, {} unknown) and manifest.json to {}",
        cohort.len(),
        a.enrolled,
        a.unknown,
        dir.display()
    )?;
    Ok(())
}

fn read_manifest(path: &Path) -> CliResult<(Manifest, PathBuf)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest = Manifest::from_json(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((manifest, base))
}

fn load_entry(base: &Path, e: &ManifestEntry) -> Result<EcgRecord> {
    Ok(load_csv(base.join(&e.file))?.with_subject_id(e.id.clone()))
}

fn enrolled_at(a: &EnrollArgs) -> u64 {
    a.enrolled_at
        .or_else(|| std::env::var("SOURCE_DATE_EPOCH").ok()?.parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

fn cmd_enroll(s: &Shared, a: &EnrollArgs, out: &mut dyn Write) -> CliResult<()> {
    let db_path = require_db(s)?;
    let mut records = Vec::new();
    if let Some(m) = &a.manifest {
        let (manifest, base) = read_manifest(m)?;
        for e in manifest.subjects.iter().filter(|e| e.role == Role::Enrolled) {
            records.push(load_entry(&base, e)?);
        }
    }
    for p in &a.records {
        records.push(load_csv(p)?);
    }
    if records.is_empty() {
        return Err(CliError::Usage("give CSV records or --manifest".into()));
    }

    let mut db = if db_path.exists() {
        let db = load_db(db_path)?;
        if db.frame_len() != s.frame_len {
            return Err(Error::param(
                "frame_len",
                format!("database uses {}, --frame-len is {}", db.frame_len(), s.frame_len),
            )
            .into());
        }
        db
    } else {
        ReferenceDb::new(s.frame_len)
    };
    let params = EnrollParams {
        train_window_s: s.train_window_s,
        allow_short: a.allow_short,
        frames: FrameParams::default(),
        tree: DtParams {
            min_leaf_size: a.min_leaf,
            max_depth: a.max_depth,
        },
        features: FeatureMap::Position,
        enrolled_at: enrolled_at(a),
    };
    let mut lines = Vec::with_capacity(records.len());
    for rec in &records {
        let e = enroll(&mut db, rec.subject_id(), rec, &params)?;
        lines.push(format!(
            "enrolled id={} frames={} leaves={} mean={} std={} ucl={}",
            e.entity_id,
            e.stats.mses.len(),
            e.model.tree.n_leaves(),
            e.stats.mean,
            e.stats.std,
            e.stats.ucl
        ));
    }
    save_db(&db, db_path)?;
    header(s, out)?;
    for l in lines {
        writeln!(out, "{l}")?;
    }
    Ok(())
}

fn cmd_auth(s: &Shared, a: &AuthArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let db = load_db(require_db(s)?)?;
    let rec = load_csv(&a.record)?;
    let g = gate(s, &db)?;
    header(s, err)?;
    writeln!(err, "# gate_ucl={g}")?;
    let d = authenticate(&db, &rec, g, &auth_params(s))?;
    writeln!(out, "{d}")?;
    Ok(())
}

/// Probe pool: every enrolled subject's record after the training window and
/// every unknown subject's whole record, cut into test-window probes.
fn probe_pool(s: &Shared, manifest_path: &Path) -> CliResult<Vec<LabeledRecord>> {
    let (manifest, base) = read_manifest(manifest_path)?;
    let mut pool = Vec::new();
    for e in &manifest.subjects {
        let rec = load_entry(&base, e)?;
        match e.role {
            Role::Enrolled => {
                let rest = (rec.duration_s() - s.train_window_s).max(0.0);
                if rest + 1.0 / rec.fs() < s.test_window_s {
                    continue;
                }
                for w in rec.tail(rest).split(s.test_window_s) {
                    pool.push(LabeledRecord::enrolled(w, &e.id));
                }
            }
            Role::Unknown => {
                for w in rec.split(s.test_window_s) {
                    pool.push(LabeledRecord::unknown(w));
                }
            }
        }
    }
    if pool.is_empty() {
        return Err(Error::NotEnoughData(format!(
            "no {} s probes left after the {} s training window",
            s.test_window_s, s.train_window_s
        ))
        .into());
    }
    Ok(pool)
}

fn cmd_eval(s: &Shared, a: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let db = load_db(require_db(s)?)?;
    let pool = probe_pool(s, &a.manifest)?;
    let g = gate(s, &db)?;
    let prepared = PreparedPool::new(&db, &pool, &auth_params(s))?;
    let (cm, log) = prepared.run_trials(a.trials, g, s.seed)?;
    let chi = accuracy(&cm);
    let op = overall_performance(cm.accepted(), cm.total(), chi.value)?;

    header(s, out)?;
    writeln!(out, "# gate_ucl={g} trials={} pool={}", a.trials, pool.len())?;
    write!(out, "{}", cm.to_table())?;
    writeln!(
        out,
        "accuracy={}{} phi={} N={} op={}",
        chi.value,
        if chi.degenerate { " (nothing accepted)" } else { "" },
        cm.accepted(),
        cm.total(),
        op
    )?;
    if let Some(dir) = out_dir(s)? {
        write_file(&dir.join("confusion.txt"), &cm.to_table())?;
        write_file(&dir.join("confusion.csv"), &cm.to_csv())?;
        let mut trials = String::from("trial,probe,truth,decision\n");
        for t in &log {
            let truth = match &t.truth {
                crate::evalx::Truth::Enrolled(id) => id.as_str(),
                crate::evalx::Truth::Unknown => "unknown",
            };
            trials.push_str(&format!("{},{},{},{}\n", t.index, t.pool_index, truth, t.decision));
        }
        write_file(&dir.join("trials.csv"), &trials)?;
    }
    Ok(())
}

fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let usage = || CliError::Usage(format!("--grid expects lo:hi:steps, got `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(usage());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| usage())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| usage())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| usage())?;
    Ok(linear_grid(lo, hi, steps)?)
}

fn cmd_sweep(s: &Shared, a: &SweepArgs, out: &mut dyn Write) -> CliResult<()> {
    let db = load_db(require_db(s)?)?;
    let pool = probe_pool(s, &a.eval.manifest)?;
    let prepared = PreparedPool::new(&db, &pool, &auth_params(s))?;
    let grid = match &a.grid {
        Some(spec) => parse_grid(spec)?,
        None => prepared.auto_grid(&db, a.grid_steps)?,
    };
    let sweep = prepared.sweep(&grid, a.eval.trials, s.seed)?;
    let best = sweep.best();

    header(s, out)?;
    writeln!(out, "# trials={} pool={} grid_points={}", a.eval.trials, pool.len(), grid.len())?;
    write!(out, "{}", sweep.to_csv())?;
    writeln!(
        out,
        "best ucl={} phi={} N={} accuracy={} op={}",
        best.ucl, best.phi, best.n, best.accuracy, best.op
    )?;
    if let Some(dir) = out_dir(s)? {
        write_file(&dir.join("sweep.csv"), &sweep.to_csv())?;
    }
    Ok(())
}

fn bench_record(a: &BenchArgs) -> CliResult<EcgRecord> {
    if let Some(p) = &a.record {
        return Ok(load_csv(p)?);
    }
    let path = a.manifest.as_deref().expect("clap requires one source");
    let (manifest, base) = read_manifest(path)?;
    let entry = match &a.subject {
        Some(id) => manifest.subjects.iter().find(|e| &e.id == id),
        None => manifest.subjects.iter().find(|e| e.role == Role::Enrolled),
    }
    .ok_or_else(|| Error::param("subject", "no matching subject in the manifest"))?;
    Ok(load_entry(&base, entry)?)
}

fn cmd_bench(s: &Shared, a: &BenchArgs, out: &mut dyn Write) -> CliResult<()> {
    let rec = bench_record(a)?.head(s.train_window_s);
    let frames = extract_frames(&rec, s.frame_len, &FrameParams::default())?;
    let (x, y) = FeatureMap::Position.training_set(frames.frames());
    if x.len() < 2 {
        return Err(Error::NotEnoughData("fewer than 2 training pairs".into()).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut idx = sample(&mut rng, x.len(), a.max_pairs.min(x.len())).into_vec();
    idx.sort_unstable();
    let tx: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
    let ty: Vec<f64> = idx.iter().map(|&i| y[i]).collect();

    let kp = KernelParams {
        c: a.c,
        kernel_scale: a.kernel_scale,
        epsilon: a.epsilon,
        standardize: true,
        ..KernelParams::default()
    };
    let dp = DtParams {
        min_leaf_size: a.min_leaf,
        ..DtParams::default()
    };
    let report = compare(&tx, &ty, &x, &y, dp, kp)?;

    header(s, out)?;
    writeln!(
        out,
        "# subject={} frames={} train_pairs={} eval_pairs={}",
        rec.subject_id(),
        frames.len(),
        report.n_train,
        report.n_eval
    )?;
    write!(out, "{}", report.to_table())?;
    if let Some(dir) = out_dir(s)? {
        write_file(&dir.join("bench.csv"), &report.to_csv())?;
    }
    Ok(())
}

fn cmd_rank(s: &Shared, a: &RankArgs, out: &mut dyn Write) -> CliResult<()> {
    let (manifest, base) = read_manifest(&a.manifest)?;
    let mut sets = Vec::new();
    for e in manifest.subjects.iter().filter(|e| e.role == Role::Enrolled) {
        let rec = load_entry(&base, e)?.head(s.train_window_s);
        sets.push(extract_frames(&rec, s.frame_len, &FrameParams::default())?);
    }
    let ranking = rank_features(&sets, a.bins, a.k)?;
    header(s, out)?;
    write!(out, "{}", ranking.to_csv())?;
    if let Some(dir) = out_dir(s)? {
        write_file(&dir.join("rank.csv"), &ranking.to_csv())?;
    }
    Ok(())
}

fn cmd_frames(s: &Shared, a: &FramesArgs, out: &mut dyn Write) -> CliResult<()> {
    let rec = load_csv(&a.record)?;
    let frames = extract_frames(&rec, s.frame_len, &FrameParams::default())?;
    match &a.dump {
        Some(path) => {
            write_file(path, &frames.to_csv())?;
            writeln!(out, "wrote {} frames of {} points to {}", frames.len(), s.frame_len, path.display())?;
        }
        None => {
            writeln!(out, "frame,start,end")?;
            for (i, f) in frames.frames().iter().enumerate() {
                writeln!(out, "{i},{},{}", f.span().0, f.span().1)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_str(&["rrif", "frobnicate"]).0, 2);
        assert_eq!(run_str(&["rrif", "auth", "x.csv", "--bogus"]).0, 2);
        assert_eq!(run_str(&["rrif", "auth", "x.csv"]).0, 2);
        assert_eq!(run_str(&["rrif", "gen"]).0, 2);
        assert_eq!(run_str(&["rrif", "--help"]).0, 0);
    }

    #[test]
    fn help_lists_units() {
        let (_, out, _) = run_str(&["rrif", "sweep", "--help"]);
        for flag in ["--grid", "--grid-auto", "--gate-ucl", "--apr-min", "--id-margin", "--test-window-s", "SECONDS", "MV2"] {
            assert!(out.contains(flag), "{flag} missing from help");
        }
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:1:3").ok(), Some(vec![0.0, 0.5, 1.0]));
        assert!(matches!(parse_grid("0:1"), Err(CliError::Usage(_))));
        assert!(matches!(parse_grid("a:1:3"), Err(CliError::Usage(_))));
        assert!(matches!(parse_grid("1:0:3"), Err(CliError::Domain(_))));
    }

    #[test]
    fn missing_files_are_domain_errors() {
        let (code, _, err) = run_str(&["rrif", "frames", "/nonexistent/x.csv"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error: frames:"));
    }
}

//! Command-line front end: density profiles, bound reports, randomized
//! verification sweeps, Gaussian quadratic-form decomposition, and Monte
//! Carlo sampling.
//!
//! Exit codes: 0 success (possibly with warnings on stderr), 1 when a
//! certified bound violation is found, 2 for input or configuration errors,
//! 3 when the quadrature cannot reach its accuracy target.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use chi2w::bounds::Verdict;
use chi2w::spectrum::{from_csv, to_csv};
use chi2w::sweep::{tally, BoundTally};
use chi2w::{
    build_report, decompose_gaussian, profile, run_reports, BoundReport, Error, EvalConfig,
    ShiftLaw, Spectrum, SweepConstraint, SweepSpec, WeightLaw,
};

#[derive(Parser)]
#[command(
    name = "chi2w",
    version,
    about = "Densities, density maxima, and analytic bounds for weighted sums \
             of noncentral chi-square variables"
)]
struct Cli {
    /// Cap the worker-thread count (overrides the CHI2W_THREADS variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate density and distribution values over an x grid as CSV rows.
    Density(DensityArgs),
    /// Measure the density maximum and report every bound as JSON.
    Bounds(BoundsArgs),
    /// Run a randomized sweep of spectra and tally bound verdicts.
    Verify(VerifyArgs),
    /// Reduce a Gaussian covariance and mean to a spectrum file.
    Decompose(DecomposeArgs),
    /// Draw Monte Carlo samples, one value per line.
    Sample(SampleArgs),
}

#[derive(Args)]
struct DensityArgs {
    /// Spectrum CSV file (lambda,shift rows, optional `# offset=` line).
    #[arg(long)]
    spectrum: PathBuf,
    /// Evaluation grid as start:stop:count.
    #[arg(long)]
    x: String,
    /// Quadrature accuracy target per point.
    #[arg(long)]
    eps_quad: Option<f64>,
    /// Truncation-tail accuracy target.
    #[arg(long)]
    eps_tail: Option<f64>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Spectrum CSV file.
    #[arg(long)]
    spectrum: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Number of spectra to generate.
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Component-count range as lo:hi.
    #[arg(long, default_value = "3:20")]
    n: String,
    /// Weight law: equal, poly:EXPONENT, exp:RATE, or dirichlet.
    #[arg(long, default_value = "dirichlet")]
    weights: String,
    /// Shift law: zero or gaussian:SCALE.
    #[arg(long, default_value = "zero")]
    shifts: String,
    /// Constraint: none or theorem2-hypothesis.
    #[arg(long, default_value = "none")]
    constraint: String,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Covariance matrix as a d x d numeric CSV.
    #[arg(long)]
    cov: PathBuf,
    /// Mean vector as a numeric CSV (one value per line or one row).
    #[arg(long)]
    mean: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Spectrum CSV file.
    #[arg(long)]
    spectrum: PathBuf,
    /// Number of samples.
    #[arg(long)]
    count: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A terminal failure carrying its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergedQuadrature { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    // Restore the default SIGPIPE disposition so that piping row or report
    // output into a pager that exits early (`chi2w density ... | head`)
    // terminates this process quietly, as for any other stream filter,
    // instead of panicking on the failed stdout write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    init_threads(cli.threads);
    let result = match cli.command {
        Command::Density(args) => cmd_density(&args),
        Command::Bounds(args) => cmd_bounds(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Decompose(args) => cmd_decompose(&args),
        Command::Sample(args) => cmd_sample(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Installs a bounded global worker pool when a cap is requested via flag or
/// the CHI2W_THREADS environment variable.
fn init_threads(flag: Option<usize>) {
    let env_cap = std::env::var("CHI2W_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = flag.or(env_cap) {
        if n > 0 {
            // Ignore a second initialization; the first cap wins.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn load_spectrum(path: &Path) -> Result<Spectrum, Failure> {
    Ok(from_csv(&read_file(path)?)?)
}

fn parse_grid(text: &str) -> Result<(f64, f64, usize), Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(Failure::input(format!(
            "grid must be start:stop:count, got `{text}`"
        )));
    };
    let lo: f64 = start
        .parse()
        .map_err(|_| Failure::input(format!("bad grid start `{start}`")))?;
    let hi: f64 = stop
        .parse()
        .map_err(|_| Failure::input(format!("bad grid stop `{stop}`")))?;
    let n: usize = count
        .parse()
        .map_err(|_| Failure::input(format!("bad grid count `{count}`")))?;
    Ok((lo, hi, n))
}

fn cmd_density(args: &DensityArgs) -> Result<u8, Failure> {
    let spec = load_spectrum(&args.spectrum)?;
    let (lo, hi, count) = parse_grid(&args.x)?;
    let mut cfg = EvalConfig::default();
    if let Some(eq) = args.eps_quad {
        cfg.eps_quad = eq;
    }
    if let Some(et) = args.eps_tail {
        cfg.eps_tail = et;
    }
    let rows = profile(&spec, lo, hi, count, &cfg)?;
    let mut out = String::with_capacity(rows.len() * 32);
    for row in &rows {
        writeln!(out, "{},{},{}", row.x, row.pdf, row.cdf).expect("string write");
    }
    print!("{out}");
    Ok(0)
}

fn warn_inconclusive(reports: &[BoundReport]) {
    let inconclusive: usize = reports
        .iter()
        .flat_map(|r| &r.entries)
        .filter(|e| e.verdict == Verdict::Inconclusive)
        .count();
    if inconclusive > 0 {
        eprintln!(
            "warning: {inconclusive} comparison(s) were inconclusive within \
             the certified error"
        );
    }
}

fn cmd_bounds(args: &BoundsArgs) -> Result<u8, Failure> {
    let spec = load_spectrum(&args.spectrum)?;
    let report = build_report(&spec, &EvalConfig::default())?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serialization")
    );
    warn_inconclusive(std::slice::from_ref(&report));
    Ok(if report.all_sound() { 0 } else { 1 })
}

fn parse_weight_law(text: &str) -> Result<WeightLaw, Failure> {
    if text == "equal" {
        return Ok(WeightLaw::Equal);
    }
    if text == "dirichlet" {
        return Ok(WeightLaw::DirichletRandom);
    }
    if let Some(arg) = text.strip_prefix("poly:") {
        let exponent: f64 = arg
            .parse()
            .map_err(|_| Failure::input(format!("bad polynomial exponent `{arg}`")))?;
        return Ok(WeightLaw::PolynomialDecay { exponent });
    }
    if let Some(arg) = text.strip_prefix("exp:") {
        let rate: f64 = arg
            .parse()
            .map_err(|_| Failure::input(format!("bad exponential rate `{arg}`")))?;
        return Ok(WeightLaw::ExponentialDecay { rate });
    }
    Err(Failure::input(format!(
        "weight law must be equal, poly:EXPONENT, exp:RATE, or dirichlet; got `{text}`"
    )))
}

fn parse_shift_law(text: &str) -> Result<ShiftLaw, Failure> {
    if text == "zero" {
        return Ok(ShiftLaw::Zero);
    }
    if let Some(arg) = text.strip_prefix("gaussian:") {
        let scale: f64 = arg
            .parse()
            .map_err(|_| Failure::input(format!("bad shift scale `{arg}`")))?;
        return Ok(ShiftLaw::Gaussian { scale });
    }
    Err(Failure::input(format!(
        "shift law must be zero or gaussian:SCALE; got `{text}`"
    )))
}

fn parse_constraint(text: &str) -> Result<SweepConstraint, Failure> {
    match text {
        "none" => Ok(SweepConstraint::None),
        "theorem2-hypothesis" => Ok(SweepConstraint::Theorem2Hypothesis),
        _ => Err(Failure::input(format!(
            "constraint must be none or theorem2-hypothesis; got `{text}`"
        ))),
    }
}

#[derive(Serialize)]
struct VerifyDocument<'a> {
    schema: &'static str,
    sweep: &'a SweepSpec,
    tallies: &'a [BoundTally],
    /// Reports containing at least one certified violation.
    failures: Vec<&'a BoundReport>,
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, Failure> {
    let parts: Vec<&str> = args.n.split(':').collect();
    let [lo, hi] = parts.as_slice() else {
        return Err(Failure::input(format!(
            "component range must be lo:hi, got `{}`",
            args.n
        )));
    };
    let n_lo: usize = lo
        .parse()
        .map_err(|_| Failure::input(format!("bad component count `{lo}`")))?;
    let n_hi: usize = hi
        .parse()
        .map_err(|_| Failure::input(format!("bad component count `{hi}`")))?;

    let sweep = SweepSpec {
        count: args.count,
        n_range: (n_lo, n_hi),
        weight_law: parse_weight_law(&args.weights)?,
        shift_law: parse_shift_law(&args.shifts)?,
        constraint: parse_constraint(&args.constraint)?,
        seed: args.seed,
    };
    sweep.validate()?;
    let reports = run_reports(&sweep, &EvalConfig::default())?;
    let tallies = tally(&reports);

    let mut table = String::from("bound                pass  inconcl  fail  n/a\n");
    for t in &tallies {
        writeln!(
            table,
            "{:<20} {:>4}  {:>7}  {:>4}  {:>3}",
            t.name, t.pass, t.inconclusive, t.fail, t.not_applicable
        )
        .expect("string write");
    }
    eprint!("{table}");
    warn_inconclusive(&reports);

    let failures: Vec<&BoundReport> = reports.iter().filter(|r| !r.all_sound()).collect();
    let document = VerifyDocument {
        schema: "chi2w-verify/1",
        sweep: &sweep,
        tallies: &tallies,
        failures,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&document).expect("document serialization")
    );
    Ok(if document.failures.is_empty() { 0 } else { 1 })
}

/// Parses a numeric CSV of whitespace-trimmed comma-separated values, one
/// matrix row per line; blank lines and `#` comments are skipped.
fn parse_matrix(text: &str, what: &str) -> Result<Vec<Vec<f64>>, Failure> {
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = line
            .split(',')
            .map(|cell| cell.trim().parse::<f64>())
            .collect();
        match row {
            Ok(r) => rows.push(r),
            Err(_) => {
                return Err(Failure::input(format!(
                    "{what}: line {} is not numeric: `{line}`",
                    lineno + 1
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(Failure::input(format!("{what}: no numeric rows")));
    }
    Ok(rows)
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<u8, Failure> {
    let cov = parse_matrix(&read_file(&args.cov)?, "covariance")?;
    let d = cov.len();
    for (i, row) in cov.iter().enumerate() {
        if row.len() != d {
            return Err(Failure::input(format!(
                "covariance: row {} has {} entries, expected {d}",
                i + 1,
                row.len()
            )));
        }
    }
    let mean = match &args.mean {
        Some(path) => {
            let rows = parse_matrix(&read_file(path)?, "mean")?;
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            if flat.len() != d {
                return Err(Failure::input(format!(
                    "mean: got {} entries, expected {d}",
                    flat.len()
                )));
            }
            flat
        }
        None => vec![0.0; d],
    };
    let spec = decompose_gaussian(&cov, &mean)?;
    print!("{}", to_csv(&spec));
    Ok(0)
}

fn cmd_sample(args: &SampleArgs) -> Result<u8, Failure> {
    if args.count == 0 {
        return Err(Failure::input("sample count must be positive"));
    }
    let spec = load_spectrum(&args.spectrum)?;
    let values = chi2w::sample(&spec, args.count, args.seed);
    let mut out = String::with_capacity(values.len() * 20);
    for v in values {
        writeln!(out, "{v}").expect("string write");
    }
    print!("{out}");
    Ok(0)
}

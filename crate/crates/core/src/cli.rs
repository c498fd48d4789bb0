//! Command-line front end. [`run`] returns the exit code and captured output so the
//! whole surface can be exercised in-process; `main` only forwards them.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Zero;
use serde::Serialize;

use crate::error::Error;
use crate::norm::{norm_reports, theorem_constants, verify_suite, Suite, VerifyConfig};
use crate::poisson::{per_edge_bound, Evaluator, Route};
use crate::rational::{to_decimal_string, to_fraction_string};
use crate::tree::{EdgeClass, EdgeKind, ProblemInstance};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

const DEFAULT_PRECISION: usize = 12;
const PRECISION_ENV: &str = "BPT_PRECISION";
const GJ_RANGE: i64 = 40;

#[derive(Debug, Parser)]
#[command(name = "bpt", version, about = "Exact Poisson transform of the Busemann cocycle on regular trees")]
struct Cli {
    /// Fractional digits in decimal columns (overrides BPT_PRECISION; default 12).
    #[arg(long, global = true)]
    precision: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transform value on one edge class, by every route, with its bound.
    Transform(TransformArgs),
    /// Squared ℓ² norm for d = 1..d-max with the theorem bounds and fitted prediction.
    Norm(NormArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
    /// Fit C', K' of the exact growth formula and check it on d = 1..40.
    FitGj(FitArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct TransformArgs {
    #[arg(long)]
    q: i64,
    #[arg(long)]
    d: i64,
    #[arg(long, allow_hyphen_values = true)]
    i: i64,
    /// Distance to [x, y]; omit for aligned edges.
    #[arg(long)]
    j: Option<i64>,
    /// Use the orientation opposite to the convention.
    #[arg(long)]
    reversed: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct NormArgs {
    #[arg(long)]
    q: i64,
    #[arg(long)]
    d_max: i64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    q: i64,
    #[arg(long)]
    d_max: i64,
    /// Restrict to one suite.
    #[arg(long, value_parser = parse_suite)]
    suite: Option<Suite>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    q: i64,
}

fn parse_suite(name: &str) -> Result<Suite, String> {
    Suite::from_name(name).ok_or_else(|| {
        let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
        format!("unknown suite '{name}' (expected one of: {})", names.join(", "))
    })
}

/// Exit code plus what would go to stdout and stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { code: EXIT_OK, stdout, stderr: String::new() }
    }

    fn fail(code: i32, stderr: String) -> Self {
        Self { code, stdout: String::new(), stderr }
    }
}

fn usage(msg: impl std::fmt::Display) -> Outcome {
    Outcome::fail(EXIT_USAGE, format!("error: {msg}\n"))
}

fn library_failure(e: Error) -> Outcome {
    match e {
        Error::InvalidInstance(_) | Error::InvalidParameters(_) | Error::ProjectionAtEndpoint(_) => usage(e),
        other => Outcome::fail(EXIT_VERIFY, format!("error: {other}\n")),
    }
}

fn instance(q: i64, d: i64) -> Result<ProblemInstance, Outcome> {
    if q < 2 {
        return Err(usage(format!("--q must satisfy q >= 2 (got {q})")));
    }
    if d < 0 {
        return Err(usage(format!("--d must satisfy d >= 0 (got {d})")));
    }
    ProblemInstance::new(q, d).map_err(library_failure)
}

/// Runs the CLI reading `BPT_PRECISION` from the process environment.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_env(args, std::env::var(PRECISION_ENV).ok())
}

/// Runs the CLI with an explicit value for `BPT_PRECISION`.
pub fn run_with_env<I, T>(args: I, precision_env: Option<String>) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() { Outcome::fail(EXIT_USAGE, text) } else { Outcome::ok(text) };
        }
    };
    let precision = match (cli.precision, precision_env) {
        (Some(p), _) => p,
        (None, Some(env)) => match env.trim().parse() {
            Ok(p) => p,
            Err(_) => return usage(format!("{PRECISION_ENV} must be a non-negative integer (got '{env}')")),
        },
        (None, None) => DEFAULT_PRECISION,
    };
    let result = match cli.command {
        Command::Transform(a) => cmd_transform(&a, precision),
        Command::Norm(a) => cmd_norm(&a, precision),
        Command::Verify(a) => cmd_verify(&a),
        Command::FitGj(a) => cmd_fit_gj(&a, precision),
    };
    result.unwrap_or_else(|o| o)
}

#[derive(Debug, Serialize)]
struct Meta {
    q: i64,
    d_max: i64,
    version: &'static str,
}

#[derive(Debug, Serialize)]
struct Document<R> {
    meta: Meta,
    rows: Vec<R>,
}

fn to_json<R: Serialize>(q: i64, d_max: i64, rows: Vec<R>) -> String {
    let doc = Document { meta: Meta { q, d_max, version: env!("CARGO_PKG_VERSION") }, rows };
    let mut s = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    s.push('\n');
    s
}

fn to_csv<R: Serialize>(rows: &[R]) -> String {
    let mut w = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::NonNumeric).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("UTF-8 fields")
}

#[derive(Debug, Serialize)]
struct TransformRecord {
    q: i64,
    d: i64,
    kind: &'static str,
    i: i64,
    j: Option<i64>,
    reversed: bool,
    value_exact: String,
    value_decimal: String,
    bound_exact: String,
    series: String,
    rearranged: String,
    oracle: String,
}

fn cmd_transform(a: &TransformArgs, precision: usize) -> Result<Outcome, Outcome> {
    let inst = instance(a.q, a.d)?;
    if a.d < 1 {
        return Err(usage("--d must satisfy d >= 1 for transform values"));
    }
    let mut class = match a.j {
        None => EdgeClass::aligned(a.i),
        Some(j) => EdgeClass::transverse(&inst, a.i, j).map_err(library_failure)?,
    };
    class.reversed = a.reversed;
    let ev = Evaluator::new(inst);
    let value = |route| ev.transform(&class, route).map(|v| v.value).map_err(library_failure);
    let (series, rearranged, oracle) = (value(Route::Series)?, value(Route::Rearranged)?, value(Route::Oracle)?);
    if series != rearranged || series != oracle {
        return Err(Outcome::fail(
            EXIT_VERIFY,
            format!("error: routes disagree: series {series}, rearranged {rearranged}, oracle {oracle}\n"),
        ));
    }
    let bound = per_edge_bound(&inst, &class).map_err(library_failure)?;
    let record = TransformRecord {
        q: a.q,
        d: a.d,
        kind: match class.kind {
            EdgeKind::Aligned(_) => "aligned",
            EdgeKind::Transverse(..) => "transverse",
        },
        i: a.i,
        j: a.j,
        reversed: a.reversed,
        value_exact: to_fraction_string(&series),
        value_decimal: to_decimal_string(&series, precision),
        bound_exact: to_fraction_string(&bound),
        series: to_fraction_string(&series),
        rearranged: to_fraction_string(&rearranged),
        oracle: to_fraction_string(&oracle),
    };
    let out = match a.format {
        Format::Json => to_json(a.q, a.d, vec![record]),
        Format::Csv => to_csv(&[record]),
        Format::Text => {
            let mut s = String::new();
            let j = record.j.map(|j| format!(" j={j}")).unwrap_or_default();
            let rev = if record.reversed { " (reversed)" } else { "" };
            let _ = writeln!(s, "q={} d={} {} i={}{j}{rev}", record.q, record.d, record.kind, record.i);
            let _ = writeln!(s, "value       {}  ({})", record.value_exact, record.value_decimal);
            let _ = writeln!(s, "bound       {}", record.bound_exact);
            let _ = writeln!(s, "series      {}", record.series);
            let _ = writeln!(s, "rearranged  {}", record.rearranged);
            let _ = writeln!(s, "oracle      {}", record.oracle);
            s
        }
    };
    Ok(Outcome::ok(out))
}

#[derive(Debug, Serialize)]
struct NormRecord {
    d: i64,
    norm_sq: String,
    norm_sq_decimal: String,
    lower: String,
    upper: String,
    upper_decimal: String,
    gj_prediction: String,
    gj_residual: String,
}

fn cmd_norm(a: &NormArgs, precision: usize) -> Result<Outcome, Outcome> {
    instance(a.q, 0)?;
    if a.d_max < 1 {
        return Err(usage(format!("--d-max must satisfy d-max >= 1 (got {})", a.d_max)));
    }
    let q = u32::try_from(a.q).map_err(|_| usage("--q is too large"))?;
    let (_, reports) = norm_reports(q, a.d_max).map_err(library_failure)?;
    let frac = to_fraction_string;
    let rows: Vec<NormRecord> = reports
        .iter()
        .map(|r| NormRecord {
            d: r.d,
            norm_sq: frac(&r.norm_sq),
            norm_sq_decimal: to_decimal_string(&r.norm_sq, precision),
            lower: frac(&r.lower),
            upper: frac(&r.upper),
            upper_decimal: to_decimal_string(&r.upper, precision),
            gj_prediction: frac(&r.gj_prediction),
            gj_residual: frac(&r.gj_residual),
        })
        .collect();
    let count = rows.len();
    let body = match a.format {
        Format::Json => to_json(a.q, a.d_max, rows),
        Format::Csv => to_csv(&rows),
        Format::Text => {
            let mut s =
                format!("{:>4}  {:>24}  {:>8}  {:>24}  {:>12}\n", "d", "norm_sq", "lower", "upper", "gj_residual");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{:>4}  {:>24}  {:>8}  {:>24}  {:>12}",
                    r.d, r.norm_sq_decimal, r.lower, r.upper_decimal, r.gj_residual
                );
            }
            s
        }
    };
    match &a.out {
        None => Ok(Outcome::ok(body)),
        Some(path) => match std::fs::write(path, &body) {
            Ok(()) => Ok(Outcome::ok(format!("wrote {} rows to {}\n", count, path.display()))),
            Err(e) => Err(Outcome::fail(EXIT_IO, format!("error: cannot write {}: {e}\n", path.display()))),
        },
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<Outcome, Outcome> {
    instance(a.q, 0)?;
    if a.d_max < 2 {
        return Err(usage(format!("--d-max must satisfy d-max >= 2 (got {})", a.d_max)));
    }
    let q = u32::try_from(a.q).map_err(|_| usage("--q is too large"))?;
    let mut cfg = VerifyConfig::new(q, a.d_max);
    if let Some(s) = a.suite {
        cfg = cfg.with_suites(vec![s]);
    }
    let report = verify_suite(&cfg);
    let mut s = String::new();
    let mut failed = 0;
    for c in &report.checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        let _ = write!(s, "{status}  {}/{}  checked={} failed={}", c.suite, c.name, c.checked, c.failed);
        if let Some(w) = &c.first_failure {
            let _ = write!(s, "  first witness: {w}");
            failed += 1;
        }
        s.push('\n');
    }
    let total = report.checks.len();
    if failed == 0 {
        let _ = writeln!(s, "all {total} checks passed for q={} d<={}", a.q, a.d_max);
        Ok(Outcome::ok(s))
    } else {
        let _ = writeln!(s, "{failed} of {total} checks failed for q={} d<={}", a.q, a.d_max);
        Ok(Outcome { code: EXIT_VERIFY, stdout: s, stderr: String::new() })
    }
}

fn cmd_fit_gj(a: &FitArgs, precision: usize) -> Result<Outcome, Outcome> {
    instance(a.q, 0)?;
    let q = u32::try_from(a.q).map_err(|_| usage("--q is too large"))?;
    let (fit, reports) = norm_reports(q, GJ_RANGE).map_err(library_failure)?;
    let first_bad = reports.iter().find(|r| !r.gj_residual.is_zero());
    let (c, k) = theorem_constants(q);
    let mut s = String::new();
    let _ = writeln!(s, "q={}", a.q);
    let _ = writeln!(s, "C'={}  ({})", to_fraction_string(&fit.c), to_decimal_string(&fit.c, precision));
    let _ = writeln!(s, "K'={}  ({})", to_fraction_string(&fit.k), to_decimal_string(&fit.k, precision));
    let _ = writeln!(s, "theorem C={}  K={}", to_fraction_string(&c), to_fraction_string(&k));
    match first_bad {
        None => {
            let _ = writeln!(s, "identity holds for d=1..{GJ_RANGE}");
            Ok(Outcome::ok(s))
        }
        Some(r) => {
            let _ = writeln!(s, "identity fails at d={} (residual {})", r.d, to_fraction_string(&r.gj_residual));
            Ok(Outcome { code: EXIT_VERIFY, stdout: s, stderr: String::new() })
        }
    }
}

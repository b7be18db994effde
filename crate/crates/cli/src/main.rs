use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bilag::prepotential::{default_domain, DomainBox};
use bilag::verify::{self, Format, RunConfig, ScanChart};
use bilag::Complex64;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bilag", version, about = "Numerical checks for special Kähler and hyperkähler structures built from a holomorphic prepotential")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every structural check on seeded random points.
    Verify(VerifyArgs),
    /// Tabulate det g, eigenvalues and signature over a grid.
    Scan(ScanArgs),
    /// Export chart data at given points as a JSON fixture.
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct Common {
    /// Builtin name (quad_plus, quad_minus, cubic, mixed2) or an expression in w1..wn.
    #[arg(short, long)]
    prepotential: String,
    /// Number of complex variables.
    #[arg(short, long, default_value_t = 1)]
    n: usize,
    /// Write output here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Sampling box, e.g. "re1:0.5,2;im1:-1,1". Unlisted axes keep their default.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Finite-difference step for gradient checks (exterior derivatives use 10x).
    #[arg(long)]
    fd_step: Option<f64>,
    /// Tolerance overrides, e.g. "dnabla_i=1e-5,harmonic=1e-9".
    #[arg(long)]
    tol: Option<String>,
    /// Simpson panels per path segment for ξ-recovery.
    #[arg(long, default_value_t = 8)]
    panels: usize,
    /// Worker threads (defaults to all cores). Does not affect the report.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChartArg {
    Parameter,
    Flat,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// Grid box in the same syntax as `verify --domain`. For `--chart flat`
    /// the re/im axes stand for x_1..x_n and x_{n+1}..x_{2n}.
    #[arg(long)]
    domain: Option<String>,
    /// Nodes per axis: one count for all axes or 2n comma-separated counts.
    #[arg(long, default_value = "11")]
    grid: String,
    #[arg(long, value_enum, default_value = "parameter")]
    chart: ChartArg,
    /// Starting parameter point for flat-chart continuation, "re,im;re,im".
    #[arg(long)]
    guess: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct FixtureArgs {
    #[command(flatten)]
    common: Common,
    /// A parameter point "re1,im1;re2,im2;..." (repeatable).
    #[arg(long = "point")]
    points: Vec<String>,
}

fn parse_pair(text: &str) -> Result<(f64, f64), String> {
    let (a, b) = text
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got `{text}`"))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("bad number `{}`: {e}", s.trim()));
    Ok((num(a)?, num(b)?))
}

fn parse_domain(text: Option<&str>, base: DomainBox) -> Result<DomainBox, String> {
    let mut domain = base;
    let n = domain.n();
    for part in text.unwrap_or("").split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (axis, range) = part
            .split_once(':')
            .ok_or_else(|| format!("expected `re<j>:lo,hi` or `im<j>:lo,hi`, got `{part}`"))?;
        let axis = axis.trim();
        let (list, index) = if let Some(j) = axis.strip_prefix("re") {
            (&mut domain.re, j)
        } else if let Some(j) = axis.strip_prefix("im") {
            (&mut domain.im, j)
        } else {
            return Err(format!("unknown axis `{axis}`"));
        };
        let j: usize = index.parse().map_err(|_| format!("unknown axis `{axis}`"))?;
        if j == 0 || j > n {
            return Err(format!("axis `{axis}` out of range for n = {n}"));
        }
        list[j - 1] = parse_pair(range)?;
    }
    domain.validate().map_err(|e| e.to_string())?;
    Ok(domain)
}

fn parse_tolerances(text: Option<&str>) -> Result<BTreeMap<String, f64>, String> {
    let mut out = BTreeMap::new();
    for part in text.unwrap_or("").split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| format!("expected `check=value`, got `{part}`"))?;
        let value = value
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("bad tolerance for `{}`: {e}", name.trim()))?;
        out.insert(name.trim().to_string(), value);
    }
    Ok(out)
}

fn parse_point(text: &str, n: usize) -> Result<Vec<Complex64>, String> {
    let w = text
        .split(';')
        .map(|p| parse_pair(p).map(|(re, im)| Complex64::new(re, im)))
        .collect::<Result<Vec<_>, _>>()?;
    if w.len() != n {
        return Err(format!("point `{text}` has {} components, expected {n}", w.len()));
    }
    Ok(w)
}

fn parse_grid(text: &str, axes: usize) -> Result<Vec<usize>, String> {
    let counts = text
        .split(',')
        .map(|c| c.trim().parse::<usize>().map_err(|e| format!("bad grid count `{c}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    match counts.len() {
        1 => Ok(vec![counts[0]; axes]),
        k if k == axes => Ok(counts),
        k => Err(format!("grid needs 1 or {axes} counts, got {k}")),
    }
}

fn fallback_domain(name: &str, n: usize) -> DomainBox {
    default_domain(name, n).unwrap_or_else(|| DomainBox::uniform(n, (-1.0, 1.0), (-1.0, 1.0)))
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(format!("cannot write to stdout: {e}")),
                _ => Ok(()),
            }
        }
    }
}

/// A failure with its exit code.
struct Exit(u8, String);

fn usage(msg: impl ToString) -> Exit {
    Exit(2, msg.to_string())
}

fn run_verify(args: VerifyArgs) -> Result<u8, Exit> {
    let Common { prepotential, n, out } = args.common;
    let mut config = RunConfig::new(&prepotential, n);
    config.domain = parse_domain(args.domain.as_deref(), config.domain).map_err(usage)?;
    config.samples = args.samples;
    config.seed = args.seed;
    config.panels = args.panels;
    if let Some(step) = args.fd_step {
        config.fd_step = step;
    }
    config.tol_overrides = parse_tolerances(args.tol.as_deref()).map_err(usage)?;
    config.output = out.as_ref().map(|p| p.display().to_string());
    config.format = match args.format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
    };
    config.validate().map_err(usage)?;
    config.resolve().map_err(usage)?;
    let report = match args.threads {
        Some(t) => verify::run_verify_with_threads(&config, t),
        None => verify::run_verify(&config),
    }
    .map_err(|e| Exit(1, e.to_string()))?;
    let text = match config.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    emit(&text, &out).map_err(|e| Exit(1, e))?;
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!(
            "FAIL {}: max residual {:e} (tolerance {:e}, {} errors)",
            c.name, c.max_abs_residual, c.tolerance, c.errors
        );
    }
    Ok(report.outcome().exit_code() as u8)
}

fn run_scan(args: ScanArgs) -> Result<u8, Exit> {
    let Common { prepotential, n, out } = args.common;
    let f = verify::resolve_prepotential(&prepotential, n).map_err(usage)?;
    let chart = match args.chart {
        ChartArg::Parameter => ScanChart::Parameter,
        ChartArg::Flat => {
            let text = args.guess.as_deref().ok_or_else(|| usage("--chart flat needs --guess"))?;
            ScanChart::Flat {
                guess: parse_point(text, n).map_err(usage)?,
            }
        }
    };
    let base = match chart {
        ScanChart::Parameter => fallback_domain(&prepotential, n),
        ScanChart::Flat { .. } => DomainBox::uniform(n, (-1.0, 1.0), (-1.0, 1.0)),
    };
    let domain = parse_domain(args.domain.as_deref(), base).map_err(usage)?;
    let counts = parse_grid(&args.grid, 2 * n).map_err(usage)?;
    let rows = verify::run_scan(&f, &domain, &counts, &chart).map_err(usage)?;
    let text = match args.format {
        FormatArg::Json => serde_json::to_string_pretty(&rows).expect("rows serialize"),
        FormatArg::Csv => verify::scan_to_csv(&rows),
    };
    emit(&text, &out).map_err(|e| Exit(1, e))?;
    Ok(if rows.iter().all(|r| r.singular.is_some()) { 3 } else { 0 })
}

fn run_fixture(args: FixtureArgs) -> Result<u8, Exit> {
    let Common { prepotential, n, out } = args.common;
    let f = verify::resolve_prepotential(&prepotential, n).map_err(usage)?;
    let points = args
        .points
        .iter()
        .map(|p| parse_point(p, n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(usage)?;
    let doc = verify::export_fixture(&f, &points).map_err(|e| Exit(1, e.to_string()))?;
    emit(&serde_json::to_string_pretty(&doc).expect("fixture serializes"), &out).map_err(|e| Exit(1, e))?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => run_verify(a),
        Command::Scan(a) => run_scan(a),
        Command::Fixture(a) => run_fixture(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Exit(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

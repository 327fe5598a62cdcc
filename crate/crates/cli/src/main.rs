//! `wfblow`: operator tables, pathwise extensions, blow-up charts, the
//! cube solver and the verification suites from the command line.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for
//! invalid input.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wfblow_algebra::{param, parse_expr, RationalFunction};
use wfblow_blowup::{make_chain, BlowupChain};
use wfblow_extension::{check_extension_constraints, extend_along_path, BaseSolution};
use wfblow_geometry::{enumerate_faces, DomainKind, OrderedPath, Point, Stratum};
use wfblow_harness::{
    catalog_base, run_suite, solve_dirichlet_cube, DirichletProblem, HarnessError, Suite,
    SuiteOptions, SuiteReport,
};
use wfblow_operators::{apply_operator, restrict_operator, OperatorKind, OperatorSpec};

/// Largest accepted deviation of `wfblow solve` from the multilinear interpolant.
const SOLVE_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "wfblow",
    version,
    about = "Stratified extensions and blow-ups of Wright-Fisher backward operators"
)]
#[command(args_override_self = true)]
struct Cli {
    /// JSON file whose keys mirror the flags; flags on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the coefficient table of an operator, or apply it to --expr.
    Op(OpArgs),
    /// Extend a base solution along a path and optionally check it.
    Extend(ExtendArgs),
    /// Evaluate the blow-up chain of a path at a point, or print its maps.
    Blowup(BlowupArgs),
    /// Run verification suites and write a JSON report.
    Verify(VerifyArgs),
    /// Solve the cube Dirichlet problem from vertex data.
    Solve(SolveArgs),
    /// Summarize a JSON report written by `verify`.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct PathArgs {
    /// Dimension of the simplex; defaults to one less than the path length.
    #[arg(long)]
    n: Option<usize>,
    /// Ordered path as comma-separated vertices, e.g. 0,1,2.
    #[arg(long)]
    path: Option<String>,
}

impl PathArgs {
    fn resolve(&self) -> Result<OrderedPath, Failure> {
        match (&self.path, self.n) {
            (Some(text), n) => OrderedPath::parse(text, n).map_err(usage),
            (None, Some(n)) => OrderedPath::new((0..=n).collect(), n).map_err(usage),
            (None, None) => Err(Failure::Usage("give --path or --n".into())),
        }
    }
}

#[derive(Debug, Args)]
struct OpArgs {
    #[command(flatten)]
    path: PathArgs,
    /// simplex, symmetric or transformed; transformed needs --path.
    #[arg(long)]
    kind: Option<String>,
    /// Blow-up steps to flip, comma-separated and counted from 1.
    #[arg(long)]
    flip: Option<String>,
    /// Restrict to a face: simplex vertices like 0,2 or cube pins like 1=0,3=1.
    #[arg(long)]
    face: Option<String>,
    /// Expression to apply the operator to, in p0..pn and one-letter parameters.
    #[arg(long)]
    expr: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtendArgs {
    #[command(flatten)]
    path: PathArgs,
    /// Base piece on the base face; defaults to a catalog solution.
    #[arg(long)]
    expr: Option<String>,
    /// Time factor λ of the base piece `e^{λt} expr`.
    #[arg(long)]
    lambda: Option<String>,
    /// Check residuals, facet limits and the incompatibility locus.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Value of the parameter c used by the numeric checks.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BlowupArgs {
    #[command(flatten)]
    path: PathArgs,
    /// Comma-separated coordinates p^1..p^n (or blown-up coordinates with --inverse).
    #[arg(long)]
    point: Option<String>,
    /// Map blown-up coordinates back to the simplex.
    #[arg(long)]
    inverse: bool,
    /// Blow-up steps to flip, comma-separated and counted from 1.
    #[arg(long)]
    flip: Option<String>,
    /// Print the chain's forward and inverse maps as JSON.
    #[arg(long)]
    emit_chart: bool,
    /// Expression in p1..pn to rewrite in blown-up coordinates.
    #[arg(long)]
    expr: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// roundtrip, operator, extension, transform, faces, stem, uniqueness,
    /// incompatibility or all.
    #[arg(value_name = "SUITE")]
    suite_arg: Option<String>,
    #[arg(long)]
    suite: Option<String>,
    #[command(flatten)]
    path: PathArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    c: Option<f64>,
    /// Cells per axis of the finite-difference grid.
    #[arg(long)]
    grid: Option<usize>,
    /// Random points for roundtrip and agreement checks.
    #[arg(long)]
    points: Option<usize>,
    /// Multiplies every metric tolerance.
    #[arg(long)]
    tol_scale: Option<f64>,
    /// Where the JSON report goes.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// Also write the cases as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    path: PathArgs,
    /// Cells per axis.
    #[arg(long, default_value_t = 32)]
    grid: usize,
    /// Comma-separated vertex values: origin=v, a 0/1 string like 10=v, or
    /// random; unlisted vertices are 0.
    #[arg(long, default_value = "origin=1")]
    vertex_data: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the grid CSV here instead of standard output.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, default_value = "report.json")]
    input: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Check,
    Runtime(String),
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Solver { .. } => Failure::Runtime(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

/// Writes `contents` through a temporary file in the target directory.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |e: std::io::Error| Failure::Runtime(format!("writing {}: {e}", path.display()));
    let mut file = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    file.write_all(contents.as_bytes()).map_err(io)?;
    file.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write_atomic(path, text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_flips(text: &Option<String>, steps: usize) -> Result<Vec<bool>, Failure> {
    let mut flips = vec![false; steps];
    if let Some(text) = text {
        for item in text.split(',').filter(|s| !s.trim().is_empty()) {
            let m: usize = item
                .trim()
                .parse()
                .map_err(|_| usage(format!("bad step {item:?} in --flip")))?;
            if m == 0 || m > steps {
                return Err(usage(format!("--flip step {m} outside 1..={steps}")));
            }
            flips[m - 1] = true;
        }
    }
    Ok(flips)
}

fn chain_for(path: &OrderedPath, flip: &Option<String>) -> Result<BlowupChain, Failure> {
    let steps = path.n().saturating_sub(path.base_dim() + 1);
    let flips = parse_flips(flip, steps)?;
    make_chain(path, path.n(), &flips).map_err(usage)
}

fn parse_face(n: usize, text: &str) -> Result<Stratum, Failure> {
    if text.contains('=') {
        let mut fixed = BTreeMap::new();
        for item in text.split(',') {
            let (v, b) = item
                .split_once('=')
                .ok_or_else(|| usage(format!("bad pin {item:?} in --face")))?;
            let v: usize = v.trim().parse().map_err(usage)?;
            let b: u8 = b.trim().parse().map_err(usage)?;
            fixed.insert(v, b);
        }
        let free: Vec<usize> = (1..=n).filter(|v| !fixed.contains_key(v)).collect();
        Stratum::cube_face(n, &free, fixed).map_err(usage)
    } else {
        let vertices = text
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(usage))
            .collect::<Result<Vec<_>, _>>()?;
        Stratum::simplex_face(n, &vertices).map_err(usage)
    }
}

fn run_op(args: &OpArgs) -> Result<(), Failure> {
    let kind: OperatorKind = match &args.kind {
        Some(k) => k.parse().map_err(usage)?,
        None if args.path.path.is_some() => OperatorKind::Transformed,
        None => OperatorKind::SimplexL,
    };
    let mut spec = match kind {
        OperatorKind::Transformed => {
            let path = args.path.resolve()?;
            let chain = chain_for(&path, &args.flip)?;
            OperatorSpec::transformed(&path, chain.flips()).map_err(usage)?
        }
        OperatorKind::SimplexL | OperatorKind::SymmetricLambda => {
            let n = match (args.path.n, &args.path.path) {
                (Some(n), _) => n,
                (None, Some(_)) => args.path.resolve()?.n(),
                (None, None) => return Err(usage("give --n")),
            };
            if kind == OperatorKind::SimplexL {
                OperatorSpec::simplex(n)
            } else {
                OperatorSpec::symmetric(n)
            }
        }
    };
    if let Some(face) = &args.face {
        spec = restrict_operator(&spec, &parse_face(spec.n(), face)?).map_err(usage)?;
    }
    let coefficients: serde_json::Map<String, Value> = spec
        .entries()
        .map(|(&(i, j), a)| (format!("a{i}{j}"), Value::String(a.to_string())))
        .collect();
    let mut doc = json!({
        "kind": spec.kind().as_str(),
        "n": spec.n(),
        "stratum": spec.stratum().to_string(),
        "coefficients": coefficients,
    });
    if let Some(expr) = &args.expr {
        let f = parse_expr(expr).map_err(usage)?;
        let applied = apply_operator(&spec, &f).map_err(usage)?;
        doc["applied"] = Value::String(applied.to_string());
    }
    emit(
        &args.out,
        &serde_json::to_string_pretty(&doc).expect("JSON values"),
    )
}

fn run_extend(args: &ExtendArgs) -> Result<(), Failure> {
    let path = args.path.resolve()?;
    let base = match &args.expr {
        Some(expr) => {
            let piece = parse_expr(expr).map_err(usage)?;
            let lambda: BigRational = match &args.lambda {
                Some(l) => parse_expr(l)
                    .map_err(usage)?
                    .constant_value()
                    .ok_or_else(|| usage("--lambda must be a rational constant"))?,
                None => BigRational::from_integer(0.into()),
            };
            BaseSolution::new(
                path.n(),
                &path.face_vertices(path.base_dim()),
                piece,
                lambda,
            )
            .map_err(usage)?
        }
        None => catalog_base(&path)?,
    };
    let ext = extend_along_path(&base, &path).map_err(usage)?;
    let mut doc = json!({
        "path": path.indices(),
        "n": path.n(),
        "extension": ext.pieces().to_json(),
    });
    let mut passed = true;
    if args.check {
        let params = [(param('c'), args.c.unwrap_or(1.0))];
        let report =
            check_extension_constraints(ext.pieces(), &path, 8, args.seed.unwrap_or(0), &params)
                .map_err(usage)?;
        passed = report.passed();
        doc["constraints"] = serde_json::to_value(&report).expect("finite report");
    }
    emit(
        &args.out,
        &serde_json::to_string_pretty(&doc).expect("JSON values"),
    )?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn run_blowup(args: &BlowupArgs) -> Result<(), Failure> {
    let path = args.path.resolve()?;
    let chain = chain_for(&path, &args.flip)?;
    let mut printed = false;
    if let Some(point) = &args.point {
        let p = Point::parse(point).map_err(usage)?;
        if p.n() != path.n() {
            return Err(usage(format!(
                "point has {} coordinates, expected {}",
                p.n(),
                path.n()
            )));
        }
        let q = if args.inverse {
            chain.apply_inverse(&p)
        } else {
            chain.apply(&p)
        }
        .map_err(usage)?;
        let text: Vec<String> = q.coords().iter().map(|x| format!("{x}")).collect();
        emit(&args.out, &text.join(" "))?;
        printed = true;
    }
    if let Some(expr) = &args.expr {
        let f = parse_expr(expr).map_err(usage)?;
        let pushed: RationalFunction = f.substitute(chain.inverse()).map_err(usage)?;
        emit(&args.out, &pushed.to_string())?;
        printed = true;
    }
    if args.emit_chart || !printed {
        emit(
            &args.out,
            &serde_json::to_string_pretty(&chain.to_json()).expect("JSON values"),
        )?;
    }
    Ok(())
}

fn run_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let name = args
        .suite_arg
        .as_ref()
        .or(args.suite.as_ref())
        .map_or("all", String::as_str);
    let suite: Suite = name.parse()?;
    let path = args.path.resolve()?;
    let mut options = SuiteOptions::new(path, args.seed.unwrap_or(0));
    if let Some(c) = args.c {
        options.c = c;
    }
    if let Some(grid) = args.grid {
        options.fd_grid = grid;
    }
    if let Some(points) = args.points {
        options.points = points;
    }
    if let Some(scale) = args.tol_scale {
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(usage("--tol-scale must be a finite non-negative number"));
        }
        options.tolerance_scale = scale;
    }
    let reports = run_suite(suite, &options);
    let report = if suite == Suite::All {
        SuiteReport::merged("all", &reports)
    } else {
        reports.into_iter().next().expect("one report per suite")
    };
    let text = report.to_json();
    write_atomic(&args.out, &text)?;
    if let Some(csv) = &args.csv {
        write_atomic(csv, &cases_csv(&report))?;
    }
    println!("{text}");
    eprintln!(
        "{} of {} cases passed",
        report.pass_count(),
        report.cases.len()
    );
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn cases_csv(report: &SuiteReport) -> String {
    let mut out = String::from("suite,name,status,metric,tol\n");
    for c in &report.cases {
        let status = if c.passed() { "pass" } else { "fail" };
        out.push_str(&format!(
            "{},\"{}\",{status},{:e},{:e}\n",
            report.suite,
            c.name.replace('"', "'"),
            c.metric,
            c.tol
        ));
    }
    out
}

fn vertex_values(n: usize, text: &str, seed: u64) -> Result<BTreeMap<Vec<u8>, f64>, Failure> {
    let vertices: Vec<Vec<u8>> = enumerate_faces(n, 0, DomainKind::Cube)
        .map_err(usage)?
        .iter()
        .map(|v| (1..=n).map(|i| v.fixed()[&i]).collect())
        .collect();
    let mut values: BTreeMap<Vec<u8>, f64> = vertices.iter().map(|b| (b.clone(), 0.0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if item == "random" {
            for v in values.values_mut() {
                *v = rng.gen_range(-1.0..=1.0);
            }
            continue;
        }
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("bad vertex entry {item:?}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad value in {item:?}")))?;
        let bits: Vec<u8> = if key == "origin" {
            vec![0; n]
        } else {
            key.chars()
                .map(|ch| match ch {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(usage(format!("bad vertex {key:?}"))),
                })
                .collect::<Result<_, _>>()?
        };
        let slot = values
            .get_mut(&bits)
            .ok_or_else(|| usage(format!("vertex {key:?} is not a corner of the {n}-cube")))?;
        *slot = value;
    }
    Ok(values)
}

fn run_solve(args: &SolveArgs) -> Result<(), Failure> {
    let path = args.path.resolve()?;
    let n = path.n();
    let values = vertex_values(n, &args.vertex_data, args.seed.unwrap_or(0))?;
    let operator = OperatorSpec::transformed(&path, &[]).map_err(usage)?;
    let problem = DirichletProblem::from_vertex_fn(operator, |bits| values[bits])?;
    let solved = solve_dirichlet_cube(&problem, args.grid)?;
    // Multilinear functions are annihilated by every restricted operator, so
    // the interpolant of the vertex data is the exact solution.
    let interpolant = |x: &[f64]| {
        values
            .iter()
            .map(|(bits, v)| {
                v * bits
                    .iter()
                    .zip(x)
                    .map(|(&b, &t)| if b == 1 { t } else { 1.0 - t })
                    .product::<f64>()
            })
            .sum::<f64>()
    };
    let max_dev = solved.grid.max_deviation(interpolant);
    let csv = solved.grid.to_csv();
    match &args.csv {
        Some(file) => write_atomic(file, &csv)?,
        None => print!("{csv}"),
    }
    println!("max_dev {max_dev:e}");
    if max_dev <= SOLVE_TOL {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn run_report(args: &ReportArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| usage(format!("reading {}: {e}", args.input.display())))?;
    let report: SuiteReport = serde_json::from_str(&text).map_err(usage)?;
    for c in &report.cases {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status}  {}  metric={:e}  tol={:e}",
            c.name, c.metric, c.tol
        );
    }
    println!(
        "{}: {} of {} cases passed",
        report.suite,
        report.pass_count(),
        report.cases.len()
    );
    if let Some(csv) = &args.csv {
        write_atomic(csv, &cases_csv(&report))?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

/// Flags rebuilt from a JSON config: `{"n": 3, "inverse": true}` becomes
/// `--n 3 --inverse`. Arrays are joined with commas.
fn config_args(doc: &Value) -> Result<(Option<String>, Vec<String>), Failure> {
    let map = doc
        .as_object()
        .ok_or_else(|| usage("config must be a JSON object"))?;
    let mut command = None;
    let mut args = Vec::new();
    for (key, value) in map {
        if key == "command" {
            command = Some(
                value
                    .as_str()
                    .ok_or_else(|| usage("\"command\" must be a string"))?
                    .to_string(),
            );
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &Value| match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(x) => Ok(x.to_string()),
            other => Err(usage(format!("unsupported config value {other} for {key}"))),
        };
        match value {
            Value::Bool(true) => args.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                args.extend([flag, parts.join(",")]);
            }
            other => args.extend([flag, scalar(other)?]),
        }
    }
    Ok((command, args))
}

const COMMANDS: [&str; 6] = ["op", "extend", "blowup", "verify", "solve", "report"];

/// Splices the config's flags in front of the command-line flags so that
/// the later command-line occurrences override them.
fn merged_argv(argv: Vec<String>) -> Result<Vec<String>, Failure> {
    let mut rest = Vec::new();
    let mut config = None;
    let mut iter = argv.into_iter();
    let program = iter.next().unwrap_or_else(|| "wfblow".into());
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            config = Some(iter.next().ok_or_else(|| usage("--config needs a file"))?);
        } else if let Some(file) = arg.strip_prefix("--config=") {
            config = Some(file.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(file) = config else {
        return Ok(std::iter::once(program).chain(rest).collect());
    };
    let text = std::fs::read_to_string(&file).map_err(|e| usage(format!("reading {file}: {e}")))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{file}: {e}")))?;
    let (config_command, config_flags) = config_args(&doc)?;
    let position = rest.iter().position(|a| COMMANDS.contains(&a.as_str()));
    let (before, command, after) = match position {
        Some(i) => (rest[..i].to_vec(), rest[i].clone(), rest[i + 1..].to_vec()),
        None => (
            rest.clone(),
            config_command
                .ok_or_else(|| usage("no command given on the command line or in the config"))?,
            Vec::new(),
        ),
    };
    Ok(std::iter::once(program)
        .chain(before)
        .chain(std::iter::once(command))
        .chain(config_flags)
        .chain(after)
        .collect())
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(text) = std::env::var("WFBLOW_THREADS") {
        let threads: usize = text.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
            usage(format!(
                "WFBLOW_THREADS must be a positive integer, got {text:?}"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn run() -> Result<(), Failure> {
    let argv = merged_argv(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => return Err(Failure::Usage(e.to_string())),
        Err(e) => {
            print!("{e}");
            return Ok(());
        }
    };
    configure_threads()?;
    match &cli.command {
        Command::Op(a) => run_op(a),
        Command::Extend(a) => run_extend(a),
        Command::Blowup(a) => run_blowup(a),
        Command::Verify(a) => run_verify(a),
        Command::Solve(a) => run_solve(a),
        Command::Report(a) => run_report(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("{}", msg.trim_end());
            ExitCode::from(2)
        }
    }
}

//! `laginv` — Laplace inversion and gamma-model UMVUE toolbox.
//!
//! Exit codes: 0 when diagnostics (if any) say converges, 2 when the
//! result was emitted with a suspect or forced verdict, 1 on failure or
//! error. Formats and the expression grammar are documented under
//! `docs/`.

mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use laginv_core::{
    beta_simple, build_basis, cr_bound, invert_bromwich, invert_cdf_probabilistic,
    invert_laguerre, invert_post_widder, run_mc, umvue::variance_series_unchecked,
    CoeffDiagnostics, EstimationProblem, InversionReport, McConfig, McReport, Method,
    MethodParams, OrderLimit, TransformExpr, Verdict,
};
use output::{csv_num, emit_error, to_json, write_output, CliError, Stage};

#[derive(Parser)]
#[command(
    name = "laginv",
    version,
    about = "Laguerre-series Laplace inversion and UMVUE construction for gamma models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Invert a Laplace transform on a grid
    Invert(InvertArgs),
    /// Fourier coefficients, variance series and CR bound of the UMVUE
    Umvue(UmvueArgs),
    /// Existence diagnostics for h over a lambda grid
    Check(CheckArgs),
    /// Monte Carlo validation of the UMVUE series
    Mc(McArgs),
    /// Dump the orthonormal basis coefficient table
    Basis(BasisArgs),
    /// Error-vs-N tables of the inversion methods against a reference
    Compare(CompareArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Laguerre,
    #[value(name = "post-widder")]
    PostWidder,
    Bromwich,
    Cdf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct InvertArgs {
    /// Transform expression φ(s)
    #[arg(long)]
    phi: String,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Truncation order (laguerre, post-widder, cdf)
    #[arg(long = "N")]
    n: Option<usize>,
    /// Expansion rate of the Laguerre series
    #[arg(long, default_value_t = 1.0)]
    lambda0: f64,
    /// Contour abscissa for bromwich
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Doubling tolerance for bromwich
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Evaluation grid start:stop:count (inclusive, start > 0)
    #[arg(long)]
    xs: String,
    /// Emit the result even when diagnostics fail
    #[arg(long)]
    force: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct UmvueArgs {
    /// Parametric function h(s)
    #[arg(long)]
    h: String,
    /// Per-observation gamma shape a0
    #[arg(long)]
    a: f64,
    /// Sample size; the total shape is n*a0
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Rate at which beta, variance and the CR bound are evaluated
    #[arg(long)]
    lambda: f64,
    /// Expansion rate of the estimator series
    #[arg(long, default_value_t = 1.0)]
    lambda0: f64,
    /// Series truncation order
    #[arg(long = "M")]
    m: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    h: String,
    #[arg(long)]
    a: f64,
    /// Lambda grid start:stop:count
    #[arg(long = "lambda-grid")]
    lambda_grid: String,
    /// Diagnosis order
    #[arg(long = "M", default_value_t = 80)]
    m: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    h: String,
    #[arg(long)]
    a: f64,
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// True rate of the simulated gamma data
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    reps: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long = "M")]
    m: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BasisArgs {
    #[arg(long)]
    a: f64,
    #[arg(long = "max-degree")]
    max_degree: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    phi: String,
    /// Comma-separated truncation orders
    #[arg(long = "N-list")]
    n_list: String,
    #[arg(long)]
    xs: String,
    /// Reference expression for the true inverse u(x)
    #[arg(long = "ref")]
    reference: String,
    #[arg(long, default_value_t = 1.0)]
    lambda0: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            emit_error(&err);
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let limit = order_limit_from_env()?;
    match cli.command {
        Command::Invert(args) => cmd_invert(args, limit),
        Command::Umvue(args) => cmd_umvue(args, limit),
        Command::Check(args) => cmd_check(args, limit),
        Command::Mc(args) => cmd_mc(args, limit),
        Command::Basis(args) => cmd_basis(args),
        Command::Compare(args) => cmd_compare(args, limit),
    }
}

/// LAGINV_MAX_ORDER overrides the default 512 jet cap (ceiling 4096).
fn order_limit_from_env() -> Result<OrderLimit, CliError> {
    match std::env::var("LAGINV_MAX_ORDER") {
        Ok(raw) => {
            let value: usize = raw
                .parse()
                .map_err(|_| CliError::args(format!("LAGINV_MAX_ORDER: invalid value '{raw}'")))?;
            OrderLimit::new(value).map_err(CliError::from)
        }
        Err(_) => Ok(OrderLimit::default()),
    }
}

fn parse_expr(text: &str) -> Result<TransformExpr, CliError> {
    TransformExpr::parse(text).map_err(|e| CliError {
        stage: Stage::Parse,
        message: e.message.clone(),
        position: Some(e.position),
    })
}

/// Grid spec start:stop:count with inclusive endpoints, count >= 2.
fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::args(format!(
            "grid spec '{spec}' must be start:stop:count"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::args(format!("grid start '{}' is not a number", parts[0])))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::args(format!("grid stop '{}' is not a number", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| CliError::args(format!("grid count '{}' is not an integer", parts[2])))?;
    if !(start > 0.0) || !start.is_finite() || !stop.is_finite() || stop <= start {
        return Err(CliError::args(format!(
            "grid '{spec}' needs 0 < start < stop, both finite"
        )));
    }
    if count < 2 {
        return Err(CliError::args("grid count must be at least 2"));
    }
    Ok((0..count)
        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
        .collect())
}

fn verdict_exit(verdict: Verdict, forced: bool) -> i32 {
    match verdict {
        Verdict::Converges => 0,
        Verdict::Suspect => 2,
        Verdict::Fails => {
            if forced {
                2
            } else {
                1
            }
        }
    }
}

// ---------------------------------------------------------------------------
// invert
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct InvertOutput {
    #[serde(flatten)]
    report: InversionReport,
    forced: bool,
}

fn cmd_invert(args: InvertArgs, limit: OrderLimit) -> Result<i32, CliError> {
    let phi = parse_expr(&args.phi)?;
    let xs = parse_grid(&args.xs)?;
    let need_n = || {
        args.n
            .ok_or_else(|| CliError::args("--N is required for this method"))
    };
    let (report, exit) = match args.method {
        MethodArg::Laguerre => {
            let n = need_n()?;
            let report = invert_laguerre(&phi, args.lambda0, n, &xs, args.force, limit)?;
            let verdict = report
                .diagnostics
                .as_ref()
                .map(|d| d.verdict)
                .unwrap_or(Verdict::Converges);
            let exit = verdict_exit(verdict, args.force);
            (report, exit)
        }
        MethodArg::PostWidder => {
            let n = need_n()?;
            let values = xs
                .iter()
                .map(|&x| invert_post_widder(&phi, n, x, limit))
                .collect::<Result<Vec<_>, _>>()?;
            (
                InversionReport {
                    xs: xs.clone(),
                    values,
                    method: Method::PostWidder,
                    params: MethodParams {
                        n: Some(n),
                        ..MethodParams::default()
                    },
                    diagnostics: None,
                },
                0,
            )
        }
        MethodArg::Bromwich => {
            let mut values = Vec::with_capacity(xs.len());
            let mut t_final = 0.0f64;
            for &x in &xs {
                let r = invert_bromwich(&phi, args.gamma, x, args.tol)?;
                values.push(r.value);
                t_final = t_final.max(r.t_final);
            }
            (
                InversionReport {
                    xs: xs.clone(),
                    values,
                    method: Method::Bromwich,
                    params: MethodParams {
                        gamma: Some(args.gamma),
                        tol: Some(args.tol),
                        t_final: Some(t_final),
                        ..MethodParams::default()
                    },
                    diagnostics: None,
                },
                0,
            )
        }
        MethodArg::Cdf => {
            let n = need_n()?;
            let values = xs
                .iter()
                .map(|&x| invert_cdf_probabilistic(&phi, n, x, limit))
                .collect::<Result<Vec<_>, _>>()?;
            (
                InversionReport {
                    xs: xs.clone(),
                    values,
                    method: Method::ProbabilisticCdf,
                    params: MethodParams {
                        n: Some(n),
                        ..MethodParams::default()
                    },
                    diagnostics: None,
                },
                0,
            )
        }
    };

    let content = match args.format {
        Format::Json => to_json(&InvertOutput {
            report,
            forced: args.force,
        })?,
        Format::Csv => {
            let mut s = String::from("x,value\n");
            for (x, v) in report.xs.iter().zip(&report.values) {
                s.push_str(&format!("{},{}\n", csv_num(*x), csv_num(*v)));
            }
            s
        }
    };
    write_output(&args.out, &content)?;
    Ok(exit)
}

// ---------------------------------------------------------------------------
// umvue
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct UmvueOutput {
    h: String,
    a: f64,
    n: u32,
    a0: f64,
    lambda: f64,
    lambda0: f64,
    m: usize,
    beta: Vec<f64>,
    variance: VarianceOutput,
    cr_bound: f64,
    verdict: Verdict,
}

#[derive(Serialize)]
struct VarianceOutput {
    partial: f64,
    tail: f64,
}

fn cmd_umvue(args: UmvueArgs, limit: OrderLimit) -> Result<i32, CliError> {
    let h = parse_expr(&args.h)?;
    let problem = EstimationProblem::with_sample(h, args.n, args.a)?;
    let bc = beta_simple(&problem, args.lambda, args.m, limit)?;
    let extended = beta_simple(
        &problem,
        args.lambda,
        laginv_core::diagnosis_order(args.m, limit),
        limit,
    )?;
    let verdict = extended.diagnostics.verdict;
    let (vs, _) = variance_series_unchecked(&problem, args.lambda, args.m, limit)?;
    let bound = cr_bound(&problem, args.lambda)?;
    let out = UmvueOutput {
        h: args.h.clone(),
        a: problem.shape(),
        n: problem.sample_size(),
        a0: problem.per_observation_shape(),
        lambda: args.lambda,
        lambda0: args.lambda0,
        m: args.m,
        beta: bc.values.clone(),
        variance: VarianceOutput {
            partial: vs.partial,
            tail: vs.tail,
        },
        cr_bound: bound,
        verdict,
    };
    let content = match args.format {
        Format::Json => to_json(&out)?,
        Format::Csv => {
            let mut s = String::from("n,beta\n");
            for (n, b) in out.beta.iter().enumerate() {
                s.push_str(&format!("{n},{}\n", csv_num(*b)));
            }
            s
        }
    };
    write_output(&args.out, &content)?;
    Ok(verdict_exit(verdict, false))
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CheckOutput {
    h: String,
    a: f64,
    m: usize,
    results: Vec<CheckEntry>,
    overall: Verdict,
}

#[derive(Serialize)]
struct CheckEntry {
    lambda: f64,
    verdict: Verdict,
    decay_class: laginv_core::DecayClass,
    tail_estimate: f64,
    beta0: f64,
}

fn cmd_check(args: CheckArgs, limit: OrderLimit) -> Result<i32, CliError> {
    let h = parse_expr(&args.h)?;
    let problem = EstimationProblem::new(h, args.a)?;
    let grid = parse_grid(&args.lambda_grid)?;
    let order = laginv_core::diagnosis_order(args.m, limit);
    let mut results = Vec::with_capacity(grid.len());
    let mut overall = Verdict::Converges;
    for &lambda in &grid {
        let bc = beta_simple(&problem, lambda, order, limit)?;
        let d: &CoeffDiagnostics = &bc.diagnostics;
        overall = worst(overall, d.verdict);
        results.push(CheckEntry {
            lambda,
            verdict: d.verdict,
            decay_class: d.decay_class,
            tail_estimate: d.tail_estimate,
            beta0: bc.values[0],
        });
    }
    let out = CheckOutput {
        h: args.h.clone(),
        a: args.a,
        m: args.m,
        results,
        overall,
    };
    let content = match args.format {
        Format::Json => to_json(&out)?,
        Format::Csv => {
            let mut s = String::from("lambda,verdict,tail_estimate\n");
            for e in &out.results {
                s.push_str(&format!(
                    "{},{},{}\n",
                    csv_num(e.lambda),
                    e.verdict,
                    csv_num(e.tail_estimate)
                ));
            }
            s
        }
    };
    write_output(&args.out, &content)?;
    Ok(verdict_exit(overall, false))
}

fn worst(a: Verdict, b: Verdict) -> Verdict {
    use Verdict::*;
    match (a, b) {
        (Fails, _) | (_, Fails) => Fails,
        (Suspect, _) | (_, Suspect) => Suspect,
        _ => Converges,
    }
}

// ---------------------------------------------------------------------------
// mc
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct McOutput {
    h: String,
    a: f64,
    n: u32,
    a0: f64,
    lambda: f64,
    reps: u64,
    seed: u64,
    m: usize,
    #[serde(flatten)]
    report: McReport,
}

fn cmd_mc(args: McArgs, limit: OrderLimit) -> Result<i32, CliError> {
    let h = parse_expr(&args.h)?;
    let problem = EstimationProblem::with_sample(h, args.n, args.a)?;
    let cfg = McConfig {
        problem,
        lambda_true: args.lambda,
        reps: args.reps,
        seed: args.seed,
        series_order: args.m,
    };
    let report = run_mc(&cfg, limit)?;
    let out = McOutput {
        h: args.h.clone(),
        a: cfg.problem.shape(),
        n: cfg.problem.sample_size(),
        a0: cfg.problem.per_observation_shape(),
        lambda: args.lambda,
        reps: args.reps,
        seed: args.seed,
        m: args.m,
        report,
    };
    let content = match args.format {
        Format::Json => to_json(&out)?,
        Format::Csv => {
            let json = serde_json::to_value(&out).map_err(|e| CliError::new(Stage::Io, e))?;
            let mut s = String::from("field,value\n");
            if let serde_json::Value::Object(map) = json {
                for (k, v) in map {
                    s.push_str(&format!("{k},{v}\n"));
                }
            }
            s
        }
    };
    write_output(&args.out, &content)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// basis
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BasisOutput {
    a: f64,
    max_degree: usize,
    table_degree: usize,
    polynomials: Vec<Vec<f64>>,
}

fn cmd_basis(args: BasisArgs) -> Result<i32, CliError> {
    let basis = build_basis(args.a, args.max_degree)?;
    let polynomials: Vec<Vec<f64>> = (0..=basis.table_degree())
        .map(|n| basis.poly_coeffs(n).map(|c| c.to_vec()))
        .collect::<Result<_, _>>()?;
    let out = BasisOutput {
        a: args.a,
        max_degree: args.max_degree,
        table_degree: basis.table_degree(),
        polynomials,
    };
    let content = match args.format {
        Format::Json => to_json(&out)?,
        Format::Csv => {
            let mut s = String::from("n,k,coeff\n");
            for (n, poly) in out.polynomials.iter().enumerate() {
                for (k, c) in poly.iter().enumerate() {
                    s.push_str(&format!("{n},{k},{}\n", csv_num(*c)));
                }
            }
            s
        }
    };
    write_output(&args.out, &content)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CompareOutput {
    phi: String,
    reference: String,
    lambda0: f64,
    gamma: f64,
    tol: f64,
    xs: Vec<f64>,
    entries: Vec<CompareEntry>,
}

#[derive(Serialize)]
struct CompareEntry {
    method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    max_abs_err: f64,
    rms_err: f64,
}

fn cmd_compare(args: CompareArgs, limit: OrderLimit) -> Result<i32, CliError> {
    let phi = parse_expr(&args.phi)?;
    let reference = parse_expr(&args.reference)?;
    let xs = parse_grid(&args.xs)?;
    let n_list: Vec<usize> = args
        .n_list
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| CliError::args(format!("invalid N '{}' in --N-list", tok)))
        })
        .collect::<Result<_, _>>()?;
    if n_list.is_empty() {
        return Err(CliError::args("--N-list must contain at least one order"));
    }
    let truth: Vec<f64> = xs
        .iter()
        .map(|&x| reference.eval_real(x).map_err(CliError::from))
        .collect::<Result<_, _>>()?;

    let errors = |values: &[f64]| -> (f64, f64) {
        let mut max_abs: f64 = 0.0;
        let mut sq = 0.0;
        for (v, t) in values.iter().zip(&truth) {
            let e = (v - t).abs();
            max_abs = max_abs.max(e);
            sq += e * e;
        }
        (max_abs, (sq / values.len() as f64).sqrt())
    };

    let mut entries = Vec::new();
    for &n in &n_list {
        let lag = invert_laguerre(&phi, args.lambda0, n, &xs, true, limit)?;
        let (max_abs_err, rms_err) = errors(&lag.values);
        entries.push(CompareEntry {
            method: Method::Laguerre,
            n: Some(n),
            max_abs_err,
            rms_err,
        });
    }
    for &n in &n_list {
        let values: Vec<f64> = xs
            .iter()
            .map(|&x| invert_post_widder(&phi, n, x, limit))
            .collect::<Result<_, _>>()?;
        let (max_abs_err, rms_err) = errors(&values);
        entries.push(CompareEntry {
            method: Method::PostWidder,
            n: Some(n),
            max_abs_err,
            rms_err,
        });
    }
    {
        let values: Vec<f64> = xs
            .iter()
            .map(|&x| invert_bromwich(&phi, args.gamma, x, args.tol).map(|r| r.value))
            .collect::<Result<_, _>>()?;
        let (max_abs_err, rms_err) = errors(&values);
        entries.push(CompareEntry {
            method: Method::Bromwich,
            n: None,
            max_abs_err,
            rms_err,
        });
    }

    let out = CompareOutput {
        phi: args.phi.clone(),
        reference: args.reference.clone(),
        lambda0: args.lambda0,
        gamma: args.gamma,
        tol: args.tol,
        xs,
        entries,
    };
    let content = match args.format {
        Format::Json => to_json(&out)?,
        Format::Csv => {
            let mut s = String::from("method,n,max_abs_err,rms_err\n");
            for e in &out.entries {
                let n = e.n.map(|v| v.to_string()).unwrap_or_default();
                let m = serde_json::to_value(e.method)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                s.push_str(&format!(
                    "{m},{n},{},{}\n",
                    csv_num(e.max_abs_err),
                    csv_num(e.rms_err)
                ));
            }
            s
        }
    };
    write_output(&args.out, &content)?;
    Ok(0)
}

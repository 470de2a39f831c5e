//! `maxbern` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 synthesis or
//! convergence failure, 3 certificate check failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use maxbern_core::bounds::{compute_d1_with, DEFAULT_D1_BUDGET};
use maxbern_core::montecarlo::{estimate_max_tail_at, lil_run, LilPath, DEFAULT_LEVEL};
use maxbern_core::oracle::exact_max_tail_dp;
use maxbern_core::synthesis::{
    check_certificate_with, synthesize_with, SynthesisConfig, TailCount, DEFAULT_EPSILON, DEFAULT_N0_CEILING,
};
use maxbern_core::{with_threads, BernsteinParams, Error, Magnitude, MaximalCertificate, ProcessKind, ProcessSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SYNTHESIS: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

pub const SEED_ENV: &str = "MAXBERN_SEED";

#[derive(Parser, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[command(name = "maxbern", version, about = "Maximal Bernstein-type inequalities: synthesis, checking and simulation")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Master seed; MAXBERN_SEED may be used instead, but not both.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Defaults to json for synth and d1, csv otherwise.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Synthesize the constants of the maximal bound.
    Synth(SynthArgs),
    /// Replay the induction for a certificate on an (n, t) grid.
    Check(CheckArgs),
    /// Maximal tail probabilities, simulated or exact.
    Tail(TailArgs),
    /// Iterated-logarithm statistic per replication.
    Lil(LilArgs),
    /// Least admissible D1 for the mixing bound.
    D1(D1Args),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long = "A", id = "A")]
    #[serde(rename = "A")]
    pub scale: f64,
    #[arg(long = "a", id = "a")]
    #[serde(rename = "a")]
    pub rate: f64,
    #[arg(long = "b", id = "b", default_value_t = 0.0)]
    #[serde(rename = "b")]
    pub growth: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub c: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_N0_CEILING)]
    pub n0_ceiling: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailCountArg {
    Printed,
    Summands,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckArgs {
    /// Certificate JSON file.
    #[arg(long)]
    pub cert: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n_max: u64,
    /// Points per n in the t-grid.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Length of the last piece in the decomposition.
    #[arg(long, value_enum, default_value_t = TailCountArg::Printed)]
    pub tail_count: TailCountArg,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailArgs {
    /// Process: a kind name or a JSON object such as {"kind":"markov","rho":0.7}.
    #[arg(long)]
    pub spec: String,
    #[arg(long)]
    pub n: u64,
    /// Comma-separated thresholds.
    #[arg(long = "t", id = "t", value_delimiter = ',', num_args = 1.., required = true)]
    pub t: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub reps: u64,
    /// Exact dynamic program instead of simulation ({-1, +1} walks only).
    #[arg(long)]
    pub exact: bool,
    /// Certificate whose maximal bound is compared against.
    #[arg(long)]
    pub cert: Option<PathBuf>,
    /// Confidence level of the Clopper-Pearson interval.
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    pub level: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilArgs {
    #[arg(long)]
    pub spec: String,
    #[arg(long, default_value_t = 1 << 20)]
    pub n_max: u64,
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 200)]
    pub reps: u64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D1Args {
    #[arg(long = "M", id = "M")]
    #[serde(rename = "M")]
    pub m: f64,
    #[arg(long)]
    pub eta: f64,
    /// Largest n the outer scan may reach.
    #[arg(long, default_value_t = DEFAULT_D1_BUDGET)]
    pub budget: u64,
}

/// A failed run: exit code and message for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Synthesis { .. } | Error::Convergence(_) => EXIT_SYNTHESIS,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Rendered output plus the exit code it should end with.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub body: Vec<u8>,
    pub code: i32,
    pub warnings: Vec<String>,
}

/// `--seed` and `MAXBERN_SEED` are mutually exclusive; neither means 0.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>) -> Result<u64, Failure> {
    match (flag, env) {
        (Some(_), Some(_)) => Err(Failure::usage(format!(
            "both --seed and {SEED_ENV} are set; use one"
        ))),
        (Some(s), None) => Ok(s),
        (None, Some(text)) => text
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("{SEED_ENV}={text:?} is not a 64-bit unsigned integer"))),
        (None, None) => Ok(0),
    }
}

/// Parses `args`, runs the command and writes its output. Returns the exit code.
pub fn main_with(args: Vec<OsString>, seed_env: Option<String>) -> i32 {
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&config, seed_env.as_deref()) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            if let Err(e) = emit(&config, &out.body) {
                eprintln!("error: {}", e.message);
                return e.code;
            }
            out.code
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn emit(config: &RunConfig, body: &[u8]) -> Result<(), Failure> {
    let result = match &config.output {
        Some(path) => std::fs::write(path, body),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body).and_then(|_| out.flush())
        }
    };
    result.map_err(|e| Failure::usage(format!("cannot write output: {e}")))
}

pub fn run(config: &RunConfig, seed_env: Option<&str>) -> Result<Rendered, Failure> {
    let seed = resolve_seed(config.seed, seed_env)?;
    let threads = config.threads;
    with_threads(threads, || dispatch(config, seed))?
}

fn dispatch(config: &RunConfig, seed: u64) -> Result<Rendered, Failure> {
    let format = config.format;
    match &config.command {
        Command::Synth(a) => cmd_synth(a, format.unwrap_or(Format::Json)),
        Command::Check(a) => cmd_check(a, format.unwrap_or(Format::Csv)),
        Command::Tail(a) => cmd_tail(a, seed, format.unwrap_or(Format::Csv)),
        Command::Lil(a) => cmd_lil(a, seed, format.unwrap_or(Format::Csv)),
        Command::D1(a) => cmd_d1(a, format.unwrap_or(Format::Json)),
    }
}

/// Round-trip-safe float text: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `exp(ln)` with 17 significant digits, beyond the `f64` range if needed.
pub fn fmt_ln(ln: f64) -> String {
    if ln == f64::NEG_INFINITY {
        return fmt_f64(0.0);
    }
    let value = ln.exp();
    if value.is_normal() {
        return fmt_f64(value);
    }
    let exponent = (ln / std::f64::consts::LN_10).floor();
    let mut mantissa = (ln - exponent * std::f64::consts::LN_10).exp();
    let mut exponent = exponent as i64;
    if mantissa >= 10.0 {
        mantissa /= 10.0;
        exponent += 1;
    }
    format!("{mantissa:.16}e{exponent}")
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Failure::usage(format!("csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    w.into_inner().map_err(|e| Failure::usage(format!("csv: {e}")))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut body = serde_json::to_vec_pretty(value).map_err(|e| Failure::usage(format!("json: {e}")))?;
    body.push(b'\n');
    Ok(body)
}

fn ok(body: Vec<u8>) -> Rendered {
    Rendered {
        body,
        code: EXIT_OK,
        warnings: Vec::new(),
    }
}

const CERT_FIELDS: [&str; 13] = ["A", "a", "b", "gamma", "c", "p", "q", "alpha", "c1", "c2", "c3", "n0", "C"];

fn cmd_synth(a: &SynthArgs, format: Format) -> Result<Rendered, Failure> {
    let params = BernsteinParams::new(a.scale, a.rate, a.growth, a.gamma)?;
    let config = SynthesisConfig {
        epsilon: a.epsilon,
        n0_ceiling: a.n0_ceiling,
    };
    let cert = synthesize_with(&params, a.c, &config)?;
    Ok(ok(match format {
        Format::Json => {
            let mut body = cert.to_json().into_bytes();
            body.push(b'\n');
            body
        }
        Format::Csv => {
            let row = vec![
                fmt_f64(params.scale),
                fmt_f64(params.rate),
                fmt_f64(params.growth),
                fmt_f64(params.gamma),
                fmt_f64(cert.c),
                fmt_f64(cert.p),
                fmt_f64(cert.q),
                fmt_f64(cert.alpha),
                fmt_f64(cert.c1),
                fmt_f64(cert.c2),
                fmt_f64(cert.c3),
                cert.n0.to_string(),
                fmt_ln(cert.ln_prefactor()),
            ];
            csv_bytes(&CERT_FIELDS, &[row])?
        }
    }))
}

fn read_cert(path: &PathBuf) -> Result<MaximalCertificate, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(MaximalCertificate::from_json(&text)?)
}

#[derive(Serialize)]
struct CheckDoc<'a> {
    induction_range: Option<(u64, u64)>,
    all_pass: bool,
    worst_margin: f64,
    warnings: &'a [String],
    cells: &'a [maxbern_core::synthesis::CheckCell],
}

fn cmd_check(a: &CheckArgs, format: Format) -> Result<Rendered, Failure> {
    let cert = read_cert(&a.cert)?;
    if let Some(v) = cert.violations().first() {
        return Err(Failure {
            code: EXIT_CHECK,
            message: format!("certificate violates an invariant: {v}"),
        });
    }
    if a.grid < 2 {
        return Err(Failure::usage("--grid must be at least 2"));
    }
    if a.n_max == 0 {
        return Err(Failure::usage("--n-max must be positive"));
    }
    let tail = match a.tail_count {
        TailCountArg::Printed => TailCount::Printed,
        TailCountArg::Summands => TailCount::Summands,
    };
    let report = check_certificate_with(&cert, a.n_max, a.grid, tail);
    let mut warnings = Vec::new();
    if report.induction_range.is_none() {
        warnings.push(format!(
            "empty induction range: n_max = {} is below n0 = {}; only base sizes were checked",
            a.n_max, cert.n0
        ));
    }
    let body = match format {
        Format::Json => json_bytes(&CheckDoc {
            induction_range: report.induction_range,
            all_pass: report.all_pass,
            worst_margin: report.worst_margin,
            warnings: &warnings,
            cells: &report.cells,
        })?,
        Format::Csv => {
            let mut rows: Vec<Vec<String>> = Vec::with_capacity(report.cells.len() + 1);
            if report.induction_range.is_none() {
                rows.push(vec![
                    cert.n0.to_string(),
                    String::new(),
                    "warning_empty_induction_range".to_string(),
                    String::new(),
                    "true".to_string(),
                ]);
            }
            rows.extend(report.cells.iter().map(|c| {
                vec![
                    c.n.to_string(),
                    fmt_f64(c.t),
                    c.region.to_string(),
                    fmt_f64(c.margin),
                    c.pass.to_string(),
                ]
            }));
            csv_bytes(&["n", "t", "region", "margin", "pass"], &rows)?
        }
    };
    Ok(Rendered {
        body,
        code: if report.all_pass { EXIT_OK } else { EXIT_CHECK },
        warnings,
    })
}

#[derive(Serialize)]
struct TailRow {
    n: u64,
    t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_exact: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    bound_generalized: Option<Magnitude>,
    bound_holds: Option<bool>,
}

fn cmd_tail(a: &TailArgs, seed: u64, format: Format) -> Result<Rendered, Failure> {
    let spec = ProcessSpec::parse(&a.spec)?;
    let cert = a.cert.as_ref().map(read_cert).transpose()?;
    let rows: Vec<TailRow> = if a.exact {
        if !spec.kind.is_finite_support() {
            return Err(Failure::usage(format!("--exact needs a {{-1, +1}} walk, got {spec}")));
        }
        a.t.iter()
            .map(|&t| {
                let p = exact_max_tail_dp(&spec, a.n, t)?.prob;
                Ok(TailRow {
                    n: a.n,
                    t,
                    p_hat: None,
                    p_exact: Some(p),
                    ci_low: None,
                    ci_high: None,
                    bound_generalized: None,
                    bound_holds: None,
                })
            })
            .collect::<Result<_, Error>>()?
    } else {
        estimate_max_tail_at(&spec, a.n, &a.t, a.reps, seed, a.level)?
            .into_iter()
            .map(|e| TailRow {
                n: e.n,
                t: e.t,
                p_hat: Some(e.p_hat),
                p_exact: None,
                ci_low: Some(e.ci_low),
                ci_high: Some(e.ci_high),
                bound_generalized: None,
                bound_holds: None,
            })
            .collect()
    };
    let rows: Vec<TailRow> = rows
        .into_iter()
        .map(|mut r| {
            if let Some(cert) = &cert {
                let ln_bound = cert.ln_bound(r.n as f64, r.t);
                let upper = r.p_exact.or(r.ci_high).unwrap_or(1.0);
                r.bound_generalized = Some(Magnitude::from_ln(ln_bound));
                r.bound_holds = Some(upper.ln() <= ln_bound);
            }
            r
        })
        .collect();
    let body = match format {
        Format::Json => json_bytes(&rows)?,
        Format::Csv => {
            let p_col = if a.exact { "p_exact" } else { "p_hat" };
            let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        fmt_f64(r.t),
                        opt(r.p_exact.or(r.p_hat)),
                        opt(r.ci_low),
                        opt(r.ci_high),
                        r.bound_generalized.map(|m| fmt_ln(m.ln())).unwrap_or_default(),
                        r.bound_holds.map(|b| b.to_string()).unwrap_or_default(),
                    ]
                })
                .collect();
            csv_bytes(
                &["n", "t", p_col, "ci_low", "ci_high", "bound_generalized", "bound_holds"],
                &table,
            )?
        }
    };
    Ok(ok(body))
}

/// Nearest-rank quantile.
fn quantile(xs: &mut [f64], q: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let idx = ((q * xs.len() as f64).ceil() as usize).clamp(1, xs.len()) - 1;
    Some(xs[idx])
}

const LIL_QUANTILES: [(&str, f64); 3] = [("q05", 0.05), ("q50", 0.5), ("q95", 0.95)];

#[derive(Serialize)]
struct LilSummary {
    label: &'static str,
    stat: Option<f64>,
    onesided_stat: Option<f64>,
    /// Summaries for the YZ mixture are over `Y = 1` paths only.
    y_value: Option<u8>,
}

#[derive(Serialize)]
struct LilDoc<'a> {
    spec: &'a ProcessSpec,
    lambda: f64,
    n_max: u64,
    checkpoints: &'a [u64],
    paths: &'a [LilPath],
    summary: &'a [LilSummary],
}

fn cmd_lil(a: &LilArgs, seed: u64, format: Format) -> Result<Rendered, Failure> {
    let spec = ProcessSpec::parse(&a.spec)?;
    let res = lil_run(&spec, a.n_max, a.lambda, a.reps, seed)?;
    let is_yz = matches!(spec.kind, ProcessKind::YZMixture);
    let selected: Vec<&LilPath> = res
        .paths
        .iter()
        .filter(|p| !is_yz || p.y_value == Some(1))
        .collect();
    let summary: Vec<LilSummary> = LIL_QUANTILES
        .iter()
        .map(|&(label, q)| {
            let mut stats: Vec<f64> = selected.iter().map(|p| p.stat).collect();
            let mut ones: Vec<f64> = selected.iter().map(|p| p.onesided_stat).collect();
            LilSummary {
                label,
                stat: quantile(&mut stats, q),
                onesided_stat: quantile(&mut ones, q),
                y_value: is_yz.then_some(1),
            }
        })
        .collect();
    let body = match format {
        Format::Json => json_bytes(&LilDoc {
            spec: &spec,
            lambda: res.lambda,
            n_max: res.n_max,
            checkpoints: &res.checkpoints,
            paths: &res.paths,
            summary: &summary,
        })?,
        Format::Csv => {
            let mut header = vec!["rep", "stat", "onesided_stat"];
            if is_yz {
                header.push("y_value");
            }
            let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
            let mut rows: Vec<Vec<String>> = res
                .paths
                .iter()
                .map(|p| {
                    let mut row = vec![p.rep.to_string(), fmt_f64(p.stat), fmt_f64(p.onesided_stat)];
                    if is_yz {
                        row.push(p.y_value.map(|y| y.to_string()).unwrap_or_default());
                    }
                    row
                })
                .collect();
            for s in &summary {
                let mut row = vec![s.label.to_string(), opt(s.stat), opt(s.onesided_stat)];
                if is_yz {
                    row.push("1".to_string());
                }
                rows.push(row);
            }
            csv_bytes(&header, &rows)?
        }
    };
    Ok(ok(body))
}

#[derive(Serialize)]
struct D1Doc {
    #[serde(rename = "M")]
    m: f64,
    eta: f64,
    #[serde(rename = "D1")]
    d1: f64,
}

fn cmd_d1(a: &D1Args, format: Format) -> Result<Rendered, Failure> {
    let sup = compute_d1_with(a.m, a.eta, a.budget)?;
    let doc = D1Doc {
        m: a.m,
        eta: a.eta,
        d1: sup.d1,
    };
    Ok(ok(match format {
        Format::Json => json_bytes(&doc)?,
        Format::Csv => csv_bytes(&["M", "eta", "D1"], &[vec![fmt_f64(doc.m), fmt_f64(doc.eta), fmt_f64(doc.d1)]])?,
    }))
}

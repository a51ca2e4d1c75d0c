mod report;

use std::cell::Cell;
use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use mcreduce::chain::{period, LogBase, MarkovChain, ProbabilityVector, StochasticMatrix};
use mcreduce::io::{self as mio, Format};
use mcreduce::method1::approximate_rows;
use mcreduce::method2::Method;
use mcreduce::oracle::{coupled_method1_report, grid_entropy_max, lp_row_max, lp_tv_ball_max};
use mcreduce::pipeline::{Reducer, ReductionResult};
use mcreduce::random::{random_chain, random_payoff, random_probability_vector, seeded_rng};
use mcreduce::{max_entropy, waterfill, Error, LiftedChain};

use report::{matrix, num, nums, render};

#[derive(Parser)]
#[command(name = "mcreduce", version, about = "Markov chain reduction under a total-variation budget")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary distribution and period of a chain.
    Stationary(IoArgs),
    /// Row-wise approximation Φ† of the transition matrix and its reduction Φ.
    Method1(Method1Args),
    /// Payoff-maximizing reduction of the stationary distribution.
    Occupancy(ReduceArgs),
    /// Entropy-maximizing reduction of the stationary distribution.
    Entropy(ReduceArgs),
    /// Aggregated and lifted chain at a reduction threshold.
    Lift(LiftArgs),
    /// Compare the closed forms against the exact oracles on random instances.
    Verify(VerifyArgs),
    /// Emit a seeded random irreducible chain.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Occupancy,
    Entropy,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Occupancy => Method::Occupancy,
            MethodArg::Entropy => Method::Entropy,
        }
    }
}

#[derive(Args)]
struct IoArgs {
    /// Transition matrix file (CSV or JSON); `-` reads stdin.
    #[arg(long, short)]
    input: PathBuf,
    /// Report format. Defaults to the input format, which is JSON when the
    /// file ends in `.json` or starts with `{`, and CSV otherwise.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Logarithm base for reported entropies and KL rates: `e` or `2`.
    #[arg(long, default_value = "e")]
    log_base: LogBase,
    #[arg(skip)]
    input_format: Cell<Option<Format>>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct RadiusArgs {
    /// Total-variation budget R in [0, 2].
    #[arg(long, allow_hyphen_values = true)]
    radius: Option<f64>,
    /// Radius grid `start:stop:step`, evaluated in parallel.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args)]
struct Method1Args {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    radius: RadiusArgs,
    /// Payoff vector ℓ over destination states. Defaults to μ.
    #[arg(long)]
    ell: Option<PathBuf>,
    /// Also write the reduced matrix Φ here, in the output format.
    #[arg(long)]
    phi_out: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ReduceRadiusArgs {
    /// Total-variation budget R in [0, 2].
    #[arg(long, allow_hyphen_values = true)]
    radius: Option<f64>,
    /// Radius grid `start:stop:step`, evaluated in parallel.
    #[arg(long)]
    sweep: Option<String>,
    /// One result at R = 0 and at each threshold, with the lifted chain.
    #[arg(long)]
    at_thresholds: bool,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    radius: ReduceRadiusArgs,
    /// Payoff vector ℓ (occupancy only). Defaults to μ.
    #[arg(long)]
    ell: Option<PathBuf>,
    /// Entropy only: start states of equal stationary mass in one group
    /// instead of rejecting the chain.
    #[arg(long)]
    allow_ties: bool,
}

#[derive(Args)]
struct LiftArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Must be 0 or one of the method's thresholds.
    #[arg(long, allow_hyphen_values = true)]
    radius: f64,
    /// Payoff vector ℓ (occupancy only). Defaults to μ.
    #[arg(long)]
    ell: Option<PathBuf>,
    #[arg(long)]
    allow_ties: bool,
    /// Also write the aggregated matrix Φ here, in the output format.
    #[arg(long)]
    phi_out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    instances: u64,
    /// Grid spacing of the entropy oracle.
    #[arg(long, default_value_t = 1e-3)]
    mesh: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 25)]
    states: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability that an off-cycle transition is zeroed.
    #[arg(long, default_value_t = 0.0)]
    sparsity: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Failure to read an input file; mapped to the parse exit code.
#[derive(Debug)]
struct InputError(String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

/// A lift requested at a radius where no state reduction occurs.
#[derive(Debug)]
struct OffThreshold(String);

impl fmt::Display for OffThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for OffThreshold {}

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 3;
const EXIT_NOT_IRREDUCIBLE: u8 = 4;
const EXIT_RADIUS: u8 = 5;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InputError>() {
            return EXIT_INPUT;
        }
        if cause.is::<OffThreshold>() {
            return EXIT_RADIUS;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Parse { .. }
                | Error::DimensionMismatch { .. }
                | Error::EmptyInput
                | Error::NonFinite { .. }
                | Error::NegativeProbability { .. }
                | Error::NonStochastic { .. }
                | Error::NotSquare { .. }
                | Error::DuplicateLabel(..)
                | Error::TooLarge { .. } => EXIT_INPUT,
                Error::NotIrreducible(_) => EXIT_NOT_IRREDUCIBLE,
                Error::InvalidRadius(_) => EXIT_RADIUS,
                _ => EXIT_FAILURE,
            };
        }
    }
    EXIT_FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Stationary(a) => stationary(&a),
        Command::Method1(a) => method1(&a),
        Command::Occupancy(a) => reduce(&a, Method::Occupancy),
        Command::Entropy(a) => reduce(&a, Method::Entropy),
        Command::Lift(a) => lift(&a),
        Command::Verify(a) => verify(&a),
        Command::Gen(a) => gen(&a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| InputError(format!("reading stdin: {e}")))?;
        return Ok(s);
    }
    fs::read_to_string(path)
        .map_err(|e| InputError(format!("reading {}: {e}", path.display())).into())
}

fn infer_format(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    }
}

fn sniff_format(path: &Path, text: &str) -> Format {
    if text.trim_start().starts_with('{') {
        Format::Json
    } else {
        infer_format(path)
    }
}

impl IoArgs {
    fn format(&self) -> Format {
        match self.format {
            Some(f) => f.into(),
            None => self
                .input_format
                .get()
                .unwrap_or_else(|| infer_format(&self.input)),
        }
    }

    fn chain(&self) -> Result<MarkovChain> {
        let text = read_text(&self.input)?;
        let format = sniff_format(&self.input, &text);
        self.input_format.set(Some(format));
        let p = mio::parse_matrix(&text, format)
            .with_context(|| format!("parsing {}", self.input.display()))?;
        Ok(MarkovChain::new(p)?)
    }

    fn emit(&self, value: &Value) -> Result<()> {
        write_out(self.output.as_deref(), &render(value, self.format() == Format::Json))
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn read_ell(path: Option<&Path>, n: usize) -> Result<Option<Vec<f64>>> {
    let Some(path) = path else { return Ok(None) };
    let text = read_text(path)?;
    let v = mio::parse_vector(&text, sniff_format(path, &text))
        .with_context(|| format!("parsing {}", path.display()))?;
    if v.values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.values.len(),
        }
        .into());
    }
    Ok(Some(v.values))
}

fn radii(spec: &str) -> Result<Vec<f64>> {
    mio::parse_sweep_spec(spec).with_context(|| format!("sweep spec {spec:?}"))
}

fn labels_of(labels: &[String], idx: &[usize]) -> Value {
    json!(idx.iter().map(|&i| labels[i].as_str()).collect::<Vec<_>>())
}

fn stationary(a: &IoArgs) -> Result<u8> {
    let chain = a.chain()?;
    let mu = chain.mu();
    a.emit(&json!({
        "labels": mu.labels(),
        "mu": nums(mu.entries()),
        "period": period(chain.p()),
    }))?;
    Ok(0)
}

fn method1(a: &Method1Args) -> Result<u8> {
    let chain = a.io.chain()?;
    let ell = read_ell(a.ell.as_deref(), chain.n())?
        .unwrap_or_else(|| chain.mu().entries().to_vec());
    if let Some(spec) = &a.radius.sweep {
        let points = radii(spec)?
            .par_iter()
            .map(|&r| {
                let res = approximate_rows(&chain, &ell, r)?;
                Ok(json!({
                    "R": num(r),
                    "payoff": num(res.payoff),
                    "reduced_size": res.kept_states.len(),
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        a.io.emit(&json!({ "points": points }))?;
        return Ok(0);
    }
    let r = a.radius.radius.expect("clap requires one radius option");
    let res = approximate_rows(&chain, &ell, r)?;
    let labels = chain.p().labels();
    let budget: f64 = res.alphas.iter().zip(chain.mu().iter()).map(|(a, m)| a * m).sum();
    a.io.emit(&json!({
        "radius": num(r.min(2.0)),
        "labels": labels,
        "R_max": nums(&res.r_max_rows),
        "alphas": nums(&res.alphas),
        "budget_used": num(budget),
        "payoff": num(res.payoff),
        "kept_states": labels_of(labels, &res.kept_states),
        "Phi_dagger": matrix(res.phi_dagger.rows()),
        "Phi": matrix(res.phi.rows()),
    }))?;
    if let Some(path) = &a.phi_out {
        write_out(Some(path), &mio::matrix_to_string(&res.phi, a.io.format()))?;
    }
    Ok(0)
}

fn lifted_json(l: &LiftedChain, base: LogBase) -> Value {
    json!({
        "phi_map": l.partition.map_one_based(),
        "Phi": matrix(l.phi.rows()),
        "Phi_hat": matrix(l.phi_hat.rows()),
        "kl_rate": num(base.from_nats(l.kl_rate)),
    })
}

fn objective(res: &ReductionResult, base: LogBase) -> f64 {
    match res.method {
        Method::Occupancy => res.objective,
        Method::Entropy => base.from_nats(res.objective),
    }
}

fn result_json(res: &ReductionResult, base: LogBase) -> Value {
    let mut m = Map::new();
    let labels = res.nu_star.labels();
    let col_labels: Vec<String> = res
        .q_dagger
        .column_states
        .iter()
        .map(|g| g.iter().map(|&i| labels[i].as_str()).collect::<Vec<_>>().join("+"))
        .collect();
    m.insert("radius".into(), num(res.radius));
    m.insert("objective".into(), num(objective(res, base)));
    m.insert("reduced_size".into(), json!(res.reduced_size()));
    m.insert("labels".into(), json!(labels));
    m.insert("nu_star".into(), nums(res.nu_star.entries()));
    m.insert("nu_bar_labels".into(), json!(res.reduced.nu_bar.labels()));
    m.insert("nu_bar".into(), nums(res.reduced.nu_bar.entries()));
    let index_map: Vec<Vec<usize>> = res
        .reduced
        .index_map
        .iter()
        .map(|g| g.iter().map(|i| i + 1).collect())
        .collect();
    m.insert("index_map".into(), json!(index_map));
    m.insert("Q_dagger_columns".into(), json!(col_labels));
    m.insert("Q_dagger".into(), matrix(res.q_dagger.matrix.rows()));
    m.insert("Q_columns".into(), json!(res.q.col_labels()));
    m.insert("Q".into(), matrix(res.q.rows()));
    m.insert(
        "lift".into(),
        res.lifted.as_ref().map_or(Value::Null, |l| lifted_json(l, base)),
    );
    Value::Object(m)
}

fn reduce(a: &ReduceArgs, method: Method) -> Result<u8> {
    let chain = a.io.chain()?;
    let ell = match method {
        Method::Occupancy => read_ell(a.ell.as_deref(), chain.n())?,
        Method::Entropy => {
            if a.ell.is_some() {
                log::warn!("--ell is ignored by the entropy method");
            }
            None
        }
    };
    let reducer = Reducer::new(&chain, method, ell, a.allow_ties)?;
    let base = a.io.log_base;
    let mut out = Map::new();
    out.insert("method".into(), json!(method.to_string()));
    out.insert("thresholds".into(), nums(reducer.thresholds()));
    if a.radius.at_thresholds {
        let results: Vec<Value> = reducer
            .at_thresholds()?
            .iter()
            .map(|r| result_json(r, base))
            .collect();
        out.insert("results".into(), Value::Array(results));
    } else if let Some(spec) = &a.radius.sweep {
        let points = radii(spec)?
            .par_iter()
            .map(|&r| {
                let res = reducer.at(r)?;
                Ok(json!({
                    "R": num(r),
                    "objective": num(objective(&res, base)),
                    "reduced_size": res.reduced_size(),
                    "kl_rate": res.lifted.as_ref().map_or(Value::Null, |l| num(base.from_nats(l.kl_rate))),
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        out.insert("points".into(), Value::Array(points));
    } else {
        let r = a.radius.radius.expect("clap requires one radius option");
        let res = reducer.at(r)?;
        if let Value::Object(m) = result_json(&res, base) {
            out.extend(m);
        }
    }
    a.io.emit(&Value::Object(out))?;
    Ok(0)
}

fn lift(a: &LiftArgs) -> Result<u8> {
    let chain = a.io.chain()?;
    let method = Method::from(a.method);
    let ell = match method {
        Method::Occupancy => read_ell(a.ell.as_deref(), chain.n())?,
        Method::Entropy => None,
    };
    let reducer = Reducer::new(&chain, method, ell, a.allow_ties)?;
    let r = mcreduce::chain::check_radius(a.radius)?;
    if reducer.lift_point(r).is_none() {
        let listed: Vec<String> = std::iter::once(0.0)
            .chain(reducer.thresholds().iter().copied())
            .map(|t| mio::format_value(report::tidy(t)))
            .collect();
        return Err(OffThreshold(format!(
            "no state reduction occurs at R = {}; valid radii for {method}: {}",
            a.radius,
            listed.join(", ")
        ))
        .into());
    }
    let res = reducer.at(r)?;
    let lifted = res.lifted.as_ref().expect("threshold radius lifts");
    a.io.emit(&lifted_json(lifted, a.io.log_base))?;
    if let Some(path) = &a.phi_out {
        write_out(Some(path), &mio::matrix_to_string(&lifted.phi, a.io.format()))?;
    }
    Ok(0)
}

const GAP_TOL: f64 = 1e-9;
const MAX_VERIFY_STATES: usize = 5;
const MAX_GRID_VERIFY_STATES: usize = 4;

struct Check {
    instance: u64,
    states: usize,
    radius: f64,
    name: &'static str,
    oracle: f64,
    closed_form: f64,
    pass: bool,
}

fn verify_instance(seed: u64, k: u64, mesh: f64) -> Result<Vec<Check>> {
    let mut rng = seeded_rng(seed.wrapping_add(k));
    let n = rng.random_range(2..=MAX_VERIFY_STATES);
    let radius = rng.random_range(0.0..=2.0);
    let mut checks = Vec::new();
    let mut push = |name, oracle: f64, closed: f64, pass: bool| {
        checks.push(Check {
            instance: k,
            states: n,
            radius,
            name,
            oracle,
            closed_form: closed,
            pass,
        })
    };

    let mu = random_probability_vector(&mut rng, n)?;
    let ell = random_payoff(&mut rng, n, 0.3);
    let rep = lp_tv_ball_max(&ell, &mu, radius)?;
    let closed = waterfill(&mu, &ell, radius)?.payoff;
    push("tv_ball", rep.oracle_value, closed, (rep.oracle_value - closed).abs() <= GAP_TOL);

    let chain = random_chain(&mut rng, n, 0.3)?;
    let ell = random_payoff(&mut rng, n, 0.3);
    let rows = approximate_rows(&chain, &ell, radius)?;
    for i in 0..n {
        let p_row = ProbabilityVector::new(chain.p().row(i).to_vec())?;
        let rep = lp_row_max(&ell, &p_row, rows.alphas[i])?;
        let closed: f64 = rows.phi_dagger.row(i).iter().zip(&ell).map(|(q, l)| q * l).sum();
        push("row", rep.oracle_value, closed, (rep.oracle_value - closed).abs() <= GAP_TOL);
    }

    if n <= MAX_GRID_VERIFY_STATES {
        let rep = grid_entropy_max(&mu, radius, mesh)?;
        let closed = mcreduce::entropy(&max_entropy(&mu, radius)?.per_state);
        let slack = 2.0 * mesh * n as f64;
        push("entropy_grid", rep.oracle_value, closed, closed >= rep.oracle_value - slack);
    }

    // The row-wise construction is feasible for the coupled problem, so the
    // exact optimum can only be larger.
    let rep = coupled_method1_report(&chain, &ell, radius)?;
    push("coupled", rep.oracle_value, rep.closed_form_value, rep.gap >= -GAP_TOL);
    Ok(checks)
}

fn verify(a: &VerifyArgs) -> Result<u8> {
    if !(a.mesh > 0.0 && a.mesh <= 1e-3) {
        return Err(Error::InvalidArgument(format!("mesh {} must lie in (0, 1e-3]", a.mesh)).into());
    }
    let checks: Vec<Check> = (0..a.instances)
        .into_par_iter()
        .map(|k| verify_instance(a.seed, k, a.mesh))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let failures = checks.iter().filter(|c| !c.pass).count();
    let rows: Vec<Value> = checks
        .iter()
        .map(|c| {
            json!({
                "instance": c.instance,
                "states": c.states,
                "radius": num(c.radius),
                "check": c.name,
                "oracle": num(c.oracle),
                "closed_form": num(c.closed_form),
                "gap": num(c.oracle - c.closed_form),
                "pass": c.pass,
            })
        })
        .collect();
    let value = json!({
        "seed": a.seed,
        "instances": a.instances,
        "failures": failures,
        "checks": rows,
    });
    write_out(a.output.as_deref(), &render(&value, matches!(a.format, FormatArg::Json)))?;
    if failures > 0 {
        eprintln!("{failures} oracle check(s) failed");
        return Ok(EXIT_FAILURE);
    }
    Ok(0)
}

fn gen(a: &GenArgs) -> Result<u8> {
    if a.states == 0 {
        return Err(Error::InvalidArgument("--states must be positive".into()).into());
    }
    if !(0.0..=1.0).contains(&a.sparsity) {
        return Err(Error::InvalidArgument("--sparsity must lie in [0, 1]".into()).into());
    }
    let mut rng = seeded_rng(a.seed);
    let chain = random_chain(&mut rng, a.states, a.sparsity)?;
    let p: &StochasticMatrix = chain.p();
    write_out(a.output.as_deref(), &mio::matrix_to_string(p, a.format.into()))?;
    Ok(0)
}

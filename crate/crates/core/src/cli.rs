//! The `csplab` command-line surface.
//!
//! Every subcommand reads flags and, optionally, a flat config file given
//! with `--config`; flags override file values. Results go to stdout (or
//! `--output`) as JSONL [`ResultRecord`]s, CSV matrices for curve sweeps,
//! or DIMACS text for `export`. Failures print one JSON line on stderr and
//! map onto the exit codes of [`CspError::exit_code`].

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgAction, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::counting::{count_auto, count_components_with, count_exact_with, count_xorsat, CountConfig, CountResult};
use crate::dimacs::{export_dimacs_with, DimacsOptions};
use crate::error::{CspError, Result};
use crate::experiments::{azuma_increment_check, estimate_psi, psi_curve, qn_grid, variance_split, CriticalKeys};
use crate::formula::{Assignment, Family, Predicate};
use crate::predicate::{check_hypothesis, is_antisymmetric, is_balanced, scan_predicates, SearchBudget};
use crate::record::{parse_config, Matrix, ResultRecord};
use crate::sampler::{sample, ModelSpec, PlantMode, Scheme};

#[derive(Parser, Debug)]
#[command(name = "csplab", version, about = "Planted random CSP sampling, exact counting and predicate analysis")]
#[command(args_override_self = true)]
struct Cli {
    /// Flat key = value file supplying defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write results here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
    /// Worker threads for Monte-Carlo and scan loops.
    #[arg(long, global = true, env = "CSPLAB_JOBS")]
    jobs: Option<usize>,
    /// Record the wall-clock time in each result record.
    #[arg(long, global = true)]
    stamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelKind {
    Binomial,
    Uniform,
    Unplanted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Auto,
    Brute,
    Components,
    Xor,
}

#[derive(clap::Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ModelArgs {
    #[arg(long)]
    family: Family,
    /// Constraint arity; inferred from `--predicate` for gold, else 3.
    #[arg(long)]
    k: Option<usize>,
    /// Goldreich predicate as a hex truth table, e.g. 0x96.
    #[arg(long)]
    predicate: Option<String>,
    #[arg(long, value_enum, default_value_t = ModelKind::Binomial)]
    model: ModelKind,
    /// Fixed planted assignment as a bit string (variable 0 first).
    #[arg(long)]
    plant: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct CountArgs {
    /// Largest number of free variables enumerated by brute force.
    #[arg(long, default_value_t = crate::counting::DEFAULT_BRUTE_FORCE_CAP)]
    cap: usize,
}

#[derive(clap::Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct BudgetArgs {
    #[arg(long, default_value_t = 3)]
    lmax: usize,
    #[arg(long, default_value_t = SearchBudget::default().pairs)]
    pairs: usize,
    #[arg(long, default_value_t = SearchBudget::default().hessian_points)]
    hessian_points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Draw one formula and print it as JSON.
    Sample(SampleArgs),
    /// Draw one formula and count its solutions exactly.
    Count(CountCmd),
    /// Draw one formula and write it as DIMACS.
    Export(ExportArgs),
    /// Mean per-variable log2 count over coupled densities.
    PsiCurve(PsiArgs),
    /// Probability of fewer than 2^(n phi) solutions over coupled densities.
    QnCurve(QnArgs),
    /// Density where the tail probability crosses a level.
    Threshold(ThresholdArgs),
    /// Per-edge increments of the Goldreich mean log-preimage count.
    AzumaCheck(AzumaArgs),
    /// Between-graph / within-graph variance of the per-variable log2 count.
    VarianceSplit(VarianceArgs),
    /// Search all antisymmetric predicates of arity k for convexity violations.
    PredicateScan(ScanArgs),
    /// Search one predicate for a convexity violation.
    HypothesisH(HypothesisArgs),
}

#[derive(clap::Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
}

#[derive(clap::Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct CountCmd {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    counting: CountArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    method: Method,
}

#[derive(clap::Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ExportArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    /// Write XORSAT constraints as `x` rows.
    #[arg(long)]
    xor_dialect: bool,
}

#[derive(clap::Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct PsiArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    counting: CountArgs,
    /// One or more sizes, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    n: Vec<usize>,
    /// Strictly increasing densities, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    alphas: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    samples: usize,
}

#[derive(clap::Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct QnArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    counting: CountArgs,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    phi: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
}

#[derive(clap::Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ThresholdArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    counting: CountArgs,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    n: Vec<usize>,
    #[arg(long)]
    phi: f64,
    /// Upper end of the initial bracket.
    #[arg(long, default_value_t = 8.0)]
    alpha_max: f64,
    #[arg(long, default_value_t = 0.01)]
    tolerance: f64,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0.5)]
    level: f64,
    /// Also report the crossings of `--window-low` and `--window-high`.
    #[arg(long)]
    window: bool,
    #[arg(long, default_value_t = 0.1)]
    window_low: f64,
    #[arg(long, default_value_t = 0.9)]
    window_high: f64,
}

#[derive(clap::Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct AzumaArgs {
    #[arg(long)]
    n: usize,
    /// Predicate as a hex truth table; parity of arity `--k` by default.
    #[arg(long)]
    predicate: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// Edge density of the base hypergraph.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct VarianceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    counting: CountArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    graph_samples: usize,
    #[arg(long, default_value_t = 20)]
    plant_samples: usize,
}

#[derive(clap::Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ScanArgs {
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    budget: BudgetArgs,
}

#[derive(clap::Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct HypothesisArgs {
    #[arg(long)]
    predicate: String,
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    budget: BudgetArgs,
}

impl BudgetArgs {
    fn budget(&self) -> SearchBudget {
        SearchBudget { pairs: self.pairs, hessian_points: self.hessian_points }
    }
}

impl ModelArgs {
    fn spec(&self, n: usize, alpha: f64) -> Result<ModelSpec> {
        let spec = if self.family == Family::Gold {
            let hex =
                self.predicate.as_deref().ok_or_else(|| CspError::InvalidArgument("gold needs --predicate".into()))?;
            ModelSpec::gold(n, Predicate::from_hex(hex, self.k)?, alpha)
        } else {
            if self.predicate.is_some() {
                return Err(CspError::InvalidArgument(format!("--predicate applies to gold, not {}", self.family)));
            }
            ModelSpec::planted(self.family, n, self.k.unwrap_or(3), alpha)
        };
        let spec = match (self.model, &self.plant) {
            (ModelKind::Unplanted, Some(_)) => {
                return Err(CspError::InvalidArgument("--plant conflicts with --model unplanted".into()))
            }
            (ModelKind::Unplanted, None) => spec.with_plant(PlantMode::Unplanted),
            (kind, plant) => {
                let spec = match plant {
                    Some(bits) => {
                        let a: Assignment = bits.parse()?;
                        if a.len() != n {
                            return Err(CspError::Dimension { expected: n, got: a.len() });
                        }
                        spec.with_plant(PlantMode::Fixed(a))
                    }
                    None => spec,
                };
                if kind == ModelKind::Uniform {
                    spec.with_scheme(Scheme::Uniform)
                } else {
                    spec
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl CountArgs {
    fn config(&self) -> CountConfig {
        CountConfig { cap: self.cap }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Count(_) => "count",
            Command::Export(_) => "export",
            Command::PsiCurve(_) => "psi-curve",
            Command::QnCurve(_) => "qn-curve",
            Command::Threshold(_) => "threshold",
            Command::AzumaCheck(_) => "azuma-check",
            Command::VarianceSplit(_) => "variance-split",
            Command::PredicateScan(_) => "predicate-scan",
            Command::HypothesisH(_) => "hypothesis-h",
        }
    }

    fn echo(&self) -> Value {
        let v = match self {
            Command::Sample(a) => serde_json::to_value(a),
            Command::Count(a) => serde_json::to_value(a),
            Command::Export(a) => serde_json::to_value(a),
            Command::PsiCurve(a) => serde_json::to_value(a),
            Command::QnCurve(a) => serde_json::to_value(a),
            Command::Threshold(a) => serde_json::to_value(a),
            Command::AzumaCheck(a) => serde_json::to_value(a),
            Command::VarianceSplit(a) => serde_json::to_value(a),
            Command::PredicateScan(a) => serde_json::to_value(a),
            Command::HypothesisH(a) => serde_json::to_value(a),
        };
        v.unwrap_or(Value::Null)
    }
}

/// Collects output records and renders them once the run has succeeded.
struct Sink {
    subcommand: &'static str,
    config: BTreeMap<String, Value>,
    stamp: bool,
    buf: Vec<u8>,
}

impl Sink {
    fn record<P: Serialize>(&mut self, payload: P) -> Result<()> {
        ResultRecord::new(self.subcommand, self.config.clone(), payload, self.stamp).write_line(&mut self.buf)
    }
}

#[derive(Serialize)]
struct CountPayload {
    clauses: usize,
    #[serde(flatten)]
    count: CountResult,
}

#[derive(Serialize)]
struct CurvePoint<T: Serialize> {
    n: usize,
    #[serde(flatten)]
    estimate: T,
}

#[derive(Serialize)]
struct HypothesisPayload {
    predicate: Predicate,
    balanced: bool,
    antisymmetric: bool,
    #[serde(flatten)]
    status: crate::predicate::HypothesisStatus,
}

fn parse_predicate(hex: &str, k: Option<usize>) -> Result<Predicate> {
    Predicate::from_hex(hex, k)
}

fn dispatch(cli: &Cli, sink: &mut Sink) -> Result<()> {
    let csv_ok = matches!(cli.command, Command::PsiCurve(_) | Command::QnCurve(_));
    if cli.format == Format::Csv && !csv_ok {
        return Err(CspError::InvalidArgument(format!("--format csv is not available for {}", cli.command.name())));
    }
    match &cli.command {
        Command::Sample(a) => {
            let f = sample(&a.model.spec(a.n, a.alpha)?, a.model.seed)?;
            sink.record(&f)
        }
        Command::Count(a) => {
            let f = sample(&a.model.spec(a.n, a.alpha)?, a.model.seed)?;
            let cfg = a.counting.config();
            let count = match a.method {
                Method::Auto => count_auto(&f, &cfg)?,
                Method::Brute => count_exact_with(&f, &cfg)?,
                Method::Components => count_components_with(&f, &cfg)?,
                Method::Xor => count_xorsat(&f)?,
            };
            sink.record(CountPayload { clauses: f.len(), count })
        }
        Command::Export(a) => {
            let f = sample(&a.model.spec(a.n, a.alpha)?, a.model.seed)?;
            let text = export_dimacs_with(&f, DimacsOptions { xor_dialect: a.xor_dialect })?;
            sink.buf.extend_from_slice(text.as_bytes());
            Ok(())
        }
        Command::PsiCurve(a) => {
            let cfg = a.counting.config();
            let mut matrix = Matrix {
                row_labels: vec!["n".into()],
                columns: a.alphas.iter().map(|x| x.to_string()).collect(),
                rows: Vec::new(),
            };
            for &n in &a.n {
                let spec = a.model.spec(n, *a.alphas.last().unwrap_or(&0.0))?;
                let points = if a.alphas.len() == 1 {
                    vec![estimate_psi(&spec, a.samples, a.model.seed, &cfg)?]
                } else {
                    psi_curve(&spec, &a.alphas, a.samples, a.model.seed, &cfg)?
                };
                matrix.rows.push((vec![n.to_string()], points.iter().map(|p| p.estimate).collect()));
                if cli.format == Format::Jsonl {
                    for p in points {
                        sink.record(CurvePoint { n, estimate: p })?;
                    }
                }
            }
            if cli.format == Format::Csv {
                matrix.write_csv(&mut sink.buf)?;
            }
            Ok(())
        }
        Command::QnCurve(a) => {
            let cfg = a.counting.config();
            let mut matrix = Matrix {
                row_labels: vec!["n".into(), "phi".into()],
                columns: a.alphas.iter().map(|x| x.to_string()).collect(),
                rows: Vec::new(),
            };
            for &n in &a.n {
                let spec = a.model.spec(n, *a.alphas.last().unwrap_or(&0.0))?;
                let grid = qn_grid(&spec, &a.alphas, &a.phi, a.samples, a.model.seed, &cfg)?;
                for (j, &phi) in a.phi.iter().enumerate() {
                    let row = (0..a.alphas.len()).map(|i| grid[i * a.phi.len() + j].proportion).collect();
                    matrix.rows.push((vec![n.to_string(), phi.to_string()], row));
                }
                if cli.format == Format::Jsonl {
                    for q in grid {
                        sink.record(&q)?;
                    }
                }
            }
            if cli.format == Format::Csv {
                matrix.write_csv(&mut sink.buf)?;
            }
            Ok(())
        }
        Command::Threshold(a) => {
            let cfg = a.counting.config();
            for &n in &a.n {
                let spec = a.model.spec(n, a.alpha_max)?;
                if a.window {
                    let keys = CriticalKeys::new(&spec, a.phi, a.alpha_max, a.samples, a.model.seed, &cfg)?;
                    let w = keys.window((a.window_low, a.window_high), a.tolerance)?;
                    sink.record(&w)?;
                } else {
                    let keys = CriticalKeys::new(&spec, a.phi, a.alpha_max, a.samples, a.model.seed, &cfg)?;
                    sink.record(keys.crossing(a.level, a.tolerance)?)?;
                }
            }
            Ok(())
        }
        Command::AzumaCheck(a) => {
            let chi = match &a.predicate {
                Some(hex) => parse_predicate(hex, a.k)?,
                None => Predicate::parity(a.k.unwrap_or(3)),
            };
            sink.record(azuma_increment_check(a.n, &chi, a.alpha, a.trials, a.seed)?)
        }
        Command::VarianceSplit(a) => {
            let spec = a.model.spec(a.n, a.alpha)?;
            sink.record(variance_split(&spec, a.graph_samples, a.plant_samples, a.model.seed, &a.counting.config())?)
        }
        Command::PredicateScan(a) => {
            let b = &a.budget;
            sink.record(scan_predicates(a.k, b.lmax, &b.budget(), b.seed)?)
        }
        Command::HypothesisH(a) => {
            let chi = parse_predicate(&a.predicate, a.k)?;
            let b = &a.budget;
            let status = check_hypothesis(&chi, b.lmax, &b.budget(), b.seed)?;
            sink.record(HypothesisPayload {
                balanced: is_balanced(&chi),
                antisymmetric: is_antisymmetric(&chi),
                predicate: chi,
                status,
            })
        }
    }
}

/// Global flags that consume the following token as their value.
const VALUE_GLOBALS: [&str; 4] = ["--config", "--output", "--format", "--jobs"];

/// Finds `--config` and the subcommand position without running clap, so
/// the file's pairs can be spliced in before required flags are checked.
fn prescan(argv: &[OsString]) -> (Option<PathBuf>, Option<usize>) {
    let names: BTreeSet<String> = Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect();
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < argv.len() {
        let tok = argv[i].to_string_lossy();
        if let Some(path) = tok.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
        } else if tok == "--config" {
            config = argv.get(i + 1).map(PathBuf::from);
            i += 1;
        } else if VALUE_GLOBALS.contains(&tok.as_ref()) && sub.is_none() {
            i += 1;
        } else if sub.is_none() && names.contains(tok.as_ref()) {
            sub = Some(i);
        }
        i += 1;
    }
    (config, sub)
}

/// Turns config pairs into flag tokens for `subcommand`, rejecting keys that
/// name no flag of that subcommand.
fn config_tokens(subcommand: &str, pairs: &[(String, String)]) -> Result<Vec<OsString>> {
    let root = Cli::command();
    let sub = root
        .find_subcommand(subcommand)
        .ok_or_else(|| CspError::InvalidArgument(format!("unknown subcommand '{subcommand}'")))?;
    let mut flags: BTreeMap<String, bool> = BTreeMap::new();
    for arg in root.get_arguments().chain(sub.get_arguments()) {
        if let Some(long) = arg.get_long() {
            if long != "config" && long != "help" && long != "version" {
                flags.insert(long.to_string(), matches!(arg.get_action(), ArgAction::SetTrue));
            }
        }
    }
    let mut tokens = Vec::new();
    for (key, value) in pairs {
        let is_switch = *flags
            .get(key)
            .ok_or_else(|| CspError::InvalidArgument(format!("config: unknown key '{key}' for {subcommand}")))?;
        if is_switch {
            match value.as_str() {
                "true" => tokens.push(OsString::from(format!("--{key}"))),
                "false" => {}
                other => {
                    return Err(CspError::InvalidArgument(format!(
                        "config: {key} expects true or false, got '{other}'"
                    )))
                }
            }
        } else {
            tokens.push(OsString::from(format!("--{key}={value}")));
        }
    }
    Ok(tokens)
}

fn merged_argv(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let (config, sub) = prescan(&argv);
    let Some(path) = config else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| CspError::Io(format!("{}: {e}", path.display())))?;
    let mut pairs = parse_config(&text)?;
    let file_sub = pairs.iter().position(|(k, _)| k == "subcommand").map(|i| pairs.remove(i).1);
    let mut argv = argv;
    let at = match (sub, file_sub) {
        (Some(i), _) => i,
        (None, Some(name)) => {
            argv.push(OsString::from(&name));
            argv.len() - 1
        }
        (None, None) => return Ok(argv),
    };
    let name = argv[at].to_string_lossy().into_owned();
    let tokens = config_tokens(&name, &pairs)?;
    argv.splice(at + 1..at + 1, tokens);
    Ok(argv)
}

fn error_line(kind: &str, code: i32, message: &str) -> String {
    serde_json::json!({ "error": kind, "exit_code": code, "message": message }).to_string()
}

fn execute(argv: Vec<OsString>, out: &mut dyn Write) -> std::result::Result<(), (String, i32)> {
    let fail = |e: CspError| (error_line(e.kind(), e.exit_code(), &e.to_string()), e.exit_code());
    let argv = merged_argv(argv).map_err(fail)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return Ok(());
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            return Err((error_line("usage", 2, first), 2));
        }
    };
    if cli.jobs == Some(0) {
        return Err(fail(CspError::InvalidArgument("--jobs must be at least 1".into())));
    }
    let mut config = match cli.command.echo() {
        Value::Object(map) => map.into_iter().collect::<BTreeMap<_, _>>(),
        _ => BTreeMap::new(),
    };
    config.insert("format".into(), serde_json::to_value(cli.format).unwrap_or(Value::Null));
    let mut sink = Sink { subcommand: cli.command.name(), config, stamp: cli.stamp, buf: Vec::new() };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| fail(CspError::ResourceLimit(e.to_string())))?;
    pool.install(|| dispatch(&cli, &mut sink)).map_err(fail)?;

    match &cli.output {
        Some(path) => {
            std::fs::write(path, &sink.buf).map_err(|e| fail(CspError::Io(format!("{}: {e}", path.display()))))
        }
        None => out.write_all(&sink.buf).map_err(|e| fail(CspError::from(e))),
    }
}

/// Runs the tool on `argv` (program name first), writing results to `out`
/// and the single-line error report to `err`. Returns the exit code.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    match execute(argv, out) {
        Ok(()) => 0,
        Err((line, code)) => {
            let _ = writeln!(err, "{line}");
            code
        }
    }
}

/// [`run_cli_with`] on the process's stdout and stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

//! The `llm-norms` command line.
//!
//! Every flag can also come from a `--config FILE` of `key=value` lines, where
//! the key is the long flag name without dashes. Flags given on the command
//! line win over the file.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::analytics::{
    correlation_matrix, discrepancy_report, extremes, histogram, subset_correlation,
    valence_arousal_profile, Direction, ProfileOptions, ScoreKind, ScoreTable, DEFAULT_BIN_WIDTH,
};
use crate::client::{
    LlmClient, ModelConfig, ResponseCache, RetryPolicy, DEFAULT_API_KEY_ENV, DEFAULT_ENDPOINT,
    DEFAULT_MODEL,
};
use crate::datasets::{
    export_master_list, load_estimates, load_expression_list, load_gold_norms, load_score_table,
    save_estimates, ExpressionListOptions, GoldColumns,
};
use crate::mock::{MockConfig, MockServer};
use crate::model::{default_scale, Variable};
use crate::ranking::assign_ranks;
use crate::Error;

#[derive(Debug, Parser)]
#[command(
    name = "llm-norms",
    version,
    about = "Word and expression norms from LLM token probabilities"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate every expression in a file and write an estimates CSV
    Estimate(EstimateArgs),
    /// Compare estimates with gold norms
    Evaluate(EvaluateArgs),
    /// Pairwise correlation matrix across rating sources
    Matrix(MatrixArgs),
    /// Fill the relative-rank and percentile columns
    Rank(RankArgs),
    /// Merge per-variable estimates into one master list
    Export(ExportArgs),
    /// Plot data: rating histogram and valence/arousal profile
    Figures(FiguresArgs),
    /// Lowest or highest rated items
    Extremes(ExtremesArgs),
    /// Run the deterministic mock endpoint until Ctrl-C
    MockServe(MockServeArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EstimateArgs {
    #[arg(long)]
    pub variable: Variable,
    /// CSV or TSV with one expression per row
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "expression")]
    pub column: String,
    /// Keep only rows whose value in this column is truthy
    #[arg(long)]
    pub known_column: Option<String>,
    #[arg(long)]
    pub output: PathBuf,
    /// Where to list expressions that got no estimate
    #[arg(long)]
    pub failures: Option<PathBuf>,
    /// Where to list input rows that were dropped
    #[arg(long)]
    pub load_report: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    pub endpoint: String,
    #[arg(long, default_value = DEFAULT_MODEL)]
    pub model: String,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 20)]
    pub top_logprobs: u32,
    #[arg(long, default_value_t = 1)]
    pub max_tokens: u32,
    #[arg(long, default_value_t = 8)]
    pub concurrency: usize,
    /// JSONL response cache, reused across runs
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Environment variable holding the API key
    #[arg(long, default_value = DEFAULT_API_KEY_ENV)]
    pub api_key_env: String,
    #[arg(long, default_value_t = 5)]
    pub max_attempts: u32,
    #[arg(long, default_value_t = 500)]
    pub backoff_ms: u64,
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value = "expression")]
    pub gold_key: String,
    #[arg(long, default_value = "rating")]
    pub gold_column: String,
    /// Estimates CSV as written by `estimate`
    #[arg(long)]
    pub est: PathBuf,
    #[arg(long, value_enum, default_value_t = ScoreArg::Expected)]
    pub score: ScoreArg,
    /// Flag items whose estimate differs from gold by more than this
    #[arg(long, default_value_t = 1.75)]
    pub threshold: f64,
    /// Optional key list (e.g. idioms) for a subset correlation
    #[arg(long)]
    pub subset: Option<PathBuf>,
    #[arg(long, default_value = "expression")]
    pub subset_column: String,
    #[arg(long)]
    pub correlations: PathBuf,
    #[arg(long)]
    pub discrepancies: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct MatrixArgs {
    /// NAME=PATH, repeated at least twice
    #[arg(long = "source", required = true)]
    pub sources: Vec<String>,
    #[arg(long, default_value = "expression")]
    pub key_column: String,
    /// Defaults to the first of expected, prob_estimate, rating
    #[arg(long)]
    pub value_column: Option<String>,
    /// Long format: source_a, source_b, pearson, spearman, n
    #[arg(long)]
    pub output: PathBuf,
    /// Square format: Pearson above the diagonal, Spearman below
    #[arg(long)]
    pub square: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct RankArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ExportArgs {
    /// One estimates CSV per variable
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct FiguresArgs {
    /// Estimates CSV to histogram
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ScoreArg::Expected)]
    pub score: ScoreArg,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
    #[arg(long, requires = "input")]
    pub histogram: Option<PathBuf>,
    /// Valence scores (estimates or norms) for the profile
    #[arg(long, requires = "arousal")]
    pub valence: Option<PathBuf>,
    #[arg(long, requires = "valence")]
    pub arousal: Option<PathBuf>,
    #[arg(long, default_value = "expression")]
    pub key_column: String,
    #[arg(long, default_value_t = 0.5)]
    pub profile_bin_width: f64,
    #[arg(long, requires = "valence")]
    pub profile: Option<PathBuf>,
    #[arg(long, requires = "valence")]
    pub exceptions: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ExtremesArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ScoreArg::Expected)]
    pub score: ScoreArg,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = DirectionArg::Both)]
    pub direction: DirectionArg,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct MockServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2.0)]
    pub sharpness: f64,
    /// Share of requests answered with 503
    #[arg(long, default_value_t = 0.0)]
    pub error_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreArg {
    Expected,
    Dominant,
}

impl From<ScoreArg> for ScoreKind {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Expected => ScoreKind::Expected,
            ScoreArg::Dominant => ScoreKind::Dominant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Low,
    High,
    Both,
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 2 for usage errors, 1 for anything else.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match apply_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: cli: {e:#}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

/// Splices flags from a `--config` file in front of the command-line flags.
/// With `args_override_self`, a flag repeated later replaces the earlier
/// value, so explicit flags win.
fn apply_config(argv: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            let v = it.next().context("--config needs a file")?;
            path = Some(PathBuf::from(v));
        } else if let Some(v) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(v));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    // Subcommand is the first argument after the program name that is not a flag.
    let Some(sub_pos) = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
    else {
        bail!("--config given without a subcommand");
    };
    let sub_name = rest[sub_pos].to_string_lossy().into_owned();
    let cmd = Cli::command();
    let Some(sub) = cmd.find_subcommand(&sub_name) else {
        // Let clap report the unknown subcommand.
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut injected: Vec<OsString> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), n + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let Some(arg) = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
        else {
            bail!(
                "{}:{}: `{key}` is not a flag of `{sub_name}`",
                path.display(),
                n + 1
            );
        };
        if arg.get_action().takes_values() {
            injected.push(format!("--{key}").into());
            injected.push(value.into());
        } else {
            match value.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => injected.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                other => bail!(
                    "{}:{}: `{key}` expects true or false, got {other:?}",
                    path.display(),
                    n + 1
                ),
            }
        }
    }
    let mut out = rest[..=sub_pos].to_vec();
    out.extend(injected);
    out.extend(rest[sub_pos + 1..].iter().cloned());
    Ok(out)
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Matrix(a) => cmd_matrix(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Export(a) => cmd_export(a),
        Command::Figures(a) => cmd_figures(a),
        Command::Extremes(a) => cmd_extremes(a),
        Command::MockServe(a) => cmd_mock_serve(a),
    }
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("cli: starting async runtime")
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cli: cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes through `f` and flushes, naming the file on failure.
fn write_file<F>(path: &Path, f: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>,
{
    let mut out = create(path)?;
    f(&mut out)?;
    out.flush()
        .with_context(|| format!("cli: writing {}", path.display()))?;
    Ok(())
}

fn lib<T, E: Into<Error>>(r: Result<T, E>) -> anyhow::Result<T> {
    r.map_err(|e| anyhow::Error::new(e.into()))
}

fn cmd_estimate(a: EstimateArgs) -> anyhow::Result<()> {
    let scale = default_scale(a.variable);
    let opts = ExpressionListOptions {
        column: a.column,
        known_column: a.known_column,
    };
    let (expressions, report) = lib(load_expression_list(&a.input, &opts))?;
    if report.dropped() > 0 {
        eprintln!(
            "{}: kept {} of {} rows ({} filtered, {} duplicate, {} rejected)",
            a.input.display(),
            report.kept,
            report.rows,
            report.filtered.len(),
            report.duplicates.len(),
            report.rejected.len()
        );
    }
    if let Some(p) = &a.load_report {
        write_file(p, |w| Ok(report.write_csv(w)?))?;
    }
    let config = ModelConfig {
        endpoint_url: a.endpoint,
        model_name: a.model,
        temperature: a.temperature,
        top_logprobs: a.top_logprobs,
        max_output_tokens: a.max_tokens,
        api_key_env: a.api_key_env,
        concurrency_limit: a.concurrency,
        retry: RetryPolicy {
            max_attempts: a.max_attempts,
            backoff_base: Duration::from_millis(a.backoff_ms),
            ..RetryPolicy::default()
        },
        request_timeout: Duration::from_secs(a.timeout_secs),
    };
    let cache = match &a.cache {
        Some(p) => lib(ResponseCache::open(p))?,
        None => ResponseCache::in_memory(),
    };
    if cache.skipped_lines() > 0 {
        eprintln!(
            "cache: skipped {} unreadable line(s)",
            cache.skipped_lines()
        );
    }
    let client = lib(LlmClient::new(config, Arc::new(cache)))?;
    let run = runtime()?.block_on(crate::pipeline::estimate_expressions(
        &client,
        &expressions,
        a.variable,
        &scale,
    ))?;
    lib(save_estimates(&run.table, &a.output))?;
    let low = run
        .table
        .rows
        .iter()
        .filter(|r| r.is_low_confidence())
        .count();
    eprintln!(
        "{}: {} estimates, {} failed, {} low-confidence, {} network request(s)",
        a.output.display(),
        run.table.len(),
        run.failures.len(),
        low,
        client.network_requests()
    );
    if let Some(p) = &a.failures {
        write_file(p, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["expression", "reason"])?;
            for f in &run.failures {
                csv.write_record([f.expression.raw(), f.reason.as_str()])?;
            }
            csv.flush()?;
            Ok(())
        })?;
    }
    Ok(())
}

fn read_keys(path: &Path, column: &str) -> anyhow::Result<Vec<String>> {
    let opts = ExpressionListOptions {
        column: column.to_string(),
        known_column: None,
    };
    let (exprs, _) = lib(load_expression_list(path, &opts))?;
    Ok(exprs.into_iter().map(|e| e.key().to_string()).collect())
}

fn cmd_evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let table = lib(load_estimates(&a.est))?;
    let variable = table.variable;
    let cols = GoldColumns {
        key: a.gold_key,
        rating: a.gold_column,
    };
    let (gold, report) = lib(load_gold_norms(
        &a.gold,
        "gold",
        variable,
        &default_scale(variable),
        &cols,
    ))?;
    if report.dropped() > 0 {
        eprintln!(
            "{}: dropped {} of {} rows",
            a.gold.display(),
            report.dropped(),
            report.rows
        );
    }
    let gold = ScoreTable::from(&gold);
    let est = table.scores("estimate", a.score.into());

    let all = lib(crate::analytics::compare(&gold, &est))?;
    let subset = match &a.subset {
        Some(p) => {
            let keys = read_keys(p, &a.subset_column)?;
            Some(lib(subset_correlation(&gold, &est, &keys))?)
        }
        None => None,
    };
    write_file(&a.correlations, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["comparison", "pearson", "spearman", "n"])?;
        csv.write_record([
            "all".to_string(),
            format!("{:.6}", all.pearson),
            format!("{:.6}", all.spearman),
            all.n.to_string(),
        ])?;
        if let Some((r, n)) = subset {
            csv.write_record([
                "subset".to_string(),
                format!("{r:.6}"),
                String::new(),
                n.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })?;

    let disc = discrepancy_report(&gold, &est, a.threshold);
    for w in &disc.warnings {
        eprintln!("warning: {w}");
    }
    write_file(&a.discrepancies, |w| Ok(disc.write_csv(w)?))?;
    eprintln!(
        "{variable}: r = {:.3} over {} items; {} of {} differ by more than {}",
        all.pearson,
        all.n,
        disc.entries.len(),
        disc.shared,
        a.threshold
    );
    Ok(())
}

fn cmd_matrix(a: MatrixArgs) -> anyhow::Result<()> {
    let mut tables = Vec::with_capacity(a.sources.len());
    for source in &a.sources {
        let Some((name, path)) = source.split_once('=') else {
            bail!("cli: --source expects NAME=PATH, got {source:?}");
        };
        tables.push(lib(load_score_table(
            path,
            name,
            &a.key_column,
            a.value_column.as_deref(),
        ))?);
    }
    let report = lib(correlation_matrix(&tables))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    write_file(&a.output, |w| Ok(report.matrix.write_long_csv(w)?))?;
    if let Some(p) = &a.square {
        write_file(p, |w| Ok(report.matrix.write_square_csv(w)?))?;
    }
    Ok(())
}

fn cmd_rank(a: RankArgs) -> anyhow::Result<()> {
    let table = lib(load_estimates(&a.input))?;
    let ranked = lib(assign_ranks(table))?;
    lib(save_estimates(&ranked, &a.output))?;
    Ok(())
}

fn cmd_export(a: ExportArgs) -> anyhow::Result<()> {
    let tables = a
        .inputs
        .iter()
        .map(|p| lib(load_estimates(p)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    lib(export_master_list(&tables, &a.output))?;
    Ok(())
}

fn cmd_figures(a: FiguresArgs) -> anyhow::Result<()> {
    if a.histogram.is_none() && a.profile.is_none() && a.exceptions.is_none() {
        bail!("cli: figures needs --histogram, --profile or --exceptions");
    }
    if let (Some(input), Some(out)) = (&a.input, &a.histogram) {
        let table = lib(load_estimates(input))?;
        let scale = default_scale(table.variable);
        let values: Vec<f64> = table
            .scores("estimate", a.score.into())
            .values
            .values()
            .copied()
            .collect();
        // Bins centered on the scale points.
        let half = a.bin_width / 2.0;
        let range = (f64::from(scale.min) - half, f64::from(scale.max) + half);
        let hist = lib(histogram(&values, a.bin_width, range))?;
        write_file(out, |w| Ok(hist.write_csv(w)?))?;
    }
    if let (Some(v), Some(ar)) = (&a.valence, &a.arousal) {
        let valence = lib(load_score_table(v, "valence", &a.key_column, None))?;
        let arousal = lib(load_score_table(ar, "arousal", &a.key_column, None))?;
        let opts = ProfileOptions {
            bin_width: a.profile_bin_width,
            ..ProfileOptions::default()
        };
        let profile = lib(valence_arousal_profile(&valence, &arousal, &opts))?;
        if let Some(p) = &a.profile {
            write_file(p, |w| Ok(profile.write_bins_csv(w)?))?;
        }
        if let Some(p) = &a.exceptions {
            write_file(p, |w| Ok(profile.write_exceptions_csv(w)?))?;
        }
        eprintln!(
            "profile: {} items, arousal = {:.4} v^2 + {:.4} v + {:.4}",
            profile.n, profile.fit.a, profile.fit.b, profile.fit.c
        );
    }
    Ok(())
}

fn cmd_extremes(a: ExtremesArgs) -> anyhow::Result<()> {
    let table = lib(load_estimates(&a.input))?;
    let scores = table.scores("estimate", a.score.into());
    let dirs: &[(Direction, &str)] = match a.direction {
        DirectionArg::Low => &[(Direction::Low, "low")],
        DirectionArg::High => &[(Direction::High, "high")],
        DirectionArg::Both => &[(Direction::Low, "low"), (Direction::High, "high")],
    };
    write_file(&a.output, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["direction", "position", "expression", "score"])?;
        for &(dir, label) in dirs {
            for (i, (key, v)) in extremes(&scores, a.n, dir).into_iter().enumerate() {
                csv.write_record([label.to_string(), (i + 1).to_string(), key, v.to_string()])?;
            }
        }
        csv.flush()?;
        Ok(())
    })
}

fn cmd_mock_serve(a: MockServeArgs) -> anyhow::Result<()> {
    let config = MockConfig {
        seed: a.seed,
        sharpness: a.sharpness,
        error_rate: a.error_rate,
    };
    runtime()?.block_on(async move {
        let addr = format!("{}:{}", a.host, a.port)
            .parse()
            .with_context(|| format!("cli: bad address {}:{}", a.host, a.port))?;
        let server = lib(MockServer::start(addr, config).await)?;
        println!("{}", server.url());
        eprintln!(
            "mock endpoint ready (seed {}, sharpness {}); Ctrl-C to stop",
            a.seed, a.sharpness
        );
        tokio::signal::ctrl_c()
            .await
            .context("cli: waiting for Ctrl-C")?;
        server.shutdown().await;
        Ok(())
    })
}

//! The `noharm` command line.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::{ConfigFile, NatureSpec};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::game::{NormalFormGame, ProfileId};
use crate::solver::{explain, solve, SolveConfig};
use crate::tree::{to_dot, trace_to_jsonl, TurnPolicy};
use crate::verify::{degenerate_spec, sweep, Check, RandomGames, SweepReport, SweepSpec};

/// Environment variable holding the default output format.
pub const FORMAT_ENV: &str = "NOHARM_FORMAT";

#[derive(Debug, Parser)]
#[command(name = "noharm", version, about = "No-harm equilibria of finite normal-form games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the deviation game from one reference point.
    Solve(SolveArgs),
    /// Print the Pareto-optimal and weakly Pareto-optimal profiles.
    Pareto(ParetoArgs),
    /// Run property sweeps over fixtures or random games.
    Verify(VerifyArgs),
    /// Compare no-harm outcomes with no-harm-off outcomes, Nash equilibria and the Pareto set.
    Compare(CompareArgs),
    /// Export the on-path play as JSON lines or Graphviz.
    Trace(TraceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    Jsonl,
    Dot,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output format; defaults to $NOHARM_FORMAT, then table.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Same as --format json.
    #[arg(long, conflicts_with = "format")]
    pub json: bool,
}

impl OutputArgs {
    fn resolve(&self) -> Result<Format> {
        if self.json {
            return Ok(Format::Json);
        }
        if let Some(f) = self.format {
            return Ok(f);
        }
        match std::env::var(FORMAT_ENV) {
            Ok(v) if v.is_empty() => Ok(Format::Table),
            Ok(v) => Format::from_str(&v, true)
                .map_err(|_| Error::InvalidInput(format!("{FORMAT_ENV}={v:?} is not table or json"))),
            Err(_) => Ok(Format::Table),
        }
    }
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Initial reference point, e.g. "D,D".
    #[arg(long = "ref")]
    pub reference: Option<String>,
    #[arg(long)]
    pub k: Option<u32>,
    /// Round-robin order by player name, e.g. "Row,Column".
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["nature_q", "unchecked_order"])]
    pub order: Option<Vec<String>>,
    /// Nature weights per player; the order is sampled with --seed.
    #[arg(long, value_delimiter = ',', requires = "seed", conflicts_with = "unchecked_order")]
    pub nature_q: Option<Vec<f64>>,
    #[arg(long, requires = "nature_q")]
    pub seed: Option<u64>,
    /// Switch the no-harm rule off.
    #[arg(long)]
    pub no_nhp: bool,
    /// Add the unilateral Terminate action.
    #[arg(long)]
    pub terminate_action: bool,
    /// Distinct stayers needed to end the game.
    #[arg(long)]
    pub stay_threshold: Option<usize>,
    /// Allow indifferent payoffs and report every outcome.
    #[arg(long)]
    pub weak: bool,
    /// Let one player act at every node.
    #[arg(long)]
    pub unchecked_order: Option<String>,
    /// Give up after this many contexts.
    #[arg(long)]
    pub max_contexts: Option<usize>,
}

impl ConfigArgs {
    fn config_file(&self) -> Result<ConfigFile> {
        let base = match &self.config {
            Some(path) => ConfigFile::from_path(path)?,
            None => ConfigFile::default(),
        };
        let over = ConfigFile {
            reference: self.reference.clone(),
            k: self.k,
            order: self.order.clone(),
            table: None,
            nature: self.nature_q.clone().zip(self.seed).map(|(q, seed)| NatureSpec { q, seed }),
            nhp: self.no_nhp.then_some(false),
            terminate_action: self.terminate_action.then_some(true),
            stay_threshold: self.stay_threshold,
            weak: self.weak.then_some(true),
            unchecked_order: self.unchecked_order.clone(),
            max_depth_guard: None,
            max_contexts: self.max_contexts,
        };
        Ok(base.overridden_by(over))
    }

    fn resolve(&self, game: &NormalFormGame) -> Result<SolveConfig> {
        self.config_file()?.resolve(game)
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Game JSON file.
    #[arg(long)]
    pub game: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Sweep the bundled fixture games.
    #[arg(long, conflicts_with = "random")]
    pub fixtures: bool,
    /// Random strict games: n=2 sizes=2,2 count=200 seed=1.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    pub random: Option<Vec<String>>,
    /// Run a counterexample sweep that must fail. Known: degenerate.
    #[arg(long)]
    pub expect_fail: Option<String>,
    /// Sweep spec JSON; flags below override it.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Truncation parameters to sweep, e.g. 1,2.
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<u32>>,
    /// Checks to run: efficiency, uniqueness, existence, weak_efficiency.
    #[arg(long, value_delimiter = ',')]
    pub checks: Option<Vec<String>>,
    /// Only round-robin rotations, no sampled orders.
    #[arg(long)]
    pub no_nature: bool,
    /// Sweep the variant with the unilateral Terminate action.
    #[arg(long)]
    pub terminate_action: bool,
    /// Distinct stayers needed to end the game.
    #[arg(long)]
    pub stay_threshold: Option<usize>,
    /// Context cap per solve and enumeration.
    #[arg(long)]
    pub max_contexts: Option<usize>,
    /// Context cap per deviation audit.
    #[arg(long)]
    pub audit_max_contexts: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long)]
    pub max_contexts: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: TraceFormat,
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Pareto(a) => cmd_pareto(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Trace(a) => cmd_trace(a, out),
    }
}

fn emit_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn labelled(game: &NormalFormGame, p: ProfileId) -> String {
    format!("{} {}", game.key(p), game.payoff_string(p))
}

fn profile_list(game: &NormalFormGame, set: &[ProfileId]) -> String {
    set.iter().map(|&p| format!("({})", game.key(p))).collect::<Vec<_>>().join(" ")
}

pub fn cmd_solve(a: &SolveArgs, out: &mut dyn Write) -> Result<i32> {
    let format = a.output.resolve()?;
    let game = NormalFormGame::from_path(&a.game)?;
    let cfg = a.config.resolve(&game)?;
    let report = solve(&game, &cfg)?;
    match format {
        Format::Json => {
            let mut v = report.to_json(&game);
            v["config"] = serde_json::to_value(ConfigFile::describe(&cfg, &game))?;
            emit_json(out, &v)?;
        }
        Format::Table => {
            writeln!(out, "mode: {}", report.mode)?;
            writeln!(out, "order: {}", report.policy)?;
            writeln!(out, "reference: {}  k: {}", game.key(report.initial), report.k)?;
            writeln!(out, "outcome: {}", labelled(&game, report.outcome))?;
            if let Some(set) = &report.outcome_set {
                let all: Vec<String> = set.iter().map(|&p| labelled(&game, p)).collect();
                writeln!(out, "outcome set: {}", all.join(", "))?;
            }
            writeln!(out, "trace:")?;
            for rec in &report.path {
                writeln!(out, "  {rec}")?;
            }
        }
    }
    Ok(0)
}

pub fn cmd_pareto(a: &ParetoArgs, out: &mut dyn Write) -> Result<i32> {
    let game = NormalFormGame::from_path(&a.game)?;
    let po = game.pareto_optimal_set();
    let weak = game.weakly_pareto_optimal_set();
    match a.output.resolve()? {
        Format::Json => {
            let keys = |s: &[ProfileId]| s.iter().map(|&p| game.key(p)).collect::<Vec<_>>();
            emit_json(out, &json!({ "pareto_optimal": keys(&po), "weakly_pareto_optimal": keys(&weak) }))?;
        }
        Format::Table => {
            writeln!(out, "pareto optimal: {}", profile_list(&game, &po))?;
            writeln!(out, "weakly pareto optimal: {}", profile_list(&game, &weak))?;
        }
    }
    Ok(0)
}

fn parse_random(tokens: &[String]) -> Result<RandomGames> {
    let mut spec = RandomGames { players: 2, sizes: vec![], count: 200, seed: 1 };
    let bad = |t: &str| Error::InvalidInput(format!("bad --random entry {t:?}; expected n=, sizes=, count= or seed="));
    for token in tokens.iter().flat_map(|t| t.split_whitespace()) {
        let (key, value) = token.split_once('=').ok_or_else(|| bad(token))?;
        match key {
            "n" => spec.players = value.parse().map_err(|_| bad(token))?,
            "sizes" => {
                spec.sizes = value
                    .split(',')
                    .map(|v| v.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(token))?
            }
            "count" => spec.count = value.parse().map_err(|_| bad(token))?,
            "seed" => spec.seed = value.parse().map_err(|_| bad(token))?,
            _ => return Err(bad(token)),
        }
    }
    if spec.sizes.is_empty() {
        spec.sizes = vec![2; spec.players];
    }
    Ok(spec)
}

fn parse_checks(names: &[String]) -> Result<Vec<Check>> {
    names
        .iter()
        .map(|n| serde_json::from_value(json!(n)).map_err(|_| Error::InvalidInput(format!("unknown check {n:?}"))))
        .collect()
}

pub fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let format = a.output.resolve()?;
    if !a.fixtures && a.random.is_none() {
        return Err(Error::InvalidInput("give --fixtures or --random".into()));
    }
    let mut spec = match &a.spec {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("sweep spec: {e}")))?
        }
        None => SweepSpec::default(),
    };
    match a.expect_fail.as_deref() {
        None => {}
        Some("degenerate") => spec = degenerate_spec("Row"),
        Some(other) => {
            return Err(Error::InvalidInput(format!("unknown expected failure {other:?}; known: degenerate")))
        }
    }
    if let Some(ks) = &a.ks {
        spec.ks = ks.clone();
    }
    if let Some(checks) = &a.checks {
        spec.checks = parse_checks(checks)?;
    }
    if a.no_nature {
        spec.nature = None;
    }
    if a.terminate_action {
        spec.terminate_action = true;
    }
    if let Some(m) = a.stay_threshold {
        spec.stay_threshold = m;
    }
    if a.max_contexts.is_some() {
        spec.max_contexts = a.max_contexts;
    }
    if a.audit_max_contexts.is_some() {
        spec.audit_max_contexts = a.audit_max_contexts;
    }
    if spec.ks.is_empty() || spec.ks.contains(&0) {
        return Err(Error::InvalidInput("k values must be positive".into()));
    }

    let report = if let Some(tokens) = &a.random {
        let games = parse_random(tokens)?.generate()?;
        sweep(&games, &spec)?
    } else if spec.expect_fail {
        sweep(&named(fixtures::strict_games()), &spec)?
    } else {
        fixture_sweep(&spec)?
    };
    match format {
        Format::Json => emit_json(out, &serde_json::to_value(&report)?)?,
        Format::Table => {
            writeln!(out, "{}", report.summary())?;
            for f in report.failures.iter().take(20) {
                writeln!(
                    out,
                    "fail {} {} ref {}: {}",
                    f.check.name(),
                    f.game,
                    f.config.reference.as_deref().unwrap_or("?"),
                    f.detail
                )?;
            }
            for r in report.results.iter().filter(|r| r.status() == crate::verify::Status::OverBudget).take(20) {
                let detail = r.checks.iter().find_map(|c| c.detail.clone()).unwrap_or_default();
                writeln!(
                    out,
                    "over budget {} ref {} k {}: {detail}",
                    r.game,
                    r.config.reference.as_deref().unwrap_or("?"),
                    r.config.k.unwrap_or(1)
                )?;
            }
        }
    }
    Ok(if report.ok() { 0 } else { 1 })
}

fn named(games: Vec<(&'static str, NormalFormGame)>) -> Vec<(String, NormalFormGame)> {
    games.into_iter().map(|(n, g)| (n.to_string(), g)).collect()
}

/// Strict fixtures under `spec`, and weak fixtures under its weak-mode counterpart.
pub fn fixture_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    let strict = named(fixtures::strict_games());
    let weak_spec = SweepSpec {
        weak: true,
        checks: spec
            .checks
            .iter()
            .map(|&c| match c {
                Check::Efficiency | Check::Uniqueness => Check::WeakEfficiency,
                other => other,
            })
            .fold(Vec::new(), |mut acc, c| {
                if !acc.contains(&c) {
                    acc.push(c);
                }
                acc
            }),
        ..spec.clone()
    };
    let weak = named(fixtures::weak_games());
    Ok(sweep(&strict, spec)?.merge(sweep(&weak, &weak_spec)?))
}

pub fn cmd_compare(a: &CompareArgs, out: &mut dyn Write) -> Result<i32> {
    let format = a.output.resolve()?;
    let game = NormalFormGame::from_path(&a.game)?;
    let n = game.num_players();
    let mut rows = Vec::new();
    for a0 in game.profile_ids() {
        for policy in TurnPolicy::rotations(n) {
            let order = policy.describe(&game);
            let base = SolveConfig::new(a0, policy).with_k(a.k).with_max_contexts(a.max_contexts);
            let nhe = solve(&game, &base)?.outcome;
            let off = solve(&game, &base.clone().with_nhp(false))?.outcome;
            rows.push((a0, order, nhe, off));
        }
    }
    let nash = game.pure_nash_equilibria();
    let po = game.pareto_optimal_set();
    let mut nhe_all: Vec<ProfileId> = rows.iter().map(|r| r.2).collect();
    nhe_all.sort();
    nhe_all.dedup();
    let mut off_all: Vec<ProfileId> = rows.iter().map(|r| r.3).collect();
    off_all.sort();
    off_all.dedup();
    match format {
        Format::Json => {
            let keys = |s: &[ProfileId]| s.iter().map(|&p| game.key(p)).collect::<Vec<_>>();
            let table: Vec<_> = rows
                .iter()
                .map(|(a0, order, nhe, off)| {
                    json!({ "reference": game.key(*a0), "order": order, "nhe": game.key(*nhe), "nhp_off": game.key(*off) })
                })
                .collect();
            emit_json(
                out,
                &json!({
                    "k": a.k,
                    "rows": table,
                    "nhe_outcomes": keys(&nhe_all),
                    "nhp_off_outcomes": keys(&off_all),
                    "pure_nash": keys(&nash),
                    "pareto_optimal": keys(&po),
                }),
            )?;
        }
        Format::Table => {
            let width = rows.iter().map(|r| r.1.len()).max().unwrap_or(5).max(5);
            writeln!(out, "{:<12} {:<width$} {:<18} NHP off", "reference", "order", "NHE")?;
            for (a0, order, nhe, off) in &rows {
                writeln!(
                    out,
                    "{:<12} {:<width$} {:<18} {}",
                    game.key(*a0),
                    order,
                    labelled(&game, *nhe),
                    labelled(&game, *off)
                )?;
            }
            writeln!(out, "NHE outcomes: {}", profile_list(&game, &nhe_all))?;
            writeln!(out, "NHP-off outcomes: {}", profile_list(&game, &off_all))?;
            writeln!(out, "pure Nash: {}", profile_list(&game, &nash))?;
            writeln!(out, "pareto optimal: {}", profile_list(&game, &po))?;
        }
    }
    Ok(0)
}

pub fn cmd_trace(a: &TraceArgs, out: &mut dyn Write) -> Result<i32> {
    let game = NormalFormGame::from_path(&a.game)?;
    let cfg = a.config.resolve(&game)?;
    match a.format {
        TraceFormat::Jsonl => {
            let report = solve(&game, &cfg)?;
            out.write_all(trace_to_jsonl(&report.path).as_bytes())?;
        }
        TraceFormat::Dot => {
            let (report, steps) = explain(&game, &cfg)?;
            out.write_all(to_dot(&steps, &labelled(&game, report.outcome)).as_bytes())?;
        }
    }
    Ok(0)
}

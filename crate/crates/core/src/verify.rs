//! Sweeps of the solver over grids of (game, reference point, k, turn order).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::game::{NormalFormGame, ProfileId};
use crate::solver::{enumerate_outcomes, one_deviation_check, solve, solve_with_strategy, SolveConfig};
use crate::tree::{ActionChoice, TraceRecord, TurnPolicy};

/// Largest profile count [`random_strict_game`] will build.
pub const MAX_RANDOM_PROFILES: usize = 128;

/// Game whose payoffs for each player are a seeded shuffle of `1..=|A|`,
/// so no player is indifferent between two profiles.
pub fn random_strict_game(n: usize, sizes: &[usize], seed: u64) -> Result<NormalFormGame> {
    if n < 2 || sizes.len() != n {
        return Err(Error::InvalidInput(format!("need at least two players and one size per player, got n={n}")));
    }
    if sizes.iter().any(|&s| s < 2) {
        return Err(Error::InvalidInput("every player needs at least two actions".into()));
    }
    let m = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s)).unwrap_or(usize::MAX);
    if m > MAX_RANDOM_PROFILES {
        return Err(Error::Resource(format!("{m} profiles exceed the cap of {MAX_RANDOM_PROFILES}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = Vec::with_capacity(n);
    for _ in 0..n {
        let mut perm: Vec<i64> = (1..=m as i64).collect();
        perm.shuffle(&mut rng);
        columns.push(perm);
    }
    let table = (0..m).map(|i| columns.iter().map(|c| Decimal::from(c[i])).collect()).collect();
    let players = (1..=n).map(|i| format!("P{i}")).collect();
    let actions = sizes.iter().map(|&s| (0..s).map(|a| char::from(b'a' + a as u8).to_string()).collect()).collect();
    NormalFormGame::new(players, actions, table)
}

/// Parameters for a batch of random strict games.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomGames {
    pub players: usize,
    pub sizes: Vec<usize>,
    pub count: usize,
    pub seed: u64,
}

impl RandomGames {
    /// Games named `random-<seed>` after the per-game seed, which is drawn
    /// from the batch seed so any single game can be rebuilt on its own.
    pub fn generate(&self) -> Result<Vec<(String, NormalFormGame)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|_| {
                let s: u64 = rng.random();
                Ok((format!("random-{s}"), random_strict_game(self.players, &self.sizes, s)?))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Outcome is Pareto optimal; a Pareto-optimal start is kept.
    Efficiency,
    /// Outcome enumeration yields a single profile.
    Uniqueness,
    /// Solving succeeds and the solver's strategy survives the one-deviation audit.
    Existence,
    /// Indifference-tolerant version of efficiency, on enumerated outcomes.
    WeakEfficiency,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Efficiency => "efficiency",
            Check::Uniqueness => "uniqueness",
            Check::Existence => "existence",
            Check::WeakEfficiency => "weak_efficiency",
        }
    }
}

/// Nature-sampled orders: one policy per seed. Uniform weights when `q` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NatureOrders {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub ks: Vec<u32>,
    /// Every rotation of the round-robin order.
    pub rotations: bool,
    pub nature: Option<NatureOrders>,
    /// Replaces all orders by one player acting everywhere.
    pub unchecked: Option<String>,
    pub nhp: bool,
    pub terminate_action: bool,
    pub stay_threshold: usize,
    pub weak: bool,
    pub checks: Vec<Check>,
    /// The sweep is meant to find a failure.
    pub expect_fail: bool,
    /// Context cap for each solve and enumeration.
    pub max_contexts: Option<usize>,
    /// Context cap for each deviation audit.
    pub audit_max_contexts: Option<usize>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            ks: vec![1, 2],
            rotations: true,
            nature: Some(NatureOrders { q: None, seeds: vec![1, 2, 3, 4, 5] }),
            unchecked: None,
            nhp: true,
            terminate_action: false,
            stay_threshold: 2,
            weak: false,
            checks: vec![Check::Efficiency, Check::Uniqueness, Check::Existence],
            expect_fail: false,
            max_contexts: Some(5_000_000),
            audit_max_contexts: Some(2_000_000),
        }
    }
}

impl SweepSpec {
    pub fn policies(&self, game: &NormalFormGame) -> Result<Vec<TurnPolicy>> {
        let n = game.num_players();
        if let Some(name) = &self.unchecked {
            let p = game.player_by_name(name).ok_or_else(|| Error::InvalidInput(format!("unknown player {name:?}")))?;
            return Ok(vec![TurnPolicy::unchecked_degenerate(p)]);
        }
        let mut out = Vec::new();
        if self.rotations {
            out.extend(TurnPolicy::rotations(n));
        }
        if let Some(nature) = &self.nature {
            let q = nature.q.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]);
            for &seed in &nature.seeds {
                out.push(TurnPolicy::nature_sampled(q.clone(), seed)?);
            }
        }
        Ok(out)
    }

    /// Every (reference point, k, order) configuration for `game`.
    pub fn configs(&self, game: &NormalFormGame) -> Result<Vec<SolveConfig>> {
        let policies = self.policies(game)?;
        let mut out = Vec::new();
        for a0 in game.profile_ids() {
            for &k in &self.ks {
                for policy in &policies {
                    let mut cfg = SolveConfig::new(a0, policy.clone())
                        .with_k(k)
                        .with_nhp(self.nhp)
                        .with_termination(self.terminate_action)
                        .with_stay_threshold(self.stay_threshold)
                        .with_weak(self.weak)
                        .with_max_contexts(self.max_contexts);
                    cfg.max_depth_guard = None;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// A search hit its context cap; nothing was concluded.
    OverBudget,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: Check,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub game: String,
    pub config: ConfigFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome_set: Option<Vec<String>>,
    pub checks: Vec<CheckResult>,
}

impl ConfigResult {
    pub fn status(&self) -> Status {
        let worst = |s: Status| self.checks.iter().any(|c| c.status == s);
        if worst(Status::Error) {
            Status::Error
        } else if worst(Status::Fail) {
            Status::Fail
        } else if worst(Status::OverBudget) {
            Status::OverBudget
        } else {
            Status::Pass
        }
    }
}

/// A failed check with what is needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub game: String,
    pub game_json: serde_json::Value,
    pub config: ConfigFile,
    pub check: Check,
    pub detail: String,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub games: usize,
    pub configs: usize,
    pub pass: usize,
    pub fail: usize,
    pub over_budget: usize,
    pub error: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub checks: Vec<Check>,
    pub expect_fail: bool,
    pub totals: Totals,
    pub results: Vec<ConfigResult>,
    pub failures: Vec<Failure>,
}

impl SweepReport {
    /// Everything passed, or, for an expected-fail sweep, some check failed
    /// and nothing else went wrong.
    pub fn ok(&self) -> bool {
        let t = &self.totals;
        if self.expect_fail {
            t.fail > 0 && t.error == 0
        } else {
            t.fail == 0 && t.error == 0 && t.over_budget == 0
        }
    }

    pub fn merge(mut self, other: SweepReport) -> SweepReport {
        for c in other.checks {
            if !self.checks.contains(&c) {
                self.checks.push(c);
            }
        }
        let (a, b) = (&mut self.totals, other.totals);
        a.games += b.games;
        a.configs += b.configs;
        a.pass += b.pass;
        a.fail += b.fail;
        a.over_budget += b.over_budget;
        a.error += b.error;
        self.results.extend(other.results);
        self.failures.extend(other.failures);
        self
    }

    pub fn summary(&self) -> String {
        let t = &self.totals;
        let checks: Vec<&str> = self.checks.iter().map(|c| c.name()).collect();
        format!(
            "checks {}: {} games, {} configs: {} pass, {} fail, {} over budget, {} error{}",
            checks.join(","),
            t.games,
            t.configs,
            t.pass,
            t.fail,
            t.over_budget,
            t.error,
            if self.expect_fail { " (failure expected)" } else { "" }
        )
    }
}

/// Runs every check of `spec` on every configuration of every game.
/// Configurations are evaluated in parallel; results keep input order.
pub fn sweep(games: &[(String, NormalFormGame)], spec: &SweepSpec) -> Result<SweepReport> {
    let mut jobs = Vec::new();
    for (gi, (_, game)) in games.iter().enumerate() {
        for cfg in spec.configs(game)? {
            jobs.push((gi, cfg));
        }
    }
    let evaluated: Vec<(ConfigResult, Vec<Failure>)> = jobs
        .par_iter()
        .map(|(gi, cfg)| {
            let (name, game) = &games[*gi];
            evaluate(name, game, cfg, spec)
        })
        .collect();
    let mut totals = Totals { games: games.len(), configs: evaluated.len(), ..Totals::default() };
    let mut results = Vec::with_capacity(evaluated.len());
    let mut failures = Vec::new();
    for (r, f) in evaluated {
        match r.status() {
            Status::Pass => totals.pass += 1,
            Status::Fail => totals.fail += 1,
            Status::OverBudget => totals.over_budget += 1,
            Status::Error => totals.error += 1,
        }
        results.push(r);
        failures.extend(f);
    }
    Ok(SweepReport { checks: spec.checks.clone(), expect_fail: spec.expect_fail, totals, results, failures })
}

fn with_checks(spec: &SweepSpec, check: Check) -> SweepSpec {
    SweepSpec { checks: vec![check], ..spec.clone() }
}

pub fn check_efficiency(name: &str, g: &NormalFormGame, spec: &SweepSpec) -> Result<SweepReport> {
    sweep(&[(name.to_string(), g.clone())], &with_checks(spec, Check::Efficiency))
}

pub fn check_uniqueness(name: &str, g: &NormalFormGame, spec: &SweepSpec) -> Result<SweepReport> {
    sweep(&[(name.to_string(), g.clone())], &with_checks(spec, Check::Uniqueness))
}

pub fn check_existence(name: &str, g: &NormalFormGame, spec: &SweepSpec) -> Result<SweepReport> {
    sweep(&[(name.to_string(), g.clone())], &with_checks(spec, Check::Existence))
}

fn status_of(e: &Error) -> Status {
    match e {
        Error::Resource(_) => Status::OverBudget,
        _ => Status::Error,
    }
}

fn evaluate(name: &str, game: &NormalFormGame, cfg: &SolveConfig, spec: &SweepSpec) -> (ConfigResult, Vec<Failure>) {
    let config = ConfigFile::describe(cfg, game);
    let mut result = ConfigResult {
        game: name.to_string(),
        config: config.clone(),
        outcome: None,
        outcome_set: None,
        checks: vec![],
    };
    let mut failures = Vec::new();
    let keys = |set: &[ProfileId]| set.iter().map(|&p| game.key(p)).collect::<Vec<_>>();
    let pareto = game.pareto_optimal_set();
    for &check in &spec.checks {
        let mut fail = |detail: String, trace: Vec<TraceRecord>| {
            failures.push(Failure {
                game: name.to_string(),
                game_json: game.to_json_value(),
                config: config.clone(),
                check,
                detail: detail.clone(),
                trace,
            });
            CheckResult { check, status: Status::Fail, detail: Some(detail) }
        };
        let pass = CheckResult { check, status: Status::Pass, detail: None };
        let errored = |e: Error| CheckResult { check, status: status_of(&e), detail: Some(e.to_string()) };
        let outcome = match check {
            Check::Efficiency => match solve(game, cfg) {
                Err(e) => errored(e),
                Ok(report) => {
                    result.outcome = Some(game.key(report.outcome));
                    if pareto.binary_search(&report.outcome).is_err() {
                        fail(format!("outcome {} is not Pareto optimal", game.key(report.outcome)), report.path)
                    } else if pareto.binary_search(&cfg.initial).is_ok() && report.outcome != cfg.initial {
                        fail(
                            format!(
                                "Pareto-optimal start {} moved to {}",
                                game.key(cfg.initial),
                                game.key(report.outcome)
                            ),
                            report.path,
                        )
                    } else {
                        pass
                    }
                }
            },
            Check::Uniqueness => match enumerate_outcomes(game, cfg) {
                Err(e) => errored(e),
                Ok(set) => {
                    result.outcome_set = Some(keys(&set));
                    if set.len() == 1 {
                        pass
                    } else {
                        let trace = solve(game, cfg).map(|r| r.path).unwrap_or_default();
                        fail(format!("{} outcomes: {}", set.len(), keys(&set).join(" ")), trace)
                    }
                }
            },
            Check::Existence => match solve_with_strategy(game, cfg) {
                Err(e) => errored(e),
                Ok((report, strategy)) => {
                    result.outcome = Some(game.key(report.outcome));
                    let audit_cfg = cfg.clone().with_max_contexts(spec.audit_max_contexts);
                    match one_deviation_check(game, &audit_cfg, &strategy) {
                        Err(e) => errored(e),
                        Ok(audit) => match audit.violations.first() {
                            Some(v) => {
                                let trace = trace_of(game, cfg, &v.path).unwrap_or_default();
                                fail(
                                    format!("{} violations, first: {}", audit.violations.len(), v.describe(game)),
                                    trace,
                                )
                            }
                            None if audit.outcome != Some(report.outcome) => {
                                fail("audited play disagrees with the solved outcome".to_string(), report.path)
                            }
                            None => pass,
                        },
                    }
                }
            },
            Check::WeakEfficiency => match enumerate_outcomes(game, cfg) {
                Err(e) => errored(e),
                Ok(set) => {
                    result.outcome_set = Some(keys(&set));
                    let dominated = set.iter().find(|&&o| game.profile_ids().any(|a| game.strictly_above(a, o)));
                    if let Some(&o) = dominated {
                        fail(format!("enumerated outcome {} is strictly Pareto dominated", game.key(o)), vec![])
                    } else if !set.iter().any(|o| pareto.binary_search(o).is_ok()) {
                        fail(format!("no Pareto-optimal outcome among {}", keys(&set).join(" ")), vec![])
                    } else if pareto.binary_search(&cfg.initial).is_ok() && !set.contains(&cfg.initial) {
                        fail(format!("Pareto-optimal start {} is not an outcome", game.key(cfg.initial)), vec![])
                    } else {
                        pass
                    }
                }
            },
        };
        result.checks.push(outcome);
    }
    (result, failures)
}

/// Trace records for a play given as choices from the root.
pub fn trace_of(game: &NormalFormGame, cfg: &SolveConfig, choices: &[ActionChoice]) -> Result<Vec<TraceRecord>> {
    let tree = cfg.tree(game)?;
    let mut ctx = tree.root(cfg.initial);
    let mut out = Vec::with_capacity(choices.len());
    for &c in choices {
        let p = tree.next_player(&ctx)?;
        let (next, verdict) = tree.apply_action(&ctx, p, c)?;
        out.push(tree.record(&ctx, p, c, verdict));
        ctx = next;
    }
    Ok(out)
}

/// Re-runs the check behind a failure; true if it fails the same way.
pub fn reproduce(failure: &Failure) -> Result<bool> {
    let game = NormalFormGame::from_json_str(&failure.game_json.to_string())?;
    let cfg = failure.config.resolve(&game)?;
    let spec = SweepSpec { checks: vec![failure.check], ..SweepSpec::default() };
    let (_, again) = evaluate(&failure.game, &game, &cfg, &spec);
    Ok(again.iter().any(|f| f == failure))
}

/// Sweep spec for the single-player counterexample: `player` acts at every node.
pub fn degenerate_spec(player: &str) -> SweepSpec {
    SweepSpec {
        ks: vec![1],
        rotations: false,
        nature: None,
        unchecked: Some(player.to_string()),
        checks: vec![Check::Efficiency],
        expect_fail: true,
        ..SweepSpec::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn random_games_are_strict_and_reproducible() {
        let g = random_strict_game(2, &[2, 2], 7).unwrap();
        assert!(g.validate_strict().is_empty());
        assert_eq!(g.to_json_value(), random_strict_game(2, &[2, 2], 7).unwrap().to_json_value());
        let h = random_strict_game(3, &[2, 2, 2], 1).unwrap();
        assert_eq!(h.num_profiles(), 8);
        for p in h.players() {
            let mut col: Vec<Decimal> = h.profile_ids().map(|a| h.payoff(a, p)).collect();
            col.sort();
            assert_eq!(col, (1..=8).map(Decimal::from).collect::<Vec<_>>());
        }
    }

    #[test]
    fn random_game_limits() {
        assert!(random_strict_game(1, &[2], 0).is_err());
        assert!(random_strict_game(2, &[2, 1], 0).is_err());
        assert!(matches!(random_strict_game(2, &[12, 12], 0), Err(Error::Resource(_))));
    }

    #[test]
    fn prisoners_dilemma_passes_every_check() {
        let g = fixtures::load("pd").unwrap();
        let spec = SweepSpec { ks: vec![1], nature: None, ..SweepSpec::default() };
        let report = sweep(&[("pd".into(), g)], &spec).unwrap();
        assert_eq!(report.totals.configs, 8);
        assert!(report.ok(), "{}", report.summary());
    }

    #[test]
    fn degenerate_order_fails_as_expected_and_replays() {
        let g = fixtures::load("pd").unwrap();
        let report = check_efficiency("pd", &g, &degenerate_spec("Row")).unwrap();
        assert!(report.ok());
        assert!(report.totals.fail > 0);
        for f in &report.failures {
            assert!(reproduce(f).unwrap());
        }
    }
}

//! Backward induction over the implicit move tree.
//!
//! [`solve`] returns the no-harm equilibrium outcome (or, with the no-harm
//! constraint switched off, the plain subgame-perfect outcome of the same
//! tree). [`enumerate_outcomes`] collects every outcome some tie-breaking of
//! the induction can produce, and [`one_deviation_check`] independently
//! audits any strategy against single-node deviations.

use std::cell::RefCell;

use rust_decimal::Decimal;
use rustc_hash::FxHashMap;
use serde_json::json;

use crate::error::{Error, Result};
use crate::game::{decimal_json, NormalFormGame, PlayerId, ProfileId};
use crate::tree::{
    ActionChoice, ContextKey, DotStep, MoveTree, PathContext, Rules, TerminalVerdict, TraceRecord, TurnPolicy,
};

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub initial: ProfileId,
    pub k: u32,
    pub policy: TurnPolicy,
    pub nhp_enabled: bool,
    pub termination_action: bool,
    pub stay_threshold: usize,
    pub weak_mode: bool,
    /// Depth at which the search gives up; `None` means ten times the
    /// analytic depth bound.
    pub max_depth_guard: Option<usize>,
    /// Cap on contexts a search may expand before giving up with a
    /// resource error; `None` means unbounded.
    pub max_contexts: Option<usize>,
}

impl SolveConfig {
    pub fn new(initial: ProfileId, policy: TurnPolicy) -> Self {
        SolveConfig {
            initial,
            k: 1,
            policy,
            nhp_enabled: true,
            termination_action: false,
            stay_threshold: 2,
            weak_mode: false,
            max_depth_guard: None,
            max_contexts: None,
        }
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn with_nhp(mut self, on: bool) -> Self {
        self.nhp_enabled = on;
        self
    }

    pub fn with_termination(mut self, on: bool) -> Self {
        self.termination_action = on;
        self
    }

    pub fn with_stay_threshold(mut self, m: usize) -> Self {
        self.stay_threshold = m;
        self
    }

    pub fn with_weak(mut self, on: bool) -> Self {
        self.weak_mode = on;
        self
    }

    pub fn with_max_contexts(mut self, cap: Option<usize>) -> Self {
        self.max_contexts = cap;
        self
    }

    pub fn rules(&self) -> Rules {
        Rules {
            k: self.k,
            nhp: self.nhp_enabled,
            termination_action: self.termination_action,
            stay_threshold: self.stay_threshold,
        }
    }

    pub fn tree<'g>(&self, game: &'g NormalFormGame) -> Result<MoveTree<'g>> {
        if self.initial.index() >= game.num_profiles() {
            return Err(Error::InvalidInput(format!("initial profile {} out of range", self.initial.0)));
        }
        MoveTree::new(game, self.rules(), self.policy.clone())
    }

    fn guard(&self, tree: &MoveTree) -> usize {
        self.max_depth_guard.unwrap_or(10 * tree.depth_bound())
    }

    fn check_strict(&self, game: &NormalFormGame) -> Result<()> {
        if !self.weak_mode {
            let violations = game.validate_strict();
            if !violations.is_empty() {
                return Err(Error::NotStrict { count: violations.len() });
            }
        }
        Ok(())
    }

    pub fn mode(&self) -> &'static str {
        match (self.nhp_enabled, self.termination_action) {
            (true, false) => "no-harm equilibrium",
            (true, true) => "no-harm equilibrium, unilateral termination",
            (false, false) => "subgame perfect (no-harm off)",
            (false, true) => "subgame perfect (no-harm off), unilateral termination",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub outcome: ProfileId,
    pub payoffs: Vec<Decimal>,
    pub path: Vec<TraceRecord>,
    pub nodes_expanded: usize,
    pub tie_events: usize,
    /// Every outcome reachable under some tie-break; filled in weak mode.
    pub outcome_set: Option<Vec<ProfileId>>,
    pub mode: String,
    pub policy: String,
    pub k: u32,
    pub initial: ProfileId,
}

impl SolveReport {
    pub fn to_json(&self, game: &NormalFormGame) -> serde_json::Value {
        let mut v = json!({
            "mode": self.mode,
            "initial": game.key(self.initial),
            "k": self.k,
            "policy": self.policy,
            "outcome": game.key(self.outcome),
            "payoffs": self.payoffs.iter().map(|d| decimal_json(*d)).collect::<Vec<_>>(),
            "path": self.path,
            "nodes_expanded": self.nodes_expanded,
            "tie_events": self.tie_events,
        });
        if let Some(set) = &self.outcome_set {
            v["outcome_set"] = json!(set.iter().map(|p| game.key(*p)).collect::<Vec<_>>());
        }
        v
    }
}

/// A pure strategy profile of the move tree, queried per context.
pub trait Strategy {
    /// The choice at `ctx`; `Ok(None)` when the strategy does not cover it.
    fn choose(&self, tree: &MoveTree, ctx: &PathContext, player: PlayerId) -> Result<Option<ActionChoice>>;
}

/// The backward-induction strategy. Contexts the solve did not settle are
/// solved on demand, so it is defined everywhere in its tree.
///
/// Only query it with the tree of the configuration it was solved under.
pub struct SolverStrategy {
    search: RefCell<Search>,
}

impl SolverStrategy {
    /// Contexts whose choice is settled so far.
    pub fn len(&self) -> usize {
        self.search.borrow().memo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Strategy for SolverStrategy {
    fn choose(&self, tree: &MoveTree, ctx: &PathContext, _player: PlayerId) -> Result<Option<ActionChoice>> {
        let mut search = self.search.borrow_mut();
        let key = tree.key(ctx);
        if !search.memo.contains_key(&key) {
            search.value(tree, ctx)?;
        }
        Ok(search.memo.get(&key).map(|&(_, c)| c))
    }
}

/// Stay whenever that is legal, otherwise pass.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysStay;

impl Strategy for AlwaysStay {
    fn choose(&self, tree: &MoveTree, ctx: &PathContext, player: PlayerId) -> Result<Option<ActionChoice>> {
        let mut legal = Vec::new();
        tree.legal_into(ctx, player, &mut legal);
        Ok(Some(if legal.contains(&ActionChoice::Stay) { ActionChoice::Stay } else { ActionChoice::Pass }))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysPass;

impl Strategy for AlwaysPass {
    fn choose(&self, _tree: &MoveTree, _ctx: &PathContext, _player: PlayerId) -> Result<Option<ActionChoice>> {
        Ok(Some(ActionChoice::Pass))
    }
}

/// Follows a fixed script along its own path and defers to `fallback` elsewhere.
pub struct Scripted<S> {
    on_path: FxHashMap<ContextKey, ActionChoice>,
    fallback: S,
}

impl<S: Strategy> Scripted<S> {
    pub fn new(tree: &MoveTree, a0: ProfileId, script: &[ActionChoice], fallback: S) -> Result<Self> {
        let mut on_path = FxHashMap::default();
        let mut ctx = tree.root(a0);
        for (i, &choice) in script.iter().enumerate() {
            let p = tree.next_player(&ctx)?;
            on_path.insert(tree.key(&ctx), choice);
            let (next, verdict) = tree.apply_action(&ctx, p, choice)?;
            if verdict != TerminalVerdict::NotTerminal && i + 1 != script.len() {
                return Err(Error::InvalidInput("script continues past a terminal node".into()));
            }
            ctx = next;
        }
        Ok(Scripted { on_path, fallback })
    }
}

impl<S: Strategy> Strategy for Scripted<S> {
    fn choose(&self, tree: &MoveTree, ctx: &PathContext, player: PlayerId) -> Result<Option<ActionChoice>> {
        match self.on_path.get(&tree.key(ctx)) {
            Some(&c) => Ok(Some(c)),
            None => self.fallback.choose(tree, ctx, player),
        }
    }
}

/// Sets of profiles as bitmasks over profile ids.
type Profiles = u128;

fn members(set: Profiles) -> impl Iterator<Item = ProfileId> {
    (0..128u32).filter(move |i| set >> i & 1 == 1).map(ProfileId)
}

/// Backward induction with a transposition table.
///
/// Children are tried in tie-break order, and a node stops early once its
/// mover holds the best rank any outcome still reachable could give them:
/// later choices could at best tie, and ties go to the earlier choice.
struct Search {
    memo: FxHashMap<ContextKey, (ProfileId, ActionChoice)>,
    cache: bool,
    bounds: Option<OutcomeBounds>,
    guard: usize,
    budget: usize,
    nodes: usize,
    ties: usize,
}

impl Search {
    fn new(tree: &MoveTree, cfg: &SolveConfig, cache: bool) -> Self {
        let game = tree.game();
        Search {
            memo: FxHashMap::default(),
            cache,
            bounds: (cache && game.num_profiles() <= 128).then(|| OutcomeBounds::new(game, cfg.nhp_enabled)),
            guard: cfg.guard(tree),
            budget: cfg.max_contexts.unwrap_or(usize::MAX),
            nodes: 0,
            ties: 0,
        }
    }

    fn value(&mut self, tree: &MoveTree, ctx: &PathContext) -> Result<ProfileId> {
        Ok(self.settle(tree, ctx, None)?.expect("no cut given"))
    }

    /// Value of `ctx`, or `None` when `cut = (p, r)` is given and no outcome
    /// still reachable here gives `p` a rank above `r` while being at least
    /// as good for this node's mover as their best so far. The parent then
    /// cannot prefer this node, so its exact value is not needed and is not
    /// memoized.
    fn settle(
        &mut self,
        tree: &MoveTree,
        ctx: &PathContext,
        cut: Option<(PlayerId, u32)>,
    ) -> Result<Option<ProfileId>> {
        if ctx.depth() > self.guard {
            return Err(Error::Internal(format!("play exceeded the depth guard {}", self.guard)));
        }
        let p = tree.next_player(ctx)?;
        // Outcomes of interest to the parent, as a set of profiles.
        let wanted = match (&self.bounds, cut) {
            (Some(b), Some((q, r))) => {
                let w = b.candidates(ctx.reference()) & b.above(q, r);
                if w == 0 {
                    return Ok(None);
                }
                Some(w)
            }
            _ => None,
        };
        let key = self.cache.then(|| tree.key(ctx));
        if let Some(key) = &key {
            if let Some(&(o, _)) = self.memo.get(key) {
                return Ok(Some(o));
            }
        }
        if self.nodes >= self.budget {
            return Err(Error::Resource(format!("more than {} contexts", self.budget)));
        }
        let game = tree.game();
        let mut legal = Vec::new();
        tree.legal_into(ctx, p, &mut legal);
        let ceiling = self.bounds.as_ref().map(|b| b.best_rank(p, ctx.reference()));
        let mut best: Option<(u32, ProfileId, ActionChoice)> = None;
        let mut tied = false;
        for choice in legal {
            let (child, verdict) = tree.step(ctx, p, choice);
            let outcome = match verdict.outcome() {
                Some(o) => o,
                None => match self.settle(tree, &child, best.map(|(r, _, _)| (p, r)))? {
                    Some(o) => o,
                    None => continue,
                },
            };
            let r = game.rank(outcome, p);
            match best {
                Some((br, _, _)) if r < br => {}
                Some((br, _, _)) if r == br => tied = true,
                _ => {
                    best = Some((r, outcome, choice));
                    tied = false;
                }
            }
            if Some(r) == ceiling {
                break;
            }
            if let (Some(w), Some(b), Some((br, _, _))) = (wanted, &self.bounds, best) {
                if w & b.at_least(p, br) == 0 {
                    self.nodes += 1;
                    return Ok(None);
                }
            }
        }
        let (_, outcome, choice) = best.expect("pass is always legal");
        self.nodes += 1;
        if tied {
            self.ties += 1;
        }
        if let Some(key) = key {
            self.memo.insert(key, (outcome, choice));
        }
        Ok(Some(outcome))
    }
}

/// Per reference point, the profiles that can still become the outcome.
///
/// Any outcome is the current reference or a profile someone later stays
/// at (or terminates at). Under the no-harm rule such a profile leaves
/// everyone but the stayer at least as well off as the reference at that
/// moment, so the candidates from reference `r` are the closure of `r`
/// under that relation. Without the rule every profile is a candidate.
struct OutcomeBounds {
    n: usize,
    candidates: Vec<Profiles>,
    /// `above[p * (m + 1) + r]`: profiles `p` ranks strictly above rank `r`.
    above: Vec<Profiles>,
    /// `best[r * n + p]`: top rank of `p` among the candidates of `r`.
    best: Vec<u32>,
    m: usize,
}

impl OutcomeBounds {
    fn new(game: &NormalFormGame, nhp: bool) -> Self {
        let n = game.num_players();
        let m = game.num_profiles();
        let ids: Vec<ProfileId> = game.profile_ids().collect();
        let mut candidates = Vec::with_capacity(m);
        for &r in &ids {
            let mut seen: Profiles = 1 << r.0;
            let mut stack = vec![r];
            while let Some(cur) = stack.pop() {
                for &s in &ids {
                    if seen >> s.0 & 1 == 1 {
                        continue;
                    }
                    let endorsable = !nhp
                        || game.players().any(|stayer| {
                            game.players().filter(|&j| j != stayer).all(|j| game.rank(s, j) >= game.rank(cur, j))
                        });
                    if endorsable {
                        seen |= 1 << s.0;
                        stack.push(s);
                    }
                }
            }
            candidates.push(seen);
        }
        let mut above = vec![0; n * (m + 1)];
        for p in game.players() {
            for r in 0..=m {
                above[p.0 * (m + 1) + r] =
                    ids.iter().filter(|&&s| game.rank(s, p) as usize > r).fold(0, |acc, s| acc | 1 << s.0);
            }
        }
        let mut best = vec![0; m * n];
        for r in 0..m {
            for p in game.players() {
                best[r * n + p.0] = members(candidates[r]).map(|s| game.rank(s, p)).max().unwrap_or(0);
            }
        }
        OutcomeBounds { n, candidates, above, best, m }
    }

    fn best_rank(&self, p: PlayerId, reference: ProfileId) -> u32 {
        self.best[reference.index() * self.n + p.0]
    }

    fn candidates(&self, reference: ProfileId) -> Profiles {
        self.candidates[reference.index()]
    }

    fn above(&self, p: PlayerId, rank: u32) -> Profiles {
        self.above[p.0 * (self.m + 1) + (rank as usize).min(self.m)]
    }

    fn at_least(&self, p: PlayerId, rank: u32) -> Profiles {
        match rank {
            0 => self.above[p.0 * (self.m + 1)] | !self.above[p.0 * (self.m + 1)],
            r => self.above(p, r - 1),
        }
    }
}

/// Solves and also returns the strategy for auditing.
pub fn solve_with_strategy(game: &NormalFormGame, cfg: &SolveConfig) -> Result<(SolveReport, SolverStrategy)> {
    cfg.check_strict(game)?;
    let tree = cfg.tree(game)?;
    let mut search = Search::new(&tree, cfg, true);
    let root = tree.root(cfg.initial);
    let outcome = search.value(&tree, &root)?;

    let mut path = Vec::new();
    let mut ctx = root;
    let realized = loop {
        let p = tree.next_player(&ctx)?;
        let &(_, choice) = search
            .memo
            .get(&tree.key(&ctx))
            .ok_or_else(|| Error::Internal("on-path context missing from the memo".into()))?;
        let (next, verdict) = tree.step(&ctx, p, choice);
        path.push(tree.record(&ctx, p, choice, verdict));
        if let Some(o) = verdict.outcome() {
            break o;
        }
        ctx = next;
    };
    if realized != outcome {
        return Err(Error::Internal("on-path realization disagrees with the induced value".into()));
    }

    let outcome_set = if cfg.weak_mode { Some(enumerate_outcomes(game, cfg)?) } else { None };
    let report = SolveReport {
        outcome,
        payoffs: game.payoff_vector(outcome).to_vec(),
        path,
        nodes_expanded: search.nodes,
        tie_events: search.ties,
        outcome_set,
        mode: cfg.mode().to_string(),
        policy: tree.policy().describe(game),
        k: cfg.k,
        initial: cfg.initial,
    };
    Ok((report, SolverStrategy { search: RefCell::new(search) }))
}

pub fn solve(game: &NormalFormGame, cfg: &SolveConfig) -> Result<SolveReport> {
    solve_with_strategy(game, cfg).map(|(r, _)| r)
}

/// [`solve`] with the Terminate action switched on.
pub fn solve_with_termination(game: &NormalFormGame, cfg: &SolveConfig) -> Result<SolveReport> {
    solve(game, &cfg.clone().with_termination(true))
}

/// Plain backward induction: no transposition table, no pruning.
/// Exponential; used to validate [`solve`] on small games.
pub fn solve_uncached(game: &NormalFormGame, cfg: &SolveConfig) -> Result<ProfileId> {
    cfg.check_strict(game)?;
    let tree = cfg.tree(game)?;
    let mut search = Search::new(&tree, cfg, false);
    search.value(&tree, &tree.root(cfg.initial))
}

/// Enumeration is limited to games with at most this many profiles.
pub const MAX_ENUMERATION_PROFILES: usize = 128;

struct SetSearch<'a, 'g> {
    tree: &'a MoveTree<'g>,
    memo: FxHashMap<ContextKey, Profiles>,
    bounds: OutcomeBounds,
    guard: usize,
    budget: usize,
}

impl<'a, 'g> SetSearch<'a, 'g> {
    fn outcomes(&mut self, ctx: &PathContext) -> Result<Profiles> {
        Ok(self.settle(ctx, None)?.expect("no cut given"))
    }

    /// Outcome set of `ctx`, or `None` when `cut = (p, t)` is given and no
    /// outcome still reachable here ranks at least `t` for `p` while ranking
    /// at least this mover's running threshold for them. Such a node adds
    /// nothing to its parent's set and cannot raise the parent's threshold.
    fn settle(&mut self, ctx: &PathContext, cut: Option<(PlayerId, u32)>) -> Result<Option<Profiles>> {
        if ctx.depth() > self.guard {
            return Err(Error::Internal(format!("play exceeded the depth guard {}", self.guard)));
        }
        let candidates = self.bounds.candidates(ctx.reference());
        let wanted = match cut {
            Some((q, t)) => {
                let w = candidates & self.bounds.at_least(q, t);
                if w == 0 {
                    return Ok(None);
                }
                Some(w)
            }
            None => None,
        };
        let key = self.tree.key(ctx);
        if let Some(&s) = self.memo.get(&key) {
            return Ok(Some(s));
        }
        if self.memo.len() >= self.budget {
            return Err(Error::Resource(format!("more than {} contexts", self.budget)));
        }
        let game = self.tree.game();
        let p = self.tree.next_player(ctx)?;
        let mut legal = Vec::new();
        self.tree.legal_into(ctx, p, &mut legal);
        let worst = |set: Profiles| members(set).map(|o| game.rank(o, p)).min().expect("nonempty");
        // Profiles the mover ranks top among those still possible.
        let top = members(candidates).map(|o| game.rank(o, p)).max().expect("reference is a candidate");
        let top_set = candidates & self.bounds.at_least(p, top);
        let mut children = Vec::with_capacity(legal.len());
        let mut threshold = 0;
        let mut seen: Profiles = 0;
        for choice in legal {
            let (child, verdict) = self.tree.step(ctx, p, choice);
            let set = match verdict.outcome() {
                Some(o) => 1 << o.0,
                None => match self.settle(&child, (threshold > 0).then_some((p, threshold)))? {
                    Some(set) => set,
                    None => continue,
                },
            };
            threshold = threshold.max(worst(set));
            children.push(set);
            seen |= set;
            // Past this point further children could only add top-ranked
            // profiles, and all of those are in already.
            if threshold == top && seen & top_set == top_set {
                break;
            }
            if wanted.is_some_and(|w| w & self.bounds.at_least(p, threshold) == 0) {
                return Ok(None);
            }
        }
        // Any child outcome is selectable if it beats the worst case the
        // other children can be made to deliver.
        let mut result = 0;
        for set in children {
            for o in members(set) {
                if game.rank(o, p) >= threshold {
                    result |= 1 << o.0;
                }
            }
        }
        self.memo.insert(key, result);
        Ok(Some(result))
    }
}

/// Every outcome produced by backward induction under some tie-breaking.
pub fn enumerate_outcomes(game: &NormalFormGame, cfg: &SolveConfig) -> Result<Vec<ProfileId>> {
    if game.num_profiles() > MAX_ENUMERATION_PROFILES {
        return Err(Error::Resource(format!(
            "outcome enumeration supports at most {MAX_ENUMERATION_PROFILES} profiles"
        )));
    }
    let tree = cfg.tree(game)?;
    let mut search = SetSearch {
        tree: &tree,
        memo: FxHashMap::default(),
        bounds: OutcomeBounds::new(game, cfg.nhp_enabled),
        guard: cfg.guard(&tree),
        budget: cfg.max_contexts.unwrap_or(usize::MAX),
    };
    let set = search.outcomes(&tree.root(cfg.initial))?;
    Ok(members(set).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// The strategy prescribes a choice that is not legal here (k-limit or no-harm).
    Illegal,
    /// Some legal alternative gives the active player a strictly better outcome.
    Profitable { deviation: ActionChoice, prescribed_outcome: ProfileId, deviation_outcome: ProfileId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Choices from the root that reach the offending context.
    pub path: Vec<ActionChoice>,
    pub player: PlayerId,
    pub state: ProfileId,
    pub reference: ProfileId,
    pub prescribed: ActionChoice,
    pub kind: ViolationKind,
}

impl Violation {
    pub fn describe(&self, game: &NormalFormGame) -> String {
        let who = game.player_name(self.player);
        let at = format!(
            "depth {} {who} at {} (ref {}) plays {}",
            self.path.len(),
            game.key(self.state),
            game.key(self.reference),
            self.prescribed.label(game, self.player)
        );
        match &self.kind {
            ViolationKind::Illegal => format!("{at}: not a legal choice"),
            ViolationKind::Profitable { deviation, prescribed_outcome, deviation_outcome } => format!(
                "{at} -> {} but {} -> {}",
                game.key(*prescribed_outcome),
                deviation.label(game, self.player),
                game.key(*deviation_outcome)
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeviationReport {
    pub violations: Vec<Violation>,
    /// Outcome of playing the strategy from the root, if every on-path choice was legal.
    pub outcome: Option<ProfileId>,
    pub contexts_checked: usize,
}

struct Audit<'a, 'g, S: ?Sized> {
    tree: &'a MoveTree<'g>,
    strategy: &'a S,
    memo: FxHashMap<ContextKey, Option<ProfileId>>,
    stack: Vec<ActionChoice>,
    violations: Vec<Violation>,
    guard: usize,
    budget: usize,
}

impl<'a, 'g, S: Strategy + ?Sized> Audit<'a, 'g, S> {
    /// Outcome of following the strategy from `ctx`; visits every child so
    /// the whole reachable tree gets audited.
    fn visit(&mut self, ctx: &PathContext) -> Result<Option<ProfileId>> {
        if ctx.depth() > self.guard {
            return Err(Error::Internal(format!("play exceeded the depth guard {}", self.guard)));
        }
        let key = self.tree.key(ctx);
        if let Some(&o) = self.memo.get(&key) {
            return Ok(o);
        }
        if self.memo.len() >= self.budget {
            return Err(Error::Resource(format!("more than {} contexts", self.budget)));
        }
        let game = self.tree.game();
        let p = self.tree.next_player(ctx)?;
        let prescribed = self.strategy.choose(self.tree, ctx, p)?.ok_or_else(|| {
            Error::Coverage(format!(
                "depth {} state {} reference {}",
                ctx.depth(),
                game.key(ctx.current()),
                game.key(ctx.reference())
            ))
        })?;
        let mut legal = Vec::new();
        self.tree.legal_into(ctx, p, &mut legal);
        let mut results = Vec::with_capacity(legal.len());
        for &choice in &legal {
            let (child, verdict) = self.tree.step(ctx, p, choice);
            let o = match verdict.outcome() {
                Some(o) => Some(o),
                None => {
                    self.stack.push(choice);
                    let r = self.visit(&child);
                    self.stack.pop();
                    r?
                }
            };
            results.push((choice, o));
        }
        let mine = results.iter().find(|(c, _)| *c == prescribed).map(|&(_, o)| o);
        let value = match mine {
            None => {
                self.violations.push(Violation {
                    path: self.stack.clone(),
                    player: p,
                    state: ctx.current(),
                    reference: ctx.reference(),
                    prescribed,
                    kind: ViolationKind::Illegal,
                });
                None
            }
            Some(None) => None,
            Some(Some(o)) => {
                let better = results
                    .iter()
                    .filter_map(|&(c, alt)| alt.map(|a| (c, a)))
                    .filter(|&(_, a)| game.rank(a, p) > game.rank(o, p))
                    .max_by_key(|&(_, a)| game.rank(a, p));
                if let Some((deviation, alt)) = better {
                    self.violations.push(Violation {
                        path: self.stack.clone(),
                        player: p,
                        state: ctx.current(),
                        reference: ctx.reference(),
                        prescribed,
                        kind: ViolationKind::Profitable { deviation, prescribed_outcome: o, deviation_outcome: alt },
                    });
                }
                Some(o)
            }
        };
        self.memo.insert(key, value);
        Ok(value)
    }
}

/// Audits `strategy` at every context reachable through legal choices:
/// the prescribed choice must be legal and no single-node deviation may
/// strictly improve the mover's outcome, with play continuing by the
/// strategy afterwards.
pub fn one_deviation_check<S: Strategy + ?Sized>(
    game: &NormalFormGame,
    cfg: &SolveConfig,
    strategy: &S,
) -> Result<DeviationReport> {
    let tree = cfg.tree(game)?;
    let mut audit = Audit {
        tree: &tree,
        strategy,
        memo: FxHashMap::default(),
        stack: Vec::new(),
        violations: Vec::new(),
        guard: cfg.guard(&tree),
        budget: cfg.max_contexts.unwrap_or(usize::MAX),
    };
    let outcome = audit.visit(&tree.root(cfg.initial))?;
    Ok(DeviationReport { violations: audit.violations, outcome, contexts_checked: audit.memo.len() })
}

/// Play of `strategy` from the root as trace records.
pub fn play_out<S: Strategy + ?Sized>(
    game: &NormalFormGame,
    cfg: &SolveConfig,
    strategy: &S,
) -> Result<(Vec<TraceRecord>, ProfileId)> {
    let tree = cfg.tree(game)?;
    let guard = cfg.guard(&tree);
    let mut ctx = tree.root(cfg.initial);
    let mut trace = Vec::new();
    loop {
        if ctx.depth() > guard {
            return Err(Error::Internal("strategy play exceeded the depth guard".into()));
        }
        let p = tree.next_player(&ctx)?;
        let choice =
            strategy.choose(&tree, &ctx, p)?.ok_or_else(|| Error::Coverage(format!("depth {}", ctx.depth())))?;
        let (next, verdict) = tree.apply_action(&ctx, p, choice)?;
        trace.push(tree.record(&ctx, p, choice, verdict));
        if let Some(o) = verdict.outcome() {
            return Ok((trace, o));
        }
        ctx = next;
    }
}

/// Stay-free route from `from` to `to`: each active player moves to their
/// target action, or passes when already there.
pub fn path_between(
    game: &NormalFormGame,
    from: ProfileId,
    to: ProfileId,
    policy: &TurnPolicy,
) -> Result<Vec<TraceRecord>> {
    let tree = MoveTree::new(game, Rules::default(), policy.clone())?;
    let mut ctx = tree.root(from);
    let mut trace = Vec::new();
    let limit = 2 * game.num_players() * game.num_players();
    while ctx.current() != to {
        if trace.len() > limit {
            return Err(Error::Internal("path construction did not converge".into()));
        }
        let p = tree.next_player(&ctx)?;
        let target = game.component(to, p);
        let choice =
            if game.component(ctx.current(), p) == target { ActionChoice::Pass } else { ActionChoice::Move(target) };
        let (next, verdict) = tree.apply_action(&ctx, p, choice)?;
        trace.push(tree.record(&ctx, p, choice, verdict));
        if verdict != TerminalVerdict::NotTerminal {
            return Err(Error::Internal("path construction reached a terminal node".into()));
        }
        ctx = next;
    }
    Ok(trace)
}

/// Solved play with the unchosen alternatives at each on-path node.
pub fn explain(game: &NormalFormGame, cfg: &SolveConfig) -> Result<(SolveReport, Vec<DotStep>)> {
    let (report, strategy) = solve_with_strategy(game, cfg)?;
    let tree = cfg.tree(game)?;
    let mut ctx = tree.root(cfg.initial);
    let mut steps = Vec::new();
    for rec in &report.path {
        let p = tree.next_player(&ctx)?;
        let chosen =
            strategy.choose(&tree, &ctx, p)?.ok_or_else(|| Error::Internal("on-path context missing".into()))?;
        let mut alternatives = Vec::new();
        for alt in tree.legal_actions(&ctx, p)? {
            if alt == chosen {
                continue;
            }
            let (child, verdict) = tree.step(&ctx, p, alt);
            let outcome = match verdict.outcome() {
                Some(o) => o,
                None => follow(&tree, &strategy, child)?,
            };
            alternatives.push((alt.label(game, p), format!("{} {}", game.key(outcome), game.payoff_string(outcome))));
        }
        steps.push(DotStep { record: rec.clone(), alternatives });
        ctx = tree.step(&ctx, p, chosen).0;
    }
    Ok((report, steps))
}

fn follow(tree: &MoveTree, strategy: &SolverStrategy, mut ctx: PathContext) -> Result<ProfileId> {
    loop {
        let p = tree.next_player(&ctx)?;
        let choice = strategy
            .choose(tree, &ctx, p)?
            .ok_or_else(|| Error::Internal("context missing from the strategy".into()))?;
        let (next, verdict) = tree.step(&ctx, p, choice);
        if let Some(o) = verdict.outcome() {
            return Ok(o);
        }
        ctx = next;
    }
}

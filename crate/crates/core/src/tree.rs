//! The sequential-deviation game built on top of a normal-form game.
//!
//! The tree is never materialized. A [`PathContext`] carries everything the
//! future of a node depends on (state, reference point, who endorsed it,
//! per-state choice counts, the running pass streak and turn bookkeeping),
//! and [`MoveTree`] supplies the transition rules over those contexts.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{NormalFormGame, PlayerId, ProfileId};

/// Name of the generator behind Nature-sampled turn orders. Echoed in reports.
pub const NATURE_RNG: &str = "ChaCha8Rng::seed_from_u64(seed), stream = block index";

/// Largest number of players a tree supports (player sets are bitmasks).
pub const MAX_PLAYERS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionChoice {
    /// Keep the own component, endorsing the current state.
    Stay,
    /// Switch the own component to the given action index.
    Move(usize),
    Pass,
    /// End the game at the current state (unilateral-termination variant).
    Terminate,
}

impl ActionChoice {
    pub fn label(&self, game: &NormalFormGame, p: PlayerId) -> String {
        match self {
            ActionChoice::Stay => "stay".into(),
            ActionChoice::Move(a) => format!("move {}", game.actions(p)[*a]),
            ActionChoice::Pass => "pass".into(),
            ActionChoice::Terminate => "terminate".into(),
        }
    }

    /// Inverse of [`ActionChoice::label`].
    pub fn parse(text: &str, game: &NormalFormGame, p: PlayerId) -> Result<Self> {
        match text {
            "stay" => Ok(ActionChoice::Stay),
            "pass" => Ok(ActionChoice::Pass),
            "terminate" => Ok(ActionChoice::Terminate),
            other => {
                let label = other
                    .strip_prefix("move ")
                    .ok_or_else(|| Error::InvalidInput(format!("unknown choice {other:?}")))?;
                game.actions(p)
                    .iter()
                    .position(|s| s == label)
                    .map(ActionChoice::Move)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown action {label:?}")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminalVerdict {
    NotTerminal,
    /// Two (or `m`) distinct players stayed at the persisting reference.
    MutualStay(ProfileId),
    /// Every player passed in one uninterrupted streak; the reference wins.
    AllPass(ProfileId),
    Terminated(ProfileId),
}

impl TerminalVerdict {
    pub fn outcome(&self) -> Option<ProfileId> {
        match *self {
            TerminalVerdict::NotTerminal => None,
            TerminalVerdict::MutualStay(o) | TerminalVerdict::AllPass(o) | TerminalVerdict::Terminated(o) => Some(o),
        }
    }

    pub fn label(&self, game: &NormalFormGame) -> String {
        match *self {
            TerminalVerdict::NotTerminal => "continue".into(),
            TerminalVerdict::MutualStay(o) => format!("mutual_stay {}", game.key(o)),
            TerminalVerdict::AllPass(o) => format!("all_pass {}", game.key(o)),
            TerminalVerdict::Terminated(o) => format!("terminated {}", game.key(o)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum PolicyKind {
    RoundRobin(Vec<PlayerId>),
    Table(Vec<PlayerId>),
    NatureSampled { q: Vec<f64>, seed: u64 },
    UncheckedDegenerate(PlayerId),
}

/// Rule assigning the active player at each node.
///
/// Every constructor except [`TurnPolicy::unchecked_degenerate`] guarantees
/// that along any path the activity counts of two players differ by at
/// most one.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnPolicy {
    kind: PolicyKind,
}

impl TurnPolicy {
    /// Cyclic order; `order` must be a permutation of all players.
    pub fn round_robin(order: Vec<PlayerId>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for p in &order {
            if p.0 >= n || std::mem::replace(&mut seen[p.0], true) {
                return Err(Error::Policy(format!("round-robin order is not a permutation of {n} players")));
            }
        }
        if order.len() != n {
            return Err(Error::Policy(format!("round-robin order has {} players, game has {n}", order.len())));
        }
        Ok(TurnPolicy { kind: PolicyKind::RoundRobin(order) })
    }

    /// The `n` rotations of `0, 1, ..., n-1`.
    pub fn rotations(n: usize) -> Vec<TurnPolicy> {
        (0..n)
            .map(|s| TurnPolicy { kind: PolicyKind::RoundRobin((0..n).map(|i| PlayerId((s + i) % n)).collect()) })
            .collect()
    }

    /// Explicit per-depth sequence; rejected unless every prefix is balanced.
    pub fn table(seq: Vec<PlayerId>, n: usize) -> Result<Self> {
        if seq.iter().any(|p| p.0 >= n) {
            return Err(Error::Policy("table names an unknown player".into()));
        }
        if !validate_turn_balance(&seq, n) {
            return Err(Error::Policy("table violates the turn balance constraint".into()));
        }
        Ok(TurnPolicy { kind: PolicyKind::Table(seq) })
    }

    pub fn nature_sampled(q: Vec<f64>, seed: u64) -> Result<Self> {
        if q.is_empty() || q.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(Error::Policy("nature weights must all be positive".into()));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Policy(format!("nature weights sum to {total}, expected 1")));
        }
        Ok(TurnPolicy { kind: PolicyKind::NatureSampled { q, seed } })
    }

    /// A single player acts at every node. Breaks turn balance on purpose.
    pub fn unchecked_degenerate(p: PlayerId) -> Self {
        TurnPolicy { kind: PolicyKind::UncheckedDegenerate(p) }
    }

    pub fn is_unchecked(&self) -> bool {
        matches!(self.kind, PolicyKind::UncheckedDegenerate(_))
    }

    pub fn is_nature(&self) -> bool {
        matches!(self.kind, PolicyKind::NatureSampled { .. })
    }

    pub fn round_robin_order(&self) -> Option<&[PlayerId]> {
        match &self.kind {
            PolicyKind::RoundRobin(order) => Some(order),
            _ => None,
        }
    }

    pub fn table_sequence(&self) -> Option<&[PlayerId]> {
        match &self.kind {
            PolicyKind::Table(seq) => Some(seq),
            _ => None,
        }
    }

    /// Weights and seed of a Nature-sampled policy.
    pub fn nature_params(&self) -> Option<(&[f64], u64)> {
        match &self.kind {
            PolicyKind::NatureSampled { q, seed } => Some((q, *seed)),
            _ => None,
        }
    }

    pub fn unchecked_player(&self) -> Option<PlayerId> {
        match &self.kind {
            PolicyKind::UncheckedDegenerate(p) => Some(*p),
            _ => None,
        }
    }

    /// Active player at a given depth.
    pub fn player_at(&self, depth: usize) -> Result<PlayerId> {
        match &self.kind {
            PolicyKind::RoundRobin(order) => Ok(order[depth % order.len()]),
            PolicyKind::Table(seq) => {
                seq.get(depth).copied().ok_or_else(|| Error::Policy(format!("turn table exhausted at depth {depth}")))
            }
            PolicyKind::NatureSampled { q, seed } => Ok(nature_block(q, *seed, depth / q.len())[depth % q.len()]),
            PolicyKind::UncheckedDegenerate(p) => Ok(*p),
        }
    }

    /// Replaces a Nature-sampled policy by the table of its first `len` draws.
    pub fn materialize(&self, len: usize) -> Result<TurnPolicy> {
        match &self.kind {
            PolicyKind::NatureSampled { q, .. } => {
                let seq = (0..len).map(|d| self.player_at(d)).collect::<Result<Vec<_>>>()?;
                TurnPolicy::table(seq, q.len())
            }
            _ => Ok(self.clone()),
        }
    }

    /// Part of the memo key: two contexts with equal cursors face the same
    /// future turn order.
    fn cursor(&self, depth: usize) -> u32 {
        match &self.kind {
            PolicyKind::RoundRobin(order) => (depth % order.len()) as u32,
            PolicyKind::UncheckedDegenerate(_) => 0,
            PolicyKind::Table(_) | PolicyKind::NatureSampled { .. } => depth as u32,
        }
    }

    fn check_players(&self, n: usize) -> Result<()> {
        let bad = match &self.kind {
            PolicyKind::RoundRobin(order) => order.len() != n,
            PolicyKind::Table(seq) => seq.iter().any(|p| p.0 >= n),
            PolicyKind::NatureSampled { q, .. } => q.len() != n,
            PolicyKind::UncheckedDegenerate(p) => p.0 >= n,
        };
        if bad {
            return Err(Error::Policy(format!("turn policy does not match a {n}-player game")));
        }
        Ok(())
    }

    pub fn describe(&self, game: &NormalFormGame) -> String {
        let names = |v: &[PlayerId]| v.iter().map(|p| game.player_name(*p)).collect::<Vec<_>>().join(",");
        match &self.kind {
            PolicyKind::RoundRobin(order) => format!("round-robin {}", names(order)),
            PolicyKind::Table(seq) => format!("table {}", names(seq)),
            PolicyKind::NatureSampled { q, seed } => format!("nature q={q:?} seed={seed} rng={NATURE_RNG}"),
            PolicyKind::UncheckedDegenerate(p) => format!("unchecked-degenerate {}", game.player_name(*p)),
        }
    }
}

/// One block of `n` turns: players drawn without replacement, each draw
/// weighted by `q` renormalized over the players not yet drawn.
fn nature_block(q: &[f64], seed: u64, block: usize) -> Vec<PlayerId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    let mut remaining: Vec<usize> = (0..q.len()).collect();
    let mut out = Vec::with_capacity(q.len());
    while !remaining.is_empty() {
        let total: f64 = remaining.iter().map(|&i| q[i]).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = remaining.len() - 1;
        for (slot, &i) in remaining.iter().enumerate() {
            if u < q[i] {
                pick = slot;
                break;
            }
            u -= q[i];
        }
        out.push(PlayerId(remaining.remove(pick)));
    }
    out
}

/// True iff every prefix of `seq` keeps all pairwise activity counts within one.
pub fn validate_turn_balance(seq: &[PlayerId], n: usize) -> bool {
    let mut counts = vec![0usize; n];
    for p in seq {
        if p.0 >= n {
            return false;
        }
        counts[p.0] += 1;
        let max = counts.iter().max().copied().unwrap_or(0);
        let min = counts.iter().min().copied().unwrap_or(0);
        if max - min > 1 {
            return false;
        }
    }
    true
}

/// Rule switches of the move tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rules {
    pub k: u32,
    pub nhp: bool,
    /// Adds a Terminate action and drops termination by mutual stays.
    pub termination_action: bool,
    /// Distinct stayers needed at a persisting reference to end the game.
    pub stay_threshold: usize,
}

impl Default for Rules {
    fn default() -> Self {
        Rules { k: 1, nhp: true, termination_action: false, stay_threshold: 2 }
    }
}

/// The full path-dependent state of a node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathContext {
    current: ProfileId,
    reference: ProfileId,
    last_stayer: Option<PlayerId>,
    endorsers: u64,
    pass_mask: u64,
    pass_count: u32,
    depth: u32,
    turn_counts: Vec<u32>,
    usage: Vec<u8>,
}

impl PathContext {
    pub fn current(&self) -> ProfileId {
        self.current
    }

    pub fn reference(&self) -> ProfileId {
        self.reference
    }

    pub fn last_stayer(&self) -> Option<PlayerId> {
        self.last_stayer
    }

    pub fn depth(&self) -> usize {
        self.depth as usize
    }

    pub fn turn_counts(&self) -> &[u32] {
        &self.turn_counts
    }

    /// Players in the current uninterrupted pass streak, by id.
    pub fn pass_run(&self) -> Vec<PlayerId> {
        bits(self.pass_mask)
    }

    /// Players who stayed at the current reference since it became the reference.
    pub fn stay_endorsers(&self) -> Vec<PlayerId> {
        bits(self.endorsers)
    }
}

fn bits(mask: u64) -> Vec<PlayerId> {
    (0..64).filter(|i| mask >> i & 1 == 1).map(PlayerId).collect()
}

/// Hashable summary of the part of a context its subtree depends on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContextKey(KeyRepr);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum KeyRepr {
    Packed([u64; 3]),
    Bytes(Box<[u8]>),
}

/// Bit widths of the key fields, fixed per tree.
#[derive(Debug, Clone, Copy)]
struct KeyLayout {
    profile: u32,
    players: u32,
    pass_count: u32,
    cursor: u32,
    usage: u32,
    packed: bool,
}

fn bits_for(max: u64) -> u32 {
    64 - max.leading_zeros()
}

struct BitWriter {
    words: [u64; 3],
    at: u32,
}

impl BitWriter {
    #[inline]
    fn put(&mut self, value: u64, width: u32) {
        if width == 0 {
            return;
        }
        let (w, off) = ((self.at / 64) as usize, self.at % 64);
        self.words[w] |= value << off;
        if off + width > 64 {
            self.words[w + 1] |= value >> (64 - off);
        }
        self.at += width;
    }
}

/// Transition rules of the sequential-deviation game over one normal-form game.
#[derive(Debug, Clone)]
pub struct MoveTree<'g> {
    game: &'g NormalFormGame,
    rules: Rules,
    policy: TurnPolicy,
    stride_player: usize,
    max_actions: usize,
    layout: KeyLayout,
}

impl<'g> MoveTree<'g> {
    pub fn new(game: &'g NormalFormGame, rules: Rules, policy: TurnPolicy) -> Result<Self> {
        let n = game.num_players();
        if n < 2 {
            return Err(Error::InvalidInput("the move tree needs at least two players".into()));
        }
        if n > MAX_PLAYERS {
            return Err(Error::Resource(format!("at most {MAX_PLAYERS} players are supported")));
        }
        if rules.k == 0 || rules.k > u8::MAX as u32 {
            return Err(Error::InvalidInput(format!("k must lie in 1..=255, got {}", rules.k)));
        }
        if rules.stay_threshold < 2 || rules.stay_threshold > n {
            return Err(Error::InvalidInput(format!(
                "stay threshold must lie in 2..={n}, got {}",
                rules.stay_threshold
            )));
        }
        policy.check_players(n)?;
        let max_actions = game.max_actions();
        let profile = bits_for(game.num_profiles() as u64 - 1);
        let players = n as u32;
        let pass_count = if policy.is_unchecked() { bits_for(n as u64) } else { 0 };
        let cursor = match policy.round_robin_order() {
            Some(order) => bits_for(order.len() as u64 - 1),
            None if policy.is_unchecked() => 0,
            None => 32,
        };
        let stride_player = game.num_profiles() * max_actions;
        let usage = bits_for(rules.k as u64);
        let total = 2 * profile as u64
            + 2 * players as u64
            + (pass_count + cursor) as u64
            + (n * stride_player) as u64 * usage as u64;
        let layout = KeyLayout { profile, players, pass_count, cursor, usage, packed: total <= 192 };
        let mut tree = MoveTree { game, rules, policy, stride_player, max_actions, layout };
        if tree.policy.is_nature() {
            tree.policy = tree.policy.materialize(tree.depth_bound())?;
        }
        Ok(tree)
    }

    pub fn game(&self) -> &'g NormalFormGame {
        self.game
    }

    pub fn rules(&self) -> Rules {
        self.rules
    }

    pub fn policy(&self) -> &TurnPolicy {
        &self.policy
    }

    /// Analytic bound on the length of any play: every non-pass choice is
    /// capped by `k` per (player, state, action) slot, and fewer than `n`
    /// passes can separate two of them.
    pub fn depth_bound(&self) -> usize {
        let n = self.game.num_players();
        n * self.game.num_profiles() * self.max_actions * self.rules.k as usize * n + n
    }

    pub fn root(&self, a0: ProfileId) -> PathContext {
        let n = self.game.num_players();
        PathContext {
            current: a0,
            reference: a0,
            last_stayer: None,
            endorsers: 0,
            pass_mask: 0,
            pass_count: 0,
            depth: 0,
            turn_counts: vec![0; n],
            usage: vec![0; n * self.stride_player],
        }
    }

    pub fn next_player(&self, ctx: &PathContext) -> Result<PlayerId> {
        self.policy.player_at(ctx.depth())
    }

    #[inline]
    fn slot(&self, p: PlayerId, state: ProfileId, action: usize) -> usize {
        p.0 * self.stride_player + state.index() * self.max_actions + action
    }

    /// Times `p` has made the concrete choice `action` at `state` on this path.
    pub fn usage(&self, ctx: &PathContext, p: PlayerId, state: ProfileId, action: usize) -> u32 {
        ctx.usage[self.slot(p, state, action)] as u32
    }

    /// No other player is worse off at the current state than at the reference.
    pub fn nhp_allows_stay(&self, ctx: &PathContext, p: PlayerId) -> bool {
        self.game
            .players()
            .filter(|&j| j != p)
            .all(|j| self.game.rank(ctx.current, j) >= self.game.rank(ctx.reference, j))
    }

    /// Legal choices for the active player, in tie-break preference order:
    /// Stay, Moves by ascending action index, Pass, Terminate.
    pub fn legal_actions(&self, ctx: &PathContext, p: PlayerId) -> Result<Vec<ActionChoice>> {
        let active = self.next_player(ctx)?;
        if active != p {
            return Err(Error::Contract(format!(
                "player {} asked for actions at depth {} where {} is active",
                self.game.player_name(p),
                ctx.depth,
                self.game.player_name(active)
            )));
        }
        let mut out = Vec::with_capacity(self.max_actions + 2);
        self.legal_into(ctx, p, &mut out);
        Ok(out)
    }

    pub(crate) fn legal_into(&self, ctx: &PathContext, p: PlayerId, out: &mut Vec<ActionChoice>) {
        out.clear();
        let k = self.rules.k;
        let own = self.game.component(ctx.current, p);
        let nhp_ok = !self.rules.nhp || self.nhp_allows_stay(ctx, p);
        if nhp_ok && self.usage(ctx, p, ctx.current, own) < k {
            out.push(ActionChoice::Stay);
        }
        for a in 0..self.game.action_count(p) {
            if a != own && self.usage(ctx, p, ctx.current, a) < k {
                out.push(ActionChoice::Move(a));
            }
        }
        out.push(ActionChoice::Pass);
        if self.rules.termination_action && nhp_ok {
            out.push(ActionChoice::Terminate);
        }
    }

    /// Applies a legal choice, returning the successor context and whether it ends the game.
    pub fn apply_action(
        &self,
        ctx: &PathContext,
        p: PlayerId,
        choice: ActionChoice,
    ) -> Result<(PathContext, TerminalVerdict)> {
        let legal = self.legal_actions(ctx, p)?;
        if !legal.contains(&choice) {
            return Err(Error::Contract(format!(
                "{} is not legal for {} at depth {}",
                choice.label(self.game, p),
                self.game.player_name(p),
                ctx.depth
            )));
        }
        Ok(self.step(ctx, p, choice))
    }

    /// Transition without the legality check.
    pub(crate) fn step(&self, ctx: &PathContext, p: PlayerId, choice: ActionChoice) -> (PathContext, TerminalVerdict) {
        let mut next = ctx.clone();
        next.depth += 1;
        next.turn_counts[p.0] += 1;
        let bit = 1u64 << p.0;
        let verdict = match choice {
            ActionChoice::Move(a) => {
                let slot = self.slot(p, ctx.current, a);
                next.usage[slot] += 1;
                next.current = self.game.with_component(ctx.current, p, a);
                next.pass_mask = 0;
                next.pass_count = 0;
                TerminalVerdict::NotTerminal
            }
            ActionChoice::Stay => {
                let slot = self.slot(p, ctx.current, self.game.component(ctx.current, p));
                next.usage[slot] += 1;
                next.pass_mask = 0;
                next.pass_count = 0;
                if ctx.current == ctx.reference {
                    next.endorsers |= bit;
                    next.last_stayer = Some(p);
                    let endorsed = next.endorsers.count_ones() as usize;
                    if !self.rules.termination_action && endorsed >= self.rules.stay_threshold {
                        TerminalVerdict::MutualStay(ctx.current)
                    } else {
                        TerminalVerdict::NotTerminal
                    }
                } else {
                    next.reference = ctx.current;
                    next.last_stayer = Some(p);
                    next.endorsers = bit;
                    TerminalVerdict::NotTerminal
                }
            }
            ActionChoice::Pass => {
                next.pass_mask |= bit;
                next.pass_count += 1;
                let n = self.game.num_players();
                let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
                // A single-player policy can never cover every player, so
                // there any n consecutive passes end the game.
                let covered = next.pass_mask == all || (self.policy.is_unchecked() && next.pass_count as usize >= n);
                if covered {
                    TerminalVerdict::AllPass(ctx.reference)
                } else {
                    TerminalVerdict::NotTerminal
                }
            }
            ActionChoice::Terminate => TerminalVerdict::Terminated(ctx.current),
        };
        (next, verdict)
    }

    pub fn key(&self, ctx: &PathContext) -> ContextKey {
        let l = self.layout;
        if l.packed {
            let mut w = BitWriter { words: [0; 3], at: 0 };
            w.put(ctx.current.0 as u64, l.profile);
            w.put(ctx.reference.0 as u64, l.profile);
            w.put(ctx.endorsers, l.players);
            w.put(ctx.pass_mask, l.players);
            w.put(ctx.pass_count as u64, l.pass_count);
            w.put(self.policy.cursor(ctx.depth()) as u64, l.cursor);
            for &u in &ctx.usage {
                w.put(u as u64, l.usage);
            }
            return ContextKey(KeyRepr::Packed(w.words));
        }
        let mut buf = Vec::with_capacity(ctx.usage.len() + 32);
        buf.extend_from_slice(&ctx.current.0.to_le_bytes());
        buf.extend_from_slice(&ctx.reference.0.to_le_bytes());
        buf.extend_from_slice(&ctx.endorsers.to_le_bytes());
        buf.extend_from_slice(&ctx.pass_mask.to_le_bytes());
        let pass_count = if self.policy.is_unchecked() { ctx.pass_count } else { 0 };
        buf.extend_from_slice(&pass_count.to_le_bytes());
        buf.extend_from_slice(&self.policy.cursor(ctx.depth()).to_le_bytes());
        buf.extend_from_slice(&ctx.usage);
        ContextKey(KeyRepr::Bytes(buf.into_boxed_slice()))
    }

    pub fn record(
        &self,
        ctx: &PathContext,
        p: PlayerId,
        choice: ActionChoice,
        verdict: TerminalVerdict,
    ) -> TraceRecord {
        TraceRecord {
            depth: ctx.depth,
            player: self.game.player_name(p).to_string(),
            state: self.game.key(ctx.current),
            reference: self.game.key(ctx.reference),
            choice: choice.label(self.game, p),
            verdict: verdict.label(self.game),
        }
    }

    /// Re-applies a recorded trace from `a0`, checking each record.
    pub fn replay(&self, a0: ProfileId, trace: &[TraceRecord]) -> Result<Vec<(PathContext, TerminalVerdict)>> {
        let mut ctx = self.root(a0);
        let mut out = Vec::with_capacity(trace.len());
        for rec in trace {
            let p = self.next_player(&ctx)?;
            if rec.player != self.game.player_name(p) || rec.state != self.game.key(ctx.current) {
                return Err(Error::InvalidInput(format!("trace diverges at depth {}", rec.depth)));
            }
            let choice = ActionChoice::parse(&rec.choice, self.game, p)?;
            let (next, verdict) = self.apply_action(&ctx, p, choice)?;
            out.push((next.clone(), verdict));
            ctx = next;
        }
        Ok(out)
    }
}

/// One step of a play, in the JSON-lines trace format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub depth: u32,
    pub player: String,
    pub state: String,
    pub reference: String,
    pub choice: String,
    pub verdict: String,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>3}  {:<8} at {:<8} ref {:<8} {:<12} {}",
            self.depth, self.player, self.state, self.reference, self.choice, self.verdict
        )
    }
}

pub fn trace_to_jsonl(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for rec in trace {
        out.push_str(&serde_json::to_string(rec).expect("trace records serialize"));
        out.push('\n');
    }
    out
}

pub fn trace_from_jsonl(text: &str) -> Result<Vec<TraceRecord>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(Error::from)).collect()
}

/// A node for [`to_dot`]: an on-path node plus its unchosen siblings.
#[derive(Debug, Clone)]
pub struct DotStep {
    pub record: TraceRecord,
    /// Choices not taken at this node and the outcome each leads to.
    pub alternatives: Vec<(String, String)>,
}

/// Graphviz digraph of a play; unchosen choices hang off each node as dashed edges.
pub fn to_dot(steps: &[DotStep], outcome: &str) -> String {
    let mut out = String::from("digraph play {\n  rankdir=TB;\n  node [shape=box, fontname=\"monospace\"];\n");
    for (i, step) in steps.iter().enumerate() {
        let r = &step.record;
        out.push_str(&format!(
            "  n{i} [label=\"{} to act\\nstate {}\\nref {}\"];\n",
            escape(&r.player),
            escape(&r.state),
            escape(&r.reference)
        ));
        for (j, (choice, result)) in step.alternatives.iter().enumerate() {
            out.push_str(&format!(
                "  n{i}_alt{j} [label=\"{}\", style=dashed];\n  n{i} -> n{i}_alt{j} [label=\"{}\", style=dashed];\n",
                escape(result),
                escape(choice)
            ));
        }
    }
    let end = steps.len();
    out.push_str(&format!("  n{end} [label=\"outcome {}\", shape=doubleoctagon];\n", escape(outcome)));
    for (i, step) in steps.iter().enumerate() {
        out.push_str(&format!("  n{i} -> n{} [label=\"{}\"];\n", i + 1, escape(&step.record.choice)));
    }
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pd() -> NormalFormGame {
        NormalFormGame::from_ints(
            &["Row", "Column"],
            &[&["C", "D"], &["C", "D"]],
            &[&[3, 3], &[1, 4], &[4, 1], &[2, 2]],
        )
        .unwrap()
    }

    fn rr(n: usize) -> TurnPolicy {
        TurnPolicy::round_robin((0..n).map(PlayerId).collect(), n).unwrap()
    }

    const ROW: PlayerId = PlayerId(0);
    const COL: PlayerId = PlayerId(1);

    #[test]
    fn column_cannot_stay_at_cd_against_reference_dd() {
        let g = pd();
        let tree = MoveTree::new(&g, Rules::default(), rr(2)).unwrap();
        let root = tree.root(g.parse_key("D,D").unwrap());
        let (ctx, v) = tree.apply_action(&root, ROW, ActionChoice::Move(0)).unwrap();
        assert_eq!(v, TerminalVerdict::NotTerminal);
        assert_eq!(g.key(ctx.current()), "C,D");
        assert!(!tree.nhp_allows_stay(&ctx, COL));
        let legal = tree.legal_actions(&ctx, COL).unwrap();
        assert_eq!(legal, vec![ActionChoice::Move(0), ActionChoice::Pass]);
        assert!(matches!(tree.apply_action(&ctx, COL, ActionChoice::Stay), Err(Error::Contract(_))));
    }

    #[test]
    fn wrong_player_is_a_contract_violation() {
        let g = pd();
        let tree = MoveTree::new(&g, Rules::default(), rr(2)).unwrap();
        let root = tree.root(ProfileId(0));
        assert!(matches!(tree.legal_actions(&root, COL), Err(Error::Contract(_))));
    }

    #[test]
    fn fresh_root_offers_everything() {
        let g = pd();
        let tree = MoveTree::new(&g, Rules::default(), rr(2)).unwrap();
        for pid in g.profile_ids() {
            let root = tree.root(pid);
            assert!(tree.nhp_allows_stay(&root, ROW));
            assert!(tree.nhp_allows_stay(&root, COL));
            let legal = tree.legal_actions(&root, ROW).unwrap();
            assert_eq!(legal.len(), 3);
            assert!(legal.contains(&ActionChoice::Stay) && legal.contains(&ActionChoice::Pass));
        }
    }

    #[test]
    fn k_one_forbids_repeating_a_choice_at_a_state() {
        // CC -> DC -> DD -> CD -> CC; Row cannot choose D at CC again.
        let g = pd();
        let tree = MoveTree::new(&g, Rules { nhp: false, ..Rules::default() }, rr(2)).unwrap();
        let mut ctx = tree.root(g.parse_key("C,C").unwrap());
        for (p, a) in [(ROW, 1), (COL, 1), (ROW, 0), (COL, 0)] {
            ctx = tree.apply_action(&ctx, p, ActionChoice::Move(a)).unwrap().0;
        }
        assert_eq!(g.key(ctx.current()), "C,C");
        assert_eq!(tree.legal_actions(&ctx, ROW).unwrap(), vec![ActionChoice::Stay, ActionChoice::Pass]);
    }

    #[test]
    fn exhausted_slots_leave_only_pass() {
        let g = pd();
        let tree = MoveTree::new(&g, Rules { nhp: false, ..Rules::default() }, rr(2)).unwrap();
        let mut ctx = tree.root(g.parse_key("C,C").unwrap());
        // Row stays at CC (reference CC endorsed by Row), Column moves, Row
        // moves, Column moves, Row moves back to CC... drive Row's CC slots dry.
        for (p, c) in [
            (ROW, ActionChoice::Stay),
            (COL, ActionChoice::Move(1)),
            (ROW, ActionChoice::Pass),
            (COL, ActionChoice::Move(0)),
            (ROW, ActionChoice::Move(1)),
            (COL, ActionChoice::Pass),
            (ROW, ActionChoice::Move(0)),
        ] {
            ctx = tree.apply_action(&ctx, p, c).unwrap().0;
        }
        assert_eq!(g.key(ctx.current()), "C,C");
        ctx = tree.apply_action(&ctx, COL, ActionChoice::Pass).unwrap().0;
        assert_eq!(tree.legal_actions(&ctx, ROW).unwrap(), vec![ActionChoice::Pass]);
    }

    #[test]
    fn cooperative_path_from_dd_ends_in_cc() {
        let g = pd();
        let tree = MoveTree::new(&g, Rules::default(), rr(2)).unwrap();
        let mut ctx = tree.root(g.parse_key("D,D").unwrap());
        let steps = [
            (ROW, ActionChoice::Move(0)),
            (COL, ActionChoice::Move(0)),
            (ROW, ActionChoice::Stay),
            (COL, ActionChoice::Stay),
        ];
        let mut last = TerminalVerdict::NotTerminal;
        for (p, c) in steps {
            let (next, v) = tree.apply_action(&ctx, p, c).unwrap();
            ctx = next;
            last = v;
        }
        assert_eq!(last, TerminalVerdict::MutualStay(g.parse_key("C,C").unwrap()));
    }

    #[test]
    fn illustrative_path_from_cc_ends_in_dd() {
        let g = pd();
        let tree = MoveTree::new(&g, Rules { nhp: false, ..Rules::default() }, rr(2)).unwrap();
        let mut ctx = tree.root(g.parse_key("C,C").unwrap());
        let mut last = TerminalVerdict::NotTerminal;
        for (p, c) in [
            (ROW, ActionChoice::Move(1)),
            (COL, ActionChoice::Move(1)),
            (ROW, ActionChoice::Stay),
            (COL, ActionChoice::Stay),
        ] {
            let (next, v) = tree.apply_action(&ctx, p, c).unwrap();
            ctx = next;
            last = v;
        }
        let dd = g.parse_key("D,D").unwrap();
        assert_eq!(last, TerminalVerdict::MutualStay(dd));
        assert_eq!(g.payoff_string(dd), "(2,2)");
    }

    #[test]
    fn everyone_passing_keeps_the_reference() {
        let g = pd();
        let tree = MoveTree::new(&g, Rules::default(), rr(2)).unwrap();
        let a0 = g.parse_key("D,C").unwrap();
        let root = tree.root(a0);
        let (ctx, v) = tree.apply_action(&root, ROW, ActionChoice::Pass).unwrap();
        assert_eq!(v, TerminalVerdict::NotTerminal);
        assert_eq!(ctx.pass_run(), vec![ROW]);
        let (_, v) = tree.apply_action(&ctx, COL, ActionChoice::Pass).unwrap();
        assert_eq!(v, TerminalVerdict::AllPass(a0));
    }

    #[test]
    fn one_player_staying_twice_does_not_terminate() {
        let g = pd();
        let tree = MoveTree::new(&g, Rules { k: 2, ..Rules::default() }, rr(2)).unwrap();
        let root = tree.root(g.parse_key("C,C").unwrap());
        let (c1, v1) = tree.apply_action(&root, ROW, ActionChoice::Stay).unwrap();
        let (c2, v2) = tree.apply_action(&c1, COL, ActionChoice::Pass).unwrap();
        let (c3, v3) = tree.apply_action(&c2, ROW, ActionChoice::Stay).unwrap();
        assert_eq!(
            (v1, v2, v3),
            (TerminalVerdict::NotTerminal, TerminalVerdict::NotTerminal, TerminalVerdict::NotTerminal)
        );
        assert_eq!(c3.last_stayer(), Some(ROW));
        assert_eq!(tree.usage(&c3, ROW, c3.current(), 0), 2);
    }

    #[test]
    fn reference_persists_across_excursions() {
        // Row endorses CC, the play leaves and returns, and Column's stay ends it.
        let g = pd();
        let tree = MoveTree::new(&g, Rules { nhp: false, ..Rules::default() }, rr(2)).unwrap();
        let cc = g.parse_key("C,C").unwrap();
        let mut ctx = tree.root(g.parse_key("D,C").unwrap());
        for (p, c) in [
            (ROW, ActionChoice::Move(0)),
            (COL, ActionChoice::Pass),
            (ROW, ActionChoice::Stay),
            (COL, ActionChoice::Move(1)),
            (ROW, ActionChoice::Pass),
            (COL, ActionChoice::Move(0)),
        ] {
            let (next, v) = tree.apply_action(&ctx, p, c).unwrap();
            assert_eq!(v, TerminalVerdict::NotTerminal);
            ctx = next;
        }
        assert_eq!(ctx.reference(), cc);
        assert_eq!(ctx.current(), cc);
        let (ctx, v) = tree.apply_action(&ctx, ROW, ActionChoice::Pass).unwrap();
        assert_eq!(v, TerminalVerdict::NotTerminal);
        let (_, v) = tree.apply_action(&ctx, COL, ActionChoice::Stay).unwrap();
        assert_eq!(v, TerminalVerdict::MutualStay(cc));
    }

    #[test]
    fn apply_action_leaves_input_untouched() {
        let g = pd();
        let tree = MoveTree::new(&g, Rules::default(), rr(2)).unwrap();
        let root = tree.root(ProfileId(3));
        let copy = root.clone();
        let _ = tree.apply_action(&root, ROW, ActionChoice::Move(0)).unwrap();
        assert_eq!(root, copy);
    }

    #[test]
    fn round_robin_alternates() {
        let p = rr(2);
        let seq: Vec<usize> = (0..3).map(|d| p.player_at(d).unwrap().0).collect();
        assert_eq!(seq, vec![0, 1, 0]);
    }

    #[test]
    fn turn_balance_examples() {
        let s = |v: &[usize]| v.iter().map(|&i| PlayerId(i)).collect::<Vec<_>>();
        assert!(validate_turn_balance(&s(&[0, 1, 0, 1, 0]), 2));
        assert!(!validate_turn_balance(&s(&[0, 0]), 2));
        assert!(TurnPolicy::table(s(&[0, 0]), 2).is_err());
        assert!(TurnPolicy::table(s(&[1, 0, 0, 1]), 2).is_ok());
    }

    #[test]
    fn nature_blocks_are_permutations() {
        let p = TurnPolicy::nature_sampled(vec![0.5, 0.3, 0.2], 11).unwrap();
        let seq: Vec<PlayerId> = (0..300).map(|d| p.player_at(d).unwrap()).collect();
        assert!(validate_turn_balance(&seq, 3));
        for block in seq.chunks(3) {
            let mut ids: Vec<usize> = block.iter().map(|p| p.0).collect();
            ids.sort();
            assert_eq!(ids, vec![0, 1, 2]);
        }
        let again: Vec<PlayerId> = (0..300).map(|d| p.player_at(d).unwrap()).collect();
        assert_eq!(seq, again);
    }

    #[test]
    fn nature_weights_are_validated() {
        assert!(TurnPolicy::nature_sampled(vec![0.5, 0.5], 0).is_ok());
        assert!(TurnPolicy::nature_sampled(vec![1.0, 0.0], 0).is_err());
        assert!(TurnPolicy::nature_sampled(vec![0.6, 0.6], 0).is_err());
    }

    #[test]
    fn table_exhaustion_is_a_policy_error() {
        let p = TurnPolicy::table(vec![PlayerId(0), PlayerId(1)], 2).unwrap();
        assert!(matches!(p.player_at(2), Err(Error::Policy(_))));
    }

    #[test]
    fn termination_action_respects_nhp() {
        let g = pd();
        let rules = Rules { termination_action: true, ..Rules::default() };
        let tree = MoveTree::new(&g, rules, rr(2)).unwrap();
        let root = tree.root(g.parse_key("D,D").unwrap());
        assert!(tree.legal_actions(&root, ROW).unwrap().contains(&ActionChoice::Terminate));
        let (ctx, _) = tree.apply_action(&root, ROW, ActionChoice::Move(0)).unwrap();
        assert!(!tree.legal_actions(&ctx, COL).unwrap().contains(&ActionChoice::Terminate));
        let (_, v) = tree.apply_action(&root, ROW, ActionChoice::Terminate).unwrap();
        assert_eq!(v, TerminalVerdict::Terminated(g.parse_key("D,D").unwrap()));
    }

    #[test]
    fn trace_records_round_trip_through_jsonl() {
        let g = pd();
        let tree = MoveTree::new(&g, Rules::default(), rr(2)).unwrap();
        let root = tree.root(g.parse_key("D,D").unwrap());
        let mut ctx = root.clone();
        let mut trace = Vec::new();
        for (p, c) in [(ROW, ActionChoice::Move(0)), (COL, ActionChoice::Move(0)), (ROW, ActionChoice::Stay)] {
            let (next, v) = tree.apply_action(&ctx, p, c).unwrap();
            trace.push(tree.record(&ctx, p, c, v));
            ctx = next;
        }
        let parsed = trace_from_jsonl(&trace_to_jsonl(&trace)).unwrap();
        assert_eq!(parsed, trace);
        let replayed = tree.replay(root.current(), &parsed).unwrap();
        assert_eq!(replayed.last().unwrap().0, ctx);
    }
}

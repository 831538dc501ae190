//! Finite normal-form games: payoff tables, profile indexing, Pareto
//! relations and the game file format.
//!
//! Payoffs are held as exact decimals. Every comparison the solver makes
//! (the no-harm test in particular) goes through a per-player dense rank
//! table derived from those decimals, so two payoffs compare equal exactly
//! when their decimal values are equal.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// Index of a player, dense in `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlayerId(pub usize);

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Compact canonical index of an action profile.
///
/// Profiles are numbered in mixed radix with player 0 as the most
/// significant digit, so ascending ids follow the lexicographic order of
/// the action-index tuples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProfileId(pub u32);

impl ProfileId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A pure action profile: one action index per player.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionProfile(pub Vec<usize>);

impl ActionProfile {
    pub fn new(choice: Vec<usize>) -> Self {
        ActionProfile(choice)
    }

    pub fn choice(&self) -> &[usize] {
        &self.0
    }
}

/// A pair of profiles that one player ranks equally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrictViolation {
    pub player: PlayerId,
    pub first: ProfileId,
    pub second: ProfileId,
}

#[derive(Debug, Clone)]
pub struct NormalFormGame {
    players: Vec<String>,
    actions: Vec<Vec<String>>,
    /// `payoffs[profile * n + player]`
    payoffs: Vec<Decimal>,
    /// Dense per-player rank of each profile's payoff, same layout as `payoffs`.
    ranks: Vec<u32>,
    strides: Vec<usize>,
    num_profiles: usize,
}

impl NormalFormGame {
    /// Builds a game from a payoff table indexed by canonical profile id.
    pub fn new(players: Vec<String>, actions: Vec<Vec<String>>, table: Vec<Vec<Decimal>>) -> Result<Self> {
        let n = players.len();
        if n == 0 {
            return Err(Error::InvalidInput("a game needs at least one player".into()));
        }
        if actions.len() != n {
            return Err(Error::InvalidInput(format!("{} players but {} action lists", n, actions.len())));
        }
        let mut seen_players = HashSet::new();
        for name in &players {
            if !seen_players.insert(name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate player name {name:?}")));
            }
        }
        for (i, list) in actions.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::InvalidInput(format!("player {} has no actions", players[i])));
            }
            let mut seen = HashSet::new();
            for label in list {
                if label.contains(',') {
                    return Err(Error::InvalidInput(format!("action label {label:?} may not contain ','")));
                }
                if !seen.insert(label.as_str()) {
                    return Err(Error::InvalidInput(format!(
                        "duplicate action label {label:?} for player {}",
                        players[i]
                    )));
                }
            }
        }

        let mut strides = vec![1usize; n];
        let mut num_profiles: usize = 1;
        for i in (0..n).rev() {
            strides[i] = num_profiles;
            num_profiles = num_profiles
                .checked_mul(actions[i].len())
                .filter(|&c| c <= u32::MAX as usize)
                .ok_or_else(|| Error::Resource("profile space too large".into()))?;
        }
        if table.len() != num_profiles {
            return Err(Error::InvalidInput(format!("payoff table has {} rows, expected {num_profiles}", table.len())));
        }
        let mut payoffs = Vec::with_capacity(num_profiles * n);
        for (pid, row) in table.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!("profile {pid} has {} payoffs, expected {n}", row.len())));
            }
            payoffs.extend(row);
        }

        let mut ranks = vec![0u32; payoffs.len()];
        for i in 0..n {
            let mut distinct: Vec<Decimal> = (0..num_profiles).map(|p| payoffs[p * n + i]).collect();
            distinct.sort();
            distinct.dedup();
            for p in 0..num_profiles {
                let r = distinct.binary_search(&payoffs[p * n + i]).expect("value present");
                ranks[p * n + i] = r as u32;
            }
        }

        Ok(NormalFormGame { players, actions, payoffs, ranks, strides, num_profiles })
    }

    /// Convenience constructor from integer payoffs, listed in canonical
    /// profile order.
    pub fn from_ints(players: &[&str], actions: &[&[&str]], table: &[&[i64]]) -> Result<Self> {
        NormalFormGame::new(
            players.iter().map(|s| s.to_string()).collect(),
            actions.iter().map(|l| l.iter().map(|s| s.to_string()).collect()).collect(),
            table.iter().map(|row| row.iter().map(|&v| Decimal::from(v)).collect()).collect(),
        )
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    pub fn num_profiles(&self) -> usize {
        self.num_profiles
    }

    pub fn player_names(&self) -> &[String] {
        &self.players
    }

    pub fn player_name(&self, p: PlayerId) -> &str {
        &self.players[p.0]
    }

    pub fn player_by_name(&self, name: &str) -> Option<PlayerId> {
        self.players.iter().position(|s| s == name).map(PlayerId)
    }

    pub fn actions(&self, p: PlayerId) -> &[String] {
        &self.actions[p.0]
    }

    pub fn action_count(&self, p: PlayerId) -> usize {
        self.actions[p.0].len()
    }

    pub fn max_actions(&self) -> usize {
        self.actions.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn players(&self) -> impl Iterator<Item = PlayerId> {
        (0..self.players.len()).map(PlayerId)
    }

    pub fn profile_ids(&self) -> impl Iterator<Item = ProfileId> {
        (0..self.num_profiles as u32).map(ProfileId)
    }

    /// Own-action index of player `p` in profile `pid`.
    #[inline]
    pub fn component(&self, pid: ProfileId, p: PlayerId) -> usize {
        (pid.index() / self.strides[p.0]) % self.actions[p.0].len()
    }

    /// The profile obtained from `pid` by setting player `p`'s action to `action`.
    #[inline]
    pub fn with_component(&self, pid: ProfileId, p: PlayerId, action: usize) -> ProfileId {
        let current = self.component(pid, p);
        let stride = self.strides[p.0];
        ProfileId((pid.index() + action * stride - current * stride) as u32)
    }

    pub fn profile(&self, pid: ProfileId) -> ActionProfile {
        ActionProfile(self.players().map(|p| self.component(pid, p)).collect())
    }

    pub fn id_of(&self, profile: &ActionProfile) -> Result<ProfileId> {
        if profile.0.len() != self.num_players() {
            return Err(Error::InvalidInput(format!(
                "profile has {} components, game has {} players",
                profile.0.len(),
                self.num_players()
            )));
        }
        let mut idx = 0usize;
        for (i, &a) in profile.0.iter().enumerate() {
            if a >= self.actions[i].len() {
                return Err(Error::InvalidInput(format!(
                    "action index {a} out of range for player {}",
                    self.players[i]
                )));
            }
            idx += a * self.strides[i];
        }
        Ok(ProfileId(idx as u32))
    }

    /// Profile key: action labels joined by `,` in player order.
    pub fn key(&self, pid: ProfileId) -> String {
        self.players().map(|p| self.actions[p.0][self.component(pid, p)].as_str()).collect::<Vec<_>>().join(",")
    }

    pub fn parse_key(&self, key: &str) -> Result<ProfileId> {
        let parts: Vec<&str> = key.split(',').map(str::trim).collect();
        if parts.len() != self.num_players() {
            return Err(Error::InvalidInput(format!(
                "profile key {key:?} names {} actions, game has {} players",
                parts.len(),
                self.num_players()
            )));
        }
        let mut choice = Vec::with_capacity(parts.len());
        for (i, label) in parts.iter().enumerate() {
            let a = self.actions[i].iter().position(|s| s == label).ok_or_else(|| {
                Error::InvalidInput(format!("unknown action {label:?} for player {}", self.players[i]))
            })?;
            choice.push(a);
        }
        self.id_of(&ActionProfile(choice))
    }

    #[inline]
    pub fn payoff(&self, pid: ProfileId, p: PlayerId) -> Decimal {
        self.payoffs[pid.index() * self.num_players() + p.0]
    }

    pub fn payoff_vector(&self, pid: ProfileId) -> &[Decimal] {
        let n = self.num_players();
        &self.payoffs[pid.index() * n..(pid.index() + 1) * n]
    }

    /// Order-preserving integer image of `payoff(pid, p)`.
    #[inline]
    pub fn rank(&self, pid: ProfileId, p: PlayerId) -> u32 {
        self.ranks[pid.index() * self.num_players() + p.0]
    }

    /// Payoff vector rendered as `(3,3)`.
    pub fn payoff_string(&self, pid: ProfileId) -> String {
        let parts: Vec<String> = self.payoff_vector(pid).iter().map(|d| d.to_string()).collect();
        format!("({})", parts.join(","))
    }

    fn check(&self, pid: ProfileId) -> Result<()> {
        if pid.index() >= self.num_profiles {
            return Err(Error::InvalidInput(format!("profile id {} out of range", pid.0)));
        }
        Ok(())
    }

    /// `a` weakly improves on `b` for every player and strictly for one.
    pub fn dominates(&self, a: ProfileId, b: ProfileId) -> bool {
        let mut strict = false;
        for p in self.players() {
            let (ra, rb) = (self.rank(a, p), self.rank(b, p));
            if ra < rb {
                return false;
            }
            strict |= ra > rb;
        }
        strict
    }

    /// Every player strictly prefers `a` to `b`.
    pub fn strictly_above(&self, a: ProfileId, b: ProfileId) -> bool {
        self.players().all(|p| self.rank(a, p) > self.rank(b, p))
    }

    pub fn pareto_dominates(&self, a: &ActionProfile, b: &ActionProfile) -> Result<bool> {
        Ok(self.dominates(self.id_of(a)?, self.id_of(b)?))
    }

    pub fn strictly_dominates(&self, a: &ActionProfile, b: &ActionProfile) -> Result<bool> {
        Ok(self.strictly_above(self.id_of(a)?, self.id_of(b)?))
    }

    pub fn is_pareto_optimal(&self, pid: ProfileId) -> Result<bool> {
        self.check(pid)?;
        Ok(self.pareto_optimal_set().binary_search(&pid).is_ok())
    }

    /// Profiles not Pareto dominated by any other profile, ascending by id.
    ///
    /// Scans profiles in descending lexicographic payoff order. A dominator
    /// always precedes what it dominates in that order, and dominance is
    /// transitive, so each candidate only needs testing against the frontier
    /// found so far.
    pub fn pareto_optimal_set(&self) -> Vec<ProfileId> {
        let mut order: Vec<ProfileId> = self.profile_ids().collect();
        order.sort_by(|&a, &b| {
            let ka: Vec<u32> = self.players().map(|p| self.rank(a, p)).collect();
            let kb: Vec<u32> = self.players().map(|p| self.rank(b, p)).collect();
            kb.cmp(&ka).then(a.cmp(&b))
        });
        let mut frontier: Vec<ProfileId> = Vec::new();
        for pid in order {
            if !frontier.iter().any(|&f| self.dominates(f, pid)) {
                frontier.push(pid);
            }
        }
        frontier.sort();
        frontier
    }

    /// Profiles that no other profile improves for every player strictly.
    pub fn weakly_pareto_optimal_set(&self) -> Vec<ProfileId> {
        let n = self.num_players();
        // Strict dominance of b needs a profile beating b's rank for player 0
        // and every other player at once; group candidates by player 0.
        let mut by_first: Vec<ProfileId> = self.profile_ids().collect();
        by_first.sort_by_key(|&pid| std::cmp::Reverse(self.rank(pid, PlayerId(0))));
        self.profile_ids()
            .filter(|&b| {
                let r0 = self.rank(b, PlayerId(0));
                !by_first
                    .iter()
                    .take_while(|&&a| self.rank(a, PlayerId(0)) > r0)
                    .any(|&a| (1..n).all(|i| self.rank(a, PlayerId(i)) > self.rank(b, PlayerId(i))))
            })
            .collect()
    }

    /// Every pair of profiles some player ranks equally.
    pub fn validate_strict(&self) -> Vec<StrictViolation> {
        let mut out = Vec::new();
        for p in self.players() {
            let mut ids: Vec<ProfileId> = self.profile_ids().collect();
            ids.sort_by_key(|&pid| (self.rank(pid, p), pid));
            for (i, &a) in ids.iter().enumerate() {
                for &b in ids[i + 1..].iter().take_while(|&&b| self.rank(b, p) == self.rank(a, p)) {
                    out.push(StrictViolation { player: p, first: a, second: b });
                }
            }
        }
        out
    }

    pub fn is_strict(&self) -> bool {
        self.validate_strict().is_empty()
    }

    /// Pure-strategy Nash equilibria of the normal form, by exhaustive check.
    pub fn pure_nash_equilibria(&self) -> Vec<ProfileId> {
        self.profile_ids()
            .filter(|&pid| {
                self.players().all(|p| {
                    (0..self.action_count(p)).all(|a| self.rank(self.with_component(pid, p, a), p) <= self.rank(pid, p))
                })
            })
            .collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        file.into_game()
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Format(format!("cannot read {}: {e}", path.as_ref().display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let mut payoffs = serde_json::Map::new();
        for pid in self.profile_ids() {
            payoffs.insert(self.key(pid), payoff_json(self.payoff_vector(pid)));
        }
        serde_json::json!({
            "players": self.players,
            "actions": self.actions,
            "payoffs": payoffs,
        })
    }
}

/// Payoff vector as a JSON array whose numbers keep their decimal text.
pub fn payoff_json(values: &[Decimal]) -> serde_json::Value {
    serde_json::Value::Array(values.iter().map(|d| decimal_json(*d)).collect())
}

pub fn decimal_json(d: Decimal) -> serde_json::Value {
    let number = serde_json::Number::from_str(&d.to_string()).expect("decimal renders as a JSON number");
    serde_json::Value::Number(number)
}

fn parse_decimal(n: &serde_json::Number) -> Result<Decimal> {
    let text = n.as_str();
    let parsed = if text.contains(['e', 'E']) { Decimal::from_scientific(text) } else { Decimal::from_str_exact(text) };
    parsed.map_err(|e| Error::Format(format!("payoff {text} is not representable exactly: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    players: Vec<String>,
    actions: Vec<Vec<String>>,
    payoffs: PayoffEntries,
}

/// Payoff map entries in file order, with duplicate keys rejected.
struct PayoffEntries(Vec<(String, Vec<serde_json::Number>)>);

impl<'de> Deserialize<'de> for PayoffEntries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct EntriesVisitor;
        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = PayoffEntries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping profile keys to payoff arrays")
            }
            fn visit_map<M: MapAccess<'de>>(self, mut map: M) -> std::result::Result<Self::Value, M::Error> {
                let mut out = Vec::new();
                let mut seen = HashSet::new();
                while let Some((k, v)) = map.next_entry::<String, Vec<serde_json::Number>>()? {
                    if !seen.insert(k.clone()) {
                        return Err(serde::de::Error::custom(format!("duplicate profile key {k:?}")));
                    }
                    out.push((k, v));
                }
                Ok(PayoffEntries(out))
            }
        }
        deserializer.deserialize_map(EntriesVisitor)
    }
}

impl GameFile {
    fn into_game(self) -> Result<NormalFormGame> {
        let n = self.players.len();
        if self.actions.len() != n {
            return Err(Error::Format(format!("\"actions\" has {} entries for {n} players", self.actions.len())));
        }
        // Build an empty-payoff shell to reuse key parsing and validation.
        let sizes: Vec<usize> = self.actions.iter().map(Vec::len).collect();
        let total: usize = sizes.iter().product();
        let shell =
            NormalFormGame::new(self.players.clone(), self.actions.clone(), vec![vec![Decimal::ZERO; n]; total])
                .map_err(|e| Error::Format(e.to_string()))?;

        let mut table: Vec<Option<Vec<Decimal>>> = vec![None; total];
        for (key, values) in self.payoffs.0 {
            let pid = shell.parse_key(&key).map_err(|e| Error::Format(format!("payoff key {key:?}: {e}")))?;
            if values.len() != n {
                return Err(Error::Format(format!("payoff {key:?} has {} entries, expected {n}", values.len())));
            }
            if table[pid.index()].is_some() {
                return Err(Error::Format(format!("profile {key:?} listed twice")));
            }
            table[pid.index()] = Some(values.iter().map(parse_decimal).collect::<Result<_>>()?);
        }
        let mut rows = Vec::with_capacity(total);
        for (i, row) in table.into_iter().enumerate() {
            match row {
                Some(r) => rows.push(r),
                None => {
                    return Err(Error::Format(format!(
                        "missing payoff for profile {:?}",
                        shell.key(ProfileId(i as u32))
                    )))
                }
            }
        }
        NormalFormGame::new(self.players, self.actions, rows).map_err(|e| Error::Format(e.to_string()))
    }
}

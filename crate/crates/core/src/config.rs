//! Solve configuration as JSON, shared by the CLI, the sweeps and the C API.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{NormalFormGame, PlayerId};
use crate::solver::SolveConfig;
use crate::tree::TurnPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NatureSpec {
    pub q: Vec<f64>,
    pub seed: u64,
}

/// Every field is optional; missing ones take the [`SolveConfig`] defaults
/// and the turn order defaults to round-robin in player order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Round-robin order by player name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<String>>,
    /// Explicit per-depth turn table by player name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nature: Option<NatureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nhp: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminate_action: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stay_threshold: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak: Option<bool>,
    /// Name of the single player acting everywhere (breaks turn balance).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unchecked_order: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth_guard: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_contexts: Option<usize>,
}

impl ConfigFile {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json_str(&text)
    }

    /// Fields set in `over` replace those in `self`. Setting any turn
    /// order in `over` drops every turn order from `self`.
    pub fn overridden_by(mut self, over: ConfigFile) -> ConfigFile {
        if over.order.is_some() || over.table.is_some() || over.nature.is_some() || over.unchecked_order.is_some() {
            self.order = None;
            self.table = None;
            self.nature = None;
            self.unchecked_order = None;
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            reference,
            k,
            order,
            table,
            nature,
            nhp,
            terminate_action,
            stay_threshold,
            weak,
            unchecked_order,
            max_depth_guard,
            max_contexts
        );
        self
    }

    pub fn policy(&self, game: &NormalFormGame) -> Result<TurnPolicy> {
        let n = game.num_players();
        let given = [self.order.is_some(), self.table.is_some(), self.nature.is_some(), self.unchecked_order.is_some()];
        if given.iter().filter(|&&g| g).count() > 1 {
            return Err(Error::InvalidInput("give at most one of order, table, nature, unchecked_order".into()));
        }
        let player = |name: &str| {
            game.player_by_name(name).ok_or_else(|| Error::InvalidInput(format!("unknown player {name:?}")))
        };
        if let Some(order) = &self.order {
            let ids = order.iter().map(|s| player(s)).collect::<Result<Vec<_>>>()?;
            TurnPolicy::round_robin(ids, n)
        } else if let Some(seq) = &self.table {
            let ids = seq.iter().map(|s| player(s)).collect::<Result<Vec<_>>>()?;
            TurnPolicy::table(ids, n)
        } else if let Some(nature) = &self.nature {
            TurnPolicy::nature_sampled(nature.q.clone(), nature.seed)
        } else if let Some(name) = &self.unchecked_order {
            Ok(TurnPolicy::unchecked_degenerate(player(name)?))
        } else {
            TurnPolicy::round_robin((0..n).map(PlayerId).collect(), n)
        }
    }

    /// Builds the solver configuration; `ref` is required.
    pub fn resolve(&self, game: &NormalFormGame) -> Result<SolveConfig> {
        let key = self.reference.as_deref().ok_or_else(|| Error::InvalidInput("no reference point given".into()))?;
        let initial = game.parse_key(key)?;
        let mut cfg = SolveConfig::new(initial, self.policy(game)?);
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(nhp) = self.nhp {
            cfg.nhp_enabled = nhp;
        }
        if let Some(t) = self.terminate_action {
            cfg.termination_action = t;
        }
        if let Some(m) = self.stay_threshold {
            cfg.stay_threshold = m;
        }
        if let Some(w) = self.weak {
            cfg.weak_mode = w;
        }
        cfg.max_depth_guard = self.max_depth_guard;
        cfg.max_contexts = self.max_contexts;
        Ok(cfg)
    }

    /// Full description of `cfg`, enough to rebuild it with [`resolve`](Self::resolve).
    pub fn describe(cfg: &SolveConfig, game: &NormalFormGame) -> ConfigFile {
        let names = |ids: &[PlayerId]| ids.iter().map(|p| game.player_name(*p).to_string()).collect::<Vec<_>>();
        let policy = &cfg.policy;
        ConfigFile {
            reference: Some(game.key(cfg.initial)),
            k: Some(cfg.k),
            order: policy.round_robin_order().map(names),
            table: policy.table_sequence().map(names),
            nature: policy.nature_params().map(|(q, seed)| NatureSpec { q: q.to_vec(), seed }),
            nhp: Some(cfg.nhp_enabled),
            terminate_action: Some(cfg.termination_action),
            stay_threshold: Some(cfg.stay_threshold),
            weak: Some(cfg.weak_mode),
            unchecked_order: policy.unchecked_player().map(|p| game.player_name(p).to_string()),
            max_depth_guard: cfg.max_depth_guard,
            max_contexts: cfg.max_contexts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn minimal_config_uses_defaults() {
        let g = fixtures::load("pd").unwrap();
        let cfg = ConfigFile::from_json_str(r#"{"ref": "D,D"}"#).unwrap().resolve(&g).unwrap();
        assert_eq!(cfg.k, 1);
        assert!(cfg.nhp_enabled && !cfg.termination_action && !cfg.weak_mode);
        assert_eq!(cfg.stay_threshold, 2);
        assert_eq!(cfg.policy.round_robin_order(), Some(&[PlayerId(0), PlayerId(1)][..]));
    }

    #[test]
    fn unknown_fields_and_double_orders_are_rejected() {
        let g = fixtures::load("pd").unwrap();
        assert!(ConfigFile::from_json_str(r#"{"ref": "D,D", "depth": 3}"#).is_err());
        let both = r#"{"ref": "D,D", "order": ["Row", "Column"], "unchecked_order": "Row"}"#;
        assert!(ConfigFile::from_json_str(both).unwrap().resolve(&g).is_err());
        let bad_name = r#"{"ref": "D,D", "order": ["Row", "Col"]}"#;
        assert!(ConfigFile::from_json_str(bad_name).unwrap().resolve(&g).is_err());
    }

    #[test]
    fn describe_round_trips() {
        let g = fixtures::load("pd").unwrap();
        let text = r#"{"ref": "C,D", "k": 2, "nature": {"q": [0.5, 0.5], "seed": 9}, "nhp": false}"#;
        let cfg = ConfigFile::from_json_str(text).unwrap().resolve(&g).unwrap();
        let back = ConfigFile::describe(&cfg, &g).resolve(&g).unwrap();
        assert_eq!(ConfigFile::describe(&back, &g), ConfigFile::describe(&cfg, &g));
        assert_eq!(back.policy, cfg.policy);
    }

    #[test]
    fn later_orders_replace_earlier_ones() {
        let base = ConfigFile { order: Some(vec!["Row".into(), "Column".into()]), k: Some(2), ..Default::default() };
        let over = ConfigFile { unchecked_order: Some("Row".into()), ..Default::default() };
        let merged = base.overridden_by(over);
        assert_eq!(merged.order, None);
        assert_eq!(merged.k, Some(2));
        assert_eq!(merged.unchecked_order.as_deref(), Some("Row"));
    }
}

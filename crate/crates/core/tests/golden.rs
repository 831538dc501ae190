//! Pinned outcomes for the bundled example games.

use noharm::fixtures;
use noharm::solver::{
    enumerate_outcomes, one_deviation_check, path_between, play_out, solve_uncached, solve_with_strategy, AlwaysPass,
    AlwaysStay, Scripted,
};
use noharm::tree::validate_turn_balance;
use noharm::{ActionChoice, NormalFormGame, PlayerId, ProfileId, SolveConfig, TurnPolicy};

fn id(g: &NormalFormGame, key: &str) -> ProfileId {
    g.parse_key(key).unwrap()
}

fn order(g: &NormalFormGame, names: &[&str]) -> TurnPolicy {
    let ids = names.iter().map(|n| g.player_by_name(n).unwrap()).collect();
    TurnPolicy::round_robin(ids, g.num_players()).unwrap()
}

fn outcome(g: &NormalFormGame, cfg: &SolveConfig) -> String {
    g.key(noharm::solve(g, cfg).unwrap().outcome)
}

#[test]
fn prisoners_dilemma_outcomes() {
    let g = fixtures::load("pd").unwrap();
    for k in [1, 2] {
        for policy in TurnPolicy::rotations(2) {
            for (start, end) in [("D,D", "C,C"), ("C,D", "C,D"), ("D,C", "D,C"), ("C,C", "C,C")] {
                let cfg = SolveConfig::new(id(&g, start), policy.clone()).with_k(k);
                assert_eq!(outcome(&g, &cfg), end, "from {start}, k={k}");
            }
        }
    }
}

#[test]
fn prisoners_dilemma_without_the_rule_from_asymmetric_starts() {
    let g = fixtures::load("pd").unwrap();
    let cfg = SolveConfig::new(id(&g, "C,D"), order(&g, &["Row", "Column"])).with_nhp(false);
    assert_eq!(outcome(&g, &cfg), "D,D");
    let cfg = SolveConfig::new(id(&g, "D,C"), order(&g, &["Column", "Row"])).with_nhp(false);
    assert_eq!(outcome(&g, &cfg), "D,D");
}

#[test]
fn rule_off_game_ends_below_the_frontier() {
    let g = fixtures::load("nhp_off").unwrap();
    let off = SolveConfig::new(id(&g, "L,R"), order(&g, &["Row", "Column"])).with_nhp(false);
    let report = noharm::solve(&g, &off).unwrap();
    assert_eq!(g.payoff_string(report.outcome), "(3,2)");
    let on = SolveConfig::new(id(&g, "L,R"), order(&g, &["Row", "Column"]));
    let o = noharm::solve(&g, &on).unwrap().outcome;
    assert!(g.pareto_optimal_set().contains(&o));
}

#[test]
fn rationality_game_reaches_the_only_efficient_profile() {
    let g = fixtures::load("rationality").unwrap();
    assert_eq!(g.pareto_optimal_set(), vec![id(&g, "R,R")]);
    for start in ["L,L", "L,R", "R,L", "R,R"] {
        for policy in TurnPolicy::rotations(2) {
            let cfg = SolveConfig::new(id(&g, start), policy);
            assert_eq!(g.payoff_string(noharm::solve(&g, &cfg).unwrap().outcome), "(4,4)");
        }
    }
}

#[test]
fn stag_hunt_always_ends_at_stag_stag() {
    let g = fixtures::load("stag_hunt").unwrap();
    for k in [1, 2] {
        for start in g.profile_ids() {
            for policy in TurnPolicy::rotations(2) {
                let cfg = SolveConfig::new(start, policy).with_k(k);
                assert_eq!(outcome(&g, &cfg), "Stag,Stag");
            }
        }
    }
}

#[test]
fn hawk_dove_outcomes_depend_on_who_moves_first() {
    let g = fixtures::load("hawk_dove").unwrap();
    let cases = [
        ("Hawk,Hawk", ["Row", "Column"], "Hawk,Dove"),
        ("Hawk,Hawk", ["Column", "Row"], "Dove,Hawk"),
        ("Dove,Dove", ["Row", "Column"], "Dove,Dove"),
    ];
    for (start, names, end) in cases {
        let cfg = SolveConfig::new(id(&g, start), order(&g, &names));
        assert_eq!(outcome(&g, &cfg), end);
    }
}

#[test]
fn game22_frontier_and_comparison_with_rule_off() {
    let g = fixtures::load("game22").unwrap();
    let po: Vec<String> = g.pareto_optimal_set().into_iter().map(|p| g.key(p)).collect();
    assert_eq!(po, ["A,C", "A,D", "B,D"]);
    for start in g.profile_ids() {
        for policy in TurnPolicy::rotations(2) {
            let cfg = SolveConfig::new(start, policy).with_nhp(false);
            assert_eq!(outcome(&g, &cfg), "A,C");
        }
    }
    for key in &po {
        let cfg = SolveConfig::new(id(&g, key), order(&g, &["Row", "Column"]));
        assert_eq!(&outcome(&g, &cfg), key);
    }
}

#[test]
fn three_person_game_under_two_orders() {
    let g = fixtures::load("three_person").unwrap();
    let a0 = id(&g, "A,D,E");
    let first = SolveConfig::new(a0, order(&g, &["Row", "Column", "Matrix"]));
    assert_eq!(g.payoff_string(noharm::solve(&g, &first).unwrap().outcome), "(8,8,4)");
    let second = SolveConfig::new(a0, order(&g, &["Matrix", "Column", "Row"]));
    assert_eq!(g.payoff_string(noharm::solve(&g, &second).unwrap().outcome), "(7,5,8)");
}

#[test]
fn pruned_and_plain_search_agree_on_the_small_fixtures() {
    for name in ["pd", "stag_hunt", "hawk_dove", "game22", "nhp_off", "rationality"] {
        let g = fixtures::load(name).unwrap();
        for start in g.profile_ids() {
            for policy in TurnPolicy::rotations(2) {
                for nhp in [true, false] {
                    let cfg = SolveConfig::new(start, policy.clone()).with_nhp(nhp);
                    let fast = noharm::solve(&g, &cfg).unwrap().outcome;
                    assert_eq!(fast, solve_uncached(&g, &cfg).unwrap(), "{name} from {}", g.key(start));
                    assert_eq!(enumerate_outcomes(&g, &cfg).unwrap(), vec![fast]);
                }
            }
        }
    }
}

#[test]
fn solver_strategy_survives_the_deviation_audit() {
    for name in ["pd", "stag_hunt", "hawk_dove", "game22", "nhp_off", "rationality"] {
        let g = fixtures::load(name).unwrap();
        for start in g.profile_ids() {
            let cfg = SolveConfig::new(start, TurnPolicy::rotations(2).remove(0));
            let (report, strategy) = solve_with_strategy(&g, &cfg).unwrap();
            let audit = one_deviation_check(&g, &cfg, &strategy).unwrap();
            assert!(audit.violations.is_empty(), "{name}: {:?}", audit.violations.first());
            assert_eq!(audit.outcome, Some(report.outcome));
        }
    }
}

#[test]
fn staying_without_looking_ahead_is_not_an_equilibrium() {
    let g = fixtures::load("rationality").unwrap();
    let cfg = SolveConfig::new(id(&g, "L,L"), order(&g, &["Column", "Row"]));
    let tree = cfg.tree(&g).unwrap();
    let script = [
        ActionChoice::Move(1),
        ActionChoice::Stay,
        ActionChoice::Move(0),
        ActionChoice::Move(1),
        ActionChoice::Stay,
        ActionChoice::Stay,
    ];
    let strategy = Scripted::new(&tree, cfg.initial, &script, AlwaysStay).unwrap();
    let (trace, end) = play_out(&g, &cfg, &strategy).unwrap();
    assert_eq!(trace.len(), script.len());
    assert_eq!(g.payoff_string(end), "(1,0)");
    let audit = one_deviation_check(&g, &cfg, &strategy).unwrap();
    assert!(!audit.violations.is_empty());
    assert_eq!(audit.outcome, Some(end));

    let lazy = one_deviation_check(&g, &cfg, &AlwaysPass).unwrap();
    assert!(!lazy.violations.is_empty());
}

#[test]
fn single_mover_order_breaks_efficiency() {
    let g = fixtures::load("pd").unwrap();
    let cfg = SolveConfig::new(id(&g, "D,D"), TurnPolicy::unchecked_degenerate(PlayerId(0)));
    assert_eq!(outcome(&g, &cfg), "D,D");
    assert!(!validate_turn_balance(&[PlayerId(0), PlayerId(0)], 2));
    assert!(validate_turn_balance(&[PlayerId(0), PlayerId(1)], 2));
}

#[test]
fn direct_path_between_profiles() {
    let g = fixtures::load("three_person").unwrap();
    let policy = TurnPolicy::rotations(3).remove(0);
    let trace = path_between(&g, id(&g, "A,C,E"), id(&g, "B,D,F"), &policy).unwrap();
    assert!(trace.iter().all(|r| r.choice != "stay"));
    assert_eq!(trace.iter().filter(|r| r.choice.starts_with("move")).count(), 3);
    assert!(trace.len() <= 3);
}

#[test]
fn weak_games_keep_an_efficient_outcome() {
    for (name, g) in fixtures::weak_games().into_iter().filter(|(_, g)| g.num_players() == 2) {
        let po = g.pareto_optimal_set();
        for start in g.profile_ids() {
            let cfg = SolveConfig::new(start, TurnPolicy::rotations(g.num_players()).remove(0)).with_weak(true);
            let set = enumerate_outcomes(&g, &cfg).unwrap();
            assert!(set.iter().any(|o| po.contains(o)), "{name} from {}", g.key(start));
            assert!(set.iter().all(|&o| g.profile_ids().all(|a| !g.strictly_above(a, o))));
            if po.contains(&start) {
                assert!(set.contains(&start));
            }
        }
    }
}

#[test]
fn all_equal_game_can_end_anywhere_it_starts() {
    let g = fixtures::load("all_equal").unwrap();
    for start in g.profile_ids() {
        let cfg = SolveConfig::new(start, TurnPolicy::rotations(2).remove(0)).with_weak(true);
        assert!(enumerate_outcomes(&g, &cfg).unwrap().contains(&start));
    }
}

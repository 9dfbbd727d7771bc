//! Invariants of exact inference and of augmented networks.

mod common;

use cde_core::bayes::{conditional, holds_in_distribution, joint, marginal};
use cde_core::ci::{query_ci_moral, represented_ci_set};
use cde_core::format;
use cde_core::generate::{random_bayes_net, rng};
use cde_core::regimes::{eci_deviation, interventional_joint, pearl_augment};
use cde_core::{AugmentedBayesNet, BayesNet, EciQuery, JointTable, RegimeAssignment, RegimeState};
use proptest::prelude::*;
use rand::Rng;

/// Marginal of `vars` from a row-major joint over `all_cards`.
fn brute_marginal(full: &[f64], all_cards: &[usize], keep: &[usize]) -> Vec<f64> {
    let out_cards: Vec<usize> = keep.iter().map(|&k| all_cards[k]).collect();
    let mut out = vec![0.0; out_cards.iter().product()];
    let mut states = vec![0; all_cards.len()];
    for (cell, &p) in full.iter().enumerate() {
        let mut c = cell;
        for i in (0..all_cards.len()).rev() {
            states[i] = c % all_cards[i];
            c /= all_cards[i];
        }
        let idx = keep.iter().fold(0, |acc, &k| acc * all_cards[k] + states[k]);
        out[idx] += p;
    }
    out
}

/// Truncated factorisation computed directly from the observational CPTs.
fn brute_intervention(bn: &BayesNet, set: &[Option<usize>]) -> Vec<f64> {
    let base = common::brute_joint(bn);
    let g = bn.dag();
    let cards: Vec<usize> = g.nodes().iter().map(|n| n.cardinality).collect();
    let mut states = vec![0; cards.len()];
    (0..base.len())
        .map(|cell| {
            let mut c = cell;
            for i in (0..cards.len()).rev() {
                states[i] = c % cards[i];
                c /= cards[i];
            }
            let mut p = 1.0;
            for (v, node) in g.nodes().iter().enumerate() {
                match set[v] {
                    Some(s) => p *= if states[v] == s { 1.0 } else { 0.0 },
                    None => {
                        let cpt = bn.cpt(&node.id).unwrap();
                        let row = cpt.parent_order.iter().fold(0, |acc, par| {
                            let pi = g.index_of(par).unwrap();
                            acc * cards[pi] + states[pi]
                        });
                        p *= cpt.table[row][states[v]];
                    }
                }
            }
            p
        })
        .collect()
}

fn random_targets<R: Rng>(r: &mut R, bn: &BayesNet) -> Vec<String> {
    let t: Vec<String> = bn.dag().nodes().iter().filter(|_| r.gen_bool(0.6)).map(|n| n.id.clone()).collect();
    if t.is_empty() {
        vec![bn.dag().id(0).to_owned()]
    } else {
        t
    }
}

fn regime_states(abn: &AugmentedBayesNet, r: &RegimeAssignment) -> Vec<Option<usize>> {
    let obs = abn.observational().dag();
    obs.nodes()
        .iter()
        .map(|n| {
            abn.dag()
                .nodes()
                .iter()
                .find(|m| m.regime_target() == Some(n.id.as_str()))
                .and_then(|m| match r.get(&m.id) {
                    Some(RegimeState::Set(s)) => Some(s),
                    _ => None,
                })
        })
        .collect()
}

proptest! {
    #![proptest_config(common::config(64))]

    #[test]
    fn soundness(seed in any::<u64>(), n in 2usize..7) {
        let bn = random_bayes_net(&mut rng(seed), n, 3, 0.4);
        for q in represented_ci_set(bn.dag(), n).unwrap() {
            prop_assert!(holds_in_distribution(&bn, &q, 1e-9).unwrap(), "{}", q);
        }
    }

    #[test]
    fn elimination_matches_brute_force(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let bn = random_bayes_net(&mut r, n, 2, 0.5);
        let full = common::brute_joint(&bn);
        let cards: Vec<usize> = bn.dag().nodes().iter().map(|n| n.cardinality).collect();
        let keep: Vec<usize> = (0..n).filter(|_| r.gen_bool(0.5)).collect();
        let ids: Vec<&str> = keep.iter().map(|&k| bn.dag().id(k)).collect();
        let ve = marginal(&bn, ids.iter().copied()).unwrap();
        let oracle = brute_marginal(&full, &cards, &keep);
        prop_assert_eq!(ve.probabilities.len(), oracle.len());
        for (a, b) in ve.probabilities.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let j = joint(&bn).unwrap();
        for (a, b) in j.probabilities.iter().zip(&full) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalisation(seed in any::<u64>(), n in 2usize..6) {
        let mut r = rng(seed);
        let bn = random_bayes_net(&mut r, n, 3, 0.5);
        let j = joint(&bn).unwrap();
        prop_assert!((j.total() - 1.0).abs() < 1e-9);
        let v = bn.dag().id(r.gen_range(0..n)).to_owned();
        let m = j.marginalise([v.as_str()]).unwrap();
        prop_assert!((m.total() - 1.0).abs() < 1e-9);
        let c = j.condition(&[(v.as_str(), 0)]).unwrap();
        prop_assert!((c.total() - 1.0).abs() < 1e-9);
        let other = bn.dag().id((bn.dag().index_of(&v).unwrap() + 1) % n);
        let cond = conditional(&bn, [other], &[(v.as_str(), 1)]).unwrap();
        prop_assert!((cond.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn factorisation_round_trip(seed in any::<u64>(), n in 1usize..6) {
        let bn = random_bayes_net(&mut rng(seed), n, 3, 0.5);
        let j = joint(&bn).unwrap();
        for cpt in bn.cpts() {
            let cards: Vec<usize> = cpt.parent_order.iter().map(|p| bn.dag().node_by_id(p).unwrap().cardinality).collect();
            let mut states = vec![0; cards.len()];
            for (row, expected) in cpt.table.iter().enumerate() {
                let mut c = row;
                for i in (0..cards.len()).rev() {
                    states[i] = c % cards[i];
                    c /= cards[i];
                }
                let given: Vec<(&str, usize)> = cpt.parent_order.iter().map(String::as_str).zip(states.iter().copied()).collect();
                let got = j.condition(&given).unwrap().marginalise([cpt.node.as_str()]).unwrap();
                for (a, b) in got.probabilities.iter().zip(expected) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn augmentation_soundness(seed in any::<u64>(), n in 1usize..5) {
        let mut r = rng(seed);
        let bn = random_bayes_net(&mut r, n, 3, 0.5);
        let targets = random_targets(&mut r, &bn);
        let abn = AugmentedBayesNet::new(bn.clone(), &targets).unwrap();
        let plain = abn.as_plain_bayes_net().unwrap();
        let plain_joint = joint(&plain).unwrap();
        let domain: Vec<String> = bn.dag().nodes().iter().map(|n| n.id.clone()).collect();
        for ra in RegimeAssignment::all(abn.dag()) {
            let tf = interventional_joint(&abn, &ra).unwrap();
            let oracle = brute_intervention(&bn, &regime_states(&abn, &ra));
            for (a, b) in tf.probabilities.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let given: Vec<(String, usize)> = ra.iter().map(|(id, s)| {
                let k = abn.dag().node_by_id(id).unwrap().cardinality - 1;
                (id.to_owned(), s.index(k))
            }).collect();
            let given: Vec<(&str, usize)> = given.iter().map(|(a, b)| (a.as_str(), *b)).collect();
            let sliced = plain_joint.condition(&given).unwrap().marginalise(domain.iter().map(String::as_str)).unwrap();
            prop_assert!(sliced.max_abs_diff(&tf).unwrap() < 1e-12);
        }
    }

    #[test]
    fn represented_ecis_hold_in_every_regime(seed in any::<u64>(), n in 2usize..4) {
        let mut r = rng(seed);
        let bn = random_bayes_net(&mut r, n, 2, 0.6);
        let targets = random_targets(&mut r, &bn);
        let abn = AugmentedBayesNet::new(bn, &targets).unwrap();
        let g = abn.dag();
        let regime = |s: &std::collections::BTreeSet<String>| s.iter().any(|id| g.node_by_id(id).unwrap().is_regime());
        for q in represented_ci_set(g, g.len()).unwrap() {
            let q = match (regime(&q.x), regime(&q.y)) {
                (false, _) => q,
                (true, false) => q.swapped(),
                (true, true) => continue,
            };
            let e = EciQuery::from_ci(q);
            prop_assert!(eci_deviation(&abn, &e).unwrap() <= 1e-9, "{}", e);
        }
    }

    #[test]
    fn pearl_rigidity_random(seed in any::<u64>(), n in 1usize..6) {
        let g = cde_core::generate::random_dag(&mut rng(seed), n, 0.5);
        let aug = pearl_augment(&g).unwrap();
        prop_assert_eq!(cde_core::ci::enumerate_equivalence_class(&aug).unwrap(), vec![aug]);
    }

    #[test]
    fn model_text_round_trip(seed in any::<u64>(), n in 1usize..6) {
        let mut r = rng(seed);
        let bn = random_bayes_net(&mut r, n, 3, 0.5);
        let targets = random_targets(&mut r, &bn);
        let abn = AugmentedBayesNet::new(bn.clone(), &targets).unwrap();
        for dag in [bn.dag().clone(), abn.dag().clone()] {
            let m = format::Model { dag, bayes: None, augmented: None, scm: None };
            let text = format::write_model(&m);
            prop_assert_eq!(format::parse_model(&text).unwrap().dag, m.dag);
        }
        let m = format::Model { dag: bn.dag().clone(), bayes: Some(bn), augmented: None, scm: None };
        let text = format::write_model(&m);
        let back = format::parse_model(&text).unwrap();
        prop_assert_eq!(back.bayes, m.bayes);
    }
}

#[test]
fn verdicts_are_graph_level_not_numeric() {
    // A dependence the graph allows need not show up numerically, but every
    // represented independence must.
    let bn = random_bayes_net(&mut rng(11), 4, 2, 0.0);
    let j: JointTable = joint(&bn).unwrap();
    let q = common::q(&["V0"], &["V1"], &[]);
    assert!(query_ci_moral(bn.dag(), &q).unwrap().represented);
    assert!(j.ci_deviation(&q).unwrap() < 1e-12);
}

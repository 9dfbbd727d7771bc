//! Golden tests over the shipped corpus.

mod common;

use std::collections::BTreeSet;

use cde_core::bayes::{conditional, joint};
use cde_core::ci::{enumerate_equivalence_class, markov_equivalent, query_ci_dsep, query_ci_moral, represented_ci_set_over};
use cde_core::format::{self, Richness};
use cde_core::graph::{ancestral_subgraph, immoralities, moralise, Immorality};
use cde_core::regimes::{self, check_ignorability, interventional_joint, no_causal_effect, query_eci};
use cde_core::scm::{potential_response_joint, probability_of_causation};
use cde_core::{EciQuery, RegimeAssignment, RegimeState};
use common::{dag, model, q, read_corpus};

const CORPUS: &[&str] = &[
    "evidence.dag",
    "instrumental.dag",
    "instrumental_spm.dag",
    "instrumental_augmented.dag",
    "instrumental_augmented_errors.dag",
    "instrumental_alternative.dag",
    "instrumental_bn.dag",
    "instrumental_augmented_bn.dag",
    "pearl.dag",
    "pearl_augmented.dag",
    "chain.dag",
    "reverse_chain.dag",
    "fork.dag",
    "collider.dag",
    "aug_chain.dag",
    "aug_reverse_chain.dag",
    "aug_fork.dag",
    "ignorability_bn.dag",
    "simple_scm.dag",
];

#[test]
fn every_fixture_round_trips() {
    for name in CORPUS {
        let m = model(name);
        let text = format::write_model(&m);
        let again = format::parse_model(&text).unwrap();
        assert_eq!(again, m, "{name}");
        assert_eq!(format::write_model(&again), text, "{name}");
    }
}

#[test]
fn evidence_query_is_represented() {
    let g = dag("evidence.dag");
    let query = format::parse_query("B,R _||_ G1,Y1 | A,N").unwrap();
    assert!(query_ci_moral(&g, &query).unwrap().represented);
    assert!(query_ci_dsep(&g, &query).unwrap().represented);
}

#[test]
fn evidence_ancestral_and_moral_goldens() {
    let g = dag("evidence.dag");
    let query = q(&["B", "R"], &["G1", "Y1"], &["A", "N"]);
    let anc = ancestral_subgraph(&g, &query).unwrap();
    assert_eq!(format::write_dag(&anc), read_corpus("evidence_ancestral.golden"));
    assert_eq!(moralise(&anc).to_text(), read_corpus("evidence_moral.golden"));
    // Skipping the ancestral step would marry the parents of S.
    assert!(moralise(&g).has_edge("B", "Y1"));
    assert!(!moralise(&anc).has_edge("B", "Y1"));
}

#[test]
fn instrumental_shape_and_independencies() {
    let m = model("instrumental.dag");
    assert_eq!(m.richness(), Richness::Graph);
    assert_eq!((m.dag.len(), m.dag.edge_count()), (4, 4));
    let found = represented_ci_set_over(&m.dag, ["U", "Z", "X", "Y"], 1).unwrap();
    let expected: BTreeSet<_> = [q(&["U"], &["Z"], &[]), q(&["Y"], &["Z"], &["U", "X"])].into();
    assert_eq!(found, expected);
    assert!(!query_ci_moral(&m.dag, &q(&["Y"], &["Z"], &["X"])).unwrap().represented);
}

#[test]
fn instrumental_immorality() {
    let g = dag("instrumental.dag");
    let expected: BTreeSet<_> = [Immorality::new("U", "X", "Z")].into();
    assert_eq!(immoralities(&g), expected);
}

#[test]
fn three_node_equivalences() {
    let chain = dag("chain.dag");
    let others = [dag("reverse_chain.dag"), dag("fork.dag")];
    for g in &others {
        assert!(markov_equivalent(&chain, g).unwrap());
    }
    assert!(!markov_equivalent(&chain, &dag("collider.dag")).unwrap());
    for g in [&chain, &others[0], &others[1]] {
        assert!(query_ci_moral(g, &q(&["A"], &["C"], &["B"])).unwrap().represented);
    }
    assert!(query_ci_moral(&dag("collider.dag"), &q(&["A"], &["C"], &[])).unwrap().represented);
    assert_eq!(enumerate_equivalence_class(&chain).unwrap().len(), 3);
    assert_eq!(enumerate_equivalence_class(&dag("collider.dag")).unwrap().len(), 1);
}

#[test]
fn augmented_three_node_equivalences() {
    let (a1, a2, a3) = (dag("aug_chain.dag"), dag("aug_reverse_chain.dag"), dag("aug_fork.dag"));
    assert!(markov_equivalent(&a2, &a3).unwrap());
    assert!(!markov_equivalent(&a1, &a2).unwrap());
    assert!(!markov_equivalent(&a1, &a3).unwrap());
    let eci = |g, x: &[&str], y: &[&str], z: &[&str]| query_eci(g, &EciQuery::from_ci(q(x, y, z))).unwrap().represented;
    for g in [&a1, &a2, &a3] {
        assert!(eci(g, &["A"], &["C"], &["F_A", "B"]));
    }
    for g in [&a2, &a3] {
        assert!(eci(g, &["B", "C"], &["F_A"], &[]));
        assert!(!eci(g, &["B", "C"], &["F_A"], &["A"]));
    }
    assert!(eci(&a1, &["B", "C"], &["F_A"], &["A"]));
    assert!(!eci(&a1, &["B", "C"], &["F_A"], &[]));
    assert!(no_causal_effect(&a2, "A", ["B", "C"]).unwrap());
    assert!(check_ignorability(&a1, "A", ["B", "C"]).unwrap());
}

#[test]
fn augmented_instrument_properties() {
    let g = dag("instrumental_augmented.dag");
    let eci = |x: &[&str], y: &[&str], z: &[&str]| query_eci(&g, &EciQuery::from_ci(q(x, y, z))).unwrap().represented;
    assert!(eci(&["U", "Z"], &["F_X"], &[]));
    assert!(eci(&["Y"], &["F_X"], &["Z", "U", "X"]));
    assert!(eci(&["U"], &["Z"], &[]));
    assert!(eci(&["Y"], &["Z"], &["U", "X"]));
    assert!(!eci(&["Y"], &["F_X"], &[]));
    let q7 = format::parse_query_for(&g, "Y _||_ F_X | Z,U,X").unwrap();
    assert!(matches!(q7, format::Query::Eci(_)));
}

#[test]
fn augmented_instrument_variants_agree() {
    let over = ["X", "Y", "Z", "U", "F_X"];
    let base = represented_ci_set_over(&dag("instrumental_augmented.dag"), over, 5).unwrap();
    for name in ["instrumental_augmented_errors.dag", "instrumental_alternative.dag"] {
        let other = represented_ci_set_over(&dag(name), over, 5).unwrap();
        assert_eq!(base, other, "{name}");
    }
}

#[test]
fn pearl_fixtures() {
    let g = dag("pearl.dag");
    assert!(query_ci_moral(&g, &q(&["C"], &["D"], &["A", "B"])).unwrap().represented);
    let aug = dag("pearl_augmented.dag");
    assert_eq!(regimes::pearl_augment(&g).unwrap(), aug);
    let e = EciQuery::from_ci(q(&["C"], &["F_A", "F_B"], &["A", "B", "F_C", "F_D", "F_E"]));
    assert!(query_eci(&aug, &e).unwrap().represented);
    assert_eq!(enumerate_equivalence_class(&aug).unwrap(), vec![aug.clone()]);
    // Every edge of the plain graph already lies in an immorality.
    assert_eq!(enumerate_equivalence_class(&g).unwrap(), vec![g.clone()]);
}

#[test]
fn ignorability_network() {
    let m = model("ignorability_bn.dag");
    let abn = m.augmented.expect("augmented network");
    let set = |s| RegimeAssignment::with(abn.dag(), &[("F_A", s)]).unwrap();
    let forced = interventional_joint(&abn, &set(RegimeState::Set(1))).unwrap();
    assert!((forced.marginalise(["B"]).unwrap().get(&[1]) - 0.75).abs() < 1e-15);
    let idle = interventional_joint(&abn, &set(RegimeState::Idle)).unwrap();
    assert!(idle.max_abs_diff(&joint(abn.observational()).unwrap()).unwrap() < 1e-15);
    let obs = conditional(abn.observational(), ["B"], &[("A", 1)]).unwrap();
    let itv = forced.condition(&[("A", 1)]).unwrap().marginalise(["B"]).unwrap();
    assert!(obs.max_abs_diff(&itv).unwrap() < 1e-12);
}

#[test]
fn simple_scm_fixture() {
    let m = model("simple_scm.dag");
    let s = m.scm.clone().expect("structural model");
    assert!((probability_of_causation(&s, "X", "Y").unwrap() - 0.5).abs() < 1e-15);
    let prj = potential_response_joint(&s, "X", "Y").unwrap();
    assert_eq!(prj.table, vec![0.25; 4]);
    assert!(m.bayes.is_none());
    assert!(m.require_bayes("marginal").is_err());
}

#[test]
fn bayes_fixture_richness() {
    let m = model("instrumental_bn.dag");
    assert_eq!(m.richness(), Richness::BayesNet);
    let j = joint(m.bayes.as_ref().unwrap()).unwrap();
    assert!(j.ci_deviation(&q(&["U"], &["Z"], &[])).unwrap() < 1e-12);
    assert!(j.ci_deviation(&q(&["Y"], &["Z"], &["U", "X"])).unwrap() < 1e-12);
    assert!(j.ci_deviation(&q(&["Y"], &["Z"], &["X"])).unwrap() > 1e-3);
}

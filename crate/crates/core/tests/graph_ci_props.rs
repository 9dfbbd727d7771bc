//! Invariants of the graph primitives and the CI engine.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use cde_core::ci::{enumerate_equivalence_class, markov_equivalent, query_ci_dsep, query_ci_moral, represented_ci_set};
use cde_core::generate::{all_dags, random_dag, random_query, rng};
use cde_core::graph::{ancestors, immoralities, moralise, skeleton, u_separated};
use cde_core::{CiQuery, Dag, UndirectedGraph};
use proptest::prelude::*;
use rand::Rng;

fn undirected_separated_by_paths(g: &UndirectedGraph, x: &[String], y: &[String], z: &[String]) -> bool {
    let blocked: BTreeSet<&str> = z.iter().map(String::as_str).collect();
    let targets: BTreeSet<&str> = y.iter().map(String::as_str).collect();
    fn reach<'a>(g: &'a UndirectedGraph, at: &'a str, seen: &mut BTreeSet<&'a str>, blocked: &BTreeSet<&str>, targets: &BTreeSet<&str>) -> bool {
        if targets.contains(at) {
            return true;
        }
        for n in g.neighbours(at).unwrap() {
            if !seen.contains(n) && !blocked.contains(n) {
                seen.insert(n);
                if reach(g, n, seen, blocked, targets) {
                    return true;
                }
            }
        }
        false
    }
    x.iter().all(|s| {
        let mut seen: BTreeSet<&str> = BTreeSet::from([s.as_str()]);
        !reach(g, s, &mut seen, &blocked, &targets)
    })
}

fn random_undirected(seed: u64, n: usize) -> UndirectedGraph {
    let mut r = rng(seed);
    let ids: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.gen_bool(0.3) {
                edges.push((ids[i].clone(), ids[j].clone()));
            }
        }
    }
    UndirectedGraph::new(ids, edges).unwrap()
}

fn partition(seed: u64, ids: &[String]) -> (Vec<String>, Vec<String>, Vec<String>) {
    let mut r = rng(seed);
    loop {
        let (mut x, mut y, mut z) = (vec![], vec![], vec![]);
        for id in ids {
            match r.gen_range(0..4) {
                0 => x.push(id.clone()),
                1 => y.push(id.clone()),
                2 => z.push(id.clone()),
                _ => {}
            }
        }
        if !x.is_empty() && !y.is_empty() {
            return (x, y, z);
        }
    }
}

/// Relabels `V{i}` to `W{perm[i]}`.
fn relabel(g: &Dag, perm: &[usize]) -> Dag {
    g.renamed(|id| format!("W{}", perm[id[1..].parse::<usize>().unwrap()])).unwrap()
}

proptest! {
    #![proptest_config(common::config(128))]

    #[test]
    fn acyclicity(seed in any::<u64>(), n in 2usize..9) {
        let g = random_dag(&mut rng(seed), n, 0.4);
        let order = g.topological_order();
        let pos: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        for (a, b) in g.edges() {
            prop_assert!(pos[&a] < pos[&b]);
        }
        if let Some(&(a, b)) = g.edges().first() {
            let mut edges: Vec<(&str, &str)> = g.edges().iter().map(|&(u, v)| (g.id(u), g.id(v))).collect();
            edges.push((g.id(b), g.id(a)));
            let back = g.with_edges(edges);
            prop_assert!(back.is_err());
        }
    }

    #[test]
    fn ancestral_closure(seed in any::<u64>(), n in 2usize..9) {
        let mut r = rng(seed);
        let g = random_dag(&mut r, n, 0.3);
        let seedset: Vec<&str> = g.nodes().iter().filter(|_| r.gen_bool(0.3)).map(|n| n.id.as_str()).collect();
        let anc = ancestors(&g, seedset.iter().copied()).unwrap();
        // Smallest parent-closed superset, by fixpoint iteration.
        let mut closure: BTreeSet<String> = seedset.iter().map(|s| s.to_string()).collect();
        loop {
            let mut next = closure.clone();
            for id in &closure {
                next.extend(g.parent_ids(id).unwrap().into_iter().map(str::to_owned));
            }
            if next == closure { break; }
            closure = next;
        }
        prop_assert_eq!(anc, closure);
    }

    #[test]
    fn moral_graph_without_immoralities_is_skeleton(seed in any::<u64>(), n in 2usize..8) {
        let g = random_dag(&mut rng(seed), n, 0.5);
        if immoralities(&g).is_empty() {
            prop_assert_eq!(moralise(&g), skeleton(&g));
        } else {
            prop_assert!(moralise(&g).edge_count() > skeleton(&g).edge_count());
        }
    }

    #[test]
    fn u_separation_symmetric_and_path_defined(seed in any::<u64>(), n in 2usize..9) {
        let ug = random_undirected(seed, n);
        let (x, y, z) = partition(seed ^ 0x55, ug.nodes());
        let a = u_separated(&ug, &x, &y, &z).unwrap();
        prop_assert_eq!(a, u_separated(&ug, &y, &x, &z).unwrap());
        prop_assert_eq!(a, undirected_separated_by_paths(&ug, &x, &y, &z));
    }

    #[test]
    fn moralisation_matches_dsep_and_paths(seed in any::<u64>(), n in 2usize..8) {
        let mut r = rng(seed);
        let g = random_dag(&mut r, n, 0.4);
        for _ in 0..10 {
            let q = random_query(&mut r, &g);
            let m = query_ci_moral(&g, &q).unwrap().represented;
            prop_assert_eq!(m, query_ci_dsep(&g, &q).unwrap().represented, "{}", q);
            prop_assert_eq!(m, common::dsep_by_paths(&g, &q), "{}", q);
        }
    }

    #[test]
    fn equivalence_theorem_random(seed in any::<u64>(), n in 5usize..7) {
        let mut r = rng(seed);
        let g1 = random_dag(&mut r, n, 0.4);
        // Half the time compare against a member of the class, otherwise a
        // random reorientation of the same skeleton.
        let g2 = if r.gen_bool(0.5) {
            let class = enumerate_equivalence_class(&g1).unwrap();
            class[r.gen_range(0..class.len())].clone()
        } else {
            let flipped: Vec<(String, String)> = g1.edges().into_iter().map(|(a, b)| {
                let (a, b) = (g1.id(a).to_owned(), g1.id(b).to_owned());
                if r.gen_bool(0.3) { (b, a) } else { (a, b) }
            }).collect();
            match Dag::new(g1.nodes().to_vec(), flipped) {
                Ok(g) => g,
                Err(_) => random_dag(&mut r, n, 0.4),
            }
        };
        let eq = markov_equivalent(&g1, &g2).unwrap();
        prop_assert_eq!(eq, represented_ci_set(&g1, 3).unwrap() == represented_ci_set(&g2, 3).unwrap());
    }

    #[test]
    fn class_members_equivalent_and_relabelling_commutes(seed in any::<u64>(), n in 2usize..7) {
        let mut r = rng(seed);
        let g = random_dag(&mut r, n, 0.5);
        let class = enumerate_equivalence_class(&g).unwrap();
        prop_assert!(class.contains(&g));
        for m in &class {
            prop_assert!(markov_equivalent(&g, m).unwrap());
        }
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let relabelled: BTreeSet<_> = enumerate_equivalence_class(&relabel(&g, &perm)).unwrap()
            .iter().map(Dag::edge_ids).collect();
        let mapped: BTreeSet<_> = class.iter().map(|m| relabel(m, &perm).edge_ids()).collect();
        prop_assert_eq!(relabelled, mapped);
    }

    #[test]
    fn decomposition(seed in any::<u64>(), n in 3usize..8) {
        let mut r = rng(seed);
        let g = random_dag(&mut r, n, 0.35);
        for _ in 0..10 {
            let q = random_query(&mut r, &g);
            if q.y.len() < 2 || !query_ci_moral(&g, &q).unwrap().represented {
                continue;
            }
            let keep = r.gen_range(1..q.y.len());
            let smaller = CiQuery { y: q.y.iter().take(keep).cloned().collect(), ..q.clone() };
            prop_assert!(query_ci_moral(&g, &smaller).unwrap().represented, "{} from {}", smaller, q);
        }
    }
}

#[test]
fn equivalence_theorem_exhaustive_four_nodes() {
    let dags = all_dags(4);
    let sets: Vec<BTreeSet<CiQuery>> = dags.iter().map(|g| represented_ci_set(g, 3).unwrap()).collect();
    let sk: Vec<UndirectedGraph> = dags.iter().map(skeleton).collect();
    let im: Vec<_> = dags.iter().map(immoralities).collect();
    for i in 0..dags.len() {
        for j in i..dags.len() {
            let eq = sk[i] == sk[j] && im[i] == im[j];
            assert_eq!(eq, sets[i] == sets[j], "{} vs {}", dags[i], dags[j]);
        }
    }
    assert!(markov_equivalent(&dags[0], &dags[0]).unwrap());
}

#[test]
fn class_sizes_partition_all_four_node_dags() {
    // Classes partition the space: summing 1/|class| over every DAG counts
    // the classes, and each class is enumerated identically from any member.
    let dags = all_dags(4);
    let mut classes: BTreeSet<Vec<BTreeSet<(String, String)>>> = BTreeSet::new();
    for g in &dags {
        let c: Vec<_> = enumerate_equivalence_class(g).unwrap().iter().map(Dag::edge_ids).collect();
        classes.insert(c);
    }
    let total: usize = classes.iter().map(Vec::len).sum();
    assert_eq!(total, dags.len());
    // Known count of Markov equivalence classes on 4 labelled nodes.
    assert_eq!(classes.len(), 185);
}

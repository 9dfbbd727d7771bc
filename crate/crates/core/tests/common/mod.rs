//! Fixture loading and brute-force oracles shared by the integration tests.
//! The oracles deliberately avoid the library's own algorithms.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use cde_core::format::{self, Model};
use cde_core::{BayesNet, CiQuery, Dag};

pub fn config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        failure_persistence: None,
        ..Default::default()
    }
}

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

pub fn read_corpus(name: &str) -> String {
    std::fs::read_to_string(corpus_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn model(name: &str) -> Model {
    format::parse_model(&read_corpus(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn dag(name: &str) -> Dag {
    model(name).dag
}

pub fn q(x: &[&str], y: &[&str], z: &[&str]) -> CiQuery {
    CiQuery::new(x.iter().copied(), y.iter().copied(), z.iter().copied())
}

fn descendants_or_self(g: &Dag, v: usize) -> Vec<bool> {
    let mut seen = vec![false; g.len()];
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        if !seen[u] {
            seen[u] = true;
            stack.extend_from_slice(g.children(u));
        }
    }
    seen
}

/// d-separation by enumerating every simple path of the skeleton between x
/// and y and checking each one for a blocking node.
pub fn dsep_by_paths(g: &Dag, query: &CiQuery) -> bool {
    let ix = |s: &BTreeSet<String>| -> Vec<usize> { s.iter().map(|id| g.index_of(id).unwrap()).collect() };
    let (xs, ys, zs) = (ix(&query.x), ix(&query.y), ix(&query.z));
    let mut in_z = vec![false; g.len()];
    for &z in &zs {
        in_z[z] = true;
    }
    let desc: Vec<Vec<bool>> = (0..g.len()).map(|v| descendants_or_self(g, v)).collect();
    let opens = |a: usize, b: usize, c: usize| -> bool {
        let collider = g.has_edge(a, b) && g.has_edge(c, b);
        if collider {
            (0..g.len()).any(|d| desc[b][d] && in_z[d])
        } else {
            !in_z[b]
        }
    };
    fn walk(
        g: &Dag,
        path: &mut Vec<usize>,
        on: &mut Vec<bool>,
        target: &[bool],
        opens: &dyn Fn(usize, usize, usize) -> bool,
    ) -> bool {
        let last = *path.last().unwrap();
        if path.len() > 1 && target[last] {
            return true;
        }
        let neigh: Vec<usize> = g.parents(last).iter().chain(g.children(last)).copied().collect();
        for n in neigh {
            if on[n] {
                continue;
            }
            if path.len() >= 2 && !opens(path[path.len() - 2], last, n) {
                continue;
            }
            path.push(n);
            on[n] = true;
            let found = walk(g, path, on, target, opens);
            on[n] = false;
            path.pop();
            if found {
                return true;
            }
        }
        false
    }
    let mut target = vec![false; g.len()];
    for &y in &ys {
        target[y] = true;
    }
    for &x in &xs {
        let mut on = vec![false; g.len()];
        on[x] = true;
        // Paths through other x nodes are covered when starting from them.
        for &other in &xs {
            on[other] = true;
        }
        if walk(g, &mut vec![x], &mut on, &target, &opens) {
            return false;
        }
    }
    true
}

/// Joint probability of every full assignment, straight from the CPT
/// tables, in row-major order over the graph's node order.
pub fn brute_joint(bn: &BayesNet) -> Vec<f64> {
    let g = bn.dag();
    let cards: Vec<usize> = g.nodes().iter().map(|n| n.cardinality).collect();
    let total: usize = cards.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut states = vec![0usize; cards.len()];
    for cell in 0..total {
        let mut c = cell;
        for i in (0..cards.len()).rev() {
            states[i] = c % cards[i];
            c /= cards[i];
        }
        let mut p = 1.0;
        for (v, node) in g.nodes().iter().enumerate() {
            let cpt = bn.cpt(&node.id).unwrap();
            let mut row = 0;
            for par in &cpt.parent_order {
                let pi = g.index_of(par).unwrap();
                row = row * cards[pi] + states[pi];
            }
            p *= cpt.table[row][states[v]];
        }
        out.push(p);
    }
    out
}

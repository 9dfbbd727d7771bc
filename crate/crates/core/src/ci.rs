//! Reading conditional independence off a DAG, by moralisation and by
//! d-separation, and deciding Markov equivalence.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::{ancestor_mask, immoralities, moralise, skeleton, CiQuery, Dag, Resolved};

/// Node-count guard for exhaustive query enumeration.
pub const MAX_ENUMERATION_NODES: usize = 8;

/// Guard on the number of skeleton edges whose orientation is not forced by
/// an immorality; the class search visits `2^free` orientations.
pub const MAX_FREE_EDGES: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    Moralisation,
    DSeparation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CiVerdict {
    pub represented: bool,
    pub method: Method,
    /// When not represented: a connecting path in the moral graph, or an
    /// active trail in the DAG for d-separation. Empty otherwise.
    pub witness: Vec<String>,
}

impl CiVerdict {
    fn new(method: Method, witness: Option<Vec<String>>) -> Self {
        CiVerdict {
            represented: witness.is_none(),
            method,
            witness: witness.unwrap_or_default(),
        }
    }
}

/// Ancestral subgraph, moralise, then look for a path avoiding `z`.
pub fn query_ci_moral(g: &Dag, q: &CiQuery) -> Result<CiVerdict> {
    let r = q.resolve(g)?;
    Ok(moral_verdict(g, &r))
}

pub(crate) fn moral_verdict(g: &Dag, r: &Resolved) -> CiVerdict {
    let keep = ancestor_mask(g, &r.mentioned());
    let sub = g.induced(&keep);
    let moral = moralise(&sub);
    // Map indices of `g` to indices of the subgraph.
    let mut remap = vec![usize::MAX; g.len()];
    let mut next = 0;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            remap[i] = next;
            next += 1;
        }
    }
    let m = |s: &[usize]| s.iter().map(|&i| remap[i]).collect::<Vec<_>>();
    let path = moral.connecting_path(&m(&r.x), &m(&r.y), &m(&r.z));
    CiVerdict::new(Method::Moralisation, path.map(|p| moral.ids(&p)))
}

/// Path-blocking criterion, evaluated by reachability over (node, direction)
/// states ("Bayes ball").
pub fn query_ci_dsep(g: &Dag, q: &CiQuery) -> Result<CiVerdict> {
    let r = q.resolve(g)?;
    Ok(dsep_verdict(g, &r))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    /// Trail arrived from a child (travelling against the arrow).
    Up,
    /// Trail arrived from a parent.
    Down,
}

pub(crate) fn dsep_verdict(g: &Dag, r: &Resolved) -> CiVerdict {
    let n = g.len();
    let mut in_z = vec![false; n];
    for &v in &r.z {
        in_z[v] = true;
    }
    let mut in_y = vec![false; n];
    for &v in &r.y {
        in_y[v] = true;
    }
    // Colliders are open exactly when they are ancestors of z (or in z).
    let z_anc = ancestor_mask(g, &r.z);

    let slot = |v: usize, d: Dir| 2 * v + usize::from(d == Dir::Down);
    let mut seen = vec![false; 2 * n];
    let mut pred: Vec<Option<(usize, Dir)>> = vec![None; 2 * n];
    let mut queue = std::collections::VecDeque::new();
    for &x in &r.x {
        seen[slot(x, Dir::Up)] = true;
        queue.push_back((x, Dir::Up));
    }
    while let Some((v, d)) = queue.pop_front() {
        if in_y[v] {
            let mut trail = vec![g.id(v).to_owned()];
            let mut cur = (v, d);
            while let Some(p) = pred[slot(cur.0, cur.1)] {
                trail.push(g.id(p.0).to_owned());
                cur = p;
            }
            trail.reverse();
            return CiVerdict::new(Method::DSeparation, Some(trail));
        }
        let mut step = |w: usize, dw: Dir, queue: &mut std::collections::VecDeque<(usize, Dir)>| {
            let s = slot(w, dw);
            if !seen[s] {
                seen[s] = true;
                pred[s] = Some((v, d));
                queue.push_back((w, dw));
            }
        };
        match d {
            Dir::Up if !in_z[v] => {
                for &p in g.parents(v) {
                    step(p, Dir::Up, &mut queue);
                }
                for &c in g.children(v) {
                    step(c, Dir::Down, &mut queue);
                }
            }
            Dir::Down => {
                if !in_z[v] {
                    for &c in g.children(v) {
                        step(c, Dir::Down, &mut queue);
                    }
                }
                if z_anc[v] {
                    for &p in g.parents(v) {
                        step(p, Dir::Up, &mut queue);
                    }
                }
            }
            Dir::Up => {}
        }
    }
    CiVerdict::new(Method::DSeparation, None)
}

/// Every query `(x ⫫ y | z)` over `nodes` with disjoint sets, `1 ≤ |x|,|y| ≤
/// max_query_size`, in canonical form (each unordered `{x, y}` once).
/// Enumeration follows base-4 assignment codes, so the output order is fixed.
pub fn canonical_queries(nodes: &[String], max_query_size: usize) -> Result<Vec<CiQuery>> {
    if nodes.len() > MAX_ENUMERATION_NODES {
        return Err(Error::capacity(format!(
            "query enumeration is limited to {MAX_ENUMERATION_NODES} nodes, got {}",
            nodes.len()
        )));
    }
    let total = 4usize.pow(nodes.len() as u32);
    Ok((0..total)
        .filter_map(|code| assignment_query(nodes, code, max_query_size))
        .collect())
}

/// Decodes `code` as one of {none, x, y, z} per node; keeps only canonical
/// orientations.
fn assignment_query(nodes: &[String], code: usize, max_query_size: usize) -> Option<CiQuery> {
    let mut q = CiQuery::new([""; 0], [""; 0], [""; 0]);
    let mut c = code;
    for id in nodes {
        match c % 4 {
            1 => q.x.insert(id.clone()),
            2 => q.y.insert(id.clone()),
            3 => q.z.insert(id.clone()),
            _ => false,
        };
        c /= 4;
    }
    let sizes_ok = |s: &BTreeSet<String>| !s.is_empty() && s.len() <= max_query_size;
    (sizes_ok(&q.x) && sizes_ok(&q.y) && q.x < q.y).then_some(q)
}

/// All canonical queries the graph represents.
pub fn represented_ci_set(g: &Dag, max_query_size: usize) -> Result<BTreeSet<CiQuery>> {
    represented_ci_set_with(g, max_query_size, Execution::default())
}

pub fn represented_ci_set_with(g: &Dag, max_query_size: usize, exec: Execution) -> Result<BTreeSet<CiQuery>> {
    let ids: Vec<String> = g.nodes().iter().map(|n| n.id.clone()).collect();
    represented_over(g, &ids, max_query_size, exec)
}

/// Represented queries whose sets all lie inside `over`; the graph itself
/// may be larger than the enumeration guard.
pub fn represented_ci_set_over<I>(g: &Dag, over: I, max_query_size: usize) -> Result<BTreeSet<CiQuery>>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let idx = g.require_all(over)?;
    let ids: Vec<String> = idx.iter().map(|&i| g.id(i).to_owned()).collect();
    represented_over(g, &ids, max_query_size, Execution::default())
}

fn represented_over(g: &Dag, ids: &[String], max_query_size: usize, exec: Execution) -> Result<BTreeSet<CiQuery>> {
    if ids.len() > MAX_ENUMERATION_NODES {
        return Err(Error::capacity(format!(
            "query enumeration is limited to {MAX_ENUMERATION_NODES} nodes, got {}",
            ids.len()
        )));
    }
    let total = 4usize.pow(ids.len() as u32);
    let found = exec.filter_map_range(0..total, |code| {
        let q = assignment_query(ids, code, max_query_size)?;
        let r = q.resolve(g).expect("enumerated over graph ids");
        moral_verdict(g, &r).represented.then_some(q)
    });
    Ok(found.into_iter().collect())
}

fn same_node_set(g1: &Dag, g2: &Dag) -> bool {
    let a: BTreeSet<&str> = g1.nodes().iter().map(|n| n.id.as_str()).collect();
    let b: BTreeSet<&str> = g2.nodes().iter().map(|n| n.id.as_str()).collect();
    a == b
}

/// Same skeleton and same immoralities.
pub fn markov_equivalent(g1: &Dag, g2: &Dag) -> Result<bool> {
    if !same_node_set(g1, g2) {
        return Err(Error::query("Markov equivalence needs graphs over the same node set"));
    }
    Ok(skeleton(g1) == skeleton(g2) && immoralities(g1) == immoralities(g2))
}

/// All DAGs Markov equivalent to `g`, sorted by edge list; `g` is a member.
pub fn enumerate_equivalence_class(g: &Dag) -> Result<Vec<Dag>> {
    enumerate_equivalence_class_with(g, Execution::default())
}

pub fn enumerate_equivalence_class_with(g: &Dag, exec: Execution) -> Result<Vec<Dag>> {
    let target = immoralities(g);
    // Edges inside an immorality keep their direction in every member.
    let mut forced = BTreeSet::new();
    for m in &target {
        let c = g.index_of(&m.child).expect("immorality of g");
        for p in [&m.parents.0, &m.parents.1] {
            forced.insert((g.index_of(p).expect("immorality of g"), c));
        }
    }
    let (fixed, free): (Vec<_>, Vec<_>) = g.edges().into_iter().partition(|e| forced.contains(e));
    if free.len() > MAX_FREE_EDGES {
        return Err(Error::capacity(format!(
            "{} unforced edges exceed the class-enumeration limit of {MAX_FREE_EDGES}",
            free.len()
        )));
    }
    let name = |i: usize| g.id(i).to_owned();
    let mut members = exec.filter_map_range(0..1usize << free.len(), |mask| {
        let mut edges: Vec<(String, String)> = fixed.iter().map(|&(a, b)| (name(a), name(b))).collect();
        for (bit, &(a, b)) in free.iter().enumerate() {
            if mask >> bit & 1 == 0 {
                edges.push((name(a), name(b)));
            } else {
                edges.push((name(b), name(a)));
            }
        }
        let cand = g.with_edges(edges).ok()?;
        (immoralities(&cand) == target).then_some(cand)
    });
    members.sort_by_cached_key(Dag::edge_ids);
    Ok(members)
}

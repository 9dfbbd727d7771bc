//! Typed DAGs and the purely graph-theoretic primitives: ancestral closure,
//! moralisation, skeletons, immoralities and separation in undirected graphs.
//!
//! Nodes are addressed by symbolic id in the public API. Internally every
//! graph keeps nodes in insertion order and works with indices into that
//! order; parent and child lists are sorted by index so traversals are
//! deterministic.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// What a node stands for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeKind {
    /// Stochastic variable of the modelled system.
    Domain,
    /// Non-stochastic regime indicator for `target`: one state per value of
    /// the target plus a trailing `idle` state.
    Regime { target: String },
    /// Exogenous error variable of a structural model.
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Node {
    pub id: String,
    #[serde(flatten)]
    pub kind: NodeKind,
    pub cardinality: usize,
}

impl Node {
    pub fn domain(id: impl Into<String>, cardinality: usize) -> Self {
        Node {
            id: id.into(),
            kind: NodeKind::Domain,
            cardinality,
        }
    }

    pub fn error(id: impl Into<String>, cardinality: usize) -> Self {
        Node {
            id: id.into(),
            kind: NodeKind::Error,
            cardinality,
        }
    }

    /// Regime node for a target with `target_cardinality` states.
    pub fn regime(id: impl Into<String>, target: impl Into<String>, target_cardinality: usize) -> Self {
        Node {
            id: id.into(),
            kind: NodeKind::Regime {
                target: target.into(),
            },
            cardinality: target_cardinality + 1,
        }
    }

    pub fn is_domain(&self) -> bool {
        matches!(self.kind, NodeKind::Domain)
    }

    pub fn is_regime(&self) -> bool {
        matches!(self.kind, NodeKind::Regime { .. })
    }

    pub fn is_error(&self) -> bool {
        matches!(self.kind, NodeKind::Error)
    }

    /// Stochastic nodes are the domain and error variables.
    pub fn is_stochastic(&self) -> bool {
        !self.is_regime()
    }

    pub fn regime_target(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Regime { target } => Some(target),
            _ => None,
        }
    }
}

/// Directed acyclic graph over typed nodes.
#[derive(Debug, Clone)]
pub struct Dag {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    pub fn empty() -> Self {
        Dag {
            nodes: Vec::new(),
            index: HashMap::new(),
            parents: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn builder() -> DagBuilder {
        DagBuilder::default()
    }

    /// Builds a graph, checking every structural invariant: unique ids,
    /// known edge endpoints, no self-loops or duplicate edges, exogenous
    /// error and regime nodes, regime nodes pointing only at their target,
    /// and acyclicity.
    pub fn new<S, T>(nodes: Vec<Node>, edges: impl IntoIterator<Item = (S, T)>) -> Result<Self>
    where
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if node.id.is_empty() {
                return Err(Error::semantic("empty node id"));
            }
            if index.insert(node.id.clone(), i).is_some() {
                return Err(Error::semantic(format!("duplicate node id `{}`", node.id)));
            }
        }
        for node in &nodes {
            match &node.kind {
                NodeKind::Regime { target } => {
                    // A regime whose target is absent is detached; this only
                    // arises in subgraphs, e.g. ancestral sets of `.. ⫫ F_X`.
                    let Some(&t) = index.get(target) else {
                        continue;
                    };
                    if !nodes[t].is_domain() {
                        return Err(Error::semantic(format!(
                            "regime `{}` must target a domain node, `{target}` is not one",
                            node.id
                        )));
                    }
                    if node.cardinality != nodes[t].cardinality + 1 {
                        return Err(Error::semantic(format!(
                            "regime `{}` needs {} states (target states plus idle), got {}",
                            node.id,
                            nodes[t].cardinality + 1,
                            node.cardinality
                        )));
                    }
                }
                _ if node.cardinality < 2 => {
                    return Err(Error::semantic(format!(
                        "node `{}` needs at least 2 states, got {}",
                        node.id, node.cardinality
                    )));
                }
                _ => {}
            }
        }

        let n = nodes.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let pa = *index
                .get(a)
                .ok_or_else(|| Error::semantic(format!("edge refers to undeclared node `{a}`")))?;
            let ch = *index
                .get(b)
                .ok_or_else(|| Error::semantic(format!("edge refers to undeclared node `{b}`")))?;
            if pa == ch {
                return Err(Error::semantic(format!("self-loop on `{a}`")));
            }
            if children[pa].contains(&ch) {
                return Err(Error::semantic(format!("duplicate edge `{a} -> {b}`")));
            }
            children[pa].push(ch);
            parents[ch].push(pa);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }

        for (i, node) in nodes.iter().enumerate() {
            if !node.is_domain() && !parents[i].is_empty() {
                return Err(Error::semantic(format!(
                    "`{}` is exogenous and cannot have parents (has `{}`)",
                    node.id, nodes[parents[i][0]].id
                )));
            }
            if let NodeKind::Regime { target } = &node.kind {
                let expected: &[usize] = match index.get(target) {
                    Some(t) => std::slice::from_ref(t),
                    None => &[],
                };
                if children[i] != expected {
                    return Err(Error::semantic(format!(
                        "regime `{}` must have exactly one outgoing edge, to `{target}`",
                        node.id
                    )));
                }
            }
        }
        for (i, node) in nodes.iter().enumerate() {
            let regimes = parents[i].iter().filter(|&&p| nodes[p].is_regime()).count();
            if regimes > 1 {
                return Err(Error::semantic(format!("`{}` has more than one regime indicator", node.id)));
            }
        }

        let dag = Dag {
            nodes,
            index,
            parents,
            children,
        };
        if dag.try_topological_order().is_none() {
            return Err(Error::semantic("edge set contains a directed cycle"));
        }
        Ok(dag)
    }

    /// Same node set with a different edge set.
    pub fn with_edges<S: AsRef<str>, T: AsRef<str>>(&self, edges: impl IntoIterator<Item = (S, T)>) -> Result<Dag> {
        Dag::new(self.nodes.clone(), edges)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.nodes[idx].id
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node_by_id(&self, id: &str) -> Option<&Node> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Index of `id`, or a query error naming it.
    pub fn require(&self, id: &str) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| Error::query(format!("unknown node `{id}`")))
    }

    pub(crate) fn require_all<I>(&self, ids: I) -> Result<Vec<usize>>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let mut out: Vec<usize> = ids
            .into_iter()
            .map(|s| self.require(s.as_ref()))
            .collect::<Result<_>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    pub fn parents(&self, idx: usize) -> &[usize] {
        &self.parents[idx]
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub fn parent_ids(&self, id: &str) -> Result<Vec<&str>> {
        let i = self.require(id)?;
        Ok(self.parents[i].iter().map(|&p| self.id(p)).collect())
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.children[from].binary_search(&to).is_ok()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    /// Edges as index pairs, sorted by (parent, child).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(p, cs)| cs.iter().map(move |&c| (p, c)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    /// Edges by id, in lexicographic order.
    pub fn edge_ids(&self) -> BTreeSet<(String, String)> {
        self.edges()
            .into_iter()
            .map(|(a, b)| (self.id(a).to_owned(), self.id(b).to_owned()))
            .collect()
    }

    /// Regime node attached to `target`, if any.
    pub fn regime_of(&self, target: usize) -> Option<usize> {
        self.parents[target]
            .iter()
            .copied()
            .find(|&p| self.nodes[p].is_regime())
    }

    pub fn has_regimes(&self) -> bool {
        self.nodes.iter().any(Node::is_regime)
    }

    /// Kahn's algorithm, always releasing the lowest ready index first.
    fn try_topological_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn topological_order(&self) -> Vec<usize> {
        self.try_topological_order()
            .expect("Dag invariant: constructed graphs are acyclic")
    }

    /// Subgraph induced by the nodes whose mask entry is set.
    pub fn induced(&self, keep: &[bool]) -> Dag {
        let nodes: Vec<Node> = self
            .nodes
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(n, _)| n.clone())
            .collect();
        let edges: Vec<(String, String)> = self
            .edges()
            .into_iter()
            .filter(|&(a, b)| keep[a] && keep[b])
            .map(|(a, b)| (self.id(a).to_owned(), self.id(b).to_owned()))
            .collect();
        Dag::new(nodes, edges).expect("induced subgraph of a valid DAG is valid")
    }

    /// Copy of the graph with every id passed through `rename`.
    pub fn renamed(&self, rename: impl Fn(&str) -> String) -> Result<Dag> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node {
                id: rename(&n.id),
                kind: match &n.kind {
                    NodeKind::Regime { target } => NodeKind::Regime { target: rename(target) },
                    k => k.clone(),
                },
                cardinality: n.cardinality,
            })
            .collect();
        let edges: Vec<(String, String)> = self
            .edges()
            .into_iter()
            .map(|(a, b)| (rename(self.id(a)), rename(self.id(b))))
            .collect();
        Dag::new(nodes, edges)
    }
}

/// Graphs compare by node set and edge set; declaration order is ignored.
impl PartialEq for Dag {
    fn eq(&self, other: &Self) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let mine: BTreeSet<&Node> = self.nodes.iter().collect();
        let theirs: BTreeSet<&Node> = other.nodes.iter().collect();
        mine == theirs && self.edge_ids() == other.edge_ids()
    }
}

impl Eq for Dag {}

impl fmt::Display for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let edges: Vec<String> = self
            .edge_ids()
            .into_iter()
            .map(|(a, b)| format!("{a}->{b}"))
            .collect();
        write!(f, "{}", edges.join(" "))
    }
}

/// Incremental construction; regime declarations add their edge automatically
/// and take their cardinality from the target.
#[derive(Debug, Default, Clone)]
pub struct DagBuilder {
    decls: Vec<Decl>,
    edges: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
enum Decl {
    Plain(Node),
    Regime { id: String, target: String },
}

impl DagBuilder {
    pub fn var(mut self, id: impl Into<String>, states: usize) -> Self {
        self.decls.push(Decl::Plain(Node::domain(id, states)));
        self
    }

    /// Binary domain variables.
    pub fn vars<I: IntoIterator<Item = S>, S: Into<String>>(mut self, ids: I) -> Self {
        for id in ids {
            self.decls.push(Decl::Plain(Node::domain(id, 2)));
        }
        self
    }

    pub fn error(mut self, id: impl Into<String>, states: usize) -> Self {
        self.decls.push(Decl::Plain(Node::error(id, states)));
        self
    }

    pub fn regime(mut self, id: impl Into<String>, target: impl Into<String>) -> Self {
        self.decls.push(Decl::Regime {
            id: id.into(),
            target: target.into(),
        });
        self
    }

    pub fn edge(mut self, from: impl Into<String>, to: impl Into<String>) -> Self {
        self.edges.push((from.into(), to.into()));
        self
    }

    pub fn edges<I, S, T>(mut self, edges: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        self.edges
            .extend(edges.into_iter().map(|(a, b)| (a.into(), b.into())));
        self
    }

    pub fn build(self) -> Result<Dag> {
        let cards: HashMap<&str, usize> = self
            .decls
            .iter()
            .filter_map(|d| match d {
                Decl::Plain(n) => Some((n.id.as_str(), n.cardinality)),
                Decl::Regime { .. } => None,
            })
            .collect();
        let mut nodes = Vec::with_capacity(self.decls.len());
        let mut edges = Vec::new();
        for d in &self.decls {
            match d {
                Decl::Plain(n) => nodes.push(n.clone()),
                Decl::Regime { id, target } => {
                    let k = *cards.get(target.as_str()).ok_or_else(|| {
                        Error::semantic(format!("regime `{id}` targets undeclared node `{target}`"))
                    })?;
                    nodes.push(Node::regime(id.clone(), target.clone(), k));
                    edges.push((id.clone(), target.clone()));
                }
            }
        }
        let implied = edges.len();
        for e in self.edges {
            // An explicit copy of an implied regime edge is harmless.
            if !edges[..implied].contains(&e) {
                edges.push(e);
            }
        }
        Dag::new(nodes, edges)
    }
}

/// Conditional-independence question `x ⫫ y | z` over symbolic ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CiQuery {
    pub x: BTreeSet<String>,
    pub y: BTreeSet<String>,
    pub z: BTreeSet<String>,
}

/// A query resolved against a particular graph.
#[derive(Debug, Clone)]
pub(crate) struct Resolved {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub z: Vec<usize>,
}

impl Resolved {
    pub fn mentioned(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.x.iter().chain(&self.y).chain(&self.z).copied().collect();
        all.sort_unstable();
        all
    }
}

fn to_set<I>(ids: I) -> BTreeSet<String>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    ids.into_iter().map(|s| s.as_ref().to_owned()).collect()
}

impl CiQuery {
    pub fn new<X, Y, Z>(x: X, y: Y, z: Z) -> Self
    where
        X: IntoIterator,
        X::Item: AsRef<str>,
        Y: IntoIterator,
        Y::Item: AsRef<str>,
        Z: IntoIterator,
        Z::Item: AsRef<str>,
    {
        CiQuery {
            x: to_set(x),
            y: to_set(y),
            z: to_set(z),
        }
    }

    /// Checks the query shape without reference to a graph.
    pub fn check_shape(&self) -> Result<()> {
        if self.x.is_empty() || self.y.is_empty() {
            return Err(Error::query("both sides of a query must be nonempty"));
        }
        let overlap = self
            .x
            .intersection(&self.y)
            .chain(self.x.intersection(&self.z))
            .chain(self.y.intersection(&self.z))
            .next();
        if let Some(id) = overlap {
            return Err(Error::query(format!("`{id}` appears in more than one set of the query")));
        }
        Ok(())
    }

    pub(crate) fn resolve(&self, g: &Dag) -> Result<Resolved> {
        self.check_shape()?;
        Ok(Resolved {
            x: g.require_all(&self.x)?,
            y: g.require_all(&self.y)?,
            z: g.require_all(&self.z)?,
        })
    }

    /// Validates the query against `g`.
    pub fn validate(&self, g: &Dag) -> Result<()> {
        self.resolve(g).map(|_| ())
    }

    /// The query with `x` and `y` swapped.
    pub fn swapped(&self) -> CiQuery {
        CiQuery {
            x: self.y.clone(),
            y: self.x.clone(),
            z: self.z.clone(),
        }
    }

    /// Representative of `{x ⫫ y | z, y ⫫ x | z}`: the side that sorts first
    /// lexicographically goes on the left.
    pub fn canonical(&self) -> CiQuery {
        if self.y < self.x {
            self.swapped()
        } else {
            self.clone()
        }
    }

    pub fn mentioned(&self) -> BTreeSet<String> {
        self.x.iter().chain(&self.y).chain(&self.z).cloned().collect()
    }
}

impl fmt::Display for CiQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &BTreeSet<String>| s.iter().map(String::as_str).collect::<Vec<_>>().join(",");
        write!(f, "{} _||_ {}", join(&self.x), join(&self.y))?;
        if !self.z.is_empty() {
            write!(f, " | {}", join(&self.z))?;
        }
        Ok(())
    }
}

/// Simple undirected graph over symbolic ids.
#[derive(Debug, Clone)]
pub struct UndirectedGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    adj: Vec<BTreeSet<usize>>,
}

impl UndirectedGraph {
    pub fn new<S, A, B>(nodes: impl IntoIterator<Item = S>, edges: impl IntoIterator<Item = (A, B)>) -> Result<Self>
    where
        S: Into<String>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let nodes: Vec<String> = nodes.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::semantic(format!("duplicate node id `{n}`")));
            }
        }
        let mut g = UndirectedGraph {
            adj: vec![BTreeSet::new(); nodes.len()],
            nodes,
            index,
        };
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let ia = g.require(a).map_err(|_| Error::semantic(format!("edge refers to unknown node `{a}`")))?;
            let ib = g.require(b).map_err(|_| Error::semantic(format!("edge refers to unknown node `{b}`")))?;
            if ia == ib {
                return Err(Error::semantic(format!("self-loop on `{a}`")));
            }
            g.link(ia, ib);
        }
        Ok(g)
    }

    fn with_nodes(nodes: Vec<String>) -> Self {
        let index = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        UndirectedGraph {
            adj: vec![BTreeSet::new(); nodes.len()],
            nodes,
            index,
        }
    }

    fn link(&mut self, a: usize, b: usize) {
        self.adj[a].insert(b);
        self.adj[b].insert(a);
    }

    fn require(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::query(format!("unknown node `{id}`")))
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&ia), Some(&ib)) => self.adj[ia].contains(&ib),
            _ => false,
        }
    }

    pub fn neighbours(&self, id: &str) -> Result<BTreeSet<&str>> {
        let i = self.require(id)?;
        Ok(self.adj[i].iter().map(|&j| self.nodes[j].as_str()).collect())
    }

    /// Edges with endpoints in lexicographic order, sorted.
    pub fn edges(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for (a, ns) in self.adj.iter().enumerate() {
            for &b in ns {
                let (p, q) = (&self.nodes[a], &self.nodes[b]);
                if p < q {
                    out.insert((p.clone(), q.clone()));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Deterministic text: a sorted node line followed by one sorted `a -- b`
    /// line per edge.
    pub fn to_text(&self) -> String {
        let mut names: Vec<&str> = self.nodes.iter().map(String::as_str).collect();
        names.sort_unstable();
        let mut out = format!("nodes: {}\n", names.join(" "));
        for (a, b) in self.edges() {
            out.push_str(&format!("{a} -- {b}\n"));
        }
        out
    }

    /// Shortest path from any node of `from` to any node of `to` that avoids
    /// `blocked`, by breadth-first search.
    pub(crate) fn connecting_path(&self, from: &[usize], to: &[usize], blocked: &[usize]) -> Option<Vec<usize>> {
        let n = self.len();
        let mut is_target = vec![false; n];
        for &t in to {
            is_target[t] = true;
        }
        let mut seen = vec![false; n];
        for &b in blocked {
            seen[b] = true;
        }
        let mut pred = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for &s in from {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            if is_target[v] {
                let mut path = vec![v];
                let mut cur = v;
                while pred[cur] != usize::MAX {
                    cur = pred[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for &w in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    pred[w] = v;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    pub(crate) fn resolve_sets<X, Y, Z>(&self, x: X, y: Y, z: Z) -> Result<[Vec<usize>; 3]>
    where
        X: IntoIterator,
        X::Item: AsRef<str>,
        Y: IntoIterator,
        Y::Item: AsRef<str>,
        Z: IntoIterator,
        Z::Item: AsRef<str>,
    {
        let mut out = [Vec::new(), Vec::new(), Vec::new()];
        let mut owner = vec![usize::MAX; self.len()];
        let sets: [Vec<String>; 3] = [
            x.into_iter().map(|s| s.as_ref().to_owned()).collect(),
            y.into_iter().map(|s| s.as_ref().to_owned()).collect(),
            z.into_iter().map(|s| s.as_ref().to_owned()).collect(),
        ];
        for (k, set) in sets.iter().enumerate() {
            for id in set {
                let i = self.require(id)?;
                if owner[i] != usize::MAX && owner[i] != k {
                    return Err(Error::query(format!("`{id}` appears in more than one set")));
                }
                if owner[i] == usize::MAX {
                    owner[i] = k;
                    out[k].push(i);
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn ids(&self, path: &[usize]) -> Vec<String> {
        path.iter().map(|&i| self.nodes[i].clone()).collect()
    }
}

impl PartialEq for UndirectedGraph {
    fn eq(&self, other: &Self) -> bool {
        let a: BTreeSet<&String> = self.nodes.iter().collect();
        let b: BTreeSet<&String> = other.nodes.iter().collect();
        a == b && self.edges() == other.edges()
    }
}

impl Eq for UndirectedGraph {}

/// `a -> child <- b` with `a` and `b` non-adjacent; parents stored in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Immorality {
    pub parents: (String, String),
    pub child: String,
}

impl Immorality {
    pub fn new(a: &str, child: &str, b: &str) -> Self {
        let parents = if a <= b {
            (a.to_owned(), b.to_owned())
        } else {
            (b.to_owned(), a.to_owned())
        };
        Immorality {
            parents,
            child: child.to_owned(),
        }
    }
}

impl fmt::Display for Immorality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} <- {}", self.parents.0, self.child, self.parents.1)
    }
}

/// Sorted text, one immorality per line.
pub fn immoralities_to_text(set: &BTreeSet<Immorality>) -> String {
    set.iter().map(|m| format!("{m}\n")).collect()
}

pub(crate) fn ancestor_mask(g: &Dag, seeds: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; g.len()];
    let mut stack: Vec<usize> = seeds.to_vec();
    while let Some(v) = stack.pop() {
        if !mask[v] {
            mask[v] = true;
            stack.extend(g.parents(v).iter().copied().filter(|&p| !mask[p]));
        }
    }
    mask
}

/// `s` together with every node that has a directed path into `s`.
pub fn ancestors<I>(g: &Dag, s: I) -> Result<BTreeSet<String>>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let seeds = g.require_all(s)?;
    let mask = ancestor_mask(g, &seeds);
    Ok((0..g.len())
        .filter(|&i| mask[i])
        .map(|i| g.id(i).to_owned())
        .collect())
}

/// Restriction of `g` to the ancestors of every node mentioned in `q`.
pub fn ancestral_subgraph(g: &Dag, q: &CiQuery) -> Result<Dag> {
    let r = q.resolve(g)?;
    Ok(g.induced(&ancestor_mask(g, &r.mentioned())))
}

/// Marries every pair of co-parents and drops arrowheads.
pub fn moralise(g: &Dag) -> UndirectedGraph {
    let mut ug = UndirectedGraph::with_nodes(g.nodes().iter().map(|n| n.id.clone()).collect());
    for (a, b) in g.edges() {
        ug.link(a, b);
    }
    for v in 0..g.len() {
        let ps = g.parents(v);
        for (i, &a) in ps.iter().enumerate() {
            for &b in &ps[i + 1..] {
                ug.link(a, b);
            }
        }
    }
    ug
}

pub fn skeleton(g: &Dag) -> UndirectedGraph {
    let mut ug = UndirectedGraph::with_nodes(g.nodes().iter().map(|n| n.id.clone()).collect());
    for (a, b) in g.edges() {
        ug.link(a, b);
    }
    ug
}

pub fn immoralities(g: &Dag) -> BTreeSet<Immorality> {
    let mut out = BTreeSet::new();
    for c in 0..g.len() {
        let ps = g.parents(c);
        for (i, &a) in ps.iter().enumerate() {
            for &b in &ps[i + 1..] {
                if !g.adjacent(a, b) {
                    out.insert(Immorality::new(g.id(a), g.id(c), g.id(b)));
                }
            }
        }
    }
    out
}

/// Whether `z` separates `x` from `y` in `g`: every path between them passes
/// through `z`.
pub fn u_separated<X, Y, Z>(g: &UndirectedGraph, x: X, y: Y, z: Z) -> Result<bool>
where
    X: IntoIterator,
    X::Item: AsRef<str>,
    Y: IntoIterator,
    Y::Item: AsRef<str>,
    Z: IntoIterator,
    Z::Item: AsRef<str>,
{
    let [x, y, z] = g.resolve_sets(x, y, z)?;
    Ok(g.connecting_path(&x, &y, &z).is_none())
}

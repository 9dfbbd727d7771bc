//! Discrete Bayesian networks: CPTs, dense joint tables, variable
//! elimination, and a numeric conditional-independence check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{checked_product, max_cells, Execution};
use crate::graph::{CiQuery, Dag};

/// Row sums and normalisation are accepted within this tolerance.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Events at or below this mass are treated as impossible when conditioning.
pub const POSITIVITY_GUARD: f64 = 1e-12;

/// Conditional distribution of `node` given `parent_order`. Row `r` is the
/// distribution for the `r`-th joint parent state, row-major with the last
/// parent varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cpt {
    pub node: String,
    pub parent_order: Vec<String>,
    pub table: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn new(node: impl Into<String>, parent_order: Vec<String>, table: Vec<Vec<f64>>) -> Self {
        Cpt {
            node: node.into(),
            parent_order,
            table,
        }
    }

    /// A parentless distribution.
    pub fn root(node: impl Into<String>, probs: Vec<f64>) -> Self {
        Cpt::new(node, Vec::new(), vec![probs])
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidCpt {
            node: self.node.clone(),
            reason: reason.into(),
        }
    }

    /// Checks shape against `g` and that every row is a distribution.
    pub fn validate(&self, g: &Dag) -> Result<()> {
        let v = g
            .index_of(&self.node)
            .ok_or_else(|| self.invalid("node is not in the graph"))?;
        let mut declared: Vec<usize> = Vec::with_capacity(self.parent_order.len());
        for p in &self.parent_order {
            let i = g
                .index_of(p)
                .ok_or_else(|| self.invalid(format!("unknown parent `{p}`")))?;
            if declared.contains(&i) {
                return Err(self.invalid(format!("parent `{p}` listed twice")));
            }
            declared.push(i);
        }
        declared.sort_unstable();
        if declared != g.parents(v) {
            let actual: Vec<&str> = g.parents(v).iter().map(|&p| g.id(p)).collect();
            return Err(self.invalid(format!(
                "parent list {:?} does not match graph parents {:?}",
                self.parent_order, actual
            )));
        }
        let rows: usize = self
            .parent_order
            .iter()
            .map(|p| g.node_by_id(p).map_or(1, |n| n.cardinality))
            .product();
        if self.table.len() != rows {
            return Err(self.invalid(format!("expected {rows} rows, got {}", self.table.len())));
        }
        let k = g.node(v).cardinality;
        for (r, row) in self.table.iter().enumerate() {
            if row.len() != k {
                return Err(self.invalid(format!("row {r} has {} entries, expected {k}", row.len())));
            }
            if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(self.invalid(format!("row {r} has invalid probability {p}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SUM_TOLERANCE {
                return Err(self.invalid(format!("row {r} sums to {s}")));
            }
        }
        Ok(())
    }
}

/// A DAG over domain and error nodes with one CPT per node.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    dag: Dag,
    /// Indexed like `dag.nodes()`.
    cpts: Vec<Cpt>,
    /// Per CPT: graph indices of `parent_order` and the row stride of each.
    layout: Vec<(Vec<usize>, Vec<usize>)>,
}

impl BayesNet {
    pub fn new(dag: Dag, cpts: Vec<Cpt>) -> Result<Self> {
        if let Some(r) = dag.nodes().iter().find(|n| n.is_regime()) {
            return Err(Error::semantic(format!(
                "regime node `{}` has no distribution; use an augmented network",
                r.id
            )));
        }
        let mut slots: Vec<Option<Cpt>> = vec![None; dag.len()];
        for cpt in cpts {
            cpt.validate(&dag)?;
            let i = dag.index_of(&cpt.node).expect("validated");
            if slots[i].is_some() {
                return Err(cpt.invalid("declared more than once"));
            }
            slots[i] = Some(cpt);
        }
        let mut ordered = Vec::with_capacity(dag.len());
        for (i, slot) in slots.into_iter().enumerate() {
            ordered.push(slot.ok_or_else(|| Error::InvalidCpt {
                node: dag.id(i).to_owned(),
                reason: "missing CPT".into(),
            })?);
        }
        let layout = ordered
            .iter()
            .map(|c| {
                let idx: Vec<usize> = c.parent_order.iter().map(|p| dag.index_of(p).unwrap()).collect();
                let cards: Vec<usize> = idx.iter().map(|&i| dag.node(i).cardinality).collect();
                (idx, strides(&cards))
            })
            .collect();
        Ok(BayesNet {
            dag,
            cpts: ordered,
            layout,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    /// CPTs in graph node order.
    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, id: &str) -> Option<&Cpt> {
        self.dag.index_of(id).map(|i| &self.cpts[i])
    }

    /// `p(node = state | parents)` with parent states read from a full
    /// assignment indexed by graph node.
    pub(crate) fn prob(&self, node: usize, state: usize, assignment: &[usize]) -> f64 {
        let (idx, st) = &self.layout[node];
        let row: usize = idx.iter().zip(st).map(|(&p, &s)| assignment[p] * s).sum();
        self.cpts[node].table[row][state]
    }

    fn factor(&self, node: usize) -> Factor {
        let cpt = &self.cpts[node];
        let mut vars = self.layout[node].0.clone();
        vars.push(node);
        let cards: Vec<usize> = vars.iter().map(|&v| self.dag.node(v).cardinality).collect();
        let values = cpt.table.iter().flatten().copied().collect();
        Factor { vars, cards, values }
    }
}

/// Row-major strides with the last entry varying fastest.
pub(crate) fn strides(cards: &[usize]) -> Vec<usize> {
    let mut st = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        st[i] = st[i + 1] * cards[i + 1];
    }
    st
}

/// Decodes a row-major cell index into per-variable states.
pub(crate) fn decode(mut cell: usize, cards: &[usize], out: &mut [usize]) {
    for i in (0..cards.len()).rev() {
        out[i] = cell % cards[i];
        cell /= cards[i];
    }
}

/// Dense distribution over `variable_order`, row-major, last variable fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointTable {
    pub variable_order: Vec<String>,
    pub cardinalities: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl JointTable {
    pub fn new(variable_order: Vec<String>, cardinalities: Vec<usize>, probabilities: Vec<f64>) -> Result<Self> {
        if variable_order.len() != cardinalities.len() {
            return Err(Error::Validation("one cardinality per variable required".into()));
        }
        let cells: usize = cardinalities.iter().product();
        if probabilities.len() != cells {
            return Err(Error::Validation(format!(
                "table needs {cells} cells, got {}",
                probabilities.len()
            )));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Validation("probabilities must be finite and nonnegative".into()));
        }
        let t = JointTable {
            variable_order,
            cardinalities,
            probabilities,
        };
        let s = t.total();
        if (s - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Validation(format!("table sums to {s}")));
        }
        Ok(t)
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn position(&self, var: &str) -> Option<usize> {
        self.variable_order.iter().position(|v| v == var)
    }

    fn require(&self, var: &str) -> Result<usize> {
        self.position(var)
            .ok_or_else(|| Error::query(format!("`{var}` is not a variable of this table")))
    }

    /// Probability of one full assignment, in `variable_order`.
    pub fn get(&self, states: &[usize]) -> f64 {
        let st = strides(&self.cardinalities);
        let cell: usize = states.iter().zip(&st).map(|(s, k)| s * k).sum();
        self.probabilities[cell]
    }

    /// Sums out everything except `vars`, returned in the given order.
    pub fn marginalise<I>(&self, vars: I) -> Result<JointTable>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let keep: Vec<usize> = vars
            .into_iter()
            .map(|v| self.require(v.as_ref()))
            .collect::<Result<_>>()?;
        let mut seen = vec![false; self.variable_order.len()];
        for &k in &keep {
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::query(format!("`{}` listed twice", self.variable_order[k])));
            }
        }
        let cards: Vec<usize> = keep.iter().map(|&k| self.cardinalities[k]).collect();
        let out_st = strides(&cards);
        let mut out = vec![0.0; cards.iter().product()];
        let mut states = vec![0; self.cardinalities.len()];
        for (cell, &p) in self.probabilities.iter().enumerate() {
            decode(cell, &self.cardinalities, &mut states);
            let o: usize = keep.iter().zip(&out_st).map(|(&k, &s)| states[k] * s).sum();
            out[o] += p;
        }
        Ok(JointTable {
            variable_order: keep.iter().map(|&k| self.variable_order[k].clone()).collect(),
            cardinalities: cards,
            probabilities: out,
        })
    }

    /// Total mass of the event `given` (variable = state for each pair).
    pub fn probability(&self, given: &[(&str, usize)]) -> Result<f64> {
        let fixed = self.fixings(given)?;
        let mut states = vec![0; self.cardinalities.len()];
        let mut mass = 0.0;
        for (cell, &p) in self.probabilities.iter().enumerate() {
            decode(cell, &self.cardinalities, &mut states);
            if fixed.iter().all(|&(i, s)| states[i] == s) {
                mass += p;
            }
        }
        Ok(mass)
    }

    fn fixings(&self, given: &[(&str, usize)]) -> Result<Vec<(usize, usize)>> {
        given
            .iter()
            .map(|&(v, s)| {
                let i = self.require(v)?;
                if s >= self.cardinalities[i] {
                    return Err(Error::query(format!("state {s} out of range for `{v}`")));
                }
                Ok((i, s))
            })
            .collect()
    }

    /// Distribution of the remaining variables given the event, renormalised.
    pub fn condition(&self, given: &[(&str, usize)]) -> Result<JointTable> {
        let fixed = self.fixings(given)?;
        let rest: Vec<usize> = (0..self.variable_order.len())
            .filter(|i| !fixed.iter().any(|&(f, _)| f == *i))
            .collect();
        let cards: Vec<usize> = rest.iter().map(|&i| self.cardinalities[i]).collect();
        let out_st = strides(&cards);
        let mut out = vec![0.0; cards.iter().product()];
        let mut states = vec![0; self.cardinalities.len()];
        for (cell, &p) in self.probabilities.iter().enumerate() {
            decode(cell, &self.cardinalities, &mut states);
            if fixed.iter().all(|&(i, s)| states[i] == s) {
                let o: usize = rest.iter().zip(&out_st).map(|(&k, &s)| states[k] * s).sum();
                out[o] += p;
            }
        }
        let mass: f64 = out.iter().sum();
        if mass <= POSITIVITY_GUARD {
            return Err(Error::Conditioning(format!("conditioning event has probability {mass:e}")));
        }
        out.iter_mut().for_each(|p| *p /= mass);
        Ok(JointTable {
            variable_order: rest.iter().map(|&k| self.variable_order[k].clone()).collect(),
            cardinalities: cards,
            probabilities: out,
        })
    }

    /// Same variables listed in a different order.
    pub fn reordered<I>(&self, order: I) -> Result<JointTable>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let t = self.marginalise(order)?;
        if t.variable_order.len() != self.variable_order.len() {
            return Err(Error::query("reordering must list every variable"));
        }
        Ok(t)
    }

    /// Largest absolute cell difference; tables must share variables.
    pub fn max_abs_diff(&self, other: &JointTable) -> Result<f64> {
        let other = other.reordered(&self.variable_order)?;
        if other.cardinalities != self.cardinalities {
            return Err(Error::query("tables disagree on cardinalities"));
        }
        Ok(self
            .probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `max |p(x,y|z) − p(x|z) p(y|z)|` over all cells of every z-slice with
    /// `p(z)` above the positivity guard.
    pub fn ci_deviation(&self, q: &CiQuery) -> Result<f64> {
        q.check_shape()?;
        let vars: Vec<&String> = q.x.iter().chain(&q.y).chain(&q.z).collect();
        let m = self.marginalise(&vars)?;
        let (nx, ny) = (q.x.len(), q.y.len());
        let cx: usize = m.cardinalities[..nx].iter().product();
        let cy: usize = m.cardinalities[nx..nx + ny].iter().product();
        let cz: usize = m.cardinalities[nx + ny..].iter().product();
        // Cell layout of `m` is (x, y, z) with z fastest.
        let at = |i: usize, j: usize, k: usize| m.probabilities[(i * cy + j) * cz + k];
        let mut worst: f64 = 0.0;
        for k in 0..cz {
            let pz: f64 = (0..cx).flat_map(|i| (0..cy).map(move |j| (i, j))).map(|(i, j)| at(i, j, k)).sum();
            if pz <= POSITIVITY_GUARD {
                continue;
            }
            let px: Vec<f64> = (0..cx).map(|i| (0..cy).map(|j| at(i, j, k)).sum::<f64>() / pz).collect();
            let py: Vec<f64> = (0..cy).map(|j| (0..cx).map(|i| at(i, j, k)).sum::<f64>() / pz).collect();
            for i in 0..cx {
                for j in 0..cy {
                    worst = worst.max((at(i, j, k) / pz - px[i] * py[j]).abs());
                }
            }
        }
        Ok(worst)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("joint tables serialise")
    }
}

fn guard(cells: Option<usize>, what: &str) -> Result<usize> {
    let limit = max_cells();
    cells.ok_or_else(|| Error::capacity(format!("{what} exceeds {limit} cells")))
}

/// Full joint by multiplying CPT entries cell by cell.
pub fn joint(bn: &BayesNet) -> Result<JointTable> {
    joint_with(bn, Execution::default())
}

pub fn joint_with(bn: &BayesNet, exec: Execution) -> Result<JointTable> {
    let g = bn.dag();
    let cards: Vec<usize> = g.nodes().iter().map(|n| n.cardinality).collect();
    let cells = guard(checked_product(cards.iter().copied(), max_cells()), "joint table")?;
    let chunks = exec.chunked(cells, |range| {
        let mut states = vec![0; cards.len()];
        range
            .map(|cell| {
                decode(cell, &cards, &mut states);
                (0..cards.len()).map(|v| bn.prob(v, states[v], &states)).product::<f64>()
            })
            .collect::<Vec<f64>>()
    });
    Ok(JointTable {
        variable_order: g.nodes().iter().map(|n| n.id.clone()).collect(),
        cardinalities: cards,
        probabilities: chunks.concat(),
    })
}

/// Dense factor over graph-node indices, row-major in `vars`.
#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn product(&self, other: &Factor, limit: usize) -> Result<Factor> {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.vars.iter().zip(&other.cards) {
            if !vars.contains(&v) {
                vars.push(v);
                cards.push(c);
            }
        }
        let cells = guard(checked_product(cards.iter().copied(), limit), "intermediate factor")?;
        let map = |f: &Factor| -> Vec<usize> {
            let st = strides(&f.cards);
            vars.iter()
                .map(|v| f.vars.iter().position(|w| w == v).map_or(0, |p| st[p]))
                .collect()
        };
        let (sa, sb) = (map(self), map(other));
        let mut states = vec![0; vars.len()];
        let values = (0..cells)
            .map(|cell| {
                decode(cell, &cards, &mut states);
                let ia: usize = states.iter().zip(&sa).map(|(s, k)| s * k).sum();
                let ib: usize = states.iter().zip(&sb).map(|(s, k)| s * k).sum();
                self.values[ia] * other.values[ib]
            })
            .collect();
        Ok(Factor { vars, cards, values })
    }

    fn sum_out(&self, var: usize) -> Factor {
        let pos = self.vars.iter().position(|&v| v == var).expect("variable in factor");
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        let out_st = strides(&cards);
        let mut values = vec![0.0; cards.iter().product()];
        let mut states = vec![0; self.vars.len()];
        for (cell, &p) in self.values.iter().enumerate() {
            decode(cell, &self.cards, &mut states);
            let o: usize = states
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != pos)
                .zip(&out_st)
                .map(|((_, s), k)| s * k)
                .sum();
            values[o] += p;
        }
        Factor { vars, cards, values }
    }
}

/// Greedy min-degree elimination order over `to_eliminate`, ties broken by
/// graph node order.
fn elimination_order(factors: &[Factor], to_eliminate: &[usize], n: usize) -> Vec<usize> {
    let mut adj = vec![std::collections::BTreeSet::new(); n];
    for f in factors {
        for &a in &f.vars {
            for &b in &f.vars {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let mut remaining: Vec<usize> = to_eliminate.to_vec();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let (pos, &v) = remaining
            .iter()
            .enumerate()
            .min_by_key(|&(_, &v)| (adj[v].len(), v))
            .expect("nonempty");
        remaining.remove(pos);
        order.push(v);
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        for &a in &nbrs {
            adj[a].remove(&v);
            for &b in &nbrs {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        adj[v].clear();
    }
    order
}

/// Marginal over `vars` (returned in graph node order) by variable
/// elimination.
pub fn marginal<I>(bn: &BayesNet, vars: I) -> Result<JointTable>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let g = bn.dag();
    let keep = g.require_all(vars)?;
    let limit = max_cells();
    let mut factors: Vec<Factor> = (0..g.len()).map(|v| bn.factor(v)).collect();
    let eliminate: Vec<usize> = (0..g.len()).filter(|v| !keep.contains(v)).collect();
    for v in elimination_order(&factors, &eliminate, g.len()) {
        let (touching, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = rest;
        let mut it = touching.into_iter();
        if let Some(first) = it.next() {
            let prod = it.try_fold(first, |acc, f| acc.product(&f, limit))?;
            factors.push(prod.sum_out(v));
        }
    }
    let unit = Factor {
        vars: Vec::new(),
        cards: Vec::new(),
        values: vec![1.0],
    };
    let result = factors.iter().try_fold(unit, |acc, f| acc.product(f, limit))?;
    let table = JointTable {
        variable_order: result.vars.iter().map(|&v| g.id(v).to_owned()).collect(),
        cardinalities: result.cards,
        probabilities: result.values,
    };
    table.reordered(keep.iter().map(|&v| g.id(v)))
}

/// Distribution of `target` given the event `given`, renormalised.
pub fn conditional<I>(bn: &BayesNet, target: I, given: &[(&str, usize)]) -> Result<JointTable>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let target: Vec<String> = target.into_iter().map(|s| s.as_ref().to_owned()).collect();
    if let Some((v, _)) = given.iter().find(|(v, _)| target.iter().any(|t| t == v)) {
        return Err(Error::query(format!("`{v}` is both a target and conditioned on")));
    }
    let all: Vec<&str> = target.iter().map(String::as_str).chain(given.iter().map(|(v, _)| *v)).collect();
    let m = marginal(bn, &all)?;
    m.condition(given)?.reordered(bn.dag().require_all(&target)?.iter().map(|&v| bn.dag().id(v)))
}

/// Numeric check of `q` in the network's distribution.
pub fn holds_in_distribution(bn: &BayesNet, q: &CiQuery, tol: f64) -> Result<bool> {
    q.validate(bn.dag())?;
    let m = marginal(bn, q.mentioned())?;
    Ok(m.ci_deviation(q)? <= tol)
}

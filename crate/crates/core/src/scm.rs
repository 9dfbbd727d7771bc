//! Structural models over discrete variables: every domain node is a
//! deterministic function of its domain parents and one exogenous error
//! node, and all randomness sits in mutually independent, finitely
//! supported error distributions.
//!
//! Distributions are computed by exact enumeration of error configurations.
//! The same machinery evaluates the model under interventions and, by
//! sharing one error draw across several interventions, yields joint laws of
//! potential responses.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::bayes::{decode, strides, BayesNet, JointTable, POSITIVITY_GUARD, SUM_TOLERANCE};
use crate::error::{Error, Result};
use crate::exec::{checked_product, max_cells, Execution};
use crate::graph::{ancestor_mask, Dag, Node};
use crate::regimes::{self, RegimeAssignment};

/// Breakpoints closer than this are merged when atomising inverse CDFs.
const BREAKPOINT_TOLERANCE: f64 = 1e-12;

/// Distribution of an error node: `probabilities[i]` is the mass of state `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSpec {
    pub node: String,
    pub probabilities: Vec<f64>,
}

impl ErrorSpec {
    pub fn new(node: impl Into<String>, probabilities: Vec<f64>) -> Self {
        ErrorSpec {
            node: node.into(),
            probabilities,
        }
    }

    /// `(probability, state)` pairs.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.probabilities.iter().copied().zip(0..)
    }
}

/// Deterministic map from the joint state of `parent_order` (domain parents,
/// then the error parent last) to a state of `node`. `table` is row-major
/// with the last parent varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuralFunction {
    pub node: String,
    pub parent_order: Vec<String>,
    pub table: Vec<usize>,
}

impl StructuralFunction {
    pub fn new(node: impl Into<String>, parent_order: Vec<String>, table: Vec<usize>) -> Self {
        StructuralFunction {
            node: node.into(),
            parent_order,
            table,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    dag: Dag,
    errors: Vec<ErrorSpec>,
    functions: Vec<StructuralFunction>,
    /// Domain nodes in topological order.
    order: Vec<usize>,
    /// Per graph node: function parent indices and strides (domain nodes only).
    layout: Vec<Option<(Vec<usize>, Vec<usize>, usize)>>,
    error_nodes: Vec<usize>,
    error_cards: Vec<usize>,
}

impl Scm {
    pub fn new(dag: Dag, errors: Vec<ErrorSpec>, functions: Vec<StructuralFunction>) -> Result<Self> {
        let mut err_slot: Vec<Option<ErrorSpec>> = vec![None; dag.len()];
        for e in errors {
            let i = dag
                .index_of(&e.node)
                .filter(|&i| dag.node(i).is_error())
                .ok_or_else(|| Error::semantic(format!("error distribution for `{}`, which is not an error node", e.node)))?;
            let k = dag.node(i).cardinality;
            if e.probabilities.len() != k {
                return Err(Error::semantic(format!(
                    "error `{}` has {k} states but {} probabilities",
                    e.node,
                    e.probabilities.len()
                )));
            }
            if e.probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::semantic(format!("error `{}` has a negative or non-finite probability", e.node)));
            }
            let s: f64 = e.probabilities.iter().sum();
            if (s - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::semantic(format!("error `{}` probabilities sum to {s}", e.node)));
            }
            if err_slot[i].replace(e).is_some() {
                return Err(Error::semantic(format!("error `{}` declared twice", dag.id(i))));
            }
        }
        let mut fn_slot: Vec<Option<StructuralFunction>> = vec![None; dag.len()];
        for f in functions {
            let i = dag
                .index_of(&f.node)
                .filter(|&i| dag.node(i).is_domain())
                .ok_or_else(|| Error::semantic(format!("function for `{}`, which is not a domain node", f.node)))?;
            if fn_slot[i].replace(f).is_some() {
                return Err(Error::semantic(format!("function for `{}` declared twice", dag.id(i))));
            }
        }

        let mut layout = vec![None; dag.len()];
        let mut error_nodes = Vec::new();
        let mut ordered_errors = Vec::new();
        let mut ordered_fns = Vec::new();
        for (i, node) in dag.nodes().iter().enumerate() {
            if node.is_error() {
                let spec = err_slot[i]
                    .take()
                    .ok_or_else(|| Error::semantic(format!("error `{}` has no distribution", node.id)))?;
                error_nodes.push(i);
                ordered_errors.push(spec);
            } else if node.is_domain() {
                let f = fn_slot[i]
                    .take()
                    .ok_or_else(|| Error::semantic(format!("domain node `{}` has no structural function", node.id)))?;
                layout[i] = Some(check_function(&dag, i, &f)?);
                ordered_fns.push(f);
            }
        }
        let order = dag
            .topological_order()
            .into_iter()
            .filter(|&i| dag.node(i).is_domain())
            .collect();
        let error_cards = error_nodes.iter().map(|&i| dag.node(i).cardinality).collect();
        Ok(Scm {
            dag,
            errors: ordered_errors,
            functions: ordered_fns,
            order,
            layout,
            error_nodes,
            error_cards,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    /// Error distributions in graph order of their nodes.
    pub fn errors(&self) -> &[ErrorSpec] {
        &self.errors
    }

    /// Structural functions in graph order of their nodes.
    pub fn functions(&self) -> &[StructuralFunction] {
        &self.functions
    }

    pub fn function(&self, id: &str) -> Option<&StructuralFunction> {
        self.functions.iter().find(|f| f.node == id)
    }

    pub fn domain_ids(&self) -> Vec<&str> {
        self.dag.nodes().iter().filter(|n| n.is_domain()).map(|n| n.id.as_str()).collect()
    }

    /// Same model with regime indicators attached to `targets`.
    pub fn augment<I>(&self, targets: I) -> Result<Scm>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        Scm::new(regimes::augment(&self.dag, targets)?, self.errors.clone(), self.functions.clone())
    }

    /// Regime indicators on every domain node (none on error nodes).
    pub fn pearl_augmented(&self) -> Result<Scm> {
        Scm::new(regimes::pearl_augment(&self.dag)?, self.errors.clone(), self.functions.clone())
    }

    /// Every error node feeds at most one domain node.
    pub fn private_errors(&self) -> bool {
        self.error_nodes.iter().all(|&e| self.dag.children(e).len() <= 1)
    }

    fn configurations(&self) -> Result<usize> {
        checked_product(self.error_cards.iter().copied(), max_cells())
            .ok_or_else(|| Error::capacity(format!("error configurations exceed {}", max_cells())))
    }

    /// Probability of error configuration `cell`, writing error states into
    /// `values`.
    fn load_errors(&self, cell: usize, errs: &mut [usize], values: &mut [usize]) -> f64 {
        decode(cell, &self.error_cards, errs);
        let mut p = 1.0;
        for ((&node, &s), spec) in self.error_nodes.iter().zip(errs.iter()).zip(&self.errors) {
            values[node] = s;
            p *= spec.probabilities[s];
        }
        p
    }

    /// Propagates through the structural functions; `forced` overrides nodes.
    fn propagate(&self, forced: &[Option<usize>], values: &mut [usize]) {
        for &v in &self.order {
            values[v] = match forced[v] {
                Some(s) => s,
                None => {
                    let (idx, st, _) = self.layout[v].as_ref().expect("domain node");
                    let row: usize = idx.iter().zip(st).map(|(&p, &s)| values[p] * s).sum();
                    self.functions_by_node(v)[row]
                }
            };
        }
    }

    fn functions_by_node(&self, v: usize) -> &[usize] {
        let (_, _, slot) = self.layout[v].as_ref().expect("domain node");
        &self.functions[*slot].table
    }

    /// Reduces `f` over all positive-probability error configurations in
    /// fixed chunk order.
    fn accumulate<F>(&self, width: usize, exec: Execution, f: F) -> Result<Vec<f64>>
    where
        F: Fn(f64, &mut [usize], &mut Vec<f64>) + Sync + Send,
    {
        let total = self.configurations()?;
        let parts = exec.chunked(total, |range| {
            let mut acc = vec![0.0; width];
            let mut errs = vec![0; self.error_cards.len()];
            let mut values = vec![0; self.dag.len()];
            for cell in range {
                let p = self.load_errors(cell, &mut errs, &mut values);
                if p > 0.0 {
                    f(p, &mut values, &mut acc);
                }
            }
            acc
        });
        let mut out = vec![0.0; width];
        for part in parts {
            for (o, p) in out.iter_mut().zip(part) {
                *o += p;
            }
        }
        Ok(out)
    }
}

fn check_function(g: &Dag, v: usize, f: &StructuralFunction) -> Result<(Vec<usize>, Vec<usize>, usize)> {
    let bad = |m: String| Error::semantic(format!("function for `{}`: {m}", f.node));
    let errs: Vec<usize> = g.parents(v).iter().copied().filter(|&p| g.node(p).is_error()).collect();
    if errs.len() != 1 {
        return Err(bad(format!("needs exactly one error parent, has {}", errs.len())));
    }
    let idx: Vec<usize> = f
        .parent_order
        .iter()
        .map(|p| g.index_of(p).ok_or_else(|| bad(format!("unknown parent `{p}`"))))
        .collect::<Result<_>>()?;
    let mut sorted = idx.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let expected: Vec<usize> = g.parents(v).iter().copied().filter(|&p| !g.node(p).is_regime()).collect();
    if sorted.len() != idx.len() || sorted != expected {
        let names: Vec<&str> = expected.iter().map(|&p| g.id(p)).collect();
        return Err(bad(format!("parent list {:?} does not match graph parents {names:?}", f.parent_order)));
    }
    if idx.last() != Some(&errs[0]) {
        return Err(bad(format!("error parent `{}` must come last", g.id(errs[0]))));
    }
    let cards: Vec<usize> = idx.iter().map(|&p| g.node(p).cardinality).collect();
    let rows: usize = cards.iter().product();
    if f.table.len() != rows {
        return Err(bad(format!("expected {rows} entries, got {}", f.table.len())));
    }
    let k = g.node(v).cardinality;
    if let Some(s) = f.table.iter().find(|&&s| s >= k) {
        return Err(bad(format!("output state {s} out of range (node has {k} states)")));
    }
    let slot = (0..v).filter(|&i| g.node(i).is_domain()).count();
    Ok((idx, strides(&cards), slot))
}

/// Law of the domain nodes under regime assignment `r`, by pushing every
/// error configuration through the structural functions.
pub fn spm_joint(s: &Scm, r: &RegimeAssignment) -> Result<JointTable> {
    spm_joint_with(s, r, Execution::default())
}

pub fn spm_joint_with(s: &Scm, r: &RegimeAssignment, exec: Execution) -> Result<JointTable> {
    if s.private_errors() {
        spm_joint_factorised(s, r, exec)
    } else {
        spm_joint_enumerated(s, r, exec)
    }
}

fn domain_layout(s: &Scm) -> Result<(Vec<usize>, Vec<usize>, usize)> {
    let domain: Vec<usize> = (0..s.dag.len()).filter(|&i| s.dag.node(i).is_domain()).collect();
    let cards: Vec<usize> = domain.iter().map(|&i| s.dag.node(i).cardinality).collect();
    let cells = checked_product(cards.iter().copied(), max_cells())
        .ok_or_else(|| Error::capacity(format!("joint table exceeds {} cells", max_cells())))?;
    Ok((domain, cards, cells))
}

fn domain_table(s: &Scm, domain: &[usize], cards: Vec<usize>, probabilities: Vec<f64>) -> JointTable {
    JointTable {
        variable_order: domain.iter().map(|&i| s.dag.id(i).to_owned()).collect(),
        cardinalities: cards,
        probabilities,
    }
}

/// [`spm_joint`] by pushing every error configuration through the
/// functions; exponential in the number of error nodes but valid when
/// errors are shared between nodes.
pub fn spm_joint_enumerated(s: &Scm, r: &RegimeAssignment, exec: Execution) -> Result<JointTable> {
    let forced = r.overrides(&s.dag)?;
    let (domain, cards, cells) = domain_layout(s)?;
    let st = strides(&cards);
    let probabilities = s.accumulate(cells, exec, |p, values, acc| {
        s.propagate(&forced, values);
        let cell: usize = domain.iter().zip(&st).map(|(&v, &k)| values[v] * k).sum();
        acc[cell] += p;
    })?;
    Ok(domain_table(s, &domain, cards, probabilities))
}

/// With one error per node, the law of each node given its domain parents
/// is the error mass mapped onto each output, and the joint is their product.
fn spm_joint_factorised(s: &Scm, r: &RegimeAssignment, exec: Execution) -> Result<JointTable> {
    let forced = r.overrides(&s.dag)?;
    let (domain, cards, cells) = domain_layout(s)?;
    let induced: Vec<Option<(Vec<usize>, Vec<usize>, Vec<Vec<f64>>)>> = (0..s.dag.len())
        .map(|v| {
            let (idx, st, slot) = s.layout[v].as_ref()?;
            let (&err, parents) = idx.split_last().expect("error parent");
            let ke = s.dag.node(err).cardinality;
            let probs = &s.errors[s.error_nodes.iter().position(|&e| e == err).expect("error node")].probabilities;
            let table = &s.functions[*slot].table;
            let k = s.dag.node(v).cardinality;
            let rows = table.len() / ke;
            let laws = (0..rows)
                .map(|row| {
                    let mut law = vec![0.0; k];
                    for (e, &p) in probs.iter().enumerate() {
                        law[table[row * ke + e]] += p;
                    }
                    law
                })
                .collect();
            let row_st: Vec<usize> = st[..parents.len()].iter().map(|&x| x / ke).collect();
            Some((parents.to_vec(), row_st, laws))
        })
        .collect();
    let parts = exec.chunked(cells, |range| {
        let mut states = vec![0; domain.len()];
        let mut values = vec![0; s.dag.len()];
        range
            .map(|cell| {
                decode(cell, &cards, &mut states);
                for (&v, &x) in domain.iter().zip(&states) {
                    values[v] = x;
                }
                let mut p = 1.0;
                for &v in &domain {
                    p *= match forced[v] {
                        Some(x) => f64::from(u8::from(values[v] == x)),
                        None => {
                            let (parents, st, laws) = induced[v].as_ref().expect("domain node");
                            let row: usize = parents.iter().zip(st).map(|(&q, &k)| values[q] * k).sum();
                            laws[row][values[v]]
                        }
                    };
                    if p == 0.0 {
                        break;
                    }
                }
                p
            })
            .collect::<Vec<f64>>()
    });
    Ok(domain_table(s, &domain, cards, parts.concat()))
}

/// Joint law of the potential responses `(Y_x)_x` of `outcome` to
/// interventions on `cause`, one shared error draw per configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialResponseJoint {
    pub cause: String,
    pub outcome: String,
    pub cause_cardinality: usize,
    pub outcome_cardinality: usize,
    /// Row-major over `(Y_0, .., Y_{k-1})`, `Y_0` slowest.
    pub table: Vec<f64>,
    /// `cause` is not an ancestor of `outcome`, so every `Y_x` coincides.
    pub degenerate: bool,
}

impl PotentialResponseJoint {
    /// Probability of the response vector `ys` (indexed by cause state).
    pub fn probability(&self, ys: &[usize]) -> f64 {
        let cell = ys.iter().fold(0, |acc, &y| acc * self.outcome_cardinality + y);
        self.table[cell]
    }

    /// Law of `Y_x`.
    pub fn marginal(&self, x: usize) -> Vec<f64> {
        let k = self.cause_cardinality;
        let m = self.outcome_cardinality;
        let mut out = vec![0.0; m];
        let mut ys = vec![0; k];
        let cards = vec![m; k];
        for (cell, &p) in self.table.iter().enumerate() {
            decode(cell, &cards, &mut ys);
            out[ys[x]] += p;
        }
        out
    }
}

fn require_domain(s: &Scm, id: &str) -> Result<usize> {
    let i = s.dag.require(id)?;
    if !s.dag.node(i).is_domain() {
        return Err(Error::query(format!("`{id}` is not a domain node")));
    }
    Ok(i)
}

pub fn potential_response_joint(s: &Scm, cause: &str, outcome: &str) -> Result<PotentialResponseJoint> {
    let c = require_domain(s, cause)?;
    let o = require_domain(s, outcome)?;
    if c == o {
        return Err(Error::query("cause and outcome must differ"));
    }
    let k = s.dag.node(c).cardinality;
    let m = s.dag.node(o).cardinality;
    let cells = checked_product(std::iter::repeat_n(m, k), max_cells())
        .ok_or_else(|| Error::capacity("potential-response table too large"))?;
    let table = s.accumulate(cells, Execution::default(), |p, values, acc| {
        let mut forced = vec![None; s.dag.len()];
        let mut cell = 0;
        for x in 0..k {
            forced[c] = Some(x);
            s.propagate(&forced, values);
            cell = cell * m + values[o];
        }
        acc[cell] += p;
    })?;
    Ok(PotentialResponseJoint {
        cause: cause.to_owned(),
        outcome: outcome.to_owned(),
        cause_cardinality: k,
        outcome_cardinality: m,
        table,
        degenerate: !ancestor_mask(&s.dag, &[o])[c],
    })
}

/// `P(Y_0 = 0 | X = 1, Y_1 = 1)` for binary cause `X` and outcome `Y`, with
/// `X` taking its natural value and `Y_0`, `Y_1` evaluated on the same
/// error draw.
pub fn probability_of_causation(s: &Scm, cause: &str, outcome: &str) -> Result<f64> {
    let c = require_domain(s, cause)?;
    let o = require_domain(s, outcome)?;
    if c == o {
        return Err(Error::query("cause and outcome must differ"));
    }
    if s.dag.node(c).cardinality != 2 || s.dag.node(o).cardinality != 2 {
        return Err(Error::Scope("probability of causation needs a binary cause and outcome".into()));
    }
    // [P(X=1, Y_1=1, Y_0=0), P(X=1, Y_1=1)]
    let acc = s.accumulate(2, Execution::default(), |p, values, acc| {
        let mut forced = vec![None; s.dag.len()];
        s.propagate(&forced, values);
        if values[c] != 1 {
            return;
        }
        forced[c] = Some(1);
        s.propagate(&forced, values);
        if values[o] != 1 {
            return;
        }
        forced[c] = Some(0);
        s.propagate(&forced, values);
        acc[1] += p;
        if values[o] == 0 {
            acc[0] += p;
        }
    })?;
    if acc[1] <= POSITIVITY_GUARD {
        return Err(Error::Conditioning(format!(
            "P({cause}=1, {outcome}_1=1) = {:e} is too small to condition on",
            acc[1]
        )));
    }
    Ok(acc[0] / acc[1])
}

/// Breakpoints of the conditional CDFs of `node`, merged across rows; the
/// last one is 1.
fn breakpoints(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut points: Vec<f64> = rows
        .iter()
        .flat_map(|row| {
            row.iter()
                .take(row.len() - 1)
                .scan(0.0, |acc, &p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect::<Vec<_>>()
        })
        .filter(|&b| b > BREAKPOINT_TOLERANCE && b < 1.0 - BREAKPOINT_TOLERANCE)
        .collect();
    points.push(1.0);
    points.sort_by(f64::total_cmp);
    points.dedup_by(|b, a| *b - *a <= BREAKPOINT_TOLERANCE);
    points
}

/// Generalised inverse `min{y : F(y) ≥ u}` of the CDF of `row`.
fn inverse_cdf(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (y, &p) in row.iter().enumerate().take(row.len() - 1) {
        acc += p;
        if acc >= u - BREAKPOINT_TOLERANCE {
            return y;
        }
    }
    row.len() - 1
}

/// Joint law of the responses of `node` to each of its parent rows.
/// Cells are row-major over `(y_row0, y_row1, ..)`, parent row 0 slowest;
/// for a single binary parent this is the layout of
/// [`PotentialResponseJoint::table`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    pub node: String,
    pub table: Vec<f64>,
}

impl Coupling {
    pub fn new(node: impl Into<String>, table: Vec<f64>) -> Self {
        Coupling {
            node: node.into(),
            table,
        }
    }

    /// Responses for different parent rows drawn independently.
    pub fn independent(bn: &BayesNet, node: &str) -> Result<Self> {
        let rows = cpt_rows(bn, node)?;
        let (_, cards) = coupling_shape(rows)?;
        let mut ys = vec![0; cards.len()];
        let table = (0..cards.iter().product::<usize>())
            .map(|cell| {
                decode(cell, &cards, &mut ys);
                rows.iter().zip(&ys).map(|(row, &y)| row[y]).product()
            })
            .collect();
        Ok(Coupling::new(node, table))
    }

    /// All responses driven by one shared uniform variable through the
    /// inverse CDFs of the rows.
    pub fn comonotone(bn: &BayesNet, node: &str) -> Result<Self> {
        let rows = cpt_rows(bn, node)?;
        let (k, cards) = coupling_shape(rows)?;
        let mut table = vec![0.0; cards.iter().product()];
        let mut prev = 0.0;
        for b in breakpoints(rows) {
            let cell = rows.iter().fold(0, |acc, row| acc * k + inverse_cdf(row, b));
            table[cell] += b - prev;
            prev = b;
        }
        Ok(Coupling::new(node, table))
    }

    /// Law of the response to parent row `row`.
    pub fn row_marginal(&self, rows: usize, k: usize, row: usize) -> Vec<f64> {
        let cards = vec![k; rows];
        let mut ys = vec![0; rows];
        let mut out = vec![0.0; k];
        for (cell, &p) in self.table.iter().enumerate() {
            decode(cell, &cards, &mut ys);
            out[ys[row]] += p;
        }
        out
    }
}

fn cpt_rows<'a>(bn: &'a BayesNet, node: &str) -> Result<&'a [Vec<f64>]> {
    bn.cpt(node)
        .map(|c| c.table.as_slice())
        .ok_or_else(|| Error::query(format!("unknown node `{node}`")))
}

fn coupling_shape(rows: &[Vec<f64>]) -> Result<(usize, Vec<usize>)> {
    let k = rows[0].len();
    let cards = vec![k; rows.len()];
    checked_product(cards.iter().copied(), max_cells())
        .ok_or_else(|| Error::capacity("coupling table too large"))?;
    Ok((k, cards))
}

/// Pieces of a structural model assembled node by node.
struct SpmParts {
    nodes: Vec<Node>,
    edges: Vec<(String, String)>,
    errors: Vec<ErrorSpec>,
    functions: Vec<StructuralFunction>,
}

/// Error states and the response of `node` to each parent row under each
/// error state, for `states` = response vectors with their masses.
fn push_node(parts: &mut SpmParts, bn: &BayesNet, v: usize, states: Vec<(f64, Vec<usize>)>) -> Result<()> {
    let g = bn.dag();
    let id = g.id(v);
    let err = format!("E_{id}");
    if g.contains(&err) {
        return Err(Error::semantic(format!("cannot add error node `{err}`: id already in use")));
    }
    let mut states = states;
    // Error nodes need at least two states; pad with a null atom.
    while states.len() < 2 {
        let copy = states.last().map(|(_, ys)| ys.clone()).unwrap_or_default();
        states.push((0.0, copy));
    }
    let cpt = &bn.cpts()[v];
    let rows = cpt.table.len();
    let mut table = Vec::with_capacity(rows * states.len());
    for r in 0..rows {
        table.extend(states.iter().map(|(_, ys)| ys[r]));
    }
    parts.nodes.push(Node::error(err.clone(), states.len()));
    parts.edges.push((err.clone(), id.to_owned()));
    parts
        .errors
        .push(ErrorSpec::new(err.clone(), states.iter().map(|(p, _)| *p).collect()));
    let mut parent_order = cpt.parent_order.clone();
    parent_order.push(err);
    parts.functions.push(StructuralFunction::new(id, parent_order, table));
    Ok(())
}

fn comonotone_states(rows: &[Vec<f64>]) -> Vec<(f64, Vec<usize>)> {
    let mut prev = 0.0;
    breakpoints(rows)
        .into_iter()
        .map(|b| {
            let ys = rows.iter().map(|row| inverse_cdf(row, b)).collect();
            let p = b - prev;
            prev = b;
            (p, ys)
        })
        .collect()
}

fn spm_parts(bn: &BayesNet) -> Result<SpmParts> {
    let g = bn.dag();
    if let Some(n) = g.nodes().iter().find(|n| !n.is_domain()) {
        return Err(Error::semantic(format!("network node `{}` is not a domain node", n.id)));
    }
    Ok(SpmParts {
        nodes: g.nodes().to_vec(),
        edges: g.edge_ids().into_iter().collect(),
        errors: Vec::new(),
        functions: Vec::new(),
    })
}

fn finish(parts: SpmParts) -> Result<Scm> {
    Scm::new(Dag::new(parts.nodes, parts.edges)?, parts.errors, parts.functions)
}

/// Inverse-CDF construction: each node `V` gets an error `E_V` whose atoms
/// are the gaps between consecutive CDF breakpoints of all rows of its CPT,
/// and `f(pa, e)` is the generalised inverse of the row's CDF at the
/// breakpoint closing atom `e`.
pub fn build_spm(bn: &BayesNet) -> Result<Scm> {
    let mut parts = spm_parts(bn)?;
    for v in 0..bn.dag().len() {
        push_node(&mut parts, bn, v, comonotone_states(&bn.cpts()[v].table))?;
    }
    finish(parts)
}

/// Like [`build_spm`], except that `node`'s error follows `coupling`: one
/// error state per positive-mass response vector, looked up by parent row.
pub fn build_spm_copula(bn: &BayesNet, node: &str, coupling: &Coupling) -> Result<Scm> {
    let target = bn.dag().require(node)?;
    if coupling.node != node {
        return Err(Error::Consistency(format!(
            "coupling is for `{}`, not `{node}`",
            coupling.node
        )));
    }
    let rows = &bn.cpts()[target].table;
    let (k, cards) = coupling_shape(rows)?;
    let cells: usize = cards.iter().product();
    if coupling.table.len() != cells {
        return Err(Error::Consistency(format!(
            "coupling for `{node}` needs {cells} cells, got {}",
            coupling.table.len()
        )));
    }
    if coupling.table.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Consistency("coupling has a negative or non-finite cell".into()));
    }
    for (r, row) in rows.iter().enumerate() {
        let m = coupling.row_marginal(rows.len(), k, r);
        if m.iter().zip(row).any(|(a, b)| (a - b).abs() > SUM_TOLERANCE) {
            return Err(Error::Consistency(format!(
                "coupling marginal for parent row {r} of `{node}` is {m:?}, CPT row is {row:?}"
            )));
        }
    }
    let mut parts = spm_parts(bn)?;
    let mut ys = vec![0; cards.len()];
    for v in 0..bn.dag().len() {
        let states = if v == target {
            coupling
                .table
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(cell, &p)| {
                    decode(cell, &cards, &mut ys);
                    (p, ys.clone())
                })
                .collect()
        } else {
            comonotone_states(&bn.cpts()[v].table)
        };
        push_node(&mut parts, bn, v, states)?;
    }
    finish(parts)
}

/// Interval for the probability of causation over all couplings of binary
/// potential responses with `P(Y_0 = 1) = p0`, `P(Y_1 = 1) = p1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcBounds {
    pub lower: f64,
    pub upper: f64,
    /// Couplings attaining the endpoints, `[y0][y1]`.
    pub lower_coupling: [[f64; 2]; 2],
    pub upper_coupling: [[f64; 2]; 2],
}

impl PcBounds {
    /// A coupling `[y0][y1]` flattened into [`Coupling::table`] layout.
    pub fn flatten(c: &[[f64; 2]; 2]) -> Vec<f64> {
        vec![c[0][0], c[0][1], c[1][0], c[1][1]]
    }
}

/// Bounds on `P(Y_0=0, Y_1=1) / P(Y_1=1)` over the Fréchet set of couplings,
/// reading the observational rows `p(Y=1 | X=x)` as the laws of `Y_x`
/// (which presumes `X` exogenous).
///
/// The couplings form a segment; its endpoints are found by zeroing each of
/// the four cells in turn and keeping the feasible completions.
pub fn pc_bounds(p0: f64, p1: f64) -> Result<PcBounds> {
    for (name, p) in [("p(Y=1|X=0)", p0), ("p(Y=1|X=1)", p1)] {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::Validation(format!("{name} must lie in [0, 1], got {p}")));
        }
    }
    if p1 <= 0.0 {
        return Err(Error::Validation("p(Y=1|X=1) must be positive".into()));
    }
    let q0 = 1.0 - p0;
    // Cells [y0][y1]; margins: row sums (1-p0, p0), column sums (1-p1, p1).
    let complete = |zero: usize| -> [[f64; 2]; 2] {
        match zero {
            0 => {
                let b = q0;
                let d = p1 - b;
                [[0.0, b], [p0 - d, d]]
            }
            1 => [[q0, 0.0], [p0 - p1, p1]],
            2 => {
                let b = p1 - p0;
                [[q0 - b, b], [0.0, p0]]
            }
            _ => [[q0 - p1, p1], [p0, 0.0]],
        }
    };
    let feasible = |c: &[[f64; 2]; 2]| c.iter().flatten().all(|&v| v >= -1e-15);
    let clean = |mut c: [[f64; 2]; 2]| {
        c.iter_mut().flatten().for_each(|v| *v = v.max(0.0));
        c
    };
    let vertices: Vec<[[f64; 2]; 2]> = (0..4).map(complete).filter(feasible).map(clean).collect();
    let pc = |c: &[[f64; 2]; 2]| c[0][1] / p1;
    let lo = vertices
        .iter()
        .min_by(|a, b| pc(a).total_cmp(&pc(b)))
        .expect("the Fréchet set is never empty");
    let hi = vertices
        .iter()
        .max_by(|a, b| pc(a).total_cmp(&pc(b)))
        .expect("the Fréchet set is never empty");
    Ok(PcBounds {
        lower: pc(lo).clamp(0.0, 1.0),
        upper: pc(hi).clamp(0.0, 1.0),
        lower_coupling: *lo,
        upper_coupling: *hi,
    })
}

/// Domain nodes of `s` that are descendants of `cause`; used to flag
/// degenerate potential-response queries up front.
pub fn downstream_of(s: &Scm, cause: &str) -> Result<BTreeSet<String>> {
    let c = s.dag.require(cause)?;
    Ok((0..s.dag.len())
        .filter(|&v| v != c && s.dag.node(v).is_domain() && ancestor_mask(&s.dag, &[v])[c])
        .map(|v| s.dag.id(v).to_owned())
        .collect())
}

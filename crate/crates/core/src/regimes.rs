//! Augmented DAGs: regime indicators, extended conditional independence and
//! interventional distributions.
//!
//! A regime node `F_V` has one state per value of its target `V` plus a
//! trailing `idle` state. Regime nodes are never random: they never appear in
//! a [`JointTable`], and every distribution is computed for one
//! [`RegimeAssignment`] at a time. Interventions are surgical, so
//! `F_V = v` forces `V = v`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::bayes::{decode, BayesNet, Cpt, JointTable, POSITIVITY_GUARD};
use crate::ci::{moral_verdict, CiVerdict};
use crate::error::{Error, Result};
use crate::exec::{checked_product, max_cells, Execution};
use crate::graph::{CiQuery, Dag, Node};

/// Setting of one regime indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegimeState {
    Idle,
    /// The target is set to this state index.
    Set(usize),
}

impl RegimeState {
    /// State index in the regime node's own state space (`idle` is last).
    pub fn index(self, target_cardinality: usize) -> usize {
        match self {
            RegimeState::Idle => target_cardinality,
            RegimeState::Set(v) => v,
        }
    }

    pub fn from_index(i: usize, target_cardinality: usize) -> Self {
        if i == target_cardinality {
            RegimeState::Idle
        } else {
            RegimeState::Set(i)
        }
    }
}

impl fmt::Display for RegimeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeState::Idle => f.write_str("idle"),
            RegimeState::Set(v) => write!(f, "{v}"),
        }
    }
}

impl std::str::FromStr for RegimeState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "idle" => Ok(RegimeState::Idle),
            t => t
                .parse::<usize>()
                .map(RegimeState::Set)
                .map_err(|_| Error::Validation(format!("regime value must be `idle` or a state index, got `{t}`"))),
        }
    }
}

impl Serialize for RegimeState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RegimeState::Idle => s.serialize_str("idle"),
            RegimeState::Set(v) => s.serialize_u64(*v as u64),
        }
    }
}

/// One state for every regime node of a graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RegimeAssignment(BTreeMap<String, RegimeState>);

impl RegimeAssignment {
    pub fn new(states: BTreeMap<String, RegimeState>) -> Self {
        RegimeAssignment(states)
    }

    /// Every regime of `g` idle: the observational setting.
    pub fn idle(g: &Dag) -> Self {
        RegimeAssignment(
            g.nodes()
                .iter()
                .filter(|n| n.is_regime())
                .map(|n| (n.id.clone(), RegimeState::Idle))
                .collect(),
        )
    }

    /// The listed regimes set as given, every other regime idle.
    pub fn with(g: &Dag, settings: &[(&str, RegimeState)]) -> Result<Self> {
        let mut r = RegimeAssignment::idle(g);
        for &(id, s) in settings {
            match r.0.get_mut(id) {
                Some(slot) => *slot = s,
                None => return Err(Error::query(format!("`{id}` is not a regime node"))),
            }
        }
        r.validate(g)?;
        Ok(r)
    }

    /// All assignments over the regime nodes of `g`, in lexicographic order
    /// of state indices.
    pub fn all(g: &Dag) -> Vec<Self> {
        let regimes: Vec<&Node> = g.nodes().iter().filter(|n| n.is_regime()).collect();
        let cards: Vec<usize> = regimes.iter().map(|n| n.cardinality).collect();
        let total: usize = cards.iter().product();
        let mut states = vec![0; cards.len()];
        (0..total)
            .map(|cell| {
                decode(cell, &cards, &mut states);
                RegimeAssignment(
                    regimes
                        .iter()
                        .zip(&states)
                        .map(|(n, &s)| (n.id.clone(), RegimeState::from_index(s, n.cardinality - 1)))
                        .collect(),
                )
            })
            .collect()
    }

    pub fn get(&self, regime: &str) -> Option<RegimeState> {
        self.0.get(regime).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, RegimeState)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn validate(&self, g: &Dag) -> Result<()> {
        for (id, state) in &self.0 {
            let node = g
                .node_by_id(id)
                .filter(|n| n.is_regime())
                .ok_or_else(|| Error::query(format!("`{id}` is not a regime node")))?;
            if let RegimeState::Set(v) = state {
                if *v + 1 >= node.cardinality {
                    return Err(Error::query(format!(
                        "state {v} out of range for the target of `{id}`"
                    )));
                }
            }
        }
        if let Some(missing) = g.nodes().iter().find(|n| n.is_regime() && !self.0.contains_key(&n.id)) {
            return Err(Error::query(format!("no state given for regime `{}`", missing.id)));
        }
        Ok(())
    }

    /// Forced state per node of `g`: `Some(v)` for targets of set regimes.
    pub(crate) fn overrides(&self, g: &Dag) -> Result<Vec<Option<usize>>> {
        self.validate(g)?;
        let mut out = vec![None; g.len()];
        for (id, state) in &self.0 {
            if let (RegimeState::Set(v), Some(target)) = (state, g.node_by_id(id).and_then(Node::regime_target)) {
                if let Some(t) = g.index_of(target) {
                    out[t] = Some(*v);
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for RegimeAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(" "))
    }
}

/// ECI query `x ⫫ y | z`: `y` and `z` may contain regime nodes, `x` may not.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EciQuery(CiQuery);

impl EciQuery {
    pub fn new<X, Y, Z>(x: X, y: Y, z: Z) -> Self
    where
        X: IntoIterator,
        X::Item: AsRef<str>,
        Y: IntoIterator,
        Y::Item: AsRef<str>,
        Z: IntoIterator,
        Z::Item: AsRef<str>,
    {
        EciQuery(CiQuery::new(x, y, z))
    }

    pub fn from_ci(q: CiQuery) -> Self {
        EciQuery(q)
    }

    pub fn as_ci(&self) -> &CiQuery {
        &self.0
    }

    pub fn validate(&self, g: &Dag) -> Result<()> {
        self.0.validate(g)?;
        if let Some(r) = self.0.x.iter().find(|id| g.node_by_id(id).is_some_and(Node::is_regime)) {
            return Err(Error::semantic(format!(
                "first argument must be fully stochastic; `{r}` is a regime node"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for EciQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Same moralisation criterion as for ordinary queries, after checking that
/// the first argument is stochastic.
pub fn query_eci(g: &Dag, q: &EciQuery) -> Result<CiVerdict> {
    q.validate(g)?;
    Ok(moral_verdict(g, &q.0.resolve(g)?))
}

/// Conventional name of the regime indicator for `target`.
pub fn regime_name(target: &str) -> String {
    format!("F_{target}")
}

/// Adds `F_V -> V` for every target `V`; the new nodes follow the existing
/// ones, in graph order of their targets.
pub fn augment<I>(g: &Dag, targets: I) -> Result<Dag>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let idx = g.require_all(targets).map_err(|e| match e {
        Error::Query(m) => Error::Semantic(m),
        other => other,
    })?;
    let named: Vec<(usize, String)> = idx.into_iter().map(|t| (t, regime_name(g.id(t)))).collect();
    augment_named(g, &named)
}

fn augment_named(g: &Dag, targets: &[(usize, String)]) -> Result<Dag> {
    let mut nodes = g.nodes().to_vec();
    let mut edges: Vec<(String, String)> = g
        .edges()
        .into_iter()
        .map(|(a, b)| (g.id(a).to_owned(), g.id(b).to_owned()))
        .collect();
    for (t, name) in targets {
        let node = g.node(*t);
        if !node.is_domain() {
            return Err(Error::semantic(format!("only domain nodes can be intervened on, not `{}`", node.id)));
        }
        if let Some(r) = g.regime_of(*t) {
            return Err(Error::semantic(format!("`{}` already has regime indicator `{}`", node.id, g.id(r))));
        }
        if g.contains(name) || nodes.iter().any(|n| &n.id == name) {
            return Err(Error::semantic(format!("cannot add regime `{name}`: id already in use")));
        }
        nodes.push(Node::regime(name.clone(), node.id.clone(), node.cardinality));
        edges.push((name.clone(), node.id.clone()));
    }
    Dag::new(nodes, edges)
}

/// One regime indicator for every domain node.
pub fn pearl_augment(g: &Dag) -> Result<Dag> {
    if g.has_regimes() {
        return Err(Error::semantic("graph is already augmented"));
    }
    let domain: Vec<&str> = g.nodes().iter().filter(|n| n.is_domain()).map(|n| n.id.as_str()).collect();
    augment(g, domain)
}

/// `g` with its regime nodes (and their edges) removed.
pub fn strip_regimes(g: &Dag) -> Dag {
    let keep: Vec<bool> = g.nodes().iter().map(Node::is_stochastic).collect();
    g.induced(&keep)
}

fn regime_parent(g: &Dag, cause: &str) -> Result<String> {
    let c = g.require(cause)?;
    g.regime_of(c)
        .map(|r| g.id(r).to_owned())
        .ok_or_else(|| Error::semantic(format!("`{cause}` has no regime indicator")))
}

/// Graphical ignorability: `effect ⫫ F_cause | cause`.
pub fn check_ignorability<I>(g: &Dag, cause: &str, effect: I) -> Result<bool>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let f = regime_parent(g, cause)?;
    Ok(query_eci(g, &EciQuery::new(effect, [f], [cause]))?.represented)
}

/// Graphical absence of a causal effect: `effect ⫫ F_cause`.
pub fn no_causal_effect<I>(g: &Dag, cause: &str, effect: I) -> Result<bool>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let f = regime_parent(g, cause)?;
    Ok(query_eci(g, &EciQuery::new(effect, [f], [""; 0]))?.represented)
}

/// A Bayesian network whose intervened nodes carry their regime indicator
/// as an extra, last parent: `idle` rows repeat the observational CPT and
/// `set-to-v` rows are point masses at `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedBayesNet {
    dag: Dag,
    observational: BayesNet,
    cpts: Vec<Cpt>,
}

impl AugmentedBayesNet {
    /// Attaches a regime indicator `F_V` to each target `V`.
    pub fn new<I>(observational: BayesNet, targets: I) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let g = observational.dag();
        let idx = g.require_all(targets)?;
        let named: Vec<(usize, String)> = idx.into_iter().map(|t| (t, regime_name(g.id(t)))).collect();
        Self::with_regimes(observational, &named)
    }

    /// Regime indicator on every domain node.
    pub fn pearl(observational: BayesNet) -> Result<Self> {
        let targets: Vec<String> = observational
            .dag()
            .nodes()
            .iter()
            .filter(|n| n.is_domain())
            .map(|n| n.id.clone())
            .collect();
        Self::new(observational, targets)
    }

    /// From an augmented graph plus observational CPTs (which must not list
    /// regime parents), keeping the graph's regime names.
    pub fn from_parts(dag: &Dag, observational_cpts: Vec<Cpt>) -> Result<Self> {
        let observational = BayesNet::new(strip_regimes(dag), observational_cpts)?;
        let og = observational.dag();
        let named: Vec<(usize, String)> = dag
            .nodes()
            .iter()
            .filter_map(|n| {
                let t = n.regime_target()?;
                Some((og.index_of(t)?, n.id.clone()))
            })
            .collect();
        let abn = Self::with_regimes(observational, &named)?;
        if &abn.dag != dag {
            return Err(Error::semantic("augmented graph does not match its regime declarations"));
        }
        Ok(abn)
    }

    fn with_regimes(observational: BayesNet, named: &[(usize, String)]) -> Result<Self> {
        let dag = augment_named(observational.dag(), named)?;
        let mut cpts = observational.cpts().to_vec();
        for (t, name) in named {
            let k = observational.dag().node(*t).cardinality;
            let cpt = &mut cpts[*t];
            cpt.parent_order.push(name.clone());
            let rows = std::mem::take(&mut cpt.table);
            for row in rows {
                for v in 0..k {
                    let mut point = vec![0.0; k];
                    point[v] = 1.0;
                    cpt.table.push(point);
                }
                cpt.table.push(row);
            }
        }
        for cpt in &cpts {
            cpt.validate(&dag)?;
        }
        Ok(AugmentedBayesNet {
            dag,
            observational,
            cpts,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn observational(&self) -> &BayesNet {
        &self.observational
    }

    /// Augmented CPTs, in the order of the observational nodes.
    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    /// The augmented CPTs read as an ordinary network, with each regime node
    /// turned into a uniformly distributed domain node. Conditioning its
    /// joint on a regime assignment recovers that regime's distribution.
    pub fn as_plain_bayes_net(&self) -> Result<BayesNet> {
        let nodes: Vec<Node> = self
            .dag
            .nodes()
            .iter()
            .map(|n| Node::domain(n.id.clone(), n.cardinality))
            .collect();
        let edges: Vec<(String, String)> = self.dag.edge_ids().into_iter().collect();
        let plain = Dag::new(nodes, edges)?;
        let mut cpts = self.cpts.clone();
        for n in self.dag.nodes().iter().filter(|n| n.is_regime()) {
            cpts.push(Cpt::root(n.id.clone(), vec![1.0 / n.cardinality as f64; n.cardinality]));
        }
        BayesNet::new(plain, cpts)
    }
}

/// Joint over the stochastic nodes under `r` by truncated factorisation:
/// intervened nodes contribute a point mass, all others their observational
/// CPT.
pub fn interventional_joint(abn: &AugmentedBayesNet, r: &RegimeAssignment) -> Result<JointTable> {
    interventional_joint_with(abn, r, Execution::default())
}

pub fn interventional_joint_with(abn: &AugmentedBayesNet, r: &RegimeAssignment, exec: Execution) -> Result<JointTable> {
    let forced = r.overrides(&abn.dag)?;
    let bn = &abn.observational;
    let g = bn.dag();
    // Observational node i is augmented node i: regimes are appended.
    let forced: Vec<Option<usize>> = forced[..g.len()].to_vec();
    let cards: Vec<usize> = g.nodes().iter().map(|n| n.cardinality).collect();
    let cells = checked_product(cards.iter().copied(), max_cells())
        .ok_or_else(|| Error::capacity(format!("joint table exceeds {} cells", max_cells())))?;
    let chunks = exec.chunked(cells, |range| {
        let mut states = vec![0; cards.len()];
        range
            .map(|cell| {
                decode(cell, &cards, &mut states);
                (0..cards.len())
                    .map(|v| match forced[v] {
                        Some(s) => f64::from(u8::from(states[v] == s)),
                        None => bn.prob(v, states[v], &states),
                    })
                    .product::<f64>()
            })
            .collect::<Vec<f64>>()
    });
    Ok(JointTable {
        variable_order: g.nodes().iter().map(|n| n.id.clone()).collect(),
        cardinalities: cards,
        probabilities: chunks.concat(),
    })
}

/// Largest violation of an ECI statement across all regime assignments.
///
/// For every assignment the stochastic part `x ⫫ y_s | z_s` is checked in
/// that regime's joint. In addition, regimes listed in `y` must not move the
/// conditional law of `x` given `(y_s, z_s)` while every other regime stays
/// fixed; cells below the positivity guard are skipped.
pub fn eci_deviation(abn: &AugmentedBayesNet, q: &EciQuery) -> Result<f64> {
    let g = &abn.dag;
    q.validate(g)?;
    let q = q.as_ci();
    let is_regime = |id: &String| g.node_by_id(id).is_some_and(Node::is_regime);
    let ys: BTreeSet<String> = q.y.iter().filter(|id| !is_regime(id)).cloned().collect();
    let zs: BTreeSet<String> = q.z.iter().filter(|id| !is_regime(id)).cloned().collect();
    let y_regimes: BTreeSet<&String> = q.y.iter().filter(|id| is_regime(id)).collect();

    let mut worst: f64 = 0.0;
    // Group assignments by everything except the regimes in `y`.
    let mut groups: BTreeMap<Vec<(String, RegimeState)>, Vec<Vec<f64>>> = BTreeMap::new();
    let cond_vars: Vec<&String> = ys.iter().chain(&zs).collect();
    for r in RegimeAssignment::all(g) {
        let joint = interventional_joint(abn, &r)?;
        if !ys.is_empty() {
            worst = worst.max(joint.ci_deviation(&CiQuery::new(&q.x, &ys, &zs))?);
        }
        if y_regimes.is_empty() {
            continue;
        }
        let vars: Vec<&String> = cond_vars.iter().copied().chain(&q.x).collect();
        let m = joint.marginalise(&vars)?;
        let cx: usize = m.cardinalities[cond_vars.len()..].iter().product();
        // p(x | cond) per conditioning cell, NaN where the cell is negligible.
        let conditionals: Vec<f64> = m
            .probabilities
            .chunks(cx)
            .flat_map(|block| {
                let mass: f64 = block.iter().sum();
                block
                    .iter()
                    .map(move |&p| if mass > POSITIVITY_GUARD { p / mass } else { f64::NAN })
            })
            .collect();
        let key = r
            .iter()
            .filter(|(id, _)| !y_regimes.iter().any(|y| y.as_str() == *id))
            .map(|(id, s)| (id.to_owned(), s))
            .collect();
        groups.entry(key).or_default().push(conditionals);
    }
    for members in groups.values() {
        for a in members {
            for b in members {
                for (p, q) in a.iter().zip(b) {
                    if p.is_finite() && q.is_finite() {
                        worst = worst.max((p - q).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Numeric ECI check across all regimes, see [`eci_deviation`].
pub fn holds_eci_in_distribution(abn: &AugmentedBayesNet, q: &EciQuery, tol: f64) -> Result<bool> {
    Ok(eci_deviation(abn, q)? <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ignorability_net() -> BayesNet {
        let g = Dag::builder().vars(["A", "B"]).edge("A", "B").build().unwrap();
        BayesNet::new(
            g,
            vec![
                Cpt::root("A", vec![0.4, 0.6]),
                Cpt::new("B", vec!["A".into()], vec![vec![0.9, 0.1], vec![0.25, 0.75]]),
            ],
        )
        .unwrap()
    }

    fn e(x: &[&str], y: &[&str], z: &[&str]) -> EciQuery {
        EciQuery::new(x, y, z)
    }

    #[test]
    fn augment_examples() {
        let g = ignorability_net().dag().clone();
        let a = augment(&g, ["A"]).unwrap();
        let expect = Dag::builder().vars(["A", "B"]).regime("F_A", "A").edge("A", "B").build().unwrap();
        assert_eq!(a, expect);
        assert_eq!(augment(&g, [""; 0]).unwrap(), g);
        assert!(matches!(augment(&a, ["A"]), Err(Error::Semantic(_))));
        assert!(matches!(pearl_augment(&a), Err(Error::Semantic(_))));
        let single = Dag::builder().vars(["A"]).build().unwrap();
        assert_eq!(pearl_augment(&single).unwrap().edge_count(), 1);
    }

    #[test]
    fn regime_in_first_argument_rejected() {
        let g = augment(ignorability_net().dag(), ["A"]).unwrap();
        let err = query_eci(&g, &e(&["F_A"], &["B"], &["A"])).unwrap_err();
        assert!(err.to_string().contains("fully stochastic"));
        assert!(query_eci(&g, &e(&["B"], &["F_A"], &["A"])).unwrap().represented);
    }

    #[test]
    fn ignorability_and_effect_of_simple_chain() {
        let g = augment(ignorability_net().dag(), ["A"]).unwrap();
        assert!(check_ignorability(&g, "A", ["B"]).unwrap());
        assert!(!no_causal_effect(&g, "A", ["B"]).unwrap());
        assert!(matches!(check_ignorability(&g, "B", ["A"]), Err(Error::Semantic(_))));
    }

    #[test]
    fn idle_regime_is_observational() {
        let bn = ignorability_net();
        let abn = AugmentedBayesNet::new(bn.clone(), ["A"]).unwrap();
        let idle = interventional_joint(&abn, &RegimeAssignment::idle(abn.dag())).unwrap();
        assert_eq!(idle, crate::bayes::joint(&bn).unwrap());
    }

    #[test]
    fn setting_cause_transfers_conditional() {
        let abn = AugmentedBayesNet::new(ignorability_net(), ["A"]).unwrap();
        let r = RegimeAssignment::with(abn.dag(), &[("F_A", RegimeState::Set(1))]).unwrap();
        let j = interventional_joint(&abn, &r).unwrap();
        let b = j.marginalise(["B"]).unwrap();
        assert!((b.probabilities[1] - 0.75).abs() < 1e-15);
        assert_eq!(j.probability(&[("A", 0)]).unwrap(), 0.0);
    }

    #[test]
    fn assignments_enumerate_and_validate() {
        let abn = AugmentedBayesNet::pearl(ignorability_net()).unwrap();
        assert_eq!(RegimeAssignment::all(abn.dag()).len(), 9);
        assert!(RegimeAssignment::with(abn.dag(), &[("F_A", RegimeState::Set(2))]).is_err());
        assert!(RegimeAssignment::with(abn.dag(), &[("A", RegimeState::Idle)]).is_err());
        assert_eq!("idle".parse::<RegimeState>().unwrap(), RegimeState::Idle);
        assert_eq!("1".parse::<RegimeState>().unwrap(), RegimeState::Set(1));
        assert!("x".parse::<RegimeState>().is_err());
    }

    #[test]
    fn augmented_cpt_rows() {
        let abn = AugmentedBayesNet::new(ignorability_net(), ["A"]).unwrap();
        let a = &abn.cpts()[0];
        assert_eq!(a.parent_order, ["F_A"]);
        assert_eq!(a.table, vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.4, 0.6]]);
    }

    #[test]
    fn eci_numeric_check() {
        let abn = AugmentedBayesNet::new(ignorability_net(), ["A"]).unwrap();
        assert!(eci_deviation(&abn, &e(&["B"], &["F_A"], &["A"])).unwrap() < 1e-12);
        assert!(eci_deviation(&abn, &e(&["B"], &["F_A"], &[])).unwrap() > 0.1);
    }
}

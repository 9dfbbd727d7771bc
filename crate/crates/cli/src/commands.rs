use std::collections::BTreeMap;
use std::path::Path;

use cde_core::bayes::{conditional, holds_in_distribution, joint, marginal as bn_marginal};
use cde_core::ci::{enumerate_equivalence_class, markov_equivalent, query_ci_dsep, query_ci_moral, represented_ci_set};
use cde_core::format::{self, fmt_float, parse_query_for, Model, Query, Richness};
use cde_core::generate::{random_bayes_net, random_binary_scm, random_dag, random_query, rng};
use cde_core::graph::{immoralities, skeleton};
use cde_core::regimes::{self, interventional_joint, query_eci, regime_name};
use cde_core::scm::{self, build_spm, build_spm_copula, potential_response_joint, probability_of_causation, spm_joint};
use cde_core::{AugmentedBayesNet, CiVerdict, Coupling, Dag, EciQuery, JointTable, Method, RegimeAssignment, RegimeState};
use serde_json::{json, Value};

use crate::report::{joint_text, load, path_json, usage, Failure, Report};

type Outcome = Result<Report, Failure>;

fn verdict_report(command: &'static str, inputs: Value, v: &CiVerdict, witness: bool) -> Report {
    let mut text = format!("{}\n", v.represented);
    let sep = match v.method {
        Method::Moralisation => " - ",
        Method::DSeparation => " .. ",
    };
    if witness && !v.represented {
        text.push_str(&format!("witness: {}\n", v.witness.join(sep)));
    }
    let mut r = Report::new(command, inputs, json!(v.represented), text);
    if witness {
        r.witness = Some(json!(v.witness));
    }
    r
}

pub fn ci(graph: &Path, query: &str, witness: bool, method: Method) -> Outcome {
    let m = load(graph)?;
    let q = parse_query_for(&m.dag, query).map_err(|e| usage(e.to_string()))?;
    let (command, v) = match method {
        Method::Moralisation => ("ci", query_ci_moral(&m.dag, q.as_ci())?),
        Method::DSeparation => ("dsep", query_ci_dsep(&m.dag, q.as_ci())?),
    };
    let inputs = json!({ "graph": path_json(graph), "query": q.as_ci().to_string() });
    Ok(verdict_report(command, inputs, &v, witness))
}

pub fn eci(graph: &Path, query: &str, witness: bool) -> Outcome {
    let m = load(graph)?;
    let q = match parse_query_for(&m.dag, query).map_err(|e| usage(e.to_string()))? {
        Query::Eci(q) => q,
        Query::Ci(q) => EciQuery::from_ci(q),
    };
    let v = query_eci(&m.dag, &q).map_err(|e| usage(e.to_string()))?;
    let inputs = json!({ "graph": path_json(graph), "query": q.to_string() });
    Ok(verdict_report("eci", inputs, &v, witness))
}

/// Why two graphs are not equivalent: skeleton edges first, then immoralities.
fn equivalence_witness(a: &Dag, b: &Dag) -> Vec<String> {
    let (sa, sb) = (skeleton(a).edges(), skeleton(b).edges());
    let mut out: Vec<String> = sa.difference(&sb).map(|(x, y)| format!("edge {x} - {y} only in first")).collect();
    out.extend(sb.difference(&sa).map(|(x, y)| format!("edge {x} - {y} only in second")));
    if out.is_empty() {
        let (ia, ib) = (immoralities(a), immoralities(b));
        out.extend(ia.difference(&ib).map(|i| format!("immorality {i} only in first")));
        out.extend(ib.difference(&ia).map(|i| format!("immorality {i} only in second")));
    }
    out
}

pub fn equiv(graph: &Path, other: &Path, witness: bool) -> Outcome {
    let (a, b) = (load(graph)?.dag, load(other)?.dag);
    let eq = markov_equivalent(&a, &b).map_err(|e| usage(e.to_string()))?;
    let mut text = format!("{eq}\n");
    let reasons = if eq { Vec::new() } else { equivalence_witness(&a, &b) };
    if witness {
        for r in &reasons {
            text.push_str(&format!("witness: {r}\n"));
        }
    }
    let inputs = json!({ "graph": path_json(graph), "other": path_json(other) });
    let mut r = Report::new("equiv", inputs, json!(eq), text);
    if witness {
        r.witness = Some(json!(reasons));
    }
    Ok(r)
}

pub fn class(graph: &Path) -> Outcome {
    let g = load(graph)?.dag;
    let members = enumerate_equivalence_class(&g)?;
    let mut text = format!("size {}\n", members.len());
    for m in &members {
        text.push_str(&format!("{m}\n"));
    }
    let edges: Vec<Vec<[String; 2]>> = members.iter().map(|m| m.edge_ids().into_iter().map(|(a, b)| [a, b]).collect()).collect();
    let inputs = json!({ "graph": path_json(graph) });
    Ok(Report::new("class", inputs, json!({ "size": members.len(), "members": edges }), text))
}

pub fn augment(graph: &Path, all: bool, targets: &[String], dot: bool) -> Outcome {
    let m = load(graph)?;
    let targets: Vec<String> = if all {
        m.dag.nodes().iter().filter(|n| n.is_domain() && m.dag.regime_of(m.dag.index_of(&n.id).unwrap()).is_none()).map(|n| n.id.clone()).collect()
    } else {
        targets.to_vec()
    };
    let dag = regimes::augment(&m.dag, &targets).map_err(|e| usage(e.to_string()))?;
    let scm = m.scm.as_ref().map(|s| s.augment(&targets)).transpose()?;
    let out = Model {
        dag: dag.clone(),
        bayes: m.bayes.clone(),
        augmented: None,
        scm,
    };
    let text = if dot { format::to_dot(&dag) } else { format::write_model(&out) };
    let inputs = json!({ "graph": path_json(graph), "targets": targets });
    Ok(Report::new("augment", inputs, json!({ "model": format::write_model(&out) }), text))
}

fn parse_assignment(s: &str) -> Result<(&str, &str), Failure> {
    s.split_once('=')
        .map(|(a, b)| (a.trim(), b.trim()))
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| usage(format!("expected NAME=VALUE, got `{s}`")))
}

/// Resolves `--set` entries against `g`: the regime settings, keyed by
/// indicator id, and the targets whose indicators must still be added.
fn regime_settings(g: &Dag, sets: &[String]) -> Result<(Vec<(String, RegimeState)>, Vec<String>), Failure> {
    let mut settings = Vec::new();
    let mut missing = Vec::new();
    for s in sets {
        let (name, value) = parse_assignment(s)?;
        let state: RegimeState = value.parse()?;
        let domain_target = |t: &str| g.node_by_id(t).filter(|n| n.is_domain()).map(|n| n.id.clone());
        let regime = match g.node_by_id(name) {
            Some(n) if n.is_regime() => name.to_owned(),
            Some(n) if n.is_domain() => match g.regime_of(g.index_of(name).unwrap()) {
                Some(r) => g.id(r).to_owned(),
                None => {
                    missing.push(name.to_owned());
                    regime_name(name)
                }
            },
            Some(_) => return Err(usage(format!("`{name}` is an error node and cannot be intervened on"))),
            None => match name.strip_prefix("F_").and_then(domain_target) {
                Some(t) if g.regime_of(g.index_of(&t).unwrap()).is_none() => {
                    missing.push(t);
                    name.to_owned()
                }
                _ => return Err(usage(format!("unknown regime or node `{name}`"))),
            },
        };
        if settings.iter().any(|(r, _): &(String, RegimeState)| *r == regime) {
            return Err(usage(format!("`{regime}` set more than once")));
        }
        settings.push((regime, state));
    }
    Ok((settings, missing))
}

fn assignment(g: &Dag, settings: &[(String, RegimeState)]) -> Result<RegimeAssignment, Failure> {
    let mut states: BTreeMap<String, RegimeState> =
        g.nodes().iter().filter(|n| n.is_regime()).map(|n| (n.id.clone(), RegimeState::Idle)).collect();
    for (r, s) in settings {
        states.insert(r.clone(), *s);
    }
    let ra = RegimeAssignment::new(states);
    ra.validate(g)?;
    Ok(ra)
}

fn keep(j: JointTable, vars: &[String]) -> Result<JointTable, Failure> {
    if vars.is_empty() {
        Ok(j)
    } else {
        Ok(j.marginalise(vars)?)
    }
}

pub fn intervene(graph: &Path, set: &[String], vars: &[String]) -> Outcome {
    let m = load(graph)?;
    let (settings, missing) = regime_settings(&m.dag, set)?;
    let dag = regimes::augment(&m.dag, &missing).map_err(|e| usage(e.to_string()))?;
    let ra = assignment(&dag, &settings)?;
    let j = match (&m.bayes, &m.scm) {
        (Some(bn), _) if !dag.has_regimes() => joint(bn)?,
        (Some(bn), _) => interventional_joint(&AugmentedBayesNet::from_parts(&dag, bn.cpts().to_vec())?, &ra)?,
        (None, Some(s)) => spm_joint(&s.augment(&missing)?, &ra)?,
        (None, None) => return Err(usage(format!("intervene needs CPTs or structural functions; {} declares only a graph", graph.display()))),
    };
    let j = keep(j, vars)?;
    let inputs = json!({ "graph": path_json(graph), "regimes": ra, "vars": vars });
    Ok(Report::new("intervene", inputs, j.to_json(), joint_text(&j)))
}

pub fn marginal(graph: &Path, vars: &[String], given: &[String]) -> Outcome {
    let m = load(graph)?;
    let mut evidence: Vec<(&str, usize)> = Vec::new();
    for g in given {
        let (v, s) = parse_assignment(g)?;
        let s = s.parse().map_err(|_| usage(format!("state of `{v}` must be a non-negative integer, got `{s}`")))?;
        evidence.push((v, s));
    }
    let j = match m.richness() {
        Richness::Scm if m.bayes.is_none() => {
            let s = m.scm.as_ref().unwrap();
            let obs = spm_joint(s, &RegimeAssignment::idle(s.dag()))?;
            let cond = if evidence.is_empty() { obs } else { obs.condition(&evidence)? };
            cond.marginalise(vars)?
        }
        _ => {
            let bn = m.require_bayes("marginal").map_err(|e| usage(e.to_string()))?;
            if evidence.is_empty() {
                bn_marginal(bn, vars)?
            } else {
                conditional(bn, vars, &evidence)?
            }
        }
    };
    let inputs = json!({ "graph": path_json(graph), "vars": vars, "given": given });
    Ok(Report::new("marginal", inputs, j.to_json(), joint_text(&j)))
}

pub fn pc(graph: &Path, cause: &str, outcome: &str) -> Outcome {
    let m = load(graph)?;
    let s = m.require_scm("pc").map_err(|e| usage(e.to_string()))?;
    let v = probability_of_causation(s, cause, outcome)?;
    let inputs = json!({ "graph": path_json(graph), "cause": cause, "outcome": outcome });
    Ok(Report::new("pc", inputs, json!(v), format!("pc={}\n", fmt_float(v))))
}

pub const BOUNDS_ASSUMPTION: &str =
    "assuming ignorability: p(Y=1 | X=x) is read as P(Y_x = 1); the coupling of Y_0 and Y_1 is unconstrained";

pub fn pc_bounds(p0: f64, p1: f64) -> Outcome {
    let b = scm::pc_bounds(p0, p1)?;
    let text = format!("{BOUNDS_ASSUMPTION}\nlower={} upper={}\n", fmt_float(b.lower), fmt_float(b.upper));
    let inputs = json!({ "p0": p0, "p1": p1 });
    let result = json!({
        "lower": b.lower,
        "upper": b.upper,
        "lower_coupling": b.lower_coupling,
        "upper_coupling": b.upper_coupling,
        "assumption": BOUNDS_ASSUMPTION,
    });
    Ok(Report::new("pc-bounds", inputs, result, text))
}

pub fn spm_from_bn(graph: &Path, node: Option<&str>, coupling: Option<&str>) -> Outcome {
    let m = load(graph)?;
    let bn = m.require_bayes("spm-from-bn").map_err(|e| usage(e.to_string()))?;
    let s = match (node, coupling) {
        (Some(v), Some(kind)) => {
            let c = if kind == "comonotone" { Coupling::comonotone(bn, v)? } else { Coupling::independent(bn, v)? };
            build_spm_copula(bn, v, &c)?
        }
        _ => build_spm(bn)?,
    };
    let text = format::write_model(&Model {
        dag: s.dag().clone(),
        bayes: None,
        augmented: None,
        scm: Some(s),
    });
    let inputs = json!({ "graph": path_json(graph), "node": node, "coupling": coupling });
    Ok(Report::new("spm-from-bn", inputs, json!({ "model": text }), text))
}

pub fn counterfactual(graph: &Path, cause: &str, outcome: &str) -> Outcome {
    let m = load(graph)?;
    let s = m.require_scm("counterfactual").map_err(|e| usage(e.to_string()))?;
    let prj = potential_response_joint(s, cause, outcome)?;
    let (k, c) = (prj.cause_cardinality, prj.outcome_cardinality);
    let mut text = String::new();
    if prj.degenerate {
        text.push_str(&format!("note: {cause} is not an ancestor of {outcome}; every response coincides\n"));
    }
    let mut ys = vec![0; k];
    for (cell, p) in prj.table.iter().enumerate() {
        let mut rest = cell;
        for i in (0..k).rev() {
            ys[i] = rest % c;
            rest /= c;
        }
        let parts: Vec<String> = ys.iter().enumerate().map(|(x, y)| format!("{outcome}[{cause}={x}]={y}")).collect();
        text.push_str(&format!("{} {}\n", parts.join(" "), fmt_float(*p)));
    }
    let inputs = json!({ "graph": path_json(graph), "cause": cause, "outcome": outcome });
    Ok(Report::new("counterfactual", inputs, serde_json::to_value(&prj).expect("serialisable"), text))
}

struct Check {
    name: &'static str,
    cases: usize,
    failure: Option<String>,
}

fn self_checks(seed: u64, count: usize) -> Result<Vec<Check>, Failure> {
    let mut checks = Vec::new();

    let mut failure = None;
    let mut cases = 0;
    'outer: for i in 0..count as u64 {
        let mut r = rng(seed.wrapping_add(i));
        let g = random_dag(&mut r, 7, 0.3);
        for _ in 0..20 {
            let q = random_query(&mut r, &g);
            cases += 1;
            if query_ci_moral(&g, &q)?.represented != query_ci_dsep(&g, &q)?.represented {
                failure = Some(format!("{g}: {q}"));
                break 'outer;
            }
        }
    }
    checks.push(Check { name: "moralisation agrees with d-separation", cases, failure });

    let mut failure = None;
    let mut cases = 0;
    'outer: for i in 0..count as u64 {
        let bn = random_bayes_net(&mut rng(seed.wrapping_add(i)), 5, 3, 0.4);
        for q in represented_ci_set(bn.dag(), 5)? {
            cases += 1;
            if !holds_in_distribution(&bn, &q, 1e-9)? {
                failure = Some(format!("{}: {q}", bn.dag()));
                break 'outer;
            }
        }
    }
    checks.push(Check { name: "represented independences hold numerically", cases, failure });

    let mut failure = None;
    for i in 0..count as u64 {
        let bn = random_bayes_net(&mut rng(seed.wrapping_add(i)), 4, 3, 0.5);
        let s = build_spm(&bn)?;
        let d = spm_joint(&s, &RegimeAssignment::idle(s.dag()))?.max_abs_diff(&joint(&bn)?)?;
        if d > 1e-9 {
            failure = Some(format!("{}: off by {d:e}", bn.dag()));
            break;
        }
    }
    checks.push(Check { name: "structural model reproduces the network", cases: count, failure });

    let mut failure = None;
    for i in 0..count as u64 {
        let s = random_binary_scm(&mut rng(seed.wrapping_add(i)));
        let pc = probability_of_causation(&s, "X", "Y")?;
        let obs = spm_joint(&s, &RegimeAssignment::idle(s.dag()))?;
        let p = |x: usize| -> Result<f64, Failure> { Ok(obs.condition(&[("X", x)])?.marginalise(["Y"])?.get(&[1])) };
        let b = scm::pc_bounds(p(0)?, p(1)?)?;
        if pc < b.lower - 1e-9 || pc > b.upper + 1e-9 {
            failure = Some(format!("pc {pc} outside [{}, {}]", b.lower, b.upper));
            break;
        }
    }
    checks.push(Check { name: "probability of causation lies within its bounds", cases: count, failure });
    Ok(checks)
}

fn describe(m: &Model) -> String {
    let kind = match m.richness() {
        Richness::Graph => "graph",
        Richness::BayesNet => "bayes-net",
        Richness::Scm => "structural model",
    };
    let regimes = m.dag.nodes().iter().filter(|n| n.is_regime()).count();
    format!("{kind}, {} nodes ({regimes} regime), {} edges", m.dag.len(), m.dag.edge_count())
}

pub fn validate(graph: Option<&Path>, seed: u64, count: usize) -> Outcome {
    let mut text = String::new();
    let mut model = Value::Null;
    if let Some(path) = graph {
        let m = load(path)?;
        let d = describe(&m);
        text.push_str(&format!("{}: {d}\n", path.display()));
        let round = format::parse_model(&format::write_model(&m))?;
        if round != m {
            return Err(Failure::Eval(format!("{}: model does not survive a write/parse round trip", path.display())));
        }
        model = json!(d);
    }
    let checks = self_checks(seed, count)?;
    let passed = checks.iter().all(|c| c.failure.is_none());
    for c in &checks {
        match &c.failure {
            None => text.push_str(&format!("ok   {} ({} cases)\n", c.name, c.cases)),
            Some(f) => text.push_str(&format!("FAIL {}: {f}\n", c.name)),
        }
    }
    text.push_str(&format!("{passed}\n"));
    let result = json!({
        "passed": passed,
        "model": model,
        "checks": checks.iter().map(|c| json!({ "name": c.name, "cases": c.cases, "failure": c.failure })).collect::<Vec<_>>(),
    });
    let inputs = json!({ "graph": graph.map(path_json), "seed": seed, "count": count });
    if !passed {
        print!("{text}");
        return Err(Failure::Eval("self-checks failed".into()));
    }
    Ok(Report::new("validate", inputs, result, text))
}

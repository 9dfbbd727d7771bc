//! Line-oriented text format for graphs, CPTs and structural functions.
//!
//! ```text
//! # comments run to end of line
//! var X states=3          # default 2 states
//! error E_Y states=4
//! regime F_X targets X    # implies edge F_X -> X
//! edge X -> Y
//! cpt X : 0.2,0.3,0.5     # root: one row
//! cpt Y | X,E_Y : ...     # rows by parent state, last parent fastest
//! fn Y | X,E_Y : 0,1,...  # output state per parent row
//! errdist E_Y : 0.25,0.25,0.25,0.25
//! ```
//!
//! A file is a bare graph, a Bayesian network (a `cpt` for every domain and
//! error node) or a structural model (an `fn` for every domain node and an
//! `errdist` for every error node).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::bayes::{BayesNet, Cpt};
use crate::error::{Error, Result};
use crate::graph::{CiQuery, Dag, NodeKind};
use crate::regimes::{AugmentedBayesNet, EciQuery};
use crate::scm::{ErrorSpec, Scm, StructuralFunction};

/// How much of a probabilistic model a file declares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Richness {
    Graph,
    BayesNet,
    Scm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub dag: Dag,
    /// Observational network over the non-regime nodes.
    pub bayes: Option<BayesNet>,
    /// Present when the graph has regime nodes and CPTs are complete.
    pub augmented: Option<AugmentedBayesNet>,
    pub scm: Option<Scm>,
}

impl Model {
    pub fn richness(&self) -> Richness {
        if self.scm.is_some() {
            Richness::Scm
        } else if self.bayes.is_some() {
            Richness::BayesNet
        } else {
            Richness::Graph
        }
    }

    pub fn require_bayes(&self, what: &str) -> Result<&BayesNet> {
        self.bayes
            .as_ref()
            .ok_or_else(|| Error::semantic(format!("{what} needs CPTs for every node; the file declares a {}", self.describe())))
    }

    pub fn require_scm(&self, what: &str) -> Result<&Scm> {
        self.scm.as_ref().ok_or_else(|| {
            Error::semantic(format!(
                "{what} needs structural functions and error distributions; the file declares a {}",
                self.describe()
            ))
        })
    }

    fn describe(&self) -> &'static str {
        match self.richness() {
            Richness::Graph => "bare graph",
            Richness::BayesNet => "Bayesian network",
            Richness::Scm => "structural model",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    Comma,
    Colon,
    Bar,
    Arrow,
}

/// Tokens with their 1-based columns.
fn lex(line: &str) -> Vec<(usize, Tok<'_>)> {
    let mut out = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let col = line[..i].chars().count() + 1;
        match bytes[i] {
            b if b.is_ascii_whitespace() => i += 1,
            b',' => {
                out.push((col, Tok::Comma));
                i += 1;
            }
            b':' => {
                out.push((col, Tok::Colon));
                i += 1;
            }
            b'|' => {
                out.push((col, Tok::Bar));
                i += 1;
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                out.push((col, Tok::Arrow));
                i += 2;
            }
            _ => {
                let start = i;
                while i < bytes.len() {
                    let b = bytes[i];
                    if b.is_ascii_whitespace() || matches!(b, b',' | b':' | b'|') {
                        break;
                    }
                    if b == b'-' && bytes.get(i + 1) == Some(&b'>') {
                        break;
                    }
                    i += 1;
                }
                out.push((col, Tok::Word(&line[start..i])));
            }
        }
    }
    out
}

struct Line<'a> {
    no: usize,
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
    end: usize,
}

impl<'a> Line<'a> {
    fn err(&self, column: usize, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.no,
            column,
            message: message.into(),
        }
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn peek(&self) -> Option<&Tok<'a>> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn next_word(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.toks.get(self.pos) {
            Some(&(c, Tok::Word(w))) => {
                self.pos += 1;
                Ok((c, w))
            }
            _ => Err(self.err(self.col(), format!("expected {what}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let (c, w) = self.next_word(what)?;
        if !w.chars().all(|ch| ch.is_alphanumeric() || ch == '_' || ch == '\'') {
            return Err(self.err(c, format!("invalid identifier `{w}`")));
        }
        Ok((c, w))
    }

    fn expect(&mut self, tok: Tok<'static>, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(self.col(), format!("expected {what}")))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let (c, w) = self.next_word(&format!("`{kw}`"))?;
        if w != kw {
            return Err(self.err(c, format!("expected `{kw}`, found `{w}`")));
        }
        Ok(())
    }

    fn done(&self) -> Result<()> {
        match self.toks.get(self.pos) {
            None => Ok(()),
            Some((c, _)) => Err(self.err(*c, "unexpected trailing input")),
        }
    }

    /// Comma-separated words, possibly empty when `allow_empty`.
    fn list(&mut self, allow_empty: bool, what: &str) -> Result<Vec<(usize, &'a str)>> {
        let mut out = Vec::new();
        if allow_empty && !matches!(self.peek(), Some(Tok::Word(_))) {
            return Ok(out);
        }
        loop {
            out.push(self.next_word(what)?);
            if self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
            } else {
                return Ok(out);
            }
        }
    }

    /// Optional `states=<k>`.
    fn states(&mut self) -> Result<usize> {
        if self.peek().is_none() {
            return Ok(2);
        }
        let (c, w) = self.next_word("`states=<k>`")?;
        let k = w
            .strip_prefix("states=")
            .ok_or_else(|| self.err(c, format!("expected `states=<k>`, found `{w}`")))?;
        let k: usize = k
            .parse()
            .map_err(|_| self.err(c + 7, format!("invalid state count `{k}`")))?;
        if k < 2 {
            return Err(self.err(c + 7, "a variable needs at least 2 states"));
        }
        Ok(k)
    }

    /// `[| parents] : values`.
    fn table(&mut self) -> Result<(Vec<(usize, &'a str)>, usize, Vec<(usize, &'a str)>)> {
        let parents = if self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            self.list(true, "parent id")?
        } else {
            Vec::new()
        };
        self.expect(Tok::Colon, "`:` before the table")?;
        let col = self.col();
        let values = self.list(false, "table entry")?;
        Ok((parents, col, values))
    }
}

enum Decl {
    Var(String, usize),
    Err(String, usize),
    Regime(String, String),
}

struct TableDecl {
    line: usize,
    node: String,
    parents: Vec<String>,
    values: Vec<String>,
    cols: Vec<usize>,
}

fn sem(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::semantic(format!("line {line}: {msg}"))
}

/// Parses a model file, returning the richest structure its declarations
/// support.
pub fn parse_model(text: &str) -> Result<Model> {
    let mut decls: Vec<(usize, Decl)> = Vec::new();
    let mut edges: Vec<(usize, String, String)> = Vec::new();
    let mut cpts: BTreeMap<String, TableDecl> = BTreeMap::new();
    let mut fns: BTreeMap<String, TableDecl> = BTreeMap::new();
    let mut dists: BTreeMap<String, TableDecl> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let toks = lex(body);
        if toks.is_empty() {
            continue;
        }
        let mut l = Line {
            no,
            toks,
            pos: 0,
            end: body.chars().count() + 1,
        };
        let (kc, kw) = l.next_word("a declaration")?;
        match kw {
            "var" | "error" => {
                let (_, id) = l.ident("node id")?;
                let k = l.states()?;
                l.done()?;
                let d = if kw == "var" { Decl::Var(id.into(), k) } else { Decl::Err(id.into(), k) };
                decls.push((no, d));
            }
            "regime" => {
                let (_, id) = l.ident("regime id")?;
                l.keyword("targets")?;
                let (_, t) = l.ident("target id")?;
                l.done()?;
                decls.push((no, Decl::Regime(id.into(), t.into())));
            }
            "edge" => {
                let (_, a) = l.ident("source id")?;
                l.expect(Tok::Arrow, "`->`")?;
                let (_, b) = l.ident("target id")?;
                l.done()?;
                edges.push((no, a.into(), b.into()));
            }
            "cpt" | "fn" | "errdist" => {
                let (_, id) = l.ident("node id")?;
                let (parents, _, values) = l.table()?;
                if kw == "errdist" && !parents.is_empty() {
                    return Err(l.err(parents[0].0, "an error distribution has no parents"));
                }
                l.done()?;
                let decl = TableDecl {
                    line: no,
                    node: id.into(),
                    parents: parents.iter().map(|p| p.1.to_owned()).collect(),
                    cols: values.iter().map(|v| v.0).collect(),
                    values: values.iter().map(|v| v.1.to_owned()).collect(),
                };
                let map = match kw {
                    "cpt" => &mut cpts,
                    "fn" => &mut fns,
                    _ => &mut dists,
                };
                if let Some(prev) = map.insert(id.into(), decl) {
                    return Err(sem(no, format!("`{kw} {id}` repeats line {}", prev.line)));
                }
            }
            other => return Err(l.err(kc, format!("unknown declaration `{other}`"))),
        }
    }

    let dag = build_dag(&decls, &edges)?;
    for (map, kw) in [(&cpts, "cpt"), (&fns, "fn"), (&dists, "errdist")] {
        for t in map.values() {
            if !dag.contains(&t.node) {
                return Err(sem(t.line, format!("`{kw}` for undeclared node `{}`", t.node)));
            }
        }
    }
    for (id, t) in &cpts {
        if let Some(f) = fns.get(id).or_else(|| dists.get(id)) {
            return Err(sem(
                t.line.max(f.line),
                format!("`{id}` has both a CPT and a structural declaration"),
            ));
        }
    }

    let mut model = Model {
        dag,
        bayes: None,
        augmented: None,
        scm: None,
    };
    if !cpts.is_empty() {
        let parsed = build_cpts(&model.dag, &cpts)?;
        if model.dag.has_regimes() {
            let abn = AugmentedBayesNet::from_parts(&model.dag, parsed)?;
            model.bayes = Some(abn.observational().clone());
            model.augmented = Some(abn);
        } else {
            model.bayes = Some(BayesNet::new(model.dag.clone(), parsed)?);
        }
    }
    if !fns.is_empty() || !dists.is_empty() {
        model.scm = Some(build_scm(&model.dag, &fns, &dists)?);
    }
    Ok(model)
}

/// Parses a file and returns its graph.
pub fn parse_dag(text: &str) -> Result<Dag> {
    parse_model(text).map(|m| m.dag)
}

fn build_dag(decls: &[(usize, Decl)], edges: &[(usize, String, String)]) -> Result<Dag> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (no, d) in decls {
        let id = match d {
            Decl::Var(id, _) | Decl::Err(id, _) | Decl::Regime(id, _) => id.as_str(),
        };
        if let Some(prev) = seen.insert(id, *no) {
            return Err(sem(*no, format!("node `{id}` already declared on line {prev}")));
        }
    }
    for (no, d) in decls {
        if let Decl::Regime(id, t) = d {
            if !seen.contains_key(t.as_str()) {
                return Err(sem(*no, format!("regime `{id}` targets undeclared node `{t}`")));
            }
        }
    }
    for (no, a, b) in edges {
        for id in [a, b] {
            if !seen.contains_key(id.as_str()) {
                return Err(sem(*no, format!("edge references undeclared node `{id}`")));
            }
        }
    }
    let mut builder = Dag::builder();
    for (_, d) in decls {
        builder = match d {
            Decl::Var(id, k) => builder.var(id, *k),
            Decl::Err(id, k) => builder.error(id, *k),
            Decl::Regime(id, t) => builder.regime(id, t),
        };
    }
    builder.edges(edges.iter().map(|(_, a, b)| (a.clone(), b.clone()))).build()
}

fn numbers<T: std::str::FromStr>(t: &TableDecl, what: &str) -> Result<Vec<T>> {
    t.values
        .iter()
        .zip(&t.cols)
        .map(|(v, &c)| {
            v.parse().map_err(|_| Error::Syntax {
                line: t.line,
                column: c,
                message: format!("invalid {what} `{v}`"),
            })
        })
        .collect()
}

fn build_cpts(dag: &Dag, cpts: &BTreeMap<String, TableDecl>) -> Result<Vec<Cpt>> {
    let mut out = Vec::new();
    for n in dag.nodes() {
        match (&n.kind, cpts.get(&n.id)) {
            (NodeKind::Regime { .. }, Some(t)) => {
                return Err(sem(t.line, format!("regime `{}` cannot have a CPT", n.id)));
            }
            (NodeKind::Regime { .. }, None) => {}
            (_, None) => return Err(Error::semantic(format!("incomplete CPTs: `{}` has none", n.id))),
            (_, Some(t)) => {
                let probs: Vec<f64> = numbers(t, "probability")?;
                let k = n.cardinality;
                if probs.len() % k != 0 {
                    return Err(sem(
                        t.line,
                        format!("`{}` has {k} states but the table has {} entries", n.id, probs.len()),
                    ));
                }
                let table = probs.chunks(k).map(<[f64]>::to_vec).collect();
                out.push(Cpt::new(n.id.clone(), t.parents.clone(), table));
            }
        }
    }
    Ok(out)
}

fn build_scm(dag: &Dag, fns: &BTreeMap<String, TableDecl>, dists: &BTreeMap<String, TableDecl>) -> Result<Scm> {
    let mut functions = Vec::new();
    let mut errors = Vec::new();
    for n in dag.nodes() {
        match n.kind {
            NodeKind::Domain => {
                let t = fns
                    .get(&n.id)
                    .ok_or_else(|| Error::semantic(format!("incomplete structural functions: `{}` has none", n.id)))?;
                functions.push(StructuralFunction::new(n.id.clone(), t.parents.clone(), numbers(t, "state")?));
            }
            NodeKind::Error => {
                let t = dists
                    .get(&n.id)
                    .ok_or_else(|| Error::semantic(format!("incomplete error distributions: `{}` has none", n.id)))?;
                errors.push(ErrorSpec::new(n.id.clone(), numbers(t, "probability")?));
            }
            NodeKind::Regime { .. } => {}
        }
    }
    for (map, kw, ok) in [(fns, "fn", true), (dists, "errdist", false)] {
        for t in map.values() {
            let n = dag.node_by_id(&t.node).expect("checked above");
            if n.is_domain() != ok || n.is_regime() {
                return Err(sem(t.line, format!("`{kw}` does not apply to `{}`", t.node)));
            }
        }
    }
    Scm::new(dag.clone(), errors, functions)
}

/// Deterministic text for a model; [`parse_model`] reads it back to an
/// identical structure.
pub fn write_model(m: &Model) -> String {
    let mut s = write_dag(&m.dag);
    if let Some(bn) = &m.bayes {
        for c in bn.cpts() {
            let probs: Vec<String> = c.table.iter().flatten().map(|p| p.to_string()).collect();
            table_line(&mut s, "cpt", &c.node, &c.parent_order, &probs);
        }
    }
    if let Some(scm) = &m.scm {
        for f in scm.functions() {
            let v: Vec<String> = f.table.iter().map(usize::to_string).collect();
            table_line(&mut s, "fn", &f.node, &f.parent_order, &v);
        }
        for e in scm.errors() {
            let v: Vec<String> = e.probabilities.iter().map(|p| p.to_string()).collect();
            table_line(&mut s, "errdist", &e.node, &[], &v);
        }
    }
    s
}

fn table_line(s: &mut String, kw: &str, node: &str, parents: &[String], values: &[String]) {
    if parents.is_empty() {
        let _ = writeln!(s, "{kw} {node} : {}", values.join(","));
    } else {
        let _ = writeln!(s, "{kw} {node} | {} : {}", parents.join(","), values.join(","));
    }
}

pub fn write_dag(g: &Dag) -> String {
    let mut s = String::new();
    for n in g.nodes() {
        let _ = match &n.kind {
            NodeKind::Domain if n.cardinality == 2 => writeln!(s, "var {}", n.id),
            NodeKind::Domain => writeln!(s, "var {} states={}", n.id, n.cardinality),
            NodeKind::Error => writeln!(s, "error {} states={}", n.id, n.cardinality),
            NodeKind::Regime { target } => writeln!(s, "regime {} targets {target}", n.id),
        };
    }
    for (a, b) in g.edges() {
        if !g.node(a).is_regime() {
            let _ = writeln!(s, "edge {} -> {}", g.id(a), g.id(b));
        }
    }
    s
}

/// Graphviz export.
pub fn to_dot(g: &Dag) -> String {
    let mut s = String::from("digraph {\n");
    for n in g.nodes() {
        let shape = match n.kind {
            NodeKind::Domain => "ellipse",
            NodeKind::Error => "plaintext",
            NodeKind::Regime { .. } => "box",
        };
        let _ = writeln!(s, "  \"{}\" [shape={shape}];", n.id);
    }
    for (a, b) in g.edges() {
        let _ = writeln!(s, "  \"{}\" -> \"{}\";", g.id(a), g.id(b));
    }
    s.push_str("}\n");
    s
}

/// A parsed query, classified against a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    Ci(CiQuery),
    Eci(EciQuery),
}

impl Query {
    pub fn as_ci(&self) -> &CiQuery {
        match self {
            Query::Ci(q) => q,
            Query::Eci(q) => q.as_ci(),
        }
    }
}

/// Parses `X1,X2 _||_ Y1,Y2 | Z1,Z2` (the `| Z` part optional; `⫫` is
/// accepted for `_||_`). Columns in diagnostics are 1-based, line 1.
pub fn parse_query(text: &str) -> Result<CiQuery> {
    let syntax = |column: usize, message: String| Error::Syntax {
        line: 1,
        column,
        message,
    };
    let col_of = |byte: usize| text[..byte].chars().count() + 1;
    let (sep, sep_len) = match (text.find("_||_"), text.find('⫫')) {
        (Some(i), None) => (i, 4),
        (None, Some(i)) => (i, '⫫'.len_utf8()),
        (Some(i), Some(j)) => return Err(syntax(col_of(i.max(j)), "more than one independence sign".into())),
        (None, None) => return Err(syntax(1, "expected `X _||_ Y | Z`".into())),
    };
    let rest = sep + sep_len;
    if text[rest..].contains("_||_") || text[rest..].contains('⫫') {
        return Err(syntax(col_of(rest), "more than one independence sign".into()));
    }
    let (y_end, z_start) = match text[rest..].find('|') {
        Some(i) => (rest + i, Some(rest + i + 1)),
        None => (text.len(), None),
    };
    if let Some(z) = z_start {
        if let Some(i) = text[z..].find('|') {
            return Err(syntax(col_of(z + i), "more than one `|`".into()));
        }
    }
    let list = |from: usize, to: usize, allow_empty: bool| -> Result<Vec<String>> {
        let part = &text[from..to];
        if part.trim().is_empty() {
            return if allow_empty {
                Ok(Vec::new())
            } else {
                Err(syntax(col_of(from), "expected at least one variable".into()))
            };
        }
        let mut out = Vec::new();
        let mut off = from;
        for item in part.split(',') {
            let id = item.trim();
            let lead = item.len() - item.trim_start().len();
            if id.is_empty() || !id.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '\'') {
                return Err(syntax(col_of(off + lead), format!("invalid variable `{id}`")));
            }
            out.push(id.to_owned());
            off += item.len() + 1;
        }
        Ok(out)
    };
    let x = list(0, sep, false)?;
    let y = list(rest, y_end, false)?;
    let z = match z_start {
        Some(z) => list(z, text.len(), true)?,
        None => Vec::new(),
    };
    let q = CiQuery::new(x, y, z);
    q.check_shape()?;
    Ok(q)
}

/// Parses a query and validates it against `g`; queries mentioning a regime
/// node are extended (ECI) queries.
pub fn parse_query_for(g: &Dag, text: &str) -> Result<Query> {
    let q = parse_query(text)?;
    q.validate(g)?;
    let regime = q.mentioned().iter().any(|id| g.node_by_id(id).is_some_and(|n| n.is_regime()));
    if regime {
        let e = EciQuery::from_ci(q);
        e.validate(g)?;
        Ok(Query::Eci(e))
    } else {
        Ok(Query::Ci(q))
    }
}

/// Formats `x` to 12 significant digits, always with a decimal point.
pub fn fmt_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("valid float");
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    if rounded != 0.0 && rounded.abs() < 1e-6 {
        return format!("{rounded:e}");
    }
    let s = rounded.to_string();
    if s.contains('.') {
        s
    } else {
        s + ".0"
    }
}

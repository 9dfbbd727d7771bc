//! Seeded random models and exhaustive graph enumeration for tests and
//! benchmarks. Every generator is a pure function of its RNG state.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bayes::{BayesNet, Cpt};
use crate::graph::{CiQuery, Dag, Node};
use crate::scm::{ErrorSpec, Scm, StructuralFunction};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `V0, V1, ..`
pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("V{i}")).collect()
}

/// Random DAG over `V0..V{n-1}`: a random topological order, each forward
/// pair joined with probability `density`.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, density: f64) -> Dag {
    random_dag_with_cards(rng, &vec![2; n], density)
}

pub fn random_dag_with_cards<R: Rng>(rng: &mut R, cards: &[usize], density: f64) -> Dag {
    let ids = names(cards.len());
    let mut order: Vec<usize> = (0..cards.len()).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if rng.gen_bool(density) {
                edges.push((ids[order[i]].clone(), ids[order[j]].clone()));
            }
        }
    }
    let nodes = ids.iter().zip(cards).map(|(id, &k)| Node::domain(id.clone(), k)).collect();
    Dag::new(nodes, edges).expect("forward edges are acyclic")
}

/// A point drawn uniformly from the `k`-simplex.
pub fn simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Random strictly positive CPTs for every node of `g`.
pub fn random_cpts<R: Rng>(rng: &mut R, g: &Dag) -> Vec<Cpt> {
    (0..g.len())
        .map(|v| {
            let parents: Vec<String> = g.parents(v).iter().map(|&p| g.id(p).to_owned()).collect();
            let rows: usize = g.parents(v).iter().map(|&p| g.node(p).cardinality).product();
            let k = g.node(v).cardinality;
            let table = (0..rows).map(|_| simplex(rng, k)).collect();
            Cpt::new(g.id(v), parents, table)
        })
        .collect()
}

/// Random network with `n` nodes of 2 to `max_card` states.
pub fn random_bayes_net<R: Rng>(rng: &mut R, n: usize, max_card: usize, density: f64) -> BayesNet {
    let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=max_card.max(2))).collect();
    let g = random_dag_with_cards(rng, &cards, density);
    let cpts = random_cpts(rng, &g);
    BayesNet::new(g, cpts).expect("generated CPTs are valid")
}

/// Random query: each node joins x, y, z or nothing with equal odds,
/// resampled until x and y are both nonempty.
pub fn random_query<R: Rng>(rng: &mut R, g: &Dag) -> CiQuery {
    assert!(g.len() >= 2, "a query needs two nodes");
    loop {
        let (mut x, mut y, mut z) = (Vec::new(), Vec::new(), Vec::new());
        for n in g.nodes() {
            match rng.gen_range(0..4) {
                0 => x.push(n.id.as_str()),
                1 => y.push(n.id.as_str()),
                2 => z.push(n.id.as_str()),
                _ => {}
            }
        }
        if !x.is_empty() && !y.is_empty() {
            return CiQuery::new(x, y, z);
        }
    }
}

/// Binary `X -> Y` model with exogenous `X`: `X := f_X(E_X)`,
/// `Y := f_Y(X, E_Y)`, random tables and error laws. Resampled until both
/// values of `X` have positive mass and `P(Y_1=1) > 0`, so that the
/// observational rows and the probability of causation exist.
pub fn random_binary_scm<R: Rng>(rng: &mut R) -> Scm {
    loop {
        let kx = rng.gen_range(2..=3);
        let ky = rng.gen_range(2..=4);
        let fx: Vec<usize> = (0..kx).map(|_| rng.gen_range(0..2)).collect();
        let fy: Vec<usize> = (0..2 * ky).map(|_| rng.gen_range(0..2)).collect();
        let ex = simplex(rng, kx);
        let ey = simplex(rng, ky);
        let px1: f64 = fx.iter().zip(&ex).filter(|(&x, _)| x == 1).map(|(_, p)| p).sum();
        let py1: f64 = fy[ky..].iter().zip(&ey).filter(|(&y, _)| y == 1).map(|(_, p)| p).sum();
        if px1 < 1e-3 || px1 > 1.0 - 1e-3 || py1 < 1e-3 {
            continue;
        }
        let g = Dag::builder()
            .vars(["X", "Y"])
            .error("E_X", kx)
            .error("E_Y", ky)
            .edges([("E_X", "X"), ("E_Y", "Y"), ("X", "Y")])
            .build()
            .expect("fixed structure");
        return Scm::new(
            g,
            vec![ErrorSpec::new("E_X", ex), ErrorSpec::new("E_Y", ey)],
            vec![
                StructuralFunction::new("X", vec!["E_X".into()], fx),
                StructuralFunction::new("Y", vec!["X".into(), "E_Y".into()], fy),
            ],
        )
        .expect("generated model is valid");
    }
}

/// Every labelled DAG over `V0..V{n-1}` (543 for n = 4, 29281 for n = 5),
/// binary nodes.
pub fn all_dags(n: usize) -> Vec<Dag> {
    let ids = names(n);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let nodes: Vec<Node> = ids.iter().map(|id| Node::domain(id.clone(), 2)).collect();
    let mut out = Vec::new();
    let mut parents = vec![0u32; n];
    for code in 0..total {
        parents.iter_mut().for_each(|p| *p = 0);
        let mut c = code;
        let mut edges = Vec::new();
        for &(i, j) in &pairs {
            match c % 3 {
                1 => {
                    edges.push((i, j));
                    parents[j] |= 1 << i;
                }
                2 => {
                    edges.push((j, i));
                    parents[i] |= 1 << j;
                }
                _ => {}
            }
            c /= 3;
        }
        if acyclic(&parents) {
            let named = edges.iter().map(|&(a, b)| (ids[a].as_str(), ids[b].as_str()));
            out.push(Dag::new(nodes.clone(), named).expect("acyclic"));
        }
    }
    out
}

/// Parent bitmasks admit a topological order.
fn acyclic(parents: &[u32]) -> bool {
    let mut done = 0u32;
    for _ in 0..parents.len() {
        match (0..parents.len()).find(|&v| done & (1 << v) == 0 && parents[v] & !done == 0) {
            Some(v) => done |= 1 << v,
            None => return false,
        }
    }
    true
}

//! Semantics of directed acyclic graphs for probabilistic and causal models.
//!
//! * [`graph`]: typed DAGs, ancestral subgraphs, moralisation, skeletons,
//!   immoralities and undirected separation.
//! * [`ci`]: conditional-independence queries by moralisation and by
//!   d-separation, Markov equivalence and equivalence-class enumeration.
//! * [`bayes`]: discrete Bayesian networks with exact inference.
//! * [`regimes`]: augmented DAGs with regime indicators, extended
//!   conditional independence and interventional distributions.
//! * [`scm`]: structural models, potential responses and the probability of
//!   causation with its bounds.
//! * [`format`]: the line-oriented text format for graphs, CPTs and
//!   structural functions.
//! * [`generate`]: seeded random and exhaustive model generators.

pub mod bayes;
pub mod ci;
pub mod error;
pub mod exec;
pub mod format;
pub mod generate;
pub mod graph;
pub mod regimes;
pub mod scm;

pub use bayes::{BayesNet, Cpt, JointTable};
pub use ci::{CiVerdict, Method};
pub use error::{Error, Result};
pub use exec::Execution;
pub use graph::{CiQuery, Dag, Immorality, Node, NodeKind, UndirectedGraph};
pub use regimes::{AugmentedBayesNet, EciQuery, RegimeAssignment, RegimeState};
pub use scm::{Coupling, ErrorSpec, PcBounds, PotentialResponseJoint, Scm, StructuralFunction};

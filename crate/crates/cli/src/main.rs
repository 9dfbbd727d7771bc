//! `cde`: query graphs, Bayesian networks and structural models from the
//! command line.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use report::Failure;

#[derive(Parser)]
#[command(name = "cde", version, about = "Conditional independence, interventions and causation on DAG models")]
struct Cli {
    /// Emit a JSON document instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct QueryArgs {
    /// Model file.
    #[arg(short = 'g', long = "graph")]
    graph: PathBuf,
    /// Query, e.g. `X,Y _||_ Z | W`.
    #[arg(short = 'q', long = "query")]
    query: String,
    /// Show a connecting path when the query is not represented.
    #[arg(long)]
    witness: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Graph-represented conditional independence, by moralisation.
    Ci(QueryArgs),
    /// Same query, by d-separation.
    Dsep(QueryArgs),
    /// Markov equivalence of two graphs.
    #[command(disable_help_flag = true)]
    Equiv {
        #[arg(short = 'g', long = "graph")]
        graph: PathBuf,
        /// Second graph (`-h` here does not mean help).
        #[arg(short = 'h', long = "other")]
        other: PathBuf,
        /// Explain a negative verdict.
        #[arg(long)]
        witness: bool,
        #[arg(long, action = ArgAction::Help)]
        help: Option<bool>,
    },
    /// Every member of a graph's Markov equivalence class.
    Class {
        #[arg(short = 'g', long = "graph")]
        graph: PathBuf,
    },
    /// Attach regime indicators and print the augmented model.
    Augment {
        #[arg(short = 'g', long = "graph")]
        graph: PathBuf,
        /// One indicator per domain node.
        #[arg(long, conflicts_with = "targets", required_unless_present = "targets")]
        all: bool,
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        /// Graphviz output.
        #[arg(long)]
        dot: bool,
    },
    /// Extended conditional independence on an augmented graph.
    Eci(QueryArgs),
    /// Joint distribution under a regime assignment.
    Intervene {
        #[arg(short = 'g', long = "graph")]
        graph: PathBuf,
        /// `F_X=1`, `F_X=idle` or `X=1`; missing indicators are added.
        #[arg(long = "set")]
        set: Vec<String>,
        /// Keep only these variables.
        #[arg(long, value_delimiter = ',')]
        vars: Vec<String>,
    },
    /// Marginal or conditional observational distribution.
    Marginal {
        #[arg(short = 'g', long = "graph")]
        graph: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        vars: Vec<String>,
        /// Evidence, `A=1,B=0`.
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// Probability of causation in a structural model.
    Pc {
        #[arg(short = 'g', long = "graph")]
        graph: PathBuf,
        #[arg(long, default_value = "X")]
        cause: String,
        #[arg(long, default_value = "Y")]
        outcome: String,
    },
    /// Bounds on the probability of causation from `p(Y=1|X=0)` and `p(Y=1|X=1)`.
    PcBounds {
        #[arg(long)]
        p0: f64,
        #[arg(long)]
        p1: f64,
    },
    /// Structural model reproducing a Bayesian network.
    SpmFromBn {
        #[arg(short = 'g', long = "graph")]
        graph: PathBuf,
        /// Node whose responses get an explicit coupling.
        #[arg(long, requires = "coupling")]
        node: Option<String>,
        #[arg(long, value_parser = ["comonotone", "independent"], requires = "node")]
        coupling: Option<String>,
    },
    /// Joint law of the potential responses of an outcome to a cause.
    Counterfactual {
        #[arg(short = 'g', long = "graph")]
        graph: PathBuf,
        #[arg(long, default_value = "X")]
        cause: String,
        #[arg(long, default_value = "Y")]
        outcome: String,
    },
    /// Check a model file, then run seeded self-checks.
    Validate {
        #[arg(short = 'g', long = "graph")]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random models per check.
        #[arg(long, default_value_t = 50)]
        count: usize,
    },
}

fn run(cli: Cli) -> Result<report::Report, Failure> {
    use commands as c;
    match cli.command {
        Command::Ci(a) => c::ci(&a.graph, &a.query, a.witness, cde_core::Method::Moralisation),
        Command::Dsep(a) => c::ci(&a.graph, &a.query, a.witness, cde_core::Method::DSeparation),
        Command::Equiv { graph, other, witness, .. } => c::equiv(&graph, &other, witness),
        Command::Class { graph } => c::class(&graph),
        Command::Augment { graph, all, targets, dot } => c::augment(&graph, all, &targets, dot),
        Command::Eci(a) => c::eci(&a.graph, &a.query, a.witness),
        Command::Intervene { graph, set, vars } => c::intervene(&graph, &set, &vars),
        Command::Marginal { graph, vars, given } => c::marginal(&graph, &vars, &given),
        Command::Pc { graph, cause, outcome } => c::pc(&graph, &cause, &outcome),
        Command::PcBounds { p0, p1 } => c::pc_bounds(p0, p1),
        Command::SpmFromBn { graph, node, coupling } => c::spm_from_bn(&graph, node.as_deref(), coupling.as_deref()),
        Command::Counterfactual { graph, cause, outcome } => c::counterfactual(&graph, &cause, &outcome),
        Command::Validate { graph, seed, count } => c::validate(graph.as_deref(), seed, count),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(r) => {
            r.print(json);
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

use std::path::Path;

use cde_core::format::{self, fmt_float, Model};
use cde_core::{Error, JointTable};
use serde_json::{json, Value};

/// How a command failed: bad input (exit 2) or a failed evaluation (exit 1).
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Eval(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Eval(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Eval(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Syntax { .. } | Error::Query(_) | Error::Validation(_) => Failure::Usage(e.to_string()),
            _ => Failure::Eval(e.to_string()),
        }
    }
}

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Reads and parses a model file; every problem with it is a usage error.
pub fn load(path: &Path) -> Result<Model, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    format::parse_model(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub struct Report {
    pub command: &'static str,
    pub inputs: Value,
    pub result: Value,
    pub witness: Option<Value>,
    pub text: String,
}

impl Report {
    pub fn new(command: &'static str, inputs: Value, result: Value, text: impl Into<String>) -> Self {
        Report {
            command,
            inputs,
            result,
            witness: None,
            text: text.into(),
        }
    }

    pub fn print(&self, json: bool) {
        if json {
            let mut doc = json!({
                "schema": 1,
                "command": self.command,
                "inputs": self.inputs,
                "result": self.result,
            });
            if let Some(w) = &self.witness {
                doc["witness"] = w.clone();
            }
            println!("{}", serde_json::to_string_pretty(&doc).expect("reports serialise"));
        } else {
            print!("{}", self.text);
            if !self.text.ends_with('\n') {
                println!();
            }
        }
    }
}

/// One line per cell: `A=0 B=1 0.25`.
pub fn joint_text(j: &JointTable) -> String {
    let mut out = String::new();
    let mut states = vec![0; j.cardinalities.len()];
    for (cell, p) in j.probabilities.iter().enumerate() {
        let mut c = cell;
        for i in (0..states.len()).rev() {
            states[i] = c % j.cardinalities[i];
            c /= j.cardinalities[i];
        }
        let parts: Vec<String> = j.variable_order.iter().zip(&states).map(|(v, s)| format!("{v}={s}")).collect();
        out.push_str(&format!("{} {}\n", parts.join(" "), fmt_float(*p)));
    }
    out
}

pub fn path_json(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

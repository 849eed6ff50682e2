//! JSON instance format.
//!
//! ```json
//! {
//!   "name": "ex2",
//!   "blocks": [
//!     {
//!       "cost_constant": 0.0,
//!       "cost_linear": [1.0],
//!       "cost_quad_diag": [0.0],
//!       "constraints": [{"coeffs": [1.0], "rel": "<=", "rhs": 1.0}],
//!       "lb": [0.0],
//!       "ub": [1.0],
//!       "integer": [true],
//!       "Q": [[1.0]]
//!     }
//!   ],
//!   "groups": [[0, 1]]
//! }
//! ```
//!
//! `cost_constant`, `cost_quad_diag` and `constraints` may be omitted. A
//! `null` bound means unbounded in that direction. `rel` is one of `<=`,
//! `=`, `>=`. `groups` partitions the global coupling coordinates, which are
//! the rows of every block's `Q` stacked in block order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sdmgs::{BlockSpec, Instance, LinearConstraint, LinkageStructure, ProblemInstance, Relation};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {}", .0.join("; "))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFile {
    pub coeffs: Vec<f64>,
    pub rel: String,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFile {
    #[serde(default)]
    pub cost_constant: f64,
    pub cost_linear: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_quad_diag: Option<Vec<f64>>,
    #[serde(default)]
    pub constraints: Vec<ConstraintFile>,
    pub lb: Vec<Option<f64>>,
    pub ub: Vec<Option<f64>>,
    pub integer: Vec<bool>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub name: String,
    pub blocks: Vec<BlockFile>,
    pub groups: Vec<Vec<usize>>,
}

fn relation(s: &str) -> Option<Relation> {
    match s {
        "<=" => Some(Relation::Le),
        "=" | "==" => Some(Relation::Eq),
        ">=" => Some(Relation::Ge),
        _ => None,
    }
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance, InstanceError> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (b, bf) in self.blocks.into_iter().enumerate() {
            let n = bf.cost_linear.len();
            let mut constraints = Vec::with_capacity(bf.constraints.len());
            for (c, cf) in bf.constraints.into_iter().enumerate() {
                let rel = relation(&cf.rel).ok_or_else(|| {
                    InstanceError::Parse(format!("block {b}, constraint {c}: unknown relation {:?}", cf.rel))
                })?;
                constraints.push(LinearConstraint::new(cf.coeffs, rel, cf.rhs));
            }
            blocks.push(BlockSpec {
                cost_constant: bf.cost_constant,
                cost_linear: bf.cost_linear,
                cost_quad_diag: bf.cost_quad_diag.unwrap_or_else(|| vec![0.0; n]),
                constraints,
                lb: bf.lb.into_iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect(),
                ub: bf.ub.into_iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
                integer: bf.integer,
                coupling: bf.q,
            });
        }
        ProblemInstance::new(self.name, blocks, LinkageStructure::new(self.groups)).map_err(|e| match e {
            sdmgs::Error::InvalidInstance(v) => InstanceError::Validation(v),
            other => InstanceError::Validation(vec![other.to_string()]),
        })
    }

    pub fn from_instance(inst: &Instance) -> Self {
        let finite = |v: f64| if v.is_finite() { Some(v) } else { None };
        Self {
            name: inst.name().to_string(),
            blocks: inst
                .blocks()
                .iter()
                .map(|b| BlockFile {
                    cost_constant: b.cost_constant,
                    cost_linear: b.cost_linear.clone(),
                    cost_quad_diag: if b.is_linear() { None } else { Some(b.cost_quad_diag.clone()) },
                    constraints: b
                        .constraints
                        .iter()
                        .map(|c| ConstraintFile {
                            coeffs: c.coeffs.clone(),
                            rel: c.rel.symbol().to_string(),
                            rhs: c.rhs,
                        })
                        .collect(),
                    lb: b.lb.iter().copied().map(finite).collect(),
                    ub: b.ub.iter().copied().map(finite).collect(),
                    integer: b.integer.clone(),
                    q: b.coupling.clone(),
                })
                .collect(),
            groups: inst.linkage().groups().to_vec(),
        }
    }
}

pub fn parse_instance_str(text: &str) -> Result<Instance, InstanceError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| InstanceError::Parse(e.to_string()))?;
    file.into_instance()
}

pub fn parse_instance(path: &Path) -> Result<Instance, InstanceError> {
    let text = fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_instance_str(&text)
}

pub fn instance_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(inst)).expect("instance serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX2: &str = r#"{
        "name": "ex2",
        "blocks": [
            {"cost_linear": [1.0], "lb": [0.0], "ub": [1.0], "integer": [true], "Q": [[1.0]]},
            {"cost_linear": [-3.0], "lb": [0.0], "ub": [1.0], "integer": [true], "Q": [[1.0]]}
        ],
        "groups": [[0, 1]]
    }"#;

    #[test]
    fn minimal_file_parses() {
        let inst = parse_instance_str(EX2).unwrap();
        assert_eq!(inst.n_blocks(), 2);
        assert_eq!(inst.block(1).cost_linear, vec![-3.0]);
        assert_eq!(inst.block(0).cost_quad_diag, vec![0.0]);
    }

    #[test]
    fn bad_relation_names_the_constraint() {
        let text = EX2.replacen(
            r#""Q": [[1.0]]},"#,
            r#""Q": [[1.0]], "constraints": [{"coeffs": [1.0], "rel": "<<", "rhs": 1.0}]},"#,
            1,
        );
        match parse_instance_str(&text) {
            Err(InstanceError::Parse(msg)) => assert!(msg.contains("block 0, constraint 0"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn null_bound_is_reported_by_validation() {
        let text = EX2.replacen(r#""ub": [1.0]"#, r#""ub": [null]"#, 1);
        match parse_instance_str(&text) {
            Err(InstanceError::Validation(v)) => assert!(v.iter().any(|m| m.contains("unbounded"))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_instance_str("{\"name\": 3") {
            Err(InstanceError::Parse(msg)) => assert!(msg.contains("line"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let inst = parse_instance_str(EX2).unwrap();
        let again = parse_instance_str(&instance_to_json(&inst)).unwrap();
        assert_eq!(inst, again);
    }
}

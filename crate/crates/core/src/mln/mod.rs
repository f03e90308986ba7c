//! Markov logic networks over finite domains.
//!
//! Formulas are clauses (disjunctions of possibly negated atoms). Implications
//! written with `=>` are rewritten to clausal form when parsed. Everything is
//! exact: grounding enumerates all substitutions, the partition function
//! enumerates all worlds, and MAP inference is an exact branch and bound.

mod ground;
mod infer;
mod learn;
mod parse;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ground::{
    count_satisfied, log_partition, score, world_log_probability, GroundClause, Grounding,
    World, EXACT_PARTITION_ATOM_CAP,
};
pub use infer::{map_infer, map_infer_with_cap, Evidence, DEFAULT_MAP_ATOM_CAP};
pub use learn::{
    learn_weights, penalized_pll, pll_gradient, pseudo_log_likelihood, LearnOptions, LearnReport,
};
pub use parse::{parse_atom, parse_clause};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => {
                if c.chars().all(parse::is_ident_char) && !c.is_empty() {
                    f.write_str(c)
                } else {
                    write!(f, "\"{c}\"")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub negated: bool,
    pub predicate: String,
    pub args: Vec<Term>,
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("!")?;
        }
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// A clause with its weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Formula {
    pub clause: Vec<Literal>,
    pub weight: f64,
}

impl Formula {
    pub fn clause_text(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        for (i, l) in self.clause.iter().enumerate() {
            if i > 0 {
                s.push_str(" | ");
            }
            let _ = write!(s, "{l}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    #[serde(rename = "args")]
    pub arg_domains: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlnModel {
    pub domains: BTreeMap<String, Vec<String>>,
    pub predicates: Vec<Predicate>,
    pub formulas: Vec<Formula>,
    pub query_predicates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlnError {
    #[error("parse error at byte {at}: {message}")]
    Parse { at: usize, message: String },
    #[error("domain `{0}` is not declared")]
    DomainMissing(String),
    #[error("predicate `{0}` is declared twice")]
    DuplicatePredicate(String),
    #[error("predicate `{0}` must have arity >= 1")]
    ZeroArity(String),
    #[error("predicate `{0}` is not declared")]
    UnknownPredicate(String),
    #[error("predicate `{predicate}` takes {expected} arguments, got {got}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        got: usize,
    },
    #[error("constant `{constant}` is not in domain `{domain}`")]
    UnknownConstant { constant: String, domain: String },
    #[error("variable `?{var}` is used with domains `{first}` and `{second}`")]
    InconsistentVariable {
        var: String,
        first: String,
        second: String,
    },
    #[error("formula {0} has an empty clause")]
    EmptyClause(usize),
    #[error("query predicate `{0}` is not declared")]
    BadQueryPredicate(String),
    #[error("{atoms} atoms exceed the exact-computation cap of {cap}")]
    TooLarge { atoms: usize, cap: usize },
    #[error("ground atom `{0}` is not part of the model")]
    UnknownAtom(String),
    #[error("atom `{0}` is neither a query atom nor assigned by the evidence")]
    EvidenceIncomplete(String),
    #[error("weight vector has {got} entries, model has {expected} formulas")]
    WeightCount { expected: usize, got: usize },
    #[error("world has {got} atoms, model has {expected}")]
    WorldSize { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
}

/// On-disk form of a model: clauses are kept as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub domains: BTreeMap<String, Vec<String>>,
    pub predicates: Vec<Predicate>,
    pub formulas: Vec<FormulaText>,
    pub query_predicates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaText {
    pub clause: String,
    pub weight: f64,
}

impl MlnModel {
    pub fn predicate(&self, name: &str) -> Option<(usize, &Predicate)> {
        self.predicates.iter().enumerate().find(|(_, p)| p.name == name)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.formulas.iter().map(|f| f.weight).collect()
    }

    pub fn set_weights(&mut self, w: &[f64]) -> Result<(), MlnError> {
        if w.len() != self.formulas.len() {
            return Err(MlnError::WeightCount {
                expected: self.formulas.len(),
                got: w.len(),
            });
        }
        for (f, &x) in self.formulas.iter_mut().zip(w) {
            f.weight = x;
        }
        Ok(())
    }

    /// Checks declarations and that every formula is well typed.
    pub fn validate(&self) -> Result<(), MlnError> {
        let mut names = BTreeMap::new();
        for p in &self.predicates {
            if names.insert(p.name.as_str(), ()).is_some() {
                return Err(MlnError::DuplicatePredicate(p.name.clone()));
            }
            if p.arg_domains.is_empty() {
                return Err(MlnError::ZeroArity(p.name.clone()));
            }
            for d in &p.arg_domains {
                if !self.domains.contains_key(d) {
                    return Err(MlnError::DomainMissing(d.clone()));
                }
            }
        }
        for q in &self.query_predicates {
            if self.predicate(q).is_none() {
                return Err(MlnError::BadQueryPredicate(q.clone()));
            }
        }
        for (i, f) in self.formulas.iter().enumerate() {
            if f.clause.is_empty() {
                return Err(MlnError::EmptyClause(i));
            }
            self.variable_domains(&f.clause)?;
        }
        Ok(())
    }

    /// Variables of a clause in order of first appearance, with their domains.
    pub fn variable_domains(&self, clause: &[Literal]) -> Result<Vec<(String, String)>, MlnError> {
        let mut vars: Vec<(String, String)> = Vec::new();
        for lit in clause {
            let (_, pred) = self
                .predicate(&lit.predicate)
                .ok_or_else(|| MlnError::UnknownPredicate(lit.predicate.clone()))?;
            if pred.arg_domains.len() != lit.args.len() {
                return Err(MlnError::ArityMismatch {
                    predicate: pred.name.clone(),
                    expected: pred.arg_domains.len(),
                    got: lit.args.len(),
                });
            }
            for (term, dom) in lit.args.iter().zip(&pred.arg_domains) {
                match term {
                    Term::Var(v) => match vars.iter().find(|(n, _)| n == v) {
                        Some((_, d)) if d != dom => {
                            return Err(MlnError::InconsistentVariable {
                                var: v.clone(),
                                first: d.clone(),
                                second: dom.clone(),
                            })
                        }
                        Some(_) => {}
                        None => vars.push((v.clone(), dom.clone())),
                    },
                    Term::Const(c) => {
                        let consts = self
                            .domains
                            .get(dom)
                            .ok_or_else(|| MlnError::DomainMissing(dom.clone()))?;
                        if !consts.contains(c) {
                            return Err(MlnError::UnknownConstant {
                                constant: c.clone(),
                                domain: dom.clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(vars)
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            domains: self.domains.clone(),
            predicates: self.predicates.clone(),
            formulas: self
                .formulas
                .iter()
                .map(|f| FormulaText {
                    clause: f.clause_text(),
                    weight: f.weight,
                })
                .collect(),
            query_predicates: self.query_predicates.clone(),
        }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self, MlnError> {
        let formulas = file
            .formulas
            .iter()
            .map(|f| {
                Ok(Formula {
                    clause: parse_clause(&f.clause)?,
                    weight: f.weight,
                })
            })
            .collect::<Result<Vec<_>, MlnError>>()?;
        let model = MlnModel {
            domains: file.domains.clone(),
            predicates: file.predicates.clone(),
            formulas,
            query_predicates: file.query_predicates.clone(),
        };
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
pub(crate) mod testing;

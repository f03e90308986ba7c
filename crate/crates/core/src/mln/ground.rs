use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{MlnError, MlnModel, Term};

/// Exhaustive partition functions are refused above this many ground atoms.
pub const EXACT_PARTITION_ATOM_CAP: usize = 24;

/// Truth value of every ground atom, indexed as in [`Grounding`].
pub type World = Vec<bool>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundClause {
    pub formula: usize,
    /// (atom index, literal is positive)
    pub literals: Vec<(usize, bool)>,
}

impl GroundClause {
    pub fn satisfied(&self, world: &[bool]) -> bool {
        self.literals.iter().any(|&(a, pos)| world[a] == pos)
    }
}

/// Ground atoms and clauses of a model.
///
/// Atoms are numbered predicate by predicate in declaration order, and within
/// a predicate by the row-major index of their constants.
#[derive(Debug, Clone)]
pub struct Grounding {
    pub clauses: Vec<GroundClause>,
    pub formula_count: usize,
    atom_names: Vec<String>,
    pred_names: Vec<String>,
    pred_offsets: Vec<usize>,
    pred_domains: Vec<Vec<Vec<String>>>,
    query: Vec<bool>,
    atom_clauses: Vec<Vec<usize>>,
}

impl Grounding {
    pub fn new(model: &MlnModel) -> Result<Self, MlnError> {
        model.validate()?;
        let mut atom_names = Vec::new();
        let mut pred_offsets = Vec::new();
        let mut pred_domains = Vec::new();
        let mut query = Vec::new();
        for p in &model.predicates {
            pred_offsets.push(atom_names.len());
            let doms: Vec<Vec<String>> = p
                .arg_domains
                .iter()
                .map(|d| model.domains[d].clone())
                .collect();
            let is_query = model.query_predicates.contains(&p.name);
            for combo in product(&doms.iter().map(Vec::len).collect::<Vec<_>>()) {
                let args: Vec<&str> = combo
                    .iter()
                    .zip(&doms)
                    .map(|(&i, d)| d[i].as_str())
                    .collect();
                atom_names.push(format!("{}({})", p.name, args.join(",")));
                query.push(is_query);
            }
            pred_domains.push(doms);
        }
        let mut g = Grounding {
            clauses: Vec::new(),
            formula_count: model.formulas.len(),
            atom_clauses: alloc::vec![Vec::new(); atom_names.len()],
            atom_names,
            pred_names: model.predicates.iter().map(|p| p.name.clone()).collect(),
            pred_offsets,
            pred_domains,
            query,
        };
        for (fi, f) in model.formulas.iter().enumerate() {
            let vars = model.variable_domains(&f.clause)?;
            let var_consts: Vec<&Vec<String>> = vars
                .iter()
                .map(|(_, d)| &model.domains[d])
                .collect();
            let mut seen = BTreeSet::new();
            for combo in product(&var_consts.iter().map(|c| c.len()).collect::<Vec<_>>()) {
                let mut lits = Vec::with_capacity(f.clause.len());
                for lit in &f.clause {
                    let args: Vec<&str> = lit
                        .args
                        .iter()
                        .map(|t| match t {
                            Term::Const(c) => c.as_str(),
                            Term::Var(v) => {
                                let k = vars.iter().position(|(n, _)| n == v).unwrap_or(0);
                                var_consts[k][combo[k]].as_str()
                            }
                        })
                        .collect();
                    lits.push((g.atom_index(&lit.predicate, &args)?, !lit.negated));
                }
                lits.sort_unstable();
                lits.dedup();
                if seen.insert(lits.clone()) {
                    g.clauses.push(GroundClause {
                        formula: fi,
                        literals: lits,
                    });
                }
            }
        }
        for (ci, c) in g.clauses.iter().enumerate() {
            let mut last = usize::MAX;
            for &(a, _) in &c.literals {
                if a != last {
                    g.atom_clauses[a].push(ci);
                    last = a;
                }
            }
        }
        Ok(g)
    }

    pub fn atom_count(&self) -> usize {
        self.atom_names.len()
    }

    pub fn atom_name(&self, atom: usize) -> &str {
        &self.atom_names[atom]
    }

    pub fn is_query_atom(&self, atom: usize) -> bool {
        self.query[atom]
    }

    /// Indices of the clauses mentioning `atom`.
    pub fn clauses_of(&self, atom: usize) -> &[usize] {
        &self.atom_clauses[atom]
    }

    pub fn atom_index(&self, predicate: &str, args: &[&str]) -> Result<usize, MlnError> {
        let unknown = || MlnError::UnknownAtom(format!("{}({})", predicate, args.join(",")));
        let p = self
            .pred_names
            .iter()
            .position(|n| n == predicate)
            .ok_or_else(unknown)?;
        let doms = &self.pred_domains[p];
        if doms.len() != args.len() {
            return Err(unknown());
        }
        let mut idx = 0;
        for (a, d) in args.iter().zip(doms) {
            let k = d.iter().position(|c| c == a).ok_or_else(unknown)?;
            idx = idx * d.len() + k;
        }
        Ok(self.pred_offsets[p] + idx)
    }

    /// Index of an atom written as `pred(c1,c2)`.
    pub fn atom_by_name(&self, text: &str) -> Result<usize, MlnError> {
        let (p, args) = super::parse_atom(text)?;
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        self.atom_index(&p, &refs)
    }

    /// Closed-world: every atom not listed is false.
    pub fn world_from_true_atoms<'a, I>(&self, atoms: I) -> Result<World, MlnError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut w = alloc::vec![false; self.atom_count()];
        for a in atoms {
            w[self.atom_by_name(a)?] = true;
        }
        Ok(w)
    }

    pub fn true_atoms(&self, world: &[bool]) -> Vec<&str> {
        world
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| self.atom_name(i))
            .collect()
    }

    pub(crate) fn check_world(&self, world: &[bool]) -> Result<(), MlnError> {
        if world.len() != self.atom_count() {
            return Err(MlnError::WorldSize {
                expected: self.atom_count(),
                got: world.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_weights(&self, weights: &[f64]) -> Result<(), MlnError> {
        if weights.len() != self.formula_count {
            return Err(MlnError::WeightCount {
                expected: self.formula_count,
                got: weights.len(),
            });
        }
        Ok(())
    }
}

/// Row-major enumeration of all index tuples below `dims`.
fn product(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut cur = alloc::vec![0usize; dims.len()];
    for _ in 0..total {
        out.push(cur.clone());
        for k in (0..dims.len()).rev() {
            cur[k] += 1;
            if cur[k] < dims[k] {
                break;
            }
            cur[k] = 0;
        }
    }
    out
}

/// n_i(x): satisfied ground clauses per formula.
pub fn count_satisfied(g: &Grounding, world: &[bool]) -> Result<Vec<usize>, MlnError> {
    g.check_world(world)?;
    let mut n = alloc::vec![0usize; g.formula_count];
    for c in &g.clauses {
        if c.satisfied(world) {
            n[c.formula] += 1;
        }
    }
    Ok(n)
}

/// Σ w_i n_i, summed in formula order.
pub fn score(weights: &[f64], counts: &[usize]) -> f64 {
    weights
        .iter()
        .zip(counts)
        .fold(0.0, |acc, (w, &n)| acc + w * n as f64)
}

/// log Z by enumerating every world.
pub fn log_partition(g: &Grounding, weights: &[f64]) -> Result<f64, MlnError> {
    g.check_weights(weights)?;
    let n = g.atom_count();
    if n > EXACT_PARTITION_ATOM_CAP {
        return Err(MlnError::TooLarge {
            atoms: n,
            cap: EXACT_PARTITION_ATOM_CAP,
        });
    }
    let mut world = alloc::vec![false; n];
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for mask in 0u64..(1u64 << n) {
        for (i, w) in world.iter_mut().enumerate() {
            *w = (mask >> i) & 1 == 1;
        }
        let s = score(weights, &count_satisfied(g, &world)?);
        if s > max {
            sum = sum * libm::exp(max - s) + 1.0;
            max = s;
        } else {
            sum += libm::exp(s - max);
        }
    }
    Ok(max + libm::log(sum))
}

pub fn world_log_probability(
    g: &Grounding,
    weights: &[f64],
    world: &[bool],
) -> Result<f64, MlnError> {
    let s = score(weights, &count_satisfied(g, world)?);
    Ok(s - log_partition(g, weights)?)
}

//! Random small models and a separately written truth-table evaluator.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Formula, Literal, MlnModel, Predicate, Term};

/// Unary predicates `p0..` over a two-constant domain; `atoms` must be even.
/// Every predicate is a query predicate.
pub fn random_model(seed: u64, formulas: usize, atoms: usize) -> MlnModel {
    assert!(atoms % 2 == 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let preds = atoms / 2;
    let mut domains = alloc::collections::BTreeMap::new();
    domains.insert("d".to_string(), alloc::vec!["a".to_string(), "b".to_string()]);
    let predicates: Vec<Predicate> = (0..preds)
        .map(|i| Predicate {
            name: format!("p{i}"),
            arg_domains: alloc::vec!["d".to_string()],
        })
        .collect();
    let formulas = (0..formulas)
        .map(|_| {
            let len = rng.random_range(1..=3);
            let clause = (0..len)
                .map(|_| Literal {
                    negated: rng.random_bool(0.5),
                    predicate: format!("p{}", rng.random_range(0..preds)),
                    args: alloc::vec![match rng.random_range(0..3) {
                        0 => Term::Const("a".to_string()),
                        1 => Term::Const("b".to_string()),
                        _ => Term::Var("x".to_string()),
                    }],
                })
                .collect();
            Formula {
                clause,
                weight: rng.random_range(-2.0..2.0),
            }
        })
        .collect();
    MlnModel {
        domains,
        predicates: predicates.clone(),
        formulas,
        query_predicates: predicates.into_iter().map(|p| p.name).collect(),
    }
}

/// n_i(x) for models built by [`random_model`], one substitution at a time.
pub fn truth_table_counts(m: &MlnModel, world: &[bool]) -> Vec<usize> {
    let consts = ["a", "b"];
    let value = |lit: &Literal, x: &str| -> bool {
        let p: usize = lit.predicate[1..].parse().unwrap();
        let c = match &lit.args[0] {
            Term::Const(c) => c.as_str(),
            Term::Var(_) => x,
        };
        let atom = 2 * p + consts.iter().position(|k| *k == c).unwrap();
        world[atom] != lit.negated
    };
    m.formulas
        .iter()
        .map(|f| {
            let has_var = f
                .clause
                .iter()
                .any(|l| matches!(l.args[0], Term::Var(_)));
            let subs: &[&str] = if has_var { &consts } else { &consts[..1] };
            subs.iter()
                .filter(|x| f.clause.iter().any(|l| value(l, x)))
                .count()
        })
        .collect()
}

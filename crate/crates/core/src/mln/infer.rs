use alloc::vec::Vec;

use super::{count_satisfied, score, Grounding, MlnError, World};

pub const DEFAULT_MAP_ATOM_CAP: usize = 30;

/// Known truth values; `None` marks an atom left to inference.
pub type Evidence = Vec<Option<bool>>;

/// Exact MAP completion with the default free-atom cap.
pub fn map_infer(g: &Grounding, weights: &[f64], evidence: &[Option<bool>]) -> Result<World, MlnError> {
    map_infer_with_cap(g, weights, evidence, DEFAULT_MAP_ATOM_CAP)
}

struct Search<'a> {
    g: &'a Grounding,
    weights: &'a [f64],
    free: Vec<usize>,
    world: Vec<bool>,
    sat_lits: Vec<u32>,
    open_lits: Vec<u32>,
    /// Weight of clauses already decided true.
    score: f64,
    /// Σ max(w, 0) over undecided clauses.
    optimism: f64,
    best: Option<(f64, Vec<bool>)>,
}

impl Search<'_> {
    fn resolved(&self, c: usize) -> bool {
        self.sat_lits[c] > 0 || self.open_lits[c] == 0
    }

    fn assign(&mut self, atom: usize, value: bool) {
        self.world[atom] = value;
        for &c in self.g.clauses_of(atom) {
            let before = self.resolved(c);
            for &(a, pos) in &self.g.clauses[c].literals {
                if a == atom {
                    self.open_lits[c] -= 1;
                    if pos == value {
                        self.sat_lits[c] += 1;
                    }
                }
            }
            if !before && self.resolved(c) {
                let w = self.weights[self.g.clauses[c].formula];
                self.optimism -= w.max(0.0);
                if self.sat_lits[c] > 0 {
                    self.score += w;
                }
            }
        }
    }

    fn unassign(&mut self, atom: usize, value: bool) {
        for &c in self.g.clauses_of(atom) {
            for &(a, pos) in &self.g.clauses[c].literals {
                if a == atom {
                    self.open_lits[c] += 1;
                    if pos == value {
                        self.sat_lits[c] -= 1;
                    }
                }
            }
        }
    }

    fn tolerance(&self, best: f64) -> f64 {
        1e-9 * best.abs().max(1.0)
    }

    fn dfs(&mut self, depth: usize) {
        if depth == self.free.len() {
            // leaves are compared on the same canonical sum the exhaustive oracle uses
            let counts = count_satisfied(self.g, &self.world).unwrap_or_default();
            let s = score(self.weights, &counts);
            if self.best.as_ref().is_none_or(|(b, _)| s > *b) {
                self.best = Some((s, self.world.clone()));
            }
            return;
        }
        let atom = self.free[depth];
        for value in [false, true] {
            let saved = (self.score, self.optimism);
            self.assign(atom, value);
            let prune = match &self.best {
                Some((b, _)) => self.score + self.optimism <= *b + self.tolerance(*b),
                None => false,
            };
            if !prune {
                self.dfs(depth + 1);
            }
            self.unassign(atom, value);
            (self.score, self.optimism) = saved;
        }
        self.world[atom] = false;
    }
}

/// Branch and bound over the unassigned atoms, maximizing Σ w_i n_i(x).
///
/// Atoms are branched in index order, false first, so among equal scores the
/// lexicographically smallest completion wins. A subtree is cut when its
/// bound (decided weight plus every positive undecided weight) cannot beat
/// the incumbent.
pub fn map_infer_with_cap(
    g: &Grounding,
    weights: &[f64],
    evidence: &[Option<bool>],
    cap: usize,
) -> Result<World, MlnError> {
    g.check_weights(weights)?;
    if evidence.len() != g.atom_count() {
        return Err(MlnError::WorldSize {
            expected: g.atom_count(),
            got: evidence.len(),
        });
    }
    let mut free = Vec::new();
    for (a, e) in evidence.iter().enumerate() {
        if e.is_none() {
            if !g.is_query_atom(a) {
                return Err(MlnError::EvidenceIncomplete(g.atom_name(a).into()));
            }
            free.push(a);
        }
    }
    if free.len() > cap {
        return Err(MlnError::TooLarge {
            atoms: free.len(),
            cap,
        });
    }
    let world: Vec<bool> = evidence.iter().map(|e| e.unwrap_or(false)).collect();
    let mut is_free = alloc::vec![false; g.atom_count()];
    for &a in &free {
        is_free[a] = true;
    }
    let n = g.clauses.len();
    let mut s = Search {
        g,
        weights,
        free,
        world,
        sat_lits: alloc::vec![0; n],
        open_lits: alloc::vec![0; n],
        score: 0.0,
        optimism: 0.0,
        best: None,
    };
    for (c, clause) in g.clauses.iter().enumerate() {
        for &(a, pos) in &clause.literals {
            if is_free[a] {
                s.open_lits[c] += 1;
            } else if s.world[a] == pos {
                s.sat_lits[c] += 1;
            }
        }
        let w = weights[clause.formula];
        if s.resolved(c) {
            if s.sat_lits[c] > 0 {
                s.score += w;
            }
        } else {
            s.optimism += w.max(0.0);
        }
    }
    s.dfs(0);
    Ok(s.best.map(|(_, w)| w).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mln::testing::random_model;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Completions in lexicographic order (false < true, lower index first),
    /// keeping the first maximum.
    fn exhaustive(g: &Grounding, w: &[f64], ev: &[Option<bool>]) -> (f64, Vec<bool>) {
        let free: Vec<usize> = (0..ev.len()).filter(|&a| ev[a].is_none()).collect();
        let k = free.len();
        let mut best: Option<(f64, Vec<bool>)> = None;
        for code in 0u64..(1u64 << k) {
            let mut world: Vec<bool> = ev.iter().map(|e| e.unwrap_or(false)).collect();
            for (j, &a) in free.iter().enumerate() {
                world[a] = (code >> (k - 1 - j)) & 1 == 1;
            }
            let s = score(w, &count_satisfied(g, &world).unwrap());
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, world));
            }
        }
        best.unwrap()
    }

    fn random_evidence(seed: u64, atoms: usize, max_free: usize) -> Evidence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbeef);
        let mut ev: Evidence = (0..atoms).map(|_| None).collect();
        let fixed = atoms.saturating_sub(max_free);
        for a in 0..atoms {
            if a < fixed || rng.random_bool(0.2) {
                ev[a] = Some(rng.random_bool(0.5));
            }
        }
        ev
    }

    #[test]
    fn single_free_atom_forced_true() {
        let m = random_model(0, 0, 2);
        let mut m = m;
        m.formulas.push(crate::mln::Formula {
            clause: crate::mln::parse_clause("p0(a)").unwrap(),
            weight: 1.5,
        });
        let g = Grounding::new(&m).unwrap();
        let w = map_infer(&g, &m.weights(), &[None, Some(false)]).unwrap();
        assert_eq!(w, vec![true, false]);
    }

    #[test]
    fn zero_weights_give_all_false() {
        let m = random_model(5, 6, 12);
        let g = Grounding::new(&m).unwrap();
        let w = map_infer(&g, &[0.0; 6], &vec![None; 12]).unwrap();
        assert_eq!(w, vec![false; 12]);
    }

    #[test]
    fn evidence_must_cover_non_query_atoms() {
        let mut m = random_model(1, 2, 4);
        m.query_predicates = vec!["p0".into()];
        let g = Grounding::new(&m).unwrap();
        let err = map_infer(&g, &m.weights(), &[None, None, None, Some(true)]).unwrap_err();
        assert_eq!(err, MlnError::EvidenceIncomplete("p1(a)".into()));
        assert!(map_infer(&g, &m.weights(), &[None, None, Some(false), Some(true)]).is_ok());
    }

    #[test]
    fn free_atom_cap() {
        let m = random_model(1, 2, 8);
        let g = Grounding::new(&m).unwrap();
        let err = map_infer_with_cap(&g, &m.weights(), &[None; 8], 7).unwrap_err();
        assert_eq!(err, MlnError::TooLarge { atoms: 8, cap: 7 });
    }

    #[test]
    fn matches_exhaustive_on_fifty_seeds() {
        for seed in 0..50u64 {
            let m = random_model(seed, 10, 16);
            let g = Grounding::new(&m).unwrap();
            let ev = random_evidence(seed, 16, 12);
            let w = m.weights();
            let got = map_infer(&g, &w, &ev).unwrap();
            let (best, expect) = exhaustive(&g, &w, &ev);
            assert_eq!(got, expect, "seed {seed}");
            assert_eq!(score(&w, &count_satisfied(&g, &got).unwrap()), best);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn optimal_on_random_models(seed in any::<u64>(), nf in 1usize..14) {
            let m = random_model(seed, nf, 14);
            let g = Grounding::new(&m).unwrap();
            let ev = random_evidence(seed, 14, 12);
            let w = m.weights();
            let got = map_infer(&g, &w, &ev).unwrap();
            prop_assert_eq!(got, exhaustive(&g, &w, &ev).1);
        }

        #[test]
        fn positive_scaling_keeps_argmax(seed in any::<u64>(), c in 0.1f64..10.0) {
            let m = random_model(seed, 8, 12);
            let g = Grounding::new(&m).unwrap();
            let ev = random_evidence(seed, 12, 10);
            let w = m.weights();
            let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
            prop_assert_eq!(map_infer(&g, &w, &ev).unwrap(), map_infer(&g, &scaled, &ev).unwrap());
        }

        #[test]
        fn evidence_is_respected(seed in any::<u64>()) {
            let m = random_model(seed, 6, 10);
            let g = Grounding::new(&m).unwrap();
            let ev = random_evidence(seed, 10, 6);
            let got = map_infer(&g, &m.weights(), &ev).unwrap();
            for (a, e) in ev.iter().enumerate() {
                if let Some(v) = e {
                    prop_assert_eq!(got[a], *v);
                }
            }
        }
    }
}

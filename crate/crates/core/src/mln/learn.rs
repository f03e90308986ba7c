use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Grounding, MlnError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnOptions {
    /// Initial step size. The step applied is `learning_rate * gradient / |dataset|`.
    pub learning_rate: f64,
    /// Standard deviation of the zero-mean Gaussian prior on each weight.
    pub l2_prior_sigma: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm of the penalized objective drops below this.
    pub tol: f64,
}

impl Default for LearnOptions {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            l2_prior_sigma: 2.0,
            max_iters: 300,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnReport {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized PLL at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
}

fn dedup(dataset: &[Vec<bool>]) -> BTreeMap<&[bool], usize> {
    let mut m = BTreeMap::new();
    for w in dataset {
        *m.entry(w.as_slice()).or_insert(0) += 1;
    }
    m
}

fn clause_sat_with(g: &Grounding, clause: usize, world: &[bool], atom: usize, value: bool) -> bool {
    g.clauses[clause]
        .literals
        .iter()
        .any(|&(a, pos)| (if a == atom { value } else { world[a] }) == pos)
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = if a > b { a } else { b };
    m + libm::log(libm::exp(a - m) + libm::exp(b - m))
}

/// PLL and, when `grad` is given, its gradient accumulated into it.
fn pll_impl(
    g: &Grounding,
    weights: &[f64],
    dataset: &[Vec<bool>],
    mut grad: Option<&mut [f64]>,
) -> Result<f64, MlnError> {
    g.check_weights(weights)?;
    for w in dataset {
        g.check_world(w)?;
    }
    let mut total = 0.0;
    let mut local = alloc::vec![0.0; g.formula_count];
    for (world, count) in dedup(dataset) {
        let mult = count as f64;
        let mut world_sum = 0.0;
        for atom in 0..g.atom_count() {
            let (mut s1, mut s0) = (0.0, 0.0);
            for &c in g.clauses_of(atom) {
                let w = weights[g.clauses[c].formula];
                if clause_sat_with(g, c, world, atom, true) {
                    s1 += w;
                }
                if clause_sat_with(g, c, world, atom, false) {
                    s0 += w;
                }
            }
            let lz = log_add_exp(s1, s0);
            world_sum += if world[atom] { s1 } else { s0 } - lz;
            if grad.is_some() {
                let p1 = libm::exp(s1 - lz);
                for &c in g.clauses_of(atom) {
                    let d1 = clause_sat_with(g, c, world, atom, true) as u8 as f64;
                    let d0 = clause_sat_with(g, c, world, atom, false) as u8 as f64;
                    let observed = if world[atom] { d1 } else { d0 };
                    local[g.clauses[c].formula] += observed - (p1 * d1 + (1.0 - p1) * d0);
                }
            }
        }
        total += mult * world_sum;
        if let Some(gr) = grad.as_deref_mut() {
            for (acc, l) in gr.iter_mut().zip(local.iter_mut()) {
                *acc += mult * *l;
                *l = 0.0;
            }
        }
    }
    Ok(total)
}

/// Σ over worlds and ground atoms of log P(atom | its Markov blanket).
pub fn pseudo_log_likelihood(
    g: &Grounding,
    weights: &[f64],
    dataset: &[Vec<bool>],
) -> Result<f64, MlnError> {
    pll_impl(g, weights, dataset, None)
}

/// Analytic gradient of [`pseudo_log_likelihood`] with respect to the weights.
pub fn pll_gradient(
    g: &Grounding,
    weights: &[f64],
    dataset: &[Vec<bool>],
) -> Result<Vec<f64>, MlnError> {
    let mut grad = alloc::vec![0.0; g.formula_count];
    pll_impl(g, weights, dataset, Some(&mut grad))?;
    Ok(grad)
}

fn penalty(weights: &[f64], sigma: f64) -> f64 {
    weights.iter().map(|w| w * w).sum::<f64>() / (2.0 * sigma * sigma)
}

/// PLL minus the Gaussian prior term Σ w²/2σ².
pub fn penalized_pll(
    g: &Grounding,
    weights: &[f64],
    dataset: &[Vec<bool>],
    sigma: f64,
) -> Result<f64, MlnError> {
    Ok(pseudo_log_likelihood(g, weights, dataset)? - penalty(weights, sigma))
}

fn objective_and_grad(
    g: &Grounding,
    w: &[f64],
    data: &[Vec<bool>],
    sigma: f64,
) -> Result<(f64, Vec<f64>), MlnError> {
    let mut grad = alloc::vec![0.0; w.len()];
    let pll = pll_impl(g, w, data, Some(&mut grad))?;
    for (gr, x) in grad.iter_mut().zip(w) {
        *gr -= x / (sigma * sigma);
    }
    Ok((pll - penalty(w, sigma), grad))
}

/// Gradient ascent on the penalized PLL starting from `initial`.
///
/// A step that lowers the objective is halved until it does not; the step
/// grows again after each accepted move. Returns the best weights seen.
pub fn learn_weights(
    g: &Grounding,
    initial: &[f64],
    dataset: &[Vec<bool>],
    opts: &LearnOptions,
) -> Result<LearnReport, MlnError> {
    let sigma = opts.l2_prior_sigma;
    let scale = 1.0 / dataset.len().max(1) as f64;
    let mut w = initial.to_vec();
    let (mut obj, mut grad) = objective_and_grad(g, &w, dataset, sigma)?;
    let mut trace = alloc::vec![obj];
    let mut step = opts.learning_rate;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        let norm = libm::sqrt(grad.iter().map(|x| x * x).sum::<f64>());
        if norm < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        for _ in 0..50 {
            let cand: Vec<f64> = w
                .iter()
                .zip(&grad)
                .map(|(x, gr)| x + step * scale * gr)
                .collect();
            let (c_obj, c_grad) = objective_and_grad(g, &cand, dataset, sigma)?;
            if c_obj >= obj {
                w = cand;
                obj = c_obj;
                grad = c_grad;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(obj);
        step *= 1.5;
    }
    Ok(LearnReport {
        weights: w,
        iterations,
        converged,
        objective_trace: trace,
    })
}

//! Wilcoxon rank-sum test and split-plot (mixed-design) ANOVA.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact null distributions are enumerated up to this combined sample size.
pub const EXACT_RANK_SUM_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSumMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumResult {
    /// Sum of the midranks of the first sample.
    pub statistic: f64,
    pub p_value: f64,
    pub method: RankSumMethod,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sample {0} is empty")]
    EmptySample(char),
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("subject `{subject}` has no rating for condition `{condition}`")]
    UnbalancedWithin { subject: String, condition: String },
    #[error("subject `{subject}` rated condition `{condition}` more than once")]
    DuplicateRating { subject: String, condition: String },
    #[error("subject `{0}` appears in more than one group")]
    GroupChange(String),
    #[error("design needs at least 2 groups, 2 conditions and more subjects than groups")]
    TooSmall,
}

/// Midranks (1-based) of the pooled sample, plus Σ(t³ − t) over tie groups.
fn midranks(pooled: &[f64]) -> (Vec<f64>, f64, bool) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = alloc::vec![0.0; pooled.len()];
    let mut tie_term = 0.0;
    let mut ties = false;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        let t = (j - i + 1) as f64;
        if t > 1.0 {
            ties = true;
            tie_term += t * t * t - t;
        }
        i = j + 1;
    }
    (ranks, tie_term, ties)
}

/// Number of size-`k` subsets of {1..n} for every possible rank sum.
fn subset_sum_counts(n: usize, k: usize) -> Vec<f64> {
    let max = n * (n + 1) / 2;
    // table[j][s]: subsets of size j with sum s
    let mut table = alloc::vec![alloc::vec![0.0f64; max + 1]; k + 1];
    table[0][0] = 1.0;
    for r in 1..=n {
        for j in (1..=k.min(r)).rev() {
            for s in (r..=max).rev() {
                table[j][s] += table[j - 1][s - r];
            }
        }
    }
    table.swap_remove(k)
}

/// Two-sided Wilcoxon–Mann–Whitney test.
pub fn rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumResult, StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptySample('a'));
    }
    if b.is_empty() {
        return Err(StatsError::EmptySample('b'));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, tie_term, ties) = midranks(&pooled);
    let w: f64 = ranks[..na].iter().sum();

    if n <= EXACT_RANK_SUM_CAP && !ties {
        let counts = subset_sum_counts(n, na);
        let total: f64 = counts.iter().sum();
        let wi = w as usize;
        let lower: f64 = counts[..=wi].iter().sum();
        let upper: f64 = counts[wi..].iter().sum();
        let p = (2.0 * lower.min(upper) / total).min(1.0);
        return Ok(RankSumResult {
            statistic: w,
            p_value: p,
            method: RankSumMethod::Exact,
        });
    }

    let (naf, nbf, nf) = (na as f64, nb as f64, n as f64);
    let u = w - naf * (naf + 1.0) / 2.0;
    let mean = naf * nbf / 2.0;
    let var = naf * nbf / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / libm::sqrt(var);
        libm::erfc(z / core::f64::consts::SQRT_2)
    };
    Ok(RankSumResult {
        statistic: w,
        p_value: p.clamp(0.0, 1.0),
        method: RankSumMethod::NormalApprox,
    })
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Upper tail P(F > f) of the F distribution.
pub fn f_survival(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRecord {
    pub subject: String,
    /// Between-subject factor level (mobility).
    pub group: String,
    /// Within-subject factor level (method).
    pub condition: String,
    pub rating: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnovaEffect {
    Method,
    Mobility,
    Interaction,
}

impl AnovaEffect {
    pub fn as_str(self) -> &'static str {
        match self {
            AnovaEffect::Method => "method",
            AnovaEffect::Mobility => "mobility",
            AnovaEffect::Interaction => "interaction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub effect: AnovaEffect,
    pub ss: f64,
    pub f: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumsOfSquares {
    pub total: f64,
    pub between_subjects: f64,
    pub within_subjects: f64,
    pub groups: f64,
    pub subjects_within_groups: f64,
    pub conditions: f64,
    pub interaction: f64,
    pub error_within: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub rows: Vec<AnovaRow>,
    pub ss: SumsOfSquares,
}

impl AnovaResult {
    pub fn row(&self, effect: AnovaEffect) -> &AnovaRow {
        self.rows
            .iter()
            .find(|r| r.effect == effect)
            .expect("all three effects are always present")
    }
}

fn f_test(effect: AnovaEffect, ss: f64, df1: usize, ss_err: f64, df2: usize, scale: f64) -> AnovaRow {
    let ms_err = ss_err / df2 as f64;
    let ms = ss / df1 as f64;
    // zero error variance: treated as no evidence rather than an infinite F
    let (f, p) = if ms_err <= 1e-12 * scale.max(1e-300) || !ms_err.is_finite() {
        (0.0, 1.0)
    } else {
        let f = (ms / ms_err).max(0.0);
        (f, f_survival(f, df1 as f64, df2 as f64))
    };
    AnovaRow {
        effect,
        ss,
        f,
        df1,
        df2,
        p_value: p,
    }
}

/// Mixed-design ANOVA with one between-subject and one within-subject factor.
pub fn mixed_anova(data: &[AnovaRecord]) -> Result<AnovaResult, StatsError> {
    let mut subjects: BTreeMap<&str, (&str, BTreeMap<&str, f64>)> = BTreeMap::new();
    let mut conditions: BTreeMap<&str, ()> = BTreeMap::new();
    for r in data {
        if !r.rating.is_finite() {
            return Err(StatsError::NonFinite);
        }
        conditions.insert(&r.condition, ());
        let entry = subjects
            .entry(&r.subject)
            .or_insert_with(|| (&r.group, BTreeMap::new()));
        if entry.0 != r.group {
            return Err(StatsError::GroupChange(r.subject.clone()));
        }
        if entry.1.insert(&r.condition, r.rating).is_some() {
            return Err(StatsError::DuplicateRating {
                subject: r.subject.clone(),
                condition: r.condition.clone(),
            });
        }
    }
    for (s, (_, ratings)) in &subjects {
        for c in conditions.keys() {
            if !ratings.contains_key(c) {
                return Err(StatsError::UnbalancedWithin {
                    subject: String::from(*s),
                    condition: String::from(*c),
                });
            }
        }
    }
    let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (s, (g, _)) in &subjects {
        groups.entry(g).or_default().push(s);
    }
    let (a, b, n) = (groups.len(), conditions.len(), subjects.len());
    if a < 2 || b < 2 || n <= a {
        return Err(StatsError::TooSmall);
    }
    let bf = b as f64;
    let grand = data.iter().map(|r| r.rating).sum::<f64>() / data.len() as f64;
    let subj_mean = |s: &str| subjects[s].1.values().sum::<f64>() / bf;

    let total: f64 = data.iter().map(|r| (r.rating - grand).powi(2)).sum();
    let between_subjects: f64 = subjects
        .keys()
        .map(|s| bf * (subj_mean(s) - grand).powi(2))
        .sum();
    let within_subjects: f64 = subjects
        .iter()
        .map(|(s, (_, ratings))| {
            let m = subj_mean(s);
            ratings.values().map(|y| (y - m).powi(2)).sum::<f64>()
        })
        .sum();
    let mut group_ss = 0.0;
    let mut cells = 0.0;
    for members in groups.values() {
        let nj = members.len() as f64;
        let gm = members.iter().map(|s| subj_mean(s)).sum::<f64>() / nj;
        group_ss += bf * nj * (gm - grand).powi(2);
        for c in conditions.keys() {
            let cm = members.iter().map(|s| subjects[s].1[c]).sum::<f64>() / nj;
            cells += nj * (cm - grand).powi(2);
        }
    }
    let cond_ss: f64 = conditions
        .keys()
        .map(|c| {
            let cm = subjects.values().map(|(_, r)| r[c]).sum::<f64>() / n as f64;
            n as f64 * (cm - grand).powi(2)
        })
        .sum();
    let interaction = (cells - group_ss - cond_ss).max(0.0);
    let subjects_within_groups = (between_subjects - group_ss).max(0.0);
    let error_within = (within_subjects - cond_ss - interaction).max(0.0);

    let df_sw = n - a;
    let df_err = (n - a) * (b - 1);
    let rows = alloc::vec![
        f_test(AnovaEffect::Method, cond_ss, b - 1, error_within, df_err, total),
        f_test(AnovaEffect::Mobility, group_ss, a - 1, subjects_within_groups, df_sw, total),
        f_test(
            AnovaEffect::Interaction,
            interaction,
            (a - 1) * (b - 1),
            error_within,
            df_err,
            total
        ),
    ];
    Ok(AnovaResult {
        rows,
        ss: SumsOfSquares {
            total,
            between_subjects,
            within_subjects,
            groups: group_ss,
            subjects_within_groups,
            conditions: cond_ss,
            interaction,
            error_within,
        },
    })
}

//! Cross-dataset comparison of models: average ranks, the Friedman test,
//! Nemenyi critical differences, pairwise win/tie/loss summaries and Pareto
//! frontiers.

mod special;

pub use special::{betai, chi_square_sf, f_sf, gamma_q, ln_gamma};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::math;
use crate::{Error, Result};

/// Significance levels with an embedded Nemenyi table.
pub const SUPPORTED_ALPHAS: [f64; 2] = [0.05, 0.10];

const Q_05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const Q_10: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

/// Datasets (rows) by models (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    datasets: Vec<String>,
    models: Vec<String>,
    values: Vec<f64>,
    higher_is_better: bool,
}

impl ScoreMatrix {
    /// `values` is row-major, one row per dataset.
    pub fn new(
        datasets: Vec<String>,
        models: Vec<String>,
        values: Vec<f64>,
        higher_is_better: bool,
    ) -> Result<Self> {
        let (n, k) = (datasets.len(), models.len());
        if n < 2 || k < 2 {
            return Err(Error::InvalidScores(format!(
                "need at least 2 datasets and 2 models, got {n} x {k}"
            )));
        }
        if values.len() != n * k {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: n * k,
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "score matrix",
                index,
            });
        }
        Ok(Self {
            datasets,
            models,
            values,
            higher_is_better,
        })
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn higher_is_better(&self) -> bool {
        self.higher_is_better
    }

    pub fn n(&self) -> usize {
        self.datasets.len()
    }

    pub fn k(&self) -> usize {
        self.models.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k()..(i + 1) * self.k()]
    }

    pub fn get(&self, dataset: usize, model: usize) -> f64 {
        self.values[dataset * self.k() + model]
    }

    fn better(&self, a: f64, b: f64) -> Ordering {
        if self.higher_is_better {
            b.total_cmp(&a)
        } else {
            a.total_cmp(&b)
        }
    }

    /// Mid-ranks of one row, rank 1 = best.
    pub fn row_ranks(&self, i: usize) -> Vec<f64> {
        let row = self.row(i);
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| self.better(row[a], row[b]));
        let mut ranks = vec![0.0; row.len()];
        let mut s = 0;
        while s < order.len() {
            let mut e = s;
            while e + 1 < order.len() && row[order[e + 1]] == row[order[s]] {
                e += 1;
            }
            let mid = (s + e) as f64 / 2.0 + 1.0;
            for &j in &order[s..=e] {
                ranks[j] = mid;
            }
            s = e + 1;
        }
        ranks
    }
}

/// Column means of the per-row mid-ranks.
pub fn average_ranks(scores: &ScoreMatrix) -> Vec<f64> {
    let mut sums = vec![0.0; scores.k()];
    for i in 0..scores.n() {
        for (s, r) in sums.iter_mut().zip(scores.row_ranks(i)) {
            *s += r;
        }
    }
    sums.iter().map(|s| s / scores.n() as f64).collect()
}

/// Friedman chi-square statistic and its p-value on `k - 1` degrees of freedom.
pub fn friedman(scores: &ScoreMatrix) -> (f64, f64) {
    let all_tied = (0..scores.n()).all(|i| {
        let row = scores.row(i);
        row.iter().all(|&v| v == row[0])
    });
    if all_tied {
        return (0.0, 1.0);
    }
    let (n, k) = (scores.n() as f64, scores.k() as f64);
    let sum_sq: f64 = average_ranks(scores).iter().map(|r| r * r).sum();
    let chi2 = (12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0) * (k + 1.0) / 4.0)).max(0.0);
    (chi2, chi_square_sf(chi2, k - 1.0))
}

/// Iman-Davenport F statistic and p-value on `(k-1, (k-1)(N-1))` degrees of
/// freedom.
pub fn iman_davenport(scores: &ScoreMatrix) -> (f64, f64) {
    let (chi2, _) = friedman(scores);
    let (n, k) = (scores.n() as f64, scores.k() as f64);
    let denom = n * (k - 1.0) - chi2;
    if denom <= 0.0 {
        return (f64::INFINITY, 0.0);
    }
    let f = (n - 1.0) * chi2 / denom;
    (f, f_sf(f, k - 1.0, (k - 1.0) * (n - 1.0)))
}

fn q_alpha(k: usize, alpha: f64) -> Result<f64> {
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &Q_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_10
    } else {
        return Err(Error::UnsupportedCd { k, alpha });
    };
    if !(2..=10).contains(&k) {
        return Err(Error::UnsupportedCd { k, alpha });
    }
    Ok(table[k - 2])
}

/// Nemenyi critical difference `q_alpha * sqrt(k(k+1)/(6N))`.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64> {
    let q = q_alpha(k, alpha)?;
    if n == 0 {
        return Err(Error::InvalidScores("no datasets".into()));
    }
    let kf = k as f64;
    Ok(q * math::sqrt(kf * (kf + 1.0) / (6.0 * n as f64)))
}

/// Model indices ordered by ascending rank, ties broken by label.
pub fn rank_order(ranks: &[f64], labels: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ranks.len()).collect();
    order.sort_by(|&a, &b| ranks[a].total_cmp(&ranks[b]).then_with(|| labels[a].cmp(&labels[b])));
    order
}

/// Maximal runs of models (in `rank_order`) whose rank spread is below `cd`.
/// Singletons are dropped. Each clique lists model indices by ascending rank.
pub fn cd_cliques(ranks: &[f64], labels: &[String], cd: f64) -> Vec<Vec<usize>> {
    let order = rank_order(ranks, labels);
    let mut cliques = Vec::new();
    let mut reach = 0;
    for start in 0..order.len() {
        let mut end = start;
        while end + 1 < order.len() && ranks[order[end + 1]] - ranks[order[start]] < cd {
            end += 1;
        }
        if end > start && (cliques.is_empty() || end > reach) {
            cliques.push(order[start..=end].to_vec());
        }
        reach = reach.max(end);
    }
    cliques
}

/// Everything shown on a critical-difference diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub models: Vec<String>,
    pub n_datasets: usize,
    pub higher_is_better: bool,
    pub average_ranks: Vec<f64>,
    pub chi2: f64,
    pub p_value: f64,
    /// Iman-Davenport `(F, p)` when requested.
    pub iman_davenport: Option<(f64, f64)>,
    pub alpha: f64,
    pub cd: f64,
    pub cliques: Vec<Vec<usize>>,
}

impl RankingReport {
    pub fn compute(scores: &ScoreMatrix, alpha: f64, with_iman_davenport: bool) -> Result<Self> {
        let cd = nemenyi_cd(scores.k(), scores.n(), alpha)?;
        let average_ranks = average_ranks(scores);
        let (chi2, p_value) = friedman(scores);
        let cliques = cd_cliques(&average_ranks, scores.models(), cd);
        Ok(Self {
            models: scores.models().to_vec(),
            n_datasets: scores.n(),
            higher_is_better: scores.higher_is_better(),
            average_ranks,
            chi2,
            p_value,
            iman_davenport: with_iman_davenport.then(|| iman_davenport(scores)),
            alpha,
            cd,
            cliques,
        })
    }

    /// Model indices by ascending rank.
    pub fn order(&self) -> Vec<usize> {
        rank_order(&self.average_ranks, &self.models)
    }
}

/// Head-to-head summary of model `i` against model `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSummary {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    /// Mean of `score_i - score_j` over datasets.
    pub mean_diff: f64,
}

/// `k x k` matrix of pairwise summaries; the diagonal is `None`. Wins
/// follow the matrix orientation.
pub fn multi_comparison_matrix(scores: &ScoreMatrix) -> Vec<Vec<Option<PairSummary>>> {
    let k = scores.k();
    let mut out = vec![vec![None; k]; k];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            let mut s = PairSummary {
                wins: 0,
                ties: 0,
                losses: 0,
                mean_diff: 0.0,
            };
            for d in 0..scores.n() {
                let (a, b) = (scores.get(d, i), scores.get(d, j));
                match scores.better(a, b) {
                    Ordering::Less => s.wins += 1,
                    Ordering::Equal => s.ties += 1,
                    Ordering::Greater => s.losses += 1,
                }
                s.mean_diff += a - b;
            }
            s.mean_diff /= scores.n() as f64;
            *cell = Some(s);
        }
    }
    out
}

/// Indices of points not dominated under (minimize cost, maximize score),
/// ordered by ascending cost then index. Exact duplicates are all kept.
pub fn pareto_frontier(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0).then(a.cmp(&b)));
    let mut frontier = Vec::new();
    let mut best_before = f64::NEG_INFINITY;
    let mut s = 0;
    while s < order.len() {
        let cost = points[order[s]].0;
        let mut e = s;
        while e + 1 < order.len() && points[order[e + 1]].0 == cost {
            e += 1;
        }
        let group = &order[s..=e];
        let top = group.iter().map(|&i| points[i].1).fold(f64::NEG_INFINITY, f64::max);
        if top > best_before {
            frontier.extend(group.iter().copied().filter(|&i| points[i].1 == top));
        }
        best_before = best_before.max(top);
        s = e + 1;
    }
    frontier
}

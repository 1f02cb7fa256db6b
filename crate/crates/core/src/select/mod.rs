//! Ranking SAE features by how strongly they encode the protected attribute.
//!
//! Three rankers, all fed with preactivations `z` (not activations):
//!
//! * [`stylist_rank`]: mean pairwise 1-Wasserstein distance between the
//!   per-group distributions of each feature.
//! * [`lp_rank`]: absolute weights of a linear probe predicting the attribute.
//! * [`clip_score_rank`]: absolute Pearson correlation with a per-sample
//!   prompt-similarity signal ([`clip_score_signal`]).

mod wasserstein;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use wasserstein::wasserstein_1d;

use crate::error::{Result, SnpError};
use crate::logistic::{LogisticOptions, StandardizedLogistic};
use crate::matrix::{cosine, Matrix};
use crate::sae::FeatureIndexSet;

/// Number of features kept after ranking unless configured otherwise.
pub const DEFAULT_K: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    scores: Vec<f64>,
    order: Vec<usize>,
}

impl FeatureRanking {
    /// Orders features by descending score, ties by ascending index.
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        if let Some(t) = scores.iter().position(|s| !s.is_finite()) {
            return Err(SnpError::Validation(format!(
                "feature {t} has non-finite score {}",
                scores[t]
            )));
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Ok(Self { scores, order })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// The first `k` entries of the ranking order.
pub fn top_k(ranking: &FeatureRanking, k: usize) -> Result<FeatureIndexSet> {
    if k == 0 || k > ranking.len() {
        return Err(SnpError::InvalidArgument(format!(
            "k must be in [1, {}], got {k}",
            ranking.len()
        )));
    }
    FeatureIndexSet::new(ranking.order[..k].to_vec(), ranking.len())
}

/// Preactivations of the reference set split by attribute value.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedPreacts {
    groups: Vec<Matrix>,
}

impl GroupedPreacts {
    pub fn new(groups: Vec<Matrix>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(SnpError::InvalidArgument(format!(
                "need at least two attribute groups, got {}",
                groups.len()
            )));
        }
        let m = groups[0].cols();
        for (i, g) in groups.iter().enumerate() {
            if g.rows() == 0 {
                return Err(SnpError::EmptyInput(format!("attribute group {i} is empty")));
            }
            if g.cols() != m {
                return Err(SnpError::Shape(format!(
                    "group {i} has {} features, group 0 has {m}",
                    g.cols()
                )));
            }
        }
        Ok(Self { groups })
    }

    /// Splits rows of `preacts` by attribute code; groups ordered by code.
    pub fn from_labels(preacts: &Matrix, attributes: &[u8]) -> Result<Self> {
        if preacts.rows() != attributes.len() {
            return Err(SnpError::Shape(format!(
                "{} preactivation rows for {} attribute labels",
                preacts.rows(),
                attributes.len()
            )));
        }
        let mut codes: Vec<u8> = attributes.to_vec();
        codes.sort_unstable();
        codes.dedup();
        let groups = codes
            .iter()
            .map(|&c| {
                let rows: Vec<usize> = (0..attributes.len())
                    .filter(|&i| attributes[i] == c)
                    .collect();
                preacts.select_rows(&rows)
            })
            .collect();
        Self::new(groups)
    }

    pub fn groups(&self) -> &[Matrix] {
        &self.groups
    }

    pub fn features(&self) -> usize {
        self.groups[0].cols()
    }
}

/// Score of feature `t` is the mean 1-Wasserstein distance over unordered
/// group pairs.
pub fn stylist_rank(groups: &GroupedPreacts) -> Result<FeatureRanking> {
    let sorted_columns: Vec<Matrix> = groups
        .groups
        .iter()
        .map(|g| {
            let mut t = g.transpose();
            for j in 0..t.rows() {
                t.row_mut(j).sort_by(f64::total_cmp);
            }
            t
        })
        .collect();
    let g = sorted_columns.len();
    let pairs = (g * (g - 1) / 2) as f64;
    let scores: Vec<f64> = (0..groups.features())
        .into_par_iter()
        .map(|t| {
            let mut total = 0.0;
            for i in 0..g {
                for j in i + 1..g {
                    total += wasserstein::sorted_wasserstein(
                        sorted_columns[i].row(t),
                        sorted_columns[j].row(t),
                    );
                }
            }
            total / pairs
        })
        .collect();
    FeatureRanking::from_scores(scores)
}

/// Fits a standardized, class-balanced, intercept-free probe on all feature
/// columns and scores each feature by its absolute standardized weight.
pub fn lp_rank(preacts: &Matrix, labels: &[u8], opts: &LogisticOptions) -> Result<FeatureRanking> {
    let probe = StandardizedLogistic::fit(preacts, labels, opts)?;
    FeatureRanking::from_scores(probe.standardized_weights().iter().map(|w| w.abs()).collect())
}

/// Pearson correlation; `None` when either input has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        None
    } else {
        Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
    }
}

/// Score of feature `t` is `|corr(z[:, t], clip_scores)|`; constant columns score 0.
pub fn clip_score_rank(preacts: &Matrix, clip_scores: &[f64]) -> Result<FeatureRanking> {
    if clip_scores.len() != preacts.rows() {
        return Err(SnpError::Shape(format!(
            "{} clip scores for {} samples",
            clip_scores.len(),
            preacts.rows()
        )));
    }
    if clip_scores.len() < 2 || pearson(clip_scores, clip_scores).is_none() {
        return Err(SnpError::Validation("clip scores have zero variance".into()));
    }
    let columns = preacts.transpose();
    let scores = (0..columns.rows())
        .into_par_iter()
        .map(|t| pearson(columns.row(t), clip_scores).map_or(0.0, f64::abs))
        .collect();
    FeatureRanking::from_scores(scores)
}

/// Per-sample prompt similarity: `cos(x, p₀) - cos(x, p₁)` for two prompts,
/// `cos(x, p₀)` for one.
pub fn clip_score_signal(image_embs: &Matrix, prompt_embs: &Matrix) -> Result<Vec<f64>> {
    let p = prompt_embs.rows();
    if !(1..=2).contains(&p) {
        return Err(SnpError::InvalidArgument(format!(
            "expected 1 or 2 prompt embeddings, got {p}"
        )));
    }
    if prompt_embs.cols() != image_embs.cols() {
        return Err(SnpError::Shape(format!(
            "prompt dim {} != image dim {}",
            prompt_embs.cols(),
            image_embs.cols()
        )));
    }
    let zero_norm = |what: &str, i: usize| SnpError::Validation(format!("{what} {i} has zero norm"));
    for j in 0..p {
        if prompt_embs.row(j).iter().all(|&v| v == 0.0) {
            return Err(zero_norm("prompt embedding", j));
        }
    }
    image_embs
        .row_iter()
        .enumerate()
        .map(|(i, x)| {
            let c0 = cosine(x, prompt_embs.row(0)).ok_or_else(|| zero_norm("image embedding", i))?;
            if p == 2 {
                let c1 = cosine(x, prompt_embs.row(1)).ok_or_else(|| zero_norm("image embedding", i))?;
                Ok(c0 - c1)
            } else {
                Ok(c0)
            }
        })
        .collect()
}

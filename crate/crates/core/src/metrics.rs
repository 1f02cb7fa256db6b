//! Retrieval and classification fairness metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnpError};
use crate::matrix::{dot, norm, Matrix};

/// Added to every histogram count before normalizing.
pub const SMOOTHING: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: String,
    pub ranked_ids: Vec<String>,
    pub ranked_indices: Vec<usize>,
    pub similarities: Vec<f64>,
}

/// Top-`n` rows of `embeddings` by cosine similarity to `query`; equal
/// similarities keep row order.
pub fn retrieve_topn(
    query_id: &str,
    query: &[f64],
    embeddings: &Matrix,
    sample_ids: &[String],
    n: usize,
) -> Result<RetrievalResult> {
    if query.len() != embeddings.cols() {
        return Err(SnpError::Shape(format!(
            "query has {} entries, embeddings have {} columns",
            query.len(),
            embeddings.cols()
        )));
    }
    if sample_ids.len() != embeddings.rows() {
        return Err(SnpError::Length(format!(
            "{} ids for {} embeddings",
            sample_ids.len(),
            embeddings.rows()
        )));
    }
    if n > embeddings.rows() {
        return Err(SnpError::InvalidArgument(format!(
            "cannot retrieve {n} of {} samples",
            embeddings.rows()
        )));
    }
    let qn = norm(query);
    if qn.is_nan() || qn <= 0.0 {
        return Err(SnpError::Validation(format!("query {query_id:?} has zero norm")));
    }
    let sims = embeddings
        .row_iter()
        .enumerate()
        .map(|(i, row)| {
            let rn = norm(row);
            if rn > 0.0 {
                Ok(dot(row, query) / (rn * qn))
            } else {
                Err(SnpError::Validation(format!("embedding {:?} has zero norm", sample_ids[i])))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..sims.len()).collect();
    order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
    order.truncate(n);
    Ok(RetrievalResult {
        query_id: query_id.to_string(),
        ranked_ids: order.iter().map(|&i| sample_ids[i].clone()).collect(),
        similarities: order.iter().map(|&i| sims[i]).collect(),
        ranked_indices: order,
    })
}

/// Smoothed distributions over the union of codes seen in either list.
fn smoothed(retrieved: &[u8], dataset: &[u8]) -> Result<Vec<(f64, f64)>> {
    if retrieved.is_empty() || dataset.is_empty() {
        return Err(SnpError::EmptyInput("attribute lists must be nonempty".into()));
    }
    let mut counts: BTreeMap<u8, (f64, f64)> = BTreeMap::new();
    for &a in retrieved {
        counts.entry(a).or_default().0 += 1.0;
    }
    for &a in dataset {
        counts.entry(a).or_default().1 += 1.0;
    }
    let k = counts.len() as f64;
    let tr = retrieved.len() as f64 + SMOOTHING * k;
    let td = dataset.len() as f64 + SMOOTHING * k;
    Ok(counts
        .values()
        .map(|&(r, d)| ((r + SMOOTHING) / tr, (d + SMOOTHING) / td))
        .collect())
}

/// `KL(p_retrieved ‖ p_dataset)`, natural log.
pub fn kl_retrieval(retrieved: &[u8], dataset: &[u8]) -> Result<f64> {
    let kl: f64 = smoothed(retrieved, dataset)?
        .into_iter()
        .map(|(p, q)| p * (p / q).ln())
        .sum();
    Ok(kl.max(0.0))
}

/// `max_a ln(p_retrieved(a) / p_dataset(a))`.
pub fn max_skew(retrieved: &[u8], dataset: &[u8]) -> Result<f64> {
    let skew = smoothed(retrieved, dataset)?
        .into_iter()
        .map(|(p, q)| (p / q).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(skew.max(0.0))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(SnpError::Length(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(SnpError::Validation("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count() as u128;
    let neg = labels.len() as u128 - pos;
    if pos == 0 || neg == 0 {
        return Err(SnpError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the Mann-Whitney U, kept integral so ties stay exact
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut p, mut q) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        twice_u += 2 * p * neg_below + p * q;
        neg_below += q;
        i = j;
    }
    Ok(twice_u as f64 / (2 * pos * neg) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAuc {
    pub attribute: u8,
    pub class: u32,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstGroupAuc {
    pub value: f64,
    pub groups: Vec<GroupAuc>,
    /// `(attribute, class)` pairs with a single outcome in their slice.
    pub skipped: Vec<(u8, u32)>,
}

/// Minimum over attribute values `a` and classes `c` of the AUC of score
/// column `c` for `task == c` within the samples having attribute `a`.
pub fn worst_group_roc_auc(class_scores: &Matrix, task_labels: &[u32], attributes: &[u8]) -> Result<WorstGroupAuc> {
    let n = class_scores.rows();
    if task_labels.len() != n || attributes.len() != n {
        return Err(SnpError::Length(format!(
            "{n} score rows, {} task labels, {} attributes",
            task_labels.len(),
            attributes.len()
        )));
    }
    let mut codes: Vec<u8> = attributes.to_vec();
    codes.sort_unstable();
    codes.dedup();
    let mut groups = Vec::new();
    let mut skipped = Vec::new();
    for &a in &codes {
        let rows: Vec<usize> = (0..n).filter(|&i| attributes[i] == a).collect();
        for c in 0..class_scores.cols() {
            let class = c as u32;
            let labels: Vec<u8> = rows.iter().map(|&i| u8::from(task_labels[i] == class)).collect();
            let positives = labels.iter().filter(|&&y| y == 1).count();
            if positives == 0 || positives == labels.len() {
                log::warn!("group (attribute {a}, class {class}) has a single outcome; skipped");
                skipped.push((a, class));
                continue;
            }
            let scores: Vec<f64> = rows.iter().map(|&i| class_scores.get(i, c)).collect();
            groups.push(GroupAuc {
                attribute: a,
                class,
                auc: roc_auc(&scores, &labels)?,
            });
        }
    }
    let value = groups
        .iter()
        .map(|g| g.auc)
        .min_by(f64::total_cmp)
        .ok_or_else(|| SnpError::Validation("no (attribute, class) group has both outcomes".into()))?;
    Ok(WorstGroupAuc {
        value,
        groups,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_and_skew_hand_cases() {
        let dataset = [0, 0, 1, 1];
        let retrieved = [0, 0, 0, 1];
        let kl = kl_retrieval(&retrieved, &dataset).unwrap();
        assert!((kl - (0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln())).abs() < 1e-6);
        assert!((max_skew(&retrieved, &dataset).unwrap() - 1.5f64.ln()).abs() < 1e-6);
        assert!(kl_retrieval(&dataset, &dataset).unwrap() < 1e-9);
        assert!((kl_retrieval(&[1, 1], &dataset).unwrap() - 2f64.ln()).abs() < 1e-4);
        assert!(kl_retrieval(&[], &dataset).is_err());
    }

    #[test]
    fn auc_extremes() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 4], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[1.0, 2.0], &[1, 1]), Err(SnpError::SingleClass)));
    }

    #[test]
    fn retrieval_ties_keep_order() {
        let x = Matrix::from_rows(&[[1.0, 1.0]; 4]).unwrap();
        let ids: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
        let r = retrieve_topn("q", &[2.0, 2.0], &x, &ids, 2).unwrap();
        assert_eq!(r.ranked_ids, vec!["s0", "s1"]);
        assert!(retrieve_topn("q", &[0.0, 0.0], &x, &ids, 2).is_err());
        assert!(retrieve_topn("q", &[1.0, 0.0], &x, &ids, 5).is_err());
    }

    #[test]
    fn worst_group_counts_four_groups() {
        let scores = Matrix::from_rows(&[
            [0.9, 0.1],
            [0.2, 0.8],
            [0.7, 0.3],
            [0.4, 0.6],
            [0.8, 0.2],
            [0.1, 0.9],
        ])
        .unwrap();
        let task = [0, 1, 0, 1, 0, 1];
        let attrs = [0, 0, 0, 1, 1, 1];
        let wg = worst_group_roc_auc(&scores, &task, &attrs).unwrap();
        assert_eq!(wg.groups.len(), 4);
        assert!(wg.skipped.is_empty());
        assert_eq!(wg.value, 1.0);
    }

    #[test]
    fn worst_group_skips_single_outcome() {
        let scores = Matrix::from_rows(&[[0.9, 0.1], [0.2, 0.8], [0.7, 0.3]]).unwrap();
        let wg = worst_group_roc_auc(&scores, &[0, 1, 0], &[0, 0, 1]).unwrap();
        assert_eq!(wg.skipped, vec![(1, 0), (1, 1)]);
        assert_eq!(wg.groups.len(), 2);
    }
}

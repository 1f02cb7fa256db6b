use rayon::prelude::*;

use super::config::{ExperimentConfig, Removal, Selection};
use super::folds::{kfold_splits, Split};
use super::report::{FoldMetrics, MetricReport};
use crate::axis::{cav_baseline, interpolation_weights, synthesize_axis_decoder, synthesize_axis_encoder};
use crate::data::{align_labels, load_embedding_set, load_sae_bundle, read_labels, read_matrix, AlignedLabels, EmbeddingSet};
use crate::error::{Result, SnpError};
use crate::logistic::{LogisticOptions, StandardizedLogistic};
use crate::matrix::{cosine, Matrix};
use crate::metrics::{kl_retrieval, max_skew, retrieve_topn, worst_group_roc_auc};
use crate::project::{rank1_projector, subspace_projector, Projector};
use crate::sae::{masked_reconstruction_debias, preactivations, FeatureIndexSet, SaeParams};
use crate::select::{clip_score_rank, clip_score_signal, lp_rank, stylist_rank, top_k, FeatureRanking, GroupedPreacts};

/// Inputs of one experiment, loaded and aligned.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub embeddings: EmbeddingSet,
    pub labels: AlignedLabels,
    pub sae: SaeParams,
    pub queries: EmbeddingSet,
    pub prompts: Option<Matrix>,
    pub class_prompts: Option<Matrix>,
}

impl ExperimentData {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let p = &cfg.paths;
        let embeddings = load_embedding_set(&p.embeddings)?;
        let labels = align_labels(&embeddings, &read_labels(&p.labels)?)?;
        let sae = load_sae_bundle(&p.sae_bundle)?.params;
        let queries = load_embedding_set(&p.queries)?;
        let prompts = p.prompts.as_ref().map(read_matrix).transpose()?;
        let class_prompts = p.class_prompts.as_ref().map(read_matrix).transpose()?;
        let data = Self {
            embeddings,
            labels,
            sae,
            queries,
            prompts,
            class_prompts,
        };
        data.check_dims()?;
        Ok(data)
    }

    fn check_dims(&self) -> Result<()> {
        let n = self.embeddings.dim();
        let mut dims = vec![("SAE", self.sae.embed_dim()), ("queries", self.queries.dim())];
        if let Some(p) = &self.prompts {
            dims.push(("prompts", p.cols()));
        }
        if let Some(p) = &self.class_prompts {
            dims.push(("class prompts", p.cols()));
        }
        for (what, d) in dims {
            if d != n {
                return Err(SnpError::Shape(format!("{what} dimension {d} != embedding dimension {n}")));
            }
        }
        Ok(())
    }
}

/// A fitted removal step.
#[derive(Debug, Clone)]
pub enum Debiaser {
    Identity,
    Masked(FeatureIndexSet),
    Project(Projector),
}

impl Debiaser {
    pub fn apply(&self, x: &Matrix, sae: &SaeParams) -> Result<Matrix> {
        match self {
            Debiaser::Identity => Ok(x.clone()),
            Debiaser::Masked(s) => masked_reconstruction_debias(x, sae, s),
            Debiaser::Project(p) => p.apply(x),
        }
    }

    pub fn projector_rank(&self) -> Option<usize> {
        match self {
            Debiaser::Project(p) => Some(p.rank()),
            _ => None,
        }
    }
}

/// Ranks features on reference preactivations.
pub fn rank_features(
    selection: Selection,
    preacts: &Matrix,
    reference: &Matrix,
    attributes: &[u8],
    prompts: Option<&Matrix>,
    opts: &LogisticOptions,
) -> Result<Option<FeatureRanking>> {
    Ok(Some(match selection {
        Selection::None => return Ok(None),
        Selection::Stylist => stylist_rank(&GroupedPreacts::from_labels(preacts, attributes)?)?,
        Selection::Lp => lp_rank(preacts, attributes, opts)?,
        Selection::ClipScore => {
            let prompts = prompts.ok_or_else(|| SnpError::Config("clip_score needs prompt embeddings".into()))?;
            clip_score_rank(preacts, &clip_score_signal(reference, prompts)?)?
        }
    }))
}

/// Reference-split inputs a removal step is fitted on.
#[derive(Debug, Clone, Copy)]
pub struct RemovalInputs<'a> {
    pub sae: &'a SaeParams,
    pub reference: &'a Matrix,
    /// Reference preactivations, when already computed.
    pub preacts: Option<&'a Matrix>,
    pub attributes: &'a [u8],
    pub selected: Option<&'a FeatureIndexSet>,
}

/// Fits the removal step on the reference split.
pub fn build_debiaser(
    removal: Removal,
    interpolation: bool,
    inputs: &RemovalInputs<'_>,
    opts: &LogisticOptions,
) -> Result<Debiaser> {
    let RemovalInputs {
        sae,
        reference,
        preacts,
        attributes,
        selected,
    } = *inputs;
    let need_selected = || selected.ok_or_else(|| SnpError::Config(format!("removal {removal} needs selected features")));
    Ok(match removal {
        Removal::None => Debiaser::Identity,
        Removal::MaskedReconstruction => Debiaser::Masked(need_selected()?.clone()),
        Removal::Cav => Debiaser::Project(rank1_projector(&cav_baseline(reference, attributes, opts)?)?),
        Removal::PerpEncoder | Removal::PerpDecoder => {
            let s = need_selected()?;
            let encoder = removal == Removal::PerpEncoder;
            if interpolation {
                let owned;
                let z = match preacts {
                    Some(z) => z,
                    None => {
                        owned = preactivations(reference, sae)?;
                        &owned
                    }
                };
                let w = interpolation_weights(z, s, attributes, opts)?;
                let axis = if encoder {
                    synthesize_axis_encoder(sae, s, &w)?
                } else {
                    synthesize_axis_decoder(sae, s, &w)?
                };
                Debiaser::Project(rank1_projector(&axis)?)
            } else {
                let columns = if encoder {
                    sae.encoder().select_columns(s.as_slice())
                } else {
                    sae.decoder().select_rows(s.as_slice()).transpose()
                };
                let source = if encoder { "encoder" } else { "decoder" };
                Debiaser::Project(subspace_projector(&columns, source)?)
            }
        }
    })
}

/// One probe per task class producing an `N x C` score matrix.
#[derive(Debug, Clone)]
pub struct ClassProbe {
    classes: usize,
    probes: Vec<StandardizedLogistic>,
}

impl ClassProbe {
    /// Two classes share one probe; more classes use one-vs-rest probes.
    pub fn fit(x: &Matrix, labels: &[u32], classes: usize, opts: &LogisticOptions) -> Result<Self> {
        if classes < 2 {
            return Err(SnpError::SingleClass);
        }
        let targets: Vec<u32> = if classes == 2 { vec![1] } else { (0..classes as u32).collect() };
        let probes = targets
            .iter()
            .map(|&c| {
                let y: Vec<u8> = labels.iter().map(|&l| u8::from(l == c)).collect();
                StandardizedLogistic::fit(x, &y, opts)
            })
            .collect::<Result<_>>()?;
        Ok(Self { classes, probes })
    }

    pub fn scores(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.classes);
        if self.classes == 2 {
            for (i, s) in self.probes[0].decision_scores(x)?.into_iter().enumerate() {
                out.set(i, 0, -s);
                out.set(i, 1, s);
            }
        } else {
            for (c, p) in self.probes.iter().enumerate() {
                for (i, s) in p.decision_scores(x)?.into_iter().enumerate() {
                    out.set(i, c, s);
                }
            }
        }
        Ok(out)
    }

    /// Highest-scoring class per row; ties go to the lower class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<u32>> {
        let s = self.scores(x)?;
        Ok(s.row_iter()
            .map(|r| {
                let mut best = 0;
                for (c, &v) in r.iter().enumerate() {
                    if v > r[best] {
                        best = c;
                    }
                }
                best as u32
            })
            .collect())
    }
}

/// Accuracy of a fresh probe trained on the even-position rows and tested on
/// the odd-position rows.
pub fn probe_accuracy(x: &Matrix, labels: &[u32], classes: usize, opts: &LogisticOptions) -> Result<f64> {
    if labels.len() != x.rows() || x.rows() < 2 {
        return Err(SnpError::Length(format!("{} rows for {} labels", x.rows(), labels.len())));
    }
    let train: Vec<usize> = (0..x.rows()).step_by(2).collect();
    let test: Vec<usize> = (1..x.rows()).step_by(2).collect();
    let pick = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<u32>>();
    let probe = ClassProbe::fit(&x.select_rows(&train), &pick(&train), classes, opts)?;
    let pred = probe.predict(&x.select_rows(&test))?;
    let truth = pick(&test);
    let hits = pred.iter().zip(&truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / test.len() as f64)
}

/// Selection, removal and evaluation on one split.
pub fn run_fold(cfg: &ExperimentConfig, data: &ExperimentData, fold: usize, split: &Split) -> Result<FoldMetrics> {
    let opts = LogisticOptions::with_l2(cfg.l2);
    let sae = &data.sae;
    let x = data.embeddings.embeddings();
    let x_ref = x.select_rows(&split.reference);
    let x_eval = x.select_rows(&split.eval);
    let labels_ref = data.labels.subset(&split.reference);
    let labels_eval = data.labels.subset(&split.eval);
    let a_ref = &labels_ref.attributes;

    let preacts = match cfg.selection {
        Selection::None => None,
        _ => Some(preactivations(&x_ref, sae)?),
    };
    let ranking = match &preacts {
        Some(z) => rank_features(cfg.selection, z, &x_ref, a_ref, data.prompts.as_ref(), &opts)?,
        None => None,
    };
    let selected = ranking.as_ref().map(|r| top_k(r, cfg.k)).transpose()?;
    let inputs = RemovalInputs {
        sae,
        reference: &x_ref,
        preacts: preacts.as_ref(),
        attributes: a_ref,
        selected: selected.as_ref(),
    };
    let debiaser = build_debiaser(cfg.removal, cfg.interpolation, &inputs, &opts)?;
    let y_ref = debiaser.apply(&x_ref, sae)?;
    let y_eval = debiaser.apply(&x_eval, sae)?;

    let eval_ids: Vec<String> = split.eval.iter().map(|&i| data.embeddings.sample_ids()[i].clone()).collect();
    let a_eval = &labels_eval.attributes;
    let (mut kl, mut skew) = (0.0, 0.0);
    let queries = data.queries.embeddings();
    for (qi, q) in queries.row_iter().enumerate() {
        let r = retrieve_topn(&data.queries.sample_ids()[qi], q, &y_eval, &eval_ids, cfg.top_n)?;
        let retrieved: Vec<u8> = r.ranked_indices.iter().map(|&i| a_eval[i]).collect();
        kl += kl_retrieval(&retrieved, a_eval)?;
        skew += max_skew(&retrieved, a_eval)?;
    }
    let nq = queries.rows().max(1) as f64;

    let attr_u32: Vec<u32> = a_eval.iter().map(|&a| u32::from(a)).collect();
    let attribute_probe_accuracy = probe_accuracy(&y_eval, &attr_u32, 2, &opts)?;

    let (wg_roc_auc, task_probe_accuracy) = match (&labels_ref.task_labels, &labels_eval.task_labels) {
        (Some(t_ref), Some(t_eval)) => {
            let classes = data
                .labels
                .task_labels
                .as_ref()
                .and_then(|t| t.iter().max())
                .map_or(0, |&c| c as usize + 1);
            let scores = match &data.class_prompts {
                Some(p) => cosine_scores(&y_eval, p)?,
                None => ClassProbe::fit(&y_ref, t_ref, classes, &opts)?.scores(&y_eval)?,
            };
            let wg = worst_group_roc_auc(&scores, t_eval, a_eval)?;
            (Some(wg.value), Some(probe_accuracy(&y_eval, t_eval, classes, &opts)?))
        }
        _ => (None, None),
    };

    Ok(FoldMetrics {
        fold,
        kl: kl / nq,
        max_skew: skew / nq,
        wg_roc_auc,
        attribute_probe_accuracy,
        task_probe_accuracy,
        selected: selected.map(|s| s.into_vec()).unwrap_or_default(),
        projector_rank: debiaser.projector_rank(),
    })
}

fn cosine_scores(x: &Matrix, prompts: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(x.rows(), prompts.rows());
    for (i, row) in x.row_iter().enumerate() {
        for c in 0..prompts.rows() {
            let s = cosine(row, prompts.row(c))
                .ok_or_else(|| SnpError::Validation(format!("zero-norm vector scoring row {i} against class {c}")))?;
            out.set(i, c, s);
        }
    }
    Ok(out)
}

fn not_applicable(cfg: &ExperimentConfig) -> MetricReport {
    log::warn!("interpolation does not apply to masked reconstruction; reporting N/A");
    MetricReport::new(cfg, Vec::new())
}

/// Runs every fold in parallel and assembles the report in fold order.
pub fn run_on_data(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<MetricReport> {
    cfg.validate()?;
    if !cfg.is_applicable() {
        return Ok(not_applicable(cfg));
    }
    let splits = kfold_splits(data.embeddings.len(), cfg.folds, cfg.ref_fraction, cfg.seed)?;
    let results: Vec<Result<FoldMetrics>> = splits
        .par_iter()
        .enumerate()
        .map(|(f, s)| run_fold(cfg, data, f, s))
        .collect();
    let folds = results
        .into_iter()
        .enumerate()
        .map(|(fold, r)| {
            r.map_err(|e| SnpError::Fold {
                fold,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::new(cfg, folds))
}

/// Loads the configured inputs and runs the experiment.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<MetricReport> {
    cfg.validate()?;
    if !cfg.is_applicable() {
        return Ok(not_applicable(cfg));
    }
    run_on_data(cfg, &ExperimentData::load(cfg)?)
}

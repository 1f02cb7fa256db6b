use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::config::SyntheticConfig;
use super::pipeline::ExperimentData;
use crate::data::{
    save_embedding_set, write_labels, write_matrix, write_sae_bundle, AlignedLabels, EmbeddingSet, Label, LabelTable,
    SaeBundle,
};
use crate::error::{Result, SnpError};
use crate::matrix::{norm, Matrix};
use crate::sae::SaeParams;

/// Everything the generator emits, plus the ground truth it planted.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub embeddings: EmbeddingSet,
    pub labels: LabelTable,
    pub attributes: Vec<u8>,
    pub task_labels: Vec<u32>,
    pub bundle: SaeBundle,
    pub queries: EmbeddingSet,
    /// Row `a` is the prompt embedding for attribute value `a`.
    pub prompts: Matrix,
    /// Unit vector along the difference of the two composite attribute features.
    pub attribute_direction: Vec<f64>,
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(v: Vec<f64>) -> Result<Vec<f64>> {
    let n = norm(&v);
    if n.is_nan() || n <= 0.0 {
        return Err(SnpError::Config("generator produced a zero direction".into()));
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

fn mean_atom(dict: &Matrix, features: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; dict.cols()];
    for &j in features {
        for (o, d) in out.iter_mut().zip(dict.row(j)) {
            *o += d / features.len() as f64;
        }
    }
    out
}

/// Orthonormal dictionary: the first `m` columns of a random rotation, one
/// atom per row of the returned `m x n` matrix.
fn random_dictionary(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Matrix {
    let g = nalgebra::DMatrix::from_row_slice(n, n, &gaussian_vec(rng, n * n));
    let q = g.qr().q();
    let mut dict = Matrix::zeros(m, n);
    for j in 0..m {
        for i in 0..n {
            dict.set(j, i, q[(i, j)]);
        }
    }
    dict
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let (n, m) = (cfg.n, cfg.m);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dict = random_dictionary(&mut rng, n, m);

    let half = cfg.planted_attr_features.len() / 2;
    let (first, second) = cfg.planted_attr_features.split_at(half);
    let background: Vec<usize> = (0..m)
        .filter(|j| !cfg.planted_attr_features.contains(j) && !cfg.planted_task_features.contains(j))
        .collect();
    let amplitude = Exp::new(1.0 / cfg.background_scale).map_err(|e| SnpError::Config(e.to_string()))?;

    let mut x = Matrix::zeros(cfg.samples, n);
    let mut attributes = Vec::with_capacity(cfg.samples);
    let mut task_labels = Vec::with_capacity(cfg.samples);
    let mut coeffs = vec![0.0; m];
    for i in 0..cfg.samples {
        let a = u8::from(rng.random_bool(0.5));
        let t = u32::from(rng.random_bool(0.5));
        coeffs.iter_mut().for_each(|c| *c = 0.0);
        for &j in &background {
            let active = rng.random::<f64>() < cfg.background_density;
            let amp: f64 = amplitude.sample(&mut rng);
            if active {
                coeffs[j] = amp;
            }
        }
        let strength = cfg.attr_shift + cfg.shared_task_shift * (2.0 * t as f64 - 1.0);
        let group = if a == 1 { first } else { second };
        for &j in group {
            coeffs[j] += strength / group.len() as f64;
        }
        if !cfg.planted_task_features.is_empty() {
            let per = cfg.task_shift * t as f64 / cfg.planted_task_features.len() as f64;
            for &j in &cfg.planted_task_features {
                coeffs[j] += per;
            }
        }
        let row = x.row_mut(i);
        for (j, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                for (r, d) in row.iter_mut().zip(dict.row(j)) {
                    *r += c * d;
                }
            }
        }
        for r in row.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *r += cfg.noise_sigma * e;
        }
        attributes.push(a);
        task_labels.push(t);
    }

    let direction: Vec<f64> = mean_atom(&dict, first)
        .iter()
        .zip(mean_atom(&dict, second))
        .map(|(p, q)| p - q)
        .collect();
    let direction = unit(direction)?;

    let mut queries = Matrix::zeros(cfg.n_queries, n);
    for q in 0..cfg.n_queries {
        let r = unit(gaussian_vec(&mut rng, n))?;
        let biased: Vec<f64> = r
            .iter()
            .zip(&direction)
            .map(|(r, g)| r + cfg.query_attr_bias * g)
            .collect();
        queries.row_mut(q).copy_from_slice(&unit(biased)?);
    }

    let offset = unit(gaussian_vec(&mut rng, n))?;
    let mut prompts = Matrix::zeros(2, n);
    for i in 0..n {
        prompts.set(0, i, offset[i] - direction[i]);
        prompts.set(1, i, offset[i] + direction[i]);
    }

    let ids: Vec<String> = (0..cfg.samples).map(|i| format!("s{i:05}")).collect();
    let mut labels = LabelTable::new();
    for ((id, &a), &t) in ids.iter().zip(&attributes).zip(&task_labels) {
        labels.insert(
            id.clone(),
            Label {
                attribute: a,
                task_label: Some(t),
            },
        )?;
    }
    let query_ids = (0..cfg.n_queries).map(|q| format!("q{q:03}")).collect();

    Ok(SyntheticData {
        embeddings: EmbeddingSet::new(x, ids)?,
        labels,
        attributes,
        task_labels,
        bundle: SaeBundle::from_params(SaeParams::tied(dict)?),
        queries: EmbeddingSet::new(queries, query_ids)?,
        prompts,
        attribute_direction: direction,
    })
}

impl SyntheticData {
    /// The in-memory inputs of an experiment on this dataset.
    pub fn experiment_data(&self) -> ExperimentData {
        ExperimentData {
            embeddings: self.embeddings.clone(),
            labels: AlignedLabels {
                attributes: self.attributes.clone(),
                task_labels: Some(self.task_labels.clone()),
            },
            sae: self.bundle.params.clone(),
            queries: self.queries.clone(),
            prompts: Some(self.prompts.clone()),
            class_prompts: None,
        }
    }
}

/// File names inside a synthetic dataset directory.
pub mod files {
    pub const EMBEDDINGS: &str = "embeddings.snpm";
    pub const LABELS: &str = "labels.csv";
    pub const SAE: &str = "sae";
    pub const QUERIES: &str = "queries.snpm";
    pub const PROMPTS: &str = "prompts.snpm";
    pub const EXPERIMENT: &str = "experiment.json";
    pub const SYNTH_CONFIG: &str = "synth.json";
}

/// Writes the dataset plus a ready-to-run `experiment.json` with
/// directory-relative paths.
pub fn write_synthetic(data: &SyntheticData, cfg: &SyntheticConfig, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| SnpError::io(dir, e))?;
    save_embedding_set(&data.embeddings, dir.join(files::EMBEDDINGS))?;
    write_labels(&data.labels, dir.join(files::LABELS))?;
    write_sae_bundle(&data.bundle, dir.join(files::SAE))?;
    save_embedding_set(&data.queries, dir.join(files::QUERIES))?;
    write_matrix(&data.prompts, dir.join(files::PROMPTS))?;

    let experiment = serde_json::json!({
        "selection": "stylist",
        "removal": "perp_encoder",
        "interpolation": true,
        "k": crate::select::DEFAULT_K.min(cfg.m),
        "folds": 5,
        "ref_fraction": 0.5,
        "top_n": 500.min(cfg.samples / 2),
        "seed": cfg.seed,
        "paths": {
            "embeddings": files::EMBEDDINGS,
            "labels": files::LABELS,
            "sae_bundle": files::SAE,
            "queries": files::QUERIES,
            "prompts": files::PROMPTS,
        }
    });
    for (name, value) in [
        (files::EXPERIMENT, serde_json::to_string_pretty(&experiment)?),
        (files::SYNTH_CONFIG, serde_json::to_string_pretty(cfg)?),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, value).map_err(|e| SnpError::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            samples: 200,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_synthetic(&small()).unwrap();
        let b = generate_synthetic(&small()).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.prompts, b.prompts);
    }

    #[test]
    fn dictionary_is_orthonormal() {
        let d = generate_synthetic(&small()).unwrap();
        let dict = d.bundle.params.decoder();
        let gram = dict.matmul(&dict.transpose()).unwrap();
        assert!(gram.max_abs_diff(&Matrix::identity(dict.rows())) < 1e-12);
    }

    #[test]
    fn shapes() {
        let d = generate_synthetic(&small()).unwrap();
        assert_eq!(d.embeddings.embeddings().shape(), (200, 64));
        assert_eq!(d.queries.embeddings().shape(), (10, 64));
        assert_eq!(d.prompts.shape(), (2, 64));
        assert_eq!(d.labels.len(), 200);
    }
}

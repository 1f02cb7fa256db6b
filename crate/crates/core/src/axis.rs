//! Protected-attribute axes built from SAE weights or fitted directly on
//! embeddings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{read_matrix, write_matrix};
use crate::error::{Result, SnpError};
use crate::logistic::{fit_logistic_with, LogisticOptions, StandardizedLogistic};
use crate::matrix::{norm, Matrix};
use crate::sae::{FeatureIndexSet, SaeParams};

/// Axes shorter than this are rejected rather than projected against.
pub const MIN_AXIS_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisSource {
    Encoder,
    Decoder,
    Cav,
}

impl AxisSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisSource::Encoder => "encoder",
            AxisSource::Decoder => "decoder",
            AxisSource::Cav => "cav",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasAxis {
    v: Vec<f64>,
    source: AxisSource,
    selected: Vec<usize>,
    weights: Vec<f64>,
    l2: Option<f64>,
}

impl BiasAxis {
    pub fn new(v: Vec<f64>, source: AxisSource) -> Result<Self> {
        let n = norm(&v);
        if !n.is_finite() {
            return Err(SnpError::Validation("axis has non-finite entries".into()));
        }
        if n < MIN_AXIS_NORM {
            return Err(SnpError::DegenerateAxis { norm: n });
        }
        Ok(Self {
            v,
            source,
            selected: Vec::new(),
            weights: Vec::new(),
            l2: None,
        })
    }

    /// Records how the axis was produced; stored in the sidecar.
    pub fn with_provenance(mut self, selected: Vec<usize>, weights: Vec<f64>, l2: Option<f64>) -> Self {
        self.selected = selected;
        self.weights = weights;
        self.l2 = l2;
        self
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn source(&self) -> AxisSource {
        self.source
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn l2(&self) -> Option<f64> {
        self.l2
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }
}

fn check_weights(selected: &FeatureIndexSet, w: &[f64], sae: &SaeParams) -> Result<()> {
    if selected.len() != w.len() {
        return Err(SnpError::Length(format!(
            "{} selected features but {} weights",
            selected.len(),
            w.len()
        )));
    }
    FeatureIndexSet::new(selected.as_slice().to_vec(), sae.features()).map(|_| ())
}

/// `v = Σ_t w[t] · E[:, S[t]]`.
pub fn synthesize_axis_encoder(sae: &SaeParams, selected: &FeatureIndexSet, w: &[f64]) -> Result<BiasAxis> {
    check_weights(selected, w, sae)?;
    let mut v = vec![0.0; sae.embed_dim()];
    for (&j, &wt) in selected.as_slice().iter().zip(w) {
        for (vi, e) in v.iter_mut().zip(sae.encoder_column(j)) {
            *vi += wt * e;
        }
    }
    Ok(BiasAxis::new(v, AxisSource::Encoder)?.with_provenance(selected.as_slice().to_vec(), w.to_vec(), None))
}

/// `v = Σ_t w[t] · D[S[t], :]`.
pub fn synthesize_axis_decoder(sae: &SaeParams, selected: &FeatureIndexSet, w: &[f64]) -> Result<BiasAxis> {
    check_weights(selected, w, sae)?;
    let mut v = vec![0.0; sae.embed_dim()];
    for (&j, &wt) in selected.as_slice().iter().zip(w) {
        for (vi, d) in v.iter_mut().zip(sae.decoder_row(j)) {
            *vi += wt * d;
        }
    }
    Ok(BiasAxis::new(v, AxisSource::Decoder)?.with_provenance(selected.as_slice().to_vec(), w.to_vec(), None))
}

/// Interpolation weights for the selected features: a standardized probe on
/// `z[:, S]` predicting the attribute, with weights mapped back to raw
/// preactivation units.
pub fn interpolation_weights(
    preacts: &Matrix,
    selected: &FeatureIndexSet,
    attributes: &[u8],
    opts: &LogisticOptions,
) -> Result<Vec<f64>> {
    let sub = preacts.select_columns(selected.as_slice());
    Ok(StandardizedLogistic::fit(&sub, attributes, opts)?.raw_weights())
}

/// Linear probe on raw embeddings; its weight vector is the axis.
pub fn cav_baseline(embeddings: &Matrix, attributes: &[u8], opts: &LogisticOptions) -> Result<BiasAxis> {
    let model = fit_logistic_with(embeddings, attributes, opts)?;
    let w = model.weights;
    Ok(BiasAxis::new(w.clone(), AxisSource::Cav)?.with_provenance(Vec::new(), w, Some(opts.l2)))
}

#[derive(Debug, Serialize, Deserialize)]
struct AxisSidecar {
    source: AxisSource,
    #[serde(rename = "S")]
    selected: Vec<usize>,
    w: Vec<f64>,
    l2: Option<f64>,
}

/// `axis.snpm` pairs with `axis.json`.
pub fn sidecar_path(matrix_path: &Path) -> PathBuf {
    matrix_path.with_extension("json")
}

pub fn save_axis(axis: &BiasAxis, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_matrix(&Matrix::row_vector(axis.v.clone()), path)?;
    let side = AxisSidecar {
        source: axis.source,
        selected: axis.selected.clone(),
        w: axis.weights.clone(),
        l2: axis.l2,
    };
    let side_path = sidecar_path(path);
    std::fs::write(&side_path, serde_json::to_string_pretty(&side)?).map_err(|e| SnpError::io(&side_path, e))
}

pub fn load_axis(path: impl AsRef<Path>) -> Result<BiasAxis> {
    let path = path.as_ref();
    let m = read_matrix(path)?;
    if m.rows() != 1 {
        return Err(SnpError::Shape(format!("axis file holds {}x{}, expected 1xn", m.rows(), m.cols())));
    }
    let side_path = sidecar_path(path);
    let text = std::fs::read_to_string(&side_path).map_err(|e| SnpError::io(&side_path, e))?;
    let side: AxisSidecar = serde_json::from_str(&text)?;
    Ok(BiasAxis::new(m.into_data(), side.source)?.with_provenance(side.selected, side.w, side.l2))
}

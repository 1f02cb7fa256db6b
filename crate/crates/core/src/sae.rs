//! JumpReLU sparse autoencoder forward pass and the masked-reconstruction
//! baseline.
//!
//! Shapes follow the row-vector convention: an embedding `x` is `1 x n`,
//! the encoder `E` is `n x m` and the decoder `D` is `m x n`.
//!
//! ```text
//! z  = (x - b_dec) E + b_enc        preactivations
//! ẑ  = JumpReLU_θ(z)                ẑ_j = z_j if z_j > θ_j else 0
//! x̂  = ẑ D + b_dec                  reconstruction
//! ```

use rayon::prelude::*;

use crate::error::{Result, SnpError};
use crate::matrix::{row_times, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SaeParams {
    encoder: Matrix,
    decoder: Matrix,
    b_enc: Vec<f64>,
    b_dec: Vec<f64>,
    theta: Vec<f64>,
}

impl SaeParams {
    pub fn new(
        encoder: Matrix,
        decoder: Matrix,
        b_enc: Vec<f64>,
        b_dec: Vec<f64>,
        theta: Vec<f64>,
    ) -> Result<Self> {
        let (n, m) = encoder.shape();
        if decoder.shape() != (m, n) {
            return Err(SnpError::Shape(format!(
                "decoder is {}x{}, expected {m}x{n} for a {n}x{m} encoder",
                decoder.rows(),
                decoder.cols()
            )));
        }
        for (name, len, want) in [
            ("b_enc", b_enc.len(), m),
            ("b_dec", b_dec.len(), n),
            ("theta", theta.len(), m),
        ] {
            if len != want {
                return Err(SnpError::Shape(format!("{name} has length {len}, expected {want}")));
            }
        }
        if let Some(j) = theta.iter().position(|t| t.is_nan() || *t < 0.0) {
            return Err(SnpError::Validation(format!(
                "threshold {j} is {}, thresholds must be >= 0",
                theta[j]
            )));
        }
        for (name, ok) in [
            ("encoder", encoder.all_finite()),
            ("decoder", decoder.all_finite()),
            ("b_enc", b_enc.iter().all(|v| v.is_finite())),
            ("b_dec", b_dec.iter().all(|v| v.is_finite())),
            ("theta", theta.iter().all(|v| v.is_finite())),
        ] {
            if !ok {
                return Err(SnpError::Validation(format!("{name} has non-finite entries")));
            }
        }
        Ok(Self {
            encoder,
            decoder,
            b_enc,
            b_dec,
            theta,
        })
    }

    /// Tied SAE with zero biases and thresholds: `E = dictᵀ`, `D = dict`,
    /// where `dictionary` is `m x n` with one atom per row.
    pub fn tied(dictionary: Matrix) -> Result<Self> {
        let (m, n) = dictionary.shape();
        Self::new(
            dictionary.transpose(),
            dictionary,
            vec![0.0; m],
            vec![0.0; n],
            vec![0.0; m],
        )
    }

    /// Embedding dimension `n`.
    pub fn embed_dim(&self) -> usize {
        self.encoder.rows()
    }

    /// Feature count `m`.
    pub fn features(&self) -> usize {
        self.encoder.cols()
    }

    pub fn encoder(&self) -> &Matrix {
        &self.encoder
    }

    pub fn decoder(&self) -> &Matrix {
        &self.decoder
    }

    pub fn b_enc(&self) -> &[f64] {
        &self.b_enc
    }

    pub fn b_dec(&self) -> &[f64] {
        &self.b_dec
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn encoder_column(&self, j: usize) -> Vec<f64> {
        self.encoder.column(j)
    }

    pub fn decoder_row(&self, j: usize) -> &[f64] {
        self.decoder.row(j)
    }
}

/// Distinct feature indices in `[0, m)`, in selection order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureIndexSet(Vec<usize>);

impl FeatureIndexSet {
    pub fn new(indices: Vec<usize>, features: usize) -> Result<Self> {
        let mut seen = vec![false; features];
        for &i in &indices {
            if i >= features {
                return Err(SnpError::IndexOutOfRange { index: i, features });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(SnpError::InvalidArgument(format!(
                    "feature index {i} selected twice"
                )));
            }
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    fn check_range(&self, features: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i >= features) {
            Some(&index) => Err(SnpError::IndexOutOfRange { index, features }),
            None => Ok(()),
        }
    }
}

fn check_embed_dim(x: &Matrix, sae: &SaeParams) -> Result<()> {
    if x.cols() != sae.embed_dim() {
        return Err(SnpError::Shape(format!(
            "embeddings have {} columns, SAE expects {}",
            x.cols(),
            sae.embed_dim()
        )));
    }
    Ok(())
}

#[inline]
fn jump_relu(z: f64, theta: f64) -> f64 {
    if z > theta {
        z
    } else {
        0.0
    }
}

/// Row `i` of the result is `(x_i - b_dec) E + b_enc`.
pub fn preactivations(x: &Matrix, sae: &SaeParams) -> Result<Matrix> {
    check_embed_dim(x, sae)?;
    let n = sae.embed_dim();
    let m = sae.features();
    let mut out = Matrix::zeros(x.rows(), m);
    if m == 0 {
        return Ok(out);
    }
    let encoder = &sae.encoder;
    out_rows(&mut out).zip(x_rows(x, n)).for_each(|(z, xi)| {
        let centered: Vec<f64> = xi.iter().zip(&sae.b_dec).map(|(a, b)| a - b).collect();
        row_times(&centered, encoder, z);
        z.iter_mut().zip(&sae.b_enc).for_each(|(zj, b)| *zj += b);
    });
    Ok(out)
}

/// Elementwise JumpReLU with strict inequality: `z > θ` passes, `z <= θ` maps to 0.
pub fn activations(z: &Matrix, theta: &[f64]) -> Result<Matrix> {
    if z.cols() != theta.len() {
        return Err(SnpError::Shape(format!(
            "preactivations have {} columns, {} thresholds given",
            z.cols(),
            theta.len()
        )));
    }
    let mut out = z.clone();
    for i in 0..out.rows() {
        out.row_mut(i)
            .iter_mut()
            .zip(theta)
            .for_each(|(v, &t)| *v = jump_relu(*v, t));
    }
    Ok(out)
}

/// Row `i` of the result is `ẑ_i D + b_dec`.
pub fn reconstruct(zhat: &Matrix, sae: &SaeParams) -> Result<Matrix> {
    if zhat.cols() != sae.features() {
        return Err(SnpError::Shape(format!(
            "activations have {} columns, SAE has {} features",
            zhat.cols(),
            sae.features()
        )));
    }
    let n = sae.embed_dim();
    let mut out = Matrix::zeros(zhat.rows(), n);
    if n == 0 {
        return Ok(out);
    }
    let decoder = &sae.decoder;
    out_rows(&mut out)
        .zip(x_rows(zhat, sae.features()))
        .for_each(|(xhat, zi)| {
            row_times(zi, decoder, xhat);
            xhat.iter_mut().zip(&sae.b_dec).for_each(|(v, b)| *v += b);
        });
    Ok(out)
}

/// Subtracts the reconstruction of the selected features: `x - ẑ[:,S] D[S,:]`.
pub fn masked_reconstruction_debias(
    x: &Matrix,
    sae: &SaeParams,
    selected: &FeatureIndexSet,
) -> Result<Matrix> {
    check_embed_dim(x, sae)?;
    selected.check_range(sae.features())?;
    let mut out = x.clone();
    if selected.is_empty() || x.cols() == 0 {
        return Ok(out);
    }
    let s = selected.as_slice();
    let enc_cols: Vec<Vec<f64>> = s.iter().map(|&j| sae.encoder_column(j)).collect();
    out_rows(&mut out).for_each(|row| {
        let centered: Vec<f64> = row.iter().zip(&sae.b_dec).map(|(a, b)| a - b).collect();
        let zhat: Vec<f64> = s
            .iter()
            .zip(&enc_cols)
            .map(|(&j, col)| {
                let z = crate::matrix::dot(&centered, col) + sae.b_enc[j];
                jump_relu(z, sae.theta[j])
            })
            .collect();
        for (&j, &a) in s.iter().zip(&zhat) {
            if a != 0.0 {
                row.iter_mut()
                    .zip(sae.decoder.row(j))
                    .for_each(|(v, d)| *v -= a * d);
            }
        }
    });
    Ok(out)
}

fn out_rows(m: &mut Matrix) -> rayon::slice::ChunksExactMut<'_, f64> {
    let cols = m.cols().max(1);
    m.data_mut().par_chunks_exact_mut(cols)
}

fn x_rows(m: &Matrix, cols: usize) -> rayon::slice::ChunksExact<'_, f64> {
    m.data().par_chunks_exact(cols.max(1))
}

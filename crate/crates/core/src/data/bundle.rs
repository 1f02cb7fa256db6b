use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrix_file::{read_matrix, write_matrix};
use crate::error::{Result, SnpError};
use crate::matrix::Matrix;
use crate::sae::SaeParams;

/// Component files of an SAE bundle directory, besides `meta.json`.
pub const BUNDLE_FILES: [&str; 5] = [
    "encoder.snpm",
    "decoder.snpm",
    "b_enc.snpm",
    "b_dec.snpm",
    "theta.snpm",
];

pub const ACTIVATION_JUMPRELU: &str = "jumprelu";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaeMeta {
    pub n: usize,
    pub m: usize,
    pub activation: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaeBundle {
    pub params: SaeParams,
    pub meta: SaeMeta,
}

impl SaeBundle {
    pub fn from_params(params: SaeParams) -> Self {
        let meta = SaeMeta {
            n: params.embed_dim(),
            m: params.features(),
            activation: ACTIVATION_JUMPRELU.to_string(),
        };
        Self { params, meta }
    }
}

fn expect_shape(name: &str, m: &Matrix, want: (usize, usize)) -> Result<()> {
    if m.shape() != want {
        return Err(SnpError::Shape(format!(
            "{name} is {}x{}, meta requires {}x{}",
            m.rows(),
            m.cols(),
            want.0,
            want.1
        )));
    }
    Ok(())
}

pub fn load_sae_bundle(dir: impl AsRef<Path>) -> Result<SaeBundle> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    if !meta_path.is_file() {
        return Err(SnpError::MissingComponent(meta_path));
    }
    let text = std::fs::read_to_string(&meta_path).map_err(|e| SnpError::io(&meta_path, e))?;
    let meta: SaeMeta = serde_json::from_str(&text)?;
    if meta.activation != ACTIVATION_JUMPRELU {
        return Err(SnpError::Validation(format!(
            "unsupported activation {:?}",
            meta.activation
        )));
    }

    let mut parts = Vec::with_capacity(BUNDLE_FILES.len());
    for name in BUNDLE_FILES {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(SnpError::MissingComponent(path));
        }
        parts.push(read_matrix(&path)?);
    }
    let [encoder, decoder, b_enc, b_dec, theta]: [Matrix; 5] =
        parts.try_into().expect("five components");
    let (n, m) = (meta.n, meta.m);
    expect_shape("encoder", &encoder, (n, m))?;
    expect_shape("decoder", &decoder, (m, n))?;
    expect_shape("b_enc", &b_enc, (1, m))?;
    expect_shape("b_dec", &b_dec, (1, n))?;
    expect_shape("theta", &theta, (1, m))?;

    let params = SaeParams::new(
        encoder,
        decoder,
        b_enc.into_data(),
        b_dec.into_data(),
        theta.into_data(),
    )?;
    Ok(SaeBundle { params, meta })
}

pub fn write_sae_bundle(bundle: &SaeBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| SnpError::io(dir, e))?;
    let p = &bundle.params;
    write_matrix(p.encoder(), dir.join(BUNDLE_FILES[0]))?;
    write_matrix(p.decoder(), dir.join(BUNDLE_FILES[1]))?;
    write_matrix(&Matrix::row_vector(p.b_enc().to_vec()), dir.join(BUNDLE_FILES[2]))?;
    write_matrix(&Matrix::row_vector(p.b_dec().to_vec()), dir.join(BUNDLE_FILES[3]))?;
    write_matrix(&Matrix::row_vector(p.theta().to_vec()), dir.join(BUNDLE_FILES[4]))?;
    let meta_path = dir.join("meta.json");
    let json = serde_json::to_string_pretty(&bundle.meta)?;
    std::fs::write(&meta_path, json).map_err(|e| SnpError::io(&meta_path, e))
}

//! Orthogonal projectors `P = I - U Uᵀ` held as an orthonormal basis `U`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::axis::{sidecar_path, BiasAxis};
use crate::data::{read_matrix, write_matrix};
use crate::error::{Result, SnpError};
use crate::matrix::{dot, norm, Matrix};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    /// `n x r`, orthonormal columns.
    basis: Matrix,
    source: String,
}

impl Projector {
    /// Wraps a basis that is already orthonormal.
    pub fn from_basis(basis: Matrix, source: impl Into<String>) -> Result<Self> {
        if basis.cols() == 0 {
            return Err(SnpError::InvalidArgument("projector basis has rank 0".into()));
        }
        basis.ensure_finite()?;
        let gram = basis.transpose().matmul(&basis)?;
        let err = gram.max_abs_diff(&Matrix::identity(basis.cols()));
        if err > 1e-8 {
            return Err(SnpError::Validation(format!(
                "projector basis is not orthonormal (|UᵀU - I| = {err:e})"
            )));
        }
        Ok(Self {
            basis,
            source: source.into(),
        })
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Projects a single vector: `x - U (Uᵀ x)`.
    pub fn apply_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(SnpError::Shape(format!(
                "vector has {} entries, projector acts on {}",
                x.len(),
                self.dim()
            )));
        }
        let mut out = x.to_vec();
        self.project_row(&mut out);
        Ok(out)
    }

    /// Projects every row of `x`.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(SnpError::Shape(format!(
                "embeddings have {} columns, projector acts on {}",
                x.cols(),
                self.dim()
            )));
        }
        let mut out = x.clone();
        if x.cols() > 0 {
            out.data_mut()
                .par_chunks_exact_mut(x.cols())
                .for_each(|row| self.project_row(row));
        }
        Ok(out)
    }

    fn project_row(&self, row: &mut [f64]) {
        let (n, r) = self.basis.shape();
        let coeffs: Vec<f64> = (0..r)
            .map(|j| (0..n).map(|i| self.basis.get(i, j) * row[i]).sum())
            .collect();
        for (i, v) in row.iter_mut().enumerate() {
            *v -= dot(self.basis.row(i), &coeffs);
        }
    }

    /// The explicit `n x n` matrix `I - U Uᵀ`.
    pub fn dense(&self) -> Matrix {
        let n = self.dim();
        let mut p = Matrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                let v = p.get(i, j) - dot(self.basis.row(i), self.basis.row(j));
                p.set(i, j, v);
            }
        }
        p
    }
}

/// Rank-one projector removing the axis direction.
pub fn rank1_projector(axis: &BiasAxis) -> Result<Projector> {
    rank1_from_vector(axis.v(), axis.source().as_str())
}

pub fn rank1_from_vector(v: &[f64], source: &str) -> Result<Projector> {
    let n = norm(v);
    if !n.is_finite() || n <= 0.0 {
        return Err(SnpError::DegenerateAxis { norm: n });
    }
    let unit: Vec<f64> = v.iter().map(|x| x / n).collect();
    Ok(Projector {
        basis: Matrix::new(v.len(), 1, unit)?,
        source: source.to_string(),
    })
}

/// Projector removing the span of the columns of `columns` (`n x k`).
pub fn subspace_projector(columns: &Matrix, source: &str) -> Result<Projector> {
    columns.ensure_finite()?;
    if columns.cols() == 0 || columns.data().iter().all(|&v| v == 0.0) {
        return Err(SnpError::DegenerateAxis { norm: 0.0 });
    }
    let svd = columns.to_nalgebra().svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let mut keep: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] > RANK_TOLERANCE * smax).collect();
    keep.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let n = columns.rows();
    let basis_cols: Vec<Vec<f64>> = keep.iter().map(|&j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    if keep.len() < columns.cols() {
        log::info!(
            "subspace of {} columns has numerical rank {}",
            columns.cols(),
            keep.len()
        );
    }
    Ok(Projector {
        basis: Matrix::from_columns(&basis_cols)?,
        source: source.to_string(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ProjectorSidecar {
    rank: usize,
    source: String,
}

pub fn save_projector(p: &Projector, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_matrix(&p.basis, path)?;
    let side = ProjectorSidecar {
        rank: p.rank(),
        source: p.source.clone(),
    };
    let side_path = sidecar_path(path);
    std::fs::write(&side_path, serde_json::to_string_pretty(&side)?).map_err(|e| SnpError::io(&side_path, e))
}

pub fn load_projector(path: impl AsRef<Path>) -> Result<Projector> {
    let path = path.as_ref();
    let basis = read_matrix(path)?;
    let side_path = sidecar_path(path);
    let text = std::fs::read_to_string(&side_path).map_err(|e| SnpError::io(&side_path, e))?;
    let side: ProjectorSidecar = serde_json::from_str(&text)?;
    if side.rank != basis.cols() {
        return Err(SnpError::Format(format!(
            "sidecar rank {} but basis has {} columns",
            side.rank,
            basis.cols()
        )));
    }
    Projector::from_basis(basis, side.source)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank1_annihilates_axis() {
        let p = rank1_from_vector(&[3.0, 4.0], "t").unwrap();
        let out = p.apply_vector(&[3.0, 4.0]).unwrap();
        assert!(norm(&out) < 1e-12);
        let perp = p.apply_vector(&[-4.0, 3.0]).unwrap();
        assert!((perp[0] + 4.0).abs() < 1e-12 && (perp[1] - 3.0).abs() < 1e-12);
        assert!(rank1_from_vector(&[0.0, 0.0], "t").is_err());
    }

    #[test]
    fn duplicated_columns_have_rank_one() {
        let a = Matrix::from_columns(&[[1.0, 2.0, 2.0], [1.0, 2.0, 2.0]]).unwrap();
        let p = subspace_projector(&a, "t").unwrap();
        assert_eq!(p.rank(), 1);
        let q = rank1_from_vector(&[1.0, 2.0, 2.0], "t").unwrap();
        assert!(p.dense().max_abs_diff(&q.dense()) < 1e-12);
        assert!(subspace_projector(&Matrix::zeros(3, 2), "t").is_err());
    }

    #[test]
    fn apply_checks_shape() {
        let p = rank1_from_vector(&[1.0, 0.0], "t").unwrap();
        assert!(p.apply(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("proj.snpm");
        let a = Matrix::from_columns(&[[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]).unwrap();
        let p = subspace_projector(&a, "encoder").unwrap();
        save_projector(&p, &path).unwrap();
        assert_eq!(load_projector(&path).unwrap(), p);
    }

    #[test]
    fn from_basis_rejects_non_orthonormal() {
        assert!(Projector::from_basis(Matrix::from_columns(&[[2.0, 0.0]]).unwrap(), "t").is_err());
    }
}

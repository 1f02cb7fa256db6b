//! Numeric containers, labeled datasets and their on-disk formats.

mod bundle;
mod labels;
mod matrix_file;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

pub use bundle::{load_sae_bundle, write_sae_bundle, SaeBundle, SaeMeta, BUNDLE_FILES};
pub use labels::{parse_labels, read_labels, write_labels, Label, LabelTable};
pub use matrix_file::{
    decode_matrix, encode_matrix, read_matrix, write_matrix, write_matrix_as, Dtype, HEADER_LEN,
    MAGIC,
};

use crate::error::{Result, SnpError};
use crate::matrix::Matrix;

/// Embeddings (`N x n`) with one unique id per row. Row order is canonical.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    embeddings: Matrix,
    sample_ids: Vec<String>,
}

impl EmbeddingSet {
    pub fn new(embeddings: Matrix, sample_ids: Vec<String>) -> Result<Self> {
        if sample_ids.len() != embeddings.rows() {
            return Err(SnpError::Shape(format!(
                "{} sample ids for {} embedding rows",
                sample_ids.len(),
                embeddings.rows()
            )));
        }
        let mut seen = HashSet::with_capacity(sample_ids.len());
        for id in &sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(SnpError::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            embeddings,
            sample_ids,
        })
    }

    /// Ids default to the row index rendered as a decimal string.
    pub fn with_index_ids(embeddings: Matrix) -> Self {
        let sample_ids = (0..embeddings.rows()).map(|i| i.to_string()).collect();
        Self {
            embeddings,
            sample_ids,
        }
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn subset(&self, rows: &[usize]) -> EmbeddingSet {
        EmbeddingSet {
            embeddings: self.embeddings.select_rows(rows),
            sample_ids: rows.iter().map(|&i| self.sample_ids[i].clone()).collect(),
        }
    }

    /// Same ids, new embedding values (e.g. after debiasing).
    pub fn with_embeddings(&self, embeddings: Matrix) -> Result<EmbeddingSet> {
        if embeddings.rows() != self.len() {
            return Err(SnpError::Shape(format!(
                "{} rows for {} sample ids",
                embeddings.rows(),
                self.len()
            )));
        }
        Ok(EmbeddingSet {
            embeddings,
            sample_ids: self.sample_ids.clone(),
        })
    }
}

/// Labels laid out in the row order of an [`EmbeddingSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedLabels {
    pub attributes: Vec<u8>,
    /// Present only when every sample carries a task label.
    pub task_labels: Option<Vec<u32>>,
}

impl AlignedLabels {
    pub fn subset(&self, rows: &[usize]) -> AlignedLabels {
        AlignedLabels {
            attributes: rows.iter().map(|&i| self.attributes[i]).collect(),
            task_labels: self
                .task_labels
                .as_ref()
                .map(|t| rows.iter().map(|&i| t[i]).collect()),
        }
    }
}

/// Joint validation of embeddings and labels: every sample id must be labeled.
pub fn align_labels(set: &EmbeddingSet, table: &LabelTable) -> Result<AlignedLabels> {
    let mut attributes = Vec::with_capacity(set.len());
    let mut tasks = Vec::with_capacity(set.len());
    for id in set.sample_ids() {
        let label = table
            .get(id)
            .ok_or_else(|| SnpError::Validation(format!("sample {id:?} has no label entry")))?;
        attributes.push(label.attribute);
        tasks.push(label.task_label);
    }
    let task_labels = tasks.iter().copied().collect::<Option<Vec<u32>>>();
    Ok(AlignedLabels {
        attributes,
        task_labels,
    })
}

/// Path of the sample-id sidecar for a matrix file: `emb.snpm` → `emb.ids.csv`.
pub fn ids_sidecar_path(matrix_path: &Path) -> PathBuf {
    matrix_path.with_extension("ids.csv")
}

pub fn read_sample_ids(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => SnpError::io(path, io),
            other => SnpError::Format(format!("{}: {other:?}", path.display())),
        })?;
    let header = reader.headers()?.clone();
    if header.get(0) != Some("sample_id") {
        return Err(SnpError::Format(format!(
            "{}: expected header \"sample_id\"",
            path.display()
        )));
    }
    let mut ids = Vec::new();
    for record in reader.records() {
        let record = record?;
        let id = record.get(0).unwrap_or_default();
        if id.is_empty() {
            return Err(SnpError::Format(format!("{}: empty sample id", path.display())));
        }
        ids.push(id.to_string());
    }
    Ok(ids)
}

pub fn write_sample_ids(ids: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample_id"])?;
    for id in ids {
        w.write_record([id])?;
    }
    w.flush().map_err(|e| SnpError::io(path, e))
}

/// Loads a matrix file and its id sidecar (row indices when the sidecar is absent).
pub fn load_embedding_set(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let embeddings = read_matrix(path)?;
    let ids_path = ids_sidecar_path(path);
    if ids_path.exists() {
        EmbeddingSet::new(embeddings, read_sample_ids(&ids_path)?)
    } else {
        Ok(EmbeddingSet::with_index_ids(embeddings))
    }
}

pub fn save_embedding_set(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_matrix(set.embeddings(), path)?;
    write_sample_ids(set.sample_ids(), ids_sidecar_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_set_rejects_duplicates_and_count_mismatch() {
        let m = Matrix::zeros(2, 3);
        assert!(matches!(
            EmbeddingSet::new(m.clone(), vec!["a".into(), "a".into()]),
            Err(SnpError::DuplicateId(_))
        ));
        assert!(matches!(
            EmbeddingSet::new(m, vec!["a".into()]),
            Err(SnpError::Shape(_))
        ));
    }

    #[test]
    fn align_requires_every_id() {
        let set = EmbeddingSet::new(Matrix::zeros(2, 1), vec!["a".into(), "b".into()]).unwrap();
        let table = parse_labels("a,1,0\n").unwrap();
        assert!(matches!(
            align_labels(&set, &table),
            Err(SnpError::Validation(_))
        ));
        let table = parse_labels("b,0,1\nx,1,1\na,1,\n").unwrap();
        let aligned = align_labels(&set, &table).unwrap();
        assert_eq!(aligned.attributes, vec![1, 0]);
        assert_eq!(aligned.task_labels, None);
    }

    #[test]
    fn sidecar_path() {
        assert_eq!(
            ids_sidecar_path(Path::new("/x/emb.snpm")),
            PathBuf::from("/x/emb.ids.csv")
        );
    }
}

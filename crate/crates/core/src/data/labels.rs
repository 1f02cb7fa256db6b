use std::collections::HashMap;
use std::path::Path;

use crate::error::{Result, SnpError};

/// Per-sample annotation: binary protected attribute plus an optional task class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Label {
    pub attribute: u8,
    pub task_label: Option<u32>,
}

/// Labels keyed by sample id; iteration follows file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelTable {
    ids: Vec<String>,
    labels: Vec<Label>,
    index: HashMap<String, usize>,
}

impl LabelTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, label: Label) -> Result<()> {
        let id = id.into();
        if label.attribute > 1 {
            return Err(SnpError::Validation(format!(
                "sample {id:?}: attribute must be 0 or 1, got {}",
                label.attribute
            )));
        }
        if self.index.contains_key(&id) {
            return Err(SnpError::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.labels.push(label);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Label> {
        self.index.get(id).map(|&i| &self.labels[i])
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Label)> {
        self.ids.iter().map(String::as_str).zip(&self.labels)
    }
}

const HEADER: [&str; 3] = ["sample_id", "attribute", "task_label"];

fn parse_code(field: &str, what: &str, line: u64) -> Result<u32> {
    field.trim().parse::<u32>().map_err(|_| {
        SnpError::Format(format!("line {line}: {what} {field:?} is not a small integer code"))
    })
}

/// Parses label CSV text. The header row `sample_id,attribute,task_label` is
/// optional; `task_label` may be empty or the column may be absent.
pub fn parse_labels(text: &str) -> Result<LabelTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut table = LabelTable::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 && record.get(0) == Some(HEADER[0]) {
            if record.get(1) != Some(HEADER[1])
                || record.get(2).is_some_and(|h| h != HEADER[2])
                || record.len() > 3
            {
                return Err(SnpError::Format(format!(
                    "unexpected label header {:?}",
                    record.iter().collect::<Vec<_>>()
                )));
            }
            continue;
        }
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if !(2..=3).contains(&record.len()) {
            return Err(SnpError::Format(format!(
                "line {line}: expected 2 or 3 fields, got {}",
                record.len()
            )));
        }
        let id = &record[0];
        if id.is_empty() {
            return Err(SnpError::Format(format!("line {line}: empty sample_id")));
        }
        let attribute = parse_code(&record[1], "attribute", line)?;
        if attribute > 1 {
            return Err(SnpError::Validation(format!(
                "line {line}: attribute must be 0 or 1, got {attribute}"
            )));
        }
        let task_label = match record.get(2) {
            None | Some("") => None,
            Some(t) => Some(parse_code(t, "task_label", line)?),
        };
        table.insert(
            id,
            Label {
                attribute: attribute as u8,
                task_label,
            },
        )?;
    }
    Ok(table)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SnpError::io(path, e))?;
    parse_labels(&text)
}

pub fn write_labels(table: &LabelTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for (id, label) in table.iter() {
        let task = label.task_label.map(|t| t.to_string()).unwrap_or_default();
        w.write_record([id, &label.attribute.to_string(), &task])?;
    }
    w.flush().map_err(|e| SnpError::io(path, e))
}

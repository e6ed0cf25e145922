//! Pretrained word vectors in the usual whitespace text format:
//! one `word v1 v2 ... vd` entry per line.
//!
//! These vectors stay fixed during training; they are an input feature, not
//! parameters, so they live outside the parameter store.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    forms: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn empty(dim: usize) -> EmbeddingTable {
        EmbeddingTable {
            dim,
            forms: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Reads a table, checking every row against `expected_dim` when given,
    /// otherwise inferring the dimension from the first row.
    pub fn read(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let form = fields.next().expect("non-empty line has a first field");
            let values: Vec<f64> = fields
                .map(|v| {
                    v.parse::<f64>().map_err(|_| Error::Parse {
                        path: path.display().to_string(),
                        line: lineno,
                        msg: format!("bad vector component {v:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            if values.is_empty() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno,
                    msg: format!("no vector components after {form:?}"),
                });
            }
            let table = table.get_or_insert_with(|| {
                EmbeddingTable::empty(expected_dim.unwrap_or(values.len()))
            });
            if values.len() != table.dim {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno,
                    msg: format!(
                        "vector for {form:?} has {} components, expected {}",
                        values.len(),
                        table.dim
                    ),
                });
            }
            table.insert(form, values);
        }
        table.ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: "embedding file has no entries".into(),
        })
    }

    /// Inserts a vector; a repeated form overwrites the earlier vector.
    pub fn insert(&mut self, form: &str, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "embedding dimension mismatch");
        match self.index.get(form) {
            Some(&slot) => {
                log::warn!("duplicate embedding for {form:?}; keeping the later entry");
                self.vectors[slot] = vector;
            }
            None => {
                self.index.insert(form.to_string(), self.forms.len());
                self.forms.push(form.to_string());
                self.vectors.push(vector);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn get(&self, form: &str) -> Option<&[f64]> {
        self.index.get(form).map(|&i| self.vectors[i].as_slice())
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.forms
            .iter()
            .zip(&self.vectors)
            .map(|(f, v)| (f.as_str(), v.as_slice()))
    }
}

//! Reading and writing 10-column CoNLL dependency files.
//!
//! Columns: ID, FORM, LEMMA, CPOSTAG, POSTAG, FEATS, HEAD, DEPREL, PHEAD,
//! PDEPREL. Sentences are blank-line separated. We parse the columns we need
//! (ID, FORM, POSTAG, HEAD, DEPREL) and keep the rest verbatim so a
//! read-then-write round trip only rewrites the columns we predict.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::transitions::DepTree;

/// One token row. `head` is `None` when the column is `_` (unannotated input).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConllToken {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub cpos: String,
    pub pos: String,
    pub feats: String,
    pub head: Option<usize>,
    pub deprel: String,
    pub phead: String,
    pub pdeprel: String,
}

pub type Sentence = Vec<ConllToken>;

fn parse_line(path: &Path, lineno: usize, line: &str) -> Result<ConllToken> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: lineno,
            msg: format!("expected 10 tab-separated columns, found {}", cols.len()),
        });
    }
    let id: usize = cols[0].parse().map_err(|_| Error::Parse {
        path: path.display().to_string(),
        line: lineno,
        msg: format!("bad token id {:?}", cols[0]),
    })?;
    let head = if cols[6] == "_" {
        None
    } else {
        Some(cols[6].parse().map_err(|_| Error::Parse {
            path: path.display().to_string(),
            line: lineno,
            msg: format!("bad head {:?}", cols[6]),
        })?)
    };
    Ok(ConllToken {
        id,
        form: cols[1].to_string(),
        lemma: cols[2].to_string(),
        cpos: cols[3].to_string(),
        pos: cols[4].to_string(),
        feats: cols[5].to_string(),
        head,
        deprel: cols[7].to_string(),
        phead: cols[8].to_string(),
        pdeprel: cols[9].to_string(),
    })
}

fn check_sentence(path: &Path, lineno: usize, sentence: &Sentence) -> Result<()> {
    let n = sentence.len();
    for (i, tok) in sentence.iter().enumerate() {
        if tok.id != i + 1 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: lineno,
                msg: format!("token ids must run 1..; found {} at position {}", tok.id, i + 1),
            });
        }
        if let Some(h) = tok.head {
            if h > n {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno,
                    msg: format!("token {} has head {} beyond sentence length {}", tok.id, h, n),
                });
            }
        }
    }
    Ok(())
}

/// Reads every sentence in a CoNLL file.
pub fn read_conll(path: impl AsRef<Path>) -> Result<Vec<Sentence>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut sentences = Vec::new();
    let mut current: Sentence = Vec::new();
    let mut lineno = 0;
    for line in reader.lines() {
        lineno += 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            if !current.is_empty() {
                check_sentence(path, lineno, &current)?;
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        current.push(parse_line(path, lineno, &line)?);
    }
    if !current.is_empty() {
        check_sentence(path, lineno + 1, &current)?;
        sentences.push(current);
    }
    Ok(sentences)
}

/// Writes sentences back out, blank-line separated.
pub fn write_conll(path: impl AsRef<Path>, sentences: &[Sentence]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    for sentence in sentences {
        for tok in sentence {
            let head = match tok.head {
                Some(h) => h.to_string(),
                None => "_".to_string(),
            };
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                tok.id,
                tok.form,
                tok.lemma,
                tok.cpos,
                tok.pos,
                tok.feats,
                head,
                tok.deprel,
                tok.phead,
                tok.pdeprel
            )
            .map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Extracts the annotated tree from a sentence; errors if any head is `_`.
pub fn to_dep_tree(sentence: &Sentence) -> Result<DepTree> {
    let mut heads = Vec::with_capacity(sentence.len());
    let mut labels = Vec::with_capacity(sentence.len());
    for tok in sentence {
        let h = tok.head.ok_or_else(|| {
            Error::invalid(format!("token {} ({}) has no gold head", tok.id, tok.form))
        })?;
        heads.push(h);
        labels.push(tok.deprel.clone());
    }
    DepTree::new(heads, labels)
}

/// Copies a sentence with HEAD and DEPREL replaced by a predicted tree.
pub fn with_predictions(sentence: &Sentence, tree: &DepTree) -> Sentence {
    assert_eq!(sentence.len(), tree.len(), "prediction length mismatch");
    sentence
        .iter()
        .enumerate()
        .map(|(i, tok)| {
            let mut tok = tok.clone();
            tok.head = Some(tree.head_of(i + 1));
            tok.deprel = tree.label_of(i + 1).to_string();
            tok
        })
        .collect()
}

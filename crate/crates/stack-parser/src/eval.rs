//! Attachment scoring: UAS (head correct) and LAS (head and label correct),
//! skipping punctuation tokens identified by their gold part-of-speech tag.

use std::fmt;

use crate::conll::Sentence;
use crate::error::{Error, Result};

/// Gold tags treated as punctuation and excluded from scoring.
const PUNCT_POS: [&str; 5] = ["``", "''", ":", ",", "."];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttachmentScores {
    pub uas: f64,
    pub las: f64,
}

impl fmt::Display for AttachmentScores {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UAS: {:.2} LAS: {:.2}", self.uas, self.las)
    }
}

fn is_scoring_token(gold_pos: &str) -> bool {
    !PUNCT_POS.contains(&gold_pos)
}

/// Scores predictions against gold annotations. The two files must hold the
/// same sentences (same forms in the same order); punctuation status comes
/// from the gold tags. When every token is punctuation the scores are 100.
pub fn evaluate(gold: &[Sentence], predicted: &[Sentence]) -> Result<AttachmentScores> {
    if gold.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "gold has {} sentences, predictions have {}",
            gold.len(),
            predicted.len()
        )));
    }
    let mut counted = 0usize;
    let mut heads_right = 0usize;
    let mut labels_right = 0usize;
    for (i, (g_sent, p_sent)) in gold.iter().zip(predicted).enumerate() {
        if g_sent.len() != p_sent.len() {
            return Err(Error::invalid(format!(
                "sentence {} has {} gold tokens but {} predicted",
                i + 1,
                g_sent.len(),
                p_sent.len()
            )));
        }
        for (g, p) in g_sent.iter().zip(p_sent) {
            if g.form != p.form {
                return Err(Error::invalid(format!(
                    "sentence {}, token {}: gold form {:?} vs predicted {:?}",
                    i + 1,
                    g.id,
                    g.form,
                    p.form
                )));
            }
            if !is_scoring_token(&g.pos) {
                continue;
            }
            let g_head = g.head.ok_or_else(|| {
                Error::invalid(format!("gold token {} has no head", g.id))
            })?;
            let p_head = p.head.ok_or_else(|| {
                Error::invalid(format!("predicted token {} has no head", p.id))
            })?;
            counted += 1;
            if g_head == p_head {
                heads_right += 1;
                if g.deprel == p.deprel {
                    labels_right += 1;
                }
            }
        }
    }
    if counted == 0 {
        // Nothing to score; vacuously perfect.
        return Ok(AttachmentScores {
            uas: 100.0,
            las: 100.0,
        });
    }
    Ok(AttachmentScores {
        uas: 100.0 * heads_right as f64 / counted as f64,
        las: 100.0 * labels_right as f64 / counted as f64,
    })
}

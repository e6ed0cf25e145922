//! Stochastic gradient training of the parser from oracle derivations.
//!
//! Plain SGD with a hyperbolically decaying step size, L2 regularization
//! folded into the update, per-sentence gradient-norm clipping, stochastic
//! replacement of singleton words by the unknown token, and early stopping
//! on development-set attachment score.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::conll::{to_dep_tree, with_predictions, Sentence};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::graph::Graph;
use crate::model::{Model, SentenceFeatures};
use crate::params::ParameterStore;
use crate::transitions::oracle;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    /// Initial learning rate.
    pub eta0: f64,
    /// Hyperbolic decay: the epoch-t rate is eta0 / (1 + decay * t).
    pub decay: f64,
    /// L2 penalty applied inside the update step.
    pub l2: f64,
    /// Per-sentence gradient norm ceiling.
    pub clip: f64,
    pub max_epochs: usize,
    /// Evaluated epochs without a development improvement before stopping.
    pub patience: usize,
    /// Probability of replacing a singleton word id by the unknown id.
    pub unk_prob: f64,
    /// Evaluate on the development set every this many epochs.
    pub dev_every: usize,
    /// Print a progress line per epoch.
    pub quiet: bool,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            eta0: 0.1,
            decay: 0.1,
            l2: 1e-6,
            clip: 5.0,
            max_epochs: 50,
            patience: 10,
            unk_prob: 0.5,
            dev_every: 1,
            quiet: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Epoch whose parameters were kept (development evaluation only).
    pub best_epoch: Option<usize>,
    pub best_uas: f64,
    pub best_las: f64,
    pub skipped_non_projective: usize,
    pub final_mean_nll: f64,
}

/// Step size at a given epoch (epochs count from zero).
pub fn lr_at_epoch(eta0: f64, decay: f64, epoch: usize) -> f64 {
    eta0 / (1.0 + decay * epoch as f64)
}

/// Rescales gradients to the threshold when their global norm exceeds it.
/// Returns the norm before clipping.
pub fn clip_gradients(store: &mut ParameterStore, threshold: f64) -> f64 {
    let norm = store.grad_norm();
    if norm > threshold && norm > 0.0 {
        store.scale_grads(threshold / norm);
    }
    norm
}

/// Parses every sentence greedily, returning copies carrying the predictions.
pub fn parse_corpus(model: &Model, sentences: &[Sentence]) -> Result<Vec<Sentence>> {
    sentences
        .iter()
        .map(|sentence| {
            let features = SentenceFeatures::from_sentence(model.vocab(), sentence);
            let mut g = Graph::new();
            let (tree, _) = model.parse(&mut g, &features)?;
            Ok(with_predictions(sentence, &tree))
        })
        .collect()
}

/// Trains in place. Non-projective training sentences are skipped with a
/// warning. With a development set, the parameters of the best-UAS epoch are
/// restored at the end; otherwise the final parameters stand.
pub fn train(
    model: &mut Model,
    train_sentences: &[Sentence],
    dev_sentences: Option<&[Sentence]>,
    tc: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainReport> {
    if tc.dev_every == 0 {
        return Err(Error::invalid("dev_every must be positive"));
    }
    // Oracle derivations are fixed; compute them once.
    let mut examples: Vec<(SentenceFeatures, Vec<usize>)> = Vec::new();
    let mut skipped = 0usize;
    for (i, sentence) in train_sentences.iter().enumerate() {
        let tree = to_dep_tree(sentence)?;
        let actions = match oracle(&tree) {
            Ok(a) => a,
            Err(Error::NonProjective) => {
                log::warn!("skipping non-projective training sentence {}", i + 1);
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let gold: Vec<usize> = actions
            .iter()
            .map(|a| model.vocab().action_id(a))
            .collect::<Result<_>>()?;
        examples.push((
            SentenceFeatures::from_sentence(model.vocab(), sentence),
            gold,
        ));
    }
    if examples.is_empty() {
        return Err(Error::invalid("no projective training sentences"));
    }

    let mut best: Option<(usize, f64, f64, Vec<std::sync::Arc<crate::tensor::Tensor>>)> = None;
    let mut stall = 0usize;
    let mut epochs_run = 0usize;
    let mut mean_nll = f64::NAN;

    for epoch in 0..tc.max_epochs {
        let started = Instant::now();
        let lr = lr_at_epoch(tc.eta0, tc.decay, epoch);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(rng);

        let mut epoch_nll = 0.0;
        for &i in &order {
            let (base, gold) = &examples[i];
            let features = if tc.unk_prob > 0.0 {
                SentenceFeatures {
                    word_ids: model.vocab().unk_replace(&base.word_ids, tc.unk_prob, rng),
                    pos_ids: base.pos_ids.clone(),
                    forms: base.forms.clone(),
                }
            } else {
                base.clone()
            };
            let mut g = Graph::new();
            let nll = model.sentence_nll(&mut g, &features, gold)?;
            let value = g.value(nll)[0];
            if !value.is_finite() {
                return Err(Error::invalid(format!(
                    "loss diverged at epoch {epoch} (sentence {i})"
                )));
            }
            epoch_nll += value;
            g.backward(nll, model.store_mut())?;
            // Dropping the graph releases its handles on the parameter
            // values so the update can mutate them in place.
            drop(g);
            clip_gradients(model.store_mut(), tc.clip);
            model.store_mut().sgd_step(lr, tc.l2);
        }
        mean_nll = epoch_nll / examples.len() as f64;
        epochs_run = epoch + 1;

        let mut dev_note = String::new();
        let evaluate_now =
            dev_sentences.is_some() && (epoch + 1) % tc.dev_every == 0;
        if let (true, Some(dev)) = (evaluate_now, dev_sentences) {
            let predictions = parse_corpus(model, dev)?;
            let scores = evaluate(dev, &predictions)?;
            dev_note = format!("  dev {scores}");
            // Selection is by development UAS; exact ties go to the better
            // LAS so label learning continues after attachment saturates
            // (a small corpus reaches UAS 100 long before its labels settle).
            let improved = best.as_ref().map_or(true, |&(_, best_uas, best_las, _)| {
                scores.uas > best_uas || (scores.uas == best_uas && scores.las > best_las)
            });
            if improved {
                best = Some((epoch, scores.uas, scores.las, model.store().snapshot()));
                stall = 0;
            } else {
                stall += 1;
            }
        }
        if !tc.quiet {
            println!(
                "epoch {:>3}  loss/sent {:.4}  lr {:.5}{}  [{:.1}s]",
                epoch,
                mean_nll,
                lr,
                dev_note,
                started.elapsed().as_secs_f64()
            );
        }
        if evaluate_now && stall >= tc.patience {
            if !tc.quiet {
                println!("no improvement for {} epochs, stopping", tc.patience);
            }
            break;
        }
    }

    let report = match &best {
        Some((epoch, uas, las, snapshot)) => {
            model.store_mut().restore(snapshot);
            TrainReport {
                epochs_run,
                best_epoch: Some(*epoch),
                best_uas: *uas,
                best_las: *las,
                skipped_non_projective: skipped,
                final_mean_nll: mean_nll,
            }
        }
        None => TrainReport {
            epochs_run,
            best_epoch: None,
            best_uas: f64::NAN,
            best_las: f64::NAN,
            skipped_non_projective: skipped,
            final_mean_nll: mean_nll,
        },
    };
    Ok(report)
}

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{apply_sgd, batch_loss_and_grads, init_params, Gradients, ModelError, ModelParams, Workspace};
use crate::dataset::Dataset;
use crate::features::{extract_features, FeatureError, FeatureVector};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.01,
            batch_size: 32,
            hidden_dims: vec![128, 64],
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be positive and finite");
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1");
        }
        if self.hidden_dims.contains(&0) {
            return fail("hidden dims must be at least 1");
        }
        Ok(())
    }
}

/// Statistics accumulated while iterating one epoch. Loss and accuracy are
/// running values over the epoch's mini-batches, measured before each update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
    /// Frames dropped because their landmarks had zero extent.
    pub skipped_degenerate: usize,
    pub updates: usize,
}

/// Mini-batch SGD on softmax cross-entropy.
///
/// Features are extracted once up front. Each epoch shuffles the sample order
/// with a generator seeded from `config.seed`, so the result is a pure
/// function of `(train_set, config)`.
pub fn train(train_set: &Dataset, config: &TrainConfig) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(ModelError::EmptyDataset);
    }

    let mut examples: Vec<(FeatureVector, usize)> = Vec::with_capacity(train_set.len());
    let mut skipped = 0;
    for sample in train_set.samples() {
        match extract_features(&sample.frame) {
            Ok(f) => examples.push((f, sample.label.index())),
            Err(FeatureError::DegenerateHand) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} degenerate frame(s) out of {}", train_set.len());
    }
    if examples.is_empty() {
        return Err(ModelError::AllFramesDegenerate(skipped));
    }

    let mut params = init_params(&config.hidden_dims, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut ws = Workspace::new(&params);
    let mut grads = Gradients::zeros_like(&params);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut updates = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch = chunk.iter().map(|&i| (examples[i].0.as_slice(), examples[i].1));
            let (loss, hits) = batch_loss_and_grads(&params, batch, &mut ws, &mut grads)?;
            loss_sum += loss * chunk.len() as f64;
            correct += hits;
            apply_sgd(&mut params, &grads, config.learning_rate)?;
            updates += 1;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / examples.len() as f64,
            train_accuracy: correct as f64 / examples.len() as f64,
        };
        log::debug!(
            "epoch {epoch}: loss {:.6} accuracy {:.4}",
            stats.mean_loss,
            stats.train_accuracy
        );
        history.push(stats);
    }

    Ok(TrainOutcome {
        params,
        history,
        skipped_degenerate: skipped,
        updates,
    })
}

/// Per-epoch log as CSV: `epoch,mean_loss,train_accuracy`.
pub fn render_training_log(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,mean_loss,train_accuracy\n");
    for s in history {
        writeln!(out, "{},{},{}", s.epoch, s.mean_loss, s.train_accuracy).unwrap();
    }
    out
}

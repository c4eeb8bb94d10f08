//! Dense feed-forward classifier trained from scratch.
//!
//! Layout is `42 -> hidden... -> 26`, ReLU on hidden layers and softmax on the
//! output. Loss is mean softmax cross-entropy; gradients come from hand-written
//! backpropagation and are checked against central finite differences by
//! [`grad_check`]. Everything runs in `f64` with a fixed summation order so
//! training is bit-reproducible.

mod file;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{extract_features, FeatureError, FeatureVector, LandmarkFrame, NUM_FEATURES};
use crate::label::{GestureLabel, NUM_CLASSES};

pub use file::{load_model, model_from_json, model_to_json, save_model, FORMAT_NAME, FORMAT_VERSION};
pub use train::{render_training_log, train, EpochStats, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("training set is empty")]
    EmptyDataset,
    #[error("all {0} training frames are degenerate")]
    AllFramesDegenerate(usize),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model format error: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softmax,
}

/// One affine layer. `weights` is row-major `out_dim x in_dim`; row `r`
/// holds the weights feeding output unit `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if in_dim == 0 || out_dim == 0 {
            return Err(ModelError::InvalidModel("layer dimensions must be positive".into()));
        }
        if weights.len() != in_dim * out_dim {
            return Err(ModelError::DimensionMismatch {
                expected: in_dim * out_dim,
                got: weights.len(),
            });
        }
        if biases.len() != out_dim {
            return Err(ModelError::DimensionMismatch {
                expected: out_dim,
                got: biases.len(),
            });
        }
        if !weights.iter().chain(&biases).all(|v| v.is_finite()) {
            return Err(ModelError::InvalidModel("non-finite parameter".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            activation,
            weights,
            biases,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    fn affine(&self, input: &[f64], out: &mut [f64]) {
        for (r, (o, b)) in out.iter_mut().zip(&self.biases).enumerate() {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            *o = b + dot(row, input);
        }
    }
}

/// Network parameters plus the label alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    layers: Vec<Layer>,
    labels: Vec<GestureLabel>,
    format_version: u32,
}

impl ModelParams {
    /// Validates the layer chain: `42` inputs, `26` softmax outputs, ReLU on
    /// every hidden layer, adjacent dimensions matching.
    pub fn new(layers: Vec<Layer>) -> Result<Self, ModelError> {
        let Some(first) = layers.first() else {
            return Err(ModelError::InvalidModel("no layers".into()));
        };
        if first.in_dim != NUM_FEATURES {
            return Err(ModelError::InvalidModel(format!(
                "first layer in_dim is {}, expected {NUM_FEATURES}",
                first.in_dim
            )));
        }
        let last = layers.last().expect("non-empty");
        if last.out_dim != NUM_CLASSES {
            return Err(ModelError::InvalidModel(format!(
                "last layer out_dim is {}, expected {NUM_CLASSES}",
                last.out_dim
            )));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(ModelError::InvalidModel(format!(
                    "layer {i} out_dim {} does not match layer {} in_dim {}",
                    pair[0].out_dim,
                    i + 1,
                    pair[1].in_dim
                )));
            }
        }
        let n = layers.len();
        for (i, layer) in layers.iter().enumerate() {
            let expected = if i + 1 == n { Activation::Softmax } else { Activation::Relu };
            if layer.activation != expected {
                return Err(ModelError::InvalidModel(format!(
                    "layer {i} has activation {:?}, expected {expected:?}",
                    layer.activation
                )));
            }
        }
        Ok(Self {
            layers,
            labels: GestureLabel::all().collect(),
            format_version: FORMAT_VERSION,
        })
    }

    /// All weights and biases zero; predicts the uniform distribution.
    pub fn zeros(hidden_dims: &[usize]) -> Self {
        let dims = layer_dims(hidden_dims);
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| Layer::zeros(d[0], d[1], activation_for(i, n)))
            .collect();
        Self::new(layers).expect("valid by construction")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn labels(&self) -> &[GestureLabel] {
        &self.labels
    }

    pub fn format_version(&self) -> u32 {
        self.format_version
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Class probabilities for one feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_input(features)?;
        let mut ws = Workspace::new(self);
        ws.forward(self, features);
        let logits = ws.activations.last().expect("at least one layer");
        let mut probs = vec![0.0; logits.len()];
        softmax(logits, &mut probs);
        Ok(probs)
    }

    fn check_input(&self, features: &[f64]) -> Result<(), ModelError> {
        let expected = self.layers[0].in_dim;
        if features.len() != expected {
            return Err(ModelError::DimensionMismatch {
                expected,
                got: features.len(),
            });
        }
        Ok(())
    }
}

fn layer_dims(hidden_dims: &[usize]) -> Vec<usize> {
    let mut dims = Vec::with_capacity(hidden_dims.len() + 2);
    dims.push(NUM_FEATURES);
    dims.extend_from_slice(hidden_dims);
    dims.push(NUM_CLASSES);
    dims
}

fn activation_for(layer: usize, num_layers: usize) -> Activation {
    if layer + 1 == num_layers {
        Activation::Softmax
    } else {
        Activation::Relu
    }
}

/// Builds `42 -> hidden_dims... -> 26` with weights uniform in
/// `[-sqrt(6 / fan_in), sqrt(6 / fan_in)]` and zero biases.
pub fn init_params(hidden_dims: &[usize], seed: u64) -> Result<ModelParams, ModelError> {
    if hidden_dims.contains(&0) {
        return Err(ModelError::InvalidConfig("hidden dims must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = layer_dims(hidden_dims);
    let n = dims.len() - 1;
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(i, d)| {
            let (fan_in, fan_out) = (d[0], d[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            Layer::new(fan_in, fan_out, activation_for(i, n), weights, vec![0.0; fan_out])
        })
        .collect::<Result<Vec<_>, _>>()?;
    ModelParams::new(layers)
}

/// Gradient of the loss with the same shape as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[LayerGrads] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerGrads] {
        &mut self.layers
    }

    fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
    }

    fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(&mut l.biases).for_each(|g| *g *= factor);
        }
    }

    /// Flattened view in the same order as [`ModelParams`] parameters are
    /// visited by [`grad_check`]: per layer, weights then biases.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }
}

/// Per-layer buffers reused across examples.
struct Workspace {
    // activations[0] is the input; activations[l + 1] is layer l's output
    // (post-ReLU for hidden layers, raw logits for the output layer).
    activations: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(params: &ModelParams) -> Self {
        let mut activations = vec![vec![0.0; params.layers[0].in_dim]];
        activations.extend(params.layers.iter().map(|l| vec![0.0; l.out_dim]));
        let deltas = params.layers.iter().map(|l| vec![0.0; l.out_dim]).collect();
        Self {
            activations,
            deltas,
        }
    }

    fn forward(&mut self, params: &ModelParams, input: &[f64]) {
        self.activations[0].copy_from_slice(input);
        for (l, layer) in params.layers.iter().enumerate() {
            let (before, after) = self.activations.split_at_mut(l + 1);
            let out = &mut after[0];
            layer.affine(&before[l], out);
            if layer.activation == Activation::Relu {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
    }

    /// Forward plus backward for one example. Adds unscaled gradients into
    /// `grads` and returns `(loss, predicted class)`.
    fn accumulate(
        &mut self,
        params: &ModelParams,
        input: &[f64],
        target: usize,
        grads: &mut Gradients,
    ) -> (f64, usize) {
        self.forward(params, input);
        let n = params.layers.len();
        let logits = &self.activations[n];
        let (loss, predicted) = {
            let lse = log_sum_exp(logits);
            let delta = &mut self.deltas[n - 1];
            for (d, &z) in delta.iter_mut().zip(logits) {
                *d = (z - lse).exp();
            }
            delta[target] -= 1.0;
            (lse - logits[target], argmax(logits))
        };

        for l in (0..n).rev() {
            let layer = &params.layers[l];
            let input = &self.activations[l];
            let g = &mut grads.layers[l];
            let delta = &self.deltas[l];
            for (r, &d) in delta.iter().enumerate() {
                g.biases[r] += d;
                if d != 0.0 {
                    let row = &mut g.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
                    for (w, &a) in row.iter_mut().zip(input) {
                        *w += d * a;
                    }
                }
            }
            if l > 0 {
                let (lower, upper) = self.deltas.split_at_mut(l);
                let prev = &mut lower[l - 1];
                let delta = &upper[0];
                prev.fill(0.0);
                for (r, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                // ReLU derivative, taken as 0 at the kink.
                for (p, &a) in prev.iter_mut().zip(&self.activations[l]) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
        }
        (loss, predicted)
    }

    fn loss(&mut self, params: &ModelParams, input: &[f64], target: usize) -> f64 {
        self.forward(params, input);
        let logits = &self.activations[params.layers.len()];
        log_sum_exp(logits) - logits[target]
    }
}

/// Mean cross-entropy over `batch` and its gradient.
pub fn loss_and_grads(
    params: &ModelParams,
    batch: &[(FeatureVector, GestureLabel)],
) -> Result<(f64, Gradients), ModelError> {
    let mut grads = Gradients::zeros_like(params);
    let loss = batch_loss_and_grads(
        params,
        batch.iter().map(|(f, l)| (f.as_slice(), l.index())),
        &mut Workspace::new(params),
        &mut grads,
    )?
    .0;
    Ok((loss, grads))
}

/// Mean cross-entropy over `batch`.
pub fn batch_loss(
    params: &ModelParams,
    batch: &[(FeatureVector, GestureLabel)],
) -> Result<f64, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut ws = Workspace::new(params);
    let mut total = 0.0;
    for (f, label) in batch {
        params.check_input(f.as_slice())?;
        check_target(label.index())?;
        total += ws.loss(params, f.as_slice(), label.index());
    }
    Ok(total / batch.len() as f64)
}

fn check_target(target: usize) -> Result<(), ModelError> {
    if target >= NUM_CLASSES {
        return Err(ModelError::DimensionMismatch {
            expected: NUM_CLASSES,
            got: target + 1,
        });
    }
    Ok(())
}

/// Shared by [`loss_and_grads`] and the trainer. Overwrites `grads` with the
/// batch-mean gradient and returns `(mean loss, correct predictions)`.
fn batch_loss_and_grads<'a>(
    params: &ModelParams,
    batch: impl ExactSizeIterator<Item = (&'a [f64], usize)>,
    ws: &mut Workspace,
    grads: &mut Gradients,
) -> Result<(f64, usize), ModelError> {
    let n = batch.len();
    if n == 0 {
        return Err(ModelError::EmptyBatch);
    }
    grads.fill_zero();
    let mut total = 0.0;
    let mut correct = 0;
    for (input, target) in batch {
        params.check_input(input)?;
        check_target(target)?;
        let (loss, predicted) = ws.accumulate(params, input, target, grads);
        total += loss;
        correct += usize::from(predicted == target);
    }
    grads.scale(1.0 / n as f64);
    Ok((total / n as f64, correct))
}

/// `p <- p - learning_rate * g` for every parameter.
pub fn apply_sgd(
    params: &mut ModelParams,
    grads: &Gradients,
    learning_rate: f64,
) -> Result<(), ModelError> {
    if params.layers.len() != grads.layers.len() {
        return Err(ModelError::DimensionMismatch {
            expected: params.layers.len(),
            got: grads.layers.len(),
        });
    }
    for (layer, g) in params.layers.iter().zip(&grads.layers) {
        if layer.weights.len() != g.weights.len() || layer.biases.len() != g.biases.len() {
            return Err(ModelError::DimensionMismatch {
                expected: layer.weights.len() + layer.biases.len(),
                got: g.weights.len() + g.biases.len(),
            });
        }
    }
    for (layer, g) in params.layers.iter_mut().zip(&grads.layers) {
        for (p, d) in layer.weights.iter_mut().zip(&g.weights) {
            *p -= learning_rate * d;
        }
        for (p, d) in layer.biases.iter_mut().zip(&g.biases) {
            *p -= learning_rate * d;
        }
    }
    Ok(())
}

/// Compares analytic gradients against central finite differences
/// `(L(p + eps) - L(p - eps)) / 2 eps` for every parameter and returns the
/// largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check(
    params: &ModelParams,
    batch: &[(FeatureVector, GestureLabel)],
    epsilon: f64,
) -> Result<f64, ModelError> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(ModelError::InvalidConfig("epsilon must be positive".into()));
    }
    let (_, analytic) = loss_and_grads(params, batch)?;
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let mut analytic_iter = analytic.iter();
    for l in 0..probe.layers.len() {
        let n_weights = probe.layers[l].weights.len();
        let n_biases = probe.layers[l].biases.len();
        for i in 0..n_weights + n_biases {
            let original = param_at(&mut probe, l, i, n_weights).to_owned();
            *param_at(&mut probe, l, i, n_weights) = original + epsilon;
            let plus = batch_loss(&probe, batch)?;
            *param_at(&mut probe, l, i, n_weights) = original - epsilon;
            let minus = batch_loss(&probe, batch)?;
            *param_at(&mut probe, l, i, n_weights) = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic_iter.next().expect("same shape");
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

fn param_at(params: &mut ModelParams, layer: usize, i: usize, n_weights: usize) -> &mut f64 {
    let l = &mut params.layers[layer];
    if i < n_weights {
        &mut l.weights[i]
    } else {
        &mut l.biases[i - n_weights]
    }
}

/// Result of classifying one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: GestureLabel,
    pub confidence: f64,
    pub probs: Vec<f64>,
}

/// Runs the feature pipeline and the network; the most probable class wins,
/// lowest index on exact ties.
pub fn predict(params: &ModelParams, frame: &LandmarkFrame) -> Result<Prediction, ModelError> {
    let features = extract_features(frame)?;
    let probs = params.forward(features.as_slice())?;
    let index = argmax(&probs);
    Ok(Prediction {
        label: params.labels[index],
        confidence: probs[index],
        probs,
    })
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Point2;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_features(rng: &mut ChaCha8Rng) -> FeatureVector {
        let mut v = [0.0; NUM_FEATURES];
        v.iter_mut().for_each(|x| *x = rng.random_range(0.0..1.0));
        FeatureVector::from_raw(v)
    }

    fn random_batch(n: usize, seed: u64) -> Vec<(FeatureVector, GestureLabel)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let f = random_features(&mut rng);
                let l = GestureLabel::from_index(rng.random_range(0..NUM_CLASSES)).unwrap();
                (f, l)
            })
            .collect()
    }

    // Straight-line oracle: explicit index loops, no workspace reuse.
    #[allow(clippy::needless_range_loop)]
    fn oracle_forward(params: &ModelParams, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for layer in params.layers() {
            let mut z = vec![0.0; layer.out_dim()];
            for r in 0..layer.out_dim() {
                let mut s = layer.biases()[r];
                for c in 0..layer.in_dim() {
                    s += layer.weights()[r * layer.in_dim() + c] * a[c];
                }
                z[r] = s;
            }
            a = match layer.activation() {
                Activation::Relu => z.iter().map(|v| if *v > 0.0 { *v } else { 0.0 }).collect(),
                Activation::Softmax => {
                    let m = z.iter().cloned().fold(f64::MIN, f64::max);
                    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
                    let s: f64 = e.iter().sum();
                    e.iter().map(|v| v / s).collect()
                }
            };
        }
        a
    }

    #[test]
    fn init_shapes_and_determinism() {
        let p = init_params(&[128, 64], 1).unwrap();
        let dims: Vec<_> = p.layers().iter().map(|l| (l.out_dim(), l.in_dim())).collect();
        assert_eq!(dims, vec![(128, 42), (64, 128), (26, 64)]);
        assert!(p.layers().iter().all(|l| l.biases().iter().all(|&b| b == 0.0)));
        for l in p.layers() {
            let limit = (6.0 / l.in_dim() as f64).sqrt();
            assert!(l.weights().iter().all(|w| w.abs() <= limit));
        }
        assert_eq!(p, init_params(&[128, 64], 1).unwrap());
        assert_ne!(p, init_params(&[128, 64], 2).unwrap());
        assert!(init_params(&[0], 1).is_err());
    }

    #[test]
    fn zero_params_give_uniform_output() {
        let p = ModelParams::zeros(&[128, 64]);
        let probs = p.forward(&[0.3; 42]).unwrap();
        assert!(probs.iter().all(|&q| (q - 1.0 / 26.0).abs() < 1e-15));
    }

    #[test]
    fn forward_matches_oracle() {
        let p = init_params(&[16, 12], 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = random_features(&mut rng);
            let got = p.forward(x.as_slice()).unwrap();
            let want = oracle_forward(&p, x.as_slice());
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
            assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let p = ModelParams::zeros(&[4]);
        assert!(matches!(
            p.forward(&[0.0; 41]),
            Err(ModelError::DimensionMismatch { expected: 42, got: 41 })
        ));
    }

    #[test]
    fn uniform_loss_is_ln_26() {
        let p = ModelParams::zeros(&[128, 64]);
        for seed in 0..5 {
            let (loss, _) = loss_and_grads(&p, &random_batch(1 + seed as usize * 7, seed)).unwrap();
            assert!((loss - 26f64.ln()).abs() < 1e-12);
            assert!((loss - 3.258097).abs() < 1e-6);
        }
    }

    #[test]
    fn confident_model_has_near_zero_loss() {
        let mut p = ModelParams::zeros(&[]);
        let target = GestureLabel::from_index(4).unwrap();
        p.layers_mut()[0].biases_mut()[4] = 50.0;
        let batch = random_batch(3, 1)
            .into_iter()
            .map(|(f, _)| (f, target))
            .collect::<Vec<_>>();
        let (loss, _) = loss_and_grads(&p, &batch).unwrap();
        assert!((0.0..1e-20).contains(&loss));
    }

    #[test]
    fn empty_batch_is_rejected() {
        let p = ModelParams::zeros(&[4]);
        assert!(matches!(loss_and_grads(&p, &[]), Err(ModelError::EmptyBatch)));
    }

    #[test]
    fn grad_check_small_model() {
        let p = init_params(&[8], 5).unwrap();
        let err = grad_check(&p, &random_batch(4, 6), 1e-5).unwrap();
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn grad_check_at_zero_params() {
        let p = ModelParams::zeros(&[8]);
        let err = grad_check(&p, &random_batch(4, 2), 1e-5).unwrap();
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn grad_check_coarse_epsilon_is_worse() {
        let p = init_params(&[8], 5).unwrap();
        let batch = random_batch(4, 6);
        let fine = grad_check(&p, &batch, 1e-5).unwrap();
        let coarse = grad_check(&p, &batch, 1e-1).unwrap();
        assert!(coarse > fine, "coarse {coarse} fine {fine}");
        assert!(grad_check(&p, &batch, 0.0).is_err());
    }

    #[test]
    fn sgd_arithmetic() {
        let mut p = init_params(&[4], 1).unwrap();
        let before = p.clone();
        let zero = Gradients::zeros_like(&p);
        apply_sgd(&mut p, &zero, 0.5).unwrap();
        assert_eq!(p, before);

        let mut g = Gradients::zeros_like(&p);
        g.layers_mut().iter_mut().for_each(|l| l.weights.fill(1.0));
        apply_sgd(&mut p, &g, 0.0).unwrap();
        assert_eq!(p, before);

        p.layers_mut()[0].weights_mut()[0] = 1.0;
        let mut g = Gradients::zeros_like(&p);
        g.layers_mut()[0].weights[0] = 0.5;
        apply_sgd(&mut p, &g, 0.1).unwrap();
        assert_eq!(p.layers()[0].weights()[0], 0.95);

        let other = Gradients::zeros_like(&init_params(&[5], 1).unwrap());
        assert!(matches!(apply_sgd(&mut p, &other, 0.1), Err(ModelError::DimensionMismatch { .. })));
    }

    #[test]
    fn predict_ties_and_degenerate() {
        let p = ModelParams::zeros(&[8]);
        let pts: Vec<Point2> = (0..21).map(|i| Point2::new(i as f64, (i * i) as f64)).collect();
        let frame = LandmarkFrame::new(&pts).unwrap();
        let pred = predict(&p, &frame).unwrap();
        assert_eq!(pred.label.letter(), 'A');
        assert!((pred.confidence - 1.0 / 26.0).abs() < 1e-15);

        let flat = LandmarkFrame::new(&[Point2::new(0.5, 0.5); 21]).unwrap();
        assert!(matches!(
            predict(&p, &flat),
            Err(ModelError::Feature(FeatureError::DegenerateHand))
        ));
    }

    #[test]
    fn argmax_lowest_index_wins() {
        assert_eq!(argmax(&[0.1, 0.5, 0.5, 0.2]), 1);
        assert_eq!(argmax(&[1.0; 26]), 0);
        assert_eq!(argmax(&[0.0, 0.0, 3.0]), 2);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(vec![]).is_err());
        let bad_in = Layer::zeros(41, 26, Activation::Softmax);
        assert!(ModelParams::new(vec![bad_in]).is_err());
        let bad_out = Layer::zeros(42, 25, Activation::Softmax);
        assert!(ModelParams::new(vec![bad_out]).is_err());
        let chain = vec![
            Layer::zeros(42, 8, Activation::Relu),
            Layer::zeros(9, 26, Activation::Softmax),
        ];
        assert!(ModelParams::new(chain).is_err());
        let softmax_hidden = vec![
            Layer::zeros(42, 8, Activation::Softmax),
            Layer::zeros(8, 26, Activation::Softmax),
        ];
        assert!(ModelParams::new(softmax_hidden).is_err());
        assert!(Layer::new(2, 2, Activation::Relu, vec![0.0, 1.0, f64::NAN, 0.0], vec![0.0; 2]).is_err());
        assert!(Layer::new(2, 2, Activation::Relu, vec![0.0; 3], vec![0.0; 2]).is_err());
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(logits in prop::collection::vec(-50.0f64..50.0, 26)) {
            let mut out = vec![0.0; 26];
            softmax(&logits, &mut out);
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(out.iter().all(|&p| p > 0.0 && p < 1.0));
        }

        #[test]
        fn forward_output_sums_to_one(seed in 0u64..1000, x in prop::collection::vec(-5.0f64..5.0, 42)) {
            let p = init_params(&[16], seed).unwrap();
            let probs = p.forward(&x).unwrap();
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(probs.iter().all(|&q| q > 0.0 && q < 1.0));
        }

        #[test]
        fn loss_is_nonnegative(seed in 0u64..1000, n in 1usize..8) {
            let p = init_params(&[8], seed).unwrap();
            let (loss, _) = loss_and_grads(&p, &random_batch(n, seed + 1)).unwrap();
            prop_assert!(loss >= 0.0);
        }

        #[test]
        fn uniform_loss_any_batch(seed in 0u64..10_000, n in 1usize..40) {
            let p = ModelParams::zeros(&[8]);
            let loss = batch_loss(&p, &random_batch(n, seed)).unwrap();
            prop_assert!((loss - 26f64.ln()).abs() < 1e-12);
        }
    }
}

//! Labeled landmark datasets: CSV persistence, stratified splitting, synthetic
//! generation and jitter augmentation.
//!
//! Rows store raw tracker coordinates, never extracted features, so stored
//! data stays valid if the feature pipeline changes.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::features::{extract_features, FeatureVector, LandmarkFrame, Point2, NUM_FEATURES};
use crate::io_util::atomic_write;
use crate::label::{GestureLabel, NUM_CLASSES};

/// Minimum Euclidean distance between synthetic prototypes in feature space.
pub const PROTOTYPE_SEPARATION: f64 = 0.5;
/// Regeneration attempts per prototype before giving up.
pub const PROTOTYPE_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("class {0} has fewer than 2 samples")]
    InsufficientClassSamples(GestureLabel),
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("could not separate prototype for class {0} after {PROTOTYPE_MAX_ATTEMPTS} attempts")]
    PrototypeSeparationFailure(GestureLabel),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub label: GestureLabel,
    pub frame: LandmarkFrame,
}

/// An ordered collection of labeled frames with per-class counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    samples: Vec<LabeledFrame>,
    class_counts: [usize; NUM_CLASSES],
}

impl Dataset {
    pub fn new(samples: Vec<LabeledFrame>) -> Self {
        let mut class_counts = [0; NUM_CLASSES];
        for s in &samples {
            class_counts[s.label.index()] += 1;
        }
        Self {
            samples,
            class_counts,
        }
    }

    pub fn samples(&self) -> &[LabeledFrame] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<LabeledFrame> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_count(&self, label: GestureLabel) -> usize {
        self.class_counts[label.index()]
    }

    /// Per-class sample counts indexed by label index.
    pub fn class_counts(&self) -> &[usize; NUM_CLASSES] {
        &self.class_counts
    }
}

impl FromIterator<LabeledFrame> for Dataset {
    fn from_iter<I: IntoIterator<Item = LabeledFrame>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// The exact CSV header line.
pub fn csv_header() -> String {
    let mut header = String::from("label");
    for i in 0..NUM_FEATURES / 2 {
        write!(header, ",x{i},y{i}").unwrap();
    }
    header
}

pub fn load_csv(path: &Path) -> Result<Dataset, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(file)
}

/// Parses the dataset CSV format from any reader.
pub fn parse_csv<R: io::Read>(reader: R) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let header = csv_header();
    let mut samples = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut first = true;
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| DatasetError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if first {
            first = false;
            let got = record.iter().collect::<Vec<_>>().join(",");
            if got != header {
                return Err(DatasetError::Parse {
                    line,
                    message: format!("bad header, expected `label,x0,y0,...,x20,y20`, got `{got}`"),
                });
            }
            continue;
        }
        samples.push(parse_row(&record, line)?);
    }
    if first {
        return Err(DatasetError::Parse {
            line: 1,
            message: "missing header".into(),
        });
    }
    Ok(Dataset::new(samples))
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<LabeledFrame, DatasetError> {
    let err = |message: String| DatasetError::Parse { line, message };
    if record.len() != NUM_FEATURES + 1 {
        return Err(err(format!(
            "expected {} columns, got {}",
            NUM_FEATURES + 1,
            record.len()
        )));
    }
    let label: GestureLabel = record[0].parse().map_err(|e| err(format!("{e}")))?;
    let mut coords = [0.0; NUM_FEATURES];
    for (i, field) in record.iter().skip(1).enumerate() {
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| err(format!("column {}: not a number: {field:?}", i + 2)))?;
        if !v.is_finite() {
            return Err(err(format!("column {}: non-finite value {field:?}", i + 2)));
        }
        coords[i] = v;
    }
    let frame = LandmarkFrame::from_interleaved(&coords).map_err(|e| err(e.to_string()))?;
    Ok(LabeledFrame { label, frame })
}

/// Renders the dataset in CSV form. `f64` display output is the shortest
/// representation that parses back to the same value.
pub fn to_csv_string(dataset: &Dataset) -> String {
    let mut out = csv_header();
    out.push('\n');
    for sample in dataset.samples() {
        out.push(sample.label.letter());
        for p in sample.frame.points() {
            write!(out, ",{},{}", p.x, p.y).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    atomic_write(path, to_csv_string(dataset).as_bytes()).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Splits each class independently: `floor(count * train_fraction)` shuffled
/// samples go to the train side, the rest to the test side.
pub fn stratified_split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::BadFraction(train_fraction));
    }
    if let Some(label) = GestureLabel::all().find(|&l| dataset.class_count(l) == 1) {
        return Err(DatasetError::InsufficientClassSamples(label));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, s) in dataset.samples().iter().enumerate() {
        by_class[s.label.index()].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for indices in &mut by_class {
        indices.shuffle(&mut rng);
        // The epsilon absorbs products like 0.29 * 100 = 28.999999999999996.
        let n_train = (indices.len() as f64 * train_fraction + 1e-9).floor() as usize;
        let (a, b) = indices.split_at(n_train);
        train.extend(a.iter().map(|&i| dataset.samples()[i].clone()));
        test.extend(b.iter().map(|&i| dataset.samples()[i].clone()));
    }
    Ok((Dataset::new(train), Dataset::new(test)))
}

/// A generated dataset together with the per-class prototype frames it was
/// sampled around.
#[derive(Debug, Clone)]
pub struct SynthSet {
    pub dataset: Dataset,
    pub prototypes: Vec<LandmarkFrame>,
}

/// Generates a learnable stand-in for a real landmark corpus.
///
/// Each class gets a random 21-point prototype in `[0.2, 0.8]^2`, rejected
/// and redrawn while it lies closer than [`PROTOTYPE_SEPARATION`] to an
/// earlier prototype in feature space. Every sample is its prototype plus
/// per-coordinate Gaussian jitter, then scaled by a factor in `[0.8, 1.2]`
/// and translated by an offset in `[-0.1, 0.1]^2`.
pub fn synth_generate(per_class: usize, jitter_sigma: f64, seed: u64) -> Result<SynthSet, DatasetError> {
    if per_class == 0 {
        return Err(DatasetError::InvalidArgument("per_class must be at least 1".into()));
    }
    let noise = gaussian(jitter_sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut prototypes: Vec<LandmarkFrame> = Vec::with_capacity(NUM_CLASSES);
    let mut proto_features: Vec<FeatureVector> = Vec::with_capacity(NUM_CLASSES);
    for label in GestureLabel::all() {
        let mut accepted = false;
        for _ in 0..PROTOTYPE_MAX_ATTEMPTS {
            let points: Vec<Point2> = (0..NUM_FEATURES / 2)
                .map(|_| Point2::new(rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)))
                .collect();
            let frame = LandmarkFrame::new(&points).expect("finite by construction");
            let Ok(features) = extract_features(&frame) else {
                continue;
            };
            let separated = proto_features
                .iter()
                .all(|other| feature_distance(&features, other) >= PROTOTYPE_SEPARATION);
            if separated {
                prototypes.push(frame);
                proto_features.push(features);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(DatasetError::PrototypeSeparationFailure(label));
        }
    }

    let mut samples = Vec::with_capacity(per_class * NUM_CLASSES);
    for (label, proto) in GestureLabel::all().zip(&prototypes) {
        for _ in 0..per_class {
            let tx = rng.random_range(-0.1..=0.1);
            let ty = rng.random_range(-0.1..=0.1);
            let scale = rng.random_range(0.8..=1.2);
            let points: Vec<Point2> = proto
                .points()
                .iter()
                .map(|p| {
                    let x = p.x + noise.sample(&mut rng);
                    let y = p.y + noise.sample(&mut rng);
                    Point2::new(x * scale + tx, y * scale + ty)
                })
                .collect();
            let frame = LandmarkFrame::new(&points).expect("finite by construction");
            samples.push(LabeledFrame { label, frame });
        }
    }
    Ok(SynthSet {
        dataset: Dataset::new(samples),
        prototypes,
    })
}

/// Appends `copies` jittered variants of every sample, keeping labels.
pub fn augment_jitter(
    dataset: &Dataset,
    sigma: f64,
    copies: usize,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    let noise = gaussian(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = dataset.samples().to_vec();
    samples.reserve(dataset.len() * copies);
    for sample in dataset.samples() {
        for _ in 0..copies {
            let frame = sample
                .frame
                .map(|p| Point2::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng)))
                .expect("finite noise keeps coordinates finite");
            samples.push(LabeledFrame {
                label: sample.label,
                frame,
            });
        }
    }
    Ok(Dataset::new(samples))
}

/// Euclidean distance in feature space.
pub fn feature_distance(a: &FeatureVector, b: &FeatureVector) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn gaussian(sigma: f64) -> Result<Normal<f64>, DatasetError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(DatasetError::InvalidArgument(format!(
            "sigma must be finite and non-negative, got {sigma}"
        )));
    }
    Normal::new(0.0, sigma).map_err(|e| DatasetError::InvalidArgument(e.to_string()))
}

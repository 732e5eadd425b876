use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{FeatureNormalizer, GraphBatch, GraphInput};
use super::loss::{LossKind, RPD_EPS};
use super::model::{GcnModel, ModelSpec, WidthPreset};
use super::optim::{Optimizer, OptimizerKind};
use super::tape::Tape;
use crate::error::NnError;
use crate::features::FeatureSet;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// `epochs` consecutive epochs at learning rate `lr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrStage {
    pub epochs: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    /// Stages run back to back; their lengths add up to the epoch count.
    pub schedule: Vec<LrStage>,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub preset: WidthPreset,
    /// Write a checkpoint every this many epochs (and after the last one).
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            schedule: vec![LrStage { epochs: 500, lr: 1e-4 }, LrStage { epochs: 500, lr: 1e-5 }],
            weight_decay: 1e-5,
            batch_size: 16,
            seed: 0,
            loss: LossKind::Rpd,
            preset: WidthPreset::Full,
            checkpoint_every: None,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn epochs(&self) -> usize {
        self.schedule.iter().map(|s| s.epochs).sum()
    }

    /// Learning rate of 0-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let mut end = 0;
        for stage in &self.schedule {
            end += stage.epochs;
            if epoch < end {
                return stage.lr;
            }
        }
        self.schedule.last().map_or(0.0, |s| s.lr)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.schedule.is_empty() || self.epochs() == 0 {
            return Err(NnError::Config("schedule has no epochs".into()));
        }
        if let Some(s) = self.schedule.iter().find(|s| !(s.lr >= 0.0) || !s.lr.is_finite()) {
            return Err(NnError::InvalidLearningRate(s.lr));
        }
        if self.batch_size == 0 {
            return Err(NnError::Config("batch size must be positive".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(NnError::Config(format!("weight decay {} is negative", self.weight_decay)));
        }
        if self.checkpoint_every == Some(0) {
            return Err(NnError::Config("checkpoint cadence must be positive".into()));
        }
        Ok(())
    }
}

/// One training example.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub features: FeatureSet,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` without a validation set.
    pub val_loss: Option<f64>,
    pub lr: f64,
}

/// A model together with the input and output scaling it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub model: GcnModel<f32>,
    pub normalizer: FeatureNormalizer,
    /// Network outputs are multiplied by this to give eigenvalues.
    pub label_scale: f64,
}

impl Predictor {
    /// Fresh model; normalizer and label scale fitted on `data`.
    pub fn initialize(spec: ModelSpec, data: &[Sample], seed: u64) -> Self {
        let normalizer = FeatureNormalizer::fit(data.iter().map(|s| &s.features));
        let (sum, count) =
            data.iter().flat_map(|s| &s.target).fold((0.0, 0usize), |(s, c), &v| (s + v.abs(), c + 1));
        let label_scale = if count > 0 && sum > 0.0 { sum / count as f64 } else { 1.0 };
        let mut model = GcnModel::new(spec, seed);
        // Start the output bias at the mean target. RPD is flat once a
        // prediction has the wrong sign, so outputs should not start near zero.
        let widths_match = data.iter().all(|s| s.target.len() == spec.output_dim);
        if !data.is_empty() && widths_match {
            let bias = model.params.last_mut().expect("model has parameters");
            for (c, b) in bias.iter_mut().enumerate() {
                let mean = data.iter().map(|s| s.target[c]).sum::<f64>() / data.len() as f64;
                *b = (mean / label_scale) as f32;
            }
        }
        Predictor { model, normalizer, label_scale }
    }

    pub fn prepare(&self, features: &FeatureSet) -> GraphInput<f32> {
        self.normalizer.apply(features)
    }

    /// Eigenvalue predictions for prepared graphs, one row per graph.
    pub fn predict_prepared(&self, graphs: &[&GraphInput<f32>]) -> Result<Vec<Vec<f64>>, NnError> {
        let batch = GraphBatch::from_graphs(graphs)?;
        let out = self.model.predict(&batch)?;
        Ok(out.rows().into_iter().map(|r| r.iter().map(|&v| v as f64 * self.label_scale).collect()).collect())
    }

    pub fn predict(&self, features: &[&FeatureSet]) -> Result<Vec<Vec<f64>>, NnError> {
        let prepared: Vec<GraphInput<f32>> = features.iter().map(|f| self.prepare(f)).collect();
        self.predict_prepared(&prepared.iter().collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamArray {
    pub name: String,
    pub shape: [usize; 2],
    /// Row-major.
    pub data: Vec<f64>,
}

/// JSON checkpoint. `params` follow [`ModelSpec::parameter_layout`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub seed: u64,
    pub epoch: usize,
    pub loss: LossKind,
    pub normalizer: FeatureNormalizer,
    pub label_scale: f64,
    /// Graph-conv blocks carry a bias; block linear layers map width to the same width.
    pub layer_notes: String,
    pub params: Vec<ParamArray>,
}

impl Checkpoint {
    pub fn from_predictor(p: &Predictor, seed: u64, epoch: usize, loss: LossKind) -> Self {
        let params = p
            .model
            .spec
            .parameter_layout()
            .into_iter()
            .zip(&p.model.params)
            .map(|((name, (r, c)), a)| ParamArray { name, shape: [r, c], data: a.iter().map(|&v| v as f64).collect() })
            .collect();
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            spec: p.model.spec,
            seed,
            epoch,
            loss,
            normalizer: p.normalizer.clone(),
            label_scale: p.label_scale,
            layer_notes: "graph_conv(w1, w2, bias) -> leaky_relu(0.01) -> linear(width, width); mean pool; mlp with leaky_relu(0.01) between layers".into(),
            params,
        }
    }

    pub fn to_predictor(&self) -> Result<Predictor, NnError> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported format version {}", self.format_version)));
        }
        let layout = self.spec.parameter_layout();
        if layout.len() != self.params.len() {
            return Err(NnError::Checkpoint(format!("expected {} arrays, found {}", layout.len(), self.params.len())));
        }
        let mut params = Vec::with_capacity(layout.len());
        for ((name, (r, c)), arr) in layout.iter().zip(&self.params) {
            if &arr.name != name || arr.shape != [*r, *c] || arr.data.len() != r * c {
                return Err(NnError::Checkpoint(format!("array '{}' does not match layout entry '{name}' {r}x{c}", arr.name)));
            }
            let vals = arr.data.iter().map(|&v| v as f32).collect();
            params.push(Array2::from_shape_vec((*r, *c), vals).expect("length checked"));
        }
        Ok(Predictor {
            model: GcnModel { spec: self.spec, params },
            normalizer: self.normalizer.clone(),
            label_scale: self.label_scale,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let text = serde_json::to_string(self).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))
    }
}

pub struct TrainOutcome {
    pub predictor: Predictor,
    pub history: Vec<EpochRecord>,
}

fn target_rows(samples: &[&Sample], scale: f64, dim: usize) -> Result<Array2<f32>, NnError> {
    let mut out = Array2::zeros((samples.len(), dim));
    for (r, s) in samples.iter().enumerate() {
        if s.target.len() != dim {
            return Err(NnError::Shape(format!("sample '{}' has {} targets, model outputs {dim}", s.id, s.target.len())));
        }
        for (c, &v) in s.target.iter().enumerate() {
            out[(r, c)] = (v / scale) as f32;
        }
    }
    Ok(out)
}

/// Mean per-sample loss (in scaled label units) over `samples`.
pub fn evaluate_loss(predictor: &Predictor, samples: &[Sample], loss: LossKind, batch_size: usize) -> Result<f64, NnError> {
    let prepared: Vec<GraphInput<f32>> = samples.iter().map(|s| predictor.prepare(&s.features)).collect();
    evaluate_prepared(predictor, samples, &prepared, loss, batch_size)
}

fn evaluate_prepared(
    predictor: &Predictor,
    samples: &[Sample],
    prepared: &[GraphInput<f32>],
    loss: LossKind,
    batch_size: usize,
) -> Result<f64, NnError> {
    if samples.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let mut total = 0.0;
    for (chunk_s, chunk_p) in samples.chunks(batch_size).zip(prepared.chunks(batch_size)) {
        let graphs: Vec<&GraphInput<f32>> = chunk_p.iter().collect();
        let out = predictor.model.predict(&GraphBatch::from_graphs(&graphs)?)?;
        for (row, s) in out.rows().into_iter().zip(chunk_s) {
            let pred: Vec<f64> = row.iter().map(|&v| v as f64).collect();
            let target: Vec<f64> = s.target.iter().map(|v| v / predictor.label_scale).collect();
            total += loss.sample(&pred, &target, RPD_EPS);
        }
    }
    Ok(total / samples.len() as f64)
}

/// Trains a fresh model seeded by `config.seed`.
pub fn train(train_set: &[Sample], val_set: &[Sample], config: &TrainConfig) -> Result<TrainOutcome, NnError> {
    if train_set.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let dim = train_set[0].target.len();
    let predictor = Predictor::initialize(ModelSpec::new(config.preset, dim), train_set, config.seed);
    train_from(predictor, train_set, val_set, config)
}

/// Continues training `predictor`. Shuffling is seeded by `config.seed`, so
/// equal inputs give bitwise equal histories.
pub fn train_from(
    mut predictor: Predictor,
    train_set: &[Sample],
    val_set: &[Sample],
    config: &TrainConfig,
) -> Result<TrainOutcome, NnError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let dim = predictor.model.spec.output_dim;
    let prepared: Vec<GraphInput<f32>> = train_set.iter().map(|s| predictor.prepare(&s.features)).collect();
    let val_prepared: Vec<GraphInput<f32>> = val_set.iter().map(|s| predictor.prepare(&s.features)).collect();
    let mut optimizer = Optimizer::new(config.optimizer, config.weight_decay, &predictor.model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let eps = RPD_EPS as f32;
    let mut history = Vec::with_capacity(config.epochs());

    for epoch in 0..config.epochs() {
        let lr = config.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0f64;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let graphs: Vec<&GraphInput<f32>> = idx.iter().map(|&i| &prepared[i]).collect();
            let samples: Vec<&Sample> = idx.iter().map(|&i| &train_set[i]).collect();
            let batch = GraphBatch::from_graphs(&graphs)?;
            let target = target_rows(&samples, predictor.label_scale, dim)?;
            let mut tape = Tape::new();
            let pred = predictor.model.forward(&mut tape, &batch)?;
            let loss = tape.loss(pred, target, config.loss, eps)?;
            let value = tape.value(loss)[(0, 0)] as f64;
            if !value.is_finite() {
                return Err(NnError::NonFiniteLoss { epoch: epoch + 1, batch: b, value });
            }
            let mut grads = predictor.model.zero_grads();
            tape.backward(loss, &mut grads)?;
            optimizer.step(&mut predictor.model.params, &grads, lr)?;
            total += value * idx.len() as f64;
        }
        let val_loss = if val_set.is_empty() {
            None
        } else {
            Some(evaluate_prepared(&predictor, val_set, &val_prepared, config.loss, config.batch_size.max(16))?)
        };
        let record = EpochRecord { epoch: epoch + 1, train_loss: total / train_set.len() as f64, val_loss, lr };
        log::debug!("epoch {} train {:.6} val {:?} lr {}", record.epoch, record.train_loss, record.val_loss, lr);
        history.push(record);

        if let (Some(every), Some(dir)) = (config.checkpoint_every, &config.checkpoint_dir) {
            if (epoch + 1) % every == 0 || epoch + 1 == config.epochs() {
                let ckpt = Checkpoint::from_predictor(&predictor, config.seed, epoch + 1, config.loss);
                ckpt.save(&dir.join(format!("epoch_{:05}.json", epoch + 1)))?;
            }
        }
    }
    Ok(TrainOutcome { predictor, history })
}

/// CSV with header `epoch,train_loss,val_loss,lr`; a missing validation loss is left empty.
pub fn write_history_csv<W: Write>(history: &[EpochRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "epoch,train_loss,val_loss,lr")?;
    for r in history {
        let val = r.val_loss.map(|v| format!("{v:?}")).unwrap_or_default();
        writeln!(out, "{},{:?},{},{:?}", r.epoch, r.train_loss, val, r.lr)?;
    }
    Ok(())
}

pub fn read_history_csv(text: &str) -> Result<Vec<EpochRecord>, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("epoch,train_loss,val_loss,lr") {
        return Err("missing history header".into());
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(format!("bad history row '{l}'"));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s}: {e}"));
            Ok(EpochRecord {
                epoch: f[0].trim().parse().map_err(|e| format!("{}: {e}", f[0]))?,
                train_loss: num(f[1])?,
                val_loss: if f[2].trim().is_empty() { None } else { Some(num(f[2])?) },
                lr: num(f[3])?,
            })
        })
        .collect()
}

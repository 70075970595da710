//! The three classifiers and their training loop.
//!
//! Every architecture shares the frame
//! `embedding → spatial dropout → block → dense(64, ReLU) → dense(3)`; the
//! softmax is fused into the loss during training and applied in
//! [`predict`].

mod checkpoint;
mod config;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::encode::{argmax_label, EmbeddingMatrix, EncodedInstance};
use crate::error::{Error, Result};
use crate::lexlabel::SentimentLabel;
use crate::nn::{
    self, Activation, Adam, BiLstm, Conv1D, Dense, Dropout, Embedding, GlobalMaxPool1D, Layer, Mode, Node, Rng,
    Sequential, SpatialDropout1D, Tensor,
};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{parse_pairs, Architecture, Experiment, ModelDims, TrainConfig};

/// Stream ids carved out of the run seed.
const INIT_STREAM: u64 = 0;
const TRAIN_STREAM: u64 = 1;

fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone)]
pub struct Model {
    pub arch: Architecture,
    pub config: TrainConfig,
    pub net: Sequential,
    optimizer: Adam,
    rng: Rng,
}

/// Builds the layer stack with weights drawn from `cfg.seed`.
pub fn build_model(arch: Architecture, emb: &EmbeddingMatrix, cfg: &TrainConfig) -> Result<Model> {
    cfg.validate(arch)?;
    if emb.rows() < 2 || emb.dim() == 0 {
        return Err(Error::InvalidConfig(
            "embedding matrix needs pad, OOV and at least one column".into(),
        ));
    }
    let d = emb.dim();
    let dims = cfg.dims;
    let p = &cfg.dropout;
    let mut rng = seeded(cfg.seed, INIT_STREAM);
    let mut layers = vec![
        Node::Embedding(Embedding::new(emb.weights.clone(), false)),
        Node::SpatialDropout1D(SpatialDropout1D::new(p[0])?),
    ];
    let features = match arch {
        Architecture::Cnn => {
            layers.push(Node::Conv1D(Conv1D::new(
                d,
                dims.conv_filters,
                dims.kernel_size,
                Activation::Relu,
                &mut rng,
            )));
            layers.push(Node::GlobalMaxPool1D(GlobalMaxPool1D::new()));
            dims.conv_filters
        }
        Architecture::BiLstm => {
            layers.push(Node::BiLstm(BiLstm::new(d, dims.lstm_units, p[1], &mut rng)?));
            layers.push(Node::Dropout(Dropout::new(p[2])?));
            2 * dims.lstm_units
        }
        Architecture::CnnBiLstm => {
            layers.push(Node::Conv1D(Conv1D::new(
                d,
                dims.conv_filters,
                dims.kernel_size,
                Activation::Relu,
                &mut rng,
            )));
            layers.push(Node::BiLstm(BiLstm::new(
                dims.conv_filters,
                dims.lstm_units,
                p[1],
                &mut rng,
            )?));
            layers.push(Node::Dropout(Dropout::new(p[2])?));
            2 * dims.lstm_units
        }
    };
    layers.push(Node::Dense(Dense::new(
        features,
        dims.dense_units,
        Activation::Relu,
        &mut rng,
    )));
    layers.push(Node::Dropout(Dropout::new(p[p.len() - 1])?));
    layers.push(Node::Dense(Dense::new(
        dims.dense_units,
        3,
        Activation::Identity,
        &mut rng,
    )));
    Ok(Model {
        arch,
        config: cfg.clone(),
        net: Sequential::new(layers),
        optimizer: Adam::new(cfg.learning_rate),
        rng: seeded(cfg.seed, TRAIN_STREAM),
    })
}

impl Model {
    /// Width of the representation entering the dense-ReLU layer.
    pub fn feature_dim(&self) -> usize {
        self.net
            .layers
            .iter()
            .rev()
            .filter_map(|l| match l {
                Node::Dense(d) => Some(d.inputs()),
                _ => None,
            })
            .nth(1)
            .expect("two dense layers")
    }

    pub fn embedding(&self) -> &Embedding {
        match &self.net.layers[0] {
            Node::Embedding(e) => e,
            _ => unreachable!("first layer is the embedding"),
        }
    }

    /// Rates of the dropout layers in site order.
    pub fn dropout_rates(&self) -> Vec<f64> {
        let mut rates = Vec::new();
        for l in &self.net.layers {
            match l {
                Node::SpatialDropout1D(s) => rates.push(s.rate),
                Node::Dropout(d) => rates.push(d.rate),
                Node::BiLstm(b) => rates.push(b.fwd.input_dropout),
                _ => {}
            }
        }
        rates
    }

    /// Logits for a batch of index sequences.
    pub fn logits(&mut self, seqs: &[&[usize]], mode: Mode) -> Result<Array2<f64>> {
        let x = batch_tensor(seqs, self.config.max_len)?;
        let out = self.net.forward(&x, mode, &mut self.rng)?;
        Ok(nn::view2(&out, "model", "(batch, 3)")?.to_owned())
    }
}

fn batch_tensor(seqs: &[&[usize]], max_len: usize) -> Result<Tensor> {
    let mut x = Array2::zeros((seqs.len(), max_len));
    for (i, s) in seqs.iter().enumerate() {
        if s.len() != max_len {
            return Err(Error::ShapeMismatch(format!(
                "sequence {i} has length {}, model expects {max_len}",
                s.len()
            )));
        }
        for (t, &k) in s.iter().enumerate() {
            x[[i, t]] = k as f64;
        }
    }
    Ok(x.into_dyn())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's batches, weighted by batch size.
    pub loss: f64,
    /// Accuracy of the training-mode predictions seen during the epoch.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

/// Trains for `config.epochs` epochs of shuffled mini-batches.
pub fn train(model: &mut Model, train_set: &[EncodedInstance]) -> Result<TrainHistory> {
    train_with_callback(model, train_set, |_, _| Ok(()))
}

/// As [`train`], calling `after_epoch(epoch, model)` after each epoch, for
/// per-epoch evaluation. The callback must not draw from the model's
/// random stream if runs are to stay comparable.
pub fn train_with_callback(
    model: &mut Model,
    train_set: &[EncodedInstance],
    mut after_epoch: impl FnMut(usize, &mut Model) -> Result<()>,
) -> Result<TrainHistory> {
    if train_set.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=model.config.epochs {
        order.shuffle(&mut model.rng);
        let mut loss_sum = 0.0;
        let mut hits = 0.0;
        for chunk in order.chunks(model.config.batch_size) {
            let seqs: Vec<&[usize]> = chunk.iter().map(|&i| train_set[i].indices.as_slice()).collect();
            let mut targets = Array2::zeros((chunk.len(), 3));
            for (r, &i) in chunk.iter().enumerate() {
                for c in 0..3 {
                    targets[[r, c]] = train_set[i].target[c];
                }
            }
            model.net.zero_grad();
            let logits = model.logits(&seqs, Mode::Train)?;
            let probs = nn::softmax_rows(&logits.view());
            let (loss, grad) = nn::loss_and_grad(&probs, &targets)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss at epoch {epoch}")));
            }
            model.net.backward(&grad.into_dyn())?;
            let mut params = model.net.params_mut();
            model.optimizer.step(&mut params)?;
            loss_sum += loss * chunk.len() as f64;
            hits += nn::accuracy(&probs, &targets) * chunk.len() as f64;
        }
        let n = train_set.len() as f64;
        let record = EpochRecord {
            epoch,
            loss: loss_sum / n,
            accuracy: hits / n,
        };
        log::info!(
            "{} epoch {epoch}: loss {:.4}, train accuracy {:.4}",
            model.arch,
            record.loss,
            record.accuracy
        );
        history.epochs.push(record);
        after_epoch(epoch, model)?;
    }
    Ok(history)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub labels: Vec<SentimentLabel>,
    /// Per-class probabilities in (Positive, Negative, Neutral) order.
    pub probs: Vec<[f64; 3]>,
}

/// Eval-mode forward in batches of `config.batch_size`; ties in the
/// probabilities go to the earlier column.
pub fn predict(model: &mut Model, instances: &[EncodedInstance]) -> Result<Predictions> {
    let seqs: Vec<&[usize]> = instances.iter().map(|e| e.indices.as_slice()).collect();
    predict_sequences(model, &seqs)
}

pub fn predict_sequences(model: &mut Model, seqs: &[&[usize]]) -> Result<Predictions> {
    let mut out = Predictions {
        labels: Vec::with_capacity(seqs.len()),
        probs: Vec::with_capacity(seqs.len()),
    };
    for chunk in seqs.chunks(model.config.batch_size.max(1)) {
        let probs = nn::softmax_rows(&model.logits(chunk, Mode::Eval)?.view());
        for row in probs.rows() {
            let p = [row[0], row[1], row[2]];
            out.labels.push(argmax_label(&p));
            out.probs.push(p);
        }
    }
    Ok(out)
}

/// Index sequences of a batch as the `(batch, len)` float tensor the
/// embedding layer takes.
pub fn encode_batch(instances: &[EncodedInstance], max_len: usize) -> Result<(Tensor, Array2<f64>)> {
    let seqs: Vec<&[usize]> = instances.iter().map(|e| e.indices.as_slice()).collect();
    let x = batch_tensor(&seqs, max_len)?;
    let t = Array2::from_shape_fn((instances.len(), 3), |(i, c)| instances[i].target[c]);
    Ok((x, t))
}

/// Output shape of every layer for an all-padding batch, in eval mode.
pub fn layer_output_shapes(model: &Model, batch: usize) -> Result<Vec<(&'static str, Vec<usize>)>> {
    let mut x: Tensor = Array2::<f64>::zeros((batch, model.config.max_len)).into_dyn();
    let mut shapes = Vec::new();
    let mut rng = seeded(0, 0);
    for l in &mut model.net.layers.clone() {
        x = l.forward(&x, Mode::Eval, &mut rng)?;
        shapes.push((l.kind(), x.shape().to_vec()));
    }
    Ok(shapes)
}

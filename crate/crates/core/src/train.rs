//! Joint training of object embeddings and an MLP link decoder, evaluation,
//! and capacity sweeps.
//!
//! The decoder reads the concatenation `[E_i, E_j]` of the subject and
//! object embeddings and emits one sigmoid probability per relation. All
//! `n^2` ordered pairs (self-pairs included) go through the decoder each
//! step; the loss is the mean binary cross-entropy over the training
//! triples only.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diff::{adam_step, AdamConfig, AdamState, Tape, Tensor, Var};
use crate::kg::{split_triples, KnowledgeGraph, Triple, TripleSplit};
use crate::stats::{mean, std_dev};
use crate::{derive_seed, Error, Result};

/// One embedding row per object.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    matrix: Tensor,
}

impl Representation {
    pub fn new(matrix: Tensor) -> Result<Self> {
        if matrix.cols() == 0 {
            return Err(Error::InvalidParameter(
                "representation needs d >= 1".into(),
            ));
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite("representation"));
        }
        Ok(Representation { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Representation::new(Tensor::from_rows(rows)?)
    }

    /// Number of objects.
    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    /// Embedding dimension.
    pub fn d(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn into_matrix(self) -> Tensor {
        self.matrix
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

impl core::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidParameter(format!(
                "unknown activation `{other}`"
            ))),
        }
    }
}

/// Dense layer `x @ weight + bias`, `weight` being `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// MLP from `2d` inputs to `m` sigmoid outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderModel {
    layers: Vec<Layer>,
    activation: Activation,
}

impl DecoderModel {
    pub fn new(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::InvalidParameter(
                "decoder needs at least one layer".into(),
            ));
        };
        if first.weight.rows() == 0 || first.weight.rows() % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "decoder input width {} is not 2d",
                first.weight.rows()
            )));
        }
        for (idx, layer) in layers.iter().enumerate() {
            if layer.bias.shape() != [1, layer.weight.cols()] {
                return Err(Error::InvalidParameter(format!(
                    "layer {idx}: bias {:?} for weight {:?}",
                    layer.bias.shape(),
                    layer.weight.shape()
                )));
            }
            if idx > 0 && layers[idx - 1].weight.cols() != layer.weight.rows() {
                return Err(Error::InvalidParameter(format!(
                    "layer {idx} expects {} inputs, previous layer gives {}",
                    layer.weight.rows(),
                    layers[idx - 1].weight.cols()
                )));
            }
            if !layer.weight.is_finite() || !layer.bias.is_finite() {
                return Err(Error::NonFinite("decoder weights"));
            }
        }
        Ok(DecoderModel { layers, activation })
    }

    /// `depth` hidden layers of `width` units; weights drawn from
    /// `N(0, 1/fan_in)`, biases zero.
    pub fn init(
        embed_dim: usize,
        width: usize,
        depth: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut dims = vec![2 * embed_dim];
        dims.extend(core::iter::repeat_n(width, depth));
        dims.push(outputs);
        let layers = dims
            .windows(2)
            .map(|w| Layer {
                weight: Tensor::randn(w[0], w[1], 1.0 / libm::sqrt(w[0] as f64), rng),
                bias: Tensor::zeros(1, w[1]),
            })
            .collect();
        DecoderModel::new(layers, activation)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn embed_dim(&self) -> usize {
        self.layers[0].weight.rows() / 2
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.cols())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Records the layers on `tape`, as parameters when `trainable`.
    pub fn record(&self, tape: &mut Tape, trainable: bool) -> Vec<(Var, Var)> {
        self.layers
            .iter()
            .map(|l| {
                if trainable {
                    (tape.param(l.weight.clone()), tape.param(l.bias.clone()))
                } else {
                    (
                        tape.constant(l.weight.clone()),
                        tape.constant(l.bias.clone()),
                    )
                }
            })
            .collect()
    }

    /// Probabilities for every ordered pair of rows of `rep`, as an
    /// `n^2 x m` tensor in row-major pair order.
    pub fn predict_all_pairs(&self, rep: &Representation) -> Result<Tensor> {
        if rep.d() != self.embed_dim() {
            return Err(Error::Shape {
                op: "predict_all_pairs",
                detail: format!("embedding dim {} vs decoder {}", rep.d(), self.embed_dim()),
            });
        }
        let mut tape = Tape::new();
        let emb = tape.constant(rep.matrix().clone());
        let layers = self.record(&mut tape, false);
        let pairs = PairIndex::all(rep.n());
        let probs = decode_pairs(&mut tape, emb, &layers, self.activation, &pairs)?;
        Ok(tape.value(probs).clone())
    }
}

/// Subject and object row indices for every ordered pair `(i, j)`, pair
/// `i * n + j` at position `i * n + j`.
#[derive(Debug, Clone)]
pub struct PairIndex {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl PairIndex {
    pub fn all(n: usize) -> Self {
        PairIndex {
            left: (0..n * n).map(|x| x / n).collect(),
            right: (0..n * n).map(|x| x % n).collect(),
        }
    }
}

/// Forward pass of an MLP decoder over the rows of `emb` selected by
/// `pairs`.
pub fn decode_pairs(
    tape: &mut Tape,
    emb: Var,
    layers: &[(Var, Var)],
    activation: Activation,
    pairs: &PairIndex,
) -> Result<Var> {
    // The first layer acts on (E_i, E_j); split its weight so each object
    // is multiplied once instead of once per pair.
    let d = tape.value(emb).cols();
    let mut h = emb;
    for (idx, &(w, b)) in layers.iter().enumerate() {
        let z = if idx == 0 {
            // The bias is added per object, before the pairs are formed.
            let w_left = tape.slice_rows(w, 0, d)?;
            let w_right = tape.slice_rows(w, d, d)?;
            let a = tape.matmul(emb, w_left)?;
            let a = tape.add_row_bias(a, b)?;
            let c = tape.matmul(emb, w_right)?;
            tape.pair_sum(a, c, &pairs.left, &pairs.right)?
        } else {
            let z = tape.matmul(h, w)?;
            tape.add_row_bias(z, b)?
        };
        h = if idx + 1 == layers.len() {
            tape.sigmoid(z)?
        } else {
            match activation {
                Activation::Tanh => tape.tanh(z)?,
                Activation::Relu => tape.relu(z)?,
            }
        };
    }
    Ok(h)
}

/// Triples laid out on the `n^2 x m` pair-by-relation grid.
#[derive(Debug, Clone)]
pub struct DenseLabels {
    pub labels: Tensor,
    pub mask: Vec<bool>,
    pub count: usize,
}

impl DenseLabels {
    pub fn new(n: usize, m: usize, triples: &[Triple]) -> Result<Self> {
        let mut labels = Tensor::zeros(n * n, m);
        let mut mask = vec![false; n * n * m];
        for t in triples {
            if t.subject >= n || t.object >= n || t.relation >= m {
                return Err(Error::Shape {
                    op: "labels",
                    detail: format!("triple {t:?} outside {n} objects x {m} relations"),
                });
            }
            let idx = (t.subject * n + t.object) * m + t.relation;
            labels.data_mut()[idx] = if t.label { 1.0 } else { 0.0 };
            mask[idx] = true;
        }
        let count = mask.iter().filter(|&&b| b).count();
        Ok(DenseLabels {
            labels,
            mask,
            count,
        })
    }

    /// Fraction of masked entries where `p > 0.5` matches the label.
    pub fn accuracy(&self, probs: &Tensor) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        let hits = probs
            .data()
            .iter()
            .zip(self.labels.data())
            .zip(&self.mask)
            .filter(|&((&p, &y), &m)| m && ((p > 0.5) == (y > 0.5)))
            .count();
        hits as f64 / self.count as f64
    }

    pub fn loss(&self, probs: &Tensor) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        let total: f64 = probs
            .data()
            .iter()
            .zip(self.labels.data())
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|((&p, &y), _)| crate::diff::bce(p, y))
            .sum();
        total / self.count as f64
    }
}

/// Accuracy and mean loss of a representation/decoder pair on a triple set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

/// Accuracy (`p > 0.5` against the label) and mean binary cross-entropy.
pub fn evaluate(
    rep: &Representation,
    dec: &DecoderModel,
    triples: &[Triple],
) -> Result<Evaluation> {
    let probs = dec.predict_all_pairs(rep)?;
    let dense = DenseLabels::new(rep.n(), dec.outputs(), triples)?;
    Ok(Evaluation {
        accuracy: dense.accuracy(&probs),
        loss: dense.loss(&probs),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Embedding dimension.
    pub d: usize,
    /// Number of hidden layers.
    pub depth: usize,
    /// Units per hidden layer.
    pub width: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub steps: usize,
    /// Drives initialization.
    pub seed: u64,
    /// Drives the train/test split.
    pub split_seed: u64,
    pub train_fraction: f64,
    pub activation: Activation,
    /// Standard deviation of the initial embeddings.
    pub init_sd: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d: 2,
            depth: 1,
            width: 50,
            lr: 0.01,
            weight_decay: 0.0,
            steps: 3000,
            seed: 0,
            split_seed: 0,
            train_fraction: 0.75,
            activation: Activation::Tanh,
            init_sd: 0.3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParameter(what));
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if self.depth == 0 || self.width == 0 {
            return bad(format!(
                "depth {} and width {} must be positive",
                self.depth, self.width
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay {} must be >= 0", self.weight_decay));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!(
                "train fraction {} outside (0, 1)",
                self.train_fraction
            ));
        }
        if !(self.init_sd > 0.0 && self.init_sd.is_finite()) {
            return bad(format!("init sd {} must be positive", self.init_sd));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    /// A non-finite value appeared at `step`.
    Diverged {
        step: usize,
        reason: String,
    },
}

/// Everything produced by one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub representation: Representation,
    pub decoder: DecoderModel,
    /// Training loss before each update; one entry per step.
    pub train_loss_curve: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub train_loss: f64,
    pub test_loss: f64,
    /// First step at which training accuracy reached 100%; `steps` means
    /// only the final parameters did.
    pub converged_at: Option<usize>,
    pub status: RunStatus,
}

impl RunRecord {
    pub fn converged(&self) -> bool {
        self.converged_at.is_some() && self.status == RunStatus::Completed
    }

    pub fn failed(&self) -> bool {
        self.status != RunStatus::Completed
    }
}

fn params_of(rep: &Tensor, dec: &DecoderModel) -> Vec<Tensor> {
    let mut params = vec![rep.clone()];
    for l in dec.layers() {
        params.push(l.weight.clone());
        params.push(l.bias.clone());
    }
    params
}

fn unpack(params: &[Tensor], activation: Activation) -> Result<(Representation, DecoderModel)> {
    let rep = Representation::new(params[0].clone())?;
    let layers = params[1..]
        .chunks(2)
        .map(|c| Layer {
            weight: c[0].clone(),
            bias: c[1].clone(),
        })
        .collect();
    Ok((rep, DecoderModel::new(layers, activation)?))
}

/// Full-batch AdamW training of embeddings and decoder.
///
/// A run whose loss or gradients go non-finite is returned with
/// [`RunStatus::Diverged`] rather than as an error. If training accuracy
/// reached 100% at some step but the final parameters lost it, the record
/// carries the last parameters that were at 100%.
pub fn train(kg: &KnowledgeGraph, split: &TripleSplit, cfg: &TrainConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let (n, m) = (kg.n(), kg.m());
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter(
            "cannot train on an empty graph".into(),
        ));
    }
    let train_labels = DenseLabels::new(n, m, &split.train)?;
    let test_labels = DenseLabels::new(n, m, &split.test)?;
    if train_labels.count == 0 {
        return Err(Error::InvalidParameter(
            "split has no training triples".into(),
        ));
    }
    let pairs = PairIndex::all(n);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let emb = Tensor::randn(n, cfg.d, cfg.init_sd, &mut rng);
    let dec = DecoderModel::init(cfg.d, cfg.width, cfg.depth, m, cfg.activation, &mut rng)?;
    let mut params = params_of(&emb, &dec);
    let mut state = AdamState::new(&params);
    let adam = AdamConfig {
        lr: cfg.lr,
        weight_decay: cfg.weight_decay,
        ..AdamConfig::default()
    };

    let mut curve = Vec::with_capacity(cfg.steps);
    let mut converged_at = None;
    let mut last_perfect: Option<Vec<Tensor>> = None;
    let mut status = RunStatus::Completed;

    for step in 0..cfg.steps {
        let outcome = (|| -> Result<(f64, f64, Vec<Tensor>)> {
            let mut tape = Tape::new();
            let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
            let layers: Vec<(Var, Var)> = vars[1..].chunks(2).map(|c| (c[0], c[1])).collect();
            let probs = decode_pairs(&mut tape, vars[0], &layers, cfg.activation, &pairs)?;
            let loss = tape.bce_mean(probs, &train_labels.labels, Some(&train_labels.mask))?;
            let acc = train_labels.accuracy(tape.value(probs));
            let grads = tape.backward(loss)?;
            let grads = vars
                .iter()
                .zip(&params)
                .map(|(&v, p)| grads.get_or_zeros(v, p))
                .collect();
            Ok((tape.value(loss).data()[0], acc, grads))
        })();
        let (loss, acc, grads) = match outcome {
            Ok(x) => x,
            Err(Error::NonFinite(op)) => {
                status = RunStatus::Diverged {
                    step,
                    reason: format!("non-finite value in {op}"),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        curve.push(loss);
        if acc == 1.0 {
            converged_at.get_or_insert(step);
            last_perfect = Some(params.clone());
        }
        adam_step(&mut params, &grads, &mut state, &adam)?;
        if params.iter().any(|p| !p.is_finite()) {
            status = RunStatus::Diverged {
                step,
                reason: "non-finite parameters after update".into(),
            };
            break;
        }
    }

    if status != RunStatus::Completed {
        // Report the last finite state we have.
        let fallback = last_perfect
            .clone()
            .unwrap_or_else(|| params_of(&emb, &dec));
        let (representation, decoder) = unpack(&fallback, cfg.activation)?;
        return Ok(RunRecord {
            config: cfg.clone(),
            representation,
            decoder,
            train_loss_curve: curve,
            train_accuracy: f64::NAN,
            test_accuracy: f64::NAN,
            train_loss: f64::NAN,
            test_loss: f64::NAN,
            converged_at: None,
            status,
        });
    }

    let (mut representation, mut decoder) = unpack(&params, cfg.activation)?;
    let mut probs = decoder.predict_all_pairs(&representation)?;
    if train_labels.accuracy(&probs) == 1.0 {
        converged_at.get_or_insert(cfg.steps);
    } else if let Some(snapshot) = last_perfect {
        (representation, decoder) = unpack(&snapshot, cfg.activation)?;
        probs = decoder.predict_all_pairs(&representation)?;
    }
    Ok(RunRecord {
        config: cfg.clone(),
        train_accuracy: train_labels.accuracy(&probs),
        test_accuracy: test_labels.accuracy(&probs),
        train_loss: train_labels.loss(&probs),
        test_loss: test_labels.loss(&probs),
        representation,
        decoder,
        train_loss_curve: curve,
        converged_at,
        status,
    })
}

/// Hyperparameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Depth,
    Width,
    WeightDecay,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Depth => "depth",
            SweepAxis::Width => "width",
            SweepAxis::WeightDecay => "weight_decay",
        }
    }

    fn apply(self, cfg: &mut TrainConfig, value: f64) -> Result<()> {
        let as_count = |v: f64| {
            if v >= 1.0 && libm::trunc(v) == v {
                Ok(v as usize)
            } else {
                Err(Error::InvalidParameter(format!(
                    "{} must be a positive integer, got {v}",
                    self.as_str()
                )))
            }
        };
        match self {
            SweepAxis::Depth => cfg.depth = as_count(value)?,
            SweepAxis::Width => cfg.width = as_count(value)?,
            SweepAxis::WeightDecay => cfg.weight_decay = value,
        }
        Ok(())
    }
}

impl core::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depth" => Ok(SweepAxis::Depth),
            "width" => Ok(SweepAxis::Width),
            "weight_decay" | "wd" => Ok(SweepAxis::WeightDecay),
            other => Err(Error::InvalidParameter(format!(
                "unknown sweep axis `{other}`"
            ))),
        }
    }
}

/// One `(value, repeat)` cell of a sweep, with its resolved config.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepJob {
    pub axis_value: f64,
    pub repeat: usize,
    pub config: TrainConfig,
}

/// Enumerates the runs of a sweep. Each `(value, repeat)` gets its own
/// initialization seed; the split seed depends on the repeat only, so every
/// grid value sees the same splits.
pub fn sweep_jobs(
    axis: SweepAxis,
    grid: &[f64],
    repeats: usize,
    base: &TrainConfig,
) -> Result<Vec<SweepJob>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    if repeats == 0 {
        return Err(Error::InvalidParameter(
            "sweep needs at least one repeat".into(),
        ));
    }
    let mut jobs = Vec::with_capacity(grid.len() * repeats);
    for (vi, &value) in grid.iter().enumerate() {
        for repeat in 0..repeats {
            let mut config = base.clone();
            axis.apply(&mut config, value)?;
            config.seed = derive_seed(base.seed, ((vi as u64) << 32) | repeat as u64);
            config.split_seed = derive_seed(base.split_seed, repeat as u64);
            config.validate()?;
            jobs.push(SweepJob {
                axis_value: value,
                repeat,
                config,
            });
        }
    }
    Ok(jobs)
}

/// Outcome of one sweep run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub axis_value: f64,
    pub repeat: usize,
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub failed: bool,
}

/// Splits the graph for `job` and trains it.
pub fn run_sweep_job(kg: &KnowledgeGraph, job: &SweepJob) -> Result<(SweepRun, RunRecord)> {
    let split = split_triples(kg, job.config.train_fraction, job.config.split_seed)?;
    let record = train(kg, &split, &job.config)?;
    let run = SweepRun {
        axis_value: job.axis_value,
        repeat: job.repeat,
        seed: job.config.seed,
        train_acc: record.train_accuracy,
        test_acc: record.test_accuracy,
        train_loss: record.train_loss,
        test_loss: record.test_loss,
        failed: record.failed(),
    };
    Ok((run, record))
}

/// Aggregate of all repeats at one grid value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub train_mean: f64,
    pub train_sd: f64,
    pub test_mean: f64,
    pub test_sd: f64,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub runs: Vec<SweepRun>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Sorts runs by `(value, repeat)` and aggregates completed runs per
    /// value; failed runs are counted but excluded from the statistics.
    pub fn summarize(axis: SweepAxis, mut runs: Vec<SweepRun>) -> Self {
        runs.sort_by(|a, b| {
            a.axis_value
                .total_cmp(&b.axis_value)
                .then(a.repeat.cmp(&b.repeat))
        });
        let mut rows: Vec<SweepRow> = Vec::new();
        let mut start = 0;
        while start < runs.len() {
            let value = runs[start].axis_value;
            let end = runs[start..]
                .iter()
                .position(|r| r.axis_value != value)
                .map_or(runs.len(), |p| start + p);
            let ok: Vec<&SweepRun> = runs[start..end].iter().filter(|r| !r.failed).collect();
            let train: Vec<f64> = ok.iter().map(|r| r.train_acc).collect();
            let test: Vec<f64> = ok.iter().map(|r| r.test_acc).collect();
            rows.push(SweepRow {
                axis_value: value,
                train_mean: mean(&train),
                train_sd: std_dev(&train),
                test_mean: mean(&test),
                test_sd: std_dev(&test),
                completed: ok.len(),
                failed: end - start - ok.len(),
            });
            start = end;
        }
        SweepTable { axis, runs, rows }
    }
}

/// Runs a sweep sequentially. See [`sweep_jobs`] for seeding.
pub fn goldilocks_sweep(
    kg: &KnowledgeGraph,
    axis: SweepAxis,
    grid: &[f64],
    repeats: usize,
    base: &TrainConfig,
) -> Result<SweepTable> {
    let jobs = sweep_jobs(axis, grid, repeats, base)?;
    let runs = jobs
        .iter()
        .map(|job| run_sweep_job(kg, job).map(|(run, _)| run))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable::summarize(axis, runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::greater_than_kg;

    fn quick(steps: usize) -> TrainConfig {
        TrainConfig {
            d: 1,
            width: 8,
            steps,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn untrained_model_is_finite() {
        let kg = greater_than_kg(5).unwrap();
        let split = split_triples(&kg, 0.75, 0).unwrap();
        let rec = train(&kg, &split, &quick(0)).unwrap();
        assert!(rec.train_loss_curve.is_empty());
        assert!((0.0..=1.0).contains(&rec.train_accuracy));
        assert!((0.0..=1.0).contains(&rec.test_accuracy));
    }

    #[test]
    fn training_is_reproducible() {
        let kg = greater_than_kg(6).unwrap();
        let split = split_triples(&kg, 0.75, 1).unwrap();
        let a = train(&kg, &split, &quick(50)).unwrap();
        let b = train(&kg, &split, &quick(50)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train_loss_curve.len(), 50);
    }

    #[test]
    fn perfect_and_chance_decoders() {
        // Zero weights and a huge bias saturate the sigmoid; zero bias gives 0.5.
        let layer = |bias: f64| Layer {
            weight: Tensor::zeros(2, 1),
            bias: Tensor::filled(1, 1, bias),
        };
        let rep = Representation::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let negatives: Vec<Triple> = (0..2)
            .flat_map(|i| {
                (0..2).map(move |j| Triple {
                    relation: 0,
                    subject: i,
                    object: j,
                    label: false,
                })
            })
            .collect();
        let sure = DecoderModel::new(vec![layer(-60.0)], Activation::Tanh).unwrap();
        let e = evaluate(&rep, &sure, &negatives).unwrap();
        assert_eq!(e.accuracy, 1.0);
        // Probabilities are clamped at 1e-12 inside the loss.
        assert!(e.loss < 1.1e-12);
        let chance = DecoderModel::new(vec![layer(0.0)], Activation::Tanh).unwrap();
        let e = evaluate(&rep, &chance, &negatives).unwrap();
        assert!((e.loss - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn decoder_shape_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dec = DecoderModel::init(2, 5, 2, 3, Activation::Relu, &mut rng).unwrap();
        assert_eq!(dec.embed_dim(), 2);
        assert_eq!(dec.outputs(), 3);
        let rep = Representation::from_rows(&[vec![0.0; 3]]).unwrap();
        assert!(dec.predict_all_pairs(&rep).is_err());
        let broken = Layer {
            weight: Tensor::zeros(4, 2),
            bias: Tensor::zeros(1, 3),
        };
        assert!(DecoderModel::new(vec![broken], Activation::Tanh).is_err());
    }

    #[test]
    fn bad_config_rejected() {
        let kg = greater_than_kg(4).unwrap();
        let split = split_triples(&kg, 0.75, 0).unwrap();
        for cfg in [
            TrainConfig { d: 0, ..quick(1) },
            TrainConfig {
                lr: -1.0,
                ..quick(1)
            },
            TrainConfig {
                train_fraction: 1.0,
                ..quick(1)
            },
        ] {
            assert!(train(&kg, &split, &cfg).is_err());
        }
    }

    #[test]
    fn divergence_is_reported_not_raised() {
        let kg = greater_than_kg(4).unwrap();
        let split = split_triples(&kg, 0.75, 0).unwrap();
        let cfg = TrainConfig {
            lr: 1e300,
            ..quick(20)
        };
        let rec = train(&kg, &split, &cfg).unwrap();
        assert!(rec.failed());
        assert!(!rec.converged());
    }

    #[test]
    fn single_point_sweep_matches_direct_run() {
        let kg = greater_than_kg(5).unwrap();
        let base = quick(30);
        let table = goldilocks_sweep(&kg, SweepAxis::Width, &[4.0], 1, &base).unwrap();
        assert_eq!(table.rows.len(), 1);
        let job = &sweep_jobs(SweepAxis::Width, &[4.0], 1, &base).unwrap()[0];
        let split = split_triples(&kg, 0.75, job.config.split_seed).unwrap();
        let direct = train(&kg, &split, &job.config).unwrap();
        assert_eq!(table.rows[0].train_mean, direct.train_accuracy);
        assert_eq!(table.rows[0].test_mean, direct.test_accuracy);
        assert_eq!(table.runs[0].seed, direct.config.seed);
    }

    #[test]
    fn sweep_seeds_are_distinct_and_sorted() {
        let jobs = sweep_jobs(SweepAxis::Depth, &[2.0, 1.0], 3, &quick(1)).unwrap();
        let mut seeds: Vec<u64> = jobs.iter().map(|j| j.config.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 6);
        assert!(sweep_jobs(SweepAxis::Width, &[2.5], 1, &quick(1)).is_err());
        assert!(sweep_jobs(SweepAxis::Width, &[], 1, &quick(1)).is_err());
        let kg = greater_than_kg(4).unwrap();
        let t = goldilocks_sweep(&kg, SweepAxis::Depth, &[2.0, 1.0], 1, &quick(2)).unwrap();
        assert_eq!(t.rows[0].axis_value, 1.0);
    }
}

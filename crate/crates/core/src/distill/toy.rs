//! A small teacher/student experiment on synthetic grids.
//!
//! Each example belongs to a class `k`. Its future window shows the class
//! prototype at every location; its past window holds a transformed cue of
//! the same prototype at one random location and a distractor at another,
//! with the remaining locations empty. A teacher learns to recognise future
//! windows, and a student starting from the teacher's weights learns to
//! anticipate the class from the past window alone.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::checkpoint::average_checkpoints;
use super::feature::FeatureMap;
use super::loss::{self, LossWeights};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Minimum held-out accuracy the teacher must reach on future windows.
pub const TEACHER_ACCURACY_FLOOR: f64 = 0.9;

/// Per-location two-layer ReLU feature extractor with a linear head over
/// mean-pooled features. Parameters are one flat vector:
/// `[w1 (hidden x input), w2 (channels x hidden), head (classes x channels), bias (classes)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyEncoder {
    input: usize,
    hidden: usize,
    channels: usize,
    classes: usize,
    params: Vec<f64>,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    inputs: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
    features: Vec<Vec<f64>>,
    pub pooled: Vec<f64>,
    pub logits: Vec<f64>,
}

impl Forward {
    pub fn features(&self) -> Result<FeatureMap> {
        FeatureMap::from_locations(&self.features)
    }
}

impl ToyEncoder {
    fn param_count(input: usize, hidden: usize, channels: usize, classes: usize) -> usize {
        hidden * input + channels * hidden + classes * channels + classes
    }

    pub fn random(input: usize, hidden: usize, channels: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let mut params = Vec::with_capacity(Self::param_count(input, hidden, channels, classes));
        let mut layer = |rows: usize, fan_in: usize| {
            let scale = (2.0 / fan_in as f64).sqrt();
            for _ in 0..rows * fan_in {
                params.push(scale * rng.sample::<f64, _>(StandardNormal));
            }
        };
        layer(hidden, input);
        layer(channels, hidden);
        layer(classes, channels);
        params.extend(std::iter::repeat_n(0.0, classes));
        Self {
            input,
            hidden,
            channels,
            classes,
            params,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::contract(format!(
                "encoder has {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        Ok(Self { params, ..self.clone() })
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w2 = self.hidden * self.input;
        let head = w2 + self.channels * self.hidden;
        let bias = head + self.classes * self.channels;
        (w2, head, bias)
    }

    pub fn forward(&self, inputs: &[Vec<f64>]) -> Forward {
        let (o2, oh, ob) = self.offsets();
        let w1 = &self.params[..o2];
        let w2 = &self.params[o2..oh];
        let head = &self.params[oh..ob];
        let bias = &self.params[ob..];
        let relu_layer = |w: &[f64], x: &[f64], rows: usize| -> Vec<f64> {
            w.chunks(x.len())
                .take(rows)
                .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().max(0.0))
                .collect()
        };
        let hidden: Vec<Vec<f64>> = inputs.iter().map(|x| relu_layer(w1, x, self.hidden)).collect();
        let features: Vec<Vec<f64>> = hidden.iter().map(|h| relu_layer(w2, h, self.channels)).collect();
        let l = features.len().max(1) as f64;
        let pooled: Vec<f64> = (0..self.channels)
            .map(|c| features.iter().map(|f| f[c]).sum::<f64>() / l)
            .collect();
        let logits = head
            .chunks(self.channels)
            .zip(bias)
            .map(|(row, b)| row.iter().zip(&pooled).map(|(a, x)| a * x).sum::<f64>() + b)
            .collect();
        Forward {
            inputs: inputs.to_vec(),
            hidden,
            features,
            pooled,
            logits,
        }
    }

    /// Smallest distance of any ReLU pre-activation from zero.
    pub(crate) fn kink_margin(&self, inputs: &[Vec<f64>]) -> f64 {
        let (o2, oh, _) = self.offsets();
        let w1 = &self.params[..o2];
        let w2 = &self.params[o2..oh];
        let mut margin = f64::INFINITY;
        for x in inputs {
            let pre1: Vec<f64> = w1
                .chunks(x.len())
                .take(self.hidden)
                .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let h: Vec<f64> = pre1.iter().map(|v| v.max(0.0)).collect();
            let pre2 = w2
                .chunks(h.len())
                .take(self.channels)
                .map(|row| row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>());
            margin = pre1.iter().copied().chain(pre2).fold(margin, |m, v| m.min(v.abs()));
        }
        margin
    }

    pub fn predict(&self, inputs: &[Vec<f64>]) -> usize {
        crate::prediction::top_k(&self.forward(inputs).logits, 1)[0]
    }

    /// Parameter gradient given gradients on the feature map (channel-major,
    /// as in [`FeatureMap::data`]) and on the logits.
    pub fn backward(&self, fwd: &Forward, d_features: &[f64], d_logits: &[f64]) -> Vec<f64> {
        let (o2, oh, ob) = self.offsets();
        let mut grad = vec![0.0; self.params.len()];
        let locs = fwd.features.len();
        let l = locs as f64;
        let mut d_pooled = vec![0.0; self.channels];
        for (k, &dz) in d_logits.iter().enumerate() {
            grad[ob + k] = dz;
            for c in 0..self.channels {
                grad[oh + k * self.channels + c] = dz * fwd.pooled[c];
                d_pooled[c] += dz * self.params[oh + k * self.channels + c];
            }
        }
        for i in 0..locs {
            let mut d_hidden = vec![0.0; self.hidden];
            for c in 0..self.channels {
                if fwd.features[i][c] <= 0.0 {
                    continue;
                }
                let d = d_features[c * locs + i] + d_pooled[c] / l;
                let row = o2 + c * self.hidden;
                for (j, h) in fwd.hidden[i].iter().enumerate() {
                    grad[row + j] += d * h;
                    d_hidden[j] += d * self.params[row + j];
                }
            }
            for (j, &dh) in d_hidden.iter().enumerate() {
                if fwd.hidden[i][j] <= 0.0 {
                    continue;
                }
                let row = j * self.input;
                for (q, x) in fwd.inputs[i].iter().enumerate() {
                    grad[row + q] += dh * x;
                }
            }
        }
        grad
    }

    fn step(&mut self, grad: &[f64], learning_rate: f64) {
        for (p, g) in self.params.iter_mut().zip(grad) {
            *p -= learning_rate * g;
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TrainMode {
    /// Cross-entropy on labeled pairs only.
    Plain,
    /// Weighted distillation plus cross-entropy on labeled and unlabeled pairs.
    Distilled,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Plain => "plain",
            TrainMode::Distilled => "distilled",
        }
    }
}

/// Settings of the synthetic task and its training runs.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyConfig {
    pub classes: usize,
    pub input_dim: usize,
    pub hidden: usize,
    pub channels: usize,
    pub locations: usize,
    /// Labeled training pairs per class.
    pub labeled_per_class: usize,
    /// Unlabeled training pairs in total.
    pub unlabeled: usize,
    /// Times each labeled pair appears in every epoch's stream.
    pub labeled_repeats: usize,
    /// Number of final epoch checkpoints averaged into the returned student.
    pub average_last: usize,
    /// Held-out labeled pairs per class.
    pub test_per_class: usize,
    /// Standard deviation of noise added to every non-empty location.
    pub noise: f64,
    pub teacher_examples: usize,
    pub teacher_epochs: usize,
    pub teacher_learning_rate: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weights: LossWeights,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            classes: 8,
            input_dim: 16,
            hidden: 32,
            channels: 16,
            locations: 8,
            labeled_per_class: 1,
            unlabeled: 400,
            labeled_repeats: 20,
            average_last: 5,
            test_per_class: 50,
            noise: 0.5,
            teacher_examples: 800,
            teacher_epochs: 10,
            teacher_learning_rate: 0.05,
            epochs: 20,
            learning_rate: 0.01,
            weights: LossWeights {
                lambda_d: 1.0,
                lambda_c: 1.0,
            },
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.classes,
            self.input_dim,
            self.hidden,
            self.channels,
            self.test_per_class,
        ];
        if dims.contains(&0) || self.locations < 2 || self.labeled_repeats == 0 || self.average_last == 0 {
            return Err(Error::contract("toy task sizes must be >= 1 and locations >= 2"));
        }
        if !(self.learning_rate > 0.0 && self.teacher_learning_rate > 0.0 && self.noise >= 0.0) {
            return Err(Error::contract("learning rates must be > 0 and noise >= 0"));
        }
        LossWeights::new(self.weights.lambda_d, self.weights.lambda_c)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ToyPair {
    pub past: Vec<Vec<f64>>,
    pub future: Vec<Vec<f64>>,
    pub class: usize,
    pub label: Option<usize>,
}

/// A generated task: class prototypes, the past-cue transform and the splits.
#[derive(Clone, Debug)]
pub struct ToyTask {
    config: ToyConfig,
    prototypes: Vec<Vec<f64>>,
    cue: Vec<Vec<f64>>,
    pub train: Vec<ToyPair>,
    pub test: Vec<ToyPair>,
}

fn gaussian(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

impl ToyTask {
    pub fn generate(config: &ToyConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.input_dim;
        let mut rng = stream(seed, &[0x7041]);
        let prototypes: Vec<Vec<f64>> = (0..config.classes).map(|_| gaussian(&mut rng, d, 1.0)).collect();
        let cue: Vec<Vec<f64>> = (0..d).map(|_| gaussian(&mut rng, d, 1.0 / (d as f64).sqrt())).collect();
        let mut task = Self {
            config: config.clone(),
            prototypes,
            cue,
            train: Vec::new(),
            test: Vec::new(),
        };
        let mut data_rng = stream(seed, &[0x7042]);
        for class in 0..config.classes {
            for _ in 0..config.labeled_per_class {
                let pair = task.pair(class, true, &mut data_rng);
                task.train.push(pair);
            }
        }
        for i in 0..config.unlabeled {
            let pair = task.pair(i % config.classes, false, &mut data_rng);
            task.train.push(pair);
        }
        let mut test_rng = stream(seed, &[0x7043]);
        for class in 0..config.classes {
            for _ in 0..config.test_per_class {
                let pair = task.pair(class, true, &mut test_rng);
                task.test.push(pair);
            }
        }
        Ok(task)
    }

    pub fn config(&self) -> &ToyConfig {
        &self.config
    }

    fn noisy(&self, base: &[f64], rng: &mut impl Rng) -> Vec<f64> {
        base.iter()
            .map(|x| x + self.config.noise * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn future_window(&self, class: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..self.config.locations)
            .map(|_| self.noisy(&self.prototypes[class], rng))
            .collect()
    }

    fn past_window(&self, class: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        let d = self.config.input_dim;
        let mut grid = vec![vec![0.0; d]; self.config.locations];
        let mut slots: Vec<usize> = (0..self.config.locations).collect();
        slots.shuffle(rng);
        let cue: Vec<f64> = self
            .cue
            .iter()
            .map(|row| row.iter().zip(&self.prototypes[class]).map(|(a, b)| a * b).sum())
            .collect();
        grid[slots[0]] = self.noisy(&cue, rng);
        let distractor = gaussian(rng, d, 1.0);
        grid[slots[1]] = self.noisy(&distractor, rng);
        grid
    }

    fn pair(&self, class: usize, labeled: bool, rng: &mut impl Rng) -> ToyPair {
        let past = self.past_window(class, rng);
        let future = self.future_window(class, rng);
        ToyPair {
            past,
            future,
            class,
            label: labeled.then_some(class),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_classification: f64,
    pub mean_distill: f64,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct ToyRun {
    pub seed: u64,
    pub mode: TrainMode,
    pub teacher_accuracy: f64,
    pub accuracy: f64,
    pub curve: Vec<EpochStats>,
    pub student: ToyEncoder,
}

fn accuracy(encoder: &ToyEncoder, examples: &[(&[Vec<f64>], usize)]) -> f64 {
    let hits = examples.iter().filter(|(x, y)| encoder.predict(x) == *y).count();
    hits as f64 / examples.len() as f64
}

/// Trains a recognition teacher on fresh future windows and checks it
/// against the accuracy floor on held-out ones.
pub fn train_teacher(task: &ToyTask, seed: u64) -> Result<(ToyEncoder, f64)> {
    let cfg = &task.config;
    let mut rng = stream(seed, &[0x7e1]);
    let mut teacher = ToyEncoder::random(cfg.input_dim, cfg.hidden, cfg.channels, cfg.classes, &mut rng);
    let examples: Vec<(Vec<Vec<f64>>, usize)> = (0..cfg.teacher_examples)
        .map(|i| (task.future_window(i % cfg.classes, &mut rng), i % cfg.classes))
        .collect();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for _ in 0..cfg.teacher_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = &examples[i];
            let fwd = teacher.forward(x);
            let (_, d_logits) = loss::cross_entropy(&fwd.logits, *y)?;
            let zeros = vec![0.0; cfg.channels * x.len()];
            let grad = teacher.backward(&fwd, &zeros, &d_logits);
            teacher.step(&grad, cfg.teacher_learning_rate);
        }
    }
    let held_out: Vec<(&[Vec<f64>], usize)> = task.test.iter().map(|p| (p.future.as_slice(), p.class)).collect();
    let acc = accuracy(&teacher, &held_out);
    if acc < TEACHER_ACCURACY_FLOOR {
        return Err(Error::Setup(format!(
            "teacher reached {:.1}% on future windows, below the {:.0}% floor",
            100.0 * acc,
            100.0 * TEACHER_ACCURACY_FLOOR
        )));
    }
    Ok((teacher, acc))
}

/// Trains a student from the teacher's weights. Both modes walk the same
/// shuffled stream of training pairs; plain mode skips unlabeled ones.
pub fn train_student(
    task: &ToyTask,
    teacher: &ToyEncoder,
    mode: TrainMode,
    seed: u64,
) -> Result<(ToyEncoder, Vec<EpochStats>)> {
    let cfg = &task.config;
    let targets: Vec<FeatureMap> = task
        .train
        .iter()
        .map(|p| teacher.forward(&p.future).features())
        .collect::<Result<_>>()?;
    let mut student = teacher.clone();
    let mut rng = stream(seed, &[0x57d]);
    let mut order: Vec<usize> = Vec::new();
    for (i, pair) in task.train.iter().enumerate() {
        let copies = if pair.label.is_some() { cfg.labeled_repeats } else { 1 };
        order.extend(std::iter::repeat_n(i, copies));
    }
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut checkpoints: Vec<Vec<f64>> = Vec::new();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut ce_total, mut d_total, mut steps, mut labeled) = (0.0, 0.0, 0.0, 0, 0);
        for &i in &order {
            let pair = &task.train[i];
            if mode == TrainMode::Plain && pair.label.is_none() {
                continue;
            }
            let fwd = student.forward(&pair.past);
            let grad = match mode {
                TrainMode::Plain => {
                    let y = pair.label.expect("plain mode only sees labeled pairs");
                    let (ce, g) = loss::cross_entropy(&fwd.logits, y)?;
                    let d_logits: Vec<f64> = g.iter().map(|g| cfg.weights.lambda_c * g).collect();
                    total += cfg.weights.lambda_c * ce;
                    ce_total += ce;
                    labeled += 1;
                    let zeros = vec![0.0; cfg.channels * pair.past.len()];
                    student.backward(&fwd, &zeros, &d_logits)
                }
                TrainMode::Distilled => {
                    let cg =
                        loss::combined_loss_grad(&fwd.features()?, &targets[i], &fwd.logits, pair.label, cfg.weights)?;
                    total += cg.value;
                    d_total += cg.distill;
                    if let Some(ce) = cg.classification {
                        ce_total += ce;
                        labeled += 1;
                    }
                    student.backward(&fwd, &cg.features, &cg.logits)
                }
            };
            student.step(&grad, cfg.learning_rate);
            steps += 1;
        }
        let per = |x: f64, n: usize| if n == 0 { 0.0 } else { x / n as f64 };
        curve.push(EpochStats {
            epoch,
            mean_loss: per(total, steps),
            mean_classification: per(ce_total, labeled),
            mean_distill: per(d_total, if mode == TrainMode::Distilled { steps } else { 0 }),
            steps,
        });
        if epoch + cfg.average_last >= cfg.epochs {
            checkpoints.push(student.params().to_vec());
        }
    }
    if checkpoints.len() > 1 {
        student = student.with_params(average_checkpoints(&checkpoints)?)?;
    }
    Ok((student, curve))
}

/// Top-1 anticipation accuracy on the held-out past windows.
pub fn anticipation_accuracy(task: &ToyTask, student: &ToyEncoder) -> f64 {
    let held_out: Vec<(&[Vec<f64>], usize)> = task.test.iter().map(|p| (p.past.as_slice(), p.class)).collect();
    accuracy(student, &held_out)
}

/// Generates the task for `seed`, trains its teacher and one student per mode.
pub fn train_toy(config: &ToyConfig, seed: u64, modes: &[TrainMode]) -> Result<Vec<ToyRun>> {
    let task = ToyTask::generate(config, seed)?;
    let (teacher, teacher_accuracy) = train_teacher(&task, seed)?;
    modes
        .iter()
        .map(|&mode| {
            let (student, curve) = train_student(&task, &teacher, mode, seed)?;
            Ok(ToyRun {
                seed,
                mode,
                teacher_accuracy,
                accuracy: anticipation_accuracy(&task, &student),
                curve,
                student,
            })
        })
        .collect()
}

/// [`train_toy`] for every seed, seeds running in parallel. Results keep
/// the order of `seeds`.
pub fn train_seeds(config: &ToyConfig, seeds: &[u64], modes: &[TrainMode]) -> Result<Vec<Vec<ToyRun>>> {
    seeds.par_iter().map(|&seed| train_toy(config, seed, modes)).collect()
}

//! Joint selector/downstream training.
//!
//! The selector holds one logit per feature; inclusion probabilities are
//! `sigmoid(logits)`. Each step draws M subset masks per example, evaluates
//! the downstream network on the masked input `x ⊙ z`, updates the selector
//! logits through the configured estimator, and updates the downstream
//! network with its exact backprop gradient averaged over the M masks.
//!
//! Score-function estimators (sfess, sfess_v) never request the downstream
//! network's input gradient; the relaxed baselines (gs, stgs) do, routing it
//! back through the tempered softmax rounds. The network's input-gradient
//! counter records which path ran.
//!
//! Everything is deterministic given the config seed. Wall-clock timings are
//! recorded on the side and are the single non-reproducible output; they are
//! excluded from the metrics CSV so repeated runs are byte-identical.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, exp_schedule, hard_topk};
use crate::error::{Error, Result};
use crate::experiments::config::{DatasetSpec, EstimatorId, ObjectiveId, RunConfig, Task};
use crate::experiments::data::{self, DataExample, SplitSizes};
use crate::experiments::metrics::{metric_accuracy, psnr_from_mse};
use crate::nn::{bce, cross_entropy, AdamState, Gradients, Layer, Network};
use crate::poibin::ProbVector;
use crate::subset::{SubsetDistribution, SubsetMask};

/// RNG streams carved out of the run seed.
const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_EVAL: u64 = 3;

/// Number of sampled masks averaged for the sampled-mask test metric.
const SAMPLED_EVAL_DRAWS: usize = 8;

/// Metrics CSV schema tag; bump when the column set changes.
pub const METRICS_SCHEMA: &str = "ksubset-metrics-v1";

/// One row of the per-epoch metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean estimator objective over all training evaluations this epoch.
    pub train_loss: f64,
    /// Task metric (accuracy or PSNR) on the train split, top-k mask.
    pub train_metric: f64,
    pub val_loss: f64,
    pub val_metric: f64,
    /// L2 norm of the selector logit gradient at the last batch.
    pub grad_norm: f64,
    /// Trace of the per-sample gradient covariance at the last batch.
    pub estimator_variance: f64,
}

/// Final test-set metrics, evaluated both with the deterministic top-k mask
/// of the learned marginals and with masks sampled from the learned
/// distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TestMetrics {
    pub loss_topk: f64,
    pub metric_topk: f64,
    pub metric_sampled: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub epochs: Vec<EpochMetrics>,
    /// Seconds per epoch. The only non-reproducible field; never written to
    /// the metrics CSV.
    pub wall_clock_secs: Vec<f64>,
    pub test: TestMetrics,
    /// Indices selected by the final top-k mask, ascending.
    pub mask: Vec<usize>,
    pub initial_marginals: Vec<f64>,
    pub final_marginals: Vec<f64>,
    /// Downstream input-gradient requests observed during the run.
    pub input_grad_queries: u64,
}

/// Everything needed to restore or inspect a finished run.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub n: usize,
    pub k: usize,
    pub selector_logits: Vec<f64>,
    pub selector_adam: AdamState,
    pub network: Network,
    pub network_adam: AdamState,
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug)]
pub struct TrainOutcome {
    pub record: RunRecord,
    pub checkpoint: Checkpoint,
}

struct StepStats {
    grad_norm: f64,
    probe: f64,
    loss_sum: f64,
    evals: usize,
}

struct Trainer<'a> {
    cfg: &'a RunConfig,
    n: usize,
    train_data: Vec<DataExample>,
    val_data: Vec<DataExample>,
    test_data: Vec<DataExample>,
    net: Network,
    net_adam: AdamState,
    logits: Vec<f64>,
    sel_adam: AdamState,
    train_rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn masked_input(features: &[f64], weights: &[f64]) -> Vec<f64> {
    features.iter().zip(weights).map(|(f, w)| f * w).collect()
}

fn mask_weights(mask: &SubsetMask) -> Vec<f64> {
    mask.bits().iter().map(|&b| b as f64).collect()
}

/// Downstream loss and its gradient at the network output for one example.
fn downstream_loss(task: Task, output: &[f64], example: &DataExample) -> Result<(f64, Vec<f64>)> {
    match task {
        Task::Classification => {
            let label = example
                .label
                .ok_or_else(|| Error::Config("classification needs labels".into()))?;
            let loss = cross_entropy(output, label)?;
            Ok((loss.value, loss.grad))
        }
        Task::Reconstruction => {
            let target = example
                .target
                .as_ref()
                .ok_or_else(|| Error::Config("reconstruction needs targets".into()))?;
            let loss = bce(output, target)?;
            Ok((loss.value, loss.grad))
        }
    }
}

/// The scalar the selector's estimator sees for one evaluation.
fn objective_value(
    objective: ObjectiveId,
    task: Task,
    output: &[f64],
    example: &DataExample,
    loss_value: f64,
) -> Result<f64> {
    match objective {
        ObjectiveId::Loss => Ok(loss_value),
        ObjectiveId::HardZeroOne => {
            debug_assert_eq!(task, Task::Classification);
            let label = example
                .label
                .ok_or_else(|| Error::Config("hard01 needs labels".into()))?;
            Ok(if argmax(output) == label { 0.0 } else { 1.0 })
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn check_finite(values: impl IntoIterator<Item = f64>, step: u64, what: &str) -> Result<()> {
    for v in values {
        if !v.is_finite() {
            return Err(Error::NanAbort {
                step,
                what: what.to_string(),
            });
        }
    }
    Ok(())
}

/// Trace of the unbiased covariance of per-sample gradient terms.
fn covariance_trace(terms: &[Vec<f64>]) -> f64 {
    let m = terms.len();
    if m < 2 {
        return 0.0;
    }
    let n = terms[0].len();
    let mut mean = vec![0.0; n];
    for t in terms {
        for (mu, v) in mean.iter_mut().zip(t) {
            *mu += v;
        }
    }
    for mu in &mut mean {
        *mu /= m as f64;
    }
    let mut trace = 0.0;
    for t in terms {
        for (mu, v) in mean.iter().zip(t) {
            let d = v - mu;
            trace += d * d;
        }
    }
    trace / (m - 1) as f64
}

impl<'a> Trainer<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        let splits = SplitSizes {
            train: cfg.train_size,
            val: cfg.val_size,
            test: cfg.test_size,
        };
        let (train_data, val_data, test_data, n, classes) = match &cfg.dataset {
            DatasetSpec::Synthetic {
                n,
                informative,
                samples,
            } => {
                let examples = data::make_synthetic(*n, informative, *samples, cfg.seed)?;
                let (train, val, test) = data::split_examples(examples, splits)?;
                (train, val, test, *n, 2usize)
            }
            DatasetSpec::Idx { images, labels } => {
                let ds = data::load_idx_dataset(images, labels, splits, cfg.seed)?;
                let classes = ds.classes.unwrap_or(10);
                (ds.train, ds.val, ds.test, ds.feature_dim, classes)
            }
        };
        if cfg.k == 0 || cfg.k >= n {
            return Err(Error::Config(format!("need 0 < k < n, got k={} n={n}", cfg.k)));
        }

        let mut init_rng = stream_rng(cfg.seed, STREAM_INIT);
        let net = build_network(cfg, n, classes, &mut init_rng)?;
        let shapes: Vec<usize> = net.param_tensors().iter().map(|t| t.len()).collect();
        let net_adam = AdamState::new(
            cfg.lr_downstream,
            cfg.downstream_betas,
            cfg.weight_decay,
            &shapes,
        );

        // Uniform initialization at k/n in probability space.
        let q = cfg.k as f64 / n as f64;
        let logits = vec![(q / (1.0 - q)).ln(); n];
        let sel_adam = AdamState::new(cfg.lr_selector, cfg.selector_betas, 0.0, &[n]);

        Ok(Self {
            cfg,
            n,
            train_data,
            val_data,
            test_data,
            net,
            net_adam,
            logits,
            sel_adam,
            train_rng: stream_rng(cfg.seed, STREAM_TRAIN),
            eval_rng: stream_rng(cfg.seed, STREAM_EVAL),
        })
    }

    fn theta(&self) -> Result<ProbVector> {
        ProbVector::new(self.logits.iter().map(|l| sigmoid(*l)).collect())
    }

    fn distribution(&self) -> Result<SubsetDistribution> {
        SubsetDistribution::new(self.theta()?, self.cfg.k)
    }

    fn run(mut self) -> Result<TrainOutcome> {
        let steps_per_epoch = self.train_data.len().div_ceil(self.cfg.batch_size);
        let total_steps = (self.cfg.epochs * steps_per_epoch) as u64;
        let initial_marginals = self.distribution()?.marginals().into_vec();

        let mut epochs = Vec::with_capacity(self.cfg.epochs);
        let mut wall_clock = Vec::with_capacity(self.cfg.epochs);
        let mut global_step = 0u64;
        for epoch in 0..self.cfg.epochs {
            let started = Instant::now();
            let mut order: Vec<usize> = (0..self.train_data.len()).collect();
            order.shuffle(&mut self.train_rng);

            let mut loss_sum = 0.0;
            let mut evals = 0usize;
            let mut last_grad_norm = 0.0;
            let mut last_probe = 0.0;
            for chunk in order.chunks(self.cfg.batch_size) {
                let stats = self.step(chunk, global_step, total_steps)?;
                loss_sum += stats.loss_sum;
                evals += stats.evals;
                last_grad_norm = stats.grad_norm;
                last_probe = stats.probe;
                global_step += 1;
            }

            let dist = self.distribution()?;
            let topk = hard_topk(dist.marginals().as_slice(), self.cfg.k);
            let (_, train_metric) = self.eval_with_mask(&self.train_data, &topk)?;
            let (val_loss, val_metric) = self.eval_with_mask(&self.val_data, &topk)?;
            epochs.push(EpochMetrics {
                epoch,
                train_loss: loss_sum / evals.max(1) as f64,
                train_metric,
                val_loss,
                val_metric,
                grad_norm: last_grad_norm,
                estimator_variance: last_probe,
            });
            wall_clock.push(started.elapsed().as_secs_f64());
        }

        let dist = self.distribution()?;
        let final_marginals = dist.marginals().into_vec();
        let topk = hard_topk(&final_marginals, self.cfg.k);
        let (loss_topk, metric_topk) = self.eval_with_mask(&self.test_data, &topk)?;
        let metric_sampled = self.eval_sampled(&dist)?;

        let record = RunRecord {
            epochs,
            wall_clock_secs: wall_clock,
            test: TestMetrics {
                loss_topk,
                metric_topk,
                metric_sampled,
            },
            mask: topk.indices(),
            initial_marginals,
            final_marginals,
            input_grad_queries: self.net.input_grad_queries(),
        };
        let checkpoint = Checkpoint {
            version: CHECKPOINT_VERSION,
            n: self.n,
            k: self.cfg.k,
            selector_logits: self.logits,
            selector_adam: self.sel_adam,
            network: self.net,
            network_adam: self.net_adam,
        };
        Ok(TrainOutcome { record, checkpoint })
    }

    fn step(&mut self, chunk: &[usize], global_step: u64, total_steps: u64) -> Result<StepStats> {
        let (sel_grad, down_grads, stats) = if self.cfg.estimator.is_score_function() {
            self.score_step(chunk, global_step)?
        } else {
            self.relaxed_step(chunk, global_step, total_steps)?
        };
        check_finite(sel_grad.iter().copied(), global_step, "selector gradient")?;
        check_finite([stats.loss_sum], global_step, "training loss")?;
        check_finite([down_grads.l2_norm()], global_step, "downstream gradient")?;

        let mut sel_params = [self.logits.as_mut_slice()];
        self.sel_adam
            .step(&mut sel_params, &[sel_grad.as_slice()])?;
        let grad_views: Vec<&[f64]> = down_grads.tensors.iter().map(|g| g.as_slice()).collect();
        let mut net_params = self.net.param_tensors_mut();
        self.net_adam.step(&mut net_params, &grad_views)?;
        Ok(stats)
    }

    /// One SFESS / SFESS-V batch: selector gradient in theta space chained
    /// through the logistic map; downstream gradients averaged over the M
    /// masks. Never requests the downstream input gradient.
    fn score_step(&mut self, chunk: &[usize], step: u64) -> Result<(Vec<f64>, Gradients, StepStats)> {
        let cfg = self.cfg;
        let m = cfg.m;
        let dist = self.distribution()?;
        let theta = dist.theta().as_slice().to_vec();

        let mut sel_grad_theta = vec![0.0; self.n];
        let mut down_grads = Gradients::zeros_like(&self.net);
        let mut probe_sum = 0.0;
        let mut loss_sum = 0.0;
        for &ei in chunk {
            let example = &self.train_data[ei];
            // One dropout draw per (example, step), shared by all M samples
            // so the control variate cancels the shared noise.
            let noise = self.net.sample_dropout_noise(&mut self.train_rng);
            let mut scores = Vec::with_capacity(m);
            let mut values = Vec::with_capacity(m);
            for _ in 0..m {
                let z = dist.sample(&mut self.train_rng);
                let input = masked_input(&example.features, &mask_weights(&z));
                let (output, cache) = self.net.forward_train(&input, &noise)?;
                let (loss_value, out_grad) = downstream_loss(cfg.task, &output, example)?;
                let f = objective_value(cfg.objective, cfg.task, &output, example, loss_value)?;
                down_grads.accumulate(&self.net.backward(&cache, &out_grad, false)?);
                scores.push(dist.score(&z)?);
                values.push(f);
                loss_sum += f;
            }
            // Per-sample gradient terms; their mean is this example's estimate.
            let mut terms: Vec<Vec<f64>> = Vec::with_capacity(m);
            match cfg.estimator {
                EstimatorId::Sfess => {
                    for (s, f) in scores.iter().zip(&values) {
                        terms.push(s.iter().map(|si| si * f).collect());
                    }
                }
                EstimatorId::SfessV => {
                    for j in 0..m {
                        let mut centered = 0.0;
                        for (l, f) in values.iter().enumerate() {
                            if l != j {
                                centered += values[j] - f;
                            }
                        }
                        centered /= (m - 1).max(1) as f64;
                        terms.push(scores[j].iter().map(|si| si * centered).collect());
                    }
                }
                _ => unreachable!("score_step only runs for score estimators"),
            }
            probe_sum += covariance_trace(&terms);
            for t in &terms {
                for (g, v) in sel_grad_theta.iter_mut().zip(t) {
                    *g += v / m as f64;
                }
            }
        }
        let batch = chunk.len() as f64;
        down_grads.scale(1.0 / (batch * m as f64));
        // Chain d theta / d logit = theta (1 - theta).
        let sel_grad: Vec<f64> = sel_grad_theta
            .iter()
            .zip(&theta)
            .map(|(g, t)| g / batch * t * (1.0 - t))
            .collect();
        let grad_norm = sel_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let _ = step;
        Ok((
            sel_grad,
            down_grads,
            StepStats {
                grad_norm,
                probe: probe_sum / batch,
                loss_sum,
                evals: chunk.len() * m,
            },
        ))
    }

    /// One GS / STGS batch: relaxed (or straight-through hardened) masks,
    /// loss gradients routed through the downstream input gradient and the
    /// tempered softmax rounds back to the logits.
    fn relaxed_step(
        &mut self,
        chunk: &[usize],
        global_step: u64,
        total_steps: u64,
    ) -> Result<(Vec<f64>, Gradients, StepStats)> {
        let cfg = self.cfg;
        let m = cfg.m;
        let denom = (total_steps.saturating_sub(1)).max(1) as usize;
        let tau = exp_schedule(
            cfg.tau_start,
            cfg.tau_end,
            (global_step as usize).min(denom),
            denom,
        )?;

        let mut sel_grad = vec![0.0; self.n];
        let mut down_grads = Gradients::zeros_like(&self.net);
        let mut probe_sum = 0.0;
        let mut loss_sum = 0.0;
        for &ei in chunk {
            let example = &self.train_data[ei];
            let noise = self.net.sample_dropout_noise(&mut self.train_rng);
            let mut terms: Vec<Vec<f64>> = Vec::with_capacity(m);
            for _ in 0..m {
                // Fresh Gumbel noise for each of the M samples.
                let (relaxed, trace) = baselines::gumbel_topk_relaxed_traced(
                    &self.logits,
                    cfg.k,
                    tau,
                    &mut self.train_rng,
                )?;
                let weights = match cfg.estimator {
                    EstimatorId::Gs => relaxed.weights.clone(),
                    EstimatorId::Stgs => mask_weights(&baselines::straight_through(&relaxed)),
                    _ => unreachable!("relaxed_step only runs for gs/stgs"),
                };
                let input = masked_input(&example.features, &weights);
                let (output, cache) = self.net.forward_train(&input, &noise)?;
                let (loss_value, out_grad) = downstream_loss(cfg.task, &output, example)?;
                loss_sum += loss_value;
                let grads = self.net.backward(&cache, &out_grad, true)?;
                let input_grad = grads.input.as_ref().expect("input gradient requested");
                // d loss / d mask-weight = input gradient ⊙ features; for the
                // straight-through path this hard-mask sensitivity stands in
                // for the relaxed one.
                let weight_grad: Vec<f64> = input_grad
                    .iter()
                    .zip(&example.features)
                    .map(|(g, f)| g * f)
                    .collect();
                terms.push(baselines::relaxed_logit_grad(&trace, &weight_grad));
                down_grads.accumulate(&grads);
            }
            probe_sum += covariance_trace(&terms);
            for t in &terms {
                for (g, v) in sel_grad.iter_mut().zip(t) {
                    *g += v / m as f64;
                }
            }
        }
        let batch = chunk.len() as f64;
        down_grads.scale(1.0 / (batch * m as f64));
        for g in &mut sel_grad {
            *g /= batch;
        }
        let grad_norm = sel_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        Ok((
            sel_grad,
            down_grads,
            StepStats {
                grad_norm,
                probe: probe_sum / batch,
                loss_sum,
                evals: chunk.len() * m,
            },
        ))
    }

    /// Loss and task metric on a split under a fixed mask (eval mode).
    fn eval_with_mask(&self, examples: &[DataExample], mask: &SubsetMask) -> Result<(f64, f64)> {
        let weights = mask_weights(mask);
        match self.cfg.task {
            Task::Classification => {
                let mut loss_sum = 0.0;
                let mut predictions = Vec::with_capacity(examples.len());
                let mut labels = Vec::with_capacity(examples.len());
                for ex in examples {
                    let out = self.net.forward_eval(&masked_input(&ex.features, &weights))?;
                    let label = ex
                        .label
                        .ok_or_else(|| Error::Config("classification needs labels".into()))?;
                    loss_sum += cross_entropy(&out, label)?.value;
                    predictions.push(argmax(&out));
                    labels.push(label);
                }
                Ok((
                    loss_sum / examples.len().max(1) as f64,
                    metric_accuracy(&predictions, &labels)?,
                ))
            }
            Task::Reconstruction => {
                let mut loss_sum = 0.0;
                let mut sq_err = 0.0;
                let mut count = 0usize;
                for ex in examples {
                    let out = self.net.forward_eval(&masked_input(&ex.features, &weights))?;
                    let target = ex
                        .target
                        .as_ref()
                        .ok_or_else(|| Error::Config("reconstruction needs targets".into()))?;
                    loss_sum += bce(&out, target)?.value;
                    for (o, t) in out.iter().zip(target) {
                        sq_err += (o - t) * (o - t);
                    }
                    count += target.len();
                }
                Ok((
                    loss_sum / examples.len().max(1) as f64,
                    psnr_from_mse(sq_err / count.max(1) as f64),
                ))
            }
        }
    }

    /// Test metric averaged over masks sampled from the learned distribution
    /// (score estimators) or hard Gumbel top-k draws (relaxed baselines).
    fn eval_sampled(&mut self, dist: &SubsetDistribution) -> Result<f64> {
        let mut total = 0.0;
        for _ in 0..SAMPLED_EVAL_DRAWS {
            let mask = if self.cfg.estimator.is_score_function() {
                dist.sample(&mut self.eval_rng)
            } else {
                let keys: Vec<f64> = self
                    .logits
                    .iter()
                    .map(|l| {
                        let u: f64 = self.eval_rng.gen::<f64>().max(f64::MIN_POSITIVE);
                        l - (-u.ln()).ln()
                    })
                    .collect();
                hard_topk(&keys, self.cfg.k)
            };
            let (_, metric) = self.eval_with_mask(&self.test_data, &mask)?;
            total += metric;
        }
        Ok(total / SAMPLED_EVAL_DRAWS as f64)
    }
}

fn build_network(cfg: &RunConfig, n: usize, classes: usize, rng: &mut ChaCha8Rng) -> Result<Network> {
    let mut layers = Vec::new();
    let mut dim = n;
    for &h in &cfg.hidden {
        layers.push(Layer::linear(dim, h, rng));
        layers.push(Layer::Relu);
        if cfg.dropout > 0.0 {
            layers.push(Layer::Dropout { rate: cfg.dropout });
        }
        dim = h;
    }
    match cfg.task {
        Task::Classification => {
            layers.push(Layer::linear(dim, classes, rng));
            layers.push(Layer::Softmax);
        }
        Task::Reconstruction => {
            layers.push(Layer::linear(dim, n, rng));
            layers.push(Layer::Sigmoid);
        }
    }
    Network::new(layers)
}

/// Runs a full training job described by the config.
pub fn train(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    Trainer::new(config)?.run()
}

/// Renders the per-epoch metrics table. First line carries the schema tag.
pub fn metrics_csv(record: &RunRecord) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {METRICS_SCHEMA}\n"));
    out.push_str("epoch,train_loss,train_metric,val_loss,val_metric,grad_norm,estimator_variance\n");
    for row in &record.epochs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.epoch,
            row.train_loss,
            row.train_metric,
            row.val_loss,
            row.val_metric,
            row.grad_norm,
            row.estimator_variance
        ));
    }
    out
}

/// Writes metrics.csv, metadata.json, mask.txt, and checkpoint.json.
pub fn write_run_outputs(dir: &Path, config: &RunConfig, outcome: &TrainOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("metrics.csv"), metrics_csv(&outcome.record))?;

    let mut mask_text = String::new();
    for i in &outcome.record.mask {
        mask_text.push_str(&format!("{i}\n"));
    }
    std::fs::write(dir.join("mask.txt"), mask_text)?;

    let mut meta = serde_json::Map::new();
    meta.insert("schema".into(), METRICS_SCHEMA.into());
    meta.insert(
        "config".into(),
        serde_json::Value::Object(
            config
                .to_kv()
                .into_iter()
                .map(|(k, v)| (k, serde_json::Value::String(v)))
                .collect(),
        ),
    );
    meta.insert("weight_init".into(), "uniform_fan_in".into());
    meta.insert(
        "test_loss_topk".into(),
        json_f64(outcome.record.test.loss_topk),
    );
    meta.insert(
        "test_metric_topk".into(),
        json_f64(outcome.record.test.metric_topk),
    );
    meta.insert(
        "test_metric_sampled".into(),
        json_f64(outcome.record.test.metric_sampled),
    );
    meta.insert(
        "mask".into(),
        serde_json::Value::Array(
            outcome
                .record
                .mask
                .iter()
                .map(|&i| serde_json::Value::from(i as u64))
                .collect(),
        ),
    );
    meta.insert(
        "input_grad_queries".into(),
        serde_json::Value::from(outcome.record.input_grad_queries),
    );
    // Timings vary run to run; everything else in this file is reproducible.
    meta.insert(
        "wall_clock_secs".into(),
        serde_json::Value::Array(
            outcome
                .record
                .wall_clock_secs
                .iter()
                .map(|&s| json_f64(s))
                .collect(),
        ),
    );
    let meta_text = serde_json::to_string_pretty(&serde_json::Value::Object(meta))
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    std::fs::write(dir.join("metadata.json"), meta_text + "\n")?;

    let ck_text = serde_json::to_string(&outcome.checkpoint)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    std::fs::write(dir.join("checkpoint.json"), ck_text)?;
    Ok(())
}

fn json_f64(v: f64) -> serde_json::Value {
    // JSON has no infinities; keep the documented "inf" sentinel as a string.
    if v.is_finite() {
        serde_json::Number::from_f64(v)
            .map(serde_json::Value::Number)
            .unwrap_or_else(|| serde_json::Value::String(v.to_string()))
    } else {
        serde_json::Value::String(v.to_string())
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    let ck: Checkpoint =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if ck.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {}",
            ck.version
        )));
    }
    Ok(ck)
}

/// Top-k mask (by learned marginals) encoded in a checkpoint.
pub fn checkpoint_topk_mask(ck: &Checkpoint) -> Result<Vec<usize>> {
    let theta = ProbVector::new(ck.selector_logits.iter().map(|l| sigmoid(*l)).collect())?;
    let dist = SubsetDistribution::new(theta, ck.k)?;
    Ok(hard_topk(dist.marginals().as_slice(), ck.k).indices())
}

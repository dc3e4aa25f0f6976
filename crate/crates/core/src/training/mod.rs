//! Mini-batch SGD on patch pairs with MSE on the 14×14 output window.
//!
//! The last layer and the remaining layers have separate learning rates.
//! Gradients are averaged over the batch, summed in batch order, so a run
//! is a deterministic function of its configuration, data and seed.

pub mod grids;
mod patches;
mod sampler;

pub use patches::{
    extract_patch_pairs, window_origins, ImagePair, PatchExtraction, PatchPair, PatchSource,
    WindowedImages, STRIDE_HORIZONTAL, STRIDE_VERTICAL,
};
pub use grids::{Grid, GridVariant};
pub use sampler::EpochSampler;

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::conv::{conv2d_input_grad, conv2d_param_grads};
use crate::error::{Error, Result};
use crate::metrics::{psnr, BorderMode, DEFAULT_PEAK};
use crate::network::{
    init_network, save_checkpoint, Checkpoint, ForwardTrace, Network, NetworkSpec, DEFAULT_WEIGHT_STD,
    TARGET_SIZE,
};
use crate::tensor::{relu_backward, FilterBank, Tensor};

pub const DEFAULT_LR_LAST: f64 = 1e-5;
pub const DEFAULT_LR_OTHER: f64 = 1e-4;
pub const DEFAULT_BATCH_SIZE: usize = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub spec: NetworkSpec,
    pub lr_last: f64,
    pub lr_other: f64,
    /// Classical momentum coefficient; 0 gives plain SGD.
    pub momentum: f64,
    pub weight_std: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub max_iterations: u64,
    /// 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
    /// 0 disables convergence records.
    pub eval_every: u64,
    /// Border handling for validation PSNR.
    pub eval_border: BorderMode,
}

impl TrainConfig {
    pub fn new(spec: NetworkSpec) -> Self {
        TrainConfig {
            spec,
            lr_last: DEFAULT_LR_LAST,
            lr_other: DEFAULT_LR_OTHER,
            momentum: 0.0,
            weight_std: DEFAULT_WEIGHT_STD,
            seed: 0,
            batch_size: DEFAULT_BATCH_SIZE,
            max_iterations: 5000,
            checkpoint_every: 0,
            eval_every: 100,
            eval_border: BorderMode::Trim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.lr_last) || !finite_nonneg(self.lr_other) {
            return Err(Error::invalid("learning rates must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if !(self.weight_std > 0.0 && self.weight_std.is_finite()) {
            return Err(Error::invalid("weight_std must be positive"));
        }
        self.spec.training_pad()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub iteration: u64,
    /// `iteration × batch_size`.
    pub backprops: u64,
    /// Mean batch MSE over the iterations since the previous record (`[0,1]` pixel scale).
    pub train_mse: f64,
    /// Mean validation PSNR in dB; `None` without validation images.
    pub val_psnr: Option<f64>,
}

pub const CONVERGENCE_CSV_HEADER: &str = "iteration,backprops,train_mse,val_psnr";

pub fn write_convergence_csv(records: &[ConvergenceRecord], w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "{CONVERGENCE_CSV_HEADER}")?;
    for r in records {
        let val = r.val_psnr.map_or(String::new(), |v| format!("{v:.6}"));
        writeln!(w, "{},{},{:.9e},{}", r.iteration, r.backprops, r.train_mse, val)?;
    }
    Ok(())
}

/// `(1/N)·Σ(pred − target)²` and its gradient `(2/N)·(pred − target)`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    pred.ensure_same_shape(target, "mse_loss")?;
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad: Vec<f64> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    let (c, h, w) = pred.shape();
    Ok((loss / n, Tensor::new(c, h, w, grad)?))
}

/// Parameter gradients of a scalar loss, given `∂loss/∂output` and the forward trace.
pub fn backprop(net: &Network, trace: &ForwardTrace, grad_output: &Tensor) -> Result<Vec<FilterBank>> {
    let banks = net.banks();
    let mut grads: Vec<Option<FilterBank>> = vec![None; banks.len()];
    let mut g = grad_output.clone();
    for i in (0..banks.len()).rev() {
        let input = &trace.activations[i];
        grads[i] = Some(conv2d_param_grads(input, &banks[i], &g)?);
        if i > 0 {
            let gi = conv2d_input_grad(input, &banks[i], &g)?;
            g = relu_backward(input, &gi)?;
        }
    }
    Ok(grads.into_iter().map(|g| g.expect("every layer visited")).collect())
}

/// Loss and parameter gradients for one pair.
pub fn pair_gradients(net: &Network, pair: &PatchPair) -> Result<(f64, Vec<FilterBank>)> {
    let trace = net.forward_trace(&pair.input)?;
    let out = trace.output();
    if out.shape() != (1, TARGET_SIZE, TARGET_SIZE) {
        return Err(Error::shape(format!(
            "network output {:?} does not match the {TARGET_SIZE}x{TARGET_SIZE} target; input patch has the wrong padding for {}",
            out.shape(),
            net.spec()
        )));
    }
    let (loss, g) = mse_loss(out, &pair.target)?;
    Ok((loss, backprop(net, &trace, &g)?))
}

fn accumulate(into: &mut [FilterBank], from: &[FilterBank]) {
    for (a, b) in into.iter_mut().zip(from) {
        for (x, y) in a.weights_mut().iter_mut().zip(b.weights()) {
            *x += y;
        }
        for (x, y) in a.biases_mut().iter_mut().zip(b.biases()) {
            *x += y;
        }
    }
}

fn scale(banks: &mut [FilterBank], s: f64) {
    for b in banks {
        b.weights_mut().iter_mut().for_each(|v| *v *= s);
        b.biases_mut().iter_mut().for_each(|v| *v *= s);
    }
}

/// Mean loss and batch-averaged gradients.
pub fn batch_gradients<'a, I>(net: &Network, batch: I) -> Result<(f64, Vec<FilterBank>)>
where
    I: IntoIterator<Item = &'a PatchPair>,
{
    let mut total: Option<Vec<FilterBank>> = None;
    let mut loss = 0.0;
    let mut n = 0usize;
    for pair in batch {
        let (l, g) = pair_gradients(net, pair)?;
        loss += l;
        n += 1;
        match &mut total {
            None => total = Some(g),
            Some(t) => accumulate(t, &g),
        }
    }
    let mut grads = total.ok_or_else(|| Error::invalid("empty batch"))?;
    scale(&mut grads, 1.0 / n as f64);
    Ok((loss / n as f64, grads))
}

/// SGD with per-layer learning rates and optional classical momentum.
#[derive(Clone, Debug)]
pub struct Sgd {
    lr_last: f64,
    lr_other: f64,
    momentum: f64,
    velocity: Option<Vec<FilterBank>>,
}

impl Sgd {
    pub fn new(lr_last: f64, lr_other: f64, momentum: f64) -> Self {
        Sgd { lr_last, lr_other, momentum, velocity: None }
    }

    pub fn from_config(config: &TrainConfig) -> Self {
        Self::new(config.lr_last, config.lr_other, config.momentum)
    }

    /// Applies `w ← w − lr·v` with `v ← μ·v + g` (plain SGD when μ = 0).
    pub fn apply(&mut self, net: &mut Network, grads: &[FilterBank]) -> Result<()> {
        let last = net.banks().len() - 1;
        if grads.len() != net.banks().len() || grads.iter().zip(net.banks()).any(|(g, b)| !g.same_layout(b)) {
            return Err(Error::shape("gradient layout does not match the network"));
        }
        let step: &[FilterBank] = if self.momentum > 0.0 {
            let v = self.velocity.get_or_insert_with(|| {
                grads.iter().map(|g| FilterBank::zeros(g.num_filters(), g.in_channels(), g.filter_size())).collect()
            });
            scale(v, self.momentum);
            accumulate(v, grads);
            v
        } else {
            grads
        };
        for (i, (bank, g)) in net.banks_mut().iter_mut().zip(step).enumerate() {
            let lr = if i == last { self.lr_last } else { self.lr_other };
            if lr == 0.0 {
                continue;
            }
            for (w, d) in bank.weights_mut().iter_mut().zip(g.weights()) {
                *w -= lr * d;
            }
            for (b, d) in bank.biases_mut().iter_mut().zip(g.biases()) {
                *b -= lr * d;
            }
        }
        Ok(())
    }
}

/// One plain-SGD update on `batch`; returns the batch MSE before the update.
pub fn sgd_step(net: &mut Network, batch: &[PatchPair], config: &TrainConfig) -> Result<f64> {
    let (loss, grads) = batch_gradients(net, batch)?;
    Sgd::new(config.lr_last, config.lr_other, 0.0).apply(net, &grads)?;
    Ok(loss)
}

/// Mean PSNR (dB) of `predict_image` outputs against HR references.
///
/// Identical pairs count as [`Psnr::CAP_DB`](crate::metrics::Psnr::CAP_DB).
pub fn validation_psnr(net: &Network, images: &[ImagePair], border: BorderMode) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::invalid("no validation images"));
    }
    let mut total = 0.0;
    for im in images {
        let sr = net.predict_image(&im.lr_upscaled)?;
        total += psnr(&sr, &im.hr, DEFAULT_PEAK, border)?.capped();
    }
    Ok(total / images.len() as f64)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub network: Network,
    pub records: Vec<ConvergenceRecord>,
    pub checkpoints: Vec<PathBuf>,
}

pub fn checkpoint_file_name(iteration: u64) -> String {
    format!("iter_{iteration:07}.ckpt")
}

/// Full training run.
///
/// Batches are drawn by an epoch-shuffled sampler seeded from `config.seed`;
/// the network is initialized from the same seed. Checkpoints, when
/// enabled, land in `checkpoint_dir`.
pub fn train<S: PatchSource + ?Sized>(
    config: &TrainConfig,
    train_set: &S,
    validation: &[ImagePair],
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut net = init_network(&config.spec, config.weight_std, config.seed)?;
    let mut sampler = EpochSampler::new(train_set.len(), config.seed);
    let mut opt = Sgd::from_config(config);
    let mut records = Vec::new();
    let mut checkpoints = Vec::new();
    let (mut interval_loss, mut interval_steps) = (0.0, 0u64);
    let mut batch = Vec::with_capacity(config.batch_size);

    for iteration in 1..=config.max_iterations {
        batch.clear();
        for _ in 0..config.batch_size {
            batch.push(train_set.pair(sampler.next_index())?.into_owned());
        }
        let (loss, grads) = batch_gradients(&net, &batch)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration, loss });
        }
        opt.apply(&mut net, &grads)?;
        if net.banks().iter().any(|b| b.weights().iter().chain(b.biases()).any(|v| !v.is_finite())) {
            return Err(Error::Divergence { iteration, loss: f64::NAN });
        }
        interval_loss += loss;
        interval_steps += 1;

        if config.eval_every > 0 && iteration % config.eval_every == 0 {
            let val_psnr = if validation.is_empty() {
                None
            } else {
                Some(validation_psnr(&net, validation, config.eval_border)?)
            };
            let rec = ConvergenceRecord {
                iteration,
                backprops: iteration * config.batch_size as u64,
                train_mse: interval_loss / interval_steps as f64,
                val_psnr,
            };
            log::info!(
                "iter {iteration}: train mse {:.3e}, val psnr {}",
                rec.train_mse,
                val_psnr.map_or("-".into(), |v| format!("{v:.3} dB"))
            );
            records.push(rec);
            interval_loss = 0.0;
            interval_steps = 0;
        }
        if let Some(dir) = checkpoint_dir {
            if config.checkpoint_every > 0 && iteration % config.checkpoint_every == 0 {
                let path = dir.join(checkpoint_file_name(iteration));
                let ck = Checkpoint {
                    network: net.clone(),
                    iteration,
                    rng_state: sampler.state_bytes(),
                };
                save_checkpoint(&ck, &path)?;
                checkpoints.push(path);
            }
        }
    }
    Ok(TrainOutcome { network: net, records, checkpoints })
}

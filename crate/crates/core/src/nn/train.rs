//! Forward/backward passes with quantization and noise, SGD training, and
//! Monte-Carlo accuracy evaluation.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ops;
use super::{LayerKind, Network, NoiseSpec, TrainConfig};
use crate::data::{Dataset, LabeledSet};
use crate::error::{Error, Result};
use crate::quant::{quantize_tensor, FixedPointFormat, QuantizationScheme};
use crate::tensor::Tensor;

/// One additive perturbation tensor per parametric layer.
pub type NoiseDraw = Vec<Tensor>;

/// Draws one Gaussian perturbation per weight element. Returns `None` when
/// noise is disabled.
pub fn sample_noise<R: Rng>(net: &Network, noise: Option<&NoiseSpec>, rng: &mut R) -> Option<NoiseDraw> {
    let spec = noise.filter(|n| n.enabled)?;
    assert_eq!(
        spec.per_layer_sigma.len(),
        net.parametric_layers(),
        "noise spec must carry one sigma per parametric layer"
    );
    let draw = net
        .weights()
        .iter()
        .zip(&spec.per_layer_sigma)
        .map(|(w, &sigma)| {
            let dist = Normal::new(0.0, sigma).expect("sigma >= 0");
            let data = (0..w.len()).map(|_| dist.sample(rng)).collect();
            Tensor::from_vec(w.shape(), data).unwrap()
        })
        .collect();
    Some(draw)
}

struct LayerCache {
    /// Quantized input activations actually fed to the array.
    x_q: Tensor,
    /// Quantized-plus-noise weights used for the multiply.
    w_eff: Tensor,
    /// Pre-activation output (before ReLU/pool).
    lin: Tensor,
    /// Layer output passed to the next layer.
    out: Tensor,
    pool_argmax: Option<Vec<usize>>,
}

struct ForwardPass {
    layers: Vec<LayerCache>,
    logits: Tensor,
}

fn effective_weights(
    net: &Network,
    i: usize,
    qw: Option<FixedPointFormat>,
    draw: Option<&NoiseDraw>,
) -> Tensor {
    let w = &net.weights()[i];
    let mut eff = match qw {
        Some(fmt) => quantize_tensor(w, fmt),
        None => w.clone(),
    };
    if let Some(d) = draw {
        let delta = &d[i];
        for (e, &dv) in eff.data_mut().iter_mut().zip(delta.data()) {
            *e += dv;
        }
    }
    eff
}

fn run_forward(
    net: &Network,
    batch: &Tensor,
    quant: Option<&QuantizationScheme>,
    draw: Option<&NoiseDraw>,
) -> Result<ForwardPass> {
    let shape = batch.shape();
    let (c, h, w) = net.input_shape();
    if shape.len() != 4 || (shape[1], shape[2], shape[3]) != (c, h, w) || shape[0] == 0 {
        return Err(Error::ShapeMismatch {
            expected: format!("(batch, {c}, {h}, {w})"),
            got: format!("{shape:?}"),
        });
    }
    let b = shape[0];

    let mut caches = Vec::with_capacity(net.layers().len());
    let mut x = batch.clone();
    let shapes = net.layer_input_shapes();
    for (i, kind) in net.layers().iter().enumerate() {
        let formats = quant.map(|q| q.layer_formats(i));
        let (qa, qw) = match formats {
            Some((a, w)) => (Some(a), Some(w)),
            None => (None, None),
        };
        let x_q = match qa {
            Some(fmt) => quantize_tensor(&x, fmt),
            None => x.clone(),
        };
        let w_eff = effective_weights(net, i, qw, draw);
        let bias = &net.biases()[i];

        let (in_c, in_h, in_w) = shapes[i];
        let (lin, act_is_output) = match *kind {
            LayerKind::Conv { .. } => {
                let x4 = reshape(&x_q, &[b, in_c, in_h, in_w]);
                (ops::conv2d(&x4, &w_eff, bias), false)
            }
            LayerKind::FullyConnected { .. } => {
                let x2 = reshape(&x_q, &[b, in_c * in_h * in_w]);
                (ops::dense(&x2, &w_eff, bias), false)
            }
            LayerKind::Output { .. } => {
                let x2 = reshape(&x_q, &[b, in_c * in_h * in_w]);
                (ops::dense(&x2, &w_eff, bias), true)
            }
        };

        let act = if act_is_output {
            lin.clone()
        } else {
            lin.map(|v| v.max(0.0))
        };
        let (out, pool_argmax) = match *kind {
            LayerKind::Conv { pool_after: true, .. } => {
                let (p, idx) = ops::maxpool2(&act);
                (p, Some(idx))
            }
            _ => (act, None),
        };
        caches.push(LayerCache {
            x_q,
            w_eff,
            lin,
            out: out.clone(),
            pool_argmax,
        });
        x = out;
    }
    let logits = reshape(&x, &[b, net.output_dim()]);
    logits.debug_check_finite();
    Ok(ForwardPass {
        layers: caches,
        logits,
    })
}

fn reshape(t: &Tensor, shape: &[usize]) -> Tensor {
    Tensor::from_vec(shape, t.data().to_vec()).expect("element count preserved")
}

/// Logits for a batch; draws fresh noise from `rng` when enabled.
pub fn forward<R: Rng>(
    net: &Network,
    batch: &Tensor,
    quant: Option<&QuantizationScheme>,
    noise: Option<&NoiseSpec>,
    rng: &mut R,
) -> Result<Tensor> {
    let draw = sample_noise(net, noise, rng);
    forward_with_draw(net, batch, quant, draw.as_ref())
}

/// Logits for a batch under a fixed noise draw.
pub fn forward_with_draw(
    net: &Network,
    batch: &Tensor,
    quant: Option<&QuantizationScheme>,
    draw: Option<&NoiseDraw>,
) -> Result<Tensor> {
    Ok(run_forward(net, batch, quant, draw)?.logits)
}

/// Mean softmax cross-entropy and its gradient wrt the logits.
fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> (f64, Tensor) {
    let b = labels.len();
    let k = logits.len() / b;
    let mut dl = vec![0.0; logits.len()];
    let mut loss = 0.0;
    for (bi, &y) in labels.iter().enumerate() {
        let row = &logits.data()[bi * k..(bi + 1) * k];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&z| (z - m).exp()).sum();
        let lse = m + sum.ln();
        loss += lse - row[y];
        for o in 0..k {
            let p = (row[o] - lse).exp();
            dl[bi * k + o] = (p - f64::from(u8::from(o == y))) / b as f64;
        }
    }
    (
        loss / b as f64,
        Tensor::from_vec(logits.shape(), dl).unwrap(),
    )
}

/// Straight-through mask: 1 inside the format's representable range, 0 for
/// saturated values.
fn ste_mask(value: f64, fmt: FixedPointFormat) -> f64 {
    let (min, max, _) = fmt.representable_set();
    f64::from(u8::from(value >= min && value <= max))
}

struct Gradients {
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
}

fn run_backward(
    net: &Network,
    batch: &Tensor,
    pass: &ForwardPass,
    quant: Option<&QuantizationScheme>,
    dlogits: Tensor,
) -> Gradients {
    let shapes = net.layer_input_shapes();
    let b = batch.shape()[0];
    let mut d_out = dlogits;
    let mut dw_all = vec![Tensor::zeros(&[0]); net.layers().len()];
    let mut db_all = vec![Tensor::zeros(&[0]); net.layers().len()];

    for (i, kind) in net.layers().iter().enumerate().rev() {
        let cache = &pass.layers[i];
        let is_output = matches!(kind, LayerKind::Output { .. });

        // Undo pool, then ReLU.
        let mut d_act = match (&cache.pool_argmax, kind) {
            (Some(argmax), LayerKind::Conv { .. }) => {
                ops::maxpool2_backward(&d_out, argmax, cache.lin.len(), cache.lin.shape())
            }
            _ => reshape(&d_out, cache.lin.shape()),
        };
        if !is_output {
            for (g, &l) in d_act.data_mut().iter_mut().zip(cache.lin.data()) {
                if l <= 0.0 {
                    *g = 0.0;
                }
            }
        }

        // Linear part.
        let (in_c, in_h, in_w) = shapes[i];
        let (dx_q, mut dw, db) = match *kind {
            LayerKind::Conv { .. } => {
                let x4 = reshape(&cache.x_q, &[b, in_c, in_h, in_w]);
                ops::conv2d_backward(&x4, &cache.w_eff, &d_act)
            }
            _ => {
                let x2 = reshape(&cache.x_q, &[b, in_c * in_h * in_w]);
                ops::dense_backward(&x2, &cache.w_eff, &d_act)
            }
        };

        // Straight-through masks against the master weights and the raw
        // (pre-quantization) input activations.
        if let Some(q) = quant {
            let (qa, qw) = q.layer_formats(i);
            for (g, &w) in dw.data_mut().iter_mut().zip(net.weights()[i].data()) {
                *g *= ste_mask(w, qw);
            }
            let raw_x = if i == 0 { batch } else { &pass.layers[i - 1].out };
            let mut dx = dx_q;
            for (g, &x) in dx.data_mut().iter_mut().zip(raw_x.data()) {
                *g *= ste_mask(x, qa);
            }
            d_out = dx;
        } else {
            d_out = dx_q;
        }
        dw_all[i] = dw;
        db_all[i] = db;
    }

    Gradients {
        weights: dw_all,
        biases: db_all,
    }
}

fn loss_and_grads(
    net: &Network,
    batch: &Tensor,
    labels: &[usize],
    quant: Option<&QuantizationScheme>,
    draw: Option<&NoiseDraw>,
) -> Result<(f64, Gradients)> {
    for &l in labels {
        if l >= net.output_dim() {
            return Err(Error::LabelOutOfRange {
                label: l,
                classes: net.output_dim(),
            });
        }
    }
    let pass = run_forward(net, batch, quant, draw)?;
    let (loss, dlogits) = softmax_cross_entropy(&pass.logits, labels);
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok((loss, run_backward(net, batch, &pass, quant, dlogits)))
}

fn apply_sgd(net: &mut Network, grads: &Gradients, lr: f64) {
    for (w, g) in net.weights_mut().iter_mut().zip(&grads.weights) {
        for (wv, &gv) in w.data_mut().iter_mut().zip(g.data()) {
            *wv -= lr * gv;
        }
        w.debug_check_finite();
    }
    for (b, g) in net.biases.iter_mut().zip(&grads.biases) {
        for (bv, &gv) in b.data_mut().iter_mut().zip(g.data()) {
            *bv -= lr * gv;
        }
    }
}

fn step_with_draw(
    net: &mut Network,
    batch: &Tensor,
    labels: &[usize],
    cfg: &TrainConfig,
    quant: Option<&QuantizationScheme>,
    draw: Option<&NoiseDraw>,
) -> Result<f64> {
    let (loss, grads) = loss_and_grads(net, batch, labels, quant, draw)?;
    apply_sgd(net, &grads, cfg.learning_rate);
    Ok(loss)
}

/// One SGD step through the noisy/quantized forward path; returns the mean
/// batch loss. The stored master weights stay clean and full precision.
pub fn train_step<R: Rng>(
    net: &mut Network,
    batch: &Tensor,
    labels: &[usize],
    cfg: &TrainConfig,
    quant: Option<&QuantizationScheme>,
    noise: Option<&NoiseSpec>,
    rng: &mut R,
) -> Result<f64> {
    let draw = sample_noise(net, noise, rng);
    step_with_draw(net, batch, labels, cfg, quant, draw.as_ref())
}

/// Shuffled mini-batch SGD for `cfg.epochs` epochs; returns the trained
/// network and its noiseless held-out accuracy. `cfg.epochs == 0` is a
/// no-op pass-through.
pub fn train(
    net: Network,
    data: &Dataset,
    cfg: &TrainConfig,
    quant: Option<&QuantizationScheme>,
    noise: Option<&NoiseSpec>,
) -> Result<(Network, f64)> {
    let mut net = net;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    use rand::SeedableRng;

    let frozen = match noise {
        Some(n) if n.enabled && !n.resample_per_batch => sample_noise(&net, noise, &mut rng),
        _ => None,
    };

    let n = data.train.len();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let (batch, labels) = data.train.gather(chunk);
            let draw = match &frozen {
                Some(d) => Some(d.clone()),
                None => sample_noise(&net, noise, &mut rng),
            };
            step_with_draw(&mut net, &batch, &labels, cfg, quant, draw.as_ref())?;
        }
    }
    let acc = evaluate_accuracy(&net, &data.held_out, quant, None, 1, &mut rng);
    Ok((net, acc))
}

/// Mean accuracy over `n_trials` independent noise draws (each trial
/// resamples every weight perturbation). With noise disabled the trial
/// count collapses to 1.
pub fn evaluate_accuracy<R: Rng>(
    net: &Network,
    set: &LabeledSet,
    quant: Option<&QuantizationScheme>,
    noise: Option<&NoiseSpec>,
    n_trials: usize,
    rng: &mut R,
) -> f64 {
    assert!(n_trials >= 1, "n_trials must be >= 1");
    assert!(!set.is_empty(), "evaluation set is empty");
    let trials = match noise {
        Some(n) if n.enabled => n_trials,
        _ => 1,
    };
    let mut total = 0.0;
    for _ in 0..trials {
        let draw = sample_noise(net, noise, rng);
        let mut correct = 0usize;
        let idxs: Vec<usize> = (0..set.len()).collect();
        for chunk in idxs.chunks(128) {
            let (batch, labels) = set.gather(chunk);
            let logits = forward_with_draw(net, &batch, quant, draw.as_ref()).expect("shapes validated");
            let k = net.output_dim();
            for (bi, &y) in labels.iter().enumerate() {
                let row = &logits.data()[bi * k..(bi + 1) * k];
                let pred = row
                    .iter()
                    .enumerate()
                    .fold((0usize, f64::NEG_INFINITY), |(bi_, bv), (i, &v)| {
                        if v > bv {
                            (i, v)
                        } else {
                            (bi_, bv)
                        }
                    })
                    .0;
                correct += usize::from(pred == y);
            }
        }
        total += correct as f64 / set.len() as f64;
    }
    total / trials as f64
}

//! Minimal dense-tensor neural-network engine.
//!
//! Child networks are linear chains of convolution and fully-connected
//! layers built from an [`ArchitectureSpec`](crate::space::ArchitectureSpec),
//! trained with plain SGD, and evaluated with per-layer fixed-point
//! quantization and device-variation noise injected in the forward path.
//!
//! Noise handling: one Gaussian sample per weight element per forward call,
//! added to the quantized weights before the multiply. Gradients flow
//! through the noisy weights (straight-through on the quantizer), updates
//! apply to the clean full-precision master weights.

mod ops;
mod train;

pub use train::{evaluate_accuracy, forward, forward_with_draw, sample_noise, train, train_step, NoiseDraw};

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{ArchitectureSpec, LayerSpec};
use crate::tensor::Tensor;

/// (channels, height, width)
pub type Shape = (usize, usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv {
        filter_h: usize,
        filter_w: usize,
        num_filters: usize,
        pool_after: bool,
    },
    FullyConnected {
        neurons: usize,
    },
    Output {
        classes: usize,
    },
}

impl LayerKind {
    fn validate(&self, index: usize) -> Result<()> {
        let bad = |reason: String| Error::ShapeIncompatible { layer: index, reason };
        match *self {
            LayerKind::Conv {
                filter_h,
                filter_w,
                num_filters,
                ..
            } => {
                if filter_h % 2 == 0 || filter_w % 2 == 0 || filter_h == 0 || filter_w == 0 {
                    return Err(bad(format!("filter {filter_h}x{filter_w} must be odd and >= 1")));
                }
                if num_filters == 0 {
                    return Err(bad("num_filters must be >= 1".into()));
                }
            }
            LayerKind::FullyConnected { neurons } => {
                if neurons == 0 {
                    return Err(bad("neurons must be >= 1".into()));
                }
            }
            LayerKind::Output { classes } => {
                if classes == 0 {
                    return Err(bad("classes must be >= 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Output shape of a layer, validating feasibility. Convolutions use 'same'
/// zero padding and stride 1; the pool flag applies a 2x2/stride-2 max pool.
pub fn shape_after(kind: &LayerKind, index: usize, input: Shape) -> Result<Shape> {
    kind.validate(index)?;
    let (c, h, w) = input;
    let bad = |reason: String| Error::ShapeIncompatible { layer: index, reason };
    match *kind {
        LayerKind::Conv {
            filter_h,
            filter_w,
            num_filters,
            pool_after,
        } => {
            if filter_h > h || filter_w > w {
                return Err(bad(format!(
                    "filter {filter_h}x{filter_w} larger than spatial input {h}x{w}"
                )));
            }
            let (mut oh, mut ow) = (h, w);
            if pool_after {
                if oh < 2 || ow < 2 {
                    return Err(bad(format!("2x2 pool collapses {oh}x{ow} input")));
                }
                oh /= 2;
                ow /= 2;
            }
            let _ = c;
            Ok((num_filters, oh, ow))
        }
        LayerKind::FullyConnected { neurons } => Ok((neurons, 1, 1)),
        LayerKind::Output { classes } => Ok((classes, 1, 1)),
    }
}

/// A concrete network: layer kinds plus one weight/bias tensor pair per
/// layer. Conv weights are (filters, in_channels, fh, fw); fully-connected
/// and output weights are (fan_in, fan_out). Biases stay full precision
/// (accumulated digitally at the array periphery).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<LayerKind>,
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
    input_shape: Shape,
}

impl Network {
    pub fn layers(&self) -> &[LayerKind] {
        &self.layers
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Tensor] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[Tensor] {
        &self.biases
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    /// Number of parametric layers (all layer kinds carry weights).
    pub fn parametric_layers(&self) -> usize {
        self.layers.len()
    }

    /// Width of the final layer output (the class count for built networks).
    pub fn output_dim(&self) -> usize {
        match *self.layers.last().expect("network has layers") {
            LayerKind::Conv { .. } => {
                let (c, h, w) = self.layer_input_shapes().last().copied().unwrap();
                c * h * w
            }
            LayerKind::FullyConnected { neurons } => neurons,
            LayerKind::Output { classes } => classes,
        }
    }

    /// Input shape of each layer, then the final output shape.
    pub fn layer_input_shapes(&self) -> Vec<Shape> {
        let mut shapes = vec![self.input_shape];
        let mut cur = self.input_shape;
        for (i, kind) in self.layers.iter().enumerate() {
            cur = shape_after(kind, i, cur).expect("validated at construction");
            shapes.push(cur);
        }
        shapes
    }

    /// Total multiply-accumulate count for one inference.
    pub fn mac_count(&self) -> u64 {
        let shapes = self.layer_input_shapes();
        self.layers
            .iter()
            .enumerate()
            .map(|(i, kind)| {
                let (c, h, w) = shapes[i];
                match *kind {
                    LayerKind::Conv {
                        filter_h,
                        filter_w,
                        num_filters,
                        ..
                    } => (h * w * filter_h * filter_w * c * num_filters) as u64,
                    LayerKind::FullyConnected { neurons } => (c * h * w * neurons) as u64,
                    LayerKind::Output { classes } => (c * h * w * classes) as u64,
                }
            })
            .sum()
    }
}

/// Training hyperparameters. Loss is fixed: cross-entropy over softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::InvalidConfig("epochs and batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Weight-domain Gaussian noise specification, one sigma per parametric
/// layer. `resample_per_batch` redraws every forward call; otherwise a
/// single draw is frozen for the whole training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub enabled: bool,
    pub per_layer_sigma: Vec<f64>,
    pub resample_per_batch: bool,
}

impl NoiseSpec {
    pub fn disabled() -> Self {
        NoiseSpec {
            enabled: false,
            per_layer_sigma: Vec::new(),
            resample_per_batch: true,
        }
    }

    pub fn from_sigmas(per_layer_sigma: Vec<f64>) -> Result<Self> {
        if per_layer_sigma.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::InvalidConfig("noise sigmas must be >= 0".into()));
        }
        Ok(NoiseSpec {
            enabled: true,
            per_layer_sigma,
            resample_per_batch: true,
        })
    }
}

/// Builds a child network from an architecture. Weights start from a
/// zero-mean uniform distribution scaled by 1/sqrt(fan_in); deterministic
/// for a fixed seed. The task's classifier layer is appended after the
/// searched layers.
pub fn build_network(arch: &ArchitectureSpec, input_shape: Shape, rng_seed: u64) -> Result<Network> {
    if arch.layers.is_empty() && arch.classes == 0 {
        return Err(Error::EmptyArchitecture);
    }
    let mut layers: Vec<LayerKind> = arch
        .layers
        .iter()
        .map(|l| match *l {
            LayerSpec::Conv {
                filter_h,
                filter_w,
                num_filters,
                pool,
            } => LayerKind::Conv {
                filter_h,
                filter_w,
                num_filters,
                pool_after: pool,
            },
            LayerSpec::Fc { neurons } => LayerKind::FullyConnected { neurons },
        })
        .collect();
    layers.push(LayerKind::Output {
        classes: arch.classes,
    });

    let (c0, h0, w0) = input_shape;
    if c0 == 0 || h0 == 0 || w0 == 0 {
        return Err(Error::ShapeMismatch {
            expected: "positive input shape".into(),
            got: format!("{input_shape:?}"),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut weights = Vec::with_capacity(layers.len());
    let mut biases = Vec::with_capacity(layers.len());
    let mut cur = input_shape;
    for (i, kind) in layers.iter().enumerate() {
        let next = shape_after(kind, i, cur)?;
        let (w_shape, b_len, fan_in) = match *kind {
            LayerKind::Conv {
                filter_h,
                filter_w,
                num_filters,
                ..
            } => (
                vec![num_filters, cur.0, filter_h, filter_w],
                num_filters,
                cur.0 * filter_h * filter_w,
            ),
            LayerKind::FullyConnected { neurons } => {
                let fan_in = cur.0 * cur.1 * cur.2;
                (vec![fan_in, neurons], neurons, fan_in)
            }
            LayerKind::Output { classes } => {
                let fan_in = cur.0 * cur.1 * cur.2;
                (vec![fan_in, classes], classes, fan_in)
            }
        };
        let bound = 1.0 / (fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound)
            .map_err(|e| Error::InvalidConfig(format!("init distribution: {e}")))?;
        let n: usize = w_shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        weights.push(Tensor::from_vec(&w_shape, data)?);
        biases.push(Tensor::zeros(&[b_len]));
        cur = next;
    }

    Ok(Network {
        layers,
        weights,
        biases,
        input_shape,
    })
}

/// Builds a network directly from layer kinds (used by tests and tools that
/// bypass the search encoding).
pub fn build_from_layers(layers: Vec<LayerKind>, input_shape: Shape, rng_seed: u64) -> Result<Network> {
    let mut spec_layers = Vec::new();
    let mut classes = None;
    for (i, kind) in layers.iter().enumerate() {
        match *kind {
            LayerKind::Conv {
                filter_h,
                filter_w,
                num_filters,
                pool_after,
            } => spec_layers.push(LayerSpec::Conv {
                filter_h,
                filter_w,
                num_filters,
                pool: pool_after,
            }),
            LayerKind::FullyConnected { neurons } => spec_layers.push(LayerSpec::Fc { neurons }),
            LayerKind::Output { classes: k } => {
                if i + 1 != layers.len() {
                    return Err(Error::ShapeIncompatible {
                        layer: i,
                        reason: "output layer must be last".into(),
                    });
                }
                classes = Some(k);
            }
        }
    }
    let classes = classes.ok_or_else(|| Error::InvalidConfig("missing output layer".into()))?;
    build_network(
        &ArchitectureSpec {
            layers: spec_layers,
            classes,
        },
        input_shape,
        rng_seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{ArchitectureSpec, LayerSpec};

    fn rls_like_arch() -> ArchitectureSpec {
        let rows: [(usize, usize, usize, bool); 6] = [
            (5, 5, 64, false),
            (3, 1, 48, false),
            (1, 3, 48, true),
            (5, 5, 64, true),
            (1, 1, 64, true),
            (3, 3, 24, false),
        ];
        let mut layers: Vec<LayerSpec> = rows
            .iter()
            .map(|&(filter_h, filter_w, num_filters, pool)| LayerSpec::Conv {
                filter_h,
                filter_w,
                num_filters,
                pool,
            })
            .collect();
        layers.push(LayerSpec::Fc { neurons: 256 });
        layers.push(LayerSpec::Fc { neurons: 64 });
        ArchitectureSpec { layers, classes: 10 }
    }

    #[test]
    fn builds_eight_layer_spec_plus_classifier() {
        let net = build_network(&rls_like_arch(), (3, 32, 32), 1).unwrap();
        let conv = net
            .layers()
            .iter()
            .filter(|l| matches!(l, LayerKind::Conv { .. }))
            .count();
        let fc = net
            .layers()
            .iter()
            .filter(|l| matches!(l, LayerKind::FullyConnected { .. }))
            .count();
        assert_eq!((conv, fc), (6, 2));
        assert_eq!(net.layers().len(), 9); // + output layer
        assert_eq!(net.output_dim(), 10);
        // 3 pools: 32 -> 16 -> 8 -> 4.
        assert_eq!(net.layer_input_shapes()[6], (24, 4, 4));
    }

    #[test]
    fn single_fc_weight_shapes() {
        let arch = ArchitectureSpec {
            layers: vec![],
            classes: 10,
        };
        let net = build_network(&arch, (1, 1, 16), 3).unwrap();
        assert_eq!(net.weights()[0].shape(), &[16, 10]);
        assert_eq!(net.biases()[0].shape(), &[10]);
    }

    #[test]
    fn same_seed_same_weights() {
        let a = build_network(&rls_like_arch(), (3, 32, 32), 42).unwrap();
        let b = build_network(&rls_like_arch(), (3, 32, 32), 42).unwrap();
        assert_eq!(a, b);
        let c = build_network(&rls_like_arch(), (3, 32, 32), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn oversized_filter_rejected_with_layer_index() {
        let arch = ArchitectureSpec {
            layers: vec![
                LayerSpec::Conv {
                    filter_h: 3,
                    filter_w: 3,
                    num_filters: 4,
                    pool: true,
                },
                LayerSpec::Conv {
                    filter_h: 7,
                    filter_w: 7,
                    num_filters: 4,
                    pool: false,
                },
            ],
            classes: 2,
        };
        match build_network(&arch, (1, 8, 8), 0) {
            Err(Error::ShapeIncompatible { layer, .. }) => assert_eq!(layer, 1),
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn pool_collapse_rejected() {
        let arch = ArchitectureSpec {
            layers: vec![LayerSpec::Conv {
                filter_h: 1,
                filter_w: 1,
                num_filters: 2,
                pool: true,
            }],
            classes: 2,
        };
        assert!(build_network(&arch, (1, 1, 4), 0).is_err());
    }

    #[test]
    fn mac_count_hand_checked() {
        // conv 3x3x1 -> 2 filters on 4x4 (same pad): 4*4*3*3*1*2 = 288.
        // output: 2*4*4 -> 3: 96. Total 384.
        let net = build_from_layers(
            vec![
                LayerKind::Conv {
                    filter_h: 3,
                    filter_w: 3,
                    num_filters: 2,
                    pool_after: false,
                },
                LayerKind::Output { classes: 3 },
            ],
            (1, 4, 4),
            0,
        )
        .unwrap();
        assert_eq!(net.mac_count(), 288 + 96);
    }
}

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::layer::{LayerKind, LayerSpec, ModelSpec};
use super::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LayerParams {
    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Weights and biases for every parameterized layer, keyed by global layer
/// index. Layers without parameters hold `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    layers: Vec<Option<LayerParams>>,
}

/// `(fan_in, fan_out)` of a parameterized layer.
fn fans(kind: &LayerKind) -> (usize, usize) {
    match *kind {
        LayerKind::Dense { input, output } => (input, output),
        LayerKind::Conv2d {
            in_channels,
            out_channels,
            kernel,
            ..
        } => (in_channels * kernel * kernel, out_channels * kernel * kernel),
        _ => (0, 0),
    }
}

impl ParamStore {
    /// Seeded initialization: He-uniform for layers whose next layer is a
    /// ReLU, Glorot-uniform otherwise. Biases start at zero.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(spec.layer_count());
        let segments = spec
            .branches
            .iter()
            .map(|b| b.layers.as_slice())
            .chain(std::iter::once(spec.head.as_slice()));
        for segment in segments {
            for (i, layer) in segment.iter().enumerate() {
                let Some((wshape, bshape)) = layer.param_shapes() else {
                    layers.push(None);
                    continue;
                };
                let feeds_relu = matches!(segment.get(i + 1).map(|l| l.kind), Some(LayerKind::Relu));
                let (fan_in, fan_out) = fans(&layer.kind);
                let limit = if feeds_relu {
                    (6.0 / fan_in as f64).sqrt()
                } else {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                };
                let n: usize = wshape.iter().product();
                let data = (0..n).map(|_| rng.gen_range(-limit..limit)).collect();
                layers.push(Some(LayerParams {
                    weight: Tensor::new(wshape, data)?,
                    bias: Tensor::zeros(bshape),
                }));
            }
        }
        Ok(ParamStore { layers })
    }

    /// All-zero parameters with the shapes implied by `spec`.
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layers()
            .map(|l| {
                l.param_shapes().map(|(w, b)| LayerParams {
                    weight: Tensor::zeros(w),
                    bias: Tensor::zeros(b),
                })
            })
            .collect();
        Ok(ParamStore { layers })
    }

    pub(crate) fn from_layers(layers: Vec<Option<LayerParams>>) -> Self {
        ParamStore { layers }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn get(&self, index: usize) -> Option<&LayerParams> {
        self.layers.get(index).and_then(Option::as_ref)
    }

    pub fn get_mut(&mut self, index: usize) -> Option<&mut LayerParams> {
        self.layers.get_mut(index).and_then(Option::as_mut)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &LayerParams)> {
        self.layers
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.as_ref().map(|p| (i, p)))
    }

    pub(crate) fn slots(&self) -> &[Option<LayerParams>] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.iter().map(|(_, p)| p.len()).sum()
    }

    /// Checks that every layer holds parameters of exactly the shapes the
    /// spec implies.
    pub fn check_against(&self, spec: &ModelSpec) -> Result<()> {
        if self.layers.len() != spec.layer_count() {
            return Err(Error::State(format!(
                "parameter store has {} layers, model has {}",
                self.layers.len(),
                spec.layer_count()
            )));
        }
        for (i, (slot, layer)) in self.layers.iter().zip(spec.layers()).enumerate() {
            let ok = match (slot, layer.param_shapes()) {
                (None, None) => true,
                (Some(p), Some((w, b))) => p.weight.shape() == w && p.bias.shape() == b,
                _ => false,
            };
            if !ok {
                return Err(Error::State(format!("parameters of layer {i} do not match its spec")));
            }
        }
        Ok(())
    }
}

/// Parameter gradients of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients keyed by global layer index. Frozen layers never
/// appear.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    pub layers: BTreeMap<usize, LayerGrads>,
}

impl Gradients {
    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&LayerGrads> {
        self.layers.get(&index)
    }
}

pub(crate) fn frozen_flags(spec: &ModelSpec) -> Vec<bool> {
    spec.layers().map(|l: &LayerSpec| l.frozen).collect()
}

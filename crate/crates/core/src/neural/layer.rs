//! Declarative layer and model descriptions.
//!
//! A [`ModelSpec`] is one or more input branches whose flattened outputs are
//! concatenated (in branch order) and fed through a shared head. A plain
//! sequential network is a single branch with an empty head.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ops::window_output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerKind {
    Dense {
        input: usize,
        output: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Maxpool2d {
        window: usize,
        stride: usize,
    },
    GlobalAvgPool,
    Flatten,
    Relu,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    #[serde(flatten)]
    pub kind: LayerKind,
    #[serde(default)]
    pub frozen: bool,
}

impl LayerSpec {
    pub fn dense(input: usize, output: usize) -> Self {
        LayerKind::Dense { input, output }.into()
    }

    pub fn conv2d(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        LayerKind::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        }
        .into()
    }

    pub fn maxpool2d(window: usize, stride: usize) -> Self {
        LayerKind::Maxpool2d { window, stride }.into()
    }

    pub fn global_avg_pool() -> Self {
        LayerKind::GlobalAvgPool.into()
    }

    pub fn flatten() -> Self {
        LayerKind::Flatten.into()
    }

    pub fn relu() -> Self {
        LayerKind::Relu.into()
    }

    pub fn softmax() -> Self {
        LayerKind::Softmax.into()
    }

    pub fn frozen(mut self, frozen: bool) -> Self {
        self.frozen = frozen;
        self
    }

    pub fn has_params(&self) -> bool {
        matches!(self.kind, LayerKind::Dense { .. } | LayerKind::Conv2d { .. })
    }

    /// Shapes of this layer's `(weight, bias)` tensors, if it has any.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match self.kind {
            LayerKind::Dense { input, output } => Some((vec![input, output], vec![output])),
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some((vec![out_channels, in_channels, kernel, kernel], vec![out_channels])),
            _ => None,
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .map_or(0, |(w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = || {
            Error::Config(format!(
                "layer {:?} cannot accept per-sample shape {:?}",
                self.kind, input
            ))
        };
        match self.kind {
            LayerKind::Dense { input: i, output } => {
                if i == 0 || output == 0 {
                    return Err(Error::Config("dense layer with zero width".into()));
                }
                if input != [i] {
                    return Err(mismatch());
                }
                Ok(vec![output])
            }
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                if input.len() != 3 || input[0] != in_channels || out_channels == 0 {
                    return Err(mismatch());
                }
                let h = window_output(input[1], kernel, stride, padding)?;
                let w = window_output(input[2], kernel, stride, padding)?;
                Ok(vec![out_channels, h, w])
            }
            LayerKind::Maxpool2d { window, stride } => {
                if input.len() != 3 {
                    return Err(mismatch());
                }
                if window > input[1] || window > input[2] {
                    return Err(Error::Config(format!(
                        "pool window {window} larger than {}x{} feature map",
                        input[1], input[2]
                    )));
                }
                let h = window_output(input[1], window, stride, 0)?;
                let w = window_output(input[2], window, stride, 0)?;
                Ok(vec![input[0], h, w])
            }
            LayerKind::GlobalAvgPool => {
                if input.len() != 3 {
                    return Err(mismatch());
                }
                Ok(vec![input[0]])
            }
            LayerKind::Flatten => Ok(vec![input.iter().product()]),
            LayerKind::Relu => Ok(input.to_vec()),
            LayerKind::Softmax => {
                if input.len() != 1 || input[0] < 2 {
                    return Err(mismatch());
                }
                Ok(input.to_vec())
            }
        }
    }
}

impl From<LayerKind> for LayerSpec {
    fn from(kind: LayerKind) -> Self {
        LayerSpec {
            kind,
            frozen: false,
        }
    }
}

/// One input modality and the layers applied to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub name: String,
    /// Per-sample input shape, e.g. `[6]` or `[3, S, S]`.
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub branches: Vec<Branch>,
    #[serde(default)]
    pub head: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn sequential(name: &str, input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Self {
        ModelSpec {
            branches: vec![Branch {
                name: name.to_string(),
                input_shape,
                layers,
            }],
            head: Vec::new(),
        }
    }

    /// All layers in global index order: branches first, then the head.
    pub fn layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.branches
            .iter()
            .flat_map(|b| b.layers.iter())
            .chain(self.head.iter())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut LayerSpec> {
        self.branches
            .iter_mut()
            .flat_map(|b| b.layers.iter_mut())
            .chain(self.head.iter_mut())
    }

    pub fn layer_count(&self) -> usize {
        self.layers().count()
    }

    /// Global index of the first layer of each branch, and of the head.
    pub fn offsets(&self) -> (Vec<usize>, usize) {
        let mut offsets = Vec::with_capacity(self.branches.len());
        let mut at = 0;
        for b in &self.branches {
            offsets.push(at);
            at += b.layers.len();
        }
        (offsets, at)
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(LayerSpec::param_count).sum()
    }

    /// Walks every branch and the head, checking that adjacent layers agree.
    /// Returns the per-sample output shape of the whole model.
    pub fn validate(&self) -> Result<Vec<usize>> {
        if self.branches.is_empty() {
            return Err(Error::Config("model has no input branch".into()));
        }
        let mut widths = Vec::with_capacity(self.branches.len());
        for branch in &self.branches {
            if branch.input_shape.is_empty() || branch.input_shape.contains(&0) {
                return Err(Error::Config(format!(
                    "branch '{}' has invalid input shape {:?}",
                    branch.name, branch.input_shape
                )));
            }
            let mut shape = branch.input_shape.clone();
            for (i, layer) in branch.layers.iter().enumerate() {
                shape = layer.output_shape(&shape).map_err(|e| {
                    Error::Config(format!("branch '{}' layer {i}: {e}", branch.name))
                })?;
            }
            if shape.contains(&0) {
                return Err(Error::Config(format!(
                    "branch '{}' collapses to shape {:?}",
                    branch.name, shape
                )));
            }
            widths.push(shape);
        }
        if self.head.is_empty() && self.branches.len() == 1 {
            return Ok(widths.pop().expect("one branch"));
        }
        let mut total = 0;
        for (branch, shape) in self.branches.iter().zip(&widths) {
            if shape.len() != 1 {
                return Err(Error::Config(format!(
                    "branch '{}' must end flat before fusion, got {:?}",
                    branch.name, shape
                )));
            }
            total += shape[0];
        }
        let mut shape = vec![total];
        for (i, layer) in self.head.iter().enumerate() {
            shape = layer
                .output_shape(&shape)
                .map_err(|e| Error::Config(format!("head layer {i}: {e}")))?;
        }
        Ok(shape)
    }
}

/// Freezes all parameterized layers except the last `trainable` ones.
pub fn freeze_tail(layers: &mut [LayerSpec], trainable: usize) -> Result<()> {
    if trainable > layers.len() {
        return Err(Error::Config(format!(
            "{trainable} trainable layers requested from {} layers",
            layers.len()
        )));
    }
    let mut remaining = trainable;
    for layer in layers.iter_mut().rev() {
        if !layer.has_params() {
            layer.frozen = false;
            continue;
        }
        if remaining > 0 {
            layer.frozen = false;
            remaining -= 1;
        } else {
            layer.frozen = true;
        }
    }
    Ok(())
}

/// Returns a copy of `model` in which only the last `trainable`
/// parameterized layers (across all branches, then the head) are trainable.
pub fn apply_freeze_mask(model: &ModelSpec, trainable: usize) -> Result<ModelSpec> {
    let mut out = model.clone();
    let mut flat: Vec<LayerSpec> = out.layers().copied().collect();
    freeze_tail(&mut flat, trainable)?;
    for (dst, src) in out.layers_mut().zip(flat) {
        dst.frozen = src.frozen;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_layer() -> ModelSpec {
        ModelSpec::sequential(
            "t",
            vec![4],
            vec![
                LayerSpec::dense(4, 4),
                LayerSpec::relu(),
                LayerSpec::dense(4, 4),
                LayerSpec::relu(),
                LayerSpec::dense(4, 4),
                LayerSpec::relu(),
                LayerSpec::dense(4, 4),
                LayerSpec::relu(),
                LayerSpec::dense(4, 3),
                LayerSpec::softmax(),
            ],
        )
    }

    #[test]
    fn freeze_mask_counts_parameterized_layers() {
        let spec = ten_layer();
        assert_eq!(spec.layer_count(), 10);
        let m = apply_freeze_mask(&spec, 3).unwrap();
        let unfrozen: Vec<usize> = m
            .layers()
            .enumerate()
            .filter(|(_, l)| l.has_params() && !l.frozen)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(unfrozen, vec![4, 6, 8]);
        assert!(m.layers().filter(|l| l.has_params()).filter(|l| l.frozen).count() == 2);
    }

    #[test]
    fn freeze_mask_extremes() {
        let spec = ten_layer();
        let all = apply_freeze_mask(&spec, 10).unwrap();
        assert!(all.layers().all(|l| !l.frozen));
        let none = apply_freeze_mask(&spec, 0).unwrap();
        assert!(none.layers().filter(|l| l.has_params()).all(|l| l.frozen));
        assert!(matches!(apply_freeze_mask(&spec, 11), Err(Error::Config(_))));
    }

    #[test]
    fn validate_reports_output_shape() {
        assert_eq!(ten_layer().validate().unwrap(), vec![3]);
        let bad = ModelSpec::sequential("t", vec![5], vec![LayerSpec::dense(4, 3)]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn layer_spec_json_shape() {
        let l = LayerSpec::dense(6, 64);
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(s, r#"{"kind":"dense","input":6,"output":64,"frozen":false}"#);
        let back: LayerSpec = serde_json::from_str(r#"{"kind":"relu"}"#).unwrap();
        assert_eq!(back, LayerSpec::relu());
    }
}

//! Executes a [`ModelSpec`] against a [`ParamStore`] on a [`Tape`].

use crate::error::{Error, Result};

use super::layer::{LayerKind, LayerSpec, ModelSpec};
use super::ops;
use super::params::{Gradients, LayerGrads, LayerParams, ParamStore};
use super::tape::{NodeId, Tape};
use super::tensor::Tensor;

/// `x·W + b` for a batch of row vectors.
pub fn dense_forward(x: &Tensor, layer: &LayerSpec, params: &LayerParams) -> Result<Tensor> {
    let LayerKind::Dense { input, output } = layer.kind else {
        return Err(Error::Config(format!("{:?} is not a dense layer", layer.kind)));
    };
    if x.rank() != 2 || x.shape()[1] != input {
        return Err(Error::Dimension(format!(
            "dense layer {input}->{output} given input {:?}",
            x.shape()
        )));
    }
    ops::add_bias(&ops::matmul(x, &params.weight)?, &params.bias)
}

pub fn conv2d_forward(x: &Tensor, layer: &LayerSpec, params: &LayerParams) -> Result<Tensor> {
    let LayerKind::Conv2d {
        in_channels,
        stride,
        padding,
        ..
    } = layer.kind
    else {
        return Err(Error::Config(format!("{:?} is not a conv2d layer", layer.kind)));
    };
    if x.rank() != 4 || x.shape()[1] != in_channels {
        return Err(Error::Dimension(format!(
            "conv2d with {in_channels} input channels given {:?}",
            x.shape()
        )));
    }
    ops::conv2d(x, &params.weight, &params.bias, stride, padding)
}

/// Node handles produced by one recorded forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub inputs: Vec<NodeId>,
    pub output: NodeId,
    params: Vec<Option<(NodeId, NodeId)>>,
}

impl Forward {
    /// Runs backward from `loss` and collects gradients of every trainable
    /// parameter.
    pub fn backward(&self, tape: &mut Tape, loss: NodeId) -> Result<Gradients> {
        tape.backward(loss)?;
        let mut grads = Gradients::default();
        for (i, slot) in self.params.iter().enumerate() {
            let Some((w, b)) = slot else { continue };
            if !tape.requires_grad(*w) {
                continue;
            }
            let weight = tape
                .grad(*w)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; tape.value(*w).len()]);
            let bias = tape
                .grad(*b)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; tape.value(*b).len()]);
            grads.layers.insert(i, LayerGrads { weight, bias });
        }
        Ok(grads)
    }
}

/// A model description together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: ModelSpec,
    params: ParamStore,
}

impl Network {
    pub fn new(spec: ModelSpec, params: ParamStore) -> Result<Self> {
        spec.validate()?;
        params.check_against(&spec)?;
        Ok(Network { spec, params })
    }

    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        let params = ParamStore::init(&spec, seed)?;
        Ok(Network { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Replaces the spec, e.g. after changing the freeze mask. Parameter
    /// shapes must still line up.
    pub fn set_spec(&mut self, spec: ModelSpec) -> Result<()> {
        spec.validate()?;
        self.params.check_against(&spec)?;
        self.spec = spec;
        Ok(())
    }

    fn check_inputs(&self, inputs: &[Tensor]) -> Result<usize> {
        if inputs.len() != self.spec.branches.len() {
            return Err(Error::Dimension(format!(
                "model has {} input branches, got {} inputs",
                self.spec.branches.len(),
                inputs.len()
            )));
        }
        let batch = inputs[0].rows();
        for (branch, x) in self.spec.branches.iter().zip(inputs) {
            if x.rank() == 0 || x.shape()[1..] != branch.input_shape[..] || x.rows() != batch {
                return Err(Error::Dimension(format!(
                    "branch '{}' expects [batch, {:?}], got {:?}",
                    branch.name,
                    branch.input_shape,
                    x.shape()
                )));
            }
        }
        Ok(batch)
    }

    /// Records a forward pass. Inputs become leaves that require a gradient
    /// when `input_grads` is set.
    pub fn forward(&self, tape: &mut Tape, inputs: &[Tensor], input_grads: bool) -> Result<Forward> {
        self.check_inputs(inputs)?;
        let mut params = vec![None; self.spec.layer_count()];
        let mut input_ids = Vec::with_capacity(inputs.len());
        let mut branch_out = Vec::with_capacity(inputs.len());
        let mut index = 0;
        for (branch, x) in self.spec.branches.iter().zip(inputs) {
            let mut node = tape.leaf(x.clone(), input_grads)?;
            input_ids.push(node);
            for layer in &branch.layers {
                node = self.apply(tape, node, layer, index, &mut params)?;
                index += 1;
            }
            branch_out.push(node);
        }
        let mut node = branch_out[0];
        for &other in &branch_out[1..] {
            node = tape.concat(node, other)?;
        }
        for layer in &self.spec.head {
            node = self.apply(tape, node, layer, index, &mut params)?;
            index += 1;
        }
        Ok(Forward {
            inputs: input_ids,
            output: node,
            params,
        })
    }

    fn apply(
        &self,
        tape: &mut Tape,
        x: NodeId,
        layer: &LayerSpec,
        index: usize,
        slots: &mut [Option<(NodeId, NodeId)>],
    ) -> Result<NodeId> {
        let mut param_nodes = |tape: &mut Tape| -> Result<(NodeId, NodeId)> {
            let p = self
                .params
                .get(index)
                .ok_or_else(|| Error::State(format!("layer {index} has no parameters")))?;
            let w = tape.leaf(p.weight.clone(), !layer.frozen)?;
            let b = tape.leaf(p.bias.clone(), !layer.frozen)?;
            slots[index] = Some((w, b));
            Ok((w, b))
        };
        match layer.kind {
            LayerKind::Dense { .. } => {
                let (w, b) = param_nodes(tape)?;
                let xw = tape.matmul(x, w)?;
                tape.add_bias(xw, b)
            }
            LayerKind::Conv2d { stride, padding, .. } => {
                let (w, b) = param_nodes(tape)?;
                tape.conv2d(x, w, b, stride, padding)
            }
            LayerKind::Maxpool2d { window, stride } => tape.maxpool2d(x, window, stride),
            LayerKind::GlobalAvgPool => tape.global_avg_pool(x),
            LayerKind::Flatten => tape.flatten(x),
            LayerKind::Relu => tape.relu(x),
            LayerKind::Softmax => tape.softmax(x),
        }
    }

    /// Output of the final layer for a batch (class probabilities for a
    /// classifier spec).
    pub fn predict(&self, inputs: &[Tensor]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let fwd = self.forward(&mut tape, inputs, false)?;
        Ok(tape.value(fwd.output).clone())
    }

    /// Weighted cross-entropy of the model output and its parameter
    /// gradients.
    pub fn loss_and_gradients(
        &self,
        inputs: &[Tensor],
        targets: &[usize],
        class_weights: &[f64],
    ) -> Result<(f64, Tensor, Gradients)> {
        let mut tape = Tape::new();
        let fwd = self.forward(&mut tape, inputs, false)?;
        let loss = tape.weighted_cross_entropy(fwd.output, targets, class_weights)?;
        let value = tape.value(loss).data()[0];
        let probs = tape.value(fwd.output).clone();
        let grads = fwd.backward(&mut tape, loss)?;
        Ok((value, probs, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_identity_and_bias() {
        let layer = LayerSpec::dense(2, 2);
        let p = LayerParams {
            weight: Tensor::identity(2),
            bias: Tensor::zeros(vec![2]),
        };
        let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![-3.0, 4.0]]).unwrap();
        assert_eq!(dense_forward(&x, &layer, &p).unwrap(), x);

        let p = LayerParams {
            weight: Tensor::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 1.0, -1.0]]).unwrap(),
            bias: Tensor::new(vec![3], vec![0.5, 0.5, 0.5]).unwrap(),
        };
        let layer = LayerSpec::dense(2, 3);
        let y = dense_forward(&Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap(), &layer, &p).unwrap();
        // matmul oracle: [1*1+2*0, 1*0+2*1, 1*2+2*-1] + 0.5
        assert_eq!(y.data(), &[1.5, 2.5, 0.5]);
    }

    #[test]
    fn dense_empty_batch() {
        let layer = LayerSpec::dense(2, 3);
        let p = LayerParams {
            weight: Tensor::zeros(vec![2, 3]),
            bias: Tensor::zeros(vec![3]),
        };
        let y = dense_forward(&Tensor::new(vec![0, 2], vec![]).unwrap(), &layer, &p).unwrap();
        assert_eq!(y.shape(), &[0, 3]);
    }

    #[test]
    fn dense_width_mismatch() {
        let layer = LayerSpec::dense(2, 3);
        let p = LayerParams {
            weight: Tensor::zeros(vec![2, 3]),
            bias: Tensor::zeros(vec![3]),
        };
        let err = dense_forward(&Tensor::zeros(vec![1, 4]), &layer, &p).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn all_frozen_gives_no_param_grads_but_input_grads() {
        let spec = super::super::layer::apply_freeze_mask(
            &ModelSpec::sequential(
                "m",
                vec![3],
                vec![
                    LayerSpec::dense(3, 4),
                    LayerSpec::relu(),
                    LayerSpec::dense(4, 3),
                    LayerSpec::softmax(),
                ],
            ),
            0,
        )
        .unwrap();
        let net = Network::init(spec, 3).unwrap();
        let x = Tensor::from_rows(&[vec![0.3, -0.2, 0.9], vec![1.0, 0.4, -0.5]]).unwrap();
        let mut tape = Tape::new();
        let fwd = net.forward(&mut tape, &[x], true).unwrap();
        let loss = tape.weighted_cross_entropy(fwd.output, &[0, 2], &[1.0; 3]).unwrap();
        let grads = fwd.backward(&mut tape, loss).unwrap();
        assert!(grads.is_empty());
        let gx = tape.grad(fwd.inputs[0]).unwrap();
        assert!(gx.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn input_batch_mismatch_is_dimension_error() {
        let spec = ModelSpec {
            branches: vec![
                super::super::layer::Branch {
                    name: "a".into(),
                    input_shape: vec![2],
                    layers: vec![LayerSpec::dense(2, 2)],
                },
                super::super::layer::Branch {
                    name: "b".into(),
                    input_shape: vec![1],
                    layers: vec![],
                },
            ],
            head: vec![LayerSpec::dense(3, 2), LayerSpec::softmax()],
        };
        let net = Network::init(spec, 0).unwrap();
        let err = net
            .predict(&[Tensor::zeros(vec![2, 2]), Tensor::zeros(vec![3, 1])])
            .unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
        let ok = net
            .predict(&[Tensor::zeros(vec![2, 2]), Tensor::zeros(vec![2, 1])])
            .unwrap();
        assert_eq!(ok.shape(), &[2, 2]);
    }
}

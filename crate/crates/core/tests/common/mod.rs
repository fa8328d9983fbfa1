//! Shared oracles and synthetic data for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use skyfusion::fusion::{build_ann, build_cnn, build_fusion, AnnConfig, CnnPlan, ConvStage, FusionSpec};
use skyfusion::neural::{ModelSpec, Network, NodeId, Tape, Tensor};
use skyfusion::train::Dataset;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, scale: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::new(shape, data).unwrap()
}

/// Scalar loss `Σ (flatten(out) · R)` for a fixed random `R`, so every
/// output element contributes with a distinct weight.
fn projected(tape: &mut Tape, out: NodeId, projection: &Tensor) -> NodeId {
    if tape.value(out).rank() == 0 || tape.value(out).len() == 1 && tape.value(out).rank() <= 1 {
        return out;
    }
    let flat = tape.flatten(out).unwrap();
    let r = tape.leaf(projection.clone(), false).unwrap();
    let y = tape.matmul(flat, r).unwrap();
    tape.sum(y).unwrap()
}

/// Largest relative error between the tape's gradients for every leaf and
/// central differences of the same scalar function.
pub fn check_op<F>(leaves: &[Tensor], seed: u64, build: F) -> f64
where
    F: Fn(&mut Tape, &[NodeId]) -> NodeId,
{
    let run = |values: &[Tensor], projection: Option<&Tensor>| -> (Tape, NodeId, Vec<NodeId>, Tensor) {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = values.iter().map(|v| tape.leaf(v.clone(), true).unwrap()).collect();
        let out = build(&mut tape, &ids);
        let proj = match projection {
            Some(p) => p.clone(),
            None => {
                let v = tape.value(out);
                let width = if v.rank() >= 2 { v.len() / v.shape()[0] } else { v.len() };
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
                random_tensor(&mut rng, vec![width.max(1), 1], 1.0)
            }
        };
        let loss = projected(&mut tape, out, &proj);
        (tape, loss, ids, proj)
    };
    let (mut tape, loss, ids, proj) = run(leaves, None);
    tape.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (li, &id) in ids.iter().enumerate() {
        let analytic = tape.grad(id).expect("leaf gradient").to_vec();
        for (j, &a) in analytic.iter().enumerate() {
            let eval = |delta: f64| {
                let mut vals = leaves.to_vec();
                vals[li].data_mut()[j] += delta;
                let (t, l, _, _) = run(&vals, Some(&proj));
                t.value(l).data()[0]
            };
            let numeric = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(a, numeric));
        }
    }
    worst
}

/// Largest relative error over every trainable parameter of `net` for the
/// weighted cross-entropy on one batch.
pub fn check_network(net: &Network, inputs: &[Tensor], targets: &[usize], weights: &[f64]) -> (f64, usize) {
    let (_, _, grads) = net.loss_and_gradients(inputs, targets, weights).unwrap();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (&layer, g) in &grads.layers {
        for (which, analytic) in [(0, &g.weight), (1, &g.bias)] {
            for (j, &a) in analytic.iter().enumerate() {
                let mut eval = |delta: f64| {
                    {
                        let p = probe.params_mut().get_mut(layer).unwrap();
                        let t = if which == 0 { &mut p.weight } else { &mut p.bias };
                        t.data_mut()[j] += delta;
                    }
                    let probs = probe.predict(inputs).unwrap();
                    let l = skyfusion::neural::weighted_cross_entropy(&probs, targets, weights).unwrap();
                    let p = probe.params_mut().get_mut(layer).unwrap();
                    let t = if which == 0 { &mut p.weight } else { &mut p.bias };
                    t.data_mut()[j] -= delta;
                    l
                };
                let numeric = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
                worst = worst.max(rel_err(a, numeric));
                checked += 1;
            }
        }
    }
    (worst, checked)
}

/// A fusion model small enough for exhaustive finite differences.
pub fn tiny_fusion(side: usize) -> ModelSpec {
    let plan = CnnPlan {
        stages: vec![
            ConvStage { channels: 2, pool: true },
            ConvStage { channels: 3, pool: true },
            ConvStage { channels: 4, pool: false },
        ],
        kernel: 3,
        padding: 1,
    };
    let ann = AnnConfig {
        input_width: 6,
        hidden: vec![8, 6],
        feature_width: 4,
    };
    build_fusion(&FusionSpec {
        cnn: build_cnn(side, &plan).unwrap(),
        ann: build_ann(&ann).unwrap(),
        head: vec![6],
        cnn_trainable: None,
    })
    .unwrap()
}

fn normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).unwrap().sample(rng)
}

/// Two hidden bits per sample: `a` is drawn only into the image (a bright
/// blob or not), `b` only into tabular feature 1 (±1 plus noise). The class
/// is `a + b`, so one modality alone cannot beat about 50% accuracy.
pub struct TwoBitData {
    pub images: Tensor,
    pub features: Tensor,
    pub labels: Vec<usize>,
}

pub fn two_bit_data(n: usize, side: usize, seed: u64) -> TwoBitData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(n * 3 * side * side);
    let mut features = Vec::with_capacity(n * 6);
    let mut labels = Vec::with_capacity(n);
    let s = side as f64;
    for _ in 0..n {
        let a = rng.gen_bool(0.5) as usize;
        let b = rng.gen_bool(0.5) as usize;
        let cx = rng.gen_range(s * 0.3..s * 0.7);
        let cy = rng.gen_range(s * 0.3..s * 0.7);
        for _c in 0..3 {
            for y in 0..side {
                for x in 0..side {
                    let d2 = (x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2);
                    let blob = if a == 1 { 0.8 * (-d2 / (2.0 * 2.0 * 2.0)).exp() } else { 0.0 };
                    images.push(normal(&mut rng, 0.1, 0.05) + blob);
                }
            }
        }
        features.push(if b == 1 { 1.0 } else { -1.0 } + normal(&mut rng, 0.0, 0.3));
        for _ in 1..6 {
            features.push(normal(&mut rng, 0.0, 1.0));
        }
        labels.push(a + b);
    }
    TwoBitData {
        images: Tensor::new(vec![n, 3, side, side], images).unwrap(),
        features: Tensor::new(vec![n, 6], features).unwrap(),
        labels,
    }
}

impl TwoBitData {
    pub fn fusion(&self) -> Dataset {
        Dataset::new(vec![self.images.clone(), self.features.clone()], self.labels.clone()).unwrap()
    }
    pub fn image_only(&self) -> Dataset {
        Dataset::new(vec![self.images.clone()], self.labels.clone()).unwrap()
    }
    pub fn tabular_only(&self) -> Dataset {
        Dataset::new(vec![self.features.clone()], self.labels.clone()).unwrap()
    }
}

/// Six-feature Gaussian classes; class 1 is the minority with overlapping
/// support.
pub fn imbalanced_data(n: usize, minority_fraction: f64, separation: f64, seed: u64) -> (Vec<[f64; 6]>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_min = (n as f64 * minority_fraction).round() as usize;
    let n_rest = n - n_min;
    let mut labels: Vec<usize> = (0..n_rest).map(|i| if i % 2 == 0 { 0 } else { 2 }).collect();
    labels.extend(std::iter::repeat(1).take(n_min));
    let centres = [
        [-separation, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [separation, 0.0, 0.0, 0.0, 0.0, 0.0],
    ];
    let rows = labels
        .iter()
        .map(|&c| {
            let mut r = [0.0; 6];
            for (k, v) in r.iter_mut().enumerate() {
                *v = centres[c][k] + normal(&mut rng, 0.0, 1.0);
            }
            r
        })
        .collect();
    (rows, labels)
}

pub fn rows_tensor(rows: &[[f64; 6]]) -> Tensor {
    Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

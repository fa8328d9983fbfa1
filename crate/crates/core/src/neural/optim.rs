use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::layer::ModelSpec;
use super::params::{frozen_flags, Gradients, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Sgd {
        lr: f64,
        #[serde(default)]
        momentum: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::adam(1e-3)
    }
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    pub fn sgd(lr: f64, momentum: f64) -> Self {
        OptimizerConfig::Sgd { lr, momentum }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = match *self {
            OptimizerConfig::Sgd { lr, momentum } => {
                if !(0.0..1.0).contains(&momentum) {
                    return Err(Error::Config(format!("momentum {momentum} outside [0, 1)")));
                }
                lr
            }
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                    return Err(Error::Config("adam betas must lie in [0, 1) and eps be positive".into()));
                }
                lr
            }
        };
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {lr} must be positive")));
        }
        Ok(())
    }
}

/// `v ← μ·v + g; w ← w − lr·v`
pub fn sgd_step(params: &mut [f64], grads: &[f64], velocity: &mut [f64], lr: f64, momentum: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(Error::State(format!(
            "sgd step over {} params, {} grads, {} velocities",
            params.len(),
            grads.len(),
            velocity.len()
        )));
    }
    for ((w, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *w -= lr * *v;
    }
    Ok(())
}

/// One bias-corrected Adam update; `t` is the 1-based step number.
#[allow(clippy::too_many_arguments)]
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != m.len() || params.len() != v.len() {
        return Err(Error::State("adam step over mismatched buffers".into()));
    }
    if t == 0 {
        return Err(Error::State("adam step counter starts at 1".into()));
    }
    let c1 = 1.0 - beta1.powi(t as i32);
    let c2 = 1.0 - beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let mhat = m[i] / c1;
        let vhat = v[i] / c2;
        params[i] -= lr * mhat / (vhat.sqrt() + eps);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    first: [Vec<f64>; 2],
    second: [Vec<f64>; 2],
}

/// Optimizer with per-parameter state laid out like the [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    config: OptimizerConfig,
    state: Vec<Option<Moments>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, params: &ParamStore) -> Result<Self> {
        config.validate()?;
        let state = params
            .slots()
            .iter()
            .map(|slot| {
                slot.as_ref().map(|p| Moments {
                    first: [vec![0.0; p.weight.len()], vec![0.0; p.bias.len()]],
                    second: [vec![0.0; p.weight.len()], vec![0.0; p.bias.len()]],
                })
            })
            .collect();
        Ok(Optimizer {
            config,
            state,
            steps: 0,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to every non-frozen layer present in `grads`.
    pub fn step(&mut self, spec: &ModelSpec, params: &mut ParamStore, grads: &Gradients) -> Result<()> {
        let frozen = frozen_flags(spec);
        if frozen.len() != self.state.len() || params.layer_count() != self.state.len() {
            return Err(Error::State("optimizer state does not match the model".into()));
        }
        self.steps += 1;
        for (&index, g) in &grads.layers {
            if frozen.get(index).copied().unwrap_or(true) {
                continue;
            }
            let (Some(p), Some(Some(state))) = (params.get_mut(index), self.state.get_mut(index)) else {
                return Err(Error::State(format!("gradient for layer {index} without parameters")));
            };
            let targets = [
                (p.weight.data_mut(), g.weight.as_slice()),
                (p.bias.data_mut(), g.bias.as_slice()),
            ];
            for (k, (values, grad)) in targets.into_iter().enumerate() {
                match self.config {
                    OptimizerConfig::Sgd { lr, momentum } => {
                        sgd_step(values, grad, &mut state.first[k], lr, momentum)?
                    }
                    OptimizerConfig::Adam { lr, beta1, beta2, eps } => adam_step(
                        values,
                        grad,
                        &mut state.first[k],
                        &mut state.second[k],
                        self.steps,
                        lr,
                        beta1,
                        beta2,
                        eps,
                    )?,
                }
            }
        }
        Ok(())
    }
}

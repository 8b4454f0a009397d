//! First-order update rules over the model's weight and bias tensors.

use serde::{Deserialize, Serialize};

use super::{Gradients, MdnModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    RmsProp,
    Adam,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const RMSPROP_RHO: f64 = 0.9;
const EPS: f64 = 1e-8;

/// Moment buffers, laid out as `[w0, b0, w1, b1, ...]`.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    step: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, m: &MdnModel) -> Self {
        let shapes: Vec<usize> = m
            .layers()
            .iter()
            .flat_map(|l| [l.weights.len(), l.bias.len()])
            .collect();
        let buf = |on: bool| -> Vec<Vec<f64>> {
            if on {
                shapes.iter().map(|&n| vec![0.0; n]).collect()
            } else {
                Vec::new()
            }
        };
        Self {
            kind,
            step: 0,
            first: buf(kind == Optimizer::Adam),
            second: buf(kind != Optimizer::Sgd),
        }
    }

    pub fn step(&mut self, m: &mut MdnModel, g: &Gradients, lr: f64) {
        self.step += 1;
        let params = m
            .layers_mut()
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias]);
        let grads = g.layers.iter().flat_map(|l| [&l.weights, &l.bias]);
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in params.zip(grads) {
                    for (p, g) in p.iter_mut().zip(g) {
                        *p -= lr * g;
                    }
                }
            }
            Optimizer::RmsProp => {
                for ((p, g), v) in params.zip(grads).zip(&mut self.second) {
                    for ((p, g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                        *v = RMSPROP_RHO * *v + (1.0 - RMSPROP_RHO) * g * g;
                        *p -= lr * g / (v.sqrt() + EPS);
                    }
                }
            }
            Optimizer::Adam => {
                let c1 = 1.0 - ADAM_BETA1.powi(self.step);
                let c2 = 1.0 - ADAM_BETA2.powi(self.step);
                for (((p, g), m1), m2) in params.zip(grads).zip(&mut self.first).zip(&mut self.second) {
                    for (((p, g), m1), m2) in p.iter_mut().zip(g).zip(m1.iter_mut()).zip(m2.iter_mut()) {
                        *m1 = ADAM_BETA1 * *m1 + (1.0 - ADAM_BETA1) * g;
                        *m2 = ADAM_BETA2 * *m2 + (1.0 - ADAM_BETA2) * g * g;
                        *p -= lr * (*m1 / c1) / ((*m2 / c2).sqrt() + EPS);
                    }
                }
            }
        }
    }
}

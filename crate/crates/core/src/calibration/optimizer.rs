use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Gd,
}

/// First-order update rule over a flat parameter vector.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64, m: DVector<f64>, v: DVector<f64>, t: i32 },
    Gd { lr: f64 },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, len: usize) -> Self {
        match kind {
            OptimizerKind::Adam => {
                Optimizer::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: DVector::zeros(len), v: DVector::zeros(len), t: 0 }
            }
            OptimizerKind::Gd => Optimizer::Gd { lr },
        }
    }

    pub fn set_learning_rate(&mut self, rate: f64) {
        match self {
            Optimizer::Adam { lr, .. } | Optimizer::Gd { lr } => *lr = rate,
        }
    }

    pub fn step(&mut self, x: &mut DVector<f64>, grad: &DVector<f64>) {
        match self {
            Optimizer::Gd { lr } => x.axpy(-*lr, grad, 1.0),
            Optimizer::Adam { lr, beta1, beta2, eps, m, v, t } => {
                *t += 1;
                *m = &*m * *beta1 + grad * (1.0 - *beta1);
                *v = &*v * *beta2 + grad.component_mul(grad) * (1.0 - *beta2);
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                for i in 0..x.len() {
                    x[i] -= *lr * (m[i] / c1) / ((v[i] / c2).sqrt() + *eps);
                }
            }
        }
    }
}

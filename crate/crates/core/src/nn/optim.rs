//! Gradient ascent updates. The critic objectives are maximized, so both
//! optimizers move parameters along `+grad`.

use ndarray::{ArrayViewD, ArrayViewMutD, Zip};

use super::{CriticNet, Gradients, LayerParams, OptimizerKind};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub enum OptimizerState {
    Sgd,
    Adam {
        first: Vec<LayerParams>,
        second: Vec<LayerParams>,
        step: u64,
    },
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, net: &CriticNet) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => {
                let zeros: Vec<_> = net
                    .layers()
                    .iter()
                    .map(|l| LayerParams::zeros(l.out_dim(), l.in_dim()))
                    .collect();
                OptimizerState::Adam {
                    first: zeros.clone(),
                    second: zeros,
                    step: 0,
                }
            }
        }
    }

    /// Applies one ascent step with learning rate `lr`.
    ///
    /// Fails without touching `net` if any gradient entry is non-finite.
    pub fn step(&mut self, net: &mut CriticNet, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.layers.len() != net.layers.len() {
            return Err(Error::Shape(format!(
                "{} gradient layers for {} network layers",
                grads.layers.len(),
                net.layers.len()
            )));
        }
        for (i, (g, p)) in grads.layers.iter().zip(&net.layers).enumerate() {
            if g.weight.dim() != p.weight.dim() || g.bias.len() != p.bias.len() {
                return Err(Error::Shape(format!(
                    "gradient shape mismatch in layer {i}"
                )));
            }
            if g.weight.iter().chain(g.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { layer: i });
            }
        }
        match self {
            OptimizerState::Sgd => {
                for (p, g) in net.layers.iter_mut().zip(&grads.layers) {
                    p.weight.scaled_add(lr, &g.weight);
                    p.bias.scaled_add(lr, &g.bias);
                }
            }
            OptimizerState::Adam {
                first,
                second,
                step,
            } => {
                *step += 1;
                let t = *step as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                for (((p, g), m), v) in net
                    .layers
                    .iter_mut()
                    .zip(&grads.layers)
                    .zip(first.iter_mut())
                    .zip(second.iter_mut())
                {
                    adam_update(
                        p.weight.view_mut().into_dyn(),
                        g.weight.view().into_dyn(),
                        m.weight.view_mut().into_dyn(),
                        v.weight.view_mut().into_dyn(),
                        lr,
                        c1,
                        c2,
                    );
                    adam_update(
                        p.bias.view_mut().into_dyn(),
                        g.bias.view().into_dyn(),
                        m.bias.view_mut().into_dyn(),
                        v.bias.view_mut().into_dyn(),
                        lr,
                        c1,
                        c2,
                    );
                }
            }
        }
        Ok(())
    }
}

fn adam_update(
    p: ArrayViewMutD<'_, f64>,
    g: ArrayViewD<'_, f64>,
    m: ArrayViewMutD<'_, f64>,
    v: ArrayViewMutD<'_, f64>,
    lr: f64,
    c1: f64,
    c2: f64,
) {
    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p += lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    });
}

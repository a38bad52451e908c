use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::scalar::Scalar;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// Moment estimates and step count, aligned with the parameter list.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub steps: u64,
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(OptimizerState {
            kind,
            learning_rate,
            steps: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }
}

/// Applies one update to every parameter. Nothing is modified when any
/// gradient is non-finite.
pub fn optimizer_step<T: Scalar>(
    params: &mut [&mut Matrix<T>],
    grads: &[Matrix<T>],
    state: &mut OptimizerState<T>,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Input(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        p.check_same_shape("optimizer_step", g)?;
        if !g.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient for parameter {i}")));
        }
    }
    state.steps += 1;
    let lr = T::lit(state.learning_rate);
    match state.kind {
        OptimizerKind::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                for (w, &d) in p.data_mut().iter_mut().zip(g.data()) {
                    *w -= lr * d;
                }
            }
        }
        OptimizerKind::Adam => {
            if state.m.is_empty() {
                state.m = grads.iter().map(|g| Matrix::zeros(g.rows(), g.cols())).collect();
                state.v = state.m.clone();
            }
            let t = state.steps as i32;
            let (b1, b2) = (T::lit(BETA1), T::lit(BETA2));
            let c1 = T::one() - b1.powi(t);
            let c2 = T::one() - b2.powi(t);
            let eps = T::lit(ADAM_EPS);
            for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
                let iter = p
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
                for ((w, &d), (mi, vi)) in iter {
                    *mi = b1 * *mi + (T::one() - b1) * d;
                    *vi = b2 * *vi + (T::one() - b2) * d * d;
                    let m_hat = *mi / c1;
                    let v_hat = *vi / c2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}

//! Parameters, the parameter store, and the Adam update.

use super::{Graph, Var};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Whether the optimizer moves a parameter against the gradient (network
/// weights) or along it (self-adaptive loss weights in the min-max scheme).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateDirection {
    Descent,
    Ascent,
}

/// A trainable tensor with Adam moment accumulators.
#[derive(Debug, Clone)]
pub struct Parameter<T: Scalar> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    pub direction: UpdateDirection,
    m: Vec<T>,
    v: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// Owns every trainable tensor of one model instance.
#[derive(Debug, Default)]
pub struct ParamStore<T: Scalar> {
    params: Vec<Parameter<T>>,
}

/// Adam hyperparameters. `lr = 0.001` with no decay; the remaining defaults
/// are pinned here for reproducibility.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, shape: Vec<usize>, data: Vec<T>, direction: UpdateDirection) -> ParamId {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        let n = data.len();
        self.params.push(Parameter {
            shape,
            data,
            direction,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn data(&self, id: ParamId) -> &[T] {
        &self.params[id.0].data
    }

    pub fn data_mut(&mut self, id: ParamId) -> &mut Vec<T> {
        &mut self.params[id.0].data
    }

    /// Total number of scalar entries across all parameters.
    pub fn total_len(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    /// Inserts every parameter into `g` as a gradient-carrying leaf.
    /// The returned vector is indexed by `ParamId`.
    pub fn bind(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| g.param_leaf(p.shape.clone(), p.data.clone()))
            .collect()
    }

    /// One Adam step with bias correction, at step index `t >= 1`.
    ///
    /// Descent parameters move against the gradient, ascent parameters along
    /// it. `bindings` must come from [`ParamStore::bind`] on the graph that
    /// ran `backward`.
    pub fn adam_step(
        &mut self,
        g: &Graph<T>,
        bindings: &[Var],
        hp: AdamParams,
        t: usize,
    ) -> Result<()> {
        if t == 0 {
            return Err(Error::invalid("Adam step index starts at 1"));
        }
        if bindings.len() != self.params.len() {
            return Err(Error::invalid("bindings/parameter count mismatch"));
        }
        let b1 = T::from_f64(hp.beta1);
        let b2 = T::from_f64(hp.beta2);
        let one = T::one();
        let eps = T::from_f64(hp.eps);
        let bc1 = T::from_f64(1.0 - hp.beta1.powi(t as i32));
        let bc2 = T::from_f64(1.0 - hp.beta2.powi(t as i32));
        let lr = T::from_f64(hp.lr);
        for (p, &var) in self.params.iter_mut().zip(bindings) {
            let grad = g
                .grad(var)
                .map_err(|_| Error::invalid("Adam step before backward pass"))?;
            if grad.len() != p.data.len() {
                return Err(Error::invalid("gradient missing for parameter"));
            }
            let sign = match p.direction {
                UpdateDirection::Descent => -one,
                UpdateDirection::Ascent => one,
            };
            for k in 0..p.data.len() {
                let gk = grad[k];
                p.m[k] = b1 * p.m[k] + (one - b1) * gk;
                p.v[k] = b2 * p.v[k] + (one - b2) * gk * gk;
                let m_hat = p.m[k] / bc1;
                let v_hat = p.v[k] / bc2;
                p.data[k] = p.data[k] + sign * lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

//! Named parameters, optimizer state and the decoupled-decay Adam update.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Gradients, Tape, Tensor, TensorError, Var};

/// Gradients keyed by parameter name.
pub type GradMap = BTreeMap<String, Tensor>;

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    m: Tensor,
    v: Tensor,
}

impl Param {
    fn new(value: Tensor) -> Param {
        let (r, c) = value.shape();
        Param {
            value,
            m: Tensor::zeros(r, c),
            v: Tensor::zeros(r, c),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<(), TensorError> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(TensorError::DuplicateParam(name));
        }
        self.params.insert(name, Param::new(value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name).map(|p| &p.value)
    }

    /// Replaces a value; the shape must not change.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<(), TensorError> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))?;
        if p.value.shape() != value.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "set",
                left: p.value.shape(),
                right: value.shape(),
            });
        }
        p.value = value;
        Ok(())
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name).map(|p| &mut p.value)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, p)| (k.as_str(), &p.value))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    /// Optimizer steps taken so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Puts every parameter on `tape` as a differentiable leaf.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Bound<'t> {
        Bound {
            vars: self
                .params
                .iter()
                .map(|(k, p)| (k.clone(), tape.param(p.value.clone())))
                .collect(),
        }
    }

    /// All-zero gradients shaped like the parameters.
    pub fn zero_grads(&self) -> GradMap {
        self.params
            .iter()
            .map(|(k, p)| (k.clone(), Tensor::zeros(p.value.rows(), p.value.cols())))
            .collect()
    }
}

/// Parameters bound to one tape.
pub struct Bound<'t> {
    vars: BTreeMap<String, Var<'t>>,
}

impl<'t> Bound<'t> {
    pub fn get(&self, name: &str) -> Result<Var<'t>, TensorError> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    /// Extracts the gradient of every bound parameter.
    pub fn gradients(&self, grads: &Gradients) -> GradMap {
        self.vars
            .iter()
            .map(|(k, v)| {
                let g = grads.get(*v).cloned().unwrap_or_else(|| {
                    let (r, c) = v.shape();
                    Tensor::zeros(r, c)
                });
                (k.clone(), g)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// One bias-corrected Adam step with weight decay applied directly to the
/// parameter rather than folded into the gradient.
pub fn adam_step(store: &mut ParamStore, grads: &GradMap, cfg: &AdamConfig) -> Result<(), TensorError> {
    for (name, p) in &store.params {
        let g = grads
            .get(name)
            .ok_or_else(|| TensorError::MissingGradient(name.clone()))?;
        if g.shape() != p.value.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                left: p.value.shape(),
                right: g.shape(),
            });
        }
    }
    store.step += 1;
    let t = store.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (name, p) in store.params.iter_mut() {
        let g = &grads[name];
        let Param { value, m, v } = p;
        for (((x, m), v), &g) in value
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g.data())
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *x -= cfg.lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * *x);
        }
    }
    Ok(())
}

pub fn grad_norm(grads: &GradMap) -> f64 {
    grads.values().map(Tensor::squared_norm).sum::<f64>().sqrt()
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut GradMap, max_norm: f64) -> f64 {
    let norm = grad_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.values_mut().for_each(|g| g.scale_assign(s));
    }
    norm
}

/// Adds `other` into `acc`, inserting missing keys.
pub fn accumulate_grads(acc: &mut GradMap, other: &GradMap) {
    for (k, g) in other {
        match acc.get_mut(k) {
            Some(a) => a.add_assign(g),
            None => {
                acc.insert(k.clone(), g.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::scalar(v)).unwrap();
        s
    }

    fn grads(v: f64) -> GradMap {
        [("w".to_string(), Tensor::scalar(v))].into_iter().collect()
    }

    #[test]
    fn zero_grads_without_decay_is_identity() {
        let mut s = ParamStore::new();
        s.insert("a", Tensor::from_vec(1, 3, vec![0.3, -1.0, 2.0]).unwrap()).unwrap();
        let before = s.clone();
        let g = s.zero_grads();
        adam_step(&mut s, &g, &AdamConfig::default()).unwrap();
        assert_eq!(s.get("a"), before.get("a"));
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn first_step_hand_value() {
        let mut s = scalar_store(1.0);
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        adam_step(&mut s, &grads(1.0), &cfg).unwrap();
        let expect = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
        assert!((s.get("w").unwrap().item() - expect).abs() < 1e-15);
        assert!((s.get("w").unwrap().item() - 0.9).abs() < 1e-6);
    }

    #[test]
    fn decoupled_decay_shrinks_by_lr_lambda_param() {
        let cfg = AdamConfig {
            lr: 0.1,
            weight_decay: 0.5,
            ..AdamConfig::default()
        };
        let mut s = scalar_store(2.0);
        adam_step(&mut s, &grads(0.0), &cfg).unwrap();
        assert!((s.get("w").unwrap().item() - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut s = scalar_store(1.0);
        let err = adam_step(&mut s, &GradMap::new(), &AdamConfig::default()).unwrap_err();
        assert_eq!(err, TensorError::MissingGradient("w".into()));
        assert_eq!(s.step(), 0);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = scalar_store(1.0);
        assert!(matches!(s.insert("w", Tensor::scalar(0.0)), Err(TensorError::DuplicateParam(_))));
    }

    #[test]
    fn clipping_bounds_global_norm() {
        let mut g: GradMap = [
            ("a".to_string(), Tensor::scalar(3.0)),
            ("b".to_string(), Tensor::scalar(4.0)),
        ]
        .into_iter()
        .collect();
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((grad_norm(&g) - 1.0).abs() < 1e-12);
    }
}

//! Gradient-ascent optimizers over a flat parameter vector.

use crate::error::{Error, Result};
use crate::registry::Registry;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Maximizes: every step moves along `grad`.
pub trait Optimizer {
    fn name(&self) -> &'static str;

    fn step(&mut self, params: &mut [f64], grad: &[f64]);
}

pub struct Sgd {
    pub lr: f64,
}

impl Optimizer for Sgd {
    fn name(&self) -> &'static str {
        "sgd"
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        for (p, g) in params.iter_mut().zip(grad) {
            *p += self.lr * g;
        }
    }
}

pub struct Adam {
    pub params: OptimizerParams,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(params: OptimizerParams) -> Self {
        Adam {
            params,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        if self.m.len() != params.len() {
            self.m = vec![0.0; params.len()];
            self.v = vec![0.0; params.len()];
            self.t = 0;
        }
        let OptimizerParams { lr, beta1, beta2, eps } = self.params;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] += lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

fn check(p: &OptimizerParams) -> Result<()> {
    if !(p.lr > 0.0 && p.lr.is_finite()) {
        return Err(Error::usage(format!("learning rate must be positive, got {}", p.lr)));
    }
    Ok(())
}

pub fn optimizers() -> Registry<dyn Optimizer, OptimizerParams> {
    let mut r: Registry<dyn Optimizer, OptimizerParams> = Registry::new("optimizer");
    r.register("sgd", |p| {
        check(p)?;
        Ok(Box::new(Sgd { lr: p.lr }))
    });
    r.register("adam", |p| {
        check(p)?;
        if !(0.0..1.0).contains(&p.beta1) || !(0.0..1.0).contains(&p.beta2) || !(p.eps > 0.0) {
            return Err(Error::usage("adam needs 0 <= beta < 1 and eps > 0"));
        }
        Ok(Box::new(Adam::new(*p)))
    });
    r
}

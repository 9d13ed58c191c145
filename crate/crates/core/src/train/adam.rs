use alloc::string::String;

use crate::nn::{EntryMut, Module};
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |b: f64| (0.0..1.0).contains(&b);
        if !ok(self.beta1) || !ok(self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Config(alloc::format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// One bias-corrected Adam update at step `t` (1-based) over every
/// parameter of `model`, then clears the gradients.
///
/// Nothing is updated if any gradient is non-finite.
pub fn adam_step<T: Real, M: Module<T> + ?Sized>(model: &mut M, lr: f64, cfg: &AdamConfig, t: u64) -> Result<()> {
    if t == 0 {
        return Err(Error::Param(String::from("Adam step index starts at 1")));
    }
    let mut bad = None;
    model.visit_mut("", &mut |name, e| {
        if let EntryMut::Param(p) = e {
            if bad.is_none() && !p.grad.is_finite() {
                bad = Some(String::from(name));
            }
        }
    });
    if let Some(layer) = bad {
        return Err(Error::NonFinite { layer });
    }
    let (b1, b2) = (T::from_f64(cfg.beta1), T::from_f64(cfg.beta2));
    let c1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let c2 = 1.0 - libm::pow(cfg.beta2, t as f64);
    let step = T::from_f64(lr / c1);
    let c2 = T::from_f64(c2);
    let eps = T::from_f64(cfg.eps);
    let one = T::one();
    model.visit_mut("", &mut |_, e| {
        if let EntryMut::Param(p) = e {
            let g = p.grad.data();
            let (m, v) = (p.m.data_mut(), p.v.data_mut());
            let w = p.value.data_mut();
            for i in 0..w.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                w[i] -= step * m[i] / ((v[i] / c2).sqrt() + eps);
            }
            p.zero_grad();
        }
    });
    Ok(())
}

/// Adam with its own step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, t: 0 }
    }

    pub fn step<T: Real, M: Module<T> + ?Sized>(&mut self, model: &mut M, lr: f64) -> Result<()> {
        adam_step(model, lr, &self.config, self.t + 1)?;
        self.t += 1;
        Ok(())
    }

    /// Forgets the moment estimates and restarts bias correction.
    pub fn reset<T: Real, M: Module<T> + ?Sized>(&mut self, model: &mut M) {
        self.t = 0;
        model.visit_mut("", &mut |_, e| {
            if let EntryMut::Param(p) = e {
                p.reset_moments();
            }
        });
    }
}

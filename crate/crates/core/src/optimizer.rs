//! Update rules driven by the total subgradient (loss gradient plus penalty subgradient).

use crate::error::{Error, Result};
use crate::linalg::{check_len, Vector};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub eta: f64,
    pub b_m: f64,
    pub b_v: f64,
    pub eps_a: f64,
}

impl AdamConfig {
    pub fn new(eta: f64) -> Self {
        Self { eta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| b > 0.0 && b < 1.0;
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.eta)));
        }
        if !unit(self.b_m) || !unit(self.b_v) {
            return Err(Error::config(format!("Adam decay rates must lie in (0, 1), got {} and {}", self.b_m, self.b_v)));
        }
        if !(self.eps_a > 0.0) {
            return Err(Error::config(format!("Adam epsilon must be positive, got {}", self.eps_a)));
        }
        Ok(())
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { eta: 1e-4, b_m: 0.9, b_v: 0.999, eps_a: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vector<T>,
    pub v: Vector<T>,
    pub k: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(n: usize) -> Self {
        Self { m: Vector::zeros(n), v: Vector::zeros(n), k: 0 }
    }
}

/// `θ − η·g`.
pub fn sgd_step<T: Scalar>(theta: &Vector<T>, g: &Vector<T>, eta: f64) -> Result<Vector<T>> {
    check_len("sgd_step", theta.len(), g.len())?;
    let eta = T::lit(eta);
    Ok(theta.iter().zip(g.iter()).map(|(&t, &g)| t - eta * g).collect())
}

/// In-place Adam update; increments `state.k` before bias correction.
pub fn adam_update<T: Scalar>(theta: &mut [T], g: &[T], cfg: &AdamConfig, state: &mut AdamState<T>) -> Result<()> {
    let n = theta.len();
    check_len("adam gradient", n, g.len())?;
    check_len("adam state", n, state.m.len())?;
    check_len("adam state", n, state.v.len())?;
    state.k += 1;
    let k = i32::try_from(state.k).unwrap_or(i32::MAX);
    let (b_m, b_v) = (T::lit(cfg.b_m), T::lit(cfg.b_v));
    let one = T::one();
    let c_m = one / (one - T::lit(cfg.b_m.powi(k)));
    let c_v = one / (one - T::lit(cfg.b_v.powi(k)));
    let (eta, eps) = (T::lit(cfg.eta), T::lit(cfg.eps_a));
    for i in 0..n {
        let gi = g[i];
        let m = b_m * state.m[i] + (one - b_m) * gi;
        let v = b_v * state.v[i] + (one - b_v) * gi * gi;
        state.m[i] = m;
        state.v[i] = v;
        theta[i] -= eta * (m * c_m) / ((v * c_v).sqrt() + eps);
    }
    Ok(())
}

/// State-in, state-out form of [`adam_update`].
pub fn adam_step<T: Scalar>(
    theta: &Vector<T>,
    g: &Vector<T>,
    cfg: &AdamConfig,
    state: &AdamState<T>,
) -> Result<(Vector<T>, AdamState<T>)> {
    let mut theta = theta.clone();
    let mut state = state.clone();
    adam_update(&mut theta, g, cfg, &mut state)?;
    Ok((theta, state))
}

pub fn total_subgradient<T: Scalar>(loss_grad: &Vector<T>, reg_subgrad: &Vector<T>) -> Result<Vector<T>> {
    loss_grad.add(reg_subgrad)
}

/// Either rule behind one interface, used by the training loop.
#[derive(Debug, Clone)]
pub enum Optimizer<T> {
    Sgd { eta: f64 },
    Adam { cfg: AdamConfig, state: AdamState<T> },
}

impl<T: Scalar> Optimizer<T> {
    pub fn adam(cfg: AdamConfig, n: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Optimizer::Adam { cfg, state: AdamState::new(n) })
    }

    pub fn step(&mut self, theta: &mut [T], g: &[T]) -> Result<()> {
        match self {
            Optimizer::Sgd { eta } => {
                check_len("sgd_step", theta.len(), g.len())?;
                let eta = T::lit(*eta);
                for (t, &g) in theta.iter_mut().zip(g) {
                    *t -= eta * g;
                }
                Ok(())
            }
            Optimizer::Adam { cfg, state } => adam_update(theta, g, cfg, state),
        }
    }
}

//! Penalty terms and their subgradients for every training strategy.
//!
//! Nonsmooth kinks use the right-hand derivative: `s(0) = +1`, so a parameter
//! sitting exactly at zero (or exactly at its low-fidelity value) is pushed as
//! if it were slightly positive. Most libraries use `s(0) = 0` instead.
//! Every parameter is penalized, biases included.

use crate::error::{Error, Result};
use crate::linalg::{check_len, norm1, norm2, Matrix, Rng, Vector};
use crate::scalar::Scalar;

/// Damping added to `|θ|` before inverting it into a weight.
pub const DEFAULT_EPS_W: f64 = 1e-5;

/// Which penalty (if any) is added to the training loss.
#[derive(Debug, Clone, PartialEq)]
pub enum RegStrategy<T> {
    None,
    /// `λ‖θ‖₂`, the unsquared norm.
    L2 { lambda: f64 },
    /// Inverted dropout on hidden layers; contributes no penalty term.
    Dropout { p: f64 },
    /// Strategy I: `λ‖θ‖₁`.
    L1Standard { lambda: f64 },
    /// Strategy II: `λ Σ w_i|θ_i|` with `w_i = 1/(|θ_prev,i| + ε_w)` refreshed every iteration.
    L1ReweightedHF { lambda: f64, eps_w: f64 },
    /// Strategy III: `λ‖θ − θ_LF‖₁`.
    L1BiFidelityDiff { lambda: f64, theta_lf: Vector<T> },
    /// Strategy IV: `λ Σ w_i|θ_i|` with fixed `w_i = 1/(|θ_LF,i| + ε_w)`.
    L1BiFidelityWeighted {
        lambda: f64,
        eps_w: f64,
        theta_lf: Vector<T>,
    },
}

impl<T: Scalar> RegStrategy<T> {
    pub fn name(&self) -> &'static str {
        match self {
            RegStrategy::None => "none",
            RegStrategy::L2 { .. } => "l2",
            RegStrategy::Dropout { .. } => "dropout",
            RegStrategy::L1Standard { .. } => "l1",
            RegStrategy::L1ReweightedHF { .. } => "l1_reweighted",
            RegStrategy::L1BiFidelityDiff { .. } => "l1_bf_diff",
            RegStrategy::L1BiFidelityWeighted { .. } => "l1_bf_weighted",
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            RegStrategy::L2 { lambda }
            | RegStrategy::L1Standard { lambda }
            | RegStrategy::L1ReweightedHF { lambda, .. }
            | RegStrategy::L1BiFidelityDiff { lambda, .. }
            | RegStrategy::L1BiFidelityWeighted { lambda, .. } => Some(lambda),
            RegStrategy::None | RegStrategy::Dropout { .. } => None,
        }
    }

    pub fn theta_lf(&self) -> Option<&Vector<T>> {
        match self {
            RegStrategy::L1BiFidelityDiff { theta_lf, .. }
            | RegStrategy::L1BiFidelityWeighted { theta_lf, .. } => Some(theta_lf),
            _ => None,
        }
    }

    pub fn dropout_p(&self) -> Option<f64> {
        match *self {
            RegStrategy::Dropout { p } => Some(p),
            _ => None,
        }
    }

    /// Checks the strength, damping and reference-vector invariants for a network with `n_params` parameters.
    pub fn validate(&self, n_params: usize) -> Result<()> {
        if let Some(lambda) = self.lambda() {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::config(format!(
                    "{}: lambda must be positive, got {lambda}",
                    self.name()
                )));
            }
        }
        match self {
            RegStrategy::L1ReweightedHF { eps_w, .. } | RegStrategy::L1BiFidelityWeighted { eps_w, .. }
                if !(*eps_w > 0.0 && eps_w.is_finite()) =>
            {
                return Err(Error::config(format!("eps_w must be positive, got {eps_w}")));
            }
            RegStrategy::Dropout { p } if !(0.0..1.0).contains(p) => {
                return Err(Error::config(format!("dropout p must lie in [0, 1), got {p}")));
            }
            _ => {}
        }
        if let Some(lf) = self.theta_lf() {
            check_len("theta_lf", n_params, lf.len())?;
            if !lf.all_finite() {
                return Err(Error::config("theta_lf has non-finite entries"));
            }
        }
        Ok(())
    }
}

/// Diagonal of the weight matrix `W` for the weighted penalties.
#[derive(Debug, Clone, PartialEq)]
pub struct RegState<T> {
    pub weights: Vector<T>,
}

fn inverse_magnitudes<T: Scalar>(theta: &[T], eps_w: f64) -> RegState<T> {
    let eps = T::lit(eps_w);
    RegState {
        weights: theta.iter().map(|&t| T::one() / (t.abs() + eps)).collect(),
    }
}

/// Strategy II weights from the previous iterate: `w_i = 1/(|θ_prev,i| + ε_w)`.
pub fn update_reweight_state<T: Scalar>(eps_w: f64, theta_prev: &[T]) -> RegState<T> {
    inverse_magnitudes(theta_prev, eps_w)
}

/// Strategy IV weights from the low-fidelity parameters, computed once.
pub fn bifidelity_weights<T: Scalar>(theta_lf: &[T], eps_w: f64) -> RegState<T> {
    inverse_magnitudes(theta_lf, eps_w)
}

#[inline]
fn right_sign<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        -T::one()
    }
}

fn weights_for<'a, T: Scalar>(strategy: &RegStrategy<T>, state: Option<&'a RegState<T>>, n: usize) -> Result<&'a [T]> {
    let state = state.ok_or_else(|| {
        Error::config(format!("{} needs a weight state", strategy.name()))
    })?;
    check_len("weights", n, state.weights.len())?;
    Ok(state.weights.as_slice())
}

/// Value of the penalty term at `theta`.
pub fn penalty<T: Scalar>(strategy: &RegStrategy<T>, state: Option<&RegState<T>>, theta: &[T]) -> Result<T> {
    let n = theta.len();
    Ok(match strategy {
        RegStrategy::None | RegStrategy::Dropout { .. } => T::zero(),
        RegStrategy::L2 { lambda } => T::lit(*lambda) * norm2(theta),
        RegStrategy::L1Standard { lambda } => T::lit(*lambda) * norm1(theta),
        RegStrategy::L1ReweightedHF { lambda, .. } | RegStrategy::L1BiFidelityWeighted { lambda, .. } => {
            let w = weights_for(strategy, state, n)?;
            T::lit(*lambda) * theta.iter().zip(w).map(|(&t, &w)| w * t.abs()).sum::<T>()
        }
        RegStrategy::L1BiFidelityDiff { lambda, theta_lf } => {
            check_len("penalty theta_lf", n, theta_lf.len())?;
            T::lit(*lambda) * theta.iter().zip(theta_lf.iter()).map(|(&t, &l)| (t - l).abs()).sum::<T>()
        }
    })
}

/// Adds the penalty subgradient at `theta` into `out`.
pub fn add_subgradient<T: Scalar>(
    strategy: &RegStrategy<T>,
    state: Option<&RegState<T>>,
    theta: &[T],
    out: &mut [T],
) -> Result<()> {
    let n = theta.len();
    check_len("subgradient output", n, out.len())?;
    match strategy {
        RegStrategy::None | RegStrategy::Dropout { .. } => {}
        RegStrategy::L2 { lambda } => {
            let norm = norm2(theta);
            if norm > T::zero() {
                let s = T::lit(*lambda) / norm;
                for (o, &t) in out.iter_mut().zip(theta) {
                    *o += s * t;
                }
            }
        }
        RegStrategy::L1Standard { lambda } => {
            let l = T::lit(*lambda);
            for (o, &t) in out.iter_mut().zip(theta) {
                *o += l * right_sign(t);
            }
        }
        RegStrategy::L1ReweightedHF { lambda, .. } | RegStrategy::L1BiFidelityWeighted { lambda, .. } => {
            let w = weights_for(strategy, state, n)?;
            let l = T::lit(*lambda);
            for ((o, &t), &w) in out.iter_mut().zip(theta).zip(w) {
                *o += l * w * right_sign(t);
            }
        }
        RegStrategy::L1BiFidelityDiff { lambda, theta_lf } => {
            check_len("subgradient theta_lf", n, theta_lf.len())?;
            let l = T::lit(*lambda);
            for ((o, &t), &r) in out.iter_mut().zip(theta).zip(theta_lf.iter()) {
                *o += l * right_sign(t - r);
            }
        }
    }
    Ok(())
}

/// Subgradient of the penalty at `theta`.
pub fn subgradient<T: Scalar>(strategy: &RegStrategy<T>, state: Option<&RegState<T>>, theta: &[T]) -> Result<Vector<T>> {
    let mut g = Vector::zeros(theta.len());
    add_subgradient(strategy, state, theta, &mut g)?;
    Ok(g)
}

/// A strategy together with the weight state it needs during one training run.
#[derive(Debug, Clone)]
pub struct Regularizer<T> {
    strategy: RegStrategy<T>,
    state: Option<RegState<T>>,
}

impl<T: Scalar> Regularizer<T> {
    pub fn new(strategy: RegStrategy<T>, n_params: usize) -> Result<Self> {
        strategy.validate(n_params)?;
        let state = match &strategy {
            RegStrategy::L1BiFidelityWeighted { eps_w, theta_lf, .. } => Some(bifidelity_weights(theta_lf, *eps_w)),
            _ => None,
        };
        Ok(Self { strategy, state })
    }

    pub fn strategy(&self) -> &RegStrategy<T> {
        &self.strategy
    }

    pub fn state(&self) -> Option<&RegState<T>> {
        self.state.as_ref()
    }

    /// Called once per iteration with the previous iterate; refreshes Strategy II weights.
    pub fn prepare(&mut self, theta_prev: &[T]) {
        if let RegStrategy::L1ReweightedHF { eps_w, .. } = self.strategy {
            self.state = Some(update_reweight_state(eps_w, theta_prev));
        }
    }

    pub fn penalty(&self, theta: &[T]) -> Result<T> {
        match (&self.strategy, &self.state) {
            // Before the first refresh the weights come from θ itself.
            (RegStrategy::L1ReweightedHF { eps_w, .. }, None) => {
                penalty(&self.strategy, Some(&update_reweight_state(*eps_w, theta)), theta)
            }
            _ => penalty(&self.strategy, self.state.as_ref(), theta),
        }
    }

    pub fn add_subgradient(&self, theta: &[T], out: &mut [T]) -> Result<()> {
        add_subgradient(&self.strategy, self.state.as_ref(), theta, out)
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `p`, else `1/(1−p)`.
pub fn dropout_mask<T: Scalar>(rows: usize, cols: usize, p: f64, rng: &mut Rng) -> Result<Matrix<T>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(format!("dropout p must lie in [0, 1), got {p}")));
    }
    let keep = T::lit(1.0 / (1.0 - p));
    let data = (0..rows * cols)
        .map(|_| if rng.next_f64() < p { T::zero() } else { keep })
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Inverted dropout on one layer output; identity at inference time.
pub fn apply_dropout<T: Scalar>(layer_output: &Vector<T>, p: f64, rng: &mut Rng, training: bool) -> Result<Vector<T>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(format!("dropout p must lie in [0, 1), got {p}")));
    }
    if !training || p == 0.0 {
        return Ok(layer_output.clone());
    }
    let mask = dropout_mask::<T>(1, layer_output.len(), p, rng)?;
    Ok(layer_output.iter().zip(mask.as_slice()).map(|(&v, &m)| v * m).collect())
}

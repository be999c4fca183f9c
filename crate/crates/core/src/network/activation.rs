use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Elementwise nonlinearity applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActivationKind {
    Relu,
    Elu { alpha: f64 },
    Tanh,
    Identity,
}

impl ActivationKind {
    /// ELU with `α = 1`.
    pub const ELU: ActivationKind = ActivationKind::Elu { alpha: 1.0 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationKind::Elu { alpha } if !(alpha > 0.0 && alpha.is_finite()) => Err(
                Error::config(format!("ELU alpha must be positive, got {alpha}")),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval<T: Scalar>(&self, z: T) -> T {
        match *self {
            ActivationKind::Relu => z.max(T::zero()),
            ActivationKind::Elu { alpha } => {
                if z > T::zero() {
                    z
                } else {
                    T::lit(alpha) * z.exp_m1()
                }
            }
            ActivationKind::Tanh => z.tanh(),
            ActivationKind::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`, given `a = eval(z)`.
    ///
    /// ReLU takes 0 at the kink; ELU uses `α·e^z = a + α` on the non-positive branch.
    #[inline]
    pub fn derivative<T: Scalar>(&self, z: T, a: T) -> T {
        match *self {
            ActivationKind::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            ActivationKind::Elu { alpha } => {
                if z > T::zero() {
                    T::one()
                } else {
                    a + T::lit(alpha)
                }
            }
            ActivationKind::Tanh => T::one() - a * a,
            ActivationKind::Identity => T::one(),
        }
    }
}

/// Free-function form of [`ActivationKind::eval`].
pub fn activation_eval<T: Scalar>(kind: ActivationKind, z: T) -> T {
    kind.eval(z)
}

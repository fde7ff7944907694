//! Explicit fixed-step integration of small ODE systems.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

/// A derivative evaluation produced a non-finite component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("non-finite derivative in state channel {channel}")]
pub struct StepFault {
    pub channel: usize,
}

fn check<const N: usize>(k: &[f64; N]) -> Result<(), StepFault> {
    match k.iter().position(|v| !v.is_finite()) {
        Some(channel) => Err(StepFault { channel }),
        None => Ok(()),
    }
}

fn axpy<const N: usize>(x: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for (o, kv) in out.iter_mut().zip(k) {
        *o += a * kv;
    }
    out
}

/// Advances `x` by one step of `dt` under the autonomous system `f`.
/// Inputs that vary in time are held constant over the step by the caller.
pub fn integrate_step<const N: usize, F>(x: &[f64; N], mut f: F, dt: f64, method: Method) -> Result<[f64; N], StepFault>
where
    F: FnMut(&[f64; N]) -> [f64; N],
{
    match method {
        Method::Euler => {
            let k = f(x);
            check(&k)?;
            Ok(axpy(x, dt, &k))
        }
        Method::Rk4 => {
            let k1 = f(x);
            check(&k1)?;
            let k2 = f(&axpy(x, 0.5 * dt, &k1));
            check(&k2)?;
            let k3 = f(&axpy(x, 0.5 * dt, &k2));
            check(&k3)?;
            let k4 = f(&axpy(x, dt, &k3));
            check(&k4)?;
            let mut out = *x;
            for i in 0..N {
                out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            check(&out)?;
            Ok(out)
        }
    }
}

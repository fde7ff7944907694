//! Discrete PI regulation, Park transforms, the ideal grid angle and the
//! averaged converter-leg model shared by every power-electronic stage.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::ops::{Add, Mul, Neg, Sub};

const TWO_PI_3: f64 = TAU / 3.0;

/// Proportional and integral gains of one PI regulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
}

impl PiGains {
    pub const fn new(kp: f64, ki: f64) -> Self {
        Self { kp, ki }
    }

    pub fn is_valid(&self) -> bool {
        self.kp >= 0.0 && self.ki >= 0.0 && self.kp.is_finite() && self.ki.is_finite()
    }
}

/// Memory of a trapezoidal PI regulator with clamping anti-windup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiState {
    pub integral_accum: f64,
    pub prev_error: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl PiState {
    /// # Panics
    /// When `u_min >= u_max`.
    pub fn bounded(u_min: f64, u_max: f64) -> Self {
        assert!(u_min < u_max, "PI bounds must satisfy u_min < u_max");
        Self {
            integral_accum: 0.0,
            prev_error: 0.0,
            u_min,
            u_max,
        }
    }

    pub fn unbounded() -> Self {
        Self::bounded(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Sets the accumulator so that a zero error reproduces `output`.
    /// Used to start a loop at an operating point without a transient.
    pub fn preload(&mut self, gains: &PiGains, output: f64) {
        self.integral_accum = if gains.ki > 0.0 { output / gains.ki } else { 0.0 };
        self.prev_error = 0.0;
    }

    /// Output with zero proportional contribution.
    pub fn held_output(&self, gains: &PiGains) -> f64 {
        (gains.ki * self.integral_accum).clamp(self.u_min, self.u_max)
    }

    pub fn step(&mut self, gains: &PiGains, error: f64, ts: f64) -> f64 {
        let candidate = self.integral_accum + 0.5 * ts * (error + self.prev_error);
        let u = gains.kp * error + gains.ki * candidate;
        self.prev_error = error;
        if u < self.u_min {
            self.u_min
        } else if u > self.u_max {
            self.u_max
        } else {
            self.integral_accum = candidate;
            u
        }
    }
}

/// One PI update: `u = kp·e[k] + ki·(accum + ts/2·(e[k] + e[k-1]))`, clipped to the
/// state's bounds; the accumulator only advances while the output is unsaturated.
pub fn pi_step(state: &mut PiState, gains: &PiGains, error: f64, ts: f64) -> f64 {
    state.step(gains, error, ts)
}

/// A pair of synchronous-frame components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DqPair {
    pub d: f64,
    pub q: f64,
}

impl DqPair {
    pub const ZERO: DqPair = DqPair { d: 0.0, q: 0.0 };

    pub const fn new(d: f64, q: f64) -> Self {
        Self { d, q }
    }

    pub fn norm(&self) -> f64 {
        self.d.hypot(self.q)
    }

    pub fn is_finite(&self) -> bool {
        self.d.is_finite() && self.q.is_finite()
    }

    /// Scales the pair down so its magnitude does not exceed `limit`.
    pub fn limit_magnitude(self, limit: f64) -> (DqPair, bool) {
        let n = self.norm();
        if n > limit && n > 0.0 {
            (self * (limit / n), true)
        } else {
            (self, false)
        }
    }
}

impl Add for DqPair {
    type Output = DqPair;
    fn add(self, o: DqPair) -> DqPair {
        DqPair::new(self.d + o.d, self.q + o.q)
    }
}

impl Sub for DqPair {
    type Output = DqPair;
    fn sub(self, o: DqPair) -> DqPair {
        DqPair::new(self.d - o.d, self.q - o.q)
    }
}

impl Mul<f64> for DqPair {
    type Output = DqPair;
    fn mul(self, k: f64) -> DqPair {
        DqPair::new(self.d * k, self.q * k)
    }
}

impl Neg for DqPair {
    type Output = DqPair;
    fn neg(self) -> DqPair {
        DqPair::new(-self.d, -self.q)
    }
}

/// Amplitude-invariant Park transform (2/3 scaling).
pub fn abc_to_dq(va: f64, vb: f64, vc: f64, theta: f64) -> DqPair {
    let (sa, ca) = theta.sin_cos();
    let (sb, cb) = (theta - TWO_PI_3).sin_cos();
    let (sc, cc) = (theta - 2.0 * TWO_PI_3).sin_cos();
    DqPair {
        d: 2.0 / 3.0 * (ca * va + cb * vb + cc * vc),
        q: -2.0 / 3.0 * (sa * va + sb * vb + sc * vc),
    }
}

/// Inverse Park transform.
pub fn dq_to_abc(pair: DqPair, theta: f64) -> [f64; 3] {
    let phase = |shift: f64| {
        let (s, c) = (theta - shift).sin_cos();
        c * pair.d - s * pair.q
    };
    [phase(0.0), phase(TWO_PI_3), phase(2.0 * TWO_PI_3)]
}

/// Electrical angle of the grid voltage vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAngle {
    pub theta: f64,
    pub omega: f64,
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Angle of a stiff grid rotating at `omega` from `theta0`.
pub fn ideal_grid_angle(t: f64, omega: f64, theta0: f64) -> GridAngle {
    GridAngle {
        theta: wrap_angle(theta0 + omega * t),
        omega,
    }
}

/// Pole voltages of three averaged legs plus a flag set when any duty had
/// to be clipped into `[0, 1]`.
pub fn averaged_leg_voltage(duty: [f64; 3], vdc: f64) -> ([f64; 3], bool) {
    let mut saturated = false;
    let mut out = [0.0; 3];
    for (o, &d) in out.iter_mut().zip(duty.iter()) {
        let c = d.clamp(0.0, 1.0);
        saturated |= c != d;
        *o = c * vdc;
    }
    (out, saturated)
}

/// Scale applied to `v·i` products in the synchronous frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerConvention {
    /// The bare `v_d·i_d + v_q·i_q` products.
    Unscaled,
    /// The 3/2 factor that the amplitude-invariant transform requires for true watts.
    #[default]
    Physical,
}

impl PowerConvention {
    pub fn factor(self) -> f64 {
        match self {
            PowerConvention::Unscaled => 1.0,
            PowerConvention::Physical => 1.5,
        }
    }
}

/// Active and reactive power of a voltage/current pair, positive when
/// flowing in the direction the current is referenced.
pub fn measure_pq(v: DqPair, i: DqPair, convention: PowerConvention) -> (f64, f64) {
    let k = convention.factor();
    (k * (v.d * i.d + v.q * i.q), k * (v.q * i.d - v.d * i.q))
}

use super::WindError;
use crate::sim::integrate::{integrate_step, Method};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Rotor, gearbox and rating data of one turbine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurbineParams {
    pub rho: f64,
    pub radius: f64,
    pub cp_coeffs: [f64; 6],
    pub gearbox_ratio: f64,
    pub j_turbine: f64,
    pub j_generator: f64,
    pub f_viscous: f64,
    pub lambda_opt: f64,
    pub cp_max: f64,
    pub v_rated: f64,
    pub p_rated: f64,
    pub v_cut_in: f64,
    pub v_cut_out: f64,
    /// Degrees
    pub pitch: f64,
}

impl Default for TurbineParams {
    fn default() -> Self {
        Self {
            rho: 1.225,
            radius: 45.0,
            cp_coeffs: [0.5176, 116.0, 0.4, 5.0, 21.0, 0.0068],
            gearbox_ratio: 100.0,
            j_turbine: 1.4e6,
            j_generator: 114.0,
            f_viscous: 0.0,
            lambda_opt: 7.07,
            cp_max: 0.35,
            v_rated: 13.0,
            p_rated: 3.0e6,
            v_cut_in: 4.0,
            v_cut_out: 25.0,
            pitch: 0.0,
        }
    }
}

impl TurbineParams {
    pub fn validate(&self) -> Result<(), WindError> {
        let cfg = |m: &str| Err(WindError::Config(m.to_string()));
        if !(self.radius > 0.0) {
            return cfg("radius must be positive");
        }
        if !(self.gearbox_ratio > 0.0) {
            return cfg("gearbox_ratio must be positive");
        }
        if !(self.cp_max > 0.0 && self.cp_max < 0.593) {
            return cfg("cp_max must lie in (0, 0.593)");
        }
        if !(self.v_cut_in < self.v_rated && self.v_rated < self.v_cut_out) {
            return cfg("need v_cut_in < v_rated < v_cut_out");
        }
        if !(self.rho > 0.0 && self.j_turbine >= 0.0 && self.j_generator >= 0.0 && self.total_inertia() > 0.0) {
            return cfg("density and inertias must be positive");
        }
        if !(self.f_viscous >= 0.0 && self.lambda_opt > 0.0 && self.p_rated > 0.0) {
            return cfg("f_viscous ≥ 0, lambda_opt > 0 and p_rated > 0 required");
        }
        Ok(())
    }

    /// Inertia referred to the generator shaft.
    pub fn total_inertia(&self) -> f64 {
        self.j_turbine / (self.gearbox_ratio * self.gearbox_ratio) + self.j_generator
    }

    pub fn swept_area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    /// Coefficient of the quadratic MPPT torque law at the generator shaft.
    pub fn k_opt(&self) -> f64 {
        0.5 * self.rho * PI * self.radius.powi(5) * self.cp_max / (self.lambda_opt.powi(3) * self.gearbox_ratio.powi(3))
    }

    /// Generator speed that places the rotor at `lambda_opt`.
    pub fn optimal_generator_speed(&self, v: f64) -> f64 {
        self.gearbox_ratio * self.lambda_opt * v / self.radius
    }

    /// Copy whose `cp_max` equals the power-coefficient curve at `lambda_opt`,
    /// so the torque law and the aerodynamics share one optimum.
    pub fn with_consistent_cp_max(&self) -> Result<Self, WindError> {
        let mut p = self.clone();
        p.cp_max = power_coefficient(self.lambda_opt, self.pitch, &self.cp_coeffs)?;
        Ok(p)
    }
}

pub fn tip_speed_ratio(omega_t: f64, v: f64, radius: f64) -> Result<f64, WindError> {
    if !(v > 0.0) {
        return Err(WindError::Domain(format!("wind speed {v} must be positive")));
    }
    Ok(omega_t * radius / v)
}

/// Power coefficient of the rotor at tip-speed ratio `lambda` and pitch
/// `beta` (degrees), clamped at zero.
pub fn power_coefficient(lambda: f64, beta: f64, c: &[f64; 6]) -> Result<f64, WindError> {
    if !(lambda > 0.0) {
        return Err(WindError::Domain(format!("tip-speed ratio {lambda} must be positive")));
    }
    let a = lambda + 0.08 * beta;
    let b = beta.powi(3) + 1.0;
    if a == 0.0 || b == 0.0 {
        return Err(WindError::Domain(format!("singular λ_i at λ = {lambda}, β = {beta}")));
    }
    let inv_li = 1.0 / a - 0.035 / b;
    let decay = (-c[4] * inv_li).exp();
    let bracket = if decay == 0.0 {
        0.0
    } else {
        c[0] * (c[1] * inv_li - c[2] * beta - c[3]) * decay
    };
    let cp = bracket + c[5] * lambda;
    Ok(if cp.is_finite() { cp.max(0.0) } else { 0.0 })
}

pub fn aero_power(v: f64, cp: f64, params: &TurbineParams) -> f64 {
    0.5 * params.rho * cp * params.swept_area() * v.powi(3)
}

/// Aerodynamic torque referred to the generator shaft at generator speed
/// `omega_m`. Near standstill the `Cp/λ` ratio is evaluated at a small λ so
/// the starting torque stays finite.
pub fn aero_torque(omega_m: f64, v: f64, params: &TurbineParams) -> Result<f64, WindError> {
    if v <= 0.0 {
        return Ok(0.0);
    }
    let omega_t = omega_m / params.gearbox_ratio;
    let lambda = tip_speed_ratio(omega_t, v, params.radius)?.max(1e-6);
    let cp = power_coefficient(lambda, params.pitch, &params.cp_coeffs)?;
    Ok(0.5 * params.rho * PI * params.radius.powi(3) * v * v * cp / lambda / params.gearbox_ratio)
}

/// Shaft speed after one step of `(J_t/G² + J_m)·dΩ/dt + f_v·Ω = T_t − T_m`.
pub fn drivetrain_step(t_turbine: f64, t_em: f64, omega_m: f64, dt: f64, params: &TurbineParams) -> Result<f64, WindError> {
    if !(dt > 0.0) {
        return Err(WindError::Domain(format!("time step {dt} must be positive")));
    }
    let j = params.total_inertia();
    let f = |x: &[f64; 1]| [(t_turbine - t_em - params.f_viscous * x[0]) / j];
    integrate_step(&[omega_m], f, dt, Method::Rk4)
        .map(|x| x[0])
        .map_err(|_| WindError::Diverged {
            channel: "omega_m",
            t: 0.0,
        })
}

/// Generator braking-torque command `K_opt·Ω²`.
pub fn mppt_reference_torque(omega_m: f64, params: &TurbineParams) -> f64 {
    params.k_opt() * omega_m * omega_m
}

/// Steady-state electrical output envelope used by hourly runs.
pub fn turbine_quasi_static_power(v_hub: f64, params: &TurbineParams) -> f64 {
    if v_hub < params.v_cut_in || v_hub > params.v_cut_out {
        0.0
    } else {
        aero_power(v_hub, params.cp_max, params).min(params.p_rated)
    }
}

/// Generator speed at which the quadratic torque law balances the
/// aerodynamic torque at wind `v`.
pub fn k_opt_equilibrium_speed(v: f64, params: &TurbineParams) -> Result<f64, WindError> {
    let net =
        |w: f64| -> Result<f64, WindError> { Ok(aero_torque(w, v, params)? - mppt_reference_torque(w, params) - params.f_viscous * w) };
    // Bracket from the optimal-TSR speed upwards; the quadratic law dominates eventually.
    let mut lo = 0.2 * params.optimal_generator_speed(v);
    let mut hi = 2.0 * params.optimal_generator_speed(v);
    if net(lo)? <= 0.0 {
        return Err(WindError::Domain("no torque-law equilibrium: aerodynamic torque too small".into()));
    }
    while net(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(WindError::Domain("no torque-law equilibrium found".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if net(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

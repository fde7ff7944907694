use super::WindError;
use crate::control::{measure_pq, DqPair, PowerConvention};
use crate::pv_chain::phase_amplitude;
use crate::sim::integrate::{integrate_step, Method};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Sign of the speed-voltage term in the rotor q-axis equation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotorCoupling {
    /// `v_rq = R_r·i_rq + dφ_rq/dt + ω_r·φ_rd`, mirroring the stator pair.
    #[default]
    Standard,
    /// Both rotor rows carry `−ω_r·φ`.
    AsPrinted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DfigParams {
    pub r_s: f64,
    pub r_r: f64,
    pub l_fs: f64,
    pub l_fr: f64,
    pub l_m: f64,
    pub m_ratio: f64,
    pub pole_pairs: u32,
    pub omega_s: f64,
    /// Stator line-to-line RMS voltage.
    pub v_s_ll_rms: f64,
    pub rotor_coupling: RotorCoupling,
}

impl Default for DfigParams {
    fn default() -> Self {
        Self {
            r_s: 2.97e-3,
            r_r: 3.82e-3,
            l_fs: 121e-6,
            l_fr: 57.3e-6,
            l_m: 12.12e-3,
            m_ratio: 1.0,
            pole_pairs: 2,
            omega_s: 2.0 * PI * 50.0,
            v_s_ll_rms: 690.0,
            rotor_coupling: RotorCoupling::Standard,
        }
    }
}

impl DfigParams {
    pub fn l_s(&self) -> f64 {
        self.l_fs + self.l_m
    }

    pub fn l_r(&self) -> f64 {
        self.l_fr + self.m_ratio * self.m_ratio * self.l_m
    }

    /// Mutual inductance `m·L_m`.
    pub fn mutual(&self) -> f64 {
        self.m_ratio * self.l_m
    }

    pub fn sigma(&self) -> f64 {
        1.0 - self.mutual().powi(2) / (self.l_s() * self.l_r())
    }

    /// d-q magnitude of the stator voltage (phase amplitude).
    pub fn v_sq(&self) -> f64 {
        phase_amplitude(self.v_s_ll_rms)
    }

    pub fn synchronous_mechanical_speed(&self) -> f64 {
        self.omega_s / self.pole_pairs as f64
    }

    pub fn validate(&self) -> Result<(), WindError> {
        let positive = [
            ("r_s", self.r_s),
            ("r_r", self.r_r),
            ("l_fs", self.l_fs),
            ("l_fr", self.l_fr),
            ("l_m", self.l_m),
            ("m_ratio", self.m_ratio),
            ("omega_s", self.omega_s),
            ("v_s_ll_rms", self.v_s_ll_rms),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(WindError::Config(format!("{name} must be positive")));
            }
        }
        if self.pole_pairs == 0 {
            return Err(WindError::Config("pole_pairs must be at least 1".into()));
        }
        let s = self.sigma();
        if !(s > 1e-9 && s < 1.0) {
            return Err(WindError::Config(format!(
                "leakage coefficient σ = {s} outside (0, 1): inductance matrix singular"
            )));
        }
        Ok(())
    }
}

/// Flux linkages implied by the currents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DfigFluxes {
    pub sd: f64,
    pub sq: f64,
    pub rd: f64,
    pub rq: f64,
}

/// Electrical and mechanical state; currents are the integrated quantities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DfigState {
    pub i_sd: f64,
    pub i_sq: f64,
    pub i_rd: f64,
    pub i_rq: f64,
    pub omega_m: f64,
    pub theta_s: f64,
    pub theta_r: f64,
}

impl DfigState {
    pub fn fluxes(&self, p: &DfigParams) -> DfigFluxes {
        let (ls, lr, m) = (p.l_s(), p.l_r(), p.mutual());
        DfigFluxes {
            sd: ls * self.i_sd + m * self.i_rd,
            sq: ls * self.i_sq + m * self.i_rq,
            rd: lr * self.i_rd + m * self.i_sd,
            rq: lr * self.i_rq + m * self.i_sq,
        }
    }

    pub fn i_s(&self) -> DqPair {
        DqPair::new(self.i_sd, self.i_sq)
    }

    pub fn i_r(&self) -> DqPair {
        DqPair::new(self.i_rd, self.i_rq)
    }

    pub fn currents(&self) -> [f64; 4] {
        [self.i_sd, self.i_sq, self.i_rd, self.i_rq]
    }

    pub fn with_currents(mut self, c: &[f64]) -> Self {
        self.i_sd = c[0];
        self.i_sq = c[1];
        self.i_rd = c[2];
        self.i_rq = c[3];
        self
    }

    /// Slip angular frequency `ω_s − p·Ω_m`.
    pub fn omega_r(&self, p: &DfigParams) -> f64 {
        p.omega_s - p.pole_pairs as f64 * self.omega_m
    }
}

/// Time derivatives of `[i_sd, i_sq, i_rd, i_rq]` at mechanical speed `omega_m`.
pub fn dfig_current_derivatives(c: &[f64; 4], omega_m: f64, v_s: DqPair, v_r: DqPair, p: &DfigParams) -> [f64; 4] {
    let (ls, lr, m) = (p.l_s(), p.l_r(), p.mutual());
    let phi_sd = ls * c[0] + m * c[2];
    let phi_sq = ls * c[1] + m * c[3];
    let phi_rd = lr * c[2] + m * c[0];
    let phi_rq = lr * c[3] + m * c[1];
    let w_s = p.omega_s;
    let w_r = p.omega_s - p.pole_pairs as f64 * omega_m;
    let dphi_sd = v_s.d - p.r_s * c[0] + w_s * phi_sq;
    let dphi_sq = v_s.q - p.r_s * c[1] - w_s * phi_sd;
    let dphi_rd = v_r.d - p.r_r * c[2] + w_r * phi_rq;
    let dphi_rq = match p.rotor_coupling {
        RotorCoupling::Standard => v_r.q - p.r_r * c[3] - w_r * phi_rd,
        RotorCoupling::AsPrinted => v_r.q - p.r_r * c[3] + w_r * phi_rd,
    };
    let det = ls * lr - m * m;
    [
        (lr * dphi_sd - m * dphi_rd) / det,
        (lr * dphi_sq - m * dphi_rq) / det,
        (ls * dphi_rd - m * dphi_sd) / det,
        (ls * dphi_rq - m * dphi_sq) / det,
    ]
}

/// One electrical step at constant mechanical speed.
pub fn dfig_electrical_step(state: &DfigState, v_s: DqPair, v_r: DqPair, dt: f64, p: &DfigParams) -> Result<DfigState, WindError> {
    if !(dt > 0.0) {
        return Err(WindError::Domain(format!("time step {dt} must be positive")));
    }
    p.validate()?;
    let w = state.omega_m;
    let c = integrate_step(&state.currents(), |c| dfig_current_derivatives(c, w, v_s, v_r, p), dt, Method::Rk4).map_err(|f| {
        WindError::Diverged {
            channel: ["i_sd", "i_sq", "i_rd", "i_rq"][f.channel],
            t: 0.0,
        }
    })?;
    let mut next = state.with_currents(&c);
    next.theta_s = crate::control::wrap_angle(state.theta_s + p.omega_s * dt);
    next.theta_r = crate::control::wrap_angle(state.theta_r + state.omega_r(p) * dt);
    Ok(next)
}

/// One step with the rotor winding open (`i_r ≡ 0`), leaving only the stator circuit.
pub fn dfig_open_rotor_step(state: &DfigState, v_s: DqPair, dt: f64, p: &DfigParams) -> Result<DfigState, WindError> {
    let ls = p.l_s();
    let f = |c: &[f64; 2]| {
        [
            (v_s.d - p.r_s * c[0] + p.omega_s * ls * c[1]) / ls,
            (v_s.q - p.r_s * c[1] - p.omega_s * ls * c[0]) / ls,
        ]
    };
    let c = integrate_step(&[state.i_sd, state.i_sq], f, dt, Method::Rk4).map_err(|e| WindError::Diverged {
        channel: ["i_sd", "i_sq"][e.channel],
        t: 0.0,
    })?;
    Ok(DfigState {
        i_sd: c[0],
        i_sq: c[1],
        i_rd: 0.0,
        i_rq: 0.0,
        theta_s: crate::control::wrap_angle(state.theta_s + p.omega_s * dt),
        ..*state
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DfigPowers {
    pub p_s: f64,
    pub q_s: f64,
    pub p_r: f64,
    pub q_r: f64,
}

/// Stator and rotor powers, positive when absorbed by the machine.
pub fn dfig_powers(v_s: DqPair, v_r: DqPair, i_s: DqPair, i_r: DqPair, convention: PowerConvention) -> DfigPowers {
    let (p_s, q_s) = measure_pq(v_s, i_s, convention);
    let (p_r, q_r) = measure_pq(v_r, i_r, convention);
    DfigPowers { p_s, q_s, p_r, q_r }
}

/// Electromagnetic torque from rotor currents and stator flux, positive
/// when motoring.
pub fn electromagnetic_torque(state: &DfigState, p: &DfigParams, convention: PowerConvention) -> f64 {
    let phi = state.fluxes(p);
    convention.factor() * p.pole_pairs as f64 * (p.mutual() / p.l_s()) * (phi.sq * state.i_rd - phi.sd * state.i_rq)
}

/// Same torque from stator flux and stator currents.
pub fn electromagnetic_torque_stator_form(state: &DfigState, p: &DfigParams, convention: PowerConvention) -> f64 {
    let phi = state.fluxes(p);
    convention.factor() * p.pole_pairs as f64 * (phi.sd * state.i_sq - phi.sq * state.i_sd)
}

use super::{DfigParams, DfigState, WindError};
use crate::control::{DqPair, PiGains, PiState, PowerConvention};
use crate::pv_chain::RlFilterParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcBusState {
    pub v_dc: f64,
    pub capacitance: f64,
}

impl DcBusState {
    pub fn energy(&self) -> f64 {
        0.5 * self.capacitance * self.v_dc * self.v_dc
    }
}

/// Bus voltage after exchanging `p_rsc` (in) and `p_gsc` (out) for `dt`.
/// The stored energy is advanced exactly, so constant powers are integrated
/// without truncation error.
pub fn dc_bus_step(bus: &DcBusState, p_rsc: f64, p_gsc: f64, dt: f64) -> Result<f64, WindError> {
    if !(dt > 0.0 && bus.v_dc > 0.0 && bus.capacitance > 0.0) {
        return Err(WindError::Domain("dc_bus_step needs dt > 0, v_dc > 0 and C > 0".into()));
    }
    let e = bus.energy() + (p_rsc - p_gsc) * dt;
    if !(e > 0.0) {
        return Err(WindError::BusCollapse { t: dt });
    }
    Ok((2.0 * e / bus.capacitance).sqrt())
}

/// Rotor current-loop gains for closed-loop response time `t_r`.
pub fn rotor_loop_gains(p: &DfigParams, t_r: f64) -> PiGains {
    PiGains::new(3.0 * p.sigma() * p.l_r() / t_r, 3.0 * p.r_r / t_r)
}

/// Filter current-loop gains for closed-loop response time `t_rf`.
pub fn filter_loop_gains(f: &RlFilterParams, t_rf: f64) -> PiGains {
    PiGains::new(3.0 * f.l_f / t_rf, 3.0 * f.r_f / t_rf)
}

/// Gain values printed alongside their formulas in the machine data table.
pub const TABLE_K_PR: f64 = 0.01062;
pub const TABLE_K_IR: f64 = 0.2292;
pub const TABLE_K_PF: f64 = 0.3;
pub const TABLE_K_IF: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainCheck {
    pub computed: f64,
    pub stated: f64,
    pub relative_gap: f64,
    pub within_1pct: bool,
}

impl GainCheck {
    fn new(computed: f64, stated: f64) -> Self {
        let relative_gap = (computed - stated).abs() / stated.abs();
        Self {
            computed,
            stated,
            relative_gap,
            within_1pct: relative_gap <= 0.01,
        }
    }
}

/// Recomputes the current-loop gains from the machine and filter data and
/// compares them with the tabulated values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainFormulaReport {
    pub sigma: f64,
    pub k_pr: GainCheck,
    pub k_ir: GainCheck,
    pub k_pf: GainCheck,
    pub k_if: GainCheck,
}

pub fn gain_formula_report(p: &DfigParams, f: &RlFilterParams, t_r: f64, t_rf: f64) -> GainFormulaReport {
    let r = rotor_loop_gains(p, t_r);
    let g = filter_loop_gains(f, t_rf);
    GainFormulaReport {
        sigma: p.sigma(),
        k_pr: GainCheck::new(r.kp, TABLE_K_PR),
        k_ir: GainCheck::new(r.ki, TABLE_K_IR),
        k_pf: GainCheck::new(g.kp, TABLE_K_PF),
        k_if: GainCheck::new(g.ki, TABLE_K_IF),
    }
}

/// Rotor current references for a motor-convention torque `t_ref` and a
/// stator reactive-power reference, given the estimated stator d flux.
pub fn rotor_current_references(
    t_ref: f64,
    q_s_ref: f64,
    phi_sd_est: f64,
    v_sq: f64,
    p: &DfigParams,
    convention: PowerConvention,
) -> Result<DqPair, WindError> {
    if phi_sd_est == 0.0 || !phi_sd_est.is_finite() {
        return Err(WindError::Reference("estimated stator flux is zero".into()));
    }
    if v_sq == 0.0 {
        return Err(WindError::Reference("stator q voltage is zero".into()));
    }
    let k = convention.factor();
    let (ls, m, np) = (p.l_s(), p.mutual(), p.pole_pairs as f64);
    Ok(DqPair {
        d: phi_sd_est / m - ls * q_s_ref / (k * m * v_sq),
        q: -ls * t_ref / (k * np * m * phi_sd_est),
    })
}

/// Rotor-side converter: two decoupled current loops with speed-voltage
/// feed-forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RscController {
    pub pi_d: PiState,
    pub pi_q: PiState,
    pub gains: PiGains,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RscOutput {
    pub v_r: DqPair,
    pub i_r_ref: DqPair,
    pub phi_sd_est: f64,
}

impl RscController {
    pub fn new(gains: PiGains, v_limit: f64) -> Self {
        Self {
            pi_d: PiState::bounded(-v_limit, v_limit),
            pi_q: PiState::bounded(-v_limit, v_limit),
            gains,
        }
    }

    /// Speed-voltage terms added to the PI outputs.
    pub fn feedforward(state: &DfigState, phi_sd_est: f64, p: &DfigParams) -> DqPair {
        let w_r = state.omega_r(p);
        let slr = p.sigma() * p.l_r();
        DqPair {
            d: -slr * w_r * state.i_rq,
            q: slr * w_r * state.i_rd + w_r * p.mutual() / p.l_s() * phi_sd_est,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        t_ref: f64,
        q_s_ref: f64,
        state: &DfigState,
        v_sq: f64,
        ts: f64,
        p: &DfigParams,
        convention: PowerConvention,
    ) -> Result<RscOutput, WindError> {
        let phi_sd_est = p.l_s() * state.i_sd + p.mutual() * state.i_rd;
        let i_ref = rotor_current_references(t_ref, q_s_ref, phi_sd_est, v_sq, p, convention)?;
        let ud = self.pi_d.step(&self.gains, i_ref.d - state.i_rd, ts);
        let uq = self.pi_q.step(&self.gains, i_ref.q - state.i_rq, ts);
        let ff = Self::feedforward(state, phi_sd_est, p);
        Ok(RscOutput {
            v_r: DqPair::new(ud + ff.d, uq + ff.q),
            i_r_ref: i_ref,
            phi_sd_est,
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn rsc_control_step(
    t_ref: f64,
    q_s_ref: f64,
    state: &DfigState,
    rsc: &mut RscController,
    ts: f64,
    p: &DfigParams,
    convention: PowerConvention,
) -> Result<DqPair, WindError> {
    rsc.step(t_ref, q_s_ref, state, p.v_sq(), ts, p, convention).map(|o| o.v_r)
}

/// Grid-side converter: outer DC-voltage loop in per unit, inner filter
/// current loops in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GscState {
    pub i_fd: f64,
    pub i_fq: f64,
    pub filter: RlFilterParams,
    pub pi_vdc: PiState,
    pub pi_id: PiState,
    pub pi_iq: PiState,
    pub current_gains: PiGains,
    pub voltage_gains: PiGains,
    /// Voltage base of the outer loop error, V.
    pub v_base: f64,
    /// Power base of the outer loop output, W.
    pub p_base: f64,
    pub convention: PowerConvention,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GscOutput {
    pub v_f: DqPair,
    pub i_f_ref: DqPair,
}

impl GscState {
    pub fn current_base(&self, v_sq: f64) -> f64 {
        self.p_base / (self.convention.factor() * v_sq)
    }
}

/// One sample of the grid-side controller. `p_rsc_ff` is the rotor-side
/// power entering the bus; when given it is fed forward into the q current
/// reference so the bus does not have to absorb the rotor transient.
#[allow(clippy::too_many_arguments)]
pub fn gsc_control_step(
    v_dc_ref: f64,
    bus: &DcBusState,
    gsc: &mut GscState,
    q_ref: f64,
    v_sq: f64,
    p_rsc_ff: Option<f64>,
    ts: f64,
) -> Result<GscOutput, WindError> {
    if v_sq == 0.0 {
        return Err(WindError::Reference("grid q voltage is zero".into()));
    }
    let k = gsc.convention.factor();
    let e_v = (v_dc_ref - bus.v_dc) / gsc.v_base;
    let u = gsc.pi_vdc.step(&gsc.voltage_gains, e_v, ts);
    let ff = p_rsc_ff.map_or(0.0, |p| -p / (k * v_sq));
    let i_ref = DqPair::new(q_ref / (k * v_sq), gsc.current_base(v_sq) * u + ff);
    let wl = gsc.filter.omega * gsc.filter.l_f;
    let e_fd = wl * gsc.i_fq;
    let e_fq = -wl * gsc.i_fd + v_sq;
    let ud = gsc.pi_id.step(&gsc.current_gains, i_ref.d - gsc.i_fd, ts);
    let uq = gsc.pi_iq.step(&gsc.current_gains, i_ref.q - gsc.i_fq, ts);
    Ok(GscOutput {
        v_f: DqPair::new(e_fd - ud, e_fq - uq),
        i_f_ref: i_ref,
    })
}

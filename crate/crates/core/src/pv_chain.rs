//! PV power path: boost converter, perturb-and-observe MPPT, averaged
//! inverter, RL grid filter and the d-q power loop, plus a string-level
//! dynamic model that chains them together.

use crate::control::{abc_to_dq, averaged_leg_voltage, dq_to_abc, ideal_grid_angle, measure_pq, DqPair, PiGains, PiState, PowerConvention};
use crate::pv::{DiodeEquation, PvArrayLayout, PvError, PvModuleParams, PvOperatingConditions};
use crate::sim::integrate::{integrate_step, Method, StepFault};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

pub const GRID_OMEGA_50HZ: f64 = 2.0 * PI * 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Pv(#[from] PvError),
    #[error("state `{channel}` diverged at t = {t} s")]
    Diverged { channel: &'static str, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    pub l: f64,
    pub c: f64,
    pub r_load: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            l: 5e-3,
            c: 470e-6,
            r_load: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoostState {
    pub i_l: f64,
    pub v_c: f64,
}

/// Averaged boost converter feeding a resistive load.
pub fn boost_derivatives(state: &BoostState, v_in: f64, duty: f64, params: &BoostParams) -> Result<(f64, f64), ChainError> {
    if !(0.0..1.0).contains(&duty) {
        return Err(ChainError::Domain(format!("boost duty {duty} outside [0, 1)")));
    }
    let off = 1.0 - duty;
    Ok((
        (v_in - state.v_c * off) / params.l,
        (state.i_l * off - state.v_c / params.r_load) / params.c,
    ))
}

/// Equilibrium of the resistively loaded boost.
pub fn boost_equilibrium(v_in: f64, duty: f64, params: &BoostParams) -> BoostState {
    let v_c = v_in / (1.0 - duty);
    BoostState {
        i_l: v_c / (params.r_load * (1.0 - duty)),
        v_c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpptState {
    pub v_ref: f64,
    pub prev_power: f64,
    /// Signed last perturbation.
    pub prev_dv: f64,
    pub dv_mag: f64,
}

impl MpptState {
    pub fn new(v_start: f64, dv_mag: f64) -> Self {
        Self {
            v_ref: v_start,
            prev_power: 0.0,
            prev_dv: dv_mag,
            dv_mag,
        }
    }
}

pub fn perturb_observe_step(state: &mut MpptState, measured_power: f64) {
    let dp = measured_power - state.prev_power;
    let dir = if state.prev_dv >= 0.0 { 1.0 } else { -1.0 };
    let dir = if dp >= 0.0 { dir } else { -dir };
    let step = dir * state.dv_mag;
    state.v_ref += step;
    state.prev_dv = step;
    state.prev_power = measured_power;
}

/// Phase voltages of the two-level inverter for switch states or duties `s`.
pub fn inverter_phase_voltages(s: [f64; 3], vdc: f64) -> [f64; 3] {
    let h = vdc / 2.0 / 3.0;
    [
        h * (2.0 * s[0] - s[1] - s[2]),
        h * (-s[0] + 2.0 * s[1] - s[2]),
        h * (-s[0] - s[1] + 2.0 * s[2]),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlFilterParams {
    pub r_f: f64,
    pub l_f: f64,
    pub omega: f64,
}

impl Default for RlFilterParams {
    fn default() -> Self {
        Self {
            r_f: 0.75,
            l_f: 0.75e-3,
            omega: GRID_OMEGA_50HZ,
        }
    }
}

/// Current derivatives of the filter between converter voltage `v_inv` and
/// grid voltage `v_grid`; `i` is positive flowing from the grid into the converter.
pub fn rl_filter_dq_derivatives(i: DqPair, v_inv: DqPair, v_grid: DqPair, params: &RlFilterParams) -> DqPair {
    let wl = params.omega * params.l_f;
    DqPair {
        d: (v_grid.d - v_inv.d - params.r_f * i.d + wl * i.q) / params.l_f,
        q: (v_grid.q - v_inv.q - params.r_f * i.q - wl * i.d) / params.l_f,
    }
}

/// Per-unit bases of the power loop: errors are divided by `p_base`, PI
/// outputs are multiplied by `v_base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLoopScaling {
    pub p_base: f64,
    pub v_base: f64,
}

impl PowerLoopScaling {
    /// Bases for which the decoupled filter has unit DC gain from PI output
    /// to power: `v_base = R_f·p_base/(k·V_g)`.
    pub fn unity_dc_gain(p_base: f64, v_grid_amplitude: f64, filter: &RlFilterParams, convention: PowerConvention) -> Self {
        let i_base = p_base / (convention.factor() * v_grid_amplitude);
        Self {
            p_base,
            v_base: filter.r_f * i_base,
        }
    }
}

/// Grid-voltage and cross-coupling compensation added to the PI outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLoopFeedforward {
    pub v_grid: DqPair,
    pub i: DqPair,
    pub omega_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLoopState {
    /// Reactive-power channel, acting on the d-axis voltage.
    pub pi_d: PiState,
    /// Active-power channel, acting on the q-axis voltage.
    pub pi_q: PiState,
    pub p_ref: f64,
    pub q_ref: f64,
    pub gains: PiGains,
    pub scaling: PowerLoopScaling,
}

impl PowerLoopState {
    pub fn new(gains: PiGains, scaling: PowerLoopScaling, u_limit_pu: f64) -> Self {
        Self {
            pi_d: PiState::bounded(-u_limit_pu, u_limit_pu),
            pi_q: PiState::bounded(-u_limit_pu, u_limit_pu),
            p_ref: 0.0,
            q_ref: 0.0,
            gains,
            scaling,
        }
    }
}

/// Inverter voltage references from the measured grid-side powers. With the
/// grid on the q axis, active power is steered through `V_q` and reactive
/// power through `V_d`.
pub fn power_loop_step(lp: &mut PowerLoopState, measured: (f64, f64), ff: &PowerLoopFeedforward, ts: f64) -> DqPair {
    let e_p = (lp.p_ref - measured.0) / lp.scaling.p_base;
    let e_q = (lp.q_ref - measured.1) / lp.scaling.p_base;
    let u_q = lp.pi_q.step(&lp.gains, e_p, ts);
    let u_d = lp.pi_d.step(&lp.gains, e_q, ts);
    DqPair {
        d: ff.v_grid.d + ff.omega_l * ff.i.q - lp.scaling.v_base * u_d,
        q: ff.v_grid.q - ff.omega_l * ff.i.d - lp.scaling.v_base * u_q,
    }
}

/// Averaged two-level inverter: dq reference → abc → leg duties → pole
/// voltages → neutral-shift removal → dq. Returns the realized voltage and
/// whether any leg saturated.
pub fn modulate(v_ref: DqPair, theta: f64, vdc: f64) -> (DqPair, bool) {
    let abc = dq_to_abc(v_ref, theta);
    let duty = abc.map(|v| 0.5 + v / vdc);
    let (pole, saturated) = averaged_leg_voltage(duty, vdc);
    let v_n0 = (pole[0] + pole[1] + pole[2]) / 3.0;
    let realized = abc_to_dq(pole[0] - v_n0, pole[1] - v_n0, pole[2] - v_n0, theta);
    (realized, saturated)
}

/// Phase amplitude of a line-to-line RMS voltage.
pub fn phase_amplitude(v_ll_rms: f64) -> f64 {
    v_ll_rms * SQRT_2 / 3f64.sqrt()
}

/// One PV string (series sets in parallel) behind a boost stage, an
/// inverter and an RL filter on an ideal grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvChainConfig {
    pub module: PvModuleParams,
    pub layout: PvArrayLayout,
    pub boost_l: f64,
    /// Capacitor across the string terminals.
    pub input_c: f64,
    pub v_dc_link: f64,
    pub filter: RlFilterParams,
    pub v_grid_ll_rms: f64,
    pub gains: PiGains,
    /// Per-unit power base; defaults to the string nameplate.
    pub p_base: Option<f64>,
    /// Perturbation per module, V.
    pub dv_mag: f64,
    /// Seconds between MPPT updates.
    pub mppt_period: f64,
    /// Initial module voltage as a fraction of `v_oc`.
    pub v_start_fraction: f64,
    pub convention: PowerConvention,
}

impl Default for PvChainConfig {
    fn default() -> Self {
        Self {
            module: PvModuleParams::default(),
            layout: PvArrayLayout::default(),
            boost_l: 5e-3,
            input_c: 470e-6,
            v_dc_link: 750.0,
            filter: RlFilterParams::default(),
            v_grid_ll_rms: 400.0,
            gains: PiGains::new(5.6749, 11.6077),
            p_base: None,
            dv_mag: 0.5,
            mppt_period: 0.05,
            v_start_fraction: 0.75,
            convention: PowerConvention::Physical,
        }
    }
}

impl PvChainConfig {
    pub fn string_rating(&self) -> f64 {
        self.module.p_max * self.layout.modules_per_string() as f64
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        self.module.validate()?;
        self.layout.validate()?;
        let positive = [
            ("boost_l", self.boost_l),
            ("input_c", self.input_c),
            ("v_dc_link", self.v_dc_link),
            ("l_f", self.filter.l_f),
            ("v_grid_ll_rms", self.v_grid_ll_rms),
            ("dv_mag", self.dv_mag),
            ("mppt_period", self.mppt_period),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ChainError::Domain(format!("{name} must be positive")));
            }
        }
        if self.filter.r_f <= 0.0 {
            return Err(ChainError::Domain("r_f must be positive for the per-unit power bases".into()));
        }
        if !self.gains.is_valid() {
            return Err(ChainError::Domain("PI gains must be non-negative".into()));
        }
        Ok(())
    }

    pub fn scaling(&self) -> PowerLoopScaling {
        PowerLoopScaling::unity_dc_gain(
            self.p_base.unwrap_or_else(|| self.string_rating()),
            phase_amplitude(self.v_grid_ll_rms),
            &self.filter,
            self.convention,
        )
    }
}

/// Where the active-power reference of the string comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerReference {
    /// Follow the PV output found by P&O.
    Mppt,
    /// Hold a fixed reference, W (negative injects).
    Fixed(f64),
}

/// Instantaneous quantities of one string.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PvChainSample {
    pub v_pv: f64,
    pub i_pv: f64,
    pub p_pv: f64,
    /// Grid-side active power, positive into the converter.
    pub p_grid: f64,
    pub q_grid: f64,
    pub p_ref: f64,
    pub v_ref_module: f64,
    pub i_d: f64,
    pub i_q: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone)]
pub struct PvStringChain {
    pub config: PvChainConfig,
    /// `[v_pv, i_boost, i_d, i_q]`
    pub x: [f64; 4],
    pub mppt: MpptState,
    pub power_loop: PowerLoopState,
    pub reference: PowerReference,
    pub duty: f64,
    pub v_inv: DqPair,
    pub saturated: bool,
    pub t: f64,
    diode: DiodeEquation,
    cond: PvOperatingConditions,
    energy_acc: f64,
    time_acc: f64,
    series: f64,
    parallel: f64,
}

impl PvStringChain {
    pub fn new(config: PvChainConfig, cond: PvOperatingConditions, reference: PowerReference) -> Result<Self, ChainError> {
        config.validate()?;
        let diode = DiodeEquation::new(&cond, &config.module)?;
        let series = config.layout.modules_series_per_set as f64;
        let parallel = config.layout.sets_parallel_per_string as f64;
        let v_mod = config.v_start_fraction * config.module.v_oc;
        let i_mod = diode.current(v_mod)?;
        let v_pv = series * v_mod;
        let i_pv = parallel * i_mod;
        let mut power_loop = PowerLoopState::new(config.gains, config.scaling(), config.v_dc_link / config.scaling().v_base);
        power_loop.p_ref = match reference {
            PowerReference::Mppt => -v_pv * i_pv,
            PowerReference::Fixed(p) => p,
        };
        let mut mppt = MpptState::new(v_mod, config.dv_mag);
        mppt.prev_power = v_mod * i_mod;
        let v_g = DqPair::new(0.0, phase_amplitude(config.v_grid_ll_rms));
        let duty = (1.0 - v_pv / config.v_dc_link).clamp(0.0, 0.95);
        Ok(Self {
            x: [v_pv, i_pv, 0.0, 0.0],
            mppt,
            power_loop,
            reference,
            duty,
            v_inv: v_g,
            saturated: false,
            t: 0.0,
            diode,
            cond,
            energy_acc: 0.0,
            time_acc: 0.0,
            series,
            parallel,
            config,
        })
    }

    pub fn conditions(&self) -> PvOperatingConditions {
        self.cond
    }

    pub fn set_conditions(&mut self, cond: PvOperatingConditions) -> Result<(), ChainError> {
        if cond != self.cond {
            self.diode = DiodeEquation::new(&cond, &self.config.module)?;
            self.cond = cond;
        }
        Ok(())
    }

    pub fn grid_voltage(&self) -> DqPair {
        DqPair::new(0.0, phase_amplitude(self.config.v_grid_ll_rms))
    }

    fn string_current(diode: &DiodeEquation, series: f64, parallel: f64, v_pv: f64) -> f64 {
        match diode.current(v_pv / series) {
            Ok(i) => parallel * i,
            Err(_) => f64::NAN,
        }
    }

    pub fn sample(&self) -> PvChainSample {
        let i_pv = Self::string_current(&self.diode, self.series, self.parallel, self.x[0]);
        let i = DqPair::new(self.x[2], self.x[3]);
        let (p, q) = measure_pq(self.grid_voltage(), i, self.config.convention);
        PvChainSample {
            v_pv: self.x[0],
            i_pv,
            p_pv: self.x[0] * i_pv,
            p_grid: p,
            q_grid: q,
            p_ref: self.power_loop.p_ref,
            v_ref_module: self.mppt.v_ref,
            i_d: i.d,
            i_q: i.q,
            saturated: self.saturated,
        }
    }

    /// Runs the MPPT (at its own cadence), the boost duty law and the power loop.
    pub fn control_step(&mut self, ts: f64) {
        let s = self.sample();
        self.energy_acc += s.p_pv * ts;
        self.time_acc += ts;
        if self.time_acc + 1e-12 >= self.config.mppt_period {
            let p_avg = self.energy_acc / self.time_acc;
            perturb_observe_step(&mut self.mppt, p_avg / (self.series * self.parallel));
            self.mppt.v_ref = self.mppt.v_ref.clamp(0.0, self.config.module.v_oc);
            if let PowerReference::Mppt = self.reference {
                self.power_loop.p_ref = -p_avg;
            }
            self.energy_acc = 0.0;
            self.time_acc = 0.0;
        }
        if let PowerReference::Fixed(p) = self.reference {
            self.power_loop.p_ref = p;
        }
        self.duty = (1.0 - self.series * self.mppt.v_ref / self.config.v_dc_link).clamp(0.0, 0.95);
        let theta = ideal_grid_angle(self.t, self.config.filter.omega, 0.0).theta;
        let i = DqPair::new(self.x[2], self.x[3]);
        let ff = PowerLoopFeedforward {
            v_grid: self.grid_voltage(),
            i,
            omega_l: self.config.filter.omega * self.config.filter.l_f,
        };
        let v_ref = power_loop_step(&mut self.power_loop, (s.p_grid, s.q_grid), &ff, ts);
        let (v_inv, sat) = modulate(v_ref, theta, self.config.v_dc_link);
        self.v_inv = v_inv;
        self.saturated = sat;
    }

    pub fn electrical_step(&mut self, dt: f64, method: Method) -> Result<(), ChainError> {
        let (diode, series, parallel) = (self.diode, self.series, self.parallel);
        let cfg = &self.config;
        let v_g = self.grid_voltage();
        let (v_inv, duty) = (self.v_inv, self.duty);
        let f = |x: &[f64; 4]| {
            let i_pv = Self::string_current(&diode, series, parallel, x[0]);
            let di = rl_filter_dq_derivatives(DqPair::new(x[2], x[3]), v_inv, v_g, &cfg.filter);
            [
                (i_pv - x[1]) / cfg.input_c,
                (x[0] - cfg.v_dc_link * (1.0 - duty)) / cfg.boost_l,
                di.d,
                di.q,
            ]
        };
        self.x = integrate_step(&self.x, f, dt, method).map_err(|StepFault { channel }| ChainError::Diverged {
            channel: ["v_pv", "i_boost", "i_d", "i_q"][channel],
            t: self.t,
        })?;
        self.t += dt;
        Ok(())
    }
}

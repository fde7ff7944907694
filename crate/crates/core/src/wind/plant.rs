use super::{
    aero_torque, dfig_current_derivatives, dfig_powers, electromagnetic_torque, filter_loop_gains, gsc_control_step,
    k_opt_equilibrium_speed, mppt_reference_torque, rotor_loop_gains, tip_speed_ratio, DcBusState, DfigParams, DfigState, GscState,
    RscController, TurbineParams, WindError,
};
use crate::control::{measure_pq, DqPair, PiGains, PiState, PowerConvention};
use crate::pv_chain::{rl_filter_dq_derivatives, RlFilterParams};
use crate::sim::integrate::{integrate_step, Method};
use serde::{Deserialize, Serialize};

/// How the generator torque command is formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MpptStrategy {
    /// PI on the error to the speed that holds `lambda_opt` at the measured wind.
    #[default]
    SpeedPi,
    /// Quadratic law `K_opt·Ω²`, no wind measurement.
    OptimalTorque,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindTurbineConfig {
    pub turbine: TurbineParams,
    pub dfig: DfigParams,
    pub filter: RlFilterParams,
    pub dc_capacitance: f64,
    pub v_dc_ref: f64,
    /// Rotor current-loop response time, s.
    pub t_r: f64,
    /// Filter current-loop response time, s.
    pub t_rf: f64,
    /// Speed loop gains, per unit on synchronous speed and rated torque.
    pub speed_gains: PiGains,
    /// DC-voltage loop gains, per unit on `v_dc_ref` and `gsc_p_base`.
    pub dc_gains: PiGains,
    pub gsc_p_base: f64,
    pub mppt: MpptStrategy,
    pub q_s_ref: f64,
    pub q_f_ref: f64,
    pub rotor_power_feedforward: bool,
    pub convention: PowerConvention,
}

impl Default for WindTurbineConfig {
    fn default() -> Self {
        Self {
            turbine: TurbineParams::default(),
            dfig: DfigParams::default(),
            filter: RlFilterParams {
                r_f: 0.75e-3,
                ..RlFilterParams::default()
            },
            dc_capacitance: 0.038,
            v_dc_ref: 1200.0,
            t_r: 0.05,
            t_rf: 0.01,
            speed_gains: PiGains::new(3.4074, 9.4171),
            dc_gains: PiGains::new(7.6999, 5.019),
            gsc_p_base: 0.9e6,
            mppt: MpptStrategy::SpeedPi,
            q_s_ref: 0.0,
            q_f_ref: 0.0,
            rotor_power_feedforward: true,
            convention: PowerConvention::Physical,
        }
    }
}

impl WindTurbineConfig {
    pub fn validate(&self) -> Result<(), WindError> {
        self.turbine.validate()?;
        self.dfig.validate()?;
        let positive = [
            ("dc_capacitance", self.dc_capacitance),
            ("v_dc_ref", self.v_dc_ref),
            ("t_r", self.t_r),
            ("t_rf", self.t_rf),
            ("gsc_p_base", self.gsc_p_base),
            ("filter.l_f", self.filter.l_f),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(WindError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.speed_gains.is_valid() && self.dc_gains.is_valid()) {
            return Err(WindError::Config("PI gains must be non-negative".into()));
        }
        Ok(())
    }

    pub fn torque_base(&self) -> f64 {
        self.turbine.p_rated / self.dfig.synchronous_mechanical_speed()
    }
}

/// Quantities of one turbine at one instant. Powers follow the load
/// convention (positive into the machine or converter) except
/// `p_out`, which is the net power delivered to the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WindSample {
    pub t: f64,
    pub wind: f64,
    pub omega_m: f64,
    pub omega_ref: f64,
    pub lambda: f64,
    pub t_em: f64,
    pub t_gen_ref: f64,
    pub p_s: f64,
    pub q_s: f64,
    pub p_f: f64,
    pub q_f: f64,
    pub p_out: f64,
    pub q_total: f64,
    pub v_dc: f64,
    pub p_rsc: f64,
    pub p_gsc: f64,
    pub i_rd_ref: f64,
    pub i_rq_ref: f64,
}

const STATE_NAMES: [&str; 10] = [
    "i_sd",
    "i_sq",
    "i_rd",
    "i_rq",
    "omega_m",
    "i_fd",
    "i_fq",
    "v_dc",
    "theta_r",
    "bus_energy",
];

/// A DFIG turbine with its back-to-back converter on an ideal grid.
#[derive(Debug, Clone)]
pub struct WindTurbineSim {
    pub config: WindTurbineConfig,
    /// `[i_sd, i_sq, i_rd, i_rq, Ω_m, i_fd, i_fq, v_dc, θ_r, E]` where `E`
    /// integrates `p_rsc − p_gsc` alongside the bus voltage.
    pub x: [f64; 10],
    pub wind: f64,
    pub t: f64,
    pub v_r: DqPair,
    pub v_f: DqPair,
    pub speed_pi: PiState,
    pub rsc: RscController,
    pub gsc: GscState,
    pub omega_ref: f64,
    pub t_gen_ref: f64,
    pub i_r_ref: DqPair,
    pub initial_bus_energy: f64,
}

impl WindTurbineSim {
    fn v_s(&self) -> DqPair {
        DqPair::new(0.0, self.config.dfig.v_sq())
    }

    pub fn dfig_state(&self) -> DfigState {
        DfigState {
            i_sd: self.x[0],
            i_sq: self.x[1],
            i_rd: self.x[2],
            i_rq: self.x[3],
            omega_m: self.x[4],
            theta_s: 0.0,
            theta_r: self.x[8],
        }
    }

    pub fn bus(&self) -> DcBusState {
        DcBusState {
            v_dc: self.x[7],
            capacitance: self.config.dc_capacitance,
        }
    }

    fn torque_limit(&self, omega: f64) -> f64 {
        let base = self.config.torque_base();
        (self.config.turbine.p_rated / omega.max(1.0)).min(1.5 * base)
    }

    /// Builds the turbine at the steady operating point for wind `v0`,
    /// including controller integrators, so the run starts without a
    /// start-up transient.
    pub fn new(config: WindTurbineConfig, v0: f64) -> Result<Self, WindError> {
        config.validate()?;
        let tp = &config.turbine;
        let dp = &config.dfig;
        let k = config.convention.factor();
        let v_sq = dp.v_sq();
        let omega0 = match config.mppt {
            MpptStrategy::SpeedPi => tp.optimal_generator_speed(v0),
            MpptStrategy::OptimalTorque => k_opt_equilibrium_speed(v0, tp)?,
        };
        let t_gen0 = aero_torque(omega0, v0, tp)? - tp.f_viscous * omega0;
        let np = dp.pole_pairs as f64;
        let (ls, lr, m) = (dp.l_s(), dp.l_r(), dp.mutual());
        // Stator at steady state with i_sd = 0 and φ_sq = 0.
        let mut phi_sd = v_sq / dp.omega_s;
        let mut i_sq = 0.0;
        for _ in 0..100 {
            i_sq = -t_gen0 / (k * np * phi_sd);
            phi_sd = (v_sq - dp.r_s * i_sq) / dp.omega_s;
        }
        let i_rq = -ls * i_sq / m;
        let i_rd = phi_sd / m;
        let omega_r = dp.omega_s - np * omega0;
        let phi_rd = lr * i_rd;
        let phi_rq = lr * i_rq + m * i_sq;
        let v_r = DqPair::new(dp.r_r * i_rd - omega_r * phi_rq, dp.r_r * i_rq + omega_r * phi_rd);
        let i_r = DqPair::new(i_rd, i_rq);
        let p_rsc = -measure_pq(v_r, i_r, config.convention).0;
        // Grid-side filter current that exports p_rsc at the converter terminals.
        let rf = config.filter.r_f;
        let disc = v_sq * v_sq + 4.0 * rf * p_rsc / k;
        if disc < 0.0 {
            return Err(WindError::Config(
                "grid-side filter cannot carry the rotor power at this operating point".into(),
            ));
        }
        let i_fq = if rf > 0.0 {
            (v_sq - disc.sqrt()) / (2.0 * rf)
        } else {
            -p_rsc / (k * v_sq)
        };
        let i_fd = config.q_f_ref / (k * v_sq);
        let wl = config.filter.omega * config.filter.l_f;
        let v_f = DqPair::new(wl * i_fq - rf * i_fd, v_sq - wl * i_fd - rf * i_fq);

        let v_limit = config.v_dc_ref / 2.0;
        let mut rsc = RscController::new(rotor_loop_gains(dp, config.t_r), v_limit);
        let state0 = DfigState {
            i_sd: 0.0,
            i_sq,
            i_rd,
            i_rq,
            omega_m: omega0,
            theta_s: 0.0,
            theta_r: 0.0,
        };
        let ff = RscController::feedforward(&state0, phi_sd, dp);
        rsc.pi_d.preload(&rsc.gains, v_r.d - ff.d);
        rsc.pi_q.preload(&rsc.gains, v_r.q - ff.q);

        let mut gsc = GscState {
            i_fd,
            i_fq,
            filter: config.filter,
            pi_vdc: PiState::bounded(-3.0, 3.0),
            pi_id: PiState::bounded(-v_limit, v_limit),
            pi_iq: PiState::bounded(-v_limit, v_limit),
            current_gains: filter_loop_gains(&config.filter, config.t_rf),
            voltage_gains: config.dc_gains,
            v_base: config.v_dc_ref,
            p_base: config.gsc_p_base,
            convention: config.convention,
        };
        let ff_i = if config.rotor_power_feedforward { -p_rsc / (k * v_sq) } else { 0.0 };
        let cg = gsc.current_gains;
        gsc.pi_vdc.preload(&config.dc_gains, (i_fq - ff_i) / gsc.current_base(v_sq));
        gsc.pi_id.preload(&cg, wl * i_fq - v_f.d);
        gsc.pi_iq.preload(&cg, v_sq - wl * i_fd - v_f.q);

        let mut sim = Self {
            x: [0.0, i_sq, i_rd, i_rq, omega0, i_fd, i_fq, config.v_dc_ref, 0.0, 0.0],
            wind: v0,
            t: 0.0,
            v_r,
            v_f,
            speed_pi: PiState::bounded(0.0, 1.0),
            rsc,
            gsc,
            omega_ref: omega0,
            t_gen_ref: t_gen0,
            i_r_ref: i_r,
            initial_bus_energy: 0.5 * config.dc_capacitance * config.v_dc_ref * config.v_dc_ref,
            config,
        };
        let t_base = sim.config.torque_base();
        sim.speed_pi.u_max = sim.torque_limit(omega0) / t_base;
        let sg = sim.config.speed_gains;
        sim.speed_pi.preload(&sg, t_gen0 / t_base);
        Ok(sim)
    }

    pub fn set_wind(&mut self, v: f64) {
        self.wind = v;
    }

    fn bus_powers(x: &[f64; 10], v_r: DqPair, v_f: DqPair, conv: PowerConvention) -> (f64, f64) {
        let p_r = measure_pq(v_r, DqPair::new(x[2], x[3]), conv).0;
        let p_f = measure_pq(v_f, DqPair::new(x[5], x[6]), conv).0;
        (-p_r, -p_f)
    }

    pub fn sample(&self) -> WindSample {
        let c = &self.config;
        let st = self.dfig_state();
        let v_s = self.v_s();
        let pw = dfig_powers(v_s, self.v_r, st.i_s(), st.i_r(), c.convention);
        let (p_f, q_f) = measure_pq(v_s, DqPair::new(self.x[5], self.x[6]), c.convention);
        let (p_rsc, p_gsc) = Self::bus_powers(&self.x, self.v_r, self.v_f, c.convention);
        let omega_t = self.x[4] / c.turbine.gearbox_ratio;
        WindSample {
            t: self.t,
            wind: self.wind,
            omega_m: self.x[4],
            omega_ref: self.omega_ref,
            lambda: tip_speed_ratio(omega_t, self.wind, c.turbine.radius).unwrap_or(f64::NAN),
            t_em: electromagnetic_torque(&st, &c.dfig, c.convention),
            t_gen_ref: self.t_gen_ref,
            p_s: pw.p_s,
            q_s: pw.q_s,
            p_f,
            q_f,
            p_out: -(pw.p_s + p_f),
            q_total: pw.q_s + q_f,
            v_dc: self.x[7],
            p_rsc,
            p_gsc,
            i_rd_ref: self.i_r_ref.d,
            i_rq_ref: self.i_r_ref.q,
        }
    }

    pub fn control_step(&mut self, ts: f64) -> Result<(), WindError> {
        let omega = self.x[4];
        let t_base = self.config.torque_base();
        let limit = self.torque_limit(omega);
        self.t_gen_ref = match self.config.mppt {
            MpptStrategy::SpeedPi => {
                self.omega_ref = self.config.turbine.optimal_generator_speed(self.wind);
                let w_base = self.config.dfig.synchronous_mechanical_speed();
                self.speed_pi.u_max = limit / t_base;
                let sg = self.config.speed_gains;
                t_base * self.speed_pi.step(&sg, (omega - self.omega_ref) / w_base, ts)
            }
            MpptStrategy::OptimalTorque => {
                self.omega_ref = omega;
                mppt_reference_torque(omega, &self.config.turbine).clamp(0.0, limit)
            }
        };
        let st = self.dfig_state();
        let dp = self.config.dfig.clone();
        let v_limit = self.x[7] / 2.0;
        let out = self.rsc.step(
            -self.t_gen_ref,
            self.config.q_s_ref,
            &st,
            dp.v_sq(),
            ts,
            &dp,
            self.config.convention,
        )?;
        self.v_r = out.v_r.limit_magnitude(v_limit).0;
        self.i_r_ref = out.i_r_ref;

        let (p_rsc, _) = Self::bus_powers(&self.x, self.v_r, self.v_f, self.config.convention);
        self.gsc.i_fd = self.x[5];
        self.gsc.i_fq = self.x[6];
        let ff = self.config.rotor_power_feedforward.then_some(p_rsc);
        let bus = self.bus();
        let g = gsc_control_step(self.config.v_dc_ref, &bus, &mut self.gsc, self.config.q_f_ref, dp.v_sq(), ff, ts)?;
        self.v_f = g.v_f.limit_magnitude(v_limit).0;
        Ok(())
    }

    pub fn electrical_step(&mut self, dt: f64, method: Method) -> Result<(), WindError> {
        let c = &self.config;
        let (v_s, v_r, v_f, wind) = (self.v_s(), self.v_r, self.v_f, self.wind);
        let conv = c.convention;
        let j = c.turbine.total_inertia();
        let f = |x: &[f64; 10]| {
            let cur = [x[0], x[1], x[2], x[3]];
            let di = dfig_current_derivatives(&cur, x[4], v_s, v_r, &c.dfig);
            let st = DfigState {
                i_sd: x[0],
                i_sq: x[1],
                i_rd: x[2],
                i_rq: x[3],
                omega_m: x[4],
                theta_s: 0.0,
                theta_r: 0.0,
            };
            let t_em = electromagnetic_torque(&st, &c.dfig, conv);
            let t_aero = aero_torque(x[4], wind, &c.turbine).unwrap_or(f64::NAN);
            // the generator brakes with −T_em
            let d_omega = (t_aero + t_em - c.turbine.f_viscous * x[4]) / j;
            let dif = rl_filter_dq_derivatives(DqPair::new(x[5], x[6]), v_f, v_s, &c.filter);
            let (p_in, p_out) = Self::bus_powers(x, v_r, v_f, conv);
            let dv = (p_in - p_out) / (c.dc_capacitance * x[7]);
            let w_r = c.dfig.omega_s - c.dfig.pole_pairs as f64 * x[4];
            [di[0], di[1], di[2], di[3], d_omega, dif.d, dif.q, dv, w_r, p_in - p_out]
        };
        let next = integrate_step(&self.x, f, dt, method).map_err(|e| WindError::Diverged {
            channel: STATE_NAMES[e.channel],
            t: self.t,
        })?;
        if next[7] <= 0.0 {
            return Err(WindError::BusCollapse { t: self.t + dt });
        }
        self.x = next;
        self.x[8] = crate::control::wrap_angle(self.x[8]);
        self.t += dt;
        Ok(())
    }

    /// `∫(p_rsc − p_gsc)dt` since construction.
    pub fn bus_energy_in(&self) -> f64 {
        self.x[9]
    }

    /// `½·C·(v_dc² − v_dc0²)`
    pub fn bus_energy_change(&self) -> f64 {
        self.bus().energy() - self.initial_bus_energy
    }
}

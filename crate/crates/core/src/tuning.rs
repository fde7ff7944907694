//! Closed-loop fitness scenarios for PI tuning and the tuning driver.
//!
//! Each scenario simulates one regulator with candidate gains `[k_p, k_i]`
//! and scores it by the mean squared tracking error over the horizon.

use crate::control::{measure_pq, pi_step, DqPair, PiGains, PiState};
use crate::pso::{minimize, Bounds, Fitness, PsoError, PsoResult, PsoSchedule};
use crate::pv_chain::{
    modulate, phase_amplitude, power_loop_step, rl_filter_dq_derivatives, PowerLoopFeedforward, PowerLoopState, PvChainConfig,
};
use crate::sim::integrate::{integrate_step, Method};
use crate::wind::{aero_torque, WindTurbineConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuneError {
    #[error("invalid fitness scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Pso(#[from] PsoError),
}

/// Piecewise-constant command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSignal {
    Constant { value: f64 },
    Step { at: f64, before: f64, after: f64 },
}

impl ReferenceSignal {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Step { at, before, after } => {
                if t < at {
                    before
                } else {
                    after
                }
            }
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            Self::Constant { value } => value.is_finite(),
            Self::Step { at, before, after } => at.is_finite() && before.is_finite() && after.is_finite(),
        }
    }
}

/// Closed-loop recipes. The reference is in the units noted per variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// Output equals the reference regardless of gains.
    PassThrough,
    /// `y' = −a·y + b·u` under PI control; tracks the reference directly.
    FirstOrder { a: f64, b: f64 },
    /// Same plant, scored against the response obtained with the PI that
    /// places the closed-loop poles at `(ζ, ω_n)`:
    /// `k_p = (2ζω_n − a)/b`, `k_i = ω_n²/b`.
    PoleSurrogate { a: f64, b: f64, zeta: f64, omega_n: f64 },
    /// Grid-side active/reactive power loop of one PV string on an ideal DC
    /// link. Reference: active power in per unit of the string rating
    /// (negative injects).
    PvPowerLoop {
        #[serde(default)]
        chain: Box<PvChainConfig>,
    },
    /// Drivetrain speed loop with the rotor current loop reduced to a
    /// first-order torque lag. Reference: hub wind speed, m/s.
    SpeedLoop {
        #[serde(default)]
        plant: Box<WindTurbineConfig>,
    },
    /// DC-bus voltage loop with the grid-side current loop reduced to a
    /// first-order power lag. Reference: bus voltage, V.
    DcBusLoop {
        #[serde(default)]
        plant: Box<WindTurbineConfig>,
        /// Constant rotor-side power into the bus, W.
        #[serde(default)]
        p_rsc: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitnessSpec {
    pub scenario: Scenario,
    pub reference: ReferenceSignal,
    /// Simulated time, s.
    pub horizon: f64,
    /// Controller sample time, s.
    pub ts: f64,
}

impl FitnessSpec {
    pub fn pole_surrogate(a: f64, b: f64, zeta: f64, omega_n: f64) -> Self {
        Self {
            scenario: Scenario::PoleSurrogate { a, b, zeta, omega_n },
            reference: ReferenceSignal::Constant { value: 1.0 },
            horizon: 5.0,
            ts: 1e-3,
        }
    }

    pub fn pv_power_loop() -> Self {
        Self {
            scenario: Scenario::PvPowerLoop { chain: Box::default() },
            reference: ReferenceSignal::Step {
                at: 0.01,
                before: 0.0,
                after: -1.0,
            },
            horizon: 0.5,
            ts: 1e-4,
        }
    }

    pub fn speed_loop() -> Self {
        Self {
            scenario: Scenario::SpeedLoop { plant: Box::default() },
            reference: ReferenceSignal::Step {
                at: 1.0,
                before: 8.0,
                after: 10.0,
            },
            horizon: 10.0,
            ts: 1e-3,
        }
    }

    pub fn dc_bus_loop() -> Self {
        Self {
            scenario: Scenario::DcBusLoop {
                plant: Box::default(),
                p_rsc: 0.0,
            },
            reference: ReferenceSignal::Step {
                at: 0.05,
                before: 1150.0,
                after: 1200.0,
            },
            horizon: 1.0,
            ts: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<(), TuneError> {
        let bad = |m: &str| Err(TuneError::Config(m.into()));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive");
        }
        if !(self.ts > 0.0 && self.ts <= self.horizon) {
            return bad("ts must be positive and not exceed the horizon");
        }
        if !self.reference.is_finite() {
            return bad("reference must be finite");
        }
        match &self.scenario {
            Scenario::PassThrough => {}
            Scenario::FirstOrder { a, b } => {
                if !(a.is_finite() && b.is_finite() && *b != 0.0) {
                    return bad("first-order plant needs finite a and nonzero b");
                }
            }
            Scenario::PoleSurrogate { a, b, zeta, omega_n } => {
                if !(a.is_finite() && b.is_finite() && *b != 0.0 && *zeta > 0.0 && *omega_n > 0.0) {
                    return bad("pole surrogate needs nonzero b and positive zeta, omega_n");
                }
            }
            Scenario::PvPowerLoop { chain } => chain.validate().map_err(|e| TuneError::Config(e.to_string()))?,
            Scenario::SpeedLoop { plant } | Scenario::DcBusLoop { plant, .. } => {
                plant.validate().map_err(|e| TuneError::Config(e.to_string()))?
            }
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.horizon / self.ts).round().max(1.0) as usize
    }
}

/// Gains that place the surrogate's closed-loop poles at `(ζ, ω_n)`.
pub fn pole_placement_gains(a: f64, b: f64, zeta: f64, omega_n: f64) -> PiGains {
    PiGains::new((2.0 * zeta * omega_n - a) / b, omega_n * omega_n / b)
}

fn gains_from(x: &[f64]) -> Result<PiGains, TuneError> {
    match x {
        [kp, ki] => Ok(PiGains::new(*kp, *ki)),
        _ => Err(TuneError::Config(format!("expected 2 gains, got {}", x.len()))),
    }
}

/// Mean squared error over `steps` samples; `+∞` once any sample is not finite.
struct MseAccumulator {
    sum: f64,
    n: usize,
}

impl MseAccumulator {
    fn new() -> Self {
        Self { sum: 0.0, n: 0 }
    }

    fn push(&mut self, e: f64) -> bool {
        if !e.is_finite() {
            self.sum = f64::INFINITY;
            return false;
        }
        self.sum += e * e;
        self.n += 1;
        true
    }

    fn mean(&self) -> f64 {
        if self.sum.is_infinite() || self.n == 0 {
            f64::INFINITY
        } else {
            self.sum / self.n as f64
        }
    }
}

fn first_order_response(a: f64, b: f64, gains: &PiGains, spec: &FitnessSpec) -> Vec<f64> {
    let mut y = [0.0];
    let mut pi = PiState::unbounded();
    let mut out = Vec::with_capacity(spec.steps());
    for k in 0..spec.steps() {
        let t = k as f64 * spec.ts;
        let u = pi_step(&mut pi, gains, spec.reference.at(t) - y[0], spec.ts);
        match integrate_step(&y, |s| [-a * s[0] + b * u], spec.ts, Method::Rk4) {
            Ok(n) => y = n,
            Err(_) => {
                out.push(f64::NAN);
                return out;
            }
        }
        out.push(y[0]);
    }
    out
}

fn mse_first_order(a: f64, b: f64, gains: &PiGains, spec: &FitnessSpec) -> f64 {
    let y = first_order_response(a, b, gains, spec);
    let mut acc = MseAccumulator::new();
    for (k, yk) in y.iter().enumerate() {
        let r = spec.reference.at((k + 1) as f64 * spec.ts);
        if !acc.push(r - yk) {
            break;
        }
    }
    acc.mean()
}

fn mse_pole_surrogate(a: f64, b: f64, zeta: f64, omega_n: f64, gains: &PiGains, spec: &FitnessSpec) -> f64 {
    let target = first_order_response(a, b, &pole_placement_gains(a, b, zeta, omega_n), spec);
    let y = first_order_response(a, b, gains, spec);
    let mut acc = MseAccumulator::new();
    for (k, t) in target.iter().enumerate() {
        if !acc.push(t - y.get(k).copied().unwrap_or(f64::NAN)) {
            break;
        }
    }
    acc.mean()
}

fn mse_pv_power_loop(chain: &PvChainConfig, gains: &PiGains, spec: &FitnessSpec) -> f64 {
    let scaling = chain.scaling();
    let mut lp = PowerLoopState::new(*gains, scaling, chain.v_dc_link / scaling.v_base);
    let v_g = DqPair::new(0.0, phase_amplitude(chain.v_grid_ll_rms));
    let omega_l = chain.filter.omega * chain.filter.l_f;
    let mut x = [0.0, 0.0];
    let mut acc = MseAccumulator::new();
    for k in 0..spec.steps() {
        let t = k as f64 * spec.ts;
        let i = DqPair::new(x[0], x[1]);
        let (p, q) = measure_pq(v_g, i, chain.convention);
        lp.p_ref = spec.reference.at(t) * scaling.p_base;
        let ff = PowerLoopFeedforward { v_grid: v_g, i, omega_l };
        let v_ref = power_loop_step(&mut lp, (p, q), &ff, spec.ts);
        let theta = chain.filter.omega * t;
        let (v_inv, _) = modulate(v_ref, theta, chain.v_dc_link);
        let f = |s: &[f64; 2]| {
            let d = rl_filter_dq_derivatives(DqPair::new(s[0], s[1]), v_inv, v_g, &chain.filter);
            [d.d, d.q]
        };
        match integrate_step(&x, f, spec.ts, Method::Rk4) {
            Ok(n) => x = n,
            Err(_) => return f64::INFINITY,
        }
        let (p, q) = measure_pq(v_g, DqPair::new(x[0], x[1]), chain.convention);
        let e_p = (spec.reference.at(t + spec.ts) * scaling.p_base - p) / scaling.p_base;
        let e_q = q / scaling.p_base;
        if !acc.push(e_p.hypot(e_q)) {
            break;
        }
    }
    acc.mean()
}

fn mse_speed_loop(plant: &WindTurbineConfig, gains: &PiGains, spec: &FitnessSpec) -> f64 {
    let tp = &plant.turbine;
    let w_base = plant.dfig.synchronous_mechanical_speed();
    let t_base = plant.torque_base();
    let j = tp.total_inertia();
    let v0 = spec.reference.at(0.0);
    let omega0 = tp.optimal_generator_speed(v0);
    let Ok(t0) = aero_torque(omega0, v0, tp) else {
        return f64::INFINITY;
    };
    let mut x = [omega0, t0 - tp.f_viscous * omega0];
    let mut pi = PiState::bounded(0.0, 1.5);
    if gains.ki > 0.0 {
        pi.preload(gains, x[1] / t_base);
    }
    let mut acc = MseAccumulator::new();
    for k in 0..spec.steps() {
        let t = k as f64 * spec.ts;
        let v = spec.reference.at(t);
        let limit = (tp.p_rated / x[0].max(1.0)).min(1.5 * t_base);
        pi.u_max = (limit / t_base).max(1e-9);
        let e = (x[0] - tp.optimal_generator_speed(v)) / w_base;
        let t_ref = t_base * pi.step(gains, e, spec.ts);
        let f = |s: &[f64; 2]| {
            let ta = aero_torque(s[0], v, tp).unwrap_or(f64::NAN);
            [(ta - s[1] - tp.f_viscous * s[0]) / j, (t_ref - s[1]) / plant.t_r]
        };
        match integrate_step(&x, f, spec.ts, Method::Rk4) {
            Ok(n) => x = n,
            Err(_) => return f64::INFINITY,
        }
        let e = (x[0] - tp.optimal_generator_speed(spec.reference.at(t + spec.ts))) / w_base;
        if !acc.push(e) {
            break;
        }
    }
    acc.mean()
}

fn mse_dc_bus_loop(plant: &WindTurbineConfig, p_rsc: f64, gains: &PiGains, spec: &FitnessSpec) -> f64 {
    let c = plant.dc_capacitance;
    let v_base = plant.v_dc_ref;
    let p_base = plant.gsc_p_base;
    // x = [v_dc, power drawn from the grid into the bus]
    let mut x = [spec.reference.at(0.0), -p_rsc];
    let mut pi = PiState::bounded(-3.0, 3.0);
    if gains.ki > 0.0 {
        pi.preload(gains, x[1] / p_base);
    }
    let mut acc = MseAccumulator::new();
    for k in 0..spec.steps() {
        let t = k as f64 * spec.ts;
        let u = pi.step(gains, (spec.reference.at(t) - x[0]) / v_base, spec.ts);
        let p_cmd = p_base * u;
        let f = |s: &[f64; 2]| [(p_rsc + s[1]) / (c * s[0]), (p_cmd - s[1]) / plant.t_rf];
        match integrate_step(&x, f, spec.ts, Method::Rk4) {
            Ok(n) if n[0] > 0.0 => x = n,
            _ => return f64::INFINITY,
        }
        if !acc.push((spec.reference.at(t + spec.ts) - x[0]) / v_base) {
            break;
        }
    }
    acc.mean()
}

/// Runs the scenario with the candidate gains and returns the tracking MSE,
/// or `+∞` if the loop diverges.
pub fn evaluate_mse(gains: &[f64], spec: &FitnessSpec) -> Result<f64, TuneError> {
    spec.validate()?;
    let g = gains_from(gains)?;
    if !(g.kp.is_finite() && g.ki.is_finite()) {
        return Ok(f64::INFINITY);
    }
    Ok(match &spec.scenario {
        Scenario::PassThrough => 0.0,
        Scenario::FirstOrder { a, b } => mse_first_order(*a, *b, &g, spec),
        Scenario::PoleSurrogate { a, b, zeta, omega_n } => mse_pole_surrogate(*a, *b, *zeta, *omega_n, &g, spec),
        Scenario::PvPowerLoop { chain } => mse_pv_power_loop(chain, &g, spec),
        Scenario::SpeedLoop { plant } => mse_speed_loop(plant, &g, spec),
        Scenario::DcBusLoop { plant, p_rsc } => mse_dc_bus_loop(plant, *p_rsc, &g, spec),
    })
}

impl Fitness for FitnessSpec {
    fn evaluate(&self, x: &[f64]) -> f64 {
        evaluate_mse(x, self).unwrap_or(f64::INFINITY)
    }
}

/// A full tuning run: schedule, search box, budget and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub fitness: FitnessSpec,
    #[serde(default)]
    pub schedule: PsoSchedule,
    #[serde(default = "default_bounds")]
    pub bounds: Bounds,
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_generations")]
    pub generations: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_bounds() -> Bounds {
    Bounds {
        lower: vec![0.0, 0.0],
        upper: vec![50.0, 100.0],
    }
}

fn default_population() -> usize {
    20
}

fn default_generations() -> usize {
    100
}

impl TuneConfig {
    pub fn new(fitness: FitnessSpec, seed: u64) -> Self {
        Self {
            fitness,
            schedule: PsoSchedule::default(),
            bounds: default_bounds(),
            population: default_population(),
            generations: default_generations(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub gains: PiGains,
    pub fitness: f64,
    pub trace: Vec<f64>,
    pub seed: u64,
    pub evaluations: usize,
}

pub fn tune(
    spec: &FitnessSpec,
    sched: &PsoSchedule,
    bounds: Bounds,
    population: usize,
    generations: usize,
    seed: u64,
) -> Result<TuneResult, TuneError> {
    spec.validate()?;
    if bounds.dim() != 2 {
        return Err(TuneError::Config("PI tuning searches exactly two gains".into()));
    }
    let PsoResult {
        best_position,
        best_fitness,
        trace,
        seed,
        evaluations,
    } = minimize(spec, sched, bounds, population, generations, seed)?;
    Ok(TuneResult {
        gains: gains_from(&best_position)?,
        fitness: best_fitness,
        trace,
        seed,
        evaluations,
    })
}

pub fn run_tuning(cfg: &TuneConfig) -> Result<TuneResult, TuneError> {
    tune(
        &cfg.fitness,
        &cfg.schedule,
        cfg.bounds.clone(),
        cfg.population,
        cfg.generations,
        cfg.seed,
    )
}

/// Reference gain pairs used as non-inferiority baselines.
pub fn reference_gains(spec: &FitnessSpec) -> Option<PiGains> {
    match &spec.scenario {
        Scenario::PvPowerLoop { chain } => Some(chain.gains),
        Scenario::SpeedLoop { plant } => Some(plant.speed_gains),
        Scenario::DcBusLoop { plant, .. } => Some(plant.dc_gains),
        _ => None,
    }
}

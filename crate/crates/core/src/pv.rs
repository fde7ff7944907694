//! Single-diode PV module model, NOCT cell temperature and array scaling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const KELVIN_OFFSET: f64 = 273.15;
/// Reference irradiance for the photo-current scaling, W/m².
pub const G_REF: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PvError {
    #[error("invalid PV parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("output-current solve did not converge at v = {v} V (last residual {residual:e} A)")]
    NoConvergence { v: f64, residual: f64 },
}

/// Electrical datasheet and diode constants of one module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvModuleParams {
    pub i_sc: f64,
    pub k_i: f64,
    pub v_oc: f64,
    pub n_ideality: f64,
    pub n_cells_series: u32,
    pub e_g0: f64,
    pub r_s: f64,
    pub r_p: f64,
    pub t_nominal: f64,
    pub q_charge: f64,
    pub k_boltzmann: f64,
    pub p_max: f64,
    pub v_mpp: f64,
    pub i_mpp: f64,
}

impl Default for PvModuleParams {
    fn default() -> Self {
        Self {
            i_sc: 9.68,
            k_i: 0.0005,
            v_oc: 46.5,
            n_ideality: 1.2,
            n_cells_series: 72,
            e_g0: 1.12,
            r_s: 0.1,
            r_p: 515.0,
            t_nominal: 298.15,
            q_charge: 1.6e-19,
            k_boltzmann: 1.38e-23,
            p_max: 350.0,
            v_mpp: 37.9,
            i_mpp: 9.24,
        }
    }
}

fn invalid(field: &'static str, reason: &str) -> PvError {
    PvError::InvalidParam {
        field,
        reason: reason.to_string(),
    }
}

impl PvModuleParams {
    pub fn validate(&self) -> Result<(), PvError> {
        let positive = [
            ("i_sc", self.i_sc),
            ("v_oc", self.v_oc),
            ("r_s", self.r_s),
            ("r_p", self.r_p),
            ("t_nominal", self.t_nominal),
            ("q_charge", self.q_charge),
            ("k_boltzmann", self.k_boltzmann),
            ("e_g0", self.e_g0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be positive and finite"));
            }
        }
        if !(1.0..=2.0).contains(&self.n_ideality) {
            return Err(invalid("n_ideality", "must lie in [1, 2]"));
        }
        if self.n_cells_series == 0 {
            return Err(invalid("n_cells_series", "must be at least 1"));
        }
        if self.v_mpp >= self.v_oc {
            return Err(invalid("v_mpp", "must be below v_oc"));
        }
        if self.i_mpp >= self.i_sc {
            return Err(invalid("i_mpp", "must be below i_sc"));
        }
        Ok(())
    }

    /// Thermal voltage of the whole cell string, `n·Ns·K·T/q`.
    pub fn string_thermal_voltage(&self, t: f64) -> f64 {
        self.n_ideality * self.n_cells_series as f64 * self.k_boltzmann * t / self.q_charge
    }
}

/// Irradiance on the module plane and cell temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvOperatingConditions {
    /// W/m²
    pub g: f64,
    /// K
    pub t_cell: f64,
}

impl PvOperatingConditions {
    pub fn new(g: f64, t_cell_k: f64) -> Result<Self, PvError> {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(PvError::Domain(format!("irradiance {g} must be non-negative")));
        }
        if !(t_cell_k > 0.0 && t_cell_k.is_finite()) {
            return Err(PvError::Domain(format!("cell temperature {t_cell_k} K must be positive")));
        }
        Ok(Self { g, t_cell: t_cell_k })
    }

    pub fn from_celsius(g: f64, t_cell_c: f64) -> Result<Self, PvError> {
        Self::new(g, t_cell_c + KELVIN_OFFSET)
    }

    pub fn stc(params: &PvModuleParams) -> Self {
        Self {
            g: G_REF,
            t_cell: params.t_nominal,
        }
    }
}

/// Module wiring of the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvArrayLayout {
    pub modules_series_per_set: u32,
    pub sets_parallel_per_string: u32,
    pub string_count: u32,
}

impl Default for PvArrayLayout {
    fn default() -> Self {
        Self {
            modules_series_per_set: 8,
            sets_parallel_per_string: 5,
            string_count: 358,
        }
    }
}

impl PvArrayLayout {
    pub fn validate(&self) -> Result<(), PvError> {
        if self.modules_series_per_set == 0 || self.sets_parallel_per_string == 0 || self.string_count == 0 {
            return Err(invalid("layout", "all counts must be at least 1"));
        }
        Ok(())
    }

    pub fn modules_per_string(&self) -> u32 {
        self.modules_series_per_set * self.sets_parallel_per_string
    }

    pub fn total_modules(&self) -> u64 {
        self.modules_per_string() as u64 * self.string_count as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvPoint {
    pub v: f64,
    pub i: f64,
    pub p: f64,
}

impl IvPoint {
    pub fn new(v: f64, i: f64) -> Self {
        Self { v, i, p: v * i }
    }
}

pub fn photo_current(cond: &PvOperatingConditions, params: &PvModuleParams) -> f64 {
    (params.i_sc + params.k_i * (cond.t_cell - params.t_nominal)) * cond.g / G_REF
}

pub fn reverse_saturation_current(params: &PvModuleParams, t: f64) -> Result<f64, PvError> {
    if !(t > 0.0) {
        return Err(PvError::Domain(format!("temperature {t} K must be positive")));
    }
    let x = params.v_oc / params.string_thermal_voltage(t);
    let denom = x.exp_m1();
    if !denom.is_finite() {
        return Err(PvError::Domain(format!("exponent overflow at T = {t} K")));
    }
    Ok(params.i_sc / denom)
}

pub fn saturation_current(params: &PvModuleParams, t: f64) -> Result<f64, PvError> {
    let irs = reverse_saturation_current(params, t)?;
    let tn = params.t_nominal;
    let arg = params.q_charge * params.e_g0 * (1.0 / tn - 1.0 / t) / (params.n_ideality * params.k_boltzmann);
    let value = irs * (t / tn).powi(3) * arg.exp();
    if !value.is_finite() {
        return Err(PvError::Domain(format!("saturation current overflow at T = {t} K")));
    }
    Ok(value)
}

/// Implicit current equation of one module, prepared for repeated solves at
/// fixed conditions.
#[derive(Debug, Clone, Copy)]
pub struct DiodeEquation {
    pub i_ph: f64,
    pub i_0: f64,
    pub a: f64,
    pub r_s: f64,
    pub r_p: f64,
}

const RESIDUAL_TOL: f64 = 1e-9;
const MAX_NEWTON: usize = 100;

impl DiodeEquation {
    pub fn new(cond: &PvOperatingConditions, params: &PvModuleParams) -> Result<Self, PvError> {
        Ok(Self {
            i_ph: photo_current(cond, params),
            i_0: saturation_current(params, cond.t_cell)?,
            a: params.string_thermal_voltage(cond.t_cell),
            r_s: params.r_s,
            r_p: params.r_p,
        })
    }

    /// `f(I) = I_ph − I_0·(exp((V+I·Rs)/a) − 1) − (V+I·Rs)/Rp − I`.
    pub fn residual(&self, v: f64, i: f64) -> f64 {
        let vd = v + i * self.r_s;
        self.i_ph - self.i_0 * (vd / self.a).exp_m1() - vd / self.r_p - i
    }

    fn residual_and_slope(&self, v: f64, i: f64) -> (f64, f64) {
        let vd = v + i * self.r_s;
        let e = (vd / self.a).exp();
        let f = self.i_ph - self.i_0 * (e - 1.0) - vd / self.r_p - i;
        let df = -self.i_0 * e * self.r_s / self.a - self.r_s / self.r_p - 1.0;
        (f, df)
    }

    /// Damped Newton from `I_ph`, bisection when Newton stalls.
    pub fn current(&self, v: f64) -> Result<f64, PvError> {
        let mut i = self.i_ph;
        let (mut f, mut df) = self.residual_and_slope(v, i);
        for _ in 0..MAX_NEWTON {
            if f.abs() < RESIDUAL_TOL {
                return Ok(i);
            }
            if !(f.is_finite() && df.is_finite()) || df == 0.0 {
                break;
            }
            let step = -f / df;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand = i + lambda * step;
                let (fc, dfc) = self.residual_and_slope(v, cand);
                if fc.is_finite() && fc.abs() < f.abs() {
                    i = cand;
                    f = fc;
                    df = dfc;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if f.abs() < RESIDUAL_TOL {
            return Ok(i);
        }
        self.bisect(v)
    }

    /// Bracketing solve; `f` is strictly decreasing in `I`.
    pub fn bisect(&self, v: f64) -> Result<f64, PvError> {
        let mut hi = self.i_ph.max(0.0) + 1.0;
        while self.residual(v, hi) > 0.0 {
            hi = 2.0 * hi + 1.0;
            if !hi.is_finite() {
                return Err(PvError::NoConvergence { v, residual: f64::NAN });
            }
        }
        let mut lo = -1.0;
        while self.residual(v, lo) < 0.0 {
            lo = 2.0 * lo - 1.0;
            if !lo.is_finite() {
                return Err(PvError::NoConvergence { v, residual: f64::NAN });
            }
        }
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let f = self.residual(v, mid);
            if f.abs() < RESIDUAL_TOL * 1e-3 || (hi - lo) < 1e-15 {
                break;
            }
            if f > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = self.residual(v, mid);
        if r.abs() < RESIDUAL_TOL {
            Ok(mid)
        } else {
            Err(PvError::NoConvergence { v, residual: r })
        }
    }

    /// Terminal voltage that delivers `i` (inverse of [`DiodeEquation::current`]).
    /// The relation is explicit in the diode voltage, so a scalar root on
    /// `V + I·Rs` suffices.
    pub fn voltage(&self, i: f64) -> Result<f64, PvError> {
        // g(x) = I_ph − I_0·expm1(x/a) − x/Rp − I, decreasing in x = V + I·Rs
        let g = |x: f64| self.i_ph - self.i_0 * (x / self.a).exp_m1() - x / self.r_p - i;
        let mut lo = -1.0;
        while g(lo) < 0.0 {
            lo = 2.0 * lo - 1.0;
            if !lo.is_finite() {
                return Err(PvError::NoConvergence {
                    v: f64::NAN,
                    residual: f64::NAN,
                });
            }
        }
        let mut hi = 1.0;
        while g(hi) > 0.0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(PvError::NoConvergence {
                    v: f64::NAN,
                    residual: f64::NAN,
                });
            }
        }
        // Newton safeguarded by the bracket
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let e = (x / self.a).exp();
            let gx = self.i_ph - self.i_0 * (e - 1.0) - x / self.r_p - i;
            if gx.abs() < RESIDUAL_TOL {
                break;
            }
            if gx > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let dg = -self.i_0 * e / self.a - 1.0 / self.r_p;
            let newton = x - gx / dg;
            x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-13 {
                break;
            }
        }
        Ok(x - i * self.r_s)
    }
}

/// Module output current at terminal voltage `v`.
pub fn solve_output_current(v: f64, cond: &PvOperatingConditions, params: &PvModuleParams) -> Result<f64, PvError> {
    if !(v >= 0.0 && v <= 1.1 * params.v_oc) {
        return Err(PvError::Domain(format!("voltage {v} V outside [0, 1.1·v_oc]")));
    }
    DiodeEquation::new(cond, params)?.current(v)
}

/// Terminal voltage at which the module delivers current `i`.
pub fn solve_output_voltage(i: f64, cond: &PvOperatingConditions, params: &PvModuleParams) -> Result<f64, PvError> {
    DiodeEquation::new(cond, params)?.voltage(i)
}

/// Brute-force maximum-power search on the grid `k·dv ≤ v_oc`.
pub fn mpp_scan(cond: &PvOperatingConditions, params: &PvModuleParams, dv: f64) -> Result<IvPoint, PvError> {
    if !(dv > 0.0 && dv <= 1.0) {
        return Err(PvError::Domain(format!("scan step {dv} V outside (0, 1]")));
    }
    let eq = DiodeEquation::new(cond, params)?;
    let mut best = IvPoint::new(0.0, eq.current(0.0)?);
    let mut k = 1u64;
    loop {
        let v = k as f64 * dv;
        if v > params.v_oc {
            break;
        }
        let pt = IvPoint::new(v, eq.current(v)?);
        if pt.p > best.p {
            best = pt;
        }
        k += 1;
    }
    Ok(best)
}

/// Maximum-power point by golden-section search; agrees with [`mpp_scan`]
/// and costs a few dozen solves instead of thousands.
pub fn module_mpp(cond: &PvOperatingConditions, params: &PvModuleParams) -> Result<IvPoint, PvError> {
    if cond.g <= 0.0 {
        return Ok(IvPoint::new(0.0, 0.0));
    }
    let eq = DiodeEquation::new(cond, params)?;
    let power = |v: f64| eq.current(v).map(|i| v * i);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, params.v_oc * 1.1);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut pc, mut pd) = (power(c)?, power(d)?);
    while b - a > 1e-7 {
        if pc > pd {
            b = d;
            d = c;
            pd = pc;
            c = b - inv_phi * (b - a);
            pc = power(c)?;
        } else {
            a = c;
            c = d;
            pc = pd;
            d = a + inv_phi * (b - a);
            pd = power(d)?;
        }
    }
    let v = 0.5 * (a + b);
    let pt = IvPoint::new(v, eq.current(v)?);
    Ok(if pt.p > 0.0 { pt } else { IvPoint::new(0.0, 0.0) })
}

/// NOCT cell temperature, °C.
pub fn cell_temperature(t_ambient_c: f64, g: f64, noct_c: f64) -> f64 {
    t_ambient_c + (noct_c - 20.0) * g / 800.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayPower {
    pub string_w: f64,
    pub plant_w: f64,
}

pub fn array_power(module_mpp_w: f64, layout: &PvArrayLayout) -> ArrayPower {
    let string_w = module_mpp_w * layout.modules_per_string() as f64;
    ArrayPower {
        string_w,
        plant_w: string_w * layout.string_count as f64,
    }
}

/// Samples an I-V curve from short circuit to open circuit.
pub fn iv_curve(cond: &PvOperatingConditions, params: &PvModuleParams, points: usize) -> Result<Vec<IvPoint>, PvError> {
    let eq = DiodeEquation::new(cond, params)?;
    let n = points.max(2);
    let v_end = if cond.g > 0.0 { eq.voltage(0.0)?.max(0.0) } else { 0.0 };
    (0..n)
        .map(|k| {
            let v = v_end * k as f64 / (n - 1) as f64;
            eq.current(v).map(|i| IvPoint::new(v, i))
        })
        .collect()
}

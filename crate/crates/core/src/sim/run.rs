//! Dynamic (millisecond) and quasi-static (hourly) plant runs.

use super::scenario::{Mode, PlantConfig, Scenario};
use super::{SimError, SimOutput};
use crate::econ::EnergyLedger;
use crate::pv::{array_power, cell_temperature, module_mpp, PvOperatingConditions};
use crate::pv_chain::{PowerReference, PvStringChain};
use crate::sim::integrate::Method;
use crate::weather::{shear_to_hub, WeatherSeries};
use crate::wind::{turbine_quasi_static_power, WindTurbineSim};
use chrono::Datelike;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DYNAMIC_CHANNELS: [&str; 14] = [
    "wind_ms",
    "irradiance_wm2",
    "pv_power_mw",
    "wind_power_mw",
    "total_mw",
    "q_total_mvar",
    "v_dc_v",
    "omega_m_rads",
    "omega_ref_rads",
    "lambda",
    "pv_module_voltage_v",
    "pv_power_error_pu",
    "speed_error_pu",
    "v_dc_error_pu",
];

pub const HOURLY_CHANNELS: [&str; 7] = [
    "ghi_wm2",
    "t_cell_c",
    "wind_hub_ms",
    "pv_power_mw",
    "wind_power_mw",
    "total_mw",
    "q_total_mvar",
];

/// Simulates one PV string and one turbine and scales them to the plant.
/// The PV inverter loop samples every electrical step; the turbine
/// controllers sample every `dt_control`.
pub fn run_dynamic(scenario: &Scenario) -> Result<SimOutput, SimError> {
    if scenario.mode != Mode::Dynamic {
        return Err(SimError::Config("scenario mode is not dynamic".into()));
    }
    scenario.validate()?;
    let plant = &scenario.plant;
    let d = &scenario.dynamic;
    let clock = scenario.clock;
    let ratio = clock.ratio()?;
    let dt = clock.dt_electrical;
    let record_every = ((d.record_interval / dt).round() as usize).max(1);
    let strings = plant.string_count() as f64;
    let turbines = plant.turbine_count as f64;

    let pv_cond = |t: f64| PvOperatingConditions::from_celsius(d.irradiance.at(t), d.cell_temperature.at(t));
    let mut pv = if d.include_pv {
        let cond = pv_cond(0.0).map_err(|e| SimError::Config(e.to_string()))?;
        Some(PvStringChain::new(plant.pv.clone(), cond, PowerReference::Mppt).map_err(|e| SimError::Config(e.to_string()))?)
    } else {
        None
    };
    let mut wt = if d.include_wind {
        Some(WindTurbineSim::new(plant.wind.clone(), d.wind.at(0.0)).map_err(|e| SimError::Config(e.to_string()))?)
    } else {
        None
    };
    let p_base_pv = plant.pv.scaling().p_base;
    let w_base = plant.wind.dfig.synchronous_mechanical_speed();
    let v_dc_ref = plant.wind.v_dc_ref;

    let mut out = SimOutput::with_channels(&DYNAMIC_CHANNELS, false);
    let record = |t: f64, pv: &Option<PvStringChain>, wt: &Option<WindTurbineSim>, out: &mut SimOutput| {
        let (p_pv, q_pv, v_mod, e_pv, irr) = match pv {
            Some(c) => {
                let s = c.sample();
                let v_mod = s.v_pv / c.config.layout.modules_series_per_set as f64;
                (
                    -s.p_grid * strings,
                    s.q_grid * strings,
                    v_mod,
                    (s.p_ref - s.p_grid) / p_base_pv,
                    c.conditions().g,
                )
            }
            None => (0.0, 0.0, f64::NAN, 0.0, d.irradiance.at(t)),
        };
        let (p_w, q_w, vdc, om, om_ref, lam, e_w, e_v, v) = match wt {
            Some(w) => {
                let s = w.sample();
                (
                    s.p_out * turbines,
                    s.q_total * turbines,
                    s.v_dc,
                    s.omega_m,
                    s.omega_ref,
                    s.lambda,
                    (s.omega_m - s.omega_ref) / w_base,
                    (v_dc_ref - s.v_dc) / v_dc_ref,
                    s.wind,
                )
            }
            None => (0.0, 0.0, f64::NAN, f64::NAN, f64::NAN, f64::NAN, 0.0, 0.0, d.wind.at(t)),
        };
        out.push(
            t,
            None,
            &[
                v,
                irr,
                p_pv / 1e6,
                p_w / 1e6,
                (p_pv + p_w) / 1e6,
                (q_pv + q_w) / 1e6,
                vdc,
                om,
                om_ref,
                lam,
                v_mod,
                e_pv,
                e_w,
                e_v,
            ],
        );
    };

    record(0.0, &pv, &wt, &mut out);
    for k in 0..clock.steps() {
        let t = k as f64 * dt;
        if let Some(c) = pv.as_mut() {
            let cond = pv_cond(t).map_err(|e| SimError::Config(e.to_string()))?;
            c.set_conditions(cond).map_err(|e| SimError::Config(e.to_string()))?;
            c.control_step(dt);
            c.electrical_step(dt, Method::Rk4).map_err(|e| SimError::fault(t, e))?;
        }
        if let Some(w) = wt.as_mut() {
            if k % ratio == 0 {
                w.set_wind(d.wind.at(t));
                w.control_step(clock.dt_control).map_err(|e| SimError::fault(t, e))?;
            }
            w.electrical_step(dt, Method::Rk4).map_err(|e| SimError::fault(t, e))?;
        }
        if (k + 1) % record_every == 0 {
            record((k + 1) as f64 * dt, &pv, &wt, &mut out);
        }
    }
    Ok(out)
}

/// One hour of the steady-state plant mapping, in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyPower {
    pub t_cell_c: f64,
    pub wind_hub: f64,
    pub pv_w: f64,
    pub wind_w: f64,
}

pub fn hourly_power(
    ghi: f64,
    t_ambient: f64,
    wind_meas: f64,
    plant: &PlantConfig,
    site_heights: (f64, f64),
) -> Result<HourlyPower, SimError> {
    let g = plant.poa_gain * ghi;
    let t_cell_c = cell_temperature(t_ambient, g, plant.noct);
    let cond = PvOperatingConditions::from_celsius(g, t_cell_c).map_err(|e| SimError::Config(e.to_string()))?;
    let mpp = module_mpp(&cond, &plant.pv.module).map_err(|e| SimError::fault(0.0, e))?;
    let mut arr = array_power(mpp.p, &plant.pv.layout);
    if plant.clip_strings {
        arr.string_w = arr.string_w.min(plant.pv.string_rating());
        arr.plant_w = arr.string_w * plant.string_count() as f64;
    }
    let wind_hub = shear_to_hub(wind_meas, site_heights.0, site_heights.1, plant.alpha_shear)?;
    let wind_w = turbine_quasi_static_power(wind_hub, &plant.wind.turbine) * plant.turbine_count as f64;
    Ok(HourlyPower {
        t_cell_c,
        wind_hub,
        pv_w: arr.plant_w,
        wind_w,
    })
}

/// Maps every weather hour to plant output with no dynamics.
pub fn run_quasi_static_with(scenario: &Scenario, weather: &WeatherSeries) -> Result<SimOutput, SimError> {
    scenario.plant.validate()?;
    weather.validate()?;
    let heights = (weather.site.measurement_height, weather.site.hub_height);
    let mut out = SimOutput::with_channels(&HOURLY_CHANNELS, true);
    for (k, r) in weather.records.iter().enumerate() {
        let h = hourly_power(r.ghi, r.t_ambient, r.wind_10m, &scenario.plant, heights)?;
        let total = h.pv_w + h.wind_w;
        out.push(
            k as f64 * 3600.0,
            Some(r.timestamp),
            &[r.ghi, h.t_cell_c, h.wind_hub, h.pv_w / 1e6, h.wind_w / 1e6, total / 1e6, 0.0],
        );
    }
    Ok(out)
}

/// Loads the scenario's weather (relative CSV paths from `base`) and runs it hourly.
pub fn run_quasi_static_from(scenario: &Scenario, base: Option<&Path>) -> Result<SimOutput, SimError> {
    if scenario.mode != Mode::QuasiStatic {
        return Err(SimError::Config("scenario mode is not quasi_static".into()));
    }
    scenario.validate()?;
    let weather = scenario.weather.load(scenario.site, scenario.seed, base)?;
    run_quasi_static_with(scenario, &weather)
}

pub fn run_quasi_static(scenario: &Scenario) -> Result<SimOutput, SimError> {
    run_quasi_static_from(scenario, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthlyEnergy {
    pub year: i32,
    pub month: u32,
    pub hours: usize,
    pub pv_mwh: f64,
    pub wind_mwh: f64,
    pub total_mwh: f64,
    pub peak_total_mw: f64,
}

fn hourly_channels(out: &SimOutput) -> Result<(&[f64], &[f64]), SimError> {
    let pv = out
        .channel("pv_power_mw")
        .ok_or_else(|| SimError::Format("missing pv_power_mw".into()))?;
    let wind = out
        .channel("wind_power_mw")
        .ok_or_else(|| SimError::Format("missing wind_power_mw".into()))?;
    Ok((pv, wind))
}

/// Per-calendar-month energy of an hourly run.
pub fn monthly_energy(out: &SimOutput) -> Result<Vec<MonthlyEnergy>, SimError> {
    let stamps = out
        .timestamps
        .as_ref()
        .ok_or_else(|| SimError::Format("monthly energy needs timestamps".into()))?;
    let (pv, wind) = hourly_channels(out)?;
    let mut rows: Vec<MonthlyEnergy> = Vec::new();
    for (k, ts) in stamps.iter().enumerate() {
        let (y, m) = (ts.year(), ts.month());
        if rows.last().is_none_or(|r| (r.year, r.month) != (y, m)) {
            rows.push(MonthlyEnergy {
                year: y,
                month: m,
                hours: 0,
                pv_mwh: 0.0,
                wind_mwh: 0.0,
                total_mwh: 0.0,
                peak_total_mw: 0.0,
            });
        }
        let r = rows.last_mut().expect("pushed above");
        r.hours += 1;
        r.pv_mwh += pv[k];
        r.wind_mwh += wind[k];
        r.total_mwh += pv[k] + wind[k];
        r.peak_total_mw = r.peak_total_mw.max(pv[k] + wind[k]);
    }
    Ok(rows)
}

/// Energy of an hourly run scaled to a 8760-hour year.
pub fn annual_energy(out: &SimOutput) -> Result<EnergyLedger, SimError> {
    let (pv, wind) = hourly_channels(out)?;
    if out.is_empty() {
        return Err(SimError::Format("run output is empty".into()));
    }
    let scale = 8760.0 / out.len() as f64;
    let sum = |v: &[f64]| v.iter().sum::<f64>() * scale;
    EnergyLedger::new(sum(pv), sum(wind)).map_err(|e| SimError::Format(e.to_string()))
}

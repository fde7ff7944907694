//! Scenario description shared by the dynamic and hourly runners.

use super::SimError;
use crate::pv_chain::PvChainConfig;
use crate::weather::{load_weather_csv, synth_weather, ClearSkyProfile, Site, WeatherSchema, WeatherSeries, WeibullParams};
use crate::wind::WindTurbineConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimClock {
    pub dt_electrical: f64,
    pub dt_control: f64,
    pub t_end: f64,
}

impl Default for SimClock {
    fn default() -> Self {
        Self {
            dt_electrical: 1e-4,
            dt_control: 1e-3,
            t_end: 20.0,
        }
    }
}

impl SimClock {
    /// Electrical steps per control step.
    pub fn ratio(&self) -> Result<usize, SimError> {
        if !(self.dt_electrical > 0.0 && self.dt_control > 0.0 && self.t_end > 0.0) {
            return Err(SimError::Config("clock steps and t_end must be positive".into()));
        }
        let r = self.dt_control / self.dt_electrical;
        let n = r.round();
        if n < 1.0 || (r - n).abs() > 1e-9 * r {
            return Err(SimError::Config("dt_control must be an integer multiple of dt_electrical".into()));
        }
        Ok(n as usize)
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt_electrical).round() as usize
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Dynamic,
    QuasiStatic,
}

/// Plant-level constants: replica counts and the hourly mapping options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub pv: PvChainConfig,
    pub wind: WindTurbineConfig,
    pub turbine_count: u32,
    /// °C
    pub noct: f64,
    /// Module irradiance = `poa_gain · GHI`.
    pub poa_gain: f64,
    pub alpha_shear: f64,
    /// Cap each string at its nameplate rating in hourly runs.
    pub clip_strings: bool,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            pv: PvChainConfig::default(),
            wind: WindTurbineConfig::default(),
            turbine_count: 10,
            noct: 45.0,
            poa_gain: 1.0,
            alpha_shear: 0.2,
            clip_strings: true,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.pv.validate().map_err(|e| SimError::Config(e.to_string()))?;
        self.wind.validate().map_err(|e| SimError::Config(e.to_string()))?;
        if self.turbine_count == 0 {
            return Err(SimError::Config("turbine_count must be positive".into()));
        }
        if !(self.poa_gain >= 0.0 && (0.0..=1.0).contains(&self.alpha_shear) && self.noct.is_finite()) {
            return Err(SimError::Config("need poa_gain ≥ 0, alpha_shear in [0, 1] and finite noct".into()));
        }
        Ok(())
    }

    pub fn string_count(&self) -> u32 {
        self.pv.layout.string_count
    }

    pub fn pv_rating_w(&self) -> f64 {
        self.pv.string_rating() * self.string_count() as f64
    }

    pub fn wind_rating_w(&self) -> f64 {
        self.wind.turbine.p_rated * self.turbine_count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeatherSource {
    Synthetic {
        days: u32,
        #[serde(default)]
        clear_sky: ClearSkyProfile,
        #[serde(default)]
        weibull: WeibullParams,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: WeatherSchema,
    },
}

impl Default for WeatherSource {
    fn default() -> Self {
        Self::Synthetic {
            days: 31,
            clear_sky: ClearSkyProfile::default(),
            weibull: WeibullParams::default(),
        }
    }
}

impl WeatherSource {
    /// Relative CSV paths are taken from `base`.
    pub fn load(&self, site: Site, seed: u64, base: Option<&Path>) -> Result<WeatherSeries, SimError> {
        match self {
            Self::Synthetic { days, clear_sky, weibull } => Ok(synth_weather(*days, clear_sky, weibull, seed, site)?),
            Self::Csv { path, schema } => {
                let p = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                Ok(load_weather_csv(&p, schema, site)?)
            }
        }
    }
}

/// Piecewise-constant input given as `[time, value]` breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile(pub Vec<[f64; 2]>);

impl Profile {
    pub fn constant(v: f64) -> Self {
        Self(vec![[0.0, v]])
    }

    pub fn step(before: f64, at: f64, after: f64) -> Self {
        Self(vec![[0.0, before], [at, after]])
    }

    pub fn validate(&self, name: &str) -> Result<(), SimError> {
        if self.0.is_empty() {
            return Err(SimError::Config(format!("profile '{name}' is empty")));
        }
        if self.0.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(SimError::Config(format!("profile '{name}' has non-finite entries")));
        }
        if self.0.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(SimError::Config(format!("profile '{name}' times must increase")));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> f64 {
        let mut v = self.0[0][1];
        for p in &self.0 {
            if t + 1e-12 >= p[0] {
                v = p[1];
            } else {
                break;
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicConfig {
    pub include_pv: bool,
    pub include_wind: bool,
    /// Hub wind speed, m/s.
    pub wind: Profile,
    /// Module irradiance, W/m².
    pub irradiance: Profile,
    /// °C
    pub cell_temperature: Profile,
    /// Sampling period of the recorded channels, s.
    pub record_interval: f64,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        Self {
            include_pv: true,
            include_wind: true,
            wind: Profile::step(8.0, 5.0, 10.0),
            irradiance: Profile::constant(1000.0),
            cell_temperature: Profile::constant(25.0),
            record_interval: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub mode: Mode,
    pub seed: u64,
    pub site: Site,
    pub plant: PlantConfig,
    pub clock: SimClock,
    pub dynamic: DynamicConfig,
    pub weather: WeatherSource,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            mode: Mode::Dynamic,
            seed: 0,
            site: Site::default(),
            plant: PlantConfig::default(),
            clock: SimClock::default(),
            dynamic: DynamicConfig::default(),
            weather: WeatherSource::default(),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, SimError> {
        toml::to_string(self).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.plant.validate()?;
        match self.mode {
            Mode::Dynamic => {
                self.clock.ratio()?;
                let d = &self.dynamic;
                d.wind.validate("wind")?;
                d.irradiance.validate("irradiance")?;
                d.cell_temperature.validate("cell_temperature")?;
                if !(d.include_pv || d.include_wind) {
                    return Err(SimError::Config("dynamic run needs at least one chain".into()));
                }
                if !(d.record_interval >= self.clock.dt_electrical) {
                    return Err(SimError::Config("record_interval must be at least dt_electrical".into()));
                }
                if d.irradiance.0.iter().any(|p| p[1] < 0.0) || d.wind.0.iter().any(|p| p[1] <= 0.0) {
                    return Err(SimError::Config("irradiance must be ≥ 0 and wind > 0".into()));
                }
            }
            Mode::QuasiStatic => {
                if let WeatherSource::Synthetic { days: 0, .. } = self.weather {
                    return Err(SimError::Config("synthetic weather needs days ≥ 1".into()));
                }
            }
        }
        Ok(())
    }
}

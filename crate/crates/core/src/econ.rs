//! Capital, O&M, LCOE, NPV, payback, cash flow and avoided emissions.
//!
//! Money is in dollars, energy in MWh, rates as fractions unless a field
//! says percent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EconError {
    #[error("invalid economic input: {0}")]
    Invalid(String),
    #[error("discounted energy is zero")]
    ZeroEnergy,
    #[error("schedule lengths differ: {0} vs {1}")]
    Length(usize, usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmBasis {
    Capital,
    #[default]
    Replacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentCostLine {
    pub name: String,
    /// $/unit
    pub unit_capital: f64,
    /// $/unit
    pub unit_replacement: f64,
    /// Percent of the basis cost per year.
    pub om_percent: f64,
    pub count: u32,
    /// Replacement interval, years.
    pub lifetime: f64,
}

impl ComponentCostLine {
    pub fn validate(&self) -> Result<(), EconError> {
        let ok = self.unit_capital >= 0.0
            && self.unit_replacement >= 0.0
            && (0.0..=100.0).contains(&self.om_percent)
            && self.count >= 1
            && self.lifetime > 0.0
            && self.unit_capital.is_finite()
            && self.unit_replacement.is_finite();
        if ok {
            Ok(())
        } else {
            Err(EconError::Invalid(format!("cost line '{}'", self.name)))
        }
    }

    /// Years within `1..=n` in which the whole line is replaced. A
    /// replacement falling on or after the final year is not scheduled.
    pub fn replacement_years(&self, n: u32) -> Vec<u32> {
        let mut years = Vec::new();
        let mut k = 1.0;
        while k * self.lifetime < n as f64 {
            years.push((k * self.lifetime).ceil() as u32);
            k += 1.0;
        }
        years
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostLedger {
    pub lines: Vec<ComponentCostLine>,
}

impl Default for CostLedger {
    fn default() -> Self {
        let line = |name: &str, cap, rep, count, lifetime| ComponentCostLine {
            name: name.into(),
            unit_capital: cap,
            unit_replacement: rep,
            om_percent: 1.0,
            count,
            lifetime,
        };
        Self {
            lines: vec![
                line("pv_panel", 132.0, 105.0, 14_320, 25.0),
                line("wind_turbine", 3_862_500.0, 3_090_000.0, 10, 25.0),
                line("converter", 4_375.0, 3_500.0, 358, 12.5),
            ],
        }
    }
}

impl CostLedger {
    pub fn validate(&self) -> Result<(), EconError> {
        if self.lines.is_empty() {
            return Err(EconError::Invalid("cost ledger is empty".into()));
        }
        self.lines.iter().try_for_each(ComponentCostLine::validate)
    }

    pub fn capital(&self, k_overhead: f64) -> f64 {
        self.lines.iter().map(|l| capital_cost(l, k_overhead)).sum()
    }

    pub fn annual_om(&self, basis: OmBasis) -> f64 {
        self.lines.iter().map(|l| annual_om_cost(l, basis)).sum()
    }

    /// Replacement spending per year `1..=n`.
    pub fn replacement_schedule(&self, n: u32) -> Vec<f64> {
        let mut out = vec![0.0; n as usize];
        for l in &self.lines {
            for y in l.replacement_years(n) {
                out[y as usize - 1] += l.count as f64 * l.unit_replacement;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscountMode {
    #[default]
    Nominal,
    /// `(1 + i)/(1 + f) − 1`
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinanceParams {
    /// Engineering, logistics and installation overhead as a fraction.
    pub k_overhead: f64,
    /// %/yr
    pub interest_rate: f64,
    /// %/yr
    pub inflation_rate: f64,
    pub lifetime_years: u32,
    /// Feed-in tariff, $/kWh.
    pub tariff: f64,
    /// Market price, $/kWh.
    pub base_price: f64,
    pub discount_mode: DiscountMode,
    pub om_basis: OmBasis,
}

impl Default for FinanceParams {
    fn default() -> Self {
        Self {
            k_overhead: 0.0,
            interest_rate: 3.75,
            inflation_rate: 2.42,
            lifetime_years: 25,
            tariff: 0.114,
            base_price: 0.04,
            discount_mode: DiscountMode::Nominal,
            om_basis: OmBasis::Replacement,
        }
    }
}

impl FinanceParams {
    pub fn validate(&self) -> Result<(), EconError> {
        let rate_ok = |r: f64| (0.0..100.0).contains(&r);
        if self.lifetime_years < 1 {
            return Err(EconError::Invalid("lifetime_years must be at least 1".into()));
        }
        if !rate_ok(self.interest_rate) || !rate_ok(self.inflation_rate) {
            return Err(EconError::Invalid("rates must be in [0, 100) percent".into()));
        }
        if !(self.k_overhead >= 0.0 && self.tariff >= 0.0 && self.base_price >= 0.0) {
            return Err(EconError::Invalid("overhead and prices must be non-negative".into()));
        }
        Ok(())
    }

    /// Discount rate as a fraction.
    pub fn discount_rate(&self) -> f64 {
        let i = self.interest_rate / 100.0;
        match self.discount_mode {
            DiscountMode::Nominal => i,
            DiscountMode::Real => (1.0 + i) / (1.0 + self.inflation_rate / 100.0) - 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyLedger {
    pub pv_mwh: f64,
    pub wind_mwh: f64,
}

impl EnergyLedger {
    pub fn new(pv_mwh: f64, wind_mwh: f64) -> Result<Self, EconError> {
        if !(pv_mwh >= 0.0 && wind_mwh >= 0.0 && pv_mwh.is_finite() && wind_mwh.is_finite()) {
            return Err(EconError::Invalid("energy must be finite and non-negative".into()));
        }
        Ok(Self { pv_mwh, wind_mwh })
    }

    pub fn annual_energy(&self) -> f64 {
        self.pv_mwh + self.wind_mwh
    }

    pub fn pv_share(&self) -> f64 {
        let e = self.annual_energy();
        if e > 0.0 {
            self.pv_mwh / e
        } else {
            0.0
        }
    }
}

/// kg per MWh displaced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmissionFactors {
    pub co2: f64,
    pub so2: f64,
    pub nox: f64,
}

impl Default for EmissionFactors {
    fn default() -> Self {
        Self {
            co2: 400.0,
            so2: 2.74,
            nox: 1.34,
        }
    }
}

/// kg per year.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Emissions {
    pub co2: f64,
    pub so2: f64,
    pub nox: f64,
}

/// `(1 + K)·N·C`
pub fn capital_cost(line: &ComponentCostLine, k_overhead: f64) -> f64 {
    (1.0 + k_overhead) * line.count as f64 * line.unit_capital
}

pub fn annual_om_cost(line: &ComponentCostLine, basis: OmBasis) -> f64 {
    let unit = match basis {
        OmBasis::Capital => line.unit_capital,
        OmBasis::Replacement => line.unit_replacement,
    };
    // Dividing last keeps whole-dollar results exact.
    line.om_percent * line.count as f64 * unit / 100.0
}

fn discount_sum(values: &[f64], i: f64) -> f64 {
    values.iter().enumerate().map(|(k, v)| v / (1.0 + i).powi(k as i32 + 1)).sum()
}

/// Levelized cost in $/kWh. Schedules cover years `1..=n`; energy in MWh.
pub fn lcoe(i0: f64, annual_cost: &[f64], annual_energy: &[f64], i: f64) -> Result<f64, EconError> {
    if annual_cost.len() != annual_energy.len() {
        return Err(EconError::Length(annual_cost.len(), annual_energy.len()));
    }
    if annual_energy.iter().any(|e| !(*e >= 0.0)) {
        return Err(EconError::Invalid("energy schedule must be non-negative".into()));
    }
    let energy = discount_sum(annual_energy, i);
    if !(energy > 0.0) {
        return Err(EconError::ZeroEnergy);
    }
    Ok((i0 + discount_sum(annual_cost, i)) / (energy * 1000.0))
}

pub fn npv(revenues: &[f64], costs: &[f64], i: f64, i0: f64) -> Result<f64, EconError> {
    if revenues.len() != costs.len() {
        return Err(EconError::Length(revenues.len(), costs.len()));
    }
    let net: Vec<f64> = revenues.iter().zip(costs).map(|(r, c)| r - c).collect();
    Ok(discount_sum(&net, i) - i0)
}

/// Simple payback in years, or `None` when the inflow never recovers the
/// investment.
pub fn payback(i0: f64, inflow_per_period: f64) -> Option<f64> {
    (inflow_per_period > 0.0).then(|| i0 / inflow_per_period)
}

pub fn avoided_emissions(annual_energy: f64, factors: &EmissionFactors) -> Emissions {
    Emissions {
        co2: annual_energy * factors.co2,
        so2: annual_energy * factors.so2,
        nox: annual_energy * factors.nox,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CashflowRow {
    pub year: u32,
    pub revenue: f64,
    pub cost: f64,
    pub net: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CashflowReport {
    pub rows: Vec<CashflowRow>,
}

impl CashflowReport {
    /// First zero crossing of the cumulative series, linearly interpolated.
    pub fn payback_year(&self) -> Option<f64> {
        self.rows.windows(2).find_map(|w| {
            let (a, b) = (w[0], w[1]);
            (a.cumulative < 0.0 && b.cumulative >= 0.0)
                .then(|| a.year as f64 + (-a.cumulative) / (b.cumulative - a.cumulative) * (b.year - a.year) as f64)
        })
    }

    pub fn final_cumulative(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative)
    }
}

/// Nominal yearly cash flow: year 0 pays the capital, later years earn the
/// tariff on the energy and pay O&M plus scheduled replacements.
pub fn cashflow_report(energy: &EnergyLedger, costs: &CostLedger, finance: &FinanceParams) -> Result<CashflowReport, EconError> {
    costs.validate()?;
    finance.validate()?;
    let n = finance.lifetime_years;
    let capital = costs.capital(finance.k_overhead);
    let om = costs.annual_om(finance.om_basis);
    let repl = costs.replacement_schedule(n);
    let revenue = finance.tariff * 1000.0 * energy.annual_energy();
    let mut rows = vec![CashflowRow {
        year: 0,
        revenue: 0.0,
        cost: capital,
        net: -capital,
        cumulative: -capital,
    }];
    let mut cumulative = -capital;
    for y in 1..=n {
        let cost = om + repl[y as usize - 1];
        let net = revenue - cost;
        cumulative += net;
        rows.push(CashflowRow {
            year: y,
            revenue,
            cost,
            net,
            cumulative,
        });
    }
    Ok(CashflowReport { rows })
}

/// Headline figures of one economic evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconSummary {
    pub annual_energy_mwh: f64,
    pub pv_share: f64,
    pub capital: f64,
    pub om_annual: f64,
    pub om_annual_capital_basis: f64,
    pub om_total_nominal: f64,
    pub om_total_discounted: f64,
    pub replacements_total_nominal: f64,
    pub discount_rate: f64,
    /// O&M plus scheduled replacements as the annual cost.
    pub lcoe: f64,
    /// O&M alone as the annual cost.
    pub lcoe_om_only: f64,
    pub npv: f64,
    pub payback_simple: Option<f64>,
    pub payback_from_cumulative: Option<f64>,
    pub final_cumulative: f64,
    pub emissions: Emissions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EconConfig {
    #[serde(default)]
    pub ledger: CostLedger,
    #[serde(default)]
    pub finance: FinanceParams,
    #[serde(default)]
    pub emission_factors: EmissionFactors,
    /// Annual energy; may be supplied separately at evaluation time.
    #[serde(default)]
    pub energy: Option<EnergyLedger>,
}

pub fn evaluate(
    energy: &EnergyLedger,
    costs: &CostLedger,
    finance: &FinanceParams,
    factors: &EmissionFactors,
) -> Result<(EconSummary, CashflowReport), EconError> {
    let report = cashflow_report(energy, costs, finance)?;
    let n = finance.lifetime_years as usize;
    let i = finance.discount_rate();
    let capital = costs.capital(finance.k_overhead);
    let om = costs.annual_om(finance.om_basis);
    let repl = costs.replacement_schedule(finance.lifetime_years);
    let e = energy.annual_energy();
    let om_sched = vec![om; n];
    let total_sched: Vec<f64> = repl.iter().map(|r| om + r).collect();
    let energy_sched = vec![e; n];
    let revenue = vec![finance.tariff * 1000.0 * e; n];
    let summary = EconSummary {
        annual_energy_mwh: e,
        pv_share: energy.pv_share(),
        capital,
        om_annual: om,
        om_annual_capital_basis: costs.annual_om(OmBasis::Capital),
        om_total_nominal: om * n as f64,
        om_total_discounted: discount_sum(&om_sched, i),
        replacements_total_nominal: repl.iter().sum(),
        discount_rate: i,
        lcoe: lcoe(capital, &total_sched, &energy_sched, i)?,
        lcoe_om_only: lcoe(capital, &om_sched, &energy_sched, i)?,
        npv: npv(&revenue, &total_sched, i, capital)?,
        payback_simple: payback(capital, revenue[0] - om),
        payback_from_cumulative: report.payback_year(),
        final_cumulative: report.final_cumulative(),
        emissions: avoided_emissions(e, factors),
    };
    Ok((summary, report))
}

/// Writes the cash flow as `year,revenue,cost,net,cumulative`.
pub fn write_cashflow_csv<W: std::io::Write>(report: &CashflowReport, w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for r in &report.rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

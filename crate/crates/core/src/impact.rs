//! Well-to-wheel CO2 by energy pathway and range gained per minute of
//! refueling across powertrains.
//!
//! Only the 386 g/kWh grid-average intensity in the bundled pathway set is a
//! sourced number; the others are illustrative values that reproduce the
//! expected ordering of pathways and are marked as such in outputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImpactError {
    #[error("{what} must be non-negative and finite, got {value}")]
    Negative { what: &'static str, value: f64 },
    #[error("{what} must be positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },
}

fn non_negative(what: &'static str, value: f64) -> Result<f64, ImpactError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(ImpactError::Negative { what, value })
    }
}

fn positive(what: &'static str, value: f64) -> Result<f64, ImpactError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ImpactError::NonPositive { what, value })
    }
}

/// A fuel or electricity production route and the truck that uses it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyPathway {
    pub name: String,
    /// Grams of CO2 per dispensed unit.
    pub intensity: f64,
    pub intensity_unit: String,
    /// Dispensed units per mile for the powertrain on this pathway.
    pub consumption_per_mile: f64,
    pub consumption_unit: String,
    #[serde(default)]
    pub illustrative: bool,
}

/// Bundled pathway set: diesel, grid-charged BEV and four hydrogen routes.
pub fn example_pathways() -> Vec<EnergyPathway> {
    serde_json::from_str(include_str!("../data/pathways.json")).expect("bundled pathways parse")
}

/// Tonnes of CO2 per year for `vmt` miles at `consumption` units per mile.
pub fn co2_annual(vmt: f64, consumption: f64, pathway: &EnergyPathway) -> Result<f64, ImpactError> {
    let vmt = non_negative("vmt", vmt)?;
    let consumption = non_negative("consumption", consumption)?;
    let intensity = non_negative("intensity", pathway.intensity)?;
    Ok(vmt * consumption * intensity / 1e6)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub pathway: String,
    pub intensity: f64,
    pub intensity_unit: String,
    pub vmt: f64,
    pub consumption: f64,
    pub energy: f64,
    pub co2_tonnes_per_yr: f64,
    pub illustrative: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub rows: Vec<ImpactRow>,
}

/// Annual emissions of every pathway at a common mileage.
pub fn impact_report(vmt: f64, pathways: &[EnergyPathway]) -> Result<ImpactReport, ImpactError> {
    let rows = pathways
        .iter()
        .map(|p| {
            Ok(ImpactRow {
                pathway: p.name.clone(),
                intensity: p.intensity,
                intensity_unit: p.intensity_unit.clone(),
                vmt,
                consumption: p.consumption_per_mile,
                energy: vmt * p.consumption_per_mile,
                co2_tonnes_per_yr: co2_annual(vmt, p.consumption_per_mile, p)?,
                illustrative: p.illustrative,
            })
        })
        .collect::<Result<Vec<_>, ImpactError>>()?;
    Ok(ImpactReport { rows })
}

/// Pathway names from highest to lowest emissions per mile; ties keep name order.
pub fn pathway_ranking(report: &ImpactReport) -> Vec<String> {
    let mut rows: Vec<&ImpactRow> = report.rows.iter().collect();
    rows.sort_by(|a, b| {
        let (ka, kb) = (a.consumption * a.intensity, b.consumption * b.intensity);
        kb.total_cmp(&ka).then_with(|| a.pathway.cmp(&b.pathway))
    });
    rows.into_iter().map(|r| r.pathway.clone()).collect()
}

/// Miles of range gained per minute of refueling.
pub fn refuel_rate(replenish_rate: f64, economy: f64) -> Result<f64, ImpactError> {
    Ok(positive("replenish_rate", replenish_rate)? * positive("economy", economy)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Powertrain {
    pub powertrain: String,
    /// Units per minute (kWh/min for chargers).
    pub replenish_rate: f64,
    pub unit: String,
    /// Miles per unit.
    pub economy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefuelRateRow {
    pub powertrain: String,
    pub replenish_rate: f64,
    pub unit: String,
    pub economy: f64,
    pub miles_per_min: f64,
}

/// Bundled refuel-rate comparison: diesel, hydrogen dispensers from 1.8 to
/// 10 kg/min and chargers from 150 to 3750 kW.
pub fn example_powertrains() -> Vec<Powertrain> {
    serde_json::from_str(include_str!("../data/refuel_rates.json")).expect("bundled powertrains parse")
}

pub fn refuel_rates(powertrains: &[Powertrain]) -> Result<Vec<RefuelRateRow>, ImpactError> {
    powertrains
        .iter()
        .map(|p| {
            Ok(RefuelRateRow {
                powertrain: p.powertrain.clone(),
                replenish_rate: p.replenish_rate,
                unit: p.unit.clone(),
                economy: p.economy,
                miles_per_min: refuel_rate(p.replenish_rate, p.economy)?,
            })
        })
        .collect()
}

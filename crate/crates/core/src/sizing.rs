//! Dispenser and charger counts from dispensing ledgers.
//!
//! Utilization is the busy-time share of the horizon per unit of equipment:
//! a site that dispenses `E` at rate `r` keeps one unit busy for `E / r`
//! minutes, and needs enough units that none exceeds the target share `U`.
//! Queueing is not modelled; the target share stands in for availability.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trip::FleetLedger;
use crate::vehicle::{PowertrainKind, VehicleRegistry};

pub const DAY_MINUTES: f64 = 1440.0;
pub const WINDOW_STEP_MINUTES: f64 = 15.0;
pub const C_RATE_LIMIT: f64 = 1.5;

// Keeps exact quotients such as 720 / 720 from rounding up to a second unit.
const COUNT_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SizingError {
    #[error("horizon must be positive, got {0} minutes")]
    NonPositiveHorizon(f64),
    #[error("utilization target must lie in (0, 1], got {0}")]
    InvalidUtilization(f64),
    #[error("equipment {name}: rate must be positive, got {rate}")]
    InvalidEquipment { name: String, rate: f64 },
    #[error("dispensed amount must be non-negative, got {0}")]
    NegativeDemand(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquipmentKind {
    H2Dispenser,
    EvCharger,
}

/// A dispenser (rate in kg/min) or charger (rate in kW).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquipmentClass {
    pub name: String,
    pub kind: EquipmentKind,
    pub rate: f64,
}

impl EquipmentClass {
    pub fn dispenser(kg_per_min: f64) -> Self {
        Self {
            name: format!("h2-{kg_per_min}kg-min"),
            kind: EquipmentKind::H2Dispenser,
            rate: kg_per_min,
        }
    }

    pub fn charger(kw: f64) -> Self {
        Self {
            name: format!("dcfc-{kw}kw"),
            kind: EquipmentKind::EvCharger,
            rate: kw,
        }
    }

    pub fn validate(&self) -> Result<(), SizingError> {
        if self.rate.is_finite() && self.rate > 0.0 {
            Ok(())
        } else {
            Err(SizingError::InvalidEquipment {
                name: self.name.clone(),
                rate: self.rate,
            })
        }
    }

    /// Energy units delivered per minute (kWh/min for chargers).
    pub fn rate_per_min(&self) -> f64 {
        match self.kind {
            EquipmentKind::H2Dispenser => self.rate,
            EquipmentKind::EvCharger => self.rate / 60.0,
        }
    }

    pub fn rate_unit(&self) -> &'static str {
        match self.kind {
            EquipmentKind::H2Dispenser => "kg/min",
            EquipmentKind::EvCharger => "kW",
        }
    }
}

/// Reference equipment: dispensers from 1.8 to 10 kg/min and chargers from
/// 150 to 1250 kW, plus a 3750 kW charger for comparison runs.
pub fn catalog() -> Vec<EquipmentClass> {
    let dispensers = [1.8, 3.6, 7.2, 10.0].map(EquipmentClass::dispenser);
    let chargers = [150.0, 350.0, 750.0, 1250.0, 3750.0].map(EquipmentClass::charger);
    dispensers.into_iter().chain(chargers).collect()
}

fn check_target(utilization: f64, horizon_min: f64) -> Result<(), SizingError> {
    if !(horizon_min.is_finite() && horizon_min > 0.0) {
        return Err(SizingError::NonPositiveHorizon(horizon_min));
    }
    if !(utilization > 0.0 && utilization <= 1.0) {
        return Err(SizingError::InvalidUtilization(utilization));
    }
    Ok(())
}

/// Units of equipment needed to serve `dispensed` within the horizon at the
/// target utilization; zero only when nothing is dispensed.
pub fn dispenser_count(
    dispensed: f64,
    eq: &EquipmentClass,
    utilization: f64,
    horizon_min: f64,
) -> Result<usize, SizingError> {
    check_target(utilization, horizon_min)?;
    eq.validate()?;
    if !(dispensed >= 0.0) {
        return Err(SizingError::NegativeDemand(dispensed));
    }
    if dispensed == 0.0 {
        return Ok(0);
    }
    let busy = dispensed / eq.rate_per_min();
    let units = (busy / (utilization * horizon_min) - COUNT_SLACK).ceil();
    Ok(units.max(1.0) as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSizing {
    pub site_id: String,
    pub equipment: String,
    pub rate: f64,
    pub unit: String,
    pub dispensed: f64,
    pub busy_minutes: f64,
    pub horizon_minutes: f64,
    pub utilization_target: f64,
    pub required_count: usize,
    /// Count needed if the busiest 24-hour window repeated every day.
    pub busiest_day_count: usize,
}

impl SiteSizing {
    pub fn achieved_utilization(&self) -> f64 {
        if self.required_count == 0 {
            0.0
        } else {
            self.busy_minutes / (self.required_count as f64 * self.horizon_minutes)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SizingReport {
    pub sites: Vec<SiteSizing>,
}

/// Sizes every in-route site that dispensed anything.
///
/// The busiest day is the largest mass arriving within any 1440-minute window
/// whose start is a multiple of 15 minutes. Times wrap around the horizon, so
/// the schedule is treated as repeating; for horizons of a day or less the
/// window is the whole horizon.
pub fn size_network(
    ledger: &FleetLedger,
    eq: &EquipmentClass,
    utilization: f64,
    horizon_min: f64,
) -> Result<SizingReport, SizingError> {
    check_target(utilization, horizon_min)?;
    eq.validate()?;
    let mut sites = Vec::new();
    for (site_id, site) in &ledger.sites {
        if site.total_dispensed <= 0.0 {
            continue;
        }
        let required = dispenser_count(site.total_dispensed, eq, utilization, horizon_min)?;
        let busiest_day = if horizon_min <= DAY_MINUTES {
            required
        } else {
            let events: Vec<(f64, f64)> = site
                .events
                .iter()
                .map(|e| (e.arrival_time, e.dispensed))
                .collect();
            let peak = busiest_window(&events, horizon_min);
            dispenser_count(peak, eq, utilization, DAY_MINUTES)?.max(required)
        };
        sites.push(SiteSizing {
            site_id: site_id.clone(),
            equipment: eq.name.clone(),
            rate: eq.rate,
            unit: eq.rate_unit().to_string(),
            dispensed: site.total_dispensed,
            busy_minutes: site.total_dispensed / eq.rate_per_min(),
            horizon_minutes: horizon_min,
            utilization_target: utilization,
            required_count: required,
            busiest_day_count: busiest_day,
        });
    }
    Ok(SizingReport { sites })
}

/// Largest amount arriving in a circular day-long window over the horizon.
fn busiest_window(events: &[(f64, f64)], horizon: f64) -> f64 {
    if events.is_empty() {
        return 0.0;
    }
    let mut times: Vec<(f64, f64)> = events
        .iter()
        .map(|&(t, m)| (t.rem_euclid(horizon), m))
        .collect();
    times.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = times.len();
    // Doubled timeline so windows that wrap are contiguous.
    let unrolled: Vec<(f64, f64)> = times
        .iter()
        .copied()
        .chain(times.iter().map(|&(t, m)| (t + horizon, m)))
        .collect();
    let mut prefix = Vec::with_capacity(2 * n + 1);
    prefix.push(0.0);
    for (_, m) in &unrolled {
        prefix.push(prefix[prefix.len() - 1] + m);
    }
    let (mut lo, mut hi) = (0, 0);
    let mut best: f64 = 0.0;
    let steps = (horizon / WINDOW_STEP_MINUTES).ceil() as usize;
    for k in 0..steps {
        let start = k as f64 * WINDOW_STEP_MINUTES;
        let end = start + DAY_MINUTES;
        while lo < 2 * n && unrolled[lo].0 < start {
            lo += 1;
        }
        hi = hi.max(lo);
        while hi < 2 * n && unrolled[hi].0 < end && hi < lo + n {
            hi += 1;
        }
        best = best.max(prefix[hi] - prefix[lo]);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeEventStat {
    pub site_id: String,
    pub event_time: f64,
    pub power_kw: f64,
    pub nameplate_kwh: f64,
    pub c_rate: f64,
    pub flagged: bool,
}

impl ChargeEventStat {
    pub fn new(site_id: impl Into<String>, event_time: f64, power_kw: f64, nameplate_kwh: f64) -> Self {
        let c_rate = power_kw / nameplate_kwh;
        Self {
            site_id: site_id.into(),
            event_time,
            power_kw,
            nameplate_kwh,
            c_rate,
            flagged: c_rate > C_RATE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SitePowerProfile {
    pub site_id: String,
    pub peak_kw: f64,
    /// Minutes spent at each concurrent power level, ascending by level.
    pub minutes_at_level: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChargeStats {
    pub events: Vec<ChargeEventStat>,
    pub sites: Vec<SitePowerProfile>,
}

/// Per-event C-rates and per-site concurrent charging power. Events of
/// non-battery classes are ignored; an event occupies `[arrival, arrival + dwell)`.
pub fn charge_stats(ledger: &FleetLedger, classes: &VehicleRegistry) -> ChargeStats {
    let mut out = ChargeStats::default();
    for (site_id, site) in &ledger.sites {
        let mut intervals = Vec::new();
        for e in &site.events {
            let Some(vc) = classes.get(&e.vehicle_class_id) else { continue };
            if vc.kind != PowertrainKind::Bev {
                continue;
            }
            let power = vc.power_kw();
            out.events
                .push(ChargeEventStat::new(site_id.clone(), e.arrival_time, power, vc.capacity));
            intervals.push((e.arrival_time, e.arrival_time + e.dwell, power));
        }
        if !intervals.is_empty() {
            out.sites.push(power_profile(site_id, &intervals));
        }
    }
    out
}

fn power_profile(site_id: &str, intervals: &[(f64, f64, f64)]) -> SitePowerProfile {
    // (time, is_start, power); ends sort before starts at equal times.
    let mut edges: Vec<(f64, bool, f64)> = intervals
        .iter()
        .flat_map(|&(s, e, p)| [(s, true, p), (e, false, p)])
        .collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let mut active: Vec<(f64, usize)> = Vec::new();
    let level = |active: &[(f64, usize)]| active.iter().map(|(p, c)| p * *c as f64).sum::<f64>();
    let mut minutes: Vec<(f64, f64)> = Vec::new();
    let mut peak: f64 = 0.0;
    let mut last_t = edges.first().map_or(0.0, |e| e.0);
    for (t, start, p) in edges {
        let current = level(&active);
        if t > last_t && current > 0.0 {
            match minutes.iter_mut().find(|(l, _)| *l == current) {
                Some(entry) => entry.1 += t - last_t,
                None => minutes.push((current, t - last_t)),
            }
        }
        last_t = t;
        match active.iter_mut().position(|(q, _)| *q == p) {
            Some(i) if start => active[i].1 += 1,
            Some(i) => {
                active[i].1 -= 1;
                if active[i].1 == 0 {
                    active.remove(i);
                }
            }
            None => active.push((p, 1)),
        }
        peak = peak.max(level(&active));
    }
    minutes.sort_by(|a, b| a.0.total_cmp(&b.0));
    SitePowerProfile {
        site_id: site_id.to_string(),
        peak_kw: peak,
        minutes_at_level: minutes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trip::{DispenseEvent, SiteLedger};
    use crate::vehicle::VehicleClass;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn worked_counts() {
        let u = 0.5;
        assert_eq!(dispenser_count(1440.0, &EquipmentClass::dispenser(10.0), u, 1440.0).unwrap(), 1);
        assert_eq!(dispenser_count(1440.0, &EquipmentClass::dispenser(1.8), u, 1440.0).unwrap(), 2);
        assert_eq!(dispenser_count(0.0, &EquipmentClass::dispenser(1.8), u, 1440.0).unwrap(), 0);
        // 720 busy minutes against 720 allowed is exactly one unit.
        assert_eq!(dispenser_count(7200.0, &EquipmentClass::dispenser(10.0), u, 1440.0).unwrap(), 1);
        // 1250 kW for 60 min delivers 1250 kWh.
        assert_eq!(dispenser_count(1250.0, &EquipmentClass::charger(1250.0), 1.0, 60.0).unwrap(), 1);
        assert!(matches!(
            dispenser_count(1.0, &EquipmentClass::dispenser(1.8), u, 0.0),
            Err(SizingError::NonPositiveHorizon(_))
        ));
        assert!(dispenser_count(1.0, &EquipmentClass::dispenser(1.8), 0.0, 10.0).is_err());
        assert!(dispenser_count(1.0, &EquipmentClass::dispenser(1.8), 1.2, 10.0).is_err());
    }

    fn ledger(events: &[(f64, f64)]) -> FleetLedger {
        let mut sites = BTreeMap::new();
        sites.insert(
            "s".to_string(),
            SiteLedger {
                total_dispensed: events.iter().map(|e| e.1).sum(),
                events: events
                    .iter()
                    .enumerate()
                    .map(|(i, &(t, m))| DispenseEvent {
                        trip_id: format!("t{i}"),
                        vehicle_class_id: "h2-70".into(),
                        arrival_time: t,
                        dispensed: m,
                        dwell: m / 10.0,
                    })
                    .collect(),
            },
        );
        FleetLedger {
            unit: "kg".into(),
            sites,
            destinations: BTreeMap::new(),
            stranded: vec![],
            total_trips: events.len(),
            completed_trips: events.len(),
            completion_rate: 1.0,
            trips: vec![],
        }
    }

    #[test]
    fn uniform_schedule_busiest_day_matches_average() {
        // 1440 kg every day for a week, spread over each day.
        let events: Vec<(f64, f64)> = (0..7 * 24).map(|h| (h as f64 * 60.0 + 30.0, 60.0)).collect();
        let eq = EquipmentClass::dispenser(1.8);
        let report = size_network(&ledger(&events), &eq, 0.5, 7.0 * 1440.0).unwrap();
        let s = &report.sites[0];
        assert_eq!(s.required_count, 2);
        assert_eq!(s.busiest_day_count, 2);
        assert!(s.achieved_utilization() <= 0.5 + 1e-9);
    }

    #[test]
    fn concentrated_demand_sizes_for_the_peak_day() {
        let events: Vec<(f64, f64)> = (0..24).map(|h| (3.0 * 1440.0 + h as f64 * 60.0, 60.0)).collect();
        let eq = EquipmentClass::dispenser(1.8);
        let report = size_network(&ledger(&events), &eq, 0.5, 7.0 * 1440.0).unwrap();
        let s = &report.sites[0];
        assert_eq!(s.required_count, 1);
        assert_eq!(
            s.busiest_day_count,
            dispenser_count(1440.0, &eq, 0.5, 1440.0).unwrap()
        );
        assert_eq!(s.busiest_day_count, 2);
    }

    #[test]
    fn wrapped_windows_span_the_horizon_end() {
        let events = [(2.0 * 1440.0 - 30.0, 500.0), (10.0, 500.0), (1440.0, 1.0)];
        assert_eq!(busiest_window(&events, 2.0 * 1440.0), 1000.0);
    }

    #[test]
    fn empty_ledger_has_no_rows() {
        let report = size_network(&ledger(&[]), &EquipmentClass::dispenser(10.0), 0.5, 1440.0).unwrap();
        assert!(report.sites.is_empty());
    }

    #[test]
    fn c_rate_flags() {
        let small = ChargeEventStat::new("s", 0.0, 1250.0, 438.0);
        assert!((small.c_rate - 2.854).abs() < 1e-3);
        assert!(small.flagged);
        let big = ChargeEventStat::new("s", 0.0, 1250.0, 1000.0);
        assert_eq!(big.c_rate, 1.25);
        assert!(!big.flagged);
        assert!(!ChargeEventStat::new("s", 0.0, 1500.0, 1000.0).flagged);
    }

    #[test]
    fn concurrent_power() {
        assert_eq!(power_profile("s", &[(0.0, 30.0, 150.0), (30.0, 60.0, 150.0)]).peak_kw, 150.0);
        let p = power_profile("s", &[(0.0, 30.0, 150.0), (10.0, 40.0, 350.0)]);
        assert_eq!(p.peak_kw, 500.0);
        assert_eq!(p.minutes_at_level, vec![(150.0, 10.0), (350.0, 10.0), (500.0, 20.0)]);
    }

    #[test]
    fn charge_stats_reads_bev_events() {
        let classes = VehicleRegistry::new([
            VehicleClass::bev("bev-438", 438.0, 1.5625, 1250.0),
            VehicleClass::fcev("h2-70", 70.0, 0.1, 10.0),
        ])
        .unwrap();
        let mut l = ledger(&[(0.0, 10.0)]);
        l.sites.get_mut("s").unwrap().events.push(DispenseEvent {
            trip_id: "b".into(),
            vehicle_class_id: "bev-438".into(),
            arrival_time: 5.0,
            dispensed: 300.0,
            dwell: 14.4,
        });
        let stats = charge_stats(&l, &classes);
        assert_eq!(stats.events.len(), 1);
        assert!(stats.events[0].flagged);
        assert!((stats.sites[0].peak_kw - 1250.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn count_monotone_in_utilization(mass in 0.1f64..1e5, rate in 1.8f64..10.0, u in 0.05f64..0.95, du in 0.0f64..0.5) {
            let eq = EquipmentClass::dispenser(rate);
            let lo = dispenser_count(mass, &eq, u, 1440.0).unwrap();
            let hi = dispenser_count(mass, &eq, (u + du).min(1.0), 1440.0).unwrap();
            prop_assert!(hi <= lo);
        }

        #[test]
        fn doubling_demand_scales_count(mass in 0.1f64..1e5, rate in 1.8f64..10.0, u in 0.05f64..1.0) {
            let eq = EquipmentClass::dispenser(rate);
            let one = dispenser_count(mass, &eq, u, 1440.0).unwrap();
            let two = dispenser_count(2.0 * mass, &eq, u, 1440.0).unwrap();
            prop_assert!(two >= one && two <= 2 * one + 1);
        }

        #[test]
        fn achieved_utilization_within_target(mass in 0.1f64..1e5, rate in 1.8f64..10.0, u in 0.05f64..1.0) {
            let eq = EquipmentClass::dispenser(rate);
            let n = dispenser_count(mass, &eq, u, 1440.0).unwrap() as f64;
            prop_assert!(mass / rate / (n * 1440.0) <= u * (1.0 + 1e-9) + 1e-9);
        }

        #[test]
        fn busiest_day_dominates_average(
            events in proptest::collection::vec((0.0f64..20_160.0, 0.1f64..500.0), 1..60),
            days in 2u32..14,
        ) {
            let horizon = days as f64 * 1440.0;
            let eq = EquipmentClass::dispenser(1.8);
            let report = size_network(&ledger(&events), &eq, 0.3, horizon).unwrap();
            for s in report.sites {
                prop_assert!(s.busiest_day_count >= s.required_count);
            }
            let total: f64 = events.iter().map(|e| e.1).sum();
            let peak = busiest_window(&events, horizon);
            prop_assert!(peak >= total * 1440.0 / horizon * (1.0 - 1e-12));
            prop_assert!(peak <= total * (1.0 + 1e-12));
        }
    }
}

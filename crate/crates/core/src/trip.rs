//! Single-trip energy simulation and fleet-level dispensing ledgers.
//!
//! A truck leaves full and walks its decision points: the active stations on
//! its route in travel order, then the destination. At a station it refuels
//! to full exactly when the next decision point cannot be reached above the
//! reserve floor. With refuel-to-full this one-step lookahead is the classic
//! farthest-reachable rule, so it completes whenever any stop subset does and
//! uses the fewest stops.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{Direction, TripSpec};
use crate::geo::{CandidateSite, RouteProfile};
use crate::mask::StationMask;
use crate::vehicle::{consumption_rate, PowertrainKind, VehicleClass, VehicleError, VehicleRegistry};

/// Absolute slack on energy comparisons.
pub const ENERGY_TOL: f64 = 1e-9;

/// Slack when checking that a station milepost lies on its route.
const MILEPOST_TOL: f64 = 1e-6;

pub const DEFAULT_SPEED_MPH: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("stations must be sorted by milepost (index {index} is out of order)")]
    UnsortedStations { index: usize },
    #[error("site {site_id} at milepost {milepost} is not on route {route_id} (length {length})")]
    SiteNotOnRoute {
        site_id: String,
        route_id: String,
        milepost: f64,
        length: f64,
    },
    #[error("speed must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("unknown route {0}")]
    UnknownRoute(String),
    #[error("unknown vehicle class {0}")]
    UnknownClass(String),
    #[error("trip is on route {trip_route} but route {given} was supplied")]
    RouteMismatch { trip_route: String, given: String },
    #[error("trip uses class {trip_class} but class {given} was supplied")]
    ClassMismatch { trip_class: String, given: String },
    #[error("class {0} is a diesel reference and cannot be simulated")]
    DieselNotSimulated(String),
    #[error("fleet mixes energy units {0} and {1}")]
    MixedUnits(String, String),
    #[error("mask has {got} entries but there are {expected} candidates")]
    MaskLength { expected: usize, got: usize },
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error("trip {trip_id}: {source}")]
    Trip {
        trip_id: String,
        #[source]
        source: Box<SimError>,
    },
}

impl SimError {
    fn for_trip(self, trip_id: &str) -> Self {
        SimError::Trip {
            trip_id: trip_id.to_string(),
            source: Box::new(self),
        }
    }
}

/// Cumulative energy demand along a route in the direction of travel.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile {
    mileposts: Vec<f64>,
    cumulative: Vec<f64>,
}

impl EnergyProfile {
    pub fn new(route: &RouteProfile, direction: Direction, vc: &VehicleClass) -> Result<Self, SimError> {
        let fwd = route.mileposts();
        let mut cumulative = Vec::with_capacity(fwd.len());
        cumulative.push(0.0);
        for (i, mult) in route.segment_multipliers().iter().enumerate() {
            let rate = consumption_rate(vc, vc.reference_weight, *mult)?;
            cumulative.push(cumulative[i] + rate * (fwd[i + 1] - fwd[i]));
        }
        Ok(match direction {
            Direction::Forward => Self {
                mileposts: fwd.to_vec(),
                cumulative,
            },
            Direction::Reverse => {
                let (length, total) = (route.length(), cumulative[cumulative.len() - 1]);
                Self {
                    mileposts: fwd.iter().rev().map(|m| length - m).collect(),
                    cumulative: cumulative.iter().rev().map(|e| total - e).collect(),
                }
            }
        })
    }

    pub fn length(&self) -> f64 {
        self.mileposts[self.mileposts.len() - 1]
    }

    pub fn total_energy(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    /// Energy consumed from the origin to `milepost`.
    pub fn energy_at(&self, milepost: f64) -> f64 {
        let m = milepost.clamp(0.0, self.length());
        let seg = self.segment_of(&self.mileposts, m);
        let (m0, m1) = (self.mileposts[seg], self.mileposts[seg + 1]);
        let (e0, e1) = (self.cumulative[seg], self.cumulative[seg + 1]);
        if m1 > m0 {
            e0 + (e1 - e0) * (m - m0) / (m1 - m0)
        } else {
            e0
        }
    }

    /// Milepost at which cumulative consumption reaches `energy`.
    pub fn milepost_at_energy(&self, energy: f64) -> f64 {
        let e = energy.clamp(0.0, self.total_energy());
        let seg = self.segment_of(&self.cumulative, e);
        let (m0, m1) = (self.mileposts[seg], self.mileposts[seg + 1]);
        let (e0, e1) = (self.cumulative[seg], self.cumulative[seg + 1]);
        if e1 > e0 {
            m0 + (m1 - m0) * (e - e0) / (e1 - e0)
        } else {
            m0
        }
    }

    fn segment_of(&self, axis: &[f64], x: f64) -> usize {
        axis.partition_point(|&v| v <= x).saturating_sub(1).min(axis.len() - 2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PlanStation {
    /// Caller-defined key (site index or candidate index).
    pub key: usize,
    pub milepost: f64,
    pub energy: f64,
}

/// Everything the refueling policy needs for one trip.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TripPlan {
    pub profile: EnergyProfile,
    pub stations: Vec<PlanStation>,
    pub full: f64,
    pub floor: f64,
}

impl TripPlan {
    /// `sites` are `(key, forward milepost)` pairs in ascending forward order.
    pub fn new(
        route: &RouteProfile,
        direction: Direction,
        vc: &VehicleClass,
        sites: &[(usize, f64)],
    ) -> Result<Self, SimError> {
        let profile = EnergyProfile::new(route, direction, vc)?;
        let length = route.length();
        let mut stations: Vec<PlanStation> = sites
            .iter()
            .map(|&(key, m)| {
                let local = match direction {
                    Direction::Forward => m,
                    Direction::Reverse => length - m,
                }
                .clamp(0.0, profile.length());
                PlanStation {
                    key,
                    milepost: local,
                    energy: profile.energy_at(local),
                }
            })
            .collect();
        if direction == Direction::Reverse {
            stations.reverse();
        }
        Ok(Self {
            profile,
            stations,
            full: vc.effective_full(),
            floor: vc.floor(),
        })
    }
}

/// Hooks into the policy walk; the fast feasibility path uses `()`.
pub(crate) trait PolicyObserver {
    fn arrive(&mut self, _station: usize, _onboard: f64) {}
    fn refuel(&mut self, _station: usize, _arrival_onboard: f64, _dispensed: f64) {}
    fn strand(&mut self, _energy_position: f64) {}
    fn finish(&mut self, _onboard: f64) {}
}

impl PolicyObserver for () {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DriveOutcome {
    pub completed: bool,
    pub stops: usize,
    pub consumed: f64,
    pub dispensed: f64,
    pub onboard: f64,
}

/// Walks the plan with the stations selected by `active` (by position in
/// `plan.stations`).
pub(crate) fn drive<O: PolicyObserver>(
    plan: &TripPlan,
    active: impl Fn(&PlanStation) -> bool,
    obs: &mut O,
) -> DriveOutcome {
    let dest_energy = plan.profile.total_energy();
    let next_active = |from: usize| (from..plan.stations.len()).find(|&i| active(&plan.stations[i]));
    let energy_of = |i: Option<usize>| i.map_or(dest_energy, |i| plan.stations[i].energy);

    let mut onboard = plan.full;
    let mut position = 0.0;
    let mut consumed = 0.0;
    let mut dispensed = 0.0;
    let mut stops = 0;
    let mut target = next_active(0);
    loop {
        let need = energy_of(target) - position;
        if onboard - need < plan.floor - ENERGY_TOL {
            let usable = (onboard - plan.floor).max(0.0);
            obs.strand(position + usable);
            return DriveOutcome {
                completed: false,
                stops,
                consumed: consumed + usable,
                dispensed,
                onboard: onboard - usable,
            };
        }
        onboard -= need;
        consumed += need;
        position = energy_of(target);
        let Some(station) = target else { break };
        obs.arrive(station, onboard);
        let following = next_active(station + 1);
        if onboard - (energy_of(following) - position) < plan.floor - ENERGY_TOL {
            let amount = plan.full - onboard;
            obs.refuel(station, onboard, amount);
            dispensed += amount;
            onboard = plan.full;
            stops += 1;
        }
        target = following;
    }
    obs.finish(onboard);
    DriveOutcome {
        completed: true,
        stops,
        consumed,
        dispensed,
        onboard,
    }
}

/// A station active on a route, at its forward milepost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSite {
    pub site_id: String,
    pub milepost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopEvent {
    pub site_id: String,
    /// Distance from the trip origin in the direction of travel.
    pub milepost: f64,
    pub arrival_time: f64,
    pub arrival_onboard: f64,
    pub dispensed: f64,
    pub dwell: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub milepost: f64,
    pub onboard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripResult {
    pub trip_id: String,
    pub route_id: String,
    pub direction: Direction,
    pub vehicle_class_id: String,
    pub completed: bool,
    pub stranded_milepost: Option<f64>,
    pub stops: Vec<StopEvent>,
    pub destination_dispensed: f64,
    pub consumed: f64,
    pub arrival_onboard: f64,
    /// Onboard energy at the origin, at every active station (before and
    /// after any fill) and at the destination or stranding point. Energy
    /// falls linearly between consecutive points.
    pub trace: Vec<TracePoint>,
}

struct Recorder<'a> {
    plan: &'a TripPlan,
    sites: &'a [ActiveSite],
    vc: &'a VehicleClass,
    depart: f64,
    minutes_per_mile: f64,
    dwell_total: f64,
    stops: Vec<StopEvent>,
    trace: Vec<TracePoint>,
    stranded_at: Option<f64>,
}

impl PolicyObserver for Recorder<'_> {
    fn arrive(&mut self, station: usize, onboard: f64) {
        self.trace.push(TracePoint {
            milepost: self.plan.stations[station].milepost,
            onboard,
        });
    }

    fn refuel(&mut self, station: usize, arrival_onboard: f64, dispensed: f64) {
        let st = &self.plan.stations[station];
        let dwell = dispensed / self.vc.replenish_rate;
        self.stops.push(StopEvent {
            site_id: self.sites[st.key].site_id.clone(),
            milepost: st.milepost,
            arrival_time: self.depart + st.milepost * self.minutes_per_mile + self.dwell_total,
            arrival_onboard,
            dispensed,
            dwell,
        });
        self.dwell_total += dwell;
        self.trace.push(TracePoint {
            milepost: st.milepost,
            onboard: arrival_onboard + dispensed,
        });
    }

    fn strand(&mut self, energy_position: f64) {
        let m = self.plan.profile.milepost_at_energy(energy_position);
        self.stranded_at = Some(m);
        self.trace.push(TracePoint {
            milepost: m,
            onboard: self.plan.floor,
        });
    }

    fn finish(&mut self, onboard: f64) {
        self.trace.push(TracePoint {
            milepost: self.plan.profile.length(),
            onboard,
        });
    }
}

/// Simulates one trip with the given stations active.
///
/// `active_sites` carry forward-direction mileposts on `route` and must be
/// sorted ascending; reverse trips visit them mirrored.
pub fn simulate_trip(
    trip: &TripSpec,
    route: &RouteProfile,
    vc: &VehicleClass,
    active_sites: &[ActiveSite],
    speed_mph: f64,
) -> Result<TripResult, SimError> {
    if !(speed_mph.is_finite() && speed_mph > 0.0) {
        return Err(SimError::NonPositiveSpeed(speed_mph));
    }
    if trip.route_id != route.route_id() {
        return Err(SimError::RouteMismatch {
            trip_route: trip.route_id.clone(),
            given: route.route_id().to_string(),
        });
    }
    if trip.vehicle_class_id != vc.class_id {
        return Err(SimError::ClassMismatch {
            trip_class: trip.vehicle_class_id.clone(),
            given: vc.class_id.clone(),
        });
    }
    if vc.kind == PowertrainKind::DieselRef {
        return Err(SimError::DieselNotSimulated(vc.class_id.clone()));
    }
    let length = route.length();
    for (i, s) in active_sites.iter().enumerate() {
        if !(s.milepost >= -MILEPOST_TOL && s.milepost <= length + MILEPOST_TOL) {
            return Err(SimError::SiteNotOnRoute {
                site_id: s.site_id.clone(),
                route_id: route.route_id().to_string(),
                milepost: s.milepost,
                length,
            });
        }
        if i > 0 && s.milepost < active_sites[i - 1].milepost {
            return Err(SimError::UnsortedStations { index: i });
        }
    }
    let keyed: Vec<(usize, f64)> = active_sites.iter().map(|s| s.milepost).enumerate().collect();
    let plan = TripPlan::new(route, trip.direction, vc, &keyed)?;

    let mut rec = Recorder {
        plan: &plan,
        sites: active_sites,
        vc,
        depart: trip.depart,
        minutes_per_mile: 60.0 / speed_mph,
        dwell_total: 0.0,
        stops: Vec::new(),
        trace: vec![TracePoint {
            milepost: 0.0,
            onboard: plan.full,
        }],
        stranded_at: None,
    };
    let outcome = drive(&plan, |_| true, &mut rec);
    Ok(TripResult {
        trip_id: trip.trip_id.clone(),
        route_id: trip.route_id.clone(),
        direction: trip.direction,
        vehicle_class_id: vc.class_id.clone(),
        completed: outcome.completed,
        stranded_milepost: rec.stranded_at,
        stops: rec.stops,
        destination_dispensed: if outcome.completed {
            plan.full - outcome.onboard
        } else {
            0.0
        },
        consumed: outcome.consumed,
        arrival_onboard: outcome.onboard,
        trace: rec.trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispenseEvent {
    pub trip_id: String,
    pub vehicle_class_id: String,
    pub arrival_time: f64,
    pub dispensed: f64,
    pub dwell: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SiteLedger {
    pub total_dispensed: f64,
    pub events: Vec<DispenseEvent>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DestinationLedger {
    pub total_dispensed: f64,
    pub event_count: usize,
}

/// Fleet-wide dispensing by site, with per-trip results in trip id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetLedger {
    pub unit: String,
    pub sites: BTreeMap<String, SiteLedger>,
    pub destinations: BTreeMap<String, DestinationLedger>,
    pub stranded: Vec<String>,
    pub total_trips: usize,
    pub completed_trips: usize,
    pub completion_rate: f64,
    pub trips: Vec<TripResult>,
}

/// Ledger key of the endpoint where a trip finishes.
pub fn destination_key(route_id: &str, direction: Direction) -> String {
    match direction {
        Direction::Forward => format!("{route_id}:end"),
        Direction::Reverse => format!("{route_id}:start"),
    }
}

/// Active sites on each route for a mask, sorted by forward milepost.
pub fn active_sites_by_route(
    candidates: &[CandidateSite],
    mask: &StationMask,
) -> Result<BTreeMap<String, Vec<ActiveSite>>, SimError> {
    if mask.len() != candidates.len() {
        return Err(SimError::MaskLength {
            expected: candidates.len(),
            got: mask.len(),
        });
    }
    let mut by_route: BTreeMap<String, Vec<(usize, ActiveSite)>> = BTreeMap::new();
    for i in mask.active() {
        let c = &candidates[i];
        for (route_id, snap) in &c.snaps {
            by_route.entry(route_id.clone()).or_default().push((
                i,
                ActiveSite {
                    site_id: c.site_id.clone(),
                    milepost: snap.milepost,
                },
            ));
        }
    }
    Ok(by_route
        .into_iter()
        .map(|(route, mut sites)| {
            sites.sort_by(|a, b| a.1.milepost.total_cmp(&b.1.milepost).then(a.0.cmp(&b.0)));
            (route, sites.into_iter().map(|(_, s)| s).collect())
        })
        .collect())
}

/// Checks that the fleet can be simulated and shares one energy unit.
pub(crate) fn fleet_unit(
    trips: &[TripSpec],
    routes: &BTreeMap<String, RouteProfile>,
    classes: &VehicleRegistry,
) -> Result<String, SimError> {
    let mut unit: Option<&str> = None;
    for t in trips {
        if !routes.contains_key(&t.route_id) {
            return Err(SimError::UnknownRoute(t.route_id.clone()).for_trip(&t.trip_id));
        }
        let vc = classes
            .get(&t.vehicle_class_id)
            .ok_or_else(|| SimError::UnknownClass(t.vehicle_class_id.clone()).for_trip(&t.trip_id))?;
        if vc.kind == PowertrainKind::DieselRef {
            return Err(SimError::DieselNotSimulated(vc.class_id.clone()).for_trip(&t.trip_id));
        }
        match unit {
            Some(u) if u != vc.capacity_unit => {
                return Err(SimError::MixedUnits(u.to_string(), vc.capacity_unit.clone()))
            }
            _ => unit = Some(&vc.capacity_unit),
        }
    }
    Ok(unit.unwrap_or_default().to_string())
}

/// Simulates every trip under `mask` and aggregates the dispensing ledger.
///
/// Trips run in parallel; results are merged in trip id order so the ledger
/// does not depend on the number of workers.
pub fn simulate_fleet(
    trips: &[TripSpec],
    routes: &BTreeMap<String, RouteProfile>,
    classes: &VehicleRegistry,
    mask: &StationMask,
    candidates: &[CandidateSite],
    speed_mph: f64,
) -> Result<FleetLedger, SimError> {
    let unit = fleet_unit(trips, routes, classes)?;
    let active = active_sites_by_route(candidates, mask)?;
    let none = Vec::new();
    let results: Vec<Result<TripResult, SimError>> = trips
        .par_iter()
        .map(|t| {
            let route = &routes[&t.route_id];
            let vc = classes.get(&t.vehicle_class_id).expect("checked above");
            let sites = active.get(&t.route_id).unwrap_or(&none);
            simulate_trip(t, route, vc, sites, speed_mph).map_err(|e| e.for_trip(&t.trip_id))
        })
        .collect();
    let mut results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    results.sort_by(|a, b| a.trip_id.cmp(&b.trip_id));
    Ok(build_ledger(unit, results))
}

pub(crate) fn build_ledger(unit: String, results: Vec<TripResult>) -> FleetLedger {
    let mut sites: BTreeMap<String, SiteLedger> = BTreeMap::new();
    let mut destinations: BTreeMap<String, DestinationLedger> = BTreeMap::new();
    let mut stranded = Vec::new();
    for r in &results {
        for s in &r.stops {
            let entry = sites.entry(s.site_id.clone()).or_default();
            entry.total_dispensed += s.dispensed;
            entry.events.push(DispenseEvent {
                trip_id: r.trip_id.clone(),
                vehicle_class_id: r.vehicle_class_id.clone(),
                arrival_time: s.arrival_time,
                dispensed: s.dispensed,
                dwell: s.dwell,
            });
        }
        if r.completed {
            let d = destinations
                .entry(destination_key(&r.route_id, r.direction))
                .or_default();
            d.total_dispensed += r.destination_dispensed;
            d.event_count += 1;
        } else {
            stranded.push(r.trip_id.clone());
        }
    }
    let total = results.len();
    let completed = total - stranded.len();
    FleetLedger {
        unit,
        sites,
        destinations,
        stranded,
        total_trips: total,
        completed_trips: completed,
        completion_rate: if total == 0 {
            1.0
        } else {
            completed as f64 / total as f64
        },
        trips: results,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{GeoPoint, Snap, EARTH_RADIUS_MI};

    const MI_PER_DEG: f64 = EARTH_RADIUS_MI * std::f64::consts::PI / 180.0;

    fn route(id: &str, miles: f64) -> RouteProfile {
        RouteProfile::build(
            id,
            vec![
                GeoPoint { lat: 0.0, lon: 0.0 },
                GeoPoint {
                    lat: 0.0,
                    lon: miles / MI_PER_DEG,
                },
            ],
            None,
        )
        .unwrap()
    }

    fn trip(id: &str, route_id: &str, direction: Direction) -> TripSpec {
        TripSpec {
            trip_id: id.into(),
            route_id: route_id.into(),
            direction,
            depart: 0.0,
            vehicle_class_id: "h2-70".into(),
        }
    }

    fn h2() -> VehicleClass {
        VehicleClass::fcev("h2-70", 70.0, 0.10, 10.0)
    }

    fn site(id: &str, m: f64) -> ActiveSite {
        ActiveSite {
            site_id: id.into(),
            milepost: m,
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn short_trip_needs_no_stops() {
        let r = simulate_trip(&trip("t", "r", Direction::Forward), &route("r", 100.0), &h2(), &[], 50.0).unwrap();
        assert!(r.completed);
        assert!(r.stops.is_empty());
        assert!(close(r.consumed, 10.0));
        assert!(close(r.destination_dispensed, 10.0));
        assert!(r.stranded_milepost.is_none());
    }

    #[test]
    fn mid_route_station_is_used() {
        let rt = route("r", 600.0);
        let r = simulate_trip(&trip("t", "r", Direction::Forward), &rt, &h2(), &[site("s", 300.0)], 50.0).unwrap();
        assert!(r.completed);
        assert_eq!(r.stops.len(), 1);
        let stop = &r.stops[0];
        assert!(close(stop.arrival_onboard, 40.0));
        assert!(close(stop.dispensed, 30.0));
        assert!(close(stop.dwell, 3.0));
        assert!(close(stop.arrival_time, 360.0));
        assert!(close(r.arrival_onboard, 40.0));
        assert!(close(r.destination_dispensed, 30.0));
        assert!(close(70.0 + 30.0 - r.consumed, r.arrival_onboard));
    }

    #[test]
    fn long_trip_strands_at_reserve_range() {
        let r = simulate_trip(&trip("t", "r", Direction::Forward), &route("r", 600.0), &h2(), &[], 50.0).unwrap();
        assert!(!r.completed);
        assert!(close(r.stranded_milepost.unwrap(), 560.0));
        assert!(close(r.arrival_onboard, 14.0));
        assert_eq!(r.destination_dispensed, 0.0);
        assert_eq!(r.trace.last().unwrap().onboard, 14.0);
    }

    #[test]
    fn skips_stations_when_next_point_is_reachable() {
        let rt = route("r", 600.0);
        let sites = [site("a", 100.0), site("b", 300.0), site("c", 500.0)];
        let r = simulate_trip(&trip("t", "r", Direction::Forward), &rt, &h2(), &sites, 50.0).unwrap();
        assert!(r.completed);
        let ids: Vec<_> = r.stops.iter().map(|s| s.site_id.as_str()).collect();
        assert_eq!(ids, vec!["c"]);
    }

    #[test]
    fn reverse_trips_mirror_mileposts() {
        let rt = route("r", 600.0);
        let r = simulate_trip(&trip("t", "r", Direction::Reverse), &rt, &h2(), &[site("s500", 500.0), site("s550", 550.0)], 50.0)
            .unwrap();
        // Travelling west the sites sit at local miles 50 and 100; 500 miles remain after either.
        assert!(r.completed);
        assert_eq!(r.stops.len(), 1);
        assert_eq!(r.stops[0].site_id, "s500");
        assert!(close(r.stops[0].milepost, 100.0));
    }

    #[test]
    fn segment_multipliers_change_consumption() {
        let third = 200.0 / MI_PER_DEG;
        let rt = RouteProfile::build(
            "r",
            (0..4).map(|i| GeoPoint { lat: 0.0, lon: i as f64 * third }).collect(),
            Some(vec![1.0, 1.5, 1.0]),
        )
        .unwrap();
        let fwd = EnergyProfile::new(&rt, Direction::Forward, &h2()).unwrap();
        assert!(close(fwd.total_energy(), 70.0));
        assert!(close(fwd.energy_at(300.0), 35.0));
        assert!(close(fwd.milepost_at_energy(35.0), 300.0));
        let rev = EnergyProfile::new(&rt, Direction::Reverse, &h2()).unwrap();
        assert!(close(rev.energy_at(100.0), 10.0));
        assert!(close(rev.energy_at(300.0), 35.0));

        let r = simulate_trip(&trip("t", "r", Direction::Forward), &rt, &h2(), &[], 50.0).unwrap();
        // 50 kg by mile 400, then 6 kg more of the 56 kg window at 0.10 kg/mi.
        assert!(close(r.stranded_milepost.unwrap(), 460.0));
    }

    #[test]
    fn input_errors() {
        let rt = route("r", 600.0);
        let t = trip("t", "r", Direction::Forward);
        assert!(matches!(
            simulate_trip(&t, &rt, &h2(), &[site("a", 300.0), site("b", 100.0)], 50.0),
            Err(SimError::UnsortedStations { index: 1 })
        ));
        assert!(matches!(
            simulate_trip(&t, &rt, &h2(), &[site("a", 700.0)], 50.0),
            Err(SimError::SiteNotOnRoute { .. })
        ));
        assert!(simulate_trip(&t, &rt, &h2(), &[], 0.0).is_err());
        let diesel = VehicleClass {
            kind: PowertrainKind::DieselRef,
            ..h2()
        };
        assert!(matches!(
            simulate_trip(&t, &rt, &diesel, &[], 50.0),
            Err(SimError::DieselNotSimulated(_))
        ));
    }

    fn candidate(id: &str, route_id: &str, m: f64) -> CandidateSite {
        let mut c = CandidateSite::unsnapped(id, GeoPoint { lat: 0.0, lon: m / MI_PER_DEG });
        c.snaps.insert(
            route_id.into(),
            Snap {
                milepost: m,
                snap_distance: 0.0,
            },
        );
        c
    }

    fn fleet_world() -> (BTreeMap<String, RouteProfile>, VehicleRegistry) {
        let mut routes = BTreeMap::new();
        routes.insert("short".to_string(), route("short", 100.0));
        routes.insert("long".to_string(), route("long", 600.0));
        (routes, VehicleRegistry::new([h2()]).unwrap())
    }

    #[test]
    fn fleet_examples() {
        let (routes, classes) = fleet_world();
        let empty = simulate_fleet(&[], &routes, &classes, &StationMask::none(0), &[], 50.0).unwrap();
        assert_eq!(empty.completion_rate, 1.0);
        assert_eq!(empty.total_trips, 0);

        let trips = [trip("b", "long", Direction::Forward), trip("a", "short", Direction::Forward)];
        let ledger = simulate_fleet(&trips, &routes, &classes, &StationMask::none(0), &[], 50.0).unwrap();
        assert_eq!(ledger.completion_rate, 0.5);
        assert_eq!(ledger.stranded, vec!["b".to_string()]);
        assert_eq!(ledger.trips[0].trip_id, "a");
        assert!(close(ledger.destinations["short:end"].total_dispensed, 10.0));

        let cands = [candidate("x", "short", 50.0), candidate("y", "long", 300.0)];
        let short_only = [trip("a", "short", Direction::Forward), trip("c", "short", Direction::Reverse)];
        let all = simulate_fleet(&short_only, &routes, &classes, &StationMask::all(2), &cands, 50.0).unwrap();
        assert!(all.sites.is_empty());
        assert_eq!(all.destinations.len(), 2);

        let served = simulate_fleet(&trips, &routes, &classes, &StationMask::all(2), &cands, 50.0).unwrap();
        assert_eq!(served.completion_rate, 1.0);
        assert!(close(served.sites["y"].total_dispensed, 30.0));
        assert_eq!(served.sites["y"].events.len(), 1);
        assert!(matches!(
            simulate_fleet(&trips, &routes, &classes, &StationMask::all(1), &cands, 50.0),
            Err(SimError::MaskLength { .. })
        ));
    }

    #[test]
    fn fleet_rejects_unknown_references() {
        let (routes, classes) = fleet_world();
        let bad = [trip("z", "nowhere", Direction::Forward)];
        match simulate_fleet(&bad, &routes, &classes, &StationMask::none(0), &[], 50.0) {
            Err(SimError::Trip { trip_id, .. }) => assert_eq!(trip_id, "z"),
            other => panic!("{other:?}"),
        }
    }
}

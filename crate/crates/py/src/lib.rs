//! Python bindings for the corridor planner.
//!
//! Results that are plain records (trip results, ledgers, solutions) cross
//! the boundary as dicts and lists built from their JSON form.

use std::collections::BTreeMap;

use corridor_core::demand::load_trips;
use corridor_core::geo::{self, filter_candidates};
use corridor_core::impact::{self, EnergyPathway};
use corridor_core::io as cio;
use corridor_core::siting::{exhaustive_optimize, ga_optimize};
use corridor_core::sizing::{self, EquipmentClass};
use corridor_core::trip::{self, ActiveSite};
use corridor_core::{Direction, GaConfig, GeoPoint, StationMask, TripSpec};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, value: &impl Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(PyModule::import(py, "json")?.call_method1("loads", (text,))?.unbind())
}

/// Great-circle distance in miles.
#[pyfunction]
fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    geo::haversine(GeoPoint { lat: lat1, lon: lon1 }, GeoPoint { lat: lat2, lon: lon2 })
}

/// A milepost-referenced route polyline.
#[pyclass(frozen)]
struct Route {
    inner: corridor_core::RouteProfile,
}

#[pymethods]
impl Route {
    #[new]
    #[pyo3(signature = (route_id, vertices, segment_multipliers=None))]
    fn new(route_id: String, vertices: Vec<(f64, f64)>, segment_multipliers: Option<Vec<f64>>) -> PyResult<Self> {
        let vertices = vertices.into_iter().map(|(lat, lon)| GeoPoint { lat, lon }).collect();
        let inner = corridor_core::RouteProfile::build(route_id, vertices, segment_multipliers).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn route_id(&self) -> String {
        self.inner.route_id().to_string()
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length()
    }

    #[getter]
    fn mileposts(&self) -> Vec<f64> {
        self.inner.mileposts().to_vec()
    }

    /// `(milepost, snap_distance)` of a point projected onto the route.
    fn snap(&self, lat: f64, lon: f64) -> (f64, f64) {
        let s = geo::snap_site(GeoPoint { lat, lon }, &self.inner);
        (s.milepost, s.snap_distance)
    }
}

#[pyclass(frozen)]
struct VehicleClass {
    inner: corridor_core::VehicleClass,
}

#[pymethods]
impl VehicleClass {
    /// Hydrogen truck: tank in kg, consumption in kg/mile, fill rate in kg/min.
    #[staticmethod]
    fn fcev(class_id: String, capacity_kg: f64, kg_per_mile: f64, kg_per_min: f64) -> PyResult<Self> {
        let inner = corridor_core::VehicleClass::fcev(class_id, capacity_kg, kg_per_mile, kg_per_min);
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    /// Battery truck: nameplate kWh, consumption in kWh/mile, charger kW.
    #[staticmethod]
    fn bev(class_id: String, nameplate_kwh: f64, kwh_per_mile: f64, charger_kw: f64) -> PyResult<Self> {
        let inner = corridor_core::VehicleClass::bev(class_id, nameplate_kwh, kwh_per_mile, charger_kw);
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn class_id(&self) -> String {
        self.inner.class_id.clone()
    }

    #[getter]
    fn effective_full(&self) -> f64 {
        self.inner.effective_full()
    }

    #[getter]
    fn floor(&self) -> f64 {
        self.inner.floor()
    }
}

/// Simulates one trip; `sites` are `(site_id, forward milepost)` pairs.
#[pyfunction]
#[pyo3(signature = (route, vehicle, sites, direction="forward", depart=0.0, speed_mph=50.0))]
fn simulate_trip(
    py: Python<'_>,
    route: &Route,
    vehicle: &VehicleClass,
    sites: Vec<(String, f64)>,
    direction: &str,
    depart: f64,
    speed_mph: f64,
) -> PyResult<Py<PyAny>> {
    let direction: Direction = direction.parse().map_err(err)?;
    let mut active: Vec<ActiveSite> = sites
        .into_iter()
        .map(|(site_id, milepost)| ActiveSite { site_id, milepost })
        .collect();
    active.sort_by(|a, b| a.milepost.total_cmp(&b.milepost));
    let spec = TripSpec {
        trip_id: "trip".into(),
        route_id: route.inner.route_id().to_string(),
        direction,
        depart,
        vehicle_class_id: vehicle.inner.class_id.clone(),
    };
    let result = trip::simulate_trip(&spec, &route.inner, &vehicle.inner, &active, speed_mph).map_err(err)?;
    to_py(py, &result)
}

/// A siting problem loaded from route, site, trip and vehicle files.
#[pyclass(frozen)]
struct Scenario {
    inner: corridor_core::Scenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    #[pyo3(signature = (routes, sites, trips, vehicles, radius_mi=5.0, speed_mph=50.0))]
    fn from_files(
        routes: &str,
        sites: &str,
        trips: &str,
        vehicles: &str,
        radius_mi: f64,
        speed_mph: f64,
    ) -> PyResult<Self> {
        let routes: BTreeMap<_, _> = cio::load_routes(routes).map_err(err)?;
        let classes = cio::read_vehicle_classes(&String::from_utf8_lossy(&cio::read_file(vehicles).map_err(err)?))
            .map_err(err)?;
        let list: Vec<_> = routes.values().cloned().collect();
        let candidates = filter_candidates(&cio::load_sites(sites).map_err(err)?, &list, radius_mi).map_err(err)?;
        let trips = load_trips(trips, &routes, &classes).map_err(err)?;
        let inner = corridor_core::Scenario::new(routes, classes, candidates, trips, speed_mph).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn candidate_ids(&self) -> Vec<String> {
        self.inner.candidates().iter().map(|c| c.site_id.clone()).collect()
    }

    #[getter]
    fn trip_count(&self) -> usize {
        self.inner.trips().len()
    }

    /// Trips stranded with the sites of `mask` (hex, "all" or "none") active.
    fn stranded_count(&self, mask: &str) -> PyResult<usize> {
        let m = StationMask::parse(mask, self.inner.candidate_count()).map_err(err)?;
        Ok(self.inner.stranded_count(&m))
    }

    /// Fleet ledger for a mask.
    fn simulate(&self, py: Python<'_>, mask: &str) -> PyResult<Py<PyAny>> {
        let m = StationMask::parse(mask, self.inner.candidate_count()).map_err(err)?;
        to_py(py, &self.inner.simulate(&m).map_err(err)?)
    }

    /// Smallest station set leaving no trip stranded. Returns the summary
    /// with the selected site ids; the ledger is omitted.
    #[pyo3(signature = (seed=0, exact=false))]
    fn optimize(&self, py: Python<'_>, seed: u64, exact: bool) -> PyResult<Py<PyAny>> {
        let sol = if exact {
            exhaustive_optimize(&self.inner)
        } else {
            ga_optimize(&self.inner, &GaConfig { seed, ..GaConfig::default() })
        }
        .map_err(err)?;
        let mut summary = cio::solution_summary(&sol, seed);
        let sites: Vec<String> = sol
            .mask
            .active()
            .map(|i| self.inner.candidates()[i].site_id.clone())
            .collect();
        summary["sites"] = serde_json::json!(sites);
        to_py(py, &summary)
    }
}

/// Dispensers (kind "h2_dispenser", rate in kg/min) or chargers (kind
/// "ev_charger", rate in kW) needed at a utilization target.
#[pyfunction]
#[pyo3(signature = (dispensed, rate, utilization, horizon_min=1440.0, kind="h2_dispenser"))]
fn dispenser_count(dispensed: f64, rate: f64, utilization: f64, horizon_min: f64, kind: &str) -> PyResult<usize> {
    let eq = match kind {
        "h2_dispenser" => EquipmentClass::dispenser(rate),
        "ev_charger" => EquipmentClass::charger(rate),
        other => return Err(err(format!("unknown equipment kind {other}"))),
    };
    sizing::dispenser_count(dispensed, &eq, utilization, horizon_min).map_err(err)
}

/// Tonnes of CO2 per year at `intensity` grams per dispensed unit.
#[pyfunction]
fn co2_annual(vmt: f64, consumption: f64, intensity: f64) -> PyResult<f64> {
    let pathway = EnergyPathway {
        name: String::new(),
        intensity,
        intensity_unit: String::new(),
        consumption_per_mile: consumption,
        consumption_unit: String::new(),
        illustrative: false,
    };
    impact::co2_annual(vmt, consumption, &pathway).map_err(err)
}

/// Miles of range gained per minute of refueling.
#[pyfunction]
fn refuel_rate(replenish_rate: f64, economy: f64) -> PyResult<f64> {
    impact::refuel_rate(replenish_rate, economy).map_err(err)
}

#[pymodule]
fn corridor_planner(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(haversine, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_trip, m)?)?;
    m.add_function(wrap_pyfunction!(dispenser_count, m)?)?;
    m.add_function(wrap_pyfunction!(co2_annual, m)?)?;
    m.add_function(wrap_pyfunction!(refuel_rate, m)?)?;
    m.add_class::<Route>()?;
    m.add_class::<VehicleClass>()?;
    m.add_class::<Scenario>()?;
    Ok(())
}

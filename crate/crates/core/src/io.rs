//! File formats: route and site inputs, and the CSV/GeoJSON outputs of each
//! pipeline stage.
//!
//! Floats are written with Rust's shortest round-trip formatting, so output
//! bytes depend only on the values.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde_json::{json, Value};
use thiserror::Error;

use crate::geo::{CandidateSite, GeoError, GeoPoint, RouteProfile};
use crate::impact::{ImpactReport, RefuelRateRow};
use crate::siting::{CompletionCurve, RolloutYear, SitingSolution};
use crate::sizing::{ChargeStats, SizingReport};
use crate::trip::{FleetLedger, TripResult};
use crate::vehicle::{VehicleClass, VehicleError, VehicleRegistry};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },
    #[error("{0}")]
    Format(String),
    #[error("route {route_id}: {source}")]
    Route { route_id: String, source: GeoError },
    #[error("site {site_id}: {source}")]
    Site { site_id: String, source: GeoError },
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Write(#[from] std::io::Error),
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Vec<u8>, IoError> {
    let path = path.as_ref();
    std::fs::read(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn headers(rdr: &mut csv::Reader<impl Read>, required: &[&str]) -> Result<BTreeMap<String, usize>, IoError> {
    let map: BTreeMap<String, usize> = rdr
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    for col in required {
        if !map.contains_key(*col) {
            return Err(IoError::Parse {
                line: 1,
                column: col.to_string(),
                message: "missing column".into(),
            });
        }
    }
    Ok(map)
}

fn parse_f64(record: &csv::StringRecord, cols: &BTreeMap<String, usize>, name: &str) -> Result<f64, IoError> {
    let line = record.position().map_or(0, |p| p.line());
    let raw = record.get(cols[name]).unwrap_or("");
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| IoError::Parse {
            line,
            column: name.to_string(),
            message: format!("expected a number, got {raw:?}"),
        })
}

/// Routes from a `route_id,seq,lat,lon[,segment_multiplier]` CSV. Rows may
/// come in any order; vertices are ordered by `seq`. A row's multiplier applies
/// to the segment starting at that vertex, so the last row's value is ignored.
/// Blank multipliers default to 1.
pub fn read_routes(reader: impl Read) -> Result<BTreeMap<String, RouteProfile>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let cols = headers(&mut rdr, &["route_id", "seq", "lat", "lon"])?;
    let has_mult = cols.contains_key("segment_multiplier");
    let mut rows: BTreeMap<String, Vec<(i64, GeoPoint, Option<f64>, u64)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let route_id = record.get(cols["route_id"]).unwrap_or("").to_string();
        if route_id.is_empty() {
            return Err(IoError::Parse {
                line,
                column: "route_id".into(),
                message: "empty route id".into(),
            });
        }
        let seq_raw = record.get(cols["seq"]).unwrap_or("");
        let seq: i64 = seq_raw.parse().map_err(|_| IoError::Parse {
            line,
            column: "seq".into(),
            message: format!("expected an integer, got {seq_raw:?}"),
        })?;
        let lat = parse_f64(&record, &cols, "lat")?;
        let lon = parse_f64(&record, &cols, "lon")?;
        let mult = match has_mult {
            true if !record.get(cols["segment_multiplier"]).unwrap_or("").is_empty() => {
                Some(parse_f64(&record, &cols, "segment_multiplier")?)
            }
            _ => None,
        };
        rows.entry(route_id)
            .or_default()
            .push((seq, GeoPoint { lat, lon }, mult, line));
    }
    let mut routes = BTreeMap::new();
    for (route_id, mut vs) in rows {
        vs.sort_by_key(|v| v.0);
        if let Some(w) = vs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(IoError::Parse {
                line: w[1].3,
                column: "seq".into(),
                message: format!("route {route_id} repeats seq {}", w[1].0),
            });
        }
        let multipliers = vs.iter().any(|v| v.2.is_some()).then(|| {
            vs[..vs.len() - 1]
                .iter()
                .map(|v| v.2.unwrap_or(1.0))
                .collect::<Vec<_>>()
        });
        let vertices = vs.iter().map(|v| v.1).collect();
        let profile = RouteProfile::build(route_id.clone(), vertices, multipliers).map_err(|source| {
            IoError::Route {
                route_id: route_id.clone(),
                source,
            }
        })?;
        routes.insert(route_id, profile);
    }
    Ok(routes)
}

fn check_site(site_id: &str, lat: f64, lon: f64, seen: &mut Vec<String>) -> Result<CandidateSite, IoError> {
    if site_id.is_empty() {
        return Err(IoError::Format("site with empty site_id".into()));
    }
    if seen.iter().any(|s| s == site_id) {
        return Err(IoError::Format(format!("duplicate site_id {site_id}")));
    }
    seen.push(site_id.to_string());
    let location = GeoPoint::new(lat, lon).map_err(|source| IoError::Site {
        site_id: site_id.to_string(),
        source,
    })?;
    Ok(CandidateSite::unsnapped(site_id, location))
}

/// Candidate sites from a `site_id,lat,lon` CSV, in file order.
pub fn read_sites_csv(reader: impl Read) -> Result<Vec<CandidateSite>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let cols = headers(&mut rdr, &["site_id", "lat", "lon"])?;
    let mut seen = Vec::new();
    let mut sites = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let id = record.get(cols["site_id"]).unwrap_or("");
        let lat = parse_f64(&record, &cols, "lat")?;
        let lon = parse_f64(&record, &cols, "lon")?;
        sites.push(check_site(id, lat, lon, &mut seen)?);
    }
    Ok(sites)
}

/// Candidate sites from a FeatureCollection of Point features carrying a
/// `site_id` property, in feature order.
pub fn read_sites_geojson(text: &str) -> Result<Vec<CandidateSite>, IoError> {
    let doc: Value = serde_json::from_str(text)?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| IoError::Format("expected a FeatureCollection with a features array".into()))?;
    let mut seen = Vec::new();
    let mut sites = Vec::new();
    for (i, f) in features.iter().enumerate() {
        let bad = |m: &str| IoError::Format(format!("feature {i}: {m}"));
        let geom = f.get("geometry").ok_or_else(|| bad("missing geometry"))?;
        if geom.get("type").and_then(Value::as_str) != Some("Point") {
            return Err(bad("geometry must be a Point"));
        }
        let coords = geom
            .get("coordinates")
            .and_then(Value::as_array)
            .filter(|c| c.len() >= 2)
            .ok_or_else(|| bad("Point needs [lon, lat] coordinates"))?;
        let lon = coords[0].as_f64().ok_or_else(|| bad("non-numeric longitude"))?;
        let lat = coords[1].as_f64().ok_or_else(|| bad("non-numeric latitude"))?;
        let id = match f.pointer("/properties/site_id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(bad("missing site_id property")),
        };
        sites.push(check_site(&id, lat, lon, &mut seen)?);
    }
    Ok(sites)
}

/// Reads sites from `.csv` files as CSV and from anything else as GeoJSON.
pub fn load_sites(path: impl AsRef<Path>) -> Result<Vec<CandidateSite>, IoError> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_sites_csv(bytes.as_slice())
    } else {
        read_sites_geojson(&String::from_utf8_lossy(&bytes))
    }
}

pub fn load_routes(path: impl AsRef<Path>) -> Result<BTreeMap<String, RouteProfile>, IoError> {
    read_routes(read_file(path)?.as_slice())
}

/// Vehicle classes from a JSON array.
pub fn read_vehicle_classes(text: &str) -> Result<VehicleRegistry, IoError> {
    let classes: Vec<VehicleClass> = serde_json::from_str(text)?;
    Ok(VehicleRegistry::new(classes)?)
}

fn point(p: GeoPoint) -> Value {
    json!({"type": "Point", "coordinates": [p.lon, p.lat]})
}

pub fn candidates_geojson(candidates: &[CandidateSite]) -> Value {
    let features: Vec<Value> = candidates
        .iter()
        .map(|c| {
            let snaps: Vec<Value> = c
                .snaps
                .iter()
                .map(|(route_id, s)| {
                    json!({
                        "route_id": route_id,
                        "milepost_mi": s.milepost,
                        "snap_distance_mi": s.snap_distance,
                    })
                })
                .collect();
            json!({
                "type": "Feature",
                "geometry": point(c.location),
                "properties": {"site_id": c.site_id, "snaps": snaps},
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

/// Selected sites with their dispensed totals, for circle-size maps.
pub fn solution_geojson(candidates: &[CandidateSite], solution: &SitingSolution) -> Value {
    let features: Vec<Value> = solution
        .mask
        .active()
        .map(|i| {
            let c = &candidates[i];
            let site = solution.ledger.sites.get(&c.site_id);
            json!({
                "type": "Feature",
                "geometry": point(c.location),
                "properties": {
                    "site_id": c.site_id,
                    "total_dispensed": site.map_or(0.0, |s| s.total_dispensed),
                    "event_count": site.map_or(0, |s| s.events.len()),
                },
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn solution_summary(solution: &SitingSolution, seed: u64) -> Value {
    json!({
        "station_count": solution.station_count,
        "stranded_count": solution.stranded_count,
        "completion_rate": solution.completion_rate,
        "fitness": solution.fitness,
        "generations_run": solution.generations_run,
        "seed": seed,
        "feasible": solution.feasible,
        "method": solution.method,
        "mask_hex": solution.mask.to_hex(),
    })
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// One row per in-route site, then one per trip destination.
pub fn write_ledger_csv(w: impl Write, ledger: &FleetLedger) -> Result<(), IoError> {
    let mut out = writer(w);
    out.write_record(["site_id", "role", "total_dispensed", "unit", "event_count"])?;
    for (id, s) in &ledger.sites {
        out.write_record([
            id.clone(),
            "inroute".into(),
            s.total_dispensed.to_string(),
            ledger.unit.clone(),
            s.events.len().to_string(),
        ])?;
    }
    for (id, d) in &ledger.destinations {
        out.write_record([
            id.clone(),
            "destination".into(),
            d.total_dispensed.to_string(),
            ledger.unit.clone(),
            d.event_count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trip_results_csv(w: impl Write, trips: &[TripResult]) -> Result<(), IoError> {
    let mut out = writer(w);
    out.write_record([
        "trip_id",
        "completed",
        "stranded_milepost",
        "stop_count",
        "consumed",
        "destination_dispensed",
    ])?;
    for t in trips {
        out.write_record([
            t.trip_id.clone(),
            t.completed.to_string(),
            t.stranded_milepost.map(|m| m.to_string()).unwrap_or_default(),
            t.stops.len().to_string(),
            t.consumed.to_string(),
            t.destination_dispensed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_curve_csv(w: impl Write, curve: &CompletionCurve) -> Result<(), IoError> {
    let mut out = writer(w);
    out.write_record(["k", "completion_rate", "stranded_count", "mask_hex"])?;
    for p in &curve.points {
        out.write_record([
            p.k.to_string(),
            p.completion_rate.to_string(),
            p.stranded_count.to_string(),
            p.mask.to_hex(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_rollout_csv(w: impl Write, years: &[RolloutYear]) -> Result<(), IoError> {
    let mut out = writer(w);
    out.write_record(["year", "adoption_fraction", "station_count", "new_sites"])?;
    for y in years {
        out.write_record([
            y.year.to_string(),
            y.adoption_fraction.to_string(),
            y.solution.station_count.to_string(),
            y.new_sites.join(";"),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sizing_csv(w: impl Write, report: &SizingReport) -> Result<(), IoError> {
    let mut out = writer(w);
    out.write_record([
        "site_id",
        "equipment",
        "rate",
        "unit",
        "busy_min",
        "horizon_min",
        "utilization_target",
        "required_count",
        "busiest_day_count",
    ])?;
    for s in &report.sites {
        out.write_record([
            s.site_id.clone(),
            s.equipment.clone(),
            s.rate.to_string(),
            s.unit.clone(),
            s.busy_minutes.to_string(),
            s.horizon_minutes.to_string(),
            s.utilization_target.to_string(),
            s.required_count.to_string(),
            s.busiest_day_count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_charge_stats_csv(w: impl Write, stats: &ChargeStats) -> Result<(), IoError> {
    let mut out = writer(w);
    out.write_record(["site_id", "event_time_min", "power_kw", "nameplate_kwh", "c_rate", "flagged"])?;
    for e in &stats.events {
        out.write_record([
            e.site_id.clone(),
            e.event_time.to_string(),
            e.power_kw.to_string(),
            e.nameplate_kwh.to_string(),
            e.c_rate.to_string(),
            e.flagged.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_impact_csv(w: impl Write, report: &ImpactReport) -> Result<(), IoError> {
    let mut out = writer(w);
    out.write_record([
        "pathway",
        "intensity",
        "intensity_unit",
        "vmt",
        "consumption",
        "co2_tonnes_per_yr",
        "illustrative",
    ])?;
    for r in &report.rows {
        out.write_record([
            r.pathway.clone(),
            r.intensity.to_string(),
            r.intensity_unit.clone(),
            r.vmt.to_string(),
            r.consumption.to_string(),
            r.co2_tonnes_per_yr.to_string(),
            r.illustrative.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_refuel_rates_csv(w: impl Write, rows: &[RefuelRateRow]) -> Result<(), IoError> {
    let mut out = writer(w);
    out.write_record(["powertrain", "replenish_rate", "unit", "economy", "miles_per_min"])?;
    for r in rows {
        out.write_record([
            r.powertrain.clone(),
            r.replenish_rate.to_string(),
            r.unit.clone(),
            r.economy.to_string(),
            r.miles_per_min.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

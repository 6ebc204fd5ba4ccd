//! Trip populations: explicit trip files, synthetic OD sampling, adoption
//! draws and route-distance statistics.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoPoint, RouteProfile};
use crate::rng;
use crate::vehicle::VehicleRegistry;

pub const MINUTES_PER_DAY: u64 = 1440;

#[derive(Debug, Error)]
pub enum DemandError {
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
    #[error("line {line}: unknown route {route_id}")]
    UnknownRoute { line: u64, route_id: String },
    #[error("line {line}: unknown vehicle class {class_id}")]
    UnknownVehicleClass { line: u64, class_id: String },
    #[error("OD weights must contain at least one positive finite weight")]
    EmptyWeightSet,
    #[error("invalid departure histogram: {0}")]
    InvalidHistogram(String),
    #[error("adoption fraction must lie in [0, 1], got {0}")]
    InvalidAdoption(f64),
    #[error("day_count must be at least 1")]
    NoDays,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub zone_id: String,
    pub centroid: GeoPoint,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "forward" => Ok(Direction::Forward),
            "reverse" => Ok(Direction::Reverse),
            other => Err(format!("expected forward or reverse, got {other:?}")),
        }
    }
}

/// One truck mission along a route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripSpec {
    pub trip_id: String,
    pub route_id: String,
    pub direction: Direction,
    /// Departure in minutes since the scenario epoch (UTC).
    pub depart: f64,
    pub vehicle_class_id: String,
}

/// Share of departures per UTC hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DepartureHistogram {
    bins: [f64; 24],
}

impl DepartureHistogram {
    pub fn new(bins: [f64; 24]) -> Result<Self, DemandError> {
        if bins.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(DemandError::InvalidHistogram(
                "bins must be non-negative and finite".into(),
            ));
        }
        let sum: f64 = bins.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DemandError::InvalidHistogram(format!(
                "bins sum to {sum}, expected 1"
            )));
        }
        Ok(Self { bins })
    }

    /// All mass on a single hour.
    pub fn point_mass(hour: usize) -> Self {
        let mut bins = [0.0; 24];
        bins[hour] = 1.0;
        Self { bins }
    }

    pub fn bins(&self) -> &[f64; 24] {
        &self.bins
    }
}

/// Uniform over 06:00-18:00.
impl Default for DepartureHistogram {
    fn default() -> Self {
        let mut bins = [0.0; 24];
        for b in &mut bins[6..18] {
            *b = 1.0 / 12.0;
        }
        Self { bins }
    }
}

impl TryFrom<Vec<f64>> for DepartureHistogram {
    type Error = DemandError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        let bins: [f64; 24] = v.try_into().map_err(|v: Vec<f64>| {
            DemandError::InvalidHistogram(format!("expected 24 bins, got {}", v.len()))
        })?;
        Self::new(bins)
    }
}

impl From<DepartureHistogram> for Vec<f64> {
    fn from(h: DepartureHistogram) -> Self {
        h.bins.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdPair {
    pub origin_zone: String,
    pub dest_zone: String,
    pub route_id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdoptionMode {
    Bernoulli,
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdoptionSpec {
    pub fraction: f64,
    pub mode: AdoptionMode,
    pub seed: u64,
}

impl AdoptionSpec {
    pub fn validate(&self) -> Result<(), DemandError> {
        if (0.0..=1.0).contains(&self.fraction) {
            Ok(())
        } else {
            Err(DemandError::InvalidAdoption(self.fraction))
        }
    }
}

const TRIP_COLUMNS: [&str; 5] = [
    "trip_id",
    "route_id",
    "direction",
    "depart_utc_min",
    "vehicle_class_id",
];

/// Reads a trips CSV and checks every row against the known routes and classes.
pub fn load_trips(
    path: impl AsRef<Path>,
    routes: &BTreeMap<String, RouteProfile>,
    classes: &VehicleRegistry,
) -> Result<Vec<TripSpec>, DemandError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DemandError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_trips(file, routes, classes)
}

pub fn read_trips(
    reader: impl Read,
    routes: &BTreeMap<String, RouteProfile>,
    classes: &VehicleRegistry,
) -> Result<Vec<TripSpec>, DemandError> {
    let (trips, mut errors) = read_trips_checked(reader, routes, classes)?;
    match errors.is_empty() {
        true => Ok(trips),
        false => Err(errors.swap_remove(0)),
    }
}

/// Like [`read_trips`] but keeps going past bad rows, returning the valid
/// trips together with one error per rejected row. Only a malformed header
/// or unreadable input fails outright.
pub fn read_trips_checked(
    reader: impl Read,
    routes: &BTreeMap<String, RouteProfile>,
    classes: &VehicleRegistry,
) -> Result<(Vec<TripSpec>, Vec<DemandError>), DemandError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let columns = column_index(&mut rdr, &TRIP_COLUMNS)?;
    let mut trips = Vec::new();
    let mut errors = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        match trip_row(&record, &columns, routes, classes) {
            Ok(t) => trips.push(t),
            Err(e) => errors.push(e),
        }
    }
    Ok((trips, errors))
}

fn trip_row(
    record: &csv::StringRecord,
    columns: &BTreeMap<String, usize>,
    routes: &BTreeMap<String, RouteProfile>,
    classes: &VehicleRegistry,
) -> Result<TripSpec, DemandError> {
    let line = record.position().map_or(0, |p| p.line());
    let field = |name: &str| record.get(columns[name]).unwrap_or("").to_string();
    let parse_err = |column: &str, message: String| DemandError::Parse {
        line,
        column: column.to_string(),
        message,
    };

    let trip_id = field("trip_id");
    if trip_id.is_empty() {
        return Err(parse_err("trip_id", "empty trip id".into()));
    }
    let route_id = field("route_id");
    let direction = field("direction")
        .parse()
        .map_err(|m| parse_err("direction", m))?;
    let depart: f64 = field("depart_utc_min")
        .parse()
        .map_err(|e| parse_err("depart_utc_min", format!("{e}")))?;
    if !(depart.is_finite() && depart >= 0.0) {
        return Err(parse_err(
            "depart_utc_min",
            format!("departure must be non-negative, got {depart}"),
        ));
    }
    let vehicle_class_id = field("vehicle_class_id");
    if !routes.contains_key(&route_id) {
        return Err(DemandError::UnknownRoute { line, route_id });
    }
    if !classes.contains(&vehicle_class_id) {
        return Err(DemandError::UnknownVehicleClass {
            line,
            class_id: vehicle_class_id,
        });
    }
    Ok(TripSpec {
        trip_id,
        route_id,
        direction,
        depart,
        vehicle_class_id,
    })
}

const OD_COLUMNS: [&str; 4] = ["origin_zone", "dest_zone", "route_id", "weight"];

pub fn read_od_pairs(reader: impl Read) -> Result<Vec<OdPair>, DemandError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let columns = column_index(&mut rdr, &OD_COLUMNS)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |name: &str| record.get(columns[name]).unwrap_or("").to_string();
        let weight: f64 = field("weight").parse().map_err(|e| DemandError::Parse {
            line,
            column: "weight".into(),
            message: format!("{e}"),
        })?;
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(DemandError::Parse {
                line,
                column: "weight".into(),
                message: format!("weight must be non-negative, got {weight}"),
            });
        }
        out.push(OdPair {
            origin_zone: field("origin_zone"),
            dest_zone: field("dest_zone"),
            route_id: field("route_id"),
            weight,
        });
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> DemandError {
    let line = e.position().map_or(0, |p| p.line());
    DemandError::Parse {
        line,
        column: String::new(),
        message: e.to_string(),
    }
}

fn column_index<R: Read>(
    rdr: &mut csv::Reader<R>,
    required: &[&str],
) -> Result<BTreeMap<String, usize>, DemandError> {
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let mut map = BTreeMap::new();
    for name in required {
        let idx = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| DemandError::Parse {
                line: 1,
                column: name.to_string(),
                message: "missing column".into(),
            })?;
        map.insert(name.to_string(), idx);
    }
    Ok(map)
}

/// Draws `n` forward trips over weighted OD pairs.
///
/// The departure hour follows `hist`, the minute is uniform within the hour
/// and the day is uniform in `[0, day_count)`. Trip ids are `s000000`,
/// `s000001`, ...
pub fn sample_trips(
    od_pairs: &[OdPair],
    n: usize,
    hist: &DepartureHistogram,
    day_count: u32,
    vehicle_class_id: &str,
    seed: u64,
) -> Result<Vec<TripSpec>, DemandError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if day_count == 0 {
        return Err(DemandError::NoDays);
    }
    let od = WeightedIndex::new(od_pairs.iter().map(|p| p.weight))
        .map_err(|_| DemandError::EmptyWeightSet)?;
    let hours = WeightedIndex::new(hist.bins()).map_err(|e| DemandError::InvalidHistogram(e.to_string()))?;
    let mut rng = rng::stream(seed, "demand.sample_trips");
    Ok((0..n)
        .map(|i| {
            let pair = &od_pairs[od.sample(&mut rng)];
            let hour = hours.sample(&mut rng) as u64;
            let minute: u64 = rng.gen_range(0..60);
            let day: u64 = rng.gen_range(0..u64::from(day_count));
            TripSpec {
                trip_id: format!("s{i:06}"),
                route_id: pair.route_id.clone(),
                direction: Direction::Forward,
                depart: (day * MINUTES_PER_DAY + hour * 60 + minute) as f64,
                vehicle_class_id: vehicle_class_id.to_string(),
            }
        })
        .collect())
}

/// Number of trips kept by a deterministic draw: `floor(fraction * n)`.
///
/// The small offset keeps products like `0.29 * 100` from flooring one short.
pub fn deterministic_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor().min(n as f64) as usize
}

/// Converts a share of the trip population; kept trips retain their order.
pub fn apply_adoption(trips: &[TripSpec], spec: &AdoptionSpec) -> Result<Vec<TripSpec>, DemandError> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, "demand.apply_adoption");
    let keep: Vec<bool> = match spec.mode {
        AdoptionMode::Deterministic => {
            let count = deterministic_count(spec.fraction, trips.len());
            let mut order: Vec<usize> = (0..trips.len()).collect();
            order.shuffle(&mut rng);
            let mut keep = vec![false; trips.len()];
            for &i in &order[..count] {
                keep[i] = true;
            }
            keep
        }
        AdoptionMode::Bernoulli => trips
            .iter()
            .map(|_| rng.gen::<f64>() < spec.fraction)
            .collect(),
    };
    Ok(trips
        .iter()
        .zip(keep)
        .filter_map(|(t, k)| k.then(|| t.clone()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub count: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    pub p50: Option<f64>,
    pub p90: Option<f64>,
    /// `(bin start in miles, trip count)` over 50-mile bins from zero.
    pub histogram: Vec<(f64, usize)>,
}

pub const DISTANCE_BIN_MI: f64 = 50.0;

/// Nearest-rank percentile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], pct: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

/// Route-length statistics over a trip list. Trips on unknown routes are skipped.
pub fn distance_stats(trips: &[TripSpec], routes: &BTreeMap<String, RouteProfile>) -> DistanceStats {
    let mut lengths: Vec<f64> = trips
        .iter()
        .filter_map(|t| routes.get(&t.route_id).map(RouteProfile::length))
        .collect();
    lengths.sort_by(f64::total_cmp);
    if lengths.is_empty() {
        return DistanceStats {
            count: 0,
            min: None,
            max: None,
            mean: None,
            p50: None,
            p90: None,
            histogram: Vec::new(),
        };
    }
    let max = *lengths.last().unwrap();
    let bins = (max / DISTANCE_BIN_MI).floor() as usize + 1;
    let mut histogram: Vec<(f64, usize)> = (0..bins).map(|b| (b as f64 * DISTANCE_BIN_MI, 0)).collect();
    for l in &lengths {
        histogram[(l / DISTANCE_BIN_MI).floor() as usize].1 += 1;
    }
    DistanceStats {
        count: lengths.len(),
        min: lengths.first().copied(),
        max: Some(max),
        mean: Some(lengths.iter().sum::<f64>() / lengths.len() as f64),
        p50: nearest_rank(&lengths, 50.0),
        p90: nearest_rank(&lengths, 90.0),
        histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{GeoPoint, EARTH_RADIUS_MI};
    use crate::vehicle::VehicleClass;

    fn equator_route(id: &str, miles: f64) -> RouteProfile {
        let deg = miles / (EARTH_RADIUS_MI * std::f64::consts::PI / 180.0);
        RouteProfile::build(
            id,
            vec![GeoPoint { lat: 0.0, lon: 0.0 }, GeoPoint { lat: 0.0, lon: deg }],
            None,
        )
        .unwrap()
    }

    fn world() -> (BTreeMap<String, RouteProfile>, VehicleRegistry) {
        let mut routes = BTreeMap::new();
        routes.insert("I5".to_string(), equator_route("I5", 100.0));
        routes.insert("I10".to_string(), equator_route("I10", 300.0));
        let classes = VehicleRegistry::new([VehicleClass::fcev("h2-70", 70.0, 0.1, 10.0)]).unwrap();
        (routes, classes)
    }

    fn trip(id: &str, route: &str) -> TripSpec {
        TripSpec {
            trip_id: id.into(),
            route_id: route.into(),
            direction: Direction::Forward,
            depart: 0.0,
            vehicle_class_id: "h2-70".into(),
        }
    }

    #[test]
    fn reads_trip_rows() {
        let (routes, classes) = world();
        let csv = "trip_id,route_id,direction,depart_utc_min,vehicle_class_id\n\
                   t1,I5,forward,0,h2-70\nt2,I10,reverse,480,h2-70\nt3,I5,forward,90.5,h2-70\n";
        let trips = read_trips(csv.as_bytes(), &routes, &classes).unwrap();
        assert_eq!(trips.len(), 3);
        assert_eq!(trips[1].direction, Direction::Reverse);
        assert_eq!(trips[2].depart, 90.5);

        let header_only = "trip_id,route_id,direction,depart_utc_min,vehicle_class_id\n";
        assert!(read_trips(header_only.as_bytes(), &routes, &classes).unwrap().is_empty());
    }

    #[test]
    fn trip_errors_name_the_row() {
        let (routes, classes) = world();
        let head = "trip_id,route_id,direction,depart_utc_min,vehicle_class_id\n";
        let bad_route = format!("{head}t1,I5,forward,0,h2-70\nt2,I99,forward,0,h2-70\n");
        match read_trips(bad_route.as_bytes(), &routes, &classes) {
            Err(DemandError::UnknownRoute { line, route_id }) => {
                assert_eq!(line, 3);
                assert_eq!(route_id, "I99");
            }
            other => panic!("{other:?}"),
        }
        let bad_class = format!("{head}t1,I5,forward,0,bev\n");
        assert!(matches!(
            read_trips(bad_class.as_bytes(), &routes, &classes),
            Err(DemandError::UnknownVehicleClass { line: 2, .. })
        ));
        let bad_depart = format!("{head}t1,I5,forward,soon,h2-70\n");
        match read_trips(bad_depart.as_bytes(), &routes, &classes) {
            Err(DemandError::Parse { line, column, .. }) => {
                assert_eq!((line, column.as_str()), (2, "depart_utc_min"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn histogram_validation() {
        assert!(DepartureHistogram::try_from(vec![1.0; 23]).is_err());
        assert!(DepartureHistogram::try_from(vec![0.5; 24]).is_err());
        let h: DepartureHistogram = serde_json::from_str(&serde_json::to_string(&DepartureHistogram::default()).unwrap()).unwrap();
        assert_eq!(h, DepartureHistogram::default());
    }

    fn pair(route: &str, w: f64) -> OdPair {
        OdPair {
            origin_zone: "a".into(),
            dest_zone: "b".into(),
            route_id: route.into(),
            weight: w,
        }
    }

    #[test]
    fn sampling_examples() {
        let hist = DepartureHistogram::point_mass(8);
        assert!(sample_trips(&[pair("I5", 1.0)], 0, &hist, 1, "h2-70", 1).unwrap().is_empty());

        let five = sample_trips(&[pair("I5", 1.0)], 5, &hist, 1, "h2-70", 1).unwrap();
        assert_eq!(five.len(), 5);
        assert!(five.iter().all(|t| (480.0..540.0).contains(&t.depart)));

        let pairs = [pair("I5", 9.0), pair("I10", 1.0)];
        let many = sample_trips(&pairs, 10_000, &DepartureHistogram::default(), 7, "h2-70", 99).unwrap();
        let share = many.iter().filter(|t| t.route_id == "I5").count() as f64 / 10_000.0;
        assert!((share - 0.9).abs() < 0.09, "{share}");
        assert_eq!(many, sample_trips(&pairs, 10_000, &DepartureHistogram::default(), 7, "h2-70", 99).unwrap());

        assert!(matches!(
            sample_trips(&[pair("I5", 0.0)], 3, &hist, 1, "h2-70", 1),
            Err(DemandError::EmptyWeightSet)
        ));
    }

    #[test]
    fn departures_avoid_empty_hours() {
        let hist = DepartureHistogram::default();
        let trips = sample_trips(&[pair("I5", 1.0)], 2_000, &hist, 3, "h2-70", 5).unwrap();
        for t in trips {
            let hour = ((t.depart as u64) % MINUTES_PER_DAY) / 60;
            assert!(hist.bins()[hour as usize] > 0.0);
            assert!(t.depart < 3.0 * 1440.0);
        }
    }

    #[test]
    fn adoption_examples() {
        let trips: Vec<_> = (0..100).map(|i| trip(&format!("t{i:03}"), "I5")).collect();
        let spec = |fraction, mode| AdoptionSpec { fraction, mode, seed: 3 };
        for mode in [AdoptionMode::Deterministic, AdoptionMode::Bernoulli] {
            assert!(apply_adoption(&trips, &spec(0.0, mode)).unwrap().is_empty());
            assert_eq!(apply_adoption(&trips, &spec(1.0, mode)).unwrap(), trips);
        }
        let ten = apply_adoption(&trips, &spec(0.1, AdoptionMode::Deterministic)).unwrap();
        assert_eq!(ten.len(), 10);
        assert!(ten.windows(2).all(|w| w[0].trip_id < w[1].trip_id));
        assert_eq!(deterministic_count(0.29, 100), 29);
        assert_eq!(deterministic_count(0.999, 10), 9);
        assert!(apply_adoption(&trips, &spec(1.5, AdoptionMode::Bernoulli)).is_err());
    }

    #[test]
    fn bernoulli_size_within_four_sigma() {
        let n = 1000;
        let f = 0.1;
        let trips: Vec<_> = (0..n).map(|i| trip(&format!("t{i}"), "I5")).collect();
        let sigma = (n as f64 * f * (1.0 - f)).sqrt();
        for seed in 0..100 {
            let spec = AdoptionSpec { fraction: f, mode: AdoptionMode::Bernoulli, seed };
            let k = apply_adoption(&trips, &spec).unwrap().len() as f64;
            assert!((k - f * n as f64).abs() <= 4.0 * sigma, "seed {seed}: {k}");
        }
    }

    #[test]
    fn distance_stats_examples() {
        let (mut routes, _) = world();
        routes.insert("long".into(), equator_route("long", 600.0));
        let one = distance_stats(&[trip("a", "long")], &routes);
        for v in [one.min, one.max, one.mean, one.p50] {
            assert!((v.unwrap() - 600.0).abs() < 1e-9);
        }
        let two = distance_stats(&[trip("a", "I5"), trip("b", "I10")], &routes);
        assert!((two.mean.unwrap() - 200.0).abs() < 1e-9);
        assert!((two.p50.unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(two.histogram.iter().map(|b| b.1).sum::<usize>(), 2);
        let none = distance_stats(&[], &routes);
        assert_eq!(none.count, 0);
        assert!(none.mean.is_none() && none.p50.is_none());
    }
}

//! Scenario configuration: JSON parsing with diagnostics that point at the
//! offending value, then loading of every referenced input file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use corridor_core::demand::{self, read_trips_checked, DemandError};
use corridor_core::geo::{filter_candidates, raster_candidates, DEFAULT_CANDIDATE_RADIUS_MI};
use corridor_core::impact::{example_pathways, example_powertrains, EnergyPathway, Powertrain};
use corridor_core::io::{self as cio, IoError};
use corridor_core::sizing::EquipmentClass;
use corridor_core::trip::DEFAULT_SPEED_MPH;
use corridor_core::{
    AdoptionMode, AdoptionSpec, CandidateSite, DepartureHistogram, EquipmentKind, GaConfig, RegionGrid,
    RouteProfile, TripSpec, VehicleRegistry,
};
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub pointer: String,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    fn push(&mut self, pointer: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            pointer: pointer.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            writeln!(f, "{}: {}", d.pointer, d.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

#[derive(Debug, Clone)]
pub enum TripSource {
    File(PathBuf),
    Sampled {
        od_weights: PathBuf,
        trip_count: usize,
        day_count: u32,
        vehicle_class_id: String,
        histogram: DepartureHistogram,
    },
}

#[derive(Debug, Clone)]
pub struct SizingConfig {
    pub equipment: EquipmentClass,
    pub utilization_target: f64,
    pub horizon_min: f64,
}

#[derive(Debug, Clone)]
pub struct ImpactConfig {
    pub vmt: f64,
    pub pathways: Option<PathBuf>,
    pub powertrains: Option<PathBuf>,
}

/// Parsed configuration; paths are resolved against the config's directory.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub routes: PathBuf,
    pub sites: Option<PathBuf>,
    pub raster: Option<RegionGrid>,
    pub candidate_radius_mi: f64,
    pub vehicle_classes: PathBuf,
    pub trips: TripSource,
    pub adoption: Option<(f64, AdoptionMode)>,
    pub ga: GaConfig,
    pub sizing: Option<SizingConfig>,
    pub impact: ImpactConfig,
    pub speed_mph: f64,
    pub output_dir: PathBuf,
    pub curve_k_values: Option<Vec<usize>>,
    pub adoption_by_year: Option<Vec<f64>>,
}

const KEYS: &[&str] = &[
    "seed",
    "routes",
    "sites",
    "raster",
    "candidate_radius_mi",
    "vehicle_classes",
    "trips",
    "od_weights",
    "sampling",
    "adoption",
    "ga",
    "sizing",
    "impact",
    "speed_mph",
    "output_dir",
    "curve",
    "roadmap",
];

struct Reader<'a> {
    root: &'a Value,
    base: &'a Path,
    diags: Diagnostics,
}

impl<'a> Reader<'a> {
    fn get(&self, pointer: &str) -> Option<&'a Value> {
        self.root.pointer(pointer).filter(|v| !v.is_null())
    }

    fn path(&mut self, pointer: &str, required: bool) -> Option<PathBuf> {
        match self.get(pointer) {
            None => {
                if required {
                    self.diags.push(pointer, "required file path is missing");
                }
                None
            }
            Some(Value::String(s)) => {
                let p = self.base.join(s);
                if p.is_file() {
                    Some(p)
                } else {
                    self.diags.push(pointer, format!("file not found: {}", p.display()));
                    None
                }
            }
            Some(_) => {
                self.diags.push(pointer, "expected a string path");
                None
            }
        }
    }

    fn number(&mut self, pointer: &str, check: impl Fn(f64) -> bool, what: &str) -> Option<f64> {
        match self.get(pointer)?.as_f64() {
            Some(v) if v.is_finite() && check(v) => Some(v),
            _ => {
                self.diags.push(pointer, format!("expected {what}"));
                None
            }
        }
    }

    fn count(&mut self, pointer: &str) -> Option<usize> {
        match self.get(pointer)?.as_u64() {
            Some(v) => Some(v as usize),
            None => {
                self.diags.push(pointer, "expected a non-negative integer");
                None
            }
        }
    }

    fn object(&mut self, pointer: &str, keys: &[&str]) -> Option<&'a serde_json::Map<String, Value>> {
        let v = self.get(pointer)?;
        match v.as_object() {
            Some(map) => {
                for k in map.keys().filter(|k| !keys.contains(&k.as_str())) {
                    self.diags.push(format!("{pointer}/{k}"), "unknown key");
                }
                Some(map)
            }
            None => {
                self.diags.push(pointer, "expected an object");
                None
            }
        }
    }
}

/// Parses the configuration, reporting every violation found.
pub fn parse(text: &str, base: &Path, seed_override: Option<u64>) -> Result<ScenarioConfig, Diagnostics> {
    let root: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            let mut d = Diagnostics::default();
            d.push("", format!("invalid JSON: {e}"));
            return Err(d);
        }
    };
    let mut r = Reader {
        root: &root,
        base,
        diags: Diagnostics::default(),
    };
    if r.object("", KEYS).is_none() {
        r.diags.push("", "configuration must be a JSON object");
        return Err(r.diags);
    }

    let seed = match (seed_override, r.get("/seed")) {
        (Some(s), _) => Some(s),
        (None, None) => {
            r.diags.push("/seed", "seed is required");
            None
        }
        (None, Some(v)) => match v.as_u64() {
            Some(s) => Some(s),
            None => {
                r.diags.push("/seed", "expected an unsigned 64-bit integer");
                None
            }
        },
    };

    let routes = r.path("/routes", true);
    let sites = r.path("/sites", false);
    let raster = r.get("/raster").and_then(|v| match serde_json::from_value::<RegionGrid>(v.clone()) {
        Ok(g) => match g.validate() {
            Ok(()) => Some(g),
            Err(e) => {
                r.diags.push("/raster", e.to_string());
                None
            }
        },
        Err(e) => {
            r.diags.push("/raster", e.to_string());
            None
        }
    });
    if r.get("/sites").is_none() && r.get("/raster").is_none() {
        r.diags.push("/sites", "either sites or raster is required");
    }
    let candidate_radius_mi = r
        .number("/candidate_radius_mi", |v| v > 0.0, "a positive radius in miles")
        .unwrap_or(DEFAULT_CANDIDATE_RADIUS_MI);
    let vehicle_classes = r.path("/vehicle_classes", true);

    let trips = match (r.get("/trips"), r.get("/od_weights")) {
        (Some(_), Some(_)) => {
            r.diags.push("/od_weights", "give either trips or od_weights, not both");
            None
        }
        (Some(_), None) => r.path("/trips", true).map(TripSource::File),
        (None, Some(_)) => {
            let od = r.path("/od_weights", true);
            r.object(
                "/sampling",
                &["trip_count", "day_count", "vehicle_class_id", "departure_histogram"],
            );
            let trip_count = r.count("/sampling/trip_count");
            if r.get("/sampling/trip_count").is_none() {
                r.diags.push("/sampling/trip_count", "required with od_weights");
            }
            let day_count = r.count("/sampling/day_count").unwrap_or(1);
            if day_count == 0 || day_count > u32::MAX as usize {
                r.diags.push("/sampling/day_count", "expected at least one day");
            }
            let class = match r.get("/sampling/vehicle_class_id").map(|v| v.as_str()) {
                Some(Some(s)) => Some(s.to_string()),
                _ => {
                    r.diags.push("/sampling/vehicle_class_id", "required string with od_weights");
                    None
                }
            };
            let histogram = match r.get("/sampling/departure_histogram") {
                None => Some(DepartureHistogram::default()),
                Some(v) => match serde_json::from_value::<DepartureHistogram>(v.clone()) {
                    Ok(h) => Some(h),
                    Err(e) => {
                        r.diags.push("/sampling/departure_histogram", e.to_string());
                        None
                    }
                },
            };
            match (od, trip_count, class, histogram) {
                (Some(od_weights), Some(trip_count), Some(vehicle_class_id), Some(histogram)) => {
                    Some(TripSource::Sampled {
                        od_weights,
                        trip_count,
                        day_count: day_count as u32,
                        vehicle_class_id,
                        histogram,
                    })
                }
                _ => None,
            }
        }
        (None, None) => {
            r.diags.push("/trips", "either trips or od_weights is required");
            None
        }
    };

    let adoption = match r.object("/adoption", &["fraction", "mode"]) {
        None => None,
        Some(_) => {
            let fraction = r.number("/adoption/fraction", |v| (0.0..=1.0).contains(&v), "a fraction in [0, 1]");
            if r.get("/adoption/fraction").is_none() {
                r.diags.push("/adoption/fraction", "required");
            }
            let mode = match r.get("/adoption/mode") {
                None => Some(AdoptionMode::Deterministic),
                Some(v) => match serde_json::from_value::<AdoptionMode>(v.clone()) {
                    Ok(m) => Some(m),
                    Err(_) => {
                        r.diags.push("/adoption/mode", "expected \"bernoulli\" or \"deterministic\"");
                        None
                    }
                },
            };
            fraction.zip(mode)
        }
    };

    let mut ga = match r.get("/ga") {
        None => GaConfig::default(),
        Some(v) => match v.as_object() {
            Some(map) if map.contains_key("seed") => {
                r.diags.push("/ga/seed", "the GA uses the top-level seed");
                GaConfig::default()
            }
            _ => match serde_json::from_value::<GaConfig>(v.clone()) {
                Ok(g) => {
                    if let Err(e) = g.validate() {
                        r.diags.push("/ga", e.to_string());
                    }
                    g
                }
                Err(e) => {
                    r.diags.push("/ga", e.to_string());
                    GaConfig::default()
                }
            },
        },
    };
    ga.seed = seed.unwrap_or(0);

    let sizing = match r.object("/sizing", &["equipment", "utilization_target", "horizon_min"]) {
        None => None,
        Some(_) => {
            let equipment = match r.get("/sizing/equipment") {
                None => {
                    r.diags.push("/sizing/equipment", "required");
                    None
                }
                Some(v) => parse_equipment(v, &mut r.diags),
            };
            let u = r.number(
                "/sizing/utilization_target",
                |v| v > 0.0 && v <= 1.0,
                "a utilization target in (0, 1]",
            );
            let h = r
                .number("/sizing/horizon_min", |v| v > 0.0, "a positive horizon in minutes")
                .or(Some(1440.0));
            if r.get("/sizing/utilization_target").is_none() {
                r.diags.push("/sizing/utilization_target", "required");
            }
            match (equipment, u, h) {
                (Some(equipment), Some(utilization_target), Some(horizon_min)) => Some(SizingConfig {
                    equipment,
                    utilization_target,
                    horizon_min,
                }),
                _ => None,
            }
        }
    };

    r.object("/impact", &["vmt", "pathways", "powertrains"]);
    let impact = ImpactConfig {
        vmt: r
            .number("/impact/vmt", |v| v >= 0.0, "non-negative annual miles")
            .unwrap_or(100_000.0),
        pathways: r.path("/impact/pathways", false),
        powertrains: r.path("/impact/powertrains", false),
    };

    let speed_mph = r
        .number("/speed_mph", |v| v > 0.0, "a positive speed")
        .unwrap_or(DEFAULT_SPEED_MPH);
    let output_dir = match r.get("/output_dir") {
        None => base.join("out"),
        Some(Value::String(s)) => base.join(s),
        Some(_) => {
            r.diags.push("/output_dir", "expected a string path");
            base.join("out")
        }
    };

    r.object("/curve", &["k_values"]);
    let curve_k_values = r.get("/curve/k_values").and_then(|v| {
        match serde_json::from_value::<Vec<usize>>(v.clone()) {
            Ok(ks) if ks.windows(2).all(|w| w[0] > w[1]) => Some(ks),
            _ => {
                r.diags.push("/curve/k_values", "expected strictly descending non-negative integers");
                None
            }
        }
    });
    r.object("/roadmap", &["adoption_by_year"]);
    let adoption_by_year = r.get("/roadmap/adoption_by_year").and_then(|v| {
        match serde_json::from_value::<Vec<f64>>(v.clone()) {
            Ok(fs) if fs.iter().all(|f| (0.0..=1.0).contains(f)) && fs.windows(2).all(|w| w[0] <= w[1]) => {
                Some(fs)
            }
            _ => {
                r.diags.push(
                    "/roadmap/adoption_by_year",
                    "expected non-decreasing fractions in [0, 1]",
                );
                None
            }
        }
    });

    if !r.diags.0.is_empty() {
        return Err(r.diags);
    }
    Ok(ScenarioConfig {
        seed: seed.expect("checked"),
        routes: routes.expect("checked"),
        sites,
        raster,
        candidate_radius_mi,
        vehicle_classes: vehicle_classes.expect("checked"),
        trips: trips.expect("checked"),
        adoption,
        ga,
        sizing,
        impact,
        speed_mph,
        output_dir,
        curve_k_values,
        adoption_by_year,
    })
}

fn parse_equipment(v: &Value, diags: &mut Diagnostics) -> Option<EquipmentClass> {
    let kind = v
        .get("kind")
        .and_then(|k| serde_json::from_value::<EquipmentKind>(k.clone()).ok());
    let rate = v.get("rate").and_then(Value::as_f64);
    match (kind, rate) {
        (Some(kind), Some(rate)) if rate > 0.0 && rate.is_finite() => {
            let mut eq = match kind {
                EquipmentKind::H2Dispenser => EquipmentClass::dispenser(rate),
                EquipmentKind::EvCharger => EquipmentClass::charger(rate),
            };
            if let Some(name) = v.get("name").and_then(Value::as_str) {
                eq.name = name.to_string();
            }
            Some(eq)
        }
        (None, _) => {
            diags.push("/sizing/equipment/kind", "expected \"h2_dispenser\" or \"ev_charger\"");
            None
        }
        _ => {
            diags.push("/sizing/equipment/rate", "expected a positive rate");
            None
        }
    }
}

/// Inputs of a run, with the files they came from.
pub struct Loaded {
    pub routes: BTreeMap<String, RouteProfile>,
    pub classes: VehicleRegistry,
    pub candidates: Vec<CandidateSite>,
    /// Trips after adoption.
    pub trips: Vec<TripSpec>,
    /// Trips before adoption; the roadmap converts these year by year.
    pub base_trips: Vec<TripSpec>,
    pub inputs: Vec<PathBuf>,
}

fn io_diag(pointer: &str, e: impl fmt::Display) -> Diagnostics {
    let mut d = Diagnostics::default();
    d.push(pointer, e.to_string());
    d
}

/// Reads every input file and cross-checks references between them.
pub fn load(cfg: &ScenarioConfig) -> Result<Loaded, Diagnostics> {
    let mut diags = Diagnostics::default();
    let mut inputs = vec![cfg.routes.clone(), cfg.vehicle_classes.clone()];
    let routes = cio::load_routes(&cfg.routes).map_err(|e| io_diag("/routes", e))?;
    let classes_text = cio::read_file(&cfg.vehicle_classes).map_err(|e| io_diag("/vehicle_classes", e))?;
    let classes = cio::read_vehicle_classes(&String::from_utf8_lossy(&classes_text))
        .map_err(|e| io_diag("/vehicle_classes", e))?;

    let mut sites = Vec::new();
    if let Some(p) = &cfg.sites {
        inputs.push(p.clone());
        sites = cio::load_sites(p).map_err(|e| io_diag("/sites", e))?;
    }
    if let Some(grid) = &cfg.raster {
        let raster = raster_candidates(grid).map_err(|e| io_diag("/raster", e))?;
        for c in raster {
            if sites.iter().any(|s| s.site_id == c.site_id) {
                diags.push("/raster", format!("raster id {} collides with a site id", c.site_id));
            }
            sites.push(c);
        }
    }
    let route_list: Vec<RouteProfile> = routes.values().cloned().collect();
    let candidates = filter_candidates(&sites, &route_list, cfg.candidate_radius_mi)
        .map_err(|e| io_diag("/candidate_radius_mi", e))?;

    let trips = match &cfg.trips {
        TripSource::File(p) => {
            inputs.push(p.clone());
            let bytes = cio::read_file(p).map_err(|e| io_diag("/trips", e))?;
            match read_trips_checked(bytes.as_slice(), &routes, &classes) {
                Ok((trips, errors)) => {
                    for e in errors {
                        diags.push("/trips", e.to_string());
                    }
                    trips
                }
                Err(e) => {
                    diags.push("/trips", e.to_string());
                    Vec::new()
                }
            }
        }
        TripSource::Sampled {
            od_weights,
            trip_count,
            day_count,
            vehicle_class_id,
            histogram,
        } => {
            inputs.push(od_weights.clone());
            let bytes = cio::read_file(od_weights).map_err(|e| io_diag("/od_weights", e))?;
            let pairs = demand::read_od_pairs(bytes.as_slice()).map_err(|e| io_diag("/od_weights", e))?;
            for p in pairs.iter().filter(|p| !routes.contains_key(&p.route_id)) {
                diags.push(
                    "/od_weights",
                    format!("OD pair {} -> {}: unknown route {}", p.origin_zone, p.dest_zone, p.route_id),
                );
            }
            if !classes.contains(vehicle_class_id) {
                diags.push(
                    "/sampling/vehicle_class_id",
                    format!("unknown vehicle class {vehicle_class_id}"),
                );
            }
            if !diags.0.is_empty() {
                return Err(diags);
            }
            demand::sample_trips(&pairs, *trip_count, histogram, *day_count, vehicle_class_id, cfg.seed)
                .map_err(|e: DemandError| io_diag("/od_weights", e))?
        }
    };
    let mut seen = std::collections::BTreeSet::new();
    for t in &trips {
        if !seen.insert(t.trip_id.as_str()) {
            diags.push("/trips", format!("duplicate trip id {}", t.trip_id));
        }
    }
    if let Some(p) = &cfg.impact.pathways {
        inputs.push(p.clone());
    }
    if let Some(p) = &cfg.impact.powertrains {
        inputs.push(p.clone());
    }
    if !diags.0.is_empty() {
        return Err(diags);
    }
    let base_trips = trips;
    let trips = match cfg.adoption {
        None => base_trips.clone(),
        Some((fraction, mode)) => demand::apply_adoption(
            &base_trips,
            &AdoptionSpec {
                fraction,
                mode,
                seed: cfg.seed,
            },
        )
        .map_err(|e| io_diag("/adoption", e))?,
    };
    Ok(Loaded {
        routes,
        classes,
        candidates,
        trips,
        base_trips,
        inputs,
    })
}

pub fn pathways(cfg: &ImpactConfig) -> Result<Vec<EnergyPathway>, IoError> {
    match &cfg.pathways {
        None => Ok(example_pathways()),
        Some(p) => Ok(serde_json::from_slice(&cio::read_file(p)?)?),
    }
}

pub fn powertrains(cfg: &ImpactConfig) -> Result<Vec<Powertrain>, IoError> {
    match &cfg.powertrains {
        None => Ok(example_powertrains()),
        Some(p) => Ok(serde_json::from_slice(&cio::read_file(p)?)?),
    }
}

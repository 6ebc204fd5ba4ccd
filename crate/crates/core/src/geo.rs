//! Milepost-referenced route polylines, site snapping and candidate generation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in statute miles.
pub const EARTH_RADIUS_MI: f64 = 3958.7613;

/// Default admissible distance between a candidate site and a corridor.
pub const DEFAULT_CANDIDATE_RADIUS_MI: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid coordinate (lat {lat}, lon {lon})")]
    InvalidPoint { lat: f64, lon: f64 },
    #[error("route {route_id}: at least two vertices are required, got {count}")]
    TooFewVertices { route_id: String, count: usize },
    #[error("route {route_id}: vertex {index} duplicates the previous vertex")]
    DuplicateVertex { route_id: String, index: usize },
    #[error("route {route_id}: expected {expected} segment multipliers, got {got}")]
    MultiplierCount {
        route_id: String,
        expected: usize,
        got: usize,
    },
    #[error("route {route_id}: segment multiplier {index} must be positive and finite, got {value}")]
    InvalidMultiplier {
        route_id: String,
        index: usize,
        value: f64,
    },
    #[error("invalid region grid: {0}")]
    InvalidGrid(String),
    #[error("candidate radius must be positive, got {0}")]
    InvalidRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        let p = Self { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon);
        if ok {
            Ok(())
        } else {
            Err(GeoError::InvalidPoint {
                lat: self.lat,
                lon: self.lon,
            })
        }
    }
}

/// Great-circle distance in miles.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_MI * h.sqrt().min(1.0).asin()
}

/// A route polyline with cumulative great-circle mileposts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteProfile {
    route_id: String,
    vertices: Vec<GeoPoint>,
    mileposts: Vec<f64>,
    segment_multiplier: Vec<f64>,
}

impl RouteProfile {
    /// Builds a profile; `multipliers` must have one entry per segment when given.
    pub fn build(
        route_id: impl Into<String>,
        vertices: Vec<GeoPoint>,
        multipliers: Option<Vec<f64>>,
    ) -> Result<Self, GeoError> {
        let route_id = route_id.into();
        if vertices.len() < 2 {
            return Err(GeoError::TooFewVertices {
                route_id,
                count: vertices.len(),
            });
        }
        for v in &vertices {
            v.validate()?;
        }
        let segments = vertices.len() - 1;
        let segment_multiplier = match multipliers {
            Some(m) if m.len() != segments => {
                return Err(GeoError::MultiplierCount {
                    route_id,
                    expected: segments,
                    got: m.len(),
                })
            }
            Some(m) => m,
            None => vec![1.0; segments],
        };
        if let Some((index, &value)) = segment_multiplier
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m > 0.0))
        {
            return Err(GeoError::InvalidMultiplier {
                route_id,
                index,
                value,
            });
        }

        let mut mileposts = Vec::with_capacity(vertices.len());
        mileposts.push(0.0);
        for (i, pair) in vertices.windows(2).enumerate() {
            let d = haversine(pair[0], pair[1]);
            if d <= 0.0 {
                return Err(GeoError::DuplicateVertex {
                    route_id,
                    index: i + 1,
                });
            }
            mileposts.push(mileposts[i] + d);
        }
        Ok(Self {
            route_id,
            vertices,
            mileposts,
            segment_multiplier,
        })
    }

    pub fn route_id(&self) -> &str {
        &self.route_id
    }

    pub fn vertices(&self) -> &[GeoPoint] {
        &self.vertices
    }

    pub fn mileposts(&self) -> &[f64] {
        &self.mileposts
    }

    pub fn segment_multipliers(&self) -> &[f64] {
        &self.segment_multiplier
    }

    /// Total route length in miles.
    pub fn length(&self) -> f64 {
        *self.mileposts.last().expect("profile has >= 2 vertices")
    }

    /// Position on the polyline at a given milepost, clamped to the route.
    pub fn point_at(&self, milepost: f64) -> GeoPoint {
        let m = milepost.clamp(0.0, self.length());
        let seg = match self.mileposts.partition_point(|&x| x <= m) {
            0 => 0,
            i => (i - 1).min(self.vertices.len() - 2),
        };
        let (a, b) = (self.vertices[seg], self.vertices[seg + 1]);
        let len = self.mileposts[seg + 1] - self.mileposts[seg];
        let t = ((m - self.mileposts[seg]) / len).clamp(0.0, 1.0);
        lerp(a, b, t)
    }
}

fn lerp(a: GeoPoint, b: GeoPoint, t: f64) -> GeoPoint {
    GeoPoint {
        lat: a.lat + t * (b.lat - a.lat),
        lon: a.lon + t * (b.lon - a.lon),
    }
}

// Distances closer than this are treated as ties.
const SNAP_TIE_MI: f64 = 1e-9;

/// Nearest point of a route to `site`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snap {
    pub milepost: f64,
    pub snap_distance: f64,
}

/// Snaps a point onto the nearest location of a route polyline.
///
/// Each segment is projected in a local equirectangular frame centred on the
/// segment; the distance to the projected point is then measured with the
/// haversine formula. Equal distances resolve to the smaller milepost.
pub fn snap_site(site: GeoPoint, route: &RouteProfile) -> Snap {
    let mut best: Option<Snap> = None;
    for (i, pair) in route.vertices.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        let kx = ((a.lat + b.lat) / 2.0).to_radians().cos();
        let (bx, by) = ((b.lon - a.lon) * kx, b.lat - a.lat);
        let (sx, sy) = ((site.lon - a.lon) * kx, site.lat - a.lat);
        let len2 = bx * bx + by * by;
        let t = if len2 > 0.0 {
            ((sx * bx + sy * by) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let seg_len = route.mileposts[i + 1] - route.mileposts[i];
        let candidate = Snap {
            milepost: route.mileposts[i] + t * seg_len,
            snap_distance: haversine(site, lerp(a, b, t)),
        };
        match best {
            Some(ref cur) if candidate.snap_distance >= cur.snap_distance - SNAP_TIE_MI => {}
            _ => best = Some(candidate),
        }
    }
    best.expect("profile has >= 1 segment")
}

/// A location eligible to host a station, with its snaps onto nearby routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSite {
    pub site_id: String,
    pub location: GeoPoint,
    #[serde(default)]
    pub snaps: BTreeMap<String, Snap>,
}

impl CandidateSite {
    pub fn unsnapped(site_id: impl Into<String>, location: GeoPoint) -> Self {
        Self {
            site_id: site_id.into(),
            location,
            snaps: BTreeMap::new(),
        }
    }

    /// Smallest snap distance over the routes this site was snapped to.
    pub fn min_snap_distance(&self) -> Option<f64> {
        self.snaps
            .values()
            .map(|s| s.snap_distance)
            .min_by(f64::total_cmp)
    }
}

/// Keeps sites within `radius` miles of at least one route and records a snap
/// for every route within that radius. Existing snaps on the inputs are
/// discarded and recomputed.
pub fn filter_candidates(
    sites: &[CandidateSite],
    routes: &[RouteProfile],
    radius: f64,
) -> Result<Vec<CandidateSite>, GeoError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(GeoError::InvalidRadius(radius));
    }
    Ok(sites
        .iter()
        .filter_map(|site| {
            let snaps: BTreeMap<String, Snap> = routes
                .iter()
                .map(|r| (r.route_id.clone(), snap_site(site.location, r)))
                .filter(|(_, s)| s.snap_distance <= radius)
                .collect();
            (!snaps.is_empty()).then(|| CandidateSite {
                site_id: site.site_id.clone(),
                location: site.location,
                snaps,
            })
        })
        .collect())
}

/// A rectangular region divided into `d_lat` x `d_lon` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub d_lat: f64,
    pub d_lon: f64,
}

impl RegionGrid {
    pub fn validate(&self) -> Result<(), GeoError> {
        GeoPoint::new(self.lat_min, self.lon_min)?;
        GeoPoint::new(self.lat_max, self.lon_max)?;
        if !(self.lat_min < self.lat_max && self.lon_min < self.lon_max) {
            return Err(GeoError::InvalidGrid("min bound must be below max bound".into()));
        }
        if !(self.d_lat > 0.0 && self.d_lon > 0.0 && self.d_lat.is_finite() && self.d_lon.is_finite())
        {
            return Err(GeoError::InvalidGrid("cell steps must be positive".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        cell_count(self.lat_max - self.lat_min, self.d_lat)
    }

    pub fn cols(&self) -> usize {
        cell_count(self.lon_max - self.lon_min, self.d_lon)
    }
}

// 1e-9 absorbs spans like 0.3/0.1 that land a hair above an integer.
fn cell_count(span: f64, step: f64) -> usize {
    ((span / step) - 1e-9).ceil().max(1.0) as usize
}

/// One unsnapped candidate per grid cell, at the centroid of the cell clipped
/// to the region. Ids are `r{row}c{col}`, row-major from the south-west corner.
pub fn raster_candidates(grid: &RegionGrid) -> Result<Vec<CandidateSite>, GeoError> {
    grid.validate()?;
    let (rows, cols) = (grid.rows(), grid.cols());
    let mut out = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        let lat0 = grid.lat_min + row as f64 * grid.d_lat;
        let lat1 = (lat0 + grid.d_lat).min(grid.lat_max);
        for col in 0..cols {
            let lon0 = grid.lon_min + col as f64 * grid.d_lon;
            let lon1 = (lon0 + grid.d_lon).min(grid.lon_max);
            out.push(CandidateSite::unsnapped(
                format!("r{row}c{col}"),
                GeoPoint {
                    lat: (lat0 + lat1) / 2.0,
                    lon: (lon0 + lon1) / 2.0,
                },
            ));
        }
    }
    Ok(out)
}

//! Corridor-scale planning of hydrogen refueling and battery-electric
//! charging infrastructure for heavy-duty trucks.
//!
//! The pipeline: build milepost-referenced routes and candidate sites
//! ([`geo`]), produce a trip population ([`demand`]), simulate trips under a
//! station set ([`trip`]), search for the smallest station set that strands no
//! trip ([`siting`]), then size equipment ([`sizing`]) and compare emissions and
//! refuel rates across powertrains ([`impact`]).

pub mod demand;
pub mod geo;
pub mod impact;
pub mod io;
pub mod mask;
pub mod rng;
pub mod siting;
pub mod sizing;
pub mod trip;
pub mod vehicle;

pub use demand::{AdoptionMode, AdoptionSpec, DepartureHistogram, Direction, OdPair, TripSpec};
pub use geo::{CandidateSite, GeoPoint, RegionGrid, RouteProfile, Snap};
pub use mask::StationMask;
pub use siting::{CompletionCurve, GaConfig, Scenario, SitingSolution};
pub use sizing::{EquipmentClass, EquipmentKind, SizingReport};
pub use trip::{FleetLedger, StopEvent, TripResult};
pub use vehicle::{PowertrainKind, VehicleClass, VehicleRegistry};

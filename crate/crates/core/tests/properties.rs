use std::collections::BTreeMap;

use corridor_core::geo::{filter_candidates, EARTH_RADIUS_MI};
use corridor_core::siting::{exhaustive_optimize, fitness, ga_optimize};
use corridor_core::trip::simulate_fleet;
use corridor_core::{
    CandidateSite, Direction, GaConfig, GeoPoint, RouteProfile, Scenario, StationMask, TripSpec, VehicleClass,
    VehicleRegistry,
};
use proptest::prelude::*;

fn deg(miles: f64) -> f64 {
    miles * 180.0 / (std::f64::consts::PI * EARTH_RADIUS_MI)
}

#[derive(Debug, Clone)]
struct Case {
    length: f64,
    sites: Vec<f64>,
    trips: Vec<(bool, f64)>,
    capacity: f64,
}

fn case() -> impl Strategy<Value = Case> {
    (
        200.0f64..1000.0,
        prop::collection::vec(0.0f64..1.0, 1..8),
        prop::collection::vec((any::<bool>(), 0.0f64..1440.0), 1..10),
        30.0f64..90.0,
    )
        .prop_map(|(length, fr, trips, capacity)| Case {
            length,
            sites: fr.iter().map(|f| f * length).collect(),
            trips,
            capacity,
        })
}

fn build(c: &Case) -> Scenario {
    let route = RouteProfile::build(
        "r",
        vec![GeoPoint { lat: 0.0, lon: 0.0 }, GeoPoint { lat: deg(c.length), lon: 0.0 }],
        None,
    )
    .unwrap();
    let sites: Vec<CandidateSite> = c
        .sites
        .iter()
        .enumerate()
        .map(|(i, m)| CandidateSite::unsnapped(format!("c{i}"), GeoPoint { lat: deg(*m), lon: 0.0 }))
        .collect();
    let candidates = filter_candidates(&sites, std::slice::from_ref(&route), 5.0).unwrap();
    let trips = c
        .trips
        .iter()
        .enumerate()
        .map(|(i, (fwd, t))| TripSpec {
            trip_id: format!("t{i}"),
            route_id: "r".into(),
            direction: if *fwd { Direction::Forward } else { Direction::Reverse },
            depart: *t,
            vehicle_class_id: "h2".into(),
        })
        .collect();
    let classes = VehicleRegistry::new([VehicleClass::fcev("h2", c.capacity, 0.12, 10.0)]).unwrap();
    Scenario::new(BTreeMap::from([("r".into(), route)]), classes, candidates, trips, 50.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ga_never_beats_exhaustive(c in case(), seed in 0u64..1000) {
        let sc = build(&c);
        let exact = exhaustive_optimize(&sc).unwrap();
        let ga = ga_optimize(&sc, &GaConfig { seed, population: 40, generations: 80, ..GaConfig::default() }).unwrap();
        prop_assert!(ga.fitness >= exact.fitness);
        prop_assert_eq!(exact.fitness, fitness(&exact.mask, &sc));
    }

    #[test]
    fn fewer_stranded_always_ranks_better(c in case(), bits in prop::collection::vec(any::<bool>(), 8)) {
        let sc = build(&c);
        let n = sc.candidate_count();
        let a = StationMask::from_bits(bits[..n].to_vec());
        let b = StationMask::all(n);
        let (sa, sb) = (sc.stranded_count(&a), sc.stranded_count(&b));
        if sa > sb {
            prop_assert!(fitness(&a, &sc) > fitness(&b, &sc));
        }
    }

    #[test]
    fn ledger_ignores_trip_order(c in case()) {
        let sc = build(&c);
        let mask = StationMask::all(sc.candidate_count());
        let mut reversed = sc.trips().to_vec();
        reversed.reverse();
        let a = simulate_fleet(sc.trips(), sc.routes(), sc.classes(), &mask, sc.candidates(), 50.0).unwrap();
        let b = simulate_fleet(&reversed, sc.routes(), sc.classes(), &mask, sc.candidates(), 50.0).unwrap();
        prop_assert_eq!(a, b);
    }
}

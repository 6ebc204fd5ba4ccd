//! Station subset selection.
//!
//! The objective is lexicographic: strand as few trips as possible, then use
//! as few stations as possible, then prefer the lexicographically smallest
//! mask. A genetic algorithm searches large candidate sets; an exhaustive
//! enumeration over at most [`MAX_EXHAUSTIVE_CANDIDATES`] sites serves as the
//! reference answer.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{apply_adoption, AdoptionMode, AdoptionSpec, DemandError, TripSpec};
use crate::geo::{CandidateSite, RouteProfile};
use crate::mask::StationMask;
use crate::rng;
use crate::trip::{drive, fleet_unit, simulate_fleet, FleetLedger, SimError, TripPlan};
use crate::vehicle::VehicleRegistry;

pub const MAX_EXHAUSTIVE_CANDIDATES: usize = 20;

#[derive(Debug, Error)]
pub enum SitingError {
    #[error("no candidate sites to choose from")]
    NoCandidates,
    #[error("exhaustive search is limited to {MAX_EXHAUSTIVE_CANDIDATES} candidates, got {0}")]
    TooManyCandidates(usize),
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
    #[error("adoption fractions must be non-decreasing values in [0, 1] (year {year})")]
    NonMonotoneAdoption { year: usize },
    #[error("invalid completion-curve request: {0}")]
    InvalidCurve(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Demand(#[from] DemandError),
}

/// Trips, routes, vehicle classes and candidate sites of one siting problem.
#[derive(Debug, Clone)]
pub struct Scenario {
    routes: BTreeMap<String, RouteProfile>,
    classes: VehicleRegistry,
    candidates: Vec<CandidateSite>,
    trips: Vec<TripSpec>,
    speed_mph: f64,
    plans: Vec<TripPlan>,
}

impl Scenario {
    pub fn new(
        routes: BTreeMap<String, RouteProfile>,
        classes: VehicleRegistry,
        candidates: Vec<CandidateSite>,
        trips: Vec<TripSpec>,
        speed_mph: f64,
    ) -> Result<Self, SitingError> {
        if !(speed_mph.is_finite() && speed_mph > 0.0) {
            return Err(SimError::NonPositiveSpeed(speed_mph).into());
        }
        fleet_unit(&trips, &routes, &classes)?;
        for c in &candidates {
            if let Some(r) = c.snaps.keys().find(|r| !routes.contains_key(*r)) {
                return Err(SimError::UnknownRoute(r.clone()).into());
            }
        }
        let mut on_route: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
        for (i, c) in candidates.iter().enumerate() {
            for (route_id, snap) in &c.snaps {
                on_route.entry(route_id).or_default().push((i, snap.milepost));
            }
        }
        for sites in on_route.values_mut() {
            sites.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        }
        let plans = trips
            .iter()
            .map(|t| {
                let vc = classes.get(&t.vehicle_class_id).expect("validated");
                let sites = on_route.get(t.route_id.as_str()).map_or(&[][..], Vec::as_slice);
                TripPlan::new(&routes[&t.route_id], t.direction, vc, sites)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            routes,
            classes,
            candidates,
            trips,
            speed_mph,
            plans,
        })
    }

    /// Same network and candidates with a different trip population.
    pub fn with_trips(&self, trips: Vec<TripSpec>) -> Result<Self, SitingError> {
        Self::new(
            self.routes.clone(),
            self.classes.clone(),
            self.candidates.clone(),
            trips,
            self.speed_mph,
        )
    }

    pub fn routes(&self) -> &BTreeMap<String, RouteProfile> {
        &self.routes
    }

    pub fn classes(&self) -> &VehicleRegistry {
        &self.classes
    }

    pub fn candidates(&self) -> &[CandidateSite] {
        &self.candidates
    }

    pub fn trips(&self) -> &[TripSpec] {
        &self.trips
    }

    pub fn speed_mph(&self) -> f64 {
        self.speed_mph
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    /// Number of trips that strand under `mask`.
    pub fn stranded_count(&self, mask: &StationMask) -> usize {
        self.count_stranded(|i| mask.get(i))
    }

    fn count_stranded(&self, active: impl Fn(usize) -> bool + Copy) -> usize {
        self.plans
            .iter()
            .filter(|p| !drive(p, |s| active(s.key), &mut ()).completed)
            .count()
    }

    /// Per-trip completion under `mask`, in scenario trip order.
    pub fn completed_trips(&self, mask: &StationMask) -> Vec<bool> {
        self.plans
            .iter()
            .map(|p| drive(p, |s| mask.get(s.key), &mut ()).completed)
            .collect()
    }

    /// Full fleet simulation under `mask`.
    pub fn simulate(&self, mask: &StationMask) -> Result<FleetLedger, SitingError> {
        Ok(simulate_fleet(
            &self.trips,
            &self.routes,
            &self.classes,
            mask,
            &self.candidates,
            self.speed_mph,
        )?)
    }

    /// Penalty weight that makes one stranded trip outweigh every station.
    pub fn stranding_penalty(&self) -> u64 {
        self.candidates.len() as u64 + 1
    }
}

/// `stranded * (N + 1) + active`, or just `stranded` under a cardinality cap.
pub fn fitness(mask: &StationMask, scenario: &Scenario) -> u64 {
    fitness_value(scenario.stranded_count(mask), mask.popcount(), scenario, None)
}

fn fitness_value(stranded: usize, active: usize, scenario: &Scenario, cap: Option<usize>) -> u64 {
    match cap {
        Some(_) => stranded as u64,
        None => stranded as u64 * scenario.stranding_penalty() + active as u64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_k: usize,
    pub crossover_p: f64,
    /// Per-bit flip probability; `None` means `1 / candidate_count`.
    pub mutation_p: Option<f64>,
    pub elitism: usize,
    pub stall_limit: usize,
    pub seed: u64,
    pub cardinality_cap: Option<usize>,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 200,
            generations: 500,
            tournament_k: 3,
            crossover_p: 0.9,
            mutation_p: None,
            elitism: 2,
            stall_limit: 50,
            seed: 0,
            cardinality_cap: None,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), SitingError> {
        let bad = |m: &str| Err(SitingError::InvalidConfig(m.to_string()));
        if self.population < 2 {
            return bad("population must be at least 2");
        }
        if self.elitism >= self.population {
            return bad("elitism must be smaller than the population");
        }
        if self.tournament_k < 1 {
            return bad("tournament_k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.crossover_p) {
            return bad("crossover_p must lie in [0, 1]");
        }
        if let Some(p) = self.mutation_p {
            if !(0.0..=1.0).contains(&p) {
                return bad("mutation_p must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchKind {
    Genetic,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SitingSolution {
    pub mask: StationMask,
    pub station_count: usize,
    pub stranded_count: usize,
    pub completion_rate: f64,
    /// False when every station set leaves some trip stranded; the mask is
    /// then the least-stranding set found.
    pub feasible: bool,
    pub fitness: u64,
    pub generations_run: usize,
    pub method: SearchKind,
    pub ledger: FleetLedger,
}

/// Extra restrictions shared by both search methods.
#[derive(Debug, Clone, Default)]
pub struct SearchConstraints {
    /// Maximum number of active sites; switches fitness to stranded count only.
    pub cardinality_cap: Option<usize>,
    /// Sites that must stay active.
    pub pinned: Option<StationMask>,
    /// Extra individuals for the GA's initial population.
    pub seeds: Vec<StationMask>,
}

impl SearchConstraints {
    fn check(&self, n: usize) -> Result<(), SitingError> {
        if let Some(p) = &self.pinned {
            if p.len() != n {
                return Err(SimError::MaskLength {
                    expected: n,
                    got: p.len(),
                }
                .into());
            }
            if self.cardinality_cap.is_some_and(|cap| p.popcount() > cap) {
                return Err(SitingError::InvalidConfig(
                    "pinned sites exceed the cardinality cap".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Ordering key: fitness, then station count, then mask.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Rank {
    fitness: u64,
    count: usize,
    mask: StationMask,
}

fn finish(
    scenario: &Scenario,
    mask: StationMask,
    cap: Option<usize>,
    generations_run: usize,
    method: SearchKind,
) -> Result<SitingSolution, SitingError> {
    let ledger = scenario.simulate(&mask)?;
    let stranded = ledger.stranded.len();
    let count = mask.popcount();
    Ok(SitingSolution {
        station_count: count,
        stranded_count: stranded,
        completion_rate: ledger.completion_rate,
        feasible: stranded == 0,
        fitness: fitness_value(stranded, count, scenario, cap),
        generations_run,
        method,
        mask,
        ledger,
    })
}

/// Genetic search for the smallest station set that strands no trip.
pub fn ga_optimize(scenario: &Scenario, cfg: &GaConfig) -> Result<SitingSolution, SitingError> {
    ga_optimize_with(
        scenario,
        cfg,
        &SearchConstraints {
            cardinality_cap: cfg.cardinality_cap,
            ..Default::default()
        },
    )
}

/// [`ga_optimize`] with pinned sites, seed individuals or a cap.
///
/// Tournament selection, uniform crossover, per-bit flip mutation and
/// elitism. Stops after `generations` or `stall_limit` generations without a
/// better best individual and returns the best mask ever evaluated.
pub fn ga_optimize_with(
    scenario: &Scenario,
    cfg: &GaConfig,
    cons: &SearchConstraints,
) -> Result<SitingSolution, SitingError> {
    cfg.validate()?;
    let n = scenario.candidate_count();
    if n == 0 {
        return Err(SitingError::NoCandidates);
    }
    cons.check(n)?;
    let cap = cons.cardinality_cap;
    let mutation_p = cfg.mutation_p.unwrap_or(1.0 / n as f64);
    let mut rng = rng::stream(cfg.seed, "siting.ga");
    let pinned = cons.pinned.clone().unwrap_or_else(|| StationMask::none(n));

    let normalize = |mut m: StationMask, rng: &mut rng::Stream| {
        for i in pinned.active() {
            m.set(i, true);
        }
        if let Some(cap) = cap {
            let mut free: Vec<usize> = m.active().filter(|&i| !pinned.get(i)).collect();
            while m.popcount() > cap && !free.is_empty() {
                let j = rng.gen_range(0..free.len());
                m.set(free.swap_remove(j), false);
            }
        }
        m
    };

    let mut population = Vec::with_capacity(cfg.population);
    population.push(normalize(StationMask::all(n), &mut rng));
    if pinned.popcount() > 0 {
        population.push(pinned.clone());
    }
    for s in &cons.seeds {
        if population.len() < cfg.population && s.len() == n {
            population.push(normalize(s.clone(), &mut rng));
        }
    }
    while population.len() < cfg.population {
        let m = StationMask::from_bits((0..n).map(|_| rng.gen::<bool>()).collect());
        population.push(normalize(m, &mut rng));
    }

    let mut cache: HashMap<StationMask, usize> = HashMap::new();
    let evaluate = |pop: &[StationMask], cache: &mut HashMap<StationMask, usize>| -> Vec<Rank> {
        let mut seen = HashSet::new();
        let fresh: Vec<&StationMask> = pop
            .iter()
            .filter(|m| !cache.contains_key(*m) && seen.insert(*m))
            .collect();
        let scored: Vec<usize> = fresh.par_iter().map(|m| scenario.stranded_count(m)).collect();
        for (m, s) in fresh.into_iter().zip(scored) {
            cache.insert(m.clone(), s);
        }
        pop.iter()
            .map(|m| Rank {
                fitness: fitness_value(cache[m], m.popcount(), scenario, cap),
                count: m.popcount(),
                mask: m.clone(),
            })
            .collect()
    };

    let mut ranks = evaluate(&population, &mut cache);
    let mut best = ranks.iter().min().expect("population >= 2").clone();
    let mut stall = 0;
    let mut generations_run = 0;
    while generations_run < cfg.generations && stall < cfg.stall_limit {
        generations_run += 1;
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| ranks[a].cmp(&ranks[b]));
        let mut next: Vec<StationMask> = order[..cfg.elitism]
            .iter()
            .map(|&i| population[i].clone())
            .collect();

        let tournament = |rng: &mut rng::Stream| {
            (0..cfg.tournament_k)
                .map(|_| rng.gen_range(0..population.len()))
                .min_by(|&a, &b| ranks[a].cmp(&ranks[b]).then(a.cmp(&b)))
                .expect("tournament_k >= 1")
        };
        while next.len() < cfg.population {
            let (a, b) = (tournament(&mut rng), tournament(&mut rng));
            let (mut c1, mut c2) = (population[a].clone(), population[b].clone());
            if rng.gen::<f64>() < cfg.crossover_p {
                for i in 0..n {
                    if rng.gen::<bool>() {
                        let (x, y) = (c1.get(i), c2.get(i));
                        c1.set(i, y);
                        c2.set(i, x);
                    }
                }
            }
            for child in [c1, c2] {
                if next.len() == cfg.population {
                    break;
                }
                let mut child = child;
                for i in 0..n {
                    if rng.gen::<f64>() < mutation_p {
                        child.set(i, !child.get(i));
                    }
                }
                next.push(normalize(child, &mut rng));
            }
        }
        population = next;
        ranks = evaluate(&population, &mut cache);
        let gen_best = ranks.iter().min().expect("non-empty").clone();
        if gen_best < best {
            best = gen_best;
            stall = 0;
        } else {
            stall += 1;
        }
    }
    finish(scenario, best.mask, cap, generations_run, SearchKind::Genetic)
}

/// Enumerates every mask; the reference answer for small candidate sets.
pub fn exhaustive_optimize(scenario: &Scenario) -> Result<SitingSolution, SitingError> {
    exhaustive_optimize_with(scenario, &SearchConstraints::default())
}

pub fn exhaustive_optimize_with(
    scenario: &Scenario,
    cons: &SearchConstraints,
) -> Result<SitingSolution, SitingError> {
    let n = scenario.candidate_count();
    if n > MAX_EXHAUSTIVE_CANDIDATES {
        return Err(SitingError::TooManyCandidates(n));
    }
    cons.check(n)?;
    let cap = cons.cardinality_cap;
    let pinned_word = cons.pinned.as_ref().map_or(0u64, |p| {
        p.active().fold(0, |w, i| w | (1 << i))
    });
    // Reversing the bits of a word orders masks lexicographically with candidate 0 first.
    let best = (0u64..(1u64 << n))
        .into_par_iter()
        .filter(|w| w & pinned_word == pinned_word)
        .filter(|w| cap.is_none_or(|c| w.count_ones() as usize <= c))
        .map(|w| {
            let stranded = scenario.count_stranded(|i| (w >> i) & 1 == 1);
            let count = w.count_ones() as usize;
            (fitness_value(stranded, count, scenario, cap), count, w.reverse_bits(), w)
        })
        .min()
        .map(|(_, _, _, w)| w)
        .ok_or_else(|| SitingError::InvalidConfig("no mask satisfies the constraints".into()))?;
    finish(scenario, StationMask::from_word(n, best), cap, 0, SearchKind::Exhaustive)
}

/// Which search backs the curve and rollout drivers.
#[derive(Debug, Clone, PartialEq)]
pub enum SearchMethod {
    Genetic(GaConfig),
    Exhaustive,
}

impl SearchMethod {
    fn solve(&self, scenario: &Scenario, cons: &SearchConstraints) -> Result<SitingSolution, SitingError> {
        match self {
            SearchMethod::Genetic(cfg) => ga_optimize_with(scenario, cfg, cons),
            SearchMethod::Exhaustive => exhaustive_optimize_with(scenario, cons),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub completion_rate: f64,
    pub stranded_count: usize,
    pub mask: StationMask,
    /// Trips that complete under `mask`, in scenario order.
    pub surviving_trips: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionCurve {
    pub points: Vec<CurvePoint>,
}

/// Best completion rate found for each station budget in `k_values`.
pub fn completion_curve(
    scenario: &Scenario,
    cfg: &GaConfig,
    k_values: &[usize],
) -> Result<CompletionCurve, SitingError> {
    completion_curve_with(scenario, &SearchMethod::Genetic(cfg.clone()), k_values)
}

/// Budgets are searched in the given (strictly descending) order. Each search
/// is seeded with the previous best mask trimmed to the new budget, and a
/// final pass lets a smaller budget's mask stand in for a larger budget when
/// it strands fewer trips, so completion never rises as `k` falls.
pub fn completion_curve_with(
    scenario: &Scenario,
    method: &SearchMethod,
    k_values: &[usize],
) -> Result<CompletionCurve, SitingError> {
    let n = scenario.candidate_count();
    if k_values.windows(2).any(|w| w[0] <= w[1]) {
        return Err(SitingError::InvalidCurve("k values must be strictly descending".into()));
    }
    if let Some(&k) = k_values.iter().find(|&&k| k > n) {
        return Err(SitingError::InvalidCurve(format!(
            "k = {k} exceeds the {n} candidates"
        )));
    }
    let mut points: Vec<(usize, StationMask, usize)> = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let mask = if n == 0 {
            StationMask::none(0)
        } else {
            let seeds = points
                .last()
                .map(|(_, m, _)| vec![trim_to(scenario, m, k)])
                .unwrap_or_default();
            let cons = SearchConstraints {
                cardinality_cap: Some(k),
                pinned: None,
                seeds,
            };
            method.solve(scenario, &cons)?.mask
        };
        let stranded = scenario.stranded_count(&mask);
        points.push((k, mask, stranded));
    }
    for i in (0..points.len().saturating_sub(1)).rev() {
        if points[i + 1].2 < points[i].2 {
            points[i].1 = points[i + 1].1.clone();
            points[i].2 = points[i + 1].2;
        }
    }
    let total = scenario.trips().len();
    Ok(CompletionCurve {
        points: points
            .into_iter()
            .map(|(k, mask, stranded)| {
                let surviving_trips = scenario
                    .completed_trips(&mask)
                    .into_iter()
                    .zip(scenario.trips())
                    .filter_map(|(ok, t)| ok.then(|| t.trip_id.clone()))
                    .collect();
                CurvePoint {
                    k,
                    completion_rate: if total == 0 {
                        1.0
                    } else {
                        (total - stranded) as f64 / total as f64
                    },
                    stranded_count: stranded,
                    mask,
                    surviving_trips,
                }
            })
            .collect(),
    })
}

/// Greedily drops the site whose removal strands the fewest trips until at
/// most `k` remain.
fn trim_to(scenario: &Scenario, mask: &StationMask, k: usize) -> StationMask {
    let mut m = mask.clone();
    while m.popcount() > k {
        let drop = m
            .active()
            .map(|i| {
                let mut t = m.clone();
                t.set(i, false);
                (scenario.stranded_count(&t), i)
            })
            .min()
            .expect("popcount > k >= 0")
            .1;
        m.set(drop, false);
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutYear {
    /// 1-based year index.
    pub year: usize,
    pub adoption_fraction: f64,
    pub solution: SitingSolution,
    /// Site ids first activated this year.
    pub new_sites: Vec<String>,
}

/// Adoption seed used for year `year` (1-based) of a rollout.
pub fn year_seed(base_seed: u64, year: usize) -> u64 {
    rng::stream(base_seed, &format!("siting.rollout.year{year}")).gen()
}

/// Year-by-year station plan. Each year's trips are the base population
/// converted at that year's adoption fraction; every site active in a year
/// stays active in all later years.
pub fn rollout(
    base: &Scenario,
    adoption_by_year: &[f64],
    mode: AdoptionMode,
    adoption_seed: u64,
    method: &SearchMethod,
) -> Result<Vec<RolloutYear>, SitingError> {
    for (i, f) in adoption_by_year.iter().enumerate() {
        let prev = if i == 0 { 0.0 } else { adoption_by_year[i - 1] };
        if !((0.0..=1.0).contains(f) && *f >= prev) {
            return Err(SitingError::NonMonotoneAdoption { year: i + 1 });
        }
    }
    let n = base.candidate_count();
    let mut pinned: Option<StationMask> = None;
    let mut years = Vec::with_capacity(adoption_by_year.len());
    for (i, &fraction) in adoption_by_year.iter().enumerate() {
        let year = i + 1;
        let spec = AdoptionSpec {
            fraction,
            mode,
            seed: year_seed(adoption_seed, year),
        };
        let scenario = base.with_trips(apply_adoption(base.trips(), &spec)?)?;
        let cons = SearchConstraints {
            pinned: pinned.clone(),
            ..Default::default()
        };
        let solution = if n == 0 {
            finish(&scenario, StationMask::none(0), None, 0, SearchKind::Exhaustive)?
        } else {
            method.solve(&scenario, &cons)?
        };
        let previous = pinned.unwrap_or_else(|| StationMask::none(n));
        let new_sites = solution
            .mask
            .active()
            .filter(|&j| !previous.get(j))
            .map(|j| base.candidates()[j].site_id.clone())
            .collect();
        pinned = Some(solution.mask.clone());
        years.push(RolloutYear {
            year,
            adoption_fraction: fraction,
            solution,
            new_sites,
        });
    }
    Ok(years)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::Direction;
    use crate::geo::{GeoPoint, Snap, EARTH_RADIUS_MI};
    use crate::vehicle::VehicleClass;

    const MI_PER_DEG: f64 = EARTH_RADIUS_MI * std::f64::consts::PI / 180.0;

    fn route(id: &str, miles: f64) -> RouteProfile {
        RouteProfile::build(
            id,
            vec![
                GeoPoint { lat: 0.0, lon: 0.0 },
                GeoPoint { lat: 0.0, lon: miles / MI_PER_DEG },
            ],
            None,
        )
        .unwrap()
    }

    fn candidate(id: &str, m: f64) -> CandidateSite {
        let mut c = CandidateSite::unsnapped(id, GeoPoint { lat: 0.0, lon: m / MI_PER_DEG });
        c.snaps.insert("r".into(), Snap { milepost: m, snap_distance: 0.0 });
        c
    }

    fn trip(id: &str) -> TripSpec {
        TripSpec {
            trip_id: id.into(),
            route_id: "r".into(),
            direction: Direction::Forward,
            depart: 0.0,
            vehicle_class_id: "h2-70".into(),
        }
    }

    /// One 600-mile trip, 70 kg tank, candidates every 100 miles.
    fn five_site(length: f64, trips: usize) -> Scenario {
        let mut routes = BTreeMap::new();
        routes.insert("r".to_string(), route("r", length));
        let classes = VehicleRegistry::new([VehicleClass::fcev("h2-70", 70.0, 0.10, 10.0)]).unwrap();
        let cands = [100.0, 200.0, 300.0, 400.0, 500.0]
            .iter()
            .enumerate()
            .map(|(i, m)| candidate(&format!("c{i}"), *m))
            .collect();
        let trips = (0..trips).map(|i| trip(&format!("t{i}"))).collect();
        Scenario::new(routes, classes, cands, trips, 50.0).unwrap()
    }

    #[test]
    fn fitness_examples() {
        let scn = five_site(600.0, 1);
        assert_eq!(fitness(&StationMask::none(5), &scn), 6);
        assert_eq!(fitness(&StationMask::from_indices(5, [2]), &scn), 1);
        assert_eq!(fitness(&StationMask::all(5), &scn), 5);
        let short = five_site(100.0, 3);
        assert_eq!(fitness(&StationMask::none(5), &short), 0);
        assert_eq!(fitness_value(3, 5, &scn_with_candidates(40), None), 128);
        assert_eq!(fitness_value(0, 12, &scn_with_candidates(40), None), 12);
    }

    fn scn_with_candidates(n: usize) -> Scenario {
        let mut routes = BTreeMap::new();
        routes.insert("r".to_string(), route("r", 600.0));
        let classes = VehicleRegistry::new([VehicleClass::fcev("h2-70", 70.0, 0.10, 10.0)]).unwrap();
        let cands = (0..n).map(|i| candidate(&format!("c{i}"), 10.0 * i as f64)).collect();
        Scenario::new(routes, classes, cands, vec![], 50.0).unwrap()
    }

    #[test]
    fn five_site_optimum_is_one_station() {
        let scn = five_site(600.0, 1);
        let exact = exhaustive_optimize(&scn).unwrap();
        assert_eq!((exact.stranded_count, exact.station_count), (0, 1));
        // Lexicographically smallest single site is the last candidate.
        assert_eq!(exact.mask, StationMask::from_indices(5, [4]));
        let ga = ga_optimize(&scn, &GaConfig { seed: 11, ..Default::default() }).unwrap();
        assert_eq!((ga.stranded_count, ga.station_count), (0, 1));
        assert!(ga.feasible);
        assert_eq!(ga, ga_optimize(&scn, &GaConfig { seed: 11, ..Default::default() }).unwrap());
    }

    #[test]
    fn short_trips_need_no_stations() {
        let scn = five_site(100.0, 2);
        assert_eq!(ga_optimize(&scn, &GaConfig::default()).unwrap().station_count, 0);
        assert_eq!(exhaustive_optimize(&scn).unwrap().station_count, 0);
    }

    #[test]
    fn infeasible_scenarios_return_least_stranding_mask() {
        // Last candidate at 500 mi leaves a 700 mi leg to the destination.
        let scn = five_site(1200.0, 1);
        let exact = exhaustive_optimize(&scn).unwrap();
        assert!(!exact.feasible);
        assert_eq!(exact.stranded_count, 1);
        assert_eq!(exact.station_count, 0);
        let ga = ga_optimize(&scn, &GaConfig::default()).unwrap();
        assert!(!ga.feasible);
        assert_eq!((ga.stranded_count, ga.station_count), (1, 0));
    }

    #[test]
    fn search_errors() {
        let none = scn_with_candidates(0);
        assert!(matches!(ga_optimize(&none, &GaConfig::default()), Err(SitingError::NoCandidates)));
        assert_eq!(exhaustive_optimize(&none).unwrap().mask.len(), 0);
        assert!(matches!(
            exhaustive_optimize(&scn_with_candidates(21)),
            Err(SitingError::TooManyCandidates(21))
        ));
        let bad = GaConfig { elitism: 200, ..Default::default() };
        assert!(matches!(ga_optimize(&five_site(600.0, 1), &bad), Err(SitingError::InvalidConfig(_))));
    }

    #[test]
    fn curve_examples() {
        let scn = five_site(600.0, 1);
        let cfg = GaConfig { seed: 3, ..Default::default() };
        let curve = completion_curve(&scn, &cfg, &[5, 2, 1, 0]).unwrap();
        let rates: Vec<f64> = curve.points.iter().map(|p| p.completion_rate).collect();
        assert_eq!(rates, vec![1.0, 1.0, 1.0, 0.0]);
        assert!(curve.points.iter().all(|p| p.mask.popcount() <= p.k));
        assert_eq!(curve.points[3].surviving_trips, Vec::<String>::new());
        assert_eq!(curve.points[2].surviving_trips, vec!["t0".to_string()]);

        let exact = completion_curve_with(&scn, &SearchMethod::Exhaustive, &[2, 1, 0]).unwrap();
        assert_eq!(exact.points.iter().map(|p| p.completion_rate).collect::<Vec<_>>(), vec![1.0, 1.0, 0.0]);
        assert!(completion_curve(&scn, &cfg, &[1, 2]).is_err());
        assert!(completion_curve(&scn, &cfg, &[6]).is_err());
    }

    #[test]
    fn rollout_nests_years() {
        let scn = five_site(600.0, 4);
        let method = SearchMethod::Genetic(GaConfig::default());
        let one = rollout(&scn, &[1.0], AdoptionMode::Deterministic, 1, &method).unwrap();
        let direct = ga_optimize(&scn, &GaConfig::default()).unwrap();
        assert_eq!(one[0].solution, direct);

        let two = rollout(&scn, &[1.0, 1.0], AdoptionMode::Deterministic, 1, &method).unwrap();
        assert_eq!(two[0].solution.mask, two[1].solution.mask);
        assert!(two[1].new_sites.is_empty());

        assert!(matches!(
            rollout(&scn, &[0.5, 0.2], AdoptionMode::Deterministic, 1, &method),
            Err(SitingError::NonMonotoneAdoption { year: 2 })
        ));
    }

    #[test]
    fn pinned_sites_stay_active() {
        let scn = five_site(600.0, 1);
        let pinned = StationMask::from_indices(5, [0]);
        let cons = SearchConstraints { pinned: Some(pinned.clone()), ..Default::default() };
        let ga = ga_optimize_with(&scn, &GaConfig::default(), &cons).unwrap();
        let ex = exhaustive_optimize_with(&scn, &cons).unwrap();
        assert!(ga.mask.contains(&pinned) && ex.mask.contains(&pinned));
        assert_eq!(ex.mask, pinned);
        assert_eq!(ga.mask, pinned);
    }
}

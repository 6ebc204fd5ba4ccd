"""Smoke test for the corridor_planner extension module."""

import pathlib

import corridor_planner as cp

ROOT = pathlib.Path(__file__).resolve().parents[3]


def main():
    d = cp.haversine(0.0, 0.0, 0.0, 1.0)
    assert abs(d - 69.09) < 0.01, d

    route = cp.Route("eq", [(0.0, 0.0), (0.0, 600.0 / d)])
    assert abs(route.length - 600.0) < 1e-6

    truck = cp.VehicleClass.fcev("h2-70", 70.0, 0.1, 10.0)
    sites = [("c%d" % i, 100.0 * i) for i in range(1, 6)]
    trip = cp.simulate_trip(route, truck, sites[4:], depart=0.0, speed_mph=50.0)
    assert trip["completed"], trip
    stranded = cp.simulate_trip(route, truck, [], depart=0.0, speed_mph=50.0)
    assert not stranded["completed"]

    scen = ROOT / "scenarios" / "five_site"
    sc = cp.Scenario.from_files(
        str(scen / "routes.csv"),
        str(scen / "sites.csv"),
        str(scen / "trips.csv"),
        str(scen / "vehicles.json"),
    )
    assert sc.candidate_ids == ["c1", "c2", "c3", "c4", "c5"]
    assert sc.stranded_count("none") == 1
    best = sc.optimize(seed=7, exact=True)
    assert best["station_count"] == 1 and best["sites"] == ["c5"], best
    ga = sc.optimize(seed=7)
    assert ga["station_count"] == 1

    assert cp.dispenser_count(14400.0, 10.0, 1.0) == 1
    assert abs(cp.co2_annual(100000.0, 0.2, 386.0) - 7.72) < 1e-9
    assert abs(cp.refuel_rate(62.5, 0.64) - 40.0) < 1e-9
    print("smoke test passed")


if __name__ == "__main__":
    main()

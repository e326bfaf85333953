"""Worked examples for each module, with hand-derived or independently computed values."""
import json
import math
import shutil
from datetime import datetime, timezone

import numpy as np
import pytest
from sklearn.cluster import KMeans

from oracles import brute_force_optimum
from pmusynth.composition import classify_period, mix_fractions
from pmusynth.config import PipelineConfig
from pmusynth.demand.assignment import assign_patterns, target_counts
from pmusynth.demand.hourly import PrototypeProfile, fit_bus_weights, nearest_prototypes
from pmusynth.demand.patterns import LoadPatternLibrary, cluster_distance, extract_patterns
from pmusynth.demand.rescale import rescale
from pmusynth.demand.scaling import scale_day_hour
from pmusynth.emit.dispatch import allocate
from pmusynth.emit.powerflow import solve_snapshot
from pmusynth.emit.stream import export_csv
from pmusynth.emit.timeline import SeriesTable, Timeline, build_timeline_inputs
from pmusynth.emit.tsb import TsbFile, header_bytes, read_tsb_raw, write_tsb_raw
from pmusynth.exceptions import ValidationError
from pmusynth.fixtures import mini_case_dict, prototype_profiles
from pmusynth.grid import (Bus, CorrelationCurve, GeoPoint, WindFarm, build_grid_case, correlation,
                           great_circle_distance)
from pmusynth.io import read_load_history, read_table, read_wind_5min
from pmusynth.pipeline import cmd_compose, cmd_demand, cmd_emit, cmd_wind, in_season
from pmusynth.wind.power import TurbineCurve, farm_power_series, power_output
from pmusynth.wind.synth import (ReferenceLattice, build_reference_lattice, combine_speed,
                                 farm_variations, point_streams, synthesize_reference_variations)
from pmusynth.wind.variation import SigmaDistribution, detrend_and_difference, estimate_sigma_distribution

R_EARTH = 6371.0


def sphere_distance(a, b):
    """atan2 form of the great-circle distance; independent of the haversine code."""
    p1, l1, p2, l2 = map(math.radians, (a.latitude, a.longitude, b.latitude, b.longitude))
    dl = l2 - l1
    num = math.hypot(math.cos(p2) * math.sin(dl),
                     math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl))
    den = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return R_EARTH * math.atan2(num, den)


@pytest.fixture
def work(workspace, tmp_path):
    dst = tmp_path / "ws"
    shutil.copytree(workspace.parent, dst)
    return dst / "config.yaml"


# --- geography --------------------------------------------------------------

def test_distance_examples():
    assert great_circle_distance(GeoPoint(0, 0), GeoPoint(0, 0)) == 0.0
    assert great_circle_distance(GeoPoint(0, 0), GeoPoint(0, 180)) == pytest.approx(20015.1, abs=0.1)
    # frozen from the atan2 form
    assert great_circle_distance(GeoPoint(30, -97), GeoPoint(32, -96)) == pytest.approx(241.9499250886825, abs=1e-9)


def test_correlation_examples():
    c = CorrelationCurve.default()
    assert correlation(c, 0.0) == 1.0
    assert correlation(c, 600.0) == 0.0 and correlation(c, 601.0) == 0.0
    # 1 - 300/300 + 300^2/360000
    assert correlation(c, 300.0) == 0.25


def test_bus_with_bad_ratio_named():
    doc = mini_case_dict()
    doc["buses"][4]["rci_ratio"] = [0.5, 0.3, 0.1]
    with pytest.raises(ValidationError, match="bus 5"):
        build_grid_case(doc)


# --- hourly weights ---------------------------------------------------------

def test_pure_residential_bus_weights():
    profiles = [PrototypeProfile(s, GeoPoint(30, -97), v) for s, v in
                (("residential", np.array([1.0, 4.0, 2.0])), ("commercial", np.ones(3)),
                 ("industrial", np.ones(3)))]
    fit = fit_bus_weights(Bus(1, GeoPoint(30, -97), 1, 20.0, (1, 0, 0)), profiles)
    np.testing.assert_allclose(fit.weights, [5.0, 0.0, 0.0], atol=1e-12)


def test_flat_profiles_weights():
    profiles = [PrototypeProfile(s, GeoPoint(30, -97), np.ones(24))
                for s in ("residential", "commercial", "industrial")]
    fit = fit_bus_weights(Bus(1, GeoPoint(30, -97), 1, 10.0, (0.5, 0.3, 0.2)), profiles)
    np.testing.assert_allclose(fit.weights, [5.0, 3.0, 2.0], atol=1e-12)


def test_fixture_bus_weights_match_grid_search(mini_case):
    rng = np.random.default_rng(2019)
    protos = [PrototypeProfile(s, GeoPoint(la, lo), v, n) for n, s, la, lo, v in prototype_profiles(rng)]
    bus = mini_case.buses[0]
    fit = fit_bus_weights(bus, nearest_prototypes(bus, protos))
    # five-level dense grid search over the weight simplex (finest step 5e-11)
    golden = [22.01346086491353, 10.302341116966343, 1.9741056726045503]
    np.testing.assert_allclose(fit.weights, golden, rtol=1e-8)


# --- minute scaling and patterns --------------------------------------------

def test_scaling_examples():
    np.testing.assert_array_equal(scale_day_hour([5.0, 6.0, 7.0, 8.0]), np.ones(4))
    np.testing.assert_array_equal(scale_day_hour([100.0, 110.0, 120.0]), [1.0, 1.0, 1.0])
    np.testing.assert_allclose(scale_day_hour([100.0, 120.0, 120.0]), [1.0, 120 / 110, 1.0], rtol=1e-15)


def test_each_sample_its_own_cluster():
    X = np.array([[1.0, 1.0], [1.0, 2.0], [3.0, 1.0]])
    lib = extract_patterns(X, K=3)
    assert sorted(lib.patterns.tolist()) == sorted(X.tolist())
    np.testing.assert_allclose(lib.probabilities, [1 / 3] * 3)


def test_two_separated_groups():
    X = np.array([[1.0, 1.0]] * 3 + [[5.0, 5.0]] * 1)
    lib = extract_patterns(X, K=2)
    assert lib.patterns.tolist() == [[1.0, 1.0], [5.0, 5.0]]
    assert lib.probabilities.tolist() == [0.75, 0.25]


def test_fixture_clustering_near_multi_restart_optimum(workspace):
    history = read_load_history(workspace.parent / "load_history.csv")
    X = np.vstack([scale_day_hour(v) for d, v in history.items() if in_season(d, [[152, 244]])])
    assert X.shape[0] == 40
    lib = extract_patterns(X, K=4, seed=1)
    ref = KMeans(n_clusters=4, init="random", n_init=100, random_state=0).fit(X)
    assert lib.inertia <= 1.05 * ref.inertia_


def test_cluster_distance_examples():
    lib = LoadPatternLibrary(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]), np.full(3, 1 / 3), 3)
    assert cluster_distance(lib, 0, 2) == 0.0
    assert cluster_distance(lib, 1, 1) == 1e-6
    assert cluster_distance(lib, 0, 1) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_single_pattern_assignment(mini_case):
    lib = LoadPatternLibrary(np.ones((1, 5)), np.array([1.0]), 1)
    a = assign_patterns(mini_case.zones, lib)
    assert a.labels.tolist() == [0] * 8 and a.c.tolist() == [[1]] * 8


def test_fixture_assignment_is_optimal(work, mini_case):
    cfg = PipelineConfig.load(work)
    cmd_demand(cfg)
    lib = LoadPatternLibrary.from_dict(json.loads((cfg.output_dir / "demand" / "patterns.json").read_text()))
    doc = json.loads((cfg.output_dir / "demand" / "assignment.json").read_text())
    counts = target_counts(8, lib.probabilities)
    assert counts.tolist() == [2, 2, 2, 2]
    best = brute_force_optimum([z.centroid for z in mini_case.zones], lib.patterns.tolist(), counts)
    assert doc["objective_value"] == pytest.approx(best, abs=1e-12)


def test_rescale_examples():
    np.testing.assert_array_equal(rescale(80.0, 120.0, np.ones(5)), [80.0, 90.0, 100.0, 110.0, 120.0])
    np.testing.assert_allclose(rescale(100.0, 100.0, [1.0, 1.05, 0.95]), [100.0, 105.0, 95.0], rtol=1e-15)
    m = np.arange(61)
    pattern = 1.0 + 0.03 * np.sin(np.pi * m / 60)
    expected = [(80.0 + 40.0 * k / 60) * (1.0 + 0.03 * math.sin(math.pi * k / 60)) for k in range(61)]
    np.testing.assert_allclose(rescale(80.0, 120.0, pattern), expected, rtol=1e-14)


# --- compositions -----------------------------------------------------------

def test_composition_examples():
    np.testing.assert_allclose(mix_fractions((1, 0, 0), "Peak") * 100, [8, 7, 2, 34, 15, 34], atol=1e-12)
    for period in ("Peak", "Shoulder", "Light"):
        np.testing.assert_allclose(mix_fractions((0, 0, 1), period) * 100, [13, 22, 16, 0, 27, 22], atol=1e-12)
    half = mix_fractions((0.5, 0.5, 0), "Light") * 100
    np.testing.assert_allclose(half, [11, 9, 3, 2.5, 39, 35.5], atol=1e-12)
    assert (classify_period(15), classify_period(3), classify_period(7)) == ("Peak", "Light", "Shoulder")


# --- wind variation ---------------------------------------------------------

def test_variation_examples():
    detrended, inc, _, sigma = detrend_and_difference([1.0, 2.0, 3.0, 4.0])
    assert detrended.tolist() == [0, 0, 0, 0] and inc.tolist() == [0, 0, 0, 0] and sigma == 0.0
    detrended, inc, _, _ = detrend_and_difference([5.0, 7.0, 5.0])
    assert detrended.tolist() == [0.0, 2.0, 0.0]
    assert inc.tolist() == [0.0, 2.0, -2.0]


def test_sigma_examples(rng):
    assert estimate_sigma_distribution(np.array([[1.0, 2.0, 3.0]])).samples.tolist() == [0.0]
    assert not estimate_sigma_distribution(np.full(50, 7.0), window_length=10).samples.any()
    windows = np.empty((100, 21))
    for w in windows:
        w[0] = 9.0
        for s in range(1, 21):
            w[s] = 9.0 + 0.8 * (w[s - 1] - 9.0) + rng.normal(0, 0.3)
    got = estimate_sigma_distribution(windows).samples
    for row, sigma in zip(windows, got):
        d = [row[s] - (row[0] + (row[-1] - row[0]) * s / 20) for s in range(21)]
        d[0] = d[-1] = 0.0
        inc = [0.0] + [d[s] - d[s - 1] for s in range(1, 21)]
        mean = sum(inc) / 21
        assert sigma == pytest.approx(math.sqrt(sum((x - mean) ** 2 for x in inc) / 21), abs=1e-12)


def _farm(i, lat, lon, bus=1):
    return WindFarm(i, bus, GeoPoint(lat, lon), 100.0, "generic")


def test_single_farm_lattice_geometry():
    lat = build_reference_lattice([_farm(1, 33.3, -99.1)])
    d = [great_circle_distance(GeoPoint(33.3, -99.1), p) for p in lat.points]
    nearest = int(np.argmin(d))
    assert d[nearest] <= 300 * math.sqrt(2)
    assert lat.weights[0, nearest] == lat.weights[0].max() == 1.0


def test_fixture_lattice_weights_recomputed(mini_case):
    lat = build_reference_lattice(mini_case.wind_farms)
    for e, farm in enumerate(mini_case.wind_farms):
        for n, p in enumerate(lat.points):
            d = sphere_distance(farm.location, p)
            expected = (1 - d / 600) ** 2 if d < 600 else 0.0
            assert lat.weights[e, n] == pytest.approx(expected, abs=1e-9)


def test_zero_sigma_gives_zero_variation():
    lat = build_reference_lattice([_farm(1, 31, -100), _farm(2, 32, -99)])
    out = synthesize_reference_variations(lat, SigmaDistribution(np.zeros(1)), 21, seed=1, n_windows=3)
    assert not out.any()


def test_seeded_walk_is_cumulative_sum_of_draws():
    lat = build_reference_lattice([_farm(1, 31, -100)])
    psi = SigmaDistribution(np.array([1.0]))
    out = synthesize_reference_variations(lat, psi, 3, seed=42)
    rng = point_streams(42, len(lat.points))[0]
    psi.draw(rng)
    g = rng.normal(0.0, 1.0, 2)
    assert out[0, 0].tolist() == [0.0, g[0], g[0] + g[1]]


def test_increment_std_matches_sigma():
    lat = build_reference_lattice([_farm(1, 31, -100)])
    out = synthesize_reference_variations(lat, SigmaDistribution(np.array([2.0])), 10_001, seed=3)
    assert np.diff(out[0, 0]).std() == pytest.approx(2.0, rel=0.05)


def _manual_lattice(weights):
    weights = np.asarray(weights, dtype=float)
    pts = tuple(GeoPoint(30, -100 + i) for i in range(weights.shape[1]))
    return ReferenceLattice(points=pts, farm_ids=tuple(range(weights.shape[0])), weights=weights)


def test_farm_variation_examples():
    x = np.array([0.0, 1.5, -0.5])
    lat = _manual_lattice([[0.3, 0.2, 0.5], [0.0, 1.0, 0.0], [0.6, 0.4, 0.0]])
    np.testing.assert_allclose(farm_variations(lat, np.vstack([x, x, x]))[0], x, atol=1e-15)
    ref = np.array([[9.0, 9.0, 9.0], [0.0, 1.5, -0.5], [4.0, 4.0, 4.0]])
    np.testing.assert_array_equal(farm_variations(lat, ref)[1], x)
    const = np.array([[2.0, 2.0], [-1.0, -1.0], [0.0, 0.0]])
    np.testing.assert_allclose(farm_variations(lat, const)[2], [0.8, 0.8], atol=1e-15)


def test_combine_speed_examples():
    np.testing.assert_array_equal(combine_speed(4.0, 8.0, np.zeros(5), 5), [4.0, 5.0, 6.0, 7.0, 8.0])
    np.testing.assert_array_equal(combine_speed(10.0, 10.0, [0.0, 0.5, 0.0], 3), [10.0, 10.5, 10.0])
    np.testing.assert_array_equal(combine_speed(0.1, 0.1, [0.0, -5.0, -9.0, 0.0], 4), [0.1, 0.0, 0.0, 0.1])


def test_power_series_examples():
    curve = TurbineCurve()
    assert not power_output(curve, np.linspace(25.01, 40, 50)).any()
    farm = _farm(1, 30, -100)
    np.testing.assert_allclose(farm_power_series(farm, np.full(10, 12.0), curve), 95.0, rtol=1e-12)
    ramp = farm_power_series(farm, np.linspace(0, 20, 300), curve)
    assert np.all(np.diff(ramp) >= 0)


# --- emission ---------------------------------------------------------------

START = datetime(2016, 7, 15, 17, tzinfo=timezone.utc)


def test_zero_noise_and_reactive_power(mini_case):
    ids = tuple(b.id for b in mini_case.buses)
    loads = SeriesTable("load", np.array([0.0, 60.0, 120.0]), ids,
                        np.vstack([np.full(40, 100.0), np.full(40, 100.0), np.full(40, 160.0)]))
    wind = SeriesTable("wind", np.array([0.0, 120.0]), tuple(w.id for w in mini_case.wind_farms),
                       np.zeros((2, 6)))
    tl = Timeline(START, 15, 8)
    inj = build_timeline_inputs(mini_case, loads, wind, tl, noise_sigma=0.0)
    np.testing.assert_array_equal(inj.load_p, inj.load_p_clean)
    np.testing.assert_allclose(inj.load_p[:, 0], [100] * 5 + [115, 130, 145, 160])
    assert inj.load_q[0, 0] == pytest.approx(32.86841051788632, abs=1e-9)


def test_dispatch_examples():
    np.testing.assert_array_equal(allocate(150.0, [0, 0], [200, 200], [1, 1]), [75.0, 75.0])
    # hand waterfall: 200 each would exceed the first unit's 100 MW; the other four share 900
    got = allocate(1000.0, [0] * 5, [100, 300, 300, 300, 300], [1] * 5)
    np.testing.assert_allclose(got, [100, 225, 225, 225, 225], atol=1e-12)


def test_flat_start_on_ideal_network():
    doc = mini_case_dict()
    for ln in doc["lines"]:
        ln["b_pu"] = 0.0
    for g in doc["generators"]:
        g["vm_setpoint_pu"] = 1.0
    case = build_grid_case(doc)
    f = solve_snapshot(case, np.zeros(40), np.zeros(40), np.zeros(6), np.zeros(8))
    assert f.converged
    np.testing.assert_allclose(f.vm, 1.0, atol=1e-12)
    np.testing.assert_allclose(f.va, 0.0, atol=1e-12)


def test_ten_thousand_frame_container(tmp_path):
    rng = np.random.default_rng(0)
    tsb = TsbFile(["a", "b", "c"], [1, 2, 3], np.arange(10_000, dtype=np.uint64), rng.normal(size=(10_000, 3)))
    write_tsb_raw(tsb, tmp_path / "big.tsb")
    back = read_tsb_raw(tmp_path / "big.tsb")
    assert back.values.tobytes() == tsb.values.tobytes()
    assert (tmp_path / "big.tsb").stat().st_size == len(header_bytes(tsb.names, tsb.units)) + 8 + 10_000 * tsb.frame_size


def test_csv_line_count(tmp_path, mini_case):
    f = solve_snapshot(mini_case, np.full(40, 30.0), np.full(40, 10.0), np.zeros(6),
                       np.full(8, 150.0))
    frames = [f, f, f]
    export_csv(frames, ["vm:bus:1", "va:bus:2"], tmp_path / "f.csv")
    assert len((tmp_path / "f.csv").read_text().splitlines()) == 4


# --- pipeline ---------------------------------------------------------------

def test_missing_history_path(work):
    (work.parent / "load_history.csv").unlink()
    with pytest.raises(ValidationError, match="load_history"):
        cmd_demand(PipelineConfig.load(work))


def test_zero_sigma_wind_run_is_interpolation(work):
    # a constant history has no variation, so every window's sigma is zero
    rows = ["timestamp_utc,speed_mps"] + [f"2016-06-01T{h:02d}:{m:02d}:{s:02d}Z,8.5"
                                           for h in range(2) for m in range(60) for s in range(0, 60, 15)]
    (work.parent / "wind_history.csv").write_text("\n".join(rows) + "\n")
    cfg = PipelineConfig.load(work)
    cmd_wind(cfg)
    _, fine = read_table(cfg.output_dir / "wind" / "speeds.csv")
    stamps, ids, v5 = read_wind_5min(cfg.paths["wind_5min"])
    i0 = stamps.index(cfg.start_utc)
    for w in range(12):
        for e in range(6):
            a, b = v5[i0 + w, e], v5[i0 + w + 1, e]
            expected = [(b - a) / 20 * k + a for k in range(20)] + [b]
            assert fine[w * 20:(w + 1) * 20 + 1, e + 1].tolist() == expected
    _, power = read_table(cfg.output_dir / "wind" / "power.csv")
    np.testing.assert_allclose(power[:, -1], power[:, 1:-1].sum(axis=1), atol=1e-9)


def test_compose_rows_sum_to_one(work):
    cfg = PipelineConfig.load(work)
    cmd_compose(cfg)
    _, data = read_table_skip(cfg.output_dir / "compose" / "compositions.csv")
    np.testing.assert_allclose(data.sum(axis=1), 1.0, atol=1e-5)


def read_table_skip(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), np.array([[float(v) for v in ln.split(",")[2:]] for ln in lines[1:]])


def test_stage_manifests_stable(work):
    cfg = PipelineConfig.load(work)
    docs = [(cmd_demand(cfg), cmd_wind(cfg), cmd_emit(cfg)) for _ in range(2)]
    assert docs[0] == docs[1]

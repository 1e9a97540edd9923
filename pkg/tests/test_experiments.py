import math
import os
import tempfile
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynsr.errors import ConfigError, DynsrError
from dynsr.experiments import (
    ExperimentConfig,
    PhaseDiagram,
    ResultTable,
    SourceGenerator,
    builtin_scenario,
    config_from_mapping,
    default_separations,
    emit_csv,
    format_csv,
    phase_diagram,
    read_csv,
    run_scenario,
    success_count,
    trial_seed,
    velocity_separation,
)


def test_builtin_scenarios():
    c = builtin_scenario("sec4_3")
    assert (c.omega, c.tau, c.T, c.sigma, c.N) == (1.0, 0.2, 4, (1e-2,), 6)
    assert np.allclose(c.sources.locations, [[0, 0.27], [0.2, 0.17]])
    assert np.allclose(c.sources.velocities, [[0.14, 0.51], [0.45, 0.17]])
    d = builtin_scenario("sec5_3_2d")
    assert np.allclose(d.sources.velocities, [[0.47, 0.11], [0.58, 0.56]]) and d.tolerance == 0.06
    e = builtin_scenario("sec5_3_1d")
    assert e.sigma == (0.3,) and np.allclose(e.sources.velocities.ravel(), [0.2, 1.1])
    with pytest.raises(ConfigError):
        builtin_scenario("nope")


def test_scenario_runs_are_seeded():
    cfg = config_from_mapping({"scenario": "sec4_3", "trials": 20, "seed": 4})
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert format_csv(a) == format_csv(b)
    assert len(set(a.column("seed"))) == 20
    assert success_count(a) >= 19
    assert format_csv(run_scenario(config_from_mapping({"scenario": "sec4_3", "trials": 20, "seed": 5}))) != format_csv(a)


def test_config_mapping():
    cfg = config_from_mapping({
        "task": "detect-number-1d",
        "sources": [{"amplitude": [1, 1], "location": [0.0], "velocity": [0.1]},
                    {"location": [0.2], "velocity": [0.9]}],
        "sigma": {"start": 1e-4, "stop": 1e-2, "per_decade": 1},
        "algorithm": {"tps": 0.01},
        "phase": {"kind": "support-1d"},
        "T": 8,
    })
    assert cfg.sources.amplitudes[0] == 1 + 1j and cfg.sigma == pytest.approx((1e-4, 1e-3, 1e-2))
    assert cfg.tps == 0.01 and cfg.phase_kind == "support-1d"
    table = run_scenario(replace(cfg, trials=3))
    assert table.column("detected_n") == [2] * 9
    assert table.column("sigma") == sorted(table.column("sigma"))
    with pytest.raises(ConfigError):
        config_from_mapping({"bogus": 1})
    with pytest.raises(ConfigError):
        config_from_mapping({"trials": 0})
    with pytest.raises(ConfigError):
        config_from_mapping({"sigma": []})
    with pytest.raises(ConfigError):
        config_from_mapping({"task": "fly"})


def test_amplitude_override_and_timing():
    cfg = config_from_mapping({"scenario": "sec5_3_1d", "amplitude": 10, "trials": 4, "timing": True})
    assert np.all(cfg.sources.amplitudes == 10)
    table = run_scenario(cfg)
    assert table.columns[-1] == "runtime" and all(r > 0 for r in table.column("runtime"))


def test_generator():
    gen = SourceGenerator(n=3, dim=2, velocity_radius=0.7, min_separation=0.2, amplitude=2.0)
    ps = gen.draw(np.random.default_rng(1), 0.5)
    assert ps.n == 3 and ps.tau == 0.5 and np.allclose(np.abs(ps.amplitudes), 2.0)
    assert np.all(np.linalg.norm(ps.velocities, axis=1) <= 0.7)
    assert velocity_separation(ps) >= 0.2 * 0.5 - 1e-12
    with pytest.raises(ConfigError):
        SourceGenerator(n=5, velocity_radius=0.1, min_separation=1.0, max_tries=20).draw(np.random.default_rng(0), 1)
    cfg = ExperimentConfig(task="recover-velocity-2d", generator=SourceGenerator(velocity_radius=0.78), n=2,
                           sigma=(1e-9,), noiseless=True, trials=3)
    table = run_scenario(cfg)
    assert all(e <= 2e-3 for e in table.column("max_error"))


def test_trial_seed_hashing():
    assert trial_seed(0, 1, 2) == trial_seed(0, 1, 2)
    assert len({trial_seed(0, i, j) for i in range(10) for j in range(10)}) == 100


def small_diagram(kind, trials=30):
    cfg = ExperimentConfig(task="detect-number-1d", phase_kind=kind, sigma=(1e-2, 1e-4), T=8, trials=trials,
                           separations=(0.01, 0.05, 0.2, 0.5))
    return phase_diagram(cfg)


def test_phase_diagram_consistency():
    diag = small_diagram("number-1d")
    assert diag.successes.shape == (2, 4)
    assert np.all((diag.rates >= 0) & (diag.rates <= 1))
    table = diag.to_table()
    assert len(table) == 8 and set(table.column("trials")) == {30}
    # tiny noise: high success above a fixed separation
    assert diag.rates[1, 2:].min() == 1.0
    crit = diag.critical_separations()
    assert crit[1] <= crit[0]
    assert math.isfinite(diag.slope())


def test_phase_diagram_monotone_within_binomial_noise():
    diag = small_diagram("support-1d", trials=100)
    for row in diag.rates:
        for a, b in zip(row, row[1:]):
            spread = 2 * math.sqrt(max(a * (1 - a), b * (1 - b), 1e-4) / 100)
            assert b >= a - 2 * spread


def test_slope_needs_two_points():
    diag = PhaseDiagram("number-1d", (1e-2, 1e-3), (0.1,), np.array([[0], [10]]), 10, "x")
    assert math.isnan(diag.slope())
    assert np.isnan(diag.critical_separations()[0])


def test_default_separations():
    seps = default_separations()
    assert seps[0] == pytest.approx(1e-3) and seps[-1] == pytest.approx(0.5)
    assert np.allclose(np.diff(np.log10(seps)), 1 / 20, atol=1e-3)


def test_csv_tables(tmp_path):
    empty = ResultTable(("a", "b"))
    emit_csv(empty, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == "a,b\n"
    one = ResultTable(("a", "b"), [(1, 0.5)])
    emit_csv(one, tmp_path / "o.csv")
    assert (tmp_path / "o.csv").read_text().count("\n") == 2
    with pytest.raises(DynsrError):
        emit_csv(one, tmp_path / "missing" / "x.csv")


@given(st.lists(st.tuples(st.integers(-10**6, 10**6), st.floats(allow_nan=False), st.text("abc xyz,\"", max_size=6)),
                max_size=5))
def test_csv_round_trip(rows):
    rows = [(i, x, s if s else "-") for i, x, s in rows]
    rows = [(i, x, s) for i, x, s in rows if not _looks_numeric(s)]
    table = ResultTable(("i", "x", "s"), rows)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "t.csv")
        emit_csv(table, path)
        back = read_csv(path)
    assert back.columns == table.columns
    assert back.rows == [tuple(r) for r in rows]


def _looks_numeric(s):
    try:
        float(s)
        return True
    except ValueError:
        return False

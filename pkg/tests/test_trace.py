import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heatsing.model import AbsorptionParams, flat_exact_solution
from heatsing.parabolic import DiracApprox, RadialGrid, RadialSolution, TimeMesh, Zero, solve
from heatsing.trace import (
    MomentTrajectory,
    SamplingError,
    WindowError,
    classification_experiment,
    classify_and_extract,
    harnack_fit,
    lower_bound_check,
    moment_trajectory,
    plateau_check,
    shell_integral,
)

P02 = AbsorptionParams(0.0, 2.0, 1)
GRID = RadialGrid(4.0, 401)


def synthetic(field, times, params=P02, grid=GRID):
    """RadialSolution with snapshots field(r, t) on the given times."""
    times = np.asarray(times, dtype=float)
    snaps = np.array([field(grid.nodes, t) for t in times])
    mesh = TimeMesh(0.0, float(times[-1]), 4)
    return RadialSolution(params, grid, mesh, times, snaps, None, Zero())


# ---------------------------------------------------------------- moments


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_shell_integral_of_constant(dim):
    r = np.linspace(0, 2, 201)
    val = shell_integral(r, np.ones_like(r), 0.5, 1.25, dim)
    from heatsing.model import sphere_area

    assert val == pytest.approx(sphere_area(dim) * (1.25**dim - 0.5**dim) / dim, rel=1e-4)


def test_moment_trajectory_recovers_dirac_mass():
    g = RadialGrid(6.0, 601)
    sol = solve(P02, g, TimeMesh(1e-3, 0.1, 200, 2.0), DiracApprox(2.0, 1e-3, False), absorption=False,
                record=[0.01, 0.05, 0.1])
    traj = moment_trajectory(sol, 3.0, [0.01, 0.05, 0.1])
    assert list(traj.times) == [0.1, 0.05, 0.01]
    np.testing.assert_allclose(traj.moments, 2.0, rtol=1e-2)
    assert traj.to_csv().startswith("t,moment\n0.10000000000000001,")


def test_moment_trajectory_errors():
    sol = synthetic(lambda r, t: np.ones_like(r), [0.1, 0.2])
    with pytest.raises(SamplingError):
        moment_trajectory(sol, 1.0, [0.05])
    with pytest.raises(SamplingError):
        moment_trajectory(sol, 5.0, [0.1])
    with pytest.raises(ValueError):
        moment_trajectory(sol, 0.0, [0.1])
    with pytest.raises(ValueError):
        MomentTrajectory(0.0, 1.0, [(0.1, 1.0), (0.2, 1.0)])


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 1.0), st.floats(1.1, 4.0))
def test_extrapolation_exact_for_linear(a, b, t1, factor):
    traj = MomentTrajectory(0.0, 1.0, [(t1 * factor, a + b * t1 * factor), (t1, a + b * t1)])
    assert traj.extrapolate() == pytest.approx(a, abs=1e-9 * (1 + abs(a) + abs(b)))


# ---------------------------------------------------------------- classification


def schedule(k_values):
    # a bump at the origin growing with k, a fixed bump near r = 2, linear in t
    def run(k):
        return synthetic(
            lambda r, t: (1 + t) * (k * np.exp(-(r**2) / 0.01) + np.exp(-((r - 2.0) ** 2) / 0.01)), [0.01, 0.02, 0.1]
        )

    return [run(k) for k in k_values]


def test_classify_separates_singular_and_regular():
    rep = classify_and_extract(schedule([1.0, 2.0, 4.0, 8.0]), [(0.0, 0.5), (2.0, 0.5), (3.5, 0.25)])
    verdicts = [v["verdict"] for v in rep.verdicts]
    assert verdicts == ["singular", "regular", "regular"]
    assert rep.singular_set == [(0.0, 0.5)]
    # the shell |r - 2| < 1/2 counts both signs of x in one dimension
    regular = {d["center"]: d for d in rep.regular_density}
    assert regular[2.0]["mass"] == pytest.approx(2 * math.sqrt(math.pi * 0.01), rel=1e-3)
    assert regular[3.5]["mass"] == pytest.approx(0.0, abs=1e-12)
    assert rep.counts() == {"singular": 1, "regular": 2}
    assert rep.as_dict()["schema"] == "heatsing.trace/1"


def test_classify_threshold_and_inconclusive():
    rep = classify_and_extract(schedule([1.0, 1.2, 1.44]), [(0.0, 0.5)])
    assert rep.verdicts[0]["verdict"] == "regular"
    rep = classify_and_extract(schedule([1.0, 1.2, 1.44]), [(0.0, 0.5)], growth_threshold=0.1)
    assert rep.verdicts[0]["verdict"] == "singular"
    rep = classify_and_extract(schedule([4.0, 2.0, 1.0]), [(0.0, 0.5)])
    assert rep.verdicts[0]["verdict"] == "inconclusive"
    with pytest.raises(ValueError):
        classify_and_extract(schedule([1.0, 2.0]), [(0.0, 0.5)])


# ---------------------------------------------------------------- plateau, lower bound, Harnack


def test_plateau_check_intercept():
    c, beta = 0.7, P02.beta
    sol = synthetic(lambda r, t: c * t ** (-beta) * (1 + 3 * t) + 0 * r, [0.01, 0.02, 0.03, 0.04, 0.2])
    res = plateau_check(sol, 0.0, (0.01, 0.04), 2.0)
    assert res["value"] == pytest.approx(c, rel=1e-10)
    assert len(res["times"]) == 4
    one = plateau_check(sol, 0.0, (0.2, 0.2), 3.0)
    assert one["value"] == pytest.approx(c * 1.6, rel=1e-12)


def test_plateau_check_window_errors():
    sol = synthetic(lambda r, t: np.ones_like(r), [0.01, 0.02])
    with pytest.raises(WindowError):
        plateau_check(sol, 0.9, (0.01, 0.02), 1.0)
    with pytest.raises(WindowError):
        plateau_check(sol, 0.0, (0.5, 0.6), 3.0)


def test_lower_bound_self_and_slack():
    sol = synthetic(lambda r, t: np.exp(-r) / t, [0.1, 0.2])
    res = lower_bound_check(sol, sol)
    assert res["passed"] and all(row["min_ratio"] == 1.0 for row in res["rows"])
    smaller = synthetic(lambda r, t: 0.9 * np.exp(-r) / t, [0.1, 0.2])
    assert not lower_bound_check(smaller, sol)["passed"]
    assert lower_bound_check(smaller, sol, slack=0.2)["passed"]
    with pytest.raises(ValueError):
        lower_bound_check(synthetic(lambda r, t: np.ones_like(r), [0.1], grid=RadialGrid(3.0, 401)), sol)
    with pytest.raises(ValueError):
        lower_bound_check(synthetic(lambda r, t: np.ones_like(r), [0.3]), sol)


def test_harnack_fit_on_flat_solution():
    # log ratio is beta log(t/s) <= beta t/s, so C is finite and below beta
    times = np.geomspace(0.01, 1.0, 40)
    sol = synthetic(lambda r, t: flat_exact_solution(P02, 0.0, t) + 0 * r, times)
    res = harnack_fit(sol, (0.0, 2.0), (0.01, 1.0))
    assert res["finite"] and 0 < res["C"] <= P02.beta
    assert res["relative_spread"] <= 0.2
    assert res["excluded"] == 0
    assert harnack_fit(sol, (0.0, 2.0), (0.01, 1.0)) == res
    with pytest.raises(ValueError):
        harnack_fit(sol, (0.0, 1e-4), (0.01, 1.0))


def test_classification_experiment_guards():
    assert classification_experiment(P02, [0])[0]["verdict"] == "weak"
    with pytest.raises(ValueError):
        classification_experiment(AbsorptionParams(0.0, 3.0, 1), [1.0])
    with pytest.raises(ValueError):
        classification_experiment(P02, [math.inf])


def test_classification_experiment_weak_for_small_mass():
    res = classification_experiment(P02, [0.5], grid=RadialGrid(6.0, 600, stretch=6.0), steps=600,
                                    probe_times=(1e-2, 1e-3), lambdas=(0.0, 1.0))
    assert res[0]["verdict"] == "weak"


def test_density_recovery_linear_exact_without_absorption():
    # heat flow conserves the bump mass; for a smooth bump the trapezoid moment is already at roundoff
    from heatsing.parabolic import Density
    from heatsing.model import sphere_area
    from scipy.integrate import quad

    bump = lambda r: np.exp(-((r - 2.0) ** 2) / 0.02)
    exact = sphere_area(1) * quad(bump, 1.0, 3.0, epsabs=0, epsrel=1e-13)[0]
    errs = []
    for n in (201, 401, 801):
        g = RadialGrid(4.0, n)
        sol = solve(P02, g, TimeMesh(0.0, 1e-3, 50, 1.0), Density(bump), absorption=False, record=[1e-4, 2e-4])
        errs.append(abs(moment_trajectory(sol, 1.0, [1e-4, 2e-4], center=2.0).extrapolate() / exact - 1))
    assert max(errs) < 1e-10


@pytest.mark.parametrize("factor,expected", [(10.0, 1 / 1.1), (1e4, 1 / 1.0001)])
def test_plateau_value_depends_on_cap_factor(factor, expected):
    # from a cap of factor * c_alpha t^-beta the flat flow sits (1 + 1/factor)^-1 below c_alpha for q = 2
    from heatsing.parabolic import BallIndicator

    t = 0.02
    sol = solve(P02, RadialGrid(3.0, 301), TimeMesh(0.0, t, 100, 2.0), BallIndicator(3.0, factor / t), record=[t])
    assert plateau_check(sol, 0.0, (t, t), 3.0)["value"] == pytest.approx(expected, rel=1e-6)

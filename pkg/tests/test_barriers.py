import math

import numpy as np
import pytest
from scipy import integrate

from heatsing.barriers import (
    AbsorptionProfile,
    AnchorError,
    ConditionError,
    elliptic_large_solution,
    keller_osserman,
    psi_inverse,
    superadditivity_spot_check,
)
from heatsing.profiles import origin_constant


# ---------------------------------------------------------------- profiles


def test_profile_validation():
    with pytest.raises(ValueError):
        AbsorptionProfile()
    with pytest.raises(ValueError):
        AbsorptionProfile(power=2.0, func=lambda s: s)
    with pytest.raises(ValueError):
        AbsorptionProfile(power=-1.0)
    with pytest.raises(ValueError):
        AbsorptionProfile(power=2.0, anchor=-1.0)
    with pytest.raises(ValueError):
        AbsorptionProfile(s_table=[0, 1, 2], h_table=[0, 1, 4])
    with pytest.raises(ValueError):
        AbsorptionProfile(s_table=[0, 1, 2, 3], h_table=[0, 2, 1, 4])


def test_primitive_matches_closed_form():
    p = AbsorptionProfile(func=lambda s: s**2.5)
    assert p.H(7.3) == pytest.approx(7.3**3.5 / 3.5, rel=1e-10)
    assert AbsorptionProfile.power_law(2.0).H(3.0) == pytest.approx(9.0)


def test_table_extrapolates_power_tail():
    s = np.linspace(0, 10, 101)
    p = AbsorptionProfile(s_table=s, h_table=s**2)
    assert not p.extrapolated
    assert float(p.h(20.0)) == pytest.approx(400.0, rel=2e-2)
    assert p.extrapolated and p.as_dict()["extrapolated"]


def test_superadditivity_spot_check():
    s = np.linspace(0, 100, 201)
    ok = superadditivity_spot_check(AbsorptionProfile(s_table=s, h_table=s**2))
    assert ok["violations"] == 0 and ok["pairs"] == 200
    bad = superadditivity_spot_check(AbsorptionProfile(s_table=s, h_table=np.sqrt(s)))
    assert bad["violations"] > 0 and bad["worst_relative_gap"] < 0
    assert superadditivity_spot_check(AbsorptionProfile.power_law(3.0))["violations"] == 0


# ---------------------------------------------------------------- Keller-Osserman


@pytest.mark.parametrize("q,expected", [(0.5, "fails"), (1.0, "fails"), (1.5, "holds"), (2.0, "holds"), (4.0, "holds")])
def test_ko_power_closed_and_numeric(q, expected):
    closed = keller_osserman(AbsorptionProfile.power_law(q))
    numeric = keller_osserman(AbsorptionProfile.power_law(q), numeric=True)
    via_callable = keller_osserman(AbsorptionProfile(func=lambda s, q=q: s**q))
    assert closed.closed_form and closed.verdict == expected
    assert numeric.verdict == expected and via_callable.verdict == expected


def test_ko_tail_estimate_matches_closed_form():
    q, s_max = 3.0, 2.0**40
    res = keller_osserman(AbsorptionProfile.power_law(q), s_max=s_max)
    # s = s_max x keeps quad on an O(1) scale
    scaled, _ = integrate.quad(lambda x: math.sqrt(q + 1) * x ** (-(q + 1) / 2), 1, np.inf)
    exact = scaled * s_max ** ((1 - q) / 2)
    assert res.tail_estimate == pytest.approx(exact, rel=1e-10)


def test_ko_borderline_log_growth_fails():
    # s log(1 + s) has H ~ s^2 log s / 2, whose KO integral diverges like log log s
    res = keller_osserman(AbsorptionProfile(func=lambda s: s * np.log1p(s)))
    assert res.verdict == "fails"


def test_ko_table_quadratic_holds():
    s = np.linspace(0, 100, 201)
    assert keller_osserman(AbsorptionProfile(s_table=s, h_table=s**2)).verdict == "holds"


def test_ko_anchor_error():
    with pytest.raises(AnchorError):
        keller_osserman(AbsorptionProfile(func=lambda s: 0 * s), s_max=2.0**20)


# ---------------------------------------------------------------- psi


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("bt", [1e-3, 1.0, 1e2])
def test_psi_defining_identity(q, bt):
    p = AbsorptionProfile.power_law(q)
    psi = psi_inverse(p, bt, 1.0)
    scaled, _ = integrate.quad(lambda x: x**-q, 1, np.inf)
    val = scaled * psi ** (1 - q)
    assert val == pytest.approx(bt, rel=1e-8)
    bisect = psi_inverse(p, bt, 1.0, method="bisect")
    assert bisect == pytest.approx(psi, rel=1e-8)


def test_psi_general_callable():
    p = AbsorptionProfile(func=lambda s: s**2 + s**3)
    psi = psi_inverse(p, 0.5, 2.0)
    val, _ = integrate.quad(lambda s: 1 / (s**2 + s**3), psi, np.inf)
    assert val == pytest.approx(1.0, rel=1e-8)


def test_psi_condition_errors():
    with pytest.raises(ConditionError):
        psi_inverse(AbsorptionProfile.power_law(1.0), 1.0, 1.0)
    with pytest.raises(ConditionError):
        psi_inverse(AbsorptionProfile(func=lambda s: s), 1.0, 1.0)
    with pytest.raises(ValueError):
        psi_inverse(AbsorptionProfile.power_law(2.0), 0.0, 1.0)


# ---------------------------------------------------------------- elliptic large solutions


@pytest.fixture(scope="module")
def large_q3():
    return elliptic_large_solution(3.0, 1.0)


def center_value_oracle(q, w, R):
    # Phi'' = w Phi^q with Phi(0) = a: R = a^(-(q-1)/2) sqrt((q+1)/(2w)) int_1^inf dx / sqrt(x^(q+1) - 1)
    I, _ = integrate.quad(lambda x: 1 / math.sqrt(x ** (q + 1) - 1), 1, np.inf, limit=200)
    return (math.sqrt((q + 1) / (2 * w)) * I / R) ** (2 / (q - 1))


def test_large_solution_center_value(large_q3):
    assert large_q3.solver_meta["converged"]
    assert large_q3.values[0] == pytest.approx(center_value_oracle(3.0, 1.0, 1.0), rel=1e-3)


def test_large_solution_boundary_rate(large_q3):
    r, v = large_q3.nodes, large_q3.values
    for x in (0.99, 0.999):
        phi = np.interp(x, r, v)
        assert (1 - x) * phi == pytest.approx(origin_constant(3.0), rel=2e-2)


def test_large_solution_monotone_and_scaling():
    a = elliptic_large_solution(2.0, 1.0, R=1.0)
    b = elliptic_large_solution(2.0, 1.0, R=2.0)
    assert np.all(np.diff(a.values) > 0)
    # Phi_R(x) = R^-m Phi_1(x/R) with m = 2/(q-1)
    assert b.values[0] == pytest.approx(a.values[0] / 4.0, rel=1e-3)
    c = elliptic_large_solution(2.0, 3.0, R=1.0)
    assert c.values[0] == pytest.approx(a.values[0] / 3.0, rel=1e-3)


def test_large_solution_validation():
    with pytest.raises(ValueError):
        elliptic_large_solution(1.0, 1.0)
    with pytest.raises(ValueError):
        elliptic_large_solution(2.0, 0.0)

"""Named verification suites, one per acceptance criterion.

Each suite returns a :class:`SuiteResult` holding individual checks with
the measured value and the target. Suites that share an expensive run (the
saturated Dirac limit) reuse it through a small cache.
"""

from __future__ import annotations

import functools
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .model import (
    AbsorptionParams,
    absorption_flow,
    flat_exact_solution,
    heat_kernel,
    kernel_power_integral,
    sphere_area,
)
from .parabolic import (
    BallIndicator,
    Boundary,
    Density,
    DiracApprox,
    RadialGrid,
    TimeMesh,
    blowup_boundary_solve,
    default_gamma,
    dirac_saturate,
    saturation_schedule,
    solve,
    verify_upper_bounds,
)
from .profiles import (
    AccuracyWarning,
    RegimeError,
    fit_asymptotics,
    origin_constant,
    singular_origin_constant,
    solve_linear_z,
    solve_V_shooting,
    solve_V_variational,
    solve_W,
    eval_barrier,
    eval_vss,
)
from .trace import classification_experiment, classify_and_extract, lower_bound_check, plateau_check


@dataclass
class Check:
    label: str
    passed: bool
    value: object
    target: str

    def as_dict(self) -> dict:
        return {"label": self.label, "passed": self.passed, "value": self.value, "target": self.target}


@dataclass
class SuiteResult:
    name: str
    criterion: int
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def add(self, label: str, passed: bool, value, target: str) -> None:
        self.checks.append(Check(label, bool(passed), value, target))

    def line(self) -> str:
        worst = [c.label for c in self.checks if not c.passed]
        status = "PASS" if self.passed else "FAIL"
        tail = f" (failing: {', '.join(worst)})" if worst else ""
        return f"[{status}] {self.criterion:2d} {self.name}: {len(self.checks)} checks, {self.seconds:.1f}s{tail}"

    def as_dict(self) -> dict:
        return {
            "schema": "heatsing.suite/1",
            "suite": self.name,
            "criterion": self.criterion,
            "passed": self.passed,
            "checks": [c.as_dict() for c in self.checks],
            "notes": self.notes,
        }


# ---------------------------------------------------------------- shared runs

SAT_PARAMS = AbsorptionParams(0.0, 2.0, 1)
SAT_TIMES = (0.0625, 0.125, 0.25)


def _sat_grid() -> RadialGrid:
    return RadialGrid(6.0, 1200, stretch=6.0)


@functools.lru_cache(maxsize=None)
def saturated_dirac(stages: int = 12):
    """u_{k delta} driven to its k -> inf limit, alpha = 0, q = 2, N = 1."""
    t0 = 1e-2
    ks, t0s = saturation_schedule(10.0 / math.sqrt(t0), t0, stages)
    sol, table = dirac_saturate(SAT_PARAMS, _sat_grid(), SAT_TIMES[-1], ks, t0s, probe_times=SAT_TIMES, tol=1e-3)
    return sol, table


def doubled_domain(grid: RadialGrid) -> RadialGrid:
    """Same near-origin resolution on twice the radius, for the truncation check."""
    if grid.stretch == 0:
        return RadialGrid(2.0 * grid.r_max, 2 * grid.n - 1)
    return RadialGrid(2.0 * grid.r_max, 2 * grid.n, grid.stretch)


def _truncation_check(res, label, base, doubled, tol=1e-4) -> None:
    change = float(np.max(np.abs(np.asarray(doubled) / np.asarray(base) - 1.0)))
    res.add(f"{label}: r_max doubled", change <= tol, change, f"relative change <= {tol:g}")


@functools.lru_cache(maxsize=None)
def v_profile(alpha: float, q: float, dim: int):
    return solve_V_variational(AbsorptionParams(alpha, q, dim))


@functools.lru_cache(maxsize=None)
def w_profile(alpha: float, q: float):
    return solve_W(AbsorptionParams(alpha, q, 1))


# ---------------------------------------------------------------- 1. flat exact


def suite_flat_exact(res: SuiteResult) -> None:
    cap = 1e6
    grid = RadialGrid(4.0, 201)
    probes = grid.nodes <= 1.0
    for alpha in (-0.5, 0.0, 1.0):
        for q in (1.5, 2.0, 3.0):
            p = AbsorptionParams(alpha, q, 1)
            mesh = TimeMesh(0.0, 0.1, 100, default_gamma(alpha))
            sol = solve(p, grid, mesh, BallIndicator(4.0, cap))
            err, dev = 0.0, 0.0
            for t, u in zip(sol.times[1:], sol.snapshots[1:]):
                exact = absorption_flow(p, cap, 0.0, t)
                err = max(err, float(np.max(np.abs(u[probes] / exact - 1.0))))
                dev = max(dev, abs(exact / flat_exact_solution(p, 0.0, t) - 1.0))
            res.add(f"alpha={alpha:g} q={q:g}", err <= 1e-6, err, "<= 1e-6 vs the capped flat solution")
            res.notes.append(f"alpha={alpha:g} q={q:g}: capped flat solution deviates from phi_0 by {dev:.2e}")


# ---------------------------------------------------------------- 2. plateau law


def suite_plateau_law(res: SuiteResult) -> None:
    grid = RadialGrid(3.0, 301)
    window = (1e-2, 4e-2)
    for alpha, target in ((0.0, 1.0), (1.0, 2.0)):
        p = AbsorptionParams(alpha, 2.0, 1)
        record = list(np.linspace(*window, 7))
        for cap in (1e6, 4e6, 1.6e7):
            mesh = TimeMesh(0.0, window[1], 200, default_gamma(alpha))
            sol = solve(p, grid, mesh, BallIndicator(1.0, cap), record=record)
            fit = plateau_check(sol, 0.0, window, 1.0)
            err = abs(fit["value"] / target - 1.0)
            res.add(f"alpha={alpha:g} cap={cap:g}", err <= 0.02, fit["value"], f"{target} within 2%")


# ---------------------------------------------------------------- 3. universal bound


def suite_universal_bound(res: SuiteResult) -> None:
    matrix = [(-0.5, 1.5, 1), (0.0, 2.0, 1), (1.0, 2.0, 1), (0.0, 3.0, 2), (0.0, 2.0, 3), (0.5, 4.0, 2)]
    data = [
        ("plateau", BallIndicator(0.5, 1e8)),
        ("dirac-k10", DiracApprox(10.0, 1e-3)),
        ("dirac-k1e4", DiracApprox(1e4, 1e-4)),
    ]
    grid = RadialGrid(4.0, 401, stretch=3.0)
    for alpha, q, dim in matrix:
        p = AbsorptionParams(alpha, q, dim)
        worst = 0.0
        for _, datum in data:
            mesh = TimeMesh(datum.start_time, 0.5, 200, 3.0)
            sol = solve(p, grid, mesh, datum, theta=1.0)
            report = verify_upper_bounds(sol)
            worst = max(worst, max(row["es0"] for row in report.rows))
        res.add(f"alpha={alpha:g} q={q:g} N={dim}", worst <= 1 + 1e-6, worst, "max u / (c_alpha t^-beta) <= 1 + 1e-6")


# ---------------------------------------------------------------- 4. profile cross-validation


def suite_profile_cross(res: SuiteResult) -> None:
    for alpha, q, dim in ((0.0, 2.0, 1), (0.0, 2.0, 3), (1.0, 2.0, 3), (-0.5, 1.5, 1)):
        p = AbsorptionParams(alpha, q, dim)
        label = f"alpha={alpha:g} q={q:g} N={dim}"
        if not p.subcritical:
            raised = []
            for solver in (solve_V_shooting, solve_V_variational):
                try:
                    solver(p)
                    raised.append(False)
                except RegimeError:
                    raised.append(True)
            res.add(label, all(raised), f"q_crit={p.q_crit:.4g}", "q >= q_crit: both solvers raise RegimeError")
            continue
        shoot = solve_V_shooting(p)
        var = v_profile(alpha, q, dim)
        r = shoot.nodes
        err = float(np.max(np.abs(shoot.values - var(r))) / np.max(shoot.values))
        res.add(label, err <= 1e-3, err, "relative max-norm <= 1e-3")


# ---------------------------------------------------------------- 5. asymptotic exponents


def suite_asymptotics(res: SuiteResult) -> None:
    # (alpha, q) with 2 beta - 1 != 0 so the relative tolerance is meaningful
    for alpha, q in ((0.0, 2.0), (1.0, 2.0), (1.0, 3.0), (-0.5, 1.5)):
        p = AbsorptionParams(alpha, q, 1)
        # the first correction to the Gaussian model is O(r^-2); a longer domain keeps it small
        W = solve_W(p, r_max=20.0, n_nodes=4000)
        fit = fit_asymptotics(W, (10.0, 16.0))
        target = 2 * p.beta - 1
        res.add(f"W alpha={alpha:g} q={q:g}", abs(fit.exponent / target - 1) <= 0.05, fit.exponent, f"{target:g} within 5%")
    for alpha, q, dim in ((0.0, 1.5, 1), (0.0, 2.0, 1), (-0.5, 1.5, 1), (1.0, 2.0, 3)):
        p = AbsorptionParams(alpha, q, dim)
        V = v_profile(alpha, q, dim)
        fit = fit_asymptotics(V, (0.625 * V.nodes[-1], 0.875 * V.nodes[-1]))
        target = 2 * p.beta - dim
        res.add(f"V alpha={alpha:g} q={q:g} N={dim}", abs(fit.exponent / target - 1) <= 0.05, fit.exponent, f"{target:g} within 5%")
    for alpha, q in ((0.0, 2.0), (1.0, 2.0)):
        p = AbsorptionParams(alpha, q, 1)
        z1 = solve_linear_z(p, "Z1")
        z2 = solve_linear_z(p, "Z2")
        f1 = fit_asymptotics(z1, (12.0, 19.0), model="algebraic")
        f2 = fit_asymptotics(z2, (8.0, 16.0))
        t1, t2 = -2 * p.beta, 2 * p.beta - 1
        res.add(f"Z1 alpha={alpha:g}", abs(f1.exponent / t1 - 1) <= 0.05, f1.exponent, f"{t1:g} within 5%")
        res.add(f"Z2 alpha={alpha:g}", abs(f2.exponent / t2 - 1) <= 0.05, f2.exponent, f"{t2:g} within 5%")


# ---------------------------------------------------------------- 6. origin constant


def suite_origin_constant(res: SuiteResult) -> None:
    for q in (2.0, 3.0):
        for alpha in (-0.5, 0.0, 1.0):
            W = w_profile(alpha, q)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", AccuracyWarning)
                c = singular_origin_constant(W)
            target = origin_constant(q)
            res.add(f"q={q:g} alpha={alpha:g}", abs(c / target - 1) <= 0.02, c, f"{target:.6g} within 2%")
    res.notes.append("q = 2 target is exactly 6: w = 6 r^-2 solves w'' = w^2")


# ---------------------------------------------------------------- 7. kernel dichotomy


def suite_kernel_dichotomy(res: SuiteResult) -> None:
    p = AbsorptionParams(0.0, 3.0, 1)
    below = kernel_power_integral(p, 2.9, 1.0, 1e-12, levels=8)
    ratios = below.increment_ratios
    res.add("r=2.9 Cauchy convergence", below.verdict == "finite" and max(ratios) < 1, max(ratios), "increments shrink under t_min/4")
    above = kernel_power_integral(p, 3.1, 1.0, 1e-12, levels=8)
    growth = above.growths
    res.add("r=3.1 divergent trend", above.verdict == "divergent-trend", above.verdict, "increment ratio >= 1")
    res.add("r=3.1 growth >= 50% per refinement", min(growth[-2:]) >= 0.5, growth[-2:], "each of the last two >= 0.5")
    two = kernel_power_integral(p, 2.0, 1.0, 1e-12, levels=4)
    target = 1.0 / math.sqrt(2.0 * math.pi)
    res.add("r=2 closed form", abs(two.value - target) <= 1e-4, two.value, f"{target:.6f} +- 1e-4")
    res.notes.append("the r=3.1 integrand scales like t^-1.05, so the relative growth per factor-4 refinement "
                     "tends to 4^0.05 - 1 = 7.2%; 50% only holds while t_min > 0.045")


# ---------------------------------------------------------------- 8. strong singularity


def suite_strong_singularity(res: SuiteResult) -> None:
    sol, table = saturated_dirac()
    V = v_profile(0.0, 2.0, 1)
    res.add("saturated", sol.diagnostics["saturated"], table[-1]["change"], "stage change < 1e-3")
    for t in (0.0625, 0.25):
        x = np.linspace(0.0, math.sqrt(t), 17)
        err = float(np.max(np.abs(sol.value(x, t) / eval_vss(V, x, t) - 1.0)))
        res.add(f"t={t:g}", err <= 0.05, err, "relative error <= 5% on |x| <= sqrt(t)")
    # last stage again on twice the radius
    k, t0 = table[-1]["k"], table[-1]["t0"]
    x = np.linspace(0.0, 1.0, 21)
    runs = [
        solve(SAT_PARAMS, g, TimeMesh(t0, SAT_TIMES[-1], 1500, 3.0), DiracApprox(k, t0), record=SAT_TIMES, theta=1.0)
        for g in (_sat_grid(), doubled_domain(_sat_grid()))
    ]
    _truncation_check(res, "last stage", *[[r.value(x, t) for t in SAT_TIMES] for r in runs])


# ---------------------------------------------------------------- 9. weak singularity


def suite_weak_singularity(res: SuiteResult) -> None:
    out = classification_experiment(SAT_PARAMS, [0.1])[0]
    deepest = [v[0] for v in out["ratios"].values()]
    for lam, ratio in zip(out["ratios"], deepest):
        res.add(f"lambda={lam}", 0.9 <= ratio <= 1.1, ratio, "u/(kE) in [0.9, 1.1]")
    res.add("verdict", out["verdict"] == "weak", out["verdict"], "weak")
    wide = classification_experiment(SAT_PARAMS, [0.1], grid=doubled_domain(RadialGrid(6.0, 1200, stretch=6.0)))[0]
    _truncation_check(res, "ratios", list(out["ratios"].values()), list(wide["ratios"].values()))


# ---------------------------------------------------------------- 10. removability


def suite_removability(res: SuiteResult) -> None:
    p = AbsorptionParams(0.0, 4.0, 1)
    grid = RadialGrid(6.0, 1500, stretch=6.0)
    sups = []
    for t0 in (1e-2, 1e-3, 1e-4, 1e-5):
        sol = solve(p, grid, TimeMesh(t0, 0.5, 2000, 3.0), DiracApprox(1.0, t0), record=[0.5], theta=1.0)
        sups.append(float(np.max(sol.at(0.5)[grid.nodes <= 1.0])))
    wide = doubled_domain(grid)
    sol = solve(p, wide, TimeMesh(t0, 0.5, 2000, 3.0), DiracApprox(1.0, t0), record=[0.5], theta=1.0)
    _truncation_check(res, "final sup", sups[-1], float(np.max(sol.at(0.5)[wide.nodes <= 1.0])))
    decreasing = all(b < a for a, b in zip(sups, sups[1:]))
    res.add("strictly decreasing", decreasing, sups, "sup over |x| <= 1 at t = 0.5")
    res.add("final <= 25% of initial", sups[-1] <= 0.25 * sups[0], sups[-1] / sups[0], "<= 0.25")
    res.notes.append("the sup can fall no faster than t0^(N/2 - beta) = t0^(1/6), the mass of the flat bound "
                     "on the diffusion scale at release, so three decades of t0 leave at least 10^(-1/2) = 0.32")


# ---------------------------------------------------------------- 11. barrier sandwich


def suite_barrier_sandwich(res: SuiteResult) -> None:
    p = AbsorptionParams(0.0, 2.0, 1)
    W = w_profile(0.0, 2.0)
    ts = [0.05, 0.1, 0.2, 0.35, 0.5]
    xs = np.array([0.0, 0.25, 0.5, 0.75, 0.9])
    sol = blowup_boundary_solve(p, 1.0, 0.5, cap_schedule=[2.0**j for j in range(8, 60)],
                                probe_times=ts, n=2001, steps=1000)
    ratios = np.array([sol.value(xs, t) / eval_barrier(W, 1.0, xs, t) for t in ts])
    res.add("saturated", sol.diagnostics["saturated"], sol.diagnostics["cap_table"][-1], "cap change < 1e-3")
    res.add("lower profile bound", ratios.min() >= 0.95, float(ratios.min()), "u / w >= 0.95")
    res.add("upper bound 2N w", ratios.max() <= 1.05 * 2 * p.dim, float(ratios.max() / (2 * p.dim)), "u / (2N w) <= 1.05")
    res.notes.append("run in N = 1, where the circumscribing-slab argument for the 2N factor is valid")


# ---------------------------------------------------------------- 12. similarity


def suite_similarity(res: SuiteResult) -> None:
    sol, _ = saturated_dirac()
    beta = SAT_PARAMS.beta
    for m in (0.5, 2.0):
        worst = 0.0
        for t in SAT_TIMES:
            if not SAT_TIMES[0] <= m * t <= SAT_TIMES[-1]:
                continue
            x = np.linspace(0.0, 2.0 * math.sqrt(t), 17)
            scaled = m**beta * sol.value(math.sqrt(m) * x, m * t)
            worst = max(worst, float(np.max(np.abs(scaled / sol.value(x, t) - 1.0))))
        res.add(f"m={m:g}", worst <= 0.02, worst, "T_m defect <= 2%")


# ---------------------------------------------------------------- 13. trace round trip


def _bump(center: float, width: float, height: float):
    return lambda r: height * np.maximum(1.0 - ((r - center) / width) ** 2, 0.0) ** 2


def suite_trace_roundtrip(res: SuiteResult) -> None:
    p = SAT_PARAMS
    grid = RadialGrid(6.0, 1201)
    record = [0.0, 1e-6, 2e-6, 1e-4, 1e-2]
    mesh = TimeMesh(0.0, 1e-2, 400, 3.0)
    bump = _bump(2.0, 0.3, 1.0)
    rr = np.linspace(1.7, 2.3, 20001)
    bump_mass = float(sphere_area(1) * trapezoid(bump(rr), rr))

    # bump alone: every probe regular, mass recovered
    runs = [solve(p, grid, mesh, Density(bump), record=record) for _ in range(3)]
    rep = classify_and_extract(runs, [(2.0, 0.5)])
    got = rep.regular_density[0]["mass"] if rep.regular_density else 0.0
    res.add("bump regular", rep.counts().get("regular", 0) == 1, rep.verdicts[0]["verdict"], "regular")
    res.add("bump mass", abs(got / bump_mass - 1) <= 0.01, got / bump_mass, "recovered/true mass within 1%")

    # plateau on B_0.5 plus the bump, plateau cap schedule
    runs = []
    for cap in (10.0, 100.0, 1000.0):
        plateau = BallIndicator(0.5, cap).realize(grid, p)
        runs.append(solve(p, grid, mesh, Density(plateau + bump(grid.nodes)), record=record))
    probes = [(0.0, 0.25), (2.0, 0.5), (4.0, 0.5)]
    expected = ["singular", "regular", "regular"]
    rep = classify_and_extract(runs, probes)
    wrong = sum(v["verdict"] != e for v, e in zip(rep.verdicts, expected))
    res.add("mixed classification", wrong == 0, [v["verdict"] for v in rep.verdicts], "zero misclassified probes")
    masses = {d["center"]: d["mass"] for d in rep.regular_density}
    ratio = masses.get(2.0, 0.0) / bump_mass
    res.add("mixed bump mass", abs(ratio - 1) <= 0.01, ratio, "recovered/true mass within 1%")
    res.add("mixed empty region", masses.get(4.0, 1.0) <= 1e-12, masses.get(4.0), "mu = 0")

    # verdicts unchanged with h and M halved
    fine_grid = RadialGrid(6.0, 2 * grid.n - 1)
    fine_mesh = TimeMesh(0.0, 1e-2, 2 * mesh.M, 3.0)
    fine = []
    for cap in (10.0, 100.0, 1000.0):
        plateau = BallIndicator(0.5, cap).realize(fine_grid, p)
        fine.append(solve(p, fine_grid, fine_mesh, Density(plateau + bump(fine_grid.nodes)), record=record))
    fine_verdicts = [v["verdict"] for v in classify_and_extract(fine, probes).verdicts]
    res.add("verdicts stable under refinement", fine_verdicts == [v["verdict"] for v in rep.verdicts],
            fine_verdicts, "same verdicts with (h, M) halved")

    # plateau data lie above the saturated Dirac limit, on its grid and times
    sat, _ = saturated_dirac()
    worst = math.inf
    passed = True
    for cap in (1e4, 1e6):
        plateau = solve(p, sat.grid, TimeMesh(0.0, SAT_TIMES[-1], 1500, 3.0), BallIndicator(0.5, cap),
                        record=SAT_TIMES, theta=1.0)
        lb = lower_bound_check(plateau, sat, slack=0.05)
        passed &= lb["passed"]
        worst = min(worst, min(row["min_ratio"] for row in lb["rows"]))
    res.add("lower bound u >= u_inf", passed, worst, "u / u_inf >= 0.95")


# ---------------------------------------------------------------- 14. comparison


def suite_comparison(res: SuiteResult, pairs: int = 50, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    grid = RadialGrid(4.0, 121)
    worst = 0.0
    for j in range(pairs):
        alpha = rng.uniform(-0.5, 1.0)
        q = rng.uniform(1.2, 4.0)
        dim = int(rng.integers(1, 4))
        p = AbsorptionParams(alpha, q, dim)
        f = rng.uniform(0, 1, grid.n) * 10.0 ** rng.uniform(-2, 3)
        g = f + rng.uniform(0, 1, grid.n) * 10.0 ** rng.uniform(-3, 2)
        mesh = TimeMesh(0.0, 0.5, 60, default_gamma(alpha))
        theta = 0.5 if j % 2 else 1.0
        uf = solve(p, grid, mesh, Density(f), theta=theta).snapshots
        ug = solve(p, grid, mesh, Density(g), theta=theta).snapshots
        worst = max(worst, float(np.max(uf - ug)))
    res.add(f"{pairs} ordered pairs", worst <= 1e-12, worst, "max(u_f - u_g) <= 1e-12")

    over, exact_ratio = 0.0, 0.0
    for k, t0 in ((1.0, 1e-3), (100.0, 1e-3), (1e4, 1e-4)):
        p = AbsorptionParams(0.0, 2.0, 1)
        grid_d = RadialGrid(4.0, 801, stretch=4.0)
        mesh = TimeMesh(t0, 0.25, 400, 3.0)
        datum = DiracApprox(k, t0, clip_to_flat=False)
        u = solve(p, grid_d, mesh, datum, theta=1.0)
        heat = solve(p, grid_d, mesh, datum, theta=1.0, absorption=False)
        over = max(over, float(np.max(u.snapshots - heat.snapshots)))
        for t, snap in zip(u.times, u.snapshots):
            kE = k * heat_kernel(grid_d.nodes, t, 1)
            live = kE > 1e-2 * kE.max()
            exact_ratio = max(exact_ratio, float(np.max(snap[live] / kE[live])))
    res.add("Dirac runs below kE", over <= 1e-12, over, "u - (discrete heat flow of kE) <= 1e-12")
    res.notes.append(f"max u/(kE) against the exact kernel: {exact_ratio:.6f} where kE > 1e-2 max kE (discretization error of the heat flow)")


# ---------------------------------------------------------------- 15. scheme order


def _orders(errors: list) -> list:
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


def suite_scheme_order(res: SuiteResult) -> None:
    for dim in (1, 3):
        p = AbsorptionParams(0.0, 2.0, dim)
        errors = []
        for level in range(3):
            n = 40 * 2**level + 1
            grid = RadialGrid(4.0, n)
            mesh = TimeMesh(0.05, 0.2, 10 * 2**level, 1.0)
            sol = solve(p, grid, mesh, DiracApprox(1.0, 0.05, clip_to_flat=False), absorption=False,
                        record=[0.2], theta=0.5)
            inner = grid.nodes <= 2.0
            exact = heat_kernel(grid.nodes[inner], 0.2, dim)
            errors.append(float(np.max(np.abs(sol.at(0.2)[inner] - exact)) / exact[0]))
        orders = _orders(errors)
        res.add(f"heat kernel N={dim}", min(orders) >= 1.8, orders, "observed order >= 1.8")

    p = AbsorptionParams(0.0, 2.0, 1)
    errors = []
    for level in range(3):
        grid = RadialGrid(2.0, 20 * 2**level + 1)
        mesh = TimeMesh(0.0, 1.0, 10 * 2**level, 2.0)
        sol = solve(p, grid, mesh, BallIndicator(2.0, 1.0), boundary=Boundary("neumann"))
        exact = absorption_flow(p, 1.0, 0.0, 1.0)
        errors.append(float(np.max(np.abs(sol.snapshots[-1] / exact - 1.0))))
    exact_hit = max(errors) <= 1e-12
    orders = _orders(errors) if min(errors) > 0 else []
    res.add("flat exact solution", exact_hit or (orders and min(orders) >= 1.8), errors,
            "order >= 1.8, or exact to roundoff")
    if exact_hit:
        res.notes.append("the split step reproduces flat states exactly; errors are roundoff at every level")


# ---------------------------------------------------------------- registry

SUITES = {
    "flat-exact": (1, suite_flat_exact),
    "plateau-law": (2, suite_plateau_law),
    "universal-bound": (3, suite_universal_bound),
    "profile-cross": (4, suite_profile_cross),
    "asymptotics": (5, suite_asymptotics),
    "origin-constant": (6, suite_origin_constant),
    "kernel-dichotomy": (7, suite_kernel_dichotomy),
    "strong-singularity": (8, suite_strong_singularity),
    "weak-singularity": (9, suite_weak_singularity),
    "removability": (10, suite_removability),
    "barrier-sandwich": (11, suite_barrier_sandwich),
    "similarity": (12, suite_similarity),
    "trace-roundtrip": (13, suite_trace_roundtrip),
    "comparison": (14, suite_comparison),
    "scheme-order": (15, suite_scheme_order),
}


def run_suite(name: str) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    criterion, fn = SUITES[name]
    res = SuiteResult(name, criterion)
    start = time.perf_counter()
    fn(res)
    res.seconds = time.perf_counter() - start
    return res

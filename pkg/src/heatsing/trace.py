"""Initial-trace measurements on computed radial solutions.

A probe is a radial shell {r : |r - center| < eps} (a ball when
``center = 0``). Its moment is the integral of u over the shell in R^N.
Numerics cannot certify an infinite limit, so singular verdicts are trend
statements: the moment keeps growing by a fixed factor per schedule stage.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from .model import AbsorptionParams, heat_kernel, sphere_area
from .parabolic import (
    DiracApprox,
    RadialGrid,
    RadialSolution,
    TimeMesh,
    dirac_saturate,
    saturation_schedule,
    solve,
)
from .profiles import Profile, eval_vss


class SamplingError(ValueError):
    pass


class WindowError(ValueError):
    pass


@dataclass
class MomentTrajectory:
    center: float
    eps: float
    samples: list  # (t, moment), t decreasing

    def __post_init__(self):
        ts = [t for t, _ in self.samples]
        if any(b >= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample times must be strictly decreasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])

    @property
    def moments(self) -> np.ndarray:
        return np.array([m for _, m in self.samples])

    def extrapolate(self) -> float:
        """Limit t -> 0 by linear Richardson on the two smallest times."""
        (t1, m1), (t2, m2) = self.samples[-1], self.samples[-2]
        if t1 == 0:
            return m1
        return m1 + (m1 - m2) * t1 / (t2 - t1)

    def to_csv(self) -> str:
        return "t,moment\n" + "".join(f"{t:.17g},{m:.17g}\n" for t, m in self.samples)


def shell_integral(r: np.ndarray, u: np.ndarray, lo: float, hi: float, dim: int) -> float:
    """omega_{N-1} * integral of u r^(N-1) over [lo, hi] by the trapezoid rule."""
    inner = r[(r > lo) & (r < hi)]
    pts = np.concatenate(([lo], inner, [hi]))
    vals = np.interp(pts, r, u)
    return float(sphere_area(dim) * trapezoid(vals * pts ** (dim - 1), pts))


def moment_trajectory(
    solution: RadialSolution,
    eps: float,
    t_samples: Sequence[float],
    center: float = 0.0,
) -> MomentTrajectory:
    if eps <= 0:
        raise ValueError("eps must be positive")
    lo, hi = max(0.0, center - eps), center + eps
    if hi > solution.grid.r_max:
        raise SamplingError("probe shell leaves the grid")
    t_samples = sorted((float(t) for t in t_samples), reverse=True)
    out = []
    for t in t_samples:
        if not solution.times[0] * (1 - 1e-12) <= t <= solution.times[-1] * (1 + 1e-12):
            raise SamplingError(f"t = {t} outside the recorded range [{solution.times[0]}, {solution.times[-1]}]")
        u = solution.value(solution.r, t)
        out.append((t, shell_integral(solution.r, u, lo, hi, solution.params.dim)))
    return MomentTrajectory(center, eps, out)


@dataclass
class TraceReport:
    singular_set: list  # (r_lo, r_hi) shells
    regular_density: list  # per regular probe: center, eps, mass, density
    verdicts: list
    plateau_fit: dict | None = None

    def counts(self) -> dict:
        out = {}
        for v in self.verdicts:
            out[v["verdict"]] = out.get(v["verdict"], 0) + 1
        return out

    def as_dict(self) -> dict:
        return {
            "schema": "heatsing.trace/1",
            "singular_set": self.singular_set,
            "regular_density": self.regular_density,
            "verdicts": self.verdicts,
            "plateau_fit": self.plateau_fit,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1)


def classify_and_extract(
    solutions: Sequence[RadialSolution],
    probes: Sequence[tuple],
    t_eval: float | None = None,
    growth_threshold: float = 0.5,
    monotone_tol: float = 1e-9,
) -> TraceReport:
    """Classify probes (center, eps) along a schedule of runs.

    The moment at ``t_eval`` (default: the smallest positive time recorded
    by every run) is compared across stages. Singular: every stage grows by
    at least ``growth_threshold``. Regular: otherwise, with mu(probe) the
    t -> 0 extrapolation of the last run's moments at its two smallest
    positive times. A schedule whose moments decrease is inconclusive.
    """
    if len(solutions) < 3:
        raise ValueError("classification needs a schedule of at least 3 runs")
    if t_eval is None:
        firsts = []
        for s in solutions:
            pos = s.times[s.times > 0]
            if not pos.size:
                raise SamplingError("a run has no snapshot at positive time")
            firsts.append(pos[0])
        t_eval = max(firsts)
    last = solutions[-1]
    pos_times = last.times[last.times > 0]
    verdicts, singular, regular = [], [], []
    dim = last.params.dim
    for center, eps in probes:
        seq = [moment_trajectory(s, eps, [t_eval], center).moments[0] for s in solutions]
        growth = [b / a - 1.0 if a > 0 else (math.inf if b > 0 else 0.0) for a, b in zip(seq, seq[1:])]
        entry = {"center": center, "eps": eps, "moments": seq, "growth": growth}
        if any(b < a * (1 - monotone_tol) for a, b in zip(seq, seq[1:])):
            entry["verdict"] = "inconclusive"
        elif all(g >= growth_threshold for g in growth):
            entry["verdict"] = "singular"
            singular.append((max(0.0, center - eps), center + eps))
        else:
            entry["verdict"] = "regular"
            traj = moment_trajectory(last, eps, pos_times[:2], center)
            mass = max(traj.extrapolate(), 0.0)
            lo, hi = max(0.0, center - eps), center + eps
            volume = sphere_area(dim) * (hi**dim - lo**dim) / dim
            entry["limit"] = mass
            regular.append({"center": center, "eps": eps, "mass": mass, "density": mass / volume})
        verdicts.append(entry)
    return TraceReport(singular, regular, verdicts)


def plateau_check(
    solution: RadialSolution,
    probe_radius: float,
    t_window: tuple,
    plateau_radius: float,
) -> dict:
    """Limit of t^beta u(probe, t) over a window of recorded times.

    The value is the intercept of a least-squares line in t through
    t^beta u at the recorded times inside the window (one time: the value
    itself).
    """
    t_lo, t_hi = t_window
    if probe_radius + 2.0 * math.sqrt(t_hi) > plateau_radius and probe_radius < plateau_radius:
        raise WindowError("window reaches the boundary-influence region of the plateau")
    ts = solution.times[(solution.times >= t_lo * (1 - 1e-12)) & (solution.times <= t_hi * (1 + 1e-12))]
    ts = ts[ts > 0]
    if not ts.size:
        raise WindowError("no recorded times in the window")
    beta = solution.params.beta
    g = np.array([t**beta * float(solution.value(probe_radius, t)) for t in ts])
    if ts.size == 1:
        value = float(g[0])
    else:
        slope, value = np.polyfit(ts, g, 1)
        value = float(value)
    return {"value": value, "window": [float(t_lo), float(t_hi)], "times": ts.tolist(), "scaled": g.tolist()}


def lower_bound_check(
    solution: RadialSolution,
    saturated: RadialSolution,
    slack: float = 0.05,
    floor: float = 1e-200,
) -> dict:
    """Pointwise u >= (1 - slack) u_sat at common snapshot times."""
    if not np.allclose(solution.r, saturated.r):
        raise ValueError("runs must share the grid")
    rows = []
    ok = True
    for t, us in zip(saturated.times, saturated.snapshots):
        try:
            u = solution.at(t)
        except KeyError:
            continue
        live = us > floor
        ratio = float(np.min(u[live] / us[live])) if np.any(live) else 1.0
        viol = int(np.count_nonzero(u[live] < (1 - slack) * us[live]))
        rows.append({"t": float(t), "min_ratio": ratio, "violations": viol})
        ok &= viol == 0
    if not rows:
        raise ValueError("no common snapshot times")
    return {"passed": ok, "slack": slack, "rows": rows}


def harnack_fit(
    solution: RadialSolution,
    r_region: tuple,
    t_region: tuple,
    n_pairs: int = 2000,
    seed: int = 0,
    floor: float = 1e-250,
) -> dict:
    """Smallest C with log u(y,s) - log u(x,t) <= C(|x-y|^2/(t-s) + t/s + 1).

    Points are nodes on one ray times recorded snapshots inside the region,
    pairs drawn with s < t. C is reported on the full sample and on two
    disjoint halves; the halves measure stability.
    """
    rng = np.random.default_rng(seed)
    r = solution.r
    ri = np.flatnonzero((r >= r_region[0]) & (r <= r_region[1]))
    ti = np.flatnonzero((solution.times >= t_region[0]) & (solution.times <= t_region[1]) & (solution.times > 0))
    if ri.size < 2 or ti.size < 2:
        raise ValueError("region holds too few nodes or snapshots")
    a = rng.integers(0, ti.size, size=(n_pairs, 2))
    keep = a[:, 0] != a[:, 1]
    a = np.sort(a[keep], axis=1)  # column 0 is s, column 1 is t
    m = a.shape[0]
    xs = ri[rng.integers(0, ri.size, size=m)]
    ys = ri[rng.integers(0, ri.size, size=m)]
    s = solution.times[ti[a[:, 0]]]
    t = solution.times[ti[a[:, 1]]]
    us = solution.snapshots[ti[a[:, 0]], ys]
    ut = solution.snapshots[ti[a[:, 1]], xs]
    valid = (us > floor) & (ut > floor)
    excluded = int(np.count_nonzero(~valid))
    lhs = np.log(us[valid]) - np.log(ut[valid])
    rhs = (r[xs[valid]] - r[ys[valid]]) ** 2 / (t[valid] - s[valid]) + t[valid] / s[valid] + 1.0
    ratios = lhs / rhs
    half = ratios.size // 2
    fit = lambda v: float(max(0.0, np.max(v))) if v.size else 0.0
    c_all, c1, c2 = fit(ratios), fit(ratios[:half]), fit(ratios[half:])
    spread = abs(c1 - c2) / max(c1, c2) if max(c1, c2) > 0 else 0.0
    return {
        "C": c_all,
        "C_halves": [c1, c2],
        "relative_spread": spread,
        "finite": bool(np.isfinite(c_all)),
        "pairs": int(ratios.size),
        "excluded": excluded,
    }


def classification_experiment(
    params: AbsorptionParams,
    k_values: Sequence,
    profile_V: Profile | None = None,
    T: float = 0.25,
    probe_times: Sequence[float] = (1e-2, 1e-3, 1e-4),
    lambdas: Sequence[float] = (0.0, 1.0, 2.0),
    t0: float = 1e-7,
    grid: RadialGrid | None = None,
    steps: int = 1500,
    tol: float = 0.1,
    saturation_stages: int = 10,
) -> list:
    """Weak/strong verdicts along parabolic paths |x| = lambda sqrt(t).

    Finite k: ratio u/(kE) at the deepest probe time; ``k = inf``: the
    saturated limit and ratio u/v_alpha. A verdict is "weak" or "strong"
    when the matching ratio is within ``tol`` of 1 at every lambda, else
    "undetermined".
    """
    if not params.subcritical:
        raise ValueError("the experiment needs q < q_crit")
    if grid is None:
        grid = RadialGrid(max(6.0, 12.0 * math.sqrt(T)), 1200, stretch=6.0)
    probe_times = sorted(float(t) for t in probe_times)
    out = []
    for k in k_values:
        k = float(k)
        usable = [t for t in probe_times if t > t0 and max(lambdas) * math.sqrt(t) <= grid.r_max]
        entry = {"k": k, "truncated": len(usable) < len(probe_times)}
        if k == 0:
            entry.update({"verdict": "weak", "ratios": {}, "note": "zero solution"})
            out.append(entry)
            continue
        if math.isinf(k):
            if profile_V is None:
                raise ValueError("the saturated run needs a V profile")
            t00 = min(1e-2, 0.5 * usable[0])
            ks, t0s = saturation_schedule(10.0 / math.sqrt(t00), t00, saturation_stages)
            sol, table = dirac_saturate(params, grid, T, ks, t0s, probe_times=usable, steps=steps)
            ref = lambda x, t: eval_vss(profile_V, x, t)
            kind = "strong"
            entry["saturated"] = sol.diagnostics["saturated"]
        else:
            mesh = TimeMesh(t0, T, steps, 3.0)
            sol = solve(params, grid, mesh, DiracApprox(k, t0, clip_to_flat=False), record=usable, theta=1.0)
            ref = lambda x, t, k=k: k * heat_kernel(x, t, params.dim)
            kind = "weak"
        ratios = {}
        for lam in lambdas:
            ratios[str(lam)] = [float(sol.value(lam * math.sqrt(t), t) / ref(lam * math.sqrt(t), t)) for t in usable]
        deepest = [v[0] for v in ratios.values()]
        entry["ratios"] = ratios
        entry["probe_times"] = usable
        entry["verdict"] = kind if all(abs(d - 1.0) <= tol for d in deepest) else "undetermined"
        out.append(entry)
    return out

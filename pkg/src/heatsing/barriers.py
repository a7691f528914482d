"""General absorption h(u): Keller-Osserman test, time barrier psi, elliptic large solutions."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .model import AbsorptionParams
from .profiles import Profile, SolverError, damped_newton


class AnchorError(ValueError):
    pass


class ConditionError(ValueError):
    """The tail integral needed by the barrier construction diverges."""


@dataclass
class AbsorptionProfile:
    """Nondecreasing absorption h given as a power s^q, a callable, or a table.

    Tables are extended beyond the last sample by a power law fitted on the
    last decade of samples; ``extrapolated`` records that this happened.
    """

    power: float | None = None
    func: Callable | None = None
    s_table: np.ndarray | None = None
    h_table: np.ndarray | None = None
    anchor: float = 0.0
    extrapolated: bool = field(default=False, init=False)

    def __post_init__(self):
        given = sum(x is not None for x in (self.power, self.func, self.s_table))
        if given != 1:
            raise ValueError("give exactly one of power, func or (s_table, h_table)")
        if self.anchor < 0:
            raise ValueError("anchor must be >= 0")
        if self.power is not None and self.power <= 0:
            raise ValueError("power must be positive")
        if self.s_table is not None:
            s = np.asarray(self.s_table, dtype=float)
            h = np.asarray(self.h_table, dtype=float)
            if s.shape != h.shape or s.size < 4:
                raise ValueError("tables need equal length >= 4")
            if np.any(np.diff(s) <= 0) or np.any(np.diff(h) < 0) or h[0] < 0:
                raise ValueError("table must have increasing s and nondecreasing h >= 0")
            self.s_table, self.h_table = s, h
            top = s[-1]
            sel = s >= top / 10.0
            if np.count_nonzero(sel) < 2 or np.any(h[sel] <= 0):
                sel = slice(-2, None)
            slope = np.polyfit(np.log(s[sel]), np.log(h[sel]), 1)[0]
            self._tail_exp = float(slope)

    @classmethod
    def power_law(cls, q: float, anchor: float = 0.0) -> "AbsorptionProfile":
        return cls(power=q, anchor=anchor)

    @property
    def is_power(self) -> bool:
        return self.power is not None

    def h(self, s):
        s = np.asarray(s, dtype=float)
        if self.power is not None:
            return s**self.power
        if self.func is not None:
            return np.asarray(self.func(s), dtype=float)
        top = self.s_table[-1]
        inside = np.interp(s, self.s_table, self.h_table)
        if np.any(s > top):
            self.extrapolated = True
        return np.where(s > top, self.h_table[-1] * (np.maximum(s, top) / top) ** self._tail_exp, inside)

    def H(self, s: float) -> float:
        """Primitive of h from 0."""
        if self.power is not None:
            return s ** (self.power + 1.0) / (self.power + 1.0)
        if s <= 0:
            return 0.0
        # split at powers of two so quad sees smooth pieces
        edges = [0.0] + [2.0**k for k in range(-40, int(math.ceil(math.log2(s))) + 1) if 2.0**k < s] + [s]
        with warnings.catch_warnings():
            # tables are piecewise linear; the kinks only cost quad some accuracy bookkeeping
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            return float(
                sum(integrate.quad(lambda x: float(self.h(x)), a, b, limit=200)[0] for a, b in zip(edges, edges[1:]))
            )

    def as_dict(self) -> dict:
        if self.power is not None:
            return {"kind": "power", "q": self.power, "anchor": self.anchor}
        if self.func is not None:
            return {"kind": "callable", "name": getattr(self.func, "__name__", "h"), "anchor": self.anchor}
        return {"kind": "table", "n": int(self.s_table.size), "anchor": self.anchor, "extrapolated": self.extrapolated}


@dataclass
class KOResult:
    verdict: str  # holds | fails | inconclusive
    tail_estimate: float
    increments: list
    ratios: list
    closed_form: bool = False

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "tail_estimate": self.tail_estimate,
            "increments": self.increments,
            "ratios": self.ratios,
            "closed_form": self.closed_form,
        }


def _doubling_increments(f, start, levels):
    """Integrals of f over [start 2^j, start 2^(j+1)], computed in log s."""
    out = []
    for j in range(levels):
        a = start * 2.0**j
        val, _ = integrate.quad(lambda x: f(math.exp(x)) * math.exp(x), math.log(a), math.log(2 * a), epsrel=1e-12)
        out.append(val)
    return out


def _tail_verdict(inc, holds_ratio=0.95, fails_ratio=0.99, window=5):
    ratios = [b / a for a, b in zip(inc, inc[1:])]
    last = ratios[-window:]
    if max(last) <= holds_ratio:
        rho = last[-1]
        return "holds", inc[-1] * rho / (1 - rho), ratios
    if min(last) >= fails_ratio:
        return "fails", math.inf, ratios
    return "inconclusive", math.nan, ratios


def keller_osserman(
    profile: AbsorptionProfile,
    s_max: float = 2.0**200,
    levels: int | None = None,
    numeric: bool = False,
) -> KOResult:
    """Decide whether the integral of H(s)^(-1/2) over (a, inf) is finite.

    Power profiles are decided in closed form (holds iff q > 1) unless
    ``numeric`` is set. Otherwise the integral is split on doubling
    intervals up to ``s_max``; geometric decay of the increments (ratios
    <= 0.95) means holds, ratios >= 0.99 means fails, anything else is
    inconclusive.
    """
    a = profile.anchor
    start = max(a, 1.0)
    if profile.H(start) <= 0 and profile.H(s_max) <= 0:
        raise AnchorError("H vanishes on the whole range")
    while profile.H(start) <= 0:
        start *= 2.0
    if profile.is_power and not numeric:
        q = profile.power
        if q > 1:
            # integral of sqrt(q+1) s^(-(q+1)/2) from s_max to infinity
            tail = math.sqrt(q + 1.0) * 2.0 / (q - 1.0) * s_max ** ((1.0 - q) / 2.0)
            return KOResult("holds", tail, [], [], closed_form=True)
        return KOResult("fails", math.inf, [], [], closed_form=True)
    if levels is None:
        levels = max(8, int(math.log2(s_max / start)))
    if profile.is_power:
        q = profile.power
        f = lambda s: math.sqrt(q + 1.0) * s ** (-(q + 1.0) / 2.0)
        inc = _doubling_increments(f, start, levels)
    else:
        inc = _ko_increments_ode(profile, start, levels)
    verdict, tail, ratios = _tail_verdict(inc)
    return KOResult(verdict, tail, inc, ratios)


def _ko_increments_ode(profile, start, levels):
    """Increments of the KO integral; H is carried as an ODE in y = log s."""

    def rhs(y, z):
        s = math.exp(y)
        return [s * float(profile.h(s))]

    y0 = math.log(start)
    y1 = y0 + math.log(2.0) * levels
    sol = integrate.solve_ivp(
        rhs, (y0, y1), [profile.H(start)], method="DOP853", rtol=1e-12, atol=1e-300, dense_output=True
    )
    if not sol.success:
        raise SolverError(f"KO integration failed: {sol.message}")
    f = lambda y: math.exp(y) / math.sqrt(max(float(sol.sol(y)[0]), 1e-300))
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for j in range(levels):
            a = y0 + j * math.log(2.0)
            out.append(integrate.quad(f, a, a + math.log(2.0), epsrel=1e-12, epsabs=0.0, limit=200)[0])
    return out


_Y_TOP = 690.0


def _tail_of_inverse(profile, x):
    """Integral of 1/h from x to infinity, in log s, with a power-law tail beyond e^690."""
    f = lambda y: math.exp(y) / float(profile.h(math.exp(y)))
    top = _Y_TOP
    with np.errstate(over="ignore"):
        while not (np.isfinite(float(profile.h(math.exp(top)))) and np.isfinite(float(profile.h(math.exp(top + 1.0))))):
            top -= 10.0
    y = math.log(x)
    if y >= top:
        raise ConditionError("psi beyond the representable range")
    val, _ = integrate.quad(f, y, top, epsrel=1e-13, epsabs=0.0, limit=400)
    # local exponent of h at the top, then the exact power-law remainder
    p = math.log(float(profile.h(math.exp(top)))) - math.log(float(profile.h(math.exp(top - 1.0))))
    if p <= 1.0:
        raise ConditionError("integral of 1/h over the tail does not converge")
    return val + f(top) / (p - 1.0)


def psi_inverse(profile: AbsorptionProfile, b: float, t: float, method: str = "auto") -> float:
    """psi(t) with integral of ds/h(s) over (psi, inf) equal to b t."""
    if b <= 0 or t <= 0:
        raise ValueError("b and t must be positive")
    if profile.is_power and method == "auto":
        q = profile.power
        if q <= 1:
            raise ConditionError("integral of 1/h diverges for q <= 1")
        return ((q - 1.0) * b * t) ** (-1.0 / (q - 1.0))
    # tail convergence check: doubling increments of s/h(s) must decay
    inc = _doubling_increments(lambda s: 1.0 / float(profile.h(s)), 1.0, 60)
    verdict, _, _ = _tail_verdict(inc)
    if verdict != "holds":
        raise ConditionError("integral of 1/h over the tail does not converge")
    target = b * t
    g = lambda y: _tail_of_inverse(profile, math.exp(y)) - target
    lo, hi = -1.0, 1.0
    while g(lo) < 0:
        lo -= 2.0
        if lo < -_Y_TOP:
            raise ConditionError("psi(t) below the representable range")
    while g(hi) > 0:
        hi += 2.0
        if hi >= _Y_TOP:
            raise ConditionError("psi(t) exceeds the representable range")
    y = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=1e-14, maxiter=400)
    return math.exp(y)


def superadditivity_spot_check(profile: AbsorptionProfile, n_pairs: int = 200, seed: int = 0) -> dict:
    """Diagnostic only: sample h(a + b) >= h(a) + h(b) on random pairs.

    Pairs are log-uniform over the table range (or [1e-3, 1e3] without a
    table). A violation is reported, never raised.
    """
    rng = np.random.default_rng(seed)
    if profile.s_table is not None:
        lo = max(float(profile.s_table[profile.s_table > 0][0]), 1e-12)
        hi = float(profile.s_table[-1]) / 2.0
    else:
        lo, hi = 1e-3, 1e3
    a = np.exp(rng.uniform(math.log(lo), math.log(hi), n_pairs))
    b = np.exp(rng.uniform(math.log(lo), math.log(hi), n_pairs))
    gap = profile.h(a + b) - profile.h(a) - profile.h(b)
    scale = np.maximum(np.abs(profile.h(a + b)), 1e-300)
    rel = gap / scale
    bad = rel < -1e-12
    worst = int(np.argmin(rel))
    return {
        "pairs": n_pairs,
        "violations": int(np.count_nonzero(bad)),
        "worst_relative_gap": float(rel[worst]),
        "worst_pair": [float(a[worst]), float(b[worst])],
    }


def _boundary_clustered_nodes(R, n, stretch):
    xi = np.linspace(0.0, 1.0, n)
    return R * (1.0 - np.sinh(stretch * (1.0 - xi)) / math.sinh(stretch))


def elliptic_large_solution(
    q: float,
    tau_weight: float,
    R: float = 1.0,
    N: int = 1,
    n: int = 2001,
    stretch: float = 12.0,
    tol: float = 1e-6,
    cap_max: float | None = None,
    probe_fraction: float = 0.5,
) -> Profile:
    """Radial large solution of -Lap Phi + w Phi^q = 0 in B_R, Phi = inf on the sphere.

    Phi(R) = k with k doubled from 1 (Newton, warm started) until the values
    on |x| <= probe_fraction R change by less than ``tol``. Nodes cluster
    at r = R through a sinh map. The default cap limit keeps the boundary
    layer (c/(w k))^((q-1)/2) above a tenth of the last cell.
    """
    if q <= 1:
        raise ValueError("q must be > 1")
    if tau_weight <= 0:
        raise ValueError("the weight must be positive")
    w = float(tau_weight)
    r = _boundary_clustered_nodes(R, n, stretch)
    mid = 0.5 * (r[1:] + r[:-1])
    cond = mid ** (N - 1) / np.diff(r)
    faces = np.concatenate(([0.0], mid, [r[-1]]))
    vol = (faces[1:] ** N - faces[:-1] ** N) / N
    kl = np.concatenate(([0.0], cond[:-1]))
    kr = cond
    V = vol[:-1]
    m = 2.0 / (q - 1.0)
    c_star = (2.0 * (q + 1.0) / (q - 1.0) ** 2) ** (1.0 / (q - 1.0))
    if cap_max is None:
        cap_max = c_star * w ** (-1.0 / (q - 1.0)) * (0.1 * (r[-1] - r[-2])) ** (-m)

    def make_residual(k):
        def residual(u):
            full = np.concatenate((u, [k]))
            flux_r = kr * (full[1:] - u)
            flux_l = np.concatenate(([0.0], flux_r[:-1]))
            F = -(flux_r - flux_l) / V + w * u**q
            di = (kl + kr) / V + q * w * u ** (q - 1.0)
            lo = -kl / V
            up = -kr / V
            return F, lo, di, up
        return residual

    probe = r[:-1] <= probe_fraction * R
    u = np.ones(n - 1)
    k = 1.0
    history = []
    prev = None
    iters = 0
    while True:
        # the diffusion term on the clustered cells is huge; scale by its size to stay above roundoff
        full = np.concatenate((u, [k]))
        scale = (kl + kr) / V * np.maximum(full[1:], u) + w * u**q + 1.0
        u, it, res = damped_newton(make_residual(k), u, tol=1e-10, scale=scale, max_iter=200)
        iters += it
        change = None if prev is None else float(np.max(np.abs(u[probe] / prev - 1.0)))
        history.append({"cap": k, "change": change, "newton_iterations": it})
        if change is not None and change < tol:
            break
        if 2 * k > cap_max:
            break
        prev = u[probe].copy()
        k *= 2.0
    values = np.concatenate((u, [k]))
    if np.any(values < 0):
        raise SolverError("negative large-solution iterate")
    params = AbsorptionParams(0.0, q, N)
    return Profile(
        params,
        "EllipticLarge",
        r,
        values,
        {
            "method": "cap doubling + damped Newton, boundary-clustered finite volumes",
            "iterations": iters,
            "residual": res,
            "cap": k,
            "converged": history[-1]["change"] is not None and history[-1]["change"] < tol,
            "weight": w,
            "R": R,
            "history": history,
        },
    )

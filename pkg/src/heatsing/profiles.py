"""Self-similar profiles and the space-time objects built from them.

Profiles solved here (beta = (1 + alpha)/(q - 1), p = 2 beta - N):

* W   1-D barrier profile, W'' + r/2 W' + beta W - W^q = 0 on (0, inf),
      singular at r = 0 and Gaussian at infinity.
* V   radial very singular profile,
      V'' + ((N-1)/r + r/2) V' + beta V - V^q = 0, V'(0) = 0, Gaussian decay.
* Z1, Z2  the algebraic and Gaussian branches of the linear 1-D equation
      z'' + r/2 z' + beta z = 0.

The nonlinear boundary value problems are solved for y = profile * exp(r^2/4),
which keeps relative accuracy deep into the Gaussian tail.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.linalg import solve_banded

from .model import AbsorptionParams

KINDS = ("W", "V", "Z1", "Z2", "EllipticLarge")


class SolverError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RegimeError(ValueError):
    """Parameters outside the regime where the requested object exists."""


class WindowError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


class AccuracyWarning(UserWarning):
    pass


@dataclass
class FitResult:
    exponent: float
    constant: float
    window: tuple
    residual: float
    model: str = "gaussian"

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = self.constant * r**self.exponent
        if self.model == "gaussian":
            out = out * np.exp(-(r**2) / 4.0)
        return out

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "constant": self.constant,
            "window": list(self.window),
            "residual": self.residual,
            "model": self.model,
        }


@dataclass
class Profile:
    params: AbsorptionParams
    kind: str
    nodes: np.ndarray
    values: np.ndarray
    solver_meta: dict = field(default_factory=dict)
    _tail: FitResult | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(np.diff(self.nodes) <= 0):
            raise InvariantError("profile nodes must be strictly increasing")

    @property
    def tail(self) -> FitResult:
        """Gaussian tail model fitted on the outer part of the grid."""
        if self._tail is None:
            self._tail = fit_asymptotics(self, default_tail_window(self))
        return self._tail

    def __call__(self, r):
        """Evaluate with log-linear interpolation; tail model beyond the grid."""
        r = np.abs(np.asarray(r, dtype=float))
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        lo, hi = self.nodes[0], self.nodes[-1]
        inside = (r >= lo) & (r <= hi)
        positive = self.values > 0
        if np.all(positive[:-1]):
            # log interpolation is exact for the power and Gaussian shapes involved
            last = len(self.values) - 1 if positive[-1] else len(self.values) - 2
            logv = np.log(self.values[: last + 1])
            xs = self.nodes[: last + 1]
            ri = r[inside]
            vals = np.exp(np.interp(ri, xs, logv))
            if last < len(self.values) - 1:
                beyond = ri > xs[-1]
                vals[beyond] = np.interp(ri[beyond], self.nodes, self.values)
            out[inside] = vals
        else:
            out[inside] = np.interp(r[inside], self.nodes, self.values)
        far = r > hi
        if np.any(far):
            out[far] = self.tail(r[far])
        near = r < lo
        if np.any(near):
            if self.kind == "W":
                out[near] = w_local_model(self.params, r[near])
            else:
                raise ValueError(f"radius below the profile grid start {lo}")
        return float(out[0]) if scalar else out

    def to_csv(self) -> str:
        lines = ["r,value"]
        lines += [f"{r:.17g},{v:.17g}" for r, v in zip(self.nodes, self.values)]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "heatsing.profile/1",
                "kind": self.kind,
                "params": self.params.as_dict(),
                "solver_meta": _jsonable(self.solver_meta),
                "r": self.nodes.tolist(),
                "value": self.values.tolist(),
            },
            indent=1,
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------- local models


def origin_constant(q: float) -> float:
    """Leading coefficient c of w = c r^(-2/(q-1)), the singular solution of w'' = w^q at r = 0.

    The 1/(q-1) power is required: substituting c r^-m gives c^(q-1) = m(m+1).
    """
    return (2.0 * (q + 1.0) / (q - 1.0) ** 2) ** (1.0 / (q - 1.0))


def w_local_model(params: AbsorptionParams, r):
    """Two-term expansion c r^-m (1 + a r^2) of W at the origin, m = 2/(q-1)."""
    m = 2.0 / (params.q - 1.0)
    a = (params.beta - m / 2.0) / (6.0 * m)
    r = np.asarray(r, dtype=float)
    return origin_constant(params.q) * r ** (-m) * (1.0 + a * r**2)


def gaussian_series(p: float, dim: int, r, terms: int = 30):
    """Asymptotic series r^p (1 + a1 r^-2 + ...) of the Gaussian-branch factor.

    The factor y = z exp(r^2/4) of the linear profile equation in ``dim``
    radial dimensions. Truncated at the smallest term.
    """
    r = np.asarray(r, dtype=float)
    total = np.ones_like(r)
    term = np.ones_like(r)
    prev = np.full_like(r, np.inf)
    done = np.zeros(r.shape, dtype=bool)
    for k in range(1, terms):
        coeff = -(p - 2 * k + 2) * (p - 2 * k + dim) / k
        term = term * coeff / r**2
        grow = np.abs(term) >= np.abs(prev)
        done |= grow
        total = np.where(done, total, total + term)
        prev = term
    return r**p * total


def algebraic_series(s: float, r, terms: int = 30):
    """Asymptotic series r^s (1 + b1 r^-2 + ...) of the algebraic 1-D branch."""
    r = np.asarray(r, dtype=float)
    total = np.ones_like(r)
    term = np.ones_like(r)
    prev = np.full_like(r, np.inf)
    done = np.zeros(r.shape, dtype=bool)
    for k in range(1, terms):
        coeff = (s - 2 * k + 2) * (s - 2 * k + 1) / k
        term = term * coeff / r**2
        grow = np.abs(term) >= np.abs(prev)
        done |= grow
        total = np.where(done, total, total + term)
        prev = term
    return r**s * total


def _central_derivative(f, h):
    """Sixth-order central difference of samples f; drops three nodes per side."""
    return (-f[:-6] + 9 * f[1:-5] - 45 * f[2:-4] + 45 * f[4:-2] - 9 * f[5:-1] + f[6:]) / (60.0 * h)


def _series_derivative(series, r, eps=1e-6):
    return (series(r * (1 + eps)) - series(r * (1 - eps))) / (2 * r * eps)


# ---------------------------------------------------------------- Newton on tridiagonal systems


def damped_newton(residual, y0, max_iter=100, tol=1e-11, lower=0.0, scale=None):
    """Damped Newton for F(y) = 0 with tridiagonal Jacobian.

    ``residual(y)`` returns (F, lo, diag, up) with lo[i] = dF_i/dy_{i-1},
    up[i] = dF_i/dy_{i+1}. Steps are halved until the scaled max-norm of F
    decreases; iterates are kept >= ``lower``.
    """
    y = np.array(y0, dtype=float)
    sc = np.ones_like(y) if scale is None else scale
    F, lo, di, up = residual(y)
    norm = np.max(np.abs(F / sc))
    for it in range(1, max_iter + 1):
        ab = np.zeros((3, len(y)))
        ab[0, 1:] = up[:-1]
        ab[1] = di
        ab[2, :-1] = lo[1:]
        dy = solve_banded((1, 1), ab, -F)
        lam = 1.0
        while True:
            trial = np.maximum(y + lam * dy, lower)
            Ft, lot, dit, upt = residual(trial)
            nt = np.max(np.abs(Ft / sc))
            if nt < norm or lam < 1e-6:
                break
            lam *= 0.5
        y, F, lo, di, up, norm = trial, Ft, lot, dit, upt, nt
        if norm < tol:
            return y, it, norm
        if lam < 1e-6:
            if norm < 1e3 * tol:
                # stalled at roundoff just above the target
                return y, it, norm
            break
    raise SolverError(f"Newton did not converge (scaled residual {norm:.3e})", residual=norm)


# ---------------------------------------------------------------- W: the 1-D barrier profile


def _geometric_nodes(r_min, r_max, ratio):
    n = int(math.ceil(math.log(r_max / r_min) / math.log(ratio))) + 1
    return r_max * ratio ** (-np.arange(n - 1, -1, -1, dtype=float))


def _w_system(params, r, y_left):
    """Finite-volume residual of the y-form W equation on nodes r (Dirichlet ends)."""
    beta, q = params.beta, params.q
    rho = lambda s: np.exp(-(s**2) / 4.0)
    mid = 0.5 * (r[1:] + r[:-1])
    kappa = rho(mid) / np.diff(r)
    mass = rho(r[1:-1]) * 0.5 * (r[2:] - r[:-2])
    g = np.exp(-(q - 1.0) * r[1:-1] ** 2 / 4.0)
    kl, kr = kappa[:-1], kappa[1:]

    def residual(y_in):
        y = np.concatenate(([y_left], y_in, [0.0]))
        yi = y[1:-1]
        lap = (kr * (y[2:] - yi) - kl * (yi - y[:-2])) / mass
        F = lap + (beta - 0.5) * yi - g * yi**q
        di = -(kl + kr) / mass + (beta - 0.5) - q * g * yi ** (q - 1.0)
        lo = kl / mass
        up = kr / mass
        return F, lo, di, up

    return residual


def _solve_w_fixed(params, r, y_left, y_guess, tol):
    residual = _w_system(params, r, y_left)
    scale = np.maximum(np.exp(-(params.q - 1.0) * r[1:-1] ** 2 / 4.0) * y_guess**params.q, 1.0)
    y, iters, res = damped_newton(residual, y_guess, tol=tol, scale=scale)
    return y, iters, res


def solve_W(
    params: AbsorptionParams,
    r_max: float = 12.0,
    n_nodes: int = 2000,
    r_min: float = 1e-3,
    boundary: str = "model",
    probes=(0.5, 1.0, 2.0, 4.0),
    tol: float = 1e-6,
    r_min_floor: float = 1e-5,
    cap_max: float | None = None,
) -> Profile:
    """Barrier profile W from the two-point problem on (r_min, r_max).

    ``boundary="model"``: W(r_min) is the two-term singular local model and
    r_min is halved until the probe values change by less than ``tol``.
    ``boundary="cap"``: W(r_min) = k with k doubled until probes settle,
    the capped construction without the local model.
    Caps stop at ``cap_max``, by default the value at which the boundary
    layer (c/k)^(1/m) shrinks to a tenth of the first cell.
    The node spacing is geometric with ratio fixed by ``n_nodes`` on
    [r_min, r_max]; refinement keeps existing nodes.
    """
    if boundary not in ("model", "cap"):
        raise ValueError("boundary must be 'model' or 'cap'")
    ratio = (r_max / r_min) ** (1.0 / (n_nodes - 1))
    probes = np.asarray(probes, dtype=float)
    history = []
    total_iters = 0

    def guess(r):
        # singular head c r^-m, y-tail r^p; the constant is left to Newton
        m = 2.0 / (params.q - 1.0)
        p = 2.0 * params.beta - 1.0
        y = origin_constant(params.q) * r ** (-m) * (1.0 + r**2) ** ((m + p) / 2.0)
        return y * (1.0 - r / r_max)

    if boundary == "model":
        current_rmin = r_min
        prev_probe = None
        y_prev = None
        r_prev = None
        while True:
            r = _geometric_nodes(current_rmin, r_max, ratio)
            y_left = w_local_model(params, r[0]) * math.exp(r[0] ** 2 / 4.0)
            if y_prev is None:
                y0 = guess(r[1:-1])
            else:
                y0 = np.interp(np.log(r[1:-1]), np.log(r_prev[1:-1]), np.log(np.maximum(y_prev, 1e-300)))
                y0 = np.exp(y0)
                head = r[1:-1] < r_prev[1]
                y0[head] = w_local_model(params, r[1:-1][head]) * np.exp(r[1:-1][head] ** 2 / 4.0)
            y, iters, res = _solve_w_fixed(params, r, y_left, y0, tol=1e-10)
            total_iters += iters
            values = np.concatenate(([y_left], y, [0.0])) * np.exp(-(r**2) / 4.0)
            probe_vals = np.exp(np.interp(np.log(probes), np.log(r), np.log(np.maximum(values, 1e-300))))
            change = None if prev_probe is None else float(np.max(np.abs(probe_vals / prev_probe - 1.0)))
            history.append({"r_min": float(r[0]), "change": change, "newton_iterations": iters})
            if change is not None and change < tol:
                break
            if current_rmin / 2.0 < r_min_floor:
                warnings.warn("W: r_min floor reached before probe convergence", AccuracyWarning)
                break
            prev_probe, y_prev, r_prev = probe_vals, y, r
            current_rmin /= 2.0
        cap = float(values[0])
    else:
        r = _geometric_nodes(r_min, r_max, ratio)
        k = float(w_local_model(params, r[0])) / 64.0
        if cap_max is None:
            cap_max = origin_constant(params.q) * (0.1 * (r[1] - r[0])) ** (-2.0 / (params.q - 1.0))
        y0 = None
        prev_probe = None
        while True:
            y_left = k * math.exp(r[0] ** 2 / 4.0)
            if y0 is None:
                base = guess(r[1:-1])
                y0 = np.minimum(base, y_left)
            y, iters, res = _solve_w_fixed(params, r, y_left, y0, tol=1e-10)
            total_iters += iters
            values = np.concatenate(([y_left], y, [0.0])) * np.exp(-(r**2) / 4.0)
            probe_vals = np.exp(np.interp(np.log(probes), np.log(r), np.log(np.maximum(values, 1e-300))))
            change = None if prev_probe is None else float(np.max(np.abs(probe_vals / prev_probe - 1.0)))
            history.append({"cap": k, "change": change, "newton_iterations": iters})
            if change is not None and change < tol:
                break
            if 2.0 * k > cap_max:
                warnings.warn("W: cap limit reached before probe convergence", AccuracyWarning)
                break
            prev_probe, y0 = probe_vals, y
            k *= 2.0
        cap = k

    prof = Profile(
        params,
        "W",
        r,
        values,
        {
            "method": f"finite-volume Newton, {boundary} boundary",
            "iterations": total_iters,
            "residual": _w_residual(params, r, values),
            "cap": cap,
            "r_min": float(r[0]),
            "history": history,
        },
    )
    if np.any(np.diff(values) >= 0):
        raise InvariantError("W profile is not strictly decreasing")
    return prof


def _w_residual(params, r, values):
    """Max of the scaled y-form residual at interior nodes."""
    y = values * np.exp(r**2 / 4.0)
    F, *_ = _w_system(params, r, y[0])(y[1:-1])
    g = np.exp(-(params.q - 1.0) * r[1:-1] ** 2 / 4.0)
    return float(np.max(np.abs(F) / np.maximum(g * y[1:-1] ** params.q + abs(params.beta) * y[1:-1], 1.0)))


def singular_origin_constant(profile_W: Profile) -> float:
    """Limit of r^(2/(q-1)) W(r) as r -> 0, Richardson on the three smallest interior nodes."""
    if profile_W.kind != "W":
        raise ValueError("needs a W profile")
    m = 2.0 / (profile_W.params.q - 1.0)
    r = profile_W.nodes[1:4]
    g = r**m * profile_W.values[1:4]
    # g = c + a r^2 + b r^4 through three points
    A = np.vstack([np.ones(3), r**2, r**4]).T
    c = float(np.linalg.solve(A, g)[0])
    d = np.diff(g)
    if not (np.all(d >= 0) or np.all(d <= 0)):
        warnings.warn("origin extrapolation sequence is not monotone", AccuracyWarning)
    return c


def eval_barrier(profile_W: Profile, R: float, x_radius, t) -> np.ndarray:
    """t^-beta W((R - |x|)/sqrt(t)) for |x| < R."""
    x = np.abs(np.asarray(x_radius, dtype=float))
    t = np.asarray(t, dtype=float)
    if np.any(x >= R):
        raise ValueError("barrier is only defined inside the ball")
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    beta = profile_W.params.beta
    return t ** (-beta) * profile_W((R - x) / np.sqrt(t))


# ---------------------------------------------------------------- V: very singular profile


def _require_subcritical(params):
    if not params.subcritical:
        raise RegimeError(
            f"q = {params.q} >= q_crit = {params.q_crit:.6g}: no very singular solution exists"
        )


def _v_rhs(params):
    N, beta, q = params.dim, params.beta, params.q

    def rhs(r, s):
        v, dv = s
        vq = abs(v) ** q * (1.0 if v >= 0 else -1.0)
        return [dv, -((N - 1) / r + r / 2.0) * dv - beta * v + vq]

    return rhs


def _shoot(params, v0, r_end, r_eval=None):
    """Integrate the radial V equation from the regularized origin."""
    N, beta, q = params.dim, params.beta, params.q
    r0 = 1e-6
    c2 = (v0**q - beta * v0) / (2.0 * N)
    start = [v0 + c2 * r0**2, 2.0 * c2 * r0]

    def neg(r, s):
        return s[0]

    neg.terminal = True
    neg.direction = -1

    def blow(r, s):
        return s[0] - 1e6 * (1.0 + v0)

    blow.terminal = True
    sol = integrate.solve_ivp(
        _v_rhs(params), (r0, r_end), start, method="DOP853", rtol=1e-13, atol=1e-300,
        events=(neg, blow), dense_output=r_eval is not None,
    )
    if sol.t_events[0].size:
        return "neg", sol
    return "pos", sol


def solve_V_shooting(
    params: AbsorptionParams,
    r_max: float = 12.0,
    n_nodes: int = 2401,
    bracket=(1e-6, 1e6),
    rel_tol: float = 1e-12,
    agree_tol: float = 1e-7,
) -> Profile:
    """V by bisection on V(0).

    Seeds on one side of V(0) eventually cross zero; seeds on the other
    side never do (they blow up or fall onto the algebraic branch). The
    profile is the mean of the two final bracketing trajectories wherever
    they agree to ``agree_tol``; further out the Gaussian tail expansion is
    attached, matched in value.
    """
    _require_subcritical(params)
    r_end = max(3.0 * r_max, 40.0)
    lo, hi = bracket
    side_lo, _ = _shoot(params, lo, r_end)
    side_hi, _ = _shoot(params, hi, r_end)
    if side_lo == side_hi:
        raise SolverError(f"no sign change of the shooting outcome on [{lo:g}, {hi:g}]")
    it = 0
    while hi / lo - 1.0 > rel_tol:
        mid = math.sqrt(lo * hi) if hi / lo > 1.01 else 0.5 * (lo + hi)
        side, _ = _shoot(params, mid, r_end)
        if side == side_lo:
            lo = mid
        else:
            hi = mid
        it += 1
        if it > 400:
            raise SolverError("bisection did not terminate")
    r = np.linspace(0.0, r_max, n_nodes)
    _, s_lo = _shoot(params, lo, r_end, r_eval=r)
    _, s_hi = _shoot(params, hi, r_end, r_eval=r)
    rr = np.maximum(r, 1e-6)
    lim_lo = s_lo.t[-1]
    lim_hi = s_hi.t[-1]
    valid = (rr <= lim_lo) & (rr <= lim_hi)
    a = np.where(valid, s_lo.sol(np.minimum(rr, lim_lo))[0], np.nan)
    b = np.where(valid, s_hi.sol(np.minimum(rr, lim_hi))[0], np.nan)
    da = np.where(valid, s_lo.sol(np.minimum(rr, lim_lo))[1], np.nan)
    db = np.where(valid, s_hi.sol(np.minimum(rr, lim_hi))[1], np.nan)
    vmean = 0.5 * (a + b)
    dmean = 0.5 * (da + db)
    gap = np.abs(a - b) / np.maximum(np.abs(vmean), 1e-300)
    bad = ~(gap <= agree_tol) | ~(vmean > 0)
    cut = int(np.argmax(bad)) if np.any(bad) else len(r)
    cut = max(cut, 8)
    values = vmean.copy()
    tail_from = None
    if cut < len(r):
        j = cut - 1
        tail_from = float(r[j])
        p = 2.0 * params.beta - params.dim
        model = lambda s: gaussian_series(p, params.dim, s) * np.exp(-(s**2) / 4.0)
        values[cut:] = values[j] * model(r[cut:]) / model(r[j])
    if np.any(values[:-1] <= 0):
        raise InvariantError("shooting produced a nonpositive profile")
    # defect of V'' = f(r, V, V') with V'' from 4th-order differences of V'
    h = r[1] - r[0]
    upto = min(cut, len(r))
    # stencils start at node 1: node 0 is the regularized origin r0, not r = 0
    d2 = _central_derivative(dmean[1:upto], h)
    sl = slice(4, upto - 3)
    ri = r[sl]
    f = -((params.dim - 1) / ri + ri / 2.0) * dmean[sl] - params.beta * vmean[sl] + vmean[sl] ** params.q
    resid = float(np.max(np.abs(d2 - f)) / np.max(vmean[:upto])) if upto > 8 else float("nan")
    return Profile(
        params,
        "V",
        r,
        values,
        {
            "method": "shooting (DOP853, bisection on V(0))",
            "iterations": it,
            "residual": resid,
            "shooting_value": 0.5 * (lo + hi),
            "bracket": [lo, hi],
            "tail_attached_from": tail_from,
        },
    )


class _RadialFunctional:
    """Discrete J in the variable y = V exp(r^2/4) on uniform nodes, y(r_max) = 0.

    J(y) = 1/2 sum_faces kappa (dy)^2/h + 1/2 sum_nodes m_i ((N/2 - beta) y_i^2
           + 2/(q+1) g_i |y_i|^(q+1)),
    kappa = rho(face), m_i = integral of rho over the control volume,
    rho = exp(-r^2/4) r^(N-1), g = exp(-(q-1) r^2/4).
    """

    def __init__(self, params, r):
        self.params = params
        self.r = r
        N = params.dim
        h = r[1] - r[0]
        self.h = h
        mid = 0.5 * (r[1:] + r[:-1])
        self.kappa = np.exp(-(mid**2) / 4.0) * mid ** (N - 1) / h
        faces = np.concatenate(([0.0], mid, [r[-1]]))
        # control-volume integrals of rho by 4-point Gauss-Legendre per volume
        xg, wg = np.polynomial.legendre.leggauss(4)
        a, b = faces[:-1], faces[1:]
        pts = 0.5 * (b - a)[:, None] * xg[None, :] + 0.5 * (b + a)[:, None]
        self.mass = 0.5 * (b - a) * np.sum(wg[None, :] * np.exp(-(pts**2) / 4.0) * pts ** (N - 1), axis=1)
        self.g = np.exp(-(params.q - 1.0) * r**2 / 4.0)
        self.shift = N / 2.0 - params.beta

    def _full(self, y_in):
        return np.concatenate((y_in, [0.0]))

    def value(self, y_in) -> float:
        y = self._full(y_in)
        q = self.params.q
        grad = 0.5 * np.sum(self.kappa * np.diff(y) ** 2)
        pot = 0.5 * np.sum(self.mass * (self.shift * y**2 + 2.0 / (q + 1.0) * self.g * np.abs(y) ** (q + 1.0)))
        return float(grad + pot)

    def gradient(self, y_in):
        y = self._full(y_in)
        q = self.params.q
        flux = self.kappa * np.diff(y)
        G = np.zeros_like(y)
        G[:-1] -= flux
        G[1:] += flux
        G += self.mass * (self.shift * y + self.g * np.abs(y) ** q * np.sign(y))
        return G[:-1]

    def newton_system(self, y_in):
        """Residual G/m (strong form) with its tridiagonal Jacobian."""
        y = self._full(y_in)
        q = self.params.q
        m = self.mass[:-1]
        F = self.gradient(y_in) / m
        kl = np.concatenate(([0.0], self.kappa[:-1]))
        kr = self.kappa
        di = (kl + kr) / m + self.shift + q * self.g[:-1] * np.abs(y[:-1]) ** (q - 1.0)
        lo = -kl / m
        up = -kr / m
        return F, lo, di, up

    def stiffness_banded(self):
        n = len(self.r) - 1
        kl = np.concatenate(([0.0], self.kappa[:-1]))
        kr = self.kappa
        ab = np.zeros((3, n))
        ab[1] = kl + kr + self.mass[:-1]
        ab[0, 1:] = -self.kappa[:-1][: n - 1]
        ab[2, :-1] = -self.kappa[:-1][: n - 1]
        return ab


def bump_energy(params: AbsorptionParams, c: float) -> float:
    """J of c exp(-|eta|^2/4) per unit sphere area, in closed form."""
    N, q = params.dim, params.q
    # int exp(-r^2/4) r^(N-1) dr, and the gradient term reduces to the same integral
    i2 = 2.0 ** (N - 1) * math.gamma(N / 2.0)
    # the weights combine to int exp(-q r^2/4) r^(N-1) dr
    iq = 0.5 * (4.0 / q) ** (N / 2.0) * math.gamma(N / 2.0)
    return 0.5 * c**2 * (N / 2.0 - params.beta) * i2 + c ** (q + 1.0) / (q + 1.0) * iq


def solve_V_variational(
    params: AbsorptionParams,
    r_max: float = 16.0,
    n_nodes: int = 3201,
    descent_iters: int = 200,
    descent_tol: float = 1e-4,
) -> Profile:
    """V as the positive minimizer of the weighted radial functional.

    Projected gradient descent (Sobolev-preconditioned, Armijo backtracking)
    from the best multiple of exp(-r^2/4), then Newton on the
    Euler-Lagrange system.
    """
    _require_subcritical(params)
    r = np.linspace(0.0, r_max, n_nodes)
    fun = _RadialFunctional(params, r)
    precond = fun.stiffness_banded()

    def best_constant():
        res = optimize.minimize_scalar(
            lambda s: fun.value(np.full(n_nodes - 1, math.exp(s))), bounds=(-20, 20), method="bounded"
        )
        return math.exp(res.x)

    seeds = [best_constant()]
    seeds.append(10.0 * seeds[0])
    last_error = None
    for seed in seeds:
        y = np.full(n_nodes - 1, seed)
        J = fun.value(y)
        descent_done = 0
        for it in range(descent_iters):
            G = fun.gradient(y)
            d = -solve_banded((1, 1), precond, G)
            slope = float(G @ d)
            if -slope < descent_tol * max(abs(J), 1e-300):
                break
            lam = 1.0
            while lam > 1e-12:
                trial = np.maximum(y + lam * d, 0.0)
                Jt = fun.value(trial)
                if Jt <= J + 1e-4 * lam * slope:
                    break
                lam *= 0.5
            y, J = trial, Jt
            descent_done = it + 1
        if np.max(y) < 1e-8 * seed:
            last_error = RegimeError("descent collapsed to the trivial minimizer")
            continue
        scale = np.maximum(np.abs(y), 1e-300 + 0 * y)
        try:
            y, newton_its, res = damped_newton(fun.newton_system, y, tol=1e-12 * np.max(y) + 1e-300)
        except SolverError as exc:
            last_error = exc
            continue
        if np.max(y) < 1e-8 * seed:
            last_error = RegimeError("Newton polish collapsed to the trivial solution")
            continue
        break
    else:
        raise RegimeError(f"both seeds collapsed: {last_error}")
    yfull = np.concatenate((y, [0.0]))
    values = yfull * np.exp(-(r**2) / 4.0)
    F, *_ = fun.newton_system(y)
    vres = float(np.max(np.abs(F * np.exp(-(r[:-1] ** 2) / 4.0))) / np.max(values))
    return Profile(
        params,
        "V",
        r,
        values,
        {
            "method": "projected Sobolev gradient descent + Newton",
            "iterations": descent_done + newton_its,
            "descent_iterations": descent_done,
            "newton_iterations": newton_its,
            "residual": vres,
            "energy": fun.value(y),
        },
    )


def eval_vss(profile_V: Profile, x_radius, t):
    """Very singular solution t^-beta V(|x|/sqrt(t))."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    x = np.abs(np.asarray(x_radius, dtype=float))
    return t ** (-profile_V.params.beta) * profile_V(x / np.sqrt(t))


# ---------------------------------------------------------------- linear profiles


def solve_linear_z(
    params: AbsorptionParams,
    which: str,
    r_max: float = 20.0,
    n_nodes: int = 2001,
) -> Profile:
    """Z1 (algebraic) or Z2 (Gaussian) branch of z'' + r/2 z' + beta z = 0.

    Z2 is integrated inward from r_max seeded by its asymptotic series;
    inward, Z2 is the growing solution, so the integration is stable.
    Z1 is only determined up to adding multiples of Z2, and inward it is
    the decaying direction, so it is integrated outward from a regular
    solution at r = 0 (even, or odd when the even one has no algebraic
    part). Both are normalized to z(1) = 1; Z1 may change sign.
    """
    if which not in ("Z1", "Z2"):
        raise ValueError("which must be 'Z1' or 'Z2'")
    beta = params.beta
    r = np.linspace(0.0, r_max, n_nodes)

    def rhs(s, st):
        return [st[1], -s / 2.0 * st[1] - beta * st[0]]

    if which == "Z2":
        p = 2.0 * beta - 1.0
        y = lambda s: gaussian_series(p, 1, s)
        R = float(r_max)
        z0 = float(y(R) * np.exp(-(R**2) / 4.0))
        dz0 = float((_series_derivative(y, R) - R / 2.0 * y(R)) * np.exp(-(R**2) / 4.0))
        sol = integrate.solve_ivp(rhs, (R, 0.0), [z0, dz0], method="DOP853", rtol=1e-13, atol=1e-300, t_eval=r[::-1])
        zv = sol.y[0][::-1]
        dzv = sol.y[1][::-1]
        nfev = int(sol.nfev)
        method = "inward DOP853 from asymptotic series"
    else:
        best = None
        nfev = 0
        for start, label in (([1.0, 0.0], "even"), ([0.0, 1.0], "odd")):
            sol = integrate.solve_ivp(rhs, (0.0, r_max), start, method="DOP853", rtol=1e-13, atol=1e-30, t_eval=r)
            nfev += int(sol.nfev)
            # algebraic content at r_max relative to the solution size
            weight = abs(sol.y[0][-1]) * r_max ** (2.0 * beta) / np.max(np.abs(sol.y[0]))
            if best is None or weight > best[0]:
                best = (weight, sol, label)
        _, sol, label = best
        zv, dzv = sol.y[0], sol.y[1]
        method = f"outward DOP853 from the {label} regular solution"
    norm = float(np.interp(1.0, r, zv))
    zv, dzv = zv / norm, dzv / norm
    h = r[1] - r[0]
    d2 = _central_derivative(dzv, h)
    ri = r[3:-3]
    resid = float(np.max(np.abs(d2 + ri / 2.0 * dzv[3:-3] + beta * zv[3:-3])) / np.max(np.abs(zv)))
    prof = Profile(
        params,
        which,
        r,
        zv,
        {"method": method, "iterations": nfev, "residual": resid, "normalization": norm},
    )
    if which == "Z2":
        window = (0.5 * r_max, 0.9 * r_max)
        fit = fit_asymptotics(prof, window, check_level=False)
        prof.solver_meta["branch_fit_exponent"] = fit.exponent
        if abs(fit.exponent - p) > 0.1 * max(abs(p), 1.0):
            raise SolverError(f"Z2 lost to the algebraic branch: exponent {fit.exponent:.4g} vs {p:.4g}")
    return prof


# ---------------------------------------------------------------- fitting


def default_tail_window(profile: Profile) -> tuple:
    r = profile.nodes
    hi = r[-1] * 0.8
    lo = r[-1] * 0.5
    if profile.solver_meta.get("tail_attached_from"):
        hi = min(hi, profile.solver_meta["tail_attached_from"])
        lo = min(lo, 0.6 * hi)
    return (lo, hi)


def fit_asymptotics(profile: Profile, window, model: str = "gaussian", check_level: bool = True) -> FitResult:
    """Least-squares line through log(value e^{r^2/4}) (or log value) vs log r."""
    r_lo, r_hi = window
    if not r_lo < r_hi:
        raise WindowError("need r_lo < r_hi")
    if r_lo < profile.nodes[0] or r_hi > profile.nodes[-1]:
        raise WindowError("window outside the profile grid")
    sel = (profile.nodes >= r_lo) & (profile.nodes <= r_hi) & (profile.values != 0)
    if np.count_nonzero(sel) < 8:
        raise WindowError("fewer than 8 nodes in the fit window")
    if check_level and r_lo > profile.nodes[0] <= 1.0 <= profile.nodes[-1]:
        ref = float(np.interp(1.0, profile.nodes, profile.values))
        if np.max(profile.values[sel]) > 0.1 * abs(ref) and model == "gaussian":
            raise WindowError("window starts where the profile is not yet in its tail")
    r = profile.nodes[sel]
    v = np.abs(profile.values[sel])
    lr = np.log(r)
    lv = np.log(v) + (r**2 / 4.0 if model == "gaussian" else 0.0)
    slope, intercept = np.polyfit(lr, lv, 1)
    C = math.exp(intercept)
    fitted = C * r**slope * (np.exp(-(r**2) / 4.0) if model == "gaussian" else 1.0)
    resid = float(np.max(np.abs(fitted / v - 1.0)))
    return FitResult(float(slope), C, (float(r_lo), float(r_hi)), resid, model)

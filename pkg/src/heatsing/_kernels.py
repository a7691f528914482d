"""Compiled inner loops for the radial diffusion substep."""

import numpy as np
from numba import njit


@njit(cache=True)
def cn_diffuse(u, vol, k_left, k_right, n_unknown, bvalue, dt_sub, n_sub, theta):
    """Advance ``u`` in place by ``n_sub`` theta-scheme substeps of size ``dt_sub``.

    The operator is the finite-volume radial Laplacian: row i reads
    vol[i] du_i/dt = k_right[i] (u[i+1]-u[i]) - k_left[i] (u[i]-u[i-1]).
    Nodes ``>= n_unknown`` are Dirichlet and held at ``bvalue``.
    """
    n = n_unknown
    lo = np.empty(n)
    di = np.empty(n)
    up = np.empty(n)
    a = theta * dt_sub
    b = (1.0 - theta) * dt_sub
    for i in range(n):
        di[i] = vol[i] + a * (k_left[i] + k_right[i])
        lo[i] = -a * k_left[i]
        up[i] = -a * k_right[i]
    # forward elimination factors; the matrix is an M-matrix, no pivoting needed
    cp = np.empty(n)
    dp = np.empty(n)
    dp[0] = di[0]
    cp[0] = up[0] / dp[0]
    for i in range(1, n):
        dp[i] = di[i] - lo[i] * cp[i - 1]
        cp[i] = up[i] / dp[i]
    rhs = np.empty(n)
    nodes = u.shape[0]
    for _ in range(n_sub):
        for i in range(n):
            flux = -k_left[i] * u[i]
            if i > 0:
                flux += k_left[i] * u[i - 1]
            right = u[i + 1] if i + 1 < nodes else 0.0
            flux += k_right[i] * (right - u[i])
            rhs[i] = vol[i] * u[i] + b * flux
        if n < nodes:
            # implicit part of the Dirichlet coupling
            rhs[n - 1] += a * k_right[n - 1] * bvalue
        rhs[0] = rhs[0] / dp[0]
        for i in range(1, n):
            rhs[i] = (rhs[i] - lo[i] * rhs[i - 1]) / dp[i]
        u[n - 1] = rhs[n - 1]
        for i in range(n - 2, -1, -1):
            u[i] = rhs[i] - cp[i] * u[i + 1]
        for i in range(n, nodes):
            u[i] = bvalue
    return u


@njit(cache=True)
def implicit_step(u, vol, k_left, k_right, n_unknown, bvalue, dt, weight, q, tol, max_iter):
    """One fully implicit backward Euler step with coupled absorption, in place.

    Solves vol (u - u_old) = dt L u - vol weight u^q by Newton, where
    ``weight`` is the integral of t^alpha over the step. The first iterate is
    the absorption-free solution, a supersolution; for the convex u^q the
    Newton iterates then decrease monotonically to the solution.
    Returns the iteration count, or -1 without convergence.
    """
    n = n_unknown
    nodes = u.shape[0]
    old = u[:n].copy()
    lo = np.empty(n)
    di = np.empty(n)
    up = np.empty(n)
    rhs = np.empty(n)
    cp = np.empty(n)
    for i in range(n):
        lo[i] = -dt * k_left[i]
        up[i] = -dt * k_right[i]
    it = 0
    for it in range(max_iter + 1):
        # linear system for the next iterate: J v = J u - F(u)
        for i in range(n):
            uq1 = u[i] ** (q - 1.0) if u[i] > 0.0 else 0.0
            base = vol[i] + dt * (k_left[i] + k_right[i])
            if it == 0:
                di[i] = base
                rhs[i] = vol[i] * old[i]
            else:
                di[i] = base + q * vol[i] * weight * uq1
                rhs[i] = vol[i] * old[i] + (q - 1.0) * vol[i] * weight * uq1 * u[i]
        if n < nodes:
            rhs[n - 1] += dt * k_right[n - 1] * bvalue
        cp[0] = up[0] / di[0]
        rhs[0] = rhs[0] / di[0]
        for i in range(1, n):
            den = di[i] - lo[i] * cp[i - 1]
            cp[i] = up[i] / den
            rhs[i] = (rhs[i] - lo[i] * rhs[i - 1]) / den
        change = 0.0
        new = rhs[n - 1]
        change = abs(new - u[n - 1]) / max(abs(new), 1e-300)
        u[n - 1] = new
        for i in range(n - 2, -1, -1):
            new = rhs[i] - cp[i] * u[i + 1]
            d = abs(new - u[i]) / max(abs(new), 1e-300)
            if d > change:
                change = d
            u[i] = new
        for i in range(n, nodes):
            u[i] = bvalue
        if it > 0 and change < tol:
            return it
    return -1

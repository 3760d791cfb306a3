"""Chebyshev collocation on Gauss-Lobatto nodes with SSP/TVD RK3 time stepping.

Nodes are returned in ascending order, ``x_j = -cos(pi j / N)`` mapped
affinely to ``[a, b]``, so index 0 is the left end of the domain.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidDomainError, SolverBlowUp, ValidationError

MACHINE_EPS = np.finfo(float).eps


def _check(N, domain):
    if int(N) != N or N < 1:
        raise ValidationError(f"N must be a positive integer, got {N!r}")
    a, b = map(float, domain)
    if not b > a:
        raise InvalidDomainError(f"degenerate or reversed domain [{a}, {b}]")
    return int(N), a, b


def gauss_lobatto_nodes(N, domain=(-1.0, 1.0)):
    N, a, b = _check(N, domain)
    # sin form keeps the reference nodes exactly antisymmetric
    ref = np.sin(np.pi * (2 * np.arange(N + 1) - N) / (2 * N))
    x = a + 0.5 * (b - a) * (ref + 1.0)
    x[0], x[-1] = a, b
    return x


def differentiation_matrix(N, domain=(-1.0, 1.0)):
    """Collocation derivative matrix; diagonal from negative row sums."""
    N, a, b = _check(N, domain)
    x = np.sin(np.pi * (2 * np.arange(N + 1) - N) / (2 * N))
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return D * (2.0 / (b - a))


def exponential_filter(N, order=12):
    """``sigma_j = exp(-alpha (j/N)**order)`` with ``alpha = -ln(machine eps)``."""
    if int(order) != order or order < 2 or order % 2:
        raise ValidationError(f"filter order must be an even integer >= 2, got {order!r}")
    alpha = -np.log(MACHINE_EPS)
    return np.exp(-alpha * (np.arange(N + 1) / N) ** order)


def chebyshev_transform_matrices(N):
    """Forward (values -> coefficients) and inverse transforms on ascending nodes.

    Plain cosine sums, O(N**2) per application.
    """
    j = np.arange(N + 1)
    theta = np.pi * (N - j) / N  # ascending x_j = cos(theta_j)
    T = np.cos(np.outer(j, theta))  # T[n, i] = T_n(x_i)
    cbar = np.ones(N + 1)
    cbar[0] = cbar[-1] = 2.0
    forward = (2.0 / N) * T / cbar[:, None] / cbar[None, :]
    inverse = T.T
    return forward, inverse


@dataclass
class SpectralOperator:
    N: int
    domain: tuple = (-1.0, 1.0)
    filter_order: Optional[int] = None
    nodes: np.ndarray = field(init=False, repr=False)
    diff_matrix: np.ndarray = field(init=False, repr=False)
    filter_diag: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.N, a, b = _check(self.N, self.domain)
        self.domain = (a, b)
        self.nodes = gauss_lobatto_nodes(self.N, self.domain)
        self.diff_matrix = differentiation_matrix(self.N, self.domain)
        if self.filter_order:
            self.filter_diag = exponential_filter(self.N, self.filter_order)
            fwd, inv = chebyshev_transform_matrices(self.N)
            self._filter_matrix = inv @ (self.filter_diag[:, None] * fwd)
        else:
            self.filter_diag = np.ones(self.N + 1)
            self._filter_matrix = None

    def derivative(self, u):
        return self.diff_matrix @ u

    def coefficients(self, u):
        fwd, _ = chebyshev_transform_matrices(self.N)
        return fwd @ u

    def apply_filter(self, u):
        if self._filter_matrix is None:
            return u
        return self._filter_matrix @ u

    def quadrature_weights(self):
        """Chebyshev-Gauss-Lobatto weights for the weight ``(1 - x**2)**-1/2``."""
        w = np.full(self.N + 1, np.pi / self.N)
        w[0] = w[-1] = np.pi / (2 * self.N)
        return w

    def interpolator(self, values):
        return BarycentricInterpolant(self.nodes, np.asarray(values, dtype=float))


class BarycentricInterpolant:
    """Second-kind barycentric formula on Gauss-Lobatto nodes."""

    def __init__(self, nodes, values):
        self.nodes = nodes
        self.values = values
        n = nodes.size
        w = (-1.0) ** np.arange(n)
        w[0] *= 0.5
        w[-1] *= 0.5
        self.weights = w

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        diff = x[:, None] - self.nodes[None, :]
        exact = diff == 0.0
        diff[exact] = 1.0
        tmp = self.weights / diff
        out = (tmp @ self.values) / tmp.sum(axis=1)
        hit_rows, hit_cols = np.nonzero(exact)
        out[hit_rows] = self.values[hit_cols]
        return out


def tvd_rk3_step(u, rhs, dt, t=0.0, bc=None):
    """One Shu-Osher step.  ``rhs(u, t)``; ``bc(u, t)`` overwrites boundary nodes in place."""

    def stage(v, ts):
        if bc is not None:
            bc(v, ts)
        if not np.all(np.isfinite(v)):
            raise SolverBlowUp(ts)
        return v

    u1 = stage(u + dt * rhs(u, t), t + dt)
    u2 = stage(0.75 * u + 0.25 * (u1 + dt * rhs(u1, t + dt)), t + 0.5 * dt)
    return stage(u / 3.0 + (2.0 / 3.0) * (u2 + dt * rhs(u2, t + 0.5 * dt)), t + dt)


@dataclass
class TimeStepper:
    """TVD-RK3 driver with ``dt = cfl / (N**2 * max(1, max|u|))`` when ``wave_speed`` is on."""

    N: int
    cfl: float = 0.5
    wave_speed: bool = False

    def dt(self, u=None):
        if self.wave_speed and u is not None:
            return self.cfl / (self.N**2 * max(1.0, float(np.max(np.abs(u)))))
        return self.cfl / self.N**2

    def integrate(self, u0, rhs, t_final, bc=None, post_step=None, progress=None):
        u = np.array(u0, dtype=float)
        if bc is not None:
            bc(u, 0.0)
        t, n = 0.0, 0
        while t < t_final * (1 - 1e-14):
            dt = min(self.dt(u), t_final - t)
            u = tvd_rk3_step(u, rhs, dt, t, bc)
            if post_step is not None:
                u = post_step(u)
                if bc is not None:
                    bc(u, t + dt)
            n += 1
            t = t_final if t_final - (t + dt) <= 1e-14 * t_final else t + dt
            if progress is not None:
                progress(n, t)
        return u

"""Quadrature approximation of the convolution ``S * delta_eps`` on particle grids.

Two ways of building the discrete source are supported:

``analytic``
    every particle interval ``[xi_i, xi_{i+1}]`` is subdivided into ``q``
    equal steps and ``S`` is evaluated at the closed Newton-Cotes sub-nodes.
    Needs a callable source.
``samples``
    consecutive groups of ``q + 1`` particles form one panel and the weights
    come from integrating the local Lagrange interpolant, so only the sampled
    values ``S(xi_i)`` are used.  Explicit number densities override the
    computed weights with ``1 / n(xi_i)``.

Either way the result is a sorted set of nodes with aggregated weights
``w_i`` and the regularized source is ``sum_i w_i S_i delta_eps(x - xi_i)``.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional

import mpmath
import numpy as np

from .delta_kernel import KernelSpec, _solve_rational, build_kernel, evaluate_delta
from .errors import (
    InvalidScalingError,
    OracleFailure,
    UnsupportedRuleError,
    ValidationError,
)

MODES = ("analytic", "samples")


@dataclass
class ParticleField:
    positions: np.ndarray
    values: np.ndarray
    densities: Optional[np.ndarray] = None
    source_fn: Optional[Callable] = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.positions.ndim != 1 or self.positions.size < 2:
            raise ValidationError("need at least two particle positions")
        if self.values.shape != self.positions.shape:
            raise ValidationError("positions and values must have the same length")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.values))):
            raise ValidationError("particle positions and values must be finite")
        if np.any(np.diff(self.positions) <= 0):
            raise ValidationError("particle positions must be strictly increasing")
        if self.densities is not None:
            self.densities = np.asarray(self.densities, dtype=float)
            if self.densities.shape != self.positions.shape:
                raise ValidationError("densities must match positions in length")
            if np.any(self.densities <= 0):
                raise ValidationError("number densities must be positive")

    @classmethod
    def from_function(cls, positions, fn, densities=None):
        positions = np.asarray(positions, dtype=float)
        return cls(positions, fn(positions), densities=densities, source_fn=fn)

    @property
    def n_intervals(self):
        return self.positions.size - 1

    @property
    def span(self):
        return float(self.positions[0]), float(self.positions[-1])


@dataclass(frozen=True)
class QuadratureRule:
    """Closed Newton-Cotes rule with nodes ``j / q`` on the unit panel."""

    q: int
    weights: tuple
    exact_weights: tuple = field(repr=False, default=())

    @property
    def nodes(self):
        return np.arange(self.q + 1) / self.q


@lru_cache(maxsize=None)
def newton_cotes_weights(q):
    if int(q) != q or not 1 <= q <= 8:
        raise UnsupportedRuleError(f"closed Newton-Cotes rules are limited to 1 <= q <= 8, got {q}")
    n = q + 1
    # exactness for monomials t**p, p = 0..q, at nodes t_j = j/q
    a = [[Fraction(j, q) ** p for j in range(n)] for p in range(n)]
    b = [Fraction(1, p + 1) for p in range(n)]
    w = _solve_rational(a, b)
    return QuadratureRule(q=q, weights=tuple(float(x) for x in w), exact_weights=tuple(w))


def validate_exactness_constraint(m, k, q):
    """True iff ``q <= min(m, k) - 1`` and ``m, k >= 2``."""
    if m < 2 or k < 2:
        return False
    return q <= min(m, k) - 1


def optimal_epsilon(m, q, panel_lengths, C=0.5):
    """``C * (sum h_i**(q+2)) ** (1 / (m+q+3))`` for sub-step lengths ``h_i``."""
    h = np.asarray(panel_lengths, dtype=float)
    if h.size == 0:
        raise ValidationError("optimal_epsilon needs at least one panel length")
    if np.any(h <= 0):
        raise ValidationError("panel lengths must be positive")
    if not C > 0:
        raise ValidationError("proportionality constant C must be positive")
    return float(C * np.sum(h ** (q + 2)) ** (1.0 / (m + q + 3)))


def substep_lengths(field_, q):
    """Sub-step ``h_i = (xi_{i+1} - xi_i) / q`` of every particle interval."""
    return np.diff(field_.positions) / q


def _lagrange_panel_weights(x):
    """Weights integrating the interpolant through ``x`` over ``[x[0], x[-1]]``."""
    x0, length = x[0], x[-1] - x[0]
    t = (x - x0) / length
    n = t.size
    vander = np.vander(t, n, increasing=True).T
    moments = 1.0 / np.arange(1, n + 1)
    return np.linalg.solve(vander, moments) * length


def assemble_nodes(field_, rule, mode="analytic"):
    """Quadrature nodes and the products ``weight * S(node)``, sorted by node."""
    if mode not in MODES:
        raise ValidationError(f"unknown quadrature mode {mode!r}")
    q = rule.q
    xi = field_.positions
    if mode == "analytic":
        if field_.source_fn is None:
            raise ValidationError("analytic mode needs a source callable")
        h = np.diff(xi) / q
        sub = xi[:-1, None] + h[:, None] * np.arange(q + 1)[None, :]
        sub[:, -1] = xi[1:]
        w = np.asarray(rule.weights)[None, :] * (h * q)[:, None]
        # shared panel ends are merged so each node appears once
        nodes = np.concatenate([sub[:, :-1].ravel(), xi[-1:]])
        weights = np.zeros(nodes.size)
        weights[: sub.shape[0] * q] = w[:, :-1].ravel()
        weights[q::q] += w[:, -1]
        values = np.asarray(field_.source_fn(nodes), dtype=float)
        return nodes, weights * values

    if field_.densities is not None:
        return xi.copy(), field_.values / field_.densities
    if field_.n_intervals % q:
        raise ValidationError(
            f"samples mode needs the number of intervals ({field_.n_intervals}) divisible by q={q}"
        )
    weights = np.zeros(xi.size)
    for start in range(0, field_.n_intervals, q):
        sl = slice(start, start + q + 1)
        weights[sl] += _lagrange_panel_weights(xi[sl])
    return xi.copy(), weights * field_.values


@dataclass
class RegularizedSource:
    """Smooth approximation of ``sum_i S(xi_i) / n(xi_i) delta(x - xi_i)``."""

    kernel_spec: KernelSpec
    epsilon: float
    particles: ParticleField
    mode: str = "analytic"
    rule: Optional[QuadratureRule] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidScalingError(f"epsilon must be positive, got {self.epsilon!r}")
        if not isinstance(self.kernel_spec, KernelSpec):
            self.kernel_spec = KernelSpec(*self.kernel_spec)
        self.kernel = build_kernel(self.kernel_spec)
        self._assembled = {}

    def nodes(self, rule):
        key = rule.q
        if key not in self._assembled:
            self._assembled[key] = assemble_nodes(self.particles, rule, self.mode)
        return self._assembled[key]

    def __call__(self, x, rule=None):
        rule = rule or self.rule or newton_cotes_weights(2)
        return regularize(self, rule, x)


def regularize(source, rule, x):
    """Evaluate the quadrature-regularized source at ``x`` (scalar or array).

    Only nodes inside ``[x - eps, x + eps]`` contribute; they are located by
    binary search.  Near the ends of the particle span the sum is simply
    truncated.
    """
    nodes, ws = source.nodes(rule)
    eps = source.epsilon
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    lo = np.searchsorted(nodes, xs - eps, side="left")
    hi = np.searchsorted(nodes, xs + eps, side="right")
    out = np.empty(xs.size)
    for i, (xv, a, b) in enumerate(zip(xs, lo, hi)):
        if b <= a:
            out[i] = 0.0
            continue
        out[i] = ws[a:b] @ evaluate_delta(source.kernel, eps, xv - nodes[a:b])
    return out.reshape(np.shape(x)) if np.ndim(x) else float(out[0])


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _gauss_panel(f, a, b):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * float(_GL_WEIGHTS @ f(mid + half * _GL_NODES))


def _adaptive_gauss(f, a, b, tol, depth=0, whole=None):
    whole = _gauss_panel(f, a, b) if whole is None else whole
    mid = 0.5 * (a + b)
    left, right = _gauss_panel(f, a, mid), _gauss_panel(f, mid, b)
    if abs(left + right - whole) <= tol:
        return left + right
    if depth >= 40:
        raise OracleFailure(f"adaptive quadrature did not reach {tol:g} on [{a}, {b}]")
    return _adaptive_gauss(f, a, mid, tol / 2, depth + 1, left) + _adaptive_gauss(
        f, mid, b, tol / 2, depth + 1, right
    )


def convolve_oracle(kernel, source_fn, epsilon, x, tol=1e-13, dps=None, breakpoints=()):
    """Reference value of ``(S * delta_eps)(x)`` by adaptive quadrature.

    With ``dps`` set the integral is done in ``mpmath`` at that many decimal
    digits (``source_fn`` must then accept mpmath numbers) and an ``mpf`` is
    returned; this resolves errors far below double-precision round-off.
    ``breakpoints`` are split points where ``source_fn`` is not smooth.
    """
    if not epsilon > 0:
        raise InvalidScalingError(f"epsilon must be positive, got {epsilon!r}")
    if dps is not None:
        with mpmath.workdps(dps):
            coeffs = [mpmath.mpf(c.numerator) / c.denominator for c in kernel.monomial_coeffs()]
            eps, xm = mpmath.mpf(epsilon), mpmath.mpf(x)

            def integrand(eta):
                return mpmath.polyval(coeffs[::-1], eta) * source_fn(xm - eps * eta)

            pts = [mpmath.mpf(-1)]
            for bp in sorted(breakpoints):
                eta = (xm - mpmath.mpf(bp)) / eps
                if -1 < eta < 1:
                    pts.append(eta)
            pts.append(mpmath.mpf(1))
            pts = sorted(pts)
            val, err = mpmath.quad(integrand, pts, error=True)
            if err > mpmath.mpf(10) ** (-(dps - 10)):
                raise OracleFailure(f"mpmath quadrature error estimate {err} too large")
            return +val

    def integrand(xi):
        return source_fn(xi) * evaluate_delta(kernel, epsilon, x - xi)

    pts = [x - epsilon]
    pts += [b for b in sorted(breakpoints) if x - epsilon < b < x + epsilon]
    pts.append(x + epsilon)
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        total += _adaptive_gauss(integrand, a, b, tol / (len(pts) - 1))
    return total

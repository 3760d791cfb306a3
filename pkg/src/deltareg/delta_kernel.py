"""Compactly supported polynomial approximations of the Dirac delta.

The kernel ``P^{m,k}`` lives on [-1, 1] and has the form

    P(xi) = (1 - xi**2)**(k+1) * sum_j a_j xi**(2j),   j = 0 .. m // 2

with unit mass, ``m`` vanishing moments and ``k`` derivatives vanishing at
the support ends.  Coefficients are found in exact rational arithmetic and
converted to floats once; evaluation is a Horner sweep in ``xi**2``.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .errors import InvalidScalingError, ValidationError


@dataclass(frozen=True)
class KernelSpec:
    m: int
    k: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValidationError(f"m must be an integer >= 1, got {self.m!r}")
        if int(self.k) != self.k or self.k < 0:
            raise ValidationError(f"k must be an integer >= 0, got {self.k!r}")


@lru_cache(maxsize=None)
def weighted_moment(n, k):
    """Exact value of ``int_{-1}^{1} xi**(2n) (1 - xi**2)**(k+1) dxi``."""
    if n < 0 or k < 0:
        raise ValidationError("weighted_moment needs n >= 0 and k >= 0")
    p = k + 1
    return sum(
        (Fraction((-1) ** l * comb(p, l) * 2, 2 * (n + l) + 1) for l in range(p + 1)),
        Fraction(0),
    )


def _solve_rational(a, b):
    """Gauss-Jordan elimination over Fractions; ``a`` is a list of rows."""
    n = len(b)
    aug = [list(row) + [rhs] for row, rhs in zip(a, b)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise ArithmeticError("singular moment system")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        piv = aug[col][col]
        aug[col] = [v / piv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [vr - f * vc for vr, vc in zip(aug[r], aug[col])]
    return [row[-1] for row in aug]


@dataclass(frozen=True)
class DeltaKernel:
    """The polynomial ``P^{m,k}``.

    ``even_coeffs`` holds the exact coefficients ``a_j`` of the factor that
    multiplies the weight ``(1 - xi**2)**(k+1)``.
    """

    spec: KernelSpec
    even_coeffs: tuple
    _float_coeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_float_coeffs", np.array([float(a) for a in self.even_coeffs])
        )

    @property
    def m(self):
        return self.spec.m

    @property
    def k(self):
        return self.spec.k

    @property
    def degree(self):
        return 2 * (self.m // 2 + self.k + 1)

    def monomial_coeffs(self):
        """Exact coefficients of ``P`` in the monomial basis, lowest power first."""
        p = self.k + 1
        coeffs = [Fraction(0)] * (self.degree + 1)
        for j, a in enumerate(self.even_coeffs):
            for l in range(p + 1):
                coeffs[2 * (j + l)] += a * (-1) ** l * comb(p, l)
        return coeffs

    def __call__(self, xi):
        """Evaluate ``P`` on [-1, 1]; values outside the support are zero."""
        xi = np.asarray(xi, dtype=float)
        s = xi * xi
        acc = np.zeros_like(s)
        for a in self._float_coeffs[::-1]:
            acc = acc * s + a
        w = 1.0 - s
        out = acc * w ** (self.k + 1)
        return np.where(s <= 1.0, out, 0.0)


def build_kernel(spec):
    """Solve the even moment system ``sum_j a_j mu(i+j, k) = delta_{i0}`` exactly."""
    if not isinstance(spec, KernelSpec):
        spec = KernelSpec(*spec)
    n = spec.m // 2 + 1
    a = [[weighted_moment(i + j, spec.k) for j in range(n)] for i in range(n)]
    b = [Fraction(1)] + [Fraction(0)] * (n - 1)
    try:
        coeffs = _solve_rational(a, b)
    except ArithmeticError as exc:  # pragma: no cover - Hilbert-like system is SPD
        raise AssertionError(f"kernel construction failed for {spec}") from exc
    return DeltaKernel(spec, tuple(coeffs))


def evaluate_delta(kernel, epsilon, x):
    """Scaled kernel ``P(x / eps) / eps``, zero for ``|x| > eps``."""
    if not epsilon > 0:
        raise InvalidScalingError(f"epsilon must be positive, got {epsilon!r}")
    x = np.asarray(x, dtype=float)
    out = kernel(x / epsilon) / epsilon
    out = np.where(np.abs(x) <= epsilon, out, 0.0)
    return out if out.ndim else float(out)


@dataclass
class ConditionReport:
    mass: float
    moments: float
    boundary: float

    @property
    def max_residual(self):
        return max(self.mass, self.moments, self.boundary)


def _poly_derivs_at(coeffs, x, order):
    """Values of the first ``order`` derivatives (0 included) of a monomial polynomial."""
    poly = np.polynomial.Polynomial(coeffs)
    out = []
    for _ in range(order + 1):
        out.append(float(poly(x)))
        poly = poly.deriv()
    return out


def verify_conditions(kernel, coeffs=None):
    """Floating-point residuals of the mass, moment and smoothness conditions.

    ``coeffs`` overrides the kernel's even coefficients; it exists so that a
    perturbed kernel can be checked without constructing one.
    """
    a = np.asarray(
        kernel._float_coeffs if coeffs is None else [float(c) for c in coeffs]
    )
    k, m = kernel.k, kernel.m
    nodes, weights = np.polynomial.legendre.leggauss(kernel.degree // 2 + m // 2 + 8)
    s = nodes * nodes
    acc = np.zeros_like(s)
    for c in a[::-1]:
        acc = acc * s + c
    vals = acc * (1.0 - s) ** (k + 1)

    mass = abs(float(weights @ vals) - 1.0)
    moments = max(abs(float(weights @ (nodes**i * vals))) for i in range(1, m + 1))

    # product rule on w * R keeps the cancellation exact: the weight's
    # derivatives at the ends are integer sums
    w_coeffs = np.zeros(2 * (k + 1) + 1)
    for l in range(k + 2):
        w_coeffs[2 * l] = (-1) ** l * comb(k + 1, l)
    r_coeffs = np.zeros(2 * len(a) - 1)
    r_coeffs[::2] = a
    boundary = 0.0
    for end in (-1.0, 1.0):
        dw = _poly_derivs_at(w_coeffs, end, k)
        dr = _poly_derivs_at(r_coeffs, end, k)
        for i in range(k + 1):
            val = sum(comb(i, l) * dw[l] * dr[i - l] for l in range(i + 1))
            boundary = max(boundary, abs(val))
    return ConditionReport(mass=mass, moments=moments, boundary=boundary)

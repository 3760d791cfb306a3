"""Singular advection and Burgers test problems and their convergence studies."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional
import math

import numpy as np

from .delta_kernel import KernelSpec
from .errors import EmptyRegionError, ValidationError
from .regularizer import (
    ParticleField,
    RegularizedSource,
    newton_cotes_weights,
    optimal_epsilon,
    substep_lengths,
)
from .spectral import SpectralOperator, TimeStepper

T_FINAL = 2.0
WINDOW = 0.3

# optimal scalings reported for k = 4 with composite Simpson
REPORTED_EPSILON = {1: 6.5e-3, 5: 4.0e-2, 7: 6.6e-2, 9: 9.5e-2, 13: 1.5e-1, 17: 2.1e-1}

DESK_N = (60, 100, 140, 200)
FULL_N = (100, 200, 300, 400)
DESK_REFERENCE_N = 300
FULL_REFERENCE_N = 500

PARTICLE_COUNTS = {"advection": 2001, "burgers": 1999}


def heaviside(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, 1.0, np.where(x < 0, 0.0, 0.5))


def advection_source(x):
    """``3 cos(5 pi x)`` on the window ``[-0.3, 0.3]``, half value on its edges."""
    x = np.asarray(x, dtype=float)
    out = 3.0 * np.cos(5.0 * np.pi * x) * (heaviside(x + WINDOW) - heaviside(x - WINDOW))
    return out if out.ndim else float(out)


def burgers_source(x):
    return advection_source(np.asarray(x, dtype=float) - 1.0)


def source_antiderivative(xi):
    xi = np.clip(np.asarray(xi, dtype=float), -WINDOW, WINDOW)
    return 3.0 / (5.0 * np.pi) * np.sin(5.0 * np.pi * xi)


def advection_initial(x):
    return np.sin(np.pi * np.asarray(x, dtype=float))


def advection_inflow(t):
    return math.sin(math.pi * (-1.0 - t))


def burgers_initial(x):
    return np.array(x, dtype=float)


def burgers_inflow(t):
    return 0.0


def advection_exact(x, t):
    x = np.asarray(x, dtype=float)
    out = np.sin(np.pi * (x - t)) + source_antiderivative(x) - source_antiderivative(x - t)
    return out if out.ndim else float(out)


def particle_grid(kind, n_p=None):
    """Sine-clustered particles ``c + 0.3 sin(pi(-1/2 + i/N_p))``, ``i = 0..N_p``."""
    if kind not in PARTICLE_COUNTS:
        raise ValidationError(f"unknown problem kind {kind!r}")
    n_p = PARTICLE_COUNTS[kind] if n_p is None else n_p
    if n_p < 2:
        raise ValidationError("need N_p >= 2")
    i = np.arange(n_p + 1)
    xi = WINDOW * np.sin(np.pi * (-0.5 + i / n_p))
    xi[0], xi[-1] = -WINDOW, WINDOW
    if n_p % 2 == 0:
        xi[n_p // 2] = 0.0
    if kind == "advection":
        return ParticleField.from_function(xi, advection_source)
    return ParticleField.from_function(1.0 + xi, burgers_source)


def auto_epsilon(field_, m, q=2, C=0.5):
    return optimal_epsilon(m, q, substep_lengths(field_, q), C)


@dataclass
class ProblemSpec:
    kind: str
    domain: tuple
    initial: Callable
    inflow: Callable
    flux: str
    source: Optional[object] = None  # RegularizedSource, a callable, or None
    t_final: float = T_FINAL
    filter_order: Optional[int] = None

    def source_at(self, x):
        if self.source is None:
            return np.zeros_like(x)
        return np.asarray(self.source(x), dtype=float)


def make_problem(kind, m=7, k=4, epsilon=None, q=2, regularize=True, source_on=True,
                 filter_order=None, n_p=None, C=0.5):
    """Problem with its source already attached.

    ``regularize=False`` keeps the raw singular source; ``source_on=False``
    gives the homogeneous problem.
    """
    if kind == "advection":
        spec = dict(domain=(-1.0, 1.0), initial=advection_initial,
                    inflow=advection_inflow, flux="linear")
        raw = advection_source
    elif kind == "burgers":
        spec = dict(domain=(0.0, 2.0), initial=burgers_initial,
                    inflow=burgers_inflow, flux="quadratic")
        raw = burgers_source
    else:
        raise ValidationError(f"unknown problem kind {kind!r}")
    src = None
    if source_on:
        if regularize:
            particles = particle_grid(kind, n_p)
            if epsilon is None:
                epsilon = auto_epsilon(particles, m, q, C)
            src = RegularizedSource(KernelSpec(m, k), epsilon, particles, "analytic",
                                    newton_cotes_weights(q))
        else:
            src = raw
    return ProblemSpec(kind=kind, source=src, filter_order=filter_order, **spec)


def solve(problem, op, stepper=None, progress=None):
    """Integrate ``u_t + F(u)_x = s(x)`` to ``t_final``; returns node values."""
    if tuple(op.domain) != tuple(map(float, problem.domain)):
        raise ValidationError("operator and problem domains differ")
    if stepper is None:
        stepper = TimeStepper(op.N, wave_speed=problem.flux == "quadratic")
    x = op.nodes
    s = problem.source_at(x)
    D = op.diff_matrix
    if problem.flux == "linear":
        def rhs(u, t):
            return s - D @ u
    else:
        def rhs(u, t):
            return s - D @ (0.5 * u * u)

    inflow = problem.inflow

    def bc(u, t):
        u[0] = inflow(t)

    post = op.apply_filter if problem.filter_order else None
    return stepper.integrate(problem.initial(x), rhs, problem.t_final, bc=bc,
                             post_step=post, progress=progress)


@dataclass(frozen=True)
class RegionPartition:
    """``P`` open interior of the particle span, ``R`` closed edge bands, ``Q`` the rest."""

    span: tuple
    epsilon: float
    domain: tuple

    @property
    def P(self):
        return (self.span[0] + self.epsilon, self.span[1] - self.epsilon)

    @property
    def R(self):
        e = self.epsilon
        return ((self.span[0] - e, self.span[0] + e), (self.span[1] - e, self.span[1] + e))

    def classify(self, x):
        x = np.asarray(x, dtype=float)
        p_lo, p_hi = self.P
        in_p = (x > p_lo) & (x < p_hi)
        in_r = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.R:
            in_r |= (x >= lo) & (x <= hi)
        in_r &= ~in_p
        return np.where(in_p, "P", np.where(in_r, "R", "Q"))


def partition_domain(field_, epsilon, domain):
    lo, hi = field_.span if isinstance(field_, ParticleField) else field_
    if not 0 < epsilon < (hi - lo) / 2:
        raise EmptyRegionError(
            f"epsilon={epsilon} leaves no interior region (needs < {(hi - lo) / 2})"
        )
    return RegionPartition((float(lo), float(hi)), float(epsilon), tuple(map(float, domain)))


def weighted_error(u_num, u_ref, region, op, tags=None):
    """Discrete weighted L2 norm of the error on the nodes carrying ``region``.

    ``region`` is a tag or a string of tags (``"PQ"`` for the union); ``None``
    means the whole domain.  ``u_ref`` may be node values or a callable.
    """
    u_ref = u_ref(op.nodes) if callable(u_ref) else np.asarray(u_ref, dtype=float)
    err = np.asarray(u_num, dtype=float) - u_ref
    mask = np.ones(err.size, dtype=bool)
    if region is not None:
        mask = np.isin(tags, list(region))
    if not mask.any():
        raise EmptyRegionError(f"no spectral nodes in region {region!r}")
    w = op.quadrature_weights()
    return float(np.sqrt(np.sum(w[mask] * err[mask] ** 2)))


def fit_convergence(N_values, errors):
    """Negated least-squares slope of ``log(error)`` against ``log(N)``, plus RMS residual."""
    N_values = np.asarray(N_values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if N_values.size < 2 or N_values.size != errors.size:
        raise ValidationError("need at least two (N, error) pairs")
    if np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        raise ValidationError("errors must be positive and finite")
    lx, ly = np.log(N_values), np.log(errors)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return float(-slope), float(np.sqrt(np.mean(resid**2)))


def self_convergence_reference(problem, N_fine, progress=None):
    """Solve on ``N_fine`` nodes and return a barycentric interpolant of the result."""
    op = SpectralOperator(N_fine, problem.domain, problem.filter_order)
    return op.interpolator(solve(problem, op, progress=progress))


@dataclass
class ConvergenceReport:
    kind: str
    m: int
    k: int
    epsilon: float
    N_values: list
    errors_P: list
    errors_Q: list
    errors_PQ: list
    order_P: float = float("nan")
    order_Q: float = float("nan")
    order_PQ: float = float("nan")
    residual_P: float = float("nan")
    residual_Q: float = float("nan")
    residual_PQ: float = float("nan")
    errors_all: list = field(default_factory=list)
    order_all: float = float("nan")
    solutions: dict = field(default_factory=dict, repr=False)

    def rows(self):
        return list(zip(self.N_values, self.errors_P, self.errors_Q))


def exact_reference(problem):
    """Analytic solution at ``t_final`` when one exists, else None."""
    t = problem.t_final
    if problem.kind == "advection":
        if problem.source is None:
            return lambda x: np.sin(np.pi * (np.asarray(x) - t))
        return lambda x: advection_exact(x, t)
    if problem.source is None:
        return lambda x: np.asarray(x) / (1.0 + t)
    return None


def _run_one(args):
    problem, N = args
    op = SpectralOperator(N, problem.domain, problem.filter_order)
    return N, op, solve(problem, op)


def converge(problem, N_values, reference=None, partition_eps=None, workers=1,
             particles=None, progress=None):
    """Solve for each ``N`` and fit the order of the weighted error on P, Q and P+Q.

    ``reference`` is a callable of ``x``; by default the analytic solution is
    used when one exists.  ``partition_eps`` sets the region width when the
    problem carries no regularized source.
    """
    N_values = sorted(int(n) for n in N_values)
    ref = reference or exact_reference(problem)
    if ref is None:
        raise ValidationError("no reference solution: pass one (e.g. self_convergence_reference)")
    src = problem.source
    eps = partition_eps if partition_eps is not None else getattr(src, "epsilon", None)
    if particles is None:
        particles = src.particles if isinstance(src, RegularizedSource) else particle_grid(problem.kind)
    if eps is None:
        raise ValidationError("partition width unknown: pass partition_eps")
    part = partition_domain(particles, eps, problem.domain)

    jobs = [(problem, N) for N in N_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = sorted(pool.map(_run_one, jobs), key=lambda r: r[0])
    else:
        results = []
        for job in jobs:
            results.append(_run_one(job))
            if progress is not None:
                progress(job[1])

    report = ConvergenceReport(problem.kind, getattr(getattr(src, "kernel_spec", None), "m", 0),
                               getattr(getattr(src, "kernel_spec", None), "k", 0), float(eps),
                               N_values, [], [], [])
    for N, op, u in results:
        tags = part.classify(op.nodes)
        u_ref = ref(op.nodes)
        report.errors_P.append(weighted_error(u, u_ref, "P", op, tags))
        report.errors_Q.append(weighted_error(u, u_ref, "Q", op, tags))
        report.errors_PQ.append(weighted_error(u, u_ref, "PQ", op, tags))
        report.errors_all.append(weighted_error(u, u_ref, None, op, tags))
        report.solutions[N] = (op, u, u_ref, tags)
    report.order_P, report.residual_P = fit_convergence(N_values, report.errors_P)
    report.order_Q, report.residual_Q = fit_convergence(N_values, report.errors_Q)
    report.order_PQ, report.residual_PQ = fit_convergence(N_values, report.errors_PQ)
    report.order_all, _ = fit_convergence(N_values, report.errors_all)
    return report


def max_source_error_on_P(source, exact, n_eval=2001):
    """``max |S - S_reg|`` over a uniform grid strictly inside ``P``."""
    part = partition_domain(source.particles, source.epsilon, (-np.inf, np.inf))
    lo, hi = part.P
    x = np.linspace(lo, hi, n_eval + 2)[1:-1]
    return float(np.max(np.abs(source(x) - exact(x))))

"""Command-line interface.

Exit codes: 0 success, 1 invalid input, 2 runtime failure (solver blow-up,
oracle failure).  Data goes to files or stdout, diagnostics to stderr.
"""

import argparse
import csv
import io
import sys
import time

import numpy as np

from . import __version__
from .delta_kernel import KernelSpec, build_kernel, verify_conditions
from .errors import RuntimeFailure, ValidationError
from .experiments import (
    DESK_N,
    DESK_REFERENCE_N,
    FULL_N,
    FULL_REFERENCE_N,
    REPORTED_EPSILON,
    advection_source,
    auto_epsilon,
    burgers_source,
    converge,
    exact_reference,
    make_problem,
    max_source_error_on_P,
    particle_grid,
    partition_domain,
    self_convergence_reference,
    solve,
)
from .regularizer import (
    ParticleField,
    RegularizedSource,
    newton_cotes_weights,
    optimal_epsilon,
    regularize,
    substep_lengths,
    validate_exactness_constraint,
)
from .spectral import SpectralOperator, gauss_lobatto_nodes

SOURCES = {"advection": advection_source, "burgers": burgers_source}
DOMAINS = {"advection": (-1.0, 1.0), "burgers": (0.0, 2.0)}
TABLE_M = {"table1": (1, 5, 9, 13, 17), "table2": (5, 9, 13, 17)}
TRUE_WORDS = {"true", "yes", "on"}
FALSE_WORDS = {"false", "no", "off"}


class ArgumentError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(f"{self.prog}: {message}")


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.16e}"


def write_csv(path, header, rows, extra=None):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    if extra:
        for header2, rows2 in extra:
            buf.write("\n")
            writer.writerow(header2)
            for row in rows2:
                writer.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if len(vals) < 2 or min(vals) < 1:
        raise argparse.ArgumentTypeError("need at least two positive integers")
    return vals


def parse_eval_grid(spec):
    """``start:stop:num`` (uniform) or ``gl:N:start:stop`` (Gauss-Lobatto)."""
    parts = spec.split(":")
    try:
        if parts[0] == "gl" and len(parts) == 4:
            return gauss_lobatto_nodes(int(parts[1]), (float(parts[2]), float(parts[3])))
        if len(parts) == 3:
            num = int(parts[2])
            if num < 1:
                raise ValueError
            return np.linspace(float(parts[0]), float(parts[1]), num)
    except ValueError:
        pass
    raise ArgumentError(f"--eval-grid: cannot parse {spec!r} (use start:stop:num or gl:N:start:stop)")


def read_particles(path):
    try:
        data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    except OSError as exc:
        raise ArgumentError(f"--particles: {exc}")
    names = data.dtype.names or ()
    if "position" not in names or "value" not in names:
        raise ArgumentError("--particles: CSV needs 'position' and 'value' columns")
    data = np.atleast_1d(data)
    dens = data["density"] if "density" in names else None
    return data["position"], data["value"], dens


def load_config(path):
    tokens = []
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ArgumentError(f"--config: {exc}")
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ArgumentError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.replace("_", "-") if not key.startswith("-") else key
        if flag in ("--N", "--n"):
            flag = "--N"
        if flag.lower() == "--n-list":
            flag = "--N-list"
        low = value.lower()
        if low in TRUE_WORDS:
            tokens.append(flag)
        elif low not in FALSE_WORDS:
            tokens += [flag, value]
    return tokens


def _add_kernel_args(p, q=True):
    p.add_argument("--m", type=positive_int, required=True, help="vanishing moments")
    p.add_argument("--k", type=nonneg_int, required=True, help="smoothness order")
    if q:
        p.add_argument("--q", type=positive_int, default=2, help="Newton-Cotes sub-steps per panel")
        p.add_argument("--allow-unsafe-q", action="store_true",
                       help="accept q > min(m, k) - 1")


def _add_epsilon_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--epsilon", type=positive_float, help="fixed kernel half-width")
    g.add_argument("--auto-epsilon", action="store_true",
                   help="use the optimal-scaling formula even when a reported value exists")
    p.add_argument("--C", type=positive_float, default=0.5, help="optimal-scaling constant")


def build_parser():
    parser = _Parser(prog="deltareg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="flat key=value file; command-line flags win")
    parser.add_argument("--progress", action="store_true", help="diagnostics on stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("kernel", help="coefficients and condition residuals of P^{m,k}")
    _add_kernel_args(p, q=False)
    p.add_argument("--dump-coeffs", metavar="PATH", help="write the CSV here instead of stdout")

    p = sub.add_parser("regularize", help="evaluate the regularized source of a particle file")
    _add_kernel_args(p)
    _add_epsilon_args(p)
    p.add_argument("--particles", required=True, metavar="PATH",
                   help="CSV with columns position,value[,density]")
    p.add_argument("--eval-grid", required=True, metavar="SPEC",
                   help="start:stop:num or gl:N:start:stop")
    p.add_argument("--mode", choices=("samples", "analytic"), default="samples")
    p.add_argument("--exact", choices=tuple(SOURCES),
                   help="built-in analytic source (enables exact error and analytic mode)")
    p.add_argument("--domain", type=float, nargs=2, metavar=("A", "B"),
                   help="domain used for region tags (default: evaluation grid span)")
    p.add_argument("--out", default="-", metavar="PATH")

    for name in ("solve", "converge"):
        p = sub.add_parser(name, help="spectral solve" if name == "solve" else "convergence study")
        p.add_argument("--problem", choices=tuple(SOURCES), required=True)
        _add_kernel_args(p)
        _add_epsilon_args(p)
        p.add_argument("--no-regularization", action="store_true",
                       help="use the raw singular source at the nodes")
        p.add_argument("--no-source", action="store_true", help="homogeneous problem")
        p.add_argument("--filter-order", type=nonneg_int, default=None,
                       help="exponential filter order (default 12 for burgers, off for advection; 0 = off)")
        p.add_argument("--n-particles", type=positive_int, default=None,
                       help="particle intervals N_p (default 2001 advection, 1999 burgers)")
        p.add_argument("--reference-N", type=positive_int, default=None,
                       help="fine-grid reference resolution for burgers")
        p.add_argument("--out", default="-", metavar="PATH")
        if name == "solve":
            p.add_argument("--N", type=positive_int, required=True)
            p.add_argument("--dump-operator", metavar="PATH",
                           help="write nodes and differentiation matrix as CSV")
            p.add_argument("--t-final", type=positive_float, default=None,
                           help="stop early for a debugging snapshot (default 2)")
        else:
            p.add_argument("--N-list", type=int_list, default=None)
            p.add_argument("--full", action="store_true", help="full-scale N = 100..400")
            p.add_argument("--workers", type=positive_int, default=1)

    for name in ("table1", "table2"):
        p = sub.add_parser(name, help=f"reproduce the {'advection' if name == 'table1' else 'Burgers'} table")
        p.add_argument("--full", action="store_true", help="full-scale N = 100..400")
        p.add_argument("--m-list", type=int_list, default=None)
        p.add_argument("--k", type=nonneg_int, default=4)
        p.add_argument("--workers", type=positive_int, default=1)
        p.add_argument("--out", default="-", metavar="PATH")
    return parser


def _expand_config(argv):
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    tokens = load_config(known.config)
    commands = {"kernel", "regularize", "solve", "converge", "table1", "table2"}
    cfg_command = None
    if "--command" in tokens:
        i = tokens.index("--command")
        cfg_command = tokens[i + 1]
        del tokens[i : i + 2]
    idx = next((i for i, t in enumerate(argv) if t in commands), None)
    if idx is None:
        if cfg_command is None:
            return argv
        return argv + [cfg_command] + tokens
    return argv[: idx + 1] + tokens + argv[idx + 1 :]


def _log(args, msg):
    if getattr(args, "progress", False):
        print(msg, file=sys.stderr, flush=True)


def _check_q(args):
    if not validate_exactness_constraint(args.m, args.k, args.q):
        msg = (f"q={args.q} violates q <= min(m, k) - 1 with m={args.m}, k={args.k}"
               " (needs m, k >= 2)")
        if not args.allow_unsafe_q:
            raise ValidationError(msg + "; pass --allow-unsafe-q to run anyway")
        print(f"warning: {msg}", file=sys.stderr)


def _epsilon_for(args, particles):
    if args.epsilon is not None:
        return args.epsilon
    if not args.auto_epsilon and args.k == 4 and args.q == 2 and args.m in REPORTED_EPSILON:
        return REPORTED_EPSILON[args.m]
    return auto_epsilon(particles, args.m, args.q, args.C)


def cmd_kernel(args):
    kernel = build_kernel(KernelSpec(args.m, args.k))
    report = verify_conditions(kernel)
    rows = [(p, c.numerator, c.denominator, float(c))
            for p, c in enumerate(kernel.monomial_coeffs()) if p % 2 == 0]
    rows += [("mass_residual", None, None, report.mass),
             ("moment_residual", None, None, report.moments),
             ("boundary_residual", None, None, report.boundary)]
    write_csv(args.dump_coeffs, ("power", "numerator", "denominator", "float_value"), rows)
    if args.dump_coeffs:
        print(f"P^{{{args.m},{args.k}}}: degree {kernel.degree}, max residual {report.max_residual:.3e}")
    return 0


def cmd_regularize(args):
    _check_q(args)
    pos, val, dens = read_particles(args.particles)
    fn = SOURCES.get(args.exact)
    if args.mode == "analytic" and fn is None:
        raise ArgumentError("--mode analytic needs --exact to supply the source function")
    particles = ParticleField(pos, val, densities=dens, source_fn=fn)
    rule = newton_cotes_weights(args.q)
    if args.epsilon is not None:
        eps = args.epsilon
    else:
        eps = optimal_epsilon(args.m, args.q, substep_lengths(particles, args.q), args.C)
    src = RegularizedSource(KernelSpec(args.m, args.k), eps, particles, args.mode, rule)
    x = parse_eval_grid(args.eval_grid)
    s_tilde = regularize(src, rule, x)
    domain = tuple(args.domain) if args.domain else (float(x.min()), float(x.max()))
    try:
        tags = partition_domain(particles, eps, domain).classify(x)
    except ValidationError:
        tags = np.full(x.shape, "R")
    exact = fn(x) if fn is not None else None
    rows = []
    for i, xv in enumerate(x):
        e = None if exact is None else exact[i]
        rows.append((xv, s_tilde[i], e, None if e is None else abs(s_tilde[i] - e), str(tags[i])))
    write_csv(args.out, ("x", "s_tilde", "s_exact", "abs_error", "region"), rows)
    _log(args, f"epsilon = {eps:.6e}")
    return 0


def _problem_from_args(args):
    filter_order = args.filter_order
    if filter_order is None:
        filter_order = 12 if args.problem == "burgers" else None
    filter_order = filter_order or None
    particles = particle_grid(args.problem, args.n_particles)
    eps = _epsilon_for(args, particles)
    if not (args.no_regularization or args.no_source):
        _check_q(args)
    problem = make_problem(args.problem, m=args.m, k=args.k, epsilon=eps, q=args.q,
                           regularize=not args.no_regularization, source_on=not args.no_source,
                           filter_order=filter_order, n_p=args.n_particles)
    if getattr(args, "t_final", None) is not None:
        problem.t_final = args.t_final
    return problem, particles, eps


def _reference(args, problem, n_max):
    exact = exact_reference(problem)
    if exact is not None:
        return exact
    n_ref = args.reference_N
    if n_ref is None:
        n_ref = FULL_REFERENCE_N if getattr(args, "full", False) or n_max >= DESK_REFERENCE_N else DESK_REFERENCE_N
    if n_ref <= n_max:
        raise ValidationError(f"--reference-N ({n_ref}) must exceed the largest N ({n_max})")
    _log(args, f"computing reference solution on N = {n_ref}")
    return self_convergence_reference(problem, n_ref)


def cmd_solve(args):
    problem, particles, eps = _problem_from_args(args)
    op = SpectralOperator(args.N, problem.domain, problem.filter_order)
    if args.dump_operator:
        rows = [(op.nodes[i], *op.diff_matrix[i]) for i in range(args.N + 1)]
        write_csv(args.dump_operator, ["x"] + [f"D{j}" for j in range(args.N + 1)], rows)
    start = time.time()
    progress = None
    if args.progress:
        def progress(n, t):
            if n % 10000 == 0:
                _log(args, f"step {n} t={t:.5f} ({time.time() - start:.1f}s)")
    u = solve(problem, op, progress=progress)
    ref = None
    if problem.kind == "advection" or problem.source is None or args.reference_N:
        ref = _reference(args, problem, args.N)(op.nodes)
    try:
        tags = partition_domain(particles, eps, problem.domain).classify(op.nodes)
    except ValidationError:
        tags = np.full(op.nodes.shape, "Q")
    rows = []
    for i, x in enumerate(op.nodes):
        r = None if ref is None else ref[i]
        rows.append((x, u[i], r, None if r is None else abs(u[i] - r), str(tags[i])))
    write_csv(args.out, ("x", "u_num", "u_ref", "abs_error", "region"), rows)
    return 0


def _study(args, problem, eps, particles, N_values, workers=1):
    reference = _reference(args, problem, max(N_values))
    progress = (lambda N: _log(args, f"N = {N} done")) if args.progress else None
    return converge(problem, N_values, reference=reference, partition_eps=eps,
                    particles=particles, workers=workers, progress=progress)


def cmd_converge(args):
    problem, particles, eps = _problem_from_args(args)
    N_values = args.N_list or list(FULL_N if args.full else DESK_N)
    report = _study(args, problem, eps, particles, N_values, args.workers)
    summary = [(report.order_P, report.order_Q, report.residual_P, report.residual_Q, eps)]
    write_csv(args.out, ("N", "error_P", "error_Q"), report.rows(),
              extra=[(("order_P", "order_Q", "residual_P", "residual_Q", "epsilon"), summary)])
    if args.out not in (None, "-"):
        print(f"order_P={report.order_P:.3f} order_Q={report.order_Q:.3f} epsilon={eps:.4g}")
    return 0


def cmd_table(args):
    kind = "advection" if args.command == "table1" else "burgers"
    m_list = args.m_list or TABLE_M[args.command]
    N_values = list(FULL_N if args.full else DESK_N)
    rows = []
    for m in m_list:
        sub = argparse.Namespace(
            problem=kind, m=m, k=args.k, q=2, epsilon=None, auto_epsilon=False, C=0.5,
            no_regularization=False, no_source=False, allow_unsafe_q=True, n_particles=None,
            filter_order=None, reference_N=None, full=args.full, progress=args.progress,
        )
        if not validate_exactness_constraint(m, args.k, 2):
            print(f"warning: m={m}, k={args.k}, q=2 violates q <= min(m, k) - 1; "
                  "reproduced as reported", file=sys.stderr)
        problem, particles, eps = _problem_from_args(sub)
        exact = SOURCES[kind]
        err = max_source_error_on_P(problem.source, exact)
        report = _study(sub, problem, eps, particles, N_values, args.workers)
        rows.append((m, eps, float(np.log10(err)), report.order_P, report.order_Q))
        _log(args, f"m={m}: order_P={report.order_P:.2f} order_Q={report.order_Q:.2f}")
    write_csv(args.out, ("m", "epsilon", "max_log10_err_P", "order_P", "order_Q"), rows)
    return 0


COMMANDS = {
    "kernel": cmd_kernel,
    "regularize": cmd_regularize,
    "solve": cmd_solve,
    "converge": cmd_converge,
    "table1": cmd_table,
    "table2": cmd_table,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_expand_config(argv))
        if not args.command:
            parser.print_help(sys.stderr)
            return 1
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeFailure as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

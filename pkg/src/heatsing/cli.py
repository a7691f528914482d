"""Command line front end.

Every run writes its artifacts and a ``manifest.json`` into one directory:
``--out`` if given, else ``$HEATSING_OUTPUT/<command>-<config hash>`` (the
hash makes identical configs land in the same place). Exit codes: 0
success, 1 usage or solver error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import io
from .model import AbsorptionParams, kernel_power_integral

EXIT_OK, EXIT_ERROR, EXIT_VERIFY = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2, which is reserved here for failed verification."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _probes(text: str) -> list:
    out = []
    for item in str(text).split(","):
        center, eps = item.split(":")
        out.append((float(center), float(eps)))
    return out


def _add_params(p):
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--dim", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heatsing", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def command(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", default=None, help="JSON file with option values (flags override)")
        p.add_argument("--out", default=None, help="output directory")
        return p

    p = command("profile", "self-similar profiles W, V, Z1, Z2")
    _add_params(p)
    p.add_argument("--kind", choices=["W", "V", "Z1", "Z2"], default="V")
    p.add_argument("--method", choices=["shooting", "variational"], default="shooting")
    p.add_argument("--r-max", type=float, default=None)
    p.add_argument("--n-nodes", type=int, default=None)
    p.add_argument("--window", type=_floats, default=None, help="fit window lo,hi")

    p = command("solve", "radial initial-boundary value problem")
    _add_params(p)
    p.add_argument("--datum", choices=["dirac", "ball", "zero"], default="dirac")
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--t0", type=float, default=1e-3)
    p.add_argument("--radius", type=float, default=0.5)
    p.add_argument("--height", type=float, default=1.0)
    p.add_argument("--T", type=float, default=0.25)
    p.add_argument("--r-max", type=float, default=4.0)
    p.add_argument("--n", type=int, default=401)
    p.add_argument("--stretch", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=400)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--scheme", choices=["strang", "implicit"], default="strang")
    p.add_argument("--boundary-value", type=float, default=0.0)
    p.add_argument("--record", type=_floats, default=None, help="comma separated snapshot times")

    p = command("trace", "initial trace of a plateau cap schedule")
    _add_params(p)
    p.add_argument("--radius", type=float, default=0.5)
    p.add_argument("--caps", type=_floats, default=[10.0, 100.0, 1000.0])
    p.add_argument("--probes", type=_probes, default=[(0.0, 0.25), (2.0, 0.5)])
    p.add_argument("--T", type=float, default=1e-2)
    p.add_argument("--record", type=_floats, default=[1e-6, 2e-6, 1e-4, 1e-2])
    p.add_argument("--r-max", type=float, default=6.0)
    p.add_argument("--n", type=int, default=1201)
    p.add_argument("--steps", type=int, default=400)
    p.add_argument("--growth-threshold", type=float, default=0.5)

    p = command("verify", "named acceptance suites")
    p.add_argument("--suite", default="all", help="suite name, or 'all'")

    p = command("kernel", "space-time integrability of heat kernel powers")
    _add_params(p)
    p.add_argument("--r-power", type=float, default=2.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--t-min", type=float, default=1e-8)
    p.add_argument("--levels", type=int, default=6)

    p = command("ko", "Keller-Osserman test and psi barrier for an absorption h")
    p.add_argument("--power", type=float, default=None, help="h(s) = s^power")
    p.add_argument("--table", default=None, help="CSV with columns s,h")
    p.add_argument("--anchor", type=float, default=0.0)
    p.add_argument("--s-max", type=float, default=2.0**200)
    p.add_argument("--numeric", action="store_true")
    p.add_argument("--psi", type=_floats, default=None, help="b,t to also evaluate psi(t)")

    p = command("sweep", "independent runs from a config list, on a worker pool")
    p.add_argument("--workers", type=int, default=1)
    return parser


_SKIP = {"config", "out", "command"}


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise UsageError(f"unknown command {name!r}")


def _option_table(sub) -> dict:
    """dest -> option string for every option of a subcommand."""
    return {a.dest: a.option_strings[0] for a in sub._actions if a.option_strings and a.dest not in ("help",)}


def _config_to_argv(sub, config: dict, source: str) -> list:
    """Translate a config mapping into argv, rejecting unknown keys."""
    table = _option_table(sub)
    argv = []
    for key, value in config.items():
        dest = key.replace("-", "_")
        if dest in _SKIP or dest not in table:
            raise UsageError(f"{source}: unknown key {key!r}; allowed: {', '.join(sorted(set(table) - _SKIP))}")
        flag = table[dest]
        action = next(a for a in sub._actions if a.dest == dest)
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(flag)
            continue
        if isinstance(value, list):
            if value and isinstance(value[0], (list, tuple)):
                value = ",".join(f"{a}:{b}" for a, b in value)
            else:
                value = ",".join(str(v) for v in value)
        argv += [flag, str(value)]
    return argv


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: top level must be an object")
    return data


def parse(argv: list) -> tuple:
    """Return (namespace, config echo). Config values sit under explicit flags."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
    sub = _subparser(parser, args.command)
    config = {}
    if args.config:
        config = _load_config(args.config)
        if args.command == "sweep":
            config = {k: v for k, v in config.items() if k != "runs"}
        cfg_argv = _config_to_argv(sub, config, args.config)
        args = parser.parse_args([args.command] + cfg_argv + argv[1:])
    echo = {k: v for k, v in vars(args).items() if k not in ("config", "out")}
    return args, echo


def _out_dir(args, echo: dict) -> Path:
    if args.out:
        return Path(args.out)
    digest = hashlib.sha1(json.dumps(io.jsonable(echo), sort_keys=True).encode()).hexdigest()[:10]
    return io.output_root() / f"{args.command}-{digest}"


# ---------------------------------------------------------------- commands


def _cmd_profile(args, out: Path) -> tuple:
    from .profiles import default_tail_window, fit_asymptotics, solve_linear_z, solve_V_shooting, solve_V_variational, solve_W

    params = AbsorptionParams(args.alpha, args.q, args.dim)
    kw = {}
    if args.r_max is not None:
        kw["r_max"] = args.r_max
    if args.n_nodes is not None:
        kw["n_nodes"] = args.n_nodes
    if args.kind == "W":
        prof = solve_W(AbsorptionParams(args.alpha, args.q, 1), **kw)
    elif args.kind == "V":
        prof = (solve_V_shooting if args.method == "shooting" else solve_V_variational)(params, **kw)
    else:
        prof = solve_linear_z(params, args.kind, **kw)
    window = tuple(args.window) if args.window else default_tail_window(prof)
    model = "algebraic" if args.kind == "Z1" else "gaussian"
    fit = fit_asymptotics(prof, window, model=model)
    files = [
        io.atomic_write(out / "profile.csv", prof.to_csv()),
        io.atomic_write(out / "profile.json", prof.to_json() + "\n"),
        io.write_json(out / "fit.json", {"schema": "heatsing.fit/1", **fit.as_dict()}),
    ]
    return EXIT_OK, files, {"fit": fit.as_dict()}


def _cmd_solve(args, out: Path) -> tuple:
    from .parabolic import BallIndicator, Boundary, DiracApprox, RadialGrid, TimeMesh, Zero, default_gamma, solve

    params = AbsorptionParams(args.alpha, args.q, args.dim)
    grid = RadialGrid(args.r_max, args.n, args.stretch)
    datum = {
        "dirac": lambda: DiracApprox(args.mass, args.t0),
        "ball": lambda: BallIndicator(args.radius, args.height),
        "zero": lambda: Zero(),
    }[args.datum]()
    gamma = args.gamma if args.gamma is not None else default_gamma(args.alpha)
    mesh = TimeMesh(datum.start_time, args.T, args.steps, gamma)
    boundary = Boundary("dirichlet", args.boundary_value)
    record = args.record if args.record else "all"
    sol = solve(params, grid, mesh, datum, boundary, record=record, theta=args.theta, scheme=args.scheme)
    run = sol.manifest()
    run["diagnostics"].pop("mesh_times", None)
    files = [
        io.atomic_write(out / "solution.csv", io.solution_csv(sol)),
        io.write_json(out / "run.json", {"schema": "heatsing.run/1", **run}),
    ]
    return EXIT_OK, files, {}


def _cmd_trace(args, out: Path) -> tuple:
    from .parabolic import BallIndicator, RadialGrid, TimeMesh, solve
    from .trace import classify_and_extract, moment_trajectory

    params = AbsorptionParams(args.alpha, args.q, args.dim)
    grid = RadialGrid(args.r_max, args.n)
    mesh = TimeMesh(0.0, args.T, args.steps, 3.0)
    record = sorted(set([0.0] + [t for t in args.record if t <= args.T]))
    runs = [solve(params, grid, mesh, BallIndicator(args.radius, cap), record=record) for cap in args.caps]
    report = classify_and_extract(runs, args.probes, growth_threshold=args.growth_threshold)
    files = [io.atomic_write(out / "trace.json", io.dumps(report.as_dict()))]
    positive = [t for t in record if t > 0]
    for i, (center, eps) in enumerate(args.probes):
        traj = moment_trajectory(runs[-1], eps, positive, center)
        files.append(io.atomic_write(out / f"trajectory-{i}.csv", traj.to_csv()))
    return EXIT_OK, files, {"counts": report.counts()}


def _cmd_verify(args, out: Path) -> tuple:
    from .suites import SUITES, run_suite

    names = list(SUITES) if args.suite == "all" else [args.suite]
    for name in names:
        if name not in SUITES:
            raise UsageError(f"unknown suite {name!r}; choose from: {', '.join(SUITES)}, all")
    files, lines, ok = [], [], True
    for name in names:
        res = run_suite(name)
        print(res.line(), flush=True)
        lines.append(res.line())
        ok &= res.passed
        files.append(io.write_json(out / f"suite-{name}.json", res.as_dict()))
    return (EXIT_OK if ok else EXIT_VERIFY), files, {"summary": lines}


def _cmd_kernel(args, out: Path) -> tuple:
    params = AbsorptionParams(args.alpha, args.q, args.dim)
    res = kernel_power_integral(params, args.r_power, args.T, args.t_min, args.levels)
    record = {
        "schema": "heatsing.kernel/1",
        "value": res.value,
        "verdict": res.verdict,
        "refinements": res.refinements,
        "growths": res.growths,
        "increment_ratios": res.increment_ratios,
        "q_crit": params.q_crit,
    }
    return EXIT_OK, [io.write_json(out / "kernel.json", record)], {"verdict": res.verdict}


def _read_table(path: str):
    import numpy as np

    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None or set(data.dtype.names) != {"s", "h"}:
        raise UsageError(f"{path}: expected columns s,h")
    return data["s"], data["h"]


def _cmd_ko(args, out: Path) -> tuple:
    from .barriers import AbsorptionProfile, keller_osserman, psi_inverse, superadditivity_spot_check

    if (args.power is None) == (args.table is None):
        raise UsageError("ko: give exactly one of --power or --table")
    if args.power is not None:
        prof = AbsorptionProfile(power=args.power, anchor=args.anchor)
    else:
        s, h = _read_table(args.table)
        prof = AbsorptionProfile(s_table=s, h_table=h, anchor=args.anchor)
    res = keller_osserman(prof, s_max=args.s_max, numeric=args.numeric)
    record = {"schema": "heatsing.ko/1", **res.as_dict()}
    if args.table is not None:
        record["superadditivity"] = superadditivity_spot_check(prof)
    if args.psi:
        if len(args.psi) != 2:
            raise UsageError("--psi takes b,t")
        b, t = args.psi
        record["psi"] = {"b": b, "t": t, "value": psi_inverse(prof, b, t)}
    # after the evaluations, so a table records whether it was extrapolated
    record["profile"] = prof.as_dict()
    return EXIT_OK, [io.write_json(out / "ko.json", record)], {"verdict": res.verdict}


def _sweep_worker(job: tuple) -> tuple:
    index, entry, root = job
    entry = dict(entry)
    command = entry.pop("command", None)
    if command is None or command == "sweep":
        return index, EXIT_ERROR, "each sweep run needs a command other than sweep"
    out = Path(root) / f"run-{index:03d}"
    parser = build_parser()
    try:
        sub = _subparser(parser, command)
        argv = [command] + _config_to_argv(sub, entry, f"runs[{index}]") + ["--out", str(out)]
    except UsageError as exc:
        return index, EXIT_ERROR, str(exc)
    code = run(argv, quiet=True)
    return index, code, str(out)


def _cmd_sweep(args, out: Path) -> tuple:
    if not args.config:
        raise UsageError("sweep needs --config with a 'runs' list")
    runs = _load_config(args.config).get("runs")
    if not isinstance(runs, list) or not all(isinstance(r, dict) for r in runs):
        raise UsageError(f"{args.config}: 'runs' must be a list of objects")
    jobs = [(i, r, str(out)) for i, r in enumerate(runs)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    results.sort()
    table = [{"index": i, "exit_code": c, "detail": d} for i, c, d in results]
    code = max((c for _, c, _ in results), default=EXIT_OK)
    return code, [io.write_json(out / "sweep.json", {"schema": "heatsing.sweep/1", "runs": table})], {}


COMMANDS = {
    "profile": _cmd_profile,
    "solve": _cmd_solve,
    "trace": _cmd_trace,
    "verify": _cmd_verify,
    "kernel": _cmd_kernel,
    "ko": _cmd_ko,
    "sweep": _cmd_sweep,
}


def run(argv: list | None = None, quiet: bool = False) -> int:
    """Execute one command line; returns the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args, echo = parse(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = _out_dir(args, echo)
    start = time.perf_counter()
    try:
        code, files, extra = COMMANDS[args.command](args, out)
        status = {EXIT_OK: "ok", EXIT_VERIFY: "verification-failed"}.get(code, "error")
        message = None
    except UsageError as exc:
        code, files, extra, status, message = EXIT_ERROR, [], {}, "usage-error", str(exc)
    except (ValueError, RuntimeError, ArithmeticError, KeyError) as exc:
        code, files, extra, status, message = EXIT_ERROR, [], {}, "error", f"{type(exc).__name__}: {exc}"
    wall = time.perf_counter() - start
    if message:
        print(f"error: {message}", file=sys.stderr)
        extra = {"error": message}
    io.write_json(out / "manifest.json", io.manifest(args.command, echo, files, wall, status, extra))
    if not quiet:
        print(f"{args.command}: {status}, artifacts in {out}")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

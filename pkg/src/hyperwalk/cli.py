"""Command-line entry point: ``hyperwalk <subcommand> [options]``.

Subcommands write CSV or JSON.  Every option can also come from a plain
``key=value`` file given with ``--config``; command-line flags win.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 inconclusive verdict under ``--strict``.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import asymptotic as asy
from . import flows as fl
from . import pendulum as pd

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INCONCLUSIVE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


def _complexes(text: str) -> list[complex]:
    return [complex(v) for v in str(text).replace(" ", "").split(",") if v]


def _g(v: float) -> str:
    return f"{v:.17g}"


def load_config(path: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# -- parser ---------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file supplying defaults for any flag")
    p.add_argument("--out", "-o", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="output format")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    p.add_argument("--strict", action="store_true", help="exit 4 on an inconclusive verdict")


def _physics(p: argparse.ArgumentParser) -> None:
    p.add_argument("--g", type=float, default=1.0, help="gravity [length/time^2]")
    p.add_argument("--ell", type=float, default=1.0, help="rod length [length]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperwalk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("walk", help="one walk to CSV (columns n,t,re,im)")
    _common(p)
    _physics(p)
    p.add_argument("--field", choices=("F", "E", "H", "zero"), default="F",
                   help="F nonlinear, E linearized, H rotation, zero the null field")
    p.add_argument("--amplitude", type=float, default=0.1, help="release angle a [rad]; z0 = a + 0i")
    p.add_argument("--lambda", dest="mesh", type=float, help="mesh [time]")
    p.add_argument("--n-per-period", type=int, default=10_000,
                   help="steps per linear period, used when --lambda is absent")
    p.add_argument("--t-final", type=float, help="horizon [time] (default: one linear period)")
    p.add_argument("--steps", type=int, help="step count (overrides --t-final)")
    p.add_argument("--stride", type=int, help="record every N steps")

    p = sub.add_parser("compare", help="walk deviation, Gronwall envelope and power-law fit over a sweep")
    _common(p)
    _physics(p)
    p.add_argument("--pair", choices=("E-H", "F-E", "F-H"), default="E-H",
                   help="fields compared; the second supplies the Lipschitz constant")
    p.add_argument("--sweep", choices=("lambda", "amplitude"), default="lambda", help="swept scale")
    p.add_argument("--lambdas", type=_floats, default="1e-2,1e-3,1e-4,1e-5",
                   help="meshes [time] for --sweep lambda")
    p.add_argument("--amplitudes", type=_floats, default="0.2,0.1,0.05,0.025",
                   help="amplitudes [rad] for --sweep amplitude")
    p.add_argument("--amplitude", type=float, default=0.1, help="fixed amplitude [rad] for --sweep lambda")
    p.add_argument("--lambda", dest="mesh", type=float, default=1e-5, help="fixed mesh [time] for --sweep amplitude")
    p.add_argument("--t-final", type=float, help="horizon [time] (default 10, or 3 linear periods for --sweep amplitude)")

    p = sub.add_parser("period", help="small-oscillation period table and amplitude fit")
    _common(p)
    _physics(p)
    p.add_argument("--amplitudes", type=_floats, default=",".join(map(str, pd.DEFAULT_AMPLITUDES)),
                   help="amplitudes [rad]")
    p.add_argument("--n-per-period", type=_floats, default=",".join(map(str, pd.DEFAULT_N_PER_PERIOD)),
                   help="steps per linear period for the mesh extrapolation (each >= 1e4)")
    p.add_argument("--n-periods", type=int, default=4, help="oscillations averaged per walk")
    p.add_argument("--compare-lambda", type=float, help="mesh [time] for the F-vs-E sweep")
    p.add_argument("--deviation-lambdas", type=_floats, default="1e-2,1e-3,1e-4",
                   help="meshes [time] for the E-vs-H sweep")

    p = sub.add_parser("series", help="rescaled adequality of the displacements and series identities")
    _common(p)
    p.add_argument("--K", type=int, default=asy.DEFAULT_TRUNCATION, help="truncation order")
    p.add_argument("--Z", type=_complexes, default="1,1j,0.6+0.8j", help="rescaled states Z, |Z| <= 1")
    p.add_argument("--omega", type=float, default=1.0, help="angular frequency [1/time]")
    p.add_argument("--samples", type=int, default=100, help="random inputs for the identity check")

    p = sub.add_parser("gronwall", help="envelope (eta/K)(exp(K t) - 1) on a time grid")
    _common(p)
    p.add_argument("--eta", type=float, help="per-step discrepancy coefficient [length/time] (required)")
    p.add_argument("--K", type=float, help="Lipschitz constant [1/time] (required)")
    p.add_argument("--t", type=_floats, default="0,1,2,5,10", help="times [time]")
    return parser


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = load_config(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for action in subparser._actions:
            if isinstance(action, argparse._StoreTrueAction) and action.dest in cfg:
                cfg[action.dest] = cfg[action.dest].lower() in ("1", "true", "yes", "on")
        subparser.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


# -- subcommands ----------------------------------------------------------


def _params(args) -> pd.PendulumParams:
    return pd.PendulumParams(args.g, args.ell)


def cmd_walk(args) -> str:
    params = _params(args)
    if args.field != "zero":
        pd.check_amplitude(args.amplitude)
    mesh = args.mesh or pd.choose_lambda(params.omega, args.n_per_period)
    F, E, H = pd.make_fields(params, mesh)
    if args.field == "zero":
        field = fl.PrevectorField.from_field(fl.VectorField(lambda z: 0j, 0.0, name="zero"), mesh)
    else:
        field = {"F": F, "E": E, "H": H}[args.field]
    if args.steps is not None:
        steps = args.steps
    else:
        steps = fl.steps_for(args.t_final if args.t_final is not None else params.linear_period, mesh)
    traj = fl.walk(field, complex(args.amplitude, 0), steps, record_stride=args.stride)
    if traj.terminated_early:
        raise fl.WalkTerminated(traj.reason)
    if args.format == "json":
        return json.dumps({"mesh": mesh, "field": args.field, "samples": [
            {"n": int(n), "t": float(t), "re": z.real, "im": z.imag}
            for n, t, z in zip(traj.n, traj.t, traj.z)]}, indent=1) + "\n"
    buf = io.StringIO()
    fl.write_trajectory_csv(traj, buf)
    return buf.getvalue()


def _report_csv(report: fl.AdequalityReport) -> str:
    lines = ["scale,sup_abs,sup_rel,eta,K,envelope,violations"]
    for r in report.rows:
        lines.append(",".join([_g(r.scale), _g(r.sup_abs), _g(r.sup_rel), _g(r.eta),
                               _g(r.lipschitz_K), _g(r.envelope), str(r.violations)]))
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> tuple[str, str | None, str]:
    params = _params(args)
    first, second = args.pair.split("-")

    def pick(mesh):
        F, E, H = pd.make_fields(params, mesh)
        fields = {"F": F, "E": E, "H": H}
        return fields[first], fields[second]

    if args.sweep == "lambda":
        pd.check_amplitude(args.amplitude)
        t_final = args.t_final if args.t_final is not None else 10.0
        values = args.lambdas

        def case(lam):
            return (*pick(lam), complex(args.amplitude, 0))
    else:
        for a in args.amplitudes:
            pd.check_amplitude(a)
        t_final = args.t_final if args.t_final is not None else 3 * params.linear_period
        values = args.amplitudes

        def case(a):
            return (*pick(args.mesh), complex(a, 0))

    if len(values) != len(set(values)):
        raise ConfigError("sweep values must be distinct")
    if not t_final > 0:
        raise ConfigError("t-final must be positive")
    if args.sweep == "lambda" and not all(v > 0 for v in values):
        raise ConfigError("meshes must be positive")
    if args.sweep == "amplitude" and not args.mesh > 0:
        raise ConfigError("mesh must be positive")
    report = fl.adequality_sweep(args.sweep, values, case, t_final, label=args.pair)
    if report.violations:
        raise ArithmeticError(f"Gronwall envelope violated in {report.violations} sample(s)")
    summary = json.dumps(report.to_json(), indent=1) + "\n"
    if args.format == "json":
        return summary, None, report.verdict
    return _report_csv(report), summary, report.verdict


PERIOD_HEADER = "a,lambda,T_measured,T_oracle,T_linear,abs_dev,rel_dev,field"


def cmd_period(args) -> tuple[str, str | None, str]:
    report = pd.small_oscillation_report(
        amplitudes=args.amplitudes, params=_params(args),
        n_per_period=[int(n) for n in args.n_per_period], n_periods=args.n_periods,
        compare_mesh=args.compare_lambda, deviation_meshes=args.deviation_lambdas,
    )
    lines = [PERIOD_HEADER]
    for r in report.rows:
        lines.append(",".join([_g(r.a), _g(r.mesh), _g(r.T_measured), _g(r.T_oracle), _g(r.T_linear),
                               _g(r.abs_dev), _g(r.rel_dev), r.field]))
    table = "\n".join(lines) + "\n"
    summary = report.summary()
    if args.format == "json":
        rows = [dict(zip(PERIOD_HEADER.split(","), line.split(","))) for line in lines[1:]]
        return json.dumps({"rows": rows, **summary}, indent=1) + "\n", None, report.verdict
    return table, json.dumps(summary, indent=1) + "\n", report.verdict


def cmd_series(args) -> tuple[str, str]:
    rows = pd.rescaled_adequality_check(args.Z, args.K, args.omega)
    crude = pd.rescaled_adequality_check([1.0], args.K, args.omega, amplitude=1.0)[0]
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.samples):
        s = asy.random_finite(rng, args.K)
        resid = asy.sin(s) * asy.sin(s) + asy.cos(s) * asy.cos(s) - 1
        worst = max([worst, *(abs(c) for c in resid.coeffs)])
    eps = asy.epsilon(args.K)
    sinc = asy.sin(eps) / eps
    ok = all(r.adequal and abs(r.order1) <= 1e-12 for r in rows) and not crude.adequal and worst <= 1e-12
    if args.format == "json":
        doc = {
            "rows": [{"Z": [r.Z.real, r.Z.imag], "ratio": str(r.ratio),
                      "order1": [r.order1.real, r.order1.imag], "order2": [r.order2.real, r.order2.imag],
                      "adequal": r.adequal} for r in rows],
            "appreciable_amplitude": {"amplitude": 1.0, "ratio": str(crude.ratio), "adequal": crude.adequal},
            "sin_over_eps": str(sinc),
            "pythagorean_max_residual": worst,
            "samples": args.samples,
        }
        return json.dumps(doc, indent=1) + "\n", "adequal_trend" if ok else "not_adequal"
    out = ["# delta_F(eps Z) / delta_E(eps Z)"]
    for r in rows:
        out.append(f"Z={r.Z}: {r.ratio}   adequal to 1: {r.adequal}")
    out.append(f"# amplitude 1 in place of eps, Z=1: ratio {crude.ratio}   adequal to 1: {crude.adequal}")
    out.append(f"# sin(eps)/eps = {sinc}")
    out.append(f"# max |coeff| of sin^2+cos^2-1 over {args.samples} random inputs: {worst:.3e}")
    return "\n".join(out) + "\n", "adequal_trend" if ok else "not_adequal"


def cmd_gronwall(args) -> str:
    if args.eta is None or args.K is None:
        raise ConfigError("gronwall needs --eta and --K")
    ts = sorted(args.t)
    bounds = [fl.gronwall_envelope(args.eta, args.K, t) for t in ts]
    if args.format == "json":
        return json.dumps([{"t": t, "bound": b} for t, b in zip(ts, bounds)], indent=1) + "\n"
    return "t,bound\n" + "".join(f"{_g(t)},{_g(b)}\n" for t, b in zip(ts, bounds))


# -- output ---------------------------------------------------------------


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, main: str, summary: str | None = None) -> None:
    if args.out:
        out = Path(args.out)
        _write_atomic(out, main)
        if summary is not None:
            _write_atomic(out.with_suffix(".json") if out.suffix != ".json" else out.with_name(out.stem + ".summary.json"), summary)
    else:
        sys.stdout.write(main)
        if summary is not None:
            sys.stdout.write(summary)


def run(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except (ConfigError, OSError) as exc:
        print(f"hyperwalk: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG

    verdict = None
    try:
        if args.command == "walk":
            _emit(args, cmd_walk(args))
        elif args.command == "compare":
            main, summary, verdict = cmd_compare(args)
            _emit(args, main, summary)
        elif args.command == "period":
            main, summary, verdict = cmd_period(args)
            _emit(args, main, summary)
        elif args.command == "series":
            main, verdict = cmd_series(args)
            _emit(args, main)
        elif args.command == "gronwall":
            _emit(args, cmd_gronwall(args))
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, pd.NoOscillationError):
            print(f"hyperwalk: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"hyperwalk: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (fl.WalkTerminated, ArithmeticError, FloatingPointError) as exc:
        print(f"hyperwalk: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    if args.strict and verdict is not None and verdict != "adequal_trend":
        print(f"hyperwalk: verdict {verdict!r}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

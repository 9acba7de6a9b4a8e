"""Command-line entry point.

Tabular commands (flow, phase-diagram, iterations, continuum) write CSV with a
header row, or JSON ``{"command", "columns", "rows"}``. Report commands
(check, qrg) write a JSON object, or ``key,value`` CSV rows. Floats are
printed with 17 significant digits so they round-trip.

Exit codes: 0 success, 1 invalid input, 2 a numerical check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import analysis, oracle, recursion
from .errors import DistillationError, InvalidStateError, OutOfBasinError
from .gates import MAX_DIM, BellIndex, bell_state

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CHECK_FAILED = 2

TABLE_SCHEMA = {
    "type": "object",
    "required": ["command", "columns", "rows"],
    "properties": {
        "command": {"type": "string"},
        "columns": {"type": "array", "items": {"type": "string"}},
        "rows": {
            "type": "array",
            "items": {"type": "array", "items": {"type": ["number", "string", "null"]}},
        },
    },
    "additionalProperties": False,
}

CHECK_SCHEMA = {
    "type": "object",
    "required": ["command", "passed", "dimensions", "seeds", "threshold", "suites"],
    "properties": {
        "command": {"const": "check"},
        "passed": {"type": "boolean"},
        "dimensions": {"type": "array", "items": {"type": "integer"}},
        "seeds": {"type": "integer"},
        "threshold": {"type": "number"},
        "suites": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["max_deviation", "passed"],
                "properties": {"max_deviation": {"type": "number"}, "passed": {"type": "boolean"}},
            },
        },
    },
}

QRG_SCHEMA = {
    "type": "object",
    "required": ["command", "J", "ground_energy", "doublet_overlap", "edge_spin_factor", "coupling_factor"],
    "properties": {
        "command": {"const": "qrg"},
        "J": {"type": "number"},
        "ground_energy": {"type": "number"},
        "doublet_overlap": {"type": "number"},
        "edge_spin_factor": {"type": "number"},
        "coupling_factor": {"type": "number"},
    },
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _json_value(value):
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def render_table(command: str, columns: list[str], rows: list[list], fmt: str) -> str:
    if fmt == "json":
        doc = {"command": command, "columns": columns, "rows": [[_json_value(v) for v in r] for r in rows]}
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows([_fmt(v) for v in r] for r in rows)
    return buf.getvalue()


def render_report(doc: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    buf.write("key,value\n")

    def walk(prefix, obj):
        for key, val in obj.items():
            name = f"{prefix}{key}"
            if isinstance(val, dict):
                walk(name + ".", val)
            elif isinstance(val, list):
                buf.write(f"{name},{' '.join(_fmt(v) for v in val)}\n")
            else:
                buf.write(f"{name},{_fmt(val).lower() if isinstance(val, bool) else _fmt(val)}\n")

    walk("", doc)
    return buf.getvalue()


def parse_dims(text: str) -> list[int]:
    """``"2..5"`` or ``"2,4,10"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            dims = list(range(int(lo), int(hi) + 1))
        else:
            dims = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"cannot parse dimensions {text!r}") from None
    if not dims or min(dims) < 2:
        raise UsageError(f"dimensions must be integers >= 2, got {text!r}")
    return dims


def load_weight_matrix(path: str, tol: float = 1e-9) -> np.ndarray:
    """D x D CSV; normalization is checked to ``tol`` and then made exact."""
    try:
        q = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InvalidStateError(f"cannot read weight matrix from {path}: {exc}") from None
    q = recursion.as_weights(q, tol=tol)
    return q / q.sum()


def load_profile(path: str) -> analysis.ContinuumProfile:
    """One value per line, or ``x,value`` rows; the samples must sit on a uniform [0, 1] grid."""
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InvalidStateError(f"cannot read profile from {path}: {exc}") from None
    return analysis.ContinuumProfile.from_samples(data[:, -1])


def cmd_flow(args) -> tuple[str, int]:
    if args.steps < 0:
        raise UsageError("--steps must be >= 0")
    if args.matrix is not None:
        q = load_weight_matrix(args.matrix)
        D = q.shape[0]
        if args.d is not None and args.d != D:
            raise UsageError(f"--d {args.d} does not match the {D}x{D} matrix")
        traj = recursion.flow(q, args.steps)
        columns = ["step"] + [f"q_{k}_{j}" for k in range(D) for j in range(D)] + ["coincidence_prob"]
        rows = [[r.step, *r.weights.reshape(-1).tolist(), r.coincidence_prob] for r in traj.records]
        return render_table("flow", columns, rows, args.format), EXIT_OK
    if args.f0 is None or args.d is None:
        raise UsageError("flow needs --d and --f0, or --matrix")
    F = args.f0
    recursion.step_isotropic(F, args.d)
    rows = [[0, F, 1.0]]
    for n in range(1, args.steps + 1):
        p = recursion.coincidence_prob_isotropic(F, args.d)
        F = recursion.step_isotropic(F, args.d)
        rows.append([n, F, p])
    return render_table("flow", ["step", "F", "coincidence_prob"], rows, args.format), EXIT_OK


def cmd_phase_diagram(args) -> tuple[str, int]:
    diagram = analysis.phase_diagram(args.resolution, max_iters=args.max_iters)
    rows = [[c.q0, c.q1, c.label] for c in diagram.cells]
    return render_table("phase-diagram", ["q0", "q1", "label"], rows, args.format), EXIT_OK


def _f0_grid(start: float, stop: float, step: float) -> list[float]:
    if step <= 0 or stop < start:
        raise UsageError("need --f0-step > 0 and --f0-stop >= --f0-start")
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def cmd_iterations(args) -> tuple[str, int]:
    dims = parse_dims(args.d)
    rows = []
    for F0 in _f0_grid(args.f0_start, args.f0_stop, args.f0_step):
        row = [F0]
        for D in dims:
            try:
                row.append(recursion.iterations_needed(args.eps, F0, D))
            except OutOfBasinError:
                row.append(None)
        rows.append(row)
    columns = ["F0"] + [f"K_D{D}" for D in dims]
    return render_table("iterations", columns, rows, args.format), EXIT_OK


def cmd_continuum(args) -> tuple[str, int]:
    if args.k < 0:
        raise UsageError("--k must be >= 0")
    profile = load_profile(args.profile) if args.profile else analysis.parabolic_profile(args.n)
    profiles = [analysis.continuum_evolve(profile, k) for k in range(args.k + 1)]
    columns = ["x"] + [f"q{k}" for k in range(args.k + 1)]
    rows = [[x, *vals] for x, *vals in zip(profile.x.tolist(), *(p.values.tolist() for p in profiles))]
    return render_table("continuum", columns, rows, args.format), EXIT_OK


def run_checks(dims: list[int], seeds: int, seed: int = 0, steps: int = 6, zero_fraction: float = 0.0) -> dict:
    """Maximum deviations of the oracle, closed-form and Bell-closure cross-checks."""
    oracle_dev = 0.0
    closed_dev = 0.0
    closure_dev = 0.0
    for D in dims:
        for s in range(seeds):
            rng = np.random.default_rng([seed, D, s])
            w = recursion.random_weights(D, rng, zero_fraction)
            out = oracle.distill_round_oracle(oracle.BipartiteDensity.from_weights(w))
            stepped, p = recursion.step_general(w)
            oracle_dev = max(
                oracle_dev,
                float(np.max(np.abs(oracle.bell_weights(out.post_state) - stepped))),
                abs(out.success_probability - p),
            )
            it = w
            for n in range(1, steps + 1):
                it, _ = recursion.step_general(it)
                closed_dev = max(closed_dev, float(np.max(np.abs(recursion.closed_form_dft(w, n) - it))))
            F0 = float(rng.uniform(0.01, 0.99))
            F = F0
            for n in range(1, steps + 1):
                F = recursion.step_isotropic(F, D)
                closed_dev = max(closed_dev, abs(recursion.closed_form_isotropic(F0, D, n) - F))
        for a in BellIndex.all(D):
            for b in BellIndex.all(D):
                src, tgt = oracle.bcnot_on_bell_pair(a, b)
                expected = np.kron(bell_state(src), bell_state(tgt))
                closure_dev = max(closure_dev, float(np.max(np.abs(oracle.apply_bcnot_to_pair(a, b) - expected))))
    return {
        "oracle_vs_recursion": oracle_dev,
        "closed_form_vs_iteration": closed_dev,
        "bell_closure": closure_dev,
    }


def cmd_check(args) -> tuple[str, int]:
    dims = parse_dims(args.d)
    if max(dims) > MAX_DIM:
        raise UsageError(f"the oracle supports D <= {MAX_DIM}")
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    devs = run_checks(dims, args.seeds, seed=args.seed, steps=args.steps, zero_fraction=args.zero_fraction)
    suites = {name: {"max_deviation": dev, "passed": bool(dev < args.tol)} for name, dev in devs.items()}
    passed = all(s["passed"] for s in suites.values())
    doc = {
        "command": "check",
        "passed": passed,
        "dimensions": dims,
        "seeds": args.seeds,
        "threshold": args.tol,
        "suites": suites,
    }
    return render_report(doc, args.format), EXIT_OK if passed else EXIT_CHECK_FAILED


def cmd_qrg(args) -> tuple[str, int]:
    r = analysis.qrg_demo(args.j)
    doc = {
        "command": "qrg",
        "J": args.j,
        "ground_energy": r.ground_energy,
        "doublet_overlap": r.doublet_overlap,
        "edge_spin_factor": r.edge_spin_factor,
        "coupling_factor": r.coupling_factor,
    }
    return render_report(doc, args.format), EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="quditdistill", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--output", "-o", default=None, help="output path (default: standard output)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("flow", parents=[common], help="iterate the distillation recursion")
    p.add_argument("--d", type=int)
    p.add_argument("--f0", type=float, help="initial fidelity, isotropic noise")
    p.add_argument("--matrix", help="CSV file holding a D x D weight matrix")
    p.add_argument("--steps", type=int, default=5)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("phase-diagram", parents=[common], help="qutrit basins on a simplex grid")
    p.add_argument("--resolution", type=int, default=101)
    p.add_argument("--max-iters", type=int, default=200)
    p.set_defaults(func=cmd_phase_diagram)

    p = sub.add_parser("iterations", parents=[common], help="rounds needed to reach 1 - eps")
    p.add_argument("--d", default="2,4,10")
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--f0-start", type=float, default=0.55)
    p.add_argument("--f0-stop", type=float, default=0.95)
    p.add_argument("--f0-step", type=float, default=0.05)
    p.set_defaults(func=cmd_iterations)

    p = sub.add_parser("continuum", parents=[common], help="continuum-limit density evolution")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--n", type=int, default=1001)
    p.add_argument("--profile", help="CSV of samples (last column) on a uniform [0, 1] grid")
    p.set_defaults(func=cmd_continuum)

    p = sub.add_parser("check", parents=[common], help="cross-validate oracle, recursion and closed forms")
    p.add_argument("--d", default="2..5")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=6)
    p.add_argument("--zero-fraction", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("qrg", parents=[common], help="three-site Heisenberg block")
    p.add_argument("--j", type=float, default=1.0)
    p.set_defaults(func=cmd_qrg)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        text, code = args.func(args)
    except (UsageError, DistillationError) as exc:
        print(f"quditdistill: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())

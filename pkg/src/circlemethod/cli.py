"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 budget
refusal, 4 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
import warnings
from fractions import Fraction
from typing import Any

from . import counting, densities, expsums, invariants
from .document import SystemDocument, parse_system
from .errors import CircleMethodError, InputError
from .forms import FormSystem, polar_form

EXACT = "exact-rational"
APPROX = "float-with-error"


class UsageError(CircleMethodError):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def exact(x) -> dict:
    x = Fraction(x)
    return {"tag": EXACT, "num": str(x.numerator), "den": str(x.denominator)}


def approx(value: float, error: float | None = None) -> dict:
    return {"tag": APPROX, "value": float(value), "error": None if error is None else float(error)}


def _fraction_arg(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _override_arg(text: str) -> tuple[int, int]:
    try:
        d, v = text.split("=")
        return int(d), int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected DEGREE=VALUE, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("input", nargs="?", default="-", help="system document path, or - for stdin")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--budget", type=int, default=None)
    common.add_argument("--json", action="store_true", help="JSON report instead of CSV")
    common.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")

    dens = _Parser(add_help=False)
    dens.add_argument("--p-max", type=int, default=50)
    dens.add_argument("--k-max", type=int, default=densities.DEFAULT_K_MAX)
    dens.add_argument("--samples", type=int, default=10**6)
    dens.add_argument("--eps", type=float, nargs="+", default=list(densities.DEFAULT_EPS))
    dens.add_argument("--streams", type=int, default=8)

    parser = _Parser(prog="circlemethod", description="Circle-method invariants, counts and densities")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("check", parents=[common], help="invariants and admissibility verdicts")
    p.add_argument("--B", type=_override_arg, action="append", default=[], metavar="D=VALUE")
    p.add_argument("--primes", type=int, nargs="+", default=list(invariants.DEFAULT_PRIMES))

    p = sub.add_parser("count", parents=[common], help="exact N(P)")
    p.add_argument("--P", type=_fraction_arg, required=True)
    p.add_argument("--strategy", choices=("auto",) + counting.STRATEGIES, default="auto")

    p = sub.add_parser("densities", parents=[common, dens], help="sigma_p, Euler product, sigma_inf")
    p.add_argument("--P", type=_fraction_arg, default=None)

    p = sub.add_parser("predict", parents=[common, dens], help="main-term prediction")
    p.add_argument("--P", type=_fraction_arg, required=True)

    p = sub.add_parser("compare", parents=[common, dens], help="N(P) against the prediction over a P schedule")
    p.add_argument("--P", type=_fraction_arg, nargs="+", required=True)
    p.add_argument("--strategy", choices=("auto",) + counting.STRATEGIES, default="auto")

    p = sub.add_parser("expsum", parents=[common], help="exponential sums and integrals")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--alpha", type=_fraction_arg, nargs="+", help="S(alpha) at --P")
    mode.add_argument("--complete", type=int, metavar="Q", help="S(a, q) with --a")
    mode.add_argument("--series", type=int, metavar="H", help="truncated singular series")
    mode.add_argument("--integral", type=float, metavar="H", help="truncated singular integral")
    mode.add_argument("--gamma", type=float, nargs="+", help="oscillatory integral J(gamma)")
    p.add_argument("--P", type=_fraction_arg, default=None)
    p.add_argument("--a", type=int, nargs="+", default=None)

    sub.add_parser("polar", parents=[common], help="polar forms of every form")
    return parser


def _read_document(path: str) -> SystemDocument:
    if path == "-":
        text = sys.stdin.read()
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return parse_system(text)


class Context:
    def __init__(self, args, doc: SystemDocument):
        self.args = args
        self.doc = doc
        self.system: FormSystem = doc.to_system()
        self.warnings: list[str] = []
        self.timings: dict[str, float] = {}

    def budget(self, kind: str, default):
        if self.args.budget is not None:
            return self.args.budget
        return self.doc.budgets.get(kind, default)

    @property
    def seed(self) -> int:
        if self.args.seed is not None:
            return self.args.seed
        return self.doc.seed if self.doc.seed is not None else 0

    def timed(self, label, fn, *a, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            self.timings[label] = time.perf_counter() - t0


# -- verbs -------------------------------------------------------------------


def run_check(ctx: Context) -> dict:
    overrides = dict(ctx.doc.overrides)
    overrides.update(dict(ctx.args.B))
    rep = ctx.timed(
        "check",
        invariants.invariant_report,
        ctx.system,
        overrides,
        tuple(ctx.args.primes),
        ctx.budget("locus", invariants.DEFAULT_LOCUS_BUDGET),
    )
    for d, est in rep.estimates.items():
        if not est.override_used and not est.confident:
            ctx.warnings.append(f"B_{d} estimate {est.estimate} is not stable across primes {ctx.args.primes}")
    return {
        "n": exact(rep.n),
        "B": {str(d): exact(v) for d, v in rep.B.items()},
        "B_source": {str(d): ("override" if e.override_used else "estimate") for d, e in rep.estimates.items()},
        "curly_D": [exact(v) for v in rep.Dj],
        "s": {str(d): exact(v) for d, v in rep.s.items()},
        "t": {str(d): exact(v) for d, v in rep.t.items()},
        "n0_of_d": {str(d): exact(v) for d, v in rep.n0_of_d.items()},
        "n0": exact(rep.n0),
        "condition_margins": {str(d): exact(v) for d, v in rep.condition_margins.items()},
        "verdicts": rep.verdicts,
        "lemma_improve": {str(d): v for d, v in rep.lemma_improve.items()},
        "variety_degree": exact(rep.variety_degree),
        "crude_bounds": {
            "lhs": exact(rep.crude.lhs),
            "square_bound": exact(rep.crude.square_bound),
            "exponential_bound": exact(rep.crude.exponential_bound),
        },
    }


def _count(ctx: Context, P, strategy) -> counting.CountReport:
    return counting.count_solutions(
        ctx.system, P, strategy, ctx.budget("count", counting.DEFAULT_BUDGET), ctx.args.threads
    )


def run_count(ctx: Context) -> dict:
    rep = ctx.timed("count", _count, ctx, ctx.args.P, ctx.args.strategy)
    return {
        "P": exact(rep.P),
        "count": exact(rep.count),
        "points_in_box": exact(rep.points_scanned),
        "strategy": rep.strategy,
    }


def _densities(ctx: Context, P=None) -> densities.DensityEstimate:
    a = ctx.args
    est = ctx.timed(
        "densities",
        densities.estimate_densities,
        ctx.system,
        a.p_max,
        a.k_max,
        a.samples,
        a.eps,
        ctx.seed,
        a.streams,
        a.threads,
        ctx.budget("residue", densities.DEFAULT_BUDGET),
        P,
    )
    ctx.warnings.extend(est.warnings)
    return est


def _density_results(est: densities.DensityEstimate) -> dict:
    real = est.sigma_inf
    return {
        "sigma_p": {
            str(p): {
                "levels": [exact(v) for v in loc.levels],
                "counts": [exact(c) for c in loc.counts],
                "stabilized": loc.stabilized,
                "partial": loc.partial,
            }
            for p, loc in est.sigma_p.items()
        },
        "euler_product": {"p_max": est.euler.p_max, "value": exact(est.euler.value), "float": approx(est.euler.value)},
        "sigma_inf": {
            "estimate": approx(real.estimate, real.stderr),
            "eps_schedule": list(real.eps_schedule),
            "per_eps": [approx(v, e) for v, e in real.per_eps],
            "hits": [exact(h) for h in real.hits],
            "samples": real.samples,
            "seed": real.seed,
            "streams": real.streams,
        },
    }


def run_densities(ctx: Context) -> dict:
    est = _densities(ctx, ctx.args.P)
    out = _density_results(est)
    if est.prediction is not None:
        P, value = est.prediction
        out["prediction"] = {"P": exact(P), "main_term": approx(value, _prediction_error(est, value))}
    return out


def _prediction_error(est, value) -> float | None:
    real = est.sigma_inf
    if real.estimate == 0:
        return None
    return abs(value) * real.stderr / abs(real.estimate)


def run_predict(ctx: Context) -> dict:
    est = _densities(ctx, ctx.args.P)
    P, value = est.prediction
    return {
        "P": exact(P),
        "sigma_inf": approx(est.sigma_inf.estimate, est.sigma_inf.stderr),
        "euler_product": exact(est.euler.value),
        "exponent": exact(ctx.system.n - ctx.system.curly_D),
        "main_term": approx(value, _prediction_error(est, value)),
    }


def run_compare(ctx: Context) -> dict:
    est = _densities(ctx)
    rows = []
    for P in ctx.args.P:
        rep = ctx.timed(f"count P={P}", _count, ctx, P, ctx.args.strategy)
        pred = densities.predict_main_term(
            est.sigma_inf.estimate, est.euler.value, ctx.system.n, ctx.system.curly_D, P
        )
        err = _prediction_error(est, pred)
        ratio = counting.empirical_ratio(rep, pred) if pred > 0 else None
        rows.append(
            {
                "P": exact(P),
                "N": exact(rep.count),
                "prediction": approx(pred, err),
                "ratio": None if ratio is None else approx(ratio, ratio * err / pred if err else None),
            }
        )
    return {"table": rows, "densities": _density_results(est)}


def run_expsum(ctx: Context) -> dict:
    a, system = ctx.args, ctx.system
    budget = ctx.budget("expsum", counting.DEFAULT_BUDGET)
    if a.alpha is not None:
        if a.P is None:
            raise UsageError("expsum --alpha needs --P")
        alpha = expsums.FrequencyVector.for_system(system, a.alpha)
        z = ctx.timed("expsum", expsums.S_alpha, system, a.P, alpha, budget, a.threads)
        return {"kind": "S_alpha", "P": exact(a.P), "alpha": [exact(v) for v in a.alpha], **_complex(z)}
    if a.complete is not None:
        if a.a is None:
            raise UsageError("expsum --complete needs --a")
        z = ctx.timed("expsum", expsums.complete_sum, system, a.complete, a.a, budget)
        return {"kind": "complete_sum", "q": a.complete, "a": a.a, **_complex(z)}
    if a.series is not None:
        res = ctx.timed("expsum", expsums.singular_series, system, a.series, budget)
        if abs(res.imag) > 1e-9:
            ctx.warnings.append(f"singular series imaginary part {res.imag:.3e} exceeds 1e-9")
        return {
            "kind": "singular_series",
            "H": res.H,
            # terms vanish for some q, so take the largest over the upper half
            "value": approx(res.value, max(abs(t) for q, t in res.terms if 2 * q > res.H)),
            "imag": approx(res.imag),
            "terms": [{"q": q, **_complex(t)} for q, t in res.terms],
        }
    if a.integral is not None:
        res = ctx.timed("expsum", expsums.singular_integral, system, a.integral)
        if not res.converged:
            ctx.warnings.append("singular integral did not converge")
            ctx.nonconverged = True
        return {
            "kind": "singular_integral",
            "H": res.H,
            "value": approx(res.value, res.error),
            "imag": approx(res.imag),
            "panels": res.panels,
            "converged": res.converged,
        }
    gamma = expsums.FrequencyVector.for_system(system, a.gamma)
    res = ctx.timed("expsum", expsums.J_gamma, system, gamma)
    if not res.converged:
        ctx.warnings.append("J(gamma) did not converge")
        ctx.nonconverged = True
    return {"kind": "J_gamma", "gamma": a.gamma, **_complex(res.value), "nodes_per_axis": res.nodes_per_axis, "converged": res.converged}


def _complex(z: complex) -> dict:
    return {"real": approx(z.real), "imag": approx(z.imag)}


def run_polar(ctx: Context) -> dict:
    out = []
    for (i, d), F in zip(ctx.system.index(), ctx.system.forms):
        L = polar_form(F)
        out.append(
            {
                "label": [i, d],
                "arity": L.arity,
                "terms": [{"coeff": exact(c), "indices": list(idx)} for c, idx in L.terms],
            }
        )
    return {"polar_forms": out}


VERBS = {
    "check": run_check,
    "count": run_count,
    "densities": run_densities,
    "predict": run_predict,
    "compare": run_compare,
    "expsum": run_expsum,
    "polar": run_polar,
}

# flags that do not change results and so stay out of the echoed inputs
_UNECHOED = {"input", "threads", "json", "timings", "verb"}


def _echo_flags(args) -> dict:
    out = {}
    for key, v in sorted(vars(args).items()):
        if key in _UNECHOED:
            continue
        if isinstance(v, Fraction):
            v = str(v)
        elif isinstance(v, list):
            v = [str(x) if isinstance(x, Fraction) else list(x) if isinstance(x, tuple) else x for x in v]
        out[key] = v
    return out


def run_command(verb: str, doc: SystemDocument, args) -> tuple[dict, int]:
    """Run ``verb`` and return ``(report, exit code)``."""
    ctx = Context(args, doc)
    ctx.nonconverged = False
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        results = VERBS[verb](ctx)
    ctx.warnings.extend(str(w.message) for w in caught)
    report: dict[str, Any] = {
        "command": verb,
        "inputs": {"document": doc.to_json_obj(), "flags": _echo_flags(args), "seed": ctx.seed},
        "results": results,
        "warnings": ctx.warnings,
    }
    if args.timings:
        report["timings"] = ctx.timings
    return report, 4 if ctx.nonconverged else 0


# -- output ------------------------------------------------------------------


def _scalar(v) -> str:
    if isinstance(v, dict) and v.get("tag") == EXACT:
        return v["num"] if v["den"] == "1" else f"{v['num']}/{v['den']}"
    if isinstance(v, dict) and v.get("tag") == APPROX:
        return repr(v["value"]) if v["error"] is None else f"{v['value']!r} +- {v['error']!r}"
    if v is None:
        return ""
    return str(v)


def _flatten(prefix: str, v, rows: list):
    if isinstance(v, dict) and v.get("tag") in (EXACT, APPROX):
        rows.append((prefix, _scalar(v)))
    elif isinstance(v, dict):
        for k, x in v.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), x, rows)
    elif isinstance(v, list) and v and all(isinstance(x, dict) for x in v):
        for i, x in enumerate(v):
            _flatten(f"{prefix}[{i}]", x, rows)
    elif isinstance(v, list):
        rows.append((prefix, " ".join(_scalar(x) for x in v)))
    else:
        rows.append((prefix, _scalar(v)))


def render_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    results = dict(report["results"])
    table = results.pop("table", None)
    if table:
        cols = list(table[0])
        w.writerow(cols)
        for row in table:
            w.writerow([_scalar(row[c]) for c in cols])
        w.writerow([])
    rows: list = []
    _flatten("", results, rows)
    w.writerow(["key", "value"])
    w.writerows(rows)
    for msg in report["warnings"]:
        w.writerow(["warning", msg])
    for k, t in report.get("timings", {}).items():
        w.writerow([f"timing.{k}", f"{t:.3f}"])
    return buf.getvalue()


def render_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        doc = _read_document(args.input)
        report, code = run_command(args.verb, doc, args)
    except CircleMethodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    sys.stdout.write(render_json(report) if args.json else render_csv(report))
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command line front-end.

    blochlab classify PROBLEM.json      boundedness / compactness verdicts
    blochlab norm EXPR --p P            p-Bloch norm of an expression
    blochlab verify SUITE               lemma1 | lemma3 | families | remark1
    blochlab profile PROBLEM.json       boundary-shell profile of a functional
    blochlab families PROBLEM.json      test-family lower bounds on the operator norm

Exit codes: 0 decisive / pass, 1 suite failure, 2 input error,
3 inconclusive verdict, 4 divergent norm.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from . import __version__
from .bloch import BlochParams, bloch_norm
from .operators import (
    Boundedness,
    Classification,
    SymbolPair,
    classify,
    functional_A,
    functional_B,
    functional_per_l,
    phi_margin,
    phi_margin_l,
)
from .report import dumps, profile_csv, to_jsonable
from .sampling import SampleBudget, Thresholds, shell_profile
from .symbolic import EvaluationError, ParseError, max_index, parse
from .suites import SUITES, run_suite
from .testfn import LOWER_BOUND_BUDGET, lower_bound_opnorm, sufficiency_bound

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_INCONCLUSIVE = 3
EXIT_DIVERGENT = 4


class InputError(Exception):
    pass


@dataclass
class ProblemSpec:
    n: int
    p: float
    q: float
    psi: str
    phi: list
    budget: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d) -> "ProblemSpec":
        if not isinstance(d, dict):
            raise InputError("problem file must hold a JSON object")
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InputError(f"unknown problem keys: {sorted(extra)}")
        missing = {"n", "p", "q", "psi", "phi"} - set(d)
        if missing:
            raise InputError(f"missing problem keys: {sorted(missing)}")
        spec = cls(**d)
        if not isinstance(spec.n, int) or isinstance(spec.n, bool) or spec.n < 1:
            raise InputError("n must be a positive integer")
        for name in ("p", "q"):
            v = getattr(spec, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise InputError(f"{name} must be a number")
        if not isinstance(spec.psi, str):
            raise InputError("psi must be an expression string")
        if not isinstance(spec.phi, list) or not all(isinstance(e, str) for e in spec.phi):
            raise InputError("phi must be a list of expression strings")
        if len(spec.phi) != spec.n:
            raise InputError(f"phi needs exactly n={spec.n} components, got {len(spec.phi)}")
        return spec

    @classmethod
    def load(cls, path: str) -> "ProblemSpec":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as e:
            raise InputError(f"malformed JSON in {path}: {e}") from e
        except OSError as e:
            raise InputError(f"cannot read {path}: {e}") from e
        return cls.from_dict(data)

    def params(self) -> BlochParams:
        return BlochParams(float(self.p), float(self.q), self.n)

    def pair(self) -> SymbolPair:
        return SymbolPair.build(self.psi, self.phi, self.n)

    def echo(self) -> dict:
        return {"n": self.n, "p": self.p, "q": self.q, "psi": self.psi, "phi": self.phi}


def _budget(args, spec: Optional[ProblemSpec] = None) -> SampleBudget:
    b = SampleBudget(**(spec.budget if spec else {}))
    over = {
        "base_count": args.samples,
        "shells": args.shells,
        "refine_rounds": args.refine,
        "seed": args.seed,
    }
    return replace(b, **{k: v for k, v in over.items() if v is not None})


def _thresholds(args, spec: Optional[ProblemSpec] = None) -> Thresholds:
    t = Thresholds(**(spec.thresholds if spec else {}))
    over = {"tau": args.tau, "tau_big": args.tau_big}
    return replace(t, **{k: v for k, v in over.items() if v is not None})


def _meta(args, started: float) -> dict:
    return {"version": __version__, "seed": args.seed if args.seed is not None else SampleBudget().seed,
            "wall_time_s": round(time.perf_counter() - started, 6)}


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _finish(args, report: dict, started: float):
    if not args.no_meta:
        report["meta"] = _meta(args, started)
    _emit(args, dumps(report))


# ---------------------------------------------------------------------------
# Verbs


def classification_block(cls: Classification) -> dict:
    return {
        "regime": cls.regime,
        "bounded": cls.bounded,
        "compact": cls.compact,
        "decisive": cls.decisive,
        "notes": cls.notes,
        "profile_verdicts": cls.profile_verdicts,
        "max_phi_modulus": cls.max_phi_modulus,
    }


def lower_bound_block(pair, params, cls, budget, seed) -> dict:
    lb = lower_bound_opnorm(pair, params, budget=replace(budget, seed=seed))
    out = {
        "value": lb.value,
        "best_by_family": lb.best_by_family(),
        "skipped": lb.skipped,
        "rows": lb.rows,
    }
    if cls is not None and cls.bounded is Boundedness.BOUNDED:
        psi_norm = bloch_norm(pair.psi, params.q, budget, n=pair.n).norm
        upper = sufficiency_bound(pair, params, cls, psi_norm)
        out.update(psi_norm=psi_norm, sufficiency_bound=upper, consistent=bool(lb.value <= upper))
    return out


def cmd_classify(args) -> int:
    started = time.perf_counter()
    spec = ProblemSpec.load(args.problem)
    params, budget, th = spec.params(), _budget(args, spec), _thresholds(args, spec)
    pair = spec.pair()
    cls = classify(pair, params, budget, th)
    report = {
        "command": "classify",
        "problem": spec.echo(),
        "classification": classification_block(cls),
        "evidence": {
            "self_map": pair.self_map,
            "sup_A": cls.sup_A,
            "sup_B": cls.sup_B,
            "profiles": cls.profiles,
        },
        "lower_bounds": None,
        "budget": budget,
        "thresholds": th,
    }
    if not args.no_lower_bounds:
        report["lower_bounds"] = lower_bound_block(pair, params, cls, LOWER_BOUND_BUDGET, budget.seed)
    _finish(args, report, started)
    return EXIT_OK if cls.decisive else EXIT_INCONCLUSIVE


def cmd_norm(args) -> int:
    started = time.perf_counter()
    n = args.n or max(1, max_index(parse(args.expr, 10**9)))
    budget, th = _budget(args), _thresholds(args)
    rep = bloch_norm(args.expr, args.p, budget, n=n, thresholds=th)
    report = {
        "command": "norm",
        "expr": args.expr,
        "n": n,
        "p": args.p,
        "norm": rep.norm,
        "value_at_zero": rep.value_at_zero,
        "seminorm": rep.seminorm,
        "in_space": rep.finite,
        "budget": budget,
        "thresholds": th,
    }
    _finish(args, report, started)
    return EXIT_OK if rep.finite else EXIT_DIVERGENT


def cmd_verify(args) -> int:
    started = time.perf_counter()
    res = run_suite(args.suite, args.p)
    report = {
        "command": "verify",
        "suite": res.name,
        "passed": res.passed,
        "checked": res.checked,
        "violations": res.violations,
        "max_ratio": res.max_ratio,
        "rows": res.rows,
        "evidence": res.evidence,
    }
    _finish(args, report, started)
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_profile(args) -> int:
    started = time.perf_counter()
    spec = ProblemSpec.load(args.problem)
    params, budget = spec.params(), _budget(args, spec)
    pair = spec.pair()
    if args.functional == "A":
        F, margin = functional_A(pair, params), phi_margin(pair)
    elif args.functional == "B":
        F, margin = functional_B(pair, params), phi_margin(pair)
    else:
        if not 1 <= args.l <= pair.n:
            raise InputError(f"--l must lie in 1..{pair.n}")
        F, margin = functional_per_l(pair, params, args.l), phi_margin_l(pair, args.l)
    prof = shell_profile(F, margin, pair.n, budget)
    if args.format == "csv":
        _emit(args, profile_csv(prof))
    else:
        report = {"command": "profile", "problem": spec.echo(), "functional": args.functional,
                  "l": args.l if args.functional == "per-l" else None, "profile": prof, "budget": budget}
        _finish(args, report, started)
    return EXIT_OK


def cmd_families(args) -> int:
    started = time.perf_counter()
    spec = ProblemSpec.load(args.problem)
    params = spec.params()
    pair = spec.pair()
    seed = args.seed if args.seed is not None else LOWER_BOUND_BUDGET.seed
    report = {
        "command": "families",
        "problem": spec.echo(),
        "lower_bounds": lower_bound_block(pair, params, None, LOWER_BOUND_BUDGET, seed),
    }
    _finish(args, report, started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("budget and thresholds")
    g.add_argument("--samples", type=int, help="stratified sample count (default 200000)")
    g.add_argument("--shells", type=int, help="number of dyadic boundary shells (default 12)")
    g.add_argument("--refine", type=int, help="pattern-search refinement rounds (default 3)")
    g.add_argument("--seed", type=int, help="random seed (default 42)")
    g.add_argument("--tau", type=float, help="decay threshold (default 1e-2)")
    g.add_argument("--tau-big", type=float, help="persistence threshold (default 1e-1)")
    o = common.add_argument_group("output")
    o.add_argument("--out", help="write the report here instead of stdout")
    o.add_argument("--format", choices=("json", "csv"), default=None)
    o.add_argument("--no-meta", action="store_true", help="omit version, seed and wall time")

    ap = argparse.ArgumentParser(prog="blochlab", description="p-Bloch norms and weighted composition operators")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", parents=[common], help="classify a symbol pair")
    c.add_argument("problem")
    c.add_argument("--no-lower-bounds", action="store_true", help="skip the test-family sweep")
    c.set_defaults(func=cmd_classify)

    nm = sub.add_parser("norm", parents=[common], help="p-Bloch norm of an expression")
    nm.add_argument("expr")
    nm.add_argument("--p", type=float, required=True)
    nm.add_argument("--n", type=int, help="dimension (default: largest variable index)")
    nm.set_defaults(func=cmd_norm)

    v = sub.add_parser("verify", parents=[common], help="run a built-in inequality suite")
    v.add_argument("suite", help=" | ".join(SUITES))
    v.add_argument("--p", type=float, action="append", help="restrict to these p values (repeatable)")
    v.set_defaults(func=cmd_verify)

    pr = sub.add_parser("profile", parents=[common], help="shell profile of a criterion functional")
    pr.add_argument("problem")
    pr.add_argument("--functional", choices=("A", "B", "per-l"), default="B")
    pr.add_argument("--l", type=int, default=1, help="coordinate for the per-l functional")
    pr.set_defaults(func=cmd_profile)

    fa = sub.add_parser("families", parents=[common], help="test-family lower bounds")
    fa.add_argument("problem")
    fa.set_defaults(func=cmd_families)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.format is None:
        args.format = "csv" if args.command == "profile" else "json"
    if args.format == "csv" and args.command != "profile":
        print("error: --format csv is only available for profile", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "verify" and args.suite not in SUITES:
        print(f"error: unknown suite {args.suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, ParseError, EvaluationError, ValueError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

"""Command line: ``menuforge solve|verify|plot``.

Instances are JSON files::

    {"outcomes": ["flop", "hit"], "signals": ["w", "m"], "q": [0.7, 0.3],
     "actions": [{"name": "a", "cost": 0.3}, {"name": "b", "cost": 0.1}],
     "conditionals": {"a|w": [0.2, 0.8], ...}, "kappa": 0.05,
     "plan": {"acquire": true, "f": {"w": "a", "m": "b"}}}

Without ``signals`` the instance is a pure hidden-action problem and the
conditionals may be keyed by action name alone.

Exit codes: 0 solved and certified (or verified), 2 infeasible, not
elicitable or verification failed, 1 bad input.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .contracts import CONTRACT_SIGNAL, ContractInstance, best_target, lower_hull_1d, solve_contract
from .core import Menu, Plan, ProblemInstance, SolveReport
from .errors import MenuforgeError, NotElicitableError, TrivialInstanceError
from .general import solve_general
from .ia import IAInstance, solve_ia
from .verify import DEFAULT_TOL, Certificate, verify_menu

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2
REGIMES = ("auto", "ia", "contract", "general")
SIG_DIGITS = 12
ZERO_SNAP = 1e-12

_number_array = {"type": "array", "items": {"type": "number"}, "minItems": 1}

INSTANCE_SCHEMA = {
    "type": "object",
    "required": ["outcomes", "actions", "conditionals"],
    "properties": {
        "outcomes": {"type": "array", "items": {"type": "string"}, "minItems": 1, "uniqueItems": True},
        "signals": {"type": "array", "items": {"type": "string"}, "minItems": 1, "uniqueItems": True},
        "q": _number_array,
        "actions": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "cost"],
                "properties": {"name": {"type": "string"}, "cost": {"type": "number", "minimum": 0}},
            },
        },
        "conditionals": {"type": "object", "additionalProperties": _number_array},
        "kappa": {"type": "number", "minimum": 0},
        "plan": {
            "type": "object",
            "properties": {
                "acquire": {"type": "boolean"},
                "f": {"type": "object", "additionalProperties": {"type": "string"}},
                "action": {"type": "string"},
            },
        },
    },
}

_payments = {"type": "array", "items": {"type": "number"}, "minItems": 1}
MENU_SCHEMA = {
    "oneOf": [
        {"type": "object", "required": ["menu"], "properties": {"menu": {"$ref": "#/$defs/menu"}}},
        {"$ref": "#/$defs/menu"},
    ],
    "$defs": {
        "menu": {
            "type": "array",
            "minItems": 1,
            "items": {
                "oneOf": [
                    {"type": "object", "required": ["payments"], "properties": {"payments": _payments}},
                    _payments,
                ]
            },
        }
    },
}


class InputError(MenuforgeError):
    """Bad input file; ``path`` is a JSON pointer into the offending document."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path or '/'}: {message}")


def _pointer(parts) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


def _validate(doc: Any, schema: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        # oneOf failures hide the useful message one level down
        err = errors[0]
        while err.context:
            err = sorted(err.context, key=lambda e: (-len(e.absolute_path), e.message))[0]
        raise InputError(err.message, _pointer(err.absolute_path))


def _load_json(path: str | Path) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None


def _belief(values, where: str, tol: float = 1e-9) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if np.any(arr < -tol):
        raise InputError("probabilities must be non-negative", where)
    if abs(arr.sum() - 1.0) > tol:
        raise InputError(f"probabilities sum to {arr.sum():.12g}, not 1", where)
    return arr


@dataclass
class Loaded:
    """A parsed instance plus the bookkeeping to map results back to the file."""

    problem: ProblemInstance
    plan: Plan | None
    has_signals: bool
    all_outcomes: tuple[str, ...]
    kept: list[int]
    removed: list[str]

    def pad(self, payments: np.ndarray) -> list[float]:
        full = np.zeros(len(self.all_outcomes))
        full[self.kept] = payments
        return full.tolist()

    def restrict(self, payments, where: str) -> np.ndarray:
        payments = np.asarray(payments, dtype=np.float64)
        if payments.shape[0] != len(self.all_outcomes):
            raise InputError(f"contract has {payments.shape[0]} payments, instance has "
                             f"{len(self.all_outcomes)} outcomes", where)
        return payments[self.kept]


def parse_instance(doc: Any) -> Loaded:
    _validate(doc, INSTANCE_SCHEMA)
    outcomes = tuple(doc["outcomes"])
    n = len(outcomes)
    has_signals = "signals" in doc
    signals = tuple(doc["signals"]) if has_signals else (CONTRACT_SIGNAL,)
    if has_signals and "q" not in doc:
        raise InputError("'q' is required when signals are given")
    q = _belief(doc["q"], "/q") if has_signals else np.ones(1)
    if q.shape[0] != len(signals):
        raise InputError(f"expected {len(signals)} entries, got {q.shape[0]}", "/q")
    names = [a["name"] for a in doc["actions"]]
    if len(set(names)) != len(names):
        raise InputError("action names must be unique", "/actions")
    costs = np.array([a["cost"] for a in doc["actions"]], dtype=np.float64)

    table = doc["conditionals"]
    known = {f"{a}|{s}" for a in names for s in signals}
    if not has_signals:
        known |= set(names)
    for key in table:
        if key not in known:
            raise InputError(f"unknown action|signal key {key!r}", _pointer(["conditionals", key]))
    cond = np.zeros((len(names), len(signals), n))
    for i, a in enumerate(names):
        for j, s in enumerate(signals):
            key = f"{a}|{s}"
            if key not in table and not has_signals and a in table:
                key = a
            if key not in table:
                raise InputError(f"missing conditional for {a}|{s}", _pointer(["conditionals"]))
            where = _pointer(["conditionals", key])
            if len(table[key]) != n:
                raise InputError(f"expected {n} probabilities, got {len(table[key])}", where)
            cond[i, j] = _belief(table[key], where)
    kappa = float(doc.get("kappa", 0.0))

    # outcomes no action ever produces carry no information; drop them
    kept = [w for w in range(n) if cond[:, :, w].max() > 0]
    removed = [outcomes[w] for w in range(n) if w not in kept]
    cond = cond[:, :, kept]
    problem = ProblemInstance(tuple(outcomes[w] for w in kept), signals, tuple(names), q, cond, costs, kappa)

    plan = None
    if "plan" in doc:
        raw_plan = doc["plan"]
        acquire = bool(raw_plan.get("acquire", True))
        if acquire:
            f = dict(raw_plan.get("f", {}))
            if not has_signals and not f and "action" in raw_plan:
                f = {CONTRACT_SIGNAL: raw_plan["action"]}
            if not has_signals and set(f) != {CONTRACT_SIGNAL} and len(f) == 1:
                f = {CONTRACT_SIGNAL: next(iter(f.values()))}
            plan = Plan(True, f)
        else:
            if "action" not in raw_plan:
                raise InputError("a plan without acquisition needs 'action'", "/plan")
            plan = Plan(False, {}, raw_plan["action"])
        try:
            plan.validate(problem)
        except MenuforgeError as exc:
            raise InputError(str(exc), "/plan") from None
    return Loaded(problem, plan, has_signals, outcomes, kept, removed)


def load_instance(path: str | Path) -> Loaded:
    return parse_instance(_load_json(path))


def parse_menu(doc: Any, loaded: Loaded) -> Menu:
    _validate(doc, MENU_SCHEMA)
    items = doc["menu"] if isinstance(doc, dict) else doc
    base = ["menu"] if isinstance(doc, dict) else []
    rows = []
    for i, item in enumerate(items):
        payments = item["payments"] if isinstance(item, dict) else item
        rows.append(loaded.restrict(payments, _pointer(base + [i])))
    return Menu.from_contracts(rows)


def detect_regime(problem: ProblemInstance, has_signals: bool = True) -> str:
    if len(problem.actions) == 1 and np.all(problem.costs == 0):
        return "ia"
    if not has_signals or (len(problem.signals) == 1 and problem.kappa == 0):
        return "contract"
    return "general"


def _contract_target(loaded: Loaded, rewards=None) -> str:
    plan = loaded.plan
    if plan is None and rewards is not None:
        inst = ContractInstance.from_problem(loaded.problem, loaded.problem.actions[0])
        return best_target(inst, loaded.restrict(rewards, "--rewards")).action
    if plan is None:
        raise InputError("the hidden-action regime needs a plan naming the target action (or --rewards)", "/plan")
    if not plan.acquire:
        return plan.action
    targets = set(plan.assignment.values())
    if len(targets) != 1:
        raise InputError("the hidden-action regime needs a single target action", "/plan")
    return targets.pop()


def default_plan(loaded: Loaded, regime: str) -> Plan:
    problem = loaded.problem
    if regime == "ia":
        return Plan(True, {s: problem.actions[0] for s in problem.signals})
    if regime == "contract":
        target = _contract_target(loaded)
        return Plan(True, {s: target for s in problem.signals})
    if loaded.plan is None:
        raise InputError("the general regime needs a plan", "/plan")
    return loaded.plan


def run_solver(loaded: Loaded, regime: str = "auto", tol: float = DEFAULT_TOL, epsilon: float | None = None,
               formulation: str = "p6", enumerate_menu: bool = False, rewards=None) -> tuple[SolveReport, str]:
    problem = loaded.problem
    if regime == "auto":
        regime = detect_regime(problem, loaded.has_signals)
    if regime == "ia":
        inst = IAInstance.from_problem(problem)
        try:
            return solve_ia(inst, tol=tol), regime
        except TrivialInstanceError as exc:
            return SolveReport("ia", "infeasible", None, None, reason=str(exc), flags=(exc.reason,)), regime
    if regime == "contract":
        if len(problem.signals) != 1 or problem.kappa != 0:
            raise InputError("the hidden-action regime needs no signals (or one free signal)")
        try:
            inst = ContractInstance.from_problem(problem, _contract_target(loaded, rewards))
            return solve_contract(inst, epsilon=epsilon, tol=tol, enumerate_menu=enumerate_menu), regime
        except NotElicitableError as exc:
            return SolveReport("contract", "not-elicitable", None, None, reason=str(exc)), regime
    plan = default_plan(loaded, "general")
    if not plan.acquire:
        raise InputError("the general regime solves plans that acquire the signal", "/plan/acquire")
    return solve_general(problem, plan, formulation=formulation, tol=tol), regime


# -- serialisation ---------------------------------------------------------------------------

def fmt_number(x: float) -> float | None:
    """Round to 12 significant digits.  Round-off residue below 1e-12 and -0.0
    print as 0.0; non-finite values become null."""
    x = float(x)
    if not math.isfinite(x):
        return None
    if abs(x) < ZERO_SNAP:
        return 0.0
    y = float(f"{x:.{SIG_DIGITS}g}")
    return 0.0 if y == 0 else y


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt_number(obj)
    return obj


def certificate_json(cert: Certificate) -> dict:
    return {
        "passed": cert.passed,
        "tol": cert.tol,
        "plan_utility": cert.plan_utility,
        "best_deviation_utility": cert.best_deviation_utility,
        "best_deviation": cert.best_deviation.describe(),
        "strict_margin": cert.strict_margin,
        "failed_families": sorted(cert.failed_families()),
        "slacks": [{"family": s.family, "label": s.label, "value": s.value} for s in cert.slacks],
    }


def report_json(report: SolveReport, loaded: Loaded) -> dict:
    out: dict[str, Any] = {
        "regime": report.regime,
        "status": report.status,
        "objective": report.objective,
        "outcomes": list(loaded.all_outcomes),
        "menu": [] if report.menu is None else [{"payments": loaded.pad(t.payments)} for t in report.menu.contracts()],
        "binding": report.binding,
        "certificate": None if report.certificate is None else certificate_json(report.certificate),
    }
    if report.flags:
        out["flags"] = list(report.flags)
    if report.reason:
        out["reason"] = report.reason
    if loaded.removed:
        out["removed_outcomes"] = loaded.removed
    return _clean(out)


def dumps(doc: Any) -> str:
    return json.dumps(_clean(doc), indent=2, ensure_ascii=False) + "\n"


# -- plotting --------------------------------------------------------------------------------

SVG_W, SVG_H, MARGIN = 480, 360, 48


def _px(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _dp(x: float, y: float) -> str:
    return f"{fmt_number(x)!r},{fmt_number(y)!r}"


def _envelope(menu: Menu) -> list[tuple[float, float]]:
    lo = menu.slopes[:, 0] - menu.intercepts
    hi = menu.slopes[:, 1] - menu.intercepts
    xs = {0.0, 1.0}
    k = len(lo)
    for i in range(k):
        for j in range(i + 1, k):
            di, dj = hi[i] - lo[i], hi[j] - lo[j]
            if abs(di - dj) > 1e-15:
                x = (lo[j] - lo[i]) / (di - dj)
                if 0.0 < x < 1.0:
                    xs.add(float(x))
    pts = [(x, float(np.max(lo + (hi - lo) * x))) for x in sorted(xs)]
    # drop points in the middle of straight runs
    out = [pts[0]]
    for cur, nxt in zip(pts[1:], pts[2:] + [None]):
        if nxt is not None:
            (x0, y0), (x1, y1), (x2, y2) = out[-1], cur, nxt
            if abs((x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)) <= 1e-12:
                continue
        out.append(cur)
    return out


def render_svg(loaded: Loaded, menu: Menu, regime: str) -> str:
    problem = loaded.problem
    if len(loaded.all_outcomes) != 2 or problem.n_outcomes != 2:
        raise InputError("plotting requires binary outcome")
    lo = menu.slopes[:, 0] - menu.intercepts
    hi = menu.slopes[:, 1] - menu.intercepts
    envelope = _envelope(menu)

    curves: list[tuple[str, list[tuple[float, float]]]] = []
    markers: list[tuple[str, float, float]] = []
    if regime == "ia":
        prior = problem.q @ problem.conditionals[0]
        for s, sig in enumerate(problem.signals):
            p = problem.conditionals[0, s]
            markers.append((f"p_{sig}", float(p[1]), menu(p)))
        markers.append(("p_0", float(prior[1]), menu(prior)))
    else:
        for s, sig in enumerate(problem.signals):
            beliefs = problem.conditionals[:, s, :]
            curves.append((sig, lower_hull_1d(beliefs[:, 1], problem.costs)))
            for a, act in enumerate(problem.actions):
                label = f"p_{act}" if regime == "contract" else f"p_{act},{sig}"
                markers.append((label, float(beliefs[a, 1]), float(problem.costs[a])))

    ys = [0.0, *lo, *hi, *(y for _, pts in curves for _, y in pts), *(m[2] for m in markers)]
    y_min, y_max = min(ys), max(ys)
    if y_max - y_min < 1e-12:
        y_max = y_min + 1.0
    pad = 0.05 * (y_max - y_min)
    y_min, y_max = y_min - (pad if y_min < 0 else 0.0), y_max + pad

    def X(x: float) -> str:
        return _px(MARGIN + x * (SVG_W - 2 * MARGIN))

    def Y(y: float) -> str:
        return _px(SVG_H - MARGIN - (y - y_min) / (y_max - y_min) * (SVG_H - 2 * MARGIN))

    o0, o1 = loaded.all_outcomes
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" '
        f'viewBox="0 0 {SVG_W} {SVG_H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line class="axis" x1="{X(0)}" y1="{Y(y_min)}" x2="{X(1)}" y2="{Y(y_min)}" stroke="black"/>',
        f'<line class="axis" x1="{X(0)}" y1="{Y(y_min)}" x2="{X(0)}" y2="{Y(y_max)}" stroke="black"/>',
        f'<text x="{X(0.5)}" y="{_px(SVG_H - 12)}" text-anchor="middle" font-size="12">'
        f'probability of {o1} (vs {o0})</text>',
        f'<text x="{X(0)}" y="{_px(SVG_H - MARGIN + 16)}" text-anchor="middle" font-size="10">0</text>',
        f'<text x="{X(1)}" y="{_px(SVG_H - MARGIN + 16)}" text-anchor="middle" font-size="10">1</text>',
    ]
    for label, pts in curves:
        data = " ".join(_dp(x, y) for x, y in pts)
        path = " ".join(f"{X(x)},{Y(y)}" for x, y in pts)
        lines.append(f'<polyline class="cost-curve" data-signal="{label}" data-points="{data}" points="{path}" '
                     f'fill="none" stroke="gray" stroke-dasharray="4 3"/>')
    for i, (y0, y1) in enumerate(zip(lo, hi)):
        lines.append(f'<line class="piece" data-index="{i}" data-points="{_dp(0, y0)} {_dp(1, y1)}" '
                     f'x1="{X(0)}" y1="{Y(y0)}" x2="{X(1)}" y2="{Y(y1)}" stroke="black" stroke-width="0.8"/>')
    data = " ".join(_dp(x, y) for x, y in envelope)
    path = " ".join(f"{X(x)},{Y(y)}" for x, y in envelope)
    lines.append(f'<polyline class="envelope" data-points="{data}" points="{path}" fill="none" '
                 f'stroke="blue" stroke-width="2"/>')
    for label, x, y in markers:
        lines.append(f'<circle class="marker" data-label="{label}" data-point="{_dp(x, y)}" '
                     f'cx="{X(x)}" cy="{Y(y)}" r="3" fill="red"/>')
        lines.append(f'<text x="{X(x)}" y="{_px(float(Y(y)) - 6)}" text-anchor="middle" font-size="9">{label}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# -- commands --------------------------------------------------------------------------------

def _default_tol() -> float:
    raw = os.environ.get("MENUFORGE_TOL")
    if raw is None:
        return DEFAULT_TOL
    try:
        return float(raw)
    except ValueError:
        raise InputError(f"MENUFORGE_TOL={raw!r} is not a number") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _warn_removed(loaded: Loaded) -> None:
    if loaded.removed:
        print(f"warning: removed zero-mass outcomes {loaded.removed}", file=sys.stderr)


def cmd_solve(args) -> int:
    tol = args.tol if args.tol is not None else _default_tol()
    loaded = load_instance(args.instance)
    _warn_removed(loaded)
    report, regime = run_solver(loaded, args.regime, tol, args.epsilon, args.formulation,
                                args.enumerate, args.rewards)
    _emit(dumps(report_json(report, loaded)), args.out)
    if args.plot and report.menu is not None:
        Path(args.plot).write_text(render_svg(loaded, report.menu, regime))
    if report.status not in ("optimal", "trivial"):
        print(f"{report.status}: {report.reason}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_verify(args) -> int:
    tol = args.tol if args.tol is not None else _default_tol()
    loaded = load_instance(args.instance)
    _warn_removed(loaded)
    menu = parse_menu(_load_json(args.menu), loaded)
    regime = detect_regime(loaded.problem, loaded.has_signals) if args.regime == "auto" else args.regime
    plan = default_plan(loaded, regime) if loaded.plan is None or regime != "general" else loaded.plan
    cert = verify_menu(menu, loaded.problem, plan, tol)
    _emit(dumps(certificate_json(cert)), args.out)
    return EXIT_OK if cert.passed else EXIT_FAIL


def cmd_plot(args) -> int:
    loaded = load_instance(args.instance)
    _warn_removed(loaded)
    regime = detect_regime(loaded.problem, loaded.has_signals) if args.regime == "auto" else args.regime
    if args.menu:
        menu = parse_menu(_load_json(args.menu), loaded)
    else:
        report, regime = run_solver(loaded, regime)
        if report.menu is None:
            print(f"{report.status}: {report.reason}", file=sys.stderr)
            return EXIT_FAIL
        menu = report.menu
    _emit(render_svg(loaded, menu, regime), args.out)
    return EXIT_OK


def _reward_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="menuforge", description="Optimal contract menus for hidden actions "
                                     "and costly information acquisition.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("instance", help="instance JSON file")
        p.add_argument("--regime", choices=REGIMES, default="auto")
        p.add_argument("--tol", type=float, default=None, help="feasibility tolerance (env MENUFORGE_TOL, 1e-7)")
        p.add_argument("--out", help="write output here instead of stdout")

    p = sub.add_parser("solve", help="compute a minimum-payment menu")
    common(p)
    p.add_argument("--epsilon", type=float, default=None, help="strict mode: at most this much above optimal")
    p.add_argument("--formulation", choices=("p5", "p6"), default="p6")
    p.add_argument("--plot", help="also write an SVG plot (binary outcomes only)")
    p.add_argument("--enumerate", action="store_true",
                   help="hidden-action regime: add every screened subtangent candidate to the menu")
    p.add_argument("--rewards", type=_reward_list, default=None,
                   help="hidden-action regime without a plan: comma-separated principal reward per outcome; "
                        "targets the action with the best reward minus payment")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="certify a menu against an instance")
    common(p)
    p.add_argument("menu", help="menu JSON (solver output or list of payment vectors)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="render a menu as SVG (binary outcomes only)")
    common(p)
    p.add_argument("menu", nargs="?", help="menu JSON; solved on the fly when omitted")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MenuforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

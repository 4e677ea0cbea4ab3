"""Command-line front end.

Every subcommand prints one JSON document (to ``--out`` or stdout) and a
short human summary on stderr.  Exit codes: 0 PASS, 1 FAIL, 2 usage,
3 resource limit.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from . import __version__
from .boolcore import (
    DEFAULT_BRUTE_CAP,
    XorInstance,
    brute_force_opt,
    gen_3xor,
    instance_from_json,
    instance_to_json,
)
from .errors import ResourceLimitError, SosGapError
from .games import (
    classical_value,
    entangled_upper_bound,
    game_value_under_ncpe,
    nc_moment_check,
    ncsos_lift,
    oracularize,
)
from .protocol import accept_probability, honest_sweep, make_params, norm24_bridge, norm24_grid
from .pseudoexp import (
    PseudoExpectation,
    check_pe,
    grigoriev_pe,
    max_consistent_degree,
    pe_eval,
    pushforward,
    xor_constraints,
    xor_objective,
)
from .qstate import DEFAULT_DIM_CAP, dps_certificate
from .reduce import (
    csp_constraints,
    csp_opt,
    csp_to_json,
    expand_embedding,
    expanderize,
    literal_sum_constraints,
    xor_to_2oo4,
)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3

# Tseitin parity system on K4 (one variable per edge, odd total charge):
# unsatisfiable, OPT = 3/4, and refutation needs width 4.
TSEITIN_K4 = [(0, 1, 2, 1), (0, 3, 4, 1), (1, 3, 5, 1), (2, 4, 5, -1)]


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, err: Exception):
        super().__init__(f"[{stage}] {type(err).__name__}: {err}")
        self.stage, self.err = stage, err


@dataclass
class RunConfig:
    seed: int = 0
    n: int = 10
    m: int = 14
    family: str = "random"
    degree: int | None = None
    copies: int = 1
    level: int = 2
    weights: tuple = (Fraction(1, 4),) * 4
    reps: int = 1
    gamma: float = 1.0
    cap_dim: int = DEFAULT_DIM_CAP
    cap_brute: int = DEFAULT_BRUTE_CAP
    tol_psd: float = 1e-9
    tol_accept: float = 1e-8
    tol_paths: float = 1e-9

    def validate(self) -> None:
        if min(self.tol_psd, self.tol_accept, self.tol_paths) <= 0:
            raise UsageError("tolerances must be positive")
        if self.cap_dim < 4 or self.cap_brute < 3:
            raise UsageError("caps below minimal feasible sizes")
        if self.copies < 1 or self.level < 1 or self.reps < 1:
            raise UsageError("--copies, --level and --reps must be >= 1")
        if len(self.weights) != 4 or sum(self.weights) != 1 or min(self.weights) < 0:
            raise UsageError("--weights needs 4 nonnegative values summing to 1")


@dataclass
class GapReport:
    command: str
    status: str
    config: dict
    digests: dict = field(default_factory=dict)
    pseudo_value: str | float | None = None
    true_value: str | float | None = None
    oracle: str | None = None
    margin: float | None = None
    residuals: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    first_violation: str | None = None
    timestamp: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# helpers


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _num(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return _num(o)


def _parse_weights(s: str) -> tuple:
    try:
        w = tuple(Fraction(t) for t in s.split(","))
    except (ValueError, ZeroDivisionError) as e:
        raise UsageError(f"bad --weights: {e}") from None
    return w


def _config(args) -> RunConfig:
    base = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            base = json.load(fh)
    cfg = RunConfig()
    for k, v in base.items():
        if not hasattr(cfg, k):
            raise UsageError(f"unknown config key {k!r}")
        setattr(cfg, k, tuple(Fraction(t) for t in v) if k == "weights" else v)
    for k in ("seed", "n", "m", "family", "degree", "copies", "level", "reps", "gamma", "cap_dim", "cap_brute"):
        v = getattr(args, k, None)
        if v is not None:
            setattr(cfg, k, v)
    if getattr(args, "weights", None):
        cfg.weights = _parse_weights(args.weights)
    cfg.validate()
    return cfg


def _instance(args, cfg: RunConfig) -> XorInstance:
    if getattr(args, "instance", None):
        with open(args.instance) as fh:
            return instance_from_json(fh.read())
    if cfg.family == "tseitin-k4":
        return XorInstance.from_lists(6, TSEITIN_K4)
    if cfg.n < 3:
        raise UsageError("--n must be >= 3")
    if cfg.m < 1:
        raise UsageError("--m must be >= 1")
    return gen_3xor(cfg.n, cfg.m, cfg.family, cfg.seed)


class _Stages:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def run(self, name, fn, *a, **kw):
        t = time.perf_counter()
        try:
            return fn(*a, **kw)
        except ResourceLimitError as e:
            raise StageError(name, e) from e
        except (SosGapError, ValueError, KeyError, TypeError, json.JSONDecodeError) as e:
            raise StageError(name, e) from e
        finally:
            self.timings[name] = round(time.perf_counter() - t, 6)


def _stamp(stages: _Stages) -> dict:
    return {"utc": datetime.now(timezone.utc).isoformat(), "timings": stages.timings}


def _cfg_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["weights"] = [str(w) for w in cfg.weights]
    return d


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> tuple[int, dict | str]:
    cfg = _config(args)
    inst = _instance(args, cfg)
    text = instance_to_json(inst)
    print(f"gen: n={inst.n} m={inst.m} digest={_digest(text)}", file=sys.stderr)
    return EXIT_PASS, text


def cmd_reduce(args) -> tuple[int, dict | str]:
    cfg = _config(args)
    inst = _instance(args, cfg)
    csp, _ = xor_to_2oo4(inst)
    if not args.no_expand:
        csp = expanderize(csp, seed=cfg.seed)
    text = csp_to_json(csp)
    print(f"reduce: {inst.n} vars -> {csp.nvars} vars, {csp.m} clauses", file=sys.stderr)
    return EXIT_PASS, text


def cmd_pe(args) -> tuple[int, dict | str]:
    cfg = _config(args)
    st = _Stages()
    inst = st.run("load", _instance, args, cfg)
    d = cfg.degree if cfg.degree is not None else st.run("degree", max_consistent_degree, inst)
    rep = GapReport("pe", "FAIL", _cfg_dict(cfg), {"instance": _digest(instance_to_json(inst))})
    if d < 0:
        rep.first_violation = "closure contradicts at width 0"
        rep.timestamp = _stamp(st)
        return EXIT_FAIL, asdict(rep)
    pe = st.run("grigoriev", grigoriev_pe, inst, d)
    val = st.run("validity", check_pe, pe, xor_constraints(inst), False)
    rep.details = {"degree": d, "validity": val.as_dict()}
    rep.residuals = {"psd": max(0.0, -val.min_eig), "constraint": float(val.constraint_residual)}
    ok = val.ok
    if d >= 3:
        rep.pseudo_value = pe_eval(pe, xor_objective(inst))
        ok = ok and rep.pseudo_value == 1
    else:
        rep.first_violation = f"degree {d} < 3: objective not in the pe's domain"
        ok = False
    if args.save_pe:
        with open(args.save_pe, "w") as fh:
            fh.write(pe.to_json())
    rep.first_violation = rep.first_violation or val.first_violation()
    rep.status = "PASS" if ok else "FAIL"
    rep.timestamp = _stamp(st)
    return (EXIT_PASS if ok else EXIT_FAIL), asdict(rep)


def _load_pe(path) -> PseudoExpectation:
    with open(path) as fh:
        return PseudoExpectation.from_json(fh.read())


def cmd_gap(args) -> tuple[int, dict]:
    """Source pe -> gadget CSP -> expander CSP -> pushed pe -> verifier."""
    cfg = _config(args)
    st = _Stages()
    inst = st.run("load", _instance, args, cfg)
    rep = GapReport("gap", "FAIL", _cfg_dict(cfg), {"instance": _digest(instance_to_json(inst))})
    if args.pe:
        pe = st.run("pe-load", _load_pe, args.pe)
        if pe.nvars != inst.n:
            raise StageError("pe-load", ValueError(f"pe has {pe.nvars} variables, instance {inst.n}"))
        val = st.run("pe-check", check_pe, pe, xor_constraints(inst), False)
        if not val.ok:
            raise StageError("pe-check", ValueError(val.first_violation()))
    else:
        d = cfg.degree if cfg.degree is not None else st.run("degree", max_consistent_degree, inst)
        if d < 0:
            raise StageError("grigoriev", ValueError("closure contradicts at width 0"))
        pe = st.run("grigoriev", grigoriev_pe, inst, d)
    opt, _ = st.run("source-opt", brute_force_opt, inst, cfg.cap_brute)
    csp0, emb0 = st.run("reduce", xor_to_2oo4, inst)
    csp = st.run("expanderize", expanderize, csp0, cfg.seed)
    emb = expand_embedding(emb0, csp)
    cons = csp_constraints(csp) + literal_sum_constraints(csp)
    pushed = st.run("pushforward", pushforward, pe, emb, cons)
    params = make_params(csp, cfg.copies, cfg.weights, cfg.reps)
    honest, y = st.run("honest-sweep", honest_sweep, csp, params)
    copt, _ = st.run("csp-opt", csp_opt, csp, "ve")
    rep.true_value = float(honest)
    rep.oracle = "variable elimination over honest witnesses"
    rep.details = {
        "source": {"n": inst.n, "m": inst.m, "opt": str(opt), "pe_degree": pe.degree},
        "csp": {"nvars": csp.nvars, "clauses": csp.m, "opt": str(copt), "pe_degree": pushed.degree},
        "honest_argmax": [int(v) for v in y],
    }
    R = params.registers
    need = 2 * R * cfg.level
    if pushed.degree < 2 * R:
        rep.first_violation = (
            f"pushed pe degree {pushed.degree} < {2 * R} needed for {R} registers "
            f"(source degree {pe.degree}); acceptance of the pe witness is undefined"
        )
        rep.timestamp = _stamp(st)
        return EXIT_FAIL, asdict(rep)
    mat = st.run("accept-matrix", accept_probability, csp, pushed, params, "matrix", cfg.cap_dim)
    pol = st.run("accept-polynomial", accept_probability, csp, pushed, params, "polynomial", cfg.cap_dim)
    rep.pseudo_value = mat.total
    rep.margin = mat.total - honest
    rep.residuals = {
        "accept": max(0.0, 1 - mat.total),
        "paths": abs(mat.total - pol.total),
    }
    rep.details["accept"] = {"matrix": mat.as_dict(), "polynomial": pol.as_dict()}
    viol = None
    if rep.residuals["accept"] > cfg.tol_accept:
        viol = f"accept residual {rep.residuals['accept']:.3e} (tolerance {cfg.tol_accept:.1e})"
    elif rep.residuals["paths"] > cfg.tol_paths:
        viol = f"paths residual {rep.residuals['paths']:.3e} (tolerance {cfg.tol_paths:.1e})"
    if pushed.degree >= need:
        dps = st.run("dps", dps_certificate, pushed, cfg.copies, cfg.level, cfg.tol_psd, False, cfg.cap_dim)
        rep.residuals.update({f"dps_{k}": v for k, v in dps.residuals().items()})
        viol = viol or dps.first_violation()
    else:
        viol = viol or f"pushed pe degree {pushed.degree} < {need} needed for DPS level {cfg.level}"
    if rep.margin <= cfg.tol_accept:
        rep.status = "NOT-A-GAP"
        viol = f"margin {rep.margin:.3e} is not positive (tolerance {cfg.tol_accept:.1e})"
    elif viol is None:
        rep.status = "PASS"
    rep.first_violation = viol
    rep.timestamp = _stamp(st)
    return (EXIT_PASS if rep.status == "PASS" else EXIT_FAIL), asdict(rep)


def cmd_protocol(args) -> tuple[int, dict]:
    """Verifier on the honest witness of the best source assignment."""
    cfg = _config(args)
    st = _Stages()
    inst = st.run("load", _instance, args, cfg)
    opt, x = st.run("source-opt", brute_force_opt, inst, cfg.cap_brute)
    csp0, emb0 = xor_to_2oo4(inst)
    csp = expanderize(csp0, seed=cfg.seed)
    emb = expand_embedding(emb0, csp)
    y = np.array([int(p.evaluate(x)) for p in emb])
    params = make_params(csp, cfg.copies, cfg.weights, cfg.reps)
    mat = st.run("accept-matrix", accept_probability, csp, y, params, "matrix", cfg.cap_dim)
    pol = st.run("accept-polynomial", accept_probability, csp, y, params, "polynomial", cfg.cap_dim)
    honest, _ = st.run("honest-sweep", honest_sweep, csp, params)
    rep = GapReport("protocol", "FAIL", _cfg_dict(cfg), {"instance": _digest(instance_to_json(inst))})
    rep.pseudo_value = mat.total
    rep.true_value = float(honest)
    rep.oracle = "variable elimination over honest witnesses"
    rep.residuals = {"paths": abs(mat.total - pol.total)}
    rep.details = {"source_opt": str(opt), "matrix": mat.as_dict(), "polynomial": pol.as_dict()}
    ok = rep.residuals["paths"] <= cfg.tol_paths and mat.consistent()
    if not ok:
        rep.first_violation = f"paths residual {rep.residuals['paths']:.3e} (tolerance {cfg.tol_paths:.1e})"
    rep.status = "PASS" if ok else "FAIL"
    rep.timestamp = _stamp(st)
    return (EXIT_PASS if ok else EXIT_FAIL), asdict(rep)


def cmd_game_gap(args) -> tuple[int, dict]:
    cfg = _config(args)
    st = _Stages()
    inst = st.run("load", _instance, args, cfg)
    rep = GapReport("game-gap", "FAIL", _cfg_dict(cfg), {"instance": _digest(instance_to_json(inst))})
    opt, _ = st.run("source-opt", brute_force_opt, inst, cfg.cap_brute)
    d = cfg.degree if cfg.degree is not None else st.run("degree", max_consistent_degree, inst)
    game = st.run("oracularize", oracularize, inst)
    cval, _ = st.run("classical", classical_value, game)
    upper = 1 - (1 - opt) / 3
    rep.true_value = str(cval)
    rep.oracle = "exhaustive player-1 strategies with player-2 best response"
    rep.details = {
        "opt": str(opt),
        "classical_value": str(cval),
        "classical_interval": [str(opt), str(upper)],
        "interval_ok": bool(opt <= cval <= upper),
        "entangled_upper_bound": _num(entangled_upper_bound(inst, cfg.gamma, opt)),
        "gamma": cfg.gamma,
        "pe_degree": d,
    }
    if d < 3:
        rep.first_violation = f"pe degree {d} < 3: game polynomial not in the pe's domain"
        rep.timestamp = _stamp(st)
        return EXIT_FAIL, asdict(rep)
    pe = st.run("grigoriev", grigoriev_pe, inst, d)
    nc = ncsos_lift(pe)
    gv = st.run("ncpe-value", game_value_under_ncpe, game, nc)
    level = d // 2
    chk = st.run("nc-moment", nc_moment_check, nc, level)
    rep.pseudo_value = _num(gv)
    rep.margin = float(gv - cval)
    rep.residuals = {"psd": max(0.0, -chk.min_eig), "commutation": float(chk.constraint_residual)}
    rep.details["nc_level"] = level
    viol = None
    if gv != 1:
        viol = f"ncpe game value {gv} != 1 (tolerance 0)"
    viol = viol or chk.first_violation()
    if viol is None and not rep.details["interval_ok"]:
        viol = f"classical value {cval} outside [{opt}, {upper}]"
    if viol is None and cval >= 1:
        rep.status = "NOT-A-GAP"
        viol = "classical value is 1"
    elif viol is None:
        rep.status = "PASS"
    rep.first_violation = viol
    rep.timestamp = _stamp(st)
    return (EXIT_PASS if rep.status == "PASS" else EXIT_FAIL), asdict(rep)


def _parse_matrix(s: str) -> np.ndarray:
    try:
        rows = [[float(t) for t in r.split(",")] for r in s.split(";")]
        A = np.array(rows, dtype=float)
    except ValueError as e:
        raise UsageError(f"bad --matrix: {e}") from None
    if A.ndim != 2:
        raise UsageError("--matrix rows must have equal length")
    return A


def cmd_norm24(args) -> tuple[int, dict]:
    cfg = _config(args)
    st = _Stages()
    if args.matrix:
        A = _parse_matrix(args.matrix)
    else:
        rows, cols = args.rows or 3, args.cols or 3
        A = np.random.default_rng(cfg.seed).normal(size=(rows, cols))
    if A.shape[1] > 4:
        raise UsageError("at most 4 columns (grid oracle)")
    grid, _ = st.run("grid", norm24_grid, A)
    see = st.run("seesaw", norm24_bridge, A, 20, 300, cfg.seed)
    rep = GapReport("norm24", "FAIL", _cfg_dict(cfg))
    rep.pseudo_value = see
    rep.true_value = grid
    rep.oracle = "sphere grid with fixed-point polish"
    rep.residuals = {"oracle": abs(see - grid)}
    rep.details = {"A": A.tolist(), "norm24": grid**0.25}
    tol = args.tol
    ok = rep.residuals["oracle"] <= tol
    if not ok:
        rep.first_violation = f"oracle residual {rep.residuals['oracle']:.3e} (tolerance {tol:.1e})"
    rep.status = "PASS" if ok else "FAIL"
    rep.timestamp = _stamp(st)
    return (EXIT_PASS if ok else EXIT_FAIL), asdict(rep)


def cmd_verify(args) -> tuple[int, dict]:
    """Check a stored pe against a stored instance."""
    cfg = _config(args)
    st = _Stages()
    if not args.instance or not args.pe:
        raise UsageError("verify needs --instance and --pe")
    inst = st.run("load", _instance, args, cfg)
    pe = st.run("pe-load", _load_pe, args.pe)
    if pe.nvars != inst.n:
        raise StageError("pe-load", ValueError(f"pe has {pe.nvars} variables, instance {inst.n}"))
    val = st.run("pe-check", check_pe, pe, xor_constraints(inst), False)
    rep = GapReport("verify", "PASS" if val.ok else "FAIL", _cfg_dict(cfg), {"instance": _digest(instance_to_json(inst))})
    rep.details = {"validity": val.as_dict()}
    rep.residuals = {"psd": max(0.0, -val.min_eig), "constraint": float(val.constraint_residual)}
    rep.first_violation = val.first_violation()
    rep.timestamp = _stamp(st)
    return (EXIT_PASS if val.ok else EXIT_FAIL), asdict(rep)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sosgap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--n", type=int)
        sp.add_argument("--m", type=int)
        sp.add_argument("--family", choices=["random", "planted", "tseitin-k4"])
        sp.add_argument("--instance", help="instance JSON instead of generating")
        sp.add_argument("--degree", type=int)
        sp.add_argument("--copies", type=int)
        sp.add_argument("--level", type=int)
        sp.add_argument("--weights", help="four comma-separated rationals")
        sp.add_argument("--reps", type=int)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--cap-dim", dest="cap_dim", type=int)
        sp.add_argument("--cap-brute", dest="cap_brute", type=int)
        sp.add_argument("--config", help="JSON file of RunConfig fields")
        sp.add_argument("--out", help="write output here instead of stdout")
        return sp

    common(sub.add_parser("gen", help="generate a 3XOR instance")).set_defaults(fn=cmd_gen)
    r = common(sub.add_parser("reduce", help="reduce to 2-out-of-4-SAT-EQ"))
    r.add_argument("--no-expand", action="store_true")
    r.set_defaults(fn=cmd_reduce)
    pp = common(sub.add_parser("pe", help="closure pseudo-expectation and validity"))
    pp.add_argument("--save-pe", dest="save_pe")
    pp.set_defaults(fn=cmd_pe)
    g = common(sub.add_parser("gap", help="full verifier gap pipeline"))
    g.add_argument("--pe", help="source pe JSON instead of the closure pe")
    g.set_defaults(fn=cmd_gap)
    common(sub.add_parser("protocol", help="verifier on an honest witness")).set_defaults(fn=cmd_protocol)
    common(sub.add_parser("game-gap", help="oracularised game and ncSoS lift")).set_defaults(fn=cmd_game_gap)
    nm = common(sub.add_parser("norm24", help="2->4 norm via the h_Sep bridge"))
    nm.add_argument("--matrix", help="rows separated by ';', entries by ','")
    nm.add_argument("--rows", type=int)
    nm.add_argument("--cols", type=int)
    nm.add_argument("--tol", type=float, default=1e-4)
    nm.set_defaults(fn=cmd_norm24)
    v = common(sub.add_parser("verify", help="check a stored pe"))
    v.add_argument("--pe")
    v.set_defaults(fn=cmd_verify)
    return p


def _emit(payload, out) -> None:
    text = payload if isinstance(payload, str) else json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code, payload = args.fn(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        _emit({"command": args.command, "status": "ERROR", "stage": e.stage, "error": str(e.err)}, args.out)
        return EXIT_RESOURCE if isinstance(e.err, ResourceLimitError) else EXIT_FAIL
    except ResourceLimitError as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except SosGapError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    _emit(payload, args.out)
    if isinstance(payload, dict):
        line = f"{payload['command']}: {payload['status']}"
        if payload.get("first_violation"):
            line += f" ({payload['first_violation']})"
        print(line, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: generation, checking, classification, witnesses.

Exit codes: 0 success/SEPARABLE, 2 usage or file-format error, 3 NPT,
4 PPT_EDGE, 5 PPT_ENTANGLED_NONEDGE, 6 UNDETERMINED, 7 verification failure.
All randomness is fixed by --seed; identical command, seed and input produce
byte-identical JSON reports apart from the timestamp field.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import classify as cls
from . import productfind, states
from .errors import FormatError, TrisepError
from .linalg import Tolerance

EXIT_CODES = {cls.SEPARABLE: 0, cls.NPT_ENTANGLED: 3, cls.PPT_EDGE: 4,
              cls.PPT_ENTANGLED_NONEDGE: 5, cls.UNDETERMINED: 6}


def _add_common(p, suppress=False):
    # on subparsers the defaults are suppressed so a flag given before the
    # subcommand is not clobbered by the subparser default
    def d(v):
        return argparse.SUPPRESS if suppress else v

    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--tol-rank", type=float, default=d(1e-10))
    p.add_argument("--tol-psd", type=float, default=d(1e-10))
    p.add_argument("--tol-residual", type=float, default=d(1e-7))
    p.add_argument("--workers", type=int, default=d(1))
    p.add_argument("--format", choices=("json", "text"), default=d("json"))
    p.add_argument("--out", default=d(None), help="write the JSON report to this path")


def build_parser():
    p = argparse.ArgumentParser(prog="trisep",
                                description="separability analysis for 2x2xN states")
    _add_common(p)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a state file")
    g.add_argument("kind", choices=("canonical", "ensemble", "upb", "werner"))
    g.add_argument("path")
    g.add_argument("--n", type=int, default=2, help="Charlie dimension")
    g.add_argument("--terms", type=int, default=3, help="ensemble size")
    g.add_argument("--p", type=float, default=0.3, help="Werner parameter")
    _add_common(g, suppress=True)

    c = sub.add_parser("ppt-check", help="PSD report for all partial transposes")
    c.add_argument("path")
    _add_common(c, suppress=True)

    c = sub.add_parser("classify", help="full separability classification")
    c.add_argument("path")
    c.add_argument("--all-cuts", action="store_true",
                   help="verify biseparability of the other cuts on the rank-4 route")
    _add_common(c, suppress=True)

    c = sub.add_parser("decompose", help="separable decomposition when one is found")
    c.add_argument("path")
    _add_common(c, suppress=True)

    c = sub.add_parser("find-vectors", help="the product-vector set V[rho]")
    c.add_argument("path")
    _add_common(c, suppress=True)

    c = sub.add_parser("witness", help="canonical witness of an edge state")
    c.add_argument("path")
    c.add_argument("--starts", type=int, default=200)
    _add_common(c, suppress=True)

    c = sub.add_parser("verify", help="check a decomposition or witness file")
    c.add_argument("path")
    c.add_argument("evidence")
    _add_common(c, suppress=True)
    return p


def _tol(args):
    return Tolerance(rank_rel=args.tol_rank, psd_abs=args.tol_psd,
                     residual=args.tol_residual)


def _report(args, payload, exit_code=0):
    payload = dict(payload)
    payload["command"] = args.command
    payload["seed"] = args.seed
    payload["tolerances"] = {"rank_rel": args.tol_rank, "psd_abs": args.tol_psd,
                             "residual": args.tol_residual}
    payload["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    text = json.dumps(payload, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    if args.format == "json":
        print(text)
    else:
        print(_as_text(payload))
    return exit_code


def _as_text(payload):
    lines = [f"command: {payload['command']}"]
    for key in ("class", "route", "ranks", "epsilon", "v_size", "residual"):
        if key in payload:
            lines.append(f"{key}: {payload[key]}")
    if "verdict" in payload:
        v = payload["verdict"]
        lines.append(f"class: {v['class']}  route: {v['route']}  ranks: {v['ranks']}")
    return "\n".join(lines)


def cmd_gen(args):
    tol = _tol(args)
    if args.kind == "canonical":
        state = states.random_canonical_state(args.n, args.seed, tol)
        meta = {"kind": "canonical", "n": args.n, "seed": args.seed}
    elif args.kind == "ensemble":
        if args.terms < 1:
            print("ensemble needs --terms >= 1", file=sys.stderr)
            return 2
        state, _ = states.random_separable_state((2, 2, args.n), args.terms,
                                                 args.seed, tol=tol)
        meta = {"kind": "ensemble", "n": args.n, "terms": args.terms,
                "seed": args.seed}
    elif args.kind == "upb":
        state = states.shifts_upb_state(tol)
        meta = {"kind": "upb"}
    elif args.kind == "werner":
        if not 0.0 <= args.p <= 1.0:
            print("werner needs 0 <= --p <= 1", file=sys.stderr)
            return 2
        state = states.werner_ancilla_state(args.p, tol)
        meta = {"kind": "werner", "p": args.p}
    states.save(state, args.path, meta=meta)
    return _report(args, {"path": args.path, "ranks": list(state.ranks),
                          "dims": list(state.dims)})


def cmd_ppt_check(args):
    state = states.load(args.path, _tol(args))
    rep = state.ppt_report()
    code = 0 if all(v["psd"] for v in rep.values()) else 3
    return _report(args, {"ranks": list(state.ranks), "ppt": rep,
                          "all_psd": code == 0}, exit_code=code)


def cmd_classify(args):
    state = states.load(args.path, _tol(args))
    verdict = cls.classify(state, seed=args.seed,
                           verify_all_cuts=getattr(args, "all_cuts", False))
    return _report(args, {"verdict": verdict.to_json(), "class": verdict.klass},
                   exit_code=EXIT_CODES[verdict.klass])


def cmd_decompose(args):
    state = states.load(args.path, _tol(args))
    verdict = cls.classify(state, seed=args.seed)
    if verdict.decomposition is None:
        return _report(args, {"class": verdict.klass, "route": verdict.route,
                              "error": "no separable decomposition found"},
                       exit_code=EXIT_CODES[verdict.klass])
    dec = verdict.decomposition
    return _report(args, {"class": verdict.klass, "route": verdict.route,
                          "decomposition": dec.to_json(),
                          "residual": dec.reconstruction_error(
                              state.rho / state.trace)})


def cmd_find_vectors(args):
    state = states.load(args.path, _tol(args))
    res = productfind.find_product_vectors(state, seed=args.seed)
    return _report(args, {"v_size": len(res), "continuum": res.continuum,
                          "method": res.method,
                          "vectors": [v.to_json() for v in res.vectors]})


def cmd_witness(args):
    state = states.load(args.path, _tol(args))
    try:
        w = cls.build_witness(state, n_starts=args.starts, seed=args.seed)
    except TrisepError as exc:
        return _report(args, {"error": str(exc)}, exit_code=6)
    return _report(args, {"witness": w.to_json(), "epsilon": w.epsilon,
                          "trace_w_rho": w.expectation(state)})


def cmd_verify(args):
    tol = _tol(args)
    state = states.load(args.path, tol)
    try:
        with open(args.evidence) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read evidence: {exc}") from None
    payload = obj.get("decomposition") or obj.get("witness") or obj
    kind = payload.get("type")
    if kind == "decomposition":
        try:
            weights = np.asarray(payload["weights"], dtype=float)
            vectors = [states.ProductVector.from_json(v)
                       for v in payload["vectors"]]
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"bad decomposition payload: {exc}") from None
        if not vectors or vectors[0].dims != state.dims:
            raise FormatError("evidence dimensions do not match the state")
        rec = sum(w * v.projector() for w, v in zip(weights, vectors))
        resid = float(np.linalg.norm(rec - state.rho / state.trace))
        wsum = float(weights.sum())
        ok = resid <= tol.residual * 10 and abs(wsum - 1.0) <= 1e-8 \
            and bool(np.all(weights > 0))
        return _report(args, {"evidence": "decomposition", "residual": resid,
                              "weight_sum": wsum, "pass": bool(ok)},
                       exit_code=0 if ok else 7)
    if kind == "witness":
        try:
            dims = tuple(payload["dims"])
            eps = float(payload["epsilon"])
            mats = {k: np.array([[complex(c[0], c[1]) for c in row]
                                 for row in payload[k]]) for k in "PQRS"}
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"bad witness payload: {exc}") from None
        if dims != state.dims:
            raise FormatError("evidence dimensions do not match the state")
        w = cls.Witness(P=mats["P"], Q=mats["Q"], R=mats["R"], S=mats["S"],
                        epsilon=eps, dims=dims)
        tr = w.expectation(state)
        # recompute the product infimum of the positive part
        eps_chk = cls.epsilon_inf(w.positive_part(), dims, n_starts=100,
                                  seed=args.seed)
        ok = eps > 0 and abs(tr + eps) <= 1e-6 and eps_chk >= eps - 1e-6
        return _report(args, {"evidence": "witness", "trace_w_rho": tr,
                              "epsilon": eps, "epsilon_recheck": eps_chk,
                              "pass": bool(ok)},
                       exit_code=0 if ok else 7)
    raise FormatError(f"unknown evidence type {kind!r}")


COMMANDS = {"gen": cmd_gen, "ppt-check": cmd_ppt_check, "classify": cmd_classify,
            "decompose": cmd_decompose, "find-vectors": cmd_find_vectors,
            "witness": cmd_witness, "verify": cmd_verify}


def main(argv=None):
    args = build_parser().parse_args(argv)
    np.random.seed(args.seed % (2**32))  # defensive: all code paths use Generators
    try:
        return COMMANDS[args.command](args)
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

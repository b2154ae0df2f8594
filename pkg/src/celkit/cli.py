"""Command line front end: ``celkit gen``, ``celkit analyze`` and ``celkit verify``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 inconclusive
result or failed verification.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import celcert, determinant, examples, io, logfactory, spectral
from .errors import CelkitError, ValidationError
from .pathalg import ExpFactorization, make_grid

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_INCONCLUSIVE = 0, 2, 3, 4


def _threads(args):
    t = args.threads if args.threads is not None else os.environ.get("CELKIT_THREADS")
    return max(1, int(t)) if t else 1


def _manifest_path(out):
    return Path(str(out) + ".manifest.json")


def _emit(args, command, params, outputs_docs, seed=None, tolerances=None, inputs=(), csv=None):
    """Write JSON outputs (with the manifest digest) plus optional CSV, then the manifest."""
    man = io.make_manifest(command, params, seed=seed, tolerances=tolerances, inputs=inputs)
    written = []
    for path, doc, schema in outputs_docs:
        doc["manifest_digest"] = man["digest"]
        if schema:
            io.validate(io.to_jsonable(doc), schema)
        io.write_json(doc, path)
        written.append(path)
    if csv is not None:
        cpath, header, rows = csv
        io.write_csv(rows, header, cpath)
        written.append(cpath)
    io.finalize_manifest(man, written, _manifest_path(outputs_docs[0][0]))
    return man


# ------------------------------------------------------------------ gen

def cmd_gen(args):
    grid = make_grid(args.grid)
    if args.subtype == "uniexam":
        P = examples.gen_uniexam(args.n, grid=grid)[0]
        params = {"n": args.n, "grid": args.grid}
    elif args.subtype == "ex2":
        P = examples.gen_ex2(examples.Ex2Params(n=args.n, m=args.m, k=args.k, grid=grid))
        params = {"n": args.n, "m": args.m, "k": args.k, "grid": args.grid}
    elif args.subtype == "ex2ml":
        d = [int(x) for x in args.d.split(",")]
        P, _ = examples.gen_ex2ml_stage(args.n, d, args.stages, grid=grid)
        params = {"n": args.n, "d": d, "stages": args.stages, "grid": args.grid}
    else:
        P = examples.gen_random_detone(args.n, seed=args.seed, grid=grid)
        params = {"n": args.n, "seed": args.seed, "grid": args.grid}
    doc = io.path_to_dict(P)
    _emit(args, f"gen {args.subtype}", params, [(args.out, doc, "path")], seed=args.seed)
    print(f"wrote {args.out} (n={P.n}, {P.grid.size} points)")
    return EXIT_OK


# -------------------------------------------------------------- analyze

def _det(P, args):
    rep = determinant.dls_determinant(P)
    doc = {"kind": "det", "n": P.n, "value": rep.value, "residue": rep.residue, "scaled": rep.scaled,
           "closed": bool(P.is_closed())}
    rows = [[float(t), float(p)] for t, p in zip(P.grid, determinant.det_phases(P))]
    print(f"Det = {rep.value:.12g} (residue mod 1/{P.n}: {rep.residue:.3g})")
    return doc, (["t", "arg_det"], rows), EXIT_OK


def log_certificate(P, res, eps):
    """Serializable certificate for a :class:`logfactory.LogResult`."""
    rep = logfactory.verify_log_certificate(res.source, res.h, eps, res.u1)
    hs = res.h.samples
    traces = (np.trace(hs, axis1=1, axis2=2).real / P.n).tolist()
    norms = np.abs(np.linalg.eigvalsh(hs)).max(axis=1).tolist()
    return {"kind": "log", "eps": eps, "n": P.n, "grid": res.source.grid.tolist(),
            "h": io._pack(hs), "source": io._pack(res.source.samples), "u1": io._pack(res.u1.samples),
            "traces": traces, "norms": norms, "residual": rep.residual, "perturbation": res.perturbation,
            "refined": res.refined, "swap_intervals": res.swap_intervals,
            "length_bound": rep.length_bound, "violations": rep.violations}


def _log(P, args):
    res = logfactory.trace_zero_log_path(P, args.eps)
    doc = log_certificate(P, res, args.eps)
    rows = [[t, tr, nm] for t, tr, nm in zip(doc["grid"], doc["traces"], doc["norms"])]
    print(f"sup ||h|| = {max(doc['norms']):.6f} turns, max |tr h| = {max(map(abs, doc['traces'])):.2e}, "
          f"residual = {doc['residual']:.2e}")
    code = EXIT_OK if not doc["violations"] else EXIT_INCONCLUSIVE
    return doc, (["t", "trace", "norm"], rows), code


def _factorization(P, eps):
    g = P.meta.get("generator")
    if g == "uniexam":
        return examples.gen_uniexam(int(P.meta["n"]), grid=P.grid)[2], "natural"
    if g == "ex2":
        p = examples.Ex2Params(n=int(P.meta["n"]), m=int(P.meta["m"]), k=int(P.meta["k"]),
                               defect_phases=tuple(P.meta["defect_phases"]), grid=P.grid)
        return ExpFactorization([examples.natural_log_ex2(p)]), "natural"
    res = logfactory.trace_zero_log_path(P, min(eps, 1e-6))
    return ExpFactorization([res.h.scaled(2 * np.pi)]), "trace-zero-log"


def _cel(P, args):
    F, source = _factorization(P, args.eps)
    cert = celcert.certify_length_lower_bound(F, step_d=args.step_d, eps=args.eps)
    cert.meta = {"factorization": source, "n": P.n}
    doc = cert.to_dict()
    rows = [[s.s, s.accumulated, s.terminal, s.gap if s.gap is not None else ""] for s in cert.stages]
    print(f"certified lower bound {cert.lower_bound:.6f} ({cert.terminal_reason})")
    return doc, (["s", "bound", "terminal", "gap"], rows), EXIT_OK


def _obstruction(P, args):
    n = int(P.meta.get("n", 0))
    if n < 3:
        raise ValidationError("obstruction needs a block-family path (meta n >= 3)")
    cap = args.cap if args.cap is not None else 2 * (1 - 1 / (n - 1)) * np.pi - 0.1
    seeds = list(range(args.seed, args.seed + args.seeds))
    with ThreadPoolExecutor(max_workers=_threads(args)) as ex:
        results = list(ex.map(lambda s: celcert.best_exp_approx(P, cap, args.budget, seed=s), seeds))
    best = min(results, key=lambda r: (r.residual, r.seed))
    delta = args.delta if args.delta is not None else max(best.residual, 1e-12)
    rep = celcert.obstruction_check(P, best.h, args.eps, delta, cap=cap)
    doc = rep.to_dict()
    doc["threshold"] = celcert.certified_threshold(P, cap)
    doc["oracle_residuals"] = {str(r.seed): r.residual for r in results}
    rows = [[t, lo, hi] for t, w in rep.windows.items() for lo, hi in w]
    print(f"contradiction={rep.contradiction} at delta={delta:.3e}; certified threshold {doc['threshold']:.4g}")
    return doc, (["t", "L_over_N_lo", "L_over_N_hi"], rows), EXIT_OK if rep.contradiction else EXIT_INCONCLUSIVE


def _measure(P, args):
    n = int(P.meta.get("n", 0))
    if n < 2:
        raise ValidationError("measure needs a block-family path (meta n >= 2)")
    ts = np.linspace(1.0 / (n - 1), 1.0, args.t_values)
    out = spectral.measure_concentration_report(P, ts, args.eps)
    th = examples.theta0(n)
    rows, dump = [], []
    for r in out["rows"]:
        rows.append([r.t, "I", r.t * th, args.eps / 2, r.mass_I, r.deviation_I])
        rows.append([r.t, "J", -r.t * th / (n - 1), args.eps / 2, r.mass_J, r.deviation_J])
        dump.append({"t": r.t, "mass_I": r.mass_I, "mass_J": r.mass_J, "deviation_I": r.deviation_I,
                     "deviation_J": r.deviation_J, "violation": r.violation})
    doc = {"kind": "measure", "n": n, "eps": args.eps, "bound": out["bound"], "rows": dump}
    worst = max(r.deviation_I for r in out["rows"])
    print(f"max I_t deviation {worst} (bound {out['bound']:.4g})")
    code = EXIT_INCONCLUSIVE if any(r.violation for r in out["rows"]) else EXIT_OK
    return doc, (["t", "arc", "arc_center", "arc_halfwidth", "mass", "deviation"], rows), code


def _triv(P, args):
    if args.w is not None:
        d = io.read_json(args.w)
        w = np.asarray(d["matrix"], dtype=float)
        w = (w[..., 0] + 1j * w[..., 1]).reshape(P.n, P.n)
    else:
        w = np.eye(P.n)
    r = determinant.check_triv_identity(P.start, P.end, w, P)
    doc = {"kind": "triv-check", "n": P.n, "residual": r}
    print(f"lattice residual {r:.3e}")
    return doc, None, EXIT_OK if r <= 1e-6 else EXIT_INCONCLUSIVE


TASKS = {"det": _det, "log": _log, "cel-lower": _cel, "obstruction": _obstruction,
         "measure": _measure, "triv-check": _triv}


def cmd_analyze(args):
    P = io.read_path(args.input)
    doc, table, code = TASKS[args.task](P, args)
    stem = Path(args.input).with_suffix("")
    out = Path(args.out) if args.out else Path(f"{stem}.{args.task}.json")
    csv = None
    if table is not None:
        header, rows = table
        csv = (Path(args.csv) if args.csv else out.with_suffix(".csv"), header, rows)
    params = {k: v for k, v in vars(args).items() if k not in ("func", "input", "out", "csv", "threads")}
    _emit(args, f"analyze {args.task}", params, [(out, doc, "report")],
          seed=getattr(args, "seed", None), inputs=[args.input], csv=csv)
    print(f"wrote {out}")
    return code


# --------------------------------------------------------------- verify

def verify_document(doc):
    """Re-check a certificate dictionary; returns a list of violations."""
    io.validate(doc, "report")
    kind = doc["kind"]
    if kind == "log":
        n = int(doc["n"])
        h = io._unpack(doc["h"], n)
        src = io._unpack(doc["source"], n)
        u1 = io._unpack(doc["u1"], n) if "u1" in doc else None
        rep = logfactory.verify_log_certificate(src, h, doc["eps"], u1)
        v = [list(x) for x in rep.violations]
        recomputed = np.trace(h, axis1=1, axis2=2).real / n
        for i, (rec, tr) in enumerate(zip(doc["traces"], recomputed)):
            if abs(rec) > logfactory.TRACE_TOL or abs(rec - tr) > 1e-12:
                v.append(["trace-record", i, rec])
        if abs(doc["length_bound"] - rep.length_bound) > 1e-9:
            v.append(["length-bound", -1, doc["length_bound"]])
        return v
    if kind == "cel-lower":
        d = {k: v for k, v in doc.items() if k != "manifest_digest"}
        chk = celcert.verify_cel_certificate(d)
        return [list(x) for x in chk.violations]
    if kind == "obstruction":
        v = []
        sets = [set(x) for x in doc["feasible_L"].values()]
        empty = not set.intersection(*sets) if sets else False
        r = 2 * np.arcsin(min(doc["delta"], 2.0) / 2)
        pinned = doc["N"] * r < np.pi
        if pinned != doc["pinned"]:
            v.append(["pinned", -1, doc["pinned"]])
        if doc["contradiction"] != (empty and pinned):
            v.append(["contradiction", -1, doc["contradiction"]])
        return v
    if kind == "measure":
        v = []
        n = doc["n"]
        for i, r in enumerate(doc["rows"]):
            di = abs(Fraction(r["mass_I"]) - Fraction(1, n))
            dj = abs(Fraction(r["mass_J"]) - Fraction(n - 1, n))
            if str(di) != str(Fraction(r["deviation_I"])) or str(dj) != str(Fraction(r["deviation_J"])):
                v.append(["deviation", i, r["t"]])
        return v
    if kind == "triv-check":
        return [] if doc["residual"] <= 1e-6 else [["residual", -1, doc["residual"]]]
    if kind == "det":
        lat = determinant.TraceLattice(int(doc["n"]))
        return [] if abs(lat.residue(doc["value"]) - doc["residue"]) <= 1e-9 else [["residue", -1, doc["residue"]]]
    return [["kind", -1, kind]]


def cmd_verify(args):
    doc = io.read_json(args.certificate)
    v = verify_document(doc)
    if v:
        print(io.canonical_dumps({"ok": False, "violations": v}))
        return EXIT_INCONCLUSIVE
    msg = {"ok": True, "kind": doc["kind"]}
    if doc["kind"] == "cel-lower":
        msg["lower_bound"] = doc["lower_bound"]
    print(io.canonical_dumps(msg))
    return EXIT_OK


# ----------------------------------------------------------------- main

def build_parser():
    p = argparse.ArgumentParser(prog="celkit", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="worker cap (fallback: CELKIT_THREADS)")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a path file", parents=[common])
    g.add_argument("subtype", choices=["uniexam", "ex2", "ex2ml", "random-detone"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, default=4)
    g.add_argument("--k", type=int, default=0)
    g.add_argument("--d", default="1", help="ex2ml block sizes, comma separated")
    g.add_argument("--stages", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--grid", type=int, default=257)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    a = sub.add_parser("analyze", help="run an analysis on a path file", parents=[common])
    a.add_argument("task", choices=sorted(TASKS))
    a.add_argument("input")
    a.add_argument("--eps", type=float, default=0.1)
    a.add_argument("--step-d", type=float, default=None)
    a.add_argument("--cap", type=float, default=None)
    a.add_argument("--delta", type=float, default=None)
    a.add_argument("--budget", type=int, default=1000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--seeds", type=int, default=1)
    a.add_argument("--t-values", type=int, default=11)
    a.add_argument("--w", default=None, help="JSON file with the conjugating unitary for triv-check")
    a.add_argument("--out", default=None)
    a.add_argument("--csv", default=None)
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify", help="re-check a certificate from its stored data", parents=[common])
    v.add_argument("certificate")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CelkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

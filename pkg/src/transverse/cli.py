"""Command-line front end: ``transverse {gen,check,extract,oracle,bench}``.

Exit codes: 0 success, 2 invalid input, 3 budget or structure failure,
4 certification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .extraction import (
    AnchorTooWeak,
    BudgetExceeded,
    CertificationFailed,
    ConsensusFailed,
    ExtensionFailed,
    ExtractionConfig,
    extract_variety,
)
from .gf_linalg import CapExceeded, FieldSpec
from .gridset import (
    Ambient2,
    BilinearMapSpec,
    GridSet,
    NotTransverse,
    TransverseSet,
    dhor,
    dver,
    enumerate_transverse_small,
    from_lss,
    gen_from_bilinear,
    to_transverse,
)
from .lss import from_transverse, lines_system, quasirandomness_profile
from .variety import is_exact_variety

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_CERT = 0, 2, 3, 4


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    p: int = 2
    nG: int = 2
    nH: int = 2
    eps: float = 0.05
    seed: int = 0
    mode: str = "sampled"
    budget: int | None = None
    inp: str | None = None
    out: str | None = None
    fmt: str = "json"

    def validate(self) -> None:
        try:
            Ambient2(self.p, self.nG, self.nH)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        if not 0 < self.eps < 1:
            raise InputError("--eps must lie in (0, 1)")
        if self.mode not in ("sampled", "exhaustive"):
            raise InputError("--mode must be 'sampled' or 'exhaustive'")
        if self.budget is not None and self.budget < 1:
            raise InputError("--budget must be positive")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def load_set(path: str) -> TransverseSet:
    """Read a transverse set stored either by columns or as a hex grid."""
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    kind = data.get("type") if isinstance(data, dict) else None
    try:
        if kind == "transverse":
            return TransverseSet.from_json(data)
        if kind == "gridset":
            return to_transverse(GridSet.from_json(data))
    except NotTransverse:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: malformed {kind} record: {exc}") from exc
    raise InputError(f"{path}: unknown record type {kind!r}")


def _serialize(T: TransverseSet, fmt: str) -> str:
    return dumps(T.to_gridset().to_json() if fmt == "hex" else T.to_json())


# --------------------------------------------------------------------------
# Subcommands.


def cmd_gen(cfg: RunConfig, args) -> int:
    amb = Ambient2(cfg.p, cfg.nG, cfg.nH)
    if args.kind == "full":
        _emit(_serialize(TransverseSet.full(amb), cfg.fmt), cfg.out)
    elif args.kind == "bilinear":
        dim_V = None if args.codim_v is None else cfg.nH - args.codim_v
        T = gen_from_bilinear(BilinearMapSpec(cfg.p, cfg.nG, cfg.nH, args.r, dim_V=dim_V), cfg.seed)
        _emit(_serialize(T, cfg.fmt), cfg.out)
    elif args.kind == "lss":
        rng = np.random.default_rng(cfg.seed)
        M = rng.integers(0, cfg.p, size=(cfg.nH, cfg.nG))
        _emit(_serialize(from_lss(lines_system(FieldSpec(cfg.p, cfg.nG), M)), cfg.fmt), cfg.out)
    elif args.kind == "enumerate":
        if cfg.out is None:
            raise InputError("gen --kind enumerate needs --out DIR")
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        count = 0
        for count, T in enumerate(enumerate_transverse_small(amb), start=1):
            (out / f"set_{count - 1:06d}.json").write_text(_serialize(T, cfg.fmt))
        sys.stdout.write(dumps({"count": count, "dir": str(out)}))
    return EXIT_OK


def check_report(T: TransverseSet, d: int | None = None) -> dict:
    G = T.to_gridset()
    S = from_transverse(T)
    ok, witness = S.validate()
    if d is None:
        counts = Counter(S.dims.tolist())
        d = min(counts, key=lambda k: (-counts[k], k))
    prof = quasirandomness_profile(S, d)
    return {
        "digest": T.digest(),
        "ambient": T.ambient.header(),
        "density": str(T.density),
        "transverse": True,
        "lss_valid": ok,
        "lss_witness": list(witness) if witness else None,
        "profile": prof.to_json(),
        "dhor_invariant": dhor(G) == G,
        "dver_invariant": dver(G) == G,
    }


def cmd_check(cfg: RunConfig, args) -> int:
    try:
        T = load_set(cfg.inp)
    except NotTransverse as exc:
        _emit(dumps({"transverse": False, "witness": {"kind": exc.kind, "index": exc.index}}), cfg.out)
        return EXIT_INPUT
    _emit(dumps(check_report(T, args.d)), cfg.out)
    return EXIT_OK


def cmd_extract(cfg: RunConfig, args) -> int:
    T = load_set(cfg.inp)
    ecfg = ExtractionConfig(
        eps=cfg.eps, seed=cfg.seed, mode=cfg.mode, anchor_budget=cfg.budget or ExtractionConfig.anchor_budget
    )
    rep = extract_variety(T, ecfg)
    _emit(dumps(rep.to_json()), cfg.out)
    if args.timings:
        Path(args.timings).write_text(dumps({k: round(v, 6) for k, v in rep.timings.items()}))
    return EXIT_OK if rep.certificate.passed else EXIT_CERT


def cmd_oracle(cfg: RunConfig, args) -> int:
    T = load_set(cfg.inp)
    res = is_exact_variety(T, node_budget=cfg.budget or 200_000)
    _emit(dumps({"digest": T.digest(), **res.to_json()}), cfg.out)
    return EXIT_OK


def bench_rows(sets, cfg: RunConfig) -> list[dict]:
    rows = []
    for i, T in enumerate(sets):
        delta = T.density
        L = math.log(1 / float(delta), T.ambient.p) if delta < 1 else 0.0
        row = {
            "index": i,
            "p": T.ambient.p,
            "nG": T.ambient.nG,
            "nH": T.ambient.nH,
            "delta": str(delta),
            "log_inv_delta": round(L, 6),
            "ref_codim_U": round(L**3, 6),
            "ref_codim_V": round(L**2, 6),
            "ref_r": round(L, 6),
        }
        try:
            rep = extract_variety(T, ExtractionConfig(eps=cfg.eps, seed=cfg.seed + i, mode=cfg.mode))
            row.update(
                d=rep.regularity.d,
                codim_U=rep.variety.U.codim,
                codim_V=rep.variety.V.codim,
                r=rep.r,
                route=rep.route,
                certified=rep.certificate.passed,
                status="ok",
            )
        except (BudgetExceeded, AnchorTooWeak, ConsensusFailed, ExtensionFailed, CertificationFailed) as exc:
            row.update(d=None, codim_U=None, codim_V=None, r=None, route=None, certified=False, status=type(exc).__name__)
        rows.append(row)
    return rows


def cmd_bench(cfg: RunConfig, args) -> int:
    amb = Ambient2(cfg.p, cfg.nG, cfg.nH)
    if args.kind == "enumerate":
        sets = list(enumerate_transverse_small(amb))
    elif args.kind == "bilinear":
        sets = [
            gen_from_bilinear(BilinearMapSpec(cfg.p, cfg.nG, cfg.nH, args.r), cfg.seed + i) for i in range(args.count)
        ]
    else:
        raise InputError("bench supports --kind enumerate or bilinear")
    rows = bench_rows(sets, cfg)
    certified = sum(r["certified"] for r in rows)
    if cfg.fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        _emit(buf.getvalue(), cfg.out)
    else:
        _emit(dumps({"rows": rows, "certified": certified, "total": len(rows),
                     "certified_fraction": str(Fraction(certified, len(rows)))}), cfg.out)
    return EXIT_OK if certified == len(rows) else EXIT_CERT


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transverse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--p", type=int, default=2)
        sp.add_argument("--nG", type=int, default=2)
        sp.add_argument("--nH", type=int, default=2)
        sp.add_argument("--eps", type=float, default=0.05)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--mode", default="sampled", choices=["sampled", "exhaustive"])
        sp.add_argument("--budget", type=int, default=None)
        sp.add_argument("--in", dest="inp", default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", dest="fmt", default="json", choices=["json", "hex", "csv"])
        return sp

    g = common(sub.add_parser("gen", help="write a transverse set"))
    g.add_argument("--kind", default="full", choices=["full", "bilinear", "lss", "enumerate"])
    g.add_argument("--r", type=int, default=1)
    g.add_argument("--codim-v", type=int, default=None)
    g.set_defaults(func=cmd_gen)

    c = common(sub.add_parser("check", help="transversality, LSS and quasirandomness checks"))
    c.add_argument("--d", type=int, default=None)
    c.set_defaults(func=cmd_check, needs_input=True)

    e = common(sub.add_parser("extract", help="certified variety extraction"))
    e.add_argument("--timings", default=None, help="write per-stage wall-clock times here")
    e.set_defaults(func=cmd_extract, needs_input=True)

    o = common(sub.add_parser("oracle", help="exact-variety classification"))
    o.set_defaults(func=cmd_oracle, needs_input=True)

    b = common(sub.add_parser("bench", help="sweep extraction over generated sets"))
    b.add_argument("--kind", default="enumerate", choices=["enumerate", "bilinear"])
    b.add_argument("--r", type=int, default=1)
    b.add_argument("--count", type=int, default=10)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        p=args.p, nG=args.nG, nH=args.nH, eps=args.eps, seed=args.seed, mode=args.mode,
        budget=args.budget, inp=args.inp, out=args.out, fmt=args.fmt,
    )
    try:
        cfg.validate()
        if getattr(args, "needs_input", False) and cfg.inp is None:
            raise InputError(f"{args.command} needs --in FILE")
        return args.func(cfg, args)
    except (InputError, NotTransverse, CapExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (BudgetExceeded, AnchorTooWeak, ConsensusFailed, ExtensionFailed) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except CertificationFailed as exc:
        print(f"error: certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT


if __name__ == "__main__":
    sys.exit(main())

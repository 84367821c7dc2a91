"""Command-line front end.

Exit codes: 0 success, 1 domain error, 2 usage error, 3 resource error.
Every subcommand validates its inputs and computes its results before any
output file is opened.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import certify, freecalc, ncpart, oracles, randmat
from .errors import DomainError, ResourceError

CONFIG_SCHEMA = "freept/1"

# Values used when neither a flag nor the config file supplies one.
DEFAULTS = {
    "order": freecalc.DEFAULT_ORDER,
    "format": "text",
    "mode": "closed",
    "eps": 1e-3,
    "grid": "-1:5:0.01",
    "ensemble": "shiftedWishart",
    "rate": None,
    "jump": None,
    "trials": 10,
    "N": 200,
    "k": 1,
}
GROUP_DEFAULTS = {"sim": {"order": 4}}


class UsageError(Exception):
    pass


def scalar(text: str):
    """Rational for integer and ``p/q`` literals, float otherwise."""
    text = str(text).strip()
    try:
        if "/" in text:
            try:
                return Fraction(text)
            except ValueError:
                num, den = text.split("/")
                return float(num) / float(den)
        try:
            return Fraction(int(text))
        except ValueError:
            return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"not a number: {text!r}") from exc


_NEGATIVE = re.compile(r"^-\.?\d")
_FLAGS_WITHOUT_VALUE = {"--pt", "--help", "-h"}


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Rewrite ``--jump -10/87`` as ``--jump=-10/87`` so argparse does not read a flag."""
    out: list[str] = []
    for tok in argv:
        prev = out[-1] if out else ""
        if _NEGATIVE.match(tok) and prev.startswith("--") and "=" not in prev and prev not in _FLAGS_WITHOUT_VALUE:
            out[-1] = f"{prev}={tok}"
        else:
            out.append(tok)
    return out


def parse_grid(spec: str) -> np.ndarray:
    try:
        lo, hi, step = (float(v) for v in spec.split(":"))
    except ValueError as exc:
        raise UsageError(f"grid must be lo:hi:step, got {spec!r}") from exc
    if step <= 0 or hi < lo:
        raise DomainError(f"grid needs step > 0 and hi >= lo, got {spec!r}")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def parse_blocks(text: str) -> list[list[int]]:
    """``"1,3;2;4"`` -> ``[[1, 3], [2], [4]]``."""
    try:
        return [[int(x) for x in blk.split(",") if x.strip()] for blk in text.split(";") if blk.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse blocks {text!r}") from exc


def _writable(path: Optional[str]) -> None:
    if path is None:
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise DomainError(f"output directory {parent} is not writable")


def _emit(text: str, out: Optional[str], summary: str) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text)
        print(summary)


def _need(args, *names) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _read_sequence(path: str, cls):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read sequence file {path}: {exc}") from exc
    if not isinstance(data, dict) or "values" not in data:
        raise DomainError(f"{path} is not a sequence JSON object")
    return cls.from_dict(data)


def _input_sequence(args, cls):
    if args.input is not None:
        return _read_sequence(args.input, cls)
    if args.values is not None:
        return cls(scalar(v) for v in args.values.split(","))
    raise UsageError("give --values or --in")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_nc_enumerate(args) -> int:
    _need(args, "p")
    parts = ncpart.enumerate_nc(args.p)
    if args.format == "json":
        text = json.dumps([q.to_lists() for q in parts])
    else:
        text = "\n".join(repr(q) for q in parts)
    _emit(text, args.out, f"wrote {len(parts)} partitions of {args.p} to {args.out}")
    return 0


def cmd_nc_count(args) -> int:
    _need(args, "p", "blocks", "n")
    pi = ncpart.Partition(args.p, parse_blocks(args.blocks))
    count = ncpart.count_ccw(pi, args.n, mode=args.mode)
    print(f"{pi!r} n={args.n} N={count}")
    return 0


def cmd_calc_convert(args, to_moments: bool) -> int:
    src_cls = freecalc.CumulantSequence if to_moments else freecalc.MomentSequence
    seq = _input_sequence(args, src_cls)
    res = freecalc.cumulants_to_moments(seq) if to_moments else freecalc.moments_to_cumulants(seq)
    text = json.dumps(res.to_dict())
    _emit(text, args.out, f"wrote {res.kind} of order {res.order} ({res.mode}) to {args.out}")
    return 0


def _cumulants_from_args(args):
    if args.input is not None:
        return _read_sequence(args.input, freecalc.CumulantSequence)
    if args.values is not None:
        return freecalc.CumulantSequence(scalar(v) for v in args.values.split(","))
    _need(args, "rate", "jump")
    return freecalc.free_poisson_cumulants(scalar(args.rate), scalar(args.jump), args.order)


def cmd_calc_pt(args) -> int:
    _need(args, "n")
    k = _cumulants_from_args(args)
    res = freecalc.pt_cumulants(k, args.n)
    _emit(json.dumps(res.to_dict()), args.out, f"wrote partial-transpose cumulants (n={args.n}, order {res.order}) to {args.out}")
    return 0


def cmd_calc_density(args) -> int:
    grid = parse_grid(args.grid)
    if args.input is None and args.values is None:
        _need(args, "rate", "jump")
        src = freecalc.FreePoisson(scalar(args.rate), scalar(args.jump))
        if args.n is not None:
            src = freecalc.pt_measure(src, args.n)
        if args.shift is not None:
            src = freecalc.Shifted(src, scalar(args.shift))
    else:
        src = _cumulants_from_args(args)
    points = freecalc.density_from_cumulants(src, grid, args.eps, order=args.order)
    failed = sum(not p.converged for p in points)
    _emit(freecalc.density_csv(points), args.out, f"wrote {len(points)} density points ({failed} not converged) to {args.out}")
    return 0


def _ensemble(args) -> randmat.EnsembleSpec:
    _need(args, "n", "N", "seed")
    kw = {}
    if args.rate is not None:
        kw["rate"] = float(scalar(args.rate))
    if args.jump is not None:
        kw["jump"] = float(scalar(args.jump))
    if args.shift is not None:
        kw["shift"] = float(scalar(args.shift))
    return randmat.EnsembleSpec(args.ensemble, args.n, args.N, seed=args.seed, **kw)


def cmd_sim_spectrum(args) -> int:
    spec = _ensemble(args)
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None and not out_dir.is_dir():
        raise DomainError(f"output directory {out_dir} does not exist")
    res = randmat.simulate(spec, args.trials, order=4, threads=args.threads, keep_spectra=True)
    key = "pt" if args.pt else "x"
    spectra = res[key].spectra
    if out_dir is not None:
        for t, s in enumerate(spectra):
            (out_dir / f"spectrum_{t:03d}.csv").write_text(randmat.spectrum_csv(s))
            (out_dir / f"spectrum_{t:03d}.json").write_text(randmat.spectrum_sidecar(spec, t))
    lo = min(res[key].lambda_min)
    hi = max(res[key].lambda_max)
    print(f"{args.trials} spectra of {spec.kind}{'^Gamma' if args.pt else ''} dim={spec.dim}: lambda range [{lo!r}, {hi!r}]")
    return 0


def compare_moments(spec: randmat.EnsembleSpec, trials: int, order: int, threads=None, z_max: float = 3.0) -> dict:
    res = randmat.simulate(spec, trials, order=order, threads=threads)
    report = {"spec": spec.to_dict(), "trials": trials, "zMax": z_max}
    ok = True
    for key, partial in (("x", False), ("pt", True)):
        pred = [float(v) for v in freecalc.cumulants_to_moments(randmat.limit_cumulants(spec, order, partial)).values]
        st = res[key].moments
        z = [(m - p) / s if s > 0 else (0.0 if m == p else float("inf")) for m, p, s in zip(st.mean, pred, st.stderr)]
        passed = all(abs(v) <= z_max for v in z)
        ok &= passed
        report[key] = {
            "predicted": pred,
            "mean": list(st.mean),
            "stderr": list(st.stderr),
            "z": z,
            "lambdaMin": res[key].lambda_min,
            "lambdaMax": res[key].lambda_max,
            "pass": passed,
        }
    report["pass"] = ok
    return report


def cmd_sim_compare(args) -> int:
    spec = _ensemble(args)
    report = compare_moments(spec, args.trials, args.order, args.threads)
    text = json.dumps(report, indent=2, sort_keys=True)
    verdict = "PASS" if report["pass"] else "FAIL"
    if args.out is None:
        sys.stdout.write(text + "\n")
    else:
        Path(args.out).write_text(text + "\n")
    print(f"{verdict}: empirical vs limit moments for {spec.kind}, {args.trials} trials, dim={spec.dim}")
    return 0


def cmd_certify_window(args) -> int:
    _need(args, "n", "rate")
    lo, hi = certify.ppt_window(args.n, float(scalar(args.rate)))
    print(f"{lo:g} {hi:g}")
    return 0


def cmd_certify_run(args) -> int:
    _need(args, "n", "rate", "jump", "seed")
    p = certify.CertParams(
        n=args.n,
        k=args.k,
        rate=float(scalar(args.rate)),
        jump=float(scalar(args.jump)),
        N=args.N,
        trials=args.trials,
        seed=args.seed,
    )
    report = certify.monte_carlo_certify(p, threads=args.threads)
    text = report.to_json()
    if args.out is None:
        sys.stdout.write(text + "\n")
    else:
        Path(args.out).write_text(text + "\n")
    v = report.verdicts
    print(f"npt={v['npt']} ppt={v['ppt']} kBlockPositive={v['kBlockPositive']} f(n)={report.f_of_n!r} minN={report.min_n}")
    return 0


def cmd_selftest(args) -> int:
    results = oracles.run_selftest()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.seconds:.2f}s)")
    return 0 if all(r.passed for r in results) else 1


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (schema freept/1); flags override it")
    common.add_argument("--threads", type=int, help="worker cap for Monte Carlo trials")
    common.add_argument("--out", help="output path (stdout if omitted)")

    parser = _Parser(prog="freept", description="Free probability of partially transposed block random matrices.")
    sub = parser.add_subparsers(dest="group", parser_class=_Parser)

    nc = sub.add_parser("nc", help="non-crossing partitions").add_subparsers(dest="action", parser_class=_Parser)
    e = nc.add_parser("enumerate", parents=[common])
    e.add_argument("--p", type=int)
    e.add_argument("--format", choices=["json", "text"])
    e.set_defaults(func=cmd_nc_enumerate)
    c = nc.add_parser("count-ccw", parents=[common])
    c.add_argument("--p", type=int)
    c.add_argument("--blocks", help='blocks like "1,3;2;4"')
    c.add_argument("--n", type=int)
    c.add_argument("--mode", choices=["closed", "bruteforce"])
    c.set_defaults(func=cmd_nc_count)

    calc = sub.add_parser("calc", help="cumulant calculus").add_subparsers(dest="action", parser_class=_Parser)
    for name, func in (
        ("m2k", lambda a: cmd_calc_convert(a, to_moments=False)),
        ("k2m", lambda a: cmd_calc_convert(a, to_moments=True)),
        ("pt-cumulants", cmd_calc_pt),
        ("density", cmd_calc_density),
    ):
        sp = calc.add_parser(name, parents=[common])
        sp.add_argument("--values", help="comma-separated sequence, e.g. 0,1,0,2 or 1/2,1/4")
        sp.add_argument("--in", dest="input", help="sequence JSON file")
        sp.add_argument("--order", type=int)
        if name in ("pt-cumulants", "density"):
            sp.add_argument("--n", type=int)
            sp.add_argument("--rate")
            sp.add_argument("--jump")
        if name == "density":
            sp.add_argument("--shift")
            sp.add_argument("--grid", help="lo:hi:step")
            sp.add_argument("--eps", type=float)
        sp.set_defaults(func=func)

    sim = sub.add_parser("sim", help="Monte Carlo").add_subparsers(dest="action", parser_class=_Parser)
    for name, func in (("spectrum", cmd_sim_spectrum), ("compare", cmd_sim_compare)):
        sp = sim.add_parser(name, parents=[common])
        sp.add_argument("--ensemble", choices=list(randmat.ENSEMBLES))
        sp.add_argument("--n", type=int)
        sp.add_argument("--N", type=int)
        sp.add_argument("--rate")
        sp.add_argument("--jump")
        sp.add_argument("--shift")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--order", type=int)
        if name == "spectrum":
            sp.add_argument("--pt", action="store_true", default=None, help="export spectra of the partial transpose")
        sp.set_defaults(func=func)

    cert = sub.add_parser("certify", help="positivity certificates").add_subparsers(dest="action", parser_class=_Parser)
    w = cert.add_parser("window", parents=[common])
    w.add_argument("--n", type=int)
    w.add_argument("--rate")
    w.set_defaults(func=cmd_certify_window)
    r = cert.add_parser("run", parents=[common])
    r.add_argument("--n", type=int)
    r.add_argument("--k", type=int)
    r.add_argument("--rate")
    r.add_argument("--jump")
    r.add_argument("--N", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_certify_run)

    st = sub.add_parser("selftest", parents=[common], help="run the exact oracle suite")
    st.set_defaults(func=cmd_selftest)
    return parser


def _apply_config(args) -> None:
    """Fill unset options from ``--config`` and then from DEFAULTS."""
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if cfg.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
            raise UsageError(f"config schema must be {CONFIG_SCHEMA!r}")
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest != "schema" and hasattr(args, dest) and getattr(args, dest) is None:
                setattr(args, dest, value)
    for key, value in {**DEFAULTS, **GROUP_DEFAULTS.get(args.group, {})}.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = _attach_negative_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            raise UsageError(parser.format_usage())
        _apply_config(args)
        if args.group in ("sim", "certify") and getattr(args, "seed", "n/a") is None:
            raise UsageError("--seed is required (no implicit entropy)")
        if args.func is not cmd_sim_spectrum:
            _writable(getattr(args, "out", None))
        return args.func(args)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return 3
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())

"""``ergolab`` command line.

Exit codes: 0 success, 1 failed checks (``verify``), 2 validation error,
3 resource-cap error.  ``ERGOLAB_CELL_CAP`` and ``ERGOLAB_THREADS`` override
the cell cap and thread count.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .cellsys import CellCapError, CellSet, set_cell_cap
from .zoo import DescriptorError

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_CAP = 0, 1, 2, 3


def _ints(text: str) -> list[int]:
    """``"1,2,5"`` or ``"1:8"`` (inclusive) or ``"1:64:2"``."""
    text = text.strip()
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) == 2:
            parts.append(1)
        start, stop, step = parts
        return list(range(start, stop + 1, step))
    return [int(p) for p in text.split(",") if p.strip()]


def _ints_arg(text: str) -> list[int]:
    try:
        out = _ints(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty integer list")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ergolab", description="Exact finite-cell diagnostics for automorphisms and extensions.")
    p.add_argument("--cell-cap", type=int, default=None, help="maximum cell count (default 2**24 or ERGOLAB_CELL_CAP)")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--threads", type=int, default=None, help="worker threads (default ERGOLAB_THREADS or 1)")

    ls = sub.add_parser("list-systems", help="print the descriptor grammar and the system inventory")
    ls.add_argument("--format", choices=("text", "structured"), default="text")

    v = sub.add_parser("verify", help="run acceptance checks")
    v.add_argument("suite", nargs="?", default="all", help="suite name or 'all' (see --list)")
    v.add_argument("--list", action="store_true", help="list suites and exit")

    d = sub.add_parser("diag", help="evaluate one functional on one system")
    d.add_argument("--system", required=True, help='descriptor, e.g. "odometer(b=2, l=8)"')
    d.add_argument(
        "--functional",
        required=True,
        choices=("phi", "psi", "psi_a", "triple_forward", "triple_backward", "h_j"),
    )
    d.add_argument("--N", type=int, default=4)
    d.add_argument("--j", type=_ints_arg, default=[1], help="lag(s); for h_j the lag set P_j")
    d.add_argument("--a", default="1", help="a for psi_a (decimal or p/q)")
    d.add_argument("--i-max", type=int, default=16, help="canonical family length")
    d.add_argument("--set", type=_ints_arg, default=None, help="cells of A for triple correlations (default: first half)")
    d.add_argument("--partition", default="blocks:2", help="coordinate:<c> | blocks:<b> | random:<classes>:<seed>")

    s = sub.add_parser("spectral-classify", help="singularity test on a correlation sequence")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--csv", help="correlation CSV with columns s, re, im")
    src.add_argument("--system", help="descriptor of an internal system (uses --cells)")
    s.add_argument("--cells", type=_ints_arg, default=[0], help="support of the indicator vector for --system")
    s.add_argument("--s-max", type=int, default=4096)
    s.add_argument("--band-limited", action="store_true", help="the CSV sequence vanishes beyond s_max")
    s.add_argument("--N", type=_ints_arg, default=[2, 4, 8])
    s.add_argument("--P", type=_ints_arg, default=[4, 8, 16, 32, 64])
    return p


def _cmd_run(args) -> int:
    from .runner import ConfigError, run_config

    try:
        paths = run_config(args.config, args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CellCapError as exc:
        print(f"error: {exc}; no outputs written", file=sys.stderr)
        return EXIT_CAP
    for p in paths.values():
        print(p)
    return EXIT_OK


def _cmd_list(args) -> int:
    from .zoo import catalog

    cat = catalog()
    if args.format == "structured":
        print(json.dumps(cat, indent=2, sort_keys=True))
        return EXIT_OK
    print(f"grammar: {cat['grammar']}")
    print(f"cell cap: {cat['cell_cap']} cells")
    for s in cat["systems"]:
        print(f"  {s['kind']}({', '.join(s['parameters'])})  {s['bounds']}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import SUITES, run_suites

    if args.list:
        for name, (_, doc) in SUITES.items():
            print(f"{name:12s} {doc}")
        return EXIT_OK
    if args.suite != "all" and args.suite not in SUITES:
        print(f"error: unknown suite {args.suite!r}; try --list", file=sys.stderr)
        return EXIT_INVALID
    checks = run_suites([args.suite] if args.suite != "all" else list(SUITES))
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_FAILED if failed else EXIT_OK


def _parse_partition(t, text):
    from .zoo import block_partition, coordinate_partition, random_partition

    kind, *rest = text.split(":")
    if kind == "coordinate":
        return coordinate_partition(t, int(rest[0]) if rest else 0)
    if kind == "blocks":
        return block_partition(t.space, int(rest[0]) if rest else 2)
    if kind == "random":
        return random_partition(t.space, int(rest[0]), int(rest[1]) if len(rest) > 1 else 0)
    raise ValueError(f"unknown partition {text!r}")


def _cmd_diag(args) -> int:
    from .asymptotics import phi_mix, psi_partial, psi_rigid, triple_correlation
    from .seqentropy import h_j
    from .zoo import build, canonical_family

    t = build(args.system)
    out = {"system": args.system, "functional": args.functional}
    if args.functional in ("phi", "psi", "psi_a"):
        fam = canonical_family(t.space, args.i_max)
        fn = {"phi": phi_mix, "psi": psi_rigid}.get(args.functional)
        for j in args.j:
            if fn is None:
                v = psi_partial(t, fam, Fraction(args.a), args.N, j)
            else:
                v = fn(t, fam, args.N, j)
            out.setdefault("values", []).append({"j": j, "exact": str(v), "value": float(v)})
    elif args.functional.startswith("triple"):
        cells = args.set if args.set is not None else list(range(t.n // 2))
        a = CellSet.from_members(t.space, cells)
        direction = args.functional.split("_")[1]
        for m in args.j:
            v = triple_correlation(t, a, m, direction)
            out.setdefault("values", []).append({"m": m, "exact": str(v), "value": float(v)})
    else:
        xi = _parse_partition(t, args.partition)
        out["lags"] = sorted(set(args.j))
        out["value"] = h_j(t, xi, args.j)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _cmd_spectral(args) -> int:
    from .spectral import CorrelationSequence, classify_singular, correlation_sequence
    from .zoo import build

    if min(args.P) < 3:
        print("error: P must be at least 3", file=sys.stderr)
        return EXIT_INVALID
    if args.csv:
        corr = CorrelationSequence.from_csv(args.csv, band_limited=args.band_limited)
    else:
        t = build(args.system)
        f = CellSet.from_members(t.space, args.cells).indicator().normalized()
        corr = correlation_sequence(t, f, args.s_max)
    verdict = classify_singular(corr, args.N, args.P)
    print(verdict.to_json())
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "list-systems": _cmd_list,
    "verify": _cmd_verify,
    "diag": _cmd_diag,
    "spectral-classify": _cmd_spectral,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.cell_cap is not None:
        set_cell_cap(args.cell_cap)
    try:
        return COMMANDS[args.command](args)
    except CellCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (DescriptorError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    finally:
        if args.cell_cap is not None:
            set_cell_cap(None)


if __name__ == "__main__":
    sys.exit(main())

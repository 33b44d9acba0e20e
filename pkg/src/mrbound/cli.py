"""Command-line entry point: ``mrbound <command> ...``.

Exit codes: 0 ok, 1 verification failure or mismatch, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .certificate import Certificate, CertificateError
from .certifier import SearchBudget, Verdict, best_bound, search_cbound, verify
from .orthosim import adversarial_lower_bound, verify_decomposition
from .report import format_down, format_up, reference_rows


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _block_params(text: str) -> tuple[int, int]:
    try:
        m, l = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected m,l") from None
    if m < 1 or l < 2:
        raise argparse.ArgumentTypeError("need m >= 1 and l >= 2")
    return m, l


def _add_budget(p: argparse.ArgumentParser, max_m: int = 64, max_l: int = 16) -> None:
    p.add_argument("--max-index", type=_positive, default=None, help="cap on intermediate indices (default 4n)")
    p.add_argument("--max-m", type=_positive, default=max_m)
    p.add_argument("--max-l", type=_positive, default=max_l)
    p.add_argument("--max-steps", type=_positive, default=64, help="cap on value-iteration sweeps")


def _budget(args: argparse.Namespace) -> SearchBudget:
    return SearchBudget(args.max_index, args.max_m, args.max_l, args.max_steps)


def _emit(rows: list[dict], fmt: str, text_lines: list[str], out=None) -> None:
    out = out or sys.stdout
    if fmt == "json":
        payload = rows[0] if len(rows) == 1 else rows
        out.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    elif fmt == "csv":
        buf = io.StringIO()
        keys = sorted({k for r in rows for k in r if not isinstance(r[k], (dict, list))})
        w = csv.DictWriter(buf, fieldnames=keys, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        out.write(buf.getvalue())
    else:
        out.write("\n".join(text_lines) + "\n")


def cmd_bound(args: argparse.Namespace) -> int:
    cert = best_bound(args.n, _budget(args))
    v = cert.final_bound
    chain = " -> ".join(str(s.rule) for s in cert.steps)
    row = {
        "n": args.n,
        "hi": v.hi,
        "hi_hex": v.hi.hex(),
        "display": format_up(v.hi),
        "exact": None if v.exact is None else str(v.exact),
        "steps": len(cert.steps),
        "budget_limited": cert.budget_limited,
    }
    if args.certificate and args.format == "json":
        row["certificate"] = cert.to_dict()
    lines = [f"D_{args.n} <= {format_up(v.hi)}" + (f"  (= {v.exact})" if v.exact is not None else "")]
    lines.append(f"chain: {chain}")
    if cert.budget_limited:
        lines.append("warning: budget-limited (no fixed point reached)")
    if args.certificate and args.format == "text":
        lines.append(cert.to_json())
    _emit([row], args.format, lines)
    return 0


def cmd_cbound(args: argparse.Namespace) -> int:
    if args.max_l < 2:
        raise SystemExit(_usage_error(args, "--max-l must be at least 2"))
    result = search_cbound(_budget(args))
    cb = result.cbound
    hi = cb.value.hi
    notes = [f"< {name}" for name, q in (("1/4", 0.25), ("1/5", 0.2), ("1/9", 1 / 9)) if hi < q]
    note = notes[-1] if notes else ""
    row = {
        "C_hi": hi,
        "display": format_up(hi),
        "m": cb.witness_m,
        "l": cb.witness_l,
        "D_m": cb.bound_on_dm.hi,
        "D_l_minus_1": cb.bound_on_dl_minus_1.hi,
        "note": note,
    }
    lines = [
        f"C <= {format_up(hi)}  {note}".rstrip(),
        f"witness m={cb.witness_m} l={cb.witness_l}: D_m <= {format_up(cb.bound_on_dm.hi)}, "
        f"D_(l-1) <= {format_up(cb.bound_on_dl_minus_1.hi)}",
    ]
    _emit([row], args.format, lines)
    return 0


def cmd_certify(args: argparse.Namespace) -> int:
    cert = best_bound(args.n, _budget(args))
    text = cert.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote certificate for D_{args.n} <= {format_up(cert.final_bound.hi)} ({len(cert.steps)} steps) to {args.out}")
    else:
        print(text)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        cert = Certificate.from_json(Path(args.infile).read_text(encoding="utf-8"))
    except CertificateError as exc:
        verdict, message = Verdict(exc.verdict), str(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    else:
        verdict, message = verify(cert)
    print(f"{verdict.value}: {message}")
    return 0 if verdict is Verdict.VALID else 1


def cmd_simulate(args: argparse.Namespace) -> int:
    atoms = args.atoms or 4 * args.n
    if atoms < args.n:
        raise SystemExit(_usage_error(args, "--atoms must be at least --n"))
    decomp = None
    if args.decomp:
        m, l = args.decomp
        if args.n % (2 * m + l):
            raise SystemExit(_usage_error(args, f"--n must be a multiple of 2m+l = {2 * m + l}"))
        decomp = (args.n // (2 * m + l), m, l)
    best, witness = adversarial_lower_bound(
        args.n, atoms, args.restarts, args.iters, args.seed, args.field
    )
    certified = best_bound(args.n).final_bound.hi
    row: dict = {
        "n": args.n,
        "atoms": atoms,
        "restarts": args.restarts,
        "iters": args.iters,
        "seed": args.seed,
        "best": best,
        "certified": certified,
        "sandwich_ok": best <= certified,
    }
    lines = [
        f"n={args.n} K={atoms}: best E max|S|^2 = {format_down(best, 9)}",
        f"certified D_{args.n} <= {format_up(certified)}  sandwich {'ok' if best <= certified else 'VIOLATED'}",
    ]
    ok = best <= certified
    if decomp:
        report = verify_decomposition(witness, *decomp)
        row["decomposition"] = report.to_dict()
        row["decomposition_ok"] = report.chain_holds and report.theorem_holds
        ok &= row["decomposition_ok"]
        lines.append(
            f"decomposition n_blocks={decomp[0]} m={decomp[1]} l={decomp[2]}: "
            f"LHS {report.lhs:.6f} <= MID {report.mid:.6f} <= RHS {report.rhs:.6f} "
            f"{'holds' if report.chain_holds else 'FAILS'}"
        )
    if args.witness_out:
        Path(args.witness_out).write_text(witness.to_json() + "\n", encoding="utf-8")
    _emit([row], args.format, lines)
    return 0 if ok else 1


def cmd_table(args: argparse.Namespace) -> int:
    rows = reference_rows()
    dicts = [r.to_dict() for r in rows]
    width = max(len(r.label) for r in rows)
    lines = [
        f"{r.label:<{width}}  {r.index:<9}  ref {r.reference or '-':<28} computed {r.display_value():<10}  {r.status}"
        for r in rows
    ]
    _emit(dicts, args.format, lines)
    return 1 if any(r.status == "MISMATCH" for r in rows) else 0


def _usage_error(args: argparse.Namespace, message: str) -> int:
    args._parser.print_usage(sys.stderr)
    print(f"{args._parser.prog}: error: {message}", file=sys.stderr)
    return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrbound", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = {"choices": ("text", "json", "csv"), "default": "text"}

    p = sub.add_parser("bound", help="certified upper bound on D_n")
    p.add_argument("--n", type=_positive, required=True)
    _add_budget(p)
    p.add_argument("--format", **fmt)
    p.add_argument("--certificate", action="store_true", help="include the full certificate")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("cbound", help="optimize the bound on C over block parameters")
    _add_budget(p)
    p.add_argument("--format", **fmt)
    p.set_defaults(func=cmd_cbound)

    p = sub.add_parser("certify", help="write a certificate for D_n")
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--out", help="output file (stdout if omitted)")
    _add_budget(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify", help="replay a certificate")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="adversarial search over finite-atom orthogonal systems")
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--atoms", type=_positive, default=None, help="number of atoms K (default 4n)")
    p.add_argument("--restarts", type=_positive, default=20)
    p.add_argument("--iters", type=_positive, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--field", choices=("real", "complex"), default="real")
    p.add_argument("--decomp", type=_block_params, default=None, metavar="M,L")
    p.add_argument("--witness-out", default=None)
    p.add_argument("--format", **fmt)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("table", help="recompute every published value")
    p.add_argument("--paper", action="store_true", help="compare against the published values (the default)")
    p.add_argument("--format", **fmt)
    p.set_defaults(func=cmd_table)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args._parser = next(
        a for a in parser._subparsers._group_actions if isinstance(a, argparse._SubParsersAction)
    ).choices[args.command]
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

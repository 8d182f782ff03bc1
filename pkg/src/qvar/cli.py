"""Command-line front end.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 qubit budget
exceeded.  QVAR_QUBIT_CAP overrides the default 24-qubit budget.  Flags
override config-file fields; every subcommand takes --config pointing at a
single JSON document.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import nogo as nogo_mod
from .blockenc import assemble_block_encoding
from .errors import QvarError
from .market import payoff_vector
from .mc import simulate_paths
from .pde import assemble_operator, price_american, price_european
from .pipeline import emit_report, load_run_config, run_pipeline
from .qpca import PcaJob, assemble_portfolio_state
from .qsvt import apply_qsvt, prepare_value_state, svd_transform_oracle


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="JSON config document")
    p.add_argument("--output", default=None, help="output file (default stdout)")


def _overridden_config(args) -> dict:
    with open(args.config) as fh:
        doc = json.load(fh)
    for key in ("L", "m", "q", "seed", "s0"):
        val = getattr(args, key.lower(), None)
        if val is not None:
            doc[key] = val
    return doc


def cmd_price(args) -> int:
    cfg = load_run_config(_overridden_config(args))
    pricer = price_american if args.style == "american" else price_european
    surface = pricer(cfg.market, cfg.grid, cfg.payoff)
    lines = ["S,V"]
    for s, v in zip(cfg.grid.nodes, surface.values):
        lines.append(f"{float(s)!r},{float(v)!r}")
    _write("\n".join(lines) + "\n", args.output)
    return 0


def cmd_simulate(args) -> int:
    cfg = load_run_config(_overridden_config(args))
    paths = simulate_paths(cfg.market, cfg.s0, cfg.L, cfg.m)
    lines = ["k,price"]
    for k, price in enumerate(paths.prices, start=1):
        lines.append(f"{k},{float(price)!r}")
    _write("\n".join(lines) + "\n", args.output)
    return 0


def cmd_verify_be(args) -> int:
    cfg = load_run_config(_overridden_config(args))
    mtilde = assemble_operator(cfg.market, cfg.grid).plus_identity()
    be = assemble_block_encoding(mtilde)
    doc = {"gamma": be.gamma, "ancillas": be.a, "certified_error": be.eps}
    _write(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.output)
    return 0


def cmd_verify_qsvt(args) -> int:
    cfg = load_run_config(_overridden_config(args))
    prepared = prepare_value_state(payoff_vector(cfg.payoff, cfg.grid),
                                   cfg.market, cfg.grid, cfg.eps1)
    mtilde = assemble_operator(cfg.market, cfg.grid).plus_identity()
    be = assemble_block_encoding(mtilde.transpose())
    circuit = apply_qsvt(be, prepared.phases)
    oracle = svd_transform_oracle(mtilde.transpose().to_dense(), prepared.target,
                                  be.gamma)
    block_err = float(np.abs(circuit.block - oracle).max())
    doc = {
        "degree": prepared.target.degree,
        "residual": prepared.phases.residual,
        "block_error": block_err,
        "success_probability": prepared.success_probability,
    }
    _write(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.output)
    return 0


def cmd_assemble(args) -> int:
    cfg = load_run_config(_overridden_config(args))
    prepared = prepare_value_state(payoff_vector(cfg.payoff, cfg.grid),
                                   cfg.market, cfg.grid, cfg.eps1)
    paths = simulate_paths(cfg.market, cfg.s0, cfg.L, cfg.m)
    mode = "trotterized" if args.mode == "trotter" else "exact_exponential"
    job = PcaJob(m=cfg.m, mode=mode)
    assembled = assemble_portfolio_state(paths, prepared.state, cfg.grid, job)
    lines = ["k,price,value,error_vs_oracle"]
    for row in assembled.branches:
        lines.append(f"{row.k},{float(row.snapped_price)!r},"
                     f"{float(row.value)!r},{float(row.error)!r}")
    _write("\n".join(lines) + "\n", args.output)
    return 0


def _run_and_report(args, force_mode: str | None = None) -> int:
    doc = _overridden_config(args)
    if force_mode is not None:
        doc["mode"] = force_mode
    elif getattr(args, "mode", None) is not None:
        doc["mode"] = {"classical": "classical", "quantum-exact": "quantum_exact",
                       "quantum-sampled": "quantum_sampled"}.get(args.mode, args.mode)
    result = run_pipeline(load_run_config(doc))
    _write(emit_report(result, "json") + "\n", args.output)
    return 0


def cmd_var(args) -> int:
    return _run_and_report(args)


def cmd_cvar(args) -> int:
    return _run_and_report(args)


def cmd_run(args) -> int:
    return _run_and_report(args)


def cmd_nogo(args) -> int:
    curve = nogo_mod.copy_curve(args.max_d, args.threshold)
    lines = ["d,min_copies"]
    for d, m in curve:
        lines.append(f"{d},{m}")
    _write("\n".join(lines) + "\n", args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qvar",
        description="VaR/CVaR engines for European option portfolios: "
                    "classical finite differences next to a desk-scale "
                    "quantum-circuit simulation.",
        epilog="Exit codes: 0 success, 2 config error, 3 numerical failure, "
               "4 qubit budget exceeded.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="finite-difference value surface as CSV")
    p.add_argument("--style", choices=["european", "american"], default="european")
    _add_common(p)
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("simulate", help="deterministic scenario paths as CSV")
    p.add_argument("--paths", type=int, dest="l", default=None)
    p.add_argument("--bits", type=int, dest="m", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-be", help="block-encoding certificate as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_verify_be)

    p = sub.add_parser("verify-qsvt", help="polynomial/phase diagnostics as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_verify_qsvt)

    p = sub.add_parser("assemble", help="per-branch value codes as CSV")
    p.add_argument("--mode", choices=["exact", "trotter"], default="exact")
    _add_common(p)
    p.set_defaults(func=cmd_assemble)

    for name, fn in (("var", cmd_var), ("cvar", cmd_cvar), ("run", cmd_run)):
        p = sub.add_parser(name, help=f"{name} pipeline report as JSON")
        p.add_argument("--level", type=float, dest="q", default=None)
        p.add_argument("--bits", type=int, dest="m", default=None)
        p.add_argument("--mode",
                       choices=["classical", "quantum-exact", "quantum-sampled"],
                       default=None)
        p.add_argument("--seed", type=int, default=None)
        _add_common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("nogo", help="copy-count lower-bound curve as CSV")
    p.add_argument("--max-d", type=int, default=256)
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_nogo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QvarError as exc:
        print(f"qvar: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

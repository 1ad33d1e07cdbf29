"""Command-line entry point: ``aggdiff <subcommand> [--config FILE] [--key value ...]``.

Exit codes: 0 success, 1 run failure (e.g. bad bisection bracket),
2 configuration or usage error, 3 numerical blowup.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from .ansatz import AnsatzSpec, build
from .energetics import energy, energy_single_peak, energy_twin_equal, energy_twin_unequal
from .errors import AggDiffError, BracketError, ConfigError, InvalidParameterError, NumericalBlowupError
from .experiments import (
    KNOWN_KEYS,
    ExperimentConfig,
    SweepResult,
    output_root,
    rc_bisect,
    run,
    run_simulation,
    write_trajectory,
)
from .io import load_mapping
from .spatial import make_grid

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _parse_overrides(tokens) -> dict:
    """Turn ``--key value`` pairs into a dict; values are parsed as YAML scalars."""
    out = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--"):
            raise _UsageError(f"unexpected argument {tok!r}")
        key, eq, val = tok[2:].partition("=")
        key = key.replace("-", "_")
        if key not in KNOWN_KEYS:
            raise _UsageError(f"unknown option --{key}")
        if not eq:
            try:
                val = next(it)
            except StopIteration:
                raise _UsageError(f"option --{key} needs a value") from None
        out[key] = yaml.safe_load(val)
    return out


def _config(args, overrides, kind=None) -> ExperimentConfig:
    mapping = load_mapping(args.config) if args.config else {}
    if kind is not None:
        mapping.setdefault("experiment", kind)
    mapping.update(overrides)
    return ExperimentConfig.from_mapping(mapping)


def _outdir(args, cfg) -> Path:
    out = args.out or cfg.get("output_dir") or f"runs/{cfg.kind}-{cfg.hash}"
    return output_root() / out


def _cmd_simulate(args, overrides):
    cfg = _config(args, overrides)
    if cfg.kind != "simulate":
        raise ConfigError(f"'simulate' expects experiment: simulate, got {cfg.kind!r} (use 'sweep')")
    traj, verdict, row = run_simulation(cfg)
    out = _outdir(args, cfg)
    snaps = cfg.get("snapshot_times") or [traj.times[0], traj.times[-1]]
    write_trajectory(traj, out, snapshot_times=snaps)
    with open(out / "result.json", "w") as fh:
        json.dump(row, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{verdict.label}  ->  {out}")
    return EXIT_OK


def _cmd_sweep(args, overrides):
    cfg = _config(args, overrides)
    if cfg.kind == "simulate":
        raise ConfigError("'sweep' needs an experiment kind other than 'simulate'")
    res = run(cfg)
    out = _outdir(args, cfg)
    res.write(out)
    print(f"{res.kind}: {len(res.rows)} rows  ->  {out}")
    return EXIT_OK


def _cmd_rc(args, overrides):
    cfg = _config(args, overrides, kind="rc_bisect")
    record = []
    rc = rc_bisect(cfg, record=record)
    res = SweepResult("rc_bisect", record, cfg.hash, extra={"r_c": rc})
    out = _outdir(args, cfg)
    res.write(out)
    print(f"r_c = {rc:.4f}  ->  {out}")
    return EXIT_OK


def _frange(text):
    parts = [float(v) for v in str(text).split(":")]
    if len(parts) == 1:
        return np.array(parts)
    if len(parts) != 3 or parts[2] <= 0:
        raise ConfigError(f"range must be start:stop:step, got {text!r}")
    a, b, h = parts
    n = int(np.floor((b - a) / h + 1e-9)) + 1
    return a + h * np.arange(n)


def _cmd_energy_table(args, overrides):
    if overrides:
        raise _UsageError(f"energy-table does not take {sorted(overrides)}")
    kind = args.ansatz.replace("-", "_")
    aliases = {"single": "single", "twin_equal": "twin_equal", "twin": "twin_equal", "twin_unequal": "twin_unequal"}
    if kind not in aliases:
        raise ConfigError(f"unknown ansatz {args.ansatz!r}")
    kind = aliases[kind]
    sigma = args.delta / np.sqrt(3.0)
    grid = make_grid(args.L, args.N)
    if kind == "twin_unequal":
        name = "cB"
        values = _frange(args.cB if args.cB is not None else f"0:{args.p / (np.sqrt(2) * np.pi * sigma):.6f}:0.25")
    else:
        name = "eps"
        values = _frange(args.eps if args.eps is not None else f"0:{args.p / (2 * args.L)}:0.05")
    rows = []
    for v in values:
        v = float(v)
        if kind == "single":
            closed = energy_single_peak(v, args.p, args.L, sigma)
            spec = AnsatzSpec("single", p=args.p, L=args.L, sigma=sigma, eps=v)
        elif kind == "twin_equal":
            closed = energy_twin_equal(v, args.p, args.L, sigma)
            spec = AnsatzSpec("twin_equal", p=args.p, L=args.L, sigma=sigma, eps=v, x0=args.x0)
        else:
            closed = energy_twin_unequal(v, args.p, sigma)
            spec = AnsatzSpec("twin_unequal", p=args.p, L=args.L, sigma=sigma, cB=v, x0=args.x0)
        quad = energy(build(spec, grid), sigma**2)
        rows.append((v, closed, quad, abs(quad - closed) / abs(closed)))
    lines = [f"{name},closed_form,quadrature,rel_diff"]
    lines += [f"{v:.6g},{c:.10g},{q:.10g},{e:.3e}" for v, c, q, e in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        path = output_root() / args.out
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_validate(args, overrides):
    cfg = _config(args, overrides)
    print(json.dumps({"config_hash": cfg.hash, "config": cfg.to_dict()}, indent=2, sort_keys=True))
    return EXIT_OK


def _build_parser():
    top = _Parser(prog="aggdiff", description="Aggregation-diffusion simulations and analyses.")
    sub = top.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    for name, helptext in [
        ("simulate", "run one initial condition and classify it"),
        ("sweep", "run a figure experiment (sweep kinds)"),
        ("rc-bisect", "bisect for the critical growth rate"),
        ("validate", "check a config and print it with its hash"),
    ]:
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="YAML or JSON config file")
        if name != "validate":
            sp.add_argument("--out", help="output directory (relative to $AGGDIFF_OUTPUT_ROOT)")
    et = sub.add_parser("energy-table", help="closed-form vs quadrature ansatz energies")
    et.add_argument("--ansatz", required=True, help="single, twin_equal or twin_unequal")
    et.add_argument("--eps", help="value or start:stop:step")
    et.add_argument("--cB", help="value or start:stop:step (twin_unequal)")
    et.add_argument("--x0", type=float, default=0.5)
    et.add_argument("--p", type=float, default=1.0)
    et.add_argument("--L", type=float, default=1.0)
    et.add_argument("--delta", type=float, default=0.1)
    et.add_argument("--N", type=int, default=512)
    et.add_argument("--out", help="also write the table to this file")
    return top


_COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "rc-bisect": _cmd_rc,
    "energy-table": _cmd_energy_table,
    "validate": _cmd_validate,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args, rest = parser.parse_known_args(argv)
        overrides = _parse_overrides(rest)
        return _COMMANDS[args.command](args, overrides)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, InvalidParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalBlowupError as exc:
        print(f"numerical blowup at t={exc.t}: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except BracketError as exc:
        print(f"bisection failed: {exc}\n  low: {exc.low_verdict}\n  high: {exc.high_verdict}", file=sys.stderr)
        return EXIT_FAIL
    except AggDiffError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()

"""Command-line interface: ``dhsicperm {test,bplan,power,curves}``.

Every run prints its main result as JSON on stdout and writes
``<subcommand>_manifest.json`` (arguments, resolved configuration, seeds,
version, input digests, timestamps, output digests) into ``--out``.

Exit codes: 0 success, 2 bad input/flags/config, 3 permutation guard
exceeded, 4 constant block under the median heuristic, 5 no feasible B.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ._version import __version__
from .bplanner import coverage_table, minimal_B
from .dataio import CSVFormatError, file_digest, load_dataset_csv, read_numeric_csv
from .errors import AllPointsIdentical, DHSICError, GuardExceeded, SearchExhausted
from .estimator import set_threads
from .kernels import MEDIAN, KernelSpec, build_gram_stack, gram_stack_from_matrices
from .permtest import as_fraction, test_exhaustive, test_sampled
from .simulation import (
    POWER_COLUMNS,
    ScenarioSpec,
    load_scenario_config,
    power_sweep,
    rejection_curve_empirical,
    write_rows_csv,
)

THREADS_ENV = "DHSICPERM_THREADS"

EXIT_USAGE = 2
EXIT_GUARD = 3
EXIT_IDENTICAL = 4
EXIT_SEARCH = 5


class UsageError(ValueError):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _alpha(text: str) -> str:
    try:
        as_fraction(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dhsicperm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="directory for output files and the manifest")
    common.add_argument(
        "--threads", type=int, default=None,
        help=f"worker thread cap (default: ${THREADS_ENV} or all cores)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", parents=[common], help="permutation test of joint independence")
    p.add_argument("--input", help="CSV file, one row per sample")
    p.add_argument("--vars", help='column groups, e.g. "0:5,5:10" (default: one variable per column)')
    p.add_argument("--kernel", choices=["gaussian", "linear", "gram-file"], default="gaussian")
    p.add_argument("--gram", action="append", default=[], help="precomputed n x n kernel CSV (repeat per variable)")
    p.add_argument("--bandwidth", action="append", default=[],
                   help='"median" or a positive number; give once for all variables or once per variable')
    p.add_argument("--method", choices=["sampled", "exhaustive"], default="sampled")
    p.add_argument("--B", type=int, default=999)
    p.add_argument("--alpha", type=_alpha, default="0.05")
    p.add_argument("--ties", choices=["conservative", "random"], default="conservative")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=10**6)

    p = sub.add_parser("bplan", parents=[common], help="number of permutations for a target accuracy")
    p.add_argument("--alpha", type=_alpha, default="0.05")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--confidence", type=float, required=True)
    p.add_argument("--C", type=float, required=True, dest="C")
    p.add_argument("--max-B", type=int, default=10**7)

    p = sub.add_parser("power", parents=[common], help="Monte Carlo power sweep")
    p.add_argument("--config", help="JSON or TOML file with ScenarioSpec fields")
    p.add_argument("--kind", choices=["scenario1", "scenario2", "null_gaussian"])
    p.add_argument("--n", type=int)
    p.add_argument("--thetas", type=_float_list)
    p.add_argument("--dims", type=_int_list)
    p.add_argument("--replications", type=int)
    p.add_argument("--B-list", type=_int_list, dest="B_list")
    p.add_argument("--alpha", type=_alpha)
    p.add_argument("--seed", type=int, dest="master_seed")
    p.add_argument("--method", choices=["sampled", "exhaustive"])
    p.add_argument("--ties", choices=["conservative", "random"])
    p.add_argument("--bandwidth")

    p = sub.add_parser("curves", parents=[common], help="rejection probability vs p_D, simulated and exact")
    p.add_argument("--B-list", type=_int_list, dest="B_list", default=[99, 999, 9999])
    p.add_argument("--alpha", type=_alpha, default="0.05")
    p.add_argument("--step", type=float, default=0.005)
    p.add_argument("--p-max", type=float, default=0.2)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _kernel_specs(args, d: int) -> list[KernelSpec]:
    if args.kernel == "linear":
        return [KernelSpec.linear()] * d
    bws = args.bandwidth or [MEDIAN]
    if len(bws) == 1:
        bws = bws * d
    if len(bws) != d:
        raise UsageError(f"got {len(bws)} bandwidths for {d} variables")
    specs = []
    for bw in bws:
        if bw != MEDIAN:
            try:
                bw = float(bw)
            except ValueError as exc:
                raise UsageError(f"bad bandwidth {bw!r}") from exc
            if not bw > 0:
                raise UsageError(f"bandwidth must be positive, got {bw}")
        specs.append(KernelSpec.gaussian(bw))
    return specs


def _cmd_test(args, inputs: list[str]):
    if args.kernel == "gram-file":
        if len(args.gram) < 2:
            raise UsageError("--kernel gram-file needs at least two --gram files")
        inputs.extend(args.gram)
        gram = gram_stack_from_matrices([read_numeric_csv(g) for g in args.gram])
    else:
        if not args.input:
            raise UsageError("--input is required unless --kernel gram-file")
        inputs.append(args.input)
        data = load_dataset_csv(args.input, args.vars)
        gram = build_gram_stack(data, _kernel_specs(args, data.d))
    if args.method == "sampled":
        if args.B < 1:
            raise UsageError("--B must be at least 1")
        result = test_sampled(gram, args.B, args.alpha, args.ties, args.seed)
    else:
        result = test_exhaustive(gram, args.alpha, args.ties, args.cap, args.seed)
    payload = result.to_dict()
    out = Path(args.out) / "result.json"
    out.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    config = {k: v for k, v in vars(args).items() if k not in ("out", "threads")}
    return payload, [out], config, args.seed


def _cmd_bplan(args, inputs):
    if not 0 < args.epsilon < args.C < 1:
        raise UsageError(f"need 0 < epsilon < C < 1, got epsilon={args.epsilon}, C={args.C}")
    if not as_fraction(args.alpha) < as_fraction(repr(args.C)):
        raise UsageError(f"need alpha < C, got alpha={args.alpha}, C={args.C}")
    if not 0 <= args.confidence < 1:
        raise UsageError(f"confidence must lie in [0, 1), got {args.confidence}")
    plan = minimal_B(args.alpha, args.epsilon, args.confidence, args.C, (1, args.max_B))
    payload = plan.to_dict()
    out_json = Path(args.out) / "bplan.json"
    out_json.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    out_csv = Path(args.out) / "coverage.csv"
    with out_csv.open("w") as fh:
        fh.write("p_D,coverage\n")
        for p, c in coverage_table(plan.B_min, args.epsilon):
            fh.write(f"{p!r},{c!r}\n")
    config = {k: v for k, v in vars(args).items() if k not in ("out", "threads")}
    return payload, [out_json, out_csv], config, None


def _cmd_power(args, inputs):
    fields = {}
    if args.config:
        inputs.append(args.config)
        try:
            fields.update(load_scenario_config(args.config))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    for name in ("kind", "n", "thetas", "dims", "replications", "B_list", "alpha",
                 "master_seed", "method", "ties", "bandwidth"):
        value = getattr(args, name)
        if value is not None:
            fields[name] = value
    if "bandwidth" in fields and fields["bandwidth"] != MEDIAN:
        try:
            fields["bandwidth"] = float(fields["bandwidth"])
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad bandwidth {fields['bandwidth']!r}") from exc
    fields.setdefault("kind", "null_gaussian")
    try:
        spec = ScenarioSpec(**fields)
    except TypeError as exc:
        raise UsageError(f"bad config: {exc}") from exc
    rows = power_sweep(spec, progress=lambda msg: print(msg, file=sys.stderr))
    out = write_rows_csv(rows, Path(args.out) / "power.csv", POWER_COLUMNS)
    payload = {"rows": [r.__dict__ for r in rows], "spec": spec.to_dict()}
    return payload, [out], spec.to_dict(), spec.master_seed


def _cmd_curves(args, inputs):
    if not args.B_list:
        raise UsageError("--B-list must not be empty")
    if not 0 < args.step <= 1 or not 0 < args.p_max <= 1:
        raise UsageError("--step and --p-max must lie in (0, 1]")
    grid = np.round(np.arange(0.0, args.p_max + args.step / 2, args.step), 12)
    rows = rejection_curve_empirical(grid.tolist(), args.B_list, args.alpha, args.trials, args.seed)
    out = write_rows_csv(rows, Path(args.out) / "curves.csv")
    payload = {"rows": len(rows), "all_within_4sigma": all(r.within_4sigma for r in rows)}
    config = {k: v for k, v in vars(args).items() if k not in ("out", "threads")}
    return payload, [out], config, args.seed


COMMANDS = {"test": _cmd_test, "bplan": _cmd_bplan, "power": _cmd_power, "curves": _cmd_curves}


def _fail(code: int, message: str) -> int:
    print(f"dhsicperm: error: {message}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    threads = args.threads if args.threads is not None else os.environ.get(THREADS_ENV)
    if threads is not None:
        set_threads(int(threads))
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    inputs: list[str] = []
    try:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        payload, outputs, config, seed = COMMANDS[args.command](args, inputs)
    except GuardExceeded as exc:
        return _fail(EXIT_GUARD, str(exc))
    except AllPointsIdentical as exc:
        return _fail(EXIT_IDENTICAL, str(exc))
    except SearchExhausted as exc:
        return _fail(EXIT_SEARCH, str(exc))
    except (UsageError, CSVFormatError, DHSICError, ValueError, OSError) as exc:
        return _fail(EXIT_USAGE, str(exc))
    manifest = {
        "subcommand": args.command,
        "argv": argv,
        "config": config,
        "master_seed": seed,
        "version": __version__,
        "inputs": {p: file_digest(p) for p in inputs},
        "outputs": {str(p): file_digest(p) for p in outputs},
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "wall_seconds": time.perf_counter() - t0,
    }
    manifest_path = Path(args.out) / f"{args.command}_manifest.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2, default=str) + "\n")
    print(json.dumps(payload, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``trplab <command> [options]``.

Exit status is 0 on success, 1 on a domain error (guard exceeded, invalid
square, bad parameter value) and 2 on a usage error (unknown flag,
unreadable input file).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .core import FORMATS, ParseError, PartialLatinSquare, cyclic_square, decode, encode
from .counting import (
    GuardError,
    evaluate_bounds,
    exact_completions,
    extension_ratio_experiment,
    integral_identity,
    integral_quadrature,
    sandwich_slack,
)
from .engine import leave_from, run
from .experiments import (
    checkpoint_grid,
    coupling_study,
    history_ratio_study,
    monotone_transfer,
    random_order_profile,
    steps_for,
    trp_trial,
)
from .quasirand import check, triangle_count_prediction
from .seeding import RNG_ID, default_seed

COMMANDS = ("generate", "trp-run", "quasi-check", "order-profile", "couple", "count", "bounds", "ratio-study", "integral")


class UsageError(Exception):
    pass


def _read_square(path: str, fmt: str) -> PartialLatinSquare:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return decode(data, fmt)


def _write_csv(path: Path, rows: list[dict]) -> None:
    fields: list[str] = []
    for row in rows:
        fields.extend(k for k in row if k not in fields)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def manifest(args: argparse.Namespace, result: dict) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "json")}
    return {
        "command": args.command,
        "config": config,
        "seed": getattr(args, "seed", None),
        "rng_id": RNG_ID,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "result": _jsonable(result),
    }


def _emit(args, result: dict, summary: str, tables: dict[str, list[dict]] | None = None, square: bytes | None = None):
    if args.out:
        prefix = Path(args.out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        for name, rows in (tables or {}).items():
            _write_csv(prefix.with_name(prefix.name + (".csv" if name == "trials" else f".{name}.csv")), rows)
        if square is not None:
            prefix.with_name(prefix.name + ".txt").write_bytes(square)
        man = manifest(args, result)
        prefix.with_name(prefix.name + ".json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
    if args.json:
        print(json.dumps(manifest(args, result), sort_keys=True))
    else:
        print(summary)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = default_seed()
    return args.seed


def cmd_generate(args) -> None:
    seed = _seed(args)
    if args.kind == "cyclic":
        pls = cyclic_square(args.n)
        result = {"n": args.n, "m": len(pls), "kind": "cyclic"}
    else:
        steps = args.steps if args.steps is not None else steps_for(args.alpha, args.n)
        out = run(args.n, steps, seed, record_q=args.q_trace)
        pls = out.square
        result = {"n": args.n, "m": len(pls), "seed": seed, "rng_id": RNG_ID, "frozen_at": out.frozen_at}
        if args.q_trace:
            result["q_trace"] = out.q_trace
    data = encode(pls, args.format)
    if args.out:
        _emit(args, result, f"generate n={args.n} m={len(pls)} kind={args.kind} -> {args.out}.txt", square=data)
    else:
        sys.stdout.write(data.decode("ascii"))


def cmd_trp_run(args) -> None:
    seed = _seed(args)
    start = _read_square(args.start, args.format) if args.start else None
    if args.trials == 1 and not args.checkpoints and not args.track:
        base = start if start is not None else args.n
        n = start.n if start is not None else args.n
        steps = args.steps if args.steps is not None else steps_for(args.alpha, n) - (len(start) if start else 0)
        out = run(base, steps, seed, record_q=args.q_trace)
        result = {"n": n, "m": steps, "seed": seed, "rng_id": RNG_ID, "frozen_at": out.frozen_at}
        if args.q_trace:
            result["q_trace"] = out.q_trace
        _emit(
            args,
            result,
            f"trp-run n={n} m={steps} frozen_at={out.frozen_at}",
            square=encode(out.square, "triples"),
        )
        return
    n = start.n if start is not None else args.n
    limit = steps_for(args.alpha, n)
    base = len(start) if start else 0
    cps = [base + x for x in checkpoint_grid(limit - base, args.checkpoints)] if args.checkpoints else []
    res = trp_trial(
        n,
        args.alpha,
        args.epsilon,
        h=args.h,
        C=args.C,
        c=args.c,
        checkpoints=cps,
        trials=args.trials,
        seed=seed,
        track=args.track,
        deep=args.deep,
        horizon=args.horizon,
        start=start,
        jobs=args.jobs,
    )
    s = res.summary
    result = s.to_json()
    tables = {"trials": s.rows}
    if cps:
        tables["checkpoints"] = s.tables["checkpoints"]
    if args.track:
        tables["trajectories"] = s.tables["trajectories"]
    _emit(
        args,
        result,
        f"trp-run n={n} trials={s.trials} freeze_rate={s.stats['freeze_rate']:.6g} tallies={json.dumps(s.tallies)}",
        tables,
    )


def cmd_quasi_check(args) -> None:
    pls = _read_square(args.input, args.format)
    leave = leave_from(pls)
    rep = check(leave, args.h, mode=args.mode, samples=args.samples, seed=_seed(args))
    pred = triangle_count_prediction(leave)
    result = rep.to_json() | {
        "epsilon": args.epsilon,
        "quasirandom": rep.is_quasirandom(args.epsilon),
        "triangles": {"actual": pred.actual, "predicted": float(pred.predicted), "relative_error": pred.relative_error},
    }
    _emit(
        args,
        result,
        f"quasi-check n={pls.n} m={len(pls)} d={float(rep.density):.6g} worst_dev={float(rep.worst()):.6g} "
        f"quasirandom={rep.is_quasirandom(args.epsilon)}",
        {"trials": [e.to_json() | {"witness": " ".join(map(str, e.witness))} for e in rep.entries]},
    )


def cmd_order_profile(args) -> None:
    if args.input:
        L = _read_square(args.input, args.format)
    elif args.cyclic:
        L = cyclic_square(args.cyclic)
    else:
        raise UsageError("order-profile needs --in FILE or --cyclic N")
    limit = steps_for(args.alpha, L.n) if 0 < args.alpha < 1 else 0
    s = random_order_profile(
        L,
        args.alpha,
        args.epsilon,
        h=args.h,
        checkpoints=checkpoint_grid(limit, args.checkpoints),
        trials=args.trials,
        seed=_seed(args),
        jobs=args.jobs,
    )
    _emit(
        args,
        s.to_json(),
        f"order-profile n={L.n} trials={s.trials} pass_rate={s.stats['pass_rate']:.6g}",
        {"trials": s.rows, "checkpoints": s.tables["checkpoints"]},
    )


def cmd_couple(args) -> None:
    seed = _seed(args)
    s = coupling_study(args.n, args.alpha, args.trials, seed=seed, jobs=args.jobs)
    result = s.to_json()
    if args.transfer:
        result["transfer"] = monotone_transfer(args.n, args.alpha, args.transfer, args.trials, seed=seed, jobs=args.jobs)
    _emit(
        args,
        result,
        f"couple n={args.n} trials={s.trials} applicable={s.tallies['applicable']} violations={s.stats['violations']}",
        {"trials": s.rows},
    )


def cmd_count(args) -> None:
    if args.grid:
        P = _read_square(args.grid, "grid")
    elif args.triples:
        P = _read_square(args.triples, "triples")
    else:
        raise UsageError("count needs --grid FILE or --triples FILE")
    methods = ["naive", "mrv"] if args.method == "both" else [args.method]
    counts = {m: exact_completions(P, m).exact for m in methods}
    if len(set(counts.values())) != 1:
        raise RuntimeError(f"counters disagree: {counts}")
    value = next(iter(counts.values()))
    result = {"n": P.n, "m": len(P), "completions": value, "methods": methods,
              "log_ordered_extensions": (math.log(value) + math.lgamma(P.N - len(P) + 1)) if value else None}
    _emit(args, result, f"count n={P.n} m={len(P)} completions={value} method={args.method}")


def cmd_bounds(args) -> None:
    ev = evaluate_bounds(args.n, args.alpha)
    result = ev.to_json()
    if args.input:
        P = _read_square(args.input, args.format)
        result["per_cell_slack"] = sandwich_slack(P)
    _emit(
        args,
        result,
        f"bounds n={args.n} alpha={args.alpha} upper_log={ev.upper_log:.6g} lower_log={ev.lower_log:.6g} slack={ev.slack}",
    )


def cmd_ratio_study(args) -> None:
    seed = _seed(args)
    if args.kind == "history":
        s = history_ratio_study(args.n, args.alpha, args.pairs, seed=seed, jobs=args.jobs)
        _emit(
            args,
            s.to_json(),
            f"ratio-study kind=history n={args.n} pairs={s.trials} within_bound={s.tallies['within_bound']} "
            f"max_abs_log_ratio={s.stats['abs_log_ratio'].get('max', 0.0):.6g}",
            {"trials": s.rows},
        )
        return
    st = extension_ratio_experiment(args.n, args.alpha, args.pairs, seed=seed, eps=args.epsilon)
    _emit(
        args,
        st.to_json(),
        f"ratio-study kind=extension n={args.n} pairs={len(st.rows)} max_abs_log_ratio={st.max_abs_log_ratio:.6g}",
        {"trials": st.rows},
    )


def cmd_integral(args) -> None:
    closed = integral_identity(args.C)
    quad = integral_quadrature(args.C)
    result = {"C": args.C, "closed_form": closed, "quadrature": quad, "abs_diff": abs(closed - quad)}
    _emit(args, result, f"integral C={args.C:g} closed_form={closed:.6f} quadrature={quad:.6f} abs_diff={abs(closed - quad):.2e}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trplab", description="Triangle removal process and random Latin square experiments.")
    p.add_argument("--version", action="version", version=f"trplab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, seed=True, out=True):
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="master seed (default: $TRPLAB_SEED or 0)")
        if out:
            sp.add_argument("--out", help="output prefix; writes PREFIX.json (+ .csv tables)")
        sp.add_argument("--json", action="store_true", help="print the full manifest instead of a summary line")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for independent trials")

    def fmt(sp):
        sp.add_argument("--format", choices=FORMATS, default="triples")

    sp = sub.add_parser("generate", help="write a cyclic square or a process output")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--kind", choices=("cyclic", "trp"), default="cyclic")
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--q-trace", action="store_true")
    fmt(sp)
    common(sp)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("trp-run", help="run the triangle removal process")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--steps", type=int, help="single run only: number of removals")
    sp.add_argument("--trials", type=int, default=1)
    sp.add_argument("--epsilon", type=float, default=0.25)
    sp.add_argument("--h", type=int, default=2)
    sp.add_argument("--C", type=float, default=10.0)
    sp.add_argument("--c", type=float, default=0.5)
    sp.add_argument("--checkpoints", type=int, default=0, help="geometric grid points on [0, alpha N]; 0 = no checks")
    sp.add_argument("--track", type=int, default=0, help="tracked sets A per (q, k)")
    sp.add_argument("--deep", action="store_true", help="run on to horizon*N")
    sp.add_argument("--horizon", type=float, default=0.9)
    sp.add_argument("--start", help="start from this partial square instead of K_{n,n,n}")
    sp.add_argument("--q-trace", action="store_true")
    fmt(sp)
    common(sp)
    sp.set_defaults(func=cmd_trp_run)

    sp = sub.add_parser("quasi-check", help="quasirandomness report of a square's leave graph")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--h", type=int, default=2)
    sp.add_argument("--mode", choices=("auto", "exact", "sampled"), default="auto")
    sp.add_argument("--samples", type=int, default=100_000)
    fmt(sp)
    common(sp)
    sp.set_defaults(func=cmd_quasi_check)

    sp = sub.add_parser("order-profile", help="random orderings of a fixed full square")
    sp.add_argument("--in", dest="input")
    sp.add_argument("--cyclic", type=int, help="use the cyclic square of this order")
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--epsilon", type=float, default=0.4)
    sp.add_argument("--h", type=int, default=2)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--checkpoints", type=int, default=12)
    fmt(sp)
    common(sp)
    sp.set_defaults(func=cmd_order_profile)

    sp = sub.add_parser("couple", help="coupling of the deletion model with the greedy process")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--alpha", type=float, default=0.3)
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--transfer", type=int, nargs="*", help="thresholds t for the monotone transfer check")
    common(sp)
    sp.set_defaults(func=cmd_couple)

    sp = sub.add_parser("count", help="exact number of completions")
    sp.add_argument("--grid")
    sp.add_argument("--triples")
    sp.add_argument("--method", choices=("naive", "mrv", "both"), default="both")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_count)

    sp = sub.add_parser("bounds", help="leading terms of the completion-count bounds")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--in", dest="input", help="also report the per-cell slack of this square")
    fmt(sp)
    common(sp, seed=False)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("ratio-study", help="history-probability or extension-count ratios")
    sp.add_argument("--kind", choices=("history", "extension"), default="history")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--pairs", type=int, default=100)
    sp.add_argument("--epsilon", type=float, default=None)
    common(sp)
    sp.set_defaults(func=cmd_ratio_study)

    sp = sub.add_parser("integral", help="closed form vs quadrature of the log(1+Ct^2) integral")
    sp.add_argument("--C", type=float, required=True)
    common(sp, seed=False)
    sp.set_defaults(func=cmd_integral)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "trp-run" and args.n is None and args.start is None:
        print("trplab: error: trp-run needs --n or --start", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except UsageError as exc:
        print(f"trplab: error: {exc}", file=sys.stderr)
        return 2
    except (GuardError, ParseError, ValueError, IndexError, RuntimeError) as exc:
        print(f"trplab: {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``cife run|grid|sweep|baseline|stats|report``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dataset_io import load_dataset
from .harness import (
    ExperimentSettings,
    FoldResult,
    RunReport,
    canonical_dataset,
    comparison_table,
    dumps_reports,
    format_sweep,
    loads_reports,
    pool_size_sweep,
    reference_results,
    reports_to_csv,
    run_baseline,
    run_grid,
    run_protocol,
    timing_sidecar,
    timing_table,
)
from .stats import PairedSample, wilcoxon_signed_rank, win_tie_loss

_BOOL_WORDS = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys may use dashes or underscores."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", action="append", help="bundled name (wine, ionosphere, balance-scale, pima), 'toy', or CSV path; repeatable")
    p.add_argument("--pool-size", type=int, default=150)
    p.add_argument("--folds", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--candidates", type=int, default=3000)
    p.add_argument("--population", type=int, default=500)
    p.add_argument("--generations", type=int, default=250)
    p.add_argument("--scale", type=float, default=1.0, help="multiply candidates, population and generations")
    p.add_argument("--alpha", type=float, default=0.45)
    p.add_argument("--beta", type=float, default=0.45)
    p.add_argument("--gamma", type=float, default=0.10)
    p.add_argument("--eval-split", choices=("val1", "val2"), default="val2")
    p.add_argument("--diversity-normalization", choices=("pairs", "printed"), default="pairs")
    p.add_argument("--raw-scores", action="store_true", help="skip min-max rescaling of aggregated diversity in tuning")
    p.add_argument("--flat-umda-start", action="store_true", help="UMDA ignores the initial population and starts from p=0.5")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="JSON report path (stdout when omitted)")
    p.add_argument("--csv", help="also write a per-fold CSV")
    p.add_argument("--include-timing", action="store_true", help="put wall-clock fields in the main report")


def _settings(args) -> ExperimentSettings:
    s = ExperimentSettings(
        pool_size=args.pool_size,
        folds=args.folds,
        seed=args.seed,
        candidates=args.candidates,
        population=args.population,
        generations=args.generations,
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        eval_split=args.eval_split,
        diversity_normalization=args.diversity_normalization,
        rescale_scores=not args.raw_scores,
        use_initial_population=not args.flat_umda_start,
    )
    if getattr(args, "budget", None) is not None:
        s = replace(s, kappa_budget=args.budget)
    return s.scaled(args.scale) if args.scale != 1.0 else s


def _emit(reports: list[RunReport], args, single: bool) -> None:
    body = dumps_reports(reports[0] if single else reports, args.include_timing)
    if args.out:
        Path(args.out).write_text(body)
        Path(args.out).with_suffix(".timing.json").write_text(timing_sidecar(reports))
    else:
        sys.stdout.write(body)
    if args.csv:
        Path(args.csv).write_text(reports_to_csv(reports))


def _datasets(args):
    if not args.dataset:
        raise SystemExit("error: --dataset is required")
    return [load_dataset(d) for d in args.dataset]


def cmd_run(args) -> int:
    settings = _settings(args)
    reports = [run_protocol(args.protocol, ds, settings, args.workers) for ds in _datasets(args)]
    _emit(reports, args, single=len(reports) == 1)
    return 0


def cmd_grid(args) -> int:
    settings = _settings(args)
    protocols = args.protocols.split(",") if args.protocols else None
    reports = [r for ds in _datasets(args) for r in run_grid(ds, settings, args.workers, protocols)]
    _emit(reports, args, single=False)
    return 1 if any(r.errors for r in reports) else 0


def cmd_sweep(args) -> int:
    settings = _settings(args)
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    protocols = args.protocols.split(",") if args.protocols else None
    results = [pool_size_sweep(ds, sizes, settings, args.workers, protocols) for ds in _datasets(args)]
    table = format_sweep(results)
    reports = [r for res in results for size in res.sizes for r in res.reports[size]]
    if args.out:
        _emit(reports, args, single=False)
        Path(args.out).with_suffix(".medians.csv").write_text(table)
    sys.stdout.write(table)
    return 0


def cmd_baseline(args) -> int:
    settings = _settings(args)
    reports = [run_baseline(args.method, ds, settings, args.workers) for ds in _datasets(args)]
    _emit(reports, args, single=len(reports) == 1)
    return 0


def _paired_accuracies(a: list[RunReport], b: list[RunReport], pair_by: str):
    if pair_by == "dataset":
        x = {canonical_dataset(r.dataset): 100 * r.aggregate["median"] for r in a if r.folds}
        y = {canonical_dataset(r.dataset): 100 * r.aggregate["median"] for r in b if r.folds}
    else:
        x = {(r.dataset, f.fold): 100 * f.test_accuracy for r in a for f in r.folds}
        y = {(r.dataset, f.fold): 100 * f.test_accuracy for r in b for f in r.folds}
    keys = sorted(set(x) & set(y), key=str)
    if not keys:
        raise SystemExit("error: the two inputs share nothing to pair on")
    return keys, [x[k] for k in keys], [y[k] for k in keys]


def _load_side(spec: str) -> list[RunReport] | str:
    """A report file, or ``ref:METHOD`` for a published column."""
    if spec.startswith("ref:"):
        return spec[4:]
    return loads_reports(Path(spec).read_text())


def cmd_stats(args) -> int:
    if args.wilcoxon:
        sides = [_load_side(s) for s in args.wilcoxon]
        refs = reference_results()["accuracy"]
        for n, side in enumerate(sides):
            if isinstance(side, str):
                if side not in refs:
                    raise SystemExit(f"error: no published column {side!r}; known: {', '.join(refs)}")
                if args.pair_by != "dataset":
                    raise SystemExit("error: published columns can only be paired by dataset")
                sides[n] = [
                    RunReport(side, d, 0, 0, 1, {}, [_published_fold(v)]) for d, v in refs[side].items()
                ]
        keys, xa, xb = _paired_accuracies(sides[0], sides[1], args.pair_by)
        result = wilcoxon_signed_rank(PairedSample(np.array(xa), np.array(xb)), args.method, args.continuity)
        print(json.dumps({"n_pairs": len(keys), "n_nonzero": result.n, "statistic": result.statistic,
                          "p_value": result.p_value, "method": result.method}, indent=1, sort_keys=True))
    if args.win_tie_loss:
        reports = [r for path in args.win_tie_loss for r in loads_reports(Path(path).read_text())]
        by_method: dict = {}
        for r in reports:
            if r.folds:
                by_method.setdefault(r.protocol, {})[canonical_dataset(r.dataset)] = 100 * r.aggregate["median"]
        common = sorted(set.intersection(*(set(v) for v in by_method.values())))
        counts = win_tie_loss({m: [v[d] for d in common] for m, v in by_method.items()}, args.tie_epsilon)
        for m, (w, t, l) in counts.items():
            print(f"{m}: {w}/{t}/{l}")
    if not args.wilcoxon and not args.win_tie_loss:
        raise SystemExit("error: give --wilcoxon A B and/or --win-tie-loss FILES")
    return 0


def _published_fold(value: float) -> FoldResult:
    return FoldResult(0, value / 100.0, 0, 0, "", "")


def cmd_report(args) -> int:
    extra = [r for path in args.reports or [] for r in loads_reports(Path(path).read_text())]
    if args.table6:
        sys.stdout.write(comparison_table(extra, args.tie_epsilon))
    if args.timing:
        a, b = (json.loads(Path(p).read_text()) for p in args.timing)
        sys.stdout.write(timing_table(a, b))
    if not args.table6 and not args.timing:
        raise SystemExit("error: give --table6 and/or --timing A B")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cife", description="Evolutionary classifier selection and fusion.")
    parser.add_argument("--config", help="key = value file supplying defaults for any flag")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="one protocol over k folds")
    _add_experiment_flags(p)
    p.add_argument("--protocol", required=True, help="[MP][AT][EDP]-(GA|UMDA)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid", help="all 24 protocols over shared pools")
    _add_experiment_flags(p)
    p.add_argument("--protocols", help="comma-separated subset")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("sweep", help="grid medians per pool size")
    _add_experiment_flags(p)
    p.add_argument("--sizes", default="50,100,150,200,250")
    p.add_argument("--protocols", help="comma-separated subset")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("baseline", help="Kappa pruning or the full bagged pool")
    _add_experiment_flags(p)
    p.add_argument("--method", choices=("kappa", "bagging"), required=True)
    p.add_argument("--budget", type=int, default=None, help="Kappa pruning target size (default 30)")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("stats", help="Wilcoxon signed-rank and win/tie/loss over reports")
    p.add_argument("--wilcoxon", nargs=2, metavar=("A", "B"), help="report files or ref:METHOD")
    p.add_argument("--pair-by", choices=("dataset", "fold"), default="dataset")
    p.add_argument("--method", choices=("auto", "exact", "normal"), default="auto")
    p.add_argument("--continuity", action="store_true", help="continuity correction in the normal approximation")
    p.add_argument("--win-tie-loss", nargs="+", metavar="FILE")
    p.add_argument("--tie-epsilon", type=float, default=0.05, help="accuracy points")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="render comparison or timing tables")
    p.add_argument("--table6", action="store_true", help="published method comparison, plus --reports columns")
    p.add_argument("--reports", nargs="*", help="our report files to add as columns")
    p.add_argument("--timing", nargs=2, metavar=("A", "B"), help="two .timing.json sidecars")
    p.add_argument("--tie-epsilon", type=float, default=0.05)
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = read_config(known.config)
    for action in parser._subparsers._group_actions[0].choices.values():  # noqa: SLF001
        dests = {a.dest: a for a in action._actions}  # noqa: SLF001
        defaults = {}
        for key, raw in cfg.items():
            if key not in dests:
                continue
            a = dests[key]
            if a.const is True or a.const is False:  # store_true / store_false
                defaults[key] = _BOOL_WORDS[raw.lower()]
            elif a.nargs in ("+", "*", 2) or isinstance(a, argparse._AppendAction):  # noqa: SLF001
                defaults[key] = raw.split()
            else:
                defaults[key] = a.type(raw) if a.type else raw
        action.set_defaults(**defaults)


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

"""Experiment orchestration: protocol parsing, k-fold runs, the 24-protocol grid,
pool-size sweeps, baselines and report rendering.

Every random stream is derived from the master seed and the fold index, never
from worker identity, so results do not depend on the worker count. Timing is
kept out of the main report and written to a sidecar.
"""
from __future__ import annotations

import csv
import io
import json
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources

import numpy as np

from .baselines import bagging_full, kappa_prune
from .dataset_io import Dataset, make_folds
from .diversity import PairDiversityTable
from .ensemble_eval import evaluate
from .evolvers import EvolverConfig, evolve, mask_to_hex
from .fitness import FitnessFunction, FitnessSpec
from .learners import ClassifierPool, build_pool
from .population_init import random_population, tuning_population
from .prediction_store import LabelMatrix
from .seeding import derive_seed
from .stats import win_tie_loss

REPORT_VERSION = 1
PROTOCOL_GRAMMAR = "[MP][AT][EDP]-(GA|UMDA), e.g. MTD-UMDA"
_PROTOCOL_RE = re.compile(r"^([MP])([AT])([EDP])-(GA|UMDA)$")


@dataclass(frozen=True)
class ProtocolSpec:
    C: str
    I: str  # noqa: E741
    F: str
    E: str

    @property
    def name(self) -> str:
        return f"{self.C}{self.I}{self.F}-{self.E}"


def parse_protocol(name: str) -> ProtocolSpec:
    match = _PROTOCOL_RE.match(name.strip().upper())
    if not match:
        raise ValueError(f"malformed protocol {name!r}; expected {PROTOCOL_GRAMMAR}")
    return ProtocolSpec(*match.groups())


def all_protocols() -> list[ProtocolSpec]:
    return [ProtocolSpec(c, i, f, e) for c in "MP" for i in "AT" for f in "EDP" for e in ("GA", "UMDA")]


@dataclass(frozen=True)
class ExperimentSettings:
    pool_size: int = 150
    folds: int = 6
    seed: int = 0
    candidates: int = 3000
    population: int = 500
    generations: int = 250
    stagnation_fraction: float = 0.20
    alpha: float = 0.45
    beta: float = 0.45
    gamma: float = 0.10
    eval_split: str = "val2"
    diversity_normalization: str = "pairs"
    tuning_alpha: float = 0.5
    rescale_scores: bool = True
    use_initial_population: bool = True
    kappa_budget: int = 30
    baseline_pool: str = "M"

    def scaled(self, factor: float) -> "ExperimentSettings":
        """Shrink candidates, population and generations by ``factor`` for quick runs."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return replace(
            self,
            candidates=max(self.pool_size, int(round(self.candidates * factor))),
            population=max(10, int(round(self.population * factor))),
            generations=max(10, int(round(self.generations * factor))),
        )

    def fitness_spec(self, kind: str) -> FitnessSpec:
        return FitnessSpec(kind, self.alpha, self.beta, self.gamma, self.eval_split, self.diversity_normalization)

    def evolver_config(self, algorithm: str, seed: int) -> EvolverConfig:
        return EvolverConfig(
            algorithm=algorithm,
            population_size=self.population,
            max_generations=self.generations,
            stagnation_fraction=self.stagnation_fraction,
            seed=seed,
            use_initial_population=self.use_initial_population,
        )


# ---------------------------------------------------------------- per-fold state


@dataclass(eq=False)
class FoldContext:
    """Everything selection needs from one (C-mode, fold) pool; shared by all protocols."""

    fold: int
    mode: str
    checksum: str
    val1: LabelMatrix
    val2: LabelMatrix
    test: LabelMatrix
    val1_accuracy: np.ndarray
    pool_seconds: float
    _tables: dict = field(default_factory=dict, repr=False)

    def label_matrix(self, split: str) -> LabelMatrix:
        return {"val1": self.val1, "val2": self.val2, "test": self.test}[split]

    def table(self, split: str) -> PairDiversityTable:
        if split not in self._tables:
            self._tables[split] = PairDiversityTable.from_label_matrix(self.label_matrix(split))
        return self._tables[split]

    def prefix(self, n: int) -> "FoldContext":
        """Context of the top-``n`` pool; valid because pools keep candidates in rank order."""
        cut = lambda lm: LabelMatrix(lm.rows[:n], lm.truth, lm.split_tag, lm.n_classes)  # noqa: E731
        rows = [self.val1.rows[:n], self.val2.rows[:n], self.test.rows[:n]]
        checksum = ClassifierPool([], np.empty(0), np.empty(0), dict(zip(("val1", "val2", "test"), rows))).checksum()
        return FoldContext(
            self.fold, self.mode, checksum, cut(self.val1), cut(self.val2), cut(self.test),
            self.val1_accuracy[:n], self.pool_seconds,
        )


def fold_context(ds: Dataset, split, mode: str, fold: int, pool_size: int, candidates: int, seed: int) -> FoldContext:
    start = time.perf_counter()
    pool = build_pool(mode, split, ds, pool_size, candidates, derive_seed(seed, "pool", fold))
    elapsed = time.perf_counter() - start
    lms = {
        tag: LabelMatrix(pool.predictions[tag], ds.labels[idx], tag, ds.class_count)
        for tag, idx in (("val1", split.val1_idx), ("val2", split.val2_idx), ("test", split.test_idx))
    }
    return FoldContext(fold, mode, pool.checksum(), lms["val1"], lms["val2"], lms["test"], pool.val1_accuracy, elapsed)


@dataclass
class FoldResult:
    fold: int
    test_accuracy: float
    ensemble_size: int
    generations_run: int
    pool_checksum: str
    best_mask: str
    best_fitness: float | None = None
    initial_best_fitness: float | None = None
    termination: str = ""
    wall_seconds: float = 0.0
    selection_seconds: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        d = asdict(self)
        if not include_timing:
            d.pop("wall_seconds")
            d.pop("selection_seconds")
        return d


def initial_population(spec: ProtocolSpec, ctx: FoldContext, settings: ExperimentSettings) -> np.ndarray:
    seed = derive_seed(settings.seed, "init", ctx.fold)
    n = ctx.val1.n_classifiers
    if spec.I == "A":
        return random_population(settings.population, n, seed)
    return tuning_population(
        ctx.table("val1"), ctx.val1_accuracy, settings.population, seed,
        settings.tuning_alpha, settings.rescale_scores,
    ).population


def select_fold(spec: ProtocolSpec, ctx: FoldContext, settings: ExperimentSettings) -> FoldResult:
    """Initialise, evolve and score one protocol on one prepared fold."""
    start = time.perf_counter()
    fspec = settings.fitness_spec(spec.F)
    table = ctx.table(fspec.eval_split) if spec.F in ("D", "P") else None
    fitness = FitnessFunction(fspec, ctx.label_matrix(fspec.eval_split), table)
    init = initial_population(spec, ctx, settings)
    config = settings.evolver_config(spec.E, derive_seed(settings.seed, "evolve", ctx.fold))
    trace = evolve(init, fitness, config)
    result = evaluate(trace.best_mask, ctx.test)
    selection = time.perf_counter() - start
    return FoldResult(
        fold=ctx.fold,
        test_accuracy=result.test_accuracy,
        ensemble_size=result.ensemble_size,
        generations_run=trace.generations_run,
        pool_checksum=ctx.checksum,
        best_mask=mask_to_hex(trace.best_mask),
        best_fitness=trace.best_value,
        initial_best_fitness=trace.best_fitness[0],
        termination=trace.termination,
        wall_seconds=ctx.pool_seconds + selection,
        selection_seconds=selection,
    )


def baseline_fold(method: str, ctx: FoldContext, settings: ExperimentSettings) -> FoldResult:
    start = time.perf_counter()
    if method == "bagging":
        result = bagging_full(ctx.test)
    elif method == "kappa":
        result = evaluate(kappa_prune(ctx.label_matrix(settings.eval_split), settings.kappa_budget), ctx.test)
    else:
        raise ValueError(f"unknown baseline {method!r}; choose kappa or bagging")
    selection = time.perf_counter() - start
    return FoldResult(
        fold=ctx.fold,
        test_accuracy=result.test_accuracy,
        ensemble_size=result.ensemble_size,
        generations_run=0,
        pool_checksum=ctx.checksum,
        best_mask=mask_to_hex(result.mask),
        wall_seconds=ctx.pool_seconds + selection,
        selection_seconds=selection,
    )


# ---------------------------------------------------------------- reports


@dataclass
class RunReport:
    protocol: str
    dataset: str
    pool_size: int
    seed: int
    k: int
    settings: dict
    folds: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def aggregate(self) -> dict:
        acc = np.array([f.test_accuracy for f in self.folds], dtype=float)
        size = np.array([f.ensemble_size for f in self.folds], dtype=float)
        if acc.size == 0:
            return {"mean": None, "median": None, "std": None, "ensemble_size_mean": None}
        return {
            "mean": float(np.mean(acc)),
            "median": float(np.median(acc)),
            "std": float(np.std(acc)),
            "ensemble_size_mean": float(np.mean(size)),
        }

    def to_dict(self, include_timing: bool = False) -> dict:
        return {
            "format": "cife-report",
            "version": REPORT_VERSION,
            "protocol": self.protocol,
            "dataset": self.dataset,
            "pool_size": self.pool_size,
            "seed": self.seed,
            "k": self.k,
            "settings": self.settings,
            "folds": [f.to_dict(include_timing) for f in self.folds],
            "aggregate": self.aggregate,
            "errors": self.errors,
        }

    def timing(self) -> dict:
        return {
            "protocol": self.protocol,
            "dataset": self.dataset,
            "folds": [{"fold": f.fold, "wall_seconds": f.wall_seconds, "selection_seconds": f.selection_seconds} for f in self.folds],
            "total_seconds": float(sum(f.wall_seconds for f in self.folds)),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        if d.get("format") != "cife-report" or d.get("version") != REPORT_VERSION:
            raise ValueError(f"not a version-{REPORT_VERSION} report")
        folds = [FoldResult(**f) for f in d["folds"]]
        return cls(d["protocol"], d["dataset"], d["pool_size"], d["seed"], d["k"], d["settings"], folds, d.get("errors", []))


def dumps_reports(reports, include_timing: bool = False) -> str:
    payload = [r.to_dict(include_timing) for r in reports] if isinstance(reports, list) else reports.to_dict(include_timing)
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


def loads_reports(text: str) -> list[RunReport]:
    payload = json.loads(text)
    return [RunReport.from_dict(d) for d in (payload if isinstance(payload, list) else [payload])]


def reports_to_csv(reports: list[RunReport]) -> str:
    """One row per (protocol, dataset, fold)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["protocol", "dataset", "pool_size", "seed", "fold", "test_accuracy", "ensemble_size",
                "generations_run", "pool_checksum"])
    for r in reports:
        for f in r.folds:
            w.writerow([r.protocol, r.dataset, r.pool_size, r.seed, f.fold, repr(f.test_accuracy),
                        f.ensemble_size, f.generations_run, f.pool_checksum])
    return buf.getvalue()


def timing_sidecar(reports: list[RunReport]) -> str:
    return json.dumps([r.timing() for r in reports], indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------- orchestration


def _settings_dict(settings: ExperimentSettings) -> dict:
    return asdict(settings)


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _context_task(args):
    ds, split, mode, fold, settings = args
    return fold_context(ds, split, mode, fold, settings.pool_size, settings.candidates, settings.seed)


def _select_task(args):
    kind, name, ctx, settings = args
    try:
        if kind == "protocol":
            return select_fold(parse_protocol(name), ctx, settings)
        return baseline_fold(name, ctx, settings)
    except Exception as exc:  # noqa: BLE001 - recorded per fold by the caller
        return f"fold {ctx.fold}: {type(exc).__name__}: {exc}"


def prepare_contexts(ds: Dataset, modes, settings: ExperimentSettings, workers: int = 1) -> dict:
    """Build the shared pool of every (C-mode, fold) once; keys are (mode, fold)."""
    splits = make_folds(ds, settings.folds, settings.seed)
    keys = [(mode, r) for mode in modes for r in range(settings.folds)]
    tasks = [(ds, splits[r], mode, r, settings) for mode, r in keys]
    return dict(zip(keys, _map(_context_task, tasks, workers)))


def _collect(jobs, contexts, ds, settings, workers, strict):
    """Run (kind, name, mode) jobs over every fold and assemble one report per job."""
    tasks = [(kind, name, contexts[(mode, r)], settings) for kind, name, mode in jobs for r in range(settings.folds)]
    outcomes = _map(_select_task, tasks, workers)
    reports = []
    for n, (kind, name, mode) in enumerate(jobs):
        label = name if kind == "protocol" else name.capitalize()
        report = RunReport(label, ds.name, settings.pool_size, settings.seed, settings.folds, _settings_dict(settings))
        for outcome in outcomes[n * settings.folds : (n + 1) * settings.folds]:
            if isinstance(outcome, str):
                if strict:
                    raise RuntimeError(f"{label} on {ds.name}, {outcome}")
                report.errors.append(outcome)
            else:
                report.folds.append(outcome)
        reports.append(report)
    return reports


def run_protocol(spec: ProtocolSpec | str, ds: Dataset, settings: ExperimentSettings, workers: int = 1,
                 contexts: dict | None = None) -> RunReport:
    spec = parse_protocol(spec) if isinstance(spec, str) else spec
    contexts = contexts or prepare_contexts(ds, [spec.C], settings, workers)
    return _collect([("protocol", spec.name, spec.C)], contexts, ds, settings, workers, strict=True)[0]


def run_grid(ds: Dataset, settings: ExperimentSettings, workers: int = 1, protocols=None,
             contexts: dict | None = None) -> list[RunReport]:
    """All 24 protocols (or the given subset) over shared per-(C-mode, fold) pools.

    A failing fold is recorded in its report's ``errors`` and the grid carries on.
    """
    specs = [parse_protocol(p) if isinstance(p, str) else p for p in (protocols or all_protocols())]
    modes = sorted({s.C for s in specs})
    contexts = contexts or prepare_contexts(ds, modes, settings, workers)
    return _collect([("protocol", s.name, s.C) for s in specs], contexts, ds, settings, workers, strict=False)


def run_baseline(method: str, ds: Dataset, settings: ExperimentSettings, workers: int = 1,
                 contexts: dict | None = None) -> RunReport:
    method = method.lower()
    if method not in ("kappa", "bagging"):
        raise ValueError(f"unknown baseline {method!r}; choose kappa or bagging")
    contexts = contexts or prepare_contexts(ds, [settings.baseline_pool], settings, workers)
    return _collect([("baseline", method, settings.baseline_pool)], contexts, ds, settings, workers, strict=True)[0]


@dataclass
class SweepResult:
    dataset: str
    sizes: list
    medians: dict  # size -> median over protocols of the per-protocol mean accuracy
    reports: dict  # size -> list[RunReport]


def sweep_medians(reports_by_size: dict) -> dict:
    return {
        size: float(np.median([r.aggregate["mean"] for r in reports if r.folds]))
        for size, reports in reports_by_size.items()
    }


def pool_size_sweep(ds: Dataset, sizes, settings: ExperimentSettings, workers: int = 1, protocols=None) -> SweepResult:
    """Grid medians per pool size. Pools are trained once at the largest size and truncated."""
    sizes = sorted({int(s) for s in sizes})
    if not sizes:
        raise ValueError("at least one pool size is required")
    specs = [parse_protocol(p) if isinstance(p, str) else p for p in (protocols or all_protocols())]
    big = replace(settings, pool_size=sizes[-1], candidates=max(settings.candidates, sizes[-1]))
    full = prepare_contexts(ds, sorted({s.C for s in specs}), big, workers)
    by_size = {}
    for size in sizes:
        sized = replace(settings, pool_size=size)
        ctx = {key: c.prefix(size) for key, c in full.items()}
        by_size[size] = run_grid(ds, sized, workers, specs, ctx)
    return SweepResult(ds.name, sizes, sweep_medians(by_size), by_size)


def format_sweep(results: list[SweepResult]) -> str:
    sizes = sorted({s for r in results for s in r.sizes})
    lines = ["Dataset," + ",".join(str(s) for s in sizes)]
    for r in results:
        lines.append(r.dataset + "," + ",".join(f"{100 * r.medians[s]:.2f}" if s in r.medians else "" for s in sizes))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- published comparison


_NAME_ALIASES = {"balance-scale": "Balance-scale", "ionosphere": "Ionosphere", "pima": "Pima", "wine": "Wine"}


def reference_results() -> dict:
    with resources.files("cife.data").joinpath("reference_results.json").open() as fh:
        return json.load(fh)


def canonical_dataset(name: str) -> str:
    return _NAME_ALIASES.get(name.lower(), name)


def comparison_table(extra: list[RunReport] | None = None, tie_epsilon: float = 0.05) -> str:
    """Published accuracy/size table, with our reports appended as extra columns.

    Report columns hold the median fold accuracy in percent. Win/tie/loss is
    recomputed over the datasets every column covers.
    """
    ref = reference_results()
    acc = {m: dict(v) for m, v in ref["accuracy"].items()}
    size = {m: {k: v for k, v in s.items() if not k.startswith("_")} for m, s in ref["ensemble_size"].items()}
    for r in extra or []:
        if not r.folds:
            continue
        col = f"{r.protocol} (ours)"
        acc.setdefault(col, {})[canonical_dataset(r.dataset)] = round(100 * r.aggregate["median"], 1)
        size.setdefault(col, {})[canonical_dataset(r.dataset)] = int(round(r.aggregate["ensemble_size_mean"]))
    methods = list(acc)
    datasets = sorted({d for m in methods for d in acc[m]})
    header = "| Dataset | " + " | ".join(f"{m} | #" for m in methods) + " |"
    lines = [header, "|" + "---|" * (1 + 2 * len(methods))]
    for d in datasets:
        cells = []
        for m in methods:
            a, s = acc[m].get(d), size[m].get(d)
            cells += ["" if a is None else f"{a:.1f}", "" if s is None else str(s)]
        lines.append(f"| {d} | " + " | ".join(cells) + " |")
    common = [d for d in datasets if all(d in acc[m] for m in methods)]
    if common:
        wtl = win_tie_loss({m: [acc[m][d] for d in common] for m in methods}, tie_epsilon)
        lines.append("| Win/Tie/Loss | " + " | ".join(f"{'/'.join(map(str, wtl[m]))} | " for m in methods) + " |")
    return "\n".join(lines) + "\n"


def timing_table(timings_a: list[dict], timings_b: list[dict]) -> str:
    """Per-dataset total seconds of two protocols and the B/A ratio, plus averages."""
    a = {canonical_dataset(t["dataset"]): t for t in timings_a}
    b = {canonical_dataset(t["dataset"]): t for t in timings_b}
    common = sorted(set(a) & set(b))
    if not common:
        raise ValueError("the two timing files share no dataset")
    name_a, name_b = a[common[0]]["protocol"], b[common[0]]["protocol"]
    lines = [f"Dataset,{name_a},{name_b},{name_b}/{name_a}"]
    ta, tb, ratios = [], [], []
    for d in common:
        x, y = a[d]["total_seconds"], b[d]["total_seconds"]
        ratio = y / x if x > 0 else float("nan")
        ta.append(x)
        tb.append(y)
        ratios.append(ratio)
        lines.append(f"{d},{x:.1f},{y:.1f},{ratio:.2f}")
    lines.append(f"Average,{np.mean(ta):.1f},{np.mean(tb):.1f},{np.mean(ratios):.2f}")
    return "\n".join(lines) + "\n"

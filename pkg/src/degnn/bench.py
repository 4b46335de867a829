"""Benchmark runner: seeded multi-split evaluation and result reporting.

A run follows the usual transductive protocol: for each seed, draw a
fresh stratified 60/20/20 split, train with early stopping on the
validation accuracy, and score the best snapshot on the test set. Results
aggregate to mean +/- population stdev over the seeds. Per-target
subgraphs and structural features are cached in a shared
:class:`DatasetContext` so repeated configurations never resample.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .batching import DatasetContext
from .data import Dataset, make_split
from .models import DEGNNClassifier, _DE_PRESETS
from .validation import check_positive_int, check_seed

__all__ = [
    "BenchError",
    "ExperimentPlan",
    "ExperimentResult",
    "SearchResult",
    "SEARCH_SPACE",
    "profile_settings",
    "hyperparameter_search",
    "run_benchmark",
    "emit_report",
    "read_config_file",
    "write_config_file",
    "model_label",
]


class BenchError(RuntimeError):
    """Raised when a benchmark cannot produce a result."""


# Hyperparameter search space (random search draws from these).
SEARCH_SPACE = {
    "num_layers": (1, 2, 3),
    "hidden_dim": (32, 64, 128, 256),
    "learning_rate": (1e-5, 1e-3),  # log-uniform range
    "dropout": (0.1, 0.9),          # uniform range
    "weight_decay": (1e-6, 1e-5, 5e-5),
}

_COMMON = {"learning_rate": 1e-4, "max_epochs": 500, "patience": 50}

# Final per-dataset settings used when --profile default is selected.
_PROFILES = {
    "cora": {"num_layers": 2, "hidden_dim": 32, "dropout": 0.4, "weight_decay": 1e-6},
    "citeseer": {"num_layers": 2, "hidden_dim": 64, "dropout": 0.2, "weight_decay": 1e-6},
    "pubmed": {"num_layers": 1, "hidden_dim": 32, "dropout": 0.2, "weight_decay": 1e-6},
    "chameleon": {"num_layers": 1, "hidden_dim": 32, "dropout": 0.4, "weight_decay": 1e-6},
    "actor": {"num_layers": 2, "hidden_dim": 256, "dropout": 0.2, "weight_decay": 1e-6},
    "film": {"num_layers": 2, "hidden_dim": 256, "dropout": 0.2, "weight_decay": 1e-6},
    "cornell": {"num_layers": 1, "hidden_dim": 64, "dropout": 0.2, "weight_decay": 1e-6},
    "texas": {"num_layers": 1, "hidden_dim": 64, "dropout": 0.2, "weight_decay": 1e-6},
    "wisconsin": {"num_layers": 1, "hidden_dim": 64, "dropout": 0.2, "weight_decay": 1e-6},
}
_FALLBACK_PROFILE = {"num_layers": 1, "hidden_dim": 32, "dropout": 0.2, "weight_decay": 1e-6}


def profile_settings(dataset_name: str) -> dict:
    base = dict(_COMMON)
    base.update(_PROFILES.get(dataset_name.lower(), _FALLBACK_PROFILE))
    return base


@dataclass(frozen=True)
class ExperimentPlan:
    """One dataset x model-variant evaluation request."""

    dataset: str
    model: str = "M1"
    de: str | None = "spd"
    k: int = 3
    hops: int | None = None
    num_seeds: int = 10
    profile: str = "default"       # "default" | "search"
    search_budget: int = 20
    search_seed: int = 0
    overrides: tuple = ()          # ((key, value), ...) applied on top of the profile

    def __post_init__(self):
        check_positive_int(self.num_seeds, "num_seeds")
        if self.profile not in ("default", "search"):
            raise BenchError(f"unknown profile {self.profile!r}")
        if self.profile == "search":
            check_positive_int(self.search_budget, "search_budget")
        if self.model.upper() in _DE_PRESETS and self.de not in ("spd", "rw"):
            raise BenchError(f"model {self.model} requires --de spd|rw")


@dataclass
class ExperimentResult:
    dataset: str
    model: str
    accuracies: np.ndarray
    mean: float
    stdev: float
    hyperparams: dict
    wall_clock: list = field(default_factory=list)
    logs: list = field(default_factory=list)


@dataclass
class SearchResult:
    settings: dict
    val_accuracy: float
    trials: list


def model_label(plan: ExperimentPlan) -> str:
    name = plan.model.upper()
    if name in _DE_PRESETS:
        return f"{name}-{plan.de.upper()}"
    return name


def _classifier_settings(plan: ExperimentPlan, dataset_name: str) -> dict:
    settings = profile_settings(dataset_name)
    settings.update(dict(plan.overrides))
    settings.update(
        {
            "model": plan.model.upper(),
            "de": plan.de or "spd",
            "k": plan.k,
            "hops": plan.hops,
        }
    )
    return settings


def _sample_settings(rng: np.random.Generator) -> dict:
    lo, hi = SEARCH_SPACE["learning_rate"]
    return {
        "num_layers": int(rng.choice(SEARCH_SPACE["num_layers"])),
        "hidden_dim": int(rng.choice(SEARCH_SPACE["hidden_dim"])),
        "learning_rate": float(np.exp(rng.uniform(np.log(lo), np.log(hi)))),
        "dropout": float(rng.uniform(*SEARCH_SPACE["dropout"])),
        "weight_decay": float(rng.choice(SEARCH_SPACE["weight_decay"])),
    }


def hyperparameter_search(
    plan: ExperimentPlan,
    dataset: Dataset,
    split,
    context: DatasetContext | None = None,
) -> SearchResult:
    """Seeded random search over :data:`SEARCH_SPACE`.

    Trains one model per trial and keeps the settings with the highest
    validation accuracy (first trial wins ties). A zero-ish budget is not
    allowed; use the default profile to skip searching.
    """
    if split.val.size == 0:
        raise BenchError("hyperparameter search needs a non-empty validation set")
    if context is None:
        context = DatasetContext(dataset.graph)
    rng = np.random.default_rng(check_seed(plan.search_seed))
    base = _classifier_settings(plan, dataset.name)
    trials = []
    best = None
    for trial in range(plan.search_budget):
        settings = dict(base)
        settings.update(_sample_settings(rng))
        try:
            clf = DEGNNClassifier(**settings, random_state=plan.search_seed)
            clf.fit(dataset, split.train, split.val, context=context)
            acc = float(clf.best_val_accuracy_)
            trials.append({"trial": trial, "settings": settings, "val_accuracy": acc})
            if best is None or acc > best.val_accuracy:
                best = SearchResult(settings, acc, trials)
        except Exception as exc:  # noqa: BLE001 - diagnostics are aggregated
            trials.append({"trial": trial, "settings": settings, "error": repr(exc)})
    if best is None:
        lines = "; ".join(
            f"trial {t['trial']}: {t.get('error', '?')}" for t in trials
        )
        raise BenchError(f"all {plan.search_budget} search trials failed: {lines}")
    best.trials = trials
    return best


def _run_seed(plan, dataset, settings, seed, context):
    started = time.perf_counter()
    split = make_split(dataset, seed=seed)
    clf = DEGNNClassifier(**settings, random_state=seed)
    # context=None means caching is off: the fit rebuilds features itself
    clf.fit(dataset, split.train, split.val, context=context)
    acc = float(clf.score(split.test, dataset.labels.labels[split.test]))
    elapsed = time.perf_counter() - started
    log = io.StringIO()
    log.write(
        f"model={model_label(plan)} dataset={dataset.name} seed={seed}\n"
        f"settings={settings}\n"
        f"best_epoch={clf.best_epoch_} best_val_accuracy={clf.best_val_accuracy_:.6f}\n"
        f"test_accuracy={acc:.6f}\nwall_clock_s={elapsed:.3f}\n"
    )
    for row in clf.history_:
        log.write(
            f"epoch {row['epoch']:4d} loss {row['loss']:.6f} "
            f"val_acc {row['val_accuracy']:.4f}\n"
        )
    return acc, elapsed, log.getvalue()


def run_benchmark(
    plan: ExperimentPlan,
    dataset: Dataset,
    context: DatasetContext | None = None,
    share_cache: bool = True,
    n_jobs: int = 1,
    out_dir=None,
) -> ExperimentResult:
    """Evaluate one plan over ``num_seeds`` fresh splits.

    Seeds run independently (optionally in parallel); aggregation is an
    ordered reduction, so the result does not depend on scheduling. With
    ``share_cache`` off every seed recomputes its subgraphs and features
    from scratch (the results must not change either way). If a seed
    fails, the accuracies gathered so far are persisted under ``out_dir``
    before the error propagates.
    """
    if share_cache and context is None:
        context = DatasetContext(dataset.graph)
    seed_context = context if share_cache else None
    if plan.profile == "search":
        search = hyperparameter_search(
            plan, dataset, make_split(dataset, seed=0), seed_context
        )
        settings = search.settings
    else:
        settings = _classifier_settings(plan, dataset.name)
    seeds = list(range(plan.num_seeds))
    accuracies, clocks, logs = [], [], []
    try:
        if n_jobs == 1:
            for s in seeds:
                acc, elapsed, log = _run_seed(plan, dataset, settings, s, seed_context)
                accuracies.append(acc)
                clocks.append(elapsed)
                logs.append(log)
        else:
            outcomes = Parallel(n_jobs=n_jobs)(
                delayed(_run_seed)(plan, dataset, settings, s, seed_context)
                for s in seeds
            )
            for acc, elapsed, log in outcomes:
                accuracies.append(acc)
                clocks.append(elapsed)
                logs.append(log)
    except Exception:
        if out_dir is not None and accuracies:
            partial = ExperimentResult(
                dataset.name, model_label(plan), np.array(accuracies),
                float(np.mean(accuracies)), float(np.std(accuracies)),
                settings, clocks, logs,
            )
            emit_report([partial], out_dir, stem="results.partial")
        raise
    accs = np.array(accuracies, dtype=np.float64)
    return ExperimentResult(
        dataset=dataset.name,
        model=model_label(plan),
        accuracies=accs,
        mean=float(accs.mean()),
        stdev=float(accs.std()),
        hyperparams=settings,
        wall_clock=clocks,
        logs=logs,
    )


_CSV_FIELDS = [
    "dataset", "model", "seeds", "mean", "stdev", "accuracies",
    "k", "hops", "num_layers", "hidden_dim", "learning_rate",
    "dropout", "weight_decay", "max_epochs", "patience",
]


def emit_report(results, out_dir, stem: str = "results"):
    """Write ``<stem>.csv`` and an aligned ``<stem>.txt`` table.

    The CSV stores full-precision means so reloading reproduces them bit
    for bit; the text table shows percent accuracy to two decimals.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        writer.writeheader()
        for r in results:
            hp = r.hyperparams
            writer.writerow(
                {
                    "dataset": r.dataset,
                    "model": r.model,
                    "seeds": r.accuracies.size,
                    "mean": repr(r.mean),
                    "stdev": repr(r.stdev),
                    "accuracies": ";".join(repr(a) for a in r.accuracies.tolist()),
                    "k": hp.get("k", ""),
                    "hops": hp.get("hops", ""),
                    "num_layers": hp.get("num_layers", ""),
                    "hidden_dim": hp.get("hidden_dim", ""),
                    "learning_rate": hp.get("learning_rate", ""),
                    "dropout": hp.get("dropout", ""),
                    "weight_decay": hp.get("weight_decay", ""),
                    "max_epochs": hp.get("max_epochs", ""),
                    "patience": hp.get("patience", ""),
                }
            )
    txt_path = out / f"{stem}.txt"
    datasets = sorted({r.dataset for r in results})
    models = []
    for r in results:
        if r.model not in models:
            models.append(r.model)
    cells = {(r.model, r.dataset): f"{100 * r.mean:.2f}±{100 * r.stdev:.2f}" for r in results}
    width = max([len("Model")] + [len(m) for m in models]) + 2
    col = max([12] + [len(d) + 2 for d in datasets])
    with open(txt_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("Model".ljust(width))
        for d in datasets:
            fh.write(d.rjust(col))
        fh.write("\n")
        for m in models:
            fh.write(m.ljust(width))
            for d in datasets:
                fh.write(cells.get((m, d), "-").rjust(col))
            fh.write("\n")
    return csv_path, txt_path


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; '#' starts a comment."""
    settings = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BenchError(f"{path}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        settings[key] = value
    return settings


def write_config_file(settings: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in settings.items():
            fh.write(f"{key} = {value}\n")

"""Experiment runner: train circuits on the benchmark datasets, report errors.

Subcommands:

  run       generate/load data, train, evaluate, append one CSV row per seed
  sweep     cross-product over hyperparameter lists, text table plus CSV
  classify  load a model file and classify a dataset, writing predictions

Error columns in the CSV are percentages.  Every row carries the full
configuration, so rows are independently interpretable; runs with the same
seed produce identical error columns byte for byte.  Wall-clock columns are
measurements and will differ run to run.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import statistics
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._backend import BACKEND
from . import data as datamod
from .bitcore import BitDataset, unpack_bits
from .circuit import deserialize, predict, serialize, tree_shape
from .errors import BitcircuitError, ValidationError
from .learn import TrainConfig, error_rate, train_circuit

CSV_COLUMNS = [
    "dataset", "delta", "mu0", "sigma0", "mu1", "sigma1", "bits",
    "class_a", "class_b", "threshold", "train_size", "test_size",
    "arity", "depth", "t", "trials", "seed", "word_size", "threads",
    "backend", "train_err", "test_err",
    "data_ms", "greedy_ms", "hill_climb_ms", "eval_ms", "total_ms",
]

DATASETS = ("cubes", "gauss", "mnist", "cifar", "amat")
_DEFAULT_SIZES = {"cubes": (12000, 50000), "gauss": (10000, 10000)}
_CLASS_DEFAULTS = {"mnist": (3, 5), "cifar": (1, 2)}

SWEEP_AXES = ("arity", "depth", "t", "trials", "delta", "bits")
_AXIS_SHORT = {"arity": "a", "depth": "d", "t": "t", "trials": "n", "delta": "delta", "bits": "bits"}


@dataclass
class ExperimentConfig:
    """Everything one experiment needs: dataset choice, sizes, model shape."""

    dataset: str = "cubes"
    delta: float = 0.0
    mu0: float = 32768.0
    sigma0: float = 2000.0
    mu1: float = 32768.0
    sigma1: float = 8000.0
    bits: int = 2
    class_a: int | None = None
    class_b: int | None = None
    threshold: float = 0.5
    images: str | None = None
    labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    data_paths: list[str] = field(default_factory=list)
    test_data_paths: list[str] = field(default_factory=list)
    train_size: int | None = None
    test_size: int | None = None
    arity: int = 4
    depth: int = 8
    t: int = 4
    trials: int = 0
    criterion: str = "mixed"
    seed: int = 0
    repeat: int = 1
    threads: int = 1
    word_size: int = 64
    model_out: str | None = None
    csv_out: str | None = None
    predict_out: str | None = None

    def validate(self) -> None:
        if self.dataset not in DATASETS:
            raise ValidationError(f"dataset must be one of {DATASETS}, not {self.dataset!r}")
        for name in ("train_size", "test_size"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValidationError(f"{name} must be >= 1, got {value}")
        if self.repeat < 1:
            raise ValidationError("repeat must be >= 1")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        if self.dataset == "mnist" and (self.images is None or self.labels is None):
            raise ValidationError("mnist needs --images and --labels")
        if self.dataset in ("cifar", "amat") and not self.data_paths:
            raise ValidationError(f"{self.dataset} needs --data")
        self.train_config(self.seed).validate()

    def resolved_classes(self) -> tuple[int, int]:
        default = _CLASS_DEFAULTS.get(self.dataset, (0, 1))
        a = self.class_a if self.class_a is not None else default[0]
        b = self.class_b if self.class_b is not None else default[1]
        return a, b

    def sizes(self) -> tuple[int | None, int | None]:
        train, test = _DEFAULT_SIZES.get(self.dataset, (None, None))
        return (
            self.train_size if self.train_size is not None else train,
            self.test_size if self.test_size is not None else test,
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            arity=self.arity,
            depth=self.depth,
            t=min(self.t, self.depth),
            n_trials=self.trials,
            criterion=self.criterion,
            seed=seed,
            word_size=self.word_size,
        )


def _subsample(dataset, size, which):
    if size is None:
        return dataset
    if size > dataset.n_examples:
        raise ValidationError(
            f"requested {size} {which} examples but only {dataset.n_examples} are available"
        )
    if size == dataset.n_examples:
        return dataset
    rows = np.stack([unpack_bits(f.pos, dataset.n_examples)[:size] for f in dataset.features]).T
    return BitDataset.from_rows(rows, dataset.label_bits()[:size], dataset.word_size)


def build_datasets(cfg: ExperimentConfig, seed: int):
    """Train/test BitDatasets for one seed.

    Generated datasets use seed streams 2*seed (train) and 2*seed+1 (test)
    so repeats (seed+i) never collide.  File datasets are loaded as-is and
    subsampled from the front when sizes are given.
    """
    train_size, test_size = cfg.sizes()
    if cfg.dataset == "cubes":
        spec = datamod.CubesSpec(delta=cfg.delta, seed=2 * seed)
        train = datamod.gen_cubes(train_size, spec, cfg.word_size)
        test = datamod.gen_cubes(test_size, replace(spec, seed=2 * seed + 1), cfg.word_size)
        return train, test
    if cfg.dataset == "gauss":
        spec = datamod.GaussSpec(
            mu0=cfg.mu0, sigma0=cfg.sigma0, mu1=cfg.mu1, sigma1=cfg.sigma1, seed=2 * seed
        )
        train = datamod.gen_gauss(train_size, spec, cfg.word_size)
        test = datamod.gen_gauss(test_size, replace(spec, seed=2 * seed + 1), cfg.word_size)
        return train, test
    class_a, class_b = cfg.resolved_classes()
    if cfg.dataset == "mnist":
        qspec = datamod.QuantizeSpec(bits=cfg.bits, channels=1)
        train = datamod.load_idx(cfg.images, cfg.labels, class_a, class_b, qspec, cfg.word_size)
        test = None
        if cfg.test_images and cfg.test_labels:
            test = datamod.load_idx(
                cfg.test_images, cfg.test_labels, class_a, class_b, qspec, cfg.word_size
            )
    elif cfg.dataset == "cifar":
        qspec = datamod.QuantizeSpec(bits=cfg.bits, channels=3)
        train = datamod.load_cifar10(cfg.data_paths, class_a, class_b, qspec, cfg.word_size)
        test = None
        if cfg.test_data_paths:
            test = datamod.load_cifar10(
                cfg.test_data_paths, class_a, class_b, qspec, cfg.word_size
            )
    else:
        train = datamod.load_amat(cfg.data_paths[0], cfg.threshold, cfg.word_size)
        test = None
        if cfg.test_data_paths:
            test = datamod.load_amat(cfg.test_data_paths[0], cfg.threshold, cfg.word_size)
    train = _subsample(train, train_size, "training")
    if test is not None:
        test = _subsample(test, test_size, "test")
    return train, test


def _csv_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def append_csv_row(path: str, row: dict) -> None:
    """Append one complete row, writing the header for a fresh file."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    try:
        fresh = open(path).readline() == ""
    except OSError:
        fresh = True
    if fresh:
        writer.writerow(CSV_COLUMNS)
    writer.writerow([_csv_value(row.get(c)) for c in CSV_COLUMNS])
    with open(path, "a") as fh:
        fh.write(buf.getvalue())
        fh.flush()


def _base_row(cfg: ExperimentConfig, seed: int) -> dict:
    class_a, class_b = cfg.resolved_classes()
    train_size, test_size = cfg.sizes()
    row = {c: None for c in CSV_COLUMNS}
    row.update(
        dataset=cfg.dataset,
        bits=cfg.bits,
        train_size=train_size,
        test_size=test_size,
        arity=cfg.arity,
        depth=cfg.depth,
        t=min(cfg.t, cfg.depth),
        trials=cfg.trials,
        seed=seed,
        word_size=cfg.word_size,
        threads=cfg.threads,
        backend=BACKEND,
    )
    if cfg.dataset == "cubes":
        row["delta"] = cfg.delta
    if cfg.dataset == "gauss":
        row.update(mu0=cfg.mu0, sigma0=cfg.sigma0, mu1=cfg.mu1, sigma1=cfg.sigma1)
    if cfg.dataset in ("mnist", "cifar"):
        row.update(class_a=class_a, class_b=class_b)
    if cfg.dataset == "amat":
        row["threshold"] = cfg.threshold
    return row


def _model_path(cfg: ExperimentConfig, seed: int) -> str | None:
    if cfg.model_out is None:
        return None
    if cfg.repeat == 1:
        return cfg.model_out
    return f"{cfg.model_out}.seed{seed}"


def _pct(x: float | None) -> str:
    return "-" if x is None else f"{100.0 * x:.2f}%"


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Train/evaluate once per repeat seed; returns the CSV rows written."""
    cfg.validate()
    rows = []
    for i in range(cfg.repeat):
        seed = cfg.seed + i
        t_start = time.perf_counter()
        t0 = time.perf_counter()
        train, test = build_datasets(cfg, seed)
        data_ms = (time.perf_counter() - t0) * 1e3
        tree, _, report = train_circuit(train, test, cfg.train_config(seed))
        total_ms = (time.perf_counter() - t_start) * 1e3

        model_path = _model_path(cfg, seed)
        if model_path:
            with open(model_path, "wb") as fh:
                fh.write(serialize(tree))
        row = _base_row(cfg, seed)
        row.update(
            train_err=100.0 * report.train_error,
            test_err=None if report.test_error is None else 100.0 * report.test_error,
            data_ms=data_ms,
            greedy_ms=report.timings_ms.get("greedy_ms"),
            hill_climb_ms=report.timings_ms.get("hill_climb_ms"),
            eval_ms=report.timings_ms.get("eval_ms"),
            total_ms=total_ms,
        )
        if cfg.csv_out:
            append_csv_row(cfg.csv_out, row)
        print(
            f"{cfg.dataset} a={cfg.arity} d={cfg.depth} t={min(cfg.t, cfg.depth)}"
            f" n={cfg.trials} seed={seed} |"
            f" train {_pct(report.train_error)} test {_pct(report.test_error)} |"
            f" data {data_ms:.0f}ms greedy {report.timings_ms.get('greedy_ms', 0):.0f}ms"
            f" climb {report.timings_ms.get('hill_climb_ms', 0):.0f}ms"
            f" eval {report.timings_ms.get('eval_ms', 0):.0f}ms"
        )
        rows.append(row)
    return rows


@dataclass
class SweepGrid:
    """Value lists for any subset of the sweepable axes (cross product)."""

    arity: list[int] = field(default_factory=lambda: [4])
    depth: list[int] = field(default_factory=lambda: [8])
    t: list[int] = field(default_factory=lambda: [4])
    trials: list[int] = field(default_factory=lambda: [0])
    delta: list[float] = field(default_factory=lambda: [0.0])
    bits: list[int] = field(default_factory=lambda: [2])

    def validate(self) -> None:
        for axis in SWEEP_AXES:
            if not getattr(self, axis):
                raise ValidationError(f"sweep axis {axis!r} has no values")

    def combos(self):
        axes = [getattr(self, axis) for axis in SWEEP_AXES]
        return [dict(zip(SWEEP_AXES, combo)) for combo in itertools.product(*axes)]


def _median_errors(rows: list[dict]) -> tuple[float, float | None]:
    train = statistics.median(r["train_err"] for r in rows)
    tests = [r["test_err"] for r in rows if r["test_err"] is not None]
    return train, statistics.median(tests) if tests else None


def run_sweep(grid: SweepGrid, base: ExperimentConfig, leaf_cap: int = 1 << 20) -> tuple[str, list[dict]]:
    """Run every grid cell; returns (text tables, all CSV rows).

    Cells whose tree would exceed `leaf_cap` leaves are skipped and left
    blank, and a failing cell is marked ERR without stopping the sweep.
    """
    grid.validate()
    base.validate()
    cells: dict[tuple, dict] = {}
    all_rows: list[dict] = []
    for combo in grid.combos():
        key = tuple(combo[a] for a in SWEEP_AXES)
        cfg = replace(base, **combo)
        if cfg.arity**cfg.depth > leaf_cap:
            print(
                f"skip a={cfg.arity} d={cfg.depth}: {cfg.arity}**{cfg.depth} leaves"
                f" exceed the cap of {leaf_cap}",
                file=sys.stderr,
            )
            cells[key] = {"status": "skip"}
            continue
        try:
            rows = run_experiment(cfg)
        except (BitcircuitError, OSError) as exc:
            print(f"cell {combo} failed: {exc}", file=sys.stderr)
            cells[key] = {"status": "error"}
            continue
        all_rows.extend(rows)
        train, test = _median_errors(rows)
        cells[key] = {"status": "ok", "train": train, "test": test}
    return _render_tables(grid, cells), all_rows


def _cell_text(cell: dict | None, kind: str) -> str:
    if cell is None or cell["status"] == "skip":
        return ""
    if cell["status"] == "error":
        return "ERR"
    value = cell.get(kind)
    return "" if value is None else f"{value:.3g}"


def _render_tables(grid: SweepGrid, cells: dict[tuple, dict]) -> str:
    varying = [a for a in SWEEP_AXES if len(getattr(grid, a)) > 1]
    row_axis = varying[0] if varying else "arity"
    col_axis = next(
        (a for a in varying[1:] if a != row_axis),
        "depth" if row_axis != "depth" else "arity",
    )
    group_axes = [a for a in SWEEP_AXES if a not in (row_axis, col_axis)]
    row_values = getattr(grid, row_axis)
    col_values = getattr(grid, col_axis)

    out = []
    for group in itertools.product(*(getattr(grid, a) for a in group_axes)):
        fixed = dict(zip(group_axes, group))
        header = " ".join(f"{_AXIS_SHORT[a]}={v}" for a, v in fixed.items())
        out.append(f"[{header}]")
        label = f"{_AXIS_SHORT[row_axis]}\\{_AXIS_SHORT[col_axis]}"
        widths = [max(8, len(str(v)) + 2) for v in col_values]
        head = f"{label:>8} {'':>6}" + "".join(f"{str(v):>{w}}" for v, w in zip(col_values, widths))
        out.append(head)
        for rv in row_values:
            for kind in ("train", "test"):
                line = f"{str(rv):>8} {kind.capitalize():>6}"
                for cv, w in zip(col_values, widths):
                    combo = dict(fixed)
                    combo[row_axis] = rv
                    combo[col_axis] = cv
                    key = tuple(combo[a] for a in SWEEP_AXES)
                    line += f"{_cell_text(cells.get(key), kind):>{w}}"
                out.append(line)
        out.append("")
    return "\n".join(out)


def classify(cfg: ExperimentConfig, model_path: str, split: str = "test") -> float | None:
    """Load a model, classify one dataset split, optionally write predictions.

    Returns the error rate when labels are available (always, for the
    built-in datasets).
    """
    cfg.validate()
    with open(model_path, "rb") as fh:
        tree = deserialize(fh.read())
    train, test = build_datasets(cfg, cfg.seed)
    dataset = train if split == "train" or test is None else test
    if tree.n_features != dataset.n_features:
        raise ValidationError(
            f"model expects {tree.n_features} features,"
            f" dataset has {dataset.n_features}"
        )
    t0 = time.perf_counter()
    preds = predict(tree, dataset)
    elapsed = time.perf_counter() - t0
    if cfg.predict_out:
        bits = unpack_bits(preds, dataset.n_examples)
        with open(cfg.predict_out, "w") as fh:
            fh.writelines(f"{b}\n" for b in bits)
    err = error_rate(preds, dataset.labels, dataset.n_examples)
    rate = dataset.n_examples / elapsed if elapsed > 0 else float("inf")
    internal, leaves = tree_shape(tree.arity, tree.depth)
    print(
        f"classified {dataset.n_examples} examples with {internal} gates in"
        f" {elapsed * 1e3:.0f}ms ({rate:,.0f} examples/s) | error {_pct(err)}"
    )
    return err


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok != ""]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok != ""]


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", choices=DATASETS, default="cubes")
    p.add_argument("--mu0", type=float, default=32768.0)
    p.add_argument("--sigma0", type=float, default=2000.0)
    p.add_argument("--mu1", type=float, default=32768.0)
    p.add_argument("--sigma1", type=float, default=8000.0)
    p.add_argument("--class-a", type=int, default=None, help="source label mapped to class 0")
    p.add_argument("--class-b", type=int, default=None, help="source label mapped to class 1")
    p.add_argument("--threshold", type=float, default=0.5, help="amat binarization threshold")
    p.add_argument("--images", help="IDX image file (mnist)")
    p.add_argument("--labels", help="IDX label file (mnist)")
    p.add_argument("--test-images", help="IDX image file for the test split")
    p.add_argument("--test-labels", help="IDX label file for the test split")
    p.add_argument("--data", nargs="+", default=[], help="binary batches (cifar) or matrix (amat)")
    p.add_argument("--test-data", nargs="+", default=[], help="test-split counterpart of --data")
    p.add_argument("--train", type=int, default=None, help="training examples (default: dataset-specific)")
    p.add_argument("--test", type=int, default=None, help="test examples")
    p.add_argument("--word-size", type=int, choices=(32, 64), default=64)


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeat", type=int, default=1, help="run seeds seed..seed+repeat-1")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--criterion", choices=("mixed", "accuracy", "infogain"), default="mixed")
    p.add_argument("--model-out")
    p.add_argument("--csv-out")
    p.add_argument("--predict-out")


def _config_from_args(args: argparse.Namespace, **overrides) -> ExperimentConfig:
    values = dict(
        dataset=args.dataset,
        mu0=args.mu0,
        sigma0=args.sigma0,
        mu1=args.mu1,
        sigma1=args.sigma1,
        class_a=args.class_a,
        class_b=args.class_b,
        threshold=args.threshold,
        images=args.images,
        labels=args.labels,
        test_images=args.test_images,
        test_labels=args.test_labels,
        data_paths=args.data,
        test_data_paths=args.test_data,
        train_size=args.train,
        test_size=args.test,
        word_size=args.word_size,
        seed=args.seed,
        repeat=getattr(args, "repeat", 1),
        threads=getattr(args, "threads", 1),
        criterion=getattr(args, "criterion", "mixed"),
        model_out=getattr(args, "model_out", None),
        csv_out=getattr(args, "csv_out", None),
        predict_out=getattr(args, "predict_out", None),
    )
    values.update(overrides)
    return ExperimentConfig(**values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bitcircuit",
        description="Train and run bit-parallel boolean-circuit classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="one experiment (per repeat seed)")
    _add_dataset_args(run_p)
    run_p.add_argument("--delta", type=float, default=0.0, help="bit-flip noise (cubes)")
    run_p.add_argument("--bits", type=int, default=2, help="bits kept per channel value")
    run_p.add_argument("--arity", "-a", type=int, default=4)
    run_p.add_argument("--depth", "-d", type=int, default=8)
    run_p.add_argument("--t", type=int, default=4, help="update propagation depth")
    run_p.add_argument("--trials", "-n", type=int, default=0, help="hill-climbing trials")
    _add_train_args(run_p)

    sweep_p = sub.add_parser("sweep", help="cross product of hyperparameter lists")
    _add_dataset_args(sweep_p)
    sweep_p.add_argument("--delta", type=_float_list, default=[0.0], help="comma-separated list")
    sweep_p.add_argument("--bits", type=_int_list, default=[2], help="comma-separated list")
    sweep_p.add_argument("--arity", "-a", type=_int_list, default=[4])
    sweep_p.add_argument("--depth", "-d", type=_int_list, default=[8])
    sweep_p.add_argument("--t", type=_int_list, default=[4])
    sweep_p.add_argument("--trials", "-n", type=_int_list, default=[0])
    sweep_p.add_argument("--leaf-cap", type=int, default=1 << 20)
    _add_train_args(sweep_p)

    cls_p = sub.add_parser("classify", help="apply a saved model to a dataset")
    cls_p.add_argument("--model", required=True)
    cls_p.add_argument("--split", choices=("train", "test"), default="test")
    _add_dataset_args(cls_p)
    cls_p.add_argument("--delta", type=float, default=0.0)
    cls_p.add_argument("--bits", type=int, default=2)
    cls_p.add_argument("--seed", type=int, default=0)
    cls_p.add_argument("--predict-out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = _config_from_args(
                args,
                delta=args.delta,
                bits=args.bits,
                arity=args.arity,
                depth=args.depth,
                t=args.t,
                trials=args.trials,
            )
            run_experiment(cfg)
        elif args.command == "sweep":
            base = _config_from_args(args)
            grid = SweepGrid(
                arity=args.arity,
                depth=args.depth,
                t=args.t,
                trials=args.trials,
                delta=args.delta,
                bits=args.bits,
            )
            text, _ = run_sweep(grid, base, leaf_cap=args.leaf_cap)
            print(text)
        else:
            cfg = _config_from_args(args, delta=args.delta, bits=args.bits)
            classify(cfg, args.model, split=args.split)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BitcircuitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

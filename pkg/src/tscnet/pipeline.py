"""End-to-end orchestration of the two clustering stages.

Stage I turns a price table into ⟨volatility, ret⟩ features and k-means
cluster labels. Stage II splits the labeled records, trains the autoencoder
to regress the numeric label, and scores the held-out records against their
k-means labels.

:func:`run_pipeline` drives both stages from a parsed config and emits the
artifact bundle: labels CSV, model file, k-sweep CSV (auto-k runs only),
loss CSV, evaluation CSV, and two scatter SVGs, plus a checksum manifest.
Artifacts carry no timestamps and all numbers use fixed formats, so a rerun
with the same config reproduces every file byte for byte. Failures in any
stage surface as :class:`PipelineError` tagged with the stage name.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autonet, features, ingest, kmeans, svgplot
from .errors import BadConfig, BadK, EmptyDataset, PipelineError
from .rng import Xorshift64Star

AUTO = "auto"

LABELS_CSV = "labels.csv"
MODEL_FILE = "model.tscnet"
SWEEP_CSV = "k_sweep.csv"
LOSS_CSV = "loss.csv"
EVAL_CSV = "evaluation.csv"
SCATTER_KMEANS_SVG = "scatter_kmeans.svg"
SCATTER_AUTONET_SVG = "scatter_autoencoder.svg"
MANIFEST_FILE = "manifest.txt"

EVAL_HEADER = ["ticker", "volatility", "return", "raw_output", "predicted", "kmeans", "missed"]

DEFAULT_ENCODER_WIDTHS = (100, 50, 20)


@dataclass(frozen=True)
class LabeledRecord:
    """One ticker's features plus its k-means cluster id."""

    ticker: str
    volatility: float
    ret: float
    cluster: int


@dataclass(frozen=True)
class SplitSpec:
    """Seeded train/test split; test size is ceil(test_fraction * n)."""

    test_fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise BadConfig(f"test_fraction must be in (0, 1), got {self.test_fraction}")


@dataclass(frozen=True)
class EvalRow:
    """One held-out record's raw output and the two labels being compared."""

    ticker: str
    volatility: float
    ret: float
    raw_output: float
    predicted: int
    kmeans: int
    missed: bool


@dataclass(frozen=True)
class EvaluationReport:
    """Per-record comparison of network predictions against k-means labels.

    ``cluster_bounds`` maps each k-means label present in the test set to
    (vol_min, vol_max, ret_min, ret_max) over its rows; disagreements near a
    shared bound sit on a cluster border.
    """

    rows: tuple[EvalRow, ...]
    accuracy: float
    disagreements: tuple[EvalRow, ...]
    cluster_bounds: dict[int, tuple[float, float, float, float]]


def feature_matrix(feats: list[features.FeatureVector]) -> np.ndarray:
    """Stack feature vectors as an (n, 2) array of (volatility, ret) rows."""
    return np.array([[f.volatility, f.ret] for f in feats], dtype=float)


def _records_from(feats, model: kmeans.KMeansModel) -> list[LabeledRecord]:
    return [
        LabeledRecord(f.ticker, f.volatility, f.ret, int(label))
        for f, label in zip(feats, model.assignments)
    ]


def stage1_label(
    table: ingest.PriceTable,
    k: int | str = AUTO,
    seed: int = 7,
    trading_days: int = features.TRADING_DAYS,
    k_min: int = 2,
    k_max: int = 10,
    restarts: int = kmeans.DEFAULT_RESTARTS,
    canonical: bool = False,
    warn_sink: list[str] | None = None,
) -> tuple[list[LabeledRecord], kmeans.KMeansModel]:
    """Features plus k-means labels for every usable ticker, in ticker order.

    ``k`` is an integer or "auto"; auto sweeps [k_min, min(k_max, n-1)] and
    keeps the silhouette maximizer. ``canonical`` renumbers clusters by
    descending mean return. Tickers dropped for short series are reported
    into ``warn_sink`` when given.
    """
    feats, warnings = features.build_feature_table(table, trading_days)
    if warn_sink is not None:
        warn_sink.extend(warnings)
    points = feature_matrix(feats)
    chosen = _resolve_k(points, k, k_min, k_max, seed, restarts)[0]
    model = kmeans.kmeans_fit(points, chosen, seed=seed, restarts=restarts)
    if canonical:
        model = kmeans.relabel_by_return(model)
    return _records_from(feats, model), model


def _resolve_k(points, k, k_min, k_max, seed, restarts) -> tuple[int, list[tuple[int, float]] | None]:
    """Fixed k passes through; "auto" runs the silhouette sweep."""
    if k == AUTO:
        n = len(points)
        hi = min(k_max, n - 1)
        if k_min > hi:
            raise BadK(f"auto-k needs k_min <= min(k_max, n-1); got k_min={k_min}, n={n}")
        best_k, sweep = kmeans.select_k(points, k_min, hi, seed=seed, restarts=restarts)
        return best_k, sweep
    if not isinstance(k, int):
        raise BadK(f"k must be an integer or {AUTO!r}, got {k!r}")
    return k, None


def split(
    records: list[LabeledRecord],
    spec: SplitSpec,
    stratify: bool = False,
) -> tuple[list[LabeledRecord], list[LabeledRecord]]:
    """Seeded-shuffle partition into (train, test); |test| = ceil(fraction * n).

    Unstratified by default. With ``stratify`` the same total test size is
    apportioned across clusters by largest remainder, so class balance is
    approximately preserved.
    """
    n = len(records)
    if n < 2:
        raise EmptyDataset(f"need at least 2 records to split, got {n}")
    test_size = math.ceil(spec.test_fraction * n)
    rng = Xorshift64Star(spec.seed)
    if not stratify:
        idx = list(range(n))
        rng.shuffle(idx)
        test_idx = idx[:test_size]
        train_idx = idx[test_size:]
    else:
        test_idx, train_idx = _stratified_indices(records, test_size, rng)
    return [records[i] for i in train_idx], [records[i] for i in test_idx]


def _stratified_indices(records, test_size, rng):
    groups: dict[int, list[int]] = {}
    for i, rec in enumerate(records):
        groups.setdefault(rec.cluster, []).append(i)
    labels = sorted(groups)
    n = len(records)
    quotas = {lab: test_size * len(groups[lab]) / n for lab in labels}
    take = {lab: min(int(quotas[lab]), len(groups[lab])) for lab in labels}
    leftover = test_size - sum(take.values())
    # hand out the remainder by largest fractional part, ties to lower label
    by_frac = sorted(labels, key=lambda lab: (-(quotas[lab] - int(quotas[lab])), lab))
    while leftover > 0:
        progressed = False
        for lab in by_frac:
            if leftover == 0:
                break
            if take[lab] < len(groups[lab]):
                take[lab] += 1
                leftover -= 1
                progressed = True
        if not progressed:
            break
    test_idx, train_idx = [], []
    for lab in labels:
        members = list(groups[lab])
        rng.shuffle(members)
        test_idx.extend(members[: take[lab]])
        train_idx.extend(members[take[lab] :])
    return test_idx, train_idx


def stage2_train(
    train_records: list[LabeledRecord],
    num_clusters: int,
    encoder_widths: tuple[int, ...] = DEFAULT_ENCODER_WIDTHS,
    epochs: int = 1000,
    batch_size: int = 1024,
    seed: int = 7,
    lr: float = autonet.DEFAULT_LR,
) -> tuple[autonet.DenseNetwork, autonet.TrainHistory]:
    """Train the autoencoder to regress cluster ids from ⟨volatility, ret⟩.

    Targets are the raw integer labels as floats (the output layer is one
    unit wide); the latent width equals ``num_clusters``.
    """
    if not train_records:
        raise EmptyDataset("no training records")
    X = np.array([[r.volatility, r.ret] for r in train_records], dtype=float)
    y = np.array([[float(r.cluster)] for r in train_records], dtype=float)
    net = autonet.build_autoencoder(2, encoder_widths, num_clusters, 1, seed=seed)
    history = autonet.train(net, X, y, epochs=epochs, batch_size=batch_size, seed=seed, lr=lr)
    return net, history


def label_accuracy(predicted, reference) -> float:
    """Fraction of positions where the two label sequences agree.

    Invariant under any simultaneous relabeling applied to both sequences.
    """
    p = np.asarray(predicted)
    r = np.asarray(reference)
    if p.shape != r.shape:
        raise EmptyDataset(f"label shapes differ: {p.shape} vs {r.shape}")
    if p.size == 0:
        raise EmptyDataset("no labels to compare")
    return float(np.mean(p == r))


def evaluate(
    net: autonet.DenseNetwork,
    test_records: list[LabeledRecord],
    num_clusters: int,
) -> EvaluationReport:
    """Score network label predictions against the k-means reference labels."""
    if not test_records:
        raise EmptyDataset("no test records")
    X = np.array([[r.volatility, r.ret] for r in test_records], dtype=float)
    raw, _ = autonet.forward(net, X)
    raw = raw[:, 0]
    predicted = autonet.round_labels(raw, num_clusters)
    rows = tuple(
        EvalRow(
            ticker=rec.ticker,
            volatility=rec.volatility,
            ret=rec.ret,
            raw_output=float(raw[i]),
            predicted=int(predicted[i]),
            kmeans=rec.cluster,
            missed=int(predicted[i]) != rec.cluster,
        )
        for i, rec in enumerate(test_records)
    )
    accuracy = label_accuracy([row.predicted for row in rows], [row.kmeans for row in rows])
    bounds: dict[int, tuple[float, float, float, float]] = {}
    for label in sorted({row.kmeans for row in rows}):
        members = [row for row in rows if row.kmeans == label]
        bounds[label] = (
            min(m.volatility for m in members),
            max(m.volatility for m in members),
            min(m.ret for m in members),
            max(m.ret for m in members),
        )
    return EvaluationReport(
        rows=rows,
        accuracy=accuracy,
        disagreements=tuple(row for row in rows if row.missed),
        cluster_bounds=bounds,
    )


def write_evaluation_csv(report: EvaluationReport, path) -> None:
    """Write per-record evaluation rows; ``missed`` is 0/1."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(EVAL_HEADER) + "\n")
        for row in report.rows:
            fh.write(
                f"{row.ticker},{row.volatility:.12g},{row.ret:.12g},"
                f"{row.raw_output:.16e},{row.predicted},{row.kmeans},{int(row.missed)}\n"
            )


def write_loss_csv(history: autonet.TrainHistory, path) -> None:
    """Write the per-epoch loss curve as ``epoch,loss`` (epochs 1-based)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(history.losses, start=1):
            fh.write(f"{epoch},{loss:.16e}\n")


def read_loss_csv(path) -> list[tuple[int, float]]:
    """Read an ``epoch,loss`` curve back."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or lines[0] != "epoch,loss":
        raise ValueError(f"not a loss curve: {path}")
    out = []
    for line in lines[1:]:
        epoch_str, loss_str = line.split(",")
        out.append((int(epoch_str), float(loss_str)))
    return out


CONFIG_KEYS = (
    "prices_path",
    "tickers_path",
    "start_date",
    "k",
    "k_min",
    "k_max",
    "seed",
    "epochs",
    "batch_size",
    "test_fraction",
    "trading_days",
    "out_dir",
)


@dataclass(frozen=True)
class PipelineConfig:
    """Parsed run configuration; defaults follow the canonical study setup."""

    prices_path: Path
    out_dir: Path = Path("out")
    tickers_path: Path | None = None
    start_date: dt.date | None = None
    k: int | str = AUTO
    k_min: int = 2
    k_max: int = 10
    seed: int = 7
    epochs: int = 1000
    batch_size: int = 1024
    test_fraction: float = 0.33
    trading_days: int = features.TRADING_DAYS

    def __post_init__(self):
        if self.k != AUTO:
            if not isinstance(self.k, int) or self.k < 1:
                raise BadConfig(f"k must be a positive integer or {AUTO!r}, got {self.k!r}")
        if not 2 <= self.k_min <= self.k_max:
            raise BadConfig(f"need 2 <= k_min <= k_max, got [{self.k_min}, {self.k_max}]")
        if self.epochs < 1 or self.batch_size < 1:
            raise BadConfig("epochs and batch_size must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise BadConfig(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if self.trading_days < 1:
            raise BadConfig(f"trading_days must be >= 1, got {self.trading_days}")
        if self.seed < 0:
            raise BadConfig(f"seed must be >= 0, got {self.seed}")


def parse_config(path) -> PipelineConfig:
    """Parse a key-value config file (``key = value`` or ``key: value`` lines).

    Blank lines and ``#`` comments are ignored. Relative paths resolve
    against the config file's directory. Unknown or duplicate keys are
    rejected.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise BadConfig(f"cannot read config {path}: {exc}") from exc
    base = path.resolve().parent
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        for sep in ("=", ":"):
            if sep in stripped:
                key, value = stripped.split(sep, 1)
                break
        else:
            raise BadConfig(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_KEYS:
            raise BadConfig(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise BadConfig(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise BadConfig(f"line {lineno}: empty value for {key!r}")
        raw[key] = value
    if "prices_path" not in raw:
        raise BadConfig("config is missing required key 'prices_path'")

    def _path(key: str) -> Path:
        p = Path(raw[key])
        return p if p.is_absolute() else base / p

    def _int(key: str) -> int:
        try:
            return int(raw[key])
        except ValueError as exc:
            raise BadConfig(f"{key} must be an integer, got {raw[key]!r}") from exc

    kwargs: dict = {"prices_path": _path("prices_path")}
    if "out_dir" in raw:
        kwargs["out_dir"] = _path("out_dir")
    if "tickers_path" in raw:
        kwargs["tickers_path"] = _path("tickers_path")
    if "start_date" in raw:
        try:
            kwargs["start_date"] = dt.date.fromisoformat(raw["start_date"])
        except ValueError as exc:
            raise BadConfig(f"start_date must be YYYY-MM-DD, got {raw['start_date']!r}") from exc
    if "k" in raw:
        kwargs["k"] = AUTO if raw["k"].lower() == AUTO else _int("k")
    for key in ("k_min", "k_max", "seed", "epochs", "batch_size", "trading_days"):
        if key in raw:
            kwargs[key] = _int(key)
    if "test_fraction" in raw:
        try:
            kwargs["test_fraction"] = float(raw["test_fraction"])
        except ValueError as exc:
            raise BadConfig(f"test_fraction must be a number, got {raw['test_fraction']!r}") from exc
    return PipelineConfig(**kwargs)


@dataclass
class PipelineResult:
    """Everything a run produced, with artifact paths keyed by file name."""

    config: PipelineConfig
    chosen_k: int
    records: list[LabeledRecord]
    model: kmeans.KMeansModel
    sweep: list[tuple[int, float]] | None
    history: autonet.TrainHistory
    report: EvaluationReport
    warnings: list[str]
    artifacts: dict[str, Path]
    manifest_path: Path


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


def _scatter_points(records, labels, misses):
    return [
        (rec.volatility, rec.ret, int(lab), bool(miss))
        for rec, lab, miss in zip(records, labels, misses)
    ]


def run_pipeline(config: PipelineConfig, stratify: bool = False) -> PipelineResult:
    """Execute Stage I and Stage II and emit the artifact bundle.

    All stages run before any file is written; a failure while writing
    removes whatever this run had already created. The manifest lists every
    artifact as ``<sha256>  <name>``, sorted by name.
    """
    warnings: list[str] = []

    def load_table():
        tickers = None
        if config.tickers_path is not None:
            tickers = ingest.parse_ticker_list(config.tickers_path.read_text(encoding="utf-8"))
        start = config.start_date if config.start_date is not None else dt.date.min
        table, warns = ingest.load_price_table(config.prices_path, tickers, start)
        warnings.extend(warns)
        return table

    table = _stage("ingest", load_table)

    def build_features():
        feats, warns = features.build_feature_table(table, config.trading_days)
        warnings.extend(warns)
        return feats

    feats = _stage("features", build_features)
    points = feature_matrix(feats)

    def fit():
        chosen, sweep = _resolve_k(points, config.k, config.k_min, config.k_max, config.seed, kmeans.DEFAULT_RESTARTS)
        model = kmeans.kmeans_fit(points, chosen, seed=config.seed)
        return model, sweep

    model, sweep = _stage("kmeans", fit)
    records = _records_from(feats, model)

    train_set, test_set = _stage(
        "split", split, records, SplitSpec(config.test_fraction, config.seed), stratify
    )
    net, history = _stage(
        "train",
        stage2_train,
        train_set,
        num_clusters=model.k,
        epochs=config.epochs,
        batch_size=config.batch_size,
        seed=config.seed,
    )
    report = _stage("evaluate", evaluate, net, test_set, model.k)

    def emit():
        raw_all, _ = autonet.forward(net, points)
        predicted_all = autonet.round_labels(raw_all[:, 0], model.k)
        misses = [int(p) != rec.cluster for p, rec in zip(predicted_all, records)]

        out = config.out_dir
        out.mkdir(parents=True, exist_ok=True)
        written: list[Path] = []

        def target(name: str) -> Path:
            p = out / name
            written.append(p)
            return p

        artifacts: dict[str, Path] = {}
        try:
            features.write_labels_csv(records, target(LABELS_CSV))
            artifacts[LABELS_CSV] = out / LABELS_CSV
            autonet.save_model(net, target(MODEL_FILE))
            artifacts[MODEL_FILE] = out / MODEL_FILE
            if sweep is not None:
                kmeans.write_sweep_csv(sweep, target(SWEEP_CSV))
                artifacts[SWEEP_CSV] = out / SWEEP_CSV
            write_loss_csv(history, target(LOSS_CSV))
            artifacts[LOSS_CSV] = out / LOSS_CSV
            write_evaluation_csv(report, target(EVAL_CSV))
            artifacts[EVAL_CSV] = out / EVAL_CSV

            km_svg = svgplot.scatter_chart(
                _scatter_points(records, [r.cluster for r in records], misses),
                "KMeans clustering",
                "annualized volatility",
                "annualized return",
                model.k,
            )
            target(SCATTER_KMEANS_SVG).write_text(km_svg, encoding="utf-8")
            artifacts[SCATTER_KMEANS_SVG] = out / SCATTER_KMEANS_SVG

            net_svg = svgplot.scatter_chart(
                _scatter_points(records, predicted_all, misses),
                "Autoencoder clustering",
                "annualized volatility",
                "annualized return",
                model.k,
            )
            target(SCATTER_AUTONET_SVG).write_text(net_svg, encoding="utf-8")
            artifacts[SCATTER_AUTONET_SVG] = out / SCATTER_AUTONET_SVG

            manifest_path = out / MANIFEST_FILE
            written.append(manifest_path)
            write_manifest(artifacts, manifest_path)
        except Exception:
            for p in written:
                p.unlink(missing_ok=True)
            raise
        return artifacts, manifest_path

    artifacts, manifest_path = _stage("emit", emit)
    return PipelineResult(
        config=config,
        chosen_k=model.k,
        records=records,
        model=model,
        sweep=sweep,
        history=history,
        report=report,
        warnings=warnings,
        artifacts=artifacts,
        manifest_path=manifest_path,
    )


def write_manifest(artifacts: dict[str, Path], path) -> None:
    """Write ``<sha256>  <name>`` lines, sorted by artifact name."""
    lines = []
    for name in sorted(artifacts):
        digest = hashlib.sha256(artifacts[name].read_bytes()).hexdigest()
        lines.append(f"{digest}  {name}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

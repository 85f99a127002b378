"""
Report bundles: metrics tables, prediction CSVs, plots and a manifest.

A bundle directory always holds ``manifest.txt``, a flat key=value file::

    command=train-price
    config_hash=<sha256 of the canonical run config>
    seed=0
    config.<key>=<value>        one line per run-config key
    input.<file name>=<sha256>  one line per input file
    output=<file name>          one line per written file
    test_range=<first date>..<last date>

Nothing in it depends on the clock or the output directory, so reruns of
the same config over the same inputs reproduce it byte for byte.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd

from quantsig.errors import FileAccessError, MissingManifest, MissingMetrics
from quantsig.metrics import CLASSIFICATION_ROWS, REGRESSION_ROWS, ClassificationReport, RegressionReport
from quantsig.run_config import RunConfig

logger = logging.getLogger(__name__)

MANIFEST = "manifest.txt"
METRICS_CSV = "metrics.csv"
METRICS_TXT = "metrics.txt"
FLOAT_FORMAT = "%.10g"
# keys allowed to differ between runs placed side by side
MODEL_KEYS = ("model", "epochs", "learning_rate", "l2", "k", "knn_metric", "max_depth", "min_samples_leaf",
              "n_trees", "max_features", "bootstrap", "hidden_size", "window_length", "batch_size")

MetricRow = Tuple[str, str, float]


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def regression_rows(split: str, report: RegressionReport) -> List[MetricRow]:
    return [(split, name, float(getattr(report, attribute))) for name, attribute in REGRESSION_ROWS]


def classification_rows(split: str, report: ClassificationReport, auc: float) -> List[MetricRow]:
    rows = [(split, name, float(getattr(report, attribute))) for name, attribute in CLASSIFICATION_ROWS]
    rows.append((split, "AUC", float(auc)))
    return rows


def metrics_frame(results: Dict[str, Sequence[MetricRow]]) -> pd.DataFrame:
    """One column per model label; rows keep the (split, metric) order they first appear in."""
    order: List[Tuple[str, str]] = []
    values: Dict[str, Dict[Tuple[str, str], float]] = {}
    for label, rows in results.items():
        values[label] = {}
        for split, metric, value in rows:
            if (split, metric) not in order:
                order.append((split, metric))
            values[label][(split, metric)] = value
    frame = pd.DataFrame(order, columns=["split", "metric"])
    for label in results:
        frame[label] = [values[label].get(key, float("nan")) for key in order]
    return frame


def render_metrics_text(frame: pd.DataFrame, title: str) -> str:
    blocks = [title, "=" * len(title), ""]
    for split, group in frame.groupby("split", sort=False):
        table = group.drop(columns=["split"]).set_index("metric")
        blocks.append(f"[{split}]")
        blocks.append(table.to_string(float_format=lambda v: f"{v:.4f}"))
        blocks.append("")
    return "\n".join(blocks)


@dataclass
class ReportBundle:
    """Tracks the files a command writes so a failed run can take them back."""
    out_dir: Path
    written: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        if name not in self.written:
            self.written.append(name)
        return self.out_dir / name

    def write_text(self, name: str, text: str) -> Path:
        target = self.path(name)
        target.write_text(text, encoding="utf-8", newline="\n")
        return target

    def write_metrics(self, frame: pd.DataFrame, title: str) -> None:
        frame.to_csv(self.path(METRICS_CSV), index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self.write_text(METRICS_TXT, render_metrics_text(frame, title))

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        target = self.path(name)
        frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return target

    def write_manifest(self, command: str, config: RunConfig, inputs: Iterable[Path],
                       extra: Optional[Dict[str, str]] = None) -> Path:
        lines = [f"command={command}", f"config_hash={config.config_hash()}", f"seed={config.seed}"]
        lines += [f"config.{key}={value}" for key, value in config.as_items().items()]
        lines += [f"input.{Path(p).name}={sha256_file(p)}" for p in sorted(inputs, key=lambda p: Path(p).name)]
        lines += [f"output={name}" for name in self.written if (self.out_dir / name).exists()]
        lines += [f"{key}={value}" for key, value in (extra or {}).items()]
        target = self.out_dir / MANIFEST
        target.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
        return target

    def discard(self) -> None:
        for name in self.written:
            target = self.out_dir / name
            if target.exists():
                target.unlink()
        manifest = self.out_dir / MANIFEST
        if manifest.exists():
            manifest.unlink()
        logger.warning("Removed %d partial outputs from %s", len(self.written), self.out_dir)
        self.written.clear()


@dataclass(frozen=True)
class RunRecord:
    directory: Path
    manifest: Dict[str, str]
    metrics: pd.DataFrame

    @property
    def config_hash(self) -> str:
        return self.manifest.get("config_hash", "")

    @property
    def config(self) -> Dict[str, str]:
        return {key[len("config."):]: value for key, value in self.manifest.items() if key.startswith("config.")}


def read_manifest(directory) -> Dict[str, str]:
    path = Path(directory) / MANIFEST
    if not path.is_file():
        raise MissingManifest(directory)
    entries: Dict[str, str] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if "=" not in line:
            continue
        key, value = line.split("=", 1)
        # repeated keys such as output= accumulate
        entries[key] = f"{entries[key]},{value}" if key in entries else value
    return entries


def find_runs(directories: Sequence) -> List[Path]:
    """Directories holding a manifest, looking one level down when a directory has none itself."""
    found: List[Path] = []
    for directory in map(Path, directories):
        if (directory / MANIFEST).is_file():
            found.append(directory)
        elif directory.is_dir():
            found += sorted(child for child in directory.iterdir() if (child / MANIFEST).is_file())
    if not found:
        raise MissingManifest(", ".join(str(d) for d in directories) or "<none>")
    return found


def load_runs(directories: Sequence) -> List[RunRecord]:
    runs: List[RunRecord] = []
    seen = set()
    for directory in find_runs(directories):
        manifest = read_manifest(directory)
        if not (directory / METRICS_CSV).is_file():
            logger.warning("Skipping %s: %s run has no %s", directory, manifest.get("command", "unknown"), METRICS_CSV)
            continue
        if manifest.get("config_hash") in seen:
            logger.info("Skipping %s: same config hash as an earlier run", directory)
            continue
        seen.add(manifest.get("config_hash"))
        try:
            metrics = pd.read_csv(directory / METRICS_CSV)
        except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
            raise FileAccessError(directory / METRICS_CSV, exc) from exc
        runs.append(RunRecord(directory, manifest, metrics))
    if not runs:
        raise MissingMetrics(", ".join(str(d) for d in directories))
    return runs


def config_mismatches(runs: Sequence[RunRecord]) -> Dict[str, List[str]]:
    """Non-model config keys whose values differ between runs, with each run's value."""
    keys = sorted({key for run in runs for key in run.config} - set(MODEL_KEYS))
    mismatches = {}
    for key in keys:
        values = [run.config.get(key, "") for run in runs]
        if len(set(values)) > 1:
            mismatches[key] = values
    return mismatches


def merge_runs(runs: Sequence[RunRecord]) -> pd.DataFrame:
    """Side-by-side table: the (split, metric) rows with one column per model across runs."""
    merged: Optional[pd.DataFrame] = None
    for run in runs:
        frame = run.metrics.copy()
        if merged is not None:
            for column in frame.columns[2:]:
                if column in merged.columns:
                    frame = frame.rename(columns={column: f"{column} [{run.config_hash[:8]}]"})
        merged = frame if merged is None else merged.merge(frame, on=["split", "metric"], how="outer", sort=False)
    return merged

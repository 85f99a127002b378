"""
Binary model files.

Layout, all integers little-endian:

    magic     8 bytes   b"QSMODEL1"
    tag       u32 n, then n bytes UTF-8 family tag ("lr", "rf", "scaler", ...)
    version   u32       currently 1
    count     u32       number of field records
    records   count times:
                u32 n, then n bytes UTF-8 field name
                u8 kind
                kind 1 (float64 array): u8 ndim, ndim x u64 dims, values as <f8
                kind 2 (int64 array):   u8 ndim, ndim x u64 dims, values as <i8
                kind 3 (string):        u64 n, then n bytes UTF-8

Scalars are stored as 0-d arrays. Trailing bytes after the last record
make the file corrupt.
"""

import logging
import os
import struct
from pathlib import Path
from typing import Callable, Dict, Tuple, Union

import numpy as np

from quantsig.errors import BadMagic, CorruptRecord, ShapeMismatch, VersionUnsupported
from quantsig.models.base import ClassifierModel, RegressorModel
from quantsig.models.bayes import BernoulliNbModel, GaussianNbModel
from quantsig.models.linear import LinearModel, LogisticModel
from quantsig.models.lstm import LstmModel
from quantsig.models.mlp import MlpModel
from quantsig.models.neighbors import KnnModel
from quantsig.models.svm import LinearSvmModel
from quantsig.models.trees import DecisionTreeModel, GradientBoostingModel, RandomForestModel, TreeArrays
from quantsig.preprocess import PcaModel, ScalerParams

logger = logging.getLogger(__name__)

MAGIC = b"QSMODEL1"
VERSION = 1
KIND_FLOAT = 1
KIND_INT = 2
KIND_STRING = 3

FieldValue = Union[np.ndarray, str]
Fields = Dict[str, FieldValue]
Persistable = Union[ClassifierModel, RegressorModel, ScalerParams, PcaModel]


def _f(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


def _i(value) -> np.ndarray:
    return np.asarray(value, dtype=np.int64)


def _names(names) -> str:
    return "\n".join(names)


def _split_names(text: str) -> Tuple[str, ...]:
    return tuple(text.split("\n")) if text else ()


def _tree_fields(tree: TreeArrays, prefix: str = "") -> Fields:
    return {prefix + "feature": _i(tree.feature), prefix + "threshold": _f(tree.threshold),
            prefix + "left": _i(tree.left), prefix + "right": _i(tree.right), prefix + "value": _f(tree.value)}


def _tree(fields: Fields, prefix: str = "") -> TreeArrays:
    tree = TreeArrays(feature=fields[prefix + "feature"], threshold=fields[prefix + "threshold"],
                      left=fields[prefix + "left"], right=fields[prefix + "right"], value=fields[prefix + "value"])
    tree.validate()
    return tree


def _forest_fields(trees) -> Fields:
    fields: Fields = {"n_trees": _i(len(trees))}
    for index, tree in enumerate(trees):
        fields.update(_tree_fields(tree, f"tree{index}."))
    return fields


def _forest(fields: Fields) -> Tuple[TreeArrays, ...]:
    return tuple(_tree(fields, f"tree{index}.") for index in range(int(fields["n_trees"])))


def _scaler_fields(scaler: ScalerParams, prefix: str = "") -> Fields:
    return {prefix + "columns": _names(scaler.column_names), prefix + "min": _f(scaler.a_min),
            prefix + "max": _f(scaler.a_max)}


def _scaler(fields: Fields, prefix: str = "") -> ScalerParams:
    return ScalerParams(_split_names(fields[prefix + "columns"]), fields[prefix + "min"], fields[prefix + "max"])


# tag -> (model type, encoder, decoder)
CODECS: Dict[str, Tuple[type, Callable[..., Fields], Callable[[Fields], Persistable]]] = {
    "linear": (
        LinearModel,
        lambda m: {"weights": _f(m.weights), "intercept": _f(m.intercept), "features": _names(m.feature_names)},
        lambda d: LinearModel(d["weights"], float(d["intercept"]), _split_names(d["features"])),
    ),
    "lstm": (
        LstmModel,
        lambda m: {**{name: _f(value) for name, value in m.params.items()}, "window_length": _i(m.window_length),
                   "loss_history": _f(m.loss_history), **_scaler_fields(m.scaler, "scaler.")},
        lambda d: LstmModel(wx=d["wx"], wh=d["wh"], b=d["b"], wy=d["wy"], by=d["by"],
                            window_length=int(d["window_length"]), scaler=_scaler(d, "scaler."),
                            loss_history=d["loss_history"]),
    ),
    "lr": (
        LogisticModel,
        lambda m: {"weights": _f(m.weights), "bias": _f(m.bias), "loss_history": _f(m.loss_history)},
        lambda d: LogisticModel(d["weights"], float(d["bias"]), d["loss_history"]),
    ),
    "gnb": (
        GaussianNbModel,
        lambda m: {"priors": _f(m.priors), "means": _f(m.means), "variances": _f(m.variances),
                   "variance_floor": _f(m.variance_floor)},
        lambda d: GaussianNbModel(d["priors"], d["means"], d["variances"], float(d["variance_floor"])),
    ),
    "bnb": (
        BernoulliNbModel,
        lambda m: {"priors": _f(m.priors), "probabilities": _f(m.probabilities)},
        lambda d: BernoulliNbModel(d["priors"], d["probabilities"]),
    ),
    "dt": (
        DecisionTreeModel,
        lambda m: {**_tree_fields(m.tree), "n_features": _i(m.n_features)},
        lambda d: DecisionTreeModel(_tree(d), int(d["n_features"])),
    ),
    "rf": (
        RandomForestModel,
        lambda m: {**_forest_fields(m.trees), "tree_seeds": _i(m.tree_seeds), "n_features": _i(m.n_features)},
        lambda d: RandomForestModel(_forest(d), d["tree_seeds"], int(d["n_features"])),
    ),
    "knn": (
        KnnModel,
        lambda m: {"train_X": _f(m.train_X), "train_y": _f(m.train_y), "k": _i(m.k), "metric": m.metric},
        lambda d: KnnModel(d["train_X"], d["train_y"], int(d["k"]), d["metric"]),
    ),
    "svm": (
        LinearSvmModel,
        lambda m: {"weights": _f(m.weights), "bias": _f(m.bias), "objective_history": _f(m.objective_history)},
        lambda d: LinearSvmModel(d["weights"], float(d["bias"]), d["objective_history"]),
    ),
    "xgb": (
        GradientBoostingModel,
        lambda m: {**_forest_fields(m.trees), "learning_rate": _f(m.learning_rate),
                   "initial_log_odds": _f(m.initial_log_odds), "n_features": _i(m.n_features)},
        lambda d: GradientBoostingModel(_forest(d), float(d["learning_rate"]), float(d["initial_log_odds"]),
                                        int(d["n_features"])),
    ),
    "ann": (
        MlpModel,
        lambda m: {name: _f(value) for name, value in m.params.items()},
        lambda d: MlpModel(d["w1"], d["b1"], d["w2"], d["b2"]),
    ),
    "scaler": (ScalerParams, _scaler_fields, _scaler),
    "pca": (
        PcaModel,
        lambda m: {"mean": _f(m.mean), "components": _f(m.components), "eigenvalues": _f(m.eigenvalues),
                   "sweeps": _i(m.sweeps)},
        lambda d: PcaModel(d["mean"], d["components"], d["eigenvalues"], int(d["sweeps"])),
    ),
}


def _tag_of(model: Persistable) -> str:
    for tag, (model_type, _, _) in CODECS.items():
        if type(model) is model_type:
            return tag
    raise TypeError(f"cannot persist {type(model).__name__}")


def _pack_text(text: str, width: str = "<I") -> bytes:
    encoded = text.encode("utf-8")
    return struct.pack(width, len(encoded)) + encoded


def _pack_field(name: str, value: FieldValue) -> bytes:
    head = _pack_text(name)
    if isinstance(value, str):
        return head + struct.pack("<B", KIND_STRING) + _pack_text(value, "<Q")
    array = np.asarray(value)
    if np.issubdtype(array.dtype, np.integer):
        kind, dtype = KIND_INT, "<i8"
    else:
        kind, dtype = KIND_FLOAT, "<f8"
    shape = struct.pack(f"<B{array.ndim}Q", array.ndim, *array.shape)
    return head + struct.pack("<B", kind) + shape + np.ascontiguousarray(array, dtype=dtype).tobytes()


def encode_model(model: Persistable) -> bytes:
    tag = _tag_of(model)
    fields = CODECS[tag][1](model)
    parts = [MAGIC, _pack_text(tag), struct.pack("<II", VERSION, len(fields))]
    parts.extend(_pack_field(name, value) for name, value in fields.items())
    return b"".join(parts)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if size < 0 or self.offset + size > len(self.data):
            raise CorruptRecord(f"record runs past end of file at byte {self.offset}")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def text(self, width: str = "<I") -> str:
        (size,) = self.unpack(width)
        try:
            return self.take(size).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptRecord(f"invalid UTF-8 near byte {self.offset}") from exc


def _read_field(cursor: _Cursor) -> Tuple[str, FieldValue]:
    name = cursor.text()
    (kind,) = cursor.unpack("<B")
    if kind == KIND_STRING:
        return name, cursor.text("<Q")
    if kind not in (KIND_FLOAT, KIND_INT):
        raise CorruptRecord(f"field {name!r} has unknown kind {kind}")
    (ndim,) = cursor.unpack("<B")
    shape = cursor.unpack(f"<{ndim}Q")
    count = int(np.prod(shape, dtype=np.uint64)) if ndim else 1
    dtype = "<f8" if kind == KIND_FLOAT else "<i8"
    payload = cursor.take(count * 8)
    array = np.frombuffer(payload, dtype=dtype).astype(np.float64 if kind == KIND_FLOAT else np.int64)
    return name, array.reshape(shape)


def decode_model(data: bytes) -> Persistable:
    if len(data) < len(MAGIC):
        if MAGIC.startswith(data):
            raise CorruptRecord("file ends inside the magic header")
        raise BadMagic("not a quantsig model file")
    if data[:len(MAGIC)] != MAGIC:
        raise BadMagic(f"bad magic {data[:len(MAGIC)]!r}")
    cursor = _Cursor(data)
    cursor.take(len(MAGIC))
    tag = cursor.text()
    version, count = cursor.unpack("<II")
    if version != VERSION:
        raise VersionUnsupported(f"model file version {version}, this build reads {VERSION}")
    if tag not in CODECS:
        raise CorruptRecord(f"unknown family tag {tag!r}")
    fields = dict(_read_field(cursor) for _ in range(count))
    if cursor.offset != len(data):
        raise CorruptRecord(f"{len(data) - cursor.offset} trailing bytes after the last record")
    try:
        return CODECS[tag][2](fields)
    except (KeyError, ValueError, TypeError, IndexError, ShapeMismatch) as exc:
        raise CorruptRecord(f"{tag} record set is incomplete or inconsistent: {exc}") from exc


def save_model(model: Persistable, path) -> Path:
    """Write atomically: a temporary sibling file is renamed over `path`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_name(path.name + ".part")
    partial.write_bytes(encode_model(model))
    os.replace(partial, path)
    logger.debug("Saved %s model to %s", _tag_of(model), path)
    return path


def load_model(path) -> Persistable:
    return decode_model(Path(path).read_bytes())

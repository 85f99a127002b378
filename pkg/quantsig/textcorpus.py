"""Labelled tweet corpus loading and bag-of-words featurization."""

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import sparse

from quantsig.errors import ConfigError, EmptyCorpus, EmptyVocabulary, FileAccessError, MalformedHeader, MissingColumn

logger = logging.getLogger(__name__)

BOW_MODES = ("binary", "tf")
URL_PATTERN = re.compile(r"(?:https?://|www\.)\S+")
MENTION_PATTERN = re.compile(r"@\w+")
WORD_PATTERN = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class TweetRecord:
    id: str
    text: str
    label: int


@dataclass(frozen=True)
class SkipReport:
    total_rows: int
    empty_text: int = 0
    bad_label: int = 0

    @property
    def skipped(self) -> int:
        return self.empty_text + self.bad_label


def _resolve_column(frame: pd.DataFrame, wanted: str) -> str:
    if wanted in frame.columns:
        return wanted
    lowered = {str(name).lower(): name for name in frame.columns}
    if wanted.lower() in lowered:
        return lowered[wanted.lower()]
    raise MissingColumn(wanted)


def _parse_label(raw: str) -> Optional[int]:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        return None
    if value in (-1.0, 1.0):
        return int(value)
    return None


def load_tweets_csv(path, text_col: str = "Text", label_col: str = "Sentiment",
                    id_col: str = "id") -> Tuple[List[TweetRecord], SkipReport]:
    """Load tweets labelled -1/+1; empty texts and other labels are skipped and counted."""
    try:
        frame = pd.read_csv(Path(path), dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise EmptyCorpus(f"{path} is empty") from None
    except UnicodeDecodeError as exc:
        raise MalformedHeader(f"{path} is not UTF-8 text: {exc.reason} at byte {exc.start}") from exc
    except pd.errors.ParserError as exc:
        raise MalformedHeader(f"{path}: {exc}") from exc
    except OSError as exc:
        raise FileAccessError(path, exc.strerror or exc) from exc
    text_name = _resolve_column(frame, text_col)
    label_name = _resolve_column(frame, label_col)
    try:
        id_name = _resolve_column(frame, id_col)
    except MissingColumn:
        id_name = None

    records: List[TweetRecord] = []
    empty_text = bad_label = 0
    for position, row in enumerate(frame.itertuples(index=False)):
        cells = dict(zip(frame.columns, row))
        text = cells[text_name] if isinstance(cells[text_name], str) else ""
        if not text.strip():
            empty_text += 1
            continue
        label = _parse_label(cells[label_name])
        if label is None:
            bad_label += 1
            continue
        tweet_id = str(cells[id_name]) if id_name else str(position)
        records.append(TweetRecord(id=tweet_id, text=text, label=label))

    report = SkipReport(total_rows=len(frame), empty_text=empty_text, bad_label=bad_label)
    if report.skipped:
        logger.warning("Skipped %d of %d tweets (%d empty text, %d label outside {-1, 1})",
                       report.skipped, report.total_rows, empty_text, bad_label)
    if not records:
        raise EmptyCorpus(f"no usable tweets in {path}")
    logger.info("Loaded %d tweets from %s", len(records), path)
    return records, report


def tokenize(text: str) -> List[str]:
    """Lowercase word tokens; URLs and @mentions removed, $ and # prefixes stripped."""
    text = URL_PATTERN.sub(" ", text.lower())
    text = MENTION_PATTERN.sub(" ", text)
    return [token for token in WORD_PATTERN.findall(text) if len(token) >= 2]


@dataclass(frozen=True)
class Vocabulary:
    token_index: Dict[str, int]
    document_frequency: Dict[str, int]
    min_df: int = 2
    max_size: int = 5000

    def __len__(self) -> int:
        return len(self.token_index)

    @property
    def tokens(self) -> List[str]:
        return sorted(self.token_index, key=self.token_index.__getitem__)


def _texts(corpus) -> List[str]:
    return [record.text if isinstance(record, TweetRecord) else str(record) for record in corpus]


def build_vocabulary(corpus: Sequence, min_df: int = 2, max_size: int = 5000) -> Vocabulary:
    """Keep tokens seen in at least `min_df` tweets, most frequent first, ties alphabetical."""
    if not corpus:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    if min_df < 1 or max_size < 1:
        raise ConfigError(f"min_df and max_size must be >= 1, got {min_df}, {max_size}")
    frequency: Counter = Counter()
    for text in _texts(corpus):
        frequency.update(set(tokenize(text)))
    survivors = sorted((token for token, df in frequency.items() if df >= min_df),
                       key=lambda token: (-frequency[token], token))[:max_size]
    if not survivors:
        raise EmptyVocabulary(f"no token reaches min_df={min_df}")
    logger.info("Vocabulary: %d tokens (min_df=%d, %d distinct seen)", len(survivors), min_df, len(frequency))
    return Vocabulary(
        token_index={token: i for i, token in enumerate(survivors)},
        document_frequency={token: frequency[token] for token in survivors},
        min_df=min_df,
        max_size=max_size,
    )


@dataclass(frozen=True)
class BowMatrix:
    matrix: sparse.csr_matrix
    mode: str
    labels: np.ndarray
    vocabulary: Vocabulary = field(compare=False, repr=False)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def vectorize(corpus: Sequence[TweetRecord], vocab: Vocabulary, mode: str = "tf") -> BowMatrix:
    """Encode each tweet as token counts (tf) or presence flags (binary); labels -1/+1 become 0/1."""
    if mode not in BOW_MODES:
        raise ConfigError(f"mode must be one of {BOW_MODES}, got {mode!r}")
    indptr = [0]
    indices: List[int] = []
    data: List[float] = []
    for record in corpus:
        counts = Counter(vocab.token_index[token] for token in tokenize(record.text)
                         if token in vocab.token_index)
        for column in sorted(counts):
            indices.append(column)
            data.append(1.0 if mode == "binary" else float(counts[column]))
        indptr.append(len(indices))
    matrix = sparse.csr_matrix(
        (np.array(data, dtype=float), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(corpus), len(vocab)),
    )
    labels = np.array([1 if record.label == 1 else 0 for record in corpus], dtype=int)
    return BowMatrix(matrix=matrix, mode=mode, labels=labels, vocabulary=vocab)

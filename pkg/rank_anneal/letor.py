"""LETOR / SVMLight ranking data.

One document per line::

    <rel> qid:<q> <fid>:<val> <fid>:<val> ... # <comment>

Documents are grouped by qid (non-contiguous lines included, file order
kept), feature ids are densified to ``n_features`` columns with 0.0 for
absent ids, and the comment, when present, becomes the document id.
"""

import hashlib
import logging
from collections import OrderedDict
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Tuple, Union

import numpy as np

from rank_anneal.errors import DataError, LetorFormatError

logger = logging.getLogger(__name__)

Split = Literal["train", "validation", "test"]
SPLIT_FILES: Dict[str, str] = {"train": "train.txt", "validation": "vali.txt", "test": "test.txt"}


@dataclass(frozen=True, eq=False)
class Document:
    features: np.ndarray
    relevance: int
    doc_id: str

    def __eq__(self, other) -> bool:
        if not isinstance(other, Document):
            return NotImplemented
        return (
            self.relevance == other.relevance
            and self.doc_id == other.doc_id
            and np.array_equal(self.features, other.features)
        )

    __hash__ = None


@dataclass(frozen=True)
class QueryGroup:
    query_id: str
    documents: Tuple[Document, ...]

    def __post_init__(self):
        if not self.documents:
            raise DataError(f"query {self.query_id} has no documents")

    @property
    def labels(self) -> np.ndarray:
        return np.array([doc.relevance for doc in self.documents], dtype=np.int64)


@dataclass(frozen=True)
class QueryMatrix:
    """Dense, query-contiguous view of a dataset.

    Rows of ``features`` are documents in group order; query ``q`` owns rows
    ``offsets[q]:offsets[q + 1]``.
    """

    features: np.ndarray
    labels: np.ndarray
    offsets: np.ndarray

    @property
    def n_queries(self) -> int:
        return len(self.offsets) - 1


@dataclass(frozen=True)
class RankingDataset:
    n_features: int
    groups: Tuple[QueryGroup, ...]
    split: Split = "train"

    def __post_init__(self):
        if self.n_features < 2:
            raise DataError(f"a ranking dataset needs at least 2 features, got {self.n_features}")
        seen = set()
        for group in self.groups:
            if group.query_id in seen:
                raise DataError(f"duplicate query id {group.query_id} in {self.split} split")
            seen.add(group.query_id)
            for doc in group.documents:
                if doc.features.shape != (self.n_features,):
                    raise DataError(
                        f"document {doc.doc_id} has {doc.features.shape[0]} features, "
                        f"dataset declares {self.n_features}"
                    )

    @property
    def n_queries(self) -> int:
        return len(self.groups)

    @property
    def n_documents(self) -> int:
        return sum(len(group.documents) for group in self.groups)

    @property
    def max_grade(self) -> int:
        return max((doc.relevance for group in self.groups for doc in group.documents), default=0)

    @cached_property
    def _matrix(self) -> QueryMatrix:
        sizes = [len(group.documents) for group in self.groups]
        offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
        features = np.zeros((int(offsets[-1]), self.n_features), dtype=np.float64)
        labels = np.zeros(int(offsets[-1]), dtype=np.int64)
        row = 0
        for group in self.groups:
            for doc in group.documents:
                features[row] = doc.features
                labels[row] = doc.relevance
                row += 1
        features.setflags(write=False)
        labels.setflags(write=False)
        offsets.setflags(write=False)
        return QueryMatrix(features=features, labels=labels, offsets=offsets)

    def matrix(self) -> QueryMatrix:
        """Dense features/labels/offsets view, built once per dataset."""
        return self._matrix


def parse_letor(
    text_stream: Union[str, Iterable[str]],
    declared_n: Optional[int] = None,
    split: Split = "train",
    max_grade: Optional[int] = None,
) -> RankingDataset:
    """Parse LETOR text into a query-grouped dataset.

    Args:
        text_stream: Whole text or an iterable of lines (LF or CRLF)
        declared_n: Feature count; inferred as the largest fid when omitted
        split: Split name recorded on the dataset
        max_grade: Highest admissible relevance grade, if declared

    Returns:
        RankingDataset with densified feature vectors

    Raises:
        LetorFormatError: malformed line, fid above declared_n, bad grade
        DataError: feature count cannot be inferred or is below 2
    """
    if declared_n is not None and declared_n < 1:
        raise DataError(f"declared feature count must be positive, got {declared_n}")
    if isinstance(text_stream, str):
        text_stream = text_stream.splitlines()

    grouped: "OrderedDict[str, List[Tuple[int, Dict[int, float], str]]]" = OrderedDict()
    max_fid = 0
    for line_no, raw in enumerate(text_stream, start=1):
        line = raw.rstrip("\r\n")
        body, _, comment = line.partition("#")
        tokens = body.split()
        if not tokens:
            continue
        rel, qid, values = _parse_tokens(tokens, line_no, declared_n, max_grade)
        if values:
            max_fid = max(max_fid, max(values))
        docs = grouped.setdefault(qid, [])
        doc_id = comment.strip() or f"{qid}-{len(docs) + 1}"
        docs.append((rel, values, doc_id))

    if declared_n is None:
        if not grouped:
            raise DataError("empty LETOR stream and no declared feature count")
        n_features = max_fid
    else:
        n_features = declared_n

    groups = []
    for qid, docs in grouped.items():
        documents = []
        for rel, values, doc_id in docs:
            features = np.zeros(n_features, dtype=np.float64)
            for fid, value in values.items():
                features[fid - 1] = value
            features.setflags(write=False)
            documents.append(Document(features=features, relevance=rel, doc_id=doc_id))
        groups.append(QueryGroup(query_id=qid, documents=tuple(documents)))

    dataset = RankingDataset(n_features=n_features, groups=tuple(groups), split=split)
    logger.debug(
        "parsed split=%s queries=%d documents=%d n_features=%d",
        split, dataset.n_queries, dataset.n_documents, n_features,
    )
    return dataset


def _parse_tokens(
    tokens: List[str], line_no: int, declared_n: Optional[int], max_grade: Optional[int]
) -> Tuple[int, str, Dict[int, float]]:
    if len(tokens) < 3:
        raise LetorFormatError("expected '<rel> qid:<q> <fid>:<val> ...'", line_no)

    try:
        rel = int(tokens[0])
    except ValueError:
        raise LetorFormatError(f"relevance must be an integer, got {tokens[0]!r}", line_no)
    if rel < 0:
        raise LetorFormatError(f"relevance must be non-negative, got {rel}", line_no)
    if max_grade is not None and rel > max_grade:
        raise LetorFormatError(f"relevance {rel} exceeds declared maximum grade {max_grade}", line_no)

    if not tokens[1].startswith("qid:") or len(tokens[1]) == 4:
        raise LetorFormatError(f"expected 'qid:<q>', got {tokens[1]!r}", line_no)
    qid = tokens[1][4:]

    values: Dict[int, float] = {}
    for token in tokens[2:]:
        fid_text, sep, value_text = token.partition(":")
        if not sep:
            raise LetorFormatError(f"expected '<fid>:<val>', got {token!r}", line_no)
        try:
            fid = int(fid_text)
            value = float(value_text)
        except ValueError:
            raise LetorFormatError(f"expected '<fid>:<val>', got {token!r}", line_no)
        if fid < 1:
            raise LetorFormatError(f"feature ids start at 1, got {fid}", line_no)
        if declared_n is not None and fid > declared_n:
            raise LetorFormatError(f"feature id {fid} exceeds declared count {declared_n}", line_no)
        if fid in values:
            raise LetorFormatError(f"feature id {fid} repeated", line_no)
        values[fid] = value
    return rel, qid, values


def format_letor(dataset: RankingDataset) -> str:
    """Serialize a dataset back to LETOR text (dense, one line per document)."""
    lines = []
    for group in dataset.groups:
        for doc in group.documents:
            pairs = " ".join(f"{fid}:{float(value)!r}" for fid, value in enumerate(doc.features, start=1))
            lines.append(f"{doc.relevance} qid:{group.query_id} {pairs} # {doc.doc_id}")
    return "".join(line + "\n" for line in lines)


def write_letor(dataset: RankingDataset, path: Union[str, Path]) -> None:
    Path(path).write_text(format_letor(dataset), encoding="utf-8")


def read_letor(
    path: Union[str, Path],
    declared_n: Optional[int] = None,
    split: Split = "train",
    max_grade: Optional[int] = None,
) -> RankingDataset:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as handle:
            return parse_letor(handle, declared_n=declared_n, split=split, max_grade=max_grade)
    except LetorFormatError as e:
        raise LetorFormatError(e.detail, e.line_no, source=path.name) from e
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e


def load_split_dir(
    path: Union[str, Path],
    declared_n: Optional[int] = None,
    max_grade: Optional[int] = None,
) -> Tuple[RankingDataset, RankingDataset, RankingDataset]:
    """Load a LETOR fold directory holding train.txt, vali.txt and test.txt.

    Raises:
        DataError: a file is missing or the three files disagree on n_features
    """
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"fold directory not found: {path}")
    for file_name in SPLIT_FILES.values():
        if not (path / file_name).is_file():
            raise DataError(f"fold directory {path} is missing {file_name}")

    splits = tuple(
        read_letor(path / file_name, declared_n=declared_n, split=split, max_grade=max_grade)
        for split, file_name in SPLIT_FILES.items()
    )
    dims = {split.split: split.n_features for split in splits}
    if len(set(dims.values())) != 1:
        raise DataError(f"feature dimensionality differs across files: {dims}")
    logger.info(
        "loaded fold=%s n_features=%d queries=%s",
        path, splits[0].n_features, [split.n_queries for split in splits],
    )
    return splits


def digest_split_dir(path: Union[str, Path]) -> str:
    """sha256 over the raw bytes of the three split files, in fixed order."""
    digest = hashlib.sha256()
    for file_name in SPLIT_FILES.values():
        digest.update(file_name.encode("utf-8"))
        digest.update((Path(path) / file_name).read_bytes())
    return digest.hexdigest()


def digest_datasets(*datasets: RankingDataset) -> str:
    """sha256 over the LETOR serialization of in-memory datasets."""
    digest = hashlib.sha256()
    for dataset in datasets:
        digest.update(dataset.split.encode("utf-8"))
        digest.update(format_letor(dataset).encode("utf-8"))
    return digest.hexdigest()

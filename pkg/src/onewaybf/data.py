"""Balanced one-way layouts, sums of squares, and CSV ingestion."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, MalformedRow, NonFiniteValue, TooFewGroups, UnbalancedData


@dataclass(frozen=True)
class BalancedDesign:
    """``p`` units with ``r`` observations each; ``n = p * r``."""

    p: int
    r: int

    def __post_init__(self):
        for name in ("p", "r"):
            v = getattr(self, name)
            if int(v) != v or v < 2:
                raise DomainError(f"{name} must be an integer >= 2, got {v!r}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "r", int(self.r))

    @property
    def n(self) -> int:
        return self.p * self.r


@dataclass(frozen=True)
class DataMatrix:
    design: BalancedDesign
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.design.p, self.design.r):
            raise DomainError(
                f"values have shape {vals.shape}, design needs ({self.design.p}, {self.design.r})"
            )
        if not np.isfinite(vals).all():
            raise DomainError("data values must all be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_array(cls, values) -> "DataMatrix":
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 2:
            raise DomainError(f"expected a p x r array, got {arr.ndim} dimensions")
        return cls(BalancedDesign(*arr.shape), arr)


@dataclass(frozen=True)
class SufficientStats:
    w_h: float
    w_e: float
    w_t: float
    grand_mean: float
    group_means: np.ndarray = field(repr=False)
    design: BalancedDesign = None

    @property
    def ratio(self) -> float:
        """W_E / W_T, the only function of the data the Bayes factor uses."""
        return self.w_e / self.w_t


def sufficient_stats(data: DataMatrix) -> SufficientStats:
    """Between, within and total sums of squares by the two-pass method."""
    y = data.values
    r = data.design.r
    group_means = y.mean(axis=1)
    grand_mean = float(group_means.mean())
    w_h = float(r * np.sum((group_means - grand_mean) ** 2))
    w_e = float(np.sum((y - group_means[:, None]) ** 2))
    # W_T is reconciled to W_H + W_E rather than summed separately.
    return SufficientStats(
        w_h=w_h,
        w_e=w_e,
        w_t=w_h + w_e,
        grand_mean=grand_mean,
        group_means=group_means,
        design=data.design,
    )


def ratio_batch(y: np.ndarray) -> np.ndarray:
    """W_E / W_T for a stack of datasets shaped (k, p, r).

    Entries with W_T = 0 come back as NaN.
    """
    r = y.shape[2]
    gm = y.mean(axis=2)
    grand = gm.mean(axis=1)
    w_h = r * np.sum((gm - grand[:, None]) ** 2, axis=1)
    w_e = np.sum((y - gm[:, :, None]) ** 2, axis=(1, 2))
    w_t = w_h + w_e
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(w_t > 0, w_e / w_t, np.nan)


def ingest_csv(stream) -> DataMatrix:
    """Parse ``group,value`` CSV text (a string or text stream) into a DataMatrix.

    Groups become units in order of first appearance.  The header is matched
    case-insensitively and may repeat; extra columns, blank labels and non-finite values are
    rejected with the offending line number.
    """
    text = stream if isinstance(stream, str) else stream.read()
    if text.startswith("﻿"):
        text = text[1:]
    reader = csv.reader(io.StringIO(text, newline=""))
    groups: dict[str, list[float]] = {}
    header_seen = False
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if not header_seen:
            if [c.strip().lower() for c in row] != ["group", "value"]:
                raise MalformedRow(line, f"expected header 'group,value', got {','.join(row)!r}")
            header_seen = True
            continue
        if [c.strip().lower() for c in row] == ["group", "value"]:
            continue  # repeated header, e.g. from concatenated files
        if len(row) != 2:
            raise MalformedRow(line, f"expected 2 columns, got {len(row)}")
        label, raw = row[0].strip(), row[1].strip()
        if not label:
            raise MalformedRow(line, "empty group label")
        try:
            value = float(raw)
        except ValueError:
            raise MalformedRow(line, f"value {raw!r} is not a number") from None
        if not math.isfinite(value):
            raise NonFiniteValue(line, f"value {raw!r} is not finite")
        groups.setdefault(label, []).append(value)

    if not header_seen:
        raise MalformedRow(1, "empty input; expected header 'group,value'")
    if len(groups) < 2:
        raise TooFewGroups(f"need at least 2 groups, found {len(groups)}")
    counts = {g: len(v) for g, v in groups.items()}
    if len(set(counts.values())) != 1:
        raise UnbalancedData(counts)
    r = next(iter(counts.values()))
    if r < 2:
        raise TooFewGroups(f"need at least 2 observations per group, found {r}")
    return DataMatrix(BalancedDesign(len(groups), r), np.array(list(groups.values())))


def to_csv(data: DataMatrix, labels=None) -> str:
    """Serialize to the ``group,value`` format; values use ``repr`` so they round-trip."""
    if labels is None:
        labels = [f"g{i + 1}" for i in range(data.design.p)]
    out = ["group,value"]
    for label, row in zip(labels, data.values):
        out.extend(f"{label},{float(v)!r}" for v in row)
    return "\n".join(out) + "\n"

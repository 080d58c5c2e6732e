"""
Data Loader Module

This module handles:
- Loading a level dataset from CSV (date column, then one column per variable)
- Applying per-column transforms (none | log)
- Writing datasets and simulated state paths back to CSV
- The real-time vintage store: one CSV per vintage named YYYYQq.csv, plus an
  optional final.csv holding the latest release

Files are parsed strictly: a missing column, a non-numeric cell or a date out
of order raises ParseError with the 1-based line number (the header is line 1).
"""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from regimecast.errors import DimensionError, ParseError
from regimecast.model import Dataset

logger = logging.getLogger(__name__)

QUARTER_PATTERN = re.compile(r"^(\d{4})-?Q([1-4])$")
VINTAGE_PATTERN = re.compile(r"^(\d{4})Q([1-4])$")
FLOAT_FORMAT = "%.17g"
TRANSFORMS = ("none", "log")


# ========================================
# DATES
# ========================================

def quarter_index(date: str) -> Optional[int]:
    """Running quarter number of a "YYYY-Qq" (or "YYYYQq") label, else None."""
    match = QUARTER_PATTERN.match(str(date).strip())
    if not match:
        return None
    return int(match.group(1)) * 4 + int(match.group(2)) - 1


def quarter_label(index: int) -> str:
    return f"{index // 4}-Q{index % 4 + 1}"


def quarterly_dates(n: int, start: str = "1990-Q1") -> Tuple[str, ...]:
    """n consecutive quarterly labels starting at `start`."""
    first = quarter_index(start)
    if first is None:
        raise ValueError(f"not a quarterly date: {start!r}")
    return tuple(quarter_label(first + i) for i in range(n))


def _normalize_dates(raw: Sequence[str]) -> Tuple[str, ...]:
    """Validate ordering; quarterly labels are normalized to "YYYY-Qq"."""
    quarters = [quarter_index(d) for d in raw]
    if all(q is not None for q in quarters):
        keys = quarters
        labels = tuple(quarter_label(q) for q in quarters)
    else:
        parsed = pd.to_datetime(pd.Series(list(raw)), errors="coerce")
        for i, value in enumerate(parsed):
            if pd.isna(value):
                raise ParseError(f"unrecognized date {raw[i]!r}", row=i + 2)
        keys = list(parsed)
        labels = tuple(str(d).strip() for d in raw)
    for i in range(1, len(keys)):
        if not keys[i] > keys[i - 1]:
            raise ParseError(f"dates must be strictly increasing: {raw[i - 1]!r} then {raw[i]!r}", row=i + 2)
    return labels


# ========================================
# DATASETS
# ========================================

def load_dataset(
    path: Union[str, Path],
    transforms: Optional[Mapping[str, str]] = None,
    variables: Optional[Sequence[str]] = None,
) -> Dataset:
    """
    Load a level dataset.

    Args:
        path: CSV with header "date,<var1>,...,<varm>"
        transforms: per-variable "none" or "log"
        variables: expected variables in model order; columns are reordered
                   to match and extra columns are ignored

    Raises:
        ParseError: empty file, missing column, non-numeric or non-finite
                    cell, unordered dates, log of a non-positive value
    """
    path = Path(path)
    transforms = dict(transforms or {})
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"{path} is empty", row=1) from e
    if frame.shape[1] < 2 or frame.empty:
        raise ParseError(f"{path} needs a date column and at least one variable with data", row=1)
    frame.columns = [str(c).strip() for c in frame.columns]
    date_col, columns = frame.columns[0], list(frame.columns[1:])

    if variables is not None:
        missing = [v for v in variables if v not in columns]
        if missing:
            raise ParseError(f"{path} is missing column(s) {missing}", row=1)
        if list(variables) != columns[:len(variables)]:
            logger.info("Reordering columns of %s to %s", path.name, list(variables))
        columns = list(variables)
    unknown = [v for v in transforms if v not in columns]
    if unknown:
        raise ParseError(f"transforms name unknown column(s) {unknown}", row=1)

    values = np.empty((len(frame), len(columns)))
    for j, name in enumerate(columns):
        cells = frame[name].str.strip()
        numeric = pd.to_numeric(cells, errors="coerce")
        bad = numeric.isna() | ~np.isfinite(numeric.to_numpy(dtype=float, na_value=np.nan))
        if bad.any():
            i = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(f"non-numeric value {cells.iloc[i]!r} in column {name!r}", row=i + 2)
        # exact decimal-to-double conversion
        column = cells.astype(float).to_numpy()
        kind = transforms.get(name, "none")
        if kind not in TRANSFORMS:
            raise ParseError(f"unknown transform {kind!r} for column {name!r}")
        if kind == "log":
            nonpositive = np.flatnonzero(column <= 0)
            if nonpositive.size:
                raise ParseError(f"log transform of non-positive value in column {name!r}", row=int(nonpositive[0]) + 2)
            column = np.log(column)
        values[:, j] = column

    dates = _normalize_dates(list(frame[date_col].str.strip()))
    logger.debug("Loaded %s: %d periods x %d variables", path.name, *values.shape)
    return Dataset(values, tuple(columns), dates)


def write_dataset(data: Dataset, path: Union[str, Path]):
    """Write levels with full double precision; load_dataset reads them back exactly."""
    frame = pd.DataFrame(data.levels, columns=list(data.names))
    frame.insert(0, "date", list(data.dates))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_states(path: Union[str, Path], dates: Sequence[str], states: np.ndarray):
    """Columns: date, s_true."""
    if len(dates) != len(states):
        raise DimensionError(f"{len(dates)} dates for {len(states)} states")
    frame = pd.DataFrame({"date": list(dates), "s_true": np.asarray(states, dtype=np.int64)})
    frame.to_csv(path, index=False, lineterminator="\n")


# ========================================
# VINTAGES
# ========================================

@dataclass
class VintageStore:
    """
    Real-time datasets keyed by vintage label ("YYYYQq").

    Attributes:
        vintages: vintage label -> data available in that vintage
        final: latest release used as a fallback for realized values
    """

    vintages: Dict[str, Dataset] = field(default_factory=dict)
    final: Optional[Dataset] = None

    def __post_init__(self):
        for key in self.vintages:
            if not VINTAGE_PATTERN.match(key):
                raise ParseError(f"vintage label {key!r} is not of the form YYYYQq")
        self.vintages = dict(sorted(self.vintages.items(), key=lambda kv: _vintage_order(kv[0])))

    def __len__(self) -> int:
        return len(self.vintages)

    def labels(self) -> Tuple[str, ...]:
        return tuple(self.vintages)

    @classmethod
    def load(
        cls,
        directory: Union[str, Path],
        transforms: Optional[Mapping[str, str]] = None,
        variables: Optional[Sequence[str]] = None,
    ) -> "VintageStore":
        """Read every YYYYQq.csv (and final.csv if present) in `directory`."""
        directory = Path(directory)
        if not directory.is_dir():
            raise ParseError(f"vintage directory not found: {directory}")
        vintages = {}
        final = None
        for path in sorted(directory.glob("*.csv")):
            if path.stem == "final":
                final = load_dataset(path, transforms, variables)
            elif VINTAGE_PATTERN.match(path.stem):
                vintages[path.stem] = load_dataset(path, transforms, variables)
            else:
                logger.warning("Ignoring %s: not a vintage file name", path.name)
        if not vintages:
            raise ParseError(f"no vintage files (YYYYQq.csv) in {directory}")
        store = cls(vintages, final)
        store.log_gaps()
        logger.info("Loaded %d vintages from %s%s", len(vintages), directory, " (+ final)" if final else "")
        return store

    def save(self, directory: Union[str, Path]):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for key, data in self.vintages.items():
            write_dataset(data, directory / f"{key}.csv")
        if self.final is not None:
            write_dataset(self.final, directory / "final.csv")

    @classmethod
    def from_dataset(
        cls,
        data: Dataset,
        first_origin: int,
        revision_sd: float = 0.0,
        rng: Optional[np.random.Generator] = None,
    ) -> "VintageStore":
        """
        Expanding-window vintages cut from one dataset.

        The vintage with n observations (n = first_origin..T) is labeled by
        the quarter after its last observation. With revision_sd > 0 its last
        observation carries N(0, revision_sd^2) noise, as a first release
        would. The full dataset becomes the final release.
        """
        if not 1 <= first_origin <= data.T:
            raise DimensionError(f"first_origin must be in 1..{data.T}, got {first_origin}")
        if revision_sd > 0 and rng is None:
            raise ValueError("revision noise needs an rng")
        vintages = {}
        for n in range(first_origin, data.T + 1):
            levels = np.array(data.levels[:n])
            if revision_sd > 0:
                levels[-1] += revision_sd * rng.standard_normal(data.m)
            last = quarter_index(data.dates[n - 1])
            if last is None:
                raise ParseError("synthetic vintages need quarterly dates")
            label = quarter_label(last + 1).replace("-", "")
            vintages[label] = Dataset(levels, data.names, data.dates[:n])
        return cls(vintages, data)

    def log_gaps(self):
        keys = [_vintage_order(k) for k in self.vintages]
        for prev, nxt in zip(keys, keys[1:]):
            if nxt - prev > 1:
                logger.warning("Vintage gap: no vintage between %s and %s", quarter_label(prev), quarter_label(nxt))

    def realized(self, label: str, evaluation: str = "next_vintage") -> Optional[np.ndarray]:
        """
        Levels of the period after the last observation of vintage `label`.

        "next_vintage" takes the first later vintage that contains that
        period, falling back to the final release; "final" uses the final
        release (or the last vintage when there is none). None when no
        source contains the period.
        """
        data = self.vintages[label]
        last_date = data.dates[-1]
        if evaluation == "final":
            sources = [self.final if self.final is not None else list(self.vintages.values())[-1]]
        else:
            keys = list(self.vintages)
            later = [self.vintages[k] for k in keys[keys.index(label) + 1:]]
            sources = later + ([self.final] if self.final is not None else [])
        for source in sources:
            if last_date in source.dates:
                i = source.dates.index(last_date)
                if i + 1 < source.T:
                    return np.array(source.levels[i + 1])
        return None


def _vintage_order(label: str) -> int:
    match = VINTAGE_PATTERN.match(label)
    return int(match.group(1)) * 4 + int(match.group(2)) - 1

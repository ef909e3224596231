"""Price ingestion, log-return construction and report writing."""
import csv
import datetime as dt
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .em import TimeSeriesDataset
from .errors import DataError


@dataclass(frozen=True)
class PriceSeries:
    name: str
    dates: tuple
    prices: np.ndarray

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if len(self.dates) != prices.size:
            raise DataError(f"{self.name}: {len(self.dates)} dates but {prices.size} prices")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError(f"{self.name}: dates must be strictly increasing without duplicates")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise DataError(f"{self.name}: prices must be finite and positive")
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "prices", prices)


@dataclass(frozen=True)
class ReturnSeries:
    name: str
    dates: tuple
    values: np.ndarray


def to_returns(series):
    """Percentage log returns 100 log(P_t / P_{t-1}), dated at t."""
    if series.prices.size < 2:
        raise DataError(f"{series.name}: need at least two prices")
    r = 100.0 * np.diff(np.log(series.prices))
    return ReturnSeries(series.name, series.dates[1:], r)


def read_wide_csv(path):
    """Read ``date,<col1>,<col2>,...`` with ISO dates; returns (dates, {name: column}).

    Empty cells are allowed and become NaN (the series simply lacks that date).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise DataError(f"{path}: header must be 'date,<column>,...', got {header[:3]}")
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names")
    dates, cols = [], {h: [] for h in header[1:]}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            dates.append(dt.date.fromisoformat(row[0].strip()))
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad ISO date {row[0]!r}") from None
        for h, cell in zip(header[1:], row[1:]):
            cell = cell.strip()
            try:
                cols[h].append(float(cell) if cell else math.nan)
            except ValueError:
                raise DataError(f"{path}:{lineno}: column {h!r} is not numeric: {cell!r}") from None
    order = np.argsort(np.array(dates, dtype="datetime64[D]"), kind="stable")
    dates = [dates[i] for i in order]
    return dates, {h: np.asarray(v)[order] for h, v in cols.items()}


def price_series_from_columns(dates, columns, names):
    out = []
    for name in names:
        if name not in columns:
            raise DataError(f"column {name!r} not in data (have {sorted(columns)})")
        v = columns[name]
        keep = ~np.isnan(v)
        out.append(PriceSeries(name, tuple(d for d, k in zip(dates, keep) if k), v[keep]))
    return out


def align_and_assemble(response, covariates, kind="prices"):
    """Per-series returns, intersected on dates, with an intercept column prepended.

    With ``kind="returns"`` the inputs are ReturnSeries used as they are.
    Returns the dataset and the number of dates each series lost in the intersection.
    """
    if not covariates:
        raise DataError("need at least one covariate series")
    series = [response, *covariates]
    if kind == "prices":
        rets = [to_returns(s) for s in series]
    elif kind == "returns":
        rets = series
    else:
        raise ValueError(f"unknown input kind {kind!r}")
    common = set(rets[0].dates)
    for r in rets[1:]:
        common &= set(r.dates)
    if not common:
        raise DataError("series share no dates")
    dates = sorted(common)
    cols, dropped = [], {}
    for r in rets:
        index = {d: i for i, d in enumerate(r.dates)}
        cols.append(r.values[[index[d] for d in dates]])
        dropped[r.name] = len(r.dates) - len(dates)
    names = tuple(r.name for r in rets[1:])
    data = TimeSeriesDataset.from_covariates(cols[0], np.column_stack(cols[1:]),
                                             dates=tuple(d.isoformat() for d in dates), names=names)
    return data, dropped


def load_dataset(path, response, covariates, kind="prices"):
    dates, columns = read_wide_csv(path)
    names = [response, *covariates]
    if kind == "prices":
        series = price_series_from_columns(dates, columns, names)
    else:
        series = []
        for name in names:
            if name not in columns:
                raise DataError(f"column {name!r} not in data (have {sorted(columns)})")
            v = columns[name]
            keep = ~np.isnan(v)
            series.append(ReturnSeries(name, tuple(d for d, k in zip(dates, keep) if k), v[keep]))
    return align_and_assemble(series[0], series[1:], kind=kind)


def descriptive_stats(x):
    """Min, mean, max, std, moment skewness and (non-excess) kurtosis.

    Moments are population moments; skewness and kurtosis are None for a
    constant series.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 4:
        raise DataError("descriptive statistics need at least four observations")
    m = x.mean()
    c = x - m
    m2 = np.mean(c ** 2)
    row = {"n": int(x.size), "min": float(x.min()), "mean": float(m), "max": float(x.max()),
           "std": float(np.sqrt(m2)), "skewness": None, "kurtosis": None}
    if m2 > 0:
        row["skewness"] = float(np.mean(c ** 3) / m2 ** 1.5)
        row["kurtosis"] = float(np.mean(c ** 4) / m2 ** 2)
    return row


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def dumps_csv(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else repr(float(v))
    return str(v)


def write_outputs(out_dir, files):
    """Write ``{filename: text}`` into ``out_dir`` all-or-nothing.

    Everything is staged in a temporary directory first and then renamed into
    place, so a failure never leaves a partial set of outputs.
    """
    os.makedirs(out_dir, exist_ok=True)
    stage = tempfile.mkdtemp(prefix=".staging-", dir=out_dir)
    try:
        for name, text in files.items():
            with open(os.path.join(stage, name), "w", newline="") as fh:
                fh.write(text)
        for name in files:
            os.replace(os.path.join(stage, name), os.path.join(out_dir, name))
    finally:
        for leftover in os.listdir(stage):
            os.remove(os.path.join(stage, leftover))
        os.rmdir(stage)
    return [os.path.join(out_dir, n) for n in files]

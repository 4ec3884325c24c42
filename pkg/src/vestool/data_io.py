"""
Plant-level CSV ingestion and the synthetic data generator.

The generator stands in for the non-public survey microdata and writes the
same schema that :func:`ingest` reads, so both feed the pipeline alike.
Randomness comes from numpy's PCG64 bit generator seeded by ``SynthConfig.seed``.
"""

from collections import Counter
import csv
from dataclasses import dataclass, field
import io
import math
from pathlib import Path
import re
import warnings

import numpy as np

from .errors import EmptyInputError, SchemaError
from .production import VesParams, eval_ves, factor_prices, NonCompetitiveWageWarning

COLUMNS = ("industry_code", "state", "year", "value_added", "workers", "capital", "wages")
MANDATORY = COLUMNS[:-1]
LABOR_BAND = (10.0, 1000.0)

_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_INTEGER = re.compile(r"[+-]?\d+")


@dataclass(frozen=True)
class PlantRecord:
    industry_code: str
    state: str
    year: int
    value_added: float
    workers: float
    capital: float
    wages: float = None
    deflator: float = None

    @property
    def X(self):
        return self.capital / self.workers

    @property
    def Y(self):
        return self.value_added / self.workers

    @property
    def W(self):
        return None if self.wages is None else self.wages / self.workers


@dataclass
class SchemaConfig:
    """Column mapping (logical name -> CSV header) plus row filters."""

    columns: dict = field(default_factory=dict)
    year_range: tuple = None
    deflator_column: str = None
    apply_deflator: bool = False

    def header_for(self, name):
        return self.columns.get(name, name)


def _parse_float(text):
    text = text.strip()
    if not _NUMBER.fullmatch(text):
        raise ValueError(text)
    return float(text)


def ingest(source, schema=None):
    """
    Read plant records from a CSV path or text stream.

    Returns ``(records, exclusions)`` where ``exclusions`` counts dropped rows
    per rule.  Numbers must use a dot decimal separator.
    """
    schema = schema or SchemaConfig()
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return _ingest_stream(fh, schema)
    return _ingest_stream(source, schema)


def _ingest_stream(stream, schema):
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInputError("input is empty (no header row)") from None
    index = {name.strip(): i for i, name in enumerate(header)}
    missing = [n for n in MANDATORY if schema.header_for(n) not in index]
    if missing:
        raise SchemaError("missing mandatory columns: " + ", ".join(schema.header_for(n) for n in missing))
    col = {n: index.get(schema.header_for(n)) for n in COLUMNS}
    defl_col = index.get(schema.deflator_column) if schema.deflator_column else None

    records, excluded = [], Counter()
    for raw in reader:
        if not raw or all(not cell.strip() for cell in raw):
            continue
        rec, rule = _parse_row(raw, col, defl_col, schema)
        if rule:
            excluded[rule] += 1
        else:
            records.append(rec)
    return records, excluded


def _cell(raw, i):
    return raw[i].strip() if i is not None and i < len(raw) else ""


def _parse_row(raw, col, defl_col, schema):
    values = {n: _cell(raw, col[n]) for n in COLUMNS}
    for n in MANDATORY:
        if not values[n]:
            return None, "missing-field"
    if not _INTEGER.fullmatch(values["year"]):
        return None, "unparseable-year"
    year = int(values["year"])
    try:
        va = _parse_float(values["value_added"])
        workers = _parse_float(values["workers"])
        capital = _parse_float(values["capital"])
        wages = _parse_float(values["wages"]) if values["wages"] else None
        deflator = _parse_float(_cell(raw, defl_col)) if _cell(raw, defl_col) else None
    except ValueError:
        return None, "unparseable-numeric"
    if not all(math.isfinite(v) for v in (va, workers, capital)):
        return None, "unparseable-numeric"
    if va <= 0:
        return None, "nonpositive-value-added"
    if workers <= 0:
        return None, "nonpositive-workers"
    if capital <= 0:
        return None, "nonpositive-capital"
    if wages is not None and not wages >= 0:
        return None, "negative-wages"
    if schema.year_range and not schema.year_range[0] <= year <= schema.year_range[1]:
        return None, "year-out-of-range"
    if schema.apply_deflator:
        if deflator is None or not deflator > 0:
            return None, "invalid-deflator"
        va, capital = va / deflator, capital / deflator
        wages = None if wages is None else wages / deflator
    rec = PlantRecord(values["industry_code"], values["state"], year, va, workers, capital, wages, deflator)
    return rec, None


def _fmt(x):
    return "" if x is None else repr(float(x))


def write_records(records, target):
    """Write records in the ingest schema; floats use their shortest exact repr."""
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as fh:
            write_records(records, fh)
        return
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in records:
        writer.writerow([r.industry_code, r.state, r.year, _fmt(r.value_added), _fmt(r.workers),
                         _fmt(r.capital), _fmt(r.wages)])


def records_to_csv(records):
    buf = io.StringIO()
    write_records(records, buf)
    return buf.getvalue()


@dataclass(frozen=True)
class SynthConfig:
    params: VesParams
    n: int
    x_low: float = 0.1
    x_high: float = 10.0
    noise_sd: float = 0.0
    seed: int = 0
    competitive_wages: bool = True
    industry_code: str = "274"
    state: str = "WB"
    year: int = 2016

    def __post_init__(self):
        if not self.x_low > 0:
            raise ValueError("x_low must be positive")
        if not self.x_high > self.x_low:
            raise ValueError("x_high must exceed x_low")
        if not self.noise_sd >= 0:
            raise ValueError("noise_sd must be non-negative")
        if self.n < 1:
            raise ValueError("n must be at least 1")


def generate(cfg: SynthConfig):
    """
    Draw plant records from the VES technology.

    Workers are log-uniform on [10, 1000] (rounded to whole persons), K/L is
    log-uniform on [x_low, x_high], and V carries a multiplicative
    log-normal disturbance.  Competitive wages are noiseless and record the
    magnitude of the marginal product of labour times L.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    lo, hi = np.log(LABOR_BAND)
    workers = np.maximum(1.0, np.rint(np.exp(rng.uniform(lo, hi, cfg.n))))
    x = np.exp(rng.uniform(math.log(cfg.x_low), math.log(cfg.x_high), cfg.n))
    eps = rng.normal(0.0, cfg.noise_sd, cfg.n) if cfg.noise_sd > 0 else np.zeros(cfg.n)
    capital = x * workers
    value_added = np.asarray(eval_ves(cfg.params, capital, workers)) * np.exp(eps)
    wages = [None] * cfg.n
    if cfg.competitive_wages:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NonCompetitiveWageWarning)
            w, _ = factor_prices(cfg.params, capital / workers)
        if caught:
            warnings.warn(
                "marginal product of labour is negative for these parameters; "
                "wages record its magnitude",
                NonCompetitiveWageWarning,
                stacklevel=2,
            )
        wages = (np.abs(np.asarray(w)) * workers).tolist()
    return [
        PlantRecord(cfg.industry_code, cfg.state, cfg.year, float(v), float(l), float(k),
                    None if wg is None else float(wg))
        for v, l, k, wg in zip(value_added, workers, capital, wages)
    ]

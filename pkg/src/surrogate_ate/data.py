"""Sample containers, validation, and CSV ingestion.

Two-sample analyses combine an experimental sample, which records a binary
treatment and short-term surrogate outcomes, with an observational sample,
which records the same surrogates together with the long-term outcome.  A
single-sample design observes treatment, surrogates, and outcome on every
unit.  All containers are immutable after construction and safe to share
across threads.

CSV layout (header required, UTF-8, ``.`` decimal point):

* experimental:  ``w,s1..sM[,x1..xK]``
* observational: ``y,s1..sM[,x1..xK]``
* single-sample: ``w,y,s1..sM[,x1..xK]``

Column names are resolved through a :class:`Schema`; by default surrogate
and covariate columns are auto-detected from the ``s<digit>`` / ``x<digit>``
naming convention.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import PoolingError, SchemaError, ValidationError

_SURROGATE_RE = re.compile(r"^s(\d+)$")
_COVARIATE_RE = re.compile(r"^x(\d+)$")


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a 2-d array, got ndim={arr.ndim}")
    return arr


def _check_finite(arr: np.ndarray, name: str) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = np.argwhere(bad)[0]
        where = f"row {int(idx[0]) + 1}" if arr.ndim else ""
        raise ValidationError(f"non-finite value in {name} at {where}")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ExperimentalSample:
    """Treatment indicators and surrogates (no outcome observed).

    Attributes
    ----------
    w : ndarray, shape (n,)
        Binary treatment indicators; both arms must be non-empty.
    s : ndarray, shape (n, M)
        Surrogate outcomes.
    x : ndarray, shape (n, K)
        Pre-treatment covariates; K may be zero.
    """

    w: np.ndarray
    s: np.ndarray
    x: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        s = _as_matrix(self.s, "s")
        x = _as_matrix(self.x, "x") if self.x is not None else np.empty((len(w), 0))
        if not (len(w) == s.shape[0] == x.shape[0]):
            raise ValidationError(
                f"row counts differ: w={len(w)}, s={s.shape[0]}, x={x.shape[0]}"
            )
        _check_finite(w, "w")
        _check_finite(s, "s")
        _check_finite(x, "x")
        if not np.isin(w, (0.0, 1.0)).all():
            bad = int(np.flatnonzero(~np.isin(w, (0.0, 1.0)))[0]) + 1
            raise ValidationError(f"treatment must be 0 or 1; row {bad} has w={w[bad - 1]}")
        if w.sum() == 0 or w.sum() == len(w):
            raise ValidationError("experimental sample needs at least one treated and one control unit")
        object.__setattr__(self, "w", _freeze(w))
        object.__setattr__(self, "s", _freeze(s))
        object.__setattr__(self, "x", _freeze(x))

    @property
    def n(self) -> int:
        return len(self.w)

    @property
    def n_surrogates(self) -> int:
        return self.s.shape[1]

    @property
    def n_covariates(self) -> int:
        return self.x.shape[1]

    @property
    def n_treated(self) -> int:
        return int(self.w.sum())

    @property
    def n_control(self) -> int:
        return self.n - self.n_treated


@dataclass(frozen=True)
class ObservationalSample:
    """Outcomes and surrogates (no treatment observed)."""

    y: np.ndarray
    s: np.ndarray
    x: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        s = _as_matrix(self.s, "s")
        x = _as_matrix(self.x, "x") if self.x is not None else np.empty((len(y), 0))
        if len(y) == 0:
            raise ValidationError("observational sample must contain at least one row")
        if not (len(y) == s.shape[0] == x.shape[0]):
            raise ValidationError(
                f"row counts differ: y={len(y)}, s={s.shape[0]}, x={x.shape[0]}"
            )
        _check_finite(y, "y")
        _check_finite(s, "s")
        _check_finite(x, "x")
        object.__setattr__(self, "y", _freeze(y))
        object.__setattr__(self, "s", _freeze(s))
        object.__setattr__(self, "x", _freeze(x))

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def n_surrogates(self) -> int:
        return self.s.shape[1]

    @property
    def n_covariates(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class SingleSample:
    """Treatment, outcome, surrogates, and covariates observed jointly."""

    w: np.ndarray
    y: np.ndarray
    s: np.ndarray
    x: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        s = _as_matrix(self.s, "s")
        x = _as_matrix(self.x, "x") if self.x is not None else np.empty((len(w), 0))
        if not (len(w) == len(y) == s.shape[0] == x.shape[0]):
            raise ValidationError("row counts differ across w, y, s, x")
        for arr, name in ((w, "w"), (y, "y"), (s, "s"), (x, "x")):
            _check_finite(arr, name)
        if not np.isin(w, (0.0, 1.0)).all():
            bad = int(np.flatnonzero(~np.isin(w, (0.0, 1.0)))[0]) + 1
            raise ValidationError(f"treatment must be 0 or 1; row {bad} has w={w[bad - 1]}")
        if w.sum() == 0 or w.sum() == len(w):
            raise ValidationError("single sample needs at least one treated and one control unit")
        object.__setattr__(self, "w", _freeze(w))
        object.__setattr__(self, "y", _freeze(y))
        object.__setattr__(self, "s", _freeze(s))
        object.__setattr__(self, "x", _freeze(x))

    @property
    def n(self) -> int:
        return len(self.w)

    @property
    def n_surrogates(self) -> int:
        return self.s.shape[1]

    @property
    def n_covariates(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class PooledDataset:
    """The two samples viewed as one dataset with a sample indicator.

    ``q`` is always the realized experimental fraction N_E / (N_E + N_O);
    it is never user-supplied.  ``p_indicator`` labels each pooled row with
    the sample it came from, experimental rows first.
    """

    exp: ExperimentalSample
    obs: ObservationalSample
    q: float = field(init=False)
    p_indicator: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.exp.n_surrogates != self.obs.n_surrogates:
            raise PoolingError(
                f"surrogate dimension mismatch: experimental has {self.exp.n_surrogates}, "
                f"observational has {self.obs.n_surrogates}"
            )
        if self.exp.n_covariates != self.obs.n_covariates:
            raise PoolingError(
                f"covariate dimension mismatch: experimental has {self.exp.n_covariates}, "
                f"observational has {self.obs.n_covariates}"
            )
        object.__setattr__(self, "q", self.exp.n / (self.exp.n + self.obs.n))
        labels = np.array(["E"] * self.exp.n + ["O"] * self.obs.n)
        labels.flags.writeable = False
        object.__setattr__(self, "p_indicator", labels)

    @property
    def n_total(self) -> int:
        return self.exp.n + self.obs.n

    @property
    def s_pooled(self) -> np.ndarray:
        return np.vstack([self.exp.s, self.obs.s])

    @property
    def x_pooled(self) -> np.ndarray:
        return np.vstack([self.exp.x, self.obs.x])

    @property
    def is_experimental(self) -> np.ndarray:
        return self.p_indicator == "E"


def pool(exp: ExperimentalSample, obs: ObservationalSample) -> PooledDataset:
    """Combine the two samples; raises :class:`PoolingError` on dimension mismatch."""
    return PooledDataset(exp, obs)


@dataclass(frozen=True)
class Schema:
    """Column mapping for CSV files.

    ``surrogates`` / ``covariates`` may list explicit column names; when
    ``None`` they are auto-detected as ``s1..sM`` / ``x1..xK`` ordered by
    their numeric suffix.
    """

    treatment: str = "w"
    outcome: str = "y"
    surrogates: Sequence[str] | None = None
    covariates: Sequence[str] | None = None

    def resolve(self, header: Sequence[str], *, need_treatment: bool, need_outcome: bool):
        cols = list(header)

        def _detect(pattern):
            found = []
            for name in cols:
                m = pattern.match(name)
                if m:
                    found.append((int(m.group(1)), name))
            return [name for _, name in sorted(found)]

        surrogates = list(self.surrogates) if self.surrogates is not None else _detect(_SURROGATE_RE)
        covariates = list(self.covariates) if self.covariates is not None else _detect(_COVARIATE_RE)
        if not surrogates:
            raise SchemaError("no surrogate columns found (expected s1..sM or an explicit list)")
        required = list(surrogates) + list(covariates)
        if need_treatment:
            required.append(self.treatment)
        if need_outcome:
            required.append(self.outcome)
        missing = [c for c in required if c not in cols]
        if missing:
            raise SchemaError(f"missing column(s): {', '.join(missing)}")
        return surrogates, covariates


def _read_rows(path):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"empty file: {path}") from None
        rows = list(reader)
    return header, rows


def _parse_column(rows, header, name, row_offset=1):
    j = header.index(name)
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        if j >= len(row) or row[j] == "":
            raise ValidationError(f"row {i + row_offset}, column {name}: missing value")
        try:
            v = float(row[j])
        except ValueError:
            raise ValidationError(f"row {i + row_offset}, column {name}: cannot parse {row[j]!r}") from None
        if not np.isfinite(v):
            raise ValidationError(f"row {i + row_offset}, column {name}: non-finite value {row[j]!r}")
        out[i] = v
    return out


def _parse_treatment(rows, header, name):
    w = _parse_column(rows, header, name)
    bad = np.flatnonzero(~np.isin(w, (0.0, 1.0)))
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"row {i + 1}, column {name}: treatment must be 0 or 1, got {w[i]}")
    return w


def _parse_block(rows, header, names):
    if not names:
        return np.empty((len(rows), 0))
    return np.column_stack([_parse_column(rows, header, n) for n in names])


def load_experimental(path, schema: Schema | None = None) -> ExperimentalSample:
    """Load an experimental sample (``w``, surrogates, optional covariates) from CSV."""
    schema = schema or Schema()
    header, rows = _read_rows(path)
    surrogates, covariates = schema.resolve(header, need_treatment=True, need_outcome=False)
    w = _parse_treatment(rows, header, schema.treatment)
    s = _parse_block(rows, header, surrogates)
    x = _parse_block(rows, header, covariates)
    return ExperimentalSample(w=w, s=s, x=x)


def load_observational(path, schema: Schema | None = None) -> ObservationalSample:
    """Load an observational sample (``y``, surrogates, optional covariates) from CSV."""
    schema = schema or Schema()
    header, rows = _read_rows(path)
    surrogates, covariates = schema.resolve(header, need_treatment=False, need_outcome=True)
    y = _parse_column(rows, header, schema.outcome)
    s = _parse_block(rows, header, surrogates)
    x = _parse_block(rows, header, covariates)
    return ObservationalSample(y=y, s=s, x=x)


def load_single(path, schema: Schema | None = None) -> SingleSample:
    """Load a single-sample design (``w``, ``y``, surrogates, covariates) from CSV."""
    schema = schema or Schema()
    header, rows = _read_rows(path)
    surrogates, covariates = schema.resolve(header, need_treatment=True, need_outcome=True)
    w = _parse_treatment(rows, header, schema.treatment)
    y = _parse_column(rows, header, schema.outcome)
    s = _parse_block(rows, header, surrogates)
    x = _parse_block(rows, header, covariates)
    return SingleSample(w=w, y=y, s=s, x=x)


def _fmt(v: float) -> str:
    # repr round-trips float64 exactly, which makes write/load an identity
    return repr(float(v))


def _write_csv(path, header, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow(row)


def write_experimental(sample: ExperimentalSample, path) -> None:
    header = ["w"] + [f"s{j + 1}" for j in range(sample.n_surrogates)]
    header += [f"x{j + 1}" for j in range(sample.n_covariates)]
    cols = [[str(int(v)) for v in sample.w]]
    cols += [[_fmt(v) for v in sample.s[:, j]] for j in range(sample.n_surrogates)]
    cols += [[_fmt(v) for v in sample.x[:, j]] for j in range(sample.n_covariates)]
    _write_csv(path, header, cols)


def write_observational(sample: ObservationalSample, path) -> None:
    header = ["y"] + [f"s{j + 1}" for j in range(sample.n_surrogates)]
    header += [f"x{j + 1}" for j in range(sample.n_covariates)]
    cols = [[_fmt(v) for v in sample.y]]
    cols += [[_fmt(v) for v in sample.s[:, j]] for j in range(sample.n_surrogates)]
    cols += [[_fmt(v) for v in sample.x[:, j]] for j in range(sample.n_covariates)]
    _write_csv(path, header, cols)


def write_single(sample: SingleSample, path) -> None:
    header = ["w", "y"] + [f"s{j + 1}" for j in range(sample.n_surrogates)]
    header += [f"x{j + 1}" for j in range(sample.n_covariates)]
    cols = [[str(int(v)) for v in sample.w], [_fmt(v) for v in sample.y]]
    cols += [[_fmt(v) for v in sample.s[:, j]] for j in range(sample.n_surrogates)]
    cols += [[_fmt(v) for v in sample.x[:, j]] for j in range(sample.n_covariates)]
    _write_csv(path, header, cols)

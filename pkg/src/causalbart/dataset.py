"""Tabular container with explicit missingness and column kinds.

A table is a list of typed columns plus a role map. Every cell carries an
observed/missing flag; numeric storage under a missing flag is undefined
(held as NaN) and must never be read by consumers. CSV is the on-disk
format: header row, empty string or the literal token ``NA`` (case
sensitive) for a missing cell, nothing else treated as missing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

KINDS = ("continuous", "count", "binary", "categorical")
ROLES = ("outcome", "treatment", "covariate", "id")
MISSING_TOKENS = ("", "NA")

NUMERIC_KINDS = ("continuous", "count", "binary")


@dataclass
class Column:
    """One typed column.

    Parameters
    ----------
    name : str
    kind : str
        One of ``continuous``, ``count``, ``binary``, ``categorical``.
    values : ndarray
        float64 for numeric kinds (NaN where missing), object array of
        strings for categorical.
    mask : ndarray of bool
        True where the cell is observed.
    """

    name: str
    kind: str
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"column {self.name!r}: unknown kind {self.kind!r}")
        self.values = np.asarray(self.values)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.shape != self.mask.shape or self.values.ndim != 1:
            raise DataError(f"column {self.name!r}: values and mask must be equal-length 1-d arrays")
        if self.kind in NUMERIC_KINDS:
            self.values = self.values.astype(np.float64)
            self.values[~self.mask] = np.nan
            obs = self.values[self.mask]
            if not np.all(np.isfinite(obs)):
                raise DataError(f"column {self.name!r}: non-finite observed value")
            if self.kind == "binary" and obs.size and not np.isin(obs, (0.0, 1.0)).all():
                raise DataError(f"column {self.name!r}: binary values outside {{0, 1}}")
            if self.kind == "count" and obs.size and not np.allclose(obs, np.round(obs)):
                raise DataError(f"column {self.name!r}: count values must be integral")
        else:
            self.values = self.values.astype(object)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def n_missing(self) -> int:
        return int((~self.mask).sum())

    def observed(self) -> np.ndarray:
        return self.values[self.mask]

    @property
    def levels(self) -> tuple:
        """Sorted observed level set (categorical only)."""
        if self.kind != "categorical":
            raise ConfigError(f"column {self.name!r} is not categorical")
        return tuple(sorted(set(self.observed().tolist())))

    def copy(self) -> "Column":
        return Column(self.name, self.kind, self.values.copy(), self.mask.copy())


@dataclass
class Dataset:
    """Columns plus a role map.

    Roles map each of ``outcome``/``treatment``/``covariate``/``id`` to a
    tuple of column names. Exactly one treatment column and at most one id
    column are allowed; every referenced name must exist.
    """

    columns: list = field(default_factory=list)
    roles: dict = field(default_factory=dict)

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names")
        lengths = {c.n for c in self.columns}
        if len(lengths) > 1:
            raise DataError("columns differ in length")
        norm = {}
        for role, cols in self.roles.items():
            if role not in ROLES:
                raise ConfigError(f"unknown role {role!r}")
            if isinstance(cols, str):
                cols = (cols,)
            cols = tuple(cols)
            for c in cols:
                if c not in names:
                    raise ConfigError(f"role {role!r} references absent column {c!r}")
            norm[role] = cols
        self.roles = norm
        if len(self.roles.get("treatment", ())) > 1:
            raise ConfigError("more than one treatment column")
        if len(self.roles.get("id", ())) > 1:
            raise ConfigError("more than one id column")

    @property
    def n(self) -> int:
        return self.columns[0].n if self.columns else 0

    @property
    def names(self) -> list:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise ConfigError(f"no column named {name!r}")

    def role_columns(self, role: str) -> tuple:
        return self.roles.get(role, ())

    @property
    def treatment(self) -> str:
        cols = self.role_columns("treatment")
        if not cols:
            raise ConfigError("no treatment column declared")
        return cols[0]

    def copy(self) -> "Dataset":
        return Dataset([c.copy() for c in self.columns], dict(self.roles))

    def replace_column(self, col: Column) -> "Dataset":
        cols = [col if c.name == col.name else c for c in self.columns]
        return Dataset(cols, dict(self.roles))


def _parse_cell(token: str, kind: str, row: int, name: str):
    if token in MISSING_TOKENS:
        return None
    if kind == "categorical":
        return token
    try:
        v = float(token)
    except ValueError:
        raise DataError(f"unparsable cell at row {row}, column {name!r}: {token!r}") from None
    return v


def load_table(path, schema: dict) -> Dataset:
    """Read a CSV into a Dataset.

    ``schema`` carries ``columns`` (name -> kind, covering every file
    column) and ``roles``. Missing cells are the empty string or ``NA``
    exactly; any other unparsable token is an error naming row and column.
    """
    kinds = schema.get("columns")
    if not isinstance(kinds, dict) or not kinds:
        raise ConfigError("schema must declare a non-empty 'columns' map")
    for name, kind in kinds.items():
        if kind not in KINDS:
            raise ConfigError(f"schema column {name!r}: unknown kind {kind!r}")
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        for name in header:
            if name not in kinds:
                raise ConfigError(f"{path}: column {name!r} not declared in schema")
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        raw: list = [[] for _ in header]
        for i, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
            for j, token in enumerate(row):
                raw[j].append(_parse_cell(token, kinds[header[j]], i, header[j]))
    columns = []
    for j, name in enumerate(header):
        kind = kinds[name]
        cells = raw[j]
        mask = np.array([c is not None for c in cells], dtype=bool)
        if kind == "categorical":
            vals = np.array([c if c is not None else "" for c in cells], dtype=object)
        else:
            vals = np.array([c if c is not None else np.nan for c in cells], dtype=np.float64)
        columns.append(Column(name, kind, vals, mask))
    return Dataset(columns, dict(schema.get("roles", {})))


def _format_numeric(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def save_table(d: Dataset, path) -> None:
    """Write a Dataset as CSV; missing cells become empty strings.

    Floats are written with shortest round-trip repr so load(save(d))
    reproduces d exactly.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(d.names)
        for i in range(d.n):
            row = []
            for c in d.columns:
                if not c.mask[i]:
                    row.append("")
                elif c.kind == "categorical":
                    row.append(str(c.values[i]))
                else:
                    row.append(_format_numeric(c.values[i]))
            writer.writerow(row)


def schema_of(d: Dataset) -> dict:
    """Schema dict that round-trips this dataset through load_table."""
    return {
        "columns": {c.name: c.kind for c in d.columns},
        "roles": {role: list(cols) for role, cols in d.roles.items()},
    }


def summarize(d: Dataset) -> dict:
    """Per-column descriptive record.

    Numeric columns report min / median / mean / sd (ddof=1) / max over
    observed cells plus the missing rate; the median of an even-length
    vector is the mean of the two central order statistics. Categorical
    columns report level counts. An all-missing column gets an error
    marker instead of statistics.
    """
    out = {}
    for c in d.columns:
        rec = {"kind": c.kind, "n": c.n, "n_missing": c.n_missing,
               "missing_rate": c.n_missing / c.n if c.n else 0.0}
        obs = c.observed()
        if obs.size == 0:
            rec["error"] = "all cells missing"
            out[c.name] = rec
            continue
        if c.kind in NUMERIC_KINDS:
            rec.update(
                min=float(obs.min()),
                median=float(np.median(obs)),
                mean=float(obs.mean()),
                sd=float(obs.std(ddof=1)) if obs.size > 1 else None,
                max=float(obs.max()),
            )
        else:
            levels, counts = np.unique(obs.astype(str), return_counts=True)
            rec["levels"] = {str(l): int(k) for l, k in zip(levels, counts)}
        out[c.name] = rec
    return out


def missingness_profile(d: Dataset) -> dict:
    """Missing-cell counts and rates, with an outcome-by-treatment cross-tab.

    The cross-tab is emitted only when a treatment column is declared and
    fully observed: rows are split at the treatment median (strictly above
    versus at-or-below) and each outcome column's missing rate is reported
    within the two groups.
    """
    prof = {
        "columns": {
            c.name: {"n_missing": c.n_missing, "rate": c.n_missing / c.n if c.n else 0.0}
            for c in d.columns
        }
    }
    tcols = d.role_columns("treatment")
    if tcols:
        t = d.column(tcols[0])
        if t.kind in NUMERIC_KINDS and t.n_missing == 0 and t.n > 0:
            cut = float(np.median(t.values))
            hi = t.values > cut
            tab = {}
            for name in d.role_columns("outcome"):
                c = d.column(name)
                miss = ~c.mask
                tab[name] = {
                    "above_median": float(miss[hi].mean()) if hi.any() else None,
                    "at_or_below_median": float(miss[~hi].mean()) if (~hi).any() else None,
                }
            prof["outcome_by_treatment"] = {"treatment_cutoff": cut, "rates": tab}
    return prof

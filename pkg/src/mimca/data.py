"""Categorical tables, disjunctive (indicator) coding and delimited-text I/O.

A :class:`CategoricalTable` stores integer category codes with ``MISSING``
(-1) marking empty cells. :func:`encode_disjunctive` expands it into an
:class:`IndicatorMatrix` whose columns are grouped in one contiguous span per
variable, together with a boolean observation mask that is constant across
each span.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

MISSING = -1


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class VariableMeta:
    name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if not self.labels:
            raise DataError(f"variable {self.name!r} has no categories")
        if len(set(self.labels)) != len(self.labels):
            raise DataError(f"variable {self.name!r} has duplicated labels")

    @property
    def n_categories(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class CategoricalTable:
    """Rectangular table of category codes.

    Parameters
    ----------
    codes : array_like of int, shape (I, K)
        Category index of each cell in ``[0, q_k)``, or ``MISSING``.
    variables : sequence of VariableMeta
        One entry per column, giving the name and ordered labels.
    """

    codes: np.ndarray
    variables: tuple[VariableMeta, ...]

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 2:
            raise DataError("codes must be a 2-d array")
        if codes.size and not np.issubdtype(codes.dtype, np.integer):
            raise DataError("codes must be integers")
        codes = codes.astype(np.int64)
        variables = tuple(self.variables)
        if codes.shape[1] != len(variables):
            raise DataError(
                f"{codes.shape[1]} columns but {len(variables)} variables")
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise DataError("duplicated variable names")
        for k, var in enumerate(variables):
            if var.n_categories < 2:
                raise DataError(
                    f"constant variable {var.name!r}: needs at least 2 categories")
            col = codes[:, k]
            if np.any((col < MISSING) | (col >= var.n_categories)):
                raise DataError(f"category code out of range in {var.name!r}")
        object.__setattr__(self, "codes", _frozen(codes))
        object.__setattr__(self, "variables", variables)

    def __eq__(self, other):
        if not isinstance(other, CategoricalTable):
            return NotImplemented
        return (self.variables == other.variables
                and np.array_equal(self.codes, other.codes))

    __hash__ = None

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    @property
    def n_variables(self) -> int:
        return self.codes.shape[1]

    @property
    def n_categories(self) -> np.ndarray:
        return np.array([v.n_categories for v in self.variables], dtype=int)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def missing(self) -> np.ndarray:
        return self.codes == MISSING

    def is_complete(self) -> bool:
        return not self.missing.any()

    def column(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown variable {name!r}") from None

    def with_codes(self, codes: np.ndarray) -> "CategoricalTable":
        """Same dictionaries, new cells."""
        return CategoricalTable(codes, self.variables)

    def take_rows(self, rows) -> "CategoricalTable":
        return CategoricalTable(self.codes[rows], self.variables)

    def select(self, names: Sequence[str]) -> "CategoricalTable":
        idx = [self.column(n) for n in names]
        return CategoricalTable(self.codes[:, idx],
                                tuple(self.variables[i] for i in idx))

    def labels_array(self, missing_token: str = "NA") -> list[list[str]]:
        out = []
        for row in self.codes:
            out.append([missing_token if c == MISSING else v.labels[c]
                        for c, v in zip(row, self.variables)])
        return out

    @classmethod
    def from_labels(cls, rows: Sequence[Sequence[str | None]],
                    names: Sequence[str],
                    labels: Sequence[Sequence[str]] | None = None,
                    missing_token: str = "NA") -> "CategoricalTable":
        """Build a table from string cells.

        Category dictionaries are taken from ``labels`` when given, otherwise
        inferred per column in order of first appearance.
        """
        n_vars = len(names)
        for r in rows:
            if len(r) != n_vars:
                raise DataError(
                    f"ragged row: expected {n_vars} fields, got {len(r)}")
        if labels is None:
            labels = []
            for k in range(n_vars):
                seen: dict[str, None] = {}
                for r in rows:
                    cell = r[k]
                    if cell is not None and cell != missing_token:
                        seen.setdefault(cell, None)
                if not seen:
                    raise DataError(f"empty column {names[k]!r}")
                if len(seen) < 2:
                    raise DataError(f"constant variable {names[k]!r}")
                labels.append(list(seen))
        variables = tuple(VariableMeta(n, tuple(l)) for n, l in zip(names, labels))
        lookup = [{lab: i for i, lab in enumerate(v.labels)} for v in variables]
        codes = np.full((len(rows), n_vars), MISSING, dtype=np.int64)
        for i, r in enumerate(rows):
            for k, cell in enumerate(r):
                if cell is None or cell == missing_token:
                    continue
                try:
                    codes[i, k] = lookup[k][cell]
                except KeyError:
                    raise DataError(
                        f"unknown category {cell!r} for {names[k]!r}") from None
        return cls(codes, variables)


@dataclass(frozen=True)
class IndicatorMatrix:
    """Disjunctive coding ``Z`` with per-variable spans and observation mask.

    ``mask[i, j]`` is True when ``values[i, j]`` is observed. After
    imputation ``values`` may hold fuzzy (real) entries in the masked cells.
    """

    values: np.ndarray
    spans: tuple[tuple[int, int], ...]
    mask: np.ndarray
    variables: tuple[VariableMeta, ...] = field(default=())

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if values.shape != mask.shape:
            raise DataError("values and mask shapes differ")
        spans = tuple((int(a), int(b)) for a, b in self.spans)
        if spans and (spans[0][0] != 0 or spans[-1][1] != values.shape[1]
                      or any(a[1] != b[0] for a, b in zip(spans, spans[1:]))):
            raise DataError("spans must tile the columns contiguously")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))
        object.__setattr__(self, "spans", spans)
        object.__setattr__(self, "variables", tuple(self.variables))

    @property
    def n_variables(self) -> int:
        return len(self.spans)

    @property
    def cell_mask(self) -> np.ndarray:
        """(I, K) mask of observed categorical cells."""
        return self.mask[:, [a for a, _ in self.spans]]

    def with_values(self, values: np.ndarray) -> "IndicatorMatrix":
        return IndicatorMatrix(values, self.spans, self.mask, self.variables)


def spans_for(n_categories: Sequence[int]) -> tuple[tuple[int, int], ...]:
    stops = np.cumsum(n_categories)
    starts = stops - np.asarray(n_categories)
    return tuple(zip(starts.tolist(), stops.tolist()))


def span_index(spans) -> np.ndarray:
    """Variable index of each indicator column."""
    return np.concatenate([np.full(b - a, k) for k, (a, b) in enumerate(spans)])


def span_sums(values: np.ndarray, spans) -> np.ndarray:
    """(I, K) sums of each variable span."""
    return np.stack([values[:, a:b].sum(axis=1) for a, b in spans], axis=1)


def encode_disjunctive(table: CategoricalTable) -> IndicatorMatrix:
    spans = spans_for(table.n_categories)
    I = table.n_rows
    J = spans[-1][1]
    values = np.zeros((I, J))
    mask = np.ones((I, J), dtype=bool)
    rows = np.arange(I)
    for k, (a, b) in enumerate(spans):
        codes = table.codes[:, k]
        obs = codes != MISSING
        values[rows[obs], a + codes[obs]] = 1.0
        mask[~obs, a:b] = False
    return IndicatorMatrix(values, spans, mask, table.variables)


def decode_categories(z: IndicatorMatrix,
                      variables: Sequence[VariableMeta] | None = None,
                      ) -> CategoricalTable:
    """Invert :func:`encode_disjunctive` on a crisp indicator matrix.

    Masked spans decode to ``MISSING``; every observed span must hold a single
    one and zeros elsewhere.
    """
    variables = tuple(variables) if variables is not None else z.variables
    if len(variables) != z.n_variables:
        raise DataError("variable metadata required to decode")
    codes = np.full((z.values.shape[0], z.n_variables), MISSING, dtype=np.int64)
    for k, (a, b) in enumerate(z.spans):
        block = z.values[:, a:b]
        obs = z.mask[:, a]
        sub = block[obs]
        crisp = np.all((sub == 0.0) | (sub == 1.0), axis=1) & (sub.sum(axis=1) == 1.0)
        if not crisp.all():
            raise DataError("fuzzy row requires coin_flip")
        codes[obs, k] = sub.argmax(axis=1)
    return CategoricalTable(codes, variables)


def column_proportions(values: np.ndarray, row_weights: np.ndarray) -> np.ndarray:
    """Weighted column means of a fully specified indicator matrix.

    Weights are normalized internally, so any positive rescaling gives the
    same result.
    """
    w = np.asarray(row_weights, dtype=float)
    if np.any(w < 0):
        raise DataError("row weights must be nonnegative")
    total = w.sum()
    if not total > 0:
        raise DataError("row weights sum to zero")
    return (w / total) @ np.asarray(values, dtype=float)


def _read_raw(path, delimiter: str):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    if any(not h for h in header):
        raise DataError(f"{path}: empty column name in header")
    return header, rows


def read_table(path, missing_token: str = "NA", delimiter: str = ",",
               labels: Sequence[Sequence[str]] | None = None) -> CategoricalTable:
    header, rows = _read_raw(path, delimiter)
    return CategoricalTable.from_labels(rows, header, labels, missing_token)


def read_tables(paths, missing_token: str = "NA", delimiter: str = ",",
                labels: Sequence[Sequence[str]] | None = None,
                ) -> list[CategoricalTable]:
    """Read several files with the same header into tables sharing dictionaries.

    Without explicit ``labels``, each variable's categories are ordered by first
    appearance across the files taken in order.
    """
    raw = [_read_raw(p, delimiter) for p in paths]
    header = raw[0][0]
    for p, (h, _) in zip(paths, raw):
        if h != header:
            raise DataError(f"{p}: header differs from {paths[0]}")
    if labels is None:
        pooled = [r for _, rows in raw for r in rows]
        labels = [v.labels for v in
                  CategoricalTable.from_labels(pooled, header, None,
                                               missing_token).variables]
    return [CategoricalTable.from_labels(rows, header, labels, missing_token)
            for _, rows in raw]


def write_table(table: CategoricalTable, path, missing_token: str = "NA",
                delimiter: str = ",") -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(table.names)
        writer.writerows(table.labels_array(missing_token))

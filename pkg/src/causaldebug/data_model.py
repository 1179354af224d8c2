"""Variables, observation tables, discretization, fault labels and gain.

An :class:`ObservationTable` keeps one float matrix.  Continuous columns hold
the measured value; discrete columns hold the index of the value in the
variable's domain.  Use :meth:`ObservationTable.column` for numeric values and
:meth:`ObservationTable.row` for the original labels.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DivisionByZeroFault,
    EmptyTable,
    MissingColumn,
    SchemaError,
    TargetNotInSchema,
    UnknownColumn,
    ValueOutOfDomain,
)


class VariableKind(enum.Enum):
    CONFIG_OPTION = "config_option"
    SYSTEM_EVENT = "system_event"
    NFP = "non_functional_property"


class DType(enum.Enum):
    CONTINUOUS = "continuous"
    ORDINAL = "ordinal"
    CATEGORICAL = "categorical"
    BINARY = "binary"


class Direction(enum.Enum):
    LOWER_IS_BETTER = "lower_is_better"
    HIGHER_IS_BETTER = "higher_is_better"


TIER = {VariableKind.CONFIG_OPTION: 0, VariableKind.SYSTEM_EVENT: 1, VariableKind.NFP: 2}

_KIND_ALIASES = {
    "config_option": VariableKind.CONFIG_OPTION,
    "configoption": VariableKind.CONFIG_OPTION,
    "option": VariableKind.CONFIG_OPTION,
    "system_event": VariableKind.SYSTEM_EVENT,
    "systemevent": VariableKind.SYSTEM_EVENT,
    "event": VariableKind.SYSTEM_EVENT,
    "non_functional_property": VariableKind.NFP,
    "nonfunctionalproperty": VariableKind.NFP,
    "nfp": VariableKind.NFP,
}
_DIRECTION_ALIASES = {
    "lower_is_better": Direction.LOWER_IS_BETTER,
    "lowerisbetter": Direction.LOWER_IS_BETTER,
    "lower": Direction.LOWER_IS_BETTER,
    "higher_is_better": Direction.HIGHER_IS_BETTER,
    "higherisbetter": Direction.HIGHER_IS_BETTER,
    "higher": Direction.HIGHER_IS_BETTER,
}


def _as_number(value):
    if isinstance(value, bool):
        return float(value)
    if isinstance(value, (int, float, np.integer, np.floating)):
        return float(value)
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


@dataclass(frozen=True)
class VariableMeta:
    name: str
    kind: VariableKind
    dtype: DType
    domain: tuple = ()
    intervenable: bool | None = None
    direction: Direction = Direction.LOWER_IS_BETTER

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, VariableKind) else _KIND_ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise SchemaError(f"{self.name}: unknown kind {self.kind!r}")
        dtype = self.dtype if isinstance(self.dtype, DType) else DType(str(self.dtype).lower())
        direction = (
            self.direction
            if isinstance(self.direction, Direction)
            else _DIRECTION_ALIASES.get(str(self.direction).lower())
        )
        if direction is None:
            raise SchemaError(f"{self.name}: unknown direction {self.direction!r}")
        domain = tuple(self.domain)
        if dtype is DType.BINARY and not domain:
            domain = (0.0, 1.0)
        intervenable = kind is VariableKind.CONFIG_OPTION if self.intervenable is None else bool(self.intervenable)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "dtype", dtype)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "intervenable", intervenable)

        if not self.name:
            raise SchemaError("variable name must be non-empty")
        if intervenable and kind is not VariableKind.CONFIG_OPTION:
            raise SchemaError(f"{self.name}: only configuration options can be intervenable")
        if not domain:
            raise SchemaError(f"{self.name}: empty domain")
        if dtype is DType.CONTINUOUS:
            if len(domain) != 2:
                raise SchemaError(f"{self.name}: continuous domain must be [min, max]")
            lo, hi = (_as_number(v) for v in domain)
            if lo is None or hi is None or not lo < hi:
                raise SchemaError(f"{self.name}: continuous domain needs min < max")
            object.__setattr__(self, "domain", (lo, hi))
        else:
            if dtype is DType.BINARY and len(domain) != 2:
                raise SchemaError(f"{self.name}: binary domain must have two values")
            numbers = [_as_number(v) for v in domain]
            if all(x is not None for x in numbers):
                domain = tuple(numbers)
                object.__setattr__(self, "domain", domain)
            if len(set(domain)) != len(domain):
                raise SchemaError(f"{self.name}: domain values must be distinct")

    @property
    def is_continuous(self) -> bool:
        return self.dtype is DType.CONTINUOUS

    @property
    def numeric_domain(self) -> bool:
        return all(isinstance(v, float) for v in self.domain)

    @property
    def tier(self) -> int:
        return TIER[self.kind]

    def encode(self, value, row=None):
        """Return the stored float for ``value`` or raise :class:`ValueOutOfDomain`."""
        if self.is_continuous:
            x = _as_number(value)
            lo, hi = self.domain
            if x is None or not math.isfinite(x) or x < lo or x > hi:
                raise ValueOutOfDomain(row, self.name, value)
            return x
        if self.numeric_domain:
            x = _as_number(value)
            if x is not None:
                for i, v in enumerate(self.domain):
                    if math.isclose(x, v, rel_tol=1e-9, abs_tol=1e-12):
                        return float(i)
        else:
            s = str(value)
            for i, v in enumerate(self.domain):
                if str(v) == s:
                    return float(i)
        raise ValueOutOfDomain(row, self.name, value)

    def decode(self, stored: float):
        if self.is_continuous:
            return float(stored)
        return self.domain[int(stored)]

    def numeric(self, stored: np.ndarray) -> np.ndarray:
        if self.is_continuous:
            return np.asarray(stored, dtype=float)
        if self.numeric_domain:
            return np.asarray(self.domain, dtype=float)[np.asarray(stored, dtype=int)]
        return np.asarray(stored, dtype=float)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "dtype": self.dtype.value,
            "domain": list(self.domain),
            "intervenable": self.intervenable,
            "direction": self.direction.value,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "VariableMeta":
        return cls(
            name=obj["name"],
            kind=obj["kind"],
            dtype=obj["dtype"],
            domain=tuple(obj.get("domain", ())),
            intervenable=obj.get("intervenable"),
            direction=obj.get("direction", Direction.LOWER_IS_BETTER.value),
        )


@dataclass(frozen=True)
class Schema:
    variables: tuple[VariableMeta, ...]
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        variables = tuple(self.variables)
        object.__setattr__(self, "variables", variables)
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise SchemaError("variable names must be unique")
        if not any(v.kind is VariableKind.NFP for v in variables):
            raise SchemaError("schema needs at least one non-functional property")
        object.__setattr__(self, "index", {n: i for i, n in enumerate(names)})

    def __len__(self):
        return len(self.variables)

    def __iter__(self):
        return iter(self.variables)

    def __getitem__(self, key) -> VariableMeta:
        if isinstance(key, str):
            return self.variables[self.index_of(key)]
        return self.variables[key]

    def index_of(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise UnknownColumn(name) from None

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def of_kind(self, kind: VariableKind) -> list[str]:
        return [v.name for v in self.variables if v.kind is kind]

    @property
    def options(self) -> list[str]:
        return self.of_kind(VariableKind.CONFIG_OPTION)

    @property
    def nfps(self) -> list[str]:
        return self.of_kind(VariableKind.NFP)

    def tiers(self) -> list[int]:
        return [v.tier for v in self.variables]

    def to_json(self) -> dict:
        return {"variables": [v.to_json() for v in self.variables]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, obj: Mapping) -> "Schema":
        return cls(tuple(VariableMeta.from_json(v) for v in obj["variables"]))

    @classmethod
    def loads(cls, text: str) -> "Schema":
        return cls.from_json(json.loads(text))


class ObservationTable:
    """Immutable ``n x p`` table of samples over a :class:`Schema`."""

    def __init__(self, schema: Schema, data: np.ndarray):
        data = np.array(data, dtype=float, copy=True)
        if data.ndim != 2 or data.shape[1] != len(schema):
            raise SchemaError(f"data shape {data.shape} does not match schema width {len(schema)}")
        if data.shape[0] < 1:
            raise EmptyTable("observation table has no rows")
        for j, var in enumerate(schema):
            col = data[:, j]
            if var.is_continuous:
                lo, hi = var.domain
                bad = np.flatnonzero(~np.isfinite(col) | (col < lo) | (col > hi))
            else:
                bad = np.flatnonzero((col != np.round(col)) | (col < 0) | (col >= len(var.domain)))
            if bad.size:
                raise ValueOutOfDomain(int(bad[0]), var.name, col[bad[0]])
        data.setflags(write=False)
        self._schema = schema
        self._data = data

    @classmethod
    def from_rows(cls, schema: Schema, rows: Iterable) -> "ObservationTable":
        """Build from rows of domain values (sequences in schema order, or mappings)."""
        encoded = []
        for r, row in enumerate(rows):
            if isinstance(row, Mapping):
                row = [row[name] for name in schema.names]
            if len(row) != len(schema):
                raise SchemaError(f"row {r} has {len(row)} cells, expected {len(schema)}")
            encoded.append([var.encode(v, r) for var, v in zip(schema, row)])
        if not encoded:
            raise EmptyTable("observation table has no rows")
        return cls(schema, np.asarray(encoded, dtype=float))

    @property
    def schema(self) -> Schema:
        return self._schema

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def n_rows(self) -> int:
        return self._data.shape[0]

    def __len__(self):
        return self.n_rows

    def column(self, name: str) -> np.ndarray:
        j = self._schema.index_of(name)
        return self._schema[j].numeric(self._data[:, j])

    def row(self, i: int) -> tuple:
        return tuple(var.decode(x) for var, x in zip(self._schema, self._data[i]))

    def row_dict(self, i: int) -> dict:
        return dict(zip(self._schema.names, self.row(i)))

    def append(self, rows: Iterable) -> "ObservationTable":
        extra = ObservationTable.from_rows(self._schema, rows)
        return ObservationTable(self._schema, np.vstack([self._data, extra.data]))

    def take(self, indices: Sequence[int]) -> "ObservationTable":
        return ObservationTable(self._schema, self._data[np.asarray(indices, dtype=int)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self._schema.names)
        for i in range(self.n_rows):
            writer.writerow([_format_cell(v) for v in self.row(i)])
        return buf.getvalue()

    def __repr__(self):
        return f"ObservationTable(n={self.n_rows}, variables={self._schema.names})"


def _format_cell(value) -> str:
    if isinstance(value, float):
        if value.is_integer() and abs(value) < 1e15:
            return str(int(value))
        return repr(value)
    return str(value)


def load_observations(csv_text: str, schema: Schema) -> ObservationTable:
    """Parse CSV text whose header names exactly the schema variables."""
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptyTable("CSV has no header row") from None
    for name in header:
        if name not in schema.index:
            raise UnknownColumn(name)
    for name in schema.names:
        if name not in header:
            raise MissingColumn(name)
    position = [header.index(name) for name in schema.names]
    rows = []
    for r, record in enumerate(reader):
        if not record or all(not cell.strip() for cell in record):
            continue
        if len(record) != len(header):
            raise SchemaError(f"row {r} has {len(record)} cells, expected {len(header)}")
        cells = []
        for var, p in zip(schema, position):
            cell = record[p].strip()
            if cell == "":
                raise ValueOutOfDomain(r, var.name, cell)
            cells.append(var.encode(cell, r))
        rows.append(cells)
    if not rows:
        raise EmptyTable("CSV has no data rows")
    return ObservationTable(schema, np.asarray(rows, dtype=float))


# -- discretization ---------------------------------------------------------


@dataclass(frozen=True)
class LevelInfo:
    """Numeric meaning of each discrete level of one variable.

    ``values`` is the representative number of a level (bin midpoint, numeric
    domain value, or index for categorical labels).  ``lower``/``upper`` bound
    the raw values a level stands for; they coincide for point levels.
    """

    name: str
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    point: bool
    edges: np.ndarray | None = None

    @property
    def card(self) -> int:
        return len(self.values)

    def encode(self, value: float) -> int:
        if self.edges is not None:
            return int(bin_index(np.array([float(value)]), self.edges)[0])
        hits = np.flatnonzero(np.isclose(self.values, float(value), rtol=1e-9, atol=1e-12))
        if not hits.size:
            raise ValueOutOfDomain(None, self.name, value)
        return int(hits[0])


def bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Equal-width bin of each value; the top edge is closed."""
    bins = len(edges) - 1
    lo, hi = edges[0], edges[-1]
    scaled = (np.asarray(values, dtype=float) - lo) / (hi - lo) * bins
    return np.clip(np.floor(scaled + 1e-9), 0, bins - 1).astype(int)


def level_info(var: VariableMeta, bins: int = 10) -> LevelInfo:
    if var.is_continuous:
        lo, hi = var.domain
        edges = np.linspace(lo, hi, bins + 1)
        # rounded so midpoints print and serialise cleanly (0.15, not 0.15000000000000002)
        mids = np.round((edges[:-1] + edges[1:]) / 2, 12)
        return LevelInfo(var.name, mids, edges[:-1].copy(), edges[1:].copy(), False, edges)
    values = var.numeric(np.arange(len(var.domain)))
    return LevelInfo(var.name, values, values.copy(), values.copy(), True, None)


class DiscreteTable:
    """Integer-coded view of an :class:`ObservationTable`."""

    def __init__(self, schema: Schema, codes: np.ndarray, levels: Sequence[LevelInfo]):
        codes = np.array(codes, dtype=np.int64, copy=True)
        levels = tuple(levels)
        if codes.ndim != 2 or codes.shape[1] != len(schema) or len(levels) != len(schema):
            raise SchemaError("codes/levels do not match schema")
        if codes.shape[0] < 1:
            raise EmptyTable("discrete table has no rows")
        for j, info in enumerate(levels):
            col = codes[:, j]
            if col.min() < 0 or col.max() >= info.card:
                raise SchemaError(f"{info.name}: code outside [0, {info.card})")
            if info.edges is not None and not np.all(np.diff(info.edges) > 0):
                raise SchemaError(f"{info.name}: bin edges must increase")
        codes.setflags(write=False)
        self.schema = schema
        self.codes = codes
        self.levels = levels
        self.cards = np.array([info.card for info in levels], dtype=np.int64)

    @classmethod
    def from_codes(cls, codes, names=None, kinds=None) -> "DiscreteTable":
        """Wrap a raw integer matrix; handy for synthetic tests.

        By default every column is an ordinal system event except the last,
        which is a non-functional property.
        """
        codes = np.asarray(codes, dtype=np.int64)
        p = codes.shape[1]
        names = list(names) if names is not None else [f"v{j}" for j in range(p)]
        if kinds is None:
            kinds = [VariableKind.SYSTEM_EVENT] * (p - 1) + [VariableKind.NFP]
        variables = []
        for j in range(p):
            k = int(codes[:, j].max()) + 1 if codes.size else 1
            variables.append(VariableMeta(names[j], kinds[j], DType.ORDINAL, tuple(range(max(k, 1)))))
        schema = Schema(tuple(variables))
        return cls(schema, codes, [level_info(v) for v in schema])

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    def __len__(self):
        return self.n_rows

    @property
    def names(self) -> list[str]:
        return self.schema.names

    def col(self, key) -> np.ndarray:
        j = self.schema.index_of(key) if isinstance(key, str) else key
        return self.codes[:, j]

    @property
    def bin_edges(self) -> dict[str, np.ndarray]:
        return {info.name: info.edges for info in self.levels if info.edges is not None}

    def observed_levels(self, j: int) -> np.ndarray:
        return np.unique(self.codes[:, j])

    @property
    def discrete_schema(self) -> Schema:
        variables = []
        for var, info in zip(self.schema, self.levels):
            if var.is_continuous:
                var = VariableMeta(
                    var.name, var.kind, DType.ORDINAL, tuple(float(x) for x in info.values),
                    var.intervenable, var.direction,
                )
            variables.append(var)
        return Schema(tuple(variables))

    def take(self, indices) -> "DiscreteTable":
        return DiscreteTable(self.schema, self.codes[np.asarray(indices, dtype=int)], self.levels)

    def __repr__(self):
        return f"DiscreteTable(n={self.n_rows}, cards={self.cards.tolist()})"


def discretize(table: ObservationTable, bins_per_continuous: int = 10) -> DiscreteTable:
    if bins_per_continuous < 1:
        raise ValueError("bins_per_continuous must be positive")
    schema = table.schema
    levels = [level_info(var, bins_per_continuous) for var in schema]
    codes = np.empty(table.data.shape, dtype=np.int64)
    for j, (var, info) in enumerate(zip(schema, levels)):
        if var.is_continuous:
            codes[:, j] = bin_index(table.data[:, j], info.edges)
        else:
            codes[:, j] = table.data[:, j].astype(np.int64)
    return DiscreteTable(schema, codes, levels)


def undiscretize(dtable: DiscreteTable) -> ObservationTable:
    """Map codes back to values; continuous cells become bin midpoints."""
    data = np.empty(dtable.codes.shape, dtype=float)
    for j, (var, info) in enumerate(zip(dtable.schema, dtable.levels)):
        if var.is_continuous:
            data[:, j] = info.values[dtable.codes[:, j]]
        else:
            data[:, j] = dtable.codes[:, j]
    return ObservationTable(dtable.schema, data)


# -- faults and gain --------------------------------------------------------


@dataclass(frozen=True)
class FaultSpec:
    targets: tuple[str, ...]
    percentile: float = 99.0
    faulty_row_index: int | None = None

    def __post_init__(self):
        targets = (self.targets,) if isinstance(self.targets, str) else tuple(self.targets)
        object.__setattr__(self, "targets", targets)
        if not targets:
            raise ValueError("a fault needs at least one target")
        if not 50.0 < float(self.percentile) < 100.0:
            raise ValueError("percentile must lie in (50, 100)")

    def validate(self, schema: Schema) -> None:
        for t in self.targets:
            if t not in schema.index or schema[t].kind is not VariableKind.NFP:
                raise TargetNotInSchema(f"{t!r} is not a non-functional property of the schema")

    def to_json(self) -> dict:
        return {
            "targets": list(self.targets),
            "percentile": self.percentile,
            "faulty_row_index": self.faulty_row_index,
        }


def fault_thresholds(table: ObservationTable, spec: FaultSpec) -> dict[str, float]:
    """Percentile of each target column (linear interpolation), taken on the bad side.

    Higher-is-better targets use the mirrored percentile ``100 - p`` so the
    flagged tail holds the worst rows in both directions.
    """
    spec.validate(table.schema)
    out = {}
    for t in spec.targets:
        q = spec.percentile if table.schema[t].direction is Direction.LOWER_IS_BETTER else 100.0 - spec.percentile
        out[t] = float(np.percentile(table.column(t), q))
    return out


def worse_than(value, threshold: float, direction: Direction):
    if direction is Direction.LOWER_IS_BETTER:
        return np.asarray(value) > threshold
    return np.asarray(value) < threshold


def better_than(value, threshold: float, direction: Direction):
    if direction is Direction.LOWER_IS_BETTER:
        return np.asarray(value) < threshold
    return np.asarray(value) > threshold


def is_faulty(values: Mapping[str, float], thresholds: Mapping[str, float], schema: Schema) -> bool:
    """A measurement is faulty when every target is strictly worse than its threshold."""
    return all(bool(worse_than(values[t], thr, schema[t].direction)) for t, thr in thresholds.items())


def label_faults(table: ObservationTable, spec: FaultSpec, thresholds: Mapping[str, float] | None = None) -> np.ndarray:
    spec.validate(table.schema)
    if table.n_rows < 2:
        raise ValueError("fault labeling needs at least two rows")
    if thresholds is None:
        thresholds = fault_thresholds(table, spec)
    flags = np.ones(table.n_rows, dtype=bool)
    for t in spec.targets:
        flags &= worse_than(table.column(t), thresholds[t], table.schema[t].direction)
    return flags


def compute_gain(nfp_fault: float, nfp_nofault: float, direction: Direction = Direction.LOWER_IS_BETTER) -> float:
    """Percentage improvement of a repaired measurement; positive means better."""
    if nfp_fault == 0:
        raise DivisionByZeroFault("gain is undefined for a zero fault value")
    direction = direction if isinstance(direction, Direction) else _DIRECTION_ALIASES[str(direction).lower()]
    if direction is Direction.LOWER_IS_BETTER:
        return (nfp_fault - nfp_nofault) / nfp_fault * 100.0
    return (nfp_nofault - nfp_fault) / nfp_fault * 100.0

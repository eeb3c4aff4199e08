"""Column-oriented in-memory table with per-cell missingness tracking.

A PatientFrame stores each column as a numpy array plus a boolean missing
mask, so "blank" and "zero" stay distinguishable end to end. Frames are
treated as immutable: every operation returns a new frame and shares no
mutable state with its inputs. CSV round-trips preserve both content and
mask (blank cell = missing).
"""

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .errors import IoFailure, KeyMissing, MissingColumn, NonNumericColumn

KINDS = ("num", "int", "str", "time")
NUMERIC_KINDS = ("num", "int", "time")
TIME_FORMAT = "%Y-%m-%d %H:%M:%S"
_EPOCH = datetime(1970, 1, 1)


def parse_time(text):
    """'YYYY-MM-DD HH:MM:SS' -> float seconds since 1970-01-01."""
    dt = datetime.strptime(text, TIME_FORMAT)
    return (dt - _EPOCH).total_seconds()


def format_time(seconds):
    return (_EPOCH + timedelta(seconds=float(seconds))).strftime(TIME_FORMAT)


@dataclass(frozen=True)
class JoinSpec:
    keys: tuple
    kind: str = "inner"

    def __post_init__(self):
        if not self.keys:
            raise ValueError("JoinSpec.keys must be non-empty")
        if self.kind not in ("inner", "left"):
            raise ValueError(f"unknown join kind {self.kind!r}")


class PatientFrame:
    def __init__(self, names, kinds, columns, masks):
        if not (len(names) == len(kinds) == len(columns) == len(masks)):
            raise ValueError("frame arrays out of step")
        lengths = {len(c) for c in columns} | {len(m) for m in masks}
        if len(lengths) > 1:
            raise ValueError(f"ragged columns: lengths {sorted(lengths)}")
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names")
        for k in kinds:
            if k not in KINDS:
                raise ValueError(f"unknown column kind {k!r}")
        self._names = list(names)
        self._kinds = list(kinds)
        self._columns = [np.asarray(c) for c in columns]
        self._masks = [np.asarray(m, dtype=bool) for m in masks]
        self._index = {n: i for i, n in enumerate(self._names)}

    # --- introspection ---

    @property
    def names(self):
        return list(self._names)

    @property
    def n_rows(self):
        return 0 if not self._columns else len(self._columns[0])

    @property
    def n_cols(self):
        return len(self._names)

    def has_column(self, name):
        return name in self._index

    def kind(self, name):
        return self._kinds[self._col(name)]

    def column(self, name):
        """Return (values, missing_mask); arrays are copies."""
        i = self._col(name)
        return self._columns[i].copy(), self._masks[i].copy()

    def values(self, name):
        return self._columns[self._col(name)].copy()

    def mask(self, name):
        return self._masks[self._col(name)].copy()

    def _col(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise MissingColumn(name) from None

    def row_keys(self):
        """(subject_id, hadm_id, stay_id-or-None) tuples for present key columns."""
        out = []
        sid = self._columns[self._col("subject_id")] if self.has_column("subject_id") else None
        hid = self._columns[self._col("hadm_id")] if self.has_column("hadm_id") else None
        tid = self._columns[self._col("stay_id")] if self.has_column("stay_id") else None
        for i in range(self.n_rows):
            out.append((
                None if sid is None else int(sid[i]),
                None if hid is None else int(hid[i]),
                None if tid is None else int(tid[i]),
            ))
        return out

    # --- constructors ---

    @classmethod
    def from_columns(cls, spec):
        """Build from [(name, kind, values, mask-or-None), ...].

        Numeric values may contain NaN, which is folded into the mask.
        """
        names, kinds, cols, masks = [], [], [], []
        for entry in spec:
            name, kind, values = entry[0], entry[1], entry[2]
            mask = entry[3] if len(entry) > 3 else None
            if kind in NUMERIC_KINDS:
                arr = np.asarray(values, dtype=float).copy()
                m = np.zeros(len(arr), dtype=bool) if mask is None else np.asarray(mask, dtype=bool).copy()
                m |= np.isnan(arr)
                arr[m] = np.nan
            else:
                arr = np.array(["" if v is None else str(v) for v in values], dtype=object)
                m = np.zeros(len(arr), dtype=bool) if mask is None else np.asarray(mask, dtype=bool).copy()
                arr[m] = ""
            names.append(name)
            kinds.append(kind)
            cols.append(arr)
            masks.append(m)
        return cls(names, kinds, cols, masks)

    # --- derived frames ---

    def take(self, row_idx):
        idx = np.asarray(row_idx, dtype=int)
        return PatientFrame(
            self._names,
            self._kinds,
            [c[idx] for c in self._columns],
            [m[idx] for m in self._masks],
        )

    def filter(self, keep):
        keep = np.asarray(keep, dtype=bool)
        return self.take(np.flatnonzero(keep))

    def select(self, names):
        idx = [self._col(n) for n in names]
        return PatientFrame(
            [self._names[i] for i in idx],
            [self._kinds[i] for i in idx],
            [self._columns[i].copy() for i in idx],
            [self._masks[i].copy() for i in idx],
        )

    def drop(self, names):
        gone = set(names)
        return self.select([n for n in self._names if n not in gone])

    def with_column(self, name, kind, values, mask=None):
        """New frame with a column appended (or replaced in place)."""
        added = PatientFrame.from_columns([(name, kind, values, mask)])
        if added.n_rows != self.n_rows and self.n_cols > 0:
            raise ValueError("column length does not match frame")
        names, kinds = list(self._names), list(self._kinds)
        cols = [c.copy() for c in self._columns]
        masks = [m.copy() for m in self._masks]
        if name in self._index:
            i = self._index[name]
            kinds[i] = kind
            cols[i] = added._columns[0]
            masks[i] = added._masks[0]
        else:
            names.append(name)
            kinds.append(kind)
            cols.append(added._columns[0])
            masks.append(added._masks[0])
        return PatientFrame(names, kinds, cols, masks)

    def rename(self, mapping):
        return PatientFrame(
            [mapping.get(n, n) for n in self._names],
            self._kinds,
            [c.copy() for c in self._columns],
            [m.copy() for m in self._masks],
        )

    def sort_by(self, names):
        """Stable ascending sort; masked cells order last within each level."""
        order = np.arange(self.n_rows)
        for name in reversed(names):
            i = self._col(name)
            col, m = self._columns[i], self._masks[i]
            if self._kinds[i] == "str":
                sub = sorted(range(len(order)), key=lambda r: (bool(m[order[r]]), str(col[order[r]])))
                order = order[np.asarray(sub, dtype=int)]
            else:
                vals = np.where(m[order], np.inf, np.nan_to_num(col[order], nan=np.inf))
                order = order[np.argsort(vals, kind="stable")]
        return self.take(order)

    def equals(self, other):
        if self._names != other._names or self._kinds != other._kinds:
            return False
        if self.n_rows != other.n_rows:
            return False
        for i in range(self.n_cols):
            if not np.array_equal(self._masks[i], other._masks[i]):
                return False
            a, b = self._columns[i], other._columns[i]
            live = ~self._masks[i]
            if self._kinds[i] == "str":
                if not all(a[r] == b[r] for r in np.flatnonzero(live)):
                    return False
            else:
                if not np.array_equal(a[live], b[live]):
                    return False
        return True


# --- CSV round trip ---


def _parse_cell(text, kind):
    """Returns (value, missing). Unparseable numerics become missing, never zero."""
    if kind == "str":
        return text, False
    if text == "":
        return np.nan, True
    try:
        if kind == "time":
            return parse_time(text), False
        if kind == "int":
            return float(int(float(text))), False
        return float(text), False
    except (ValueError, OverflowError):
        return np.nan, True


def read_csv(path, schema):
    """Read a CSV into a PatientFrame.

    ``schema`` is [(name, kind), ...]; file columns not in the schema are
    ignored, schema columns absent from the header raise MissingColumn.
    Blank cells are missing. Row order is preserved.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise IoFailure(f"{path}: empty file, no header") from None
            positions = {}
            for name, _ in schema:
                if name not in header:
                    raise MissingColumn(name)
                positions[name] = header.index(name)
            rows = list(reader)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc

    spec = []
    for name, kind in schema:
        j = positions[name]
        vals, miss = [], []
        for row in rows:
            text = row[j] if j < len(row) else ""
            v, m = _parse_cell(text, kind)
            vals.append(v)
            miss.append(m)
        if kind == "str":
            spec.append((name, kind, vals, miss))
        else:
            spec.append((name, kind, np.array(vals, dtype=float), np.array(miss, dtype=bool)))
    return PatientFrame.from_columns(spec)


def _format_cell(value, missing, kind):
    if missing:
        return ""
    if kind == "str":
        return str(value)
    if kind == "int":
        return str(int(round(float(value))))
    if kind == "time":
        return format_time(value)
    v = float(value)
    if math.isfinite(v) and v == int(v) and abs(v) < 1e15:
        return repr(v)
    return repr(v)


def write_csv(frame, path):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(frame.names)
            cols = [frame._columns[i] for i in range(frame.n_cols)]
            masks = [frame._masks[i] for i in range(frame.n_cols)]
            kinds = frame._kinds
            for r in range(frame.n_rows):
                writer.writerow([
                    _format_cell(cols[c][r], masks[c][r], kinds[c])
                    for c in range(frame.n_cols)
                ])
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def schema_of(frame):
    return [(n, frame.kind(n)) for n in frame.names]


# --- joins ---


def _key_tuple(frame, keys, row):
    out = []
    for k in keys:
        i = frame._col(k)
        if frame._masks[i][row]:
            return None
        v = frame._columns[i][row]
        out.append(str(v) if frame._kinds[i] == "str" else float(v))
    return tuple(out)


def join(left, right, spec):
    """Deterministic hash join on shared key columns.

    Inner join drops unmatched left rows; left join keeps them with every
    right-side cell masked. Right key columns are dropped (values equal the
    left's by construction); other right columns colliding with a left name
    get a ``_r`` suffix. Rows with a masked key never match.
    """
    for k in spec.keys:
        if not left.has_column(k):
            raise KeyMissing(f"left frame lacks key {k!r}")
        if not right.has_column(k):
            raise KeyMissing(f"right frame lacks key {k!r}")

    rindex = {}
    for r in range(right.n_rows):
        kt = _key_tuple(right, spec.keys, r)
        if kt is not None:
            rindex.setdefault(kt, []).append(r)

    left_rows, right_rows = [], []
    for l in range(left.n_rows):
        kt = _key_tuple(left, spec.keys, l)
        matches = rindex.get(kt, []) if kt is not None else []
        if matches:
            for r in matches:
                left_rows.append(l)
                right_rows.append(r)
        elif spec.kind == "left":
            left_rows.append(l)
            right_rows.append(-1)

    left_rows = np.asarray(left_rows, dtype=int)
    right_rows = np.asarray(right_rows, dtype=int)
    unmatched = right_rows < 0
    safe_right = np.where(unmatched, 0, right_rows)

    names = list(left._names)
    kinds = list(left._kinds)
    cols = [c[left_rows] for c in left._columns]
    masks = [m[left_rows] for m in left._masks]

    taken = set(names)
    for i, rname in enumerate(right._names):
        if rname in spec.keys:
            continue
        out_name = rname
        while out_name in taken:
            out_name = out_name + "_r"
        taken.add(out_name)
        vals = right._columns[i][safe_right]
        mask = right._masks[i][safe_right] | unmatched
        if right._kinds[i] == "str":
            vals = vals.copy()
            vals[unmatched] = ""
        else:
            vals = vals.astype(float)
            vals[unmatched] = np.nan
        names.append(out_name)
        kinds.append(right._kinds[i])
        cols.append(vals)
        masks.append(mask)
    return PatientFrame(names, kinds, cols, masks)


# --- grouped statistics ---

STAT_FUNCS = ("mean", "min", "max")


def aggregate_by_key(frame, key, stats, columns=None):
    """One output row per key value; masked cells never enter a statistic.

    ``columns`` defaults to every 'num' column except the key. A group with
    all cells masked yields a masked statistic. Group order follows first
    appearance in the input.
    """
    for s in stats:
        if s not in STAT_FUNCS:
            raise ValueError(f"unknown stat {s!r}")
    ki = frame._col(key)
    if columns is None:
        columns = [n for n, k in zip(frame._names, frame._kinds) if k == "num" and n != key]
    for name in columns:
        if frame.kind(name) not in ("num", "int", "time"):
            raise NonNumericColumn(name)

    kvals, kmask = frame._columns[ki], frame._masks[ki]
    group_ids, order = {}, []
    rows_of = []
    for r in range(frame.n_rows):
        if kmask[r]:
            continue
        kv = str(kvals[r]) if frame._kinds[ki] == "str" else float(kvals[r])
        if kv not in group_ids:
            group_ids[kv] = len(order)
            order.append(r)
            rows_of.append([])
        rows_of[group_ids[kv]].append(r)

    n_groups = len(order)
    out = [(key, frame._kinds[ki], frame._columns[ki][np.asarray(order, dtype=int)]
            if n_groups else np.array([], dtype=frame._columns[ki].dtype),
            np.zeros(n_groups, dtype=bool))]
    for name in columns:
        ci = frame._col(name)
        col, cmask = frame._columns[ci], frame._masks[ci]
        for stat in stats:
            vals = np.full(n_groups, np.nan)
            miss = np.ones(n_groups, dtype=bool)
            for gi in range(n_groups):
                rows = np.asarray(rows_of[gi], dtype=int)
                live = rows[~cmask[rows]]
                if live.size == 0:
                    continue
                v = col[live].astype(float)
                if stat == "mean":
                    vals[gi] = v.mean()
                elif stat == "min":
                    vals[gi] = v.min()
                else:
                    vals[gi] = v.max()
                miss[gi] = False
            out.append((f"{name}_{stat}", "num", vals, miss))
    return PatientFrame.from_columns(out)

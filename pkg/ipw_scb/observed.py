"""Class for managing observed (delta, delta*X, Y) samples and their CSV files."""

import os
import warnings

import numpy as np
import pandas as pd

from .errors import DiscardedCovariateWarning, SchemaError

_COLUMNS = ["delta", "x", "y"]
_FLOAT_FORMAT = "%.17g"


def _parseFloats(values):
    """Parse a column of strings; unparseable or empty entries become NaN."""
    values = pd.Series(values, dtype=object)
    parsed = np.full(len(values), np.nan)
    numeric = pd.to_numeric(values, errors="coerce").notna().to_numpy()
    # to_numeric screens; the values themselves use the correctly rounded conversion
    parsed[numeric] = values[numeric].to_numpy().astype(np.float64)
    return parsed


class ObservedSample:
    """Triples (delta_i, delta_i*X_i, Y_i); X is NaN wherever delta is 0."""

    def __init__(self, delta=None, x=None, y=None, filename=None):
        self.rows = np.zeros(0, dtype=np.int64)
        self._delta = np.zeros(0, dtype=np.int8)
        self._x = np.zeros(0)
        self._y = np.zeros(0)

        if filename:
            self.read(filename)
        elif delta is not None:
            self.setData(delta, x, y)


    def __str__(self):
        return "{0}: n={1}, n_complete={2}".format(self.__class__.__name__, self.n, self.n_complete)


    def __len__(self):
        return self.n


    @property
    def delta(self):
        """Missingness indicators, 1 where X is observed."""
        return self._delta


    @property
    def x(self):
        return self._x


    @property
    def y(self):
        return self._y


    @property
    def n(self):
        return len(self._y)


    @property
    def complete(self):
        """Boolean mask of complete cases."""
        return self._delta == 1


    @property
    def n_complete(self):
        return int(np.count_nonzero(self._delta))


    @property
    def r_n(self):
        """Complete-case ratio n_complete/n."""
        return self.n_complete / self.n


    @property
    def x_complete(self):
        return self._x[self.complete]


    @property
    def y_complete(self):
        return self._y[self.complete]


    def setData(self, delta, x, y, rows=None):
        """Set all three columns at once, enforcing x present iff delta = 1."""
        delta = np.asarray(delta)
        y = np.asarray(y, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64) if x is not None else np.full(len(y), np.nan)
        if not (delta.ndim == x.ndim == y.ndim == 1 and len(delta) == len(x) == len(y)):
            raise ValueError("ObservedSample columns must be 1D arrays of equal length.")
        if not np.all((delta == 0) | (delta == 1)):
            raise ValueError("ObservedSample.delta must contain only 0 and 1.")
        delta = delta.astype(np.int8)
        if np.any(~np.isfinite(y)):
            raise ValueError("ObservedSample.y must be finite everywhere.")
        if np.any(~np.isfinite(x[delta == 1])):
            raise ValueError("ObservedSample.x must be finite wherever delta = 1.")
        if not np.any(delta == 1):
            raise ValueError("ObservedSample needs at least one complete case.")
        self._delta = delta
        self._x = np.where(delta == 1, x, np.nan)
        self._y = y
        self.rows = np.arange(2, len(y) + 2) if rows is None else np.asarray(rows)


    def completeCaseSample(self):
        """The complete cases alone, treated as a fully observed sample."""
        mask = self.complete
        return ObservedSample(
            delta=np.ones(int(mask.sum()), dtype=np.int8),
            x=self._x[mask],
            y=self._y[mask])


    def __readHeader(self, frame):
        columns = [str(c).strip() for c in frame.columns]
        if columns != _COLUMNS:
            raise SchemaError("header must be 'delta,x,y', got '{0}'".format(",".join(columns)), line=1)


    def __readBody(self, frame):
        # one frame row per file line, header on line 1
        frame = frame.fillna("").apply(lambda column: column.str.strip())
        lines = np.arange(len(frame)) + 2
        empty = (frame == "").all(axis=1).to_numpy()
        if empty.all():
            raise SchemaError("no data rows in file")
        last = int(np.flatnonzero(~empty)[-1]) + 1
        frame, lines, empty = frame.iloc[:last], lines[:last], empty[:last]
        if empty.any():
            raise SchemaError("empty row", line=int(lines[empty][0]))

        raw_delta = frame["delta"]
        raw_x = frame["x"]
        raw_y = frame["y"]

        delta = _parseFloats(raw_delta)
        bad = ~np.isin(delta, (0, 1))
        if bad.any():
            raise SchemaError("delta must be 0 or 1", line=int(lines[bad][0]))

        y = _parseFloats(raw_y)
        bad = ~np.isfinite(y)
        if bad.any():
            raise SchemaError("y is required on every row", line=int(lines[bad][0]))

        x_present = raw_x != ""
        x = np.where(x_present, _parseFloats(raw_x), np.nan)
        bad = (delta == 1) & ~np.isfinite(x)
        if bad.any():
            raise SchemaError("delta=1 requires a numeric x", line=int(lines[bad][0]))

        discarded = (delta == 0) & x_present.to_numpy()
        if discarded.any():
            warnings.warn(
                "x given on {0} rows with delta=0 (first at line {1}); discarded".format(
                    int(discarded.sum()), int(lines[discarded][0])),
                DiscardedCovariateWarning)

        if not np.any(delta == 1):
            raise SchemaError("no complete cases in file")
        self.setData(delta, x, y, rows=lines)


    def read(self, filename):
        """Read a delta,x,y CSV file."""
        if not os.path.isfile(filename):
            raise SchemaError("no such file: {0}".format(filename))
        frame = pd.read_csv(
            filename, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8")
        self.__readHeader(frame)
        self.__readBody(frame)


    def toFrame(self):
        return pd.DataFrame({"delta": self._delta, "x": self._x, "y": self._y})


    def write(self, filename):
        """Write a delta,x,y CSV file; x is blank on incomplete rows."""
        root_dir = os.path.split(filename)[0]
        if root_dir and not os.path.exists(root_dir):
            os.makedirs(root_dir)
        self.toFrame().to_csv(filename, index=False, float_format=_FLOAT_FORMAT, na_rep="")

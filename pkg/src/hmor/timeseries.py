"""Multichannel sampled waveforms and their CSV form.

A TimeSeries is the unit of exchange between the stimulus generators, the
full-order bench, the trained models, and the CLI: a strictly increasing
timestamp vector plus one named value column per channel. The CSV form is
plain text, header ``t,<ch1>,<ch2>,...``, with every float written in
shortest round-trip notation so that a write/read cycle is bit-exact (this
always carries at least the 12 significant digits the interchange format
requires).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TimeSeries:
    """Sampled multichannel waveform.

    Attributes
    ----------
    t : ndarray, shape (N,)
        Sample times in seconds, strictly increasing.
    values : ndarray, shape (N, C)
        One column per channel.
    names : tuple of str
        Channel names, length C.
    """

    t: np.ndarray
    values: np.ndarray
    names: tuple = field(default=())

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if t.ndim != 1 or v.shape[0] != t.shape[0]:
            raise ValueError(
                f"shape mismatch: t has {t.shape}, values has {v.shape}"
            )
        if t.size > 1 and not np.all(np.diff(t) > 0):
            k = int(np.argmin(np.diff(t)))
            raise ValueError(f"timestamps not strictly increasing near index {k}")
        names = tuple(self.names) if self.names else tuple(
            f"ch{i+1}" for i in range(v.shape[1])
        )
        if len(names) != v.shape[1]:
            raise ValueError(
                f"{len(names)} names for {v.shape[1]} channels"
            )
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "names", names)

    def __len__(self):
        return self.t.shape[0]

    def channel(self, name):
        """Return one channel as a 1-D array."""
        try:
            idx = self.names.index(name)
        except ValueError:
            raise KeyError(f"no channel {name!r}; have {self.names}") from None
        return self.values[:, idx]

    def with_channels(self, names):
        """Subset/reorder channels by name."""
        idx = [self.names.index(n) for n in names]
        return TimeSeries(self.t, self.values[:, idx], tuple(names))


def write_csv(series, path):
    """Write a TimeSeries as CSV with shortest round-trip floats."""
    with open(path, "w") as fh:
        fh.write("t," + ",".join(series.names) + "\n")
        for k in range(len(series)):
            row = [repr(float(series.t[k]))]
            row += [repr(float(x)) for x in series.values[k]]
            fh.write(",".join(row) + "\n")


def read_csv(path):
    """Read a TimeSeries written by write_csv (or any t-first CSV)."""
    with open(path) as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if not cols or cols[0] != "t":
            raise ValueError(f"{path}: expected header starting with 't', got {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(cols):
        raise ValueError(
            f"{path}: header names {len(cols)} columns, rows have {data.shape[1]}"
        )
    return TimeSeries(data[:, 0], data[:, 1:], tuple(cols[1:]))

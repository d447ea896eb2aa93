"""Static DC current map: a trilinear lookup table over port voltages.

The table stores the three port currents on a Cartesian grid of
(V1, V2, V3) nodes and evaluates them with piecewise-trilinear
interpolation. Grid axes must be strictly increasing but need not be
uniform, so resolution can be spent where the device actually moves.
Interpolation is exact at nodes and for any globally trilinear function,
and is second-order accurate in the cell spacing for smooth data.

The map also exposes the lifted input the dynamic block consumes: the
three interpolated currents followed by their elementwise squares.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import GridDataError, OutOfDomainError

UNITS = {"voltage": "V", "current": "A"}


def _check_axes(axes):
    if len(axes) != 3:
        raise ValueError(f"need 3 axes, got {len(axes)}")
    out = []
    for k, a in enumerate(axes):
        a = np.asarray(a, dtype=float)
        if a.ndim != 1 or a.size < 2:
            raise ValueError(f"axis {k} needs at least 2 nodes, got shape {a.shape}")
        if not np.all(np.diff(a) > 0):
            raise ValueError(f"axis {k} is not strictly increasing")
        out.append(a)
    return tuple(out)


@dataclass(frozen=True)
class DcTable:
    """Trilinear DC map: three current channels on a voltage grid.

    axes : tuple of three strictly increasing 1-D arrays (volts).
    currents : ndarray, shape (K1, K2, K3, 3), amperes; last axis is
        (i1, i2, i3), currents positive into the device.
    """

    axes: tuple
    currents: np.ndarray

    def __post_init__(self):
        axes = _check_axes(self.axes)
        cur = np.asarray(self.currents, dtype=float)
        want = (axes[0].size, axes[1].size, axes[2].size, 3)
        if cur.shape != want:
            raise ValueError(f"currents shape {cur.shape}, expected {want}")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "currents", cur)

    @property
    def shape(self):
        return tuple(a.size for a in self.axes)

    def bounds(self):
        return [(a[0], a[-1]) for a in self.axes]


def locate_cell(axes, v):
    """Map points to (cell index, local coordinate) per axis.

    v : array (..., 3) of voltages already inside the grid box.
    Returns (idx, loc): integer cell indices (..., 3) and local coordinates
    (..., 3) in [0, 1]. A query exactly on an interior node belongs to the
    lower-index cell (local coordinate exactly 1.0), so interpolated values
    at nodes reproduce stored samples bit-for-bit.
    """
    v = np.asarray(v, dtype=float)
    idx = np.empty(v.shape, dtype=np.intp)
    loc = np.empty(v.shape, dtype=float)
    for k in range(3):
        a = axes[k]
        i = np.searchsorted(a, v[..., k], side="left") - 1
        i = np.clip(i, 0, a.size - 2)
        idx[..., k] = i
        loc[..., k] = (v[..., k] - a[i]) / (a[i + 1] - a[i])
    return idx, loc


def _resolve_domain(table, v, out_of_domain):
    v = np.asarray(v, dtype=float)
    if out_of_domain == "clamp":
        lo = np.array([a[0] for a in table.axes])
        hi = np.array([a[-1] for a in table.axes])
        return np.clip(v, lo, hi)
    if out_of_domain != "error":
        raise ValueError(f"out_of_domain must be 'clamp' or 'error', got {out_of_domain!r}")
    for k in range(3):
        a = table.axes[k]
        vk = v[..., k]
        bad = (vk < a[0]) | (vk > a[-1])
        if np.any(bad):
            offender = float(np.asarray(vk)[bad].flat[0])
            raise OutOfDomainError(k, offender, float(a[0]), float(a[-1]))
    return v


def eval_idc(table, v, out_of_domain="error"):
    """Interpolate the three DC currents at voltage point(s) v.

    v : (3,) or (N, 3); returns matching (3,) or (N, 3).
    out_of_domain : 'error' raises OutOfDomainError, 'clamp' projects onto
        the grid box first.
    """
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    vv = _resolve_domain(table, np.atleast_2d(v), out_of_domain)
    idx, loc = locate_cell(table.axes, vv)
    i, j, k = idx[..., 0], idx[..., 1], idx[..., 2]
    tx, ty, tz = loc[..., 0], loc[..., 1], loc[..., 2]
    c = table.currents
    out = np.zeros(vv.shape[:-1] + (3,), dtype=float)
    for p in (0, 1):
        wx = tx if p else (1.0 - tx)
        for q in (0, 1):
            wy = ty if q else (1.0 - ty)
            for r in (0, 1):
                wz = tz if r else (1.0 - tz)
                w = wx * wy * wz
                out += w[..., None] * c[i + p, j + q, k + r, :]
    return out[0] if single else out


def eval_phi(table, v, out_of_domain="error"):
    """Lifted map input: (i1, i2, i3, i1^2, i2^2, i3^2).

    The squared channels are exactly the elementwise squares of the first
    three, always.
    """
    idc = eval_idc(table, v, out_of_domain)
    return np.concatenate([idc, idc * idc], axis=-1)


def phi_jacobian(table, v, rel_step=1e-4):
    """Jacobian of eval_phi at a single interior point, shape (6, 3).

    Central differences with per-axis step rel_step times the enclosing
    cell's spacing; falls back to a one-sided difference on whichever side
    stays inside the cell when the point sits near a face. Within a cell
    the interpolant is affine along each axis, so both stencils recover its
    partial derivatives essentially exactly.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a single (3,) point, got {v.shape}")
    for k in range(3):
        a = table.axes[k]
        if not (a[0] < v[k] < a[-1]):
            raise OutOfDomainError(k, float(v[k]), float(a[0]), float(a[-1]))
    idx, loc = locate_cell(table.axes, v)
    jac = np.empty((6, 3), dtype=float)
    for k in range(3):
        a = table.axes[k]
        i = idx[k]
        h = rel_step * (a[i + 1] - a[i])
        t = loc[k]
        lo_ok = t - rel_step >= 0.0
        hi_ok = t + rel_step <= 1.0
        vp = v.copy()
        vm = v.copy()
        if lo_ok and hi_ok:
            vp[k] += h
            vm[k] -= h
            denom = 2.0 * h
        elif hi_ok:
            vp[k] += h
            denom = h
        else:
            vm[k] -= h
            denom = h
        jac[:, k] = (eval_phi(table, vp) - eval_phi(table, vm)) / denom
    return jac


def build_table(samples, axes=None):
    """Assemble a DcTable from DC sweep samples.

    samples : (N, 6) array, columns (v1, v2, v3, i1, i2, i3).
    axes : optional explicit axes; derived from the unique voltage values
        per column when omitted.

    Every sample voltage must lie exactly on its axis, every grid node must
    appear exactly once; violations raise GridDataError naming the offending
    coordinates.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 6:
        raise ValueError(f"samples must be (N, 6), got {samples.shape}")
    if axes is None:
        axes = tuple(np.unique(samples[:, k]) for k in range(3))
    axes = _check_axes(axes)

    shape = tuple(a.size for a in axes)
    idx = np.empty((samples.shape[0], 3), dtype=np.intp)
    for k in range(3):
        a = axes[k]
        pos = np.searchsorted(a, samples[:, k])
        pos = np.clip(pos, 0, a.size - 1)
        off = a[pos] != samples[:, k]
        if np.any(off):
            bad = samples[np.argmax(off), :3]
            raise GridDataError(
                f"sample voltage not on axis {k}: (v1, v2, v3) = {tuple(bad)}"
            )
        idx[:, k] = pos

    flat = np.ravel_multi_index((idx[:, 0], idx[:, 1], idx[:, 2]), shape)
    counts = np.bincount(flat, minlength=int(np.prod(shape)))
    if np.any(counts > 1):
        where = np.unravel_index(int(np.argmax(counts > 1)), shape)
        coord = tuple(float(axes[k][where[k]]) for k in range(3))
        raise GridDataError(f"duplicate sample at grid node {coord}")
    if np.any(counts == 0):
        where = np.unravel_index(int(np.argmax(counts == 0)), shape)
        coord = tuple(float(axes[k][where[k]]) for k in range(3))
        raise GridDataError(f"missing sample at grid node {coord}")

    currents = np.empty(shape + (3,), dtype=float)
    currents.reshape(-1, 3)[flat] = samples[:, 3:]
    return DcTable(axes, currents)


def table_doc(table):
    """Table as a plain dict in the interchange layout (flat row-major,
    V1 slowest).  Floats survive json round trips bit-exactly because the
    json module emits shortest round-trip notation (up to 17 significant
    digits)."""
    return {
        "axes": [a.tolist() for a in table.axes],
        "currents": {
            name: table.currents[..., k].ravel(order="C").tolist()
            for k, name in enumerate(("i1", "i2", "i3"))
        },
        "units": dict(UNITS),
    }


def table_from_doc(doc, where="table document"):
    """Rebuild a DcTable from the interchange dict, validating shape and
    units."""
    try:
        axes = _check_axes([np.asarray(a, dtype=float) for a in doc["axes"]])
        units = doc["units"]
        cur = doc["currents"]
        flats = [np.asarray(cur[name], dtype=float) for name in ("i1", "i2", "i3")]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{where}: malformed table document ({exc})") from exc
    if units != UNITS:
        raise ValueError(f"{where}: expected units {UNITS}, got {units}")
    shape = tuple(a.size for a in axes)
    n = int(np.prod(shape))
    for name, flat in zip(("i1", "i2", "i3"), flats):
        if flat.size != n:
            raise ValueError(
                f"{where}: channel {name} has {flat.size} values, grid needs {n}"
            )
    currents = np.stack(
        [flat.reshape(shape, order="C") for flat in flats], axis=-1
    )
    return DcTable(axes, currents)


def to_json(table, path):
    """Write the table in the interchange format."""
    with open(path, "w") as fh:
        json.dump(table_doc(table), fh)
        fh.write("\n")


def from_json(path):
    """Read a table written by to_json."""
    with open(path) as fh:
        doc = json.load(fh)
    return table_from_doc(doc, where=str(path))

"""Deterministic self-contained SVG plots: series overlays with an error
panel, and Bode magnitude/phase pairs with a log frequency axis.

Everything is emitted with fixed formatting (two-decimal pixel coordinates,
sorted metadata keys), so a given input always produces identical bytes;
snapshot tests can diff the files directly.
"""

import json

import numpy as np

from .metrics import _resample

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W = 720
_PANE_H = 240
_ML, _MR, _MT, _MB = 72, 18, 34, 44


def _fmt_num(x):
    return f"{x:.6g}"


def _nice_ticks(lo, hi, target=6):
    if not np.isfinite(lo) or not np.isfinite(hi):
        lo, hi = 0.0, 1.0
    if lo == hi:
        pad = 0.5 if lo == 0.0 else 0.1 * abs(lo)
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / target
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if raw <= step:
            break
    first = np.ceil(lo / step) * step
    ticks = np.arange(first, hi + 0.5 * step, step)
    return lo, hi, ticks


def _log_ticks(lo, hi):
    lo = max(lo, 1e-30)
    hi = max(hi, lo * 10.0)
    d0 = int(np.floor(np.log10(lo)))
    d1 = int(np.ceil(np.log10(hi)))
    ticks = [10.0 ** d for d in range(d0, d1 + 1)]
    return 10.0 ** d0, 10.0 ** d1, np.asarray(ticks)


class _Pane:
    """One axes rectangle mapping data coordinates to pixels."""

    def __init__(self, top, xlim, ylim, logx=False):
        self.x0, self.x1 = _ML, _W - _MR
        self.y0, self.y1 = top + _MT, top + _MT + _PANE_H
        self.xlim, self.ylim, self.logx = xlim, ylim, logx

    def px(self, x):
        a, b = self.xlim
        if self.logx:
            a, b, x = np.log10(a), np.log10(b), np.log10(x)
        return self.x0 + (x - a) / (b - a) * (self.x1 - self.x0)

    def py(self, y):
        a, b = self.ylim
        return self.y1 - (y - a) / (b - a) * (self.y1 - self.y0)

    def polyline(self, x, y, color, dash=False):
        ok = np.isfinite(x) & np.isfinite(y)
        parts = []
        run = []
        for k in range(x.size):
            if ok[k]:
                run.append(f"{self.px(x[k]):.2f},{self.py(y[k]):.2f}")
            elif run:
                parts.append(run)
                run = []
        if run:
            parts.append(run)
        dash_attr = ' stroke-dasharray="6,4"' if dash else ""
        return "".join(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5"'
            f'{dash_attr} points="{" ".join(p)}"/>\n'
            for p in parts if len(p) >= 2
        )

    def frame(self, xticks, yticks, xlabel, ylabel, xtick_fmt=_fmt_num):
        out = [f'<rect x="{self.x0}" y="{self.y0}" width="{self.x1 - self.x0}" '
               f'height="{self.y1 - self.y0}" fill="none" stroke="#444"/>\n']
        for tx in xticks:
            if not (self.xlim[0] <= tx <= self.xlim[1]):
                continue
            p = self.px(tx)
            out.append(f'<line x1="{p:.2f}" y1="{self.y1}" x2="{p:.2f}" '
                       f'y2="{self.y1 + 5}" stroke="#444"/>\n')
            out.append(f'<text x="{p:.2f}" y="{self.y1 + 18}" font-size="11" '
                       f'text-anchor="middle">{xtick_fmt(tx)}</text>\n')
        for ty in yticks:
            if not (self.ylim[0] <= ty <= self.ylim[1]):
                continue
            p = self.py(ty)
            out.append(f'<line x1="{self.x0 - 5}" y1="{p:.2f}" x2="{self.x0}" '
                       f'y2="{p:.2f}" stroke="#444"/>\n')
            out.append(f'<text x="{self.x0 - 8}" y="{p + 4:.2f}" font-size="11" '
                       f'text-anchor="end">{_fmt_num(ty)}</text>\n')
        mid_x = 0.5 * (self.x0 + self.x1)
        out.append(f'<text x="{mid_x:.2f}" y="{self.y1 + 34}" font-size="12" '
                   f'text-anchor="middle">{xlabel}</text>\n')
        mid_y = 0.5 * (self.y0 + self.y1)
        out.append(f'<text x="16" y="{mid_y:.2f}" font-size="12" '
                   f'text-anchor="middle" transform="rotate(-90 16 {mid_y:.2f})">'
                   f'{ylabel}</text>\n')
        return "".join(out)

    def legend(self, entries):
        out = []
        y = self.y0 + 14
        for label, color, dash in entries:
            dash_attr = ' stroke-dasharray="6,4"' if dash else ""
            x = self.x1 - 150
            out.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 26}" y2="{y - 4}" '
                       f'stroke="{color}" stroke-width="1.5"{dash_attr}/>\n')
            out.append(f'<text x="{x + 32}" y="{y}" font-size="11">{label}</text>\n')
            y += 16
        return "".join(out)


def _finite_range(arrs, pad_frac=0.05):
    vals = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrs])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return 0.0, 1.0
    lo, hi = float(np.min(vals)), float(np.max(vals))
    if lo == hi:
        pad = 0.5 if lo == 0.0 else 0.1 * abs(lo)
    else:
        pad = pad_frac * (hi - lo)
    return lo - pad, hi + pad


def _document(panes_markup, height, title, stats):
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
            f'height="{height}" viewBox="0 0 {_W} {height}">\n'
            f'<metadata id="plot-stats">{json.dumps(stats, sort_keys=True)}'
            f'</metadata>\n'
            f'<rect width="{_W}" height="{height}" fill="#ffffff"/>\n'
            f'<text x="{_W // 2}" y="20" font-size="14" text-anchor="middle" '
            f'font-weight="bold">{title}</text>\n')
    return head + panes_markup + "</svg>\n"


def _pane_height():
    return _MT + _PANE_H + _MB


def _series_pane(top, t, cols, names, ylabel, dash_second=None):
    xlo, xhi, xticks = _nice_ticks(float(t[0]), float(t[-1]))
    ylo, yhi, yticks = _nice_ticks(*_finite_range(cols))
    pane = _Pane(top, (xlo, xhi), (ylo, yhi))
    body = pane.frame(xticks, yticks, "time [s]", ylabel)
    entries = []
    for k, (col, name) in enumerate(zip(cols, names)):
        color = _PALETTE[k % len(_PALETTE)]
        dash = dash_second is not None and dash_second[k]
        body += pane.polyline(np.asarray(t, dtype=float),
                              np.asarray(col, dtype=float), color, dash=dash)
        entries.append((name, color, dash))
    body += pane.legend(entries)
    return body


def plot_series(series, path, title="time series"):
    """One panel with every channel of a TimeSeries."""
    if len(series) < 2:
        raise ValueError("need at least 2 samples to plot")
    cols = [series.values[:, k] for k in range(len(series.names))]
    stats = {"channels": {n: {"min": float(np.min(c)), "max": float(np.max(c))}
                          for n, c in zip(series.names, cols)}}
    body = _series_pane(0, series.t, cols, series.names, "value")
    with open(path, "w") as fh:
        fh.write(_document(body, _pane_height(), title, stats))


def plot_overlay(reference, test, channels, path, title="reference vs model"):
    """Two panels: channel overlay (reference solid, test dashed) and the
    pointwise error test - reference on the shared grid."""
    if len(reference) < 2 or len(test) < 2:
        raise ValueError("need at least 2 samples to plot")
    channels = tuple(channels)
    rvals, tvals, resampled = _resample(reference, test)
    t = reference.t if not resampled else reference.t[
        (reference.t >= test.t[0]) & (reference.t <= test.t[-1])]
    cols, names, dashes, errs = [], [], [], []
    for name in channels:
        r = rvals[:, reference.names.index(name)]
        x = tvals[:, test.names.index(name)]
        cols += [r, x]
        names += [f"{name} ref", f"{name} model"]
        dashes += [False, True]
        errs.append(x - r)
    stats = {
        "resampled": resampled,
        "channels": {
            name: {"max_abs_error": float(np.max(np.abs(e)))}
            for name, e in zip(channels, errs)
        },
    }
    body = _series_pane(0, t, cols, names, "value", dash_second=dashes)
    body += _series_pane(_pane_height(), t, errs,
                         [f"{n} error" for n in channels], "error")
    with open(path, "w") as fh:
        fh.write(_document(body, 2 * _pane_height(), title, stats))


def plot_bode(ac, path, title="small-signal response"):
    """Magnitude (dB) and phase (degrees) panels on a log frequency axis."""
    f = np.asarray(ac.freqs, dtype=float)
    if f.size < 2:
        raise ValueError("need at least 2 frequency points to plot")
    stats = {"channels": {
        "mag_db": {"min": float(np.min(ac.mag_db)), "max": float(np.max(ac.mag_db))},
        "phase_deg": {"min": float(np.min(ac.phase_deg)),
                      "max": float(np.max(ac.phase_deg))},
    }}
    xlo, xhi, xticks = _log_ticks(float(f[0]), float(f[-1]))

    def xfmt(x):
        return f"1e{int(round(np.log10(x)))}"

    body = ""
    for row, (vals, label) in enumerate(
            [(ac.mag_db, "magnitude [dB]"), (ac.phase_deg, "phase [deg]")]):
        ylo, yhi, yticks = _nice_ticks(*_finite_range([vals]))
        pane = _Pane(row * _pane_height(), (xlo, xhi), (ylo, yhi), logx=True)
        body += pane.frame(xticks, yticks, "frequency [Hz]", label, xtick_fmt=xfmt)
        body += pane.polyline(f, np.asarray(vals, dtype=float), _PALETTE[0])
    with open(path, "w") as fh:
        fh.write(_document(body, 2 * _pane_height(), title, stats))


def emit_plot(data, style, path, title=None):
    """Dispatch on style: "series" (TimeSeries), "overlay"
    ((reference, test, channels) tuple), or "bode" (AC response)."""
    if style == "series":
        return plot_series(data, path, **({} if title is None else {"title": title}))
    if style == "overlay":
        reference, test, channels = data
        return plot_overlay(reference, test, channels, path,
                            **({} if title is None else {"title": title}))
    if style == "bode":
        return plot_bode(data, path, **({} if title is None else {"title": title}))
    raise ValueError(f"unknown plot style {style!r}")

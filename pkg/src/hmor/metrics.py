"""Per-channel error metrics between a reference and a test series."""

import dataclasses
import json

import numpy as np


@dataclasses.dataclass(frozen=True)
class MetricsReport:
    """Per-channel errors plus optional sweep bookkeeping.

    rel_l2 is ||test - ref||_2 / ||ref||_2 (inf when the reference channel
    is identically zero but the error is not).  resampled marks that the
    test series was linearly interpolated onto the reference timestamps.
    per_order_loss and runtime_s are filled by sweep-level reporting.
    """

    channels: tuple
    rmse: dict
    rel_l2: dict
    peak: dict
    resampled: bool = False
    per_order_loss: dict = dataclasses.field(default_factory=dict)
    runtime_s: float = 0.0

    def __post_init__(self):
        orders = list(self.per_order_loss)
        if orders != sorted(orders):
            raise ValueError(f"orders must be ascending, got {orders}")

    def to_json(self):
        doc = dataclasses.asdict(self)
        doc["channels"] = list(self.channels)
        doc["per_order_loss"] = {str(k): v for k, v in self.per_order_loss.items()}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _resample(reference, test):
    """Test values on the reference timestamps (linear interpolation),
    restricted to the overlap window.  Returns (reference values, test
    values, resampled flag) on the shared grid."""
    if np.array_equal(reference.t, test.t):
        return reference.values, test.values, False
    keep = (reference.t >= test.t[0]) & (reference.t <= test.t[-1])
    t = reference.t[keep]
    if t.size == 0:
        raise ValueError(
            f"no overlap: reference spans [{reference.t[0]!r}, {reference.t[-1]!r}], "
            f"test spans [{test.t[0]!r}, {test.t[-1]!r}]"
        )
    cols = [np.interp(t, test.t, test.values[:, k])
            for k in range(test.values.shape[1])]
    return reference.values[keep], np.column_stack(cols), True


def metrics(reference, test, channels=None):
    """Compare test against reference channel by channel.

    channels defaults to every reference channel; each must exist in both
    series.  When timestamps differ, test is resampled onto the reference
    grid over their overlap and the report is flagged.
    """
    if channels is None:
        channels = reference.names
    channels = tuple(channels)
    for name in channels:
        if name not in reference.names or name not in test.names:
            raise ValueError(f"channel {name!r} missing from one of the series")

    rvals, tvals, resampled = _resample(reference, test)

    rmse, rel, peak = {}, {}, {}
    for name in channels:
        r = rvals[:, reference.names.index(name)]
        x = tvals[:, test.names.index(name)]
        err = x - r
        rmse[name] = float(np.sqrt(np.mean(err**2)))
        peak[name] = float(np.max(np.abs(err)))
        nref = float(np.linalg.norm(r))
        nerr = float(np.linalg.norm(err))
        if nref > 0.0:
            rel[name] = nerr / nref
        else:
            rel[name] = 0.0 if nerr == 0.0 else float("inf")
    return MetricsReport(channels=channels, rmse=rmse, rel_l2=rel, peak=peak,
                         resampled=resampled)

"""Runtime for the reduced model: closed-loop transients with a capacitive
load, DC operating points, small-signal AC response, and model files.

The reduced model couples the static lookup table with the fitted linear
block.  At node 3 the reported current i3 charges the load capacitor, so the
closed loop is

    dx/dt  = A x + B phi(v1, v2, v3)
    dv3/dt = i3 / C_L,   i3 = [C x + D phi(v1, v2, v3)]_3

with v1, v2 imposed by the sources.  DC operating points are roots of the
table's third current channel along the V3 axis.
"""

import dataclasses
import hashlib
import json
import os

import numpy as np
from scipy.integrate import solve_ivp

from .dc_map import DcTable, eval_idc, eval_phi, phi_jacobian, table_doc, table_from_doc
from .errors import SolverError
from .lti_sim import StateSpace, frequency_response
from .timeseries import TimeSeries


@dataclasses.dataclass(frozen=True)
class HammersteinModel:
    """Static trilinear table feeding a low-order linear block."""

    table: DcTable
    ss: StateSpace
    metadata: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.ss.n_inputs != 6:
            raise ValueError(f"linear block must take 6 lifted inputs, got {self.ss.n_inputs}")
        if self.ss.n_outputs != 3:
            raise ValueError(f"linear block must emit 3 port currents, got {self.ss.n_outputs}")

    @property
    def order(self):
        return self.ss.order


@dataclasses.dataclass(frozen=True)
class OperatingPoint:
    v1: float
    v2: float
    v3: float
    residual: float
    multiple_roots: bool = False


def rom_transient(model, sources, load, v3_0=None, x0=None,
                  rtol=1e-8, atol=1e-10, out_of_domain="clamp"):
    """Integrate the reduced model against v1/v2 sources and a load cap.

    sources: TimeSeries with channels (v1, v2); values between samples are
    linearly interpolated.  v3_0 defaults to the DC operating point at the
    initial source voltages; x0 defaults to zero.  Outputs are sampled at
    the source timestamps.  out_of_domain "clamp" (default) projects
    excursions onto the table box; "error" makes them fatal.
    """
    if sources.names != ("v1", "v2"):
        raise ValueError(f"sources must have channels ('v1', 'v2'), got {sources.names}")
    t = sources.t
    v12 = sources.values
    n = model.order
    c_load = load.c_load
    a, b = model.ss.a, model.ss.b
    c3, d3 = model.ss.c[2], model.ss.d[2]

    if v3_0 is None:
        v3_0 = rom_dc_operating_point(model, v12[0, 0], v12[0, 1]).v3
    x_init = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    if x_init.shape != (n,):
        raise ValueError(f"x0 must have shape ({n},), got {x_init.shape}")

    def rhs(s, state):
        v1 = np.interp(s, t, v12[:, 0])
        v2 = np.interp(s, t, v12[:, 1])
        phi = eval_phi(model.table, np.array([v1, v2, state[n]]),
                       out_of_domain=out_of_domain)
        dx = a @ state[:n] + b @ phi
        i3 = c3 @ state[:n] + d3 @ phi
        return np.concatenate([dx, [i3 / c_load]])

    sol = solve_ivp(rhs, (t[0], t[-1]), np.concatenate([x_init, [v3_0]]),
                    method="RK45", t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise SolverError(f"transient integration failed: {sol.message}")

    x = sol.y[:n].T
    v3 = sol.y[n]
    volts = np.column_stack([v12, v3])
    phi = eval_phi(model.table, volts, out_of_domain=out_of_domain)
    currents = x @ model.ss.c.T + phi @ model.ss.d.T
    return TimeSeries(
        t=t,
        values=np.column_stack([volts, currents]),
        names=("v1", "v2", "v3", "i1", "i2", "i3"),
    )


def _i3_of_v3(model, v1, v2, v3):
    v = np.array([v1, v2, v3])
    return float(eval_idc(model.table, v)[2])


def rom_dc_operating_point(model, v1, v2, tol=1e-9):
    """Solve 0 = I_DC,3(v1, v2, V3) for V3 by bracketing bisection.

    Scans the table's V3 grid nodes for sign changes, takes the lowest-V3
    bracket (flagging multiplicity if more than one exists), and bisects
    until |i3| <= tol.  Raises if the current never changes sign, reporting
    the endpoint currents.
    """
    axis = model.table.axes[2]
    cur = np.array([_i3_of_v3(model, v1, v2, v) for v in axis])

    zero_nodes = np.flatnonzero(cur == 0.0)
    sign = np.sign(cur)
    flips = np.flatnonzero(sign[:-1] * sign[1:] < 0.0)
    n_roots = zero_nodes.size + flips.size
    if n_roots == 0:
        raise SolverError(
            f"i3(V3) has no sign change on [{axis[0]!r}, {axis[-1]!r}] for "
            f"V1={v1!r}, V2={v2!r}: endpoint currents {cur[0]!r} A and {cur[-1]!r} A"
        )
    multiple = n_roots > 1

    first_zero = axis[zero_nodes[0]] if zero_nodes.size else np.inf
    first_flip = axis[flips[0]] if flips.size else np.inf
    if first_zero <= first_flip:
        v3 = float(first_zero)
        return OperatingPoint(v1=float(v1), v2=float(v2), v3=v3,
                              residual=0.0, multiple_roots=multiple)

    lo, hi = float(axis[flips[0]]), float(axis[flips[0] + 1])
    f_lo = cur[flips[0]]
    v3 = 0.5 * (lo + hi)
    f_mid = _i3_of_v3(model, v1, v2, v3)
    # interval floor guards against a tolerance below interpolation noise
    while abs(f_mid) > tol and (hi - lo) > 1e-15 * (axis[-1] - axis[0]):
        if (f_mid < 0.0) == (f_lo < 0.0):
            lo, f_lo = v3, f_mid
        else:
            hi = v3
        v3 = 0.5 * (lo + hi)
        f_mid = _i3_of_v3(model, v1, v2, v3)
    if abs(f_mid) > tol:
        raise SolverError(
            f"bisection stalled at V3={v3!r} with residual {f_mid!r} A (> {tol!r} A)"
        )
    return OperatingPoint(v1=float(v1), v2=float(v2), v3=float(v3),
                          residual=float(f_mid), multiple_roots=multiple)


@dataclasses.dataclass(frozen=True)
class AcResponse:
    """v1 -> v3 small-signal transfer: complex values plus Bode arrays."""

    freqs: np.ndarray
    h: np.ndarray
    mag_db: np.ndarray
    phase_deg: np.ndarray


def rom_ac(model, op, load, freqs):
    """Linearized v1 -> v3 response around an operating point.

    The device admittance is Y(jw) = G(jw) J with G the linear block's
    frequency response and J the lifting Jacobian at the operating point.
    With v2~ = 0 and v1~ = 1, KCL at the loaded node gives
    (jw C_L - Y33) v3~ = Y31.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    jac = phi_jacobian(model.table, np.array([op.v1, op.v2, op.v3]))
    g = frequency_response(model.ss, freqs)
    y = g @ jac
    den = 1j * 2.0 * np.pi * freqs * load.c_load - y[:, 2, 2]
    bad = np.flatnonzero(den == 0.0)
    if bad.size:
        raise SolverError(f"singular load equation at f = {freqs[bad[0]]!r} Hz")
    h = y[:, 2, 0] / den
    with np.errstate(divide="ignore"):
        mag_db = 20.0 * np.log10(np.abs(h))
    return AcResponse(freqs=freqs, h=h, mag_db=mag_db,
                      phase_deg=np.degrees(np.angle(h)))


def dc_transfer_curve(model, v1_grid, v2, tol=1e-9):
    """Sweep rom_dc_operating_point over v1_grid at fixed v2.

    Returns an (K, 2) array of (V1, V3) pairs.
    """
    out = np.empty((len(v1_grid), 2))
    for k, v1 in enumerate(v1_grid):
        op = rom_dc_operating_point(model, v1, v2, tol=tol)
        out[k] = (op.v1, op.v3)
    return out


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def save_model(model, path, table_path=None):
    """Write the model as JSON; matrices round-trip bit-exactly.

    With table_path the table is written separately and referenced by path
    plus content hash; otherwise it is embedded.
    """
    doc = {
        "n": model.order,
        "A": model.ss.a.tolist(),
        "B": model.ss.b.tolist(),
        "C": model.ss.c.tolist(),
        "D": model.ss.d.tolist(),
        "meta": dict(model.metadata),
    }
    if table_path is None:
        doc["table"] = table_doc(model.table)
    else:
        with open(table_path, "w") as fh:
            json.dump(table_doc(model.table), fh)
            fh.write("\n")
        doc["table_path"] = os.path.basename(table_path)
        doc["table_sha256"] = _sha256(table_path)
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path):
    """Read a model written by save_model, verifying any table hash."""
    with open(path) as fh:
        doc = json.load(fh)
    try:
        n = int(doc["n"])
        mats = {k: np.asarray(doc[k], dtype=float) for k in ("A", "B", "C", "D")}
        meta = dict(doc.get("meta", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed model document ({exc})") from exc
    if mats["A"].shape != (n, n):
        raise ValueError(f"{path}: A has shape {mats['A'].shape}, expected ({n}, {n})")
    if "table" in doc:
        table = table_from_doc(doc["table"], where=f"{path} (embedded table)")
    elif "table_path" in doc:
        tpath = os.path.join(os.path.dirname(os.path.abspath(path)), doc["table_path"])
        want = doc.get("table_sha256")
        got = _sha256(tpath)
        if want != got:
            raise ValueError(
                f"{tpath}: table hash mismatch (expected {want}, file has {got})"
            )
        with open(tpath) as fh:
            table = table_from_doc(json.load(fh), where=tpath)
    else:
        raise ValueError(f"{path}: model document has neither table nor table_path")
    ss = StateSpace(a=mats["A"], b=mats["B"], c=mats["C"], d=mats["D"])
    return HammersteinModel(table=table, ss=ss, metadata=meta)

"""Sequential identification of the dynamic block.

Stage 1 (the DC table) is taken as a finished, immutable input.  Stage 2
fits the continuous LTI block (A, B, C, D) that maps the lifted DC
currents to the recorded port currents, by limited-memory quasi-Newton
minimization of a weighted mean-square simulation loss with exact adjoint
gradients.

Internally the problem is nondimensionalized: time by the geometric
center of the initialization frequency band, inputs and targets by their
per-channel RMS.  The optimizer only ever sees O(1) quantities; returned
matrices are mapped back to physical units, and the reported losses are
recomputed in physical units so they match a later re-simulation bit for
bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .dc_map import eval_phi
from .errors import SolverError
from .lti_sim import StateSpace, simulate, simulate_with_grad
from .timeseries import TimeSeries

__all__ = [
    "TrainingSet",
    "FitConfig",
    "FitResult",
    "assemble_training",
    "initial_guess",
    "fit",
    "order_sweep",
]

PHI_NAMES = ("phi1", "phi2", "phi3", "phi4", "phi5", "phi6")
CURRENT_NAMES = ("i1", "i2", "i3")


@dataclass(frozen=True)
class TrainingSet:
    """Lifted inputs and current targets on one shared time grid."""

    phi_inputs: TimeSeries
    targets: TimeSeries
    provenance: dict

    def __post_init__(self):
        if self.phi_inputs.values.shape[1] != 6:
            raise ValueError("phi_inputs must have 6 channels")
        if self.targets.values.shape[1] != 3:
            raise ValueError("targets must have 3 channels")
        if not np.array_equal(self.phi_inputs.t, self.targets.t):
            raise ValueError("phi_inputs and targets must share timestamps")

    def __len__(self):
        return self.phi_inputs.t.size


@dataclass(frozen=True)
class FitConfig:
    """Knobs for one fit: state dimension, restart count, optimizer stops,
    seed, stability handling, and per-channel loss weights (None = 1/RMS^2
    with zero-RMS channels promoted to the largest finite weight)."""

    n: int
    restarts: int = 8
    max_iter: int = 300
    grad_tol: float = 1e-10
    loss_tol: float = 0.0
    seed: int = 0
    stability: str = "reject"
    weights: tuple | None = None
    f_lo: float | None = None
    f_hi: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if self.stability not in ("reject", "keep"):
            raise ValueError(f"stability must be 'reject' or 'keep', got {self.stability!r}")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != 3 or any(x < 0 for x in w):
                raise ValueError("weights must be 3 nonnegative numbers")
            object.__setattr__(self, "weights", w)

    def to_json(self):
        doc = {k: getattr(self, k) for k in (
            "n", "restarts", "max_iter", "grad_tol", "loss_tol", "seed",
            "stability", "weights", "f_lo", "f_hi")}
        if doc["weights"] is not None:
            doc["weights"] = list(doc["weights"])
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if "weights" in doc and doc["weights"] is not None:
            doc["weights"] = tuple(doc["weights"])
        return cls(**doc)


@dataclass(frozen=True, eq=False)
class FitResult:
    """Best model of a multi-restart fit plus per-restart diagnostics."""

    ss: StateSpace
    loss: float
    losses: tuple
    iterations: tuple
    statuses: tuple
    spectral_abscissa: float
    restart_index: int
    n: int
    seed: int
    unstable_rejected: bool = False
    no_stable_restart: bool = False

    def summary_json(self):
        doc = {
            "n": self.n,
            "seed": self.seed,
            "loss": self.loss,
            "losses": list(self.losses),
            "iterations": list(self.iterations),
            "statuses": list(self.statuses),
            "spectral_abscissa": self.spectral_abscissa,
            "restart_index": self.restart_index,
            "unstable_rejected": self.unstable_rejected,
            "no_stable_restart": self.no_stable_restart,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def assemble_training(table, recorded, mode="strict", provenance=None):
    """Lift a recorded (v1,v2,v3,i1,i2,i3) series through the DC table.

    mode "strict" raises on the first sample whose voltages leave the table
    box (reporting its timestamp); "clamp" projects onto the box.
    """
    want = ("v1", "v2", "v3", "i1", "i2", "i3")
    if recorded.names != want:
        raise ValueError(f"recorded series must have channels {want}, got {recorded.names}")
    if len(recorded) < 2:
        raise ValueError("recorded series must have at least 2 samples")
    v = recorded.values[:, :3]
    if mode == "strict":
        box = np.asarray(table.bounds())
        inside = np.all((v >= box[None, :, 0]) & (v <= box[None, :, 1]), axis=1)
        if not np.all(inside):
            k = int(np.argmin(inside))
            raise ValueError(
                f"voltages leave the table box at t = {recorded.t[k]!r} "
                f"(sample {k}: {v[k].tolist()})"
            )
    phi = eval_phi(table, v, out_of_domain="clamp" if mode == "clamp" else "error")
    return TrainingSet(
        phi_inputs=TimeSeries(t=recorded.t, values=phi, names=PHI_NAMES),
        targets=TimeSeries(t=recorded.t, values=recorded.values[:, 3:], names=CURRENT_NAMES),
        provenance=dict(provenance or {}),
    )


def _default_weights(targets):
    """1/RMS^2 per channel; silent channels get the largest finite weight
    so a fit is still pulled toward zero there, and all-silent data falls
    back to unit weights."""
    ms = np.mean(targets**2, axis=0)
    w = np.zeros(3)
    live = ms > 0.0
    w[live] = 1.0 / ms[live]
    if not np.any(live):
        return np.ones(3)
    w[~live] = np.max(w[live])
    return w


def _derive_band(t):
    span = t[-1] - t[0]
    dt_min = np.min(np.diff(t))
    f_hi = 1.0 / (2.0 * np.pi * dt_min)
    f_lo = 1.0 / (2.0 * np.pi * span)
    if not f_lo < f_hi:
        f_lo = f_hi * 1e-3
    return f_lo, f_hi


def initial_guess(train, n, f_lo, f_hi, seed, jitter=0.0):
    """Seeded starting point: A diagonal with negative eigenvalues
    log-spaced over [2 pi f_lo, 2 pi f_hi] (optionally log-jittered),
    B small random, and (C, D) solved by ordinary least squares on the
    states that (A, B) produces, so the start is never worse than C = D = 0.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    # seed may be an int or a sequence of ints (restart streams)
    rng = np.random.default_rng(list(np.atleast_1d(seed)) + [n])
    rates = 2.0 * np.pi * np.geomspace(f_lo, f_hi, n)
    if jitter > 0.0:
        rates = rates * np.exp(jitter * rng.standard_normal(n))
    a = np.diag(-rates)

    t = train.phi_inputs.t
    phi = train.phi_inputs.values
    tgt = train.targets.values
    w_c = 2.0 * np.pi * np.sqrt(f_lo * f_hi)
    s_u = np.sqrt(np.mean(phi**2, axis=0))
    s_u[s_u == 0.0] = 1.0
    b = 0.3 * w_c * rng.standard_normal((n, 6)) / s_u[None, :]

    probe = StateSpace(a=a, b=b, c=np.zeros((3, n)), d=np.zeros((3, 6)))
    _, x = simulate(probe, t, phi, return_states=True)
    design = np.column_stack([x, phi])
    col = np.sqrt(np.mean(design**2, axis=0))
    col[col == 0.0] = 1.0
    coef, _, _, _ = np.linalg.lstsq(design / col[None, :], tgt, rcond=None)
    coef = coef / col[:, None]
    return StateSpace(a=a, b=b, c=coef[:n].T, d=coef[n:].T)


def _scale_ss(ss, w_c, s_u, s_y):
    return StateSpace(
        a=ss.a / w_c,
        b=ss.b * s_u[None, :] / w_c,
        c=ss.c / s_y[:, None],
        d=ss.d * s_u[None, :] / s_y[:, None],
    )


def _unscale_ss(ss, w_c, s_u, s_y):
    return StateSpace(
        a=ss.a * w_c,
        b=ss.b * w_c / s_u[None, :],
        c=ss.c * s_y[:, None],
        d=ss.d * s_y[:, None] / s_u[None, :],
    )


def _pack(ss):
    return np.concatenate([ss.a.ravel(), ss.b.ravel(), ss.c.ravel(), ss.d.ravel()])


def _unpack(theta, n):
    sizes = [n * n, n * 6, 3 * n, 18]
    parts = np.split(theta, np.cumsum(sizes)[:-1])
    return StateSpace(
        a=parts[0].reshape(n, n),
        b=parts[1].reshape(n, 6),
        c=parts[2].reshape(3, n),
        d=parts[3].reshape(3, 6),
    )


def fit(train, cfg, warm_start=None):
    """Multi-restart quasi-Newton fit of the dynamic block.

    warm_start: optional StateSpace (physical units) run as one extra
    restart after the cfg.restarts seeded ones; order_sweep uses it to
    hand a smaller-order optimum to the next order.
    """
    t = train.phi_inputs.t
    phi = train.phi_inputs.values
    tgt = train.targets.values
    n = cfg.n

    w_raw = np.array(cfg.weights) if cfg.weights is not None else _default_weights(tgt)
    band = _derive_band(t)
    f_lo = cfg.f_lo if cfg.f_lo is not None else band[0]
    f_hi = cfg.f_hi if cfg.f_hi is not None else band[1]
    w_c = 2.0 * np.pi * np.sqrt(f_lo * f_hi)
    s_u = np.sqrt(np.mean(phi**2, axis=0))
    s_u[s_u == 0.0] = 1.0
    s_y = np.sqrt(np.mean(tgt**2, axis=0))
    s_y[s_y == 0.0] = 1.0

    # scaled problem: same loss value, O(1) variables
    t_s = (t - t[0]) * w_c
    phi_s = phi / s_u[None, :]
    tgt_s = tgt / s_y[None, :]
    w_s = w_raw * s_y**2

    def objective(theta):
        ssh = _unpack(theta, n)
        loss, grads, _ = simulate_with_grad(ssh, t_s, phi_s, tgt_s, w_s)
        if grads is None or not np.isfinite(loss):
            return 1e250, np.zeros_like(theta)
        g = np.concatenate([grads["a"].ravel(), grads["b"].ravel(),
                            grads["c"].ravel(), grads["d"].ravel()])
        if not np.all(np.isfinite(g)):
            return 1e250, np.zeros_like(theta)
        return loss, g

    starts = []
    for r in range(cfg.restarts):
        guess = initial_guess(train, n, f_lo, f_hi, seed=(cfg.seed, r),
                              jitter=0.0 if r == 0 else 0.6)
        starts.append(_scale_ss(guess, w_c, s_u, s_y))
    if warm_start is not None:
        starts.append(_scale_ss(warm_start, w_c, s_u, s_y))

    losses, iters, statuses, models = [], [], [], []
    for theta0 in (_pack(s) for s in starts):
        stopped = {"loss_tol": False}
        callback = None
        if cfg.loss_tol > 0.0:
            def callback(intermediate_result):
                if intermediate_result.fun <= cfg.loss_tol:
                    stopped["loss_tol"] = True
                    raise StopIteration
        # ftol=0: the default relative-reduction stop quits long before the
        # gradient is small on this landscape's flat valleys
        res = minimize(
            objective, theta0, jac=True, method="L-BFGS-B",
            options={"maxiter": cfg.max_iter, "gtol": cfg.grad_tol,
                     "ftol": 0.0, "maxcor": 20, "maxls": 60},
            callback=callback,
        )
        ss_fit = _unscale_ss(_unpack(res.x, n), w_c, s_u, s_y)
        # report the physical-units loss so later re-simulation reproduces
        # the number exactly
        loss_phys, _, _ = simulate_with_grad(ss_fit, t, phi, tgt, w_raw)
        losses.append(float(loss_phys))
        iters.append(int(res.nit))
        if stopped["loss_tol"]:
            statuses.append("loss_tol")
        elif res.success:
            statuses.append("converged")
        else:
            statuses.append("max_iter" if res.status == 1 else str(res.message))
        models.append(ss_fit)

    finite = np.isfinite(losses)
    if not np.any(finite):
        raise SolverError(
            "all restarts diverged: "
            + "; ".join(f"restart {i}: loss={l!r} ({s})"
                        for i, (l, s) in enumerate(zip(losses, statuses)))
        )

    order = np.argsort(np.where(finite, losses, np.inf), kind="stable")
    best = int(order[0])
    unstable_rejected = False
    no_stable_restart = False
    if cfg.stability == "reject":
        def is_stable(i):
            return np.max(np.linalg.eigvals(models[i].a).real) < 0.0
        if not is_stable(best):
            stable = [int(i) for i in order if finite[i] and is_stable(int(i))]
            if stable:
                unstable_rejected = True
                best = stable[0]
            else:
                no_stable_restart = True

    ss_best = models[best]
    return FitResult(
        ss=ss_best,
        loss=losses[best],
        losses=tuple(losses),
        iterations=tuple(iters),
        statuses=tuple(statuses),
        spectral_abscissa=float(np.max(np.linalg.eigvals(ss_best.a).real)),
        restart_index=best,
        n=n,
        seed=cfg.seed,
        unstable_rejected=unstable_rejected,
        no_stable_restart=no_stable_restart,
    )


def _embed(ss, n, f_lo, f_hi, seed):
    """Zero-cost embedding of a smaller model at order n: new states get
    fresh log-spaced rates, tiny input coupling, and zero output rows, so
    the start reproduces the donor's loss exactly but is not a dead end."""
    n_prev = ss.order
    extra = n - n_prev
    rng = np.random.default_rng([seed, n, n_prev])
    rates = 2.0 * np.pi * np.geomspace(f_lo, f_hi, extra + 2)[1:-1] if extra > 1 \
        else 2.0 * np.pi * np.array([np.sqrt(f_lo * f_hi)])
    a = np.zeros((n, n))
    a[:n_prev, :n_prev] = ss.a
    a[n_prev:, n_prev:] = np.diag(-rates[:extra])
    scale = np.max(np.abs(ss.b)) or 1.0
    b = np.vstack([ss.b, 1e-3 * scale * rng.standard_normal((extra, 6))])
    c = np.hstack([ss.c, np.zeros((3, extra))])
    return StateSpace(a=a, b=b, c=c, d=ss.d)


def order_sweep(train, orders, cfg):
    """fit() per order over shared data.  Each order additionally restarts
    from the best strictly-smaller-order result embedded at the new size,
    which makes the best losses non-increasing along increasing orders."""
    results = []
    band = _derive_band(train.phi_inputs.t)
    f_lo = cfg.f_lo if cfg.f_lo is not None else band[0]
    f_hi = cfg.f_hi if cfg.f_hi is not None else band[1]
    for n in orders:
        donors = [r for r in results if r.n < n]
        warm = None
        src = None
        if donors:
            src = min(donors, key=lambda r: r.loss)
            warm = _embed(src.ss, n, f_lo, f_hi, cfg.seed)
        res = fit(train, replace(cfg, n=n), warm_start=warm)
        if src is not None and res.loss > src.loss:
            # optimization lost the donor's optimum (e.g. the warm restart
            # drifted unstable and was rejected); keep the exact embedding
            # so the sweep stays non-increasing
            w_raw = np.array(cfg.weights) if cfg.weights is not None \
                else _default_weights(train.targets.values)
            loss_w, _, _ = simulate_with_grad(
                warm, train.phi_inputs.t, train.phi_inputs.values,
                train.targets.values, w_raw)
            if float(loss_w) < res.loss:
                res = replace(
                    res, ss=warm, loss=float(loss_w),
                    losses=res.losses + (float(loss_w),),
                    iterations=res.iterations + (0,),
                    statuses=res.statuses + ("embedded",),
                    spectral_abscissa=float(
                        np.max(np.linalg.eigvals(warm.a).real)),
                    restart_index=len(res.losses),
                )
        results.append(res)
    return results

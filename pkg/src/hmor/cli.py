"""Command-line front end: sweep, stimulus, table, fit, simulate, report.

Exit codes: 0 success, 1 validation error (bad arguments, malformed files,
domain violations), 2 numerical failure (diverged solver, singular systems).
Every output file is written atomically (temp file then rename), and each
run that writes files also writes a `<first output>.manifest.json` recording
the argument vector, package version, and content hashes of all inputs and
outputs, enough to reproduce the run.
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .dc_map import build_table, eval_idc, from_json as table_from_json, to_json as table_to_json
from .errors import HmorError, NumericalOverflowError, SolverError
from .fom_bench import (
    FomSpec,
    LoadSpec,
    fom_dc_sweep,
    fom_spec_from_json,
    fom_transient,
)
from .ident import FitConfig, assemble_training, fit, order_sweep
from .metrics import metrics
from .rom_runtime import (
    HammersteinModel,
    dc_transfer_curve,
    load_model,
    rom_ac,
    rom_dc_operating_point,
    rom_transient,
    save_model,
)
from .stimulus import (
    ChirpSpec,
    PulseSpec,
    SineSpec,
    gen_chirp_pair,
    gen_pulse,
    gen_sine,
)
from .svgplot import plot_bode, plot_overlay, plot_series
from .timeseries import read_csv, write_csv


def _atomic(path, writer):
    """Run writer(tmp) and rename tmp onto path only on success."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _write_manifest(argv, inputs, outputs, seed=None):
    doc = {
        "argv": list(argv),
        "version": __version__,
        "inputs": {os.fspath(p): _sha256(p) for p in inputs},
        "outputs": {os.fspath(p): _sha256(p) for p in outputs},
    }
    if seed is not None:
        doc["seed"] = seed
    path = os.fspath(outputs[0]) + ".manifest.json"

    def writer(tmp):
        with open(tmp, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    _atomic(path, writer)


def _load_fom(path):
    if path is None:
        return FomSpec(), None
    with open(path) as fh:
        return fom_spec_from_json(fh.read())


def _load_spec(args, load_from_file):
    if getattr(args, "cload", None) is not None:
        return LoadSpec(c_load=args.cload)
    if load_from_file is not None:
        return load_from_file
    return LoadSpec(c_load=5e-12)


def _thread_cap():
    cap = os.environ.get("HMOR_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except (ImportError, ValueError):
        pass


def _write_rows_csv(path, header, rows):
    def writer(tmp):
        with open(tmp, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")

    _atomic(path, writer)


# subcommand handlers; each returns the list of files it wrote


def _cmd_fom_dc_sweep(args):
    spec, _ = _load_fom(args.fom)
    axis = np.linspace(args.vmin, args.vmax, args.points)
    if args.v3_points is not None:
        v3 = np.linspace(args.v3_min if args.v3_min is not None else args.vmin,
                         args.v3_max if args.v3_max is not None else args.vmax,
                         args.v3_points)
    else:
        v3 = axis
    table = fom_dc_sweep(spec, (axis, axis, v3))
    _atomic(args.out, lambda tmp: table_to_json(table, tmp))
    return [args.out]


def _cmd_fom_transient(args):
    spec, load = _load_fom(args.fom)
    sources = read_csv(args.sources)
    out = fom_transient(spec, sources, _load_spec(args, load),
                        v3_init=args.v3_init, rtol=args.rtol)
    _atomic(args.out, lambda tmp: write_csv(out, tmp))
    return [args.out]


def _cmd_stim_chirp(args):
    spec = ChirpSpec(f0=args.f0, f1=args.f1, v_bias=args.bias,
                     amplitude=args.amplitude, n_per=args.nper,
                     samples_per_period=args.spp)
    _atomic(args.out, lambda tmp: write_csv(gen_chirp_pair(spec), tmp))
    return [args.out]


def _cmd_stim_sine(args):
    spec = SineSpec(freq=args.freq, v_bias=args.bias, amplitude=args.amplitude,
                    n_per=args.nper, samples_per_period=args.spp)
    _atomic(args.out, lambda tmp: write_csv(gen_sine(spec), tmp))
    return [args.out]


def _cmd_stim_pulse(args):
    spec = PulseSpec(v_lo=args.lo, v_hi=args.hi, t_ramp=args.ramp,
                     t_dwell_lo=args.dwell_lo, t_dwell_hi=args.dwell_hi,
                     v2_const=args.v2, n_cycles=args.cycles, dt_max=args.dt_max)
    _atomic(args.out, lambda tmp: write_csv(gen_pulse(spec), tmp))
    return [args.out]


def _cmd_table_build(args):
    with open(args.sweep) as fh:
        header = fh.readline().strip().split(",")
    want = ["v1", "v2", "v3", "i1", "i2", "i3"]
    if header != want:
        raise ValueError(f"{args.sweep}: expected header {','.join(want)}, "
                         f"got {','.join(header)}")
    samples = np.loadtxt(args.sweep, delimiter=",", skiprows=1, ndmin=2)
    table = build_table(samples)
    _atomic(args.out, lambda tmp: table_to_json(table, tmp))
    return [args.out]


def _fit_inputs(args):
    table = table_from_json(args.table)
    recorded = read_csv(args.train)
    train = assemble_training(table, recorded, mode=args.domain,
                              provenance={"train": os.fspath(args.train)})
    return table, train


def _cmd_fit(args):
    table, train = _fit_inputs(args)
    cfg = FitConfig(n=args.order, restarts=args.restarts, max_iter=args.max_iter,
                    seed=args.seed, loss_tol=args.loss_tol)
    res = fit(train, cfg)
    model = HammersteinModel(table=table, ss=res.ss, metadata={
        "n": res.n, "seed": res.seed, "loss": res.loss,
        "train": os.fspath(args.train),
    })
    _atomic(args.out, lambda tmp: save_model(model, tmp))
    written = [args.out]
    if args.report:
        _atomic(args.report, lambda tmp: _write_text(tmp, res.summary_json()))
        written.append(args.report)
    return written


def _cmd_order_sweep(args):
    table, train = _fit_inputs(args)
    orders = [int(x) for x in args.orders.split(",") if x]
    if not orders:
        raise ValueError("need at least one order")
    cfg = FitConfig(n=orders[0], restarts=args.restarts, max_iter=args.max_iter,
                    seed=args.seed, loss_tol=args.loss_tol)
    results = order_sweep(train, orders, cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    written = [args.report]
    doc = {"orders": [], "losses": [], "models": []}
    for res in results:
        mpath = os.path.join(args.out_dir, f"model_n{res.n}.json")
        model = HammersteinModel(table=table, ss=res.ss, metadata={
            "n": res.n, "seed": res.seed, "loss": res.loss,
            "train": os.fspath(args.train),
        })
        _atomic(mpath, lambda tmp, m=model: save_model(m, tmp))
        doc["orders"].append(res.n)
        doc["losses"].append(res.loss)
        doc["models"].append(mpath)
        written.append(mpath)

    def writer(tmp):
        with open(tmp, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    _atomic(args.report, writer)
    return written


def _cmd_sim(args):
    model = load_model(args.model)
    sources = read_csv(args.sources)
    out = rom_transient(model, sources, _load_spec(args, None),
                        v3_0=args.v3_init, out_of_domain=args.domain)
    _atomic(args.out, lambda tmp: write_csv(out, tmp))
    written = [args.out]
    if args.svg:
        _atomic(args.svg, lambda tmp: plot_series(out, tmp, title="transient"))
        written.append(args.svg)
    return written


def _cmd_ac(args):
    model = load_model(args.model)
    load = _load_spec(args, None)
    op = rom_dc_operating_point(model, args.v1, args.v2)
    freqs = np.logspace(np.log10(args.fmin), np.log10(args.fmax), args.points)
    ac = rom_ac(model, op, load, freqs)
    rows = np.column_stack([ac.freqs, ac.mag_db, ac.phase_deg,
                            ac.h.real, ac.h.imag])
    _write_rows_csv(args.out, ["f_hz", "mag_db", "phase_deg", "re", "im"], rows)
    written = [args.out]
    if args.svg:
        _atomic(args.svg, lambda tmp: plot_bode(ac, tmp))
        written.append(args.svg)
    return written


def _cmd_dc_tf(args):
    model = load_model(args.model)
    grid = np.linspace(args.vmin, args.vmax, args.points)
    curve = dc_transfer_curve(model, grid, args.v2, tol=args.tol)
    _write_rows_csv(args.out, ["v1", "v3"], curve)
    return [args.out]


def _cmd_report(args):
    reference = read_csv(args.reference)
    test = read_csv(args.test)
    channels = tuple(args.channels.split(",")) if args.channels else None
    rep = metrics(reference, test, channels=channels)
    _atomic(args.out, lambda tmp: _write_text(tmp, rep.to_json()))
    written = [args.out]
    if args.svg:
        _atomic(args.svg, lambda tmp: plot_overlay(
            reference, test, rep.channels, tmp))
        written.append(args.svg)
    return written


def _build_parser():
    p = argparse.ArgumentParser(
        prog="hmor",
        description="Data-driven surrogate toolkit: DC tables plus a fitted "
                    "low-order linear block for 3-port circuits.")
    p.add_argument("--version", action="version", version=f"hmor {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    fom = sub.add_parser("fom", help="full-order bench operations")
    fsub = fom.add_subparsers(dest="subcommand", required=True)
    f_s = fsub.add_parser("dc-sweep", help="grid of DC solutions -> table file")
    f_s.add_argument("--fom", help="bench parameter JSON (default: built-in)")
    f_s.add_argument("--vmin", type=float, default=0.0)
    f_s.add_argument("--vmax", type=float, default=5.0)
    f_s.add_argument("--points", type=int, default=21)
    f_s.add_argument("--v3-min", type=float, dest="v3_min")
    f_s.add_argument("--v3-max", type=float, dest="v3_max")
    f_s.add_argument("--v3-points", type=int, dest="v3_points")
    f_s.add_argument("--out", required=True)
    f_s.set_defaults(handler=_cmd_fom_dc_sweep)
    f_t = fsub.add_parser("transient", help="integrate the bench against sources")
    f_t.add_argument("--fom")
    f_t.add_argument("--sources", required=True, help="CSV with t,v1,v2")
    f_t.add_argument("--cload", type=float)
    f_t.add_argument("--v3-init", type=float, dest="v3_init")
    f_t.add_argument("--rtol", type=float, default=1e-8)
    f_t.add_argument("--out", required=True)
    f_t.set_defaults(handler=_cmd_fom_transient)

    stim = sub.add_parser("stim", help="stimulus generation")
    ssub = stim.add_subparsers(dest="subcommand", required=True)
    s_c = ssub.add_parser("chirp", help="exponential differential chirp")
    s_c.add_argument("--f0", type=float, required=True)
    s_c.add_argument("--f1", type=float, required=True)
    s_c.add_argument("--bias", type=float, default=2.5)
    s_c.add_argument("--amplitude", type=float, default=0.05)
    s_c.add_argument("--nper", type=int, required=True)
    s_c.add_argument("--spp", type=int, default=500)
    s_c.add_argument("--out", required=True)
    s_c.set_defaults(handler=_cmd_stim_chirp)
    s_s = ssub.add_parser("sine", help="constant-frequency pair")
    s_s.add_argument("--freq", type=float, required=True)
    s_s.add_argument("--bias", type=float, default=2.5)
    s_s.add_argument("--amplitude", type=float, default=0.05)
    s_s.add_argument("--nper", type=int, required=True)
    s_s.add_argument("--spp", type=int, default=500)
    s_s.add_argument("--out", required=True)
    s_s.set_defaults(handler=_cmd_stim_sine)
    s_p = ssub.add_parser("pulse", help="trapezoidal v1, constant v2")
    s_p.add_argument("--lo", type=float, required=True)
    s_p.add_argument("--hi", type=float, required=True)
    s_p.add_argument("--ramp", type=float, required=True)
    s_p.add_argument("--dwell-lo", type=float, default=0.0, dest="dwell_lo")
    s_p.add_argument("--dwell-hi", type=float, default=0.0, dest="dwell_hi")
    s_p.add_argument("--v2", type=float, default=2.5)
    s_p.add_argument("--cycles", type=int, default=1)
    s_p.add_argument("--dt-max", type=float, default=0.0, dest="dt_max")
    s_p.add_argument("--out", required=True)
    s_p.set_defaults(handler=_cmd_stim_pulse)

    t_b = sub.add_parser("table", help="lookup-table operations")
    tsub = t_b.add_subparsers(dest="subcommand", required=True)
    t_bb = tsub.add_parser("build", help="assemble a table from sweep samples")
    t_bb.add_argument("--sweep", required=True,
                      help="CSV with header v1,v2,v3,i1,i2,i3")
    t_bb.add_argument("--out", required=True)
    t_bb.set_defaults(handler=_cmd_table_build)

    f_f = sub.add_parser("fit", help="identify the linear block")
    f_f.add_argument("--table", required=True)
    f_f.add_argument("--train", required=True, help="CSV with t,v1,v2,v3,i1,i2,i3")
    f_f.add_argument("--order", type=int, required=True)
    f_f.add_argument("--restarts", type=int, default=8)
    f_f.add_argument("--max-iter", type=int, default=300, dest="max_iter")
    f_f.add_argument("--loss-tol", type=float, default=0.0, dest="loss_tol")
    f_f.add_argument("--seed", type=int, default=0)
    f_f.add_argument("--domain", choices=("strict", "clamp"), default="strict")
    f_f.add_argument("--out", required=True)
    f_f.add_argument("--report")
    f_f.set_defaults(handler=_cmd_fit)

    o_s = sub.add_parser("order-sweep", help="fit a range of orders")
    o_s.add_argument("--table", required=True)
    o_s.add_argument("--train", required=True)
    o_s.add_argument("--orders", required=True, help="comma list, e.g. 1,2,3")
    o_s.add_argument("--restarts", type=int, default=8)
    o_s.add_argument("--max-iter", type=int, default=300, dest="max_iter")
    o_s.add_argument("--loss-tol", type=float, default=0.0, dest="loss_tol")
    o_s.add_argument("--seed", type=int, default=0)
    o_s.add_argument("--domain", choices=("strict", "clamp"), default="strict")
    o_s.add_argument("--out-dir", required=True, dest="out_dir")
    o_s.add_argument("--report", required=True)
    o_s.set_defaults(handler=_cmd_order_sweep)

    sim = sub.add_parser("sim", help="closed-loop transient of a saved model")
    sim.add_argument("--model", required=True)
    sim.add_argument("--sources", required=True)
    sim.add_argument("--cload", type=float)
    sim.add_argument("--v3-init", type=float, dest="v3_init")
    sim.add_argument("--domain", choices=("clamp", "error"), default="clamp")
    sim.add_argument("--out", required=True)
    sim.add_argument("--svg")
    sim.set_defaults(handler=_cmd_sim)

    ac = sub.add_parser("ac", help="small-signal v1 -> v3 response")
    ac.add_argument("--model", required=True)
    ac.add_argument("--load", type=float, dest="cload")
    ac.add_argument("--v1", type=float, default=2.5)
    ac.add_argument("--v2", type=float, default=2.5)
    ac.add_argument("--fmin", type=float, default=1e3)
    ac.add_argument("--fmax", type=float, default=1e10)
    ac.add_argument("--points", type=int, default=200)
    ac.add_argument("--out", required=True)
    ac.add_argument("--svg")
    ac.set_defaults(handler=_cmd_ac)

    dtf = sub.add_parser("dc-tf", help="DC transfer curve V1 -> V3")
    dtf.add_argument("--model", required=True)
    dtf.add_argument("--v2", type=float, required=True)
    dtf.add_argument("--vmin", type=float, required=True)
    dtf.add_argument("--vmax", type=float, required=True)
    dtf.add_argument("--points", type=int, default=21)
    dtf.add_argument("--tol", type=float, default=1e-9)
    dtf.add_argument("--out", required=True)
    dtf.set_defaults(handler=_cmd_dc_tf)

    rep = sub.add_parser("report", help="error metrics between two series")
    rep.add_argument("--reference", required=True)
    rep.add_argument("--test", required=True)
    rep.add_argument("--channels", help="comma list (default: all reference channels)")
    rep.add_argument("--out", required=True)
    rep.add_argument("--svg")
    rep.set_defaults(handler=_cmd_report)
    return p


_INPUT_FIELDS = ("fom", "sources", "sweep", "table", "train", "model",
                 "reference", "test")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    _thread_cap()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        written = args.handler(args)
        inputs = [getattr(args, f) for f in _INPUT_FIELDS
                  if getattr(args, f, None)]
        _write_manifest(argv, inputs, written,
                        seed=getattr(args, "seed", None))
    except (SolverError, NumericalOverflowError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (HmorError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

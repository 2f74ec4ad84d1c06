"""Command-line interface: ``wavesem run|convergence|scaling|analyze``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 numerical
failure, 4 input/output failure.
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import glob
import json
import logging
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__, io, parallel
from .analysis import (
    ConvergenceRecord,
    ScalingRecord,
    convergence_rate,
    harmonic_fit,
    probe_stats,
    scaling_metrics,
    transient_window,
)
from .config import ConfigError, load_config
from .dynamics import ROUTINES, BlowUpError
from .solver import SolverError
from .wavetheory import StreamFunctionError

log = logging.getLogger("wavesem")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _threads(args):
    n = args.threads if args.threads is not None else parallel.threads_from_env(None)
    if n is not None:
        got = parallel.set_threads(n)
        if got < n:
            log.warning("requested %d threads, %d available (set NUMBA_NUM_THREADS to raise the cap)", n, got)
    return parallel.get_threads()


def _out_dir(args, default):
    out = Path(args.out) if args.out else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# -- run ---------------------------------------------------------------------------


def cmd_run(args):
    from .simulation import run

    cfg = load_config(args.config)
    out = _out_dir(args, cfg.output.directory or "wavesem-out")
    threads = _threads(args)
    started = _now()

    def progress(state, n_steps):
        if not args.quiet and (state.step % max(1, n_steps // 10) == 0 or state.step == n_steps):
            log.info("step %d/%d  t=%.4g  max|eta|=%.4g", state.step, n_steps, state.t, np.abs(state.eta).max())

    result = run(cfg, out, progress)
    cfg_path = out / "config.ini"
    cfg_path.write_text(cfg.to_ini())
    files = [Path(f) for f in result.files] + [cfg_path]
    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "output_directory": str(out.resolve()),
        "started": started,
        "finished": _now(),
        "wall_time_s": result.wall_time,
        "threads": threads,
        "seed": args.seed,
        "dt": result.controls.dt,
        "n_steps": result.n_steps,
        "probes": [{"x": pr.x, "file": f"probe_{i:02d}.csv"} for i, pr in enumerate(result.probes)],
        "timings": {r: result.timers.total[r] for r in ROUTINES},
        "files": sorted(f.name for f in files) + ["manifest.json"],
    }
    io.write_manifest(out / "manifest.json", manifest)
    if not args.quiet:
        print(f"wrote {len(manifest['files'])} files to {out}")
    return manifest


# -- convergence ----------------------------------------------------------------------

_STUDY_DEFAULTS = {
    "kind": "both",
    "kh": "1",
    "rel_steepness": "0.1, 0.5",
    "orders": "1, 2, 3, 4",
    "nx0": "4",
    "refinements": "3",
    "p_orders": "2, 3, 4, 5, 6",
    "p_nx": "8",
    "length": "1.0",
}


def _study_settings(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_dict({"study": _STUDY_DEFAULTS})
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise OSError(f"cannot read study config {path}: {exc}") from exc
        parser.read_string(text)
    s = parser["study"]
    for key in s:
        if key not in _STUDY_DEFAULTS:
            raise ConfigError(f"study.{key}", "unknown key")

    def floats(key):
        try:
            return [float(v) for v in s[key].split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"study.{key}", f"cannot parse {s[key]!r}") from None

    def ints(key):
        vals = floats(key)
        if any(v != int(v) or v < 1 for v in vals):
            raise ConfigError(f"study.{key}", "expected positive integers")
        return [int(v) for v in vals]

    kind = s["kind"]
    if kind not in ("h", "p", "both"):
        raise ConfigError("study.kind", "expected h, p or both")
    for v in floats("rel_steepness"):
        if not 0 < v < 1:
            raise ConfigError("study.rel_steepness", "values must lie in (0, 1)")
    for v in floats("kh"):
        if not v > 0:
            raise ConfigError("study.kh", "values must be positive")
    return {
        "kind": kind,
        "kh": floats("kh"),
        "rel": floats("rel_steepness"),
        "orders": ints("orders"),
        "nx0": ints("nx0")[0],
        "refinements": ints("refinements")[0],
        "p_orders": ints("p_orders"),
        "p_nx": ints("p_nx")[0],
        "length": floats("length")[0],
    }


def cmd_convergence(args):
    from .studies import _steady_wave, h_study, observed_order, p_study

    st = _study_settings(args.config)
    out = _out_dir(args, "wavesem-convergence")
    _threads(args)
    h_rows, p_rows, failures = [], [], []
    for kh in st["kh"]:
        for rel in st["rel"]:
            try:
                wave = _steady_wave(kh, rel, st["length"])
            except Exception as exc:  # noqa: BLE001 - sweep continues
                failures.append((kh, rel, "-", f"{type(exc).__name__}: {exc}"))
                continue
            if st["kind"] in ("h", "both"):
                for p in st["orders"]:
                    try:
                        rec = h_study(kh, rel, p, st["nx0"], refinements=st["refinements"],
                                      length=st["length"], wave=wave)
                    except Exception as exc:  # noqa: BLE001
                        failures.append((kh, rel, p, f"{type(exc).__name__}: {exc}"))
                        continue
                    rates = convergence_rate(rec)
                    order = observed_order(rec.parameter, rec.errors)
                    for i, (h, e) in enumerate(zip(rec.parameter, rec.errors)):
                        h_rows.append((kh, rel, p, h, e, rates[i - 1] if i else float("nan"), order))
                    if not args.quiet:
                        print(f"h-study kh={kh:g} rel={rel:g} p={p}: order {order:.2f}")
            if st["kind"] in ("p", "both"):
                try:
                    rec = p_study(kh, rel, st["p_orders"], st["p_nx"], length=st["length"], wave=wave)
                except Exception as exc:  # noqa: BLE001
                    failures.append((kh, rel, "p", f"{type(exc).__name__}: {exc}"))
                    continue
                for p, e in zip(rec.parameter, rec.errors):
                    p_rows.append((kh, rel, st["length"] / st["p_nx"], int(p), e))
                if not args.quiet:
                    print(f"p-study kh={kh:g} rel={rel:g}: errors " + " ".join(f"{e:.2e}" for e in rec.errors))
    files = []
    if h_rows:
        files.append(io.write_table(out / "convergence_h.csv",
                                    ("kh", "rel_steepness", "p", "h_max", "error", "rate", "observed_order"), h_rows))
    if p_rows:
        files.append(io.write_table(out / "convergence_p.csv", ("kh", "rel_steepness", "h_max", "p", "error"), p_rows))
    if failures:
        files.append(io.write_table(out / "failures.csv", ("kh", "rel_steepness", "p", "error"), failures))
    return {"files": [str(f) for f in files], "failures": failures}


# -- scaling -----------------------------------------------------------------------------


def _bench_subprocess(threads, nx, nz, p, steps, length, preconditioner):
    env = dict(os.environ, NUMBA_NUM_THREADS=str(threads), WAVESEM_THREADS=str(threads))
    cmd = [sys.executable, "-m", "wavesem.cli", "_bench", "--threads", str(threads), "--nx", str(nx),
           "--nz", str(nz), "--p", str(p), "--steps", str(steps), "--length", repr(length),
           "--preconditioner", preconditioner]
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"benchmark with {threads} threads failed:\n{proc.stderr}")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def scaling_sweep(kind, thread_list, nx, nz, p=4, steps=2, preconditioner="jacobi"):
    """Run the benchmark per thread count in fresh processes.

    Strong: fixed problem. Weak: the domain length and element count grow
    with the worker count so work per worker stays constant.
    """
    rows = []
    for n in thread_list:
        nxn = nx * n if kind == "weak" else nx
        length = nxn / 8.0
        res = _bench_subprocess(n, nxn, nz, p, steps, length, preconditioner)
        res["threads"] = n
        rows.append(res)
    return rows


def _scaling_table(kind, rows):
    table = []
    for routine in ROUTINES + ("wall",):
        times = [max(r.get(routine, 0.0), 1e-12) for r in rows]
        rec = ScalingRecord([r["threads"] for r in rows], times, kind=kind, routine=routine)
        m = scaling_metrics(rec)
        for i, r in enumerate(rows):
            table.append((routine, r["threads"], r["volume_ndof"], times[i], m["speedup"][i], m["ideal"][i],
                          m["gamma_s"][i], m["gamma_w"][i]))
    return table


def cmd_scaling(args):
    out = _out_dir(args, "wavesem-scaling")
    thread_list = [int(v) for v in args.thread_list.split(",")]
    rows = scaling_sweep(args.kind, thread_list, args.nx, args.nz, args.p, args.steps, args.preconditioner)
    table = _scaling_table(args.kind, rows)
    path = io.write_table(out / f"scaling_{args.kind}.csv",
                          ("routine", "threads", "volume_ndof", "time_s", "speedup", "ideal", "gamma_s", "gamma_w"),
                          table)
    if not args.quiet:
        for row in table:
            if row[0] == "LaplaceSolve":
                print(f"threads={row[1]:3d} LaplaceSolve {row[3]:.3f}s speedup {row[4]:.2f} "
                      f"gamma_s {row[6]:.2f} gamma_w {row[7]:.2f}")
        print(f"host cpus: {os.cpu_count()}, usable: {len(os.sched_getaffinity(0))}")
    return {"files": [str(path)], "rows": rows}


def cmd_bench(args):
    from .studies import laplace_benchmark

    parallel.set_threads(args.threads)
    res = laplace_benchmark(args.nx, args.nz, args.p, args.steps, args.length, preconditioner=args.preconditioner)
    res["threads_effective"] = parallel.get_threads()
    print(json.dumps(res))
    return res


# -- analyze -----------------------------------------------------------------------------


def _inputs(patterns):
    files = []
    for pat in patterns:
        hits = sorted(glob.glob(pat))
        if not hits:
            raise FileNotFoundError(f"no input matches {pat}")
        files += hits
    return files


def cmd_analyze(args):
    out = _out_dir(args, "wavesem-analysis")
    files = _inputs(args.inputs)
    if args.kind == "harmonics":
        if args.period is None:
            raise ConfigError("--period", "required for harmonic analysis")
        rows = []
        for f in files:
            a = io.read_probe_csv(f)
            mask = transient_window(a["t"], args.period, args.start_periods)
            fit = harmonic_fit(a["t"][mask], a["eta"][mask], args.period, args.n_max)
            rows.append((Path(f).name, fit.mean, *fit.amplitudes))
        header = ("file", "mean") + tuple(f"A{n}" for n in range(1, args.n_max + 1))
        path = io.write_table(out / "harmonics.csv", header, rows)
    elif args.kind == "probes":
        rows = []
        for f in files:
            a = io.read_probe_csv(f)
            rows.append((Path(f).name, *probe_stats(a["eta"])))
        path = io.write_table(out / "probe_stats.csv", ("file", "eta_m", "eta_v"), rows)
    else:
        rows = []
        for f in files:
            a = io.read_table(f, required=("h_max", "error"))
            group_cols = [c for c in ("kh", "rel_steepness", "p") if c in a]
            keys = list(zip(*(a[c] for c in group_cols))) if group_cols else [()] * len(a["error"])
            for key in dict.fromkeys(keys):
                idx = [i for i, k in enumerate(keys) if k == key]
                rec = ConvergenceRecord([a["h_max"][i] for i in idx], [a["error"][i] for i in idx])
                rates = convergence_rate(rec) if len(idx) > 1 else []
                for j, i in enumerate(idx):
                    rows.append((Path(f).name, *key, a["h_max"][i], a["error"][i],
                                 rates[j - 1] if j else float("nan")))
            header = ("file", *group_cols, "h_max", "error", "rate")
        path = io.write_table(out / "convergence_rates.csv", header, rows)
    if not args.quiet:
        print(f"wrote {path}")
    return {"files": [str(path)]}


# -- entry point ----------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads (overrides WAVESEM_THREADS)")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--seed", type=int, default=0, help="seed for randomised helpers")
    common.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="wavesem", description="Spectral element potential-flow wave solver")
    parser.add_argument("--version", action="version", version=f"wavesem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run a configured simulation")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("convergence", parents=[common], help="h- and p-convergence sweeps")
    p.add_argument("--config", default=None, help="study INI with a [study] section")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("scaling", parents=[common], help="thread-scaling benchmark")
    p.add_argument("--kind", choices=("strong", "weak"), default="strong")
    p.add_argument("--thread-list", default="1,2,4")
    p.add_argument("--nx", type=int, default=64)
    p.add_argument("--nz", type=int, default=4)
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--steps", type=int, default=2)
    p.add_argument("--preconditioner", default="jacobi", choices=("jacobi", "sgs", "lu"))
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("analyze", parents=[common], help="post-process probe or convergence tables")
    p.add_argument("kind", choices=("harmonics", "probes", "convergence"))
    p.add_argument("inputs", nargs="+")
    p.add_argument("--period", type=float, default=None)
    p.add_argument("--start-periods", type=float, default=15.0)
    p.add_argument("--n-max", type=int, default=4)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("_bench", parents=[common])
    p.add_argument("--nx", type=int, required=True)
    p.add_argument("--nz", type=int, required=True)
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--steps", type=int, default=2)
    p.add_argument("--length", type=float, default=None)
    p.add_argument("--preconditioner", default="jacobi")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    np.random.seed(args.seed)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowUpError, SolverError, StreamFunctionError, FloatingPointError) as exc:
        stage = getattr(exc, "stage", None)
        tag = f"[{stage}] " if stage and not str(exc).startswith("[") else ""
        print(f"numerical failure: {tag}{exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, KeyError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

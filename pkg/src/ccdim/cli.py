"""Command-line front end.

Exit codes: 0 success, 1 a consistency check failed, 2 input or usage error.
CSV and JSON output is deterministic; the human-readable reports carry a
timestamp banner and wall time unless ``--no-banner`` is given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__, _backend
from .errors import InputError, NumericError
from .measure import (
    ball_bound,
    box_count,
    boxcount_csv,
    boxdim_regress,
    certified_bounds,
    cover_csv,
    measure_csv,
    moran_cover,
    nu,
    nu_sensitivity,
)
from .pressure import corollary_check, dimension_enclosure, pressure_csv, pressure_curve
from .system import System, load_system
from .words import enumerate_level, format_word, parse_word


class Failure(Exception):
    """A consistency check failed (exit status 1)."""


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".15g")
    return str(v)


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("CCDIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"CCDIM_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _aligned_depth(system: System, depth: int) -> int:
    """Smallest multiple of the schedule period that is at least ``depth``."""
    p = system.schedule.period
    return -(-depth // p) * p


class Run:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.start = time.perf_counter()
        self.threads = _threads(args.threads)
        self.system = load_system(args.config)

    def emit(self, text: str) -> None:
        if self.args.out:
            with open(self.args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)

    def report(self, analysis: str, results: dict, lines: list[tuple[str, object]]) -> None:
        """Emit a run report either as JSON or as ``key = value`` lines."""
        xi_emp = self.system.empirical_xi(8, 2000)
        summary = {**self.system.summary(), "xi_emp": xi_emp}
        if self.args.json:
            doc = {"ccdim": __version__, "analysis": analysis, "system": summary,
                   "results": results}
            if not self.args.no_banner:
                doc["wall_time_s"] = round(time.perf_counter() - self.start, 6)
            self.emit(json.dumps(doc, indent=2, sort_keys=True) + "\n")
            return
        head = []
        if not self.args.no_banner:
            stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
            head.append(f"# ccdim {__version__} {analysis} {stamp} "
                        f"backend={_backend.kernels.NAME}\n")
        k = self.system.constants
        rows = [
            ("system", self.system.name or "-"),
            ("N", self.system.N),
            ("schedule", self.system.schedule.kind),
            ("b", k.b), ("B", k.B), ("c", k.c), ("gamma", k.gamma),
            ("xi", k.xi), ("xi_emp", xi_emp),
            ("constants", "certified" if k.certified else "sampled-constants"),
            *lines,
        ]
        body = "".join(f"{key} = {_fmt(val)}\n" for key, val in rows)
        tail = ""
        if not self.args.no_banner:
            tail = f"# wall time {time.perf_counter() - self.start:.3f} s\n"
        self.emit("".join(head) + body + tail)


def cmd_validate(run: Run) -> int:
    sysm = run.system
    stage_lines = []
    for s, st in enumerate(sysm.stages):
        stage_lines += [
            (f"stage[{s}].b", st.b), (f"stage[{s}].B", st.B),
            (f"stage[{s}].c", st.c), (f"stage[{s}].c_est", st.audit.c_est),
            (f"stage[{s}].holder_ok", str(st.audit.holder_ok).lower()),
        ]
    run.report("validate", sysm.summary(), stage_lines)
    if not sysm.consistent:
        raise Failure("sampled Hoelder quotients exceed the declared constant c")
    return 0


def cmd_dim(run: Run) -> int:
    a = run.args
    enc = dimension_enclosure(run.system, a.depth, a.tol, threads=run.threads)
    cor = corollary_check(run.system, a.depth, enc, threads=run.threads)
    results = {"enclosure": enc.as_dict(), "corollary": cor.as_dict()}
    run.report("dim", results, [
        ("depth", enc.depth), ("tol", enc.tol),
        ("h_lo", enc.h_lo), ("h_hi", enc.h_hi), ("width", enc.width),
        ("certified_width_bound", enc.width_bound),
        ("xi_emp_width", enc.emp_width),
        ("corollary_check", "pass" if cor.ok else "FAIL"),
        ("status", enc.status),
    ])
    if not cor.ok:
        raise Failure("partition sums at the enclosure leave the band "
                      "[xi^-3t, xi^3t]; the constants are inconsistent")
    return 0


def cmd_bounds(run: Run) -> int:
    a = run.args
    enc = dimension_enclosure(run.system, a.depth, a.tol, threads=run.threads)
    cb = certified_bounds(run.system, enc)
    run.report("bounds", {"enclosure": enc.as_dict(), "bounds": cb.as_dict()}, [
        ("h_lo", enc.h_lo), ("h_hi", enc.h_hi), ("M", cb.M),
        ("hausdorff_lower", cb.hausdorff_lower), ("hausdorff_upper", cb.hausdorff_upper),
        ("packing_upper", cb.packing_upper), ("status", enc.status),
    ])
    return 0


def cmd_pressure(run: Run) -> int:
    a = run.args
    if a.t:
        ts = [float(t) for t in a.t]
    else:
        if a.steps < 1:
            raise InputError("--steps must be >= 1")
        ts = [a.t_min] if a.steps == 1 else list(np.linspace(a.t_min, a.t_max, a.steps))
    curve = pressure_curve(run.system, a.depth, ts, threads=run.threads)
    if a.json:
        run.emit(json.dumps({"depth": a.depth, "rows": [
            {"t": b.t, "logZ": b.logZ, "L": b.L, "U": b.U, "midpoint": b.midpoint,
             "status": b.status} for b in curve]}, indent=2, sort_keys=True) + "\n")
    else:
        run.emit(pressure_csv(curve))
    return 0


def cmd_moran(run: Run) -> int:
    cover = moran_cover(run.system, run.args.r)
    if run.args.json:
        run.emit(json.dumps({"r": cover.r, "count": len(cover), "M": ball_bound(run.system),
                             "lower_violations": cover.lower_violations,
                             "csv": cover_csv(cover, run.system.N)},
                            indent=2, sort_keys=True) + "\n")
    else:
        run.emit(cover_csv(cover, run.system.N))
    if cover.lower_violations:
        raise Failure(f"{cover.lower_violations} cover elements are smaller than r/(xi B)")
    return 0


def cmd_measure(run: Run) -> int:
    a = run.args
    sysm = run.system
    words = [parse_word(s, sysm.N) for s in a.sigma or []]
    if a.level is not None:
        words += list(enumerate_level(sysm.N, a.level))
    if not words:
        raise InputError("give at least one --sigma or a --level")
    enc = dimension_enclosure(sysm, _aligned_depth(sysm, a.depth), threads=run.threads)
    h = {"mid": enc.midpoint, "lo": enc.h_lo, "hi": enc.h_hi}[a.h]
    ests = [nu(sysm, w, a.stage, h, threads=run.threads) for w in words]
    if a.json:
        run.emit(json.dumps({"h": h, "enclosure": enc.as_dict(), "rows": [
            {"word": format_word(e.word, sysm.N), "nu": e.value,
             "enclosure_lo": e.enclosure_lo, "enclosure_hi": e.enclosure_hi,
             "inside": e.inside,
             "h_sensitivity": nu_sensitivity(sysm, e.word, a.stage, enc, threads=run.threads)}
            for e in ests]}, indent=2, sort_keys=True) + "\n")
    else:
        run.emit(measure_csv(ests, sysm.N))
    bad = sum(not e.inside for e in ests)
    if bad:
        raise Failure(f"{bad} measure values fall outside their enclosure")
    return 0


def cmd_boxcount(run: Run) -> int:
    a = run.args
    if not 0 < a.r_min < a.r_max < 1:
        raise InputError("need 0 < --r-min < --r-max < 1")
    if a.points < 1:
        raise InputError("--points must be >= 1")
    radii = [float(r) for r in np.geomspace(a.r_max, a.r_min, a.points)]
    enc = dimension_enclosure(run.system, _aligned_depth(run.system, a.depth),
                              threads=run.threads)
    counts = [box_count(run.system, r, enc.h_hi) for r in radii]
    if a.json:
        doc = {"h_hi": enc.h_hi, "rows": [c.__dict__ for c in counts]}
        if len(radii) >= 4 and a.r_max / a.r_min >= 100:
            fit = boxdim_regress(run.system, radii, enc.h_hi)
            doc["slope"], doc["stderr"] = fit.slope, fit.stderr
        run.emit(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        run.emit(boxcount_csv(counts))
    bad = [c.r for c in counts if c.count > c.certified_upper]
    if bad:
        raise Failure(f"box counts exceed the certified bound at r = {bad}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="system config (JSON)")
    common.add_argument("--json", action="store_true", help="emit JSON instead of text/CSV")
    common.add_argument("--out", help="write output to this file instead of stdout")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $CCDIM_THREADS or all cores)")
    common.add_argument("--no-banner", action="store_true",
                        help="omit timestamp and wall time from text reports")

    p = argparse.ArgumentParser(prog="ccdim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ccdim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check a config and print its constants")

    for name, helptext in (("dim", "certified enclosure of the dimension"),
                           ("bounds", "Hausdorff and packing measure bounds")):
        q = sub.add_parser(name, parents=[common], help=helptext)
        q.add_argument("--depth", type=int, default=10)
        q.add_argument("--tol", type=float, default=1e-12)

    q = sub.add_parser("pressure", parents=[common], help="pressure brackets on a grid (CSV)")
    q.add_argument("--depth", type=int, default=10)
    q.add_argument("--t-min", type=float, default=0.0)
    q.add_argument("--t-max", type=float, default=1.0)
    q.add_argument("--steps", type=int, default=11)
    q.add_argument("--t", action="append", help="explicit t value (repeatable)")

    q = sub.add_parser("moran", parents=[common], help="r-Moran cover (CSV)")
    q.add_argument("--r", type=float, required=True)

    q = sub.add_parser("measure", parents=[common], help="finite-stage measure values (CSV)")
    q.add_argument("--sigma", action="append", help="cylinder word, e.g. 12 (repeatable)")
    q.add_argument("--level", type=int, help="all words of this length")
    q.add_argument("--stage", type=int, default=6)
    q.add_argument("--depth", type=int, default=10, help="depth of the enclosure giving h")
    q.add_argument("--h", choices=("mid", "lo", "hi"), default="mid")

    q = sub.add_parser("boxcount", parents=[common], help="box counts from Moran covers (CSV)")
    q.add_argument("--r-min", type=float, default=1e-4)
    q.add_argument("--r-max", type=float, default=1e-1)
    q.add_argument("--points", type=int, default=7)
    q.add_argument("--depth", type=int, default=10, help="depth of the enclosure giving h")
    return p


COMMANDS = {
    "validate": cmd_validate, "dim": cmd_dim, "bounds": cmd_bounds,
    "pressure": cmd_pressure, "moran": cmd_moran, "measure": cmd_measure,
    "boxcount": cmd_boxcount,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = Run(args)
        return COMMANDS[args.command](run)
    except Failure as exc:
        print(f"ccdim: check failed: {exc}", file=sys.stderr)
        return 1
    except InputError as exc:
        print(f"ccdim: error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"ccdim: numeric failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"ccdim: error: cannot write output: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

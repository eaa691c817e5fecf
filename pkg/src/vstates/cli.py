"""Command line entry point: ``vstates trace|audit|field|oracle``."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError, SchemaError, VStateError

EXIT_OK = 0
EXIT_AUDIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

logger = logging.getLogger("vstates")


def _set_workers(n: int) -> None:
    import numba

    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _select_steps(records, selectors):
    chosen = []
    for s in selectors:
        if s == "all":
            chosen.extend(records)
        elif s == "first":
            nontrivial = [r for r in records if np.any(r.coeffs.a)]
            chosen.extend(nontrivial[:1])
        elif s == "last":
            chosen.extend(records[-1:])
        else:
            chosen.extend(r for r in records if r.step == float(s))
    seen, out = set(), []
    for r in chosen:
        if r.step not in seen:
            seen.add(r.step)
            out.append(r)
    return out


def render_record(rec, outdir, n_r=80, n_theta=40):
    from . import io, plotting
    from .field import StreamField

    fld = StreamField(rec.coeffs, rec.omega, rec.N)
    name = io.step_name(rec.step)
    outdir.plots.mkdir(parents=True, exist_ok=True)
    outdir.fields.mkdir(parents=True, exist_ok=True)
    grid = plotting.streamline_figure(
        fld, outdir.plots / f"{name}.svg", n_r=n_r, n_theta=n_theta,
        title=f"m = {rec.coeffs.m}, Omega = {rec.omega:.4f}")
    io.save_field_grid(outdir.fields / f"{name}.txt", grid)
    return outdir.plots / f"{name}.svg"


def _audit(records, outdir):
    from . import verify

    report = verify.audit_records(records)
    outdir.write_json("audit.json", report.as_dict())
    return report


def cmd_trace(args) -> int:
    from . import io
    from .continuation import trace_branch

    overrides = {}
    if args.out:
        overrides["out"] = args.out
    if args.plots:
        overrides["plots"] = True
    if args.workers:
        overrides["workers"] = args.workers
    try:
        if args.config:
            cfg = io.load_config(args.config, overrides)
        else:
            raise ConfigError("--config is required for trace")
        outdir = io.OutputDir(cfg.out)
        resumed = outdir.prepare(cfg, resume=args.resume)
    except (ConfigError, SchemaError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _set_workers(cfg.workers)

    def emit(rec):
        outdir.write_record(rec)
        print(f"step {rec.step:g}: Omega = {rec.omega:.6f}  a1 = {rec.a1:.6f}  "
              f"max|phi| = {rec.metrics.maxPhi:.6f}  newton = {rec.report.iters}", flush=True)

    summary = trace_branch(cfg.branch, resume=resumed or None, on_record=emit)
    records = summary.records
    outdir.write_json("summary.json", {
        "termination": summary.termination.value,
        "message": summary.message,
        "records": len(records),
        "solution_schema_version": io.SCHEMA_VERSION,
    })
    print(f"terminated: {summary.termination.value} ({summary.message or 'step budget reached'}); "
          f"{len(records)} records")
    if not any(np.any(r.coeffs.a) for r in records):
        print("no nontrivial solution was computed", file=sys.stderr)
        return EXIT_NUMERICAL

    if cfg.audit:
        report = _audit(records, outdir)
        print(f"audit: {'pass' if report.verdict else 'FAIL ' + ', '.join(report.failures())}")
    if cfg.plots:
        from . import plotting

        plotting.branch_figure(records, outdir.root / "branch.svg")
        chosen = _select_steps(records, cfg.plot_steps)
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for path in pool.map(lambda r: render_record(r, outdir, cfg.field_n_r, cfg.field_n_theta), chosen):
                print(f"wrote {path}")
    return EXIT_OK


def cmd_audit(args) -> int:
    from . import io

    outdir = io.OutputDir(args.out or "out")
    try:
        records = outdir.load_records()
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not records:
        print(f"no solutions under {outdir.solutions}", file=sys.stderr)
        return EXIT_CONFIG
    report = _audit(records, outdir)
    for name, e in report.entries.items():
        if not e.passed or args.verbose:
            print(f"{'PASS' if e.passed else 'FAIL'} {name}: {e.value:.6g} (tol {e.tolerance:.3g}) {e.detail}")
    print(f"audit verdict: {'pass' if report.verdict else 'fail'} over {len(records)} records")
    return EXIT_OK if report.verdict else EXIT_AUDIT_FAIL


def cmd_field(args) -> int:
    from . import io

    outdir = io.OutputDir(args.out or "out")
    path = outdir.solutions / f"{io.step_name(args.step)}.json"
    try:
        rec = io.loads_record(path.read_text())
    except OSError as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.workers:
        _set_workers(args.workers)
    try:
        svg = render_record(rec, outdir, args.n_r, args.n_theta)
    except VStateError as exc:
        print(f"field evaluation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote {svg}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    """Reference numbers from closed forms, next to what the solver computes."""
    from .boundary import residual
    from .field import StreamField
    from .solver import critical_frequency, eval_FM, trivial_multiplier
    from .spectral import PatchCoeffs, synthesize

    N = 1024
    print("quantity,closed_form,computed")
    for m in range(2, 7):
        om = critical_frequency(m)
        b = eval_FM(PatchCoeffs.zeros(m, 64), om, N).b
        print(f"Omega_{m},{float(om)!r},")
        print(f"trivial residual m={m},0.0,{float(np.max(np.abs(b)))!r}")
    for c in (0.1, 0.3, 0.5):
        co = PatchCoeffs(2, np.r_[c, np.zeros(15)])
        r = residual(synthesize(co, 256), (1 - c * c) / 4)
        print(f"Kirchhoff residual c={c},0.0,{float(np.max(np.abs(r)))!r}")
    om = critical_frequency(3)
    fld = StreamField(PatchCoeffs.zeros(3, 64), om, N)
    print(f"disk Psi_r r=2,{float(1 / 4 - 2 * om)!r},{float(fld.psi_r(np.array([2.0]), 0.0)[0])!r}")
    print(f"disk Psi_r r=0.5,{float(0.5 * (0.5 - om))!r},{float(fld.psi_r(np.array([0.5]), 0.0)[0])!r}")
    print(f"disk Psi r=2,{float(0.5 * np.log(2) - 1.5 * om)!r},{float(fld.psi_point(2.0))!r}")
    print(f"disk r_c,{float(1 / np.sqrt(2 * om))!r},{float(fld.rc(0.0))!r}")
    print(f"disk saddle distance,{float(1 / np.sqrt(2 * om) - 1)!r},")
    mult = trivial_multiplier(3, 4, 0.2)
    for k, v in enumerate(mult, 1):
        print(f"multiplier m=3 Omega=0.2 k={k},{float(v)!r},")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vstates", description="Rotating vortex patch branches and stream functions.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("trace", help="trace a solution branch")
    t.add_argument("--config", required=False)
    t.add_argument("--resume", action="store_true")
    t.add_argument("--workers", type=int)
    t.add_argument("--plots", action="store_true")
    t.add_argument("--out")
    t.set_defaults(func=cmd_trace)

    a = sub.add_parser("audit", help="audit the solutions in an output directory")
    a.add_argument("--out")
    a.add_argument("--workers", type=int)
    a.set_defaults(func=cmd_audit)

    f = sub.add_parser("field", help="render one solution")
    f.add_argument("--out")
    f.add_argument("--step", type=float, required=True)
    f.add_argument("--workers", type=int)
    f.add_argument("--n-r", type=int, default=80)
    f.add_argument("--n-theta", type=int, default=40)
    f.set_defaults(func=cmd_field)

    o = sub.add_parser("oracle", help="print closed-form reference values")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

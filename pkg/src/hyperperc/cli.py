"""Command-line laboratory: parse measure specs, dispatch experiments, write
manifests, JSONL replicate streams, and tidy CSV summaries.

Exit codes: 0 success, 2 malformed measure specification, 3 precondition gate
failure (wrong dimension, non-validating measure without --force, refused
enumeration sizes). Errors emit a machine-readable JSON record on stderr.
The worker count changes wall time only, never output bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

from . import __version__, clusters, experiments, measure as measure_mod, partitions
from ._kernels import BACKEND
from .experiments import BracketError, GateError, SweepPlan
from .lattice import GeometryError
from .measure import MeasureSpecError
from .sampler import (
    CONTAINED,
    Window,
    WindowTooLarge,
    configuration_at,
    draw_arrivals,
    write_configuration,
)

OUT_ENV = "HYPERPERC_OUT"

SUMMARY_COLUMNS = ["quantity", "u", "n", "L", "estimate", "lo", "hi", "N", "seed"]


def git_blob_hash(path) -> str:
    """Git-style content hash (sha1 over a blob header plus the raw bytes)."""
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class RunManifest:
    command: str
    argv: list
    artifact_version: str
    base_seed: int
    measure_digest: str
    measure_file: str
    measure_file_blob: str
    parameters: dict
    outputs: dict
    kernel_backend: str
    workers: int

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, sort_keys=True, indent=2)
            fh.write("\n")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_plot_data(records, path) -> None:
    """Tidy CSV: one row per estimate, stable column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for rec in records:
            p = rec.params
            writer.writerow([
                rec.quantity,
                _fmt(p.get("u")),
                _fmt(p.get("window", p.get("n"))),
                _fmt(p.get("L")),
                _fmt(rec.estimate),
                _fmt(rec.lo),
                _fmt(rec.hi),
                _fmt(rec.n),
                _fmt(rec.provenance.get("seed")),
            ])


def write_replicates_csv(rows, path) -> None:
    """Per-replicate cluster statistics."""
    if rows:
        keys = ["replicate", "u", "L", "window", "largest_size", "giant_count"]
        keys += sorted(k for k in rows[0] if k.startswith("cross_axis"))
        keys += ["origin_to_boundary"]
        keys = [k for k in keys if k in rows[0]]
    else:
        keys = ["replicate", "u", "L", "largest_size", "giant_count"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(keys)
        for row in rows:
            writer.writerow([_fmt(row.get(k)) for k in keys])


def write_jsonl(rows, path) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True))
            fh.write("\n")


def _parse_int_list(text):
    return tuple(int(x) for x in text.split(","))


def _parse_float_list(text):
    return tuple(float(x) for x in text.split(","))


def _parse_bisect(text):
    try:
        lo, hi, width = text.split(":")
        return float(lo), float(hi), float(width)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"--bisect expects LO:HI:WIDTH, got {text!r}") from None


def _parse_lambda(text) -> Fraction:
    lam = Fraction(text)
    if lam <= 1:
        raise argparse.ArgumentTypeError(f"lambda must be > 1, got {text}")
    return lam


def _load_measure(spec_arg):
    path = Path(spec_arg)
    if path.exists():
        return measure_mod.load_measure_spec(path), str(path)
    builtin = measure_mod.builtin_spec_path(spec_arg)
    return measure_mod.load_measure_spec(builtin), str(builtin)


def _out_dir(args) -> Path:
    if args.out:
        base = Path(args.out)
    elif os.environ.get(OUT_ENV):
        base = Path(os.environ[OUT_ENV])
    else:
        base = Path("runs") / args.command
    base.mkdir(parents=True, exist_ok=True)
    return base


def _manifest(args, out, parameters, measure=None, measure_file=None, outputs=None):
    manifest = RunManifest(
        command=args.command,
        argv=list(getattr(args, "_argv", sys.argv[1:])),
        artifact_version=__version__,
        base_seed=getattr(args, "seed", 0),
        measure_digest=measure.digest() if measure else "",
        measure_file=measure_file or "",
        measure_file_blob=git_blob_hash(measure_file) if measure_file else "",
        parameters=parameters,
        outputs=outputs or {},
        kernel_backend=BACKEND,
        workers=getattr(args, "workers", 1),
    )
    manifest.write(out / "manifest.json")
    return manifest


def _plan(args, m):
    return SweepPlan(
        measure=m,
        windows=tuple(args.window),
        replicates=args.replicates,
        base_seed=args.seed,
        u_values=tuple(getattr(args, "u", ()) or ()),
        bracket=getattr(args, "bisect", None),
        boundary_mode=CONTAINED,
        size_fraction=getattr(args, "theta", clusters.DEFAULT_GIANT_FRACTION),
        workers=args.workers,
        gate_radius=getattr(args, "radius", 3),
    )


# ---------------------------------------------------------------------------
# subcommands


def _cmd_validate(args):
    m, mfile = _load_measure(args.measure)
    out = _out_dir(args)
    _manifest(args, out, {"radius": args.radius}, m, mfile,
              {"report": str(out / "report.txt")})
    report = measure_mod.validate(m, args.radius)
    text = "\n".join(report.lines()) + "\n"
    (out / "report.txt").write_text(text)
    sys.stdout.write(text)
    return 0


def _cmd_sample(args):
    m, mfile = _load_measure(args.measure)
    out = _out_dir(args)
    u = args.u[0]
    _manifest(args, out, {"u": u, "window": list(args.window)}, m, mfile,
              {"configuration": str(out / "config.txt")})
    window = Window.centered(args.window[0] // 2, m.dimension, CONTAINED)
    sample = draw_arrivals(m, window, args.seed)
    config = configuration_at(sample, u)
    with open(out / "config.txt", "w") as fh:
        write_configuration(config, fh)
    print(f"sampled {config.n_open()} open instances of "
          f"{sample.candidates.n_candidates} candidates -> {out / 'config.txt'}")
    return 0


def _cmd_crossing(args):
    m, mfile = _load_measure(args.measure)
    out = _out_dir(args)
    _manifest(args, out, {"u": list(args.u), "windows": list(args.window),
                          "replicates": args.replicates}, m, mfile,
              {"summary": str(out / "summary.csv"),
               "replicates": str(out / "replicates.csv"),
               "records": str(out / "records.jsonl")})
    records, rows = experiments.crossing_curve(_plan(args, m), force=args.force)
    emit_plot_data(records, out / "summary.csv")
    write_replicates_csv(rows, out / "replicates.csv")
    write_jsonl(rows, out / "records.jsonl")
    for rec in records:
        if rec.quantity == "crossing_axis0":
            print(f"u={rec.params['u']} window={rec.params['window']} "
                  f"crossing={rec.estimate:.4f} [{rec.lo:.4f}, {rec.hi:.4f}]")
    return 0


def _cmd_uc(args):
    m, mfile = _load_measure(args.measure)
    out = _out_dir(args)
    _manifest(args, out, {"bisect": list(args.bisect), "windows": list(args.window),
                          "replicates": args.replicates}, m, mfile,
              {"summary": str(out / "summary.csv"),
               "replicates": str(out / "replicates.csv"),
               "records": str(out / "records.jsonl"),
               "result": str(out / "result.json")})
    result = experiments.bracket_uc(_plan(args, m), force=args.force)
    emit_plot_data(result.probes, out / "summary.csv")
    write_replicates_csv(list(result.rows), out / "replicates.csv")
    write_jsonl(list(result.rows), out / "records.jsonl")
    payload = {
        "u_low": result.u_low,
        "u_high": result.u_high,
        "window": result.window,
        "per_window": {str(k): list(v) for k, v in result.per_window.items()},
        "drift": result.drift,
    }
    (out / "result.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(f"u_c bracket at window {result.window}: "
          f"[{result.u_low:.6f}, {result.u_high:.6f}] drift={result.drift:+.6f}")
    return 0


def _cmd_uniqueness(args):
    m, mfile = _load_measure(args.measure)
    out = _out_dir(args)
    u = args.u[0]
    _manifest(args, out, {"u": u, "theta": args.theta, "windows": list(args.window),
                          "replicates": args.replicates}, m, mfile,
              {"summary": str(out / "summary.csv"),
               "replicates": str(out / "replicates.csv"),
               "records": str(out / "records.jsonl")})
    census = experiments.uniqueness_census(_plan(args, m), u, args.theta, force=args.force)
    emit_plot_data(list(census.fraction_one), out / "summary.csv")
    write_replicates_csv(list(census.rows), out / "replicates.csv")
    write_jsonl(list(census.rows), out / "records.jsonl")
    for size, dist in census.distributions.items():
        print(f"window {size}: giant-count distribution {dist}")
    return 0


def _cmd_slab(args):
    m, mfile = _load_measure(args.measure)
    out = _out_dir(args)
    u = args.u[0]
    _manifest(args, out, {"u": u, "L": list(args.L), "windows": list(args.window),
                          "replicates": args.replicates}, m, mfile,
              {"summary": str(out / "summary.csv"),
               "replicates": str(out / "replicates.csv"),
               "records": str(out / "records.jsonl")})
    result = experiments.slab_experiment(_plan(args, m), u, args.L, force=args.force)
    emit_plot_data(list(result.records), out / "summary.csv")
    write_replicates_csv(list(result.rows), out / "replicates.csv")
    write_jsonl(list(result.rows), out / "records.jsonl")
    for rec in result.records:
        print(f"L={rec.params['L']} crossing={rec.estimate:.4f} "
              f"[{rec.lo:.4f}, {rec.hi:.4f}]")
    print(f"monotone violations: {result.monotone_violations}; "
          f"first L with estimate >= 0.9: {result.crossing_l90}")
    return 0


def _cmd_square_loop(args):
    out = _out_dir(args)
    _manifest(args, out, {"u": list(args.u), "n_max": args.n_max,
                          "replicates": args.replicates},
              outputs={"summary": str(out / "summary.csv")})
    records = []
    for u in args.u:
        result = experiments.square_loop_experiment(
            u, args.n_max, args.replicates, args.seed)
        records.extend(result.records)
        print(f"u={u}: adjacency ok for scales {result.adjacency_checked}: "
              f"{result.adjacency_ok}; longest chain max={result.longest_chain_max} "
              f"mean={result.longest_chain_mean:.3f}")
        for rec in result.records:
            print(f"  n={rec.params['n']} empirical={rec.estimate:.5f} "
                  f"closed form={rec.params['closed_form']:.5f}")
    emit_plot_data(records, out / "summary.csv")
    return 0


def _cmd_annulus(args):
    m, mfile = _load_measure(args.measure)
    out = _out_dir(args)
    lam = args.lam
    _manifest(args, out, {"n": list(args.n), "lambda": str(lam),
                          "cutoff": args.cutoff, "cap": args.cap,
                          "decay": bool(args.decay)}, m, mfile,
              {"summary": str(out / "summary.csv")})
    records = []
    for n in args.n:
        outer = (lam.numerator * n) // lam.denominator
        mass = measure_mod.annulus_mass(m, n, outer, args.cutoff)
        records.append(experiments.EstimateRecord(
            "annulus_mass", mass, mass, mass, 0,
            {"n": n, "L": None, "outer": outer}, {"seed": None}))
        print(f"n={n} outer={outer} mass={mass!r}")
        if args.decay:
            g = measure_mod.annulus_decay(m, n, args.cutoff, args.cap)
            label = "exceeds cap" if g is None else g
            records.append(experiments.EstimateRecord(
                "annulus_decay", float(g) if g is not None else float("nan"),
                float("nan"), float("nan"), 0, {"n": n}, {"seed": None}))
            print(f"  decay radius g({n}) with cap {args.cap}: {label}")
    emit_plot_data(records, out / "summary.csv")
    return 0


def _cmd_seeds(args):
    m, mfile = _load_measure(args.measure)
    out = _out_dir(args)
    u = args.u[0]
    _manifest(args, out, {"u": u, "m": args.m, "window": list(args.window),
                          "octant_n": args.octant_n}, m, mfile,
              {"records": str(out / "records.jsonl")})
    window = Window.centered(args.window[0] // 2, m.dimension, CONTAINED)
    sample = draw_arrivals(m, window, args.seed)
    config = configuration_at(sample, u)
    cut = args.corner_cut
    if cut is None:
        cut = experiments.corner_cut_witness(m, args.m)
        if cut is None:
            raise GateError(
                f"no corner cut makes the fully open box B({args.m}) connect "
                "its modified box; give one explicitly")
    scan = experiments.detect_seeds(config, m, args.m, cut, octant_n=args.octant_n)
    rows = [{"center": list(c), "m": args.m, "corner_cut": cut} for c in scan.centers]
    write_jsonl(rows, out / "records.jsonl")
    print(f"{len(scan.centers)} seeds on {len(scan.scanned)} scanned boxes "
          f"(density {scan.density():.5f}; {scan.instances_per_box} instances per box)")
    if args.octant_n is not None:
        print(f"octant union size: {len(scan.octant_union)} vertices")
    return 0


def _cmd_verify_lemma(args):
    out = _out_dir(args)
    _manifest(args, out, {"max_size": args.max_size, "strict": bool(args.strict)},
              outputs={"report": str(out / "report.txt")})
    report = partitions.verify_lemma(args.max_size, strict=args.strict)
    (out / "report.txt").write_text(report.text())
    sys.stdout.write(report.text())
    return 0 if report.counterexamples == 0 else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperperc",
        description="Bernoulli hyper-edge percolation laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, measure=True, windows=True, u=False, seed=True):
        if measure:
            p.add_argument("--measure", required=True,
                           help="measure spec JSON path or builtin name (nn2d, nn3d, ...)")
        if windows:
            p.add_argument("--window", type=_parse_int_list, default=(64,),
                           help="comma-separated window sizes")
        if u:
            p.add_argument("--u", type=_parse_float_list, default=(0.5,),
                           help="comma-separated parameter values in [0, 1]")
        if seed:
            p.add_argument("--seed", type=int, default=1234, help="base RNG seed")
        p.add_argument("--replicates", type=int, default=200)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default=None, help=f"output dir (env {OUT_ENV} overrides default)")
        p.add_argument("--force", action="store_true",
                       help="run even when the measure fails validation gates")

    p = sub.add_parser("validate", help="structural checks of a measure")
    common(p, windows=False)
    p.add_argument("--radius", type=int, default=3)
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("sample", help="draw one configuration and serialize it")
    common(p, u=True)
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("crossing", help="crossing-probability curve over u")
    common(p, u=True)
    p.add_argument("--radius", type=int, default=3)
    p.set_defaults(fn=_cmd_crossing)

    p = sub.add_parser("uc", help="bisection bracket of the percolation threshold")
    common(p)
    p.add_argument("--bisect", type=_parse_bisect, required=True, metavar="LO:HI:WIDTH")
    p.add_argument("--radius", type=int, default=3)
    p.set_defaults(fn=_cmd_uc)

    p = sub.add_parser("uniqueness", help="giant-cluster census above the threshold")
    common(p, u=True)
    p.add_argument("--theta", type=float, default=0.05,
                   help="giant-cluster size fraction")
    p.add_argument("--radius", type=int, default=3)
    p.set_defaults(fn=_cmd_uniqueness)

    p = sub.add_parser("slab", help="slab-truncated crossing, d >= 3")
    common(p, u=True)
    p.add_argument("--L", type=_parse_int_list, required=True,
                   help="comma-separated slab thicknesses")
    p.add_argument("--radius", type=int, default=3)
    p.set_defaults(fn=_cmd_slab)

    p = sub.add_parser("square-loop", help="square-loop chain events per scale")
    common(p, measure=False, windows=False, u=True)
    p.add_argument("--n-max", type=int, default=6)
    p.set_defaults(fn=_cmd_square_loop)

    p = sub.add_parser("annulus", help="exact annulus crossing masses")
    common(p, windows=False, u=False, seed=False)
    p.add_argument("--n", type=_parse_int_list, required=True)
    p.add_argument("--lam", type=_parse_lambda, default=Fraction(2),
                   help="annulus ratio > 1 (rational, e.g. 2 or 3/2)")
    p.add_argument("--cutoff", type=int, default=None,
                   help="family scale cutoff")
    p.add_argument("--decay", action="store_true",
                   help="also search the decay radius g(n)")
    p.add_argument("--cap", type=int, default=4096)
    p.set_defaults(fn=_cmd_annulus)

    p = sub.add_parser("seeds", help="scan a sampled configuration for seed boxes")
    common(p, u=True)
    p.add_argument("--m", type=int, default=1, help="seed box radius")
    p.add_argument("--corner-cut", type=int, default=None)
    p.add_argument("--octant-n", type=int, default=None,
                   help="restrict the scan to the thickened octant face T(m, n)")
    p.set_defaults(fn=_cmd_seeds)

    p = sub.add_parser("verify-lemma", help="exhaustive compatible-family bound check")
    common(p, measure=False, windows=False, seed=False)
    p.add_argument("--max-size", type=int, default=6)
    p.add_argument("--strict", action="store_true",
                   help="use the strict-containment compatibility reading")
    p.set_defaults(fn=_cmd_verify_lemma)

    return parser


def _error_record(kind, exc):
    return json.dumps({"error": {"kind": kind, "message": str(exc)}}, sort_keys=True)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = list(argv) if argv is not None else sys.argv[1:]
    try:
        return args.fn(args)
    except MeasureSpecError as exc:
        print(_error_record("measure-spec", exc), file=sys.stderr)
        return 2
    except (GateError, BracketError, GeometryError, WindowTooLarge, ValueError,
            partitions.PartitionError) as exc:
        print(_error_record("precondition", exc), file=sys.stderr)
        return 3


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

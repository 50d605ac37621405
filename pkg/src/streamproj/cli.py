"""Command line front end: ``streamproj {generate,project,eval,plot,bench}``.

Exit status is 0 on success, 2 for usage errors and 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .core import UsageError
from .data import (
    CubeClusterSpec,
    generate_cube_clusters,
    iter_buffers,
    read_csv,
    read_matrix,
    read_snapshot,
    write_csv_matrix,
    write_snapshot,
)
from .engine import EngineConfig, StreamingProjector
from .evaluation import normalized_stress, shuffle_study, stream_dataset, stress_evolution
from .novelty import LofConfig

log = logging.getLogger("streamproj")

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
SVG_SIZE = 800
SVG_RADIUS = 2.0


def _write_rows(path, header, rows):
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if path:
            fh.close()


def _engine_config(args) -> EngineConfig:
    return EngineConfig(
        buffer_size=args.buffer_size,
        lof=LofConfig(k=args.lof_k, threshold=args.lof_threshold),
        projector=args.projector,
        seed=args.seed,
        frozen=args.frozen,
    )


def cmd_generate(args):
    spec = CubeClusterSpec(n=args.n, steps=args.steps, sigma=args.sigma, seed=args.seed)
    data = generate_cube_clusters(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dim = data.features.shape[1]
    write_csv_matrix(out / "data.csv", data.features, [f"f{i}" for i in range(dim)])
    _write_rows(out / "labels.csv", ("id", "label", "step"),
                zip(data.ids, data.labels, data.steps))
    (out / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
    log.info("wrote %d rows to %s", spec.n, out)


def _snapshot_name(buffer_count: int) -> str:
    return f"snapshot_{buffer_count:05d}.csv"


def cmd_project(args):
    config = _engine_config(args)
    if args.snapshot_every is not None and args.snapshot_every < 1:
        raise UsageError("--snapshot-every must be positive")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    source = read_csv(args.input, has_header=not args.no_header, label_col=args.label_col)
    engine = StreamingProjector(config)
    reports, snapshots = [], []
    t0 = time.perf_counter()
    for buf in iter_buffers(source, config.buffer_size):
        reports.append(engine.push_buffer(buf))
        if args.snapshot_every and len(reports) % args.snapshot_every == 0:
            path = out / _snapshot_name(len(reports))
            write_snapshot(engine.snapshot(), engine.current_step, path)
            snapshots.append(str(path))
    wall = time.perf_counter() - t0
    layout = out / "layout.csv"
    write_snapshot(engine.snapshot(), engine.current_step, layout)
    manifest = {
        "command": "project",
        "input": str(args.input),
        "has_header": not args.no_header,
        "label_col": args.label_col,
        "config": config.to_dict(),
        "points": len(engine),
        "buffers": [asdict(r) for r in reports],
        "rebuilds": engine.rebuilds,
        "landmarks": len(engine.landmarks) if engine.landmarks is not None else 0,
        "wall_seconds": wall,
        "outputs": {"layout": str(layout), "snapshots": snapshots},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    log.info("projected %d points in %.2fs (%d rebuilds)", len(engine), wall, engine.rebuilds)


def cmd_eval(args):
    x = read_matrix(args.input, has_header=not args.no_header, label_col=args.label_col)
    if args.mode == "final":
        if not args.layout:
            raise UsageError("--mode final needs --layout")
        snap = read_snapshot(args.layout)
        if len(snap["id"]) != len(x) or not np.array_equal(np.sort(snap["id"]), np.arange(len(x))):
            raise UsageError("layout ids do not match the rows of the input")
        order = np.argsort(snap["id"])
        pos = np.column_stack([snap["x"][order], snap["y"][order]])
        rep = normalized_stress(x, pos, seed=args.seed)
        _write_rows(args.out, ("stress", "pairs", "exact", "seed"),
                    [(repr(rep.stress), rep.pairs, int(rep.exact), "" if rep.seed is None else rep.seed)])
    elif args.mode == "evolution":
        reports, _ = stress_evolution(x, _engine_config(args), seed=args.seed)
        _write_rows(args.out, ("buffer", "stress", "pairs", "exact", "seed"),
                    [(b, repr(r.stress), r.pairs, int(r.exact), "" if r.seed is None else r.seed)
                     for b, r in reports])
    else:
        stresses = shuffle_study(x, _engine_config(args), runs=args.runs, seed=args.seed)
        _write_rows(args.out, ("run", "stress"), [(i, repr(s)) for i, s in enumerate(stresses)])


def _read_labels(path) -> dict[int, str]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"id", "label"} <= set(reader.fieldnames or ()):
            raise UsageError(f"{path}: labels file needs 'id' and 'label' columns")
        return {int(r["id"]): r["label"] for r in reader}


def render_svg(snap: dict, labels: dict | None = None, size: int = SVG_SIZE) -> str:
    """Scatter plot of a snapshot; opacity column drives fill-opacity."""
    ids, xs, ys = snap["id"], snap["x"], snap["y"]
    if snap.get("opacity") is None:
        raise UsageError("snapshot has no opacity column")
    alpha = snap["opacity"]
    if len(ids):
        lo = np.array([xs.min(), ys.min()])
        hi = np.array([xs.max(), ys.max()])
    else:
        lo, hi = np.zeros(2), np.ones(2)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    lo, hi = lo - 0.05 * span, hi + 0.05 * span
    scale = size / float(max(hi - lo))
    width, height = (hi - lo) * scale

    colors = {}
    if labels is not None:
        for i, lab in enumerate(sorted(set(labels.values()))):
            colors[lab] = PALETTE[i % len(PALETTE)]

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.2f} {height:.2f}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    # oldest first so the newest points are drawn on top
    for r in np.lexsort((ids, snap["step"])):
        cx = (xs[r] - lo[0]) * scale
        cy = (hi[1] - ys[r]) * scale
        fill = PALETTE[0]
        if labels is not None:
            fill = colors.get(labels.get(int(ids[r])), "#000000")
        lines.append(
            f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{SVG_RADIUS:g}" fill="{fill}" '
            f'fill-opacity="{alpha[r]:.4g}"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def cmd_plot(args):
    snap = read_snapshot(args.snapshot)
    labels = _read_labels(args.labels) if args.labels else None
    Path(args.out).write_text(render_svg(snap, labels))


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad --buffer-sizes {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise UsageError("--buffer-sizes needs positive integers")
    return sizes


def cmd_bench(args):
    sizes = _parse_sizes(args.buffer_sizes)
    if args.seeds < 1:
        raise UsageError("--seeds must be positive")
    base = _engine_config(args)
    fixed = read_matrix(args.input, has_header=not args.no_header) if args.input else None
    rows = []
    for seed in range(args.seed, args.seed + args.seeds):
        if fixed is None:
            x = generate_cube_clusters(CubeClusterSpec(n=args.n, steps=args.steps, seed=seed)).features
        elif args.shuffle:
            x = fixed[np.random.default_rng(seed).permutation(len(fixed))]
        else:
            x = fixed
        for b in sizes:
            res = stream_dataset(x, replace(base, buffer_size=b, seed=seed), seed=seed)
            rows.append((b, seed, repr(res.stress.stress), repr(res.seconds),
                         repr(float(np.median(res.buffer_seconds))), res.landmarks[-1], res.rebuilds))
    _write_rows(args.out, ("buffer_size", "seed", "stress", "wall_seconds",
                           "median_buffer_seconds", "landmarks", "rebuilds"), rows)


def _add_engine_flags(p):
    p.add_argument("--buffer-size", type=int, default=1000)
    p.add_argument("--lof-k", type=int, default=LofConfig.k)
    p.add_argument("--lof-threshold", type=float, default=LofConfig.threshold)
    p.add_argument("--projector", choices=("lmds", "pekalska"), default="lmds")
    p.add_argument("--frozen", action="store_true",
                   help="fit once on the first buffer and never rebuild")
    p.add_argument("--seed", type=int, default=0)


def _add_input_flags(p, required=True):
    p.add_argument("--input", required=required)
    p.add_argument("--no-header", action="store_true", help="input CSV has no header row")
    p.add_argument("--label-col", action="store_true", help="last input column is a label")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamproj", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write the synthetic cube-cluster stream")
    p.add_argument("--n", type=int, default=50_000)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("project", help="stream a CSV through the engine")
    _add_input_flags(p)
    _add_engine_flags(p)
    p.add_argument("--snapshot-every", type=int, default=None, metavar="K")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("eval", help="normalized stress of layouts and runs")
    _add_input_flags(p)
    _add_engine_flags(p)
    p.add_argument("--layout")
    p.add_argument("--mode", choices=("final", "evolution", "shuffle"), default="final")
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="render a snapshot as SVG")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--labels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("bench", help="stress and time across buffer sizes")
    _add_input_flags(p, required=False)
    _add_engine_flags(p)
    p.add_argument("--buffer-sizes", default="250,500,1000")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds, starting at --seed")
    p.add_argument("--n", type=int, default=20_000, help="generated dataset size without --input")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--shuffle", action="store_true", help="shuffle --input per seed")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"streamproj {args.command}: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"streamproj {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

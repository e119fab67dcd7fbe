"""``rfamado`` command line.

Exit codes: 0 success, 2 usage/configuration error, 3 data error,
4 numerical error. Failures print one JSON line on stderr, e.g.
``{"error": "data", "message": "..."}``. Every successful command writes a
JSON manifest (configuration plus SHA-256 of inputs and outputs) beside its
outputs.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import Partition, pam, run_pipeline, shuffle_ablation, silhouette
from .dataset import load_dataset, point_seed, save_dataset, split_hemispheres
from .ensemble import CentralPartition, central_partition, compare_central, write_geojson
from .errors import ConfigError, DataError, NumericError, RfaMadoError
from .gevtheory import QuadratureConfig, figure3_surface, write_surface_csv
from .madogram import CStarConfig, DissimilarityMatrix, dissimilarity_matrix
from .simulate import load_sim_spec, sample_grid

log = logging.getLogger("rfamado")

COMMANDS = ("dissim", "cluster", "ensemble", "compare", "shuffle-test", "simulate", "theory-surface", "pipeline")


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(path, args, inputs, outputs, streams=None):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {
        "tool": "rfamado",
        "version": __version__,
        "command": args.command,
        "config": cfg,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
    }
    if streams:
        manifest["random_streams"] = streams
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


def _manifest_path(output) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


def _sidecar_points(output) -> Path:
    output = Path(output)
    return output.with_name(output.stem + ".points.csv")


def _require_file(path, what="input"):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} file not found: {path}")
    return p


def _require_outdir(path):
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise UsageError(f"output directory does not exist: {parent}")
    if not os.access(parent, os.W_OK):
        raise UsageError(f"output directory not writable: {parent}")
    return Path(path)


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("RFAMADO_THREADS")
    if env is None:
        return 1
    try:
        n = int(env)
    except ValueError:
        raise UsageError(f"RFAMADO_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise UsageError("RFAMADO_THREADS must be >= 1")
    return n


def _cstar(args) -> CStarConfig:
    return CStarConfig(args.c_min, args.c_max, args.k_grid, args.refine)


def _grid_spec(text):
    try:
        a, b, n = text.split(":")
        n = int(n)
        a, b = float(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:count, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("count must be >= 1")
    return np.linspace(a, b, n).tolist()


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _add_cstar(p):
    p.add_argument("--k-grid", type=int, default=129, help="log-spaced grid size for c (odd)")
    p.add_argument("--c-min", type=float, default=0.1)
    p.add_argument("--c-max", type=float, default=10.0)
    p.add_argument("--refine", type=int, default=3, help="step-halving rounds around the grid argmin")
    p.add_argument("--no-prescale", action="store_true", help="do not divide series by their mean")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default: $RFAMADO_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rfamado", description="RFA-madogram clustering of gridded annual maxima")
    parser.add_argument("--version", action="version", version=f"rfamado {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("dissim", help="RFA-madogram dissimilarity matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--hemisphere", choices=("north", "south", "both"), default="both")
    p.add_argument("--output", required=True)
    _add_cstar(p)
    p.set_defaults(func=cmd_dissim)

    p = sub.add_parser("cluster", help="PAM on a dissimilarity CSV")
    p.add_argument("--dissim", required=True)
    p.add_argument("--k", type=_positive_int, default=4)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("ensemble", help="central partition from several partition CSVs")
    p.add_argument("--partitions", required=True, help="comma-separated partition CSVs")
    p.add_argument("--reference", help="central CSV to align every partition to")
    p.add_argument("--output", required=True)
    p.add_argument("--geojson")
    p.add_argument("--coords", help="dataset CSV supplying lat/lon for --geojson")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("compare", help="flag modal-cluster changes between two central partitions")
    p.add_argument("--a", required=True, help="counterfactual central CSV")
    p.add_argument("--b", required=True, help="factual central CSV")
    p.add_argument("--output", required=True)
    p.add_argument("--geojson")
    p.add_argument("--coords")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("shuffle-test", help="dependence ablation by temporal shuffling")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=_positive_int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hemisphere", choices=("north", "south", "both", "global"), default="both")
    p.add_argument("--output", required=True)
    _add_cstar(p)
    p.set_defaults(func=cmd_shuffle)

    p = sub.add_parser("simulate", help="sample a clustered logistic max-stable dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("theory-surface", help="D(c*) over (alpha, xi1/xi2) for logistic GEV pairs")
    p.add_argument("--alphas", type=_grid_spec, default=_grid_spec("0.01:1:25"))
    p.add_argument("--ratios", type=_grid_spec, default=_grid_spec("1:10:25"))
    p.add_argument("--xi2", type=float, default=0.01)
    p.add_argument("--abs-tol", type=float, default=1e-8)
    p.add_argument("--threads", type=_positive_int, default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("pipeline", help="dataset -> hemispheres -> dissimilarity -> PAM")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=_positive_int, default=4)
    p.add_argument("--hemisphere", choices=("north", "south", "both", "global"), default="both")
    p.add_argument("--output-dir", required=True)
    _add_cstar(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def _write_points(path, d):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("index,point_id,lat,lon\n")
        for i, s in enumerate(d.points):
            fh.write(f"{i},{s.point_id},{s.lat!r},{s.lon!r}\n")


def _read_points(path):
    ids = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "index,point_id,lat,lon":
            raise DataError(f"{path}: unexpected header {header!r}")
        for line in fh:
            if line.strip():
                ids.append(line.split(",")[1])
    return ids


def _coords(path):
    d = load_dataset(_require_file(path, "coords"))
    return {s.point_id: (s.lat, s.lon) for s in d.points}


def cmd_dissim(args):
    inp = _require_file(args.input)
    out = _require_outdir(args.output)
    cfg = _cstar(args)
    threads = _threads(args)
    d = load_dataset(inp)
    if args.hemisphere != "both":
        north, south = split_hemispheres(d)
        d = north if args.hemisphere == "north" else south
    log.info("dissim: %d points x %d years, %d threads", d.p, d.n, threads)
    mat = dissimilarity_matrix(d, cfg, threads=threads, prescale=not args.no_prescale)
    mat.to_csv(out)
    pts = _sidecar_points(out)
    _write_points(pts, d)
    _write_manifest(_manifest_path(out), args, [inp], [out, pts])
    log.info("dissim: wrote %s (%d boundary pairs)", out, mat.meta["boundary_pairs"])


def cmd_cluster(args):
    src = _require_file(args.dissim)
    out = _require_outdir(args.output)
    pts = _sidecar_points(src)
    ids = _read_points(pts) if pts.is_file() else None
    mat = DissimilarityMatrix.from_csv(src, ids)
    part = pam(mat, args.k)
    part.to_csv(out)
    inputs = [src] + ([pts] if ids is not None else [])
    _write_manifest(_manifest_path(out), args, inputs, [out])
    msg = f"cluster: k={args.k} cost={part.total_cost:.6g}"
    if 2 <= args.k < mat.p:
        msg += f" silhouette={silhouette(mat, part):.4f}"
    log.info(msg)


def cmd_ensemble(args):
    paths = [_require_file(p.strip(), "partition") for p in args.partitions.split(",") if p.strip()]
    out = _require_outdir(args.output)
    if args.geojson:
        _require_outdir(args.geojson)
        if not args.coords:
            raise UsageError("--geojson needs --coords")
    # consensus alignment is order dependent: fix the order by model name
    paths = sorted(paths, key=lambda p: (p.stem, str(p)))
    parts = [Partition.from_csv(p) for p in paths]
    k = max(q.k for q in parts)
    parts = [Partition(q.labels, np.concatenate([q.medoids, np.full(k - q.k, -1)]), k, point_ids=q.point_ids)
             for q in parts]
    reference = None
    inputs = list(paths)
    if args.reference:
        ref_path = _require_file(args.reference, "reference")
        reference = CentralPartition.from_csv(ref_path, k).as_partition()
        inputs.append(ref_path)
    cen = central_partition(parts, reference)
    cen.to_csv(out)
    outputs = [out]
    if args.geojson:
        coords = _coords(args.coords)
        lat = [coords[i][0] for i in cen.point_ids]
        lon = [coords[i][1] for i in cen.point_ids]
        write_geojson(args.geojson, cen.point_ids, lat, lon, cen.modal, cen.probability)
        outputs.append(Path(args.geojson))
        inputs.append(Path(args.coords))
    _write_manifest(_manifest_path(out), args, inputs, outputs)
    log.info("ensemble: %d partitions, %d tied points", len(parts), int(cen.tie.sum()))


def cmd_compare(args):
    a = _require_file(args.a)
    b = _require_file(args.b)
    out = _require_outdir(args.output)
    if args.geojson and not args.coords:
        raise UsageError("--geojson needs --coords")
    ca = CentralPartition.from_csv(a)
    cb = CentralPartition.from_csv(b)
    k = max(ca.k, cb.k)
    ca.k = cb.k = k
    rep = compare_central(ca, cb)
    rep.to_csv(out)
    outputs = [out]
    inputs = [a, b]
    if args.geojson:
        coords = _coords(args.coords)
        lat = [coords[i][0] for i in ca.point_ids]
        lon = [coords[i][1] for i in ca.point_ids]
        mapping = np.asarray(rep.mapping)
        write_geojson(args.geojson, ca.point_ids, lat, lon, mapping[cb.modal], cb.probability, rep.changed)
        outputs.append(Path(args.geojson))
        inputs.append(Path(args.coords))
    _write_manifest(_manifest_path(out), args, inputs, outputs)
    log.info("compare: %d of %d points changed modal cluster", rep.n_changed, len(rep.changed))


def cmd_shuffle(args):
    inp = _require_file(args.input)
    out = _require_outdir(args.output)
    cfg = _cstar(args)
    threads = _threads(args)
    d = load_dataset(inp)
    rep = shuffle_ablation(d, args.k, args.seed, cfg, threads=threads, hemisphere=args.hemisphere,
                           prescale=not args.no_prescale)
    rep.to_csv(out)
    streams = {pid: point_seed(args.seed, "shuffle:" + pid) for pid in d.point_ids}
    _write_manifest(_manifest_path(out), args, [inp], [out], {"shuffle": streams})
    log.info("shuffle-test: fraction of points with lower dissimilarity unshuffled = %.4f", rep.fraction_lower)
    print(f"fraction_lower={rep.fraction_lower!r}")


def cmd_simulate(args):
    src = _require_file(args.spec, "spec")
    out = _require_outdir(args.output)
    spec = load_sim_spec(src)
    d = sample_grid(spec, args.seed)
    save_dataset(d, out)
    streams = {"cluster:" + c.cluster_id: point_seed(args.seed, "cluster:" + c.cluster_id) for c in spec.clusters}
    streams.update({"point:" + p.point_id: point_seed(args.seed, "point:" + p.point_id)
                    for c in spec.clusters for p in c.points})
    _write_manifest(_manifest_path(out), args, [src], [out], streams)
    log.info("simulate: %d points x %d years -> %s", d.p, d.n, out)


def cmd_surface(args):
    out = _require_outdir(args.output)
    if not all(0 < a <= 1 for a in args.alphas):
        raise UsageError("alphas must lie in (0, 1]")
    if args.xi2 <= 0:
        raise UsageError("--xi2 must be positive")
    table = figure3_surface(args.alphas, args.ratios, args.xi2, QuadratureConfig(args.abs_tol), threads=_threads(args))
    write_surface_csv(table, out)
    _write_manifest(_manifest_path(out), args, [], [out])
    log.info("theory-surface: %d cells -> %s", len(table), out)


def cmd_pipeline(args):
    inp = _require_file(args.input)
    outdir = Path(args.output_dir)
    if outdir.exists() and not outdir.is_dir():
        raise UsageError(f"not a directory: {outdir}")
    _require_outdir(outdir)
    cfg = _cstar(args)
    threads = _threads(args)
    d = load_dataset(inp)
    outdir.mkdir(exist_ok=True)
    results = run_pipeline(d, args.k, cfg, threads=threads, hemisphere=args.hemisphere,
                           prescale=not args.no_prescale)
    outputs = []
    summary = {}
    for res in results:
        mpath = outdir / f"dissim_{res.name}.csv"
        ppath = outdir / f"partition_{res.name}.csv"
        res.matrix.to_csv(mpath)
        pts = _sidecar_points(mpath)
        _write_points(pts, res.dataset)
        res.partition.to_csv(ppath)
        outputs += [mpath, pts, ppath]
        summary[res.name] = {"points": res.dataset.p, "total_cost": res.partition.total_cost,
                             "silhouette": res.silhouette,
                             "medoids": [res.dataset.point_ids[m] for m in res.partition.medoids]}
        log.info("pipeline: %s k=%d cost=%.6g silhouette=%s", res.name, args.k, res.partition.total_cost,
                 "n/a" if res.silhouette is None else f"{res.silhouette:.4f}")
    spath = outdir / "summary.json"
    with open(spath, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append(spath)
    _write_manifest(outdir / "manifest.json", args, [inp], outputs)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                            format="%(name)s: %(message)s", stream=sys.stderr, force=True)
        args.func(args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except RfaMadoError as exc:
        kind = {2: "usage", 3: "data", 4: "numeric"}.get(exc.exit_code, "error")
        print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code
    except (OSError, UnicodeDecodeError) as exc:
        print(json.dumps({"error": "data", "message": str(exc)}), file=sys.stderr)
        return DataError.exit_code
    except (FloatingPointError, ArithmeticError) as exc:
        print(json.dumps({"error": "numeric", "message": str(exc)}), file=sys.stderr)
        return NumericError.exit_code
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

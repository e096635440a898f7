"""Command-line pipelines: ingest, synth, decompose, score, eval, sweep.

Every command validates its inputs up front, writes outputs atomically into
the target directory, and drops a ``provenance.json`` recording the effective
configuration, the seed, and content hashes of all inputs, sufficient to
replay the command bit-identically.

Exit codes: 0 success, 2 bad arguments, 3 unreadable input, 4 schema or
shape violation, 5 non-finite solver failure.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .evaluation import (
    PipelineSpec,
    roc_auc,
    run_trials,
    sweep as run_sweep,
    trials_to_csv,
)
from .graphs import build_all_mode_graphs
from .ingest import ZoneIndex, dataset_stats, ingest
from .scoring import ScoreTensor, score_tensor
from .solver import (
    NonFiniteIterateError,
    SolverConfig,
    default_hyperparameters,
    diagnostics_to_csv,
    solve,
)
from .storage import load_json, load_tensor, save_json, save_tensor
from .synth import SyntheticSpec, generate
from .tensors import project

log = logging.getLogger("gloss")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNREADABLE = 3
EXIT_SCHEMA = 4
EXIT_NONFINITE = 5


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_provenance(out_dir: str, command: str, config: dict, inputs: dict, seed=None) -> None:
    record = {
        "command": command,
        "config": config,
        "inputs": {path: _sha256(path) for path in inputs.values() if path},
        "seed": seed,
        "artifact_version": __version__,
    }
    save_json(os.path.join(out_dir, "provenance.json"), record)


def _write_text(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(text)
    os.replace(tmp, path)


def _load_tensor_checked(path: str) -> np.ndarray:
    values, _ = load_tensor(path)
    return values


def _add_synth_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--zones", type=int, default=81)
    p.add_argument("--weeks", type=int, default=52)
    p.add_argument("--c", type=float, default=2.5, help="anomaly amplitude multiplier")
    p.add_argument("--events", type=int, default=700)
    p.add_argument("--duration", type=int, default=7)
    p.add_argument("--noise-var", type=float, default=0.5)
    p.add_argument("--missing", type=float, default=0.0, help="percent of day fibers to zero")
    p.add_argument("--base", default=None, help="optional (24,7,zones) base profile tensor file")


def _synth_spec_from_args(args, seed: int) -> SyntheticSpec:
    base = None
    if args.base is not None:
        base = _load_tensor_checked(args.base)
    return SyntheticSpec(
        zones=args.zones,
        weeks=args.weeks,
        c=args.c,
        n_events=args.events,
        duration=args.duration,
        noise_var=args.noise_var,
        missing_percent=args.missing,
        seed=seed,
        base=base,
    )


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=["gloss", "loss", "whorpca", "horpca"], default=None)
    p.add_argument("--config", default=None, help="solver config JSON file")
    p.add_argument("--knn", type=int, default=10, help="graph neighbor count")
    p.add_argument("--bandwidth", default="median", help="graph kernel bandwidth (positive number or 'median')")
    p.add_argument("--sparsity-weight", type=float, default=None)
    p.add_argument("--tv-weight", type=float, default=None)
    p.add_argument("--graph-weight", type=float, default=None)
    p.add_argument("--nuclear-weights", default=None, help="four comma-separated weights")
    p.add_argument("--penalties", default=None, help="five comma-separated penalties")
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(","))


def _resolve_config(args, y: np.ndarray, omega: np.ndarray) -> SolverConfig:
    """Data-driven defaults, overlaid by config-file values, overlaid by flags."""
    file_cfg = {}
    if args.config is not None:
        file_cfg = load_json(args.config)
        if not isinstance(file_cfg, dict):
            raise ValueError("solver config file must hold a JSON object")
        unknown = file_cfg.keys() - {
            "variant", "sparsity_weight", "tv_weight", "graph_weight",
            "nuclear_weights", "penalties", "max_iters", "tol",
        }
        if unknown:
            raise ValueError(f"solver config has unknown keys: {sorted(unknown)}")

    variant = args.variant or file_cfg.get("variant") or "gloss"

    overrides = {k: v for k, v in file_cfg.items() if k != "variant"}
    if args.sparsity_weight is not None:
        overrides["sparsity_weight"] = args.sparsity_weight
    if args.tv_weight is not None:
        overrides["tv_weight"] = args.tv_weight
    if args.graph_weight is not None:
        overrides["graph_weight"] = args.graph_weight
    if args.nuclear_weights is not None:
        overrides["nuclear_weights"] = _floats(args.nuclear_weights)
    if args.penalties is not None:
        overrides["penalties"] = _floats(args.penalties)
    if args.max_iters is not None:
        overrides["max_iters"] = args.max_iters
    if args.tol is not None:
        overrides["tol"] = args.tol
    if "nuclear_weights" in overrides:
        overrides["nuclear_weights"] = tuple(float(x) for x in overrides["nuclear_weights"])
    if "penalties" in overrides:
        overrides["penalties"] = tuple(float(x) for x in overrides["penalties"])

    # data-driven defaults are only computed for fields not pinned explicitly
    science_keys = {"sparsity_weight", "tv_weight", "graph_weight", "nuclear_weights", "penalties"}
    if science_keys <= overrides.keys():
        return SolverConfig(
            variant=variant,
            max_iters=int(overrides.get("max_iters", 200)),
            tol=float(overrides.get("tol", 1e-6)),
            **{k: overrides[k] for k in science_keys},
        )
    cfg = default_hyperparameters(y, omega, variant)
    return cfg.with_overrides(**overrides)


def _cmd_synth(args) -> int:
    spec = _synth_spec_from_args(args, args.seed)
    instance = generate(spec)
    os.makedirs(args.out, exist_ok=True)
    meta = {"provenance": {"command": "synth", "spec": spec.to_json_dict()}}
    save_tensor(os.path.join(args.out, "data.ten"), instance.y, {**meta, "mode_names": ["hour", "day", "week", "zone"]})
    save_tensor(os.path.join(args.out, "labels.ten"), instance.labels, meta)
    save_tensor(os.path.join(args.out, "mask.ten"), instance.omega, meta)
    _write_provenance(args.out, "synth", spec.to_json_dict(), {"base": args.base}, seed=args.seed)
    log.info("synth: wrote %s", args.out)
    return EXIT_OK


def _cmd_decompose(args) -> int:
    y = _load_tensor_checked(args.data)
    if args.mask is not None:
        omega = _load_tensor_checked(args.mask)
        if omega.dtype != np.bool_:
            omega = omega != 0.0
    else:
        omega = np.ones(y.shape, dtype=bool)
    if omega.shape != y.shape:
        raise ValueError(f"mask shape {omega.shape} does not match data shape {y.shape}")

    cfg = _resolve_config(args, y, omega)
    graphs = None
    if cfg.variant == "gloss":
        bandwidth = args.bandwidth if args.bandwidth == "median" else float(args.bandwidth)
        graphs = build_all_mode_graphs(project(y, omega), k=args.knn, bandwidth=bandwidth)

    progress = None
    if args.progress:
        def progress(rec):
            sys.stderr.write(json.dumps({
                "iteration": rec.iteration,
                "feasibility": rec.feasibility,
                "rel_change": rec.rel_change,
                "objective": rec.objective,
            }) + "\n")

    result = solve(y, omega, cfg, graphs=graphs, progress=progress)

    os.makedirs(args.out, exist_ok=True)
    save_tensor(os.path.join(args.out, "low_rank.ten"), result.low_rank)
    save_tensor(os.path.join(args.out, "sparse.ten"), result.sparse)
    _write_text(os.path.join(args.out, "diagnostics.csv"), diagnostics_to_csv(result.diagnostics))
    save_json(os.path.join(args.out, "config.json"), cfg.to_json_dict())
    _write_provenance(
        args.out, "decompose", cfg.to_json_dict(),
        {"data": args.data, "mask": args.mask, "config": args.config},
    )
    log.info(
        "decompose: %s iterations, converged=%s, feasibility=%.3e",
        result.iterations, result.converged, result.diagnostics[-1].feasibility,
    )
    return EXIT_OK


def _cmd_score(args) -> int:
    s = _load_tensor_checked(args.sparse)
    st = score_tensor(s, method=args.method, k=args.lof_neighbors)
    os.makedirs(args.out, exist_ok=True)
    save_tensor(os.path.join(args.out, "scores.ten"), st.scores, {"method": st.method})
    _write_provenance(
        args.out, "score",
        {"method": args.method, "lof_neighbors": args.lof_neighbors},
        {"sparse": args.sparse},
    )
    return EXIT_OK


def _parse_seeds(args) -> list:
    if args.seeds is not None:
        return [int(x) for x in args.seeds.split(",")]
    return list(range(args.seed_base, args.seed_base + args.trials))


def _cmd_eval(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.scores is not None or args.labels is not None:
        if args.scores is None or args.labels is None:
            raise ValueError("file mode needs both --scores and --labels")
        scores = _load_tensor_checked(args.scores)
        labels = _load_tensor_checked(args.labels)
        if labels.dtype != np.bool_:
            labels = labels != 0.0
        if scores.shape != labels.shape:
            raise ValueError(f"scores shape {scores.shape} does not match labels shape {labels.shape}")
        roc = roc_auc(ScoreTensor(scores=scores, method="file"), labels)
        rows = "\n".join(f"{float(fpr):.17g},{float(tpr):.17g}" for fpr, tpr in roc.points)
        _write_text(os.path.join(args.out, "roc.csv"), "fpr,tpr\n" + rows + "\n")
        save_json(os.path.join(args.out, "metrics.json"), {
            "auc": roc.auc,
            "positives": int(labels.sum()),
            "negatives": int(labels.size - labels.sum()),
        })
        _write_provenance(args.out, "eval", {"mode": "files"}, {"scores": args.scores, "labels": args.labels})
        print(f"auc {roc.auc:.6f}")
        return EXIT_OK

    seeds = _parse_seeds(args)
    pipeline = PipelineSpec(
        variant=args.variant or "gloss",
        scorer=args.scorer,
        synth=_synth_spec_from_args(args, seeds[0]),
        knn=args.knn,
        lof_neighbors=args.lof_neighbors,
    )
    stats = run_trials(pipeline, seeds, workers=args.workers)
    _write_text(os.path.join(args.out, "trials.csv"), trials_to_csv(stats, pipeline))
    save_json(os.path.join(args.out, "summary.json"), {
        "mean_auc": stats.mean_auc,
        "std_auc": stats.std_auc,
        "trials": len(stats.records),
        "variant": pipeline.variant,
        "scorer": pipeline.scorer,
    })
    _write_provenance(
        args.out, "eval",
        {"variant": pipeline.variant, "scorer": pipeline.scorer, "seeds": seeds,
         "synth": pipeline.synth.to_json_dict(), "workers": args.workers},
        {"base": args.base}, seed=seeds[0],
    )
    print(f"mean_auc {stats.mean_auc:.6f} std {stats.std_auc:.6f}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    seeds = _parse_seeds(args)
    pipeline = PipelineSpec(
        variant=args.variant or "gloss",
        scorer=args.scorer,
        synth=_synth_spec_from_args(args, seeds[0]),
        knn=args.knn,
        lof_neighbors=args.lof_neighbors,
    )
    values_x = [float(v) for v in args.values_x.split(",")]
    values_y = [float(v) for v in args.values_y.split(",")]
    result = run_sweep(pipeline, args.param_x, values_x, args.param_y, values_y, seeds, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    _write_text(os.path.join(args.out, "grid.csv"), result.to_csv())
    _write_provenance(
        args.out, "sweep",
        {"param_x": args.param_x, "values_x": values_x,
         "param_y": args.param_y, "values_y": values_y,
         "variant": pipeline.variant, "scorer": pipeline.scorer,
         "seeds": seeds, "synth": pipeline.synth.to_json_dict()},
        {"base": args.base}, seed=seeds[0],
    )
    return EXIT_OK


def _cmd_ingest(args) -> int:
    zones = ZoneIndex.from_file(args.zones)
    epoch = datetime.date.fromisoformat(args.epoch)
    result = ingest(
        args.csv, zones, epoch,
        weeks=args.weeks,
        timestamp_col=args.timestamp_col,
        zone_col=args.zone_col,
        timestamp_format=args.timestamp_format,
        on_bad_row=args.bad_rows,
    )
    os.makedirs(args.out, exist_ok=True)
    meta = {
        "mode_names": ["hour", "day", "week", "zone"],
        "zone_ids": list(zones.ids),
        "epoch": args.epoch,
    }
    save_tensor(os.path.join(args.out, "data.ten"), result.tensor, meta)
    save_tensor(os.path.join(args.out, "mask.ten"), result.omega, meta)
    stats = dataset_stats(result.tensor)
    save_json(os.path.join(args.out, "stats.json"), {
        **stats.to_json_dict(),
        "accepted": result.report.accepted,
        "skipped_out_of_range": result.report.skipped_out_of_range,
        "skipped_unknown_zone": result.report.skipped_unknown_zone,
        "bad_rows": result.report.bad_rows,
    })
    _write_provenance(
        args.out, "ingest",
        {"epoch": args.epoch, "weeks": args.weeks, "bad_rows": args.bad_rows},
        {"csv": args.csv, "zones": args.zones},
    )
    log.info("ingest: accepted %d records", result.report.accepted)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gloss", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="info logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic instance")
    _add_synth_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("decompose", help="run the decomposition")
    p.add_argument("--data", required=True, help="data tensor file")
    p.add_argument("--mask", default=None, help="support mask tensor file")
    _add_solver_flags(p)
    p.add_argument("--progress", action="store_true", help="JSON-lines progress on stderr")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("score", help="score a sparse tensor")
    p.add_argument("--sparse", required=True)
    p.add_argument("--method", choices=["ee", "lof"], default="ee")
    p.add_argument("--lof-neighbors", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("eval", help="AUC from files, or multi-seed synthetic trials")
    p.add_argument("--scores", default=None)
    p.add_argument("--labels", default=None)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seeds", default=None, help="comma-separated trial seeds")
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--scorer", choices=["ee", "lof"], default="ee")
    p.add_argument("--variant", choices=["gloss", "loss", "whorpca", "horpca"], default=None)
    p.add_argument("--knn", type=int, default=10)
    p.add_argument("--lof-neighbors", type=int, default=10)
    _add_synth_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="mean AUC over a 2-D hyperparameter grid")
    p.add_argument("--param-x", required=True)
    p.add_argument("--values-x", required=True)
    p.add_argument("--param-y", required=True)
    p.add_argument("--values-y", required=True)
    p.add_argument("--seeds", default=None)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--scorer", choices=["ee", "lof"], default="ee")
    p.add_argument("--variant", choices=["gloss", "loss", "whorpca", "horpca"], default=None)
    p.add_argument("--knn", type=int, default=10)
    p.add_argument("--lof-neighbors", type=int, default=10)
    _add_synth_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("ingest", help="aggregate a trip CSV into a count tensor")
    p.add_argument("--csv", required=True)
    p.add_argument("--zones", required=True, help="zone whitelist, one id per line")
    p.add_argument("--epoch", required=True, help="week-1/day-1 date, YYYY-MM-DD")
    p.add_argument("--weeks", type=int, default=52)
    p.add_argument("--timestamp-col", default="timestamp")
    p.add_argument("--zone-col", default="zone_id")
    p.add_argument("--timestamp-format", default="%Y-%m-%d %H:%M:%S")
    p.add_argument("--bad-rows", choices=["error", "skip"], default="error")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except NonFiniteIterateError as exc:
        log.error("solver failure: %s", exc)
        return EXIT_NONFINITE
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        log.error("unreadable input: %s", exc)
        return EXIT_UNREADABLE
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_SCHEMA
    except OSError as exc:
        log.error("i/o failure: %s", exc)
        return EXIT_UNREADABLE


if __name__ == "__main__":
    sys.exit(main())

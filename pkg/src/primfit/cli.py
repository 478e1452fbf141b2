"""Command-line interface.

Subcommands:

- ``synth``   generate a synthetic scene (plus ground truth) from a spec file
- ``fit``     recognise primitives in a segmented cloud
- ``relate``  cluster fitted segments under a named relation query
- ``eval``    score a predicted clustering against ground truth

Exit codes: 0 success, 1 recognition accepted no segment, 2 bad usage or
unreadable input.  ``PRIMFIT_SEED`` overrides ``--seed`` everywhere.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from . import cloudio
from .cloudio import CloudFormatError, FitRecord
from .geometry import Family
from .preprocess import PipelineConfig
from .recognizer import recognize_cloud
from .relations import QUERIES, classification_metrics, cluster_params
from .synthetic import generate_scene, parse_scene_spec

__all__ = ["main"]

_METRIC_NAMES = ("PPV", "TPR", "TNR", "NPV", "ACC")


def _seed_override(value: int | None) -> int | None:
    env = os.environ.get("PRIMFIT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CloudFormatError(f"PRIMFIT_SEED must be an integer, got {env!r}") from None
    return value


def _cmd_synth(args: argparse.Namespace) -> int:
    spec_path = Path(args.spec)
    try:
        data = json.loads(spec_path.read_text())
    except json.JSONDecodeError as exc:
        raise CloudFormatError(f"{spec_path}: {exc}") from None
    specs, file_seed = parse_scene_spec(data)
    seed = _seed_override(args.seed)
    if seed is None:
        seed = file_seed if file_seed is not None else 0
    cloud, truth = generate_scene(specs, seed=seed)
    cloudio.save_segments(cloud, args.out)
    if args.truth:
        payload = {
            "schema_version": cloudio.SCHEMA_VERSION,
            "seed": seed,
            "families": truth.families,
            "clusters": truth.clusters,
        }
        Path(args.truth).write_text(cloudio.canonical_json(payload))
    print(f"wrote {len(cloud)} segments to {args.out} (seed {seed})")
    return 0


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    values: dict[str, str] = {}
    if args.config:
        path = Path(args.config)
        values = cloudio.parse_config_text(path.read_text(), str(path))
    try:
        config = PipelineConfig.from_mapping(values)
    except (KeyError, ValueError) as exc:
        raise CloudFormatError(f"{args.config}: {exc}") from None
    updates: dict = {}
    if args.families:
        labels = tuple(s.strip() for s in args.families.split(",") if s.strip())
        for label in labels:
            Family.from_label(label)
        updates["families"] = labels
    if args.use_hints:
        updates["use_hints"] = True
    seed = _seed_override(args.seed)
    if seed is not None:
        updates["seed"] = seed
    return config.with_updates(**updates) if updates else config


def _cmd_fit(args: argparse.Namespace) -> int:
    cloud = cloudio.load_segments(args.input)
    config = _build_config(args)
    outcomes = recognize_cloud(cloud, config)
    records = []
    for outcome in outcomes:
        attempts: dict[str, float | str] = {}
        for att in outcome.attempts:
            attempts[att.family.label] = (
                att.failure if att.failure is not None else att.mfe
            )
        fit = outcome.fit
        records.append(
            FitRecord(
                segment_id=outcome.segment_id,
                accepted=outcome.accepted,
                family=fit.family if fit else None,
                params=fit.params if fit else None,
                mfe=fit.mfe if fit else None,
                attempts=attempts,
                descriptor=fit.descriptor if fit else None,
            )
        )
        if fit:
            print(f"{outcome.segment_id}: {fit.family.label} mfe={fit.mfe:.6g}")
        else:
            print(f"{outcome.segment_id}: rejected (epsilon {outcome.epsilon:.6g})")
    cloudio.save_fit_results(records, args.out)
    return 0 if any(r.accepted for r in records) else 1


def _cmd_relate(args: argparse.Namespace) -> int:
    query = QUERIES[args.query]
    records = [
        r
        for r in cloudio.load_fit_results(args.fits)
        if r.accepted and r.family is query.family and r.params is not None
    ]
    records.sort(key=lambda r: r.segment_id)
    threshold = args.threshold
    if threshold is None:
        threshold = PipelineConfig().cluster_thresholds[query.family.label]
    assignment: dict[str, int] = {}
    if records:
        labels = cluster_params([r.relation_params for r in records], query, threshold)
        assignment = {r.segment_id: int(k) for r, k in zip(records, labels)}
    cloudio.save_clusters(assignment, args.query, threshold, args.out)
    for seg_id, label in assignment.items():
        print(f"{seg_id}: {label}")
    n_clusters = len(set(assignment.values()))
    print(f"{len(assignment)} segments in {n_clusters} cluster(s)")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    predicted, pred_query, _ = cloudio.load_clusters(args.pred)
    try:
        truth_data = json.loads(Path(args.truth).read_text())
    except json.JSONDecodeError as exc:
        raise CloudFormatError(f"{args.truth}: {exc}") from None
    query = args.query or pred_query
    clusters = truth_data.get("clusters", {})
    if query not in clusters:
        raise CloudFormatError(f"{args.truth}: no ground truth for query {query!r}")
    expected = {str(k): int(v) for k, v in clusters[query].items()}
    if set(predicted) != set(expected):
        raise CloudFormatError(
            "prediction and truth cover different segments: "
            f"{sorted(set(predicted) ^ set(expected))}"
        )
    ids = sorted(predicted)
    report = classification_metrics(
        [predicted[i] for i in ids], [expected[i] for i in ids]
    )
    for name, value in zip(_METRIC_NAMES, report.as_dict().values()):
        print(f"{name} {value:.3f}")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="primfit",
        description="Recognise geometric primitives in segmented point clouds "
        "and infer relations between them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic scene")
    p_synth.add_argument("--spec", required=True, help="scene spec (JSON)")
    p_synth.add_argument("--out", required=True, help="output cloud (.xyz file or directory)")
    p_synth.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p_synth.add_argument("--truth", default=None, help="also write ground truth (JSON)")
    p_synth.set_defaults(func=_cmd_synth)

    p_fit = sub.add_parser("fit", help="recognise primitives in a cloud")
    p_fit.add_argument("--in", dest="input", required=True, help="cloud (.xyz file or directory)")
    p_fit.add_argument("--out", required=True, help="fit results (JSON)")
    p_fit.add_argument("--config", default=None, help="KEY = value config file")
    p_fit.add_argument(
        "--families", default=None, help="comma-separated candidate families"
    )
    p_fit.add_argument(
        "--use-hints", action="store_true", help="trust per-segment family hints"
    )
    p_fit.add_argument("--seed", type=int, default=None, help="master seed")
    p_fit.set_defaults(func=_cmd_fit)

    p_rel = sub.add_parser("relate", help="cluster fits under a relation query")
    p_rel.add_argument("--fits", required=True, help="fit results (JSON)")
    p_rel.add_argument(
        "--query", required=True, choices=sorted(QUERIES), metavar="QUERY",
        help="one of: " + ", ".join(sorted(QUERIES)),
    )
    p_rel.add_argument(
        "--threshold", type=float, default=None, help="dendrogram cut height"
    )
    p_rel.add_argument("--out", required=True, help="cluster assignment (JSON)")
    p_rel.set_defaults(func=_cmd_relate)

    p_eval = sub.add_parser("eval", help="score clusters against ground truth")
    p_eval.add_argument("--pred", required=True, help="predicted clusters (JSON)")
    p_eval.add_argument("--truth", required=True, help="ground truth (JSON)")
    p_eval.add_argument("--query", default=None, help="truth query name (default: from --pred)")
    p_eval.set_defaults(func=_cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (CloudFormatError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

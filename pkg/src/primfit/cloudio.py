"""File formats: segmented point clouds, fit results, cluster assignments.

Angles cross this boundary in degrees; everything internal is radians.
JSON emitted here is canonical (sorted keys, floats at 9 significant
digits) so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from .geometry import (
    ConeParams,
    CylinderParams,
    Family,
    PlaneParams,
    PrimitiveParams,
    SphereParams,
    TorusParams,
    family_of,
)

__all__ = [
    "CloudFormatError",
    "Segment",
    "SegmentedCloud",
    "FitRecord",
    "load_segments",
    "save_segments",
    "params_to_mapping",
    "params_from_mapping",
    "canonical_json",
    "save_fit_results",
    "load_fit_results",
    "save_clusters",
    "load_clusters",
    "parse_config_text",
]

SCHEMA_VERSION = 1


class CloudFormatError(ValueError):
    """Raised when an input file does not match the expected layout."""


@dataclass
class Segment:
    """One pre-segmented patch of a scene."""

    segment_id: str
    points: NDArray[np.float64]
    hint: Family | None = None

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError("segment points must form an (n, 3) array")


@dataclass
class SegmentedCloud:
    """An ordered collection of segments with unique ids."""

    segments: list[Segment] = field(default_factory=list)

    def __post_init__(self) -> None:
        ids = [s.segment_id for s in self.segments]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate segment ids")

    def __iter__(self) -> Iterator[Segment]:
        return iter(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def ids(self) -> list[str]:
        return [s.segment_id for s in self.segments]


# ---------------------------------------------------------------------------
# Point-cloud text formats
# ---------------------------------------------------------------------------

def _parse_xyz_lines(
    lines: Iterable[str], source: str, columns: int
) -> list[tuple[list[float], str]]:
    rows: list[tuple[list[float], str]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != columns:
            raise CloudFormatError(
                f"{source}:{lineno}: expected {columns} columns, found {len(parts)}"
            )
        try:
            coords = [float(p) for p in parts[:3]]
        except ValueError as exc:
            raise CloudFormatError(f"{source}:{lineno}: {exc}") from None
        if not all(math.isfinite(c) for c in coords):
            raise CloudFormatError(f"{source}:{lineno}: non-finite coordinate")
        rows.append((coords, parts[3] if columns == 4 else ""))
    return rows


def _check_sizes(groups: Mapping[str, list[list[float]]], source: str) -> None:
    for seg_id, pts in groups.items():
        if len(pts) < 2:
            raise CloudFormatError(
                f"{source}: segment {seg_id!r} has {len(pts)} point(s); need at least 2"
            )


def _load_hints(path: Path) -> dict[str, Family]:
    manifest = path / "manifest.json"
    if not manifest.is_file():
        return {}
    try:
        data = json.loads(manifest.read_text())
    except json.JSONDecodeError as exc:
        raise CloudFormatError(f"{manifest}: {exc}") from None
    hints = data.get("hints", {})
    try:
        return {seg_id: Family.from_label(label) for seg_id, label in hints.items()}
    except (ValueError, AttributeError) as exc:
        raise CloudFormatError(f"{manifest}: bad hints table: {exc}") from None


def load_segments(path: str | Path) -> SegmentedCloud:
    """Load a segmented cloud.

    Two layouts are understood:

    - a directory of ``<segment-id>.xyz`` files (``x y z`` per line), with an
      optional ``manifest.json`` carrying ``{"hints": {id: family}}``;
    - a single ``.xyz`` file whose lines read ``x y z segment-id``.

    Segments are ordered by id; ``#`` starts a comment.  Segments with fewer
    than two points are rejected.
    """
    path = Path(path)
    if path.is_dir():
        hints = _load_hints(path)
        segments = []
        for file in sorted(path.glob("*.xyz")):
            rows = _parse_xyz_lines(
                file.read_text().splitlines(), str(file), columns=3
            )
            _check_sizes({file.stem: [r[0] for r in rows]}, str(file))
            segments.append(
                Segment(file.stem, np.array([r[0] for r in rows]), hints.get(file.stem))
            )
        if not segments:
            raise CloudFormatError(f"{path}: no .xyz files found")
        return SegmentedCloud(segments)

    if not path.is_file():
        raise CloudFormatError(f"{path}: no such file or directory")
    rows = _parse_xyz_lines(path.read_text().splitlines(), str(path), columns=4)
    groups: dict[str, list[list[float]]] = {}
    for coords, seg_id in rows:
        groups.setdefault(seg_id, []).append(coords)
    if not groups:
        raise CloudFormatError(f"{path}: no points found")
    _check_sizes(groups, str(path))
    return SegmentedCloud(
        [Segment(seg_id, np.array(groups[seg_id])) for seg_id in sorted(groups)]
    )


def save_segments(cloud: SegmentedCloud, path: str | Path) -> None:
    """Write a cloud back out.

    A ``.xyz`` destination gets the single-file labelled layout; any other
    path is created as a directory of per-segment files (plus a manifest
    when hints are present).  Coordinates use shortest round-trip notation.
    """
    path = Path(path)
    if path.suffix == ".xyz":
        lines = [
            f"{x!r} {y!r} {z!r} {seg.segment_id}"
            for seg in cloud.segments
            for x, y, z in seg.points.tolist()
        ]
        path.write_text("\n".join(lines) + "\n")
        return
    path.mkdir(parents=True, exist_ok=True)
    hints = {}
    for seg in cloud.segments:
        lines = [f"{x!r} {y!r} {z!r}" for x, y, z in seg.points.tolist()]
        (path / f"{seg.segment_id}.xyz").write_text("\n".join(lines) + "\n")
        if seg.hint is not None:
            hints[seg.segment_id] = seg.hint.label
    if hints:
        (path / "manifest.json").write_text(canonical_json({"hints": hints}))


# ---------------------------------------------------------------------------
# Parameter records <-> plain mappings (degrees at this boundary)
# ---------------------------------------------------------------------------

def _vec(values: Any, name: str) -> NDArray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (3,):
        raise CloudFormatError(f"{name} must be a 3-vector")
    return arr


def params_to_mapping(params: PrimitiveParams) -> dict[str, Any]:
    """Flatten a parameter record for JSON, converting angles to degrees."""
    if isinstance(params, PlaneParams):
        return {
            "theta": math.degrees(params.theta),
            "phi": math.degrees(params.phi),
            "rho": params.rho,
        }
    if isinstance(params, SphereParams):
        return {"center": params.center.tolist(), "radius": params.radius}
    if isinstance(params, CylinderParams):
        return {
            "location": params.location.tolist(),
            "axis": params.axis.tolist(),
            "radius": params.radius,
        }
    if isinstance(params, ConeParams):
        return {
            "vertex": params.vertex.tolist(),
            "axis": params.axis.tolist(),
            "half_angle": math.degrees(params.half_angle),
        }
    if isinstance(params, TorusParams):
        return {
            "center": params.center.tolist(),
            "axis": params.axis.tolist(),
            "r_min": params.r_min,
            "r_max": params.r_max,
        }
    raise TypeError(f"cannot serialise {type(params).__name__}")


def params_from_mapping(family: Family, mapping: Mapping[str, Any]) -> PrimitiveParams:
    """Rebuild a parameter record from its JSON mapping (degrees for angles)."""
    try:
        if family is Family.PLANE:
            return PlaneParams(
                math.radians(float(mapping["theta"])),
                math.radians(float(mapping["phi"])),
                float(mapping["rho"]),
            )
        if family is Family.SPHERE:
            return SphereParams(_vec(mapping["center"], "center"), float(mapping["radius"]))
        if family is Family.CYLINDER:
            return CylinderParams(
                _vec(mapping["location"], "location"),
                _vec(mapping["axis"], "axis"),
                float(mapping["radius"]),
            )
        if family is Family.CONE:
            return ConeParams(
                _vec(mapping["vertex"], "vertex"),
                _vec(mapping["axis"], "axis"),
                math.radians(float(mapping["half_angle"])),
            )
        if family is Family.TORUS:
            return TorusParams(
                _vec(mapping["center"], "center"),
                _vec(mapping["axis"], "axis"),
                float(mapping["r_min"]),
                float(mapping["r_max"]),
            )
    except KeyError as exc:
        raise CloudFormatError(f"missing {family.label} parameter {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise CloudFormatError(f"bad {family.label} parameters: {exc}") from None
    raise TypeError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# Canonical JSON
# ---------------------------------------------------------------------------

def _canonical(value: Any) -> Any:
    if isinstance(value, float):
        return float(f"{value:.9g}")
    if isinstance(value, (np.floating,)):
        return float(f"{float(value):.9g}")
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return _canonical(value.tolist())
    if isinstance(value, Mapping):
        return {str(k): _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    return value


def canonical_json(payload: Any) -> str:
    """Serialise with sorted keys and 9-significant-digit floats."""
    return json.dumps(_canonical(payload), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Fit results
# ---------------------------------------------------------------------------

@dataclass
class FitRecord:
    """One segment's recognition outcome as stored on disk."""

    segment_id: str
    accepted: bool
    family: Family | None = None
    params: PrimitiveParams | None = None
    mfe: float | None = None
    attempts: dict[str, float | str] = field(default_factory=dict)
    descriptor: PrimitiveParams | None = None

    @property
    def relation_params(self) -> PrimitiveParams | None:
        """Parameters relation queries should compare (descriptor if set)."""
        return self.descriptor if self.descriptor is not None else self.params


def save_fit_results(records: Sequence[FitRecord], path: str | Path) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "segments": [
            {
                "id": rec.segment_id,
                "accepted": rec.accepted,
                "family": rec.family.label if rec.family is not None else None,
                "params": params_to_mapping(rec.params) if rec.params is not None else None,
                "mfe": rec.mfe,
                "attempts": rec.attempts,
                "descriptor": (
                    params_to_mapping(rec.descriptor) if rec.descriptor is not None else None
                ),
            }
            for rec in records
        ],
    }
    Path(path).write_text(canonical_json(payload))


def load_fit_results(path: str | Path) -> list[FitRecord]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CloudFormatError(f"{path}: {exc}") from None
    if data.get("schema_version") != SCHEMA_VERSION:
        raise CloudFormatError(f"{path}: unsupported schema_version")
    records = []
    for entry in data.get("segments", []):
        family = Family.from_label(entry["family"]) if entry.get("family") else None
        params = (
            params_from_mapping(family, entry["params"])
            if family is not None and entry.get("params") is not None
            else None
        )
        descriptor = (
            params_from_mapping(family, entry["descriptor"])
            if family is not None and entry.get("descriptor") is not None
            else None
        )
        records.append(
            FitRecord(
                segment_id=entry["id"],
                accepted=bool(entry["accepted"]),
                family=family,
                params=params,
                mfe=entry.get("mfe"),
                attempts=dict(entry.get("attempts", {})),
                descriptor=descriptor,
            )
        )
    return records


# ---------------------------------------------------------------------------
# Cluster assignments
# ---------------------------------------------------------------------------

def save_clusters(
    assignment: Mapping[str, int], query: str, threshold: float, path: str | Path
) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "query": query,
        "threshold": threshold,
        "clusters": dict(assignment),
    }
    Path(path).write_text(canonical_json(payload))


def load_clusters(path: str | Path) -> tuple[dict[str, int], str, float]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CloudFormatError(f"{path}: {exc}") from None
    if data.get("schema_version") != SCHEMA_VERSION:
        raise CloudFormatError(f"{path}: unsupported schema_version")
    clusters = {str(k): int(v) for k, v in data.get("clusters", {}).items()}
    return clusters, str(data.get("query", "")), float(data.get("threshold", 0.0))


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``KEY = value`` lines (``#`` comments, blank lines allowed) into
    a flat string mapping suitable for ``PipelineConfig.from_mapping``."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CloudFormatError(f"{source}:{lineno}: expected KEY = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise CloudFormatError(f"{source}:{lineno}: expected KEY = value")
        if key in values:
            raise CloudFormatError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values

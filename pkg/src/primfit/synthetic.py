"""Synthetic test clouds: sampled primitives, noise models, whole scenes.

Scenes come with ground truth (per-segment family, true parameters, and the
clusterings every built-in relation query should produce), so recognition
and relation inference can be scored end to end.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from .cloudio import CloudFormatError, Segment, SegmentedCloud, params_from_mapping
from .geometry import (
    ConeParams,
    CylinderParams,
    Family,
    PlaneParams,
    PrimitiveParams,
    SphereParams,
    TorusParams,
    bbox_diagonal,
    complete_frame,
    evaluate_primitive,
)
from .relations import QUERIES, descriptor_distance

__all__ = [
    "NoiseSpec",
    "SegmentSpec",
    "SceneTruth",
    "surface_normals",
    "sample_segment",
    "generate_scene",
    "scene_truth",
    "parse_scene_spec",
]

_TRUTH_TOLERANCE = 1e-9


@dataclass(frozen=True)
class NoiseSpec:
    """Additive perturbation of sampled points.

    ``kind`` is ``none``, ``uniform`` (U(-a, a)) or ``gaussian`` (sigma = a).
    The magnitude ``a`` is either ``amplitude`` (absolute) or
    ``amplitude_frac`` (a fraction of the noise-free segment's bounding-box
    diagonal, resolved at sampling time).  ``direction`` is ``xyz``
    (independent per coordinate) or ``normal`` (scalar offset along the
    surface normal).
    """

    kind: str = "none"
    amplitude: float | None = None
    amplitude_frac: float | None = None
    direction: str = "xyz"

    def __post_init__(self) -> None:
        if self.kind not in ("none", "uniform", "gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.direction not in ("xyz", "normal"):
            raise ValueError(f"unknown noise direction {self.direction!r}")
        if self.kind == "none":
            if self.amplitude is not None or self.amplitude_frac is not None:
                raise ValueError("noise kind 'none' takes no amplitude")
        elif (self.amplitude is None) == (self.amplitude_frac is None):
            raise ValueError("give exactly one of amplitude / amplitude_frac")

    def resolve_amplitude(self, diagonal: float) -> float:
        if self.kind == "none":
            return 0.0
        if self.amplitude is not None:
            return float(self.amplitude)
        return float(self.amplitude_frac) * diagonal


@dataclass(frozen=True)
class SegmentSpec:
    """Recipe for one synthetic segment.

    ``u_range``/``v_range`` are in the native units of the parametrisation
    (radians for angular coordinates, model units otherwise).  ``sampling``
    is ``random`` (uniform in parameter space) or ``grid`` (near-square
    lattice of at least ``count`` points).
    """

    segment_id: str
    family: Family
    params: PrimitiveParams
    u_range: tuple[float, float]
    v_range: tuple[float, float]
    count: int
    noise: NoiseSpec = NoiseSpec()
    sampling: str = "random"

    def __post_init__(self) -> None:
        if self.count < 2:
            raise ValueError("count must be at least 2")
        if self.sampling not in ("random", "grid"):
            raise ValueError(f"unknown sampling {self.sampling!r}")
        for name, (lo, hi) in (("u_range", self.u_range), ("v_range", self.v_range)):
            if not hi > lo:
                raise ValueError(f"{name} must be increasing")


def surface_normals(params: PrimitiveParams, u: Any, v: Any) -> NDArray:
    """Outward unit normals matching ``evaluate_primitive`` at ``(u, v)``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    u, v = np.broadcast_arrays(u, v)
    cu, su = np.cos(u), np.sin(u)

    if isinstance(params, PlaneParams):
        return np.broadcast_to(params.normal, u.shape + (3,)).copy()
    if isinstance(params, SphereParams):
        cv, sv = np.cos(v), np.sin(v)
        out = np.empty(u.shape + (3,))
        out[..., 0] = cv * cu
        out[..., 1] = cv * su
        out[..., 2] = sv
        return out
    if isinstance(params, CylinderParams):
        v1, v2, _ = complete_frame(params.axis)
        return cu[..., None] * v1 + su[..., None] * v2
    if isinstance(params, ConeParams):
        v1, v2, a = complete_frame(params.axis)
        sa, ca = np.sin(params.half_angle), np.cos(params.half_angle)
        radial = cu[..., None] * v1 + su[..., None] * v2
        return ca * radial - sa * np.broadcast_to(a, u.shape + (3,))
    if isinstance(params, TorusParams):
        v1, v2, a = complete_frame(params.axis)
        cv, sv = np.cos(v), np.sin(v)
        radial = cu[..., None] * v1 + su[..., None] * v2
        return cv[..., None] * radial + sv[..., None] * a
    raise TypeError(f"cannot compute normals for {type(params).__name__}")


def _grid_coordinates(spec: SegmentSpec) -> tuple[NDArray, NDArray]:
    n_u = max(2, math.isqrt(spec.count - 1) + 1)
    n_v = max(2, -(-spec.count // n_u))
    uu = np.linspace(*spec.u_range, n_u, endpoint=False)
    vv = np.linspace(*spec.v_range, n_v, endpoint=False)
    gu, gv = np.meshgrid(uu, vv, indexing="ij")
    return gu.ravel(), gv.ravel()


def sample_segment(spec: SegmentSpec, rng: np.random.Generator) -> NDArray:
    """Sample a segment's points: draw (u, v), evaluate, perturb.

    Random draws happen in a fixed order (u, then v, then noise), so one
    seed pins the whole cloud.
    """
    if spec.sampling == "grid":
        u, v = _grid_coordinates(spec)
    else:
        u = rng.uniform(*spec.u_range, spec.count)
        v = rng.uniform(*spec.v_range, spec.count)
    points = evaluate_primitive(spec.params, u, v)

    noise = spec.noise
    if noise.kind == "none":
        return points
    amplitude = noise.resolve_amplitude(bbox_diagonal(points))
    if noise.direction == "xyz":
        shape = points.shape
        if noise.kind == "uniform":
            offsets = rng.uniform(-amplitude, amplitude, shape)
        else:
            offsets = rng.normal(0.0, amplitude, shape)
        return points + offsets
    normals = surface_normals(spec.params, u, v)
    if noise.kind == "uniform":
        scale = rng.uniform(-amplitude, amplitude, len(points))
    else:
        scale = rng.normal(0.0, amplitude, len(points))
    return points + scale[:, None] * normals


@dataclass
class SceneTruth:
    """Ground truth for a generated scene."""

    families: dict[str, str] = field(default_factory=dict)
    params: dict[str, PrimitiveParams] = field(default_factory=dict)
    #: query name -> {segment id -> cluster label}, for every built-in query
    #: whose family occurs in the scene.
    clusters: dict[str, dict[str, int]] = field(default_factory=dict)


def scene_truth(specs: Sequence[SegmentSpec]) -> SceneTruth:
    """Derive the expected outputs directly from the construction."""
    truth = SceneTruth(
        families={s.segment_id: s.family.label for s in specs},
        params={s.segment_id: s.params for s in specs},
    )
    for name, query in QUERIES.items():
        members = [s for s in specs if s.family is query.family]
        if not members:
            continue
        parent = list(range(len(members)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, j in itertools.combinations(range(len(members)), 2):
            d = descriptor_distance(query, members[i].params, members[j].params)
            if d <= _TRUTH_TOLERANCE:
                parent[find(i)] = find(j)
        labels: dict[int, int] = {}
        assignment = {}
        for idx, seg in enumerate(members):
            root = find(idx)
            labels.setdefault(root, len(labels))
            assignment[seg.segment_id] = labels[root]
        truth.clusters[name] = assignment
    return truth


def generate_scene(
    specs: Sequence[SegmentSpec], seed: int = 0
) -> tuple[SegmentedCloud, SceneTruth]:
    """Sample every spec (segment i uses generator seed ``[seed, i]``) and
    pair the cloud with its ground truth.  Each segment carries its true
    family as an optional hint."""
    ids = [s.segment_id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate segment ids in scene spec")
    segments = [
        Segment(
            spec.segment_id,
            sample_segment(spec, np.random.default_rng([seed, i])),
            hint=spec.family,
        )
        for i, spec in enumerate(specs)
    ]
    return SegmentedCloud(segments), scene_truth(specs)


# ---------------------------------------------------------------------------
# Scene-spec files (JSON; angles in degrees at this boundary)
# ---------------------------------------------------------------------------

_ANGULAR_RANGES = {
    # which of (u, v) are angles, per family
    Family.PLANE: (False, False),
    Family.SPHERE: (True, True),
    Family.CYLINDER: (True, False),
    Family.CONE: (True, False),
    Family.TORUS: (True, True),
}


def _range_from(value: Any, angular: bool, name: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in value)
    except (TypeError, ValueError):
        raise CloudFormatError(f"{name} must be a [lo, hi] pair") from None
    if angular:
        lo, hi = math.radians(lo), math.radians(hi)
    return lo, hi


def parse_scene_spec(data: Mapping[str, Any]) -> tuple[list[SegmentSpec], int | None]:
    """Decode a scene-spec mapping (see README for the layout).

    Returns the segment recipes and the file's optional seed.
    """
    raw_segments = data.get("segments")
    if not raw_segments:
        raise CloudFormatError("scene spec has no segments")
    specs = []
    for i, entry in enumerate(raw_segments):
        where = f"segments[{i}]"
        try:
            family = Family.from_label(entry["family"])
            seg_id = str(entry["id"])
            count = int(entry["count"])
        except KeyError as exc:
            raise CloudFormatError(f"{where}: missing {exc.args[0]!r}") from None
        except ValueError as exc:
            raise CloudFormatError(f"{where}: {exc}") from None
        params = params_from_mapping(family, entry.get("params", {}))
        u_ang, v_ang = _ANGULAR_RANGES[family]
        u_range = _range_from(entry.get("u_range"), u_ang, f"{where}.u_range")
        v_range = _range_from(entry.get("v_range"), v_ang, f"{where}.v_range")
        noise_entry = entry.get("noise")
        if noise_entry is None:
            noise = NoiseSpec()
        else:
            try:
                noise = NoiseSpec(
                    kind=str(noise_entry.get("kind", "none")),
                    amplitude=(
                        float(noise_entry["amplitude"])
                        if "amplitude" in noise_entry
                        else None
                    ),
                    amplitude_frac=(
                        float(noise_entry["amplitude_frac"])
                        if "amplitude_frac" in noise_entry
                        else None
                    ),
                    direction=str(noise_entry.get("direction", "xyz")),
                )
            except ValueError as exc:
                raise CloudFormatError(f"{where}.noise: {exc}") from None
        try:
            specs.append(
                SegmentSpec(
                    segment_id=seg_id,
                    family=family,
                    params=params,
                    u_range=u_range,
                    v_range=v_range,
                    count=count,
                    noise=noise,
                    sampling=str(entry.get("sampling", "random")),
                )
            )
        except ValueError as exc:
            raise CloudFormatError(f"{where}: {exc}") from None
    seed = data.get("seed")
    return specs, (int(seed) if seed is not None else None)

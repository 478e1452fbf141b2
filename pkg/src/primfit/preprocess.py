"""Segment conditioning shared by every primitive family.

A segment is centred on its barycentre, optionally downsampled on a regular
grid of boxes, equipped with per-point normals (each estimated by a local
plane Hough fit over a fixed-radius neighbourhood), and reduced to a set of
"reliable" points whose neighbourhoods fit their tangent planes best.  These
reliable points drive the per-family initial estimators.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from .geometry import (
    DegenerateGeometryError,
    PrimitiveFit,
    PrimitiveParams,
    bbox_diagonal,
    bbox_extents,
    distance_to_primitive,
)
from .hough import ht_fit_plane

logger = logging.getLogger(__name__)

__all__ = [
    "PipelineConfig",
    "NormalEstimate",
    "PreprocessedSegment",
    "center_cloud",
    "downsample",
    "estimate_normals",
    "mean_fitting_error",
    "select_reliable_points",
    "preprocess_segment",
]


@dataclass(frozen=True)
class PipelineConfig:
    """Tunable knobs of the recognition pipeline (defaults are desk-scale).

    Fractional values are relative to the segment bounding-box diagonal
    unless stated otherwise.
    """

    # preprocessing
    neighborhood_radius_frac: float = 0.05   # D, neighbourhood radius
    min_neighborhood: int = 5                # skip points with smaller neighbourhoods
    normal_target: int = 36                  # widen sparse neighbourhoods to this count
    normal_theta_bins: int = 64              # local plane grid for normal fits
    normal_phi_bins: int = 32
    normal_rho_bins: int = 12
    downsample_boxes: int = 20               # per-axis grid resolution
    downsample_threshold: int = 5000         # downsample only above this size
    reliable_percent: float = 0.02           # of the max bbox extent
    min_reliable: int = 10                   # keep at least this many points
    reliable_fallback_frac: float = 0.05     # fallback floor as a share of the segment

    # Hough resolutions
    plane_theta_bins: int = 192
    plane_phi_bins: int = 96
    plane_rho_bins: int = 48
    shared_rho_bins: int = 24                # cloud-wide plane grid; coarse on
                                             # purpose so one cell swallows the
                                             # per-segment noise of coplanar parts
    descriptor_merge_cells: float = 1.5      # coplanarity grouping tolerance for
                                             # plane descriptors, in grid cells
    circle_bins: int = 64
    refine_bins: int = 100
    vertex_bins: int = 128

    # windows
    radius_window: float = 0.20              # relative radius window for refinement
    angle_window: float = 0.15               # radians, half-angle window

    # estimator plumbing
    slab_frac: float = 0.01                  # half-thickness of slicing slabs
    slab_noise_factor: float = 2.0           # widen slabs to this multiple of the
                                             # local-fit residual scale under noise
    tangent_offset_frac: float = 0.1         # offset used to build slicing directions
    min_cross_norm: float = 0.05             # reject near-parallel normal pairs
    max_pairs: int = 2000                    # cap on normal pairs (seeded subsample)
    max_slices: int = 96                     # cap on slicing points (seeded subsample)
    slice_mfe_threshold: float = 0.03        # acceptance gate for slice circle fits
    slice_inlier_tol: float = 0.1            # inlier band, relative to circle radius
    slice_inlier_frac: float = 0.25          # min inlier share of the slab
    dense_circle_count: int = 360            # synthetic points on recognised circles
    vertex_inflate: float = 3.0              # cone vertex box = segment bbox x this
    cone_literal_angle: bool = False         # swap the atan arguments (see docs)
    cone_max_half_angle: float = 1.45        # radians; wider cones are degenerate

    # acceptance / selection
    epsilon_frac: float = 0.05               # of the model bbox diagonal
    model_diagonal: Optional[float] = None   # set for multi-segment runs
    shared_plane_grid: bool = True           # one plane accumulator per cloud
    families: Optional[tuple[str, ...]] = None
    use_hints: bool = False
    seed: int = 0

    # relation clustering thresholds (dendrogram cut heights)
    cluster_thresholds: Mapping[str, float] = field(
        default_factory=lambda: {
            "plane": 1e-10,
            "sphere": 1e-1,
            "cylinder": 1e-1,
            "cone": 1e-1,
            "torus": 1e-1,
        }
    )

    def with_updates(self, **kwargs) -> "PipelineConfig":
        return replace(self, **kwargs)

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "PipelineConfig":
        """Build a config from flat string key/value pairs (CLI config files).

        Cluster thresholds are addressed as ``cluster_threshold_<family>``.
        """
        kwargs: dict = {}
        thresholds = dict(cls().cluster_thresholds)
        for key, raw in values.items():
            key = key.strip()
            if key.startswith("cluster_threshold_"):
                thresholds[key[len("cluster_threshold_"):]] = float(raw)
                continue
            if key not in cls.__dataclass_fields__:
                raise KeyError(f"unknown config key {key!r}")
            current = getattr(cls(), key)
            if key == "families":
                kwargs[key] = tuple(s.strip() for s in raw.split(",") if s.strip())
            elif isinstance(current, bool):
                kwargs[key] = raw.strip().lower() in {"1", "true", "yes", "on"}
            elif isinstance(current, int):
                kwargs[key] = int(raw)
            else:
                kwargs[key] = float(raw)
        kwargs["cluster_thresholds"] = thresholds
        return cls(**kwargs)


@dataclass
class NormalEstimate:
    """Unit normal estimated at one point, with the mean fitting error of the
    local plane fit it came from."""

    index: int
    point: NDArray[np.float64]
    normal: NDArray[np.float64]
    mfe: float


@dataclass
class PreprocessedSegment:
    """Conditioned segment: centred (optionally downsampled) points, their
    normal estimates, the reliable subset, and the original-frame metadata
    needed to interpret results."""

    points: NDArray[np.float64]
    centroid: NDArray[np.float64]
    normals: list[NormalEstimate]
    reliable: list[NormalEstimate]
    diagonal: float  # bbox diagonal of the original segment (the MFE scale l)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def center_cloud(points: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Remove the barycentre.  Returns ``(centred points, barycentre)``;
    adding the barycentre back restores the input."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise ValueError("expected a nonempty (n, 3) point array")
    centroid = pts.mean(axis=0)
    return pts - centroid, centroid


def downsample(points: ArrayLike, boxes_per_axis: int) -> NDArray[np.float64]:
    """Grid downsampling: split the bbox into ``boxes_per_axis``^3 equal
    boxes and keep, per nonempty box, the input point closest to the box's
    point-barycentre (first such point on exact ties).

    Output preserves input order and is always a subset of the input.
    """
    pts = np.asarray(points, dtype=float)
    if boxes_per_axis < 1:
        raise ValueError("boxes_per_axis must be positive")
    if len(pts) == 0:
        raise ValueError("cannot downsample an empty cloud")
    lo = pts.min(axis=0)
    ext = pts.max(axis=0) - lo
    widths = np.where(ext > 0.0, ext / boxes_per_axis, 1.0)
    idx = np.floor((pts - lo) / widths).astype(np.int64)
    np.clip(idx, 0, boxes_per_axis - 1, out=idx)
    flat = (idx[:, 0] * boxes_per_axis + idx[:, 1]) * boxes_per_axis + idx[:, 2]

    keep: list[int] = []
    order = np.argsort(flat, kind="stable")
    start = 0
    while start < len(order):
        stop = start
        while stop < len(order) and flat[order[stop]] == flat[order[start]]:
            stop += 1
        members = order[start:stop]
        bary = pts[members].mean(axis=0)
        d2 = np.einsum("ij,ij->i", pts[members] - bary, pts[members] - bary)
        keep.append(int(members[np.argmin(d2)]))
        start = stop
    keep.sort()
    return pts[keep]


def mean_fitting_error(
    points: ArrayLike,
    prim: Union[PrimitiveParams, PrimitiveFit],
    l: Optional[float] = None,
) -> float:
    """Mean point-to-surface distance divided by the bbox diagonal ``l``
    (computed from ``points`` when not supplied)."""
    pts = np.asarray(points, dtype=float)
    scale = l if l is not None else bbox_diagonal(pts)
    if scale <= 0.0:
        raise ValueError("the normalising diagonal must be positive")
    return float(distance_to_primitive(pts, prim).mean()) / scale


def _planar_spread(local: NDArray) -> bool:
    """True when the points extend in at least two directions, so a local
    plane fit is determined (a straight row of samples is not)."""
    centred = local - local.mean(axis=0)
    svals = np.linalg.svd(centred, compute_uv=False)
    return bool(svals[0] > 0.0 and svals[1] > 0.05 * svals[0])


def estimate_normals(
    points: ArrayLike,
    radius: float,
    min_neighborhood: int = 5,
    target: int = 36,
    theta_bins: int = 64,
    phi_bins: int = 32,
    rho_bins: int = 12,
    max_neighborhood: int = 96,
) -> list[NormalEstimate]:
    """Estimate a unit normal per point from a plane Hough fit over its
    ``radius``-neighbourhood.

    A neighbourhood smaller than ``target`` is widened to the ``target``
    nearest neighbours: a handful of noisy points cannot outvote their own
    scatter, so sparse balls trade a little locality for a usable sample.
    Degenerate neighbourhoods (stretched along a single line, as happens on
    strongly anisotropic samplings) keep growing by doubling until they span
    two directions; points left degenerate at ``max_neighborhood`` are
    skipped.  The local grid is much coarser than the segment-level plane
    grid — with tens of points per fit, fat cells are what lets the true
    plane collect a clear peak — and the windowed refinement inside
    :func:`primfit.hough.ht_fit_plane` restores precision on clean data.

    The recorded ``mfe`` is the raw mean point-to-plane distance over the
    neighbourhood (unit scale), so it compares directly against the
    length-valued reliability threshold.
    """
    pts = np.asarray(points, dtype=float)
    if radius <= 0.0:
        raise ValueError("neighbourhood radius must be positive")
    tree = cKDTree(pts)
    neighborhoods = tree.query_ball_point(pts, r=radius)
    want = min(max(min_neighborhood, target), len(pts))
    estimates: list[NormalEstimate] = []
    for j, idx in enumerate(neighborhoods):
        idx = np.asarray(idx, dtype=np.int64)
        if len(idx) < want:
            dist, nn = tree.query(pts[j], k=want)
            idx = np.atleast_1d(nn)[np.isfinite(np.atleast_1d(dist))]
        k = len(idx)
        while len(idx) < min_neighborhood or not _planar_spread(pts[idx]):
            k = 2 * k
            if k > min(max_neighborhood, len(pts)):
                idx = idx[:0]
                break
            dist, nn = tree.query(pts[j], k=k)
            idx = np.atleast_1d(nn)[np.isfinite(np.atleast_1d(dist))]
        if len(idx) < min_neighborhood:
            continue
        local = pts[idx]
        try:
            plane = ht_fit_plane(local, theta_bins, phi_bins, rho_bins)
        except DegenerateGeometryError:
            continue
        mfe = mean_fitting_error(local, plane, l=1.0)
        estimates.append(NormalEstimate(j, pts[j].copy(), plane.normal, mfe))
    return estimates


def select_reliable_points(
    estimates: Sequence[NormalEstimate],
    points: ArrayLike,
    percent: float = 0.02,
    min_keep: int = 10,
) -> list[NormalEstimate]:
    """Keep estimates whose local-plane MFE is at most ``percent`` of the
    largest bbox extent of the whole segment; if fewer than ``min_keep``
    survive, the lowest-MFE ``min_keep`` are kept instead (all, when the
    segment has fewer estimates than that)."""
    if not estimates:
        return []
    threshold = percent * float(bbox_extents(points).max())
    chosen = [e for e in estimates if e.mfe <= threshold]
    if len(chosen) < min_keep:
        ranked = sorted(estimates, key=lambda e: (e.mfe, e.index))
        chosen = ranked[:min_keep]
        chosen.sort(key=lambda e: e.index)
    return chosen


def preprocess_segment(points: ArrayLike, config: PipelineConfig) -> PreprocessedSegment:
    """Centre, optionally downsample, estimate normals, and select reliable
    points — the family-independent part of recognition."""
    pts = np.asarray(points, dtype=float)
    diagonal = bbox_diagonal(pts)
    if diagonal <= 0.0:
        raise DegenerateGeometryError("segment bbox diagonal is zero")
    centred, centroid = center_cloud(pts)
    if len(centred) > config.downsample_threshold:
        before = len(centred)
        centred = downsample(centred, config.downsample_boxes)
        logger.debug("downsampled %d -> %d points", before, len(centred))
    normals = estimate_normals(
        centred,
        radius=config.neighborhood_radius_frac * diagonal,
        min_neighborhood=config.min_neighborhood,
        target=config.normal_target,
        theta_bins=config.normal_theta_bins,
        phi_bins=config.normal_phi_bins,
        rho_bins=config.normal_rho_bins,
    )
    # the fallback keeps a fixed share of the segment, not a fixed count:
    # on noisy data almost nothing clears the percent rule, and estimators
    # need enough survivors for pair statistics to average out
    min_keep = max(config.min_reliable, int(round(config.reliable_fallback_frac * len(normals))))
    reliable = select_reliable_points(
        normals, centred, config.reliable_percent, min_keep
    )
    return PreprocessedSegment(centred, centroid, normals, reliable, diagonal)

"""Hough-transform voting over standard-form parameter spaces.

Fitting a primitive that sits in standard position only requires voting over
the few parameters its canonical form leaves free: one radius for spheres and
cylinders, the half-angle for cones, the two radii for tori, three parameters
for planes (Hesse form) and circles in the plane.  Each point casts one vote
per cell its Hough surface crosses; the most-voted cell wins, and exact ties
are resolved by the lowest mean fitting error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import kernels
from .geometry import (
    Circle2Params,
    ConeParams,
    CylinderParams,
    DegenerateGeometryError,
    Family,
    PlaneParams,
    SphereParams,
    TorusParams,
    bbox_diagonal,
    distance_to_circle2,
    distance_to_primitive,
)

logger = logging.getLogger(__name__)

__all__ = [
    "STANDARD_FORM_DIMS",
    "ParamBox",
    "Accumulator",
    "NoPeakError",
    "RefineWindowError",
    "vote",
    "peak_cells",
    "merge_accumulators",
    "ht_fit_plane",
    "ht_plane_candidates",
    "quantize_plane",
    "tls_fit_plane",
    "shared_plane_box",
    "ht_fit_circle2",
    "ht_refine_standard",
]

#: Free parameters of each voteable standard form.
STANDARD_FORM_DIMS = {
    "plane": 3,
    "circle": 3,
    "torus": 2,
    "sphere": 1,
    "cylinder": 1,
    "cone": 1,
}

_EZ = np.array([0.0, 0.0, 1.0])
_ORIGIN = np.zeros(3)


class NoPeakError(RuntimeError):
    """Raised when an accumulator holds no votes (or the input admits no
    meaningful peak, e.g. collinear points for a circle fit)."""


class RefineWindowError(RuntimeError):
    """Raised when a refinement window receives no votes; callers fall back
    to the initial estimate."""


# ---------------------------------------------------------------------------
# Parameter boxes and accumulators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParamBox:
    """Axis-aligned box of parameter space, discretised into equal cells.

    Bounds are half-open per cell: a value ``x`` falls in cell
    ``floor((x - low) / width)``; values exactly at ``high`` fall outside.
    """

    lows: tuple[float, ...]
    highs: tuple[float, ...]
    bins: tuple[int, ...]

    def __post_init__(self) -> None:
        if not (len(self.lows) == len(self.highs) == len(self.bins)):
            raise ValueError("mismatched box dimensions")
        if not 1 <= len(self.bins) <= 3:
            raise ValueError("parameter boxes have 1 to 3 dimensions")
        for lo, hi, b in zip(self.lows, self.highs, self.bins):
            if not hi > lo:
                raise ValueError(f"empty parameter range [{lo}, {hi}]")
            if b < 2:
                raise ValueError("each dimension needs at least 2 bins")

    @classmethod
    def from_axes(cls, axes: Sequence[tuple[float, float, int]]) -> "ParamBox":
        lows = tuple(float(a[0]) for a in axes)
        highs = tuple(float(a[1]) for a in axes)
        bins = tuple(int(a[2]) for a in axes)
        return cls(lows, highs, bins)

    @property
    def ndim(self) -> int:
        return len(self.bins)

    @property
    def widths(self) -> NDArray[np.float64]:
        return (np.asarray(self.highs) - np.asarray(self.lows)) / np.asarray(self.bins)

    def centers(self, dim: int) -> NDArray[np.float64]:
        w = self.widths[dim]
        return self.lows[dim] + (np.arange(self.bins[dim]) + 0.5) * w

    def locate(self, dim: int, value: float) -> int:
        """Cell index along ``dim`` holding ``value``, or -1 if outside."""
        k = int(np.floor((value - self.lows[dim]) / self.widths[dim]))
        return k if 0 <= k < self.bins[dim] else -1

    def cell_center(self, index: Sequence[int]) -> NDArray[np.float64]:
        w = self.widths
        return np.array(
            [self.lows[d] + (index[d] + 0.5) * w[d] for d in range(self.ndim)]
        )


@dataclass
class Accumulator:
    """Vote counts over a :class:`ParamBox` (integer grid, one entry per cell)."""

    box: ParamBox
    counts: NDArray[np.int64]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def merge_accumulators(parts: Sequence[Accumulator]) -> Accumulator:
    """Sum accumulators over the same box.  Voting point partitions and
    merging is bit-identical to voting the whole set sequentially."""
    if not parts:
        raise ValueError("nothing to merge")
    box = parts[0].box
    for p in parts[1:]:
        if p.box != box:
            raise ValueError("cannot merge accumulators over different boxes")
    counts = np.zeros_like(parts[0].counts)
    for p in parts:
        counts += p.counts
    return Accumulator(box, counts)


# ---------------------------------------------------------------------------
# Voting
# ---------------------------------------------------------------------------

def _vote_values_1d(values: NDArray, box: ParamBox) -> NDArray[np.int64]:
    k = np.floor((values - box.lows[0]) / box.widths[0])
    ok = (k >= 0) & (k < box.bins[0])
    return np.bincount(k[ok].astype(np.int64), minlength=box.bins[0])


def _cylindrical(points: NDArray) -> tuple[NDArray, NDArray]:
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    return np.sqrt(x * x + y * y), z


def vote(points: ArrayLike, family: str, box: ParamBox) -> Accumulator:
    """Cast one vote per point per cell its Hough surface crosses.

    ``family`` names the standard form: ``plane``/``circle`` (3 free
    parameters), ``torus`` (2), ``sphere``/``cylinder``/``cone`` (1).
    Circle voting expects 2-D points; everything else 3-D.
    """
    if family not in STANDARD_FORM_DIMS:
        raise ValueError(f"unknown standard form {family!r}")
    if box.ndim != STANDARD_FORM_DIMS[family]:
        raise ValueError(
            f"{family} voting needs a {STANDARD_FORM_DIMS[family]}-D box, got {box.ndim}-D"
        )
    pts = np.ascontiguousarray(points, dtype=np.float64)
    want = 2 if family == "circle" else 3
    if pts.ndim != 2 or pts.shape[1] != want or pts.shape[0] == 0:
        raise ValueError(f"{family} voting expects a nonempty (n, {want}) array")

    if family == "plane":
        theta = box.centers(0)
        phi = box.centers(1)
        counts = kernels.vote_plane(
            pts,
            np.cos(theta), np.sin(theta),
            np.cos(phi), np.sin(phi),
            box.lows[2], float(box.widths[2]), box.bins[2],
        )
    elif family == "circle":
        counts = kernels.vote_circle(
            pts, box.centers(0), box.centers(1),
            box.lows[2], float(box.widths[2]), box.bins[2],
        )
    elif family == "torus":
        radial, z = _cylindrical(pts)
        counts = kernels.vote_torus(
            radial, np.ascontiguousarray(z),
            box.lows[0], float(box.widths[0]), box.bins[0],
            box.centers(1),
        )
    else:
        if family == "sphere":
            values = np.sqrt(np.einsum("ij,ij->i", pts, pts))
        elif family == "cylinder":
            values, _ = _cylindrical(pts)
        else:  # cone: implied half-angle of a point on the standard cone
            radial, z = _cylindrical(pts)
            values = np.arctan2(radial, np.abs(z))
        counts = _vote_values_1d(values, box).reshape(box.bins)
    return Accumulator(box, counts)


def peak_cells(acc: Accumulator) -> list[tuple[tuple[int, ...], NDArray[np.float64]]]:
    """All cells holding the global maximum count, as
    ``(cell index, cell-centre parameters)`` pairs in lexicographic index
    order.  Raises :class:`NoPeakError` on an all-zero accumulator."""
    peak = int(acc.counts.max())
    if peak <= 0:
        raise NoPeakError("accumulator holds no votes")
    cells = np.argwhere(acc.counts == peak)
    return [(tuple(int(i) for i in c), acc.box.cell_center(c)) for c in cells]


def _lowest_mfe(candidates, score) -> int:
    """Index of the candidate with the lowest score; first wins ties."""
    best, best_i = np.inf, 0
    for i, cand in enumerate(candidates):
        s = score(cand)
        if s < best:
            best, best_i = s, i
    return best_i


# ---------------------------------------------------------------------------
# Whole-set fits
# ---------------------------------------------------------------------------

def ht_fit_plane(
    points: ArrayLike,
    theta_bins: int = 192,
    phi_bins: int = 96,
    rho_bins: int = 48,
    refine: bool = True,
) -> PlaneParams:
    """Most-voted plane through a point set, ties resolved by lowest mean
    fitting error.

    Voting happens on barycentre-centred coordinates so that the rho range
    (symmetric, covering every point) stays tight regardless of where the
    cloud sits; the returned Hesse offset is mapped back to the input frame
    with rho >= 0 enforced by a normal sign flip.  With ``refine`` the coarse
    winner is re-voted in a +/- 1.5 cell window at 48 bins per axis, cutting
    the quantisation error by ~two orders of magnitude.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 3:
        raise ValueError("plane fitting expects at least 3 points of shape (n, 3)")
    diag = bbox_diagonal(pts)
    if diag <= 0.0:
        raise DegenerateGeometryError("coincident points admit no plane fit")
    centroid = pts.mean(axis=0)
    q = pts - centroid
    rho_hi = float(np.linalg.norm(q, axis=1).max()) * (1.0 + 1e-9) + 1e-12
    box = ParamBox.from_axes(
        [(0.0, 2.0 * np.pi, theta_bins), (0.0, np.pi, phi_bins), (-rho_hi, rho_hi, rho_bins)]
    )

    def mfe(cand) -> float:
        theta, phi, rho = cand[1]
        n = np.array([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
        return float(np.abs(q @ n - rho).mean()) / diag

    peaks = peak_cells(vote(q, "plane", box))
    theta, phi, rho = peaks[_lowest_mfe(peaks, mfe)][1]
    if refine:
        # windowed second pass around the coarse winner; out-of-range angles
        # still parametrise valid normals, so no wrapping is needed
        w = 1.5 * box.widths
        fine = ParamBox.from_axes(
            [
                (theta - w[0], theta + w[0], 48),
                (phi - w[1], phi + w[1], 48),
                (rho - w[2], rho + w[2], 48),
            ]
        )
        peaks = peak_cells(vote(q, "plane", fine))
        theta, phi, rho = peaks[_lowest_mfe(peaks, mfe)][1]
    n = np.array([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
    return PlaneParams.from_normal(n, rho + float(n @ centroid))


def ht_plane_candidates(
    points: ArrayLike,
    theta_bins: int = 192,
    phi_bins: int = 96,
    rho_bins: int = 48,
    k: int = 6,
) -> list[PlaneParams]:
    """Up to ``k`` distinct well-voted planes, strongest first.

    Cells are ranked by vote count (ties by flat index, so the order is
    deterministic); each surviving cell is refined exactly like the
    :func:`ht_fit_plane` winner.  Near-duplicates of an already-kept plane
    (parallel normal and offset within 2% of the diagonal) are dropped, so
    adjacent cells of one blurred peak do not crowd out the runners-up.
    Callers that can score planes by an external criterion (e.g. how well
    the slab population agrees with the orientation) pick from this list
    instead of trusting the raw vote when the data are noisy.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 3:
        raise ValueError("plane fitting expects at least 3 points of shape (n, 3)")
    diag = bbox_diagonal(pts)
    if diag <= 0.0:
        raise DegenerateGeometryError("coincident points admit no plane fit")
    centroid = pts.mean(axis=0)
    q = pts - centroid
    rho_hi = float(np.linalg.norm(q, axis=1).max()) * (1.0 + 1e-9) + 1e-12
    box = ParamBox.from_axes(
        [(0.0, 2.0 * np.pi, theta_bins), (0.0, np.pi, phi_bins), (-rho_hi, rho_hi, rho_bins)]
    )

    def mfe(cand) -> float:
        theta, phi, rho = cand[1]
        n = np.array([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
        return float(np.abs(q @ n - rho).mean()) / diag

    acc = vote(q, "plane", box)
    flat = acc.counts.reshape(-1)
    order = np.argsort(-flat, kind="stable")
    out: list[PlaneParams] = []
    w = 1.5 * box.widths
    for f in order[: 8 * k]:
        if int(flat[f]) <= 0 or len(out) >= k:
            break
        idx = np.unravel_index(int(f), acc.counts.shape)
        theta, phi, rho = box.cell_center(idx)
        fine = ParamBox.from_axes(
            [
                (theta - w[0], theta + w[0], 48),
                (phi - w[1], phi + w[1], 48),
                (rho - w[2], rho + w[2], 48),
            ]
        )
        peaks = peak_cells(vote(q, "plane", fine))
        theta, phi, rho = peaks[_lowest_mfe(peaks, mfe)][1]
        n = np.array([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
        plane = PlaneParams.from_normal(n, rho + float(n @ centroid))
        dup = any(
            abs(float(plane.normal @ kept.normal)) > 0.9986
            and abs(plane.rho - kept.rho) <= 0.02 * diag
            for kept in out
        )
        if not dup:
            out.append(plane)
    if not out:
        raise NoPeakError("accumulator holds no votes")
    return out


def shared_plane_box(
    points: ArrayLike,
    origin: ArrayLike,
    theta_bins: int = 192,
    phi_bins: int = 96,
    rho_bins: int = 48,
) -> ParamBox:
    """Plane parameter box covering every point of a cloud, anchored at
    ``origin``.  Multi-segment pipelines vote all segments on this one grid
    so segments of the same plane land in the same cell."""
    q = np.asarray(points, dtype=float) - np.asarray(origin, dtype=float)
    rho_hi = float(np.linalg.norm(q, axis=1).max()) * (1.0 + 1e-9) + 1e-12
    return ParamBox.from_axes(
        [(0.0, 2.0 * np.pi, theta_bins), (0.0, np.pi, phi_bins), (-rho_hi, rho_hi, rho_bins)]
    )


def tls_fit_plane(points: ArrayLike) -> PlaneParams:
    """Total-least-squares plane: normal = smallest principal direction of
    the centred points, offset through the centroid.  Pins the plane far
    tighter than any practical vote grid, so it anchors descriptor
    quantisation (:func:`quantize_plane`)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 3:
        raise ValueError("plane fitting expects at least 3 points of shape (n, 3)")
    if bbox_diagonal(pts) <= 0.0:
        raise DegenerateGeometryError("coincident points admit no plane fit")
    centroid = pts.mean(axis=0)
    normal = np.linalg.svd(pts - centroid, full_matrices=False)[2][-1]
    return PlaneParams.from_normal(normal, float(normal @ centroid))


def quantize_plane(plane: PlaneParams, origin: ArrayLike, box: ParamBox) -> PlaneParams:
    """Centre of the shared-grid cell containing ``plane``.

    ``box`` spans ``(theta, phi, rho)`` with ``rho`` measured from
    ``origin``; the plane is re-anchored and canonicalised to the
    ``rho >= 0`` gauge before binning, and the winning cell centre is mapped
    back to the absolute frame.  Planes quantised onto the same grid compare
    bit-identically exactly when they share a cell, which is what lets the
    near-zero dendrogram cut used for plane relations behave as an exact
    coincidence test.
    """
    origin = np.asarray(origin, dtype=float)
    n = plane.normal
    anchored = PlaneParams.from_normal(n, plane.rho - float(n @ origin))
    index = [
        int(np.clip(np.floor((v - box.lows[d]) / box.widths[d]), 0, box.bins[d] - 1))
        for d, v in enumerate((anchored.theta, anchored.phi, anchored.rho))
    ]
    theta, phi, rho = (float(c) for c in box.cell_center(index))
    n = np.array([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
    return PlaneParams.from_normal(n, rho + float(n @ origin))


def ht_fit_circle2(
    points2: ArrayLike,
    init: Optional[Circle2Params] = None,
    bins: int = 64,
    window_frac: float = 0.2,
    inflate_frac: float = 0.25,
) -> Circle2Params:
    """Most-voted circle through 2-D points, ties by lowest mean fitting error.

    Without ``init`` a coarse pass ranges the centre over the bounding box
    inflated by ``inflate_frac`` per side and the radius up to 1.5x the box
    diagonal, and its winner seeds a windowed second pass.  With ``init``
    every parameter is searched in a +/- ``window_frac`` x diagonal window
    around it.
    """
    pts = np.asarray(points2, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("circle fitting expects at least 3 points of shape (n, 2)")
    centred = pts - pts.mean(axis=0)
    svals = np.linalg.svd(centred, compute_uv=False)
    if svals[1] <= 1e-9 * max(svals[0], 1e-300):
        raise NoPeakError("collinear points admit no circle peak")
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    diag = float(np.linalg.norm(hi - lo))

    def fit_box(axes) -> Circle2Params:
        peaks = peak_cells(vote(pts, "circle", ParamBox.from_axes(axes)))

        def mfe(cand) -> float:
            cx, cy, r = cand[1]
            return float(np.abs(np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) - r).mean()) / diag

        cx, cy, r = peaks[_lowest_mfe(peaks, mfe)][1]
        return Circle2Params(cx, cy, r)

    if init is None:
        ext = np.maximum(hi - lo, 0.05 * diag)
        init = fit_box(
            [
                (lo[0] - inflate_frac * ext[0], hi[0] + inflate_frac * ext[0], bins),
                (lo[1] - inflate_frac * ext[1], hi[1] + inflate_frac * ext[1], bins),
                (0.0, 1.5 * diag, bins),
            ]
        )
    w = window_frac * diag
    return fit_box(
        [
            (init.cx - w, init.cx + w, bins),
            (init.cy - w, init.cy + w, bins),
            (max(init.radius - w, 1e-9 * diag), init.radius + w, bins),
        ]
    )


def circle_fit_mfe(points2: ArrayLike, circle: Circle2Params) -> float:
    """Mean circle-fitting error normalised by the 2-D bbox diagonal."""
    pts = np.asarray(points2, dtype=float)
    diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    if diag <= 0.0:
        raise DegenerateGeometryError("coincident points have no fitting scale")
    return float(distance_to_circle2(pts, circle).mean()) / diag


def ht_refine_standard(
    points: ArrayLike,
    family: Family,
    init,
    bins: int = 100,
    radius_window: float = 0.2,
    angle_window: float = 0.15,
    max_angle: float = np.pi / 2.0 - 1e-6,
    tie_l: Optional[float] = None,
):
    """Refine a standard-position initial estimate by windowed voting.

    ``points`` must already sit in standard position for ``family``.  Radii
    are searched within +/- ``radius_window`` (relative), angles within
    +/- ``angle_window`` radians but never above ``max_angle`` (callers pass
    the same half-angle ceiling the estimator enforces, so refinement cannot
    push a cone past it).  Raises :class:`RefineWindowError` when the window
    collects no votes (callers fall back to ``init``).
    """
    pts = np.asarray(points, dtype=float)
    l = tie_l if tie_l is not None else bbox_diagonal(pts)

    def pick(axes: list[tuple[float, float, int]], label: str, build):
        try:
            peaks = peak_cells(vote(pts, label, ParamBox.from_axes(axes)))
        except NoPeakError:
            raise RefineWindowError(f"no {label} votes in the refinement window") from None
        candidates = []
        for _, center in peaks:
            try:
                candidates.append(build(center))
            except ValueError:
                continue
        if not candidates:
            raise RefineWindowError(f"no valid {label} parameters in the window")
        score = lambda p: float(distance_to_primitive(pts, p).mean()) / l
        return candidates[_lowest_mfe(candidates, score)]

    if family is Family.SPHERE:
        r0 = init.radius
        return pick(
            [(r0 * (1.0 - radius_window), r0 * (1.0 + radius_window), bins)],
            "sphere",
            lambda c: SphereParams(_ORIGIN, c[0]),
        )
    if family is Family.CYLINDER:
        r0 = init.radius
        return pick(
            [(r0 * (1.0 - radius_window), r0 * (1.0 + radius_window), bins)],
            "cylinder",
            lambda c: CylinderParams(_ORIGIN, _EZ, c[0]),
        )
    if family is Family.CONE:
        a0 = init.half_angle
        lo = max(a0 - angle_window, 1e-6)
        hi = min(a0 + angle_window, max_angle, np.pi / 2.0 - 1e-6)
        if hi <= lo:
            raise RefineWindowError("empty half-angle window")
        return pick([(lo, hi, bins)], "cone", lambda c: ConeParams(_ORIGIN, _EZ, c[0]))
    if family is Family.TORUS:
        axes = [
            (init.r_min * (1.0 - radius_window), init.r_min * (1.0 + radius_window), bins),
            (init.r_max * (1.0 - radius_window), init.r_max * (1.0 + radius_window), bins),
        ]
        return pick(
            axes, "torus", lambda c: TorusParams(_ORIGIN, _EZ, c[0], c[1])
        )
    raise ValueError(f"family {family!r} has no standard-form refinement")

"""Initial parameter estimators, one per rotational family.

Each estimator turns a conditioned segment (points plus reliable
normal-equipped points) into a first parameter record good enough to place
the segment in standard position, where the cheap low-dimensional Hough
refinement runs.  The constructions follow the tangency geometry of each
family:

- sphere:   planes through a point and its normal slice the sphere in great
            circles; their centres and radii are averaged.
- cylinder: cross products of normal pairs point along the axis; the cloud
            is rotated axis-to-z and the projected circle is fitted.
- cone:     tangent planes all pass through the vertex (found by plane
            voting in an (x, y, z) box); normals and vertex then yield the
            axis, and the opening angle comes from the farthest rim point.
- torus:    the best whole-cloud plane grabs a tangent circle; meridian
            slices through its nearest points give the tube circles, whose
            centres trace the spine circle.

Every construction is finished by a bounded least-squares polish of the
exact point-to-surface residual, so the families enter the model contest
with comparable precision and the lowest mean fitting error compares
best-achievable fits rather than estimator luck.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import least_squares
from scipy.spatial import cKDTree

from . import kernels
from .geometry import (
    Circle2Params,
    ConeParams,
    CylinderParams,
    DegenerateGeometryError,
    SphereParams,
    TorusParams,
    bbox_diagonal,
    complete_frame,
    rotation_to_z,
    unit_vector,
)
from .hough import (
    Accumulator,
    NoPeakError,
    ParamBox,
    ht_fit_circle2,
    ht_fit_plane,
    ht_plane_candidates,
    peak_cells,
)
from .preprocess import NormalEstimate, PipelineConfig

logger = logging.getLogger(__name__)

__all__ = [
    "EstimationError",
    "AxisCandidateSet",
    "estimate_sphere",
    "estimate_cylinder",
    "estimate_cone",
    "estimate_torus",
    "vote_cone_vertex",
]


class EstimationError(RuntimeError):
    """An estimator could not produce parameters; ``stage`` tags the step
    that failed."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass
class AxisCandidateSet:
    """Candidate axis directions (unit vectors) with optional weights."""

    vectors: NDArray[np.float64]
    weights: Optional[NDArray[np.float64]] = None

    def mean(self) -> NDArray[np.float64]:
        """Hemisphere-aligned weighted mean, renormalised.

        Candidates are flipped to the hemisphere of the highest-weight one
        (the best-conditioned pair), so a set like ``{a, -a, a}`` averages to
        ``a``.  A second pass re-aligns against the first-pass mean: with
        noisy candidates the pivot itself may sit tens of degrees off, and
        aligning to the mean instead keeps the flips consistent.
        """
        v = np.asarray(self.vectors, dtype=float)
        if len(v) == 0:
            raise DegenerateGeometryError("no axis candidates")
        w = np.ones(len(v)) if self.weights is None else np.asarray(self.weights, dtype=float)
        pivot = v[int(np.argmax(w))]
        for _ in range(2):
            signs = np.where(v @ pivot < 0.0, -1.0, 1.0)
            pivot = unit_vector((v * (signs * w)[:, None]).sum(axis=0))
        return pivot


def _subsample(items: Sequence, cap: int, rng: np.random.Generator) -> list:
    """Deterministic seeded subsample preserving input order."""
    if len(items) <= cap:
        return list(items)
    idx = np.sort(rng.choice(len(items), size=cap, replace=False))
    return [items[i] for i in idx]


def _pair_indices(n: int, cap: int, rng: np.random.Generator) -> NDArray[np.int64]:
    """All index pairs i < j, subsampled to at most ``cap`` rows."""
    i, j = np.triu_indices(n, k=1)
    pairs = np.stack([i, j], axis=1)
    if len(pairs) > cap:
        pick = np.sort(rng.choice(len(pairs), size=cap, replace=False))
        pairs = pairs[pick]
    return pairs


def _ls_polish(residuals, x0, lo, hi) -> Optional[NDArray]:
    """Bounded deterministic least-squares step shared by the estimators.

    Every constructive estimate below locates its surface from derived
    features (slice circles, vote cells, normal crosses) and inherits their
    noise; minimising the exact point-to-surface residual over the segment
    squeezes that noise out.  The construction's job is only to land in the
    right basin.  Returns ``None`` when the solver fails outright; callers
    validate the solution and fall back to the unpolished estimate.
    """
    try:
        sol = least_squares(
            residuals, np.asarray(x0, dtype=float), bounds=(lo, hi), max_nfev=200
        )
    except ValueError:
        return None
    return sol.x


@dataclass
class _SliceFit:
    center3: NDArray[np.float64]
    radius: float
    mfe: float
    weight: float = 1.0


def _slab_halfwidth(
    reliable: Sequence[NormalEstimate], diag: float, config: PipelineConfig
) -> float:
    """Slab half-thickness for slicing.

    The configured share of the diagonal, widened when the local-fit
    residuals say the noise floor is thicker than that: a slab thinner
    than the point scatter catches too few of its circle's points.
    """
    base = config.slab_frac * diag
    if len(reliable) > 0:
        scale = float(np.median([e.mfe for e in reliable]))
        base = max(base, config.slab_noise_factor * scale)
    return base


def _arc_coverage(xy: NDArray, circle: Circle2Params, sectors: int = 16) -> float:
    """Fraction of equal angular sectors around the circle centre that hold
    at least one of the given points."""
    if len(xy) == 0:
        return 0.0
    ang = np.arctan2(xy[:, 1] - circle.cy, xy[:, 0] - circle.cx)
    hit = np.unique(np.clip(((ang + np.pi) * sectors / (2.0 * np.pi)).astype(int), 0, sectors - 1))
    return len(hit) / sectors


def _slice_circles(
    points: NDArray,
    origin: NDArray,
    plane_normal: NDArray,
    halfwidth: float,
    config: PipelineConfig,
    max_circles: int = 1,
    tol_floor: Optional[float] = None,
    min_arc_frac: float = 0.0,
    max_radius: float = np.inf,
) -> list[_SliceFit]:
    """Fit up to ``max_circles`` circles to the slab of ``points`` around the
    plane through ``origin`` with normal ``plane_normal``.

    A slab can legitimately hold several circles (a torus meridian cuts the
    tube twice), so each fit is judged on its own inliers: the circle is kept
    when the inliers are numerous enough (an absolute floor and a share of
    the slab), fit tightly, spread over enough of the rim (``min_arc_frac``
    of 16 sectors -- stray crescents left over from a stripped circle fail
    this), and stay below ``max_radius``.  Inliers are stripped before the
    next fit whether or not the circle was kept.
    """
    try:
        normal = unit_vector(plane_normal)
    except DegenerateGeometryError:
        return []
    rel = points - origin
    mask = np.abs(rel @ normal) <= halfwidth
    if int(mask.sum()) < 3:
        return []
    w1, w2, _ = complete_frame(normal)
    xy = np.stack([rel[mask] @ w1, rel[mask] @ w2], axis=1)
    slab_size = len(xy)
    diag2 = float(np.linalg.norm(xy.max(axis=0) - xy.min(axis=0)))
    if diag2 <= 0.0:
        return []
    if tol_floor is None:
        tol_floor = 2.0 * halfwidth

    fits: list[_SliceFit] = []
    for _ in range(max_circles):
        if len(xy) < 3:
            break
        try:
            circle = ht_fit_circle2(xy, bins=config.circle_bins)
        except NoPeakError:
            break
        resid = np.abs(np.hypot(xy[:, 0] - circle.cx, xy[:, 1] - circle.cy) - circle.radius)
        tol = max(config.slice_inlier_tol * circle.radius, tol_floor)
        inliers = resid <= tol
        n_in = int(inliers.sum())
        if n_in >= max(5, config.slice_inlier_frac * slab_size) and circle.radius <= max_radius:
            mfe = float(resid[inliers].mean()) / diag2
            if (
                mfe <= config.slice_mfe_threshold
                and _arc_coverage(xy[inliers], circle) >= min_arc_frac
            ):
                center3 = origin + circle.cx * w1 + circle.cy * w2
                fits.append(_SliceFit(center3, circle.radius, mfe, float(n_in)))
        if n_in == 0:
            break
        xy = xy[~inliers]
    return fits


# ---------------------------------------------------------------------------
# Sphere
# ---------------------------------------------------------------------------

def estimate_sphere(
    points: NDArray,
    reliable: Sequence[NormalEstimate],
    config: PipelineConfig,
    rng: np.random.Generator,
) -> SphereParams:
    """Average centre/radius over circle fits on slicing planes.

    Each slicing plane passes through a reliable point and contains its
    normal, so on a true sphere it cuts (up to normal error) a great circle
    whose centre approximates the sphere centre.
    """
    diag = bbox_diagonal(points)
    halfwidth = _slab_halfwidth(reliable, diag, config)
    centers, radii = [], []
    for est in _subsample(reliable, config.max_slices, rng):
        v1, _, _ = complete_frame(est.normal)
        offset = est.point - (est.point + config.tangent_offset_frac * diag * v1)
        fits = _slice_circles(
            points, est.point, np.cross(est.normal, offset), halfwidth, config
        )
        for fit in fits:
            centers.append(fit.center3)
            radii.append(fit.radius)
    if len(radii) < 3:
        raise EstimationError(
            "sphere-slices", f"only {len(radii)} usable slicing circles (need 3)"
        )
    radius = float(np.mean(radii))
    center = np.mean(centers, axis=0)

    def residuals(x: NDArray) -> NDArray:
        return np.linalg.norm(points - x[:3], axis=1) - x[3]

    sol = _ls_polish(
        residuals,
        np.concatenate([center, [radius]]),
        [-np.inf] * 3 + [1e-9],
        [np.inf] * 4,
    )
    if sol is not None:
        center, radius = sol[:3], float(sol[3])
    if radius > diag:
        # a sphere flatter than the patch it covers is some other family's
        # surface in disguise; the polish drifts there on such segments
        raise EstimationError(
            "sphere-degenerate", f"radius {radius:.3g} exceeds the segment diagonal"
        )
    return SphereParams(center, radius)


# ---------------------------------------------------------------------------
# Cylinder
# ---------------------------------------------------------------------------

def estimate_cylinder(
    points: NDArray,
    reliable: Sequence[NormalEstimate],
    config: PipelineConfig,
    rng: np.random.Generator,
) -> CylinderParams:
    """Axis from averaged normal cross products, then a projected circle fit.

    Cylinder normals are all orthogonal to the axis, so each cross product
    of a (non-parallel) normal pair is an axis candidate.  A candidate's
    angular error grows as 1/sin of the pair angle, so candidates carry
    inverse-variance weights of sin^2 (the squared cross norm); that keeps
    floods of barely-separated noisy pairs from drowning the well-spread
    ones.
    """
    if len(reliable) < 2:
        raise EstimationError("cylinder-pairs", "need at least 2 reliable points")
    normals = np.array([e.normal for e in reliable])
    pairs = _pair_indices(len(reliable), config.max_pairs, rng)
    crosses = np.cross(normals[pairs[:, 0]], normals[pairs[:, 1]])
    norms = np.linalg.norm(crosses, axis=1)
    ok = norms >= config.min_cross_norm
    if not ok.any():
        raise EstimationError("cylinder-axis", "all normal pairs are near-parallel")
    axis = AxisCandidateSet(crosses[ok] / norms[ok, None], norms[ok] ** 2).mean()

    rot = points @ rotation_to_z(axis).T
    try:
        circle = ht_fit_circle2(rot[:, :2], bins=config.circle_bins)
    except NoPeakError as exc:
        raise EstimationError("cylinder-circle", str(exc)) from exc
    location = rotation_to_z(axis).T @ np.array([circle.cx, circle.cy, 0.0])
    radius = circle.radius

    # Polish with the location pinned to the plane through the estimate and
    # orthogonal to the initial axis: its along-axis component is a gauge
    # freedom the solver must not see.
    u0, v0, _ = complete_frame(axis)

    def residuals(x: NDArray) -> NDArray:
        s, t, a, b, r = x
        n = unit_vector(axis + a * u0 + b * v0)
        d = points - (location + s * u0 + t * v0)
        h = d @ n
        return np.linalg.norm(d - np.outer(h, n), axis=1) - r

    sol = _ls_polish(
        residuals,
        [0.0, 0.0, 0.0, 0.0, radius],
        [-np.inf, -np.inf, -0.5, -0.5, 1e-9],
        [np.inf, np.inf, 0.5, 0.5, np.inf],
    )
    if sol is not None:
        s, t, a, b, r = sol
        location = location + s * u0 + t * v0
        axis = unit_vector(axis + a * u0 + b * v0)
        radius = float(r)
    if radius > bbox_diagonal(points):
        # a cylinder flatter than the patch it covers is some other family's
        # surface in disguise; the polish drifts there on such segments
        raise EstimationError(
            "cylinder-degenerate",
            f"radius {radius:.3g} exceeds the segment diagonal",
        )
    return CylinderParams(location, axis, radius)


# ---------------------------------------------------------------------------
# Cone
# ---------------------------------------------------------------------------

def vote_cone_vertex(
    normals: NDArray,
    offsets: NDArray,
    lows: NDArray,
    highs: NDArray,
    bins: int = 128,
) -> NDArray[np.float64]:
    """Most-voted intersection point of a set of planes ``n . x = rho``.

    Every plane votes each (x, y, z) cell its surface crosses; the returned
    vertex is the centre of the most-voted cell, ties resolved by the lowest
    summed point-plane distance.
    """
    normals = np.ascontiguousarray(normals, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.float64)
    if len(normals) == 0:
        raise ValueError("no planes to vote")
    box = ParamBox.from_axes([(float(lo), float(hi), bins) for lo, hi in zip(lows, highs)])
    counts = kernels.vote_planes_box(
        normals,
        offsets,
        np.asarray(box.lows),
        box.widths,
        np.asarray(box.bins, dtype=np.int64),
    )
    peaks = peak_cells(Accumulator(box, counts))
    best, best_score = None, np.inf
    for _, center in peaks:
        score = float(np.abs(normals @ center - offsets).sum())
        if score < best_score:
            best, best_score = center, score
    return best


def estimate_cone(
    points: NDArray,
    reliable: Sequence[NormalEstimate],
    config: PipelineConfig,
    rng: np.random.Generator,
) -> ConeParams:
    """Vertex by tangent-plane voting, axis from circumferential directions,
    half-angle from the farthest rim point in the vertex frame."""
    if len(reliable) < 3:
        raise EstimationError("cone-planes", "need at least 3 reliable points")
    normals = np.array([e.normal for e in reliable])
    offsets = np.einsum("ij,ij->i", normals, np.array([e.point for e in reliable]))

    lo = points.min(axis=0)
    hi = points.max(axis=0)
    mid = 0.5 * (lo + hi)
    half = np.maximum(0.5 * config.vertex_inflate * (hi - lo), 1e-9)
    # coarse cells are deliberately fat (half resolution): noisy tangent
    # planes miss the vertex by their offset error, and the peak only stands
    # out when one cell can swallow that scatter
    coarse_bins = max(config.vertex_bins // 2, 2)
    vertex = vote_cone_vertex(normals, offsets, mid - half, mid + half, coarse_bins)
    # second, windowed pass around the coarse winner tightens the vertex from
    # cell-size to a small fraction of a cell
    fine_half = 2.0 * (2.0 * half) / coarse_bins
    vertex = vote_cone_vertex(
        normals, offsets, vertex - fine_half, vertex + fine_half, config.vertex_bins
    )
    # least-squares polish: every tangent plane passes through the apex, so
    # the planes agreeing with the voted cell pin it down far below cell
    # size; the vote's job is only to pick the consensus basin
    fine_cell = 2.0 * fine_half / config.vertex_bins
    resid = np.abs(normals @ vertex - offsets)
    band = max(2.0 * float(np.linalg.norm(fine_cell)), 3.0 * float(np.median(resid)))
    keep = resid <= band
    if int(keep.sum()) >= 3:
        sol, _, rank, _ = np.linalg.lstsq(normals[keep], offsets[keep], rcond=None)
        if rank == 3 and bool(np.all(np.abs(sol - vertex) <= 2.0 * fine_half)):
            vertex = sol

    # tangent-plane direction orthogonal to the generator through the vertex
    u_dirs = []
    for est in reliable:
        u = np.cross(est.normal, est.point - vertex)
        n = np.linalg.norm(u)
        if n > 1e-12:
            u_dirs.append(u / n)
    if len(u_dirs) < 2:
        raise EstimationError("cone-directions", "too few usable tangent directions")
    u_dirs = np.array(u_dirs)
    pairs = _pair_indices(len(u_dirs), config.max_pairs, rng)
    crosses = np.cross(u_dirs[pairs[:, 0]], u_dirs[pairs[:, 1]])
    norms = np.linalg.norm(crosses, axis=1)
    ok = norms >= config.min_cross_norm
    if not ok.any():
        raise EstimationError("cone-axis", "all direction pairs are near-parallel")
    # sin^2 inverse-variance weights, as in the cylinder axis vote
    axis = AxisCandidateSet(crosses[ok] / norms[ok, None], norms[ok] ** 2).mean()

    q = (points - vertex) @ rotation_to_z(axis).T
    radial = np.hypot(q[:, 0], q[:, 1])
    z_max = float(np.abs(q[:, 2]).max())
    r_max = float(radial.max())
    if z_max <= 0.0 or r_max <= 0.0:
        raise EstimationError("cone-angle", "degenerate extent in the vertex frame")
    if config.cone_literal_angle:
        alpha = np.arctan2(z_max, r_max)
    else:
        alpha = np.arctan2(r_max, z_max)
    alpha = float(np.clip(alpha, 1e-6, np.pi / 2.0 - 1e-6))
    if alpha > config.cone_max_half_angle:
        raise EstimationError(
            "cone-degenerate",
            f"half-angle {alpha:.3g} rad is too close to a plane",
        )
    return ConeParams(vertex, axis, alpha)


# ---------------------------------------------------------------------------
# Torus
# ---------------------------------------------------------------------------

def _polish_torus(
    points: NDArray,
    center: NDArray,
    axis: NDArray,
    r_min: float,
    r_max: float,
) -> tuple[NDArray, NDArray, float, float]:
    """Polish all seven torus parameters on the whole segment.

    The signed point-to-surface residual is
    ``hypot(|radial| - r_max, h) - r_min``; the axis is parametrised as a
    bounded tilt of the estimate, keeping the solver local.  Falls back to
    the input when the solver leaves the valid parameter region.
    """
    u0, v0, _ = complete_frame(axis)

    def residuals(x: NDArray) -> NDArray:
        c, (a, b), r1, r2 = x[:3], x[3:5], x[5], x[6]
        n = unit_vector(axis + a * u0 + b * v0)
        d = points - c
        h = d @ n
        radial = np.linalg.norm(d - np.outer(h, n), axis=1)
        return np.hypot(radial - r2, h) - r1

    x0 = np.concatenate([center, [0.0, 0.0, r_min, r_max]])
    lo = [-np.inf] * 3 + [-0.5, -0.5, 1e-9, 1e-9]
    hi = [np.inf] * 3 + [0.5, 0.5, np.inf, np.inf]
    sol = _ls_polish(residuals, x0, lo, hi)
    if sol is None:
        return center, axis, r_min, r_max
    c, (a, b), r1, r2 = sol[:3], sol[3:5], float(sol[5]), float(sol[6])
    if not (0.0 < r1 < r2):
        return center, axis, r_min, r_max
    return c, unit_vector(axis + a * u0 + b * v0), r1, r2


def estimate_torus(
    points: NDArray,
    reliable: Sequence[NormalEstimate],
    config: PipelineConfig,
    rng: np.random.Generator,
) -> TorusParams:
    """Four-step torus construction, run as two passes.

    1. The best whole-cloud plane cuts a tangent circle (top or bottom of
       the tube); a dense synthetic copy Q of that circle is generated.
    2. For each reliable point, the plane through it spanned by its normal
       and the offset to its nearest point of Q is a meridian plane; its
       slab holds up to two tube circles, fitted and collected.
    3. The tube-circle centres C are coplanar; a plane fit gives the axis,
       refitted after dropping off-plane centres from oblique cuts.
    4. A circle fit on C (seeded by the tangent circle) gives centre and
       r_max; r_min is the median tube radius.

    The seed circle of step 1 wobbles under noise, which tilts the slicing
    slabs into oblique cuts with inflated radii, so steps 2-4 run a second
    time against the ring the first fit implies (spine lifted by r_min
    along the axis); if that pass degenerates the first fit stands.
    """
    diag = bbox_diagonal(points)
    # the seed slab stays at the geometric width: widening it sweeps in the
    # curved band below the rim and drags the seed circle off; the meridian
    # slabs are widened with the noise floor or they starve
    tight = config.slab_frac * diag
    noise = float(np.median([e.mfe for e in reliable])) if len(reliable) > 0 else 0.0
    halfwidth = _slab_halfwidth(reliable, diag, config)
    tol_floor = max(2.0 * tight, 3.0 * noise)
    plane_bins = (config.plane_theta_bins, config.plane_phi_bins, config.plane_rho_bins)

    # --- step 1: tangent circle of the best whole-cloud plane.  Under noise
    # the vote margin between the true tangent plane and an oblique cut can
    # be thin (especially on partial coverage), so the top-voted candidates
    # are re-scored by how well the normals of the reliable points inside
    # each slab align with the plane: a tangent slab hugs the tube where the
    # surface runs parallel to it, an oblique cut crosses the tube and its
    # normals fan out.  The scoring band stays at the noise scale -- wider
    # bands blur the distinction.
    top = None
    if len(reliable) >= 5:
        rel_pts = np.array([e.point for e in reliable])
        rel_nrm = np.array([e.normal for e in reliable])
        band = max(tight, noise)
        best_score = -1.0
        for cand in ht_plane_candidates(points, *plane_bins, k=6):
            inside = np.abs(rel_pts @ cand.normal - cand.rho) <= band
            if int(inside.sum()) < 5:
                continue
            score = float(np.abs(rel_nrm[inside] @ cand.normal).mean())
            if score > best_score + 1e-12:
                best_score = score
                top = cand
    if top is None:
        top = ht_fit_plane(points, *plane_bins)
    origin = top.rho * top.normal
    rel = points - origin
    mask = np.abs(rel @ top.normal) <= tight
    if int(mask.sum()) < 3:
        raise EstimationError("torus-top-slab", "best-plane slab holds fewer than 3 points")
    w1, w2, _ = complete_frame(top.normal)
    xy = np.stack([rel[mask] @ w1, rel[mask] @ w2], axis=1)
    try:
        c1 = ht_fit_circle2(xy, bins=config.circle_bins)
    except NoPeakError as exc:
        raise EstimationError("torus-top-circle", str(exc)) from exc
    phis = np.linspace(0.0, 2.0 * np.pi, config.dense_circle_count, endpoint=False)
    ring = np.stack([np.cos(phis), np.sin(phis)], axis=1)

    def tangent_ring(center3, radius, u, v):
        return center3 + radius * (ring[:, :1] * u + ring[:, 1:] * v)

    def slice_pass(dense_q):
        """Steps 2-4 against one synthetic tangent ring."""
        q_center = dense_q.mean(axis=0)
        q_radius = float(np.linalg.norm(dense_q - q_center, axis=1).mean())
        # --- step 2: meridian slices through reliable points
        tree = cKDTree(dense_q)
        tube_fits: list[_SliceFit] = []
        for est in _subsample(reliable, config.max_slices, rng):
            nearest = dense_q[int(tree.query(est.point)[1])]
            offset = est.point - nearest
            direction = np.cross(est.normal, offset)
            # near the tube's top/bottom the normal is almost parallel to
            # the offset and the slicing direction is pure noise; skip those
            # (their slabs cut the tube obliquely and fit inflated ovals)
            if np.linalg.norm(direction) < 0.35 * np.linalg.norm(offset):
                continue
            # a real tube circle covers a wide arc of the rim and is thinner
            # than the ring of a ring torus; leftovers and oblique ovals fail
            # one gate or the other
            tube_fits.extend(
                _slice_circles(
                    points,
                    est.point,
                    direction,
                    halfwidth,
                    config,
                    max_circles=2,
                    tol_floor=tol_floor,
                    min_arc_frac=0.4,
                    max_radius=0.95 * q_radius,
                )
            )
        if len(tube_fits) < 3:
            raise EstimationError(
                "torus-slices", f"only {len(tube_fits)} usable tube circles (need 3)"
            )
        spine = np.array([f.center3 for f in tube_fits])

        # --- step 3: axis from the plane of the tube centres.  The vote
        # supplies a break-down-resistant initial plane; off-plane centres
        # from oblique cuts are then trimmed (monotonically -- once dropped,
        # never re-admitted) and a weighted total-least-squares plane refit,
        # which has far lower variance than a fresh vote over a few dozen
        # centres.  Weights are the slice inlier counts: feeble crescents
        # say little about where the tube centre line runs.
        try:
            spine_plane = ht_fit_plane(spine, *plane_bins)
        except DegenerateGeometryError as exc:
            raise EstimationError("torus-spine-plane", str(exc)) from exc
        weights = np.array([f.weight for f in tube_fits])
        normal, rho = spine_plane.normal, spine_plane.rho
        coplanar = np.ones(len(spine), dtype=bool)
        for _ in range(2):
            d = np.abs(spine @ normal - rho)
            band = max(2.0 * tight, 3.0 * float(np.median(d[coplanar])))
            coplanar &= d <= band
            if int(coplanar.sum()) < 3:
                raise EstimationError(
                    "torus-spine-plane", "fewer than 3 tube centres near the spine plane"
                )
            w = weights[coplanar]
            mid = (spine[coplanar] * w[:, None]).sum(axis=0) / w.sum()
            tls = unit_vector(
                np.linalg.svd((spine[coplanar] - mid) * np.sqrt(w)[:, None])[2][-1]
            )
            if float(tls @ normal) < 0.0:
                tls = -tls
            # sanity gate against the vote: a flip this large means the
            # trimmed set lost its shape, and the vote is the safer anchor
            if abs(float(tls @ spine_plane.normal)) < np.cos(np.radians(20.0)):
                normal, rho = spine_plane.normal, spine_plane.rho
                break
            normal = tls
            rho = float(normal @ mid)
            if rho < 0.0:
                normal, rho = -normal, -rho
        # the median shrugs off inflated radii from remaining oblique cuts
        r_min = float(np.median([f.radius for f, ok in zip(tube_fits, coplanar) if ok]))
        spine = spine[coplanar]

        # --- step 4: spine circle -> centre and r_max, seeded by the ring
        s1, s2, _ = complete_frame(normal)
        origin2 = rho * normal
        spine_xy = np.stack([(spine - origin2) @ s1, (spine - origin2) @ s2], axis=1)
        init = Circle2Params(
            float((q_center - origin2) @ s1),
            float((q_center - origin2) @ s2),
            q_radius,
        )
        try:
            big = ht_fit_circle2(spine_xy, init=init, bins=config.circle_bins)
        except NoPeakError as exc:
            raise EstimationError("torus-spine-circle", str(exc)) from exc
        # in-plane stragglers (oblique cuts displace centres along the ring
        # plane too) drag an arc fit sideways; trim against the latest fit
        # and refit, monotonically, so survivors only ever shrink
        keep = np.ones(len(spine_xy), dtype=bool)
        for _ in range(2):
            res = np.abs(
                np.hypot(spine_xy[:, 0] - big.cx, spine_xy[:, 1] - big.cy) - big.radius
            )
            keep &= res <= max(2.0 * tight, 3.0 * float(np.median(res[keep])))
            if int(keep.sum()) < 3:
                break
            try:
                big = ht_fit_circle2(spine_xy[keep], init=big, bins=config.circle_bins)
            except NoPeakError:
                break
        center = origin2 + big.cx * s1 + big.cy * s2
        if big.radius > diag:
            raise EstimationError(
                "torus-degenerate",
                f"spine radius {big.radius:.3g} exceeds the segment diagonal",
            )
        return center, normal, r_min, big.radius

    c1_center3 = origin + c1.cx * w1 + c1.cy * w2
    fit = slice_pass(tangent_ring(c1_center3, c1.radius, w1, w2))
    center, axis, r_min, r_max = fit
    u2, v2, _ = complete_frame(axis)
    try:
        fit = slice_pass(tangent_ring(center + r_min * axis, r_max, u2, v2))
    except EstimationError:
        pass  # the refinement pass is best-effort; keep the first fit
    center, axis, r_min, r_max = _polish_torus(points, *fit)
    if r_max > diag:
        # a torus with a spine far larger than the patch is a cylinder (or
        # plane) in disguise; the polish drifts there on such segments
        raise EstimationError(
            "torus-degenerate",
            f"spine radius {r_max:.3g} exceeds the segment diagonal",
        )
    try:
        return TorusParams(center, axis, r_min, r_max)
    except ValueError as exc:
        raise EstimationError("torus-params", str(exc)) from exc

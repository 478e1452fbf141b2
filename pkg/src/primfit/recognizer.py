"""Segment recognition: try every family, keep the best-fitting surface.

For each candidate family the segment is conditioned once, an initial
estimate is computed, the segment is carried into that family's standard
position by a rigid motion, the few free parameters are re-voted in a window
there, and the mean fitting error (MFE) of the refined surface is measured.
The family with the lowest MFE wins; a segment whose best mean fitting
distance exceeds ``epsilon`` (a fraction of the model bounding-box diagonal)
is rejected as not simple enough.  Accepted parameters are mapped back to
the original frame.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .estimators import (
    EstimationError,
    estimate_cone,
    estimate_cylinder,
    estimate_sphere,
    estimate_torus,
)
from .geometry import (
    ConeParams,
    CylinderParams,
    DegenerateGeometryError,
    Family,
    PlaneParams,
    PrimitiveFit,
    PrimitiveParams,
    RigidTransform,
    SphereParams,
    TorusParams,
    bbox_diagonal,
    rotation_to_z,
    transform_params,
    unit_vector,
)
from .hough import (
    NoPeakError,
    RefineWindowError,
    ht_fit_plane,
    ht_refine_standard,
    quantize_plane,
    shared_plane_box,
    tls_fit_plane,
)
from .preprocess import PipelineConfig, PreprocessedSegment, mean_fitting_error, preprocess_segment

logger = logging.getLogger(__name__)

__all__ = [
    "FamilyAttempt",
    "RecognitionOutcome",
    "standard_form_transform",
    "fit_segment_with_family",
    "recognize_segment",
    "recognize_cloud",
]

_ORIGIN = np.zeros(3)
_EZ = np.array([0.0, 0.0, 1.0])

_ESTIMATORS = {
    Family.SPHERE: estimate_sphere,
    Family.CYLINDER: estimate_cylinder,
    Family.CONE: estimate_cone,
    Family.TORUS: estimate_torus,
}


def standard_form_transform(family: Family, params: PrimitiveParams) -> RigidTransform:
    """Rigid motion carrying a primitive (given by its estimated parameters)
    into standard position: anchor point to the origin and, for rotational
    families, axis to +z."""
    if family is Family.SPHERE:
        rot = np.eye(3)
        anchor = params.center
    elif family is Family.CYLINDER:
        rot = rotation_to_z(params.axis)
        anchor = params.location
    elif family is Family.CONE:
        rot = rotation_to_z(params.axis)
        anchor = params.vertex
    elif family is Family.TORUS:
        rot = rotation_to_z(params.axis)
        anchor = params.center
    else:
        raise ValueError("planes are fitted directly; they have no standard-form motion")
    return RigidTransform(rot, -(rot @ anchor))


def _standard_init(family: Family, est: PrimitiveParams) -> PrimitiveParams:
    """The estimate re-expressed in its own standard frame (exactly)."""
    if family is Family.SPHERE:
        return SphereParams(_ORIGIN, est.radius)
    if family is Family.CYLINDER:
        return CylinderParams(_ORIGIN, _EZ, est.radius)
    if family is Family.CONE:
        return ConeParams(_ORIGIN, _EZ, est.half_angle)
    if family is Family.TORUS:
        return TorusParams(_ORIGIN, _EZ, est.r_min, est.r_max)
    raise ValueError(f"no standard form for {family}")


@dataclass
class FamilyAttempt:
    """Result of trying one family on a segment: either a standard-frame fit
    with its MFE, or a failure tag naming the stage that gave up."""

    family: Family
    mfe: Optional[float] = None
    params_std: Optional[PrimitiveParams] = None
    to_standard: Optional[RigidTransform] = None
    failure: Optional[str] = None


@dataclass
class RecognitionOutcome:
    """Recognition result for one segment: the accepted fit (original frame)
    or ``None``, plus every family attempt and the rejection threshold."""

    segment_id: str
    fit: Optional[PrimitiveFit]
    attempts: list[FamilyAttempt]
    epsilon: float

    @property
    def accepted(self) -> bool:
        return self.fit is not None


def fit_segment_with_family(
    points: ArrayLike,
    family: Family,
    config: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    pre: Optional[PreprocessedSegment] = None,
) -> tuple[PrimitiveParams, float, RigidTransform]:
    """Fit one family to a segment.

    Returns ``(standard-frame parameters, MFE, to_standard)`` where
    ``to_standard`` maps original-frame points into the frame the parameters
    live in.  Planes skip estimation/standard position and are Hough-fitted
    on the centred segment directly.  The MFE scale ``l`` is the original
    segment's bbox diagonal throughout.
    """
    points = np.asarray(points, dtype=float)
    if pre is None:
        pre = preprocess_segment(points, config)
    centring = RigidTransform.from_translation(-pre.centroid)

    if family is Family.PLANE:
        plane = ht_fit_plane(
            pre.points, config.plane_theta_bins, config.plane_phi_bins, config.plane_rho_bins
        )
        return plane, mean_fitting_error(pre.points, plane, l=pre.diagonal), centring

    rng = np.random.default_rng(seed)
    est = _ESTIMATORS[family](pre.points, pre.reliable, config, rng)
    motion = standard_form_transform(family, est)
    std_points = motion.apply(pre.points)
    init = _standard_init(family, est)
    try:
        refined = ht_refine_standard(
            std_points,
            family,
            init,
            bins=config.refine_bins,
            radius_window=config.radius_window,
            angle_window=config.angle_window,
            max_angle=config.cone_max_half_angle,
            tie_l=pre.diagonal,
        )
    except RefineWindowError:
        logger.debug("refinement window empty for %s; keeping the estimate", family.label)
        refined = init
    mfe = mean_fitting_error(std_points, refined, l=pre.diagonal)
    init_mfe = mean_fitting_error(std_points, init, l=pre.diagonal)
    if init_mfe < mfe:
        # the windowed vote only resolves cell centres; when the estimator's
        # own parameters sit closer to the surface than any cell, keep them
        refined, mfe = init, init_mfe
    return refined, mfe, motion.compose(centring)


def _candidate_families(
    config: PipelineConfig, hint: Optional[Family | str]
) -> list[Family]:
    if config.use_hints and hint is not None and hint != "":
        return [hint if isinstance(hint, Family) else Family.from_label(hint)]
    if config.families:
        return sorted(Family.from_label(f) for f in config.families)
    return list(Family)


def recognize_segment(
    points: ArrayLike,
    config: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    segment_id: str = "",
    hint: Optional[Family | str] = None,
) -> RecognitionOutcome:
    """Run the full per-segment pipeline over the candidate dictionary."""
    points = np.asarray(points, dtype=float)
    pre = preprocess_segment(points, config)
    epsilon = config.epsilon_frac * (
        config.model_diagonal if config.model_diagonal is not None else pre.diagonal
    )

    attempts: list[FamilyAttempt] = []
    for family in _candidate_families(config, hint):
        try:
            params_std, mfe, to_standard = fit_segment_with_family(
                points, family, config, seed, pre=pre
            )
        except EstimationError as exc:
            attempts.append(FamilyAttempt(family, failure=exc.stage))
        except (NoPeakError, DegenerateGeometryError) as exc:
            attempts.append(FamilyAttempt(family, failure=str(exc)))
        else:
            attempts.append(
                FamilyAttempt(family, mfe=mfe, params_std=params_std, to_standard=to_standard)
            )
    fitted = [a for a in attempts if a.mfe is not None]
    fit = None
    if fitted:
        best = min(fitted, key=lambda a: (a.mfe, a.family))
        # the MFE is normalised by the segment diagonal; epsilon is a length,
        # so compare against the mean fitting distance
        if best.mfe * pre.diagonal <= epsilon:
            params = transform_params(best.params_std, best.to_standard.inverse())
            fit = PrimitiveFit(best.family, params, best.mfe, best.to_standard)
        else:
            logger.debug(
                "segment %s rejected: mean distance %.4g > epsilon %.4g",
                segment_id, best.mfe * pre.diagonal, epsilon,
            )
    return RecognitionOutcome(segment_id, fit, attempts, epsilon)


def _coplanar_groups(
    anchored: list[PlaneParams], angle_tol: float, rho_tol: float
) -> list[list[int]]:
    """Complete-linkage grouping of plane fits (indices into ``anchored``).

    Two groups merge while the *worst* pair across them stays within both
    ``angle_tol`` (radians between normals) and ``rho_tol`` (offset gap).
    Merge order is deterministic: smallest linkage first, ties by index.
    """

    def linkage(a: list[int], b: list[int]) -> float:
        worst = 0.0
        for i in a:
            for j in b:
                ni, nj = anchored[i].normal, anchored[j].normal
                ang = float(np.arccos(np.clip(ni @ nj, -1.0, 1.0)))
                gap = abs(anchored[i].rho - anchored[j].rho)
                worst = max(worst, ang / angle_tol, gap / rho_tol)
        return worst

    groups = [[i] for i in range(len(anchored))]
    while len(groups) > 1:
        best = min(
            ((linkage(groups[a], groups[b]), a, b)
             for a in range(len(groups)) for b in range(a + 1, len(groups))),
        )
        if best[0] > 1.0:
            break
        _, a, b = best
        groups[a] = groups[a] + groups[b]
        del groups[b]
    return groups


def recognize_cloud(segments, config: PipelineConfig = PipelineConfig()) -> list[RecognitionOutcome]:
    """Recognise every segment of a segmented cloud.

    ``segments`` is any iterable of objects with ``segment_id``, ``points``
    and optional ``hint`` attributes (see :mod:`primfit.cloudio`).  The
    rejection threshold uses the bbox diagonal of the union of all segments;
    each segment is processed with seed ``config.seed + index``.

    With ``config.shared_plane_grid`` (the default) every accepted plane of a
    multi-segment cloud gets a relation descriptor quantised onto one grid
    anchored at the cloud barycentre, so coplanar segments receive identical
    descriptors and the near-zero plane cut threshold acts as an exact
    coincidence test.  Quantising each segment independently would break
    ties unpredictably whenever the common plane sits near a cell edge, so
    the accepted planes' total-least-squares fits are first grouped by
    complete linkage within a grid-cell-sized tolerance and each group's
    mean plane is quantised once for all of its members.
    """
    segs = list(segments)
    if not segs:
        return []
    union = np.vstack([np.asarray(s.points, dtype=float) for s in segs])
    if config.model_diagonal is None:
        config = config.with_updates(model_diagonal=bbox_diagonal(union))
    outcomes = [
        recognize_segment(
            s.points,
            config,
            seed=config.seed + i,
            segment_id=s.segment_id,
            hint=getattr(s, "hint", None),
        )
        for i, s in enumerate(segs)
    ]
    if config.shared_plane_grid and len(segs) >= 2:
        origin = union.mean(axis=0)
        box = shared_plane_box(
            union,
            origin,
            config.plane_theta_bins,
            config.plane_phi_bins,
            config.shared_rho_bins,
        )
        accepted = [
            i for i, o in enumerate(outcomes)
            if o.fit is not None and o.fit.family is Family.PLANE
        ]
        anchored = []
        for i in accepted:
            tls = tls_fit_plane(np.asarray(segs[i].points, dtype=float))
            n = tls.normal
            anchored.append(PlaneParams.from_normal(n, tls.rho - float(n @ origin)))
        angle_tol = config.descriptor_merge_cells * float(box.widths[1])
        rho_tol = config.descriptor_merge_cells * float(box.widths[2])
        for group in _coplanar_groups(anchored, angle_tol, rho_tol):
            ref = anchored[group[0]].normal
            signs = [1.0 if float(anchored[i].normal @ ref) >= 0.0 else -1.0 for i in group]
            mean_n = unit_vector(
                np.sum([s * anchored[i].normal for s, i in zip(signs, group)], axis=0)
            )
            mean_rho = float(np.mean([s * anchored[i].rho for s, i in zip(signs, group)]))
            mean_world = PlaneParams.from_normal(mean_n, mean_rho + float(mean_n @ origin))
            cell = quantize_plane(mean_world, origin, box)
            for i in group:
                outcomes[accepted[i]].fit.descriptor = cell
    return outcomes

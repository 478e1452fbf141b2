"""Primitive parameter records, parametric surfaces, and point-surface distances.

Each supported family is described by a small record: a plane in Hesse normal
form, a sphere by centre and radius, a cylinder by an axis line and radius, a
cone by vertex, axis and half-angle, and a ring torus by centre, axis and the
two radii.  Records canonicalise their rotational axes (non-negative z
component, ties resolved on y then x) and, for cylinders, the axis point (the
point of the axis nearest the origin), so that equal surfaces produce equal
records regardless of how the parameters were derived.

All angles are radians.  Distances returned by :func:`distance_to_primitive`
are unsigned Euclidean point-to-surface distances; the cone is treated as the
infinite double cone and the cylinder as the infinite cylinder.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "Family",
    "PlaneParams",
    "SphereParams",
    "CylinderParams",
    "ConeParams",
    "TorusParams",
    "Circle2Params",
    "PrimitiveParams",
    "PrimitiveFit",
    "RigidTransform",
    "DegenerateGeometryError",
    "unit_vector",
    "canonical_axis",
    "complete_frame",
    "rotation_to_z",
    "bbox_diagonal",
    "bbox_extents",
    "evaluate_primitive",
    "distance_to_primitive",
    "transform_params",
]

_EZ = np.array([0.0, 0.0, 1.0])


class DegenerateGeometryError(ValueError):
    """Raised when input geometry is too degenerate to process (zero vectors,
    coincident points, rank-deficient point sets)."""


class Family(enum.IntEnum):
    """Primitive families, ordered as used for deterministic tie-breaking."""

    PLANE = 0
    SPHERE = 1
    CYLINDER = 2
    CONE = 3
    TORUS = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Family":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown primitive family {label!r}") from None


# ---------------------------------------------------------------------------
# Vector helpers
# ---------------------------------------------------------------------------

def unit_vector(v: ArrayLike) -> NDArray[np.float64]:
    """Return ``v`` normalised to unit length; raise on (near-)zero input."""
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n < 1e-300:
        raise DegenerateGeometryError("cannot normalise a zero vector")
    return v / n


def canonical_axis(v: ArrayLike) -> NDArray[np.float64]:
    """Unit axis representative with non-negative z (ties: non-negative y,
    then x).  ``canonical_axis(a) == canonical_axis(-a)`` for any axis."""
    a = unit_vector(v)
    if a[2] < 0.0:
        return -a
    if a[2] == 0.0:
        if a[1] < 0.0:
            return -a
        if a[1] == 0.0 and a[0] < 0.0:
            return -a
    return a


def complete_frame(axis: ArrayLike) -> tuple[NDArray, NDArray, NDArray]:
    """Right-handed orthonormal frame ``(v1, v2, a)`` with ``v1 x v2 = a``.

    ``v1`` is built from the coordinate axis least aligned with ``axis`` so
    the frame is a deterministic function of the axis direction.
    """
    a = unit_vector(axis)
    k = int(np.argmin(np.abs(a)))
    e = np.zeros(3)
    e[k] = 1.0
    v1 = unit_vector(e - (e @ a) * a)
    v2 = np.cross(a, v1)
    return v1, v2, a


def rotation_to_z(axis: ArrayLike) -> NDArray[np.float64]:
    """Minimal rotation matrix taking ``axis`` onto ``+z`` (Rodrigues).

    For ``axis == -z`` (no unique minimal rotation) a half-turn about x is
    used, deterministically.
    """
    a = unit_vector(axis)
    c = float(a[2])
    if c >= 1.0 - 1e-15:
        return np.eye(3)
    if c <= -1.0 + 1e-15:
        return np.diag([1.0, -1.0, -1.0])
    # rotation axis a x ez = (a_y, -a_x, 0); sin of the angle is its norm
    s = float(np.hypot(a[0], a[1]))
    k = np.array([a[1], -a[0], 0.0]) / s
    kk = np.outer(k, k)
    skew = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return c * np.eye(3) + s * skew + (1.0 - c) * kk


def bbox_extents(points: ArrayLike) -> NDArray[np.float64]:
    """Per-axis extents of the axis-aligned bounding box."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValueError("empty point set has no bounding box")
    return pts.max(axis=0) - pts.min(axis=0)


def bbox_diagonal(points: ArrayLike) -> float:
    """Length of the axis-aligned bounding-box diagonal."""
    return float(np.linalg.norm(bbox_extents(points)))


# ---------------------------------------------------------------------------
# Rigid motions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion ``x -> R @ x + t``.

    The rotation is validated on construction (orthonormal within 1e-9 and
    determinant +1), so downstream code can rely on distances and bounding
    diagonals being preserved.
    """

    rotation: NDArray[np.float64]
    translation: NDArray[np.float64]

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if np.linalg.det(r) < 0.0:
            raise ValueError("rotation must be proper (det +1), not a reflection")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, t: ArrayLike) -> "RigidTransform":
        return cls(np.eye(3), np.asarray(t, dtype=float))

    def apply(self, points: ArrayLike) -> NDArray[np.float64]:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def apply_vector(self, v: ArrayLike) -> NDArray[np.float64]:
        """Rotate a direction (no translation)."""
        return np.asarray(v, dtype=float) @ self.rotation.T

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def compose(self, inner: "RigidTransform") -> "RigidTransform":
        """Transform equal to applying ``inner`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ inner.rotation,
            self.rotation @ inner.translation + self.translation,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )


# ---------------------------------------------------------------------------
# Parameter records
# ---------------------------------------------------------------------------

@dataclass
class PlaneParams:
    """Plane in Hesse normal form: ``n(theta, phi) . x = rho`` with
    ``n = (cos(theta) sin(phi), sin(theta) sin(phi), cos(phi))``.

    ``theta`` is wrapped into [0, 2*pi); ``rho < 0`` is canonicalised by
    flipping the normal, so stored ``rho`` is always >= 0.
    """

    theta: float
    phi: float
    rho: float

    def __post_init__(self) -> None:
        if self.rho < 0.0:
            self.theta = self.theta + np.pi
            self.phi = np.pi - self.phi
            self.rho = -self.rho
        self.theta = float(self.theta % (2.0 * np.pi))
        self.phi = float(self.phi)
        self.rho = float(self.rho)
        if not -1e-9 <= self.phi <= np.pi + 1e-9:
            raise ValueError(f"phi={self.phi} outside [0, pi]")
        self.phi = float(min(max(self.phi, 0.0), np.pi))

    @property
    def normal(self) -> NDArray[np.float64]:
        st, ct = np.sin(self.theta), np.cos(self.theta)
        sp, cp = np.sin(self.phi), np.cos(self.phi)
        return np.array([ct * sp, st * sp, cp])

    @property
    def point(self) -> NDArray[np.float64]:
        """Deterministic representative point of the plane (foot of the
        origin perpendicular)."""
        return self.rho * self.normal

    @classmethod
    def from_normal(cls, normal: ArrayLike, rho: float) -> "PlaneParams":
        n = unit_vector(normal)
        if rho < 0.0:
            n, rho = -n, -rho
        theta = float(np.arctan2(n[1], n[0])) % (2.0 * np.pi)
        phi = float(np.arccos(np.clip(n[2], -1.0, 1.0)))
        return cls(theta, phi, float(rho))


@dataclass
class SphereParams:
    center: NDArray[np.float64]
    radius: float

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=float).reshape(3)
        self.radius = float(self.radius)
        if self.radius <= 0.0:
            raise ValueError("sphere radius must be positive")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SphereParams):
            return NotImplemented
        return np.array_equal(self.center, other.center) and self.radius == other.radius


@dataclass
class CylinderParams:
    """Infinite cylinder: axis line through ``location`` along ``axis``.

    The axis is canonicalised (see :func:`canonical_axis`), and ``location``
    is stored as the axis point nearest the origin, so two records describing
    the same cylinder compare equal however they were built.
    """

    location: NDArray[np.float64]
    axis: NDArray[np.float64]
    radius: float

    def __post_init__(self) -> None:
        self.axis = canonical_axis(self.axis)
        loc = np.asarray(self.location, dtype=float).reshape(3)
        self.location = loc - (loc @ self.axis) * self.axis
        self.radius = float(self.radius)
        if self.radius <= 0.0:
            raise ValueError("cylinder radius must be positive")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CylinderParams):
            return NotImplemented
        return (
            np.array_equal(self.location, other.location)
            and np.array_equal(self.axis, other.axis)
            and self.radius == other.radius
        )


@dataclass
class ConeParams:
    """Infinite double cone with apex ``vertex`` and half-angle in (0, pi/2)."""

    vertex: NDArray[np.float64]
    axis: NDArray[np.float64]
    half_angle: float

    def __post_init__(self) -> None:
        self.vertex = np.asarray(self.vertex, dtype=float).reshape(3)
        self.axis = canonical_axis(self.axis)
        self.half_angle = float(self.half_angle)
        if not 0.0 < self.half_angle < np.pi / 2.0:
            raise ValueError("cone half-angle must lie in (0, pi/2)")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConeParams):
            return NotImplemented
        return (
            np.array_equal(self.vertex, other.vertex)
            and np.array_equal(self.axis, other.axis)
            and self.half_angle == other.half_angle
        )


@dataclass
class TorusParams:
    """Ring torus (``0 < r_min < r_max``): tube radius ``r_min`` around a
    circle of radius ``r_max`` centred at ``center`` in the plane normal to
    ``axis``."""

    center: NDArray[np.float64]
    axis: NDArray[np.float64]
    r_min: float
    r_max: float

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=float).reshape(3)
        self.axis = canonical_axis(self.axis)
        self.r_min = float(self.r_min)
        self.r_max = float(self.r_max)
        if not 0.0 < self.r_min < self.r_max:
            raise ValueError("ring torus requires 0 < r_min < r_max")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TorusParams):
            return NotImplemented
        return (
            np.array_equal(self.center, other.center)
            and np.array_equal(self.axis, other.axis)
            and self.r_min == other.r_min
            and self.r_max == other.r_max
        )


@dataclass
class Circle2Params:
    """Circle in the plane: centre ``(cx, cy)`` and radius."""

    cx: float
    cy: float
    radius: float

    def __post_init__(self) -> None:
        self.cx = float(self.cx)
        self.cy = float(self.cy)
        self.radius = float(self.radius)
        if self.radius <= 0.0:
            raise ValueError("circle radius must be positive")

    @property
    def center(self) -> NDArray[np.float64]:
        return np.array([self.cx, self.cy])


PrimitiveParams = Union[PlaneParams, SphereParams, CylinderParams, ConeParams, TorusParams]

_FAMILY_OF_TYPE = {
    PlaneParams: Family.PLANE,
    SphereParams: Family.SPHERE,
    CylinderParams: Family.CYLINDER,
    ConeParams: Family.CONE,
    TorusParams: Family.TORUS,
}


def family_of(params: PrimitiveParams) -> Family:
    try:
        return _FAMILY_OF_TYPE[type(params)]
    except KeyError:
        raise TypeError(f"not a primitive parameter record: {type(params).__name__}") from None


@dataclass
class PrimitiveFit:
    """Accepted recognition result: family, parameters (original frame), the
    mean fitting error of the fit, and the rigid motion that carries the
    original segment into standard position.

    ``descriptor``, when set, holds the quantised parameters used for
    relation queries instead of ``params``.  Planes recognised against a
    cloud-wide accumulator store their winning cell centre here, so coplanar
    segments compare bit-identically while ``params`` keeps the more accurate
    per-segment fit."""

    family: Family
    params: PrimitiveParams
    mfe: float
    to_standard: RigidTransform = field(default_factory=RigidTransform.identity)
    descriptor: Optional[PrimitiveParams] = None

    @property
    def relation_params(self) -> PrimitiveParams:
        """Parameters relation queries should compare (descriptor if set)."""
        return self.descriptor if self.descriptor is not None else self.params


# ---------------------------------------------------------------------------
# Parametric evaluation
# ---------------------------------------------------------------------------

def evaluate_primitive(params: PrimitiveParams, u: ArrayLike, v: ArrayLike) -> NDArray:
    """Evaluate the parametric surface at ``(u, v)`` (broadcast together).

    Parametrisations (standard position = the same formulas with canonical
    frame):

    - plane:    ``rho*n + u*v1 + v*v2``
    - sphere:   ``c + r cos(v)(cos(u), sin(u), 0) + r sin(v) e3``
    - cylinder: ``l + r cos(u) v1 + r sin(u) v2 + v a``
    - cone:     ``vertex + v sin(alpha)(cos(u) v1 + sin(u) v2) + v cos(alpha) a``
    - torus:    ``c + (r_max + r_min cos(v))(cos(u) v1 + sin(u) v2) + r_min sin(v) a``
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    u, v = np.broadcast_arrays(u, v)
    cu, su = np.cos(u), np.sin(u)

    if isinstance(params, PlaneParams):
        v1, v2, n = complete_frame(params.normal)
        return (
            params.rho * n
            + u[..., None] * v1
            + v[..., None] * v2
        )
    if isinstance(params, SphereParams):
        cv, sv = np.cos(v), np.sin(v)
        r = params.radius
        out = np.empty(u.shape + (3,))
        out[..., 0] = r * cv * cu
        out[..., 1] = r * cv * su
        out[..., 2] = r * sv
        return out + params.center
    if isinstance(params, CylinderParams):
        v1, v2, a = complete_frame(params.axis)
        r = params.radius
        return (
            params.location
            + r * cu[..., None] * v1
            + r * su[..., None] * v2
            + v[..., None] * a
        )
    if isinstance(params, ConeParams):
        v1, v2, a = complete_frame(params.axis)
        sa, ca = np.sin(params.half_angle), np.cos(params.half_angle)
        rad = v * sa
        return (
            params.vertex
            + rad[..., None] * (cu[..., None] * v1 + su[..., None] * v2)
            + (v * ca)[..., None] * a
        )
    if isinstance(params, TorusParams):
        v1, v2, a = complete_frame(params.axis)
        cv, sv = np.cos(v), np.sin(v)
        ring = params.r_max + params.r_min * cv
        return (
            params.center
            + ring[..., None] * (cu[..., None] * v1 + su[..., None] * v2)
            + (params.r_min * sv)[..., None] * a
        )
    raise TypeError(f"cannot evaluate {type(params).__name__}")


# ---------------------------------------------------------------------------
# Point-surface distances
# ---------------------------------------------------------------------------

def _axis_coords(points: NDArray, origin: NDArray, axis: NDArray) -> tuple[NDArray, NDArray]:
    """Decompose ``points - origin`` into (radial distance, axial coordinate)."""
    delta = points - origin
    z = delta @ axis
    radial = np.linalg.norm(delta - z[..., None] * axis, axis=-1)
    return radial, z


def _ray_distance(x: NDArray, y: NDArray, dx: float, dy: float) -> NDArray:
    """2-D distance from points ``(x, y)`` to the ray ``{t*(dx, dy): t >= 0}``."""
    t = np.maximum(x * dx + y * dy, 0.0)
    return np.hypot(x - t * dx, y - t * dy)


def distance_to_primitive(points: ArrayLike, prim: Union[PrimitiveParams, PrimitiveFit]) -> NDArray:
    """Unsigned Euclidean distances from ``points`` (shape ``(..., 3)``) to the
    primitive surface."""
    if isinstance(prim, PrimitiveFit):
        prim = prim.params
    pts = np.asarray(points, dtype=float)
    squeeze = pts.ndim == 1
    pts = np.atleast_2d(pts)

    if isinstance(prim, PlaneParams):
        d = np.abs(pts @ prim.normal - prim.rho)
    elif isinstance(prim, SphereParams):
        d = np.abs(np.linalg.norm(pts - prim.center, axis=-1) - prim.radius)
    elif isinstance(prim, CylinderParams):
        radial, _ = _axis_coords(pts, prim.location, prim.axis)
        d = np.abs(radial - prim.radius)
    elif isinstance(prim, ConeParams):
        radial, z = _axis_coords(pts, prim.vertex, prim.axis)
        sa, ca = np.sin(prim.half_angle), np.cos(prim.half_angle)
        d = np.minimum(
            _ray_distance(radial, z, sa, ca),
            _ray_distance(radial, z, sa, -ca),
        )
    elif isinstance(prim, TorusParams):
        radial, z = _axis_coords(pts, prim.center, prim.axis)
        d = np.abs(np.hypot(radial - prim.r_max, z) - prim.r_min)
    else:
        raise TypeError(f"cannot compute distances to {type(prim).__name__}")
    return d[0] if squeeze else d


def distance_to_circle2(points2: ArrayLike, circle: Circle2Params) -> NDArray:
    """Unsigned 2-D distances to a circle in the plane."""
    pts = np.atleast_2d(np.asarray(points2, dtype=float))
    return np.abs(np.hypot(pts[:, 0] - circle.cx, pts[:, 1] - circle.cy) - circle.radius)


# ---------------------------------------------------------------------------
# Transforming parameter records between frames
# ---------------------------------------------------------------------------

def transform_params(params: PrimitiveParams, t: RigidTransform) -> PrimitiveParams:
    """Map a parameter record through a rigid motion: the returned record
    describes the same surface expressed in the target frame."""
    if isinstance(params, PlaneParams):
        n = t.apply_vector(params.normal)
        rho = params.rho + float(n @ t.translation)
        return PlaneParams.from_normal(n, rho)
    if isinstance(params, SphereParams):
        return SphereParams(t.apply(params.center), params.radius)
    if isinstance(params, CylinderParams):
        return CylinderParams(t.apply(params.location), t.apply_vector(params.axis), params.radius)
    if isinstance(params, ConeParams):
        return ConeParams(t.apply(params.vertex), t.apply_vector(params.axis), params.half_angle)
    if isinstance(params, TorusParams):
        return TorusParams(t.apply(params.center), t.apply_vector(params.axis), params.r_min, params.r_max)
    raise TypeError(f"cannot transform {type(params).__name__}")

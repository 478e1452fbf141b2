"""Global relations among recognised segments.

Pairs of fitted primitives are compared through small geometric descriptor
distances (equal radii, parallel or coincident axes, coplanarity, ...); a
relation query sums one or more of these terms, and segments are grouped by
complete-linkage clustering of the resulting distance matrix, cut at a
query-specific threshold.  Predicted groupings are scored against ground
truth with pairwise classification metrics.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

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
    "RelationQuery",
    "QUERIES",
    "Dendrogram",
    "ClassificationReport",
    "descriptor_distance",
    "complete_linkage",
    "cut_dendrogram",
    "cluster_params",
    "classification_metrics",
]


def _cross_norm(a: NDArray, b: NDArray) -> float:
    return float(np.linalg.norm(np.cross(a, b)))


# Atomic descriptor distances, keyed by (family, term name).  Axis-based
# terms are sign-invariant because records canonicalise their axes.
_TERMS: dict[tuple[Family, str], Callable[[PrimitiveParams, PrimitiveParams], float]] = {
    (Family.PLANE, "parallel"): lambda a, b: _cross_norm(a.normal, b.normal),
    (Family.PLANE, "incident"): lambda a, b: float(abs(a.normal @ (a.point - b.point))),
    (Family.SPHERE, "equal_radii"): lambda a, b: abs(a.radius - b.radius),
    (Family.SPHERE, "equal_centers"): lambda a, b: float(np.linalg.norm(a.center - b.center)),
    (Family.CYLINDER, "equal_radii"): lambda a, b: abs(a.radius - b.radius),
    (Family.CYLINDER, "parallel_axes"): lambda a, b: _cross_norm(a.axis, b.axis),
    (Family.CYLINDER, "incident_axes"): lambda a, b: _cross_norm(a.axis, a.location - b.location),
    (Family.CONE, "equal_apertures"): lambda a, b: abs(a.half_angle - b.half_angle),
    (Family.CONE, "parallel_axes"): lambda a, b: _cross_norm(a.axis, b.axis),
    (Family.CONE, "equal_vertices"): lambda a, b: float(np.linalg.norm(a.vertex - b.vertex)),
    (Family.CONE, "incident_axes"): lambda a, b: _cross_norm(a.axis, a.vertex - b.vertex),
    (Family.TORUS, "equal_r_min"): lambda a, b: abs(a.r_min - b.r_min),
    (Family.TORUS, "equal_r_max"): lambda a, b: abs(a.r_max - b.r_max),
    (Family.TORUS, "parallel_axes"): lambda a, b: _cross_norm(a.axis, b.axis),
    (Family.TORUS, "equal_centers"): lambda a, b: float(np.linalg.norm(a.center - b.center)),
    (Family.TORUS, "incident_axes"): lambda a, b: _cross_norm(a.axis, a.center - b.center),
}


@dataclass(frozen=True)
class RelationQuery:
    """A named relation over one family: the descriptor distance is the sum
    of the listed atomic terms (zero exactly when the relation holds)."""

    name: str
    family: Family
    terms: tuple[str, ...]

    def __post_init__(self) -> None:
        for t in self.terms:
            if (self.family, t) not in _TERMS:
                raise ValueError(f"{self.family.label} has no descriptor term {t!r}")


def _q(name: str, family: Family, *terms: str) -> tuple[str, RelationQuery]:
    return name, RelationQuery(name, family, terms)


#: Built-in queries addressable by name (CLI ``relate --query``).
QUERIES: Mapping[str, RelationQuery] = dict(
    [
        _q("plane_parallel", Family.PLANE, "parallel"),
        _q("plane_same", Family.PLANE, "parallel", "incident"),
        _q("sphere_equal_radii", Family.SPHERE, "equal_radii"),
        _q("sphere_equal_centers", Family.SPHERE, "equal_centers"),
        _q("sphere_same", Family.SPHERE, "equal_radii", "equal_centers"),
        _q("cylinder_equal_radii", Family.CYLINDER, "equal_radii"),
        _q("cylinder_parallel_axes", Family.CYLINDER, "parallel_axes"),
        _q("cylinder_coaxial", Family.CYLINDER, "parallel_axes", "incident_axes"),
        _q("cylinder_same", Family.CYLINDER, "equal_radii", "parallel_axes", "incident_axes"),
        _q("cone_equal_apertures", Family.CONE, "equal_apertures"),
        _q("cone_parallel_axes", Family.CONE, "parallel_axes"),
        _q("cone_equal_vertices", Family.CONE, "equal_vertices"),
        _q("cone_coaxial", Family.CONE, "parallel_axes", "incident_axes"),
        _q("cone_same", Family.CONE, "equal_apertures", "parallel_axes", "equal_vertices"),
        _q("torus_equal_r_min", Family.TORUS, "equal_r_min"),
        _q("torus_equal_r_max", Family.TORUS, "equal_r_max"),
        _q("torus_parallel_axes", Family.TORUS, "parallel_axes"),
        _q("torus_equal_centers", Family.TORUS, "equal_centers"),
        _q("torus_coaxial", Family.TORUS, "parallel_axes", "incident_axes"),
        _q(
            "torus_same",
            Family.TORUS,
            "equal_r_min",
            "equal_r_max",
            "parallel_axes",
            "equal_centers",
        ),
    ]
)


def descriptor_distance(query: RelationQuery, a: PrimitiveParams, b: PrimitiveParams) -> float:
    """Summed descriptor distance between two records of the query's family."""
    if family_of(a) is not query.family or family_of(b) is not query.family:
        raise TypeError(
            f"query {query.name!r} applies to {query.family.label} records only"
        )
    return float(sum(_TERMS[(query.family, t)](a, b) for t in query.terms))


# ---------------------------------------------------------------------------
# Complete-linkage clustering
# ---------------------------------------------------------------------------

@dataclass
class Dendrogram:
    """Agglomeration history: ``merges`` lists ``(id_a, id_b, height)`` in
    nondecreasing height order; leaves are 0..n-1, the k-th merge creates
    cluster ``n + k``."""

    n_leaves: int
    merges: list[tuple[int, int, float]]


def complete_linkage(
    items: Sequence[PrimitiveParams], query: RelationQuery
) -> Dendrogram:
    """Agglomerate items under the complete-linkage (maximum) criterion of
    the query's descriptor distance.

    Ties at equal merge height are broken deterministically by the smallest
    (min id, max id) cluster pair.
    """
    n = len(items)
    if n == 0:
        raise ValueError("nothing to cluster")
    dist: dict[tuple[int, int], float] = {
        (i, j): descriptor_distance(query, items[i], items[j])
        for i, j in itertools.combinations(range(n), 2)
    }
    active = set(range(n))
    merges: list[tuple[int, int, float]] = []
    next_id = n
    while len(active) > 1:
        best = min(dist.items(), key=lambda kv: (kv[1], kv[0]))
        (a, b), height = best
        merges.append((a, b, height))
        active.discard(a)
        active.discard(b)
        for k in active:
            dist[(min(k, next_id), max(k, next_id))] = max(
                dist[(min(a, k), max(a, k))], dist[(min(b, k), max(b, k))]
            )
        dist = {
            pair: d for pair, d in dist.items() if a not in pair and b not in pair
        }
        active.add(next_id)
        next_id += 1
    return Dendrogram(n, merges)


def cut_dendrogram(dendrogram: Dendrogram, threshold: float) -> NDArray[np.int64]:
    """Cluster assignment per leaf after applying every merge with height at
    most ``threshold``.  Ids are canonical: clusters are numbered 0, 1, ...
    in order of their smallest leaf."""
    n = dendrogram.n_leaves
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    rep: dict[int, int] = {i: i for i in range(n)}
    next_id = n
    for a, b, height in dendrogram.merges:
        ra, rb = rep[a], rep[b]
        if height <= threshold:
            parent[find(ra)] = find(rb)
        rep[next_id] = ra
        next_id += 1

    roots = [find(i) for i in range(n)]
    min_leaf: dict[int, int] = {}
    for leaf, root in enumerate(roots):
        min_leaf.setdefault(root, leaf)
    order = {root: rank for rank, root in enumerate(sorted(min_leaf, key=min_leaf.get))}
    return np.array([order[root] for root in roots], dtype=np.int64)


def cluster_params(
    items: Sequence[PrimitiveParams], query: RelationQuery, threshold: float
) -> NDArray[np.int64]:
    """Convenience: complete linkage + cut in one call (singleton-safe)."""
    if len(items) == 1:
        return np.zeros(1, dtype=np.int64)
    return cut_dendrogram(complete_linkage(items, query), threshold)


# ---------------------------------------------------------------------------
# Pairwise classification metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassificationReport:
    """Pairwise co-membership confusion counts and the derived rates.

    Undefined rates (zero denominators) are reported as 1.0, so a query with
    no positive pairs in either clustering scores perfectly when the
    predictions agree.
    """

    tp: int
    fp: int
    tn: int
    fn: int

    @staticmethod
    def _rate(num: int, den: int) -> float:
        return num / den if den else 1.0

    @property
    def ppv(self) -> float:
        return self._rate(self.tp, self.tp + self.fp)

    @property
    def tpr(self) -> float:
        return self._rate(self.tp, self.tp + self.fn)

    @property
    def tnr(self) -> float:
        return self._rate(self.tn, self.tn + self.fp)

    @property
    def npv(self) -> float:
        return self._rate(self.tn, self.tn + self.fn)

    @property
    def acc(self) -> float:
        return self._rate(self.tp + self.tn, self.tp + self.fp + self.tn + self.fn)

    def as_dict(self) -> dict[str, float]:
        return {
            "ppv": self.ppv,
            "tpr": self.tpr,
            "tnr": self.tnr,
            "npv": self.npv,
            "acc": self.acc,
        }


def classification_metrics(predicted: Sequence, truth: Sequence) -> ClassificationReport:
    """Score a predicted clustering against ground truth over all leaf pairs.

    A pair is positive when both leaves share a cluster.  Inputs are
    equal-length label sequences over the same leaves.
    """
    pred = np.asarray(predicted)
    true = np.asarray(truth)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ValueError("predicted and truth labelings must have equal length")
    tp = fp = tn = fn = 0
    for i, j in itertools.combinations(range(len(pred)), 2):
        p = pred[i] == pred[j]
        t = true[i] == true[j]
        if p and t:
            tp += 1
        elif p and not t:
            fp += 1
        elif not p and t:
            fn += 1
        else:
            tn += 1
    return ClassificationReport(tp, fp, tn, fn)

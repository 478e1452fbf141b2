"""Numpy fallback implementations of the voting kernels.

These mirror the compiled kernels in ``_voting.pyx`` operation-for-operation:
bin indices are computed with the same expressions on IEEE doubles, so both
backends produce bit-identical accumulators.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def vote_plane(points, cos_t, sin_t, cos_p, sin_p, rho_lo, rho_width, rho_bins):
    """Accumulate plane Hough votes.

    For every (theta, phi) cell centre (trig values precomputed by the
    caller) each point solves the Hesse offset ``rho = p . n(theta, phi)``
    and votes the cell holding it.  Returns int64 counts of shape
    ``(len(cos_t), len(cos_p), rho_bins)``.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    nt, np_ = len(cos_t), len(cos_p)
    counts = np.zeros((nt, np_, int(rho_bins)), dtype=np.int64)
    nx = cos_t[:, None] * sin_p[None, :]
    ny = sin_t[:, None] * sin_p[None, :]
    nz = np.broadcast_to(cos_p[None, :], (nt, np_))
    ti, pi = np.indices((nt, np_))
    ti, pi = ti.ravel(), pi.ravel()
    for x, y, z in points:
        rho = x * nx + y * ny + z * nz
        k = np.floor((rho - rho_lo) / rho_width).ravel()
        ok = (k >= 0) & (k < rho_bins)
        np.add.at(counts, (ti[ok], pi[ok], k[ok].astype(np.int64)), 1)
    return counts


def vote_circle(points2, cx, cy, r_lo, r_width, r_bins):
    """Accumulate circle Hough votes over an (cx, cy, r) grid.

    For every centre cell each point solves its implied radius and votes the
    matching radius cell.  Returns int64 counts ``(len(cx), len(cy), r_bins)``.
    """
    points2 = np.ascontiguousarray(points2, dtype=np.float64)
    ncx, ncy = len(cx), len(cy)
    counts = np.zeros((ncx, ncy, int(r_bins)), dtype=np.int64)
    xi, yi = np.indices((ncx, ncy))
    xi, yi = xi.ravel(), yi.ravel()
    for x, y in points2:
        dx = x - cx[:, None]
        dy = y - cy[None, :]
        r = np.sqrt(dx * dx + dy * dy)
        k = np.floor((r - r_lo) / r_width).ravel()
        ok = (k >= 0) & (k < r_bins)
        np.add.at(counts, (xi[ok], yi[ok], k[ok].astype(np.int64)), 1)
    return counts


def vote_torus(radial, z, rmin_lo, rmin_width, rmin_bins, rmax_centers):
    """Accumulate torus (r_min, r_max) votes.

    ``radial``/``z`` are the cylindrical coordinates of points in standard
    position.  For every r_max column each point solves the implied tube
    radius.  Returns int64 counts ``(rmin_bins, len(rmax_centers))``.
    """
    radial = np.ascontiguousarray(radial, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64)
    nmax = len(rmax_centers)
    counts = np.zeros((int(rmin_bins), nmax), dtype=np.int64)
    for j in range(nmax):
        d = radial - rmax_centers[j]
        rmin = np.sqrt(d * d + z * z)
        k = np.floor((rmin - rmin_lo) / rmin_width)
        ok = (k >= 0) & (k < rmin_bins)
        counts[:, j] += np.bincount(k[ok].astype(np.int64), minlength=int(rmin_bins))
    return counts


def vote_planes_box(normals, offsets, lows, widths, bins):
    """Accumulate votes of plane *surfaces* into a 3-D (x, y, z) grid.

    Each plane ``n . x = rho`` sweeps the two grid dimensions least aligned
    with its normal and solves the third, voting every crossed cell once.
    Returns int64 counts of shape ``bins``.
    """
    normals = np.ascontiguousarray(normals, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.float64)
    bins = tuple(int(b) for b in bins)
    counts = np.zeros(bins, dtype=np.int64)
    centers = [lows[d] + (np.arange(bins[d]) + 0.5) * widths[d] for d in range(3)]
    for n, rho in zip(normals, offsets):
        dom = 0
        if abs(n[1]) > abs(n[dom]):
            dom = 1
        if abs(n[2]) > abs(n[dom]):
            dom = 2
        a, b = [d for d in range(3) if d != dom]
        av = centers[a][:, None]
        bv = centers[b][None, :]
        solved = (rho - n[a] * av - n[b] * bv) / n[dom]
        k = np.floor((solved - lows[dom]) / widths[dom])
        ok = (k >= 0) & (k < bins[dom])
        ai, bi = np.nonzero(ok)
        idx = [None, None, None]
        idx[a] = ai
        idx[b] = bi
        idx[dom] = k[ok].astype(np.int64)
        np.add.at(counts, tuple(idx), 1)
    return counts

"""Planar polyline geometry used by the conflict, predictor and labeling stages.

Polylines are (n, 2) float arrays; where a time stamp per vertex exists it is
carried as a separate (n,) array and interpolated linearly inside segments.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-12
_PARAM_TOL = 1e-9


def polyline_lengths(poly: np.ndarray):
    """Segment vectors, segment lengths and cumulative arc length at vertices."""
    seg = np.diff(poly, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate(([0.0], np.cumsum(lengths)))
    return seg, lengths, cum


def point_to_polyline(point, poly: np.ndarray):
    """Closest approach of a point to a polyline.

    Returns (distance, arc_length, nearest_point) where arc_length measures
    along the polyline from its first vertex to the projection.
    """
    p = np.asarray(point, dtype=float)
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 1:
        d = float(np.hypot(*(p - poly[0])))
        return d, 0.0, poly[0].copy()
    seg, lengths, cum = polyline_lengths(poly)
    starts = poly[:-1]
    l2 = lengths**2
    rel = p[None, :] - starts
    frac = np.zeros(len(seg))
    ok = l2 > _EPS
    frac[ok] = np.clip((rel[ok] * seg[ok]).sum(axis=1) / l2[ok], 0.0, 1.0)
    proj = starts + frac[:, None] * seg
    dist = np.hypot(proj[:, 0] - p[0], proj[:, 1] - p[1])
    j = int(np.argmin(dist))
    arc = float(cum[j] + frac[j] * lengths[j])
    return float(dist[j]), arc, proj[j]


def _collinear_overlap(a0, da, la, b0, db, lb):
    """Earliest point of segment a lying on collinear segment b.

    Returns (u, v) segment fractions or None when the segments do not overlap.
    """
    # parameterize b's endpoints along a
    if la <= _EPS:
        return None
    ua0 = np.dot(b0 - a0, da) / (la * la)
    ua1 = np.dot(b0 + db - a0, da) / (la * la)
    lo, hi = min(ua0, ua1), max(ua0, ua1)
    u = max(0.0, lo)
    if u > min(1.0, hi) + _PARAM_TOL:
        return None
    u = min(u, 1.0)
    point = a0 + u * da
    if lb <= _EPS:
        v = 0.0
    else:
        v = np.clip(np.dot(point - b0, db) / (lb * lb), 0.0, 1.0)
    return u, v


def first_polyline_intersection(poly_a, times_a, poly_b, times_b):
    """First crossing of polyline a with polyline b.

    "First" means the smallest interpolated time along a, ties broken by the
    smallest time along b.  Returns (point, time_a, time_b) or None when the
    polylines never intersect.  Collinear overlaps count, at the earliest
    overlapping point along a.
    """
    pa = np.asarray(poly_a, dtype=float)
    pb = np.asarray(poly_b, dtype=float)
    ta = np.asarray(times_a, dtype=float)
    tb = np.asarray(times_b, dtype=float)
    if len(pa) < 2 or len(pb) < 2:
        return None
    da = np.diff(pa, axis=0)
    db = np.diff(pb, axis=0)
    la = np.hypot(da[:, 0], da[:, 1])
    lb = np.hypot(db[:, 0], db[:, 1])

    a0 = pa[:-1][:, None, :]          # (na, 1, 2)
    b0 = pb[:-1][None, :, :]          # (1, nb, 2)
    rel = b0 - a0                     # (na, nb, 2)
    cross_d = da[:, None, 0] * db[None, :, 1] - da[:, None, 1] * db[None, :, 0]
    cross_rel_db = rel[:, :, 0] * db[None, :, 1] - rel[:, :, 1] * db[None, :, 0]
    cross_rel_da = rel[:, :, 0] * da[:, None, 1] - rel[:, :, 1] * da[:, None, 0]

    nonparallel = np.abs(cross_d) > _EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(nonparallel, cross_rel_db / cross_d, np.nan)
        v = np.where(nonparallel, cross_rel_da / cross_d, np.nan)
    hit = (
        nonparallel
        & (u >= -_PARAM_TOL) & (u <= 1.0 + _PARAM_TOL)
        & (v >= -_PARAM_TOL) & (v <= 1.0 + _PARAM_TOL)
    )

    best = None  # (time_a, time_b, point)

    def consider(i, j, u_ij, v_ij):
        nonlocal best
        u_ij = min(max(u_ij, 0.0), 1.0)
        v_ij = min(max(v_ij, 0.0), 1.0)
        t_a = ta[i] + u_ij * (ta[i + 1] - ta[i])
        t_b = tb[j] + v_ij * (tb[j + 1] - tb[j])
        if best is None or (t_a, t_b) < (best[0], best[1]):
            point = pa[i] + u_ij * (pa[i + 1] - pa[i])
            best = (t_a, t_b, point)

    for i, j in zip(*np.nonzero(hit)):
        consider(int(i), int(j), float(u[i, j]), float(v[i, j]))

    # parallel segments can still overlap when collinear
    collinear = ~nonparallel & (np.abs(cross_rel_da) <= max(_EPS, _PARAM_TOL))
    for i, j in zip(*np.nonzero(collinear)):
        i, j = int(i), int(j)
        if la[i] <= _EPS and lb[j] <= _EPS:
            continue
        if la[i] <= _EPS:
            # degenerate a-segment: a point; it intersects b iff it lies on b
            d, arc, _ = point_to_polyline(pa[i], pb[j:j + 2])
            if d <= _PARAM_TOL:
                consider(i, j, 0.0, arc / lb[j] if lb[j] > _EPS else 0.0)
            continue
        ov = _collinear_overlap(pa[i], da[i], la[i], pb[j], db[j], lb[j])
        if ov is not None:
            consider(i, j, ov[0], ov[1])

    if best is None:
        return None
    return best[2], float(best[0]), float(best[1])

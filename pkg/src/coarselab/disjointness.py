"""Gap reports, star-discreteness, and the contact-lattice partition engine."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph

from .core import Cover, FiniteMetricSpace, star_set
from .errors import InputError

INF = math.inf


@dataclass(frozen=True)
class GapReport:
    """Minimum pairwise set distance of a family, with the achieving pair.

    min_gap is inf for families with fewer than two members.  A family is
    R-disjoint exactly when min_gap >= R.
    """

    min_gap: float
    witness: tuple[int, int] | None

    def is_disjoint(self, R: float) -> bool:
        return self.min_gap >= R

    def to_json(self) -> dict:
        gap = "inf" if math.isinf(self.min_gap) else self.min_gap
        return {"min_gap": gap, "witness": list(self.witness) if self.witness else None}


def set_distance_matrix(X: FiniteMetricSpace, F: Cover) -> np.ndarray:
    """Pairwise min-over-point-pairs distances between members of F."""
    if X.n != F.n:
        raise InputError("family does not match the space")
    m = len(F.members)
    out = np.zeros((m, m))
    idx = [list(mem) for mem in F.members]
    for i in range(m):
        for j in range(i + 1, m):
            d = float(X.dist[np.ix_(idx[i], idx[j])].min())
            out[i, j] = out[j, i] = d
    return out


def min_gap(X: FiniteMetricSpace, F: Cover) -> GapReport:
    """Exact minimum set distance over distinct member pairs of F."""
    m = len(F.members)
    if m <= 1:
        return GapReport(INF, None)
    dm = set_distance_matrix(X, F)
    best = INF
    pair = None
    for i in range(m):
        for j in range(i + 1, m):
            if dm[i, j] < best:
                best = dm[i, j]
                pair = (i, j)
    return GapReport(float(best), pair)


@dataclass(frozen=True)
class DiscreteReport:
    """Whether member stars are pairwise disjoint; names the first collision."""

    ok: bool
    colliding: tuple[int, int] | None

    def __bool__(self) -> bool:
        return self.ok


def is_discrete(V: Cover, W: Cover) -> DiscreteReport:
    """Are the stars st(v, W), v itself included, pairwise disjoint over V?"""
    if V.n != W.n:
        raise InputError("families live over different spaces")
    m = len(V.members)
    if m <= 1:
        return DiscreteReport(True, None)
    stars = np.zeros((m, V.n), dtype=bool)
    for i, mem in enumerate(V.members):
        stars[i, list(mem)] = True
        hit = star_set(mem, W)
        if hit:
            stars[i, list(hit)] = True
    overlap = (stars.astype(np.float64) @ stars.T.astype(np.float64)) > 0
    for i in range(m):
        for j in range(i + 1, m):
            if overlap[i, j]:
                return DiscreteReport(False, (i, j))
    return DiscreteReport(True, None)


@dataclass(frozen=True)
class LatticePartition:
    """Partition of a family's members into <=R contact components.

    blocks holds member-index groups; merged is the family of blockwise
    unions.  Distinct blocks sit at set distance strictly greater than R.
    """

    n: int
    blocks: tuple[tuple[int, ...], ...]
    merged: Cover


def lattice_partition(X: FiniteMetricSpace, F: Cover, R: float) -> LatticePartition:
    """Connected components of the graph joining members at set distance <= R.

    Components are ordered by their smallest member index, so the result is
    deterministic for a fixed canonical family.
    """
    if R < 0:
        raise InputError("contact threshold must be non-negative")
    m = len(F.members)
    if m == 0:
        return LatticePartition(F.n, (), Cover(F.n, []))
    dm = set_distance_matrix(X, F)
    adj = dm <= R
    np.fill_diagonal(adj, False)
    _, labels = csgraph.connected_components(sp.csr_matrix(adj), directed=False)
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(i)
    blocks = tuple(sorted(tuple(g) for g in groups.values()))
    merged_members = []
    for block in blocks:
        pts: set[int] = set()
        for i in block:
            pts.update(F.members[i])
        merged_members.append(tuple(sorted(pts)))
    return LatticePartition(F.n, blocks, Cover(F.n, merged_members))


def point_components(X: FiniteMetricSpace, points, R: float) -> tuple[tuple[int, ...], ...]:
    """<=R components of a plain point set, each block a sorted tuple.

    Blocks are ordered by smallest point, equivalent to lattice_partition on
    the singleton family but without the member bookkeeping.
    """
    pts = sorted({int(p) for p in points})
    if not pts:
        return ()
    sub = X.dist[np.ix_(pts, pts)] <= R
    np.fill_diagonal(sub, False)
    _, labels = csgraph.connected_components(sp.csr_matrix(sub), directed=False)
    groups: dict[int, list[int]] = {}
    for local, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(pts[local])
    return tuple(sorted(tuple(g) for g in groups.values()))


def has_midpoint_property(X: FiniteMetricSpace, tol: float = 0.0) -> bool:
    """Does every pair admit a point z with d(x,z) = d(y,z) = d(x,y)/2 +- tol?

    Pairs at distance inf require a z at distance inf from both.
    """
    if tol < 0:
        raise InputError("tolerance must be non-negative")
    d = X.dist
    for x in range(X.n):
        for y in range(x + 1, X.n):
            if math.isinf(d[x, y]):
                if not np.any(np.isinf(d[x]) & np.isinf(d[y])):
                    return False
                continue
            half = d[x, y] / 2.0
            ok = (np.abs(d[x] - half) <= tol) & (np.abs(d[y] - half) <= tol)
            if not ok.any():
                return False
    return True

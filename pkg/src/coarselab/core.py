"""Finite metric spaces, covers, and the star/mesh/multiplicity/Lebesgue calculus.

Everything here is immutable after construction and safe to share across
workers; no operation mutates its inputs, and every tie-break follows the
canonical member order, so parallel sweeps reproduce sequential results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph

from .errors import InputError, InternalInvariantError, NotACoverError

INF = math.inf

# Full triangle-inequality validation is O(n^3); above this size it is only
# run when the caller asks for it (generated spaces are metric by
# construction and skip it).
_TRIANGLE_CHECK_LIMIT = 1200


def as_member(points) -> tuple[int, ...]:
    """Normalize a point collection to a sorted, deduplicated index tuple."""
    return tuple(sorted({int(p) for p in points}))


def _check_triangle(dist: np.ndarray) -> None:
    n = dist.shape[0]
    for k in range(n):
        # inf on the right-hand side makes the bound vacuous, which matches
        # the extended-real convention: only finite detours constrain.
        slack = dist[:, k, None] + dist[None, k, :]
        bad = dist > slack
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise InputError(
                f"triangle inequality fails: d({i},{j})={dist[i, j]} > "
                f"d({i},{k})+d({k},{j})={slack[i, j]}"
            )


class FiniteMetricSpace:
    """Finite point set with a symmetric table of extended-real distances.

    math.inf marks unreachable pairs, so disconnected structures are valid.
    The distance array is write-protected after validation.
    """

    def __init__(self, dist, label: str | None = None, check_triangle: bool | None = None):
        arr = np.array(dist, dtype=float, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InputError("distance table must be a square matrix")
        if arr.shape[0] == 0:
            raise InputError("a metric space needs at least one point")
        if np.isnan(arr).any():
            raise InputError("distance table contains NaN")
        if (arr < 0).any():
            raise InputError("distances must be non-negative")
        if np.diag(arr).any():
            raise InputError("self-distances must be zero")
        if not np.array_equal(arr, arr.T):
            raise InputError("distance table must be symmetric")
        if check_triangle is None:
            check_triangle = arr.shape[0] <= _TRIANGLE_CHECK_LIMIT
        if check_triangle:
            _check_triangle(arr)
        arr.setflags(write=False)
        self.dist = arr
        self.n: int = arr.shape[0]
        self.label = label
        self._realized: np.ndarray | None = None

    @property
    def realized_distances(self) -> np.ndarray:
        """Sorted array of the distinct finite distances, 0 included."""
        if self._realized is None:
            vals = np.unique(self.dist)
            self._realized = vals[np.isfinite(vals)]
        return self._realized

    def ball(self, x: int, r: float) -> tuple[int, ...]:
        """Closed ball: every y with d(x, y) <= r."""
        if not 0 <= x < self.n:
            raise InputError(f"point index {x} out of range")
        return tuple(np.flatnonzero(self.dist[x] <= r))

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    def __repr__(self) -> str:
        tag = f" {self.label!r}" if self.label else ""
        return f"FiniteMetricSpace(n={self.n}{tag})"


def path_space(n: int, label: str | None = None) -> FiniteMetricSpace:
    """Unit path 0 - 1 - ... - n-1."""
    if n <= 0:
        raise InputError("path needs at least one point")
    idx = np.arange(n)
    dist = np.abs(idx[:, None] - idx[None, :]).astype(float)
    return FiniteMetricSpace(dist, label=label or f"path-{n}", check_triangle=False)


def grid_space(dims, label: str | None = None) -> FiniteMetricSpace:
    """Integer box with the l1 (taxicab) metric, points in C (row-major) order."""
    dims = tuple(int(d) for d in dims)
    if not dims or any(d <= 0 for d in dims):
        raise InputError("grid dims must be positive")
    coords = np.stack(
        [g.ravel() for g in np.meshgrid(*[np.arange(d) for d in dims], indexing="ij")],
        axis=1,
    )
    dist = np.abs(coords[:, None, :] - coords[None, :, :]).sum(axis=2).astype(float)
    shape = "x".join(str(d) for d in dims)
    return FiniteMetricSpace(dist, label=label or f"grid-{shape}", check_triangle=False)


def grid_coords(dims) -> np.ndarray:
    """(n, k) coordinate table matching grid_space point order."""
    dims = tuple(int(d) for d in dims)
    return np.stack(
        [g.ravel() for g in np.meshgrid(*[np.arange(d) for d in dims], indexing="ij")],
        axis=1,
    )


def graph_space(n: int, edges, label: str | None = None) -> FiniteMetricSpace:
    """Shortest-path metric of a weighted undirected graph; inf off-component."""
    if n <= 0:
        raise InputError("graph needs at least one point")
    w = np.zeros((n, n))
    for e in edges:
        i, j, wt = int(e[0]), int(e[1]), float(e[2])
        if not (0 <= i < n and 0 <= j < n):
            raise InputError(f"edge endpoint out of range: {(i, j)}")
        if wt < 0:
            raise InputError("edge weights must be non-negative")
        if i == j:
            continue
        if w[i, j] == 0 or wt < w[i, j]:
            w[i, j] = w[j, i] = wt
    dist = csgraph.shortest_path(sp.csr_matrix(w), method="D", directed=False)
    return FiniteMetricSpace(dist, label=label, check_triangle=False)


class Cover:
    """Canonical family of nonempty point subsets over an n-point space.

    Members are stored as sorted index tuples, deduplicated, in lexicographic
    order, so equal families compare equal and all downstream tie-breaks are
    deterministic.  A Cover may well cover only part of the space (a
    "family"); operations that need a true cover check ``covers_space``.
    """

    __slots__ = ("n", "members", "_matrix", "_support")

    def __init__(self, n: int, members):
        if n <= 0:
            raise InputError("cover needs a positive ambient point count")
        canon = set()
        for m in members:
            mt = as_member(m)
            if not mt:
                raise InputError("cover members must be nonempty")
            if mt[0] < 0 or mt[-1] >= n:
                raise InputError(f"member index out of range for n={n}: {mt}")
            canon.add(mt)
        self.n = n
        self.members: tuple[tuple[int, ...], ...] = tuple(sorted(canon))
        self._matrix = None
        self._support = None

    @property
    def matrix(self) -> np.ndarray:
        """(members, points) boolean membership table."""
        if self._matrix is None:
            m = np.zeros((len(self.members), self.n), dtype=bool)
            for i, mem in enumerate(self.members):
                m[i, list(mem)] = True
            m.setflags(write=False)
            self._matrix = m
        return self._matrix

    @property
    def support(self) -> tuple[int, ...]:
        if self._support is None:
            pts = set()
            for m in self.members:
                pts.update(m)
            self._support = tuple(sorted(pts))
        return self._support

    @property
    def covers_space(self) -> bool:
        return len(self.support) == self.n

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Cover)
            and self.n == other.n
            and self.members == other.members
        )

    def __hash__(self) -> int:
        return hash((self.n, self.members))

    def __repr__(self) -> str:
        return f"Cover(n={self.n}, members={len(self.members)})"


def _same_space(a: Cover, b: Cover) -> None:
    if a.n != b.n:
        raise InputError(f"covers live over different spaces: n={a.n} vs n={b.n}")


def singleton_cover(n: int) -> Cover:
    return Cover(n, [(i,) for i in range(n)])


def trivial_extension(U: Cover) -> Cover:
    """U plus singletons of uncovered points; returns U itself if it covers."""
    if U.covers_space:
        return U
    missing = sorted(set(range(U.n)) - set(U.support))
    return Cover(U.n, list(U.members) + [(p,) for p in missing])


def star_set(A, U: Cover) -> tuple[int, ...]:
    """Union of exactly the members of U meeting A (literal star).

    The result does not in general contain A; it is empty when no member
    meets A.
    """
    a = as_member(A)
    if a and (a[0] < 0 or a[-1] >= U.n):
        raise InputError(f"point index out of range for n={U.n}: {a}")
    if not a or not U.members:
        return ()
    hit = U.matrix[:, list(a)].any(axis=1)
    if not hit.any():
        return ()
    return tuple(np.flatnonzero(U.matrix[hit].any(axis=0)))


def star_cover(V: Cover, W: Cover) -> Cover:
    """Member-wise star of V against W, each member unioned with itself.

    Unioning the original member in keeps the result a coarsening of V even
    for members that touch nothing in W.
    """
    _same_space(V, W)
    if not V.members:
        return V
    mv = V.matrix
    if not W.members:
        return Cover(V.n, V.members)
    contact = (W.matrix.astype(np.float64) @ mv.T.astype(np.float64)) > 0
    starred = (contact.T.astype(np.float64) @ W.matrix.astype(np.float64)) > 0
    out = starred | mv
    return Cover(V.n, [tuple(np.flatnonzero(row)) for row in out])


def iterated_star(U: Cover, k: int) -> Cover:
    """k-fold star st(st(...st(U, U)..., U), U); k = 0 returns U unchanged."""
    if k < 0:
        raise InputError("star iteration count must be non-negative")
    cur = U
    for _ in range(k):
        cur = star_cover(cur, U)
    return cur


def multiplicity(U: Cover) -> int:
    """Largest number of members sharing one point; 0 for the empty family."""
    if not U.members:
        return 0
    return int(U.matrix.sum(axis=0, dtype=np.int64).max())


def mesh(X: FiniteMetricSpace, U: Cover) -> float:
    """Largest member diameter; 0 for singletons and for the empty family."""
    if X.n != U.n:
        raise InputError("cover does not match the space")
    best = 0.0
    for m in U.members:
        if len(m) > 1:
            idx = list(m)
            best = max(best, float(X.dist[np.ix_(idx, idx)].max()))
    return best


def member_depths(X: FiniteMetricSpace, U: Cover) -> np.ndarray:
    """(members, points) table of d(x, X minus member); inf for full members."""
    if X.n != U.n:
        raise InputError("cover does not match the space")
    out = np.empty((len(U.members), X.n))
    for i, mem in enumerate(U.members):
        comp = np.ones(X.n, dtype=bool)
        comp[list(mem)] = False
        if comp.any():
            out[i] = X.dist[:, comp].min(axis=1)
        else:
            out[i] = INF
    return out


def lebesgue_number(X: FiniteMetricSpace, U: Cover) -> float:
    """Largest realized R such that every closed R-ball fits in some member.

    Returns inf when some member is the whole space.  Balls are closed, and
    the supremum is taken over the finite set of realized distances; if even
    the 0-balls fail to fit (possible only when distinct points at distance
    zero are split between members), the supremum over the empty candidate
    set is -inf.
    """
    if X.n != U.n:
        raise InputError("cover does not match the space")
    if not U.covers_space:
        raise NotACoverError("family does not cover the space")
    if any(len(m) == X.n for m in U.members):
        return INF
    depth = member_depths(X, U).max(axis=0).min()
    realized = X.realized_distances
    idx = int(np.searchsorted(realized, depth, side="left")) - 1
    if idx < 0:
        return -INF
    return float(realized[idx])


@dataclass(frozen=True)
class RefinesReport:
    """Outcome of a refinement check with a per-member containment witness."""

    ok: bool
    witness: tuple[int, ...] | None
    failing_member: int | None

    def __bool__(self) -> bool:
        return self.ok


def refines(V: Cover, U: Cover) -> RefinesReport:
    """Does every member of V sit inside some member of U?

    The witness maps each V member to the lowest-index containing U member.
    """
    _same_space(V, U)
    if not V.members:
        return RefinesReport(True, (), None)
    if not U.members:
        return RefinesReport(False, None, 0)
    contained = (
        V.matrix.astype(np.float64) @ (~U.matrix).T.astype(np.float64)
    ) == 0
    ok_rows = contained.any(axis=1)
    if not ok_rows.all():
        return RefinesReport(False, None, int(np.flatnonzero(~ok_rows)[0]))
    return RefinesReport(True, tuple(int(i) for i in contained.argmax(axis=1)), None)


def ball_cover(X: FiniteMetricSpace, r: float) -> Cover:
    """The cover {B(x, r) : x in X} by closed r-balls, canonicalized."""
    if r < 0:
        raise InputError("ball radius must be non-negative")
    rows = X.dist <= r
    return Cover(X.n, [tuple(np.flatnonzero(row)) for row in rows])


@dataclass(frozen=True)
class BasisChain:
    """Nested, star-closed sequence of covers over one space."""

    levels: tuple[Cover, ...]

    def __post_init__(self):
        if not self.levels:
            raise InputError("a basis chain needs at least one level")
        n = self.levels[0].n
        if any(lv.n != n for lv in self.levels):
            raise InputError("chain levels live over different spaces")

    @property
    def n(self) -> int:
        return self.levels[0].n

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)


@dataclass(frozen=True)
class ChainValidation:
    ok: bool
    problems: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.ok


def validate_basis_chain(chain: BasisChain) -> ChainValidation:
    """Check nestedness and star-closure level by level.

    Star-closure demands st(U_i, U_j) refines U_{max(i,j)+1} for every
    ordered pair whose target level exists; the top level is unconstrained.
    """
    problems = []
    levels = chain.levels
    k = len(levels) - 1
    for i, lv in enumerate(levels):
        if not lv.covers_space:
            problems.append(f"level {i} does not cover the space")
    for i in range(k):
        if not refines(levels[i], levels[i + 1]):
            problems.append(f"level {i} does not refine level {i + 1}")
    for i in range(k + 1):
        for j in range(k + 1):
            target = max(i, j) + 1
            if target > k:
                continue
            if not refines(star_cover(levels[i], levels[j]), levels[target]):
                problems.append(
                    f"st(level {i}, level {j}) does not refine level {target}"
                )
    return ChainValidation(not problems, tuple(problems))


def ensure_valid_chain(chain: BasisChain, context: str) -> None:
    report = validate_basis_chain(chain)
    if not report:
        raise InternalInvariantError(
            f"{context}: chain validation failed: " + "; ".join(report.problems)
        )

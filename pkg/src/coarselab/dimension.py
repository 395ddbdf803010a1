"""Dimension certificates: colored families, star coarsenings, brick covers.

The two certificate shapes are a low-multiplicity coarsening of a base cover
and a split of the space into r-disjoint colored families; each direction of
the equivalence is constructive here and re-verified from definitions before
anything is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    BasisChain,
    Cover,
    FiniteMetricSpace,
    ball_cover,
    ensure_valid_chain,
    grid_coords,
    lebesgue_number,
    member_depths,
    mesh,
    multiplicity,
    refines,
    star_cover,
    validate_basis_chain,
)
from .disjointness import is_discrete, min_gap
from .errors import (
    InputError,
    InternalInvariantError,
    OracleContractError,
    PreconditionError,
)
from .metrization import chain_metric

INF = math.inf

# Separation margin ladder for the depth split.  The first rung is the
# documented constant: a cover with multiplicity n+1 and Lebesgue number at
# least (n+1)*r always splits into n+1 r-disjoint families.  Later rungs
# only tighten the margin for callers with Lebesgue room to spare.
SPLIT_MARGIN_LADDER = (1.0, 2.0, 4.0)


def split_constant(n: int, rung: int = 0) -> float:
    """Required ratio Lebesgue/r for the depth split at a ladder rung."""
    return (n + 1) * SPLIT_MARGIN_LADDER[rung]


@dataclass(frozen=True)
class ColoredFamilies:
    """A fixed number of disjoint-ish families whose union covers the space.

    Exactly one of scale/reference is set: with scale r each family must be
    r-disjoint (min_gap >= r); with a reference cover each family must be
    star-discrete against it.  mesh_bound caps member diameters.
    """

    families: tuple[Cover, ...]
    scale: float | None
    reference: Cover | None
    mesh_bound: float
    constant_used: float | None = None

    def __post_init__(self):
        if (self.scale is None) == (self.reference is None):
            raise InputError("exactly one of scale/reference must be given")
        if not self.families:
            raise InputError("need at least one family")

    @property
    def n_families(self) -> int:
        return len(self.families)

    def flatten(self) -> Cover:
        n = self.families[0].n
        members: list[tuple[int, ...]] = []
        for fam in self.families:
            members.extend(fam.members)
        return Cover(n, members)


def verify_colored_families(
    X: FiniteMetricSpace, cf: ColoredFamilies, require_cover: bool = True
) -> list[str]:
    """Re-check every ColoredFamilies invariant from definitions."""
    problems = []
    if require_cover and not cf.flatten().covers_space:
        problems.append("union of families does not cover the space")
    for i, fam in enumerate(cf.families):
        if cf.scale is not None:
            gap = min_gap(X, fam)
            if not gap.is_disjoint(cf.scale):
                problems.append(
                    f"family {i} has gap {gap.min_gap} < scale {cf.scale}"
                )
        else:
            rep = is_discrete(fam, cf.reference)
            if not rep:
                problems.append(
                    f"family {i} is not discrete against the reference "
                    f"(members {rep.colliding} collide)"
                )
        fam_mesh = mesh(X, fam)
        if fam_mesh > cf.mesh_bound:
            problems.append(f"family {i} has mesh {fam_mesh} > bound {cf.mesh_bound}")
    return problems


def ostrand_forward(
    X: FiniteMetricSpace,
    U: Cover,
    V: ColoredFamilies,
    hypothesis: str = "proof",
) -> Cover:
    """Turn colored families into one low-multiplicity coarsening of U.

    With hypothesis="proof" each family must be star-discrete against
    st(U, U); with "statement" discreteness against U itself is enough, and
    still forces the returned cover st(flatten(V), U) to have multiplicity at
    most the number of families.  Both the multiplicity bound and the fact
    that the result coarsens U are re-verified before return.
    """
    if hypothesis not in ("proof", "statement"):
        raise InputError("hypothesis must be 'proof' or 'statement'")
    if not U.covers_space:
        raise PreconditionError("base cover U does not cover the space")
    flat = V.flatten()
    if not flat.covers_space:
        raise PreconditionError("union of the colored families does not cover the space")
    ref = star_cover(U, U) if hypothesis == "proof" else U
    for i, fam in enumerate(V.families):
        rep = is_discrete(fam, ref)
        if not rep:
            raise PreconditionError(
                f"family {i} is not discrete against "
                f"{'st(U,U)' if hypothesis == 'proof' else 'U'}: "
                f"members {rep.colliding} have intersecting stars"
            )
    W = star_cover(flat, U)
    mult = multiplicity(W)
    if mult > V.n_families:
        raise InternalInvariantError(
            f"star coarsening has multiplicity {mult} > {V.n_families}"
        )
    if not refines(U, W):
        raise InternalInvariantError("star coarsening does not coarsen U")
    return W


def _depth_split(
    X: FiniteMetricSpace, U: Cover, r: float, n: int, margin: float
) -> ColoredFamilies:
    """Split by depth-order gaps: color = first order-statistic gap > margin*r.

    Member depths are 1-Lipschitz, so two points of the same color whose
    top-(i+1) member sets differ are more than 2*(margin*r/2) apart; grouping
    points by (color, top set) therefore yields r-disjoint families when
    margin >= 1.
    """
    theta = margin * r
    depths = member_depths(X, U)
    m = depths.shape[0]
    pieces: dict[tuple[int, frozenset[int]], list[int]] = {}
    order = np.argsort(-depths, axis=0, kind="stable")
    sorted_depths = -np.sort(-depths, axis=0)
    for x in range(X.n):
        top = sorted_depths[: n + 1, x]
        nxt = np.concatenate([sorted_depths[1 : n + 1, x], [0.0]])[: n + 1]
        if m <= n:
            pad = np.zeros(n + 1)
            pad[:m] = sorted_depths[:m, x]
            top = pad
            nxt = np.concatenate([pad[1:], [0.0]])
        gaps = np.where(np.isinf(top) & np.isinf(nxt), 0.0, top - nxt)
        color = None
        for i in range(n + 1):
            if gaps[i] > theta:
                color = i
                break
        if color is None:
            raise InternalInvariantError(
                f"point {x} received no color at margin {theta}"
            )
        top_set = frozenset(int(j) for j in order[: color + 1, x])
        pieces.setdefault((color, top_set), []).append(x)
    family_members: list[list[tuple[int, ...]]] = [[] for _ in range(n + 1)]
    for (color, _), pts in pieces.items():
        family_members[color].append(tuple(sorted(pts)))
    families = tuple(Cover(X.n, mem) for mem in family_members)
    return ColoredFamilies(
        families=families,
        scale=r,
        reference=None,
        mesh_bound=mesh(X, U),
        constant_used=(n + 1) * margin,
    )


def kolmogorov_split(
    X: FiniteMetricSpace, U: Cover, r: float, n: int | None = None
) -> ColoredFamilies:
    """Split a low-multiplicity cover into n+1 r-disjoint covering families.

    Preconditions: multiplicity(U) <= n+1 and lebesgue_number(X, U) >=
    split_constant(n) * r.  Output families are re-verified (coverage, gaps,
    mesh); on the unexpected event of a verification failure the split
    retries with the next margin on the ladder and reports the constant it
    actually used.
    """
    if r <= 0:
        raise InputError("split scale r must be positive")
    if n is None:
        n = max(multiplicity(U) - 1, 0)
    mult = multiplicity(U)
    if mult > n + 1:
        raise PreconditionError(
            f"cover multiplicity {mult} exceeds the requested n+1 = {n + 1}"
        )
    leb = lebesgue_number(X, U)
    if leb < split_constant(n) * r:
        raise PreconditionError(
            f"Lebesgue number {leb} below c(n)*r = {split_constant(n)} * {r}"
        )
    last_problems: list[str] = []
    for rung, margin in enumerate(SPLIT_MARGIN_LADDER):
        if leb < split_constant(n, rung) * r:
            break
        cf = _depth_split(X, U, r, n, margin)
        problems = verify_colored_families(X, cf)
        if not problems:
            return cf
        last_problems = problems
    raise InternalInvariantError(
        "depth split failed verification on every admissible margin: "
        + "; ".join(last_problems)
    )


def basis_tower(
    X: FiniteMetricSpace,
    U: Cover,
    coarsen,
    depth: int,
    max_multiplicity: int,
) -> BasisChain:
    """Alternate oracle coarsenings with star steps into a validated chain.

    Levels: U_0 = U, U_1 = coarsen(U_0), U_2 = st(U_1, U_0), and
    U_k = coarsen(st(U_{k-1}, U_{k-2})) from k = 3 on, truncated at depth.
    Every oracle output is checked to coarsen its input with multiplicity at
    most max_multiplicity; a violation names the offending level.
    """
    if depth < 2:
        raise PreconditionError("tower depth must be at least 2")
    if not U.covers_space:
        raise PreconditionError("base cover does not cover the space")

    def checked(base: Cover, k: int) -> Cover:
        out = coarsen(base)
        if not isinstance(out, Cover) or out.n != U.n:
            raise OracleContractError(f"oracle returned a non-cover at level {k}")
        if not refines(base, out):
            raise OracleContractError(f"oracle output at level {k} does not coarsen its input")
        m = multiplicity(out)
        if m > max_multiplicity:
            raise OracleContractError(
                f"oracle output at level {k} has multiplicity {m} > {max_multiplicity}"
            )
        return out

    levels = [U, checked(U, 1)]
    levels.append(star_cover(levels[1], levels[0]))
    for k in range(3, depth + 1):
        base = star_cover(levels[k - 1], levels[k - 2])
        levels.append(checked(base, k))
    chain = BasisChain(tuple(levels[: depth + 1]))
    ensure_valid_chain(chain, "basis_tower")
    return chain


def ostrand_backward(
    X: FiniteMetricSpace,
    U: Cover,
    coarsen,
    n: int,
    depth: int = 6,
    max_depth: int = 24,
) -> ColoredFamilies:
    """Produce n+1 U-discrete covering families from a coarsening oracle.

    Builds the coarsening tower over U, realizes it as a chain metric, depth
    splits a low-multiplicity tower level in that metric at a scale whose
    disjointness forces U-star disjointness back in X, and re-verifies the
    result against U.
    """
    if not U.covers_space:
        raise PreconditionError("base cover does not cover the space")
    # Chain-metric facts used below: level-0 co-members sit at distance <= 1,
    # so any two members whose U-stars meet are joined through at most two
    # level-0 hops, i.e. at chain distance <= 2.  Splitting at gap 4 > 2 in
    # the chain metric therefore certifies U-star disjointness in X.
    r_chain = 4.0
    while True:
        chain = basis_tower(X, U, coarsen, depth, n + 1)
        report = chain_metric(chain)
        metric = report.metric
        split = None
        for k in [1] + list(range(3, len(chain.levels), 2)):
            level = chain.levels[k]
            if multiplicity(level) > n + 1:
                continue
            if lebesgue_number(metric, level) >= split_constant(n) * r_chain:
                split = kolmogorov_split(metric, level, r_chain, n)
                break
        if split is not None:
            break
        if depth >= max_depth:
            raise InternalInvariantError(
                "coarsening tower never reached the Lebesgue room needed for the split"
            )
        depth = min(depth + 4, max_depth)
    mesh_bound = max(mesh(X, fam) for fam in split.families)
    out = ColoredFamilies(
        families=split.families,
        scale=None,
        reference=U,
        mesh_bound=mesh_bound,
        constant_used=split.constant_used,
    )
    problems = verify_colored_families(X, out)
    if problems:
        raise InternalInvariantError(
            "backward construction failed verification: " + "; ".join(problems)
        )
    return out


def brick_cover(dims, s: int) -> Cover:
    """Shifted-lattice brick cover of the l1 grid with multiplicity <= k+1.

    Each of the k+1 tilings by period-s cubes is diagonally offset by
    round(i*s/(k+1)); every point lies in exactly one cell per tiling, so the
    multiplicity bound holds by construction and is still re-verified, along
    with depth floor(s/(2(k+1))) + 1 at some cell for every point, which
    makes the Lebesgue number at least floor(s/(2(k+1))).
    """
    dims = tuple(int(d) for d in dims)
    if not dims or any(d <= 0 for d in dims):
        raise InputError("grid dims must be positive")
    if s < 1:
        raise InputError("brick side must be at least 1")
    k = len(dims)
    coords = grid_coords(dims)
    n = coords.shape[0]
    members = []
    g = s // (2 * (k + 1))
    depth_ok = np.zeros(n, dtype=bool)
    per_point_cells = np.zeros(n, dtype=np.int64)
    for i in range(k + 1):
        offset = round(i * s / (k + 1))
        cell_idx = (coords + (s - offset)) // s
        # group points by their cell index vector within tiling i
        keys = [tuple(int(c) for c in row) for row in cell_idx]
        cells: dict[tuple, list[int]] = {}
        for p, key in enumerate(keys):
            cells.setdefault(key, []).append(p)
        per_point_cells += 1
        for key, pts in sorted(cells.items()):
            members.append(tuple(pts))
            lo = np.array(key) * s - (s - offset)
            hi = lo + s - 1
            sub = coords[pts]
            axis_depth = np.full(len(pts), np.inf)
            for j in range(k):
                left = np.where(lo[j] > 0, sub[:, j] - lo[j] + 1.0, np.inf)
                right = np.where(hi[j] < dims[j] - 1, hi[j] - sub[:, j] + 1.0, np.inf)
                axis_depth = np.minimum(axis_depth, np.minimum(left, right))
            depth_ok[np.array(pts)[axis_depth >= g + 1]] = True
    cover = Cover(n, members)
    mult = multiplicity(cover)
    if mult > k + 1:
        raise InternalInvariantError(f"brick cover multiplicity {mult} > {k + 1}")
    if not depth_ok.all():
        raise InternalInvariantError(
            "some grid point is shallow in every brick; Lebesgue floor violated"
        )
    return cover


@dataclass(frozen=True)
class FinitisticProfile:
    """Outcome of the mesh-budgeted multiplicity search."""

    feasible: bool
    multiplicity: int | None
    witness: Cover | None


def finitistic_profile(
    X: FiniteMetricSpace, U: Cover, mesh_budget: float
) -> FinitisticProfile:
    """Greedy merge search for a low-multiplicity coarsening within a budget.

    Members through a maximal-multiplicity point are merged whenever the
    union stays within the mesh budget; merging never raises multiplicity,
    so the final cover is the best seen.  The witness always coarsens U and
    is verified, but no optimality is claimed.  A budget below mesh(U)
    admits no coarsening at all and yields an infeasible result.
    """
    if not U.covers_space:
        raise PreconditionError("base cover does not cover the space")
    base_mesh = mesh(X, U)
    if mesh_budget < base_mesh:
        return FinitisticProfile(False, None, None)
    if X.diameter <= mesh_budget:
        witness = Cover(X.n, [tuple(range(X.n))])
        return FinitisticProfile(True, 1, witness)

    members = [set(m) for m in U.members]

    def diam(pts: set[int]) -> float:
        idx = sorted(pts)
        return float(X.dist[np.ix_(idx, idx)].max())

    while True:
        counts = np.zeros(X.n, dtype=np.int64)
        for m in members:
            counts[list(m)] += 1
        worst = int(counts.max())
        if worst <= 1:
            break
        merged = False
        for x in np.flatnonzero(counts == worst):
            holders = [i for i, m in enumerate(members) if x in m]
            done = False
            for a in range(len(holders)):
                for b in range(a + 1, len(holders)):
                    u = members[holders[a]] | members[holders[b]]
                    if diam(u) <= mesh_budget:
                        members[holders[a]] = u
                        del members[holders[b]]
                        merged = done = True
                        break
                if done:
                    break
            if done:
                break
        if not merged:
            break
    witness = Cover(X.n, [tuple(sorted(m)) for m in members])
    if not refines(U, witness):
        raise InternalInvariantError("greedy merge lost the coarsening property")
    if mesh(X, witness) > mesh_budget:
        raise InternalInvariantError("greedy merge exceeded the mesh budget")
    return FinitisticProfile(True, multiplicity(witness), witness)


@dataclass(frozen=True)
class AsdimCertificate:
    """A dimension witness over a base cover, never trusted without re-check.

    witness is either a Cover coarsening base_cover with multiplicity at most
    n+1, or a ColoredFamilies value at the certificate's scale.
    """

    base_cover: Cover
    witness: Cover | ColoredFamilies
    n: int
    mesh_bound: float


def verify_asdim_certificate(X: FiniteMetricSpace, cert: AsdimCertificate) -> list[str]:
    problems = []
    if isinstance(cert.witness, Cover):
        if multiplicity(cert.witness) > cert.n + 1:
            problems.append(
                f"witness multiplicity {multiplicity(cert.witness)} > n+1 = {cert.n + 1}"
            )
        if not refines(cert.base_cover, cert.witness):
            problems.append("witness does not coarsen the base cover")
        if mesh(X, cert.witness) > cert.mesh_bound:
            problems.append("witness mesh exceeds the declared bound")
    else:
        if cert.witness.n_families > cert.n + 1:
            problems.append(
                f"{cert.witness.n_families} families exceed n+1 = {cert.n + 1}"
            )
        problems.extend(verify_colored_families(X, cert.witness))
    return problems

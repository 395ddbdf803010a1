"""Star-closure of cover lists into basis chains and their chain metrics.

A valid chain is realized as an inf-metric by weighting each pair with 2 to
the first level where it shares a member and taking shortest paths.  The
two-sided comparison between chain levels and metric ball covers is computed
per instance and reported, not promised with a priori constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.csgraph as csgraph

from .core import (
    BasisChain,
    Cover,
    FiniteMetricSpace,
    ball_cover,
    ensure_valid_chain,
    mesh,
    refines,
    star_cover,
    trivial_extension,
    validate_basis_chain,
)
from .errors import InputError, InternalInvariantError

INF = math.inf

_CLOSURE_PASS_LIMIT = 200


def _union_family(a: Cover, b: Cover) -> Cover:
    return Cover(a.n, list(a.members) + list(b.members))


def close_under_stars(families: list[Cover] | tuple[Cover, ...]) -> BasisChain:
    """Close a list of families into a valid basis chain.

    Input families are extended with singletons of uncovered points, then the
    list is repeatedly repaired: members of a level are pushed into the next
    level until nestedness holds, stars of two levels are pushed into the
    level above the larger one, and self-star levels are appended until the
    top level absorbs its own stars.  The subset lattice of a finite space is
    finite, so the loop terminates; the result is validated before return.

    Output chains are fixed points: running the closure again returns an
    equal chain.
    """
    if not families:
        raise InputError("need at least one family to close")
    n = families[0].n
    if any(f.n != n for f in families):
        raise InputError("families live over different spaces")
    levels = [trivial_extension(f) for f in families]

    for _ in range(_CLOSURE_PASS_LIMIT):
        changed = False
        for i in range(len(levels) - 1):
            if not refines(levels[i], levels[i + 1]):
                levels[i + 1] = _union_family(levels[i + 1], levels[i])
                changed = True
        top = len(levels) - 1
        for i in range(top + 1):
            for j in range(top + 1):
                target = max(i, j) + 1
                if target > top:
                    continue
                st = star_cover(levels[i], levels[j])
                if not refines(st, levels[target]):
                    levels[target] = _union_family(levels[target], st)
                    changed = True
        top_star = star_cover(levels[top], levels[top])
        if not refines(top_star, levels[top]):
            levels.append(_union_family(levels[top], top_star))
            changed = True
        if not changed:
            break
    else:
        raise InternalInvariantError("star closure did not stabilize")

    chain = BasisChain(tuple(levels))
    ensure_valid_chain(chain, "close_under_stars")
    return chain


@dataclass(frozen=True)
class LevelBound:
    """Two-sided comparison of one chain level with metric ball covers.

    chain_mesh bounds the level's members in the chain metric (members of
    level k always have chain diameter <= 2**k).  ball_level is the smallest
    level whose members contain every chain ball of radius 2**k, or None if
    the chain is too short to absorb them.
    """

    level: int
    chain_mesh: float
    ball_level: int | None

    @property
    def offset(self) -> int | None:
        return None if self.ball_level is None else self.ball_level - self.level


@dataclass(frozen=True)
class ChainMetricReport:
    metric: FiniteMetricSpace
    level_bounds: tuple[LevelBound, ...]

    @property
    def all_balls_absorbed(self) -> bool:
        return all(b.ball_level is not None for b in self.level_bounds)


def chain_weights(chain: BasisChain) -> np.ndarray:
    """Edge weights 2**(first co-membership level); inf when never co-members."""
    n = chain.n
    w = np.full((n, n), INF)
    np.fill_diagonal(w, 0.0)
    unset = np.ones((n, n), dtype=bool)
    np.fill_diagonal(unset, False)
    for k, level in enumerate(chain.levels):
        if not level.members:
            continue
        mat = level.matrix.astype(np.float64)
        together = (mat.T @ mat) > 0
        hit = together & unset
        w[hit] = 2.0**k
        unset &= ~hit
        if not unset.any():
            break
    return w


def chain_metric(chain: BasisChain, label: str | None = None) -> ChainMetricReport:
    """Shortest-path metric over the chain weights, with per-level bounds.

    Disconnected chains produce inf distances, which is a valid inf-metric.
    Weights are exact powers of two, so path sums are exact in float64 up to
    level 52.
    """
    report = validate_basis_chain(chain)
    if not report:
        raise InputError("chain is not valid: " + "; ".join(report.problems))
    w = chain_weights(chain)
    finite = np.where(np.isfinite(w), w, 0.0)
    mask = np.isfinite(w) & (w > 0)
    dist = csgraph.shortest_path(finite * mask, method="D", directed=False)
    # shortest_path treats 0 as "no edge"; weights here are powers of two so
    # only the diagonal is zero and nothing is lost.
    metric = FiniteMetricSpace(dist, label=label or "chain-metric", check_triangle=False)
    bounds = []
    for k, level in enumerate(chain.levels):
        level_mesh = mesh(metric, level)
        balls = ball_cover(metric, 2.0**k)
        ball_level = None
        for ell in range(len(chain.levels)):
            if refines(balls, chain.levels[ell]):
                ball_level = ell
                break
        bounds.append(LevelBound(k, level_mesh, ball_level))
    return ChainMetricReport(metric, tuple(bounds))


@dataclass(frozen=True)
class LevelEquivalence:
    level: int
    chain_mesh: float
    members_fit_balls: bool
    ball_level: int | None
    balls_fit_level: bool

    @property
    def ok(self) -> bool:
        return self.members_fit_balls and self.balls_fit_level


@dataclass(frozen=True)
class EquivalenceReport:
    """Executable form of "the chain and its metric bound each other".

    For each level k the report witnesses both refinement directions: level
    members sit inside metric balls of radius chain_mesh(k), and metric balls
    of radius 2**k sit inside members of the reported higher level.
    """

    levels: tuple[LevelEquivalence, ...]

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.levels)


def basis_equivalence_report(chain: BasisChain, metric: FiniteMetricSpace) -> EquivalenceReport:
    if metric.n != chain.n:
        raise InputError("metric does not match the chain's space")
    entries = []
    for k, level in enumerate(chain.levels):
        level_mesh = mesh(metric, level)
        fit_fwd = bool(refines(level, ball_cover(metric, level_mesh)))
        balls = ball_cover(metric, 2.0**k)
        ball_level = None
        for ell in range(len(chain.levels)):
            if refines(balls, chain.levels[ell]):
                ball_level = ell
                break
        entries.append(
            LevelEquivalence(k, level_mesh, fit_fwd, ball_level, ball_level is not None)
        )
    return EquivalenceReport(tuple(entries))

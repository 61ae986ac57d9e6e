"""Compact convex sets, support functions and minimum-norm points.

The sets that show up as pointwise subdifferentials are built from a
handful of primitives: points, polytopes given by vertex lists, balls
restricted to a coordinate subspace, Minkowski sums and nonnegative
scalings.  Two queries matter:

* ``support(S, d)``: the support value max_{v in S} <v, d> together with
  a maximizing point, and
* ``min_norm_point(S)``: the (unique) point of S closest to the origin,
  which is the steepest-descent generator.

``min_norm_point`` picks the cheapest exact route available: direct
formulas for points, segments and offset balls, Wolfe's minimum-norm
algorithm for general polytopes, and an away-step conditional-gradient
loop driven by the support oracle for everything else.  Every route
reports the duality gap <v, v> - min_{s in S} <v, s> so callers can check
the answer without trusting the solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


# ---------------------------------------------------------------------------
# set variants


@dataclass(frozen=True, eq=False)
class Singleton:
    point: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "point", np.atleast_1d(np.asarray(self.point, float)))


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of a finite vertex list, shape (k, d), k >= 1."""

    vertices: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, float)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("vertices must be a (k, d) array with k >= 1")
        object.__setattr__(self, "vertices", v)


@dataclass(frozen=True, eq=False)
class Ball:
    """center + {u : ||u|| <= radius, u supported on the masked coordinates}."""

    center: np.ndarray
    radius: float
    mask: np.ndarray = None  # bool (d,); default: all coordinates

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.center, float))
        object.__setattr__(self, "center", c)
        if self.radius < 0.0:
            raise ValueError("radius must be nonnegative")
        m = self.mask
        m = np.ones(c.shape[0], bool) if m is None else np.asarray(m, bool)
        if m.shape != c.shape:
            raise ValueError("mask and center shapes differ")
        object.__setattr__(self, "mask", m)


@dataclass(frozen=True, eq=False)
class MinkowskiSum:
    members: tuple

    def __post_init__(self) -> None:
        members = tuple(self.members)
        if not members:
            raise ValueError("MinkowskiSum needs at least one member")
        d = dim(members[0])
        if any(dim(m) != d for m in members[1:]):
            raise ValueError("members have mismatched dimensions")
        object.__setattr__(self, "members", members)


@dataclass(frozen=True, eq=False)
class Scaled:
    """factor * S with factor >= 0."""

    factor: float
    inner: "ConvexSet"

    def __post_init__(self) -> None:
        if self.factor < 0.0:
            raise ValueError("Scaled factor must be nonnegative")


ConvexSet = Union[Singleton, Polytope, Ball, MinkowskiSum, Scaled]


def dim(s: ConvexSet) -> int:
    if isinstance(s, Singleton):
        return s.point.shape[0]
    if isinstance(s, Polytope):
        return s.vertices.shape[1]
    if isinstance(s, Ball):
        return s.center.shape[0]
    if isinstance(s, MinkowskiSum):
        return dim(s.members[0])
    if isinstance(s, Scaled):
        return dim(s.inner)
    raise TypeError(f"not a ConvexSet: {s!r}")


def negate(s: ConvexSet) -> ConvexSet:
    """The reflected set -S = {-v : v in S}."""
    if isinstance(s, Singleton):
        return Singleton(-s.point)
    if isinstance(s, Polytope):
        return Polytope(-s.vertices)
    if isinstance(s, Ball):
        return Ball(-s.center, s.radius, s.mask)
    if isinstance(s, MinkowskiSum):
        return MinkowskiSum(tuple(negate(m) for m in s.members))
    if isinstance(s, Scaled):
        return Scaled(s.factor, negate(s.inner))
    raise TypeError(f"not a ConvexSet: {s!r}")


def scale(c: float, s: ConvexSet) -> ConvexSet:
    """c * S for c >= 0, applied eagerly to the primitives."""
    if c < 0.0:
        raise ValueError("scale factor must be nonnegative")
    if isinstance(s, Singleton):
        return Singleton(c * s.point)
    if isinstance(s, Polytope):
        return Polytope(c * s.vertices)
    if isinstance(s, Ball):
        return Ball(c * s.center, c * s.radius, s.mask)
    if isinstance(s, MinkowskiSum):
        return MinkowskiSum(tuple(scale(c, m) for m in s.members))
    if isinstance(s, Scaled):
        return scale(c * s.factor, s.inner)
    raise TypeError(f"not a ConvexSet: {s!r}")


# ---------------------------------------------------------------------------
# support oracle


def support(s: ConvexSet, d: np.ndarray) -> tuple[float, np.ndarray]:
    """Support value and a maximizing point of S in direction d.

    Ties between polytope vertices break toward the lowest index, so the
    oracle is deterministic.  d = 0 returns (0, some point of S).
    """
    d = np.asarray(d, float)
    if isinstance(s, Singleton):
        return float(s.point @ d), s.point.copy()
    if isinstance(s, Polytope):
        dots = s.vertices @ d
        j = int(np.argmax(dots))
        return float(dots[j]), s.vertices[j].copy()
    if isinstance(s, Ball):
        dm = np.where(s.mask, d, 0.0)
        nm = float(np.linalg.norm(dm))
        w = s.center.copy()
        if nm > 0.0 and s.radius > 0.0:
            w += (s.radius / nm) * dm
        return float(s.center @ d) + s.radius * nm, w
    if isinstance(s, MinkowskiSum):
        val = 0.0
        w = np.zeros_like(d)
        for m in s.members:
            v, p = support(m, d)
            val += v
            w += p
        return val, w
    if isinstance(s, Scaled):
        v, p = support(s.inner, d)
        return s.factor * v, s.factor * p
    raise TypeError(f"not a ConvexSet: {s!r}")


# ---------------------------------------------------------------------------
# minimum-norm point


@dataclass
class MinNormResult:
    """Closest point to the origin plus a verifiable certificate.

    point is a convex combination ``weights @ atoms`` of points of S, and
    gap = <point, point> - min_{s in S} <point, s> bounds the squared
    distance between point and the true minimizer.
    """

    point: np.ndarray
    sqnorm: float
    gap: float
    iterations: int
    certified: bool
    atoms: np.ndarray
    weights: np.ndarray


def _gap(s: ConvexSet, x: np.ndarray) -> float:
    sval, _ = support(s, -x)
    return float(x @ x + sval)


def _finish(s, x, atoms, weights, iters, tol) -> MinNormResult:
    x = np.asarray(x, float)
    g = _gap(s, x)
    return MinNormResult(
        point=x,
        sqnorm=float(x @ x),
        gap=g,
        iterations=iters,
        certified=bool(g <= tol * (1.0 + float(x @ x))),
        atoms=np.asarray(atoms, float),
        weights=np.asarray(weights, float),
    )


def _canonical(s: ConvexSet, mult: float, q: np.ndarray, polys: list, balls: list):
    """Flatten into offset + scaled polytopes + scaled balls."""
    if isinstance(s, Singleton):
        q += mult * s.point
    elif isinstance(s, Polytope):
        if s.vertices.shape[0] == 1:
            q += mult * s.vertices[0]
        else:
            polys.append(mult * s.vertices)
    elif isinstance(s, Ball):
        if s.radius == 0.0:
            q += mult * s.center
        else:
            balls.append((mult * s.center, mult * s.radius, s.mask))
    elif isinstance(s, MinkowskiSum):
        for m in s.members:
            _canonical(m, mult, q, polys, balls)
    elif isinstance(s, Scaled):
        if s.factor == 0.0:
            pass  # 0 * S = {0}
        else:
            _canonical(s.inner, mult * s.factor, q, polys, balls)
    else:
        raise TypeError(f"not a ConvexSet: {s!r}")


_VERTEX_PRODUCT_CAP = 4096


def _merge_polytopes(polys: list) -> np.ndarray | None:
    """Minkowski-sum vertex products, or None if the count would blow up."""
    verts = polys[0]
    for extra in polys[1:]:
        if verts.shape[0] * extra.shape[0] > _VERTEX_PRODUCT_CAP:
            return None
        verts = (verts[:, None, :] + extra[None, :, :]).reshape(-1, verts.shape[1])
    return verts


def _merge_balls(balls: list) -> list:
    """Sum balls sharing one coordinate mask; centers add, radii add."""
    merged: list = []
    for c, r, m in balls:
        for k, (c2, r2, m2) in enumerate(merged):
            if np.array_equal(m, m2):
                merged[k] = (c2 + c, r2 + r, m2)
                break
        else:
            merged.append((c.astype(float), float(r), m))
    return merged


def min_norm_point(s: ConvexSet, tol: float = 1e-10, max_iter: int | None = None) -> MinNormResult:
    """Minimum Euclidean norm point of a compact convex set.

    tol controls the duality-gap certificate: the result is ``certified``
    when gap <= tol * (1 + ||point||^2).
    """
    d = dim(s)
    q = np.zeros(d)
    polys: list = []
    balls: list = []
    _canonical(s, 1.0, q, polys, balls)
    balls = _merge_balls(balls)

    if not balls:
        if not polys:
            return _finish(s, q, [q], [1.0], 0, tol)
        verts = _merge_polytopes(polys)
        if verts is not None:
            verts = verts + q
            if verts.shape[0] == 1:
                return _finish(s, verts[0], [verts[0]], [1.0], 0, tol)
            if verts.shape[0] == 2:
                x = _segment_min_norm(verts[0], verts[1])
                return _finish(s, x, verts, _segment_weights(verts[0], verts[1], x), 0, tol)
            if max_iter is None:
                max_iter = 10 * d * (verts.shape[0] + 10)
            return _wolfe(s, verts, tol, max_iter)
    elif not polys and len(balls) == 1:
        c, r, m = balls[0]
        x = q + c
        x = x.copy()
        nm = float(np.linalg.norm(np.where(m, x, 0.0)))
        factor = 0.0 if nm <= r else 1.0 - r / nm
        x[m] *= factor
        return _finish(s, x, [x], [1.0], 0, tol)
    elif len(balls) == 1 and balls[0][2].all():
        # Summing a full ball is an r-neighborhood: shift the polytope by
        # the ball center, take its nearest point, and pull it toward the
        # origin by r.  Exact, unlike the conditional-gradient fallback.
        c, r, _ = balls[0]
        verts = _merge_polytopes(polys)
        if verts is not None:
            verts = verts + (q + c)
            if verts.shape[0] == 2:
                w = _segment_min_norm(verts[0], verts[1])
                iters = 0
            else:
                inner_cap = 10 * d * (verts.shape[0] + 10) if max_iter is None else max_iter
                inner = _wolfe(Polytope(verts), verts, tol, inner_cap)
                w, iters = inner.point, inner.iterations
            nm = float(np.linalg.norm(w))
            x = np.zeros(d) if nm <= r else (1.0 - r / nm) * w
            return _finish(s, x, [x], [1.0], iters, tol)

    if max_iter is None:
        nverts = sum(p.shape[0] for p in polys)
        max_iter = 10 * d * (nverts + 10 * max(1, len(balls)))
    return _away_step_cg(s, tol, max_iter)


def _segment_min_norm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return a.copy()
    t = min(1.0, max(0.0, -float(a @ ab) / denom))
    return a + t * ab


def _segment_weights(a, b, x) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float((x - a) @ ab) / denom
    return np.array([1.0 - t, t])


def _affine_min_norm(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimize ||w @ A|| subject to sum w = 1 over the affine hull."""
    m = a.shape[0]
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = a @ a.T
    kkt[:m, m] = 1.0
    kkt[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    w = sol[:m]
    return w @ a, w


def _wolfe(s: ConvexSet, verts: np.ndarray, tol: float, max_iter: int) -> MinNormResult:
    """Wolfe's minimum-norm-point algorithm over conv(verts).

    Maintains a corral (an affinely independent active vertex set) whose
    affine minimizer is the current iterate; finite in exact arithmetic.
    """
    norms = np.einsum("ij,ij->i", verts, verts)
    i0 = int(np.argmin(norms))
    corral = [i0]
    w = np.array([1.0])
    x = verts[i0].copy()
    drop_eps = 1e-12

    iters = 0
    for iters in range(1, max_iter + 1):
        dots = verts @ x
        j = int(np.argmin(dots))
        sq = float(x @ x)
        if sq - float(dots[j]) <= tol * (1.0 + sq) or j in corral:
            break
        corral.append(j)
        w = np.append(w, 0.0)
        for _ in range(len(verts) + 2):  # minor cycle
            sub = verts[corral]
            y, alpha = _affine_min_norm(sub)
            if np.all(alpha > drop_eps):
                x, w = y, alpha
                break
            mask = alpha < drop_eps
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(mask & (w > alpha), w / (w - alpha), np.inf)
            theta = float(min(1.0, ratios.min()))
            if theta <= 0.0 or not np.isfinite(theta):
                # roundoff stall: evict the worst-weighted vertex outright
                drop = int(np.argmin(alpha))
                corral.pop(drop)
                w = np.delete(w, drop)
            else:
                w = (1.0 - theta) * w + theta * alpha
                w[w < drop_eps] = 0.0
                keep = w > 0.0
                if not np.any(keep):  # numerical stalemate; keep best vertex
                    keep[int(np.argmin(np.einsum("ij,ij->i", sub, sub)))] = True
                corral = [c for c, k in zip(corral, keep) if k]
                w = w[keep]
            w = w / w.sum()
            x = w @ verts[corral]

    atoms = verts[corral]
    return _finish(s, w @ atoms, atoms, w, iters, tol)


def _away_step_cg(s: ConvexSet, tol: float, max_iter: int) -> MinNormResult:
    """Away-step conditional gradient on ||x||^2 using the support oracle.

    Handles Minkowski sums that mix balls with polytopes, where no direct
    formula applies.  Exact line search per step; atoms returned by the
    oracle certify feasibility of the final combination.
    """
    _, x = support(s, np.zeros(dim(s)))
    atoms = [x.copy()]
    weights = [1.0]
    x = x.copy()

    iters = 0
    for iters in range(1, max_iter + 1):
        sval, fw_atom = support(s, -x)
        sq = float(x @ x)
        gap_fw = sq + float(sval)  # <x,x> - min_s <x,s>
        if gap_fw <= tol * (1.0 + sq):
            break
        dots = np.array([a @ x for a in atoms])
        ia = int(np.argmax(dots))
        gap_away = float(dots[ia]) - sq
        if gap_fw >= gap_away:
            direction = fw_atom - x
            gamma_max = 1.0
            away = False
        else:
            direction = x - atoms[ia]
            wa = weights[ia]
            gamma_max = wa / (1.0 - wa) if wa < 1.0 else np.inf
            away = True
        dd = float(direction @ direction)
        if dd == 0.0:
            break
        gamma = min(gamma_max, max(0.0, -float(x @ direction) / dd))
        if gamma == 0.0:
            break
        if away:
            weights = [wi * (1.0 + gamma) for wi in weights]
            weights[ia] -= gamma
        else:
            weights = [wi * (1.0 - gamma) for wi in weights]
            for k, a in enumerate(atoms):
                if np.array_equal(a, fw_atom):
                    weights[k] += gamma
                    break
            else:
                atoms.append(fw_atom.copy())
                weights.append(gamma)
        x = x + gamma * direction
        keep = [k for k, wi in enumerate(weights) if wi > 1e-14]
        atoms = [atoms[k] for k in keep]
        weights = [weights[k] for k in keep]

    arr = np.asarray(atoms)
    wts = np.asarray(weights)
    wts = wts / wts.sum()
    return _finish(s, wts @ arr, arr, wts, iters, tol)

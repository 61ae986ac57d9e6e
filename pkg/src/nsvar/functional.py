"""The penalized objective I(x, z) = J + lambda * (psi + phi) on nodal data.

A problem asks to minimize J(x, z) = int_0^T f(x(t), z(t), t) dt where z
stands for the derivative of x, subject to x(0) = x0 and optionally
x(T) = xT.  Instead of constraining z to be the derivative, two penalty
terms do the coupling:

* psi(z)    = 1/2 |x0 + int_0^T z - xT|^2      (endpoint mismatch)
* phi(x, z) = 1/2 int_0^T |x(t) - x0 - int_0^t z|^2 dt   (consistency)

Both are evaluated with the same trapezoid rule as J, and their
gradients are the exact discrete adjoints of those quadratures, so
finite differences of the implemented functionals match the gradient
fields to roundoff.  For phi this means the classic reverse-integral
formula -int_t^T d(tau) dtau picks up O(h) end-node corrections; interior
nodes match the textbook formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convexgeom import ConvexSet, MinkowskiSum, Singleton, min_norm_point
from .integrand import (
    DomainError,
    EvalPoint,
    Expr,
    eval_expr_grid,
    subdiff_expr,
    uses_var_z,
)
from .trajectory import (
    Grid,
    PairTraj,
    Traj,
    cumulative_integral,
    pl_l2_norm_sq,
    quadrature,
    reverse_cumulative_integral,
)

__all__ = [
    "ProblemSpec", "SubgradField", "initial_pair", "recovered_state",
    "eval_J", "eval_psi", "grad_psi", "eval_phi", "grad_phi", "eval_I",
    "penalty_values", "subdiff_I_at", "subdiff_I_nodes",
    "min_norm_field", "stationarity_residual",
]


# Nodal subgradient selections are trajectories in R^(2n); downstream code
# always reads them through their piecewise-linear interpolant.
SubgradField = Traj


@dataclass(eq=False)
class ProblemSpec:
    """A variational problem instance.

    Subdifferentials and gradients are laid out in R^(2n) as
    (x-partials, z-partials).  xT must be present exactly when use_psi
    is on.  use_phi defaults to whether the integrand mentions any z
    variable; use_psi defaults to whether xT is given.  Equality
    compares the mathematical content and ignores the display name.
    """

    n: int
    horizon: float
    x0: np.ndarray
    integrand: Expr
    xT: np.ndarray | None = None
    use_psi: bool | None = None
    use_phi: bool | None = None
    initial_x: tuple | None = None
    initial_z: tuple | None = None
    lambda0: float | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        self.x0 = np.atleast_1d(np.asarray(self.x0, float))
        if self.x0.shape != (self.n,):
            raise ValueError(f"x0 must have length n={self.n}")
        if self.xT is not None:
            self.xT = np.atleast_1d(np.asarray(self.xT, float))
            if self.xT.shape != (self.n,):
                raise ValueError(f"xT must have length n={self.n}")
        if self.use_psi is None:
            self.use_psi = self.xT is not None
        if self.use_psi != (self.xT is not None):
            raise ValueError("xT must be given exactly when use_psi is set")
        if self.use_phi is None:
            self.use_phi = uses_var_z(self.integrand)
        if self.initial_x is not None:
            self.initial_x = tuple(self.initial_x)
            if len(self.initial_x) != self.n:
                raise ValueError("initial_x needs one expression per component")
        if self.initial_z is not None:
            self.initial_z = tuple(self.initial_z)
            if len(self.initial_z) != self.n:
                raise ValueError("initial_z needs one expression per component")
        if self.lambda0 is not None and not self.lambda0 > 0.0:
            raise ValueError("lambda0 must be positive")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        same_xT = (self.xT is None) == (other.xT is None) and (
            self.xT is None or np.array_equal(self.xT, other.xT))
        return (
            self.n == other.n
            and self.horizon == other.horizon
            and np.array_equal(self.x0, other.x0)
            and same_xT
            and self.use_psi == other.use_psi
            and self.use_phi == other.use_phi
            and self.integrand == other.integrand
            and self.initial_x == other.initial_x
            and self.initial_z == other.initial_z
            and self.lambda0 == other.lambda0
        )


def recovered_state(p: ProblemSpec, xz: PairTraj) -> Traj:
    """The solution trajectory a run reports.

    When the problem treats z as a live variable (phi or psi active) the
    curve the method actually produces is the antiderivative
    x0 + int_0^t z, which satisfies the left boundary condition exactly;
    the x block is a splitting variable that matches it only up to
    O(1/lambda).  Without penalties x itself is the decision variable
    and is returned unchanged.
    """
    if p.use_phi or p.use_psi:
        return cumulative_integral(xz.z, p.x0)
    return xz.x.copy()


def initial_pair(p: ProblemSpec, grid: Grid) -> PairTraj:
    """Nodal starting trajectories.

    initial_x defaults to the constant x0.  A missing initial_z is filled
    with nodal finite differences of the x samples.
    """
    t = grid.nodes
    dummy = np.zeros((grid.npoints, p.n))
    xvals = np.empty((grid.npoints, p.n))
    for j in range(p.n):
        if p.initial_x is None:
            xvals[:, j] = p.x0[j]
        else:
            xvals[:, j] = eval_expr_grid(p.initial_x[j], dummy, dummy, t)
    if p.initial_z is not None:
        zvals = np.empty_like(xvals)
        for j in range(p.n):
            zvals[:, j] = eval_expr_grid(p.initial_z[j], dummy, dummy, t)
    else:
        zvals = np.gradient(xvals, grid.h, axis=0)
    return PairTraj(Traj(grid, xvals), Traj(grid, zvals))


# ---------------------------------------------------------------------------
# functional values


def eval_J(p: ProblemSpec, xz: PairTraj) -> float:
    """Trapezoid value of int f(x, z, t) dt on the pair's grid."""
    t = xz.grid.nodes
    vals = eval_expr_grid(p.integrand, xz.x.values, xz.z.values, t)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DomainError("integrand is not finite", float(t[i]), i)
    return quadrature(Traj(xz.grid, vals))


def eval_psi(p: ProblemSpec, z: Traj) -> float:
    if not p.use_psi:
        return 0.0
    r = _endpoint_residual(p, z)
    return 0.5 * float(r @ r)


def grad_psi(p: ProblemSpec, z: Traj) -> np.ndarray:
    """Gateaux gradient of psi wrt z: the constant field x0 + int z - xT."""
    if not p.use_psi:
        return np.zeros(p.n)
    return _endpoint_residual(p, z)


def _endpoint_residual(p: ProblemSpec, z: Traj) -> np.ndarray:
    end = cumulative_integral(z, p.x0).values[-1]
    return end - p.xT


def eval_phi(p: ProblemSpec, xz: PairTraj) -> float:
    if not p.use_phi:
        return 0.0
    d = _consistency_defect(p, xz)
    sq = np.einsum("ij,ij->i", d, d)
    return 0.5 * quadrature(Traj(xz.grid, sq))


def _consistency_defect(p: ProblemSpec, xz: PairTraj) -> np.ndarray:
    return xz.x.values - cumulative_integral(xz.z, p.x0).values


def grad_phi(p: ProblemSpec, xz: PairTraj) -> Traj:
    """Gradient field of phi in R^(2n): x-part d(t), z-part -int_t^T d.

    The z-part is the exact adjoint of the discrete phi: the reverse
    trapezoid tail integral with first/last node corrections of h/2 * d.
    """
    grid = xz.grid
    n = p.n
    out = np.zeros((grid.npoints, 2 * n))
    if not p.use_phi:
        return Traj(grid, out)
    d = _consistency_defect(p, xz)
    out[:, :n] = d
    tail = reverse_cumulative_integral(Traj(grid, d)).values
    zpart = -tail
    half_h = 0.5 * grid.h
    zpart[0] += half_h * d[0]
    zpart[-1] = -half_h * d[-1]
    out[:, n:] = zpart
    return Traj(grid, out)


def eval_I(p: ProblemSpec, xz: PairTraj, lam: float,
           psi_weight: float = 1.0, phi_weight: float = 1.0) -> float:
    total = eval_J(p, xz)
    if p.use_psi:
        total += lam * psi_weight * eval_psi(p, xz.z)
    if p.use_phi:
        total += lam * phi_weight * eval_phi(p, xz)
    return total


def penalty_values(p: ProblemSpec, xz: PairTraj) -> tuple[float, float]:
    """(psi, phi) without the lambda weighting."""
    return eval_psi(p, xz.z), eval_phi(p, xz)


# ---------------------------------------------------------------------------
# pointwise subdifferential of I


def _penalty_rows(p: ProblemSpec, xz: PairTraj, lam: float,
                  psi_weight: float, phi_weight: float) -> np.ndarray:
    """lam * gradient rows of (psi + phi) at every node, shape (N, 2n)."""
    n = p.n
    rows = np.zeros((xz.grid.npoints, 2 * n))
    if p.use_phi:
        rows += lam * phi_weight * grad_phi(p, xz).values
    if p.use_psi:
        rows[:, n:] += lam * psi_weight * grad_psi(p, xz.z)
    return rows


def subdiff_I_nodes(p: ProblemSpec, xz: PairTraj, lam: float,
                    tol_act: float = 1e-9, psi_weight: float = 1.0,
                    phi_weight: float = 1.0) -> list[ConvexSet]:
    """Pointwise subdifferential of I at every grid node."""
    rows = _penalty_rows(p, xz, lam, psi_weight, phi_weight)
    t = xz.grid.nodes
    xv, zv = xz.x.values, xz.z.values
    sets = []
    for i in range(xz.grid.npoints):
        point = EvalPoint(xv[i], zv[i], float(t[i]))
        s = subdiff_expr(p.integrand, point, tol_act)
        if p.use_psi or p.use_phi:
            s = MinkowskiSum((s, Singleton(rows[i])))
        sets.append(s)
    return sets


def subdiff_I_at(p: ProblemSpec, xz: PairTraj, lam: float, i: int,
                 tol_act: float = 1e-9) -> ConvexSet:
    """Pointwise subdifferential of I at node i (0-based)."""
    if not 0 <= i < xz.grid.npoints:
        raise IndexError(f"node index {i} outside 0..{xz.grid.npoints - 1}")
    rows = _penalty_rows(p, xz, lam, 1.0, 1.0)
    point = EvalPoint(xz.x.values[i], xz.z.values[i], float(xz.grid.nodes[i]))
    s = subdiff_expr(p.integrand, point, tol_act)
    if p.use_psi or p.use_phi:
        s = MinkowskiSum((s, Singleton(rows[i])))
    return s


class MinNormUncertified(RuntimeError):
    def __init__(self, node: int, gap: float):
        super().__init__(
            f"minimum-norm certificate failed at node {node} (gap {gap:.3e})"
        )
        self.node = node
        self.gap = gap


def min_norm_field(p: ProblemSpec, xz: PairTraj, lam: float,
                   tol_act: float = 1e-9, min_norm_tol: float = 1e-10,
                   psi_weight: float = 1.0, phi_weight: float = 1.0) -> SubgradField:
    """Nodal minimum-norm subgradients of I, as a 2n-component field."""
    sets = subdiff_I_nodes(p, xz, lam, tol_act, psi_weight, phi_weight)
    out = np.empty((xz.grid.npoints, 2 * p.n))
    for i, s in enumerate(sets):
        res = min_norm_point(s, tol=min_norm_tol)
        if not res.certified:
            raise MinNormUncertified(i, res.gap)
        out[i] = res.point
    return Traj(xz.grid, out)


def stationarity_residual(p: ProblemSpec, xz: PairTraj, lam: float,
                          tol_act: float = 1e-9,
                          min_norm_tol: float = 1e-10) -> float:
    """Squared L2 norm of the interpolated minimum-norm subgradient field.

    Zero exactly when 0 sits in the pointwise subdifferential at every
    node; the descent loop stops once this drops below its threshold.
    """
    field = min_norm_field(p, xz, lam, tol_act, min_norm_tol)
    return pl_l2_norm_sq(field)

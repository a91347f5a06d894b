"""Harmonic potentials, effective resistance, and threshold certificates.

The potential field of a pole ``w`` is the unique function that is 1 at
``w``, 0 at the sink, and harmonic elsewhere: each vertex holds the
multiplicity-weighted mean of its neighbors (sink included as 0).  Fields
are computed from one sparse factorization of the sink-reduced Laplacian
per graph, reused across poles; large graphs switch to a Jacobi
preconditioned conjugate gradient solve.  Every solve is checked against
a harmonicity residual of at most 1e-10.

Potentials certify particle thresholds two ways: closed-form lower and
upper bounds on the single-site toppling threshold, and a feasible dual
certificate bounding the uniform no-topple threshold on a ball.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InternalError, PreconditionError
from .graph_core import SandpileGraph

__all__ = [
    "PotentialField",
    "DualCertificate",
    "PotentialLawReport",
    "solve_potential",
    "effective_resistance",
    "potential_checks",
    "analytic_toppling_bounds",
    "dual_threshold_bound",
    "verify_laplacian_identity",
    "DIRECT_SOLVE_LIMIT",
    "RESIDUAL_TOLERANCE",
]

DIRECT_SOLVE_LIMIT = 5000
RESIDUAL_TOLERANCE = 1e-10


@dataclass(frozen=True)
class PotentialField:
    """Potential values over ordinary vertices for one pole.

    ``values[pole] == 1`` and the sink (not stored) is 0.  ``residual`` is
    the worst harmonicity defect over non-pole vertices, relative to the
    vertex degree.
    """

    pole: int
    values: np.ndarray
    residual: float

    @property
    def total(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class DualCertificate:
    """Feasible dual point certifying a uniform no-topple threshold.

    ``y`` is the scaled potential field, ``y_prime`` the scaled current
    injected at the pole, and ``objective`` the certified upper bound on
    the largest uniform per-site count that cannot topple the pole.
    """

    pole: int
    ball: tuple[int, ...]
    y: np.ndarray
    y_prime: float
    objective: float
    max_violation: float


@dataclass(frozen=True)
class PotentialLawReport:
    """Worst-case slack seen over sampled reciprocity and ordering checks."""

    reciprocity_checked: int
    reciprocity_worst: float
    triangle_checked: int
    triangle_worst: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return (
            self.reciprocity_worst <= self.tolerance
            and self.triangle_worst <= self.tolerance
        )


def _unit_vector(m, i):
    rhs = np.zeros(m)
    rhs[i] = 1.0
    return rhs


def _laplacian_solve(g: SandpileGraph, rhs: np.ndarray) -> np.ndarray:
    """Solve L x = rhs for the sink-reduced Laplacian."""
    m = g.n_ordinary
    if m <= DIRECT_SOLVE_LIMIT:
        if g._laplacian_lu is None:
            g._laplacian_lu = spla.splu(sp.csc_matrix(g.laplacian().astype(float)))
        return g._laplacian_lu.solve(rhs)
    lap = g.laplacian().astype(float)
    precond = spla.LinearOperator(
        (m, m), matvec=lambda x: x / np.asarray(g.degree, dtype=float)
    )
    x, info = spla.cg(lap, rhs, rtol=1e-12, atol=1e-14, maxiter=20 * m, M=precond)
    if info != 0:
        raise InternalError(f"conjugate gradient failed to converge (info={info})")
    return x


def _harmonic_residual(g, values, skip):
    """Worst degree-relative harmonicity defect, ignoring vertices in skip."""
    defect = g.laplacian().astype(float) @ values
    rel = np.abs(defect) / np.asarray(g.degree, dtype=float)
    for v in skip:
        rel[v] = 0.0
    return float(rel.max()) if len(rel) else 0.0


def solve_potential(g: SandpileGraph, w: int) -> PotentialField:
    """Potential field with value 1 at ``w`` and 0 at the sink."""
    g.check_ordinary(w, "pole")
    cached = g._field_cache.get(w)
    if cached is not None:
        return cached
    m = g.n_ordinary
    x = _laplacian_solve(g, _unit_vector(m, w))
    scale = x[w]
    if not np.isfinite(scale) or scale <= 0:
        raise InternalError("potential solve produced a nonpositive pole value")
    values = x / scale
    residual = _harmonic_residual(g, values, skip=[w])
    if residual > RESIDUAL_TOLERANCE:
        raise InternalError(f"harmonicity residual {residual:.3e} too large")
    fld = PotentialField(pole=int(w), values=values, residual=residual)
    g._field_cache[w] = fld
    return fld


def effective_resistance(g: SandpileGraph, u: int, v: int) -> float:
    """Voltage needed to push unit current from ``u`` to ``v``.

    Either endpoint may be the sink.  Symmetric and strictly positive for
    distinct vertices.
    """
    if u == v:
        raise PreconditionError("effective resistance needs distinct endpoints")
    m = g.n_ordinary
    if u == g.sink or v == g.sink:
        other = v if u == g.sink else u
        g.check_ordinary(other)
        x = _laplacian_solve(g, _unit_vector(m, other))
        return float(x[other])
    g.check_ordinary(u)
    g.check_ordinary(v)
    rhs = np.zeros(m)
    rhs[u] = 1.0
    rhs[v] = -1.0
    x = _laplacian_solve(g, rhs)
    return float(x[u] - x[v])


def potential_checks(
    g: SandpileGraph, pairs, triples, tolerance: float = 1e-9
) -> PotentialLawReport:
    """Verify reciprocity and the multiplicative triangle ordering.

    ``pairs`` are (t, v) with distinct ordinary t, v: checks
    R(sink,t) * pi_t(v) == R(sink,v) * pi_v(t).  ``triples`` are ordinary
    (i, j, k): checks pi_i(j) * pi_j(k) <= pi_i(k) up to ``tolerance``.
    """
    worst_rec = 0.0
    n_rec = 0
    for t, v in pairs:
        if t == v:
            raise PreconditionError("reciprocity pair must be distinct")
        ft = solve_potential(g, t)
        fv = solve_potential(g, v)
        rt = effective_resistance(g, g.sink, t)
        rv = effective_resistance(g, g.sink, v)
        gap = abs(rt * ft.values[v] - rv * fv.values[t])
        worst_rec = max(worst_rec, float(gap))
        n_rec += 1
    worst_tri = 0.0
    n_tri = 0
    for i, j, k in triples:
        fi = solve_potential(g, i)
        fj = solve_potential(g, j)
        slack = float(fi.values[j] * fj.values[k] - fi.values[k])
        worst_tri = max(worst_tri, slack)
        n_tri += 1
    return PotentialLawReport(
        reciprocity_checked=n_rec,
        reciprocity_worst=worst_rec,
        triangle_checked=n_tri,
        triangle_worst=worst_tri,
        tolerance=tolerance,
    )


def analytic_toppling_bounds(g: SandpileGraph, v: int, w: int) -> tuple[float, float]:
    """Closed-form bracket for min_to_topple(v -> w) from one potential field.

    With S the sum of the pole-w field over ordinary vertices and D the
    maximum ordinary degree, the threshold lies in
    [S / ((D+1) * pi_w(v)), (D-1) * S / pi_w(v)].
    """
    g.check_ordinary(v, "source")
    g.check_ordinary(w, "pole")
    fld = solve_potential(g, w)
    pv = float(fld.values[v])
    if pv <= 1e-13:
        raise PreconditionError("pole unreachable at solver tolerance scale")
    total = fld.total
    dmax = int(g.degree.max())
    return total / ((dmax + 1) * pv), (dmax - 1) * total / pv


def dual_threshold_bound(
    g: SandpileGraph, v: int, r: int, w: int, tolerance: float = 1e-9
):
    """Certified bound on the uniform no-topple threshold of a ball.

    Scaling the pole-w potential field by the field mass inside the ball
    around ``v`` (sink-deleted radius ``r``) yields a feasible dual point;
    its objective bounds the largest uniform per-site placement on the
    ball that cannot topple ``w``.  Returns (certificate, bound).
    """
    g.check_ordinary(v, "ball center")
    g.check_ordinary(w, "pole")
    ball = g.ordinary_ball(v, r)
    fld = solve_potential(g, w)
    pi = fld.values
    if float(pi[ball].min()) <= 0.0:
        raise InternalError("potential vanishes on the ball")
    mass = float(pi[ball].sum())
    y = pi / mass
    deg = np.asarray(g.degree, dtype=float)
    adj = g.adjacency().astype(float)
    injected = float(deg[w] - (adj @ pi)[w])
    y_prime = injected / mass
    # feasibility: (A y)(u) - deg(u) y(u) >= 0 off the pole, plus y_prime at it
    slack = adj @ y - deg * y
    slack[w] += y_prime
    violations = [
        float(-slack.min()) if len(slack) else 0.0,
        abs(float(y[ball].sum()) - 1.0),
        float(-y.min()),
        -y_prime,
    ]
    max_violation = max(violations)
    if max_violation > tolerance:
        raise InternalError(
            f"dual certificate infeasible (violation {max_violation:.3e})"
        )
    objective = float(((deg - 1.0) * y).sum())
    cert = DualCertificate(
        pole=int(w),
        ball=tuple(int(x) for x in ball),
        y=y,
        y_prime=y_prime,
        objective=objective,
        max_violation=max_violation,
    )
    return cert, objective


def verify_laplacian_identity(g: SandpileGraph, result, counts) -> bool:
    """Exact integer recheck of final = initial - L^T score, plus conservation."""
    c0 = [int(c) for c in counts]
    score = [int(s) for s in result.score]
    stable = [int(s) for s in result.stable]
    if len(c0) != g.n_ordinary or len(score) != g.n_ordinary:
        return False
    inflow = [0] * g.n_ordinary
    for u, v, mult in g.edges:
        if v == g.sink:
            continue
        inflow[u] += mult * score[v]
        inflow[v] += mult * score[u]
    for v in range(g.n_ordinary):
        if stable[v] != c0[v] - int(g.degree[v]) * score[v] + inflow[v]:
            return False
    absorbed = sum(int(m) * s for m, s in zip(g.sink_mult, score))
    if absorbed != result.sink_absorbed:
        return False
    return sum(c0) == sum(stable) + absorbed

"""Optimal control as a second-order constrained variational problem.

The pipeline mirrors the reduction used for underactuated systems on a
trivial bundle M x G:

1. A :class:`ControlledSystem` carries the controlled Euler-Lagrange rows
   (M rows first, then algebra rows) plus adapted bases of actuated and
   unactuated covectors.
2. :func:`reduce_to_variational` contracts the rows against the dual basis:
   the actuated combinations become the control expressions ``F_a`` feeding
   the cost (giving the second-order Lagrangian ``Ltilde``) and the
   unactuated combinations become the second-order constraints ``Phi``.
3. :func:`discretize` applies the symmetric midpoint-style stencils,
   producing a :class:`~geovar.discrete.DiscreteLagrangian` of order 2 and
   a :class:`~geovar.discrete.DiscreteConstraintSet`.
4. :func:`full_residual` assembles interior stationarity, the terminal
   algebra closure and the constraint windows into one square system whose
   unknowns are laid out as ``[q_2..q_{N-2} | xi_1..xi_{N-2} | lambda^0..
   lambda^{N-2}]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import discrete, groups
from .discrete import (
    LEFT,
    RIGHT,
    DiscreteConstraintSet,
    DiscreteLagrangian,
    DiscretePath,
)
from .errors import IllPosedBasisError, SizeError

K_ORDER = 2  # the OCP reduction always yields a second-order problem


@dataclass
class BoundaryData:
    """Continuous boundary data for a second-order problem.

    ``q``/``dq`` are M-coordinates and velocities at t=0 and t=T; ``xi``
    are algebra velocities; ``g`` are group configurations.
    """

    q0: np.ndarray
    dq0: np.ndarray
    qT: np.ndarray
    dqT: np.ndarray
    xi0: np.ndarray
    xiT: np.ndarray
    g0: np.ndarray
    gT: np.ndarray
    # Optional algebra accelerations at the ends.  The first/last algebra
    # increments represent interval midpoints, so pinning them to the
    # endpoint values alone is only first-order consistent; supplying
    # d(xi)/dt at the ends upgrades the injection to second order.
    dxi0: Optional[np.ndarray] = None
    dxiT: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.dxi0 is None:
            self.dxi0 = np.zeros(3)
        if self.dxiT is None:
            self.dxiT = np.zeros(3)
        for name in ("q0", "dq0", "qT", "dqT", "xi0", "xiT", "g0", "gT",
                     "dxi0", "dxiT"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"boundary field {name} is not finite")
            setattr(self, name, arr)


@dataclass
class SecondOrderProblem:
    """Second-order variational problem with second-order constraints.

    ``ltilde(q, dq, ddq, xi, dxi, t)`` and ``phi(...)-> (B, m)`` are
    vectorized over evaluation points.
    """

    n: int
    group_tag: str
    m: int
    ltilde: Callable
    phi: Callable
    boundary: BoundaryData
    N: int
    h: float
    trivialization: str = LEFT
    # Optional analytic gradients w.r.t. (q, dq, ddq, xi, dxi):
    # d_ltilde(...) -> 5-tuple of (B, n)/(B, 3) arrays;
    # d_phi(...) -> 5-tuple with a leading constraint axis (B, m, .).
    d_ltilde: Optional[Callable] = None
    d_phi: Optional[Callable] = None

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("h must be positive")
        if self.N < 6:
            raise SizeError(f"need N >= 6, got {self.N}")

    @property
    def T(self):
        return self.N * self.h


# ---------------------------------------------------------------------------
# Controlled system -> second-order problem
# ---------------------------------------------------------------------------


@dataclass
class ControlledSystem:
    """Controlled underactuated system on TM x g.

    ``raw_residual(q, dq, ddq, xi, dxi, t) -> (B, n+3)`` are the rows of
    the controlled Euler-Lagrange operator in coordinates (M components
    first, then algebra components in group coordinate order).  When it is
    None the rows are produced from ``lagrangian`` by nested finite
    differences (:func:`controlled_rows_from_lagrangian`).

    The covector callbacks return stacked rows: ``actuated_covectors(q) ->
    (B, r, n+3)`` and ``unactuated_covectors(q) -> (B, m, n+3)``.  When
    ``direct_constraints`` is given it overrides the unactuated
    contraction (used for systems whose constraints are velocity-level
    rather than unactuated equation rows).
    """

    n: int
    group_tag: str
    r: int
    cost: Callable
    actuated_covectors: Callable
    unactuated_covectors: Optional[Callable] = None
    raw_residual: Optional[Callable] = None
    lagrangian: Optional[Callable] = None
    direct_constraints: Optional[Callable] = None

    @property
    def m(self):
        return self.n + 3 - self.r


def controlled_rows_from_lagrangian(L, q, dq, ddq, xi, dxi, group_tag,
                                    eps=1e-6):
    """Controlled Euler-Lagrange rows by nested central differences.

    ``L(q, dq, xi) -> (B,)`` is the reduced Lagrangian.  Returns the
    ``(B, n+3)`` rows ``[d/dt(dL/ddq) - dL/dq, d/dt(dL/dxi) - ad*_xi
    dL/dxi]``, with the total time derivative realized as a directional
    derivative along ``(dq, ddq, dxi)``.
    """
    n = q.shape[1]

    def grad(qq, dqq, xii):
        gq = np.empty_like(qq)
        gdq = np.empty_like(dqq)
        gxi = np.empty_like(xii)
        for c in range(n):
            e = np.zeros(n)
            e[c] = eps
            gq[:, c] = (L(qq + e, dqq, xii) - L(qq - e, dqq, xii)) / (2 * eps)
            gdq[:, c] = (L(qq, dqq + e, xii) - L(qq, dqq - e, xii)) / (2 * eps)
        for c in range(3):
            e = np.zeros(3)
            e[c] = eps
            gxi[:, c] = (L(qq, dqq, xii + e) - L(qq, dqq, xii - e)) / (2 * eps)
        return gq, gdq, gxi

    gq, gdq, gxi = grad(q, dq, xi)
    gq_p, gdq_p, gxi_p = grad(q + eps * dq, dq + eps * ddq, xi + eps * dxi)
    gq_m, gdq_m, gxi_m = grad(q - eps * dq, dq - eps * ddq, xi - eps * dxi)
    ddt_gdq = (gdq_p - gdq_m) / (2 * eps)
    ddt_gxi = (gxi_p - gxi_m) / (2 * eps)
    rows_M = ddt_gdq - gq
    ad_T = np.swapaxes(groups.ad_matrix(xi, group_tag), -1, -2)
    rows_alg = ddt_gxi - np.einsum("bij,bj->bi", ad_T, gxi)
    return np.concatenate([rows_M, rows_alg], axis=1)


def _dual_basis(sys, q):
    """Columns dual to the stacked covector basis rows; raises when rank deficient."""
    act = sys.actuated_covectors(q)
    if sys.unactuated_covectors is None:
        raise IllPosedBasisError("no unactuated covectors supplied")
    unact = sys.unactuated_covectors(q)
    Bmat = np.concatenate([act, unact], axis=1)
    d = sys.n + 3
    if Bmat.shape[1] != d:
        raise IllPosedBasisError(
            f"covector basis has {Bmat.shape[1]} rows, expected {d}"
        )
    cond = np.max(np.linalg.cond(Bmat))
    if not np.isfinite(cond) or cond > 1e12:
        raise IllPosedBasisError(
            f"covector basis rank deficient (condition {cond:.3e})"
        )
    return np.linalg.inv(Bmat)  # (B, d, d); column i is dual to row i


def reduce_to_variational(sys, boundary, N, h, trivialization=LEFT):
    """Build the second-order problem ``(Ltilde, Phi)`` from a controlled system."""

    def rows(q, dq, ddq, xi, dxi, t):
        if sys.raw_residual is not None:
            return sys.raw_residual(q, dq, ddq, xi, dxi, t)
        return controlled_rows_from_lagrangian(
            sys.lagrangian, q, dq, ddq, xi, dxi, sys.group_tag
        )

    def F(q, dq, ddq, xi, dxi, t):
        E = rows(q, dq, ddq, xi, dxi, t)
        V = _dual_basis(sys, q)
        return np.einsum("bc,bca->ba", E, V[:, :, : sys.r])

    def ltilde(q, dq, ddq, xi, dxi, t):
        return sys.cost(q, dq, xi, F(q, dq, ddq, xi, dxi, t))

    if sys.direct_constraints is not None:
        phi = sys.direct_constraints
    else:
        def phi(q, dq, ddq, xi, dxi, t):
            E = rows(q, dq, ddq, xi, dxi, t)
            V = _dual_basis(sys, q)
            return np.einsum("bc,bca->ba", E, V[:, :, sys.r :])

    return SecondOrderProblem(
        n=sys.n,
        group_tag=sys.group_tag,
        m=sys.m,
        ltilde=ltilde,
        phi=phi,
        boundary=boundary,
        N=N,
        h=h,
        trivialization=trivialization,
    )


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------


def stencil_point(qs, xis, h):
    """Symmetric window stencils: mean position, central first/second
    difference for M, midpoint and forward difference for the algebra."""
    q0, q1, q2 = qs
    x0, x1 = xis
    q = (q0 + q1 + q2) / 3.0
    dq = (q2 - q0) / (2.0 * h)
    ddq = (q2 - 2.0 * q1 + q0) / (h * h)
    xi = (x0 + x1) / 2.0
    dxi = (x1 - x0) / h
    return q, dq, ddq, xi, dxi


def discretize(prob):
    """Discrete Lagrangian (scaled by h) and constraint set on the stencils.

    Window ``w`` is evaluated at time ``t_w = (w+1) h`` (the center node).
    """
    h = prob.h

    def window_times(B):
        return (np.arange(B) + 1.0) * h

    def ld(qs, xis):
        q, dq, ddq, xi, dxi = stencil_point(qs, xis, h)
        return h * prob.ltilde(q, dq, ddq, xi, dxi, window_times(q.shape[0]))

    def phid(qs, xis):
        q, dq, ddq, xi, dxi = stencil_point(qs, xis, h)
        return prob.phi(q, dq, ddq, xi, dxi, window_times(q.shape[0]))

    def chain(gq, gdq, gddq, gxi, gdxi, scale):
        # slot derivatives of the stencil composition
        Dq = [
            scale * (gq / 3.0 - gdq / (2.0 * h) + gddq / (h * h)),
            scale * (gq / 3.0 - 2.0 * gddq / (h * h)),
            scale * (gq / 3.0 + gdq / (2.0 * h) + gddq / (h * h)),
        ]
        Dxi = [
            scale * (gxi / 2.0 - gdxi / h),
            scale * (gxi / 2.0 + gdxi / h),
        ]
        return Dq, Dxi

    d_ld = None
    d_phid = None
    if prob.d_ltilde is not None:
        def d_ld(qs, xis):
            q, dq, ddq, xi, dxi = stencil_point(qs, xis, h)
            grads = prob.d_ltilde(q, dq, ddq, xi, dxi, window_times(q.shape[0]))
            return chain(*grads, scale=h)

    if prob.d_phi is not None:
        def d_phid(qs, xis):
            q, dq, ddq, xi, dxi = stencil_point(qs, xis, h)
            grads = prob.d_phi(q, dq, ddq, xi, dxi, window_times(q.shape[0]))
            return chain(*grads, scale=1.0)

    Ld = DiscreteLagrangian(
        order=K_ORDER, eval=ld, group_invariant=True, d_eval=d_ld
    )
    Phi = DiscreteConstraintSet(m=prob.m, eval=phid, d_eval=d_phid)
    return Ld, Phi


# ---------------------------------------------------------------------------
# Unknown layout, counting, boundary injection
# ---------------------------------------------------------------------------


@dataclass
class Layout:
    """Strides of the flat unknown vector ``[q | xi | lambda]``."""

    N: int
    n: int
    m: int
    d: int = 3

    @property
    def q_size(self):
        return (self.N - 3) * self.n

    @property
    def xi_size(self):
        return (self.N - 2) * self.d

    @property
    def lam_size(self):
        return (self.N - 1) * self.m

    @property
    def total(self):
        return self.q_size + self.xi_size + self.lam_size

    @property
    def q_slice(self):
        return slice(0, self.q_size)

    @property
    def xi_slice(self):
        return slice(self.q_size, self.q_size + self.xi_size)

    @property
    def lam_slice(self):
        return slice(self.q_size + self.xi_size, self.total)


def unknown_count(N, n, m, d=3):
    return (N - 3) * n + d * (N - 2) + m * (N - 1)


def equation_count(N, n, m, d=3):
    return (N - 3) * n + d * (N - 3) + d + m * (N - 1)


def layout(prob):
    return Layout(N=prob.N, n=prob.n, m=prob.m)


def boundary_nodes(prob):
    """Fixed node values implied by the continuous boundary data.

    The first and last two M/G nodes are data; velocities pin the second
    and second-to-last nodes (``q_1 = q_0 + h dq_0`` etc.) and the boundary
    algebra increments are the boundary algebra velocities.
    """
    b = prob.boundary
    h = prob.h
    q_first = np.stack([b.q0, b.q0 + h * b.dq0])
    q_last = np.stack([b.qT - h * b.dqT, b.qT])
    # first/last increments live at the interval midpoints t = h/2, T - h/2
    xi_first = b.xi0 + 0.5 * h * b.dxi0
    xi_last = b.xiT - 0.5 * h * b.dxiT
    return q_first, q_last, xi_first, xi_last


def scatter(prob, x):
    """Flat unknown vector -> DiscretePath with boundary nodes injected."""
    lay = layout(prob)
    if x.shape != (lay.total,):
        raise SizeError(f"expected flat vector of length {lay.total}, got {x.shape}")
    N, n, m = prob.N, prob.n, prob.m
    q_first, q_last, xi_first, xi_last = boundary_nodes(prob)
    q_nodes = np.empty((N + 1, n))
    q_nodes[0:2] = q_first
    q_nodes[2 : N - 1] = x[lay.q_slice].reshape(N - 3, n)
    q_nodes[N - 1 : N + 1] = q_last
    xi_nodes = np.empty((N, 3))
    xi_nodes[0] = xi_first
    xi_nodes[1 : N - 1] = x[lay.xi_slice].reshape(N - 2, 3)
    xi_nodes[N - 1] = xi_last
    lam = x[lay.lam_slice].reshape(N - 1, m)
    return DiscretePath(
        q_nodes=q_nodes, xi_nodes=xi_nodes, h=prob.h, lambda_nodes=lam
    )


def assemble_unknowns(prob, path):
    """DiscretePath -> flat unknown vector (inverse of :func:`scatter`)."""
    N = prob.N
    return np.concatenate(
        [
            path.q_nodes[2 : N - 1].ravel(),
            path.xi_nodes[1 : N - 1].ravel(),
            path.lambda_nodes.ravel(),
        ]
    )


def initial_guess(prob, retr):
    """Standard warm start: linear M-interpolation, constant algebra
    velocity toward the terminal group point, zero multipliers."""
    b = prob.boundary
    N, n, m = prob.N, prob.n, prob.m
    frac = np.linspace(0.0, 1.0, N + 1)[:, None]
    q_nodes = (1 - frac) * b.q0[None, :] + frac * b.qT[None, :]
    if prob.trivialization == LEFT:
        rel = groups.inverse_matrix(b.g0, prob.group_tag) @ b.gT
    else:
        rel = b.gT @ groups.inverse_matrix(b.g0, prob.group_tag)
    xi_const = retr.tau_inv(rel) / (N * prob.h)
    xi_nodes = np.tile(xi_const, (N, 1))
    path = DiscretePath(
        q_nodes=q_nodes,
        xi_nodes=xi_nodes,
        h=prob.h,
        lambda_nodes=np.zeros((N - 1, m)),
    )
    return assemble_unknowns(prob, path)


# ---------------------------------------------------------------------------
# Full residual
# ---------------------------------------------------------------------------


def closure_residual(prob, xi_nodes, retr):
    """Terminal group boundary condition in algebra coordinates.

    Reconstructs ``g_N`` from ``g_0`` and the increments and returns
    ``tau^-1(g_N^-1 g(T))`` (mirrored for the right-trivialized case);
    zero iff the reconstructed terminal configuration matches ``g(T)``.
    """
    b = prob.boundary
    g_nodes = discrete.reconstruct(
        xi_nodes, b.g0, prob.h, retr, prob.trivialization
    )
    gN = g_nodes[-1]
    if prob.trivialization == LEFT:
        rel = groups.inverse_matrix(gN, prob.group_tag) @ b.gT
    else:
        rel = b.gT @ groups.inverse_matrix(gN, prob.group_tag)
    return retr.tau_inv(rel), g_nodes


def full_residual(prob, x, retr, Ld=None, Phi=None):
    """Square residual vector: [M-stationarity | G-stationarity | closure | constraints]."""
    if Ld is None or Phi is None:
        Ld, Phi = discretize(prob)
    path = scatter(prob, x)
    res_q, res_g, res_phi = discrete.dlp_k_residual(
        Ld, Phi, path, retr, prob.trivialization
    )
    closure, _ = closure_residual(prob, path.xi_nodes, retr)
    return np.concatenate(
        [res_q.ravel(), res_g.ravel(), closure, res_phi.ravel()]
    )


def make_residual_fn(prob, retr):
    """Closure capturing the discretized callbacks once."""
    Ld, Phi = discretize(prob)

    def fn(x):
        return full_residual(prob, x, retr, Ld, Phi)

    return fn


def refine_guess(prob_coarse, x_coarse, prob_fine):
    """Interpolate a coarse solution onto a finer grid as a warm start.

    Both problems must describe the same continuous data (same T = N h).
    Linear interpolation in node time for q, in interval-midpoint time for
    xi, and in window-center time for the multipliers.
    """
    path = scatter(prob_coarse, x_coarse)
    Nc, hc = prob_coarse.N, prob_coarse.h
    Nf, hf = prob_fine.N, prob_fine.h
    if abs(Nc * hc - Nf * hf) > 1e-12 * Nc * hc:
        raise SizeError("refine_guess requires matching horizons T = N h")
    tq_c = np.arange(Nc + 1) * hc
    tq_f = np.arange(Nf + 1) * hf
    q_nodes = np.stack(
        [np.interp(tq_f, tq_c, path.q_nodes[:, c]) for c in range(prob_coarse.n)],
        axis=1,
    )
    tx_c = (np.arange(Nc) + 0.5) * hc
    tx_f = (np.arange(Nf) + 0.5) * hf
    xi_nodes = np.stack(
        [np.interp(tx_f, tx_c, path.xi_nodes[:, c]) for c in range(3)], axis=1
    )
    tl_c = (np.arange(Nc - 1) + 1.0) * hc
    tl_f = (np.arange(Nf - 1) + 1.0) * hf
    lam = np.stack(
        [
            np.interp(tl_f, tl_c, path.lambda_nodes[:, c]) * (hf / hc)
            for c in range(prob_coarse.m)
        ],
        axis=1,
    )
    fine = DiscretePath(q_nodes=q_nodes, xi_nodes=xi_nodes, h=hf, lambda_nodes=lam)
    return assemble_unknowns(prob_fine, fine)


def solution_path(prob, x, retr):
    """Scatter a converged vector and attach reconstructed group nodes."""
    path = scatter(prob, x)
    _, g_nodes = closure_residual(prob, path.xi_nodes, retr)
    path.g_nodes = g_nodes
    return path

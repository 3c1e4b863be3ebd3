"""Residual assembly for discrete variational equations on M x G.

The central objects are discrete Lagrangians ``L_d`` of order ``k`` defined
on ``(k+1)`` copies of ``M x G``.  With the group increments encoded by a
retraction (``xi_i = tau^-1(g_i^-1 g_{i+1}) / h`` in the left-trivialized
convention), the discrete action is a function of M-nodes ``q_i``, algebra
nodes ``xi_i`` and (for constrained problems) multipliers ``lambda^w`` per
window.  Every residual assembled here is *exactly* the gradient of that
action under coordinate variations of interior ``q_i`` and trivialized
group variations at interior ``g_i``; the finite-difference gradient of the
action is the correctness oracle throughout the test suite.

Stationarity rows exist for nodes ``i = k .. N-k``; constraint rows for
windows ``i = 0 .. N-k``.  Boundary nodes (the first and last ``k`` of the
``q``/``g`` sequences, hence the first and last algebra nodes) are data.

Evaluation callbacks are vectorized over windows: ``eval(qs, xis)`` with
``qs`` a tuple of ``k+1`` arrays of shape ``(B, n)`` and ``xis`` a tuple of
``k`` arrays of shape ``(B, d)`` returns shape ``(B,)`` (or ``(B, m)`` for
constraint sets).  Non-invariant Lagrangians additionally receive the
window base points as a ``(B, 3, 3)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import groups
from .errors import SizeError, DomainError

FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)

LEFT = "left"
RIGHT = "right"


@dataclass
class DiscreteLagrangian:
    """Discrete Lagrangian of order ``k`` on ``(k+1)(M x G)``.

    Parameters
    ----------
    order : int
        Stencil order ``k`` (number of algebra slots per window).
    eval : callable
        ``eval(qs, xis)`` (or ``eval(qs, xis, gs)`` when not invariant),
        vectorized over windows; returns shape ``(B,)``.
    group_invariant : bool
        True when the value does not depend on the window base point in G.
    d_eval : callable, optional
        Analytic derivatives ``d_eval(qs, xis) -> (Dq_list, Dxi_list)``
        with the same shapes the finite-difference path produces.
    """

    order: int
    eval: Callable
    group_invariant: bool = True
    d_eval: Optional[Callable] = None


@dataclass
class DiscreteConstraintSet:
    """Vector of ``m`` discrete constraints with the same call signature.

    ``d_eval(qs, xis) -> (Dq_list, Dxi_list)`` optionally supplies analytic
    slot derivatives with a leading constraint axis: ``Dq_list[j]`` has
    shape ``(B, m, n)`` and ``Dxi_list[j]`` shape ``(B, m, d)``.
    """

    m: int
    eval: Callable
    d_eval: Optional[Callable] = None


@dataclass
class DiscretePath:
    """Node data for a discrete trajectory.

    ``q_nodes``: (N+1, n); ``xi_nodes``: (N, d); ``lambda_nodes``:
    (N-k+1, m) or None; ``g_nodes``: (N+1, 3, 3) or None; ``h``: step size.
    """

    q_nodes: np.ndarray
    xi_nodes: np.ndarray
    h: float
    lambda_nodes: Optional[np.ndarray] = None
    g_nodes: Optional[np.ndarray] = None

    @property
    def N(self):
        return self.q_nodes.shape[0] - 1


# ---------------------------------------------------------------------------
# Finite differences on window slots
# ---------------------------------------------------------------------------


def slot_derivative(f, arrays, slot):
    """Central-difference derivative of a batched function w.r.t. one slot.

    Parameters
    ----------
    f : callable
        Takes the full list of slot arrays, returns shape ``(B,)``.
    arrays : list of ndarray
        Slot arrays; ``arrays[slot]`` has shape ``(B, n)``.
    slot : int

    Returns
    -------
    ndarray, shape (B, n)
    """
    base = arrays[slot]
    B, n = base.shape
    out = np.empty((B, n))
    for c in range(n):
        step = FD_STEP * np.maximum(1.0, np.abs(base[:, c]))
        hi = list(arrays)
        lo = list(arrays)
        pert = base.copy()
        pert[:, c] = base[:, c] + step
        hi[slot] = pert
        pert = base.copy()
        pert[:, c] = base[:, c] - step
        lo[slot] = pert
        out[:, c] = (f(hi) - f(lo)) / (2.0 * step)
    return out


def _window_views(q_nodes, xi_nodes, k):
    N = q_nodes.shape[0] - 1
    B = N - k + 1
    qs = [q_nodes[j : j + B] for j in range(k + 1)]
    xis = [xi_nodes[j : j + B] for j in range(k)]
    return qs, xis, B


def _augmented_eval(Ld, Phi, lambdas, gs=None):
    """Build f(slot_arrays) -> (B,) evaluating L_d + lambda . Phi_d."""
    k = Ld.order

    def f(arrays):
        qs = tuple(arrays[: k + 1])
        xis = tuple(arrays[k + 1 :])
        if Ld.group_invariant:
            val = Ld.eval(qs, xis)
        else:
            val = Ld.eval(qs, xis, gs)
        if Phi is not None:
            val = val + np.einsum("bm,bm->b", lambdas, Phi.eval(qs, xis))
        return val

    return f


def _slot_gradients(Ld, Phi, lambdas, q_nodes, xi_nodes, gs=None):
    """Per-slot derivatives of the augmented window value.

    Returns
    -------
    Dq : list of k+1 arrays (B, n)
    Dxi : list of k arrays (B, d)
    """
    k = Ld.order
    qs, xis, _ = _window_views(q_nodes, xi_nodes, k)
    if Ld.d_eval is not None and (Phi is None or Phi.d_eval is not None):
        Dq, Dxi = Ld.d_eval(tuple(qs), tuple(xis))
        if Phi is not None:
            PDq, PDxi = Phi.d_eval(tuple(qs), tuple(xis))
            Dq = [
                Dq[j] + np.einsum("bm,bmn->bn", lambdas, PDq[j])
                for j in range(k + 1)
            ]
            Dxi = [
                Dxi[j] + np.einsum("bm,bmn->bn", lambdas, PDxi[j])
                for j in range(k)
            ]
        return Dq, Dxi
    arrays = list(qs) + list(xis)
    f = _augmented_eval(Ld, Phi, lambdas, gs)
    Dq = [slot_derivative(f, arrays, j) for j in range(k + 1)]
    Dxi = [slot_derivative(f, arrays, k + 1 + j) for j in range(k)]
    return Dq, Dxi


def xi_slot_totals(Dxi, N, k):
    """Accumulate window-slot derivatives into per-node totals S_m.

    ``S[m]`` is the derivative of the action with respect to algebra node
    ``xi_m`` (each node appears in up to ``k`` windows).
    """
    d = Dxi[0].shape[1]
    B = Dxi[0].shape[0]
    S = np.zeros((N, d))
    for j in range(k):
        S[j : j + B] += Dxi[j]
    return S


def group_chain_residual(S, xi_nodes, h, retr, trivialization, lo, hi):
    """Group-part stationarity rows for nodes ``i = lo .. hi`` (inclusive).

    Implements the transported-momentum balance

    left:   (1/h) [ Ad*_{W_{i-1}} (dtau^-1_{h xi_{i-1}})* S_{i-1}
                    - (dtau^-1_{h xi_i})* S_i ]
    right:  (1/h) [ (dtau^-1_{h xi_{i-1}})* S_{i-1}
                    - Ad*_{W_i} (dtau^-1_{h xi_i})* S_i ]

    with ``W_m = tau(h xi_m)``; equal to the gradient of the action under
    trivialized variations at node i.
    """
    tag = retr.group_tag
    hxi = h * xi_nodes
    Dinv_T_S = np.einsum("mji,mj->mi", retr.dtau_inv_matrix(hxi), S)
    AdW = groups.Ad_matrix(retr.tau(hxi), tag)
    if trivialization == LEFT:
        carried = np.einsum("mji,mj->mi", AdW, Dinv_T_S)
        res = (carried[lo - 1 : hi] - Dinv_T_S[lo : hi + 1]) / h
    elif trivialization == RIGHT:
        carried = np.einsum("mji,mj->mi", AdW, Dinv_T_S)
        res = (Dinv_T_S[lo - 1 : hi] - carried[lo : hi + 1]) / h
    else:
        raise ValueError(f"unknown trivialization {trivialization!r}")
    return res


def _base_point_gradient(Ld, Phi, lambdas, q_nodes, xi_nodes, g_nodes, retr,
                         trivialization, eps=1e-6):
    """Left/right-trivialized derivative of the window value w.r.t. its base point."""
    k = Ld.order
    qs, xis, B = _window_views(q_nodes, xi_nodes, k)
    gs = g_nodes[:B]
    out = np.zeros((B, 3))
    for j in range(3):
        ej = np.zeros(3)
        ej[j] = 1.0
        step_p = retr.tau(eps * ej)
        step_m = retr.tau(-eps * ej)
        if trivialization == LEFT:
            gp, gm = gs @ step_p, gs @ step_m
        else:
            gp, gm = step_p @ gs, step_m @ gs
        fp = _augmented_eval(Ld, Phi, lambdas, gp)(list(qs) + list(xis))
        fm = _augmented_eval(Ld, Phi, lambdas, gm)(list(qs) + list(xis))
        out[:, j] = (fp - fm) / (2.0 * eps)
    return out


# ---------------------------------------------------------------------------
# Residual assemblers
# ---------------------------------------------------------------------------


def dlp_k_residual(Ld, Phi, path, retr, trivialization=LEFT):
    """Discrete k-th order Lagrange-Poincare residual with constraints.

    Returns
    -------
    res_q : (N-2k+1, n)   stationarity in M, nodes i = k..N-k
    res_g : (N-2k+1, d)   stationarity in the group, same nodes
    res_phi : (N-k+1, m)  constraint values per window (empty if Phi is None)
    """
    k = Ld.order
    N = path.N
    if N <= 2 * k:
        raise SizeError(f"need N > 2k, got N={N}, k={k}")
    lambdas = path.lambda_nodes
    if Phi is not None:
        if lambdas is None or lambdas.shape != (N - k + 1, Phi.m):
            got = None if lambdas is None else lambdas.shape
            raise SizeError(
                f"lambda_nodes must have shape {(N - k + 1, Phi.m)}, got {got}"
            )
    gs = None
    if not Ld.group_invariant:
        if path.g_nodes is None:
            raise SizeError("non-invariant Lagrangian requires g_nodes on the path")
        gs = path.g_nodes[: N - k + 1]
    Dq, Dxi = _slot_gradients(Ld, Phi, lambdas, path.q_nodes, path.xi_nodes, gs)

    n = path.q_nodes.shape[1]
    rows = N - 2 * k + 1
    res_q = np.zeros((rows, n))
    for j in range(k + 1):
        res_q += Dq[j][k - j : N - k - j + 1]

    S = xi_slot_totals(Dxi, N, k)
    res_g = group_chain_residual(
        S, path.xi_nodes, path.h, retr, trivialization, k, N - k
    )
    if not Ld.group_invariant:
        base = _base_point_gradient(
            Ld, Phi, lambdas, path.q_nodes, path.xi_nodes, path.g_nodes,
            retr, trivialization,
        )
        res_g = res_g + base[k : N - k + 1]

    if Phi is not None:
        qs, xis, _ = _window_views(path.q_nodes, path.xi_nodes, k)
        res_phi = Phi.eval(tuple(qs), tuple(xis))
    else:
        res_phi = np.zeros((N - k + 1, 0))
    return res_q, res_g, res_phi


def dlp2_residual(Ld, path, retr, trivialization=LEFT):
    """Second-order (k=2) residual, written out as the three-term stencil.

    Direct transcription of the second-order stationarity conditions::

        0 = D1 L_d(q_i, q_{i+1}, q_{i+2}) + D2 L_d(q_{i-1}, q_i, q_{i+1})
            + D3 L_d(q_{i-2}, q_{i-1}, q_i)

    together with the transported group-momentum balance built from
    ``S_m = D4 L_d(window m) + D5 L_d(window m-1)`` (the two algebra slots).
    Kept separate from :func:`dlp_k_residual` as an independent code path;
    the two must agree exactly.
    """
    if Ld.order != 2:
        raise SizeError(f"dlp2_residual requires order 2, got {Ld.order}")
    N = path.N
    if N < 5:
        raise SizeError(f"need N >= 5, got N={N}")
    Dq, Dxi = _slot_gradients(Ld, None, None, path.q_nodes, path.xi_nodes)
    # nodes i = 2..N-2
    res_q = Dq[0][2 : N - 1]
    res_q = res_q + Dq[1][1 : N - 2]
    res_q = res_q + Dq[2][0 : N - 3]

    S = np.zeros((N, path.xi_nodes.shape[1]))
    S[0 : N - 1] += Dxi[0]
    S[1:N] += Dxi[1]
    res_g = group_chain_residual(S, path.xi_nodes, path.h, retr, trivialization, 2, N - 2)
    return res_q, res_g


def dep_residual(lhat_grad, xi_nodes, h, retr, trivialization=LEFT):
    """First-order discrete Euler-Poincare residual on a Lie group.

    Parameters
    ----------
    lhat_grad : callable
        Gradient of the reduced discrete Lagrangian with respect to the
        algebra node: ``lhat_grad(xi) -> (B, d)`` for ``xi`` of shape (B, d).
    xi_nodes : (N, d)
        Algebra increments ``xi_m = tau^-1(g_m^-1 g_{m+1}) / h``.

    Returns
    -------
    (N-1, d) residual rows for nodes i = 1..N-1.
    """
    N = xi_nodes.shape[0]
    if N < 2:
        raise SizeError("need at least two group increments")
    S = lhat_grad(xi_nodes)
    return group_chain_residual(S, xi_nodes, h, retr, trivialization, 1, N - 1)


def del_residual_first_order(Ld, q_nodes):
    """Discrete Euler-Lagrange residual on M only (order-1 Lagrangian).

    ``Ld.eval((q0s, q1s), ())`` is vectorized over adjacent pairs; residual
    rows are ``D1 L_d(q_i, q_{i+1}) + D2 L_d(q_{i-1}, q_i)`` for i=1..N-1.
    """
    N = q_nodes.shape[0] - 1
    if N < 2:
        raise SizeError("need at least three nodes")
    B = N
    arrays = [q_nodes[0:B], q_nodes[1 : B + 1]]

    def f(arrs):
        return Ld.eval((arrs[0], arrs[1]), ())

    D1 = slot_derivative(f, arrays, 0)
    D2 = slot_derivative(f, arrays, 1)
    return D1[1:N] + D2[0 : N - 1]


# ---------------------------------------------------------------------------
# Discrete momentum maps
# ---------------------------------------------------------------------------


def discrete_momentum(Ld_eval, pair, xi, side, retr, eps=1e-6):
    """Discrete momentum pairing J_d+/- for a first-order Lagrangian on M x G.

    The group acts by left multiplication on the G factor and trivially on
    the M factor.  ``pair = ((q0, g0), (q1, g1))`` with ``q`` possibly None.

    J+ pairs the second-slot derivative with the generator at the second
    point; J- pairs minus the first-slot derivative with the generator at
    the first point.  For invariant Lagrangians the two coincide.
    """
    (q0, g0), (q1, g1) = pair
    flow_p = retr.tau(eps * xi)
    flow_m = retr.tau(-eps * xi)
    if side == "plus":
        val = (
            Ld_eval((q0, g0), (q1, flow_p @ g1))
            - Ld_eval((q0, g0), (q1, flow_m @ g1))
        ) / (2.0 * eps)
    elif side == "minus":
        val = -(
            Ld_eval((q0, flow_p @ g0), (q1, g1))
            - Ld_eval((q0, flow_m @ g0), (q1, g1))
        ) / (2.0 * eps)
    else:
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")
    if not np.isfinite(val):
        raise DomainError("non-finite momentum pairing")
    return float(val)


# ---------------------------------------------------------------------------
# Discrete Euler-Poincare stepping (used by the free rigid body)
# ---------------------------------------------------------------------------


def dep_step(lhat_grad, xi_prev, h, retr, trivialization=LEFT,
             tol=1e-13, max_iter=50, return_iterations=False):
    """Advance one step of the discrete Euler-Poincare equations.

    Solves the transported momentum balance for the next algebra node given
    the previous one, via a small Newton iteration with finite-difference
    Jacobian.
    """
    d = xi_prev.shape[0]

    def res(xi_next):
        pair = np.stack([xi_prev, xi_next])
        r = dep_residual(lhat_grad, pair, h, retr, trivialization)
        return r[0]

    x = xi_prev.copy()
    iters = max_iter
    for it in range(max_iter):
        r = res(x)
        if np.abs(r).max() < tol:
            iters = it
            break
        J = np.empty((d, d))
        for j in range(d):
            dx = np.zeros(d)
            dx[j] = 1e-7 * max(1.0, abs(x[j]))
            J[:, j] = (res(x + dx) - res(x - dx)) / (2.0 * dx[j])
        x = x - np.linalg.solve(J, r)
    if return_iterations:
        return x, iters
    return x


def dep_solve_path(lhat_grad, xi0, N, h, retr, trivialization=LEFT,
                   return_iterations=False):
    """Generate N algebra nodes of the discrete Euler-Poincare flow from xi0."""
    out = np.empty((N, xi0.shape[0]))
    out[0] = xi0
    iters = []
    for kk in range(1, N):
        out[kk], it = dep_step(
            lhat_grad, out[kk - 1], h, retr, trivialization,
            return_iterations=True,
        )
        iters.append(it)
    if return_iterations:
        return out, iters
    return out


def reconstruct(xi_nodes, g0, h, retr, trivialization=LEFT):
    """Recover group nodes from algebra increments.

    left:  ``g_{k+1} = g_k tau(h xi_k)``; right: ``g_{k+1} = tau(h xi_k) g_k``.
    SO(3) nodes are re-projected onto the group when orthogonality drift
    exceeds the trigger.
    """
    N = xi_nodes.shape[0]
    out = np.empty((N + 1, 3, 3))
    out[0] = g0
    steps = retr.tau(h * xi_nodes)
    for kk in range(N):
        if trivialization == LEFT:
            g = out[kk] @ steps[kk]
        else:
            g = steps[kk] @ out[kk]
        out[kk + 1] = groups.renormalize(g, retr.group_tag)
    return out

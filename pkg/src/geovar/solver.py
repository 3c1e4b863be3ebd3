"""Damped Newton root finder with dense finite-difference Jacobian."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import DomainError, SingularSystemError

FD_STEP = float(np.finfo(float).eps) ** 0.5

_ARMIJO_SLOPE = 1e-4
_BACKTRACK = 0.5
_MIN_STEP = 2.0 ** -20
_COND_LIMIT = 1e14


@dataclass
class SolverConfig:
    """Newton iteration settings.

    ``jacobian_mode`` selects between the built-in central-difference
    Jacobian and a caller-supplied ``jacobian_fn``.
    """

    tol_residual: float = 1e-10
    max_iters: int = 200
    fd_step: float = FD_STEP
    jacobian_mode: str = "finite_difference"
    jacobian_fn: Optional[Callable] = None
    # "lu": dense LU, errors on singular systems.  "pseudoinverse":
    # minimal-norm SVD step for consistent systems with a multiplier gauge
    # freedom (e.g. a conservation-law constraint whose windows telescope).
    linear_solver: str = "lu"

    def __post_init__(self):
        if self.tol_residual <= 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.jacobian_mode not in ("finite_difference", "model_supplied"):
            raise ValueError(f"unknown jacobian_mode {self.jacobian_mode!r}")
        if self.jacobian_mode == "model_supplied" and self.jacobian_fn is None:
            raise ValueError("model_supplied mode requires jacobian_fn")
        if self.linear_solver not in ("lu", "pseudoinverse"):
            raise ValueError(f"unknown linear_solver {self.linear_solver!r}")


@dataclass
class SolveResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual_history: List[float] = field(default_factory=list)
    message: str = ""


def fd_jacobian(residual_fn, x, step=FD_STEP):
    """Dense central-difference Jacobian; column j uses ``step * max(1, |x_j|)``."""
    x = np.asarray(x, dtype=float)
    r0 = np.asarray(residual_fn(x))
    J = np.empty((r0.size, x.size))
    for j in range(x.size):
        hj = step * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += hj
        xm[j] -= hj
        J[:, j] = (np.asarray(residual_fn(xp)) - np.asarray(residual_fn(xm))) / (2.0 * hj)
    if not np.all(np.isfinite(J)):
        bad = np.argwhere(~np.isfinite(J))[0]
        raise DomainError(f"non-finite Jacobian entry at {tuple(bad)}")
    return J


def solve(residual_fn, x0, cfg=None):
    """Damped Newton iteration on a square nonlinear system.

    Backtracks with an Armijo condition on ``0.5 ||r||^2``; accepted steps
    never increase the residual 2-norm.  Deterministic for identical inputs.
    """
    if cfg is None:
        cfg = SolverConfig()
    x = np.array(x0, dtype=float)
    r = np.asarray(residual_fn(x))
    if r.size != x.size:
        raise ValueError(
            f"system is not square: {r.size} equations, {x.size} unknowns"
        )
    _check_finite(r)
    history = [float(np.abs(r).max())]
    for it in range(cfg.max_iters):
        if history[-1] <= cfg.tol_residual:
            return SolveResult(x, True, it, history, "converged")
        if cfg.jacobian_mode == "model_supplied":
            J = np.asarray(cfg.jacobian_fn(x))
        else:
            J = fd_jacobian(residual_fn, x, cfg.fd_step)
        if cfg.linear_solver == "pseudoinverse":
            dx = np.linalg.lstsq(J, -r, rcond=1e-12)[0]
        else:
            cond = np.linalg.cond(J)
            if not np.isfinite(cond) or cond > _COND_LIMIT:
                raise SingularSystemError(it, cond)
            dx = np.linalg.solve(J, -r)
        # Armijo backtracking on f = 0.5 ||r||^2 with slope f'(0) = -2 f
        f0 = 0.5 * float(r @ r)
        t = 1.0
        while t >= _MIN_STEP:
            x_trial = x + t * dx
            r_trial = np.asarray(residual_fn(x_trial))
            if np.all(np.isfinite(r_trial)):
                f_trial = 0.5 * float(r_trial @ r_trial)
                if f_trial <= f0 - _ARMIJO_SLOPE * t * 2.0 * f0:
                    break
            t *= _BACKTRACK
        else:
            return SolveResult(
                x, False, it, history,
                "line search stalled (step below 2^-20)",
            )
        x = x_trial
        r = r_trial
        history.append(float(np.abs(r).max()))
    converged = history[-1] <= cfg.tol_residual
    msg = "converged" if converged else "max iterations reached"
    return SolveResult(x, converged, cfg.max_iters, history, msg)


def _check_finite(r):
    if not np.all(np.isfinite(r)):
        idx = int(np.argwhere(~np.isfinite(np.asarray(r)))[0][0])
        raise DomainError(f"non-finite residual entry at index {idx}")

"""Matrix kernels for SE(2) and SO(3).

Both groups are represented by dense 3x3 matrices: SO(3) as orthogonal
matrices with unit determinant, SE(2) as homogeneous matrices with a 2x2
rotation block, a translation column and bottom row (0, 0, 1).

Algebra coordinate order
------------------------
se(2) coordinates are ``v = (v1, v2, v3)`` with ``v1`` the *rotation* rate
and ``(v2, v3)`` the translation rates::

    hat(v) = [[0, -v1, v2],
              [v1,  0, v3],
              [0,   0,  0]]

Note this differs from the common ``(x, y, theta)`` ordering.  so(3) uses
the standard ``omega = (w1, w2, w3)`` with ``hat(omega) x = omega x x``.

All low-level functions accept stacked inputs: vectors of shape ``(..., 3)``
and matrices of shape ``(..., 3, 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlgebraShapeError,
    GroupInvariantError,
    TagMismatchError,
)

SE2 = "SE2"
SO3 = "SO3"

_ORTHO_TOL = 1e-10
_POLAR_TRIGGER = 1e-9


def _check_tag(tag):
    if tag not in (SE2, SO3):
        raise TagMismatchError(f"unknown group tag {tag!r}")


def hat(v, tag):
    """Map algebra coordinates to matrix form.

    Parameters
    ----------
    v : array, shape (..., 3)
    tag : {"SE2", "SO3"}

    Returns
    -------
    array, shape (..., 3, 3)
    """
    _check_tag(tag)
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 3:
        raise AlgebraShapeError(f"expected trailing dimension 3, got {v.shape}")
    X = np.zeros(v.shape[:-1] + (3, 3))
    if tag == SO3:
        X[..., 0, 1] = -v[..., 2]
        X[..., 0, 2] = v[..., 1]
        X[..., 1, 0] = v[..., 2]
        X[..., 1, 2] = -v[..., 0]
        X[..., 2, 0] = -v[..., 1]
        X[..., 2, 1] = v[..., 0]
    else:
        X[..., 0, 1] = -v[..., 0]
        X[..., 0, 2] = v[..., 1]
        X[..., 1, 0] = v[..., 0]
        X[..., 1, 2] = v[..., 2]
    return X


def vee(X, tag, tol=_ORTHO_TOL):
    """Inverse of :func:`hat`; rejects matrices outside the algebra image."""
    _check_tag(tag)
    X = np.asarray(X, dtype=float)
    if X.shape[-2:] != (3, 3):
        raise AlgebraShapeError(f"expected trailing shape (3, 3), got {X.shape}")
    v = np.empty(X.shape[:-2] + (3,))
    if tag == SO3:
        defect = np.abs(X + np.swapaxes(X, -1, -2)).max()
        if defect > tol:
            raise AlgebraShapeError(
                f"matrix not antisymmetric (defect {defect:.3e})"
            )
        v[..., 0] = X[..., 2, 1]
        v[..., 1] = X[..., 0, 2]
        v[..., 2] = X[..., 1, 0]
    else:
        defect = max(
            np.abs(X[..., 2, :]).max(),
            np.abs(X[..., 0, 0]).max(),
            np.abs(X[..., 1, 1]).max(),
            np.abs(X[..., 0, 1] + X[..., 1, 0]).max(),
        )
        if defect > tol:
            raise AlgebraShapeError(
                f"matrix not in the se(2) image of hat (defect {defect:.3e})"
            )
        v[..., 0] = X[..., 1, 0]
        v[..., 1] = X[..., 0, 2]
        v[..., 2] = X[..., 1, 2]
    return v


def identity(tag):
    _check_tag(tag)
    return np.eye(3)


def check_matrix(g, tag, tol=_ORTHO_TOL):
    """Raise :class:`GroupInvariantError` if g violates the group invariants."""
    _check_tag(tag)
    g = np.asarray(g, dtype=float)
    if g.shape[-2:] != (3, 3):
        raise GroupInvariantError(f"expected trailing shape (3, 3), got {g.shape}")
    if tag == SO3:
        defect = np.abs(
            np.swapaxes(g, -1, -2) @ g - np.eye(3)
        ).max()
        if defect > tol:
            raise GroupInvariantError(
                f"SO(3) matrix not orthogonal (defect {defect:.3e})"
            )
        if np.abs(np.linalg.det(g) - 1.0).max() > tol:
            raise GroupInvariantError("SO(3) matrix has determinant != +1")
    else:
        if np.abs(g[..., 2, :] - np.array([0.0, 0.0, 1.0])).max() > 0.0:
            raise GroupInvariantError("SE(2) bottom row must be exactly (0, 0, 1)")
        R = g[..., :2, :2]
        defect = np.abs(
            np.swapaxes(R, -1, -2) @ R - np.eye(2)
        ).max()
        if defect > tol:
            raise GroupInvariantError(
                f"SE(2) rotation block not orthogonal (defect {defect:.3e})"
            )
        if np.abs(np.linalg.det(R) - 1.0).max() > tol:
            raise GroupInvariantError("SE(2) rotation block has determinant != +1")


def inverse_matrix(g, tag):
    """Group inverse in closed form (transpose-based; no linear solves)."""
    _check_tag(tag)
    g = np.asarray(g, dtype=float)
    if tag == SO3:
        return np.swapaxes(g, -1, -2).copy()
    out = np.zeros_like(g)
    Rt = np.swapaxes(g[..., :2, :2], -1, -2)
    out[..., :2, :2] = Rt
    out[..., :2, 2] = -np.einsum("...ij,...j->...i", Rt, g[..., :2, 2])
    out[..., 2, 2] = 1.0
    return out


def ad_matrix(v, tag):
    """Matrix of ad_v acting on algebra coordinates."""
    _check_tag(tag)
    v = np.asarray(v, dtype=float)
    if tag == SO3:
        return hat(v, SO3)
    A = np.zeros(v.shape[:-1] + (3, 3))
    A[..., 1, 0] = v[..., 2]
    A[..., 1, 2] = -v[..., 0]
    A[..., 2, 0] = -v[..., 1]
    A[..., 2, 1] = v[..., 0]
    return A


def Ad_matrix(g, tag):
    """Matrix of Ad_g acting on algebra coordinates: Ad_g eta = vee(g hat(eta) g^-1)."""
    _check_tag(tag)
    g = np.asarray(g, dtype=float)
    if tag == SO3:
        return g.copy()
    A = np.zeros_like(g)
    A[..., 0, 0] = 1.0
    A[..., 1, 0] = g[..., 1, 2]
    A[..., 2, 0] = -g[..., 0, 2]
    A[..., 1:, 1:] = g[..., :2, :2]
    return A


def so3_polar_project(g):
    """Closest rotation matrix (polar factor), used to curb orthogonality drift."""
    U, _, Vt = np.linalg.svd(g)
    R = U @ Vt
    # enforce det +1 by flipping the smallest singular direction if needed
    det = np.linalg.det(R)
    if R.ndim == 2:
        if det < 0:
            U[:, -1] *= -1.0
            R = U @ Vt
    else:
        flip = det < 0
        if np.any(flip):
            U[flip, :, -1] *= -1.0
            R = U @ Vt
    return R


def orthogonality_defect(g, tag):
    """Max deviation of the rotation part from orthogonality."""
    g = np.asarray(g, dtype=float)
    if tag == SO3:
        return np.abs(np.swapaxes(g, -1, -2) @ g - np.eye(3)).max()
    R = g[..., :2, :2]
    return np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(2)).max()


def renormalize(g, tag, trigger=_POLAR_TRIGGER):
    """Re-project onto the group when drift exceeds the trigger (SO(3) only)."""
    if tag == SO3 and orthogonality_defect(g, tag) > trigger:
        return so3_polar_project(g)
    return g


# ---------------------------------------------------------------------------
# Value types.  These wrap single (unbatched) elements with validation; the
# residual assemblers work on raw stacked arrays via the functions above.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupElement:
    """A validated group element (single 3x3 matrix)."""

    matrix: np.ndarray
    group_tag: str

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise GroupInvariantError(f"expected 3x3 matrix, got {m.shape}")
        check_matrix(m, self.group_tag)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class AlgebraVector:
    """Algebra coordinates (length-3 vector) tagged with the group."""

    coords: np.ndarray
    group_tag: str

    def __post_init__(self):
        _check_tag(self.group_tag)
        c = np.array(self.coords, dtype=float)
        if c.shape != (3,):
            raise AlgebraShapeError(f"expected shape (3,), got {c.shape}")
        object.__setattr__(self, "coords", c)


@dataclass(frozen=True)
class AlgebraCovector:
    """Covector coordinates in the dual basis, tagged with the group."""

    coords: np.ndarray
    group_tag: str

    def __post_init__(self):
        _check_tag(self.group_tag)
        c = np.array(self.coords, dtype=float)
        if c.shape != (3,):
            raise AlgebraShapeError(f"expected shape (3,), got {c.shape}")
        object.__setattr__(self, "coords", c)

    def pair(self, v: AlgebraVector) -> float:
        if self.group_tag != v.group_tag:
            raise TagMismatchError(f"{self.group_tag} vs {v.group_tag}")
        return float(self.coords @ v.coords)


def _same_tag(a, b):
    if a.group_tag != b.group_tag:
        raise TagMismatchError(f"{a.group_tag} vs {b.group_tag}")
    return a.group_tag


def compose(a: GroupElement, b: GroupElement) -> GroupElement:
    tag = _same_tag(a, b)
    return GroupElement(a.matrix @ b.matrix, tag)


def inverse(g: GroupElement) -> GroupElement:
    return GroupElement(inverse_matrix(g.matrix, g.group_tag), g.group_tag)


def ad_star(xi: AlgebraVector, mu: AlgebraCovector) -> AlgebraCovector:
    """Coadjoint action of the algebra: transpose of the ad matrix."""
    tag = _same_tag(xi, mu)
    return AlgebraCovector(ad_matrix(xi.coords, tag).T @ mu.coords, tag)


def Ad_star(g: GroupElement, mu: AlgebraCovector) -> AlgebraCovector:
    """Coadjoint action of the group: transpose of the Ad matrix."""
    tag = _same_tag(g, mu)
    return AlgebraCovector(Ad_matrix(g.matrix, tag).T @ mu.coords, tag)


def ell_star(g: GroupElement, alpha: AlgebraCovector) -> AlgebraCovector:
    """Pullback of a covector under left translation by g.

    Covectors at a group point are carried in left-trivialized coordinates
    (``<alpha, eta> = d/de F(x tau(e eta))`` at ``e = 0``).  In those
    coordinates left translation acts trivially on the fibre, so the
    pullback is the identity on coordinates.  Residual assembly therefore
    expresses all transports through Ad* and the retraction tangents.
    """
    tag = _same_tag(g, alpha)
    return AlgebraCovector(alpha.coords.copy(), tag)


def r_star(g: GroupElement, alpha: AlgebraCovector) -> AlgebraCovector:
    """Pullback of a left-trivialized covector under right translation by g.

    Right translation shifts the left-trivialized fibre coordinates by
    ``Ad_{g^-1}``, so the pullback on coordinates is ``Ad*_{g^-1}``.
    """
    tag = _same_tag(g, alpha)
    gi = inverse_matrix(g.matrix, tag)
    return AlgebraCovector(Ad_matrix(gi, tag).T @ alpha.coords, tag)
